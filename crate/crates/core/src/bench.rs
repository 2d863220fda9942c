//! Benchmark harness.
//!
//! Every (benchmark, version, scale) cell runs the engine binary as a child
//! process so that a wall-clock timeout can be enforced and the peak
//! resident set size read back from the kernel.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::corpus::{self, Benchmark, Facts, Version};
use crate::io;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// The `choicelog` executable.
    pub engine: PathBuf,
    pub benchmarks: Vec<&'static Benchmark>,
    pub versions: Vec<Version>,
    pub scales: Vec<usize>,
    pub timeout: Duration,
    pub seed: u64,
    pub reps: usize,
    /// Scratch space for programs, inputs and outputs.
    pub work_dir: PathBuf,
}

impl BenchConfig {
    pub fn new(engine: PathBuf, work_dir: PathBuf) -> Self {
        BenchConfig {
            engine,
            benchmarks: corpus::BENCHMARKS.iter().collect(),
            versions: Version::ALL.to_vec(),
            scales: vec![100, 500, 1000],
            timeout: Duration::from_secs(120),
            seed: 7,
            reps: 3,
            work_dir,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Timeout,
    /// The engine exited unsuccessfully.
    Failed(String),
    /// The engine succeeded but its output was rejected by the checker.
    Rejected(String),
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Timeout => "timeout",
            Status::Failed(_) => "failed",
            Status::Rejected(_) => "rejected",
        }
    }
}

/// One child-process run.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub status: Status,
    pub elapsed: Duration,
    /// Peak resident set size in KiB, when the platform reports it.
    pub peak_rss_kib: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub benchmark: &'static str,
    pub version: Version,
    pub scale: usize,
    pub status: Status,
    /// Minimum over repetitions; the timeout itself when timed out.
    pub seconds: f64,
    pub peak_rss_kib: Option<u64>,
    pub iterations: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub cells: Vec<CellResult>,
}

/// Runs `engine` with `args`, killing it after `timeout`.
pub fn measure(engine: &Path, args: &[&std::ffi::OsStr], timeout: Duration) -> std::io::Result<Measurement> {
    let start = Instant::now();
    let mut child = Command::new(engine)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()?;
    let stderr = child.stderr.take();
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        if let Some(mut e) = stderr {
            let _ = std::io::Read::read_to_string(&mut e, &mut s);
        }
        s
    });
    let (code, rss, timed_out) = wait_child(&mut child, start, timeout)?;
    let elapsed = start.elapsed();
    let err = reader.join().unwrap_or_default();
    let status = if timed_out {
        Status::Timeout
    } else if code == Some(0) {
        Status::Ok
    } else {
        let first = err.lines().next().unwrap_or("").to_string();
        Status::Failed(format!("exit {}: {first}", code.map_or("signal".to_string(), |c| c.to_string())))
    };
    Ok(Measurement {
        status,
        elapsed,
        peak_rss_kib: rss,
    })
}

/// Blocks until the child exits. A watchdog thread kills it at the timeout;
/// the child is only reaped after the watchdog has been disarmed so that the
/// kill can never hit a recycled pid.
#[cfg(unix)]
fn wait_child(
    child: &mut std::process::Child,
    _start: Instant,
    timeout: Duration,
) -> std::io::Result<(Option<i32>, Option<u64>, bool)> {
    use std::sync::{Arc, Condvar, Mutex};

    let pid = child.id() as libc::pid_t;
    // (finished, timed out)
    let state = Arc::new((Mutex::new((false, false)), Condvar::new()));
    let watchdog = {
        let state = Arc::clone(&state);
        std::thread::spawn(move || {
            let (lock, cvar) = &*state;
            let guard = lock.lock().unwrap();
            let (mut guard, _) = cvar
                .wait_timeout_while(guard, timeout, |(done, _)| !*done)
                .unwrap();
            if !guard.0 {
                // SAFETY: the child has not been reaped, so the pid is still ours.
                unsafe { libc::kill(pid, libc::SIGKILL) };
                guard.1 = true;
            }
        })
    };

    // SAFETY: siginfo_t is plain data.
    let mut info: libc::siginfo_t = unsafe { std::mem::zeroed() };
    loop {
        // SAFETY: valid pointer; WNOWAIT leaves the child waitable.
        let r = unsafe { libc::waitid(libc::P_PID, pid as libc::id_t, &mut info, libc::WEXITED | libc::WNOWAIT) };
        if r == 0 {
            break;
        }
        let e = std::io::Error::last_os_error();
        if e.kind() != std::io::ErrorKind::Interrupted {
            return Err(e);
        }
    }
    let timed_out = {
        let (lock, cvar) = &*state;
        let mut guard = lock.lock().unwrap();
        guard.0 = true;
        cvar.notify_all();
        guard.1
    };
    let _ = watchdog.join();

    let mut status = 0;
    // SAFETY: rusage is plain data and both pointers are valid for the call.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let r = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
    if r != pid {
        return Err(std::io::Error::last_os_error());
    }
    let code = libc::WIFEXITED(status).then(|| libc::WEXITSTATUS(status));
    Ok((code, Some(usage.ru_maxrss.max(0) as u64), timed_out))
}

#[cfg(not(unix))]
fn wait_child(
    child: &mut std::process::Child,
    start: Instant,
    timeout: Duration,
) -> std::io::Result<(Option<i32>, Option<u64>, bool)> {
    loop {
        if let Some(s) = child.try_wait()? {
            return Ok((s.code(), None, false));
        }
        if start.elapsed() >= timeout {
            child.kill()?;
            child.wait()?;
            return Ok((None, None, true));
        }
        std::thread::sleep(Duration::from_millis(2));
    }
}

/// Iteration count and peak RSS from a `--stats` file.
fn read_stats(path: &Path) -> (Option<u64>, Option<u64>) {
    let Some(v) = fs::read_to_string(path)
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
    else {
        return (None, None);
    };
    (v["iterations"].as_u64(), v["peak_rss_kib"].as_u64())
}

/// Runs one cell `reps` times and checks the output of every successful run.
pub fn run_cell(
    config: &BenchConfig,
    bench: &'static Benchmark,
    version: Version,
    scale: usize,
    input: &Facts,
    facts_dir: &Path,
) -> std::io::Result<CellResult> {
    let cell_dir = config.work_dir.join(format!("{}_{}_{}", bench.name, version, scale));
    fs::create_dir_all(&cell_dir)?;
    let program = cell_dir.join("program.dl");
    fs::write(&program, bench.source(version))?;
    let out_dir = cell_dir.join("out");
    let stats = cell_dir.join("stats.json");

    let mut best: Option<Measurement> = None;
    let mut status = Status::Ok;
    let mut iterations = None;
    for _ in 0..config.reps.max(1) {
        if out_dir.exists() {
            fs::remove_dir_all(&out_dir)?;
        }
        fs::create_dir_all(&out_dir)?;
        let args = [
            "run".as_ref(),
            program.as_os_str(),
            "--facts".as_ref(),
            facts_dir.as_os_str(),
            "--out".as_ref(),
            out_dir.as_os_str(),
            "--stats".as_ref(),
            stats.as_os_str(),
        ];
        let _ = fs::remove_file(&stats);
        let mut m = measure(&config.engine, &args, config.timeout)?;
        if m.status == Status::Ok {
            let (its, rss) = read_stats(&stats);
            iterations = its;
            // The engine's own high-water mark excludes memory inherited
            // from this process before exec.
            m.peak_rss_kib = rss.or(m.peak_rss_kib);
            let out = Facts::from([(
                bench.output.to_string(),
                io::read_rows(&out_dir.join(format!("{}.tsv", bench.output)))
                    .map_err(|e| std::io::Error::other(e.to_string()))?,
            )]);
            if let Err(e) = corpus::check(bench.name, input, &out) {
                status = Status::Rejected(e.message);
            }
        } else {
            status = m.status.clone();
        }
        if best.as_ref().is_none_or(|b| m.elapsed < b.elapsed) {
            best = Some(m.clone());
        }
        if status != Status::Ok {
            break;
        }
    }
    let best = best.expect("at least one repetition");
    if status != Status::Ok {
        iterations = None;
    }
    Ok(CellResult {
        benchmark: bench.name,
        version,
        scale,
        seconds: if status == Status::Timeout {
            config.timeout.as_secs_f64()
        } else {
            best.elapsed.as_secs_f64()
        },
        status,
        peak_rss_kib: best.peak_rss_kib,
        iterations,
    })
}

/// Runs every configured cell. Failing cells are recorded and the harness
/// moves on.
pub fn run(config: &BenchConfig) -> std::io::Result<Report> {
    let mut report = Report::default();
    for &bench in &config.benchmarks {
        for &scale in &config.scales {
            let input = corpus::generate(bench.name, config.seed, scale)
                .ok_or_else(|| std::io::Error::other(format!("no generator for {}", bench.name)))?;
            let facts_dir = config.work_dir.join(format!("{}_{}_facts", bench.name, scale));
            corpus::write_facts(&facts_dir, &input).map_err(|e| std::io::Error::other(e.to_string()))?;
            for &version in &config.versions {
                report
                    .cells
                    .push(run_cell(config, bench, version, scale, &input, &facts_dir)?);
            }
        }
    }
    Ok(report)
}

/// Native time over choice time, rendered with `>` or `<` when either side
/// timed out.
fn speedup(choice: &CellResult, native: &CellResult) -> String {
    let ratio = native.seconds / choice.seconds.max(1e-9);
    match (&choice.status, &native.status) {
        (Status::Ok, Status::Ok) => format!("{ratio:.2}"),
        (Status::Ok, Status::Timeout) => format!(">{ratio:.2}"),
        (Status::Timeout, Status::Ok) => format!("<{ratio:.2}"),
        _ => "-".to_string(),
    }
}

impl Report {
    pub fn cell(&self, benchmark: &str, version: Version, scale: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.benchmark == benchmark && c.version == version && c.scale == scale)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("benchmark\tversion\tscale\tstatus\tseconds\tpeak_rss_kib\titerations\tdetail\n");
        for c in &self.cells {
            let detail = match &c.status {
                Status::Failed(m) | Status::Rejected(m) => m.replace(['\t', '\n'], " "),
                _ => String::new(),
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}",
                c.benchmark,
                c.version,
                c.scale,
                c.status.label(),
                c.seconds,
                c.peak_rss_kib.map_or(String::new(), |k| k.to_string()),
                c.iterations.map_or(String::new(), |k| k.to_string()),
                detail,
            );
        }
        s
    }

    /// One row per (benchmark, scale) with time and memory per version and
    /// the native/choice speedup.
    pub fn to_table(&self) -> String {
        let mut keys: Vec<(&str, usize)> = self.cells.iter().map(|c| (c.benchmark, c.scale)).collect();
        keys.dedup();
        let mut rows = vec![vec![
            "benchmark".to_string(),
            "scale".to_string(),
            "choice s".to_string(),
            "rulechoice s".to_string(),
            "native s".to_string(),
            "speedup".to_string(),
            "choice MB".to_string(),
            "rulechoice MB".to_string(),
            "native MB".to_string(),
        ]];
        for (b, scale) in keys {
            let get = |v| self.cell(b, v, scale);
            let time = |v| {
                get(v).map_or("-".to_string(), |c| match c.status {
                    Status::Ok => format!("{:.3}", c.seconds),
                    Status::Timeout => "timeout".to_string(),
                    _ => c.status.label().to_string(),
                })
            };
            let mem = |v| {
                get(v)
                    .and_then(|c| c.peak_rss_kib)
                    .map_or(String::new(), |k| format!("{:.1}", k as f64 / 1024.0))
            };
            let sp = match (get(Version::Choice), get(Version::Native)) {
                (Some(c), Some(n)) => speedup(c, n),
                _ => "-".to_string(),
            };
            rows.push(vec![
                b.to_string(),
                scale.to_string(),
                time(Version::Choice),
                time(Version::RuleChoice),
                time(Version::Native),
                sp,
                mem(Version::Choice),
                mem(Version::RuleChoice),
                mem(Version::Native),
            ]);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r.iter().zip(&widths).map(|(f, w)| format!("{f:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
