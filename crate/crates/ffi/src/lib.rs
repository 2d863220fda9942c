//! C interface to the choicelog engine.
//!
//! Every function returns a [`ChlStatus`]; on failure a description is kept
//! per thread and can be read with [`chl_last_error`]. Handles are opaque and
//! owned by the caller, who releases them with the matching `_free` function.
//! Strings handed out by the library are released with [`chl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use choicelog::eval::{ChoicePolicy, EvalOptions};
use choicelog::storage::Instance;
use choicelog::Compiled;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    CompileError = 3,
    UnknownRelation = 4,
    InvalidTuple = 5,
    EvalError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChlPolicy {
    First = 0,
    Shuffled = 1,
}

/// A compiled program.
pub struct ChlProgram {
    compiled: Compiled,
}

/// The tuples of every relation of one program.
pub struct ChlInstance {
    instance: Instance,
    iterations: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(ChlStatus, String);

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ChlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ChlStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ChlStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(ChlStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ChlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(ChlStatus::NullArgument, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(ChlStatus::NullArgument, format!("{what} is null")))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Description of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn chl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Compiles `source` into `*out`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chl_program_compile(source: *const c_char, out: *mut *mut ChlProgram) -> ChlStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let source = text(source, "source")?;
        let compiled = choicelog::compile(source)
            .map_err(|d| Failure(ChlStatus::CompileError, choicelog::diag::render_all(&d, "<source>")))?;
        *out = Box::into_raw(Box::new(ChlProgram { compiled }));
        Ok(())
    })
}

/// # Safety
/// `program` must come from [`chl_program_compile`] or be null.
#[no_mangle]
pub unsafe extern "C" fn chl_program_free(program: *mut ChlProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// The guarded RAM program as text, in `*out`.
///
/// # Safety
/// `program` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chl_program_emit_ram(program: *const ChlProgram, out: *mut *mut c_char) -> ChlStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let program = handle(program, "program")?;
        *out = owned_string(program.compiled.emit_ram());
        Ok(())
    })
}

/// An empty instance for `program`, ready for input tuples.
///
/// # Safety
/// `program` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chl_instance_new(program: *const ChlProgram, out: *mut *mut ChlInstance) -> ChlStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let program = handle(program, "program")?;
        let instance = program.compiled.instance();
        *out = Box::into_raw(Box::new(ChlInstance { instance, iterations: 0 }));
        Ok(())
    })
}

/// # Safety
/// `instance` must come from [`chl_instance_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn chl_instance_free(instance: *mut ChlInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Adds one tuple to `relation`. Fields are given as text; numbers are
/// parsed according to the declared attribute types.
///
/// # Safety
/// `instance` must be a live handle, `relation` a NUL-terminated string and
/// `fields` an array of `len` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn chl_instance_insert(
    instance: *mut ChlInstance,
    relation: *const c_char,
    fields: *const *const c_char,
    len: usize,
) -> ChlStatus {
    guard(|| {
        let instance = handle_mut(instance, "instance")?;
        let relation = text(relation, "relation")?;
        if fields.is_null() && len > 0 {
            return Err(Failure(ChlStatus::NullArgument, "fields is null".into()));
        }
        let values = (0..len)
            .map(|i| text(*fields.add(i), "field"))
            .collect::<Result<Vec<_>, _>>()?;
        let inst = &mut instance.instance;
        if inst.id(relation).is_none() {
            return Err(Failure(ChlStatus::UnknownRelation, format!("unknown relation `{relation}`")));
        }
        let t = inst
            .encode(relation, &values)
            .map_err(|e| Failure(ChlStatus::InvalidTuple, e))?;
        inst.relation_mut(relation)
            .expect("relation exists")
            .insert(&t)
            .map_err(|e| Failure(ChlStatus::InvalidTuple, e.to_string()))?;
        Ok(())
    })
}

/// Evaluates `program` to a fixpoint, starting from and replacing the
/// contents of `instance`. `seed` is used by [`ChlPolicy::Shuffled`] only.
///
/// # Safety
/// Both handles must be live and `instance` must have been created from
/// `program`.
#[no_mangle]
pub unsafe extern "C" fn chl_program_run(
    program: *const ChlProgram,
    instance: *mut ChlInstance,
    policy: ChlPolicy,
    seed: u64,
) -> ChlStatus {
    guard(|| {
        let program = handle(program, "program")?;
        let instance = handle_mut(instance, "instance")?;
        let opts = EvalOptions {
            policy: match policy {
                ChlPolicy::First => ChoicePolicy::First,
                ChlPolicy::Shuffled => ChoicePolicy::Shuffled(seed),
            },
            ..Default::default()
        };
        let edb = std::mem::replace(&mut instance.instance, program.compiled.instance());
        let outcome = program
            .compiled
            .run_with(edb, &opts)
            .map_err(|e| Failure(ChlStatus::EvalError, e.to_string()))?;
        instance.instance = outcome.instance;
        instance.iterations = outcome.stats.iterations;
        Ok(())
    })
}

/// Number of tuples in `relation`.
///
/// # Safety
/// `instance` must be a live handle, `relation` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chl_instance_size(
    instance: *const ChlInstance,
    relation: *const c_char,
    out: *mut usize,
) -> ChlStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        let instance = handle(instance, "instance")?;
        let relation = text(relation, "relation")?;
        let rel = instance
            .instance
            .relation(relation)
            .ok_or_else(|| Failure(ChlStatus::UnknownRelation, format!("unknown relation `{relation}`")))?;
        *out = rel.len();
        Ok(())
    })
}

/// The tuples of `relation` as tab-separated lines, in `*out`.
///
/// # Safety
/// `instance` must be a live handle, `relation` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chl_instance_dump(
    instance: *const ChlInstance,
    relation: *const c_char,
    out: *mut *mut c_char,
) -> ChlStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let instance = handle(instance, "instance")?;
        let relation = text(relation, "relation")?;
        let rows = instance
            .instance
            .rows(relation)
            .ok_or_else(|| Failure(ChlStatus::UnknownRelation, format!("unknown relation `{relation}`")))?;
        let mut s = String::new();
        for row in rows {
            s += &row.join("\t");
            s.push('\n');
        }
        *out = owned_string(s);
        Ok(())
    })
}

/// Fixpoint iterations executed by the last [`chl_program_run`] on `instance`.
///
/// # Safety
/// `instance` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chl_instance_iterations(instance: *const ChlInstance, out: *mut u64) -> ChlStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = handle(instance, "instance")?.iterations;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn chl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
