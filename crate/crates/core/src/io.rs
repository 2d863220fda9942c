//! Tab-separated fact files.
//!
//! One tuple per line, fields separated by a single TAB. Symbols are written
//! raw; numbers in decimal. A nullary tuple is an empty line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ast::AttrType;
use crate::storage::{Relation, SymbolTable, Tuple, Value};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}:{col}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        col: usize,
        message: String,
    },
}

pub fn read_facts(
    path: &Path,
    types: &[AttrType],
    symbols: &mut SymbolTable,
) -> Result<Vec<Tuple>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_facts(&text, types, symbols).map_err(|(line, col, message)| IoError::Parse {
        path: path.to_path_buf(),
        line,
        col,
        message,
    })
}

/// Parses fact text. Errors carry a 1-based line and column.
pub fn parse_facts(
    text: &str,
    types: &[AttrType],
    symbols: &mut SymbolTable,
) -> Result<Vec<Tuple>, (usize, usize, String)> {
    let mut out = Vec::new();
    for (n, line) in text.split_terminator('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let lineno = n + 1;
        if types.is_empty() {
            if !line.is_empty() {
                return Err((lineno, 1, "nullary relation expects empty lines".into()));
            }
            out.push(Tuple::new());
            continue;
        }
        let mut t = Tuple::new();
        let mut col = 1;
        for (i, field) in line.split('\t').enumerate() {
            let Some(ty) = types.get(i) else {
                return Err((
                    lineno,
                    col,
                    format!("expected {} fields, found more", types.len()),
                ));
            };
            t.push(match ty {
                AttrType::Symbol => symbols.intern(field),
                AttrType::Number => field
                    .parse::<i64>()
                    .map_err(|_| (lineno, col, format!("`{field}` is not a number")))?,
            });
            col += field.chars().count() + 1;
        }
        if t.len() != types.len() {
            return Err((
                lineno,
                col,
                format!("expected {} fields, found {}", types.len(), t.len()),
            ));
        }
        out.push(t);
    }
    Ok(out)
}

pub fn format_tuple(t: &[i64], types: &[AttrType], symbols: &SymbolTable) -> String {
    let mut line = String::new();
    for (i, (&v, ty)) in t.iter().zip(types).enumerate() {
        if i > 0 {
            line.push('\t');
        }
        match ty {
            AttrType::Symbol => line.push_str(&Value::Sym(v).display(symbols).to_string()),
            AttrType::Number => line.push_str(&v.to_string()),
        }
    }
    line
}

pub fn write_tsv(
    path: &Path,
    rel: &Relation,
    types: &[AttrType],
    symbols: &SymbolTable,
) -> Result<(), IoError> {
    let err = |source| IoError::File {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(err)?);
    for t in rel.iter() {
        writeln!(f, "{}", format_tuple(t, types, symbols)).map_err(err)?;
    }
    f.flush().map_err(err)
}

/// Writes rows of already-rendered fields.
pub fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<(), IoError> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&r.join("\t"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a TSV file into rows of fields; a missing file reads as no rows.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<String>>, IoError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text
            .split_terminator('\n')
            .map(|l| {
                if l.is_empty() {
                    Vec::new()
                } else {
                    l.split('\t').map(str::to_string).collect()
                }
            })
            .collect()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(source) => Err(IoError::File {
            path: path.to_path_buf(),
            source,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_typed_fields() {
        let mut s = SymbolTable::new();
        let t = parse_facts("a\t-3\nb\t4\n", &[AttrType::Symbol, AttrType::Number], &mut s).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].as_slice(), &[0, -3]);
        assert_eq!(s.resolve(1), "b");
    }

    #[test]
    fn reports_positions() {
        let mut s = SymbolTable::new();
        let e = parse_facts("a\t1\nbb\tx\n", &[AttrType::Symbol, AttrType::Number], &mut s).unwrap_err();
        assert_eq!((e.0, e.1), (2, 4));
        let e = parse_facts("a\tb\tc\n", &[AttrType::Symbol, AttrType::Symbol], &mut s).unwrap_err();
        assert_eq!((e.0, e.1), (1, 5));
        let e = parse_facts("a\n", &[AttrType::Symbol, AttrType::Symbol], &mut s).unwrap_err();
        assert_eq!(e.0, 1);
    }

    #[test]
    fn nullary_tuples_are_empty_lines() {
        let mut s = SymbolTable::new();
        assert_eq!(parse_facts("\n", &[], &mut s).unwrap().len(), 1);
        assert_eq!(parse_facts("", &[], &mut s).unwrap().len(), 0);
    }
}
