use std::fmt;

use crate::ast::Span;
use crate::frontend::SyntaxError;

/// A user-facing error with an optional source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Option<Span>,
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn new(span: Option<Span>, code: &'static str, message: impl Into<String>) -> Self {
        Diagnostic {
            span,
            code,
            message: message.into(),
        }
    }

    /// `file:line:col: code: message`
    pub fn render(&self, file: &str) -> String {
        match self.span {
            Some(s) => format!("{file}:{}:{}: {}: {}", s.line, s.col, self.code, self.message),
            None => format!("{file}: {}: {}", self.code, self.message),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(s) => write!(f, "{s}: {}: {}", self.code, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

impl From<SyntaxError> for Diagnostic {
    fn from(e: SyntaxError) -> Self {
        Diagnostic::new(
            Some(e.span),
            "SyntaxError",
            format!("expected {}, found {}", e.expected.join(" or "), e.found),
        )
    }
}

pub fn render_all(diags: &[Diagnostic], file: &str) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&d.render(file));
        out.push('\n');
    }
    out
}
