//! Scenario files: parsing, static checking and canonical formatting.
//!
//! ```text
//! scenario := "scenario" STRING "{" item* "}"
//! item     := ("dt"|"horizon"|"seed") "=" NUMBER
//!           | "pool" IDENT "{" "initial" "=" (NUMBER | "abundant") "}"
//!           | "agent" IDENT "{" "initial" "=" NUMBER ["role" "=" IDENT] "}"
//!           | "cycle" IDENT ["tag" "=" ("n"|"g"|"c")] "{" "actor" "=" IDENT
//!               "va" "=" expr  "ve" "=" expr "from" IDENT
//!               "vl" "=" expr ["to" IDENT]  ["vg" "to" IDENT] "}"
//!           | "at" NUMBER ("jolt" IDENT ("va"|"ve"|"vl") NUMBER "from" IDENT
//!                         | "set" ref "=" NUMBER)
//!           | "detect" IDENT ["(" IDENT ("," IDENT)* ")"]
//! expr     := NUMBER | "prop" "(" ref "," NUMBER ")" | "ramp" "(" NUMBER "," NUMBER ")"
//! ref      := IDENT ["." IDENT]
//! ```
//!
//! Comments run from `--` to the end of the line. Numbers carry at most six
//! fractional digits.

use std::fmt;

use serde::Serialize;

pub mod ast;
mod check;
mod format;
mod lexer;
mod parser;

pub use ast::*;
pub use check::check_scenario;
pub use format::format_scenario;
pub use parser::parse_scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn new(severity: Severity, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity,
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }

    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic::new(Severity::Error, span, message)
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Diagnostic::new(Severity::Warning, span, message)
    }

    pub fn info(span: Span, message: impl Into<String>) -> Self {
        Diagnostic::new(Severity::Info, span, message)
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.column, self.severity, self.message)
    }
}
