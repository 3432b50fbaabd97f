//! Run diagnostics with 1-based line:column positions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warn,
    Error,
}

/// A non-fatal message attached to a source position. Diagnostics that do
/// not refer to any position in the input use line 0, column 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn warn_at(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let (line, column) = line_col(text, offset);
        Diagnostic {
            severity: Severity::Warn,
            line,
            column,
            message: message.into(),
        }
    }

    pub fn error_at(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let (line, column) = line_col(text, offset);
        Diagnostic {
            severity: Severity::Error,
            line,
            column,
            message: message.into(),
        }
    }

    pub fn warn(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warn,
            line: 0,
            column: 0,
            message: message.into(),
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            line: 0,
            column: 0,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.severity {
            Severity::Warn => "warn",
            Severity::Error => "error",
        };
        if self.line == 0 {
            write!(f, "{}: {}", kind, self.message)
        } else {
            write!(
                f,
                "{} {}:{}: {}",
                kind, self.line, self.column, self.message
            )
        }
    }
}

/// 1-based (line, column) of a byte offset. Columns count characters from
/// the start of the line, so multi-byte input positions stay meaningful.
pub fn line_col(text: &str, offset: usize) -> (u32, u32) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.bytes().filter(|&b| b == b'\n').count() as u32 + 1;
    let line_start = before.rfind('\n').map(|p| p + 1).unwrap_or(0);
    let column = text[line_start..offset].chars().count() as u32 + 1;
    (line, column)
}
