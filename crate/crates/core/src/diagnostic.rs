use std::fmt;

use serde::{Deserialize, Serialize};

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Lexical,
    Syntax,
    DuplicateName,
    UnknownVariable,
    UnknownArray,
    RankMismatch,
    Shadowing,
    NonAffine,
    InvalidDivisor,
    InvalidStep,
    /// Informational notes attached to successful reports.
    Note,
    NoClosedForm,
    Resource,
    Timeout,
    Internal,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Lexical => "lexical",
            Category::Syntax => "syntax",
            Category::DuplicateName => "duplicate-name",
            Category::UnknownVariable => "unknown-variable",
            Category::UnknownArray => "unknown-array",
            Category::RankMismatch => "rank-mismatch",
            Category::Shadowing => "shadowing",
            Category::NonAffine => "non-affine",
            Category::InvalidDivisor => "invalid-divisor",
            Category::InvalidStep => "invalid-step",
            Category::Note => "note",
            Category::NoClosedForm => "no-closed-form",
            Category::Resource => "resource",
            Category::Timeout => "timeout",
            Category::Internal => "internal",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A located message. Serializes as `{category, message, start, end}`;
/// notes without a source location carry `null` offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostic {
    pub category: Category,
    pub message: String,
    pub start: Option<usize>,
    pub end: Option<usize>,
}

impl Diagnostic {
    pub fn new(category: Category, message: impl Into<String>, span: Span) -> Self {
        Diagnostic { category, message: message.into(), start: Some(span.start), end: Some(span.end) }
    }

    pub fn note(category: Category, message: impl Into<String>) -> Self {
        Diagnostic { category, message: message.into(), start: None, end: None }
    }

    pub fn span(&self) -> Option<Span> {
        Some(Span::new(self.start?, self.end?))
    }

    /// Renders `line:col: category: message` against the original source.
    pub fn render(&self, source: &str) -> String {
        let cat = self.category.as_str();
        let text =
            if self.message.starts_with(cat) { self.message.clone() } else { format!("{cat}: {}", self.message) };
        match self.start {
            Some(start) => {
                let (line, col) = line_col(source, start);
                format!("{line}:{col}: {text}")
            }
            None => text,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.start, self.end) {
            (Some(s), Some(e)) => write!(f, "{}: {} (at {s}..{e})", self.category, self.message),
            _ => write!(f, "{}: {}", self.category, self.message),
        }
    }
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..source.floor_char_boundary_compat(offset)];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

trait FloorCharBoundary {
    fn floor_char_boundary_compat(&self, index: usize) -> usize;
}

impl FloorCharBoundary for str {
    fn floor_char_boundary_compat(&self, mut index: usize) -> usize {
        while index > 0 && !self.is_char_boundary(index) {
            index -= 1;
        }
        index
    }
}
