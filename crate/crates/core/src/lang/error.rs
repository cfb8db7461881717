use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Eval,
    Numeric,
    Resource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

/// An error raised while parsing or evaluating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LangError {
    pub kind: ErrorKind,
    pub message: String,
    pub location: Option<Location>,
}

impl LangError {
    pub fn parse(message: impl Into<String>, line: usize, column: usize) -> Self {
        LangError {
            kind: ErrorKind::Parse,
            message: message.into(),
            location: Some(Location { line, column }),
        }
    }

    pub fn eval(message: impl Into<String>) -> Self {
        LangError {
            kind: ErrorKind::Eval,
            message: message.into(),
            location: None,
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        LangError {
            kind: ErrorKind::Numeric,
            message: message.into(),
            location: None,
        }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        LangError {
            kind: ErrorKind::Resource,
            message: message.into(),
            location: None,
        }
    }

    /// Prefixes the message with the name of the function that failed.
    pub fn in_call(mut self, name: &str) -> Self {
        if self.kind != ErrorKind::Resource && self.kind != ErrorKind::Parse && !self.message.starts_with("in ") {
            self.message = format!("in {name}(): {}", self.message);
        }
        self
    }
}

impl fmt::Display for LangError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some(loc) => write!(f, "{} (line {}, column {})", self.message, loc.line, loc.column),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for LangError {}

pub type LangResult<T> = Result<T, LangError>;
