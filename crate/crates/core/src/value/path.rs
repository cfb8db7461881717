use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("empty path segment")]
    EmptySegment,
    #[error("path traversal is not allowed")]
    Traversal,
}

/// A container-relative resource address, e.g. `R/cats` + format `json`.
///
/// Segments are case-sensitive, non-empty and never `.` or `..`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResourcePath {
    segments: Vec<String>,
    /// The request named a directory (`R/` rather than `R`).
    pub trailing_slash: bool,
    pub format: Option<String>,
    pub params: BTreeMap<String, String>,
}

impl ResourcePath {
    pub fn new(segments: Vec<String>, trailing_slash: bool) -> Result<Self, PathError> {
        for s in &segments {
            if s.is_empty() {
                return Err(PathError::EmptySegment);
            }
            if s == "." || s == ".." {
                return Err(PathError::Traversal);
            }
        }
        Ok(ResourcePath {
            segments,
            trailing_slash,
            format: None,
            params: BTreeMap::new(),
        })
    }

    /// Parses `a/b/c` or `a/b/` (a leading slash is ignored).
    pub fn parse(text: &str) -> Result<Self, PathError> {
        let text = text.strip_prefix('/').unwrap_or(text);
        if text.is_empty() {
            return ResourcePath::new(Vec::new(), true);
        }
        let trailing = text.ends_with('/');
        let body = text.strip_suffix('/').unwrap_or(text);
        ResourcePath::new(body.split('/').map(str::to_string).collect(), trailing)
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn joined(&self) -> String {
        self.segments.join("/")
    }

    pub fn with_format(mut self, format: Option<String>, params: BTreeMap<String, String>) -> Self {
        self.format = format;
        self.params = params;
        self
    }
}
