//! Turning request fields into argument values.
//!
//! Text fields (urlencoded or multipart) resolve in order: a bare session
//! key to that session's `.val`; `key::name` to a named object in that
//! session; inline JSON (text starting with `[` or `{`) as data; anything
//! else as one expression of the embedded language, evaluated in an empty
//! budgeted context. JSON body fields are data. Uploaded files are placed
//! in the working directory and the argument becomes the file name.

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::json;
use crate::lang::{deparse, eval_expr, parse_single, Budget, ErrorKind, EvalContext, Expr, LangError};
use crate::value::{SessionKey, Value};

/// Where a request field came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    UrlencodedField,
    MultipartField,
    MultipartFile { filename: String },
    JsonField,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgumentSource {
    pub origin: Origin,
    pub name: String,
    pub raw: Vec<u8>,
}

/// Read access to stored sessions.
pub trait SessionLookup {
    /// The object `name` of session `key`. `Err` carries a message such as
    /// "session not found" or "object not found".
    fn session_object(&self, key: &SessionKey, name: &str) -> Result<Value, String>;
}

/// How an argument value was obtained, kept for the call record.
#[derive(Clone, Debug)]
pub enum Provenance {
    Code(Expr),
    Json(String),
    Key { key: SessionKey, object: String },
    File { filename: String, sha256: String },
}

#[derive(Clone, Debug)]
pub struct ImportedArgument {
    pub name: String,
    pub value: Value,
    pub provenance: Provenance,
    /// Bytes to place in the working directory, for uploaded files.
    pub file: Option<(String, Vec<u8>)>,
}

impl ImportedArgument {
    /// The argument as it appears in a deparsed call.
    pub fn source_text(&self) -> String {
        match &self.provenance {
            Provenance::Code(e) => deparse(e),
            Provenance::Json(text) => text.clone(),
            Provenance::Key { key, object } if object == ".val" => key.to_string(),
            Provenance::Key { key, object } => format!("{key}::{object}"),
            Provenance::File { filename, .. } => crate::lang::ast::quote_string(filename),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ImportError {
    /// Bad input from the client (maps to 400).
    #[error("argument '{field}': {msg}")]
    Argument { field: String, msg: String },
    /// A budget ran out while evaluating an argument (maps to 503).
    #[error("argument '{field}': {msg}")]
    Resource { field: String, msg: String },
}

/// Limits for evaluating code arguments.
#[derive(Clone, Copy, Debug)]
pub struct ImportLimits {
    pub timeout: Option<std::time::Duration>,
    pub cell_limit: u64,
    pub seed: u64,
}

fn key_reference(text: &str) -> Option<(SessionKey, String)> {
    let (key, object) = match text.split_once("::") {
        Some((k, o)) => (k, o.to_string()),
        None => (text, ".val".to_string()),
    };
    let key = SessionKey::parse(key).ok()?;
    let ident = |s: &str| {
        let mut chars = s.chars();
        chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '.')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_')
    };
    ident(&object).then_some((key, object))
}

fn check_filename(field: &str, name: &str) -> Result<(), ImportError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\', '\0']);
    if ok {
        Ok(())
    } else {
        Err(ImportError::Argument {
            field: field.to_string(),
            msg: format!("invalid upload file name '{name}'"),
        })
    }
}

fn lang_error(field: &str, e: LangError) -> ImportError {
    if e.kind == ErrorKind::Resource {
        ImportError::Resource {
            field: field.to_string(),
            msg: e.to_string(),
        }
    } else {
        ImportError::Argument {
            field: field.to_string(),
            msg: e.to_string(),
        }
    }
}

/// Evaluates one code argument in a fresh context.
pub fn eval_code(text: &str, limits: &ImportLimits) -> Result<(Expr, Value), LangError> {
    let expr = parse_single(text)?;
    let mut ctx = EvalContext::new(Budget::new(limits.timeout, limits.cell_limit), limits.seed);
    let value = eval_expr(&expr, &mut ctx)?;
    Ok((expr, value))
}

pub fn import_argument(
    a: &ArgumentSource,
    store: &dyn SessionLookup,
    limits: &ImportLimits,
) -> Result<ImportedArgument, ImportError> {
    let field = a.name.as_str();
    let arg_err = |msg: String| ImportError::Argument {
        field: field.to_string(),
        msg,
    };
    let done = |value, provenance| ImportedArgument {
        name: field.to_string(),
        value,
        provenance,
        file: None,
    };
    match &a.origin {
        Origin::MultipartFile { filename } => {
            check_filename(field, filename)?;
            let sha256 = hex::encode(Sha256::digest(&a.raw));
            Ok(ImportedArgument {
                name: field.to_string(),
                value: Value::string(filename.clone()),
                provenance: Provenance::File {
                    filename: filename.clone(),
                    sha256,
                },
                file: Some((filename.clone(), a.raw.clone())),
            })
        }
        Origin::JsonField => {
            let text = String::from_utf8_lossy(&a.raw).into_owned();
            let value = json::import_json(&a.raw).map_err(|e| arg_err(e.to_string()))?;
            Ok(done(value, Provenance::Json(text)))
        }
        Origin::UrlencodedField | Origin::MultipartField => {
            let text = std::str::from_utf8(&a.raw).map_err(|_| arg_err("value is not valid UTF-8".into()))?;
            let trimmed = text.trim();
            if let Some((key, object)) = key_reference(trimmed) {
                let value = store.session_object(&key, &object).map_err(|msg| arg_err(format!("{trimmed}: {msg}")))?;
                return Ok(done(value, Provenance::Key { key, object }));
            }
            if trimmed.starts_with('[') || trimmed.starts_with('{') {
                let value = json::import_json(trimmed.as_bytes()).map_err(|e| arg_err(e.to_string()))?;
                return Ok(done(value, Provenance::Json(trimmed.to_string())));
            }
            let (expr, value) = eval_code(text, limits).map_err(|e| lang_error(field, e))?;
            Ok(done(value, Provenance::Code(expr)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    struct Sessions(BTreeMap<String, Value>);

    impl SessionLookup for Sessions {
        fn session_object(&self, key: &SessionKey, name: &str) -> Result<Value, String> {
            self.0
                .get(&format!("{key}::{name}"))
                .cloned()
                .ok_or_else(|| "session not found".to_string())
        }
    }

    fn store() -> Sessions {
        let mut m = BTreeMap::new();
        m.insert("x0a1b2c3d4e5f6071829::.val".into(), Value::numbers([1.0, 2.0]));
        m.insert("x0a1b2c3d4e5f6071829::fit".into(), Value::number(7.0));
        Sessions(m)
    }

    const LIMITS: ImportLimits = ImportLimits {
        timeout: None,
        cell_limit: 1_000_000,
        seed: 1,
    };

    fn field(name: &str, raw: &str) -> ArgumentSource {
        ArgumentSource {
            origin: Origin::UrlencodedField,
            name: name.into(),
            raw: raw.as_bytes().to_vec(),
        }
    }

    #[test]
    fn code_fields_are_evaluated() {
        let a = import_argument(&field("n", "10"), &store(), &LIMITS).unwrap();
        assert_eq!(a.value, Value::number(10.0));
        let a = import_argument(&field("x", "c(1, NA) * 2"), &store(), &LIMITS).unwrap();
        assert_eq!(a.source_text(), "c(1, NA) * 2");
    }

    #[test]
    fn keys_resolve_through_the_store() {
        let a = import_argument(&field("x", "x0a1b2c3d4e5f6071829"), &store(), &LIMITS).unwrap();
        assert_eq!(a.value, Value::numbers([1.0, 2.0]));
        let a = import_argument(&field("x", "x0a1b2c3d4e5f6071829::fit"), &store(), &LIMITS).unwrap();
        assert_eq!(a.value, Value::number(7.0));
        let e = import_argument(&field("x", "xffffffffffffffffff0"), &store(), &LIMITS).unwrap_err();
        assert!(matches!(e, ImportError::Argument { ref field, .. } if field == "x"));
    }

    #[test]
    fn inline_json_and_json_fields_are_data() {
        let a = import_argument(&field("y", "{\"a\": true}"), &store(), &LIMITS).unwrap();
        assert!(matches!(a.value, Value::List(_)));
        let j = ArgumentSource {
            origin: Origin::JsonField,
            name: "x".into(),
            raw: b"[1,2,3]".to_vec(),
        };
        assert_eq!(import_argument(&j, &store(), &LIMITS).unwrap().value, Value::numbers([1.0, 2.0, 3.0]));
    }

    #[test]
    fn failures_are_classified() {
        let e = import_argument(&field("x", "f("), &store(), &LIMITS).unwrap_err();
        assert!(matches!(e, ImportError::Argument { .. }));
        let e = import_argument(&field("x", "rep(0, 10^12)"), &store(), &LIMITS).unwrap_err();
        assert!(matches!(e, ImportError::Resource { .. }));
    }

    #[test]
    fn files_become_their_names() {
        let f = ArgumentSource {
            origin: Origin::MultipartFile {
                filename: "data.csv".into(),
            },
            name: "file".into(),
            raw: b"x\n1\n".to_vec(),
        };
        let a = import_argument(&f, &store(), &LIMITS).unwrap();
        assert_eq!(a.value, Value::string("data.csv"));
        assert_eq!(a.file.as_ref().unwrap().1, b"x\n1\n");
        let bad = ArgumentSource {
            origin: Origin::MultipartFile {
                filename: "../etc/passwd".into(),
            },
            ..f
        };
        assert!(import_argument(&bad, &store(), &LIMITS).is_err());
    }
}
