//! The call record stored with every session as `call.json`.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::bin;
use crate::formats::import::{eval_code, ImportLimits, ImportedArgument, Provenance};
use crate::lang::{deparse, parse_single, Expr};
use crate::value::{Closure, FnEnv, Function, SessionKey, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Function,
    Script,
}

/// The container an RPC targeted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerRef {
    Package { name: String, version: String },
    Session { key: String },
}

/// A value as it was when the call ran.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum Snapshot {
    /// Base64 of the bin encoding.
    Bin { data: String },
    /// Deparsed closure or builtin name.
    Function { source: String },
}

impl Snapshot {
    /// `None` for values that hold functions below the top level.
    pub fn of(v: &Value) -> Option<Snapshot> {
        match v {
            Value::Function(Function::Builtin(name)) => Some(Snapshot::Function {
                source: name.to_string(),
            }),
            Value::Function(Function::Closure(c)) => Some(Snapshot::Function {
                source: deparse(&Expr::Function {
                    params: c.params.clone(),
                    body: Box::new((*c.body).clone()),
                }),
            }),
            v if v.contains_function() => None,
            v => bin::encode(v).ok().map(|b| Snapshot::Bin { data: B64.encode(b) }),
        }
    }

    pub fn restore(&self) -> Result<Value, String> {
        match self {
            Snapshot::Bin { data } => {
                let bytes = B64.decode(data).map_err(|e| format!("corrupt snapshot: {e}"))?;
                bin::decode(&bytes).map_err(|e| format!("corrupt snapshot: {e}"))
            }
            Snapshot::Function { source } => {
                if let Some(b) = crate::lang::builtins::lookup(source) {
                    return Ok(Value::Function(Function::Builtin(b)));
                }
                match parse_single(source).map_err(|e| format!("corrupt function snapshot: {e}"))? {
                    Expr::Function { params, body } => Ok(Value::Function(Function::Closure(Closure {
                        params,
                        body: Arc::new(*body),
                        env: FnEnv::sealed(Default::default(), None, None),
                    }))),
                    _ => Err("corrupt function snapshot: not a function".into()),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArgOrigin {
    Code { text: String },
    Json { text: String },
    Key { key: String, object: String },
    File { filename: String, sha256: String, content: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedArg {
    pub name: String,
    pub origin: ArgOrigin,
    /// Absent only for code arguments whose value cannot be snapshotted;
    /// those are re-evaluated with the recorded seed.
    pub value: Option<Snapshot>,
}

impl RecordedArg {
    pub fn capture(a: &ImportedArgument) -> RecordedArg {
        let origin = match &a.provenance {
            Provenance::Code(e) => ArgOrigin::Code { text: deparse(e) },
            Provenance::Json(text) => ArgOrigin::Json { text: text.clone() },
            Provenance::Key { key, object } => ArgOrigin::Key {
                key: key.to_string(),
                object: object.clone(),
            },
            Provenance::File { filename, sha256 } => ArgOrigin::File {
                filename: filename.clone(),
                sha256: sha256.clone(),
                content: B64.encode(a.file.as_ref().map(|(_, b)| b.as_slice()).unwrap_or_default()),
            },
        };
        RecordedArg {
            name: a.name.clone(),
            origin,
            value: Snapshot::of(&a.value),
        }
    }

    /// Rebuilds the argument without consulting any other session.
    pub fn restore(&self, limits: &ImportLimits) -> Result<ImportedArgument, String> {
        let field = &self.name;
        let value = match (&self.value, &self.origin) {
            (Some(s), _) => s.restore()?,
            (None, ArgOrigin::Code { text }) => {
                eval_code(text, limits).map_err(|e| format!("argument '{field}': {e}"))?.1
            }
            (None, _) => return Err(format!("argument '{field}' has no recorded value")),
        };
        let (provenance, file) = match &self.origin {
            ArgOrigin::Code { text } => (
                Provenance::Code(parse_single(text).map_err(|e| format!("argument '{field}': {e}"))?),
                None,
            ),
            ArgOrigin::Json { text } => (Provenance::Json(text.clone()), None),
            ArgOrigin::Key { key, object } => (
                Provenance::Key {
                    key: SessionKey::parse(key).map_err(|e| format!("argument '{field}': {e}"))?,
                    object: object.clone(),
                },
                None,
            ),
            ArgOrigin::File {
                filename,
                sha256,
                content,
            } => {
                let bytes = B64.decode(content).map_err(|e| format!("argument '{field}': {e}"))?;
                if hex::encode(Sha256::digest(&bytes)) != *sha256 {
                    return Err(format!("argument '{field}': stored file does not match its digest"));
                }
                (
                    Provenance::File {
                        filename: filename.clone(),
                        sha256: sha256.clone(),
                    },
                    Some((filename.clone(), bytes)),
                )
            }
        };
        Ok(ImportedArgument {
            name: field.clone(),
            value,
            provenance,
            file,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: CallKind,
    pub container: ContainerRef,
    /// Container-relative path of the function or script.
    pub target: String,
    pub source: String,
    pub args: Vec<RecordedArg>,
    pub seed: u64,
    pub version: String,
}

impl CallRecord {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("records serialize")
    }

    pub fn from_json(bytes: &[u8]) -> Result<CallRecord, String> {
        serde_json::from_slice(bytes).map_err(|e| format!("corrupt call record: {e}"))
    }
}
