//! On-disk layout of one session.
//!
//! ```text
//! meta.json            created/expiry times, version, base package
//! R/{name}.bin         objects, bin encoded
//! R/{name}.fn          functions, as deparsed source
//! graphics/{NNN}.rec   recordings as JSON, numbered from 001
//! files/...            working-directory files, verbatim
//! source.txt stdout.txt console.txt
//! call.json            call record used for replay
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::formats::{bin, json};
use crate::lang::{deparse, parse_single, Expr, GraphicsRecording};
use crate::value::{Closure, Container, ContainerKind, ContainerMeta, FnEnv, Function, Namespace, Value};

/// Everything an RPC produced, before it becomes a session.
#[derive(Clone, Debug, Default)]
pub struct SessionDraft {
    pub namespace: Namespace,
    pub graphics: Vec<GraphicsRecording>,
    /// Working-directory files, relative to `files/`.
    pub files: BTreeMap<String, Vec<u8>>,
    pub source: String,
    pub stdout: String,
    pub console: String,
    pub record: Option<Vec<u8>>,
    /// Package whose namespace the session's functions resolve against.
    pub base_package: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub created_at: u64,
    pub expires_at: u64,
    pub version: String,
    pub base_package: Option<String>,
    pub bytes: u64,
}

fn encode_object(name: &str, v: &Value) -> Result<(String, Vec<u8>), StoreError> {
    match v {
        Value::Function(Function::Closure(c)) => {
            let e = Expr::Function {
                params: c.params.clone(),
                body: Box::new((*c.body).clone()),
            };
            Ok((format!("R/{name}.fn"), deparse(&e).into_bytes()))
        }
        Value::Function(Function::Builtin(b)) => Ok((format!("R/{name}.fn"), b.as_bytes().to_vec())),
        v if v.contains_function() => Err(StoreError::Invalid(format!(
            "object '{name}' holds a function inside a list and cannot be stored"
        ))),
        v => {
            let bytes = bin::encode(v).map_err(|e| StoreError::Invalid(format!("object '{name}': {e}")))?;
            Ok((format!("R/{name}.bin"), bytes))
        }
    }
}

/// Lays out a draft as relative path → contents, without `meta.json`.
pub fn layout(draft: &SessionDraft) -> Result<BTreeMap<String, Vec<u8>>, StoreError> {
    let mut out = BTreeMap::new();
    for (name, v) in &draft.namespace {
        let (path, bytes) = encode_object(name, v)?;
        out.insert(path, bytes);
    }
    for (i, g) in draft.graphics.iter().enumerate() {
        let text = serde_json::to_vec(g).map_err(|e| StoreError::Io(e.to_string()))?;
        out.insert(format!("graphics/{:03}.rec", i + 1), text);
    }
    for (name, bytes) in &draft.files {
        out.insert(format!("files/{name}"), bytes.clone());
    }
    out.insert("source.txt".into(), draft.source.clone().into_bytes());
    out.insert("stdout.txt".into(), draft.stdout.clone().into_bytes());
    out.insert("console.txt".into(), draft.console.clone().into_bytes());
    if let Some(r) = &draft.record {
        out.insert("call.json".into(), r.clone());
    }
    Ok(out)
}

pub fn write_layout(dir: &Path, files: &BTreeMap<String, Vec<u8>>, meta: &SessionMeta) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (rel, bytes) in files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
    }
    std::fs::write(dir.join("meta.json"), serde_json::to_vec(meta).expect("meta serializes"))
}

pub fn read_meta(dir: &Path) -> Result<SessionMeta, StoreError> {
    let bytes = std::fs::read(dir.join("meta.json")).map_err(|e| StoreError::Io(e.to_string()))?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Io(format!("corrupt session meta: {e}")))
}

fn corrupt(path: &Path, msg: impl std::fmt::Display) -> StoreError {
    StoreError::Io(format!("corrupt session file {}: {msg}", path.display()))
}

fn read_text(path: &Path) -> Result<Option<String>, StoreError> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(corrupt(path, e)),
    }
}

fn decode_function(path: &Path, text: &str, env: &Arc<FnEnv>) -> Result<Value, StoreError> {
    if let Some(b) = crate::lang::builtins::lookup(text) {
        return Ok(Value::Function(Function::Builtin(b)));
    }
    match parse_single(text).map_err(|e| corrupt(path, e))? {
        Expr::Function { params, body } => Ok(Value::Function(Function::Closure(Closure {
            params,
            body: Arc::new(*body),
            env: env.clone(),
        }))),
        _ => Err(corrupt(path, "not a function")),
    }
}

/// Reads a published session directory back into a container.
pub fn read_session(dir: &Path, meta: &SessionMeta, base: Option<Arc<Namespace>>) -> Result<Container, StoreError> {
    let mut c = Container::empty(
        ContainerKind::Session,
        ContainerMeta::Session {
            created_at: meta.created_at,
            expires_at: meta.expires_at,
        },
    );
    let env = FnEnv::new(None, base);
    let mut namespace = Namespace::new();
    let r_dir = dir.join("R");
    if r_dir.is_dir() {
        for entry in std::fs::read_dir(&r_dir).map_err(|e| corrupt(&r_dir, e))? {
            let path = entry.map_err(|e| corrupt(&r_dir, e))?.path();
            let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            if let Some(name) = file.strip_suffix(".bin") {
                let bytes = std::fs::read(&path).map_err(|e| corrupt(&path, e))?;
                namespace.insert(name.to_string(), bin::decode(&bytes).map_err(|e| corrupt(&path, e))?);
            } else if let Some(name) = file.strip_suffix(".fn") {
                let text = std::fs::read_to_string(&path).map_err(|e| corrupt(&path, e))?;
                namespace.insert(name.to_string(), decode_function(&path, &text, &env)?);
            }
        }
    }
    env.seal(namespace.clone());
    c.namespace = Arc::new(namespace);
    let g_dir = dir.join("graphics");
    if g_dir.is_dir() {
        let mut recs = Vec::new();
        for entry in std::fs::read_dir(&g_dir).map_err(|e| corrupt(&g_dir, e))? {
            let path = entry.map_err(|e| corrupt(&g_dir, e))?.path();
            let n: usize = stem_number(&path).ok_or_else(|| corrupt(&path, "bad graphic file name"))?;
            let bytes = std::fs::read(&path).map_err(|e| corrupt(&path, e))?;
            recs.push((n, json::recording_from_json(&bytes).map_err(|e| corrupt(&path, e))?));
        }
        recs.sort_by_key(|(n, _)| *n);
        c.graphics = recs.into_iter().map(|(_, g)| Arc::new(g)).collect();
    }
    let f_dir = dir.join("files");
    if f_dir.is_dir() {
        for entry in walkdir::WalkDir::new(&f_dir).sort_by_file_name() {
            let entry = entry.map_err(|e| corrupt(&f_dir, e))?;
            if entry.file_type().is_file() {
                let rel = entry.path().strip_prefix(dir).expect("inside session dir");
                let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                let bytes = std::fs::read(entry.path()).map_err(|e| corrupt(entry.path(), e))?;
                c.files.insert(rel.join("/"), bytes);
            }
        }
    }
    c.source = read_text(&dir.join("source.txt"))?;
    c.stdout = read_text(&dir.join("stdout.txt"))?;
    c.console = read_text(&dir.join("console.txt"))?;
    Ok(c)
}

fn stem_number(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_str()?;
    name.strip_suffix(".rec")?.parse().ok()
}
