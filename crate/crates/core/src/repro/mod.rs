//! Executing RPCs, recording them, and replaying them.
//!
//! [`run_call`] is the single path from an imported request to a stored
//! session. It writes a [`CallRecord`] with snapshots of every argument, so
//! [`replay`] can rebuild the same [`Invocation`] without the original
//! client or any referenced session.

mod console;
mod record;

use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

pub use console::{build_console, console_source_lines};
pub use record::{ArgOrigin, CallKind, CallRecord, ContainerRef, RecordedArg, Snapshot};

use crate::formats::import::{ImportError, ImportLimits, ImportedArgument};
use crate::lang::{call_function, run_script, Budget, ErrorKind, EvalContext, LangError, StatementOutput};
use crate::par::Parallelism;
use crate::store::{ContainerId, SessionDraft, Store, StoreError};
use crate::value::{resolve_resource, Container, ContainerMeta, Namespace, Resource, ResourcePath, SessionKey, Value};

/// Script extensions that are recognized but not interpreted.
pub const UNSUPPORTED_SCRIPT_EXTENSIONS: [&str; 5] = ["tex", "rnw", "md", "rmd", "brew"];

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    /// User error: bad arguments, evaluation or numeric errors.
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    MethodNotAllowed(String),
    /// A time, memory or storage limit was hit.
    #[error("{0}")]
    Resource(String),
    #[error("{0}")]
    Internal(String),
}

impl From<LangError> for ExecError {
    fn from(e: LangError) -> Self {
        match e.kind {
            ErrorKind::Resource => ExecError::Resource(e.to_string()),
            _ => ExecError::BadRequest(e.to_string()),
        }
    }
}

impl From<ImportError> for ExecError {
    fn from(e: ImportError) -> Self {
        match e {
            ImportError::Argument { .. } => ExecError::BadRequest(e.to_string()),
            ImportError::Resource { .. } => ExecError::Resource(e.to_string()),
        }
    }
}

impl From<StoreError> for ExecError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(m) => ExecError::NotFound(m),
            StoreError::Invalid(m) => ExecError::BadRequest(m),
            StoreError::Resource(m) => ExecError::Resource(m),
            StoreError::Load(m) | StoreError::Io(m) => ExecError::Internal(m),
        }
    }
}

/// Limits applied to one RPC.
#[derive(Clone, Debug)]
pub struct ExecLimits {
    pub timeout: Option<Duration>,
    pub cell_limit: u64,
    pub parallelism: Parallelism,
    /// Set from outside to abort the evaluation.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl ExecLimits {
    pub fn new(timeout: Option<Duration>, cell_limit: u64) -> ExecLimits {
        ExecLimits {
            timeout,
            cell_limit,
            parallelism: Parallelism::default(),
            cancel: None,
        }
    }

    pub fn import_limits(&self, seed: u64) -> ImportLimits {
        ImportLimits {
            timeout: self.timeout,
            cell_limit: self.cell_limit,
            seed,
        }
    }

    fn budget(&self) -> Budget {
        let b = Budget::new(self.timeout, self.cell_limit);
        match &self.cancel {
            Some(c) => b.with_cancel(c.clone()),
            None => b,
        }
    }
}

/// A fully imported RPC.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub container: ContainerId,
    pub target: ResourcePath,
    pub args: Vec<ImportedArgument>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct CallOutcome {
    pub key: SessionKey,
    /// Every resource of the new session, relative to its root.
    pub paths: Vec<String>,
}

enum Target {
    Function { name: String, f: Value },
    Script { text: String },
}

fn script_extension(path: &str) -> Option<String> {
    let file = path.rsplit('/').next().unwrap_or(path);
    file.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase())
}

fn resolve_target(c: &Container, path: &ResourcePath) -> Result<Target, ExecError> {
    let joined = path.joined();
    let r = resolve_resource(c, path).map_err(|e| ExecError::NotFound(e.0))?;
    match r {
        Resource::Object(v) if v.is_function() => Ok(Target::Function {
            name: path.segments().last().cloned().unwrap_or_default(),
            f: v.clone(),
        }),
        Resource::Object(v) => Err(ExecError::BadRequest(format!(
            "'{joined}' is a {}, not a function",
            v.type_name()
        ))),
        Resource::File(bytes) => match script_extension(&joined).as_deref() {
            Some("r") => {
                let text = std::str::from_utf8(bytes)
                    .map_err(|_| ExecError::BadRequest(format!("script '{joined}' is not valid UTF-8")))?;
                Ok(Target::Script { text: text.to_string() })
            }
            Some(ext) if UNSUPPORTED_SCRIPT_EXTENSIONS.contains(&ext) => Err(ExecError::BadRequest(format!(
                "script type '.{ext}' is not supported; only .r scripts can be run"
            ))),
            _ => Err(ExecError::BadRequest(format!("'{joined}' is not a script"))),
        },
        _ => Err(ExecError::MethodNotAllowed(format!("POST is not allowed on '{joined}'"))),
    }
}

fn container_ref(store: &Store, id: &ContainerId, c: &Container) -> Result<(ContainerRef, Option<String>), ExecError> {
    match (id, &c.meta) {
        (ContainerId::Package(_), ContainerMeta::Package { name, version }) => Ok((
            ContainerRef::Package {
                name: name.clone(),
                version: version.clone(),
            },
            Some(name.clone()),
        )),
        (ContainerId::Session(key), _) => {
            let meta = store.session_meta(key)?;
            Ok((ContainerRef::Session { key: key.to_string() }, meta.base_package))
        }
        _ => Err(ExecError::Internal("container kind mismatch".into())),
    }
}

/// The canonical text of a function call.
pub fn call_source(name: &str, args: &[ImportedArgument]) -> String {
    let args: Vec<String> = args.iter().map(|a| format!("{} = {}", a.name, a.source_text())).collect();
    format!("{name}({})", args.join(", "))
}

/// Evaluates an invocation and stores its outputs as a new session.
pub fn run_call(store: &Store, inv: &Invocation, limits: &ExecLimits) -> Result<CallOutcome, ExecError> {
    let c = store.load_container(&inv.container)?;
    let target = resolve_target(&c, &inv.target)?;
    let (cref, base_package) = container_ref(store, &inv.container, &c)?;
    let mut ctx = EvalContext::new(limits.budget(), inv.seed).with_base(c.namespace.clone());
    ctx.parallelism = limits.parallelism;
    for a in &inv.args {
        if let Some((name, bytes)) = &a.file {
            ctx.workdir.insert(name.clone(), bytes.clone());
        }
    }
    let (kind, namespace, source, console) = match &target {
        Target::Function { name, f } => {
            let source = call_source(name, &inv.args);
            let call_args = inv.args.iter().map(|a| (Some(a.name.clone()), a.value.clone())).collect();
            let value = call_function(f, call_args, &mut ctx)?;
            let console = build_console(
                &[StatementOutput {
                    source: source.clone(),
                    output: ctx.stdout.clone(),
                }],
                None,
            );
            let namespace: Namespace = [(".val".to_string(), value)].into_iter().collect();
            (CallKind::Function, namespace, source, console)
        }
        Target::Script { text, .. } => {
            for a in &inv.args {
                ctx.namespace.insert(a.name.clone(), a.value.clone());
            }
            let outcome = run_script(text, &mut ctx).map_err(|e| ExecError::from(e.error))?;
            let console = build_console(&outcome.transcript, None);
            (CallKind::Script, outcome.assigned, text.clone(), console)
        }
    };
    let record = CallRecord {
        kind,
        container: cref,
        target: inv.target.joined(),
        source: source.clone(),
        args: inv.args.iter().map(RecordedArg::capture).collect(),
        seed: inv.seed,
        version: crate::VERSION.to_string(),
    };
    let draft = SessionDraft {
        namespace,
        graphics: ctx.device.into_pages(),
        files: ctx.workdir,
        source,
        stdout: ctx.stdout,
        console,
        record: Some(record.to_json()),
        base_package,
    };
    let key = store.save_session(&draft)?;
    let paths = store.load_container(&ContainerId::Session(key.clone()))?.content_list();
    Ok(CallOutcome { key, paths })
}

/// The invocation recorded for session `key`.
pub fn recorded_invocation(store: &Store, key: &SessionKey, limits: &ExecLimits) -> Result<Invocation, ExecError> {
    let bytes = store
        .load_record(key)?
        .ok_or_else(|| ExecError::BadRequest(format!("session '{key}' has no call record")))?;
    let rec = CallRecord::from_json(&bytes).map_err(ExecError::Internal)?;
    let container = match &rec.container {
        ContainerRef::Package { name, .. } => ContainerId::Package(name.clone()),
        ContainerRef::Session { key } => {
            ContainerId::Session(SessionKey::parse(key).map_err(|e| ExecError::Internal(e.to_string()))?)
        }
    };
    let target = ResourcePath::parse(&rec.target).map_err(|e| ExecError::Internal(e.to_string()))?;
    let import = limits.import_limits(rec.seed);
    let args = rec
        .args
        .iter()
        .map(|a| a.restore(&import))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ExecError::BadRequest)?;
    Ok(Invocation {
        container,
        target,
        args,
        seed: rec.seed,
    })
}

/// Re-executes the call of session `key` into a new session.
pub fn replay(store: &Store, key: &SessionKey, limits: &ExecLimits) -> Result<CallOutcome, ExecError> {
    let inv = recorded_invocation(store, key, limits)?;
    run_call(store, &inv, limits)
}
