use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use super::{namespaces_equal, Namespace, ResourcePath, Value};
use crate::lang::graphics::GraphicsRecording;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContainerKind {
    Package,
    Session,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContainerMeta {
    Package { name: String, version: String },
    /// Unix milliseconds.
    Session { created_at: u64, expires_at: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ManualPage {
    pub name: String,
    pub title: String,
    pub description: String,
    pub usage: String,
    pub arguments: Vec<(String, String)>,
}

/// A package or a session. Frozen once built.
#[derive(Clone, Debug)]
pub struct Container {
    pub kind: ContainerKind,
    pub namespace: Arc<Namespace>,
    /// Data sets (packages only).
    pub data: Namespace,
    /// Relative path → contents. Session working-directory files live under
    /// `files/`.
    pub files: BTreeMap<String, Vec<u8>>,
    pub graphics: Vec<Arc<GraphicsRecording>>,
    pub manuals: BTreeMap<String, ManualPage>,
    pub source: Option<String>,
    pub stdout: Option<String>,
    pub console: Option<String>,
    pub meta: ContainerMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextKind {
    Source,
    Stdout,
    Console,
}

/// What a [`ResourcePath`] points at inside a container.
#[derive(Debug)]
pub enum Resource<'a> {
    /// Names in a directory; sub-directories carry a trailing `/`.
    Listing(Vec<String>),
    Object(&'a Value),
    Data(&'a Value),
    Manual(&'a ManualPage),
    Graphic(&'a GraphicsRecording),
    File(&'a [u8]),
    Text(TextKind, &'a str),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct NotFound(pub String);

fn is_hidden(name: &str) -> bool {
    name.starts_with('.')
}

impl Container {
    pub fn empty(kind: ContainerKind, meta: ContainerMeta) -> Container {
        Container {
            kind,
            namespace: Arc::new(Namespace::new()),
            data: Namespace::new(),
            files: BTreeMap::new(),
            graphics: Vec::new(),
            manuals: BTreeMap::new(),
            source: None,
            stdout: None,
            console: None,
            meta,
        }
    }

    /// Every addressable resource, relative to the container root.
    /// Hidden objects are listed for sessions (the call's own outputs) but
    /// not for packages.
    pub fn content_list(&self) -> Vec<String> {
        let mut out = Vec::new();
        for name in self.namespace.keys() {
            if self.kind == ContainerKind::Session || !is_hidden(name) {
                out.push(format!("R/{name}"));
            }
        }
        out.extend(self.data.keys().map(|n| format!("data/{n}")));
        out.extend(self.manuals.keys().map(|n| format!("man/{n}")));
        out.extend((1..=self.graphics.len()).map(|i| format!("graphics/{i}")));
        if self.source.is_some() {
            out.push("source".into());
        }
        if self.stdout.is_some() {
            out.push("stdout".into());
        }
        if self.console.is_some() {
            out.push("console".into());
        }
        out.extend(self.files.keys().cloned());
        out
    }

    fn dir_listing(&self, prefix: &str) -> Option<Vec<String>> {
        let prefix = format!("{prefix}/");
        let mut children = BTreeSet::new();
        for path in self.files.keys() {
            if let Some(rest) = path.strip_prefix(&prefix) {
                match rest.split_once('/') {
                    Some((dir, _)) => children.insert(format!("{dir}/")),
                    None => children.insert(rest.to_string()),
                };
            }
        }
        (!children.is_empty()).then(|| children.into_iter().collect())
    }

    /// Container equality with `deep_equals` on every stored value.
    pub fn deep_equals(&self, other: &Container) -> bool {
        self.kind == other.kind
            && namespaces_equal(&self.namespace, &other.namespace)
            && namespaces_equal(&self.data, &other.data)
            && self.files == other.files
            && self.graphics == other.graphics
            && self.manuals == other.manuals
            && self.source == other.source
            && self.stdout == other.stdout
            && self.console == other.console
            && self.meta == other.meta
    }
}

/// Resolves a container-relative path. Never mutates the container.
///
/// Packages and sessions share one path grammar: `R/{name}`, `data/{name}`,
/// `man/{name}`, `graphics/{n}` (1-based), `source`, `stdout`, `console`,
/// and any other path as a file or directory.
pub fn resolve_resource<'a>(c: &'a Container, path: &ResourcePath) -> Result<Resource<'a>, NotFound> {
    let seg: Vec<&str> = path.segments().iter().map(String::as_str).collect();
    let missing = || NotFound(format!("resource '{}' not found", path.joined()));
    match seg.as_slice() {
        [] => Ok(Resource::Listing(c.content_list())),
        ["R"] => Ok(Resource::Listing(
            c.namespace.keys().filter(|n| !is_hidden(n)).cloned().collect(),
        )),
        ["R", name] => c
            .namespace
            .get(*name)
            .map(Resource::Object)
            .ok_or_else(|| NotFound(format!("object '{name}' not found"))),
        ["data"] => Ok(Resource::Listing(c.data.keys().cloned().collect())),
        ["data", name] => c
            .data
            .get(*name)
            .map(Resource::Data)
            .ok_or_else(|| NotFound(format!("data set '{name}' not found"))),
        ["man"] => Ok(Resource::Listing(c.manuals.keys().cloned().collect())),
        ["man", name] => c
            .manuals
            .get(*name)
            .map(Resource::Manual)
            .ok_or_else(|| NotFound(format!("manual page '{name}' not found"))),
        ["graphics"] => Ok(Resource::Listing(
            (1..=c.graphics.len()).map(|i| i.to_string()).collect(),
        )),
        ["graphics", n] => n
            .parse::<usize>()
            .ok()
            .filter(|i| *i >= 1 && *i <= c.graphics.len())
            .map(|i| Resource::Graphic(&c.graphics[i - 1]))
            .ok_or_else(|| NotFound(format!("graphic '{n}' not found"))),
        ["source"] if c.source.is_some() => {
            Ok(Resource::Text(TextKind::Source, c.source.as_deref().unwrap_or_default()))
        }
        ["stdout"] if c.stdout.is_some() => {
            Ok(Resource::Text(TextKind::Stdout, c.stdout.as_deref().unwrap_or_default()))
        }
        ["console"] if c.console.is_some() => {
            Ok(Resource::Text(TextKind::Console, c.console.as_deref().unwrap_or_default()))
        }
        _ => {
            let joined = path.joined();
            if let Some(bytes) = c.files.get(&joined) {
                return Ok(Resource::File(bytes));
            }
            c.dir_listing(&joined).map(Resource::Listing).ok_or_else(missing)
        }
    }
}
