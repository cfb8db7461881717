//! Session store and package registry.
//!
//! Sessions are written to a private temporary directory and published by
//! renaming it to its key, so a session is either fully visible or absent.
//! Recently used sessions are kept decoded in an LRU cache. There is
//! deliberately no way to list session keys.

mod package;
mod session;

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use lru::LruCache;
use parking_lot::{Mutex, RwLock};
use thiserror::Error;

pub use package::{base_package, load_package_dir, load_package_root, PackageRecord};
pub use session::{SessionDraft, SessionMeta};

use crate::formats::import::SessionLookup;
use crate::value::{resolve_resource, Container, KeyGenerator, Resource, ResourcePath, SessionKey, Value};

pub const CACHE_CAPACITY: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("{0}")]
    NotFound(String),
    /// A size limit was exceeded.
    #[error("{0}")]
    Resource(String),
    /// The outputs cannot be stored as given.
    #[error("{0}")]
    Invalid(String),
    #[error("package load error: {0}")]
    Load(String),
    #[error("storage failure: {0}")]
    Io(String),
}

#[derive(Clone, Debug)]
pub struct LibraryConfig {
    pub package_root: Option<PathBuf>,
    pub session_root: PathBuf,
    pub ttl: Duration,
    pub max_sessions: usize,
    pub max_session_bytes: u64,
}

impl LibraryConfig {
    pub fn new(session_root: impl Into<PathBuf>) -> LibraryConfig {
        LibraryConfig {
            package_root: None,
            session_root: session_root.into(),
            ttl: Duration::from_secs(24 * 3600),
            max_sessions: 10_000,
            max_session_bytes: 64 * 1024 * 1024,
        }
    }
}

/// Milliseconds since the Unix epoch.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

/// Either kind of container id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContainerId {
    Package(String),
    Session(SessionKey),
}

pub struct Store {
    cfg: LibraryConfig,
    keys: KeyGenerator,
    clock: Clock,
    packages: RwLock<Arc<Vec<PackageRecord>>>,
    cache: Mutex<LruCache<SessionKey, Arc<Container>>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

fn io(e: std::io::Error) -> StoreError {
    StoreError::Io(e.to_string())
}

impl Store {
    /// Opens the store and loads the package root, if configured.
    pub fn open(cfg: LibraryConfig) -> Result<Store, StoreError> {
        Store::with_parts(cfg, KeyGenerator::Os, system_clock())
    }

    pub fn with_parts(cfg: LibraryConfig, keys: KeyGenerator, clock: Clock) -> Result<Store, StoreError> {
        if cfg.max_sessions == 0 || cfg.max_session_bytes == 0 || cfg.ttl.is_zero() {
            return Err(StoreError::Load("store limits must be positive".into()));
        }
        std::fs::create_dir_all(&cfg.session_root).map_err(io)?;
        let mut packages = vec![base_package()];
        if let Some(root) = &cfg.package_root {
            packages.extend(load_package_root(root)?);
        }
        Ok(Store {
            cfg,
            keys,
            clock,
            packages: RwLock::new(Arc::new(packages)),
            cache: Mutex::new(LruCache::new(NonZeroUsize::new(CACHE_CAPACITY).expect("non-zero"))),
        })
    }

    pub fn config(&self) -> &LibraryConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        (self.clock)()
    }

    pub fn keys(&self) -> &KeyGenerator {
        &self.keys
    }

    /// Loaded packages, `base` first.
    pub fn packages(&self) -> Arc<Vec<PackageRecord>> {
        self.packages.read().clone()
    }

    /// Adds or replaces a package.
    pub fn install_package(&self, rec: PackageRecord) {
        let mut guard = self.packages.write();
        let mut next: Vec<PackageRecord> = guard.iter().filter(|p| p.id != rec.id).cloned().collect();
        next.push(rec);
        *guard = Arc::new(next);
    }

    pub fn package(&self, name: &str) -> Option<Arc<Container>> {
        self.packages.read().iter().find(|p| p.id == name).map(|p| p.container.clone())
    }

    fn session_dir(&self, key: &SessionKey) -> PathBuf {
        self.cfg.session_root.join(key.as_str())
    }

    /// Persists a draft and publishes it under a fresh key.
    pub fn save_session(&self, draft: &SessionDraft) -> Result<SessionKey, StoreError> {
        let files = session::layout(draft)?;
        let bytes: u64 = files.values().map(|b| b.len() as u64).sum();
        if bytes > self.cfg.max_session_bytes {
            return Err(StoreError::Resource(format!(
                "session size limit exceeded: outputs take {bytes} bytes, the limit is {} bytes",
                self.cfg.max_session_bytes
            )));
        }
        let created_at = self.now();
        let meta = SessionMeta {
            created_at,
            expires_at: created_at.saturating_add(self.cfg.ttl.as_millis() as u64),
            version: crate::VERSION.to_string(),
            base_package: draft.base_package.clone(),
            bytes,
        };
        let staging = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(&self.cfg.session_root)
            .map_err(io)?;
        session::write_layout(staging.path(), &files, &meta).map_err(io)?;
        loop {
            let key = self.keys.next_key().map_err(|e| StoreError::Io(e.to_string()))?;
            let target = self.session_dir(&key);
            if target.exists() {
                continue;
            }
            match std::fs::rename(staging.path(), &target) {
                Ok(()) => {
                    // The directory now lives under its key.
                    let _ = staging.keep();
                    return Ok(key);
                }
                Err(_) if target.exists() => continue,
                Err(e) => return Err(io(e)),
            }
        }
    }

    fn base_namespace(&self, meta: &SessionMeta) -> Option<Arc<crate::value::Namespace>> {
        let name = meta.base_package.as_deref()?;
        self.package(name).map(|p| p.namespace.clone())
    }

    fn load_session(&self, key: &SessionKey) -> Result<Arc<Container>, StoreError> {
        let missing = || StoreError::NotFound(format!("session '{key}' not found"));
        let now = self.now();
        if let Some(c) = self.cache.lock().get(key).cloned() {
            return match c.meta {
                crate::value::ContainerMeta::Session { expires_at, .. } if expires_at <= now => Err(missing()),
                _ => Ok(c),
            };
        }
        let dir = self.session_dir(key);
        if !dir.is_dir() {
            return Err(missing());
        }
        let meta = match session::read_meta(&dir) {
            Ok(m) => m,
            // Removed by eviction while we looked.
            Err(_) if !dir.exists() => return Err(missing()),
            Err(e) => return Err(e),
        };
        if meta.expires_at <= now {
            return Err(missing());
        }
        let c = Arc::new(session::read_session(&dir, &meta, self.base_namespace(&meta))?);
        self.cache.lock().put(key.clone(), c.clone());
        Ok(c)
    }

    pub fn load_container(&self, id: &ContainerId) -> Result<Arc<Container>, StoreError> {
        match id {
            ContainerId::Package(name) => self
                .package(name)
                .ok_or_else(|| StoreError::NotFound(format!("package '{name}' not found"))),
            ContainerId::Session(key) => self.load_session(key),
        }
    }

    pub fn session_meta(&self, key: &SessionKey) -> Result<SessionMeta, StoreError> {
        self.load_session(key)?;
        session::read_meta(&self.session_dir(key))
    }

    /// The stored call record of a session, if it has one.
    pub fn load_record(&self, key: &SessionKey) -> Result<Option<Vec<u8>>, StoreError> {
        self.load_session(key)?;
        match std::fs::read(self.session_dir(key).join("call.json")) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io(e)),
        }
    }

    /// Removes expired sessions, then the oldest ones while more than
    /// `max_sessions` remain. Returns how many were removed.
    pub fn evict_expired(&self, now: u64) -> usize {
        let Ok(entries) = std::fs::read_dir(&self.cfg.session_root) else {
            return 0;
        };
        let mut live = Vec::new();
        let mut removed = 0;
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            let Ok(key) = SessionKey::parse(&name) else {
                continue;
            };
            let path = entry.path();
            match session::read_meta(&path) {
                Ok(meta) if meta.expires_at > now => live.push((meta.created_at, key, path)),
                Ok(_) => removed += self.remove(&key, &path),
                Err(e) => log::warn!("skipping unreadable session {name}: {e}"),
            }
        }
        if live.len() > self.cfg.max_sessions {
            live.sort_by(|a, b| (a.0, a.1.as_str()).cmp(&(b.0, b.1.as_str())));
            let excess = live.len() - self.cfg.max_sessions;
            for (_, key, path) in live.into_iter().take(excess) {
                removed += self.remove(&key, &path);
            }
        }
        removed
    }

    fn remove(&self, key: &SessionKey, path: &Path) -> usize {
        self.cache.lock().pop(key);
        match std::fs::remove_dir_all(path) {
            Ok(()) => 1,
            Err(e) => {
                log::warn!("failed to remove session {key}: {e}");
                0
            }
        }
    }
}

impl SessionLookup for Store {
    fn session_object(&self, key: &SessionKey, name: &str) -> Result<Value, String> {
        let c = self.load_session(key).map_err(|e| e.to_string())?;
        let path = ResourcePath::new(vec!["R".into(), name.into()], false).map_err(|e| e.to_string())?;
        match resolve_resource(&c, &path) {
            Ok(Resource::Object(v)) => Ok(v.clone()),
            Ok(_) => Err(format!("'{name}' is not an object")),
            Err(e) => Err(e.to_string()),
        }
    }
}
