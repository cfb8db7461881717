//! Package directories.
//!
//! ```text
//! MANIFEST          name: demo / version: 1.0 (key: value lines)
//! R/*.r             scripts evaluated into the namespace (seed 0)
//! data/*.csv|json   data sets named by file stem
//! man/*.txt         manual pages named by file stem
//! anything else     served verbatim
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use walkdir::WalkDir;

use super::StoreError;
use crate::formats::{csv, json, manual};
use crate::lang::{builtins, run_script, Budget, EvalContext};
use crate::value::{Container, ContainerKind, ContainerMeta, Function, Namespace, Value};

/// Budget for package scripts.
const LOAD_TIMEOUT: Duration = Duration::from_secs(30);
const LOAD_CELLS: u64 = 10_000_000;

#[derive(Clone, Debug)]
pub struct PackageRecord {
    pub id: String,
    pub version: String,
    pub container: Arc<Container>,
    pub loaded_from: Option<PathBuf>,
}

fn load_err(path: &Path, msg: impl std::fmt::Display) -> StoreError {
    StoreError::Load(format!("{}: {msg}", path.display()))
}

fn is_package_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-')
        && !s.starts_with('.')
}

fn parse_manifest(path: &Path) -> Result<(String, String), StoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| load_err(path, e))?;
    let mut fields = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| load_err(path, format!("line {}: expected 'key: value'", i + 1)))?;
        fields.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    let name = fields
        .remove("name")
        .ok_or_else(|| load_err(path, "missing required key 'name'"))?;
    let version = fields
        .remove("version")
        .ok_or_else(|| load_err(path, "missing required key 'version'"))?;
    if !is_package_name(&name) {
        return Err(load_err(path, format!("invalid package name '{name}'")));
    }
    if version.is_empty() || !version.split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit())) {
        return Err(load_err(path, format!("version '{version}' is not a dotted number")));
    }
    Ok((name, version))
}

/// Files directly inside `dir` with extension `ext`, sorted by name.
fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, StoreError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| load_err(dir, e))? {
        let path = entry.map_err(|e| load_err(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_namespace(dir: &Path) -> Result<Namespace, StoreError> {
    let mut ctx = EvalContext::new(Budget::new(Some(LOAD_TIMEOUT), LOAD_CELLS), 0);
    for path in files_with_ext(&dir.join("R"), "r")? {
        let src = std::fs::read_to_string(&path).map_err(|e| load_err(&path, e))?;
        run_script(&src, &mut ctx).map_err(|e| load_err(&path, e.error))?;
        ctx.namespace.remove(".val");
    }
    Ok(ctx.namespace)
}

fn load_data(dir: &Path, namespace: &Namespace) -> Result<Namespace, StoreError> {
    let mut data = Namespace::new();
    let data_dir = dir.join("data");
    let mut paths = files_with_ext(&data_dir, "csv")?;
    paths.extend(files_with_ext(&data_dir, "json")?);
    for path in paths {
        let name = stem(&path);
        let bytes = std::fs::read(&path).map_err(|e| load_err(&path, e))?;
        let value = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Value::DataFrame(csv::read_csv(&bytes).map_err(|e| load_err(&path, e))?)
        } else {
            json::import_json(&bytes).map_err(|e| load_err(&path, e))?
        };
        if namespace.contains_key(&name) {
            return Err(load_err(&path, format!("data set '{name}' collides with an object of the same name")));
        }
        if data.insert(name.clone(), value).is_some() {
            return Err(load_err(&path, format!("data set '{name}' is defined twice")));
        }
    }
    Ok(data)
}

/// Loads one package directory.
pub fn load_package_dir(dir: &Path) -> Result<PackageRecord, StoreError> {
    let manifest = dir.join("MANIFEST");
    if !manifest.is_file() {
        return Err(load_err(&manifest, "manifest not found"));
    }
    let (name, version) = parse_manifest(&manifest)?;
    let namespace = load_namespace(dir)?;
    let data = load_data(dir, &namespace)?;
    let mut manuals = BTreeMap::new();
    for path in files_with_ext(&dir.join("man"), "txt")? {
        let topic = stem(&path);
        let text = std::fs::read_to_string(&path).map_err(|e| load_err(&path, e))?;
        let page = manual::parse_manual(&topic, &text).map_err(|e| load_err(&path, e))?;
        if !namespace.contains_key(&topic) && !data.contains_key(&topic) {
            return Err(load_err(&path, format!("manual '{topic}' documents no object or data set")));
        }
        manuals.insert(topic, page);
    }
    let mut files = BTreeMap::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| load_err(dir, e))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).expect("walkdir stays inside its root");
        let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        let skip = matches!(rel.first().map(String::as_str), Some("R" | "data" | "man")) && rel.len() > 1
            || rel == ["MANIFEST"];
        if skip {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| load_err(entry.path(), e))?;
        files.insert(rel.join("/"), bytes);
    }
    let mut container = Container::empty(
        ContainerKind::Package,
        ContainerMeta::Package {
            name: name.clone(),
            version: version.clone(),
        },
    );
    container.namespace = Arc::new(namespace);
    container.data = data;
    container.manuals = manuals;
    container.files = files;
    Ok(PackageRecord {
        id: name,
        version,
        container: Arc::new(container),
        loaded_from: Some(dir.to_path_buf()),
    })
}

/// The built-in `base` package: every builtin as an object.
pub fn base_package() -> PackageRecord {
    let namespace: Namespace = builtins::names()
        .map(|n| (n.to_string(), Value::Function(Function::Builtin(n))))
        .collect();
    let mut container = Container::empty(
        ContainerKind::Package,
        ContainerMeta::Package {
            name: "base".into(),
            version: crate::VERSION.into(),
        },
    );
    container.namespace = Arc::new(namespace);
    PackageRecord {
        id: "base".into(),
        version: crate::VERSION.into(),
        container: Arc::new(container),
        loaded_from: None,
    }
}

/// Loads every sub-directory of `root` that has a manifest.
pub fn load_package_root(root: &Path) -> Result<Vec<PackageRecord>, StoreError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| load_err(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out: Vec<PackageRecord> = Vec::new();
    for dir in dirs {
        if !dir.join("MANIFEST").exists() {
            continue;
        }
        let rec = load_package_dir(&dir)?;
        if rec.id == "base" || out.iter().any(|p| p.id == rec.id) {
            return Err(load_err(&dir, format!("package name '{}' is already taken", rec.id)));
        }
        out.push(rec);
    }
    Ok(out)
}
