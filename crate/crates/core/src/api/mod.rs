//! HTTP surface: routing, GET export, RPC orchestration and status mapping.
//!
//! [`Gateway::handle`] is a synchronous, transport-free request handler;
//! [`server`] wraps it in an axum service with body limits, a per-RPC
//! watchdog and background eviction.
//!
//! URL tree under the root prefix (default `/ocpu`):
//!
//! ```text
//! /library/                        package names
//! /library/{pkg}/{path}[/{format}] package resources
//! /tmp/{key}/{path}[/{format}]     session resources
//! /tmp/{key}/replay                POST: re-execute the session's call
//! ```

pub mod server;

use std::collections::BTreeMap;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use percent_encoding::percent_decode_str;

use crate::formats::import::{import_argument, ArgumentSource, Origin};
use crate::formats::multipart::parse_multipart;
use crate::formats::{export, file_media_type, ExportFormat, Exportable, FormatId};
use crate::repro::{self, CallOutcome, ExecError, ExecLimits, Invocation};
use crate::store::{ContainerId, Store, StoreError};
use crate::value::{resolve_resource, Resource, ResourcePath, SessionKey};

pub const DEFAULT_PREFIX: &str = "/ocpu";

/// Field that carries the RNG seed of an RPC instead of an argument.
pub const SEED_FIELD: &str = ".seed";

#[derive(Clone, Debug)]
pub struct ApiConfig {
    pub root_prefix: String,
    pub timeout: Duration,
    pub cell_limit: u64,
    pub max_body: usize,
    pub evict_interval: Duration,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            root_prefix: DEFAULT_PREFIX.to_string(),
            timeout: Duration::from_secs(30),
            cell_limit: 10_000_000,
            max_body: 16 * 1024 * 1024,
            evict_interval: Duration::from_secs(60),
        }
    }
}

impl ApiConfig {
    /// Normalizes the prefix to `/name` form (or empty for the root).
    pub fn normalized_prefix(&self) -> String {
        let p = self.root_prefix.trim_matches('/');
        if p.is_empty() {
            String::new()
        } else {
            format!("/{p}")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
    Other(String),
}

impl Method {
    pub fn parse(s: &str) -> Method {
        match s {
            "GET" => Method::Get,
            "POST" => Method::Post,
            other => Method::Other(other.to_string()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApiRequest {
    pub method: Method,
    /// Percent-encoded path, as sent.
    pub path: String,
    /// Raw query string, without `?`.
    pub query: Option<String>,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl ApiRequest {
    pub fn get(path: &str) -> ApiRequest {
        let (path, query) = match path.split_once('?') {
            Some((p, q)) => (p.to_string(), Some(q.to_string())),
            None => (path.to_string(), None),
        };
        ApiRequest {
            method: Method::Get,
            path,
            query,
            content_type: None,
            body: Vec::new(),
        }
    }

    pub fn post(path: &str, content_type: &str, body: impl Into<Vec<u8>>) -> ApiRequest {
        ApiRequest {
            method: Method::Post,
            content_type: Some(content_type.to_string()),
            body: body.into(),
            ..ApiRequest::get(path)
        }
    }

    /// A urlencoded POST of `pairs`.
    pub fn post_form(path: &str, pairs: &[(&str, &str)]) -> ApiRequest {
        let body = url::form_urlencoded::Serializer::new(String::new()).extend_pairs(pairs).finish();
        ApiRequest::post(path, "application/x-www-form-urlencoded", body)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

const TEXT: &str = "text/plain; charset=utf-8";

impl ApiResponse {
    pub fn new(status: u16, content_type: &str, body: Vec<u8>) -> ApiResponse {
        ApiResponse {
            status,
            headers: vec![("Content-Type".into(), content_type.into())],
            body,
        }
    }

    pub fn text(status: u16, msg: &str) -> ApiResponse {
        let mut body = msg.to_string();
        if !body.ends_with('\n') {
            body.push('\n');
        }
        ApiResponse::new(status, TEXT, body.into_bytes())
    }

    fn with_header(mut self, name: &str, value: &str) -> ApiResponse {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn content_type(&self) -> Option<&str> {
        self.header("Content-Type")
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    fn redirect(location: &str) -> ApiResponse {
        ApiResponse::text(302, &format!("redirecting to {location}")).with_header("Location", location)
    }

    fn method_not_allowed(allow: &str, msg: &str) -> ApiResponse {
        ApiResponse::text(405, msg).with_header("Allow", allow)
    }
}

/// Maps an execution error to its status code.
pub fn map_error(e: &ExecError) -> ApiResponse {
    match e {
        ExecError::BadRequest(m) => ApiResponse::text(400, m),
        ExecError::NotFound(m) => ApiResponse::text(404, m),
        ExecError::MethodNotAllowed(m) => ApiResponse::method_not_allowed("GET", m),
        ExecError::Resource(m) => ApiResponse::text(503, m),
        ExecError::Internal(m) => ApiResponse::text(503, &format!("server failure: {m}")),
    }
}

fn store_error(e: StoreError) -> ApiResponse {
    map_error(&ExecError::from(e))
}

/// Where a request path points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Route {
    /// `{prefix}/`
    Root,
    /// `{prefix}/library/`
    Library,
    Container {
        id: ContainerId,
        segments: Vec<String>,
        trailing_slash: bool,
    },
    Replay(SessionKey),
    Redirect(String),
}

fn not_found(msg: impl Into<String>) -> ApiResponse {
    ApiResponse::text(404, &msg.into())
}

/// Resolves a request path to a route. Never touches the store.
pub fn route(prefix: &str, path: &str, query: Option<&str>) -> Result<Route, ApiResponse> {
    let rest = path
        .strip_prefix(prefix)
        .filter(|r| r.is_empty() || r.starts_with('/'))
        .ok_or_else(|| not_found(format!("no resource at '{path}'")))?;
    let redirect = |to: String| {
        Ok(Route::Redirect(match query {
            Some(q) => format!("{to}?{q}"),
            None => to,
        }))
    };
    if rest.is_empty() {
        return redirect(format!("{prefix}/"));
    }
    let trailing_slash = rest.len() > 1 && rest.ends_with('/');
    let body = rest.strip_prefix('/').unwrap_or(rest);
    let body = body.strip_suffix('/').unwrap_or(body);
    let mut segments = Vec::new();
    if !body.is_empty() {
        for raw in body.split('/') {
            let s = percent_decode_str(raw)
                .decode_utf8()
                .map_err(|_| not_found("path is not valid UTF-8"))?
                .into_owned();
            // Only an object name (`{kind}/{name}/R/{object}`) may hold an
            // encoded slash, as operators like `/` are objects too.
            let object_name = segments.len() == 3 && segments[2] == "R";
            if s.is_empty() || s == "." || s == ".." || (s.contains('/') && !object_name) {
                return Err(not_found(format!("invalid path segment '{raw}'")));
            }
            segments.push(s);
        }
    }
    let mut it = segments.into_iter();
    let kind = match it.next() {
        None => return Ok(Route::Root),
        Some(k) => k,
    };
    let name = it.next();
    let tail: Vec<String> = it.collect();
    match (kind.as_str(), name) {
        ("library", None) if trailing_slash => Ok(Route::Library),
        ("library", None) => redirect(format!("{prefix}/library/")),
        ("tmp", None) => Err(not_found("session keys cannot be listed")),
        ("library", Some(pkg)) if tail.is_empty() && !trailing_slash => redirect(format!("{prefix}/library/{pkg}/")),
        ("library", Some(pkg)) => Ok(Route::Container {
            id: ContainerId::Package(pkg),
            segments: tail,
            trailing_slash,
        }),
        ("tmp", Some(key)) => {
            let key = SessionKey::parse(&key).map_err(|_| not_found(format!("session '{key}' not found")))?;
            if tail == ["replay"] {
                return Ok(Route::Replay(key));
            }
            Ok(Route::Container {
                id: ContainerId::Session(key),
                segments: tail,
                trailing_slash,
            })
        }
        _ => Err(not_found(format!("no resource at '{path}'"))),
    }
}

fn parse_query(query: Option<&str>) -> BTreeMap<String, String> {
    query
        .map(|q| url::form_urlencoded::parse(q.as_bytes()).into_owned().collect())
        .unwrap_or_default()
}

fn content_type_essence(ct: Option<&str>) -> String {
    ct.unwrap_or("")
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

/// Request fields of an RPC body, as argument sources.
fn request_fields(req: &ApiRequest) -> Result<Vec<ArgumentSource>, ApiResponse> {
    let essence = content_type_essence(req.content_type.as_deref());
    if req.body.is_empty() && essence != "application/json" {
        return Ok(Vec::new());
    }
    match essence.as_str() {
        "application/x-www-form-urlencoded" => Ok(url::form_urlencoded::parse(&req.body)
            .map(|(k, v)| ArgumentSource {
                origin: Origin::UrlencodedField,
                name: k.into_owned(),
                raw: v.into_owned().into_bytes(),
            })
            .collect()),
        "multipart/form-data" => {
            let parts = parse_multipart(req.content_type.as_deref().unwrap_or(""), req.body.clone())
                .map_err(|e| ApiResponse::text(400, &e.to_string()))?;
            Ok(parts
                .into_iter()
                .map(|p| ArgumentSource {
                    origin: match p.filename {
                        Some(filename) => Origin::MultipartFile { filename },
                        None => Origin::MultipartField,
                    },
                    name: p.name,
                    raw: p.data,
                })
                .collect())
        }
        "application/json" => {
            let body: serde_json::Value = if req.body.iter().all(u8::is_ascii_whitespace) {
                serde_json::Value::Object(Default::default())
            } else {
                serde_json::from_slice(&req.body)
                    .map_err(|e| ApiResponse::text(400, &format!("invalid JSON body: {e}")))?
            };
            let serde_json::Value::Object(fields) = body else {
                return Err(ApiResponse::text(400, "a JSON body must be an object of named arguments"));
            };
            Ok(fields
                .into_iter()
                .map(|(k, v)| ArgumentSource {
                    origin: Origin::JsonField,
                    name: k,
                    raw: v.to_string().into_bytes(),
                })
                .collect())
        }
        "application/x-protobuf" => Err(ApiResponse::text(
            415,
            "content type 'application/x-protobuf' is not supported by this server",
        )),
        "" => Err(ApiResponse::text(400, "a request body needs a Content-Type")),
        other => Err(ApiResponse::text(415, &format!("unsupported content type '{other}'"))),
    }
}

fn parse_seed(a: &ArgumentSource) -> Result<u64, ApiResponse> {
    let text = String::from_utf8_lossy(&a.raw);
    let text = text.trim().trim_matches('"');
    text.parse::<u64>()
        .ok()
        .filter(|s| *s < 1 << 53)
        .ok_or_else(|| ApiResponse::text(400, &format!("{SEED_FIELD} must be an integer in [0, 2^53), got '{text}'")))
}

/// A transport-free request handler over a [`Store`].
#[derive(Clone, Debug)]
pub struct Gateway {
    store: Arc<Store>,
    cfg: ApiConfig,
    prefix: String,
}

impl Gateway {
    pub fn new(store: Arc<Store>, cfg: ApiConfig) -> Gateway {
        let prefix = cfg.normalized_prefix();
        Gateway { store, cfg, prefix }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn config(&self) -> &ApiConfig {
        &self.cfg
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn handle(&self, req: &ApiRequest) -> ApiResponse {
        self.handle_with_cancel(req, None)
    }

    /// Handles a request; RPCs stop early once `cancel` is set.
    pub fn handle_with_cancel(&self, req: &ApiRequest, cancel: Option<Arc<AtomicBool>>) -> ApiResponse {
        if let Method::Other(m) = &req.method {
            return ApiResponse::method_not_allowed("GET, POST", &format!("method {m} is not allowed"));
        }
        let route = match route(&self.prefix, &req.path, req.query.as_deref()) {
            Ok(r) => r,
            Err(resp) => return resp,
        };
        match (&req.method, route) {
            (_, Route::Redirect(to)) => ApiResponse::redirect(&to),
            (Method::Get, Route::Root) => self.listing(&["library/".to_string()], req.query.as_deref()),
            (Method::Get, Route::Library) => {
                let names: Vec<String> = self.store.packages().iter().map(|p| format!("{}/", p.id)).collect();
                self.listing(&names, req.query.as_deref())
            }
            (Method::Get, Route::Container { id, segments, trailing_slash }) => {
                self.handle_get(&req.path, &id, segments, trailing_slash, req.query.as_deref())
            }
            (Method::Get, Route::Replay(_)) => ApiResponse::method_not_allowed("POST", "replay requires POST"),
            (Method::Post, Route::Container { id, segments, trailing_slash }) => {
                self.handle_rpc(req, id, segments, trailing_slash, cancel)
            }
            (Method::Post, Route::Replay(key)) => {
                let limits = self.limits(cancel);
                self.created(repro::replay(&self.store, &key, &limits))
            }
            (Method::Post, _) => ApiResponse::method_not_allowed("GET", "POST is not allowed on this path"),
            (Method::Other(_), _) => unreachable!("rejected above"),
        }
    }

    fn limits(&self, cancel: Option<Arc<AtomicBool>>) -> ExecLimits {
        ExecLimits {
            cancel,
            ..ExecLimits::new(Some(self.cfg.timeout), self.cfg.cell_limit)
        }
    }

    fn listing(&self, names: &[String], query: Option<&str>) -> ApiResponse {
        self.export(Exportable::Listing(names), None, query)
    }

    fn export(&self, r: Exportable<'_>, format: Option<&str>, query: Option<&str>) -> ApiResponse {
        let name = format.unwrap_or(r.default_format().name());
        let result = ExportFormat::parse(name, parse_query(query)).and_then(|f| export(r, &f));
        match result {
            Ok((body, media)) => {
                let ct = if media.starts_with("text/") { format!("{media}; charset=utf-8") } else { media.to_string() };
                ApiResponse::new(200, &ct, body)
            }
            Err(e) => ApiResponse::text(400, &e.to_string()),
        }
    }

    fn handle_get(
        &self,
        raw_path: &str,
        id: &ContainerId,
        segments: Vec<String>,
        trailing_slash: bool,
        query: Option<&str>,
    ) -> ApiResponse {
        let c = match self.store.load_container(id) {
            Ok(c) => c,
            Err(e) => return store_error(e),
        };
        let full = match ResourcePath::new(segments.clone(), trailing_slash) {
            Ok(p) => p,
            Err(e) => return not_found(e.to_string()),
        };
        let (resource, format) = match resolve_resource(&c, &full) {
            Ok(r) => (r, None),
            Err(e) => {
                let last = segments.last().map(String::as_str).unwrap_or("");
                if trailing_slash || !FormatId::is_format_segment(last) {
                    return not_found(e.0);
                }
                let stripped = ResourcePath::new(segments[..segments.len() - 1].to_vec(), false).expect("validated");
                match resolve_resource(&c, &stripped) {
                    Ok(r) => (r, Some(last)),
                    Err(e) => return not_found(e.0),
                }
            }
        };
        match resource {
            Resource::Listing(_) if format.is_none() && !trailing_slash => {
                let to = match query {
                    Some(q) => format!("{raw_path}/?{q}"),
                    None => format!("{raw_path}/"),
                };
                ApiResponse::redirect(&to)
            }
            Resource::Listing(names) => self.export(Exportable::Listing(&names), format, query),
            Resource::Object(v) | Resource::Data(v) => self.export(Exportable::Value(v), format, query),
            Resource::Manual(m) => self.export(Exportable::Manual(m), format, query),
            Resource::Graphic(g) => self.export(Exportable::Graphic(g), format, query),
            Resource::Text(_, s) => self.export(Exportable::Text(s), format, query),
            Resource::File(bytes) => match format {
                None => ApiResponse::new(200, file_media_type(&full.joined()), bytes.to_vec()),
                Some(f) => ApiResponse::text(400, &format!("format '{f}' does not apply to a file")),
            },
        }
    }

    fn handle_rpc(
        &self,
        req: &ApiRequest,
        id: ContainerId,
        segments: Vec<String>,
        trailing_slash: bool,
        cancel: Option<Arc<AtomicBool>>,
    ) -> ApiResponse {
        let target = match ResourcePath::new(segments, trailing_slash) {
            Ok(p) => p,
            Err(e) => return not_found(e.to_string()),
        };
        let fields = match request_fields(req) {
            Ok(f) => f,
            Err(resp) => return resp,
        };
        let mut seed = None;
        let mut sources = Vec::new();
        for f in fields {
            if f.name == SEED_FIELD {
                match parse_seed(&f) {
                    Ok(s) => seed = Some(s),
                    Err(resp) => return resp,
                }
            } else if f.name.is_empty() || f.name.starts_with('.') {
                return ApiResponse::text(400, &format!("invalid argument name '{}'", f.name));
            } else if sources.iter().any(|s: &ArgumentSource| s.name == f.name) {
                return ApiResponse::text(400, &format!("argument '{}' given more than once", f.name));
            } else {
                sources.push(f);
            }
        }
        let seed = match seed {
            Some(s) => s,
            None => match self.store.keys().next_seed() {
                Ok(s) => s,
                Err(e) => return ApiResponse::text(503, &format!("server failure: {e}")),
            },
        };
        let limits = self.limits(cancel);
        let import = limits.import_limits(seed);
        let mut args = Vec::with_capacity(sources.len());
        for s in &sources {
            match import_argument(s, self.store.as_ref(), &import) {
                Ok(a) => args.push(a),
                Err(e) => return map_error(&e.into()),
            }
        }
        let inv = Invocation {
            container: id,
            target,
            args,
            seed,
        };
        self.created(repro::run_call(&self.store, &inv, &limits))
    }

    fn created(&self, outcome: Result<CallOutcome, ExecError>) -> ApiResponse {
        match outcome {
            Ok(out) => {
                let root = format!("{}/tmp/{}/", self.prefix, out.key);
                let body: String = out.paths.iter().map(|p| format!("{root}{p}\n")).collect();
                ApiResponse::new(201, TEXT, body.into_bytes()).with_header("Location", &root)
            }
            Err(e) => map_error(&e),
        }
    }
}
