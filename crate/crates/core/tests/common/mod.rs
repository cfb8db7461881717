//! Shared fixtures: a live server over the demo package and an HTTP client.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use reqwest::blocking::{multipart, Client};
use tempfile::TempDir;

use statgate_core::api::server::{self, ServerHandle};
use statgate_core::api::{ApiConfig, Gateway};
use statgate_core::formats::bin;
use statgate_core::store::{LibraryConfig, Store};
use statgate_core::value::{DataFrame, NamedList, Vector};
use statgate_core::{SessionKey, Value};

pub fn packages_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../packages")
}

pub struct TestServer {
    pub base: String,
    pub prefix: String,
    pub store: Arc<Store>,
    pub http: Client,
    handle: Option<ServerHandle>,
    _dir: TempDir,
}

#[derive(Debug)]
pub struct Resp {
    pub status: u16,
    pub content_type: String,
    pub location: Option<String>,
    pub allow: Option<String>,
    pub body: Vec<u8>,
}

impl Resp {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    /// The session key named by the Location header of a 201.
    pub fn key(&self) -> Result<String, String> {
        if self.status != 201 {
            return Err(format!("expected 201, got {}: {}", self.status, self.text().trim_end()));
        }
        self.location
            .as_deref()
            .and_then(|l| l.trim_end_matches('/').rsplit('/').next())
            .filter(|k| SessionKey::is_well_formed(k))
            .map(str::to_string)
            .ok_or_else(|| format!("201 without a session Location: {:?}", self.location))
    }
}

impl TestServer {
    pub fn start() -> TestServer {
        TestServer::with_config(ApiConfig::default())
    }

    pub fn with_config(cfg: ApiConfig) -> TestServer {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut lib = LibraryConfig::new(dir.path().join("sessions"));
        lib.package_root = Some(packages_dir());
        let store = Arc::new(Store::open(lib).expect("store opens"));
        let gateway = Gateway::new(store.clone(), cfg);
        let prefix = gateway.prefix().to_string();
        let handle = server::start(gateway, "127.0.0.1:0", false).expect("server starts");
        let http = Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(Duration::from_secs(60))
            .pool_max_idle_per_host(64)
            .build()
            .expect("client");
        TestServer {
            base: handle.base_url(),
            prefix,
            store,
            http,
            handle: Some(handle),
            _dir: dir,
        }
    }

    /// Absolute URL for a path below the root prefix.
    pub fn url(&self, path: &str) -> String {
        format!("{}{}/{}", self.base, self.prefix, path.trim_start_matches('/'))
    }

    fn collect(r: reqwest::blocking::Response) -> Resp {
        let header = |name| r.headers().get(name).and_then(|v: &reqwest::header::HeaderValue| v.to_str().ok()).map(str::to_string);
        let content_type = header(reqwest::header::CONTENT_TYPE).unwrap_or_default();
        let location = header(reqwest::header::LOCATION);
        let allow = header(reqwest::header::ALLOW);
        let status = r.status().as_u16();
        let body = r.bytes().expect("body").to_vec();
        Resp {
            status,
            content_type,
            location,
            allow,
            body,
        }
    }

    pub fn get(&self, path: &str) -> Resp {
        Self::collect(self.http.get(self.url(path)).send().expect("GET"))
    }

    pub fn get_abs(&self, path: &str) -> Resp {
        Self::collect(self.http.get(format!("{}{}", self.base, path)).send().expect("GET"))
    }

    pub fn post_form(&self, path: &str, pairs: &[(&str, &str)]) -> Resp {
        let body = url::form_urlencoded::Serializer::new(String::new())
            .extend_pairs(pairs)
            .finish();
        self.post_raw(path, Some("application/x-www-form-urlencoded"), body.into_bytes())
    }

    pub fn post_json(&self, path: &str, json: &str) -> Resp {
        self.post_raw(path, Some("application/json"), json.as_bytes().to_vec())
    }

    pub fn post_raw(&self, path: &str, content_type: Option<&str>, body: Vec<u8>) -> Resp {
        let mut req = self.http.post(self.url(path)).body(body);
        if let Some(ct) = content_type {
            req = req.header(reqwest::header::CONTENT_TYPE, ct);
        }
        Self::collect(req.send().expect("POST"))
    }

    pub fn post_multipart(&self, path: &str, form: multipart::Form) -> Resp {
        Self::collect(self.http.post(self.url(path)).multipart(form).send().expect("POST"))
    }

    pub fn request(&self, method: reqwest::Method, path: &str) -> Resp {
        Self::collect(self.http.request(method, self.url(path)).send().expect("request"))
    }

    /// Decodes a session object through the bin format.
    pub fn object(&self, key: &str, name: &str) -> Result<Value, String> {
        let r = self.get(&format!("tmp/{key}/R/{name}/bin"));
        if r.status != 200 {
            return Err(format!("GET {name} of {key}: {} {}", r.status, r.text().trim_end()));
        }
        bin::decode(&r.body).map_err(|e| e.to_string())
    }

    pub fn val(&self, key: &str) -> Result<Value, String> {
        self.object(key, ".val")
    }

    pub fn stop(mut self) {
        if let Some(h) = self.handle.take() {
            h.shutdown().expect("clean shutdown");
        }
    }
}

/// Builds a multipart form with one uploaded file and text fields.
pub fn upload(field: &str, filename: &str, bytes: Vec<u8>, text: &[(&str, &str)]) -> multipart::Form {
    let mut form = multipart::Form::new().part(
        field.to_string(),
        multipart::Part::bytes(bytes).file_name(filename.to_string()),
    );
    for (k, v) in text {
        form = form.text(k.to_string(), v.to_string());
    }
    form
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Multiples of 1/8 in a small range print and parse exactly.
pub fn eighths(r: &mut StdRng) -> f64 {
    r.random_range(-400i32..=400) as f64 / 8.0
}

pub fn num_vec(r: &mut StdRng, len: usize, na_rate: f64) -> Vec<Option<f64>> {
    (0..len)
        .map(|_| if r.random_bool(na_rate) { None } else { Some(eighths(r)) })
        .collect()
}

pub fn random_string(r: &mut StdRng) -> String {
    const POOL: &[char] = &['a', 'b', 'Z', ' ', ',', '"', '\'', '\\', '\n', '\t', 'é', '中', '😀', '{', ']', ':'];
    let n = r.random_range(0..8);
    (0..n).map(|_| POOL[r.random_range(0..POOL.len())]).collect()
}

pub fn ident(r: &mut StdRng) -> String {
    const HEAD: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    const TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";
    let mut s = String::from(HEAD[r.random_range(0..HEAD.len())] as char);
    for _ in 0..r.random_range(0..6) {
        s.push(TAIL[r.random_range(0..TAIL.len())] as char);
    }
    s
}

/// Any f64 bit pattern, special values included.
pub fn any_f64(r: &mut StdRng) -> f64 {
    match r.random_range(0..8) {
        0 => f64::NAN,
        1 => f64::INFINITY,
        2 => f64::NEG_INFINITY,
        3 => -0.0,
        4 => f64::from_bits(r.random()),
        _ => r.random_range(-1e6..1e6),
    }
}

fn vector(r: &mut StdRng, len: usize, finite: bool) -> Vector {
    let na = |r: &mut StdRng| r.random_bool(0.2);
    match r.random_range(0..3) {
        0 => Vector::Logical((0..len).map(|_| if na(r) { None } else { Some(r.random()) }).collect()),
        1 => Vector::Number(
            (0..len)
                .map(|_| {
                    if na(r) {
                        None
                    } else if finite {
                        Some(r.random_range(-1e9..1e9))
                    } else {
                        Some(any_f64(r))
                    }
                })
                .collect(),
        ),
        _ => Vector::Str((0..len).map(|_| if na(r) { None } else { Some(random_string(r)) }).collect()),
    }
}

fn unique_names(r: &mut StdRng, n: usize) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    while names.len() < n {
        let s = ident(r);
        if !names.contains(&s) {
            names.push(s);
        }
    }
    names
}

pub fn random_frame(r: &mut StdRng, finite: bool) -> DataFrame {
    let ncol = r.random_range(1..5);
    let nrow = r.random_range(0..6);
    let cols = unique_names(r, ncol)
        .into_iter()
        .map(|n| (n, vector(r, nrow, finite)))
        .collect();
    DataFrame::new(cols).expect("valid frame")
}

/// A random value without functions or graphics. With `finite`, numbers
/// are finite so that JSON can carry them.
pub fn random_value(r: &mut StdRng, depth: u32, finite: bool) -> Value {
    let choice = if depth == 0 { r.random_range(0..5) } else { r.random_range(0..7) };
    match choice {
        0 => Value::Null,
        1 => match r.random_range(0..3) {
            0 => Value::Logical(if r.random_bool(0.2) { None } else { Some(r.random()) }),
            1 => Value::Number(if r.random_bool(0.2) {
                None
            } else if finite {
                Some(r.random_range(-1e9..1e9))
            } else {
                Some(any_f64(r))
            }),
            _ => Value::Str(if r.random_bool(0.2) { None } else { Some(random_string(r)) }),
        },
        2..=4 => {
            let len = r.random_range(0..7);
            Value::Vector(vector(r, len, finite))
        }
        5 => {
            let n = r.random_range(0..4);
            let entries = unique_names(r, n)
                .into_iter()
                .map(|k| (k, random_value(r, depth - 1, finite)))
                .collect();
            Value::List(NamedList::new(entries).expect("unique names"))
        }
        _ => Value::DataFrame(random_frame(r, finite)),
    }
}
