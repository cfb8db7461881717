//! `statgate`: launch the gateway or talk to a running one.
//!
//! Exit codes of the client commands follow the HTTP status class:
//! 0 for 2xx, 1 for 4xx, 2 for 5xx and 3 when the server is unreachable.
//! Commands that create a session print the key alone on the last line.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use reqwest::blocking::{multipart, Client, Response};

use statgate_core::api::{server, ApiConfig, Gateway};
use statgate_core::store::{LibraryConfig, Store};
use statgate_core::SessionKey;

const DEFAULT_SERVER: &str = "http://127.0.0.1:8004";

#[derive(Parser)]
#[command(name = "statgate", version, about = "HTTP gateway for an embedded data-analysis language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the server until interrupted.
    Serve(ServeArgs),
    /// Call a function with name=value arguments.
    Call(CallArgs),
    /// Fetch a resource, optionally into a file.
    Get(GetArgs),
    /// Upload a local .r script and run it.
    Run(RunArgs),
    /// Re-execute the call recorded in a session.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "STATGATE_ADDR", default_value = "127.0.0.1:8004")]
    addr: String,
    #[arg(long, env = "STATGATE_ROOT_PREFIX", default_value = "/ocpu")]
    root_prefix: String,
    /// Directory whose sub-directories are packages.
    #[arg(long, env = "STATGATE_PACKAGE_ROOT")]
    package_root: Option<PathBuf>,
    #[arg(long, env = "STATGATE_SESSION_ROOT", default_value = "./sessions")]
    session_root: PathBuf,
    /// Session lifetime in seconds.
    #[arg(long, env = "STATGATE_TTL", default_value_t = 86_400)]
    ttl: u64,
    /// Wall-clock limit per RPC in seconds.
    #[arg(long, env = "STATGATE_TIMEOUT", default_value_t = 30.0)]
    timeout: f64,
    #[arg(long, env = "STATGATE_CELL_LIMIT", default_value_t = 10_000_000)]
    cell_limit: u64,
    /// Largest accepted request body in bytes.
    #[arg(long, env = "STATGATE_MAX_BODY", default_value_t = 16 * 1024 * 1024)]
    max_body: usize,
}

#[derive(Args)]
struct ClientArgs {
    #[arg(long, env = "STATGATE_SERVER", default_value = DEFAULT_SERVER)]
    server: String,
    #[arg(long, env = "STATGATE_ROOT_PREFIX", default_value = "/ocpu")]
    root_prefix: String,
}

#[derive(Args)]
struct CallArgs {
    #[command(flatten)]
    client: ClientArgs,
    /// Function path, e.g. library/demo/R/mean or {key}/R/f.
    target: String,
    /// Arguments as name=value; values are code, JSON or session keys.
    args: Vec<String>,
    /// Send this JSON object as an application/json body instead.
    #[arg(long, conflicts_with = "args")]
    json: Option<String>,
}

#[derive(Args)]
struct GetArgs {
    #[command(flatten)]
    client: ClientArgs,
    /// Resource path, e.g. {key}/R/.val/json.
    target: String,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    client: ClientArgs,
    script: PathBuf,
    /// Variables for the script as name=value.
    args: Vec<String>,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    client: ClientArgs,
    key: String,
}

/// A failed client command and its exit code.
struct Failure(u8, String);

impl From<reqwest::Error> for Failure {
    fn from(e: reqwest::Error) -> Self {
        Failure(3, format!("request failed: {e}"))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure(1, format!("{e:#}"))
    }
}

impl ClientArgs {
    fn prefix(&self) -> String {
        let p = self.root_prefix.trim_matches('/');
        if p.is_empty() {
            String::new()
        } else {
            format!("/{p}")
        }
    }

    /// Absolute paths pass through; paths starting with a key go under
    /// `tmp/`; anything else is relative to the root prefix.
    fn url(&self, target: &str) -> String {
        let server = self.server.trim_end_matches('/');
        if target.starts_with('/') {
            return format!("{server}{target}");
        }
        let first = target.split('/').next().unwrap_or("");
        if SessionKey::is_well_formed(first) {
            format!("{server}{}/tmp/{target}", self.prefix())
        } else {
            format!("{server}{}/{target}", self.prefix())
        }
    }
}

fn client() -> Result<Client, Failure> {
    Client::builder()
        .timeout(None::<Duration>)
        .build()
        .map_err(|e| Failure(3, format!("cannot build HTTP client: {e}")))
}

fn split_pairs(args: &[String]) -> Result<Vec<(String, String)>, Failure> {
    args.iter()
        .map(|a| match a.split_once('=') {
            Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
            _ => Err(Failure(1, format!("argument '{a}' must have the form name=value"))),
        })
        .collect()
}

fn status_failure(resp: Response) -> Failure {
    let status = resp.status();
    let code = if status.is_server_error() { 2 } else { 1 };
    let body = resp.text().unwrap_or_default();
    Failure(code, format!("{status}: {}", body.trim_end()))
}

/// Prints the created paths, then the key alone.
fn report_created(resp: Response) -> Result<(), Failure> {
    if !resp.status().is_success() {
        return Err(status_failure(resp));
    }
    let location = resp
        .headers()
        .get(reqwest::header::LOCATION)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let body = resp.text()?;
    let key = location
        .as_deref()
        .and_then(|l| l.trim_end_matches('/').rsplit('/').next())
        .filter(|k| SessionKey::is_well_formed(k))
        .ok_or_else(|| Failure(2, "server response has no session location".into()))?
        .to_string();
    print!("{body}");
    println!("{key}");
    Ok(())
}

fn created_key(resp: Response) -> Result<String, Failure> {
    if !resp.status().is_success() {
        return Err(status_failure(resp));
    }
    resp.headers()
        .get(reqwest::header::LOCATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|l| l.trim_end_matches('/').rsplit('/').next().map(str::to_string))
        .filter(|k| SessionKey::is_well_formed(k))
        .ok_or_else(|| Failure(2, "server response has no session location".into()))
}

fn call(a: CallArgs) -> Result<(), Failure> {
    let req = client()?.post(a.client.url(&a.target));
    let req = match &a.json {
        Some(j) => req.header(reqwest::header::CONTENT_TYPE, "application/json").body(j.clone()),
        None => req.form(&split_pairs(&a.args)?),
    };
    report_created(req.send()?)
}

fn get(a: GetArgs) -> Result<(), Failure> {
    let resp = client()?.get(a.client.url(&a.target)).send()?;
    if !resp.status().is_success() {
        return Err(status_failure(resp));
    }
    let bytes = resp.bytes()?;
    match &a.out {
        Some(path) => std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout()
            .write_all(&bytes)
            .context("writing to stdout")?,
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let name = a
        .script
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    if !name.to_ascii_lowercase().ends_with(".r") {
        return Err(Failure(1, format!("'{}' is not an .r script", a.script.display())));
    }
    let bytes = std::fs::read(&a.script).with_context(|| format!("reading {}", a.script.display()))?;
    let pairs = split_pairs(&a.args)?;
    let http = client()?;
    let form = multipart::Form::new().part("x", multipart::Part::bytes(bytes).file_name(name.clone()));
    let upload = http
        .post(a.client.url("library/base/R/identity"))
        .multipart(form)
        .send()?;
    let holder = created_key(upload)?;
    let resp = http
        .post(a.client.url(&format!("{holder}/files/{name}")))
        .form(&pairs)
        .send()?;
    report_created(resp)
}

fn replay(a: ReplayArgs) -> Result<(), Failure> {
    if !SessionKey::is_well_formed(&a.key) {
        return Err(Failure(1, format!("'{}' is not a session key", a.key)));
    }
    let resp = client()?.post(a.client.url(&format!("{}/replay", a.key))).send()?;
    report_created(resp)
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    if !(a.timeout > 0.0 && a.timeout.is_finite()) {
        bail!("--timeout must be a positive number of seconds");
    }
    let mut lib = LibraryConfig::new(&a.session_root);
    lib.package_root = a.package_root.clone();
    lib.ttl = Duration::from_secs(a.ttl);
    if let Some(root) = &a.package_root {
        if !root.is_dir() {
            bail!("package root {} is not a directory", root.display());
        }
    }
    let store = Store::open(lib).context("loading packages")?;
    for p in store.packages().iter() {
        match &p.loaded_from {
            Some(dir) => log::info!("loaded package {} {} from {}", p.id, p.version, dir.display()),
            None => log::info!("loaded package {} {} (built in)", p.id, p.version),
        }
    }
    let cfg = ApiConfig {
        root_prefix: a.root_prefix.clone(),
        timeout: Duration::from_secs_f64(a.timeout),
        cell_limit: a.cell_limit,
        max_body: a.max_body,
        ..ApiConfig::default()
    };
    let gateway = Gateway::new(Arc::new(store), cfg);
    let prefix = gateway.prefix().to_string();
    let handle = server::start(gateway, &a.addr, true).with_context(|| format!("binding {}", a.addr))?;
    log::info!("serving on http://{}{prefix}/", handle.addr());
    handle.wait().context("server failed")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match cli.command {
        Command::Serve(a) => serve(a).map_err(Failure::from),
        Command::Call(a) => call(a),
        Command::Get(a) => get(a),
        Command::Run(a) => run(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
