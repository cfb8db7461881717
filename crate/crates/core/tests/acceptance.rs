//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails. Pass a substring argument to run
//! a subset, e.g. `cargo test --test acceptance -- replay`.

mod common;

use std::collections::{BTreeSet, VecDeque};
use std::panic::AssertUnwindSafe;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use rand::Rng;

use common::{eighths, ident, num_vec, random_frame, random_value, rng, upload, Resp, TestServer};
use statgate_core::api::ApiConfig;
use statgate_core::formats::{bin, csv, json};
use statgate_core::lang::stats::RANK_TOLERANCE;
use statgate_core::lang::{call_function, eval_expr, parse_single, Budget, EvalContext};
use statgate_core::value::{DataFrame, Function, NamedList, Vector};
use statgate_core::{deep_equals, SessionKey, Value};

/// A failed criterion. `host_limited` marks a failure caused by the
/// machine rather than the code (too few cores for a speed-up target); it
/// is reported as FAIL but does not fail the run.
#[derive(Debug)]
struct Failure {
    msg: String,
    host_limited: bool,
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure { msg, host_limited: false }
    }
}

type Outcome = Result<String, Failure>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+).into());
        }
    };
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "table conformance", table_conformance),
        (2, "functional-state composition", composition),
        (3, "concurrency isolation", concurrency_isolation),
        (4, "missing-value semantics", missing_values),
        (5, "rank deficiency", rank_deficiency),
        (6, "replay reproducibility", replay_reproducibility),
        (7, "resource control", resource_control),
        (8, "format round-trips", format_round_trips),
        (9, "key privacy", key_privacy),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}").into())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {n} ({name}) in {secs:.2}s: {detail}"),
            Err(f) if f.host_limited => {
                println!("FAIL criterion {n} ({name}) in {secs:.2}s: {} [host-limited, not counted]", f.msg);
            }
            Err(f) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}) in {secs:.2}s: {}", f.msg);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn demo_base(srv: &TestServer) -> Arc<statgate_core::value::Namespace> {
    srv.store.package("demo").expect("demo package").namespace.clone()
}

fn code_vec(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
    format!("c({})", items.join(", "))
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn rss_bytes() -> u64 {
    let status = std::fs::read_to_string("/proc/self/status").unwrap_or_default();
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmRSS:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse::<u64>().ok())
        .map(|kb| kb * 1024)
        .unwrap_or(0)
}

/// Every substring shaped like a session key.
fn keys_in(text: &str) -> Vec<String> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    for i in 0..b.len() {
        if b[i] == b'x' && i + 20 <= b.len() && b[i + 1..i + 20].iter().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()) {
            out.push(text[i..i + 20].to_string());
        }
    }
    out
}

// Criterion 1

struct Table {
    rows: usize,
    failures: Vec<String>,
    statuses: Vec<u16>,
}

impl Table {
    fn row(&mut self, label: &str, r: &Resp, status: u16, media: &str, check: impl FnOnce(&Resp) -> Result<(), String>) {
        self.rows += 1;
        self.statuses.push(r.status);
        if r.status != status {
            self.failures
                .push(format!("{label}: status {} (want {status}): {}", r.status, r.text().chars().take(200).collect::<String>()));
            return;
        }
        if !media.is_empty() && !r.content_type.starts_with(media) {
            self.failures
                .push(format!("{label}: content type '{}' (want {media})", r.content_type));
            return;
        }
        if let Err(e) = check(r) {
            self.failures.push(format!("{label}: {e}"));
        }
    }
}

fn ok(_: &Resp) -> Result<(), String> {
    Ok(())
}

fn contains(needle: &'static str) -> impl FnOnce(&Resp) -> Result<(), String> {
    move |r| {
        if r.text().contains(needle) {
            Ok(())
        } else {
            Err(format!("body lacks '{needle}': {}", r.text().chars().take(300).collect::<String>()))
        }
    }
}

fn lines_include(items: &'static [&'static str]) -> impl FnOnce(&Resp) -> Result<(), String> {
    move |r| {
        let text = r.text();
        let lines: BTreeSet<&str> = text.lines().collect();
        match items.iter().find(|i| !lines.contains(**i)) {
            None => Ok(()),
            Some(m) => Err(format!("listing lacks '{m}': {text:?}")),
        }
    }
}

fn location(want: String) -> impl FnOnce(&Resp) -> Result<(), String> {
    move |r| {
        if r.location.as_deref() == Some(want.as_str()) {
            Ok(())
        } else {
            Err(format!("Location {:?}, want {want}", r.location))
        }
    }
}

fn value_is(srv: &TestServer, want: Value) -> impl FnOnce(&Resp) -> Result<(), String> + '_ {
    move |r| {
        let key = r.key()?;
        let got = srv.val(&key)?;
        if deep_equals(&got, &want) {
            Ok(())
        } else {
            Err(format!("value {got:?}, want {want:?}"))
        }
    }
}

fn table_conformance() -> Outcome {
    let start = Instant::now();
    let srv = TestServer::start();
    let mut t = Table {
        rows: 0,
        failures: Vec::new(),
        statuses: Vec::new(),
    };
    let pkg_dir = common::packages_dir().join("demo");

    // Sessions used by the session-container rows.
    let script = srv.post_form("library/demo/scripts/ch01.r", &[]);
    t.row("POST script ch01.r", &script, 201, "text/plain", lines_include(&[]));
    let s = script.key()?;
    let csv_bytes = b"a,b\n1,\"u\"\n2,\"v\"\n".to_vec();
    let with_file = srv.post_multipart("library/base/R/identity", upload("x", "data.csv", csv_bytes.clone(), &[]));
    let f = with_file.key()?;
    let rnorm = srv.post_form("library/demo/R/rnorm", &[("n", "3"), (".seed", "7")]);
    let rk = rnorm.key()?;
    let rk_root = format!("{}/tmp/{rk}/", srv.prefix);

    // Table 1: methods, targets and actions.
    t.row("GET object data/cats/json", &srv.get("library/demo/data/cats/json"), 200, "application/json", |r| {
        let v: serde_json::Value = serde_json::from_slice(&r.body).map_err(|e| e.to_string())?;
        let rows = v.as_array().ok_or("not an array of records")?;
        ensure!(rows.len() == 14, "{} rows", rows.len());
        ensure!(rows[0].get("Sex").is_some(), "first record lacks Sex");
        Ok(())
    });
    t.row("GET manual man/lsfit/html", &srv.get("library/demo/man/lsfit/html"), 200, "text/html", contains("Least-squares fit"));
    t.row("GET graphic graphics/1/png", &srv.get(&format!("tmp/{s}/graphics/1/png")), 200, "image/png", |r| {
        ensure!(r.body.starts_with(b"\x89PNG\r\n\x1a\n"), "not a PNG");
        Ok(())
    });
    let news = std::fs::read(pkg_dir.join("NEWS")).map_err(|e| e.to_string())?;
    t.row("GET file NEWS", &srv.get("library/demo/NEWS"), 200, "text/plain", |r| {
        ensure!(r.body == news, "NEWS bytes differ from disk");
        Ok(())
    });
    t.row("GET path scripts/", &srv.get("library/demo/scripts/"), 200, "text/plain", lines_include(&["ch01.r", "notes.md"]));
    t.row("POST object R/rnorm", &rnorm, 201, "text/plain", |r| {
        let text = r.text();
        for p in ["R/.val", "source", "stdout"] {
            ensure!(text.lines().any(|l| l == format!("{rk_root}{p}")), "201 body lacks {p}: {text}");
        }
        ensure!(r.location.as_deref() == Some(rk_root.as_str()), "Location {:?}", r.location);
        Ok(())
    });
    t.row("POST file scripts/ch01.r value", &script, 201, "", |_| {
        let v = srv.object(&s, "y")?;
        let want = Value::numbers([2.0, 2.4, 2.9, 3.5].map(|x: f64| x * 3.0));
        ensure!(deep_equals(&v, &want), "y = {v:?}");
        Ok(())
    });

    // Table 2: status codes.
    t.row("302 root without slash", &srv.get_abs(&srv.prefix), 302, "", location(format!("{}/", srv.prefix)));
    t.row("302 package without slash", &srv.get("library/demo"), 302, "", location(format!("{}/library/demo/", srv.prefix)));
    t.row("302 directory without slash", &srv.get(&format!("tmp/{s}/R")), 302, "", location(format!("{}/tmp/{s}/R/", srv.prefix)));
    t.row("302 keeps query", &srv.get("library/demo/data?x=1"), 302, "", location(format!("{}/library/demo/data/?x=1", srv.prefix)));
    t.row("400 evaluation error", &srv.post_form("library/demo/R/rnorm", &[("n", "\"a\"")]), 400, "text/plain", |r| {
        ensure!(!r.text().trim().is_empty(), "empty error message");
        Ok(())
    });
    t.row(
        "400 numeric error",
        &srv.post_json("library/demo/R/lsfit", r#"{"x": {"a": [1, 2, 3, 4], "b": [2, 4, 6, 8]}, "y": [1, 2, 3, 5]}"#),
        400,
        "text/plain",
        contains("rank deficient"),
    );
    t.row("400 parse error", &srv.post_form("library/base/R/identity", &[("x", "1 +")]), 400, "text/plain", ok);
    t.row("503 budget exhausted", &srv.post_form("library/base/R/identity", &[("x", "rep(0, 10^12)")]), 503, "text/plain", contains("cell limit"));
    t.row("404 unknown package", &srv.get("library/nosuch/"), 404, "text/plain", ok);
    t.row("404 unknown object", &srv.get("library/demo/R/nosuch"), 404, "text/plain", ok);
    t.row("405 PUT", &srv.request(reqwest::Method::PUT, "library/demo/R/mean"), 405, "", |r| {
        ensure!(r.allow.as_deref() == Some("GET, POST"), "Allow {:?}", r.allow);
        Ok(())
    });

    // Table 3: formats.
    t.row("print", &srv.get(&format!("tmp/{rk}/R/.val/print")), 200, "text/plain", ok);
    t.row("json", &srv.get(&format!("tmp/{rk}/R/.val/json")), 200, "application/json", |r| {
        let v: serde_json::Value = serde_json::from_slice(&r.body).map_err(|e| e.to_string())?;
        ensure!(v.as_array().map(Vec::len) == Some(3), "json {v}");
        Ok(())
    });
    t.row("csv", &srv.get("library/demo/data/cats/csv"), 200, "text/csv", |r| {
        let text = r.text();
        ensure!(text.starts_with("\"Sex\",\"Bwt\",\"Hwt\"\n"), "header {:?}", text.lines().next());
        ensure!(text.lines().count() == 15, "{} lines", text.lines().count());
        Ok(())
    });
    t.row("tab with sep", &srv.get("library/demo/data/cats/tab?sep=%3B"), 200, "text/plain", |r| {
        ensure!(r.text().starts_with("\"Sex\";\"Bwt\";\"Hwt\"\n"), "tab {:?}", r.text().lines().next());
        Ok(())
    });
    t.row("bin", &srv.get("library/demo/data/cats/bin"), 200, "application/octet-stream", |r| {
        let v = bin::decode(&r.body).map_err(|e| e.to_string())?;
        ensure!(matches!(v, Value::DataFrame(ref d) if d.nrow() == 14), "decoded {}", v.type_name());
        Ok(())
    });
    t.row("png with size", &srv.get(&format!("tmp/{s}/graphics/1/png?width=200&height=150")), 200, "image/png", |r| {
        ensure!(r.body.len() > 24 && r.body[16..24] == [0, 0, 0, 200, 0, 0, 0, 150], "IHDR size");
        Ok(())
    });
    t.row("svg", &srv.get(&format!("tmp/{s}/graphics/1/svg")), 200, "image/svg+xml", contains("<svg"));
    for fmt in ["pb", "pdf", "rda", "rds"] {
        t.row(&format!("out-of-scope {fmt} on data"), &srv.get(&format!("library/demo/data/cats/{fmt}")), 400, "text/plain", ok);
        t.row(&format!("out-of-scope {fmt} on graphic"), &srv.get(&format!("tmp/{s}/graphics/1/{fmt}")), 400, "text/plain", ok);
    }
    t.row("csv on a scalar", &srv.get(&format!("tmp/{rk}/R/.val/csv")), 400, "text/plain", ok);

    // Table 4: package container.
    t.row("package .", &srv.get("library/demo/"), 200, "text/plain", lines_include(&["R/scale_by", "data/cats", "man/lsfit", "NEWS", "scripts/ch01.r"]));
    t.row("package R/", &srv.get("library/demo/R/"), 200, "text/plain", lines_include(&["lsfit", "scale_by", "center", "marker"]));
    t.row("package R/scale_by/print", &srv.get("library/demo/R/scale_by/print"), 200, "text/plain", contains("function"));
    t.row("package data/", &srv.get("library/demo/data/"), 200, "text/plain", lines_include(&["cats"]));
    t.row("package man/", &srv.get("library/demo/man/"), 200, "text/plain", lines_include(&["lsfit", "cats"]));
    t.row("package man/lsfit/text", &srv.get("library/demo/man/lsfit/text"), 200, "text/plain", contains("rank deficient"));
    t.row("package data is GET only", &srv.post_form("library/demo/data/cats", &[]), 405, "text/plain", ok);
    t.row("package man is GET only", &srv.post_form("library/demo/man/lsfit", &[]), 405, "text/plain", ok);
    t.row("library listing", &srv.get("library/"), 200, "text/plain", lines_include(&["base/", "demo/"]));
    t.row("root listing", &srv.get(""), 200, "text/plain", lines_include(&["library/"]));

    // Table 5: session container.
    t.row("session .", &srv.get(&format!("tmp/{s}/")), 200, "text/plain", lines_include(&["R/x", "R/y", "graphics/1", "source", "stdout", "console"]));
    t.row("session R/", &srv.get(&format!("tmp/{s}/R/")), 200, "text/plain", lines_include(&["x", "y"]));
    t.row("session R/y/json", &srv.get(&format!("tmp/{s}/R/y/json")), 200, "application/json", ok);
    t.row("session graphics/", &srv.get(&format!("tmp/{s}/graphics/")), 200, "text/plain", lines_include(&["1"]));
    let script_src = std::fs::read_to_string(pkg_dir.join("scripts/ch01.r")).map_err(|e| e.to_string())?;
    t.row("session source", &srv.get(&format!("tmp/{s}/source")), 200, "text/plain", |r| {
        ensure!(r.text() == script_src, "source differs: {:?}", r.text());
        Ok(())
    });
    t.row("session stdout", &srv.get(&format!("tmp/{s}/stdout")), 200, "text/plain", contains("8.1"));
    t.row("session console", &srv.get(&format!("tmp/{s}/console")), 200, "text/plain", |r| {
        let text = r.text();
        ensure!(text.starts_with("> x <- c(2.0, 2.4, 2.9, 3.5)\n"), "console {text:?}");
        ensure!(text.contains("> print(mean(y))\n"), "console lacks print call: {text:?}");
        Ok(())
    });
    t.row("session files/*", &srv.get(&format!("tmp/{f}/files/data.csv")), 200, "text/csv", |r| {
        ensure!(r.body == csv_bytes, "uploaded bytes differ");
        Ok(())
    });
    t.row("session missing graphic", &srv.get(&format!("tmp/{f}/graphics/1/png")), 404, "text/plain", ok);

    // Table 6: argument formats per content type.
    t.row("urlencoded primitive", &srv.post_form("library/base/R/identity", &[("x", "5")]), 201, "", value_is(&srv, Value::number(5.0)));
    t.row("urlencoded inline json", &srv.post_form("library/base/R/identity", &[("x", "[1, 2, 3]")]), 201, "", value_is(&srv, Value::numbers([1.0, 2.0, 3.0])));
    t.row("urlencoded raw code", &srv.post_form("library/base/R/identity", &[("x", "seq(1, 3)")]), 201, "", value_is(&srv, Value::numbers([1.0, 2.0, 3.0])));
    let rk_val = srv.val(&rk)?;
    t.row("urlencoded temp key", &srv.post_form("library/base/R/identity", &[("x", rk.as_str())]), 201, "", value_is(&srv, rk_val.clone()));
    let multi = |fields: &[(&str, &str)]| {
        let mut form = reqwest::blocking::multipart::Form::new();
        for (k, v) in fields {
            form = form.text(k.to_string(), v.to_string());
        }
        srv.post_multipart("library/base/R/identity", form)
    };
    t.row("multipart primitive", &multi(&[("x", "\"hi\"")]), 201, "", value_is(&srv, Value::string("hi")));
    t.row("multipart inline json", &multi(&[("x", "{\"a\": true}")]), 201, "", value_is(&srv, Value::List(NamedList::new(vec![("a".into(), Value::Logical(Some(true)))]).unwrap())));
    t.row("multipart raw code", &multi(&[("x", "paste(\"a\", \"b\")")]), 201, "", value_is(&srv, Value::string("a b")));
    t.row("multipart temp key", &multi(&[("x", &format!("{s}::x"))]), 201, "", value_is(&srv, Value::numbers([2.0, 2.4, 2.9, 3.5])));
    t.row("multipart file", &with_file, 201, "", |r| {
        ensure!(r.text().contains(&format!("/tmp/{f}/files/data.csv")), "201 body lacks the file: {}", r.text());
        let v = srv.val(&f)?;
        ensure!(deep_equals(&v, &Value::string("data.csv")), "file argument value {v:?}");
        Ok(())
    });
    let read = srv.post_multipart("library/base/R/read_csv", upload("file", "d.csv", csv_bytes.clone(), &[]));
    t.row("multipart file read_csv", &read, 201, "", |r| {
        let v = srv.val(&r.key()?)?;
        ensure!(matches!(v, Value::DataFrame(ref d) if d.nrow() == 2 && d.ncol() == 2), "read {v:?}");
        Ok(())
    });
    t.row("json primitive", &srv.post_json("library/base/R/identity", r#"{"x": 5}"#), 201, "", value_is(&srv, Value::number(5.0)));
    t.row(
        "json data structure",
        &srv.post_json("library/base/R/identity", r#"{"x": {"a": [1, 2]}}"#),
        201,
        "",
        value_is(&srv, Value::List(NamedList::new(vec![("a".into(), Value::numbers([1.0, 2.0]))]).unwrap())),
    );
    t.row("json has no raw code", &srv.post_json("library/base/R/identity", r#"{"x": "1 + 1"}"#), 201, "", value_is(&srv, Value::string("1 + 1")));
    let key_json = format!("{{\"x\": \"{rk}\"}}");
    t.row("json has no temp keys", &srv.post_json("library/base/R/identity", &key_json), 201, "", value_is(&srv, Value::string(rk.clone())));
    t.row("json body must be an object", &srv.post_json("library/base/R/identity", "[1]"), 400, "text/plain", ok);
    t.row("protobuf is out of scope", &srv.post_raw("library/base/R/identity", Some("application/x-protobuf"), vec![0]), 415, "text/plain", ok);

    // Script types other than .r are recognized but refused.
    t.row("markdown script", &srv.post_form("library/demo/scripts/notes.md", &[]), 400, "text/plain", contains("not supported"));

    ensure!(!t.statuses.contains(&502), "a response used 502");
    let elapsed = start.elapsed();
    srv.stop();
    ensure!(t.failures.is_empty(), "{} of {} rows failed: {}", t.failures.len(), t.rows, t.failures.join("; "));
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{} rows, no 502, {:.2}s", t.rows, elapsed.as_secs_f64()))
}

// Criterion 2

/// One random g or h: the RPC fields and the equivalent expression.
fn unary_call(r: &mut rand::rngs::StdRng, len: usize) -> (&'static str, Vec<(String, String)>, String) {
    let xs: Vec<f64> = (0..len).map(|_| eighths(r)).collect();
    let v = code_vec(&xs);
    if r.random_bool(0.5) {
        let k = eighths(r);
        (
            "scale_by",
            vec![("x".into(), v.clone()), ("k".into(), format!("{k:?}"))],
            format!("scale_by(x = {v}, k = {k:?})"),
        )
    } else {
        ("center", vec![("x".into(), v.clone())], format!("center(x = {v})"))
    }
}

fn composition() -> Outcome {
    let start = Instant::now();
    let srv = TestServer::start();
    let base = demo_base(&srv);
    let mut r = rng(2);
    for i in 0..50 {
        let len = r.random_range(3..9);
        let (g, g_args, g_expr) = unary_call(&mut r, len);
        let (h, h_args, h_expr) = unary_call(&mut r, len);
        let post = |f: &str, args: &[(String, String)]| {
            let pairs: Vec<(&str, &str)> = args.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            srv.post_form(&format!("library/demo/R/{f}"), &pairs)
        };
        let (gr, hr) = thread::scope(|sc| {
            let a = sc.spawn(|| post(g, &g_args));
            let b = sc.spawn(|| post(h, &h_args));
            (a.join().unwrap(), b.join().unwrap())
        });
        let (gk, hk) = (gr.key()?, hr.key()?);
        let use_fit = r.random_bool(0.3);
        let (f, expr) = if use_fit {
            ("lsfit", format!("lsfit(x = {g_expr}, y = {h_expr})"))
        } else {
            ("scale_by", format!("scale_by(x = {g_expr}, k = {h_expr})"))
        };
        let (fa, fb) = if use_fit { ("x", "y") } else { ("x", "k") };
        let fr = srv.post_form(&format!("library/demo/R/{f}"), &[(fa, &gk), (fb, &hk)]);
        let mut ctx = EvalContext::new(Budget::unlimited(), 0).with_base(base.clone());
        let direct = eval_expr(&parse_single(&expr).map_err(|e| e.to_string())?, &mut ctx);
        match direct {
            Ok(want) => {
                let got = srv.val(&fr.key().map_err(|e| format!("instance {i} ({expr}): {e}"))?)?;
                ensure!(deep_equals(&got, &want), "instance {i}: {expr}\n got {got:?}\nwant {want:?}");
            }
            Err(e) => {
                ensure!(fr.status == 400, "instance {i}: direct evaluation failed ({e}) but RPC gave {}", fr.status);
            }
        }
    }
    let elapsed = start.elapsed();
    srv.stop();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("50 instances exact, {:.2}s", elapsed.as_secs_f64()))
}

// Criterion 3

fn concurrency_isolation() -> Outcome {
    let srv = TestServer::start();
    let call = |m: &str| srv.post_form("library/demo/R/marker", &[("m", &format!("\"{m}\""))]);
    for _ in 0..3 {
        call("warmup").key()?;
    }
    let single = median(
        (0..7)
            .map(|i| {
                let t = Instant::now();
                let _ = call(&format!("solo{i}"));
                t.elapsed()
            })
            .collect(),
    );
    let barrier = std::sync::Barrier::new(32);
    let started = Instant::now();
    let results: Vec<(String, Resp)> = thread::scope(|sc| {
        let handles: Vec<_> = (0..32)
            .map(|i| {
                let barrier = &barrier;
                let call = &call;
                sc.spawn(move || {
                    let m = format!("m{i:02}");
                    barrier.wait();
                    let r = call(&m);
                    (m, r)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let wall = started.elapsed();
    let mut keys = BTreeSet::new();
    for (m, r) in &results {
        let key = r.key()?;
        ensure!(keys.insert(key.clone()), "duplicate key {key}");
        let v = srv.val(&key)?;
        ensure!(deep_equals(&v, &Value::string(format!("marker:{m}"))), "session {key} holds {v:?}, want marker:{m}");
        let source = srv.get(&format!("tmp/{key}/source")).text();
        let foreign = results.iter().filter(|(o, _)| o != m && source.contains(&format!("\"{o}\""))).count();
        ensure!(source.contains(&format!("\"{m}\"")) && foreign == 0, "session {key} source {source:?}");
    }
    srv.stop();
    let ratio = wall.as_secs_f64() / single.as_secs_f64();
    let cpus = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let detail = format!(
        "32 distinct keys and markers; wall {:.1} ms vs single {:.2} ms ({ratio:.1}x, limit 5x, {cpus} cpus)",
        wall.as_secs_f64() * 1e3,
        single.as_secs_f64() * 1e3,
    );
    if ratio >= 5.0 {
        // 32 CPU-bound requests need at least 32/5 cores to finish within 5x.
        return Err(Failure {
            msg: detail,
            host_limited: cpus * 5 < 32,
        });
    }
    Ok(detail)
}

// Criterion 4

fn builtin(name: &str) -> Value {
    Value::Function(Function::Builtin(statgate_core::lang::builtins::lookup(name).expect("builtin")))
}

fn call(name: &str, args: Vec<(Option<String>, Value)>) -> Result<Value, String> {
    let mut ctx = EvalContext::new(Budget::unlimited(), 0);
    call_function(&builtin(name), args, &mut ctx).map_err(|e| e.to_string())
}

fn arith_oracle(op: &str, p: f64, q: f64) -> f64 {
    match op {
        "+" => p + q,
        "-" => p - q,
        "*" => p * q,
        "/" => p / q,
        _ => p.powf(q),
    }
}

fn compare_oracle(op: &str, p: f64, q: f64) -> Option<bool> {
    if p.is_nan() || q.is_nan() {
        return None;
    }
    Some(match op {
        "<" => p < q,
        ">" => p > q,
        "<=" => p <= q,
        ">=" => p >= q,
        "==" => p == q,
        _ => p != q,
    })
}

fn filter_oracle(op: &str, xs: &[Option<f64>], na_rm: bool) -> Option<f64> {
    let kept: Vec<f64> = if na_rm {
        xs.iter().filter_map(|x| *x).collect()
    } else if xs.iter().any(Option::is_none) {
        return None;
    } else {
        xs.iter().map(|x| x.unwrap()).collect()
    };
    let n = kept.len() as f64;
    let mut total = 0.0;
    for x in &kept {
        total += x;
    }
    Some(match op {
        "sum" => total,
        "mean" => total / n,
        "sd" => {
            if kept.len() < 2 {
                f64::NAN
            } else {
                let m = total / n;
                (kept.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        }
        _ if kept.iter().any(|x| x.is_nan()) => f64::NAN,
        "min" => kept.iter().copied().fold(f64::INFINITY, f64::min),
        _ => kept.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => {
            (x.is_nan() && y.is_nan()) || x == y || (x - y).abs() <= 1e-12 * x.abs().max(y.abs())
        }
        _ => false,
    }
}

fn missing_values() -> Outcome {
    let mut r = rng(4);
    let mut vectors = 0;
    let mut checks = 0;
    let specials = [f64::NAN, f64::INFINITY, 0.0];
    for case in 0..1200 {
        let (la, lb) = if r.random_bool(0.5) {
            let l = r.random_range(0..9);
            (l, l)
        } else {
            (r.random_range(1..9), r.random_range(1..5))
        };
        let mut a = num_vec(&mut r, la, 0.3);
        let b = num_vec(&mut r, lb, 0.3);
        if la > 0 && r.random_bool(0.3) {
            let i = r.random_range(0..la);
            a[i] = Some(specials[r.random_range(0..specials.len())]);
        }
        vectors += 2;
        let va = Value::Vector(Vector::Number(a.clone()));
        let vb = Value::Vector(Vector::Number(b.clone()));
        let n = if la == 0 || lb == 0 { 0 } else { la.max(lb) };
        for op in ["+", "-", "*", "/", "^"] {
            let got = call(op, vec![(None, va.clone()), (None, vb.clone())])?;
            let want: Vec<Option<f64>> = (0..n)
                .map(|i| match (a[i % la], b[i % lb]) {
                    (Some(p), Some(q)) => Some(arith_oracle(op, p, q)),
                    _ => None,
                })
                .collect();
            ensure!(deep_equals(&got, &Value::Vector(Vector::Number(want.clone()))), "case {case}: {a:?} {op} {b:?} = {got:?}, want {want:?}");
            checks += 1;
        }
        for op in ["<", ">", "<=", ">=", "==", "!="] {
            let got = call(op, vec![(None, va.clone()), (None, vb.clone())])?;
            let want: Vec<Option<bool>> = (0..n)
                .map(|i| match (a[i % la], b[i % lb]) {
                    (Some(p), Some(q)) => compare_oracle(op, p, q),
                    _ => None,
                })
                .collect();
            ensure!(deep_equals(&got, &Value::Vector(Vector::Logical(want.clone()))), "case {case}: {a:?} {op} {b:?} = {got:?}, want {want:?}");
            checks += 1;
        }
        let neg = call("-", vec![(None, va.clone())])?;
        let want: Vec<Option<f64>> = a.iter().map(|x| x.map(|v| -v)).collect();
        ensure!(deep_equals(&neg, &Value::Vector(Vector::Number(want))), "case {case}: -{a:?} = {neg:?}");
        let isna = call("is_na", vec![(None, va.clone())])?;
        let want: Vec<Option<bool>> = a.iter().map(|x| Some(x.is_none())).collect();
        ensure!(deep_equals(&isna, &Value::Vector(Vector::Logical(want))), "case {case}: is_na({a:?}) = {isna:?}");
        let joined = call("c", vec![(None, va.clone()), (None, vb.clone())])?;
        let want: Vec<Option<f64>> = a.iter().chain(&b).copied().collect();
        ensure!(deep_equals(&joined, &Value::Vector(Vector::Number(want))), "case {case}: c() = {joined:?}");
        checks += 3;
        for op in ["sum", "mean", "sd", "min", "max"] {
            for na_rm in [false, true] {
                let got = call(op, vec![(None, va.clone()), (Some("na_rm".into()), Value::Logical(Some(na_rm)))])?;
                let Value::Number(got) = got else {
                    return Err(format!("case {case}: {op} returned {got:?}").into());
                };
                let want = filter_oracle(op, &a, na_rm);
                ensure!(close(got, want), "case {case}: {op}({a:?}, na_rm = {na_rm}) = {got:?}, want {want:?}");
                checks += 1;
            }
        }
    }
    Ok(format!("{vectors} vectors, {checks} checks, zero failures"))
}

// Criterion 5

fn normal_equations(cols: &[Vec<f64>], y: &[f64], intercept: bool) -> Option<DVector<f64>> {
    let n = y.len();
    let mut all: Vec<Vec<f64>> = Vec::new();
    if intercept {
        all.push(vec![1.0; n]);
    }
    all.extend(cols.iter().cloned());
    let x = DMatrix::from_fn(n, all.len(), |i, j| all[j][i]);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * DVector::from_column_slice(y);
    xtx.cholesky().map(|c| c.solve(&xty))
}

fn rank_deficiency() -> Outcome {
    let srv = TestServer::start();
    let collinear = [
        r#"{"x": {"a": [1, 2, 3, 4], "b": [2, 4, 6, 8]}, "y": [1, 2, 3, 5]}"#,
        r#"{"x": {"a": [1, 2, 3, 4, 5], "b": [1, 0, 1, 0, 1], "c": [3, 2, 5, 4, 7]}, "y": [5, 1, 2, 2, 0]}"#,
        r#"{"x": [3, 3, 3, 3], "y": [1, 2, 3, 4]}"#,
        r#"{"x": {"a": [0.5, 1.5, 2.5], "b": [1, 3, 5]}, "y": [1, 0, 1], "intercept": false}"#,
        r#"{"x": {"a": [1, 2], "b": [3, 1]}, "y": [1, 2]}"#,
    ];
    for body in collinear {
        let resp = srv.post_json("library/demo/R/lsfit", body);
        ensure!(resp.status == 400, "collinear {body}: status {}", resp.status);
        ensure!(resp.content_type.starts_with("text/plain"), "collinear {body}: {}", resp.content_type);
        ensure!(resp.text().contains("rank deficient"), "collinear {body}: {}", resp.text());
    }
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = r.random_range(6..40);
        let p = r.random_range(1..5);
        let intercept = r.random_bool(0.7);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| r.random_range(-10.0..10.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-100.0..100.0)).collect();
        let mut x = serde_json::Map::new();
        for (j, c) in cols.iter().enumerate() {
            x.insert(format!("v{j}"), serde_json::json!(c));
        }
        let body = serde_json::json!({"x": x, "y": y, "intercept": intercept}).to_string();
        let resp = srv.post_json("library/demo/R/lsfit", &body);
        let key = resp.key().map_err(|e| format!("system {i}: {e}"))?;
        let fit = srv.val(&key)?;
        let Value::List(l) = &fit else {
            return Err(format!("system {i}: lsfit returned {fit:?}").into());
        };
        let Some(Value::Vector(Vector::Number(coef))) = l.get("coefficients") else {
            return Err(format!("system {i}: no coefficients in {fit:?}").into());
        };
        let oracle = normal_equations(&cols, &y, intercept).ok_or_else(|| format!("system {i}: oracle found the system singular"))?;
        ensure!(coef.len() == oracle.len(), "system {i}: {} coefficients, want {}", coef.len(), oracle.len());
        let got = DVector::from_iterator(coef.len(), coef.iter().map(|c| c.unwrap_or(f64::NAN)));
        let rel = (&got - &oracle).norm() / oracle.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure!(rel <= 1e-8, "system {i}: relative error {rel:e}");
    }
    srv.stop();
    Ok(format!(
        "{} collinear inputs give 400; 100 full-rank systems, worst relative error {worst:.1e} (pivot tolerance {RANK_TOLERANCE:e})",
        collinear.len()
    ))
}

// Criterion 6

fn graphics_svgs(srv: &TestServer, key: &str) -> Result<Vec<Vec<u8>>, String> {
    let listing = srv.get(&format!("tmp/{key}/graphics/"));
    ensure!(listing.status == 200, "graphics listing of {key}: {}", listing.status);
    let mut out = Vec::new();
    for n in listing.text().lines() {
        let r = srv.get(&format!("tmp/{key}/graphics/{n}/svg"));
        ensure!(r.status == 200, "graphic {n} of {key}: {}", r.status);
        out.push(r.body);
    }
    Ok(out)
}

fn replay_reproducibility() -> Outcome {
    let srv = TestServer::start();
    let mut r = rng(6);
    let script = b"x <- rnorm(n)\nprint(mean(x))\nhist(x, main = \"draws\")\nplot(sort(x), runif(n))\nwrite_csv(data_frame(x = x), \"draws.csv\")\nsd(x)\n".to_vec();
    let holder = srv.post_multipart("library/base/R/identity", upload("x", "sim.r", script, &[])).key()?;
    let csv_upload = b"g,v\n\"a\",1.5\n\"b\",\n\"a\",-2\n".to_vec();
    let mut sessions: Vec<(String, String)> = Vec::new();
    let mut last_rnorm: Option<String> = None;
    let mut kinds = BTreeSet::new();
    for i in 0..100 {
        let seed = r.random_range(0..(1u64 << 53)).to_string();
        let kind = match i {
            0 => "key",
            1 => "file",
            _ => ["rnorm", "runif", "hist", "plot", "script", "package-script", "key", "file"][r.random_range(0..8)],
        };
        let resp = match kind {
            "key" => {
                let src = match &last_rnorm {
                    Some(k) => k.clone(),
                    None => {
                        let k = srv.post_form("library/demo/R/rnorm", &[("n", "4"), (".seed", "11")]).key()?;
                        last_rnorm = Some(k.clone());
                        k
                    }
                };
                srv.post_form("library/demo/R/scale_by", &[("x", src.as_str()), ("k", "rnorm(1)"), (".seed", &seed)])
            }
            "file" => srv.post_multipart("library/base/R/read_csv", upload("file", "upload.csv", csv_upload.clone(), &[(".seed", &seed)])),
            "rnorm" => {
                let n = r.random_range(1..20).to_string();
                srv.post_form("library/demo/R/rnorm", &[("n", &n), ("mean", "2"), (".seed", &seed)])
            }
            "runif" => srv.post_form("library/base/R/runif", &[("n", "5"), (".seed", &seed)]),
            "hist" => srv.post_form("library/demo/R/hist", &[("x", "rnorm(40)"), (".seed", &seed)]),
            "plot" => srv.post_form("library/demo/R/plot", &[("x", "runif(10)"), ("y", "rnorm(10)"), (".seed", &seed)]),
            "script" => {
                let n = r.random_range(2..30).to_string();
                srv.post_form(&format!("tmp/{holder}/files/sim.r"), &[("n", &n), (".seed", &seed)])
            }
            _ => srv.post_form("library/demo/scripts/ch01.r", &[(".seed", &seed)]),
        };
        let key = resp.key().map_err(|e| format!("rpc {i} ({kind}): {e}"))?;
        if kind == "rnorm" {
            last_rnorm = Some(key.clone());
        }
        kinds.insert(kind);
        sessions.push((kind.to_string(), key));
    }
    for (i, (kind, key)) in sessions.iter().enumerate() {
        let again = srv.post_raw(&format!("tmp/{key}/replay"), None, Vec::new());
        let k2 = again.key().map_err(|e| format!("replay {i} ({kind}): {e}"))?;
        ensure!(k2 != *key, "replay reused the key");
        let (a, b) = (srv.val(key)?, srv.val(&k2)?);
        ensure!(deep_equals(&a, &b), "replay {i} ({kind}): .val {a:?} vs {b:?}");
        let (so, sr) = (srv.get(&format!("tmp/{key}/stdout")), srv.get(&format!("tmp/{k2}/stdout")));
        ensure!(so.status == 200 && so.body == sr.body, "replay {i} ({kind}): stdout differs");
        let (ga, gb) = (graphics_svgs(&srv, key)?, graphics_svgs(&srv, &k2)?);
        ensure!(ga == gb, "replay {i} ({kind}): {} vs {} graphics or differing SVG bytes", ga.len(), gb.len());
        if kind == "script" || kind == "file" {
            let (la, lb) = (srv.get(&format!("tmp/{key}/")), srv.get(&format!("tmp/{k2}/")));
            ensure!(la.body == lb.body, "replay {i} ({kind}): content lists differ");
        }
    }
    srv.stop();
    Ok(format!("100 seeded RPCs replayed identically ({})", kinds.into_iter().collect::<Vec<_>>().join(", ")))
}

// Criterion 7

fn resource_control() -> Outcome {
    let timeout = Duration::from_secs(2);
    let cell_limit = 10_000_000u64;
    let srv = TestServer::with_config(ApiConfig {
        timeout,
        cell_limit,
        ..ApiConfig::default()
    });
    let unrelated = |srv: &TestServer| srv.get("library/demo/data/cats/json").status;
    ensure!(unrelated(&srv) == 200, "server not ready");
    let before = rss_bytes();
    let runaway: [(&str, Vec<(&str, &str)>); 4] = [
        ("library/base/R/identity", vec![("x", "rep(0, 10^12)")]),
        ("library/base/R/rep", vec![("x", "0"), ("times", "10^12")]),
        ("library/base/R/identity", vec![("x", "c(rep(0, 6e6), rep(1, 6e6))")]),
        ("library/base/R/sum", vec![("x", "rnorm(2e7)")]),
    ];
    let mut peak_growth = 0u64;
    let mut slowest = Duration::ZERO;
    for (path, fields) in &runaway {
        let (resp, elapsed, during) = thread::scope(|sc| {
            let big = sc.spawn(|| {
                let t = Instant::now();
                let r = srv.post_form(path, fields);
                (r, t.elapsed())
            });
            let mut during = Vec::new();
            while !big.is_finished() && during.len() < 50 {
                during.push(unrelated(&srv));
                thread::sleep(Duration::from_millis(5));
            }
            during.push(unrelated(&srv));
            let (r, e) = big.join().unwrap();
            (r, e, during)
        });
        ensure!(resp.status == 503, "{path} {fields:?}: status {} {}", resp.status, resp.text());
        ensure!(elapsed <= timeout + Duration::from_secs(1), "{path} {fields:?}: took {elapsed:?}");
        ensure!(during.iter().all(|s| *s == 200), "unrelated requests during the event: {during:?}");
        slowest = slowest.max(elapsed);
        peak_growth = peak_growth.max(rss_bytes().saturating_sub(before));
    }
    let bound = cell_limit * 8 + 64 * 1024 * 1024;
    ensure!(peak_growth <= bound, "memory grew by {peak_growth} bytes, bound {bound}");
    ensure!(unrelated(&srv) == 200, "unrelated request after the events failed");
    srv.stop();
    Ok(format!(
        "{} runaway RPCs answered 503, slowest {:.0} ms (limit {:.0} ms); RSS growth {:.1} MiB (bound {:.1} MiB); unrelated GETs 200 during and after",
        runaway.len(),
        slowest.as_secs_f64() * 1e3,
        (timeout + Duration::from_secs(1)).as_secs_f64() * 1e3,
        peak_growth as f64 / 1048576.0,
        bound as f64 / 1048576.0
    ))
}

// Criterion 8

fn csv_frame(r: &mut rand::rngs::StdRng) -> DataFrame {
    let nrow = r.random_range(1..8);
    let ncol = r.random_range(1..6);
    let mut names = BTreeSet::new();
    while names.len() < ncol {
        names.insert(ident(r));
    }
    let cols = names
        .into_iter()
        .map(|name| {
            let na = |r: &mut rand::rngs::StdRng| r.random_bool(0.25);
            let keep = r.random_range(0..nrow);
            let col = match r.random_range(0..3) {
                0 => Vector::Logical((0..nrow).map(|_| if na(r) { None } else { Some(r.random()) }).collect()),
                1 => Vector::Number(
                    (0..nrow)
                        .map(|i| if i != keep && na(r) { None } else { Some(common::any_f64(r)) })
                        .collect(),
                ),
                _ => Vector::Str(
                    (0..nrow)
                        .map(|i| if i != keep && na(r) { None } else { Some(common::random_string(r)) })
                        .collect(),
                ),
            };
            (name, col)
        })
        .collect();
    DataFrame::new(cols).expect("frame")
}

fn format_round_trips() -> Outcome {
    let mut r = rng(8);
    for i in 0..1000 {
        let v = random_value(&mut r, 3, false);
        let bytes = bin::encode(&v).map_err(|e| format!("bin value {i}: {e}"))?;
        let back = bin::decode(&bytes).map_err(|e| format!("bin value {i}: {e}"))?;
        ensure!(deep_equals(&back, &v), "bin value {i}: {v:?} came back as {back:?}");
        ensure!(bin::encode(&back).ok() == Some(bytes), "bin value {i}: re-encoding differs");
    }
    for i in 0..1000 {
        let v = random_value(&mut r, 3, true);
        let text = json::export_json(&v, false).map_err(|e| format!("json value {i}: {e}"))?;
        let back = json::import_json(text.as_bytes()).map_err(|e| format!("json value {i}: {e} in {text}"))?;
        let want = json::json_widen(&v);
        ensure!(deep_equals(&back, &want), "json value {i}: {v:?} -> {text} -> {back:?}, want {want:?}");
    }
    let mut na_cells = 0;
    for i in 0..500 {
        let df = if i % 2 == 0 { csv_frame(&mut r) } else { random_frame(&mut r, false) };
        if df.nrow() == 0 || df.columns().iter().any(|(_, c)| !matches!(c, Vector::Logical(_)) && (0..c.len()).all(|j| c.is_na(j))) {
            continue;
        }
        na_cells += df.columns().iter().map(|(_, c)| (0..c.len()).filter(|&j| c.is_na(j)).count()).sum::<usize>();
        let text = csv::write_csv(&df);
        let back = csv::read_csv(text.as_bytes()).map_err(|e| format!("csv frame {i}: {e}\n{text}"))?;
        ensure!(
            deep_equals(&Value::DataFrame(back.clone()), &Value::DataFrame(df.clone())),
            "csv frame {i}: {df:?}\n{text}\n{back:?}"
        );
    }
    ensure!(na_cells > 0, "no NA cells exercised");
    Ok(format!("1000 bin, 1000 json, csv frames with {na_cells} NA cells; zero failures"))
}

// Criterion 9

/// Listing entries are container paths, except that object names in an
/// `R/` listing (and after `R/` in a content list) are single segments that
/// may contain `/`.
fn encode_entry(dir: &str, entry: &str) -> String {
    let seg = |s: &str| utf8_percent_encode(s, NON_ALPHANUMERIC).to_string();
    if dir.ends_with("/R/") {
        return seg(entry);
    }
    if let Some(name) = entry.strip_prefix("R/") {
        return format!("R/{}", seg(name));
    }
    let (body, slash) = match entry.strip_suffix('/') {
        Some(b) => (b, "/"),
        None => (entry, ""),
    };
    body.split('/').map(seg).collect::<Vec<_>>().join("/") + slash
}

fn crawl(srv: &TestServer, start: &str, visited: &mut BTreeSet<String>, bodies: &mut Vec<(String, String)>) -> Result<(), String> {
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(path) = queue.pop_front() {
        if !visited.insert(path.clone()) || visited.len() > 5000 {
            continue;
        }
        let r = srv.get(&path);
        match r.status {
            302 => {
                if let Some(loc) = &r.location {
                    let rel = loc.strip_prefix(&srv.prefix).unwrap_or(loc).trim_start_matches('/');
                    queue.push_back(rel.to_string());
                }
            }
            200 => {
                let text = r.text();
                if path.is_empty() || path.ends_with('/') {
                    for line in text.lines() {
                        queue.push_back(format!("{path}{}", encode_entry(&path, line)));
                    }
                    // The root and library listings are not containers and take no format.
                    if !path.is_empty() && path != "library/" {
                        queue.push_back(format!("{path}json"));
                    }
                }
                bodies.push((path, text));
            }
            status => return Err(format!("listed resource {path} answered {status}")),
        }
    }
    Ok(())
}

fn key_privacy() -> Outcome {
    let srv = TestServer::start();
    let mut issued = BTreeSet::new();
    issued.insert(srv.post_form("library/demo/scripts/ch01.r", &[]).key()?);
    issued.insert(srv.post_form("library/demo/R/rnorm", &[("n", "5")]).key()?);
    issued.insert(srv.post_multipart("library/base/R/identity", upload("x", "f.txt", b"hello".to_vec(), &[])).key()?);
    let mut r = rng(9);
    let mut probes = 0;
    for i in 0..10_000 {
        let key = format!("x{:019x}", r.random::<u128>() & ((1u128 << 76) - 1));
        ensure!(SessionKey::is_well_formed(&key), "generated malformed key {key}");
        if issued.contains(&key) {
            continue;
        }
        let resp = match i % 8 {
            0 => srv.get(&format!("tmp/{key}/")),
            1 => srv.get(&format!("tmp/{key}")),
            2 => srv.get(&format!("tmp/{key}/R/.val/json")),
            3 => srv.get(&format!("tmp/{key}/graphics/1/png")),
            4 => srv.get(&format!("tmp/{key}/files/data.csv")),
            5 => srv.get(&format!("tmp/{key}/console")),
            6 => srv.post_form(&format!("tmp/{key}/R/f"), &[]),
            _ => srv.post_raw(&format!("tmp/{key}/replay"), None, Vec::new()),
        };
        ensure!(resp.status == 404, "never-issued key {key}: status {}", resp.status);
        probes += 1;
    }

    let mut visited = BTreeSet::new();
    let mut bodies = Vec::new();
    crawl(&srv, "", &mut visited, &mut bodies)?;
    for path in ["tmp", "tmp/", "tmp/json", "tmp/R/", "tmp/?all=1", "tmp/*/", "tmp/x/"] {
        let resp = srv.get(path);
        ensure!(resp.status == 404, "GET {path}: {}", resp.status);
        bodies.push((path.to_string(), resp.text()));
    }
    let public = bodies.len();
    for key in &issued {
        crawl(&srv, &format!("tmp/{key}/"), &mut visited, &mut bodies)?;
    }
    for (path, body) in &bodies {
        let own = path.strip_prefix("tmp/").and_then(|p| p.split('/').next()).unwrap_or("");
        let leaked: Vec<String> = keys_in(body).into_iter().filter(|k| issued.contains(k) && k != own).collect();
        ensure!(leaked.is_empty(), "GET {path} reveals {leaked:?}");
    }
    ensure!(visited.iter().any(|p| p.starts_with("library/demo/R/")), "audit did not reach the demo package");
    srv.stop();
    Ok(format!(
        "{probes} never-issued keys gave 404; audited {public} public and {} session routes without a key leak",
        bodies.len() - public
    ))
}
