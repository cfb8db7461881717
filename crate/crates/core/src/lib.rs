//! statgate: an HTTP gateway for an embedded data-analysis language.
//!
//! Every remote procedure call (a `POST` on a function or script) is
//! evaluated in an isolated, budgeted context and its outputs are frozen
//! into a *session*: a container of objects, graphics, files, source and
//! stdout, addressed by an unguessable temporary key. Sessions and static
//! packages share one URL tree, so the output of one call can be passed by
//! key to the next.
//!
//! Module map:
//!
//! * [`value`]: the value model, session keys, resource paths and containers.
//! * [`lang`]: lexer, parser and evaluator of the embedded language.
//! * [`formats`]: export codecs (print, json, csv, tab, bin, svg, png) and
//!   argument import.
//! * [`store`]: on-disk session store and package registry.
//! * [`repro`]: call records, console transcripts and replay.
//! * [`api`]: routing, status mapping and the HTTP server.

pub mod api;
pub mod formats;
pub mod lang;
pub mod par;
pub mod repro;
pub mod store;
pub mod value;

pub use par::Parallelism;
pub use value::{deep_equals, Container, SessionKey, Value};

/// Version string recorded in session metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
