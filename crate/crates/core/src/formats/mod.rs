//! Export codecs for every resource kind and import of RPC arguments.
//!
//! Which formats apply to which resource is fixed by [`support`]; every
//! other pairing is a [`FormatError`].

pub mod bin;
pub mod csv;
mod font;
pub mod import;
pub mod json;
pub mod manual;
pub mod multipart;
pub mod png;
pub mod print;
pub mod svg;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lang::GraphicsRecording;
use crate::value::{ManualPage, Value};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct FormatError(pub String);

impl FormatError {
    pub fn new(msg: impl Into<String>) -> Self {
        FormatError(msg.into())
    }
}

pub type FormatResult<T> = Result<T, FormatError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormatId {
    Print,
    Json,
    Csv,
    Tab,
    Bin,
    Svg,
    Png,
    Text,
    Html,
}

/// Format ids that are recognized in paths but not served.
pub const UNSUPPORTED_IDS: [&str; 4] = ["pb", "pdf", "rda", "rds"];

impl FormatId {
    pub const ALL: [FormatId; 9] = [
        FormatId::Print,
        FormatId::Json,
        FormatId::Csv,
        FormatId::Tab,
        FormatId::Bin,
        FormatId::Svg,
        FormatId::Png,
        FormatId::Text,
        FormatId::Html,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormatId::Print => "print",
            FormatId::Json => "json",
            FormatId::Csv => "csv",
            FormatId::Tab => "tab",
            FormatId::Bin => "bin",
            FormatId::Svg => "svg",
            FormatId::Png => "png",
            FormatId::Text => "text",
            FormatId::Html => "html",
        }
    }

    pub fn from_name(s: &str) -> Option<FormatId> {
        FormatId::ALL.into_iter().find(|f| f.name() == s)
    }

    /// True for any segment that names a format, served or not.
    pub fn is_format_segment(s: &str) -> bool {
        FormatId::from_name(s).is_some() || UNSUPPORTED_IDS.contains(&s)
    }

    pub fn media_type(self) -> &'static str {
        match self {
            FormatId::Print | FormatId::Tab | FormatId::Text => "text/plain",
            FormatId::Json => "application/json",
            FormatId::Csv => "text/csv",
            FormatId::Bin => "application/octet-stream",
            FormatId::Svg => "image/svg+xml",
            FormatId::Png => "image/png",
            FormatId::Html => "text/html",
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            FormatId::Tab => &["sep", "eol", "dec"],
            FormatId::Svg | FormatId::Png => &["width", "height"],
            FormatId::Json => &["pretty"],
            _ => &[],
        }
    }
}

/// A format id with validated parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportFormat {
    pub id: FormatId,
    pub params: BTreeMap<String, String>,
}

pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 480;
pub const MAX_DIMENSION: u32 = 5000;

impl ExportFormat {
    pub fn plain(id: FormatId) -> ExportFormat {
        ExportFormat {
            id,
            params: BTreeMap::new(),
        }
    }

    /// Resolves a format name and checks its parameters.
    pub fn parse(name: &str, params: BTreeMap<String, String>) -> FormatResult<ExportFormat> {
        let id = FormatId::from_name(name).ok_or_else(|| {
            if UNSUPPORTED_IDS.contains(&name) {
                FormatError::new(format!("format '{name}' is not supported by this server"))
            } else {
                FormatError::new(format!("unknown format '{name}'"))
            }
        })?;
        let f = ExportFormat { id, params };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> FormatResult<()> {
        let allowed = self.id.allowed_params();
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(FormatError::new(format!(
                    "unknown parameter '{k}' for format '{}'",
                    self.id.name()
                )));
            }
        }
        match self.id {
            FormatId::Svg | FormatId::Png => {
                self.dimensions()?;
            }
            FormatId::Tab => {
                self.tab_options()?;
            }
            FormatId::Json => {
                self.pretty()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Pixel size for graphics formats.
    pub fn dimensions(&self) -> FormatResult<(u32, u32)> {
        let dim = |key: &str, default: u32| -> FormatResult<u32> {
            match self.params.get(key) {
                None => Ok(default),
                Some(s) => match s.parse::<u32>() {
                    Ok(v) if (1..=MAX_DIMENSION).contains(&v) => Ok(v),
                    _ => Err(FormatError::new(format!(
                        "{key} must be an integer between 1 and {MAX_DIMENSION}, got '{s}'"
                    ))),
                },
            }
        };
        Ok((dim("width", DEFAULT_WIDTH)?, dim("height", DEFAULT_HEIGHT)?))
    }

    pub fn tab_options(&self) -> FormatResult<csv::Delimited> {
        let unescape = |s: &str| s.replace("\\t", "\t").replace("\\n", "\n").replace("\\r", "\r");
        let sep = self.params.get("sep").map_or("\t".to_string(), |s| unescape(s));
        let eol = self.params.get("eol").map_or("\n".to_string(), |s| unescape(s));
        let dec = self.params.get("dec").map_or(".".to_string(), |s| s.clone());
        if sep.is_empty() || sep.contains('"') || sep.contains('\n') {
            return Err(FormatError::new("sep must be non-empty and contain no quote or newline"));
        }
        if eol != "\n" && eol != "\r\n" {
            return Err(FormatError::new("eol must be \\n or \\r\\n"));
        }
        if dec.chars().count() != 1 || sep == dec || dec == "\"" || dec.chars().any(|c| c.is_ascii_digit() || c == '-') {
            return Err(FormatError::new("dec must be a single character different from sep"));
        }
        Ok(csv::Delimited { sep, eol, dec })
    }

    fn pretty(&self) -> FormatResult<bool> {
        match self.params.get("pretty").map(String::as_str) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(other) => Err(FormatError::new(format!("pretty must be true or false, got '{other}'"))),
        }
    }
}

/// A resource as seen by the exporters.
#[derive(Clone, Copy, Debug)]
pub enum Exportable<'a> {
    Value(&'a Value),
    Graphic(&'a GraphicsRecording),
    Manual(&'a ManualPage),
    Text(&'a str),
    Listing(&'a [String]),
}

impl Exportable<'_> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Exportable::Value(Value::Function(_)) => "function",
            Exportable::Value(Value::DataFrame(_)) => "data frame",
            Exportable::Value(_) => "object",
            Exportable::Graphic(_) => "graphic",
            Exportable::Manual(_) => "manual",
            Exportable::Text(_) => "text",
            Exportable::Listing(_) => "listing",
        }
    }

    /// The format used when the request names none.
    pub fn default_format(&self) -> FormatId {
        match self {
            Exportable::Graphic(_) | Exportable::Value(Value::Graphic(_)) => FormatId::Png,
            Exportable::Manual(_) => FormatId::Text,
            _ => FormatId::Print,
        }
    }
}

/// Whether `id` applies to resource `r`.
pub fn support(r: &Exportable<'_>, id: FormatId) -> bool {
    use FormatId::*;
    match r {
        Exportable::Value(Value::Function(_)) => id == Print,
        Exportable::Value(Value::DataFrame(_)) => matches!(id, Print | Json | Bin | Csv | Tab),
        Exportable::Value(Value::Graphic(_)) | Exportable::Graphic(_) => matches!(id, Print | Json | Bin | Svg | Png),
        Exportable::Value(_) => matches!(id, Print | Json | Bin),
        Exportable::Manual(_) => matches!(id, Print | Text | Html | Json),
        Exportable::Text(_) | Exportable::Listing(_) => matches!(id, Print | Text | Json),
    }
}

/// Renders `r` in format `f`: the body bytes and their media type.
pub fn export(r: Exportable<'_>, f: &ExportFormat) -> FormatResult<(Vec<u8>, &'static str)> {
    if !support(&r, f.id) {
        return Err(FormatError::new(format!(
            "format '{}' does not apply to a {}",
            f.id.name(),
            r.kind_name()
        )));
    }
    let media = f.id.media_type();
    let text = |s: String| Ok((s.into_bytes(), media));
    let graphic = |g: &GraphicsRecording| -> FormatResult<(Vec<u8>, &'static str)> {
        let (w, h) = f.dimensions()?;
        match f.id {
            FormatId::Svg => Ok((svg::render_svg(g, w, h).into_bytes(), media)),
            _ => Ok((png::render_png(g, w, h, crate::par::Parallelism::default())?, media)),
        }
    };
    match (r, f.id) {
        (Exportable::Value(v), FormatId::Print) => text(print::print_value(v) + "\n"),
        (Exportable::Value(v), FormatId::Json) => text(json::export_json(v, f.pretty()?)?),
        (Exportable::Value(v), FormatId::Bin) => Ok((bin::encode(v)?, media)),
        (Exportable::Value(Value::DataFrame(df)), FormatId::Csv) => text(csv::write_csv(df)),
        (Exportable::Value(Value::DataFrame(df)), FormatId::Tab) => text(csv::write_delimited(df, &f.tab_options()?)),
        (Exportable::Value(Value::Graphic(g)), _) => graphic(g),
        (Exportable::Graphic(g), FormatId::Print) => {
            text(print::print_value(&Value::Graphic(std::sync::Arc::new(g.clone()))) + "\n")
        }
        (Exportable::Graphic(g), FormatId::Json) => text(json::export_json(&Value::Graphic(std::sync::Arc::new(g.clone())), f.pretty()?)?),
        (Exportable::Graphic(g), FormatId::Bin) => Ok((bin::encode(&Value::Graphic(std::sync::Arc::new(g.clone())))?, media)),
        (Exportable::Graphic(g), _) => graphic(g),
        (Exportable::Manual(m), FormatId::Print | FormatId::Text) => text(manual::render_text(m)),
        (Exportable::Manual(m), FormatId::Html) => text(manual::render_html(m)),
        (Exportable::Manual(m), FormatId::Json) => text(manual::render_json(m)),
        (Exportable::Text(s), FormatId::Json) => text(serde_json::to_string(s).expect("string serializes")),
        (Exportable::Text(s), _) => text(s.to_string()),
        (Exportable::Listing(names), FormatId::Json) => text(serde_json::to_string(names).expect("strings serialize")),
        (Exportable::Listing(names), _) => text(names.iter().map(|n| format!("{n}\n")).collect()),
        (r, id) => Err(FormatError::new(format!(
            "format '{}' does not apply to a {}",
            id.name(),
            r.kind_name()
        ))),
    }
}

/// Media type of a verbatim file, guessed from its extension.
pub fn file_media_type(name: &str) -> &'static str {
    let ext = name.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("csv") => "text/csv",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("html" | "htm") => "text/html",
        Some("txt" | "r" | "md" | "rmd" | "tex" | "rnw" | "brew") => "text/plain",
        _ if !name.contains('.') => "text/plain",
        _ => "application/octet-stream",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{DataFrame, Function, Vector};

    fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn parameters_are_validated() {
        assert!(ExportFormat::parse("png", params(&[("width", "800"), ("height", "600")])).is_ok());
        assert!(ExportFormat::parse("png", params(&[("width", "0")])).is_err());
        assert!(ExportFormat::parse("png", params(&[("width", "5001")])).is_err());
        assert!(ExportFormat::parse("csv", params(&[("sep", ";")])).is_err());
        assert!(ExportFormat::parse("tab", params(&[("sep", ";"), ("dec", ",")])).is_ok());
        assert!(ExportFormat::parse("tab", params(&[("sep", ","), ("dec", ",")])).is_err());
        let err = ExportFormat::parse("pdf", BTreeMap::new()).unwrap_err();
        assert!(err.0.contains("not supported"));
    }

    #[test]
    fn applicability_matrix_is_total() {
        let df = Value::DataFrame(DataFrame::new(vec![("a".into(), Vector::Number(vec![Some(1.0)]))]).unwrap());
        let g = GraphicsRecording::default();
        let m = ManualPage::default();
        let listing = vec!["a".to_string()];
        let values = [
            Value::Null,
            Value::number(1.0),
            Value::numbers([1.0, 2.0]),
            df,
            Value::Function(Function::Builtin("sum")),
            Value::Graphic(std::sync::Arc::new(g.clone())),
        ];
        let mut resources: Vec<Exportable<'_>> = values.iter().map(Exportable::Value).collect();
        resources.extend([
            Exportable::Graphic(&g),
            Exportable::Manual(&m),
            Exportable::Text("hello"),
            Exportable::Listing(&listing),
        ]);
        for r in &resources {
            for id in FormatId::ALL {
                let f = ExportFormat::plain(id);
                let out = export(*r, &f);
                assert_eq!(out.is_ok(), support(r, id), "{} as {}", r.kind_name(), id.name());
                if let Ok((_, media)) = out {
                    assert_eq!(media, id.media_type());
                }
            }
        }
    }

    #[test]
    fn function_cannot_be_csv() {
        let f = Value::Function(Function::Builtin("sum"));
        assert!(export(Exportable::Value(&f), &ExportFormat::plain(FormatId::Csv)).is_err());
    }
}
