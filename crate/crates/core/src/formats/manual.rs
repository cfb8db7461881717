//! Manual pages: the `man/*.txt` source format and its text, HTML and JSON
//! renderings.
//!
//! Source format, one section per header line:
//!
//! ```text
//! Title: Least-squares fit
//! Description:
//!   Fits y on the columns of x.
//! Usage:
//!   lsfit(x, y, intercept = TRUE)
//! Arguments:
//!   x: predictor vector or data frame
//!   y: response vector
//! ```

use super::{FormatError, FormatResult};
use crate::value::ManualPage;

const SECTIONS: [&str; 4] = ["Title", "Description", "Usage", "Arguments"];

fn header(line: &str) -> Option<(&'static str, &str)> {
    SECTIONS.iter().find_map(|s| {
        line.strip_prefix(s)
            .and_then(|rest| rest.strip_prefix(':'))
            .map(|rest| (*s, rest.trim()))
    })
}

/// Parses a manual source file for the object `name`.
pub fn parse_manual(name: &str, text: &str) -> FormatResult<ManualPage> {
    let mut page = ManualPage {
        name: name.to_string(),
        ..ManualPage::default()
    };
    let mut section: Option<&str> = None;
    let mut bodies: [Vec<String>; 4] = Default::default();
    for (i, raw) in text.lines().enumerate() {
        if let Some((s, rest)) = header(raw) {
            section = Some(s);
            if !rest.is_empty() {
                bodies[SECTIONS.iter().position(|x| *x == s).expect("known")].push(rest.to_string());
            }
            continue;
        }
        match section {
            Some(s) => bodies[SECTIONS.iter().position(|x| *x == s).expect("known")].push(raw.trim().to_string()),
            None if raw.trim().is_empty() => {}
            None => {
                return Err(FormatError::new(format!(
                    "line {}: expected a section header (Title:, Description:, Usage: or Arguments:)",
                    i + 1
                )))
            }
        }
    }
    let join = |lines: &[String]| lines.join("\n").trim().to_string();
    page.title = join(&bodies[0]);
    page.description = join(&bodies[1]);
    page.usage = join(&bodies[2]);
    for (i, line) in bodies[3].iter().enumerate().filter(|(_, l)| !l.is_empty()) {
        let (arg, doc) = line
            .split_once(':')
            .ok_or_else(|| FormatError::new(format!("argument line {} needs the form 'name: text'", i + 1)))?;
        page.arguments.push((arg.trim().to_string(), doc.trim().to_string()));
    }
    if page.title.is_empty() {
        return Err(FormatError::new("manual page has no Title"));
    }
    Ok(page)
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("    {l}\n")).collect()
}

pub fn render_text(m: &ManualPage) -> String {
    let mut out = format!("{}: {}\n", m.name, m.title);
    if !m.description.is_empty() {
        out.push_str("\nDescription:\n");
        out.push_str(&indent(&m.description));
    }
    if !m.usage.is_empty() {
        out.push_str("\nUsage:\n");
        out.push_str(&indent(&m.usage));
    }
    if !m.arguments.is_empty() {
        out.push_str("\nArguments:\n");
        for (arg, doc) in &m.arguments {
            out.push_str(&format!("    {arg}: {doc}\n"));
        }
    }
    out
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_html(m: &ManualPage) -> String {
    let mut out = String::from("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    out.push_str(&format!("<title>{}</title>\n</head>\n<body>\n", html_escape(&m.name)));
    out.push_str(&format!("<h1>{}: {}</h1>\n", html_escape(&m.name), html_escape(&m.title)));
    if !m.description.is_empty() {
        out.push_str(&format!("<h2>Description</h2>\n<p>{}</p>\n", html_escape(&m.description)));
    }
    if !m.usage.is_empty() {
        out.push_str(&format!("<h2>Usage</h2>\n<pre>{}</pre>\n", html_escape(&m.usage)));
    }
    if !m.arguments.is_empty() {
        out.push_str("<h2>Arguments</h2>\n<dl>\n");
        for (arg, doc) in &m.arguments {
            out.push_str(&format!("<dt>{}</dt><dd>{}</dd>\n", html_escape(arg), html_escape(doc)));
        }
        out.push_str("</dl>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

pub fn render_json(m: &ManualPage) -> String {
    let args: serde_json::Map<String, serde_json::Value> = m
        .arguments
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    serde_json::json!({
        "name": m.name,
        "title": m.title,
        "description": m.description,
        "usage": m.usage,
        "arguments": args,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "Title: Least-squares fit\nDescription:\n  Fits y on x.\n  Errors when rank deficient.\nUsage: lsfit(x, y)\nArguments:\n  x: predictors\n  y: response\n";

    #[test]
    fn parses_sections() {
        let m = parse_manual("lsfit", SRC).unwrap();
        assert_eq!(m.title, "Least-squares fit");
        assert_eq!(m.description, "Fits y on x.\nErrors when rank deficient.");
        assert_eq!(m.usage, "lsfit(x, y)");
        assert_eq!(m.arguments, vec![("x".into(), "predictors".into()), ("y".into(), "response".into())]);
        assert!(parse_manual("f", "no header").is_err());
        assert!(parse_manual("f", "Usage: f()").is_err());
    }

    #[test]
    fn renders() {
        let m = parse_manual("lsfit", SRC).unwrap();
        let text = render_text(&m);
        assert!(text.starts_with("lsfit: Least-squares fit\n\nDescription:\n    Fits y on x.\n"));
        assert!(render_html(&m).contains("<dt>x</dt><dd>predictors</dd>"));
        let j: serde_json::Value = serde_json::from_str(&render_json(&m)).unwrap();
        assert_eq!(j["arguments"]["y"], "response");
    }
}
