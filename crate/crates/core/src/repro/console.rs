//! Console transcripts: source lines prompted with `> ` (continuations
//! `+ `), each statement followed by the output it produced.

use crate::lang::{LangError, StatementOutput};

fn push_prompted(out: &mut String, source: &str) {
    for (i, line) in source.lines().enumerate() {
        out.push_str(if i == 0 { "> " } else { "+ " });
        out.push_str(line);
        out.push('\n');
    }
    if source.lines().next().is_none() {
        out.push_str(">\n");
    }
}

/// Builds the console text. A failed run ends with `Error: {message}`.
pub fn build_console(statements: &[StatementOutput], error: Option<&LangError>) -> String {
    let mut out = String::new();
    for st in statements {
        push_prompted(&mut out, &st.source);
        out.push_str(&st.output);
        if !st.output.is_empty() && !st.output.ends_with('\n') {
            out.push('\n');
        }
    }
    if let Some(e) = error {
        out.push_str(&format!("Error: {e}\n"));
    }
    out
}

/// The source lines of a console, prompts removed.
pub fn console_source_lines(console: &str) -> Vec<&str> {
    console
        .lines()
        .filter_map(|l| l.strip_prefix("> ").or_else(|| l.strip_prefix("+ ")))
        .collect()
}
