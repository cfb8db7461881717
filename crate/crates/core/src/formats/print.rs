//! R-style console rendering of values.
//!
//! Numbers in one vector share a format: either fixed notation with a
//! common number of decimals or scientific notation with a common mantissa
//! length, whichever is narrower, using up to 7 significant digits.

use crate::lang::ast::{deparse, Expr};
use crate::value::{DataFrame, Function, NamedList, Value, Vector};

const LINE_WIDTH: usize = 80;
/// Significant digits shown when printing.
pub const PRINT_DIGITS: usize = 7;
/// Significant digits used when numbers become strings.
pub const STRING_DIGITS: usize = 15;

/// Decimal significand digits (trailing zeros removed) and base-10 exponent
/// of `x` rounded to `digits` significant digits. `x` must be finite and
/// non-zero.
fn significand(x: f64, digits: usize) -> (String, i32) {
    let s = format!("{:.*e}", digits - 1, x.abs());
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0').to_string();
    let digits = if digits.is_empty() { "0".to_string() } else { digits };
    (digits, exp.parse().expect("integer exponent"))
}

#[derive(Clone, Copy, Debug)]
enum NumStyle {
    Fixed { decimals: usize },
    Sci { mantissa_digits: usize },
}

fn choose_style(xs: &[f64], digits: usize) -> NumStyle {
    let mut neg = false;
    let mut max_left = 1usize;
    let mut max_right = 0usize;
    let mut max_sig = 1usize;
    let mut max_exp_digits = 2usize;
    let mut any = false;
    for &x in xs {
        if !x.is_finite() {
            continue;
        }
        any = true;
        if x == 0.0 {
            continue;
        }
        neg |= x < 0.0;
        let (sig, e) = significand(x, digits);
        let nsig = sig.len();
        let left = if e >= 0 { e as usize + 1 } else { 1 };
        let right = (nsig as i64 - 1 - e as i64).max(0) as usize;
        max_left = max_left.max(left);
        max_right = max_right.max(right);
        max_sig = max_sig.max(nsig);
        max_exp_digits = max_exp_digits.max(e.unsigned_abs().to_string().len());
    }
    if !any {
        return NumStyle::Fixed { decimals: 0 };
    }
    let sign = usize::from(neg);
    let fixed_width = sign + max_left + if max_right > 0 { max_right + 1 } else { 0 };
    let sci_width = sign + if max_sig > 1 { max_sig + 1 } else { 1 } + 2 + max_exp_digits;
    if fixed_width <= sci_width {
        NumStyle::Fixed { decimals: max_right }
    } else {
        NumStyle::Sci {
            mantissa_digits: max_sig,
        }
    }
}

fn special(x: f64) -> Option<&'static str> {
    if x.is_nan() {
        Some("NaN")
    } else if x == f64::INFINITY {
        Some("Inf")
    } else if x == f64::NEG_INFINITY {
        Some("-Inf")
    } else {
        None
    }
}

fn render(x: f64, style: NumStyle) -> String {
    if let Some(s) = special(x) {
        return s.to_string();
    }
    let x = if x == 0.0 { 0.0 } else { x };
    match style {
        NumStyle::Fixed { decimals } => {
            let s = format!("{x:.decimals$}");
            // Rounding may produce "-0.0".
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
        NumStyle::Sci { mantissa_digits } => {
            let s = format!("{:.*e}", mantissa_digits - 1, x);
            let (mant, exp) = s.split_once('e').expect("exponent form");
            let e: i32 = exp.parse().expect("integer exponent");
            let sign = if e < 0 { '-' } else { '+' };
            format!("{mant}e{sign}{:02}", e.unsigned_abs())
        }
    }
}

/// Formats numbers with a shared style; `None` renders as `NA`.
pub fn format_numbers(xs: &[Option<f64>], digits: usize) -> Vec<String> {
    let finite: Vec<f64> = xs.iter().flatten().copied().collect();
    let style = choose_style(&finite, digits);
    xs.iter()
        .map(|x| x.map_or_else(|| "NA".to_string(), |x| render(x, style)))
        .collect()
}

/// One number on its own, as used for labels and string conversion.
pub fn format_number(x: f64, digits: usize) -> String {
    render(x, choose_style(&[x], digits))
}

/// Number to string conversion used by `paste` and `c`.
pub fn as_character(x: f64) -> String {
    format_number(x, STRING_DIGITS)
}

fn format_logicals(xs: &[Option<bool>]) -> Vec<String> {
    xs.iter()
        .map(|b| match b {
            Some(true) => "TRUE".into(),
            Some(false) => "FALSE".into(),
            None => "NA".into(),
        })
        .collect()
}

fn quote(s: &str) -> String {
    crate::lang::ast::quote_string(s)
}

fn width(s: &str) -> usize {
    s.chars().count()
}

fn pad_left(s: &str, w: usize) -> String {
    format!("{}{s}", " ".repeat(w.saturating_sub(width(s))))
}

fn pad_right(s: &str, w: usize) -> String {
    format!("{s}{}", " ".repeat(w.saturating_sub(width(s))))
}

fn print_vector(v: &Vector) -> String {
    if v.is_empty() {
        return format!("{}(0)", v.kind().name());
    }
    let (cells, left_align) = match v {
        Vector::Logical(x) => (format_logicals(x), false),
        Vector::Number(x) => (format_numbers(x, PRINT_DIGITS), false),
        Vector::Str(x) => (
            x.iter()
                .map(|s| s.as_deref().map_or_else(|| "NA".to_string(), quote))
                .collect(),
            true,
        ),
    };
    let w = cells.iter().map(|c| width(c)).max().unwrap_or(0);
    let label_w = format!("[{}]", cells.len()).len();
    let per_line = ((LINE_WIDTH.saturating_sub(label_w)) / (w + 1)).max(1);
    let mut lines = Vec::new();
    for (chunk_no, chunk) in cells.chunks(per_line).enumerate() {
        let mut line = pad_left(&format!("[{}]", chunk_no * per_line + 1), label_w);
        for c in chunk {
            line.push(' ');
            line.push_str(&if left_align { pad_right(c, w) } else { pad_left(c, w) });
        }
        lines.push(line.trim_end().to_string());
    }
    lines.join("\n")
}

fn frame_cells(col: &Vector) -> Vec<String> {
    match col {
        Vector::Logical(x) => format_logicals(x),
        Vector::Number(x) => format_numbers(x, PRINT_DIGITS),
        Vector::Str(x) => x
            .iter()
            .map(|s| s.clone().unwrap_or_else(|| "<NA>".to_string()))
            .collect(),
    }
}

fn print_frame(df: &DataFrame) -> String {
    if df.ncol() == 0 {
        return format!("data frame with 0 columns and {} rows", df.nrow());
    }
    if df.nrow() == 0 {
        let names: Vec<&str> = df.names().collect();
        return format!("[1] {}\n<0 rows>", names.join(" "));
    }
    let labels: Vec<String> = (1..=df.nrow()).map(|i| i.to_string()).collect();
    let label_w = labels.iter().map(|l| l.len()).max().unwrap_or(0);
    let cols: Vec<(String, Vec<String>, usize)> = df
        .columns()
        .iter()
        .map(|(name, col)| {
            let cells = frame_cells(col);
            let w = cells.iter().map(|c| width(c)).chain([width(name)]).max().unwrap_or(0);
            (name.clone(), cells, w)
        })
        .collect();
    let mut lines = Vec::with_capacity(df.nrow() + 1);
    let mut header = " ".repeat(label_w);
    for (name, _, w) in &cols {
        header.push(' ');
        header.push_str(&pad_left(name, *w));
    }
    lines.push(header);
    for (r, label) in labels.iter().enumerate() {
        let mut line = pad_right(label, label_w);
        for (_, cells, w) in &cols {
            line.push(' ');
            line.push_str(&pad_left(&cells[r], *w));
        }
        lines.push(line);
    }
    lines.join("\n")
}

fn print_list(l: &NamedList, prefix: &str) -> String {
    if l.is_empty() {
        return "list()".to_string();
    }
    let mut blocks = Vec::with_capacity(l.len());
    for (name, v) in l.entries() {
        let path = format!("{prefix}${name}");
        let body = match v {
            Value::List(inner) if !inner.is_empty() => print_list(inner, &path),
            other => print_value(other),
        };
        blocks.push(format!("{path}\n{body}\n"));
    }
    blocks.join("\n")
}

/// Renders a value the way the console echoes it, without a final newline.
pub fn print_value(v: &Value) -> String {
    match v {
        Value::Null => "NULL".to_string(),
        Value::Logical(x) => print_vector(&Vector::Logical(vec![*x])),
        Value::Number(x) => print_vector(&Vector::Number(vec![*x])),
        Value::Str(x) => print_vector(&Vector::Str(vec![x.clone()])),
        Value::Vector(v) => print_vector(v),
        Value::List(l) => print_list(l, "").trim_end_matches('\n').to_string(),
        Value::DataFrame(df) => print_frame(df),
        Value::Function(Function::Builtin(name)) => format!("<builtin function: {name}>"),
        Value::Function(Function::Closure(c)) => deparse(&Expr::Function {
            params: c.params.clone(),
            body: Box::new((*c.body).clone()),
        }),
        Value::Graphic(g) => format!("<graphics recording: {} commands>", g.commands.len()),
    }
}
