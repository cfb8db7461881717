//! RFC 4180 CSV and configurable delimited text.
//!
//! Writing: a header of quoted column names, strings always quoted (inner
//! quotes doubled), numbers in shortest round-trip form, `TRUE`/`FALSE`
//! unquoted, NA as an empty unquoted field, LF line endings.
//!
//! Reading keeps track of which fields were quoted. A column is numeric when
//! every non-missing cell is unquoted and numeric, logical when every such
//! cell is an unquoted `TRUE`/`FALSE`, and character otherwise. Unquoted
//! empty fields and unquoted `NA` are missing; a quoted empty field is the
//! empty string.

use super::{FormatError, FormatResult};
use crate::lang::ast::format_number;
use crate::value::{DataFrame, Vector};

/// Delimiter settings for `tab` export.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delimited {
    pub sep: String,
    pub eol: String,
    pub dec: String,
}

impl Delimited {
    pub fn csv() -> Delimited {
        Delimited {
            sep: ",".into(),
            eol: "\n".into(),
            dec: ".".into(),
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn cell(col: &Vector, row: usize, dec: &str) -> String {
    match col {
        Vector::Logical(x) => match x[row] {
            Some(true) => "TRUE".into(),
            Some(false) => "FALSE".into(),
            None => String::new(),
        },
        Vector::Number(x) => match x[row] {
            Some(v) => {
                let s = format_number(v);
                if dec == "." {
                    s
                } else {
                    s.replace('.', dec)
                }
            }
            None => String::new(),
        },
        Vector::Str(x) => x[row].as_deref().map(quote).unwrap_or_default(),
    }
}

pub fn write_delimited(df: &DataFrame, opts: &Delimited) -> String {
    let mut out = String::new();
    let header: Vec<String> = df.names().map(quote).collect();
    out.push_str(&header.join(&opts.sep));
    out.push_str(&opts.eol);
    for r in 0..df.nrow() {
        let cells: Vec<String> = df.columns().iter().map(|(_, c)| cell(c, r, &opts.dec)).collect();
        out.push_str(&cells.join(&opts.sep));
        out.push_str(&opts.eol);
    }
    out
}

pub fn write_csv(df: &DataFrame) -> String {
    write_delimited(df, &Delimited::csv())
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Field {
    text: String,
    quoted: bool,
}

/// Splits CSV text into records of fields.
fn records(text: &str) -> FormatResult<Vec<Vec<Field>>> {
    let mut out = Vec::new();
    let mut record = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    loop {
        let mut field = Field {
            text: String::new(),
            quoted: false,
        };
        if chars.peek() == Some(&'"') {
            chars.next();
            field.quoted = true;
            loop {
                match chars.next() {
                    Some('"') if chars.peek() == Some(&'"') => {
                        chars.next();
                        field.text.push('"');
                    }
                    Some('"') => break,
                    Some(c) => {
                        if c == '\n' {
                            line += 1;
                        }
                        field.text.push(c);
                    }
                    None => return Err(FormatError::new(format!("unterminated quoted field on line {line}"))),
                }
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c == ',' || c == '\n' || c == '\r' {
                    break;
                }
                if c == '"' {
                    return Err(FormatError::new(format!("stray quote in unquoted field on line {line}")));
                }
                field.text.push(c);
                chars.next();
            }
        }
        record.push(field);
        match chars.next() {
            Some(',') => continue,
            Some('\r') => {
                if chars.next() != Some('\n') {
                    return Err(FormatError::new(format!("bare carriage return on line {line}")));
                }
            }
            Some('\n') => {}
            None => {
                let blank = record.len() == 1 && record[0].text.is_empty() && !record[0].quoted;
                if !blank {
                    out.push(record);
                }
                return Ok(out);
            }
            Some(c) => {
                return Err(FormatError::new(format!("unexpected '{c}' after quoted field on line {line}")));
            }
        }
        line += 1;
        out.push(std::mem::take(&mut record));
        if chars.peek().is_none() {
            return Ok(out);
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "NaN" => return Some(f64::NAN),
        "Inf" => return Some(f64::INFINITY),
        "-Inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let plausible = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
        && s.chars().any(|c| c.is_ascii_digit());
    if plausible {
        s.parse().ok()
    } else {
        None
    }
}

fn is_missing(f: &Field) -> bool {
    !f.quoted && (f.text.is_empty() || f.text == "NA")
}

fn column(cells: &[&Field]) -> Vector {
    let present = || cells.iter().filter(|f| !is_missing(f));
    if present().all(|f| !f.quoted && parse_number(&f.text).is_some()) && present().next().is_some() {
        return Vector::Number(
            cells
                .iter()
                .map(|f| if is_missing(f) { None } else { parse_number(&f.text) })
                .collect(),
        );
    }
    let is_bool = |f: &&&Field| !f.quoted && (f.text == "TRUE" || f.text == "FALSE");
    if present().all(|f| is_bool(&f)) {
        return Vector::Logical(
            cells
                .iter()
                .map(|f| if is_missing(f) { None } else { Some(f.text == "TRUE") })
                .collect(),
        );
    }
    Vector::Str(
        cells
            .iter()
            .map(|f| if is_missing(f) { None } else { Some(f.text.clone()) })
            .collect(),
    )
}

/// Parses CSV bytes with a header row into a data frame.
pub fn read_csv(bytes: &[u8]) -> FormatResult<DataFrame> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::new(format!("CSV is not valid UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut recs = records(text)?.into_iter();
    let Some(header) = recs.next() else {
        return Ok(DataFrame::default());
    };
    let names: Vec<String> = header.into_iter().map(|f| f.text).collect();
    let rows: Vec<Vec<Field>> = recs.collect();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != names.len() {
            return Err(FormatError::new(format!(
                "row {} has {} fields, expected {}",
                i + 1,
                r.len(),
                names.len()
            )));
        }
    }
    let cols = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let cells: Vec<&Field> = rows.iter().map(|r| &r[j]).collect();
            (name, column(&cells))
        })
        .collect();
    DataFrame::new(cols).map_err(|e| FormatError::new(format!("invalid CSV header: {e}")))
}
