use super::error::{LangError, LangResult};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    True,
    False,
    Na,
    NaN,
    Inf,
    Null,
    Function,
    Op(&'static str),
    Arrow,
    Equals,
    LParen,
    RParen,
    Comma,
    Semi,
    Newline,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'.'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'.' || c == b'_'
}

pub fn tokenize(src: &str) -> LangResult<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let column = src[line_start..i].chars().count() + 1;
        let start = i;
        let push = |out: &mut Vec<Token>, tok: Tok, end: usize| {
            out.push(Token {
                tok,
                start,
                end,
                line,
                column,
            })
        };
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'\n' => {
                push(&mut out, Tok::Newline, i + 1);
                i += 1;
                line += 1;
                line_start = i;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' => {
                let (s, end) = lex_string(src, i, line, column)?;
                push(&mut out, Tok::Str(s), end);
                i = end;
            }
            b'0'..=b'9' => {
                let end = lex_number_end(bytes, i);
                let text = &src[i..end];
                let x = text
                    .parse::<f64>()
                    .map_err(|_| LangError::parse(format!("malformed number '{text}'"), line, column))?;
                push(&mut out, Tok::Num(x), end);
                i = end;
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let end = lex_number_end(bytes, i);
                let text = &src[i..end];
                let x = text
                    .parse::<f64>()
                    .map_err(|_| LangError::parse(format!("malformed number '{text}'"), line, column))?;
                push(&mut out, Tok::Num(x), end);
                i = end;
            }
            c if is_ident_start(c) => {
                let mut end = i + 1;
                while end < bytes.len() && is_ident_char(bytes[end]) {
                    end += 1;
                }
                let tok = match &src[i..end] {
                    "TRUE" => Tok::True,
                    "FALSE" => Tok::False,
                    "NA" => Tok::Na,
                    "NaN" => Tok::NaN,
                    "Inf" => Tok::Inf,
                    "NULL" => Tok::Null,
                    "function" => Tok::Function,
                    id => Tok::Ident(id.to_string()),
                };
                push(&mut out, tok, end);
                i = end;
            }
            _ => {
                let two = bytes.get(i + 1).copied();
                let (tok, len) = match (c, two) {
                    (b'<', Some(b'-')) => (Tok::Arrow, 2),
                    (b'<', Some(b'=')) => (Tok::Op("<="), 2),
                    (b'>', Some(b'=')) => (Tok::Op(">="), 2),
                    (b'=', Some(b'=')) => (Tok::Op("=="), 2),
                    (b'!', Some(b'=')) => (Tok::Op("!="), 2),
                    (b'<', _) => (Tok::Op("<"), 1),
                    (b'>', _) => (Tok::Op(">"), 1),
                    (b'+', _) => (Tok::Op("+"), 1),
                    (b'-', _) => (Tok::Op("-"), 1),
                    (b'*', _) => (Tok::Op("*"), 1),
                    (b'/', _) => (Tok::Op("/"), 1),
                    (b'^', _) => (Tok::Op("^"), 1),
                    (b'=', _) => (Tok::Equals, 1),
                    (b'(', _) => (Tok::LParen, 1),
                    (b')', _) => (Tok::RParen, 1),
                    (b',', _) => (Tok::Comma, 1),
                    (b';', _) => (Tok::Semi, 1),
                    _ => {
                        let ch = src[i..].chars().next().unwrap_or('?');
                        return Err(LangError::parse(format!("unexpected character '{ch}'"), line, column));
                    }
                };
                push(&mut out, tok, i + len);
                i += len;
            }
        }
    }
    let column = src[line_start..].chars().count() + 1;
    out.push(Token {
        tok: Tok::Eof,
        start: src.len(),
        end: src.len(),
        line,
        column,
    });
    Ok(out)
}

fn lex_number_end(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

fn lex_string(src: &str, open: usize, line: usize, column: usize) -> LangResult<(String, usize)> {
    let mut out = String::new();
    let mut chars = src[open + 1..].char_indices();
    while let Some((off, c)) = chars.next() {
        match c {
            '"' => return Ok((out, open + 1 + off + 1)),
            '\\' => {
                let esc = chars
                    .next()
                    .ok_or_else(|| LangError::parse("unterminated string", line, column))?
                    .1;
                out.push(match esc {
                    'n' => '\n',
                    't' => '\t',
                    'r' => '\r',
                    '0' => '\0',
                    '\\' => '\\',
                    '"' => '"',
                    other => {
                        return Err(LangError::parse(format!("unknown escape '\\{other}'"), line, column));
                    }
                });
            }
            c => out.push(c),
        }
    }
    Err(LangError::parse("unterminated string", line, column))
}
