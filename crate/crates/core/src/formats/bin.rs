//! Tag-length-value binary encoding, little-endian, with magic `SGB1`.
//!
//! ```text
//! value  := tag payload
//! 0 null         (no payload)
//! 1 logical      u8: 0 false, 1 true, 2 NA
//! 2 number       u8 flag (0 present, 1 NA) then f64 when present
//! 3 string       u8 flag then u32 length + UTF-8 when present
//! 4 vector       u8 element tag (1..=3) + u32 count + elements
//! 5 list         u32 count + (u32 length + name + value)*
//! 6 data frame   u32 ncol + u32 nrow + (u32 length + name + element tag + nrow elements)*
//! 8 graphic      u32 length + JSON recording
//! ```
//!
//! Functions cannot be encoded. Decoding rejects unknown tags, truncation
//! and trailing bytes.

use std::sync::Arc;

use super::{json, FormatError, FormatResult};
use crate::value::{DataFrame, ElemKind, NamedList, Value, Vector};

pub const MAGIC: &[u8; 4] = b"SGB1";
const MAX_DEPTH: usize = 128;

const NULL: u8 = 0;
const LOGICAL: u8 = 1;
const NUMBER: u8 = 2;
const STRING: u8 = 3;
const VECTOR: u8 = 4;
const LIST: u8 = 5;
const FRAME: u8 = 6;
const GRAPHIC: u8 = 8;

fn put_len(out: &mut Vec<u8>, n: usize) -> FormatResult<()> {
    let n = u32::try_from(n).map_err(|_| FormatError::new("value too large to encode"))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
}

fn put_str(out: &mut Vec<u8>, s: &str) -> FormatResult<()> {
    put_len(out, s.len())?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_logical(out: &mut Vec<u8>, b: Option<bool>) {
    out.push(match b {
        Some(false) => 0,
        Some(true) => 1,
        None => 2,
    });
}

fn put_number(out: &mut Vec<u8>, x: Option<f64>) {
    match x {
        Some(v) => {
            out.push(0);
            out.extend_from_slice(&v.to_le_bytes());
        }
        None => out.push(1),
    }
}

fn put_string(out: &mut Vec<u8>, s: &Option<String>) -> FormatResult<()> {
    match s {
        Some(s) => {
            out.push(0);
            put_str(out, s)
        }
        None => {
            out.push(1);
            Ok(())
        }
    }
}

fn elem_tag(v: &Vector) -> u8 {
    match v.kind() {
        ElemKind::Logical => LOGICAL,
        ElemKind::Number => NUMBER,
        ElemKind::Str => STRING,
    }
}

fn put_elements(out: &mut Vec<u8>, v: &Vector) -> FormatResult<()> {
    match v {
        Vector::Logical(x) => x.iter().for_each(|b| put_logical(out, *b)),
        Vector::Number(x) => x.iter().for_each(|n| put_number(out, *n)),
        Vector::Str(x) => {
            for s in x {
                put_string(out, s)?;
            }
        }
    }
    Ok(())
}

fn put_value(out: &mut Vec<u8>, v: &Value) -> FormatResult<()> {
    match v {
        Value::Null => out.push(NULL),
        Value::Logical(b) => {
            out.push(LOGICAL);
            put_logical(out, *b);
        }
        Value::Number(x) => {
            out.push(NUMBER);
            put_number(out, *x);
        }
        Value::Str(s) => {
            out.push(STRING);
            put_string(out, s)?;
        }
        Value::Vector(vec) => {
            out.push(VECTOR);
            out.push(elem_tag(vec));
            put_len(out, vec.len())?;
            put_elements(out, vec)?;
        }
        Value::List(l) => {
            out.push(LIST);
            put_len(out, l.len())?;
            for (k, v) in l.entries() {
                put_str(out, k)?;
                put_value(out, v)?;
            }
        }
        Value::DataFrame(df) => {
            out.push(FRAME);
            put_len(out, df.ncol())?;
            put_len(out, df.nrow())?;
            for (name, col) in df.columns() {
                put_str(out, name)?;
                out.push(elem_tag(col));
                put_elements(out, col)?;
            }
        }
        Value::Function(_) => return Err(FormatError::new("functions cannot be encoded as bin")),
        Value::Graphic(g) => {
            out.push(GRAPHIC);
            let text = serde_json::to_vec(&**g).map_err(|e| FormatError::new(e.to_string()))?;
            put_len(out, text.len())?;
            out.extend_from_slice(&text);
        }
    }
    Ok(())
}

pub fn encode(v: &Value) -> FormatResult<Vec<u8>> {
    let mut out = MAGIC.to_vec();
    put_value(&mut out, v)?;
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> FormatResult<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::new(format!("truncated bin data at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> FormatResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> FormatResult<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    /// A count of items each at least `min_size` bytes long.
    fn count(&mut self, min_size: usize) -> FormatResult<usize> {
        let n = self.u32()?;
        if n.saturating_mul(min_size) > self.buf.len() - self.pos {
            return Err(FormatError::new(format!("bin count {n} exceeds the remaining data")));
        }
        Ok(n)
    }

    fn str(&mut self) -> FormatResult<String> {
        let n = self.count(1)?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| FormatError::new("invalid UTF-8 in bin string"))
    }

    fn logical(&mut self) -> FormatResult<Option<bool>> {
        match self.u8()? {
            0 => Ok(Some(false)),
            1 => Ok(Some(true)),
            2 => Ok(None),
            b => Err(FormatError::new(format!("invalid logical byte {b}"))),
        }
    }

    fn flag(&mut self) -> FormatResult<bool> {
        match self.u8()? {
            0 => Ok(true),
            1 => Ok(false),
            b => Err(FormatError::new(format!("invalid presence flag {b}"))),
        }
    }

    fn number(&mut self) -> FormatResult<Option<f64>> {
        if self.flag()? {
            Ok(Some(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"))))
        } else {
            Ok(None)
        }
    }

    fn string(&mut self) -> FormatResult<Option<String>> {
        if self.flag()? {
            self.str().map(Some)
        } else {
            Ok(None)
        }
    }

    fn elements(&mut self, tag: u8, n: usize) -> FormatResult<Vector> {
        Ok(match tag {
            LOGICAL => Vector::Logical((0..n).map(|_| self.logical()).collect::<FormatResult<_>>()?),
            NUMBER => Vector::Number((0..n).map(|_| self.number()).collect::<FormatResult<_>>()?),
            STRING => Vector::Str((0..n).map(|_| self.string()).collect::<FormatResult<_>>()?),
            t => return Err(FormatError::new(format!("unknown vector element tag {t}"))),
        })
    }

    fn value(&mut self, depth: usize) -> FormatResult<Value> {
        if depth > MAX_DEPTH {
            return Err(FormatError::new("bin data nested too deeply"));
        }
        let at = self.pos;
        Ok(match self.u8()? {
            NULL => Value::Null,
            LOGICAL => Value::Logical(self.logical()?),
            NUMBER => Value::Number(self.number()?),
            STRING => Value::Str(self.string()?),
            VECTOR => {
                let tag = self.u8()?;
                let n = self.count(1)?;
                Value::Vector(self.elements(tag, n)?)
            }
            LIST => {
                let n = self.count(5)?;
                let mut entries = Vec::with_capacity(n);
                for _ in 0..n {
                    let k = self.str()?;
                    entries.push((k, self.value(depth + 1)?));
                }
                Value::List(NamedList::new(entries).map_err(|e| FormatError::new(e.to_string()))?)
            }
            FRAME => {
                let ncol = self.count(5)?;
                let nrow = self.u32()?;
                let mut cols = Vec::with_capacity(ncol);
                for _ in 0..ncol {
                    let name = self.str()?;
                    let tag = self.u8()?;
                    if nrow > self.buf.len() - self.pos {
                        return Err(FormatError::new(format!("bin row count {nrow} exceeds the remaining data")));
                    }
                    cols.push((name, self.elements(tag, nrow)?));
                }
                if ncol == 0 && nrow != 0 {
                    return Err(FormatError::new("bin data frame without columns must have zero rows"));
                }
                Value::DataFrame(DataFrame::new(cols).map_err(|e| FormatError::new(e.to_string()))?)
            }
            GRAPHIC => {
                let n = self.count(1)?;
                Value::Graphic(Arc::new(json::recording_from_json(self.take(n)?)?))
            }
            t => return Err(FormatError::new(format!("unknown bin tag {t} at byte {at}"))),
        })
    }
}

pub fn decode(bytes: &[u8]) -> FormatResult<Value> {
    let body = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| FormatError::new("not bin data: missing SGB1 magic"))?;
    let mut r = Reader { buf: body, pos: 0 };
    let v = r.value(0)?;
    if r.pos != body.len() {
        return Err(FormatError::new(format!(
            "{} trailing bytes after bin value",
            body.len() - r.pos
        )));
    }
    Ok(v)
}
