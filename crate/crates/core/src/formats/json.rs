//! JSON export and import.
//!
//! Export: scalars become JSON scalars, vectors always become arrays, lists
//! become objects, data frames become arrays of row objects. NA is `null`;
//! NaN and the infinities are the strings `"NaN"`, `"Inf"` and `"-Inf"`.
//!
//! Import infers element types per array: any number makes a numeric vector
//! (with the special strings read back as numbers), booleans make a logical
//! vector, strings a character vector, and an array of only nulls (or an
//! empty array) a logical vector. Arrays of objects become data frames, as
//! do arrays of equal-length scalar arrays (columns `V1`, `V2`, ...).

use serde_json::{Map, Number, Value as Json};

use super::{FormatError, FormatResult};
use crate::lang::GraphicsRecording;
use crate::value::{DataFrame, NamedList, Value, Vector};

/// Numbers beyond this magnitude are not written as integers.
const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;
const MAX_DEPTH: usize = 128;

fn number(x: Option<f64>) -> Json {
    match x {
        None => Json::Null,
        Some(v) if v.is_nan() => Json::String("NaN".into()),
        Some(v) if v == f64::INFINITY => Json::String("Inf".into()),
        Some(v) if v == f64::NEG_INFINITY => Json::String("-Inf".into()),
        Some(v) if v.fract() == 0.0 && v.abs() < MAX_EXACT_INT => Json::Number(Number::from(v as i64)),
        Some(v) => Json::Number(Number::from_f64(v).expect("finite")),
    }
}

fn logical(b: Option<bool>) -> Json {
    b.map_or(Json::Null, Json::Bool)
}

fn string(s: &Option<String>) -> Json {
    s.as_ref().map_or(Json::Null, |s| Json::String(s.clone()))
}

fn element(v: &Vector, i: usize) -> Json {
    match v {
        Vector::Logical(x) => logical(x[i]),
        Vector::Number(x) => number(x[i]),
        Vector::Str(x) => string(&x[i]),
    }
}

/// Converts a value to a JSON tree.
pub fn to_json(v: &Value) -> FormatResult<Json> {
    Ok(match v {
        Value::Null => Json::Null,
        Value::Logical(b) => logical(*b),
        Value::Number(x) => number(*x),
        Value::Str(s) => string(s),
        Value::Vector(vec) => Json::Array((0..vec.len()).map(|i| element(vec, i)).collect()),
        Value::List(l) => {
            let mut m = Map::new();
            for (k, v) in l.entries() {
                m.insert(k.clone(), to_json(v)?);
            }
            Json::Object(m)
        }
        Value::DataFrame(df) => Json::Array(
            (0..df.nrow())
                .map(|r| {
                    let mut m = Map::new();
                    for (name, col) in df.columns() {
                        m.insert(name.clone(), element(col, r));
                    }
                    Json::Object(m)
                })
                .collect(),
        ),
        Value::Function(_) => return Err(FormatError::new("functions cannot be exported as json")),
        Value::Graphic(g) => serde_json::to_value(&**g).map_err(|e| FormatError::new(e.to_string()))?,
    })
}

pub fn export_json(v: &Value, pretty: bool) -> FormatResult<String> {
    let j = to_json(v)?;
    Ok(if pretty {
        serde_json::to_string_pretty(&j)
    } else {
        serde_json::to_string(&j)
    }
    .expect("JSON trees serialize"))
}

fn is_scalar(j: &Json) -> bool {
    !matches!(j, Json::Array(_) | Json::Object(_))
}

fn special(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "Inf" => Some(f64::INFINITY),
        "-Inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

/// Infers a vector from scalar JSON elements.
fn vector(items: &[&Json]) -> FormatResult<Vector> {
    let any_number = items.iter().any(|j| j.is_number());
    let any_bool = items.iter().any(|j| j.is_boolean());
    let any_string = items.iter().any(|j| j.is_string());
    if any_number {
        return items
            .iter()
            .map(|j| match j {
                Json::Null => Ok(None),
                Json::Number(n) => Ok(Some(n.as_f64().expect("JSON number"))),
                Json::String(s) => special(s)
                    .map(Some)
                    .ok_or_else(|| FormatError::new(format!("cannot mix string \"{s}\" into a numeric array"))),
                _ => Err(FormatError::new("cannot mix booleans and numbers in one array")),
            })
            .collect::<FormatResult<_>>()
            .map(Vector::Number);
    }
    if any_bool && any_string {
        return Err(FormatError::new("cannot mix booleans and strings in one array"));
    }
    if any_string {
        return Ok(Vector::Str(
            items
                .iter()
                .map(|j| j.as_str().map(str::to_string))
                .collect(),
        ));
    }
    Ok(Vector::Logical(items.iter().map(|j| j.as_bool()).collect()))
}

fn frame_from_rows(rows: &[Json]) -> FormatResult<DataFrame> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        for k in r.as_object().expect("checked object").keys() {
            if !names.contains(k) {
                names.push(k.clone());
            }
        }
    }
    let mut cols = Vec::with_capacity(names.len());
    for name in names {
        let cells: Vec<&Json> = rows
            .iter()
            .map(|r| r.as_object().expect("checked object").get(&name).unwrap_or(&Json::Null))
            .collect();
        if !cells.iter().all(|c| is_scalar(c)) {
            return Err(FormatError::new(format!("column '{name}' contains nested values")));
        }
        let col = vector(&cells).map_err(|e| FormatError::new(format!("column '{name}': {e}")))?;
        cols.push((name, col));
    }
    DataFrame::new(cols).map_err(|e| FormatError::new(e.to_string()))
}

fn frame_from_arrays(rows: &[Json]) -> FormatResult<DataFrame> {
    let k = rows[0].as_array().expect("checked array").len();
    let mut cols = Vec::with_capacity(k);
    for j in 0..k {
        let cells: Vec<&Json> = rows.iter().map(|r| &r.as_array().expect("checked array")[j]).collect();
        let col = vector(&cells).map_err(|e| FormatError::new(format!("column V{}: {e}", j + 1)))?;
        cols.push((format!("V{}", j + 1), col));
    }
    DataFrame::new(cols).map_err(|e| FormatError::new(e.to_string()))
}

fn from_json_at(j: &Json, depth: usize) -> FormatResult<Value> {
    if depth > MAX_DEPTH {
        return Err(FormatError::new("JSON nested too deeply"));
    }
    Ok(match j {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Logical(Some(*b)),
        Json::Number(n) => Value::number(n.as_f64().expect("JSON number")),
        Json::String(s) => Value::string(s.clone()),
        Json::Object(m) => {
            let entries = m
                .iter()
                .map(|(k, v)| Ok((k.clone(), from_json_at(v, depth + 1)?)))
                .collect::<FormatResult<Vec<_>>>()?;
            Value::List(NamedList::new(entries).map_err(|e| FormatError::new(e.to_string()))?)
        }
        Json::Array(items) => {
            if items.iter().all(is_scalar) {
                let refs: Vec<&Json> = items.iter().collect();
                Value::Vector(vector(&refs)?)
            } else if items.iter().all(Json::is_object) {
                Value::DataFrame(frame_from_rows(items)?)
            } else if items.iter().all(|r| r.as_array().is_some_and(|a| a.iter().all(is_scalar)))
                && items.iter().all(|r| r.as_array().map(Vec::len) == items[0].as_array().map(Vec::len))
            {
                Value::DataFrame(frame_from_arrays(items)?)
            } else {
                return Err(FormatError::new(
                    "unsupported JSON array: expected scalars, row objects or equal-length rows",
                ));
            }
        }
    })
}

/// Converts a JSON tree to a value.
pub fn from_json(j: &Json) -> FormatResult<Value> {
    from_json_at(j, 0)
}

pub fn import_json(text: &[u8]) -> FormatResult<Value> {
    let j: Json = serde_json::from_slice(text).map_err(|e| FormatError::new(format!("invalid JSON: {e}")))?;
    from_json(&j)
}

/// Parses a graphics recording from its JSON form.
pub fn recording_from_json(bytes: &[u8]) -> FormatResult<GraphicsRecording> {
    serde_json::from_slice(bytes).map_err(|e| FormatError::new(format!("invalid graphics recording: {e}")))
}

/// What `from_json(to_json(v))` is expected to give. JSON cannot tell
/// apart NULL and a scalar NA, an empty or all-NA vector of any type and a
/// logical one, or a data frame without rows and an empty vector; this maps
/// each such value to the form import produces.
pub fn json_widen(v: &Value) -> Value {
    match v {
        Value::Logical(None) | Value::Number(None) | Value::Str(None) => Value::Null,
        Value::Vector(vec) if (0..vec.len()).all(|i| vec.is_na(i)) => {
            Value::Vector(Vector::Logical(vec![None; vec.len()]))
        }
        Value::List(l) => Value::List(
            NamedList::new(l.entries().iter().map(|(k, v)| (k.clone(), json_widen(v))).collect())
                .expect("names unchanged"),
        ),
        Value::DataFrame(df) if df.nrow() == 0 => Value::Vector(Vector::Logical(Vec::new())),
        Value::DataFrame(df) => Value::DataFrame(
            DataFrame::new(
                df.columns()
                    .iter()
                    .map(|(n, c)| {
                        let c = if (0..c.len()).all(|i| c.is_na(i)) {
                            Vector::Logical(vec![None; c.len()])
                        } else {
                            c.clone()
                        };
                        (n.clone(), c)
                    })
                    .collect(),
            )
            .expect("shape unchanged"),
        ),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::deep_equals;

    #[test]
    fn vectors_export_as_arrays() {
        let v = Value::Vector(Vector::Number(vec![Some(1.0), Some(2.0), None]));
        assert_eq!(export_json(&v, false).unwrap(), "[1,2,null]");
        let v = Value::Vector(Vector::Number(vec![Some(f64::NAN), Some(f64::INFINITY), Some(0.5)]));
        assert_eq!(export_json(&v, false).unwrap(), "[\"NaN\",\"Inf\",0.5]");
        assert_eq!(export_json(&Value::number(3.0), false).unwrap(), "3");
    }

    #[test]
    fn body_fields_import_as_data() {
        let v = import_json(br#"{"x":[1,2,3],"y":{"a":true}}"#).unwrap();
        let Value::List(l) = v else { panic!() };
        assert_eq!(l.get("x"), Some(&Value::numbers([1.0, 2.0, 3.0])));
        let Some(Value::List(y)) = l.get("y") else { panic!() };
        assert_eq!(y.get("a"), Some(&Value::Logical(Some(true))));
    }

    #[test]
    fn special_strings_return_as_numbers() {
        let v = import_json(br#"[1, "NaN", "-Inf", null]"#).unwrap();
        let Value::Vector(Vector::Number(x)) = v else { panic!() };
        assert!(x[1].unwrap().is_nan());
        assert_eq!(x[2], Some(f64::NEG_INFINITY));
        assert_eq!(x[3], None);
        let v = import_json(br#"["NaN", "a"]"#).unwrap();
        assert!(matches!(v, Value::Vector(Vector::Str(_))));
    }

    #[test]
    fn frames_round_trip_row_wise() {
        let df = Value::DataFrame(
            DataFrame::new(vec![
                ("x".into(), Vector::Number(vec![Some(1.0), None])),
                ("y".into(), Vector::Str(vec![Some("a".into()), Some("b".into())])),
            ])
            .unwrap(),
        );
        let text = export_json(&df, false).unwrap();
        assert_eq!(text, r#"[{"x":1,"y":"a"},{"x":null,"y":"b"}]"#);
        assert!(deep_equals(&import_json(text.as_bytes()).unwrap(), &df));
    }

    #[test]
    fn row_arrays_become_v_columns() {
        let v = import_json(b"[[1,2],[2,4],[3,6]]").unwrap();
        let Value::DataFrame(df) = v else { panic!() };
        assert_eq!(df.names().collect::<Vec<_>>(), ["V1", "V2"]);
        assert_eq!(df.column("V2").unwrap().get(2), Value::Number(Some(6.0)));
        assert!(import_json(b"[[1,2],[3]]").is_err());
        assert!(import_json(b"[1, true]").is_err());
    }

    #[test]
    fn functions_are_not_json() {
        assert!(to_json(&Value::Function(crate::value::Function::Builtin("c"))).is_err());
    }
}
