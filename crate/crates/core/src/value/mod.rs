//! The value model shared by the interpreter, the codecs and the store.
//!
//! Every element of a logical, number or string vector carries its own
//! missing flag (`None`), so `NA` is representable in all three element
//! types and is never confused with `NaN`, which is an ordinary float.

mod container;
pub(crate) mod key;
mod path;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::lang::ast::{Expr, Param};
use crate::lang::graphics::GraphicsRecording;

pub use container::{
    resolve_resource, Container, ContainerKind, ContainerMeta, ManualPage, NotFound, Resource, TextKind,
};
pub use key::{KeyError, KeyGenerator, SessionKey};
pub use path::{PathError, ResourcePath};

/// Name→value bindings. Ordered so listings and encodings are deterministic.
pub type Namespace = BTreeMap<String, Value>;

#[derive(Clone, Debug)]
pub enum Value {
    Null,
    Logical(Option<bool>),
    Number(Option<f64>),
    Str(Option<String>),
    Vector(Vector),
    List(NamedList),
    DataFrame(DataFrame),
    Function(Function),
    Graphic(Arc<GraphicsRecording>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElemKind {
    Logical,
    Number,
    Str,
}

impl ElemKind {
    pub fn name(self) -> &'static str {
        match self {
            ElemKind::Logical => "logical",
            ElemKind::Number => "numeric",
            ElemKind::Str => "character",
        }
    }
}

/// A homogeneous atomic vector.
#[derive(Clone, Debug)]
pub enum Vector {
    Logical(Vec<Option<bool>>),
    Number(Vec<Option<f64>>),
    Str(Vec<Option<String>>),
}

impl Vector {
    pub fn len(&self) -> usize {
        match self {
            Vector::Logical(v) => v.len(),
            Vector::Number(v) => v.len(),
            Vector::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ElemKind {
        match self {
            Vector::Logical(_) => ElemKind::Logical,
            Vector::Number(_) => ElemKind::Number,
            Vector::Str(_) => ElemKind::Str,
        }
    }

    pub fn empty(kind: ElemKind) -> Vector {
        match kind {
            ElemKind::Logical => Vector::Logical(Vec::new()),
            ElemKind::Number => Vector::Number(Vec::new()),
            ElemKind::Str => Vector::Str(Vec::new()),
        }
    }

    pub fn is_na(&self, i: usize) -> bool {
        match self {
            Vector::Logical(v) => v[i].is_none(),
            Vector::Number(v) => v[i].is_none(),
            Vector::Str(v) => v[i].is_none(),
        }
    }

    /// Element `i` as a scalar value.
    pub fn get(&self, i: usize) -> Value {
        match self {
            Vector::Logical(v) => Value::Logical(v[i]),
            Vector::Number(v) => Value::Number(v[i]),
            Vector::Str(v) => Value::Str(v[i].clone()),
        }
    }

    /// Elements at `indices`, in that order.
    pub fn select(&self, indices: impl Iterator<Item = usize>) -> Vector {
        match self {
            Vector::Logical(v) => Vector::Logical(indices.map(|i| v[i]).collect()),
            Vector::Number(v) => Vector::Number(indices.map(|i| v[i]).collect()),
            Vector::Str(v) => Vector::Str(indices.map(|i| v[i].clone()).collect()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValueError {
    #[error("names must be non-empty")]
    EmptyName,
    #[error("duplicate name '{0}'")]
    DuplicateName(String),
    #[error("column '{name}' has {len} rows, expected {expected}")]
    RaggedColumn {
        name: String,
        len: usize,
        expected: usize,
    },
}

fn check_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<(), ValueError> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if n.is_empty() {
            return Err(ValueError::EmptyName);
        }
        if !seen.insert(n) {
            return Err(ValueError::DuplicateName(n.to_string()));
        }
    }
    Ok(())
}

/// Ordered name→value pairs with unique, non-empty names.
#[derive(Clone, Debug, Default)]
pub struct NamedList(Vec<(String, Value)>);

impl NamedList {
    pub fn new(entries: Vec<(String, Value)>) -> Result<Self, ValueError> {
        check_names(entries.iter().map(|(n, _)| n.as_str()))?;
        Ok(NamedList(entries))
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.0
    }

    pub fn into_entries(self) -> Vec<(String, Value)> {
        self.0
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Named, equal-length columns.
#[derive(Clone, Debug, Default)]
pub struct DataFrame {
    columns: Vec<(String, Vector)>,
}

impl DataFrame {
    pub fn new(columns: Vec<(String, Vector)>) -> Result<Self, ValueError> {
        check_names(columns.iter().map(|(n, _)| n.as_str()))?;
        if let Some((_, first)) = columns.first() {
            let expected = first.len();
            for (name, col) in &columns {
                if col.len() != expected {
                    return Err(ValueError::RaggedColumn {
                        name: name.clone(),
                        len: col.len(),
                        expected,
                    });
                }
            }
        }
        Ok(DataFrame { columns })
    }

    pub fn columns(&self) -> &[(String, Vector)] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Vector> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn nrow(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn ncol(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    /// The first `n` rows (all rows when `n` exceeds the row count).
    pub fn head(&self, n: usize) -> DataFrame {
        let n = n.min(self.nrow());
        DataFrame {
            columns: self
                .columns
                .iter()
                .map(|(name, c)| (name.clone(), c.select(0..n)))
                .collect(),
        }
    }
}

/// Lexical environment of a closure.
///
/// `names` holds the bindings of the defining scope: the locals of an
/// enclosing closure call, or the namespace of the defining script or
/// package. A script's environment is sealed when the script finishes; until
/// then lookups fall through to the running script's namespace.
#[derive(Default)]
pub struct FnEnv {
    names: OnceLock<Namespace>,
    parent: Option<Arc<FnEnv>>,
    base: Option<Arc<Namespace>>,
}

impl FnEnv {
    pub fn new(parent: Option<Arc<FnEnv>>, base: Option<Arc<Namespace>>) -> Arc<Self> {
        Arc::new(FnEnv {
            names: OnceLock::new(),
            parent,
            base,
        })
    }

    /// An environment that is already sealed.
    pub fn sealed(names: Namespace, parent: Option<Arc<FnEnv>>, base: Option<Arc<Namespace>>) -> Arc<Self> {
        let env = FnEnv::new(parent, base);
        let _ = env.names.set(names);
        env
    }

    /// Seals the environment. A second call is ignored.
    pub fn seal(&self, names: Namespace) {
        let _ = self.names.set(names);
    }

    /// `None` while the defining script is still running.
    pub fn names(&self) -> Option<&Namespace> {
        self.names.get()
    }

    pub fn parent(&self) -> Option<&Arc<FnEnv>> {
        self.parent.as_ref()
    }

    /// Namespace of the container the defining script ran against.
    pub fn base(&self) -> Option<&Namespace> {
        self.base.as_deref()
    }
}

impl fmt::Debug for FnEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // The environment may contain the closure itself.
        f.debug_struct("FnEnv")
            .field("sealed", &self.names.get().is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct Closure {
    pub params: Vec<Param>,
    pub body: Arc<Expr>,
    pub env: Arc<FnEnv>,
}

#[derive(Clone, Debug)]
pub enum Function {
    Builtin(&'static str),
    Closure(Closure),
}

impl Value {
    pub fn number(x: f64) -> Value {
        Value::Number(Some(x))
    }

    pub fn string(s: impl Into<String>) -> Value {
        Value::Str(Some(s.into()))
    }

    pub fn numbers(xs: impl IntoIterator<Item = f64>) -> Value {
        Value::Vector(Vector::Number(xs.into_iter().map(Some).collect()))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "NULL",
            Value::Logical(_) => "logical",
            Value::Number(_) => "numeric",
            Value::Str(_) => "character",
            Value::Vector(v) => v.kind().name(),
            Value::List(_) => "list",
            Value::DataFrame(_) => "data.frame",
            Value::Function(_) => "function",
            Value::Graphic(_) => "graphic",
        }
    }

    pub fn is_function(&self) -> bool {
        matches!(self, Value::Function(_))
    }

    /// True when the value (or anything nested in it) is a function.
    pub fn contains_function(&self) -> bool {
        match self {
            Value::Function(_) => true,
            Value::List(l) => l.entries().iter().any(|(_, v)| v.contains_function()),
            _ => false,
        }
    }
}

fn num_eq(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x.is_nan() && y.is_nan()) || x == y,
        _ => false,
    }
}

fn vector_eq(a: &Vector, b: &Vector) -> bool {
    match (a, b) {
        (Vector::Logical(x), Vector::Logical(y)) => x == y,
        (Vector::Str(x), Vector::Str(y)) => x == y,
        (Vector::Number(x), Vector::Number(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| num_eq(*p, *q))
        }
        _ => false,
    }
}

/// Structural equality at the storage level.
///
/// `NA == NA` and `NaN == NaN` hold here (unlike the language's `==`),
/// `-0` equals `+0`, and functions compare by parameters and body.
pub fn deep_equals(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Logical(x), Value::Logical(y)) => x == y,
        (Value::Number(x), Value::Number(y)) => num_eq(*x, *y),
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Vector(x), Value::Vector(y)) => vector_eq(x, y),
        (Value::List(x), Value::List(y)) => {
            x.len() == y.len()
                && x
                    .entries()
                    .iter()
                    .zip(y.entries())
                    .all(|((n1, v1), (n2, v2))| n1 == n2 && deep_equals(v1, v2))
        }
        (Value::DataFrame(x), Value::DataFrame(y)) => {
            x.ncol() == y.ncol()
                && x
                    .columns()
                    .iter()
                    .zip(y.columns())
                    .all(|((n1, c1), (n2, c2))| n1 == n2 && vector_eq(c1, c2))
        }
        (Value::Function(x), Value::Function(y)) => match (x, y) {
            (Function::Builtin(p), Function::Builtin(q)) => p == q,
            (Function::Closure(p), Function::Closure(q)) => {
                p.params == q.params && p.body == q.body
            }
            _ => false,
        },
        (Value::Graphic(x), Value::Graphic(y)) => x == y,
        _ => false,
    }
}

/// `deep_equals` lifted to namespaces.
pub fn namespaces_equal(a: &Namespace, b: &Namespace) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|((n1, v1), (n2, v2))| n1 == n2 && deep_equals(v1, v2))
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        deep_equals(self, other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn df(cols: Vec<(&str, Vector)>) -> Value {
        Value::DataFrame(
            DataFrame::new(cols.into_iter().map(|(n, c)| (n.to_string(), c)).collect()).unwrap(),
        )
    }

    #[test]
    fn na_and_nan_are_distinct() {
        assert!(deep_equals(&Value::Number(None), &Value::Number(None)));
        assert!(!deep_equals(&Value::Number(None), &Value::number(f64::NAN)));
        assert!(deep_equals(&Value::number(f64::NAN), &Value::number(f64::NAN)));
        assert!(deep_equals(&Value::number(-0.0), &Value::number(0.0)));
        assert!(!deep_equals(&Value::Logical(None), &Value::Number(None)));
    }

    #[test]
    fn dataframes_compare_structurally() {
        let a = df(vec![("x", Vector::Number(vec![Some(1.0), Some(2.0)]))]);
        let b = df(vec![("x", Vector::Number(vec![Some(1.0), Some(2.0)]))]);
        let c = df(vec![("y", Vector::Number(vec![Some(1.0), Some(2.0)]))]);
        assert!(deep_equals(&a, &b));
        assert!(!deep_equals(&a, &c));
    }

    #[test]
    fn scalar_and_length_one_vector_differ() {
        let s = Value::number(1.0);
        let v = Value::numbers([1.0]);
        assert!(!deep_equals(&s, &v));
    }

    #[test]
    fn list_and_frame_invariants() {
        assert_eq!(
            NamedList::new(vec![("a".into(), Value::Null), ("a".into(), Value::Null)]).unwrap_err(),
            ValueError::DuplicateName("a".into())
        );
        assert_eq!(
            NamedList::new(vec![("".into(), Value::Null)]).unwrap_err(),
            ValueError::EmptyName
        );
        let err = DataFrame::new(vec![
            ("a".into(), Vector::Number(vec![Some(1.0)])),
            ("b".into(), Vector::Number(vec![])),
        ])
        .unwrap_err();
        assert!(matches!(err, ValueError::RaggedColumn { .. }));
    }
}
