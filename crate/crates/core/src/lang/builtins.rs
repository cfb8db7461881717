//! The builtin function catalog.
//!
//! Builtins receive evaluated arguments. Matching follows the closure rules:
//! named arguments bind by exact name, the remaining positional arguments
//! fill the unbound parameters in order. Variadic builtins collect every
//! positional argument, and any named one that is not a parameter, into
//! their `...`.

use std::borrow::Cow;
use std::cmp::Ordering;

use super::context::EvalContext;
use super::error::{LangError, LangResult};
use super::eval::CallArgs;
use super::plotting;
use super::stats::{self, Aggregate};
use crate::formats::csv;
use crate::formats::print::{as_character, print_value};
use crate::value::{DataFrame, ElemKind, NamedList, Value, Vector};

struct Sig {
    name: &'static str,
    params: &'static [&'static str],
    variadic: bool,
}

const fn sig(name: &'static str, params: &'static [&'static str]) -> Sig {
    Sig {
        name,
        params,
        variadic: false,
    }
}

const fn dots(name: &'static str, params: &'static [&'static str]) -> Sig {
    Sig {
        name,
        params,
        variadic: true,
    }
}

const AGG: &[&str] = &["x", "na_rm"];
const BINARY: &[&str] = &["e1", "e2"];

const CATALOG: &[Sig] = &[
    sig("+", BINARY),
    sig("-", BINARY),
    sig("*", BINARY),
    sig("/", BINARY),
    sig("^", BINARY),
    sig("<", BINARY),
    sig(">", BINARY),
    sig("<=", BINARY),
    sig(">=", BINARY),
    sig("==", BINARY),
    sig("!=", BINARY),
    dots("c", &[]),
    sig("length", &["x"]),
    sig("sum", AGG),
    sig("mean", AGG),
    sig("sd", AGG),
    sig("min", AGG),
    sig("max", AGG),
    sig("sort", &["x", "decreasing"]),
    sig("rev", &["x"]),
    sig("head", &["x", "n"]),
    sig("seq", &["from", "to", "by", "length_out"]),
    sig("rep", &["x", "times", "each"]),
    sig("names", &["x"]),
    sig("nrow", &["x"]),
    sig("ncol", &["x"]),
    dots("paste", &["sep"]),
    sig("print", &["x"]),
    sig("identity", &["x"]),
    sig("is_na", &["x"]),
    dots("data_frame", &[]),
    sig("read_csv", &["file"]),
    sig("write_csv", &["x", "file"]),
    sig("set_seed", &["seed"]),
    sig("rnorm", &["n", "mean", "sd"]),
    sig("runif", &["n", "min", "max"]),
    sig("lsfit", &["x", "y", "intercept"]),
    sig("plot", &["x", "y", "type", "main", "xlab", "ylab", "col"]),
    sig("hist", &["x", "breaks", "main", "xlab", "col"]),
    sig("title", &["main"]),
];

/// The canonical name of a builtin, if `name` is one.
pub fn lookup(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|s| s.name == name).map(|s| s.name)
}

/// Names of all builtins in catalog order.
pub fn names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|s| s.name)
}

/// Parameter names of a builtin, for documentation and listings.
pub fn params(name: &str) -> Option<(&'static [&'static str], bool)> {
    CATALOG.iter().find(|s| s.name == name).map(|s| (s.params, s.variadic))
}

pub(crate) struct Args {
    sig: &'static Sig,
    slots: Vec<Option<Value>>,
    dots: CallArgs,
}

impl Args {
    fn bind(sig: &'static Sig, args: CallArgs) -> LangResult<Args> {
        let mut slots: Vec<Option<Value>> = vec![None; sig.params.len()];
        let mut positional = Vec::new();
        let mut dots = Vec::new();
        for (name, v) in args {
            match name {
                Some(n) => match sig.params.iter().position(|p| *p == n) {
                    Some(i) => slots[i] = Some(v),
                    None if sig.variadic => dots.push((Some(n), v)),
                    None => return Err(LangError::eval(format!("unused argument '{n}'"))),
                },
                None if sig.variadic => dots.push((None, v)),
                None => positional.push(v),
            }
        }
        let mut positional = positional.into_iter();
        for slot in slots.iter_mut().filter(|s| s.is_none()) {
            match positional.next() {
                Some(v) => *slot = Some(v),
                None => break,
            }
        }
        if positional.next().is_some() {
            return Err(LangError::eval(format!(
                "too many arguments: {}() takes at most {}",
                sig.name,
                sig.params.len()
            )));
        }
        Ok(Args { sig, slots, dots })
    }

    fn opt(&mut self, param: &str) -> Option<Value> {
        let i = self.sig.params.iter().position(|p| *p == param).expect("known parameter");
        self.slots[i].take()
    }

    fn opt_non_null(&mut self, param: &str) -> Option<Value> {
        self.opt(param).filter(|v| !matches!(v, Value::Null))
    }

    fn req(&mut self, param: &str) -> LangResult<Value> {
        self.opt(param)
            .ok_or_else(|| LangError::eval(format!("argument '{param}' is missing, with no default")))
    }

    fn number_or(&mut self, param: &str, default: f64) -> LangResult<f64> {
        match self.opt(param) {
            Some(v) => scalar_number(&v, param),
            None => Ok(default),
        }
    }

    fn flag_or(&mut self, param: &str, default: bool) -> LangResult<bool> {
        match self.opt(param) {
            Some(v) => scalar_flag(&v, param),
            None => Ok(default),
        }
    }

    fn string_or(&mut self, param: &str, default: &str) -> LangResult<String> {
        match self.opt(param) {
            Some(v) => scalar_string(&v, param),
            None => Ok(default.to_string()),
        }
    }
}

// Coercion helpers.

/// Atomic view of a value: the elements and whether it was a scalar.
/// NULL is an empty logical vector.
pub(crate) fn atomic(v: &Value) -> Option<(Cow<'_, Vector>, bool)> {
    Some(match v {
        Value::Null => (Cow::Owned(Vector::Logical(Vec::new())), false),
        Value::Logical(x) => (Cow::Owned(Vector::Logical(vec![*x])), true),
        Value::Number(x) => (Cow::Owned(Vector::Number(vec![*x])), true),
        Value::Str(x) => (Cow::Owned(Vector::Str(vec![x.clone()])), true),
        Value::Vector(v) => (Cow::Borrowed(v), false),
        _ => return None,
    })
}

fn atomic_or_err<'a>(v: &'a Value, what: &str) -> LangResult<(Cow<'a, Vector>, bool)> {
    atomic(v).ok_or_else(|| LangError::eval(format!("'{what}' must be an atomic vector, not {}", v.type_name())))
}

fn logical_to_number(b: Option<bool>) -> Option<f64> {
    b.map(|b| if b { 1.0 } else { 0.0 })
}

/// Numeric elements of a logical or numeric value.
pub(crate) fn numbers<'a>(v: &'a Value, what: &str) -> LangResult<(Cow<'a, [Option<f64>]>, bool)> {
    let (vec, scalar) = atomic_or_err(v, what)?;
    let nums: Cow<'a, [Option<f64>]> = match vec {
        Cow::Borrowed(Vector::Number(x)) => Cow::Borrowed(x.as_slice()),
        Cow::Owned(Vector::Number(x)) => Cow::Owned(x),
        Cow::Borrowed(Vector::Logical(x)) => Cow::Owned(x.iter().map(|b| logical_to_number(*b)).collect()),
        Cow::Owned(Vector::Logical(x)) => Cow::Owned(x.into_iter().map(logical_to_number).collect()),
        Cow::Borrowed(Vector::Str(_)) | Cow::Owned(Vector::Str(_)) => {
            return Err(LangError::eval(format!("'{what}' must be numeric, not character")));
        }
    };
    Ok((nums, scalar))
}

fn strings(v: &Vector) -> Vec<Option<String>> {
    match v {
        Vector::Str(x) => x.clone(),
        Vector::Number(x) => x.iter().map(|n| n.map(as_character)).collect(),
        Vector::Logical(x) => x
            .iter()
            .map(|b| b.map(|b| if b { "TRUE".to_string() } else { "FALSE".to_string() }))
            .collect(),
    }
}

fn single<'a>(v: &'a Value, what: &str) -> LangResult<Cow<'a, Vector>> {
    let (vec, _) = atomic_or_err(v, what)?;
    if vec.len() != 1 {
        return Err(LangError::eval(format!("'{what}' must be a single value, got length {}", vec.len())));
    }
    Ok(vec)
}

pub(crate) fn scalar_number(v: &Value, what: &str) -> LangResult<f64> {
    let (nums, _) = numbers(v, what)?;
    match nums.as_ref() {
        [Some(x)] => Ok(*x),
        [None] => Err(LangError::eval(format!("'{what}' must not be NA"))),
        other => Err(LangError::eval(format!("'{what}' must be a single number, got length {}", other.len()))),
    }
}

fn scalar_flag(v: &Value, what: &str) -> LangResult<bool> {
    match single(v, what)?.as_ref() {
        Vector::Logical(x) => x[0].ok_or_else(|| LangError::eval(format!("'{what}' must not be NA"))),
        Vector::Number(x) => x[0]
            .map(|n| n != 0.0)
            .ok_or_else(|| LangError::eval(format!("'{what}' must not be NA"))),
        Vector::Str(_) => Err(LangError::eval(format!("'{what}' must be TRUE or FALSE"))),
    }
}

pub(crate) fn scalar_string(v: &Value, what: &str) -> LangResult<String> {
    match single(v, what)?.as_ref() {
        Vector::Str(x) => x[0].clone().ok_or_else(|| LangError::eval(format!("'{what}' must not be NA"))),
        _ => Err(LangError::eval(format!("'{what}' must be a string"))),
    }
}

/// A non-negative whole number usable as a count.
pub(crate) fn count(v: &Value, what: &str) -> LangResult<f64> {
    let x = scalar_number(v, what)?;
    if !(x >= 0.0) || x.fract() != 0.0 || !x.is_finite() {
        return Err(LangError::eval(format!("'{what}' must be a non-negative whole number, got {}", as_character(x))));
    }
    Ok(x)
}

fn wrap(vec: Vector, scalar: bool) -> Value {
    if scalar && vec.len() == 1 {
        vec.get(0)
    } else {
        Value::Vector(vec)
    }
}

// Element-wise operators.

fn recycled_len(a: usize, b: usize, ctx: &mut EvalContext, op: &str) -> usize {
    if a == 0 || b == 0 {
        return 0;
    }
    let n = a.max(b);
    if n % a.min(b) != 0 {
        ctx.warn(op, "longer object length is not a multiple of shorter object length");
    }
    n
}

fn arith(op: &'static str, a: &Value, b: &Value, ctx: &mut EvalContext) -> LangResult<Value> {
    let (x, sx) = numbers(a, "e1").map_err(|_| non_numeric(op))?;
    let (y, sy) = numbers(b, "e2").map_err(|_| non_numeric(op))?;
    let n = recycled_len(x.len(), y.len(), ctx, op);
    let f: fn(f64, f64) -> f64 = match op {
        "+" => |p, q| p + q,
        "-" => |p, q| p - q,
        "*" => |p, q| p * q,
        "/" => |p, q| p / q,
        _ => f64::powf,
    };
    let (x, y) = (x.as_ref(), y.as_ref());
    let out = ctx.map_checked(n, |i| match (x[i % x.len()], y[i % y.len()]) {
        (Some(p), Some(q)) => Some(f(p, q)),
        _ => None,
    })?;
    Ok(wrap(Vector::Number(out), sx && sy))
}

fn non_numeric(op: &str) -> LangError {
    LangError::eval(format!("non-numeric argument to binary operator '{op}'"))
}

fn compare(op: &'static str, a: &Value, b: &Value, ctx: &mut EvalContext) -> LangResult<Value> {
    let (va, sa) = atomic_or_err(a, "e1")?;
    let (vb, sb) = atomic_or_err(b, "e2")?;
    let n = recycled_len(va.len(), vb.len(), ctx, op);
    let test = move |o: Ordering| match op {
        "<" => o == Ordering::Less,
        ">" => o == Ordering::Greater,
        "<=" => o != Ordering::Greater,
        ">=" => o != Ordering::Less,
        "==" => o == Ordering::Equal,
        _ => o != Ordering::Equal,
    };
    let out = if va.kind() == ElemKind::Str || vb.kind() == ElemKind::Str {
        let (x, y) = (strings(&va), strings(&vb));
        ctx.map_checked(n, |i| match (&x[i % x.len()], &y[i % y.len()]) {
            (Some(p), Some(q)) => Some(test(p.cmp(q))),
            _ => None,
        })?
    } else {
        let (x, _) = numbers(a, "e1")?;
        let (y, _) = numbers(b, "e2")?;
        let (x, y) = (x.as_ref(), y.as_ref());
        ctx.map_checked(n, |i| match (x[i % x.len()], y[i % y.len()]) {
            (Some(p), Some(q)) => p.partial_cmp(&q).map(test),
            _ => None,
        })?
    };
    Ok(wrap(Vector::Logical(out), sa && sb))
}

fn negate(a: &Value, ctx: &mut EvalContext) -> LangResult<Value> {
    let (x, sx) = numbers(a, "e1").map_err(|_| LangError::eval("invalid argument to unary operator '-'"))?;
    let x = x.as_ref();
    let out = ctx.map_checked(x.len(), |i| x[i].map(|v| -v))?;
    Ok(wrap(Vector::Number(out), sx))
}

// Builtins proper.

fn combine(args: CallArgs, ctx: &mut EvalContext) -> LangResult<Value> {
    let mut parts = Vec::with_capacity(args.len());
    for (_, v) in &args {
        let (vec, _) = atomic(v).ok_or_else(|| {
            LangError::eval(format!("c() accepts only atomic values, got {}", v.type_name()))
        })?;
        parts.push(vec);
    }
    let total: usize = parts.iter().map(|p| p.len()).sum();
    ctx.budget.charge(total as u64)?;
    let kind = parts.iter().map(|p| p.kind()).max().unwrap_or(ElemKind::Logical);
    let out = match kind {
        ElemKind::Logical => Vector::Logical(
            parts
                .iter()
                .flat_map(|p| match p.as_ref() {
                    Vector::Logical(x) => x.clone(),
                    _ => Vec::new(),
                })
                .collect(),
        ),
        ElemKind::Number => {
            let mut out = Vec::with_capacity(total);
            for p in &parts {
                match p.as_ref() {
                    Vector::Number(x) => out.extend_from_slice(x),
                    Vector::Logical(x) => out.extend(x.iter().map(|b| logical_to_number(*b))),
                    Vector::Str(_) => {}
                }
            }
            Vector::Number(out)
        }
        ElemKind::Str => Vector::Str(parts.iter().flat_map(|p| strings(p)).collect()),
    };
    if args.is_empty() {
        return Ok(Value::Null);
    }
    Ok(Value::Vector(out))
}

fn length(v: &Value) -> usize {
    match v {
        Value::Null => 0,
        Value::Vector(v) => v.len(),
        Value::List(l) => l.len(),
        Value::DataFrame(df) => df.ncol(),
        _ => 1,
    }
}

fn aggregate(name: &'static str, mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let op = Aggregate::from_name(name).expect("aggregation builtin");
    let x = a.req("x")?;
    let na_rm = a.flag_or("na_rm", false)?;
    let (xs, _) = numbers(&x, "x")?;
    let r = stats::aggregate(op, &xs, na_rm);
    if let Some(w) = r.warning {
        ctx.warn(name, w);
    }
    Ok(Value::Number(r.value))
}

fn sort(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let x = a.req("x")?;
    let decreasing = a.flag_or("decreasing", false)?;
    let (v, _) = atomic_or_err(&x, "x")?;
    ctx.budget.charge(v.len() as u64)?;
    let out = match v.as_ref() {
        Vector::Number(xs) => {
            let mut vals: Vec<f64> = xs.iter().flatten().copied().filter(|x| !x.is_nan()).collect();
            let nans = xs.iter().flatten().filter(|x| x.is_nan()).count();
            vals.sort_by(|p, q| if decreasing { q.total_cmp(p) } else { p.total_cmp(q) });
            let mut out: Vec<Option<f64>> = vals.into_iter().map(|x| Some(if x == 0.0 { 0.0 } else { x })).collect();
            out.extend(std::iter::repeat_n(Some(f64::NAN), nans));
            Vector::Number(out)
        }
        Vector::Logical(xs) => {
            let mut vals: Vec<bool> = xs.iter().flatten().copied().collect();
            vals.sort_unstable();
            if decreasing {
                vals.reverse();
            }
            Vector::Logical(vals.into_iter().map(Some).collect())
        }
        Vector::Str(xs) => {
            let mut vals: Vec<String> = xs.iter().flatten().cloned().collect();
            vals.sort();
            if decreasing {
                vals.reverse();
            }
            Vector::Str(vals.into_iter().map(Some).collect())
        }
    };
    Ok(Value::Vector(out))
}

fn rev(x: Value, ctx: &mut EvalContext) -> LangResult<Value> {
    match x {
        Value::List(l) => {
            let mut e = l.into_entries();
            e.reverse();
            Ok(Value::List(NamedList::new(e).expect("names stay unique")))
        }
        other => {
            let (v, _) = atomic_or_err(&other, "x")?;
            ctx.budget.charge(v.len() as u64)?;
            Ok(Value::Vector(v.select((0..v.len()).rev())))
        }
    }
}

fn head_len(len: usize, n: f64) -> usize {
    if n >= 0.0 {
        (n as usize).min(len)
    } else {
        len.saturating_sub((-n) as usize)
    }
}

fn head(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let x = a.req("x")?;
    let n = a.number_or("n", 6.0)?;
    if n.fract() != 0.0 || !n.is_finite() {
        return Err(LangError::eval("'n' must be a whole number"));
    }
    match x {
        Value::DataFrame(df) => {
            let k = head_len(df.nrow(), n);
            ctx.budget.charge((k * df.ncol()) as u64)?;
            Ok(Value::DataFrame(df.head(k)))
        }
        Value::List(l) => {
            let k = head_len(l.len(), n);
            let e = l.into_entries().into_iter().take(k).collect();
            Ok(Value::List(NamedList::new(e).expect("subset of unique names")))
        }
        other => {
            let (v, scalar) = atomic_or_err(&other, "x")?;
            let k = head_len(v.len(), n);
            ctx.budget.charge(k as u64)?;
            if scalar && k == 1 {
                return Ok(other.clone());
            }
            Ok(Value::Vector(v.select(0..k)))
        }
    }
}

fn seq(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let from = a.opt_non_null("from");
    let to = a.opt_non_null("to");
    let by = a.opt_non_null("by");
    let length_out = a.opt_non_null("length_out");
    let num = |v: Option<Value>, what: &str| v.map(|v| scalar_number(&v, what)).transpose();
    let (mut from, mut to, by) = (num(from, "from")?, num(to, "to")?, num(by, "by")?);
    let length_out = length_out.map(|v| count(&v, "length_out")).transpose()?;
    if to.is_none() && by.is_none() && length_out.is_none() {
        to = Some(from.unwrap_or(1.0));
        from = Some(1.0);
    }
    let from = from.unwrap_or(1.0);
    let (by, n) = match (to, by, length_out) {
        (Some(to), by, None) => {
            let by = by.unwrap_or(if to >= from { 1.0 } else { -1.0 });
            if by == 0.0 && to != from {
                return Err(LangError::eval("'by' must not be zero"));
            }
            let steps = if to == from { 0.0 } else { (to - from) / by };
            if steps < 0.0 {
                return Err(LangError::eval("wrong sign in 'by' argument"));
            }
            (by, (steps + 1e-10).floor() + 1.0)
        }
        (Some(to), None, Some(n)) => {
            let by = if n > 1.0 { (to - from) / (n - 1.0) } else { 0.0 };
            (by, n)
        }
        (None, by, Some(n)) => (by.unwrap_or(1.0), n),
        (None, Some(_), None) => return Err(LangError::eval("seq() needs 'to' or 'length_out' with 'by'")),
        _ => return Err(LangError::eval("too many arguments: 'to', 'by' and 'length_out' together")),
    };
    if !n.is_finite() || !by.is_finite() || !from.is_finite() {
        return Err(LangError::eval("seq() arguments must be finite"));
    }
    ctx.budget.charge_f64(n)?;
    let out = ctx.map_checked(n as usize, |i| Some(from + i as f64 * by))?;
    Ok(Value::Vector(Vector::Number(out)))
}

fn rep(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let x = a.req("x")?;
    let times = match a.opt("times") {
        Some(v) => count(&v, "times")?,
        None => 1.0,
    };
    let each = match a.opt("each") {
        Some(v) => count(&v, "each")?,
        None => 1.0,
    };
    let (v, _) = atomic_or_err(&x, "x")?;
    let total = v.len() as f64 * times * each;
    ctx.budget.charge_f64(total)?;
    let len = v.len();
    let each = each as usize;
    let total = total as usize;
    // Cells were charged above; map_checked charges again, so use the raw path.
    let idx = |i: usize| (i / each) % len;
    let out = match v.as_ref() {
        Vector::Logical(x) => Vector::Logical(checked_map(ctx, total, |i| x[idx(i)])?),
        Vector::Number(x) => Vector::Number(checked_map(ctx, total, |i| x[idx(i)])?),
        Vector::Str(x) => Vector::Str(checked_map(ctx, total, |i| x[idx(i)].clone())?),
    };
    Ok(Value::Vector(out))
}

/// `map_checked` without charging; the caller already paid for the cells.
fn checked_map<T: Send>(ctx: &mut EvalContext, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> LangResult<Vec<T>> {
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        ctx.budget.check()?;
        let len = super::context::CHECK_BATCH.min(n - start);
        out.extend(crate::par::map_range(ctx.parallelism, len, |i| f(start + i)));
        start += len;
    }
    Ok(out)
}

fn names_of(x: &Value) -> Value {
    let names: Vec<Option<String>> = match x {
        Value::List(l) => l.entries().iter().map(|(n, _)| Some(n.clone())).collect(),
        Value::DataFrame(df) => df.names().map(|n| Some(n.to_string())).collect(),
        _ => return Value::Null,
    };
    Value::Vector(Vector::Str(names))
}

fn paste(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let sep = a.string_or("sep", " ")?;
    let mut parts = Vec::new();
    let mut all_scalar = true;
    for (name, v) in &a.dots {
        let what = name.as_deref().unwrap_or("...");
        let (vec, scalar) = atomic_or_err(v, what)?;
        all_scalar &= scalar;
        if !vec.is_empty() {
            let s: Vec<String> = strings(&vec).into_iter().map(|s| s.unwrap_or_else(|| "NA".into())).collect();
            parts.push(s);
        }
    }
    let n = parts.iter().map(Vec::len).max().unwrap_or(0);
    let out = ctx.map_checked(n, |i| {
        Some(
            parts
                .iter()
                .map(|p| p[i % p.len()].as_str())
                .collect::<Vec<_>>()
                .join(&sep),
        )
    })?;
    Ok(wrap(Vector::Str(out), all_scalar))
}

fn is_na(x: &Value, ctx: &mut EvalContext) -> LangResult<Value> {
    let (v, scalar) = atomic_or_err(x, "x")?;
    let out = ctx.map_checked(v.len(), |i| Some(v.is_na(i)))?;
    Ok(wrap(Vector::Logical(out), scalar))
}

fn data_frame(a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let mut cols = Vec::with_capacity(a.dots.len());
    for (name, v) in &a.dots {
        let name = name
            .clone()
            .ok_or_else(|| LangError::eval("all columns must be named (name = values)"))?;
        let (vec, _) = atomic(v)
            .ok_or_else(|| LangError::eval(format!("column '{name}' must be an atomic vector, not {}", v.type_name())))?;
        cols.push((name, vec.into_owned()));
    }
    let nrow = cols.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    ctx.budget.charge((nrow * cols.len()) as u64)?;
    let mut out = Vec::with_capacity(cols.len());
    for (name, col) in cols {
        let col = if col.len() == nrow {
            col
        } else if !col.is_empty() && nrow % col.len() == 0 {
            let len = col.len();
            col.select((0..nrow).map(|i| i % len))
        } else {
            return Err(LangError::eval(format!(
                "column '{name}' has {} rows, which does not divide {nrow}",
                col.len()
            )));
        };
        out.push((name, col));
    }
    DataFrame::new(out)
        .map(Value::DataFrame)
        .map_err(|e| LangError::eval(e.to_string()))
}

fn read_csv(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let file = a.req("file")?;
    let file = scalar_string(&file, "file")?;
    let bytes = ctx
        .workdir
        .get(&file)
        .ok_or_else(|| LangError::eval(format!("cannot open file '{file}': no such file")))?;
    let df = csv::read_csv(bytes).map_err(|e| LangError::eval(format!("{file}: {e}")))?;
    ctx.budget.charge((df.nrow() * df.ncol()) as u64)?;
    Ok(Value::DataFrame(df))
}

fn write_csv(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let x = a.req("x")?;
    let file = a.req("file")?;
    let file = scalar_string(&file, "file")?;
    check_workdir_name(&file)?;
    let Value::DataFrame(df) = &x else {
        return Err(LangError::eval(format!("'x' must be a data frame, not {}", x.type_name())));
    };
    let text = csv::write_csv(df);
    ctx.budget.charge(text.len() as u64 / 8 + 1)?;
    ctx.workdir.insert(file, text.into_bytes());
    ctx.visible = false;
    Ok(Value::Null)
}

fn check_workdir_name(name: &str) -> LangResult<()> {
    let ok = !name.is_empty()
        && !name.starts_with('/')
        && name.split('/').all(|s| !s.is_empty() && s != "." && s != "..");
    if ok {
        Ok(())
    } else {
        Err(LangError::eval(format!("invalid file name '{name}'")))
    }
}

fn set_seed(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let seed = a.req("seed")?;
    let seed = count(&seed, "seed")?;
    if seed >= 2f64.powi(64) {
        return Err(LangError::eval("'seed' is too large"));
    }
    ctx.rng = super::rng::Rng::seeded(seed as u64);
    ctx.visible = false;
    Ok(Value::Null)
}

fn random(name: &str, mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let n = a.req("n")?;
    let n = count(&n, "n")?;
    let (p, q) = if name == "rnorm" {
        (a.number_or("mean", 0.0)?, a.number_or("sd", 1.0)?)
    } else {
        (a.number_or("min", 0.0)?, a.number_or("max", 1.0)?)
    };
    ctx.budget.charge_f64(n)?;
    let n = n as usize;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        ctx.budget.check()?;
        let len = super::context::CHECK_BATCH.min(n - out.len());
        if name == "rnorm" {
            out.extend(ctx.rng.normals(len).into_iter().map(|z| Some(p + q * z)));
        } else {
            for _ in 0..len {
                let u = ctx.rng.uniform();
                out.push(Some(p + (q - p) * u));
            }
        }
    }
    Ok(Value::Vector(Vector::Number(out)))
}

fn finite_column(v: &Value, what: &str) -> LangResult<Vec<Option<f64>>> {
    let (x, _) = numbers(v, what)?;
    Ok(x.into_owned())
}

fn lsfit(mut a: Args, ctx: &mut EvalContext) -> LangResult<Value> {
    let x = a.req("x")?;
    let y = a.req("y")?;
    let intercept = a.flag_or("intercept", true)?;
    let columns: Vec<Vec<Option<f64>>> = match &x {
        Value::DataFrame(df) => df
            .columns()
            .iter()
            .map(|(n, c)| finite_column(&Value::Vector(c.clone()), n))
            .collect::<LangResult<_>>()?,
        Value::List(l) => l
            .entries()
            .iter()
            .map(|(n, v)| finite_column(v, n))
            .collect::<LangResult<_>>()?,
        other => vec![finite_column(other, "x")?],
    };
    let y = finite_column(&y, "y")?;
    if columns.iter().any(|c| c.len() != y.len()) {
        return Err(LangError::eval("'x' and 'y' must have the same number of observations"));
    }
    let keep: Vec<usize> = (0..y.len())
        .filter(|&r| y[r].is_some() && columns.iter().all(|c| c[r].is_some()))
        .collect();
    if keep.len() < y.len() {
        ctx.warn("lsfit", &format!("{} observations with missing values were dropped", y.len() - keep.len()));
    }
    let cols: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| keep.iter().map(|&r| c[r].expect("complete row")).collect())
        .collect();
    let ys: Vec<f64> = keep.iter().map(|&r| y[r].expect("complete row")).collect();
    ctx.budget.charge((ys.len() * (cols.len() + 2)) as u64)?;
    let (coef, resid) = stats::least_squares(&cols, &ys, intercept)?;
    let list = NamedList::new(vec![
        ("coefficients".into(), Value::numbers(coef)),
        ("residuals".into(), Value::numbers(resid)),
        ("intercept".into(), Value::Logical(Some(intercept))),
    ])
    .expect("fixed names");
    Ok(Value::List(list))
}

/// Runs builtin `name` on evaluated arguments.
pub fn call_builtin(name: &'static str, args: CallArgs, ctx: &mut EvalContext) -> LangResult<Value> {
    let sig = CATALOG
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| LangError::eval(format!("could not find function '{name}'")))?;
    if name == "-" && args.len() == 1 && args[0].0.is_none() {
        return negate(&args[0].1, ctx);
    }
    let mut a = Args::bind(sig, args)?;
    match name {
        "+" | "-" | "*" | "/" | "^" => {
            let (x, y) = (a.req("e1")?, a.req("e2")?);
            arith(name, &x, &y, ctx)
        }
        "<" | ">" | "<=" | ">=" | "==" | "!=" => {
            let (x, y) = (a.req("e1")?, a.req("e2")?);
            compare(name, &x, &y, ctx)
        }
        "c" => combine(a.dots, ctx),
        "length" => Ok(Value::number(length(&a.req("x")?) as f64)),
        "sum" | "mean" | "sd" | "min" | "max" => aggregate(name, a, ctx),
        "sort" => sort(a, ctx),
        "rev" => rev(a.req("x")?, ctx),
        "head" => head(a, ctx),
        "seq" => seq(a, ctx),
        "rep" => rep(a, ctx),
        "names" => Ok(names_of(&a.req("x")?)),
        "nrow" | "ncol" => match a.req("x")? {
            Value::DataFrame(df) => Ok(Value::number(if name == "nrow" { df.nrow() } else { df.ncol() } as f64)),
            _ => Ok(Value::Null),
        },
        "paste" => paste(a, ctx),
        "print" => {
            let x = a.req("x")?;
            ctx.stdout.push_str(&print_value(&x));
            ctx.stdout.push('\n');
            ctx.visible = false;
            Ok(x)
        }
        "identity" => a.req("x"),
        "is_na" => is_na(&a.req("x")?, ctx),
        "data_frame" => data_frame(a, ctx),
        "read_csv" => read_csv(a, ctx),
        "write_csv" => write_csv(a, ctx),
        "set_seed" => set_seed(a, ctx),
        "rnorm" | "runif" => random(name, a, ctx),
        "lsfit" => lsfit(a, ctx),
        "plot" => {
            let x = a.req("x")?;
            let y = a.opt_non_null("y");
            let kind = a.string_or("type", "p")?;
            let main = a.opt_non_null("main").map(|v| scalar_string(&v, "main")).transpose()?;
            let xlab = a.string_or("xlab", "")?;
            let ylab = a.string_or("ylab", "")?;
            let col = a.string_or("col", "black")?;
            plotting::plot(ctx, &x, y.as_ref(), &kind, main, &xlab, &ylab, &col)
        }
        "hist" => {
            let x = a.req("x")?;
            let breaks = a.opt_non_null("breaks");
            let main = a.string_or("main", "Histogram")?;
            let xlab = a.string_or("xlab", "")?;
            let col = a.string_or("col", "#d3d3d3")?;
            plotting::hist(ctx, &x, breaks.as_ref(), &main, &xlab, &col)
        }
        "title" => {
            let main = a.req("main")?;
            plotting::title(ctx, &scalar_string(&main, "main")?)
        }
        other => Err(LangError::eval(format!("could not find function '{other}'"))),
    }
}
