//! Syntax tree and canonical deparser.
//!
//! Operators are ordinary calls whose callee is the operator name, so
//! `1 + 2` is `Call(Ident("+"), [1, 2])`.

use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub enum Literal {
    Number(f64),
    Str(String),
    Logical(bool),
    Na,
    Null,
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Literal::Number(a), Literal::Number(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
            (Literal::Str(a), Literal::Str(b)) => a == b,
            (Literal::Logical(a), Literal::Logical(b)) => a == b,
            (Literal::Na, Literal::Na) | (Literal::Null, Literal::Null) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arg {
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub default: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Ident(String),
    Call { callee: Box<Expr>, args: Vec<Arg> },
    Function { params: Vec<Param>, body: Box<Expr> },
    /// Only produced for top-level statements.
    Assign { name: String, value: Box<Expr> },
}

impl Expr {
    pub fn call(name: &str, args: Vec<Arg>) -> Expr {
        Expr::Call {
            callee: Box::new(Expr::Ident(name.to_string())),
            args,
        }
    }

    pub fn num(x: f64) -> Expr {
        Expr::Literal(Literal::Number(x))
    }
}

impl Arg {
    pub fn positional(value: Expr) -> Arg {
        Arg { name: None, value }
    }

    pub fn named(name: &str, value: Expr) -> Arg {
        Arg {
            name: Some(name.to_string()),
            value,
        }
    }
}

pub const BINARY_OPS: [&str; 11] = ["+", "-", "*", "/", "^", "<", ">", "<=", ">=", "==", "!="];

pub fn is_operator(name: &str) -> bool {
    BINARY_OPS.contains(&name)
}

/// Binding strength, loosest first.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub(crate) enum Prec {
    Function,
    Comparison,
    Additive,
    Multiplicative,
    Power,
    Unary,
    Postfix,
}

pub(crate) fn binary_prec(op: &str) -> Option<Prec> {
    Some(match op {
        "<" | ">" | "<=" | ">=" | "==" | "!=" => Prec::Comparison,
        "+" | "-" => Prec::Additive,
        "*" | "/" => Prec::Multiplicative,
        "^" => Prec::Power,
        _ => return None,
    })
}

enum Shape<'a> {
    Binary(&'a str, &'a Expr, &'a Expr),
    Negate(&'a Expr),
    Other,
}

fn shape(e: &Expr) -> Shape<'_> {
    if let Expr::Call { callee, args } = e {
        if let Expr::Ident(op) = callee.as_ref() {
            if args.iter().all(|a| a.name.is_none()) {
                if args.len() == 2 && is_operator(op) {
                    return Shape::Binary(op, &args[0].value, &args[1].value);
                }
                if args.len() == 1 && op == "-" {
                    return Shape::Negate(&args[0].value);
                }
            }
        }
    }
    Shape::Other
}

fn prec_of(e: &Expr) -> Prec {
    match shape(e) {
        Shape::Binary(op, _, _) => binary_prec(op).unwrap_or(Prec::Postfix),
        Shape::Negate(_) => Prec::Unary,
        Shape::Other => match e {
            Expr::Function { .. } | Expr::Assign { .. } => Prec::Function,
            _ => Prec::Postfix,
        },
    }
}

/// Formats a double so that parsing the text gives back the same bits
/// (modulo the sign of zero).
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor();
    if (-5.0..16.0).contains(&exp) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_literal(out: &mut String, lit: &Literal) {
    match lit {
        Literal::Number(x) => out.push_str(&format_number(*x)),
        Literal::Str(s) => out.push_str(&quote_string(s)),
        Literal::Logical(true) => out.push_str("TRUE"),
        Literal::Logical(false) => out.push_str("FALSE"),
        Literal::Na => out.push_str("NA"),
        Literal::Null => out.push_str("NULL"),
    }
}

fn write_child(out: &mut String, e: &Expr, paren: bool) {
    if paren {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_args(out: &mut String, args: &[Arg]) {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if let Some(n) = &a.name {
            let _ = write!(out, "{n} = ");
        }
        write_expr(out, &a.value);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match shape(e) {
        Shape::Binary(op, lhs, rhs) => {
            let p = binary_prec(op).unwrap_or(Prec::Postfix);
            let right_assoc = op == "^";
            let lp = prec_of(lhs);
            let rp = prec_of(rhs);
            write_child(out, lhs, if right_assoc { lp <= p } else { lp < p });
            if op == "^" {
                out.push('^');
            } else {
                let _ = write!(out, " {op} ");
            }
            write_child(out, rhs, if right_assoc { rp < p } else { rp <= p });
            return;
        }
        Shape::Negate(x) => {
            out.push('-');
            write_child(out, x, prec_of(x) < Prec::Unary);
            return;
        }
        Shape::Other => {}
    }
    match e {
        Expr::Literal(l) => write_literal(out, l),
        Expr::Ident(n) => out.push_str(n),
        Expr::Call { callee, args } => {
            let paren = !matches!(callee.as_ref(), Expr::Ident(_) | Expr::Call { .. })
                || prec_of(callee) < Prec::Postfix;
            write_child(out, callee, paren);
            out.push('(');
            write_args(out, args);
            out.push(')');
        }
        Expr::Function { params, body } => {
            out.push_str("function(");
            for (i, p) in params.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&p.name);
                if let Some(d) = &p.default {
                    out.push_str(" = ");
                    write_expr(out, d);
                }
            }
            out.push_str(") ");
            write_expr(out, body);
        }
        Expr::Assign { name, value } => {
            let _ = write!(out, "{name} <- ");
            write_expr(out, value);
        }
    }
}

/// Canonical single-line source text for an expression.
pub fn deparse(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}
