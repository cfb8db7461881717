//! Tree-walking evaluator.
//!
//! Arguments are evaluated eagerly, left to right. Inside a closure call,
//! names resolve through the call's locals, then the closure's defining
//! scopes, then the namespace of the container it was defined against, and
//! finally the builtins. At top level the running script's namespace comes
//! first, then the target container's namespace, then the builtins.

use std::sync::Arc;

use super::ast::{Expr, Literal};
use super::builtins;
use super::context::EvalContext;
use super::error::{LangError, LangResult};
use super::parser::parse_program;
use crate::formats::print::print_value;
use crate::value::{Closure, FnEnv, Function, Namespace, Value};

/// Nested closure calls allowed before evaluation is stopped. The language
/// has no conditionals, so any recursion is unbounded.
pub const MAX_CALL_DEPTH: usize = 200;

/// Evaluated call arguments in call order.
pub type CallArgs = Vec<(Option<String>, Value)>;

type Scope<'a> = Option<&'a Arc<FnEnv>>;

/// Evaluates one expression at top level.
pub fn eval_expr(e: &Expr, ctx: &mut EvalContext) -> LangResult<Value> {
    eval_in(e, ctx, None)
}

fn lookup(name: &str, ctx: &EvalContext, scope: Scope<'_>, want_fn: bool) -> Option<Value> {
    let ok = |v: &&Value| !want_fn || v.is_function();
    match scope {
        Some(env) => {
            let mut cur = Some(env);
            let mut base = None;
            while let Some(e) = cur {
                let ns = e.names().unwrap_or(&ctx.namespace);
                if let Some(v) = ns.get(name).filter(ok) {
                    return Some(v.clone());
                }
                if base.is_none() {
                    base = e.base();
                }
                cur = e.parent();
            }
            if let Some(v) = base.and_then(|b| b.get(name)).filter(ok) {
                return Some(v.clone());
            }
        }
        None => {
            if let Some(v) = ctx.namespace.get(name).filter(ok) {
                return Some(v.clone());
            }
            if let Some(v) = ctx.base.as_deref().and_then(|b| b.get(name)).filter(ok) {
                return Some(v.clone());
            }
        }
    }
    builtins::lookup(name).map(|b| Value::Function(Function::Builtin(b)))
}

fn literal(l: &Literal) -> Value {
    match l {
        Literal::Number(x) => Value::number(*x),
        Literal::Str(s) => Value::string(s.clone()),
        Literal::Logical(b) => Value::Logical(Some(*b)),
        Literal::Na => Value::Logical(None),
        Literal::Null => Value::Null,
    }
}

fn eval_in(e: &Expr, ctx: &mut EvalContext, scope: Scope<'_>) -> LangResult<Value> {
    match e {
        Expr::Literal(l) => {
            ctx.visible = true;
            Ok(literal(l))
        }
        Expr::Ident(name) => {
            ctx.visible = true;
            lookup(name, ctx, scope, false).ok_or_else(|| LangError::eval(format!("object '{name}' not found")))
        }
        Expr::Function { params, body } => {
            ctx.visible = true;
            let env = match scope {
                Some(env) => env.clone(),
                None => ctx.script_env(),
            };
            Ok(Value::Function(Function::Closure(Closure {
                params: params.clone(),
                body: Arc::new((**body).clone()),
                env,
            })))
        }
        Expr::Assign { name, value } => {
            let v = eval_in(value, ctx, scope)?;
            ctx.namespace.insert(name.clone(), v.clone());
            ctx.visible = false;
            Ok(v)
        }
        Expr::Call { callee, args } => {
            ctx.budget.check()?;
            let (f, label) = match callee.as_ref() {
                Expr::Ident(name) => {
                    let f = lookup(name, ctx, scope, true)
                        .ok_or_else(|| LangError::eval(format!("could not find function '{name}'")))?;
                    (f, name.clone())
                }
                other => (eval_in(other, ctx, scope)?, "<anonymous>".to_string()),
            };
            let mut values = Vec::with_capacity(args.len());
            for a in args {
                values.push((a.name.clone(), eval_in(&a.value, ctx, scope)?));
            }
            call_named(&f, &label, values, ctx)
        }
    }
}

/// Applies a function value to already evaluated arguments.
pub fn call_function(f: &Value, args: CallArgs, ctx: &mut EvalContext) -> LangResult<Value> {
    let label = match f {
        Value::Function(Function::Builtin(name)) => name.to_string(),
        _ => "<anonymous>".to_string(),
    };
    call_named(f, &label, args, ctx)
}

fn call_named(f: &Value, label: &str, args: CallArgs, ctx: &mut EvalContext) -> LangResult<Value> {
    ctx.budget.check()?;
    match f {
        Value::Function(Function::Builtin(name)) => {
            ctx.visible = true;
            builtins::call_builtin(name, args, ctx).map_err(|e| e.in_call(name))
        }
        Value::Function(Function::Closure(c)) => call_closure(c, label, args, ctx),
        other => Err(LangError::eval(format!(
            "attempt to apply non-function (a {} value)",
            other.type_name()
        ))),
    }
}

fn call_closure(c: &Closure, label: &str, args: CallArgs, ctx: &mut EvalContext) -> LangResult<Value> {
    if ctx.depth >= MAX_CALL_DEPTH {
        return Err(LangError::resource(format!(
            "call depth limit exceeded: more than {MAX_CALL_DEPTH} nested function calls"
        )));
    }
    let mut supplied: Vec<Option<Value>> = vec![None; c.params.len()];
    let mut positional = Vec::new();
    for (name, v) in args {
        match name {
            Some(n) => {
                let i = c
                    .params
                    .iter()
                    .position(|p| p.name == n)
                    .ok_or_else(|| LangError::eval(format!("unused argument '{n}' in call to {label}()")))?;
                supplied[i] = Some(v);
            }
            None => positional.push(v),
        }
    }
    let mut positional = positional.into_iter();
    for slot in supplied.iter_mut().filter(|s| s.is_none()) {
        match positional.next() {
            Some(v) => *slot = Some(v),
            None => break,
        }
    }
    if positional.next().is_some() {
        return Err(LangError::eval(format!("unused positional argument in call to {label}()")));
    }

    ctx.depth += 1;
    let result = (|| {
        let mut locals = Namespace::new();
        for (p, v) in c.params.iter().zip(&supplied) {
            if let Some(v) = v {
                locals.insert(p.name.clone(), v.clone());
            }
        }
        for (p, v) in c.params.iter().zip(&supplied) {
            if v.is_some() {
                continue;
            }
            let default = p.default.as_ref().ok_or_else(|| {
                LangError::eval(format!("argument '{}' is missing, with no default", p.name))
            })?;
            let env = FnEnv::sealed(locals.clone(), Some(c.env.clone()), None);
            let dv = eval_in(default, ctx, Some(&env))?;
            locals.insert(p.name.clone(), dv);
        }
        let frame = FnEnv::sealed(locals, Some(c.env.clone()), None);
        eval_in(&c.body, ctx, Some(&frame))
    })();
    ctx.depth -= 1;
    result
}

/// Output of one top-level statement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatementOutput {
    /// Source text of the statement.
    pub source: String,
    /// Everything the statement wrote to stdout, echo included.
    pub output: String,
}

#[derive(Clone, Debug)]
pub struct ScriptOutcome {
    /// Names assigned by the script, plus `.val` when the last statement is
    /// an expression.
    pub assigned: Namespace,
    pub transcript: Vec<StatementOutput>,
}

/// A failed script: the error plus the statements that ran before it
/// (the failing statement last, with whatever it printed).
#[derive(Clone, Debug)]
pub struct ScriptError {
    pub error: LangError,
    pub transcript: Vec<StatementOutput>,
}

impl From<LangError> for ScriptError {
    fn from(error: LangError) -> Self {
        ScriptError {
            error,
            transcript: Vec::new(),
        }
    }
}

/// Runs a script statement by statement. Visible values of non-assignment
/// statements are echoed to stdout. On error the namespace is left as it
/// was before the script started.
pub fn run_script(src: &str, ctx: &mut EvalContext) -> Result<ScriptOutcome, ScriptError> {
    let stmts = parse_program(src)?;
    let saved = ctx.namespace.clone();
    let mut assigned = Namespace::new();
    let mut transcript = Vec::with_capacity(stmts.len());
    let n = stmts.len();
    for (i, st) in stmts.iter().enumerate() {
        let before = ctx.stdout.len();
        let result = eval_expr(&st.expr, ctx);
        let value = match result {
            Ok(v) => v,
            Err(error) => {
                transcript.push(StatementOutput {
                    source: src[st.start..st.end].to_string(),
                    output: ctx.stdout[before..].to_string(),
                });
                ctx.namespace = saved;
                ctx.seal_script_env();
                return Err(ScriptError { error, transcript });
            }
        };
        match &st.expr {
            Expr::Assign { name, .. } => {
                assigned.insert(name.clone(), value);
            }
            _ => {
                if ctx.visible {
                    let text = print_value(&value);
                    ctx.stdout.push_str(&text);
                    ctx.stdout.push('\n');
                }
                if i + 1 == n {
                    ctx.namespace.insert(".val".to_string(), value.clone());
                    assigned.insert(".val".to_string(), value);
                }
            }
        }
        transcript.push(StatementOutput {
            source: src[st.start..st.end].to_string(),
            output: ctx.stdout[before..].to_string(),
        });
    }
    ctx.seal_script_env();
    Ok(ScriptOutcome { assigned, transcript })
}
