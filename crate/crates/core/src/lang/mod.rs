//! The embedded language: lexer, parser, evaluator, builtins, seeded RNG
//! and the recording graphics device.

pub mod ast;
pub mod builtins;
mod context;
mod error;
mod eval;
pub mod graphics;
mod lexer;
mod parser;
mod plotting;
pub mod rng;
pub mod stats;

pub use ast::{deparse, Arg, Expr, Literal, Param};
pub use context::{Budget, EvalContext};
pub use error::{ErrorKind, LangError, LangResult, Location};
pub use eval::{
    call_function, eval_expr, run_script, CallArgs, ScriptError, ScriptOutcome, StatementOutput, MAX_CALL_DEPTH,
};
pub use graphics::{DrawCommand, GraphicsDevice, GraphicsRecording};
pub use parser::{parse, parse_program, parse_single, Statement};
pub use rng::Rng;
