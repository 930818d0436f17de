//! The object language: syntax, parsing, typing and small-step semantics.

pub mod ctx;
pub mod parse;
pub mod step;
pub mod subst;
pub mod syntax;
pub mod types;

pub use ctx::{decompose, fill, EvalCtx, Frame};
pub use parse::{parse_closed, parse_expr, parse_program, parse_type, ParseError, Program};
pub use step::{canonicalize, head_step, reducible, step, Config, State, StepOut, Tape};
pub use subst::{alpha_eq, free_vars, is_closed, subst, subst_expr};
pub use syntax::{BinOp, Binder, Expr, ExprRef, Name, Val};
pub use types::{check, typecheck, Type, TypeCtx, TypeError};
