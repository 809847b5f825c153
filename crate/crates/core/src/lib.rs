//! Prolog with algebraic effect handlers: reader, engine, elaboration into
//! delimited control, effect inference and a handler-aware optimizer.

pub mod bench;
pub mod effects;
pub mod elaborate;
pub mod engine;
pub mod optimize;
pub mod oracle;
pub mod pipeline;
pub mod program;
pub mod reader;
pub mod rewrite;
pub mod term;

pub use program::{Clause, HandlerSpec, OpClause, SourceProgram};
pub use reader::{parse, parse_query, print_clause, print_program, print_term, ParseError};
pub use term::{Functor, Substitution, Sym, Term, Var};
