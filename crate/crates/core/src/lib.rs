pub mod arith_repr;
pub mod datasystem;
pub mod evaluator;
pub mod program;
pub mod session;
pub mod source;
pub mod term;
pub mod typecheck;
pub mod unify;
pub mod vocab;
