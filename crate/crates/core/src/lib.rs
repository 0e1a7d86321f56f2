//! Compiler and inference toolkit for slic, a blockless probabilistic
//! language in the Stan tradition.
//!
//! The pipeline: parse a `.slic` model, infer an execution level for every
//! variable over the `data < model < genquant` lattice, then either
//! slice the program into a blocked form for HMC, marginalise finite
//! discrete parameters via variable elimination, or reparameterise
//! location-scale sites. A reference interpreter with forward-mode
//! derivatives backs the samplers and serves as the semantics oracle for
//! every transformation.

pub mod ast;
pub mod frontend;
pub mod runtime;

pub use ast::{Expr, Level, Program, Stmt, StmtKind};
pub use frontend::{parse, pretty, ParseError};
pub mod condind;
pub mod corpus;
pub mod data;
pub mod inference;
pub mod levels;
pub mod model;
pub mod reparam;
pub mod shred;
pub mod testgen;
pub use runtime::{Store, Value};
