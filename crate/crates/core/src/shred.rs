//! Slices a level-typed program into single-level statement sequences
//! and emits a blocked, Stan-style program.
//!
//! Declarations are hoisted to the head of their level's block;
//! initialisers stay in place as assignments or `~` statements.
//! Conditionals and loops with mixed-level bodies are duplicated once
//! per level present, with the guard or bounds repeated verbatim.

use std::collections::HashSet;

use crate::ast::*;
use crate::frontend::pretty_stmts;
use crate::levels::TypedProgram;
use crate::runtime::{exec, Scalar, StmtMode, Store};

/// A program split into the classic block order. Concatenating the
/// blocks in order yields a program equivalent to the original.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockedProgram {
    /// Input data declarations (provided externally, never written).
    pub data: Vec<Stmt>,
    /// Data-level computed statements, with their declarations first.
    pub transformed_data: Vec<Stmt>,
    /// Continuous model-level parameter declarations.
    pub parameters: Vec<Stmt>,
    /// Model-level statements (density factors and local definitions).
    pub model: Vec<Stmt>,
    /// Generated quantities: ancestral draws and per-draw outputs.
    pub generated_quantities: Vec<Stmt>,
}

fn bare_decl(ty: &TypeDecl, name: &str, span: Span) -> Stmt {
    Stmt {
        kind: StmtKind::Decl {
            annotation: None,
            ty: ty.clone(),
            name: name.to_string(),
            init: None,
        },
        span,
    }
}

pub fn shred(typed: &TypedProgram) -> BlockedProgram {
    let program = &typed.program;
    let written: HashSet<String> = program.assigned_names().into_iter().collect();
    let params: HashSet<String> = typed.model_params().into_iter().collect();

    let mut blocked = BlockedProgram::default();
    let mut hoisted_td = Vec::new();
    let mut hoisted_model = Vec::new();
    let mut hoisted_gq = Vec::new();

    for stmt in &program.stmts {
        if let StmtKind::Decl { ty, name, annotation, .. } = &stmt.kind {
            let decl = bare_decl(ty, name, stmt.span);
            if *annotation == Some(Level::Data) && !written.contains(name) {
                blocked.data.push(decl);
            } else if params.contains(name) {
                blocked.parameters.push(decl);
            } else {
                match typed.level_of(name) {
                    Level::Data => hoisted_td.push(decl),
                    Level::Model => hoisted_model.push(decl),
                    Level::GenQuant => hoisted_gq.push(decl),
                }
            }
        }
    }

    blocked.transformed_data = hoisted_td;
    blocked
        .transformed_data
        .extend(project(typed, &program.stmts, Level::Data));
    blocked.model = hoisted_model;
    blocked.model.extend(project(typed, &program.stmts, Level::Model));
    blocked.generated_quantities = hoisted_gq;
    blocked
        .generated_quantities
        .extend(project(typed, &program.stmts, Level::GenQuant));
    blocked
}

/// Keeps only the statements of one level, rewriting initialised
/// declarations into plain assignments or `~` statements in place.
fn project(typed: &TypedProgram, stmts: &[Stmt], level: Level) -> Vec<Stmt> {
    let mut out = Vec::new();
    for stmt in stmts {
        match &stmt.kind {
            StmtKind::Decl { name, init, .. } => {
                let lowered = match init {
                    Some(DeclInit::Expr(e)) => Some(Stmt {
                        kind: StmtKind::Assign {
                            target: LValue::var(name.clone()),
                            value: e.clone(),
                        },
                        span: stmt.span,
                    }),
                    Some(DeclInit::Dist(d)) => Some(Stmt {
                        kind: StmtKind::Tilde {
                            target: LValue::var(name.clone()),
                            dist: d.clone(),
                        },
                        span: stmt.span,
                    }),
                    None => None,
                };
                if let Some(lowered) = lowered {
                    if typed.stmt_level(&lowered) == level {
                        out.push(lowered);
                    }
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let t = project(typed, then_branch, level);
                let e = project(typed, else_branch, level);
                if !t.is_empty() || !e.is_empty() {
                    out.push(Stmt {
                        kind: StmtKind::If {
                            cond: cond.clone(),
                            then_branch: t,
                            else_branch: e,
                        },
                        span: stmt.span,
                    });
                }
            }
            StmtKind::For { var, lo, hi, body } => {
                let b = project(typed, body, level);
                if !b.is_empty() {
                    out.push(Stmt {
                        kind: StmtKind::For {
                            var: var.clone(),
                            lo: lo.clone(),
                            hi: hi.clone(),
                            body: b,
                        },
                        span: stmt.span,
                    });
                }
            }
            _ => {
                if typed.stmt_level(stmt) == level {
                    out.push(stmt.clone());
                }
            }
        }
    }
    out
}

/// Emits the blocked textual form, omitting empty blocks.
pub fn emit(blocked: &BlockedProgram) -> String {
    let mut out = String::new();
    let mut block = |name: &str, stmts: &[Stmt]| {
        if stmts.is_empty() {
            return;
        }
        out.push_str(name);
        out.push_str(" {\n");
        out.push_str(&pretty_stmts(stmts, 1));
        out.push_str("}\n");
    };
    block("data", &blocked.data);
    block("transformed data", &blocked.transformed_data);
    block("parameters", &blocked.parameters);
    block("model", &blocked.model);
    block("generated quantities", &blocked.generated_quantities);
    out
}

impl BlockedProgram {
    /// Executes the blocks in order against a store that already binds
    /// the input data and the parameters. Returns the accumulated log
    /// target; generated quantities are drawn with the store's RNG.
    pub fn exec_all<T: Scalar>(
        &self,
        store: &mut Store<T>,
    ) -> Result<(), crate::runtime::RuntimeError> {
        exec(&self.data, store, StmtMode::Plain)?;
        exec(&self.transformed_data, store, StmtMode::Plain)?;
        exec(&self.parameters, store, StmtMode::Plain)?;
        exec(&self.model, store, StmtMode::Density)?;
        exec(&self.generated_quantities, store, StmtMode::Generative)?;
        Ok(())
    }
}

impl TypedProgram {
    /// Executes the original (unshredded) program with each statement in
    /// its level's mode: data statements plainly, model statements in
    /// density mode, generated quantities generatively.
    pub fn exec_mixed<T: Scalar>(
        &self,
        store: &mut Store<T>,
    ) -> Result<(), crate::runtime::RuntimeError> {
        let mode = |stmt: &Stmt| self.mode_of(stmt);
        crate::runtime::exec_with(&self.program.stmts, store, &mode)
    }
}
