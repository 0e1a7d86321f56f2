//! Level analysis over the `data < model < genquant` lattice.
//!
//! Every declared variable receives a level. Information flows only
//! upward: a statement may read variables at or below its own level.
//! Levels are inferred by a two-phase solver: a least fixed point in
//! flow order, followed by demotion to `genquant` of every variable that
//! no model-level density factor transitively reads. Cost order is
//! `data(0) < genquant(1) < model(2)`: data runs once, generated
//! quantities once per draw, model code once per leapfrog step.
//!
//! A well-levelled program must also be a shreddable sequence: once a
//! variable has been read by a statement of a strictly higher level it
//! becomes immutable. Violations are repaired, when possible, by
//! promoting the written variable to the next-cheapest feasible level.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::ast::*;
use crate::frontend::{resolve, SymbolTable};
use crate::runtime::StmtMode;

#[derive(Debug, Clone, Error)]
pub enum TypeError {
    #[error("level conflict: {message}")]
    Unsatisfiable {
        message: String,
        chain: Vec<String>,
        span: Span,
    },
    #[error("`{name}` becomes immutable once it is read at a higher level: {message}")]
    Immutability {
        name: String,
        message: String,
        read_span: Span,
        write_span: Span,
    },
    #[error(transparent)]
    Front(#[from] crate::frontend::ParseError),
}

impl TypeError {
    pub fn span(&self) -> Span {
        match self {
            TypeError::Unsatisfiable { span, .. } => *span,
            TypeError::Immutability { write_span, .. } => *write_span,
            TypeError::Front(e) => e.span(),
        }
    }
}

/// A single inequality over the level lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelConstraint {
    /// `level(lo) <= level(hi)`; `lo` is read where `hi` is computed.
    VarLeVar { lo: String, hi: String, span: Span },
    /// `c <= level(var)`.
    ConstLeVar { lo: Level, var: String, span: Span },
    /// `level(var) <= c`.
    VarLeConst { var: String, hi: Level, span: Span },
    /// Annotation pins `var` to exactly `level`.
    Fixed { var: String, level: Level, span: Span },
}

/// Output of constraint generation.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub constraints: Vec<LevelConstraint>,
    /// Declared variable names, in declaration order.
    pub vars: Vec<String>,
}

/// Demotion preferences for the solver: variables a model-level factor
/// transitively reads may not be placed at `genquant`.
#[derive(Debug, Clone, Default)]
pub struct Preferences {
    pub genquant_ineligible: HashSet<String>,
}

/// A program with one inferred level per declared variable.
#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: Program,
    pub levels: HashMap<String, Level>,
}

impl TypedProgram {
    pub fn level_of(&self, name: &str) -> Level {
        self.levels.get(name).copied().unwrap_or(Level::Data)
    }

    /// Levels in declaration order, the order `check` prints them.
    pub fn ordered_levels(&self) -> Vec<(String, Level)> {
        self.program
            .decls()
            .map(|(n, _, _, _)| (n.to_string(), self.level_of(n)))
            .collect()
    }

    /// The level a leaf statement executes at.
    pub fn stmt_level(&self, stmt: &Stmt) -> Level {
        match &stmt.kind {
            StmtKind::Decl { name, .. } => self.level_of(name),
            StmtKind::Assign { target, .. } => self.level_of(&target.name),
            StmtKind::Tilde { target, .. } => {
                if self.is_observed(&target.name) {
                    Level::Model
                } else {
                    self.level_of(&target.name)
                }
            }
            StmtKind::TargetPlus { .. } => Level::Model,
            StmtKind::If { .. } | StmtKind::For { .. } => {
                unreachable!("containers have no single level")
            }
        }
    }

    /// Execution mode for a leaf statement, by level.
    pub fn mode_of(&self, stmt: &Stmt) -> StmtMode {
        match self.stmt_level(stmt) {
            Level::Data => StmtMode::Plain,
            Level::Model => StmtMode::Density,
            Level::GenQuant => StmtMode::Generative,
        }
    }

    pub fn is_observed(&self, name: &str) -> bool {
        matches!(
            self.program.decl_of(name),
            Some((_, Some(Level::Data)))
        )
    }

    /// Model-level parameters: sampled, never deterministically written.
    pub fn model_params(&self) -> Vec<String> {
        let sampled = self.program.sampled_names();
        let assigned = self.program.assigned_names();
        self.program
            .decls()
            .filter(|(n, _, ann, _)| {
                *ann != Some(Level::Data)
                    && self.level_of(n) == Level::Model
                    && sampled.iter().any(|s| s == n)
                    && !assigned.iter().any(|a| a == n)
            })
            .map(|(n, _, _, _)| n.to_string())
            .collect()
    }

    /// Model parameters with int base type (must be eliminated before HMC).
    pub fn discrete_model_params(&self) -> Vec<String> {
        self.model_params()
            .into_iter()
            .filter(|n| {
                self.program
                    .decl_of(n)
                    .map(|(ty, _)| ty.base == BaseType::Int)
                    .unwrap_or(false)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// constraint generation

struct Reads {
    vars: Vec<String>,
}

impl Reads {
    fn new() -> Self {
        Reads { vars: Vec::new() }
    }

    fn add_expr(&mut self, e: &Expr, loops: &[(String, Vec<String>)]) {
        let mut raw = Vec::new();
        e.free_vars(&mut raw);
        for v in raw {
            self.add_var(v, loops);
        }
    }

    fn add_var(&mut self, v: String, loops: &[(String, Vec<String>)]) {
        if let Some((_, bound_vars)) = loops.iter().find(|(n, _)| *n == v) {
            for b in bound_vars {
                if !self.vars.contains(b) {
                    self.vars.push(b.clone());
                }
            }
        } else if !self.vars.contains(&v) {
            self.vars.push(v);
        }
    }
}

/// Reads performed by a leaf statement: RHS expressions, distribution
/// arguments, and index expressions. A `~` also reads its target.
fn stmt_reads(stmt: &Stmt, loops: &[(String, Vec<String>)]) -> Vec<String> {
    let mut reads = Reads::new();
    match &stmt.kind {
        StmtKind::Decl { ty, name, init, .. } => {
            for d in &ty.dims {
                reads.add_expr(d, loops);
            }
            match init {
                Some(DeclInit::Expr(e)) => reads.add_expr(e, loops),
                Some(DeclInit::Dist(d)) => {
                    // the prior factor reads the declared variable itself
                    reads.add_var(name.clone(), loops);
                    for a in &d.args {
                        reads.add_expr(a, loops);
                    }
                }
                None => {}
            }
        }
        StmtKind::Assign { target, value } => {
            for ix in &target.indices {
                reads.add_expr(ix, loops);
            }
            reads.add_expr(value, loops);
        }
        StmtKind::Tilde { target, dist } => {
            reads.add_var(target.name.clone(), loops);
            for ix in &target.indices {
                reads.add_expr(ix, loops);
            }
            for a in &dist.args {
                reads.add_expr(a, loops);
            }
        }
        StmtKind::TargetPlus { value } => reads.add_expr(value, loops),
        StmtKind::If { .. } | StmtKind::For { .. } => unreachable!(),
    }
    reads.vars
}

pub fn collect_constraints(program: &Program) -> Result<ConstraintSet, TypeError> {
    let table = resolve(program)?;
    let mut set = ConstraintSet {
        constraints: Vec::new(),
        vars: table.vars.iter().map(|v| v.name.clone()).collect(),
    };
    for info in &table.vars {
        if let Some(level) = info.annotation {
            set.constraints.push(LevelConstraint::Fixed {
                var: info.name.clone(),
                level,
                span: program.stmts[info.decl_index].span,
            });
        }
    }
    let mut loops: Vec<(String, Vec<String>)> = Vec::new();
    let mut guards: Vec<String> = Vec::new();
    collect_stmts(program, &table, &program.stmts, &mut loops, &mut guards, &mut set);
    Ok(set)
}

fn collect_stmts(
    program: &Program,
    table: &SymbolTable,
    stmts: &[Stmt],
    loops: &mut Vec<(String, Vec<String>)>,
    guards: &mut Vec<String>,
    set: &mut ConstraintSet,
) {
    for stmt in stmts {
        match &stmt.kind {
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let mut reads = Reads::new();
                reads.add_expr(cond, loops);
                let n = reads.vars.len();
                guards.extend(reads.vars);
                collect_stmts(program, table, then_branch, loops, guards, set);
                collect_stmts(program, table, else_branch, loops, guards, set);
                guards.truncate(guards.len() - n);
            }
            StmtKind::For { var, lo, hi, body } => {
                let mut reads = Reads::new();
                reads.add_expr(lo, loops);
                reads.add_expr(hi, loops);
                let bound_vars = reads.vars.clone();
                let n = bound_vars.len();
                guards.extend(bound_vars.clone());
                loops.push((var.clone(), bound_vars));
                collect_stmts(program, table, body, loops, guards, set);
                loops.pop();
                guards.truncate(guards.len() - n);
            }
            _ => {
                let span = stmt.span;
                let mut reads = stmt_reads(stmt, loops);
                for g in guards.iter() {
                    if !reads.contains(g) {
                        reads.push(g.clone());
                    }
                }
                // the level the statement executes at
                enum At {
                    Var(String),
                    Const(Level),
                }
                let at = match &stmt.kind {
                    StmtKind::TargetPlus { .. } => At::Const(Level::Model),
                    StmtKind::Tilde { target, .. } => {
                        let observed = table
                            .get(&target.name)
                            .map(|i| i.annotation == Some(Level::Data))
                            .unwrap_or(false);
                        if observed {
                            At::Const(Level::Model)
                        } else {
                            set.constraints.push(LevelConstraint::ConstLeVar {
                                lo: Level::Model,
                                var: target.name.clone(),
                                span,
                            });
                            At::Var(target.name.clone())
                        }
                    }
                    StmtKind::Decl {
                        name,
                        init: Some(DeclInit::Dist(_)),
                        ..
                    } => {
                        let observed = table
                            .get(name)
                            .map(|i| i.annotation == Some(Level::Data))
                            .unwrap_or(false);
                        if observed {
                            At::Const(Level::Model)
                        } else {
                            set.constraints.push(LevelConstraint::ConstLeVar {
                                lo: Level::Model,
                                var: name.clone(),
                                span,
                            });
                            At::Var(name.clone())
                        }
                    }
                    StmtKind::Decl { name, .. } => At::Var(name.clone()),
                    StmtKind::Assign { target, .. } => At::Var(target.name.clone()),
                    _ => unreachable!(),
                };
                for r in reads {
                    match &at {
                        At::Var(hi) => {
                            if &r != hi {
                                set.constraints.push(LevelConstraint::VarLeVar {
                                    lo: r,
                                    hi: hi.clone(),
                                    span,
                                });
                            }
                        }
                        At::Const(hi) => {
                            set.constraints.push(LevelConstraint::VarLeConst {
                                var: r,
                                hi: *hi,
                                span,
                            });
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// solving

#[derive(Debug, Clone)]
struct Solution {
    levels: HashMap<String, Level>,
    /// why a variable sits above Data: the constraint that last raised it
    #[allow(dead_code)]
    reasons: HashMap<String, String>,
}

/// Least solution in flow order, starting from per-variable floors.
fn least_solution(
    set: &ConstraintSet,
    floors: &HashMap<String, Level>,
) -> Result<Solution, TypeError> {
    let mut levels: HashMap<String, Level> = HashMap::new();
    let mut reasons: HashMap<String, String> = HashMap::new();
    let mut fixed: HashMap<String, (Level, Span)> = HashMap::new();

    for v in &set.vars {
        levels.insert(v.clone(), Level::Data);
    }
    for c in &set.constraints {
        if let LevelConstraint::Fixed { var, level, span } = c {
            fixed.insert(var.clone(), (*level, *span));
            levels.insert(var.clone(), *level);
            reasons.insert(var.clone(), format!("`{var}` is annotated {level}"));
        }
    }
    for (v, floor) in floors {
        if let Some((f, span)) = fixed.get(v) {
            if floor > f {
                return Err(TypeError::Unsatisfiable {
                    message: format!("`{v}` is annotated {f} but must be at least {floor}"),
                    chain: vec![reasons.get(v).cloned().unwrap_or_default()],
                    span: *span,
                });
            }
        }
        if levels[v] < *floor {
            levels.insert(v.clone(), *floor);
            reasons
                .entry(v.clone())
                .or_insert_with(|| format!("`{v}` was promoted to repair a shreddable-sequence violation"));
        }
    }

    let raise = |levels: &mut HashMap<String, Level>,
                 reasons: &mut HashMap<String, String>,
                 var: &str,
                 to: Level,
                 why: String,
                 span: Span,
                 fixed: &HashMap<String, (Level, Span)>|
     -> Result<bool, TypeError> {
        if levels[var] >= to {
            return Ok(false);
        }
        if let Some((f, _)) = fixed.get(var) {
            if *f < to {
                let mut chain = vec![why.clone()];
                chain.push(format!("`{var}` is annotated {f}"));
                return Err(TypeError::Unsatisfiable {
                    message: format!("`{var}` is annotated {f} but {why}"),
                    chain,
                    span,
                });
            }
        }
        levels.insert(var.to_string(), to);
        reasons.insert(var.to_string(), why);
        Ok(true)
    };

    let mut changed = true;
    while changed {
        changed = false;
        for c in &set.constraints {
            match c {
                LevelConstraint::VarLeVar { lo, hi, span } => {
                    let lv = levels[lo];
                    if lv > levels[hi] {
                        let why = format!(
                            "`{hi}` reads `{lo}` ({lv}): {}",
                            reasons.get(lo).cloned().unwrap_or_else(|| format!("`{lo}` is {lv}"))
                        );
                        changed |= raise(&mut levels, &mut reasons, hi, lv, why, *span, &fixed)?;
                    }
                }
                LevelConstraint::ConstLeVar { lo, var, span } => {
                    if *lo > levels[var] {
                        let why = format!("`{var}` is sampled, so it is at least {lo}");
                        changed |= raise(&mut levels, &mut reasons, var, *lo, why, *span, &fixed)?;
                    }
                }
                LevelConstraint::Fixed { .. } | LevelConstraint::VarLeConst { .. } => {}
            }
        }
    }

    // caps
    for c in &set.constraints {
        if let LevelConstraint::VarLeConst { var, hi, span } = c {
            if levels[var] > *hi {
                let chain = vec![reasons.get(var).cloned().unwrap_or_default()];
                return Err(TypeError::Unsatisfiable {
                    message: format!(
                        "`{var}` must be at most {hi} (it is read by a {hi}-level factor) but is {}",
                        levels[var]
                    ),
                    chain,
                    span: *span,
                });
            }
        }
    }
    Ok(Solution { levels, reasons })
}

/// Computes which variables a model-level factor transitively reads,
/// starting from the least solution. Those variables may not be demoted
/// to `genquant`.
pub fn anchor_analysis(program: &Program, least: &HashMap<String, Level>) -> Preferences {
    let table = match resolve(program) {
        Ok(t) => t,
        Err(_) => return Preferences::default(),
    };

    // per leaf: (reads including guards, defined name, factor level)
    let mut leaves: Vec<(Vec<String>, Option<String>, Option<Level>)> = Vec::new();
    collect_leaves(program, &table, least, &program.stmts, &mut Vec::new(), &mut Vec::new(), &mut leaves);

    let mut anchored: HashSet<String> = HashSet::new();
    // seed: reads of model-level factors
    for (reads, _, factor) in &leaves {
        if *factor == Some(Level::Model) {
            for r in reads {
                anchored.insert(r.clone());
            }
        }
    }
    // closure: definitions of anchored variables read at model level too
    let mut changed = true;
    while changed {
        changed = false;
        for (reads, defines, _) in &leaves {
            if let Some(d) = defines {
                if anchored.contains(d) {
                    for r in reads {
                        if anchored.insert(r.clone()) {
                            changed = true;
                        }
                    }
                }
            }
        }
    }
    Preferences {
        genquant_ineligible: anchored,
    }
}

#[allow(clippy::too_many_arguments)]
fn collect_leaves(
    program: &Program,
    table: &SymbolTable,
    least: &HashMap<String, Level>,
    stmts: &[Stmt],
    loops: &mut Vec<(String, Vec<String>)>,
    guards: &mut Vec<String>,
    out: &mut Vec<(Vec<String>, Option<String>, Option<Level>)>,
) {
    for stmt in stmts {
        match &stmt.kind {
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let mut reads = Reads::new();
                reads.add_expr(cond, loops);
                let n = reads.vars.len();
                guards.extend(reads.vars);
                collect_leaves(program, table, least, then_branch, loops, guards, out);
                collect_leaves(program, table, least, else_branch, loops, guards, out);
                guards.truncate(guards.len() - n);
            }
            StmtKind::For { var, lo, hi, body } => {
                let mut reads = Reads::new();
                reads.add_expr(lo, loops);
                reads.add_expr(hi, loops);
                let bound = reads.vars.clone();
                let n = bound.len();
                guards.extend(bound.clone());
                loops.push((var.clone(), bound));
                collect_leaves(program, table, least, body, loops, guards, out);
                loops.pop();
                guards.truncate(guards.len() - n);
            }
            _ => {
                let mut reads = stmt_reads(stmt, loops);
                for g in guards.iter() {
                    if !reads.contains(g) {
                        reads.push(g.clone());
                    }
                }
                let (defines, factor) = match &stmt.kind {
                    StmtKind::TargetPlus { .. } => (None, Some(Level::Model)),
                    StmtKind::Tilde { target, .. } => {
                        let observed = table
                            .get(&target.name)
                            .map(|i| i.annotation == Some(Level::Data))
                            .unwrap_or(false);
                        let level = if observed {
                            Level::Model
                        } else {
                            least.get(&target.name).copied().unwrap_or(Level::Model)
                        };
                        (Some(target.name.clone()), Some(level))
                    }
                    StmtKind::Decl {
                        name,
                        init: Some(DeclInit::Dist(_)),
                        ..
                    } => {
                        let level = least.get(name).copied().unwrap_or(Level::Model);
                        (Some(name.clone()), Some(level))
                    }
                    StmtKind::Decl {
                        name,
                        init: Some(DeclInit::Expr(_)),
                        ..
                    } => (Some(name.clone()), None),
                    StmtKind::Decl { .. } => (None, None),
                    StmtKind::Assign { target, .. } => (Some(target.name.clone()), None),
                    _ => unreachable!(),
                };
                out.push((reads, defines, factor));
            }
        }
    }
}

/// Minimum-cost solution subject to the constraints and preferences, via
/// least fixed point plus demotion.
pub fn solve_levels(
    set: &ConstraintSet,
    prefs: &Preferences,
    floors: &HashMap<String, Level>,
    annotated: &HashSet<String>,
) -> Result<HashMap<String, Level>, TypeError> {
    let sol = least_solution(set, floors)?;
    let mut levels = sol.levels;
    for v in &set.vars {
        if levels[v] == Level::Model
            && !annotated.contains(v)
            && !prefs.genquant_ineligible.contains(v)
            && floors.get(v).copied().unwrap_or(Level::Data) != Level::Model
        {
            levels.insert(v.clone(), Level::GenQuant);
        }
    }
    Ok(levels)
}

// ---------------------------------------------------------------------------
// shreddable sequences

#[derive(Debug, Clone, Copy, PartialEq)]
enum PathElem {
    Branch { if_id: usize, then_side: bool },
    Loop { for_id: usize },
}

struct Event {
    var: String,
    is_write: bool,
    level: Level,
    span: Span,
    path: Vec<PathElem>,
}

/// Two events can never co-execute if they sit in opposite branches of
/// the same `if` and share no enclosing loop inside or around it.
fn exclusive(a: &[PathElem], b: &[PathElem]) -> bool {
    let mut shares_loop = false;
    for (x, y) in a.iter().zip(b.iter()) {
        match (x, y) {
            (PathElem::Loop { for_id: i }, PathElem::Loop { for_id: j }) if i == j => {
                shares_loop = true;
            }
            (
                PathElem::Branch { if_id: i, then_side: s1 },
                PathElem::Branch { if_id: j, then_side: s2 },
            ) if i == j => {
                if s1 != s2 {
                    return !shares_loop;
                }
            }
            _ => break,
        }
    }
    false
}

fn same_loop(a: &[PathElem], b: &[PathElem]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        match (x, y) {
            (PathElem::Loop { for_id: i }, PathElem::Loop { for_id: j }) if i == j => return true,
            (
                PathElem::Branch { if_id: i, then_side: s1 },
                PathElem::Branch { if_id: j, then_side: s2 },
            ) if i == j && s1 == s2 => continue,
            _ => return false,
        }
    }
    false
}

pub struct Violation {
    pub name: String,
    pub read_span: Span,
    pub read_level: Level,
    pub write_span: Span,
    pub var_level: Level,
}

/// Checks the shreddable-sequence condition: no statement writes `x`
/// after an earlier statement of level strictly above `level(x)` has
/// read `x`. Statements in a shared loop body are checked in both
/// orders, since the loop repeats them.
pub fn check_shreddable(typed: &TypedProgram) -> Result<(), Violation> {
    let mut events = Vec::new();
    let mut ids = 0usize;
    gather_events(
        typed,
        &typed.program.stmts,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut Vec::new(),
        &mut ids,
        &mut events,
    );

    for (wi, w) in events.iter().enumerate() {
        if !w.is_write {
            continue;
        }
        let var_level = typed.level_of(&w.var);
        for (ri, r) in events.iter().enumerate() {
            if r.is_write || r.var != w.var {
                continue;
            }
            let ordered = ri < wi || same_loop(&r.path, &w.path);
            if !ordered || exclusive(&r.path, &w.path) {
                continue;
            }
            if ri == wi {
                continue;
            }
            if r.level > var_level {
                return Err(Violation {
                    name: w.var.clone(),
                    read_span: r.span,
                    read_level: r.level,
                    write_span: w.span,
                    var_level,
                });
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gather_events(
    typed: &TypedProgram,
    stmts: &[Stmt],
    path: &mut Vec<PathElem>,
    loops: &mut Vec<(String, Vec<String>)>,
    guards: &mut Vec<String>,
    ids: &mut usize,
    out: &mut Vec<Event>,
) {
    for stmt in stmts {
        match &stmt.kind {
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let id = *ids;
                *ids += 1;
                let mut reads = Reads::new();
                reads.add_expr(cond, loops);
                let n = reads.vars.len();
                guards.extend(reads.vars);
                path.push(PathElem::Branch { if_id: id, then_side: true });
                gather_events(typed, then_branch, path, loops, guards, ids, out);
                path.pop();
                path.push(PathElem::Branch { if_id: id, then_side: false });
                gather_events(typed, else_branch, path, loops, guards, ids, out);
                path.pop();
                guards.truncate(guards.len() - n);
            }
            StmtKind::For { var, lo, hi, body } => {
                let id = *ids;
                *ids += 1;
                let mut reads = Reads::new();
                reads.add_expr(lo, loops);
                reads.add_expr(hi, loops);
                let bound = reads.vars.clone();
                let n = bound.len();
                guards.extend(bound.clone());
                loops.push((var.clone(), bound));
                path.push(PathElem::Loop { for_id: id });
                gather_events(typed, body, path, loops, guards, ids, out);
                path.pop();
                loops.pop();
                guards.truncate(guards.len() - n);
            }
            _ => {
                let level = typed.stmt_level(stmt);
                let mut reads = stmt_reads(stmt, loops);
                for g in guards.iter() {
                    if !reads.contains(g) {
                        reads.push(g.clone());
                    }
                }
                for r in reads {
                    out.push(Event {
                        var: r,
                        is_write: false,
                        level,
                        span: stmt.span,
                        path: path.clone(),
                    });
                }
                // writes: assignments and initialiser expressions always;
                // `~` binds only when it runs generatively
                let write = match &stmt.kind {
                    StmtKind::Assign { target, .. } => Some(target.name.clone()),
                    StmtKind::Decl {
                        name,
                        init: Some(DeclInit::Expr(_)),
                        ..
                    } => Some(name.clone()),
                    StmtKind::Tilde { target, .. } if level == Level::GenQuant => {
                        Some(target.name.clone())
                    }
                    StmtKind::Decl {
                        name,
                        init: Some(DeclInit::Dist(_)),
                        ..
                    } if level == Level::GenQuant => Some(name.clone()),
                    _ => None,
                };
                if let Some(var) = write {
                    out.push(Event {
                        var,
                        is_write: true,
                        level,
                        span: stmt.span,
                        path: path.clone(),
                    });
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// inference

/// Infers levels: constraint generation, min-cost solving, and repair of
/// shreddable-sequence violations by promotion.
pub fn infer(program: &Program) -> Result<TypedProgram, TypeError> {
    let set = collect_constraints(program)?;
    let annotated: HashSet<String> = set
        .constraints
        .iter()
        .filter_map(|c| match c {
            LevelConstraint::Fixed { var, .. } => Some(var.clone()),
            _ => None,
        })
        .collect();

    let base = least_solution(&set, &HashMap::new())?;
    let prefs = anchor_analysis(program, &base.levels);

    let mut floors: HashMap<String, Level> = HashMap::new();
    let max_rounds = set.vars.len() * 3 + 4;
    for _ in 0..max_rounds {
        let levels = solve_levels(&set, &prefs, &floors, &annotated)?;
        let typed = TypedProgram {
            program: program.clone(),
            levels,
        };
        match check_shreddable(&typed) {
            Ok(()) => return Ok(typed),
            Err(v) => {
                let name = v.name.clone();
                if annotated.contains(&name) {
                    return Err(TypeError::Immutability {
                        message: format!(
                            "`{name}` ({}) is read at {} level and assigned afterwards",
                            v.var_level, v.read_level
                        ),
                        name,
                        read_span: v.read_span,
                        write_span: v.write_span,
                    });
                }
                // promote to the next-cheapest feasible level above the
                // current one in flow order
                let current = typed.level_of(&name);
                let mut candidates: Vec<Level> = Level::ALL
                    .iter()
                    .copied()
                    .filter(|l| *l > current)
                    .filter(|l| {
                        *l != Level::GenQuant || !prefs.genquant_ineligible.contains(&name)
                    })
                    .collect();
                candidates.sort_by_key(|l| l.cost());
                let mut promoted = false;
                for cand in candidates {
                    let mut trial = floors.clone();
                    trial.insert(name.clone(), cand);
                    if let Ok(trial_levels) = solve_levels(&set, &prefs, &trial, &annotated) {
                        // ensure anchored vars were not dragged above model
                        let ok = prefs
                            .genquant_ineligible
                            .iter()
                            .all(|v| trial_levels.get(v).map(|l| *l <= Level::Model).unwrap_or(true));
                        if ok {
                            floors = trial;
                            promoted = true;
                            break;
                        }
                    }
                }
                if !promoted {
                    return Err(TypeError::Immutability {
                        message: format!(
                            "`{name}` ({}) is read at {} level and assigned afterwards; no higher level is feasible",
                            v.var_level, v.read_level
                        ),
                        name,
                        read_span: v.read_span,
                        write_span: v.write_span,
                    });
                }
            }
        }
    }
    let v_span = program.stmts.first().map(|s| s.span).unwrap_or_default();
    Err(TypeError::Unsatisfiable {
        message: "level inference did not converge".to_string(),
        chain: vec![],
        span: v_span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn levels_of(src: &str) -> Vec<(String, Level)> {
        infer(&parse(src).unwrap()).unwrap().ordered_levels()
    }

    #[test]
    fn pure_data_pipeline_stays_data() {
        let lv = levels_of("data real x; real t = log(x);");
        assert_eq!(lv[1], ("t".to_string(), Level::Data));
    }

    #[test]
    fn observed_factor_pins_model_and_square_goes_genquant() {
        let lv = levels_of("real m ~ normal(0, 1); data real y; y ~ normal(m, 1); real s = m * m;");
        let get = |n: &str| lv.iter().find(|(v, _)| v == n).unwrap().1;
        assert_eq!(get("m"), Level::Model);
        assert_eq!(get("y"), Level::Data);
        assert_eq!(get("s"), Level::GenQuant);
    }

    #[test]
    fn eight_schools_levels() {
        let src = "\
data int N;
data real[N] y;
data real[N] sigma;
real mu ~ normal(0, 5);
real<lower=0> tau ~ cauchy(0, 5);
real[N] theta;
for (n in 1:N) {
  theta[n] ~ normal(mu, tau);
  y[n] ~ normal(theta[n], sigma[n]);
}
";
        let lv = levels_of(src);
        let get = |n: &str| lv.iter().find(|(v, _)| v == n).unwrap().1;
        for n in ["N", "y", "sigma"] {
            assert_eq!(get(n), Level::Data, "{n}");
        }
        for n in ["mu", "tau", "theta"] {
            assert_eq!(get(n), Level::Model, "{n}");
        }
    }

    #[test]
    fn reassignment_after_model_read_promotes_to_model() {
        let lv = levels_of("real x = 0.0; real y ~ normal(x, 1); x = 1.0;");
        let get = |n: &str| lv.iter().find(|(v, _)| v == n).unwrap().1;
        assert_eq!(get("x"), Level::Model);
        assert_eq!(get("y"), Level::Model);
    }

    #[test]
    fn data_annotation_makes_reassignment_an_error() {
        let err = infer(&parse("data real x = 0.0; real y ~ normal(x, 1); x = 1.0;").unwrap())
            .unwrap_err();
        match err {
            TypeError::Immutability { name, read_span, write_span, .. } => {
                assert_eq!(name, "x");
                assert_ne!(read_span, write_span);
            }
            other => panic!("expected immutability error, got {other:?}"),
        }
    }

    #[test]
    fn straight_line_program_is_shreddable() {
        let src = "data real d; real a = d + 1; real b ~ normal(a, 1); data real y; y ~ normal(b, 1);";
        let typed = infer(&parse(src).unwrap()).unwrap();
        assert!(check_shreddable(&typed).is_ok());
    }

    #[test]
    fn guard_constrains_body_levels() {
        let src = "\
data bool g;
data real x;
model real y;
if (g) {
  x = 1.0;
  y ~ normal(x, 1);
} else {
  x = -1.0;
  y ~ normal(x, 2);
}
";
        let lv = levels_of(src);
        let get = |n: &str| lv.iter().find(|(v, _)| v == n).unwrap().1;
        assert_eq!(get("g"), Level::Data);
        assert_eq!(get("x"), Level::Data);
        assert_eq!(get("y"), Level::Model);
    }

    #[test]
    fn model_guard_rejected_for_data_body() {
        // assigning a data variable under a model-level guard must fail
        let src = "real m ~ normal(0, 1); data real y; y ~ normal(m, 1); data real x; if (m > 0) { x = 1.0; }";
        assert!(infer(&parse(src).unwrap()).is_err());
    }

    #[test]
    fn annotation_conflict_reported() {
        let src = "model real m ~ normal(0, 1); data real t = m + 1;";
        let err = infer(&parse(src).unwrap()).unwrap_err();
        assert!(matches!(err, TypeError::Unsatisfiable { .. }));
    }

    #[test]
    fn empty_program_types() {
        let typed = infer(&parse("").unwrap()).unwrap();
        assert!(typed.ordered_levels().is_empty());
    }

    #[test]
    fn target_plus_reads_cap_at_model() {
        let src = "real z ~ normal(0, 1); target += z * z;";
        let lv = levels_of(src);
        assert_eq!(lv[0].1, Level::Model);
    }

    #[test]
    fn purely_generative_square_demotes() {
        // prior-only model: z stays a model parameter, its square is genquant
        let lv = levels_of("real z ~ normal(0, 1); real w = z * z;");
        let get = |n: &str| lv.iter().find(|(v, _)| v == n).unwrap().1;
        assert_eq!(get("z"), Level::Model);
        assert_eq!(get("w"), Level::GenQuant);
    }

    #[test]
    fn genquant_annotation_respected() {
        let lv = levels_of("real z ~ normal(0, 1); genquant real w = z + 1;");
        let get = |n: &str| lv.iter().find(|(v, _)| v == n).unwrap().1;
        assert_eq!(get("w"), Level::GenQuant);
    }

    #[test]
    fn discrete_model_params_detected() {
        let src = "\
int<lower=0,upper=1> c1 ~ bernoulli(0.5);
int<lower=0,upper=1> c2 ~ bernoulli(0.5);
bool both = c1 == 1 && c2 == 1;
target += both ? -1e30 : 0.0;
";
        let typed = infer(&parse(src).unwrap()).unwrap();
        assert_eq!(typed.discrete_model_params(), vec!["c1", "c2"]);
        assert_eq!(typed.level_of("both"), Level::Model);
    }
}
