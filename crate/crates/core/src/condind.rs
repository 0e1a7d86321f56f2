//! Conditional-independence analysis and discrete-parameter
//! marginalisation.
//!
//! For a finite-support discrete parameter `z`, the model slice splits
//! into three single-level pieces: statements independent of `z` that
//! may run first, the density factors that mention `z` (directly or
//! through deterministic definitions), and statements that never mention
//! `z`. The factors adjacent to `z` determine its Markov blanket.
//!
//! The marginalisation transform eliminates discrete parameters one by
//! one, variable-elimination style. Each step materialises a log-space
//! factor table over the remaining discrete blanket as generated
//! nested-loop code, accumulating `target += log_sum_exp(column)` once
//! every discrete variable in the bucket is summed out. The eliminated
//! parameters are re-drawn in reverse order as generated quantities via
//! `z ~ categorical(softmax(w))`, conditioning on the sampled continuous
//! values and the discretes drawn so far.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::ast::*;
use crate::levels::{infer, TypeError, TypedProgram};

/// Per-eliminand slicing levels: statements before the eliminand's
/// factors, the factors themselves, and everything after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CiLevel {
    L1,
    L2,
    L3,
}

/// Finite integer support of a discrete parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

impl Support {
    pub fn size(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }
}

/// A log-space table over assignments of finite-support variables.
/// Used by the enumeration oracle and to describe generated tables.
#[derive(Debug, Clone)]
pub struct FactorTable {
    pub scope: Vec<Support>,
    pub log_weights: Vec<f64>,
}

impl FactorTable {
    pub fn len(&self) -> usize {
        self.scope.iter().map(Support::size).product::<usize>().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }
}

/// Elimination order plus the per-step discrete blanket.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EliminationPlan {
    pub order: Vec<String>,
    /// Remaining-discrete Markov blanket at each step.
    pub blankets: Vec<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("`{name}` cannot be eliminated: {reason}")]
    NotEliminable { name: String, reason: String },
    #[error("eliminating `{name}` needs a table of {entries} entries (cap {cap})")]
    SupportTooLarge {
        name: String,
        entries: usize,
        cap: usize,
    },
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Clone)]
pub struct ElimConfig {
    /// Maximum factor-table entries per elimination step.
    pub support_cap: usize,
}

impl Default for ElimConfig {
    fn default() -> Self {
        ElimConfig {
            support_cap: 1_000_000,
        }
    }
}

// ---------------------------------------------------------------------------
// factor extraction

#[derive(Debug, Clone)]
struct LoopCtx {
    var: String,
    lo: Expr,
    hi: Expr,
}

#[derive(Debug, Clone)]
struct SourceFactor {
    /// Log-weight expression with discrete-dependent deterministic
    /// definitions expanded.
    expr: Expr,
    loops: Vec<LoopCtx>,
    /// Discrete model parameters the factor mentions.
    discretes: Vec<String>,
    /// Path of statement indices for removal from the program.
    path: Vec<usize>,
    under_guard: bool,
}

struct Analysis {
    supports: HashMap<String, Support>,
    /// All discrete model-level parameters.
    discretes: Vec<String>,
    factors: Vec<SourceFactor>,
    /// Unique top-level deterministic definitions.
    det_defs: HashMap<String, Expr>,
    /// Variables that transitively mention a discrete parameter.
    mentions: HashSet<String>,
}

fn analyse(typed: &TypedProgram) -> Result<Analysis, TransformError> {
    let program = &typed.program;
    let discretes = typed.discrete_model_params();
    let mut supports = HashMap::new();
    for d in &discretes {
        if let Some((ty, _)) = program.decl_of(d) {
            if let Some((lo, hi)) = ty.finite_int_support() {
                if ty.dims.is_empty() {
                    supports.insert(
                        d.clone(),
                        Support {
                            name: d.clone(),
                            lo,
                            hi,
                        },
                    );
                }
            }
        }
    }

    // unique top-level deterministic definitions (for substitution)
    let mut det_defs: HashMap<String, Expr> = HashMap::new();
    let mut multiply_defined: HashSet<String> = HashSet::new();
    for stmt in &program.stmts {
        match &stmt.kind {
            StmtKind::Decl {
                name,
                init: Some(DeclInit::Expr(e)),
                ..
            } => {
                if det_defs.insert(name.clone(), e.clone()).is_some() {
                    multiply_defined.insert(name.clone());
                }
            }
            StmtKind::Assign { target, value } if target.indices.is_empty() => {
                if det_defs.insert(target.name.clone(), value.clone()).is_some() {
                    multiply_defined.insert(target.name.clone());
                }
            }
            _ => {}
        }
    }
    for name in &multiply_defined {
        det_defs.remove(name);
    }

    // transitive discrete mentions
    let disc_set: HashSet<&String> = discretes.iter().collect();
    let mut mentions: HashSet<String> = discretes.iter().cloned().collect();
    let mut changed = true;
    while changed {
        changed = false;
        for (name, e) in &det_defs {
            if mentions.contains(name) {
                continue;
            }
            let mut fv = Vec::new();
            e.free_vars(&mut fv);
            if fv.iter().any(|v| mentions.contains(v)) {
                mentions.insert(name.clone());
                changed = true;
            }
        }
    }
    // assigned names with nested or repeated definitions that mention
    // discretes make substitution unsound; detect lazily at expansion
    let _ = disc_set;

    let mut analysis = Analysis {
        supports,
        discretes,
        factors: Vec::new(),
        det_defs,
        mentions,
    };
    collect_factors(
        typed,
        &typed.program.stmts,
        &mut Vec::new(),
        &mut Vec::new(),
        false,
        &mut analysis,
    )?;
    Ok(analysis)
}

fn collect_factors(
    typed: &TypedProgram,
    stmts: &[Stmt],
    loops: &mut Vec<LoopCtx>,
    path: &mut Vec<usize>,
    under_guard: bool,
    out: &mut Analysis,
) -> Result<(), TransformError> {
    for (i, stmt) in stmts.iter().enumerate() {
        path.push(i);
        match &stmt.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_factors(typed, then_branch, loops, path, true, out)?;
                collect_factors(typed, else_branch, loops, path, true, out)?;
            }
            StmtKind::For { var, lo, hi, body } => {
                loops.push(LoopCtx {
                    var: var.clone(),
                    lo: lo.clone(),
                    hi: hi.clone(),
                });
                collect_factors(typed, body, loops, path, under_guard, out)?;
                loops.pop();
            }
            StmtKind::Tilde { target, dist } => {
                if typed.stmt_level(stmt) == Level::Model {
                    let raw = Expr::DistLpdf(
                        dist.dist,
                        Box::new(target.as_expr()),
                        dist.args.clone(),
                    );
                    push_factor(raw, loops, path, under_guard, out)?;
                }
            }
            StmtKind::Decl {
                name,
                init: Some(DeclInit::Dist(d)),
                ..
            } => {
                if typed.stmt_level(stmt) == Level::Model {
                    let raw = Expr::DistLpdf(d.dist, Box::new(Expr::var(name.clone())), d.args.clone());
                    push_factor(raw, loops, path, under_guard, out)?;
                }
            }
            StmtKind::TargetPlus { value } => {
                push_factor(value.clone(), loops, path, under_guard, out)?;
            }
            _ => {}
        }
        path.pop();
    }
    Ok(())
}

fn push_factor(
    raw: Expr,
    loops: &[LoopCtx],
    path: &[usize],
    under_guard: bool,
    out: &mut Analysis,
) -> Result<(), TransformError> {
    let expr = expand(&raw, out)?;
    let mut fv = Vec::new();
    expr.free_vars(&mut fv);
    let discretes: Vec<String> = out
        .discretes
        .iter()
        .filter(|d| fv.iter().any(|v| v == *d))
        .cloned()
        .collect();
    out.factors.push(SourceFactor {
        expr,
        loops: loops.to_vec(),
        discretes,
        path: path.to_vec(),
        under_guard,
    });
    Ok(())
}

/// Expands deterministic definitions that transitively mention discrete
/// parameters, so the factor expression refers to the discretes
/// directly.
fn expand(e: &Expr, a: &Analysis) -> Result<Expr, TransformError> {
    let mut fv = Vec::new();
    e.free_vars(&mut fv);
    let mut result = e.clone();
    for v in fv {
        if a.mentions.contains(&v) && !a.discretes.contains(&v) {
            match a.det_defs.get(&v) {
                Some(def) => {
                    let expanded = expand(def, a)?;
                    result = result.substitute(&v, &expanded);
                }
                None => {
                    return Err(TransformError::NotEliminable {
                        name: v.clone(),
                        reason: "it depends on a discrete parameter through a \
                                 definition that is mutated or sits under control flow"
                            .to_string(),
                    })
                }
            }
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// slicing and blankets

/// Statement sequences (s1, s2, s3) of the model slice: s2 holds the
/// factors adjacent to `z`, s1 what they need beforehand, s3 the rest.
pub fn ci_slice(
    typed: &TypedProgram,
    z: &str,
) -> Result<(Vec<Stmt>, Vec<Stmt>, Vec<Stmt>), TransformError> {
    check_eliminable(typed, z)?;
    let a = analyse(typed)?;
    let model_slice = crate::shred::shred(typed).model;

    // names that belong to s2: z plus deterministic names mentioning z
    let mut z_names: HashSet<String> = HashSet::new();
    z_names.insert(z.to_string());
    let mut changed = true;
    while changed {
        changed = false;
        for (name, def) in &a.det_defs {
            if z_names.contains(name) {
                continue;
            }
            let mut fv = Vec::new();
            def.free_vars(&mut fv);
            if fv.iter().any(|v| z_names.contains(v)) {
                z_names.insert(name.clone());
                changed = true;
            }
        }
    }

    let mentions_z = |stmt: &Stmt| -> bool {
        let mut fv = stmt_free_vars(stmt);
        fv.retain(|v| z_names.contains(v));
        !fv.is_empty()
    };

    let mut s2 = Vec::new();
    let mut rest = Vec::new();
    for stmt in &model_slice {
        if let Some(kept) = filter_stmt(stmt, &|s| mentions_z(s)) {
            s2.push(kept);
        }
        if let Some(kept) = filter_stmt(stmt, &|s| !mentions_z(s)) {
            rest.push(kept);
        }
    }

    // s1: statements s2 transitively needs (definitions of its free vars)
    let mut needed: HashSet<String> = HashSet::new();
    for stmt in &s2 {
        for v in stmt_free_vars(stmt) {
            needed.insert(v);
        }
    }
    let mut s1 = Vec::new();
    let mut s3 = Vec::new();
    for stmt in rest.into_iter().rev() {
        let defines = stmt_defined_name(&stmt);
        let goes_first = defines
            .as_ref()
            .map(|d| needed.contains(d))
            .unwrap_or(false);
        if goes_first {
            for v in stmt_free_vars(&stmt) {
                needed.insert(v);
            }
            s1.push(stmt);
        } else {
            s3.push(stmt);
        }
    }
    s1.reverse();
    s3.reverse();
    Ok((s1, s2, s3))
}

/// Leaf-level filter that keeps loop structure, dropping containers that
/// end up empty.
fn filter_stmt(stmt: &Stmt, keep: &dyn Fn(&Stmt) -> bool) -> Option<Stmt> {
    match &stmt.kind {
        StmtKind::For { var, lo, hi, body } => {
            let kept: Vec<Stmt> = body.iter().filter_map(|s| filter_stmt(s, keep)).collect();
            if kept.is_empty() {
                None
            } else {
                Some(Stmt {
                    kind: StmtKind::For {
                        var: var.clone(),
                        lo: lo.clone(),
                        hi: hi.clone(),
                        body: kept,
                    },
                    span: stmt.span,
                })
            }
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let t: Vec<Stmt> = then_branch.iter().filter_map(|s| filter_stmt(s, keep)).collect();
            let e: Vec<Stmt> = else_branch.iter().filter_map(|s| filter_stmt(s, keep)).collect();
            if t.is_empty() && e.is_empty() {
                None
            } else {
                Some(Stmt {
                    kind: StmtKind::If {
                        cond: cond.clone(),
                        then_branch: t,
                        else_branch: e,
                    },
                    span: stmt.span,
                })
            }
        }
        _ => {
            if keep(stmt) {
                Some(stmt.clone())
            } else {
                None
            }
        }
    }
}

fn stmt_free_vars(stmt: &Stmt) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(stmt: &Stmt, out: &mut Vec<String>) {
        match &stmt.kind {
            StmtKind::Decl { ty, init, name, .. } => {
                for d in &ty.dims {
                    d.free_vars(out);
                }
                match init {
                    Some(DeclInit::Expr(e)) => e.free_vars(out),
                    Some(DeclInit::Dist(d)) => {
                        if !out.contains(name) {
                            out.push(name.clone());
                        }
                        for a in &d.args {
                            a.free_vars(out);
                        }
                    }
                    None => {}
                }
            }
            StmtKind::Assign { target, value } => {
                for ix in &target.indices {
                    ix.free_vars(out);
                }
                value.free_vars(out);
            }
            StmtKind::Tilde { target, dist } => {
                if !out.contains(&target.name) {
                    out.push(target.name.clone());
                }
                for ix in &target.indices {
                    ix.free_vars(out);
                }
                for a in &dist.args {
                    a.free_vars(out);
                }
            }
            StmtKind::TargetPlus { value } => value.free_vars(out),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                cond.free_vars(out);
                for s in then_branch.iter().chain(else_branch) {
                    walk(s, out);
                }
            }
            StmtKind::For { var, lo, hi, body } => {
                lo.free_vars(out);
                hi.free_vars(out);
                for s in body {
                    walk(s, out);
                }
                out.retain(|v| v != var);
            }
        }
    }
    walk(stmt, &mut out);
    out
}

fn stmt_defined_name(stmt: &Stmt) -> Option<String> {
    match &stmt.kind {
        StmtKind::Decl { name, .. } => Some(name.clone()),
        StmtKind::Assign { target, .. } => Some(target.name.clone()),
        _ => None,
    }
}

/// The Markov blanket of `z`: modelled variables co-occurring with `z`
/// in a density factor, after closing over deterministic definitions.
pub fn markov_blanket(typed: &TypedProgram, z: &str) -> Result<Vec<String>, TransformError> {
    check_eliminable(typed, z)?;
    let a = analyse(typed)?;
    let sampled: HashSet<String> = typed.program.sampled_names().into_iter().collect();
    let mut blanket = Vec::new();
    for f in &a.factors {
        if f.discretes.iter().any(|d| d == z) {
            let mut fv = Vec::new();
            f.expr.free_vars(&mut fv);
            for v in fv {
                if v != z && sampled.contains(&v) && !blanket.contains(&v) {
                    blanket.push(v);
                }
            }
        }
    }
    // declaration order
    let order: Vec<String> = typed.program.decls().map(|(n, _, _, _)| n.to_string()).collect();
    blanket.sort_by_key(|v| order.iter().position(|n| n == v));
    Ok(blanket)
}

fn check_eliminable(typed: &TypedProgram, z: &str) -> Result<(), TransformError> {
    let not = |reason: &str| TransformError::NotEliminable {
        name: z.to_string(),
        reason: reason.to_string(),
    };
    let Some((ty, ann)) = typed.program.decl_of(z) else {
        return Err(not("it is not declared"));
    };
    if ann == Some(Level::Data) {
        return Err(not("it is observed data"));
    }
    if ty.base != BaseType::Int {
        return Err(not("it is continuous"));
    }
    if !ty.dims.is_empty() {
        return Err(not("it is an array; eliminate scalar variables"));
    }
    if ty.finite_int_support().is_none() {
        return Err(not("it has no finite support (needs both bounds)"));
    }
    if typed.level_of(z) != Level::Model {
        return Err(not("it is not a model-level parameter"));
    }
    if typed.program.assigned_names().iter().any(|n| n == z) {
        return Err(not("it is deterministically assigned"));
    }
    if !typed.program.sampled_names().iter().any(|n| n == z) {
        return Err(not("it has no prior"));
    }
    Ok(())
}

/// Greedy minimum-degree ordering on the discrete interaction graph,
/// with fill-in; ties break by declaration order.
pub fn auto_order(typed: &TypedProgram, vars: &[String]) -> Result<EliminationPlan, TransformError> {
    for v in vars {
        check_eliminable(typed, v)?;
    }
    let a = analyse(typed)?;
    let mut adj: HashMap<String, HashSet<String>> = vars
        .iter()
        .map(|v| (v.clone(), HashSet::new()))
        .collect();
    for f in &a.factors {
        let within: Vec<&String> = f.discretes.iter().filter(|d| adj.contains_key(*d)).collect();
        for x in &within {
            for y in &within {
                if x != y {
                    adj.get_mut(*x).unwrap().insert((*y).clone());
                }
            }
        }
    }
    let decl_pos: HashMap<String, usize> = typed
        .program
        .decls()
        .enumerate()
        .map(|(i, (n, _, _, _))| (n.to_string(), i))
        .collect();
    let mut remaining: Vec<String> = vars.to_vec();
    remaining.sort_by_key(|v| decl_pos.get(v).copied().unwrap_or(usize::MAX));
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let pick = remaining
            .iter()
            .min_by_key(|v| adj[*v].len())
            .unwrap()
            .clone();
        // fill-in: neighbours become a clique
        let neigh: Vec<String> = adj[&pick].iter().cloned().collect();
        for x in &neigh {
            for y in &neigh {
                if x != y {
                    adj.get_mut(x).unwrap().insert(y.clone());
                }
            }
            adj.get_mut(x).unwrap().remove(&pick);
        }
        adj.remove(&pick);
        remaining.retain(|v| v != &pick);
        order.push(pick);
    }
    Ok(EliminationPlan {
        order,
        blankets: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// the marginalisation transform

#[derive(Debug, Clone)]
enum WorkFactor {
    Source(SourceFactor),
    Table { var: String, scope: Vec<String> },
}

impl WorkFactor {
    fn touches(&self, z: &str) -> bool {
        match self {
            WorkFactor::Source(f) => f.discretes.iter().any(|d| d == z),
            WorkFactor::Table { scope, .. } => scope.iter().any(|s| s == z),
        }
    }

    fn discrete_vars(&self) -> Vec<String> {
        match self {
            WorkFactor::Source(f) => f.discretes.clone(),
            WorkFactor::Table { scope, .. } => scope.clone(),
        }
    }
}

#[derive(Debug)]
pub struct ElimOutcome {
    pub typed: TypedProgram,
    pub plan: EliminationPlan,
}

/// Marginalises the given discrete parameters (all eligible ones when
/// `plan_vars` is `None`, ordered by [`auto_order`]), re-drawing them as
/// generated quantities.
pub fn elim_gen(
    typed: &TypedProgram,
    plan_vars: Option<&[String]>,
    config: &ElimConfig,
) -> Result<ElimOutcome, TransformError> {
    let plan_order = match plan_vars {
        Some(vars) => {
            for v in vars {
                check_eliminable(typed, v)?;
            }
            vars.to_vec()
        }
        None => {
            let all = typed.discrete_model_params();
            auto_order(typed, &all)?.order
        }
    };
    let a = analyse(typed)?;
    for f in &a.factors {
        if f.under_guard && f.discretes.iter().any(|d| plan_order.contains(d)) {
            return Err(TransformError::NotEliminable {
                name: f.discretes[0].clone(),
                reason: "one of its factors sits under a conditional".to_string(),
            });
        }
    }
    let program = &typed.program;
    let decl_pos: HashMap<String, usize> = program
        .decls()
        .enumerate()
        .map(|(i, (n, _, _, _))| (n.to_string(), i))
        .collect();

    // working factor set; sources that mention a planned discrete get
    // consumed, everything else stays in the program untouched
    let mut factors: Vec<WorkFactor> = a
        .factors
        .iter()
        .filter(|f| f.discretes.iter().any(|d| plan_order.contains(d)))
        .cloned()
        .map(WorkFactor::Source)
        .collect();
    let removed_paths: HashSet<Vec<usize>> = a
        .factors
        .iter()
        .filter(|f| f.discretes.iter().any(|d| plan_order.contains(d)))
        .map(|f| f.path.clone())
        .collect();

    let mut table_code: Vec<Stmt> = Vec::new();
    let mut redraw_code: Vec<Stmt> = Vec::new();
    let mut plan = EliminationPlan::default();
    let mut eliminated: HashSet<String> = HashSet::new();
    let mut fresh = 0usize;

    // buckets recorded for the re-draw pass (reverse order)
    let mut redraw_buckets: Vec<(String, Vec<WorkFactor>)> = Vec::new();

    for z in &plan_order {
        let support = a.supports.get(z).cloned().ok_or_else(|| {
            TransformError::NotEliminable {
                name: z.clone(),
                reason: "it has no finite support".to_string(),
            }
        })?;
        let (bucket, rest): (Vec<WorkFactor>, Vec<WorkFactor>) =
            factors.into_iter().partition(|f| f.touches(z));
        factors = rest;

        // remaining-discrete blanket, in declaration order
        let mut blanket: Vec<String> = Vec::new();
        for f in &bucket {
            for d in f.discrete_vars() {
                if d != *z && !eliminated.contains(&d) && !blanket.contains(&d) {
                    blanket.push(d);
                }
            }
        }
        blanket.sort_by_key(|v| decl_pos.get(v).copied().unwrap_or(usize::MAX));

        let entries: usize = blanket
            .iter()
            .map(|b| a.supports[b].size())
            .product::<usize>()
            .max(1);
        if entries > config.support_cap {
            return Err(TransformError::SupportTooLarge {
                name: z.clone(),
                entries,
                cap: config.support_cap,
            });
        }

        fresh += 1;
        let tbl_name = program.fresh_name(&format!("_f{fresh}_{z}"));
        let col_name = program.fresh_name(&format!("_col{fresh}_{z}"));
        let acc_name = program.fresh_name(&format!("_acc{fresh}_{z}"));
        let zj = format!("_j{fresh}");

        // declarations (top level)
        table_code.push(Stmt::new(StmtKind::Decl {
            annotation: None,
            ty: TypeDecl {
                base: BaseType::Real,
                lower: None,
                upper: None,
                dims: vec![Expr::int(support.size() as i64)],
            },
            name: col_name.clone(),
            init: None,
        }));
        table_code.push(Stmt::new(StmtKind::Decl {
            annotation: None,
            ty: TypeDecl::scalar(BaseType::Real),
            name: acc_name.clone(),
            init: None,
        }));
        if !blanket.is_empty() {
            table_code.push(Stmt::new(StmtKind::Decl {
                annotation: None,
                ty: TypeDecl {
                    base: BaseType::Real,
                    lower: None,
                    upper: None,
                    dims: blanket
                        .iter()
                        .map(|b| Expr::int(a.supports[b].size() as i64))
                        .collect(),
                },
                name: tbl_name.clone(),
                init: None,
            }));
        }

        // inner column loop: for _j in 1:K { acc = 0; ...; col[_j] = acc }
        let blanket_loop_vars: Vec<String> = blanket
            .iter()
            .enumerate()
            .map(|(i, b)| format!("_i{fresh}_{i}_{b}"))
            .collect();
        let disc_value = |d: &str| -> Expr {
            if d == z {
                value_expr(&zj, support.lo)
            } else if let Some(pos) = blanket.iter().position(|b| b == d) {
                value_expr(&blanket_loop_vars[pos], a.supports[d].lo)
            } else {
                // still-parameter discrete outside planned set
                Expr::var(d.to_string())
            }
        };
        let table_index = |scope_var: &str| -> Expr {
            if scope_var == z {
                Expr::var(zj.clone())
            } else if let Some(pos) = blanket.iter().position(|b| b == scope_var) {
                Expr::var(blanket_loop_vars[pos].clone())
            } else {
                index_of_value(&Expr::var(scope_var.to_string()), a.supports[scope_var].lo)
            }
        };
        let mut inner: Vec<Stmt> = vec![assign(&acc_name, Expr::real(0.0))];
        inner.extend(accumulate(&bucket, &acc_name, &disc_value, &table_index));
        inner.push(Stmt::new(StmtKind::Assign {
            target: LValue {
                name: col_name.clone(),
                indices: vec![Expr::var(zj.clone())],
            },
            value: Expr::var(acc_name.clone()),
        }));
        let col_loop = Stmt::new(StmtKind::For {
            var: zj.clone(),
            lo: Expr::int(1),
            hi: Expr::int(support.size() as i64),
            body: inner,
        });

        let lse = Expr::Call(FuncName::LogSumExp, vec![Expr::var(col_name.clone())]);
        if blanket.is_empty() {
            table_code.push(col_loop);
            table_code.push(Stmt::new(StmtKind::TargetPlus { value: lse }));
        } else {
            let cell = Stmt::new(StmtKind::Assign {
                target: LValue {
                    name: tbl_name.clone(),
                    indices: blanket_loop_vars
                        .iter()
                        .map(|v| Expr::var(v.clone()))
                        .collect(),
                },
                value: lse,
            });
            let mut body = vec![col_loop, cell];
            for (i, b) in blanket.iter().enumerate().rev() {
                body = vec![Stmt::new(StmtKind::For {
                    var: blanket_loop_vars[i].clone(),
                    lo: Expr::int(1),
                    hi: Expr::int(a.supports[b].size() as i64),
                    body,
                })];
            }
            table_code.extend(body);
            factors.push(WorkFactor::Table {
                var: tbl_name.clone(),
                scope: blanket.clone(),
            });
        }

        plan.order.push(z.clone());
        plan.blankets.push(blanket.clone());
        redraw_buckets.push((z.clone(), bucket));
        eliminated.insert(z.clone());
    }

    // leftover tables over still-parameter discretes (partial plans)
    for f in &factors {
        if let WorkFactor::Table { var, scope } = f {
            let mut e = Expr::var(var.clone());
            for s in scope {
                e = Expr::index(e, index_of_value(&Expr::var(s.clone()), a.supports[s].lo));
            }
            table_code.push(Stmt::new(StmtKind::TargetPlus { value: e }));
        }
    }

    // re-draw pass, reverse elimination order
    for (k, (z, bucket)) in redraw_buckets.iter().enumerate().rev() {
        let support = &a.supports[z];
        let w_name = program.fresh_name(&format!("_w{}_{z}", k + 1));
        let acc_name = program.fresh_name(&format!("_wacc{}_{z}", k + 1));
        let zj = format!("_jw{}", k + 1);
        redraw_code.push(Stmt::new(StmtKind::Decl {
            annotation: None,
            ty: TypeDecl {
                base: BaseType::Real,
                lower: None,
                upper: None,
                dims: vec![Expr::int(support.size() as i64)],
            },
            name: w_name.clone(),
            init: None,
        }));
        redraw_code.push(Stmt::new(StmtKind::Decl {
            annotation: None,
            ty: TypeDecl::scalar(BaseType::Real),
            name: acc_name.clone(),
            init: None,
        }));
        let disc_value = |d: &str| -> Expr {
            if d == z {
                value_expr(&zj, support.lo)
            } else {
                Expr::var(d.to_string())
            }
        };
        let table_index = |scope_var: &str| -> Expr {
            if scope_var == z {
                Expr::var(zj.clone())
            } else {
                index_of_value(&Expr::var(scope_var.to_string()), a.supports[scope_var].lo)
            }
        };
        let mut inner = vec![assign(&acc_name, Expr::real(0.0))];
        inner.extend(accumulate(bucket, &acc_name, &disc_value, &table_index));
        inner.push(Stmt::new(StmtKind::Assign {
            target: LValue {
                name: w_name.clone(),
                indices: vec![Expr::var(zj.clone())],
            },
            value: Expr::var(acc_name.clone()),
        }));
        redraw_code.push(Stmt::new(StmtKind::For {
            var: zj.clone(),
            lo: Expr::int(1),
            hi: Expr::int(support.size() as i64),
            body: inner,
        }));
        let soft = Expr::Call(FuncName::Softmax, vec![Expr::var(w_name.clone())]);
        let cat = DistCall::new(DistName::Categorical, vec![soft]);
        if support.lo == 1 {
            redraw_code.push(Stmt::new(StmtKind::Tilde {
                target: LValue::var(z.clone()),
                dist: cat,
            }));
        } else {
            let idx_name = program.fresh_name(&format!("_k{}_{z}", k + 1));
            redraw_code.push(Stmt::new(StmtKind::Decl {
                annotation: Some(Level::GenQuant),
                ty: TypeDecl {
                    base: BaseType::Int,
                    lower: Some(1.0),
                    upper: Some(support.size() as f64),
                    dims: vec![],
                },
                name: idx_name.clone(),
                init: Some(DeclInit::Dist(cat)),
            }));
            redraw_code.push(assign(z, shift_expr(Expr::var(idx_name), support.lo - 1)));
        }
    }

    // rebuild the program: rewrite eliminated declarations, drop consumed
    // factors, append table and re-draw code, then move statements that
    // read re-drawn values after the re-draws
    let plan_set: HashSet<&String> = plan.order.iter().collect();
    let kept = rebuild(&program.stmts, &removed_paths, &plan_set, &mut Vec::new());

    let mut moved = Vec::new();
    let mut front = Vec::new();
    let mut moved_names: HashSet<String> = plan.order.iter().cloned().collect();
    for stmt in kept {
        let reads_redrawn = stmt_free_vars(&stmt)
            .iter()
            .any(|v| moved_names.contains(v));
        let is_plan_decl = matches!(
            &stmt.kind,
            StmtKind::Decl { name, .. } if plan_set.contains(name)
        );
        if reads_redrawn && !is_plan_decl {
            if let Some(d) = stmt_defined_name(&stmt) {
                moved_names.insert(d);
            }
            moved.push(stmt);
        } else {
            front.push(stmt);
        }
    }

    let mut stmts = front;
    stmts.extend(table_code);
    stmts.extend(redraw_code);
    stmts.extend(moved);

    let new_program = Program::new(stmts);
    let typed_out = infer(&new_program)?;
    Ok(ElimOutcome {
        typed: typed_out,
        plan,
    })
}

/// Removes consumed factor statements and strips priors from eliminated
/// declarations, re-annotating them as genquant.
fn rebuild(
    stmts: &[Stmt],
    removed: &HashSet<Vec<usize>>,
    plan: &HashSet<&String>,
    path: &mut Vec<usize>,
) -> Vec<Stmt> {
    let mut out = Vec::new();
    for (i, stmt) in stmts.iter().enumerate() {
        path.push(i);
        let at_removed = removed.contains(path);
        match &stmt.kind {
            StmtKind::Decl {
                ty,
                name,
                init,
                annotation,
            } if plan.contains(name) => {
                // keep the declaration, drop the prior, mark genquant
                let _ = (init, annotation);
                out.push(Stmt {
                    kind: StmtKind::Decl {
                        annotation: Some(Level::GenQuant),
                        ty: ty.clone(),
                        name: name.clone(),
                        init: None,
                    },
                    span: stmt.span,
                });
            }
            _ if at_removed => {}
            StmtKind::For { var, lo, hi, body } => {
                let kept = rebuild(body, removed, plan, path);
                if !kept.is_empty() {
                    out.push(Stmt {
                        kind: StmtKind::For {
                            var: var.clone(),
                            lo: lo.clone(),
                            hi: hi.clone(),
                            body: kept,
                        },
                        span: stmt.span,
                    });
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let t = rebuild(then_branch, removed, plan, path);
                let e = rebuild(else_branch, removed, plan, path);
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
            _ => out.push(stmt.clone()),
        }
        path.pop();
    }
    out
}

/// `acc = acc + f` statements for every factor in the bucket, with the
/// factor's loop context reproduced and discretes substituted.
fn accumulate(
    bucket: &[WorkFactor],
    acc: &str,
    disc_value: &dyn Fn(&str) -> Expr,
    table_index: &dyn Fn(&str) -> Expr,
) -> Vec<Stmt> {
    let mut out = Vec::new();
    for f in bucket {
        match f {
            WorkFactor::Source(src) => {
                let mut expr = src.expr.clone();
                for d in &src.discretes {
                    expr = expr.substitute(d, &disc_value(d));
                }
                let mut body = vec![assign(
                    acc,
                    Expr::bin(BinOp::Add, Expr::var(acc.to_string()), expr),
                )];
                for ctx in src.loops.iter().rev() {
                    body = vec![Stmt::new(StmtKind::For {
                        var: ctx.var.clone(),
                        lo: ctx.lo.clone(),
                        hi: ctx.hi.clone(),
                        body,
                    })];
                }
                out.extend(body);
            }
            WorkFactor::Table { var, scope } => {
                let mut e = Expr::var(var.clone());
                for s in scope {
                    e = Expr::index(e, table_index(s));
                }
                out.push(assign(
                    acc,
                    Expr::bin(BinOp::Add, Expr::var(acc.to_string()), e),
                ));
            }
        }
    }
    out
}

fn assign(name: &str, value: Expr) -> Stmt {
    Stmt::new(StmtKind::Assign {
        target: LValue::var(name.to_string()),
        value,
    })
}

/// Value of a discrete variable at 1-based loop index `j`: `j + (lo-1)`.
fn value_expr(loop_var: &str, lo: i64) -> Expr {
    shift_expr(Expr::var(loop_var.to_string()), lo - 1)
}

/// 1-based table index of a discrete variable's value: `v - (lo-1)`.
fn index_of_value(value: &Expr, lo: i64) -> Expr {
    shift_expr(value.clone(), 1 - lo)
}

fn shift_expr(e: Expr, delta: i64) -> Expr {
    use std::cmp::Ordering;
    match delta.cmp(&0) {
        Ordering::Equal => e,
        Ordering::Greater => Expr::bin(BinOp::Add, e, Expr::int(delta)),
        Ordering::Less => Expr::bin(BinOp::Sub, e, Expr::int(-delta)),
    }
}
