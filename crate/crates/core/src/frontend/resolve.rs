//! Name resolution and base-type checking.
//!
//! Walks the statement sequence in textual order, enforcing
//! declare-before-use, unique declarations, loop-variable immutability,
//! and the usual operand typing rules. Declarations are collected into a
//! [`SymbolTable`] used by the later analysis passes.

use std::collections::HashMap;

use crate::ast::*;
use crate::frontend::ParseError;

/// Semantic type of an expression: a base type plus array depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemType {
    pub base: BaseType,
    pub dims: usize,
}

impl SemType {
    pub fn scalar(base: BaseType) -> Self {
        SemType { base, dims: 0 }
    }

    fn is_numeric_scalar(self) -> bool {
        self.dims == 0 && matches!(self.base, BaseType::Int | BaseType::Real)
    }
}

/// Information about one declared variable.
#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub ty: TypeDecl,
    pub annotation: Option<Level>,
    /// Index of the declaring statement in `Program::stmts`.
    pub decl_index: usize,
    pub sampled: bool,
    pub assigned: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    pub vars: Vec<VarInfo>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn get(&self, name: &str) -> Option<&VarInfo> {
        self.index.get(name).map(|&i| &self.vars[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn insert(&mut self, info: VarInfo) {
        self.index.insert(info.name.clone(), self.vars.len());
        self.vars.push(info);
    }
}

pub fn resolve(program: &Program) -> Result<SymbolTable, ParseError> {
    let mut table = SymbolTable::default();
    // Pre-scan writes and samples so usage flags are complete.
    let sampled = program.sampled_names();
    let assigned = program.assigned_names();

    let mut ctx = Ctx {
        table: &mut table,
        loop_vars: Vec::new(),
    };
    for (i, stmt) in program.stmts.iter().enumerate() {
        ctx.stmt(stmt, i, &sampled, &assigned)?;
    }
    Ok(table)
}

struct Ctx<'a> {
    table: &'a mut SymbolTable,
    loop_vars: Vec<String>,
}

impl Ctx<'_> {
    fn stmt(
        &mut self,
        stmt: &Stmt,
        index: usize,
        sampled: &[String],
        assigned: &[String],
    ) -> Result<(), ParseError> {
        let span = stmt.span;
        match &stmt.kind {
            StmtKind::Decl {
                annotation,
                ty,
                name,
                init,
            } => {
                if self.table.contains(name) || self.loop_vars.iter().any(|v| v == name) {
                    return Err(ParseError::duplicate(span, name.clone()));
                }
                if let (Some(lo), Some(hi)) = (ty.lower, ty.upper) {
                    if lo >= hi {
                        return Err(ParseError::typing(
                            span,
                            format!("empty bound range on `{name}`: lower={lo:?} must be below upper={hi:?}"),
                        ));
                    }
                }
                if ty.base == BaseType::Int {
                    for b in [ty.lower, ty.upper].into_iter().flatten() {
                        if b.fract() != 0.0 {
                            return Err(ParseError::typing(
                                span,
                                format!("int variable `{name}` requires integer bounds"),
                            ));
                        }
                    }
                }
                if ty.base == BaseType::Bool && (ty.lower.is_some() || ty.upper.is_some()) {
                    return Err(ParseError::typing(
                        span,
                        format!("bool variable `{name}` cannot carry bounds"),
                    ));
                }
                for dim in &ty.dims {
                    let dt = self.expr(dim, span)?;
                    if dt != SemType::scalar(BaseType::Int) {
                        return Err(ParseError::typing(
                            span,
                            format!("array dimension of `{name}` must be an int expression"),
                        ));
                    }
                }
                let declared = SemType {
                    base: ty.base,
                    dims: ty.dims.len(),
                };
                match init {
                    Some(DeclInit::Expr(e)) => {
                        let et = self.expr(e, span)?;
                        self.check_assignable(declared, et, name, span)?;
                    }
                    Some(DeclInit::Dist(d)) => {
                        if declared.dims != 0 {
                            return Err(ParseError::typing(
                                span,
                                format!("cannot sample whole array `{name}`; sample elements in a loop"),
                            ));
                        }
                        self.check_tilde(declared, d, span)?;
                    }
                    None => {}
                }
                self.table.insert(VarInfo {
                    name: name.clone(),
                    ty: ty.clone(),
                    annotation: *annotation,
                    decl_index: index,
                    sampled: sampled.iter().any(|n| n == name),
                    assigned: assigned.iter().any(|n| n == name),
                });
            }
            StmtKind::Assign { target, value } => {
                let tt = self.lvalue(target, span)?;
                let vt = self.expr(value, span)?;
                self.check_assignable(tt, vt, &target.name, span)?;
            }
            StmtKind::Tilde { target, dist } => {
                let tt = self.lvalue(target, span)?;
                self.check_tilde(tt, dist, span)?;
            }
            StmtKind::TargetPlus { value } => {
                let vt = self.expr(value, span)?;
                if !vt.is_numeric_scalar() {
                    return Err(ParseError::typing(
                        span,
                        "`target +=` requires a numeric scalar".to_string(),
                    ));
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let ct = self.expr(cond, span)?;
                if ct != SemType::scalar(BaseType::Bool) {
                    return Err(ParseError::typing(span, "if-guard must be a bool".to_string()));
                }
                for s in then_branch.iter().chain(else_branch) {
                    self.stmt(s, index, sampled, assigned)?;
                }
            }
            StmtKind::For { var, lo, hi, body } => {
                for bound in [lo, hi] {
                    let bt = self.expr(bound, span)?;
                    if bt != SemType::scalar(BaseType::Int) {
                        return Err(ParseError::typing(
                            span,
                            "loop bounds must be int expressions".to_string(),
                        ));
                    }
                }
                if self.table.contains(var) || self.loop_vars.iter().any(|v| v == var) {
                    return Err(ParseError::duplicate(span, var.clone()));
                }
                self.loop_vars.push(var.clone());
                for s in body {
                    self.stmt(s, index, sampled, assigned)?;
                }
                self.loop_vars.pop();
            }
        }
        Ok(())
    }

    fn lvalue(&mut self, lv: &LValue, span: Span) -> Result<SemType, ParseError> {
        if self.loop_vars.iter().any(|v| v == &lv.name) {
            return Err(ParseError::typing(
                span,
                format!("loop variable `{}` is immutable", lv.name),
            ));
        }
        let info = self
            .table
            .get(&lv.name)
            .ok_or_else(|| ParseError::undeclared(span, lv.name.clone()))?;
        let mut t = SemType {
            base: info.ty.base,
            dims: info.ty.dims.len(),
        };
        let indices = lv.indices.clone();
        for ix in &indices {
            if t.dims == 0 {
                return Err(ParseError::typing(
                    span,
                    format!("too many indices on `{}`", lv.name),
                ));
            }
            let it = self.expr(ix, span)?;
            if it != SemType::scalar(BaseType::Int) {
                return Err(ParseError::typing(
                    span,
                    format!("index into `{}` must be an int expression", lv.name),
                ));
            }
            t.dims -= 1;
        }
        Ok(t)
    }

    fn check_assignable(
        &self,
        target: SemType,
        value: SemType,
        name: &str,
        span: Span,
    ) -> Result<(), ParseError> {
        let ok = target == value
            || (target.dims == value.dims
                && target.base == BaseType::Real
                && value.base == BaseType::Int);
        if ok {
            Ok(())
        } else {
            Err(ParseError::typing(
                span,
                format!(
                    "cannot assign a {} value to `{name}` ({})",
                    describe(value),
                    describe(target)
                ),
            ))
        }
    }

    fn check_tilde(&mut self, target: SemType, dist: &DistCall, span: Span) -> Result<(), ParseError> {
        if target.dims != 0 {
            return Err(ParseError::typing(
                span,
                "cannot sample a whole array; sample elements in a loop".to_string(),
            ));
        }
        let want = if dist.dist.is_discrete() {
            BaseType::Int
        } else {
            BaseType::Real
        };
        if target.base != want {
            return Err(ParseError::typing(
                span,
                format!(
                    "`{}` draws {} values but the target is {}",
                    dist.dist.name(),
                    want,
                    target.base
                ),
            ));
        }
        self.check_dist_args(dist, span)
    }

    fn check_dist_args(&mut self, dist: &DistCall, span: Span) -> Result<(), ParseError> {
        let arg_tys: Vec<SemType> = dist
            .args
            .iter()
            .map(|a| self.expr(a, span))
            .collect::<Result<_, _>>()?;
        let ok = match dist.dist {
            DistName::Categorical => arg_tys[0] == SemType { base: BaseType::Real, dims: 1 },
            DistName::Binomial => {
                arg_tys[0] == SemType::scalar(BaseType::Int) && arg_tys[1].is_numeric_scalar()
            }
            _ => arg_tys.iter().all(|t| t.is_numeric_scalar()),
        };
        if ok {
            Ok(())
        } else {
            Err(ParseError::typing(
                span,
                format!("invalid argument types for `{}`", dist.dist.name()),
            ))
        }
    }

    fn expr(&mut self, e: &Expr, span: Span) -> Result<SemType, ParseError> {
        match e {
            Expr::IntLit(_) => Ok(SemType::scalar(BaseType::Int)),
            Expr::RealLit(_) => Ok(SemType::scalar(BaseType::Real)),
            Expr::BoolLit(_) => Ok(SemType::scalar(BaseType::Bool)),
            Expr::Var(name) => {
                if self.loop_vars.iter().any(|v| v == name) {
                    return Ok(SemType::scalar(BaseType::Int));
                }
                let info = self
                    .table
                    .get(name)
                    .ok_or_else(|| ParseError::undeclared(span, name.clone()))?;
                Ok(SemType {
                    base: info.ty.base,
                    dims: info.ty.dims.len(),
                })
            }
            Expr::Index(base, idx) => {
                let bt = self.expr(base, span)?;
                if bt.dims == 0 {
                    return Err(ParseError::typing(span, "cannot index a scalar".to_string()));
                }
                let it = self.expr(idx, span)?;
                if it != SemType::scalar(BaseType::Int) {
                    return Err(ParseError::typing(
                        span,
                        "index must be an int expression".to_string(),
                    ));
                }
                Ok(SemType {
                    base: bt.base,
                    dims: bt.dims - 1,
                })
            }
            Expr::Unary(op, inner) => {
                let t = self.expr(inner, span)?;
                match op {
                    UnOp::Neg if t.is_numeric_scalar() => Ok(t),
                    UnOp::Not if t == SemType::scalar(BaseType::Bool) => Ok(t),
                    _ => Err(ParseError::typing(span, "invalid operand for unary operator".to_string())),
                }
            }
            Expr::Binary(op, a, b) => {
                let ta = self.expr(a, span)?;
                let tb = self.expr(b, span)?;
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        if ta.is_numeric_scalar() && tb.is_numeric_scalar() {
                            let base = if ta.base == BaseType::Real || tb.base == BaseType::Real {
                                BaseType::Real
                            } else {
                                BaseType::Int
                            };
                            Ok(SemType::scalar(base))
                        } else {
                            Err(ParseError::typing(span, format!("`{}` requires numeric scalars", op.symbol())))
                        }
                    }
                    BinOp::Div => {
                        // `/` always denotes real division; ints promote.
                        if ta.is_numeric_scalar() && tb.is_numeric_scalar() {
                            Ok(SemType::scalar(BaseType::Real))
                        } else {
                            Err(ParseError::typing(span, "`/` requires numeric scalars".to_string()))
                        }
                    }
                    BinOp::And | BinOp::Or => {
                        let tbool = SemType::scalar(BaseType::Bool);
                        if ta == tbool && tb == tbool {
                            Ok(tbool)
                        } else {
                            Err(ParseError::typing(span, format!("`{}` requires bool operands", op.symbol())))
                        }
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let compatible = (ta.is_numeric_scalar() && tb.is_numeric_scalar())
                            || (ta == tb && ta.dims == 0);
                        if compatible {
                            Ok(SemType::scalar(BaseType::Bool))
                        } else {
                            Err(ParseError::typing(span, format!("`{}` operands are incomparable", op.symbol())))
                        }
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if ta.is_numeric_scalar() && tb.is_numeric_scalar() {
                            Ok(SemType::scalar(BaseType::Bool))
                        } else {
                            Err(ParseError::typing(span, format!("`{}` requires numeric scalars", op.symbol())))
                        }
                    }
                }
            }
            Expr::Cond(c, t, f) => {
                let ct = self.expr(c, span)?;
                if ct != SemType::scalar(BaseType::Bool) {
                    return Err(ParseError::typing(span, "ternary condition must be a bool".to_string()));
                }
                let tt = self.expr(t, span)?;
                let ft = self.expr(f, span)?;
                if tt == ft {
                    Ok(tt)
                } else if tt.is_numeric_scalar() && ft.is_numeric_scalar() {
                    Ok(SemType::scalar(BaseType::Real))
                } else {
                    Err(ParseError::typing(span, "ternary branches have different types".to_string()))
                }
            }
            Expr::Call(func, args) => {
                let tys: Vec<SemType> = args
                    .iter()
                    .map(|a| self.expr(a, span))
                    .collect::<Result<_, _>>()?;
                match func {
                    FuncName::Log | FuncName::Exp | FuncName::Sqrt => {
                        if tys[0].is_numeric_scalar() {
                            Ok(SemType::scalar(BaseType::Real))
                        } else {
                            Err(ParseError::typing(span, format!("`{}` requires a numeric scalar", func.name())))
                        }
                    }
                    FuncName::Pow => {
                        if tys.iter().all(|t| t.is_numeric_scalar()) {
                            Ok(SemType::scalar(BaseType::Real))
                        } else {
                            Err(ParseError::typing(span, "`pow` requires numeric scalars".to_string()))
                        }
                    }
                    FuncName::LogSumExp => {
                        if tys[0] == (SemType { base: BaseType::Real, dims: 1 }) {
                            Ok(SemType::scalar(BaseType::Real))
                        } else {
                            Err(ParseError::typing(span, "`log_sum_exp` requires a real array".to_string()))
                        }
                    }
                    FuncName::Softmax => {
                        if tys[0] == (SemType { base: BaseType::Real, dims: 1 }) {
                            Ok(SemType { base: BaseType::Real, dims: 1 })
                        } else {
                            Err(ParseError::typing(span, "`softmax` requires a real array".to_string()))
                        }
                    }
                }
            }
            Expr::DistLpdf(dist, value, args) => {
                let vt = self.expr(value, span)?;
                let want = if dist.is_discrete() {
                    BaseType::Int
                } else {
                    BaseType::Real
                };
                if !(vt.dims == 0 && (vt.base == want || (want == BaseType::Real && vt.base == BaseType::Int))) {
                    return Err(ParseError::typing(
                        span,
                        format!("`{}` value has the wrong type", dist.lpdf_name()),
                    ));
                }
                self.check_dist_args(&DistCall::new(*dist, args.clone()), span)?;
                Ok(SemType::scalar(BaseType::Real))
            }
        }
    }
}

fn describe(t: SemType) -> String {
    if t.dims == 0 {
        t.base.to_string()
    } else {
        format!("{}[{}]", t.base, "..".repeat(t.dims.min(3)))
    }
}
