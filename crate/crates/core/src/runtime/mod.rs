//! Operational semantics: big-step evaluation of statement sequences
//! against a mutable store, accumulating the log target density.
//!
//! A `~` statement is interpreted according to the mode its statement
//! runs under: in density mode it adds the log density of the left-hand
//! value under the distribution to the target; in generative mode it
//! draws from the distribution and binds the result.

pub mod dist;
pub mod scalar;
mod transform;

pub use scalar::{Dual, Scalar};
pub use transform::{Constraint, UnconstrainingMap};

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ast::*;
use crate::runtime::dist::BadParam;

#[derive(Debug, Clone, Error)]
pub enum RuntimeError {
    #[error("index {index} out of bounds for `{name}` (length {len})")]
    IndexOutOfBounds {
        span: Span,
        name: String,
        index: i64,
        len: usize,
    },
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(#[from] BadParam),
    #[error("`{name}` has no value")]
    Unbound { name: String },
    #[error("missing input `{name}`")]
    MissingInput { name: String },
    #[error("parameter vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("value of `{name}` has the wrong shape")]
    ShapeMismatch { name: String },
    #[error("generative draw for `{0}` requires a plain-valued store")]
    DrawInDerivativeMode(String),
}

/// Runtime values, generic over the real scalar representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<T> {
    Int(i64),
    Real(T),
    Bool(bool),
    Array(Vec<Value<T>>),
}

impl<T: Scalar> Value<T> {
    pub fn real(v: f64) -> Self {
        Value::Real(T::from_f64(v))
    }

    /// Numeric view of a scalar value; ints and bools promote.
    pub fn as_scalar(&self) -> Option<T> {
        match self {
            Value::Real(v) => Some(v.clone()),
            Value::Int(v) => Some(T::from_f64(*v as f64)),
            Value::Bool(b) => Some(T::from_f64(if *b { 1.0 } else { 0.0 })),
            Value::Array(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Bool(b) => Some(if *b { 1 } else { 0 }),
            Value::Real(v) if v.value().fract() == 0.0 => Some(v.value() as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(v) => Some(*v != 0),
            _ => None,
        }
    }

    /// Flattens nested arrays of reals into a vector (row-major).
    pub fn flatten_reals(&self, out: &mut Vec<T>) {
        match self {
            Value::Array(items) => {
                for v in items {
                    v.flatten_reals(out);
                }
            }
            other => {
                if let Some(s) = other.as_scalar() {
                    out.push(s);
                }
            }
        }
    }

    /// Default value for a declared type with concrete dimensions.
    pub fn default_of(base: BaseType, dims: &[usize]) -> Value<T> {
        if dims.is_empty() {
            match base {
                BaseType::Int => Value::Int(0),
                BaseType::Real => Value::real(0.0),
                BaseType::Bool => Value::Bool(false),
            }
        } else {
            let inner = Value::default_of(base, &dims[1..]);
            Value::Array(vec![inner; dims[0]])
        }
    }

    pub fn map_scalars<U: Scalar>(&self, f: &impl Fn(&T) -> U) -> Value<U> {
        match self {
            Value::Int(v) => Value::Int(*v),
            Value::Bool(b) => Value::Bool(*b),
            Value::Real(v) => Value::Real(f(v)),
            Value::Array(items) => Value::Array(items.iter().map(|v| v.map_scalars(f)).collect()),
        }
    }
}

/// How a `~` statement executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmtMode {
    /// Deterministic statements only; `~` is not allowed.
    Plain,
    /// `~` scores the left value and accumulates the target.
    Density,
    /// `~` draws and binds.
    Generative,
}

/// Variable environment plus the accumulated log target.
#[derive(Debug, Clone)]
pub struct Store<T: Scalar> {
    vars: HashMap<String, Value<T>>,
    pub target: T,
    pub rng: ChaCha8Rng,
    /// Leaf statements executed so far (loop bodies count per iteration).
    pub exec_count: u64,
}

impl<T: Scalar> Default for Store<T> {
    fn default() -> Self {
        Store::new()
    }
}

impl<T: Scalar> Store<T> {
    pub fn new() -> Self {
        Store {
            vars: HashMap::new(),
            target: T::from_f64(0.0),
            rng: ChaCha8Rng::seed_from_u64(0),
            exec_count: 0,
        }
    }

    pub fn with_seed(seed: u64) -> Self {
        let mut s = Store::new();
        s.rng = ChaCha8Rng::seed_from_u64(seed);
        s
    }

    pub fn bind(&mut self, name: impl Into<String>, value: Value<T>) {
        self.vars.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Value<T>> {
        self.vars.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.vars.keys()
    }
}

/// Executes statements with a per-statement mode chosen by `mode_of`.
/// Leaf statement levels are supplied by the typing pass; single-level
/// slices can use [`exec`] with a fixed mode instead.
pub fn exec_with<T: Scalar>(
    stmts: &[Stmt],
    store: &mut Store<T>,
    mode_of: &dyn Fn(&Stmt) -> StmtMode,
) -> Result<(), RuntimeError> {
    let mut interp = Interp { store };
    for stmt in stmts {
        interp.stmt(stmt, mode_of)?;
    }
    Ok(())
}

/// Executes a single-level statement sequence under one mode.
pub fn exec<T: Scalar>(
    stmts: &[Stmt],
    store: &mut Store<T>,
    mode: StmtMode,
) -> Result<(), RuntimeError> {
    exec_with(stmts, store, &move |_| mode)
}

struct Interp<'a, T: Scalar> {
    store: &'a mut Store<T>,
}

impl<T: Scalar> Interp<'_, T> {
    fn stmt(&mut self, stmt: &Stmt, mode_of: &dyn Fn(&Stmt) -> StmtMode) -> Result<(), RuntimeError> {
        match &stmt.kind {
            StmtKind::Decl { ty, name, init, .. } => {
                self.store.exec_count += 1;
                if !self.store.contains(name) {
                    let dims = self.concrete_dims(ty, stmt)?;
                    self.store
                        .bind(name.clone(), Value::default_of(ty.base, &dims));
                }
                match init {
                    Some(DeclInit::Expr(e)) => {
                        let v = self.eval(e, stmt)?;
                        self.assign(&LValue::var(name.clone()), v, stmt)?;
                    }
                    Some(DeclInit::Dist(d)) => {
                        self.tilde(&LValue::var(name.clone()), d, mode_of(stmt), stmt)?;
                    }
                    None => {}
                }
                Ok(())
            }
            StmtKind::Assign { target, value } => {
                self.store.exec_count += 1;
                let v = self.eval(value, stmt)?;
                self.assign(target, v, stmt)
            }
            StmtKind::Tilde { target, dist } => {
                self.store.exec_count += 1;
                self.tilde(target, dist, mode_of(stmt), stmt)
            }
            StmtKind::TargetPlus { value } => {
                self.store.exec_count += 1;
                let v = self
                    .eval(value, stmt)?
                    .as_scalar()
                    .ok_or_else(|| RuntimeError::ShapeMismatch {
                        name: "target".to_string(),
                    })?;
                self.store.target = self.store.target.add(&v);
                Ok(())
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.store.exec_count += 1;
                let c = self
                    .eval(cond, stmt)?
                    .as_bool()
                    .ok_or_else(|| RuntimeError::ShapeMismatch {
                        name: "if-guard".to_string(),
                    })?;
                let branch = if c { then_branch } else { else_branch };
                for s in branch {
                    self.stmt(s, mode_of)?;
                }
                Ok(())
            }
            StmtKind::For { var, lo, hi, body } => {
                self.store.exec_count += 1;
                let lo = self.eval_int(lo, stmt)?;
                let hi = self.eval_int(hi, stmt)?;
                for i in lo..=hi {
                    self.store.bind(var.clone(), Value::Int(i));
                    for s in body {
                        self.stmt(s, mode_of)?;
                    }
                }
                self.store.vars.remove(var);
                Ok(())
            }
        }
    }

    fn concrete_dims(&mut self, ty: &TypeDecl, stmt: &Stmt) -> Result<Vec<usize>, RuntimeError> {
        let mut dims = Vec::with_capacity(ty.dims.len());
        for d in &ty.dims {
            let n = self.eval_int(d, stmt)?;
            dims.push(n.max(0) as usize);
        }
        Ok(dims)
    }

    fn eval_int(&mut self, e: &Expr, stmt: &Stmt) -> Result<i64, RuntimeError> {
        self.eval(e, stmt)?
            .as_int()
            .ok_or_else(|| RuntimeError::ShapeMismatch {
                name: "int expression".to_string(),
            })
    }

    fn assign(&mut self, target: &LValue, value: Value<T>, stmt: &Stmt) -> Result<(), RuntimeError> {
        if target.indices.is_empty() {
            let coerced = self.coerce_like(target, value)?;
            self.store.bind(target.name.clone(), coerced);
            return Ok(());
        }
        let mut idx = Vec::with_capacity(target.indices.len());
        for e in &target.indices {
            idx.push(self.eval_int(e, stmt)?);
        }
        let span = stmt.span;
        let name = target.name.clone();
        let mut slot = self
            .store
            .vars
            .get_mut(&name)
            .ok_or_else(|| RuntimeError::Unbound { name: name.clone() })?;
        for (depth, i) in idx.iter().enumerate() {
            let Value::Array(items) = slot else {
                return Err(RuntimeError::ShapeMismatch { name });
            };
            let len = items.len();
            if *i < 1 || *i as usize > len {
                return Err(RuntimeError::IndexOutOfBounds {
                    span,
                    name,
                    index: *i,
                    len,
                });
            }
            if depth + 1 == idx.len() {
                let cell = &mut items[*i as usize - 1];
                *cell = match (&*cell, value) {
                    (Value::Real(_), v) => Value::Real(v.as_scalar().ok_or(
                        RuntimeError::ShapeMismatch {
                            name: name.clone(),
                        },
                    )?),
                    (Value::Int(_), Value::Int(v)) => Value::Int(v),
                    (Value::Bool(_), Value::Bool(b)) => Value::Bool(b),
                    (Value::Int(_), v) => Value::Int(v.as_int().ok_or(
                        RuntimeError::ShapeMismatch {
                            name: name.clone(),
                        },
                    )?),
                    _ => return Err(RuntimeError::ShapeMismatch { name }),
                };
                return Ok(());
            }
            slot = &mut items[*i as usize - 1];
        }
        unreachable!()
    }

    /// Scalar assignments adopt the declared cell kind (int stays int,
    /// reals accept int values).
    fn coerce_like(&self, target: &LValue, value: Value<T>) -> Result<Value<T>, RuntimeError> {
        let existing = self.store.get(&target.name);
        Ok(match (existing, value) {
            (Some(Value::Real(_)), v @ (Value::Int(_) | Value::Bool(_))) => {
                Value::Real(v.as_scalar().unwrap())
            }
            (_, v) => v,
        })
    }

    fn tilde(
        &mut self,
        target: &LValue,
        dist: &DistCall,
        mode: StmtMode,
        stmt: &Stmt,
    ) -> Result<(), RuntimeError> {
        match mode {
            StmtMode::Density => {
                let value = self.eval(&target.as_expr(), stmt)?;
                let lp = self.score(dist, &value, stmt)?;
                self.store.target = self.store.target.add(&lp);
                Ok(())
            }
            StmtMode::Generative => {
                let drawn = self.draw(dist, stmt)?;
                self.assign(target, drawn, stmt)
            }
            StmtMode::Plain => {
                // data-level code never contains `~`; treat as a score of 0
                Ok(())
            }
        }
    }

    fn score(&mut self, dist: &DistCall, value: &Value<T>, stmt: &Stmt) -> Result<T, RuntimeError> {
        if dist.dist == DistName::Categorical {
            let k = value.as_int().ok_or_else(|| RuntimeError::ShapeMismatch {
                name: "categorical outcome".to_string(),
            })?;
            let weights = self.eval_real_array(&dist.args[0], stmt)?;
            return Ok(dist::lpmf_categorical(k, &weights)?);
        }
        let args: Vec<T> = self.eval_scalar_args(&dist.args, stmt)?;
        if dist.dist.is_discrete() {
            let k = value.as_int().ok_or_else(|| RuntimeError::ShapeMismatch {
                name: "discrete outcome".to_string(),
            })?;
            Ok(dist::lpmf_int(dist.dist, k, &args)?)
        } else {
            let x = value.as_scalar().ok_or_else(|| RuntimeError::ShapeMismatch {
                name: "real outcome".to_string(),
            })?;
            Ok(dist::lpdf_real(dist.dist, &x, &args)?)
        }
    }

    fn draw(&mut self, dist: &DistCall, stmt: &Stmt) -> Result<Value<T>, RuntimeError> {
        if dist.dist == DistName::Categorical {
            let weights: Vec<f64> = self
                .eval_real_array(&dist.args[0], stmt)?
                .iter()
                .map(|w| w.value())
                .collect();
            let k = dist::draw_categorical(&weights, &mut self.store.rng)?;
            return Ok(Value::Int(k));
        }
        let args: Vec<f64> = self
            .eval_scalar_args(&dist.args, stmt)?
            .iter()
            .map(|a| a.value())
            .collect();
        if dist.dist.is_discrete() {
            Ok(Value::Int(dist::draw_int(dist.dist, &args, &mut self.store.rng)?))
        } else {
            Ok(Value::real(dist::draw_real(dist.dist, &args, &mut self.store.rng)?))
        }
    }

    fn eval_scalar_args(&mut self, args: &[Expr], stmt: &Stmt) -> Result<Vec<T>, RuntimeError> {
        args.iter()
            .map(|a| {
                self.eval(a, stmt)?
                    .as_scalar()
                    .ok_or_else(|| RuntimeError::ShapeMismatch {
                        name: "distribution argument".to_string(),
                    })
            })
            .collect()
    }

    fn eval_real_array(&mut self, e: &Expr, stmt: &Stmt) -> Result<Vec<T>, RuntimeError> {
        match self.eval(e, stmt)? {
            Value::Array(items) => items
                .iter()
                .map(|v| {
                    v.as_scalar().ok_or_else(|| RuntimeError::ShapeMismatch {
                        name: "array argument".to_string(),
                    })
                })
                .collect(),
            _ => Err(RuntimeError::ShapeMismatch {
                name: "array argument".to_string(),
            }),
        }
    }

    fn eval(&mut self, e: &Expr, stmt: &Stmt) -> Result<Value<T>, RuntimeError> {
        match e {
            Expr::IntLit(v) => Ok(Value::Int(*v)),
            Expr::RealLit(v) => Ok(Value::real(*v)),
            Expr::BoolLit(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => self
                .store
                .get(name)
                .cloned()
                .ok_or_else(|| RuntimeError::Unbound { name: name.clone() }),
            Expr::Index(base, idx) => {
                let b = self.eval(base, stmt)?;
                let i = self.eval_int(idx, stmt)?;
                match b {
                    Value::Array(items) => {
                        if i < 1 || i as usize > items.len() {
                            Err(RuntimeError::IndexOutOfBounds {
                                span: stmt.span,
                                name: crate::frontend::expr_text(base),
                                index: i,
                                len: items.len(),
                            })
                        } else {
                            Ok(items[i as usize - 1].clone())
                        }
                    }
                    _ => Err(RuntimeError::ShapeMismatch {
                        name: crate::frontend::expr_text(base),
                    }),
                }
            }
            Expr::Unary(op, inner) => {
                let v = self.eval(inner, stmt)?;
                match op {
                    UnOp::Neg => match v {
                        Value::Int(i) => Ok(Value::Int(-i)),
                        Value::Real(r) => Ok(Value::Real(r.neg())),
                        _ => Err(RuntimeError::ShapeMismatch {
                            name: "negation".to_string(),
                        }),
                    },
                    UnOp::Not => Ok(Value::Bool(!v.as_bool().ok_or_else(|| {
                        RuntimeError::ShapeMismatch {
                            name: "logical not".to_string(),
                        }
                    })?)),
                }
            }
            Expr::Binary(op, a, b) => {
                let va = self.eval(a, stmt)?;
                let vb = self.eval(b, stmt)?;
                self.binop(*op, va, vb)
            }
            Expr::Cond(c, t, f) => {
                let cv = self
                    .eval(c, stmt)?
                    .as_bool()
                    .ok_or_else(|| RuntimeError::ShapeMismatch {
                        name: "ternary condition".to_string(),
                    })?;
                if cv {
                    self.eval(t, stmt)
                } else {
                    self.eval(f, stmt)
                }
            }
            Expr::Call(func, args) => self.call(*func, args, stmt),
            Expr::DistLpdf(dist, value, args) => {
                let v = self.eval(value, stmt)?;
                let call = DistCall::new(*dist, args.clone());
                Ok(Value::Real(self.score(&call, &v, stmt)?))
            }
        }
    }

    fn binop(&mut self, op: BinOp, a: Value<T>, b: Value<T>) -> Result<Value<T>, RuntimeError> {
        use BinOp::*;
        let mismatch = || RuntimeError::ShapeMismatch {
            name: format!("operator `{}`", op.symbol()),
        };
        match op {
            Add | Sub | Mul => {
                if let (Value::Int(x), Value::Int(y)) = (&a, &b) {
                    return Ok(Value::Int(match op {
                        Add => x + y,
                        Sub => x - y,
                        Mul => x * y,
                        _ => unreachable!(),
                    }));
                }
                let x = a.as_scalar().ok_or_else(mismatch)?;
                let y = b.as_scalar().ok_or_else(mismatch)?;
                Ok(Value::Real(match op {
                    Add => x.add(&y),
                    Sub => x.sub(&y),
                    Mul => x.mul(&y),
                    _ => unreachable!(),
                }))
            }
            Div => {
                let x = a.as_scalar().ok_or_else(mismatch)?;
                let y = b.as_scalar().ok_or_else(mismatch)?;
                Ok(Value::Real(x.div(&y)))
            }
            And | Or => {
                let x = a.as_bool().ok_or_else(mismatch)?;
                let y = b.as_bool().ok_or_else(mismatch)?;
                Ok(Value::Bool(if op == And { x && y } else { x || y }))
            }
            Eq | Ne | Lt | Le | Gt | Ge => {
                let result = match (&a, &b) {
                    (Value::Bool(x), Value::Bool(y)) => match op {
                        Eq => x == y,
                        Ne => x != y,
                        _ => return Err(mismatch()),
                    },
                    _ => {
                        let x = a.as_scalar().ok_or_else(mismatch)?.value();
                        let y = b.as_scalar().ok_or_else(mismatch)?.value();
                        match op {
                            Eq => x == y,
                            Ne => x != y,
                            Lt => x < y,
                            Le => x <= y,
                            Gt => x > y,
                            Ge => x >= y,
                            _ => unreachable!(),
                        }
                    }
                };
                Ok(Value::Bool(result))
            }
        }
    }

    fn call(&mut self, func: FuncName, args: &[Expr], stmt: &Stmt) -> Result<Value<T>, RuntimeError> {
        let mismatch = |name: &str| RuntimeError::ShapeMismatch {
            name: name.to_string(),
        };
        match func {
            FuncName::Log | FuncName::Exp | FuncName::Sqrt => {
                let x = self
                    .eval(&args[0], stmt)?
                    .as_scalar()
                    .ok_or_else(|| mismatch(func.name()))?;
                Ok(Value::Real(match func {
                    FuncName::Log => x.ln(),
                    FuncName::Exp => x.exp(),
                    FuncName::Sqrt => x.sqrt(),
                    _ => unreachable!(),
                }))
            }
            FuncName::Pow => {
                let x = self
                    .eval(&args[0], stmt)?
                    .as_scalar()
                    .ok_or_else(|| mismatch("pow"))?;
                let y = self
                    .eval(&args[1], stmt)?
                    .as_scalar()
                    .ok_or_else(|| mismatch("pow"))?;
                Ok(Value::Real(x.powf(&y)))
            }
            FuncName::LogSumExp => {
                let xs = self.eval_real_array(&args[0], stmt)?;
                Ok(Value::Real(dist::log_sum_exp(&xs)))
            }
            FuncName::Softmax => {
                let xs = self.eval_real_array(&args[0], stmt)?;
                Ok(Value::Array(
                    dist::softmax(&xs).into_iter().map(Value::Real).collect(),
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use approx::assert_relative_eq;

    fn run_density(src: &str) -> Store<f64> {
        let p = parse(src).unwrap();
        let mut store = Store::new();
        exec(&p.stmts, &mut store, StmtMode::Density).unwrap();
        store
    }

    #[test]
    fn assignment_updates_store() {
        let store = run_density("real x = 0.0; x = 1.0;");
        assert_eq!(store.get("x"), Some(&Value::Real(1.0)));
    }

    #[test]
    fn density_mode_accumulates_target() {
        let p = parse("real y; y ~ normal(0, 1);").unwrap();
        let mut store = Store::new();
        store.bind("y", Value::Real(1.0));
        exec(&p.stmts, &mut store, StmtMode::Density).unwrap();
        assert_relative_eq!(store.target, -1.4189385332046727, epsilon = 1e-10);
    }

    #[test]
    fn funnel_target_is_closed_form_sum() {
        let src = "\
real y ~ normal(0, 3);
real[9] x;
for (i in 1:9) {
  x[i] ~ normal(0, exp(y / 2));
}
";
        let p = parse(src).unwrap();
        let mut store = Store::new();
        store.bind("y", Value::Real(0.0));
        store.bind("x", Value::Array(vec![Value::Real(0.0); 9]));
        exec(&p.stmts, &mut store, StmtMode::Density).unwrap();
        // independent oracle: lognormal terms evaluated by hand
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let expected = (-(3.0f64).ln() - 0.5 * ln_2pi) + 9.0 * (-0.5 * ln_2pi);
        assert_relative_eq!(store.target, expected, epsilon = 1e-12);
    }

    #[test]
    fn generative_mode_draws_reproducibly() {
        let src = "real z ~ normal(0, 1); real w = z * z;";
        let p = parse(src).unwrap();
        let mut a = Store::<f64>::with_seed(7);
        exec(&p.stmts, &mut a, StmtMode::Generative).unwrap();
        let mut b = Store::<f64>::with_seed(7);
        exec(&p.stmts, &mut b, StmtMode::Generative).unwrap();
        assert_eq!(a.get("z"), b.get("z"));
        let z = a.get("z").unwrap().as_scalar().unwrap();
        let w = a.get("w").unwrap().as_scalar().unwrap();
        assert_relative_eq!(w, z * z, epsilon = 1e-15);
    }

    #[test]
    fn loops_and_indexing() {
        let store = run_density(
            "data int N = 4; real[N] v; for (i in 1:N) { v[i] = i * 2; } real s = v[1] + v[4];",
        );
        assert_eq!(store.get("s"), Some(&Value::Real(10.0)));
    }

    #[test]
    fn out_of_bounds_index_is_reported() {
        let p = parse("real[2] v; real x = v[3];").unwrap();
        let mut store = Store::<f64>::new();
        let err = exec(&p.stmts, &mut store, StmtMode::Density).unwrap_err();
        assert!(matches!(err, RuntimeError::IndexOutOfBounds { index: 3, .. }));
    }

    #[test]
    fn invalid_scale_is_reported() {
        let p = parse("real y; y ~ normal(0, -1);").unwrap();
        let mut store = Store::new();
        store.bind("y", Value::Real(0.0));
        let err = exec(&p.stmts, &mut store, StmtMode::Density).unwrap_err();
        assert!(matches!(err, RuntimeError::InvalidParameter(_)));
    }

    #[test]
    fn hard_observation_yields_non_finite_target() {
        let store = run_density("bool b = true; target += b ? -1e30 : 0.0;");
        assert_eq!(store.target, -1e30);
    }

    #[test]
    fn dual_execution_matches_plain_values() {
        let src = "real a = 2.0; real b = log(a) + exp(a / 4); real c = pow(a, 3);";
        let p = parse(src).unwrap();
        let mut plain = Store::<f64>::new();
        exec(&p.stmts, &mut plain, StmtMode::Density).unwrap();
        let mut dual = Store::<Dual>::new();
        exec(&p.stmts, &mut dual, StmtMode::Density).unwrap();
        for name in ["b", "c"] {
            let x = plain.get(name).unwrap().as_scalar().unwrap();
            let y = dual.get(name).unwrap().as_scalar().unwrap();
            assert_relative_eq!(x, y.value(), epsilon = 1e-15);
        }
    }
}
