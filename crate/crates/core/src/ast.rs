//! Abstract syntax for the slic language.
//!
//! A program is a flat sequence of statements: declarations (optionally
//! initialised by an expression or a distribution draw), assignments,
//! `~` statements, `target +=` statements, conditionals and bounded
//! `for` loops. Declarations are only permitted at the top level.

use std::fmt;

/// Byte range into the original source, used for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

/// Scalar base types of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseType {
    Int,
    Real,
    Bool,
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseType::Int => write!(f, "int"),
            BaseType::Real => write!(f, "real"),
            BaseType::Bool => write!(f, "bool"),
        }
    }
}

/// Execution level of a declaration, either written by the user or inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Data,
    Model,
    GenQuant,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Data, Level::Model, Level::GenQuant];

    pub fn join(self, other: Level) -> Level {
        self.max(other)
    }

    /// Relative runtime cost of placing a variable at this level. Data is
    /// evaluated once, generated quantities once per draw, and model-level
    /// code once per leapfrog step.
    pub fn cost(self) -> u8 {
        match self {
            Level::Data => 0,
            Level::GenQuant => 1,
            Level::Model => 2,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Data => write!(f, "data"),
            Level::Model => write!(f, "model"),
            Level::GenQuant => write!(f, "genquant"),
        }
    }
}

/// Built-in math functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuncName {
    Log,
    Exp,
    Sqrt,
    Pow,
    /// `log_sum_exp(xs)` over a real array.
    LogSumExp,
    /// `softmax(xs)` over a real array, yielding a probability vector.
    Softmax,
}

impl FuncName {
    pub fn arity(self) -> usize {
        match self {
            FuncName::Pow => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FuncName::Log => "log",
            FuncName::Exp => "exp",
            FuncName::Sqrt => "sqrt",
            FuncName::Pow => "pow",
            FuncName::LogSumExp => "log_sum_exp",
            FuncName::Softmax => "softmax",
        }
    }
}

/// Distributions usable on the right of `~`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistName {
    Normal,
    Cauchy,
    Logistic,
    Uniform,
    Gamma,
    Bernoulli,
    Categorical,
    Binomial,
}

impl DistName {
    pub const ALL: [DistName; 8] = [
        DistName::Normal,
        DistName::Cauchy,
        DistName::Logistic,
        DistName::Uniform,
        DistName::Gamma,
        DistName::Bernoulli,
        DistName::Categorical,
        DistName::Binomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistName::Normal => "normal",
            DistName::Cauchy => "cauchy",
            DistName::Logistic => "logistic",
            DistName::Uniform => "uniform",
            DistName::Gamma => "gamma",
            DistName::Bernoulli => "bernoulli",
            DistName::Categorical => "categorical",
            DistName::Binomial => "binomial",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            DistName::Bernoulli | DistName::Categorical => 1,
            _ => 2,
        }
    }

    /// Discrete distributions have integer-valued outcomes.
    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            DistName::Bernoulli | DistName::Categorical | DistName::Binomial
        )
    }

    /// Name of the log density (or mass) function for this distribution.
    pub fn lpdf_name(self) -> String {
        if self.is_discrete() {
            format!("{}_lpmf", self.name())
        } else {
            format!("{}_lpdf", self.name())
        }
    }

    pub fn from_name(s: &str) -> Option<DistName> {
        Self::ALL.iter().copied().find(|d| d.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

/// Expressions. Equality is structural; `f64` literals compare bitwise
/// through their numeric value (literals are never NaN).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IntLit(i64),
    RealLit(f64),
    BoolLit(bool),
    Var(String),
    /// 1-based array indexing, `base[index]`.
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `cond ? then : otherwise`
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(FuncName, Vec<Expr>),
    /// Log density of a distribution at a value, e.g. `normal_lpdf(x, 0, 1)`.
    DistLpdf(DistName, Box<Expr>, Vec<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn int(v: i64) -> Expr {
        Expr::IntLit(v)
    }

    pub fn real(v: f64) -> Expr {
        Expr::RealLit(v)
    }

    pub fn index(base: Expr, idx: Expr) -> Expr {
        Expr::Index(Box::new(base), Box::new(idx))
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Collects free variable names into `out`, in first-occurrence order.
    pub fn free_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::IntLit(_) | Expr::RealLit(_) | Expr::BoolLit(_) => {}
            Expr::Var(name) => {
                if !out.iter().any(|v| v == name) {
                    out.push(name.clone());
                }
            }
            Expr::Index(base, idx) => {
                base.free_vars(out);
                idx.free_vars(out);
            }
            Expr::Unary(_, e) => e.free_vars(out),
            Expr::Binary(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Expr::Cond(c, t, e) => {
                c.free_vars(out);
                t.free_vars(out);
                e.free_vars(out);
            }
            Expr::Call(_, args) => {
                for a in args {
                    a.free_vars(out);
                }
            }
            Expr::DistLpdf(_, value, args) => {
                value.free_vars(out);
                for a in args {
                    a.free_vars(out);
                }
            }
        }
    }

    /// Replaces every free occurrence of `name` with `value`.
    pub fn substitute(&self, name: &str, value: &Expr) -> Expr {
        match self {
            Expr::Var(n) if n == name => value.clone(),
            Expr::IntLit(_) | Expr::RealLit(_) | Expr::BoolLit(_) | Expr::Var(_) => self.clone(),
            Expr::Index(base, idx) => Expr::Index(
                Box::new(base.substitute(name, value)),
                Box::new(idx.substitute(name, value)),
            ),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.substitute(name, value))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(name, value)),
                Box::new(b.substitute(name, value)),
            ),
            Expr::Cond(c, t, e) => Expr::Cond(
                Box::new(c.substitute(name, value)),
                Box::new(t.substitute(name, value)),
                Box::new(e.substitute(name, value)),
            ),
            Expr::Call(f, args) => Expr::Call(
                *f,
                args.iter().map(|a| a.substitute(name, value)).collect(),
            ),
            Expr::DistLpdf(d, v, args) => Expr::DistLpdf(
                *d,
                Box::new(v.substitute(name, value)),
                args.iter().map(|a| a.substitute(name, value)).collect(),
            ),
        }
    }
}

/// A distribution call, `dist(arg1, ..., argn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistCall {
    pub dist: DistName,
    pub args: Vec<Expr>,
}

impl DistCall {
    pub fn new(dist: DistName, args: Vec<Expr>) -> Self {
        DistCall { dist, args }
    }

    pub fn free_vars(&self, out: &mut Vec<String>) {
        for a in &self.args {
            a.free_vars(out);
        }
    }
}

/// Assignment target: a variable, possibly indexed (`x`, `x[i]`, `x[i][j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct LValue {
    pub name: String,
    pub indices: Vec<Expr>,
}

impl LValue {
    pub fn var(name: impl Into<String>) -> LValue {
        LValue {
            name: name.into(),
            indices: Vec::new(),
        }
    }

    /// Variables read while locating the target (index expressions only).
    pub fn index_vars(&self, out: &mut Vec<String>) {
        for ix in &self.indices {
            ix.free_vars(out);
        }
    }

    pub fn as_expr(&self) -> Expr {
        let mut e = Expr::Var(self.name.clone());
        for ix in &self.indices {
            e = Expr::index(e, ix.clone());
        }
        e
    }
}

/// Declared type with optional bounds and array dimensions,
/// e.g. `real<lower=0>[N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub base: BaseType,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub dims: Vec<Expr>,
}

impl TypeDecl {
    pub fn scalar(base: BaseType) -> Self {
        TypeDecl {
            base,
            lower: None,
            upper: None,
            dims: Vec::new(),
        }
    }

    pub fn is_array(&self) -> bool {
        !self.dims.is_empty()
    }

    /// A finite integer support `[lower, upper]`, when both bounds are
    /// present on an int declaration.
    pub fn finite_int_support(&self) -> Option<(i64, i64)> {
        if self.base != BaseType::Int {
            return None;
        }
        match (self.lower, self.upper) {
            (Some(lo), Some(hi)) if lo <= hi => Some((lo as i64, hi as i64)),
            _ => None,
        }
    }
}

/// Initialiser attached to a declaration.
#[derive(Debug, Clone, PartialEq)]
pub enum DeclInit {
    /// `type name = expr;`
    Expr(Expr),
    /// `type name ~ dist(args);`
    Dist(DistCall),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Decl {
        annotation: Option<Level>,
        ty: TypeDecl,
        name: String,
        init: Option<DeclInit>,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    Tilde {
        target: LValue,
        dist: DistCall,
    },
    TargetPlus {
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    For {
        var: String,
        lo: Expr,
        hi: Expr,
        body: Vec<Stmt>,
    },
}

/// A statement together with its source span. Equality ignores spans so
/// that `parse(pretty(p)) == p` holds structurally.
#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            span: Span::default(),
        }
    }
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// A parsed program: an ordered statement sequence plus the declaration
/// table built during name resolution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub stmts: Vec<Stmt>,
}

impl Program {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Program { stmts }
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    /// All top-level declarations, in order.
    pub fn decls(&self) -> impl Iterator<Item = (&str, &TypeDecl, Option<Level>, Option<&DeclInit>)> {
        self.stmts.iter().filter_map(|s| match &s.kind {
            StmtKind::Decl {
                annotation,
                ty,
                name,
                init,
            } => Some((name.as_str(), ty, *annotation, init.as_ref())),
            _ => None,
        })
    }

    pub fn decl_of(&self, name: &str) -> Option<(&TypeDecl, Option<Level>)> {
        self.decls()
            .find(|(n, _, _, _)| *n == name)
            .map(|(_, ty, ann, _)| (ty, ann))
    }

    /// Names declared with the `data` annotation.
    pub fn data_names(&self) -> Vec<String> {
        self.decls()
            .filter(|(_, _, ann, _)| *ann == Some(Level::Data))
            .map(|(n, _, _, _)| n.to_string())
            .collect()
    }

    /// Names that appear as the target of a `~` statement (including
    /// declaration initialisers).
    pub fn sampled_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Decl {
                        name,
                        init: Some(DeclInit::Dist(_)),
                        ..
                    } => {
                        if !out.iter().any(|n| n == name) {
                            out.push(name.clone());
                        }
                    }
                    StmtKind::Tilde { target, .. } => {
                        if !out.iter().any(|n| n == &target.name) {
                            out.push(target.name.clone());
                        }
                    }
                    StmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        walk(then_branch, out);
                        walk(else_branch, out);
                    }
                    StmtKind::For { body, .. } => walk(body, out),
                    _ => {}
                }
            }
        }
        walk(&self.stmts, &mut out);
        out
    }

    /// Names that are written by an assignment or declaration initialiser
    /// expression (deterministic definitions).
    pub fn assigned_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Decl {
                        name,
                        init: Some(DeclInit::Expr(_)),
                        ..
                    } => {
                        if !out.iter().any(|n| n == name) {
                            out.push(name.clone());
                        }
                    }
                    StmtKind::Assign { target, .. } => {
                        if !out.iter().any(|n| n == &target.name) {
                            out.push(target.name.clone());
                        }
                    }
                    StmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        walk(then_branch, out);
                        walk(else_branch, out);
                    }
                    StmtKind::For { body, .. } => walk(body, out),
                    _ => {}
                }
            }
        }
        walk(&self.stmts, &mut out);
        out
    }

    /// Picks a variable name not declared in the program, derived from `base`.
    pub fn fresh_name(&self, base: &str) -> String {
        let declared: Vec<&str> = self.decls().map(|(n, _, _, _)| n).collect();
        if !declared.contains(&base) {
            return base.to_string();
        }
        for i in 2.. {
            let candidate = format!("{base}_{i}");
            if !declared.iter().any(|n| *n == candidate) {
                return candidate;
            }
        }
        unreachable!()
    }
}
