//! Source-to-source reparameterisation of location-scale sites.
//!
//! A site `z ~ fam(loc, scale)` with `z` an unconstrained model-level
//! parameter rewrites to the non-centred form
//! `z_raw ~ fam(0, 1); z = loc + scale * z_raw;`
//! or, for the normal family, to the lambda-interpolated form
//! `z_tilde ~ normal(lambda * loc, scale^lambda);`
//! `z = loc + scale^(1 - lambda) * (z_tilde - lambda * loc);`
//! which is centred at `lambda = 1` and fully non-centred at
//! `lambda = 0`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ast::*;
use crate::levels::TypedProgram;
use crate::runtime::{RuntimeError, Scalar, Store};

#[derive(Debug, Error)]
pub enum ReparamError {
    #[error("`{name}` is not an eligible site: {reason}")]
    IneligibleSite { name: String, reason: String },
    #[error("lambda for `{name}` must lie in [0, 1], got {value}")]
    LambdaOutOfRange { name: String, value: f64 },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// A reparameterisable statement: `var ~ family(loc, scale)` on an
/// unconstrained model parameter, possibly indexed inside loops.
#[derive(Debug, Clone)]
pub struct EligibleSite {
    pub var: String,
    pub family: DistName,
    pub loc: Expr,
    pub scale: Expr,
    /// Loop context (var, lo, hi) enclosing the site, outermost first.
    pub loops: Vec<(String, Expr, Expr)>,
    /// Index expressions on the target (empty for scalar sites).
    pub indices: Vec<Expr>,
    path: Vec<usize>,
}

impl EligibleSite {
    /// Flattened element count; scalar sites have one element. Needs the
    /// site's array dimensions to be integer literals or data values.
    pub fn element_count(&self, typed: &TypedProgram, data: &Store<f64>) -> Result<usize, ReparamError> {
        let (ty, _) = typed.program.decl_of(&self.var).expect("declared");
        let mut n = 1usize;
        for d in &ty.dims {
            let stmt = Stmt::new(StmtKind::TargetPlus { value: d.clone() });
            let mut probe = data.clone();
            crate::runtime::exec(&[stmt], &mut probe, crate::runtime::StmtMode::Plain)?;
            n *= probe.target as usize;
        }
        Ok(n)
    }
}

const LOC_SCALE_FAMILIES: [DistName; 3] = [DistName::Normal, DistName::Cauchy, DistName::Logistic];

/// Finds every eligible location-scale site in the model.
pub fn find_sites(typed: &TypedProgram) -> Vec<EligibleSite> {
    let params = typed.model_params();
    let mut sites = Vec::new();
    walk_sites(
        typed,
        &typed.program.stmts,
        &mut Vec::new(),
        &mut Vec::new(),
        false,
        &params,
        &mut sites,
    );
    sites
}

#[allow(clippy::too_many_arguments)]
fn walk_sites(
    typed: &TypedProgram,
    stmts: &[Stmt],
    loops: &mut Vec<(String, Expr, Expr)>,
    path: &mut Vec<usize>,
    under_if: bool,
    params: &[String],
    out: &mut Vec<EligibleSite>,
) {
    for (i, stmt) in stmts.iter().enumerate() {
        path.push(i);
        match &stmt.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                walk_sites(typed, then_branch, loops, path, true, params, out);
                walk_sites(typed, else_branch, loops, path, true, params, out);
            }
            StmtKind::For { var, lo, hi, body } => {
                loops.push((var.clone(), lo.clone(), hi.clone()));
                walk_sites(typed, body, loops, path, under_if, params, out);
                loops.pop();
            }
            StmtKind::Tilde { target, dist } => {
                if let Some(site) =
                    classify(typed, &target.name, &target.indices, dist, loops, path, under_if, params)
                {
                    out.push(site);
                }
            }
            StmtKind::Decl {
                name,
                init: Some(DeclInit::Dist(dist)),
                ..
            } => {
                if let Some(site) = classify(typed, name, &[], dist, loops, path, under_if, params) {
                    out.push(site);
                }
            }
            _ => {}
        }
        path.pop();
    }
}

#[allow(clippy::too_many_arguments)]
fn classify(
    typed: &TypedProgram,
    name: &str,
    indices: &[Expr],
    dist: &DistCall,
    loops: &[(String, Expr, Expr)],
    path: &[usize],
    under_if: bool,
    params: &[String],
) -> Option<EligibleSite> {
    if under_if || !LOC_SCALE_FAMILIES.contains(&dist.dist) {
        return None;
    }
    if !params.iter().any(|p| p == name) {
        return None;
    }
    let (ty, _) = typed.program.decl_of(name)?;
    if ty.lower.is_some() || ty.upper.is_some() {
        return None;
    }
    // loc and scale must not mention the variable itself
    let mut fv = Vec::new();
    dist.args[0].free_vars(&mut fv);
    dist.args[1].free_vars(&mut fv);
    if fv.iter().any(|v| v == name) {
        return None;
    }
    // array sites must be indexed exactly by the loop structure
    if ty.dims.len() != indices.len() {
        return None;
    }
    Some(EligibleSite {
        var: name.to_string(),
        family: dist.dist,
        loc: dist.args[0].clone(),
        scale: dist.args[1].clone(),
        loops: loops.to_vec(),
        indices: indices.to_vec(),
        path: path.to_vec(),
    })
}

fn select_sites(
    typed: &TypedProgram,
    names: Option<&[String]>,
) -> Result<Vec<EligibleSite>, ReparamError> {
    let sites = find_sites(typed);
    match names {
        None => Ok(sites),
        Some(names) => {
            let mut selected = Vec::new();
            for n in names {
                match sites.iter().find(|s| &s.var == n) {
                    Some(s) => selected.push(s.clone()),
                    None => {
                        return Err(ReparamError::IneligibleSite {
                            name: n.clone(),
                            reason: "not a location-scale prior on an unconstrained \
                                     model parameter (or it sits under a conditional)"
                                .to_string(),
                        })
                    }
                }
            }
            Ok(selected)
        }
    }
}

/// Per-site lambda values: one scalar, or one value per array element.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    Scalar(f64),
    PerElement(Vec<f64>),
}

impl LambdaSpec {
    fn validate(&self, name: &str) -> Result<(), ReparamError> {
        let check = |v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ReparamError::LambdaOutOfRange {
                    name: name.to_string(),
                    value: v,
                })
            }
        };
        match self {
            LambdaSpec::Scalar(v) => check(*v),
            LambdaSpec::PerElement(vs) => vs.iter().copied().try_for_each(check),
        }
    }

    fn uniform(&self) -> Option<f64> {
        match self {
            LambdaSpec::Scalar(v) => Some(*v),
            LambdaSpec::PerElement(vs) => {
                let first = *vs.first()?;
                vs.iter().all(|v| *v == first).then_some(first)
            }
        }
    }
}

/// Interpolation coefficients per site, keyed by variable name.
pub type LambdaMap = BTreeMap<String, LambdaSpec>;

/// Rewrites the selected sites (all eligible ones when `names` is None)
/// to the non-centred parameterisation.
pub fn ncp(typed: &TypedProgram, names: Option<&[String]>) -> Result<Program, ReparamError> {
    ncp_with_mapping(typed, names).map(|(p, _)| p)
}

/// Like [`ncp`], also returning the `(variable, raw)` name pairs.
pub fn ncp_with_mapping(
    typed: &TypedProgram,
    names: Option<&[String]>,
) -> Result<(Program, Vec<(String, String)>), ReparamError> {
    let sites = select_sites(typed, names)?;
    let mut program = typed.program.clone();
    let mut mapping = Vec::new();
    let mut work = Vec::new();
    for site in &sites {
        let base = format!("{}_raw", site.var);
        let mut raw = base.clone();
        let mut k = 2;
        while program.decl_of(&raw).is_some() || mapping.iter().any(|(_, r)| r == &raw) {
            raw = format!("{base}_{k}");
            k += 1;
        }
        mapping.push((site.var.clone(), raw.clone()));
        work.push((site.clone(), raw));
    }
    // rewrite deepest-last sites first so recorded paths stay valid
    work.sort_by(|a, b| b.0.path.cmp(&a.0.path));
    for (site, raw) in work {
        program = rewrite_site(&program, &site, &SiteForm::NonCentred { raw });
    }
    Ok((program, mapping))
}

/// Rewrites sites to the lambda-interpolated family. `lambda = 1` leaves
/// a site unchanged; `lambda = 0` produces exactly the [`ncp`] form.
/// Only the normal family supports interior lambda values.
pub fn vip(typed: &TypedProgram, lambda: &LambdaMap) -> Result<Program, ReparamError> {
    let sites = find_sites(typed);
    let program = typed.program.clone();
    let mut work: Vec<(EligibleSite, SiteForm)> = Vec::new();
    for (name, spec) in lambda {
        spec.validate(name)?;
        let site = sites.iter().find(|s| &s.var == name).ok_or_else(|| {
            ReparamError::IneligibleSite {
                name: name.clone(),
                reason: "not an eligible site".to_string(),
            }
        })?;
        if spec.uniform() == Some(1.0) {
            continue; // centred endpoint: unchanged
        }
        if spec.uniform() == Some(0.0) {
            let raw = program.fresh_name(&format!("{}_raw", site.var));
            work.push((site.clone(), SiteForm::NonCentred { raw }));
            continue;
        }
        if site.family != DistName::Normal {
            return Err(ReparamError::IneligibleSite {
                name: name.clone(),
                reason: "interior lambda requires the normal family".to_string(),
            });
        }
        let tilde = program.fresh_name(&format!("{}_tilde", site.var));
        let lam = match spec {
            LambdaSpec::Scalar(v) => LambdaExpr::Const(*v),
            LambdaSpec::PerElement(vs) => {
                let lam_name = program.fresh_name(&format!("_lam_{}", site.var));
                LambdaExpr::Array {
                    name: lam_name,
                    values: vs.clone(),
                }
            }
        };
        work.push((site.clone(), SiteForm::Interpolated { tilde, lam }));
    }
    work.sort_by(|a, b| b.0.path.cmp(&a.0.path));
    let mut program = program;
    for (site, form) in &work {
        program = rewrite_site(&program, site, form);
    }
    Ok(program)
}

/// Rewrites sites so that lambda is read from data variables named
/// `_vip_lam_<var>`, one scalar or array per site. Used by the lambda
/// optimiser, which treats those inputs as active.
pub fn vip_with_lambda_vars(
    typed: &TypedProgram,
    sites: &[EligibleSite],
) -> Result<(Program, Vec<(String, String)>), ReparamError> {
    let program = typed.program.clone();
    let mut lambda_vars = Vec::new();
    let mut work = Vec::new();
    for site in sites {
        if site.family != DistName::Normal {
            continue;
        }
        let tilde = program.fresh_name(&format!("{}_tilde", site.var));
        let lam_name = program.fresh_name(&format!("_vip_lam_{}", site.var));
        work.push((
            site.clone(),
            SiteForm::Interpolated {
                tilde,
                lam: LambdaExpr::DataVar {
                    name: lam_name.clone(),
                    indexed: !site.indices.is_empty(),
                },
            },
        ));
        lambda_vars.push((site.var.clone(), lam_name));
    }
    work.sort_by(|a, b| b.0.path.cmp(&a.0.path));
    let mut program = program;
    for (site, form) in &work {
        program = rewrite_site(&program, site, form);
    }
    Ok((program, lambda_vars))
}

enum LambdaExpr {
    Const(f64),
    Array { name: String, values: Vec<f64> },
    DataVar { name: String, indexed: bool },
}

impl LambdaExpr {
    fn expr(&self, indices: &[Expr]) -> Expr {
        match self {
            LambdaExpr::Const(v) => Expr::real(*v),
            LambdaExpr::Array { name, .. } | LambdaExpr::DataVar { name, indexed: true } => {
                let mut e = Expr::var(name.clone());
                for ix in indices {
                    e = Expr::index(e, ix.clone());
                }
                e
            }
            LambdaExpr::DataVar { name, indexed: false } => Expr::var(name.clone()),
        }
    }
}

enum SiteForm {
    NonCentred { raw: String },
    Interpolated { tilde: String, lam: LambdaExpr },
}

/// Splices the rewritten site into the program: a fresh auxiliary
/// declaration next to the variable's declaration, the `~` statement
/// redirected to the auxiliary, and the reconstruction assignment
/// immediately after it.
fn rewrite_site(program: &Program, site: &EligibleSite, form: &SiteForm) -> Program {
    let mut out = program.clone();

    // auxiliary declaration mirrors the variable's shape
    let (ty, _) = program.decl_of(&site.var).expect("declared");
    let aux_name = match form {
        SiteForm::NonCentred { raw } => raw.clone(),
        SiteForm::Interpolated { tilde, .. } => tilde.clone(),
    };
    let aux_decl = Stmt::new(StmtKind::Decl {
        annotation: None,
        ty: TypeDecl {
            base: BaseType::Real,
            lower: None,
            upper: None,
            dims: ty.dims.clone(),
        },
        name: aux_name.clone(),
        init: None,
    });

    // lambda inputs: element assignments for literal arrays, or a data
    // declaration when the optimiser supplies the values
    let mut lam_stmts = Vec::new();
    if let SiteForm::Interpolated {
        lam: LambdaExpr::DataVar { name, .. },
        ..
    } = form
    {
        lam_stmts.push(Stmt::new(StmtKind::Decl {
            annotation: Some(Level::Data),
            ty: TypeDecl {
                base: BaseType::Real,
                lower: None,
                upper: None,
                dims: ty.dims.clone(),
            },
            name: name.clone(),
            init: None,
        }));
    }
    if let SiteForm::Interpolated {
        lam: LambdaExpr::Array { name, values },
        ..
    } = form
    {
        lam_stmts.push(Stmt::new(StmtKind::Decl {
            annotation: None,
            ty: TypeDecl {
                base: BaseType::Real,
                lower: None,
                upper: None,
                dims: vec![Expr::int(values.len() as i64)],
            },
            name: name.clone(),
            init: None,
        }));
        for (i, v) in values.iter().enumerate() {
            lam_stmts.push(Stmt::new(StmtKind::Assign {
                target: LValue {
                    name: name.clone(),
                    indices: vec![Expr::int(i as i64 + 1)],
                },
                value: Expr::real(*v),
            }));
        }
    }

    // the replacement statements at the site
    let aux_target = LValue {
        name: aux_name.clone(),
        indices: site.indices.clone(),
    };
    let var_target = LValue {
        name: site.var.clone(),
        indices: site.indices.clone(),
    };
    let aux_expr = aux_target.as_expr();
    let replacement = match form {
        SiteForm::NonCentred { .. } => {
            // aux ~ fam(0, 1); var = loc + scale * aux;
            vec![
                Stmt::new(StmtKind::Tilde {
                    target: aux_target,
                    dist: DistCall::new(site.family, vec![Expr::int(0), Expr::int(1)]),
                }),
                Stmt::new(StmtKind::Assign {
                    target: var_target,
                    value: Expr::bin(
                        BinOp::Add,
                        site.loc.clone(),
                        Expr::bin(BinOp::Mul, site.scale.clone(), aux_expr),
                    ),
                }),
            ]
        }
        SiteForm::Interpolated { lam, .. } => {
            let lam_e = lam.expr(&site.indices);
            // aux ~ normal(lam * loc, scale^lam);
            // var = loc + scale^(1 - lam) * (aux - lam * loc);
            let mean = Expr::bin(BinOp::Mul, lam_e.clone(), site.loc.clone());
            let sd = Expr::Call(FuncName::Pow, vec![site.scale.clone(), lam_e.clone()]);
            let residual = Expr::bin(BinOp::Sub, aux_expr, mean.clone());
            let scale_pow = Expr::Call(
                FuncName::Pow,
                vec![
                    site.scale.clone(),
                    Expr::bin(BinOp::Sub, Expr::int(1), lam_e),
                ],
            );
            vec![
                Stmt::new(StmtKind::Tilde {
                    target: aux_target,
                    dist: DistCall::new(DistName::Normal, vec![mean, sd]),
                }),
                Stmt::new(StmtKind::Assign {
                    target: var_target,
                    value: Expr::bin(
                        BinOp::Add,
                        site.loc.clone(),
                        Expr::bin(BinOp::Mul, scale_pow, residual),
                    ),
                }),
            ]
        }
    };

    // splice: replace the site statement (by path), strip the prior off
    // the variable's declaration, insert the auxiliary declaration
    out.stmts = splice(&out.stmts, &site.path, &replacement);
    let mut rebuilt = Vec::new();
    for stmt in out.stmts {
        match &stmt.kind {
            StmtKind::Decl {
                annotation,
                ty,
                name,
                init,
            } if name == &site.var => {
                rebuilt.extend(lam_stmts.clone());
                rebuilt.push(aux_decl.clone());
                // keep the declaration; its prior (if it carried one) has
                // been replaced by the site rewrite
                let stripped = matches!(init, Some(DeclInit::Dist(_)));
                rebuilt.push(Stmt {
                    kind: StmtKind::Decl {
                        annotation: *annotation,
                        ty: ty.clone(),
                        name: name.clone(),
                        init: if stripped { None } else { init.clone() },
                    },
                    span: stmt.span,
                });
                lam_stmts.clear();
            }
            _ => rebuilt.push(stmt),
        }
    }
    Program::new(rebuilt)
}

/// Replaces the statement at `path` with `replacement` statements. A
/// declaration site keeps its declaration (handled by the caller) and
/// contributes only the replacement statements here.
fn splice(stmts: &[Stmt], path: &[usize], replacement: &[Stmt]) -> Vec<Stmt> {
    let mut out = Vec::new();
    for (i, stmt) in stmts.iter().enumerate() {
        if path.len() == 1 && i == path[0] {
            match &stmt.kind {
                StmtKind::Decl { .. } => {
                    // declaration handled by the caller; emit the
                    // replacement in place of its prior
                    out.push(stmt.clone());
                    out.extend(replacement.iter().cloned());
                }
                _ => out.extend(replacement.iter().cloned()),
            }
            continue;
        }
        if !path.is_empty() && i == path[0] && path.len() > 1 {
            match &stmt.kind {
                StmtKind::For { var, lo, hi, body } => {
                    out.push(Stmt {
                        kind: StmtKind::For {
                            var: var.clone(),
                            lo: lo.clone(),
                            hi: hi.clone(),
                            body: splice(body, &path[1..], replacement),
                        },
                        span: stmt.span,
                    });
                }
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    out.push(Stmt {
                        kind: StmtKind::If {
                            cond: cond.clone(),
                            then_branch: splice(then_branch, &path[1..], replacement),
                            else_branch: splice(else_branch, &path[1..], replacement),
                        },
                        span: stmt.span,
                    });
                }
                _ => out.push(stmt.clone()),
            }
            continue;
        }
        out.push(stmt.clone());
    }
    out
}

/// Evaluates a site's loc and scale for given element indices, against a
/// store holding the current constrained values.
pub fn eval_site_loc_scale<T: Scalar>(
    site: &EligibleSite,
    store: &mut Store<T>,
    element: &[i64],
) -> Result<(T, T), RuntimeError> {
    // bind loop variables to the element's indices
    for ((var, _, _), value) in site.loops.iter().zip(element) {
        store.bind(var.clone(), crate::runtime::Value::Int(*value));
    }
    let stmt = Stmt::new(StmtKind::TargetPlus {
        value: Expr::int(0),
    });
    let loc = eval_expr(&site.loc, store, &stmt)?;
    let scale = eval_expr(&site.scale, store, &stmt)?;
    Ok((loc, scale))
}

fn eval_expr<T: Scalar>(e: &Expr, store: &mut Store<T>, _anchor: &Stmt) -> Result<T, RuntimeError> {
    let probe = Stmt::new(StmtKind::Assign {
        target: LValue::var("_probe".to_string()),
        value: e.clone(),
    });
    crate::runtime::exec(std::slice::from_ref(&probe), store, crate::runtime::StmtMode::Plain)?;
    store
        .get("_probe")
        .and_then(|v| v.as_scalar())
        .ok_or_else(|| RuntimeError::Unbound {
            name: "_probe".to_string(),
        })
}

// ---------------------------------------------------------------------------
// lambda selection by ELBO ascent

use crate::inference::{optimize_elbo, Guide, InferenceError, LambdaVar, ViConfig};
use crate::model::Model;

#[derive(Debug, Clone)]
pub struct VipOutcome {
    pub lambda: LambdaMap,
    pub guide: Guide,
    pub elbo_trace: Vec<f64>,
}

/// Jointly ascends the ELBO of the lambda-parameterised model over the
/// mean-field guide and the logistic-squashed lambdas, one lambda per
/// site element.
pub fn vip_optimize(
    typed: &TypedProgram,
    data: &Store<f64>,
    config: &ViConfig,
) -> Result<VipOutcome, InferenceError> {
    let sites: Vec<EligibleSite> = find_sites(typed)
        .into_iter()
        .filter(|s| s.family == DistName::Normal)
        .collect();
    let (program, lambda_names) = vip_with_lambda_vars(typed, &sites)?;
    let vip_typed = crate::levels::infer(&program)?;

    let mut data_with_lambda = data.clone();
    let mut lambda_vars = Vec::new();
    for (site, (_, lam_name)) in sites.iter().zip(&lambda_names) {
        let len = site.element_count(typed, data)?;
        let scalar = site.indices.is_empty();
        let placeholder = if scalar {
            crate::runtime::Value::Real(0.5)
        } else {
            crate::runtime::Value::Array(vec![crate::runtime::Value::Real(0.5); len])
        };
        data_with_lambda.bind(lam_name.clone(), placeholder);
        lambda_vars.push(LambdaVar {
            name: lam_name.clone(),
            len,
            scalar,
        });
    }

    let model = Model::new(vip_typed, &data_with_lambda)?;
    let out = optimize_elbo(&model, &lambda_vars, config)?;

    let mut lambda = LambdaMap::new();
    for ((site, lv), vals) in sites.iter().zip(&lambda_vars).zip(&out.lambda) {
        let spec = if lv.scalar {
            LambdaSpec::Scalar(vals[0])
        } else {
            LambdaSpec::PerElement(vals.clone())
        };
        lambda.insert(site.var.clone(), spec);
    }
    Ok(VipOutcome {
        lambda,
        guide: out.guide,
        elbo_trace: out.elbo_trace,
    })
}
