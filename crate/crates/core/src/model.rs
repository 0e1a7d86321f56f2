//! Density interface over a typed program: flattened unconstrained
//! parameter vector in, log target (and gradient) out.

use thiserror::Error;

use crate::ast::*;
use crate::levels::TypedProgram;
use crate::runtime::{
    exec, Constraint, Dual, RuntimeError, Scalar, StmtMode, Store, Value,
};
use crate::shred::{shred, BlockedProgram};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("discrete model-level parameter `{0}`; marginalise it first")]
    DiscreteParam(String),
    #[error("parameter `{0}` has an unsupported constraint (upper bound only)")]
    UnsupportedConstraint(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// One scalar component of the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct ParamComponent {
    /// Label such as `mu` or `theta[3]`.
    pub label: String,
    pub constraint: Constraint,
}

#[derive(Debug, Clone)]
struct ParamVar {
    name: String,
    dims: Vec<usize>,
}

/// A model prepared for inference: data bound, transformed data
/// evaluated, parameter layout fixed.
#[derive(Debug, Clone)]
pub struct Model {
    pub typed: TypedProgram,
    pub blocked: BlockedProgram,
    params: Vec<ParamVar>,
    components: Vec<ParamComponent>,
    /// Data and transformed-data values.
    base: Store<f64>,
}

impl Model {
    pub fn new(typed: TypedProgram, data: &Store<f64>) -> Result<Model, ModelError> {
        if let Some(d) = typed.discrete_model_params().first() {
            return Err(ModelError::DiscreteParam(d.clone()));
        }
        let blocked = shred(&typed);
        let mut base = data.clone();
        for stmt in &blocked.data {
            if let StmtKind::Decl { name, .. } = &stmt.kind {
                if !base.contains(name) {
                    return Err(RuntimeError::MissingInput { name: name.clone() }.into());
                }
            }
        }
        exec(&blocked.transformed_data, &mut base, StmtMode::Plain)?;

        let mut params = Vec::new();
        let mut components = Vec::new();
        for name in typed.model_params() {
            let (ty, _) = typed.program.decl_of(&name).expect("declared");
            let constraint = Constraint::from_type(ty)
                .ok_or_else(|| ModelError::UnsupportedConstraint(name.clone()))?;
            let mut dims = Vec::new();
            for d in &ty.dims {
                let stmt = Stmt::new(StmtKind::TargetPlus { value: d.clone() });
                let mut probe = base.clone();
                exec(&[stmt], &mut probe, StmtMode::Plain)?;
                dims.push(probe.target as usize);
            }
            let count: usize = dims.iter().product::<usize>().max(1);
            if dims.is_empty() {
                components.push(ParamComponent {
                    label: name.clone(),
                    constraint,
                });
            } else {
                for idx in 0..count {
                    components.push(ParamComponent {
                        label: format!("{name}{}", index_label(&dims, idx)),
                        constraint,
                    });
                }
            }
            params.push(ParamVar { name, dims });
        }
        Ok(Model {
            typed,
            blocked,
            params,
            components,
            base,
        })
    }

    /// Number of scalar parameter components.
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ParamComponent] {
        &self.components
    }

    pub fn param_labels(&self) -> Vec<String> {
        self.components.iter().map(|c| c.label.clone()).collect()
    }

    pub fn data_store(&self) -> &Store<f64> {
        &self.base
    }

    /// Binds parameter values (already on the constrained scale) into a
    /// fresh store holding data and transformed data.
    pub fn store_with_params<T: Scalar>(&self, constrained: &[T]) -> Store<T> {
        let mut store: Store<T> = Store::new();
        for name in self.base.names() {
            let v = self.base.get(name).unwrap();
            store.bind(name.clone(), v.map_scalars(&|x| T::from_f64(*x)));
        }
        let mut offset = 0;
        for p in &self.params {
            let count: usize = p.dims.iter().product::<usize>().max(1);
            let slice = &constrained[offset..offset + count];
            store.bind(p.name.clone(), build_value(&p.dims, slice));
            offset += count;
        }
        store
    }

    /// Maps an unconstrained vector to the constrained scale, returning
    /// the values and the total log-Jacobian.
    pub fn constrain<T: Scalar>(&self, theta: &[T]) -> (Vec<T>, T) {
        let mut values = Vec::with_capacity(theta.len());
        let mut log_jac = T::from_f64(0.0);
        for (u, comp) in theta.iter().zip(&self.components) {
            let (v, lj) = comp.constraint.to_constrained(u);
            values.push(v);
            log_jac = log_jac.add(&lj);
        }
        (values, log_jac)
    }

    pub fn unconstrain(&self, constrained: &[f64]) -> Vec<f64> {
        constrained
            .iter()
            .zip(&self.components)
            .map(|(v, c)| c.constraint.to_unconstrained(*v))
            .collect()
    }

    fn check_dim(&self, theta_len: usize) -> Result<(), ModelError> {
        if theta_len != self.dim() {
            return Err(RuntimeError::DimensionMismatch {
                expected: self.dim(),
                got: theta_len,
            }
            .into());
        }
        Ok(())
    }

    /// Log target density at an unconstrained point, including the
    /// log-Jacobian of the unconstraining transforms. Non-finite values
    /// are legal results, not errors.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(theta.len())?;
        let (constrained, log_jac) = self.constrain(theta);
        let mut store = self.store_with_params(&constrained);
        exec(&self.blocked.model, &mut store, StmtMode::Density)?;
        Ok(store.target + log_jac)
    }

    /// Value and gradient of [`Model::log_density`] by forward-mode
    /// evaluation, one tangent slot per component.
    pub fn grad_log_density(&self, theta: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_dim(theta.len())?;
        let n = theta.len();
        let seeded: Vec<Dual> = theta
            .iter()
            .enumerate()
            .map(|(i, v)| Dual::active(*v, i, n))
            .collect();
        let (constrained, log_jac) = self.constrain(&seeded);
        let mut store: Store<Dual> = self.store_with_params(&constrained);
        exec(&self.blocked.model, &mut store, StmtMode::Density)?;
        let total = store.target.add(&log_jac);
        let grad = (0..n).map(|i| total.tangent(i)).collect();
        Ok((total.value(), grad))
    }

    /// Executes the generated-quantities block at a constrained draw.
    /// The model block runs first (in density mode) so that model-level
    /// definitions the block reads are materialised.
    pub fn run_genquant(
        &self,
        constrained: &[f64],
        rng: rand_chacha::ChaCha8Rng,
    ) -> Result<Store<f64>, ModelError> {
        self.check_dim(constrained.len())?;
        let mut store = self.store_with_params(constrained);
        store.rng = rng;
        exec(&self.blocked.model, &mut store, StmtMode::Density)?;
        exec(
            &self.blocked.generated_quantities,
            &mut store,
            StmtMode::Generative,
        )?;
        Ok(store)
    }
}

fn index_label(dims: &[usize], flat: usize) -> String {
    // row-major multi-index rendered as [i][j]...
    let mut rem = flat;
    let mut idx = vec![0usize; dims.len()];
    for k in (0..dims.len()).rev() {
        idx[k] = rem % dims[k] + 1;
        rem /= dims[k];
    }
    idx.iter().map(|i| format!("[{i}]")).collect()
}

fn build_value<T: Scalar>(dims: &[usize], slice: &[T]) -> Value<T> {
    if dims.is_empty() {
        return Value::Real(slice[0].clone());
    }
    let inner: usize = dims[1..].iter().product::<usize>().max(1);
    Value::Array(
        (0..dims[0])
            .map(|i| build_value(&dims[1..], &slice[i * inner..(i + 1) * inner]))
            .collect(),
    )
}
