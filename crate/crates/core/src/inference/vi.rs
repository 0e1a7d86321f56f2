//! Mean-field variational inference by stochastic ELBO ascent with
//! reparameterisation-trick gradients, shared between plain ADVI and the
//! lambda-parameterisation optimiser.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::inference::InferenceError;
use crate::model::Model;
use crate::runtime::{exec, Dual, Scalar, StmtMode, Value};

#[derive(Debug, Clone)]
pub struct ViConfig {
    pub steps: usize,
    /// Monte Carlo samples per step.
    pub samples: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            steps: 1000,
            samples: 8,
            lr: 0.05,
            seed: 0,
        }
    }
}

/// Mean-field Gaussian guide on the unconstrained scale.
#[derive(Debug, Clone)]
pub struct Guide {
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub log_sd: Vec<f64>,
}

/// An auxiliary interpolation input bound into the model's store, made
/// active during differentiation and squashed through a logistic.
#[derive(Debug, Clone)]
pub struct LambdaVar {
    pub name: String,
    pub len: usize,
    pub scalar: bool,
}

#[derive(Debug, Clone)]
pub struct ViOutcome {
    pub guide: Guide,
    pub elbo_trace: Vec<f64>,
    /// Squashed per-element lambda values, in `lambda_vars` order.
    pub lambda: Vec<Vec<f64>>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    lr: f64,
}

impl Adam {
    fn new(dim: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            lr,
        }
    }

    /// Ascent step along `grad`.
    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let t = self.t as i32;
        for i in 0..params.len() {
            let g = if grad[i].is_finite() { grad[i] } else { 0.0 };
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
            let mh = self.m[i] / (1.0 - B1.powi(t));
            let vh = self.v[i] / (1.0 - B2.powi(t));
            params[i] += self.lr * mh / (vh.sqrt() + EPS);
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maximises the Monte Carlo ELBO over the guide (and, when
/// `lambda_vars` is non-empty, the logistic-squashed lambda inputs).
pub fn optimize_elbo(
    model: &Model,
    lambda_vars: &[LambdaVar],
    config: &ViConfig,
) -> Result<ViOutcome, InferenceError> {
    let n = model.dim();
    let n_lambda: usize = lambda_vars.iter().map(|l| l.len).sum();
    let width = n + n_lambda;

    let mut mean = vec![0.0; n];
    let mut log_sd = vec![0.0; n];
    let mut lraw = vec![0.0; n_lambda];
    let mut adam = Adam::new(n + n + n_lambda, config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let entropy_const = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln()) * n as f64;
    let mut trace = Vec::with_capacity(config.steps);
    let mut bad_streak = 0usize;

    // tail-averaged iterates smooth out the stochastic-gradient noise
    let avg_from = config.steps - config.steps / 5;
    let mut avg_mean = vec![0.0; n];
    let mut avg_log_sd = vec![0.0; n];
    let mut avg_lraw = vec![0.0; n_lambda];
    let mut avg_count = 0usize;

    for step in 0..config.steps {
        let mut g = vec![0.0; n + n + n_lambda];
        let mut elbo_acc = 0.0;

        for _s in 0..config.samples {
            // guide sample on the unconstrained scale, seeded as active
            let eps: Vec<f64> = (0..n)
                .map(|_| rand_distr::StandardNormal.sample(&mut rng))
                .collect();
            let zeta: Vec<Dual> = (0..n)
                .map(|i| Dual::active(mean[i] + log_sd[i].exp() * eps[i], i, width))
                .collect();
            // squashed lambda inputs, chained through the logistic
            let lambda_duals: Vec<Dual> = (0..n_lambda)
                .map(|j| {
                    let v = sigmoid(lraw[j]);
                    let mut d = Dual::active(v, n + j, width);
                    d.dot[n + j] = v * (1.0 - v);
                    d
                })
                .collect();

            let (constrained, log_jac) = model.constrain(&zeta);
            let mut store = model.store_with_params(&constrained);
            let mut offset = 0;
            for lv in lambda_vars {
                let slice = &lambda_duals[offset..offset + lv.len];
                let value = if lv.scalar {
                    Value::Real(slice[0].clone())
                } else {
                    Value::Array(slice.iter().cloned().map(Value::Real).collect())
                };
                store.bind(lv.name.clone(), value);
                offset += lv.len;
            }
            if exec(&model.blocked.model, &mut store, StmtMode::Density).is_err() {
                continue;
            }
            let lp = store.target.add(&log_jac);
            elbo_acc += lp.value();
            for i in 0..n {
                let d = lp.tangent(i);
                g[i] += d;
                g[n + i] += d * log_sd[i].exp() * eps[i];
            }
            for j in 0..n_lambda {
                g[2 * n + j] += lp.tangent(n + j);
            }
        }

        let scale = 1.0 / config.samples as f64;
        for gi in g.iter_mut() {
            *gi *= scale;
        }
        // entropy of the Gaussian guide: sum(log_sd) + const
        for i in 0..n {
            g[n + i] += 1.0;
        }
        let elbo = elbo_acc * scale + log_sd.iter().sum::<f64>() + entropy_const;
        trace.push(elbo);

        if elbo.is_finite() {
            bad_streak = 0;
        } else {
            bad_streak += 1;
            if bad_streak >= 50 {
                return Err(InferenceError::DiagnosticFailure {
                    streak: bad_streak,
                    trace,
                });
            }
        }

        let mut params: Vec<f64> = mean
            .iter()
            .chain(log_sd.iter())
            .chain(lraw.iter())
            .copied()
            .collect();
        adam.step(&mut params, &g);
        mean.copy_from_slice(&params[..n]);
        log_sd.copy_from_slice(&params[n..2 * n]);
        lraw.copy_from_slice(&params[2 * n..]);

        if step + 1 > avg_from {
            for i in 0..n {
                avg_mean[i] += mean[i];
                avg_log_sd[i] += log_sd[i];
            }
            for j in 0..n_lambda {
                avg_lraw[j] += lraw[j];
            }
            avg_count += 1;
        }
    }

    if avg_count > 0 {
        let inv = 1.0 / avg_count as f64;
        for i in 0..n {
            mean[i] = avg_mean[i] * inv;
            log_sd[i] = avg_log_sd[i] * inv;
        }
        for j in 0..n_lambda {
            lraw[j] = avg_lraw[j] * inv;
        }
    }

    let mut lambda = Vec::new();
    let mut offset = 0;
    for lv in lambda_vars {
        lambda.push(lraw[offset..offset + lv.len].iter().map(|x| sigmoid(*x)).collect());
        offset += lv.len;
    }
    Ok(ViOutcome {
        guide: Guide {
            labels: model.param_labels(),
            mean,
            log_sd,
        },
        elbo_trace: trace,
        lambda,
    })
}

/// Mean-field ADVI on a model with continuous parameters.
pub fn advi(model: &Model, config: &ViConfig) -> Result<ViOutcome, InferenceError> {
    optimize_elbo(model, &[], config)
}
