//! Leapfrog Hamiltonian Monte Carlo with a unit mass matrix, plus the
//! interleaved variant that alternates transitions between the centred
//! and non-centred coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::ast::StmtKind;
use crate::inference::{Draws, InferenceError};
use crate::levels::infer;
use crate::model::Model;
use crate::reparam::{self, EligibleSite};
use crate::runtime::{Store, Value};

#[derive(Debug, Clone)]
pub struct HmcConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    /// Total iterations; the first `warmup` are discarded.
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    /// RNG stream for this chain; chains split streams, not seeds.
    pub chain: u64,
    pub divergence_threshold: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            step_size: 0.1,
            leapfrog_steps: 16,
            iterations: 2000,
            warmup: 1000,
            seed: 0,
            chain: 0,
            divergence_threshold: 100.0,
        }
    }
}

impl HmcConfig {
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.chain);
        rng
    }
}

/// Chain position with its cached log density and gradient; momentum is
/// drawn fresh each transition and the Hamiltonian recomputed, never
/// cached across accepted moves.
#[derive(Clone)]
pub struct HmcState {
    pub theta: Vec<f64>,
    pub lp: f64,
    pub grad: Vec<f64>,
}

fn initialize(model: &Model, rng: &mut ChaCha8Rng) -> Result<HmcState, InferenceError> {
    let dim = model.dim();
    let mut theta = vec![0.0; dim];
    for attempt in 0..=10 {
        if let Ok((lp, grad)) = model.grad_log_density(&theta) {
            if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
                return Ok(HmcState { theta, lp, grad });
            }
        }
        let _ = attempt;
        theta = (0..dim)
            .map(|_| {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                0.5 * z
            })
            .collect();
    }
    Err(InferenceError::Initialization { tries: 10 })
}

/// One leapfrog HMC transition. Returns the new state, whether the
/// proposal was accepted, whether it diverged, and the Hamiltonians
/// (initial, proposed).
pub fn transition(
    model: &Model,
    state: HmcState,
    config: &HmcConfig,
    rng: &mut ChaCha8Rng,
) -> (HmcState, bool, bool, (f64, f64)) {
    let dim = state.theta.len();
    let p0: Vec<f64> = (0..dim)
        .map(|_| rand_distr::StandardNormal.sample(rng))
        .collect();
    let kinetic = |p: &[f64]| 0.5 * p.iter().map(|x| x * x).sum::<f64>();
    let h0 = -state.lp + kinetic(&p0);

    let result = leapfrog(
        model,
        &state.theta,
        &p0,
        &state.grad,
        state.lp,
        config.step_size,
        config.leapfrog_steps,
    );
    let (theta, p, lp_new, grad, max_err, ok) = match result {
        Some(t) => (t.theta, t.momentum, t.lp, t.grad, t.max_energy_error, true),
        None => (
            state.theta.clone(),
            p0,
            state.lp,
            state.grad.clone(),
            f64::INFINITY,
            false,
        ),
    };

    let h1 = if ok { -lp_new + kinetic(&p) } else { f64::INFINITY };
    let delta = h1 - h0;
    // a transition diverges when the energy error anywhere along the
    // simulated path exceeds the threshold; divergent proposals are
    // rejected, not Metropolis-tested
    let divergent = !ok || max_err > config.divergence_threshold;
    let accept_prob = if delta.is_nan() { 0.0 } else { (-delta).exp().min(1.0) };
    let u: f64 = rng.gen();
    let accepted = ok && !divergent && u < accept_prob;
    let next = if accepted {
        HmcState {
            theta,
            lp: lp_new,
            grad,
        }
    } else {
        state
    };
    (next, accepted, divergent, (h0, h1))
}

/// Result of a leapfrog trajectory.
pub struct Trajectory {
    pub theta: Vec<f64>,
    pub momentum: Vec<f64>,
    pub lp: f64,
    pub grad: Vec<f64>,
    /// Largest Hamiltonian error observed along the path.
    pub max_energy_error: f64,
}

/// Leapfrog integration of Hamilton's equations under a unit mass
/// matrix: a half momentum step, full position steps with gradient
/// refreshes, and a trailing half step. Returns `None` if the log
/// density or gradient turns non-finite along the trajectory.
pub fn leapfrog(
    model: &Model,
    theta0: &[f64],
    p0: &[f64],
    grad0: &[f64],
    lp0: f64,
    eps: f64,
    steps: usize,
) -> Option<Trajectory> {
    let dim = theta0.len();
    let kinetic = |p: &[f64]| 0.5 * p.iter().map(|x| x * x).sum::<f64>();
    let h0 = -lp0 + kinetic(p0);
    let mut theta = theta0.to_vec();
    let mut grad = grad0.to_vec();
    let mut p = p0.to_vec();
    let mut lp = lp0;
    let mut max_err = 0.0f64;
    for i in 0..dim {
        p[i] += 0.5 * eps * grad[i];
    }
    for l in 0..steps {
        for i in 0..dim {
            theta[i] += eps * p[i];
        }
        match model.grad_log_density(&theta) {
            Ok((lp_new, g)) if lp_new.is_finite() && g.iter().all(|x| x.is_finite()) => {
                lp = lp_new;
                grad = g;
            }
            _ => return None,
        }
        let weight = if l + 1 == steps { 0.5 } else { 1.0 };
        for i in 0..dim {
            p[i] += weight * eps * grad[i];
        }
        max_err = max_err.max(-lp + kinetic(&p) - h0);
    }
    Some(Trajectory {
        theta,
        momentum: p,
        lp,
        grad,
        max_energy_error: max_err,
    })
}

/// Labels of the generated-quantities outputs appended to each draw.
fn genquant_labels(model: &Model, store: &Store<f64>) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for stmt in &model.blocked.generated_quantities {
        if let StmtKind::Decl { name, .. } = &stmt.kind {
            if let Some(v) = store.get(name) {
                let mut flat = Vec::new();
                v.flatten_reals(&mut flat);
                out.push((name.clone(), flat.len()));
            }
        }
    }
    out
}

fn flatten_genquant(store: &Store<f64>, spec: &[(String, usize)]) -> Vec<f64> {
    let mut row = Vec::new();
    for (name, len) in spec {
        let mut flat = Vec::new();
        if let Some(v) = store.get(name) {
            v.flatten_reals(&mut flat);
        }
        flat.resize(*len, f64::NAN);
        row.extend(flat);
    }
    row
}

/// Standard leapfrog HMC chain. Draws are recorded on the constrained
/// scale, with generated quantities appended per draw.
pub fn hmc(model: &Model, config: &HmcConfig) -> Result<Draws, InferenceError> {
    let mut rng = config.rng();
    let mut state = initialize(model, &mut rng)?;

    run_chain(model, config, &mut rng, &mut |cfg, rng, st| {
        let (next, accepted, divergent, _h) = transition(model, st.clone(), cfg, rng);
        (next, accepted, divergent)
    }, &mut state)
}

type StepFn<'a> = dyn FnMut(&HmcConfig, &mut ChaCha8Rng, &HmcState) -> (HmcState, bool, bool) + 'a;

fn run_chain(
    model: &Model,
    config: &HmcConfig,
    rng: &mut ChaCha8Rng,
    step: &mut StepFn,
    state: &mut HmcState,
) -> Result<Draws, InferenceError> {
    let has_genquant = !model.blocked.generated_quantities.is_empty();
    let mut labels = model.param_labels();
    let mut gq_spec: Option<Vec<(String, usize)>> = None;

    let kept = config.iterations.saturating_sub(config.warmup);
    let mut rows = Vec::with_capacity(kept);
    let mut unconstrained = Vec::with_capacity(kept);
    let mut divergent_flags = Vec::with_capacity(kept);
    let mut potentials = Vec::with_capacity(kept);
    let mut accepted_count = 0usize;
    let mut kept_count = 0usize;

    for iter in 0..config.iterations {
        let (next, accepted, divergent) = step(config, rng, state);
        *state = next;
        if iter < config.warmup {
            continue;
        }
        kept_count += 1;
        if accepted {
            accepted_count += 1;
        }
        let (constrained, _) = model.constrain(&state.theta);
        let mut row = constrained.clone();
        if has_genquant {
            let store = model.run_genquant(&constrained, rng.clone())?;
            *rng = store.rng.clone();
            let spec = gq_spec.get_or_insert_with(|| genquant_labels(model, &store));
            row.extend(flatten_genquant(&store, spec));
        }
        rows.push(row);
        unconstrained.push(state.theta.clone());
        divergent_flags.push(divergent);
        potentials.push(-state.lp);
    }

    if let Some(spec) = gq_spec {
        for (name, len) in spec {
            if len == 1 {
                labels.push(name);
            } else {
                for i in 1..=len {
                    labels.push(format!("{name}[{i}]"));
                }
            }
        }
    }

    Ok(Draws {
        labels,
        rows,
        divergent: divergent_flags,
        accept_rate: accepted_count as f64 / kept_count.max(1) as f64,
        unconstrained,
        potentials,
    })
}

// ---------------------------------------------------------------------------
// interleaved transitions across parameterisations

/// Bijection between centred and non-centred coordinates for a set of
/// sites.
struct SiteBijection {
    sites: Vec<(EligibleSite, String)>,
    cp_index: std::collections::HashMap<String, usize>,
    ncp_index: std::collections::HashMap<String, usize>,
}

impl SiteBijection {
    /// Constrained CP values -> constrained NCP values.
    fn forward(&self, cp_model: &Model, cp_vals: &[f64], ncp_model: &Model) -> Vec<f64> {
        let mut store = cp_model.store_with_params(cp_vals);
        let mut out = vec![0.0; ncp_model.dim()];
        for comp in ncp_model.components() {
            let (name, element) = split_label(&comp.label);
            let idx = self.ncp_index[&comp.label];
            if let Some((site, _raw)) = self.sites.iter().find(|(_, r)| r == &name) {
                let z_label = rebuild_label(&site.var, &element);
                let z = cp_vals[self.cp_index[&z_label]];
                let (loc, scale) =
                    reparam::eval_site_loc_scale(site, &mut store, &element).expect("site eval");
                out[idx] = (z - loc) / scale;
            } else {
                out[idx] = cp_vals[self.cp_index[&comp.label]];
            }
        }
        out
    }

    /// Constrained NCP values -> constrained CP values. Sites are
    /// reconstructed in declaration order so chained locations resolve.
    fn backward(&self, ncp_model: &Model, ncp_vals: &[f64], cp_model: &Model) -> Vec<f64> {
        let mut store = ncp_model.store_with_params(ncp_vals);
        let mut out = vec![0.0; cp_model.dim()];
        for comp in cp_model.components() {
            let (name, element) = split_label(&comp.label);
            let idx = self.cp_index[&comp.label];
            if let Some((site, raw)) = self.sites.iter().find(|(s, _)| s.var == name) {
                let raw_label = rebuild_label(raw, &element);
                let r = ncp_vals[self.ncp_index[&raw_label]];
                let (loc, scale) =
                    reparam::eval_site_loc_scale(site, &mut store, &element).expect("site eval");
                let z = loc + scale * r;
                out[idx] = z;
                // later sites may read this variable through loc/scale
                bind_element(&mut store, &name, &element, z);
            } else {
                out[idx] = ncp_vals[self.ncp_index[&comp.label]];
            }
        }
        out
    }
}

fn split_label(label: &str) -> (String, Vec<i64>) {
    match label.find('[') {
        None => (label.to_string(), Vec::new()),
        Some(pos) => {
            let name = label[..pos].to_string();
            let idx = label[pos..]
                .trim_matches(|c| c == '[' || c == ']')
                .split("][")
                .map(|s| s.parse().unwrap())
                .collect();
            (name, idx)
        }
    }
}

fn rebuild_label(name: &str, element: &[i64]) -> String {
    let mut s = name.to_string();
    for e in element {
        s.push_str(&format!("[{e}]"));
    }
    s
}

fn bind_element(store: &mut Store<f64>, name: &str, element: &[i64], value: f64) {
    if element.is_empty() {
        store.bind(name.to_string(), Value::Real(value));
        return;
    }
    let Some(current) = store.get(name).cloned() else {
        return;
    };
    fn set(v: &mut Value<f64>, element: &[i64], value: f64) {
        match (v, element) {
            (Value::Array(items), [i, rest @ ..]) => {
                if let Some(cell) = items.get_mut((*i - 1) as usize) {
                    set(cell, rest, value);
                }
            }
            (slot, []) => *slot = Value::Real(value),
            _ => {}
        }
    }
    let mut updated = current;
    set(&mut updated, element, value);
    store.bind(name.to_string(), updated);
}

/// Alternates one transition in centred coordinates with one in
/// non-centred coordinates, mapping the state through the site
/// bijections; draws are reported in centred coordinates. With no
/// eligible sites this is exactly [`hmc`].
pub fn interleaved_hmc(model: &Model, config: &HmcConfig) -> Result<Draws, InferenceError> {
    let sites = reparam::find_sites(&model.typed);
    if sites.is_empty() {
        return hmc(model, config);
    }
    let (ncp_program, mapping) = reparam::ncp_with_mapping(&model.typed, None)?;
    let ncp_typed = infer(&ncp_program)?;
    let ncp_model = Model::new(ncp_typed, model.data_store())?;

    let bijection = SiteBijection {
        sites: sites
            .iter()
            .cloned()
            .zip(mapping.iter().map(|(_, raw)| raw.clone()))
            .collect(),
        cp_index: model
            .param_labels()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect(),
        ncp_index: ncp_model
            .param_labels()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect(),
    };

    let mut rng = config.rng();
    let mut state = initialize(model, &mut rng)?;

    run_chain(model, config, &mut rng, &mut |cfg, rng, st| {
        // centred transition
        let (cp_state, acc1, div1, _) = transition(model, st.clone(), cfg, rng);
        // map to non-centred coordinates
        let (cp_con, _) = model.constrain(&cp_state.theta);
        let ncp_con = bijection.forward(model, &cp_con, &ncp_model);
        let ncp_theta = ncp_model.unconstrain(&ncp_con);
        match ncp_model.grad_log_density(&ncp_theta) {
            Ok((lp, grad)) if lp.is_finite() => {
                let ncp_state = HmcState {
                    theta: ncp_theta,
                    lp,
                    grad,
                };
                let (ncp_next, acc2, div2, _) = transition(&ncp_model, ncp_state, cfg, rng);
                // map back to centred coordinates
                let (ncp_next_con, _) = ncp_model.constrain(&ncp_next.theta);
                let cp_con2 = bijection.backward(&ncp_model, &ncp_next_con, model);
                let cp_theta2 = model.unconstrain(&cp_con2);
                match model.grad_log_density(&cp_theta2) {
                    Ok((lp2, grad2)) if lp2.is_finite() => (
                        HmcState {
                            theta: cp_theta2,
                            lp: lp2,
                            grad: grad2,
                        },
                        acc1 || acc2,
                        div1 || div2,
                    ),
                    _ => (cp_state, acc1, div1 || div2),
                }
            }
            _ => (cp_state, acc1, div1),
        }
    }, &mut state)
}
