//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line with the measured numbers (run with `--nocapture` to see
//! them). Tolerances are written into the assertions.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slic_core::condind::{elim_gen, ElimConfig};
use slic_core::corpus;
use slic_core::data::load_data;
use slic_core::frontend::{parse, pretty};
use slic_core::inference::{advi, hmc, interleaved_hmc, HmcConfig, ViConfig};
use slic_core::levels::{infer, TypedProgram};
use slic_core::model::Model;
use slic_core::reparam::{ncp, vip, vip_optimize, LambdaMap, LambdaSpec};
use slic_core::runtime::{exec, StmtMode, Store, Value};
use slic_core::shred::shred;
use slic_core::testgen::{random_inputs, random_typed_program, GenConfig};

fn typed(src: &str) -> TypedProgram {
    infer(&parse(src).unwrap()).unwrap()
}

fn fixture_store(f: corpus::Fixture, t: &TypedProgram) -> Store<f64> {
    match f.data_json {
        Some(json) => load_data(&t.program, json).unwrap(),
        None => Store::new(),
    }
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn slicc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_slicc"))
        .args(args)
        .env_remove("SLICC_SEED")
        .output()
        .expect("binary runs")
}

/// Log target of a (possibly discrete) model slice with explicit binds.
fn model_slice_target(t: &TypedProgram, data: &Store<f64>, binds: &[(&str, i64)]) -> f64 {
    let blocked = shred(t);
    let mut store = data.clone();
    exec(&blocked.transformed_data, &mut store, StmtMode::Plain).unwrap();
    for (n, v) in binds {
        store.bind(n.to_string(), Value::Int(*v));
    }
    exec(&blocked.model, &mut store, StmtMode::Density).unwrap();
    store.target
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_coin_posterior() {
    let start = Instant::now();
    let t = typed(corpus::COINS.source);

    // exact enumeration on the original joint
    let joints: Vec<f64> = (0..4)
        .map(|i| model_slice_target(&t, &Store::new(), &[("c1", i % 2), ("c2", i / 2)]))
        .collect();
    let z: f64 = joints.iter().map(|lp| lp.exp()).sum();
    let p_heads_exact =
        (joints[1].exp() + joints[3].exp()) / z; // c1 = 1 rows
    assert!((p_heads_exact - 1.0 / 3.0).abs() < 1e-12, "exact {p_heads_exact}");

    // marginalised program, 50,000 generated-quantity re-draws
    let out = elim_gen(&t, None, &ElimConfig::default()).unwrap();
    let blocked = shred(&out.typed);
    let mut base: Store<f64> = Store::new();
    exec(&blocked.transformed_data, &mut base, StmtMode::Plain).unwrap();
    exec(&blocked.model, &mut base, StmtMode::Density).unwrap();
    assert!((base.target - 0.75f64.ln()).abs() < 1e-12);

    let n = 50_000u32;
    let mut heads = 0u32;
    let mut store = base.clone();
    store.rng = ChaCha8Rng::seed_from_u64(2026);
    for _ in 0..n {
        let rng = store.rng.clone();
        store = base.clone();
        store.rng = rng;
        exec(&blocked.generated_quantities, &mut store, StmtMode::Generative).unwrap();
        if store.get("c1").unwrap().as_int().unwrap() == 1 {
            heads += 1;
        }
    }
    let p = heads as f64 / n as f64;
    assert!((p - 1.0 / 3.0).abs() < 0.01, "estimate {p}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "criterion 1 (coin posterior): PASS exact={p_heads_exact:.12} estimate={p:.4} in {elapsed:?}"
    );
}

#[test]
fn criterion_02_ve_marginal_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in [3usize, 6, 8, 10] {
        for _ in 0..5 {
            let src = corpus::hmm_source(n);
            let t = typed(&src);
            let alpha = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let beta = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let y: Vec<i64> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let data = load_data(&t.program, &corpus::hmm_data_json(alpha, beta, &y)).unwrap();

            // brute force over all 2^n assignments
            let names: Vec<String> = (1..=n).map(|k| format!("z{k}")).collect();
            let mut terms = Vec::with_capacity(1 << n);
            for mask in 0..(1u64 << n) {
                let binds: Vec<(&str, i64)> = names
                    .iter()
                    .enumerate()
                    .map(|(i, nm)| (nm.as_str(), ((mask >> i) & 1) as i64))
                    .collect();
                terms.push(model_slice_target(&t, &data, &binds));
            }
            let expected = slic_core::runtime::dist::log_sum_exp(&terms);

            let out = elim_gen(&t, None, &ElimConfig::default()).unwrap();
            let got = model_slice_target(&out.typed, &data, &[]);
            worst = worst.max((got - expected).abs());
            assert!(
                (got - expected).abs() <= 1e-9,
                "n={n}: {got} vs {expected}"
            );
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 2 (VE correctness): PASS {cases} cases, worst |error| = {worst:.2e} in {elapsed:?}"
    );
}

#[test]
fn criterion_03_ve_complexity_linear() {
    let sizes = [4usize, 8, 16, 24, 32, 48, 64];
    let mut counts = Vec::new();
    for n in sizes {
        let src = corpus::hmm_source(n);
        let t = typed(&src);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let alpha = [0.6, 0.3];
        let beta = [0.2, 0.8];
        let y: Vec<i64> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let data = load_data(&t.program, &corpus::hmm_data_json(alpha, beta, &y)).unwrap();
        let out = elim_gen(&t, None, &ElimConfig::default()).unwrap();
        let blocked = shred(&out.typed);
        // the whole density evaluation: the elimination tables may be
        // hoisted into transformed data when no parameter feeds them
        let mut store = data.clone();
        store.exec_count = 0;
        exec(&blocked.transformed_data, &mut store, StmtMode::Plain).unwrap();
        exec(&blocked.model, &mut store, StmtMode::Density).unwrap();
        counts.push(store.exec_count as f64);
    }
    // least squares fit count = a + b*n and its R^2
    let n = sizes.len() as f64;
    let xs: Vec<f64> = sizes.iter().map(|s| *s as f64).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = counts.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&counts)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let b = sxy / sxx;
    let a = mean_y - b * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&counts)
        .map(|(x, y)| (y - (a + b * x)).powi(2))
        .sum();
    let ss_tot: f64 = counts.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    assert!(r2 > 0.99, "R^2 = {r2}, counts {counts:?}");
    println!(
        "criterion 3 (VE complexity): PASS counts {counts:?} fit {a:.1}+{b:.2}n R^2={r2:.6}"
    );
}

#[test]
fn criterion_04_shredding_preservation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let config = GenConfig {
        max_stmts: 12,
        max_vars: 8,
    };
    for _ in 0..200 {
        let (t, _) = random_typed_program(&mut rng, &config);
        let blocked = shred(&t);
        for k in 0..100u64 {
            let inputs = random_inputs(&t, &mut rng);
            let mut original = inputs.clone();
            original.rng = ChaCha8Rng::seed_from_u64(k);
            t.exec_mixed(&mut original).unwrap();
            let mut sliced = inputs.clone();
            sliced.rng = ChaCha8Rng::seed_from_u64(k);
            blocked.exec_all(&mut sliced).unwrap();
            let denom = original.target.abs().max(1.0);
            assert!(
                (original.target - sliced.target).abs() / denom < 1e-12,
                "{}",
                pretty(&t.program)
            );
            for (name, level) in t.ordered_levels() {
                if level == slic_core::ast::Level::GenQuant {
                    assert_eq!(original.get(&name), sliced.get(&name), "{name}");
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("criterion 4 (shredding preservation): PASS 200 programs x 100 stores in {elapsed:?}");
}

#[test]
fn criterion_05_immutability_typing() {
    let dir = fixtures_dir();
    let three = dir.join("three_liner.slic");
    let out = slicc(&["check", three.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "x: model\ny: model\n"
    );
    let out = slicc(&["compile", three.to_str().unwrap()]);
    assert!(out.status.success());

    let violation = dir.join("shred_violation.slic");
    let out = slicc(&["check", violation.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("immutable"), "{err}");
    println!("criterion 5 (immutability typing): PASS");
}

#[test]
fn criterion_06_noninterference() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut programs: Vec<(TypedProgram, Store<f64>)> = Vec::new();
    for f in corpus::fixtures() {
        if f.name == "shred_violation" {
            continue;
        }
        let t = typed(f.source);
        let store = fixture_store(f, &t);
        if t.discrete_model_params().is_empty() {
            programs.push((t, store));
        } else {
            // marginalised variant joins the corpus
            let out = elim_gen(&t, None, &ElimConfig::default()).unwrap();
            programs.push((out.typed, store));
        }
    }
    for (t, data) in &programs {
        let blocked = shred(t);
        for _ in 0..10 {
            // 1) transformed data ignores model/genquant perturbations
            let mut a = data.clone();
            let mut b = data.clone();
            for (name, level) in t.ordered_levels() {
                if level != slic_core::ast::Level::Data {
                    let (ty, _) = t.program.decl_of(&name).unwrap();
                    if ty.dims.is_empty() {
                        a.bind(name.clone(), Value::Real(rng.gen_range(-3.0..3.0)));
                        b.bind(name.clone(), Value::Real(rng.gen_range(-3.0..3.0)));
                    }
                }
            }
            exec(&blocked.transformed_data, &mut a, StmtMode::Plain).unwrap();
            exec(&blocked.transformed_data, &mut b, StmtMode::Plain).unwrap();
            for (name, level) in t.ordered_levels() {
                if level == slic_core::ast::Level::Data {
                    assert_eq!(a.get(&name), b.get(&name), "td `{name}`");
                }
            }

            // 2) the model target ignores genquant perturbations
            let mut params = data.clone();
            exec(&blocked.transformed_data, &mut params, StmtMode::Plain).unwrap();
            for name in t.model_params() {
                let (ty, _) = t.program.decl_of(&name).unwrap();
                if ty.dims.is_empty() {
                    params.bind(name.clone(), Value::Real(rng.gen_range(0.2..2.0)));
                } else {
                    let vals: Vec<Value<f64>> =
                        (0..16).map(|_| Value::Real(rng.gen_range(0.2..2.0))).collect();
                    params.bind(name.clone(), Value::Array(vals));
                }
            }
            let mut c = params.clone();
            exec(&blocked.model, &mut c, StmtMode::Density).unwrap();
            let mut d = params.clone();
            for (name, level) in t.ordered_levels() {
                if level == slic_core::ast::Level::GenQuant {
                    d.bind(name.clone(), Value::Real(987.0));
                }
            }
            exec(&blocked.model, &mut d, StmtMode::Density).unwrap();
            assert_eq!(c.target, d.target, "target changed under genquant perturbation");
        }
    }
    println!("criterion 6 (noninterference): PASS on {} corpus programs", programs.len());
}

#[test]
fn criterion_07_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked_models = 0;
    for f in corpus::fixtures() {
        if f.name == "shred_violation" {
            continue;
        }
        let t = typed(f.source);
        let data = fixture_store(f, &t);
        let t = if t.discrete_model_params().is_empty() {
            t
        } else {
            elim_gen(&t, None, &ElimConfig::default()).unwrap().typed
        };
        let model = Model::new(t, &data).unwrap();
        let dim = model.dim();
        if dim == 0 {
            continue; // purely discrete/generative model: empty gradient
        }
        for _ in 0..20 {
            let theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let (_, grad) = model.grad_log_density(&theta).unwrap();
            let h = 1e-5;
            let mut probe = theta.clone();
            for i in 0..dim {
                probe[i] = theta[i] + h;
                let up = model.log_density(&probe).unwrap();
                probe[i] = theta[i] - h;
                let down = model.log_density(&probe).unwrap();
                probe[i] = theta[i];
                let fd = (up - down) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / fd.abs().max(1e-6);
                assert!(rel < 1e-6, "{} component {i}: {} vs {fd}", f.name, grad[i]);
            }
        }
        checked_models += 1;
    }
    assert!(checked_models >= 5);
    println!("criterion 7 (gradient check): PASS on {checked_models} models x 20 points");
}

#[test]
fn criterion_08_funnel_cp_vs_ncp() {
    let start = Instant::now();
    let t = typed(corpus::FUNNEL.source);
    let cp = Model::new(t.clone(), &Store::new()).unwrap();
    let ncp_typed = infer(&ncp(&t, None).unwrap()).unwrap();
    let ncp_model = Model::new(ncp_typed, &Store::new()).unwrap();

    let mut cp_divs = Vec::new();
    let mut ncp_divs = Vec::new();
    let mut cp_stds = Vec::new();
    let mut ncp_stds = Vec::new();
    for seed in 0..5u64 {
        let config = HmcConfig {
            step_size: 0.1,
            leapfrog_steps: 16,
            iterations: 11_000,
            warmup: 1000,
            seed,
            ..HmcConfig::default()
        };
        let a = hmc(&cp, &config).unwrap();
        let b = hmc(&ncp_model, &config).unwrap();
        cp_divs.push(a.divergence_count());
        ncp_divs.push(b.divergence_count());
        cp_stds.push(a.mean_std("y").unwrap().1);
        ncp_stds.push(b.mean_std("y").unwrap().1);
    }
    let strictly_below = cp_divs
        .iter()
        .zip(&ncp_divs)
        .filter(|(c, n)| n < c)
        .count();
    assert!(strictly_below >= 4, "NCP < CP in only {strictly_below}/5 seeds: {cp_divs:?} vs {ncp_divs:?}");
    for s in &ncp_stds {
        assert!((2.5..=3.5).contains(s), "NCP std(y) {s}");
    }
    // the per-seed CP spread estimate is noisy (the neck mixes slowly),
    // so the under-exploration band is checked on the seed median
    let mut sorted = cp_stds.clone();
    sorted.sort_by(f64::total_cmp);
    let cp_median = sorted[2];
    assert!(cp_median < 2.7, "CP median std(y) {cp_median} ({cp_stds:?})");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 180.0, "took {elapsed:?}");
    println!(
        "criterion 8 (funnel CP vs NCP): PASS divs {cp_divs:?} vs {ncp_divs:?}, std(y) CP {cp_stds:?} NCP {ncp_stds:?} in {elapsed:?}"
    );
}

#[test]
fn criterion_09_interleaved_recovers_funnel() {
    let t = typed(corpus::FUNNEL.source);
    let cp = Model::new(t, &Store::new()).unwrap();
    let config = HmcConfig {
        step_size: 0.1,
        leapfrog_steps: 16,
        iterations: 11_000,
        warmup: 1000,
        seed: 0,
        ..HmcConfig::default()
    };
    let draws = interleaved_hmc(&cp, &config).unwrap();
    let (_, std_y) = draws.mean_std("y").unwrap();
    assert!((2.5..=3.5).contains(&std_y), "std(y) {std_y}");
    println!("criterion 9 (interleaved funnel): PASS std(y) = {std_y:.3}");
}

#[test]
fn criterion_10_advi_banana() {
    let start = Instant::now();
    let m = Model::new(typed(corpus::BANANA.source), &Store::new()).unwrap();
    let out = advi(
        &m,
        &ViConfig {
            steps: 2000,
            seed: 4,
            ..ViConfig::default()
        },
    )
    .unwrap();
    let iy = out.guide.labels.iter().position(|l| l == "y").unwrap();
    let mean_y = out.guide.mean[iy];
    let sd_y = out.guide.log_sd[iy].exp();
    assert!((mean_y + 0.4).abs() <= 0.2, "mean y {mean_y}");
    assert!((sd_y - 1.0).abs() <= 0.3, "sd y {sd_y}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("criterion 10 (ADVI banana): PASS mean(y) = {mean_y:.3} sd(y) = {sd_y:.3} in {elapsed:?}");
}

fn final_elbo(trace: &[f64]) -> f64 {
    let tail: Vec<f64> = trace.iter().rev().take(100).copied().collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// ELBO of the model with a fixed uniform lambda on every site.
fn endpoint_elbo(t: &TypedProgram, data: &Store<f64>, lam: f64, seed: u64) -> f64 {
    let sites = slic_core::reparam::find_sites(t);
    let mut map = LambdaMap::new();
    for s in &sites {
        map.insert(s.var.clone(), LambdaSpec::Scalar(lam));
    }
    let transformed = infer(&vip(t, &map).unwrap()).unwrap();
    let m = Model::new(transformed, data).unwrap();
    let out = advi(
        &m,
        &ViConfig {
            steps: 1500,
            seed,
            ..ViConfig::default()
        },
    )
    .unwrap();
    final_elbo(&out.elbo_trace)
}

#[test]
fn criterion_11_vip_endpoints_and_selection() {
    // (a) lambda = 1 is the identity, semantically and textually
    let t = typed(corpus::CONJUGATE.source);
    let data = fixture_store(corpus::CONJUGATE, &t);
    let mut ones = LambdaMap::new();
    for s in slic_core::reparam::find_sites(&t) {
        ones.insert(s.var.clone(), LambdaSpec::Scalar(1.0));
    }
    let p1 = vip(&t, &ones).unwrap();
    assert_eq!(pretty(&p1), pretty(&t.program));
    let m_orig = Model::new(t.clone(), &data).unwrap();
    let m_one = Model::new(infer(&p1).unwrap(), &data).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let point: Vec<f64> = (0..m_orig.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = m_orig.log_density(&point).unwrap();
        let b = m_one.log_density(&point).unwrap();
        assert!((a - b).abs() / a.abs().max(1.0) < 1e-12);
    }

    // (b) lambda = 0 equals the non-centred pass, textually
    let mut zeros = LambdaMap::new();
    for s in slic_core::reparam::find_sites(&t) {
        zeros.insert(s.var.clone(), LambdaSpec::Scalar(0.0));
    }
    let p0 = vip(&t, &zeros).unwrap();
    let pn = ncp(&t, None).unwrap();
    assert_eq!(pretty(&p0), pretty(&pn));
    // and agrees with it in density at 100 points
    let m_zero = Model::new(infer(&p0).unwrap(), &data).unwrap();
    let m_ncp = Model::new(infer(&pn).unwrap(), &data).unwrap();
    for _ in 0..100 {
        let point: Vec<f64> = (0..m_zero.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = m_zero.log_density(&point).unwrap();
        let b = m_ncp.log_density(&point).unwrap();
        assert!((a - b).abs() / a.abs().max(1.0) < 1e-12);
    }

    // (c) the funnel prefers non-centring for every x element
    let funnel = typed(corpus::FUNNEL.source);
    let no_data = Store::new();
    let config = ViConfig {
        steps: 1500,
        seed: 12,
        ..ViConfig::default()
    };
    let out = vip_optimize(&funnel, &no_data, &config).unwrap();
    let lam_x = match &out.lambda["x"] {
        LambdaSpec::PerElement(vs) => vs.clone(),
        LambdaSpec::Scalar(v) => vec![*v],
    };
    for (i, l) in lam_x.iter().enumerate() {
        assert!(*l <= 0.2, "lambda*(x[{}]) = {l}", i + 1);
    }
    // two-endpoint oracle: the chosen side has the better ELBO
    let e0 = endpoint_elbo(&funnel, &no_data, 0.0, 21);
    let e1 = endpoint_elbo(&funnel, &no_data, 1.0, 21);
    assert!(e0 > e1, "funnel: ELBO(0) {e0} vs ELBO(1) {e1}");

    // (d) strong data prefers centring for z
    let conj_out = vip_optimize(&t, &data, &config).unwrap();
    let lam_z = match &conj_out.lambda["z"] {
        LambdaSpec::Scalar(v) => *v,
        LambdaSpec::PerElement(vs) => vs[0],
    };
    assert!(lam_z >= 0.8, "lambda*(z) = {lam_z}");
    let c0 = endpoint_elbo(&t, &data, 0.0, 22);
    let c1 = endpoint_elbo(&t, &data, 1.0, 22);
    assert!(c1 > c0, "conjugate: ELBO(1) {c1} vs ELBO(0) {c0}");

    println!(
        "criterion 11 (VIP): PASS funnel max lambda(x) = {:.3} (ELBO {e0:.2} > {e1:.2}), conjugate lambda(z) = {lam_z:.3} (ELBO {c1:.2} > {c0:.2})",
        lam_x.iter().cloned().fold(0.0, f64::max)
    );
}

#[test]
fn criterion_12_command_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures_dir();
    let runs: Vec<(Vec<String>, &str)> = vec![
        (
            vec![
                "sample".into(),
                fx.join("funnel.slic").display().to_string(),
                "--iters".into(),
                "400".into(),
                "--warmup".into(),
                "100".into(),
                "--seed".into(),
                "7".into(),
            ],
            "draws.csv",
        ),
        (
            vec![
                "sample".into(),
                fx.join("funnel.slic").display().to_string(),
                "--iters".into(),
                "300".into(),
                "--warmup".into(),
                "100".into(),
                "--seed".into(),
                "7".into(),
                "--interleaved".into(),
            ],
            "interleaved.csv",
        ),
        (
            vec![
                "vi".into(),
                fx.join("banana.slic").display().to_string(),
                "--steps".into(),
                "120".into(),
                "--seed".into(),
                "5".into(),
            ],
            "guide.json",
        ),
        (
            vec![
                "vip".into(),
                fx.join("conjugate.slic").display().to_string(),
                "--data".into(),
                fx.join("conjugate.data.json").display().to_string(),
                "--steps".into(),
                "80".into(),
                "--seed".into(),
                "5".into(),
            ],
            "lambda.json",
        ),
    ];
    for (args, out_name) in runs {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let path = dir.path().join(format!("{run}_{out_name}"));
            let mut full: Vec<String> = args.clone();
            let flag = if args[0] == "vip" { "--out" } else { "-o" };
            full.push(flag.into());
            full.push(path.display().to_string());
            let out = Command::new(env!("CARGO_BIN_EXE_slicc"))
                .args(&full)
                .env_remove("SLICC_SEED")
                .output()
                .unwrap();
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            outputs.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{out_name} differs between runs");
    }
    println!("criterion 12 (determinism): PASS sample/vi/vip byte-identical across reruns");
}
