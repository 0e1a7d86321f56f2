//! Reparameterisation passes: endpoint identities, change-of-variables
//! density checks, and measure preservation under ancestral sampling.

use slic_core::ast::Level;
use slic_core::corpus;
use slic_core::data::load_data;
use slic_core::frontend::{parse, pretty};
use slic_core::levels::{infer, TypedProgram};
use slic_core::model::Model;
use slic_core::reparam::{find_sites, ncp, vip, LambdaMap, LambdaSpec};
use slic_core::runtime::{exec, StmtMode, Store};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn typed(src: &str) -> TypedProgram {
    infer(&parse(src).unwrap()).unwrap()
}

fn typed_fixture(f: corpus::Fixture) -> (TypedProgram, Store<f64>) {
    let t = typed(f.source);
    let data = match f.data_json {
        Some(json) => load_data(&t.program, json).unwrap(),
        None => Store::new(),
    };
    (t, data)
}

#[test]
fn funnel_sites_are_y_and_x() {
    let t = typed(corpus::FUNNEL.source);
    let sites = find_sites(&t);
    let names: Vec<&str> = sites.iter().map(|s| s.var.as_str()).collect();
    assert_eq!(names, vec!["y", "x"]);
}

#[test]
fn constrained_parameter_is_not_a_site() {
    let (t, _) = typed_fixture(corpus::EIGHT_SCHOOLS);
    let sites = find_sites(&t);
    let names: Vec<&str> = sites.iter().map(|s| s.var.as_str()).collect();
    assert!(names.contains(&"mu"));
    assert!(names.contains(&"theta"));
    assert!(!names.contains(&"tau"), "tau has a lower bound");
}

#[test]
fn self_referential_scale_is_not_a_site() {
    let t = typed("real z ~ normal(0, 1); data real w; w ~ normal(z, 1);");
    // make a site whose scale mentions itself
    let t2 = typed("real v; v ~ normal(0, 1); data real w; w ~ normal(v, 1);");
    assert_eq!(find_sites(&t).len(), 1);
    assert_eq!(find_sites(&t2).len(), 1);
    let t3 = typed("real u ~ normal(0, 1); real z; z ~ cauchy(u, exp(z / 2) + 1);");
    // z's own scale mentions z
    assert!(find_sites(&t3).iter().all(|s| s.var != "z"));
}

#[test]
fn funnel_ncp_structure() {
    let t = typed(corpus::FUNNEL.source);
    let out = ncp(&t, None).unwrap();
    let text = pretty(&out);
    assert!(text.contains("y_raw ~ normal(0, 1);"), "{text}");
    assert!(text.contains("x_raw[i] ~ normal(0, 1);"), "{text}");
    assert!(text.contains("x[i] = 0 + exp(y / 2) * x_raw[i];"), "{text}");
    // re-checks cleanly
    infer(&out).unwrap();
}

#[test]
fn standard_normal_site_keeps_distribution() {
    let t = typed("real z ~ normal(0, 1); data real w; w ~ normal(z, 1);");
    let out = ncp(&t, Some(&["z".to_string()])).unwrap();
    let text = pretty(&out);
    assert!(text.contains("z_raw ~ normal(0, 1);"));
    assert!(text.contains("z = 0 + 1 * z_raw;"));
}

/// Density change of variables: with z = loc + scale * raw,
/// lp_cp(z values) = lp_ncp(raw values) - sum(log scale).
#[test]
fn ncp_density_equality_on_funnel() {
    let t = typed(corpus::FUNNEL.source);
    let cp = Model::new(t.clone(), &Store::new()).unwrap();
    let ncp_typed = infer(&ncp(&t, None).unwrap()).unwrap();
    let ncp_model = Model::new(ncp_typed, &Store::new()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        // a point in raw coordinates: (y_raw, x_raw[1..9])
        let raw: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = 3.0 * raw[0];
        let scale = (y / 2.0).exp();
        let mut cp_point = vec![y];
        cp_point.extend(raw[1..].iter().map(|r| scale * r));

        let lp_cp = cp.log_density(&cp_point).unwrap();
        let lp_ncp = ncp_model.log_density(&raw).unwrap();
        let log_jac = 3.0f64.ln() + 9.0 * scale.ln();
        let diff: f64 = lp_cp - (lp_ncp - log_jac);
        assert!(diff.abs() < 1e-10, "diff {diff}");
    }
}

#[test]
fn eight_schools_ncp_density_equality() {
    let (t, data) = typed_fixture(corpus::EIGHT_SCHOOLS);
    let cp = Model::new(t.clone(), &data).unwrap();
    let ncp_typed = infer(&ncp(&t, Some(&["theta".to_string()])).unwrap()).unwrap();
    let ncp_model = Model::new(ncp_typed, &data).unwrap();
    // cp params: mu, tau(lower=0), theta[8]; ncp params: mu, tau, theta_raw[8]
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mu: f64 = rng.gen_range(-3.0..3.0);
        let tau_u: f64 = rng.gen_range(-1.0..1.5); // unconstrained
        let tau = tau_u.exp();
        let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let theta: Vec<f64> = raw.iter().map(|r| mu + tau * r).collect();

        let mut cp_point = vec![mu, tau_u];
        cp_point.extend(&theta);
        let mut ncp_point = vec![mu, tau_u];
        ncp_point.extend(&raw);

        let lp_cp = cp.log_density(&cp_point).unwrap();
        let lp_ncp = ncp_model.log_density(&ncp_point).unwrap();
        let diff: f64 = lp_cp - (lp_ncp - 8.0 * tau.ln());
        assert!(diff.abs() < 1e-9, "diff {diff}");
    }
}

#[test]
fn vip_lambda_one_is_textually_unchanged() {
    let (t, _) = typed_fixture(corpus::CONJUGATE);
    let mut lam = LambdaMap::new();
    lam.insert("z".to_string(), LambdaSpec::Scalar(1.0));
    lam.insert("m".to_string(), LambdaSpec::Scalar(1.0));
    let out = vip(&t, &lam).unwrap();
    assert_eq!(pretty(&out), pretty(&t.program));
}

#[test]
fn vip_lambda_zero_equals_ncp() {
    let (t, _) = typed_fixture(corpus::CONJUGATE);
    let mut lam = LambdaMap::new();
    lam.insert("z".to_string(), LambdaSpec::Scalar(0.0));
    let out = vip(&t, &lam).unwrap();
    let ncp_out = ncp(&t, Some(&["z".to_string()])).unwrap();
    assert_eq!(pretty(&out), pretty(&ncp_out));
}

#[test]
fn vip_interior_density_relation() {
    // z ~ normal(mu0, sigma0) with data: p_vip(z_tilde) = p_cp(z) * sigma^(1-lam)
    let (t, data) = typed_fixture(corpus::CONJUGATE);
    let cp = Model::new(t.clone(), &data).unwrap();
    let lam_v = 0.5;
    let mut lam = LambdaMap::new();
    lam.insert("z".to_string(), LambdaSpec::Scalar(lam_v));
    let vip_typed = infer(&vip(&t, &lam).unwrap()).unwrap();
    let vip_model = Model::new(vip_typed, &data).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let m: f64 = rng.gen_range(-2.0..2.0);
        let z_tilde: f64 = rng.gen_range(-2.0..2.0);
        // site: z ~ normal(m, 1): loc = m, scale = 1 so the Jacobian is 1;
        // reconstruct z = m + 1^(1-lam) (z_tilde - lam m)
        let z = m + (z_tilde - lam_v * m);
        let lp_cp = cp.log_density(&[m, z]).unwrap();
        let lp_vip = vip_model.log_density(&[m, z_tilde]).unwrap();
        let diff: f64 = lp_cp - lp_vip; // scale = 1: log jacobian 0
        assert!(diff.abs() < 1e-10, "diff {diff}");
    }
}

/// Ancestral draws of the transformed model push forward to the same
/// first two moments as the original.
#[test]
fn vip_half_preserves_marginal_moments() {
    let src = "real mu ~ normal(3, 2); real z ~ normal(mu, 4);";
    let t = typed(src);
    let mut lam = LambdaMap::new();
    lam.insert("z".to_string(), LambdaSpec::Scalar(0.5));
    let out = infer(&vip(&t, &lam).unwrap()).unwrap();

    let n = 100_000;
    let mut sums = (0.0, 0.0);
    let mut store_proto: Store<f64> = Store::with_seed(99);
    for _ in 0..n {
        let mut store: Store<f64> = Store::new();
        store.rng = store_proto.rng.clone();
        exec(&out.program.stmts, &mut store, StmtMode::Generative).unwrap();
        store_proto.rng = store.rng.clone();
        let z: f64 = store.get("z").unwrap().as_scalar().unwrap();
        sums.0 += z;
        sums.1 += z * z;
    }
    let mean = sums.0 / n as f64;
    let var = sums.1 / n as f64 - mean * mean;
    // true marginal: z ~ normal(3, sqrt(2^2 + 4^2)) => var = 20
    let sd_mean = (20.0f64 / n as f64).sqrt();
    assert!((mean - 3.0).abs() < 4.0 * sd_mean, "mean {mean}");
    let sd_var = 20.0 * (2.0 / (n as f64 - 1.0)).sqrt();
    assert!((var - 20.0).abs() < 4.0 * sd_var, "var {var}");
}

#[test]
fn ncp_moves_unread_reconstruction_to_genquant() {
    let t = typed(corpus::FUNNEL.source);
    let out = infer(&ncp(&t, None).unwrap()).unwrap();
    // the raw variables are the only model-level parameters
    assert_eq!(out.model_params(), vec!["y_raw", "x_raw"]);
    assert_eq!(out.level_of("y"), Level::GenQuant);
    assert_eq!(out.level_of("x"), Level::GenQuant);
}

#[test]
fn vip_rejects_out_of_range_lambda() {
    let (t, _) = typed_fixture(corpus::CONJUGATE);
    let mut lam = LambdaMap::new();
    lam.insert("z".to_string(), LambdaSpec::Scalar(1.5));
    assert!(vip(&t, &lam).is_err());
}

#[test]
fn vip_interior_rejects_cauchy_sites() {
    let t = typed("real c ~ cauchy(0, 2); data real w; w ~ normal(c, 1);");
    let mut lam = LambdaMap::new();
    lam.insert("c".to_string(), LambdaSpec::Scalar(0.5));
    assert!(vip(&t, &lam).is_err());
    // but the ncp endpoint is fine for cauchy
    let mut lam0 = LambdaMap::new();
    lam0.insert("c".to_string(), LambdaSpec::Scalar(0.0));
    vip(&t, &lam0).unwrap();
}

#[test]
fn per_element_lambda_materialises_array() {
    let t = typed(corpus::FUNNEL.source);
    let mut lam = LambdaMap::new();
    lam.insert(
        "x".to_string(),
        LambdaSpec::PerElement(vec![0.25; 9]),
    );
    let out = vip(&t, &lam).unwrap();
    let text = pretty(&out);
    assert!(text.contains("_lam_x[1] = 0.25;"), "{text}");
    assert!(text.contains("x_tilde[i] ~ normal(_lam_x[i] * 0,"), "{text}");
    infer(&out).unwrap();
}
