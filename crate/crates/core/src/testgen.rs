//! Randomised well-formed programs and input stores, used by the
//! property suites to exercise level inference and shredding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::frontend::parse;
use crate::levels::{infer, TypedProgram};
use crate::pretty;
use crate::runtime::{Store, Value};

/// Knobs for the program generator.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_stmts: usize,
    /// Hard cap on declared variables (keeps the oracle tractable).
    pub max_vars: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_stmts: 12,
            max_vars: 6,
        }
    }
}

/// Draws a random well-typed program; returns the typed program and the
/// names of its data inputs. Programs that fail level inference are
/// discarded and regenerated.
pub fn random_typed_program(rng: &mut ChaCha8Rng, config: &GenConfig) -> (TypedProgram, Vec<String>) {
    loop {
        let source = random_source(rng, config);
        let Ok(program) = parse(&source) else { continue };
        let Ok(typed) = infer(&program) else { continue };
        // exercise the pretty-printer round trip while we are here
        debug_assert_eq!(parse(&pretty(&program)).unwrap(), program);
        let data = program.data_names();
        return (typed, data);
    }
}

fn random_source(rng: &mut ChaCha8Rng, config: &GenConfig) -> String {
    let mut stmts: Vec<String> = Vec::new();
    let mut scalars: Vec<String> = Vec::new(); // real-valued, readable
    let mut next_var = 0usize;

    // a couple of data inputs
    let n_data = rng.gen_range(1..=2);
    for _ in 0..n_data {
        let name = format!("d{next_var}");
        next_var += 1;
        stmts.push(format!("data real {name};"));
        scalars.push(name);
    }

    let n_body = rng.gen_range(3..=config.max_stmts.saturating_sub(2).max(3));
    for _ in 0..n_body {
        if next_var >= config.max_vars {
            break;
        }
        match rng.gen_range(0..10) {
            // deterministic definition
            0..=2 => {
                let name = format!("v{next_var}");
                next_var += 1;
                let e = random_expr(rng, &scalars, 2);
                stmts.push(format!("real {name} = {e};"));
                scalars.push(name);
            }
            // sampled variable
            3..=5 => {
                let name = format!("v{next_var}");
                next_var += 1;
                let loc = random_expr(rng, &scalars, 1);
                let scale = random_scale(rng, &scalars);
                let fam = ["normal", "cauchy", "logistic"][rng.gen_range(0..3)];
                stmts.push(format!("real {name} ~ {fam}({loc}, {scale});"));
                scalars.push(name);
            }
            // observation factor on a data input
            6 => {
                if let Some(d) = pick_data(&stmts, rng) {
                    let loc = random_expr(rng, &scalars, 1);
                    let scale = random_scale(rng, &scalars);
                    stmts.push(format!("{d} ~ normal({loc}, {scale});"));
                }
            }
            // explicit target increment
            7 => {
                let e = random_expr(rng, &scalars, 1);
                stmts.push(format!("target += ({e}) * 0.1;"));
            }
            // conditional with a guard on an existing scalar
            8 => {
                if scalars.is_empty() {
                    continue;
                }
                let g = &scalars[rng.gen_range(0..scalars.len())];
                let name = format!("v{next_var}");
                next_var += 1;
                let e1 = random_expr(rng, &scalars, 1);
                let e2 = random_expr(rng, &scalars, 1);
                stmts.push(format!("real {name};"));
                stmts.push(format!(
                    "if ({g} > 0) {{ {name} = {e1}; }} else {{ {name} = {e2}; }}"
                ));
                scalars.push(name);
            }
            // reassignment of an existing derived variable
            _ => {
                if scalars.len() > n_data {
                    let v = &scalars[rng.gen_range(n_data..scalars.len())];
                    let e = random_expr(rng, &scalars, 1);
                    stmts.push(format!("{v} = {e};"));
                }
            }
        }
    }
    stmts.join("\n")
}

fn pick_data(stmts: &[String], rng: &mut ChaCha8Rng) -> Option<String> {
    let data: Vec<&String> = stmts.iter().filter(|s| s.starts_with("data ")).collect();
    if data.is_empty() {
        return None;
    }
    let line = data[rng.gen_range(0..data.len())];
    line.strip_prefix("data real ")
        .and_then(|s| s.strip_suffix(';'))
        .map(|s| s.to_string())
}

fn random_expr(rng: &mut ChaCha8Rng, scalars: &[String], depth: usize) -> String {
    if depth == 0 || scalars.is_empty() || rng.gen_bool(0.3) {
        if !scalars.is_empty() && rng.gen_bool(0.6) {
            return scalars[rng.gen_range(0..scalars.len())].clone();
        }
        return format!("{:.2}", rng.gen_range(-1.5..1.5f64));
    }
    let a = random_expr(rng, scalars, depth - 1);
    let b = random_expr(rng, scalars, depth - 1);
    match rng.gen_range(0..5) {
        0 => format!("({a} + {b})"),
        1 => format!("({a} - {b})"),
        2 => format!("({a} * 0.5 + {b} * 0.25)"),
        3 => format!("exp(({a}) * 0.2)"),
        _ => format!("({a} / 2.5)"),
    }
}

fn random_scale(rng: &mut ChaCha8Rng, scalars: &[String]) -> String {
    if !scalars.is_empty() && rng.gen_bool(0.3) {
        let v = &scalars[rng.gen_range(0..scalars.len())];
        format!("exp(({v}) * 0.2)")
    } else {
        format!("{:.2}", rng.gen_range(0.3..2.5f64))
    }
}

/// Random input store: values for the data inputs and for every sampled
/// model-level parameter (density evaluation reads them from the store).
pub fn random_inputs(typed: &TypedProgram, rng: &mut ChaCha8Rng) -> Store<f64> {
    let mut store = Store::new();
    for name in typed.program.data_names() {
        store.bind(name, Value::Real(rng.gen_range(-2.0..2.0)));
    }
    for name in typed.model_params() {
        store.bind(name, Value::Real(rng.gen_range(-2.0..2.0)));
    }
    store
}
