//! `slicc`: check, transform, compile, and run slic models.
//!
//! Exit codes: 0 on success, 1 on runtime failures, 2 on parse or type
//! errors (and usage errors).

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slic_core::condind::{elim_gen, ElimConfig};
use slic_core::data::load_data;
use slic_core::frontend::{line_col, parse, pretty};
use slic_core::inference::{advi, hmc, interleaved_hmc, Draws, HmcConfig, ViConfig};
use slic_core::levels::{infer, TypedProgram};
use slic_core::model::Model;
use slic_core::reparam::{ncp, vip, vip_optimize, LambdaMap, LambdaSpec};
use slic_core::runtime::Store;
use slic_core::shred::{emit, shred};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "slicc", version, about = "Compiler and inference toolkit for slic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model and print the inferred level of every variable.
    Check {
        file: PathBuf,
    },
    /// Slice a model into blocked form and emit it.
    Compile {
        file: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Source-to-source transformations.
    Transform {
        file: PathBuf,
        /// Marginalise discrete parameters (all eligible ones when no
        /// list is given).
        #[arg(long, value_name = "VARS", num_args = 0..=1, default_missing_value = "", require_equals = true)]
        marginalize: Option<String>,
        /// Non-centre location-scale sites (all eligible ones when no
        /// list is given).
        #[arg(long, value_name = "VARS", num_args = 0..=1, default_missing_value = "", require_equals = true)]
        ncp: Option<String>,
        /// Interpolated reparameterisation: a single lambda for all
        /// sites (`0.5`), per-site values (`z=0.2,m=1`), or a JSON map
        /// produced by `slicc vip` (`@lambda.json`).
        #[arg(long, value_name = "SPEC")]
        vip: Option<String>,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draw posterior samples with leapfrog HMC.
    Sample(SampleArgs),
    /// Fit a mean-field variational guide.
    Vi(ViArgs),
    /// Optimise per-site interpolation coefficients.
    Vip(VipArgs),
}

#[derive(Args)]
struct SampleArgs {
    file: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Total iterations including warmup.
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    /// Leapfrog step size.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Leapfrog steps per transition.
    #[arg(long, default_value_t = 16)]
    steps: usize,
    /// RNG seed (falls back to SLICC_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// RNG stream; distinct chains use distinct streams.
    #[arg(long, default_value_t = 0)]
    chain: u64,
    /// Alternate centred and non-centred transitions.
    #[arg(long)]
    interleaved: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ViArgs {
    file: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    samples: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Guide output (JSON); stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// ELBO trace CSV; defaults to `<output>.elbo.csv` when -o is set.
    #[arg(long)]
    elbo: Option<PathBuf>,
}

#[derive(Args)]
struct VipArgs {
    file: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    samples: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Lambda map output (JSON name -> value or list).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Guide output (JSON), optional.
    #[arg(long)]
    guide: Option<PathBuf>,
    /// ELBO trace CSV, optional.
    #[arg(long)]
    elbo: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn typing(message: String) -> Failure {
        Failure { code: 2, message }
    }

    fn runtime(message: String) -> Failure {
        Failure { code: 1, message }
    }
}

fn env_seed() -> u64 {
    std::env::var("SLICC_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn read_source(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::runtime(format!("cannot read {}: {e}", path.display())))
}

fn load_typed(path: &Path) -> Result<(String, TypedProgram), Failure> {
    let source = read_source(path)?;
    let program = parse(&source).map_err(|e| {
        let (line, col) = line_col(&source, e.span().start);
        Failure::typing(format!("{}:{line}:{col}: {e}", path.display()))
    })?;
    let typed = infer(&program).map_err(|e| {
        let (line, col) = line_col(&source, e.span().start);
        Failure::typing(format!("{}:{line}:{col}: {e}", path.display()))
    })?;
    Ok((source, typed))
}

fn load_store(typed: &TypedProgram, data: &Option<PathBuf>) -> Result<(Store<f64>, Option<(PathBuf, String)>), Failure> {
    match data {
        None => Ok((Store::new(), None)),
        Some(path) => {
            let text = read_source(path)?;
            let store = load_data(&typed.program, &text)
                .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
            Ok((store, Some((path.clone(), text))))
        }
    }
}

fn write_output(output: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display()))),
    }
}

fn build_model(typed: &TypedProgram, store: &Store<f64>) -> Result<Model, Failure> {
    Model::new(typed.clone(), store).map_err(|e| Failure::typing(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Check { file } => {
            let (_, typed) = load_typed(&file)?;
            let mut out = String::new();
            for (name, level) in typed.ordered_levels() {
                out.push_str(&format!("{name}: {level}\n"));
            }
            print!("{out}");
            Ok(())
        }
        Command::Compile { file, output } => {
            let (source, typed) = load_typed(&file)?;
            if let Some(d) = typed.discrete_model_params().first() {
                return Err(Failure::typing(format!(
                    "discrete model-level parameter `{d}`; run `slicc transform --marginalize` first"
                )));
            }
            let text = emit(&shred(&typed));
            write_output(&output, &text)?;
            if let Some(path) = &output {
                let m = RunManifest::new(
                    argv,
                    &file,
                    &source,
                    None,
                    0,
                    serde_json::json!({"subcommand": "compile"}),
                );
                m.write_alongside(path)
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            Ok(())
        }
        Command::Transform {
            file,
            marginalize,
            ncp: ncp_arg,
            vip: vip_arg,
            output,
        } => {
            let (source, typed) = load_typed(&file)?;
            let mut program = typed.program.clone();
            let mut current = typed;

            if let Some(list) = &marginalize {
                let plan: Option<Vec<String>> = if list.is_empty() {
                    None
                } else {
                    Some(list.split(',').map(|s| s.trim().to_string()).collect())
                };
                let outcome = elim_gen(&current, plan.as_deref(), &ElimConfig::default())
                    .map_err(|e| Failure::typing(e.to_string()))?;
                current = outcome.typed;
                program = current.program.clone();
            }
            if let Some(list) = &ncp_arg {
                let names: Option<Vec<String>> = if list.is_empty() {
                    None
                } else {
                    Some(list.split(',').map(|s| s.trim().to_string()).collect())
                };
                program = ncp(&current, names.as_deref())
                    .map_err(|e| Failure::typing(e.to_string()))?;
                current = infer(&program).map_err(|e| Failure::typing(e.to_string()))?;
            }
            if let Some(spec) = &vip_arg {
                let lambda = parse_lambda_spec(spec, &current)?;
                program = vip(&current, &lambda).map_err(|e| Failure::typing(e.to_string()))?;
                infer(&program).map_err(|e| Failure::typing(e.to_string()))?;
            }

            let text = pretty(&program);
            write_output(&output, &text)?;
            if let Some(path) = &output {
                let m = RunManifest::new(
                    argv,
                    &file,
                    &source,
                    None,
                    0,
                    serde_json::json!({"subcommand": "transform"}),
                );
                m.write_alongside(path)
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            Ok(())
        }
        Command::Sample(args) => {
            let (source, typed) = load_typed(&args.file)?;
            let (store, data_info) = load_store(&typed, &args.data)?;
            let model = build_model(&typed, &store)?;
            let seed = args.seed.unwrap_or_else(env_seed);
            let config = HmcConfig {
                step_size: args.eps,
                leapfrog_steps: args.steps,
                iterations: args.iters,
                warmup: args.warmup,
                seed,
                chain: args.chain,
                ..HmcConfig::default()
            };
            let draws = if args.interleaved {
                interleaved_hmc(&model, &config)
            } else {
                hmc(&model, &config)
            }
            .map_err(|e| Failure::runtime(e.to_string()))?;
            let csv = draws_csv(&draws);
            write_output(&args.output, &csv)?;
            if let Some(path) = &args.output {
                let m = RunManifest::new(
                    argv,
                    &args.file,
                    &source,
                    data_info.as_ref().map(|(p, t)| (p.as_path(), t.as_str())),
                    seed,
                    serde_json::json!({
                        "subcommand": "sample",
                        "eps": config.step_size,
                        "steps": config.leapfrog_steps,
                        "iters": config.iterations,
                        "warmup": config.warmup,
                        "chain": config.chain,
                        "divergence_threshold": config.divergence_threshold,
                        "interleaved": args.interleaved,
                    }),
                );
                m.write_alongside(path)
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            Ok(())
        }
        Command::Vi(args) => {
            let (source, typed) = load_typed(&args.file)?;
            let (store, data_info) = load_store(&typed, &args.data)?;
            let model = build_model(&typed, &store)?;
            let seed = args.seed.unwrap_or_else(env_seed);
            let config = ViConfig {
                steps: args.steps,
                samples: args.samples,
                lr: args.lr,
                seed,
            };
            let out = advi(&model, &config).map_err(|e| Failure::runtime(e.to_string()))?;
            let guide_json = guide_json(&out.guide);
            write_output(&args.output, &guide_json)?;
            let elbo_path = args
                .elbo
                .clone()
                .or_else(|| args.output.as_ref().map(|p| elbo_default(p)));
            if let Some(path) = &elbo_path {
                std::fs::write(path, elbo_csv(&out.elbo_trace))
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            if let Some(path) = &args.output {
                let m = RunManifest::new(
                    argv,
                    &args.file,
                    &source,
                    data_info.as_ref().map(|(p, t)| (p.as_path(), t.as_str())),
                    seed,
                    serde_json::json!({
                        "subcommand": "vi",
                        "steps": config.steps,
                        "samples": config.samples,
                        "lr": config.lr,
                    }),
                );
                m.write_alongside(path)
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            Ok(())
        }
        Command::Vip(args) => {
            let (source, typed) = load_typed(&args.file)?;
            let (store, data_info) = load_store(&typed, &args.data)?;
            let seed = args.seed.unwrap_or_else(env_seed);
            let config = ViConfig {
                steps: args.steps,
                samples: args.samples,
                lr: args.lr,
                seed,
            };
            let out =
                vip_optimize(&typed, &store, &config).map_err(|e| Failure::runtime(e.to_string()))?;
            let lambda_json = lambda_json(&out.lambda);
            write_output(&args.out, &lambda_json)?;
            if let Some(path) = &args.guide {
                std::fs::write(path, guide_json(&out.guide))
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            if let Some(path) = &args.elbo {
                std::fs::write(path, elbo_csv(&out.elbo_trace))
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            if let Some(path) = &args.out {
                let m = RunManifest::new(
                    argv,
                    &args.file,
                    &source,
                    data_info.as_ref().map(|(p, t)| (p.as_path(), t.as_str())),
                    seed,
                    serde_json::json!({
                        "subcommand": "vip",
                        "steps": config.steps,
                        "samples": config.samples,
                        "lr": config.lr,
                    }),
                );
                m.write_alongside(path)
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            }
            Ok(())
        }
    }
}

fn parse_lambda_spec(spec: &str, typed: &TypedProgram) -> Result<LambdaMap, Failure> {
    let mut map = LambdaMap::new();
    if let Some(path) = spec.strip_prefix('@') {
        let text = read_source(Path::new(path))?;
        let parsed: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::runtime(format!("{path}: {e}")))?;
        let obj = parsed
            .as_object()
            .ok_or_else(|| Failure::runtime(format!("{path}: expected a JSON object")))?;
        for (name, v) in obj {
            let lam = match v {
                serde_json::Value::Number(n) => LambdaSpec::Scalar(n.as_f64().unwrap_or(f64::NAN)),
                serde_json::Value::Array(items) => LambdaSpec::PerElement(
                    items
                        .iter()
                        .map(|x| x.as_f64().unwrap_or(f64::NAN))
                        .collect(),
                ),
                _ => return Err(Failure::runtime(format!("{path}: `{name}` must be a number or list"))),
            };
            map.insert(name.clone(), lam);
        }
        return Ok(map);
    }
    if let Ok(v) = spec.parse::<f64>() {
        // one value for every eligible site
        for site in slic_core::reparam::find_sites(typed) {
            map.insert(site.var.clone(), LambdaSpec::Scalar(v));
        }
        return Ok(map);
    }
    for part in spec.split(',') {
        let Some((name, value)) = part.split_once('=') else {
            return Err(Failure::typing(format!("bad lambda spec `{part}`; use name=value")));
        };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Failure::typing(format!("bad lambda value `{value}`")))?;
        map.insert(name.trim().to_string(), LambdaSpec::Scalar(v));
    }
    Ok(map)
}

fn draws_csv(draws: &Draws) -> String {
    draws.to_csv()
}

fn guide_json(guide: &slic_core::inference::Guide) -> String {
    let entries: Vec<serde_json::Value> = guide
        .labels
        .iter()
        .zip(guide.mean.iter().zip(&guide.log_sd))
        .map(|(label, (m, s))| {
            serde_json::json!({
                "name": label,
                "mean": m,
                "sd": s.exp(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "guide": entries })).unwrap() + "\n"
}

fn lambda_json(lambda: &LambdaMap) -> String {
    let mut obj = serde_json::Map::new();
    for (name, spec) in lambda {
        let v = match spec {
            LambdaSpec::Scalar(v) => serde_json::json!(v),
            LambdaSpec::PerElement(vs) => serde_json::json!(vs),
        };
        obj.insert(name.clone(), v);
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(obj)).unwrap() + "\n"
}

fn elbo_csv(trace: &[f64]) -> String {
    let mut out = String::from("step,elbo\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{},{v:?}\n", i + 1));
    }
    out
}

fn elbo_default(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".elbo.csv");
    output.with_file_name(name)
}
