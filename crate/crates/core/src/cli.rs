//! Command-line frontend: dataset generation, training, certification, and
//! certified-accuracy curves. Outputs are deterministic given a seed; the
//! only non-reproducible byte is the timestamp isolated on the first line
//! of each output file.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::certify::SmoothingConfig;
use crate::classifier::{load_model, save_model, BaseClassifier, MlpModel};
use crate::cost::CostMatrix;
use crate::data::{gen_synthetic, Dataset};
use crate::error::{Error, Result};
use crate::eval::{radius_grid, run_experiment, ExampleResult};
use crate::rng;
use crate::train::{train, Objective, TrainConfig};

/// Exit code for runtime failures (usage errors exit with clap's 2).
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "cs-smooth", version, about = "Certification and training for cost-sensitive robustness of smoothed classifiers")]
pub struct Cli {
    /// Rayon thread count (also CS_SMOOTH_THREADS); 0 = auto.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset and write train/test CSV files.
    GenData(GenDataArgs),
    /// Train a classifier and save the model file.
    Train(TrainArgs),
    /// Certify a trained model on a test set and write per-example results
    /// plus an aggregate report.
    Certify(CertifyArgs),
    /// Emit a certified-accuracy curve for a trained model.
    Curve(CurveArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Dataset family (currently "blobs-5").
    #[arg(long, default_value = "blobs-5")]
    pub spec: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_train: PathBuf,
    #[arg(long)]
    pub out_test: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training CSV (header "label,f0,f1,...").
    #[arg(long)]
    pub dataset: PathBuf,
    /// Resume training from a previously saved model instead of a fresh
    /// random initialisation.
    #[arg(long)]
    pub init_model: Option<PathBuf>,
    /// Cost matrix shorthand, e.g. "seedwise:3" or "pairwise:3->2,4".
    #[arg(long)]
    pub cost: String,
    /// Number of classes (inferred from the data when omitted).
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value = "cs-macer")]
    pub objective: String,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 4.0)]
    pub gamma1: f64,
    #[arg(long, default_value_t = 16.0)]
    pub gamma2: f64,
    #[arg(long, default_value_t = 1.2)]
    pub alpha_w: f64,
    #[arg(long, default_value_t = 16)]
    pub k_samples: usize,
    #[arg(long, default_value_t = 16.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_model: PathBuf,
    /// Optional per-epoch metrics as JSON lines.
    #[arg(long)]
    pub out_log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub cost: String,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub n0: u64,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-example CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregate report (JSON).
    #[arg(long)]
    pub out_report: PathBuf,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    /// Model file; repeat the flag to compare several models on one cost
    /// matrix. One curve CSV is written per model.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub cost: String,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub n0: u64,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub max_radius: f64,
    #[arg(long, default_value_t = 40)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path, one per --model in the same order.
    #[arg(long, required = true)]
    pub out: Vec<PathBuf>,
}

fn timestamp_line() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated_unix={secs}\n")
}

/// Deterministic comment line embedding the resolved configuration, so every
/// output file records how it was produced.
fn config_line(value: &serde_json::Value) -> Result<String> {
    Ok(format!("# config={}\n", serde_json::to_string(value)?))
}

fn configured_threads(cli_threads: usize) -> usize {
    if cli_threads > 0 {
        return cli_threads;
    }
    std::env::var("CS_SMOOTH_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn init_threads(n: usize) {
    if n > 0 {
        // ignore failure if a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn example_csv(results: &[ExampleResult]) -> String {
    let mut out = String::from(
        "index,label,sensitive,std_prediction,std_radius,std_status,cs_prediction,cs_r1,cs_r2,cs_radius,cs_status\n",
    );
    for r in results {
        let (csp, cs1, cs2, csr, css) = match &r.cost_sensitive {
            Some(c) => (
                c.prediction.to_string(),
                format!("{:.12}", c.r1),
                format!("{:.12}", c.r2),
                format!("{:.12}", c.radius),
                c.status.to_string(),
            ),
            None => (String::new(), String::new(), String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.12},{},{},{},{},{},{}",
            r.index,
            r.label,
            r.sensitive,
            r.standard.prediction,
            r.standard.radius,
            r.standard.status,
            csp,
            cs1,
            cs2,
            csr,
            css
        );
    }
    out
}

/// Run a parsed command. Separated from `main` so tests can drive it.
pub fn run(cli: Cli) -> Result<()> {
    init_threads(configured_threads(cli.threads));
    match cli.command {
        Command::GenData(a) => {
            let (train_set, test_set) = gen_synthetic(&a.spec, a.seed)?;
            train_set.save_csv(&a.out_train)?;
            test_set.save_csv(&a.out_test)?;
            println!(
                "wrote {} train / {} test examples ({} classes, {} features)",
                train_set.len(),
                test_set.len(),
                train_set.m,
                train_set.d
            );
            Ok(())
        }
        Command::Train(a) => {
            let objective: Objective = a.objective.parse()?;
            let data = Dataset::load_csv(&a.dataset, a.classes)?;
            let cost = CostMatrix::parse_shorthand(&a.cost, data.m)?;
            let cfg = TrainConfig {
                objective,
                sigma: a.sigma,
                lambda: a.lambda,
                gamma1: a.gamma1,
                gamma2: a.gamma2,
                alpha_w: a.alpha_w,
                k_samples: a.k_samples,
                beta: a.beta,
                lr: a.lr,
                epochs: a.epochs,
                batch_size: a.batch_size,
                seed: a.seed,
                smooth_max: true,
            };
            let mut model = match &a.init_model {
                Some(path) => match load_model(path)? {
                    BaseClassifier::Mlp(m) => {
                        if m.d != data.d || m.m != data.m {
                            return Err(Error::Config(format!(
                                "initial model has shape {}x{} but the dataset needs {}x{}",
                                m.d, m.m, data.d, data.m
                            )));
                        }
                        m
                    }
                    _ => {
                        return Err(Error::Config(
                            "--init-model must point at a trainable MLP model".into(),
                        ))
                    }
                },
                None => {
                    let mut init_rng = rng::stream(a.seed, "model-init", &[]);
                    MlpModel::new_random(data.d, a.hidden, data.m, a.beta, &mut init_rng)
                }
            };
            let log = train(&mut model, &data, &cost, &cfg)?;
            save_model(&BaseClassifier::Mlp(model), &a.out_model)?;
            if let Some(path) = &a.out_log {
                let mut text = timestamp_line();
                text.push_str(&config_line(&serde_json::json!({
                    "train": cfg,
                    "cost": a.cost,
                    "hidden": a.hidden,
                    "seed": a.seed,
                }))?);
                text.push_str("epoch,i1,i2,i3,total,train_acc\n");
                for e in &log {
                    let _ = writeln!(
                        text,
                        "{},{:.12},{:.12},{:.12},{:.12},{:.6}",
                        e.epoch, e.i1, e.i2, e.i3, e.total, e.train_acc
                    );
                }
                std::fs::write(path, text)?;
            }
            if let Some(last) = log.last() {
                println!(
                    "trained {} epochs; final loss {:.6}, train acc {:.4}",
                    log.len(),
                    last.total,
                    last.train_acc
                );
            }
            Ok(())
        }
        Command::Certify(a) => {
            let cfg = SmoothingConfig {
                sigma: a.sigma,
                n0: a.n0,
                n: a.n,
                alpha: a.alpha,
            };
            cfg.validate()?;
            let model = load_model(&a.model)?;
            let data = Dataset::load_csv(&a.dataset, Some(model.num_classes()))?;
            let cost = CostMatrix::parse_shorthand(&a.cost, data.m)?;
            let grid = radius_grid(2.0 * a.sigma * 4.0, 40);
            let (report, results) =
                run_experiment(&model, &data, &cost, &cfg, a.epsilon, a.seed, &grid)?;
            let mut csv = timestamp_line();
            csv.push_str(&config_line(&serde_json::json!({
                "smoothing": cfg,
                "cost": a.cost,
                "epsilon": a.epsilon,
                "seed": a.seed,
            }))?);
            csv.push_str(&example_csv(&results));
            std::fs::write(&a.out, csv)?;
            std::fs::write(&a.out_report, serde_json::to_string_pretty(&report)? + "\n")?;
            println!(
                "acc={:.4} rob_cs={:.4} rob_cs_std={:.4} rob_non_std={:.4}",
                report.acc, report.rob_cs, report.rob_cs_std, report.rob_non_std
            );
            Ok(())
        }
        Command::Curve(a) => {
            if a.model.len() != a.out.len() {
                return Err(Error::Config(format!(
                    "got {} --model flags but {} --out flags; one output per model",
                    a.model.len(),
                    a.out.len()
                )));
            }
            if a.steps == 0 || !(a.max_radius > 0.0) {
                return Err(Error::Config(
                    "the radius grid is empty; --steps and --max-radius must be positive".into(),
                ));
            }
            let cfg = SmoothingConfig {
                sigma: a.sigma,
                n0: a.n0,
                n: a.n,
                alpha: a.alpha,
            };
            cfg.validate()?;
            // All models share one epsilon grid so their curves line up.
            let grid = radius_grid(a.max_radius, a.steps);
            for (model_path, out_path) in a.model.iter().zip(&a.out) {
                let model = load_model(model_path)?;
                let data = Dataset::load_csv(&a.dataset, Some(model.num_classes()))?;
                let cost = CostMatrix::parse_shorthand(&a.cost, data.m)?;
                let (report, _) = run_experiment(&model, &data, &cost, &cfg, 0.0, a.seed, &grid)?;
                let mut out = timestamp_line();
                out.push_str(&config_line(&serde_json::json!({
                    "smoothing": cfg,
                    "cost": a.cost,
                    "model": model_path,
                    "max_radius": a.max_radius,
                    "steps": a.steps,
                    "seed": a.seed,
                }))?);
                out.push_str("radius,certified_accuracy\n");
                for (r, frac) in &report.curve {
                    let _ = writeln!(out, "{:.6},{:.6}", r, frac);
                }
                std::fs::write(out_path, out)?;
                println!(
                    "wrote {} curve points to {}",
                    report.curve.len(),
                    out_path.display()
                );
            }
            Ok(())
        }
    }
}

/// Entry point used by the binary: parse, run, map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help/--version, 2 for usage errors
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) => 2,
                _ => EXIT_RUNTIME,
            }
        }
    }
}
