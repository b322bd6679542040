use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crowdteacher::annotation::AnswerMatrix;
use crowdteacher::experiment::{
    self, cells, run_cell, run_sweep, Cell, ExperimentConfig, Method, Model,
};
use crowdteacher::inference::InferenceResult;
use crowdteacher::perturb::perturb_dataset;
use crowdteacher::synth::SyntheticPool;
use crowdteacher::tabular::{self, Dataset, FeatureSchema};

#[derive(Parser)]
#[command(name = "crowdteacher", version, about = "Learning from sparse crowd labels")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write every intermediate artifact of each run.
    #[arg(long, global = true)]
    dump_stages: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or load) the dataset and write it with its split.
    GenData,
    /// Simulate annotators on a training CSV.
    Simulate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Overrides `annotation.tau`.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Dawid-Skene truth inference on an answer matrix.
    Infer {
        #[arg(long)]
        answers: PathBuf,
        #[arg(long, default_value_t = 2)]
        classes: usize,
    },
    /// Fit the copula on a training CSV and draw the synthetic pool.
    Synth {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Perturb training rows toward their synthetic neighbours.
    Perturb {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        inference: PathBuf,
        #[arg(long, default_value = "crowdteacher")]
        method: String,
        /// Overrides `perturb.alpha`.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Train one method on (possibly perturbed) rows and inferred labels.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        inference: PathBuf,
        #[arg(long, default_value = "crowdteacher")]
        method: String,
    },
    /// Score a saved model on a labelled CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
    },
    /// Run the full pipeline for every configured method at one seed.
    Run,
    /// Run the Cartesian product of sweep axes, methods and seeds.
    Sweep,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn load_schema(path: &Path) -> Result<FeatureSchema> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing schema {}", path.display()))
}

fn load_data(data: &Path, schema: &Path) -> Result<Dataset> {
    Ok(tabular::load_csv(data, &load_schema(schema)?)?)
}

fn load_inference(path: &Path) -> Result<InferenceResult> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(InferenceResult::read_csv(f)?)
}

fn write(out: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let p = out.join(name);
    fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
    log::info!("wrote {}", p.display());
    Ok(p)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether every run succeeded.
fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.clone());
    let seed = cli.seed;

    match cli.command {
        Command::GenData => {
            let (data, record) = experiment::prepare_data(&cfg, seed)?;
            let (train, test) = experiment::split_stage(&cfg, &data, seed)?;
            fs::create_dir_all(&out)?;
            tabular::save_csv(&data, out.join("data.csv"))?;
            tabular::save_csv(&train, out.join("train.csv"))?;
            tabular::save_csv(&test, out.join("test.csv"))?;
            write(&out, "schema.json", serde_json::to_string_pretty(data.schema())?.as_bytes())?;
            if let Some(r) = record {
                write(&out, "datagen.json", r.to_json()?.as_bytes())?;
            }
            println!("{} rows ({} train, {} test) in {}", data.n_rows(), train.n_rows(), test.n_rows(), out.display());
        }
        Command::Simulate { data, schema, tau } => {
            let train = load_data(&data, &schema)?;
            let answers = experiment::annotate_stage(&cfg, &train, tau.unwrap_or(cfg.annotation.tau), seed)?;
            let mut buf = Vec::new();
            answers.write_csv(&mut buf)?;
            write(&out, "answers.csv", &buf)?;
            println!("mean labels per sample: {}", answers.mean_labels_per_sample());
        }
        Command::Infer { answers, classes } => {
            let a = AnswerMatrix::load_csv(&answers)?;
            let inf = experiment::infer_stage(&cfg, &a, classes)?;
            let mut buf = Vec::new();
            inf.write_csv(&mut buf)?;
            write(&out, "inference.csv", &buf)?;
            println!("{} iterations, converged: {}", inf.iterations, inf.converged);
        }
        Command::Synth { data, schema } => {
            let train = load_data(&data, &schema)?;
            let (_, pool) = experiment::synth_stage(&cfg, &train, seed)?;
            fs::create_dir_all(&out)?;
            tabular::save_csv(pool.data(), out.join("pool.csv"))?;
            println!("{} synthetic rows", pool.len());
        }
        Command::Perturb {
            data,
            schema,
            pool,
            inference,
            method,
            alpha,
        } => {
            let method: Method = method.parse()?;
            let schema = load_schema(&schema)?;
            let train = tabular::load_csv(&data, &schema)?;
            let pool = SyntheticPool(tabular::load_csv(&pool, &schema)?);
            let inf = load_inference(&inference)?;
            let pcfg = experiment::perturb_config(&cfg, method, alpha.unwrap_or(cfg.perturb.alpha), seed);
            let perturbed = perturb_dataset(&train, &pool, &inf.certainty, &pcfg)?;
            fs::create_dir_all(&out)?;
            tabular::save_csv(&perturbed, out.join("training_input.csv"))?;
        }
        Command::Train {
            data,
            schema,
            inference,
            method,
        } => {
            let method: Method = method.parse()?;
            let input = load_data(&data, &schema)?;
            let inf = load_inference(&inference)?;
            let (model, eps) =
                experiment::train_stage(&cfg, method, &input, &inf.hard_labels, &inf.certainty, seed, |_| Ok(None))?;
            write(&out, "model.txt", model.to_text().as_bytes())?;
            if let Model::Pair(pair, _) = &model {
                let mut buf = Vec::new();
                pair.write_trace_csv(&mut buf)?;
                write(&out, "trace.csv", &buf)?;
            }
            if let Some(eps) = eps {
                println!("keep-rate floor: {}", 1.0 - eps);
            }
        }
        Command::Eval { model, data, schema } => {
            let schema = load_schema(&schema)?;
            let test = tabular::load_csv(&data, &schema)?;
            let model = Model::load(&model, &schema)?;
            let (eval, _) = experiment::eval_stage(&model, &test)?;
            let json = serde_json::to_string_pretty(&eval)?;
            write(&out, "eval.json", json.as_bytes())?;
            println!("{json}");
        }
        Command::Run => {
            let mut ok = true;
            for &method in &cfg.method {
                let cell = Cell {
                    method,
                    tau: cfg.annotation.tau,
                    alpha: cfg.perturb.alpha,
                    seed,
                };
                let dump = cli.dump_stages.then(|| out.join(method.name()));
                match run_cell(&cfg, &cell, dump.as_deref()) {
                    Ok(o) => println!(
                        "{method}: auprc {:.4} auroc {:.4} (avg labels {:.3})",
                        o.eval.auprc, o.eval.auroc, o.avg_labels_realized
                    ),
                    Err(e) => {
                        ok = false;
                        eprintln!("{method}: {e}");
                    }
                }
            }
            return Ok(ok);
        }
        Command::Sweep => {
            if cfg.method.is_empty() {
                bail!("no methods configured");
            }
            log::info!("{} cells", cells(&cfg).len());
            let dump = cli.dump_stages.then(|| out.join("stages"));
            let result = run_sweep(&cfg, cli.jobs, dump.as_deref())?;
            write(&out, "results.csv", result.to_csv_string()?.as_bytes())?;
            let mut buf = Vec::new();
            result.write_timings_csv(&mut buf)?;
            write(&out, "timings.csv", &buf)?;
            for a in result.aggregates() {
                println!(
                    "{:<13} tau {:<6} alpha {:<5} auprc {:.4} ± {:.4} ({}/{} ok)",
                    a.method.name(),
                    a.tau,
                    a.alpha,
                    a.auprc_mean,
                    a.auprc_std,
                    a.n_ok,
                    a.n_total
                );
            }
            for f in result.failures() {
                eprintln!("failed: {:?}: {}", f.cell, f.outcome.as_ref().err().unwrap());
            }
            return Ok(result.all_ok());
        }
    }
    Ok(true)
}
