//! End-to-end pipeline and parameter sweeps.
//!
//! A run is: load or generate data, split 80/20, standardize, simulate
//! annotations on the training rows, infer labels, optionally perturb the
//! training rows, train, and score the clean test labels.
//!
//! Every stage draws its randomness from `derive_seed(derive_seed(run_seed,
//! stage), stage_config_seed)`, so methods that share a stage see identical
//! artifacts for the same run seed.

mod config;
mod model;
mod sweep;

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use config::{
    CsvSource, DataSource, ExperimentConfig, Method, SweepAxes, SynthOptions, ALL_METHODS,
    DEFAULT_ALPHA_GRID, DEFAULT_TAU_GRID,
};
pub use model::Model;
pub use sweep::{cells, run_sweep, Aggregate, Cell, CellResult, SweepResult, RESULT_COLUMNS};

use crate::annotation::{simulate, AnswerMatrix, SimConfig};
use crate::coteach::{
    class_scores, hidden_units, train_base, train_coteaching_refreshed, CoteachConfig, TrainOptions,
};
use crate::datagen::{generate, DataGenConfig, GenerationRecord};
use crate::error::{Error, Result, StageContext};
use crate::inference::{dawid_skene, InferenceResult};
use crate::metrics::{evaluate, EvalResult};
use crate::neural::MlpSpec;
use crate::perturb::{perturb_dataset, PerturbConfig, PerturbMode};
use crate::rng::{derive_seed, stream};
use crate::synth::{self, CopulaModel, SyntheticPool};
use crate::tabular::{self, load_csv, split_train_test, standardize_fit_transform, Dataset};

/// Class whose probability is used as the ranking score.
pub const POSITIVE_CLASS: usize = 1;

/// Seed of one stage within run `run_seed`.
pub fn stage_seed(run_seed: u64, stage: u64, config_seed: u64) -> u64 {
    derive_seed(derive_seed(run_seed, stage), config_seed)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub eval: EvalResult,
    pub avg_labels_realized: f64,
    /// Keep-rate floor used by co-teaching methods.
    pub epsilon: Option<f64>,
    /// SHA-256 of each stage's serialized artifact.
    pub hashes: BTreeMap<&'static str, String>,
}

/// Intermediate artifacts, kept only when dumping.
#[derive(Default)]
struct Artifacts {
    record: Option<GenerationRecord>,
    data: Option<Dataset>,
    train: Option<Dataset>,
    test: Option<Dataset>,
    answers: Option<AnswerMatrix>,
    inference: Option<InferenceResult>,
    pool: Option<SyntheticPool>,
    training_input: Option<Dataset>,
    model: Option<Model>,
    trace: Option<Vec<u8>>,
    scores: Option<Vec<f64>>,
}

struct Hasher {
    hashes: BTreeMap<&'static str, String>,
}

impl Hasher {
    fn dataset(&mut self, stage: &'static str, d: &Dataset) -> Result<()> {
        let text = tabular::to_csv_string(d)?;
        self.hashes.insert(stage, sha256_hex(text.as_bytes()));
        Ok(())
    }

    fn bytes(&mut self, stage: &'static str, bytes: &[u8]) {
        self.hashes.insert(stage, sha256_hex(bytes));
    }
}

/// Loads or generates the full labelled dataset for `run_seed`.
pub fn prepare_data(cfg: &ExperimentConfig, run_seed: u64) -> Result<(Dataset, Option<GenerationRecord>)> {
    match &cfg.data {
        DataSource::Generated(g) => {
            let g = DataGenConfig {
                seed: stage_seed(run_seed, stream::DATAGEN, g.seed),
                ..g.clone()
            };
            let out = generate(&g)?;
            Ok((out.data, Some(out.record)))
        }
        DataSource::Csv(src) => {
            let mut d = load_csv(&src.path, &src.schema)?;
            if d.clean_labels.is_none() {
                return Err(Error::config("CSV data needs a clean_label column for evaluation"));
            }
            if d.noisy_labels.is_none() {
                d.noisy_labels = d.clean_labels.clone();
            }
            Ok((d, None))
        }
    }
}

/// Single run with the config's first method, `annotation.tau` and
/// `perturb.alpha`.
pub fn run_pipeline(cfg: &ExperimentConfig, seed: u64) -> Result<EvalResult> {
    let cell = Cell {
        method: *cfg
            .method
            .first()
            .ok_or_else(|| Error::config("no method configured"))?,
        tau: cfg.annotation.tau,
        alpha: cfg.perturb.alpha,
        seed,
    };
    Ok(run_cell(cfg, &cell, None)?.eval)
}

/// Splits 80/20 (or `test_fraction`) and standardizes both parts with the
/// training statistics.
pub fn split_stage(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_train_test(data, cfg.test_fraction, stage_seed(seed, stream::SPLIT, 0))?;
    let (scaler, train) = standardize_fit_transform(&train)?;
    let test = scaler.apply(&test)?;
    Ok((train, test))
}

pub fn annotate_stage(cfg: &ExperimentConfig, train: &Dataset, tau: f64, seed: u64) -> Result<AnswerMatrix> {
    let sim = SimConfig {
        tau,
        seed: stage_seed(seed, stream::ANNOTATE, cfg.annotation.seed),
        ..cfg.annotation.clone()
    };
    Ok(simulate(train, &sim)?.0)
}

pub fn infer_stage(cfg: &ExperimentConfig, answers: &AnswerMatrix, num_classes: usize) -> Result<InferenceResult> {
    dawid_skene(answers, num_classes, &cfg.inference)
}

fn synth_seed(seed: u64) -> u64 {
    stage_seed(seed, stream::SYNTH, 0)
}

/// Fits the copula on the training rows and draws the synthetic pool.
pub fn synth_stage(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<(CopulaModel, SyntheticPool)> {
    let model = synth::fit(train)?;
    let pool = synth::sample(&model, cfg.synth.pool_size.unwrap_or(train.n_rows()), synth_seed(seed))?;
    Ok((model, pool))
}

pub fn perturb_config(cfg: &ExperimentConfig, method: Method, alpha: f64, seed: u64) -> PerturbConfig {
    PerturbConfig {
        alpha,
        mode: if method == Method::PCoteach {
            PerturbMode::Uniform
        } else {
            PerturbMode::CertaintyWeighted
        },
        seed: stage_seed(seed, stream::PERTURB, cfg.perturb.seed),
        ..cfg.perturb
    }
}

/// Trains `method` on `input` with the inferred `labels`. `refresh` may swap
/// the co-teaching features at each epoch start.
pub fn train_stage(
    cfg: &ExperimentConfig,
    method: Method,
    input: &Dataset,
    labels: &[usize],
    certainty: &[f64],
    seed: u64,
    refresh: impl FnMut(usize) -> Result<Option<Dataset>>,
) -> Result<(Model, Option<f64>)> {
    let train_seed = stage_seed(seed, stream::TRAIN, cfg.coteach.seed);
    if method == Method::BaseClf {
        let spec = MlpSpec::for_schema(
            input.schema(),
            cfg.base_hidden.unwrap_or_else(|| hidden_units(input.n_cols(), 4)),
            input.num_classes(),
            train_seed,
        );
        let opts = TrainOptions {
            seed: train_seed,
            ..cfg.coteach.train_options()
        };
        return Ok((Model::Single(train_base(input, labels, &spec, &opts)?), None));
    }
    let eps = cfg.coteach.noise_rate_estimate.resolve(Some(certainty))?;
    let co_cfg = CoteachConfig {
        seed: train_seed,
        ..cfg.coteach.clone()
    };
    let pair = train_coteaching_refreshed(input, labels, &co_cfg, eps, refresh, |_| {})?;
    Ok((Model::Pair(pair, cfg.coteach.prediction_mode), Some(eps)))
}

/// Scores the positive class on `test` against its clean labels.
pub fn eval_stage(model: &Model, test: &Dataset) -> Result<(EvalResult, Vec<f64>)> {
    let probs = model.predict_proba(test)?;
    let scores = class_scores(&probs, test.num_classes(), POSITIVE_CLASS);
    let truth: Vec<bool> = test
        .clean_labels
        .as_ref()
        .ok_or_else(|| Error::config("test rows need clean labels"))?
        .iter()
        .map(|&l| l == POSITIVE_CLASS)
        .collect();
    Ok((evaluate(&scores, &truth)?, scores))
}

/// Runs one (method, tau, alpha, seed) cell. When `dump` is set, every
/// intermediate artifact is written there.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell, dump: Option<&Path>) -> Result<PipelineOutput> {
    let keep = dump.is_some();
    let mut art = Artifacts::default();
    let mut h = Hasher {
        hashes: BTreeMap::new(),
    };
    let seed = cell.seed;

    let (data, record) = prepare_data(cfg, seed).stage("data")?;
    h.dataset("data", &data)?;

    let (train, test) = split_stage(cfg, &data, seed).stage("split")?;
    h.dataset("train", &train)?;
    h.dataset("test", &test)?;

    let answers = annotate_stage(cfg, &train, cell.tau, seed).stage("annotate")?;
    let mut buf = Vec::new();
    answers.write_csv(&mut buf)?;
    h.bytes("annotations", &buf);

    let inferred = infer_stage(cfg, &answers, train.num_classes()).stage("infer")?;
    let mut buf = Vec::new();
    inferred.write_csv(&mut buf)?;
    h.bytes("inference", &buf);
    let certainty = &inferred.certainty;

    // Training features: the standardized rows, or their perturbed version.
    let perturb_cfg = perturb_config(cfg, cell.method, cell.alpha, seed);
    let mut copula: Option<CopulaModel> = None;
    let training_input = if cell.method.perturbs() {
        let (fitted, pool) = synth_stage(cfg, &train, seed).stage("synth")?;
        h.dataset("pool", pool.data())?;
        let perturbed = perturb_dataset(&train, &pool, certainty, &perturb_cfg).stage("perturb")?;
        copula = Some(fitted);
        if keep {
            art.pool = Some(pool);
        }
        perturbed
    } else {
        train.clone()
    };
    h.dataset("training_input", &training_input)?;

    let pool_size = cfg.synth.pool_size.unwrap_or(train.n_rows());
    let refresh = |epoch: usize| -> Result<Option<Dataset>> {
        match &copula {
            Some(model) if cfg.synth.reperturb_each_epoch => {
                let pool = synth::sample(model, pool_size, derive_seed(synth_seed(seed), epoch as u64))?;
                let c = PerturbConfig {
                    seed: derive_seed(perturb_cfg.seed, epoch as u64),
                    ..perturb_cfg
                };
                perturb_dataset(&train, &pool, certainty, &c).map(Some)
            }
            _ => Ok(None),
        }
    };
    let (model, epsilon) = train_stage(
        cfg,
        cell.method,
        &training_input,
        &inferred.hard_labels,
        certainty,
        seed,
        refresh,
    )
    .stage("train")?;
    if let (true, Model::Pair(pair, _)) = (keep, &model) {
        let mut buf = Vec::new();
        pair.write_trace_csv(&mut buf)?;
        art.trace = Some(buf);
    }
    h.bytes("model", model.to_text().as_bytes());

    let (eval, scores) = eval_stage(&model, &test).stage("eval")?;
    let score_text: String = scores.iter().map(|s| format!("{s}\n")).collect();
    h.bytes("predictions", score_text.as_bytes());

    let avg_labels_realized = answers.mean_labels_per_sample();
    if let Some(dir) = dump {
        art.record = record;
        art.data = Some(data);
        art.train = Some(train);
        art.test = Some(test);
        art.answers = Some(answers);
        art.inference = Some(inferred);
        art.training_input = Some(training_input);
        art.model = Some(model);
        art.scores = Some(scores);
        write_artifacts(dir, &art, &h.hashes, &eval).stage("dump")?;
    }
    Ok(PipelineOutput {
        eval,
        avg_labels_realized,
        epsilon,
        hashes: h.hashes,
    })
}

fn write_artifacts(
    dir: &Path,
    art: &Artifacts,
    hashes: &BTreeMap<&'static str, String>,
    eval: &EvalResult,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    if let Some(r) = &art.record {
        write("datagen.json", r.to_json()?.as_bytes())?;
    }
    for (name, d) in [
        ("data.csv", &art.data),
        ("train.csv", &art.train),
        ("test.csv", &art.test),
        ("training_input.csv", &art.training_input),
    ] {
        if let Some(d) = d {
            tabular::save_csv(d, dir.join(name))?;
        }
    }
    if let Some(d) = &art.data {
        let schema = serde_json::to_string_pretty(d.schema()).map_err(|e| Error::Serde(e.to_string()))?;
        write("schema.json", schema.as_bytes())?;
    }
    if let Some(p) = &art.pool {
        tabular::save_csv(p.data(), dir.join("pool.csv"))?;
    }
    if let Some(a) = &art.answers {
        a.save_csv(dir.join("answers.csv"))?;
    }
    if let Some(inf) = &art.inference {
        let mut buf = Vec::new();
        inf.write_csv(&mut buf)?;
        write("inference.csv", &buf)?;
    }
    if let Some(m) = &art.model {
        m.save(dir.join("model.txt"))?;
    }
    if let Some(t) = &art.trace {
        write("trace.csv", t)?;
    }
    if let Some(s) = &art.scores {
        let text: String = std::iter::once("score\n".to_string())
            .chain(s.iter().map(|v| format!("{v}\n")))
            .collect();
        write("scores.csv", text.as_bytes())?;
    }
    let hash_text: String = hashes.iter().map(|(k, v)| format!("{k},{v}\n")).collect();
    write("hashes.csv", hash_text.as_bytes())?;
    let eval_json = serde_json::to_string_pretty(eval).map_err(|e| Error::Serde(e.to_string()))?;
    write("eval.json", eval_json.as_bytes())
}
