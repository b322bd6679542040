//! Truth inference from an answer matrix: majority vote and Dawid–Skene EM.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::annotation::AnswerMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsConfig {
    #[serde(default = "DsConfig::default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "DsConfig::default_tol")]
    pub tol: f64,
    /// Additive pseudo-count on every confusion-matrix cell.
    #[serde(default = "DsConfig::default_smoothing")]
    pub smoothing: f64,
}

impl DsConfig {
    fn default_max_iters() -> usize {
        100
    }
    fn default_tol() -> f64 {
        1e-6
    }
    fn default_smoothing() -> f64 {
        1e-2
    }
}

impl Default for DsConfig {
    fn default() -> Self {
        DsConfig {
            max_iters: Self::default_max_iters(),
            tol: Self::default_tol(),
            smoothing: Self::default_smoothing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    num_classes: usize,
    /// N x K class posteriors, row-major.
    pub posteriors: Vec<f64>,
    pub certainty: Vec<f64>,
    /// R stacked K x K confusion matrices; row = true class, column = given label.
    pub confusion: Vec<f64>,
    pub priors: Vec<f64>,
    pub hard_labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Observed-data log-likelihood of the parameters estimated at each iteration.
    pub log_likelihood: Vec<f64>,
}

impl InferenceResult {
    fn from_posteriors(
        posteriors: Vec<f64>,
        num_classes: usize,
        confusion: Vec<f64>,
        priors: Vec<f64>,
    ) -> Self {
        let certainty = certainty_of(&posteriors, num_classes);
        let hard_labels = posteriors.chunks_exact(num_classes).map(argmax).collect();
        InferenceResult {
            num_classes,
            posteriors,
            certainty,
            confusion,
            priors,
            hard_labels,
            iterations: 0,
            converged: true,
            log_likelihood: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn n_samples(&self) -> usize {
        self.certainty.len()
    }

    pub fn posterior(&self, i: usize) -> &[f64] {
        &self.posteriors[i * self.num_classes..(i + 1) * self.num_classes]
    }

    /// Confusion matrix of annotator `r`, row-major K x K.
    pub fn confusion_matrix(&self, r: usize) -> &[f64] {
        let kk = self.num_classes * self.num_classes;
        &self.confusion[r * kk..(r + 1) * kk]
    }

    /// CSV with columns `p0..p{K-1},certainty`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.num_classes).map(|k| format!("p{k}")).collect();
        header.push("certainty".into());
        w.write_record(&header)?;
        for (i, c) in self.certainty.iter().enumerate() {
            let mut rec: Vec<String> = self.posterior(i).iter().map(f64::to_string).collect();
            rec.push(c.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads the posterior CSV written by [`write_csv`]. Confusion matrices
    /// and priors are not part of that format and come back empty.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let k = rdr
            .headers()?
            .len()
            .checked_sub(1)
            .filter(|&k| k >= 2)
            .ok_or_else(|| Error::SchemaMismatch("inference CSV needs p0..pK-1,certainty".into()))?;
        let mut posteriors = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, cell) in rec.iter().take(k).enumerate() {
                posteriors.push(cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: row + 2,
                    column: format!("p{j}"),
                    value: cell.into(),
                    reason: e.to_string(),
                })?);
            }
        }
        if posteriors.is_empty() {
            return Err(Error::NoSamples);
        }
        Ok(Self::from_posteriors(posteriors, k, Vec::new(), Vec::new()))
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = k;
        }
    }
    best
}

fn certainty_of(posteriors: &[f64], num_classes: usize) -> Vec<f64> {
    posteriors
        .chunks_exact(num_classes)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// c_i = max_k P_ik.
pub fn certainty(p: &InferenceResult) -> Vec<f64> {
    certainty_of(&p.posteriors, p.num_classes)
}

fn check_answers(a: &AnswerMatrix, num_classes: usize) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::config("need at least two classes"));
    }
    if let Some(mx) = a.max_label() {
        if mx >= num_classes {
            return Err(Error::config(format!(
                "answer label {mx} outside [0, {num_classes})"
            )));
        }
    }
    Ok(())
}

/// Vote shares per class; confusion matrices are identities.
pub fn majority_vote(a: &AnswerMatrix, num_classes: usize) -> Result<InferenceResult> {
    check_answers(a, num_classes)?;
    let n = a.n_samples();
    let mut posteriors = vec![0.0; n * num_classes];
    for i in 0..n {
        let row = &mut posteriors[i * num_classes..(i + 1) * num_classes];
        let mut total = 0usize;
        for (_, l) in a.annotations(i) {
            row[l] += 1.0;
            total += 1;
        }
        if total == 0 {
            return Err(Error::UnannotatedRow(i));
        }
        row.iter_mut().for_each(|p| *p /= total as f64);
    }
    let priors = class_means(&posteriors, num_classes);
    let mut confusion = vec![0.0; a.n_annotators() * num_classes * num_classes];
    for r in 0..a.n_annotators() {
        for k in 0..num_classes {
            confusion[r * num_classes * num_classes + k * num_classes + k] = 1.0;
        }
    }
    Ok(InferenceResult::from_posteriors(
        posteriors, num_classes, confusion, priors,
    ))
}

fn class_means(posteriors: &[f64], k: usize) -> Vec<f64> {
    let n = (posteriors.len() / k) as f64;
    let mut means = vec![0.0; k];
    for row in posteriors.chunks_exact(k) {
        for (m, p) in means.iter_mut().zip(row) {
            *m += p;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    means
}

/// M-step: class priors and smoothed confusion matrices from posteriors.
fn maximize(
    a: &AnswerMatrix,
    posteriors: &[f64],
    k: usize,
    smoothing: f64,
) -> (Vec<f64>, Vec<f64>) {
    let priors = class_means(posteriors, k);
    let kk = k * k;
    let mut confusion = vec![smoothing; a.n_annotators() * kk];
    for i in 0..a.n_samples() {
        let post = &posteriors[i * k..(i + 1) * k];
        for (r, l) in a.annotations(i) {
            for (true_k, p) in post.iter().enumerate() {
                confusion[r * kk + true_k * k + l] += p;
            }
        }
    }
    for row in confusion.chunks_exact_mut(k) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|c| *c /= s);
    }
    (priors, confusion)
}

/// E-step in log space. Writes new posteriors and returns the observed-data
/// log-likelihood of (priors, confusion).
fn expect(
    a: &AnswerMatrix,
    priors: &[f64],
    confusion: &[f64],
    k: usize,
    out: &mut [f64],
) -> Result<f64> {
    let kk = k * k;
    let log_priors: Vec<f64> = priors.iter().map(|p| p.ln()).collect();
    let log_conf: Vec<f64> = confusion.iter().map(|c| c.ln()).collect();
    let mut loglik = 0.0;
    for i in 0..a.n_samples() {
        let row = &mut out[i * k..(i + 1) * k];
        row.copy_from_slice(&log_priors);
        for (r, l) in a.annotations(i) {
            for (true_k, v) in row.iter_mut().enumerate() {
                *v += log_conf[r * kk + true_k * k + l];
            }
        }
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !mx.is_finite() {
            return Err(Error::NonFinite(format!("posterior of sample {i}")));
        }
        let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
        let log_z = mx + z.ln();
        row.iter_mut().for_each(|v| *v = (*v - log_z).exp());
        loglik += log_z;
    }
    Ok(loglik)
}

/// Dawid–Skene EM initialized from the majority vote. Iterates until the
/// largest posterior change falls below `tol` or `max_iters` is reached.
pub fn dawid_skene(a: &AnswerMatrix, num_classes: usize, cfg: &DsConfig) -> Result<InferenceResult> {
    if cfg.max_iters == 0 {
        return Err(Error::config("max_iters must be at least 1"));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::config("tol must be positive"));
    }
    if !(cfg.smoothing > 0.0) {
        return Err(Error::config("smoothing must be positive"));
    }
    let k = num_classes;
    let init = majority_vote(a, k)?;
    let mut posteriors = init.posteriors;
    let mut next = vec![0.0; posteriors.len()];
    let mut log_likelihood = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    let mut iterations = 0;
    let (mut priors, mut confusion) = (Vec::new(), Vec::new());

    while iterations < cfg.max_iters {
        (priors, confusion) = maximize(a, &posteriors, k, cfg.smoothing);
        log_likelihood.push(expect(a, &priors, &confusion, k, &mut next)?);
        iterations += 1;
        let delta = posteriors
            .iter()
            .zip(&next)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut posteriors, &mut next);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    if posteriors.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("Dawid-Skene posteriors".into()));
    }
    let mut result = InferenceResult::from_posteriors(posteriors, k, confusion, priors);
    result.iterations = iterations;
    result.converged = converged;
    result.log_likelihood = log_likelihood;
    Ok(result)
}
