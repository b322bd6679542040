//! Simulated crowd annotators.
//!
//! Each sample receives between one and five labels (the count distribution is
//! controlled by the density parameter `tau`) from distinct annotators chosen
//! uniformly. An annotator with reliability `rel` (in percent) starts from the
//! noisy truth, flips `round((100 - rel)%)` of its assigned positives to
//! negative, and flips negatives to positive at `negative_flip_ratio` times
//! that rate.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::index;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tabular::Dataset;

/// Serialized marker for a missing annotation.
pub const MISSING: i64 = -1;

/// Maximum labels per sample in the count distribution.
pub const MAX_LABELS_PER_SAMPLE: usize = 5;

const COUNT_TAIL: [f64; 4] = [0.55, 0.27, 0.13, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    /// Percent chance of labeling a positive sample correctly.
    pub reliability: f64,
}

impl AnnotatorProfile {
    pub fn new(reliability: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&reliability) {
            return Err(Error::config(format!(
                "reliability {reliability} outside [0, 100]"
            )));
        }
        Ok(AnnotatorProfile { reliability })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "R")]
    pub annotators: usize,
    pub tau: f64,
    #[serde(default = "defaults::beta_a")]
    pub beta_a: f64,
    #[serde(default = "defaults::beta_b")]
    pub beta_b: f64,
    /// Beta draws are scaled affinely onto [reliability_min, reliability_max].
    #[serde(default = "defaults::reliability_min")]
    pub reliability_min: f64,
    #[serde(default = "defaults::reliability_max")]
    pub reliability_max: f64,
    #[serde(default = "defaults::negative_flip_ratio")]
    pub negative_flip_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn beta_a() -> f64 {
        8.0
    }
    pub fn beta_b() -> f64 {
        2.0
    }
    pub fn reliability_min() -> f64 {
        50.0
    }
    pub fn reliability_max() -> f64 {
        100.0
    }
    pub fn negative_flip_ratio() -> f64 {
        0.01
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            annotators: 5,
            tau: 0.2024,
            beta_a: defaults::beta_a(),
            beta_b: defaults::beta_b(),
            reliability_min: defaults::reliability_min(),
            reliability_max: defaults::reliability_max(),
            negative_flip_ratio: defaults::negative_flip_ratio(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.annotators == 0 {
            return Err(Error::config("R must be at least 1"));
        }
        check_tau(self.tau)?;
        if !(self.beta_a > 0.0 && self.beta_b > 0.0) {
            return Err(Error::config("beta_a and beta_b must be positive"));
        }
        if !(0.0 <= self.reliability_min
            && self.reliability_min <= self.reliability_max
            && self.reliability_max <= 100.0)
        {
            return Err(Error::config("reliability range must lie within [0, 100]"));
        }
        if !(self.negative_flip_ratio >= 0.0 && self.negative_flip_ratio.is_finite()) {
            return Err(Error::config("negative_flip_ratio must be non-negative"));
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("tau {tau} outside (0, 1]")))
    }
}

/// Probability that a sample receives 1, 2, .., 5 labels.
pub fn label_count_distribution(tau: f64) -> Result<[f64; MAX_LABELS_PER_SAMPLE]> {
    check_tau(tau)?;
    let rest = 1.0 - tau;
    Ok([
        tau,
        COUNT_TAIL[0] * rest,
        COUNT_TAIL[1] * rest,
        COUNT_TAIL[2] * rest,
        COUNT_TAIL[3] * rest,
    ])
}

/// Expected labels per sample under [`label_count_distribution`]: 2.68 - 1.68 tau.
pub fn expected_labels_per_sample(tau: f64) -> Result<f64> {
    Ok(label_count_distribution(tau)?
        .iter()
        .enumerate()
        .map(|(k, p)| (k + 1) as f64 * p)
        .sum())
}

/// N x R matrix of optional class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerMatrix {
    n_samples: usize,
    n_annotators: usize,
    entries: Vec<Option<usize>>,
}

impl AnswerMatrix {
    /// Row-major entries; every row needs at least one label.
    pub fn new(n_samples: usize, n_annotators: usize, entries: Vec<Option<usize>>) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::NoSamples);
        }
        if n_annotators == 0 {
            return Err(Error::config("answer matrix needs at least one annotator"));
        }
        if entries.len() != n_samples * n_annotators {
            return Err(Error::DimensionMismatch {
                expected: n_samples * n_annotators,
                actual: entries.len(),
            });
        }
        let m = AnswerMatrix {
            n_samples,
            n_annotators,
            entries,
        };
        if let Some(i) = (0..n_samples).find(|&i| m.row(i).iter().all(Option::is_none)) {
            return Err(Error::UnannotatedRow(i));
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<Option<usize>>]) -> Result<Self> {
        let r = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != r) {
            return Err(Error::config("ragged answer rows"));
        }
        AnswerMatrix::new(rows.len(), r, rows.concat())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_annotators(&self) -> usize {
        self.n_annotators
    }

    pub fn get(&self, i: usize, r: usize) -> Option<usize> {
        self.entries[i * self.n_annotators + r]
    }

    pub fn row(&self, i: usize) -> &[Option<usize>] {
        &self.entries[i * self.n_annotators..(i + 1) * self.n_annotators]
    }

    /// (annotator, label) pairs present on sample `i`.
    pub fn annotations(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter_map(|(r, a)| a.map(|l| (r, l)))
    }

    pub fn max_label(&self) -> Option<usize> {
        self.entries.iter().flatten().copied().max()
    }

    pub fn labels_per_sample(&self) -> Vec<usize> {
        (0..self.n_samples)
            .map(|i| self.row(i).iter().flatten().count())
            .collect()
    }

    pub fn mean_labels_per_sample(&self) -> f64 {
        self.entries.iter().flatten().count() as f64 / self.n_samples as f64
    }

    /// Same matrix with annotator columns reordered: column `r` of the result
    /// is column `perm[r]` of `self`.
    pub fn permute_annotators(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_annotators {
            return Err(Error::DimensionMismatch {
                expected: self.n_annotators,
                actual: perm.len(),
            });
        }
        let entries = (0..self.n_samples)
            .flat_map(|i| perm.iter().map(move |&p| (i, p)))
            .map(|(i, p)| self.get(i, p))
            .collect();
        AnswerMatrix::new(self.n_samples, self.n_annotators, entries)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.n_annotators).map(|r| format!("r{r}")))?;
        for i in 0..self.n_samples {
            w.write_record(
                self.row(i)
                    .iter()
                    .map(|a| a.map_or(MISSING, |l| l as i64).to_string()),
            )?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let n_annotators = rdr.headers()?.len();
        let mut entries = Vec::new();
        let mut n = 0;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (r, cell) in rec.iter().enumerate() {
                let v: i64 = cell.trim().parse().map_err(|e: std::num::ParseIntError| {
                    Error::Parse {
                        line: row + 2,
                        column: format!("r{r}"),
                        value: cell.into(),
                        reason: e.to_string(),
                    }
                })?;
                entries.push(match v {
                    MISSING => None,
                    v if v >= 0 => Some(v as usize),
                    v => {
                        return Err(Error::Parse {
                            line: row + 2,
                            column: format!("r{r}"),
                            value: v.to_string(),
                            reason: "labels are -1 or non-negative".into(),
                        })
                    }
                });
            }
            n += 1;
        }
        AnswerMatrix::new(n, n_annotators, entries)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

/// Draws annotator reliabilities, then simulates their answers.
pub fn simulate(d: &Dataset, cfg: &SimConfig) -> Result<(AnswerMatrix, Vec<AnnotatorProfile>)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let beta = Beta::new(cfg.beta_a, cfg.beta_b).map_err(|e| Error::config(e.to_string()))?;
    let span = cfg.reliability_max - cfg.reliability_min;
    let profiles = (0..cfg.annotators)
        .map(|_| AnnotatorProfile::new(cfg.reliability_min + span * beta.sample(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let answers = simulate_with_profiles(d, cfg, &profiles, &mut rng)?;
    Ok((answers, profiles))
}

/// Simulation with fixed reliabilities; `cfg.annotators` is ignored in favour
/// of `profiles.len()`.
pub fn simulate_with_profiles<R: rand::Rng>(
    d: &Dataset,
    cfg: &SimConfig,
    profiles: &[AnnotatorProfile],
    rng: &mut R,
) -> Result<AnswerMatrix> {
    let truth = d
        .noisy_labels
        .as_deref()
        .ok_or_else(|| Error::config("annotation simulation needs noisy labels"))?;
    if d.num_classes() != 2 {
        return Err(Error::config("annotation simulation supports binary labels only"));
    }
    let n = d.n_rows();
    let r_count = profiles.len();
    if r_count == 0 {
        return Err(Error::config("no annotators"));
    }

    let counts = WeightedIndex::new(label_count_distribution(cfg.tau)?)
        .map_err(|e| Error::config(e.to_string()))?;
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); r_count];
    let mut clamped = 0usize;
    for i in 0..n {
        let mut k = counts.sample(rng) + 1;
        if k > r_count {
            clamped += 1;
            k = r_count;
        }
        for r in index::sample(rng, r_count, k) {
            assigned[r].push(i);
        }
    }
    if clamped > 0 {
        log::warn!("{clamped} samples drew more labels than the {r_count} annotators; clamped");
    }

    let mut entries = vec![None; n * r_count];
    for (r, (samples, profile)) in assigned.iter_mut().zip(profiles).enumerate() {
        samples.sort_unstable();
        let (positives, negatives): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&i| truth[i] == 1);
        let error_rate = (100.0 - profile.reliability) / 100.0;
        let flip_pos = (error_rate * positives.len() as f64).round() as usize;
        let flip_neg =
            (cfg.negative_flip_ratio * error_rate * negatives.len() as f64).round() as usize;
        for &i in samples.iter() {
            entries[i * r_count + r] = Some(truth[i]);
        }
        for k in index::sample(rng, positives.len(), flip_pos.min(positives.len())) {
            entries[positives[k] * r_count + r] = Some(0);
        }
        for k in index::sample(rng, negatives.len(), flip_neg.min(negatives.len())) {
            entries[negatives[k] * r_count + r] = Some(1);
        }
    }
    AnswerMatrix::new(n, r_count, entries)
}
