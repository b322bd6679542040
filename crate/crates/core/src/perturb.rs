//! Certainty-weighted perturbation of training rows toward synthetic neighbours.
//!
//! For a row `x` with certainty `c` and source `s`, every continuous cell
//! becomes `(1 - alpha*c) * x + alpha*c * s`, and `round(alpha * c * |F_d|)`
//! randomly chosen discrete cells are replaced by the source's values.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::synth::{select_perturbation_source, SyntheticPool};
use crate::tabular::{Dataset, FeatureSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    /// Scale by each sample's certainty.
    CertaintyWeighted,
    /// Treat every sample as fully certain.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub alpha: f64,
    #[serde(default = "PerturbConfig::default_knn_fraction")]
    pub knn_fraction: f64,
    #[serde(default = "PerturbConfig::default_mode")]
    pub mode: PerturbMode,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbConfig {
    fn default_knn_fraction() -> f64 {
        0.1
    }

    fn default_mode() -> PerturbMode {
        PerturbMode::CertaintyWeighted
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.knn_fraction > 0.0 && self.knn_fraction <= 1.0) {
            return Err(Error::config(format!(
                "knn_fraction {} outside (0, 1]",
                self.knn_fraction
            )));
        }
        Ok(())
    }

    fn weight(&self, certainty: f64) -> f64 {
        match self.mode {
            PerturbMode::CertaintyWeighted => self.alpha * certainty,
            PerturbMode::Uniform => self.alpha,
        }
    }
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            alpha: 0.11,
            knn_fraction: Self::default_knn_fraction(),
            mode: Self::default_mode(),
            seed: 0,
        }
    }
}

/// Number of discrete cells to swap: round(weight * |F_d|).
pub fn discrete_swap_count(weight: f64, n_discrete: usize) -> usize {
    ((weight * n_discrete as f64).round() as usize).min(n_discrete)
}

pub fn perturb_sample(
    schema: &FeatureSchema,
    x: &[f64],
    source: &[f64],
    certainty: f64,
    cfg: &PerturbConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if x.len() != schema.len() || source.len() != schema.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.len(),
            actual: if x.len() != schema.len() { x.len() } else { source.len() },
        });
    }
    if !certainty.is_finite() || !(0.0..=1.0).contains(&certainty) {
        return Err(Error::config(format!("certainty {certainty} outside [0, 1]")));
    }
    let w = cfg.weight(certainty);
    let mut out = x.to_vec();
    for &j in schema.continuous() {
        out[j] = (1.0 - w) * x[j] + w * source[j];
    }
    let discrete = schema.discrete();
    let swaps = discrete_swap_count(w, discrete.len());
    if swaps > 0 {
        for k in index::sample(&mut rng_from_seed(seed), discrete.len(), swaps) {
            let j = discrete[k];
            out[j] = source[j];
        }
    }
    Ok(out)
}

/// Perturbs every row. Row `i` uses a seed derived from `(cfg.seed, i)`, so the
/// output does not depend on evaluation order.
pub fn perturb_dataset(
    d: &Dataset,
    pool: &SyntheticPool,
    certainty: &[f64],
    cfg: &PerturbConfig,
) -> Result<Dataset> {
    cfg.validate()?;
    if certainty.len() != d.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: d.n_rows(),
            actual: certainty.len(),
        });
    }
    d.check_same_schema(pool.data().schema())?;
    let schema = d.schema();
    let rows: Vec<Vec<f64>> = (0..d.n_rows())
        .into_par_iter()
        .map(|i| {
            let row_seed = derive_seed(cfg.seed, i as u64);
            let x = d.row(i);
            let s = select_perturbation_source(
                x,
                pool,
                cfg.knn_fraction,
                derive_seed(row_seed, stream::KNN),
            )?;
            perturb_sample(
                schema,
                x,
                s,
                certainty[i],
                cfg,
                derive_seed(row_seed, stream::SWAP),
            )
        })
        .collect::<Result<_>>()?;
    d.with_features(rows.concat())
}
