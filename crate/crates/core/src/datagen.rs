//! Synthetic benchmark data: columns drawn from eight distribution families,
//! binary labels from a random quadratic score thresholded at the requested
//! class balance, and a noisy copy of the labels with a fixed number of flips.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Exp1, Geometric, InverseGaussian, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Laplace};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream, StageRng};
use crate::tabular::{Column, Dataset, FeatureSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Beta,
    Wald,
    Laplace,
    Binomial,
    Multinomial,
    Geometric,
    Poisson,
}

pub const FAMILIES: [Family; 8] = [
    Family::Normal,
    Family::Beta,
    Family::Wald,
    Family::Laplace,
    Family::Binomial,
    Family::Multinomial,
    Family::Geometric,
    Family::Poisson,
];

impl Family {
    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            Family::Binomial | Family::Multinomial | Family::Geometric | Family::Poisson
        )
    }

    fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Beta => "beta",
            Family::Wald => "wald",
            Family::Laplace => "laplace",
            Family::Binomial => "binomial",
            Family::Multinomial => "multinomial",
            Family::Geometric => "geometric",
            Family::Poisson => "poisson",
        }
    }
}

/// Closed intervals from which each family's parameters are drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamRanges {
    pub normal_mean: [f64; 2],
    pub normal_std: [f64; 2],
    pub beta_a: [f64; 2],
    pub beta_b: [f64; 2],
    pub wald_mean: [f64; 2],
    pub wald_shape: [f64; 2],
    pub laplace_loc: [f64; 2],
    pub laplace_scale: [f64; 2],
    pub binomial_n: [u64; 2],
    pub binomial_p: [f64; 2],
    pub multinomial_categories: [usize; 2],
    pub geometric_p: [f64; 2],
    pub poisson_lambda: [f64; 2],
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            normal_mean: [-2.0, 2.0],
            normal_std: [0.5, 2.0],
            beta_a: [0.5, 5.0],
            beta_b: [0.5, 5.0],
            wald_mean: [0.5, 3.0],
            wald_shape: [0.5, 3.0],
            laplace_loc: [-2.0, 2.0],
            laplace_scale: [0.5, 2.0],
            binomial_n: [5, 20],
            binomial_p: [0.2, 0.8],
            multinomial_categories: [3, 6],
            geometric_p: [0.1, 0.6],
            poisson_lambda: [1.0, 10.0],
        }
    }
}

impl ParamRanges {
    fn validate(&self) -> Result<()> {
        let real = [
            ("normal_mean", self.normal_mean, f64::NEG_INFINITY),
            ("normal_std", self.normal_std, 0.0),
            ("beta_a", self.beta_a, 0.0),
            ("beta_b", self.beta_b, 0.0),
            ("wald_mean", self.wald_mean, 0.0),
            ("wald_shape", self.wald_shape, 0.0),
            ("laplace_loc", self.laplace_loc, f64::NEG_INFINITY),
            ("laplace_scale", self.laplace_scale, 0.0),
            ("binomial_p", self.binomial_p, -1e-300),
            ("geometric_p", self.geometric_p, 0.0),
            ("poisson_lambda", self.poisson_lambda, 0.0),
        ];
        for (name, [lo, hi], above) in real {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > above) {
                return Err(Error::config(format!("invalid range for {name}: [{lo}, {hi}]")));
            }
        }
        if self.binomial_p[1] > 1.0 || self.geometric_p[1] > 1.0 {
            return Err(Error::config("probabilities must not exceed 1"));
        }
        let [n_lo, n_hi] = self.binomial_n;
        if n_lo == 0 || n_lo > n_hi {
            return Err(Error::config("invalid range for binomial_n"));
        }
        let [c_lo, c_hi] = self.multinomial_categories;
        if c_lo < 2 || c_lo > c_hi {
            return Err(Error::config("multinomial_categories needs 2 <= lo <= hi"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataGenConfig {
    pub features_per_family: usize,
    pub n_samples: usize,
    /// Fraction of positive clean labels.
    pub balance: f64,
    /// Fraction of labels flipped in the noisy copy.
    pub noise_pct: f64,
    pub poly_degree: usize,
    pub param_ranges: ParamRanges,
    pub seed: u64,
}

impl Default for DataGenConfig {
    fn default() -> Self {
        DataGenConfig {
            features_per_family: 5,
            n_samples: 2000,
            balance: 0.31,
            noise_pct: 0.1,
            poly_degree: 2,
            param_ranges: ParamRanges::default(),
            seed: 0,
        }
    }
}

impl DataGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features_per_family == 0 {
            return Err(Error::config("features_per_family must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be at least 1"));
        }
        if !(self.balance > 0.0 && self.balance < 1.0) {
            return Err(Error::config(format!("balance {} outside (0, 1)", self.balance)));
        }
        if !(0.0..1.0).contains(&self.noise_pct) {
            return Err(Error::config(format!("noise_pct {} outside [0, 1)", self.noise_pct)));
        }
        if self.poly_degree == 0 {
            return Err(Error::config("poly_degree must be at least 1"));
        }
        self.param_ranges.validate()
    }
}

/// Parameters drawn for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Normal { mean: f64, std: f64 },
    Beta { a: f64, b: f64 },
    Wald { mean: f64, shape: f64 },
    Laplace { loc: f64, scale: f64 },
    Binomial { n: u64, p: f64 },
    Multinomial { probs: Vec<f64> },
    /// Number of trials up to and including the first success, so support starts at 1.
    Geometric { p: f64 },
    Poisson { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub name: String,
    pub params: FamilyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub coefficient: f64,
}

/// Everything drawn while generating, for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub config: DataGenConfig,
    pub features: Vec<FeatureRecord>,
    pub linear: Vec<f64>,
    pub interactions: Vec<Interaction>,
    /// Largest score among the positive rows.
    pub threshold: f64,
    pub flipped: Vec<usize>,
}

impl GenerationRecord {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub data: Dataset,
    pub record: GenerationRecord,
}

fn uniform(rng: &mut StageRng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn bad(e: impl std::fmt::Display) -> Error {
    Error::config(e.to_string())
}

fn draw_params(family: Family, r: &ParamRanges, rng: &mut StageRng) -> FamilyParams {
    match family {
        Family::Normal => FamilyParams::Normal {
            mean: uniform(rng, r.normal_mean),
            std: uniform(rng, r.normal_std),
        },
        Family::Beta => FamilyParams::Beta {
            a: uniform(rng, r.beta_a),
            b: uniform(rng, r.beta_b),
        },
        Family::Wald => FamilyParams::Wald {
            mean: uniform(rng, r.wald_mean),
            shape: uniform(rng, r.wald_shape),
        },
        Family::Laplace => FamilyParams::Laplace {
            loc: uniform(rng, r.laplace_loc),
            scale: uniform(rng, r.laplace_scale),
        },
        Family::Binomial => FamilyParams::Binomial {
            n: rng.random_range(r.binomial_n[0]..=r.binomial_n[1]),
            p: uniform(rng, r.binomial_p),
        },
        Family::Multinomial => {
            let k = rng.random_range(r.multinomial_categories[0]..=r.multinomial_categories[1]);
            // Dirichlet(1, .., 1) as normalized unit exponentials.
            let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = w.iter().sum();
            FamilyParams::Multinomial {
                probs: w.iter().map(|v| v / total).collect(),
            }
        }
        Family::Geometric => FamilyParams::Geometric {
            p: uniform(rng, r.geometric_p),
        },
        Family::Poisson => FamilyParams::Poisson {
            lambda: uniform(rng, r.poisson_lambda),
        },
    }
}

fn draw_values(params: &FamilyParams, n: usize, rng: &mut StageRng) -> Result<Vec<f64>> {
    let v = match *params {
        FamilyParams::Normal { mean, std } => {
            let d = Normal::new(mean, std).map_err(bad)?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        FamilyParams::Beta { a, b } => {
            let d = Beta::new(a, b).map_err(bad)?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        FamilyParams::Wald { mean, shape } => {
            let d = InverseGaussian::new(mean, shape).map_err(bad)?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        FamilyParams::Laplace { loc, scale } => {
            let d = Laplace::new(loc, scale).map_err(bad)?;
            (0..n)
                .map(|_| d.inverse_cdf(rng.random_range(f64::EPSILON..1.0)))
                .collect()
        }
        FamilyParams::Binomial { n: trials, p } => {
            let d = Binomial::new(trials, p).map_err(bad)?;
            (0..n).map(|_| d.sample(rng) as f64).collect()
        }
        FamilyParams::Multinomial { ref probs } => {
            let d = rand::distr::weighted::WeightedIndex::new(probs).map_err(bad)?;
            (0..n).map(|_| d.sample(rng) as f64).collect()
        }
        FamilyParams::Geometric { p } => {
            let d = Geometric::new(p).map_err(bad)?;
            (0..n).map(|_| (d.sample(rng) + 1) as f64).collect()
        }
        FamilyParams::Poisson { lambda } => {
            let d = Poisson::new(lambda).map_err(bad)?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
    };
    Ok(v)
}

fn standardized(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    v.iter().map(|x| (x - mean) / sd).collect()
}

/// Discrete column: vocabulary of observed integer values in ascending order
/// and the per-row category indices.
fn encode_support(values: &[f64]) -> (Vec<String>, Vec<f64>) {
    let support: BTreeSet<i64> = values.iter().map(|&v| v as i64).collect();
    let support: Vec<i64> = support.into_iter().collect();
    let codes = values
        .iter()
        .map(|&v| support.binary_search(&(v as i64)).unwrap_or_default() as f64)
        .collect();
    (support.iter().map(|v| v.to_string()).collect(), codes)
}

pub fn generate(cfg: &DataGenConfig) -> Result<Generated> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let base = derive_seed(cfg.seed, stream::DATAGEN);

    let mut columns = Vec::new();
    let mut records = Vec::new();
    let mut raw = Vec::new();
    for family in FAMILIES {
        for k in 0..cfg.features_per_family {
            let j = raw.len();
            let mut rng = rng_from_seed(derive_seed(base, j as u64 + 1));
            let params = draw_params(family, &cfg.param_ranges, &mut rng);
            let values = draw_values(&params, n, &mut rng)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{} column draw", family.name())));
            }
            let name = format!("{}_{k}", family.name());
            columns.push(if family.is_discrete() {
                Column::discrete(name.clone(), Vec::<String>::new())
            } else {
                Column::continuous(name.clone())
            });
            records.push(FeatureRecord { name, params });
            raw.push(values);
        }
    }

    // Score: random linear terms plus random pairwise products of the
    // standardized columns.
    let m = raw.len();
    let z: Vec<Vec<f64>> = raw.iter().map(|v| standardized(v)).collect();
    let mut rng = rng_from_seed(derive_seed(base, 0));
    let linear: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut interactions = Vec::new();
    if m >= 2 {
        for _ in 1..cfg.poly_degree {
            for _ in 0..m {
                let pair = index::sample(&mut rng, m, 2);
                let (i, j) = (pair.index(0).min(pair.index(1)), pair.index(0).max(pair.index(1)));
                interactions.push(Interaction {
                    i,
                    j,
                    coefficient: rng.random_range(-1.0..1.0),
                });
            }
        }
    }
    let scores: Vec<f64> = (0..n)
        .map(|r| {
            let lin: f64 = (0..m).map(|c| linear[c] * z[c][r]).sum();
            let quad: f64 = interactions
                .iter()
                .map(|t| t.coefficient * z[t.i][r] * z[t.j][r])
                .sum();
            lin + quad
        })
        .collect();
    if scores.iter().all(|&s| s == scores[0]) {
        return Err(Error::Degenerate("all label scores are equal".into()));
    }

    // The lowest `round(balance * N)` scores are positive.
    let n_pos = (cfg.balance * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut clean = vec![0usize; n];
    for &r in &order[..n_pos] {
        clean[r] = 1;
    }
    let threshold = order[..n_pos]
        .last()
        .map_or(f64::NEG_INFINITY, |&r| scores[r]);

    let n_flip = ((cfg.noise_pct * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
    let mut rng = rng_from_seed(derive_seed(base, u64::MAX));
    let mut flipped = index::sample(&mut rng, n, n_flip).into_vec();
    flipped.sort_unstable();
    let mut noisy = clean.clone();
    for &r in &flipped {
        noisy[r] = 1 - noisy[r];
    }

    let mut features = vec![0.0; n * m];
    for (j, values) in raw.iter().enumerate() {
        let cells = if FAMILIES[j / cfg.features_per_family].is_discrete() {
            let (vocabulary, codes) = encode_support(values);
            columns[j] = Column::discrete(columns[j].name.clone(), vocabulary);
            codes
        } else {
            values.clone()
        };
        for (r, v) in cells.into_iter().enumerate() {
            features[r * m + j] = v;
        }
    }
    let schema = FeatureSchema::new(columns)?;
    let data = Dataset::new(schema, features, Some(clean), Some(noisy), 2)?;
    Ok(Generated {
        data,
        record: GenerationRecord {
            config: cfg.clone(),
            features: records,
            linear,
            interactions,
            threshold,
            flipped,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, seed: u64) -> DataGenConfig {
        DataGenConfig {
            n_samples: n,
            seed,
            ..DataGenConfig::default()
        }
    }

    /// Raw numeric values of column `j`, decoding discrete vocabularies.
    fn raw_column(d: &Dataset, j: usize) -> Vec<f64> {
        let col = &d.schema().columns()[j];
        match col.vocabulary() {
            Some(vocab) => d.column(j).map(|c| vocab[c as usize].parse().unwrap()).collect(),
            None => d.column(j).collect(),
        }
    }

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn shape_and_column_kinds() {
        let g = generate(&cfg(300, 1)).unwrap();
        assert_eq!(g.data.n_cols(), 40);
        assert_eq!(g.data.schema().continuous().len(), 20);
        assert_eq!(g.data.schema().discrete().len(), 20);
        assert_eq!(g.data.schema().columns()[0].name, "normal_0");
        assert_eq!(g.data.schema().columns()[39].name, "poisson_4");
        assert_eq!(g.record.interactions.len(), 40);
    }

    #[test]
    fn class_balance_is_exact() {
        let g = generate(&cfg(10_000, 2)).unwrap();
        let pos = g.data.clean_labels.as_ref().unwrap().iter().sum::<usize>();
        assert!((pos as f64 / 1e4 - 0.31).abs() <= 1e-4);
        for n in [7, 101, 999] {
            let g = generate(&cfg(n, 3)).unwrap();
            let pos = g.data.clean_labels.as_ref().unwrap().iter().sum::<usize>() as f64;
            assert!((pos / n as f64 - 0.31).abs() <= 1.0 / n as f64);
        }
    }

    #[test]
    fn flip_counts() {
        let g = generate(&DataGenConfig {
            noise_pct: 0.0,
            ..cfg(500, 4)
        })
        .unwrap();
        assert_eq!(g.data.clean_labels, g.data.noisy_labels);

        let g = generate(&DataGenConfig {
            noise_pct: 0.1,
            ..cfg(1000, 5)
        })
        .unwrap();
        let (c, y) = (g.data.clean_labels.unwrap(), g.data.noisy_labels.unwrap());
        assert_eq!(c.iter().zip(&y).filter(|(a, b)| a != b).count(), 100);
    }

    #[test]
    fn family_moments() {
        let n = 10_000;
        let g = generate(&cfg(n, 6)).unwrap();
        let nf = n as f64;
        for (j, rec) in g.record.features.iter().enumerate() {
            let v = raw_column(&g.data, j);
            let (m, _) = mean_var(&v);
            // (analytic mean, analytic variance)
            let (mu, var) = match rec.params {
                FamilyParams::Normal { mean, std } => (mean, std * std),
                FamilyParams::Beta { a, b } => {
                    assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
                    (a / (a + b), a * b / ((a + b).powi(2) * (a + b + 1.0)))
                }
                FamilyParams::Wald { mean, shape } => {
                    assert!(v.iter().all(|&x| x > 0.0));
                    (mean, mean.powi(3) / shape)
                }
                FamilyParams::Laplace { loc, scale } => (loc, 2.0 * scale * scale),
                FamilyParams::Binomial { n, p } => {
                    assert!(v.iter().all(|&x| x >= 0.0 && x <= n as f64));
                    (n as f64 * p, n as f64 * p * (1.0 - p))
                }
                FamilyParams::Multinomial { ref probs } => {
                    let mu: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                    let m2: f64 = probs.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
                    (mu, m2 - mu * mu)
                }
                FamilyParams::Geometric { p } => {
                    assert!(v.iter().all(|&x| x >= 1.0));
                    (1.0 / p, (1.0 - p) / (p * p))
                }
                FamilyParams::Poisson { lambda } => {
                    assert!(v.iter().all(|&x| x >= 0.0 && x.fract() == 0.0));
                    (lambda, lambda)
                }
            };
            let sigma = (var / nf).sqrt();
            assert!((m - mu).abs() < 3.0 * sigma, "{}: mean {m} vs {mu}", rec.name);
        }
    }

    #[test]
    fn discrete_vocabulary_is_observed_support() {
        let g = generate(&cfg(400, 7)).unwrap();
        for &j in g.data.schema().discrete() {
            let vocab = g.data.schema().columns()[j].vocabulary().unwrap();
            let used: BTreeSet<usize> = g.data.column(j).map(|c| c as usize).collect();
            assert_eq!(used.len(), vocab.len());
            let nums: Vec<i64> = vocab.iter().map(|s| s.parse().unwrap()).collect();
            assert!(nums.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate(&cfg(200, 8)).unwrap();
        let b = generate(&cfg(200, 8)).unwrap();
        let c = generate(&cfg(200, 9)).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.record, b.record);
        assert_ne!(a.data.features(), c.data.features());
    }

    #[test]
    fn sidecar_round_trip() {
        let g = generate(&cfg(50, 10)).unwrap();
        let json = g.record.to_json().unwrap();
        let back: GenerationRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g.record);
    }

    #[test]
    fn invalid_configs() {
        for bad in [
            DataGenConfig { balance: 1.0, ..cfg(10, 0) },
            DataGenConfig { noise_pct: 1.0, ..cfg(10, 0) },
            DataGenConfig { features_per_family: 0, ..cfg(10, 0) },
            DataGenConfig {
                param_ranges: ParamRanges {
                    beta_a: [2.0, 1.0],
                    ..ParamRanges::default()
                },
                ..cfg(10, 0)
            },
        ] {
            assert!(generate(&bad).is_err());
        }
    }
}
