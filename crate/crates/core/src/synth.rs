//! Gaussian-copula synthesizer for mixed-type rows, and nearest-neighbour
//! selection of a perturbation source from the synthetic pool.
//!
//! Each column is mapped to normal scores through its marginal. Continuous
//! columns use the empirical CDF with ranks scaled by 1/(N+1); discrete
//! columns map each category to the midpoint of its cumulative-frequency
//! interval (vocabulary order). The latent dependence is the Pearson
//! correlation of those scores.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tabular::{Dataset, FeatureSchema};

/// Smallest eigenvalue allowed in the latent correlation matrix.
pub const MIN_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Marginal {
    /// Sorted training values; inverse CDF interpolates between order statistics.
    Continuous { sorted: Vec<f64> },
    /// Cumulative upper bound of each category's interval, in vocabulary order.
    Discrete { cumulative: Vec<f64> },
    /// Single-valued column, reproduced verbatim.
    Constant { value: f64 },
}

impl Marginal {
    pub fn is_constant(&self) -> bool {
        matches!(self, Marginal::Constant { .. })
    }

    /// Maps a uniform variate back to a cell value.
    fn invert(&self, u: f64) -> f64 {
        match self {
            Marginal::Constant { value } => *value,
            Marginal::Continuous { sorted } => {
                let n = sorted.len();
                let pos = (u * (n + 1) as f64).clamp(1.0, n as f64) - 1.0;
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                let frac = pos - lo as f64;
                sorted[lo] + frac * (sorted[hi] - sorted[lo])
            }
            Marginal::Discrete { cumulative } => {
                let k = cumulative.partition_point(|&c| c <= u);
                // zero-width categories are never selected
                let mut k = k.min(cumulative.len() - 1);
                while k > 0 && cumulative[k] == cumulative[k - 1] {
                    k -= 1;
                }
                k as f64
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CopulaModel {
    schema: FeatureSchema,
    num_classes: usize,
    marginals: Vec<Marginal>,
    correlation: DMatrix<f64>,
    cholesky: DMatrix<f64>,
}

impl CopulaModel {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }
}

/// Synthetic rows sharing the fitting dataset's schema. Carries no labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPool(pub Dataset);

impl SyntheticPool {
    pub fn data(&self) -> &Dataset {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.n_rows() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Mid-ranks (1-based) with ties sharing their average.
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of the columns of `scores` (N x M), identity on
/// rows/columns flagged constant.
fn score_correlation(scores: &DMatrix<f64>, constant: &[bool]) -> DMatrix<f64> {
    let (n, m) = scores.shape();
    let mut centered = scores.clone();
    let mut norms = vec![0.0; m];
    for j in 0..m {
        let mut col = centered.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        norms[j] = col.norm();
    }
    let gram = centered.transpose() * &centered;
    DMatrix::from_fn(m, m, |a, b| {
        if a == b {
            1.0
        } else if constant[a] || constant[b] || norms[a] == 0.0 || norms[b] == 0.0 {
            0.0
        } else {
            (gram[(a, b)] / (norms[a] * norms[b])).clamp(-1.0, 1.0)
        }
    })
}

/// Convex shift toward the identity with the smallest weight that lifts the
/// minimum eigenvalue to `MIN_EIGENVALUE`. Returns the weight used.
pub fn repair_positive_definite(corr: &mut DMatrix<f64>) -> f64 {
    let min_eig = SymmetricEigen::new(corr.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig >= MIN_EIGENVALUE {
        return 0.0;
    }
    // eigenvalues move as (1 - t) * lambda + t
    let t = (MIN_EIGENVALUE - min_eig) / (1.0 - min_eig);
    let m = corr.nrows();
    *corr = corr.scale(1.0 - t) + DMatrix::identity(m, m).scale(t);
    t
}

pub fn fit(d: &Dataset) -> Result<CopulaModel> {
    let n = d.n_rows();
    let m = d.n_cols();
    if n < 2 {
        return Err(Error::Degenerate("copula fit needs at least two rows".into()));
    }
    let phi = std_normal();
    let mut marginals = Vec::with_capacity(m);
    let mut scores = DMatrix::zeros(n, m);
    for (j, col) in d.schema().columns().iter().enumerate() {
        let values: Vec<f64> = d.column(j).collect();
        if values.iter().all(|&v| v == values[0]) {
            if m == 1 {
                return Err(Error::Degenerate(format!(
                    "only column `{}` is constant",
                    col.name
                )));
            }
            marginals.push(Marginal::Constant { value: values[0] });
            continue;
        }
        match col.vocabulary() {
            None => {
                for (i, r) in mid_ranks(&values).into_iter().enumerate() {
                    scores[(i, j)] = phi.inverse_cdf(r / (n + 1) as f64);
                }
                let mut sorted = values;
                sorted.sort_by(f64::total_cmp);
                marginals.push(Marginal::Continuous { sorted });
            }
            Some(vocab) => {
                let mut counts = vec![0usize; vocab.len()];
                for &v in &values {
                    counts[v as usize] += 1;
                }
                let mut cumulative = Vec::with_capacity(vocab.len());
                let mut acc = 0usize;
                let mut midpoint = Vec::with_capacity(vocab.len());
                for &c in &counts {
                    let lo = acc as f64 / n as f64;
                    acc += c;
                    let hi = acc as f64 / n as f64;
                    midpoint.push(phi.inverse_cdf((lo + hi) / 2.0));
                    cumulative.push(hi);
                }
                *cumulative.last_mut().expect("non-empty vocabulary") = 1.0;
                for (i, &v) in values.iter().enumerate() {
                    scores[(i, j)] = midpoint[v as usize];
                }
                marginals.push(Marginal::Discrete { cumulative });
            }
        }
    }
    let constant: Vec<bool> = marginals.iter().map(Marginal::is_constant).collect();
    let mut correlation = score_correlation(&scores, &constant);
    repair_positive_definite(&mut correlation);
    let cholesky = cholesky_factor(&mut correlation)?;
    Ok(CopulaModel {
        schema: d.schema().clone(),
        num_classes: d.num_classes(),
        marginals,
        correlation,
        cholesky,
    })
}

fn cholesky_factor(corr: &mut DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = corr.nrows();
    // Rounding can leave a repaired matrix marginally indefinite; nudge further.
    for attempt in 0..8 {
        if let Some(c) = corr.clone().cholesky() {
            return Ok(c.l());
        }
        let t = MIN_EIGENVALUE * 10f64.powi(attempt + 1);
        *corr = corr.scale(1.0 - t) + DMatrix::identity(m, m).scale(t);
    }
    Err(Error::Degenerate("latent correlation is not positive definite".into()))
}

pub fn sample(model: &CopulaModel, n: usize, seed: u64) -> Result<SyntheticPool> {
    if n == 0 {
        return Err(Error::config("sample size must be at least 1"));
    }
    let m = model.marginals.len();
    let phi = std_normal();
    let mut rng = rng_from_seed(seed);
    let mut features = Vec::with_capacity(n * m);
    for _ in 0..n {
        let g = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = &model.cholesky * g;
        for (j, marginal) in model.marginals.iter().enumerate() {
            features.push(marginal.invert(phi.cdf(z[j])));
        }
    }
    Ok(SyntheticPool(Dataset::new(
        model.schema.clone(),
        features,
        None,
        None,
        model.num_classes,
    )?))
}

/// Squared Euclidean distance over continuous columns plus the number of
/// mismatching discrete columns. Continuous columns are expected to be
/// standardized already.
pub fn mixed_distance(schema: &FeatureSchema, a: &[f64], b: &[f64]) -> f64 {
    let continuous: f64 = schema
        .continuous()
        .iter()
        .map(|&j| (a[j] - b[j]).powi(2))
        .sum();
    let mismatches = schema.discrete().iter().filter(|&&j| a[j] != b[j]).count();
    continuous + mismatches as f64
}

/// Number of neighbours considered for a pool of `pool_len` rows.
pub fn candidate_count(pool_len: usize, fraction: f64) -> usize {
    ((fraction * pool_len as f64).round() as usize).clamp(1, pool_len)
}

/// Indices of the `k` pool rows nearest to `x`, ordered by (distance, index).
pub fn nearest_candidates(x: &[f64], pool: &SyntheticPool, k: usize) -> Vec<usize> {
    let schema = pool.data().schema();
    let mut dist: Vec<(f64, usize)> = pool
        .data()
        .rows()
        .enumerate()
        .map(|(i, row)| (mixed_distance(schema, x, row), i))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(dist.len());
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_key);
        dist.truncate(k);
    }
    dist.sort_unstable_by(by_key);
    dist.into_iter().map(|(_, i)| i).collect()
}

/// Index of a row drawn uniformly from the nearest `fraction` of the pool.
pub fn select_perturbation_index(
    x: &[f64],
    pool: &SyntheticPool,
    fraction: f64,
    seed: u64,
) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::config("empty synthetic pool"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("knn fraction {fraction} outside (0, 1]")));
    }
    if x.len() != pool.data().n_cols() {
        return Err(Error::DimensionMismatch {
            expected: pool.data().n_cols(),
            actual: x.len(),
        });
    }
    let candidates = nearest_candidates(x, pool, candidate_count(pool.len(), fraction));
    let pick = rng_from_seed(seed).random_range(0..candidates.len());
    Ok(candidates[pick])
}

pub fn select_perturbation_source<'p>(
    x: &[f64],
    pool: &'p SyntheticPool,
    fraction: f64,
    seed: u64,
) -> Result<&'p [f64]> {
    Ok(pool.row(select_perturbation_index(x, pool, fraction, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    fn continuous_dataset(cols: usize, values: Vec<f64>) -> Dataset {
        let schema =
            FeatureSchema::new((0..cols).map(|j| Column::continuous(format!("x{j}"))).collect())
                .unwrap();
        Dataset::new(schema, values, None, None, 2).unwrap()
    }

    fn normal_pairs(n: usize, seed: u64, f: impl Fn(f64, f64) -> (f64, f64)) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let a: f64 = Distribution::sample(&StandardNormal, &mut rng);
            let b: f64 = Distribution::sample(&StandardNormal, &mut rng);
            let (x, y) = f(a, b);
            v.push(x);
            v.push(y);
        }
        continuous_dataset(2, v)
    }

    #[test]
    fn independent_columns_have_small_correlation() {
        let m = fit(&normal_pairs(10_000, 1, |a, b| (a, b))).unwrap();
        assert!(m.correlation()[(0, 1)].abs() < 0.05);
    }

    #[test]
    fn monotone_transform_keeps_full_correlation() {
        let m = fit(&normal_pairs(2_000, 2, |a, _| (a, a.powi(3)))).unwrap();
        assert!(m.correlation()[(0, 1)] > 0.99);
        let eig = SymmetricEigen::new(m.correlation().clone()).eigenvalues;
        assert!(eig.iter().all(|&e| e >= MIN_EIGENVALUE * 0.999));
    }

    #[test]
    fn constant_column_is_memorized() {
        let v: Vec<f64> = (0..50).flat_map(|i| [i as f64, 4.5]).collect();
        let m = fit(&continuous_dataset(2, v)).unwrap();
        assert!(m.marginals()[1].is_constant());
        let pool = sample(&m, 200, 3).unwrap();
        assert!(pool.data().column(1).all(|x| x == 4.5));
    }

    #[test]
    fn single_constant_column_is_degenerate() {
        assert!(matches!(
            fit(&continuous_dataset(1, vec![2.0; 10])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn sample_mean_matches() {
        let m = fit(&normal_pairs(5_000, 4, |a, b| (a, b))).unwrap();
        let pool = sample(&m, 10_000, 5).unwrap();
        let mean = pool.data().column(0).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.05, "{mean}");
        assert_eq!(sample(&m, 10, 9).unwrap(), sample(&m, 10, 9).unwrap());
    }

    #[test]
    fn discrete_frequencies_reproduced() {
        let schema = FeatureSchema::new(vec![
            Column::discrete("c", vec!["a", "b"]),
            Column::continuous("x"),
        ])
        .unwrap();
        let v: Vec<f64> = (0..1000).flat_map(|i| [(i % 10 == 0) as u8 as f64, i as f64]).collect();
        let m = fit(&Dataset::new(schema, v, None, None, 2).unwrap()).unwrap();
        let pool = sample(&m, 10_000, 6).unwrap();
        let freq_b = pool.data().column(0).filter(|&c| c == 1.0).count() as f64 / 10_000.0;
        assert!((freq_b - 0.1).abs() <= 0.01, "{freq_b}");
        assert!(pool.data().column(0).all(|c| c == 0.0 || c == 1.0));
    }

    #[test]
    fn pd_repair_is_minimal() {
        // indefinite "correlation"
        let mut c = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let t = repair_positive_definite(&mut c);
        assert!(t > 0.0);
        let min = SymmetricEigen::new(c.clone()).eigenvalues.min();
        assert!((min - MIN_EIGENVALUE).abs() < 1e-12);
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
    }

    fn pool_of(values: &[f64]) -> SyntheticPool {
        SyntheticPool(continuous_dataset(1, values.to_vec()))
    }

    #[test]
    fn k_one_returns_nearest() {
        let pool = pool_of(&[5.0, 1.3, 9.0, -4.0, 3.0, 2.2, 7.0, -1.0, 8.0, 6.0]);
        for seed in 0..5 {
            assert_eq!(select_perturbation_source(&[1.0], &pool, 0.1, seed).unwrap(), &[1.3]);
        }
    }

    #[test]
    fn three_point_pool_picks_closest() {
        // squared distances 0.1, 5, 9
        let pool = pool_of(&[0.1f64.sqrt(), 5f64.sqrt(), 3.0]);
        assert_eq!(candidate_count(3, 0.34), 1);
        assert_eq!(select_perturbation_index(&[0.0], &pool, 0.34, 1).unwrap(), 0);
    }

    #[test]
    fn self_is_a_candidate() {
        let pool = pool_of(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let c = nearest_candidates(&[4.0], &pool, candidate_count(10, 0.3));
        assert_eq!(c, vec![4, 3, 5]);
    }

    #[test]
    fn empty_or_bad_fraction() {
        let pool = pool_of(&[1.0]);
        assert!(select_perturbation_index(&[0.0], &pool, 0.0, 1).is_err());
        assert!(select_perturbation_index(&[0.0], &pool, 1.5, 1).is_err());
    }

    proptest! {
        #[test]
        fn distance_is_a_premetric(
            a in prop::collection::vec(-5.0f64..5.0, 2),
            b in prop::collection::vec(-5.0f64..5.0, 2),
            ca in 0u8..3, cb in 0u8..3,
        ) {
            let schema = FeatureSchema::new(vec![
                Column::continuous("x"),
                Column::discrete("c", vec!["p", "q", "r"]),
                Column::continuous("y"),
            ]).unwrap();
            let ra = [a[0], ca as f64, a[1]];
            let rb = [b[0], cb as f64, b[1]];
            let d = mixed_distance(&schema, &ra, &rb);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, mixed_distance(&schema, &rb, &ra));
            prop_assert_eq!(mixed_distance(&schema, &ra, &ra), 0.0);
            prop_assert_eq!(d == 0.0, ra == rb);
        }
    }
}
