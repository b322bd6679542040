//! Co-teaching with a wide teacher and a half-width student, plus the single
//! network baseline.
//!
//! Each mini-batch, both networks rank the batch by their own per-sample loss
//! and keep the smallest fraction; the teacher is then updated on the
//! student's selection and the student on the teacher's.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{per_sample_loss, Adam, ForwardCache, InputEncoder, MlpSpec, Network};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::tabular::{Dataset, FeatureSchema};

/// Noise-rate estimate used for the keep-rate floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseRateRepr", into = "NoiseRateRepr")]
pub enum NoiseRate {
    Fixed(f64),
    /// One minus the mean inferred certainty.
    FromCertainty,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NoiseRateRepr {
    Number(f64),
    Name(String),
}

impl TryFrom<NoiseRateRepr> for NoiseRate {
    type Error = String;

    fn try_from(r: NoiseRateRepr) -> std::result::Result<Self, String> {
        match r {
            NoiseRateRepr::Number(v) if (0.0..1.0).contains(&v) => Ok(NoiseRate::Fixed(v)),
            NoiseRateRepr::Number(v) => Err(format!("noise rate {v} outside [0, 1)")),
            NoiseRateRepr::Name(s) if s == "from_certainty" => Ok(NoiseRate::FromCertainty),
            NoiseRateRepr::Name(s) => Err(format!("unknown noise rate `{s}`")),
        }
    }
}

impl From<NoiseRate> for NoiseRateRepr {
    fn from(n: NoiseRate) -> Self {
        match n {
            NoiseRate::Fixed(v) => NoiseRateRepr::Number(v),
            NoiseRate::FromCertainty => NoiseRateRepr::Name("from_certainty".into()),
        }
    }
}

impl NoiseRate {
    pub fn resolve(&self, certainty: Option<&[f64]>) -> Result<f64> {
        match *self {
            NoiseRate::Fixed(v) if (0.0..1.0).contains(&v) => Ok(v),
            NoiseRate::Fixed(v) => Err(Error::config(format!("noise rate {v} outside [0, 1)"))),
            NoiseRate::FromCertainty => {
                let c = certainty
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| Error::config("from_certainty needs a certainty vector"))?;
                let mean = c.iter().sum::<f64>() / c.len() as f64;
                Ok((1.0 - mean).clamp(0.0, 1.0 - 1e-9))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    #[default]
    AverageBoth,
    TeacherOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoteachConfig {
    /// Teacher width; `None` means half the raw feature count, rounded up.
    pub teacher_hidden: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub noise_rate_estimate: NoiseRate,
    pub ramp_epochs: usize,
    pub lr: f64,
    pub prediction_mode: PredictionMode,
    pub seed: u64,
}

impl Default for CoteachConfig {
    fn default() -> Self {
        CoteachConfig {
            teacher_hidden: None,
            epochs: 100,
            batch_size: 128,
            noise_rate_estimate: NoiseRate::FromCertainty,
            ramp_epochs: 10,
            lr: 1e-3,
            prediction_mode: PredictionMode::AverageBoth,
            seed: 0,
        }
    }
}

impl CoteachConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ramp_epochs == 0 {
            return Err(Error::config("ramp_epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr must be positive"));
        }
        if self.teacher_hidden == Some(0) {
            return Err(Error::config("teacher_hidden must be positive"));
        }
        Ok(())
    }

    /// (teacher, student) hidden widths for `n_features` raw columns.
    pub fn widths(&self, n_features: usize) -> (usize, usize) {
        let teacher = self
            .teacher_hidden
            .unwrap_or_else(|| hidden_units(n_features, 2));
        (teacher, teacher.div_ceil(2))
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
        }
    }
}

/// `ceil(n_features / divisor)`, at least 2.
pub fn hidden_units(n_features: usize, divisor: usize) -> usize {
    n_features.div_ceil(divisor).max(2)
}

/// R(T) = 1 - eps * min(T / T_k, 1).
pub fn keep_rate(epoch: usize, epsilon: f64, ramp_epochs: usize) -> f64 {
    1.0 - epsilon * (epoch as f64 / ramp_epochs.max(1) as f64).min(1.0)
}

/// Number of rows kept from a batch of `b` at `rate`.
pub fn selection_size(b: usize, rate: f64) -> usize {
    // The small slack keeps exact products such as 0.8 * 5 from rounding up.
    ((rate * b as f64 - 1e-9).ceil() as usize).clamp(1, b)
}

/// Indices of the `ceil(rate * B)` smallest losses, ties to the lower index,
/// returned in ascending index order.
pub fn select_small_loss(losses: &[f64], rate: f64) -> Result<Vec<usize>> {
    if losses.is_empty() {
        return Err(Error::NoSamples);
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::config(format!("keep rate {rate} outside (0, 1]")));
    }
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    order.truncate(selection_size(losses.len(), rate));
    order.sort_unstable();
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochTrace {
    pub keep_rate: f64,
    /// Mean loss of each network over the rows it was updated on.
    pub teacher_loss: f64,
    pub student_loss: f64,
    /// Fraction of training rows on which the two hard predictions agree.
    pub agreement: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedPair {
    pub teacher: Network,
    pub student: Network,
    pub trace: Vec<EpochTrace>,
    encoder: InputEncoder,
}

impl TrainedPair {
    /// Reassembles a pair from saved networks; the trace is left empty.
    pub fn from_networks(teacher: Network, student: Network, schema: &FeatureSchema) -> Result<Self> {
        let encoder = InputEncoder::new(schema);
        for net in [&teacher, &student] {
            if net.input_dim() != encoder.dim() {
                return Err(Error::DimensionMismatch {
                    expected: encoder.dim(),
                    actual: net.input_dim(),
                });
            }
        }
        if teacher.output_dim() != student.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: teacher.output_dim(),
                actual: student.output_dim(),
            });
        }
        Ok(TrainedPair {
            teacher,
            student,
            trace: Vec::new(),
            encoder,
        })
    }

    pub fn encoder(&self) -> &InputEncoder {
        &self.encoder
    }

    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "keep_rate", "teacher_loss", "student_loss", "agreement"])?;
        for (e, t) in self.trace.iter().enumerate() {
            w.write_record([
                e.to_string(),
                t.keep_rate.to_string(),
                t.teacher_loss.to_string(),
                t.student_loss.to_string(),
                t.agreement.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}

/// What one co-teaching update did, for instrumentation.
#[derive(Debug, Clone)]
pub struct BatchEvent<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub keep_rate: f64,
    pub batch_len: usize,
    /// Small-loss rows chosen by each network, as batch positions.
    pub teacher_selection: &'a [usize],
    pub student_selection: &'a [usize],
    /// Rows whose gradients were applied to each network.
    pub teacher_update: &'a [usize],
    pub student_update: &'a [usize],
}

fn check_labels(d: &Dataset, labels: &[usize]) -> Result<()> {
    if labels.len() != d.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: d.n_rows(),
            actual: labels.len(),
        });
    }
    if d.n_rows() == 0 {
        return Err(Error::NoSamples);
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= d.num_classes()) {
        return Err(Error::config(format!("label {l} outside [0, {})", d.num_classes())));
    }
    Ok(())
}

fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let base = derive_seed(seed, stream::SHUFFLE);
    order.shuffle(&mut rng_from_seed(derive_seed(base, epoch as u64)));
    order
}

fn gather(inputs: &[f64], dim: usize, labels: &[usize], rows: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let mut x = Vec::with_capacity(rows.len() * dim);
    for &r in rows {
        x.extend_from_slice(&inputs[r * dim..(r + 1) * dim]);
    }
    (x, rows.iter().map(|&r| labels[r]).collect())
}

fn mean_at(losses: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| losses[i]).sum::<f64>() / idx.len() as f64
}

fn hard_predictions(net: &Network, inputs: &[f64]) -> Result<Vec<usize>> {
    Ok(net
        .forward(inputs)?
        .chunks_exact(net.output_dim())
        .map(argmax)
        .collect())
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
        .0
}

fn stage_err(e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} during training")),
        other => other,
    }
}

/// Trains one network on every sample, in shuffled mini-batches.
pub fn train_base(d: &Dataset, labels: &[usize], spec: &MlpSpec, opts: &TrainOptions) -> Result<Network> {
    check_labels(d, labels)?;
    if opts.batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    let encoder = InputEncoder::new(d.schema());
    if spec.input_dim != encoder.dim() || spec.output_dim != d.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: encoder.dim(),
            actual: spec.input_dim,
        });
    }
    let inputs = encoder.encode(d)?;
    let mut net = Network::new(spec)?;
    let mut opt = Adam::new(opts.lr, net.param_count());
    for epoch in 0..opts.epochs {
        for rows in epoch_order(opts.seed, epoch, d.n_rows()).chunks(opts.batch_size) {
            let (x, y) = gather(&inputs, encoder.dim(), labels, rows);
            let all: Vec<usize> = (0..rows.len()).collect();
            let g = net.backward(&x, &y, &all)?;
            net.step(&mut opt, &g).map_err(stage_err)?;
        }
    }
    Ok(net)
}

pub fn train_coteaching(d: &Dataset, labels: &[usize], cfg: &CoteachConfig, epsilon: f64) -> Result<TrainedPair> {
    train_coteaching_observed(d, labels, cfg, epsilon, |_| {})
}

/// Like [`train_coteaching`], calling `observe` after every mini-batch update.
pub fn train_coteaching_observed(
    d: &Dataset,
    labels: &[usize],
    cfg: &CoteachConfig,
    epsilon: f64,
    observe: impl FnMut(&BatchEvent),
) -> Result<TrainedPair> {
    train_coteaching_refreshed(d, labels, cfg, epsilon, |_| Ok(None), observe)
}

/// Co-teaching where `refresh(epoch)` may replace the training features at
/// the start of each epoch after the first. Labels stay fixed.
pub fn train_coteaching_refreshed(
    d: &Dataset,
    labels: &[usize],
    cfg: &CoteachConfig,
    epsilon: f64,
    mut refresh: impl FnMut(usize) -> Result<Option<Dataset>>,
    mut observe: impl FnMut(&BatchEvent),
) -> Result<TrainedPair> {
    cfg.validate()?;
    check_labels(d, labels)?;
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::config(format!("noise rate {epsilon} outside [0, 1)")));
    }
    let encoder = InputEncoder::new(d.schema());
    let dim = encoder.dim();
    let mut inputs = encoder.encode(d)?;
    let (th, sh) = cfg.widths(d.n_cols());
    let spec = |hidden, stream_id| MlpSpec {
        input_dim: dim,
        hidden_units: hidden,
        output_dim: d.num_classes(),
        activation: Default::default(),
        seed: derive_seed(cfg.seed, stream_id),
    };
    let mut teacher = Network::new(&spec(th, stream::TEACHER_INIT))?;
    let mut student = Network::new(&spec(sh, stream::STUDENT_INIT))?;
    let mut t_opt = Adam::new(cfg.lr, teacher.param_count());
    let mut s_opt = Adam::new(cfg.lr, student.param_count());

    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            if let Some(fresh) = refresh(epoch)? {
                d.check_same_schema(fresh.schema())?;
                if fresh.n_rows() != d.n_rows() {
                    return Err(Error::DimensionMismatch {
                        expected: d.n_rows(),
                        actual: fresh.n_rows(),
                    });
                }
                inputs = encoder.encode(&fresh)?;
            }
        }
        let rate = keep_rate(epoch, epsilon, cfg.ramp_epochs);
        let (mut t_sum, mut s_sum, mut n_batches) = (0.0, 0.0, 0usize);
        let order = epoch_order(cfg.seed, epoch, d.n_rows());
        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = gather(&inputs, dim, labels, rows);
            let (tc, sc): (Result<ForwardCache>, Result<ForwardCache>) =
                rayon::join(|| teacher.forward_cached(&x), || student.forward_cached(&x));
            let (tc, sc) = (tc?, sc?);
            let t_loss = per_sample_loss(&tc.probs, &y, teacher.output_dim())?;
            let s_loss = per_sample_loss(&sc.probs, &y, student.output_dim())?;
            let t_sel = select_small_loss(&t_loss, rate)?;
            let s_sel = select_small_loss(&s_loss, rate)?;

            let t_grad = teacher.backward_cached(&tc, &x, &y, &s_sel)?;
            let s_grad = student.backward_cached(&sc, &x, &y, &t_sel)?;
            teacher.step(&mut t_opt, &t_grad).map_err(stage_err)?;
            student.step(&mut s_opt, &s_grad).map_err(stage_err)?;

            t_sum += mean_at(&t_loss, &s_sel);
            s_sum += mean_at(&s_loss, &t_sel);
            n_batches += 1;
            observe(&BatchEvent {
                epoch,
                batch: b,
                keep_rate: rate,
                batch_len: rows.len(),
                teacher_selection: &t_sel,
                student_selection: &s_sel,
                teacher_update: &s_sel,
                student_update: &t_sel,
            });
        }
        let tp = hard_predictions(&teacher, &inputs)?;
        let sp = hard_predictions(&student, &inputs)?;
        let agree = tp.iter().zip(&sp).filter(|(a, b)| a == b).count();
        trace.push(EpochTrace {
            keep_rate: rate,
            teacher_loss: t_sum / n_batches as f64,
            student_loss: s_sum / n_batches as f64,
            agreement: agree as f64 / d.n_rows() as f64,
        });
    }
    Ok(TrainedPair {
        teacher,
        student,
        trace,
        encoder,
    })
}

/// N x K class probabilities from one network.
pub fn predict_network(net: &Network, x: &Dataset) -> Result<Vec<f64>> {
    net.forward(&InputEncoder::new(x.schema()).encode(x)?)
}

pub fn predict(pair: &TrainedPair, x: &Dataset, mode: PredictionMode) -> Result<Vec<f64>> {
    let inputs = pair.encoder.encode(x)?;
    let teacher = pair.teacher.forward(&inputs)?;
    match mode {
        PredictionMode::TeacherOnly => Ok(teacher),
        PredictionMode::AverageBoth => {
            let student = pair.student.forward(&inputs)?;
            Ok(average_rows(&teacher, &student))
        }
    }
}

fn average_rows(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect()
}

/// Column `class` of an N x K probability matrix.
pub fn class_scores(probs: &[f64], classes: usize, class: usize) -> Vec<f64> {
    probs.chunks_exact(classes).map(|r| r[class]).collect()
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(probs: &[f64], classes: usize, labels: &[usize]) -> f64 {
    let hits = probs
        .chunks_exact(classes)
        .zip(labels)
        .filter(|(r, &l)| argmax(r) == l)
        .count();
    hits as f64 / labels.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;
    use rand::{Rng, SeedableRng};

    /// Two Gaussian blobs split by the line x + y = 0, with `noise` of the
    /// labels flipped. Returns (data, noisy labels, clean labels).
    pub(crate) fn blobs(n: usize, noise: f64, seed: u64) -> (Dataset, Vec<usize>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let schema = FeatureSchema::new(vec![Column::continuous("x"), Column::continuous("y")]).unwrap();
        let mut v = Vec::with_capacity(2 * n);
        let mut clean = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 1 { 1.5 } else { -1.5 };
            v.push(centre + rng.random_range(-1.0..1.0));
            v.push(centre + rng.random_range(-1.0..1.0));
            clean.push(c);
        }
        let mut noisy = clean.clone();
        let flips = (noise * n as f64).round() as usize;
        for i in rand::seq::index::sample(&mut rng, n, flips) {
            noisy[i] = 1 - noisy[i];
        }
        (Dataset::new(schema, v, None, None, 2).unwrap(), noisy, clean)
    }

    #[test]
    fn keep_rate_schedule() {
        assert_eq!(keep_rate(0, 0.2, 10), 1.0);
        assert!((keep_rate(10, 0.2, 10) - 0.8).abs() < 1e-15);
        assert!((keep_rate(37, 0.2, 10) - 0.8).abs() < 1e-15);
        assert!((keep_rate(5, 0.2, 10) - 0.9).abs() < 1e-15);
        for t in 0..30 {
            assert_eq!(keep_rate(t, 0.0, 10), 1.0);
            assert!(keep_rate(t + 1, 0.3, 10) <= keep_rate(t, 0.3, 10));
        }
    }

    #[test]
    fn small_loss_selection() {
        assert_eq!(select_small_loss(&[0.1, 5.0, 0.2, 4.0], 0.5).unwrap(), vec![0, 2]);
        assert_eq!(select_small_loss(&[3.0, 1.0, 2.0], 1.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(select_small_loss(&[3.0, 1.0, 2.0], 0.5).unwrap().len(), 2);
        assert_eq!(select_small_loss(&[1.0, 1.0, 1.0], 0.34).unwrap(), vec![0, 1]);
        assert_eq!(select_small_loss(&[1.0, 1.0], 0.01).unwrap(), vec![0]);
        assert!(select_small_loss(&[], 0.5).is_err());
        assert_eq!(selection_size(128, 0.8), 103);
        assert_eq!(selection_size(5, 0.8), 4);
    }

    #[test]
    fn noise_rate_parsing_and_resolution() {
        #[derive(Deserialize)]
        struct W {
            e: NoiseRate,
        }
        let w: W = toml::from_str("e = 0.2").unwrap();
        assert_eq!(w.e, NoiseRate::Fixed(0.2));
        let w: W = toml::from_str("e = \"from_certainty\"").unwrap();
        assert_eq!(w.e, NoiseRate::FromCertainty);
        assert!(toml::from_str::<W>("e = 1.5").is_err());
        let eps = NoiseRate::FromCertainty.resolve(Some(&[1.0, 0.8, 0.9])).unwrap();
        assert!((eps - 0.1).abs() < 1e-12);
    }

    #[test]
    fn widths_follow_half_rule() {
        let cfg = CoteachConfig::default();
        assert_eq!(cfg.widths(40), (20, 10));
        assert_eq!(cfg.widths(3), (2, 1));
        assert_eq!(hidden_units(40, 4), 10);
        assert_eq!(hidden_units(2, 4), 2);
        let cfg = CoteachConfig {
            teacher_hidden: Some(7),
            ..cfg
        };
        assert_eq!(cfg.widths(40), (7, 4));
    }

    fn toy_cfg(epochs: usize, seed: u64) -> CoteachConfig {
        CoteachConfig {
            teacher_hidden: Some(8),
            epochs,
            batch_size: 32,
            lr: 1e-2,
            seed,
            ..CoteachConfig::default()
        }
    }

    #[test]
    fn zero_noise_teacher_matches_standalone_network() {
        let (d, y, _) = blobs(150, 0.1, 3);
        let cfg = toy_cfg(5, 11);
        let pair = train_coteaching(&d, &y, &cfg, 0.0).unwrap();
        let spec = MlpSpec {
            input_dim: 2,
            hidden_units: 8,
            output_dim: 2,
            activation: Default::default(),
            seed: derive_seed(11, stream::TEACHER_INIT),
        };
        let alone = train_base(&d, &y, &spec, &cfg.train_options()).unwrap();
        assert_eq!(pair.teacher.params(), alone.params());
    }

    #[test]
    fn updates_use_the_peer_selection() {
        let (d, y, _) = blobs(200, 0.2, 4);
        let cfg = toy_cfg(15, 2);
        let mut reduced = 0;
        train_coteaching_observed(&d, &y, &cfg, 0.2, |ev| {
            let k = selection_size(ev.batch_len, ev.keep_rate);
            assert_eq!(ev.teacher_selection.len(), k);
            assert_eq!(ev.student_selection.len(), k);
            assert_eq!(ev.teacher_update, ev.student_selection);
            assert_eq!(ev.student_update, ev.teacher_selection);
            if ev.keep_rate < 1.0 {
                reduced += 1;
            }
            if ev.epoch >= cfg.ramp_epochs {
                assert_eq!(k, ((0.8 * ev.batch_len as f64) - 1e-9).ceil() as usize);
            }
        })
        .unwrap();
        assert!(reduced > 0);
    }

    #[test]
    fn trace_shape_and_csv() {
        let (d, y, _) = blobs(100, 0.0, 5);
        let pair = train_coteaching(&d, &y, &toy_cfg(12, 1), 0.2).unwrap();
        assert_eq!(pair.trace.len(), 12);
        for w in pair.trace.windows(2) {
            assert!(w[1].keep_rate <= w[0].keep_rate);
        }
        assert!(pair.trace.iter().all(|t| t.keep_rate > 0.0 && t.keep_rate <= 1.0));
        let mut buf = Vec::new();
        pair.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("epoch,keep_rate,teacher_loss,student_loss,agreement\n"));
    }

    #[test]
    fn base_training_properties() {
        let (d, y, _) = blobs(200, 0.0, 6);
        let spec = MlpSpec {
            input_dim: 2,
            hidden_units: 4,
            output_dim: 2,
            activation: Default::default(),
            seed: 9,
        };
        let opts = TrainOptions {
            epochs: 100,
            batch_size: 32,
            lr: 1e-2,
            seed: 1,
        };
        let net = train_base(&d, &y, &spec, &opts).unwrap();
        assert!(accuracy(&predict_network(&net, &d).unwrap(), 2, &y) >= 0.99);
        assert_eq!(net, train_base(&d, &y, &spec, &opts).unwrap());
        let untouched = train_base(&d, &y, &spec, &TrainOptions { epochs: 0, ..opts }).unwrap();
        assert_eq!(untouched, Network::new(&spec).unwrap());
    }

    #[test]
    fn prediction_modes() {
        let (d, y, _) = blobs(60, 0.0, 7);
        let mut pair = train_coteaching(&d, &y, &toy_cfg(3, 4), 0.0).unwrap();
        for mode in [PredictionMode::AverageBoth, PredictionMode::TeacherOnly] {
            for row in predict(&pair, &d, mode).unwrap().chunks(2) {
                assert!((row[0] + row[1] - 1.0).abs() < 1e-9);
            }
        }
        // a uniform student pulls the average strictly between
        pair.student.zero_output_layer();
        let t = predict(&pair, &d, PredictionMode::TeacherOnly).unwrap();
        let avg = predict(&pair, &d, PredictionMode::AverageBoth).unwrap();
        for (a, p) in avg.iter().zip(&t) {
            if (p - 0.5).abs() > 1e-9 {
                assert!((a - 0.5).abs() < (p - 0.5).abs() && (a - 0.5) * (p - 0.5) > 0.0);
            }
        }
        pair.student = pair.teacher.clone();
        assert_eq!(
            predict(&pair, &d, PredictionMode::AverageBoth).unwrap(),
            predict(&pair, &d, PredictionMode::TeacherOnly).unwrap()
        );
    }
}
