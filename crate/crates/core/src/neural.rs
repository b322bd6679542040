//! One-hidden-layer ReLU classifier with softmax output, hand-written
//! backpropagation and an Adam optimizer.
//!
//! Parameters live in one flat vector laid out as `w1 | b1 | w2 | b2`, where
//! `w1` is input-major (`w1[j * hidden + h]`) so that sparse (one-hot) inputs
//! touch contiguous memory and zero inputs can be skipped.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tabular::{ColumnKind, Dataset, FeatureSchema};

/// Added inside the log of the cross-entropy.
pub const LOSS_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
}

impl MlpSpec {
    /// Spec sized for the one-hot encoding of `schema`.
    pub fn for_schema(schema: &FeatureSchema, hidden_units: usize, classes: usize, seed: u64) -> Self {
        MlpSpec {
            input_dim: InputEncoder::new(schema).dim(),
            hidden_units,
            output_dim: classes,
            activation: Activation::Relu,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_units == 0 || self.output_dim == 0 {
            return Err(Error::config("network dimensions must be positive"));
        }
        Ok(())
    }
}

/// Maps dataset rows to network inputs: continuous cells pass through,
/// discrete cells expand to one-hot blocks over their vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputEncoder {
    /// Per column: (offset into the encoded row, one-hot width or None).
    slots: Vec<(usize, Option<usize>)>,
    dim: usize,
}

impl InputEncoder {
    pub fn new(schema: &FeatureSchema) -> Self {
        let mut offset = 0;
        let slots = schema
            .columns()
            .iter()
            .map(|c| {
                let slot = match &c.kind {
                    ColumnKind::Continuous => (offset, None),
                    ColumnKind::Discrete { vocabulary } => (offset, Some(vocabulary.len())),
                };
                offset += slot.1.unwrap_or(1);
                slot
            })
            .collect();
        InputEncoder { slots, dim: offset }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode_row(&self, row: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&(offset, width), &v) in self.slots.iter().zip(row) {
            match width {
                None => out[offset] = v,
                Some(_) => out[offset + v as usize] = 1.0,
            }
        }
    }

    pub fn encode(&self, d: &Dataset) -> Result<Vec<f64>> {
        if d.n_cols() != self.slots.len() {
            return Err(Error::DimensionMismatch {
                expected: self.slots.len(),
                actual: d.n_cols(),
            });
        }
        let mut out = vec![0.0; d.n_rows() * self.dim];
        for (row, dst) in d.rows().zip(out.chunks_exact_mut(self.dim)) {
            self.encode_row(row, dst);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// B x hidden post-ReLU activations.
    pub hidden: Vec<f64>,
    /// B x K softmax probabilities.
    pub probs: Vec<f64>,
}

impl Network {
    pub fn new(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let (i, h, k) = (spec.input_dim, spec.hidden_units, spec.output_dim);
        let mut net = Network {
            input_dim: i,
            hidden: h,
            output: k,
            params: vec![0.0; (i + 1) * h + (h + 1) * k],
        };
        let mut rng = rng_from_seed(spec.seed);
        let limit1 = (6.0 / (i + h) as f64).sqrt();
        let limit2 = (6.0 / (h + k) as f64).sqrt();
        let (w1, rest) = net.params.split_at_mut(i * h);
        for w in w1 {
            *w = rng.random_range(-limit1..limit1);
        }
        let w2 = &mut rest[h..h + h * k];
        for w in w2 {
            *w = rng.random_range(-limit2..limit2);
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.input_dim * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden * self.output;
        (b1, w2, b2)
    }

    /// Sets the output layer weights and biases to zero.
    pub fn zero_output_layer(&mut self) {
        let (_, w2, _) = self.offsets();
        self.params[w2..].fill(0.0);
    }

    fn check_batch(&self, inputs: &[f64]) -> Result<usize> {
        if inputs.len() % self.input_dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: inputs.len() % self.input_dim,
            });
        }
        Ok(inputs.len() / self.input_dim)
    }

    fn forward_row(&self, x: &[f64], hidden: &mut [f64], probs: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let h_n = self.hidden;
        hidden.copy_from_slice(&self.params[b1..b1 + h_n]);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let w = &self.params[j * h_n..(j + 1) * h_n];
                for (a, &wj) in hidden.iter_mut().zip(w) {
                    *a += xj * wj;
                }
            }
        }
        hidden.iter_mut().for_each(|a| *a = a.max(0.0));
        probs.copy_from_slice(&self.params[b2..b2 + self.output]);
        for (h, &a) in hidden.iter().enumerate() {
            if a != 0.0 {
                let w = &self.params[w2 + h * self.output..w2 + (h + 1) * self.output];
                for (z, &wk) in probs.iter_mut().zip(w) {
                    *z += a * wk;
                }
            }
        }
        softmax_in_place(probs);
    }

    /// Forward pass keeping the hidden activations.
    pub fn forward_cached(&self, inputs: &[f64]) -> Result<ForwardCache> {
        let b = self.check_batch(inputs)?;
        let mut hidden = vec![0.0; b * self.hidden];
        let mut probs = vec![0.0; b * self.output];
        for ((x, h), p) in inputs
            .chunks_exact(self.input_dim)
            .zip(hidden.chunks_exact_mut(self.hidden))
            .zip(probs.chunks_exact_mut(self.output))
        {
            self.forward_row(x, h, p);
        }
        Ok(ForwardCache { hidden, probs })
    }

    /// B x K class probabilities.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(inputs)?.probs)
    }

    /// Gradient of the mean cross-entropy over `selected` rows, using the
    /// activations from `cache`. Rows are accumulated in the order given.
    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        inputs: &[f64],
        labels: &[usize],
        selected: &[usize],
    ) -> Result<Vec<f64>> {
        if selected.is_empty() {
            return Err(Error::config("backward needs a non-empty selection"));
        }
        let b = self.check_batch(inputs)?;
        if labels.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                actual: labels.len(),
            });
        }
        let (b1, w2, b2) = self.offsets();
        let (h_n, k_n) = (self.hidden, self.output);
        let mut grad = vec![0.0; self.params.len()];
        let mut d_logits = vec![0.0; k_n];
        let mut d_hidden = vec![0.0; h_n];
        for &s in selected {
            if s >= b || labels[s] >= k_n {
                return Err(Error::config(format!("selected row {s} or its label out of range")));
            }
            let x = &inputs[s * self.input_dim..(s + 1) * self.input_dim];
            let a = &cache.hidden[s * h_n..(s + 1) * h_n];
            d_logits.copy_from_slice(&cache.probs[s * k_n..(s + 1) * k_n]);
            d_logits[labels[s]] -= 1.0;

            for (g, d) in grad[b2..b2 + k_n].iter_mut().zip(&d_logits) {
                *g += d;
            }
            for h in 0..h_n {
                let w = &self.params[w2 + h * k_n..w2 + (h + 1) * k_n];
                let mut back = 0.0;
                if a[h] > 0.0 {
                    let g = &mut grad[w2 + h * k_n..w2 + (h + 1) * k_n];
                    for k in 0..k_n {
                        g[k] += a[h] * d_logits[k];
                        back += w[k] * d_logits[k];
                    }
                }
                d_hidden[h] = back;
            }
            for (g, d) in grad[b1..b1 + h_n].iter_mut().zip(&d_hidden) {
                *g += d;
            }
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0.0 {
                    for (g, d) in grad[j * h_n..(j + 1) * h_n].iter_mut().zip(&d_hidden) {
                        *g += xj * d;
                    }
                }
            }
        }
        let scale = 1.0 / selected.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok(grad)
    }

    pub fn backward(&self, inputs: &[f64], labels: &[usize], selected: &[usize]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(inputs)?;
        self.backward_cached(&cache, inputs, labels, selected)
    }

    /// Mean cross-entropy over `selected`.
    pub fn loss(&self, inputs: &[f64], labels: &[usize], selected: &[usize]) -> Result<f64> {
        let probs = self.forward(inputs)?;
        let losses = per_sample_loss(&probs, labels, self.output)?;
        Ok(selected.iter().map(|&s| losses[s]).sum::<f64>() / selected.len() as f64)
    }

    pub fn step(&mut self, opt: &mut Adam, grads: &[f64]) -> Result<()> {
        opt.step(&mut self.params, grads)
    }

    /// Text blob: a shape header line, then one line per parameter block.
    pub fn to_text(&self) -> String {
        let (b1, w2, b2) = self.offsets();
        let mut s = format!("mlp,{},{},{}\n", self.input_dim, self.hidden, self.output);
        for (name, range) in [
            ("w1", 0..b1),
            ("b1", b1..w2),
            ("w2", w2..b2),
            ("b2", b2..self.params.len()),
        ] {
            s.push_str(name);
            for v in &self.params[range] {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Serde(format!("network blob: {m}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split(',').collect();
        if header.len() != 4 || header[0] != "mlp" {
            return Err(bad("missing `mlp,<in>,<hidden>,<out>` header"));
        }
        let dims: Vec<usize> = header[1..]
            .iter()
            .map(|v| v.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_>>()?;
        let mut net = Network {
            input_dim: dims[0],
            hidden: dims[1],
            output: dims[2],
            params: Vec::new(),
        };
        let (b1, w2, b2) = net.offsets();
        let total = b2 + net.output;
        let expected = [("w1", b1), ("b1", w2 - b1), ("w2", b2 - w2), ("b2", net.output)];
        for (name, len) in expected {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut fields = line.split(',');
            if fields.next() != Some(name) {
                return Err(bad(&format!("expected block `{name}`")));
            }
            let before = net.params.len();
            for f in fields {
                net.params.push(f.parse().map_err(|_| bad("bad value"))?);
            }
            if net.params.len() - before != len {
                return Err(bad(&format!("block `{name}` has the wrong length")));
            }
        }
        debug_assert_eq!(net.params.len(), total);
        Ok(net)
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - mx).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// `-ln(p[label] + 1e-12)` per row of a B x K probability matrix.
pub fn per_sample_loss(probs: &[f64], labels: &[usize], classes: usize) -> Result<Vec<f64>> {
    if probs.len() != labels.len() * classes {
        return Err(Error::DimensionMismatch {
            expected: labels.len() * classes,
            actual: probs.len(),
        });
    }
    probs
        .chunks_exact(classes)
        .zip(labels)
        .map(|(row, &l)| {
            row.get(l)
                .map(|p| -(p + LOSS_EPSILON).ln())
                .ok_or_else(|| Error::config(format!("label {l} outside [0, {classes})")))
        })
        .collect()
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: vec![0.0; n_params],
            second: vec![0.0; n_params],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first.len(),
                actual: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameter after optimizer step".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;
    use rand::SeedableRng;

    fn spec(i: usize, h: usize, k: usize, seed: u64) -> MlpSpec {
        MlpSpec {
            input_dim: i,
            hidden_units: h,
            output_dim: k,
            activation: Activation::Relu,
            seed,
        }
    }

    fn random_batch(n: usize, dim: usize, k: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = (0..n).map(|_| rng.random_range(0..k)).collect();
        (x, y)
    }

    #[test]
    fn parameter_count() {
        let net = Network::new(&spec(4, 3, 2, 0)).unwrap();
        assert_eq!(net.param_count(), 5 * 3 + 4 * 2);
    }

    #[test]
    fn zero_output_layer_gives_uniform() {
        let mut net = Network::new(&spec(5, 4, 3, 1)).unwrap();
        net.zero_output_layer();
        let (x, _) = random_batch(6, 5, 3, 2);
        for row in net.forward(&x).unwrap().chunks(3) {
            for p in row {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rows_sum_to_one_and_shift_invariance() {
        let mut net = Network::new(&spec(3, 5, 4, 3)).unwrap();
        let (x, _) = random_batch(10, 3, 4, 4);
        let p = net.forward(&x).unwrap();
        for row in p.chunks(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // adding a constant to every logit
        let n = net.param_count();
        net.params_mut()[n - 4..].iter_mut().for_each(|b| *b += 7.5);
        let q = net.forward(&x).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_values() {
        let l = per_sample_loss(&[1.0, 0.0, 0.5, 0.5, 0.9, 0.1], &[0, 1, 1], 2).unwrap();
        assert!(l[0].abs() < 1e-11);
        assert!((l[1] - 2f64.ln()).abs() < 1e-11);
        assert!((l[2] - 2.302585092994046).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-5;
        for seed in 0..20 {
            let mut net = Network::new(&spec(4, 3, 2, seed)).unwrap();
            let (x, y) = random_batch(8, 4, 2, 100 + seed);
            let all: Vec<usize> = (0..8).collect();
            let g = net.backward(&x, &y, &all).unwrap();
            for p in 0..net.param_count() {
                let orig = net.params()[p];
                net.params_mut()[p] = orig + h;
                let up = net.loss(&x, &y, &all).unwrap();
                net.params_mut()[p] = orig - h;
                let down = net.loss(&x, &y, &all).unwrap();
                net.params_mut()[p] = orig;
                let numeric = (up - down) / (2.0 * h);
                let rel = (g[p] - numeric).abs() / g[p].abs().max(numeric.abs()).max(1e-8);
                assert!(rel < 1e-4, "seed {seed} param {p}: {} vs {numeric}", g[p]);
            }
        }
    }

    #[test]
    fn duplicate_rows_do_not_change_mean_gradient() {
        let net = Network::new(&spec(4, 3, 2, 5)).unwrap();
        let (x, y) = random_batch(1, 4, 2, 6);
        let single = net.backward(&x, &y, &[0]).unwrap();
        let xx: Vec<f64> = x.iter().chain(&x).copied().collect();
        let yy = vec![y[0], y[0]];
        let double = net.backward(&xx, &yy, &[0, 1]).unwrap();
        for (a, b) in single.iter().zip(&double) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unselected_rows_do_not_contribute() {
        let net = Network::new(&spec(4, 3, 2, 7)).unwrap();
        let (x, y) = random_batch(5, 4, 2, 8);
        let one = net.backward(&x, &y, &[2]).unwrap();
        let alone = net.backward(&x[8..12], &y[2..3], &[0]).unwrap();
        assert_eq!(one, alone);
        assert!(net.backward(&x, &y, &[]).is_err());
    }

    #[test]
    fn adam_fixed_point_descent_and_determinism() {
        let mut p = vec![1.0, -2.0];
        let mut opt = Adam::new(0.1, 2);
        opt.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);

        let mut w = [1.0];
        let mut opt = Adam::new(0.1, 1);
        opt.step(&mut w, &[2.0 * 1.0]).unwrap();
        assert!(w[0] < 1.0);

        let mut a = [0.3, 0.4];
        let mut b = a;
        let mut oa = Adam::new(0.01, 2);
        let mut ob = oa.clone();
        oa.step(&mut a, &[0.5, -0.1]).unwrap();
        ob.step(&mut b, &[0.5, -0.1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        assert!(oa.step(&mut a, &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let net = Network::new(&spec(3, 2, 2, 9)).unwrap();
        let back = Network::from_text(&net.to_text()).unwrap();
        assert_eq!(net, back);
        assert!(Network::from_text("mlp,3,2,2\nw1,1\n").is_err());
    }

    #[test]
    fn encoder_one_hot() {
        let schema = FeatureSchema::new(vec![
            Column::continuous("x"),
            Column::discrete("c", vec!["a", "b", "c"]),
            Column::continuous("y"),
        ])
        .unwrap();
        let enc = InputEncoder::new(&schema);
        assert_eq!(enc.dim(), 5);
        let d = Dataset::new(schema, vec![0.5, 2.0, -1.0], None, None, 2).unwrap();
        assert_eq!(enc.encode(&d).unwrap(), vec![0.5, 0.0, 0.0, 1.0, -1.0]);
    }
}
