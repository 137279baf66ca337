use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LearnerError, Sample};
use crate::value::ProbabilityVector;

/// Softmax regression, or a single `tanh` hidden layer feeding a softmax.
///
/// Weight matrices are row-major: `w_hidden` is `hidden_units x dim`,
/// `w_out` is `classes x inputs` where `inputs` is `hidden_units` (or `dim`
/// when there is no hidden layer). Serializes to a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub classes: usize,
    pub dim: usize,
    pub hidden_units: usize,
    pub rng_seed: u64,
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.1,
            batch: 32,
            seed: 0,
        }
    }
}

impl Model {
    /// All-zero softmax regression.
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            hidden_units: 0,
            rng_seed: 0,
            w_hidden: Vec::new(),
            b_hidden: Vec::new(),
            w_out: vec![0.0; classes * dim],
            b_out: vec![0.0; classes],
        }
    }

    /// With `hidden_units > 0` the hidden layer gets Glorot-uniform weights
    /// drawn from `rng_seed`; output weights always start at zero.
    pub fn new(classes: usize, dim: usize, hidden_units: usize, rng_seed: u64) -> Self {
        if hidden_units == 0 {
            return Self {
                rng_seed,
                ..Self::zeros(classes, dim)
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let bound = (6.0 / (dim + hidden_units) as f64).sqrt();
        let w_hidden = (0..hidden_units * dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Self {
            classes,
            dim,
            hidden_units,
            rng_seed,
            w_hidden,
            b_hidden: vec![0.0; hidden_units],
            w_out: vec![0.0; classes * hidden_units],
            b_out: vec![0.0; classes],
        }
    }

    fn inputs(&self) -> usize {
        if self.hidden_units == 0 {
            self.dim
        } else {
            self.hidden_units
        }
    }

    pub fn num_params(&self) -> usize {
        self.w_hidden.len() + self.b_hidden.len() + self.w_out.len() + self.b_out.len()
    }

    /// Parameters flattened as `w_hidden, b_hidden, w_out, b_out`.
    pub fn params(&self) -> Vec<f64> {
        [&self.w_hidden, &self.b_hidden, &self.w_out, &self.b_out]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "parameter count");
        let mut rest = flat;
        for dst in [&mut self.w_hidden, &mut self.b_hidden, &mut self.w_out, &mut self.b_out] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), LearnerError> {
        if x.len() != self.dim {
            return Err(LearnerError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Hidden activations (or `x` itself) and output logits.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = if self.hidden_units == 0 {
            x.to_vec()
        } else {
            (0..self.hidden_units)
                .map(|j| {
                    let row = &self.w_hidden[j * self.dim..(j + 1) * self.dim];
                    (dot(row, x) + self.b_hidden[j]).tanh()
                })
                .collect()
        };
        let n_in = self.inputs();
        let logits = (0..self.classes)
            .map(|k| dot(&self.w_out[k * n_in..(k + 1) * n_in], &h) + self.b_out[k])
            .collect();
        (h, logits)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, LearnerError> {
        self.check_dim(x)?;
        Ok(self.forward(x).1)
    }

    pub fn predict(&self, x: &[f64]) -> Result<ProbabilityVector, LearnerError> {
        let logits = self.logits(x)?;
        let probs = softmax(&logits)?;
        Ok(ProbabilityVector::new(probs).expect("softmax output is a distribution"))
    }

    /// Mean cross-entropy (nats) over `batch`.
    pub fn loss(&self, batch: &[(&[f64], usize)]) -> Result<f64, LearnerError> {
        Ok(self.loss_and_gradient(batch)?.0)
    }

    /// Mean cross-entropy and its gradient, flattened like [`Model::params`].
    pub fn loss_and_gradient(&self, batch: &[(&[f64], usize)]) -> Result<(f64, Vec<f64>), LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::Empty);
        }
        let n_in = self.inputs();
        let (hd, d) = (self.hidden_units, self.dim);
        let mut g_wh = vec![0.0; self.w_hidden.len()];
        let mut g_bh = vec![0.0; self.b_hidden.len()];
        let mut g_wo = vec![0.0; self.w_out.len()];
        let mut g_bo = vec![0.0; self.b_out.len()];
        let mut loss = 0.0;

        for &(x, label) in batch {
            self.check_dim(x)?;
            if label >= self.classes {
                return Err(LearnerError::BadLabel {
                    label,
                    classes: self.classes,
                });
            }
            let (h, logits) = self.forward(x);
            let (probs, log_z) = softmax_with_log_partition(&logits)?;
            loss += log_z - logits[label];

            let delta: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(k, &p)| p - f64::from(u8::from(k == label)))
                .collect();
            for k in 0..self.classes {
                g_bo[k] += delta[k];
                for (g, hv) in g_wo[k * n_in..(k + 1) * n_in].iter_mut().zip(&h) {
                    *g += delta[k] * hv;
                }
            }
            if hd > 0 {
                for j in 0..hd {
                    let back: f64 = (0..self.classes).map(|k| self.w_out[k * n_in + j] * delta[k]).sum();
                    let dz = back * (1.0 - h[j] * h[j]);
                    g_bh[j] += dz;
                    for (g, xv) in g_wh[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += dz * xv;
                    }
                }
            }
        }

        let scale = 1.0 / batch.len() as f64;
        let grad = [g_wh, g_bh, g_wo, g_bo]
            .into_iter()
            .flatten()
            .map(|g| g * scale)
            .collect();
        Ok((loss * scale, grad))
    }

    fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        let mut offset = 0;
        for dst in [&mut self.w_hidden, &mut self.b_hidden, &mut self.w_out, &mut self.b_out] {
            for (w, g) in dst.iter_mut().zip(&grad[offset..]) {
                *w -= lr * g;
            }
            offset += dst.len();
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        let m: Self = serde_json::from_str(s).map_err(|e| LearnerError::Checkpoint(e.to_string()))?;
        let n_in = m.inputs();
        if m.w_hidden.len() != m.hidden_units * m.dim
            || m.b_hidden.len() != m.hidden_units
            || m.w_out.len() != m.classes * n_in
            || m.b_out.len() != m.classes
        {
            return Err(LearnerError::Checkpoint(
                "array lengths do not match declared shape".into(),
            ));
        }
        Ok(m)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(logits: &[f64]) -> Result<Vec<f64>, LearnerError> {
    Ok(softmax_with_log_partition(logits)?.0)
}

/// Softmax probabilities and `log(sum(exp(logits)))`.
fn softmax_with_log_partition(logits: &[f64]) -> Result<(Vec<f64>, f64), LearnerError> {
    if logits.iter().any(|l| l.is_nan()) {
        return Err(LearnerError::NonFinite);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        // Split the mass evenly over the infinite logits.
        let n = logits.iter().filter(|&&l| l == f64::INFINITY).count() as f64;
        let probs = logits
            .iter()
            .map(|&l| if l == f64::INFINITY { 1.0 / n } else { 0.0 })
            .collect();
        return Ok((probs, f64::INFINITY));
    }
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok((exps.iter().map(|e| e / z).collect(), max + z.ln()))
}

/// Minibatch SGD on mean cross-entropy. Batches are reshuffled every epoch
/// from `cfg.seed`; when one batch covers the whole set no shuffling happens.
pub fn train(model: &Model, data: &[Sample], cfg: &TrainConfig) -> Result<Model, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::Empty);
    }
    let mut m = model.clone();
    let batch = cfg.batch.max(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.epochs {
        if batch < data.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let b: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (data[i].x.as_slice(), data[i].label)).collect();
            let (_, grad) = m.loss_and_gradient(&b)?;
            m.sgd_step(&grad, cfg.lr);
        }
    }
    Ok(m)
}

/// Pseudo-labels each sample with the model's argmax and trains on them.
pub fn self_train_step(model: &Model, accepted: &[Vec<f64>], cfg: &TrainConfig) -> Result<Model, LearnerError> {
    if accepted.is_empty() {
        return Ok(model.clone());
    }
    let pseudo = pseudo_label(model, accepted)?;
    train(model, &pseudo, cfg)
}

pub(crate) fn pseudo_label(model: &Model, xs: &[Vec<f64>]) -> Result<Vec<Sample>, LearnerError> {
    xs.iter()
        .map(|x| {
            Ok(Sample {
                x: x.clone(),
                label: model.predict(x)?.argmax(),
            })
        })
        .collect()
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn evaluate(model: &Model, test: &[Sample]) -> Result<f64, LearnerError> {
    if test.is_empty() {
        return Err(LearnerError::Empty);
    }
    let mut hits = 0usize;
    for s in test {
        if model.predict(&s.x)?.argmax() == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}
