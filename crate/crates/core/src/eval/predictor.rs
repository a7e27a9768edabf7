use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{adam_step, AdamState, ParameterSet, Tape, Tensor};

use super::LabeledPair;

/// Logistic link scorer `σ(wᵀ[z_u ‖ z_v] + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Predictor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; 2 * dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn logit(&self, zu: &[f64], zv: &[f64]) -> f64 {
        let (wu, wv) = self.weights.split_at(self.dim());
        let dot = |w: &[f64], z: &[f64]| w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        dot(wu, zu) + dot(wv, zv) + self.bias
    }

    /// Link probability for the ordered pair `(u, v)`.
    pub fn link_probability(&self, zu: &[f64], zv: &[f64]) -> f64 {
        crate::tensor::sigmoid(self.logit(zu, zv))
    }

    /// Mean of both orderings, symmetric in its arguments.
    pub fn symmetric_score(&self, zu: &[f64], zv: &[f64]) -> f64 {
        (self.link_probability(zu, zv) + self.link_probability(zv, zu)) / 2.0
    }

    /// Symmetric scores of `pairs` using the rows of `z` (`[N, F]`).
    pub fn score_pairs(&self, z: &Tensor, pairs: &[LabeledPair]) -> Vec<f64> {
        pairs
            .iter()
            .map(|p| self.symmetric_score(z.row(&[p.u]), z.row(&[p.v])))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { epochs: 300, lr: 0.05 }
    }
}

/// Fits the predictor by full-batch Adam on the mean binary cross-entropy
/// over `pairs`, each used in both orderings. Starts from zero weights.
pub fn fit_predictor(pairs: &[LabeledPair], z: &Tensor, cfg: &PredictorConfig) -> Result<Predictor> {
    if z.rank() != 2 {
        return Err(Error::Eval(format!("embeddings must be [N, F], got {:?}", z.shape())));
    }
    let n_pos = pairs.iter().filter(|p| p.label).count();
    if n_pos == 0 || n_pos == pairs.len() {
        return Err(Error::Eval("predictor training split has a single class".into()));
    }
    let f = z.shape()[1];
    let rows = 2 * pairs.len();
    let mut features = Vec::with_capacity(rows * 2 * f);
    let mut signs = Vec::with_capacity(rows);
    for p in pairs {
        for (a, b) in [(p.u, p.v), (p.v, p.u)] {
            features.extend_from_slice(z.row(&[a]));
            features.extend_from_slice(z.row(&[b]));
            signs.push(if p.label { 1.0 } else { -1.0 });
        }
    }
    let features = Tensor::new(vec![rows, 2 * f], features)?;
    let signs = Tensor::new(vec![rows, 1], signs)?;

    let mut params = ParameterSet::new();
    params.insert("w", Tensor::zeros(&[2 * f, 1]));
    params.insert("b", Tensor::zeros(&[1]));
    let mut state = AdamState::default();
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(features.clone());
        let s = tape.constant(signs.clone());
        let logits = tape.matmul(x, bound.get("w")?)?;
        let logits = tape.add(logits, bound.get("b")?)?;
        let signed = tape.mul(logits, s)?;
        let prob = tape.sigmoid(signed);
        let logp = tape.log_clamped(prob, 1e-12, 1.0 - 1e-12);
        let mean = tape.mean(logp);
        let loss = tape.scale(mean, -1.0);
        let grads = tape.backward(loss)?;
        let grads = bound.gradients(&tape, &grads);
        adam_step(&mut params, &grads, &mut state, cfg.lr)?;
    }
    Ok(Predictor {
        weights: params.get("w").expect("w").data().to_vec(),
        bias: params.get("b").expect("b").item(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_predictor_gives_half() {
        let p = Predictor::zeros(3);
        assert_eq!(p.link_probability(&[1.0, 2.0, 3.0], &[0.0; 3]), 0.5);
    }

    #[test]
    fn hand_weights() {
        let mut p = Predictor::zeros(3);
        p.weights[0] = 1.0;
        p.weights[3] = 1.0;
        let y = p.link_probability(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert!((y - 0.8807970779778823).abs() < 1e-12);
    }

    #[test]
    fn symmetric_score_is_order_free() {
        let p = Predictor {
            weights: vec![0.3, -1.2, 0.7, 2.0],
            bias: 0.1,
        };
        let (a, b) = ([0.5, -0.25], [1.5, 0.75]);
        assert_eq!(p.symmetric_score(&a, &b).to_bits(), p.symmetric_score(&b, &a).to_bits());
    }
}
