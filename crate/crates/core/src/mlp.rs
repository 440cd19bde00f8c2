//! Fully-connected ReLU networks.
//!
//! A model is a chain of affine layers `h = W a + b` with ReLU between them
//! and the identity after the last one, so the final layer emits logits.
//! Weights are stored row-major as `out × in`.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        check_len(in_dim * out_dim, weights.len())?;
        check_len(out_dim, bias.len())?;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::arg("layer dimensions must be positive"));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::arg("layer parameters must be finite"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    /// Build from nested rows (`out` rows of `in` entries each).
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Self> {
        let out_dim = rows.len();
        let in_dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != in_dim) {
            return Err(Error::arg("ragged weight matrix"));
        }
        Self::new(in_dim, out_dim, rows.concat(), bias)
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.in_dim).map(<[f64]>::to_vec).collect()
    }

    /// `W a + b` written into `out`.
    pub(crate) fn affine_into(&self, a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>() + b),
        );
    }

    /// `W a` without bias.
    pub(crate) fn linear(&self, a: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .map(|row| row.iter().zip(a).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// `Wᵀ δ`.
    pub(crate) fn linear_t(&self, delta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (row, &d) in self.weights.chunks_exact(self.in_dim).zip(delta) {
            if d != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += d * w;
                }
            }
        }
        out
    }
}

/// Parameter initialisation for [`MlpModel::init`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// `N(0, 2 / fan_in)` weights, zero biases.
    He,
    /// `N(0, sigma²)` weights, zero biases.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// Recorded forward pass: the input of every layer and every layer's
/// pre-activation. `inputs[0]` is `x`; `pre.last()` is the logit vector.
#[derive(Debug, Clone)]
pub struct Trace {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().expect("trace of an empty model")
    }

    /// ReLU derivative of hidden layer `l`; exactly-zero pre-activations are inactive.
    pub fn active(&self, l: usize, unit: usize) -> bool {
        self.pre[l][unit] > 0.0
    }
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::arg("model needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[1].in_dim != pair[0].out_dim {
                return Err(Error::Shape {
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        Ok(Self { layers })
    }

    /// Random model with layer widths `sizes = [d, h1, ..., k]`.
    pub fn init(sizes: &[usize], init: Init, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::arg("sizes must list at least input and output widths, all positive"));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let sigma = match init {
                    Init::He => (2.0 / fan_in as f64).sqrt(),
                    Init::Gaussian { sigma } => sigma,
                };
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::arg(e.to_string()))?;
                let weights = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
                Layer::new(fan_in, fan_out, weights, vec![0.0; fan_out])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    /// Random model with nonzero biases drawn from `N(0, bias_sigma²)`.
    pub fn init_with_bias(sizes: &[usize], init: Init, bias_sigma: f64, rng: &mut Rng) -> Result<Self> {
        let mut m = Self::init(sizes, init, rng)?;
        for l in &mut m.layers {
            for b in &mut l.bias {
                *b = bias_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        Ok(m)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.out_dim).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        check_len(self.input_dim(), x.len())
    }

    pub fn check_class(&self, class: usize) -> Result<()> {
        if class < self.num_classes() {
            Ok(())
        } else {
            Err(Error::arg(format!(
                "class {class} out of range for {} classes",
                self.num_classes()
            )))
        }
    }

    /// Logits `f(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.logits(x))
    }

    /// Index of the largest logit, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        Ok(argmax(&self.logits(x)))
    }

    pub(crate) fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut h = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine_into(&a, &mut h);
            if l < last {
                for v in h.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut h);
        }
        a
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        Ok(self.trace_unchecked(x))
    }

    pub(crate) fn trace_unchecked(&self, x: &[f64]) -> Trace {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = Vec::with_capacity(layer.out_dim);
            layer.affine_into(&a, &mut h);
            let next = if l + 1 < n {
                h.iter().map(|v| v.max(0.0)).collect()
            } else {
                Vec::new()
            };
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(h);
        }
        Trace { inputs, pre }
    }

    /// Hidden pre-activation sign patterns (`> 0`), one vector per hidden layer.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<Vec<bool>>> {
        let t = self.trace(x)?;
        Ok(t.pre[..t.pre.len() - 1]
            .iter()
            .map(|p| p.iter().map(|&v| v > 0.0).collect())
            .collect())
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn net_222() -> MlpModel {
        MlpModel::new(vec![
            Layer::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]], vec![0.0, -1.0]).unwrap(),
            Layer::from_rows(&[vec![1.0, 1.0], vec![-2.0, 0.5]], vec![0.1, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn zero_weights_give_bias() {
        let m = MlpModel::new(vec![Layer::new(3, 2, vec![0.0; 6], vec![0.25, -0.5]).unwrap()]).unwrap();
        assert_eq!(m.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.25, -0.5]);
    }

    #[test]
    fn identity_linear_map() {
        let m = MlpModel::new(vec![Layer::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap()]).unwrap();
        assert_eq!(m.forward(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn hand_evaluated_two_layer_net() {
        // hidden pre = (0.3 - 0.8, 0.15 + 1.6 - 1) = (-0.5, 0.75) -> relu (0, 0.75)
        // logits = (0 + 0.75 + 0.1, 0 + 0.375)
        let m = net_222();
        let out = m.forward(&[0.3, 0.8]).unwrap();
        assert!((out[0] - 0.85).abs() < 1e-15);
        assert!((out[1] - 0.375).abs() < 1e-15);
        assert_eq!(m.predict(&[0.3, 0.8]).unwrap(), 0);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn dimension_errors() {
        let m = net_222();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(m.check_class(2).is_err());
        let bad = MlpModel::new(vec![Layer::zeros(2, 3), Layer::zeros(2, 2)]);
        assert!(bad.is_err());
    }

    #[test]
    fn trace_matches_forward() {
        let mut rng = seeded(3);
        let m = MlpModel::init_with_bias(&[5, 7, 4, 3], Init::He, 0.1, &mut rng).unwrap();
        let x = [0.2, -0.1, 0.5, 0.9, -0.3];
        let t = m.trace(&x).unwrap();
        assert_eq!(t.logits(), m.forward(&x).unwrap().as_slice());
        assert_eq!(t.inputs.len(), 3);
        assert_eq!(m.activation_pattern(&x).unwrap().len(), 2);
    }

    #[test]
    fn he_init_is_deterministic() {
        let a = MlpModel::init(&[4, 8, 2], Init::He, &mut seeded(1)).unwrap();
        let b = MlpModel::init(&[4, 8, 2], Init::He, &mut seeded(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_params(), 4 * 8 + 8 + 8 * 2 + 2);
    }
}
