//! Reverse-mode gradients for [`MlpModel`], including the double-backprop
//! pass needed by losses that contain input gradients.
//!
//! ReLU'(0) is taken as 0. When differentiating an input gradient with
//! respect to the parameters, the ReLU masks recorded in the forward trace
//! are held fixed (the second derivative of ReLU vanishes almost
//! everywhere), so `∇ₓ f` is multilinear in the weights and bias-free.

use crate::error::{check_len, Error, Result};
use crate::mlp::{MlpModel, Trace};

/// Gradient with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.layers().iter().map(|l| vec![0.0; l.weights().len()]).collect(),
            biases: model.layers().iter().map(|l| vec![0.0; l.bias().len()]).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &ParamGrads, s: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flat_map(|v| v.iter_mut())
            .for_each(|x| *x *= s);
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Flat view of the model parameters, layer by layer (weights then bias),
/// matching [`ParamGrads::flatten`].
pub fn flatten_params(model: &MlpModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.num_params());
    for l in model.layers() {
        out.extend_from_slice(l.weights());
        out.extend_from_slice(l.bias());
    }
    out
}

/// Inverse of [`flatten_params`].
pub fn set_params(model: &mut MlpModel, flat: &[f64]) -> Result<()> {
    check_len(model.num_params(), flat.len())?;
    let mut off = 0;
    for l in model.layers_mut() {
        let nw = l.weights().len();
        l.weights_mut().copy_from_slice(&flat[off..off + nw]);
        off += nw;
        let nb = l.bias().len();
        l.bias_mut().copy_from_slice(&flat[off..off + nb]);
        off += nb;
    }
    Ok(())
}

/// Back-propagate `dlogits` through a recorded trace.
///
/// Accumulates `scale · ∂(dlogitsᵀ f)/∂θ` into `grads` when given and
/// returns `∂(dlogitsᵀ f)/∂x`.
pub fn backward_logits(
    model: &MlpModel,
    trace: &Trace,
    dlogits: &[f64],
    mut grads: Option<(&mut ParamGrads, f64)>,
) -> Vec<f64> {
    let layers = model.layers();
    let mut delta = dlogits.to_vec();
    for l in (0..layers.len()).rev() {
        if l + 1 < layers.len() {
            for (d, &p) in delta.iter_mut().zip(&trace.pre[l]) {
                if p <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        if let Some((g, s)) = grads.as_mut() {
            let a = &trace.inputs[l];
            let in_dim = layers[l].in_dim();
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[l][o] += *s * d;
                let row = &mut g.weights[l][o * in_dim..(o + 1) * in_dim];
                for (w, &ai) in row.iter_mut().zip(a) {
                    *w += *s * d * ai;
                }
            }
        }
        delta = layers[l].linear_t(&delta);
    }
    delta
}

/// `∂ f_class / ∂x`.
pub fn input_gradient(model: &MlpModel, x: &[f64], class: usize) -> Result<Vec<f64>> {
    model.check_input(x)?;
    model.check_class(class)?;
    Ok(input_gradient_unchecked(model, x, class))
}

pub(crate) fn input_gradient_unchecked(model: &MlpModel, x: &[f64], class: usize) -> Vec<f64> {
    let trace = model.trace_unchecked(x);
    backward_logits(model, &trace, &one_hot(model.num_classes(), class), None)
}

/// `Jᵀ w` at `x`, where `J` is the logit Jacobian.
pub fn vjp_input(model: &MlpModel, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    model.check_input(x)?;
    check_len(model.num_classes(), w.len())?;
    let trace = model.trace_unchecked(x);
    Ok(backward_logits(model, &trace, w, None))
}

/// Accumulate `scale · ∂(vᵀ Jᵀ w)/∂θ` with the trace's ReLU masks frozen.
///
/// With `w = e_c` this differentiates `vᵀ ∇ₓ f_c(x)`. The quantity equals a
/// bias-free tangent pass `W_L M … M W_1 v` read out against `w`, so only
/// weights receive gradient.
pub fn backward_input_gradient(
    model: &MlpModel,
    trace: &Trace,
    w: &[f64],
    v: &[f64],
    grads: &mut ParamGrads,
    scale: f64,
) {
    let layers = model.layers();
    let n = layers.len();
    // tangent pass
    let mut tangents = Vec::with_capacity(n);
    let mut t = v.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let mut u = layer.linear(&t);
        if l + 1 < n {
            for (ui, &p) in u.iter_mut().zip(&trace.pre[l]) {
                if p <= 0.0 {
                    *ui = 0.0;
                }
            }
        }
        tangents.push(std::mem::replace(&mut t, u));
    }
    // adjoint pass
    let mut delta = w.to_vec();
    for l in (0..n).rev() {
        if l + 1 < n {
            for (d, &p) in delta.iter_mut().zip(&trace.pre[l]) {
                if p <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let a = &tangents[l];
        let in_dim = layers[l].in_dim();
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &mut grads.weights[l][o * in_dim..(o + 1) * in_dim];
            for (g, &ai) in row.iter_mut().zip(a) {
                *g += scale * d * ai;
            }
        }
        if l > 0 {
            delta = layers[l].linear_t(&delta);
        }
    }
}

pub fn one_hot(k: usize, class: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[class] = 1.0;
    v
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Cross-entropy of logits against `class` and its logit gradient.
pub fn cross_entropy(z: &[f64], class: usize) -> (f64, Vec<f64>) {
    let lp = log_softmax(z);
    let mut g: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
    g[class] -= 1.0;
    (-lp[class], g)
}

/// Scalar losses over a single `(x, y)` sample, differentiable in θ.
#[derive(Debug, Clone, PartialEq)]
pub enum LossExpr {
    /// `f_y(x)`.
    Logit,
    /// `CE(f(x), y)`.
    CrossEntropy,
    /// `‖∇ₓ L‖²` for an inner expression. Only `Logit` is supported inside:
    /// higher-order terms through the softmax are out of reach.
    InputGradNormSq(Box<LossExpr>),
    Scaled(f64, Box<LossExpr>),
    Sum(Vec<LossExpr>),
}

impl LossExpr {
    fn validate(&self) -> Result<()> {
        match self {
            LossExpr::Logit | LossExpr::CrossEntropy => Ok(()),
            LossExpr::InputGradNormSq(inner) => match inner.as_ref() {
                LossExpr::Logit => Ok(()),
                other => Err(Error::Capability(format!(
                    "input gradient of {other:?} needs derivatives beyond the frozen-mask rule"
                ))),
            },
            LossExpr::Scaled(s, inner) => {
                if !s.is_finite() {
                    return Err(Error::arg("non-finite loss scale"));
                }
                inner.validate()
            }
            LossExpr::Sum(terms) => terms.iter().try_for_each(LossExpr::validate),
        }
    }

    fn eval(&self, model: &MlpModel, trace: &Trace, y: usize, grads: &mut ParamGrads, scale: f64) -> f64 {
        let k = model.num_classes();
        match self {
            LossExpr::Logit => {
                backward_logits(model, trace, &one_hot(k, y), Some((grads, scale)));
                trace.logits()[y]
            }
            LossExpr::CrossEntropy => {
                let (v, g) = cross_entropy(trace.logits(), y);
                backward_logits(model, trace, &g, Some((grads, scale)));
                v
            }
            LossExpr::InputGradNormSq(_) => {
                let e = one_hot(k, y);
                let g = backward_logits(model, trace, &e, None);
                let v: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
                backward_input_gradient(model, trace, &e, &v, grads, scale);
                g.iter().map(|x| x * x).sum()
            }
            LossExpr::Scaled(s, inner) => s * inner.eval(model, trace, y, grads, scale * s),
            LossExpr::Sum(terms) => terms.iter().map(|t| t.eval(model, trace, y, grads, scale)).sum(),
        }
    }
}

/// Mean loss over `batch` and its parameter gradient.
pub fn param_gradient(model: &MlpModel, loss: &LossExpr, batch: &[(Vec<f64>, usize)]) -> Result<(f64, ParamGrads)> {
    loss.validate()?;
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    for (x, y) in batch {
        model.check_input(x)?;
        model.check_class(*y)?;
    }
    let inv = 1.0 / batch.len() as f64;
    let mut grads = ParamGrads::zeros_like(model);
    let mut total = 0.0;
    for (x, y) in batch {
        let trace = model.trace_unchecked(x);
        total += loss.eval(model, &trace, *y, &mut grads, inv);
    }
    Ok((total * inv, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Init, Layer};
    use crate::rng::seeded;

    fn linear(w: &[f64]) -> MlpModel {
        MlpModel::new(vec![Layer::new(w.len(), 1, w.to_vec(), vec![0.0]).unwrap()]).unwrap()
    }

    #[test]
    fn linear_gradient_is_weight() {
        let m = linear(&[1.5, -2.0, 0.25]);
        for x in [[0.0, 0.0, 0.0], [1.0, -3.0, 2.0]] {
            assert_eq!(input_gradient(&m, &x, 0).unwrap(), vec![1.5, -2.0, 0.25]);
        }
    }

    #[test]
    fn inactive_relu_has_zero_gradient() {
        let m = MlpModel::new(vec![
            Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
            Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(input_gradient(&m, &[-1.0], 0).unwrap(), vec![0.0]);
        assert_eq!(input_gradient(&m, &[0.0], 0).unwrap(), vec![0.0]);
        assert_eq!(input_gradient(&m, &[2.0], 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn logit_param_gradient_is_input() {
        let m = linear(&[0.3, 0.7]);
        let (v, g) = param_gradient(&m, &LossExpr::Logit, &[(vec![2.0, -1.0], 0)]).unwrap();
        assert!((v - (0.6 - 0.7)).abs() < 1e-15);
        assert_eq!(g.weights[0], vec![2.0, -1.0]);
        assert_eq!(g.biases[0], vec![1.0]);
    }

    #[test]
    fn grad_norm_sq_on_linear_is_twice_weight() {
        let w = [0.3, -0.7, 1.1];
        let m = linear(&w);
        let loss = LossExpr::InputGradNormSq(Box::new(LossExpr::Logit));
        let (v, g) = param_gradient(&m, &loss, &[(vec![5.0, 1.0, -2.0], 0)]).unwrap();
        assert!((v - w.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-15);
        for (a, b) in g.weights[0].iter().zip(w) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        assert_eq!(g.biases[0], vec![0.0]);
    }

    #[test]
    fn nested_cross_entropy_gradient_is_a_capability_error() {
        let m = linear(&[1.0]);
        let loss = LossExpr::InputGradNormSq(Box::new(LossExpr::CrossEntropy));
        assert!(matches!(
            param_gradient(&m, &loss, &[(vec![1.0], 0)]),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn flatten_roundtrip() {
        let mut m = MlpModel::init(&[3, 4, 2], Init::He, &mut seeded(0)).unwrap();
        let p = flatten_params(&m);
        let q: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        set_params(&mut m, &q).unwrap();
        assert_eq!(flatten_params(&m), q);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        let (ce, g) = cross_entropy(&[0.0, 0.0], 1);
        assert!((ce - 2f64.ln()).abs() < 1e-15);
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] + 0.5).abs() < 1e-15);
    }
}
