//! Integrated gradients with a right-endpoint Riemann sum.
//!
//! `IGᵢ = (xᵢ − aᵢ) · (1/m) Σ_{k=1..m} ∂f_c(a + (k/m)(x − a))/∂xᵢ`

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grad::{backward_input_gradient, input_gradient_unchecked, one_hot, ParamGrads};
use crate::mlp::MlpModel;

/// Default step count for evaluation.
pub const M_EVAL: usize = 50;
/// Default step count inside training losses.
pub const M_TRAIN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub values: Vec<f64>,
    pub baseline: Vec<f64>,
    pub class: usize,
    pub m: usize,
    pub completeness_gap: f64,
}

impl AttributionResult {
    /// `index,value` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{v}\n"));
        }
        s
    }
}

fn check(model: &MlpModel, x: &[f64], class: usize, baseline: &[f64], m: usize) -> Result<()> {
    model.check_input(x)?;
    check_len(x.len(), baseline.len())?;
    model.check_class(class)?;
    if m == 0 {
        return Err(Error::arg("m must be at least 1"));
    }
    Ok(())
}

/// Points `a + (k/m)(x − a)` for `k = 1..=m`.
pub(crate) fn path_points<'a>(x: &'a [f64], baseline: &'a [f64], m: usize) -> impl Iterator<Item = Vec<f64>> + 'a {
    (1..=m).map(move |k| {
        let t = k as f64 / m as f64;
        baseline.iter().zip(x).map(|(a, xi)| a + t * (xi - a)).collect()
    })
}

/// IG values together with the mean path gradient `ḡ`, so that
/// `IG = (x − a) ⊙ ḡ`. For a ReLU net `ḡ` is locally constant in `x`,
/// which makes `ḡ` the diagonal of `∂IG/∂x` almost everywhere.
pub(crate) fn ig_parts(model: &MlpModel, x: &[f64], class: usize, baseline: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; x.len()];
    for p in path_points(x, baseline, m) {
        let g = input_gradient_unchecked(model, &p, class);
        mean.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
    }
    let inv = 1.0 / m as f64;
    mean.iter_mut().for_each(|v| *v *= inv);
    let values = x.iter().zip(baseline).zip(&mean).map(|((xi, a), g)| (xi - a) * g).collect();
    (values, mean)
}

pub fn integrated_gradients(
    model: &MlpModel,
    x: &[f64],
    class: usize,
    baseline: &[f64],
    m: usize,
) -> Result<AttributionResult> {
    check(model, x, class, baseline, m)?;
    let (values, _) = ig_parts(model, x, class, baseline, m);
    let gap = gap_of(model, x, class, baseline, &values);
    Ok(AttributionResult { values, baseline: baseline.to_vec(), class, m, completeness_gap: gap })
}

/// IG against the zero baseline.
pub fn integrated_gradients_zero(model: &MlpModel, x: &[f64], class: usize, m: usize) -> Result<AttributionResult> {
    integrated_gradients(model, x, class, &vec![0.0; x.len()], m)
}

fn gap_of(model: &MlpModel, x: &[f64], class: usize, baseline: &[f64], values: &[f64]) -> f64 {
    let fx = model.logits(x)[class];
    let fa = model.logits(baseline)[class];
    (values.iter().sum::<f64>() - (fx - fa)).abs()
}

/// `|Σᵢ IGᵢ − (f_c(x) − f_c(a))|`.
pub fn completeness_gap(model: &MlpModel, x: &[f64], class: usize, baseline: &[f64], m: usize) -> Result<f64> {
    Ok(integrated_gradients(model, x, class, baseline, m)?.completeness_gap)
}

/// Whether `‖g‖₂ ≤ Σᵢ gᵢ` for a nonnegative attribution. Also confirms the
/// stored gap matches a recomputation from the stored fields.
pub fn norm_bound_check(attr: &AttributionResult, model: &MlpModel, x: &[f64]) -> Result<bool> {
    model.check_input(x)?;
    check_len(x.len(), attr.values.len())?;
    if let Some(v) = attr.values.iter().find(|v| **v < 0.0) {
        return Err(Error::Precondition(format!("negative attribution entry {v}")));
    }
    let gap = gap_of(model, x, attr.class, &attr.baseline, &attr.values);
    if (gap - attr.completeness_gap).abs() > 1e-9 * (1.0 + gap) {
        return Err(Error::Precondition("stored completeness gap does not match the model".into()));
    }
    let l2 = attr.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let l1: f64 = attr.values.iter().sum();
    Ok(l2 <= l1 * (1.0 + 1e-12))
}

/// Accumulate `scale · ∂(digᵀ IG(x))/∂θ` with frozen ReLU masks.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ig_param_backward(
    model: &MlpModel,
    x: &[f64],
    class: usize,
    baseline: &[f64],
    m: usize,
    dig: &[f64],
    grads: &mut ParamGrads,
    scale: f64,
) {
    let v: Vec<f64> = x.iter().zip(baseline).zip(dig).map(|((xi, a), d)| (xi - a) * d).collect();
    let w = one_hot(model.num_classes(), class);
    let s = scale / m as f64;
    for p in path_points(x, baseline, m) {
        let trace = model.trace_unchecked(&p);
        backward_input_gradient(model, &trace, &w, &v, grads, s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Init, Layer};
    use crate::rng::seeded;

    #[test]
    fn linear_is_exact() {
        let m = MlpModel::new(vec![Layer::new(2, 1, vec![1.0, -2.0], vec![0.3]).unwrap()]).unwrap();
        for steps in [1, 7, 50] {
            let r = integrated_gradients(&m, &[0.5, 0.5], 0, &[0.0, 0.0], steps).unwrap();
            assert_eq!(r.values, vec![0.5, -1.0]);
            assert!(r.completeness_gap <= 1e-12);
        }
    }

    #[test]
    fn baseline_at_input_is_zero() {
        let m = MlpModel::init(&[4, 5, 3], Init::He, &mut seeded(1)).unwrap();
        let x = [0.1, 0.9, -0.3, 0.4];
        let r = integrated_gradients(&m, &x, 2, &x, 10).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
        assert_eq!(r.completeness_gap, 0.0);
    }

    #[test]
    fn single_relu_integral() {
        let m = MlpModel::new(vec![
            Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
            Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
        ])
        .unwrap();
        for steps in [1, 3, 100] {
            let r = integrated_gradients_zero(&m, &[1.0], 0, steps).unwrap();
            assert_eq!(r.values, vec![1.0]);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = MlpModel::init(&[2, 2], Init::He, &mut seeded(0)).unwrap();
        assert!(integrated_gradients(&m, &[0.0, 0.0], 0, &[0.0, 0.0], 0).is_err());
        assert!(integrated_gradients(&m, &[0.0, 0.0], 0, &[0.0], 5).is_err());
        assert!(integrated_gradients(&m, &[0.0, 0.0], 2, &[0.0, 0.0], 5).is_err());
    }

    #[test]
    fn norm_bound_examples() {
        let m = MlpModel::new(vec![Layer::new(2, 1, vec![3.0, 4.0], vec![0.0]).unwrap()]).unwrap();
        let a = integrated_gradients_zero(&m, &[1.0, 1.0], 0, 5).unwrap();
        assert_eq!(a.values, vec![3.0, 4.0]);
        assert!(norm_bound_check(&a, &m, &[1.0, 1.0]).unwrap());
        let b = integrated_gradients_zero(&m, &[0.0, 1.25], 0, 5).unwrap();
        assert!(norm_bound_check(&b, &m, &[0.0, 1.25]).unwrap());
        let c = integrated_gradients_zero(&m, &[-1.0, 1.0], 0, 5).unwrap();
        assert!(matches!(norm_bound_check(&c, &m, &[-1.0, 1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn csv_rows() {
        let r = AttributionResult { values: vec![0.5, -1.0], baseline: vec![0.0; 2], class: 0, m: 1, completeness_gap: 0.0 };
        assert_eq!(r.to_csv(), "index,value\n0,0.5\n1,-1\n");
    }
}
