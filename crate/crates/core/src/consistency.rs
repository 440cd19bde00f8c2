//! ReLU activation-state recording and the activation-consistency
//! estimator `P(A∩B)/√(P(A)P(B))`, where `A` and `B` are the events that a
//! hidden pre-activation is positive for a natural and a perturbed input.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attribution::integrated_gradients_zero;
use crate::error::{check_len, Error, Result};
use crate::metrics::cosine_unchecked;
use crate::mlp::{Layer, MlpModel};
use crate::par;
use crate::rng::derived;

/// Hidden activation states: `layers[l][s][u]` is whether unit `u` of
/// hidden layer `l` had a strictly positive pre-activation on sample `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationTrace {
    pub widths: Vec<usize>,
    pub layers: Vec<Vec<Vec<bool>>>,
}

impl ActivationTrace {
    pub fn samples(&self) -> usize {
        self.layers.first().map_or(0, |l| l.len())
    }

    fn same_shape(&self, other: &ActivationTrace) -> bool {
        self.widths == other.widths && self.samples() == other.samples()
    }

    pub(crate) fn from_patterns(widths: Vec<usize>, per_sample: Vec<Vec<Vec<bool>>>) -> Self {
        let mut layers = vec![Vec::with_capacity(per_sample.len()); widths.len()];
        for sample in per_sample {
            for (l, row) in sample.into_iter().enumerate() {
                layers[l].push(row);
            }
        }
        Self { widths, layers }
    }
}

pub fn record_activation_trace(model: &MlpModel, xs: &[Vec<f64>]) -> Result<ActivationTrace> {
    if xs.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    for x in xs {
        model.check_input(x)?;
    }
    let per_sample = par::map_slice(xs, |x| model.activation_pattern(x).expect("checked input"));
    Ok(ActivationTrace::from_patterns(model.hidden_widths(), per_sample))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    /// Pooled over every layer, sample and unit.
    pub value: f64,
    /// Set when either marginal frequency is zero; `value` is then 0.
    pub degenerate: bool,
    pub per_layer: Vec<Option<f64>>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    a: u64,
    b: u64,
    ab: u64,
}

impl Counts {
    fn ratio(self) -> Option<f64> {
        (self.a > 0 && self.b > 0).then(|| self.ab as f64 / ((self.a as f64) * (self.b as f64)).sqrt())
    }
}

pub fn activation_consistency(nat: &ActivationTrace, adv: &ActivationTrace) -> Result<Consistency> {
    if !nat.same_shape(adv) {
        return Err(Error::arg("activation traces differ in shape"));
    }
    let mut total = Counts::default();
    let mut per_layer = Vec::with_capacity(nat.layers.len());
    for (ln, la) in nat.layers.iter().zip(&adv.layers) {
        let mut c = Counts::default();
        for (rn, ra) in ln.iter().zip(la) {
            check_len(rn.len(), ra.len())?;
            for (&p, &q) in rn.iter().zip(ra) {
                c.a += p as u64;
                c.b += q as u64;
                c.ab += (p && q) as u64;
            }
        }
        total.a += c.a;
        total.b += c.b;
        total.ab += c.ab;
        per_layer.push(c.ratio());
    }
    Ok(match total.ratio() {
        Some(v) => Consistency { value: v.min(1.0), degenerate: false, per_layer },
        None => Consistency { value: 0.0, degenerate: true, per_layer },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Estimate {
    /// `cos(IG(x), IG(x̃))` for the sampled network.
    pub cos_estimate: f64,
    /// Orthant-frequency consistency over the sampled hidden units.
    pub consistency_estimate: f64,
    pub gap: f64,
    /// Width below 1,000.
    pub low_power: bool,
    /// Relative variance of `x` or `x̃` above 1e-3.
    pub variance_warning: bool,
}

/// `Σ(xᵢ − x̄)² / (n x̄²)`.
pub fn relative_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if mean == 0.0 {
        f64::INFINITY
    } else {
        var / (mean * mean)
    }
}

/// Bias-free single-hidden-layer net `f(x) = uᵀReLU(Wᵀx)` with
/// `Wᵢ ~ N(0, σ_w² I)` and `uᵢ ~ N(0, σ_u²)`.
pub fn gaussian_single_layer(d: usize, width: usize, sigma_w: f64, sigma_u: f64, seed: u64) -> Result<MlpModel> {
    let nw = Normal::new(0.0, sigma_w).map_err(|e| Error::arg(e.to_string()))?;
    let nu = Normal::new(0.0, sigma_u).map_err(|e| Error::arg(e.to_string()))?;
    let mut r = derived(seed, 0);
    let w: Vec<f64> = (0..d * width).map(|_| nw.sample(&mut r)).collect();
    let u: Vec<f64> = (0..width).map(|_| nu.sample(&mut r)).collect();
    MlpModel::new(vec![Layer::new(d, width, w, vec![0.0; width])?, Layer::new(width, 1, u, vec![0.0])?])
}

/// Compares `cos(IG(x), IG(x̃))` on a sampled Gaussian single-layer net
/// with the activation consistency of its hidden units.
///
/// With zero bias every hidden unit keeps its sign along the ray from the
/// zero baseline, so a single Riemann step gives the exact IG.
pub fn prop1_montecarlo(
    d: usize,
    hidden_width: usize,
    sigma_w: f64,
    sigma_u: f64,
    x: &[f64],
    x_adv: &[f64],
    seed: u64,
) -> Result<Prop1Estimate> {
    check_len(d, x.len())?;
    check_len(d, x_adv.len())?;
    if hidden_width == 0 {
        return Err(Error::arg("hidden width must be positive"));
    }
    let model = gaussian_single_layer(d, hidden_width, sigma_w, sigma_u, seed)?;
    let ig = integrated_gradients_zero(&model, x, 0, 1)?;
    let ig_adv = integrated_gradients_zero(&model, x_adv, 0, 1)?;
    let cos = cosine_unchecked(&ig.values, &ig_adv.values).value;
    let trace = record_activation_trace(&model, &[x.to_vec()])?;
    let trace_adv = record_activation_trace(&model, &[x_adv.to_vec()])?;
    let cons = activation_consistency(&trace, &trace_adv)?.value;
    Ok(Prop1Estimate {
        cos_estimate: cos,
        consistency_estimate: cons,
        gap: (cos - cons).abs(),
        low_power: hidden_width < 1000,
        variance_warning: relative_variance(x) > 1e-3 || relative_variance(x_adv) > 1e-3,
    })
}

/// Orthant consistency for Gaussian weights and inputs at angle `θ`:
/// `P(A∩B) = (π − θ)/(2π)` and `P(A) = P(B) = 1/2`.
pub fn gaussian_consistency(theta: f64) -> f64 {
    (std::f64::consts::PI - theta) / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> MlpModel {
        MlpModel::new(vec![
            Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
            Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn single_unit_patterns() {
        let t = record_activation_trace(&unit(), &[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(t.layers, vec![vec![vec![true], vec![false]]]);
    }

    #[test]
    fn zero_preactivation_is_inactive() {
        let m = MlpModel::new(vec![Layer::zeros(3, 4), Layer::zeros(4, 2)]).unwrap();
        let t = record_activation_trace(&m, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(t.layers[0][0].iter().all(|a| !a));
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(record_activation_trace(&unit(), &[]).is_err());
    }

    #[test]
    fn identical_and_disjoint() {
        let a = ActivationTrace { widths: vec![3], layers: vec![vec![vec![true, false, true]]] };
        let b = ActivationTrace { widths: vec![3], layers: vec![vec![vec![false, true, false]]] };
        assert_eq!(activation_consistency(&a, &a).unwrap().value, 1.0);
        assert_eq!(activation_consistency(&a, &b).unwrap().value, 0.0);
        let z = ActivationTrace { widths: vec![3], layers: vec![vec![vec![false; 3]]] };
        assert!(activation_consistency(&a, &z).unwrap().degenerate);
        let c = ActivationTrace { widths: vec![2], layers: vec![vec![vec![true, false]]] };
        assert!(activation_consistency(&a, &c).is_err());
    }

    #[test]
    fn identical_inputs_give_unit_estimates() {
        let x = vec![0.5; 20];
        let e = prop1_montecarlo(20, 200, 1.0, 1.0, &x, &x, 4).unwrap();
        assert_eq!(e.cos_estimate, 1.0);
        assert_eq!(e.consistency_estimate, 1.0);
        assert_eq!(e.gap, 0.0);
        assert!(e.low_power);
    }
}
