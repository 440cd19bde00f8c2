//! ℓ∞ attacks: FGSM, PGD with several objectives, and the top-k attribution
//! attack (IFIA).
//!
//! For a ReLU net the mean path gradient `ḡ` in `IG = (x − a) ⊙ ḡ` is
//! locally constant, so `∂IG/∂x = diag(ḡ)` almost everywhere. Attribution
//! objectives are differentiated with that rule.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::attribution::{ig_parts, M_EVAL};
use crate::error::{Error, Result};
use crate::grad::{cross_entropy, softmax};
use crate::metrics::{top_k_indices, MetricReport};
use crate::mlp::{argmax, MlpModel};
use crate::par;
use crate::rng::{derive_seed, derived};

fn default_eps() -> f64 {
    0.1
}
fn default_steps() -> usize {
    200
}
fn default_restarts() -> usize {
    5
}
fn default_k() -> usize {
    100
}
fn default_clip() -> (f64, f64) {
    (0.0, 1.0)
}
fn default_m() -> usize {
    M_EVAL
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    /// Step size; `ε/10` when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_clip")]
    pub clip_range: (f64, f64),
    /// Riemann steps for attributions inside the attack.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Rank attributions by magnitude when scoring.
    #[serde(default = "default_true")]
    pub absolute: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: default_eps(),
            alpha: None,
            steps: default_steps(),
            restarts: default_restarts(),
            k: default_k(),
            clip_range: default_clip(),
            m: default_m(),
            absolute: true,
        }
    }
}

impl AttackConfig {
    pub fn step_size(&self) -> f64 {
        self.alpha.unwrap_or(self.epsilon / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon {} must be finite and nonnegative", self.epsilon)));
        }
        let a = self.step_size();
        if self.steps > 0 && self.epsilon > 0.0 && !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("step size {a} must be positive")));
        }
        if self.clip_range.0.partial_cmp(&self.clip_range.1) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Config("clip range needs lo < hi".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        Ok(())
    }

    fn check_input(&self, model: &MlpModel, x: &[f64]) -> Result<()> {
        self.validate()?;
        model.check_input(x)?;
        let (lo, hi) = self.clip_range;
        if x.iter().any(|v| *v < lo || *v > hi) {
            return Err(Error::arg("input outside the clip range"));
        }
        Ok(())
    }
}

/// Clamp to the ε-ball around `x`, then to the clip range.
pub fn project(v: &mut [f64], x: &[f64], epsilon: f64, (lo, hi): (f64, f64)) {
    for (vi, xi) in v.iter_mut().zip(x) {
        *vi = vi.clamp(xi - epsilon, xi + epsilon).clamp(lo, hi);
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn signed_step(v: &mut [f64], grad: &[f64], alpha: f64) {
    v.iter_mut().zip(grad).for_each(|(a, g)| *a += alpha * sign(*g));
}

/// `∇ₓ CE(f(x), y)`.
pub fn ce_input_gradient(model: &MlpModel, x: &[f64], y: usize) -> Vec<f64> {
    let trace = model.trace_unchecked(x);
    let (_, g) = cross_entropy(trace.logits(), y);
    crate::grad::backward_logits(model, &trace, &g, None)
}

/// Single signed step on cross-entropy.
pub fn fgsm(model: &MlpModel, x: &[f64], y: usize, epsilon: f64, clip_range: (f64, f64)) -> Result<Vec<f64>> {
    let cfg = AttackConfig { epsilon, alpha: Some(epsilon.max(f64::MIN_POSITIVE)), clip_range, ..Default::default() };
    cfg.check_input(model, x)?;
    model.check_class(y)?;
    let mut out = x.to_vec();
    if epsilon == 0.0 {
        return Ok(out);
    }
    signed_step(&mut out, &ce_input_gradient(model, x, y), epsilon);
    project(&mut out, x, epsilon, clip_range);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PgdObjective {
    #[default]
    CrossEntropy,
    /// `KL(p(x) ‖ p(x̃))`.
    KlToNatural,
    /// `1 − cos(IG(x), IG(x̃))`.
    IgrCosine,
}

impl std::str::FromStr for PgdObjective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" | "ce" => Ok(Self::CrossEntropy),
            "kl_to_natural" | "kl" => Ok(Self::KlToNatural),
            "igr_cosine" | "igr" => Ok(Self::IgrCosine),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

/// Gradient of `cos(a, b)` with respect to `b`; zero when degenerate.
pub(crate) fn cosine_grad_b(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na < crate::metrics::DEGENERATE_NORM || nb < crate::metrics::DEGENERATE_NORM {
        return (0.0, vec![0.0; b.len()]);
    }
    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    let g = a.iter().zip(b).map(|(x, y)| x / (na * nb) - c * y / (nb * nb)).collect();
    (c, g)
}

/// Value of an objective at `xt`, for monitoring.
pub fn objective_value(model: &MlpModel, objective: PgdObjective, x: &[f64], xt: &[f64], y: usize, m: usize) -> f64 {
    match objective {
        PgdObjective::CrossEntropy => cross_entropy(&model.logits(xt), y).0,
        PgdObjective::KlToNatural => kl(&softmax(&model.logits(x)), &softmax(&model.logits(xt))),
        PgdObjective::IgrCosine => {
            let zero = vec![0.0; x.len()];
            let (a, _) = ig_parts(model, x, y, &zero, m);
            let (b, _) = ig_parts(model, xt, y, &zero, m);
            1.0 - crate::metrics::cosine_unchecked(&a, &b).value
        }
    }
}

pub(crate) fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi.ln() - qi.max(f64::MIN_POSITIVE).ln()))
        .sum::<f64>()
        .max(0.0)
}

struct PgdState<'a> {
    model: &'a MlpModel,
    objective: PgdObjective,
    y: usize,
    m: usize,
    p_nat: Vec<f64>,
    ig_nat: Vec<f64>,
}

impl<'a> PgdState<'a> {
    fn new(model: &'a MlpModel, objective: PgdObjective, x: &'a [f64], y: usize, m: usize) -> Self {
        let p_nat = softmax(&model.logits(x));
        let ig_nat = if objective == PgdObjective::IgrCosine {
            ig_parts(model, x, y, &vec![0.0; x.len()], m).0
        } else {
            Vec::new()
        };
        Self { model, objective, y, m, p_nat, ig_nat }
    }

    fn gradient(&self, xt: &[f64]) -> Vec<f64> {
        match self.objective {
            PgdObjective::CrossEntropy => ce_input_gradient(self.model, xt, self.y),
            PgdObjective::KlToNatural => {
                let trace = self.model.trace_unchecked(xt);
                let q = softmax(trace.logits());
                let g: Vec<f64> = q.iter().zip(&self.p_nat).map(|(qi, pi)| qi - pi).collect();
                crate::grad::backward_logits(self.model, &trace, &g, None)
            }
            PgdObjective::IgrCosine => {
                let (b, gbar) = ig_parts(self.model, xt, self.y, &vec![0.0; xt.len()], self.m);
                let (_, dc) = cosine_grad_b(&self.ig_nat, &b);
                dc.iter().zip(&gbar).map(|(d, g)| -d * g).collect()
            }
        }
    }
}

/// Uniform start in the ε-ball, clipped.
pub fn random_start(x: &[f64], epsilon: f64, clip_range: (f64, f64), seed: u64) -> Vec<f64> {
    let mut r = derived(seed, 0);
    let mut v: Vec<f64> = x.iter().map(|xi| xi + epsilon * (2.0 * r.random::<f64>() - 1.0)).collect();
    project(&mut v, x, epsilon, clip_range);
    v
}

/// Projected signed-gradient ascent from a uniform random start.
pub fn pgd(
    model: &MlpModel,
    objective: PgdObjective,
    x: &[f64],
    y: usize,
    config: &AttackConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    config.check_input(model, x)?;
    model.check_class(y)?;
    Ok(pgd_unchecked(model, objective, x, y, config, seed))
}

pub(crate) fn pgd_unchecked(
    model: &MlpModel,
    objective: PgdObjective,
    x: &[f64],
    y: usize,
    config: &AttackConfig,
    seed: u64,
) -> Vec<f64> {
    if config.epsilon == 0.0 {
        return x.to_vec();
    }
    let state = PgdState::new(model, objective, x, y, config.m);
    let mut xt = random_start(x, config.epsilon, config.clip_range, seed);
    let alpha = config.step_size();
    for _ in 0..config.steps {
        let g = state.gradient(&xt);
        signed_step(&mut xt, &g, alpha);
        project(&mut xt, x, config.epsilon, config.clip_range);
    }
    xt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    /// Worst-case restart's output.
    pub perturbed: Vec<f64>,
    pub label_preserved: bool,
    pub per_restart_metrics: Vec<MetricReport>,
    /// Accepted steps of the worst-case restart.
    pub steps_taken: usize,
    /// Index of the worst-case restart.
    pub worst: usize,
    /// Set when the clean input is misclassified; nothing was attacked.
    pub skipped: bool,
}

impl AttackReport {
    pub fn mean_metrics(&self) -> Option<MetricReport> {
        MetricReport::mean(&self.per_restart_metrics)
    }

    pub fn worst_metrics(&self) -> Option<&MetricReport> {
        self.per_restart_metrics.get(self.worst)
    }
}

struct Restart {
    perturbed: Vec<f64>,
    metrics: MetricReport,
    steps: usize,
}

/// Top-k attribution attack.
///
/// Each restart ascends `D(x̃) = −Σ_{i∈S} |IG(x̃)ᵢ|`, where `S` holds the
/// top-k coordinates of `|IG(x)|`, by signed steps projected to the ε-ball
/// and clip range. A step that changes the predicted label is reverted;
/// since the step from a given point is deterministic, the restart then
/// stops. A random start that changes the label falls back to `x`.
pub fn ifia_topk(model: &MlpModel, x: &[f64], y: usize, config: &AttackConfig, seed: u64) -> Result<AttackReport> {
    config.check_input(model, x)?;
    model.check_class(y)?;
    if config.k > x.len() {
        return Err(Error::Config(format!("k = {} exceeds input dimension {}", config.k, x.len())));
    }
    if model.predict(x)? != y {
        return Ok(AttackReport {
            perturbed: x.to_vec(),
            label_preserved: false,
            per_restart_metrics: Vec::new(),
            steps_taken: 0,
            worst: 0,
            skipped: true,
        });
    }
    let zero = vec![0.0; x.len()];
    let (ig_nat, _) = ig_parts(model, x, y, &zero, config.m);
    let top = top_k_indices(&ig_nat, config.k, config.absolute);

    let restarts = par::map_range(config.restarts, |r| {
        let s = derive_seed(seed, r as u64);
        ifia_restart(model, x, y, config, &ig_nat, &top, s)
    });
    let mut worst = 0;
    for (i, r) in restarts.iter().enumerate() {
        let w = &restarts[worst].metrics;
        if (r.metrics.topk, r.metrics.tau) < (w.topk, w.tau) {
            worst = i;
        }
    }
    let perturbed = restarts[worst].perturbed.clone();
    let label_preserved = argmax(&model.logits(&perturbed)) == y;
    Ok(AttackReport {
        label_preserved,
        steps_taken: restarts[worst].steps,
        per_restart_metrics: restarts.into_iter().map(|r| r.metrics).collect(),
        perturbed,
        worst,
        skipped: false,
    })
}

fn ifia_restart(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    config: &AttackConfig,
    ig_nat: &[f64],
    top: &[usize],
    seed: u64,
) -> Restart {
    let zero = vec![0.0; x.len()];
    let mut xt = if config.epsilon > 0.0 { random_start(x, config.epsilon, config.clip_range, seed) } else { x.to_vec() };
    if argmax(&model.logits(&xt)) != y {
        xt = x.to_vec();
    }
    let alpha = config.step_size();
    let mut steps = 0;
    let mut ig_cur = None;
    if config.epsilon > 0.0 {
        for _ in 0..config.steps {
            let (ig, gbar) = ig_parts(model, &xt, y, &zero, config.m);
            let mut grad = vec![0.0; x.len()];
            for &i in top {
                grad[i] = -sign(ig[i]) * gbar[i];
            }
            ig_cur = Some(ig);
            let mut next = xt.clone();
            signed_step(&mut next, &grad, alpha);
            project(&mut next, x, config.epsilon, config.clip_range);
            if next == xt || argmax(&model.logits(&next)) != y {
                break;
            }
            xt = next;
            ig_cur = None;
            steps += 1;
        }
    }
    let ig = ig_cur.unwrap_or_else(|| ig_parts(model, &xt, y, &zero, config.m).0);
    let metrics = MetricReport::compute(ig_nat, &ig, config.k, config.absolute).expect("validated k");
    Restart { perturbed: xt, metrics, steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Init, Layer};
    use crate::rng::seeded;

    fn linear2() -> MlpModel {
        MlpModel::new(vec![Layer::new(3, 2, vec![1.0, -0.5, 0.2, -1.0, 0.8, 0.3], vec![0.0, 0.1]).unwrap()]).unwrap()
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let m = MlpModel::init(&[4, 6, 3], Init::He, &mut seeded(2)).unwrap();
        let x = [0.2, 0.4, 0.6, 0.8];
        assert_eq!(fgsm(&m, &x, 1, 0.0, (0.0, 1.0)).unwrap(), x.to_vec());
        let cfg = AttackConfig { epsilon: 0.0, steps: 5, k: 2, ..Default::default() };
        for obj in [PgdObjective::CrossEntropy, PgdObjective::KlToNatural, PgdObjective::IgrCosine] {
            assert_eq!(pgd(&m, obj, &x, 1, &cfg, 3).unwrap(), x.to_vec());
        }
        let y = m.predict(&x).unwrap();
        let r = ifia_topk(&m, &x, y, &cfg, 1).unwrap();
        assert_eq!(r.perturbed, x.to_vec());
        assert!(r.label_preserved);
        assert!(r.per_restart_metrics.iter().all(|m| m.topk == 1.0 && m.tau == 1.0));
    }

    #[test]
    fn fgsm_on_linear_softmax_matches_closed_form() {
        let m = linear2();
        let x = [0.5, 0.5, 0.5];
        let p = softmax(&m.logits(&x));
        // ∇ₓCE = Σ_c (p_c − [c = y]) w_c
        let w = m.layers()[0].rows();
        let g: Vec<f64> = (0..3).map(|i| (p[0] - 1.0) * w[0][i] + p[1] * w[1][i]).collect();
        let expected: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| (xi + 0.1 * gi.signum()).clamp(0.0, 1.0)).collect();
        assert_eq!(fgsm(&m, &x, 0, 0.1, (0.0, 1.0)).unwrap(), expected);
    }

    #[test]
    fn zero_steps_returns_random_start() {
        let m = linear2();
        let cfg = AttackConfig { epsilon: 0.2, steps: 0, k: 2, ..Default::default() };
        let a = pgd(&m, PgdObjective::CrossEntropy, &[0.5; 3], 0, &cfg, 11).unwrap();
        assert_eq!(a, random_start(&[0.5; 3], 0.2, (0.0, 1.0), 11));
        assert_eq!(a, pgd(&m, PgdObjective::CrossEntropy, &[0.5; 3], 0, &cfg, 11).unwrap());
        assert!(a.iter().all(|v| (v - 0.5).abs() <= 0.2));
    }

    #[test]
    fn objective_names() {
        assert_eq!("igr_cosine".parse::<PgdObjective>().unwrap(), PgdObjective::IgrCosine);
        assert!("cw".parse::<PgdObjective>().is_err());
    }

    #[test]
    fn misclassified_sample_is_skipped() {
        let m = linear2();
        let x = [0.5; 3];
        let wrong = 1 - m.predict(&x).unwrap();
        let cfg = AttackConfig { k: 2, steps: 3, ..Default::default() };
        assert!(ifia_topk(&m, &x, wrong, &cfg, 0).unwrap().skipped);
    }

    #[test]
    fn invalid_config_rejected() {
        let m = linear2();
        let bad = AttackConfig { clip_range: (1.0, 0.0), ..Default::default() };
        assert!(pgd(&m, PgdObjective::CrossEntropy, &[0.5; 3], 0, &bad, 0).is_err());
        let bad = AttackConfig { epsilon: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
