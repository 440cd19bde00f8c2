//! Robust training objectives and the adversarial training loop with the
//! integrated-gradients regulariser (IGR).
//!
//! Per-sample losses, with `z = f(x)`, `z̃ = f(x̃)`, `p = softmax(z)`,
//! `q = softmax(z̃)` and attributions `A = IG(x)`, `B = IG(x̃)`:
//!
//! | kind          | loss                                            |
//! |---------------|-------------------------------------------------|
//! | `at`          | `CE(z̃, y)`                                      |
//! | `trades`      | `CE(z̃, y) + β·KL(p‖q)`                          |
//! | `mart`        | `BCE(z̃, y) + β·KL(p‖q)·(1 − p_y)`               |
//! | `ig_norm`     | `CE(z, y) + λ‖A − B‖₁`                          |
//! | `ig_sum_norm` | `CE(z̃, y) + λ‖A − B‖₁`                          |
//! | `advaat`      | `CE(z̃, y) + λ·(1 − PCC(A, B))/2`                |
//!
//! `BCE(z̃, y) = −log q_y − log(1 − max_{k≠y} q_k)`. With IGR enabled,
//! `λ·(1 − cos(A, B))` is added. Attributions use the zero baseline.
//! Parameter gradients of attribution terms use frozen ReLU masks.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attacks::{cosine_grad_b, kl, pgd_unchecked, AttackConfig, PgdObjective};
use crate::attribution::{ig_parts, ig_param_backward, M_TRAIN};
use crate::consistency::{activation_consistency, ActivationTrace};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grad::{backward_logits, flatten_params, log_softmax, set_params, ParamGrads};
use crate::metrics::{cosine_unchecked, DEGENERATE_NORM};
use crate::mlp::{argmax, MlpModel};
use crate::par;
use crate::rng::{derive_seed, derived};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    At,
    Trades,
    Mart,
    IgNorm,
    IgSumNorm,
    Advaat,
}

impl LossKind {
    /// Objective of the inner attack producing `x̃`.
    pub fn attack_objective(self) -> PgdObjective {
        match self {
            LossKind::Trades => PgdObjective::KlToNatural,
            _ => PgdObjective::CrossEntropy,
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_lowercase()))
            .map_err(|_| Error::Config(format!("unknown loss kind `{s}`")))
    }
}

fn default_lambda() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    6.0
}
fn default_m_train() -> usize {
    M_TRAIN
}
fn default_epochs() -> usize {
    30
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> f64 {
    0.05
}
fn default_train_attack() -> AttackConfig {
    AttackConfig { epsilon: 0.1, alpha: Some(0.025), steps: 10, restarts: 1, m: M_TRAIN, ..Default::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub loss_kind: LossKind,
    #[serde(default)]
    pub use_igr: bool,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Inner attack; only `epsilon`, `alpha`, `steps` and `clip_range` matter.
    #[serde(default = "default_train_attack")]
    pub attack: AttackConfig,
    #[serde(default = "default_m_train")]
    pub m_train: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !finite_nonneg(self.lambda) {
            return Err(Error::Config(format!("lambda {} must be nonnegative", self.lambda)));
        }
        if !finite_nonneg(self.beta) {
            return Err(Error::Config(format!("beta {} must be nonnegative", self.beta)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.m_train == 0 || self.batch_size == 0 {
            return Err(Error::Config("m_train and batch_size must be positive".into()));
        }
        self.attack.validate()
    }
}

/// Loss value split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// CE or BCE part.
    pub base: f64,
    /// KL or attribution-regulariser part of the baseline method, weighted.
    pub regularizer: f64,
    /// `λ·(1 − cos(A, B))` when IGR is on, else 0.
    pub igr: f64,
    /// Attributions were too small for a cosine.
    pub igr_degenerate: bool,
}

impl LossBreakdown {
    fn add_scaled(&mut self, o: &LossBreakdown, s: f64) {
        self.total += s * o.total;
        self.base += s * o.base;
        self.regularizer += s * o.regularizer;
        self.igr += s * o.igr;
        self.igr_degenerate |= o.igr_degenerate;
    }
}

/// `1 − cos(IG(x), IG(x̃))` with raw attributions, in `[0, 2]`, plus a
/// degenerate flag (value 0) when either attribution is near zero.
pub fn igr_term(model: &MlpModel, x: &[f64], x_adv: &[f64], class: usize, m: usize) -> Result<(f64, bool)> {
    model.check_input(x)?;
    model.check_input(x_adv)?;
    model.check_class(class)?;
    if m == 0 {
        return Err(Error::arg("m must be at least 1"));
    }
    let zero = vec![0.0; x.len()];
    let (a, _) = ig_parts(model, x, class, &zero, m);
    let (b, _) = ig_parts(model, x_adv, class, &zero, m);
    let c = cosine_unchecked(&a, &b);
    Ok(if c.degenerate { (0.0, true) } else { ((1.0 - c.value).clamp(0.0, 2.0), false) })
}

/// Hyper-parameters of a single loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub use_igr: bool,
    pub lambda: f64,
    pub beta: f64,
    pub m: usize,
}

impl LossSpec {
    pub fn from_config(c: &TrainConfig) -> Self {
        Self { kind: c.loss_kind, use_igr: c.use_igr, lambda: c.lambda, beta: c.beta, m: c.m_train }
    }
}

/// Loss of one `(x, x̃, y)` triple.
pub fn compute_loss(spec: &LossSpec, model: &MlpModel, x: &[f64], x_adv: &[f64], y: usize) -> Result<LossBreakdown> {
    check_sample(spec, model, x, x_adv, y)?;
    Ok(sample_loss(spec, model, x, x_adv, y, None))
}

/// Mean loss over a batch of `(x, x̃, y)` triples and its parameter gradient.
pub fn batch_loss_gradient(
    spec: &LossSpec,
    model: &MlpModel,
    batch: &[(Vec<f64>, Vec<f64>, usize)],
) -> Result<(LossBreakdown, ParamGrads)> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    for (x, xa, y) in batch {
        check_sample(spec, model, x, xa, *y)?;
    }
    let parts = par::map_slice(batch, |(x, xa, y)| {
        let mut g = ParamGrads::zeros_like(model);
        let l = sample_loss(spec, model, x, xa, *y, Some(&mut g));
        (l, g)
    });
    let inv = 1.0 / batch.len() as f64;
    let mut total = LossBreakdown::default();
    let mut grads = ParamGrads::zeros_like(model);
    for (l, g) in &parts {
        total.add_scaled(l, inv);
        grads.add_scaled(g, inv);
    }
    Ok((total, grads))
}

fn check_sample(spec: &LossSpec, model: &MlpModel, x: &[f64], x_adv: &[f64], y: usize) -> Result<()> {
    model.check_input(x)?;
    model.check_input(x_adv)?;
    model.check_class(y)?;
    if spec.m == 0 {
        return Err(Error::arg("m must be at least 1"));
    }
    if !(spec.lambda >= 0.0 && spec.beta >= 0.0) {
        return Err(Error::arg("lambda and beta must be nonnegative"));
    }
    Ok(())
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

/// Value and, when `grads` is given, accumulated parameter gradient.
fn sample_loss(
    spec: &LossSpec,
    model: &MlpModel,
    x: &[f64],
    xa: &[f64],
    y: usize,
    grads: Option<&mut ParamGrads>,
) -> LossBreakdown {
    let k = model.num_classes();
    let tn = model.trace_unchecked(x);
    let ta = model.trace_unchecked(xa);
    let lp = log_softmax(tn.logits());
    let lq = log_softmax(ta.logits());
    let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
    let q: Vec<f64> = lq.iter().map(|v| v.exp()).collect();

    let mut dz = vec![0.0; k];
    let mut dza = vec![0.0; k];
    let mut out = LossBreakdown::default();

    let ce_adv = |dza: &mut [f64]| {
        for i in 0..k {
            dza[i] += q[i] - if i == y { 1.0 } else { 0.0 };
        }
        -lq[y]
    };
    // KL(p‖q) and its logit gradients, scaled by w
    let kl_term = |w: f64, dz: &mut [f64], dza: &mut [f64]| {
        let s: Vec<f64> = lp.iter().zip(&lq).map(|(a, b)| a - b).collect();
        let klv = kl(&p, &q);
        let ps: f64 = p.iter().zip(&s).map(|(a, b)| a * b).sum();
        for i in 0..k {
            dza[i] += w * (q[i] - p[i]);
            dz[i] += w * p[i] * (s[i] - ps);
        }
        klv
    };

    let needs_ig = matches!(spec.kind, LossKind::IgNorm | LossKind::IgSumNorm | LossKind::Advaat)
        || (spec.use_igr && spec.lambda != 0.0);
    let zero = vec![0.0; x.len()];
    let (ig_a, ig_b) = if needs_ig || spec.use_igr {
        (ig_parts(model, x, y, &zero, spec.m).0, ig_parts(model, xa, y, &zero, spec.m).0)
    } else {
        (Vec::new(), Vec::new())
    };
    let mut dig_a = vec![0.0; if needs_ig { x.len() } else { 0 }];
    let mut dig_b = dig_a.clone();

    match spec.kind {
        LossKind::At => out.base = ce_adv(&mut dza),
        LossKind::Trades => {
            out.base = ce_adv(&mut dza);
            out.regularizer = spec.beta * kl_term(spec.beta, &mut dz, &mut dza);
        }
        LossKind::Mart => {
            out.base = ce_adv(&mut dza);
            let j = (0..k).filter(|&i| i != y).max_by(|&a, &b| q[a].total_cmp(&q[b]).then(b.cmp(&a)));
            if let Some(j) = j {
                let one_minus = (1.0 - q[j]).max(1e-12);
                out.base += -one_minus.ln();
                for i in 0..k {
                    let dq = q[j] * (if i == j { 1.0 } else { 0.0 } - q[i]);
                    dza[i] += dq / one_minus;
                }
            }
            let wy = 1.0 - p[y];
            let klv = kl_term(spec.beta * wy, &mut dz, &mut dza);
            out.regularizer = spec.beta * klv * wy;
            // ∂(1 − p_y)/∂z_i = −p_y(δ_iy − p_i)
            for i in 0..k {
                dz[i] += spec.beta * klv * (-p[y] * (if i == y { 1.0 } else { 0.0 } - p[i]));
            }
        }
        LossKind::IgNorm | LossKind::IgSumNorm => {
            if spec.kind == LossKind::IgNorm {
                for i in 0..k {
                    dz[i] += p[i] - if i == y { 1.0 } else { 0.0 };
                }
                out.base = -lp[y];
            } else {
                out.base = ce_adv(&mut dza);
            }
            let mut l1 = 0.0;
            for i in 0..x.len() {
                let d = ig_a[i] - ig_b[i];
                l1 += d.abs();
                dig_a[i] += spec.lambda * sign(d);
                dig_b[i] -= spec.lambda * sign(d);
            }
            out.regularizer = spec.lambda * l1;
        }
        LossKind::Advaat => {
            out.base = ce_adv(&mut dza);
            let n = x.len() as f64;
            let ma = ig_a.iter().sum::<f64>() / n;
            let mb = ig_b.iter().sum::<f64>() / n;
            let ca: Vec<f64> = ig_a.iter().map(|v| v - ma).collect();
            let cb: Vec<f64> = ig_b.iter().map(|v| v - mb).collect();
            let (pcc, gb) = cosine_grad_b(&ca, &cb);
            let (_, ga) = cosine_grad_b(&cb, &ca);
            out.regularizer = spec.lambda * (1.0 - pcc) / 2.0;
            // centring is a symmetric projection; apply it to the cosine gradient
            let center = |g: &[f64]| {
                let m = g.iter().sum::<f64>() / n;
                g.iter().map(|v| v - m).collect::<Vec<f64>>()
            };
            for (d, g) in dig_a.iter_mut().zip(center(&ga)) {
                *d -= spec.lambda * g / 2.0;
            }
            for (d, g) in dig_b.iter_mut().zip(center(&gb)) {
                *d -= spec.lambda * g / 2.0;
            }
        }
    }

    if spec.use_igr {
        let c = cosine_unchecked(&ig_a, &ig_b);
        if c.degenerate {
            out.igr_degenerate = true;
        } else {
            out.igr = spec.lambda * (1.0 - c.value).clamp(0.0, 2.0);
            if spec.lambda != 0.0 {
                let na = ig_a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nb = ig_b.iter().map(|v| v * v).sum::<f64>().sqrt();
                if na >= DEGENERATE_NORM && nb >= DEGENERATE_NORM {
                    let (_, gb) = cosine_grad_b(&ig_a, &ig_b);
                    let (_, ga) = cosine_grad_b(&ig_b, &ig_a);
                    dig_a.iter_mut().zip(&ga).for_each(|(d, g)| *d -= spec.lambda * g);
                    dig_b.iter_mut().zip(&gb).for_each(|(d, g)| *d -= spec.lambda * g);
                }
            }
        }
    }
    out.total = out.base + out.regularizer + out.igr;

    if let Some(g) = grads {
        if dz.iter().any(|v| *v != 0.0) {
            backward_logits(model, &tn, &dz, Some((g, 1.0)));
        }
        if dza.iter().any(|v| *v != 0.0) {
            backward_logits(model, &ta, &dza, Some((g, 1.0)));
        }
        if needs_ig {
            ig_param_backward(model, x, y, &zero, spec.m, &dig_a, g, 1.0);
            ig_param_backward(model, xa, y, &zero, spec.m, &dig_b, g, 1.0);
        }
    }
    out
}

/// One epoch of training statistics, measured on the perturbed batches
/// produced during the epoch (before each update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub base: f64,
    pub regularizer: f64,
    pub igr: f64,
    pub natural_accuracy: f64,
    pub adversarial_accuracy: f64,
    pub mean_ig_cosine: f64,
    pub activation_consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "epoch,loss,base,regularizer,igr,natural_accuracy,adversarial_accuracy,mean_ig_cosine,activation_consistency";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.loss,
                r.base,
                r.regularizer,
                r.igr,
                r.natural_accuracy,
                r.adversarial_accuracy,
                r.mean_ig_cosine,
                r.activation_consistency
            ));
        }
        s
    }
}

/// Adversarial training: per batch, perturb every sample with the inner
/// PGD of the loss kind, evaluate the loss on `(x, x̃)` (IGR reuses the
/// same `x̃`), and take one SGD step with optional momentum.
///
/// Shuffling and attack starts use seeds derived from `config.seed`, the
/// epoch and the sample index, so runs are reproducible and independent
/// of thread count.
pub fn train(config: &TrainConfig, dataset: &Dataset, init: MlpModel) -> Result<(MlpModel, TrainLog)> {
    config.validate()?;
    let mut log = TrainLog::default();
    if config.epochs == 0 {
        return Ok((init, log));
    }
    if dataset.is_empty() {
        return Err(Error::arg("empty dataset"));
    }
    if dataset.dim() != init.input_dim() {
        return Err(Error::Shape { expected: init.input_dim(), got: dataset.dim() });
    }
    if dataset.class_count > init.num_classes() {
        return Err(Error::Shape { expected: init.num_classes(), got: dataset.class_count });
    }
    let spec = LossSpec::from_config(config);
    let objective = config.loss_kind.attack_objective();
    let mut model = init;
    let mut velocity = vec![0.0; model.num_params()];

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut derived(config.seed, epoch as u64));
        let mut sums = LossBreakdown::default();
        let (mut nat_ok, mut adv_ok, mut cos_sum) = (0usize, 0usize, 0.0);
        let mut nat_patterns = Vec::with_capacity(dataset.len());
        let mut adv_patterns = Vec::with_capacity(dataset.len());

        for chunk in order.chunks(config.batch_size) {
            let epoch_seed = derive_seed(config.seed, 1_000_003 + epoch as u64);
            let prepared = par::map_slice(chunk, |&i| {
                let x = &dataset.inputs[i];
                let y = dataset.labels[i];
                let xa = pgd_unchecked(&model, objective, x, y, &config.attack, derive_seed(epoch_seed, i as u64));
                let zero = vec![0.0; x.len()];
                let a = ig_parts(&model, x, y, &zero, config.m_train).0;
                let b = ig_parts(&model, &xa, y, &zero, config.m_train).0;
                let stats = (
                    argmax(&model.logits(x)) == y,
                    argmax(&model.logits(&xa)) == y,
                    cosine_unchecked(&a, &b).value,
                    model.activation_pattern(x).expect("checked"),
                    model.activation_pattern(&xa).expect("checked"),
                );
                ((x.clone(), xa, y), stats)
            });
            let mut batch = Vec::with_capacity(prepared.len());
            for (triple, (n_ok, a_ok, c, pn, pa)) in prepared {
                nat_ok += n_ok as usize;
                adv_ok += a_ok as usize;
                cos_sum += c;
                nat_patterns.push(pn);
                adv_patterns.push(pa);
                batch.push(triple);
            }
            let (loss, grads) = batch_loss_gradient(&spec, &model, &batch)?;
            if !loss.total.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss or gradient in epoch {epoch}")));
            }
            sums.add_scaled(&loss, batch.len() as f64);
            let mut params = flatten_params(&model);
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads.flatten()) {
                *v = config.momentum * *v + g;
                *p -= config.learning_rate * *v;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence(format!("non-finite parameters in epoch {epoch}")));
            }
            set_params(&mut model, &params)?;
        }

        let n = dataset.len() as f64;
        let widths = model.hidden_widths();
        let consistency = if widths.is_empty() {
            1.0
        } else {
            let tn = ActivationTrace::from_patterns(widths.clone(), nat_patterns);
            let ta = ActivationTrace::from_patterns(widths, adv_patterns);
            activation_consistency(&tn, &ta)?.value
        };
        log.records.push(EpochRecord {
            epoch,
            loss: sums.total / n,
            base: sums.base / n,
            regularizer: sums.regularizer / n,
            igr: sums.igr / n,
            natural_accuracy: nat_ok as f64 / n,
            adversarial_accuracy: adv_ok as f64 / n,
            mean_ig_cosine: cos_sum / n,
            activation_consistency: consistency,
        });
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Init, Layer};
    use crate::rng::seeded;

    fn spec(kind: LossKind, use_igr: bool, lambda: f64) -> LossSpec {
        LossSpec { kind, use_igr, lambda, beta: 6.0, m: 10 }
    }

    fn net() -> MlpModel {
        MlpModel::init_with_bias(&[3, 5, 2], Init::He, 0.1, &mut seeded(8)).unwrap()
    }

    #[test]
    fn igr_term_examples() {
        let m = net();
        let x = [0.2, 0.5, 0.9];
        assert_eq!(igr_term(&m, &x, &x, 0, 10).unwrap(), (0.0, false));
        let lin = MlpModel::new(vec![Layer::new(2, 1, vec![1.0, 1.0], vec![0.0]).unwrap()]).unwrap();
        let (v, deg) = igr_term(&lin, &[1.0, 0.0], &[-1.0, 0.0], 0, 3).unwrap();
        assert!(!deg && (v - 2.0).abs() < 1e-15);
        let zb = MlpModel::init(&[3, 6, 2], Init::He, &mut seeded(3)).unwrap();
        let (v, _) = igr_term(&zb, &x, &[0.4, 1.0, 1.8], 1, 10).unwrap();
        assert!(v.abs() < 1e-12);
        let zero = MlpModel::new(vec![Layer::zeros(3, 2)]).unwrap();
        assert_eq!(igr_term(&zero, &x, &x, 0, 5).unwrap(), (0.0, true));
    }

    #[test]
    fn igr_with_zero_lambda_matches_baseline() {
        let m = net();
        let (x, xa) = ([0.2, 0.5, 0.9], [0.25, 0.4, 1.0]);
        for kind in [LossKind::At, LossKind::Trades, LossKind::Mart] {
            let a = compute_loss(&spec(kind, true, 0.0), &m, &x, &xa, 1).unwrap();
            let b = compute_loss(&spec(kind, false, 0.0), &m, &x, &xa, 1).unwrap();
            assert_eq!(a.total, b.total);
        }
    }

    #[test]
    fn trades_at_natural_point_is_ce() {
        let m = net();
        let x = [0.2, 0.5, 0.9];
        let l = compute_loss(&spec(LossKind::Trades, false, 1.0), &m, &x, &x, 0).unwrap();
        let ce = -log_softmax(&m.forward(&x).unwrap())[0];
        assert_eq!(l.regularizer, 0.0);
        assert!((l.total - ce).abs() < 1e-15);
    }

    #[test]
    fn loss_kind_names() {
        assert_eq!("ig_sum_norm".parse::<LossKind>().unwrap(), LossKind::IgSumNorm);
        assert_eq!("AT".parse::<LossKind>().unwrap(), LossKind::At);
        assert!("ssr".parse::<LossKind>().is_err());
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let m = net();
        let ds = Dataset::new(vec![vec![0.1, 0.2, 0.3]], vec![0], 2, (0.0, 1.0)).unwrap();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let (out, log) = train(&cfg, &ds, m.clone()).unwrap();
        assert_eq!(out, m);
        assert!(log.records.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { lambda: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lamda": 1.0}"#).is_err());
    }
}
