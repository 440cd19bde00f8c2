//! Monte Carlo checks of the link between cosine similarity and Kendall's τ
//! for positive vectors, a search for cosine-monotone transformation
//! sequences, and a Pearson instability construction.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{association, cosine_unchecked, pearson_unchecked, tau_numerator_fast};
use crate::par;
use crate::rng::{derive_seed, derived, Rng};

/// Cosine changes smaller than this are treated as ties.
pub const COS_TOL: f64 = 1e-12;

fn cos(a: &[f64], b: &[f64]) -> f64 {
    cosine_unchecked(a, b).value
}

fn tau(a: &[f64], b: &[f64]) -> f64 {
    let d = a.len() as f64;
    2.0 * tau_numerator_fast(a, b) as f64 / (d * (d - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSample {
    pub cosine: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub dim: usize,
    pub seed: u64,
    pub samples: Vec<SimulationSample>,
    /// Pearson association between the cosine and τ columns.
    pub association: Option<f64>,
}

/// Cosine and τ between a fixed uniform(0,1) reference and `n_samples`
/// further uniform(0,1) vectors.
pub fn simulate_tau_cos(dim: usize, n_samples: usize, seed: u64) -> Result<Simulation> {
    if dim < 2 {
        return Err(Error::arg("dim must be at least 2"));
    }
    let mut r = derived(seed, 0);
    let u: Vec<f64> = (0..dim).map(|_| r.random::<f64>()).collect();
    let samples = par::map_range(n_samples, |i| {
        let mut r = derived(seed, i as u64 + 1);
        let v: Vec<f64> = (0..dim).map(|_| r.random::<f64>()).collect();
        SimulationSample { cosine: cos(&u, &v), tau: tau(&u, &v) }
    });
    let c: Vec<f64> = samples.iter().map(|s| s.cosine).collect();
    let t: Vec<f64> = samples.iter().map(|s| s.tau).collect();
    Ok(Simulation { dim, seed, association: association(&c, &t)?, samples })
}

/// One operation on a nonnegative vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SequenceStep {
    Exchange { i: usize, j: usize },
    Scale { i: usize, alpha: f64 },
}

pub fn apply_step(x: &[f64], step: SequenceStep) -> Result<Vec<f64>> {
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Precondition("entries must be finite and nonnegative".into()));
    }
    let mut out = x.to_vec();
    match step {
        SequenceStep::Exchange { i, j } => {
            if i >= x.len() || j >= x.len() {
                return Err(Error::arg(format!("index out of range for dimension {}", x.len())));
            }
            out.swap(i, j);
        }
        SequenceStep::Scale { i, alpha } => {
            if i >= x.len() {
                return Err(Error::arg(format!("index {i} out of range for dimension {}", x.len())));
            }
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::arg(format!("alpha {alpha} outside (0, 1]")));
            }
            out[i] *= alpha;
        }
    }
    Ok(out)
}

/// Shrink factors tried at every search node, besides exact-target shrinks.
pub const ALPHA_GRID: [f64; 5] = [0.9, 0.7, 0.5, 0.3, 0.1];

/// Default expansion budget for a dimension.
pub fn default_budget(dim: usize) -> usize {
    10 * dim * dim
}

/// Node limit for the exact-shrink completion check.
const FINISH_NODES: usize = 20_000;

/// Replays `steps` on `x`, returning every intermediate vector.
pub fn replay(x: &[f64], steps: &[SequenceStep]) -> Result<Vec<Vec<f64>>> {
    let mut path = vec![x.to_vec()];
    for s in steps {
        let next = apply_step(path.last().unwrap(), *s)?;
        path.push(next);
    }
    Ok(path)
}

/// Whether `a` is a positive multiple of `b` to within `tol` relative to
/// the largest entry.
pub fn proportional(a: &[f64], b: &[f64], tol: f64) -> bool {
    let ma = a.iter().cloned().fold(0.0, f64::max);
    let mb = b.iter().cloned().fold(0.0, f64::max);
    if ma <= 0.0 || mb <= 0.0 {
        return ma <= 0.0 && mb <= 0.0;
    }
    a.iter().zip(b).all(|(x, y)| (x / ma - y / mb).abs() <= tol)
}

/// Steps of single-entry shrinks turning `s` into a multiple of `target`
/// without raising the cosine with `y`, found by depth-first search over
/// the shrink order.
fn finish(s: &[f64], target: &[f64], y: &[f64], nodes: &mut usize) -> Option<Vec<SequenceStep>> {
    let d = s.len();
    let mut ratio = vec![0.0; d];
    for i in 0..d {
        match (s[i] > 0.0, target[i] > 0.0) {
            (true, _) => ratio[i] = target[i] / s[i],
            (false, false) => ratio[i] = f64::NAN,
            (false, true) => return None,
        }
    }
    let c = ratio.iter().filter(|v| !v.is_nan()).cloned().fold(0.0, f64::max);
    if c <= 0.0 {
        return None;
    }
    if ratio.contains(&0.0) {
        return None;
    }
    let todo: Vec<(usize, f64)> = (0..d)
        .filter(|&i| !ratio[i].is_nan() && ratio[i] < c * (1.0 - 1e-13))
        .map(|i| (i, ratio[i] / c))
        .collect();

    fn rec(
        cur: &mut [f64],
        todo: &[(usize, f64)],
        used: &mut [bool],
        y: &[f64],
        steps: &mut Vec<SequenceStep>,
        nodes: &mut usize,
    ) -> bool {
        if steps.len() == todo.len() {
            return true;
        }
        let c0 = cos(cur, y);
        for k in 0..todo.len() {
            if used[k] {
                continue;
            }
            *nodes += 1;
            if *nodes > FINISH_NODES {
                return false;
            }
            let (i, a) = todo[k];
            let old = cur[i];
            cur[i] = old * a;
            if cos(cur, y) <= c0 + COS_TOL {
                used[k] = true;
                steps.push(SequenceStep::Scale { i, alpha: a });
                if rec(cur, todo, used, y, steps, nodes) {
                    return true;
                }
                steps.pop();
                used[k] = false;
            }
            cur[i] = old;
        }
        false
    }

    let mut cur = s.to_vec();
    let mut used = vec![false; todo.len()];
    let mut steps = Vec::new();
    rec(&mut cur, &todo, &mut used, y, &mut steps, nodes).then_some(steps)
}

/// Spread of log-ratios to the target: zero iff proportional.
fn log_spread(s: &[f64], target: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in s.iter().zip(target) {
        if *a > 0.0 && *b > 0.0 {
            let l = (b / a).ln();
            lo = lo.min(l);
            hi = hi.max(l);
        } else if (*a > 0.0) != (*b > 0.0) {
            return f64::INFINITY;
        }
    }
    if hi < lo {
        0.0
    } else {
        hi - lo
    }
}

fn state_key(v: &[f64]) -> Vec<i64> {
    let m = v.iter().cloned().fold(0.0, f64::max);
    v.iter()
        .map(|x| if *x > 0.0 { ((x / m).ln() * 1e6).round() as i64 } else { i64::MIN })
        .collect()
}

struct Node {
    priority: f64,
    tie: u64,
    id: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority).then(other.tie.cmp(&self.tie))
    }
}

/// Parent state and the step taken from it.
type Link = Option<(usize, SequenceStep)>;

/// Search for exchanges and single-entry shrinks carrying `x` to a positive
/// multiple of `xp` with `cos(·, y)` non-increasing at every step.
///
/// Best-first over states ordered by log-ratio spread to `xp`. Each popped
/// state first tries to finish with exact shrinks in some admissible
/// order; otherwise it is expanded with admissible exchanges, shrinks from
/// [`ALPHA_GRID`], and exact-target shrinks. States whose cosine already
/// dropped below `cos(xp, y)` are pruned. `budget` caps expansions; the
/// seed only breaks priority ties.
pub fn find_monotone_sequence(
    x: &[f64],
    xp: &[f64],
    y: &[f64],
    budget: usize,
    seed: u64,
) -> Result<Option<Vec<SequenceStep>>> {
    let d = x.len();
    if xp.len() != d || y.len() != d {
        return Err(Error::Shape { expected: d, got: if xp.len() != d { xp.len() } else { y.len() } });
    }
    if x.iter().chain(xp).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Precondition("x and xp must be finite and nonnegative".into()));
    }
    if y.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Precondition("y must be finite and positive".into()));
    }
    if proportional(x, xp, 1e-12) {
        return Ok(Some(Vec::new()));
    }
    let floor = cos(xp, y) - COS_TOL;
    if cos(x, y) < floor {
        return Ok(None);
    }

    let mut rng = derived(seed, 0x5e9);
    let mut states: Vec<(Vec<f64>, Link)> = vec![(x.to_vec(), None)];
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    seen.insert(state_key(x));
    heap.push(Node { priority: 0.0, tie: 0, id: 0 });
    let mut expansions = 0;

    while let Some(Node { id, .. }) = heap.pop() {
        if expansions >= budget {
            break;
        }
        expansions += 1;
        let v = states[id].0.clone();
        let mut nodes = 0;
        if let Some(tail) = finish(&v, xp, y, &mut nodes) {
            let mut steps = Vec::new();
            let mut cur = id;
            while let Some((parent, step)) = states[cur].1 {
                steps.push(step);
                cur = parent;
            }
            steps.reverse();
            steps.extend(tail);
            return Ok(Some(steps));
        }
        let c0 = cos(&v, y);
        let mut moves = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if v[i] != v[j] {
                    moves.push(SequenceStep::Exchange { i, j });
                }
            }
        }
        let ratio: Vec<f64> = (0..d).map(|i| if v[i] > 0.0 { xp[i] / v[i] } else { 0.0 }).collect();
        let cmax = ratio.iter().cloned().fold(0.0, f64::max);
        for i in (0..d).filter(|&i| v[i] > 0.0) {
            for &alpha in &ALPHA_GRID {
                moves.push(SequenceStep::Scale { i, alpha });
            }
            if cmax > 0.0 && ratio[i] > 0.0 && ratio[i] < cmax {
                moves.push(SequenceStep::Scale { i, alpha: ratio[i] / cmax });
            }
        }
        moves.shuffle(&mut rng);
        for step in moves {
            let mut w = apply_step(&v, step)?;
            let cw = cos(&w, y);
            if cw > c0 + COS_TOL || cw < floor {
                continue;
            }
            // keep magnitudes away from underflow; cosine ignores scale
            let m = w.iter().cloned().fold(0.0, f64::max);
            if m > 0.0 && !(1e-3..=1e3).contains(&m) {
                w.iter_mut().for_each(|t| *t /= m);
            }
            if !seen.insert(state_key(&w)) {
                continue;
            }
            let priority = -log_spread(&w, xp);
            let nid = states.len();
            states.push((w, Some((id, step))));
            heap.push(Node { priority, tie: rng.random(), id: nid });
        }
    }
    Ok(None)
}

/// A random search instance: `X`, `X′` uniform on (0,1)ᵈ and `Y` from
/// Exp(1), with `X` and `X′` ordered so that `cos(X, Y) ≥ cos(X′, Y)`.
pub fn random_triple(d: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = derived(seed, 0x7719);
    let e = Exp::new(1.0).expect("unit rate");
    let y: Vec<f64> = (0..d).map(|_| 1e-300f64.max(e.sample(&mut r))).collect();
    let mut x: Vec<f64> = (0..d).map(|_| r.random::<f64>()).collect();
    let mut xp: Vec<f64> = (0..d).map(|_| r.random::<f64>()).collect();
    if cos(&x, &y) < cos(&xp, &y) {
        std::mem::swap(&mut x, &mut xp);
    }
    (x, xp, y)
}

/// Outcome of [`sequence_success_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSearchStats {
    pub triples: usize,
    pub successes: usize,
    /// `(d, successes, triples)` for every dimension that occurred.
    pub per_dim: Vec<(usize, usize, usize)>,
    /// Every returned sequence replayed as cosine-monotone and ending
    /// proportional to `X′`.
    pub all_verified: bool,
}

impl SequenceSearchStats {
    pub fn rate(&self) -> f64 {
        if self.triples == 0 {
            0.0
        } else {
            self.successes as f64 / self.triples as f64
        }
    }
}

/// Checks that `steps` carries `x` to a multiple of `xp` without ever
/// raising `cos(·, y)` by more than [`COS_TOL`].
pub fn verify_sequence(x: &[f64], xp: &[f64], y: &[f64], steps: &[SequenceStep]) -> Result<bool> {
    let path = replay(x, steps)?;
    let monotone = path.windows(2).all(|w| cos(&w[1], y) <= cos(&w[0], y) + COS_TOL);
    let end = path.last().expect("replay keeps the start");
    Ok(monotone && proportional(end, xp, 1e-6))
}

/// Runs [`find_monotone_sequence`] on `triples` instances with `d` drawn
/// uniformly from `2..=max_dim`. `budget` defaults to [`default_budget`].
pub fn sequence_success_rate(triples: usize, max_dim: usize, budget: Option<usize>, seed: u64) -> Result<SequenceSearchStats> {
    if max_dim < 2 {
        return Err(Error::arg("max_dim must be at least 2"));
    }
    let outcomes = par::map_range(triples, |t| -> Result<(usize, bool, bool)> {
        let s = derive_seed(seed, t as u64);
        let d = derived(s, 1).random_range(2..=max_dim);
        let (x, xp, y) = random_triple(d, s);
        let b = budget.unwrap_or_else(|| default_budget(d));
        Ok(match find_monotone_sequence(&x, &xp, &y, b, s)? {
            Some(steps) => (d, true, verify_sequence(&x, &xp, &y, &steps)?),
            None => (d, false, true),
        })
    });
    let mut per = vec![(0, 0); max_dim + 1];
    let mut all_verified = true;
    for o in outcomes {
        let (d, ok, verified) = o?;
        per[d].1 += 1;
        per[d].0 += ok as usize;
        all_verified &= verified;
    }
    Ok(SequenceSearchStats {
        triples,
        successes: per.iter().map(|p| p.0).sum(),
        per_dim: per.iter().enumerate().filter(|(_, p)| p.1 > 0).map(|(d, p)| (d, p.0, p.1)).collect(),
        all_verified,
    })
}

/// Positive sampling distribution for the reference vector `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PositiveDist {
    Exponential { rate: f64 },
    Uniform,
    LogNormal { sigma: f64 },
}

impl Default for PositiveDist {
    fn default() -> Self {
        PositiveDist::Exponential { rate: 1.0 }
    }
}

impl PositiveDist {
    fn sample(&self, r: &mut Rng, d: usize) -> Result<Vec<f64>> {
        Ok(match *self {
            PositiveDist::Exponential { rate } => {
                let e = Exp::new(rate).map_err(|e| Error::arg(e.to_string()))?;
                (0..d).map(|_| e.sample(r)).collect()
            }
            // shifted away from 0 so every entry is strictly positive
            PositiveDist::Uniform => (0..d).map(|_| 1.0 - r.random::<f64>()).collect(),
            PositiveDist::LogNormal { sigma } => {
                let e = LogNormal::new(0.0, sigma).map_err(|e| Error::arg(e.to_string()))?;
                (0..d).map(|_| e.sample(r)).collect()
            }
        })
    }
}

/// Operation producing `X′` from `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    /// Exchange two distinct random entries.
    Exchange,
    /// Multiply a random entry by α drawn from (0, 1].
    Scale,
    /// Multiply a random entry by the given α.
    ScaleBy(f64),
}

/// Result of [`conditional_tau_ordering`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingStat {
    pub dim: usize,
    pub trials: usize,
    /// Trials where `cos(X, Y) ≥ cos(X′, Y)`.
    pub accepted: usize,
    /// Mean of `τ(X, Y) − τ(X′, Y)` over accepted trials.
    pub mean_diff: f64,
    pub std_err: f64,
    /// Set when fewer than 100 trials were requested.
    pub low_power: bool,
}

impl OrderingStat {
    /// `mean_diff / std_err`, or `None` when the standard error is zero.
    pub fn z_score(&self) -> Option<f64> {
        (self.std_err > 0.0).then(|| self.mean_diff / self.std_err)
    }
}

pub fn conditional_tau_ordering(dim: usize, trials: usize, op: OpKind, seed: u64) -> Result<OrderingStat> {
    conditional_tau_ordering_with(dim, trials, op, PositiveDist::default(), seed)
}

/// Per trial: fresh `X` uniform on (0,1)ᵈ, `X′` from one `op`, and `Y` from
/// `y_dist`. Trials with `cos(X, Y) < cos(X′, Y)` are discarded.
pub fn conditional_tau_ordering_with(
    dim: usize,
    trials: usize,
    op: OpKind,
    y_dist: PositiveDist,
    seed: u64,
) -> Result<OrderingStat> {
    if dim < 2 {
        return Err(Error::arg("dim must be at least 2"));
    }
    if let OpKind::ScaleBy(a) = op {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::arg(format!("alpha {a} outside (0, 1]")));
        }
    }
    y_dist.sample(&mut derived(seed, 0), 1)?;
    let diffs: Vec<Option<f64>> = par::map_range(trials, |t| {
        let mut r = derived(seed, t as u64 + 1);
        let x: Vec<f64> = (0..dim).map(|_| 1.0 - r.random::<f64>()).collect();
        let step = match op {
            OpKind::Exchange => {
                let i = r.random_range(0..dim);
                let mut j = r.random_range(0..dim - 1);
                if j >= i {
                    j += 1;
                }
                SequenceStep::Exchange { i, j }
            }
            OpKind::Scale => SequenceStep::Scale { i: r.random_range(0..dim), alpha: 1.0 - r.random::<f64>() },
            OpKind::ScaleBy(alpha) => SequenceStep::Scale { i: r.random_range(0..dim), alpha },
        };
        let xp = apply_step(&x, step).expect("valid step");
        let y = y_dist.sample(&mut r, dim).expect("validated distribution");
        (cos(&x, &y) >= cos(&xp, &y)).then(|| tau(&x, &y) - tau(&xp, &y))
    });
    let acc: Vec<f64> = diffs.into_iter().flatten().collect();
    let n = acc.len();
    let mean = if n > 0 { acc.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let std_err = if n > 1 {
        let var = acc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(OrderingStat { dim, trials, accepted: n, mean_diff: mean, std_err, low_power: trials < 100 })
}

/// Pearson correlations `ρ(x, x+η)` and `ρ(x, x−η)`. A zero `η` is
/// rejected since both sides then collapse to `ρ(x, x)`.
pub fn pearson_pair(x: &[f64], eta: &[f64]) -> Result<(Option<f64>, Option<f64>)> {
    crate::error::check_len(x.len(), eta.len())?;
    if x.len() < 3 {
        return Err(Error::arg("dimension must be at least 3"));
    }
    if eta.iter().all(|v| *v == 0.0) {
        return Err(Error::arg("eta must be nonzero"));
    }
    let plus: Vec<f64> = x.iter().zip(eta).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = x.iter().zip(eta).map(|(a, b)| a - b).collect();
    Ok((pearson_unchecked(x, &plus), pearson_unchecked(x, &minus)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonDemo {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub attempts: usize,
}

/// Attempts made by [`pearson_instability_demo`] before giving up.
pub const PEARSON_DEMO_BUDGET: usize = 1000;

/// Builds a near-constant `x` and a small `η` for which `ρ(x, x+η) > 0.9`
/// while `ρ(x, x−η) < −0.9`.
///
/// `x = μ(1 + s)` with a tiny random deviation `s`; `η` is `c·μs` for a
/// random `c ∈ (1.2, 3)` plus independent noise. The centred parts of
/// `x ± η` are then `(1 ± c)μs` plus noise, which point in opposite
/// directions.
pub fn pearson_instability_demo(dim: usize, seed: u64) -> Result<Option<PearsonDemo>> {
    if dim < 3 {
        return Err(Error::arg("dimension must be at least 3"));
    }
    let mut r = derived(seed, 0);
    for attempt in 1..=PEARSON_DEMO_BUDGET {
        let mu = 0.5 + r.random::<f64>();
        let s: Vec<f64> = (0..dim).map(|_| 1e-4 * r.sample::<f64, _>(StandardNormal)).collect();
        let x: Vec<f64> = s.iter().map(|v| mu * (1.0 + v)).collect();
        let mean = x.iter().sum::<f64>() / dim as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dim as f64;
        if var > 1e-6 * mean * mean {
            continue;
        }
        let c = 1.2 + 1.8 * r.random::<f64>();
        let noise = 0.3 * 1e-4 * mu;
        let eta: Vec<f64> = s.iter().map(|v| c * mu * v + noise * r.sample::<f64, _>(StandardNormal)).collect();
        if let (Some(p), Some(m)) = pearson_pair(&x, &eta)? {
            if p > 0.9 && m < -0.9 {
                return Ok(Some(PearsonDemo { x, eta, rho_plus: p, rho_minus: m, attempts: attempt }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_apply() {
        assert_eq!(apply_step(&[1., 2., 3.], SequenceStep::Exchange { i: 0, j: 1 }).unwrap(), vec![2., 1., 3.]);
        assert_eq!(apply_step(&[1., 2., 3.], SequenceStep::Scale { i: 0, alpha: 1.0 }).unwrap(), vec![1., 2., 3.]);
        assert_eq!(apply_step(&[1., 2., 4.], SequenceStep::Scale { i: 2, alpha: 0.5 }).unwrap(), vec![1., 2., 2.]);
        assert!(apply_step(&[1., 2.], SequenceStep::Scale { i: 0, alpha: 0.0 }).is_err());
        assert!(apply_step(&[1., 2.], SequenceStep::Scale { i: 0, alpha: 1.5 }).is_err());
        assert!(apply_step(&[1., 2.], SequenceStep::Exchange { i: 0, j: 2 }).is_err());
        assert!(apply_step(&[-1., 2.], SequenceStep::Exchange { i: 0, j: 1 }).is_err());
    }

    #[test]
    fn empty_simulation() {
        let s = simulate_tau_cos(5, 0, 1).unwrap();
        assert!(s.samples.is_empty());
        assert_eq!(s.association, None);
        assert!(simulate_tau_cos(1, 10, 1).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        assert_eq!(simulate_tau_cos(50, 20, 9).unwrap(), simulate_tau_cos(50, 20, 9).unwrap());
    }

    #[test]
    fn identical_target_gives_empty_sequence() {
        let x = [0.3, 0.2, 0.9];
        assert_eq!(find_monotone_sequence(&x, &x, &[1., 2., 3.], 10, 0).unwrap(), Some(vec![]));
        let scaled = [0.6, 0.4, 1.8];
        assert_eq!(find_monotone_sequence(&x, &scaled, &[1., 2., 3.], 10, 0).unwrap(), Some(vec![]));
    }

    #[test]
    fn single_halving_is_found() {
        let x = [1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0];
        let xp = [1.0, 1.0, 0.5];
        assert!(cos(&xp, &y) < cos(&x, &y));
        let s = find_monotone_sequence(&x, &xp, &y, 10, 0).unwrap().unwrap();
        assert_eq!(s, vec![SequenceStep::Scale { i: 2, alpha: 0.5 }]);
    }

    #[test]
    fn unreachable_when_cosine_would_rise() {
        let y = [1.0, 2.0, 3.0];
        let x = [1.0, 1.0, 0.5];
        let xp = [1.0, 1.0, 1.0];
        assert_eq!(find_monotone_sequence(&x, &xp, &y, 100, 0).unwrap(), None);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(find_monotone_sequence(&[1., 2.], &[1.], &[1., 1.], 5, 0).is_err());
    }

    #[test]
    fn scale_by_one_gives_zero_difference() {
        let s = conditional_tau_ordering(4, 200, OpKind::ScaleBy(1.0), 3).unwrap();
        assert_eq!(s.accepted, 200);
        assert_eq!(s.mean_diff, 0.0);
        assert!(conditional_tau_ordering(4, 50, OpKind::Exchange, 3).unwrap().low_power);
    }

    #[test]
    fn zero_eta_rejected() {
        assert!(pearson_pair(&[1., 1., 1.], &[0., 0., 0.]).is_err());
    }
}
