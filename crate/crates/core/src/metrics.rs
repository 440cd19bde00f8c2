//! Similarity and rank statistics between attribution vectors.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Norms below this are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TauAlgorithm {
    Naive,
    #[default]
    Fast,
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::arg(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < min {
        return Err(Error::arg(format!("need at least {min} entries, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::arg("non-finite entry"));
    }
    Ok(())
}

/// Kendall's τ with `sign(0) = 0` and the plain `d(d−1)/2` denominator.
pub fn kendall_tau(a: &[f64], b: &[f64], algorithm: TauAlgorithm) -> Result<f64> {
    check_pair(a, b, 2)?;
    let s = match algorithm {
        TauAlgorithm::Naive => tau_numerator_naive(a, b),
        TauAlgorithm::Fast => tau_numerator_fast(a, b),
    };
    Ok(tau_from_numerator(s, a.len()))
}

fn tau_from_numerator(s: i64, d: usize) -> f64 {
    let pairs = (d as i64) * (d as i64 - 1) / 2;
    s as f64 / pairs as f64
}

/// `Σ_{i<j} sign(aᵢ−aⱼ)·sign(bᵢ−bⱼ)` by direct enumeration.
pub fn tau_numerator_naive(a: &[f64], b: &[f64]) -> i64 {
    let mut s = 0i64;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            s += sign(a[i] - a[j]) * sign(b[i] - b[j]);
        }
    }
    s
}

/// Same numerator in `O(d log d)`: sort by `(a, b)`, count `b`-inversions
/// with a merge sort, and correct for tied pairs.
pub fn tau_numerator_fast(a: &[f64], b: &[f64]) -> i64 {
    let n = a.len();
    // +0.0 folds -0.0 into 0.0 so total_cmp agrees with `==`.
    let mut pts: Vec<(f64, f64)> = a.iter().zip(b).map(|(&x, &y)| (x + 0.0, y + 0.0)).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let n0 = (n as i64) * (n as i64 - 1) / 2;
    let mut ties_a = 0i64;
    let mut ties_ab = 0i64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pts[j].0 == pts[i].0 {
            j += 1;
        }
        let t = (j - i) as i64;
        ties_a += t * (t - 1) / 2;
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && pts[l].1 == pts[k].1 {
                l += 1;
            }
            let u = (l - k) as i64;
            ties_ab += u * (u - 1) / 2;
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);

    let mut ties_b = 0i64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as i64;
        ties_b += t * (t - 1) / 2;
        i = j;
    }
    n0 - ties_a - ties_b + ties_ab - 2 * discordant
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            inv += (mid - i) as i64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}

/// Cosine similarity with a flag for the zero-norm case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub degenerate: bool,
}

/// `⟨a,b⟩/(‖a‖‖b‖)`; returns 0 with `degenerate` set when either norm is
/// below [`DEGENERATE_NORM`].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<Cosine> {
    check_pair(a, b, 0)?;
    Ok(cosine_unchecked(a, b))
}

pub(crate) fn cosine_unchecked(a: &[f64], b: &[f64]) -> Cosine {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na < DEGENERATE_NORM || nb < DEGENERATE_NORM {
        return Cosine { value: 0.0, degenerate: true };
    }
    if a == b {
        return Cosine { value: 1.0, degenerate: false };
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Cosine { value: (dot / (na * nb)).clamp(-1.0, 1.0), degenerate: false }
}

/// Pearson correlation; `None` when either centred norm is degenerate.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    check_pair(a, b, 2)?;
    Ok(pearson_unchecked(a, b))
}

pub(crate) fn pearson_unchecked(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let ca: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let cb: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let c = cosine_unchecked(&ca, &cb);
    (!c.degenerate).then_some(c.value)
}

/// Indices of the `k` largest entries; ties at equal value go to the
/// lower index. With `absolute`, entries are ranked by magnitude.
pub fn top_k_indices(v: &[f64], k: usize, absolute: bool) -> Vec<usize> {
    let key = |i: usize| if absolute { v[i].abs() } else { v[i] };
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| key(j).total_cmp(&key(i)).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

/// `|TopK(a) ∩ TopK(b)| / k`.
pub fn topk_intersection(a: &[f64], b: &[f64], k: usize, absolute: bool) -> Result<f64> {
    check_pair(a, b, 1)?;
    if k == 0 || k > a.len() {
        return Err(Error::arg(format!("k = {k} outside 1..={}", a.len())));
    }
    let ta = top_k_indices(a, k, absolute);
    let mut in_a = vec![false; a.len()];
    for i in ta {
        in_a[i] = true;
    }
    let hits = top_k_indices(b, k, absolute).into_iter().filter(|&i| in_a[i]).count();
    Ok(hits as f64 / k as f64)
}

/// All four metrics between two attributions.
///
/// In absolute mode every metric is computed on `|a|` and `|b|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tau: f64,
    pub cosine: f64,
    pub cosine_degenerate: bool,
    pub pearson: Option<f64>,
    pub topk: f64,
    pub k: usize,
    pub absolute_mode: bool,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "tau,cosine,pearson,topk";

    pub fn compute(a: &[f64], b: &[f64], k: usize, absolute_mode: bool) -> Result<Self> {
        check_pair(a, b, 2)?;
        if k == 0 || k > a.len() {
            return Err(Error::arg(format!("k = {k} outside 1..={}", a.len())));
        }
        let (a, b): (Vec<f64>, Vec<f64>) = if absolute_mode {
            (a.iter().map(|v| v.abs()).collect(), b.iter().map(|v| v.abs()).collect())
        } else {
            (a.to_vec(), b.to_vec())
        };
        let c = cosine_unchecked(&a, &b);
        Ok(Self {
            tau: tau_from_numerator(tau_numerator_fast(&a, &b), a.len()),
            cosine: c.value,
            cosine_degenerate: c.degenerate,
            pearson: pearson_unchecked(&a, &b),
            topk: topk_intersection(&a, &b, k, false)?,
            k,
            absolute_mode,
        })
    }

    /// Report for identical attributions, used where no attack was run.
    pub fn identical(k: usize, absolute_mode: bool) -> Self {
        Self { tau: 1.0, cosine: 1.0, cosine_degenerate: false, pearson: Some(1.0), topk: 1.0, k, absolute_mode }
    }

    /// `tau,cosine,pearson,topk`; an undefined Pearson value is an empty cell.
    pub fn csv_row(&self) -> String {
        let p = self.pearson.map(|v| v.to_string()).unwrap_or_default();
        format!("{},{},{},{}", self.tau, self.cosine, p, self.topk)
    }

    /// Field-wise mean. Pearson averages over defined entries only.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        let first = reports.first()?;
        let n = reports.len() as f64;
        let defined: Vec<f64> = reports.iter().filter_map(|r| r.pearson).collect();
        Some(MetricReport {
            tau: reports.iter().map(|r| r.tau).sum::<f64>() / n,
            cosine: reports.iter().map(|r| r.cosine).sum::<f64>() / n,
            cosine_degenerate: reports.iter().any(|r| r.cosine_degenerate),
            pearson: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            topk: reports.iter().map(|r| r.topk).sum::<f64>() / n,
            k: first.k,
            absolute_mode: first.absolute_mode,
        })
    }
}

/// Pearson association between two columns, used for scatter summaries.
pub fn association(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    check_len(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Ok(None);
    }
    pearson_correlation(xs, ys)
}
