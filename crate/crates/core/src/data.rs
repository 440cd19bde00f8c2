//! Datasets: synthetic two-class generators, random linear lifting, and
//! an IDX (MNIST-format) reader.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derived;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub value_range: (f64, f64),
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, class_count: usize, value_range: (f64, f64)) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape { expected: inputs.len(), got: labels.len() });
        }
        if let Some(l) = labels.iter().find(|l| **l >= class_count) {
            return Err(Error::arg(format!("label {l} not below class count {class_count}")));
        }
        if let Some(first) = inputs.first() {
            let d = first.len();
            for x in &inputs {
                if x.len() != d {
                    return Err(Error::Shape { expected: d, got: x.len() });
                }
                if x.iter().any(|v| !(*v >= value_range.0 && *v <= value_range.1)) {
                    return Err(Error::arg("input outside the value range"));
                }
            }
        }
        Ok(Self { inputs, labels, class_count, value_range })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.len())
    }

    /// Samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            value_range: self.value_range,
        }
    }

    /// First `n` samples (or all).
    pub fn take(&self, n: usize) -> Dataset {
        self.select(&(0..n.min(self.len())).collect::<Vec<_>>())
    }

    /// Deterministic split into a training part of `frac` and the rest.
    pub fn split(&self, frac: f64, seed: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut derived(seed, 0x5917));
        let cut = ((self.len() as f64) * frac).round() as usize;
        (self.select(&idx[..cut]), self.select(&idx[cut..]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Blobs,
    Moons,
}

/// Two-class 2-D data, min-max normalised per feature into `[0, 1]`.
///
/// Blobs: Gaussians around (0.3, 0.3) and (0.7, 0.7) with standard
/// deviation `noise`. Moons: two interleaved half circles with Gaussian
/// jitter `noise`. Classes alternate before a seeded shuffle.
pub fn generate_synthetic(kind: SyntheticKind, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::arg("n must be at least 2"));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::arg("noise must be finite and nonnegative"));
    }
    let mut r = derived(seed, 0);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let (a, b) = match kind {
            SyntheticKind::Blobs => {
                let m = if c == 0 { 0.3 } else { 0.7 };
                (m, m)
            }
            SyntheticKind::Moons => {
                let t = std::f64::consts::PI * r.random::<f64>();
                if c == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                }
            }
        };
        let ja: f64 = r.sample(StandardNormal);
        let jb: f64 = r.sample(StandardNormal);
        inputs.push(vec![a + noise * ja, b + noise * jb]);
        labels.push(c);
    }
    minmax(&mut inputs);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let ds = Dataset { inputs, labels, class_count: 2, value_range: (0.0, 1.0) };
    Ok(ds.select(&order))
}

/// Per-feature min-max scaling into `[0, 1]`; constant features map to 0.5.
pub fn minmax(inputs: &mut [Vec<f64>]) {
    let Some(d) = inputs.first().map(|x| x.len()) else { return };
    for j in 0..d {
        let lo = inputs.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min);
        let hi = inputs.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max);
        for x in inputs.iter_mut() {
            x[j] = if hi > lo { ((x[j] - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        }
    }
}

/// Map every input through a random Gaussian linear map to `dim`
/// features, then min-max scale into `[0, 1]`.
pub fn lift(ds: &Dataset, dim: usize, seed: u64) -> Result<Dataset> {
    if dim == 0 {
        return Err(Error::arg("lift dimension must be positive"));
    }
    let d = ds.dim();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut r = derived(seed, 0x11f7);
    let proj: Vec<f64> = (0..dim * d).map(|_| normal.sample(&mut r)).collect();
    let mut inputs: Vec<Vec<f64>> = ds
        .inputs
        .iter()
        .map(|x| (0..dim).map(|o| (0..d).map(|i| proj[o * d + i] * x[i]).sum()).collect())
        .collect();
    minmax(&mut inputs);
    Dataset::new(inputs, ds.labels.clone(), ds.class_count, (0.0, 1.0))
}

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse { path: path.into(), offset: offset as u64, reason: "unexpected end of file".into() })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses an IDX image file and label file; pixels are scaled by 1/255.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, limit: usize) -> Result<Dataset> {
    let ip = images_path.as_ref();
    let lp = labels_path.as_ref();
    let img = read_file(ip)?;
    let lab = read_file(lp)?;

    let magic = read_u32(&img, 0, ip)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Parse { path: ip.into(), offset: 0, reason: format!("bad magic {magic:#010x}") });
    }
    let n = read_u32(&img, 4, ip)? as usize;
    let rows = read_u32(&img, 8, ip)? as usize;
    let cols = read_u32(&img, 12, ip)? as usize;

    let magic = read_u32(&lab, 0, lp)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Parse { path: lp.into(), offset: 0, reason: format!("bad magic {magic:#010x}") });
    }
    let nl = read_u32(&lab, 4, lp)? as usize;
    if nl != n {
        return Err(Error::Parse { path: lp.into(), offset: 4, reason: format!("{nl} labels for {n} images") });
    }

    let d = rows * cols;
    let need = 16 + n * d;
    if img.len() < need {
        return Err(Error::Parse { path: ip.into(), offset: img.len() as u64, reason: format!("truncated: need {need} bytes") });
    }
    if lab.len() < 8 + n {
        return Err(Error::Parse { path: lp.into(), offset: lab.len() as u64, reason: format!("truncated: need {} bytes", 8 + n) });
    }
    let take = n.min(limit);
    let inputs: Vec<Vec<f64>> = (0..take)
        .map(|i| img[16 + i * d..16 + (i + 1) * d].iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    let labels: Vec<usize> = lab[8..8 + take].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().max().map_or(10, |m| (*m + 1).max(10));
    Dataset::new(inputs, labels, class_count, (0.0, 1.0))
}

/// Raw pixel bytes of image `index` in an IDX image file.
pub fn idx_image_bytes(images_path: impl AsRef<Path>, index: usize) -> Result<Vec<u8>> {
    let ip = images_path.as_ref();
    let img = read_file(ip)?;
    let magic = read_u32(&img, 0, ip)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Parse { path: ip.into(), offset: 0, reason: format!("bad magic {magic:#010x}") });
    }
    let d = (read_u32(&img, 8, ip)? * read_u32(&img, 12, ip)?) as usize;
    let start = 16 + index * d;
    img.get(start..start + d)
        .map(<[u8]>::to_vec)
        .ok_or_else(|| Error::Parse { path: ip.into(), offset: start as u64, reason: "image index past end".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_rejects_tiny_n() {
        assert!(generate_synthetic(SyntheticKind::Blobs, 0, 0.1, 0).is_err());
        assert!(generate_synthetic(SyntheticKind::Moons, 1, 0.1, 0).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(SyntheticKind::Moons, 50, 0.1, 3).unwrap();
        assert_eq!(a, generate_synthetic(SyntheticKind::Moons, 50, 0.1, 3).unwrap());
        assert_ne!(a, generate_synthetic(SyntheticKind::Moons, 50, 0.1, 4).unwrap());
    }

    #[test]
    fn noiseless_blobs_are_two_points() {
        let ds = generate_synthetic(SyntheticKind::Blobs, 10, 0.0, 1).unwrap();
        for (x, y) in ds.inputs.iter().zip(&ds.labels) {
            let expect = if *y == 0 { vec![0.0, 0.0] } else { vec![1.0, 1.0] };
            assert_eq!(*x, expect);
        }
    }

    #[test]
    fn lift_shapes_and_range() {
        let ds = generate_synthetic(SyntheticKind::Moons, 40, 0.1, 1).unwrap();
        let l = lift(&ds, 20, 2).unwrap();
        assert_eq!(l.dim(), 20);
        assert_eq!(l.labels, ds.labels);
        assert!(l.inputs.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![vec![0.5]], vec![2], 2, (0.0, 1.0)).is_err());
        assert!(Dataset::new(vec![vec![1.5]], vec![0], 2, (0.0, 1.0)).is_err());
        assert!(Dataset::new(vec![vec![0.5], vec![0.1, 0.2]], vec![0, 1], 2, (0.0, 1.0)).is_err());
    }
}
