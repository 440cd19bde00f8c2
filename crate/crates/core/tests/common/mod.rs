//! Independent oracles shared by the integration tests.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use attrirob::grad::{flatten_params, set_params};
use attrirob::mlp::{Init, MlpModel};
use attrirob::rng::{seeded, Rng};
use rand::Rng as _;

/// Plain forward pass written from scratch: ReLU on hidden layers.
pub fn forward(model: &MlpModel, x: &[f64]) -> Vec<f64> {
    let n = model.layers().len();
    let mut a = x.to_vec();
    for (l, layer) in model.layers().iter().enumerate() {
        let mut z = Vec::with_capacity(layer.out_dim());
        for o in 0..layer.out_dim() {
            let mut s = layer.bias()[o];
            for i in 0..layer.in_dim() {
                s += layer.weights()[o * layer.in_dim() + i] * a[i];
            }
            z.push(if l + 1 < n { s.max(0.0) } else { s });
        }
        a = z;
    }
    a
}

/// Smallest |pre-activation| over all hidden units at `x`.
pub fn margin(model: &MlpModel, x: &[f64]) -> f64 {
    let n = model.layers().len();
    let mut a = x.to_vec();
    let mut best = f64::INFINITY;
    for (l, layer) in model.layers().iter().enumerate() {
        let mut z = Vec::with_capacity(layer.out_dim());
        for o in 0..layer.out_dim() {
            let mut s = layer.bias()[o];
            for i in 0..layer.in_dim() {
                s += layer.weights()[o * layer.in_dim() + i] * a[i];
            }
            if l + 1 < n {
                best = best.min(s.abs());
                z.push(s.max(0.0));
            } else {
                z.push(s);
            }
        }
        a = z;
    }
    best
}

/// Margin over the right-endpoint IG path from the zero baseline.
pub fn path_margin(model: &MlpModel, x: &[f64], m: usize) -> f64 {
    (1..=m)
        .map(|k| {
            let p: Vec<f64> = x.iter().map(|v| v * k as f64 / m as f64).collect();
            margin(model, &p)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn fd_input_gradient(model: &MlpModel, x: &[f64], class: usize, h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (forward(model, &a)[class] - forward(model, &b)[class]) / (2.0 * h)
        })
        .collect()
}

/// Central differences of `loss` over every parameter, in flatten order.
pub fn fd_param_gradient(model: &MlpModel, h: f64, loss: impl Fn(&MlpModel) -> f64) -> Vec<f64> {
    let base = flatten_params(model);
    let mut m = model.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            set_params(&mut m, &p).unwrap();
            let up = loss(&m);
            p[i] = base[i] - h;
            set_params(&mut m, &p).unwrap();
            let down = loss(&m);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, or the absolute error when both are tiny.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = n(a).max(n(b));
    if scale < 1e-12 {
        n(&d)
    } else {
        n(&d) / scale
    }
}

pub fn random_net(rng: &mut Rng, sizes: &[usize]) -> MlpModel {
    let seed: u64 = rng.random();
    MlpModel::init_with_bias(sizes, Init::He, 0.2, &mut seeded(seed)).unwrap()
}

pub fn random_point(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

/// Direct enumeration of Kendall's τ numerator, independent of the crate.
pub fn tau_oracle(a: &[f64], b: &[f64]) -> f64 {
    let s = |v: f64| (v > 0.0) as i64 - (v < 0.0) as i64;
    let d = a.len();
    let mut t = 0i64;
    for i in 0..d {
        for j in i + 1..d {
            t += s(a[i] - a[j]) * s(b[i] - b[j]);
        }
    }
    2.0 * t as f64 / (d * (d - 1)) as f64
}

pub fn cos_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
