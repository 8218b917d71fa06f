//! Brute-force grid maximization.
//!
//! Equivalent to taking the maximum over `grid_enumerate`: on the innermost
//! free level the objective is linear, so only the interval ends can win, and
//! the lower end wins ties as it comes first in the stream.

use rayon::prelude::*;

use super::{finish, objective, objective_lipschitz, tail_error, Method, RandomVariable, SublinearResult};
use crate::domain::{CredalDomain, ThetaVector};

struct Best {
    value: f64,
    free: Vec<f64>,
    spacing: f64,
}

impl Best {
    fn empty() -> Self {
        Best {
            value: f64::NEG_INFINITY,
            free: Vec::new(),
            spacing: 0.0,
        }
    }

    fn offer(&mut self, value: f64, free: &[f64]) {
        if value > self.value {
            self.value = value;
            self.free.clear();
            self.free.extend_from_slice(free);
        }
    }
}

/// Maximum of `E_theta[X]` over the grid with `resolution` points per
/// projection interval. An empty grid gives `value = -inf`.
pub fn brute_force_oracle(x: &RandomVariable, d: &CredalDomain, resolution: usize) -> SublinearResult {
    let resolution = resolution.max(2);
    let values = x.values();
    let dims = d.free_dims();
    let top = match d.project_interval(1, &[]) {
        Ok(iv) if !iv.is_empty() => iv,
        _ => return empty(),
    };
    let best = if dims == 1 {
        let mut b = Best::empty();
        let mut prefix = Vec::with_capacity(1);
        leaf(values, top.lo, top.hi, &mut prefix, &mut b);
        b
    } else {
        let parts: Vec<Best> = top
            .grid(resolution)
            .into_par_iter()
            .map(|t| {
                let mut b = Best::empty();
                let mut prefix = Vec::with_capacity(dims);
                prefix.push(t);
                descend(values, d, resolution, 2, &mut prefix, &mut b);
                b
            })
            .collect();
        let mut b = Best::empty();
        b.spacing = top.spacing(resolution);
        for p in parts {
            b.spacing = b.spacing.max(p.spacing);
            b.offer(p.value, &p.free);
        }
        b
    };
    if best.value == f64::NEG_INFINITY {
        return empty();
    }
    let err = objective_lipschitz(x) * best.spacing + tail_error(x, d);
    finish(x, d.complete(&best.free), Method::Grid, err)
}

fn descend(values: &[f64], d: &CredalDomain, resolution: usize, index: usize, prefix: &mut Vec<f64>, best: &mut Best) {
    let iv = match d.project_interval(index, prefix) {
        Ok(iv) if !iv.is_empty() => iv,
        _ => return,
    };
    if index == d.free_dims() {
        leaf(values, iv.lo, iv.hi, prefix, best);
        return;
    }
    best.spacing = best.spacing.max(iv.spacing(resolution));
    for t in iv.grid(resolution) {
        prefix.push(t);
        descend(values, d, resolution, index + 1, prefix, best);
        prefix.pop();
    }
}

fn leaf(values: &[f64], lo: f64, hi: f64, prefix: &mut Vec<f64>, best: &mut Best) {
    prefix.push(lo);
    let vlo = objective(values, prefix);
    best.offer(vlo, prefix);
    prefix.pop();
    if hi > lo {
        prefix.push(hi);
        best.offer(objective(values, prefix), prefix);
        prefix.pop();
    }
}

fn empty() -> SublinearResult {
    SublinearResult {
        value: f64::NEG_INFINITY,
        argmax_theta: ThetaVector(Vec::new()),
        method: Method::Grid,
        certified_error: f64::INFINITY,
    }
}
