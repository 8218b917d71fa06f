//! Empirical-mean functionals `E[phi(S_n / n)]` where, under each measure of
//! the domain, `X_1 .. X_n` are i.i.d. copies of `X`; their maximal
//! distribution limit; and moment estimators of the mean interval.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CredalDomain, DomainSpec, ThetaVector};
use crate::engine::{lower_expectation, upper_expectation, Method, RandomVariable};
use crate::error::{Error, Result};
use crate::independence::{TestFunction, TestFunctionSpec};
use crate::search::golden_max;
use crate::tol;

/// Limits on the exact method.
pub const DP_MAX_STATES: usize = 3;
pub const DP_MAX_N: usize = 200;

/// Upper cap on the scan size of [`maximal_dist_eval`].
const MAX_SCAN: f64 = 1e7;

/// The law with `E[phi(xi)] = sup over [mu_lower, mu_upper] of phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalDistribution {
    pub mu_lower: f64,
    pub mu_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlnMethod {
    #[default]
    ExactDp,
    MonteCarlo,
}

impl LlnMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LlnMethod::ExactDp => "exact_dp",
            LlnMethod::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LlnRow {
    pub n: usize,
    pub value: f64,
    pub target: f64,
    /// `|value - target|`.
    pub gap: f64,
    pub method: LlnMethod,
    /// Monte Carlo standard error at the maximizing `theta`.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlnOptions {
    /// Grid points per projection interval for the `theta` sweep.
    pub resolution: usize,
    /// Monte Carlo paths per `theta`.
    pub samples: usize,
    pub seed: u64,
}

impl Default for LlnOptions {
    fn default() -> Self {
        LlnOptions {
            resolution: 101,
            samples: 1000,
            seed: 0,
        }
    }
}

/// `E_theta[phi(S_n / n)]` maximized over the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumValue {
    pub value: f64,
    pub argmax: ThetaVector,
    pub stderr: Option<f64>,
}

/// LLN experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnSpec {
    #[serde(flatten)]
    pub phi: TestFunctionSpec,
    pub rv: RandomVariable,
    pub domain: DomainSpec,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub method: LlnMethod,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    LlnOptions::default().samples
}

/// `(lower, upper)` expectations of `X`.
pub fn mu_bounds(x: &RandomVariable, d: &CredalDomain) -> Result<MaximalDistribution> {
    Ok(MaximalDistribution {
        mu_lower: lower_expectation(x, d, Method::Auto)?.value,
        mu_upper: upper_expectation(x, d, Method::Auto)?.value,
    })
}

/// `sup of phi on [mu_lower, mu_upper]` within `tol`, from a scan of
/// `ceil(L * width / tol) + 1` points refined by golden section around the
/// best one.
pub fn maximal_dist_eval(phi: &TestFunction, md: &MaximalDistribution, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    let (lo, hi) = (md.mu_lower, md.mu_upper);
    if lo > hi {
        return Err(Error::InvalidArgument(format!("mu_lower {lo} exceeds mu_upper {hi}")));
    }
    let width = hi - lo;
    if width == 0.0 {
        return phi.eval(lo);
    }
    let points = ((phi.lipschitz_l * width / tol).ceil() + 1.0).clamp(2.0, MAX_SCAN) as usize;
    let step = width / (points - 1) as f64;
    let at = |k: usize| if k == points - 1 { hi } else { lo + k as f64 * step };
    let (mut best_k, mut best) = (0, f64::NEG_INFINITY);
    for k in 0..points {
        let v = phi.eval(at(k))?;
        if v > best {
            best_k = k;
            best = v;
        }
    }
    let a = at(best_k.saturating_sub(1));
    let b = at((best_k + 1).min(points - 1));
    let mut err = None;
    let mut f = |t: f64| match phi.eval(t) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    let (_, refined) = golden_max(&mut f, a, b, tol::GOLDEN_XTOL);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(best.max(refined))
}

fn theta_grid(d: &CredalDomain, resolution: usize) -> Result<Vec<ThetaVector>> {
    let pts: Vec<ThetaVector> = d.grid_enumerate(resolution.max(2)).collect();
    if pts.is_empty() {
        return Err(Error::InfeasibleDomain(format!("no grid point at resolution {resolution}")));
    }
    if pts.iter().any(|t| t.0.iter().any(|&w| w < 0.0)) {
        return Err(Error::InvalidArgument(
            "i.i.d. sampling needs nonnegative weights; use the enforce simplex policy".into(),
        ));
    }
    Ok(pts)
}

/// Distribution of `S_n` that does not depend on `theta`: every count vector
/// `(c_1 .. c_k)` with `sum = n`, its multinomial coefficient, and the merged
/// support point it lands on.
struct ConvolutionPlan {
    counts: Vec<Vec<u32>>,
    log_coef: Vec<f64>,
    group: Vec<usize>,
    /// `phi(s / n)` per merged support point.
    phi_at: Vec<f64>,
}

impl ConvolutionPlan {
    fn new(values: &[f64], n: usize, phi: &TestFunction) -> Result<Self> {
        let k = values.len();
        let log_fact: Vec<f64> = std::iter::once(0.0)
            .chain((1..=n).scan(0.0, |acc, j| {
                *acc += (j as f64).ln();
                Some(*acc)
            }))
            .collect();
        let mut counts = Vec::new();
        let mut cur = vec![0u32; k];
        compositions(n as u32, 0, &mut cur, &mut counts);
        let log_coef: Vec<f64> = counts
            .iter()
            .map(|c| log_fact[n] - c.iter().map(|&ci| log_fact[ci as usize]).sum::<f64>())
            .collect();
        let sums: Vec<f64> = counts
            .iter()
            .map(|c| c.iter().zip(values).map(|(&ci, a)| ci as f64 * a).sum())
            .collect();
        let mut order: Vec<usize> = (0..sums.len()).collect();
        order.sort_by(|&i, &j| sums[i].total_cmp(&sums[j]));
        let mut group = vec![0usize; sums.len()];
        let mut reps: Vec<f64> = Vec::new();
        for &i in &order {
            match reps.last() {
                Some(&r) if (sums[i] - r).abs() <= tol::DP_MERGE => {}
                _ => reps.push(sums[i]),
            }
            group[i] = reps.len() - 1;
        }
        let phi_at = reps
            .iter()
            .map(|s| phi.eval(s / n as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConvolutionPlan {
            counts,
            log_coef,
            group,
            phi_at,
        })
    }

    /// Probability of every merged support point under `theta`.
    fn distribution(&self, theta: &[f64]) -> Vec<f64> {
        let ln: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
        let mut p = vec![0.0; self.phi_at.len()];
        for (idx, c) in self.counts.iter().enumerate() {
            let mut l = self.log_coef[idx];
            let mut zero = false;
            for (&ci, (&t, &lt)) in c.iter().zip(theta.iter().zip(&ln)) {
                if ci > 0 {
                    if t == 0.0 {
                        zero = true;
                        break;
                    }
                    l += ci as f64 * lt;
                }
            }
            if !zero {
                p[self.group[idx]] += l.exp();
            }
        }
        p
    }

    fn expectation(&self, theta: &[f64]) -> f64 {
        self.distribution(theta)
            .iter()
            .zip(&self.phi_at)
            .map(|(p, f)| p * f)
            .sum()
    }
}

/// All `c` with `sum = total`, in lexicographic order.
fn compositions(total: u32, at: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if at + 1 == cur.len() {
        cur[at] = total;
        out.push(cur.clone());
        return;
    }
    for c in 0..=total {
        cur[at] = c;
        compositions(total - c, at + 1, cur, out);
    }
}

/// `sup over the theta grid of E_theta[phi(S_n / n)]`.
pub fn iid_sum_functional(
    phi: &TestFunction,
    x: &RandomVariable,
    d: &CredalDomain,
    n: usize,
    method: LlnMethod,
    opts: &LlnOptions,
) -> Result<SumValue> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if x.len() != d.n_states() {
        return Err(Error::InvalidArgument(format!(
            "random variable has {} states, domain has {}",
            x.len(),
            d.n_states()
        )));
    }
    let grid = theta_grid(d, opts.resolution)?;
    let per_theta: Vec<(f64, Option<f64>)> = match method {
        LlnMethod::ExactDp => {
            if d.n_states() > DP_MAX_STATES || n > DP_MAX_N {
                return Err(Error::MethodInfeasible(format!(
                    "exact_dp handles at most {DP_MAX_STATES} states and n <= {DP_MAX_N}; got {} states, n = {n}",
                    d.n_states()
                )));
            }
            let plan = ConvolutionPlan::new(x.values(), n, phi)?;
            grid.par_iter().map(|t| (plan.expectation(&t.0), None)).collect()
        }
        LlnMethod::MonteCarlo => {
            if opts.samples == 0 {
                return Err(Error::InvalidArgument("samples must be >= 1".into()));
            }
            grid.par_iter()
                .enumerate()
                .map(|(k, t)| {
                    let mut acc = 0.0;
                    let mut acc2 = 0.0;
                    for path in 0..opts.samples {
                        let mean = path_mean(x.values(), &t.0, n, opts.seed, k, path);
                        let v = phi.eval(mean)?;
                        acc += v;
                        acc2 += v * v;
                    }
                    let s = opts.samples as f64;
                    let mean = acc / s;
                    let var = if opts.samples > 1 {
                        ((acc2 - s * mean * mean) / (s - 1.0)).max(0.0)
                    } else {
                        0.0
                    };
                    Ok((mean, Some((var / s).sqrt())))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut best = 0;
    for (k, v) in per_theta.iter().enumerate() {
        if v.0 > per_theta[best].0 {
            best = k;
        }
    }
    Ok(SumValue {
        value: per_theta[best].0,
        argmax: grid[best].clone(),
        stderr: per_theta[best].1,
    })
}

/// `S_n / n` along one simulated path. The stream depends only on
/// `(seed, theta index, path index)`.
fn path_mean(values: &[f64], theta: &[f64], n: usize, seed: u64, theta_index: usize, path: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(theta_index as u64);
    // Each draw consumes one 64-bit word, i.e. two 32-bit positions.
    rng.set_word_pos(path as u128 * n as u128 * 2);
    let mut cum = Vec::with_capacity(theta.len());
    let mut s = 0.0;
    for t in theta {
        s += t;
        cum.push(s);
    }
    let last = values.len() - 1;
    let mut total = 0.0;
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * s;
        let i = cum.iter().position(|&c| u < c).unwrap_or(last);
        total += values[i];
    }
    total / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnTable {
    pub mu: MaximalDistribution,
    pub target: f64,
    pub rows: Vec<LlnRow>,
    /// `gap(max n) <= gap(min n) + slack`; the slack is three standard errors
    /// for Monte Carlo and zero for the exact method.
    pub trend_ok: bool,
}

pub fn lln_table(
    phi: &TestFunction,
    x: &RandomVariable,
    d: &CredalDomain,
    n_list: &[usize],
    method: LlnMethod,
    opts: &LlnOptions,
    tol: f64,
) -> Result<LlnTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_list must be non-empty and strictly ascending".into()));
    }
    let mu = mu_bounds(x, d)?;
    let target = maximal_dist_eval(phi, &mu, tol)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let v = iid_sum_functional(phi, x, d, n, method, opts)?;
        rows.push(LlnRow {
            n,
            value: v.value,
            target,
            gap: (v.value - target).abs(),
            method,
            stderr: v.stderr,
        });
    }
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let slack = 3.0 * (first.stderr.unwrap_or(0.0) + last.stderr.unwrap_or(0.0));
    Ok(LlnTable {
        mu,
        target,
        trend_ok: last.gap <= first.gap + slack,
        rows,
    })
}

/// Monte Carlo `(min, max)` over the grid of the sample mean of `S_n / n`
/// averaged over `samples` paths.
pub fn moment_estimators(
    x: &RandomVariable,
    d: &CredalDomain,
    n: usize,
    theta_resolution: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArgument("n and samples must be >= 1".into()));
    }
    let grid = theta_grid(d, theta_resolution)?;
    let means: Vec<f64> = grid
        .par_iter()
        .enumerate()
        .map(|(k, t)| (0..samples).map(|p| path_mean(x.values(), &t.0, n, seed, k, p)).sum::<f64>() / samples as f64)
        .collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// The infinite-sample limit of [`moment_estimators`]: `E_theta[S_n / n] =
/// E_theta[X]`, so the estimators are the lower and upper expectations.
pub fn moment_estimators_exact(x: &RandomVariable, d: &CredalDomain) -> Result<(f64, f64)> {
    let md = mu_bounds(x, d)?;
    Ok((md.mu_lower, md.mu_upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundPair, SimplexPolicy};

    fn two_state() -> CredalDomain {
        CredalDomain::new(2, vec![BoundPair::constant(0.2, 0.5)], SimplexPolicy::Enforce).unwrap()
    }

    fn x10() -> RandomVariable {
        RandomVariable::new(vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn bounds_and_maximal_distribution() {
        let md = mu_bounds(&x10(), &two_state()).unwrap();
        assert!((md.mu_lower - 0.2).abs() < 1e-12 && (md.mu_upper - 0.5).abs() < 1e-12);
        let id = TestFunction::univariate("x", 1.0, 1.0).unwrap();
        assert!((maximal_dist_eval(&id, &md, 1e-6).unwrap() - 0.5).abs() < 1e-12);
        let bump = TestFunction::univariate("-(x - 0.35)*(x - 0.35)", 1.0, 1.0).unwrap();
        assert!(maximal_dist_eval(&bump, &md, 1e-6).unwrap().abs() < 1e-12);
        let pt = MaximalDistribution {
            mu_lower: 0.3,
            mu_upper: 0.3,
        };
        assert!((maximal_dist_eval(&bump, &pt, 1e-6).unwrap() + 0.0025).abs() < 1e-15);
    }

    #[test]
    fn n_one_is_upper_expectation_of_composition() {
        let d = CredalDomain::new(
            3,
            vec![BoundPair::constant(0.1, 0.5), BoundPair::constant(0.2, 0.3)],
            SimplexPolicy::Enforce,
        )
        .unwrap();
        let x = RandomVariable::new(vec![0.3, -1.0, 2.0]).unwrap();
        let phi = TestFunction::univariate("x*x - x", 10.0, 10.0).unwrap();
        let v = iid_sum_functional(&phi, &x, &d, 1, LlnMethod::ExactDp, &LlnOptions::default()).unwrap();
        let fx = x.try_map(|a| phi.eval(a)).unwrap();
        let e = upper_expectation(&fx, &d, Method::NestedExact).unwrap();
        assert!((v.value - e.value).abs() < 1e-9, "{} vs {}", v.value, e.value);
    }

    #[test]
    fn plan_matches_iterated_convolution() {
        let values = [1.0, 0.5, 0.0];
        let theta = [0.2, 0.3, 0.5];
        let n = 7;
        let phi = TestFunction::univariate("x*x", 1.0, 2.0).unwrap();
        let plan = ConvolutionPlan::new(&values, n, &phi).unwrap();
        // Naive convolution over (sum, prob) pairs.
        let mut dist: Vec<(f64, f64)> = vec![(0.0, 1.0)];
        for _ in 0..n {
            let mut next: Vec<(f64, f64)> = Vec::new();
            for &(s, p) in &dist {
                for (a, t) in values.iter().zip(&theta) {
                    let v = s + a;
                    match next.iter_mut().find(|(u, _)| (u - v).abs() <= 1e-12) {
                        Some(e) => e.1 += p * t,
                        None => next.push((v, p * t)),
                    }
                }
            }
            dist = next;
        }
        let want: f64 = dist.iter().map(|(s, p)| p * (s / n as f64).powi(2)).sum();
        assert!((plan.expectation(&theta) - want).abs() < 1e-14);
        assert_eq!(plan.phi_at.len(), dist.len());
    }

    #[test]
    fn constant_phi_and_caps() {
        let c = TestFunction::univariate("0.75", 0.75, 0.0).unwrap();
        for method in [LlnMethod::ExactDp, LlnMethod::MonteCarlo] {
            let opts = LlnOptions {
                samples: 20,
                ..LlnOptions::default()
            };
            let v = iid_sum_functional(&c, &x10(), &two_state(), 13, method, &opts).unwrap();
            assert!((v.value - 0.75).abs() < 1e-12);
        }
        assert!(matches!(
            iid_sum_functional(&c, &x10(), &two_state(), 201, LlnMethod::ExactDp, &LlnOptions::default()),
            Err(Error::MethodInfeasible(_))
        ));
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let phi = TestFunction::univariate("x", 1.0, 1.0).unwrap();
        let opts = LlnOptions {
            resolution: 5,
            samples: 50,
            seed: 7,
        };
        let a = iid_sum_functional(&phi, &x10(), &two_state(), 30, LlnMethod::MonteCarlo, &opts).unwrap();
        let b = iid_sum_functional(&phi, &x10(), &two_state(), 30, LlnMethod::MonteCarlo, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.stderr.unwrap() > 0.0);
    }

    #[test]
    fn exact_moment_estimators() {
        let (lo, hi) = moment_estimators_exact(&x10(), &two_state()).unwrap();
        let md = mu_bounds(&x10(), &two_state()).unwrap();
        assert_eq!((lo, hi), (md.mu_lower, md.mu_upper));
    }
}
