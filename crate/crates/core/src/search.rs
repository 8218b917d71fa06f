//! One-dimensional global maximization on an interval: a uniform pre-scan
//! followed by golden-section refinement around the scan's local maxima.

use crate::tol;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// The pre-scan was unimodal and the refined maximum agrees with it.
    pub certified: bool,
}

/// Golden-section search for a maximum of `f` on `[a, b]`; returns the best
/// point seen, including both ends of the bracket.
pub fn golden_max<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let (fa0, fb0) = (f(a), f(b));
    let mut best = if fb0 > fa0 { (b, fb0) } else { (a, fa0) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Maximizes `f` on `[lo, hi]`. Infeasible points report `f64::NEG_INFINITY`.
///
/// Returns `None` when every scanned point is infeasible. The result is
/// certified when the scan values rise then fall (within
/// [`tol::NESTED_AGREEMENT`]), with infeasible points only at the ends.
pub fn maximize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, scan_points: usize) -> Option<Maximum> {
    if !(hi - lo > 0.0) {
        let v = f(lo);
        return (v > f64::NEG_INFINITY).then_some(Maximum {
            x: lo,
            value: v,
            certified: true,
        });
    }
    let n = scan_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + k as f64 * step })
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let (mut best_k, mut best_v) = (0usize, f64::NEG_INFINITY);
    for (k, &v) in vs.iter().enumerate() {
        if v > best_v {
            best_k = k;
            best_v = v;
        }
    }
    if best_v == f64::NEG_INFINITY {
        return None;
    }

    let unimodal = is_unimodal(&vs);
    let peaks: Vec<usize> = if unimodal {
        vec![best_k]
    } else {
        local_maxima(&vs)
    };
    let mut best = (xs[best_k], best_v);
    let mut refined_best = f64::NEG_INFINITY;
    for k in peaks {
        let a = xs[k.saturating_sub(1)];
        let b = xs[(k + 1).min(n - 1)];
        let (x, v) = golden_max(&mut f, a, b, tol::GOLDEN_XTOL);
        refined_best = refined_best.max(v);
        if v > best.1 {
            best = (x, v);
        }
    }
    let certified = unimodal && refined_best >= best_v - tol::NESTED_AGREEMENT;
    Some(Maximum {
        x: best.0,
        value: best.1,
        certified,
    })
}

fn is_unimodal(vs: &[f64]) -> bool {
    let slack = tol::NESTED_AGREEMENT;
    let finite: Vec<usize> = (0..vs.len()).filter(|&k| vs[k] > f64::NEG_INFINITY).collect();
    let (Some(&first), Some(&last)) = (finite.first(), finite.last()) else {
        return false;
    };
    // Infeasible points inside the feasible run mean a non-convex slice.
    if last - first + 1 != finite.len() {
        return false;
    }
    let run = &vs[first..=last];
    let mut falling = false;
    for w in run.windows(2) {
        if falling {
            if w[1] > w[0] + slack {
                return false;
            }
        } else if w[1] < w[0] - slack {
            falling = true;
        }
    }
    true
}

fn local_maxima(vs: &[f64]) -> Vec<usize> {
    let n = vs.len();
    (0..n)
        .filter(|&k| {
            vs[k] > f64::NEG_INFINITY
                && (k == 0 || vs[k] >= vs[k - 1])
                && (k == n - 1 || vs[k] >= vs[k + 1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_peak() {
        let (x, v) = golden_max(&mut |x: f64| -(x - 0.35) * (x - 0.35), 0.2, 0.5, 1e-10);
        assert!((x - 0.35).abs() < 1e-8);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn monotone_function_hits_endpoint_exactly() {
        let m = maximize(|x| 2.0 * x + x.sqrt(), 0.0, 0.5, 9).unwrap();
        assert_eq!(m.x, 0.5);
        assert!(m.certified);
    }

    #[test]
    fn multimodal_scan_is_not_certified_but_finds_global_peak() {
        // sin + cos on [0, 2pi]: peak at pi/4, trough at 5pi/4, rising again.
        let m = maximize(|x| x.sin() + x.cos(), 0.0, 2.0 * std::f64::consts::PI, 33).unwrap();
        assert!(!m.certified);
        assert!((m.value - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_regions() {
        let f = |x: f64| if x > 0.5 { f64::NEG_INFINITY } else { x };
        let m = maximize(f, 0.0, 1.0, 9).unwrap();
        assert!((m.x - 0.5).abs() < 1e-8);
        assert!(m.certified);
        assert!(maximize(|_| f64::NEG_INFINITY, 0.0, 1.0, 9).is_none());
        let holes = |x: f64| if (0.3..0.6).contains(&x) { f64::NEG_INFINITY } else { -x };
        assert!(!maximize(holes, 0.0, 1.0, 9).unwrap().certified);
    }

    #[test]
    fn degenerate_interval() {
        let m = maximize(|x| x * 3.0, 0.4, 0.4, 9).unwrap();
        assert_eq!((m.x, m.value), (0.4, 1.2000000000000002));
    }
}
