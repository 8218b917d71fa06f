//! End-to-end acceptance suite. Prints one line per criterion and exits
//! non-zero if any criterion fails or exceeds its time budget.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subexp::domain::{build_domain, BoundSpec, CredalDomain, DomainSpec, SimplexPolicy};
use subexp::engine::{
    axiom_check, transform_eval, upper_expectation, upper_expectation_with, EngineOptions, Method, RandomVariable,
    TransformSpec, TransformSpecJson,
};
use subexp::independence::{independence_gap, peng_independent_expectation, per_theta_independent_expectation, TestFunction};
use subexp::limits::{
    dominated_harness, fatou_harness, monotone_harness, regularity_harness, FatouBound, Generator, Monotonicity,
    RvSequence,
};
use subexp::lln::{lln_table, moment_estimators, moment_estimators_exact, mu_bounds, LlnMethod, LlnOptions};
use subexp::Error;

type Outcome = Result<String, String>;

/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn bounds(list: &[(&str, &str)]) -> Vec<BoundSpec> {
    list.iter()
        .map(|(l, u)| BoundSpec {
            lower: l.to_string(),
            upper: u.to_string(),
            c: None,
        })
        .collect()
}

fn domain(n: usize, list: &[(&str, &str)], policy: SimplexPolicy) -> CredalDomain {
    build_domain(&DomainSpec {
        n_states: n,
        bounds: bounds(list),
        simplex_policy: policy,
        tail_mass_bound: 0.0,
        declared_convex: false,
    })
    .unwrap()
}

fn rv(v: &[f64]) -> RandomVariable {
    RandomVariable::new(v.to_vec()).unwrap()
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want} (tol {tol})"))
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T>(r: subexp::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn two_state() -> CredalDomain {
    domain(2, &[("0.2", "0.5")], SimplexPolicy::Enforce)
}

fn two_state_example() -> Outcome {
    let d = two_state();
    let x = rv(&[3.0, 1.0]);
    let exact = e(upper_expectation(&x, &d, Method::NestedExact))?;
    close("NestedExact", exact.value, 2.0, 1e-9)?;
    let opts = EngineOptions {
        grid_resolution: 2001,
        ..EngineOptions::default()
    };
    let grid = e(upper_expectation_with(&x, &d, Method::Grid, &opts))?;
    close("Grid(2001)", grid.value, 2.0, grid.certified_error)?;
    Ok(format!("exact {}, grid {} (err {:.1e})", exact.value, grid.value, grid.certified_error))
}

fn three_state_example() -> Outcome {
    let d = domain(3, &[("0", "0.5"), ("0", "0.5 - t1")], SimplexPolicy::Enforce);
    let r = e(upper_expectation(&rv(&[3.0, 2.0, 1.0]), &d, Method::NestedExact))?;
    close("value", r.value, 2.0, 1e-9)?;
    Ok(format!("value {}", r.value))
}

fn sqrt_example() -> Outcome {
    let want = 0.5 * 3.0 + 2f64.sqrt() / 2.0 * 2.0 + (1.0 - 2f64.sqrt()) / 2.0;
    let x = rv(&[3.0, 2.0, 1.0]);
    let map = |policy| {
        TransformSpec::from_json(&TransformSpecJson {
            rectangle: vec![[0.0, 0.5], [0.0, 1.0]],
            forward_map: vec!["d1".into(), "sqrt(d1*d2)".into()],
            simplex_policy: policy,
        })
    };
    let t = e(transform_eval(&x, &e(map(SimplexPolicy::PaperFaithful))?, Method::Transform))?;
    close("transform", t.value, want, 1e-6)?;
    let d = domain(3, &[("0", "0.5"), ("0", "sqrt(t1)")], SimplexPolicy::PaperFaithful);
    let n = e(upper_expectation(&x, &d, Method::NestedNumeric))?;
    close("NestedNumeric", n.value, want, 1e-6)?;
    let enforced = e(transform_eval(&x, &e(map(SimplexPolicy::Enforce))?, Method::Transform))?;
    let de = domain(3, &[("0", "0.5"), ("0", "sqrt(t1)")], SimplexPolicy::Enforce);
    let ne = e(upper_expectation(&x, &de, Method::NestedNumeric))?;
    ensure(enforced.value <= t.value + 1e-12 && ne.value <= n.value + 1e-12, || {
        format!("enforce {} / {} above paper-faithful {}", enforced.value, ne.value, t.value)
    })?;
    Ok(format!("transform {}, nested {}, enforce {}", t.value, n.value, enforced.value))
}

fn circle_example() -> Outcome {
    let t = e(TransformSpec::from_json(&TransformSpecJson {
        rectangle: vec![[0.0, 0.25], [0.0, 2.0 * PI]],
        forward_map: vec!["d1*cos(d2) + 0.25".into(), "d1*sin(d2) + 0.25".into()],
        simplex_policy: SimplexPolicy::Enforce,
    }))?;
    let r = e(transform_eval(&rv(&[2.0, 2.0, 1.0]), &t, Method::Transform))?;
    close("value", r.value, (6.0 + 2f64.sqrt()) / 4.0, 1e-6)?;
    Ok(format!("value {:.12}", r.value))
}

fn independence_examples() -> Outcome {
    let d = domain(2, &[("1/3", "2/3")], SimplexPolicy::Enforce);
    let (x, y) = (rv(&[1.0, 0.0]), rv(&[0.0, 1.0]));
    let phi = e(TestFunction::bivariate("(x - 0.5) * y * y", 0.5, 2.0))?;
    let g = e(independence_gap(&phi, &x, &y, &d, 201))?;
    close("per-theta", g.per_theta.value, 1.0 / 18.0, 1e-6)?;
    close("peng", g.peng.value, 1.0 / 6.0, 1e-6)?;
    let phi = e(TestFunction::bivariate("x * (1 - y)", 1.0, 2.0))?;
    let g = e(independence_gap(&phi, &x, &y, &d, 201))?;
    close("per-theta", g.per_theta.value, 4.0 / 9.0, 1e-6)?;
    close("peng", g.peng.value, 4.0 / 9.0, 1e-6)?;

    let family = [
        "x * y",
        "(x - 0.5) * y * y",
        "max(x, y)",
        "min(x, y) - x * y",
        "sin(x + y)",
        "abs(x - y)",
        "-(x * x) * y",
        "x * cos(y)",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    let cases = 120;
    for k in 0..cases {
        let n = rng.random_range(2..=3);
        let d = random_affine(&mut rng, n, false).ok_or("no feasible domain")?;
        let x = rv(&(0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>());
        let y = rv(&(0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>());
        let phi = e(TestFunction::bivariate(family[k % family.len()], 1e3, 1e3))?;
        let a = e(per_theta_independent_expectation(&phi, &x, &y, &d, 201))?;
        let b = e(peng_independent_expectation(&phi, &x, &y, &d, Method::Auto, &EngineOptions::default()))?;
        let slack = a.value - b.value - a.certified_error - b.certified_error;
        worst = worst.max(slack);
        ensure(slack <= 1e-9, || format!("case {k}: per-theta {} > peng {}", a.value, b.value))?;
    }
    Ok(format!("examples match; ordering holds on {cases} random cases (worst slack {worst:.2e})"))
}

/// A random feasible domain on `n` states whose bounds are affine in the
/// prefix with slopes of magnitude at most 0.5. Without `enforce_only` some
/// domains admit negative weights.
fn random_affine(rng: &mut ChaCha8Rng, n: usize, enforce_only: bool) -> Option<CredalDomain> {
    for _ in 0..100 {
        let mut list = Vec::new();
        for i in 1..n {
            let mut lo = format!("{:.4}", rng.random_range(0.0..0.5 / (n - 1) as f64));
            for j in 1..i {
                let s: f64 = rng.random_range(-0.5..0.5);
                if rng.random_bool(0.5) {
                    lo.push_str(&format!(" + ({s:.4}) * t{j}"));
                }
            }
            let w: f64 = rng.random_range(0.02..0.6);
            list.push((lo.clone(), format!("{lo} + {w:.4}")));
        }
        let policy = if enforce_only || rng.random_bool(0.7) {
            SimplexPolicy::Enforce
        } else {
            SimplexPolicy::PaperFaithful
        };
        let refs: Vec<(&str, &str)> = list.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let spec = DomainSpec {
            n_states: n,
            bounds: bounds(&refs),
            simplex_policy: policy,
            tail_mass_bound: 0.0,
            declared_convex: false,
        };
        if let Ok(d) = build_domain(&spec) {
            if upper_expectation(&RandomVariable::constant(0.0, n), &d, Method::NestedExact).is_ok() {
                return Some(d);
            }
        }
    }
    None
}

fn axiom_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cases = 500;
    let mut checked = 0;
    for k in 0..cases {
        let n = rng.random_range(2..=4);
        // Weights must form probability vectors for the axioms to hold.
        let d = random_affine(&mut rng, n, true).ok_or("no feasible domain")?;
        let mut draw = || rv(&(0..n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<_>>());
        let xs = [draw(), draw()];
        let lambda = rng.random_range(0.0..4.0);
        let r = e(axiom_check(&d, &xs, &[lambda], 1e-6))?;
        checked += r.outcomes.iter().map(|o| o.checked).sum::<usize>();
        if let Some(o) = r.outcomes.iter().find(|o| !o.passed) {
            return Err(format!("case {k}: {} failed: {:?}", o.axiom, o.witness));
        }
    }
    Ok(format!("{cases} instances, {checked} axiom checks"))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = EngineOptions {
        grid_resolution: 2001,
        ..EngineOptions::default()
    };
    let cases = 210;
    let mut worst = 0.0f64;
    for k in 0..cases {
        let n = 2 + k % 3;
        let d = random_affine(&mut rng, n, false).ok_or("no feasible domain")?;
        let x = rv(&(0..n).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<_>>());
        let exact = e(upper_expectation(&x, &d, Method::NestedExact))?;
        let grid = e(upper_expectation_with(&x, &d, Method::Grid, &opts))?;
        let diff = (exact.value - grid.value).abs();
        if grid.certified_error > 0.0 {
            worst = worst.max(diff / grid.certified_error);
        }
        ensure(diff <= grid.certified_error + 1e-12, || {
            format!("case {k} ({n} states): exact {} vs grid {} (err {})", exact.value, grid.value, grid.certified_error)
        })?;
    }
    Ok(format!("{cases} domains; worst |exact - grid| / certified error = {worst:.3}"))
}

fn geometric_domain() -> CredalDomain {
    let mut list = vec![BoundSpec {
        lower: "0.5".into(),
        upper: "1".into(),
        c: Some(0.5),
    }];
    for i in 2..=10 {
        list.push(BoundSpec {
            lower: "0".into(),
            upper: format!("{}", 0.5f64.powi(i)),
            c: Some(0.5f64.powi(i)),
        });
    }
    build_domain(&DomainSpec {
        n_states: 10,
        bounds: list,
        simplex_policy: SimplexPolicy::Enforce,
        tail_mass_bound: 0.5f64.powi(10),
        declared_convex: true,
    })
    .unwrap()
}

fn harnesses() -> Outcome {
    let d = two_state();
    let x = rv(&[3.0, 1.0]);
    let mut notes = Vec::new();
    let need = |r: &subexp::limits::HarnessReport, what: &str| {
        ensure(r.passed, || format!("{what} failed: {:?}", r.checks))
    };

    let scaled = e(RvSequence::new(
        Generator::Interpolate { start: rv(&[0.0, 0.0]) },
        x.clone(),
        Monotonicity::Increasing,
        None,
    ))?;
    let r = e(monotone_harness(&scaled, &d, 10_000, 1e-3))?;
    need(&r, "monotone X(1 - 1/m)")?;
    for t in &r.trace {
        close("E[X_m]", t.e_upper, 2.0 * (1.0 - 1.0 / t.m as f64), 1e-12)?;
    }
    notes.push(format!("monotone gap {:.1e}", r.checks[1].lhs));

    let constant = e(RvSequence::new(
        Generator::Cycle { members: vec![x.clone()] },
        x.clone(),
        Monotonicity::Increasing,
        Some(rv(&[4.0, 2.0])),
    ))?;
    need(&e(monotone_harness(&constant, &d, 50, 1e-12))?, "monotone constant")?;
    need(&e(dominated_harness(&constant, &d, 50, 1e-12))?, "dominated constant")?;

    let g = geometric_domain();
    let tails = e(RvSequence::new(
        Generator::TailIndicator,
        RandomVariable::constant(0.0, 10),
        Monotonicity::Decreasing,
        None,
    ))?;
    let r = e(monotone_harness(&tails, &g, 10, 1e-12))?;
    need(&r, "tail indicators")?;
    for t in &r.trace {
        // Mass beyond state m is at most the sum of the remaining budgets.
        let cap: f64 = (t.m + 1..=10).map(|i| 0.5f64.powi(i as i32)).sum();
        ensure(t.e_upper <= cap + 1e-12, || format!("tail at m = {}: {} > {cap}", t.m, t.e_upper))?;
    }

    let alt = e(RvSequence::new(
        Generator::Alternating { amplitude: 1.0 },
        x.clone(),
        Monotonicity::None,
        Some(rv(&[4.0, 2.0])),
    ))?;
    let r = e(dominated_harness(&alt, &d, 10_000, 1e-3))?;
    need(&r, "dominated X + (-1)^m / m")?;
    notes.push(format!("dominated gap {:.1e}", r.checks[1].lhs));

    let swap = e(RvSequence::new(
        Generator::Cycle {
            members: vec![rv(&[3.0, 1.0]), rv(&[1.0, 3.0])],
        },
        rv(&[2.0, 2.0]),
        Monotonicity::None,
        Some(rv(&[3.0, 3.0])),
    ))?;
    match dominated_harness(&swap, &d, 100, 1e-3) {
        Err(Error::NonConvergence(_)) => {}
        other => return Err(format!("oscillating sequence: expected NonConvergence, got {other:?}")),
    }

    let f = e(fatou_harness(&swap, &d, 100, 1e-9, &FatouBound::Lower(rv(&[0.0, 0.0]))))?;
    need(&f, "fatou lower")?;
    close("E[liminf]", f.checks[0].lhs, 1.0, 1e-12)?;
    close("liminf E", f.checks[0].rhs, 2.0, 1e-8)?;
    let f = e(fatou_harness(&swap, &d, 100, 1e-9, &FatouBound::Upper(rv(&[3.0, 3.0]))))?;
    need(&f, "fatou upper")?;
    for seq in [&scaled, &constant] {
        let f = e(fatou_harness(seq, &d, 200, 1e-9, &FatouBound::Lower(rv(&[0.0, 0.0]))))?;
        need(&f, "fatou convergent")?;
        // The reported right side carries the harness tolerance.
        close("fatou sides", f.checks[0].lhs, f.checks[0].rhs - 1e-9, 1e-9)?;
    }

    let r = e(regularity_harness(&g, &[0.1, 0.01], 33))?;
    need(&r, "regularity")?;
    for t in &r.tails {
        ensure(t.tail_sup + t.remainder < t.epsilon, || format!("tail at N = {} not below {}", t.n, t.epsilon))?;
    }
    notes.push(format!(
        "regularity N = {} (eps 0.1), {} (eps 0.01)",
        r.tails[0].n, r.tails[1].n
    ));
    Ok(notes.join("; "))
}

/// Maximum over 101 grid values of theta in [0.2, 0.5] of
/// E[-(S_n/n - 0.35)^2], S_n ~ Binomial(n, theta), from an independent
/// binomial-pmf computation.
const LLN_ORACLE: [(usize, f64); 4] = [(10, -0.0225016), (20, -0.01131695), (50, -0.00454082), (200, -0.0011375)];

fn lln_trend() -> Outcome {
    let d = two_state();
    let phi = e(TestFunction::univariate("-(x - 0.35) * (x - 0.35)", 1.0, 1.0))?;
    let ns: Vec<usize> = LLN_ORACLE.iter().map(|r| r.0).collect();
    let t = e(lln_table(&phi, &rv(&[1.0, 0.0]), &d, &ns, LlnMethod::ExactDp, &LlnOptions::default(), 1e-9))?;
    close("target", t.target, 0.0, 1e-12)?;
    for (row, (n, want)) in t.rows.iter().zip(LLN_ORACLE) {
        close(&format!("value at n = {n}"), row.value, want, 1e-9)?;
    }
    let gap = |n: usize| t.rows.iter().find(|r| r.n == n).map(|r| r.gap).unwrap();
    ensure(gap(10) > gap(50) && gap(50) > gap(200), || "gaps not strictly decreasing".into())?;
    ensure(gap(200) < 0.01, || format!("gap(200) = {}", gap(200)))?;
    ensure(t.trend_ok, || "trend flag not set".into())?;
    Ok(format!("gaps {:.3e} > {:.3e} > {:.3e}", gap(10), gap(50), gap(200)))
}

fn moments() -> Outcome {
    let d = two_state();
    let x = rv(&[1.0, 0.0]);
    let (lo, hi) = e(moment_estimators(&x, &d, 10_000, 301, 4, 2024))?;
    close("lower mean", lo, 0.2, 0.02)?;
    close("upper mean", hi, 0.5, 0.02)?;
    let (elo, ehi) = e(moment_estimators_exact(&x, &d))?;
    let md = e(mu_bounds(&x, &d))?;
    close("exact lower", elo, md.mu_lower, 1e-12)?;
    close("exact upper", ehi, md.mu_upper, 1e-12)?;
    Ok(format!("estimates ({lo:.4}, {hi:.4}); exact ({elo}, {ehi})"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("two-state example", 1, two_state_example),
        ("three-state example", 1, three_state_example),
        ("sqrt-bound example", 5, sqrt_example),
        ("circle via polar transform", 5, circle_example),
        ("independence examples and ordering", 30, independence_examples),
        ("sublinearity axioms", 60, axiom_suite),
        ("exact vs grid oracle", 60, oracle_equivalence),
        ("convergence harnesses", 30, harnesses),
        ("law of large numbers", 60, lln_trend),
        ("moment estimators", 60, moments),
    ];
    // Optional criterion numbers select a subset; other arguments are ignored.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let slow = took > Duration::from_secs(*budget);
        let (status, detail) = match (&result, slow) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status} {name} [{:.2} s] {detail}", i + 1, took.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
