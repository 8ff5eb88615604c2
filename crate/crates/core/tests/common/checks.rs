//! Seeded property checks shared by the proptest suite and the acceptance runner.

use radepi_core::certificates::{
    certify_global_min_geometric, check_fj_necessary, check_kkt_sufficient, gordan_alternative, AlternativeMatrix,
    FjOptions, GordanOutcome, KktMode, Status, SufficiencyConfig,
};
use radepi_core::cones::{analyze, ConeConfig, SetKind};
use radepi_core::descent::{solve, DescentConfig, TrajectoryStatus};
use radepi_core::epiderivative::{
    estimate, numeric_clarke, numeric_directional_derivative, numeric_subderivative, objective_epiderivative,
    radial_epiderivative_min_affine, radial_epiderivative_norm_linear, LocalConfig,
};
use radepi_core::number::{q, q_frac, to_f64};
use radepi_core::point::{dot, linearly_independent, rank};
use radepi_core::{radial_epiderivative, Direction, Domain, EstimatorConfig, Expression, Number, Point, Q};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

pub type Check = std::result::Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn epi(e: &Expression, x: &Point, d: &Direction) -> Number {
    radial_epiderivative(e, x, d, &Domain::All, &EstimatorConfig::default()).unwrap().value
}

/// `a ≥ b`: exact when both are exact, within the estimator tolerance otherwise.
pub fn ge(a: &Number, b: &Number) -> bool {
    match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => x >= y,
        _ => a.to_f64() >= b.to_f64() - 1e-3,
    }
}

/// Min-affine, negative-norm-linear or convex abs sum.
pub fn exact_rule_expr(rng: &mut ChaCha8Rng, n: usize) -> Expression {
    match rng.gen_range(0..3) {
        0 => Expression::min_affine(&min_affine_forms(rng, n)),
        1 => norm_linear(rng, n).0,
        _ => Expression::sum(
            (0..rng.gen_range(1..=3))
                .map(|_| {
                    let f = affine_form(rng, n);
                    Expression::abs(Expression::affine(f.coeffs, f.offset))
                })
                .collect(),
        ),
    }
}

pub fn homogeneity(seed: u64) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=3);
    let e = exact_rule_expr(&mut rng, n);
    let x = quarter_point(&mut rng, n, -3, 3);
    let d = nonzero_direction(&mut rng, n, -3, 3);
    let base = epi(&e, &x, &d);
    for lambda in [q_frac(1, 2), q(2), q(10)] {
        let scaled = epi(&e, &x, &d.scaled(&lambda));
        match (&base, &scaled) {
            (Number::Exact(a), Number::Exact(b)) => ensure!(a * &lambda == *b, "{a} * {lambda} != {b}"),
            (a, b) => ensure!(
                (a.to_f64() * to_f64(&lambda) - b.to_f64()).abs() <= 1e-9 * (1.0 + b.to_f64().abs()),
                "{a:?} * {lambda} != {b:?}"
            ),
        }
    }
    Ok(())
}

pub fn sum_rule(seed: u64) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=3);
    let (f1, f2) = (exact_rule_expr(&mut rng, n), exact_rule_expr(&mut rng, n));
    let x = quarter_point(&mut rng, n, -3, 3);
    let d = nonzero_direction(&mut rng, n, -3, 3);
    let lhs = epi(&Expression::sum(vec![f1.clone(), f2.clone()]), &x, &d);
    let rhs = epi(&f1, &x, &d) + epi(&f2, &x, &d);
    ensure!(ge(&lhs, &rhs), "{lhs:?} < {rhs:?}");
    Ok(())
}

pub fn max_rule(seed: u64) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=3);
    let x = quarter_point(&mut rng, n, -3, 3);
    let mut f1 = min_affine_forms(&mut rng, n);
    let mut f2 = min_affine_forms(&mut rng, n);
    // shift f2 so both are active at x̄, then sometimes lift f1 off
    let gap = Expression::min_affine(&f1).eval(&x.0).exact().unwrap() - Expression::min_affine(&f2).eval(&x.0).exact().unwrap();
    for f in &mut f2 {
        f.offset += gap.clone();
    }
    if rng.gen_bool(0.3) {
        for f in &mut f1 {
            f.offset += q(1);
        }
    }
    let (e1, e2) = (Expression::min_affine(&f1), Expression::min_affine(&f2));
    let h = Expression::max(vec![e1.clone(), e2.clone()]);
    let d = nonzero_direction(&mut rng, n, -3, 3);
    let hv = epi(&h, &x, &d);
    let fx = h.eval(&x.0);
    for e in [&e1, &e2] {
        if e.eval(&x.0) == fx {
            let ev = epi(e, &x, &d);
            ensure!(ge(&hv, &ev), "{hv:?} < {ev:?}");
        }
    }
    Ok(())
}

pub fn max_min_lower_bound(seed: u64) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=3);
    let groups: Vec<_> = (0..rng.gen_range(1..=3)).map(|_| min_affine_forms(&mut rng, n)).collect();
    let f = Expression::max(groups.iter().map(|g| Expression::min_affine(g)).collect());
    let x = quarter_point(&mut rng, n, -3, 3);
    let d = nonzero_direction(&mut rng, n, -3, 3);
    let fx = f.eval(&x.0);
    let value = epi(&f, &x, &d);
    for g in &groups {
        if Expression::min_affine(g).eval(&x.0) == fx {
            let bound = g.iter().map(|a| a.slope(&d.0)).min().unwrap();
            ensure!(ge(&value, &Number::Exact(bound.clone())), "{value:?} < {bound}");
        }
    }
    Ok(())
}

pub fn monotone_comparison(seed: u64) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=3);
    let f2 = exact_rule_expr(&mut rng, n);
    let x = quarter_point(&mut rng, n, -3, 3);
    let c = int_vec(&mut rng, n, -2, 2);
    let offset = -dot(&c, &x.0);
    let f1 = Expression::sum(vec![f2.clone(), Expression::abs(Expression::affine(c, offset))]);
    let d = nonzero_direction(&mut rng, n, -3, 3);
    let (a, b) = (epi(&f1, &x, &d), epi(&f2, &x, &d));
    ensure!(ge(&a, &b), "{a:?} < {b:?}");
    Ok(())
}

/// One min-affine instance checked at `pairs` random `(x̄, d)`.
pub fn min_affine_agreement(seed: u64, pairs: usize) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=3);
    let forms = min_affine_forms(&mut rng, n);
    let e = Expression::min_affine(&forms);
    let cfg = EstimatorConfig::default();
    for _ in 0..pairs {
        let x = quarter_point(&mut rng, n, -3, 3);
        let d = nonzero_direction(&mut rng, n, -3, 3);
        let exact = radial_epiderivative_min_affine(&forms, &x, &d).value.to_f64();
        let est = estimate(&e, &x.to_f64(), &d.to_f64(), None, None, &cfg).map_err(|e| e.to_string())?;
        ensure!((est.value.to_f64() - exact).abs() <= 1e-3, "min-affine at {x:?} along {d:?}: {exact} vs {:?}", est.value);
    }
    Ok(())
}

pub fn norm_linear_agreement(seed: u64, pairs: usize) -> Check {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=3);
    let (e, a, c, norm) = norm_linear(&mut rng, n);
    let cfg = EstimatorConfig::default();
    for _ in 0..pairs {
        let x = quarter_point(&mut rng, n, -3, 3);
        let d = nonzero_direction(&mut rng, n, -3, 3);
        let exact = radial_epiderivative_norm_linear(&a, &c, norm, &x, &d).value.to_f64();
        let est = estimate(&e, &x.to_f64(), &d.to_f64(), None, None, &cfg).map_err(|e| e.to_string())?;
        ensure!((est.value.to_f64() - exact).abs() <= 1e-3, "norm-linear at {x:?} along {d:?}: {exact} vs {:?}", est.value);
    }
    Ok(())
}

/// `f^r ≤ df ≤ f' ≤ f°` on |x|, −|x|, min-affine, max-min-affine and norm-linear functions.
pub fn derivative_chain(seed: u64) -> Check {
    let mut rng = rng(seed);
    let kind = rng.gen_range(0..5);
    let n = if kind < 2 { 1 } else { rng.gen_range(1..=3) };
    let f = match kind {
        0 => Expression::abs(Expression::var(0)),
        1 => Expression::scale(q(-1), Expression::abs(Expression::var(0))),
        2 => Expression::min_affine(&min_affine_forms(&mut rng, n)),
        3 => max_min_affine(&mut rng, n),
        _ => norm_linear(&mut rng, n).0,
    };
    let x = if kind < 2 && rng.gen_bool(0.5) { Point::from_ints(&[0]) } else { quarter_point(&mut rng, n, -2, 2) };
    let d = nonzero_direction(&mut rng, n, -2, 2);
    let (xf, df) = (x.to_f64(), d.to_f64());
    let local = LocalConfig::default();
    let radial = epi(&f, &x, &d).to_f64();
    let sub = numeric_subderivative(&f, &xf, &df, &local);
    let dir = numeric_directional_derivative(&f, &xf, &df, &local);
    let clarke = numeric_clarke(&f, &xf, &df, &local);
    ensure!(radial <= sub + 1e-3, "radial {radial} > sub {sub}");
    ensure!(sub <= dir + 1e-3, "sub {sub} > dir {dir}");
    ensure!(dir <= clarke + 1e-3, "dir {dir} > clarke {clarke}");
    Ok(())
}

pub fn random_matrix(rng: &mut ChaCha8Rng) -> Vec<Vec<Q>> {
    let rows = rng.gen_range(1..=4);
    let cols = rng.gen_range(1..=3);
    (0..rows).map(|_| int_vec(rng, cols, -5, 5)).collect()
}

/// All points of the simplex in `R^k` with coordinates in `(1/den) ℕ`.
pub fn simplex_grid(k: usize, den: i64) -> Vec<Vec<Q>> {
    fn rec(k: usize, left: i64, den: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<Q>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&v| q_frac(v, den)).collect());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(k - 1, left - v, den, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, den, den, &mut Vec::new(), &mut out);
    out
}

/// Exclusivity and witness validity; with `grid`, also agreement with a
/// simplex-grid search for either system.
pub fn gordan(seed: u64, grid: Option<i64>) -> Check {
    let mut rng = rng(seed);
    let rows = random_matrix(&mut rng);
    let a = AlternativeMatrix::new(rows).unwrap();
    let zero = Q::from_integer(0.into());
    let outcome = gordan_alternative(&a).map_err(|e| e.to_string())?;
    let first = match &outcome {
        GordanOutcome::System1 { x } => {
            ensure!(x.iter().all(|v| *v >= zero), "x has a negative entry");
            ensure!(a.apply(&x).iter().all(|v| *v < zero), "Ax < 0 fails");
            true
        }
        GordanOutcome::System2 { v } => {
            ensure!(v.iter().all(|x| *x >= zero) && v.iter().any(|x| *x > zero), "v is not a nonzero nonnegative vector");
            ensure!(a.apply_transpose(&v).iter().all(|x| *x >= zero), "A^T v >= 0 fails");
            false
        }
    };
    if let Some(den) = grid {
        let s1 = simplex_grid(a.col_count(), den).iter().any(|x| a.apply(x).iter().all(|v| *v < zero));
        let s2 = simplex_grid(a.row_count(), den).iter().any(|v| a.apply_transpose(v).iter().all(|x| *x >= zero));
        ensure!(s1 != s2 || (!s1 && !s2), "grid oracle found both systems solvable");
        if s1 || s2 {
            ensure!(first == s1, "solver says system {} but grid says system {}", if first { 1 } else { 2 }, if s1 { 1 } else { 2 });
        } else {
            return Err("grid oracle found no solution for either system".into());
        }
    }
    Ok(())
}

/// Exhaustive `d ∈ F₁(x̄) ⇔` some feasible point on the ray improves, on
/// every feasible point of a random finite problem.
pub fn descent_iff(seed: u64) -> Check {
    let mut rng = rng(seed);
    let p = finite_problem(&mut rng);
    let cfg = ConeConfig::default();
    for x in p.feasible_points().unwrap() {
        let a = analyze(&p, &x, &cfg).map_err(|e| e.to_string())?;
        let f1 = a.set(SetKind::DescentF1);
        for d in rays_to_domain(&p, &x) {
            let brute = is_global_descent(&p, &x, &d);
            let value = objective_epiderivative(&p, &x, &d, &cfg.estimator);
            let negative = value.as_ref().is_ok_and(|v| v.value.is_negative_tol(0.0));
            ensure!(negative == brute, "f^r sign disagrees with enumeration at {x:?} along {d:?}");
            ensure!(f1.contains(&d) == brute, "F1 membership disagrees at {x:?} along {d:?}");
            ensure!(f1.contains(&d.scaled(&q(3))) == brute, "F1 not scale invariant at {x:?} along {d:?}");
        }
    }
    Ok(())
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Geometric certificate against brute-force minimality at every feasible
/// point; at certified points, FJ must certify on every basis of `D(x̄)`
/// and KKT sufficiency must never certify a non-minimum.
pub fn certificates(seed: u64) -> Check {
    let mut rng = rng(seed);
    let p = finite_problem(&mut rng);
    let cfg = ConeConfig::default();
    for x in p.feasible_points().unwrap() {
        let cert = certify_global_min_geometric(&p, &x, &cfg).map_err(|e| e.to_string())?;
        let is_min = is_brute_force_min(&p, &x);
        ensure!(cert.status != Status::Inconclusive, "inconclusive on a finite domain at {x:?}");
        ensure!((cert.status == Status::Certified) == is_min, "geometric {:?} but brute-force minimum is {is_min} at {x:?}", cert.status);
        if cert.status == Status::Certified {
            let a = analyze(&p, &x, &cfg).map_err(|e| e.to_string())?;
            let gens = a.set(SetKind::FeasibleD).directions;
            let k = rank(&gens.iter().map(|d| d.0.clone()).collect::<Vec<_>>());
            for subset in k_subsets(gens.len(), k) {
                let basis: Vec<Direction> = subset.iter().map(|&i| gens[i].clone()).collect();
                if !linearly_independent(&basis.iter().map(|d| d.0.clone()).collect::<Vec<_>>()) {
                    continue;
                }
                let fj = check_fj_necessary(&p, &x, &basis, &cfg.estimator, &FjOptions::default()).map_err(|e| e.to_string())?;
                ensure!(fj.status == Status::Certified, "FJ {:?} on basis {basis:?} at certified {x:?}", fj.status);
            }
        }
        let kkt = check_kkt_sufficient(&p, &x, KktMode::All, &SufficiencyConfig::default()).map_err(|e| e.to_string())?;
        ensure!(kkt.status != Status::Certified || is_min, "KKT certified a non-minimum at {x:?}");
    }
    Ok(())
}

/// Descent from a random feasible start reaches a brute-force minimum in fewer than |S| moves.
pub fn finite_descent(seed: u64) -> Check {
    let mut rng = rng(seed);
    let p = finite_problem(&mut rng);
    let s = p.feasible_points().unwrap();
    let x0 = s[rng.gen_range(0..s.len())].clone();
    let t = solve(&p, &x0, &DescentConfig::default()).map_err(|e| e.to_string())?;
    ensure!(t.status == TrajectoryStatus::Converged, "status {:?}", t.status);
    ensure!(t.moves() < s.len(), "{} moves on {} feasible points", t.moves(), s.len());
    for w in t.points.windows(2) {
        ensure!(w[1].value < w[0].value, "objective did not decrease");
    }
    ensure!(t.certificate.status == Status::Certified, "final certificate {:?}", t.certificate.status);
    ensure!(is_brute_force_min(&p, t.final_point()), "final point is not a minimum");
    Ok(())
}
