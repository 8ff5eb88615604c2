#![allow(dead_code)]

pub mod checks;

use radepi_core::cones::ConeConfig;
use radepi_core::expr::AffineForm;
use radepi_core::number::{q, q_frac};
use radepi_core::problem::RaySteps;
use radepi_core::{Direction, Domain, Expression, NormKind, Number, Point, Problem, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn int_vec(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Vec<Q> {
    (0..n).map(|_| q(rng.gen_range(lo..=hi))).collect()
}

pub fn nonzero_direction(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Direction {
    loop {
        let d = Direction::new(int_vec(rng, n, lo, hi));
        if !d.is_zero() {
            return d;
        }
    }
}

/// Point with coordinates `k/4`, `k ∈ [4 lo, 4 hi]`.
pub fn quarter_point(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Point {
    Point::new((0..n).map(|_| q_frac(rng.gen_range(4 * lo..=4 * hi), 4)).collect())
}

pub fn affine_form(rng: &mut ChaCha8Rng, n: usize) -> AffineForm {
    AffineForm::new(int_vec(rng, n, -5, 5), q(rng.gen_range(-5..=5)))
}

pub fn min_affine_forms(rng: &mut ChaCha8Rng, n: usize) -> Vec<AffineForm> {
    let k = rng.gen_range(1..=5);
    (0..k).map(|_| affine_form(rng, n)).collect()
}

/// `⟨a, x⟩ − c‖x − b‖ + β` with `c ∈ {1, …, 4}`.
pub fn norm_linear(rng: &mut ChaCha8Rng, n: usize) -> (Expression, Vec<Q>, Q, NormKind) {
    let a = int_vec(rng, n, -3, 3);
    let c = q(rng.gen_range(1..=4));
    let b = int_vec(rng, n, -2, 2);
    let norm = if rng.gen_bool(0.5) { NormKind::Euclidean } else { NormKind::Max };
    let e = Expression::sum(vec![
        Expression::affine(a.clone(), q(rng.gen_range(-3..=3))),
        Expression::scale(-c.clone(), Expression::norm(b, norm)),
    ]);
    (e, a, c, norm)
}

pub fn max_min_affine(rng: &mut ChaCha8Rng, n: usize) -> Expression {
    let groups = rng.gen_range(1..=3);
    Expression::max((0..groups).map(|_| Expression::min_affine(&min_affine_forms(rng, n))).collect())
}

/// Random finite-domain problem: `n ≤ 3`, at most 20 integer points in
/// `[-3, 3]^n`, min-affine objective and 0 to 2 min-affine constraints.
/// Resampled until the feasible set is nonempty.
pub fn finite_problem(rng: &mut ChaCha8Rng) -> Problem {
    loop {
        let n = rng.gen_range(1..=3);
        let count = rng.gen_range(1..=20);
        let pts: Vec<Point> = (0..count).map(|_| Point::new(int_vec(rng, n, -3, 3))).collect();
        let objective = Expression::min_affine(&min_affine_forms(rng, n));
        let m = rng.gen_range(0..=2);
        let constraints = (0..m)
            .map(|_| {
                let k = rng.gen_range(1..=2);
                Expression::min_affine(&(0..k).map(|_| affine_form(rng, n)).collect::<Vec<_>>())
            })
            .collect();
        let p = Problem::new(n, objective, constraints, Domain::points(pts).unwrap()).unwrap();
        if p.feasible_points().is_some_and(|s| !s.is_empty()) {
            return p;
        }
    }
}

/// Every ray from `x̄` through another domain point.
pub fn rays_to_domain(p: &Problem, xbar: &Point) -> Vec<Direction> {
    let Domain::Points { points } = &p.domain else { panic!("finite domain expected") };
    let mut out: Vec<Direction> = Vec::new();
    for y in points {
        if let Some(d) = xbar.direction_to(y) {
            let d = d.canonical().unwrap();
            if !out.iter().any(|e| e.same_ray(&d)) {
                out.push(d);
            }
        }
    }
    out
}

/// Whether some feasible point on the ray improves on `f(x̄)`.
pub fn is_global_descent(p: &Problem, xbar: &Point, d: &Direction) -> bool {
    let f = p.objective_value(xbar);
    p.domain
        .points_on_ray(xbar, d)
        .into_iter()
        .any(|(_, y)| p.is_feasible(&y) && p.objective_value(&y) < f)
}

pub fn is_brute_force_min(p: &Problem, xbar: &Point) -> bool {
    p.brute_force_minimum().is_some_and(|m| p.objective_value(xbar) == m)
}

pub fn finite_cone_config() -> ConeConfig {
    ConeConfig::default()
}

/// Dense oracle for `inf_t (f(x̄+td) − f(x̄))/t` over a uniform grid on `(0, T]`.
pub fn ray_oracle(f: &Expression, xbar: &Point, d: &Direction, upper: f64, points: usize, keep: impl Fn(&[f64]) -> bool) -> f64 {
    let (x, dv) = (xbar.to_f64(), d.to_f64());
    let fbar = f.eval_f64(&x);
    let mut best = f64::INFINITY;
    let mut y = vec![0.0; x.len()];
    for k in 1..=points {
        let t = upper * k as f64 / points as f64;
        for i in 0..x.len() {
            y[i] = x[i] + t * dv[i];
        }
        if keep(&y) {
            best = best.min((f.eval_f64(&y) - fbar) / t);
        }
    }
    best
}

pub fn ray_upper(p: &Problem, xbar: &Point, d: &Direction) -> Option<f64> {
    match p.domain.ray_steps(xbar, d) {
        RaySteps::Interval { upper } => upper.map(|u| radepi_core::number::to_f64(&u)),
        RaySteps::Empty => None,
    }
}

pub fn float(n: &Number) -> f64 {
    n.to_f64()
}
