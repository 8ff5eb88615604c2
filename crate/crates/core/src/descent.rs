//! Global descent loop: follow a feasible ray with negative restricted
//! epiderivative to the best feasible point on it, until none is left.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::certificates::{geometric_from, Certificate};
use crate::cones::{analyze, ConeAnalysis, ConeConfig, EpiEntry};
use crate::error::{Error, Result};
use crate::number::{dyadic, Number, Q};
use crate::point::{Direction, Point};
use crate::problem::{Problem, RaySteps};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    pub cones: ConeConfig,
    pub max_iterations: usize,
    /// Binary digits kept when snapping a float step to a rational.
    pub step_bits: u32,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            cones: ConeConfig { samples: Some(512), ..ConeConfig::default() },
            max_iterations: 1000,
            step_bits: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentDirection {
    pub direction: Direction,
    pub epiderivative: EpiEntry,
}

fn compare_entries(a: &EpiEntry, b: &EpiEntry) -> Ordering {
    match (a, b) {
        (EpiEntry::Divergent { .. }, EpiEntry::Divergent { .. }) => Ordering::Equal,
        (EpiEntry::Divergent { .. }, _) => Ordering::Less,
        (_, EpiEntry::Divergent { .. }) => Ordering::Greater,
        (EpiEntry::Value(x), EpiEntry::Value(y)) => match (&x.value, &y.value) {
            (Number::Exact(p), Number::Exact(q)) => p.cmp(q),
            (u, v) => u.to_f64().partial_cmp(&v.to_f64()).unwrap_or(Ordering::Equal),
        },
        (EpiEntry::Undefined, EpiEntry::Undefined) => Ordering::Equal,
        (EpiEntry::Undefined, _) => Ordering::Greater,
        (_, EpiEntry::Undefined) => Ordering::Less,
    }
}

/// Most negative feasible descent ray in a precomputed analysis; the first
/// in candidate order wins ties.
pub fn descent_from(a: &ConeAnalysis) -> Option<DescentDirection> {
    let mut best: Option<&crate::cones::DirectionRecord> = None;
    for r in a.records.iter().filter(|r| r.feasible && r.objective.sign(a.tolerance) == Ordering::Less) {
        if best.is_none_or(|b| compare_entries(&r.objective, &b.objective) == Ordering::Less) {
            best = Some(r);
        }
    }
    best.map(|r| DescentDirection { direction: r.direction.clone(), epiderivative: r.objective.clone() })
}

pub fn find_descent_direction(p: &Problem, xbar: &Point, cfg: &DescentConfig) -> Result<Option<DescentDirection>> {
    Ok(descent_from(&analyze(p, xbar, &cfg.cones)?))
}

fn improves(p: &Problem, candidate: &Point, f_bar: &Number, tol: f64) -> bool {
    if !p.is_feasible(candidate) {
        return false;
    }
    match (p.objective_value(candidate), f_bar) {
        (Number::Exact(a), Number::Exact(b)) => a < *b,
        (a, b) => a.to_f64() < b.to_f64() - tol,
    }
}

/// Best feasible point on the ray (global line search), strictly better than `x̄`.
pub fn step(p: &Problem, xbar: &Point, d: &Direction, cfg: &DescentConfig) -> Result<Point> {
    p.require_feasible(xbar)?;
    p.check_direction(d)?;
    let f_bar = p.objective_value(xbar);
    let tol = cfg.cones.estimator.tolerance;
    if p.domain.is_finite() {
        let mut best: Option<(Number, Point)> = None;
        for (_, x) in p.domain.points_on_ray(xbar, d) {
            if !p.satisfies_constraints(&x) {
                continue;
            }
            let v = p.objective_value(&x);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, x));
            }
        }
        return match best {
            Some((_, x)) if improves(p, &x, &f_bar, tol) => Ok(x),
            _ => Err(Error::NoImprovement),
        };
    }
    let upper = match p.domain.ray_steps(xbar, d) {
        RaySteps::Empty => return Err(Error::NoImprovement),
        RaySteps::Interval { upper } => upper,
    };
    let (xf, df) = (xbar.to_f64(), d.to_f64());
    let mut ranked: Vec<(f64, Q)> = Vec::new();
    let grid = cfg.cones.estimator.t_grid(upper.as_ref().map(crate::number::to_f64));
    let at = |t: f64| -> Vec<f64> { xf.iter().zip(&df).map(|(a, b)| a + t * b).collect() };
    let phi = |t: f64| -> f64 {
        let x = at(t);
        if p.is_feasible_f64(&x) {
            p.objective.eval_f64(&x)
        } else {
            f64::INFINITY
        }
    };
    let values: Vec<f64> = grid.iter().map(|&t| phi(t)).collect();
    let mut ts: Vec<f64> = grid.clone();
    // feasibility boundaries between neighbouring grid points
    for i in 1..grid.len() {
        if values[i - 1].is_finite() != values[i].is_finite() {
            let (mut lo, mut hi) = (grid[i - 1], grid[i]);
            let inside_lo = values[i - 1].is_finite();
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if phi(mid).is_finite() == inside_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            ts.push(if inside_lo { lo } else { hi });
        }
    }
    // golden-section refinement around the best grid point
    if let Some(k) = (0..grid.len()).filter(|&i| values[i].is_finite()).min_by(|&i, &j| values[i].total_cmp(&values[j])) {
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c = b - r * (b - a);
            let e = a + r * (b - a);
            if phi(c) <= phi(e) {
                b = e;
            } else {
                a = c;
            }
        }
        ts.push(0.5 * (a + b));
    }
    for t in ts {
        let v = phi(t);
        if !v.is_finite() {
            continue;
        }
        if let Some(tq) = dyadic(t, cfg.step_bits).filter(|t| *t > Q::from_integer(0.into())) {
            ranked.push((v, tq));
        }
    }
    if let Some(u) = upper {
        ranked.push((p.objective.eval_f64(&xbar.along(&u, d).to_f64()), u));
    }
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(&b.1)));
    for (_, t) in ranked {
        let x = xbar.along(&t, d);
        if improves(p, &x, &f_bar, tol) {
            return Ok(x);
        }
    }
    Err(Error::NoImprovement)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryStatus {
    /// No descent direction left among the candidates.
    Converged,
    BudgetExhausted,
    /// A descent direction was found but no better point on its ray.
    StepFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub point: Point,
    pub value: Number,
    /// Direction taken from this point, if any.
    pub direction: Option<DescentDirection>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub status: TrajectoryStatus,
    /// Starting point first; every later value is strictly smaller.
    pub points: Vec<TrajectoryPoint>,
    pub certificate: Certificate,
}

impl Trajectory {
    pub fn moves(&self) -> usize {
        self.points.len() - 1
    }

    pub fn final_point(&self) -> &Point {
        &self.points.last().expect("trajectory starts with x0").point
    }
}

pub fn solve(p: &Problem, x0: &Point, cfg: &DescentConfig) -> Result<Trajectory> {
    p.require_feasible(x0)?;
    let mut x = x0.clone();
    let mut points = vec![TrajectoryPoint { point: x.clone(), value: p.objective_value(&x), direction: None }];
    loop {
        let a = analyze(p, &x, &cfg.cones)?;
        let Some(dir) = descent_from(&a) else {
            return Ok(Trajectory { status: TrajectoryStatus::Converged, points, certificate: geometric_from(&a) });
        };
        if points.len() > cfg.max_iterations {
            return Ok(Trajectory { status: TrajectoryStatus::BudgetExhausted, points, certificate: geometric_from(&a) });
        }
        match step(p, &x, &dir.direction, cfg) {
            Ok(next) => {
                points.last_mut().expect("nonempty").direction = Some(dir);
                x = next;
                points.push(TrajectoryPoint { point: x.clone(), value: p.objective_value(&x), direction: None });
            }
            Err(Error::NoImprovement) => {
                points.last_mut().expect("nonempty").direction = Some(dir);
                return Ok(Trajectory { status: TrajectoryStatus::StepFailed, points, certificate: geometric_from(&a) });
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::Status;
    use crate::expr::Expression;
    use crate::number::q;
    use crate::problem::Domain;

    fn example1() -> Problem {
        let pts = [[0, 4], [4, 0], [4, 4], [1, 2], [2, 1]].iter().map(|p| Point::from_ints(p)).collect();
        Problem::new(
            2,
            Expression::affine(vec![q(-2), q(1)], q(0)),
            vec![Expression::affine(vec![q(1), q(1)], q(-3))],
            Domain::points(pts).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn example1_descent() {
        let p = example1();
        let cfg = DescentConfig::default();
        let d = find_descent_direction(&p, &Point::from_ints(&[1, 2]), &cfg).unwrap().unwrap();
        assert_eq!(d.direction, Direction::from_ints(&[1, -1]));
        assert!(find_descent_direction(&p, &Point::from_ints(&[2, 1]), &cfg).unwrap().is_none());
        assert_eq!(step(&p, &Point::from_ints(&[1, 2]), &d.direction, &cfg).unwrap(), Point::from_ints(&[2, 1]));
        let t = solve(&p, &Point::from_ints(&[1, 2]), &cfg).unwrap();
        assert_eq!(t.points.iter().map(|p| p.point.clone()).collect::<Vec<_>>(), vec![Point::from_ints(&[1, 2]), Point::from_ints(&[2, 1])]);
        assert_eq!(t.certificate.status, Status::Certified);
        let t = solve(&p, &Point::from_ints(&[2, 1]), &cfg).unwrap();
        assert_eq!(t.moves(), 0);
    }

    #[test]
    fn linear_step_hits_box_boundary() {
        let dom = Domain::Box { lower: vec![Some(q(0)), Some(q(0))], upper: vec![Some(q(4)), Some(q(4))] };
        let p = Problem::new(2, Expression::affine(vec![q(1), q(1)], q(0)), vec![], dom).unwrap();
        let x = step(&p, &Point::from_ints(&[2, 3]), &Direction::from_ints(&[-1, -1]), &DescentConfig::default()).unwrap();
        assert_eq!(x, Point::from_ints(&[0, 1]));
    }

    #[test]
    fn constant_objective_has_no_descent() {
        let p = Problem::new(1, Expression::constant(q(5)), vec![], Domain::All).unwrap();
        assert!(find_descent_direction(&p, &Point::from_ints(&[3]), &DescentConfig::default()).unwrap().is_none());
    }

    #[test]
    fn non_descent_ray_reports_no_improvement() {
        let p = Problem::new(1, Expression::var(0), vec![], Domain::All).unwrap();
        let err = step(&p, &Point::from_ints(&[0]), &Direction::from_ints(&[1]), &DescentConfig::default());
        assert_eq!(err, Err(Error::NoImprovement));
    }
}
