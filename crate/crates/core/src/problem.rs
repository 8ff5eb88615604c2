//! Problem data: objective, `g_i(x) ≤ 0` constraints and a ground domain.

use std::cmp::Ordering;

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::number::{serde_rational_opt_vec, to_f64, Number, Q};
use crate::point::{Direction, Point};

/// Ground set `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Domain {
    /// All of `R^n`.
    All,
    /// Per-coordinate bounds; `null` means unbounded on that side.
    Box {
        #[serde(with = "serde_rational_opt_vec")]
        lower: Vec<Option<Q>>,
        #[serde(with = "serde_rational_opt_vec")]
        upper: Vec<Option<Q>>,
    },
    /// An explicit, nonempty, duplicate-free list of points.
    Points { points: Vec<Point> },
}

/// Admissible steps `{t > 0 : x + t d ∈ X}` for a convex `X`.
#[derive(Clone, Debug, PartialEq)]
pub enum RaySteps {
    Empty,
    /// `(0, upper]`, or `(0, ∞)` when `upper` is `None`.
    Interval { upper: Option<Q> },
}

impl Domain {
    pub fn nonnegative_orthant(n: usize) -> Self {
        Domain::Box { lower: vec![Some(Q::zero()); n], upper: vec![None; n] }
    }

    /// Builds a point-set domain, removing duplicates while keeping order.
    pub fn points(points: Vec<Point>) -> Result<Self> {
        let dom = Domain::Points { points: dedup(points) };
        Ok(dom)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Domain::Points { .. })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Domain::All => Ok(()),
            Domain::Box { lower, upper } => {
                if lower.len() != n || upper.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: lower.len().max(upper.len()) });
                }
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if let (Some(l), Some(u)) = (l, u) {
                        if l > u {
                            return Err(Error::InvalidDomain(format!("box bound {i}: lower > upper")));
                        }
                    }
                }
                Ok(())
            }
            Domain::Points { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidDomain("point set is empty".into()));
                }
                for (i, p) in points.iter().enumerate() {
                    if p.dim() != n {
                        return Err(Error::InvalidDomain(format!(
                            "point {i} has dimension {}, expected {n}",
                            p.dim()
                        )));
                    }
                }
                if dedup(points.clone()).len() != points.len() {
                    return Err(Error::InvalidDomain("point set contains duplicates".into()));
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Domain::All => true,
            Domain::Box { lower, upper } => x.0.iter().zip(lower.iter().zip(upper)).all(|(xi, (l, u))| {
                l.as_ref().is_none_or(|l| xi >= l) && u.as_ref().is_none_or(|u| xi <= u)
            }),
            Domain::Points { points } => points.contains(x),
        }
    }

    pub fn contains_f64(&self, x: &[f64]) -> bool {
        const SLACK: f64 = 1e-12;
        match self {
            Domain::All => true,
            Domain::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(xi, (l, u))| {
                l.as_ref().is_none_or(|l| *xi >= to_f64(l) - SLACK) && u.as_ref().is_none_or(|u| *xi <= to_f64(u) + SLACK)
            }),
            Domain::Points { points } => points.iter().any(|p| p.to_f64() == x),
        }
    }

    /// Admissible step interval along `d` for the convex domains. `x` must
    /// lie in the box.
    pub fn ray_steps(&self, x: &Point, d: &Direction) -> RaySteps {
        match self {
            Domain::All => RaySteps::Interval { upper: None },
            Domain::Box { lower, upper } => {
                let mut t_max: Option<Q> = None;
                for ((xi, di), (l, u)) in x.0.iter().zip(&d.0).zip(lower.iter().zip(upper)) {
                    let bound = match di.cmp(&Q::zero()) {
                        Ordering::Greater => u.as_ref().map(|u| (u - xi) / di),
                        Ordering::Less => l.as_ref().map(|l| (l - xi) / di),
                        Ordering::Equal => None,
                    };
                    if let Some(b) = bound {
                        t_max = Some(match t_max {
                            Some(t) if t < b => t,
                            _ => b,
                        });
                    }
                }
                match t_max {
                    Some(t) if !t.is_positive() => RaySteps::Empty,
                    upper => RaySteps::Interval { upper },
                }
            }
            Domain::Points { .. } => unreachable!("finite domains are enumerated, not intervals"),
        }
    }

    /// Points of a finite domain on the open ray `x + t d`, with their steps.
    pub fn points_on_ray(&self, x: &Point, d: &Direction) -> Vec<(Q, Point)> {
        match self {
            Domain::Points { points } => points
                .iter()
                .filter_map(|p| x.ray_parameter(d, p).map(|t| (t, p.clone())))
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn dedup(points: Vec<Point>) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// `minimize f(x) subject to g_i(x) ≤ 0, x ∈ X`.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub dim: usize,
    pub objective: Expression,
    pub constraints: Vec<Expression>,
    pub domain: Domain,
}

/// Absolute slack for constraint values that are not exact.
pub const FLOAT_FEASIBILITY_TOL: f64 = 1e-9;

impl Problem {
    pub fn new(dim: usize, objective: Expression, constraints: Vec<Expression>, domain: Domain) -> Result<Self> {
        objective.validate(dim)?;
        for g in &constraints {
            g.validate(dim)?;
        }
        domain.validate(dim)?;
        Ok(Problem { dim, objective, constraints, domain })
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.dim() });
        }
        Ok(())
    }

    pub fn check_direction(&self, d: &Direction) -> Result<()> {
        if d.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: d.dim() });
        }
        if d.is_zero() {
            return Err(Error::ZeroDirection);
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &Point) -> Number {
        self.objective.eval(&x.0)
    }

    pub fn constraint_values(&self, x: &Point) -> Vec<Number> {
        self.constraints.iter().map(|g| g.eval(&x.0)).collect()
    }

    /// `g_i(x) ≤ 0` for all `i`, exact for exact values.
    pub fn satisfies_constraints(&self, x: &Point) -> bool {
        self.constraints
            .iter()
            .all(|g| g.eval(&x.0).sign(FLOAT_FEASIBILITY_TOL) != Ordering::Greater)
    }

    pub fn is_feasible(&self, x: &Point) -> bool {
        x.dim() == self.dim && self.domain.contains(x) && self.satisfies_constraints(x)
    }

    pub fn is_feasible_f64(&self, x: &[f64]) -> bool {
        self.domain.contains_f64(x) && self.constraints.iter().all(|g| g.eval_f64(x) <= FLOAT_FEASIBILITY_TOL)
    }

    pub fn require_feasible(&self, x: &Point) -> Result<()> {
        self.check_point(x)?;
        if self.is_feasible(x) {
            Ok(())
        } else {
            Err(Error::Infeasible(x.to_string()))
        }
    }

    /// The feasible set `S` of a finite-domain problem.
    pub fn feasible_points(&self) -> Option<Vec<Point>> {
        match &self.domain {
            Domain::Points { points } => Some(points.iter().filter(|p| self.satisfies_constraints(p)).cloned().collect()),
            _ => None,
        }
    }

    /// Brute-force minimum of the objective over a finite feasible set.
    pub fn brute_force_minimum(&self) -> Option<Number> {
        self.feasible_points()?
            .iter()
            .map(|p| self.objective_value(p))
            .reduce(Number::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::q;

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
    fn example1_feasible_set_has_two_points() {
        let p = example1();
        assert_eq!(p.feasible_points().unwrap(), vec![Point::from_ints(&[1, 2]), Point::from_ints(&[2, 1])]);
        assert_eq!(p.brute_force_minimum().unwrap(), Number::Exact(q(-3)));
    }

    #[test]
    fn box_ray_steps() {
        let dom = Domain::nonnegative_orthant(2);
        let x = Point::from_ints(&[3, 2]);
        assert_eq!(
            dom.ray_steps(&x, &Direction::from_ints(&[1, -1])),
            RaySteps::Interval { upper: Some(q(2)) }
        );
        assert_eq!(dom.ray_steps(&x, &Direction::from_ints(&[1, 1])), RaySteps::Interval { upper: None });
        let corner = Point::from_ints(&[0, 2]);
        assert_eq!(dom.ray_steps(&corner, &Direction::from_ints(&[-1, 0])), RaySteps::Empty);
    }

    #[test]
    fn rejects_malformed_domains() {
        let bad = Domain::Box { lower: vec![Some(q(2))], upper: vec![Some(q(1))] };
        assert!(bad.validate(1).is_err());
        assert!(Domain::Points { points: vec![] }.validate(1).is_err());
        let dup = Domain::Points { points: vec![Point::from_ints(&[1]), Point::from_ints(&[1])] };
        assert!(dup.validate(1).is_err());
        assert_eq!(Domain::points(vec![Point::from_ints(&[1]), Point::from_ints(&[1])]).unwrap(),
            Domain::Points { points: vec![Point::from_ints(&[1])] });
    }
}
