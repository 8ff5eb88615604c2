//! Radial epiderivatives `f^r(x; d) = inf_{t>0} liminf_{u→d} (f(x+tu) − f(x))/t`
//! and their restrictions to a ground set.
//!
//! Three routes, in dispatch order:
//!
//! 1. finite domains are enumerated exactly over the points on the ray;
//! 2. recognised structures use closed-form rules (affine, min-affine,
//!    negative-norm-linear, convex);
//! 3. everything else goes through a sampling estimator over a log-spaced
//!    step grid with a small cloud of perturbed directions.
//!
//! On a bounded ray `(0, T]` the concave rules (min-affine,
//! negative-norm-linear) are evaluated at the ray end, since the difference
//! quotient of a concave function is nonincreasing in `t`. The convex rule is
//! the one-sided directional derivative, since there the quotient is
//! nondecreasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{AffineForm, Expression, NormKind, RealFunction, Structure};
use crate::number::{to_f64, Number, Q};
use crate::point::{dot, norm2_f64, Direction, Point};
use crate::problem::{Domain, Problem, RaySteps};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub t_count: usize,
    pub perturbations: usize,
    pub perturbation_radius: f64,
    pub divergence_floor: f64,
    /// Sign threshold applied to inexact values.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            t_min: 1e-8,
            t_max: 1e4,
            t_count: 512,
            perturbations: 8,
            perturbation_radius: 1e-6,
            divergence_floor: -1e12,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0) {
            return Err(Error::InvalidConfig("t_min must be positive".into()));
        }
        if !(self.t_max >= self.t_min) {
            return Err(Error::InvalidConfig("t_max must be at least t_min".into()));
        }
        if self.t_count < 2 {
            return Err(Error::InvalidConfig("t_count must be at least 2".into()));
        }
        if !(self.perturbation_radius >= 0.0) {
            return Err(Error::InvalidConfig("perturbation_radius must be nonnegative".into()));
        }
        Ok(())
    }

    /// Log-spaced steps in `[t_min, min(t_max, upper)]`, ending exactly at
    /// `upper` when the ray is bounded inside the grid range.
    pub fn t_grid(&self, upper: Option<f64>) -> Vec<f64> {
        let hi = upper.map_or(self.t_max, |u| u.min(self.t_max));
        if hi < self.t_min {
            return vec![hi];
        }
        let (a, b) = (self.t_min.ln(), hi.ln());
        let mut grid: Vec<f64> = (0..self.t_count)
            .map(|k| (a + (b - a) * k as f64 / (self.t_count - 1) as f64).exp())
            .collect();
        if let Some(u) = upper {
            if u <= self.t_max {
                *grid.last_mut().expect("t_count >= 2") = u;
            }
        }
        grid
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Affine,
    MinAffine,
    NegativeNormLinear,
    Convex,
    /// Min-affine on a bounded ray, quotient taken at the ray end.
    MinAffineRayEnd,
    /// Negative-norm-linear on a bounded ray, quotient taken at the ray end.
    NegativeNormLinearRayEnd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    ExactRule { rule: Rule },
    FiniteDomainEnumeration { points_on_ray: usize },
    Estimator { t_min: f64, t_max: f64, samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiderivativeValue {
    pub value: Number,
    #[serde(flatten)]
    pub method: Method,
}

impl EpiderivativeValue {
    fn rule(value: Number, rule: Rule) -> Self {
        EpiderivativeValue { value, method: Method::ExactRule { rule } }
    }

    /// Exact methods yield exact values whenever the data are rational and
    /// no irrational norm is involved.
    pub fn is_estimate(&self) -> bool {
        matches!(self.method, Method::Estimator { .. })
    }

    pub fn is_exact(&self) -> bool {
        !self.is_estimate() && self.value.is_exact()
    }
}

/// `f^{r_X}(x; d)` for an expression over a ground set `X`.
pub fn radial_epiderivative(
    e: &Expression,
    xbar: &Point,
    d: &Direction,
    dom: &Domain,
    cfg: &EstimatorConfig,
) -> Result<EpiderivativeValue> {
    e.validate(xbar.dim())?;
    if d.dim() != xbar.dim() {
        return Err(Error::DimensionMismatch { expected: xbar.dim(), found: d.dim() });
    }
    if d.is_zero() {
        return Err(Error::ZeroDirection);
    }
    if let Domain::Points { .. } = dom {
        return enumerate_ray(e, xbar, d, &dom.points_on_ray(xbar, d));
    }
    let upper = match dom.ray_steps(xbar, d) {
        RaySteps::Empty => return Err(Error::UndefinedAlongRay),
        RaySteps::Interval { upper } => upper,
    };
    match e.classify() {
        Structure::Affine => {
            let form = e.affine_form().expect("affine tag implies an affine form");
            Ok(EpiderivativeValue::rule(Number::Exact(form.slope(&d.0)), Rule::Affine))
        }
        Structure::MinAffine => match upper {
            None => {
                let forms = e.min_affine_pieces().expect("min-affine tag implies pieces");
                Ok(radial_epiderivative_min_affine(&forms, xbar, d))
            }
            Some(t) => Ok(EpiderivativeValue::rule(quotient(e, xbar, d, &t), Rule::MinAffineRayEnd)),
        },
        Structure::NegativeNormLinear => match upper {
            None => {
                let form = e.negative_norm_linear_form().expect("tag implies form");
                Ok(radial_epiderivative_norm_linear(&form.linear.coeffs, &form.weight, form.norm, xbar, d))
            }
            Some(t) => Ok(EpiderivativeValue::rule(quotient(e, xbar, d, &t), Rule::NegativeNormLinearRayEnd)),
        },
        Structure::Convex => Ok(radial_epiderivative_convex(e, xbar, d)),
        Structure::MaxMinAffine | Structure::General => {
            let upper_f = upper.as_ref().map(to_f64);
            estimate(e, &xbar.to_f64(), &d.to_f64(), upper_f, None, cfg)
        }
    }
}

/// Exact infimum of the difference quotient over finitely many steps.
fn enumerate_ray(e: &Expression, xbar: &Point, d: &Direction, on_ray: &[(Q, Point)]) -> Result<EpiderivativeValue> {
    if on_ray.is_empty() {
        return Err(Error::UndefinedAlongRay);
    }
    let base = e.eval(&xbar.0);
    let value = on_ray
        .iter()
        .map(|(t, p)| (e.eval(&p.0) - base.clone()) / Number::Exact(t.clone()))
        .reduce(Number::min)
        .expect("nonempty");
    let _ = d;
    Ok(EpiderivativeValue { value, method: Method::FiniteDomainEnumeration { points_on_ray: on_ray.len() } })
}

fn quotient(e: &Expression, xbar: &Point, d: &Direction, t: &Q) -> Number {
    let moved = xbar.along(t, d);
    (e.eval(&moved.0) - e.eval(&xbar.0)) / Number::Exact(t.clone())
}

/// Convex functions: `f^r(x; d) = f'(x; d)`.
pub fn radial_epiderivative_convex(e: &Expression, xbar: &Point, d: &Direction) -> EpiderivativeValue {
    EpiderivativeValue::rule(e.directional_derivative(&xbar.0, &d.0), Rule::Convex)
}

/// `f(x) = ⟨a, x⟩ − c‖x − b‖ + β` has `f^r(x; d) = ⟨a, d⟩ − c‖d‖` at every `x`.
pub fn radial_epiderivative_norm_linear(
    a: &[Q],
    c: &Q,
    norm: NormKind,
    xbar: &Point,
    d: &Direction,
) -> EpiderivativeValue {
    let _ = xbar;
    let length = match norm {
        NormKind::Euclidean => d.euclidean_norm(),
        NormKind::Max => Number::Exact(d.max_norm()),
    };
    let value = Number::Exact(dot(a, &d.0)) - Number::Exact(c.clone()) * length;
    EpiderivativeValue::rule(value, Rule::NegativeNormLinear)
}

/// `g(x) = min_j ⟨a^j, x⟩ + α_j` has `g^r(x; d) = min_j ⟨a^j, d⟩` at every `x`.
pub fn radial_epiderivative_min_affine(forms: &[AffineForm], xbar: &Point, d: &Direction) -> EpiderivativeValue {
    let _ = xbar;
    let value = forms
        .iter()
        .map(|f| f.slope(&d.0))
        .min()
        .expect("min-affine forms are nonempty");
    EpiderivativeValue::rule(Number::Exact(value), Rule::MinAffine)
}

/// Deterministic unit vectors used for the `u → d` perturbations.
fn perturbation_cloud(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c10d);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm2_f64(&w);
        if len > 1e-3 {
            out.push(w.into_iter().map(|v| v / len).collect());
        }
    }
    out
}

/// Sampling estimator of the (restricted) radial epiderivative.
///
/// Steps come from [`EstimatorConfig::t_grid`] clipped to `upper`; when
/// `admissible` is given, only steps whose point `x + t d` passes it are
/// used. The liminf over `u → d` is approximated by the minimum over `d`
/// and a cloud of perturbed directions.
pub fn estimate(
    f: &dyn RealFunction,
    xbar: &[f64],
    d: &[f64],
    upper: Option<f64>,
    admissible: Option<&dyn Fn(&[f64]) -> bool>,
    cfg: &EstimatorConfig,
) -> Result<EpiderivativeValue> {
    cfg.validate()?;
    let n = xbar.len();
    let fbar = f.eval_f64(xbar);
    let grid = cfg.t_grid(upper);
    let dnorm = norm2_f64(d);
    let mut directions = vec![d.to_vec()];
    let radius = cfg.perturbation_radius * dnorm;
    if radius > 0.0 {
        for w in perturbation_cloud(n, cfg.perturbations, cfg.seed) {
            directions.push(d.iter().zip(&w).map(|(di, wi)| di + radius * wi).collect());
        }
    }
    let mut best = f64::INFINITY;
    let mut samples = 0;
    let mut x = vec![0.0; n];
    for &t in &grid {
        if let Some(ok) = admissible {
            for i in 0..n {
                x[i] = xbar[i] + t * d[i];
            }
            if !ok(&x) {
                continue;
            }
        }
        for u in &directions {
            for i in 0..n {
                x[i] = xbar[i] + t * u[i];
            }
            let q = (f.eval_f64(&x) - fbar) / t;
            if q.is_nan() {
                continue;
            }
            samples += 1;
            if q < cfg.divergence_floor {
                return Err(Error::NotEpidifferentiable { t, quotient: q });
            }
            best = best.min(q);
        }
    }
    if samples == 0 {
        return Err(Error::UndefinedAlongRay);
    }
    // Unbounded ray: the quotient tends to its limit like s + c/t, so a
    // Richardson step on the last two scales adds the t → ∞ sample.
    if upper.is_none() && admissible.is_none() && grid.len() >= 2 {
        let t = *grid.last().expect("nonempty grid");
        let at = |t: f64| -> f64 {
            let x: Vec<f64> = xbar.iter().zip(d).map(|(a, b)| a + t * b).collect();
            (f.eval_f64(&x) - fbar) / t
        };
        let tail = 2.0 * at(t) - at(0.5 * t);
        if tail.is_finite() {
            best = best.min(tail);
        }
    }
    Ok(EpiderivativeValue {
        value: Number::Float(best),
        method: Method::Estimator {
            t_min: grid[0],
            t_max: *grid.last().expect("nonempty grid"),
            samples,
        },
    })
}

/// Epiderivative of the objective restricted to the feasible set `S`.
///
/// Finite domains enumerate the feasible points on the ray; without
/// constraints `S = X` and the general dispatch applies; otherwise the
/// estimator is run over the steps whose points are feasible.
pub fn objective_epiderivative(
    p: &Problem,
    xbar: &Point,
    d: &Direction,
    cfg: &EstimatorConfig,
) -> Result<EpiderivativeValue> {
    p.check_point(xbar)?;
    p.check_direction(d)?;
    if let Domain::Points { .. } = p.domain {
        let on_ray: Vec<(Q, Point)> = p
            .domain
            .points_on_ray(xbar, d)
            .into_iter()
            .filter(|(_, pt)| p.satisfies_constraints(pt))
            .collect();
        return enumerate_ray(&p.objective, xbar, d, &on_ray);
    }
    if p.constraints.is_empty() {
        return radial_epiderivative(&p.objective, xbar, d, &p.domain, cfg);
    }
    let upper = match p.domain.ray_steps(xbar, d) {
        RaySteps::Empty => return Err(Error::UndefinedAlongRay),
        RaySteps::Interval { upper } => upper.as_ref().map(to_f64),
    };
    let feasible = |x: &[f64]| p.is_feasible_f64(x);
    estimate(&p.objective, &xbar.to_f64(), &d.to_f64(), upper, Some(&feasible), cfg)
}

/// `g_i^{r_X}(x; d)` for constraint `i`.
pub fn constraint_epiderivative(
    p: &Problem,
    i: usize,
    xbar: &Point,
    d: &Direction,
    cfg: &EstimatorConfig,
) -> Result<EpiderivativeValue> {
    p.check_point(xbar)?;
    p.check_direction(d)?;
    radial_epiderivative(&p.constraints[i], xbar, d, &p.domain, cfg)
}

/// Settings for the local (classical) derivative estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalConfig {
    /// Step for the one-sided directional derivative (Richardson-extrapolated).
    pub t_directional: f64,
    /// Steps for the subderivative liminf.
    pub t_small: Vec<f64>,
    /// Base-point offsets for the Clarke limsup.
    pub neighbourhood_radius: f64,
    pub neighbourhood_samples: usize,
    /// Steps for the Clarke limsup; must be well below the radius.
    pub t_clarke: Vec<f64>,
    pub perturbation_radius: f64,
    pub seed: u64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            t_directional: 1e-6,
            t_small: (0..16).map(|k| 1e-8 * 10f64.powf(2.0 * k as f64 / 15.0)).collect(),
            neighbourhood_radius: 1e-5,
            neighbourhood_samples: 64,
            t_clarke: vec![1e-8, 1e-9],
            perturbation_radius: 1e-7,
            seed: 0,
        }
    }
}

fn diff_quotient(f: &dyn RealFunction, y: &[f64], u: &[f64], t: f64) -> f64 {
    let moved: Vec<f64> = y.iter().zip(u).map(|(a, b)| a + t * b).collect();
    (f.eval_f64(&moved) - f.eval_f64(y)) / t
}

/// `f'(x; d) = lim_{t↓0} (f(x+td) − f(x))/t`, by Richardson extrapolation
/// of two small steps.
pub fn numeric_directional_derivative(f: &dyn RealFunction, xbar: &[f64], d: &[f64], cfg: &LocalConfig) -> f64 {
    let t = cfg.t_directional;
    2.0 * diff_quotient(f, xbar, d, t / 2.0) - diff_quotient(f, xbar, d, t)
}

/// Rockafellar's subderivative `df(x; d) = liminf_{t↓0, u→d} (f(x+tu) − f(x))/t`.
pub fn numeric_subderivative(f: &dyn RealFunction, xbar: &[f64], d: &[f64], cfg: &LocalConfig) -> f64 {
    let radius = cfg.perturbation_radius * norm2_f64(d).max(1.0);
    let mut directions = vec![d.to_vec()];
    for w in perturbation_cloud(d.len(), 8, cfg.seed) {
        directions.push(d.iter().zip(&w).map(|(di, wi)| di + radius * wi).collect());
    }
    cfg.t_small
        .iter()
        .flat_map(|&t| directions.iter().map(move |u| (t, u)))
        .map(|(t, u)| diff_quotient(f, xbar, u, t))
        .fold(f64::INFINITY, f64::min)
}

/// Clarke's generalized derivative `f°(x; d) = limsup_{y→x, t↓0} (f(y+td) − f(y))/t`.
pub fn numeric_clarke(f: &dyn RealFunction, xbar: &[f64], d: &[f64], cfg: &LocalConfig) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc1a4_4e);
    let n = xbar.len();
    let mut bases = vec![xbar.to_vec()];
    for k in 0..cfg.neighbourhood_samples {
        let r = cfg.neighbourhood_radius * (0.1 + 0.9 * (k as f64 + 1.0) / cfg.neighbourhood_samples as f64);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm2_f64(&w).max(1e-12);
        bases.push(xbar.iter().zip(&w).map(|(x, wi)| x + r * wi / len).collect());
        // Also straddle along ±d, where kinks crossing the ray sit.
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        bases.push(xbar.iter().zip(d).map(|(x, di)| x + sign * r * di).collect());
    }
    bases
        .iter()
        .flat_map(|y| cfg.t_clarke.iter().map(move |&t| (y, t)))
        .map(|(y, t)| diff_quotient(f, y, d, t))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Whether `a ≤ b` up to `tol` (exact comparison for exact values).
pub fn leq_tol(a: &Number, b: &Number, tol: f64) -> bool {
    match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => x <= y,
        _ => a.to_f64() <= b.to_f64() + tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::NormKind;
    use crate::number::{q, q_frac};

    fn cfg() -> EstimatorConfig {
        EstimatorConfig::default()
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig { t_min: 0.0, ..cfg() }.validate().is_err());
        assert!(EstimatorConfig { t_max: 1e-9, ..cfg() }.validate().is_err());
        assert!(EstimatorConfig { t_count: 1, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn grid_ends_at_ray_end() {
        let grid = cfg().t_grid(Some(3.0));
        assert_eq!(*grid.last().unwrap(), 3.0);
        assert!((grid[0] - 1e-8).abs() < 1e-20);
        assert_eq!(cfg().t_grid(Some(1e-9)), vec![1e-9]);
        assert!((cfg().t_grid(None).last().unwrap() - 1e4).abs() < 1e-6);
    }

    #[test]
    fn affine_rule_is_slope() {
        let f = Expression::affine(vec![q(-2), q(1)], q(7));
        let v = radial_epiderivative(&f, &Point::from_ints(&[5, 5]), &Direction::from_ints(&[3, 1]), &Domain::All, &cfg())
            .unwrap();
        assert_eq!(v.value, Number::Exact(q(-5)));
        assert_eq!(v.method, Method::ExactRule { rule: Rule::Affine });
    }

    #[test]
    fn convex_rule_on_abs() {
        let f = Expression::abs(Expression::var(0));
        let x = Point::from_ints(&[0]);
        for dir in [1, -1] {
            let v = radial_epiderivative_convex(&f, &x, &Direction::from_ints(&[dir]));
            assert_eq!(v.value, Number::Exact(q(1)));
        }
    }

    #[test]
    fn norm_linear_rule() {
        let x = Point::from_ints(&[0, 0]);
        let v = radial_epiderivative_norm_linear(&[q(1), q(0)], &q(2), NormKind::Euclidean, &x, &Direction::from_ints(&[0, 1]));
        assert_eq!(v.value, Number::Exact(q(-2)));
        let v = radial_epiderivative_norm_linear(&[q(1), q(0)], &q(0), NormKind::Euclidean, &x, &Direction::from_ints(&[3, 1]));
        assert_eq!(v.value, Number::Exact(q(3)));
        let v = radial_epiderivative_norm_linear(&[q(0), q(0)], &q(1), NormKind::Euclidean, &x, &Direction::new(vec![q_frac(3, 5), q_frac(4, 5)]));
        assert_eq!(v.value, Number::Exact(q(-1)));
    }

    #[test]
    fn min_affine_rule() {
        let forms = vec![AffineForm::new(vec![q(1), q(0)], q(0)), AffineForm::new(vec![q(0), q(1)], q(1))];
        let x = Point::from_ints(&[0, 0]);
        let v = radial_epiderivative_min_affine(&forms, &x, &Direction::from_ints(&[2, 1]));
        assert_eq!(v.value, Number::Exact(q(1)));
        let forms = vec![AffineForm::new(vec![q(1), q(0)], q(4)), AffineForm::new(vec![q(-1), q(0)], q(-9))];
        let v = radial_epiderivative_min_affine(&forms, &x, &Direction::from_ints(&[1, 0]));
        assert_eq!(v.value, Number::Exact(q(-1)));
        let single = &forms[..1];
        let v = radial_epiderivative_min_affine(single, &x, &Direction::from_ints(&[1, 5]));
        assert_eq!(v.value, Number::Exact(q(1)));
    }

    #[test]
    fn finite_domain_without_ray_points_is_undefined() {
        let f = Expression::affine(vec![q(1), q(1)], q(0));
        let dom = Domain::Points { points: vec![Point::from_ints(&[0, 0]), Point::from_ints(&[1, 0])] };
        let err = radial_epiderivative(&f, &Point::from_ints(&[0, 0]), &Direction::from_ints(&[0, 1]), &dom, &cfg());
        assert_eq!(err, Err(Error::UndefinedAlongRay));
    }

    #[test]
    fn zero_direction_rejected() {
        let f = Expression::var(0);
        let err = radial_epiderivative(&f, &Point::from_ints(&[0]), &Direction::from_ints(&[0]), &Domain::All, &cfg());
        assert_eq!(err, Err(Error::ZeroDirection));
    }

    #[test]
    fn estimator_flags_divergence() {
        // -x^2 / t blows up only for huge steps; a steep cubic-like drop does earlier.
        let steep = |x: &[f64]| -1e10 * x[0].abs().powi(3);
        let err = estimate(&steep, &[0.0], &[1.0], None, None, &cfg());
        assert!(matches!(err, Err(Error::NotEpidifferentiable { .. })));
    }

    #[test]
    fn classical_derivatives_of_abs() {
        let lc = LocalConfig::default();
        let abs = |x: &[f64]| x[0].abs();
        let nabs = |x: &[f64]| -x[0].abs();
        assert!((numeric_directional_derivative(&abs, &[0.0], &[1.0], &lc) - 1.0).abs() < 1e-6);
        assert!((numeric_clarke(&abs, &[0.0], &[1.0], &lc) - 1.0).abs() < 1e-3);
        assert!((numeric_directional_derivative(&nabs, &[0.0], &[1.0], &lc) + 1.0).abs() < 1e-6);
        assert!((numeric_clarke(&nabs, &[0.0], &[1.0], &lc) - 1.0).abs() < 1e-3);
        let aff = |x: &[f64]| 3.0 * x[0] - x[1];
        let (xb, d) = ([0.4, -1.0], [1.0, 2.0]);
        for v in [
            numeric_directional_derivative(&aff, &xb, &d, &lc),
            numeric_subderivative(&aff, &xb, &d, &lc),
            numeric_clarke(&aff, &xb, &d, &lc),
        ] {
            assert!((v - 1.0).abs() < 1e-3, "{v}");
        }
    }
}
