//! Expression trees for the objective and constraint functions.
//!
//! The grammar covers constants, variables, affine forms, norms centred at a
//! point, absolute values, scalar multiples, sums and finite min/max. All of
//! these are continuous and directionally differentiable, which the
//! epiderivative code relies on.

use std::cmp::Ordering;

use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number::{serde_rational, serde_rational_vec, to_f64, Number, Q};
use crate::point::{dot, norm2_f64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Euclidean,
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Expression {
    Const {
        #[serde(with = "serde_rational")]
        value: Q,
    },
    Var {
        index: usize,
    },
    /// `⟨coeffs, x⟩ + offset`.
    Affine {
        #[serde(with = "serde_rational_vec")]
        coeffs: Vec<Q>,
        #[serde(with = "serde_rational", default = "Q::zero")]
        offset: Q,
    },
    /// `‖x − center‖`.
    Norm {
        #[serde(with = "serde_rational_vec")]
        center: Vec<Q>,
        #[serde(default = "default_norm")]
        norm: NormKind,
    },
    Abs {
        arg: Box<Expression>,
    },
    Scale {
        #[serde(with = "serde_rational")]
        factor: Q,
        arg: Box<Expression>,
    },
    Sum {
        args: Vec<Expression>,
    },
    Min {
        args: Vec<Expression>,
    },
    Max {
        args: Vec<Expression>,
    },
}

fn default_norm() -> NormKind {
    NormKind::Euclidean
}

/// Anything that can be evaluated in floating point; the numeric estimators
/// and probes accept this so they also work on functions outside the
/// expression grammar.
pub trait RealFunction {
    fn eval_f64(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> RealFunction for F {
    fn eval_f64(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

impl RealFunction for Expression {
    fn eval_f64(&self, x: &[f64]) -> f64 {
        Expression::eval_f64(self, x)
    }
}

/// `⟨coeffs, x⟩ + offset`; also the pieces of min-/max-affine forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    #[serde(with = "serde_rational_vec")]
    pub coeffs: Vec<Q>,
    #[serde(with = "serde_rational")]
    pub offset: Q,
}

impl AffineForm {
    pub fn new(coeffs: Vec<Q>, offset: Q) -> Self {
        AffineForm { coeffs, offset }
    }

    pub fn constant(n: usize, value: Q) -> Self {
        AffineForm { coeffs: vec![Q::zero(); n], offset: value }
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        dot(&self.coeffs, x) + &self.offset
    }

    pub fn slope(&self, d: &[Q]) -> Q {
        dot(&self.coeffs, d)
    }

    fn scaled(&self, c: &Q) -> Self {
        AffineForm {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
            offset: &self.offset * c,
        }
    }

    fn plus(&self, other: &AffineForm) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).cloned().unwrap_or_else(Q::zero);
                let b = other.coeffs.get(i).cloned().unwrap_or_else(Q::zero);
                a + b
            })
            .collect();
        AffineForm { coeffs, offset: &self.offset + &other.offset }
    }

    fn to_expression(&self) -> Expression {
        Expression::Affine { coeffs: self.coeffs.clone(), offset: self.offset.clone() }
    }
}

/// `⟨a, x⟩ − c‖x − b‖ + β` with `c > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormLinearForm {
    pub linear: AffineForm,
    pub weight: Q,
    pub center: Vec<Q>,
    pub norm: NormKind,
}

/// Structural class used to pick an epiderivative rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Affine,
    Convex,
    NegativeNormLinear,
    MinAffine,
    MaxMinAffine,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Curvature {
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Curvature {
    fn negate(self) -> Self {
        match self {
            Curvature::Convex => Curvature::Concave,
            Curvature::Concave => Curvature::Convex,
            other => other,
        }
    }

    fn join(self, other: Self) -> Self {
        use Curvature::*;
        match (self, other) {
            (Affine, c) | (c, Affine) => c,
            (Convex, Convex) => Convex,
            (Concave, Concave) => Concave,
            _ => Unknown,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sense {
    Min,
    Max,
}

impl Sense {
    fn flip(self) -> Self {
        match self {
            Sense::Min => Sense::Max,
            Sense::Max => Sense::Min,
        }
    }
}

const MAX_PIECES: usize = 1024;

/// Relative tolerance used to detect ties between inexact branch values.
const TIE_TOL: f64 = 1e-12;

impl Expression {
    pub fn constant(value: Q) -> Self {
        Expression::Const { value }
    }

    pub fn var(index: usize) -> Self {
        Expression::Var { index }
    }

    pub fn affine(coeffs: Vec<Q>, offset: Q) -> Self {
        Expression::Affine { coeffs, offset }
    }

    pub fn norm(center: Vec<Q>, norm: NormKind) -> Self {
        Expression::Norm { center, norm }
    }

    pub fn abs(arg: Expression) -> Self {
        Expression::Abs { arg: Box::new(arg) }
    }

    pub fn scale(factor: Q, arg: Expression) -> Self {
        Expression::Scale { factor, arg: Box::new(arg) }
    }

    pub fn sum(args: Vec<Expression>) -> Self {
        Expression::Sum { args }
    }

    pub fn min(args: Vec<Expression>) -> Self {
        Expression::Min { args }
    }

    pub fn max(args: Vec<Expression>) -> Self {
        Expression::Max { args }
    }

    pub fn min_affine(forms: &[AffineForm]) -> Self {
        Expression::min(forms.iter().map(AffineForm::to_expression).collect())
    }

    /// Smallest dimension the expression can be evaluated in.
    pub fn min_dimension(&self) -> usize {
        match self {
            Expression::Const { .. } => 0,
            Expression::Var { index } => index + 1,
            Expression::Affine { coeffs, .. } => coeffs.len(),
            Expression::Norm { center, .. } => center.len(),
            Expression::Abs { arg } | Expression::Scale { arg, .. } => arg.min_dimension(),
            Expression::Sum { args } | Expression::Min { args } | Expression::Max { args } => {
                args.iter().map(Expression::min_dimension).max().unwrap_or(0)
            }
        }
    }

    /// Checks the expression against a problem dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Expression::Const { .. } => Ok(()),
            Expression::Var { index } if *index >= n => Err(Error::VariableOutOfRange { index: *index, dim: n }),
            Expression::Var { .. } => Ok(()),
            Expression::Affine { coeffs, .. } if coeffs.len() != n => {
                Err(Error::DimensionMismatch { expected: n, found: coeffs.len() })
            }
            Expression::Norm { center, .. } if center.len() != n => {
                Err(Error::DimensionMismatch { expected: n, found: center.len() })
            }
            Expression::Affine { .. } | Expression::Norm { .. } => Ok(()),
            Expression::Abs { arg } | Expression::Scale { arg, .. } => arg.validate(n),
            Expression::Sum { args } => args.iter().try_for_each(|a| a.validate(n)),
            Expression::Min { args } if args.is_empty() => Err(Error::EmptyNode("min")),
            Expression::Max { args } if args.is_empty() => Err(Error::EmptyNode("max")),
            Expression::Min { args } | Expression::Max { args } => args.iter().try_for_each(|a| a.validate(n)),
        }
    }

    /// Exact evaluation; inexact only through irrational Euclidean norms.
    pub fn evaluate(&self, x: &[Q]) -> Result<Number> {
        self.validate(x.len())?;
        Ok(self.eval(x))
    }

    /// Evaluation without the dimension check; callers validate once.
    pub fn eval(&self, x: &[Q]) -> Number {
        match self {
            Expression::Const { value } => Number::Exact(value.clone()),
            Expression::Var { index } => Number::Exact(x[*index].clone()),
            Expression::Affine { coeffs, offset } => Number::Exact(dot(coeffs, x) + offset),
            Expression::Norm { center, norm } => {
                let diffs = x.iter().zip(center).map(|(a, b)| a - b);
                match norm {
                    NormKind::Euclidean => Number::sqrt_of(diffs.map(|v| &v * &v).sum()),
                    NormKind::Max => Number::Exact(diffs.map(|v| v.abs()).fold(Q::zero(), |a, b| a.max(b))),
                }
            }
            Expression::Abs { arg } => arg.eval(x).abs(),
            Expression::Scale { factor, arg } => Number::Exact(factor.clone()) * arg.eval(x),
            Expression::Sum { args } => args.iter().fold(Number::zero(), |acc, a| acc + a.eval(x)),
            Expression::Min { args } => fold_nonempty(args.iter().map(|a| a.eval(x)), Number::min),
            Expression::Max { args } => fold_nonempty(args.iter().map(|a| a.eval(x)), Number::max),
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        match self {
            Expression::Const { value } => to_f64(value),
            Expression::Var { index } => x[*index],
            Expression::Affine { coeffs, offset } => {
                coeffs.iter().zip(x).map(|(a, xi)| to_f64(a) * xi).sum::<f64>() + to_f64(offset)
            }
            Expression::Norm { center, norm } => {
                let diffs = x.iter().zip(center).map(|(a, b)| a - to_f64(b));
                match norm {
                    NormKind::Euclidean => diffs.map(|v| v * v).sum::<f64>().sqrt(),
                    NormKind::Max => diffs.map(f64::abs).fold(0.0, f64::max),
                }
            }
            Expression::Abs { arg } => arg.eval_f64(x).abs(),
            Expression::Scale { factor, arg } => to_f64(factor) * arg.eval_f64(x),
            Expression::Sum { args } => args.iter().map(|a| a.eval_f64(x)).sum(),
            Expression::Min { args } => args.iter().map(|a| a.eval_f64(x)).fold(f64::INFINITY, f64::min),
            Expression::Max { args } => args.iter().map(|a| a.eval_f64(x)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// One-sided directional derivative `f'(x; d)` by structural recursion.
    ///
    /// Every node of the grammar is directionally differentiable, so this is
    /// exact (up to irrational norms) for the whole grammar.
    pub fn directional_derivative(&self, x: &[Q], d: &[Q]) -> Number {
        self.value_and_slope(x, d).1
    }

    fn value_and_slope(&self, x: &[Q], d: &[Q]) -> (Number, Number) {
        match self {
            Expression::Const { value } => (Number::Exact(value.clone()), Number::zero()),
            Expression::Var { index } => (Number::Exact(x[*index].clone()), Number::Exact(d[*index].clone())),
            Expression::Affine { coeffs, offset } => {
                (Number::Exact(dot(coeffs, x) + offset), Number::Exact(dot(coeffs, d)))
            }
            Expression::Norm { center, norm } => {
                let y: Vec<Q> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let dd = &d[..y.len()];
                match norm {
                    NormKind::Euclidean => {
                        let sq: Q = y.iter().map(|v| v * v).sum();
                        if sq.is_zero() {
                            (Number::zero(), Number::sqrt_of(dd.iter().map(|v| v * v).sum()))
                        } else {
                            let len = Number::sqrt_of(sq);
                            let slope = Number::Exact(dot(&y, dd)) / len.clone();
                            (len, slope)
                        }
                    }
                    NormKind::Max => {
                        let m = y.iter().map(|v| v.abs()).fold(Q::zero(), |a, b| a.max(b));
                        if m.is_zero() {
                            let dm = dd.iter().map(|v| v.abs()).fold(Q::zero(), |a, b| a.max(b));
                            (Number::zero(), Number::Exact(dm))
                        } else {
                            let slope = y
                                .iter()
                                .zip(dd)
                                .filter(|(v, _)| v.abs() == m)
                                .map(|(v, di)| if v.is_positive() { di.clone() } else { -di.clone() })
                                .max()
                                .expect("at least one active coordinate");
                            (Number::Exact(m), Number::Exact(slope))
                        }
                    }
                }
            }
            Expression::Abs { arg } => {
                let (v, s) = arg.value_and_slope(x, d);
                let slope = match v.sign(0.0) {
                    Ordering::Greater => s,
                    Ordering::Less => -s,
                    Ordering::Equal => s.abs(),
                };
                (v.abs(), slope)
            }
            Expression::Scale { factor, arg } => {
                let (v, s) = arg.value_and_slope(x, d);
                let c = Number::Exact(factor.clone());
                (c.clone() * v, c * s)
            }
            Expression::Sum { args } => args.iter().fold((Number::zero(), Number::zero()), |(v, s), a| {
                let (av, as_) = a.value_and_slope(x, d);
                (v + av, s + as_)
            }),
            Expression::Min { args } => extremum_slope(args, x, d, Sense::Min),
            Expression::Max { args } => extremum_slope(args, x, d, Sense::Max),
        }
    }

    /// Structural class, most specific first: affine, min-affine,
    /// negative-norm-linear, convex, max-min-affine, general. Tags are sound
    /// but not complete.
    pub fn classify(&self) -> Structure {
        if let Some(pieces) = self.min_affine_pieces() {
            return if pieces.len() == 1 { Structure::Affine } else { Structure::MinAffine };
        }
        if self.negative_norm_linear_form().is_some() {
            return Structure::NegativeNormLinear;
        }
        match self.curvature() {
            Curvature::Affine => return Structure::Affine,
            Curvature::Convex => return Structure::Convex,
            _ => {}
        }
        if self.max_min_affine_pieces().is_some() {
            return Structure::MaxMinAffine;
        }
        Structure::General
    }

    /// The expression as `min_j ⟨a^j, x⟩ + α_j`, when structurally evident.
    pub fn min_affine_pieces(&self) -> Option<Vec<AffineForm>> {
        self.pieces(Sense::Min, self.min_dimension())
    }

    /// The expression as `max_j ⟨a^j, x⟩ + α_j`, when structurally evident.
    pub fn max_affine_pieces(&self) -> Option<Vec<AffineForm>> {
        self.pieces(Sense::Max, self.min_dimension())
    }

    /// The expression as `max_i min_{j ∈ J_i} ⟨a^{ij}, x⟩ + α_{ij}`.
    pub fn max_min_affine_pieces(&self) -> Option<Vec<Vec<AffineForm>>> {
        let n = self.min_dimension();
        match self {
            Expression::Max { args } => args.iter().map(|a| a.pieces(Sense::Min, n)).collect(),
            _ => self.pieces(Sense::Min, n).map(|p| vec![p]),
        }
    }

    pub fn affine_form(&self) -> Option<AffineForm> {
        self.min_affine_pieces().filter(|p| p.len() == 1).and_then(|mut p| p.pop())
    }

    fn pieces(&self, sense: Sense, n: usize) -> Option<Vec<AffineForm>> {
        let out = match self {
            Expression::Const { value } => vec![AffineForm::constant(n, value.clone())],
            Expression::Var { index } => {
                let mut coeffs = vec![Q::zero(); n];
                coeffs[*index] = Q::from_integer(1.into());
                vec![AffineForm::new(coeffs, Q::zero())]
            }
            Expression::Affine { coeffs, offset } => vec![AffineForm::new(coeffs.clone(), offset.clone())],
            Expression::Norm { center, norm: NormKind::Max } if sense == Sense::Max => {
                let mut out = Vec::with_capacity(2 * center.len());
                for (i, b) in center.iter().enumerate() {
                    let mut coeffs = vec![Q::zero(); n];
                    coeffs[i] = Q::from_integer(1.into());
                    let plus = AffineForm::new(coeffs, -b.clone());
                    out.push(plus.scaled(&Q::from_integer((-1).into())));
                    out.push(plus);
                }
                out
            }
            Expression::Norm { .. } => return None,
            Expression::Abs { arg } => {
                let form = arg.pieces(Sense::Min, n).filter(|p| p.len() == 1)?.pop()?;
                if form.coeffs.iter().all(Zero::is_zero) {
                    vec![AffineForm::constant(n, form.offset.abs())]
                } else if sense == Sense::Max {
                    vec![form.scaled(&Q::from_integer((-1).into())), form]
                } else {
                    return None;
                }
            }
            Expression::Scale { factor, arg } => {
                let inner = if factor.is_negative() { sense.flip() } else { sense };
                arg.pieces(inner, n)?.iter().map(|p| p.scaled(factor)).collect()
            }
            Expression::Sum { args } => {
                let mut acc = vec![AffineForm::constant(n, Q::zero())];
                for a in args {
                    let next = a.pieces(sense, n)?;
                    if acc.len() * next.len() > MAX_PIECES {
                        return None;
                    }
                    acc = acc.iter().flat_map(|p| next.iter().map(move |q| p.plus(q))).collect();
                }
                acc
            }
            Expression::Min { args } | Expression::Max { args } => {
                let own = if matches!(self, Expression::Min { .. }) { Sense::Min } else { Sense::Max };
                if own != sense && args.len() != 1 {
                    return None;
                }
                let mut out = Vec::new();
                for a in args {
                    out.extend(a.pieces(sense, n)?);
                    if out.len() > MAX_PIECES {
                        return None;
                    }
                }
                out
            }
        };
        let mut unique: Vec<AffineForm> = Vec::with_capacity(out.len());
        for p in out {
            if !unique.contains(&p) {
                unique.push(p);
            }
        }
        Some(unique)
    }

    /// Recognises `⟨a, x⟩ − c‖x − b‖ + β` with `c > 0` and a single norm centre.
    pub fn negative_norm_linear_form(&self) -> Option<NormLinearForm> {
        let n = self.min_dimension();
        let mut linear = AffineForm::constant(n, Q::zero());
        let mut norm_term: Option<(Q, Vec<Q>, NormKind)> = None;
        let one = Q::from_integer(1.into());
        if !self.collect_norm_linear(&one, n, &mut linear, &mut norm_term) {
            return None;
        }
        let (coef, center, norm) = norm_term?;
        if !coef.is_negative() {
            return None;
        }
        Some(NormLinearForm { linear, weight: -coef, center, norm })
    }

    fn collect_norm_linear(
        &self,
        factor: &Q,
        n: usize,
        linear: &mut AffineForm,
        norm_term: &mut Option<(Q, Vec<Q>, NormKind)>,
    ) -> bool {
        match self {
            Expression::Sum { args } => args.iter().all(|a| a.collect_norm_linear(factor, n, linear, norm_term)),
            Expression::Scale { factor: c, arg } => arg.collect_norm_linear(&(factor * c), n, linear, norm_term),
            Expression::Norm { center, norm } => match norm_term {
                None => {
                    *norm_term = Some((factor.clone(), center.clone(), *norm));
                    true
                }
                Some((coef, c, k)) if c == center && k == norm => {
                    *coef += factor;
                    true
                }
                Some(_) => false,
            },
            other => match other.pieces(Sense::Min, n).filter(|p| p.len() == 1) {
                Some(mut p) => {
                    *linear = linear.plus(&p.pop().expect("one piece").scaled(factor));
                    true
                }
                None => false,
            },
        }
    }

    fn curvature(&self) -> Curvature {
        match self {
            Expression::Const { .. } | Expression::Var { .. } | Expression::Affine { .. } => Curvature::Affine,
            Expression::Norm { .. } => Curvature::Convex,
            Expression::Abs { arg } => match arg.curvature() {
                Curvature::Affine => Curvature::Convex,
                _ => Curvature::Unknown,
            },
            Expression::Scale { factor, arg } => {
                let c = arg.curvature();
                if factor.is_zero() {
                    Curvature::Affine
                } else if factor.is_negative() {
                    c.negate()
                } else {
                    c
                }
            }
            Expression::Sum { args } => args.iter().fold(Curvature::Affine, |acc, a| acc.join(a.curvature())),
            Expression::Min { args } => {
                let c = args.iter().fold(Curvature::Affine, |acc, a| acc.join(a.curvature()));
                match (args.len(), c) {
                    (1, c) => c,
                    (_, Curvature::Affine | Curvature::Concave) => Curvature::Concave,
                    _ => Curvature::Unknown,
                }
            }
            Expression::Max { args } => {
                let c = args.iter().fold(Curvature::Affine, |acc, a| acc.join(a.curvature()));
                match (args.len(), c) {
                    (1, c) => c,
                    (_, Curvature::Affine | Curvature::Convex) => Curvature::Convex,
                    _ => Curvature::Unknown,
                }
            }
        }
    }

    /// Whether the expression is structurally convex.
    pub fn is_convex(&self) -> bool {
        matches!(self.curvature(), Curvature::Convex | Curvature::Affine)
    }
}

fn fold_nonempty(mut it: impl Iterator<Item = Number>, f: fn(Number, Number) -> Number) -> Number {
    let first = it.next().expect("min/max nodes are validated nonempty");
    it.fold(first, f)
}

fn ties(a: &Number, b: &Number) -> bool {
    match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => x == y,
        _ => {
            let (x, y) = (a.to_f64(), b.to_f64());
            (x - y).abs() <= TIE_TOL * x.abs().max(y.abs()).max(1.0)
        }
    }
}

fn extremum_slope(args: &[Expression], x: &[Q], d: &[Q], sense: Sense) -> (Number, Number) {
    let branches: Vec<(Number, Number)> = args.iter().map(|a| a.value_and_slope(x, d)).collect();
    let pick = match sense {
        Sense::Min => Number::min,
        Sense::Max => Number::max,
    };
    let value = fold_nonempty(branches.iter().map(|b| b.0.clone()), pick);
    let slope = fold_nonempty(
        branches.iter().filter(|b| ties(&b.0, &value)).map(|b| b.1.clone()),
        pick,
    );
    (value, slope)
}

/// Settings for [`is_lower_lipschitz_probe`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzProbeConfig {
    pub samples: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub constant: f64,
    pub seed: u64,
}

impl Default for LipschitzProbeConfig {
    fn default() -> Self {
        LipschitzProbeConfig { samples: 4096, radius_min: 1e-10, radius_max: 1e2, constant: 1.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum LipschitzProbe {
    HoldsUpToSamples { samples: usize },
    ViolatedWithWitness { witness: Vec<f64>, gap: f64 },
}

/// Samples `x` around `xbar` and tests `f(x) − f(xbar) ≥ −L‖x − xbar‖`.
/// A pass is evidence, not proof.
pub fn is_lower_lipschitz_probe(f: &dyn RealFunction, xbar: &[f64], cfg: &LipschitzProbeConfig) -> LipschitzProbe {
    let n = xbar.len();
    let fbar = f.eval_f64(xbar);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (cfg.radius_min.ln(), cfg.radius_max.ln());
    let mut x = vec![0.0; n];
    for k in 0..cfg.samples {
        let frac = if cfg.samples > 1 { k as f64 / (cfg.samples - 1) as f64 } else { 0.0 };
        let radius = (lo + frac * (hi - lo)).exp();
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm2_f64(&w);
        if len == 0.0 {
            continue;
        }
        w.iter_mut().for_each(|v| *v /= len);
        for i in 0..n {
            x[i] = xbar[i] + radius * w[i];
        }
        let dist = norm2_f64(&x.iter().zip(xbar).map(|(a, b)| a - b).collect::<Vec<_>>());
        let lhs = f.eval_f64(&x) - fbar;
        let slack = 1e-12 * (1.0 + fbar.abs());
        if lhs < -cfg.constant * dist - slack {
            return LipschitzProbe::ViolatedWithWitness { witness: x, gap: lhs + cfg.constant * dist };
        }
    }
    LipschitzProbe::HoldsUpToSamples { samples: cfg.samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{q, q_frac};

    fn ex2_objective() -> Expression {
        // 2|x1 - 3| + |x2 - 4|
        Expression::sum(vec![
            Expression::scale(q(2), Expression::abs(Expression::affine(vec![q(1), q(0)], q(-3)))),
            Expression::abs(Expression::affine(vec![q(0), q(1)], q(-4))),
        ])
    }

    #[test]
    fn evaluates_example_objectives_exactly() {
        let f1 = Expression::affine(vec![q(-2), q(1)], q(0));
        assert_eq!(f1.evaluate(&[q(2), q(1)]).unwrap(), Number::Exact(q(-3)));
        assert_eq!(ex2_objective().evaluate(&[q(3), q(2)]).unwrap(), Number::Exact(q(2)));
        let nrm = Expression::norm(vec![q(1), q(-2)], NormKind::Euclidean);
        assert_eq!(nrm.evaluate(&[q(1), q(-2)]).unwrap(), Number::Exact(q(0)));
        assert_eq!(nrm.evaluate(&[q(4), q(2)]).unwrap(), Number::Exact(q(5)));
        assert!(!nrm.evaluate(&[q(2), q(-1)]).unwrap().is_exact());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = Expression::affine(vec![q(1), q(1)], q(0));
        assert!(matches!(f.evaluate(&[q(1)]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(Expression::var(3).evaluate(&[q(0)]), Err(Error::VariableOutOfRange { .. })));
        assert!(matches!(Expression::min(vec![]).validate(1), Err(Error::EmptyNode("min"))));
    }

    #[test]
    fn classifies_example_shapes() {
        let nnl = Expression::sum(vec![
            Expression::affine(vec![q(1), q(0)], q(3)),
            Expression::scale(q(-2), Expression::norm(vec![q(1), q(1)], NormKind::Euclidean)),
        ]);
        assert_eq!(nnl.classify(), Structure::NegativeNormLinear);
        let forms = vec![
            AffineForm::new(vec![q(1), q(0)], q(0)),
            AffineForm::new(vec![q(0), q(1)], q(1)),
        ];
        assert_eq!(Expression::min_affine(&forms).classify(), Structure::MinAffine);
        assert_eq!(ex2_objective().classify(), Structure::Convex);
        assert_eq!(Expression::affine(vec![q(1)], q(2)).classify(), Structure::Affine);
        // x1 + x2 - 2|x1 - 2| - 3 is concave piecewise linear.
        let g1 = Expression::sum(vec![
            Expression::affine(vec![q(1), q(1)], q(-3)),
            Expression::scale(q(-2), Expression::abs(Expression::affine(vec![q(1), q(0)], q(-2)))),
        ]);
        assert_eq!(g1.classify(), Structure::MinAffine);
        let mma = Expression::max(vec![
            Expression::min_affine(&forms),
            Expression::min_affine(&[AffineForm::new(vec![q(-1), q(0)], q(0)), AffineForm::new(vec![q(0), q(-1)], q(0))]),
        ]);
        assert_eq!(mma.classify(), Structure::MaxMinAffine);
        // a difference of norms is none of the above
        let general = Expression::sum(vec![
            Expression::norm(vec![q(0)], NormKind::Euclidean),
            Expression::scale(q(-1), Expression::norm(vec![q(1)], NormKind::Euclidean)),
        ]);
        assert_eq!(general.classify(), Structure::General);
    }

    #[test]
    fn min_affine_pieces_of_concave_abs_sum() {
        let g = Expression::scale(q(-1), Expression::abs(Expression::affine(vec![q(1)], q(0))));
        let pieces = g.min_affine_pieces().unwrap();
        assert_eq!(pieces.len(), 2);
        for x in [-3, 0, 5] {
            let xs = [q(x)];
            let min = pieces.iter().map(|p| p.eval(&xs)).min().unwrap();
            assert_eq!(Number::Exact(min), g.eval(&xs));
        }
    }

    #[test]
    fn directional_derivative_of_kinks() {
        let f = Expression::abs(Expression::var(0));
        assert_eq!(f.directional_derivative(&[q(0)], &[q(1)]), Number::Exact(q(1)));
        assert_eq!(f.directional_derivative(&[q(0)], &[q(-1)]), Number::Exact(q(1)));
        let g = Expression::scale(q(-1), f);
        assert_eq!(g.directional_derivative(&[q(0)], &[q(1)]), Number::Exact(q(-1)));
        let m = Expression::norm(vec![q(0), q(0)], NormKind::Max);
        assert_eq!(m.directional_derivative(&[q(1), q(-1)], &[q(1), q(1)]), Number::Exact(q(1)));
        let e = Expression::norm(vec![q(0), q(0)], NormKind::Euclidean);
        assert_eq!(e.directional_derivative(&[q(3), q(4)], &[q(1), q(0)]), Number::Exact(q_frac(3, 5)));
    }

    #[test]
    fn lower_lipschitz_probe() {
        let sqrt_abs = |x: &[f64]| -x[0].abs().sqrt();
        let cfg = LipschitzProbeConfig { constant: 10.0, ..Default::default() };
        assert!(matches!(
            is_lower_lipschitz_probe(&sqrt_abs, &[0.0], &cfg),
            LipschitzProbe::ViolatedWithWitness { .. }
        ));
        let aff = Expression::affine(vec![q(3), q(-4)], q(1));
        let cfg = LipschitzProbeConfig { constant: 5.0, ..Default::default() };
        assert!(matches!(
            is_lower_lipschitz_probe(&aff, &[0.3, -2.0], &cfg),
            LipschitzProbe::HoldsUpToSamples { .. }
        ));
    }
}
