//! Feasible-direction and descent cones at a feasible point.
//!
//! Everything is computed over a finite candidate universe of rays:
//! on finite domains the rays from `x̄` to every other point of `X`
//! (exhaustive), elsewhere user candidates, the coordinate axes and a
//! seeded sample of the sphere (sampled). Directions along which `X` has no
//! admissible step are left out, since every restricted epiderivative is
//! `+∞` there.
//!
//! The objective epiderivative used for `F₁`/`F̃₁` is restricted to the
//! feasible set `S`; constraint epiderivatives are restricted to `X`.

use std::cmp::Ordering;

use num::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::epiderivative::{constraint_epiderivative, objective_epiderivative, EpiderivativeValue, EstimatorConfig};
use crate::error::{Error, Result};
use crate::number::{Number, Q};
use crate::point::{Direction, Point};
use crate::problem::{Domain, Problem, RaySteps, FLOAT_FEASIBILITY_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    Candidates,
    FeasibleD,
    DescentF0,
    DescentF1,
    ClosedF1Tilde,
    G0,
    G1,
    G1Tilde,
    G0a,
    G1a,
    G1aTilde,
}

impl SetKind {
    pub const ALL: [SetKind; 11] = [
        SetKind::Candidates,
        SetKind::FeasibleD,
        SetKind::DescentF0,
        SetKind::DescentF1,
        SetKind::ClosedF1Tilde,
        SetKind::G0,
        SetKind::G1,
        SetKind::G1Tilde,
        SetKind::G0a,
        SetKind::G1a,
        SetKind::G1aTilde,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SetKind::Candidates => "candidates",
            SetKind::FeasibleD => "D",
            SetKind::DescentF0 => "F0",
            SetKind::DescentF1 => "F1",
            SetKind::ClosedF1Tilde => "F1~",
            SetKind::G0 => "G0",
            SetKind::G1 => "G1",
            SetKind::G1Tilde => "G1~",
            SetKind::G0a => "G0a",
            SetKind::G1a => "G1a",
            SetKind::G1aTilde => "G1a~",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    Exhaustive,
    Sampled,
}

/// A finite set of rays, each stored by its max-norm-one representative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub kind: SetKind,
    pub exactness: Exactness,
    pub directions: Vec<Direction>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Ray membership: any positive multiple of a stored direction.
    pub fn contains(&self, d: &Direction) -> bool {
        match d.canonical() {
            Ok(c) => self.directions.contains(&c),
            Err(_) => false,
        }
    }

    /// First direction of `self` not in `other`.
    pub fn subset_witness(&self, other: &DirectionSet) -> Option<Direction> {
        self.directions.iter().find(|d| !other.directions.contains(d)).cloned()
    }
}

/// Indices `i` (0-based) with `g_i(x̄) = 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActiveSet(pub Vec<usize>);

impl ActiveSet {
    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Exact zero for rational values, `|g| ≤ tol` for floats.
pub fn active_set(p: &Problem, xbar: &Point, tol: f64) -> ActiveSet {
    ActiveSet(
        p.constraint_values(xbar)
            .iter()
            .enumerate()
            .filter(|(_, v)| match v {
                Number::Exact(q) => q.is_zero(),
                Number::Float(f) => f.abs() <= tol,
            })
            .map(|(i, _)| i)
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeConfig {
    pub estimator: EstimatorConfig,
    /// Sampled rays on continuous domains; `None` means 64 for `n ≤ 3`, else `256 n`.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Active-set tolerance for inexact constraint values.
    pub active_tol: f64,
    /// Extra directions placed first in the candidate universe.
    pub candidates: Vec<Direction>,
}

impl Default for ConeConfig {
    fn default() -> Self {
        ConeConfig {
            estimator: EstimatorConfig::default(),
            samples: None,
            seed: 0,
            active_tol: 1e-9,
            candidates: Vec::new(),
        }
    }
}

impl ConeConfig {
    pub fn sample_count(&self, n: usize) -> usize {
        self.samples.unwrap_or(if n <= 3 { 64 } else { 256 * n })
    }
}

/// A restricted epiderivative, or the reason it has no finite value.
#[derive(Clone, Debug, PartialEq)]
pub enum EpiEntry {
    Value(EpiderivativeValue),
    /// No admissible step on the ray: `+∞`.
    Undefined,
    /// Estimator fell below the divergence floor: treated as `−∞`.
    Divergent { t: f64, quotient: f64 },
}

impl EpiEntry {
    pub fn from_result(res: Result<EpiderivativeValue>) -> Result<Self> {
        match res {
            Ok(v) => Ok(EpiEntry::Value(v)),
            Err(Error::UndefinedAlongRay) => Ok(EpiEntry::Undefined),
            Err(Error::NotEpidifferentiable { t, quotient }) => Ok(EpiEntry::Divergent { t, quotient }),
            Err(e) => Err(e),
        }
    }

    pub fn sign(&self, tol: f64) -> Ordering {
        match self {
            EpiEntry::Value(v) => v.value.sign(tol),
            EpiEntry::Undefined => Ordering::Greater,
            EpiEntry::Divergent { .. } => Ordering::Less,
        }
    }

    pub fn value(&self) -> Option<&EpiderivativeValue> {
        match self {
            EpiEntry::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_estimate(&self) -> bool {
        match self {
            EpiEntry::Value(v) => v.is_estimate(),
            _ => true,
        }
    }
}

impl Serialize for EpiEntry {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EpiEntry::Value(v) => v.serialize(serializer),
            EpiEntry::Undefined => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("value", "+inf")?;
                map.serialize_entry("method", "undefined-along-ray")?;
                map.end()
            }
            EpiEntry::Divergent { t, quotient } => {
                let mut map = serializer.serialize_map(Some(4))?;
                map.serialize_entry("value", "-inf")?;
                map.serialize_entry("method", "not-epidifferentiable")?;
                map.serialize_entry("t", t)?;
                map.serialize_entry("quotient", quotient)?;
                map.end()
            }
        }
    }
}

/// Everything known about one candidate ray.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionRecord {
    pub direction: Direction,
    /// `x̄ + λd ∈ S` for some `λ > 0`.
    pub feasible: bool,
    /// `x̄ + λd ∈ S` and `f(x̄ + λd) < f(x̄)` for some `λ > 0`.
    pub objective_decrease: bool,
    /// Some `λ > 0` with `x̄ + λd ∈ X` decreases every constraint.
    pub constraints_decrease: bool,
    /// Same, active constraints only.
    pub active_decrease: bool,
    pub objective: EpiEntry,
    pub constraints: Vec<EpiEntry>,
}

/// Cone data at a feasible point; the sets are views over `records`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeAnalysis {
    pub point: Point,
    pub exactness: Exactness,
    pub active: ActiveSet,
    pub tolerance: f64,
    pub records: Vec<DirectionRecord>,
}

#[derive(Default)]
struct Probe {
    feasible: bool,
    objective_decrease: bool,
    constraints_decrease: bool,
    active_decrease: bool,
}

/// Line probe along `d`: exact over the domain points on the ray for finite
/// domains, in floating point over the estimator grid otherwise.
fn probe_ray(p: &Problem, xbar: &Point, d: &Direction, active: &ActiveSet, cfg: &EstimatorConfig) -> Probe {
    let tol = cfg.tolerance;
    let mut pr = Probe::default();
    if p.domain.is_finite() {
        let f_bar = p.objective_value(xbar);
        let g_bar = p.constraint_values(xbar);
        for (_, x) in p.domain.points_on_ray(xbar, d) {
            let in_s = p.satisfies_constraints(&x);
            pr.feasible |= in_s;
            if in_s && !pr.objective_decrease {
                pr.objective_decrease = strictly_below(&p.objective_value(&x), &f_bar, tol);
            }
            let below: Vec<bool> =
                p.constraint_values(&x).iter().zip(&g_bar).map(|(a, b)| strictly_below(a, b, tol)).collect();
            pr.constraints_decrease |= below.iter().all(|&b| b);
            pr.active_decrease |= active.0.iter().all(|&i| below[i]);
        }
        return pr;
    }
    let upper = match p.domain.ray_steps(xbar, d) {
        RaySteps::Empty => return pr,
        RaySteps::Interval { upper } => upper.as_ref().map(crate::number::to_f64),
    };
    let (xf, df) = (xbar.to_f64(), d.to_f64());
    let f_bar = p.objective.eval_f64(&xf);
    let g_bar: Vec<f64> = p.constraints.iter().map(|g| g.eval_f64(&xf)).collect();
    let mut x = vec![0.0; xf.len()];
    for t in cfg.t_grid(upper) {
        for i in 0..x.len() {
            x[i] = xf[i] + t * df[i];
        }
        if !p.domain.contains_f64(&x) {
            continue;
        }
        let g: Vec<f64> = p.constraints.iter().map(|e| e.eval_f64(&x)).collect();
        let in_s = g.iter().all(|v| *v <= FLOAT_FEASIBILITY_TOL);
        pr.feasible |= in_s;
        if in_s && !pr.objective_decrease {
            pr.objective_decrease = p.objective.eval_f64(&x) < f_bar - tol;
        }
        let below: Vec<bool> = g.iter().zip(&g_bar).map(|(a, b)| *a < *b - tol).collect();
        pr.constraints_decrease |= below.iter().all(|&b| b);
        pr.active_decrease |= active.0.iter().all(|&i| below[i]);
    }
    pr
}

fn strictly_below(a: &Number, b: &Number, tol: f64) -> bool {
    match (a, b) {
        (Number::Exact(x), Number::Exact(y)) => x < y,
        _ => a.to_f64() < b.to_f64() - tol,
    }
}

/// Canonical rays forming the candidate universe, in a fixed order.
pub fn candidate_directions(p: &Problem, xbar: &Point, cfg: &ConeConfig) -> Result<Vec<Direction>> {
    let n = p.dim;
    let mut out: Vec<Direction> = Vec::new();
    let push = |d: Direction, out: &mut Vec<Direction>| {
        if let Ok(c) = d.canonical() {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    };
    for d in &cfg.candidates {
        p.check_direction(d)?;
        push(d.clone(), &mut out);
    }
    match &p.domain {
        Domain::Points { points } => {
            for pt in points {
                if let Some(d) = xbar.direction_to(pt) {
                    push(d, &mut out);
                }
            }
        }
        _ => {
            for i in 0..n {
                for s in [1, -1] {
                    let mut v = vec![Q::zero(); n];
                    v[i] = Q::from_integer(s.into());
                    push(Direction(v), &mut out);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for _ in 0..cfg.sample_count(n) {
                let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let m = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                if m == 0.0 {
                    continue;
                }
                let rounded: Vec<Q> =
                    g.iter().map(|v| Q::new((((v / m) * 1024.0).round() as i64).into(), 1024.into())).collect();
                push(Direction(rounded), &mut out);
            }
        }
    }
    let domain = &p.domain;
    Ok(out
        .into_iter()
        .filter(|d| match domain {
            Domain::Points { .. } => !domain.points_on_ray(xbar, d).is_empty(),
            _ => domain.ray_steps(xbar, d) != RaySteps::Empty,
        })
        .collect())
}

/// Computes every record at a feasible point.
pub fn analyze(p: &Problem, xbar: &Point, cfg: &ConeConfig) -> Result<ConeAnalysis> {
    p.require_feasible(xbar)?;
    cfg.estimator.validate()?;
    let tol = cfg.estimator.tolerance;
    let active = active_set(p, xbar, cfg.active_tol);
    let exactness = if p.domain.is_finite() { Exactness::Exhaustive } else { Exactness::Sampled };
    let mut records = Vec::new();
    for d in candidate_directions(p, xbar, cfg)? {
        let Probe { feasible, objective_decrease, constraints_decrease, active_decrease } =
            probe_ray(p, xbar, &d, &active, &cfg.estimator);
        let objective = EpiEntry::from_result(objective_epiderivative(p, xbar, &d, &cfg.estimator))?;
        let constraints = (0..p.constraints.len())
            .map(|i| EpiEntry::from_result(constraint_epiderivative(p, i, xbar, &d, &cfg.estimator)))
            .collect::<Result<Vec<_>>>()?;
        records.push(DirectionRecord {
            direction: d,
            feasible,
            objective_decrease,
            constraints_decrease,
            active_decrease,
            objective,
            constraints,
        });
    }
    Ok(ConeAnalysis { point: xbar.clone(), exactness, active, tolerance: tol, records })
}

impl ConeAnalysis {
    pub fn member(&self, r: &DirectionRecord, kind: SetKind) -> bool {
        let tol = self.tolerance;
        let all = |pred: &dyn Fn(Ordering) -> bool| r.constraints.iter().all(|e| pred(e.sign(tol)));
        let act = |pred: &dyn Fn(Ordering) -> bool| self.active.0.iter().all(|&i| pred(r.constraints[i].sign(tol)));
        match kind {
            SetKind::Candidates => true,
            SetKind::FeasibleD => r.feasible,
            SetKind::DescentF0 => r.objective_decrease,
            SetKind::DescentF1 => r.objective.sign(tol) == Ordering::Less,
            SetKind::ClosedF1Tilde => r.objective.sign(tol) != Ordering::Greater,
            SetKind::G0 => r.constraints_decrease,
            SetKind::G1 => all(&|s| s == Ordering::Less),
            SetKind::G1Tilde => all(&|s| s != Ordering::Greater),
            SetKind::G0a => r.active_decrease,
            SetKind::G1a => act(&|s| s == Ordering::Less),
            SetKind::G1aTilde => act(&|s| s != Ordering::Greater),
        }
    }

    pub fn set(&self, kind: SetKind) -> DirectionSet {
        DirectionSet {
            kind,
            exactness: self.exactness,
            directions: self.records.iter().filter(|r| self.member(r, kind)).map(|r| r.direction.clone()).collect(),
        }
    }

    pub fn record(&self, d: &Direction) -> Option<&DirectionRecord> {
        let c = d.canonical().ok()?;
        self.records.iter().find(|r| r.direction == c)
    }

    /// Whether any value feeding the sets came from the estimator.
    pub fn uses_estimates(&self) -> bool {
        self.records.iter().any(|r| r.objective.is_estimate() || r.constraints.iter().any(EpiEntry::is_estimate))
    }
}

pub fn feasible_directions(p: &Problem, xbar: &Point, cfg: &ConeConfig) -> Result<DirectionSet> {
    Ok(analyze(p, xbar, cfg)?.set(SetKind::FeasibleD))
}

/// `F₁` when `strict`, else `F̃₁`.
pub fn descent_set(p: &Problem, xbar: &Point, strict: bool, cfg: &ConeConfig) -> Result<DirectionSet> {
    let kind = if strict { SetKind::DescentF1 } else { SetKind::ClosedF1Tilde };
    Ok(analyze(p, xbar, cfg)?.set(kind))
}

/// `(G₀, G₁, G̃₁)`, or the active-constraint variants.
pub fn g_sets(
    p: &Problem,
    xbar: &Point,
    active_only: bool,
    cfg: &ConeConfig,
) -> Result<(DirectionSet, DirectionSet, DirectionSet)> {
    let a = analyze(p, xbar, cfg)?;
    Ok(if active_only {
        (a.set(SetKind::G0a), a.set(SetKind::G1a), a.set(SetKind::G1aTilde))
    } else {
        (a.set(SetKind::G0), a.set(SetKind::G1), a.set(SetKind::G1Tilde))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// `G₁ ⊆ G₀`
    A1,
    /// `D ⊆ G̃₁`
    A2,
    /// `G₁ₐ ⊆ G₀ₐ`
    A3,
}

impl Assumption {
    pub fn inclusion(self) -> (SetKind, SetKind) {
        match self {
            Assumption::A1 => (SetKind::G1, SetKind::G0),
            Assumption::A2 => (SetKind::FeasibleD, SetKind::G1Tilde),
            Assumption::A3 => (SetKind::G1a, SetKind::G0a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum AssumptionOutcome {
    Holds { vacuous: bool },
    FailsWithWitness { witness: Direction },
    /// Passed on a sampled universe only.
    Inconclusive,
}

impl AssumptionOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, AssumptionOutcome::Holds { .. })
    }

    pub fn failed(&self) -> bool {
        matches!(self, AssumptionOutcome::FailsWithWitness { .. })
    }
}

impl ConeAnalysis {
    pub fn check_assumption(&self, which: Assumption, constraint_count: usize) -> AssumptionOutcome {
        let vacuous = match which {
            Assumption::A1 | Assumption::A2 => constraint_count == 0,
            Assumption::A3 => self.active.is_empty(),
        };
        if vacuous {
            return AssumptionOutcome::Holds { vacuous: true };
        }
        let (sub, sup) = which.inclusion();
        if let Some(witness) = self.set(sub).subset_witness(&self.set(sup)) {
            return AssumptionOutcome::FailsWithWitness { witness };
        }
        match self.exactness {
            Exactness::Exhaustive => AssumptionOutcome::Holds { vacuous: false },
            Exactness::Sampled => AssumptionOutcome::Inconclusive,
        }
    }
}

pub fn check_assumption(p: &Problem, xbar: &Point, which: Assumption, cfg: &ConeConfig) -> Result<AssumptionOutcome> {
    Ok(analyze(p, xbar, cfg)?.check_assumption(which, p.constraints.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    Subset,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelationCheck {
    pub relation: String,
    /// Assumption the relation depends on, if any.
    pub requires: Option<Assumption>,
    /// Whether the precondition holds (always true without one).
    pub applicable: bool,
    pub holds: bool,
    pub witness: Option<Direction>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelationReport {
    pub exactness: Exactness,
    pub sizes: Vec<(String, usize)>,
    pub assumptions: Vec<(Assumption, AssumptionOutcome)>,
    pub checks: Vec<RelationCheck>,
}

impl RelationReport {
    /// Violated relations that hold without any assumption, or whose
    /// assumption was verified.
    pub fn violations(&self) -> Vec<&RelationCheck> {
        self.checks.iter().filter(|c| c.applicable && !c.holds).collect()
    }
}

/// Relations that hold unconditionally.
pub const UNCONDITIONAL: [(SetKind, RelationKind, SetKind); 8] = [
    (SetKind::DescentF0, RelationKind::Equal, SetKind::DescentF1),
    (SetKind::DescentF1, RelationKind::Subset, SetKind::ClosedF1Tilde),
    (SetKind::G0, RelationKind::Subset, SetKind::G1),
    (SetKind::G0, RelationKind::Subset, SetKind::FeasibleD),
    (SetKind::G1, RelationKind::Subset, SetKind::G1Tilde),
    (SetKind::G1a, RelationKind::Subset, SetKind::G1aTilde),
    (SetKind::FeasibleD, RelationKind::Subset, SetKind::G1aTilde),
    (SetKind::G0a, RelationKind::Subset, SetKind::G1a),
];

/// Relations stated under an assumption. `G₁ₐ ⊆ D` is reported but not
/// counted as a violation: an inactive constraint can still block the ray.
pub const CONDITIONAL: [(SetKind, RelationKind, SetKind, Assumption, bool); 3] = [
    (SetKind::G1, RelationKind::Equal, SetKind::G0, Assumption::A1, true),
    (SetKind::G0a, RelationKind::Equal, SetKind::G1a, Assumption::A3, true),
    (SetKind::G1a, RelationKind::Subset, SetKind::FeasibleD, Assumption::A3, false),
];

impl ConeAnalysis {
    fn relation(&self, a: SetKind, rel: RelationKind, b: SetKind) -> (String, bool, Option<Direction>) {
        let (sa, sb) = (self.set(a), self.set(b));
        let (symbol, witness) = match rel {
            RelationKind::Subset => ("⊆", sa.subset_witness(&sb)),
            RelationKind::Equal => ("=", sa.subset_witness(&sb).or_else(|| sb.subset_witness(&sa))),
        };
        (format!("{} {} {}", a.label(), symbol, b.label()), witness.is_none(), witness)
    }

    pub fn relation_suite(&self, constraint_count: usize) -> RelationReport {
        let assumptions: Vec<(Assumption, AssumptionOutcome)> = [Assumption::A1, Assumption::A2, Assumption::A3]
            .into_iter()
            .map(|a| (a, self.check_assumption(a, constraint_count)))
            .collect();
        let mut checks = Vec::new();
        for (a, rel, b) in UNCONDITIONAL {
            let (relation, holds, witness) = self.relation(a, rel, b);
            checks.push(RelationCheck { relation, requires: None, applicable: true, holds, witness });
        }
        for (a, rel, b, req, asserted) in CONDITIONAL {
            let (relation, holds, witness) = self.relation(a, rel, b);
            let verified = assumptions.iter().any(|(x, o)| *x == req && !o.failed());
            checks.push(RelationCheck { relation, requires: Some(req), applicable: asserted && verified, holds, witness });
        }
        RelationReport {
            exactness: self.exactness,
            sizes: SetKind::ALL.iter().map(|k| (k.label().to_string(), self.set(*k).len())).collect(),
            assumptions,
            checks,
        }
    }
}

pub fn relation_suite(p: &Problem, xbar: &Point, cfg: &ConeConfig) -> Result<RelationReport> {
    Ok(analyze(p, xbar, cfg)?.relation_suite(p.constraints.len()))
}
