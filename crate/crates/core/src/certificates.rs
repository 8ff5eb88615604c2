//! Radial gradients, the Gordan alternative and the Fritz John / KKT
//! certificate checks.

use num::{One, Signed, Zero};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{analyze, Assumption, AssumptionOutcome, ConeAnalysis, ConeConfig, DirectionSet, EpiEntry, Exactness, SetKind};
use crate::epiderivative::{constraint_epiderivative, objective_epiderivative, EstimatorConfig};
use crate::error::{Error, Result};
use crate::lp::{Lp, LpOutcome, Relation};
use crate::number::{from_f64, serde_rational_vec, Number, Q};
use crate::point::{linearly_independent, rank, Direction, Point};
use crate::problem::Problem;

/// Values of one function's restricted epiderivative along an ordered basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialGradient {
    /// `"f"` or `"g1"`, `"g2"`, … (1-based).
    pub function: String,
    pub values: Vec<EpiEntry>,
}

impl RadialGradient {
    /// Exact rational entries; floats are converted at their binary value.
    fn rational_row(&self) -> Option<(Vec<Q>, bool)> {
        let mut exact = true;
        let row = self
            .values
            .iter()
            .map(|e| match e.value().map(|v| (&v.value, v.is_estimate())) {
                Some((Number::Exact(q), est)) => {
                    exact &= !est;
                    Some(q.clone())
                }
                Some((Number::Float(f), _)) => {
                    exact = false;
                    from_f64(*f)
                }
                None => None,
            })
            .collect::<Option<Vec<Q>>>()?;
        Some((row, exact))
    }
}

/// Rows are the radial gradients of `f`, then of the constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternativeMatrix {
    #[serde(with = "crate::number::serde_rational_matrix")]
    pub rows: Vec<Vec<Q>>,
    pub exact: bool,
}

impl AlternativeMatrix {
    pub fn new(rows: Vec<Vec<Q>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidConfig("alternative matrix must be nonempty".into()));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("alternative matrix rows differ in length".into()));
        }
        Ok(AlternativeMatrix { rows, exact: true })
    }

    pub fn from_ints(rows: &[&[i64]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&v| Q::from_integer(v.into())).collect()).collect())
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.rows[0].len()
    }

    pub fn apply(&self, x: &[Q]) -> Vec<Q> {
        self.rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn apply_transpose(&self, v: &[Q]) -> Vec<Q> {
        (0..self.col_count()).map(|j| self.rows.iter().zip(v).map(|(r, vi)| &r[j] * vi).sum()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "kebab-case")]
pub enum GordanOutcome {
    /// `x ≥ 0`, `Σx = 1`, `Ax < 0`.
    System1 {
        #[serde(with = "serde_rational_vec")]
        x: Vec<Q>,
    },
    /// `v ≥ 0`, `Σv = 1`, `Aᵀv ≥ 0`.
    System2 {
        #[serde(with = "serde_rational_vec")]
        v: Vec<Q>,
    },
}

/// Maximizes the margin `s` in `Ax ≤ −s·1` over the simplex; solvable iff `s > 0`.
pub fn gordan_system1(a: &AlternativeMatrix) -> Option<Vec<Q>> {
    let k = a.col_count();
    // Variables: x (k), s⁺, s⁻.
    let mut obj = vec![Q::zero(); k + 2];
    obj[k] = Q::one();
    obj[k + 1] = -Q::one();
    let mut lp = Lp::new(k + 2).with_objective(obj);
    for row in &a.rows {
        let mut c = row.clone();
        c.push(Q::one());
        c.push(-Q::one());
        lp.push(c, Relation::Le, Q::zero());
    }
    let mut simplex = vec![Q::one(); k];
    simplex.extend([Q::zero(), Q::zero()]);
    lp.push(simplex, Relation::Eq, Q::one());
    match lp.solve() {
        LpOutcome::Optimal { x, value } if value.is_positive() => Some(x[..k].to_vec()),
        _ => None,
    }
}

pub fn gordan_system2(a: &AlternativeMatrix) -> Option<Vec<Q>> {
    let m = a.row_count();
    let mut lp = Lp::new(m);
    for j in 0..a.col_count() {
        lp.push(a.rows.iter().map(|r| r[j].clone()).collect(), Relation::Ge, Q::zero());
    }
    lp.push(vec![Q::one(); m], Relation::Eq, Q::one());
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

/// Exactly one of the two systems is solvable; anything else is a solver bug.
pub fn gordan_alternative(a: &AlternativeMatrix) -> Result<GordanOutcome> {
    match (gordan_system1(a), gordan_system2(a)) {
        (Some(x), None) => Ok(GordanOutcome::System1 { x }),
        (None, Some(v)) => Ok(GordanOutcome::System2 { v }),
        (Some(_), Some(_)) => Err(Error::Internal("both Gordan systems reported solvable".into())),
        (None, None) => Err(Error::Internal("neither Gordan system reported solvable".into())),
    }
}

/// Maximal linearly independent prefix-greedy subset of the generators.
pub fn basis_select(d: &DirectionSet) -> Result<Vec<Direction>> {
    if d.is_empty() {
        return Err(Error::EmptyDirectionSet);
    }
    let mut basis: Vec<Direction> = Vec::new();
    let mut rows: Vec<Vec<Q>> = Vec::new();
    for dir in &d.directions {
        rows.push(dir.0.clone());
        if rank(&rows) == rows.len() {
            basis.push(dir.clone());
        } else {
            rows.pop();
        }
    }
    Ok(basis)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    FjNecessary,
    KktSufficient,
    KktSufficientActive,
    GlobalMinGeometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KktMode {
    #[default]
    Active,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Multipliers {
    /// Objective multiplier; absent for sufficiency systems.
    pub v0: Option<Number>,
    /// Constraint multipliers, indexed like `constraints`.
    pub v: Vec<Number>,
    /// Constraint indices (0-based) the entries of `v` refer to.
    pub constraints: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub status: Status,
    pub point: Point,
    pub basis: Vec<Direction>,
    pub gradients: Vec<RadialGradient>,
    pub multipliers: Option<Multipliers>,
    /// Feasible direction with negative objective epiderivative.
    pub witness: Option<Direction>,
    pub assumptions: Vec<(Assumption, AssumptionOutcome)>,
    /// FJ only: `v₀ = 1` solvable and constraint gradients independent.
    pub kkt_grade: Option<bool>,
    /// Active-only sufficiency: whether the equality form also solves on every tested basis.
    pub equality_form: Option<bool>,
    pub bases_tested: usize,
    /// Every value entering the decision came from an exact method.
    pub exact: bool,
    pub notes: Vec<String>,
}

impl Certificate {
    fn new(kind: CertificateKind, point: &Point) -> Self {
        Certificate {
            kind,
            status: Status::Inconclusive,
            point: point.clone(),
            basis: Vec::new(),
            gradients: Vec::new(),
            multipliers: None,
            witness: None,
            assumptions: Vec::new(),
            kkt_grade: None,
            equality_form: None,
            bases_tested: 0,
            exact: true,
            notes: Vec::new(),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.status == Status::Certified
    }
}

/// Objective (restricted to `S`) and selected constraint gradients along `basis`.
pub fn radial_gradients(
    p: &Problem,
    xbar: &Point,
    basis: &[Direction],
    constraints: &[usize],
    cfg: &EstimatorConfig,
) -> Result<Vec<RadialGradient>> {
    let entry = EpiEntry::from_result;
    let mut out = vec![RadialGradient {
        function: "f".into(),
        values: basis.iter().map(|d| entry(objective_epiderivative(p, xbar, d, cfg))).collect::<Result<_>>()?,
    }];
    for &i in constraints {
        out.push(RadialGradient {
            function: format!("g{}", i + 1),
            values: basis
                .iter()
                .map(|d| entry(constraint_epiderivative(p, i, xbar, d, cfg)))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

fn rational_rows(gradients: &[RadialGradient]) -> Option<(Vec<Vec<Q>>, bool)> {
    let mut exact = true;
    let mut rows = Vec::with_capacity(gradients.len());
    for g in gradients {
        let (row, e) = g.rational_row()?;
        exact &= e;
        rows.push(row);
    }
    Some((rows, exact))
}

fn most_negative(basis: &[Direction], f_row: &[Q]) -> Option<Direction> {
    let (j, v) = f_row.iter().enumerate().min_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    v.is_negative().then(|| basis[j].clone())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FjOptions {
    /// Accept linearly dependent direction sets (off by default).
    pub allow_dependent: bool,
}

/// `v₀ ∇f + Σ vᵢ ∇gᵢ ≥ 0` with `(v₀, v) ≥ 0`, `≠ 0` along `basis`.
///
/// Certified when a solution with `v₀ > 0` exists. When only `v₀ = 0`
/// solutions exist, or a common strict descent combination exists, the
/// point is refuted with the basis direction of most negative objective
/// value as witness.
pub fn check_fj_necessary(
    p: &Problem,
    xbar: &Point,
    basis: &[Direction],
    cfg: &EstimatorConfig,
    opts: &FjOptions,
) -> Result<Certificate> {
    p.require_feasible(xbar)?;
    let mut cert = Certificate::new(CertificateKind::FjNecessary, xbar);
    cert.basis = basis.to_vec();
    if basis.is_empty() {
        cert.status = Status::Certified;
        cert.multipliers = Some(Multipliers { v0: Some(Number::Exact(Q::one())), v: vec![], constraints: vec![] });
        cert.notes.push("empty direction set: conditions hold vacuously".into());
        return Ok(cert);
    }
    for d in basis {
        p.check_direction(d)?;
    }
    if !opts.allow_dependent && !linearly_independent(&basis.iter().map(|d| d.0.clone()).collect::<Vec<_>>()) {
        return Err(Error::InvalidConfig("basis directions are linearly dependent".into()));
    }
    let all: Vec<usize> = (0..p.constraints.len()).collect();
    cert.gradients = radial_gradients(p, xbar, basis, &all, cfg)?;
    let Some((rows, exact)) = rational_rows(&cert.gradients) else {
        cert.exact = false;
        cert.notes.push("an epiderivative along the basis is not finite".into());
        return Ok(cert);
    };
    cert.exact = exact;
    let a = AlternativeMatrix { rows: rows.clone(), exact };
    match gordan_alternative(&a)? {
        GordanOutcome::System1 { .. } => {
            cert.status = Status::Refuted;
            cert.witness = most_negative(basis, &rows[0]);
            cert.notes.push("a nonnegative combination of the basis strictly decreases every function".into());
        }
        GordanOutcome::System2 { v } => match kkt_multipliers(&rows[0], &rows[1..]) {
            Some(w) => {
                cert.status = Status::Certified;
                cert.kkt_grade = Some(rows.len() == 1 || linearly_independent(&rows[1..]));
                cert.multipliers = Some(Multipliers {
                    v0: Some(Number::Exact(Q::one())),
                    v: w.into_iter().map(Number::Exact).collect(),
                    constraints: all,
                });
            }
            None => {
                cert.status = Status::Refuted;
                cert.kkt_grade = Some(false);
                cert.witness = most_negative(basis, &rows[0]);
                cert.multipliers = Some(Multipliers {
                    v0: Some(Number::Exact(v[0].clone())),
                    v: v[1..].iter().cloned().map(Number::Exact).collect(),
                    constraints: all,
                });
                cert.notes.push("only multipliers with v0 = 0 exist".into());
            }
        },
    }
    if !exact && cert.status == Status::Certified {
        cert.status = Status::Inconclusive;
        cert.notes.push("estimator values involved".into());
    }
    Ok(cert)
}

/// `v ≥ 0` with `f + Σ vᵢ gᵢ ≥ 0` componentwise (`v₀ = 1`).
fn kkt_multipliers(f: &[Q], g: &[Vec<Q>]) -> Option<Vec<Q>> {
    let m = g.len();
    let mut lp = Lp::new(m);
    for (j, fj) in f.iter().enumerate() {
        lp.push(g.iter().map(|r| r[j].clone()).collect(), Relation::Ge, -fj.clone());
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

/// Nonzero `v ≥ 0` with `f + Σ vᵢ gᵢ ≥ 0` (or `= 0` when `equality`).
/// Without constraints the system reduces to `f ≥ 0` (or `f = 0`).
fn sufficiency_multipliers(f: &[Q], g: &[Vec<Q>], equality: bool) -> Option<Vec<Q>> {
    let m = g.len();
    if m == 0 {
        let ok = f.iter().all(|v| if equality { v.is_zero() } else { !v.is_negative() });
        return ok.then(Vec::new);
    }
    let rel = if equality { Relation::Eq } else { Relation::Ge };
    let mut lp = Lp::new(m);
    for (j, fj) in f.iter().enumerate() {
        lp.push(g.iter().map(|r| r[j].clone()).collect(), rel, -fj.clone());
    }
    let LpOutcome::Optimal { x: start, .. } = lp.solve() else { return None };
    let cap: Q = start.iter().sum::<Q>() + Q::one();
    lp.push(vec![Q::one(); m], Relation::Le, cap);
    let lp = lp.with_objective(vec![Q::one(); m]);
    match lp.solve() {
        LpOutcome::Optimal { x, value } if value.is_positive() => Some(x),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SufficiencyConfig {
    pub cones: ConeConfig,
    /// Random bases tried on sampled domains, besides the greedy one.
    pub random_bases: usize,
    /// Cap on exhaustively enumerated bases.
    pub max_bases: usize,
}

impl Default for SufficiencyConfig {
    fn default() -> Self {
        SufficiencyConfig { cones: ConeConfig::default(), random_bases: 16, max_bases: 20_000 }
    }
}

fn independent_subsets(gens: &[Direction], k: usize, cap: usize) -> (Vec<Vec<usize>>, bool) {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    let n = gens.len();
    if k == 0 || k > n {
        return (out, true);
    }
    loop {
        let rows: Vec<Vec<Q>> = idx.iter().map(|&i| gens[i].0.clone()).collect();
        if linearly_independent(&rows) {
            if out.len() == cap {
                return (out, false);
            }
            out.push(idx.clone());
        }
        let mut i = k;
        loop {
            if i == 0 {
                return (out, true);
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return (out, true);
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn sampled_bases(gens: &[Direction], k: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba5e);
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 64 * count.max(1) && k <= gens.len() {
        attempts += 1;
        let mut pick = sample(&mut rng, gens.len(), k).into_vec();
        pick.sort_unstable();
        let rows: Vec<Vec<Q>> = pick.iter().map(|&i| gens[i].0.clone()).collect();
        if linearly_independent(&rows) && !out.contains(&pick) {
            out.push(pick);
        }
    }
    out
}

/// KKT sufficiency: for every linearly independent basis of `D(x̄)` there
/// must be `v ≥ 0`, `v ≠ 0` with `∇f + Σ vᵢ ∇gᵢ ≥ 0` (all constraints under
/// Assumption 2, active constraints under Assumption 3).
pub fn check_kkt_sufficient(p: &Problem, xbar: &Point, mode: KktMode, cfg: &SufficiencyConfig) -> Result<Certificate> {
    let analysis = analyze(p, xbar, &cfg.cones)?;
    kkt_sufficient_from(p, &analysis, mode, cfg)
}

pub fn kkt_sufficient_from(p: &Problem, a: &ConeAnalysis, mode: KktMode, cfg: &SufficiencyConfig) -> Result<Certificate> {
    let xbar = &a.point;
    let kind = match mode {
        KktMode::All => CertificateKind::KktSufficient,
        KktMode::Active => CertificateKind::KktSufficientActive,
    };
    let mut cert = Certificate::new(kind, xbar);
    let (assumption, rows_used) = match mode {
        KktMode::All => (Assumption::A2, (0..p.constraints.len()).collect::<Vec<_>>()),
        KktMode::Active => (Assumption::A3, a.active.0.clone()),
    };
    let outcome = a.check_assumption(assumption, p.constraints.len());
    cert.assumptions.push((assumption, outcome.clone()));
    let d = a.set(SetKind::FeasibleD);
    if d.is_empty() {
        cert.status = if outcome.failed() { Status::Refuted } else { Status::Certified };
        cert.notes.push("no feasible directions: the feasible set is the single point".into());
        return Ok(cert);
    }
    let k = rank(&d.directions.iter().map(|x| x.0.clone()).collect::<Vec<_>>());
    let greedy = basis_select(&d)?;
    let gens = &d.directions;
    let mut bases: Vec<Vec<Direction>> = vec![greedy.clone()];
    let complete;
    match a.exactness {
        Exactness::Exhaustive => {
            let (subsets, all) = independent_subsets(gens, k, cfg.max_bases);
            complete = all;
            bases.extend(subsets.into_iter().map(|s| s.iter().map(|&i| gens[i].clone()).collect()));
        }
        Exactness::Sampled => {
            complete = false;
            for s in sampled_bases(gens, k, cfg.random_bases, cfg.cones.seed) {
                bases.push(s.iter().map(|&i| gens[i].clone()).collect());
            }
        }
    }
    bases.dedup();
    let mut seen: Vec<Vec<Direction>> = Vec::new();
    bases.retain(|b| {
        let mut key = b.clone();
        key.sort();
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });

    let mut all_solved = true;
    let mut equality_all = mode == KktMode::Active;
    let mut exact = true;
    let mut finite = true;
    for (bi, basis) in bases.iter().enumerate() {
        let gradients = radial_gradients(p, xbar, basis, &rows_used, &cfg.cones.estimator)?;
        let rows = rational_rows(&gradients);
        if bi == 0 {
            cert.basis = basis.clone();
            cert.gradients = gradients;
        }
        let Some((rows, e)) = rows else {
            finite = false;
            all_solved = false;
            continue;
        };
        exact &= e;
        if cert.witness.is_none() {
            cert.witness = most_negative(basis, &rows[0]);
        }
        let v = sufficiency_multipliers(&rows[0], &rows[1..], false);
        if mode == KktMode::Active {
            equality_all &= sufficiency_multipliers(&rows[0], &rows[1..], true).is_some();
        }
        match v {
            Some(v) => {
                if bi == 0 {
                    cert.multipliers = Some(Multipliers {
                        v0: None,
                        v: v.into_iter().map(Number::Exact).collect(),
                        constraints: rows_used.clone(),
                    });
                }
            }
            None => all_solved = false,
        }
    }
    cert.bases_tested = bases.len();
    cert.exact = exact && finite;
    if mode == KktMode::Active {
        cert.equality_form = Some(equality_all);
    }
    cert.status = if cert.witness.is_some() {
        cert.notes.push("a basis direction has negative objective epiderivative".into());
        Status::Refuted
    } else if outcome.failed() {
        if let AssumptionOutcome::FailsWithWitness { witness } = &outcome {
            cert.witness = Some(witness.clone());
        }
        cert.notes.push(format!("{assumption:?} fails"));
        Status::Refuted
    } else if all_solved && complete && cert.exact && outcome.holds() {
        Status::Certified
    } else {
        if !all_solved {
            cert.notes.push("no nonzero multipliers for some basis".into());
        }
        if !complete {
            cert.notes.push("bases were sampled, not enumerated".into());
        }
        if !cert.exact {
            cert.notes.push("estimator values involved".into());
        }
        Status::Inconclusive
    };
    Ok(cert)
}

/// `F₁(x̄) ∩ D(x̄) = ∅`: exhaustive on finite domains, sampled otherwise.
pub fn certify_global_min_geometric(p: &Problem, xbar: &Point, cfg: &ConeConfig) -> Result<Certificate> {
    let a = analyze(p, xbar, cfg)?;
    Ok(geometric_from(&a))
}

pub fn geometric_from(a: &ConeAnalysis) -> Certificate {
    let mut cert = Certificate::new(CertificateKind::GlobalMinGeometric, &a.point);
    let tol = a.tolerance;
    let descent: Vec<_> = a
        .records
        .iter()
        .filter(|r| r.feasible && r.objective.sign(tol) == std::cmp::Ordering::Less)
        .collect();
    cert.exact = !a.uses_estimates();
    cert.bases_tested = a.records.iter().filter(|r| r.feasible).count();
    let best = descent.iter().min_by(|x, y| {
        let (vx, vy) = (x.objective.value().map(|v| v.value.to_f64()), y.objective.value().map(|v| v.value.to_f64()));
        match (vx, vy) {
            (Some(a), Some(b)) => match (&x.objective.value().unwrap().value, &y.objective.value().unwrap().value) {
                (Number::Exact(p), Number::Exact(q)) => p.cmp(q),
                _ => a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal),
            },
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
    });
    match best {
        Some(r) => {
            cert.status = Status::Refuted;
            cert.witness = Some(r.direction.clone());
            cert.gradients = vec![RadialGradient { function: "f".into(), values: vec![r.objective.clone()] }];
            cert.basis = vec![r.direction.clone()];
        }
        None => {
            cert.status = match a.exactness {
                Exactness::Exhaustive => Status::Certified,
                Exactness::Sampled => Status::Inconclusive,
            };
            if cert.bases_tested == 0 {
                cert.notes.push("no feasible directions: the feasible set is the single point".into());
            }
        }
    }
    cert
}
