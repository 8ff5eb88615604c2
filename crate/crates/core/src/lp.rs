//! Exact two-phase simplex over the rationals.
//!
//! Dense tableau, Bland's rule, all variables nonnegative. Sized for the
//! tiny systems the certificate checks produce.

use num::{Signed, Zero};

use crate::number::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<Q>,
    pub relation: Relation,
    pub rhs: Q,
}

impl Constraint {
    pub fn new(coeffs: Vec<Q>, relation: Relation, rhs: Q) -> Self {
        Constraint { coeffs, relation, rhs }
    }

    pub fn holds(&self, x: &[Q]) -> bool {
        let lhs: Q = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Ge => lhs >= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

/// `maximize ⟨objective, x⟩ subject to constraints, x ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lp {
    pub vars: usize,
    pub objective: Vec<Q>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Q>, value: Q },
    Infeasible,
    Unbounded,
}

impl Lp {
    pub fn new(vars: usize) -> Self {
        Lp { vars, objective: vec![Q::zero(); vars], constraints: Vec::new() }
    }

    pub fn with_objective(mut self, objective: Vec<Q>) -> Self {
        assert_eq!(objective.len(), self.vars, "objective length");
        self.objective = objective;
        self
    }

    pub fn push(&mut self, coeffs: Vec<Q>, relation: Relation, rhs: Q) {
        assert_eq!(coeffs.len(), self.vars, "constraint length");
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
    }

    pub fn is_feasible_point(&self, x: &[Q]) -> bool {
        x.len() == self.vars && x.iter().all(|v| !v.is_negative()) && self.constraints.iter().all(|c| c.holds(x))
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).solve(&self.objective)
    }
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    /// Columns: structural, then slack/surplus, then artificial, then rhs.
    structural: usize,
    first_artificial: usize,
    width: usize,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let n = lp.vars;
        let mut normalized: Vec<(Vec<Q>, Relation, Q)> = Vec::with_capacity(lp.constraints.len());
        for c in &lp.constraints {
            if c.rhs.is_negative() {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                normalized.push((c.coeffs.iter().map(|a| -a).collect(), rel, -c.rhs.clone()));
            } else {
                normalized.push((c.coeffs.clone(), c.relation, c.rhs.clone()));
            }
        }
        let slacks = normalized.iter().filter(|c| c.1 != Relation::Eq).count();
        let artificials = normalized.iter().filter(|c| c.1 != Relation::Le).count();
        let first_artificial = n + slacks;
        let width = first_artificial + artificials;
        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let (mut s, mut a) = (n, first_artificial);
        for (coeffs, rel, rhs) in normalized {
            let mut row = vec![Q::zero(); width + 1];
            row[..n].clone_from_slice(&coeffs);
            row[width] = rhs;
            match rel {
                Relation::Le => {
                    row[s] = Q::from_integer(1.into());
                    basis.push(s);
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = Q::from_integer((-1).into());
                    row[a] = Q::from_integer(1.into());
                    basis.push(a);
                    s += 1;
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = Q::from_integer(1.into());
                    basis.push(a);
                    a += 1;
                }
            }
            rows.push(row);
        }
        Tableau { rows, basis, structural: n, first_artificial, width }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost` over columns `< allowed`. Returns false when unbounded.
    fn optimize(&mut self, cost: &[Q], allowed: usize) -> bool {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut r = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.rows[i][j].is_zero() {
                        r -= &cost[b] * &self.rows[i][j];
                    }
                }
                if r.is_positive() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return true };
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][j];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rows[i][self.width] / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((i, _)) = leave else { return false };
            self.pivot(i, j);
        }
    }

    fn value(&self, cost: &[Q]) -> Q {
        self.basis.iter().enumerate().map(|(i, &b)| &cost[b] * &self.rows[i][self.width]).sum()
    }

    fn solve(mut self, objective: &[Q]) -> LpOutcome {
        if self.first_artificial < self.width {
            let mut phase1 = vec![Q::zero(); self.width];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = Q::from_integer((-1).into());
            }
            self.optimize(&phase1, self.width);
            if self.value(&phase1).is_negative() {
                return LpOutcome::Infeasible;
            }
            // Drive zero-level artificials out; drop rows that are redundant.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] >= self.first_artificial {
                    match (0..self.first_artificial).find(|&j| !self.rows[i][j].is_zero()) {
                        Some(j) => self.pivot(i, j),
                        None => {
                            self.rows.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }
        let mut cost = vec![Q::zero(); self.width];
        cost[..self.structural].clone_from_slice(objective);
        if !self.optimize(&cost, self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![Q::zero(); self.structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                x[b] = self.rows[i][self.width].clone();
            }
        }
        let value = self.value(&cost);
        LpOutcome::Optimal { x, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{q, q_frac};

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = Lp::new(2).with_objective(vec![q(3), q(5)]);
        lp.push(vec![q(1), q(0)], Relation::Le, q(4));
        lp.push(vec![q(0), q(2)], Relation::Le, q(12));
        lp.push(vec![q(3), q(2)], Relation::Le, q(18));
        assert_eq!(lp.solve(), LpOutcome::Optimal { x: vec![q(2), q(6)], value: q(36) });
    }

    #[test]
    fn equality_and_ge_rows() {
        // max -x - y, x + y = 1, x ≥ 1/3
        let mut lp = Lp::new(2).with_objective(vec![q(-1), q(-1)]);
        lp.push(vec![q(1), q(1)], Relation::Eq, q(1));
        lp.push(vec![q(1), q(0)], Relation::Ge, q_frac(1, 3));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, q(-1));
                assert!(lp.is_feasible_point(&x));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new(1);
        lp.push(vec![q(1)], Relation::Le, q(-1));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
        let mut lp = Lp::new(2).with_objective(vec![q(1), q(0)]);
        lp.push(vec![q(1), q(-1)], Relation::Le, q(1));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = Lp::new(2).with_objective(vec![q(1), q(0)]);
        lp.push(vec![q(1), q(1)], Relation::Eq, q(2));
        lp.push(vec![q(2), q(2)], Relation::Eq, q(4));
        assert_eq!(lp.solve(), LpOutcome::Optimal { x: vec![q(2), q(0)], value: q(2) });
    }

    #[test]
    fn degenerate_cycle_candidate_terminates() {
        // Beale's example, which cycles under the textbook rule.
        let mut lp = Lp::new(4).with_objective(vec![q_frac(3, 4), q(-150), q_frac(1, 50), q(-6)]);
        lp.push(vec![q_frac(1, 4), q(-60), q_frac(-1, 25), q(9)], Relation::Le, q(0));
        lp.push(vec![q_frac(1, 2), q(-90), q_frac(-1, 50), q(3)], Relation::Le, q(0));
        lp.push(vec![q(0), q(0), q(1), q(0)], Relation::Le, q(1));
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, q_frac(1, 20)),
            other => panic!("{other:?}"),
        }
    }
}
