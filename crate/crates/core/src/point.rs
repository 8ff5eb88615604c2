//! Points, directions and the small amount of exact linear algebra the cone
//! and certificate code needs.

use std::fmt;

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number::{format_rational, parse_rational, serde_rational_vec, to_f64, Number, Q};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(#[serde(with = "serde_rational_vec")] pub Vec<Q>);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Direction(#[serde(with = "serde_rational_vec")] pub Vec<Q>);

/// Parses a comma-separated list of rational literals, e.g. `"1,-1/2,0.25"`.
pub fn parse_csv(text: &str) -> Result<Vec<Q>> {
    text.split(',').map(parse_rational).collect()
}

fn write_coords(f: &mut fmt::Formatter<'_>, coords: &[Q]) -> fmt::Result {
    f.write_str("(")?;
    for (i, c) in coords.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        f.write_str(&format_rational(c))?;
    }
    f.write_str(")")
}

impl Point {
    pub fn new(coords: Vec<Q>) -> Self {
        Point(coords)
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        Point(coords.iter().map(|&c| crate::number::q(c)).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_csv(text).map(Point)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Q] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(to_f64).collect()
    }

    /// `self + t * d`.
    pub fn along(&self, t: &Q, d: &Direction) -> Point {
        Point(self.0.iter().zip(&d.0).map(|(x, di)| x + t * di).collect())
    }

    /// The vector `other - self`, or `None` when the points coincide.
    pub fn direction_to(&self, other: &Point) -> Option<Direction> {
        let diff: Vec<Q> = other.0.iter().zip(&self.0).map(|(a, b)| a - b).collect();
        if diff.iter().all(Zero::is_zero) {
            None
        } else {
            Some(Direction(diff))
        }
    }

    /// The step `t > 0` with `self + t d = other`, if `other` lies on the open ray.
    pub fn ray_parameter(&self, d: &Direction, other: &Point) -> Option<Q> {
        let mut t: Option<Q> = None;
        for ((x, y), di) in self.0.iter().zip(&other.0).zip(&d.0) {
            let diff = y - x;
            if di.is_zero() {
                if !diff.is_zero() {
                    return None;
                }
                continue;
            }
            let ti = diff / di;
            match &t {
                Some(prev) if *prev != ti => return None,
                None => t = Some(ti),
                _ => {}
            }
        }
        t.filter(|t| t.is_positive())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_coords(f, &self.0)
    }
}

impl Direction {
    pub fn new(coords: Vec<Q>) -> Self {
        Direction(coords)
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        Direction(coords.iter().map(|&c| crate::number::q(c)).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_csv(text).map(Direction)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Q] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(to_f64).collect()
    }

    pub fn scaled(&self, factor: &Q) -> Direction {
        Direction(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn max_norm(&self) -> Q {
        self.0.iter().map(|c| c.abs()).fold(Q::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn euclidean_norm(&self) -> Number {
        Number::sqrt_of(self.0.iter().map(|c| c * c).sum())
    }

    /// Representative of the ray `{λ d : λ > 0}` with max-norm one.
    pub fn canonical(&self) -> Result<Direction> {
        if self.is_zero() {
            return Err(Error::ZeroDirection);
        }
        let m = self.max_norm();
        Ok(Direction(self.0.iter().map(|c| c / &m).collect()))
    }

    /// Whether `self` and `other` span the same open ray.
    pub fn same_ray(&self, other: &Direction) -> bool {
        match (self.canonical(), other.canonical()) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_coords(f, &self.0)
    }
}

/// `Σ a_i b_i` over the common prefix; missing coefficients count as zero.
pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2_f64(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rank of a set of rational row vectors by exact Gaussian elimination.
pub fn rank(rows: &[Vec<Q>]) -> usize {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let cols = m.iter().map(Vec::len).max().unwrap_or(0);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| col < m[r].len() && !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let pivot_row = m[rank].clone();
        for r in 0..m.len() {
            if r != rank && col < m[r].len() && !m[r][col].is_zero() {
                let factor = &m[r][col] / &pivot_row[col];
                for c in col..pivot_row.len().min(m[r].len()) {
                    let delta = &factor * &pivot_row[c];
                    m[r][c] -= delta;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

pub fn linearly_independent(rows: &[Vec<Q>]) -> bool {
    rank(rows) == rows.len()
}
