//! Rational weights `p/q` in `d` variables and certified sup bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DiskEnclosure, SystemError};
use crate::ball::Ball;
use crate::round;

/// One monomial `coef · z^exp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exp: Vec<u32>,
    pub coef: Complex64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum TermRepr {
    Dense(Complex64),
    Sparse(Term),
}

/// Sparse polynomial. Deserialises from a list whose entries are either
/// `[re, im]` (dense univariate, position = exponent) or
/// `{"exp": [...], "coef": [re, im]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<TermRepr>", into = "Vec<Term>")]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl From<Vec<TermRepr>> for Polynomial {
    fn from(v: Vec<TermRepr>) -> Self {
        let terms = v
            .into_iter()
            .enumerate()
            .map(|(i, t)| match t {
                TermRepr::Dense(coef) => Term { exp: vec![i as u32], coef },
                TermRepr::Sparse(t) => t,
            })
            .filter(|t| t.coef != Complex64::new(0.0, 0.0))
            .collect();
        Polynomial { terms }
    }
}

impl From<Polynomial> for Vec<Term> {
    fn from(p: Polynomial) -> Self {
        p.terms
    }
}

impl Polynomial {
    pub fn constant(c: Complex64) -> Self {
        Polynomial { terms: vec![Term { exp: vec![], coef: c }] }
    }

    /// Dense univariate polynomial from coefficients in increasing degree.
    pub fn univariate(coefs: &[Complex64]) -> Self {
        Polynomial::from(coefs.iter().map(|c| TermRepr::Dense(*c)).collect::<Vec<_>>())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of variables used; constants use none.
    pub fn vars(&self) -> usize {
        self.terms.iter().map(|t| t.exp.len()).max().unwrap_or(0)
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.exp.iter().enumerate().fold(t.coef, |acc, (j, e)| acc * z[j].powu(*e)))
            .sum()
    }

    pub fn eval_ball(&self, z: &[Ball]) -> Ball {
        self.terms.iter().fold(Ball::ZERO, |acc, t| {
            acc + t.exp.iter().enumerate().fold(Ball::point(t.coef), |m, (j, e)| m * z[j].powi(*e))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl Weight {
    pub fn constant(c: Complex64) -> Self {
        Weight { num: Polynomial::constant(c), den: Polynomial::constant(Complex64::new(1.0, 0.0)) }
    }

    pub fn validate(&self, d: usize) -> Result<(), SystemError> {
        if self.den.is_zero() {
            return Err(SystemError::InvalidSystem("weight denominator is identically zero".into()));
        }
        let used = self.num.vars().max(self.den.vars());
        if used > d {
            return Err(SystemError::InvalidSystem(format!("weight uses {used} variables in dimension {d}")));
        }
        let finite = |p: &Polynomial| p.terms.iter().all(|t| t.coef.is_finite());
        if !finite(&self.num) || !finite(&self.den) {
            return Err(SystemError::InvalidSystem("weight coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64, SystemError> {
        let q = self.den.eval(z);
        if q.norm() <= f64::MIN_POSITIVE {
            return Err(SystemError::Pole(format!("weight denominator vanishes at {z:?}")));
        }
        Ok(self.num.eval(z) / q)
    }

    pub fn eval_ball(&self, z: &[Ball]) -> Result<Ball, SystemError> {
        if self.is_zero() {
            return Ok(Ball::ZERO);
        }
        if self.den == Polynomial::constant(Complex64::new(1.0, 0.0)) {
            return Ok(self.num.eval_ball(z));
        }
        let q = self.den.eval_ball(z);
        let inv = q.inv().ok_or_else(|| SystemError::Pole("weight denominator may vanish on the enclosure".into()))?;
        Ok(self.num.eval_ball(z) * inv)
    }
}

/// A product of axis-aligned squares, one per coordinate: `(center, half side)`.
#[derive(Debug, Clone)]
struct SquareBox {
    squares: Vec<(Complex64, f64)>,
    upper: f64,
}

impl PartialEq for SquareBox {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper
    }
}
impl Eq for SquareBox {}
impl PartialOrd for SquareBox {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SquareBox {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

const SUP_BUDGET: usize = 200_000;
const SUP_TOLERANCE: f64 = 1.1;

/// Certified upper bound on `sup |w|` over the closed polydisc `D`.
///
/// Branch and bound over square boxes: the box with the largest interval
/// upper bound is split until that bound is within 10% of the best sampled
/// value.
pub fn weight_sup_bound(w: &Weight, domain: &DiskEnclosure) -> Result<f64, SystemError> {
    if w.is_zero() {
        return Ok(0.0);
    }
    let disks = &domain.coords;
    let min_half = disks.iter().map(|b| b.rad).fold(f64::INFINITY, f64::min).max(1e-300) * 1e-9;

    // point of the closed disk nearest to the square centre
    let sample = |sq: &[(Complex64, f64)]| -> Vec<Complex64> {
        sq.iter()
            .zip(disks)
            .map(|((c, _), d)| {
                let off = *c - d.mid;
                if off.norm() <= d.rad {
                    *c
                } else {
                    d.mid + off * (d.rad / off.norm())
                }
            })
            .collect()
    };
    let misses = |sq: &[(Complex64, f64)]| {
        sq.iter().zip(disks).any(|((c, h), d)| {
            let dx = ((c.re - d.mid.re).abs() - h).max(0.0);
            let dy = ((c.im - d.mid.im).abs() - h).max(0.0);
            round::hypot_down(dx, dy) > round::mul_up(d.rad, 1.0 + 4.0 * f64::EPSILON)
        })
    };
    let bound = |sq: &[(Complex64, f64)]| -> Result<Option<f64>, SystemError> {
        let balls: Vec<Ball> = sq
            .iter()
            .map(|(c, h)| Ball::new(*c, round::mul_up(*h, std::f64::consts::SQRT_2.next_up())))
            .collect();
        match w.eval_ball(&balls) {
            Ok(v) => Ok(Some(v.abs_upper())),
            Err(SystemError::Pole(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut lower = 0.0f64;
    let mut heap = BinaryHeap::new();
    let mut pending: Vec<Vec<(Complex64, f64)>> = vec![disks.iter().map(|d| (d.mid, d.rad)).collect()];
    let mut visited = 0usize;
    loop {
        for sq in pending.drain(..) {
            if misses(&sq) {
                continue;
            }
            if let Ok(v) = w.eval(&sample(&sq)) {
                lower = lower.max(v.norm());
            }
            match bound(&sq)? {
                Some(upper) => heap.push(SquareBox { squares: sq, upper }),
                None => {
                    if sq.iter().all(|(_, h)| *h < min_half) {
                        return Err(SystemError::Pole("weight denominator vanishes on the domain".into()));
                    }
                    heap.push(SquareBox { squares: sq, upper: f64::INFINITY });
                }
            }
        }
        let Some(top) = heap.peek() else {
            return Ok(lower);
        };
        if top.upper <= SUP_TOLERANCE * lower || visited >= SUP_BUDGET {
            if !top.upper.is_finite() {
                return Err(SystemError::Pole("weight denominator may vanish on the domain".into()));
            }
            return Ok(top.upper);
        }
        let top = heap.pop().expect("peeked");
        visited += 1;
        // split the largest square into four
        let j = (0..top.squares.len())
            .max_by(|&a, &b| top.squares[a].1.total_cmp(&top.squares[b].1))
            .unwrap_or(0);
        let (c, h) = top.squares[j];
        let q = h / 2.0;
        for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            let mut sq = top.squares.clone();
            sq[j] = (c + Complex64::new(sx * q, sy * q), q);
            pending.push(sq);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_disk() -> DiskEnclosure {
        DiskEnclosure { coords: vec![Ball::new(c(0.0, 0.0), 1.0)] }
    }

    #[test]
    fn parses_dense_and_sparse_terms() {
        let p: Polynomial = serde_json::from_str(r#"[[1,0],[0,0],[2,1]]"#).unwrap();
        assert_eq!(p.eval(&[c(2.0, 0.0)]), c(9.0, 4.0));
        let q: Polynomial = serde_json::from_str(r#"[{"exp":[1,2],"coef":[3,0]}]"#).unwrap();
        assert_eq!(q.eval(&[c(2.0, 0.0), c(0.0, 1.0)]), c(-6.0, 0.0));
        let back: Polynomial = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn sup_bound_examples() {
        let one = Weight::constant(c(1.0, 0.0));
        assert_eq!(weight_sup_bound(&one, &unit_disk()).unwrap(), 1.0);

        let z = Weight { num: Polynomial::univariate(&[c(0.0, 0.0), c(1.0, 0.0)]), den: Polynomial::constant(c(1.0, 0.0)) };
        let s = weight_sup_bound(&z, &unit_disk()).unwrap();
        assert!((1.0..=1.1).contains(&s), "{s}");

        let inv_sq = Weight {
            num: Polynomial::constant(c(1.0, 0.0)),
            den: Polynomial::univariate(&[c(4.0, 0.0), c(4.0, 0.0), c(1.0, 0.0)]),
        };
        let s = weight_sup_bound(&inv_sq, &unit_disk()).unwrap();
        assert!((1.0..=1.1).contains(&s), "{s}");

        let zero = Weight::constant(c(0.0, 0.0));
        assert_eq!(weight_sup_bound(&zero, &unit_disk()).unwrap(), 0.0);
    }

    #[test]
    fn pole_on_domain_is_reported() {
        let pole = Weight {
            num: Polynomial::constant(c(1.0, 0.0)),
            den: Polynomial::univariate(&[c(-0.5, 0.0), c(1.0, 0.0)]),
        };
        assert!(matches!(weight_sup_bound(&pole, &unit_disk()), Err(SystemError::Pole(_))));
    }

    #[test]
    fn bivariate_sup_bound() {
        // |z1 z2| on the polydisc of radii (1, 2) peaks at 2
        let w = Weight {
            num: Polynomial { terms: vec![Term { exp: vec![1, 1], coef: c(1.0, 0.0) }] },
            den: Polynomial::constant(c(1.0, 0.0)),
        };
        let dom = DiskEnclosure { coords: vec![Ball::new(c(0.0, 0.0), 1.0), Ball::new(c(0.0, 0.0), 2.0)] };
        let s = weight_sup_bound(&w, &dom).unwrap();
        assert!((2.0..=2.2).contains(&s), "{s}");
    }
}
