//! Complex disk ("ball") arithmetic.
//!
//! A [`Ball`] is a closed disk `{z : |z - mid| <= rad}`. Every operation
//! returns a disk containing all pointwise results, including the rounding
//! error made while computing the new midpoint in floating point.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::round::{self, EPS};

/// Absolute floor added to every rounding term, covers gradual underflow.
const TINY: f64 = f64::MIN_POSITIVE;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub mid: Complex64,
    pub rad: f64,
}

#[inline]
fn l1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Bound on the rounding error of a freshly computed midpoint `z`.
#[inline]
fn rounding(z: Complex64) -> f64 {
    round::add_up(round::mul_up(EPS, l1(z)), TINY)
}

/// Upper bound on `|a - b|`.
pub fn distance_up(a: Complex64, b: Complex64) -> f64 {
    let (re, e1) = two_sum(a.re, -b.re);
    let (im, e2) = two_sum(a.im, -b.im);
    round::hypot_up(round::add_up(re.abs(), e1.abs()), round::add_up(im.abs(), e2.abs()))
}

/// Below this magnitude product residuals may be inexact.
const RESIDUAL_FLOOR: f64 = 1e-290;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64, bool) {
    let p = a * b;
    let inexact_residual = p.abs() < RESIDUAL_FLOOR && a != 0.0 && b != 0.0;
    (p, round::product_error(a, b, p), inexact_residual)
}

/// Upper bound on `|z|`, avoiding `hypot` away from overflow and underflow.
#[inline]
fn norm_up(z: Complex64) -> f64 {
    let sq = round::add_up(round::mul_up(z.re, z.re), round::mul_up(z.im, z.im));
    if sq.is_finite() && sq > RESIDUAL_FLOOR {
        round::sqrt_up(sq)
    } else {
        round::hypot_up(z.re, z.im)
    }
}

/// Rounded complex sum with an exact bound on its rounding error.
#[inline]
fn add_mid(a: Complex64, b: Complex64) -> (Complex64, f64) {
    let (re, e1) = two_sum(a.re, b.re);
    let (im, e2) = two_sum(a.im, b.im);
    let z = Complex64::new(re, im);
    if !(re.is_finite() && im.is_finite()) {
        return (z, f64::INFINITY);
    }
    (z, round::add_up(e1.abs(), e2.abs()))
}

/// Rounded complex product with a bound on its rounding error.
#[inline]
fn mul_mid(a: Complex64, b: Complex64) -> (Complex64, f64) {
    let (p1, e1, u1) = two_prod(a.re, b.re);
    let (p2, e2, u2) = two_prod(a.im, b.im);
    let (p3, e3, u3) = two_prod(a.re, b.im);
    let (p4, e4, u4) = two_prod(a.im, b.re);
    let (re, e5) = two_sum(p1, -p2);
    let (im, e6) = two_sum(p3, p4);
    let z = Complex64::new(re, im);
    if !(re.is_finite() && im.is_finite()) {
        return (z, f64::INFINITY);
    }
    let mut err = round::sum_up([e1.abs(), e2.abs(), e3.abs(), e4.abs(), e5.abs(), e6.abs()]);
    if u1 || u2 || u3 || u4 {
        err = round::add_up(err, 4.0 * TINY);
    }
    (z, err)
}

impl Ball {
    pub const ZERO: Ball = Ball { mid: Complex64 { re: 0.0, im: 0.0 }, rad: 0.0 };
    pub const ONE: Ball = Ball { mid: Complex64 { re: 1.0, im: 0.0 }, rad: 0.0 };

    pub fn new(mid: Complex64, rad: f64) -> Self {
        debug_assert!(rad >= 0.0 || rad.is_nan());
        Ball { mid, rad }
    }

    pub fn point(mid: Complex64) -> Self {
        Ball { mid, rad: 0.0 }
    }

    pub fn real(x: f64) -> Self {
        Ball::point(Complex64::new(x, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.mid.re.is_finite() && self.mid.im.is_finite() && self.rad.is_finite()
    }

    /// Upper bound on `sup |z|` over the ball.
    pub fn abs_upper(&self) -> f64 {
        round::add_up(round::hypot_up(self.mid.re, self.mid.im), self.rad)
    }

    /// Lower bound on `inf |z|` over the ball (zero when the ball meets 0).
    pub fn abs_lower(&self) -> f64 {
        round::sub_down(round::hypot_down(self.mid.re, self.mid.im), self.rad).max(0.0)
    }

    pub fn contains_zero(&self) -> bool {
        self.abs_lower() <= 0.0
    }

    /// `true` if `z` certainly lies in the closed ball.
    pub fn contains(&self, z: Complex64) -> bool {
        distance_up(self.mid, z) <= self.rad
    }

    /// `true` if `other` certainly lies in the open interior of `self`.
    pub fn contains_ball_strictly(&self, other: &Ball) -> bool {
        round::add_up(distance_up(self.mid, other.mid), other.rad) < self.rad
    }

    /// Smallest ball (up to rounding) containing both.
    pub fn hull(&self, other: &Ball) -> Ball {
        let d = other.mid - self.mid;
        let dist = round::hypot_up(d.re, d.im);
        if round::add_up(dist, other.rad) <= self.rad {
            return *self;
        }
        if round::add_up(dist, self.rad) <= other.rad {
            return *other;
        }
        let rad = (dist + self.rad + other.rad) / 2.0;
        let t = if dist > 0.0 { (rad - self.rad) / dist } else { 0.0 };
        let mid = self.mid + d * t;
        let err = round::add_up(rounding(mid), round::mul_up(EPS, round::mul_up(4.0, dist)));
        Ball::new(mid, round::add_up(round::up(rad), err))
    }

    pub fn scale(&self, s: f64) -> Ball {
        let (mid, err) = mul_mid(self.mid, Complex64::new(s, 0.0));
        Ball::new(mid, round::add_up(round::mul_up(self.rad, s.abs()), err))
    }

    pub fn sqr(&self) -> Ball {
        *self * *self
    }

    pub fn powi(&self, n: u32) -> Ball {
        let mut acc = Ball::ONE;
        let mut base = *self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base.sqr();
            }
        }
        acc
    }

    /// Exact disk image of `1/z`, or `None` if the ball meets the origin.
    pub fn inv(&self) -> Option<Ball> {
        let m = self.mid;
        if self.rad == 0.0 && m.im == 0.0 && m.re != 0.0 {
            let (lo, hi) = (round::div_down(1.0, m.re), round::div_up(1.0, m.re));
            let mid = 1.0 / m.re;
            return Some(Ball::new(Complex64::new(mid, 0.0), (hi - mid).max(mid - lo)));
        }
        let m2_lo = round::add_down(round::mul_down(m.re, m.re), round::mul_down(m.im, m.im));
        let m2_hi = round::add_up(round::mul_up(m.re, m.re), round::mul_up(m.im, m.im));
        let r2 = round::mul_up(self.rad, self.rad);
        let d_lo = round::sub_down(m2_lo, r2);
        if !(d_lo > 0.0) {
            return None;
        }
        let d_hi = round::sub_up(m2_hi, round::mul_down(self.rad, self.rad));
        let d_mid = m.norm_sqr() - self.rad * self.rad;
        let mid = m.conj() / d_mid;
        let abs_m = round::hypot_up(m.re, m.im);
        // |conj(m)| * |1/D - 1/D~| with D, D~ in [d_lo, d_hi]
        let center_err = round::div_up(
            round::mul_up(abs_m, round::sub_up(d_hi, d_lo)),
            round::mul_down(d_lo, d_lo),
        );
        let rad = round::add_up(
            round::add_up(round::div_up(self.rad, d_lo), center_err),
            round::mul_up(2.0, rounding(mid)),
        );
        Some(Ball::new(mid, rad))
    }

    pub fn div(&self, den: &Ball) -> Option<Ball> {
        den.inv().map(|inv| *self * inv)
    }
}

/// Pairwise sum in a fixed tree order.
pub fn pairwise_sum(terms: &[Ball]) -> Ball {
    match terms.len() {
        0 => Ball::ZERO,
        1 => terms[0],
        n => pairwise_sum(&terms[..n / 2]) + pairwise_sum(&terms[n / 2..]),
    }
}

impl Add for Ball {
    type Output = Ball;
    fn add(self, o: Ball) -> Ball {
        let (mid, err) = add_mid(self.mid, o.mid);
        Ball::new(mid, round::add_up(round::add_up(self.rad, o.rad), err))
    }
}

impl Sub for Ball {
    type Output = Ball;
    fn sub(self, o: Ball) -> Ball {
        let (mid, err) = add_mid(self.mid, -o.mid);
        Ball::new(mid, round::add_up(round::add_up(self.rad, o.rad), err))
    }
}

impl Neg for Ball {
    type Output = Ball;
    fn neg(self) -> Ball {
        Ball::new(-self.mid, self.rad)
    }
}

impl Mul for Ball {
    type Output = Ball;
    fn mul(self, o: Ball) -> Ball {
        let (mid, err) = mul_mid(self.mid, o.mid);
        if self.rad == 0.0 && o.rad == 0.0 {
            return Ball::new(mid, err);
        }
        let a = norm_up(self.mid);
        let b = norm_up(o.mid);
        // (|a| + ra)(|b| + rb) - |a||b|
        let spread = round::add_up(
            round::add_up(round::mul_up(a, o.rad), round::mul_up(b, self.rad)),
            round::mul_up(self.rad, o.rad),
        );
        Ball::new(mid, round::add_up(spread, err))
    }
}

impl Mul<f64> for Ball {
    type Output = Ball;
    fn mul(self, s: f64) -> Ball {
        self.scale(s)
    }
}

impl Add<Complex64> for Ball {
    type Output = Ball;
    fn add(self, z: Complex64) -> Ball {
        self + Ball::point(z)
    }
}

impl Mul<Complex64> for Ball {
    type Output = Ball;
    fn mul(self, z: Complex64) -> Ball {
        self * Ball::point(z)
    }
}

impl From<Complex64> for Ball {
    fn from(z: Complex64) -> Self {
        Ball::point(z)
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {:+}i) ± {:e}", self.mid.re, self.mid.im, self.rad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inversion_matches_classical_disk_image() {
        // 1/(z + 2) on the unit disk is the disk through 1/3 and 1
        let b = Ball::new(c(2.0, 0.0), 1.0).inv().unwrap();
        assert!((b.mid.re - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.rad - 1.0 / 3.0).abs() < 1e-14);
        assert!(b.contains(c(1.0 / 3.0, 0.0)));
        assert!(b.contains(c(1.0, 0.0)));
    }

    #[test]
    fn inversion_of_ball_through_origin_fails() {
        assert!(Ball::new(c(1.0, 0.0), 1.0).inv().is_none());
        assert!(Ball::ZERO.inv().is_none());
    }

    fn arb_ball() -> impl Strategy<Value = (Ball, f64, f64)> {
        (-3.0..3.0f64, -3.0..3.0f64, 0.0..1.0f64, 0.0..0.99f64, 0.0..std::f64::consts::TAU)
            .prop_map(|(re, im, r, t, th)| (Ball::new(c(re, im), r), t, th))
    }

    fn sample((b, t, th): &(Ball, f64, f64)) -> Complex64 {
        b.mid + Complex64::from_polar(b.rad * t, *th)
    }

    proptest! {
        #[test]
        fn arithmetic_is_inclusion_isotone(x in arb_ball(), y in arb_ball()) {
            let (bx, by) = (x.0, y.0);
            let (zx, zy) = (sample(&x), sample(&y));
            prop_assert!((bx + by).contains(zx + zy));
            prop_assert!((bx - by).contains(zx - zy));
            prop_assert!((bx * by).contains(zx * zy));
            if let Some(q) = bx.div(&by) {
                prop_assert!(q.contains(zx / zy));
            }
        }
    }
}
