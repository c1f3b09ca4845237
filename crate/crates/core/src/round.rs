//! Directed rounding helpers.
//!
//! Results of `+ - * /` and `sqrt` are correctly rounded under IEEE 754. An
//! error-free residual (two-sum or fused multiply-add) tells on which side of
//! the exact value the rounded result fell, and a single `next_up`/`next_down`
//! step is taken only when it fell on the wrong side. The libm transcendentals are not correctly rounded
//! but are accurate to within one ulp on every platform we target; those get
//! one extra step of slack.

/// Machine epsilon for `f64`.
pub const EPS: f64 = f64::EPSILON;

#[inline]
pub fn up(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else {
        x.next_up()
    }
}

#[inline]
pub fn down(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else {
        x.next_down()
    }
}

/// Below this magnitude product residuals may be inexact.
const RESIDUAL_FLOOR: f64 = 1e-290;

/// Above this magnitude Dekker splitting may overflow.
#[cfg(not(target_feature = "fma"))]
const SPLIT_CEILING: f64 = 1e290;

/// Exact `a*b - p` for `p = fl(a*b)`, barring underflow.
#[cfg(target_feature = "fma")]
#[inline]
pub fn product_error(a: f64, b: f64, p: f64) -> f64 {
    a.mul_add(b, -p)
}

/// Exact `a*b - p` for `p = fl(a*b)`, barring underflow.
#[cfg(not(target_feature = "fma"))]
#[inline]
pub fn product_error(a: f64, b: f64, p: f64) -> f64 {
    if a.abs() > SPLIT_CEILING || b.abs() > SPLIT_CEILING {
        return a.mul_add(b, -p);
    }
    let split = |x: f64| {
        let c = 134_217_729.0 * x;
        let hi = c - (c - x);
        (hi, x - hi)
    };
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if two_sum_err(a, b, s) > 0.0 {
        up(s)
    } else {
        s
    }
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if two_sum_err(a, b, s) < 0.0 {
        down(s)
    } else {
        s
    }
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < RESIDUAL_FLOOR {
        return up(p);
    }
    if product_error(a, b, p) > 0.0 {
        up(p)
    } else {
        p
    }
}

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < RESIDUAL_FLOOR {
        return down(p);
    }
    if product_error(a, b, p) < 0.0 {
        down(p)
    } else {
        p
    }
}

/// Sign of `a/b - q` for the rounded quotient `q`.
#[inline]
fn div_residual_sign(a: f64, b: f64, q: f64) -> f64 {
    // q*b is within a few ulps of a, so a - fl(q*b) is exact
    let p = q * b;
    ((a - p) - product_error(q, b, p)) * b.signum()
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    if a == 0.0 {
        return q;
    }
    if q.abs() < RESIDUAL_FLOOR || a.abs() < RESIDUAL_FLOOR {
        return up(q);
    }
    if div_residual_sign(a, b, q) > 0.0 {
        up(q)
    } else {
        q
    }
}

#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    if a == 0.0 {
        return q;
    }
    if q.abs() < RESIDUAL_FLOOR || a.abs() < RESIDUAL_FLOOR {
        return down(q);
    }
    if div_residual_sign(a, b, q) < 0.0 {
        down(q)
    } else {
        q
    }
}

/// Sign-exact `a - r*r` for `r = fl(sqrt(a))`.
#[inline]
fn sqrt_residual(a: f64, r: f64) -> f64 {
    let p = r * r;
    (a - p) - product_error(r, r, p)
}

#[inline]
pub fn sqrt_up(a: f64) -> f64 {
    let r = a.sqrt();
    if !r.is_finite() || r == 0.0 {
        return r;
    }
    if a < RESIDUAL_FLOOR || sqrt_residual(a, r) > 0.0 {
        up(r)
    } else {
        r
    }
}

#[inline]
pub fn sqrt_down(a: f64) -> f64 {
    let r = a.sqrt();
    if !r.is_finite() || r == 0.0 {
        return r;
    }
    if a < RESIDUAL_FLOOR || sqrt_residual(a, r) < 0.0 {
        down(r).max(0.0)
    } else {
        r
    }
}

#[inline]
pub fn hypot_up(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return b.abs();
    }
    if b == 0.0 {
        return a.abs();
    }
    up(up(a.hypot(b)))
}

#[inline]
pub fn hypot_down(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return b.abs();
    }
    if b == 0.0 {
        return a.abs();
    }
    down(down(a.hypot(b))).max(0.0)
}

#[inline]
pub fn exp_up(x: f64) -> f64 {
    up(up(x.exp()))
}

#[inline]
pub fn exp_down(x: f64) -> f64 {
    down(down(x.exp())).max(0.0)
}

#[inline]
pub fn ln_up(x: f64) -> f64 {
    up(up(x.ln()))
}

#[inline]
pub fn ln_down(x: f64) -> f64 {
    down(down(x.ln()))
}

/// Upper bound on `x^p` for `x >= 0`.
#[inline]
pub fn powf_up(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        return if p > 0.0 { 0.0 } else { f64::INFINITY };
    }
    up(up(x.powf(p)))
}

/// Lower bound on `x^p` for `x >= 0`.
#[inline]
pub fn powf_down(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        return if p > 0.0 { 0.0 } else { f64::INFINITY };
    }
    down(down(x.powf(p))).max(0.0)
}

/// Sum of non-negative terms rounded upward.
pub fn sum_up<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms.into_iter().fold(0.0, add_up)
}

/// `log(n!)` as an upper bound, summed term by term.
pub fn ln_factorial_up(n: usize) -> f64 {
    (2..=n).fold(0.0, |acc, k| add_up(acc, ln_up(k as f64)))
}

/// `log(n!)` as a lower bound.
pub fn ln_factorial_down(n: usize) -> f64 {
    (2..=n).fold(0.0, |acc, k| add_down(acc, ln_down(k as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directed_steps_bracket_exact_values() {
        let third_up = div_up(1.0, 3.0);
        let third_down = div_down(1.0, 3.0);
        assert!(third_down < third_up);
        assert!(3.0 * third_down <= 1.0);
        assert!(3.0 * third_up >= 1.0);
        assert!(ln_down(std::f64::consts::E) <= 1.0 && 1.0 <= ln_up(std::f64::consts::E));
        assert!(exp_down(0.0) <= 1.0 && 1.0 <= exp_up(0.0));
    }

    #[test]
    fn exact_operations_are_not_widened() {
        assert_eq!(add_up(0.0, 0.7), 0.7);
        assert_eq!(sub_down(0.7, 0.7), 0.0);
        assert_eq!(mul_up(0.5, 3.0), 1.5);
        assert_eq!(div_down(1.0, 4.0), 0.25);
        assert_eq!(sqrt_up(4.0), 2.0);
        assert!(add_up(0.1, 0.2) >= 0.30000000000000004);
        assert!(add_down(0.1, 0.2) < 0.30000000000000004);
    }

    #[test]
    fn exp_up_never_underflows_to_zero() {
        assert!(exp_up(-5000.0) > 0.0);
        assert_eq!(exp_down(-5000.0), 0.0);
    }

    #[test]
    fn factorial_logs_bracket() {
        let exact = (120.0f64).ln();
        assert!(ln_factorial_down(5) <= exact && exact <= ln_factorial_up(5));
    }
}
