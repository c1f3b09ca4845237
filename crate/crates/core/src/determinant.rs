//! Traces from the fixed-point formula, Taylor coefficients of
//! `Δ(ζ) = det(I − ζL) = 1 + Σ α_n ζ^n`, tail control and evaluation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apriori::{self, ExpClassBound};
use crate::ball::{self, Ball};
use crate::round;
use crate::systems::{self, MapWeightSystem, SystemError};

pub const DEFAULT_WORD_BUDGET: u64 = 1_000_000;

/// Terms examined by [`tail_sum`] before giving up.
const TAIL_MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeterminantError {
    #[error("{branches}^{n} words exceed the budget of {budget}; largest feasible order is {max_feasible}")]
    Budget { branches: usize, n: usize, budget: u64, max_feasible: usize },
    #[error("word {word:?}: {source}")]
    Word { word: Vec<usize>, source: SystemError },
    #[error("tail bound does not converge at radius {radius}")]
    Divergent { radius: f64 },
    #[error("traces must be given for n = 1, …, N in order")]
    MissingTraces,
    #[error(transparent)]
    System(#[from] SystemError),
}

/// `a_n = tr(L^n)/n` with a certified error radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceValue {
    pub n: usize,
    pub value: Complex64,
    pub error_radius: f64,
}

impl TraceValue {
    pub fn ball(&self) -> Ball {
        Ball::new(self.value, self.error_radius)
    }

    /// `tr(L^n)` as a ball.
    pub fn trace(&self) -> Ball {
        self.ball().scale(self.n as f64)
    }
}

/// Largest `n` with `branches^n ≤ budget`.
pub fn max_feasible_order(branches: usize, budget: u64) -> usize {
    if branches <= 1 {
        return usize::MAX;
    }
    let mut n = 0usize;
    let mut words = 1u128;
    while words * branches as u128 <= budget as u128 {
        words *= branches as u128;
        n += 1;
    }
    n
}

fn word_of(index: u64, n: usize, base: usize) -> Vec<usize> {
    let mut word = vec![0usize; n];
    let mut x = index;
    for slot in word.iter_mut().rev() {
        *slot = (x % base as u64) as usize;
        x /= base as u64;
    }
    word
}

fn word_term(word: &[usize], s: &MapWeightSystem) -> Result<Ball, SystemError> {
    let weights: Vec<_> = word.iter().map(|&i| &s.branches()[i].weight).collect();
    if weights.iter().any(|w| w.is_zero()) {
        return Ok(Ball::ZERO);
    }
    let fp = systems::fixed_point(word, s)?;
    let mut w = Ball::ONE;
    for (weight, z) in weights.iter().zip(&fp.orbit) {
        w = w * weight.eval_ball(&z.coords)?;
    }
    let inv = fp.det_factor.inv().ok_or_else(|| SystemError::SingularMultiplier { word: word.to_vec() })?;
    Ok(w * inv)
}

/// `a_n = (1/n) Σ_{|i| = n} w_i / det(I − φ_i'(z_i))`.
///
/// Words are enumerated lexicographically, evaluated in parallel and summed
/// pairwise in enumeration order.
pub fn ruelle_trace(s: &MapWeightSystem, n: usize, budget: u64) -> Result<TraceValue, DeterminantError> {
    if n == 0 {
        return Err(DeterminantError::MissingTraces);
    }
    let base = s.len();
    let max_feasible = max_feasible_order(base, budget);
    if n > max_feasible {
        return Err(DeterminantError::Budget { branches: base, n, budget, max_feasible });
    }
    let count = (base as u64).pow(n as u32);
    let terms: Vec<Result<Ball, SystemError>> =
        (0..count).into_par_iter().map(|k| word_term(&word_of(k, n, base), s)).collect();
    let mut values = Vec::with_capacity(terms.len());
    for (k, t) in terms.into_iter().enumerate() {
        match t {
            Ok(b) => values.push(b),
            Err(source) => return Err(DeterminantError::Word { word: word_of(k as u64, n, base), source }),
        }
    }
    let a = divide(ball::pairwise_sum(&values), n);
    Ok(TraceValue { n, value: a.mid, error_radius: a.rad })
}

/// Traces `a_1, …, a_N`.
pub fn ruelle_traces(s: &MapWeightSystem, order: usize, budget: u64) -> Result<Vec<TraceValue>, DeterminantError> {
    let base = s.len();
    let max_feasible = max_feasible_order(base, budget);
    if order > max_feasible {
        return Err(DeterminantError::Budget { branches: base, n: order, budget, max_feasible });
    }
    (1..=order).map(|n| ruelle_trace(s, n, budget)).collect()
}

fn divide(b: Ball, n: usize) -> Ball {
    b * Ball::real(n as f64).inv().expect("n > 0")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantExpansion {
    pub order: usize,
    /// `α_1, …, α_N`.
    pub alpha: Vec<Ball>,
    /// Class whose Taylor bound controls `|α_n|` for `n > N`.
    pub class: ExpClassBound,
    /// Largest disagreement between the recursion and the composition sum
    /// over `n ≤ min(N, 8)`, relative to the sum of absolute composition terms.
    pub cross_check: f64,
}

impl DeterminantExpansion {
    /// Certified bound on `|α_n|` for `n > N`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        apriori::taylor_coeff_bound(&self.class, n)
    }

    /// `1, α_1, …, α_N` as midpoints.
    pub fn coefficients(&self) -> Vec<Complex64> {
        std::iter::once(Complex64::new(1.0, 0.0)).chain(self.alpha.iter().map(|b| b.mid)).collect()
    }
}

/// `α_n = −(1/n) Σ_{m=1}^{n} m a_m α_{n−m}` in ball arithmetic.
pub fn alpha_recursion(a: &[Ball]) -> Vec<Ball> {
    let mut alpha = vec![Ball::ONE];
    for n in 1..=a.len() {
        let mut s = Ball::ZERO;
        for m in 1..=n {
            s = s + a[m - 1].scale(m as f64) * alpha[n - m];
        }
        alpha.push(-divide(s, n));
    }
    alpha.remove(0);
    alpha
}

/// The recursion on midpoints.
pub fn alpha_from_traces(a: &[Complex64]) -> Vec<Complex64> {
    let mut alpha = vec![Complex64::new(1.0, 0.0)];
    for n in 1..=a.len() {
        let s: Complex64 = (1..=n).map(|m| a[m - 1] * m as f64 * alpha[n - m]).sum();
        alpha.push(-s / n as f64);
    }
    alpha.remove(0);
    alpha
}

/// `α_n = Σ_j ((−1)^j / j!) Σ_{n_1+⋯+n_j = n} Π a_{n_l}`, summed over the
/// `2^{n−1}` compositions of `n`.
pub fn alpha_from_traces_partition(a: &[Complex64]) -> Vec<Complex64> {
    partition_sums(a).into_iter().map(|(t, _)| t).collect()
}

/// Composition sums together with the sums of absolute term values.
fn partition_sums(a: &[Complex64]) -> Vec<(Complex64, f64)> {
    (1..=a.len())
        .map(|n| {
            let mut total = Complex64::new(0.0, 0.0);
            let mut magnitude = 0.0;
            for mask in 0u64..(1u64 << (n - 1)) {
                // bit i set: cut after position i + 1
                let mut prod = Complex64::new(1.0, 0.0);
                let mut parts = 0u32;
                let mut start = 0usize;
                for pos in 1..=n {
                    if pos == n || mask & (1 << (pos - 1)) != 0 {
                        prod *= a[pos - start - 1];
                        parts += 1;
                        start = pos;
                    }
                }
                let fact: f64 = (1..=parts).map(f64::from).product();
                let sign = if parts.is_multiple_of(2) { 1.0 } else { -1.0 };
                total += prod * (sign / fact);
                magnitude += prod.norm() / fact;
            }
            (total, magnitude)
        })
        .collect()
}

/// Determinant expansion from traces `a_1, …, a_N`.
pub fn det_coefficients(traces: &[TraceValue], class: ExpClassBound) -> Result<DeterminantExpansion, DeterminantError> {
    if traces.iter().enumerate().any(|(i, t)| t.n != i + 1) {
        return Err(DeterminantError::MissingTraces);
    }
    let a: Vec<Ball> = traces.iter().map(TraceValue::ball).collect();
    let alpha = alpha_recursion(&a);
    let k = traces.len().min(8);
    let mids: Vec<Complex64> = traces[..k].iter().map(|t| t.value).collect();
    let cross_check = partition_sums(&mids)
        .iter()
        .zip(&alpha)
        .map(|((p, mag), r)| if *mag == 0.0 { 0.0 } else { (p - r.mid).norm() / mag })
        .fold(0.0, f64::max);
    Ok(DeterminantExpansion { order: traces.len(), alpha, class, cross_check })
}

/// Certified bound on `Σ_{n>N} |α_n| R^n`.
///
/// The log of the Taylor bound is concave in `n`, so once the term ratio
/// drops below 1/2 it stays there and the remainder is at most the next
/// term doubled.
pub fn tail_sum(exp: &DeterminantExpansion, radius: f64) -> Result<f64, DeterminantError> {
    if exp.class.gauge == 0.0 || radius == 0.0 {
        return Ok(0.0);
    }
    let ln_r = round::ln_up(radius);
    let log_term = |n: usize| {
        let l = apriori::taylor_coeff_log_bound(&exp.class, n);
        round::add_up(l, round::mul_up(n as f64, ln_r).max(round::mul_down(n as f64, ln_r)))
    };
    let mut sum = 0.0;
    let mut cur = log_term(exp.order + 1);
    for n in (exp.order + 1..).take(TAIL_MAX_TERMS) {
        let next = log_term(n + 1);
        sum = round::add_up(sum, round::exp_up(cur));
        let slack = 1e-10 * (1.0 + cur.abs().max(next.abs()));
        if next - cur + slack < -std::f64::consts::LN_2 {
            let total = round::add_up(sum, round::mul_up(2.0, round::exp_up(next)));
            if !total.is_finite() {
                break;
            }
            return Ok(total);
        }
        cur = next;
    }
    Err(DeterminantError::Divergent { radius })
}

/// `Δ_N(ζ)` in ball arithmetic, without the tail.
pub fn det_eval_truncated(exp: &DeterminantExpansion, z: Ball) -> Ball {
    let mut p = Ball::ZERO;
    for a in exp.alpha.iter().rev() {
        p = p * z + *a;
    }
    p * z + Ball::ONE
}

/// Enclosure of `Δ(ζ)`: the degree-`N` part widened by the tail bound.
pub fn det_eval(exp: &DeterminantExpansion, z: Complex64) -> Result<Ball, DeterminantError> {
    let head = det_eval_truncated(exp, Ball::point(z));
    let tail = tail_sum(exp, round::hypot_up(z.re, z.im))?;
    Ok(Ball::new(head.mid, round::add_up(head.rad, tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::systems::{Branch, HoloMap, Weight};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn affine_system(domain: Domain, maps: &[(f64, f64)], w: f64) -> MapWeightSystem {
        let branches = maps
            .iter()
            .map(|(a, b)| Branch {
                map: HoloMap::Affine { a: c(*a, 0.0), b: c(*b, 0.0) },
                weight: Weight::constant(c(w, 0.0)),
            })
            .collect();
        MapWeightSystem::new(domain, branches, None).unwrap()
    }

    fn doubling() -> MapWeightSystem {
        affine_system(Domain::disk(c(0.5, 0.0), 1.0).unwrap(), &[(0.5, 0.0), (0.5, 0.5)], 0.5)
    }

    fn strong_class() -> ExpClassBound {
        ExpClassBound { d: 1, c: 2.0, gauge: 1.0 }
    }

    #[test]
    fn single_branch_trace() {
        let s = affine_system(Domain::disk(c(0.0, 0.0), 1.0).unwrap(), &[(0.5, 0.0)], 1.0);
        let t = ruelle_trace(&s, 1, DEFAULT_WORD_BUDGET).unwrap();
        assert!((t.value - c(2.0, 0.0)).norm() < 1e-14 && t.error_radius < 1e-12);
        assert!(t.ball().contains(c(2.0, 0.0)));
    }

    #[test]
    fn doubling_traces() {
        let s = doubling();
        for n in 1..=8 {
            let t = ruelle_trace(&s, n, DEFAULT_WORD_BUDGET).unwrap();
            let exact = 1.0 / (1.0 - 0.5f64.powi(n as i32)) / n as f64;
            assert!((t.value.re - exact).abs() < 1e-13, "n={n}");
            assert!((t.value.re - exact).abs() <= t.error_radius + 1e-15);
        }
        let t = ruelle_trace(&s, 2, DEFAULT_WORD_BUDGET).unwrap();
        assert!((t.value.re - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_weights_give_zero_traces() {
        let s = affine_system(Domain::disk(c(0.5, 0.0), 1.0).unwrap(), &[(0.5, 0.0), (0.5, 0.5)], 0.0);
        let t = ruelle_traces(&s, 4, DEFAULT_WORD_BUDGET).unwrap();
        assert!(t.iter().all(|t| t.value == c(0.0, 0.0) && t.error_radius == 0.0));
        let e = det_coefficients(&t, strong_class()).unwrap();
        assert!(e.alpha.iter().all(|a| a.mid == c(0.0, 0.0)));
    }

    #[test]
    fn budget_is_enforced() {
        let s = doubling();
        match ruelle_trace(&s, 11, 1000) {
            Err(DeterminantError::Budget { max_feasible: 9, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(max_feasible_order(2, DEFAULT_WORD_BUDGET), 19);
    }

    #[test]
    fn doubling_coefficients() {
        let traces = ruelle_traces(&doubling(), 12, DEFAULT_WORD_BUDGET).unwrap();
        let e = det_coefficients(&traces, strong_class()).unwrap();
        assert!(e.alpha[0].contains(c(-2.0, 0.0)) && (e.alpha[0].mid.re + 2.0).abs() < 1e-12);
        assert!(e.alpha[1].contains(c(4.0 / 3.0, 0.0)) && (e.alpha[1].mid.re - 4.0 / 3.0).abs() < 1e-12);
        assert!(e.cross_check < 1e-12);
        // elementary symmetric functions of the spectrum 2^{−k}
        let mut e_exact = [0.0f64; 13];
        e_exact[0] = 1.0;
        for k in 0..60 {
            let x = 0.5f64.powi(k);
            for j in (1..=12).rev() {
                e_exact[j] += x * e_exact[j - 1];
            }
        }
        for (n, &e_n) in e_exact.iter().enumerate().take(13).skip(1) {
            let exact = if n % 2 == 0 { e_n } else { -e_n };
            assert!((e.alpha[n - 1].mid.re - exact).abs() < 1e-10 * (1.0 + exact.abs()), "n={n}");
        }
    }

    #[test]
    fn recursion_matches_composition_sum_examples() {
        let a = [c(2.0, 0.0), c(2.0 / 3.0, 0.0)];
        let r = alpha_from_traces(&a);
        let p = alpha_from_traces_partition(&a);
        assert!((r[1] - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((p[1] - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(alpha_from_traces(&[c(0.0, 0.0); 5]).iter().all(|x| x.norm() == 0.0));
    }

    proptest! {
        #[test]
        fn recursion_and_composition_sum_agree(v in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 8)) {
            let a: Vec<Complex64> = v.iter().map(|(r, i)| c(*r, *i)).collect();
            let r = alpha_from_traces(&a);
            for (x, (y, mag)) in r.iter().zip(partition_sums(&a)) {
                prop_assert!((x - y).norm() <= 1e-12 * mag.max(x.norm()));
            }
        }

        #[test]
        fn ball_recursion_encloses_point_recursion(v in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 6)) {
            let a: Vec<Complex64> = v.iter().map(|(r, i)| c(*r, *i)).collect();
            let balls: Vec<Ball> = a.iter().map(|z| Ball::point(*z)).collect();
            let rb = alpha_recursion(&balls);
            let p = alpha_from_traces_partition(&a);
            for (b, z) in rb.iter().zip(&p) {
                prop_assert!((b.mid - z).norm() <= b.rad + 1e-12 * (1.0 + z.norm()));
            }
        }
    }

    #[test]
    fn tail_sum_examples() {
        let e = DeterminantExpansion {
            order: 20,
            alpha: vec![Ball::ZERO; 20],
            class: ExpClassBound { d: 1, c: 1.0, gauge: 1.0 },
            cross_check: 0.0,
        };
        let t = tail_sum(&e, 1.0).unwrap();
        // brute force over many terms
        let brute: f64 = (21..100_000).map(|n| e.tail_bound(n)).sum();
        assert!(t >= brute);
        let first = (-0.5 * 441.0 + 21.0 + 1.0f64).exp();
        assert!(t < 1.01 * first * 2.0 && t >= first);

        let zero = DeterminantExpansion { class: ExpClassBound { gauge: 0.0, ..e.class }, ..e.clone() };
        assert_eq!(tail_sum(&zero, 5.0).unwrap(), 0.0);

        let short = DeterminantExpansion { order: 1, alpha: vec![Ball::ZERO], ..e };
        assert!(matches!(tail_sum(&short, 1e300), Err(DeterminantError::Divergent { .. })));
    }

    #[test]
    fn evaluation_examples() {
        // large doubling domain gives a usable class
        let s = affine_system(Domain::disk(c(0.5, 0.0), 256.0).unwrap(), &[(0.5, 0.0), (0.5, 0.5)], 0.5);
        let traces = ruelle_traces(&s, 16, DEFAULT_WORD_BUDGET).unwrap();
        let class = ExpClassBound { d: 1, c: (1.0f64 / 0.65).ln(), gauge: 1.0 / (0.65 - 0.5 - 0.5 / 256.0) };
        let e = det_coefficients(&traces, class).unwrap();
        assert_eq!(det_eval(&e, c(0.0, 0.0)).unwrap().mid, c(1.0, 0.0));
        assert!(det_eval(&e, c(1.0, 0.0)).unwrap().contains(c(0.0, 0.0)));
        let exact: f64 = (0..50).map(|k| 1.0 - 0.5f64.powi(k + 1)).product();
        let v = det_eval(&e, c(0.5, 0.0)).unwrap();
        assert!(v.contains(c(exact, 0.0)), "{v} vs {exact}");
        assert!((v.mid.re - 0.288788).abs() < 1e-6);
    }
}
