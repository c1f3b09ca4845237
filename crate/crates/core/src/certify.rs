//! A posteriori eigenvalue certification.
//!
//! Zeros of the truncated determinant `Δ_N` are located numerically, grouped
//! into clusters, and each cluster circle `C` is certified by Rouché's
//! theorem:
//!
//! * `|Δ − Δ_N| ≤ tail + Σ err(α_n) R^n < min_C |Δ_N|` shows that `Δ` and the
//!   midpoint polynomial `Δ_N` have equally many zeros inside `C`, where
//!   `Δ_N` keeps the coefficients up to the last one whose ball excludes zero
//!   and `err(α_n)` uses the smaller of the ball and the a priori bound;
//! * writing `Δ_N = α_N Π (ζ − ρ_j) + δ` with the approximate roots `ρ_j`,
//!   `max_C |δ| < min_C |Δ_N|` shows that this number is the count of `ρ_j`
//!   inside `C`.
//!
//! Certified zero disks are inverted exactly to eigenvalue disks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ball::Ball;
use crate::determinant::{self, DeterminantError, DeterminantExpansion};
use crate::round;

/// Roots closer than this (relative to their modulus) form one cluster.
pub const CLUSTER_GAP: f64 = 1e-6;
/// First radius tried by [`certify_leading`].
pub const INITIAL_RADIUS: f64 = 1e-12;

const INITIAL_ARCS: usize = 64;
const MAX_ARC_DEPTH: u32 = 24;
/// Arc evaluations after which the circle bound gives up.
const MAX_ARCS: usize = 1 << 16;
const ARC_ACCEPT: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("truncated determinant has no roots")]
    NoRoots,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("eigensolver failed on the companion matrix")]
    Eigensolver,
    #[error(transparent)]
    Determinant(#[from] DeterminantError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailedInequality {
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedEigenvalue {
    pub zero_center: Complex64,
    pub zero_radius: f64,
    pub multiplicity: usize,
    /// Contains `1/ζ` for every `ζ` in the zero disk.
    pub eigenvalue_disk: Ball,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_inequality: Option<FailedInequality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: Complex64,
    pub members: Vec<Complex64>,
}

fn sort_key(z: &Complex64) -> (i64, f64) {
    // modulus quantised so that numerically equal moduli tie and fall back to the argument
    ((z.norm().ln() * 1e10).round() as i64, z.arg())
}

fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| {
        let (ka, kb) = (sort_key(a), sort_key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
}

/// Evaluates `Σ p_k ζ^k` and its derivative.
fn horner(p: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for c in p.iter().rev() {
        dv = dv * z + v;
        v = v * z + c;
    }
    (v, dv)
}

/// Degree after dropping numerically vanishing leading coefficients.
fn effective_degree(p: &[Complex64]) -> usize {
    let mut n = p.len() - 1;
    while n > 0 && !(p[n].norm() > 1e-300) {
        n -= 1;
    }
    n
}

/// Approximate zeros of `Δ_N`, ordered by modulus then argument.
///
/// The reversed polynomial `ζ^N Δ_N(1/ζ)` is monic; its companion-matrix
/// eigenvalues are inverted and polished by Newton's method on `Δ_N`.
pub fn poly_roots(exp: &DeterminantExpansion) -> Result<Vec<Complex64>, CertifyError> {
    roots_of(&comparison_polynomial(exp))
}

/// Largest `n` whose coefficient ball `α_n` excludes zero; 0 if none does.
/// Coefficients above it are numerically negligible and are left out of the
/// comparison polynomial.
pub fn significant_degree(exp: &DeterminantExpansion) -> usize {
    exp.alpha.iter().rposition(|a| !a.contains_zero()).map_or(0, |i| i + 1)
}

/// Midpoint coefficients `1, α_1, …, α_{N'}` up to [`significant_degree`].
pub fn comparison_polynomial(exp: &DeterminantExpansion) -> Vec<Complex64> {
    let mut p = exp.coefficients();
    p.truncate(significant_degree(exp) + 1);
    p
}

/// Zeros of `Σ p_k ζ^k` with `p_0 ≠ 0`.
pub fn roots_of(p: &[Complex64]) -> Result<Vec<Complex64>, CertifyError> {
    if p.is_empty() || p[0].norm() == 0.0 {
        return Err(CertifyError::NoRoots);
    }
    let n = effective_degree(p);
    if n == 0 {
        return Err(CertifyError::NoRoots);
    }
    let p = &p[..=n];
    // monic in λ: λ^n + (p_1/p_0) λ^{n−1} + ⋯ + p_n/p_0
    let mut comp = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -p[j + 1] / p[0];
    }
    for i in 1..n {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    let lambdas = comp.try_schur(1e-15, 10_000).ok_or(CertifyError::Eigensolver)?.eigenvalues();
    let lambdas = lambdas.ok_or(CertifyError::Eigensolver)?;
    let mut roots: Vec<Complex64> = lambdas
        .iter()
        .filter(|l| l.norm() > 0.0)
        .map(|l| {
            let mut z = 1.0 / l;
            for _ in 0..50 {
                let (v, dv) = horner(p, z);
                let step = v / dv;
                if !step.is_finite() {
                    break;
                }
                let next = z - step;
                // keep Newton from jumping to a different root
                if (next - z).norm() > 0.1 * z.norm() {
                    break;
                }
                z = next;
                if step.norm() <= 4.0 * f64::EPSILON * z.norm() {
                    break;
                }
            }
            z
        })
        .collect();
    if roots.is_empty() {
        return Err(CertifyError::NoRoots);
    }
    sort_roots(&mut roots);
    Ok(roots)
}

/// Taylor coefficients of `p(ζ + u)` in `u`, for ball coefficients and a
/// ball shift.
fn taylor_shift(p: &[Ball], shift: Ball) -> Vec<Ball> {
    let mut q = p.to_vec();
    let n = q.len();
    for k in 0..n {
        for j in (k..n - 1).rev() {
            q[j] = q[j] + q[j + 1] * shift;
        }
    }
    q
}

/// Lower bound on `min |p|` over the closed disk `B(mid, h)` from the centred
/// form `|q_0| − Σ_{k≥1} |q_k| h^k`, together with `|p(mid)|`.
fn disk_lower_bound(p: &[Ball], mid: Ball, h: f64) -> (f64, f64) {
    let q = taylor_shift(p, mid);
    let mut rest = 0.0;
    let mut hk = 1.0;
    for qk in &q[1..] {
        hk = round::mul_up(hk, h);
        rest = round::add_up(rest, round::mul_up(qk.abs_upper(), hk));
    }
    (round::sub_down(q[0].abs_lower(), rest), q[0].mid.norm())
}

/// Certified lower bound on `min_{|ζ − c| = r} |p(ζ)|`, or 0 when the bound
/// collapses.
pub fn min_modulus_on_circle(p: &[Ball], center: Complex64, radius: f64) -> f64 {
    if !(radius > 0.0) || p.is_empty() {
        return 0.0;
    }
    let tau = std::f64::consts::TAU;
    let mut stack: Vec<(f64, f64, u32)> = (0..INITIAL_ARCS)
        .rev()
        .map(|k| (k as f64 * tau / INITIAL_ARCS as f64, (k + 1) as f64 * tau / INITIAL_ARCS as f64, 0))
        .collect();
    let mut best = f64::INFINITY;
    let mut visited = 0usize;
    while let Some((t0, t1, depth)) = stack.pop() {
        visited += 1;
        if visited > MAX_ARCS {
            return 0.0;
        }
        let tm = 0.5 * (t0 + t1);
        let offset = Complex64::from_polar(radius, tm);
        let pt = Ball::point(center) + Ball::new(offset, round::mul_up(radius, 8.0 * f64::EPSILON));
        // every arc point lies within r·Δθ/2 of the arc midpoint
        let h = round::add_up(round::mul_up(radius, round::mul_up(t1 - t0, 0.5 + 1e-15)), pt.rad);
        let mid = Ball::point(pt.mid);
        let (lower, at_mid) = disk_lower_bound(p, mid, h);
        if lower >= ARC_ACCEPT * at_mid || depth >= MAX_ARC_DEPTH || (lower > 0.0 && lower >= best) {
            best = best.min(lower);
            if best <= 0.0 {
                return 0.0;
            }
            continue;
        }
        stack.push((tm, t1, depth + 1));
        stack.push((t0, tm, depth + 1));
    }
    if best.is_finite() {
        best.max(0.0)
    } else {
        0.0
    }
}

/// Smallest `|p|` over equally spaced circle points, an upper estimate of the
/// circle minimum.
fn sampled_min_modulus(p: &[Complex64], center: Complex64, radius: f64) -> f64 {
    let count = 4 * INITIAL_ARCS;
    (0..count)
        .map(|k| {
            let z = center + Complex64::from_polar(radius, k as f64 * std::f64::consts::TAU / count as f64);
            p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `max_{|u| = ε} |Δ_N(c + u) − α_N Π (c + u − ρ_j)|`, bounded above.
fn factorisation_defect(p: &[Complex64], roots: &[Complex64], center: Complex64, eps: f64) -> f64 {
    let n = effective_degree(p);
    if roots.len() != n {
        return f64::INFINITY;
    }
    let pb: Vec<Ball> = p[..=n].iter().map(|c| Ball::point(*c)).collect();
    let shifted = taylor_shift(&pb, Ball::point(center));
    // α_N Π (u + (c − ρ_j)) in powers of u
    let mut prod = vec![Ball::point(p[n])];
    for r in roots {
        let a = Ball::point(center) - Ball::point(*r);
        let mut next = vec![Ball::ZERO; prod.len() + 1];
        for (k, q) in prod.iter().enumerate() {
            next[k] = next[k] + *q * a;
            next[k + 1] = next[k + 1] + *q;
        }
        prod = next;
    }
    let mut total = 0.0;
    let mut ek = 1.0;
    for (k, (s, q)) in shifted.iter().zip(&prod).enumerate() {
        if k > 0 {
            ek = round::mul_up(ek, eps);
        }
        total = round::add_up(total, round::mul_up((*s - *q).abs_upper(), ek));
    }
    total
}

/// Rouché test of the circle `|ζ − center| = ε` around `multiplicity`
/// approximate zeros.
pub fn rouche_certify(
    exp: &DeterminantExpansion,
    roots: &[Complex64],
    center: Complex64,
    eps: f64,
    multiplicity: usize,
) -> Result<CertifiedEigenvalue, CertifyError> {
    if !(eps > 0.0) {
        return Err(CertifyError::Precondition("radius must be positive".into()));
    }
    let inside = roots.iter().filter(|r| (**r - center).norm() < eps).count();
    if inside != multiplicity {
        return Err(CertifyError::Precondition(format!(
            "circle of radius {eps:e} encloses {inside} approximate zeros, expected {multiplicity}"
        )));
    }
    if roots.iter().any(|r| ((*r - center).norm() - eps).abs() <= 1e-12 * eps) {
        return Err(CertifyError::Precondition("an approximate zero lies on the circle".into()));
    }
    let zero_disk = Ball::new(center, eps);
    let eigenvalue_disk = zero_disk
        .inv()
        .ok_or_else(|| CertifyError::Precondition("zero disk contains the origin".into()))?;

    let p = comparison_polynomial(exp);
    let big_r = round::add_up(round::hypot_up(center.re, center.im), eps);
    let tail = match determinant::tail_sum(exp, big_r) {
        Ok(t) => t,
        Err(DeterminantError::Divergent { .. }) => f64::INFINITY,
        Err(e) => return Err(e.into()),
    };
    let mut coef_err = 0.0;
    let mut rk = 1.0;
    let kept = p.len() - 1;
    for (n, a) in exp.alpha.iter().enumerate() {
        rk = round::mul_up(rk, big_r);
        // |α_n| obeys both the computed ball and the a priori bound
        let bound = exp.tail_bound(n + 1);
        let err = if n < kept { a.rad.min(round::add_up(bound, a.mid.norm())) } else { a.abs_upper().min(bound) };
        coef_err = round::add_up(coef_err, round::mul_up(err, rk));
    }
    let lhs = round::add_up(tail, coef_err);
    let defect = factorisation_defect(&p, roots, center, eps);
    let sampled = sampled_min_modulus(&p, center, eps);
    let rhs = if lhs.max(defect) < sampled {
        let points: Vec<Ball> = p.iter().map(|c| Ball::point(*c)).collect();
        min_modulus_on_circle(&points, center, eps)
    } else {
        // an upper estimate of the minimum already refutes the inequality
        sampled
    };
    let certified = rhs > 0.0 && lhs < rhs && defect < rhs;
    Ok(CertifiedEigenvalue {
        zero_center: center,
        zero_radius: eps,
        multiplicity,
        eigenvalue_disk,
        certified,
        failed_inequality: (!certified).then_some(FailedInequality { lhs: lhs.max(defect), rhs }),
    })
}

/// Groups roots lying within [`CLUSTER_GAP`] (relative) of each other.
pub fn cluster_roots(roots: &[Complex64]) -> Vec<Cluster> {
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    for r in roots {
        let close = |g: &Vec<Complex64>| g.iter().any(|m| (m - r).norm() < CLUSTER_GAP * m.norm().max(r.norm()));
        match groups.iter_mut().find(|g| close(g)) {
            Some(g) => g.push(*r),
            None => groups.push(vec![*r]),
        }
    }
    groups
        .into_iter()
        .map(|members| {
            let center = members.iter().sum::<Complex64>() / members.len() as f64;
            Cluster { center, members }
        })
        .collect()
}

/// Smallest certifiable radius for one cluster, doubling from
/// [`INITIAL_RADIUS`] while the circle stays clear of other roots and the
/// origin.
fn certify_cluster(exp: &DeterminantExpansion, roots: &[Complex64], cluster: &Cluster) -> CertifiedEigenvalue {
    let spread = cluster.members.iter().map(|m| (m - cluster.center).norm()).fold(0.0, f64::max);
    let separation = roots
        .iter()
        .filter(|r| !cluster.members.contains(r))
        .map(|r| (r - cluster.center).norm())
        .fold(f64::INFINITY, f64::min);
    let limit = separation.min(cluster.center.norm());
    let m = cluster.members.len();
    let mut best: Option<CertifiedEigenvalue> = None;
    let mut eps = INITIAL_RADIUS;
    while eps < limit {
        if eps > spread * (1.0 + 1e-9) {
            if let Ok(c) = rouche_certify(exp, roots, cluster.center, eps, m) {
                if c.certified {
                    return c;
                }
                let ratio = |c: &CertifiedEigenvalue| {
                    c.failed_inequality.map_or(f64::INFINITY, |f| if f.rhs > 0.0 { f.lhs / f.rhs } else { f64::INFINITY })
                };
                if best.as_ref().is_none_or(|b| ratio(&c) < ratio(b)) {
                    best = Some(c);
                }
            }
        }
        eps *= 2.0;
    }
    best.unwrap_or_else(|| {
        let eps = INITIAL_RADIUS.max(spread * 2.0);
        CertifiedEigenvalue {
            zero_center: cluster.center,
            zero_radius: eps,
            multiplicity: m,
            eigenvalue_disk: Ball::new(cluster.center, eps).inv().unwrap_or(Ball::new(Complex64::new(0.0, 0.0), f64::INFINITY)),
            certified: false,
            failed_inequality: None,
        }
    })
}

/// Certification of the `k` smallest-modulus root clusters of `Δ_N`.
pub fn certify_leading(exp: &DeterminantExpansion, k: usize) -> Result<Vec<CertifiedEigenvalue>, CertifyError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let roots = poly_roots(exp)?;
    let clusters = cluster_roots(&roots);
    Ok(clusters.par_iter().take(k).map(|c| certify_cluster(exp, &roots, c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apriori::ExpClassBound;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn expansion(alpha: &[Complex64], class: ExpClassBound) -> DeterminantExpansion {
        DeterminantExpansion { order: alpha.len(), alpha: alpha.iter().map(|a| Ball::point(*a)).collect(), class, cross_check: 0.0 }
    }

    fn zero_class() -> ExpClassBound {
        ExpClassBound { d: 1, c: 1.0, gauge: 0.0 }
    }

    #[test]
    fn linear_root() {
        let e = expansion(&[c(-2.0, 0.0)], zero_class());
        let r = poly_roots(&e).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_polynomial_has_no_roots() {
        let e = expansion(&[c(0.0, 0.0); 4], zero_class());
        assert!(matches!(poly_roots(&e), Err(CertifyError::NoRoots)));
    }

    #[test]
    fn roots_are_ordered_by_modulus_then_argument() {
        // (1 − ζ/2)(1 − ζ/(2i))(1 − ζ/(−2i)) → 2, 2i, −2i tie in modulus
        let p = [c(1.0, 0.0), c(-0.5, 0.0), c(0.25, 0.0), c(-0.125, 0.0)];
        let r = roots_of(&p).unwrap();
        let args: Vec<f64> = r.iter().map(|z| z.arg()).collect();
        assert!(args.windows(2).all(|w| w[0] <= w[1]), "{r:?}");
    }

    #[test]
    fn min_modulus_examples() {
        let one = [Ball::ONE];
        assert_eq!(min_modulus_on_circle(&one, c(3.0, 1.0), 2.0), 1.0);
        let lin = [Ball::ONE, Ball::real(-2.0)];
        let m = min_modulus_on_circle(&lin, c(0.5, 0.0), 0.1);
        assert!((0.18..=0.2).contains(&m), "{m}");
        // circle through a root collapses
        assert_eq!(min_modulus_on_circle(&lin, c(0.0, 0.0), 0.5), 0.0);
    }

    #[test]
    fn min_modulus_is_within_ten_percent_of_sampling() {
        let mut rng = rand_chacha_like(7);
        for _ in 0..5 {
            let p: Vec<Ball> = (0..9).map(|_| Ball::point(c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))).collect();
            let pts: Vec<Complex64> = p.iter().map(|b| b.mid).collect();
            let (center, radius) = (c(0.1, -0.2), 0.7);
            let sampled = (0..100_000)
                .map(|k| {
                    let z = center + Complex64::from_polar(radius, k as f64 * std::f64::consts::TAU / 1e5);
                    horner(&pts, z).0.norm()
                })
                .fold(f64::INFINITY, f64::min);
            let bound = min_modulus_on_circle(&p, center, radius);
            if sampled > 1e-3 {
                assert!(bound <= sampled && bound >= 0.9 * sampled * (1.0 - 1e-6), "{bound} vs {sampled}");
            }
        }
    }

    fn rand_chacha_like(seed: u64) -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(seed)
    }

    #[test]
    fn rouche_on_exact_polynomial() {
        // Δ = (1 − ζ)(1 − ζ/2) with no tail
        let e = expansion(&[c(-1.5, 0.0), c(0.5, 0.0)], zero_class());
        let roots = poly_roots(&e).unwrap();
        let ce = rouche_certify(&e, &roots, roots[0], 1e-6, 1).unwrap();
        assert!(ce.certified);
        assert!(ce.eigenvalue_disk.contains(c(1.0, 0.0)));
        // a huge circle swallows both zeros
        assert!(matches!(rouche_certify(&e, &roots, roots[0], 5.0, 1), Err(CertifyError::Precondition(_))));
    }

    #[test]
    fn certify_leading_on_exact_polynomial() {
        // zeros at 1, 2, 4, 8
        let mut p = vec![c(1.0, 0.0)];
        for k in 0..4 {
            let s = 0.5f64.powi(k);
            let mut next = vec![c(0.0, 0.0); p.len() + 1];
            for (j, a) in p.iter().enumerate() {
                next[j] += a;
                next[j + 1] -= a * s;
            }
            p = next;
        }
        let e = expansion(&p[1..], zero_class());
        let certs = certify_leading(&e, 3).unwrap();
        assert_eq!(certs.len(), 3);
        for (cert, lambda) in certs.iter().zip([1.0, 0.5, 0.25]) {
            assert!(cert.certified);
            assert!(cert.eigenvalue_disk.contains(c(lambda, 0.0)));
            assert!(cert.eigenvalue_disk.rad <= 1e-6);
        }
        assert!(certify_leading(&e, 0).unwrap().is_empty());
    }

    #[test]
    fn double_root_is_one_cluster() {
        // (1 − ζ)^2 (1 − ζ/3)
        let e = expansion(&[c(-7.0 / 3.0, 0.0), c(5.0 / 3.0, 0.0), c(-1.0 / 3.0, 0.0)], zero_class());
        let certs = certify_leading(&e, 1).unwrap();
        assert_eq!(certs[0].multiplicity, 2);
        assert!(certs[0].certified);
        assert!(certs[0].eigenvalue_disk.contains(c(1.0, 0.0)));
    }

    #[test]
    fn eigenvalue_disk_contains_inverted_samples() {
        let zero = Ball::new(c(2.0, 1.0), 0.3);
        let inv = zero.inv().unwrap();
        for k in 0..1000 {
            let t = (k % 10) as f64 / 10.0;
            let z = zero.mid + Complex64::from_polar(zero.rad * t, k as f64 * 0.37);
            assert!(inv.contains(1.0 / z));
        }
    }
}
