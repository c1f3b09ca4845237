//! Non-rigorous Galerkin oracle for cross-checks.
//!
//! The transfer operator is discretised in the monomial basis
//! `e_k = Π_j ((z_j − c_j)/ρ_j)^{k_j}` of the domain disk or polydisc. Column
//! `k` holds the Taylor coefficients of `L e_k`, extracted by FFT from samples
//! on the circle (torus) of radius `0.9ρ`. Nothing here enters a certificate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Domain;
use crate::systems::{MapWeightSystem, SystemError};

pub const SAMPLING_RADIUS: f64 = 0.9;
pub const OVERSAMPLING: usize = 4;
/// Tail family `φ_i = 1/(z + i)`, `w_i = (z + i)^{−2}` for `i` beyond the
/// truncation index.
pub const GAUSS_FAMILY: &str = "gauss";
const GAUSS_EXPLICIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle supports disk and polydisc domains only")]
    UnsupportedDomain,
    #[error("basis size must be at least 1")]
    EmptyBasis,
    #[error("assembly failed at a sample point: {0}")]
    Assembly(SystemError),
    #[error("system has no known tail family to complete")]
    NoTailFamily,
    #[error("eigensolver did not converge")]
    Eigensolver,
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub centers: Vec<Complex64>,
    pub radii: Vec<f64>,
    /// Degrees per coordinate; the matrix has `per_axis^d` rows.
    pub per_axis: usize,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn size(&self) -> usize {
        self.per_axis.pow(self.dim() as u32)
    }

    /// Multi-index of basis element `k`, first coordinate most significant.
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for slot in idx.iter_mut().rev() {
            *slot = k % self.per_axis;
            k /= self.per_axis;
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinMatrix {
    pub basis: Basis,
    pub matrix: DMatrix<Complex64>,
    /// Whether the countable tail family was summed into the entries.
    pub tail_completed: bool,
}

impl GalerkinMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

fn basis_of(domain: &Domain, per_axis: usize) -> Result<Basis, OracleError> {
    if per_axis == 0 {
        return Err(OracleError::EmptyBasis);
    }
    match domain {
        Domain::Disk(d) => Ok(Basis { centers: vec![d.center], radii: vec![d.radius], per_axis }),
        Domain::Polydisc(p) => Ok(Basis { centers: p.centers.clone(), radii: p.radii.clone(), per_axis }),
        _ => Err(OracleError::UnsupportedDomain),
    }
}

/// Galerkin matrix of the (finite) system with `m` basis functions per axis.
pub fn galerkin_matrix(s: &MapWeightSystem, m: usize) -> Result<GalerkinMatrix, OracleError> {
    assemble(s, m, false)
}

/// As [`galerkin_matrix`], with the system's countable tail family added by
/// explicit summation and an Euler–Maclaurin remainder.
pub fn galerkin_matrix_completed(s: &MapWeightSystem, m: usize) -> Result<GalerkinMatrix, OracleError> {
    match s.tail().and_then(|t| t.family.as_deref()) {
        Some(GAUSS_FAMILY) if s.dim() == 1 => assemble(s, m, true),
        _ => Err(OracleError::NoTailFamily),
    }
}

fn assemble(s: &MapWeightSystem, m: usize, complete: bool) -> Result<GalerkinMatrix, OracleError> {
    let basis = basis_of(s.domain(), m)?;
    let d = basis.dim();
    let k_axis = OVERSAMPLING * m;
    let samples = k_axis.pow(d as u32);
    let size = basis.size();
    let truncation = s.tail().map_or(s.len(), |t| t.truncation_index.max(s.len()));

    // values[j][k] = (L e_k)(z_j)
    let values: Vec<Vec<Complex64>> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let z = sample_point(&basis, k_axis, j);
            let mut row = vec![Complex64::new(0.0, 0.0); size];
            for (i, branch) in s.branches().iter().enumerate() {
                let w = branch.weight.eval(&z).map_err(OracleError::Assembly)?;
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let img = s.flat(i).eval(&z).map_err(OracleError::Assembly)?;
                let u: Vec<Complex64> = (0..d).map(|c| (img[c] - basis.centers[c]) / basis.radii[c]).collect();
                accumulate(&basis, &u, w, &mut row);
            }
            if complete {
                gauss_tail(&basis, z[0], truncation, &mut row);
            }
            Ok(row)
        })
        .collect::<Result<_, OracleError>>()?;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(k_axis);
    let columns: Vec<Vec<Complex64>> = (0..size)
        .into_par_iter()
        .map(|k| {
            let mut grid: Vec<Complex64> = values.iter().map(|row| row[k]).collect();
            fft_nd(&*fft, &mut grid, k_axis, d);
            (0..size)
                .map(|r| {
                    let idx = basis.multi_index(r);
                    let mut flat = 0usize;
                    let mut scale = samples as f64;
                    for &e in &idx {
                        flat = flat * k_axis + e;
                        scale *= SAMPLING_RADIUS.powi(e as i32);
                    }
                    grid[flat] / scale
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(size, size, |r, c| columns[c][r]);
    Ok(GalerkinMatrix { basis, matrix, tail_completed: complete })
}

fn sample_point(basis: &Basis, k_axis: usize, mut j: usize) -> Vec<Complex64> {
    let d = basis.dim();
    let mut z = vec![Complex64::new(0.0, 0.0); d];
    for c in (0..d).rev() {
        let step = j % k_axis;
        j /= k_axis;
        let theta = std::f64::consts::TAU * step as f64 / k_axis as f64;
        z[c] = basis.centers[c] + Complex64::from_polar(SAMPLING_RADIUS * basis.radii[c], theta);
    }
    z
}

/// `row[k] += w Π_c u_c^{k_c}` for every basis element.
fn accumulate(basis: &Basis, u: &[Complex64], w: Complex64, row: &mut [Complex64]) {
    let m = basis.per_axis;
    let powers: Vec<Vec<Complex64>> = u
        .iter()
        .map(|uc| {
            let mut p = Vec::with_capacity(m);
            let mut x = Complex64::new(1.0, 0.0);
            for _ in 0..m {
                p.push(x);
                x *= uc;
            }
            p
        })
        .collect();
    for (k, slot) in row.iter_mut().enumerate() {
        let idx = basis.multi_index(k);
        let mut v = w;
        for (c, e) in idx.iter().enumerate() {
            v *= powers[c][*e];
        }
        *slot += v;
    }
}

/// Adds `Σ_{i > from} (z + i)^{−2} u(1/(z + i))^k` to each column entry.
fn gauss_tail(basis: &Basis, z: Complex64, from: usize, row: &mut [Complex64]) {
    let (c, rho) = (basis.centers[0], basis.radii[0]);
    let last = from.max(GAUSS_EXPLICIT);
    for i in from + 1..=last {
        let t = 1.0 / (z + i as f64);
        accumulate(basis, &[(t - c) / rho], t * t, row);
    }
    // Σ_{x > J} F(x) ≈ ∫_J^∞ F − F(J)/2 − F'(J)/12 with F(x) = t² u(t)^k, t = 1/(z + x)
    let t = 1.0 / (z + last as f64);
    let u_j = (t - c) / rho;
    let u_0 = -c / rho;
    for (k, slot) in row.iter_mut().enumerate() {
        let kf = k as f64;
        let integral = rho / (kf + 1.0) * (u_j.powu(k as u32 + 1) - u_0.powu(k as u32 + 1));
        let uk = u_j.powu(k as u32);
        let f = t * t * uk;
        let ukm1 = if k == 0 { Complex64::new(0.0, 0.0) } else { u_j.powu(k as u32 - 1) };
        let df = -(t * t) * (2.0 * t * uk + t * t * kf * ukm1 / rho);
        *slot += integral - f / 2.0 - df / 12.0;
    }
}

fn fft_nd(fft: &dyn rustfft::Fft<f64>, grid: &mut [Complex64], n: usize, d: usize) {
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let lines = grid.len() / n;
        for l in 0..lines {
            let base = (l / stride) * stride * n + l % stride;
            for (t, x) in line.iter_mut().enumerate() {
                *x = grid[base + t * stride];
            }
            fft.process(&mut line);
            for (t, x) in line.iter().enumerate() {
                grid[base + t * stride] = *x;
            }
        }
    }
}

fn order_key(z: &Complex64) -> (i64, f64) {
    let m = z.norm();
    let q = if m > 0.0 { (m.ln() * 1e10).round() as i64 } else { i64::MIN };
    (q, z.arg())
}

/// Sorts by modulus descending, then argument ascending.
pub fn sort_spectrum(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        let (ka, kb) = (order_key(a), order_key(b));
        kb.0.cmp(&ka.0).then(ka.1.total_cmp(&kb.1))
    });
}

/// Eigenvalues of a dense complex matrix, modulus-descending.
pub fn matrix_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>, OracleError> {
    let schur = m.clone().try_schur(1e-15, 100_000).ok_or(OracleError::Eigensolver)?;
    let ev = schur.eigenvalues().ok_or(OracleError::Eigensolver)?;
    let mut v: Vec<Complex64> = ev.iter().copied().collect();
    sort_spectrum(&mut v);
    Ok(v)
}

pub fn oracle_eigenvalues(mx: &GalerkinMatrix) -> Result<Vec<Complex64>, OracleError> {
    matrix_eigenvalues(&mx.matrix)
}

/// `tr(Mⁿ)`.
pub fn oracle_traces(mx: &GalerkinMatrix, n: usize) -> Complex64 {
    if n == 0 {
        return Complex64::new(mx.size() as f64, 0.0);
    }
    let mut p = mx.matrix.clone();
    for _ in 1..n {
        p = &p * &mx.matrix;
    }
    p.trace()
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    /// Number of leading products compared.
    pub checked: usize,
    /// `max_k (Σ_{i≤k} log|λ_i| − Σ_{i≤k} log s_i)`; non-positive when the
    /// inequality holds.
    pub max_log_excess: f64,
}

impl WeylReport {
    pub fn holds(&self) -> bool {
        self.max_log_excess <= 1e-9 * self.checked.max(1) as f64
    }
}

/// Weyl's product inequality `Π_{i≤k} |λ_i| ≤ Π_{i≤k} s_i`, checked for `k`
/// while `s_k ≥ 10^{−12} s_1` (smaller values are below eigensolver accuracy).
pub fn weyl_check(m: &DMatrix<Complex64>) -> Result<WeylReport, OracleError> {
    let ev = matrix_eigenvalues(m)?;
    let sv = singular_values(m);
    let floor = sv.first().copied().unwrap_or(0.0) * 1e-12;
    let (mut le, mut ls) = (0.0, 0.0);
    let mut excess = f64::NEG_INFINITY;
    let mut checked = 0;
    for (l, s) in ev.iter().zip(&sv) {
        if !(*s > floor) {
            break;
        }
        le += l.norm().max(f64::MIN_POSITIVE).ln();
        ls += s.ln();
        excess = excess.max(le - ls);
        checked += 1;
    }
    Ok(WeylReport { checked, max_log_excess: if checked == 0 { 0.0 } else { excess } })
}

/// Gauss–Legendre nodes and weights on `[a, b]` (Golub–Welsch).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let jac = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jac.symmetric_eigen();
    let mut nodes: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)].powi(2);
            (0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w)
        })
        .collect();
    nodes.sort_by(|p, q| p.0.total_cmp(&q.0));
    nodes
}

/// Monomial exponents of total degree at most `degree` in `d` variables,
/// grouped by degree.
fn monomials(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == d {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(d, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=degree {
        rec(d, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Gram matrix `⟨z^α, z^β⟩` over the ball of radius `r` in `C^d` (`d ≤ 2`)
/// by polar Gauss–Legendre quadrature radially and trapezoidal angles.
fn ball_gram(d: usize, r: f64, mons: &[Vec<usize>]) -> DMatrix<Complex64> {
    let degree = mons.iter().map(|m| m.iter().sum::<usize>()).max().unwrap_or(0);
    let nr = degree + 4;
    let nt = 2 * degree + 3;
    let angles: Vec<Complex64> = (0..nt).map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / nt as f64)).collect();
    let dth = std::f64::consts::TAU / nt as f64;
    // quadrature points (z, weight) in C^d
    let mut pts: Vec<(Vec<Complex64>, f64)> = Vec::new();
    match d {
        1 => {
            for (rho, w) in gauss_legendre(nr, 0.0, r) {
                for a in &angles {
                    pts.push((vec![a * rho], w * rho * dth));
                }
            }
        }
        2 => {
            for (r1, w1) in gauss_legendre(nr, 0.0, r) {
                let top = (r * r - r1 * r1).max(0.0).sqrt();
                for (r2, w2) in gauss_legendre(nr, 0.0, top) {
                    for a1 in &angles {
                        for a2 in &angles {
                            pts.push((vec![a1 * r1, a2 * r2], w1 * w2 * r1 * r2 * dth * dth));
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    let n = mons.len();
    let vals: Vec<Vec<Complex64>> = pts
        .iter()
        .map(|(z, _)| mons.iter().map(|m| m.iter().zip(z).map(|(e, zc)| zc.powu(*e as u32)).product()).collect())
        .collect();
    DMatrix::from_fn(n, n, |i, j| pts.iter().zip(&vals).map(|((_, w), v)| v[i] * v[j].conj() * *w).sum())
}

/// Singular values of the restriction `A²(γB) → A²(B)` on polynomials of
/// total degree ≤ `degree`, from numerically assembled Gram matrices; the
/// ball `B` is the unit disk for `d = 1` and the unit ball for `d = 2`.
pub fn embedding_gram_singular_values(d: usize, gamma: f64, degree: usize) -> Result<Vec<f64>, OracleError> {
    if d == 0 || d > 2 {
        return Err(OracleError::Unsupported(format!("embedding Gram check implemented for d ≤ 2, got {d}")));
    }
    let mons = monomials(d, degree);
    let g_inner = ball_gram(d, 1.0, &mons);
    let g_outer = ball_gram(d, gamma, &mons);
    let chol = g_outer
        .cholesky()
        .ok_or_else(|| OracleError::Unsupported("outer Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(OracleError::Eigensolver)?;
    let a = &linv * g_inner * linv.adjoint();
    let herm = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut s: Vec<f64> = eig.eigenvalues.iter().map(|x: &f64| x.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apriori::embedding_singular_value;
    use crate::systems::{Branch, HoloMap, Weight};
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn affine(domain: Domain, maps: &[(f64, f64)], w: f64) -> MapWeightSystem {
        let branches = maps
            .iter()
            .map(|(a, b)| Branch { map: HoloMap::Affine { a: c(*a), b: c(*b) }, weight: Weight::constant(c(w)) })
            .collect();
        MapWeightSystem::new(domain, branches, None).unwrap()
    }

    fn doubling() -> MapWeightSystem {
        affine(Domain::disk(c(0.5), 1.0).unwrap(), &[(0.5, 0.0), (0.5, 0.5)], 0.5)
    }

    #[test]
    fn single_linear_branch_is_diagonal() {
        let s = affine(Domain::disk(c(0.0), 1.0).unwrap(), &[(0.3, 0.0)], 1.0);
        let mx = galerkin_matrix(&s, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 0.3f64.powi(i as i32) } else { 0.0 };
                assert!((mx.matrix[(i, j)] - c(want)).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn one_by_one_matrix() {
        let mx = galerkin_matrix(&doubling(), 1).unwrap();
        assert_eq!(mx.size(), 1);
        assert!((mx.matrix[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert_eq!(galerkin_matrix(&doubling(), 0), Err(OracleError::EmptyBasis));
    }

    #[test]
    fn doubling_spectrum_and_traces() {
        let mx = galerkin_matrix(&doubling(), 20).unwrap();
        let ev = oracle_eigenvalues(&mx).unwrap();
        for (k, z) in ev.iter().enumerate().take(5) {
            assert!((z - c(0.5f64.powi(k as i32))).norm() < 1e-10, "k={k}: {z}");
        }
        // finite section of Σ 2^{−kn}
        assert!((oracle_traces(&mx, 1) - c(2.0 - 0.5f64.powi(19))).norm() < 1e-10);
        assert!((oracle_traces(&mx, 3) - c(8.0 / 7.0)).norm() < 1e-10);
    }

    #[test]
    fn diagonal_eigenvalues_and_traces() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.25), c(1.0), c(0.5)]));
        let ev = matrix_eigenvalues(&m).unwrap();
        assert!(ev.iter().zip([1.0, 0.5, 0.25]).all(|(a, b)| (a - c(b)).norm() < 1e-15));
        let mx = GalerkinMatrix {
            basis: Basis { centers: vec![c(0.0)], radii: vec![1.0], per_axis: 2 },
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(0.5)])),
            tail_completed: false,
        };
        assert!((oracle_traces(&mx, 2) - c(1.25)).norm() < 1e-15);
    }

    #[test]
    fn polydisc_tensor_basis() {
        let p = Domain::polydisc(vec![c(0.5), c(0.5)], vec![1.0, 1.0]).unwrap();
        let branches = [0.0, 0.5]
            .iter()
            .map(|b| Branch {
                map: HoloMap::Product { factors: vec![HoloMap::Affine { a: c(0.5), b: c(*b) }, HoloMap::Affine { a: c(0.25), b: c(0.5) }] },
                weight: Weight::constant(c(0.5)),
            })
            .collect();
        let s = MapWeightSystem::new(p, branches, None).unwrap();
        let mx = galerkin_matrix(&s, 5).unwrap();
        assert_eq!(mx.size(), 25);
        // spectrum is the product of 2^{−j} and 4^{−k}
        let ev = oracle_eigenvalues(&mx).unwrap();
        assert!((ev[0] - c(1.0)).norm() < 1e-10);
        assert!((ev[1] - c(0.5)).norm() < 1e-10);
        assert!((ev[2] - c(0.25)).norm() < 1e-10 && (ev[3] - c(0.25)).norm() < 1e-10);
    }

    #[test]
    fn unsupported_domains() {
        let b = Domain::ball(vec![c(0.0), c(0.0)], 1.0).unwrap();
        let branches = vec![Branch { map: HoloMap::identity(2), weight: Weight::constant(c(0.0)) }];
        let s = MapWeightSystem::new(b, branches, None).unwrap();
        assert_eq!(galerkin_matrix(&s, 3), Err(OracleError::UnsupportedDomain));
        assert_eq!(galerkin_matrix_completed(&doubling(), 3), Err(OracleError::NoTailFamily));
    }

    #[test]
    fn weyl_on_random_matrices() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for n in 1..=12 {
            let m = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let r = weyl_check(&m).unwrap();
            assert!(r.holds(), "{r:?}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = gauss_legendre(5, 0.0, 2.0);
        let v: f64 = q.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
    }

    #[test]
    fn embedding_gram_matches_closed_form() {
        for d in [1, 2] {
            for gamma in [1.5, 2.0] {
                let s = embedding_gram_singular_values(d, gamma, if d == 1 { 9 } else { 4 }).unwrap();
                for n in 1..=10 {
                    let want = embedding_singular_value(d, gamma, n).unwrap();
                    assert!((s[n - 1] - want).abs() <= 1e-8 * want, "d={d} γ={gamma} n={n}: {} vs {want}", s[n - 1]);
                }
            }
        }
        assert!(embedding_gram_singular_values(3, 2.0, 2).is_err());
    }
}
