//! Explicit a priori bounds: embedding singular values, exponential classes
//! and their algebra, transfer-operator norms and the Taylor coefficient
//! bound for the Fredholm determinant.
//!
//! An [`ExpClassBound`] `(c, gauge)` in dimension `d` asserts
//! `s_n ≤ gauge · exp(−c n^{1/d})` for every `n ≥ 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Domain, GeometryError, RelativeCover};
use crate::round;
use crate::systems::{self, DiskEnclosure, MapWeightSystem, SystemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AprioriError {
    #[error("scaling {gamma} must exceed 1")]
    DegenerateScaling { gamma: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("image of branch {branch} is not compactly contained in the intermediate domain")]
    NotCompactlyContained { branch: usize },
    #[error("configuration: {0}")]
    Configuration(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpClassBound {
    pub d: usize,
    pub c: f64,
    pub gauge: f64,
}

impl ExpClassBound {
    pub fn alpha(&self) -> f64 {
        1.0 / self.d as f64
    }

    /// Upper bound on `s_n`.
    pub fn singular_value_bound(&self, n: usize) -> f64 {
        decay_bound(self.gauge, self.c, self.d, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueTailBound {
    #[serde(rename = "B")]
    pub big_b: f64,
    pub b: f64,
    pub d: usize,
}

impl EigenvalueTailBound {
    /// Upper bound on `|λ_n|`.
    pub fn at(&self, n: usize) -> f64 {
        decay_bound(self.big_b, self.b, self.d, n)
    }
}

/// `g · exp(−a n^{1/d})` rounded up.
fn decay_bound(g: f64, a: f64, d: usize, n: usize) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    let root = round::powf_down(n as f64, 1.0 / d as f64);
    round::mul_up(g, round::exp_up(-round::mul_down(a, root)))
}

fn check_gamma(gamma: f64) -> Result<(), AprioriError> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(AprioriError::DegenerateScaling { gamma });
    }
    Ok(())
}

/// `C(n, k)` as `u128`, saturating.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// The degree `k` with `C(k+d−1, d) < n ≤ C(k+d, d)`.
pub fn embedding_degree(d: usize, n: usize) -> usize {
    let (d64, n128) = (d as u64, n as u128);
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    // (k+d)^d/d! ≈ n gives a starting point within a few steps
    let mut k = ((n as f64 * fact).powf(1.0 / d as f64) - d as f64).max(0.0) as u64;
    while k > 0 && binomial(k + d64 - 1, d64) >= n128 {
        k -= 1;
    }
    while binomial(k + d64, d64) < n128 {
        k += 1;
    }
    k as usize
}

/// `s_n(J) = γ^{−(k+d)}` for the embedding `A²(D(γ)) → A²(D)`.
pub fn embedding_singular_value(d: usize, gamma: f64, n: usize) -> Result<f64, AprioriError> {
    check_gamma(gamma)?;
    if n == 0 || d == 0 {
        return Err(AprioriError::Domain("n and d must be positive".into()));
    }
    let k = embedding_degree(d, n);
    Ok(gamma.powf(-((k + d) as f64)))
}

/// `c = (d!)^{1/d} log γ`, `gauge = γ^{(1−d)/2}`.
pub fn embedding_class(d: usize, gamma: f64) -> Result<ExpClassBound, AprioriError> {
    check_gamma(gamma)?;
    let fact = round::ln_factorial_down(d);
    let c = round::mul_down(round::exp_down(round::div_down(fact, d as f64)), round::ln_down(gamma));
    let gauge = if d == 1 { 1.0 } else { round::powf_up(gamma, (1.0 - d as f64) / 2.0) };
    Ok(ExpClassBound { d, c, gauge })
}

/// Class of the identification `A²(Ω₁) → A²(Ω₂)` through a relative cover.
pub fn identification_class(cover: &RelativeCover) -> Result<ExpClassBound, AprioriError> {
    let eff = geometry::cover_efficiency(cover)?;
    let d = eff.dim as f64;
    let n = eff.size as f64;
    let gauge = if eff.dim == 1 {
        n
    } else {
        round::mul_up(n, round::exp_up(-round::mul_down((d - 1.0) / 2.0, eff.min_gamma_log)))
    };
    Ok(ExpClassBound { d: eff.dim, c: eff.c, gauge })
}

/// `Ω̃(t)`: the system domain scaled by `t` about its centre.
pub fn intermediate_domain(omega: &Domain, t: f64) -> Result<Domain, AprioriError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(AprioriError::Domain(format!("intermediate parameter t = {t} must lie in (0, 1)")));
    }
    Ok(geometry::scale_domain(omega, t)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    /// Certified upper bound on `‖Σ |w_i| r_i^{−d}‖_{L²(Ω)}`.
    pub value: f64,
    pub coarse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<f64>,
    /// Lower bounds on `dist(φ_i(Ω), ∂Ω̃)`.
    pub r: Vec<f64>,
    /// Upper bounds on `sup_Ω |w_i|`.
    pub weight_sups: Vec<f64>,
}

/// Upper bound on `‖Σ_i |w_i| r_i^{−d}‖_{L²(Ω)}` with `r_i = dist(φ_i(Ω), ∂Ω̃)`.
pub fn transfer_norm_bound(
    s: &MapWeightSystem,
    tilde: &Domain,
    quadrature: bool,
) -> Result<NormBound, AprioriError> {
    let d = s.dim();
    if tilde.dim() != d {
        return Err(AprioriError::DimensionMismatch(tilde.dim(), d));
    }
    let images = systems::branch_images(s)?;
    let members: Vec<DiskEnclosure> = s.domain().members().into_iter().map(DiskEnclosure::of_domain).collect();
    let mut r = Vec::with_capacity(s.len());
    let mut sups = Vec::with_capacity(s.len());
    for (i, (branch, imgs)) in s.branches().iter().zip(&images).enumerate() {
        if branch.weight.is_zero() {
            r.push(f64::INFINITY);
            sups.push(0.0);
            continue;
        }
        let hull = if imgs.len() == 1 {
            imgs[0].to_domain()
        } else {
            Domain::Union { members: imgs.iter().map(DiskEnclosure::to_domain).collect() }
        };
        let ri = geometry::dist_lower_bound(&hull, tilde)?;
        if ri <= 0.0 {
            return Err(AprioriError::NotCompactlyContained { branch: i });
        }
        r.push(ri);
        let mut sup = 0.0f64;
        for m in &members {
            sup = sup.max(systems::weight_sup_bound(&branch.weight, m)?);
        }
        sups.push(sup);
    }
    let df = d as f64;
    let scale: Vec<f64> = r.iter().map(|ri| if ri.is_finite() { round::powf_up(*ri, -df) } else { 0.0 }).collect();
    let sup_sum = round::sum_up(sups.iter().zip(&scale).map(|(s, k)| round::mul_up(*s, *k)));
    let coarse = round::mul_up(sup_sum, round::sqrt_up(s.domain().volume_upper()));
    let quad = if quadrature {
        match s.domain() {
            Domain::Disk(disk) => Some(polar_quadrature(s, disk, &scale)?),
            _ => None,
        }
    } else {
        None
    };
    let value = quad.map_or(coarse, |q| q.min(coarse));
    Ok(NormBound { value, coarse, quadrature: quad, r, weight_sups: sups })
}

const QUAD_RADIAL: usize = 48;
const QUAD_ANGULAR: usize = 96;

/// Certified upper bound on `(∫_Ω f² dA/π)^{1/2}` with `f = Σ k_i |w_i|`, from
/// cell-wise interval sups over a polar grid.
fn polar_quadrature(
    s: &MapWeightSystem,
    disk: &geometry::ComplexDisk,
    scale: &[f64],
) -> Result<f64, AprioriError> {
    use crate::ball::Ball;
    use num_complex::Complex64;
    let dr = disk.radius / QUAD_RADIAL as f64;
    let dth = std::f64::consts::TAU / QUAD_ANGULAR as f64;
    let mut total = 0.0;
    for a in 0..QUAD_RADIAL {
        let (r1, r2) = (a as f64 * dr, (a + 1) as f64 * dr);
        // area of the cell divided by π (unit disk has unit mass)
        let area = round::div_up(round::mul_up(round::sub_up(r2 * r2, r1 * r1).next_up(), dth.next_up()), 2.0 * std::f64::consts::PI.next_down());
        for b in 0..QUAD_ANGULAR {
            let th = (b as f64 + 0.5) * dth;
            let rm = 0.5 * (r1 + r2);
            let center = disk.center + Complex64::from_polar(rm, th);
            // every cell point lies within Δr/2 + r2 Δθ/2 of the cell centre
            let rad = round::add_up(round::add_up(dr / 2.0, round::mul_up(r2, dth / 2.0)), 1e-15 * (1.0 + disk.radius));
            let cell = [Ball::new(center, rad)];
            let mut f = 0.0;
            for (branch, k) in s.branches().iter().zip(scale) {
                if *k == 0.0 {
                    continue;
                }
                let w = branch.weight.eval_ball(&cell)?;
                f = round::add_up(f, round::mul_up(*k, w.abs_upper()));
            }
            total = round::add_up(total, round::mul_up(area, round::mul_up(f, f)));
        }
    }
    Ok(round::sqrt_up(total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferClass {
    pub class: ExpClassBound,
    pub identification: ExpClassBound,
    pub norm: NormBound,
}

/// Exponential class of the transfer operator on `A²(Ω)` through `Ω̃`.
pub fn transfer_class(
    s: &MapWeightSystem,
    tilde: &Domain,
    cover: &RelativeCover,
    quadrature: bool,
) -> Result<TransferClass, AprioriError> {
    let omega = s.domain();
    let hull = systems::branch_image_hull(s)?;
    if geometry::dist_lower_bound(&hull.to_domain(), tilde)? <= 0.0 {
        return Err(AprioriError::Configuration(
            "branch images are not compactly contained in the intermediate domain".into(),
        ));
    }
    if geometry::dist_lower_bound(tilde, omega)? <= 0.0 {
        return Err(AprioriError::Configuration(
            "intermediate domain is not compactly contained in the system domain".into(),
        ));
    }
    match cover.targets() {
        Some((outer, inner)) if outer == omega && inner == tilde => {}
        _ => {
            return Err(AprioriError::Configuration(
                "cover was not validated for (system domain, intermediate domain)".into(),
            ))
        }
    }
    let identification = identification_class(cover)?;
    let norm = transfer_norm_bound(s, tilde, quadrature)?;
    let class = class_compose(1.0, &identification, norm.value);
    Ok(TransferClass { class, identification, norm })
}

/// [`transfer_class`] through `Ω̃ = t·Ω` with an automatically searched cover.
pub fn system_class(
    s: &MapWeightSystem,
    t: f64,
    granularity: usize,
    quadrature: bool,
) -> Result<(TransferClass, RelativeCover), AprioriError> {
    let tilde = intermediate_domain(s.domain(), t)?;
    let cover = geometry::auto_cover(s.domain(), &tilde, granularity)?;
    Ok((transfer_class(s, &tilde, &cover, quadrature)?, cover))
}

/// `|λ_n| ≤ B exp(−b n^{1/d})` with `B = gauge`, `b = d c/(1+d)`.
pub fn eigenvalue_bound(cls: &ExpClassBound) -> EigenvalueTailBound {
    let d = cls.d as f64;
    EigenvalueTailBound { big_b: cls.gauge, b: round::div_down(round::mul_down(d, cls.c), d + 1.0), d: cls.d }
}

/// Class of a sum of operators.
pub fn class_sum(parts: &[ExpClassBound]) -> Result<ExpClassBound, AprioriError> {
    let first = parts.first().ok_or_else(|| AprioriError::Domain("empty sum".into()))?;
    if let Some(p) = parts.iter().find(|p| p.d != first.d) {
        return Err(AprioriError::DimensionMismatch(first.d, p.d));
    }
    if parts.len() == 1 {
        return Ok(*first);
    }
    let d = first.d as f64;
    let s = round::sum_up(parts.iter().map(|p| round::powf_up(p.c, -d)));
    let c = round::powf_down(s, -1.0 / d).min(parts.iter().map(|p| p.c).fold(f64::INFINITY, f64::min));
    let gauge = round::mul_up(parts.len() as f64, parts.iter().map(|p| p.gauge).fold(0.0, f64::max));
    Ok(ExpClassBound { d: first.d, c, gauge })
}

/// Class of `A B C` given `‖A‖`, the class of `B` and `‖C‖`.
pub fn class_compose(left: f64, cls: &ExpClassBound, right: f64) -> ExpClassBound {
    ExpClassBound { gauge: round::mul_up(round::mul_up(left, cls.gauge), right), ..*cls }
}

/// Upper bound on `log |α_n|`; `−∞` for a zero operator.
pub fn taylor_coeff_log_bound(cls: &ExpClassBound, n: usize) -> f64 {
    if cls.gauge == 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = cls.d;
    let (df, nf, c) = (d as f64, n as f64, cls.c);
    let head = round::mul_up(nf, round::ln_up(cls.gauge));
    let decay = round::mul_down(
        round::div_down(round::mul_down(df, c), df + 1.0),
        round::powf_down(nf, 1.0 + 1.0 / df),
    );
    // Σ_{i=0}^{d} d!/(d−i)! n^{1−i/d} / c^i
    let mut falling = 1.0f64;
    let mut growth = 0.0f64;
    for i in 0..=d {
        if i > 0 {
            falling = round::mul_up(falling, (d - i + 1) as f64);
        }
        let term = round::div_up(
            round::mul_up(falling, round::powf_up(nf, 1.0 - i as f64 / df)),
            round::powf_down(c, i as f64),
        );
        growth = round::add_up(growth, term);
    }
    round::add_up(round::sub_up(head, decay), growth)
}

/// `gauge^n exp(−(d/(d+1)) c n^{1+1/d} + Σ_{i=0}^d d!/(d−i)! n^{1−i/d}/c^i)`,
/// rounded up and never flushed to zero for a non-zero operator.
pub fn taylor_coeff_bound(cls: &ExpClassBound, n: usize) -> f64 {
    let l = taylor_coeff_log_bound(cls, n);
    if l == f64::NEG_INFINITY {
        0.0
    } else {
        round::exp_up(l)
    }
}

/// `K (1+d)^{1+d}/d^d (log r)^d`.
pub fn zero_count_bound(k: f64, d: usize, r: f64) -> Result<f64, AprioriError> {
    if !(r > 1.0) {
        return Err(AprioriError::Domain(format!("radius {r} must exceed 1")));
    }
    if d == 0 || k < 0.0 {
        return Err(AprioriError::Domain("d must be positive and K non-negative".into()));
    }
    let df = d as f64;
    let ratio = round::div_up(round::powf_up(1.0 + df, 1.0 + df), round::powf_down(df, df));
    Ok(round::mul_up(round::mul_up(k, ratio), round::powf_up(round::ln_up(r), df)))
}
