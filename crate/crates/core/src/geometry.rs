//! Open sets in `C^d`: disks, polydiscs, Euclidean balls and finite unions,
//! together with certified distance/containment predicates and relative
//! covers.
//!
//! Closed-form predicates are used whenever both sets are simple shapes.
//! Coverage of a set by a union of pieces, and containment in a union, fall
//! back to a rigorous box subdivision of the real `2d`-dimensional bounding
//! box.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::round;

/// Scalings within this distance of 1 are rejected as degenerate.
pub const MIN_SCALING_GAP: f64 = 1e-6;

/// Number of boxes the coverage prover may visit before giving up.
const BOX_BUDGET: usize = 400_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("domain is not strictly circled")]
    UnsupportedDomain,
    #[error("scaling {gamma} of piece {piece} is degenerate (must exceed 1 + {MIN_SCALING_GAP})")]
    DegenerateScaling { piece: usize, gamma: f64 },
    #[error("invalid cover: condition ({condition}) fails{}: {detail}", piece.map(|p| format!(" at piece {p}")).unwrap_or_default())]
    InvalidCover { condition: CoverCondition, piece: Option<usize>, detail: String },
    #[error("not compactly contained: {0}")]
    NotCompactlyContained(String),
    #[error("no valid relative cover found up to granularity {granularity}")]
    SearchFailure { granularity: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoverCondition {
    /// The inner set is covered by the pieces.
    #[serde(rename = "a")]
    Coverage,
    /// The scaled pieces lie in the outer set.
    #[serde(rename = "b")]
    Scaling,
}

impl std::fmt::Display for CoverCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoverCondition::Coverage => write!(f, "a"),
            CoverCondition::Scaling => write!(f, "b"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexDisk {
    pub center: Complex64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polydisc {
    pub centers: Vec<Complex64>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanBall {
    pub center: Vec<Complex64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Domain {
    Disk(ComplexDisk),
    Polydisc(Polydisc),
    Ball(EuclideanBall),
    Union { members: Vec<Domain> },
}

impl ComplexDisk {
    pub fn new(center: Complex64, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidDomain(format!("disk radius {radius} must be positive")));
        }
        Ok(ComplexDisk { center, radius })
    }
}

impl Domain {
    pub fn disk(center: Complex64, radius: f64) -> Result<Self, GeometryError> {
        ComplexDisk::new(center, radius).map(Domain::Disk)
    }

    pub fn polydisc(centers: Vec<Complex64>, radii: Vec<f64>) -> Result<Self, GeometryError> {
        let d = Domain::Polydisc(Polydisc { centers, radii });
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: Vec<Complex64>, radius: f64) -> Result<Self, GeometryError> {
        let d = Domain::Ball(EuclideanBall { center, radius });
        d.validate()?;
        Ok(d)
    }

    pub fn union(members: Vec<Domain>) -> Result<Self, GeometryError> {
        let d = Domain::Union { members };
        d.validate()?;
        Ok(d)
    }

    /// Checks the structural invariants (positive radii, consistent dimension,
    /// non-empty flat unions).
    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = |r: f64| r > 0.0 && r.is_finite();
        match self {
            Domain::Disk(d) => {
                if !positive(d.radius) {
                    return Err(GeometryError::InvalidDomain(format!("disk radius {} must be positive", d.radius)));
                }
            }
            Domain::Polydisc(p) => {
                if p.centers.is_empty() || p.centers.len() != p.radii.len() {
                    return Err(GeometryError::InvalidDomain(format!(
                        "polydisc has {} centers and {} radii",
                        p.centers.len(),
                        p.radii.len()
                    )));
                }
                if let Some(r) = p.radii.iter().find(|r| !positive(**r)) {
                    return Err(GeometryError::InvalidDomain(format!("polydisc radius {r} must be positive")));
                }
            }
            Domain::Ball(b) => {
                if b.center.is_empty() {
                    return Err(GeometryError::InvalidDomain("ball has empty center".into()));
                }
                if !positive(b.radius) {
                    return Err(GeometryError::InvalidDomain(format!("ball radius {} must be positive", b.radius)));
                }
            }
            Domain::Union { members } => {
                let first = members
                    .first()
                    .ok_or_else(|| GeometryError::InvalidDomain("empty union".into()))?;
                let d = first.dim();
                for m in members {
                    if matches!(m, Domain::Union { .. }) {
                        return Err(GeometryError::InvalidDomain("nested unions are not supported".into()));
                    }
                    m.validate()?;
                    if m.dim() != d {
                        return Err(GeometryError::DimensionMismatch { left: d, right: m.dim() });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Disk(_) => 1,
            Domain::Polydisc(p) => p.centers.len(),
            Domain::Ball(b) => b.center.len(),
            Domain::Union { members } => members.first().map_or(0, Domain::dim),
        }
    }

    /// Centre of a strictly circled domain.
    pub fn center(&self) -> Option<Vec<Complex64>> {
        match self {
            Domain::Disk(d) => Some(vec![d.center]),
            Domain::Polydisc(p) => Some(p.centers.clone()),
            Domain::Ball(b) => Some(b.center.clone()),
            Domain::Union { .. } => None,
        }
    }

    pub fn is_strictly_circled(&self) -> bool {
        !matches!(self, Domain::Union { .. })
    }

    /// Members of a union, or the domain itself.
    pub fn members(&self) -> Vec<&Domain> {
        match self {
            Domain::Union { members } => members.iter().collect(),
            other => vec![other],
        }
    }

    /// Smallest concentric-per-coordinate polydisc containing the domain.
    pub fn bounding_polydisc(&self) -> Polydisc {
        match self {
            Domain::Disk(d) => Polydisc { centers: vec![d.center], radii: vec![d.radius] },
            Domain::Polydisc(p) => p.clone(),
            Domain::Ball(b) => Polydisc { centers: b.center.clone(), radii: vec![b.radius; b.center.len()] },
            Domain::Union { members } => {
                let polys: Vec<Polydisc> = members.iter().map(Domain::bounding_polydisc).collect();
                let d = polys[0].centers.len();
                let mut centers = Vec::with_capacity(d);
                let mut radii = Vec::with_capacity(d);
                for j in 0..d {
                    let mut hull = crate::ball::Ball::new(polys[0].centers[j], polys[0].radii[j]);
                    for p in &polys[1..] {
                        hull = hull.hull(&crate::ball::Ball::new(p.centers[j], p.radii[j]));
                    }
                    centers.push(hull.mid);
                    radii.push(hull.rad);
                }
                Polydisc { centers, radii }
            }
        }
    }

    /// The bounding polydisc as a domain (a plain disk when `d = 1`).
    pub fn bounding_shape(&self) -> Domain {
        match self {
            Domain::Union { .. } => {
                let p = self.bounding_polydisc();
                if p.centers.len() == 1 {
                    Domain::Disk(ComplexDisk { center: p.centers[0], radius: p.radii[0] })
                } else {
                    Domain::Polydisc(p)
                }
            }
            other => other.clone(),
        }
    }

    /// Upper bound on the volume, normalised so the unit ball of `C^d` has
    /// unit mass. Unions are bounded by the sum over members.
    pub fn volume_upper(&self) -> f64 {
        match self {
            Domain::Disk(d) => round::mul_up(d.radius, d.radius),
            Domain::Polydisc(p) => {
                // d! * prod r_j^2
                let fact = (1..=p.radii.len()).fold(1.0, |acc, k| round::mul_up(acc, k as f64));
                p.radii.iter().fold(fact, |acc, r| round::mul_up(acc, round::mul_up(*r, *r)))
            }
            Domain::Ball(b) => round::powf_up(b.radius, 2.0 * b.center.len() as f64),
            Domain::Union { members } => round::sum_up(members.iter().map(Domain::volume_upper)),
        }
    }
}

/// `D(r) := r (D - ζ) + ζ` for a strictly circled `D` with centre `ζ`.
pub fn scale_domain(domain: &Domain, r: f64) -> Result<Domain, GeometryError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(GeometryError::InvalidDomain(format!("scale factor {r} must be positive")));
    }
    match domain {
        Domain::Disk(d) => Ok(Domain::Disk(ComplexDisk { center: d.center, radius: d.radius * r })),
        Domain::Polydisc(p) => Ok(Domain::Polydisc(Polydisc {
            centers: p.centers.clone(),
            radii: p.radii.iter().map(|x| x * r).collect(),
        })),
        Domain::Ball(b) => Ok(Domain::Ball(EuclideanBall { center: b.center.clone(), radius: b.radius * r })),
        Domain::Union { .. } => Err(GeometryError::UnsupportedDomain),
    }
}

// ---------------------------------------------------------------------------
// Closed-form margins between simple shapes

/// Upper bound on `|a - b|`.
fn dist_up(a: Complex64, b: Complex64) -> f64 {
    crate::ball::distance_up(a, b)
}

/// Per-coordinate-or-Euclidean view of a non-union domain.
enum Shape<'a> {
    Poly { centers: Vec<Complex64>, radii: Vec<f64> },
    Ball { center: &'a [Complex64], radius: f64 },
}

fn shape(d: &Domain) -> Shape<'_> {
    match d {
        Domain::Disk(k) => Shape::Poly { centers: vec![k.center], radii: vec![k.radius] },
        Domain::Polydisc(p) => Shape::Poly { centers: p.centers.clone(), radii: p.radii.clone() },
        Domain::Ball(b) => Shape::Ball { center: &b.center, radius: b.radius },
        Domain::Union { .. } => unreachable!("unions are flattened before shape()"),
    }
}

/// Lower bound on `inf_{z in K} dist(z, ∂Ω)` for simple shapes; negative when
/// containment cannot be established.
fn simple_margin(k: &Domain, omega: &Domain) -> f64 {
    match (shape(k), shape(omega)) {
        (Shape::Poly { centers: kc, radii: kr }, Shape::Poly { centers: oc, radii: or }) => (0..kc.len())
            .map(|j| round::sub_down(or[j], round::add_up(dist_up(kc[j], oc[j]), kr[j])))
            .fold(f64::INFINITY, f64::min),
        (Shape::Ball { center: kc, radius: kr }, Shape::Poly { centers: oc, radii: or }) => (0..kc.len())
            .map(|j| round::sub_down(or[j], round::add_up(dist_up(kc[j], oc[j]), kr)))
            .fold(f64::INFINITY, f64::min),
        (Shape::Poly { centers: kc, radii: kr }, Shape::Ball { center: oc, radius: or }) => {
            let far = round::sqrt_up(round::sum_up((0..kc.len()).map(|j| {
                let e = round::add_up(dist_up(kc[j], oc[j]), kr[j]);
                round::mul_up(e, e)
            })));
            round::sub_down(or, far)
        }
        (Shape::Ball { center: kc, radius: kr }, Shape::Ball { center: oc, radius: or }) => {
            let off = round::sqrt_up(round::sum_up((0..kc.len()).map(|j| {
                let e = dist_up(kc[j], oc[j]);
                round::mul_up(e, e)
            })));
            round::sub_down(or, round::add_up(off, kr))
        }
    }
}

/// Margin of `k` inside `omega` allowing unions on either side. A union on
/// the outside is handled member-wise, which is sound but may return a
/// negative value for sets straddling several members.
fn margin(k: &Domain, omega: &Domain) -> f64 {
    k.members()
        .into_iter()
        .map(|km| {
            omega
                .members()
                .into_iter()
                .map(|om| simple_margin(km, om))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

fn check_dims(a: &Domain, b: &Domain) -> Result<(), GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

/// Certified lower bound on `dist(K, ∂Ω)`; zero when `K ⊄ Ω` or when the
/// distance cannot be determined for the shape pair.
pub fn dist_lower_bound(k: &Domain, omega: &Domain) -> Result<f64, GeometryError> {
    check_dims(k, omega)?;
    Ok(margin(k, omega).max(0.0))
}

/// `true` if `inner ⊂ outer` is certified (both open).
pub fn contains(outer: &Domain, inner: &Domain) -> Result<bool, GeometryError> {
    check_dims(outer, inner)?;
    if margin(inner, outer) >= 0.0 {
        return Ok(true);
    }
    if matches!(outer, Domain::Union { .. }) {
        let pieces: Vec<&Domain> = outer.members();
        return Ok(inner.members().into_iter().all(|m| covered_by(m, &pieces).is_ok()));
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// Box subdivision in R^{2d}

#[derive(Clone, Debug)]
struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Cell {
    fn of_polydisc(p: &Polydisc) -> Cell {
        let mut lo = Vec::with_capacity(2 * p.centers.len());
        let mut hi = Vec::with_capacity(2 * p.centers.len());
        for (c, r) in p.centers.iter().zip(&p.radii) {
            lo.push(round::sub_down(c.re, *r));
            lo.push(round::sub_down(c.im, *r));
            hi.push(round::add_up(c.re, *r));
            hi.push(round::add_up(c.im, *r));
        }
        Cell { lo, hi }
    }

    fn split(&self) -> (Cell, Cell) {
        let axis = (0..self.lo.len())
            .max_by(|&a, &b| (self.hi[a] - self.lo[a]).total_cmp(&(self.hi[b] - self.lo[b])))
            .unwrap_or(0);
        let m = 0.5 * (self.lo[axis] + self.hi[axis]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[axis] = m;
        right.lo[axis] = m;
        (left, right)
    }

    /// Lower bound on the distance from `c` to the square of coordinate `j`.
    fn near_dist(&self, j: usize, c: Complex64) -> f64 {
        let gap = |lo: f64, hi: f64, x: f64| {
            if x < lo {
                round::sub_down(lo, x)
            } else if x > hi {
                round::sub_down(x, hi)
            } else {
                0.0
            }
        };
        let dx = gap(self.lo[2 * j], self.hi[2 * j], c.re).max(0.0);
        let dy = gap(self.lo[2 * j + 1], self.hi[2 * j + 1], c.im).max(0.0);
        round::hypot_down(dx, dy)
    }

    /// Upper bound on the distance from `c` to the farthest corner of square `j`.
    fn far_dist(&self, j: usize, c: Complex64) -> f64 {
        let dx = round::sub_up(c.re, self.lo[2 * j]).abs().max(round::sub_up(self.hi[2 * j], c.re).abs());
        let dy = round::sub_up(c.im, self.lo[2 * j + 1]).abs().max(round::sub_up(self.hi[2 * j + 1], c.im).abs());
        round::hypot_up(dx, dy)
    }

    fn center(&self) -> Vec<Complex64> {
        (0..self.lo.len() / 2)
            .map(|j| {
                Complex64::new(
                    0.5 * (self.lo[2 * j] + self.hi[2 * j]),
                    0.5 * (self.lo[2 * j + 1] + self.hi[2 * j + 1]),
                )
            })
            .collect()
    }
}

/// `true` if the closed cell certainly misses the closure of `d`.
fn cell_misses(cell: &Cell, d: &Domain) -> bool {
    d.members().into_iter().all(|m| match shape(m) {
        Shape::Poly { centers, radii } => (0..centers.len()).any(|j| cell.near_dist(j, centers[j]) > radii[j]),
        Shape::Ball { center, radius } => {
            let s = (0..center.len())
                .map(|j| {
                    let e = cell.near_dist(j, center[j]);
                    round::mul_down(e, e)
                })
                .fold(0.0, round::add_down);
            s > round::mul_up(radius, radius)
        }
    })
}

/// `true` if the closed cell certainly lies in the open simple shape `d`.
fn cell_inside(cell: &Cell, d: &Domain) -> bool {
    match shape(d) {
        Shape::Poly { centers, radii } => (0..centers.len()).all(|j| cell.far_dist(j, centers[j]) < radii[j]),
        Shape::Ball { center, radius } => {
            let s = round::sum_up((0..center.len()).map(|j| {
                let e = cell.far_dist(j, center[j]);
                round::mul_up(e, e)
            }));
            s < round::mul_down(radius, radius)
        }
    }
}

/// Proves `set ⊂ ⋃ pieces` by subdivision; on failure returns a witness
/// point that could not be covered.
fn covered_by(set: &Domain, pieces: &[&Domain]) -> Result<(), Vec<Complex64>> {
    // direct containment in a single piece
    if pieces.iter().any(|p| margin(set, p) >= 0.0) {
        return Ok(());
    }
    let mut stack = vec![Cell::of_polydisc(&set.bounding_polydisc())];
    let mut visited = 0usize;
    while let Some(cell) = stack.pop() {
        visited += 1;
        if cell_misses(&cell, set) || pieces.iter().any(|p| cell_inside(&cell, p)) {
            continue;
        }
        if visited > BOX_BUDGET {
            return Err(cell.center());
        }
        let width = (0..cell.lo.len()).map(|a| cell.hi[a] - cell.lo[a]).fold(0.0, f64::max);
        if width < 1e-9 {
            return Err(cell.center());
        }
        let (l, r) = cell.split();
        stack.push(l);
        stack.push(r);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Relative covers

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverPiece {
    pub domain: Domain,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeCover {
    pub pieces: Vec<CoverPiece>,
    #[serde(skip)]
    validated: bool,
    #[serde(skip)]
    targets: Option<(Domain, Domain)>,
}

impl RelativeCover {
    pub fn new(pieces: Vec<CoverPiece>) -> Self {
        RelativeCover { pieces, validated: false, targets: None }
    }

    pub fn size(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// The pair `(Ω₁, Ω₂)` this cover was validated against.
    pub fn targets(&self) -> Option<&(Domain, Domain)> {
        self.targets.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.pieces.first().map_or(0, |p| p.domain.dim())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySummary {
    /// `log γ_n`, rounded down.
    pub gamma_logs: Vec<f64>,
    /// `‖Γ‖_d`, rounded down.
    pub c: f64,
    pub min_gamma_log: f64,
    pub size: usize,
    pub dim: usize,
}

fn check_scaling(piece: usize, gamma: f64) -> Result<(), GeometryError> {
    if !(gamma > 1.0 + MIN_SCALING_GAP) || !gamma.is_finite() {
        return Err(GeometryError::DegenerateScaling { piece, gamma });
    }
    Ok(())
}

/// Verifies both relative-cover conditions for `(Ω₁, Ω₂)` and marks the cover
/// as validated.
pub fn cover_validate(
    cover: &RelativeCover,
    outer: &Domain,
    inner: &Domain,
) -> Result<RelativeCover, GeometryError> {
    check_dims(outer, inner)?;
    if cover.pieces.is_empty() {
        return Err(GeometryError::InvalidCover {
            condition: CoverCondition::Coverage,
            piece: None,
            detail: "cover has no pieces".into(),
        });
    }
    for (i, p) in cover.pieces.iter().enumerate() {
        p.domain.validate()?;
        check_dims(&p.domain, outer)?;
        if !p.domain.is_strictly_circled() {
            return Err(GeometryError::UnsupportedDomain);
        }
        check_scaling(i, p.gamma)?;
    }
    // (b): every scaled piece lies in Ω₁
    for (i, p) in cover.pieces.iter().enumerate() {
        let scaled = scale_domain(&p.domain, p.gamma)?;
        if !contains(outer, &scaled)? {
            return Err(GeometryError::InvalidCover {
                condition: CoverCondition::Scaling,
                piece: Some(i),
                detail: format!("piece scaled by {} leaves the outer domain", p.gamma),
            });
        }
    }
    // (a): Ω₂ lies in the union of pieces
    let pieces: Vec<&Domain> = cover.pieces.iter().map(|p| &p.domain).collect();
    for (m, member) in inner.members().into_iter().enumerate() {
        if let Err(witness) = covered_by(member, &pieces) {
            return Err(GeometryError::InvalidCover {
                condition: CoverCondition::Coverage,
                piece: None,
                detail: format!("inner member {m} not covered near {witness:?}"),
            });
        }
    }
    Ok(RelativeCover { pieces: cover.pieces.clone(), validated: true, targets: Some((outer.clone(), inner.clone())) })
}

/// `c = ‖Γ‖_d = (Σ Γ_n^{-d})^{-1/d}` with `Γ_n = log γ_n`, rounded down.
pub fn cover_efficiency(cover: &RelativeCover) -> Result<EfficiencySummary, GeometryError> {
    if !cover.validated {
        return Err(GeometryError::InvalidCover {
            condition: CoverCondition::Coverage,
            piece: None,
            detail: "cover has not been validated".into(),
        });
    }
    let d = cover.dim();
    efficiency_from_gammas(&cover.pieces.iter().map(|p| p.gamma).collect::<Vec<_>>(), d)
}

/// Efficiency of a bare scaling vector.
pub fn efficiency_from_gammas(gammas: &[f64], d: usize) -> Result<EfficiencySummary, GeometryError> {
    for (i, g) in gammas.iter().enumerate() {
        check_scaling(i, *g)?;
    }
    let logs: Vec<f64> = gammas.iter().map(|g| round::ln_down(*g)).collect();
    let df = d as f64;
    let s = round::sum_up(logs.iter().map(|l| round::powf_up(*l, -df)));
    let c = round::powf_down(s, -1.0 / df).min(logs.iter().copied().fold(f64::INFINITY, f64::min));
    let min_gamma_log = logs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EfficiencySummary { gamma_logs: logs, c, min_gamma_log, size: gammas.len(), dim: d })
}

/// Largest `γ` (rounded down, shrunk) with `piece(γ) ⊂ outer`, by closed form.
fn max_scaling(piece: &Domain, outer: &Domain) -> f64 {
    outer
        .members()
        .into_iter()
        .map(|om| match (shape(piece), shape(om)) {
            (Shape::Poly { centers: pc, radii: pr }, Shape::Poly { centers: oc, radii: or }) => (0..pc.len())
                .map(|j| round::div_down(round::sub_down(or[j], dist_up(pc[j], oc[j])), pr[j]))
                .fold(f64::INFINITY, f64::min),
            (Shape::Ball { center: pc, radius: pr }, Shape::Poly { centers: oc, radii: or }) => (0..pc.len())
                .map(|j| round::div_down(round::sub_down(or[j], dist_up(pc[j], oc[j])), pr))
                .fold(f64::INFINITY, f64::min),
            (Shape::Ball { center: pc, radius: pr }, Shape::Ball { center: oc, radius: or }) => {
                let off = round::sqrt_up(round::sum_up((0..pc.len()).map(|j| {
                    let e = dist_up(pc[j], oc[j]);
                    round::mul_up(e, e)
                })));
                round::div_down(round::sub_down(or, off), pr)
            }
            (Shape::Poly { centers: pc, radii: pr }, Shape::Ball { center: oc, radius: or }) => {
                // largest γ with Σ (o_j + γ r_j)^2 <= R^2
                let o: Vec<f64> = (0..pc.len()).map(|j| dist_up(pc[j], oc[j])).collect();
                let a: f64 = pr.iter().map(|r| r * r).sum();
                let b: f64 = o.iter().zip(&pr).map(|(o, r)| o * r).sum();
                let c: f64 = o.iter().map(|o| o * o).sum::<f64>() - or * or;
                if c >= 0.0 {
                    0.0
                } else {
                    (-b + (b * b - a * c).sqrt()) / a
                }
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
        * (1.0 - 1e-12)
}

/// Candidate pieces for a `k × k` grid per coordinate plane over the bounding
/// box of `inner`.
fn grid_pieces(inner: &Domain, k: usize) -> Vec<Domain> {
    const INFLATE: f64 = 1.02;
    let bp = inner.bounding_polydisc();
    let d = bp.centers.len();
    // per-coordinate grids of square cells
    let mut axes: Vec<Vec<(Complex64, f64, f64)>> = Vec::with_capacity(d);
    for j in 0..d {
        let side = 2.0 * bp.radii[j] / k as f64;
        let mut cells = Vec::new();
        for a in 0..k {
            for b in 0..k {
                let lo_re = bp.centers[j].re - bp.radii[j] + a as f64 * side;
                let lo_im = bp.centers[j].im - bp.radii[j] + b as f64 * side;
                let c = Complex64::new(lo_re + side / 2.0, lo_im + side / 2.0);
                cells.push((c, side / 2.0, side / std::f64::consts::SQRT_2 * INFLATE));
            }
        }
        axes.push(cells);
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    'outer: loop {
        let centers: Vec<Complex64> = (0..d).map(|j| axes[j][idx[j]].0).collect();
        let cell = Cell {
            lo: (0..d)
                .flat_map(|j| {
                    let (c, h, _) = axes[j][idx[j]];
                    [c.re - h, c.im - h]
                })
                .collect(),
            hi: (0..d)
                .flat_map(|j| {
                    let (c, h, _) = axes[j][idx[j]];
                    [c.re + h, c.im + h]
                })
                .collect(),
        };
        if !cell_misses(&cell, inner) {
            let radii: Vec<f64> = (0..d).map(|j| axes[j][idx[j]].2).collect();
            out.push(if d == 1 {
                Domain::Disk(ComplexDisk { center: centers[0], radius: radii[0] })
            } else {
                Domain::Polydisc(Polydisc { centers, radii })
            });
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                continue 'outer;
            }
            idx[j] = 0;
        }
        break;
    }
    out
}

/// Searches regular grids up to `granularity` for the validated cover of
/// `(Ω₁, Ω₂)` with the largest efficiency `c`. Ties go to the coarser grid.
pub fn auto_cover(outer: &Domain, inner: &Domain, granularity: usize) -> Result<RelativeCover, GeometryError> {
    check_dims(outer, inner)?;
    if dist_lower_bound(inner, outer)? <= 0.0 && !contains(outer, inner)? {
        return Err(GeometryError::NotCompactlyContained("inner domain is not inside the outer domain".into()));
    }
    let mut best: Option<(f64, RelativeCover)> = None;
    for k in 1..=granularity.max(1) {
        let candidates = if k == 1 { vec![inner.bounding_shape()] } else { grid_pieces(inner, k) };
        let mut pieces = Vec::with_capacity(candidates.len());
        let mut ok = true;
        for dom in candidates {
            let gamma = max_scaling(&dom, outer);
            if !(gamma > 1.0 + MIN_SCALING_GAP) {
                ok = false;
                break;
            }
            pieces.push(CoverPiece { domain: dom, gamma });
        }
        if !ok {
            continue;
        }
        let Ok(cover) = cover_validate(&RelativeCover::new(pieces), outer, inner) else {
            continue;
        };
        let c = cover_efficiency(&cover)?.c;
        if best.as_ref().is_none_or(|(bc, _)| c > *bc) {
            best = Some((c, cover));
        }
    }
    best.map(|(_, c)| c).ok_or(GeometryError::SearchFailure { granularity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn disk(re: f64, r: f64) -> Domain {
        Domain::disk(c(re, 0.0), r).unwrap()
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scale_domain(&disk(0.0, 0.7), 1.4).unwrap(), disk(0.0, 0.7 * 1.4));
        assert_eq!(scale_domain(&disk(1.0, 1.0), 1.0).unwrap(), disk(1.0, 1.0));
        let p = Domain::polydisc(vec![c(0.0, 0.0); 2], vec![1.0, 2.0]).unwrap();
        assert_eq!(
            scale_domain(&p, 2.0).unwrap(),
            Domain::polydisc(vec![c(0.0, 0.0); 2], vec![2.0, 4.0]).unwrap()
        );
        let u = Domain::union(vec![disk(0.0, 1.0), disk(1.0, 1.0)]).unwrap();
        assert_eq!(scale_domain(&u, 2.0), Err(GeometryError::UnsupportedDomain));
    }

    #[test]
    fn distance_examples() {
        let d = dist_lower_bound(&disk(0.0, 0.5), &disk(0.0, 1.0)).unwrap();
        assert!(d <= 0.5 && d > 0.5 - 1e-15);
        let k = Domain::disk(c(0.3, 0.0), 0.1).unwrap();
        let d = dist_lower_bound(&k, &disk(0.0, 1.0)).unwrap();
        assert!(d <= 0.6 && d > 0.6 - 1e-15);
        let kp = Domain::polydisc(vec![c(0.0, 0.0); 2], vec![0.5, 0.5]).unwrap();
        let op = Domain::polydisc(vec![c(0.0, 0.0); 2], vec![1.0, 1.0]).unwrap();
        let d = dist_lower_bound(&kp, &op).unwrap();
        assert!(d <= 0.5 && d > 0.5 - 1e-15);
        // not contained
        assert_eq!(dist_lower_bound(&disk(0.9, 0.5), &disk(0.0, 1.0)).unwrap(), 0.0);
        assert!(matches!(
            dist_lower_bound(&disk(0.0, 0.5), &op),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cover_validation_examples() {
        let outer = disk(0.0, 1.0);
        let inner = disk(0.0, 0.7);
        let ok = RelativeCover::new(vec![CoverPiece { domain: disk(0.0, 0.7), gamma: 1.4 }]);
        assert!(cover_validate(&ok, &outer, &inner).unwrap().is_validated());

        let bad = RelativeCover::new(vec![CoverPiece { domain: disk(0.0, 0.7), gamma: 1.5 }]);
        match cover_validate(&bad, &outer, &inner) {
            Err(GeometryError::InvalidCover { condition: CoverCondition::Scaling, piece: Some(0), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let small = RelativeCover::new(vec![CoverPiece { domain: disk(0.0, 0.5), gamma: 1.5 }]);
        match cover_validate(&small, &outer, &inner) {
            Err(GeometryError::InvalidCover { condition: CoverCondition::Coverage, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let degenerate = RelativeCover::new(vec![CoverPiece { domain: disk(0.0, 0.7), gamma: 1.0 + 1e-7 }]);
        assert!(matches!(
            cover_validate(&degenerate, &outer, &inner),
            Err(GeometryError::DegenerateScaling { .. })
        ));
    }

    #[test]
    fn efficiency_examples() {
        let l2 = 2f64.ln();
        let e = efficiency_from_gammas(&[2.0, 4.0], 1).unwrap();
        assert!((e.c - 2.0 / 3.0 * l2).abs() < 1e-14 && e.c <= 2.0 / 3.0 * l2 + 1e-16);
        let e = efficiency_from_gammas(&[1.4], 1).unwrap();
        assert!((e.c - 1.4f64.ln()).abs() < 1e-14);
        let e = efficiency_from_gammas(&[2.0, 2.0], 2).unwrap();
        assert!((e.c - l2 / 2f64.sqrt()).abs() < 1e-14);
        assert!(matches!(efficiency_from_gammas(&[1.0], 1), Err(GeometryError::DegenerateScaling { .. })));
        let cover = RelativeCover::new(vec![CoverPiece { domain: disk(0.0, 0.7), gamma: 1.4 }]);
        assert!(cover_efficiency(&cover).is_err(), "unvalidated covers are rejected");
    }

    #[test]
    fn auto_cover_single_disk() {
        let cover = auto_cover(&disk(0.0, 1.0), &disk(0.0, 0.5), 1).unwrap();
        assert_eq!(cover.size(), 1);
        assert_eq!(cover.pieces[0].domain, disk(0.0, 0.5));
        assert!((cover.pieces[0].gamma - 2.0).abs() < 1e-9);
        let c = cover_efficiency(&cover).unwrap().c;
        assert!((c - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn auto_cover_near_degenerate_pair() {
        let cover = auto_cover(&disk(0.0, 1.0), &disk(0.0, 0.99), 2).unwrap();
        let c = cover_efficiency(&cover).unwrap().c;
        assert!((c - (1.0f64 / 0.99).ln()).abs() < 1e-9);
    }

    #[test]
    fn auto_cover_needs_finer_grid_for_two_lobes() {
        // Ω₁ is two touching disks; the hull of Ω₂ sticks out of both
        let outer = Domain::union(vec![disk(-1.0, 1.0), disk(1.0, 1.0)]).unwrap();
        let inner = Domain::union(vec![disk(-1.0, 0.3), disk(1.0, 0.3)]).unwrap();
        assert!(matches!(auto_cover(&outer, &inner, 1), Err(GeometryError::SearchFailure { .. })));
        let cover = auto_cover(&outer, &inner, 4).unwrap();
        assert!(cover.is_validated());
        assert!(cover.pieces.iter().all(|p| p.gamma > 1.0));
        let summary = cover_efficiency(&cover).unwrap();
        assert!(summary.c > 0.0 && summary.c <= summary.min_gamma_log);
    }

    #[test]
    fn auto_cover_polydisc() {
        let outer = Domain::polydisc(vec![c(0.0, 0.0); 2], vec![1.0, 1.0]).unwrap();
        let inner = Domain::polydisc(vec![c(0.0, 0.0); 2], vec![0.5, 0.25]).unwrap();
        let cover = auto_cover(&outer, &inner, 2).unwrap();
        let s = cover_efficiency(&cover).unwrap();
        // the single bounding piece scales by min(2, 4)
        assert!((s.c - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn grid_cover_of_disk_validates() {
        let cover = auto_cover(&disk(0.0, 1.0), &disk(0.0, 0.3), 3).unwrap();
        assert!(cover.is_validated());
        let outer = disk(0.0, 1.0);
        let pieces = grid_pieces(&disk(0.0, 0.3), 3);
        let pieces: Vec<CoverPiece> = pieces
            .into_iter()
            .map(|d| {
                let gamma = max_scaling(&d, &outer);
                CoverPiece { domain: d, gamma }
            })
            .collect();
        let grid = cover_validate(&RelativeCover::new(pieces), &outer, &disk(0.0, 0.3)).unwrap();
        assert!(grid.size() > 1);
    }

    #[test]
    fn volumes_use_unit_ball_normalisation() {
        assert_eq!(disk(0.0, 1.0).volume_upper(), 1.0);
        let b = Domain::ball(vec![c(0.0, 0.0); 2], 1.0).unwrap();
        assert!((b.volume_upper() - 1.0).abs() < 1e-15);
        let p = Domain::polydisc(vec![c(0.0, 0.0); 2], vec![1.0, 1.0]).unwrap();
        assert!((p.volume_upper() - 2.0).abs() < 1e-14);
    }
}
