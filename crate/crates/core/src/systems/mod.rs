//! Holomorphic map-weight systems `(φ_i, w_i)` on a domain `Ω`.

mod fixed_point;
mod maps;
mod weight;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixed_point::{fixed_point, CertificateKind, CertifiedFixedPoint, FIXED_POINT_DIAMETER};
pub use maps::{map_derivative, map_eval, Atom, Diagonal, HoloMap};
pub use weight::{weight_sup_bound, Polynomial, Term, Weight};

use crate::ball::Ball;
use crate::geometry::{self, ComplexDisk, Domain, GeometryError, Polydisc};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("pole: {0}")]
    Pole(String),
    #[error("enclosure failure: {0}")]
    EnclosureFailure(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("branch images are not compactly contained in the domain (margin {margin:e})")]
    NotCompactlyContained { margin: f64 },
    #[error("fixed point of word {word:?} could not be refined below diameter {diameter:e}")]
    PrecisionFailure { word: Vec<usize>, diameter: f64 },
    #[error("det(I - φ') may vanish at the fixed point of word {word:?}")]
    SingularMultiplier { word: Vec<usize> },
    #[error("invalid word {0:?}")]
    InvalidWord(Vec<usize>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A closed polydisc (a disk when `d = 1`) given per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskEnclosure {
    pub coords: Vec<Ball>,
}

impl DiskEnclosure {
    pub fn point(z: &[Complex64]) -> Self {
        DiskEnclosure { coords: z.iter().map(|z| Ball::point(*z)).collect() }
    }

    /// Bounding polydisc of a domain.
    pub fn of_domain(d: &Domain) -> Self {
        let p = d.bounding_polydisc();
        DiskEnclosure { coords: p.centers.iter().zip(&p.radii).map(|(c, r)| Ball::new(*c, *r)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn center(&self) -> Vec<Complex64> {
        self.coords.iter().map(|b| b.mid).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.coords.iter().map(|b| 2.0 * b.rad).fold(0.0, f64::max)
    }

    /// The enclosure as a (possibly zero-radius) disk or polydisc domain.
    pub fn to_domain(&self) -> Domain {
        if self.coords.len() == 1 {
            Domain::Disk(ComplexDisk { center: self.coords[0].mid, radius: self.coords[0].rad })
        } else {
            Domain::Polydisc(Polydisc {
                centers: self.center(),
                radii: self.coords.iter().map(|b| b.rad).collect(),
            })
        }
    }

    /// `true` if `other` lies in the open interior of `self`.
    pub fn contains_strictly(&self, other: &DiskEnclosure) -> bool {
        self.coords.iter().zip(&other.coords).all(|(a, b)| a.contains_ball_strictly(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub map: HoloMap,
    pub weight: Weight,
}

/// Annotation for systems truncated from a countable family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDescriptor {
    pub truncation_index: usize,
    /// User-supplied upper bound on the discarded `L²` mass of `Σ_{i>I} |w_i|`.
    pub l2_mass_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MapWeightSystem {
    domain: Domain,
    branches: Vec<Branch>,
    flat: Vec<Diagonal>,
    tail: Option<TailDescriptor>,
}

impl MapWeightSystem {
    pub fn new(domain: Domain, branches: Vec<Branch>, tail: Option<TailDescriptor>) -> Result<Self, SystemError> {
        domain.validate()?;
        let d = domain.dim();
        if branches.is_empty() {
            return Err(SystemError::InvalidSystem("system has no branches".into()));
        }
        for (i, b) in branches.iter().enumerate() {
            b.map.validate()?;
            if b.map.dim() != d {
                return Err(SystemError::InvalidSystem(format!(
                    "branch {i} has dimension {} but the domain has dimension {d}",
                    b.map.dim()
                )));
            }
            b.weight.validate(d)?;
        }
        let flat = branches.iter().map(|b| b.map.flatten()).collect();
        Ok(MapWeightSystem { domain, branches, flat, tail })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn tail(&self) -> Option<&TailDescriptor> {
        self.tail.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub(crate) fn flat(&self, i: usize) -> &Diagonal {
        &self.flat[i]
    }

    /// The same system on another domain.
    pub fn with_domain(&self, domain: Domain) -> Result<Self, SystemError> {
        MapWeightSystem::new(domain, self.branches.clone(), self.tail.clone())
    }
}

/// Disk (polydisc) containing `φ(D)`.
pub fn image_enclosure(map: &HoloMap, d: &DiskEnclosure) -> Result<DiskEnclosure, SystemError> {
    if map.dim() != d.dim() {
        return Err(SystemError::InvalidSystem(format!(
            "map of dimension {} applied to an enclosure in C^{}",
            map.dim(),
            d.dim()
        )));
    }
    Ok(DiskEnclosure { coords: map.flatten().image(&d.coords)? })
}

/// Enclosures of `φ_i(Ω)`, one per branch (a union per branch for union
/// domains).
pub fn branch_images(s: &MapWeightSystem) -> Result<Vec<Vec<DiskEnclosure>>, SystemError> {
    (0..s.len())
        .map(|i| {
            s.domain
                .members()
                .into_iter()
                .map(|m| Ok(DiskEnclosure { coords: s.flat(i).image(&DiskEnclosure::of_domain(m).coords)? }))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageHull {
    pub pieces: Vec<DiskEnclosure>,
    /// Certified lower bound on `dist(⋃ φ_i(Ω), ∂Ω)`.
    pub margin: f64,
}

impl ImageHull {
    pub fn to_domain(&self) -> Domain {
        if self.pieces.len() == 1 {
            self.pieces[0].to_domain()
        } else {
            Domain::Union { members: self.pieces.iter().map(DiskEnclosure::to_domain).collect() }
        }
    }
}

/// Union of enclosures covering `⋃ φ_i(Ω)` with its margin inside `Ω`.
pub fn branch_image_hull(s: &MapWeightSystem) -> Result<ImageHull, SystemError> {
    let pieces: Vec<DiskEnclosure> = branch_images(s)?.into_iter().flatten().collect();
    let hull = ImageHull { pieces, margin: 0.0 };
    let margin = geometry::dist_lower_bound(&hull.to_domain(), &s.domain)?;
    if margin <= 0.0 {
        return Err(SystemError::NotCompactlyContained { margin });
    }
    Ok(ImageHull { margin, ..hull })
}
