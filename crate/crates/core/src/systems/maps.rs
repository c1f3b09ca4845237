//! Holomorphic branch maps: affine and Möbius maps of one variable, their
//! coordinatewise products and compositions.
//!
//! Every supported map is diagonal, `φ(z)_j = φ_j(z_j)`, so a map flattens to
//! one chain of one-variable atoms per coordinate. Disk images of atoms are
//! exact up to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SystemError;
use crate::ball::Ball;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HoloMap {
    /// `z ↦ a z + b`.
    Affine { a: Complex64, b: Complex64 },
    /// `z ↦ (a z + b) / (c z + e)`.
    Mobius { a: Complex64, b: Complex64, c: Complex64, e: Complex64 },
    /// Coordinatewise product of one-variable maps.
    Product { factors: Vec<HoloMap> },
    /// Maps applied left to right.
    Composite { maps: Vec<HoloMap> },
}

/// A one-variable affine or Möbius map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Atom {
    Affine { a: Complex64, b: Complex64 },
    Mobius { a: Complex64, b: Complex64, c: Complex64, e: Complex64 },
}

impl Atom {
    pub fn eval(&self, z: Complex64) -> Result<Complex64, SystemError> {
        match *self {
            Atom::Affine { a, b } => Ok(a * z + b),
            Atom::Mobius { a, b, c, e } => {
                let den = c * z + e;
                if den.norm() <= f64::MIN_POSITIVE {
                    return Err(SystemError::Pole(format!("Möbius denominator vanishes at {z}")));
                }
                Ok((a * z + b) / den)
            }
        }
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64, SystemError> {
        match *self {
            Atom::Affine { a, .. } => Ok(a),
            Atom::Mobius { a, b, c, e } => {
                let den = c * z + e;
                if den.norm() <= f64::MIN_POSITIVE {
                    return Err(SystemError::Pole(format!("Möbius denominator vanishes at {z}")));
                }
                Ok((a * e - b * c) / (den * den))
            }
        }
    }

    /// Disk containing the image of `z`, exact up to rounding.
    pub fn image(&self, z: &Ball) -> Result<Ball, SystemError> {
        self.image_with_derivative(z).map(|(w, _)| w)
    }

    /// Disk containing the derivative over `z`.
    pub fn derivative_image(&self, z: &Ball) -> Result<Ball, SystemError> {
        self.image_with_derivative(z).map(|(_, d)| d)
    }

    /// Image and derivative enclosures over `z`, sharing the pole inversion.
    pub fn image_with_derivative(&self, z: &Ball) -> Result<(Ball, Ball), SystemError> {
        match *self {
            Atom::Affine { a, b } => Ok((*z * a + b, Ball::point(a))),
            Atom::Mobius { a, b, c, e } => {
                let zero = Complex64::new(0.0, 0.0);
                let (pa, pb, pc, pe) = (Ball::point(a), Ball::point(b), Ball::point(c), Ball::point(e));
                let det = pa * pe - pb * pc;
                if c == zero {
                    let inv_e = pe.inv().ok_or_else(|| SystemError::Pole("Möbius map with c = e = 0".into()))?;
                    return Ok((*z * (pa * inv_e) + pb * inv_e, pa * inv_e));
                }
                let w = (*z * pc + pe).inv().ok_or_else(|| {
                    SystemError::EnclosureFailure(format!("Möbius pole lies in the disk {z}"))
                })?;
                let derivative = det * w.sqr();
                if a == zero {
                    return Ok((pb * w, derivative));
                }
                // (a z + b)/(c z + e) = a/c - det / (c (c z + e))
                let inv_c = pc.inv().expect("c is a non-zero point");
                Ok((pa * inv_c - det * inv_c * w, derivative))
            }
        }
    }
}

/// A diagonal map flattened to one atom chain per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal {
    pub chains: Vec<Vec<Atom>>,
}

impl Diagonal {
    pub fn dim(&self) -> usize {
        self.chains.len()
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<Vec<Complex64>, SystemError> {
        self.chains
            .iter()
            .zip(z)
            .map(|(chain, zj)| chain.iter().try_fold(*zj, |acc, atom| atom.eval(acc)))
            .collect()
    }

    /// Diagonal of the Jacobian.
    pub fn derivative(&self, z: &[Complex64]) -> Result<Vec<Complex64>, SystemError> {
        self.chains
            .iter()
            .zip(z)
            .map(|(chain, zj)| {
                let mut w = *zj;
                let mut d = Complex64::new(1.0, 0.0);
                for atom in chain {
                    d *= atom.derivative(w)?;
                    w = atom.eval(w)?;
                }
                Ok(d)
            })
            .collect()
    }

    pub fn image(&self, z: &[Ball]) -> Result<Vec<Ball>, SystemError> {
        self.chains
            .iter()
            .zip(z)
            .map(|(chain, zj)| chain.iter().try_fold(*zj, |acc, atom| atom.image(&acc)))
            .collect()
    }

    /// Images and Jacobian diagonal enclosures over `z`.
    pub fn image_with_derivative(&self, z: &[Ball]) -> Result<(Vec<Ball>, Vec<Ball>), SystemError> {
        let mut images = Vec::with_capacity(z.len());
        let mut derivs = Vec::with_capacity(z.len());
        for (chain, zj) in self.chains.iter().zip(z) {
            let mut w = *zj;
            let mut d = Ball::ONE;
            for atom in chain {
                let (next, da) = atom.image_with_derivative(&w)?;
                d = d * da;
                w = next;
            }
            images.push(w);
            derivs.push(d);
        }
        Ok((images, derivs))
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Diagonal) -> Diagonal {
        Diagonal {
            chains: self
                .chains
                .iter()
                .zip(&next.chains)
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect(),
        }
    }
}

impl HoloMap {
    pub fn identity(d: usize) -> HoloMap {
        let id = HoloMap::Affine { a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0) };
        if d == 1 {
            id
        } else {
            HoloMap::Product { factors: vec![id; d] }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            HoloMap::Affine { .. } | HoloMap::Mobius { .. } => 1,
            HoloMap::Product { factors } => factors.len(),
            HoloMap::Composite { maps } => maps.first().map_or(0, HoloMap::dim),
        }
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        match self {
            HoloMap::Affine { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(SystemError::InvalidSystem("affine coefficients must be finite".into()));
                }
            }
            HoloMap::Mobius { a, b, c, e } => {
                if ![a, b, c, e].iter().all(|x| x.is_finite()) {
                    return Err(SystemError::InvalidSystem("Möbius coefficients must be finite".into()));
                }
                if (a * e - b * c).norm() == 0.0 {
                    return Err(SystemError::InvalidSystem("Möbius determinant a·e − b·c vanishes".into()));
                }
            }
            HoloMap::Product { factors } => {
                if factors.is_empty() {
                    return Err(SystemError::InvalidSystem("empty product map".into()));
                }
                for f in factors {
                    f.validate()?;
                    if f.dim() != 1 {
                        return Err(SystemError::InvalidSystem("product factors must be one-dimensional".into()));
                    }
                }
            }
            HoloMap::Composite { maps } => {
                let first = maps.first().ok_or_else(|| SystemError::InvalidSystem("empty composite map".into()))?;
                for m in maps {
                    m.validate()?;
                    if m.dim() != first.dim() {
                        return Err(SystemError::InvalidSystem(format!(
                            "composite mixes dimensions {} and {}",
                            first.dim(),
                            m.dim()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn flatten(&self) -> Diagonal {
        match self {
            HoloMap::Affine { a, b } => Diagonal { chains: vec![vec![Atom::Affine { a: *a, b: *b }]] },
            HoloMap::Mobius { a, b, c, e } => {
                Diagonal { chains: vec![vec![Atom::Mobius { a: *a, b: *b, c: *c, e: *e }]] }
            }
            HoloMap::Product { factors } => {
                Diagonal { chains: factors.iter().map(|f| f.flatten().chains.swap_remove(0)).collect() }
            }
            HoloMap::Composite { maps } => {
                let mut acc = Diagonal { chains: vec![Vec::new(); self.dim()] };
                for m in maps {
                    acc = acc.then(&m.flatten());
                }
                acc
            }
        }
    }
}

/// Evaluates `φ` at `z`.
pub fn map_eval(map: &HoloMap, z: &[Complex64]) -> Result<Vec<Complex64>, SystemError> {
    check_dim(map, z.len())?;
    map.flatten().eval(z)
}

/// Diagonal of the Jacobian of `φ` at `z`.
pub fn map_derivative(map: &HoloMap, z: &[Complex64]) -> Result<Vec<Complex64>, SystemError> {
    check_dim(map, z.len())?;
    map.flatten().derivative(z)
}

fn check_dim(map: &HoloMap, d: usize) -> Result<(), SystemError> {
    if map.dim() != d {
        return Err(SystemError::InvalidSystem(format!("map of dimension {} applied to a point in C^{d}", map.dim())));
    }
    Ok(())
}
