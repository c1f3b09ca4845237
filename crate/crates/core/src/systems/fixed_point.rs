//! Certified fixed points of branch compositions `φ_{i_n} ∘ ⋯ ∘ φ_{i_1}`.
//!
//! The fixed point is located by iteration from the domain centre and
//! polished by Newton's method. A disk `E` of diameter at most
//! [`FIXED_POINT_DIAMETER`] around it is then certified either by the
//! inclusion `φ(E) ⊂ int E` (a holomorphic self-map of a disk into a compact
//! subset has exactly one fixed point there) or, when the composition does
//! not contract `E`, by the Krawczyk inclusion `K(E) ⊂ int E` for
//! `g = φ − id`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::maps::Atom;
use super::{DiskEnclosure, MapWeightSystem, SystemError};
use crate::ball::Ball;

pub const FIXED_POINT_DIAMETER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Contraction,
    Krawczyk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedFixedPoint {
    pub word: Vec<usize>,
    pub enclosure: DiskEnclosure,
    /// `z_0 = z*` and `z_j = φ_{i_j}(z_{j-1})` for `j < n`.
    pub orbit: Vec<DiskEnclosure>,
    /// Diagonal of `φ'(z*)`.
    pub multiplier: Vec<Ball>,
    /// `det(I − φ'(z*))`, bounded away from zero.
    pub det_factor: Ball,
    pub kind: CertificateKind,
}

fn eval_chain(chain: &[Atom], z: Complex64) -> Result<Complex64, SystemError> {
    chain.iter().try_fold(z, |acc, a| a.eval(acc))
}

fn derivative_chain(chain: &[Atom], z: Complex64) -> Result<Complex64, SystemError> {
    let mut w = z;
    let mut d = Complex64::new(1.0, 0.0);
    for a in chain {
        d *= a.derivative(w)?;
        w = a.eval(w)?;
    }
    Ok(d)
}

fn image_chain(chain: &[Atom], z: Ball) -> Result<(Ball, Ball), SystemError> {
    let mut w = z;
    let mut d = Ball::ONE;
    for a in chain {
        let (next, da) = a.image_with_derivative(&w)?;
        d = d * da;
        w = next;
    }
    Ok((w, d))
}

/// The chain as one Möbius matrix `[[a, b], [c, e]]`, normalised.
fn compose(chain: &[Atom]) -> [Complex64; 4] {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [one, zero, zero, one];
    for atom in chain {
        let [a, b, c, e] = match *atom {
            Atom::Affine { a, b } => [a, b, zero, one],
            Atom::Mobius { a, b, c, e } => [a, b, c, e],
        };
        m = [a * m[0] + b * m[2], a * m[1] + b * m[3], c * m[0] + e * m[2], c * m[1] + e * m[3]];
        let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if scale > 0.0 && scale.is_finite() {
            m.iter_mut().for_each(|x| *x /= scale);
        }
    }
    m
}

/// Approximate fixed point of a one-variable chain: iteration of the
/// composed map from `start`, then Newton on `φ(z) − z`.
fn locate(chain: &[Atom], start: Complex64) -> Complex64 {
    let [a, b, c, e] = compose(chain);
    let eval = |z: Complex64| (a * z + b) / (c * z + e);
    let mut z = start;
    for _ in 0..200 {
        let next = eval(z);
        if !next.is_finite() {
            break;
        }
        let step = (next - z).norm();
        z = next;
        if step <= 1e-6 * (1.0 + z.norm()) {
            break;
        }
    }
    for _ in 0..30 {
        let q = c * z + e;
        let df = (a * e - b * c) / (q * q);
        let step = (eval(z) - z) / (df - 1.0);
        if !step.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-17 * (1.0 + z.norm()) {
            break;
        }
    }
    // one Newton step on the chain itself removes the composition rounding
    if let (Ok(f), Ok(df)) = (eval_chain(chain, z), derivative_chain(chain, z)) {
        let step = (f - z) / (df - 1.0);
        if step.is_finite() {
            z -= step;
        }
    }
    z
}

/// Certified enclosure of the unique fixed point of `chain` near `z`.
fn certify(chain: &[Atom], z: Complex64) -> Option<(Ball, CertificateKind)> {
    let max_rad = FIXED_POINT_DIAMETER / 2.0;
    let residual = eval_chain(chain, z).map(|f| (f - z).norm()).unwrap_or(f64::INFINITY);
    if !residual.is_finite() {
        return None;
    }
    let floor = 8.0 * f64::EPSILON * (1.0 + z.norm());
    let mut rad = (4.0 * residual).max(floor);
    let mut krawczyk_data = None;
    while rad <= max_rad {
        let e = Ball::new(z, rad);
        if let Ok((img, der)) = image_chain(chain, e) {
            if e.contains_ball_strictly(&img) {
                return Some((img, CertificateKind::Contraction));
            }
            // K = z − y g(z) + (1 − y g'(E)) (E − z)
            if krawczyk_data.is_none() {
                let g_mid = image_chain(chain, Ball::point(z)).ok()?.0 - Ball::point(z);
                let slope = derivative_chain(chain, z).ok()? - 1.0;
                krawczyk_data = Some((g_mid, Ball::point(1.0 / slope)));
            }
            let (g_mid, y) = krawczyk_data.expect("set above");
            let gp = der - Ball::ONE;
            let k = Ball::point(z) - y * g_mid + (Ball::ONE - y * gp) * Ball::new(Complex64::new(0.0, 0.0), rad);
            if e.contains_ball_strictly(&k) {
                return Some((k, CertificateKind::Krawczyk));
            }
        }
        rad *= 4.0;
    }
    None
}

/// Certifies the fixed point of `φ_{word[n-1]} ∘ ⋯ ∘ φ_{word[0]}`.
pub fn fixed_point(word: &[usize], s: &MapWeightSystem) -> Result<CertifiedFixedPoint, SystemError> {
    if word.is_empty() || word.iter().any(|&i| i >= s.len()) {
        return Err(SystemError::InvalidWord(word.to_vec()));
    }
    let start = s.domain().bounding_polydisc().centers;
    let d = s.dim();
    let mut coords = Vec::with_capacity(d);
    let mut kind = CertificateKind::Contraction;
    for (j, zj) in start.iter().enumerate() {
        let chain: Vec<Atom> = word.iter().flat_map(|&i| s.flat(i).chains[j].iter().copied()).collect();
        let approx = locate(&chain, *zj);
        let (ball, k) = certify(&chain, approx).ok_or_else(|| SystemError::PrecisionFailure {
            word: word.to_vec(),
            diameter: FIXED_POINT_DIAMETER,
        })?;
        if k == CertificateKind::Krawczyk {
            kind = k;
        }
        coords.push(ball);
    }
    let enclosure = DiskEnclosure { coords };

    let mut orbit = Vec::with_capacity(word.len());
    let mut multiplier = vec![Ball::ONE; d];
    let mut z = enclosure.coords.clone();
    for &i in word {
        orbit.push(DiskEnclosure { coords: z.clone() });
        let (next, der) = s.flat(i).image_with_derivative(&z)?;
        for (m, dj) in multiplier.iter_mut().zip(der) {
            *m = *m * dj;
        }
        z = next;
    }
    let det_factor = multiplier.iter().fold(Ball::ONE, |acc, m| acc * (Ball::ONE - *m));
    if det_factor.contains_zero() {
        return Err(SystemError::SingularMultiplier { word: word.to_vec() });
    }
    Ok(CertifiedFixedPoint { word: word.to_vec(), enclosure, orbit, multiplier, det_factor, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::systems::{map_eval, Branch, HoloMap, Weight};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn doubling() -> MapWeightSystem {
        let maps = [(0.5, 0.0), (0.5, 0.5)];
        let branches = maps
            .iter()
            .map(|(a, b)| Branch {
                map: HoloMap::Affine { a: c(*a, 0.0), b: c(*b, 0.0) },
                weight: Weight::constant(c(0.5, 0.0)),
            })
            .collect();
        MapWeightSystem::new(Domain::disk(c(0.5, 0.0), 1.0).unwrap(), branches, None).unwrap()
    }

    fn gauss_like(count: usize) -> MapWeightSystem {
        let branches = (1..=count)
            .map(|i| Branch {
                map: HoloMap::Mobius { a: c(0.0, 0.0), b: c(1.0, 0.0), c: c(1.0, 0.0), e: c(i as f64, 0.0) },
                weight: Weight {
                    num: crate::systems::Polynomial::constant(c(1.0, 0.0)),
                    den: crate::systems::Polynomial::univariate(&[
                        c((i * i) as f64, 0.0),
                        c(2.0 * i as f64, 0.0),
                        c(1.0, 0.0),
                    ]),
                },
            })
            .collect();
        MapWeightSystem::new(Domain::disk(c(1.0, 0.0), 1.5).unwrap(), branches, None).unwrap()
    }

    fn close(b: &Ball, z: Complex64, tol: f64) -> bool {
        (b.mid - z).norm() < tol && b.rad < tol
    }

    #[test]
    fn doubling_examples() {
        let s = doubling();
        let p = fixed_point(&[0], &s).unwrap();
        assert!(p.enclosure.coords[0].contains(c(0.0, 0.0)));
        assert!(p.enclosure.diameter() <= FIXED_POINT_DIAMETER);
        assert!(close(&p.multiplier[0], c(0.5, 0.0), 1e-14));
        assert!(close(&p.det_factor, c(0.5, 0.0), 1e-14));

        let p = fixed_point(&[1], &s).unwrap();
        assert!(p.enclosure.coords[0].contains(c(1.0, 0.0)));

        let p = fixed_point(&[0, 1], &s).unwrap();
        assert!((p.enclosure.coords[0].mid - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(close(&p.multiplier[0], c(0.25, 0.0), 1e-14));
        assert!(close(&p.det_factor, c(0.75, 0.0), 1e-14));
        assert_eq!(p.kind, CertificateKind::Contraction);
        assert_eq!(p.orbit.len(), 2);
    }

    #[test]
    fn invalid_words_are_rejected() {
        assert!(matches!(fixed_point(&[], &doubling()), Err(SystemError::InvalidWord(_))));
        assert!(matches!(fixed_point(&[2], &doubling()), Err(SystemError::InvalidWord(_))));
    }

    #[test]
    fn repelling_fixed_point_uses_krawczyk() {
        // z ↦ 2z − 1 is not a contraction, its fixed point 1 is repelling
        let branches = vec![Branch {
            map: HoloMap::Affine { a: c(2.0, 0.0), b: c(-1.0, 0.0) },
            weight: Weight::constant(c(1.0, 0.0)),
        }];
        let s = MapWeightSystem::new(Domain::disk(c(0.0, 0.0), 3.0).unwrap(), branches, None).unwrap();
        let p = fixed_point(&[0], &s).unwrap();
        assert_eq!(p.kind, CertificateKind::Krawczyk);
        assert!(p.enclosure.coords[0].contains(c(1.0, 0.0)));
        assert!(close(&p.det_factor, c(-1.0, 0.0), 1e-13));
    }

    #[test]
    fn gauss_branch_fixed_point() {
        // 1/(z+1) = z at the golden ratio conjugate
        let p = fixed_point(&[0], &gauss_like(3)).unwrap();
        let g = (5f64.sqrt() - 1.0) / 2.0;
        assert!(p.enclosure.coords[0].contains(c(g, 0.0)));
        assert!(p.multiplier[0].contains(c(-g * g, 0.0)));
    }

    #[test]
    fn product_system_fixed_point() {
        let branches = vec![Branch {
            map: HoloMap::Product {
                factors: vec![
                    HoloMap::Affine { a: c(0.5, 0.0), b: c(0.25, 0.0) },
                    HoloMap::Affine { a: c(0.0, 0.25), b: c(0.0, 0.0) },
                ],
            },
            weight: Weight::constant(c(1.0, 0.0)),
        }];
        let dom = Domain::polydisc(vec![c(0.0, 0.0); 2], vec![1.0, 1.0]).unwrap();
        let s = MapWeightSystem::new(dom, branches, None).unwrap();
        let p = fixed_point(&[0], &s).unwrap();
        assert!(p.enclosure.coords[0].contains(c(0.5, 0.0)));
        assert!(p.enclosure.coords[1].contains(c(0.0, 0.0)));
        // (1 − 1/2)(1 − i/4)
        assert!(p.det_factor.contains(c(0.5, -0.125)));
    }

    proptest! {
        #[test]
        fn certificate_and_cyclic_invariance(word in proptest::collection::vec(0usize..3, 1..=6)) {
            let s = gauss_like(3);
            let p = fixed_point(&word, &s).unwrap();
            let z = p.enclosure.center();
            let mut w = z.clone();
            for &i in &word {
                w = map_eval(&s.branches()[i].map, &w).unwrap();
            }
            prop_assert!((w[0] - z[0]).norm() <= p.enclosure.diameter().max(1e-15) + 1e-15);
            let mut rotated = word.clone();
            rotated.rotate_left(1);
            let q = fixed_point(&rotated, &s).unwrap();
            prop_assert!((p.multiplier[0].mid - q.multiplier[0].mid).norm() < 1e-10);
        }
    }
}
