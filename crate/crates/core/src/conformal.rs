//! Conformal maps ψ from a parameter region X ⊂ closed left half-plane onto a
//! pole domain A, with the shift map φ(s) = ψ(-conj(ψ⁻¹(s))).
//!
//! Every map carries an analytic branch of ψ'(w)^{1/2} on X ∪ C₊ minus its
//! branch cut.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;

use crate::{Error, Result, C64};

/// Points within this s-plane distance of a branch cut are rejected.
pub const BRANCH_TOL: f64 = 1e-12;

const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Parameters of ψ(w) = c + (M/2)(R m + 1/(R m)) with m = (w+1)/(w-1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: C64,
    pub scale: C64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConformalMap {
    /// A = open left half-plane.
    Identity,
    /// A = open unit disk minus the origin.
    MobiusDisk,
    /// A = open upper half-plane.
    RotationUpperHalf,
    /// A = interior of the ellipse c + (M/2)(R e^{iθ} + R⁻¹ e^{-iθ}) minus the focal segment c + M[-1, 1].
    JoukowskiEllipse(Ellipse),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainMembership {
    pub region: Region,
    /// Re ψ⁻¹(point) when the preimage exists.
    pub preimage_re: Option<f64>,
}

/// A pole γ of ψ'^{1/2} and its residue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtDerivPole {
    pub point: C64,
    pub residue: C64,
}

impl fmt::Display for ConformalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformalMap::JoukowskiEllipse(e) => {
                write!(f, "joukowski-ellipse(c={}, M={}, R={})", e.center, e.scale, e.radius)
            }
            m => f.write_str(m.kind_name()),
        }
    }
}

fn is_pole(w: C64, p: C64) -> bool {
    (w - p).norm() <= 1e-15 * (1.0 + p.norm())
}

impl ConformalMap {
    pub fn joukowski(center: C64, scale: C64, radius: f64) -> Result<Self> {
        if !(radius > 1.0) || !radius.is_finite() {
            return Err(Error::config(None, "map-R", format!("ellipse radius must exceed 1, got {radius}")));
        }
        if scale.norm() == 0.0 || !scale.norm().is_finite() || !center.norm().is_finite() {
            return Err(Error::config(None, "map-M", "ellipse scale must be finite and nonzero"));
        }
        Ok(ConformalMap::JoukowskiEllipse(Ellipse { center, scale, radius }))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConformalMap::Identity => "identity",
            ConformalMap::MobiusDisk => "mobius-disk",
            ConformalMap::RotationUpperHalf => "rotation-upper-half",
            ConformalMap::JoukowskiEllipse(_) => "joukowski-ellipse",
        }
    }

    /// Whether ψ and ψ'^{1/2} share their poles, which reduces the optimality
    /// conditions to Hermite interpolation at φ(λ̂).
    pub fn is_simplified_regime(&self) -> bool {
        true
    }

    /// Poles of ψ.
    pub fn psi_poles(&self) -> Vec<C64> {
        match self {
            ConformalMap::Identity | ConformalMap::RotationUpperHalf => vec![],
            ConformalMap::MobiusDisk => vec![ONE],
            ConformalMap::JoukowskiEllipse(_) => vec![ONE, -ONE],
        }
    }

    /// Poles of ψ'^{1/2} with residues. At w = -1 the Joukowski pole sits on
    /// the branch cut; the two half-plane branches carry opposite residues, so
    /// the small-contour value is zero.
    pub fn sqrt_dpsi_poles(&self) -> Vec<SqrtDerivPole> {
        match self {
            ConformalMap::Identity | ConformalMap::RotationUpperHalf => vec![],
            ConformalMap::MobiusDisk => vec![SqrtDerivPole { point: ONE, residue: I * SQRT_2 }],
            ConformalMap::JoukowskiEllipse(e) => vec![
                SqrtDerivPole { point: ONE, residue: I * (e.scale * e.radius).sqrt() },
                SqrtDerivPole { point: -ONE, residue: C64::new(0.0, 0.0) },
            ],
        }
    }

    pub fn psi(&self, w: C64) -> Result<C64> {
        match self {
            ConformalMap::Identity => Ok(w),
            ConformalMap::RotationUpperHalf => Ok(-I * w),
            ConformalMap::MobiusDisk => {
                if is_pole(w, ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                Ok((w + 1.0) / (w - 1.0))
            }
            ConformalMap::JoukowskiEllipse(e) => {
                if is_pole(w, ONE) || is_pole(w, -ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                let zeta = e.radius * (w + 1.0) / (w - 1.0);
                Ok(e.center + e.scale * 0.5 * (zeta + zeta.inv()))
            }
        }
    }

    pub fn psi_inv(&self, s: C64) -> Result<C64> {
        match self {
            ConformalMap::Identity => Ok(s),
            ConformalMap::RotationUpperHalf => Ok(I * s),
            ConformalMap::MobiusDisk => {
                if is_pole(s, ONE) {
                    return Err(Error::PoleHit { point: s });
                }
                Ok((s + 1.0) / (s - 1.0))
            }
            ConformalMap::JoukowskiEllipse(e) => {
                let t = (s - e.center) / e.scale;
                let dist = if t.re.abs() <= 1.0 { t.im.abs() } else { (t - t.re.signum()).norm() };
                if dist * e.scale.norm() < BRANCH_TOL {
                    return Err(Error::BranchCutHit { point: s });
                }
                // Root of ζ + 1/ζ = 2t with |ζ| ≥ 1, picked without cancellation.
                let q = (t * t - 1.0).sqrt();
                let (a, b) = (t + q, t - q);
                let zeta = if a.norm() >= b.norm() { a } else { b };
                let m = zeta / e.radius;
                if is_pole(m, ONE) {
                    return Err(Error::PoleHit { point: s });
                }
                Ok((m + 1.0) / (m - 1.0))
            }
        }
    }

    pub fn dpsi(&self, w: C64) -> Result<C64> {
        match self {
            ConformalMap::Identity => Ok(ONE),
            ConformalMap::RotationUpperHalf => Ok(-I),
            ConformalMap::MobiusDisk => {
                if is_pole(w, ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                Ok(-2.0 / ((w - 1.0) * (w - 1.0)))
            }
            ConformalMap::JoukowskiEllipse(e) => {
                if is_pole(w, ONE) || is_pole(w, -ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                let (wm, wp) = (w - 1.0, w + 1.0);
                Ok(e.scale * (-e.radius / (wm * wm) + 1.0 / (e.radius * wp * wp)))
            }
        }
    }

    pub fn d2psi(&self, w: C64) -> Result<C64> {
        match self {
            ConformalMap::Identity | ConformalMap::RotationUpperHalf => Ok(C64::new(0.0, 0.0)),
            ConformalMap::MobiusDisk => {
                if is_pole(w, ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                Ok(4.0 / (w - 1.0).powi(3))
            }
            ConformalMap::JoukowskiEllipse(e) => {
                if is_pole(w, ONE) || is_pole(w, -ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                Ok(e.scale * (2.0 * e.radius / (w - 1.0).powi(3) - 2.0 / (e.radius * (w + 1.0).powi(3))))
            }
        }
    }

    /// The analytic branch of ψ'(w)^{1/2}.
    pub fn sqrt_dpsi(&self, w: C64) -> Result<C64> {
        match self {
            ConformalMap::Identity => Ok(ONE),
            ConformalMap::RotationUpperHalf => Ok(C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)),
            ConformalMap::MobiusDisk => {
                if is_pole(w, ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                Ok(I * SQRT_2 / (w - 1.0))
            }
            ConformalMap::JoukowskiEllipse(e) => {
                // Cut on the real segment between the zeros of ψ'.
                let (w1, w2) = ((1.0 + e.radius) / (1.0 - e.radius), (1.0 - e.radius) / (1.0 + e.radius));
                let dist = if w.re >= w1 && w.re <= w2 {
                    w.im.abs()
                } else {
                    (w - w1).norm().min((w - w2).norm())
                };
                if dist < BRANCH_TOL {
                    return Err(Error::BranchCutHit { point: w });
                }
                if is_pole(w, ONE) {
                    return Err(Error::PoleHit { point: w });
                }
                let zeta = e.radius * (w + 1.0) / (w - 1.0);
                let root = (1.0 - (zeta * zeta).inv()).sqrt();
                Ok(I * (e.scale * e.radius).sqrt() * root / (w - 1.0))
            }
        }
    }

    /// φ(s) without the domain check; defined wherever the composition is.
    pub fn reflect(&self, s: C64) -> Result<C64> {
        let u = self.psi_inv(s)?;
        self.psi(-u.conj())
    }

    /// Shift map φ : A → Ā^c.
    pub fn phi(&self, s: C64) -> Result<C64> {
        if self.classify(s, 0.0).region != Region::Interior {
            return Err(Error::OutsideDomain { point: s });
        }
        self.reflect(s)
    }

    /// Locates a point relative to A using the sign of Re ψ⁻¹(point).
    pub fn classify(&self, point: C64, tol: f64) -> DomainMembership {
        let w = match self.psi_inv(point) {
            Ok(w) if w.re.is_finite() && w.im.is_finite() => w,
            _ => return DomainMembership { region: Region::Boundary, preimage_re: None },
        };
        let region = if *self == ConformalMap::MobiusDisk && (w + 1.0).norm() <= tol {
            // The removed origin.
            Region::Boundary
        } else if w.re < -tol {
            Region::Interior
        } else if w.re > tol {
            Region::Exterior
        } else {
            Region::Boundary
        };
        DomainMembership { region, preimage_re: Some(w.re) }
    }

    pub fn contains(&self, point: C64) -> bool {
        self.classify(point, 0.0).region == Region::Interior
    }
}

impl std::str::FromStr for ConformalMap {
    type Err = Error;

    /// Parses the parameter-free kinds; the ellipse needs [`ConformalMap::joukowski`].
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(ConformalMap::Identity),
            "mobius-disk" => Ok(ConformalMap::MobiusDisk),
            "rotation-upper-half" => Ok(ConformalMap::RotationUpperHalf),
            "joukowski-ellipse" => Err(Error::config(None, "map", "joukowski-ellipse needs c, M and R")),
            other => Err(Error::config(None, "map", format!("unknown map kind '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn closed_form_shift_maps() {
        let id = ConformalMap::Identity.phi(c(-1.0, 1.0)).unwrap();
        assert!((id - c(1.0, 1.0)).norm() < 1e-15);
        let mb = ConformalMap::MobiusDisk.phi(c(0.0, 0.5)).unwrap();
        assert!((mb - c(0.0, 2.0)).norm() < 1e-14);
        let rot = ConformalMap::RotationUpperHalf.phi(c(1.0, 2.0)).unwrap();
        assert!((rot - c(1.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn mobius_origin_is_excluded() {
        assert_eq!(ConformalMap::MobiusDisk.classify(c(0.0, 0.0), 1e-12).region, Region::Boundary);
        assert!(ConformalMap::MobiusDisk.phi(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn rotation_branch_is_principal() {
        let q = ConformalMap::RotationUpperHalf.sqrt_dpsi(c(0.3, 0.1)).unwrap();
        assert!((q * q - c(0.0, -1.0)).norm() < 1e-15);
        assert!(q.re > 0.0);
    }

    #[test]
    fn joukowski_rejects_focal_segment() {
        let m = ConformalMap::joukowski(c(0.0, 0.0), c(1.0, 0.0), 2.0).unwrap();
        assert!(matches!(m.psi_inv(c(0.5, 0.0)), Err(Error::BranchCutHit { .. })));
        assert_eq!(m.classify(c(0.5, 0.0), 0.0).region, Region::Boundary);
        assert!(matches!(m.phi(c(0.5, 0.0)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn joukowski_rejects_bad_radius() {
        assert!(ConformalMap::joukowski(c(0.0, 0.0), c(1.0, 0.0), 1.0).is_err());
    }
}
