//! Inner products and norms on the mapped Hardy space H₂(Ā^c).
//!
//! With the h-transform 𝔥_F(w) = F(ψ(w)) ψ'(w)^{1/2}, the inner product is
//! ⟨F, G⟩ = (1/2π) ∫ conj(𝔥_F(iω)) 𝔥_G(iω) dω. For G in pole-residue form it
//! collapses to a finite residue sum.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::conformal::ConformalMap;
use crate::lti::{PoleResidueForm, TransferFunction};
use crate::quadrature::{self, QuadratureSettings};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Residue,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProductReport {
    /// The inner product, or the norm for the norm functions.
    pub value: C64,
    pub method: Method,
    pub est_error: f64,
    pub evaluations: usize,
}

/// 𝔥_F(w) = F(ψ(w)) ψ'(w)^{1/2}
pub fn h_transform<F: TransferFunction + ?Sized>(f: &F, map: &ConformalMap, w: C64) -> Result<C64> {
    Ok(f.eval(map.psi(w)?)? * map.sqrt_dpsi(w)?)
}

/// 𝔥̄_F(-u) = conj(𝔥_F(-conj(u))), analytic in u.
pub fn h_transform_reflected<F: TransferFunction + ?Sized>(f: &F, map: &ConformalMap, u: C64) -> Result<C64> {
    Ok(h_transform(f, map, -u.conj())?.conj())
}

/// Location and residue of the pole of 𝔥_G induced by the term ν/(s - μ).
pub fn h_transform_pole(map: &ConformalMap, mu: C64, nu: C64) -> Result<(C64, C64)> {
    let u = map.psi_inv(mu)?;
    Ok((u, nu / map.sqrt_dpsi(u)?))
}

fn require_interior(map: &ConformalMap, points: &[C64]) -> Result<()> {
    match points.iter().find(|&&p| !map.contains(p)) {
        Some(&p) => Err(Error::OutsideDomain { point: p }),
        None => Ok(()),
    }
}

/// Poles γ of ψ'^{1/2} in the open left half-plane where ψ stays finite.
/// They contribute extra residues to the inner product.
fn correction_poles(map: &ConformalMap) -> Vec<(C64, C64)> {
    let psi_poles = map.psi_poles();
    map.sqrt_dpsi_poles()
        .into_iter()
        .filter(|g| g.point.re < 0.0 && !psi_poles.iter().any(|&p| (p - g.point).norm() < 1e-14))
        .map(|g| (g.point, g.residue))
        .collect()
}

/// ⟨F, G⟩ by residues at the left-half-plane poles of 𝔥_G.
pub fn inner_product_residue<F: TransferFunction + ?Sized>(
    f: &F,
    g: &PoleResidueForm,
    map: &ConformalMap,
) -> Result<InnerProductReport> {
    require_interior(map, &f.pole_hints())?;
    require_interior(map, g.poles())?;
    let mut value = C64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for (mu, nu) in g.terms() {
        let (u, res) = h_transform_pole(map, mu, nu)?;
        let term = h_transform_reflected(f, map, u)? * res;
        value += term;
        magnitude += term.norm();
    }
    for (gamma, res) in correction_poles(map) {
        let term = h_transform_reflected(f, map, gamma)? * g.eval(map.psi(gamma)?)? * res;
        value += term;
        magnitude += term.norm();
    }
    Ok(InnerProductReport {
        value,
        method: Method::Residue,
        est_error: 10.0 * f64::EPSILON * magnitude,
        evaluations: g.len(),
    })
}

pub fn norm_residue(f: &PoleResidueForm, map: &ConformalMap) -> Result<InnerProductReport> {
    let r = inner_product_residue(f, f, map)?;
    let sq = r.value.re.max(0.0);
    let norm = sq.sqrt();
    Ok(InnerProductReport {
        value: C64::new(norm, 0.0),
        est_error: if norm > 0.0 { r.est_error / (2.0 * norm) } else { r.est_error.sqrt() },
        ..r
    })
}

/// Breakpoints in θ (ω = tan θ) at the peaks of the integrand.
fn breakpoints(map: &ConformalMap, hints: &[C64]) -> Vec<f64> {
    let mut pts = vec![-FRAC_PI_2, 0.0, FRAC_PI_2];
    for &h in hints {
        if let Ok(u) = map.psi_inv(h) {
            if u.im.is_finite() {
                pts.push(u.im.atan());
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    pts
}

/// ⟨F, G⟩ by adaptive quadrature along the imaginary axis.
pub fn inner_product_quadrature<F, G>(
    f: &F,
    g: &G,
    map: &ConformalMap,
    settings: &QuadratureSettings,
) -> Result<InnerProductReport>
where
    F: TransferFunction + ?Sized,
    G: TransferFunction + ?Sized,
{
    let mut hints = f.pole_hints();
    hints.extend(g.pole_hints());
    let pts = breakpoints(map, &hints);
    let integrand = |theta: f64| -> Result<C64> {
        let (omega, sec2) = (theta.tan(), 1.0 + theta.tan().powi(2));
        let w = C64::new(0.0, omega);
        let s = map.psi(w)?;
        let weight = map.dpsi(w)?.norm() * sec2 / (2.0 * PI);
        Ok(f.eval(s)?.conj() * g.eval(s)? * weight)
    };
    let r = quadrature::integrate(integrand, &pts, settings)?;
    Ok(InnerProductReport { value: r.value, method: Method::Quadrature, est_error: r.error, evaluations: r.evaluations })
}

/// ‖F‖ by quadrature of |F(ψ(iω))|² |ψ'(iω)|.
pub fn norm_quadrature<F: TransferFunction + ?Sized>(
    f: &F,
    map: &ConformalMap,
    settings: &QuadratureSettings,
) -> Result<InnerProductReport> {
    let pts = breakpoints(map, &f.pole_hints());
    let integrand = |theta: f64| -> Result<C64> {
        let (omega, sec2) = (theta.tan(), 1.0 + theta.tan().powi(2));
        let w = C64::new(0.0, omega);
        let weight = map.dpsi(w)?.norm() * sec2 / (2.0 * PI);
        Ok(C64::new(f.eval(map.psi(w)?)?.norm_sqr() * weight, 0.0))
    };
    let r = quadrature::integrate(integrand, &pts, settings)?;
    let sq = r.value.re.max(0.0);
    let norm = sq.sqrt();
    Ok(InnerProductReport {
        value: C64::new(norm, 0.0),
        method: Method::Quadrature,
        est_error: if norm > 0.0 { r.error / (2.0 * norm) } else { r.error.sqrt() },
        evaluations: r.evaluations,
    })
}

/// 𝔉_F(μ) = ⟨F, 1/(· - μ)⟩, the function whose values and derivatives at the
/// reduced poles must match for optimality.
pub fn frak_f_eval<F: TransferFunction + ?Sized>(f: &F, map: &ConformalMap, mu: C64) -> Result<C64> {
    require_interior(map, &[mu])?;
    let u = map.psi_inv(mu)?;
    let mut v = h_transform_reflected(f, map, u)? / map.sqrt_dpsi(u)?;
    for (gamma, res) in correction_poles(map) {
        v += h_transform_reflected(f, map, gamma)? * res / (map.psi(gamma)? - mu);
    }
    Ok(v)
}

/// d/dμ 𝔉_F(μ) = ⟨F, 1/(· - μ)²⟩.
pub fn frak_f_deriv<F: TransferFunction + ?Sized>(f: &F, map: &ConformalMap, mu: C64) -> Result<C64> {
    require_interior(map, &[mu])?;
    let u = map.psi_inv(mu)?;
    let q = map.sqrt_dpsi(u)?;
    let dq = map.d2psi(u)? / (2.0 * q);
    // 𝔥̄_F(-u) and its u-derivative via x = -conj(u).
    let x = -u.conj();
    let (fx, dfx) = f.eval_with_deriv(map.psi(x)?)?;
    let (qx, dpx) = (map.sqrt_dpsi(x)?, map.dpsi(x)?);
    let dqx = map.d2psi(x)? / (2.0 * qx);
    let hbar = (fx * qx).conj();
    let dhbar = -(dfx * dpx * qx + fx * dqx).conj();
    let dt_du = dhbar / q - hbar * dq / (q * q);
    let mut v = dt_du / map.dpsi(u)?;
    for (gamma, res) in correction_poles(map) {
        let d = map.psi(gamma)? - mu;
        v += h_transform_reflected(f, map, gamma)? * res / (d * d);
    }
    Ok(v)
}
