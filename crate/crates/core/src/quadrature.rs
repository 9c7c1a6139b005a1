//! Globally adaptive 21-point Gauss-Kronrod quadrature for complex integrands.

#![allow(clippy::excessive_precision)] // published node tables, kept verbatim

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result, C64};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evaluations: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, max_evaluations: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: FnMut(f64) -> Result<C64>>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut resk = fc * WGK[10];
    let mut resg = C64::new(0.0, 0.0);
    let mut resabs = fc.norm() * WGK[10];
    let mut fv1 = [C64::new(0.0, 0.0); 10];
    let mut fv2 = [C64::new(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx)?, f(center + dx)?);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += (f1 + f2) * WGK[j];
        resabs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            resg += (f1 + f2) * WG[j / 2];
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[10] * (fc - reskh).norm();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).norm() + (fv2[j] - reskh).norm());
    }
    let (resk, resabs, resasc) = (resk * half, resabs * half.abs(), resasc * half.abs());
    let mut err = (resk - resg * half).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    if !resk.re.is_finite() || !resk.im.is_finite() {
        return Err(Error::QuadratureNoConvergence { evaluations: 0, estimate: f64::INFINITY });
    }
    Ok(Segment { a, b, value: resk, error: err })
}

/// Integrates `f` over [points[0], points[last]], starting from the given
/// breakpoints and bisecting the segment with the largest error estimate.
pub fn integrate<F>(mut f: F, points: &[f64], settings: &QuadratureSettings) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<C64>,
{
    assert!(points.len() >= 2, "need at least two breakpoints");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut value = C64::new(0.0, 0.0);
    let mut error = 0.0;
    // Segments too short to bisect further stay here.
    let mut frozen_value = C64::new(0.0, 0.0);
    let mut frozen_error = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let seg = gk21(&mut f, w[0], w[1])?;
            evaluations += 21;
            value += seg.value;
            error += seg.error;
            heap.push(seg);
        }
    }
    let mut since_resum = 0;
    loop {
        let target = settings.abs_tol.max(settings.rel_tol * value.norm());
        if error <= target {
            // Re-sum from scratch so drift in the running totals cannot fake convergence.
            let (v, e) = heap.iter().fold((frozen_value, frozen_error), |(v, e), s: &Segment| (v + s.value, e + s.error));
            value = v;
            error = e;
            if error <= settings.abs_tol.max(settings.rel_tol * value.norm()) {
                return Ok(QuadratureResult { value, error, evaluations });
            }
        }
        if evaluations + 42 > settings.max_evaluations {
            return Err(Error::QuadratureNoConvergence { evaluations, estimate: error });
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::QuadratureNoConvergence { evaluations, estimate: error });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-15 * worst.a.abs().max(worst.b.abs()) {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        let left = gk21(&mut f, worst.a, mid)?;
        let right = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        since_resum += 1;
        if since_resum >= 200 {
            since_resum = 0;
            let (v, e) = heap.iter().fold((frozen_value, frozen_error), |(v, e), s| (v + s.value, e + s.error));
            value = v;
            error = e;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| Ok(C64::new(x * x * x, x)), &[0.0, 2.0], &QuadratureSettings::default()).unwrap();
        assert!((r.value - C64::new(4.0, 2.0)).norm() < 1e-13);
        assert_eq!(r.evaluations, 21);
    }

    #[test]
    fn peaked_lorentzian() {
        let eps: f64 = 1e-4;
        let r = integrate(
            |x| Ok(C64::new(eps / (x * x + eps * eps), 0.0)),
            &[-1.0, 0.3, 1.0],
            &QuadratureSettings::default(),
        )
        .unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((r.value.re - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let s = QuadratureSettings { max_evaluations: 100, ..Default::default() };
        let r = integrate(|x| Ok(C64::new((1.0 / x.abs().max(1e-300)).sqrt(), 0.0)), &[-1.0, 1.0], &s);
        assert!(matches!(r, Err(Error::QuadratureNoConvergence { .. })));
    }
}
