//! Iterative rational Krylov reduction with conformally mapped shifts.
//!
//! Each sweep interpolates at the current shifts by Petrov-Galerkin projection
//! and replaces the shifts with φ(λ̂), the reflections of the reduced poles.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::conformal::ConformalMap;
use crate::h2norm;
use crate::linalg;
use crate::lti::{PoleResidueForm, StateSpaceSystem, TransferFunction};
use crate::{Error, Result, C64};

/// Shifts closer than this (relative) are treated as colliding.
pub const SHIFT_SEP_RTOL: f64 = 1e-10;
/// Relative nudge applied to a colliding shift.
pub const COLLISION_NUDGE: f64 = 1e-8;
/// Distances equal up to this are ties in shift matching.
pub const MATCH_TIE_TOL: f64 = 1e-12;
/// Largest acceptable condition number of W*V.
pub const PROJECTION_COND_LIMIT: f64 = 1e-3 / f64::EPSILON;

/// An ordered list of distinct interpolation points.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSet(Vec<C64>);

impl ShiftSet {
    pub fn new(values: Vec<C64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidShifts("empty shift set".into()));
        }
        if let Some(z) = values.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidShifts(format!("non-finite shift {z}")));
        }
        for i in 0..values.len() {
            for j in 0..i {
                if (values[i] - values[j]).norm() < SHIFT_SEP_RTOL * (1.0 + values[i].norm()) {
                    return Err(Error::InvalidShifts(format!("shifts {} and {} coincide", values[j], values[i])));
                }
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[C64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// What to do when a reduced pole leaves the pole domain mid-iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EscapePolicy {
    /// Stop with `PoleEscapedDomain`.
    #[default]
    Abort,
    /// Keep iterating with the algebraic extension ψ(-conj(ψ⁻¹(λ̂))) of φ,
    /// which places the next shift inside the domain. A final ROM with
    /// escaped poles is still reported as an error.
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrkaOptions {
    pub tol: f64,
    pub maxit: usize,
    pub on_escape: EscapePolicy,
}

impl Default for IrkaOptions {
    fn default() -> Self {
        Self { tol: 1e-6, maxit: 100, on_escape: EscapePolicy::Abort }
    }
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub rom: StateSpaceSystem,
    pub rom_poles: Vec<C64>,
    /// Initial shifts followed by the shifts after every iteration.
    pub shift_history: Vec<ShiftSet>,
    /// Relative shift change of every iteration.
    pub changes: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Collision nudges and similar events.
    pub notes: Vec<String>,
}

impl ReductionResult {
    pub fn final_shifts(&self) -> &ShiftSet {
        self.shift_history.last().expect("history is never empty")
    }
}

/// Snapshot handed to observers after every projection.
pub struct IterationState<'a> {
    /// 1-based projection count; the final rebuild gets `iterations + 1`.
    pub projection: usize,
    pub shifts: &'a [C64],
    pub rom: &'a StateSpaceSystem,
    pub rom_poles: &'a [C64],
}

#[derive(Debug, Clone)]
pub struct Bases {
    pub v: DMatrix<C64>,
    pub w: DMatrix<C64>,
}

/// Orthonormal bases of span{(σI - A)⁻¹b} and span{(σ̄I - A*)⁻¹c}; fails
/// with `RankDeficient` when either set of Krylov vectors is numerically dependent.
pub fn build_bases(sys: &StateSpaceSystem, shifts: &[C64]) -> Result<Bases> {
    krylov_bases(sys, shifts, true)
}

// Clustered starting shifts routinely give numerically dependent Krylov
// vectors, yet the projection still interpolates at every shift. The
// iteration therefore skips the rank check and relies on the W*V condition guard.
fn krylov_bases(sys: &StateSpaceSystem, shifts: &[C64], check_rank: bool) -> Result<Bases> {
    let (n, r) = (sys.dim(), shifts.len());
    if r == 0 || r > n {
        return Err(Error::DimensionMismatch(format!("reduced order {r} for a system of order {n}")));
    }
    let cols: Vec<(DVector<C64>, DVector<C64>)> = shifts
        .par_iter()
        .map(|&s| {
            let v = sys.factor_shifted(s)?.solve(sys.b());
            let w = sys.factor_shifted_adjoint(s.conj())?.solve(sys.c());
            Ok((v, w))
        })
        .collect::<Result<_>>()?;
    let v = DMatrix::from_columns(&cols.iter().map(|c| c.0.clone()).collect::<Vec<_>>());
    let w = DMatrix::from_columns(&cols.iter().map(|c| c.1.clone()).collect::<Vec<_>>());
    Ok(Bases { v: linalg::orthonormalize(v, check_rank)?, w: linalg::orthonormalize(w, check_rank)? })
}

/// Â = (W*V)⁻¹W*AV, b̂ = (W*V)⁻¹W*b, ĉ = V*c.
pub fn project(sys: &StateSpaceSystem, bases: &Bases) -> Result<StateSpaceSystem> {
    let (v, w) = (&bases.v, &bases.w);
    let wh = w.adjoint();
    let wv = &wh * v;
    let condition = linalg::condition_number(&wv);
    if !(condition <= PROJECTION_COND_LIMIT) {
        return Err(Error::IllConditionedProjection { condition });
    }
    let mut av = DMatrix::zeros(v.nrows(), v.ncols());
    for (j, col) in v.column_iter().enumerate() {
        let x: Vec<C64> = col.iter().copied().collect();
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        sys.apply_a(&x, &mut y);
        av.set_column(j, &DVector::from_vec(y));
    }
    let lu = wv.lu();
    let singular = || Error::IllConditionedProjection { condition: f64::INFINITY };
    let a_hat = lu.solve(&(&wh * av)).ok_or_else(singular)?;
    let b_hat = lu.solve(&(&wh * sys.b())).ok_or_else(singular)?;
    let c_hat = v.adjoint() * sys.c();
    StateSpaceSystem::from_dense(&a_hat, b_hat, c_hat)
}

/// Reorders `next` so entry i is the nearest unused point to `prev[i]`.
/// Near-ties go to the lexicographically smallest candidate.
pub fn match_shifts(prev: &[C64], next: &[C64]) -> Vec<C64> {
    let mut used = vec![false; next.len()];
    let mut out = Vec::with_capacity(prev.len());
    for &p in prev {
        let dmin = next
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(&q, _)| (q - p).norm())
            .fold(f64::INFINITY, f64::min);
        let cutoff = dmin + MATCH_TIE_TOL * (1.0 + dmin);
        let pick = (0..next.len())
            .filter(|&j| !used[j] && (next[j] - p).norm() <= cutoff)
            .min_by(|&a, &b| next[a].re.total_cmp(&next[b].re).then(next[a].im.total_cmp(&next[b].im)))
            .expect("as many candidates as targets");
        used[pick] = true;
        out.push(next[pick]);
    }
    out
}

fn separate_collisions(shifts: &mut [C64], notes: &mut Vec<String>, iteration: usize) {
    for j in 1..shifts.len() {
        for i in 0..j {
            if (shifts[i] - shifts[j]).norm() < SHIFT_SEP_RTOL * (1.0 + shifts[i].norm()) {
                let old = shifts[j];
                shifts[j] += COLLISION_NUDGE * (1.0 + old.norm());
                notes.push(format!("iteration {iteration}: shift {old} collided with shift {i}, moved to {}", shifts[j]));
            }
        }
    }
}

fn relative_change(prev: &[C64], next: &[C64]) -> f64 {
    let num: f64 = prev.iter().zip(next).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = prev.iter().map(|a| a.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn irka_com(
    sys: &StateSpaceSystem,
    map: &ConformalMap,
    sigma0: &ShiftSet,
    opts: &IrkaOptions,
) -> Result<ReductionResult> {
    irka_com_observed(sys, map, sigma0, opts, |_| {})
}

/// [`irka_com`] with a callback after every projection.
pub fn irka_com_observed(
    sys: &StateSpaceSystem,
    map: &ConformalMap,
    sigma0: &ShiftSet,
    opts: &IrkaOptions,
    mut observe: impl FnMut(&IterationState<'_>),
) -> Result<ReductionResult> {
    if let Some(&s) = sigma0.values().iter().find(|&&s| map.contains(s)) {
        return Err(Error::InvalidShifts(format!("shift {s} lies inside the pole domain")));
    }
    let step = |k: usize, shifts: &[C64]| -> Result<(StateSpaceSystem, Vec<C64>)> {
        let bases = krylov_bases(sys, shifts, false).map_err(|e| e.at_iteration(k))?;
        let rom = project(sys, &bases).map_err(|e| e.at_iteration(k))?;
        let poles = rom.poles().map_err(|e| e.at_iteration(k))?;
        Ok((rom, poles))
    };

    let mut shifts = sigma0.values().to_vec();
    let mut history = vec![sigma0.clone()];
    let mut changes = Vec::new();
    let mut notes = Vec::new();
    let mut converged = false;
    for k in 1..=opts.maxit {
        let (rom, poles) = step(k, &shifts)?;
        observe(&IterationState { projection: k, shifts: &shifts, rom: &rom, rom_poles: &poles });
        if let Some(&pole) = poles.iter().find(|&&p| !map.contains(p)) {
            if opts.on_escape == EscapePolicy::Abort {
                return Err(Error::PoleEscapedDomain { iteration: k, pole });
            }
            notes.push(format!("iteration {k}: reduced pole {pole} outside the domain, reflected"));
        }
        let reflected = poles
            .iter()
            .map(|&p| if map.contains(p) { map.phi(p) } else { map.reflect(p) })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_iteration(k))?;
        let mut next = match_shifts(&shifts, &reflected);
        separate_collisions(&mut next, &mut notes, k);
        let change = relative_change(&shifts, &next);
        shifts = next;
        history.push(ShiftSet(shifts.clone()));
        changes.push(change);
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    let iterations = changes.len();
    let (rom, rom_poles) = step(iterations + 1, &shifts)?;
    observe(&IterationState { projection: iterations + 1, shifts: &shifts, rom: &rom, rom_poles: &rom_poles });
    if let Some(&pole) = rom_poles.iter().find(|&&p| !map.contains(p)) {
        return Err(Error::PoleEscapedDomain { iteration: iterations + 1, pole });
    }
    Ok(ReductionResult { rom, rom_poles, shift_history: history, changes, converged, iterations, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimalityMode {
    /// Hermite interpolation of H at φ(λ̂).
    Simplified,
    /// Hermite interpolation of 𝔉_H at λ̂.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleResidual {
    pub pole: C64,
    /// Where the residual is measured.
    pub point: C64,
    pub value_abs: f64,
    pub value_rel: f64,
    pub deriv_abs: f64,
    pub deriv_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub mode: OptimalityMode,
    pub residuals: Vec<PoleResidual>,
}

impl OptimalityReport {
    pub fn max_value_rel(&self) -> f64 {
        self.residuals.iter().map(|r| r.value_rel).fold(0.0, f64::max)
    }
    pub fn max_deriv_rel(&self) -> f64 {
        self.residuals.iter().map(|r| r.deriv_rel).fold(0.0, f64::max)
    }
}

fn rel(err: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        err / reference
    } else {
        err
    }
}

/// Measures the first-order optimality conditions at every reduced pole.
pub fn verify_optimality<F: TransferFunction + ?Sized>(
    fom: &F,
    rom: &StateSpaceSystem,
    map: &ConformalMap,
    mode: OptimalityMode,
) -> Result<OptimalityReport> {
    if mode == OptimalityMode::Simplified && !map.is_simplified_regime() {
        return Err(Error::WrongRegime(format!("{map} does not share the poles of ψ and ψ'^(1/2)")));
    }
    let poles = rom.poles()?;
    let mut residuals = Vec::with_capacity(poles.len());
    for &pole in &poles {
        let (point, (h, dh), (hr, dhr)) = match mode {
            OptimalityMode::Simplified => {
                let p = map.phi(pole)?;
                (p, fom.eval_with_deriv(p)?, rom.eval_tf_with_deriv(p)?)
            }
            OptimalityMode::General => {
                let full = (h2norm::frak_f_eval(fom, map, pole)?, h2norm::frak_f_deriv(fom, map, pole)?);
                let red = (h2norm::frak_f_eval(rom, map, pole)?, h2norm::frak_f_deriv(rom, map, pole)?);
                (pole, full, red)
            }
        };
        let (ve, de) = ((h - hr).norm(), (dh - dhr).norm());
        residuals.push(PoleResidual {
            pole,
            point,
            value_abs: ve,
            value_rel: rel(ve, h.norm()),
            deriv_abs: de,
            deriv_rel: rel(de, dh.norm()),
        });
    }
    Ok(OptimalityReport { mode, residuals })
}

/// Keeps the r terms with the largest |φᵢ| ‖1/(· - λᵢ)‖.
pub fn modal_truncation(full: &PoleResidueForm, r: usize, map: &ConformalMap) -> Result<PoleResidueForm> {
    let mut scored = full
        .terms()
        .map(|(p, res)| {
            let single = PoleResidueForm::new(vec![(p, C64::new(1.0, 0.0))])?;
            Ok((res.norm() * h2norm::norm_residue(&single, map)?.value.re, p, res))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    PoleResidueForm::new(scored.into_iter().take(r).map(|(_, p, res)| (p, res)).collect())
}
