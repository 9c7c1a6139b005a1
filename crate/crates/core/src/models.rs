//! Benchmark systems.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conformal::ConformalMap;
use crate::lti::{PoleResidueForm, StateSpaceSystem};
use crate::{Error, Result, C64};

/// Grid nodes are i·h for i = 1..=n_grid with h = 1/(n_grid + 1).
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Schrodinger { n_grid: usize },
    Wave { n_grid: usize },
    /// Random poles inside the domain of `map` with unit residues.
    Synthetic { map: ConformalMap, n_poles: usize, seed: u64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<StateSpaceSystem> {
        match *self {
            ModelSpec::Schrodinger { n_grid } => schrodinger(n_grid),
            ModelSpec::Wave { n_grid } => wave(n_grid),
            ModelSpec::Synthetic { map, n_poles, seed } => synthetic(&map, n_poles, seed)?.to_state_space(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Schrodinger { .. } => "schrodinger",
            ModelSpec::Wave { .. } => "wave",
            ModelSpec::Synthetic { .. } => "synthetic",
        }
    }
}

/// 1-based node indices whose coordinate i·h lies in [lo, hi].
pub fn node_range(n_grid: usize, lo: f64, hi: f64) -> RangeInclusive<usize> {
    let h = 1.0 / (n_grid as f64 + 1.0);
    let first = ((lo / h - 1e-9).ceil() as usize).max(1);
    let last = ((hi / h + 1e-9).floor() as usize).min(n_grid);
    first..=last
}

/// Discretized Schrödinger equation i ∂ₜψ = -∂ₓ²ψ on (0, 1) with boundary
/// control at x = 1 and the spatial mean as output.
pub fn schrodinger(n_grid: usize) -> Result<StateSpaceSystem> {
    if n_grid < 3 {
        return Err(Error::InvalidGrid { n_grid, min: 3 });
    }
    let n = n_grid;
    let h = 1.0 / (n as f64 + 1.0);
    let k = C64::new(0.0, -1.0 / (h * h));
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        trip.push((i, i, -2.0 * k));
        if i > 0 {
            trip.push((i, i - 1, k));
            trip.push((i - 1, i, k));
        }
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = k;
    let c = DVector::from_element(n, C64::new(h, 0.0));
    StateSpaceSystem::from_triplets(n, trip, b, c)
}

/// Undamped wave equation in first-order form x = (q, ∂ₜq), actuated on
/// [0.6, 0.7] and observed through the mean displacement on [0.1, 0.4].
pub fn wave(n_grid: usize) -> Result<StateSpaceSystem> {
    const MIN: usize = 10;
    let input = node_range(n_grid, 0.6, 0.7);
    let output = node_range(n_grid, 0.1, 0.4);
    if n_grid < MIN || input.is_empty() || output.is_empty() {
        return Err(Error::InvalidGrid { n_grid, min: MIN });
    }
    let m = n_grid;
    let h = 1.0 / (m as f64 + 1.0);
    let k = 1.0 / (h * h);
    let mut trip = Vec::with_capacity(4 * m);
    for i in 0..m {
        trip.push((i, m + i, C64::new(1.0, 0.0)));
        trip.push((m + i, i, C64::new(-2.0 * k, 0.0)));
        if i > 0 {
            trip.push((m + i, i - 1, C64::new(k, 0.0)));
            trip.push((m + i - 1, i, C64::new(k, 0.0)));
        }
    }
    let mut b = DVector::zeros(2 * m);
    for node in input {
        b[m + node - 1] = C64::new(1.0, 0.0);
    }
    let mut c = DVector::zeros(2 * m);
    for node in output {
        c[node - 1] = C64::new(h, 0.0);
    }
    StateSpaceSystem::from_triplets(2 * m, trip, b, c)
}

/// Draws a point of the parameter region X. Half-plane maps use the box
/// [-2, -0.1] × [-2, 2]; the ellipse uses the ζ-annulus 1 + (R-1)[0.1, 0.9]
/// with an arbitrary angle.
pub fn sample_parameter<R: Rng + ?Sized>(map: &ConformalMap, rng: &mut R) -> C64 {
    match map {
        ConformalMap::JoukowskiEllipse(e) => {
            let rho = 1.0 + (e.radius - 1.0) * rng.random_range(0.1..0.9);
            let zeta = C64::from_polar(rho, rng.random_range(0.0..2.0 * PI));
            let m = zeta / e.radius;
            (m + 1.0) / (m - 1.0)
        }
        _ => C64::new(rng.random_range(-2.0..-0.1), rng.random_range(-2.0..2.0)),
    }
}

/// Σ 1/(s - λᵢ) with λᵢ = ψ(wᵢ) for wᵢ drawn by [`sample_parameter`].
pub fn synthetic(map: &ConformalMap, n_poles: usize, seed: u64) -> Result<PoleResidueForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (0..n_poles)
        .map(|_| Ok((map.psi(sample_parameter(map, &mut rng))?, C64::new(1.0, 0.0))))
        .collect::<Result<Vec<_>>>()?;
    PoleResidueForm::new(terms)
}
