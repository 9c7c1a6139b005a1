//! Time-domain simulation with the Bogacki-Shampine 3(2) pair.

use std::io::Write;
use std::path::Path;

use crate::lti::StateSpaceSystem;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    /// u = amplitude·δ, realized as x(0⁺) = amplitude·b.
    Impulse { amplitude: f64 },
    /// u(t) = amplitude·exp(-(t - t0)² / (2 width²)).
    Gaussian { t0: f64, width: f64, amplitude: f64 },
    /// Piecewise linear through the samples, zero outside them.
    Samples { times: Vec<f64>, values: Vec<f64> },
}

impl InputSignal {
    /// Pulse centered at T/4 with width T/40.
    pub fn gaussian_default(t_final: f64) -> Self {
        InputSignal::Gaussian { t0: t_final / 4.0, width: t_final / 40.0, amplitude: 1.0 }
    }

    pub fn samples(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let s = InputSignal::Samples { times, values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputSignal::Impulse { amplitude } if amplitude.is_finite() => Ok(()),
            InputSignal::Gaussian { t0, width, amplitude }
                if *width > 0.0 && t0.is_finite() && amplitude.is_finite() && width.is_finite() =>
            {
                Ok(())
            }
            InputSignal::Samples { times, values }
                if times.len() == values.len()
                    && !times.is_empty()
                    && times.windows(2).all(|w| w[1] > w[0])
                    && times.iter().chain(values).all(|v| v.is_finite()) =>
            {
                Ok(())
            }
            other => Err(Error::config(None, "input", format!("invalid input signal {other:?}"))),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            InputSignal::Impulse { .. } => 0.0,
            InputSignal::Gaussian { t0, width, amplitude } => amplitude * (-(t - t0).powi(2) / (2.0 * width * width)).exp(),
            InputSignal::Samples { times, values } => {
                if t < times[0] || t > times[times.len() - 1] {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= t);
                if k == times.len() {
                    return values[k - 1];
                }
                let (t0, t1) = (times[k - 1], times[k]);
                values[k - 1] + (values[k] - values[k - 1]) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            InputSignal::Impulse { amplitude } => InputSignal::Impulse { amplitude: alpha * amplitude },
            InputSignal::Gaussian { t0, width, amplitude } => {
                InputSignal::Gaussian { t0: *t0, width: *width, amplitude: alpha * amplitude }
            }
            InputSignal::Samples { times, values } => {
                InputSignal::Samples { times: times.clone(), values: values.iter().map(|v| alpha * v).collect() }
            }
        }
    }

    /// Longest step that cannot jump over a feature of the input.
    fn max_step(&self) -> f64 {
        match self {
            InputSignal::Impulse { .. } => f64::INFINITY,
            InputSignal::Gaussian { width, .. } => 0.5 * width,
            InputSignal::Samples { times, .. } => {
                times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub t_final: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Size of the uniform reporting grid, endpoints included.
    pub report_points: usize,
}

impl SimOptions {
    pub fn new(t_final: f64) -> Self {
        Self { t_final, rtol: 1e-8, atol: 1e-12, report_points: 1001 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputError {
    pub rel_l2: f64,
    pub max_abs: f64,
}

pub fn simulate(sys: &StateSpaceSystem, input: &InputSignal, opts: &SimOptions) -> Result<Trajectory> {
    simulate_observed(sys, input, opts, |_, _| {})
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Like [`simulate`], also passing the state at every reporting time to `observe`.
pub fn simulate_observed(
    sys: &StateSpaceSystem,
    input: &InputSignal,
    opts: &SimOptions,
    mut observe: impl FnMut(f64, &[C64]),
) -> Result<Trajectory> {
    input.validate()?;
    let t_final = opts.t_final;
    if !(t_final > 0.0) || !t_final.is_finite() || opts.report_points < 2 || !(opts.rtol > 0.0) || !(opts.atol >= 0.0) {
        return Err(Error::config(None, "simulation", "need T > 0, rtol > 0, atol >= 0 and at least two report points"));
    }
    let n = sys.dim();
    let b: Vec<C64> = sys.b().iter().copied().collect();
    let c: Vec<C64> = sys.c().iter().copied().collect();
    let output = |x: &[C64]| -> C64 { c.iter().zip(x).map(|(ci, xi)| ci.conj() * xi).sum() };
    let rhs = |t: f64, x: &[C64], out: &mut [C64]| {
        sys.apply_a(x, out);
        let u = input.value(t);
        if u != 0.0 {
            axpy(out, C64::new(u, 0.0), &b);
        }
    };

    let mut x = vec![C64::new(0.0, 0.0); n];
    if let InputSignal::Impulse { amplitude } = input {
        for (xi, bi) in x.iter_mut().zip(&b) {
            *xi = bi * *amplitude;
        }
    }
    let report: Vec<f64> =
        (0..opts.report_points).map(|k| t_final * k as f64 / (opts.report_points - 1) as f64).collect();
    let mut outputs = Vec::with_capacity(report.len());
    outputs.push(output(&x));
    observe(0.0, &x);
    let mut next_report = 1;

    // sqrt(norm_sqr) instead of hypot: this loop dominates the run time.
    let abs = |z: C64| z.norm_sqr().sqrt();
    let scale = |x: &[C64], y: &[C64], i: usize| opts.atol + opts.rtol * abs(x[i]).max(abs(y[i]));
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    let (mut k2, mut k3, mut k4) = (k1.clone(), k1.clone(), k1.clone());
    let (mut tmp, mut x_new, mut dense) = (k1.clone(), k1.clone(), k1.clone());
    rhs(0.0, &x, &mut k1);

    let h_max = input.max_step().min(t_final);
    let mut h = {
        let d0 = (0..n).map(|i| x[i].norm() / scale(&x, &x, i)).fold(0.0, f64::max);
        let d1 = (0..n).map(|i| k1[i].norm() / scale(&x, &x, i)).fold(0.0, f64::max);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * t_final } else { 0.01 * d0 / d1 };
        h0.min(h_max)
    };
    let mut t = 0.0;
    while next_report < report.len() {
        if h < 1e-14 * t_final {
            return Err(Error::StepSizeUnderflow { t, step: h });
        }
        let h_step = h.min(t_final - t);
        let hc = C64::new(h_step, 0.0);
        tmp.copy_from_slice(&x);
        axpy(&mut tmp, hc * 0.5, &k1);
        rhs(t + 0.5 * h_step, &tmp, &mut k2);
        tmp.copy_from_slice(&x);
        axpy(&mut tmp, hc * 0.75, &k2);
        rhs(t + 0.75 * h_step, &tmp, &mut k3);
        x_new.copy_from_slice(&x);
        axpy(&mut x_new, hc * (2.0 / 9.0), &k1);
        axpy(&mut x_new, hc * (1.0 / 3.0), &k2);
        axpy(&mut x_new, hc * (4.0 / 9.0), &k3);
        let t_new = if h_step == t_final - t { t_final } else { t + h_step };
        rhs(t_new, &x_new, &mut k4);
        let mut err = 0.0f64;
        for i in 0..n {
            let e = hc * (k1[i] * (-5.0 / 72.0) + k2[i] * (1.0 / 12.0) + k3[i] * (1.0 / 9.0) + k4[i] * (-1.0 / 8.0));
            err = err.max(abs(e) / scale(&x, &x_new, i));
        }
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
        if err > 1.0 {
            h = h_step * factor;
            continue;
        }
        // Cubic Hermite interpolation onto the reporting grid.
        while next_report < report.len() && report[next_report] <= t_new {
            let tr = report[next_report];
            let th = (tr - t) / h_step;
            let (h00, h10) = ((1.0 + 2.0 * th) * (1.0 - th).powi(2), th * (1.0 - th).powi(2));
            let (h01, h11) = (th * th * (3.0 - 2.0 * th), th * th * (th - 1.0));
            for i in 0..n {
                dense[i] = x[i] * h00 + k1[i] * (h10 * h_step) + x_new[i] * h01 + k4[i] * (h11 * h_step);
            }
            outputs.push(output(&dense));
            observe(tr, &dense);
            next_report += 1;
        }
        t = t_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut k1, &mut k4);
        h = (h_step * factor).min(h_max);
    }
    Ok(Trajectory { times: report, outputs })
}

fn interpolate(traj: &Trajectory, t: f64) -> C64 {
    let k = traj.times.partition_point(|&x| x < t);
    if k == 0 {
        return traj.outputs[0];
    }
    if k == traj.times.len() {
        return traj.outputs[k - 1];
    }
    let (t0, t1) = (traj.times[k - 1], traj.times[k]);
    let a = (t - t0) / (t1 - t0);
    traj.outputs[k - 1] * (1.0 - a) + traj.outputs[k] * a
}

fn check_trajectory(traj: &Trajectory) -> Result<()> {
    if traj.times.len() < 2 || traj.times.len() != traj.outputs.len() || !traj.times.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::EmptyTrajectory);
    }
    Ok(())
}

/// Relative L² error (trapezoid rule) and max abs error on the union of both
/// time grids, restricted to their common interval.
pub fn output_error(y_ref: &Trajectory, y_test: &Trajectory) -> Result<OutputError> {
    check_trajectory(y_ref)?;
    check_trajectory(y_test)?;
    let lo = y_ref.times[0].max(y_test.times[0]);
    let hi = y_ref.times[y_ref.times.len() - 1].min(y_test.times[y_test.times.len() - 1]);
    if !(hi > lo) {
        return Err(Error::EmptyTrajectory);
    }
    let mut grid: Vec<f64> =
        y_ref.times.iter().chain(&y_test.times).copied().filter(|&t| t >= lo && t <= hi).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let (mut num, mut den, mut max_abs) = (0.0, 0.0, 0.0f64);
    let mut prev: Option<(f64, f64, f64)> = None;
    for &t in &grid {
        let (a, b) = (interpolate(y_ref, t), interpolate(y_test, t));
        let (d2, r2) = ((a - b).norm_sqr(), a.norm_sqr());
        max_abs = max_abs.max((a - b).norm());
        if let Some((tp, dp, rp)) = prev {
            num += 0.5 * (t - tp) * (d2 + dp);
            den += 0.5 * (t - tp) * (r2 + rp);
        }
        prev = Some((t, d2, r2));
    }
    let rel_l2 = if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(OutputError { rel_l2, max_abs })
}

/// Writes `t,re_y,im_y` rows.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "re_y", "im_y"])?;
    for (t, y) in traj.times.iter().zip(&traj.outputs) {
        w.write_record([t.to_string(), y.re.to_string(), y.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_file(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory(traj, std::fs::File::create(path)?)
}
