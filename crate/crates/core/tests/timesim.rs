use h2conformal::irka::{self, modal_truncation};
use h2conformal::timesim::{self, output_error, simulate, simulate_observed, InputSignal, SimOptions, Trajectory};
use h2conformal::experiment::{init_shifts, RunConfig, ShiftInit};
use h2conformal::{models, ConformalMap, Error, IrkaOptions, StateSpaceSystem, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn scalar(a: C64) -> StateSpaceSystem {
    let one = DVector::from_element(1, c(1.0, 0.0));
    StateSpaceSystem::from_dense(&DMatrix::from_element(1, 1, a), one.clone(), one).unwrap()
}

fn impulse() -> InputSignal {
    InputSignal::Impulse { amplitude: 1.0 }
}

fn exp_error(rtol: f64) -> f64 {
    let opts = SimOptions { rtol, atol: rtol * 1e-4, ..SimOptions::new(1.0) };
    let y = simulate(&scalar(c(-1.0, 0.0)), &impulse(), &opts).unwrap();
    y.times.iter().zip(&y.outputs).map(|(t, v)| (v - c((-t).exp(), 0.0)).norm()).fold(0.0, f64::max)
}

#[test]
fn scalar_exponential() {
    assert!(exp_error(1e-8) <= 1e-6);
}

#[test]
fn tighter_tolerances_reveal_third_order() {
    // Local error per step ~ h^3 is held at rtol, so h ~ rtol^(1/3) and a
    // global error slope s against rtol means an observed order of 3s.
    let tols = [1e-4, 1e-5, 1e-6, 1e-7];
    let errs: Vec<f64> = tols.iter().map(|&t| exp_error(t)).collect();
    for w in errs.windows(2) {
        assert!(w[0] > w[1], "{errs:?}");
    }
    let slope = (errs[0] / errs[3]).log10() / (tols[0] / tols[3]).log10();
    assert!(3.0 * slope >= 2.0, "observed order {}, errors {errs:?}", 3.0 * slope);
}

#[test]
fn marginal_oscillator_keeps_unit_modulus() {
    let y = simulate(&scalar(c(0.0, 1.0)), &impulse(), &SimOptions::new(10.0)).unwrap();
    for v in &y.outputs {
        assert!((v.norm() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn reporting_grid_is_uniform() {
    let y = simulate(&scalar(c(-1.0, 0.0)), &impulse(), &SimOptions { report_points: 11, ..SimOptions::new(2.0) }).unwrap();
    assert_eq!(y.times.len(), 11);
    assert_eq!(y.times[0], 0.0);
    assert_eq!(y.times[10], 2.0);
    assert!((y.times[3] - 0.6).abs() < 1e-15);
}

#[test]
fn skew_systems_do_not_gain_energy() {
    let sys = models::schrodinger(20).unwrap();
    let mut norms = Vec::new();
    simulate_observed(&sys, &impulse(), &SimOptions::new(0.2), |_, x| {
        norms.push(x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt());
    })
    .unwrap();
    for w in norms.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}

#[test]
fn gaussian_defaults() {
    match InputSignal::gaussian_default(4.0) {
        InputSignal::Gaussian { t0, width, amplitude } => {
            assert_eq!((t0, width, amplitude), (1.0, 0.1, 1.0));
        }
        other => panic!("unexpected {other:?}"),
    }
    let g = InputSignal::gaussian_default(4.0);
    assert!((g.value(1.0) - 1.0).abs() < 1e-15);
    assert!((g.value(1.1) - (-0.5f64).exp()).abs() < 1e-15);
    assert_eq!(g.scaled(3.0).value(1.0), 3.0);
}

#[test]
fn sampled_inputs_interpolate_and_validate() {
    let s = InputSignal::samples(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
    assert!((s.value(0.5) - 1.0).abs() < 1e-15);
    assert!((s.value(1.5) - 1.0).abs() < 1e-15);
    assert!(InputSignal::samples(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    assert!(InputSignal::samples(vec![0.0, 1.0], vec![1.0]).is_err());
    let bad = InputSignal::Gaussian { t0: 0.0, width: 0.0, amplitude: 1.0 };
    assert!(bad.validate().is_err());
}

#[test]
fn invalid_options_are_rejected() {
    let sys = scalar(c(-1.0, 0.0));
    assert!(simulate(&sys, &impulse(), &SimOptions::new(0.0)).is_err());
    assert!(simulate(&sys, &impulse(), &SimOptions { report_points: 1, ..SimOptions::new(1.0) }).is_err());
}

#[test]
fn step_size_underflow_is_reported() {
    // Explicit stability caps the step near 1e-18, far below the floor.
    let sys = scalar(c(-1e18, 0.0));
    let opts = SimOptions { rtol: 1e-14, atol: 0.0, ..SimOptions::new(1.0) };
    assert!(matches!(simulate(&sys, &impulse(), &opts), Err(Error::StepSizeUnderflow { .. })));
}

fn traj(times: Vec<f64>, outputs: Vec<C64>) -> Trajectory {
    Trajectory { times, outputs }
}

#[test]
fn output_error_examples() {
    let y = traj(vec![0.0, 0.5, 1.0], vec![c(1.0, 0.0), c(2.0, 1.0), c(0.5, 0.0)]);
    let e = output_error(&y, &y).unwrap();
    assert_eq!((e.rel_l2, e.max_abs), (0.0, 0.0));
    let doubled = traj(y.times.clone(), y.outputs.iter().map(|v| v * 2.0).collect());
    let e = output_error(&y, &doubled).unwrap();
    assert!((e.rel_l2 - 1.0).abs() < 1e-15);
    assert!(matches!(output_error(&traj(vec![], vec![]), &y), Err(Error::EmptyTrajectory)));
}

#[test]
fn trajectories_serialize_as_csv() {
    let y = traj(vec![0.0, 0.5], vec![c(1.0, -2.0), c(0.25, 0.0)]);
    let mut buf = Vec::new();
    timesim::write_trajectory(&y, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "t,re_y,im_y\n0,1,-2\n0.5,0.25,0\n");
}

#[test]
fn schrodinger_rom_tracks_the_full_model() {
    let fom = models::schrodinger(200).unwrap();
    let map = ConformalMap::RotationUpperHalf;
    let sigma0 = init_shifts(&ShiftInit::MirroredNormal, 16, 1, &map).unwrap();
    let opts = IrkaOptions { on_escape: irka::EscapePolicy::Reflect, ..IrkaOptions::default() };
    let res = irka::irka_com(&fom, &map, &sigma0, &opts).unwrap();
    let input = InputSignal::gaussian_default(1.0);
    let y = simulate(&fom, &input, &SimOptions::new(1.0)).unwrap();
    let y_hat = simulate(&res.rom, &input, &SimOptions::new(1.0)).unwrap();
    let e = output_error(&y, &y_hat).unwrap();
    assert!(e.rel_l2 <= 1e-2, "rel L2 {}", e.rel_l2);
}

#[test]
fn modal_truncation_is_worse_than_the_optimal_rom_on_the_wave() {
    // Preset map, recipe and order on a coarser grid.
    let fom = models::wave(100).unwrap();
    let preset = RunConfig::wave_preset(false);
    let map = preset.map;
    let r = preset.orders[0];
    let sigma0 = init_shifts(&preset.shift_init, r, 1, &map).unwrap();
    let opts = IrkaOptions { on_escape: irka::EscapePolicy::Reflect, ..IrkaOptions::default() };
    let rom = irka::irka_com(&fom, &map, &sigma0, &opts).unwrap().rom;
    let modal = modal_truncation(&fom.to_pole_residue().unwrap(), r, &map).unwrap().to_state_space().unwrap();
    let opts = SimOptions::new(4.0);
    let y = simulate(&fom, &impulse(), &opts).unwrap();
    let e_opt = output_error(&y, &simulate(&rom, &impulse(), &opts).unwrap()).unwrap();
    let e_modal = output_error(&y, &simulate(&modal, &impulse(), &opts).unwrap()).unwrap();
    assert!(e_modal.rel_l2 > e_opt.rel_l2, "modal {} vs optimal {}", e_modal.rel_l2, e_opt.rel_l2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outputs_scale_linearly_with_the_input(alpha in 0.1..10.0f64, seed in 0u64..1000) {
        let f = models::synthetic(&ConformalMap::Identity, 4, seed).unwrap().to_state_space().unwrap();
        let u = InputSignal::Gaussian { t0: 0.5, width: 0.1, amplitude: 1.0 };
        let opts = SimOptions::new(2.0);
        let y = simulate(&f, &u, &opts).unwrap();
        let ya = simulate(&f, &u.scaled(alpha), &opts).unwrap();
        let scale = y.outputs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in y.outputs.iter().zip(&ya.outputs) {
            prop_assert!((a * alpha - b).norm() <= 1e-6 * alpha * scale);
        }
    }
}
