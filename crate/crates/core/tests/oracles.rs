//! Independent references for the propagator, the steady-state search and
//! the optimizer.

use nalgebra::DVector;
use rayon::prelude::*;
use singlet_core::{
    build_liouvillian, compile, figure3_preset, integrate, liouvillian_steady_state, optimize_with, populations,
    steady_state, BellState, ComplexMatrix, InitialState, IntegrateOptions, OptimizeOptions, ParamName, SteadyOptions,
    SystemParams, C64,
};

fn reduced(p: SystemParams) -> SystemParams {
    SystemParams { d_t: 3, d_c: 2, ..p }
}

fn noisy(p: SystemParams) -> SystemParams {
    p.with(ParamName::Gamma, 0.03).with(ParamName::GammaPhi, 0.01).with(ParamName::Nbar, 0.1)
}

fn undriven(p: SystemParams) -> SystemParams {
    p.with(ParamName::Omega1, 0.0).with(ParamName::Omega2, 0.0)
}

/// exp(L t) vec(ρ0) through nalgebra's Padé exponential.
fn expm_propagate(params: &SystemParams, rho0: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let model = compile(params).unwrap();
    let l = build_liouvillian(&model, 0.0).to_nalgebra() * C64::new(t, 0.0);
    let v = DVector::from_vec(rho0.vectorize());
    let out = l.exp() * v;
    ComplexMatrix::unvectorize(out.as_slice()).unwrap()
}

fn tight() -> IntegrateOptions {
    IntegrateOptions { sample_interval: 10.0, ..Default::default() }
}

#[test]
fn undriven_propagation_matches_matrix_exponential() {
    let p = noisy(undriven(reduced(figure3_preset(1.0))));
    let rho0 = InitialState::Mixture4.build(3, 2).unwrap();
    let ts = integrate(&compile(&p).unwrap(), &rho0, 10.0, &tight()).unwrap();
    let oracle = expm_propagate(&p, &rho0, 10.0);
    let dev = ts.final_state.max_abs_diff(&oracle);
    assert!(dev <= 1e-7, "max entry deviation {dev:e}");
}

#[test]
fn frozen_drive_propagation_matches_matrix_exponential() {
    // ε = −δ₁ puts both tones at zero rotating-frame detuning
    let base = noisy(reduced(figure3_preset(1.0)));
    let p = base.with(ParamName::Epsilon, -base.delta1());
    assert!(p.drive_period().is_none());
    let rho0 = InitialState::Named(BellState::T).build(3, 2).unwrap();
    let ts = integrate(&compile(&p).unwrap(), &rho0, 10.0, &tight()).unwrap();
    let oracle = expm_propagate(&p, &rho0, 10.0);
    let dev = ts.final_state.max_abs_diff(&oracle);
    assert!(dev <= 1e-7, "max entry deviation {dev:e}");
}

#[test]
fn undriven_relaxation_reaches_liouvillian_kernel() {
    let p = noisy(undriven(reduced(figure3_preset(1.0)))).with(ParamName::Gamma, 0.1);
    let model = compile(&p).unwrap();
    let kernel = liouvillian_steady_state(&model, 0.0).unwrap();
    let rho0 = InitialState::Named(BellState::S).build(3, 2).unwrap();
    let options = SteadyOptions { t_max: 2000.0, tol: 1e-9, ..Default::default() };
    let report = steady_state(&model, &rho0, &options).unwrap();
    let oracle = populations(&kernel, 3, 2).unwrap();
    for (a, b) in report.populations.iter().zip(oracle) {
        assert!((a - b).abs() <= 1e-5, "{:?} vs {oracle:?}", report.populations);
    }
    let ts = integrate(&model, &rho0, report.convergence_time, &IntegrateOptions { sample_interval: 100.0, ..Default::default() }).unwrap();
    let dev = ts.final_state.max_abs_diff(&kernel);
    assert!(dev <= 1e-5, "state deviation {dev:e}");
}

#[test]
fn weak_drive_excitation_peaks_at_two_photon_resonance() {
    let base = figure3_preset(1.0).with(ParamName::Omega1, 1.0 / 30.0).with(ParamName::Omega2, 1.0 / 30.0);
    let center = base.omega_bar;
    let grid: Vec<f64> = (-12..=12).map(|k| center + 0.025 * k as f64).collect();
    let rho0 = InitialState::Ground.build(base.d_t, base.d_c).unwrap();
    let options = IntegrateOptions { sample_interval: 200.0, ..IntegrateOptions::fast() };
    let excitation: Vec<f64> = grid
        .par_iter()
        .map(|&w| {
            let model = compile(&base.with(ParamName::OmegaBar, w)).unwrap();
            integrate(&model, &rho0, 200.0, &options).unwrap().populations.last().unwrap()[3]
        })
        .collect();
    let (i, peak) = excitation.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert!(*peak > 10.0 * excitation[0], "no resonance: {excitation:?}");
    assert!((grid[i] - center).abs() <= 0.05, "peak at {} vs {center}", grid[i]);
}

#[test]
fn optimized_is_no_worse_than_guess() {
    let base = figure3_preset(1.0);
    let objective = |p: &SystemParams| {
        let model = compile(p)?;
        let rho0 = InitialState::Mixture4.build(p.d_t, p.d_c)?;
        steady_state(&model, &rho0, &SteadyOptions::objective(60.0)).map(|r| r.fidelity)
    };
    let guess = objective(&base).unwrap();
    let free = [ParamName::OmegaBar, ParamName::Epsilon, ParamName::DeltaC];
    let r = optimize_with(&base, &free, 50, &OptimizeOptions { starts: 2, ..Default::default() }, objective).unwrap();
    assert!(r.best_fidelity >= guess - 1e-4, "{} < {guess}", r.best_fidelity);
    assert_eq!(r.trace[0].fidelity, guess);
}

#[test]
fn thermal_bath_sets_photon_number() {
    let nbar = 0.1;
    let p = undriven(reduced(figure3_preset(1.0))).with(ParamName::G, 0.0).with(ParamName::Nbar, nbar);
    let p = SystemParams { d_c: 6, ..p };
    let model = compile(&p).unwrap();
    let rho0 = InitialState::Ground.build(p.d_t, p.d_c).unwrap();
    let ts = integrate(&model, &rho0, 100.0 / p.kappa, &IntegrateOptions { sample_interval: 50.0, ..Default::default() }).unwrap();
    // truncated thermal distribution on d_c levels
    let q = nbar / (1.0 + nbar);
    let weights: Vec<f64> = (0..p.d_c).map(|n| q.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    let mean = weights.iter().enumerate().map(|(n, w)| n as f64 * w).sum::<f64>() / z;
    let n = *ts.photon_number.last().unwrap();
    assert!((n - mean).abs() < 1e-6, "{n} vs {mean}");
    assert!((mean - nbar).abs() < 1e-4);
}
