//! Analytic effective-operator layer: two-photon drive, engineered decay and
//! reshuffling rates, rate-equation benchmarks and dressed-state spectra.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::model::{compile, ParamName, SystemParams};
use crate::qop::{bell_basis, BellState, ComplexMatrix, StateVector, C64};

const SINGULAR: f64 = 1e-12;

/// Effective two-photon Rabi frequency driving |00⟩ → |S₀⟩.
pub fn omega_eff(omega1: f64, omega2: f64, anharmonicity: f64, delta2: f64, epsilon: f64) -> Result<f64> {
    let denominators = [
        ("epsilon", epsilon),
        ("delta2 + epsilon", delta2 + epsilon),
        ("2A + epsilon", 2.0 * anharmonicity + epsilon),
        ("2A + delta2 + epsilon", 2.0 * anharmonicity + delta2 + epsilon),
    ];
    for (name, d) in denominators {
        if d.abs() < SINGULAR {
            return Err(Error::Singularity(format!("two-photon drive resonance: {name} = {d}")));
        }
    }
    let [a, b, c, d] = denominators.map(|(_, d)| 1.0 / d);
    // grouped so that A = 0 cancels exactly
    Ok(omega1 * omega2 / (2.0 * SQRT_2) * ((a - c) + (b - d)))
}

/// Analytic rates from the general complex-detuning formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates {
    pub omega_eff: f64,
    /// Effective coupling of the |S₀⟩, |S⟩|1⟩ block.
    pub g_eff_s0: C64,
    /// Effective coupling of the |T₁⟩, |11⟩|1⟩ block.
    pub g_eff_t1: C64,
    /// Engineered decay |00⟩ → |S⟩.
    pub kappa_plus: f64,
    /// Cavity-mediated loss out of |S⟩.
    pub kappa_minus: f64,
    /// Reshuffling of |T⟩ and |11⟩ into |00⟩.
    pub kappa_reshuffle: f64,
}

pub fn effective_rates(params: &SystemParams) -> Result<EffectiveRates> {
    params.validate()?;
    let (g, kappa, gamma) = (params.g, params.kappa, params.gamma);
    let (d1, d2, dc) = (params.delta1(), params.delta2(), params.delta_c);
    let om = omega_eff(params.omega1, params.omega2, params.anharmonicity, d2, params.epsilon)?;
    if g.abs() < SINGULAR {
        return Err(Error::Singularity("effective couplings diverge at g = 0".into()));
    }
    let t1 = C64::new(d1, -gamma / 2.0);
    let t2 = C64::new(d2, -gamma);
    let tc = C64::new(dc, -kappa / 2.0);
    let g_eff_s0 = SQRT_2 * g - t2 * (t1 + tc) / (SQRT_2 * g);
    let g_eff_t1 = 2.0 * g - t2 * (t1 + tc) / (2.0 * g);
    for (name, v) in [("g_eff_s0", g_eff_s0), ("g_eff_t1", g_eff_t1)] {
        if v.norm() < SINGULAR {
            return Err(Error::Singularity(format!("|{name}| vanishes")));
        }
    }
    let kappa_plus = kappa * om * om / (2.0 * g_eff_s0.norm_sqr());
    let kappa_minus = kappa * om * om / g_eff_t1.norm_sqr();
    let kappa_reshuffle = kappa_reshuffle(g, kappa, dc - d1);
    Ok(EffectiveRates { omega_eff: om, g_eff_s0, g_eff_t1, kappa_plus, kappa_minus, kappa_reshuffle })
}

/// κ_eff for a resonator detuned by `detuning` from the lower transition.
pub fn kappa_reshuffle(g: f64, kappa: f64, detuning: f64) -> f64 {
    2.0 * kappa * g * g / (2.0 * g * g + detuning * detuning / 2.0 + kappa * kappa / 4.0)
}

/// On-resonance shorthand values for the rates.
///
/// These carry mutually inconsistent prefactors (κ₊ is quoted both as Ω²/κ
/// and Ω²/2κ, while the general formula gives 2Ω²/κ at g̃ = iκ/2; κ₋ as
/// κΩ²/4g² against κΩ²/g² from g̃_T1 ≈ g). They are informational only;
/// [`effective_rates`] is authoritative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximateRates {
    pub kappa_plus_resonant: f64,
    pub kappa_plus_weak: f64,
    pub kappa_minus: f64,
}

pub fn approximate_rates(omega_eff: f64, kappa: f64, g: f64) -> ApproximateRates {
    let o2 = omega_eff * omega_eff;
    ApproximateRates {
        kappa_plus_resonant: o2 / kappa,
        kappa_plus_weak: o2 / (2.0 * kappa),
        kappa_minus: kappa * o2 / (4.0 * g * g),
    }
}

/// Solution of the single-population rate equation
/// `Ṗ_S = κ₊(1 − P_S) − (κ₋ + γ)P_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSolution {
    pub p_s: f64,
    pub steady: f64,
    /// Near-unit-fidelity error estimate (γ + κ₋)/κ₊.
    pub error: f64,
}

pub fn rate_model(kappa_plus: f64, kappa_minus: f64, gamma: f64, p_s0: f64, t: f64) -> Result<RateSolution> {
    for (name, v) in [("kappa_plus", kappa_plus), ("kappa_minus", kappa_minus), ("gamma", gamma)] {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
        }
    }
    let rate = kappa_plus + kappa_minus + gamma;
    if rate == 0.0 {
        return Err(Error::DegenerateInput("all rates vanish; steady state undefined".into()));
    }
    let steady = kappa_plus / rate;
    let p_s = steady + (p_s0 - steady) * (-rate * t).exp();
    let error = if kappa_plus > 0.0 { (gamma + kappa_minus) / kappa_plus } else { f64::INFINITY };
    Ok(RateSolution { p_s, steady, error })
}

/// Weak-drive optimum of the rate model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benchmarks {
    pub kappa_opt: f64,
    pub error_opt: f64,
    pub tau: f64,
    pub steady_fidelity: f64,
}

pub fn benchmarks(gamma: f64, g: f64) -> Result<Benchmarks> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    if !(g > 0.0) {
        return Err(Error::Domain(format!("g must be positive, got {g}")));
    }
    let base = (2.0 * gamma * g * g).cbrt();
    let error_opt = 24.0 * (2.0 * gamma / g).powf(2.0 / 3.0);
    Ok(Benchmarks {
        kappa_opt: 4.0 * base,
        error_opt,
        tau: 32.0 / base,
        steady_fidelity: (1.0 - error_opt).max(0.0),
    })
}

/// Indices of the full-space basis with `k1 + k2 + n = sector`.
fn sector_indices(d_t: usize, d_c: usize, sector: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for k1 in 0..d_t {
        for k2 in 0..d_t {
            for n in 0..d_c {
                if k1 + k2 + n == sector {
                    out.push((k1 * d_t + k2) * d_c + n);
                }
            }
        }
    }
    out
}

/// Eigenvalues (ascending) of the static Hamiltonian on one excitation sector.
pub fn dressed_spectrum(params: &SystemParams, sector: usize) -> Result<Vec<f64>> {
    Ok(dressed_states(params, sector)?.0)
}

/// Eigenpairs of the static Hamiltonian on one excitation sector; vectors
/// are embedded in the full space.
pub fn dressed_states(params: &SystemParams, sector: usize) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let model = compile(params)?;
    let (d_t, d_c) = (model.d_t(), model.d_c());
    let idx = sector_indices(d_t, d_c, sector);
    if idx.is_empty() {
        return Err(Error::DegenerateInput(format!("excitation sector {sector} is empty for d_t={d_t}, d_c={d_c}")));
    }
    let h = &model.h_static;
    let block = ComplexMatrix::from_fn(idx.len(), |r, c| h[(idx[r], idx[c])]);
    let (values, vectors) = block.hermitian_eigen();
    let full = vectors
        .iter()
        .map(|v| {
            let mut amps = vec![C64::new(0.0, 0.0); model.dim()];
            for (&i, &a) in idx.iter().zip(v.amplitudes()) {
                amps[i] = a;
            }
            StateVector::new(amps)
        })
        .collect();
    Ok((values, full))
}

/// Eigenvalues of the static Hamiltonian projected onto an orthonormal span.
pub fn restricted_spectrum(params: &SystemParams, span: &[StateVector]) -> Result<Vec<f64>> {
    let model = compile(params)?;
    if span.is_empty() {
        return Err(Error::DegenerateInput("empty span".into()));
    }
    for (i, a) in span.iter().enumerate() {
        if a.dim() != model.dim() {
            return Err(Error::InvalidDimension(format!("span vector {i} has dim {}, expected {}", a.dim(), model.dim())));
        }
        for (j, b) in span.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            if (a.inner(b) - expected).norm() > 1e-10 {
                return Err(Error::InvalidState("span vectors are not orthonormal".into()));
            }
        }
    }
    let images: Vec<StateVector> = span.iter().map(|v| model.h_static.apply(v)).collect::<Result<_>>()?;
    let block = ComplexMatrix::from_fn(span.len(), |r, c| span[r].inner(&images[c]));
    Ok(block.hermitian_eigenvalues())
}

/// One anharmonicity slice of a dressed-state scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint {
    pub anharmonicity: f64,
    pub energies: Vec<f64>,
    /// Weight |⟨T₁,0|v⟩|² of each eigenvector.
    pub t1_weight: Vec<f64>,
}

impl SpectrumPoint {
    /// Whether branch `i` counts as a dressed |T₁⟩ state.
    pub fn is_t1_branch(&self, i: usize) -> bool {
        self.t1_weight[i] > 0.25
    }
}

/// Dressed energies versus anharmonicity, re-applying the resonance
/// conditions at every point.
pub fn anharmonicity_scan(base: &SystemParams, values: &[f64], sector: usize) -> Result<Vec<SpectrumPoint>> {
    let basis = bell_basis(base.d_t)?;
    let t1 = basis.with_photons(BellState::T1, 0, base.d_c);
    values
        .iter()
        .map(|&a| {
            let p = base.with(ParamName::Anharmonicity, a).with_resonance_conditions();
            let (energies, vectors) = dressed_states(&p, sector)?;
            let t1_weight = vectors.iter().map(|v| t1.inner(v).norm_sqr()).collect();
            Ok(SpectrumPoint { anharmonicity: a, energies, t1_weight })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::figure3_preset;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // the four partial fractions combined over a common denominator
    fn closed_form(o1: f64, o2: f64, a: f64, d2: f64, e: f64) -> f64 {
        let num = 2.0 * a * ((d2 + e) * (2.0 * a + d2 + e) + e * (2.0 * a + e));
        o1 * o2 / (2.0 * SQRT_2) * num / (e * (d2 + e) * (2.0 * a + e) * (2.0 * a + d2 + e))
    }

    #[test]
    fn omega_eff_vanishes_without_anharmonicity() {
        for (d2, e) in [(1.4, 1.0), (0.3, -2.0), (5.0, 0.7)] {
            assert_eq!(omega_eff(0.3, 0.4, 0.0, d2, e).unwrap(), 0.0);
        }
    }

    #[test]
    fn omega_eff_partial_fractions_match_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let (o1, o2) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
            let a = rng.gen_range(0.1..5.0);
            let d2 = rng.gen_range(-3.0..3.0);
            let e = rng.gen_range(-2.0..2.0);
            let x = closed_form(o1, o2, a, d2, e);
            // stay away from the poles and the zeros
            if [e, d2 + e, 2.0 * a + e, 2.0 * a + d2 + e].iter().any(|d: &f64| d.abs() < 0.05) || x.abs() < 1e-6 {
                continue;
            }
            let y = omega_eff(o1, o2, a, d2, e).unwrap();
            assert!(((y - x) / x).abs() <= 1e-12, "{y} vs {x}");
            checked += 1;
        }
    }

    #[test]
    fn omega_eff_is_bilinear() {
        let base = omega_eff(0.2, 0.3, 1.0, SQRT_2, 1.0).unwrap();
        assert!((omega_eff(0.4, 0.3, 1.0, SQRT_2, 1.0).unwrap() - 2.0 * base).abs() < 1e-15);
        assert!((omega_eff(0.2, 0.9, 1.0, SQRT_2, 1.0).unwrap() - 3.0 * base).abs() < 1e-15);
    }

    #[test]
    fn omega_eff_names_resonance() {
        let err = omega_eff(0.3, 0.3, 1.0, 1.0, -1.0).unwrap_err();
        assert!(matches!(&err, Error::Singularity(m) if m.contains("delta2 + epsilon")), "{err}");
        assert!(omega_eff(0.3, 0.3, 1.0, 1.0, 0.0).is_err());
        assert!(omega_eff(0.3, 0.3, 1.0, 1.0, -2.0).is_err());
        assert!(omega_eff(0.3, 0.3, 1.0, 1.0, -3.0).is_err());
    }

    fn resonant(gamma: f64) -> SystemParams {
        figure3_preset(1.0).with(ParamName::Gamma, gamma)
    }

    #[test]
    fn s0_coupling_is_imaginary_on_resonance() {
        let p = resonant(0.0);
        assert!((p.delta2() - SQRT_2).abs() < 1e-14);
        let r = effective_rates(&p).unwrap();
        assert!((r.g_eff_s0 - C64::new(0.0, p.kappa / 2.0)).norm() <= 1e-12, "{}", r.g_eff_s0);
    }

    #[test]
    fn t1_coupling_is_about_g_on_resonance() {
        let p = resonant(0.0);
        let r = effective_rates(&p).unwrap();
        assert!((r.g_eff_t1.re - p.g).abs() <= p.kappa * p.kappa / p.g);
        assert!(r.g_eff_t1.im.abs() <= p.kappa);
    }

    #[test]
    fn rates_follow_general_formulas() {
        let p = resonant(1.0 / 5400.0);
        let r = effective_rates(&p).unwrap();
        let om = r.omega_eff;
        assert!((r.kappa_plus - p.kappa * om * om / (2.0 * r.g_eff_s0.norm_sqr())).abs() < 1e-15);
        assert!((r.kappa_minus - p.kappa * om * om / r.g_eff_t1.norm_sqr()).abs() < 1e-15);
        assert!(r.kappa_plus > 0.0 && r.kappa_minus > 0.0 && r.kappa_reshuffle > 0.0);
        // on resonance the general κ₊ is close to 2Ω²/κ
        assert!((r.kappa_plus / (2.0 * om * om / p.kappa) - 1.0).abs() < 0.01);
    }

    #[test]
    fn reshuffle_limits() {
        let (g, kappa) = (1.0, 0.3);
        for a in [0.5, 1.0, 4.75] {
            // resonance choice δ_c = δ₂ − δ₁ puts the lower transition 2A away
            let p = figure3_preset(a);
            let r = effective_rates(&p).unwrap();
            let a_form = 2.0 * kappa * g * g / (2.0 * g * g + 2.0 * a * a + kappa * kappa / 4.0);
            assert!((r.kappa_reshuffle - a_form).abs() < 1e-12 * a_form);
            let on_lower = p.with(ParamName::DeltaC, p.delta1());
            let r = effective_rates(&on_lower).unwrap();
            let expected = 2.0 * kappa * g * g / (2.0 * g * g + kappa * kappa / 4.0);
            assert!((r.kappa_reshuffle - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn reshuffle_peaks_on_lower_transition() {
        let p = figure3_preset(1.0);
        let d1 = p.delta1();
        let grid: Vec<f64> = (-200..=200).map(|k| d1 + 0.01 * k as f64).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| {
                let ra = effective_rates(&p.with(ParamName::DeltaC, *a)).unwrap().kappa_reshuffle;
                let rb = effective_rates(&p.with(ParamName::DeltaC, *b)).unwrap().kappa_reshuffle;
                ra.total_cmp(&rb)
            })
            .unwrap();
        assert!((best - d1).abs() < 1e-9);
    }

    #[test]
    fn real_detunings_without_loss() {
        let p = resonant(0.0).with(ParamName::Kappa, 0.0).with(ParamName::DeltaC, 2.1);
        let r = effective_rates(&p).unwrap();
        assert_eq!(r.g_eff_s0.im, 0.0);
        assert_eq!(r.g_eff_t1.im, 0.0);
        let s = p.delta2() * (p.delta1() + 2.1);
        assert!((r.g_eff_s0.re - (SQRT_2 - s / SQRT_2)).abs() < 1e-12);
        assert!((r.g_eff_t1.re - (2.0 - s / 2.0)).abs() < 1e-12);
        assert_eq!(r.kappa_plus, 0.0);
    }

    #[test]
    fn rate_model_limits() {
        let r = rate_model(0.01, 0.0, 0.0, 0.0, 50.0).unwrap();
        assert_eq!(r.steady, 1.0);
        assert_eq!(r.error, 0.0);
        let r = rate_model(0.02, 0.015, 0.005, 0.3, 10.0).unwrap();
        assert!((r.steady - 0.5).abs() < 1e-15);
        assert!(matches!(rate_model(0.0, 0.0, 0.0, 0.0, 1.0), Err(Error::DegenerateInput(_))));
        assert!(matches!(rate_model(-0.1, 0.0, 0.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert_eq!(rate_model(0.0, 0.1, 0.0, 0.0, 1.0).unwrap().error, f64::INFINITY);
    }

    #[test]
    fn rate_model_error_at_eighth_kappa_drive() {
        let (g, kappa, gamma) = (1.0, 0.3, 1.0 / 5400.0);
        let om = kappa / 8.0;
        let kp = om * om / (2.0 * kappa);
        let km = kappa * om * om / (4.0 * g * g);
        let r = rate_model(kp, km, gamma, 0.0, 0.0).unwrap();
        let expected = 128.0 * gamma / kappa + kappa * kappa / (2.0 * g * g);
        assert!((r.error - expected).abs() < 1e-12 * expected);
    }

    fn two_term_error(gamma: f64, g: f64, kappa: f64) -> f64 {
        128.0 * gamma / kappa + kappa * kappa / (2.0 * g * g)
    }

    #[test]
    fn benchmark_values() {
        let b = benchmarks(1.0 / 5400.0, 1.0).unwrap();
        assert!((b.kappa_opt - 0.287).abs() < 5e-4, "{}", b.kappa_opt);
        assert!((b.tau * b.kappa_opt - 128.0).abs() < 1e-10);
        let h = 1e-5;
        let gamma = 1.0 / 5400.0;
        let fd = (two_term_error(gamma, 1.0, b.kappa_opt + h) - two_term_error(gamma, 1.0, b.kappa_opt - h)) / (2.0 * h);
        assert!(fd.abs() <= 1e-8, "{fd}");
        assert!(b.steady_fidelity <= 1.0 && b.steady_fidelity > 0.0);
        assert!(matches!(benchmarks(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(benchmarks(-1e-3, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn benchmark_error_matches_two_term_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let g = rng.gen_range(0.2..5.0);
            let gamma = g * 10f64.powf(rng.gen_range(-6.0..-2.0));
            let b = benchmarks(gamma, g).unwrap();
            let e = two_term_error(gamma, g, b.kappa_opt);
            assert!(((e - b.error_opt) / b.error_opt).abs() <= 1e-10);
        }
    }

    #[test]
    fn singlet_block_splits_by_root_two_g() {
        let p = figure3_preset(1.0);
        let basis = bell_basis(p.d_t).unwrap();
        let span = [basis.with_photons(BellState::S0, 0, p.d_c), basis.with_photons(BellState::S, 1, p.d_c)];
        let e = restricted_spectrum(&p, &span).unwrap();
        let d2 = p.delta2();
        assert!((e[0] - (d2 - SQRT_2 * p.g)).abs() < 1e-10);
        assert!((e[1] - (d2 + SQRT_2 * p.g)).abs() < 1e-10);
    }

    #[test]
    fn triplet_block_splitting_matches_coupling() {
        let p = figure3_preset(1.0);
        let p = p.with(ParamName::DeltaC, p.delta1());
        let basis = bell_basis(p.d_t).unwrap();
        let a = basis.with_photons(BellState::T, 0, p.d_c);
        let b = basis.with_photons(BellState::G00, 1, p.d_c);
        let model = compile(&p).unwrap();
        let coupling = a.inner(&model.h_static.apply(&b).unwrap());
        let e = restricted_spectrum(&p, &[a, b]).unwrap();
        assert!((e[1] - e[0] - 2.0 * coupling.norm()).abs() < 1e-10);
        assert!((coupling.norm() - SQRT_2 * p.g).abs() < 1e-12);
        assert!(((e[0] + e[1]) / 2.0 - p.delta1()).abs() < 1e-10);
    }

    #[test]
    fn uncoupled_spectrum_is_bare_energies() {
        let p = figure3_preset(1.0).with(ParamName::G, 0.0);
        let model = compile(&p).unwrap();
        for sector in 0..4 {
            let mut bare: Vec<f64> = sector_indices(p.d_t, p.d_c, sector)
                .into_iter()
                .map(|i| model.h_static[(i, i)].re)
                .collect();
            bare.sort_by(f64::total_cmp);
            let e = dressed_spectrum(&p, sector).unwrap();
            assert_eq!(e.len(), bare.len());
            for (x, y) in e.iter().zip(&bare) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sectors_cover_space() {
        let p = figure3_preset(1.0);
        let total: usize = (0..=9).map(|s| dressed_spectrum(&p, s).unwrap().len()).sum();
        assert_eq!(total, p.hilbert_dim());
        assert!(matches!(dressed_spectrum(&p, 10), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn scan_is_lipschitz_in_anharmonicity() {
        let base = figure3_preset(1.0);
        let step = 0.02;
        let values: Vec<f64> = (0..=100).map(|k| 0.5 + step * k as f64).collect();
        let scan = anharmonicity_scan(&base, &values, 2).unwrap();
        for w in values.windows(2).zip(scan.windows(2)) {
            let (a, pts) = w;
            // Weyl: sorted eigenvalues move by at most ‖H(a₁) − H(a₀)‖
            let h0 = compile(&base.with(ParamName::Anharmonicity, a[0]).with_resonance_conditions()).unwrap().h_static;
            let h1 = compile(&base.with(ParamName::Anharmonicity, a[1]).with_resonance_conditions()).unwrap().h_static;
            let bound = (&h1 - &h0).frobenius_norm();
            for (x, y) in pts[0].energies.iter().zip(&pts[1].energies) {
                assert!((x - y).abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn scan_flags_t1_branch() {
        let base = figure3_preset(1.0);
        let scan = anharmonicity_scan(&base, &[1.0, 3.0], 3).unwrap();
        for pt in &scan {
            let total: f64 = pt.t1_weight.iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
            assert!((0..pt.energies.len()).any(|i| pt.is_t1_branch(i)));
        }
    }

    proptest! {
        #[test]
        fn rate_model_monotone_and_convergent(kp in 1e-4f64..0.1, km in 0.0f64..0.01, g in 0.0f64..1e-3) {
            let r0 = kp + km + g;
            let mut last = 0.0;
            for k in 0..=50 {
                let t = 10.0 / r0 * k as f64 / 50.0;
                let s = rate_model(kp, km, g, 0.0, t).unwrap();
                prop_assert!(s.p_s + 1e-15 >= last);
                last = s.p_s;
            }
            // e^{-10} alone leaves up to 4.5e-5; twenty e-folds reach 1e-6
            let end = rate_model(kp, km, g, 0.0, 20.0 / r0).unwrap();
            prop_assert!((end.p_s - end.steady).abs() <= 1e-6);
        }
    }
}
