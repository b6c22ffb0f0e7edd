//! Physical parameters and their compilation into rotating-frame operators.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qop::{destroy, embed, ket_bra, number, ComplexMatrix, C64, ZERO};

/// Every tunable quantity of the two-transmon + resonator model, in units of g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub g: f64,
    /// g₂ / g₁.
    pub delta_g: f64,
    /// Level spacing of transmon 1.
    pub omega: f64,
    /// ω₂ − ω₁.
    pub delta_omega: f64,
    /// Anharmonicity A of transmon 1.
    pub anharmonicity: f64,
    /// A₂ / A₁.
    pub delta_a: f64,
    /// Mean drive frequency ω̄.
    pub omega_bar: f64,
    /// Single-photon virtuality detuning ε.
    pub epsilon: f64,
    /// Resonator detuning ω_c − ω̄.
    pub delta_c: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// Amplitude ratio of the Ω₂ tone on transmon 2.
    pub delta_amp: f64,
    /// Phase error of the Ω₂ tone on transmon 1 [rad].
    pub theta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub gamma_phi: f64,
    pub nbar: f64,
    pub d_t: usize,
    pub d_c: usize,
}

/// Scalar parameters addressable by name (config keys, sweeps, optimizer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamName {
    G,
    DeltaG,
    Omega,
    DeltaOmega,
    Anharmonicity,
    DeltaA,
    OmegaBar,
    Epsilon,
    DeltaC,
    Omega1,
    Omega2,
    DeltaAmp,
    Theta,
    Kappa,
    Gamma,
    GammaPhi,
    Nbar,
}

impl ParamName {
    pub const ALL: [ParamName; 17] = [
        ParamName::G,
        ParamName::DeltaG,
        ParamName::Omega,
        ParamName::DeltaOmega,
        ParamName::Anharmonicity,
        ParamName::DeltaA,
        ParamName::OmegaBar,
        ParamName::Epsilon,
        ParamName::DeltaC,
        ParamName::Omega1,
        ParamName::Omega2,
        ParamName::DeltaAmp,
        ParamName::Theta,
        ParamName::Kappa,
        ParamName::Gamma,
        ParamName::GammaPhi,
        ParamName::Nbar,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ParamName::G => "g",
            ParamName::DeltaG => "delta_g",
            ParamName::Omega => "omega",
            ParamName::DeltaOmega => "delta_omega",
            ParamName::Anharmonicity => "A",
            ParamName::DeltaA => "delta_A",
            ParamName::OmegaBar => "omega_bar",
            ParamName::Epsilon => "epsilon",
            ParamName::DeltaC => "delta_c",
            ParamName::Omega1 => "Omega1",
            ParamName::Omega2 => "Omega2",
            ParamName::DeltaAmp => "delta_Omega",
            ParamName::Theta => "theta",
            ParamName::Kappa => "kappa",
            ParamName::Gamma => "gamma",
            ParamName::GammaPhi => "gamma_phi",
            ParamName::Nbar => "nbar",
        }
    }

    /// Rates and occupancies must stay non-negative.
    pub fn is_non_negative(self) -> bool {
        matches!(self, ParamName::Kappa | ParamName::Gamma | ParamName::GammaPhi | ParamName::Nbar)
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ParamName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ParamName::ALL
            .iter()
            .copied()
            .find(|p| p.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{s}`")))
    }
}

impl SystemParams {
    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::G => self.g,
            ParamName::DeltaG => self.delta_g,
            ParamName::Omega => self.omega,
            ParamName::DeltaOmega => self.delta_omega,
            ParamName::Anharmonicity => self.anharmonicity,
            ParamName::DeltaA => self.delta_a,
            ParamName::OmegaBar => self.omega_bar,
            ParamName::Epsilon => self.epsilon,
            ParamName::DeltaC => self.delta_c,
            ParamName::Omega1 => self.omega1,
            ParamName::Omega2 => self.omega2,
            ParamName::DeltaAmp => self.delta_amp,
            ParamName::Theta => self.theta,
            ParamName::Kappa => self.kappa,
            ParamName::Gamma => self.gamma,
            ParamName::GammaPhi => self.gamma_phi,
            ParamName::Nbar => self.nbar,
        }
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        let slot = match name {
            ParamName::G => &mut self.g,
            ParamName::DeltaG => &mut self.delta_g,
            ParamName::Omega => &mut self.omega,
            ParamName::DeltaOmega => &mut self.delta_omega,
            ParamName::Anharmonicity => &mut self.anharmonicity,
            ParamName::DeltaA => &mut self.delta_a,
            ParamName::OmegaBar => &mut self.omega_bar,
            ParamName::Epsilon => &mut self.epsilon,
            ParamName::DeltaC => &mut self.delta_c,
            ParamName::Omega1 => &mut self.omega1,
            ParamName::Omega2 => &mut self.omega2,
            ParamName::DeltaAmp => &mut self.delta_amp,
            ParamName::Theta => &mut self.theta,
            ParamName::Kappa => &mut self.kappa,
            ParamName::Gamma => &mut self.gamma,
            ParamName::GammaPhi => &mut self.gamma_phi,
            ParamName::Nbar => &mut self.nbar,
        };
        *slot = value;
    }

    pub fn with(mut self, name: ParamName, value: f64) -> Self {
        self.set(name, value);
        self
    }

    /// δ₁ = ω − ω̄ (transmon 1).
    pub fn delta1(&self) -> f64 {
        self.omega - self.omega_bar
    }

    /// δ₂ = 2(ω − ω̄) − 2A (transmon 1).
    pub fn delta2(&self) -> f64 {
        2.0 * (self.omega - self.omega_bar) - 2.0 * self.anharmonicity
    }

    /// Detuning Δ₁ of the Ω₁ tone; the Ω₂ tone sits at Δ₂ = −Δ₁.
    pub fn drive_detuning1(&self) -> f64 {
        -(self.delta1() + self.epsilon)
    }

    pub fn drive_detuning2(&self) -> f64 {
        -self.drive_detuning1()
    }

    /// Period 2π/|Δ₁| of the rotating-frame drive, `None` when Δ₁ = 0.
    pub fn drive_period(&self) -> Option<f64> {
        let d = self.drive_detuning1().abs();
        (d > 1e-12).then(|| 2.0 * PI / d)
    }

    pub fn transmon_frequency(&self, j: usize) -> f64 {
        if j == 0 { self.omega } else { self.omega + self.delta_omega }
    }

    pub fn transmon_anharmonicity(&self, j: usize) -> f64 {
        if j == 0 { self.anharmonicity } else { self.delta_a * self.anharmonicity }
    }

    pub fn transmon_coupling(&self, j: usize) -> f64 {
        if j == 0 { self.g } else { self.delta_g * self.g }
    }

    /// Rotating-frame energy of level `k` of transmon `j` (Duffing ladder).
    pub fn level_energy(&self, j: usize, k: usize) -> f64 {
        let k = k as f64;
        k * (self.transmon_frequency(j) - self.omega_bar) - self.transmon_anharmonicity(j) * k * (k - 1.0)
    }

    /// Resets ω̄ and δ_c to the resonance conditions δ₂ = √2·g and
    /// δ_c = δ₂ − δ₁ for the current ω, A and g.
    pub fn with_resonance_conditions(mut self) -> Self {
        self.omega_bar = self.omega - self.anharmonicity - self.g / SQRT_2;
        self.delta_c = self.delta2() - self.delta1();
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.d_t, self.d_t, self.d_c]
    }

    pub fn hilbert_dim(&self) -> usize {
        self.d_t * self.d_t * self.d_c
    }

    pub fn validate(&self) -> Result<()> {
        for p in ParamName::ALL {
            let v = self.get(p);
            if !v.is_finite() {
                return Err(Error::Config(format!("parameter `{p}` is not finite ({v})")));
            }
            if p.is_non_negative() && v < 0.0 {
                return Err(Error::Config(format!("parameter `{p}` must be non-negative, got {v}")));
            }
        }
        if !(3..=4).contains(&self.d_t) {
            return Err(Error::Config(format!("d_t must be 3 or 4, got {}", self.d_t)));
        }
        if self.d_c < 2 {
            return Err(Error::Config(format!("d_c must be at least 2, got {}", self.d_c)));
        }
        Ok(())
    }
}

/// Baseline parameters of the A = g time-trace experiment, with frequencies
/// at the analytic resonance conditions.
pub fn figure3_preset(anharmonicity: f64) -> SystemParams {
    SystemParams {
        g: 1.0,
        delta_g: 1.0,
        omega: 20.0,
        delta_omega: 0.0,
        anharmonicity,
        delta_a: 1.0,
        omega_bar: 0.0,
        epsilon: 1.0,
        delta_c: 0.0,
        omega1: 1.0 / 3.0,
        omega2: 1.0 / 3.0,
        delta_amp: 1.0,
        theta: 0.0,
        kappa: 0.3,
        gamma: 1.0 / 5400.0,
        gamma_phi: 0.0,
        nbar: 0.0,
        d_t: 4,
        d_c: 4,
    }
    .with_resonance_conditions()
}

/// One rotating term `amplitude · e^{i·frequency·t} · operator` of the drive;
/// its Hermitian conjugate is implied.
#[derive(Debug, Clone)]
pub struct DriveTerm {
    pub operator: ComplexMatrix,
    pub amplitude: C64,
    pub frequency: f64,
}

/// Compiled model: static Hamiltonian, drive generators and jump operators.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub h_static: ComplexMatrix,
    pub drive_terms: Vec<DriveTerm>,
    /// Jump operators with rates folded in (`√rate · L`).
    pub lindblads: Vec<ComplexMatrix>,
    pub dims: [usize; 3],
    pub params: SystemParams,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.h_static.dim()
    }

    pub fn d_t(&self) -> usize {
        self.dims[0]
    }

    pub fn d_c(&self) -> usize {
        self.dims[2]
    }

    pub fn drive_period(&self) -> Option<f64> {
        self.params.drive_period()
    }

    pub fn has_drive(&self) -> bool {
        self.drive_terms.iter().any(|d| d.amplitude.norm() > 0.0)
    }

    /// H'_d(t).
    pub fn drive_hamiltonian(&self, t: f64) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(self.dim());
        for term in &self.drive_terms {
            let c = term.amplitude * C64::from_polar(1.0, term.frequency * t);
            if c == ZERO {
                continue;
            }
            let piece = term.operator.scale(c);
            h = &(&h + &piece) + &piece.dagger();
        }
        h
    }

    /// H_static + H'_d(t).
    pub fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        &self.h_static + &self.drive_hamiltonian(t)
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `b = Σ_k √(k+1) |k⟩⟨k+1|` on a single transmon.
fn transmon_lowering(d_t: usize) -> ComplexMatrix {
    destroy(d_t).expect("d_t validated")
}

pub fn compile(params: &SystemParams) -> Result<ModelSpec> {
    params.validate()?;
    let d_t = params.d_t;
    let d_c = params.d_c;
    let dims = params.dims();
    let dim = params.hilbert_dim();

    let a = embed(&destroy(d_c)?, 2, &dims)?;
    let a_dag = a.dagger();
    let b_single = transmon_lowering(d_t);
    let b = [embed(&b_single, 0, &dims)?, embed(&b_single, 1, &dims)?];

    // Free part is diagonal in the product basis.
    let mut diag = vec![ZERO; dim];
    for (idx, d) in diag.iter_mut().enumerate() {
        let n = idx % d_c;
        let k2 = (idx / d_c) % d_t;
        let k1 = idx / (d_c * d_t);
        *d = real(params.delta_c * n as f64 + params.level_energy(0, k1) + params.level_energy(1, k2));
    }
    let mut h_static = ComplexMatrix::from_diagonal(&diag);
    for (j, bj) in b.iter().enumerate() {
        let coupling = a_dag.matmul(bj).scale(real(params.transmon_coupling(j)));
        h_static = &(&h_static + &coupling) + &coupling.dagger();
    }

    let half1 = params.omega1 / 2.0;
    let half2 = params.omega2 / 2.0;
    let (d1, d2) = (params.drive_detuning1(), params.drive_detuning2());
    let phase = C64::from_polar(1.0, -params.theta);
    let raising = [b[0].dagger(), b[1].dagger()];
    let drive_terms = vec![
        DriveTerm { operator: raising[0].clone(), amplitude: real(half1), frequency: d1 },
        DriveTerm { operator: raising[0].clone(), amplitude: -phase * half2, frequency: d2 },
        DriveTerm { operator: raising[1].clone(), amplitude: real(half1), frequency: d1 },
        DriveTerm { operator: raising[1].clone(), amplitude: real(params.delta_amp * half2), frequency: d2 },
    ];

    let mut lindblads = Vec::new();
    for j in 0..2 {
        for k in 1..d_t {
            let op = ket_bra(d_t, k - 1, k).scale(real((k as f64 * params.gamma).sqrt()));
            lindblads.push(embed(&op, j, &dims)?);
        }
        let deph = number(d_t).scale(real((2.0 * params.gamma_phi).sqrt()));
        lindblads.push(embed(&deph, j, &dims)?);
    }
    lindblads.push(a.scale(real((params.kappa * (params.nbar + 1.0)).sqrt())));
    lindblads.push(a_dag.scale(real((params.kappa * params.nbar).sqrt())));

    Ok(ModelSpec { h_static, drive_terms, lindblads, dims, params: params.clone() })
}
