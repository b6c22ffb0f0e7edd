//! Simulation and analytics for dissipative stabilization of a two-transmon
//! singlet state coupled to a lossy resonator.
//!
//! All frequencies and rates are in units of the transmon-resonator coupling
//! `g`; times are in units of `1/g`.

pub mod dynamics;
pub mod effective;
pub mod error;
pub mod model;
pub mod ode;
pub mod optimize;
pub mod qop;

pub use dynamics::{
    build_liouvillian, integrate, integrate_partial, lindblad_rhs, liouvillian_steady_state, populations,
    steady_state, steady_state_traced, InitialState, IntegrateOptions, SteadyOptions, SteadyReport, TimeSeries,
};
pub use effective::{
    anharmonicity_scan, benchmarks, dressed_spectrum, effective_rates, omega_eff, rate_model, Benchmarks, EffectiveRates,
    RateSolution, SpectrumPoint,
};
pub use error::{Error, Result};
pub use model::{compile, figure3_preset, ModelSpec, ParamName, SystemParams};
pub use optimize::{
    fidelity_at, grid_scan, optimize_frequencies, optimize_with, scan_points, NelderMead, OptResult, OptimizeOptions,
    ScanPoint, TracePoint,
};
pub use qop::{bell_basis, destroy, embed, expect, BellState, ComplexMatrix, StateVector, C64};
