//! Lindblad master-equation propagation, observables, and the window-averaged
//! limit-cycle steady state.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::ode::{Advance, DormandPrince, OdeSystem, StepControl};
use crate::qop::{bell_basis, BellBasis, BellState, ComplexMatrix, StateVector, C64, I, ZERO};

/// `i[ρ, H(t)] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`, computed densely.
pub fn lindblad_rhs(model: &ModelSpec, rho: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if rho.dim() != model.dim() {
        return Err(Error::InvalidDimension(format!("state dim {} vs model dim {}", rho.dim(), model.dim())));
    }
    let h = model.hamiltonian(t);
    let mut out = (&rho.matmul(&h) - &h.matmul(rho)).scale(I);
    for l in &model.lindblads {
        if l.max_abs() == 0.0 {
            continue;
        }
        let ld = l.dagger();
        let ldl = ld.matmul(l);
        let jump = l.matmul(rho).matmul(&ld);
        let anti = &ldl.matmul(rho) + &rho.matmul(&ldl);
        out = &(&out + &jump) - &anti.scale(C64::new(0.5, 0.0));
    }
    Ok(out)
}

/// Superoperator `L` with `vec(dρ/dt) = L · vec(ρ)` (column stacking) for the
/// Hamiltonian frozen at time `t`. Output dimension is `d²`.
pub fn build_liouvillian(model: &ModelSpec, t: f64) -> ComplexMatrix {
    let d = model.dim();
    let h = model.hamiltonian(t);
    let id = ComplexMatrix::identity(d);
    let mut l = (&id.kron(&h) - &h.transpose().kron(&id)).scale(-I);
    for op in &model.lindblads {
        if op.max_abs() == 0.0 {
            continue;
        }
        let ldl = op.dagger().matmul(op);
        let conj_op = ComplexMatrix::from_fn(d, |r, c| op[(r, c)].conj());
        l = &l + &conj_op.kron(op);
        let half = C64::new(0.5, 0.0);
        l = &l - &id.kron(&ldl).scale(half);
        l = &l - &ldl.transpose().kron(&id).scale(half);
    }
    l
}

/// Stationary state of the frozen-time Liouvillian: the kernel vector of `L`
/// normalized to unit trace, found by replacing one equation with the trace
/// constraint.
pub fn liouvillian_steady_state(model: &ModelSpec, t: f64) -> Result<ComplexMatrix> {
    let d = model.dim();
    let l = build_liouvillian(model, t);
    let n = d * d;
    let mut m = l.to_nalgebra();
    for c in 0..n {
        m[(0, c)] = ZERO;
    }
    for i in 0..d {
        m[(0, i * d + i)] = C64::new(1.0, 0.0);
    }
    let mut b = DVector::from_element(n, ZERO);
    b[0] = C64::new(1.0, 0.0);
    let x = m
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::DegenerateInput("Liouvillian kernel is not unique".into()))?;
    let mut rho = ComplexMatrix::unvectorize(x.as_slice())?;
    rho.hermitize();
    let tr = rho.trace();
    Ok(rho.scale(C64::new(1.0, 0.0) / tr))
}

/// Eigenvalues of a general (non-Hermitian) complex matrix.
pub fn general_eigenvalues(m: &ComplexMatrix) -> Vec<C64> {
    let schur = m.to_nalgebra().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Populations `(P_00, P_11, P_T, P_S)` of the four lower states, each traced
/// over the resonator.
pub fn populations(rho: &ComplexMatrix, d_t: usize, d_c: usize) -> Result<[f64; 4]> {
    PopulationProbe::new(d_t, d_c)?.measure(rho.as_slice(), rho.dim())
}

/// Precomputed projector weights for [`populations`].
#[derive(Debug, Clone)]
struct PopulationProbe {
    d_t: usize,
    d_c: usize,
    /// per lower state: list of (row, col, weight) over the two-transmon space
    weights: [Vec<(usize, usize, C64)>; 4],
}

impl PopulationProbe {
    fn new(d_t: usize, d_c: usize) -> Result<Self> {
        let basis: BellBasis = bell_basis(d_t)?;
        let weights = BellState::LOWER.map(|s| {
            let amps = basis.get(s).amplitudes();
            let mut w = Vec::new();
            for (a, pa) in amps.iter().enumerate() {
                for (b, pb) in amps.iter().enumerate() {
                    if *pa != ZERO && *pb != ZERO {
                        w.push((a, b, pa.conj() * pb));
                    }
                }
            }
            w
        });
        Ok(PopulationProbe { d_t, d_c, weights })
    }

    fn measure(&self, rho: &[C64], dim: usize) -> Result<[f64; 4]> {
        if dim != self.d_t * self.d_t * self.d_c || rho.len() != dim * dim {
            return Err(Error::InvalidDimension(format!(
                "state dim {dim} does not match d_t = {}, d_c = {}",
                self.d_t, self.d_c
            )));
        }
        let dc = self.d_c;
        Ok(self.weights.each_ref().map(|w| {
            let mut acc = ZERO;
            for &(a, b, wt) in w {
                for n in 0..dc {
                    // ⟨ψ|_a ρ_{(a,n),(b,n)} |ψ⟩_b
                    acc += wt * rho[(a * dc + n) * dim + b * dc + n];
                }
            }
            acc.re
        }))
    }
}

/// Sparse matrix in coordinate order sorted by row.
#[derive(Debug, Clone, Default)]
struct SparseRows {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseRows {
    fn from_map(n_rows: usize, map: BTreeMap<(usize, usize), C64>) -> Self {
        let mut row_start = vec![0; n_rows + 1];
        let mut cols = Vec::with_capacity(map.len());
        let mut vals = Vec::with_capacity(map.len());
        for (&(r, c), &v) in &map {
            if v == ZERO {
                continue;
            }
            row_start[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..n_rows {
            row_start[r + 1] += row_start[r];
        }
        SparseRows { row_start, cols, vals }
    }

    fn nnz(&self) -> usize {
        self.vals.len()
    }
}

fn nonzeros(m: &ComplexMatrix) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
    let n = m.dim();
    m.as_slice().iter().enumerate().filter(|(_, v)| **v != ZERO).map(move |(i, v)| (i / n, i % n, *v))
}

/// Drive contribution to one entry of the sparse Hamiltonian.
#[derive(Debug, Clone, Copy)]
struct DriveEntry {
    entry: usize,
    term: usize,
    conjugate: bool,
    value: C64,
}

/// Sparse evaluation of the master-equation right-hand side. Relies on ρ being
/// Hermitian: `dρ/dt = A + A† + Σ L ρ L†` with `A = −i H_eff ρ` and
/// `H_eff = H − (i/2) Σ L†L`.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    h_pattern: SparseRows,
    h_static: Vec<C64>,
    h_values: Vec<C64>,
    drive: Vec<DriveEntry>,
    drive_amp: Vec<C64>,
    drive_freq: Vec<f64>,
    coeffs: Vec<C64>,
    jumps: SparseRows,
    jump_rows: Vec<usize>,
    rho_re: Vec<f64>,
    rho_im: Vec<f64>,
    acc_re: Vec<f64>,
    acc_im: Vec<f64>,
    pub rhs_evals: usize,
}

impl Propagator {
    pub fn new(model: &ModelSpec) -> Self {
        let dim = model.dim();
        let mut h_eff = model.h_static.clone();
        let mut jump_map: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for l in &model.lindblads {
            if l.max_abs() == 0.0 {
                continue;
            }
            let ldl = l.dagger().matmul(l);
            h_eff = &h_eff - &ldl.scale(C64::new(0.0, 0.5));
            // (L ρ L†)_{ab} = Σ L_{ac} ρ_{cd} conj(L_{bd})
            let nz: Vec<_> = nonzeros(l).collect();
            for &(a, c, v1) in &nz {
                for &(b, d, v2) in &nz {
                    *jump_map.entry((a * dim + b, c * dim + d)).or_insert(ZERO) += v1 * v2.conj();
                }
            }
        }

        let mut pattern: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (r, c, v) in nonzeros(&h_eff) {
            pattern.insert((r, c), v);
        }
        let mut raw_drive = Vec::new();
        for (k, term) in model.drive_terms.iter().enumerate() {
            if term.amplitude == ZERO {
                continue;
            }
            for (r, c, v) in nonzeros(&term.operator) {
                pattern.entry((r, c)).or_insert(ZERO);
                pattern.entry((c, r)).or_insert(ZERO);
                raw_drive.push(((r, c), k, false, v));
                raw_drive.push(((c, r), k, true, v.conj()));
            }
        }
        // keep explicit zeros from the drive pattern
        let mut row_start = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(pattern.len());
        let mut h_static = Vec::with_capacity(pattern.len());
        let mut index = BTreeMap::new();
        for (i, (&(r, c), &v)) in pattern.iter().enumerate() {
            row_start[r + 1] += 1;
            cols.push(c);
            h_static.push(v);
            index.insert((r, c), i);
        }
        for r in 0..dim {
            row_start[r + 1] += row_start[r];
        }
        let drive = raw_drive
            .into_iter()
            .map(|(pos, term, conjugate, value)| DriveEntry { entry: index[&pos], term, conjugate, value })
            .collect();
        let h_pattern = SparseRows { row_start, cols, vals: Vec::new() };
        let jumps = SparseRows::from_map(dim * dim, jump_map);
        Propagator {
            dim,
            h_values: h_static.clone(),
            h_pattern,
            h_static,
            drive,
            drive_amp: model.drive_terms.iter().map(|d| d.amplitude).collect(),
            drive_freq: model.drive_terms.iter().map(|d| d.frequency).collect(),
            coeffs: vec![ZERO; model.drive_terms.len()],
            jump_rows: (0..dim * dim)
                .filter(|&p| p / dim <= p % dim && jumps.row_start[p] < jumps.row_start[p + 1])
                .collect(),
            jumps,
            rho_re: vec![0.0; dim * dim],
            rho_im: vec![0.0; dim * dim],
            acc_re: vec![0.0; dim * dim],
            acc_im: vec![0.0; dim * dim],
            rhs_evals: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nonzeros of the Hamiltonian pattern and of the jump superoperator.
    pub fn sparsity(&self) -> (usize, usize) {
        (self.h_static.len(), self.jumps.nnz())
    }

    fn assemble(&mut self, t: f64) {
        for (k, c) in self.coeffs.iter_mut().enumerate() {
            *c = self.drive_amp[k] * C64::from_polar(1.0, self.drive_freq[k] * t);
        }
        self.h_values.copy_from_slice(&self.h_static);
        for e in &self.drive {
            let c = self.coeffs[e.term];
            let c = if e.conjugate { c.conj() } else { c };
            self.h_values[e.entry] += c * e.value;
        }
    }

    /// Writes `dρ/dt` for a Hermitian row-major `rho` into `out`.
    pub fn rhs_into(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        let n = self.dim;
        self.assemble(t);
        // split storage keeps the row updates vectorizable
        for ((x, re), im) in rho.iter().zip(&mut self.rho_re).zip(&mut self.rho_im) {
            *re = x.re;
            *im = x.im;
        }
        self.acc_re.fill(0.0);
        self.acc_im.fill(0.0);
        let rows = self.acc_re.chunks_exact_mut(n).zip(self.acc_im.chunks_exact_mut(n));
        for (r, (acc_re, acc_im)) in rows.enumerate() {
            let span = self.h_pattern.row_start[r]..self.h_pattern.row_start[r + 1];
            for (&v, &c) in self.h_values[span.clone()].iter().zip(&self.h_pattern.cols[span]) {
                if v == ZERO {
                    continue;
                }
                // coefficient −i·v
                let (cr, ci) = (v.im, -v.re);
                let xr = &self.rho_re[c * n..(c + 1) * n];
                let xi = &self.rho_im[c * n..(c + 1) * n];
                for (((ar, ai), &pr), &pi) in acc_re.iter_mut().zip(acc_im.iter_mut()).zip(xr).zip(xi) {
                    *ar += cr * pr - ci * pi;
                    *ai += cr * pi + ci * pr;
                }
            }
        }
        for r in 0..n {
            for c in r..n {
                let (a, b) = (r * n + c, c * n + r);
                let v = C64::new(self.acc_re[a] + self.acc_re[b], self.acc_im[a] - self.acc_im[b]);
                out[a] = v;
                out[b] = v.conj();
            }
        }
        let j = &self.jumps;
        for &p in &self.jump_rows {
            let span = j.row_start[p]..j.row_start[p + 1];
            let acc = j.vals[span.clone()].iter().zip(&j.cols[span]).map(|(v, &c)| v * rho[c]).sum::<C64>();
            // upper triangle only; the lower half follows by Hermiticity
            let (r, c) = (p / n, p % n);
            out[p] += acc;
            if r != c {
                out[c * n + r] += acc.conj();
            }
        }
        self.rhs_evals += 1;
    }

    pub fn rhs(&mut self, t: f64, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim);
        self.rhs_into(t, rho.as_slice(), out.as_mut_slice());
        out
    }
}

impl OdeSystem for Propagator {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.rhs_into(t, y, dy);
    }
}

/// Integration knobs. Defaults follow the production tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub sample_interval: f64,
    pub atol: f64,
    pub rtol: f64,
    /// Upper bound on the step; always capped at one tenth of the drive period.
    pub max_step: Option<f64>,
    /// Evaluate the minimum eigenvalue every this many samples (0 disables).
    pub eig_every: usize,
    pub trace_tolerance: f64,
    pub positivity_floor: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            sample_interval: 1.0,
            atol: 1e-9,
            rtol: 1e-8,
            max_step: None,
            eig_every: 1,
            trace_tolerance: 1e-6,
            positivity_floor: -1e-5,
        }
    }
}

impl IntegrateOptions {
    /// Looser tolerances for objective evaluations inside optimizers and sweeps.
    pub fn fast() -> Self {
        IntegrateOptions { atol: 1e-7, rtol: 1e-6, sample_interval: 5.0, eig_every: 20, ..Default::default() }
    }
}

/// Worst-case invariant diagnostics over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue seen at checked samples (`+∞` if none checked).
    pub min_eigenvalue: f64,
    pub max_purity: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_purity: 0.0,
            accepted_steps: 0,
            rejected_steps: 0,
            rhs_evals: 0,
        }
    }
}

/// Sampled observables of one run.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// `(P_00, P_11, P_T, P_S)` per sample.
    pub populations: Vec<[f64; 4]>,
    pub photon_number: Vec<f64>,
    pub trace_error: Vec<f64>,
    /// NaN at samples where the eigenvalue check was skipped.
    pub min_eigenvalue: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub final_state: ComplexMatrix,
}

impl TimeSeries {
    fn empty(dim: usize) -> Self {
        TimeSeries {
            times: Vec::new(),
            populations: Vec::new(),
            photon_number: Vec::new(),
            trace_error: Vec::new(),
            min_eigenvalue: Vec::new(),
            diagnostics: Diagnostics::default(),
            final_state: ComplexMatrix::zeros(dim),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn singlet(&self) -> impl Iterator<Item = f64> + '_ {
        self.populations.iter().map(|p| p[3])
    }

    /// First sample time with `P_S ≥ threshold`.
    pub fn first_time_above(&self, threshold: f64) -> Option<f64> {
        self.times.iter().zip(self.singlet()).find(|(_, p)| *p >= threshold).map(|(t, _)| *t)
    }

    /// Linear interpolation of the population vector at `t`.
    pub fn populations_at(&self, t: f64) -> Option<[f64; 4]> {
        let i = self.times.iter().position(|&s| s >= t)?;
        if i == 0 || self.times[i] == t {
            return Some(self.populations[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.populations[i - 1], self.populations[i]);
        Some(std::array::from_fn(|k| a[k] + w * (b[k] - a[k])))
    }
}

fn validate_initial(rho0: &ComplexMatrix, dim: usize) -> Result<()> {
    if rho0.dim() != dim {
        return Err(Error::InvalidDimension(format!("initial state dim {} vs model dim {dim}", rho0.dim())));
    }
    if rho0.hermiticity_error() > 1e-9 {
        return Err(Error::InvalidState("initial state is not Hermitian".into()));
    }
    let tr = rho0.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::InvalidState(format!("initial state has trace {tr}")));
    }
    let min_eig = rho0.hermitian_eigenvalues()[0];
    if min_eig < -1e-9 {
        return Err(Error::InvalidState(format!("initial state has negative eigenvalue {min_eig:e}")));
    }
    Ok(())
}

fn min_eigenvalue(rho: &[C64], dim: usize) -> f64 {
    let m = DMatrix::from_row_slice(dim, dim, rho);
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

fn hermitize_slice(rho: &mut [C64], n: usize) {
    for r in 0..n {
        rho[r * n + r].im = 0.0;
        for c in r + 1..n {
            let avg = 0.5 * (rho[r * n + c] + rho[c * n + r].conj());
            rho[r * n + c] = avg;
            rho[c * n + r] = avg.conj();
        }
    }
}

/// Observables measured on the live state.
struct Observer {
    probe: PopulationProbe,
    photon_diag: Vec<f64>,
    dim: usize,
}

impl Observer {
    fn new(model: &ModelSpec) -> Result<Self> {
        let d_c = model.d_c();
        let dim = model.dim();
        Ok(Observer {
            probe: PopulationProbe::new(model.d_t(), d_c)?,
            photon_diag: (0..dim).map(|i| (i % d_c) as f64).collect(),
            dim,
        })
    }

    fn populations(&self, rho: &[C64]) -> [f64; 4] {
        self.probe.measure(rho, self.dim).expect("dims fixed at construction")
    }

    fn photons(&self, rho: &[C64]) -> f64 {
        (0..self.dim).map(|i| self.photon_diag[i] * rho[i * self.dim + i].re).sum()
    }

    fn trace_error(&self, rho: &[C64]) -> f64 {
        let tr: C64 = (0..self.dim).map(|i| rho[i * self.dim + i]).sum();
        (tr - C64::new(1.0, 0.0)).norm()
    }

    fn purity(&self, rho: &[C64]) -> f64 {
        rho.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Live integration state shared by [`integrate`] and [`steady_state`].
struct Evolver {
    prop: Propagator,
    stepper: DormandPrince,
    obs: Observer,
    t: f64,
    rho: Vec<C64>,
    diag: Diagnostics,
    options: IntegrateOptions,
}

impl Evolver {
    fn new(model: &ModelSpec, rho0: &ComplexMatrix, options: &IntegrateOptions) -> Result<Self> {
        validate_initial(rho0, model.dim())?;
        let period = model.drive_period();
        let mut max_step = options.max_step.unwrap_or(f64::INFINITY);
        if let Some(p) = period {
            max_step = max_step.min(p / 10.0);
        }
        let control = StepControl { atol: options.atol, rtol: options.rtol, max_step, min_step: 1e-10 };
        let dim = model.dim();
        Ok(Evolver {
            prop: Propagator::new(model),
            stepper: DormandPrince::new(dim * dim, control),
            obs: Observer::new(model)?,
            t: 0.0,
            rho: rho0.as_slice().to_vec(),
            diag: Diagnostics::default(),
            options: options.clone(),
        })
    }

    fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let n = self.prop.dim();
        let out = self.stepper.advance(&mut self.prop, &mut self.t, &mut self.rho, t_end, |_, y| hermitize_slice(y, n));
        self.diag.accepted_steps = self.stepper.accepted;
        self.diag.rejected_steps = self.stepper.rejected;
        self.diag.rhs_evals = self.stepper.rhs_evals;
        match out {
            Advance::Reached => Ok(()),
            Advance::StepUnderflow { t, h } => {
                Err(Error::NumericalFailure { t, reason: format!("step size underflow (h = {h:e})") })
            }
        }
    }

    /// Updates diagnostics at the current time and enforces invariants.
    /// Returns the minimum eigenvalue when it was evaluated.
    fn check(&mut self, with_eig: bool) -> Result<Option<f64>> {
        let trace_err = self.obs.trace_error(&self.rho);
        self.diag.max_trace_error = self.diag.max_trace_error.max(trace_err);
        self.diag.max_purity = self.diag.max_purity.max(self.obs.purity(&self.rho));
        if trace_err > self.options.trace_tolerance {
            return Err(Error::NumericalFailure { t: self.t, reason: format!("trace drift {trace_err:e}") });
        }
        if !with_eig {
            return Ok(None);
        }
        let me = min_eigenvalue(&self.rho, self.prop.dim());
        self.diag.min_eigenvalue = self.diag.min_eigenvalue.min(me);
        if me < self.options.positivity_floor {
            return Err(Error::PositivityFailure { t: self.t, min_eigenvalue: me });
        }
        Ok(Some(me))
    }

    fn state(&self) -> ComplexMatrix {
        ComplexMatrix::from_row_major(self.rho.clone()).expect("square by construction")
    }
}

fn sample_times(t_end: f64, interval: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    let mut k = 1usize;
    loop {
        let t = k as f64 * interval;
        if t >= t_end * (1.0 - 1e-12) {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(t_end);
    times
}

/// Propagates `rho0` to `t_end`, returning whatever was sampled together with
/// the error that stopped the run, if any.
pub fn integrate_partial(
    model: &ModelSpec,
    rho0: &ComplexMatrix,
    t_end: f64,
    options: &IntegrateOptions,
) -> (TimeSeries, Option<Error>) {
    let mut series = TimeSeries::empty(model.dim());
    if !(t_end > 0.0) || !t_end.is_finite() {
        return (series, Some(Error::Domain(format!("t_end must be positive, got {t_end}"))));
    }
    if !(options.sample_interval > 0.0) {
        return (series, Some(Error::Domain("sample_interval must be positive".into())));
    }
    let mut ev = match Evolver::new(model, rho0, options) {
        Ok(ev) => ev,
        Err(e) => return (series, Some(e)),
    };
    let mut failure = None;
    for (i, &ts) in sample_times(t_end, options.sample_interval).iter().enumerate() {
        if ts > 0.0 {
            if let Err(e) = ev.advance_to(ts) {
                failure = Some(e);
                break;
            }
        }
        let with_eig = options.eig_every > 0 && i % options.eig_every == 0;
        let checked = ev.check(with_eig);
        series.times.push(ev.t);
        series.populations.push(ev.obs.populations(&ev.rho));
        series.photon_number.push(ev.obs.photons(&ev.rho));
        series.trace_error.push(ev.obs.trace_error(&ev.rho));
        match checked {
            Ok(me) => series.min_eigenvalue.push(me.unwrap_or(f64::NAN)),
            Err(e) => {
                series.min_eigenvalue.push(match e {
                    Error::PositivityFailure { min_eigenvalue, .. } => min_eigenvalue,
                    _ => f64::NAN,
                });
                failure = Some(e);
                break;
            }
        }
    }
    series.diagnostics = ev.diag;
    series.final_state = ev.state();
    (series, failure)
}

/// Adaptive embedded Runge–Kutta propagation of the master equation.
pub fn integrate(model: &ModelSpec, rho0: &ComplexMatrix, t_end: f64, options: &IntegrateOptions) -> Result<TimeSeries> {
    match integrate_partial(model, rho0, t_end, options) {
        (series, None) => Ok(series),
        (_, Some(e)) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOptions {
    pub integrate: IntegrateOptions,
    /// Convergence threshold on the change of the window-averaged populations.
    pub tol: f64,
    pub t_max: f64,
    pub samples_per_window: usize,
    /// Singlet population threshold whose first crossing is recorded.
    pub threshold: f64,
    /// Window length used when the drive is off or Δ₁ = 0.
    pub fallback_window: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            integrate: IntegrateOptions::default(),
            tol: 1e-5,
            t_max: 2000.0,
            samples_per_window: 16,
            threshold: 0.9,
            fallback_window: 2.0 * std::f64::consts::PI,
        }
    }
}

impl SteadyOptions {
    /// Objective-evaluation settings: fast tolerances, fixed horizon.
    pub fn objective(t_target: f64) -> Self {
        SteadyOptions { integrate: IntegrateOptions::fast(), t_max: t_target, samples_per_window: 8, ..Default::default() }
    }
}

/// Window-averaged limit-cycle summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyReport {
    /// Drive-period average of `P_S` over the last window.
    pub fidelity: f64,
    pub converged: bool,
    /// End of the window at which convergence was declared (or `t_max`).
    pub convergence_time: f64,
    pub window_drift: f64,
    /// Window-averaged `(P_00, P_11, P_T, P_S)`.
    pub populations: [f64; 4],
    /// First sampled time with instantaneous `P_S ≥ threshold`.
    pub time_to_threshold: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Integrates until consecutive drive-period averages of the populations
/// agree within `tol`, or until `t_max`. The initial populations act as the
/// zeroth window.
pub fn steady_state(model: &ModelSpec, rho0: &ComplexMatrix, options: &SteadyOptions) -> Result<SteadyReport> {
    steady_impl(model, rho0, options, None)
}

/// [`steady_state`] that also samples the instantaneous observables at
/// `t = 0` and at the end of every averaging window. On failure the partial
/// series is returned with the error.
pub fn steady_state_traced(
    model: &ModelSpec,
    rho0: &ComplexMatrix,
    options: &SteadyOptions,
) -> (TimeSeries, Result<SteadyReport>) {
    let mut series = TimeSeries::empty(model.dim());
    let out = steady_impl(model, rho0, options, Some(&mut series));
    (series, out)
}

fn record(series: &mut Option<&mut TimeSeries>, ev: &Evolver, min_eig: Option<f64>) {
    if let Some(s) = series.as_deref_mut() {
        s.times.push(ev.t);
        s.populations.push(ev.obs.populations(&ev.rho));
        s.photon_number.push(ev.obs.photons(&ev.rho));
        s.trace_error.push(ev.obs.trace_error(&ev.rho));
        s.min_eigenvalue.push(min_eig.unwrap_or(f64::NAN));
        s.diagnostics = ev.diag;
        s.final_state = ev.state();
    }
}

fn steady_impl(
    model: &ModelSpec,
    rho0: &ComplexMatrix,
    options: &SteadyOptions,
    mut series: Option<&mut TimeSeries>,
) -> Result<SteadyReport> {
    let window = model.drive_period().unwrap_or(options.fallback_window);
    if !(options.t_max > 0.0) {
        return Err(Error::Domain(format!("t_max must be positive, got {}", options.t_max)));
    }
    let mut ev = Evolver::new(model, rho0, &options.integrate)?;
    let sub = options.samples_per_window.max(2);
    let mut previous = ev.obs.populations(&ev.rho);
    let mut time_to_threshold = (previous[3] >= options.threshold).then_some(0.0);
    let mut drift;
    let mut average;
    let mut window_start = 0.0;
    let mut windows = 0usize;
    let eig_every = options.integrate.eig_every.max(1);
    let me = ev.check(options.integrate.eig_every > 0)?;
    record(&mut series, &ev, me);
    loop {
        // final window may be shortened to end exactly at t_max
        let window_end = (window_start + window).min(options.t_max);
        let len = window_end - window_start;
        let mut acc = [0.0; 4];
        let mut last = ev.obs.populations(&ev.rho);
        for s in 1..=sub {
            let ts = window_start + len * s as f64 / sub as f64;
            if let Err(e) = ev.advance_to(ts) {
                record(&mut series, &ev, None);
                return Err(e);
            }
            let p = ev.obs.populations(&ev.rho);
            if time_to_threshold.is_none() && p[3] >= options.threshold {
                time_to_threshold = Some(ev.t);
            }
            for k in 0..4 {
                acc[k] += 0.5 * (p[k] + last[k]) / sub as f64;
            }
            last = p;
        }
        windows += 1;
        let me = match ev.check(options.integrate.eig_every > 0 && windows % eig_every == 0) {
            Ok(me) => me,
            Err(e) => {
                let me = match e {
                    Error::PositivityFailure { min_eigenvalue, .. } => Some(min_eigenvalue),
                    _ => None,
                };
                record(&mut series, &ev, me);
                return Err(e);
            }
        };
        record(&mut series, &ev, me);
        average = acc;
        drift = (0..4).map(|k| (average[k] - previous[k]).abs()).fold(0.0, f64::max);
        previous = average;
        window_start = window_end;
        if drift < options.tol && len >= window * (1.0 - 1e-9) {
            return Ok(SteadyReport {
                fidelity: average[3],
                converged: true,
                convergence_time: window_end,
                window_drift: drift,
                populations: average,
                time_to_threshold,
                diagnostics: ev.diag,
            });
        }
        if window_end >= options.t_max * (1.0 - 1e-12) {
            break;
        }
    }
    Ok(SteadyReport {
        fidelity: average[3],
        converged: false,
        convergence_time: options.t_max,
        window_drift: drift,
        populations: average,
        time_to_threshold,
        diagnostics: ev.diag,
    })
}

/// Named initial states on the full space.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Equal mixture of |00⟩, |11⟩, |T⟩, |S⟩ with the resonator in vacuum.
    Mixture4,
    /// |00⟩ ⊗ |0⟩.
    Ground,
    /// A named two-transmon state with the resonator in vacuum.
    Named(BellState),
}

impl InitialState {
    pub fn build(&self, d_t: usize, d_c: usize) -> Result<ComplexMatrix> {
        let basis = bell_basis(d_t)?;
        let pure = |s: BellState| -> StateVector { basis.with_photons(s, 0, d_c) };
        Ok(match self {
            InitialState::Mixture4 => {
                let dim = d_t * d_t * d_c;
                let mut rho = ComplexMatrix::zeros(dim);
                for s in BellState::LOWER {
                    rho = &rho + &pure(s).projector().scale(C64::new(0.25, 0.0));
                }
                rho
            }
            InitialState::Ground => pure(BellState::G00).projector(),
            InitialState::Named(s) => pure(*s).projector(),
        })
    }
}
