//! Derivative-free tuning of drive and resonator frequencies, and parallel
//! parameter scans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{steady_state, InitialState, IntegrateOptions, SteadyOptions, SteadyReport};
use crate::error::{Error, Result};
use crate::model::{compile, ParamName, SystemParams};

/// Parameters the optimizer may vary.
pub const FREE_PARAMS: [ParamName; 4] = [ParamName::OmegaBar, ParamName::Epsilon, ParamName::DeltaC, ParamName::DeltaAmp];

pub const MIN_BUDGET: usize = 50;

/// Downhill simplex minimizer with a hard evaluation budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub budget: usize,
    /// Stop once the simplex values spread by less than this...
    pub f_tol: f64,
    /// ...and its vertices lie within this distance of the best one.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { budget: 200, f_tol: 1e-12, x_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Every evaluated point in order; NaN values mark failed evaluations.
    pub history: Vec<(Vec<f64>, f64)>,
}

struct Budgeted<F> {
    f: F,
    budget: usize,
    history: Vec<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Budgeted<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.history.len() >= self.budget {
            return None;
        }
        let v = (self.f)(x);
        self.history.push((x.to_vec(), v));
        Some(if v.is_nan() { f64::INFINITY } else { v })
    }
}

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

impl NelderMead {
    pub fn minimize(&self, f: impl FnMut(&[f64]) -> f64, x0: &[f64], steps: &[f64]) -> Minimum {
        assert_eq!(x0.len(), steps.len(), "one step per coordinate");
        let mut obj = Budgeted { f, budget: self.budget, history: Vec::new() };
        let n = x0.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let mut x = x0.to_vec();
            if i > 0 {
                x[i - 1] += steps[i - 1];
            }
            match obj.eval(&x) {
                Some(v) => simplex.push((x, v)),
                None => break,
            }
        }
        if simplex.len() == n + 1 {
            self.iterate(&mut obj, &mut simplex);
        }
        let (x, value) = simplex
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or_else(|| (x0.to_vec(), f64::INFINITY));
        Minimum { x, value, evaluations: obj.history.len(), history: obj.history }
    }

    fn iterate<F: FnMut(&[f64]) -> f64>(&self, obj: &mut Budgeted<F>, s: &mut [(Vec<f64>, f64)]) {
        let n = s.len() - 1;
        loop {
            s.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = s[n].1 - s[0].1;
            let size = s[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&s[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread.abs() <= self.f_tol && size <= self.x_tol {
                return;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &s[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let worst = s[n].0.clone();
            let xr = lerp(&centroid, &worst, -1.0);
            let Some(fr) = obj.eval(&xr) else { return };
            if fr < s[0].1 {
                let xe = lerp(&centroid, &worst, -2.0);
                let Some(fe) = obj.eval(&xe) else { return };
                s[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < s[n - 1].1 {
                s[n] = (xr, fr);
                continue;
            }
            let (xc, reference) = if fr < s[n].1 { (lerp(&centroid, &xr, 0.5), fr) } else { (lerp(&centroid, &worst, 0.5), s[n].1) };
            let Some(fc) = obj.eval(&xc) else { return };
            if fc < reference {
                s[n] = (xc, fc);
                continue;
            }
            let best = s[0].0.clone();
            for vertex in s[1..].iter_mut() {
                let x = lerp(&best, &vertex.0, 0.5);
                let Some(v) = obj.eval(&x) else { return };
                *vertex = (x, v);
            }
        }
    }
}

/// Multi-start settings for [`optimize_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub starts: usize,
    pub seed: u64,
    /// Initial simplex edge, per free parameter.
    pub edge: f64,
    /// Half-width of the uniform jitter applied to every start but the first.
    pub jitter: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    /// Uniform samples in the [`prescan_halfwidth`] box drawn before the
    /// simplex runs, the guess included. When non-zero, the simplex starts
    /// from the best samples instead of jittered copies of the guess.
    pub prescan: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { starts: 4, seed: 0, edge: 0.05, jitter: 0.05, f_tol: 1e-7, x_tol: 1e-4, prescan: 0 }
    }
}

/// Half-width of the prescan box around the guess.
pub fn prescan_halfwidth(p: ParamName) -> f64 {
    match p {
        ParamName::OmegaBar => 0.5,
        ParamName::Epsilon => 1.0,
        ParamName::DeltaC => 2.0,
        _ => 0.2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub start: usize,
    pub x: Vec<f64>,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub free: Vec<ParamName>,
    pub best_params: SystemParams,
    pub best_fidelity: f64,
    pub evaluations: usize,
    /// All evaluations, grouped by start in start order; with a prescan,
    /// start 0 holds the samples.
    pub trace: Vec<TracePoint>,
}

impl OptResult {
    /// Running best fidelity along the trace.
    pub fn incumbents(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.trace
            .iter()
            .map(|p| {
                if p.fidelity > best {
                    best = p.fidelity;
                }
                best
            })
            .collect()
    }
}

fn apply(base: &SystemParams, free: &[ParamName], x: &[f64]) -> SystemParams {
    let mut p = *base;
    for (&name, &v) in free.iter().zip(x) {
        p.set(name, v);
    }
    p
}

/// Maximizes `objective` over the `free` parameters. Starts are centred on
/// the values in `base`; the budget is split evenly across starts.
pub fn optimize_with<F>(base: &SystemParams, free: &[ParamName], budget: usize, options: &OptimizeOptions, objective: F) -> Result<OptResult>
where
    F: Fn(&SystemParams) -> Result<f64> + Sync,
{
    if free.is_empty() {
        return Err(Error::Config("no free parameters to optimize".into()));
    }
    for (i, p) in free.iter().enumerate() {
        if !FREE_PARAMS.contains(p) {
            return Err(Error::Config(format!("`{p}` cannot be optimized; allowed: omega_bar, epsilon, delta_c, delta_Omega")));
        }
        if free[..i].contains(p) {
            return Err(Error::Config(format!("`{p}` listed twice")));
        }
    }
    if budget < MIN_BUDGET {
        return Err(Error::Config(format!("budget must be at least {MIN_BUDGET}, got {budget}")));
    }
    let starts = options.starts.max(1);
    let x0: Vec<f64> = free.iter().map(|&p| base.get(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let eval = |x: &[f64]| objective(&apply(base, free, x)).map(|f| -f).unwrap_or(f64::NAN);
    let mut sampled: Vec<(Vec<f64>, f64)> = Vec::new();
    let initial: Vec<Vec<f64>> = if options.prescan > 0 {
        if budget < options.prescan + MIN_BUDGET {
            return Err(Error::Config(format!("budget {budget} leaves fewer than {MIN_BUDGET} evaluations after a prescan of {}", options.prescan)));
        }
        let points: Vec<Vec<f64>> = std::iter::once(x0.clone())
            .chain((1..options.prescan).map(|_| {
                x0.iter().zip(free).map(|(&v, &p)| v + prescan_halfwidth(p) * rng.gen_range(-1.0..=1.0)).collect()
            }))
            .collect();
        sampled = points.par_iter().map(|x| (x.clone(), eval(x))).collect();
        let mut ranked: Vec<&(Vec<f64>, f64)> = sampled.iter().filter(|s| s.1.is_finite()).collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        ranked.iter().take(starts).map(|s| s.0.clone()).collect()
    } else {
        (0..starts)
            .map(|k| {
                x0.iter()
                    .map(|&v| if k == 0 { v } else { v + rng.gen_range(-options.jitter..=options.jitter) })
                    .collect()
            })
            .collect()
    };
    let steps = vec![options.edge; free.len()];
    let remaining = budget - sampled.len();
    let n_starts = initial.len().max(1);
    let per_start = remaining / n_starts;
    let runs: Vec<Minimum> = initial
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            let nm = NelderMead { budget: per_start + usize::from(k < remaining % n_starts), f_tol: options.f_tol, x_tol: options.x_tol };
            nm.minimize(eval, x, &steps)
        })
        .collect();
    let offset = usize::from(!sampled.is_empty());
    let prescan_trace = sampled.iter().map(|(x, v)| TracePoint { start: 0, x: x.clone(), fidelity: -v });
    let trace: Vec<TracePoint> = prescan_trace
        .chain(runs.iter().enumerate().flat_map(|(k, m)| {
            m.history.iter().map(move |(x, v)| TracePoint { start: k + offset, x: x.clone(), fidelity: -v })
        }))
        .collect();
    let best = trace
        .iter()
        .filter(|p| p.fidelity.is_finite())
        .fold(None::<&TracePoint>, |acc, p| match acc {
            Some(b) if b.fidelity >= p.fidelity => Some(b),
            _ => Some(p),
        })
        .ok_or_else(|| Error::OptimizationFailure(format!("no finite objective value in {} evaluations", trace.len())))?;
    Ok(OptResult {
        free: free.to_vec(),
        best_params: apply(base, free, &best.x),
        best_fidelity: best.fidelity,
        evaluations: trace.len(),
        trace,
    })
}

/// Window-averaged singlet fidelity at `t_target`, starting from the
/// equal mixture of the lower states. A run that trips an invariant under the
/// fast tolerances is repeated once with the production tolerances.
pub fn fidelity_at(params: &SystemParams, t_target: f64) -> Result<SteadyReport> {
    let model = compile(params)?;
    let rho0 = InitialState::Mixture4.build(params.d_t, params.d_c)?;
    let fast = SteadyOptions::objective(t_target);
    match steady_state(&model, &rho0, &fast) {
        Err(Error::PositivityFailure { .. } | Error::NumericalFailure { .. }) => {
            let integrate = IntegrateOptions { sample_interval: fast.integrate.sample_interval, ..Default::default() };
            steady_state(&model, &rho0, &SteadyOptions { integrate, ..fast })
        }
        other => other,
    }
}

pub fn optimize_frequencies(base: &SystemParams, free: &[ParamName], t_target: f64, budget: usize) -> Result<OptResult> {
    optimize_frequencies_seeded(base, free, t_target, budget, 0)
}

pub fn optimize_frequencies_seeded(
    base: &SystemParams,
    free: &[ParamName],
    t_target: f64,
    budget: usize,
    seed: u64,
) -> Result<OptResult> {
    let options = OptimizeOptions { seed, ..Default::default() };
    optimize_with(base, free, budget, &options, |p| fidelity_at(p, t_target).map(|r| r.fidelity))
}

/// One point of a parameter scan; failures are kept per point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub params: SystemParams,
    pub outcome: Result<SteadyReport>,
}

impl ScanPoint {
    pub fn fidelity(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.fidelity)
    }
}

/// Evaluates every parameter set concurrently; output order follows input.
pub fn scan_points(points: &[SystemParams], t_target: f64) -> Vec<ScanPoint> {
    points
        .par_iter()
        .map(|p| ScanPoint { params: *p, outcome: fidelity_at(p, t_target) })
        .collect()
}

pub fn grid_scan(base: &SystemParams, param: ParamName, values: &[f64], t_target: f64) -> Result<Vec<(f64, ScanPoint)>> {
    if values.is_empty() {
        return Err(Error::Config("scan grid is empty".into()));
    }
    let points: Vec<SystemParams> = values.iter().map(|&v| base.with(param, v)).collect();
    Ok(values.iter().copied().zip(scan_points(&points, t_target)).collect())
}
