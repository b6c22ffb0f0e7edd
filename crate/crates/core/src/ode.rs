//! Adaptive Dormand–Prince 5(4) stepper for complex state vectors.

use crate::qop::C64;

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { atol: 1e-9, rtol: 1e-8, max_step: f64::INFINITY, min_step: 1e-12 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus the embedded fourth-order ones
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Stepper state; owns all stage buffers so stepping never allocates.
pub struct DormandPrince {
    control: StepControl,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
    fsal_valid: bool,
    h: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Outcome of a call to [`DormandPrince::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance {
    Reached,
    StepUnderflow { t: f64, h: f64 },
}

impl DormandPrince {
    pub fn new(n: usize, control: StepControl) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        DormandPrince {
            control,
            k: std::array::from_fn(|_| z.clone()),
            tmp: z.clone(),
            y_new: z,
            fsal_valid: false,
            h: 0.0,
            accepted: 0,
            rejected: 0,
            rhs_evals: 0,
        }
    }

    pub fn control(&self) -> &StepControl {
        &self.control
    }

    /// Forces a fresh derivative evaluation; call after editing the state
    /// outside [`advance`](Self::advance).
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    fn eval<S: OdeSystem>(&mut self, sys: &mut S, t: f64, stage: usize, from_tmp: bool, y: &[C64]) {
        let (input, out) = if from_tmp { (&self.tmp[..], &mut self.k[stage]) } else { (y, &mut self.k[stage]) };
        sys.rhs(t, input, out);
        self.rhs_evals += 1;
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[C64]) -> f64 {
        // Hairer's starting-step heuristic
        self.eval(sys, t, 0, false, y);
        let c = self.control;
        let scale = |v: C64| c.atol + c.rtol * v.norm();
        let n = y.len() as f64;
        let d0 = (y.iter().map(|v| (v.norm() / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (y.iter().zip(&self.k[0]).map(|(v, f)| (f.norm() / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(c.max_step)
    }

    /// Integrates `y` from `t` to `t_end` in place. Calls `after_step` with the
    /// new time and state after each accepted step; it may modify the state.
    pub fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t: &mut f64,
        y: &mut [C64],
        t_end: f64,
        mut after_step: impl FnMut(f64, &mut [C64]),
    ) -> Advance {
        let c = self.control;
        if self.h <= 0.0 {
            self.h = self.initial_step(sys, *t, y);
            self.fsal_valid = true;
        }
        while *t < t_end {
            if !self.fsal_valid {
                self.eval(sys, *t, 0, false, y);
                self.fsal_valid = true;
            }
            let remaining = t_end - *t;
            let mut h = self.h.min(c.max_step);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h < c.min_step && !last {
                return Advance::StepUnderflow { t: *t, h };
            }
            let n = y.len();
            macro_rules! combo {
                ($out:expr; $($coef:expr => $stage:expr),+) => {{
                    let ks = [$(&self.k[$stage][..n]),+];
                    let coefs = [$($coef * h),+];
                    let out = &mut $out[..n];
                    out.copy_from_slice(&y[..n]);
                    for (kk, &a) in ks.iter().zip(&coefs) {
                        for (o, &v) in out.iter_mut().zip(kk.iter()) {
                            *o += v * a;
                        }
                    }
                }};
            }
            combo!(self.tmp; A21 => 0);
            self.eval(sys, *t + C2 * h, 1, true, y);
            combo!(self.tmp; A31 => 0, A32 => 1);
            self.eval(sys, *t + C3 * h, 2, true, y);
            combo!(self.tmp; A41 => 0, A42 => 1, A43 => 2);
            self.eval(sys, *t + C4 * h, 3, true, y);
            combo!(self.tmp; A51 => 0, A52 => 1, A53 => 2, A54 => 3);
            self.eval(sys, *t + C5 * h, 4, true, y);
            combo!(self.tmp; A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
            self.eval(sys, *t + h, 5, true, y);
            combo!(self.y_new; A71 => 0, A73 => 2, A74 => 3, A75 => 4, A76 => 5);
            sys.rhs(*t + h, &self.y_new, &mut self.k[6]);
            self.rhs_evals += 1;
            // the local error estimate goes into tmp
            combo!(self.tmp; E1 => 0, E3 => 2, E4 => 3, E5 => 4, E6 => 5, E7 => 6);
            let mut err_sq = 0.0;
            for ((e, &y0), y1) in self.tmp.iter().zip(y.iter()).zip(&self.y_new) {
                let sc = c.atol + c.rtol * y0.norm_sqr().max(y1.norm_sqr()).sqrt();
                err_sq += (*e - y0).norm_sqr() / (sc * sc);
            }
            let err = (err_sq / n as f64).sqrt();
            if err <= 1.0 {
                *t = if last { t_end } else { *t + h };
                y.copy_from_slice(&self.y_new);
                // after_step only applies rounding-level corrections, so the
                // last stage is reused as the next first stage.
                after_step(*t, y);
                self.k.swap(0, 6);
                self.fsal_valid = true;
                self.accepted += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let h_proposed = self.h.min(c.max_step);
                self.h = if last && h < h_proposed { h_proposed } else { h * factor };
            } else {
                self.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if self.h < c.min_step {
                    return Advance::StepUnderflow { t: *t, h: self.h };
                }
            }
        }
        Advance::Reached
    }
}
