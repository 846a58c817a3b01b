//! Adaptive embedded Runge–Kutta integration (Dormand–Prince 5(4)).
//!
//! Shared by the Calogero N-body integrator and the Kirchhoff point-vortex
//! stepper. The right-hand side may reject a state (e.g. a near-collision
//! guard); rejection inside a trial step shrinks the step instead of
//! aborting, and only a step-size underflow is fatal.

use thiserror::Error;

use crate::RVec;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}: {reason}")]
    StepUnderflow { t: f64, reason: String },
    #[error("step budget exhausted ({0} steps)")]
    StepBudget(usize),
    #[error("right-hand side rejected the initial state: {0}")]
    BadInitialState(String),
}

/// Outcome of one right-hand-side evaluation.
pub type RhsResult = Result<RVec, String>;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Initial trial step as a fraction of the integration interval.
    pub initial_step_fraction: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_steps: 1_000_000,
            initial_step_fraction: 1e-3,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `dy/dt = rhs(t, y)` from `t0` to `t1`, returning the state at
/// each requested sample time (which must be increasing and within
/// `[t0, t1]`). The state at `t1` is always appended if not already sampled.
pub fn integrate<F>(
    rhs: F,
    y0: &RVec,
    t0: f64,
    t1: f64,
    sample_times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<(f64, RVec)>, OdeError>
where
    F: Fn(f64, &RVec) -> RhsResult,
{
    let mut targets: Vec<f64> = sample_times.to_vec();
    if targets.last().map_or(true, |&t| t < t1) {
        targets.push(t1);
    }
    let mut out = Vec::with_capacity(targets.len());

    let mut t = t0;
    let mut y = y0.clone();
    let mut k0 = rhs(t, &y).map_err(OdeError::BadInitialState)?;
    let mut h = (t1 - t0) * opts.initial_step_fraction;
    let mut steps = 0usize;

    for &target in &targets {
        if target < t - 1e-15 {
            continue;
        }
        while t < target {
            if steps >= opts.max_steps {
                return Err(OdeError::StepBudget(steps));
            }
            steps += 1;
            let h_trial = h.min(target - t);
            match try_step(&rhs, t, &y, &k0, h_trial, opts) {
                StepOutcome::Accept {
                    y_new,
                    k_new,
                    h_next,
                } => {
                    t += h_trial;
                    y = y_new;
                    k0 = k_new;
                    h = h_next;
                }
                StepOutcome::Shrink(h_next) => {
                    if h_next < 1e-14 * (t1 - t0).abs() {
                        return Err(OdeError::StepUnderflow {
                            t,
                            reason: "error control demanded an unresolvably small step"
                                .to_string(),
                        });
                    }
                    h = h_next;
                }
                StepOutcome::Rejected(reason, h_next) => {
                    if h_next < 1e-14 * (t1 - t0).abs() {
                        return Err(OdeError::StepUnderflow { t, reason });
                    }
                    h = h_next;
                }
            }
        }
        out.push((t, y.clone()));
    }
    Ok(out)
}

enum StepOutcome {
    Accept {
        y_new: RVec,
        k_new: RVec,
        h_next: f64,
    },
    /// Error too large; retry with the suggested smaller step.
    Shrink(f64),
    /// RHS rejected an intermediate state; retry with a smaller step.
    Rejected(String, f64),
}

fn try_step<F>(rhs: &F, t: f64, y: &RVec, k0: &RVec, h: f64, opts: &OdeOptions) -> StepOutcome
where
    F: Fn(f64, &RVec) -> RhsResult,
{
    let c = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    let mut k: Vec<RVec> = Vec::with_capacity(7);
    k.push(k0.clone());
    for i in 0..6 {
        let mut yi = y.clone();
        for (j, kj) in k.iter().enumerate() {
            yi += kj * (h * A[i][j]);
        }
        match rhs(t + c[i + 1] * h, &yi) {
            Ok(ki) => k.push(ki),
            Err(reason) => return StepOutcome::Rejected(reason, h * 0.25),
        }
    }

    let mut y5 = y.clone();
    let mut y4 = y.clone();
    for (j, kj) in k.iter().enumerate() {
        y5 += kj * (h * B5[j]);
        y4 += kj * (h * B4[j]);
    }

    // Weighted RMS error against the mixed tolerance.
    let mut err_sq = 0.0;
    for i in 0..y.len() {
        let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y5[i].abs());
        let e = (y5[i] - y4[i]) / scale;
        err_sq += e * e;
    }
    let err = (err_sq / y.len() as f64).sqrt();

    if err <= 1.0 {
        let grow = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).min(5.0)
        };
        let k_new = k.pop().expect("seven stages");
        StepOutcome::Accept {
            y_new: y5,
            k_new,
            h_next: h * grow,
        }
    } else {
        StepOutcome::Shrink(h * (0.9 * err.powf(-0.2)).max(0.1))
    }
}
