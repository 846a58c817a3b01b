//! Stochastic-quantization simulators with exact stationary oracles.
//!
//! Two layers:
//! 1. Decoupled mode-level SDE on a periodic Euclidean time lattice. The
//!    drift for mode n is `D[α]ₙ(t_k) = −(∂_t α)ₙ(t_k) − nΩ αₙ(t_k)` with
//!    centered periodic differences — the Wick-rotated convention whose
//!    linearization is strictly stable. Correctness is defined by the exact
//!    Lyapunov oracle of the implemented system, not by any sign convention:
//!    in the lattice-Fourier basis the drift is diagonal, `A = −(iω̃ + nΩ)`
//!    with `ω̃ = sin(ωΔt)/Δt`, the stationary covariance is
//!    `2ℓħ²n / (2·Re(iω̃+nΩ)) = ℓħ²/Ω` for every mode, and each lattice
//!    mode relaxes along the auxiliary time τ at exactly `nΩ` (the decay
//!    measurement lives on the τ axis; the equal-τ lattice correlator is
//!    white).
//! 2. Constrained matrix Langevin: Euler–Maruyama on `Z` with Wick-damped
//!    drift `−ΩZ`, matrix noise `⟨ΞᵢⱼΞ*ₖₗ⟩ = 2ℓħ² δᵢₖδⱼₗ dτ`, multiplier
//!    projection of the full raw velocity at the pre-step state, and one
//!    Newton re-projection onto the constraint surface after each step.
//!    Δ-singular states reject the step and halve Δτ up to a retry limit.

use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::{
    annihilation_matrix, build_annihilation, constraint_residual, gauge_residual, kept_residuals,
    mode_coefficient, solve_displacement, solve_multipliers, ComplexMatrixState, MatrixError,
};
use crate::noise::NoiseStream;
use crate::params::PhysParams;
use crate::{C64, CMat};

#[derive(Debug, Error)]
pub enum LangevinError {
    #[error("lattice must have M >= 1 and dt > 0")]
    BadLattice,
    #[error("step dtau = {dtau} exceeds the stability bound {bound}")]
    StepTooLarge { dtau: f64, bound: f64 },
    #[error("trajectory norm exploded at step {0}")]
    Unstable(usize),
    #[error("drift is not stable (mode n = {0})")]
    UnstableDrift(usize),
    #[error("matrix dimension {0} exceeds dense-solver budget {1}")]
    TooLarge(usize, usize),
    #[error("step rejected {0} times; retry limit reached")]
    RetryLimit(usize),
    #[error("matrix-model failure: {0}")]
    Matrix(#[from] MatrixError),
}

/// Periodic Euclidean physical-time lattice.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanLattice {
    pub m: usize,
    pub dt: f64,
    pub periodic: bool,
}

impl EuclideanLattice {
    pub fn new(m: usize, dt: f64) -> Result<Self, LangevinError> {
        if m == 0 || !(dt > 0.0) {
            return Err(LangevinError::BadLattice);
        }
        Ok(EuclideanLattice {
            m,
            dt,
            periodic: true,
        })
    }

    /// Centered-periodic derivative eigenvalue for lattice-Fourier index k:
    /// `i·sin(2πk/M)/Δt`.
    pub fn derivative_eigenvalue(&self, k: usize) -> C64 {
        let omega = 2.0 * std::f64::consts::PI * k as f64 / self.m as f64;
        C64::new(0.0, omega.sin() / self.dt)
    }
}

/// Drift of mode n on the lattice: `−(∂_t α) − nΩ α`, centered periodic
/// differences.
pub fn mode_drift(alpha: &[C64], n: usize, lattice: &EuclideanLattice, params: &PhysParams) -> Vec<C64> {
    let m = lattice.m;
    let damp = n as f64 * params.omega;
    (0..m)
        .map(|k| {
            let deriv = if m == 1 {
                C64::new(0.0, 0.0)
            } else {
                let kp = (k + 1) % m;
                let km = (k + m - 1) % m;
                (alpha[kp] - alpha[km]) / (2.0 * lattice.dt)
            };
            -deriv - alpha[k] * damp
        })
        .collect()
}

/// Drift eigenvalue of (mode n, lattice-Fourier k): `−(iω̃ + nΩ)`.
pub fn drift_eigenvalue(
    n: usize,
    k: usize,
    lattice: &EuclideanLattice,
    params: &PhysParams,
) -> C64 {
    -(lattice.derivative_eigenvalue(k) + C64::new(n as f64 * params.omega, 0.0))
}

/// Exact stationary covariance `⟨|α̂ₙₖ|²⟩` of the lattice-Fourier mode:
/// Lyapunov solution `2ℓħ²n / (2·Re(iω̃+nΩ))`.
pub fn lyapunov_oracle(
    n: usize,
    k: usize,
    lattice: &EuclideanLattice,
    params: &PhysParams,
) -> Result<f64, LangevinError> {
    let a = drift_eigenvalue(n, k, lattice, params);
    if a.re >= 0.0 {
        return Err(LangevinError::UnstableDrift(n));
    }
    let noise = 2.0 * params.ell_hbar().powi(2) * n as f64;
    Ok(noise / (-2.0 * a.re))
}

/// Exact stationary covariance of the Euler–Maruyama chain at step `dtau`:
/// `2ℓħ²n·Δτ / (1 − |1+λΔτ|²)`. Converges to [`lyapunov_oracle`] as
/// `Δτ → 0`; at finite Δτ the two differ by a relative `|λ|²Δτ/(2nΩ)`,
/// which is O(1) for lattice-Fourier modes with large `ω̃`.
pub fn lyapunov_oracle_em(
    n: usize,
    k: usize,
    lattice: &EuclideanLattice,
    dtau: f64,
    params: &PhysParams,
) -> Result<f64, LangevinError> {
    let a = drift_eigenvalue(n, k, lattice, params);
    let mult = C64::new(1.0, 0.0) + a * dtau;
    let denom = 1.0 - mult.norm_sqr();
    if denom <= 0.0 {
        return Err(LangevinError::StepTooLarge {
            dtau,
            bound: 2.0 * (-a.re) / a.norm_sqr(),
        });
    }
    Ok(2.0 * params.ell_hbar().powi(2) * n as f64 * dtau / denom)
}

/// Exact magnitude-decay rate of the Euler–Maruyama chain along τ:
/// `−ln|1+λΔτ|/Δτ`, approaching `nΩ` as `Δτ → 0`.
pub fn em_decay_rate(
    n: usize,
    k: usize,
    lattice: &EuclideanLattice,
    dtau: f64,
    params: &PhysParams,
) -> f64 {
    let a = drift_eigenvalue(n, k, lattice, params);
    let mult = C64::new(1.0, 0.0) + a * dtau;
    -mult.norm().ln() / dtau
}

/// Configuration of a mode-level ensemble run.
#[derive(Debug, Clone)]
pub struct ModeSimConfig {
    pub lattice: EuclideanLattice,
    pub n_max: usize,
    pub dtau: f64,
    /// Sampling span after burn-in, in units of 1/Ω.
    pub sample_periods: f64,
    pub trajectories: usize,
    pub seed: u64,
    /// Lattice-Fourier indices probed for covariance and decay.
    pub k_probe: Vec<usize>,
}

/// One measured stationary number with its standard error across
/// trajectories.
#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone)]
pub struct ModeStatistics {
    /// `⟨|α̂ₙₖ|²⟩` keyed by (n, k).
    pub equal_time: Vec<(usize, usize, Measurement)>,
    /// `⟨α₂ α₃*⟩` site-averaged (should vanish).
    pub cross_mode: Measurement,
    /// Fitted τ-decay rate of `⟨α̂ₙₖ(τ) α̂ₙₖ*(τ+s)⟩` keyed by (n, k).
    pub decay_rate: Vec<(usize, usize, f64)>,
    /// Site-0 amplitudes of trajectory 0 at each retained sample.
    pub sample_trajectory: Vec<(f64, Vec<C64>)>,
}

/// Largest admissible Euler–Maruyama step over all (n ≤ n_max, k).
pub fn stability_bound(
    n_max: usize,
    lattice: &EuclideanLattice,
    params: &PhysParams,
) -> f64 {
    let mut bound = f64::INFINITY;
    for n in 1..=n_max {
        for k in 0..lattice.m {
            let a = drift_eigenvalue(n, k, lattice, params);
            bound = bound.min(2.0 * (-a.re) / a.norm_sqr());
        }
    }
    bound
}

/// Euler–Maruyama ensemble simulation of the decoupled mode SDEs.
pub fn mode_simulate(
    cfg: &ModeSimConfig,
    params: &PhysParams,
) -> Result<ModeStatistics, LangevinError> {
    let lattice = cfg.lattice;
    let bound = stability_bound(cfg.n_max, &lattice, params);
    if cfg.dtau >= bound {
        return Err(LangevinError::StepTooLarge {
            dtau: cfg.dtau,
            bound,
        });
    }
    let omega = params.omega;
    let lh2 = params.ell_hbar().powi(2);
    let m = lattice.m;
    let burn = 10.0 / omega;
    let sample_gap = 0.1 / omega;
    let gap_steps = (sample_gap / cfg.dtau).ceil() as usize;
    let n_samples = (cfg.sample_periods / omega / sample_gap).ceil() as usize;
    // Decay correlator lags: up to 2/Ω in sample-gap units.
    let n_lags = 21usize;

    struct TrajStats {
        eq: Vec<f64>,
        cross: C64,
        corr: Vec<C64>,
        traj: Vec<(f64, Vec<C64>)>,
        exploded: Option<usize>,
    }

    let probes: Vec<(usize, usize)> = (1..=cfg.n_max)
        .flat_map(|n| cfg.k_probe.iter().map(move |&k| (n, k)))
        .collect();

    let per_traj: Vec<TrajStats> = (0..cfg.trajectories)
        .into_par_iter()
        .map(|t| {
            let mut rng = NoiseStream::new(cfg.seed, t as u64 + 1);
            let mut alpha: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); m]; cfg.n_max];
            let mut eq = vec![0.0; probes.len()];
            let mut cross = C64::new(0.0, 0.0);
            let mut corr = vec![C64::new(0.0, 0.0); probes.len() * n_lags];
            let mut lag_count = vec![0usize; n_lags];
            let mut history: Vec<Vec<C64>> = Vec::with_capacity(n_lags);
            let mut traj = Vec::new();
            let mut exploded = None;

            let burn_steps = (burn / cfg.dtau).ceil() as usize;
            let total_steps = burn_steps + n_samples * gap_steps;
            let mut samples_taken = 0usize;
            'outer: for step in 0..total_steps {
                for (ni, row) in alpha.iter_mut().enumerate() {
                    let n = ni + 1;
                    let drift = mode_drift(row, n, &lattice, params);
                    let amp = (lh2 * n as f64 * cfg.dtau).sqrt();
                    for k in 0..m {
                        row[k] += drift[k] * cfg.dtau + rng.complex_normal() * amp;
                        if !row[k].re.is_finite() || row[k].norm_sqr() > 1e12 {
                            exploded = Some(step);
                            break 'outer;
                        }
                    }
                }
                if step >= burn_steps && (step - burn_steps) % gap_steps == 0 {
                    // Fourier amplitudes at the probe indices.
                    let hat: Vec<C64> = probes
                        .iter()
                        .map(|&(n, k)| {
                            let mut acc = C64::new(0.0, 0.0);
                            for (s, &v) in alpha[n - 1].iter().enumerate() {
                                let ph =
                                    -2.0 * std::f64::consts::PI * (k * s) as f64 / m as f64;
                                acc += v * C64::from_polar(1.0, ph);
                            }
                            acc / (m as f64).sqrt()
                        })
                        .collect();
                    for (i, h) in hat.iter().enumerate() {
                        eq[i] += h.norm_sqr();
                    }
                    if cfg.n_max >= 3 {
                        let mut acc = C64::new(0.0, 0.0);
                        for s in 0..m {
                            acc += alpha[1][s] * alpha[2][s].conj();
                        }
                        cross += acc / m as f64;
                    }
                    history.push(hat.clone());
                    if history.len() > n_lags {
                        history.remove(0);
                    }
                    for (lag, past) in history.iter().rev().enumerate() {
                        lag_count[lag] += 1;
                        for (i, h) in hat.iter().enumerate() {
                            corr[i * n_lags + lag] += past[i] * h.conj();
                        }
                    }
                    if t == 0 {
                        let tau = (step - burn_steps) as f64 * cfg.dtau;
                        traj.push((tau, alpha.iter().map(|row| row[0]).collect()));
                    }
                    samples_taken += 1;
                }
            }
            let norm = samples_taken.max(1) as f64;
            for v in &mut eq {
                *v /= norm;
            }
            cross /= norm;
            for i in 0..probes.len() {
                for lag in 0..n_lags {
                    let c = lag_count[lag].max(1) as f64;
                    corr[i * n_lags + lag] /= c;
                }
            }
            TrajStats {
                eq,
                cross,
                corr,
                traj,
                exploded,
            }
        })
        .collect();

    if let Some(step) = per_traj.iter().filter_map(|t| t.exploded).next() {
        return Err(LangevinError::Unstable(step));
    }

    let nt = cfg.trajectories as f64;
    let mut equal_time = Vec::new();
    for (i, &(n, k)) in probes.iter().enumerate() {
        let vals: Vec<f64> = per_traj.iter().map(|t| t.eq[i]).collect();
        let mean = vals.iter().sum::<f64>() / nt;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nt - 1.0).max(1.0);
        equal_time.push((
            n,
            k,
            Measurement {
                mean,
                std_err: (var / nt).sqrt(),
            },
        ));
    }
    let cross_vals: Vec<C64> = per_traj.iter().map(|t| t.cross).collect();
    let cross_mean = cross_vals.iter().sum::<C64>() / nt;
    let cross_var = cross_vals
        .iter()
        .map(|v| (v - cross_mean).norm_sqr())
        .sum::<f64>()
        / (nt - 1.0).max(1.0);
    let cross_mode = Measurement {
        mean: cross_mean.norm(),
        std_err: (cross_var / nt).sqrt(),
    };

    // Decay rates: linear fit of ln|corr| against lag·sample_gap.
    let mut decay_rate = Vec::new();
    // Fit only lags with decay ≥ e⁻¹ or so: beyond that the |·| of the
    // noisy ensemble mean flattens the slope.
    let fit_lags = (n_lags / 2 + 1).max(2);
    for (i, &(n, k)) in probes.iter().enumerate() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for lag in 0..fit_lags {
            let c: C64 = per_traj.iter().map(|t| t.corr[i * n_lags + lag]).sum();
            let mag = c.norm();
            if mag <= 0.0 {
                break;
            }
            xs.push(lag as f64 * sample_gap);
            ys.push(mag.ln());
        }
        let np = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);
        decay_rate.push((n, k, -slope));
    }

    let sample_trajectory = per_traj
        .into_iter()
        .next()
        .map(|t| t.traj)
        .unwrap_or_default();

    Ok(ModeStatistics {
        equal_time,
        cross_mode,
        decay_rate,
        sample_trajectory,
    })
}

// ---------------------------------------------------------------------------
// Constrained matrix Langevin
// ---------------------------------------------------------------------------

/// Mode projection of a matrix noise draw:
/// `dξ_m = m·c_{m−1}·tr(a^{m−1} Ξ)` for `m = 1..N−1` (the entry for mode m
/// couples to the `a†^{m−1}` direction of `Z`'s expansion).
pub fn project_noise(xi: &CMat, params: &PhysParams) -> Result<Vec<C64>, LangevinError> {
    let n = xi.nrows();
    if n != xi.ncols() {
        return Err(LangevinError::Matrix(MatrixError::DimensionMismatch(
            n,
            xi.ncols(),
        )));
    }
    let a = annihilation_matrix(n, params)?;
    let mut out = Vec::with_capacity(n - 1);
    let mut apow = CMat::identity(n, n);
    for m in 1..n {
        // apow = a^{m−1}
        let c = mode_coefficient(m - 1, n, params);
        let tr = (&apow * xi).trace();
        out.push(tr * (m as f64) * c);
        apow = &apow * &a;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MatrixSimConfig {
    pub big_n: usize,
    pub steps: usize,
    pub dtau: f64,
    pub seed: u64,
    /// Scale on the noise amplitude (0 disables noise).
    pub noise_scale: f64,
    /// Residual tolerance enforced by the Newton re-projection.
    pub tolerance: f64,
    pub retry_limit: usize,
}

impl MatrixSimConfig {
    pub fn new(big_n: usize, steps: usize, dtau: f64, seed: u64) -> Self {
        MatrixSimConfig {
            big_n,
            steps,
            dtau,
            seed,
            noise_scale: 1.0,
            tolerance: 1e-10,
            retry_limit: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixSimReport {
    pub final_state: ComplexMatrixState,
    /// Max kept-component constraint residual seen after projection.
    pub max_constraint_residual: f64,
    /// Max kept-component gauge residual seen after projection.
    pub max_gauge_residual: f64,
    /// Max full-matrix residuals (diagnostic; includes the free components).
    pub max_constraint_full: f64,
    pub max_gauge_full: f64,
    pub dtau_final: f64,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
}

/// Constrained matrix Langevin (Euler–Maruyama with multiplier projection).
pub fn matrix_simulate(
    cfg: &MatrixSimConfig,
    params: &PhysParams,
) -> Result<MatrixSimReport, LangevinError> {
    const BUDGET: usize = 8;
    if cfg.big_n > BUDGET {
        return Err(LangevinError::TooLarge(cfg.big_n, BUDGET));
    }
    let mut state = build_annihilation(cfg.big_n, params)?;
    let n = cfg.big_n;
    let lh2 = params.ell_hbar().powi(2);
    let omega = params.omega;
    let mut rng = NoiseStream::new(cfg.seed, 0);
    let mut dtau = cfg.dtau;
    let mut rejected = 0usize;
    let mut newton_total = 0usize;
    let mut max_c = 0.0f64;
    let mut max_g = 0.0f64;
    let mut max_cf = 0.0f64;
    let mut max_gf = 0.0f64;

    let mut step = 0usize;
    while step < cfg.steps {
        let amp = cfg.noise_scale * (lh2 * dtau).sqrt();
        // complex_normal has E|z|² = 2, giving ⟨|Ξᵢⱼ|²⟩ = 2ℓħ²dτ.
        let xi = CMat::from_fn(n, n, |_, _| rng.complex_normal() * amp);
        let raw = &state.z * C64::new(-omega, 0.0) + &xi * C64::new(1.0 / dtau, 0.0);
        match solve_multipliers(&state, &raw) {
            Ok(sol) => {
                let v = sol.corrected_velocity(&state, &raw);
                let mut trial = state.clone();
                trial.z += v * C64::new(dtau, 0.0);
                // Newton re-projection onto the constraint surface.
                let mut iters = 0usize;
                loop {
                    let (rc, rg) = kept_residuals(&trial);
                    if rc.max(rg) <= cfg.tolerance || iters >= 4 {
                        break;
                    }
                    let c_res = constraint_residual(&trial);
                    let g_res = gauge_residual(&trial) * C64::new(0.0, 1.0);
                    let dz =
                        solve_displacement(&trial, &(&c_res * C64::new(-0.5, 0.0)), &(-g_res))?;
                    trial.z += dz;
                    iters += 1;
                }
                newton_total += iters;
                let (rc, rg) = kept_residuals(&trial);
                max_c = max_c.max(rc);
                max_g = max_g.max(rg);
                max_cf = max_cf.max(crate::matrix::max_abs(&constraint_residual(&trial)));
                max_gf = max_gf.max(crate::matrix::max_abs(&gauge_residual(&trial)));
                state = trial;
                step += 1;
            }
            Err(MatrixError::DeltaSingular { .. }) => {
                rejected += 1;
                if rejected > cfg.retry_limit {
                    return Err(LangevinError::RetryLimit(rejected));
                }
                dtau *= 0.5;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(MatrixSimReport {
        final_state: state,
        max_constraint_residual: max_c,
        max_gauge_residual: max_g,
        max_constraint_full: max_cf,
        max_gauge_full: max_gf,
        dtau_final: dtau,
        rejected_steps: rejected,
        newton_iterations: newton_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{herm, max_abs};

    fn unit() -> PhysParams {
        PhysParams::unit()
    }

    #[test]
    fn drift_on_constant_field() {
        let p = unit();
        let lat = EuclideanLattice::new(8, 0.3).unwrap();
        let alpha = vec![C64::new(2.0, -1.0); 8];
        for n in [1usize, 3] {
            let d = mode_drift(&alpha, n, &lat, &p);
            for v in d {
                let expect = alpha[0] * (-(n as f64));
                assert!((v - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn drift_fourier_eigenvalue() {
        let p = unit();
        let m = 16;
        let lat = EuclideanLattice::new(m, 0.25).unwrap();
        for k in [1usize, 3, 7] {
            let alpha: Vec<C64> = (0..m)
                .map(|s| {
                    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k * s) as f64 / m as f64)
                })
                .collect();
            let n = 2;
            let d = mode_drift(&alpha, n, &lat, &p);
            let lam = drift_eigenvalue(n, k, &lat, &p);
            for (s, v) in d.iter().enumerate() {
                assert!((v - alpha[s] * lam).norm() < 1e-12, "k={k} s={s}");
            }
        }
    }

    #[test]
    fn drift_spectrum_strictly_stable() {
        let p = unit();
        let lat = EuclideanLattice::new(64, 0.1).unwrap();
        for n in 1..=6usize {
            for k in 0..64 {
                let lam = drift_eigenvalue(n, k, &lat, &p);
                assert!(lam.re < 0.0, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn lyapunov_oracle_values() {
        let p = unit();
        let m1 = EuclideanLattice::new(1, 1.0).unwrap();
        assert!((lyapunov_oracle(1, 0, &m1, &p).unwrap() - 1.0).abs() < 1e-15);
        let m2 = EuclideanLattice::new(2, 0.7).unwrap();
        for k in 0..2 {
            for n in 1..=3 {
                let c = lyapunov_oracle(n, k, &m2, &p).unwrap();
                // sin(πk) = 0 on the 2-point lattice: both Fourier modes sit
                // at Re = nΩ, so C = 2ℓħ²n/(2nΩ) = ℓħ²/Ω.
                assert!((c - 1.0).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn single_mode_m1_stationary_variance() {
        let p = unit();
        let cfg = ModeSimConfig {
            lattice: EuclideanLattice::new(1, 1.0).unwrap(),
            n_max: 1,
            dtau: 0.02,
            sample_periods: 40.0,
            trajectories: 400,
            seed: 11,
            k_probe: vec![0],
        };
        let stats = mode_simulate(&cfg, &p).unwrap();
        let (_, _, m) = stats.equal_time[0];
        assert!(
            (m.mean - 1.0).abs() < 0.05,
            "⟨|α₁|²⟩ = {} ± {}",
            m.mean,
            m.std_err
        );
        assert!((m.mean - 1.0).abs() < 3.0 * m.std_err.max(0.01));
    }

    #[test]
    fn cross_mode_vanishes() {
        let p = unit();
        let cfg = ModeSimConfig {
            lattice: EuclideanLattice::new(4, 0.5).unwrap(),
            n_max: 3,
            dtau: 0.02,
            sample_periods: 30.0,
            trajectories: 200,
            seed: 5,
            k_probe: vec![0],
        };
        let stats = mode_simulate(&cfg, &p).unwrap();
        assert!(
            stats.cross_mode.mean < 4.0 * stats.cross_mode.std_err.max(0.02),
            "⟨α₂α₃*⟩ = {} ± {}",
            stats.cross_mode.mean,
            stats.cross_mode.std_err
        );
    }

    #[test]
    fn covariance_matches_oracle_m64() {
        let p = unit();
        let lat = EuclideanLattice::new(64, 0.1).unwrap();
        let cfg = ModeSimConfig {
            lattice: lat,
            n_max: 2,
            dtau: 0.005,
            sample_periods: 30.0,
            trajectories: 96,
            seed: 23,
            k_probe: vec![0, 1, 16],
        };
        let stats = mode_simulate(&cfg, &p).unwrap();
        for &(n, k, m) in &stats.equal_time {
            // The chain's exact stationary covariance is the discrete
            // Lyapunov solution; it deviates from the continuum oracle by
            // |λ|²Δτ/(2nΩ) (large at k=16 where ω̃ = 1/Δt).
            let oracle = lyapunov_oracle_em(n, k, &lat, cfg.dtau, &p).unwrap();
            assert!(
                (m.mean - oracle).abs() < 0.01 * oracle + 3.0 * m.std_err,
                "n={n} k={k}: {} vs {oracle} (se {})",
                m.mean,
                m.std_err
            );
            // Low-frequency modes also match the continuum value ℓħ²/Ω.
            if k <= 1 {
                let cont = lyapunov_oracle(n, k, &lat, &p).unwrap();
                assert!(
                    (m.mean - cont).abs() < 0.01 * cont + 3.0 * m.std_err,
                    "continuum n={n} k={k}: {} vs {cont}",
                    m.mean
                );
            }
        }
    }

    #[test]
    fn temporal_decay_rates() {
        let p = unit();
        let lat = EuclideanLattice::new(64, 0.1).unwrap();
        let cfg = ModeSimConfig {
            lattice: lat,
            n_max: 2,
            dtau: 0.005,
            sample_periods: 60.0,
            trajectories: 128,
            seed: 31,
            k_probe: vec![0, 2],
        };
        let stats = mode_simulate(&cfg, &p).unwrap();
        for &(n, k, rate) in &stats.decay_rate {
            let expect = n as f64 * p.omega;
            assert!(
                (rate - expect).abs() < 0.05 * expect,
                "n={n} k={k}: rate {rate} vs {expect}"
            );
            // And the chain-exact rate is matched more tightly.
            let em = em_decay_rate(n, k, &cfg.lattice, cfg.dtau, &p);
            assert!(
                (rate - em).abs() < 0.04 * em,
                "n={n} k={k}: rate {rate} vs em {em}"
            );
        }
    }

    #[test]
    fn step_bound_enforced() {
        let p = unit();
        let cfg = ModeSimConfig {
            lattice: EuclideanLattice::new(8, 0.05).unwrap(),
            n_max: 4,
            dtau: 1.0,
            sample_periods: 1.0,
            trajectories: 1,
            seed: 1,
            k_probe: vec![0],
        };
        assert!(matches!(
            mode_simulate(&cfg, &p),
            Err(LangevinError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn project_noise_mode_selectivity_and_linearity() {
        let p = unit();
        let n = 5;
        let a = annihilation_matrix(n, &p).unwrap();
        // Ξ ∝ a† excites exactly the m = 2 entry (the a†¹ direction).
        let xi = a.adjoint() / C64::new(p.ell_theta() * 2f64.sqrt(), 0.0);
        let d = project_noise(&xi, &p).unwrap();
        assert!(d[1].norm() > 0.1, "a† projection vanished: {:?}", d);
        for (m, v) in d.iter().enumerate() {
            if m != 1 {
                assert!(v.norm() < 1e-12, "mode {} leak: {v}", m + 1);
            }
        }
        // Linearity.
        let mut rng = NoiseStream::new(3, 0);
        let x1 = CMat::from_fn(n, n, |_, _| rng.complex_normal());
        let x2 = CMat::from_fn(n, n, |_, _| rng.complex_normal());
        let lin = project_noise(&(&x1 * C64::new(2.0, 0.0) + &x2 * C64::new(0.0, 1.5)), &p).unwrap();
        let d1 = project_noise(&x1, &p).unwrap();
        let d2 = project_noise(&x2, &p).unwrap();
        for i in 0..n - 1 {
            let expect = d1[i] * C64::new(2.0, 0.0) + d2[i] * C64::new(0.0, 1.5);
            assert!((lin[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn project_noise_covariance() {
        let p = unit();
        let n = 4;
        let mut rng = NoiseStream::new(17, 0);
        let draws = 100_000usize;
        let mut cov = vec![vec![C64::new(0.0, 0.0); n - 1]; n - 1];
        for _ in 0..draws {
            // Unit-variance-pair entries: ⟨|Ξᵢⱼ|²⟩ = 2ℓħ².
            let xi = CMat::from_fn(n, n, |_, _| rng.complex_normal() * p.ell_hbar());
            let d = project_noise(&xi, &p).unwrap();
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    cov[i][j] += d[i] * d[j].conj();
                }
            }
        }
        let lh2 = p.ell_hbar().powi(2);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let c = cov[i][j] / draws as f64;
                if i == j {
                    let expect = 2.0 * lh2 * (i + 1) as f64;
                    assert!(
                        (c.re - expect).abs() < 0.02 * expect,
                        "mode {}: {} vs {expect}",
                        i + 1,
                        c.re
                    );
                } else {
                    assert!(c.norm() < 0.05, "cross ({i},{j}): {c}");
                }
            }
        }
    }

    #[test]
    fn zero_noise_fixed_point() {
        let p = unit();
        let mut cfg = MatrixSimConfig::new(4, 1000, 1e-3, 7);
        cfg.noise_scale = 0.0;
        let report = matrix_simulate(&cfg, &p).unwrap();
        assert!(report.max_constraint_residual < 1e-10);
        assert!(report.max_gauge_residual < 1e-10);
        // Z stays at a up to scale decay (Wick drift contracts radially but
        // the projection cancels it at the fixed point: v = 0 at Z = a).
        let a = annihilation_matrix(4, &p).unwrap();
        assert!(max_abs(&(&report.final_state.z - &a)) < 1e-8);
    }

    #[test]
    fn noisy_run_preserves_constraints() {
        let p = unit();
        let cfg = MatrixSimConfig::new(4, 2000, 5e-4, 13);
        let report = matrix_simulate(&cfg, &p).unwrap();
        assert!(
            report.max_constraint_residual < 1e-8,
            "constraint {}",
            report.max_constraint_residual
        );
        assert!(
            report.max_gauge_residual < 1e-8,
            "gauge {}",
            report.max_gauge_residual
        );
    }

    #[test]
    fn projected_velocity_first_order_consistency() {
        // v(ε) for Z = a + εV is linear in ε up to O(ε²): Richardson check.
        let p = unit();
        let n = 4;
        let a = annihilation_matrix(n, &p).unwrap();
        let mut rng = NoiseStream::new(41, 0);
        let dir = {
            let g = CMat::from_fn(n, n, |_, _| rng.complex_normal());
            herm(&g)
        };
        let v_at = |eps: f64| -> CMat {
            let mut state = build_annihilation(n, &p).unwrap();
            state.z = &a + &dir * C64::new(eps, 0.0);
            let raw = &state.z * C64::new(0.0, -p.omega);
            let sol = solve_multipliers(&state, &raw).unwrap();
            sol.corrected_velocity(&state, &raw)
        };
        let v0 = v_at(0.0);
        assert!(max_abs(&v0) < 1e-10, "fixed point not stationary");
        let e = 1e-4;
        let v1 = &v_at(e) - &v0;
        let v2 = &v_at(2.0 * e) - &v0;
        let defect = &v2 - &v1 * C64::new(2.0, 0.0);
        assert!(
            max_abs(&defect) < 50.0 * e * e * max_abs(&v1).max(1.0) / e,
            "nonlinearity too large: {}",
            max_abs(&defect)
        );
        // The linear response itself is nonzero.
        assert!(max_abs(&v1) > 1e-6);
    }

    #[test]
    fn dimension_budget_enforced() {
        let p = unit();
        let cfg = MatrixSimConfig::new(9, 10, 1e-3, 1);
        assert!(matches!(
            matrix_simulate(&cfg, &p),
            Err(LangevinError::TooLarge(9, 8))
        ));
    }
}
