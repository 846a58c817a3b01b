//! Direct N-body integration of the Calogero system in a harmonic trap.
//!
//! Serves as the independent oracle for the matrix model: eigenvalues of the
//! exactly rotated matrix `X(t)` must reproduce these trajectories.
//!
//! Equations of motion: `ẋᵢ = pᵢ/m`, `ṗᵢ = −mΩ²xᵢ + Σ_{j≠i} 2θ²/(m(xᵢ−xⱼ)³)`.
//! The conserved energy is `Σ(pᵢ²/2m + mΩ²xᵢ²/2) + Σ_{i<j} θ²/(m(xᵢ−xⱼ)²)`;
//! note the pair sum runs over unordered pairs — the ordered-pair variant is
//! not conserved by these equations (see `tests::pair_count_diagnostic`).

use thiserror::Error;

use crate::ode::{self, OdeOptions};
use crate::params::PhysParams;
use crate::RVec;

#[derive(Debug, Error)]
pub enum CalogeroError {
    #[error("positions must be strictly increasing and distinct")]
    NotOrdered,
    #[error("coincident positions (minimum separation {0:.3e})")]
    Coincident(f64),
    #[error("center of mass/momentum must vanish (got {0:.3e})")]
    CenterOfMass(f64),
    #[error("integration failed: {0}")]
    Integration(#[from] ode::OdeError),
}

/// Positions and momenta of the N-body system.
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub x: RVec,
    pub p: RVec,
    pub params: PhysParams,
}

impl ParticleState {
    /// Validate ordering and (for N > 1) the fixed center of mass.
    pub fn new(x: RVec, p: RVec, params: PhysParams) -> Result<Self, CalogeroError> {
        let n = x.len();
        for i in 1..n {
            if x[i] <= x[i - 1] {
                return Err(CalogeroError::NotOrdered);
            }
        }
        if n > 1 {
            let scale = x.amax().max(1.0);
            let com = x.sum() / n as f64;
            let mom = p.sum() / n as f64;
            if com.abs() > 1e-8 * scale || mom.abs() > 1e-8 * p.amax().max(1.0) {
                return Err(CalogeroError::CenterOfMass(com.abs().max(mom.abs())));
            }
        }
        Ok(ParticleState { x, p, params })
    }

    fn pack(&self) -> RVec {
        let n = self.x.len();
        let mut y = RVec::zeros(2 * n);
        y.rows_mut(0, n).copy_from(&self.x);
        y.rows_mut(n, n).copy_from(&self.p);
        y
    }

    fn unpack(y: &RVec, params: PhysParams) -> ParticleState {
        let n = y.len() / 2;
        ParticleState {
            x: y.rows(0, n).into_owned(),
            p: y.rows(n, n).into_owned(),
            params,
        }
    }
}

/// Equations of motion. Returns `(dx/dt, dp/dt)`.
pub fn rhs(state: &ParticleState) -> Result<(RVec, RVec), CalogeroError> {
    rhs_with_trap(state, true)
}

/// Same with the harmonic restoring force optionally removed (diagnostic for
/// the trap-free variant, which fails the matrix correspondence).
pub fn rhs_with_trap(state: &ParticleState, trap: bool) -> Result<(RVec, RVec), CalogeroError> {
    let n = state.x.len();
    let m = state.params.m;
    let omega = state.params.omega;
    let theta = state.params.theta;
    let min_sep = min_separation(&state.x);
    if n > 1 && min_sep < 1e-10 {
        return Err(CalogeroError::Coincident(min_sep));
    }
    let dx = &state.p / m;
    let mut dp = RVec::zeros(n);
    for i in 0..n {
        if trap {
            dp[i] -= m * omega * omega * state.x[i];
        }
        for j in 0..n {
            if j != i {
                let d = state.x[i] - state.x[j];
                dp[i] += 2.0 * theta * theta / (m * d * d * d);
            }
        }
    }
    Ok((dx, dp))
}

/// Conserved energy (unordered pair sum).
pub fn hamiltonian(state: &ParticleState) -> Result<f64, CalogeroError> {
    let n = state.x.len();
    let m = state.params.m;
    let omega = state.params.omega;
    let theta = state.params.theta;
    if n > 1 && min_separation(&state.x) < 1e-10 {
        return Err(CalogeroError::Coincident(min_separation(&state.x)));
    }
    let mut h = 0.0;
    for i in 0..n {
        h += state.p[i] * state.p[i] / (2.0 * m) + 0.5 * m * omega * omega * state.x[i] * state.x[i];
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let d = state.x[i] - state.x[j];
            h += theta * theta / (m * d * d);
        }
    }
    Ok(h)
}

fn min_separation(x: &RVec) -> f64 {
    let n = x.len();
    let mut min = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            min = min.min((x[i] - x[j]).abs());
        }
    }
    min
}

/// One sampled trajectory point.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: ParticleState,
}

/// Adaptive integration to `t_final`, sampling at the provided times.
/// A per-step collision guard rejects states whose minimum pair separation
/// collapses, shrinking the step before failing outright.
pub fn integrate(
    state: &ParticleState,
    t_final: f64,
    sample_times: &[f64],
    tol: f64,
) -> Result<Vec<TrajectoryPoint>, CalogeroError> {
    let params = state.params;
    let n = state.x.len();
    let guard = 1e-9 * state.x.amax().max(1.0);
    let f = move |_t: f64, y: &RVec| -> ode::RhsResult {
        let s = ParticleState::unpack(y, params);
        if n > 1 && min_separation(&s.x) < guard {
            return Err("near-collision".to_string());
        }
        let (dx, dp) = rhs_with_trap(&s, true).map_err(|e| e.to_string())?;
        let mut out = RVec::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&dx);
        out.rows_mut(n, n).copy_from(&dp);
        Ok(out)
    };
    let opts = OdeOptions {
        abs_tol: tol,
        rel_tol: tol,
        ..OdeOptions::default()
    };
    let raw = ode::integrate(f, &state.pack(), 0.0, t_final, sample_times, &opts)?;
    Ok(raw
        .into_iter()
        .map(|(t, y)| TrajectoryPoint {
            t,
            state: ParticleState::unpack(&y, params),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PhysParams;

    fn unit() -> PhysParams {
        PhysParams::unit()
    }

    fn centered(mut xs: Vec<f64>) -> RVec {
        let n = xs.len() as f64;
        let com: f64 = xs.iter().sum::<f64>() / n;
        for x in &mut xs {
            *x -= com;
        }
        RVec::from_vec(xs)
    }

    #[test]
    fn single_particle_is_harmonic() {
        let p = unit();
        let s = ParticleState::new(
            RVec::from_vec(vec![0.4]),
            RVec::from_vec(vec![0.3]),
            p,
        )
        .unwrap();
        let samples: Vec<f64> = (1..=20).map(|i| i as f64 * 0.3).collect();
        let traj = integrate(&s, 6.0, &samples, 1e-11).unwrap();
        for pt in traj {
            let expect = 0.4 * pt.t.cos() + 0.3 * pt.t.sin();
            assert!((pt.state.x[0] - expect).abs() < 1e-9, "t = {}", pt.t);
        }
    }

    #[test]
    fn two_body_rhs_direct_substitution() {
        let p = unit();
        let s = ParticleState::new(
            RVec::from_vec(vec![-0.5, 0.5]),
            RVec::zeros(2),
            p,
        )
        .unwrap();
        let (dx, dp) = rhs(&s).unwrap();
        assert_eq!(dx[0], 0.0);
        // particle 2 at +d/2 with d = 1: −mΩ²d/2 + 2θ²/(m d³).
        assert!((dp[1] - (-0.5 + 2.0)).abs() < 1e-14);
        assert!((dp[0] - (0.5 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn two_body_equilibrium() {
        let p = unit();
        // mΩ²·d/2 = 2θ²/(m d³) → d = 2^(3/4) θ^... with unit params d⁴ = 4.
        let d = 4f64.powf(0.25);
        let s = ParticleState::new(
            RVec::from_vec(vec![-d / 2.0, d / 2.0]),
            RVec::zeros(2),
            p,
        )
        .unwrap();
        let (_, dp) = rhs(&s).unwrap();
        assert!(dp.amax() < 1e-14);
    }

    #[test]
    fn energy_value_and_conservation() {
        let p = unit();
        let s = ParticleState::new(
            RVec::from_vec(vec![-1.0, 1.0]),
            RVec::zeros(2),
            p,
        )
        .unwrap();
        // Unordered-pair convention: 1 + 1/4.
        assert!((hamiltonian(&s).unwrap() - 1.25).abs() < 1e-14);

        let s = ParticleState::new(
            centered(vec![-1.4, -0.3, 0.5, 1.0]),
            centered(vec![0.3, -0.2, 0.4, -0.5]),
            p,
        )
        .unwrap();
        let h0 = hamiltonian(&s).unwrap();
        let period = 2.0 * std::f64::consts::PI;
        let traj = integrate(&s, 10.0 * period, &[], 1e-11).unwrap();
        let hf = hamiltonian(&traj.last().unwrap().state).unwrap();
        assert!((hf - h0).abs() / h0.abs() < 1e-8, "drift {}", (hf - h0) / h0);
    }

    #[test]
    fn isochronous_periodicity() {
        let p = unit();
        let s = ParticleState::new(
            centered(vec![-1.1, 0.2, 0.9]),
            centered(vec![0.4, -0.1, -0.3]),
            p,
        )
        .unwrap();
        let period = 2.0 * std::f64::consts::PI / p.omega;
        let traj = integrate(&s, period, &[], 1e-11).unwrap();
        let end = &traj.last().unwrap().state;
        for i in 0..3 {
            assert!((end.x[i] - s.x[i]).abs() < 1e-6, "x[{i}]");
            assert!((end.p[i] - s.p[i]).abs() < 1e-6, "p[{i}]");
        }
    }

    #[test]
    fn time_reversal() {
        let p = unit();
        let s = ParticleState::new(
            centered(vec![-1.2, -0.1, 1.3]),
            centered(vec![0.5, 0.0, -0.5]),
            p,
        )
        .unwrap();
        let t = 1.7;
        let fwd = integrate(&s, t, &[], 1e-11).unwrap();
        let mid = &fwd.last().unwrap().state;
        let reversed = ParticleState::new(mid.x.clone(), -mid.p.clone(), p).unwrap();
        let back = integrate(&reversed, t, &[], 1e-11).unwrap();
        let end = &back.last().unwrap().state;
        for i in 0..3 {
            assert!((end.x[i] - s.x[i]).abs() < 1e-9);
            assert!((end.p[i] + s.p[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn ordering_preserved() {
        let p = unit();
        let s = ParticleState::new(
            centered(vec![-0.6, -0.35, 0.2, 0.75]),
            centered(vec![1.0, -1.0, 0.8, -0.8]),
            p,
        )
        .unwrap();
        let samples: Vec<f64> = (1..=40).map(|i| i as f64 * 0.15).collect();
        let traj = integrate(&s, 6.0, &samples, 1e-10).unwrap();
        for pt in traj {
            for i in 1..4 {
                assert!(pt.state.x[i] > pt.state.x[i - 1], "crossing at t={}", pt.t);
            }
        }
    }

    #[test]
    fn pair_count_diagnostic() {
        // The ordered-pair ("i≠j") energy double-counts the interaction and
        // is NOT conserved by rhs; the trap-free printed dynamics drifts off
        // the trapped trajectory within a fraction of a period.
        let p = unit();
        let s = ParticleState::new(
            centered(vec![-1.0, 0.1, 0.9]),
            centered(vec![0.2, 0.1, -0.3]),
            p,
        )
        .unwrap();
        let h_ordered = |st: &ParticleState| {
            hamiltonian(st).unwrap()
                + (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .filter(|&(i, j)| i < j)
                    .map(|(i, j)| 1.0 / (st.x[i] - st.x[j]).powi(2))
                    .sum::<f64>()
        };
        let e0 = h_ordered(&s);
        let traj = integrate(&s, 1.0, &[], 1e-11).unwrap();
        let e1 = h_ordered(&traj.last().unwrap().state);
        assert!((e1 - e0).abs() / e0.abs() > 1e-4, "ordered-pair form unexpectedly conserved");

        let (_, dp_trapped) = rhs_with_trap(&s, true).unwrap();
        let (_, dp_free) = rhs_with_trap(&s, false).unwrap();
        assert!((dp_trapped - dp_free).amax() > 0.1);
    }

    #[test]
    fn rejects_unordered_input() {
        let p = unit();
        assert!(ParticleState::new(
            RVec::from_vec(vec![0.5, -0.5]),
            RVec::zeros(2),
            p
        )
        .is_err());
    }
}
