//! The finite-N matrix model.
//!
//! States are complex matrices `Z = X + iY` subject to the constraint
//! `[Z, Z†] = 2ℓθ²(𝟙 − N|v⟩⟨v|)` and, in the Coulomb gauge, the condition
//! `[a, Z†] + [a†, Z] = 0`. The boundary vector `|v⟩` is the last basis
//! vector `|N−1⟩` in the Coulomb gauge and the uniform vector in the
//! diagonal gauge (the two are unitarily related).
//!
//! Time evolution is the exact rotation `Z(t) = e^{−iΩt} Z(0)`; everything
//! else here is constraint bookkeeping: residuals, conserved quantities,
//! the constraint-algebra bracket tables, and the Lagrange-multiplier solver
//! that projects an arbitrary velocity back onto the constraint surface.

use thiserror::Error;

use crate::params::PhysParams;
use crate::{C64, CMat, CVec, RMat, RVec};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix dimension must be at least 1")]
    ZeroDimension,
    #[error("positions must be distinct (minimum separation {0:.3e})")]
    CoincidentPositions(f64),
    #[error("center of mass must vanish, got {0:.3e}")]
    CenterOfMass(f64),
    #[error("invariant order {0} out of supported range 1..=4")]
    OrderOutOfRange(usize),
    #[error("word length {0} exceeds the guard of 12 factors")]
    WordTooLong(usize),
    #[error("matrix dimensions disagree: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("multiplier system is singular (rank {rank} < {expected}); state too far from a")]
    DeltaSingular { rank: usize, expected: usize },
}

/// Gauge in which a state's constraint is expressed (selects `|v⟩`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// `|v⟩ = |N−1⟩`; gauge condition `[a,Z†] + [a†,Z] = 0`.
    Coulomb,
    /// `X` diagonal; `|v⟩` uniform.
    Diagonal,
}

/// A matrix-model configuration.
#[derive(Debug, Clone)]
pub struct ComplexMatrixState {
    pub z: CMat,
    pub n: usize,
    pub gauge: Gauge,
    pub params: PhysParams,
}

impl ComplexMatrixState {
    pub fn new(z: CMat, gauge: Gauge, params: PhysParams) -> Result<Self, MatrixError> {
        let n = z.nrows();
        if n == 0 {
            return Err(MatrixError::ZeroDimension);
        }
        if z.ncols() != n {
            return Err(MatrixError::DimensionMismatch(n, z.ncols()));
        }
        Ok(ComplexMatrixState { z, n, gauge, params })
    }

    /// Hermitian part `X = (Z + Z†)/2`.
    pub fn x(&self) -> CMat {
        (&self.z + self.z.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Hermitian part `Y = (Z − Z†)/(2i)`.
    pub fn y(&self) -> CMat {
        (&self.z - self.z.adjoint()) * C64::new(0.0, -0.5)
    }

    /// Boundary vector `|v⟩` for this state's gauge.
    pub fn boundary_vector(&self) -> CVec {
        boundary_vector(self.n, self.gauge)
    }
}

pub fn boundary_vector(n: usize, gauge: Gauge) -> CVec {
    match gauge {
        Gauge::Coulomb => {
            let mut v = CVec::zeros(n);
            v[n - 1] = C64::new(1.0, 0.0);
            v
        }
        Gauge::Diagonal => CVec::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0)),
    }
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Hermitian part `(M + M†)/2`.
pub fn herm(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// The annihilation matrix `a = ℓθ Σ_{j=1}^{N−1} √(2j) |j−1⟩⟨j|`.
///
/// `a` is itself on-shell: `[a, a†] = 2ℓθ²(𝟙 − N|N−1⟩⟨N−1|)` exactly.
pub fn annihilation_matrix(n: usize, params: &PhysParams) -> Result<CMat, MatrixError> {
    if n == 0 {
        return Err(MatrixError::ZeroDimension);
    }
    let ell = params.ell_theta();
    let mut a = CMat::zeros(n, n);
    for j in 1..n {
        a[(j - 1, j)] = C64::new(ell * (2.0 * j as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Convenience: the annihilation matrix wrapped as a Coulomb-gauge state.
pub fn build_annihilation(n: usize, params: &PhysParams) -> Result<ComplexMatrixState, MatrixError> {
    let a = annihilation_matrix(n, params)?;
    ComplexMatrixState::new(a, Gauge::Coulomb, *params)
}

/// Right-hand side of the constraint: `2ℓθ²(𝟙 − N|v⟩⟨v|)`.
pub fn constraint_target(n: usize, gauge: Gauge, params: &PhysParams) -> CMat {
    let v = boundary_vector(n, gauge);
    let scale = 2.0 * params.ell_theta().powi(2);
    let proj = &v * v.adjoint();
    (CMat::identity(n, n) - proj * C64::new(n as f64, 0.0)) * C64::new(scale, 0.0)
}

/// `[Z, Z†] − 2ℓθ²(𝟙 − N|v⟩⟨v|)`.
pub fn constraint_residual(state: &ComplexMatrixState) -> CMat {
    let zdag = state.z.adjoint();
    commutator(&state.z, &zdag) - constraint_target(state.n, state.gauge, &state.params)
}

/// Coulomb-gauge residual `[a, Z†] + [a†, Z]`.
pub fn gauge_residual(state: &ComplexMatrixState) -> CMat {
    let a = annihilation_matrix(state.n, &state.params).expect("state has n >= 1");
    commutator(&a, &state.z.adjoint()) + commutator(&a.adjoint(), &state.z)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Exact evolution `Z(t) = e^{−iΩt} Z(0)`.
pub fn evolve_exact(state: &ComplexMatrixState, t: f64) -> ComplexMatrixState {
    let phase = C64::from_polar(1.0, -state.params.omega * t);
    let mut out = state.clone();
    out.z *= phase;
    out
}

/// Diagonal-gauge embedding of Calogero phase-space data.
///
/// Returns `(X, Y, λ)` with `X = √(mΩ)·diag(x)`, `Y` carrying momenta on the
/// diagonal and `iθ/(√(mΩ)(x_j − x_i))` off it, and the diagonal-gauge
/// multiplier `λ` (off-diagonal `θ/(√(mΩ)(x_i−x_j))²`-type entries) that
/// keeps `X` diagonal. The constraint `[X,Y] = −iθ(𝟙 − N|v⟩⟨v|)` holds
/// exactly with uniform `|v⟩`; equivalently `[Z,Z†] = 2ℓθ²(𝟙 − N|v⟩⟨v|)`.
pub fn embed_diagonal_gauge(
    x: &RVec,
    p: &RVec,
    params: &PhysParams,
) -> Result<(CMat, CMat, CMat), MatrixError> {
    let n = x.len();
    if n == 0 {
        return Err(MatrixError::ZeroDimension);
    }
    if p.len() != n {
        return Err(MatrixError::DimensionMismatch(n, p.len()));
    }
    let com = x.sum() / n as f64;
    let scale = x.amax().max(1.0);
    if com.abs() > 1e-9 * scale {
        return Err(MatrixError::CenterOfMass(com));
    }
    let min_sep = min_separation(x);
    if min_sep < 1e-12 * scale {
        return Err(MatrixError::CoincidentPositions(min_sep));
    }

    let sqrt_m_omega = (params.m * params.omega).sqrt();
    let theta = params.theta;
    let mut xm = CMat::zeros(n, n);
    let mut ym = CMat::zeros(n, n);
    let mut lam = CMat::zeros(n, n);
    for i in 0..n {
        xm[(i, i)] = C64::new(sqrt_m_omega * x[i], 0.0);
        ym[(i, i)] = C64::new(p[i] / sqrt_m_omega, 0.0);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = x[j] - x[i];
                ym[(i, j)] = C64::new(0.0, theta / (sqrt_m_omega * dx));
                // Multiplier that cancels the off-diagonal velocity of X.
                lam[(i, j)] = C64::new(theta / (params.m * params.omega * dx * dx), 0.0);
            }
        }
    }
    Ok((xm, ym, lam))
}

/// Embed particle data as a diagonal-gauge `ComplexMatrixState`.
pub fn embed_state(
    x: &RVec,
    p: &RVec,
    params: &PhysParams,
) -> Result<ComplexMatrixState, MatrixError> {
    let (xm, ym, _) = embed_diagonal_gauge(x, p, params)?;
    let z = &xm + &ym * C64::new(0.0, 1.0);
    ComplexMatrixState::new(z, Gauge::Diagonal, *params)
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

/// Average of products over all distinct orderings of a multiset of factors.
///
/// `word` indexes into `pool`; equal indices are identified, so the number of
/// enumerated orderings is the multinomial count, not `len!`.
pub fn symmetrized_product(word: &[usize], pool: &[CMat]) -> Result<CMat, MatrixError> {
    if word.len() > 12 {
        return Err(MatrixError::WordTooLong(word.len()));
    }
    let n = pool
        .first()
        .map(|m| m.nrows())
        .ok_or(MatrixError::ZeroDimension)?;
    for m in pool {
        if m.nrows() != n || m.ncols() != n {
            return Err(MatrixError::DimensionMismatch(n, m.nrows()));
        }
    }
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &w in word {
        if w >= pool.len() {
            return Err(MatrixError::DimensionMismatch(w, pool.len()));
        }
        match counts.iter_mut().find(|(idx, _)| *idx == w) {
            Some((_, c)) => *c += 1,
            None => counts.push((w, 1)),
        }
    }
    let mut sum = CMat::zeros(n, n);
    let mut orderings = 0usize;
    let prefix = CMat::identity(n, n);
    enumerate_orderings(&mut counts, word.len(), &prefix, pool, &mut sum, &mut orderings);
    Ok(sum / C64::new(orderings as f64, 0.0))
}

fn enumerate_orderings(
    counts: &mut Vec<(usize, usize)>,
    remaining: usize,
    prefix: &CMat,
    pool: &[CMat],
    sum: &mut CMat,
    orderings: &mut usize,
) {
    if remaining == 0 {
        *sum += prefix;
        *orderings += 1;
        return;
    }
    for k in 0..counts.len() {
        if counts[k].1 == 0 {
            continue;
        }
        counts[k].1 -= 1;
        let idx = counts[k].0;
        let next = prefix * &pool[idx];
        enumerate_orderings(counts, remaining - 1, &next, pool, sum, orderings);
        counts[k].1 += 1;
    }
}

/// `tr(prefix · S(factors))` — the verification engine for the trace
/// identities. `prefix` multiplies the symmetrized block from the left.
pub fn symmetrized_trace(prefix: &[CMat], factors: &[CMat]) -> Result<C64, MatrixError> {
    if prefix.len() + factors.len() > 12 {
        return Err(MatrixError::WordTooLong(prefix.len() + factors.len()));
    }
    let word: Vec<usize> = (0..factors.len()).collect();
    let sym = symmetrized_product(&word, factors)?;
    let mut m = sym;
    for p in prefix.iter().rev() {
        m = p * m;
    }
    Ok(m.trace())
}

/// Mode normalization `c_n = sqrt((N−1−n)! / (ℓθ^{2n} 2ⁿ N!))`, the
/// convention under which `tr(a†ⁿ aⁿ) = 1/((n+1) c_n²)` holds exactly.
pub fn mode_coefficient(n: usize, big_n: usize, params: &PhysParams) -> f64 {
    assert!(n < big_n, "mode order must satisfy n <= N-1");
    // (N−1−n)!/N! computed as a product to avoid factorial overflow.
    let mut ratio = 1.0;
    for k in (big_n - n)..=big_n {
        ratio /= k as f64;
    }
    // ratio = (N−1−n)!/(N+... ) careful: product over k = N−n..N has n+1 factors:
    // (N−1−n)!/N! = 1/(N·(N−1)·…·(N−n)).
    (ratio / (params.ell_theta().powi(2 * n as i32) * 2f64.powi(n as i32))).sqrt()
}

/// Classical invariant `Iₙ = N ⟨v| S(Z†ⁿ Zⁿ) |v⟩` (real up to round-off).
pub fn classical_invariant(state: &ComplexMatrixState, n: usize) -> Result<f64, MatrixError> {
    if n == 0 || n > 4 {
        return Err(MatrixError::OrderOutOfRange(n));
    }
    let zdag = state.z.adjoint();
    let pool = [state.z.clone(), zdag];
    let mut word = vec![0usize; n];
    word.extend(std::iter::repeat(1usize).take(n));
    let sym = symmetrized_product(&word, &pool)?;
    let v = state.boundary_vector();
    let val = (v.adjoint() * sym * &v)[(0, 0)];
    Ok(state.n as f64 * val.re)
}

/// Spectrum-generating amplitude `Bₙ = N ⟨v| Zⁿ |v⟩`.
pub fn b_n(state: &ComplexMatrixState, n: usize) -> Result<C64, MatrixError> {
    if n == 0 || n > 4 {
        return Err(MatrixError::OrderOutOfRange(n));
    }
    let mut zn = CMat::identity(state.n, state.n);
    for _ in 0..n {
        zn = &zn * &state.z;
    }
    let v = state.boundary_vector();
    Ok((v.adjoint() * zn * &v)[(0, 0)] * C64::new(state.n as f64, 0.0))
}

// ---------------------------------------------------------------------------
// Constraint algebra bracket tables
// ---------------------------------------------------------------------------

/// Poisson-bracket tables of the constraint functions φ and the Coulomb
/// gauge functions χ, with the canonical structure `{X_ab, Y_cd} = δ_ad δ_bc`.
///
/// `φ^{ij} = 2i([X,Y])_{ij} + 2θ(δ_ij − N δ_{i,N−1} δ_{j,N−1})` and
/// `χ^{ij} = i([a,Z†] + [a†,Z])_{ij}`; tables are indexed by flattened pairs
/// `(i·N + j, k·N + l)`.
#[derive(Debug, Clone)]
pub struct ConstraintAlgebraReport {
    pub n: usize,
    pub phi_phi: CMat,
    pub chi_chi: CMat,
    pub phi_chi: CMat,
    /// Max deviation of `{φ,φ}` from structure-constant·φ + boundary terms,
    /// with the boundary coefficient `4iθN` (dimension-N convention).
    pub decomposition_residual_n: f64,
    /// Same with the boundary coefficient `4iθ(N+1)` (paper's N+1 variant).
    pub decomposition_residual_n_plus_1: f64,
    /// Max `{χ,χ}` entry with all four indices interior (should vanish).
    pub chi_chi_interior: f64,
    /// Max antisymmetry defect across all three tables.
    pub antisymmetry_defect: f64,
}

/// Gradient of `([X,Y])_{ij}` with respect to `X`: `∂P_ij/∂X_ab`.
fn grad_p_x(i: usize, j: usize, y: &CMat) -> CMat {
    let n = y.nrows();
    let mut g = CMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut v = C64::new(0.0, 0.0);
            if a == i {
                v += y[(b, j)];
            }
            if b == j {
                v -= y[(i, a)];
            }
            g[(a, b)] = v;
        }
    }
    g
}

/// Gradient of `([X,Y])_{ij}` with respect to `Y`: `∂P_ij/∂Y_ab`.
fn grad_p_y(i: usize, j: usize, x: &CMat) -> CMat {
    let n = x.nrows();
    let mut g = CMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut v = C64::new(0.0, 0.0);
            if b == j {
                v += x[(i, a)];
            }
            if a == i {
                v -= x[(b, j)];
            }
            g[(a, b)] = v;
        }
    }
    g
}

/// Gradient of a linear function `([M, X])_{ij}` w.r.t. `X`.
fn grad_comm_x(i: usize, j: usize, m: &CMat) -> CMat {
    let n = m.nrows();
    let mut g = CMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut v = C64::new(0.0, 0.0);
            if b == j {
                v += m[(i, a)];
            }
            if a == i {
                v -= m[(b, j)];
            }
            g[(a, b)] = v;
        }
    }
    g
}

fn poisson(ax: &CMat, ay: &CMat, bx: &CMat, by: &CMat) -> C64 {
    let n = ax.nrows();
    let mut s = C64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            s += ax[(a, b)] * by[(b, a)] - bx[(a, b)] * ay[(b, a)];
        }
    }
    s
}

pub fn constraint_algebra_report(state: &ComplexMatrixState) -> ConstraintAlgebraReport {
    let n = state.n;
    let nn = n * n;
    let x = state.x();
    let y = state.y();
    let theta = state.params.theta;
    let a = annihilation_matrix(n, &state.params).expect("n >= 1");
    // χ = i([a,Z†] + [a†,Z]) = i([a+a†, X] + i[a†−a, Y]).
    let am = &a + a.adjoint();
    let bm = a.adjoint() - &a;
    let i1 = C64::new(0.0, 1.0);

    // Per-index gradients.
    let mut phi_gx = Vec::with_capacity(nn);
    let mut phi_gy = Vec::with_capacity(nn);
    let mut chi_gx = Vec::with_capacity(nn);
    let mut chi_gy = Vec::with_capacity(nn);
    for i in 0..n {
        for j in 0..n {
            phi_gx.push(grad_p_x(i, j, &y) * (2.0 * i1));
            phi_gy.push(grad_p_y(i, j, &x) * (2.0 * i1));
            chi_gx.push(grad_comm_x(i, j, &am) * i1);
            chi_gy.push(grad_comm_x(i, j, &bm) * (i1 * i1));
        }
    }

    let mut phi_phi = CMat::zeros(nn, nn);
    let mut chi_chi = CMat::zeros(nn, nn);
    let mut phi_chi = CMat::zeros(nn, nn);
    for r in 0..nn {
        for c in 0..nn {
            phi_phi[(r, c)] = poisson(&phi_gx[r], &phi_gy[r], &phi_gx[c], &phi_gy[c]);
            chi_chi[(r, c)] = poisson(&chi_gx[r], &chi_gy[r], &chi_gx[c], &chi_gy[c]);
            phi_chi[(r, c)] = poisson(&phi_gx[r], &phi_gy[r], &chi_gx[c], &chi_gy[c]);
        }
    }

    // φ values (with the constant part) for the decomposition check.
    let p = commutator(&x, &y);
    let phi = |i: usize, j: usize| -> C64 {
        let mut c = C64::new(0.0, 0.0);
        if i == j {
            c += C64::new(2.0 * theta, 0.0);
        }
        if i == n - 1 && j == n - 1 {
            c -= C64::new(2.0 * theta * n as f64, 0.0);
        }
        2.0 * i1 * p[(i, j)] + c
    };

    let mut res_n = 0.0f64;
    let mut res_np1 = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = phi_phi[(i * n + j, k * n + l)];
                    let mut structure = C64::new(0.0, 0.0);
                    if i == l {
                        structure += phi(k, j);
                    }
                    if j == k {
                        structure -= phi(i, l);
                    }
                    structure *= 2.0 * i1;
                    let mut boundary = C64::new(0.0, 0.0);
                    if i == l && k == n - 1 && j == n - 1 {
                        boundary += C64::new(0.0, 4.0 * theta);
                    }
                    if j == k && i == n - 1 && l == n - 1 {
                        boundary -= C64::new(0.0, 4.0 * theta);
                    }
                    res_n = res_n.max((lhs - structure - boundary * n as f64).norm());
                    res_np1 =
                        res_np1.max((lhs - structure - boundary * (n as f64 + 1.0)).norm());
                }
            }
        }
    }

    let mut chi_interior = 0.0f64;
    for i in 0..n.saturating_sub(1) {
        for j in 0..n - 1 {
            for k in 0..n - 1 {
                for l in 0..n - 1 {
                    chi_interior = chi_interior.max(chi_chi[(i * n + j, k * n + l)].norm());
                }
            }
        }
    }

    let mut antisym = 0.0f64;
    for table in [&phi_phi, &chi_chi] {
        let defect = table + table.transpose();
        antisym = antisym.max(max_abs(&defect));
    }
    // {φ,χ} antisymmetry pairs with {χ,φ}; recompute the swapped table cheaply.
    let mut chi_phi_defect = 0.0f64;
    for r in 0..nn {
        for c in 0..nn {
            let swapped = poisson(&chi_gx[c], &chi_gy[c], &phi_gx[r], &phi_gy[r]);
            chi_phi_defect = chi_phi_defect.max((phi_chi[(r, c)] + swapped).norm());
        }
    }
    antisym = antisym.max(chi_phi_defect);

    ConstraintAlgebraReport {
        n,
        phi_phi,
        chi_chi,
        phi_chi,
        decomposition_residual_n: res_n,
        decomposition_residual_n_plus_1: res_np1,
        chi_chi_interior: chi_interior,
        antisymmetry_defect: antisym,
    }
}

// ---------------------------------------------------------------------------
// Lagrange-multiplier solver
// ---------------------------------------------------------------------------

/// Solution of the multiplier projection at a state.
#[derive(Debug, Clone)]
pub struct MultiplierSolution {
    pub lambda: CMat,
    pub nu: CMat,
    /// Residual boundary components of the gauge rate (the free αᵢ).
    pub boundary_slack: Vec<f64>,
    /// Max kept-component residual of both rates after correction.
    pub residual: f64,
}

impl MultiplierSolution {
    /// Corrected velocity `v = raw + i[Z,λ] + [a,ν]`.
    pub fn corrected_velocity(&self, state: &ComplexMatrixState, raw: &CMat) -> CMat {
        let a = annihilation_matrix(state.n, &state.params).expect("n >= 1");
        raw + commutator(&state.z, &self.lambda) * C64::new(0.0, 1.0) + commutator(&a, &self.nu)
    }
}

/// Hermitian basis of N×N matrices: N diagonal units, then for each i<j the
/// real-symmetric and imaginary-antisymmetric pair. Total N².
fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut m = CMat::zeros(n, n);
        m[(i, i)] = C64::new(1.0, 0.0);
        basis.push(m);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = CMat::zeros(n, n);
            s[(i, j)] = C64::new(1.0, 0.0);
            s[(j, i)] = C64::new(1.0, 0.0);
            basis.push(s);
            let mut t = CMat::zeros(n, n);
            t[(i, j)] = C64::new(0.0, 1.0);
            t[(j, i)] = C64::new(0.0, -1.0);
            basis.push(t);
        }
    }
    basis
}

/// Independent real components of a Hermitian rate matrix: the full interior
/// (N−1)×(N−1) block plus the real parts of the boundary column, corner
/// dropped. Exactly N² − N numbers.
fn kept_components(h: &CMat) -> Vec<f64> {
    let n = h.nrows();
    let mut out = Vec::with_capacity(n * n - n);
    for i in 0..n - 1 {
        out.push(h[(i, i)].re);
    }
    for i in 0..n - 1 {
        for j in (i + 1)..(n - 1) {
            out.push(h[(i, j)].re);
            out.push(h[(i, j)].im);
        }
    }
    for i in 0..n - 1 {
        out.push(h[(i, n - 1)].re);
    }
    out
}

/// Constraint rate `Herm([v, Z†])` (half of d/dt [Z,Z†]).
fn constraint_rate(v: &CMat, z: &CMat) -> CMat {
    herm(&commutator(v, &z.adjoint()))
}

/// Gauge rate `i([a, v†] + [a†, v])`, Hermitian.
fn gauge_rate(v: &CMat, a: &CMat) -> CMat {
    (commutator(a, &v.adjoint()) + commutator(&a.adjoint(), v)) * C64::new(0.0, 1.0)
}

/// Kept-component response matrix of the two rates to the (λ, ν) basis.
fn rate_system(
    state: &ComplexMatrixState,
    a: &CMat,
    basis: &[CMat],
    rows: usize,
    cols: usize,
) -> RMat {
    let mut m = RMat::zeros(rows, cols);
    for (col, b) in basis.iter().enumerate() {
        // λ column: velocity contribution i[Z, B].
        let dv = commutator(&state.z, b) * C64::new(0.0, 1.0);
        let mut comps = kept_components(&constraint_rate(&dv, &state.z));
        comps.extend(kept_components(&gauge_rate(&dv, &a)));
        for (r, val) in comps.into_iter().enumerate() {
            m[(r, col)] = val;
        }
        // ν column: velocity contribution [a, B].
        let dv = commutator(&a, b);
        let mut comps = kept_components(&constraint_rate(&dv, &state.z));
        comps.extend(kept_components(&gauge_rate(&dv, &a)));
        for (r, val) in comps.into_iter().enumerate() {
            m[(r, basis.len() + col)] = val;
        }
    }
    m
}

/// Max kept-component magnitudes of the constraint residual and of the
/// Hermitian form `i·([a,Z†]+[a†,Z])` of the gauge residual.
pub fn kept_residuals(state: &ComplexMatrixState) -> (f64, f64) {
    let c = constraint_residual(state);
    let g = gauge_residual(state) * C64::new(0.0, 1.0);
    let cmax = kept_components(&c)
        .into_iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let gmax = kept_components(&g)
        .into_iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    (cmax, gmax)
}

/// Solve for a tangent displacement `ΔZ = i[Z,λ] + [a,ν]` whose linearized
/// effect matches the requested kept components:
/// `kept(Herm([ΔZ,Z†])) = kept(target_constraint)` and
/// `kept(i([a,ΔZ†]+[a†,ΔZ])) = kept(target_gauge)`. Used as the Newton step
/// re-projecting a drifted state onto the constraint surface.
pub fn solve_displacement(
    state: &ComplexMatrixState,
    target_constraint: &CMat,
    target_gauge: &CMat,
) -> Result<CMat, MatrixError> {
    let n = state.n;
    if n == 1 {
        return Ok(CMat::zeros(1, 1));
    }
    let a = annihilation_matrix(n, &state.params)?;
    let basis = hermitian_basis(n);
    let rows = 2 * (n * n - n);
    let cols = 2 * n * n;
    let m = rate_system(state, &a, &basis, rows, cols);
    let mut rhs_vec = kept_components(target_constraint);
    rhs_vec.extend(kept_components(target_gauge));
    let rhs = RVec::from_vec(rhs_vec);
    let svd = m.svd(true, true);
    let max_sv = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * max_sv.max(1.0))
        .count();
    if rank < rows {
        return Err(MatrixError::DeltaSingular {
            rank,
            expected: rows,
        });
    }
    let sol = svd
        .solve(&rhs, 1e-10 * max_sv.max(1.0))
        .map_err(|_| MatrixError::DeltaSingular {
            rank,
            expected: rows,
        })?;
    let mut dz = CMat::zeros(n, n);
    for (k, b) in basis.iter().enumerate() {
        dz += commutator(&state.z, b) * C64::new(0.0, sol[k]);
        dz += commutator(&a, b) * C64::new(sol[basis.len() + k], 0.0);
    }
    Ok(dz)
}

/// Solve for Hermitian multipliers (λ, ν) such that the corrected velocity
/// `v = raw + i[Z,λ] + [a,ν]` preserves constraint and gauge: the kept
/// components of both rate matrices vanish. Minimum-norm solve; the boundary
/// imaginary parts of the gauge rate are the free slack αᵢ.
pub fn solve_multipliers(
    state: &ComplexMatrixState,
    raw_velocity: &CMat,
) -> Result<MultiplierSolution, MatrixError> {
    let n = state.n;
    if raw_velocity.nrows() != n || raw_velocity.ncols() != n {
        return Err(MatrixError::DimensionMismatch(n, raw_velocity.nrows()));
    }
    let a = annihilation_matrix(n, &state.params)?;
    let basis = hermitian_basis(n);
    let rows = 2 * (n * n - n);
    let cols = 2 * n * n;

    if n == 1 {
        // No independent components; nothing to solve.
        return Ok(MultiplierSolution {
            lambda: CMat::zeros(1, 1),
            nu: CMat::zeros(1, 1),
            boundary_slack: vec![gauge_rate(raw_velocity, &a)[(0, 0)].im],
            residual: 0.0,
        });
    }

    let m = rate_system(state, &a, &basis, rows, cols);

    let mut rhs_vec = kept_components(&constraint_rate(raw_velocity, &state.z));
    rhs_vec.extend(kept_components(&gauge_rate(raw_velocity, &a)));
    let rhs = -RVec::from_vec(rhs_vec);

    let svd = m.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * max_sv.max(1.0))
        .count();
    if rank < rows {
        return Err(MatrixError::DeltaSingular {
            rank,
            expected: rows,
        });
    }
    let sol = svd
        .solve(&rhs, 1e-10 * max_sv.max(1.0))
        .map_err(|_| MatrixError::DeltaSingular {
            rank,
            expected: rows,
        })?;

    let mut lambda = CMat::zeros(n, n);
    let mut nu = CMat::zeros(n, n);
    for (k, b) in basis.iter().enumerate() {
        lambda += b * C64::new(sol[k], 0.0);
        nu += b * C64::new(sol[basis.len() + k], 0.0);
    }

    let solution = MultiplierSolution {
        lambda,
        nu,
        boundary_slack: Vec::new(),
        residual: 0.0,
    };
    let v = solution.corrected_velocity(state, raw_velocity);
    let g = gauge_rate(&v, &a);
    let mut slack: Vec<f64> = (0..n - 1).map(|i| g[(i, n - 1)].im).collect();
    slack.push(g[(n - 1, n - 1)].re);
    let mut residual = 0.0f64;
    for val in kept_components(&constraint_rate(&v, &state.z)) {
        residual = residual.max(val.abs());
    }
    for val in kept_components(&g) {
        residual = residual.max(val.abs());
    }
    Ok(MultiplierSolution {
        boundary_slack: slack,
        residual,
        ..solution
    })
}

/// Sorted eigenvalues of the Hermitian part X of a state, as positions:
/// `x = eig(X)/√(mΩ)`.
pub fn particle_positions(state: &ComplexMatrixState) -> RVec {
    let x = state.x();
    let eig = x.symmetric_eigenvalues();
    let mut vals: Vec<f64> = eig.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = (state.params.m * state.params.omega).sqrt();
    RVec::from_vec(vals) / scale
}
