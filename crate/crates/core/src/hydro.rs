//! Wigner phase-space fields, droplet hydrodynamics, and Kirchhoff vortices.
//!
//! Phase space carries the kernel `e^{ipy/θ}`: θ plays ħ's role for the
//! matrix-model droplet. In normalized units (`mΩ = 1`, so `θ = ℓθ²`) the
//! Wigner transform of `|0⟩⟨0|` is `2e^{−(x²+p²)/ℓθ²}` and the trace
//! normalization is `∫ M(x,p) dx dp / (2πθ) = tr M`, fixed once by that
//! Gaussian and then frozen.
//!
//! Deformation convention: `V(w) = Σₙ cₙ α_{n+1} wⁿ` with `w = x + ip` is the
//! Lagrangian-label displacement, `δR = (Re V, Im V)`, `v = Ω ẑ × δR`, and
//! the linearized density response is `δρ = +ρ₀ ∇·δR` with `ρ₀ = 1/ℓθ²`.
//! With this orientation the circulation identity `∮v·dl = (θ/m)∫δρ` closes
//! exactly (discrete Stokes up to grid error); the opposite Jacobian sign
//! cannot satisfy it with `ω = (θ/m)δρ`.
//!
//! Vortices carry circulations quantized in units of `Ωℓħ²` and obey the 2D
//! Kirchhoff law; collisions are an error, not regularized, and vortices
//! outside `0.7·√(2N)ℓθ` raise a physical-relevance warning.

use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::mode_coefficient;
use crate::ode::{integrate, OdeError, OdeOptions};
use crate::params::PhysParams;
use crate::{C64, CMat, RVec};

#[derive(Debug, Error)]
pub enum HydroError {
    #[error("grid must have at least 8 points per side, got {0}")]
    GridTooSmall(usize),
    #[error("grid radius {radius} below required {required} for N = {n}")]
    GridTooNarrow { radius: f64, required: f64, n: usize },
    #[error("field shapes disagree")]
    ShapeMismatch,
    #[error("matrix must be square")]
    NotSquare,
    #[error("deformation mode order {0} must be below N = {1}")]
    ModeOrder(usize, usize),
    #[error("total δρ = {0} is not zero within tolerance {1}")]
    NotNeutral(f64, f64),
    #[error("vortex circulation multiples must be nonzero integers")]
    ZeroCirculation,
    #[error("vortex positions must be distinct")]
    CoincidentVortices,
    #[error("vortex quantum requires ħ > 0")]
    ZeroHbar,
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
}

/// Uniform midpoint-sampled square grid over the (x, p) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub radius: f64,
    pub step: f64,
}

impl Grid {
    /// Square grid on `[−radius, radius]²` with `n` midpoint samples per
    /// axis.
    pub fn square(radius: f64, n: usize) -> Result<Self, HydroError> {
        if n < 8 {
            return Err(HydroError::GridTooSmall(n));
        }
        Ok(Grid {
            n,
            radius,
            step: 2.0 * radius / n as f64,
        })
    }

    /// Grid sized for droplet work at particle number `N` (covers
    /// `1.5·√(2N)·ℓθ`).
    pub fn for_droplet(big_n: usize, n: usize, params: &PhysParams) -> Result<Self, HydroError> {
        let radius = 1.5 * (2.0 * big_n as f64).sqrt() * params.ell_theta();
        Grid::square(radius, n)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.step
    }

    pub fn cell_area(&self) -> f64 {
        self.step * self.step
    }
}

/// Real scalar field sampled on a [`Grid`]; `values[ip * n + ix]`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        GridField {
            values: vec![0.0; grid.n * grid.n],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let n = grid.n;
        let values: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| f(grid.coord(k % n), grid.coord(k / n)))
            .collect();
        GridField { grid, values }
    }

    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ip * self.grid.n + ix]
    }

    /// Midpoint-rule integral over the whole grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// `∫ f dx dp / (2πθ)` — the trace-normalized integral.
    pub fn trace_integral(&self, params: &PhysParams) -> f64 {
        self.integral() / (2.0 * std::f64::consts::PI * params.ell_theta().powi(2))
    }

    /// Separable Gaussian coarse-graining with standard deviation `sigma`
    /// per axis (kernel truncated at 5σ and renormalized at the borders).
    pub fn gaussian_smooth(&self, sigma: f64) -> GridField {
        let n = self.grid.n;
        let h = self.grid.step;
        let half = ((5.0 * sigma / h).ceil() as usize).max(1);
        let kernel: Vec<f64> = (0..=half)
            .map(|k| (-0.5 * (k as f64 * h / sigma).powi(2)).exp())
            .collect();
        let convolve_axis = |src: &[f64], along_x: bool| -> Vec<f64> {
            let mut dst = vec![0.0; n * n];
            for outer in 0..n {
                for inner in 0..n {
                    let mut acc = 0.0;
                    let mut wsum = 0.0;
                    let lo = inner.saturating_sub(half);
                    let hi = (inner + half).min(n - 1);
                    for t in lo..=hi {
                        let w = kernel[t.abs_diff(inner)];
                        let idx = if along_x {
                            outer * n + t
                        } else {
                            t * n + outer
                        };
                        acc += w * src[idx];
                        wsum += w;
                    }
                    let idx = if along_x {
                        outer * n + inner
                    } else {
                        inner * n + outer
                    };
                    dst[idx] = acc / wsum;
                }
            }
            dst
        };
        let pass1 = convolve_axis(&self.values, true);
        let pass2 = convolve_axis(&pass1, false);
        GridField {
            grid: self.grid,
            values: pass2,
        }
    }

    /// Centered-difference partial derivatives (one-sided at the border).
    pub fn gradient(&self) -> (GridField, GridField) {
        let n = self.grid.n;
        let h = self.grid.step;
        let mut dxf = GridField::zeros(self.grid);
        let mut dpf = GridField::zeros(self.grid);
        for ip in 0..n {
            for ix in 0..n {
                let xm = if ix > 0 { ix - 1 } else { ix };
                let xp = if ix + 1 < n { ix + 1 } else { ix };
                dxf.values[ip * n + ix] =
                    (self.at(xp, ip) - self.at(xm, ip)) / ((xp - xm) as f64 * h);
                let pm = if ip > 0 { ip - 1 } else { ip };
                let pp = if ip + 1 < n { ip + 1 } else { ip };
                dpf.values[ip * n + ix] =
                    (self.at(ix, pp) - self.at(ix, pm)) / ((pp - pm) as f64 * h);
            }
        }
        (dxf, dpf)
    }
}

// ---------------------------------------------------------------------------
// Hermite basis and the Wigner transform
// ---------------------------------------------------------------------------

/// Normalized harmonic-oscillator eigenfunctions `ψ₀..ψ_{n_max−1}` at `x`,
/// with length scale ℓθ and exponent `−x²/(2ℓθ²)`.
pub fn hermite_all(n_max: usize, x: f64, params: &PhysParams) -> Vec<f64> {
    let ell = params.ell_theta();
    let xi = x / ell;
    let mut out = Vec::with_capacity(n_max);
    if n_max == 0 {
        return out;
    }
    let psi0 = (std::f64::consts::PI * ell * ell).powf(-0.25) * (-0.5 * xi * xi).exp();
    out.push(psi0);
    if n_max > 1 {
        out.push((2.0f64).sqrt() * xi * psi0);
    }
    for i in 2..n_max {
        let a = (2.0 / i as f64).sqrt() * xi * out[i - 1];
        let b = ((i as f64 - 1.0) / i as f64).sqrt() * out[i - 2];
        out.push(a - b);
    }
    out
}

/// `ψᵢ(x)`.
pub fn hermite_state(i: usize, x: f64, params: &PhysParams) -> f64 {
    hermite_all(i + 1, x, params)[i]
}

/// Wigner transform of an N×N operator in the Hermite basis:
/// `M(x,p) = Σᵢⱼ Mᵢⱼ ∫ ψᵢ(x+y/2) ψⱼ(x−y/2) e^{ipy/θ} dy` by midpoint
/// quadrature in `y`. Returns the real part plus the worst imaginary
/// remainder (zero for Hermitian input up to quadrature error).
pub fn wigner_transform(
    m: &CMat,
    grid: &Grid,
    params: &PhysParams,
) -> Result<(GridField, f64), HydroError> {
    if m.nrows() != m.ncols() {
        return Err(HydroError::NotSquare);
    }
    let big_n = m.nrows();
    let ell = params.ell_theta();
    let theta_eff = ell * ell; // θ/(mΩ) in normalized units
    // Support radius of the basis functions plus Gaussian margin.
    let support = ell * ((2.0 * big_n as f64).sqrt() + 5.0);
    let y_max = 2.0 * (grid.radius.min(support) + support);
    // Resolve both the Gaussian scale and the fastest phase on the grid.
    let p_max = grid.radius;
    let dy = (ell / 8.0).min(std::f64::consts::PI * theta_eff / (4.0 * p_max.max(1e-12)));
    let n_y = ((2.0 * y_max / dy).ceil() as usize).max(16);
    let dy = 2.0 * y_max / n_y as f64;

    let n = grid.n;
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|ix| {
            let x = grid.coord(ix);
            // f(y) = u(x+y/2)ᵀ M u(x−y/2), complex.
            let f: Vec<C64> = (0..n_y)
                .map(|k| {
                    let y = -y_max + (k as f64 + 0.5) * dy;
                    let up = hermite_all(big_n, x + 0.5 * y, params);
                    let um = hermite_all(big_n, x - 0.5 * y, params);
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..big_n {
                        if up[i] == 0.0 {
                            continue;
                        }
                        for j in 0..big_n {
                            acc += m[(i, j)] * up[i] * um[j];
                        }
                    }
                    acc
                })
                .collect();
            let mut row = vec![0.0; n];
            let mut worst_im: f64 = 0.0;
            for (ipp, slot) in row.iter_mut().enumerate() {
                let p = grid.coord(ipp);
                let mut acc = C64::new(0.0, 0.0);
                for (k, fv) in f.iter().enumerate() {
                    let y = -y_max + (k as f64 + 0.5) * dy;
                    let (s, c) = (p * y / theta_eff).sin_cos();
                    acc += fv * C64::new(c, s);
                }
                acc *= dy;
                *slot = acc.re;
                worst_im = worst_im.max(acc.im.abs());
            }
            (row, worst_im)
        })
        .collect();

    let mut field = GridField::zeros(*grid);
    let mut worst_im: f64 = 0.0;
    for (ix, (row, wi)) in rows.into_iter().enumerate() {
        worst_im = worst_im.max(wi);
        for ip in 0..n {
            field.values[ip * n + ix] = row[ip];
        }
    }
    Ok((field, worst_im))
}

/// Closed-form finite-N droplet density (Laguerre sum):
/// `P(r) = 2 Σ_{k<N} (−1)ᵏ e^{−r²/ℓθ²} L_k(2r²/ℓθ²)`.
pub fn laguerre_droplet(big_n: usize, r: f64, params: &PhysParams) -> f64 {
    let ell2 = params.ell_theta().powi(2);
    let u = 2.0 * r * r / ell2;
    let gauss = (-r * r / ell2).exp();
    let mut sum = 0.0;
    let mut lkm1 = 0.0;
    let mut lk = 1.0;
    for k in 0..big_n {
        sum += if k % 2 == 0 { lk } else { -lk };
        let lkp1 = ((2.0 * k as f64 + 1.0 - u) * lk - k as f64 * lkm1) / (k as f64 + 1.0);
        lkm1 = lk;
        lk = lkp1;
    }
    2.0 * gauss * sum
}

/// Droplet density `P(x,p)` — the Wigner transform of the identity.
pub fn droplet_density(
    big_n: usize,
    grid: &Grid,
    params: &PhysParams,
) -> Result<GridField, HydroError> {
    let required = 1.5 * (2.0 * big_n as f64).sqrt() * params.ell_theta();
    if grid.radius < required * (1.0 - 1e-12) {
        return Err(HydroError::GridTooNarrow {
            radius: grid.radius,
            required,
            n: big_n,
        });
    }
    let ident = CMat::identity(big_n, big_n);
    let (field, _) = wigner_transform(&ident, grid, params)?;
    Ok(field)
}

/// Summary numbers for a droplet density field.
#[derive(Debug, Clone, Copy)]
pub struct DropletReport {
    pub plateau: f64,
    pub edge_radius: f64,
    /// `∫P dx dp / (2πθ)` — should equal N.
    pub trace_norm: f64,
}

pub fn droplet_report(field: &GridField, big_n: usize, params: &PhysParams) -> DropletReport {
    let edge_guess = (2.0 * big_n as f64).sqrt() * params.ell_theta();
    let n = field.grid.n;
    // Plateau: average over r < edge/2.
    let mut acc = 0.0;
    let mut count = 0usize;
    for ip in 0..n {
        for ix in 0..n {
            let (x, p) = (field.grid.coord(ix), field.grid.coord(ip));
            if x * x + p * p < 0.25 * edge_guess * edge_guess {
                acc += field.at(ix, ip);
                count += 1;
            }
        }
    }
    let plateau = acc / count.max(1) as f64;
    // Edge: half-plateau crossing of the radial profile along +x (p row
    // nearest zero).
    let ip0 = n / 2;
    let mut edge_radius = field.grid.radius;
    let mut prev: Option<(f64, f64)> = None;
    for ix in n / 2..n {
        let x = field.grid.coord(ix);
        if x < 0.0 {
            continue;
        }
        let v = field.at(ix, ip0);
        if let Some((x0, v0)) = prev {
            if v0 >= 0.5 * plateau && v < 0.5 * plateau {
                let t = (v0 - 0.5 * plateau) / (v0 - v);
                edge_radius = x0 + t * (x - x0);
                break;
            }
        }
        prev = Some((x, v));
    }
    DropletReport {
        plateau,
        edge_radius,
        trace_norm: field.trace_integral(params),
    }
}

// ---------------------------------------------------------------------------
// Deformations and linearized hydrodynamics
// ---------------------------------------------------------------------------

/// Droplet deformation `V(w) = Σₙ cₙ α_{n+1} wⁿ`, `w = x + ip`.
#[derive(Debug, Clone)]
pub struct DeformationSeries {
    /// `α_{n+1}` for `n = 1..=coeffs.len()`.
    pub coeffs: Vec<C64>,
    pub big_n: usize,
    /// Relative smallness budget ε: `max |δR| / edge radius ≤ ε` at the edge.
    pub epsilon_budget: f64,
}

impl DeformationSeries {
    pub fn new(coeffs: Vec<C64>, big_n: usize, epsilon_budget: f64) -> Result<Self, HydroError> {
        if coeffs.len() >= big_n {
            return Err(HydroError::ModeOrder(coeffs.len(), big_n));
        }
        Ok(DeformationSeries {
            coeffs,
            big_n,
            epsilon_budget,
        })
    }

    /// Single mode `n` with `|δR| = ε·(edge radius)` at the droplet edge.
    pub fn single_mode(
        n: usize,
        epsilon: f64,
        big_n: usize,
        params: &PhysParams,
    ) -> Result<Self, HydroError> {
        if n == 0 || n >= big_n {
            return Err(HydroError::ModeOrder(n, big_n));
        }
        let edge = (2.0 * big_n as f64).sqrt() * params.ell_theta();
        let cn = mode_coefficient(n, big_n, params);
        let alpha = epsilon * edge.powi(1 - n as i32) / cn;
        let mut coeffs = vec![C64::new(0.0, 0.0); n];
        coeffs[n - 1] = C64::new(alpha, 0.0);
        DeformationSeries::new(coeffs, big_n, epsilon.max(1e-12) * 1.5)
    }

    /// `V(w)`.
    pub fn eval(&self, w: C64, params: &PhysParams) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut wn = w;
        for (k, alpha) in self.coeffs.iter().enumerate() {
            let n = k + 1;
            acc += alpha * mode_coefficient(n, self.big_n, params) * wn;
            wn *= w;
        }
        acc
    }

    /// `max_n |cₙ α_{n+1}|·edgeⁿ / edge` — the relative deformation at the
    /// droplet edge; compared against the configured budget.
    pub fn budget_ratio(&self, params: &PhysParams) -> f64 {
        let edge = (2.0 * self.big_n as f64).sqrt() * params.ell_theta();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, alpha)| {
                let n = k + 1;
                alpha.norm() * mode_coefficient(n, self.big_n, params) * edge.powi(n as i32 - 1)
            })
            .fold(0.0, f64::max)
    }

    pub fn within_budget(&self, params: &PhysParams) -> bool {
        self.budget_ratio(params) <= self.epsilon_budget
    }
}

/// Displacement field `δR = (Re V, Im V)` on the grid.
pub fn deformation_field(
    series: &DeformationSeries,
    grid: &Grid,
    params: &PhysParams,
) -> (GridField, GridField) {
    let fx = GridField::from_fn(*grid, |x, p| series.eval(C64::new(x, p), params).re);
    let fy = GridField::from_fn(*grid, |x, p| series.eval(C64::new(x, p), params).im);
    (fx, fy)
}

/// Velocity field `v = Ω ẑ × δR = Ω(−δR_y, δR_x)` plus a budget warning.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub vx: GridField,
    pub vy: GridField,
    pub budget_warning: bool,
}

pub fn velocity_field(
    series: &DeformationSeries,
    grid: &Grid,
    params: &PhysParams,
) -> VectorField {
    let (rx, ry) = deformation_field(series, grid, params);
    let omega = params.omega;
    let mut vx = GridField::zeros(*grid);
    let mut vy = GridField::zeros(*grid);
    for k in 0..rx.values.len() {
        vx.values[k] = -omega * ry.values[k];
        vy.values[k] = omega * rx.values[k];
    }
    VectorField {
        vx,
        vy,
        budget_warning: !series.within_budget(params),
    }
}

/// Linearized density response `δρ = +ρ₀ ∇·δR`, `ρ₀ = 1/ℓθ²`, by centered
/// differences of the displacement field.
pub fn delta_rho(series: &DeformationSeries, grid: &Grid, params: &PhysParams) -> GridField {
    let (rx, ry) = deformation_field(series, grid, params);
    let (dxrx, _) = rx.gradient();
    let (_, dpry) = ry.gradient();
    let rho0 = 1.0 / params.ell_theta().powi(2);
    let mut out = GridField::zeros(*grid);
    for k in 0..out.values.len() {
        out.values[k] = rho0 * (dxrx.values[k] + dpry.values[k]);
    }
    out
}

/// `ω = (θ/m)·δρ` pointwise; errors unless `∫δρ ≈ 0`.
pub fn vorticity_from_density(
    delta_rho: &GridField,
    params: &PhysParams,
    tol: f64,
) -> Result<GridField, HydroError> {
    let total = delta_rho.integral();
    if total.abs() > tol {
        return Err(HydroError::NotNeutral(total, tol));
    }
    let factor = params.theta / params.m;
    let mut out = delta_rho.clone();
    for v in &mut out.values {
        *v *= factor;
    }
    Ok(out)
}

/// Axis-aligned rectangle given by inclusive grid-index bounds.
#[derive(Debug, Clone, Copy)]
pub struct IndexRect {
    pub ix0: usize,
    pub ix1: usize,
    pub ip0: usize,
    pub ip1: usize,
}

/// `∮ v·dl` counterclockwise around the rectangle boundary (midpoint sums
/// along grid lines).
pub fn circulation(v: &VectorField, rect: IndexRect) -> f64 {
    let h = v.vx.grid.step;
    let mut acc = 0.0;
    for ix in rect.ix0..=rect.ix1 {
        acc += v.vx.at(ix, rect.ip0) * h; // bottom, +x
        acc -= v.vx.at(ix, rect.ip1) * h; // top, −x
    }
    for ip in rect.ip0..=rect.ip1 {
        acc += v.vy.at(rect.ix1, ip) * h; // right, +p
        acc -= v.vy.at(rect.ix0, ip) * h; // left, −p
    }
    acc
}

/// `∫ f dA` over the rectangle interior (cells strictly inside the contour).
pub fn integrate_rect(f: &GridField, rect: IndexRect) -> f64 {
    let mut acc = 0.0;
    for ip in rect.ip0 + 1..rect.ip1 {
        for ix in rect.ix0 + 1..rect.ix1 {
            acc += f.at(ix, ip);
        }
    }
    // Boundary cells contribute half (midpoint contour passes through them).
    for ix in rect.ix0..=rect.ix1 {
        acc += 0.5 * (f.at(ix, rect.ip0) + f.at(ix, rect.ip1));
    }
    for ip in rect.ip0 + 1..rect.ip1 {
        acc += 0.5 * (f.at(rect.ix0, ip) + f.at(rect.ix1, ip));
    }
    acc * f.grid.cell_area()
}

/// Nonlinear Jacobian density `ρ = P / {W_X, W_Y}` with the bracket by
/// centered finite differences.
///
/// Two facts shape this routine. First, Wigner symbols of finite-N operators
/// carry O(1) Moyal oscillations at the θ-cell scale (the droplet symbol
/// itself oscillates between 0 and 2 near the origin), so the hydrodynamic
/// identity only holds after coarse-graining: all three fields are smoothed
/// with a Gaussian of variance θ/2 per axis (Wigner → Husimi), after which
/// the symbol of the position operator is exactly `x` in the interior.
/// Second, under the frozen kernel `e^{+ipy/θ}` the symbol of the momentum
/// operator is `−p`, so the matrix model's canonical orientation on grid
/// coordinates is `{A,B} = ∂_p A ∂_x B − ∂_x A ∂_p B`; the bracket is taken
/// in that orientation so `{W_X, W_Y} ≈ +1` on the droplet.
pub fn density_from_jacobian(
    p: &GridField,
    wx: &GridField,
    wy: &GridField,
    params: &PhysParams,
) -> Result<GridField, HydroError> {
    if p.grid != wx.grid || p.grid != wy.grid {
        return Err(HydroError::ShapeMismatch);
    }
    let sigma = params.ell_theta() / 2f64.sqrt();
    let ps = p.gaussian_smooth(sigma);
    let (dxx, dpx) = wx.gaussian_smooth(sigma).gradient();
    let (dxy, dpy) = wy.gaussian_smooth(sigma).gradient();
    let mut out = GridField::zeros(p.grid);
    for k in 0..out.values.len() {
        let bracket = dpx.values[k] * dxy.values[k] - dxx.values[k] * dpy.values[k];
        out.values[k] = ps.values[k] / bracket;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Kirchhoff point vortices
// ---------------------------------------------------------------------------

/// Point vortices with circulations quantized in units of `Ωℓħ²`.
#[derive(Debug, Clone)]
pub struct VortexSet {
    pub positions: Vec<(f64, f64)>,
    /// Integer multiples of the circulation quantum.
    pub charges: Vec<i64>,
    /// Optional uniform background rotation rate.
    pub background_rotation: f64,
}

impl VortexSet {
    pub fn new(
        positions: Vec<(f64, f64)>,
        charges: Vec<i64>,
        background_rotation: f64,
    ) -> Result<Self, HydroError> {
        if positions.len() != charges.len() {
            return Err(HydroError::ShapeMismatch);
        }
        if charges.iter().any(|&k| k == 0) {
            return Err(HydroError::ZeroCirculation);
        }
        for i in 0..positions.len() {
            for j in 0..i {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                if dx * dx + dy * dy == 0.0 {
                    return Err(HydroError::CoincidentVortices);
                }
            }
        }
        Ok(VortexSet {
            positions,
            charges,
            background_rotation,
        })
    }

    /// Circulation of vortex `i`: `kᵢ·Ω·ℓħ²`.
    pub fn circulations(&self, params: &PhysParams) -> Result<Vec<f64>, HydroError> {
        let quantum = params.omega * params.ell_hbar().powi(2);
        if quantum == 0.0 {
            return Err(HydroError::ZeroHbar);
        }
        Ok(self.charges.iter().map(|&k| k as f64 * quantum).collect())
    }

    /// True when every vortex sits inside `0.7·√(2N)·ℓθ` of the droplet of
    /// `N` particles (outside, image effects the model excludes matter).
    pub fn inside_droplet(&self, big_n: usize, params: &PhysParams) -> bool {
        let limit = 0.7 * (2.0 * big_n as f64).sqrt() * params.ell_theta();
        self.positions
            .iter()
            .all(|&(x, y)| (x * x + y * y).sqrt() < limit)
    }
}

/// Kirchhoff invariants: interaction energy `−(1/4π)Σ_{i≠j}ΓᵢΓⱼ ln rᵢⱼ`,
/// linear impulse `ΣΓᵢrᵢ`, and angular impulse `ΣΓᵢ|rᵢ|²`.
#[derive(Debug, Clone, Copy)]
pub struct KirchhoffInvariants {
    pub energy: f64,
    pub impulse: (f64, f64),
    pub angular_impulse: f64,
}

pub fn kirchhoff_invariants(
    set: &VortexSet,
    params: &PhysParams,
) -> Result<KirchhoffInvariants, HydroError> {
    let gamma = set.circulations(params)?;
    let mut energy = 0.0;
    for i in 0..set.positions.len() {
        for j in 0..i {
            let dx = set.positions[i].0 - set.positions[j].0;
            let dy = set.positions[i].1 - set.positions[j].1;
            energy -= gamma[i] * gamma[j] * (dx * dx + dy * dy).sqrt().ln()
                / (2.0 * std::f64::consts::PI);
        }
    }
    let mut impulse = (0.0, 0.0);
    let mut angular = 0.0;
    for (i, &(x, y)) in set.positions.iter().enumerate() {
        impulse.0 += gamma[i] * x;
        impulse.1 += gamma[i] * y;
        angular += gamma[i] * (x * x + y * y);
    }
    Ok(KirchhoffInvariants {
        energy,
        impulse,
        angular_impulse: angular,
    })
}

fn vortex_rhs(
    y: &RVec,
    gamma: &[f64],
    background: f64,
    collision_threshold: f64,
) -> Result<RVec, String> {
    let k = gamma.len();
    let mut out = RVec::zeros(2 * k);
    for i in 0..k {
        let (xi, yi) = (y[2 * i], y[2 * i + 1]);
        let mut vx = -background * yi;
        let mut vy = background * xi;
        for j in 0..k {
            if j == i {
                continue;
            }
            let dx = xi - y[2 * j];
            let dy = yi - y[2 * j + 1];
            let r2 = dx * dx + dy * dy;
            if r2 < collision_threshold * collision_threshold {
                return Err(format!(
                    "vortex pair ({i},{j}) within collision threshold: r = {}",
                    r2.sqrt()
                ));
            }
            let f = gamma[j] / (2.0 * std::f64::consts::PI * r2);
            vx -= f * dy;
            vy += f * dx;
        }
        out[2 * i] = vx;
        out[2 * i + 1] = vy;
    }
    Ok(out)
}

/// Advance the vortex set by `dt` (adaptive internally).
pub fn kirchhoff_step(
    set: &VortexSet,
    dt: f64,
    params: &PhysParams,
    collision_threshold: f64,
) -> Result<VortexSet, HydroError> {
    let traj = integrate_vortices(set, dt, &[], params, collision_threshold)?;
    Ok(traj.into_iter().last().expect("endpoint present").1)
}

/// Integrate vortex motion to `t1`, sampling at the requested times.
pub fn integrate_vortices(
    set: &VortexSet,
    t1: f64,
    sample_times: &[f64],
    params: &PhysParams,
    collision_threshold: f64,
) -> Result<Vec<(f64, VortexSet)>, HydroError> {
    let gamma = set.circulations(params)?;
    let background = set.background_rotation;
    let mut y0 = RVec::zeros(2 * set.positions.len());
    for (i, &(x, y)) in set.positions.iter().enumerate() {
        y0[2 * i] = x;
        y0[2 * i + 1] = y;
    }
    let opts = OdeOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        ..OdeOptions::default()
    };
    let rhs = |_t: f64, y: &RVec| vortex_rhs(y, &gamma, background, collision_threshold);
    let traj = integrate(rhs, &y0, 0.0, t1, sample_times, &opts)?;
    Ok(traj
        .into_iter()
        .map(|(t, y)| {
            let positions = (0..set.positions.len())
                .map(|i| (y[2 * i], y[2 * i + 1]))
                .collect();
            (
                t,
                VortexSet {
                    positions,
                    charges: set.charges.clone(),
                    background_rotation: background,
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{annihilation_matrix, embed_diagonal_gauge};
    use crate::noise::NoiseStream;

    fn unit() -> PhysParams {
        PhysParams::unit()
    }

    #[test]
    fn hermite_orthonormality() {
        let p = unit();
        let grid_n = 4000;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / grid_n as f64;
        for i in [0usize, 2, 5, 10] {
            for j in [0usize, 2, 4, 10] {
                let mut acc = 0.0;
                for k in 0..grid_n {
                    let x = a + (k as f64 + 0.5) * h;
                    acc += hermite_state(i, x, &p) * hermite_state(j, x, &p) * h;
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-10, "({i},{j}): {acc}");
            }
        }
        let peak = hermite_state(0, 0.0, &p);
        assert!((peak - std::f64::consts::PI.powf(-0.25)).abs() < 1e-14);
    }

    #[test]
    fn wigner_of_ground_state_is_gaussian() {
        let p = unit();
        let grid = Grid::square(6.0, 64).unwrap();
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = C64::new(1.0, 0.0);
        let (field, worst_im) = wigner_transform(&m, &grid, &p).unwrap();
        assert!(worst_im < 1e-8);
        for (ix, ip) in [(32, 32), (40, 32), (32, 45), (20, 25)] {
            let (x, q) = (grid.coord(ix), grid.coord(ip));
            let expect = 2.0 * (-(x * x + q * q)).exp();
            assert!(
                (field.at(ix, ip) - expect).abs() < 1e-6,
                "({x},{q}): {} vs {expect}",
                field.at(ix, ip)
            );
        }
        assert!((field.trace_integral(&p) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wigner_trace_identity_random_hermitian() {
        let p = unit();
        let big_n = 8;
        let mut rng = NoiseStream::new(7, 0);
        let mut m = CMat::zeros(big_n, big_n);
        for i in 0..big_n {
            for j in 0..=i {
                let z = rng.complex_normal();
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let grid = Grid::square(9.0, 96).unwrap();
        let (field, _) = wigner_transform(&m, &grid, &p).unwrap();
        let tr: f64 = (0..big_n).map(|i| m[(i, i)].re).sum();
        assert!(
            (field.trace_integral(&p) - tr).abs() < 1e-4 * tr.abs().max(1.0),
            "{} vs {tr}",
            field.trace_integral(&p)
        );
    }

    #[test]
    fn wigner_linearity() {
        let p = unit();
        let grid = Grid::square(5.0, 32).unwrap();
        let a = CMat::from_fn(2, 2, |i, j| C64::new((i + j) as f64, 0.0));
        let b = CMat::identity(2, 2);
        let (fa, _) = wigner_transform(&a, &grid, &p).unwrap();
        let (fb, _) = wigner_transform(&b, &grid, &p).unwrap();
        let (fab, _) = wigner_transform(&(&a + &b), &grid, &p).unwrap();
        for k in 0..fa.values.len() {
            assert!((fab.values[k] - fa.values[k] - fb.values[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn droplet_density_matches_laguerre_and_reports() {
        let p = unit();
        let big_n = 30;
        let grid = Grid::for_droplet(big_n, 128, &p).unwrap();
        let field = droplet_density(big_n, &grid, &p).unwrap();
        // Spot-check the quadrature against the closed-form Laguerre sum.
        for (ix, ip) in [(64, 64), (80, 64), (64, 90), (100, 100)] {
            let r = (grid.coord(ix).powi(2) + grid.coord(ip).powi(2)).sqrt();
            let oracle = laguerre_droplet(big_n, r, &p);
            assert!(
                (field.at(ix, ip) - oracle).abs() < 1e-5,
                "r={r}: {} vs {oracle}",
                field.at(ix, ip)
            );
        }
        let report = droplet_report(&field, big_n, &p);
        let expect_edge = (2.0 * big_n as f64).sqrt();
        assert!((report.plateau - 1.0).abs() < 0.05, "plateau {}", report.plateau);
        assert!(
            (report.edge_radius - expect_edge).abs() < 0.05 * expect_edge,
            "edge {} vs {expect_edge}",
            report.edge_radius
        );
        assert!(
            (report.trace_norm - big_n as f64).abs() < 1e-4 * big_n as f64,
            "trace {}",
            report.trace_norm
        );
        // Far tail below 1e-3 of the plateau.
        let far = laguerre_droplet(big_n, 2.0 * expect_edge, &p);
        assert!(far.abs() < 1e-3 * report.plateau);
    }

    #[test]
    fn droplet_trace_small_n() {
        let p = unit();
        // Well beyond the minimum radius so Gaussian tails are below 1e-6.
        let grid = Grid::square(8.0, 128).unwrap();
        let field = droplet_density(2, &grid, &p).unwrap();
        assert!((field.trace_integral(&p) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn velocity_rigid_displacement() {
        let p = unit();
        let big_n = 12;
        // Constant mode: V = c₁α₂ w⁰? The series starts at n=1, so emulate a
        // rigid shift with an explicit constant through eval at w=0 — use a
        // mode-1 series and check the linear profile instead, plus the
        // zero-series case.
        let grid = Grid::for_droplet(big_n, 32, &p).unwrap();
        let zero = DeformationSeries::new(vec![], big_n, 1e-2).unwrap();
        let v = velocity_field(&zero, &grid, &p);
        assert!(v.vx.values.iter().all(|&x| x == 0.0));
        assert!(v.vy.values.iter().all(|&x| x == 0.0));
        assert!(!v.budget_warning);
    }

    #[test]
    fn budget_warning_fires() {
        let p = unit();
        let series = DeformationSeries::single_mode(2, 0.5, 12, &p).unwrap();
        // single_mode sets the budget to 1.5·ε, so tighten it manually.
        let tight = DeformationSeries::new(series.coeffs.clone(), 12, 1e-3).unwrap();
        assert!(!tight.within_budget(&p));
        let grid = Grid::for_droplet(12, 32, &p).unwrap();
        assert!(velocity_field(&tight, &grid, &p).budget_warning);
    }

    #[test]
    fn circulation_identity_single_modes() {
        let p = unit();
        let big_n = 20;
        let grid = Grid::for_droplet(big_n, 384, &p).unwrap();
        // Off-center contour so both sides are nonzero for every mode.
        let rect = IndexRect {
            ix0: 200,
            ix1: 300,
            ip0: 180,
            ip1: 280,
        };
        for n in [1usize, 2, 3] {
            let series = DeformationSeries::single_mode(n, 1e-3, big_n, &p).unwrap();
            assert!(series.within_budget(&p));
            let v = velocity_field(&series, &grid, &p);
            let rho = delta_rho(&series, &grid, &p);
            let lhs = circulation(&v, rect);
            let rhs = p.theta / p.m * integrate_rect(&rho, rect);
            assert!(
                (lhs - rhs).abs() < 0.01 * lhs.abs().max(1e-12),
                "mode {n}: {lhs} vs {rhs}"
            );
            assert!(lhs.abs() > 1e-9, "mode {n}: trivial contour");
        }
    }

    #[test]
    fn vorticity_scaling_and_neutrality() {
        let p = unit();
        let big_n = 20;
        let grid = Grid::for_droplet(big_n, 96, &p).unwrap();
        let series = DeformationSeries::single_mode(2, 1e-3, big_n, &p).unwrap();
        let rho = delta_rho(&series, &grid, &p);
        let omega_f = vorticity_from_density(&rho, &p, 1e-6).unwrap();
        for k in 0..rho.values.len() {
            assert!((omega_f.values[k] - rho.values[k] * p.theta / p.m).abs() < 1e-14);
        }
        // Doubling δρ doubles ω.
        let mut rho2 = rho.clone();
        for v in &mut rho2.values {
            *v *= 2.0;
        }
        let omega2 = vorticity_from_density(&rho2, &p, 1e-6).unwrap();
        for k in 0..rho.values.len() {
            assert!((omega2.values[k] - 2.0 * omega_f.values[k]).abs() < 1e-13);
        }
        // A mode-1 (dilation) deformation is not neutral: must error.
        let dil = DeformationSeries::single_mode(1, 1e-3, big_n, &p).unwrap();
        let rho1 = delta_rho(&dil, &grid, &p);
        assert!(vorticity_from_density(&rho1, &p, 1e-6).is_err());
    }

    #[test]
    fn jacobian_density_reproduces_droplet() {
        let p = unit();
        let big_n = 16;
        let grid = Grid::for_droplet(big_n, 96, &p).unwrap();
        let a = annihilation_matrix(big_n, &p).unwrap();
        let x_op = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let y_op = (&a - a.adjoint()) * C64::new(0.0, -0.5);
        let (wx, _) = wigner_transform(&x_op, &grid, &p).unwrap();
        let (wy, _) = wigner_transform(&y_op, &grid, &p).unwrap();
        let pf = droplet_density(big_n, &grid, &p).unwrap();
        let rho = density_from_jacobian(&pf, &wx, &wy, &p).unwrap();
        // Compare against the same coarse-graining of P in the interior.
        let ps = pf.gaussian_smooth(p.ell_theta() / 2f64.sqrt());
        let edge = (2.0 * big_n as f64).sqrt();
        let mut worst: f64 = 0.0;
        for ip in 0..grid.n {
            for ix in 0..grid.n {
                let r = (grid.coord(ix).powi(2) + grid.coord(ip).powi(2)).sqrt();
                if r < 0.5 * edge {
                    worst = worst.max((rho.at(ix, ip) - ps.at(ix, ip)).abs());
                }
            }
        }
        assert!(worst < 0.02, "interior Jacobian deviation {worst}");
    }

    #[test]
    fn jacobian_density_time_independent_on_orbit() {
        // Exact rotation Z(t) = e^{−iΩt}Z(0) rotates (W_X, W_Y) rigidly, so
        // the Lagrangian density is unchanged; checked on a deformed state.
        let p = unit();
        let big_n = 12;
        let grid = Grid::for_droplet(big_n, 96, &p).unwrap();
        let positions = RVec::from_fn(big_n, |i, _| 0.55 * (i as f64 - 5.5));
        let momenta = RVec::zeros(big_n);
        let (xm, ym, _) = embed_diagonal_gauge(&positions, &momenta, &p).unwrap();
        let z0 = &xm + &ym * C64::new(0.0, 1.0);
        let rho_at = |t: f64| {
            let phase = C64::from_polar(1.0, -p.omega * t);
            let z = &z0 * phase;
            let x_op = (&z + z.adjoint()) * C64::new(0.5, 0.0);
            let y_op = (&z - z.adjoint()) * C64::new(0.0, -0.5);
            let (wx, _) = wigner_transform(&x_op, &grid, &p).unwrap();
            let (wy, _) = wigner_transform(&y_op, &grid, &p).unwrap();
            let pf = droplet_density(big_n, &grid, &p).unwrap();
            density_from_jacobian(&pf, &wx, &wy, &p).unwrap()
        };
        let r0 = rho_at(0.0);
        let r1 = rho_at(0.3);
        let edge = (2.0 * big_n as f64).sqrt();
        // The density field itself rotates rigidly; compare rotation-averaged
        // radial content via interior integrals.
        let interior = |f: &GridField| {
            let mut acc = 0.0;
            for ip in 0..grid.n {
                for ix in 0..grid.n {
                    let r = (grid.coord(ix).powi(2) + grid.coord(ip).powi(2)).sqrt();
                    if r < 0.5 * edge {
                        acc += f.at(ix, ip);
                    }
                }
            }
            acc * grid.cell_area()
        };
        let (i0, i1) = (interior(&r0), interior(&r1));
        assert!(
            (i0 - i1).abs() < 0.01 * i0.abs().max(1.0),
            "interior mass changed: {i0} vs {i1}"
        );
    }

    #[test]
    fn single_vortex_stationary() {
        let p = unit();
        let set = VortexSet::new(vec![(1.0, 0.5)], vec![1], 0.0).unwrap();
        let out = kirchhoff_step(&set, 5.0, &p, 1e-9).unwrap();
        assert!((out.positions[0].0 - 1.0).abs() < 1e-12);
        assert!((out.positions[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_vortex_corotation_period() {
        let p = unit();
        let d = 1.3;
        let set = VortexSet::new(vec![(-d / 2.0, 0.0), (d / 2.0, 0.0)], vec![1, 1], 0.0).unwrap();
        let gamma = p.omega * p.ell_hbar().powi(2);
        let freq = gamma / (std::f64::consts::PI * d * d);
        let period = 2.0 * std::f64::consts::PI / freq;
        let out = kirchhoff_step(&set, period, &p, 1e-9).unwrap();
        for i in 0..2 {
            let dx = out.positions[i].0 - set.positions[i].0;
            let dy = out.positions[i].1 - set.positions[i].1;
            assert!(
                (dx * dx + dy * dy).sqrt() < 1e-6,
                "vortex {i} displaced by {}",
                (dx * dx + dy * dy).sqrt()
            );
        }
    }

    #[test]
    fn four_vortex_invariants_conserved() {
        let p = unit();
        let set = VortexSet::new(
            vec![(0.9, 0.1), (-0.6, 0.8), (-0.2, -0.7), (0.4, -0.3)],
            vec![1, 2, -1, 1],
            0.0,
        )
        .unwrap();
        let inv0 = kirchhoff_invariants(&set, &p).unwrap();
        let samples: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.02).collect();
        let traj = integrate_vortices(&set, 20.0, &samples, &p, 1e-6).unwrap();
        assert!(traj.len() >= 1000);
        for (t, s) in &traj {
            let inv = kirchhoff_invariants(s, &p).unwrap();
            let scale = inv0.energy.abs().max(1.0);
            assert!((inv.energy - inv0.energy).abs() < 1e-9 * scale, "t={t}");
            assert!((inv.impulse.0 - inv0.impulse.0).abs() < 1e-9, "t={t}");
            assert!((inv.impulse.1 - inv0.impulse.1).abs() < 1e-9, "t={t}");
            assert!(
                (inv.angular_impulse - inv0.angular_impulse).abs() < 1e-9,
                "t={t}"
            );
        }
    }

    #[test]
    fn vortex_time_reversal() {
        let p = unit();
        let set = VortexSet::new(vec![(0.7, 0.0), (-0.4, 0.5), (0.0, -0.6)], vec![1, -1, 2], 0.0)
            .unwrap();
        let fwd = kirchhoff_step(&set, 2.0, &p, 1e-9).unwrap();
        let mut flipped = fwd.clone();
        for c in &mut flipped.charges {
            *c = -*c;
        }
        let back = kirchhoff_step(&flipped, 2.0, &p, 1e-9).unwrap();
        for i in 0..3 {
            assert!((back.positions[i].0 - set.positions[i].0).abs() < 1e-9);
            assert!((back.positions[i].1 - set.positions[i].1).abs() < 1e-9);
        }
    }

    #[test]
    fn vortex_collision_is_error() {
        let p = unit();
        // Opposite charges translate toward... equal charges orbit; to force
        // an approach use a tight pair under strong background shear — easier:
        // set the threshold above the pair distance so the guard trips
        // immediately.
        let set = VortexSet::new(vec![(0.0, 0.0), (0.05, 0.0)], vec![1, 1], 0.0).unwrap();
        let err = kirchhoff_step(&set, 1.0, &p, 0.1);
        assert!(err.is_err());
    }

    #[test]
    fn droplet_bound_warning() {
        let p = unit();
        let inside = VortexSet::new(vec![(1.0, 0.0)], vec![1], 0.0).unwrap();
        assert!(inside.inside_droplet(10, &p));
        let outside = VortexSet::new(vec![(4.0, 0.0)], vec![1], 0.0).unwrap();
        assert!(!outside.inside_droplet(10, &p));
    }

    #[test]
    fn quantization_validation() {
        assert!(VortexSet::new(vec![(0.0, 0.0)], vec![0], 0.0).is_err());
        assert!(VortexSet::new(vec![(0.0, 0.0), (0.0, 0.0)], vec![1, 1], 0.0).is_err());
        let p0 = PhysParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let s = VortexSet::new(vec![(1.0, 0.0)], vec![1], 0.0).unwrap();
        assert!(s.circulations(&p0).is_err());
    }
}

