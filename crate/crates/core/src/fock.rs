//! Level-truncated bosonic Fock space over the modes αₙ.
//!
//! Basis states are labelled by integer partitions; the orthonormal state for
//! a partition with multiplicities `mₙ` carries mode-operator amplitudes
//! `α†ₙ: √((mₙ+1)·n·ℓħ²)`, realizing `[αₙ, α†ₘ] = nℓħ² δₙₘ` exactly away from
//! the truncation boundary.
//!
//! The conserved operators are
//! `I₁ = Σ α†ₙαₙ + (N+1)(ℓθ²N + ℓħ²)` (diagonal, eigenvalue `ℓħ²|λ| + const`)
//! and
//! `I₂ = ℓθ Σ_{m,n} (α†_{m+n}αₘαₙ + h.c.) + Σₙ ((ℓħ²−ℓθ²)n + ℓθ²N) α†ₙαₙ`,
//! whose per-level spectrum is exactly
//! `E(λ) = ℓħ⁴Σλᵢ² − ℓħ²ℓθ²Σ(2i−1)λᵢ + Nℓθ²ℓħ²|λ|`
//! `     = ℓħ²·Q₂(λᵀ) + 2ℓħ⁴·Σλᵢ²`,
//! i.e. the Q₂ eigenvalue formula evaluated on the transposed Young diagram
//! plus one global affine calibration.
//!
//! Virasoro generators use the Feigin–Fuchs form over unit-normalized modes
//! `aₙ = αₙ/ℓħ`:
//! `Lₙ = ½ Σ_{k≠0, n−k≠0} :a_k a_{n−k}: + κ·n·aₙ` for every `n ≠ 0` (the same
//! formula for negative `n` — transposing instead flips the background-charge
//! sign and the measured central charge), with `κ = (γ − 1/γ)/√2`,
//! `γ = ℓθ/ℓħ`, and `L₀ = level + h₀`, `h₀ = −κ²/2`. The measured central
//! charge is `c = 1 − 12κ² = 1 − 6(γ − 1/γ)²`. Note `L₋ₙ = Lₙ†` only at
//! `γ = 1`.

use std::collections::HashMap;

use thiserror::Error;

use crate::params::PhysParams;
use crate::{RMat, RVec};

#[derive(Debug, Error)]
pub enum FockError {
    #[error("parts must be weakly decreasing and positive")]
    BadPartition,
    #[error("mode index {0} out of range 1..={1}")]
    ModeOutOfRange(usize, usize),
    #[error("level {0} exceeds truncation {1}")]
    LevelOutOfRange(usize, usize),
    #[error("truncation {0} too small for this operation (need at least {1})")]
    TruncationTooSmall(usize, usize),
    #[error("operator dimensions disagree: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("Virasoro mode 0 has no generator form; use the L0 builder")]
    ZeroMode,
}

/// Integer partition (weakly decreasing positive parts).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self, FockError> {
        for w in parts.windows(2) {
            if w[1] > w[0] {
                return Err(FockError::BadPartition);
            }
        }
        if parts.iter().any(|&p| p == 0) {
            return Err(FockError::BadPartition);
        }
        Ok(Partition { parts })
    }

    pub fn empty() -> Self {
        Partition { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// `|λ| = Σλᵢ`.
    pub fn level(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Multiplicity of the part `n`.
    pub fn multiplicity(&self, n: usize) -> usize {
        self.parts.iter().filter(|&&p| p == n).count()
    }

    /// Transposed (conjugate) Young diagram.
    pub fn conjugate(&self) -> Partition {
        if self.parts.is_empty() {
            return Partition::empty();
        }
        let parts = (1..=self.parts[0])
            .map(|k| self.parts.iter().filter(|&&p| p >= k).count())
            .collect();
        Partition { parts }
    }

    /// Add one part `n`, keeping the weakly decreasing order.
    pub fn with_part(&self, n: usize) -> Partition {
        let mut parts = self.parts.clone();
        let pos = parts.partition_point(|&p| p >= n);
        parts.insert(pos, n);
        Partition { parts }
    }

    /// `z_λ = Π kᵐᵏ mₖ!` — the symmetric-function normalization constant.
    pub fn z_factor(&self) -> f64 {
        let mut z = 1.0;
        let max = self.parts.first().copied().unwrap_or(0);
        for k in 1..=max {
            let m = self.multiplicity(k);
            z *= (k as f64).powi(m as i32);
            for j in 1..=m {
                z *= j as f64;
            }
        }
        z
    }

    /// Dominance order: true when `self ⊵ other` (requires equal level).
    pub fn dominates(&self, other: &Partition) -> bool {
        let mut sa = 0usize;
        let mut sb = 0usize;
        for i in 0..self.parts.len().max(other.parts.len()) {
            sa += self.parts.get(i).copied().unwrap_or(0);
            sb += other.parts.get(i).copied().unwrap_or(0);
            if sa < sb {
                return false;
            }
        }
        true
    }

    pub fn label(&self) -> String {
        if self.parts.is_empty() {
            "()".to_string()
        } else {
            format!(
                "({})",
                self.parts
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        }
    }
}

/// All partitions of exactly `k`, in descending lexicographic order.
pub fn partitions_of(k: usize) -> Vec<Partition> {
    fn rec(remaining: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition {
                parts: prefix.clone(),
            });
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            rec(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

/// The canonical basis order: graded by level, then descending lexicographic
/// within each level (so level 4 lists (4),(3,1),(2,2),(2,1,1),(1,1,1,1)).
pub fn enumerate_basis(lambda_max: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    for k in 0..=lambda_max {
        out.extend(partitions_of(k));
    }
    out
}

/// Indexed partition basis at truncation Λ.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub lambda_max: usize,
    pub partitions: Vec<Partition>,
    index: HashMap<Partition, usize>,
    /// `(start, len)` of each level block.
    level_blocks: Vec<(usize, usize)>,
}

impl FockBasis {
    pub fn new(lambda_max: usize) -> Self {
        let partitions = enumerate_basis(lambda_max);
        let index = partitions
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let mut level_blocks = Vec::with_capacity(lambda_max + 1);
        let mut start = 0usize;
        for k in 0..=lambda_max {
            let len = partitions[start..]
                .iter()
                .take_while(|p| p.level() == k)
                .count();
            level_blocks.push((start, len));
            start += len;
        }
        FockBasis {
            lambda_max,
            partitions,
            index,
            level_blocks,
        }
    }

    pub fn dim(&self) -> usize {
        self.partitions.len()
    }

    pub fn index_of(&self, p: &Partition) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn level_block(&self, level: usize) -> (usize, usize) {
        self.level_blocks[level]
    }
}

/// Sparse operator in the partition basis with level-shift bookkeeping.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    /// Row level minus column level for every entry; `None` when mixed
    /// (e.g. sums of different shifts).
    pub shift: Option<i64>,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    pub fn from_dense(m: &RMat, basis: &FockBasis) -> Self {
        let mut entries = Vec::new();
        let mut shift: Option<Option<i64>> = None;
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v != 0.0 {
                    let s = basis.partitions[r].level() as i64 - basis.partitions[c].level() as i64;
                    shift = match shift {
                        None => Some(Some(s)),
                        Some(Some(prev)) if prev == s => Some(Some(s)),
                        _ => Some(None),
                    };
                    entries.push((r, c, v));
                }
            }
        }
        SparseOperator {
            dim: m.nrows(),
            shift: shift.flatten(),
            entries,
        }
    }

    pub fn to_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn apply(&self, v: &RVec) -> RVec {
        let mut out = RVec::zeros(self.dim);
        for &(r, c, val) in &self.entries {
            out[r] += val * v[c];
        }
        out
    }
}

/// Matrix of the creation mode α†ₙ (`kind = Raise`) or αₙ (`Lower`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Raise,
    Lower,
}

/// Dense creation matrix for mode n with amplitude √((mₙ+1)·n·ℓħ²).
fn creation_dense(n: usize, basis: &FockBasis, lh2: f64) -> RMat {
    let d = basis.dim();
    let mut m = RMat::zeros(d, d);
    for (col, p) in basis.partitions.iter().enumerate() {
        if p.level() + n <= basis.lambda_max {
            let mult = p.multiplicity(n);
            let q = p.with_part(n);
            let row = basis.index_of(&q).expect("within truncation");
            m[(row, col)] = ((mult as f64 + 1.0) * n as f64 * lh2).sqrt();
        }
    }
    m
}

pub fn mode_operator(
    n: usize,
    kind: ModeKind,
    basis: &FockBasis,
    params: &PhysParams,
) -> Result<SparseOperator, FockError> {
    if n == 0 || n > basis.lambda_max {
        return Err(FockError::ModeOutOfRange(n, basis.lambda_max));
    }
    let lh2 = params.ell_hbar().powi(2);
    let m = creation_dense(n, basis, lh2);
    let m = match kind {
        ModeKind::Raise => m,
        ModeKind::Lower => m.transpose(),
    };
    Ok(SparseOperator::from_dense(&m, basis))
}

/// `I₁ = Σₙ α†ₙαₙ + (N+1)(ℓθ²N + ℓħ²)·𝟙`, diagonal with eigenvalue
/// `ℓħ²|λ| + const`.
pub fn build_i1(basis: &FockBasis, big_n: usize, params: &PhysParams) -> SparseOperator {
    let lt2 = params.ell_theta().powi(2);
    let lh2 = params.ell_hbar().powi(2);
    let constant = (big_n as f64 + 1.0) * (lt2 * big_n as f64 + lh2);
    let d = basis.dim();
    let mut m = RMat::zeros(d, d);
    for (i, p) in basis.partitions.iter().enumerate() {
        m[(i, i)] = lh2 * p.level() as f64 + constant;
    }
    SparseOperator::from_dense(&m, basis)
}

/// The level-preserving second conserved charge (see module docs).
pub fn build_i2(basis: &FockBasis, big_n: usize, params: &PhysParams) -> SparseOperator {
    let lt2 = params.ell_theta().powi(2);
    let lh2 = params.ell_hbar().powi(2);
    let lt = lt2.sqrt();
    let lmax = basis.lambda_max;
    let d = basis.dim();

    let create: Vec<RMat> = (1..=lmax.max(1))
        .map(|n| creation_dense(n, basis, lh2))
        .collect();
    let c = |n: usize| -> &RMat { &create[n - 1] };

    let mut i2 = RMat::zeros(d, d);
    for m in 1..=lmax {
        for n in 1..=lmax {
            if m + n <= lmax {
                let t = c(m + n) * c(m).transpose() * c(n).transpose();
                i2 += (&t + t.transpose()) * lt;
            }
        }
    }
    for n in 1..=lmax {
        let coeff = (lh2 - lt2) * n as f64 + lt2 * big_n as f64;
        i2 += c(n) * c(n).transpose() * coeff;
    }
    SparseOperator::from_dense(&i2, basis)
}

/// Exact per-level I₂ eigenvalue for the state labelled λ:
/// `E(λ) = ℓħ⁴Σλᵢ² − ℓħ²ℓθ²Σ(2i−1)λᵢ + Nℓθ²ℓħ²|λ|`.
pub fn i2_exact_eigenvalue(lam: &Partition, big_n: usize, params: &PhysParams) -> f64 {
    let lt2 = params.ell_theta().powi(2);
    let lh2 = params.ell_hbar().powi(2);
    let sum_sq: f64 = lam.parts().iter().map(|&l| (l * l) as f64).sum();
    let sum_odd: f64 = lam
        .parts()
        .iter()
        .enumerate()
        .map(|(i, &l)| ((2 * (i + 1) - 1) * l) as f64)
        .sum();
    lh2 * lh2 * sum_sq - lh2 * lt2 * sum_odd + big_n as f64 * lt2 * lh2 * lam.level() as f64
}

/// `Q₂(λ) = ℓθ² Σᵢ [(N + (ℓħ²/ℓθ²)(1 − 2i))λᵢ − λᵢ²]`.
pub fn q2_eigenvalue(lam: &Partition, big_n: usize, params: &PhysParams) -> f64 {
    let lt2 = params.ell_theta().powi(2);
    let lh2 = params.ell_hbar().powi(2);
    let ratio = lh2 / lt2;
    lt2 * lam
        .parts()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            (big_n as f64 + ratio * (1.0 - 2.0 * (i + 1) as f64)) * l as f64 - (l * l) as f64
        })
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Virasoro sector (Feigin–Fuchs over unit modes)
// ---------------------------------------------------------------------------

/// Background charge `κ = (γ − 1/γ)/√2`, `γ = ℓθ/ℓħ`.
pub fn background_charge(params: &PhysParams) -> f64 {
    let gamma = params.ell_theta() / params.ell_hbar();
    (gamma - 1.0 / gamma) / 2f64.sqrt()
}

/// Unit-normalized creation matrices `a₋ₙ` with `[aₙ, a₋ₘ] = n δₙₘ`.
fn unit_creation(basis: &FockBasis) -> Vec<RMat> {
    (1..=basis.lambda_max.max(1))
        .map(|n| {
            let d = basis.dim();
            let mut m = RMat::zeros(d, d);
            for (col, p) in basis.partitions.iter().enumerate() {
                if p.level() + n <= basis.lambda_max {
                    let mult = p.multiplicity(n);
                    let q = p.with_part(n);
                    let row = basis.index_of(&q).expect("within truncation");
                    m[(row, col)] = ((mult as f64 + 1.0) * n as f64).sqrt();
                }
            }
            m
        })
        .collect()
}

/// Feigin–Fuchs generator `Lₙ` for any `n ≠ 0` (see module docs).
pub fn build_ln(n: i64, basis: &FockBasis, params: &PhysParams) -> Result<SparseOperator, FockError> {
    if n == 0 {
        return Err(FockError::ZeroMode);
    }
    let lmax = basis.lambda_max as i64;
    if n.unsigned_abs() as usize > basis.lambda_max {
        return Err(FockError::ModeOutOfRange(
            n.unsigned_abs() as usize,
            basis.lambda_max,
        ));
    }
    let kappa = background_charge(params);
    let create = unit_creation(basis);
    // a_k for signed k: k > 0 annihilates (transpose of the creation matrix).
    let amode = |k: i64| -> RMat {
        if k > 0 {
            create[(k - 1) as usize].transpose()
        } else {
            create[(-k - 1) as usize].clone()
        }
    };
    let d = basis.dim();
    let mut m = RMat::zeros(d, d);
    for k in -lmax..=lmax {
        let j = n - k;
        if k == 0 || j == 0 || j.abs() > lmax {
            continue;
        }
        // Normal order: creation (negative index) to the left.
        let (l, r) = if k > 0 && j < 0 { (j, k) } else { (k, j) };
        m += amode(l) * amode(r) * 0.5;
    }
    m += amode(n) * (kappa * n as f64);
    Ok(SparseOperator::from_dense(&m, basis))
}

/// `L₀ = level + h₀` with the Feigin–Fuchs vacuum weight `h₀ = −κ²/2`
/// (fixed by `[L₁, L₋₁] = 2L₀`).
pub fn build_l0(basis: &FockBasis, params: &PhysParams) -> SparseOperator {
    let kappa = background_charge(params);
    let h0 = -0.5 * kappa * kappa;
    let d = basis.dim();
    let mut m = RMat::zeros(d, d);
    for (i, p) in basis.partitions.iter().enumerate() {
        m[(i, i)] = p.level() as f64 + h0;
    }
    SparseOperator::from_dense(&m, basis)
}

/// Result of a Virasoro closure check.
#[derive(Debug, Clone)]
pub struct VirasoroDefect {
    pub m: i64,
    pub n: i64,
    /// Max-entry norm of `[Lₘ,Lₙ] − (m−n)L_{m+n} − central` on the trusted
    /// window (levels ≤ Λ − |m| − |n|).
    pub defect_norm: f64,
    /// Central charge extracted from the vacuum entry when `m + n = 0` and
    /// `|m| ≥ 2`.
    pub c_measured: Option<f64>,
}

/// Compute `[Lₘ, Lₙ] − (m−n)L_{m+n}` on the trusted window.
pub fn virasoro_defect(
    m: i64,
    n: i64,
    basis: &FockBasis,
    params: &PhysParams,
) -> Result<VirasoroDefect, FockError> {
    let window = (m.unsigned_abs() + n.unsigned_abs()) as usize;
    if basis.lambda_max < window + 2 {
        return Err(FockError::TruncationTooSmall(basis.lambda_max, window + 2));
    }
    let lm = build_ln(m, basis, params)?.to_dense();
    let ln = build_ln(n, basis, params)?.to_dense();
    let mut comm = &lm * &ln - &ln * &lm;
    let lmn = if m + n == 0 {
        build_l0(basis, params).to_dense()
    } else {
        build_ln(m + n, basis, params)?.to_dense()
    };
    comm -= lmn * (m - n) as f64;

    let mut c_measured = None;
    if m + n == 0 && m.abs() >= 2 {
        let central = comm[(0, 0)];
        let factor = (m * (m * m - 1)) as f64 / 12.0;
        c_measured = Some(central / factor);
        // Remove the central scalar before measuring the closure defect.
        for i in 0..comm.nrows() {
            comm[(i, i)] -= central;
        }
    }

    let trusted = basis.lambda_max - window;
    let mut defect: f64 = 0.0;
    for (r, pr) in basis.partitions.iter().enumerate() {
        if pr.level() > trusted {
            continue;
        }
        for (c, pc) in basis.partitions.iter().enumerate() {
            if pc.level() > trusted {
                continue;
            }
            defect = defect.max(comm[(r, c)].abs());
        }
    }
    Ok(VirasoroDefect {
        m,
        n,
        defect_norm: defect,
        c_measured,
    })
}

/// Central charge predicted by the background charge: `c = 1 − 6(γ − 1/γ)²`.
pub fn central_charge_prediction(params: &PhysParams) -> f64 {
    let gamma = params.ell_theta() / params.ell_hbar();
    1.0 - 6.0 * (gamma - 1.0 / gamma).powi(2)
}

// ---------------------------------------------------------------------------
// Spectrum matching
// ---------------------------------------------------------------------------

/// Global affine calibration mapping `Q₂(λᵀ)` to the I₂ spectrum:
/// `predicted(λ) = scale·Q₂(λᵀ) + c2·Σλᵢ² + c3·|λ| + c4`.
#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    pub scale: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Calibration {
    pub fn predict(&self, lam: &Partition, big_n: usize, params: &PhysParams) -> f64 {
        let sum_sq: f64 = lam.parts().iter().map(|&l| (l * l) as f64).sum();
        self.scale * q2_eigenvalue(&lam.conjugate(), big_n, params)
            + self.c2 * sum_sq
            + self.c3 * lam.level() as f64
            + self.c4
    }
}

/// Sorted eigenvalues of one level block of a level-preserving operator.
pub fn level_eigenvalues(
    op: &SparseOperator,
    basis: &FockBasis,
    level: usize,
) -> Result<Vec<f64>, FockError> {
    if level > basis.lambda_max {
        return Err(FockError::LevelOutOfRange(level, basis.lambda_max));
    }
    let (start, len) = basis.level_block(level);
    let dense = op.to_dense();
    let block = dense.view((start, start), (len, len)).into_owned();
    let mut ev: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

/// One matched eigenvalue in a spectrum report.
#[derive(Debug, Clone)]
pub struct MatchEntry {
    pub partition: Partition,
    pub eigenvalue: f64,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub level: usize,
    pub entries: Vec<MatchEntry>,
    /// Pairs of partitions whose predictions collide within tolerance —
    /// genuine crossings needing eigenvector disambiguation.
    pub degenerate_pairs: Vec<(Partition, Partition)>,
    pub max_residual: f64,
}

/// Fit the global calibration by least squares over all levels ≤ `fit_max`.
/// Eigenvalues are paired to partitions by proximity to the exact per-level
/// spectrum (greedy on sorted order).
pub fn calibrate_i2(
    op: &SparseOperator,
    basis: &FockBasis,
    big_n: usize,
    params: &PhysParams,
    fit_max: usize,
) -> Result<Calibration, FockError> {
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for level in 0..=fit_max.min(basis.lambda_max) {
        for (lam, ev) in paired_level(op, basis, level, big_n, params)? {
            let sum_sq: f64 = lam.parts().iter().map(|&l| (l * l) as f64).sum();
            rows.push([
                q2_eigenvalue(&lam.conjugate(), big_n, params),
                sum_sq,
                lam.level() as f64,
                1.0,
            ]);
            rhs.push(ev);
        }
    }
    let m = RMat::from_fn(rows.len(), 4, |r, c| rows[r][c]);
    let b = RVec::from_vec(rhs);
    let svd = m.svd(true, true);
    let sol = svd
        .solve(&b, 1e-12)
        .map_err(|_| FockError::TruncationTooSmall(basis.lambda_max, fit_max))?;
    Ok(Calibration {
        scale: sol[0],
        c2: sol[1],
        c3: sol[2],
        c4: sol[3],
    })
}

/// Pair each partition of a level with an eigenvalue of the level block by
/// sorting both by the exact spectrum.
fn paired_level(
    op: &SparseOperator,
    basis: &FockBasis,
    level: usize,
    big_n: usize,
    params: &PhysParams,
) -> Result<Vec<(Partition, f64)>, FockError> {
    let ev = level_eigenvalues(op, basis, level)?;
    let (start, len) = basis.level_block(level);
    let mut labelled: Vec<(Partition, f64)> = basis.partitions[start..start + len]
        .iter()
        .map(|p| (p.clone(), i2_exact_eigenvalue(p, big_n, params)))
        .collect();
    labelled.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(labelled
        .into_iter()
        .zip(ev)
        .map(|((p, _), e)| (p, e))
        .collect())
}

/// Match one level of I₂ against the calibrated Q₂ prediction.
pub fn diagonalize_and_match(
    op: &SparseOperator,
    basis: &FockBasis,
    level: usize,
    big_n: usize,
    params: &PhysParams,
    cal: &Calibration,
) -> Result<SpectrumReport, FockError> {
    let pairs = paired_level(op, basis, level, big_n, params)?;
    let mut entries: Vec<MatchEntry> = pairs
        .into_iter()
        .map(|(partition, eigenvalue)| {
            let predicted = cal.predict(&partition, big_n, params);
            MatchEntry {
                residual: eigenvalue - predicted,
                partition,
                eigenvalue,
                predicted,
            }
        })
        .collect();
    entries.sort_by(|a, b| a.partition.cmp(&b.partition));

    // Flag collisions of the Q₂ label value: such pairs cannot be told apart
    // by the Q₂ eigenvalue alone and need eigenvector disambiguation.
    let q2: Vec<f64> = entries
        .iter()
        .map(|e| q2_eigenvalue(&e.partition.conjugate(), big_n, params))
        .collect();
    let mut degenerate_pairs = Vec::new();
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            if (q2[i] - q2[j]).abs() < 1e-9 * q2[i].abs().max(1.0) {
                degenerate_pairs
                    .push((entries[i].partition.clone(), entries[j].partition.clone()));
            }
        }
    }
    let max_residual = entries
        .iter()
        .map(|e| e.residual.abs())
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        level,
        entries,
        degenerate_pairs,
        max_residual,
    })
}

/// Match a level of the diagonal I₁ against `ℓħ²|λ| + (N+1)(ℓθ²N + ℓħ²)`.
pub fn match_i1(
    op: &SparseOperator,
    basis: &FockBasis,
    level: usize,
    big_n: usize,
    params: &PhysParams,
) -> Result<SpectrumReport, FockError> {
    let ev = level_eigenvalues(op, basis, level)?;
    let lt2 = params.ell_theta().powi(2);
    let lh2 = params.ell_hbar().powi(2);
    let constant = (big_n as f64 + 1.0) * (lt2 * big_n as f64 + lh2);
    let (start, len) = basis.level_block(level);
    let predicted = lh2 * level as f64 + constant;
    let entries: Vec<MatchEntry> = basis.partitions[start..start + len]
        .iter()
        .zip(ev)
        .map(|(p, e)| MatchEntry {
            partition: p.clone(),
            eigenvalue: e,
            predicted,
            residual: e - predicted,
        })
        .collect();
    let max_residual = entries
        .iter()
        .map(|e| e.residual.abs())
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        level,
        entries,
        degenerate_pairs: Vec::new(),
        max_residual,
    })
}
