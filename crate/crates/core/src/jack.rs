//! Exact-rational Jack polynomial oracle and its Fock-space embedding.
//!
//! Jack polynomials `P_λ(α)` are computed in the monomial basis by
//! Gram–Schmidt under the power-sum inner product
//! `⟨p_λ, p_μ⟩ = δ_{λμ} z_λ α^{ℓ(λ)}`, processing partitions in ascending
//! lexicographic order so each `P_λ = m_λ + (dominance-lower terms)`. All
//! arithmetic is exact (`BigRational`); f64 couplings convert exactly since
//! every finite f64 is a dyadic rational.
//!
//! The embedding into the truncated Fock space sends
//! `pₙ ↦ (√α/ℓħ)·α†ₙ` with `α = ℓħ²/ℓθ²`; embedded Jack states are exact
//! eigenvectors of I₂ with eigenvalue `E(λ)` (the Jack label itself — the
//! matching Q₂ label is the transposed diagram).

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

use crate::fock::{
    build_i2, i2_exact_eigenvalue, mode_operator, partitions_of, FockBasis, ModeKind, Partition,
};
use crate::params::PhysParams;
use crate::RVec;

#[derive(Debug, Error)]
pub enum JackError {
    #[error("alpha must be a positive rational, got {0}")]
    BadAlpha(f64),
    #[error("alpha {0} is not exactly representable")]
    AlphaNotRepresentable(f64),
    #[error("transition matrix is singular at degree {0}")]
    SingularTransition(usize),
    #[error("truncation {0} below Jack degree {1}")]
    TruncationTooSmall(usize, usize),
    #[error("fock error: {0}")]
    Fock(#[from] crate::fock::FockError),
}

/// Exact expansion of a symmetric function of fixed degree in some basis,
/// keyed by partition.
pub type Expansion = BTreeMap<Partition, BigRational>;

fn rational_from_f64(x: f64) -> Result<BigRational, JackError> {
    BigRational::from_float(x).ok_or(JackError::AlphaNotRepresentable(x))
}

/// Multiply a monomial-basis expansion by the power sum `p_r`.
///
/// For each distinct part value `u` of `μ` (and `u = 0`, meaning a new part),
/// raising one `u` to `u + r` produces `ν` with coefficient
/// `mult_ν(u + r)` — the number of positions of `ν` that reduce back to `μ`.
pub fn mul_power_sum(expansion: &Expansion, r: usize) -> Expansion {
    let mut out = Expansion::new();
    for (mu, coeff) in expansion {
        let mut values: Vec<usize> = mu.parts().to_vec();
        values.dedup();
        values.push(0);
        for u in values {
            let nu = if u == 0 {
                mu.with_part(r)
            } else {
                let mut parts: Vec<usize> = mu.parts().to_vec();
                let pos = parts.iter().position(|&p| p == u).expect("present");
                parts.remove(pos);
                let tmp = Partition::new(parts).expect("still a partition");
                tmp.with_part(u + r)
            };
            let mult = nu.multiplicity(u + r);
            let entry = out.entry(nu).or_insert_with(BigRational::zero);
            *entry += coeff * BigRational::from(BigInt::from(mult));
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Monomial-basis expansion of the power sum `p_λ`.
pub fn power_to_monomial(lam: &Partition) -> Expansion {
    let mut exp = Expansion::new();
    exp.insert(Partition::empty(), BigRational::one());
    for &r in lam.parts() {
        exp = mul_power_sum(&exp, r);
    }
    exp
}

/// Exact inverse of a square rational matrix by Gauss–Jordan elimination.
fn rational_inverse(mut a: Vec<Vec<BigRational>>) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] /= &p;
            inv[col][j] /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    let av = &a[col][j] * &f;
                    a[r][j] -= av;
                    let iv = &inv[col][j] * &f;
                    inv[r][j] -= iv;
                }
            }
        }
    }
    Some(inv)
}

/// Basis-change tables between power sums and monomials at one degree.
pub struct TransitionTables {
    pub degree: usize,
    /// Partitions of `degree` in ascending lexicographic order.
    pub parts: Vec<Partition>,
    /// `p_λ = Σ_μ p2m[λ][μ] m_μ`.
    p2m: Vec<Vec<BigRational>>,
    /// `m_μ = Σ_λ m2p[μ][λ] p_λ`.
    m2p: Vec<Vec<BigRational>>,
}

impl TransitionTables {
    pub fn new(degree: usize) -> Result<Self, JackError> {
        let mut parts = partitions_of(degree);
        parts.reverse(); // ascending lexicographic
        let index: BTreeMap<Partition, usize> = parts
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let n = parts.len();
        let mut p2m = vec![vec![BigRational::zero(); n]; n];
        for (i, lam) in parts.iter().enumerate() {
            for (mu, c) in power_to_monomial(lam) {
                p2m[i][index[&mu]] = c;
            }
        }
        // Rows of p2m express p_λ over m, so the matrix inverse directly
        // expresses each m_μ over p.
        let m2p = rational_inverse(p2m.clone())
            .ok_or(JackError::SingularTransition(degree))?;
        Ok(TransitionTables {
            degree,
            parts,
            p2m,
            m2p,
        })
    }

    pub fn index_of(&self, p: &Partition) -> Option<usize> {
        self.parts.iter().position(|q| q == p)
    }

    /// Convert a monomial-basis coefficient vector to the power-sum basis.
    pub fn monomial_to_power(&self, m_coeffs: &[BigRational]) -> Vec<BigRational> {
        let n = self.parts.len();
        let mut out = vec![BigRational::zero(); n];
        for (mu, c) in m_coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for lam in 0..n {
                if !self.m2p[mu][lam].is_zero() {
                    out[lam] += c * &self.m2p[mu][lam];
                }
            }
        }
        out
    }

    /// Convert a power-sum coefficient vector to the monomial basis.
    pub fn power_to_monomial_vec(&self, p_coeffs: &[BigRational]) -> Vec<BigRational> {
        let n = self.parts.len();
        let mut out = vec![BigRational::zero(); n];
        for (lam, c) in p_coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for mu in 0..n {
                if !self.p2m[lam][mu].is_zero() {
                    out[mu] += c * &self.p2m[lam][mu];
                }
            }
        }
        out
    }

    /// `⟨f, g⟩_α = Σ_λ f_λ g_λ z_λ α^{ℓ(λ)}` on power-sum coefficients.
    pub fn inner_product(
        &self,
        f_power: &[BigRational],
        g_power: &[BigRational],
        alpha: &BigRational,
    ) -> BigRational {
        let mut acc = BigRational::zero();
        for (i, lam) in self.parts.iter().enumerate() {
            if f_power[i].is_zero() || g_power[i].is_zero() {
                continue;
            }
            let z = BigRational::from_float(lam.z_factor()).expect("z is a small integer");
            let mut weight = z;
            for _ in 0..lam.len() {
                weight *= alpha;
            }
            acc += &f_power[i] * &g_power[i] * weight;
        }
        acc
    }
}

/// An exact Jack polynomial `P_λ(α)` in monomial normalization
/// (`coefficient of m_λ = 1`).
#[derive(Debug, Clone)]
pub struct JackPolynomial {
    pub label: Partition,
    pub alpha: BigRational,
    /// Coefficients over the monomial basis, keyed by partition.
    pub m_coeffs: Expansion,
    /// The same polynomial over the power-sum basis.
    pub p_coeffs: Expansion,
}

/// Compute all Jack polynomials of one degree by Gram–Schmidt.
pub fn jack_basis(degree: usize, alpha: &BigRational) -> Result<Vec<JackPolynomial>, JackError> {
    if !alpha.is_positive() {
        return Err(JackError::BadAlpha(0.0));
    }
    let tables = TransitionTables::new(degree)?;
    let n = tables.parts.len();
    // Coefficient rows over the monomial basis, built in ascending lex order
    // (which refines ascending dominance, so each row keeps unit leading
    // coefficient on its own m_λ).
    let mut rows_m: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    let mut rows_p: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    let mut norms: Vec<BigRational> = Vec::with_capacity(n);
    for i in 0..n {
        let mut m: Vec<BigRational> = (0..n)
            .map(|j| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        let mut p = tables.monomial_to_power(&m);
        for k in 0..i {
            let ov = tables.inner_product(&p, &rows_p[k], alpha);
            if ov.is_zero() {
                continue;
            }
            let f = ov / &norms[k];
            for j in 0..n {
                let mv = &rows_m[k][j] * &f;
                m[j] -= mv;
                let pv = &rows_p[k][j] * &f;
                p[j] -= pv;
            }
        }
        let norm = tables.inner_product(&p, &p, alpha);
        norms.push(norm);
        rows_m.push(m);
        rows_p.push(p);
    }
    Ok((0..n)
        .map(|i| {
            let to_exp = |row: &[BigRational]| {
                row.iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(j, c)| (tables.parts[j].clone(), c.clone()))
                    .collect::<Expansion>()
            };
            JackPolynomial {
                label: tables.parts[i].clone(),
                alpha: alpha.clone(),
                m_coeffs: to_exp(&rows_m[i]),
                p_coeffs: to_exp(&rows_p[i]),
            }
        })
        .collect())
}

/// Compute one Jack polynomial `P_λ(α)`.
pub fn jack_expand(label: &Partition, alpha: &BigRational) -> Result<JackPolynomial, JackError> {
    let basis = jack_basis(label.level(), alpha)?;
    Ok(basis
        .into_iter()
        .find(|j| &j.label == label)
        .expect("label is a partition of its own degree"))
}

/// The Jack parameter matched to the model couplings: `α = ℓħ²/ℓθ²`.
pub fn model_alpha(params: &PhysParams) -> Result<BigRational, JackError> {
    let lt2 = rational_from_f64(params.ell_theta().powi(2))?;
    let lh2 = rational_from_f64(params.ell_hbar().powi(2))?;
    if lh2.is_zero() || !lt2.is_positive() {
        return Err(JackError::BadAlpha(0.0));
    }
    Ok(lh2 / lt2)
}

fn rational_to_f64(r: &BigRational) -> f64 {
    // Accurate enough for the coefficient magnitudes arising here.
    let num = r.numer();
    let den = r.denom();
    let fnum: f64 = num.to_string().parse().unwrap_or(f64::NAN);
    let fden: f64 = den.to_string().parse().unwrap_or(f64::NAN);
    fnum / fden
}

/// Embed a Jack polynomial into the truncated Fock space via
/// `pₙ ↦ (√α/ℓħ)·α†ₙ` applied to the vacuum.
pub fn embed_fock(
    jack: &JackPolynomial,
    basis: &FockBasis,
    params: &PhysParams,
) -> Result<RVec, JackError> {
    let degree = jack.label.level();
    if basis.lambda_max < degree {
        return Err(JackError::TruncationTooSmall(basis.lambda_max, degree));
    }
    let alpha = rational_to_f64(&jack.alpha);
    let s = alpha.sqrt() / params.ell_hbar();
    let mut out = RVec::zeros(basis.dim());
    for (lam, coeff) in &jack.p_coeffs {
        let mut v = RVec::zeros(basis.dim());
        v[0] = 1.0;
        for &part in lam.parts() {
            let up = mode_operator(part, ModeKind::Raise, basis, params)?;
            v = up.apply(&v);
        }
        out += v * (rational_to_f64(coeff) * s.powi(lam.len() as i32));
    }
    Ok(out)
}

/// Eigenvector check of an embedded Jack state against I₂.
#[derive(Debug, Clone)]
pub struct EigenCheck {
    pub label: Partition,
    /// Rayleigh quotient `⟨v, I₂ v⟩ / ⟨v, v⟩`.
    pub rayleigh: f64,
    /// Exact predicted eigenvalue `E(λ)` for the Jack label.
    pub predicted: f64,
    /// `‖I₂v − qv‖ / ‖v‖` with `q` the Rayleigh quotient.
    pub residual: f64,
}

/// Verify that the embedded Jack state is an I₂ eigenvector with the
/// predicted eigenvalue.
pub fn verify_eigenvector(
    jack: &JackPolynomial,
    basis: &FockBasis,
    big_n: usize,
    params: &PhysParams,
) -> Result<EigenCheck, JackError> {
    let v = embed_fock(jack, basis, params)?;
    let i2 = build_i2(basis, big_n, params);
    let iv = i2.apply(&v);
    let vv = v.dot(&v);
    let rayleigh = v.dot(&iv) / vv;
    let resid = &iv - &v * rayleigh;
    Ok(EigenCheck {
        label: jack.label.clone(),
        rayleigh,
        predicted: i2_exact_eigenvalue(&jack.label, big_n, params),
        residual: resid.norm() / vv.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn part(parts: &[usize]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn power_sum_expansions() {
        // p_1 = m_1; p_2 = m_2? No: p_2 = m_2 (single row sums) — indeed
        // p_2 = Σxᵢ² = m_2. p_{1,1} = p_1² = m_2·1·? = m_2 + 2m_{11}.
        let p11 = power_to_monomial(&part(&[1, 1]));
        assert_eq!(p11[&part(&[2])], BigRational::one());
        assert_eq!(p11[&part(&[1, 1])], rat(2, 1));
        // p_{2,1} = m_3 + m_{21}.
        let p21 = power_to_monomial(&part(&[2, 1]));
        assert_eq!(p21[&part(&[3])], BigRational::one());
        assert_eq!(p21[&part(&[2, 1])], BigRational::one());
        assert!(p21.get(&part(&[1, 1, 1])).is_none());
        // p_{1,1,1} = m_3 + 3m_{21} + 6m_{111}.
        let p111 = power_to_monomial(&part(&[1, 1, 1]));
        assert_eq!(p111[&part(&[3])], BigRational::one());
        assert_eq!(p111[&part(&[2, 1])], rat(3, 1));
        assert_eq!(p111[&part(&[1, 1, 1])], rat(6, 1));
    }

    #[test]
    fn transition_roundtrip() {
        for degree in 1..=6usize {
            let t = TransitionTables::new(degree).unwrap();
            let n = t.parts.len();
            for i in 0..n {
                let mut m = vec![BigRational::zero(); n];
                m[i] = BigRational::one();
                let p = t.monomial_to_power(&m);
                let back = t.power_to_monomial_vec(&p);
                assert_eq!(back, m, "degree {degree} index {i}");
            }
        }
    }

    #[test]
    fn jack_p2_closed_form() {
        // P_(2) = m_2 + 2/(1+α) m_{11}.
        for alpha in [rat(1, 1), rat(1, 4), rat(7, 3)] {
            let j = jack_expand(&part(&[2]), &alpha).unwrap();
            assert_eq!(j.m_coeffs[&part(&[2])], BigRational::one());
            let expected = rat(2, 1) / (BigRational::one() + &alpha);
            assert_eq!(j.m_coeffs[&part(&[1, 1])], expected);
        }
    }

    #[test]
    fn jack_orthogonality_exact() {
        let alpha = rat(3, 2);
        for degree in 2..=5usize {
            let t = TransitionTables::new(degree).unwrap();
            let basis = jack_basis(degree, &alpha).unwrap();
            let as_p: Vec<Vec<BigRational>> = basis
                .iter()
                .map(|j| {
                    let mut row = vec![BigRational::zero(); t.parts.len()];
                    for (lam, c) in &j.p_coeffs {
                        row[t.index_of(lam).unwrap()] = c.clone();
                    }
                    row
                })
                .collect();
            for i in 0..basis.len() {
                for k in 0..i {
                    let ip = t.inner_product(&as_p[i], &as_p[k], &alpha);
                    assert!(ip.is_zero(), "degree {degree}: ⟨{i},{k}⟩ ≠ 0");
                }
                let norm = t.inner_product(&as_p[i], &as_p[i], &alpha);
                assert!(norm.is_positive());
            }
        }
    }

    #[test]
    fn jack_reduces_to_schur_at_alpha_one() {
        let alpha = BigRational::one();
        // s_{21} = m_{21} + 2m_{111}.
        let j = jack_expand(&part(&[2, 1]), &alpha).unwrap();
        assert_eq!(j.m_coeffs[&part(&[2, 1])], BigRational::one());
        assert_eq!(j.m_coeffs[&part(&[1, 1, 1])], rat(2, 1));
        // s_{22} = m_{22} + m_{211} + 2m_{1111}.
        let j22 = jack_expand(&part(&[2, 2]), &alpha).unwrap();
        assert_eq!(j22.m_coeffs[&part(&[2, 2])], BigRational::one());
        assert_eq!(j22.m_coeffs[&part(&[2, 1, 1])], rat(1, 1));
        assert_eq!(j22.m_coeffs[&part(&[1, 1, 1, 1])], rat(2, 1));
    }

    #[test]
    fn embedded_jack_states_are_i2_eigenvectors() {
        let big_n = 10;
        for (theta, hbar) in [(1.0, 1.0), (1.0, 0.25), (0.5, 1.0)] {
            let p = PhysParams::new(1.0, 1.0, theta, hbar).unwrap();
            let alpha = model_alpha(&p).unwrap();
            let fb = FockBasis::new(6);
            for degree in 1..=5usize {
                for jack in jack_basis(degree, &alpha).unwrap() {
                    let check = verify_eigenvector(&jack, &fb, big_n, &p).unwrap();
                    assert!(
                        check.residual < 1e-10,
                        "θ={theta} ħ={hbar} λ={}: residual {}",
                        check.label.label(),
                        check.residual
                    );
                    assert!(
                        (check.rayleigh - check.predicted).abs()
                            < 1e-9 * check.predicted.abs().max(1.0),
                        "θ={theta} ħ={hbar} λ={}: {} vs {}",
                        check.label.label(),
                        check.rayleigh,
                        check.predicted
                    );
                }
            }
        }
    }

    #[test]
    fn wrong_alpha_leaves_residuals() {
        // Swapping the ratio (α = ℓθ²/ℓħ²) must fail for γ ≠ 1.
        let p = PhysParams::new(1.0, 1.0, 1.0, 0.25).unwrap();
        let wrong = rat(4, 1); // ℓθ²/ℓħ² = 4
        let fb = FockBasis::new(4);
        let mut worst: f64 = 0.0;
        for jack in jack_basis(3, &wrong).unwrap() {
            let check = verify_eigenvector(&jack, &fb, 10, &p).unwrap();
            worst = worst.max(check.residual);
        }
        assert!(worst > 1e-3, "wrong alpha unexpectedly matched: {worst}");
    }

    #[test]
    fn degeneracy_disambiguation_at_gamma_one() {
        // At ℓθ=ℓħ the Q₂ labels of (2) and (1,1) collide, but the embedded
        // Jack vectors still pick out distinct I₂ eigenvalues 22 and 18.
        let p = PhysParams::unit();
        let alpha = model_alpha(&p).unwrap();
        let fb = FockBasis::new(4);
        let c2 = verify_eigenvector(&jack_expand(&part(&[2]), &alpha).unwrap(), &fb, 10, &p)
            .unwrap();
        let c11 = verify_eigenvector(&jack_expand(&part(&[1, 1]), &alpha).unwrap(), &fb, 10, &p)
            .unwrap();
        assert!((c2.rayleigh - 22.0).abs() < 1e-9);
        assert!((c11.rayleigh - 18.0).abs() < 1e-9);
        assert!(c2.residual < 1e-10 && c11.residual < 1e-10);
    }
}
