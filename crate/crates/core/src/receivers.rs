//! Finite-N receiver SIRs on a signature ensemble: matched filter, MMSE,
//! multistage Wiener (Krylov) and an arbitrary linear receiver.
//!
//! The MSW receiver is evaluated on an orthonormal basis of the Krylov
//! space. The SIR `p_k s*A(A*RA)⁻¹A*s` does not depend on the basis of
//! `span A`, and the orthonormal basis avoids the conditioning of the raw
//! power sequence.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::hankel_system;
use crate::linalg::{hpd_solve, Gram};
use crate::model::{check_sigma2, Ensemble};

/// Relative norm below which a new Krylov direction counts as dependent.
pub const KRYLOV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    Mf,
    Mmse,
    Msw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirResult {
    pub user: usize,
    pub receiver: ReceiverKind,
    /// Requested stage count (MSW only).
    pub m: Option<usize>,
    /// Dimension of the Krylov space actually used (MSW only).
    pub m_effective: Option<usize>,
    pub value: f64,
}

fn check_user(e: &Ensemble, k: usize) -> Result<()> {
    if k >= e.k {
        return Err(Error::invalid(format!("user {k} out of range (K = {})", e.k)));
    }
    Ok(())
}

fn check_positive_noise(sigma2: f64) -> Result<()> {
    check_sigma2(sigma2)?;
    if sigma2 == 0.0 {
        return Err(Error::invalid("this receiver needs sigma2 > 0"));
    }
    Ok(())
}

fn signature(e: &Ensemble, k: usize) -> Result<DVector<Complex64>> {
    let s = e.s.column(k).into_owned();
    if s.norm_squared() == 0.0 {
        return Err(Error::ZeroSignature { user: k });
    }
    Ok(s)
}

/// `R_k = Σ_{j≠k} p_j s_j s_j* + σ² I`.
pub fn interference_matrix(e: &Ensemble, k: usize, sigma2: f64) -> Result<DMatrix<Complex64>> {
    check_user(e, k)?;
    check_sigma2(sigma2)?;
    let mut weighted = e.s.clone();
    for (j, mut col) in weighted.column_iter_mut().enumerate() {
        let w = if j == k { 0.0 } else { e.powers[j].sqrt() };
        col *= Complex64::new(w, 0.0);
    }
    let mut r = &weighted * weighted.adjoint();
    for i in 0..e.n {
        r[(i, i)] += sigma2;
    }
    Ok(r)
}

/// `R_k v` without forming `R_k`.
fn apply_interference(e: &Ensemble, k: usize, sigma2: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut coeffs = e.s.ad_mul(v);
    for (j, x) in coeffs.iter_mut().enumerate() {
        *x *= if j == k { 0.0 } else { e.powers[j] };
    }
    let mut out = &e.s * coeffs;
    out.axpy(Complex64::new(sigma2, 0.0), v, Complex64::new(1.0, 0.0));
    out
}

/// `β_k = p_k (s*s)² / (s* R_k s)`.
pub fn mf_sir(e: &Ensemble, k: usize, sigma2: f64) -> Result<SirResult> {
    check_user(e, k)?;
    check_sigma2(sigma2)?;
    let s = signature(e, k)?;
    let nrm2 = s.norm_squared();
    let q = e.s.ad_mul(&s);
    let interference: f64 = q
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(j, x)| e.powers[j] * x.norm_sqr())
        .sum();
    Ok(SirResult {
        user: k,
        receiver: ReceiverKind::Mf,
        m: None,
        m_effective: None,
        value: e.powers[k] * nrm2 * nrm2 / (interference + sigma2 * nrm2),
    })
}

/// `p_k s* R_k⁻¹ s` by a Hermitian positive-definite solve.
pub fn mmse_sir(e: &Ensemble, k: usize, sigma2: f64) -> Result<SirResult> {
    check_user(e, k)?;
    check_positive_noise(sigma2)?;
    let s = signature(e, k)?;
    let r = interference_matrix(e, k, sigma2)?;
    let x = hpd_solve(&r, &s).map_err(|b| Error::SolveFailure {
        row: b.row,
        pivot: b.pivot,
    })?;
    Ok(SirResult {
        user: k,
        receiver: ReceiverKind::Mmse,
        m: None,
        m_effective: None,
        value: e.powers[k] * s.dotc(&x).re,
    })
}

/// Orthonormal Krylov vectors of `apply` from `s`, stopping early when the
/// sequence degenerates.
fn krylov_vectors<F>(apply: F, s: &DVector<Complex64>, m: usize) -> Result<Vec<DVector<Complex64>>>
where
    F: Fn(&DVector<Complex64>) -> DVector<Complex64>,
{
    if m == 0 {
        return Err(Error::invalid("stage count m must be at least 1"));
    }
    if m > s.len() {
        return Err(Error::invalid(format!(
            "stage count {m} exceeds dimension {}",
            s.len()
        )));
    }
    let norm = s.norm();
    if norm == 0.0 {
        return Err(Error::invalid("Krylov start vector is zero"));
    }
    let mut basis = vec![s.unscale(norm)];
    while basis.len() < m {
        let mut w = apply(basis.last().expect("basis is nonempty"));
        let reference = w.norm();
        for _ in 0..2 {
            for q in &basis {
                let h = q.dotc(&w);
                w.axpy(-h, q, Complex64::new(1.0, 0.0));
            }
        }
        let rest = w.norm();
        if !(rest > KRYLOV_TOL * reference) {
            break;
        }
        basis.push(w.unscale(rest));
    }
    Ok(basis)
}

fn columns(vs: &[DVector<Complex64>]) -> DMatrix<Complex64> {
    DMatrix::from_columns(vs)
}

/// Orthonormal basis of `span{s, Rs, …, R^{m−1}s}`.
pub fn krylov_basis(r: &DMatrix<Complex64>, s: &DVector<Complex64>, m: usize) -> Result<DMatrix<Complex64>> {
    if r.nrows() != s.len() || !r.is_square() {
        return Err(Error::invalid("matrix and vector dimensions differ"));
    }
    let vs = krylov_vectors(|v| r * v, s, m)?;
    if vs.len() < m {
        return Err(Error::DegenerateKrylov {
            requested: m,
            rank: vs.len(),
        });
    }
    Ok(columns(&vs))
}

/// `p s*A(A*RA)⁻¹A*s` for the columns of `a`, with `ra = R a`.
fn projected_sir(
    p: f64,
    s: &DVector<Complex64>,
    a: &DMatrix<Complex64>,
    ra: &DMatrix<Complex64>,
) -> Result<(f64, DVector<Complex64>)> {
    let g = a.ad_mul(ra);
    let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let y = a.ad_mul(s);
    let x = hpd_solve(&g, &y).map_err(|b| Error::SolveFailure {
        row: b.row,
        pivot: b.pivot,
    })?;
    Ok((p * y.dotc(&x).re, x))
}

fn msw_parts(
    e: &Ensemble,
    k: usize,
    m: usize,
    sigma2: f64,
) -> Result<(DVector<Complex64>, DMatrix<Complex64>, f64, DVector<Complex64>)> {
    check_user(e, k)?;
    check_positive_noise(sigma2)?;
    let s = signature(e, k)?;
    let vs = krylov_vectors(|v| apply_interference(e, k, sigma2, v), &s, m)?;
    let rvs: Vec<_> = vs.iter().map(|v| apply_interference(e, k, sigma2, v)).collect();
    let a = columns(&vs);
    let (value, x) = projected_sir(e.powers[k], &s, &a, &columns(&rvs))?;
    Ok((s, a, value, x))
}

/// MSW SIR with `m` stages. A degenerate Krylov sequence is reported
/// through `m_effective` and the value uses the reduced space.
pub fn msw_sir(e: &Ensemble, k: usize, m: usize, sigma2: f64) -> Result<SirResult> {
    let (_, a, value, _) = msw_parts(e, k, m, sigma2)?;
    Ok(SirResult {
        user: k,
        receiver: ReceiverKind::Msw,
        m: Some(m),
        m_effective: Some(a.ncols()),
        value,
    })
}

/// MSW SIR from the raw columns `[s, Rs, …, R^{m−1}s]`.
pub fn msw_sir_raw(e: &Ensemble, k: usize, m: usize, sigma2: f64) -> Result<f64> {
    check_user(e, k)?;
    check_positive_noise(sigma2)?;
    if m == 0 || m > e.n {
        return Err(Error::invalid(format!("stage count {m} outside 1..={}", e.n)));
    }
    let s = signature(e, k)?;
    let mut raw = vec![s.clone()];
    while raw.len() <= m {
        let next = apply_interference(e, k, sigma2, raw.last().expect("nonempty"));
        raw.push(next);
    }
    let a = columns(&raw[..m]);
    let ra = columns(&raw[1..=m]);
    Ok(projected_sir(e.powers[k], &s, &a, &ra)?.0)
}

/// MSW receiver vector `A(A*R_kA)⁻¹A*s_k`.
pub fn msw_weights(e: &Ensemble, k: usize, m: usize, sigma2: f64) -> Result<DVector<Complex64>> {
    let (_, a, _, x) = msw_parts(e, k, m, sigma2)?;
    Ok(a * x)
}

/// Output SIR of the linear receiver `cvec` for user `k`.
pub fn generic_sir(e: &Ensemble, k: usize, cvec: &DVector<Complex64>, sigma2: f64) -> Result<f64> {
    check_user(e, k)?;
    check_sigma2(sigma2)?;
    if cvec.len() != e.n {
        return Err(Error::invalid("receiver length must equal N"));
    }
    if cvec.norm_squared() == 0.0 {
        return Err(Error::ZeroReceiver);
    }
    let proj = e.s.ad_mul(cvec);
    let mut interference = sigma2 * cvec.norm_squared();
    for (j, x) in proj.iter().enumerate() {
        if j != k {
            interference += e.powers[j] * x.norm_sqr();
        }
    }
    Ok(e.powers[k] * proj[k].norm_sqr() / interference)
}

/// `√N (β_km − b*B⁻¹b)` with the Hankel limit taken at `c_N = N/K`.
pub fn msw_fluctuation(e: &Ensemble, k: usize, m: usize, sigma2: f64) -> Result<f64> {
    if !e.has_unit_powers() {
        return Err(Error::invalid("MSW fluctuation needs equal unit powers"));
    }
    let limit = hankel_system(m, e.ratio(), sigma2)?.sir_limit;
    let beta = msw_sir(e, k, m, sigma2)?.value;
    Ok((e.n as f64).sqrt() * (beta - limit))
}

/// Matched-filter SIRs of all users from one Gram product.
pub fn matched_filter_sirs(e: &Ensemble, sigma2: f64) -> Result<Vec<f64>> {
    check_sigma2(sigma2)?;
    let g = Gram::of(&e.s);
    (0..e.k)
        .map(|k| {
            let gkk = g.re[(k, k)];
            if gkk == 0.0 {
                return Err(Error::ZeroSignature { user: k });
            }
            let interference: f64 = (0..e.k)
                .filter(|&j| j != k)
                .map(|j| e.powers[j] * g.abs2(j, k))
                .sum();
            Ok(e.powers[k] * gkk * gkk / (interference + sigma2 * gkk))
        })
        .collect()
}

/// `Σ_k (β_k − 1/a₁)`.
pub fn centered_sir_sum(sirs: &[f64], a1: f64) -> f64 {
    sirs.iter().map(|b| b - 1.0 / a1).sum()
}

/// `Σ_k (log(1 + β_k) − log(1 + 1/a₁))`.
pub fn centered_mi_sum(sirs: &[f64], a1: f64) -> f64 {
    let centre = (1.0 / a1).ln_1p();
    sirs.iter().map(|b| b.ln_1p() - centre).sum()
}

fn unit_power_a1(e: &Ensemble, sigma2: f64) -> Result<f64> {
    if !e.has_unit_powers() {
        return Err(Error::invalid("matched-filter sums need equal unit powers"));
    }
    check_sigma2(sigma2)?;
    Ok(sigma2 + 1.0 / e.ratio())
}

/// Matched-filter SIR sum centred at `1/a₁`, `a₁ = σ² + 1/c_N`.
pub fn mf_sum_statistic(e: &Ensemble, sigma2: f64) -> Result<f64> {
    let a1 = unit_power_a1(e, sigma2)?;
    Ok(centered_sir_sum(&matched_filter_sirs(e, sigma2)?, a1))
}

/// Matched-filter sum mutual information centred at `log(1 + 1/a₁)`.
pub fn mf_mi_statistic(e: &Ensemble, sigma2: f64) -> Result<f64> {
    let a1 = unit_power_a1(e, sigma2)?;
    Ok(centered_mi_sum(&matched_filter_sirs(e, sigma2)?, a1))
}
