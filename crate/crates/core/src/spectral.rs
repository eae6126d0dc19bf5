//! Linear spectral statistics of `A_N = c_N S S*` for monomial test
//! functions.
//!
//! Degrees 1 and 2 of the eigenvalue statistic come from traces
//! (`Tr A = c_N ‖S‖²_F`, `Tr A² = c_N² ‖S*S‖²_F`); higher degrees use the
//! eigenvalues. The eigenvector-weighted statistic uses repeated
//! matrix–vector products. Powers in the ensemble are ignored: the matrix
//! is always the unit-power `A_N`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Gram;
use crate::model::{check_sigma2, DistKind, Ensemble, EntryDist, RngStream};
use crate::moments::{binomial, mp_moment};

/// `x` must satisfy `max |x_i| ≤ SPREAD_BOUND / √N`.
pub const SPREAD_BOUND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LssKind {
    Eigenvalue,
    Eigenvector,
}

/// Choice of the deterministic unit vector `x_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum XChoice {
    /// `(1, …, 1)/√N`.
    #[default]
    Uniform,
    /// Normalised complex Gaussian vector drawn from `seed`.
    Random { seed: u64 },
}

impl XChoice {
    pub fn vector(self, n: usize) -> Result<DVector<Complex64>> {
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let v = match self {
            XChoice::Uniform => DVector::from_element(n, Complex64::new(1.0, 0.0)),
            XChoice::Random { seed } => {
                let dist = EntryDist::new(DistKind::ComplexGaussian);
                let mut stream = RngStream::for_column(seed, u64::MAX, 0);
                DVector::from_fn(n, |_, _| crate::model::sample_entry(&dist, &mut stream))
            }
        };
        let norm = v.norm();
        Ok(v.unscale(norm))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LssSample {
    pub kind: LssKind,
    pub degrees: Vec<usize>,
    /// One value per degree.
    pub values: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub c_n: f64,
    pub x_choice: Option<XChoice>,
}

/// Eigenvalues of `A_N`, ascending.
pub fn eigenvalues(e: &Ensemble) -> Result<Vec<f64>> {
    let c_n = e.ratio();
    let g = Gram::of(&e.s.adjoint());
    let n = e.n;
    let a = DMatrix::from_fn(n, n, |i, j| {
        let im = g.im.as_ref().map_or(0.0, |m| m[(i, j)]);
        Complex64::new(c_n * g.re[(i, j)], c_n * im)
    });
    let eig = SymmetricEigen::try_new(a, 1e-15, 0)
        .ok_or_else(|| Error::EigFailure("Hermitian eigensolver did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn check_degree(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("degree must be at least 1"));
    }
    Ok(())
}

/// `Σ λ^r` of `A_N` from traces (`r ≤ 2`).
fn trace_power(e: &Ensemble, gram: &mut Option<Gram>, r: usize) -> Option<f64> {
    let c_n = e.ratio();
    match r {
        1 => Some(c_n * e.s.norm_squared()),
        2 => {
            let g = gram.get_or_insert_with(|| Gram::of(&e.s));
            Some(c_n * c_n * g.frobenius_sq())
        }
        _ => None,
    }
}

/// `Σ_i λ_i^r − N M_r(c_N)`.
pub fn lss_eigenvalue(e: &Ensemble, r: usize) -> Result<f64> {
    Ok(lss_eigenvalues(e, &[r])?[0])
}

/// [`lss_eigenvalue`] for several degrees, sharing the work.
pub fn lss_eigenvalues(e: &Ensemble, degrees: &[usize]) -> Result<Vec<f64>> {
    let c_n = e.ratio();
    let n = e.n as f64;
    let mut gram = None;
    let mut eigs: Option<Vec<f64>> = None;
    degrees
        .iter()
        .map(|&r| {
            check_degree(r)?;
            let total = match trace_power(e, &mut gram, r) {
                Some(t) => t,
                None => {
                    if eigs.is_none() {
                        eigs = Some(eigenvalues(e)?);
                    }
                    let ev = eigs.as_ref().expect("computed above");
                    ev.iter().map(|l| l.powi(r as i32)).sum()
                }
            };
            Ok(total - n * mp_moment(r, c_n)?)
        })
        .collect()
}

/// The eigenvalue statistic computed from an eigendecomposition for every
/// degree.
pub fn lss_eigenvalue_by_eig(e: &Ensemble, r: usize) -> Result<f64> {
    check_degree(r)?;
    let total: f64 = eigenvalues(e)?.iter().map(|l| l.powi(r as i32)).sum();
    Ok(total - e.n as f64 * mp_moment(r, e.ratio())?)
}

/// Check `‖x‖ = 1` and the spread condition.
pub fn check_spread(x: &DVector<Complex64>) -> Result<()> {
    let n = x.len();
    if n == 0 || (x.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("x must be a unit vector"));
    }
    let bound = SPREAD_BOUND / (n as f64).sqrt();
    let max_entry = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max_entry > bound {
        return Err(Error::XNotSpread { max_entry, bound });
    }
    Ok(())
}

fn apply_a(e: &Ensemble, v: &DVector<Complex64>) -> DVector<Complex64> {
    (&e.s * e.s.ad_mul(v)) * Complex64::new(e.ratio(), 0.0)
}

/// `√N (x* A_N^r x − M_r(c_N))`.
pub fn lss_eigenvector(e: &Ensemble, x: &DVector<Complex64>, r: usize) -> Result<f64> {
    Ok(lss_eigenvectors(e, x, &[r])?[0])
}

/// [`lss_eigenvector`] for several degrees from one power sequence.
pub fn lss_eigenvectors(e: &Ensemble, x: &DVector<Complex64>, degrees: &[usize]) -> Result<Vec<f64>> {
    if x.len() != e.n {
        return Err(Error::invalid("x must have length N"));
    }
    check_spread(x)?;
    for &r in degrees {
        check_degree(r)?;
    }
    let top = degrees.iter().copied().max().unwrap_or(0);
    let mut forms = vec![0.0; top + 1];
    let mut v = x.clone();
    for form in forms.iter_mut().skip(1) {
        v = apply_a(e, &v);
        *form = x.dotc(&v).re;
    }
    let c_n = e.ratio();
    let root_n = (e.n as f64).sqrt();
    degrees
        .iter()
        .map(|&r| Ok(root_n * (forms[r] - mp_moment(r, c_n)?)))
        .collect()
}

/// `√N (s_k* R_k^d s_k − N⁻¹ Tr R_k^d)` for each degree `d`, with
/// `R_k = S_k S_k* + σ² I` (unit powers, unscaled).
pub fn quadratic_form_moments(e: &Ensemble, k: usize, degrees: &[usize], sigma2: f64) -> Result<Vec<f64>> {
    if k >= e.k {
        return Err(Error::invalid(format!("user {k} out of range (K = {})", e.k)));
    }
    check_sigma2(sigma2)?;
    let n = e.n as f64;
    let top = degrees.iter().copied().max().unwrap_or(0);
    let s = e.s.column(k).into_owned();
    let mut forms = vec![s.norm_squared()];
    let mut v = s.clone();
    for _ in 0..top {
        let mut coeffs = e.s.ad_mul(&v);
        coeffs[k] = Complex64::new(0.0, 0.0);
        let mut next = &e.s * coeffs;
        next.axpy(Complex64::new(sigma2, 0.0), &v, Complex64::new(1.0, 0.0));
        v = next;
        forms.push(s.dotc(&v).re);
    }
    let traces = interference_traces(e, k, sigma2, top)?;
    Ok(degrees
        .iter()
        .map(|&d| n.sqrt() * (forms[d] - traces[d] / n))
        .collect())
}

/// `Tr R_k^d` for `d = 0..=top`.
fn interference_traces(e: &Ensemble, k: usize, sigma2: f64, top: usize) -> Result<Vec<f64>> {
    // Tr (S_k S_k*)^u for u = 0..=top.
    let mut hu = vec![e.n as f64];
    if top >= 1 {
        let g = Gram::of(&e.s);
        let others = (0..e.k).filter(|&j| j != k);
        hu.push(others.clone().map(|j| g.re[(j, j)]).sum());
        if top >= 2 {
            let mut t2 = 0.0;
            for i in others.clone() {
                for j in others.clone() {
                    t2 += g.abs2(i, j);
                }
            }
            hu.push(t2);
        }
        if top >= 3 {
            let r = crate::receivers::interference_matrix(e, k, 0.0)?;
            let eig = SymmetricEigen::try_new(r, 1e-15, 0)
                .ok_or_else(|| Error::EigFailure("Hermitian eigensolver did not converge".into()))?;
            for u in 3..=top {
                hu.push(eig.eigenvalues.iter().map(|l| l.powi(u as i32)).sum());
            }
        }
    }
    Ok((0..=top)
        .map(|d| {
            (0..=d)
                .map(|u| binomial(d as u64, u as u64) as f64 * sigma2.powi((d - u) as i32) * hu[u])
                .sum()
        })
        .collect())
}

/// Eigenvalue or eigenvector statistics for several degrees.
pub fn lss_sample(e: &Ensemble, kind: LssKind, degrees: &[usize], x_choice: XChoice) -> Result<LssSample> {
    let (values, x_choice) = match kind {
        LssKind::Eigenvalue => (lss_eigenvalues(e, degrees)?, None),
        LssKind::Eigenvector => {
            let x = x_choice.vector(e.n)?;
            (lss_eigenvectors(e, &x, degrees)?, Some(x_choice))
        }
    };
    Ok(LssSample {
        kind,
        degrees: degrees.to_vec(),
        values,
        n: e.n,
        k: e.k,
        c_n: e.ratio(),
        x_choice,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_unit_ensemble, DistKind};

    fn ens(kind: DistKind, n: usize, k: usize, trial: u64) -> Ensemble {
        sample_unit_ensemble(n, k, &EntryDist::new(kind), 21, trial).unwrap()
    }

    #[test]
    fn eigenvalues_nonnegative_and_trace() {
        let e = ens(DistKind::ComplexGaussian, 30, 20, 0);
        let ev = eigenvalues(&e).unwrap();
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        assert!(ev[0] > -1e-12);
        let total: f64 = ev.iter().sum();
        let tr = e.s.iter().map(|v| v.norm_sqr()).sum::<f64>() * 30.0 / 20.0;
        assert!((total - tr).abs() < 1e-10 * tr);
    }

    #[test]
    fn trace_route_matches_eigen_route() {
        for kind in DistKind::ALL {
            let e = ens(kind, 25, 35, 1);
            for r in 1..=2 {
                let a = lss_eigenvalue(&e, r).unwrap();
                let b = lss_eigenvalue_by_eig(&e, r).unwrap();
                let scale = 25.0 * mp_moment(r, e.ratio()).unwrap();
                assert!((a - b).abs() < 1e-8 * scale, "{kind} r={r}");
            }
        }
    }

    #[test]
    fn unit_modulus_trace_is_constant() {
        let vals: Vec<f64> = (0..5)
            .map(|t| lss_eigenvalue(&ens(DistKind::Qpsk, 40, 30, t), 1).unwrap())
            .collect();
        assert!(vals.iter().all(|v| v.abs() < 1e-9 && *v == vals[0]));
        let rad = lss_eigenvalue(&ens(DistKind::Rademacher, 40, 30, 0), 1).unwrap();
        assert!(rad.abs() < 1e-9);
    }

    #[test]
    fn permutation_invariance() {
        let e = ens(DistKind::ComplexGaussian, 20, 15, 2);
        let order: Vec<usize> = (0..15).rev().collect();
        let p = e.permute_users(&order).unwrap();
        for r in 1..=4 {
            let a = lss_eigenvalue(&e, r).unwrap();
            let b = lss_eigenvalue(&p, r).unwrap();
            assert!((a - b).abs() < 1e-9 * 20.0 * mp_moment(r, e.ratio()).unwrap());
        }
    }

    #[test]
    fn eigenvector_statistic_first_degree_identity() {
        let e = ens(DistKind::ComplexGaussian, 36, 24, 3);
        let x = XChoice::Uniform.vector(36).unwrap();
        let got = lss_eigenvector(&e, &x, 1).unwrap();
        let proj: f64 = (0..24).map(|k| e.s.column(k).dotc(&x).norm_sqr()).sum();
        let want = 6.0 * (1.5 * proj - 1.0);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn eigenvector_statistic_matches_eigendecomposition() {
        let e = ens(DistKind::Qpsk, 16, 20, 4);
        let x = XChoice::Random { seed: 5 }.vector(16).unwrap();
        let a = DMatrix::from_fn(16, 16, |i, j| {
            (0..20).map(|k| e.s[(i, k)] * e.s[(j, k)].conj()).sum::<Complex64>() * 0.8
        });
        let eig = SymmetricEigen::new(a);
        let y = eig.eigenvectors.ad_mul(&x);
        for r in 1..=3 {
            let direct: f64 = (0..16).map(|i| y[i].norm_sqr() * eig.eigenvalues[i].powi(r)).sum();
            let want = 4.0 * (direct - mp_moment(r as usize, 0.8).unwrap());
            assert!((lss_eigenvector(&e, &x, r as usize).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn spike_vector_rejected() {
        let e = ens(DistKind::ComplexGaussian, 400, 400, 5);
        let mut x = DVector::<Complex64>::zeros(400);
        x[0] = Complex64::new(1.0, 0.0);
        assert!(matches!(lss_eigenvector(&e, &x, 1), Err(Error::XNotSpread { .. })));
        let spread = XChoice::Random { seed: 9 }.vector(400).unwrap();
        assert!(check_spread(&spread).is_ok());
    }

    #[test]
    fn quadratic_forms_against_direct_traces() {
        let e = ens(DistKind::ComplexGaussian, 18, 12, 6);
        let sigma2 = 0.7;
        let r = crate::receivers::interference_matrix(&e, 2, sigma2).unwrap();
        let s = e.s.column(2).into_owned();
        let got = quadratic_form_moments(&e, 2, &[0, 1, 2, 3], sigma2).unwrap();
        let mut p = DMatrix::<Complex64>::identity(18, 18);
        for d in 0..=3 {
            let want = 18f64.sqrt() * (s.dotc(&(&p * &s)).re - p.trace().re / 18.0);
            assert!((got[d] - want).abs() < 1e-9, "d={d}");
            p = &p * &r;
        }
    }

    #[test]
    fn unit_modulus_norm_form_vanishes() {
        let e = ens(DistKind::Qpsk, 32, 16, 7);
        let q = quadratic_form_moments(&e, 0, &[0], 1.0).unwrap();
        assert!(q[0].abs() < 1e-13);
    }

    #[test]
    fn sample_records_choice() {
        let e = ens(DistKind::ComplexGaussian, 20, 20, 8);
        let s = lss_sample(&e, LssKind::Eigenvector, &[1, 2], XChoice::Uniform).unwrap();
        assert_eq!(s.values.len(), 2);
        assert_eq!(s.x_choice, Some(XChoice::Uniform));
        let s = lss_sample(&e, LssKind::Eigenvalue, &[1, 2, 3], XChoice::Uniform).unwrap();
        assert_eq!(s.x_choice, None);
        assert!(s.values.iter().all(|v| v.is_finite()));
    }
}
