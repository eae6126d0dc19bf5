//! Linear spectral statistic means and covariances for `T = I` and
//! monomial test functions `g(x) = x^r`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::prediction::{CltPrediction, PredictionInputs, StatisticKind};
use crate::error::{Error, Result};
use crate::model::{check_ratio, EntryDist};
use crate::moments::binomial;
use crate::stieltjes::{
    contour_integrate, derivative_from_value, double_contour_integrate_mapped, mp_stieltjes,
    ContourSpec,
};

/// Relative tolerance of the node-doubling check for theory integrals.
pub const THEORY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Realness {
    Real,
    Complex,
}

impl Realness {
    pub fn of(dist: &EntryDist) -> Self {
        if dist.is_complex {
            Realness::Complex
        } else {
            Realness::Real
        }
    }
}

fn check_degree(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("monomial degree must be at least 1"));
    }
    Ok(())
}

/// `(1−c)/c` raised to `j`, with `0⁰ = 1`.
fn t_pow(c: f64, j: usize) -> f64 {
    ((1.0 - c) / c).powi(j as i32)
}

fn binom(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        0.0
    } else {
        binomial(n as u64, k as u64) as f64
    }
}

/// Closed form of the fourth-moment mean integral for `g = x^r`.
pub fn lss_eig_mean_correction_closed(r: usize, c: f64) -> Result<f64> {
    check_degree(r)?;
    check_ratio(c)?;
    let ri = r as i64;
    let sum: f64 = (0..=r)
        .map(|j| {
            let ji = j as i64;
            binom(ri, ji)
                * t_pow(c, j)
                * (binom(2 * ri - ji, ri - 1) - binom(2 * ri + 1 - ji, ri - 1))
        })
        .sum();
    Ok(c.powi(1 + r as i32) * sum)
}

fn p_sum(r: usize, c: f64) -> f64 {
    let ri = r as i64;
    (0..=r)
        .map(|j| binom(ri, j as i64) * t_pow(c, j) * binom(2 * ri - j as i64, ri - 1))
        .sum()
}

/// Closed form of the fourth-moment covariance integral for `x^{r₁}, x^{r₂}`.
pub fn lss_eig_cov_correction_closed(r1: usize, r2: usize, c: f64) -> Result<f64> {
    check_degree(r1)?;
    check_degree(r2)?;
    check_ratio(c)?;
    Ok(c.powi((r1 + r2 + 1) as i32) * p_sum(r1, c) * p_sum(r2, c))
}

#[derive(Debug, Clone, Copy)]
struct NodeData {
    m: Complex64,
    dm: Complex64,
}

/// Contour pair used for the theory integrals at one ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LssContours {
    pub c: f64,
    pub inner: ContourSpec,
    pub outer: ContourSpec,
}

impl LssContours {
    pub fn new(c: f64) -> Result<Self> {
        check_ratio(c)?;
        Ok(LssContours {
            c,
            inner: ContourSpec::inner(c)?,
            outer: ContourSpec::outer(c)?,
        })
    }

    /// Both radii multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(LssContours {
            c: self.c,
            inner: self.inner.scaled(factor)?,
            outer: self.outer.scaled(factor)?,
        })
    }

    fn node(&self, z: Complex64) -> Result<NodeData> {
        let m = mp_stieltjes(z, self.c)?;
        Ok(NodeData {
            m,
            dm: derivative_from_value(z, m, self.c)?,
        })
    }

    fn mean_integral(&self, r: usize) -> Result<f64> {
        check_degree(r)?;
        let c = self.c;
        let q = contour_integrate(
            |z| {
                let m = mp_stieltjes(z, c)?;
                let q = m / (1.0 + m);
                Ok(z.powi(r as i32) * c * q * q * q / (1.0 - c * q * q))
            },
            &self.outer,
            THEORY_TOL,
        )?;
        Ok((q.value / Complex64::new(0.0, 2.0 * PI)).re)
    }

    /// `(1/2πi)∮ g c m̲³ h₂ / (1 − c m̲²/(1+m̲)²) dz` for `g = x^r`.
    pub fn mean_correction(&self, r: usize) -> Result<f64> {
        self.mean_integral(r)
    }

    /// Real-entry base mean, the first term of the general mean formula.
    pub fn mean_base(&self, r: usize) -> Result<f64> {
        Ok(-self.mean_integral(r)?)
    }

    fn double<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(Complex64, &NodeData, Complex64, &NodeData) -> Complex64,
    {
        let q = double_contour_integrate_mapped(
            |z| self.node(z),
            |z1, n1, z2, n2| Ok(f(z1, n1, z2, n2)),
            &self.inner,
            &self.outer,
            THEORY_TOL,
        )?;
        Ok(q.value)
    }

    /// Gaussian-part covariance of `Σ λ^{r₁}` and `Σ λ^{r₂}`.
    pub fn cov_base(&self, r1: usize, r2: usize, realness: Realness) -> Result<f64> {
        check_degree(r1)?;
        check_degree(r2)?;
        let (p1, p2) = (r1 as i32, r2 as i32);
        let v = self.double(|z1, n1, z2, n2| {
            let diff = n1.m - n2.m;
            z1.powi(p1) * z2.powi(p2) * n1.dm * n2.dm / (diff * diff)
        })?;
        let coeff = match realness {
            Realness::Complex => -1.0 / (4.0 * PI * PI),
            Realness::Real => -1.0 / (2.0 * PI * PI),
        };
        Ok((coeff * v).re)
    }

    /// `−(c/4π²)∮∮ g₁g₂ ∂²[m̲₁m̲₂h₁]/∂z₁∂z₂ dz₁dz₂` for monomials.
    pub fn cov_correction(&self, r1: usize, r2: usize) -> Result<f64> {
        check_degree(r1)?;
        check_degree(r2)?;
        let (p1, p2) = (r1 as i32, r2 as i32);
        // m̲₁m̲₂h₁ = f(z₁)f(z₂) with f = m̲/(1+m̲), f' = m̲'/(1+m̲)².
        let v = self.double(|z1, n1, z2, n2| {
            let f1 = n1.dm / ((1.0 + n1.m) * (1.0 + n1.m));
            let f2 = n2.dm / ((1.0 + n2.m) * (1.0 + n2.m));
            z1.powi(p1) * z2.powi(p2) * f1 * f2
        })?;
        Ok((-self.c / (4.0 * PI * PI) * v).re)
    }

    fn eigvec_kernel(&self, r1: usize, r2: usize, realness: Realness, c_power: i32) -> Result<f64> {
        check_degree(r1)?;
        check_degree(r2)?;
        let (p1, p2) = (r1 as i32, r2 as i32);
        let cp = self.c.powi(c_power);
        let v = self.double(|z1, n1, z2, n2| {
            let num = z2 * n2.m - z1 * n1.m;
            z1.powi(p1) * z2.powi(p2) * num * num / (cp * z1 * z2 * (z2 - z1) * (n2.m - n1.m))
        })?;
        let full = (-1.0 / (2.0 * PI * PI) * v).re;
        Ok(match realness {
            Realness::Real => full,
            Realness::Complex => 0.5 * full,
        })
    }

    /// Eigenvector-weighted statistic covariance, normalised by `c`.
    pub fn lss_vec_cov(&self, r1: usize, r2: usize, realness: Realness) -> Result<f64> {
        self.eigvec_kernel(r1, r2, realness, 1)
    }

    /// Same kernel normalised by `c²`.
    pub fn lss_vec_cov_c2(&self, r1: usize, r2: usize, realness: Realness) -> Result<f64> {
        self.eigvec_kernel(r1, r2, realness, 2)
    }
}

pub fn lss_eig_mean_correction_numeric(r: usize, c: f64) -> Result<f64> {
    LssContours::new(c)?.mean_correction(r)
}

pub fn lss_eig_mean_base_numeric(r: usize, c: f64) -> Result<f64> {
    LssContours::new(c)?.mean_base(r)
}

pub fn lss_eig_cov_base_numeric(r1: usize, r2: usize, c: f64, realness: Realness) -> Result<f64> {
    LssContours::new(c)?.cov_base(r1, r2, realness)
}

pub fn lss_eig_cov_correction_numeric(r1: usize, r2: usize, c: f64) -> Result<f64> {
    LssContours::new(c)?.cov_correction(r1, r2)
}

pub fn lss_vec_cov_numeric(r1: usize, r2: usize, c: f64, realness: Realness) -> Result<f64> {
    LssContours::new(c)?.lss_vec_cov(r1, r2, realness)
}

pub fn lss_vec_cov_numeric_c2(r1: usize, r2: usize, c: f64, realness: Realness) -> Result<f64> {
    LssContours::new(c)?.lss_vec_cov_c2(r1, r2, realness)
}

/// Mean and variance of `Σ_i g(λ_i) − N∫g dF^{c_N}` for `g = Σ_r x^r`.
pub fn lss_eig_prediction(degrees: &[usize], c: f64, dist: &EntryDist) -> Result<CltPrediction> {
    if degrees.is_empty() {
        return Err(Error::invalid("at least one monomial degree is required"));
    }
    let contours = LssContours::new(c)?;
    let realness = Realness::of(dist);
    let excess = match realness {
        Realness::Complex => dist.fourth_moment - 2.0,
        Realness::Real => dist.fourth_moment - 3.0,
    };
    let mut mean = 0.0;
    for &r in degrees {
        if realness == Realness::Real {
            mean += contours.mean_base(r)?;
        }
        mean -= excess * lss_eig_mean_correction_closed(r, c)?;
    }
    let mut variance = 0.0;
    for &r1 in degrees {
        for &r2 in degrees {
            variance += contours.cov_base(r1, r2, realness)?
                + excess * lss_eig_cov_correction_closed(r1, r2, c)?;
        }
    }
    if variance < -1e-10 {
        return Err(Error::NegativeVariance(variance));
    }
    Ok(CltPrediction {
        statistic: StatisticKind::LssEig,
        mean,
        variance,
        inputs: PredictionInputs {
            c,
            sigma2: 0.0,
            fourth_moment: dist.fourth_moment,
            is_complex: dist.is_complex,
            m_stages: 1,
            degrees: degrees.to_vec(),
        },
        formula: match realness {
            Realness::Complex => "complex-entry mean and covariance: contour base term plus (E|v|⁴−2) closed-form corrections".into(),
            Realness::Real => "real-entry mean and covariance: contour base terms plus (E v⁴−3) closed-form corrections".into(),
        },
    })
}

/// Mean zero and variance `Σ Cov(r₁, r₂)` of the eigenvector-weighted
/// statistic for `g = Σ_r x^r`.
pub(crate) fn lss_vec_prediction(degrees: &[usize], c: f64, dist: &EntryDist) -> Result<CltPrediction> {
    if degrees.is_empty() {
        return Err(Error::invalid("at least one monomial degree is required"));
    }
    let contours = LssContours::new(c)?;
    let realness = Realness::of(dist);
    let mut variance = 0.0;
    for &r1 in degrees {
        for &r2 in degrees {
            variance += contours.lss_vec_cov(r1, r2, realness)?;
        }
    }
    if variance < -1e-10 {
        return Err(Error::NegativeVariance(variance));
    }
    Ok(CltPrediction {
        statistic: StatisticKind::LssVec,
        mean: 0.0,
        variance,
        inputs: PredictionInputs {
            c,
            sigma2: 0.0,
            fourth_moment: dist.fourth_moment,
            is_complex: dist.is_complex,
            m_stages: 1,
            degrees: degrees.to_vec(),
        },
        formula: "eigenvector-weighted covariance kernel by double contour quadrature".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistKind;
    use crate::moments::mp_moment;

    const CS: [f64; 3] = [0.5, 1.0, 2.0];

    #[test]
    fn mean_correction_examples() {
        for c in [0.3, 1.0, 2.5] {
            assert_eq!(lss_eig_mean_correction_closed(1, c).unwrap(), 0.0);
            assert!((lss_eig_mean_correction_closed(2, c).unwrap() + c).abs() < 1e-14);
        }
        let closed = lss_eig_mean_correction_closed(3, 0.5).unwrap();
        let numeric = lss_eig_mean_correction_numeric(3, 0.5).unwrap();
        assert!((closed - numeric).abs() < 1e-8);
        assert!(lss_eig_mean_correction_numeric(1, 1.0).unwrap().abs() < 1e-10);
        assert!((lss_eig_mean_correction_numeric(2, 1.0).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn base_mean_of_trace_vanishes() {
        for c in CS {
            assert!(lss_eig_mean_base_numeric(1, c).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn closed_forms_match_contours() {
        for c in CS {
            let lc = LssContours::new(c).unwrap();
            for r in 1..=5 {
                let closed = lss_eig_mean_correction_closed(r, c).unwrap();
                let numeric = lc.mean_correction(r).unwrap();
                assert!((closed - numeric).abs() < 1e-8, "mean c={c} r={r}");
            }
            for r1 in 1..=5 {
                for r2 in 1..=5 {
                    let closed = lss_eig_cov_correction_closed(r1, r2, c).unwrap();
                    let numeric = lc.cov_correction(r1, r2).unwrap();
                    assert!((closed - numeric).abs() < 1e-8, "cov c={c} ({r1},{r2})");
                }
            }
        }
    }

    #[test]
    fn cov_correction_examples() {
        for c in [0.3, 1.0, 2.5] {
            assert!((lss_eig_cov_correction_closed(1, 1, c).unwrap() - c).abs() < 1e-14);
        }
        assert!((lss_eig_cov_correction_closed(1, 2, 1.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((lss_eig_cov_correction_numeric(1, 2, 1.0).unwrap() - 4.0).abs() < 1e-8);
        for c in CS {
            for (r1, r2) in [(1, 3), (2, 5), (4, 3)] {
                assert_eq!(
                    lss_eig_cov_correction_closed(r1, r2, c).unwrap(),
                    lss_eig_cov_correction_closed(r2, r1, c).unwrap()
                );
            }
        }
    }

    #[test]
    fn base_covariance_values() {
        for c in CS {
            let lc = LssContours::new(c).unwrap();
            let b11 = lc.cov_base(1, 1, Realness::Complex).unwrap();
            assert!((b11 - c).abs() < 1e-8);
            let b12 = lc.cov_base(1, 2, Realness::Complex).unwrap();
            let b21 = lc.cov_base(2, 1, Realness::Complex).unwrap();
            assert!((b12 - b21).abs() < 1e-8);
            let real = lc.cov_base(2, 3, Realness::Real).unwrap();
            let cplx = lc.cov_base(2, 3, Realness::Complex).unwrap();
            assert!((real - 2.0 * cplx).abs() < 1e-8 * real.abs().max(1.0));
        }
        let lc = LssContours::new(1.0).unwrap();
        assert!((lc.cov_base(1, 2, Realness::Complex).unwrap() - 4.0).abs() < 1e-8);
        assert!((lc.cov_base(2, 2, Realness::Complex).unwrap() - 18.0).abs() < 1e-8);
    }

    #[test]
    fn eigenvector_kernel_is_central_moment_matrix() {
        for c in CS {
            let lc = LssContours::new(c).unwrap();
            for r1 in 1..=5 {
                for r2 in r1..=5 {
                    let v = lc.lss_vec_cov(r1, r2, Realness::Complex).unwrap();
                    let want = mp_moment(r1 + r2, c).unwrap()
                        - mp_moment(r1, c).unwrap() * mp_moment(r2, c).unwrap();
                    assert!((v - want).abs() < 1e-8 * want.max(1.0), "c={c} ({r1},{r2})");
                    let by_c2 = lc.lss_vec_cov_c2(r1, r2, Realness::Complex).unwrap();
                    assert!((by_c2 * c - v).abs() < 1e-8 * want.max(1.0));
                }
            }
        }
    }

    #[test]
    fn eigenvector_kernel_examples() {
        let c = 1.0;
        assert!((lss_vec_cov_numeric(1, 1, c, Realness::Complex).unwrap() - 1.0).abs() < 1e-8);
        let real = lss_vec_cov_numeric(2, 2, 0.5, Realness::Real).unwrap();
        let cplx = lss_vec_cov_numeric(2, 2, 0.5, Realness::Complex).unwrap();
        assert!((real - 2.0 * cplx).abs() < 1e-12 * real);
    }

    #[test]
    fn radius_invariance() {
        for c in CS {
            let a = LssContours::new(c).unwrap();
            let b = a.scaled(1.15).unwrap();
            assert!(b.inner.encloses_support(c).unwrap());
            for (r1, r2) in [(1, 1), (2, 3), (4, 4)] {
                let pairs = [
                    (a.cov_base(r1, r2, Realness::Complex).unwrap(), b.cov_base(r1, r2, Realness::Complex).unwrap()),
                    (a.cov_correction(r1, r2).unwrap(), b.cov_correction(r1, r2).unwrap()),
                    (a.lss_vec_cov(r1, r2, Realness::Real).unwrap(), b.lss_vec_cov(r1, r2, Realness::Real).unwrap()),
                    (a.mean_correction(r2).unwrap(), b.mean_correction(r2).unwrap()),
                ];
                for (x, y) in pairs {
                    assert!((x - y).abs() < 1e-8 * x.abs().max(1.0), "c={c} ({r1},{r2}) {x} {y}");
                }
            }
        }
    }

    #[test]
    fn trace_predictions() {
        let cg = EntryDist::new(DistKind::ComplexGaussian);
        let p = lss_eig_prediction(&[1], 0.7, &cg).unwrap();
        assert!(p.mean.abs() < 1e-12);
        assert!((p.variance - 0.7).abs() < 1e-8);
        let qpsk = EntryDist::new(DistKind::Qpsk);
        let p = lss_eig_prediction(&[1], 1.0, &qpsk).unwrap();
        assert!(p.variance.abs() < 1e-9);
        let rg = EntryDist::new(DistKind::RealGaussian);
        let p = lss_eig_prediction(&[1], 1.0, &rg).unwrap();
        assert!((p.variance - 2.0).abs() < 1e-8);
        let rad = EntryDist::new(DistKind::Rademacher);
        let p = lss_eig_prediction(&[1], 1.0, &rad).unwrap();
        assert!(p.variance.abs() < 1e-9);
    }

    #[test]
    fn second_moment_means() {
        // E Tr A² − N M₂(c_N) = c (E|v|⁴ − 2) for complex entries.
        for kind in [DistKind::ComplexGaussian, DistKind::Qpsk] {
            let d = EntryDist::new(kind);
            let p = lss_eig_prediction(&[2], 1.0, &d).unwrap();
            assert!((p.mean - (d.fourth_moment - 2.0)).abs() < 1e-12);
        }
        // Real entries: c (E v⁴ − 2).
        for kind in [DistKind::RealGaussian, DistKind::Rademacher] {
            let d = EntryDist::new(kind);
            let p = lss_eig_prediction(&[2], 0.5, &d).unwrap();
            assert!((p.mean - 0.5 * (d.fourth_moment - 2.0)).abs() < 1e-8, "{kind}");
        }
    }

    #[test]
    fn polynomial_prediction_is_bilinear() {
        let cg = EntryDist::new(DistKind::ComplexGaussian);
        let p = lss_eig_prediction(&[1, 2], 1.0, &cg).unwrap();
        assert!(p.mean.abs() < 1e-12);
        assert!((p.variance - (1.0 + 2.0 * 4.0 + 18.0)).abs() < 1e-7);
    }
}
