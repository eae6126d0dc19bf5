use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::hankel::hankel_system;
use super::prediction::{CltPrediction, PredictionInputs, StatisticKind};
use crate::error::{Error, Result};
use crate::moments::{binomial, MomentTable, MAX_DEGREE};

/// Variance factor of the Brownian-bridge part of `ξ_u`.
///
/// `Complex` uses factor 1, the value for entries with `E v² = 0`.
/// `Real` uses the `√2` coefficient (factor 2), which is the
/// real-entry constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeConvention {
    #[default]
    Complex,
    Real,
}

impl BridgeConvention {
    pub fn factor(self) -> f64 {
        match self {
            BridgeConvention::Complex => 1.0,
            BridgeConvention::Real => 2.0,
        }
    }
}

/// Covariance of `(ζ₀, …, ζ_{2m−1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaCovariance {
    /// Highest index `2m − 1`.
    pub degree: usize,
    /// `E|v|⁴ − 1`.
    pub var_x: f64,
    pub cov: DMatrix<f64>,
}

pub fn zeta_covariance(
    m: usize,
    c: f64,
    sigma2: f64,
    fourth_moment: f64,
    convention: BridgeConvention,
) -> Result<ZetaCovariance> {
    if m == 0 {
        return Err(Error::invalid("stage count m must be at least 1"));
    }
    if !(fourth_moment >= 1.0) {
        return Err(Error::invalid(format!(
            "fourth moment must be at least 1, got {fourth_moment}"
        )));
    }
    let degree = 2 * m - 1;
    if 2 * degree > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "stage count {m} needs moments beyond degree {MAX_DEGREE}"
        )));
    }
    let t = MomentTable::new(c, sigma2, 2 * degree)?;
    let var_x = fourth_moment - 1.0;
    let kappa = convention.factor();
    let n = degree + 1;
    let xi = DMatrix::from_fn(n, n, |u, v| {
        t.h[u] * t.h[v] * var_x
            + kappa * (t.raw[u + v] - t.raw[u] * t.raw[v]) / c.powi((u + v) as i32)
    });
    let expand = DMatrix::from_fn(n, n, |i, u| {
        if u > i {
            0.0
        } else {
            binomial(i as u64, u as u64) as f64 * sigma2.powi((i - u) as i32)
        }
    });
    let cov = &expand * xi * expand.transpose();
    Ok(ZetaCovariance { degree, var_x, cov })
}

/// Limiting variance of `√N(β₁m − b*B⁻¹b)` with the complex bridge factor.
pub fn msw_variance(m: usize, c: f64, sigma2: f64, fourth_moment: f64) -> Result<CltPrediction> {
    msw_variance_with(m, c, sigma2, fourth_moment, BridgeConvention::Complex)
}

pub fn msw_variance_with(
    m: usize,
    c: f64,
    sigma2: f64,
    fourth_moment: f64,
    convention: BridgeConvention,
) -> Result<CltPrediction> {
    let hs = hankel_system(m, c, sigma2)?;
    let z = zeta_covariance(m, c, sigma2, fourth_moment, convention)?;
    let mut w = DVector::<f64>::zeros(2 * m);
    for i in 0..m {
        w[i] += 2.0 * hs.d[i];
        for j in 0..m {
            w[i + j + 1] -= hs.d[i] * hs.d[j];
        }
    }
    let variance = w.dot(&(&z.cov * &w));
    if variance < -1e-10 {
        return Err(Error::NegativeVariance(variance));
    }
    Ok(CltPrediction {
        statistic: StatisticKind::MswSir,
        mean: 0.0,
        variance,
        inputs: PredictionInputs {
            c,
            sigma2,
            fourth_moment,
            is_complex: true,
            m_stages: m,
            degrees: Vec::new(),
        },
        formula: format!(
            "y = 2ζ*B⁻¹b − b*B⁻¹DB⁻¹b with ζ covariance from h_u, X ~ N(0, E|v|⁴−1) and bridge factor {}",
            convention.factor()
        ),
    })
}
