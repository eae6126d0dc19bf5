use super::prediction::{CltPrediction, PredictionInputs, StatisticKind};
use crate::error::{Error, Result};
use crate::model::{check_ratio, check_sigma2};

fn a1(c: f64, sigma2: f64) -> Result<f64> {
    check_ratio(c)?;
    check_sigma2(sigma2)?;
    Ok(sigma2 + 1.0 / c)
}

fn inputs(c: f64, sigma2: f64, fourth_moment: f64) -> PredictionInputs {
    PredictionInputs {
        c,
        sigma2,
        fourth_moment,
        is_complex: true,
        m_stages: 1,
        degrees: Vec::new(),
    }
}

/// `μ = (2E|v|⁴ − 3)/(c a₁²) + 1/(c² a₁³)`.
pub fn mf_sum_mean(c: f64, sigma2: f64, fourth_moment: f64) -> Result<f64> {
    let a1 = a1(c, sigma2)?;
    Ok((2.0 * fourth_moment - 3.0) / (c * a1 * a1) + 1.0 / (c * c * a1.powi(3)))
}

/// Mean of the matched-filter sum obtained by taking exact expectations
/// of its second-order expansion: `1/(c a₁²) + 1/(c² a₁³)`. The
/// fourth-moment contributions cancel.
pub fn mf_sum_mean_exact(c: f64, sigma2: f64) -> Result<f64> {
    let a1 = a1(c, sigma2)?;
    Ok(1.0 / (c * a1 * a1) + 1.0 / (c * c * a1.powi(3)))
}

/// `τ²`, the three-term expression for the matched-filter sum variance.
pub fn mf_sum_variance(c: f64, sigma2: f64, fourth_moment: f64) -> Result<f64> {
    let a1 = a1(c, sigma2)?;
    let v = fourth_moment;
    let lead = 2.0 + 2.0 / c + sigma2;
    let a14 = a1.powi(4);
    let tau2 = lead * lead * (v - 1.0) / (c * a14)
        - 2.0 * lead * (2.0 * c + 2.0) / (c * c * a14) * (v - 1.0)
        + (4.0 * c.powi(3) + 10.0 * c * c + 4.0 * c
            + (4.0 * c.powi(3) + 8.0 * c * c + 4.0 * c) * (v - 2.0))
            / (c.powi(4) * a14);
    if tau2 < 0.0 {
        return Err(Error::NegativeVariance(tau2));
    }
    Ok(tau2)
}

/// `(μ₁, τ₁²)` for the matched-filter sum mutual information.
pub fn mf_mi_params(c: f64, sigma2: f64, fourth_moment: f64) -> Result<CltPrediction> {
    let a1 = a1(c, sigma2)?;
    let mu = mf_sum_mean(c, sigma2, fourth_moment)?;
    let tau2 = mf_sum_variance(c, sigma2, fourth_moment)?;
    let ci = 1.0 / c;
    let shrink = 1.0 + 1.0 / a1;
    let numerator = 2.0 * (fourth_moment - 2.0) * a1 * a1
        + 2.0 * ci * (1.0 + ci)
        + sigma2 * sigma2
        + 2.0 * sigma2 * ci;
    let mean = mu / shrink - numerator / (c * a1.powi(4) * shrink * shrink);
    Ok(CltPrediction {
        statistic: StatisticKind::MfMi,
        mean,
        variance: tau2 / (shrink * shrink),
        inputs: inputs(c, sigma2, fourth_moment),
        formula: "μ₁ and τ₁² = τ²/(1 + 1/a₁)² for the sum mutual information".into(),
    })
}

/// Mean of the sum mutual information from the second-order log expansion
/// around `1/a₁`: `μ/(1 + 1/a₁) − Var(y₁)/(2c(1 + 1/a₁)²)` with the exact
/// mean `μ` and `Var(y₁) = ((E|v|⁴ − 1)a₁² + 1/c)/a₁⁴`, the limiting
/// variance of `√N(β_k − 1/a₁)`.
pub fn mf_mi_mean_exact(c: f64, sigma2: f64, fourth_moment: f64) -> Result<f64> {
    let a1 = a1(c, sigma2)?;
    let mu = mf_sum_mean_exact(c, sigma2)?;
    let shrink = 1.0 + 1.0 / a1;
    let var_y1 = ((fourth_moment - 1.0) * a1 * a1 + 1.0 / c) / a1.powi(4);
    Ok(mu / shrink - var_y1 / (2.0 * c * shrink * shrink))
}
