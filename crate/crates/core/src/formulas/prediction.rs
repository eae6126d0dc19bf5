use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lss::{lss_vec_prediction, lss_eig_prediction};
use super::mf::{mf_mi_params, mf_sum_mean, mf_sum_variance};
use super::zeta::msw_variance;
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    MswSir,
    MfSum,
    MfMi,
    LssEig,
    LssVec,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 5] = [
        StatisticKind::MswSir,
        StatisticKind::MfSum,
        StatisticKind::MfMi,
        StatisticKind::LssEig,
        StatisticKind::LssVec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::MswSir => "msw-sir",
            StatisticKind::MfSum => "mf-sum",
            StatisticKind::MfMi => "mf-mi",
            StatisticKind::LssEig => "lss-eig",
            StatisticKind::LssVec => "lss-vec",
        }
    }

    /// Whether the limit theorem behind this statistic assumes `E v² = 0`.
    pub fn needs_complex_entries(self) -> bool {
        matches!(
            self,
            StatisticKind::MswSir | StatisticKind::MfSum | StatisticKind::MfMi
        )
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatisticKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown statistic '{s}'")))
    }
}

/// Parameters a prediction was evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInputs {
    pub c: f64,
    pub sigma2: f64,
    pub fourth_moment: f64,
    pub is_complex: bool,
    pub m_stages: usize,
    pub degrees: Vec<usize>,
}

/// Limiting mean and variance of one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltPrediction {
    pub statistic: StatisticKind,
    pub mean: f64,
    pub variance: f64,
    pub inputs: PredictionInputs,
    /// Which formulas were evaluated.
    pub formula: String,
}

/// Prediction for `statistic` at `params`. `degrees` is used by the
/// spectral statistics only.
pub fn predict(statistic: StatisticKind, params: &ModelParams, degrees: &[usize]) -> Result<CltPrediction> {
    params.validate()?;
    let dist = &params.dist;
    if statistic.needs_complex_entries() && !dist.is_complex {
        return Err(Error::PredictionUnavailable(format!(
            "{statistic} limit assumes complex entries with E v² = 0; {} entries are real",
            dist.kind
        )));
    }
    let (c, s2, v) = (params.c, params.sigma2, dist.fourth_moment);
    let mut p = match statistic {
        StatisticKind::MswSir => msw_variance(params.m_stages, c, s2, v)?,
        StatisticKind::MfSum => CltPrediction {
            statistic,
            mean: mf_sum_mean(c, s2, v)?,
            variance: mf_sum_variance(c, s2, v)?,
            inputs: PredictionInputs {
                c,
                sigma2: s2,
                fourth_moment: v,
                is_complex: true,
                m_stages: 1,
                degrees: Vec::new(),
            },
            formula: "μ and τ² for the matched-filter SIR sum".into(),
        },
        StatisticKind::MfMi => mf_mi_params(c, s2, v)?,
        StatisticKind::LssEig => lss_eig_prediction(degrees, c, dist)?,
        StatisticKind::LssVec => lss_vec_prediction(degrees, c, dist)?,
    };
    p.inputs.sigma2 = s2;
    p.inputs.m_stages = params.m_stages;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DistKind, EntryDist};

    fn params(kind: DistKind) -> ModelParams {
        ModelParams::new(1.0, 1.0, EntryDist::new(kind), 1).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in StatisticKind::ALL {
            assert_eq!(k.name().parse::<StatisticKind>().unwrap(), k);
        }
        assert!("nope".parse::<StatisticKind>().is_err());
    }

    #[test]
    fn real_entries_rejected_for_receiver_statistics() {
        let p = params(DistKind::RealGaussian);
        for k in [StatisticKind::MswSir, StatisticKind::MfSum, StatisticKind::MfMi] {
            assert!(matches!(predict(k, &p, &[]), Err(Error::PredictionUnavailable(_))));
        }
        assert!(predict(StatisticKind::LssEig, &p, &[1]).is_ok());
    }

    #[test]
    fn matched_filter_predictions() {
        let p = params(DistKind::ComplexGaussian);
        let sum = predict(StatisticKind::MfSum, &p, &[]).unwrap();
        assert_eq!((sum.mean, sum.variance), (0.375, 0.1875));
        let mi = predict(StatisticKind::MfMi, &p, &[]).unwrap();
        assert!((mi.mean - 1.0 / 18.0).abs() < 1e-15);
        assert!((mi.variance - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_trace_prediction() {
        let p = params(DistKind::Qpsk);
        let lss = predict(StatisticKind::LssEig, &p, &[1]).unwrap();
        assert!(lss.variance.abs() < 1e-9);
    }
}
