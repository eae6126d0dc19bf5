//! Monte Carlo experiment runner.
//!
//! Trial `t` samples its ensemble from `(seed, t)` alone, so per-trial
//! values do not depend on the worker count. Values are collected in trial
//! order and reduced by a pairwise merge of `(count, mean, M2)` partials
//! over a fixed split tree, which makes the summary bit-identical for any
//! thread count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::{predict, CltPrediction, StatisticKind};
use crate::model::{sample_unit_ensemble, DistKind, EntryDist, ModelParams};
use crate::receivers::{mf_mi_statistic, mf_sum_statistic, msw_fluctuation};
use crate::spectral::{lss_eigenvalues, lss_eigenvectors, XChoice};

fn default_sigma2() -> f64 {
    1.0
}
fn default_m() -> usize {
    1
}
fn default_degrees() -> Vec<usize> {
    vec![1]
}
fn default_z_max() -> f64 {
    4.0
}
fn default_var_rel() -> f64 {
    0.15
}
fn default_ks_coeff() -> f64 {
    1.95
}

/// Pass/fail thresholds of a summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Mean check: `|mean − theory| ≤ z_max·se_mean + mean_abs`.
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    #[serde(default)]
    pub mean_abs: f64,
    /// Variance check: `|variance/theory − 1| ≤ var_rel`.
    #[serde(default = "default_var_rel")]
    pub var_rel: f64,
    /// Normality check: `KS ≤ ks_coeff/√n`.
    #[serde(default = "default_ks_coeff")]
    pub ks_coeff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            z_max: default_z_max(),
            mean_abs: 0.0,
            var_rel: default_var_rel(),
            ks_coeff: default_ks_coeff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub statistic: StatisticKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_m")]
    pub m_stages: usize,
    pub dist: DistKind,
    pub trials: u64,
    pub seed: u64,
    /// Unit vector for the eigenvector statistic.
    #[serde(default)]
    pub x_choice: XChoice,
    /// Monomial degrees; the statistic uses `g = Σ x^r`.
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    /// User whose MSW SIR is tracked.
    #[serde(default)]
    pub user: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Bin count of the optional histogram export.
    #[serde(default)]
    pub histogram_bins: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::invalid("N and K must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::invalid("sigma2 must be nonnegative"));
        }
        match self.statistic {
            StatisticKind::MswSir => {
                if self.m_stages == 0 || self.m_stages > self.n {
                    return Err(Error::invalid("m_stages must lie in 1..=N"));
                }
                if self.user >= self.k {
                    return Err(Error::invalid("user must be below K"));
                }
                if self.sigma2 == 0.0 {
                    return Err(Error::invalid("the MSW receiver needs sigma2 > 0"));
                }
            }
            StatisticKind::LssEig | StatisticKind::LssVec => {
                if self.degrees.is_empty() || self.degrees.contains(&0) {
                    return Err(Error::invalid("degrees must be a nonempty list of positive integers"));
                }
            }
            StatisticKind::MfSum | StatisticKind::MfMi => {}
        }
        if matches!(self.histogram_bins, Some(0)) {
            return Err(Error::invalid("histogram_bins must be positive"));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        self.n as f64 / self.k as f64
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.ratio(), self.sigma2, EntryDist::new(self.dist), self.m_stages)
    }

    /// Theory at the finite ratio `c_N`.
    pub fn prediction(&self) -> Result<CltPrediction> {
        predict(self.statistic, &self.model_params()?, &self.degrees)
    }

    /// Statistic value of trial `trial`.
    pub fn trial_value(&self, trial: u64, x: Option<&nalgebra::DVector<num_complex::Complex64>>) -> Result<f64> {
        let e = sample_unit_ensemble(self.n, self.k, &EntryDist::new(self.dist), self.seed, trial)?;
        let value = match self.statistic {
            StatisticKind::MswSir => msw_fluctuation(&e, self.user, self.m_stages, self.sigma2),
            StatisticKind::MfSum => mf_sum_statistic(&e, self.sigma2),
            StatisticKind::MfMi => mf_mi_statistic(&e, self.sigma2),
            StatisticKind::LssEig => Ok(lss_eigenvalues(&e, &self.degrees)?.iter().sum()),
            StatisticKind::LssVec => {
                let x = x.ok_or_else(|| Error::invalid("eigenvector statistic needs x"))?;
                Ok(lss_eigenvectors(&e, x, &self.degrees)?.iter().sum())
            }
        }?;
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        Ok(value)
    }
}

/// Streaming `(count, mean, M2)` with the pairwise merge rule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn single(x: f64) -> Self {
        Moments {
            count: 1,
            mean: x,
            m2: 0.0,
        }
    }

    /// Welford update.
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        let wb = b.count as f64 / count as f64;
        Moments {
            count,
            mean: a.mean + delta * wb,
            m2: a.m2 + b.m2 + delta * delta * a.count as f64 * wb,
        }
    }

    /// Pairwise reduction over a fixed halving tree.
    pub fn pairwise(values: &[f64]) -> Moments {
        match values.len() {
            0 => Moments::default(),
            1 => Moments::single(values[0]),
            n => {
                let (l, r) = values.split_at(n / 2);
                Moments::merge(Moments::pairwise(l), Moments::pairwise(r))
            }
        }
    }

    /// Unbiased variance; `None` for fewer than two values.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }
}

/// Standard normal CDF, `Φ(z) = erfc(−z/√2)/2`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov distance between the standardised sample and `N(0, 1)`.
pub fn ks_distance(samples: &[f64], mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::DegenerateVariance(variance));
    }
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let sd = variance.sqrt();
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    Ok(z.iter().enumerate().fold(0.0, |d, (i, &zi)| {
        let f = normal_cdf(zi);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n: u64,
    pub mean: f64,
    /// `None` when there is a single trial.
    pub variance: Option<f64>,
    pub se_mean: Option<f64>,
    pub se_var: Option<f64>,
    pub theory_mean: f64,
    pub theory_var: f64,
    pub z_mean: Option<f64>,
    pub var_ratio: Option<f64>,
    pub ks_distance: Option<f64>,
    pub checks: Vec<Check>,
}

impl TrialSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Values below this are treated as a zero variance.
const DEGENERATE_VAR: f64 = 1e-12;

/// Summary of `values` against `(theory_mean, theory_var)`.
pub fn summarize(values: &[f64], theory_mean: f64, theory_var: f64, tol: &Tolerances) -> TrialSummary {
    let mom = Moments::pairwise(values);
    let n = mom.count;
    let variance = mom.variance();
    let se_mean = variance.map(|v| (v / n as f64).sqrt());
    let se_var = variance.map(|v| v * (2.0 / (n - 1) as f64).sqrt());
    let z_mean = se_mean.filter(|s| *s > 0.0).map(|s| (mom.mean - theory_mean) / s);
    let var_ratio = variance.filter(|_| theory_var.abs() > DEGENERATE_VAR).map(|v| v / theory_var);
    let ks = variance.and_then(|v| ks_distance(values, mom.mean, v).ok());

    let mut checks = Vec::new();
    let mean_gap = (mom.mean - theory_mean).abs();
    let mean_bound = tol.z_max * se_mean.unwrap_or(0.0) + tol.mean_abs.max(1e-9);
    checks.push(Check {
        name: "mean".into(),
        observed: mom.mean,
        bound: mean_bound,
        pass: se_mean.is_some() && mean_gap <= mean_bound,
        note: Some(format!("|mean − {theory_mean}| = {mean_gap:e}")),
    });
    if let Some(v) = variance {
        let (pass, bound, note) = if theory_var.abs() <= DEGENERATE_VAR {
            (v <= DEGENERATE_VAR, DEGENERATE_VAR, "degenerate: theory variance is zero".to_string())
        } else {
            let r = v / theory_var;
            ((r - 1.0).abs() <= tol.var_rel, tol.var_rel, format!("variance/theory = {r}"))
        };
        checks.push(Check {
            name: "variance".into(),
            observed: v,
            bound,
            pass,
            note: Some(note),
        });
        let ks_bound = tol.ks_coeff / (n as f64).sqrt();
        checks.push(match ks {
            Some(d) => Check {
                name: "normality".into(),
                observed: d,
                bound: ks_bound,
                pass: d <= ks_bound,
                note: None,
            },
            None => Check {
                name: "normality".into(),
                observed: 0.0,
                bound: ks_bound,
                pass: v <= DEGENERATE_VAR && theory_var.abs() <= DEGENERATE_VAR,
                note: Some("sample variance is zero; KS distance undefined".into()),
            },
        });
    }
    TrialSummary {
        n,
        mean: mom.mean,
        variance,
        se_mean,
        se_var,
        theory_mean,
        theory_var,
        z_mean,
        var_ratio,
        ks_distance: ks,
        checks,
    }
}

/// Everything one experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub prediction: CltPrediction,
    /// Statistic value of trial `t` at index `t`.
    pub values: Vec<f64>,
    pub summary: TrialSummary,
}

/// Build a worker pool with `threads` workers (at least one).
fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Evaluate `f` on trials `0..trials` with `threads` workers. Results come
/// back in trial order; the first failing trial aborts with its index.
pub fn map_trials<T, F>(seed: u64, trials: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let results: Vec<Result<T>> =
        pool(threads)?.install(|| (0..trials).into_par_iter().map(&f).collect());
    results
        .into_iter()
        .enumerate()
        .map(|(t, r)| {
            r.map_err(|e| Error::TrialFailed {
                seed,
                trial: t as u64,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Per-trial values in trial order.
pub fn trial_values(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let x = match cfg.statistic {
        StatisticKind::LssVec => Some(cfg.x_choice.vector(cfg.n)?),
        _ => None,
    };
    map_trials(cfg.seed, cfg.trials, threads, |t| cfg.trial_value(t, x.as_ref()))
}

pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let prediction = cfg.prediction()?;
    let values = trial_values(cfg, threads)?;
    let summary = summarize(&values, prediction.mean, prediction.variance, &cfg.tolerances);
    Ok(ExperimentOutcome {
        prediction,
        values,
        summary,
    })
}

/// Equal-width histogram of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 || values.is_empty() {
        return Err(Error::invalid("histogram needs values and at least one bin"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0u64; bins];
    for v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_entry, RngStream};

    fn cfg(statistic: StatisticKind, dist: DistKind) -> ExperimentConfig {
        ExperimentConfig {
            statistic,
            n: 40,
            k: 40,
            sigma2: 1.0,
            m_stages: 1,
            dist,
            trials: 50,
            seed: 7,
            x_choice: XChoice::Uniform,
            degrees: vec![1],
            user: 0,
            tolerances: Tolerances::default(),
            histogram_bins: None,
        }
    }

    fn inverse_cdf(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-12);
    }

    #[test]
    fn ks_at_quantiles() {
        for n in [10usize, 100, 1000] {
            let xs: Vec<f64> = (1..=n).map(|i| inverse_cdf((i as f64 - 0.5) / n as f64)).collect();
            let d = ks_distance(&xs, 0.0, 1.0).unwrap();
            assert!(d <= 0.5 / n as f64 + 1e-7, "n={n} d={d}");
        }
    }

    #[test]
    fn ks_single_sample() {
        assert_eq!(ks_distance(&[3.0], 3.0, 2.0).unwrap(), 0.5);
        assert!(matches!(ks_distance(&[1.0, 1.0], 1.0, 0.0), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn ks_critical_value_coverage() {
        let dist = EntryDist::new(DistKind::RealGaussian);
        let mut below = 0;
        for rep in 0..100 {
            let mut stream = RngStream::for_column(1234, rep, 0);
            let xs: Vec<f64> = (0..5000).map(|_| sample_entry(&dist, &mut stream).re).collect();
            if ks_distance(&xs, 0.0, 1.0).unwrap() < 1.63 / 5000f64.sqrt() {
                below += 1;
            }
        }
        assert!(below >= 95, "{below}");
    }

    #[test]
    fn pairwise_merge_matches_welford() {
        let xs: Vec<f64> = (0..1001).map(|i| ((i * 37) % 101) as f64 * 0.13 + 1e3).collect();
        let mut w = Moments::default();
        for &x in &xs {
            w.push(x);
        }
        let p = Moments::pairwise(&xs);
        assert_eq!(w.count, p.count);
        assert!((w.mean - p.mean).abs() <= 1e-12 * w.mean.abs());
        assert!((w.m2 - p.m2).abs() <= 1e-12 * w.m2.abs());
    }

    #[test]
    fn single_trial_has_no_variance() {
        let mut c = cfg(StatisticKind::MfSum, DistKind::ComplexGaussian);
        c.trials = 1;
        let out = run_experiment(&c, 1).unwrap();
        assert_eq!(out.summary.mean, out.values[0]);
        assert_eq!(out.summary.variance, None);
        assert_eq!(out.summary.n, 1);
    }

    #[test]
    fn thread_count_does_not_matter() {
        for stat in [StatisticKind::MfSum, StatisticKind::MswSir, StatisticKind::LssVec] {
            let mut c = cfg(stat, DistKind::ComplexGaussian);
            c.m_stages = 2;
            let a = run_experiment(&c, 1).unwrap();
            let b = run_experiment(&c, 8).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn degenerate_trace_summary() {
        let c = cfg(StatisticKind::LssEig, DistKind::Qpsk);
        let out = run_experiment(&c, 2).unwrap();
        assert!(out.values.iter().all(|v| *v == out.values[0]));
        assert_eq!(out.summary.variance, Some(0.0));
        assert!(out.summary.ks_distance.is_none());
        assert!(out.summary.all_pass(), "{:?}", out.summary.checks);
    }

    #[test]
    fn real_entries_rejected_for_receivers() {
        let c = cfg(StatisticKind::MfSum, DistKind::Rademacher);
        assert!(matches!(run_experiment(&c, 1), Err(Error::PredictionUnavailable(_))));
    }

    #[test]
    fn failing_trial_is_named() {
        let mut bad = cfg(StatisticKind::MswSir, DistKind::ComplexGaussian);
        bad.m_stages = 12;
        match trial_values(&bad, 2) {
            Err(Error::TrialFailed { seed: 7, trial: 0, source }) => {
                assert!(matches!(*source, Error::IllConditioned { .. }), "{source:?}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.1, 0.5, 1.0, 1.0], 4).unwrap();
        assert_eq!(h.edges.len(), 5);
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
        assert_eq!(h.counts, vec![2, 0, 1, 2]);
        let flat = histogram(&[2.0, 2.0], 3).unwrap();
        assert_eq!(flat.counts.iter().sum::<u64>(), 2);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let text = "statistic = \"mf-sum\"\nN = 10\nK = 10\ndist = \"qpsk\"\ntrials = 3\nseed = 1\nbogus = 2\n";
        assert!(toml::from_str::<ExperimentConfig>(text).is_err());
        let ok = text.replace("bogus = 2\n", "");
        let c: ExperimentConfig = toml::from_str(&ok).unwrap();
        assert_eq!(c.sigma2, 1.0);
        assert_eq!(c.tolerances, Tolerances::default());
    }
}
