//! Seeded Monte Carlo checks of the moment, receiver and spectral engines.

use nalgebra::DMatrix;
use sir_clt::formulas::{
    hankel_system, mmse_limit, msw_variance, lss_eig_prediction, zeta_covariance, BridgeConvention,
    StatisticKind,
};
use sir_clt::harness::{map_trials, run_experiment, ExperimentConfig, Moments, Tolerances};
use sir_clt::linalg::Gram;
use sir_clt::model::{sample_unit_ensemble, DistKind, EntryDist};
use sir_clt::receivers::{matched_filter_sirs, mmse_sir};
use sir_clt::spectral::{eigenvalues, quadratic_form_moments, XChoice};

fn mean_se(values: &[f64]) -> (f64, f64, f64) {
    let m = Moments::pairwise(values);
    let var = m.variance().unwrap();
    (m.mean, (var / values.len() as f64).sqrt(), var)
}

fn cg() -> EntryDist {
    EntryDist::new(DistKind::ComplexGaussian)
}

/// `(Tr G², Tr G³, Tr G⁴)` for `G = S*S`, through real products.
fn gram_power_traces(g: &Gram) -> (f64, f64, f64) {
    let re = &g.re;
    let zero = DMatrix::zeros(re.nrows(), re.ncols());
    let im = g.im.as_ref().unwrap_or(&zero);
    let sq_re = re * re - im * im;
    let sq_im = re * im + im * re;
    let tr2 = sq_re.trace();
    // Tr G³ = Re Σ (G²)_{ij} G_{ji}; G_{ji} = re_{ij} − i·im_{ij}.
    let tr3 = sq_re.component_mul(re).sum() + sq_im.component_mul(im).sum();
    let tr4 = sq_re.norm_squared() + sq_im.norm_squared();
    (tr2, tr3, tr4)
}

#[test]
fn normalised_power_traces_approach_catalan_numbers() {
    let n = 512;
    let dist = cg();
    let rows = map_trials(21, 200, 1, |t| {
        let e = sample_unit_ensemble(n, n, &dist, 21, t)?;
        let tr1 = e.s.norm_squared();
        let (tr2, tr3, tr4) = gram_power_traces(&Gram::of(&e.s));
        let nf = n as f64;
        // R = A + I at c = 1: Tr R³ = Tr A³ + 3 Tr A² + 3 Tr A + N.
        let r3 = tr3 + 3.0 * tr2 + 3.0 * tr1 + nf;
        Ok([tr2 / nf, tr3 / nf, tr4 / nf, r3 / nf])
    })
    .unwrap();
    for (j, want) in [2.0, 5.0, 14.0, 15.0].into_iter().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (mean, se, _) = mean_se(&vals);
        assert!((mean - want).abs() <= 3.0 * se, "column {j}: {mean} ± {se} vs {want}");
    }
}

#[test]
fn matched_filter_mean_is_inverse_a1() {
    // Per-user bias is μ/K with μ = 0.375 from the sum CLT.
    let n = 256;
    let dist = cg();
    let per_trial = map_trials(22, 40, 1, |t| {
        let e = sample_unit_ensemble(n, n, &dist, 22, t)?;
        let sirs = matched_filter_sirs(&e, 1.0)?;
        Ok(sirs.iter().sum::<f64>() / sirs.len() as f64)
    })
    .unwrap();
    let (mean, se, _) = mean_se(&per_trial);
    let centre = 0.5 + 0.375 / n as f64;
    assert!((mean - centre).abs() <= 3.0 * se, "{mean} ± {se} vs {centre}");
    assert!((mean - 0.5).abs() < 0.005);
}

#[test]
fn mmse_mean_reaches_fixed_point() {
    let n = 512;
    let dist = cg();
    let values = map_trials(23, 30, 1, |t| {
        let e = sample_unit_ensemble(n, n, &dist, 23, t)?;
        Ok(mmse_sir(&e, 0, 1.0)?.value)
    })
    .unwrap();
    let (mean, se, _) = mean_se(&values);
    let beta = mmse_limit(1.0, 1.0).unwrap();
    assert!((beta - 0.618034).abs() < 1e-6);
    assert!((mean - beta).abs() <= 3.0 * se, "{mean} ± {se} vs {beta}");
}

#[test]
fn eigenvalues_concentrate_on_support() {
    let n = 512;
    let dist = cg();
    let edge = 4.0 + 0.1;
    for t in 0..2 {
        let e = sample_unit_ensemble(n, n, &dist, 24, t).unwrap();
        let eig = eigenvalues(&e).unwrap();
        let outside = eig.iter().filter(|&&l| l > edge).count();
        assert!((outside as f64) < 0.01 * n as f64, "{outside} eigenvalues above {edge}");
        let trace = e.s.norm_squared();
        let sum: f64 = eig.iter().sum();
        assert!((sum - trace).abs() <= 1e-10 * trace);
        assert!(eig[0] >= -1e-10);
    }
}

#[test]
fn quadratic_form_variances() {
    let n = 200;
    let dist = cg();
    let rows = map_trials(25, 5000, 1, |t| {
        let e = sample_unit_ensemble(n, n, &dist, 25, t)?;
        quadratic_form_moments(&e, 0, &[0, 1], 1.0)
    })
    .unwrap();
    let d0: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let d1: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let (_, _, v0) = mean_se(&d0);
    assert!((v0 / (dist.fourth_moment - 1.0) - 1.0).abs() < 0.10, "degree 0 variance {v0}");
    let zeta = zeta_covariance(1, 1.0, 1.0, dist.fourth_moment, BridgeConvention::Complex).unwrap();
    let (_, _, v1) = mean_se(&d1);
    let target = zeta.cov[(1, 1)];
    assert!((v1 / target - 1.0).abs() < 0.10, "degree 1 variance {v1} vs {target}");

    let qpsk = EntryDist::new(DistKind::Qpsk);
    let e = sample_unit_ensemble(n, n, &qpsk, 25, 0).unwrap();
    let q = quadratic_form_moments(&e, 3, &[0], 1.0).unwrap();
    assert!(q[0].abs() < 1e-12);
}

#[test]
fn polynomial_statistic_matches_prediction() {
    // g = x + x², c = 1, complex Gaussian: mean 0, variance 1 + 2·4 + 18.
    let cfg = ExperimentConfig {
        statistic: StatisticKind::LssEig,
        n: 512,
        k: 512,
        sigma2: 1.0,
        m_stages: 1,
        dist: DistKind::ComplexGaussian,
        trials: 5000,
        seed: 26,
        x_choice: XChoice::Uniform,
        degrees: vec![1, 2],
        user: 0,
        tolerances: Tolerances {
            var_rel: 0.10,
            ..Tolerances::default()
        },
        histogram_bins: None,
    };
    let p = lss_eig_prediction(&[1, 2], 1.0, &cg()).unwrap();
    assert!(p.mean.abs() < 1e-9);
    assert!((p.variance - 27.0).abs() < 1e-7);
    let out = run_experiment(&cfg, 1).unwrap();
    let s = &out.summary;
    assert!(s.check("mean").unwrap().pass, "{:?}", s);
    assert!(s.check("variance").unwrap().pass, "{:?}", s);
}

#[test]
fn msw_fluctuation_two_stages() {
    let cfg = ExperimentConfig {
        statistic: StatisticKind::MswSir,
        n: 512,
        k: 512,
        sigma2: 1.0,
        m_stages: 2,
        dist: DistKind::ComplexGaussian,
        trials: 2000,
        seed: 27,
        x_choice: XChoice::Uniform,
        degrees: vec![1],
        user: 0,
        tolerances: Tolerances::default(),
        histogram_bins: None,
    };
    let out = run_experiment(&cfg, 1).unwrap();
    let s = &out.summary;
    let engine = msw_variance(2, 1.0, 1.0, 2.0).unwrap().variance;
    assert_eq!(s.theory_var, engine);
    assert_eq!(s.theory_mean, 0.0);
    assert!(s.z_mean.unwrap().abs() < 4.0, "{s:?}");
    let ratio = s.var_ratio.unwrap();
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");

    // The raw SIRs centre on the stage-2 limit.
    let raw: Vec<f64> = out.values.iter().map(|v| v / (512f64).sqrt()).collect();
    let (mean, se, _) = mean_se(&raw);
    assert!(mean.abs() <= 3.0 * se + 0.01);
    assert!((hankel_system(2, 1.0, 1.0).unwrap().sir_limit - 0.6).abs() < 1e-12);
}
