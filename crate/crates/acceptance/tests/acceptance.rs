//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//!
//! Positional arguments that name criterion tags restrict the run; other
//! arguments (such as those cargo forwards) are ignored. Workers default to
//! the available parallelism and can be set with `SIR_CLT_THREADS`.

use std::process::ExitCode;
use std::time::Instant;

use sir_clt::acceptance::{self as acc, Criterion, Options};
use sir_clt::model::DistKind;

/// Every tolerance, size and target the criteria use, pinned.
fn pinned() -> Vec<(&'static str, bool)> {
    vec![
        ("limit tolerance 1e-12", acc::LIMIT_TOL == 1e-12),
        ("MMSE gap 1e-3", acc::MMSE_GAP == 1e-3),
        ("MSW mean: N = K = 512, 2000 trials", acc::MSW_MEAN_N == 512 && acc::MSW_MEAN_TRIALS == 2000),
        ("MSW mean band 3 SE + 0.01", acc::MSW_MEAN_SE == 3.0 && acc::MSW_MEAN_ABS == 0.01),
        ("fluctuation: N = K = 400, 5000 trials", acc::FLUCT_N == 400 && acc::FLUCT_TRIALS == 5000),
        ("fluctuation variance band 10%", acc::FLUCT_REL == 0.10),
        ("KS bound 1.95/sqrt(n)", acc::KS_COEFF == 1.95),
        (
            "fluctuation targets 0.375, 0.125",
            acc::FLUCT_TARGETS == [(DistKind::ComplexGaussian, 0.375), (DistKind::Qpsk, 0.125)],
        ),
        ("matched filter: N = K = 400, 5000 trials", acc::MF_N == 400 && acc::MF_TRIALS == 5000),
        ("|z_mean| < 4", acc::MF_Z_MAX == 4.0),
        ("var_ratio in [0.85, 1.15]", acc::MF_VAR_BAND == (0.85, 1.15)),
        (
            "SIR sum targets (0.375, 0.1875), (-0.125, 0.125)",
            acc::MF_SUM_TARGETS
                == [(DistKind::ComplexGaussian, 0.375, 0.1875), (DistKind::Qpsk, -0.125, 0.125)],
        ),
        ("mutual information target (1/18, 1/12)", acc::MF_MI_TARGET == (1.0 / 18.0, 1.0 / 12.0)),
        ("eigenvalue statistic band 10%, mean 4 SE", acc::LSS_REL == 0.10 && acc::LSS_MEAN_SE == 4.0),
        ("contour tolerance 1e-8", acc::CONTOUR_TOL == 1e-8),
        ("eigenvector: N = K = 400, 5000 trials", acc::VEC_N == 400 && acc::VEC_TRIALS == 5000),
        ("eigenvector band 15%", acc::VEC_REL == 0.15),
        ("kernel tolerance 1e-6", acc::KERNEL_TOL == 1e-6),
    ]
}

fn main() -> ExitCode {
    let selected: Vec<Criterion> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria = if selected.is_empty() { Criterion::ALL.to_vec() } else { selected };
    let threads = std::env::var("SIR_CLT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t: &usize| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let mut ok = true;
    let pins = pinned();
    let unpinned: Vec<&str> = pins.iter().filter(|p| !p.1).map(|p| p.0).collect();
    if unpinned.is_empty() {
        println!("PASS  0 tolerances  {} pinned values match", pins.len());
    } else {
        println!("FAIL  0 tolerances  changed: {}", unpinned.join("; "));
        ok = false;
    }

    let opts = Options { threads, fault: None };
    let mut failed = Vec::new();
    for c in criteria {
        let start = Instant::now();
        let report = acc::run(c, &opts);
        println!("{}  [{:.1}s]", report.line(), start.elapsed().as_secs_f64());
        for line in report.detail_lines() {
            println!("{line}");
        }
        if !report.pass() {
            failed.push(c.tag());
        }
    }
    if failed.is_empty() && ok {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
