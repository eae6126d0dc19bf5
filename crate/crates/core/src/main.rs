use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use sir_clt::acceptance::{self, Criterion, Fault};
use sir_clt::error::Error;
use sir_clt::formulas::{
    hankel_system, mmse_limit, predict, lss_eig_cov_correction_closed, lss_eig_cov_correction_numeric,
    lss_eig_mean_correction_closed, lss_eig_mean_correction_numeric, StatisticKind,
};
use sir_clt::harness::{histogram, run_experiment, ExperimentConfig};
use sir_clt::model::{DistKind, EntryDist, ModelParams};
use sir_clt::moments::MomentTable;
use sir_clt::record::{histogram_csv, RunRecord};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "sir-clt", version, about = "Large-system SIR limits, CLT predictions and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Shifted moments, MSW SIR limits for m = 1..m_max and the MMSE limit.
    Limits {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long = "m-max", default_value_t = 4)]
        m_max: usize,
    },
    /// Limiting mean and variance of a statistic.
    Predict {
        #[arg(long)]
        statistic: StatisticKind,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value = "complex-gaussian")]
        dist: DistKind,
        /// MSW stage count.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Monomial degrees of the spectral statistics, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        degrees: Vec<usize>,
        /// Print the prediction as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a Monte Carlo experiment and write its run record.
    Simulate {
        /// TOML experiment file; flags below override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record file (JSON lines). A histogram goes to `<out>.hist.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "SIR_CLT_THREADS")]
        threads: Option<usize>,
        #[arg(long)]
        statistic: Option<StatisticKind>,
        #[arg(long)]
        dist: Option<DistKind>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Closed-form corrections against contour quadrature.
    Contour {
        #[arg(long)]
        c: f64,
        #[arg(long = "r-max", default_value_t = 5)]
        r_max: usize,
    },
    /// Run the acceptance suite; exit 3 if any criterion fails.
    Verify {
        /// Run only these criteria (repeatable).
        #[arg(long)]
        only: Vec<Criterion>,
        #[arg(long, env = "SIR_CLT_THREADS")]
        threads: Option<usize>,
        /// Print every individual check.
        #[arg(long, short)]
        verbose: bool,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
}

enum Failure {
    Usage(String),
    Numeric(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::PredictionUnavailable(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn worker_count(threads: Option<usize>) -> usize {
    threads
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cmd_limits(c: f64, sigma2: f64, m_max: usize) -> Result<(), Failure> {
    if m_max == 0 {
        return Err(Failure::Usage("--m-max must be at least 1".into()));
    }
    let table = MomentTable::new(c, sigma2, 2 * m_max - 1)?;
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "c = {c}, sigma2 = {sigma2}");
    for (j, a) in table.a.iter().enumerate().skip(1) {
        let _ = writeln!(out, "a_{j} = {a}");
    }
    let bound = mmse_limit(c, sigma2)?;
    let _ = writeln!(out, "{:>3}  {:<22}  note", "m", "sir_limit");
    let mut prev: Option<f64> = None;
    for m in 1..=m_max {
        match hankel_system(m, c, sigma2) {
            Ok(h) => {
                let v = h.sir_limit;
                let mut note = Vec::new();
                if let Some(p) = prev {
                    note.push(if v > p { "increasing" } else { "NOT increasing" });
                }
                if v > bound {
                    note.push("ABOVE mmse_limit");
                }
                let _ = writeln!(out, "{m:>3}  {v:<22}  {}", note.join(", "));
                prev = Some(v);
            }
            Err(Error::IllConditioned { row, pivot }) => {
                let _ = writeln!(out, "{m:>3}  {:<22}  ill-conditioned (row {row}, relative pivot {pivot:e})", "-");
            }
            Err(e) => return Err(e.into()),
        }
    }
    let _ = writeln!(out, "mmse_limit = {bound}");
    Ok(())
}

fn cmd_predict(
    statistic: StatisticKind,
    c: f64,
    sigma2: f64,
    dist: DistKind,
    m: usize,
    degrees: &[usize],
    json: bool,
) -> Result<(), Failure> {
    let params = ModelParams::new(c, sigma2, EntryDist::new(dist), m)?;
    let p = predict(statistic, &params, degrees)?;
    if json {
        let text = serde_json::to_string_pretty(&p).map_err(|e| Failure::Numeric(e.to_string()))?;
        println!("{text}");
        return Ok(());
    }
    println!("statistic = {}", p.statistic);
    println!("dist = {dist}, c = {c}, sigma2 = {sigma2}, E|v|^4 = {}", p.inputs.fourth_moment);
    match statistic {
        StatisticKind::MswSir => println!("m = {m}"),
        StatisticKind::LssEig | StatisticKind::LssVec => println!("degrees = {degrees:?}"),
        _ => {}
    }
    println!("mean = {}", p.mean);
    println!("variance = {}", p.variance);
    println!("formulas: {}", p.formula);
    if p.variance.abs() <= 1e-12 {
        println!("note: degenerate limit, the statistic does not fluctuate at this order");
    }
    Ok(())
}

fn build_config(
    path: Option<&Path>,
    overrides: Vec<(&str, Option<toml::Value>)>,
) -> Result<ExperimentConfig, Failure> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_failure(p, e))?;
            text.parse::<toml::Table>()
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for (key, value) in overrides {
        if let Some(v) = value {
            table.insert(key.to_string(), v);
        }
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::Usage(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn histogram_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".hist.csv");
    PathBuf::from(name)
}

fn cmd_simulate(cfg: ExperimentConfig, out: &Path, threads: usize) -> Result<(), Failure> {
    let outcome = run_experiment(&cfg, threads)?;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let hist = cfg.histogram_bins.map(|b| histogram(&outcome.values, b)).transpose()?;
    let record = RunRecord::new(cfg, outcome, timestamp);
    let file = File::create(out).map_err(|e| io_failure(out, e))?;
    record.write_to(BufWriter::new(file))?;
    if let Some(h) = hist {
        let path = histogram_path(out);
        std::fs::write(&path, histogram_csv(&h)).map_err(|e| io_failure(&path, e))?;
    }
    let s = &record.summary;
    eprintln!(
        "{} trials of {}: mean {} (theory {}), variance {} (theory {})",
        s.n,
        record.config.statistic,
        s.mean,
        s.theory_mean,
        s.variance.map_or("n/a".to_string(), |v| v.to_string()),
        s.theory_var
    );
    for check in &s.checks {
        eprintln!(
            "  {} {}: observed {}, bound {}",
            if check.pass { "pass" } else { "fail" },
            check.name,
            check.observed,
            check.bound
        );
    }
    Ok(())
}

fn cmd_contour(c: f64, r_max: usize) -> Result<(), Failure> {
    if r_max == 0 {
        return Err(Failure::Usage("--r-max must be at least 1".into()));
    }
    println!("c = {c}");
    println!("{:>2}  {:<24} {:<24} diff", "r", "mean corr. closed", "contour");
    for r in 1..=r_max {
        let closed = lss_eig_mean_correction_closed(r, c)?;
        let numeric = lss_eig_mean_correction_numeric(r, c)?;
        println!("{r:>2}  {closed:<24} {numeric:<24} {:.3e}", (closed - numeric).abs());
    }
    println!("{:>5}  {:<24} {:<24} diff", "r1,r2", "cov. corr. closed", "contour");
    for r1 in 1..=r_max {
        for r2 in r1..=r_max {
            let closed = lss_eig_cov_correction_closed(r1, r2, c)?;
            let numeric = lss_eig_cov_correction_numeric(r1, r2, c)?;
            println!("{:>5}  {closed:<24} {numeric:<24} {:.3e}", format!("{r1},{r2}"), (closed - numeric).abs());
        }
    }
    Ok(())
}

fn cmd_verify(only: Vec<Criterion>, threads: usize, verbose: bool, fault: Option<Fault>) -> Result<(), Failure> {
    let criteria = if only.is_empty() { Criterion::ALL.to_vec() } else { only };
    let opts = acceptance::Options { threads, fault };
    let mut all_pass = true;
    for c in criteria {
        let report = acceptance::run(c, &opts);
        println!("{}", report.line());
        if verbose || !report.pass() {
            for line in report.detail_lines() {
                println!("{line}");
            }
        }
        all_pass &= report.pass();
    }
    if all_pass {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Limits { c, sigma2, m_max } => cmd_limits(c, sigma2, m_max),
        Command::Predict {
            statistic,
            c,
            sigma2,
            dist,
            m,
            degrees,
            json,
        } => cmd_predict(statistic, c, sigma2, dist, m, &degrees, json),
        Command::Simulate {
            config,
            out,
            threads,
            statistic,
            dist,
            n,
            k,
            sigma2,
            trials,
            seed,
        } => {
            let int = |v: Option<u64>| v.map(|x| toml::Value::Integer(x as i64));
            let cfg = build_config(
                config.as_deref(),
                vec![
                    ("statistic", statistic.map(|s| toml::Value::String(s.name().into()))),
                    ("dist", dist.map(|d| toml::Value::String(d.name().into()))),
                    ("N", int(n.map(|x| x as u64))),
                    ("K", int(k.map(|x| x as u64))),
                    ("sigma2", sigma2.map(toml::Value::Float)),
                    ("trials", int(trials)),
                    ("seed", int(seed)),
                ],
            )?;
            cmd_simulate(cfg, &out, worker_count(threads))
        }
        Command::Contour { c, r_max } => cmd_contour(c, r_max),
        Command::Verify {
            only,
            threads,
            verbose,
            inject_fault,
        } => cmd_verify(only, worker_count(threads), verbose, inject_fault),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(Failure::Verify) => {
            eprintln!("verification failed");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
