//! Command-line front end: simulate data, fit, run the two-sample test,
//! compute power curves, run the baselines and summarize reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hawkes_gof::asymptotics::{asymptotic_power, chi2_quantile, PowerQuery};
use hawkes_gof::baselines::{exp_mle_gd, residual_process, ripley_k};
use hawkes_gof::calibration::{auc, ks_test, qq_pairs, roc_curve};
use hawkes_gof::em::{em_fit_full_with, em_fit_null_with, EmOptions};
use hawkes_gof::harness::config::parse_grid;
use hawkes_gof::harness::gof::mix_pairs;
use hawkes_gof::harness::report::{read_gs_csv, write_table};
use hawkes_gof::harness::{emit, emit_report, ingest, run_gof, ReportFormat, TestConfig};
use hawkes_gof::{simulate_batch, Error, EventSequence, HawkesModel, LabeledSequence, Result, TriggeringKernel};

#[derive(Parser)]
#[command(name = "hawkes-gof", version, about = "Goodness-of-fit testing for self-exciting point processes")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate sequences from a Hawkes model into a sequence file.
    Simulate(SimulateArgs),
    /// Fit the shared-kernel (null) or two-kernel (full) histogram model.
    Fit(FitArgs),
    /// Two-sample goodness-of-fit test with K reshuffled statistics.
    Test(TestArgs),
    /// Asymptotic power as a function of the kernel difference norm.
    Power(PowerArgs),
    /// Competing diagnostics.
    #[command(subcommand)]
    Baseline(Baseline),
    /// QQ and ROC tables from gs.csv files.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Exp,
    Power,
    Piecewise,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "exp")]
    kernel: KernelKind,
    #[arg(long, default_value_t = 20.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Decay rate of the exponential kernel.
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    /// Offset of the power kernel.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Exponent of the power kernel.
    #[arg(long, default_value_t = 15.0)]
    p: f64,
    /// Bin grid of the piecewise kernel.
    #[arg(long, default_value = "paper3")]
    bins: String,
    /// Comma-separated bin weights of the piecewise kernel.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "seq-")]
    prefix: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMode {
    Null,
    Full,
}

#[derive(Args)]
struct FitArgs {
    /// Sequence file; used alone it is fitted as a single process.
    #[arg(long)]
    d1: PathBuf,
    /// Second sequence file, merged pairwise with the first.
    #[arg(long)]
    d2: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "null")]
    mode: FitMode,
    #[arg(long, default_value = "paper14")]
    bins: String,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d1: Option<PathBuf>,
    #[arg(long)]
    d2: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    dof_override: Option<u32>,
    /// Output directory for gs.csv and fit.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    /// Degrees of freedom (bin count).
    #[arg(long)]
    r: u32,
    /// Aggregated observation length.
    #[arg(long)]
    scale: f64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = 1.0)]
    max_delta: f64,
    #[arg(long, default_value_t = 51)]
    points: usize,
    /// Output directory for power.csv; prints to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Baseline {
    /// Ripley's K of residuals thinned under a null fit on a reference set.
    Ripley {
        /// Reference sequences used to fit the model.
        #[arg(long)]
        fit: PathBuf,
        /// Sequences to thin and score.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "paper14")]
        bins: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exponential-kernel fit by projected gradient ascent.
    Expgd {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 5.0)]
        beta: f64,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// gs.csv from a run whose statistics should follow the null.
    #[arg(long)]
    gs: PathBuf,
    /// gs.csv from a run under the alternative, for the ROC table.
    #[arg(long)]
    alt: Option<PathBuf>,
    /// Degrees of freedom of the reference distribution.
    #[arg(long)]
    dof: u32,
    #[arg(long)]
    out: PathBuf,
}

fn labeled(d1: &[EventSequence], d2: Option<&[EventSequence]>) -> Result<Vec<LabeledSequence>> {
    match d2 {
        Some(d2) => mix_pairs(d1, d2),
        None => Ok(d1.iter().map(EventSequence::to_labeled).collect()),
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let kernel = match a.kernel {
        KernelKind::Exp => TriggeringKernel::exponential(a.alpha, a.beta)?,
        KernelKind::Power => TriggeringKernel::power(a.alpha, a.c, a.p)?,
        KernelKind::Piecewise => {
            let grid = parse_grid(&a.bins)?;
            let weights = match a.weights {
                Some(w) => w
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad weight '{x}'"))))
                    .collect::<Result<Vec<f64>>>()?,
                None => vec![1.0; grid.n_bins()],
            };
            TriggeringKernel::piecewise(grid, weights, a.alpha)?
        }
    };
    let seqs = simulate_batch(&HawkesModel::new(a.mu, kernel)?, a.horizon, a.count, a.seed, &a.prefix)?;
    emit(&a.out, &seqs)
}

fn fit(a: FitArgs) -> Result<()> {
    let opts = match &a.config {
        Some(p) => TestConfig::load(p)?.em,
        None => EmOptions::default(),
    };
    let grid = parse_grid(&a.bins)?;
    let d1 = ingest(&a.d1)?;
    let d2 = a.d2.as_ref().map(ingest).transpose()?;
    let seqs = labeled(&d1, d2.as_deref())?;
    match a.mode {
        FitMode::Null => println!("{}", json(&em_fit_null_with(&seqs, &grid, &opts)?)),
        FitMode::Full => println!("{}", json(&em_fit_full_with(&seqs, &grid, &opts)?)),
    }
    Ok(())
}

fn test(a: TestArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TestConfig::load(p)?,
        None => TestConfig::default(),
    };
    if let Some(b) = &a.bins {
        cfg.set("bins", b)?;
    }
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.k = a.k.unwrap_or(cfg.k);
    cfg.level = a.level.unwrap_or(cfg.level);
    cfg.gs.dof_override = a.dof_override.or(cfg.gs.dof_override);
    cfg.d1 = a.d1.or(cfg.d1);
    cfg.d2 = a.d2.or(cfg.d2);
    cfg.out = a.out.or(cfg.out);
    let (Some(p1), Some(p2)) = (&cfg.d1, &cfg.d2) else {
        return Err(Error::Config("both d1 and d2 are required".into()));
    };
    let (d1, d2) = (ingest(p1)?, ingest(p2)?);
    let report = run_gof(&d1, &d2, &cfg)?;
    if let Some(dir) = &cfg.out {
        emit_report(&report, dir, ReportFormat::Csv)?;
        emit_report(&report, dir, ReportFormat::Jsonl)?;
    }
    let stats = report.statistics();
    println!(
        "trials {} ok {} mean {:.4} rejection rate {:.4}",
        report.trials.len(),
        stats.len(),
        stats.iter().sum::<f64>() / stats.len().max(1) as f64,
        report.rejection_rate()
    );
    Ok(())
}

fn power(a: PowerArgs) -> Result<()> {
    if a.points < 2 || !(a.max_delta > 0.0) {
        return Err(Error::Config("need points >= 2 and max_delta > 0".into()));
    }
    let critical = chi2_quantile(1.0 - a.level, a.r)?;
    let rows = (0..a.points)
        .map(|i| {
            let d = a.max_delta * i as f64 / (a.points - 1) as f64;
            Ok(vec![d, asymptotic_power(&PowerQuery::new(a.r, d, a.scale, critical)?)])
        })
        .collect::<Result<Vec<_>>>()?;
    match &a.out {
        Some(dir) => write_table(dir, "power.csv", &["delta_norm", "power"], &rows)?,
        None => {
            println!("delta_norm,power");
            rows.iter().for_each(|r| println!("{},{}", r[0], r[1]));
        }
    }
    Ok(())
}

fn baseline(b: Baseline) -> Result<()> {
    match b {
        Baseline::Ripley { fit, input, bins, t, seed } => {
            let reference = labeled(&ingest(fit)?, None)?;
            let null = em_fit_null_with(&reference, &parse_grid(&bins)?, &EmOptions::default())?.theta;
            let model = HawkesModel::new(null.mu, null.kernel())?;
            println!("id,events,kept,k_hat");
            for (i, s) in ingest(input)?.iter().enumerate() {
                let r = residual_process(s, &model, seed.wrapping_add(i as u64));
                let k = ripley_k(&r, t, model.mu).map_or(String::new(), |k| k.to_string());
                println!("{},{},{},{k}", s.id(), s.len(), r.len());
            }
        }
        Baseline::Expgd { input, mu, alpha, beta, lr, steps } => {
            println!("{}", json(&exp_mle_gd(&ingest(input)?, (mu, alpha, beta), lr, steps)?));
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let null = read_gs_csv(&a.gs)?;
    if null.is_empty() {
        return Err(Error::EmptyFile);
    }
    let quantile = |p: f64| chi2_quantile(p, a.dof).expect("p lies in (0, 1)");
    let qq: Vec<Vec<f64>> = qq_pairs(&null, quantile).into_iter().map(|(e, t)| vec![e, t]).collect();
    write_table(&a.out, "qq.csv", &["empirical", "theoretical"], &qq)?;
    let ks = ks_test(&null, |x| hawkes_gof::asymptotics::chi2_cdf(x.max(0.0), a.dof).unwrap_or(0.0));
    println!("ks statistic {:.4} p-value {:.4}", ks.statistic, ks.p_value);
    if let Some(alt) = &a.alt {
        let alt = read_gs_csv(alt)?;
        let roc: Vec<Vec<f64>> = roc_curve(&alt, &null).into_iter().map(|(t, f, p)| vec![t, f, p]).collect();
        write_table(&a.out, "roc.csv", &["threshold", "fpr", "tpr"], &roc)?;
        println!("auc {:.4}", auc(&alt, &null));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Test(a) => test(a),
        Command::Power(a) => power(a),
        Command::Baseline(b) => baseline(b),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

