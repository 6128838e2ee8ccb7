use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fepanel::bootstrap::{
    bootstrap_fe_and_hpj, bootstrap_fe_from_moments, percentile_ci, pivotal_interval, BootstrapRun,
    WeightScheme,
};
use fepanel::dgp::{simulate_panel, DgpSpec};
use fepanel::estimators::{
    fe_from_moments, hk_correct, hk_standard_error, hpj_from_moments, HpjMoments, PanelMoments,
};
use fepanel::inference::ccm_from_moments;
use fepanel::mc::{emit_report, run_experiment, ExperimentConfig, ReportFormat};
use fepanel::oracle::{
    bias_terms, limit_covariance, pseudo_true_closed_form, pseudo_true_simulated, OracleMethod,
    SimulationSettings,
};
use fepanel::panel::write_csv;
use fepanel::{
    build_lagged_design, load_csv, normal_ci, Error, ErrorCategory, Interval, LagSpec, Method,
};

#[derive(Parser)]
#[command(
    name = "fepanel",
    version,
    about = "Fixed-effects panel estimation, simulation and Monte Carlo experiments"
)]
struct Cli {
    /// Worker threads for bootstrap and Monte Carlo loops.
    #[arg(long, global = true, env = "FEPANEL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a lagged design on a CSV panel and report intervals.
    Estimate(EstimateArgs),
    /// Simulate a panel from a named design and write it as CSV.
    Simulate(SimulateArgs),
    /// Pseudo-true value, bias terms and limit covariance of a design.
    Oracle(OracleArgs),
    /// Run a Monte Carlo experiment from a JSON configuration.
    Mc(McArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Fe,
    Hpj,
    Hk,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InferenceArg {
    /// Normal interval with the clustered standard error.
    Ccm,
    /// Percentile interval from the estimator's own bootstrap.
    PercentileBoot,
    /// Bootstrap-t interval.
    PivotalBoot,
    /// HPJ estimate with percentile quantiles of the FE bootstrap.
    FeBoot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Centering {
    /// Residuals at the HPJ estimate.
    Hpj,
    /// Residuals at the FE estimate.
    Fe,
    /// Residuals at the estimate being reported.
    Own,
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV with columns id,t,y,x1,...
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y:1")]
    lags: LagSpec,
    #[arg(long, value_delimiter = ',', default_value = "fe,hpj")]
    methods: Vec<MethodArg>,
    #[arg(long, value_delimiter = ',', default_value = "ccm")]
    inference: Vec<InferenceArg>,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.90,0.95")]
    levels: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coefficients used to form the clustered-covariance residuals.
    #[arg(long, value_enum, default_value = "hpj")]
    centering: Centering,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Design, e.g. `ar1:0.8`, `ar2:0.4,0.4`, `rcar1:u0,0.9`.
    #[arg(long)]
    spec: DgpSpec,
    #[arg(long)]
    n: usize,
    /// Periods after the initial observation; the panel has T + 1 periods.
    #[arg(long = "T")]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    spec: DgpSpec,
    /// Fitted design; the design's default fit when absent.
    #[arg(long)]
    fit: Option<LagSpec>,
    /// Panel lengths at which to report the bias terms.
    #[arg(long = "T", value_delimiter = ',')]
    t: Vec<usize>,
    /// Also report the limit covariance.
    #[arg(long)]
    covariance: bool,
    /// Use long-run simulation even where a closed form exists.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 1_000_000)]
    t_long: usize,
    #[arg(long, default_value_t = 64)]
    n_long: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

#[derive(Args)]
struct McArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving report.csv, report.md and result.json; markdown to stdout when absent.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct OptionReport {
    option: String,
    coordinate: String,
    estimate: f64,
    se: f64,
    ci90: Option<Interval>,
    ci95: Option<Interval>,
    intervals: Vec<LevelInterval>,
    #[serde(rename = "B")]
    b: Option<usize>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct LevelInterval {
    level: f64,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    lags: String,
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    centering: &'static str,
    levels: Vec<f64>,
    results: Vec<OptionReport>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            emit_error("Usage", "usage", msg.trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, category) = match e.category() {
                ErrorCategory::Usage => (2, "usage"),
                ErrorCategory::Data => (3, "data"),
                ErrorCategory::Numerical => (4, "numerical"),
            };
            emit_error(e.kind(), category, &e.to_string());
            ExitCode::from(code)
        }
    }
}

fn emit_error(kind: &str, category: &str, message: &str) {
    let record =
        serde_json::json!({ "error": { "kind": kind, "category": category, "message": message } });
    eprintln!("{record}");
}

fn run(cli: Cli) -> fepanel::Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Oracle(a) => oracle(a),
        Command::Mc(a) => mc(a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> fepanel::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn estimate(a: EstimateArgs) -> fepanel::Result<()> {
    if a.methods.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one method is required".into(),
        ));
    }
    for &l in &a.levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::BadLevel(l));
        }
    }
    let mut levels = a.levels.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|x, y| same_level(*x, *y));

    let raw = load_csv(&a.input)?;
    let ds = build_lagged_design(&raw, &a.lags)?;
    let names = ds.regressor_names().to_vec();
    let (n, t, p) = (ds.n(), ds.t(), ds.p());

    let wants = |m: MethodArg| a.methods.contains(&m);
    if wants(MethodArg::Hk) && !a.lags.is_pure_ar1() {
        return Err(Error::NotApplicable(format!(
            "HK requires --lags y:1, got {}",
            a.lags
        )));
    }
    let boot_kinds = [
        InferenceArg::PercentileBoot,
        InferenceArg::PivotalBoot,
        InferenceArg::FeBoot,
    ];
    let wants_boot = a.inference.iter().any(|k| boot_kinds.contains(k))
        && (wants(MethodArg::Fe) || wants(MethodArg::Hpj));
    let need_hpj = wants(MethodArg::Hpj) || a.centering == Centering::Hpj;

    let (full, halves) = if need_hpj {
        let m = HpjMoments::from_panel(&ds)?;
        (m.full.clone(), Some(m))
    } else {
        (PanelMoments::from_panel(&ds)?, None)
    };
    let (fe, a_hat, _) = fe_from_moments(&full, None, "full panel")?;
    let hpj = match &halves {
        Some(m) => Some(hpj_from_moments(m, None)?.0),
        None => None,
    };
    let se_at = |beta: &nalgebra::DVector<f64>| -> fepanel::Result<Vec<f64>> {
        let ccm = ccm_from_moments(&full, beta, &a_hat, None)?;
        (0..p).map(|c| ccm.se(c)).collect()
    };
    let se_for = |own: &nalgebra::DVector<f64>| -> fepanel::Result<Vec<f64>> {
        match a.centering {
            Centering::Hpj => se_at(hpj.as_ref().expect("HPJ computed for HPJ centering")),
            Centering::Fe => se_at(&fe),
            Centering::Own => se_at(own),
        }
    };

    let runs: Option<(BootstrapRun, Option<BootstrapRun>)> = if wants_boot {
        if a.b < fepanel::bootstrap::MIN_REPLICATES {
            return Err(Error::TooFewReplicates {
                got: a.b,
                required: fepanel::bootstrap::MIN_REPLICATES,
            });
        }
        Some(match &halves {
            Some(m) => {
                let (f, h) = bootstrap_fe_and_hpj(m, a.b, WeightScheme::Multinomial, a.seed)?;
                (f, Some(h))
            }
            None => (
                bootstrap_fe_from_moments(&full, a.b, WeightScheme::Multinomial, a.seed)?,
                None,
            ),
        })
    } else {
        None
    };

    let mut results = Vec::new();
    let mut push = |option: String,
                    coord: usize,
                    est: f64,
                    se: f64,
                    boot: bool,
                    ci: &dyn Fn(f64) -> fepanel::Result<Interval>|
     -> fepanel::Result<()> {
        let mut intervals = Vec::with_capacity(levels.len());
        let (mut ci90, mut ci95) = (None, None);
        for &l in &levels {
            let iv = ci(l)?;
            if same_level(l, 0.90) {
                ci90 = Some(iv);
            }
            if same_level(l, 0.95) {
                ci95 = Some(iv);
            }
            intervals.push(LevelInterval {
                level: l,
                lo: iv.lo,
                hi: iv.hi,
            });
        }
        results.push(OptionReport {
            option,
            coordinate: names[coord].clone(),
            estimate: est,
            se,
            ci90,
            ci95,
            intervals,
            b: boot.then_some(a.b),
            seed: boot.then_some(a.seed),
        });
        Ok(())
    };

    for &m in &a.methods {
        match m {
            MethodArg::Hk => {
                let est = hk_correct(fe[0], t);
                let se = hk_standard_error(fe[0], n, t);
                push("HK".into(), 0, est, se, false, &|l| normal_ci(est, se, l))?;
            }
            MethodArg::Fe | MethodArg::Hpj => {
                let (method, beta, own_run) = if m == MethodArg::Fe {
                    (Method::Fe, &fe, runs.as_ref().map(|r| &r.0))
                } else {
                    (
                        Method::Hpj,
                        hpj.as_ref().unwrap(),
                        runs.as_ref().and_then(|r| r.1.as_ref()),
                    )
                };
                let ses = se_for(beta)?;
                let tag = method.label();
                for &kind in &a.inference {
                    for c in 0..p {
                        let (est, se) = (beta[c], ses[c]);
                        match kind {
                            InferenceArg::Ccm => {
                                push(format!("{tag}-CCM"), c, est, se, false, &|l| {
                                    normal_ci(est, se, l)
                                })?
                            }
                            InferenceArg::PercentileBoot => {
                                let run = own_run.expect("bootstrap computed");
                                push(format!("{tag}-{tag}B"), c, est, se, true, &|l| {
                                    percentile_ci(run, beta, c, l)
                                })?
                            }
                            InferenceArg::PivotalBoot => {
                                let sorted =
                                    own_run.expect("bootstrap computed").sorted_t_stats(c)?;
                                push(format!("{tag}-{tag}PB"), c, est, se, true, &|l| {
                                    pivotal_interval(est, se, &sorted, l)
                                })?
                            }
                            // Identical to the percentile option for FE.
                            InferenceArg::FeBoot if method == Method::Fe => {}
                            InferenceArg::FeBoot => {
                                let run = &runs.as_ref().expect("bootstrap computed").0;
                                push(format!("{tag}-FEB"), c, est, se, true, &|l| {
                                    percentile_ci(run, beta, c, l)
                                })?
                            }
                        }
                    }
                }
            }
        }
    }

    let report = EstimateReport {
        lags: a.lags.to_string(),
        n,
        t,
        centering: match a.centering {
            Centering::Hpj => "HPJ",
            Centering::Fe => "FE",
            Centering::Own => "own",
        },
        levels,
        results,
    };
    write_output(a.output.as_deref(), &to_json(&report))
}

fn simulate(a: SimulateArgs) -> fepanel::Result<()> {
    let sim = simulate_panel(&a.spec, a.n, a.t, a.seed)?;
    let mut buf = Vec::new();
    write_csv(&sim.dataset, &mut buf)?;
    write_output(
        a.output.as_deref(),
        &String::from_utf8(buf).expect("CSV is UTF-8"),
    )
}

fn oracle(a: OracleArgs) -> fepanel::Result<()> {
    let fit = a.fit.clone().unwrap_or_else(|| a.spec.default_fit());
    let settings = SimulationSettings {
        t_long: a.t_long,
        n_long: a.n_long,
        seed: a.seed,
        ..SimulationSettings::default()
    };
    let simulated = OracleMethod::Simulated(settings);
    let closed_first = !a.simulate && fit == a.spec.default_fit();
    let beta0 = if closed_first {
        match pseudo_true_closed_form(&a.spec) {
            Err(Error::NoClosedForm(_)) => {
                pseudo_true_simulated(&a.spec, &fit, a.t_long, a.n_long, a.seed)?
            }
            r => r?,
        }
    } else {
        pseudo_true_simulated(&a.spec, &fit, a.t_long, a.n_long, a.seed)?
    };
    let with_fallback = |f: &dyn Fn(OracleMethod) -> fepanel::Result<serde_json::Value>| -> fepanel::Result<serde_json::Value> {
        if closed_first {
            match f(OracleMethod::ClosedForm) {
                Err(Error::NoClosedForm(_)) => {}
                r => return r,
            }
        }
        f(simulated)
    };
    let mut bias = Vec::new();
    for &t in &a.t {
        bias.push(with_fallback(&|m| {
            let bt = bias_terms(&a.spec, &fit, t, m)?;
            Ok(serde_json::json!({
                "T": t,
                "leading_bias": bt.leading_bias()?.as_slice(),
                "two_term_bias": bt.two_term_bias()?.as_slice(),
                "series_bias": bt.series_bias()?.as_slice(),
                "terms": bt,
            }))
        })?);
    }
    let covariance = if a.covariance {
        Some(with_fallback(&|m| {
            let lc = limit_covariance(&a.spec, &fit, m)?;
            let cov = lc.coefficient_covariance()?;
            let rows: Vec<Vec<f64>> = cov
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect();
            Ok(serde_json::json!({ "limit": lc, "coefficient_covariance": rows }))
        })?)
    } else {
        None
    };
    let report = serde_json::json!({
        "spec": a.spec.to_string(),
        "fit": fit.to_string(),
        "beta0": beta0.beta0,
        "provenance": beta0.provenance,
        "bias_terms": bias,
        "limit_covariance": covariance,
    });
    write_output(None, &to_json(&report))
}

fn mc(a: McArgs) -> fepanel::Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|source| Error::Io {
        path: a.config.clone(),
        source,
    })?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let res = run_experiment(&cfg)?;
    match &a.output_dir {
        None => write_output(None, &emit_report(&res, ReportFormat::Markdown)),
        Some(dir) => {
            let io = |source| Error::Io {
                path: dir.clone(),
                source,
            };
            fs::create_dir_all(dir).map_err(io)?;
            write_output(
                Some(&dir.join("report.csv")),
                &emit_report(&res, ReportFormat::Csv),
            )?;
            write_output(
                Some(&dir.join("report.md")),
                &emit_report(&res, ReportFormat::Markdown),
            )?;
            write_output(Some(&dir.join("result.json")), &to_json(&res))
        }
    }
}
