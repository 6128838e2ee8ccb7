//! Monte Carlo harness: bias, dispersion and coverage of the estimators
//! and inference options over a grid of panel sizes.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    bootstrap_fe_and_hpj, percentile_ci, pivotal_interval, WeightScheme, MIN_REPLICATES,
};
use crate::dgp::{simulate_panel, DgpSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    fe_from_moments, hk_correct, hk_standard_error, hpj_from_moments, HpjMoments, Method,
    PanelMoments,
};
use crate::inference::{ccm_from_moments, normal_ci, Interval};
use crate::numeric::{mean, sample_sd, two_sided_z};
use crate::oracle::{
    pseudo_true_closed_form, pseudo_true_simulated, Provenance, PseudoTrue, SimulationSettings,
};
use crate::panel::{build_lagged_design, LagSpec};
use crate::rng::{derive_key, domain};

/// Estimator plus interval construction, as compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InferenceOption {
    /// FE estimate with a clustered-covariance normal interval.
    #[serde(rename = "FE-CCM")]
    FeCcm,
    /// HK estimate with its analytic standard error.
    #[serde(rename = "HK")]
    Hk,
    /// HPJ estimate with a clustered-covariance normal interval.
    #[serde(rename = "HPJ-CCM")]
    HpjCcm,
    /// HPJ center, percentile quantiles of the FE bootstrap.
    #[serde(rename = "HPJ-FEB")]
    HpjFeb,
    /// HPJ center, percentile quantiles of the HPJ bootstrap.
    #[serde(rename = "HPJ-HPJB")]
    HpjHpjb,
    /// HPJ center, bootstrap-t quantiles of the HPJ t statistic.
    #[serde(rename = "HPJ-HPJPB")]
    HpjHpjpb,
}

impl InferenceOption {
    pub const ALL: [InferenceOption; 6] = [
        InferenceOption::FeCcm,
        InferenceOption::Hk,
        InferenceOption::HpjCcm,
        InferenceOption::HpjFeb,
        InferenceOption::HpjHpjb,
        InferenceOption::HpjHpjpb,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InferenceOption::FeCcm => "FE-CCM",
            InferenceOption::Hk => "HK",
            InferenceOption::HpjCcm => "HPJ-CCM",
            InferenceOption::HpjFeb => "HPJ-FEB",
            InferenceOption::HpjHpjb => "HPJ-HPJB",
            InferenceOption::HpjHpjpb => "HPJ-HPJPB",
        }
    }

    /// The point estimator the interval is centered on.
    pub fn estimator(self) -> Method {
        match self {
            InferenceOption::FeCcm => Method::Fe,
            InferenceOption::Hk => Method::Hk,
            _ => Method::Hpj,
        }
    }

    pub fn uses_bootstrap(self) -> bool {
        matches!(
            self,
            InferenceOption::HpjFeb | InferenceOption::HpjHpjb | InferenceOption::HpjHpjpb
        )
    }
}

impl fmt::Display for InferenceOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for InferenceOption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        InferenceOption::ALL
            .into_iter()
            .find(|o| o.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Parse {
                what: "inference option",
                input: s.to_string(),
                reason: "expected one of FE-CCM, HK, HPJ-CCM, HPJ-FEB, HPJ-HPJB, HPJ-HPJPB".into(),
            })
    }
}

fn default_bootstrap_b() -> usize {
    1000
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    /// Fitted design; the design's default fit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<LagSpec>,
    /// `(n, T)` cells.
    pub grid: Vec<(usize, usize)>,
    pub reps: usize,
    pub options: Vec<InferenceOption>,
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub master_seed: u64,
    /// Pseudo-true value used for scoring; taken from the oracle when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<Vec<f64>>,
    /// Coefficient scored.
    #[serde(default)]
    pub coordinate: usize,
    /// Settings of the simulated oracle when no closed form exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<SimulationSettings>,
}

impl ExperimentConfig {
    pub fn new(
        dgp: DgpSpec,
        grid: Vec<(usize, usize)>,
        reps: usize,
        options: Vec<InferenceOption>,
        master_seed: u64,
    ) -> Self {
        Self {
            dgp,
            fit: None,
            grid,
            reps,
            options,
            bootstrap_b: default_bootstrap_b(),
            level: default_level(),
            master_seed,
            beta0: None,
            coordinate: 0,
            oracle: None,
        }
    }

    pub fn fit(&self) -> LagSpec {
        self.fit.clone().unwrap_or_else(|| self.dgp.default_fit())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.dgp.validate()?;
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::BadLevel(self.level));
        }
        if self.options.is_empty() {
            return bad("options must not be empty".into());
        }
        if self.grid.is_empty() {
            return bad("grid must not be empty".into());
        }
        let fit = self.fit();
        if self.coordinate >= fit.width() {
            return bad(format!(
                "coordinate {} out of range for fit {fit}",
                self.coordinate
            ));
        }
        if let Some(b) = &self.beta0 {
            if b.len() != fit.width() || b.iter().any(|v| !v.is_finite()) {
                return bad(format!("beta0 must hold {} finite values", fit.width()));
            }
        }
        if self.options.contains(&InferenceOption::Hk) && !fit.is_pure_ar1() {
            return bad(format!("HK requires the fit y:1, got {fit}"));
        }
        if self.options.iter().any(|o| o.uses_bootstrap()) && self.bootstrap_b < MIN_REPLICATES {
            return bad(format!("bootstrap_b must be at least {MIN_REPLICATES}"));
        }
        for &(n, t) in &self.grid {
            if n < 2 || t < 4 {
                return bad(format!("cell (n={n}, T={t}) needs n >= 2 and T >= 4"));
            }
        }
        Ok(())
    }

    /// Pseudo-true value for scoring: the override, the closed form, or a long-run simulation.
    pub fn pseudo_true(&self) -> Result<PseudoTrue> {
        if let Some(b) = &self.beta0 {
            return Ok(PseudoTrue {
                beta0: b.clone(),
                provenance: Provenance::ClosedForm,
            });
        }
        let fit = self.fit();
        if fit == self.dgp.default_fit() {
            match pseudo_true_closed_form(&self.dgp) {
                Ok(p) => return Ok(p),
                Err(Error::NoClosedForm(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let o = self.oracle.unwrap_or_default();
        pseudo_true_simulated(&self.dgp, &fit, o.t_long, o.n_long, o.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSummary {
    pub option: InferenceOption,
    pub estimator: Method,
    pub mean_bias: f64,
    pub sd: f64,
    pub rmse: f64,
    /// Average standard error; for bootstrap options `width / (2 z)`.
    pub mean_se: f64,
    /// `mean_se / sd`; absent when `sd` is zero.
    pub se_ratio: Option<f64>,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub t: usize,
    pub reps: usize,
    pub failures: usize,
    pub beta0: f64,
    pub options: Vec<OptionSummary>,
}

impl CellResult {
    pub fn option(&self, option: InferenceOption) -> Option<&OptionSummary> {
        self.options.iter().find(|o| o.option == option)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub cells: Vec<CellResult>,
}

impl McResult {
    pub fn cell(&self, n: usize, t: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.n == n && c.t == t)
    }
}

/// Outcome of one replication for each requested option: `(estimate, se, covered)`.
type RepOutcome = Vec<(f64, f64, bool)>;

struct CellPlan<'a> {
    cfg: &'a ExperimentConfig,
    fit: LagSpec,
    beta0: f64,
    cell: usize,
    n: usize,
    t: usize,
    z: f64,
}

impl CellPlan<'_> {
    fn replicate(&self, r: usize) -> Result<RepOutcome> {
        let cfg = self.cfg;
        let a = cfg.coordinate;
        let key = [
            domain::REPLICATION,
            cfg.master_seed,
            self.cell as u64,
            r as u64,
        ];
        let raw = simulate_panel(&cfg.dgp, self.n, self.t, derive_key(&key))?;
        let design = build_lagged_design(&raw.dataset, &self.fit)?;
        let needs_hpj = cfg.options.iter().any(|o| o.estimator() == Method::Hpj);
        let (full, halves) = if needs_hpj {
            let m = HpjMoments::from_panel(&design)?;
            (m.full.clone(), Some(m))
        } else {
            (PanelMoments::from_panel(&design)?, None)
        };
        let (fe, a_hat, _) = fe_from_moments(&full, None, "full panel")?;
        let hpj = match &halves {
            Some(m) => Some(hpj_from_moments(m, None)?.0),
            None => None,
        };
        let hpj_se = match &hpj {
            Some(b) => Some(ccm_from_moments(&full, b, &a_hat, None)?.se(a)?),
            None => None,
        };
        let boot = match &halves {
            Some(m) if cfg.options.iter().any(|o| o.uses_bootstrap()) => {
                let seed = derive_key(&[
                    domain::BOOTSTRAP,
                    cfg.master_seed,
                    self.cell as u64,
                    r as u64,
                ]);
                Some(bootstrap_fe_and_hpj(
                    m,
                    cfg.bootstrap_b,
                    WeightScheme::Multinomial,
                    seed,
                )?)
            }
            _ => None,
        };
        let hpj_a = || {
            hpj.as_ref()
                .map(|b| b[a])
                .expect("HPJ computed for HPJ options")
        };
        let mut out = Vec::with_capacity(cfg.options.len());
        for &opt in &cfg.options {
            let (est, ci): (f64, Interval) = match opt {
                InferenceOption::FeCcm => {
                    let se = ccm_from_moments(&full, &fe, &a_hat, None)?.se(a)?;
                    (fe[a], normal_ci(fe[a], se, cfg.level)?)
                }
                InferenceOption::Hk => {
                    let est = hk_correct(fe[0], self.t);
                    let se = hk_standard_error(fe[0], self.n, self.t);
                    (est, normal_ci(est, se, cfg.level)?)
                }
                InferenceOption::HpjCcm => {
                    (hpj_a(), normal_ci(hpj_a(), hpj_se.unwrap(), cfg.level)?)
                }
                InferenceOption::HpjFeb | InferenceOption::HpjHpjb => {
                    let (fe_run, hpj_run) = boot.as_ref().expect("bootstrap computed");
                    let run = if opt == InferenceOption::HpjFeb {
                        fe_run
                    } else {
                        hpj_run
                    };
                    let center = hpj.as_ref().unwrap();
                    (hpj_a(), percentile_ci(run, center, a, cfg.level)?)
                }
                InferenceOption::HpjHpjpb => {
                    let (_, hpj_run) = boot.as_ref().expect("bootstrap computed");
                    let ci = pivotal_interval(
                        hpj_a(),
                        hpj_se.unwrap(),
                        &hpj_run.sorted_t_stats(a)?,
                        cfg.level,
                    )?;
                    (hpj_a(), ci)
                }
            };
            let se = ci.width() / (2.0 * self.z);
            out.push((est, se, ci.contains(self.beta0)));
        }
        Ok(out)
    }

    fn run(&self) -> Result<CellResult> {
        let outcomes: Vec<Result<RepOutcome>> = (0..self.cfg.reps)
            .into_par_iter()
            .map(|r| self.replicate(r))
            .collect();
        let reps = outcomes.len();
        let ok: Vec<RepOutcome> = outcomes.into_iter().filter_map(Result::ok).collect();
        let failures = reps - ok.len();
        if failures * 100 > reps {
            return Err(Error::ExcessiveFailures {
                failed: failures,
                total: reps,
            });
        }
        let options = self
            .cfg
            .options
            .iter()
            .enumerate()
            .map(|(k, &option)| {
                let est: Vec<f64> = ok.iter().map(|o| o[k].0).collect();
                let se: Vec<f64> = ok.iter().map(|o| o[k].1).collect();
                let covered = ok.iter().filter(|o| o[k].2).count();
                let sd = sample_sd(&est);
                let mean_se = mean(&se);
                let sq: Vec<f64> = est.iter().map(|e| (e - self.beta0).powi(2)).collect();
                OptionSummary {
                    option,
                    estimator: option.estimator(),
                    mean_bias: mean(&est) - self.beta0,
                    sd,
                    rmse: mean(&sq).sqrt(),
                    mean_se,
                    se_ratio: (sd > 0.0).then(|| mean_se / sd),
                    coverage: covered as f64 / ok.len() as f64,
                }
            })
            .collect();
        Ok(CellResult {
            n: self.n,
            t: self.t,
            reps,
            failures,
            beta0: self.beta0,
            options,
        })
    }
}

/// Runs every cell of the grid on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<McResult> {
    cfg.validate()?;
    let beta0 = cfg.pseudo_true()?.beta0[cfg.coordinate];
    run_experiment_scored(cfg, beta0)
}

/// As [`run_experiment`], scoring against a given pseudo-true value.
pub fn run_experiment_scored(cfg: &ExperimentConfig, beta0: f64) -> Result<McResult> {
    cfg.validate()?;
    let fit = cfg.fit();
    let z = two_sided_z(cfg.level)?;
    let cells = cfg
        .grid
        .iter()
        .enumerate()
        .map(|(cell, &(n, t))| {
            CellPlan {
                cfg,
                fit: fit.clone(),
                beta0,
                cell,
                n,
                t,
                z,
            }
            .run()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McResult { cells })
}

/// Runs on a dedicated pool with `threads` workers; results do not depend on `threads`.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<McResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub t: usize,
    pub method: Method,
    pub mean_bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

/// Bias and RMSE of FE and HPJ at fixed `n` across the `T` values, two rows per `T`.
pub fn sweep_t(
    dgp: &DgpSpec,
    fit: Option<LagSpec>,
    n: usize,
    t_values: &[usize],
    reps: usize,
    master_seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut cfg = ExperimentConfig::new(
        *dgp,
        t_values.iter().map(|&t| (n, t)).collect(),
        reps,
        vec![InferenceOption::FeCcm, InferenceOption::HpjCcm],
        master_seed,
    );
    cfg.fit = fit;
    let res = run_experiment(&cfg)?;
    Ok(res
        .cells
        .iter()
        .flat_map(|c| {
            c.options.iter().map(move |o| SweepRow {
                n: c.n,
                t: c.t,
                method: o.estimator,
                mean_bias: o.mean_bias,
                sd: o.sd,
                rmse: o.rmse,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

const CSV_HEADER: &str =
    "n,T,reps,failures,beta0,option,estimator,mean_bias,sd,rmse,mean_se,se_ratio,coverage";

/// Renders a result; CSV output parses back to the identical result.
pub fn emit_report(res: &McResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for c in &res.cells {
                for o in &c.options {
                    let ratio = o.se_ratio.map(|r| r.to_string()).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        c.n,
                        c.t,
                        c.reps,
                        c.failures,
                        c.beta0,
                        o.option,
                        o.estimator.label(),
                        o.mean_bias,
                        o.sd,
                        o.rmse,
                        o.mean_se,
                        ratio,
                        o.coverage
                    );
                }
            }
            out
        }
        ReportFormat::Markdown => {
            // Option columns in first-seen order.
            let mut options: Vec<InferenceOption> = Vec::new();
            for o in res.cells.iter().flat_map(|c| &c.options) {
                if !options.contains(&o.option) {
                    options.push(o.option);
                }
            }
            let mut out = String::from("| n | T |");
            for o in &options {
                let _ = write!(out, " {o} |");
            }
            out.push_str("\n|---:|---:|");
            out.push_str(&":---|".repeat(options.len()));
            out.push('\n');
            for c in &res.cells {
                let _ = write!(out, "| {} | {} |", c.n, c.t);
                for &o in &options {
                    match c.option(o) {
                        Some(s) => {
                            let ratio = s
                                .se_ratio
                                .map(|r| format!("{r:.2}"))
                                .unwrap_or_else(|| "-".into());
                            let _ = write!(
                                out,
                                " {:.4} ({:.4}) [{ratio}] {:.4} |",
                                s.mean_bias, s.sd, s.coverage
                            );
                        }
                        None => out.push_str(" |"),
                    }
                }
                out.push('\n');
            }
            out.push_str("\nEach entry: bias (SD) [mean SE / SD] coverage.\n");
            out
        }
    }
}

/// Parses the CSV produced by [`emit_report`].
pub fn parse_report_csv(text: &str) -> Result<McResult> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Csv("unexpected report header".into())),
    }
    let mut cells: Vec<CellResult> = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::Csv(format!(
                "expected 13 fields, got {}: {line}",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Csv(format!("bad number {s:?}")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Csv(format!("bad count {s:?}")))
        };
        let (n, t, reps, failures, beta0) =
            (int(f[0])?, int(f[1])?, int(f[2])?, int(f[3])?, num(f[4])?);
        let option: InferenceOption = f[5].parse()?;
        let estimator = match f[6] {
            "FE" => Method::Fe,
            "HPJ" => Method::Hpj,
            "HK" => Method::Hk,
            other => return Err(Error::Csv(format!("unknown estimator {other:?}"))),
        };
        let summary = OptionSummary {
            option,
            estimator,
            mean_bias: num(f[7])?,
            sd: num(f[8])?,
            rmse: num(f[9])?,
            mean_se: num(f[10])?,
            se_ratio: if f[11].is_empty() {
                None
            } else {
                Some(num(f[11])?)
            },
            coverage: num(f[12])?,
        };
        match cells.last_mut() {
            Some(c) if c.n == n && c.t == t => c.options.push(summary),
            _ => cells.push(CellResult {
                n,
                t,
                reps,
                failures,
                beta0,
                options: vec![summary],
            }),
        }
    }
    Ok(McResult { cells })
}

/// CSV of sweep rows.
pub fn emit_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n,T,method,mean_bias,sd,rmse\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n,
            r.t,
            r.method.label(),
            r.mean_bias,
            r.sd,
            r.rmse
        );
    }
    out
}

/// Estimates of one replication, exposed for diagnostics: `(FE, HPJ)` on the fitted design.
pub fn replicate_estimates(
    cfg: &ExperimentConfig,
    cell: usize,
    r: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (n, t) = *cfg
        .grid
        .get(cell)
        .ok_or_else(|| Error::InvalidArgument(format!("cell {cell} out of range")))?;
    let key = [domain::REPLICATION, cfg.master_seed, cell as u64, r as u64];
    let raw = simulate_panel(&cfg.dgp, n, t, derive_key(&key))?;
    let design = build_lagged_design(&raw.dataset, &cfg.fit())?;
    let m = HpjMoments::from_panel(&design)?;
    let (fe, _, _) = fe_from_moments(&m.full, None, "full panel")?;
    let (hpj, _, _) = hpj_from_moments(&m, None)?;
    Ok((fe, hpj))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(options: Vec<InferenceOption>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(DgpSpec::ar1(0.5), vec![(20, 8)], 6, options, 3);
        cfg.bootstrap_b = 100;
        cfg
    }

    #[test]
    fn option_labels_round_trip() {
        for o in InferenceOption::ALL {
            assert_eq!(o.label().parse::<InferenceOption>().unwrap(), o);
            let json = serde_json::to_string(&o).unwrap();
            assert_eq!(json, format!("\"{}\"", o.label()));
        }
    }

    #[test]
    fn single_replication_bias_is_estimate_minus_truth() {
        let mut cfg = small(vec![InferenceOption::FeCcm]);
        cfg.reps = 1;
        let res = run_experiment(&cfg).unwrap();
        let (fe, _) = replicate_estimates(&cfg, 0, 0).unwrap();
        let cell = &res.cells[0];
        assert_eq!(
            cell.option(InferenceOption::FeCcm).unwrap().mean_bias,
            fe[0] - 0.5
        );
        assert_eq!(cell.option(InferenceOption::FeCcm).unwrap().sd, 0.0);
        assert_eq!(cell.option(InferenceOption::FeCcm).unwrap().se_ratio, None);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small(vec![]);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.options = vec![InferenceOption::Hk];
        cfg.fit = Some("y:1,y:2".parse().unwrap());
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.fit = None;
        cfg.level = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::BadLevel(_))));
        cfg.level = 0.95;
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"dgp":"ar2:0.4,0.4","grid":[[100,24]],"reps":10,"options":["HPJ-CCM","HPJ-HPJPB"],"master_seed":7}"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.bootstrap_b, 1000);
        assert_eq!(cfg.level, 0.95);
        assert_eq!(cfg.fit(), LagSpec::ar1());
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn csv_report_round_trips() {
        let res = run_experiment(&small(InferenceOption::ALL.to_vec())).unwrap();
        let csv = emit_report(&res, ReportFormat::Csv);
        assert_eq!(parse_report_csv(&csv).unwrap(), res);
        let md = emit_report(&res, ReportFormat::Markdown);
        let header = md.lines().next().unwrap();
        assert_eq!(
            header,
            "| n | T | FE-CCM | HK | HPJ-CCM | HPJ-FEB | HPJ-HPJB | HPJ-HPJPB |"
        );
        assert_eq!(md.lines().filter(|l| l.starts_with("| 20 ")).count(), 1);
    }
}
