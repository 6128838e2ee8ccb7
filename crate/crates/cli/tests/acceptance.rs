//! Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//!
//! Run with `cargo test -p fepanel-cli --test acceptance -- --nocapture`.
//! Criterion 9 uses a real unemployment panel when `FEPANEL_UNEMPLOYMENT_CSV`
//! points at one (`id,t,y,x1` with the growth rate in `x1`); the design defaults
//! to `y:1,x1:1` and can be overridden with `FEPANEL_UNEMPLOYMENT_LAGS`.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use fepanel::bootstrap::{
    bootstrap_ccm, bootstrap_distribution, bootstrap_fe_and_hpj, percentile_ci, WeightDraw,
    WeightScheme,
};
use fepanel::dgp::{simulate_panel, DgpSpec};
use fepanel::estimators::{fe_from_moments, HpjMoments, PanelMoments};
use fepanel::inference::{ccm_from_moments, is_psd};
use fepanel::mc::{
    emit_report, run_experiment, ExperimentConfig, InferenceOption, McResult, ReportFormat,
};
use fepanel::oracle::{bias_terms, pseudo_true_closed_form, pseudo_true_simulated, OracleMethod};
use fepanel::panel::save_csv;
use fepanel::rng::stream;
use fepanel::{
    build_lagged_design, ccm_sigma, fe_fit, t_statistic, wald_statistic, LagSpec, PanelDataset,
};

use InferenceOption::{FeCcm, Hk, HpjCcm, HpjHpjpb};

/// Outcome of one criterion.
struct Check {
    ok: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            ok: true,
            details: Vec::new(),
        }
    }

    /// Records one sub-check.
    fn expect(&mut self, cond: bool, what: String) {
        self.ok &= cond;
        self.details
            .push(format!("{} {what}", if cond { "ok  " } else { "MISS" }));
    }

    fn note(&mut self, what: String) {
        self.details.push(format!("     {what}"));
    }

    /// `|value - target| <= tol`.
    fn near(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.expect(
            (value - target).abs() <= tol,
            format!("{name} = {value:.6} (target {target} +/- {tol})"),
        );
    }
}

fn run_cfg(
    dgp: DgpSpec,
    grid: Vec<(usize, usize)>,
    reps: usize,
    options: Vec<InferenceOption>,
    seed: u64,
) -> (McResult, Duration) {
    let cfg = ExperimentConfig::new(dgp, grid, reps, options, seed);
    let start = Instant::now();
    let res = run_experiment(&cfg).expect("experiment runs");
    (res, start.elapsed())
}

fn summary(res: &McResult, n: usize, t: usize, o: InferenceOption) -> &fepanel::mc::OptionSummary {
    res.cell(n, t)
        .and_then(|c| c.option(o))
        .expect("cell and option present")
}

fn criterion_1() -> Check {
    let mut c = Check::new();
    let start = Instant::now();
    let ar2 = pseudo_true_closed_form(&DgpSpec::ar2(0.4, 0.4))
        .unwrap()
        .beta0[0];
    let ar2n = pseudo_true_closed_form(&DgpSpec::ar2(-0.4, -0.4))
        .unwrap()
        .beta0[0];
    // Yule-Walker first autocorrelation of an AR(2).
    let yw = |p1: f64, p2: f64| p1 / (1.0 - p2);
    c.near("AR2(0.4,0.4) beta0 vs Yule-Walker", ar2, yw(0.4, 0.4), 1e-6);
    c.near(
        "AR2(-0.4,-0.4) beta0 vs Yule-Walker",
        ar2n,
        yw(-0.4, -0.4),
        1e-6,
    );
    c.expect(
        format!("{ar2:.2}") == "0.67",
        format!("AR2(0.4,0.4) rounds to 0.67 ({ar2:.2})"),
    );
    // Two-decimal truncation gives -0.28; rounding gives -0.29.
    c.expect(
        (ar2n * 100.0).trunc() / 100.0 == -0.28,
        format!("AR2(-0.4,-0.4) truncates to -0.28 ({ar2n:.6})"),
    );
    let rc = pseudo_true_closed_form(&DgpSpec::random_coef_ar1(0.0, 0.9))
        .unwrap()
        .beta0[0];
    c.near("random-coefficient beta0 (integrated)", rc, 0.56404, 1e-4);
    c.note(format!(
        "closed forms and integration took {:.2?}",
        start.elapsed()
    ));

    let sim_start = Instant::now();
    let expar = DgpSpec::expar(0.8, 1.0);
    let e = pseudo_true_simulated(&expar, &LagSpec::ar1(), 1_000_000, 64, 11).unwrap();
    c.near("ExpAR beta0 (simulated)", e.beta0[0], 0.63, 0.005);
    let ar2x = DgpSpec::ar2x(0.4, 0.4, 0.5, 0.5);
    let x = pseudo_true_simulated(&ar2x, &ar2x.default_fit(), 1_000_000, 64, 12).unwrap();
    c.near(
        "AR2X autoregressive coordinate (simulated)",
        x.beta0[0],
        0.73,
        0.005,
    );
    let exact = pseudo_true_closed_form(&ar2x).unwrap().beta0;
    let se = match x.provenance {
        fepanel::oracle::Provenance::Simulated { ref mc_se, .. } => mc_se[0],
        _ => f64::NAN,
    };
    c.note(format!(
        "AR2X exact projection {:.6}; simulated {:.6} differs by {:.1} MC se",
        exact[0],
        x.beta0[0],
        (x.beta0[0] - exact[0]).abs() / se
    ));
    let elapsed = sim_start.elapsed();
    c.expect(
        elapsed <= Duration::from_secs(60),
        format!("simulated oracles took {elapsed:.2?} (budget ~1 min)"),
    );
    c
}

fn criterion_2() -> Check {
    let mut c = Check::new();
    let opts = vec![FeCcm, Hk, HpjCcm, HpjHpjpb];
    let (res, time) = run_cfg(DgpSpec::ar1(0.8), vec![(200, 24)], 2000, opts.clone(), 2001);
    c.near(
        "FE bias (200,24)",
        summary(&res, 200, 24, FeCcm).mean_bias,
        -0.0858,
        0.004,
    );
    c.near(
        "HPJ bias (200,24)",
        summary(&res, 200, 24, HpjCcm).mean_bias,
        0.0088,
        0.004,
    );
    c.near(
        "HK bias (200,24)",
        summary(&res, 200, 24, Hk).mean_bias,
        -0.0144,
        0.004,
    );
    c.near(
        "HPJ-HPJPB coverage (200,24), B=1000",
        summary(&res, 200, 24, HpjHpjpb).coverage,
        0.9025,
        0.02,
    );
    c.note(format!(
        "2000 replications took {time:.2?} on {} worker(s)",
        rayon::current_num_threads()
    ));

    let (small, time) = run_cfg(DgpSpec::ar1(0.8), vec![(200, 24)], 500, opts, 2002);
    c.near(
        "reduced run: FE bias",
        summary(&small, 200, 24, FeCcm).mean_bias,
        -0.0858,
        0.01,
    );
    c.near(
        "reduced run: HPJ bias",
        summary(&small, 200, 24, HpjCcm).mean_bias,
        0.0088,
        0.01,
    );
    c.near(
        "reduced run: HK bias",
        summary(&small, 200, 24, Hk).mean_bias,
        -0.0144,
        0.01,
    );
    c.near(
        "reduced run: HPJ-HPJPB coverage",
        summary(&small, 200, 24, HpjHpjpb).coverage,
        0.9025,
        0.04,
    );
    c.expect(
        time <= Duration::from_secs(180),
        format!("reduced 500-rep run took {time:.2?} (budget 3 min)"),
    );
    c
}

fn criterion_3() -> Check {
    let mut c = Check::new();
    let (res, time) = run_cfg(
        DgpSpec::ar2(0.4, 0.4),
        vec![(100, 24)],
        2000,
        vec![FeCcm, HpjCcm, HpjHpjpb],
        3001,
    );
    c.near(
        "FE bias (100,24)",
        summary(&res, 100, 24, FeCcm).mean_bias,
        -0.1839,
        0.005,
    );
    c.near(
        "HPJ bias (100,24)",
        summary(&res, 100, 24, HpjCcm).mean_bias,
        -0.0152,
        0.005,
    );
    let cov = summary(&res, 100, 24, FeCcm).coverage;
    c.expect(cov <= 0.01, format!("FE-CCM coverage = {cov:.4} (<= 0.01)"));
    c.near(
        "HPJ-HPJPB coverage (100,24)",
        summary(&res, 100, 24, HpjHpjpb).coverage,
        0.9125,
        0.025,
    );
    c.note(format!("2000 replications took {time:.2?}"));
    c
}

fn criterion_4() -> Check {
    let mut c = Check::new();
    let rc = DgpSpec::random_coef_ar1(0.0, 0.9);
    let (res, _) = run_cfg(
        rc,
        vec![(200, 24)],
        2000,
        vec![FeCcm, HpjCcm, HpjHpjpb],
        4001,
    );
    c.near(
        "HPJ bias (200,24)",
        summary(&res, 200, 24, HpjCcm).mean_bias,
        -0.0089,
        0.005,
    );
    c.near(
        "HPJ-HPJPB coverage (200,24)",
        summary(&res, 200, 24, HpjHpjpb).coverage,
        0.9310,
        0.025,
    );

    let (rc12, _) = run_cfg(rc, vec![(200, 12)], 2000, vec![FeCcm], 4002);
    let rc_ratio = summary(&res, 200, 24, FeCcm).sd / summary(&rc12, 200, 12, FeCcm).sd;
    c.expect(
        rc_ratio >= 0.85,
        format!("random coefficients: SD(FE) T=24 / T=12 = {rc_ratio:.3} (>= 0.85)"),
    );
    let (ar1, _) = run_cfg(
        DgpSpec::ar1(0.8),
        vec![(200, 12), (200, 24)],
        2000,
        vec![FeCcm],
        4003,
    );
    let ar1_ratio = summary(&ar1, 200, 24, FeCcm).sd / summary(&ar1, 200, 12, FeCcm).sd;
    c.expect(
        ar1_ratio <= 0.70,
        format!("AR(1): SD(FE) T=24 / T=12 = {ar1_ratio:.3} (<= 0.70)"),
    );
    c
}

fn criterion_5() -> Check {
    let mut c = Check::new();
    let spec = DgpSpec::ar1(0.8);
    let reps = 500;
    let mut residuals = Vec::new();
    for (k, t) in [12usize, 24, 48].into_iter().enumerate() {
        let (res, _) = run_cfg(spec, vec![(2000, t)], reps, vec![FeCcm], 5000 + k as u64);
        let s = summary(&res, 2000, t, FeCcm);
        let mc_se = s.sd / (reps as f64).sqrt();
        let terms = bias_terms(&spec, &LagSpec::ar1(), t, OracleMethod::ClosedForm).unwrap();
        let two_term = terms.two_term_bias().unwrap()[0];
        let series = terms.series_bias().unwrap()[0];
        let dev = s.mean_bias - two_term;
        c.expect(
            dev.abs() < 3.0 * mc_se,
            format!(
                "T={t}: mean FE - 0.8 = {:.5}, two-term expansion {two_term:.5}, gap {dev:.5} ({:.1} MC se, se {mc_se:.5})",
                s.mean_bias,
                dev.abs() / mc_se
            ),
        );
        c.note(format!(
            "T={t}: full resummed bias -(A - D_T/T)^-1 B_T/T = {series:.5}, gap {:.5} ({:.1} MC se)",
            s.mean_bias - series,
            (s.mean_bias - series).abs() / mc_se
        ));
        residuals.push(dev.abs());
    }
    let shrinking = residuals.windows(2).all(|w| w[1] < w[0]);
    c.expect(
        shrinking,
        format!("residual gaps shrink with T: {residuals:.5?}"),
    );
    c
}

fn criterion_6() -> Check {
    let mut c = Check::new();
    let spec = DgpSpec::ar1(0.8);
    let fit = LagSpec::ar1();
    let panels = 20;
    let mut worst: f64 = 0.0;
    let mut fe_sum = 0.0;
    for k in 0..panels {
        let raw = simulate_panel(&spec, 200, 12, 6000 + k).unwrap();
        let ds = build_lagged_design(&raw.dataset, &fit).unwrap();
        fe_sum += fe_fit(&ds).unwrap().beta_hat[0] - 0.8;
        let run = bootstrap_distribution(
            &ds,
            fepanel::Method::Fe,
            2000,
            WeightScheme::Multinomial,
            6100 + k,
        )
        .unwrap();
        let mean_dev = run.deviations.column(0).mean();
        worst = worst.max(mean_dev.abs());
    }
    let fe_bias = fe_sum / panels as f64;
    c.expect(
        worst < 0.01,
        format!("max over {panels} panels of |mean bootstrap deviation| = {worst:.5} (< 0.01)"),
    );
    c.expect(
        fe_bias.abs() > 0.17,
        format!("FE bias over the same panels = {fe_bias:.4} (|.| > 0.17)"),
    );
    c
}

fn random_panel(rng: &mut impl Rng, n: usize, t: usize, p: usize) -> PanelDataset {
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    let mut x = vec![0.0; n * t * p];
    for v in x.iter_mut() {
        *v = draw();
    }
    let mut y = vec![0.0; n * t];
    for (i, v) in y.iter_mut().enumerate() {
        *v = x[i * p] * 0.5 + draw();
    }
    PanelDataset::from_fn(
        n,
        t,
        p,
        |i, s| y[i * t + s],
        |i, s, a| x[(i * t + s) * p + a],
    )
    .unwrap()
}

fn criterion_7() -> Check {
    let mut c = Check::new();

    // Location invariance. On dyadic data every operation is exact, so the
    // estimates must agree bit for bit.
    let mut rng = stream(&[7, 1]);
    let mut exact = true;
    let mut worst_float: f64 = 0.0;
    for _ in 0..200 {
        let (n, t) = (rng.random_range(2..20), 8);
        let ds = PanelDataset::from_fn(
            n,
            t,
            2,
            |i, s| ((i * 7 + s * 3) % 11) as f64 - 5.0 + ((i + s * s) % 5) as f64 * 0.5,
            |i, s, a| ((i * 5 + s * (a + 2) + s * s) % 9) as f64 - 4.0,
        )
        .unwrap();
        let shifts: Vec<f64> = (0..n).map(|_| rng.random_range(-8..=8) as f64).collect();
        let shifted = ds
            .map_y(|i, _, y| y + shifts[i])
            .map_x(|i, _, a, x| x + shifts[i] * (a as f64 + 1.0));
        match (fe_fit(&ds), fe_fit(&shifted)) {
            (Ok(a), Ok(b)) => exact &= a.beta_hat == b.beta_hat,
            (Err(_), Err(_)) => {}
            _ => exact = false,
        }
        let fl = random_panel(&mut rng, n, 6, 2);
        let offsets: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let moved = fl.map_y(|i, _, y| y + offsets[i]);
        let (a, b) = (
            fe_fit(&fl).unwrap().beta_hat,
            fe_fit(&moved).unwrap().beta_hat,
        );
        worst_float = worst_float.max((a - b).amax());
    }
    c.expect(
        exact,
        "FE location invariance, bit-exact on exactly representable panels".into(),
    );
    c.note(format!(
        "largest change on general floating-point panels with offsets up to 100: {worst_float:.2e}"
    ));

    // Wald equals t squared for one restriction; Sigma is PSD.
    let mut worst_wald: f64 = 0.0;
    let mut psd = true;
    for k in 0..1000 {
        let n = rng.random_range(2..40);
        let t = rng.random_range(2..12);
        let p = rng.random_range(1..4);
        let ds = random_panel(&mut rng, n, t, p);
        let fit = match fe_fit(&ds) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let center = if k % 2 == 0 {
            fit.beta_hat.clone()
        } else {
            DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0))
        };
        let ccm = ccm_sigma(&ds, &center, &fit.a_hat).unwrap();
        psd &= is_psd(&ccm.sigma_hat);
        let a = rng.random_range(0..p);
        let r0 = rng.random_range(-1.0..1.0);
        let mut restriction = DMatrix::zeros(1, p);
        restriction[(0, a)] = 1.0;
        if let (Ok(w), Ok(tstat)) = (
            wald_statistic(
                &fit.beta_hat,
                &ccm,
                &restriction,
                &DVector::from_element(1, r0),
            ),
            t_statistic(&fit.beta_hat, &ccm, a, r0),
        ) {
            worst_wald = worst_wald.max((w - tstat * tstat).abs() / (1.0 + w.abs()));
        }
    }
    c.expect(
        worst_wald <= 1e-10,
        format!("Wald = t^2 for q = 1, worst relative gap {worst_wald:.2e} (<= 1e-10)"),
    );
    c.expect(psd, "clustered Sigma PSD on 1000 random panels".into());

    // Unit weights reproduce the original-sample quantities.
    let raw = simulate_panel(&DgpSpec::ar1(0.6), 60, 10, 77).unwrap();
    let ds = build_lagged_design(&raw.dataset, &LagSpec::ar1()).unwrap();
    let hm = HpjMoments::from_panel(&ds).unwrap();
    let (fe_run, hpj_run) = bootstrap_fe_and_hpj(&hm, 100, WeightScheme::Unit, 1).unwrap();
    let zeros = fe_run
        .deviations
        .iter()
        .chain(hpj_run.deviations.iter())
        .all(|&d| d == 0.0);
    let fit = fe_fit(&ds).unwrap();
    let ones = WeightDraw {
        w: vec![1.0; ds.n()],
        scheme: WeightScheme::Unit,
    };
    let boot = bootstrap_ccm(&ds, &ones, &fit.beta_hat).unwrap();
    let plain = ccm_sigma(&ds, &fit.beta_hat, &fit.a_hat).unwrap();
    let pm = PanelMoments::from_panel(&ds).unwrap();
    let weighted = fe_from_moments(&pm, Some(&ones.w), "unit").unwrap();
    let unweighted = fe_from_moments(&pm, None, "plain").unwrap();
    let via_moments = ccm_from_moments(&pm, &fit.beta_hat, &fit.a_hat, Some(&ones.w)).unwrap();
    c.expect(
        zeros
            && boot.sigma_hat == plain.sigma_hat
            && boot.avar == plain.avar
            && weighted == unweighted
            && via_moments == plain,
        "unit-weight bootstrap reproduces FE, HPJ and the clustered covariance bit for bit".into(),
    );

    // Thread-count independence.
    let pools: Vec<rayon::ThreadPool> = [1, 4, 16]
        .iter()
        .map(|&k| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .unwrap()
        })
        .collect();
    let mut cfg = ExperimentConfig::new(
        DgpSpec::ar1(0.8),
        vec![(40, 12)],
        24,
        InferenceOption::ALL.to_vec(),
        99,
    );
    cfg.bootstrap_b = 200;
    let outputs: Vec<(String, fepanel::BootstrapRun)> = pools
        .iter()
        .map(|pool| {
            pool.install(|| {
                let res = run_experiment(&cfg).unwrap();
                let (_, run) =
                    bootstrap_fe_and_hpj(&hm, 500, WeightScheme::Multinomial, 5).unwrap();
                (emit_report(&res, ReportFormat::Csv), run)
            })
        })
        .collect();
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    c.expect(
        same,
        "Monte Carlo report and bootstrap draws bit-identical on 1, 4 and 16 workers".into(),
    );

    // Percentile intervals nest as the level grows.
    let center = hpj_run_center(&hm);
    let (_, run) = bootstrap_fe_and_hpj(&hm, 1000, WeightScheme::Multinomial, 8).unwrap();
    let levels: Vec<f64> = (50..100).map(|l| l as f64 / 100.0).collect();
    let intervals: Vec<_> = levels
        .iter()
        .map(|&l| percentile_ci(&run, &center, 0, l).unwrap())
        .collect();
    let nested = intervals.windows(2).all(|w| w[0].is_subset_of(&w[1]));
    c.expect(
        nested,
        "percentile intervals nested across levels 0.50..0.99".into(),
    );
    c
}

fn hpj_run_center(hm: &HpjMoments) -> DVector<f64> {
    fepanel::estimators::hpj_from_moments(hm, None).unwrap().0
}

fn criterion_8() -> Check {
    let mut c = Check::new();
    let ts: Vec<usize> = (12..=48).step_by(4).collect();
    let rows = fepanel::mc::sweep_t(&DgpSpec::ar2(0.4, 0.4), None, 50, &ts, 500, 8001).unwrap();
    let bias = |m: fepanel::Method| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.method == m)
            .map(|r| r.mean_bias.abs())
            .collect()
    };
    let (fe, hpj) = (bias(fepanel::Method::Fe), bias(fepanel::Method::Hpj));
    let dominated = fe.iter().zip(&hpj).all(|(f, h)| h < f);
    c.expect(
        dominated,
        format!("|HPJ bias| < |FE bias| at every T in {ts:?}"),
    );
    let violations = |v: &[f64]| v.windows(2).filter(|w| w[1] > w[0]).count();
    c.expect(
        violations(&fe) <= 1,
        format!(
            "|FE bias| decreasing, {} violation(s): {fe:.4?}",
            violations(&fe)
        ),
    );
    c.expect(
        violations(&hpj) <= 1,
        format!(
            "|HPJ bias| decreasing, {} violation(s): {hpj:.4?}",
            violations(&hpj)
        ),
    );
    let signed: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == fepanel::Method::Hpj)
        .map(|r| r.mean_bias)
        .collect();
    c.note(format!("signed HPJ bias: {signed:.4?}"));
    // Large-n limit of HPJ at even T: 2 s(T) - s(T/2), with s the resummed FE bias.
    let s = |t: usize| {
        bias_terms(
            &DgpSpec::ar2(0.4, 0.4),
            &LagSpec::ar1(),
            t,
            OracleMethod::ClosedForm,
        )
        .unwrap()
        .series_bias()
        .unwrap()[0]
    };
    let limit: Vec<f64> = ts.iter().map(|&t| 2.0 * s(t) - s(t / 2)).collect();
    c.note(format!("large-n HPJ bias from the oracle: {limit:.4?}"));
    c
}

fn fepanel_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fepanel"))
}

fn run_estimate(input: &std::path::Path, lags: &str) -> (bool, Vec<u8>) {
    let out = fepanel_bin()
        .args(["estimate", "--input"])
        .arg(input)
        .args([
            "--lags",
            lags,
            "--methods",
            "fe,hpj",
            "--inference",
            "ccm,pivotal-boot",
            "--B",
            "1000",
            "--seed",
            "7",
        ])
        .output()
        .expect("binary runs");
    (out.status.success(), out.stdout)
}

fn estimates(json: &serde_json::Value, option: &str) -> Vec<f64> {
    json["results"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["option"] == option)
        .map(|r| r["estimate"].as_f64().unwrap())
        .collect()
}

fn criterion_9() -> Check {
    let mut c = Check::new();
    let lags = std::env::var("FEPANEL_UNEMPLOYMENT_LAGS").unwrap_or_else(|_| "y:1,x1:1".into());
    match std::env::var_os("FEPANEL_UNEMPLOYMENT_CSV") {
        Some(path) => {
            let (ok, stdout) = run_estimate(path.as_ref(), &lags);
            c.expect(
                ok,
                format!("estimate succeeds on the supplied panel with --lags {lags}"),
            );
            if ok {
                let json: serde_json::Value = serde_json::from_slice(&stdout).unwrap();
                let fe = estimates(&json, "FE-CCM");
                let hpj = estimates(&json, "HPJ-CCM");
                c.near("gamma FE", fe[0], 0.790, 0.002);
                c.near("gamma HPJ", hpj[0], 0.830, 0.002);
                c.near("beta FE", fe[1], -0.088, 0.002);
                c.near("beta HPJ", hpj[1], -0.079, 0.002);
            }
        }
        None => {
            c.note("FEPANEL_UNEMPLOYMENT_CSV not set; checking schema and determinism on a synthetic panel".into());
            let dir = tempfile::tempdir().unwrap();
            let input = dir.path().join("panel.csv");
            let spec: DgpSpec = "ar2x:0.4,0.4,0.5,0.5".parse().unwrap();
            save_csv(&simulate_panel(&spec, 51, 35, 9).unwrap().dataset, &input).unwrap();
            let (ok1, first) = run_estimate(&input, &lags);
            let (ok2, second) = run_estimate(&input, &lags);
            c.expect(ok1 && ok2, "estimate succeeds".into());
            c.expect(
                first == second,
                "repeated invocations are byte-identical".into(),
            );
            let json: serde_json::Value = serde_json::from_slice(&first).unwrap_or_default();
            let results = json["results"].as_array().cloned().unwrap_or_default();
            let keys = [
                "option",
                "coordinate",
                "estimate",
                "se",
                "ci90",
                "ci95",
                "B",
                "seed",
            ];
            let schema = !results.is_empty()
                && results
                    .iter()
                    .all(|r| keys.iter().all(|k| r.get(k).is_some()));
            c.expect(schema, format!("every result carries {keys:?}"));
            let options: Vec<&str> = results
                .iter()
                .filter_map(|r| r["option"].as_str())
                .collect();
            c.expect(
                ["FE-CCM", "HPJ-CCM", "HPJ-HPJPB"]
                    .iter()
                    .all(|o| options.contains(o)),
                "FE-CCM, HPJ-CCM and HPJ-HPJPB reported".into(),
            );
        }
    }
    c
}

#[test]
fn acceptance_criteria() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 9] = [
        ("1 pseudo-true oracles", criterion_1),
        ("2 AR(1) design at (200,24)", criterion_2),
        ("3 AR(2) fitted as AR(1) at (100,24)", criterion_3),
        (
            "4 random-coefficient design and slow-rate signature",
            criterion_4,
        ),
        ("5 two-term bias expansion at n=2000", criterion_5),
        ("6 bootstrap centering", criterion_6),
        ("7 invariant suite", criterion_7),
        ("8 bias sweep over T at n=50", criterion_8),
        ("9 estimate command contract", criterion_9),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let check = f();
        println!(
            "{} criterion {name} ({:.1?})",
            if check.ok { "PASS" } else { "FAIL" },
            start.elapsed()
        );
        for d in &check.details {
            println!("    {d}");
        }
        if !check.ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
