//! Cross-section bootstrap by reweighting per-individual moments.
//!
//! A resample that draws individual `i` `w_i` times contributes `w_i` copies
//! of that individual's within moments. Individual means of a repeated series
//! are unchanged, so every bootstrap estimate is a weighted aggregate of the
//! moments computed once on the original panel.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fe_from_moments, hpj_from_moments, HpjMoments, Method, PanelMoments};
use crate::inference::{ccm_from_moments, CcmEstimate, Interval};
use crate::numeric::{check_level, empirical_quantile};
use crate::panel::PanelDataset;
use crate::rng::{derive_key, domain, stream};

/// Smallest replicate count accepted by the quantile-based intervals.
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    /// Multinomial(n; 1/n, ..., 1/n) counts: the classical resample.
    Multinomial,
    /// Independent Gamma weights with mean 1 and the given variance.
    IidWeights { variance: f64 },
    /// All weights equal to one; reproduces the original estimate.
    Unit,
}

impl WeightScheme {
    fn validate(&self) -> Result<()> {
        match *self {
            WeightScheme::IidWeights { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(Error::InvalidArgument(format!(
                    "weight variance must be positive, got {variance}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightDraw {
    pub w: Vec<f64>,
    pub scheme: WeightScheme,
}

pub fn draw_weights<R: Rng + ?Sized>(
    n: usize,
    scheme: WeightScheme,
    rng: &mut R,
) -> Result<WeightDraw> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 individuals, got {n}"
        )));
    }
    scheme.validate()?;
    let w = match scheme {
        WeightScheme::Multinomial => {
            let mut w = vec![0.0; n];
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1.0;
            }
            w
        }
        WeightScheme::IidWeights { variance } => {
            let gamma = Gamma::new(1.0 / variance, variance)
                .map_err(|e| Error::InvalidArgument(format!("weight distribution: {e}")))?;
            (0..n).map(|_| gamma.sample(rng)).collect()
        }
        WeightScheme::Unit => vec![1.0; n],
    };
    Ok(WeightDraw { w, scheme })
}

/// Stream identifier of bootstrap replicate `b`.
pub fn replicate_key(master_seed: u64, b: usize) -> u64 {
    derive_key(&[domain::BOOTSTRAP, master_seed, b as u64])
}

fn replicate_weights(
    n: usize,
    scheme: WeightScheme,
    master_seed: u64,
    b: usize,
) -> Result<WeightDraw> {
    let mut rng = stream(&[domain::BOOTSTRAP, master_seed, b as u64]);
    draw_weights(n, scheme, &mut rng)
}

/// `B` bootstrap deviations with their studentized counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRun {
    pub method: Method,
    pub scheme: WeightScheme,
    pub master_seed: u64,
    /// Replicates requested.
    pub requested: usize,
    /// One row per successful replicate: `beta* - beta_hat`.
    pub deviations: DMatrix<f64>,
    /// One row per successful replicate: `(beta* - beta_hat)^a / se*^a`.
    pub t_stats: DMatrix<f64>,
    /// Replicate index of each row.
    pub replicates: Vec<usize>,
    pub failures: usize,
    /// Whether deviations were divided by the weight standard deviation.
    pub rescaled: bool,
}

impl BootstrapRun {
    pub fn b(&self) -> usize {
        self.deviations.nrows()
    }

    /// Per-row stream identifiers; each replicate is reproducible from these alone.
    pub fn seeds(&self) -> Vec<u64> {
        self.replicates
            .iter()
            .map(|&b| replicate_key(self.master_seed, b))
            .collect()
    }

    fn sorted_column(m: &DMatrix<f64>, coord: usize) -> Result<Vec<f64>> {
        if coord >= m.ncols() {
            return Err(Error::InvalidArgument(format!(
                "coordinate {coord} out of range"
            )));
        }
        let mut v: Vec<f64> = m.column(coord).iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    pub fn sorted_deviations(&self, coord: usize) -> Result<Vec<f64>> {
        Self::sorted_column(&self.deviations, coord)
    }

    pub fn sorted_t_stats(&self, coord: usize) -> Result<Vec<f64>> {
        Self::sorted_column(&self.t_stats, coord)
    }
}

/// Original-sample quantities the replicates are compared against.
enum Target<'a> {
    Fe {
        moments: &'a PanelMoments,
        beta: DVector<f64>,
    },
    Hpj {
        moments: &'a HpjMoments,
        beta: DVector<f64>,
    },
}

struct Replicate {
    deviation: DVector<f64>,
    t_stat: DVector<f64>,
}

impl Target<'_> {
    fn method(&self) -> Method {
        match self {
            Target::Fe { .. } => Method::Fe,
            Target::Hpj { .. } => Method::Hpj,
        }
    }

    fn beta(&self) -> &DVector<f64> {
        match self {
            Target::Fe { beta, .. } | Target::Hpj { beta, .. } => beta,
        }
    }

    fn full(&self) -> &PanelMoments {
        match self {
            Target::Fe { moments, .. } => moments,
            Target::Hpj { moments, .. } => &moments.full,
        }
    }

    fn replicate(&self, w: &[f64]) -> Result<Replicate> {
        let (beta_star, a_star) = match self {
            Target::Fe { moments, .. } => {
                let (b, a, _) = fe_from_moments(moments, Some(w), "bootstrap replicate")?;
                (b, a)
            }
            Target::Hpj { moments, .. } => {
                let (b, a, _) = hpj_from_moments(moments, Some(w))?;
                (b, a)
            }
        };
        let ccm = ccm_from_moments(self.full(), &beta_star, &a_star, Some(w))?;
        let deviation = &beta_star - self.beta();
        let mut t_stat = DVector::zeros(deviation.len());
        for a in 0..deviation.len() {
            t_stat[a] = deviation[a] / ccm.se(a)?;
        }
        Ok(Replicate { deviation, t_stat })
    }
}

fn assemble(
    method: Method,
    scheme: WeightScheme,
    master_seed: u64,
    p: usize,
    results: Vec<Result<Replicate>>,
) -> Result<BootstrapRun> {
    let requested = results.len();
    let ok: Vec<(usize, Replicate)> = results
        .into_iter()
        .enumerate()
        .filter_map(|(b, r)| r.ok().map(|r| (b, r)))
        .collect();
    let failures = requested - ok.len();
    // More than 1% failed replicates would distort the quantiles.
    if failures * 100 > requested {
        return Err(Error::ExcessiveFailures {
            failed: failures,
            total: requested,
        });
    }
    let rows = ok.len();
    let deviations = DMatrix::from_fn(rows, p, |r, a| ok[r].1.deviation[a]);
    let t_stats = DMatrix::from_fn(rows, p, |r, a| ok[r].1.t_stat[a]);
    Ok(BootstrapRun {
        method,
        scheme,
        master_seed,
        requested,
        deviations,
        t_stats,
        replicates: ok.iter().map(|(b, _)| *b).collect(),
        failures,
        rescaled: false,
    })
}

fn run_targets(
    targets: &[Target<'_>],
    b: usize,
    scheme: WeightScheme,
    master_seed: u64,
) -> Result<Vec<BootstrapRun>> {
    scheme.validate()?;
    if b == 0 {
        return Err(Error::InvalidArgument(
            "bootstrap replicate count must be positive".into(),
        ));
    }
    let n = targets[0].full().n();
    let p = targets[0].full().p();
    let per_rep: Vec<Vec<Result<Replicate>>> = (0..b)
        .into_par_iter()
        .map(|rep| match replicate_weights(n, scheme, master_seed, rep) {
            Ok(draw) => targets.iter().map(|t| t.replicate(&draw.w)).collect(),
            Err(e) => targets
                .iter()
                .map(|_| Err(Error::InvalidArgument(e.to_string())))
                .collect(),
        })
        .collect();
    let mut columns: Vec<Vec<Result<Replicate>>> =
        targets.iter().map(|_| Vec::with_capacity(b)).collect();
    for row in per_rep {
        for (col, r) in columns.iter_mut().zip(row) {
            col.push(r);
        }
    }
    targets
        .iter()
        .zip(columns)
        .map(|(t, col)| assemble(t.method(), scheme, master_seed, p, col))
        .collect()
}

/// Bootstrap distribution of the FE or HPJ estimator around its original value.
pub fn bootstrap_distribution(
    ds: &PanelDataset,
    method: Method,
    b: usize,
    scheme: WeightScheme,
    master_seed: u64,
) -> Result<BootstrapRun> {
    match method {
        Method::Fe => {
            let moments = PanelMoments::from_panel(ds)?;
            bootstrap_fe_from_moments(&moments, b, scheme, master_seed)
        }
        Method::Hpj => {
            let moments = HpjMoments::from_panel(ds)?;
            let (beta, _, _) = hpj_from_moments(&moments, None)?;
            let mut runs = run_targets(
                &[Target::Hpj {
                    moments: &moments,
                    beta,
                }],
                b,
                scheme,
                master_seed,
            )?;
            Ok(runs.remove(0))
        }
        Method::Hk => Err(Error::NotApplicable(
            "the bootstrap supports FE and HPJ only".into(),
        )),
    }
}

pub fn bootstrap_fe_from_moments(
    moments: &PanelMoments,
    b: usize,
    scheme: WeightScheme,
    master_seed: u64,
) -> Result<BootstrapRun> {
    let (beta, _, _) = fe_from_moments(moments, None, "full panel")?;
    let mut runs = run_targets(&[Target::Fe { moments, beta }], b, scheme, master_seed)?;
    Ok(runs.remove(0))
}

/// FE and HPJ bootstrap distributions from the same weight draws.
pub fn bootstrap_fe_and_hpj(
    moments: &HpjMoments,
    b: usize,
    scheme: WeightScheme,
    master_seed: u64,
) -> Result<(BootstrapRun, BootstrapRun)> {
    let (fe, _, _) = fe_from_moments(&moments.full, None, "full panel")?;
    let (hpj, _, _) = hpj_from_moments(moments, None)?;
    let targets = [
        Target::Fe {
            moments: &moments.full,
            beta: fe,
        },
        Target::Hpj { moments, beta: hpj },
    ];
    let mut runs = run_targets(&targets, b, scheme, master_seed)?.into_iter();
    Ok((runs.next().unwrap(), runs.next().unwrap()))
}

/// Equal-tailed `[beta^a + q(alpha/2), beta^a + q(1 - alpha/2)]`.
pub fn percentile_ci(
    run: &BootstrapRun,
    center_beta: &DVector<f64>,
    coord: usize,
    level: f64,
) -> Result<Interval> {
    check_level(level)?;
    if run.b() < MIN_REPLICATES {
        return Err(Error::TooFewReplicates {
            got: run.b(),
            required: MIN_REPLICATES,
        });
    }
    if coord >= center_beta.len() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coord} out of range"
        )));
    }
    let sorted = run.sorted_deviations(coord)?;
    let alpha = 1.0 - level;
    Ok(Interval {
        lo: center_beta[coord] + empirical_quantile(&sorted, alpha / 2.0),
        hi: center_beta[coord] + empirical_quantile(&sorted, 1.0 - alpha / 2.0),
    })
}

/// `[beta - t*_(1-alpha/2) se, beta - t*_(alpha/2) se]` from sorted `t*` values.
pub fn pivotal_interval(beta_a: f64, se_a: f64, sorted_t: &[f64], level: f64) -> Result<Interval> {
    check_level(level)?;
    if sorted_t.len() < MIN_REPLICATES {
        return Err(Error::TooFewReplicates {
            got: sorted_t.len(),
            required: MIN_REPLICATES,
        });
    }
    let alpha = 1.0 - level;
    Ok(Interval {
        lo: beta_a - empirical_quantile(sorted_t, 1.0 - alpha / 2.0) * se_a,
        hi: beta_a - empirical_quantile(sorted_t, alpha / 2.0) * se_a,
    })
}

/// Bootstrap-t interval for coordinate `coord`, studentized by the clustered
/// covariance of each replicate.
pub fn pivotal_t_ci(
    ds: &PanelDataset,
    method: Method,
    b: usize,
    coord: usize,
    level: f64,
    master_seed: u64,
) -> Result<Interval> {
    check_level(level)?;
    if coord >= ds.p() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coord} out of range"
        )));
    }
    let (beta, a_hat, run) = match method {
        Method::Fe => {
            let moments = PanelMoments::from_panel(ds)?;
            let (beta, a_hat, _) = fe_from_moments(&moments, None, "full panel")?;
            let run =
                bootstrap_fe_from_moments(&moments, b, WeightScheme::Multinomial, master_seed)?;
            (beta, a_hat, run)
        }
        Method::Hpj => {
            let moments = HpjMoments::from_panel(ds)?;
            let (beta, a_hat, _) = hpj_from_moments(&moments, None)?;
            let run = run_targets(
                &[Target::Hpj {
                    moments: &moments,
                    beta: beta.clone(),
                }],
                b,
                WeightScheme::Multinomial,
                master_seed,
            )?
            .remove(0);
            (beta, a_hat, run)
        }
        Method::Hk => {
            return Err(Error::NotApplicable(
                "the bootstrap supports FE and HPJ only".into(),
            ))
        }
    };
    let moments = PanelMoments::from_panel(ds)?;
    let se = ccm_from_moments(&moments, &beta, &a_hat, None)?.se(coord)?;
    pivotal_interval(beta[coord], se, &run.sorted_t_stats(coord)?, level)
}

/// Weighted clustered covariance at `beta_star`, with the weighted `A*`.
pub fn bootstrap_ccm_from_moments(
    moments: &PanelMoments,
    weights: &[f64],
    beta_star: &DVector<f64>,
) -> Result<CcmEstimate> {
    if weights.len() != moments.n() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} individuals",
            weights.len(),
            moments.n()
        )));
    }
    if beta_star.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument(
            "bootstrap coefficients must be finite".into(),
        ));
    }
    let (a_star, _) = moments.aggregate(Some(weights));
    ccm_from_moments(moments, beta_star, &a_star, Some(weights))
}

pub fn bootstrap_ccm(
    ds: &PanelDataset,
    weights: &WeightDraw,
    beta_star: &DVector<f64>,
) -> Result<CcmEstimate> {
    bootstrap_ccm_from_moments(&PanelMoments::from_panel(ds)?, &weights.w, beta_star)
}

/// Divides deviations and t statistics of a weighted-bootstrap run by `sqrt(v)`.
pub fn weighted_deviation_rescale(run: &BootstrapRun, v: f64) -> Result<BootstrapRun> {
    match run.scheme {
        WeightScheme::IidWeights { variance } if variance == v && !run.rescaled => {
            let s = v.sqrt();
            let mut out = run.clone();
            out.deviations /= s;
            out.t_stats /= s;
            out.rescaled = true;
            Ok(out)
        }
        WeightScheme::IidWeights { variance } if variance == v => Err(Error::SchemeMismatch(
            "run has already been rescaled".into(),
        )),
        other => Err(Error::SchemeMismatch(format!(
            "expected IID weights with variance {v}, run used {other:?}"
        ))),
    }
}
