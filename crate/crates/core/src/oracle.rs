//! Population quantities of the simulation designs: pseudo-true
//! coefficients, the terms of the incidental-parameter bias expansion and
//! the limit covariances of the score.
//!
//! Linear AR designs fitted as a panel AR(1) reduce to the autocovariance
//! function `g` of the demeaned outcome, which is available exactly (fixed
//! coefficients) or by integration over the coefficient distribution
//! (random coefficients). Every other design is handled by long-run
//! simulation, with per-individual long-run means standing in for the
//! conditional means given the individual effect.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{DgpSpec, EffectDist, IndividualSim, InnovationDist, Variant};
use crate::error::{Error, Result};
use crate::numeric::{invert_symmetric, solve_symmetric, CompensatedSum};
use crate::panel::LagSpec;
use crate::rng::domain;

/// Threshold on `||V2||` separating the fast and slow convergence rates.
pub const FAST_RATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Integrated,
    Simulated {
        t_long: usize,
        n_long: usize,
        mc_se: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoTrue {
    pub beta0: Vec<f64>,
    pub provenance: Provenance,
}

impl PseudoTrue {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta0)
    }
}

/// `A`, `B_T`, `D_T` and the limit `B` of `B_T`, matrices stored by rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTerms {
    pub a: Vec<Vec<f64>>,
    pub b_t: Vec<f64>,
    pub d_t: Vec<Vec<f64>>,
    pub b_inf: Vec<f64>,
    pub t_used: usize,
    pub provenance: Provenance,
}

impl BiasTerms {
    pub fn a_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.a)
    }

    pub fn d_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.d_t)
    }

    /// `-A^-1 B_T / T`.
    pub fn leading_bias(&self) -> Result<DVector<f64>> {
        let b = DVector::from_column_slice(&self.b_t);
        Ok(-solve_symmetric(&self.a_matrix(), &b, "A")? / self.t_used as f64)
    }

    /// `-A^-1 B_T / T - A^-1 D_T A^-1 B_T / T^2`.
    pub fn two_term_bias(&self) -> Result<DVector<f64>> {
        let t = self.t_used as f64;
        let a_inv = invert_symmetric(&self.a_matrix(), "A")?;
        let ab = &a_inv * DVector::from_column_slice(&self.b_t);
        let second = &a_inv * (self.d_matrix() * &ab);
        Ok(-(ab / t) - second / (t * t))
    }

    /// The whole series `-A^-1 sum_m T^{-m-1} (D_T A^-1)^m B_T`, summed in
    /// closed form as `-(A - D_T / T)^-1 B_T / T`.
    pub fn series_bias(&self) -> Result<DVector<f64>> {
        let t = self.t_used as f64;
        let m = self.a_matrix() - self.d_matrix() / t;
        let b = DVector::from_column_slice(&self.b_t);
        Ok(-solve_symmetric(&m, &b, "A - D_T/T")? / t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateCase {
    /// `E[x_tilde eps | c] = 0`: the estimator converges at rate `sqrt(nT)`.
    FastRate,
    /// Cluster-level correlation dominates: rate `sqrt(n)`.
    SlowRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCovariance {
    /// Long-run covariance of the within-individual score fluctuations.
    pub v1: Vec<Vec<f64>>,
    /// `E[ E[x_tilde eps | c]^{(x)2} ]`.
    pub v2: Vec<Vec<f64>>,
    /// `V1` in the fast-rate case, `V2` in the slow-rate case.
    pub sigma: Vec<Vec<f64>>,
    pub dnt_case: RateCase,
    /// `A`, included so the coefficient covariance `A^-1 Sigma A^-1` can be formed.
    pub a: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl LimitCovariance {
    /// `A^-1 Sigma A^-1`.
    pub fn coefficient_covariance(&self) -> Result<DMatrix<f64>> {
        let a_inv = invert_symmetric(&from_rows(&self.a), "A")?;
        Ok(&a_inv * from_rows(&self.sigma) * &a_inv)
    }
}

fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.len();
    DMatrix::from_fn(p, p, |j, k| rows[j][k])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|j| m.row(j).iter().copied().collect())
        .collect()
}

fn scalar_rows(v: f64) -> Vec<Vec<f64>> {
    vec![vec![v]]
}

/// Parameters of the long-run simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    /// Periods per simulated individual.
    pub t_long: usize,
    /// Number of simulated individuals.
    pub n_long: usize,
    pub seed: u64,
    /// Lag truncation for the infinite sums in `B` and the limit covariances.
    pub max_lag: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            t_long: 1_000_000,
            n_long: 64,
            seed: 0x5eed,
            max_lag: 200,
        }
    }
}

impl SimulationSettings {
    /// Settings sized for lag-covariance estimation, whose cost grows with `max_lag`.
    pub fn for_bias_terms() -> Self {
        Self {
            t_long: 100_000,
            n_long: 32,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMethod {
    ClosedForm,
    Simulated(SimulationSettings),
}

/// Pseudo-true coefficient of the static measurement-error design:
/// `var_x / (var_x + var_v) * phi`.
pub fn pseudo_true_measurement_error(phi: f64, var_x_star: f64, var_v: f64) -> Result<PseudoTrue> {
    if !(var_x_star > 0.0) || !(var_v >= 0.0) || !phi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need phi finite, var(x*) > 0 and var(v) >= 0, got ({phi}, {var_x_star}, {var_v})"
        )));
    }
    Ok(PseudoTrue {
        beta0: vec![var_x_star / (var_x_star + var_v) * phi],
        provenance: Provenance::ClosedForm,
    })
}

// ---------------------------------------------------------------------------
// Numerical integration

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

const INTEGRATION_TOL: f64 = 1e-11;

/// `E[h(c)]` for `c ~ U(lo, hi)`.
fn uniform_expectation(lo: f64, hi: f64, h: &dyn Fn(f64) -> f64) -> f64 {
    if hi == lo {
        return h(lo);
    }
    integrate(h, lo, hi, INTEGRATION_TOL) / (hi - lo)
}

// ---------------------------------------------------------------------------
// Linear AR designs fitted as a panel AR(1)

/// Number of lags after which `r^k` falls below `1e-18`.
fn geometric_horizon(r: f64) -> usize {
    if r < 1e-3 {
        return 16;
    }
    let k = (1e-18f64.ln() / r.ln()).ceil() as usize + 8;
    k.clamp(16, 200_000)
}

/// Fixed-coefficient AR(2) `y = phi1 y_{-1} + phi2 y_{-2} + u` (AR(1) when `phi2 = 0`).
#[derive(Debug, Clone)]
struct LinearAr {
    phi1: f64,
    phi2: f64,
    sigma2: f64,
    /// Fourth cumulant of the innovation; `None` when it does not exist.
    kappa4: Option<f64>,
    horizon: usize,
}

impl LinearAr {
    fn new(phi1: f64, phi2: f64, err: InnovationDist) -> Result<Self> {
        let sigma2 = err.variance();
        if !sigma2.is_finite() {
            return Err(Error::NoClosedForm(
                "innovations with infinite variance".into(),
            ));
        }
        let kappa4 = match err {
            InnovationDist::Normal => Some(0.0),
            InnovationDist::StudentT { df } if df > 4.0 => {
                Some(6.0 * df * df / ((df - 2.0).powi(2) * (df - 4.0)))
            }
            InnovationDist::StudentT { .. } => None,
        };
        // Largest modulus of the roots of z^2 - phi1 z - phi2.
        let disc = phi1 * phi1 + 4.0 * phi2;
        let r = if disc >= 0.0 {
            ((phi1.abs() + disc.sqrt()) / 2.0).abs()
        } else {
            (-phi2).sqrt()
        };
        Ok(Self {
            phi1,
            phi2,
            sigma2,
            kappa4,
            horizon: geometric_horizon(r),
        })
    }

    /// MA(infinity) weights `psi_0..psi_K`.
    fn psi(&self) -> Vec<f64> {
        let mut psi = vec![0.0; self.horizon + 1];
        psi[0] = 1.0;
        for k in 1..=self.horizon {
            psi[k] = self.phi1 * psi[k - 1] + if k >= 2 { self.phi2 * psi[k - 2] } else { 0.0 };
        }
        psi
    }

    /// Autocovariances `g(0..=K)`.
    fn autocov(&self) -> Vec<f64> {
        let (p1, p2) = (self.phi1, self.phi2);
        let mut g = vec![0.0; self.horizon + 1];
        g[0] = (1.0 - p2) * self.sigma2 / ((1.0 + p2) * ((1.0 - p2).powi(2) - p1 * p1));
        g[1] = p1 * g[0] / (1.0 - p2);
        for k in 2..=self.horizon {
            g[k] = p1 * g[k - 1] + p2 * g[k - 2];
        }
        g
    }
}

/// Autocovariance function of the demeaned outcome, evaluated at `|k|`.
struct Autocov(Vec<f64>);

impl Autocov {
    #[inline]
    fn at(&self, k: i64) -> f64 {
        self.0
            .get(k.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }

    fn horizon(&self) -> i64 {
        self.0.len() as i64 - 1
    }
}

/// `E[x_tilde_1 eps_{1+k}] = g(k+1) - beta0 g(k)` for the AR(1) fit.
fn score_cross(g: &Autocov, beta0: f64, k: i64) -> f64 {
    g.at(k + 1) - beta0 * g.at(k)
}

fn ar1_fit_bias_terms(g: &Autocov, t: usize) -> (f64, f64, f64, f64) {
    let beta0 = g.at(1) / g.at(0);
    let tf = t as f64;
    let mut b_t = CompensatedSum::new();
    let mut d_t = CompensatedSum::new();
    let lim = t as i64 - 1;
    for k in -lim..=lim {
        let w = 1.0 - k.abs() as f64 / tf;
        b_t.add(w * score_cross(g, beta0, k));
        d_t.add(w * g.at(k));
    }
    let mut b_inf = CompensatedSum::new();
    let h = g.horizon();
    for k in -h..=h {
        b_inf.add(score_cross(g, beta0, k));
    }
    (g.at(0), b_t.value(), d_t.value(), b_inf.value())
}

/// Gaussian part of `sum_k Cov(z_0, z_k)` for `z_t = y_{t-1} y_t - beta y_{t-1}^2`.
fn gaussian_long_run_variance(g: &Autocov, beta: f64) -> f64 {
    let h = g.horizon() + 1;
    let mut acc = CompensatedSum::new();
    for k in -h..=h {
        let (gk, gm, gp) = (g.at(k), g.at(k - 1), g.at(k + 1));
        acc.add(gk * gk + gp * gm - 2.0 * beta * gk * (gm + gp) + 2.0 * beta * beta * gk * gk);
    }
    acc.value()
}

/// Fourth-cumulant part of the same long-run variance for a linear process.
fn cumulant_long_run_variance(psi: &[f64], beta: f64) -> f64 {
    // sum_j psi_{a-j} psi_{b-j} psi_{c-j} psi_{d-j}, psi vanishing at negative lags.
    let q = |idx: [i64; 4]| -> f64 {
        let m = *idx.iter().min().unwrap();
        let top = (*idx.iter().max().unwrap() - m) as usize;
        (0..psi.len().saturating_sub(top))
            .map(|shift| {
                idx.iter()
                    .map(|&a| psi[(a - m) as usize + shift])
                    .product::<f64>()
            })
            .sum()
    };
    let h = psi.len() as i64;
    let mut acc = CompensatedSum::new();
    for k in -h..=h {
        acc.add(
            q([-1, 0, k - 1, k]) - beta * q([-1, 0, k - 1, k - 1]) - beta * q([-1, -1, k - 1, k])
                + beta * beta * q([-1, -1, k - 1, k - 1]),
        );
    }
    acc.value()
}

/// `E[c^k / (1 - c^2)]` for `c ~ U(lo, hi)`, `k = 0..=K`.
fn random_coef_autocov(lo: f64, hi: f64) -> Autocov {
    let r = lo.abs().max(hi.abs());
    let horizon = geometric_horizon(r);
    Autocov(
        (0..=horizon)
            .map(|k| uniform_expectation(lo, hi, &|c: f64| c.powi(k as i32) / (1.0 - c * c)))
            .collect(),
    )
}

fn random_coef_range(spec: &DgpSpec) -> Result<(f64, f64)> {
    let EffectDist::Uniform { lo, hi } = spec.c_dist;
    if spec.err_dist != InnovationDist::Normal {
        return Err(Error::NoClosedForm(
            "random-coefficient design with non-normal innovations".into(),
        ));
    }
    Ok((lo, hi))
}

fn closed_form_target(spec: &DgpSpec, fit: &LagSpec) -> Result<()> {
    spec.validate()?;
    match spec.variant {
        Variant::Ar1 { .. } | Variant::Ar2 { .. } | Variant::RandomCoefAr1 if fit.is_pure_ar1() => {
            Ok(())
        }
        Variant::Ar1 { .. } | Variant::Ar2 { .. } | Variant::RandomCoefAr1 => {
            Err(Error::NoClosedForm(format!("{spec} fitted with {fit}")))
        }
        Variant::Ar2x { .. } if *fit == spec.default_fit() => Ok(()),
        _ => Err(Error::NoClosedForm(format!("{spec} fitted with {fit}"))),
    }
}

/// Projection of `y_t` on `(y_{t-1}, x_{t-1})` for the AR(2) with a distributed lag of an i.i.d. N(0,1) regressor.
fn ar2x_projection(phi1: f64, phi2: f64, rho1: f64, rho2: f64, sigma_u2: f64) -> Result<Vec<f64>> {
    // Coefficients of x_t and x_{t-1} in the moving-average form of y_t.
    let (chi0, chi1) = (rho1, phi1 * rho1 + rho2);
    let c0 = sigma_u2 + rho1 * chi0 + rho2 * chi1;
    let c1 = rho2 * chi0;
    // Yule-Walker with exogenous terms in (g0, g1, g2).
    let yw = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, -phi1, -phi2, -phi1, 1.0 - phi2, 0.0, -phi2, -phi1, 1.0],
    );
    let g = solve_lu(&yw, &DVector::from_vec(vec![c0, c1, 0.0]))?;
    let a = DMatrix::from_row_slice(2, 2, &[g[0], chi0, chi0, 1.0]);
    let s = DVector::from_vec(vec![g[1], chi1]);
    Ok(solve_symmetric(&a, &s, "AR2X projection")?
        .iter()
        .copied()
        .collect())
}

fn solve_lu(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::SingularDesign {
            context: "Yule-Walker system".into(),
            ratio: 0.0,
        })
}

/// Pseudo-true coefficient of the design's default fit, exactly or by integration.
pub fn pseudo_true_closed_form(spec: &DgpSpec) -> Result<PseudoTrue> {
    closed_form_target(spec, &spec.default_fit())?;
    match spec.variant {
        Variant::Ar1 { phi } => Ok(PseudoTrue {
            beta0: vec![phi],
            provenance: Provenance::ClosedForm,
        }),
        // First autocorrelation from the Yule-Walker equations.
        Variant::Ar2 { phi1, phi2 } => Ok(PseudoTrue {
            beta0: vec![phi1 / (1.0 - phi2)],
            provenance: Provenance::ClosedForm,
        }),
        Variant::RandomCoefAr1 => {
            let EffectDist::Uniform { lo, hi } = spec.c_dist;
            let num = uniform_expectation(lo, hi, &|c: f64| c / (1.0 - c * c));
            let den = uniform_expectation(lo, hi, &|c: f64| 1.0 / (1.0 - c * c));
            Ok(PseudoTrue {
                beta0: vec![num / den],
                provenance: Provenance::Integrated,
            })
        }
        Variant::Ar2x {
            phi1,
            phi2,
            rho1,
            rho2,
        } => Ok(PseudoTrue {
            beta0: ar2x_projection(phi1, phi2, rho1, rho2, spec.err_dist.variance())?,
            provenance: Provenance::ClosedForm,
        }),
        _ => unreachable!("screened by closed_form_target"),
    }
}

/// MA weights and excess kurtosis of the innovations, when the latter is nonzero.
type CumulantInput = Option<(Vec<f64>, f64)>;

fn linear_autocov(spec: &DgpSpec) -> Result<(Autocov, CumulantInput, Provenance)> {
    match spec.variant {
        Variant::Ar1 { phi } => {
            let ar = LinearAr::new(phi, 0.0, spec.err_dist)?;
            Ok((
                Autocov(ar.autocov()),
                ar.kappa4.map(|k| (ar.psi(), k)),
                Provenance::ClosedForm,
            ))
        }
        Variant::Ar2 { phi1, phi2 } => {
            let ar = LinearAr::new(phi1, phi2, spec.err_dist)?;
            Ok((
                Autocov(ar.autocov()),
                ar.kappa4.map(|k| (ar.psi(), k)),
                Provenance::ClosedForm,
            ))
        }
        Variant::RandomCoefAr1 => {
            let (lo, hi) = random_coef_range(spec)?;
            Ok((random_coef_autocov(lo, hi), None, Provenance::Integrated))
        }
        _ => Err(Error::NoClosedForm(spec.to_string())),
    }
}

/// Bias-expansion terms at sample length `t`.
pub fn bias_terms(
    spec: &DgpSpec,
    fit: &LagSpec,
    t: usize,
    method: OracleMethod,
) -> Result<BiasTerms> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "T must be at least 2, got {t}"
        )));
    }
    match method {
        OracleMethod::ClosedForm => {
            closed_form_target(spec, fit)?;
            let (g, _, provenance) = linear_autocov(spec)?;
            let (a, b_t, d_t, b_inf) = ar1_fit_bias_terms(&g, t);
            Ok(BiasTerms {
                a: scalar_rows(a),
                b_t: vec![b_t],
                d_t: scalar_rows(d_t),
                b_inf: vec![b_inf],
                t_used: t,
                provenance,
            })
        }
        OracleMethod::Simulated(settings) => simulated_bias_terms(spec, fit, t, &settings),
    }
}

/// Limit covariances of the score and the rate case.
pub fn limit_covariance(
    spec: &DgpSpec,
    fit: &LagSpec,
    method: OracleMethod,
) -> Result<LimitCovariance> {
    match method {
        OracleMethod::ClosedForm => {
            closed_form_target(spec, fit)?;
            let (g, cumulant, provenance) = linear_autocov(spec)?;
            let beta0 = g.at(1) / g.at(0);
            let (v1, v2) = match spec.variant {
                Variant::RandomCoefAr1 => {
                    let (lo, hi) = random_coef_range(spec)?;
                    // Gaussian innovations: the conditional long-run variance
                    // follows from Isserlis' formula with g_c(k) = c^|k| / (1 - c^2).
                    let v1 = uniform_expectation(lo, hi, &|c: f64| {
                        let horizon = geometric_horizon(c.abs());
                        let gc = Autocov(
                            (0..=horizon)
                                .map(|k| c.powi(k as i32) / (1.0 - c * c))
                                .collect(),
                        );
                        gaussian_long_run_variance(&gc, beta0)
                    });
                    let v2 = uniform_expectation(lo, hi, &|c: f64| {
                        let m = (c - beta0) / (1.0 - c * c);
                        m * m
                    });
                    (v1, v2)
                }
                _ => {
                    let (psi, kappa4) = cumulant.ok_or_else(|| {
                        Error::NoClosedForm("innovations without a finite fourth moment".into())
                    })?;
                    let v1 = gaussian_long_run_variance(&g, beta0)
                        + kappa4 * cumulant_long_run_variance(&psi, beta0);
                    // The demeaned process is independent of the additive effect.
                    (v1, 0.0)
                }
            };
            Ok(assemble_limit(
                DMatrix::from_element(1, 1, v1),
                DMatrix::from_element(1, 1, v2),
                DMatrix::from_element(1, 1, g.at(0)),
                provenance,
            ))
        }
        OracleMethod::Simulated(settings) => simulated_limit_covariance(spec, fit, &settings),
    }
}

fn assemble_limit(
    v1: DMatrix<f64>,
    v2: DMatrix<f64>,
    a: DMatrix<f64>,
    provenance: Provenance,
) -> LimitCovariance {
    let dnt_case = if v2.norm() < FAST_RATE_TOLERANCE {
        RateCase::FastRate
    } else {
        RateCase::SlowRate
    };
    let sigma = match dnt_case {
        RateCase::FastRate => v1.clone(),
        RateCase::SlowRate => v2.clone(),
    };
    LimitCovariance {
        v1: to_rows(&v1),
        v2: to_rows(&v2),
        sigma: to_rows(&sigma),
        dnt_case,
        a: to_rows(&a),
        provenance,
    }
}

// ---------------------------------------------------------------------------
// Long-run simulation

/// Whether the additive effect leaves the demeaned process untouched, so that
/// `E[x_tilde eps | c] = 0` holds structurally.
fn effect_is_additive(spec: &DgpSpec) -> bool {
    !matches!(spec.variant, Variant::RandomCoefAr1)
}

fn check_fit(spec: &DgpSpec, fit: &LagSpec) -> Result<()> {
    if fit.width() == 0 {
        return Err(Error::InvalidArgument("fit requests no regressors".into()));
    }
    if let Some(&(src, _)) = fit
        .regressor_lags
        .iter()
        .find(|(src, _)| *src >= spec.exogenous_count())
    {
        return Err(Error::InvalidArgument(format!(
            "fit uses x{} but {spec} has {} exogenous series",
            src + 1,
            spec.exogenous_count()
        )));
    }
    Ok(())
}

/// Streams `(y_t, z_t)` rows of the fitting design for one individual.
struct RowStream {
    sim: IndividualSim,
    fit: LagSpec,
    y_hist: Vec<f64>,
    x_hist: Vec<f64>,
    pos: usize,
}

impl RowStream {
    fn new(spec: &DgpSpec, fit: &LagSpec, seed: u64, i: u64) -> Result<Self> {
        let sim = IndividualSim::from_stream(spec, crate::rng::stream(&[domain::ORACLE, seed, i]))?;
        let len = fit.max_lag() + 1;
        let mut s = Self {
            sim,
            fit: fit.clone(),
            y_hist: vec![0.0; len],
            x_hist: vec![0.0; len],
            pos: 0,
        };
        for _ in 0..len - 1 {
            s.advance();
        }
        Ok(s)
    }

    fn advance(&mut self) {
        let (y, x) = self.sim.step();
        self.pos = (self.pos + 1) % self.y_hist.len();
        self.y_hist[self.pos] = y;
        self.x_hist[self.pos] = x;
    }

    #[inline]
    fn lagged(&self, hist: &[f64], lag: usize) -> f64 {
        let len = hist.len();
        hist[(self.pos + len - lag) % len]
    }

    /// Next row: returns `y_t` and fills `z` with the regressors.
    fn next_row(&mut self, z: &mut [f64]) -> f64 {
        self.advance();
        let mut j = 0;
        for &l in &self.fit.outcome_lags {
            z[j] = self.lagged(&self.y_hist, l);
            j += 1;
        }
        for &(_, l) in &self.fit.regressor_lags {
            z[j] = self.lagged(&self.x_hist, l);
            j += 1;
        }
        self.lagged(&self.y_hist, 0)
    }
}

/// Per-row averages of the within moments of one long individual series.
struct LongMoments {
    a: DMatrix<f64>,
    s: DVector<f64>,
}

fn long_moments(
    spec: &DgpSpec,
    fit: &LagSpec,
    settings: &SimulationSettings,
    i: u64,
) -> Result<LongMoments> {
    let p = fit.width();
    let mut rows = RowStream::new(spec, fit, settings.seed, i)?;
    let mut z = vec![0.0; p];
    let mut sy = CompensatedSum::new();
    let mut sz = vec![CompensatedSum::new(); p];
    let mut szz = vec![CompensatedSum::new(); p * p];
    let mut szy = vec![CompensatedSum::new(); p];
    for _ in 0..settings.t_long {
        let y = rows.next_row(&mut z);
        sy.add(y);
        for j in 0..p {
            sz[j].add(z[j]);
            szy[j].add(z[j] * y);
            for k in j..p {
                szz[j * p + k].add(z[j] * z[k]);
            }
        }
    }
    let l = settings.t_long as f64;
    let ybar = sy.value() / l;
    let zbar: Vec<f64> = sz.iter().map(|s| s.value() / l).collect();
    let a = DMatrix::from_fn(p, p, |j, k| {
        let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
        szz[lo * p + hi].value() / l - zbar[lo] * zbar[hi]
    });
    let s = DVector::from_fn(p, |j, _| szy[j].value() / l - zbar[j] * ybar);
    Ok(LongMoments { a, s })
}

fn check_settings(settings: &SimulationSettings, min_t: usize) -> Result<()> {
    if settings.t_long < min_t || settings.n_long < 2 {
        return Err(Error::InvalidArgument(format!(
            "long-run simulation needs T_long >= {min_t} and n_long >= 2, got {} and {}",
            settings.t_long, settings.n_long
        )));
    }
    Ok(())
}

/// Pooled pseudo-true coefficient from long simulated series, with a
/// delete-one-individual jackknife standard error.
pub fn pseudo_true_simulated(
    spec: &DgpSpec,
    fit: &LagSpec,
    t_long: usize,
    n_long: usize,
    seed: u64,
) -> Result<PseudoTrue> {
    let settings = SimulationSettings {
        t_long,
        n_long,
        seed,
        ..SimulationSettings::default()
    };
    check_settings(&settings, 100_000)?;
    pseudo_true_with(spec, fit, &settings)
}

fn pseudo_true_with(
    spec: &DgpSpec,
    fit: &LagSpec,
    settings: &SimulationSettings,
) -> Result<PseudoTrue> {
    spec.validate()?;
    check_fit(spec, fit)?;
    let moments = (0..settings.n_long as u64)
        .into_par_iter()
        .map(|i| long_moments(spec, fit, settings, i))
        .collect::<Result<Vec<_>>>()?;
    let p = fit.width();
    let total_a = moments
        .iter()
        .fold(DMatrix::zeros(p, p), |acc, m| acc + &m.a);
    let total_s = moments.iter().fold(DVector::zeros(p), |acc, m| acc + &m.s);
    let beta = solve_symmetric(&total_a, &total_s, "long-run moments")?;
    let n = moments.len() as f64;
    let leave_out = moments
        .iter()
        .map(|m| solve_symmetric(&(&total_a - &m.a), &(&total_s - &m.s), "long-run moments"))
        .collect::<Result<Vec<_>>>()?;
    let mean_lo = leave_out.iter().fold(DVector::zeros(p), |acc, b| acc + b) / n;
    let mc_se = (0..p)
        .map(|j| {
            let ss: f64 = leave_out.iter().map(|b| (b[j] - mean_lo[j]).powi(2)).sum();
            ((n - 1.0) / n * ss).sqrt()
        })
        .collect();
    Ok(PseudoTrue {
        beta0: beta.iter().copied().collect(),
        provenance: Provenance::Simulated {
            t_long: settings.t_long,
            n_long: settings.n_long,
            mc_se,
        },
    })
}

/// Lag moments of one long series, demeaned by its own means.
struct LagMoments {
    /// `Gamma(k) = E[x_1 x_{1+k}']` for `k = 0..=K`.
    gamma: Vec<DMatrix<f64>>,
    /// `E[x_1 eps_{1+k}]` for `k = -K..=K` (index `k + K`).
    cross: Vec<DVector<f64>>,
    /// Batch-means long-run covariance of `x eps`.
    v1: DMatrix<f64>,
    /// Individual mean of `x eps`.
    score_mean: DVector<f64>,
}

fn lag_moments(
    spec: &DgpSpec,
    fit: &LagSpec,
    settings: &SimulationSettings,
    beta0: &DVector<f64>,
    lags: usize,
    i: u64,
) -> Result<LagMoments> {
    let p = fit.width();
    let len = settings.t_long;
    let mut rows = RowStream::new(spec, fit, settings.seed, i)?;
    let mut y = Vec::with_capacity(len);
    let mut x = Vec::with_capacity(len * p);
    let mut z = vec![0.0; p];
    for _ in 0..len {
        y.push(rows.next_row(&mut z));
        x.extend_from_slice(&z);
    }
    let l = len as f64;
    let ybar = y.iter().sum::<f64>() / l;
    let mut xbar = vec![0.0; p];
    for row in x.chunks_exact(p) {
        for j in 0..p {
            xbar[j] += row[j];
        }
    }
    xbar.iter_mut().for_each(|v| *v /= l);
    for row in x.chunks_exact_mut(p) {
        for j in 0..p {
            row[j] -= xbar[j];
        }
    }
    let eps: Vec<f64> = y
        .iter()
        .zip(x.chunks_exact(p))
        .map(|(yt, row)| {
            (yt - ybar)
                - row
                    .iter()
                    .zip(beta0.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect();
    let xr = |t: usize| &x[t * p..(t + 1) * p];
    let gamma = (0..=lags)
        .map(|k| {
            let mut m = DMatrix::zeros(p, p);
            for t in 0..len - k {
                let (a, b) = (xr(t), xr(t + k));
                for j in 0..p {
                    for q in 0..p {
                        m[(j, q)] += a[j] * b[q];
                    }
                }
            }
            m / (len - k) as f64
        })
        .collect();
    let lags_i = lags as i64;
    let cross = (-lags_i..=lags_i)
        .map(|k| {
            let mut v = DVector::zeros(p);
            let (start, end) = if k >= 0 {
                (0, len - k as usize)
            } else {
                ((-k) as usize, len)
            };
            for t in start..end {
                let e = eps[(t as i64 + k) as usize];
                let a = xr(t);
                for j in 0..p {
                    v[j] += a[j] * e;
                }
            }
            v / (end - start) as f64
        })
        .collect();
    let score: Vec<f64> = x
        .chunks_exact(p)
        .zip(&eps)
        .flat_map(|(row, e)| row.iter().map(move |a| a * e))
        .collect();
    let mut score_mean = DVector::zeros(p);
    for row in score.chunks_exact(p) {
        for j in 0..p {
            score_mean[j] += row[j];
        }
    }
    score_mean /= l;
    let batch = (len as f64).sqrt().floor().max(1.0) as usize;
    let nb = len / batch;
    let mut v1 = DMatrix::zeros(p, p);
    if nb >= 2 {
        for bidx in 0..nb {
            let mut m = DVector::zeros(p);
            for row in score[bidx * batch * p..(bidx + 1) * batch * p].chunks_exact(p) {
                for j in 0..p {
                    m[j] += row[j];
                }
            }
            let d = m / batch as f64 - &score_mean;
            v1 += &d * d.transpose();
        }
        v1 *= batch as f64 / (nb - 1) as f64;
    }
    Ok(LagMoments {
        gamma,
        cross,
        v1,
        score_mean,
    })
}

struct LagSummary {
    beta0: PseudoTrue,
    per_individual: Vec<LagMoments>,
    lags: usize,
}

fn simulate_lag_moments(
    spec: &DgpSpec,
    fit: &LagSpec,
    settings: &SimulationSettings,
    lags: usize,
) -> Result<LagSummary> {
    check_settings(settings, 2 * lags + 10)?;
    let beta0 = pseudo_true_with(spec, fit, settings)?;
    let b = beta0.beta();
    let per_individual = (0..settings.n_long as u64)
        .into_par_iter()
        .map(|i| lag_moments(spec, fit, settings, &b, lags, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(LagSummary {
        beta0,
        per_individual,
        lags,
    })
}

fn simulated_bias_terms(
    spec: &DgpSpec,
    fit: &LagSpec,
    t: usize,
    settings: &SimulationSettings,
) -> Result<BiasTerms> {
    let lags = settings.max_lag.max(t - 1);
    let summary = simulate_lag_moments(spec, fit, settings, lags)?;
    let p = fit.width();
    let tf = t as f64;
    let k_max = summary.lags as i64;
    #[allow(clippy::type_complexity)]
    let per: Vec<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>)> = summary
        .per_individual
        .iter()
        .map(|m| {
            let gamma_at = |k: i64| -> DMatrix<f64> {
                if k >= 0 {
                    m.gamma[k as usize].clone()
                } else {
                    m.gamma[(-k) as usize].transpose()
                }
            };
            let cross_at = |k: i64| &m.cross[(k + k_max) as usize];
            let mut b_t = DVector::zeros(p);
            let mut d_t = DMatrix::zeros(p, p);
            for k in -(t as i64 - 1)..=(t as i64 - 1) {
                let w = 1.0 - k.abs() as f64 / tf;
                b_t += cross_at(k) * w;
                d_t += gamma_at(k) * w;
            }
            let b_inf = (-k_max..=k_max).fold(DVector::zeros(p), |acc, k| acc + cross_at(k));
            (m.gamma[0].clone(), b_t, symmetrize_owned(d_t), b_inf)
        })
        .collect();
    let n = per.len() as f64;
    let a = per.iter().fold(DMatrix::zeros(p, p), |acc, v| acc + &v.0) / n;
    let b_t = per.iter().fold(DVector::zeros(p), |acc, v| acc + &v.1) / n;
    let d_t = per.iter().fold(DMatrix::zeros(p, p), |acc, v| acc + &v.2) / n;
    let b_inf = per.iter().fold(DVector::zeros(p), |acc, v| acc + &v.3) / n;
    let mc_se = (0..p)
        .map(|j| {
            let ss: f64 = per.iter().map(|v| (v.3[j] - b_inf[j]).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        })
        .collect();
    Ok(BiasTerms {
        a: to_rows(&symmetrize_owned(a)),
        b_t: b_t.iter().copied().collect(),
        d_t: to_rows(&d_t),
        b_inf: b_inf.iter().copied().collect(),
        t_used: t,
        provenance: Provenance::Simulated {
            t_long: settings.t_long,
            n_long: settings.n_long,
            mc_se,
        },
    })
}

fn symmetrize_owned(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn simulated_limit_covariance(
    spec: &DgpSpec,
    fit: &LagSpec,
    settings: &SimulationSettings,
) -> Result<LimitCovariance> {
    let summary = simulate_lag_moments(spec, fit, settings, 0)?;
    let p = fit.width();
    let n = summary.per_individual.len() as f64;
    let v1 = summary
        .per_individual
        .iter()
        .fold(DMatrix::zeros(p, p), |acc, m| acc + &m.v1)
        / n;
    let a = summary
        .per_individual
        .iter()
        .fold(DMatrix::zeros(p, p), |acc, m| acc + &m.gamma[0])
        / n;
    let v2 = if effect_is_additive(spec) {
        DMatrix::zeros(p, p)
    } else {
        // E[m_i m_i'] overstates V2 by V1 / T_long.
        let raw = summary
            .per_individual
            .iter()
            .fold(DMatrix::zeros(p, p), |acc, m| {
                acc + &m.score_mean * m.score_mean.transpose()
            })
            / n;
        raw - &v1 / settings.t_long as f64
    };
    let mc_se = match &summary.beta0.provenance {
        Provenance::Simulated { mc_se, .. } => mc_se.clone(),
        _ => Vec::new(),
    };
    Ok(assemble_limit(
        symmetrize_owned(v1),
        symmetrize_owned(v2),
        symmetrize_owned(a),
        Provenance::Simulated {
            t_long: settings.t_long,
            n_long: settings.n_long,
            mc_se,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_on_known_integrals() {
        assert!(
            (integrate(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12) - 2.0).abs() < 1e-10
        );
        assert!(
            (integrate(&|x: f64| 1.0 / (1.0 - x * x), 0.0, 0.9, 1e-12) - 0.9f64.atanh()).abs()
                < 1e-10
        );
    }

    #[test]
    fn ar_autocovariances_satisfy_yule_walker() {
        let ar = LinearAr::new(0.4, 0.4, InnovationDist::Normal).unwrap();
        let g = ar.autocov();
        // g0 = phi1 g1 + phi2 g2 + sigma2
        assert!((g[0] - (0.4 * g[1] + 0.4 * g[2] + 1.0)).abs() < 1e-12);
        // MA representation: g0 = sigma2 sum psi^2
        let psi = ar.psi();
        let s: f64 = psi.iter().map(|v| v * v).sum();
        assert!((g[0] - s).abs() < 1e-10);
    }

    #[test]
    fn ar1_closed_form_terms() {
        let spec = DgpSpec::ar1(0.8);
        let bt = bias_terms(&spec, &LagSpec::ar1(), 12, OracleMethod::ClosedForm).unwrap();
        assert!((bt.a[0][0] - 1.25 / 0.36).abs() < 1e-12);
        assert!((bt.b_inf[0] - 6.25).abs() < 1e-10);
        let expected_bt: f64 = (1..12)
            .map(|k| (1.0 - k as f64 / 12.0) * 1.25 * 0.8f64.powi(k - 1))
            .sum();
        assert!((bt.b_t[0] - expected_bt).abs() < 1e-12);
        let lc = limit_covariance(&spec, &LagSpec::ar1(), OracleMethod::ClosedForm).unwrap();
        assert_eq!(lc.dnt_case, RateCase::FastRate);
        // Martingale-difference score: V1 = A sigma^2 for any innovation law.
        assert!(
            (lc.v1[0][0] - 1.25 / 0.36 * 1.25).abs() < 1e-9,
            "{}",
            lc.v1[0][0]
        );
        assert!((lc.coefficient_covariance().unwrap()[(0, 0)] - 0.36).abs() < 1e-9);
    }

    #[test]
    fn closed_form_unavailable() {
        assert!(matches!(
            pseudo_true_closed_form(&DgpSpec::expar(0.8, 1.0)),
            Err(Error::NoClosedForm(_))
        ));
        let ar2x = DgpSpec::ar2x(0.4, 0.4, 0.5, 0.5);
        assert!(matches!(
            bias_terms(&ar2x, &ar2x.default_fit(), 10, OracleMethod::ClosedForm),
            Err(Error::NoClosedForm(_))
        ));
        assert!(matches!(
            bias_terms(
                &DgpSpec::ar1(0.5),
                &"y:1,y:2".parse().unwrap(),
                10,
                OracleMethod::ClosedForm
            ),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn ar2x_projection_is_rational() {
        // With t(10) innovations the projection is (213/295, 20/59).
        let b = pseudo_true_closed_form(&DgpSpec::ar2x(0.4, 0.4, 0.5, 0.5))
            .unwrap()
            .beta0;
        assert!((b[0] - 213.0 / 295.0).abs() < 1e-12, "{b:?}");
        assert!((b[1] - 20.0 / 59.0).abs() < 1e-12, "{b:?}");
        // Without the distributed lag the autoregressive coordinate reduces to the AR(2) value.
        let b = pseudo_true_closed_form(&DgpSpec::ar2x(0.4, 0.4, 0.0, 0.0))
            .unwrap()
            .beta0;
        assert!((b[0] - 0.4 / 0.6).abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn measurement_error_attenuation() {
        assert_eq!(
            pseudo_true_measurement_error(1.0, 1.0, 1.0).unwrap().beta0,
            vec![0.5]
        );
    }

    #[test]
    fn row_stream_matches_lagged_design() {
        use crate::dgp::simulate_panel;
        use crate::panel::build_lagged_design;
        let spec = DgpSpec::ar2x(0.4, 0.4, 0.5, 0.5).with_burn_in(3);
        let fit = spec.default_fit();
        let mut rows = RowStream::new(&spec, &fit, 7, 0).unwrap();
        // Same stream key through the public simulator.
        let mut sim =
            IndividualSim::from_stream(&spec, crate::rng::stream(&[domain::ORACLE, 7, 0])).unwrap();
        let raw: Vec<(f64, f64)> = (0..6).map(|_| sim.step()).collect();
        let mut z = [0.0; 2];
        for t in 1..6 {
            let y = rows.next_row(&mut z);
            assert_eq!(y, raw[t].0);
            assert_eq!(z, [raw[t - 1].0, raw[t - 1].1]);
        }
        let _ =
            build_lagged_design(&simulate_panel(&spec, 2, 5, 0).unwrap().dataset, &fit).unwrap();
    }
}
