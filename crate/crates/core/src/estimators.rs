//! The fixed-effects estimator and its half-panel jackknife and
//! Hahn-Kuersteiner bias corrections.
//!
//! All estimators are computed from per-individual within moments
//! `A_i = sum_t x_dot x_dot'` and `S_i = sum_t x_dot y_dot`. The cross-section
//! bootstrap reweights exactly these moments, so a unit-weight replicate
//! reproduces the original estimate bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{solve_symmetric, CompensatedSum};
use crate::panel::{half_ranges, within_transform, PanelDataset, WithinView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Fe,
    Hpj,
    Hk,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Fe => "FE",
            Method::Hpj => "HPJ",
            Method::Hk => "HK",
        }
    }
}

/// Per-individual within moments of one (sub-)panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelMoments {
    n: usize,
    t: usize,
    p: usize,
    /// `n x p x p`: `sum_t x_dot x_dot'` per individual.
    a: Vec<f64>,
    /// `n x p`: `sum_t x_dot y_dot` per individual.
    s: Vec<f64>,
}

impl PanelMoments {
    pub fn from_view(view: &WithinView) -> Self {
        let (n, t, p) = (view.n, view.t, view.p);
        let mut a = Vec::with_capacity(n * p * p);
        let mut s = Vec::with_capacity(n * p);
        let mut acc_a = vec![CompensatedSum::new(); p * p];
        let mut acc_s = vec![CompensatedSum::new(); p];
        for i in 0..n {
            acc_a.iter_mut().for_each(|c| *c = CompensatedSum::new());
            acc_s.iter_mut().for_each(|c| *c = CompensatedSum::new());
            for r in 0..t {
                let row = &view.x_dot[(i * t + r) * p..(i * t + r + 1) * p];
                let yd = view.y_dot(i, r);
                for j in 0..p {
                    acc_s[j].add(row[j] * yd);
                    for k in j..p {
                        acc_a[j * p + k].add(row[j] * row[k]);
                    }
                }
            }
            for j in 0..p {
                for k in 0..p {
                    let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
                    a.push(acc_a[lo * p + hi].value());
                }
            }
            s.extend(acc_s.iter().map(CompensatedSum::value));
        }
        Self { n, t, p, a, s }
    }

    pub fn from_panel(ds: &PanelDataset) -> Result<Self> {
        ds.require_regressors()?;
        Ok(Self::from_view(&within_transform(ds)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `A_i`, `p x p` row-major.
    pub fn a_i(&self, i: usize) -> &[f64] {
        let pp = self.p * self.p;
        &self.a[i * pp..(i + 1) * pp]
    }

    pub fn s_i(&self, i: usize) -> &[f64] {
        &self.s[i * self.p..(i + 1) * self.p]
    }

    /// Weighted `(A_hat, S_hat)`, each divided by `nT`. `None` means unit weights.
    pub fn aggregate(&self, weights: Option<&[f64]>) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.p;
        let mut acc_a = vec![CompensatedSum::new(); p * p];
        let mut acc_s = vec![CompensatedSum::new(); p];
        for i in 0..self.n {
            let w = weights.map_or(1.0, |w| w[i]);
            if w == 0.0 {
                continue;
            }
            for (acc, v) in acc_a.iter_mut().zip(self.a_i(i)) {
                acc.add(w * v);
            }
            for (acc, v) in acc_s.iter_mut().zip(self.s_i(i)) {
                acc.add(w * v);
            }
        }
        let scale = (self.n * self.t) as f64;
        let a_hat = DMatrix::from_fn(p, p, |j, k| acc_a[j * p + k].value() / scale);
        let s_hat = DVector::from_fn(p, |j, _| acc_s[j].value() / scale);
        (a_hat, s_hat)
    }

    /// Average score `T^-1 (S_i - A_i beta) = T^-1 sum_t x_dot (y_dot - x_dot' beta)`.
    pub fn score_into(&self, i: usize, beta: &DVector<f64>, out: &mut [f64]) {
        let p = self.p;
        let a = self.a_i(i);
        let s = self.s_i(i);
        let t = self.t as f64;
        for j in 0..p {
            let mut v = s[j];
            for k in 0..p {
                v -= a[j * p + k] * beta[k];
            }
            out[j] = v / t;
        }
    }
}

/// FE coefficients from (optionally weighted) moments: `(beta, A_hat, S_hat)`.
pub fn fe_from_moments(
    moments: &PanelMoments,
    weights: Option<&[f64]>,
    context: &str,
) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let (a_hat, s_hat) = moments.aggregate(weights);
    let beta = solve_symmetric(&a_hat, &s_hat, context)?;
    Ok((beta, a_hat, s_hat))
}

/// Moments of the full panel and of both half panels.
#[derive(Debug, Clone)]
pub struct HpjMoments {
    pub full: PanelMoments,
    pub first: PanelMoments,
    pub second: PanelMoments,
}

impl HpjMoments {
    pub fn from_panel(ds: &PanelDataset) -> Result<Self> {
        ds.require_regressors()?;
        let (r1, r2) = half_ranges(ds.t())?;
        Ok(Self {
            full: PanelMoments::from_panel(ds)?,
            first: PanelMoments::from_panel(&ds.select_periods(r1)?)?,
            second: PanelMoments::from_panel(&ds.select_periods(r2)?)?,
        })
    }
}

/// Jackknife combination `2 b - (b1 + b2) / 2`.
pub fn jackknife_combine(
    full: &DVector<f64>,
    first: &DVector<f64>,
    second: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(full.len(), |j, _| {
        2.0 * full[j] - 0.5 * (first[j] + second[j])
    })
}

/// HPJ coefficients from moments: `(beta_hpj, A_hat_full, S_hat_full)`.
pub fn hpj_from_moments(
    moments: &HpjMoments,
    weights: Option<&[f64]>,
) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let (full, a_hat, s_hat) = fe_from_moments(&moments.full, weights, "full panel")?;
    let (first, _, _) = fe_from_moments(&moments.first, weights, "first half panel")?;
    let (second, _, _) = fe_from_moments(&moments.second, weights, "second half panel")?;
    Ok((jackknife_combine(&full, &first, &second), a_hat, s_hat))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: Method,
    pub beta_hat: DVector<f64>,
    /// Full-panel within moment matrix.
    pub a_hat: DMatrix<f64>,
    pub s_hat: DVector<f64>,
    /// `n x T` within residuals `y_dot - x_dot' beta_hat`.
    pub residuals: Vec<f64>,
    pub n: usize,
    pub t: usize,
    pub p: usize,
}

impl FitResult {
    pub fn residual(&self, i: usize, s: usize) -> f64 {
        self.residuals[i * self.t + s]
    }
}

pub fn within_residuals(view: &WithinView, beta: &DVector<f64>) -> Vec<f64> {
    let p = view.p;
    view.x_dot
        .chunks_exact(p)
        .zip(&view.y_dot)
        .map(|(row, yd)| yd - row.iter().zip(beta.iter()).map(|(x, b)| x * b).sum::<f64>())
        .collect()
}

fn make_fit(
    method: Method,
    view: &WithinView,
    beta: DVector<f64>,
    a_hat: DMatrix<f64>,
    s_hat: DVector<f64>,
) -> FitResult {
    FitResult {
        method,
        residuals: within_residuals(view, &beta),
        beta_hat: beta,
        a_hat,
        s_hat,
        n: view.n,
        t: view.t,
        p: view.p,
    }
}

/// Fixed-effects (within) estimator `A_hat^-1 S_hat`.
pub fn fe_fit(ds: &PanelDataset) -> Result<FitResult> {
    ds.require_regressors()?;
    let view = within_transform(ds);
    let moments = PanelMoments::from_view(&view);
    let (beta, a_hat, s_hat) = fe_from_moments(&moments, None, "full panel")?;
    Ok(make_fit(Method::Fe, &view, beta, a_hat, s_hat))
}

/// Half-panel jackknife estimator; residuals are evaluated on the full panel.
pub fn hpj_fit(ds: &PanelDataset) -> Result<FitResult> {
    let moments = HpjMoments::from_panel(ds)?;
    let (beta, a_hat, s_hat) = hpj_from_moments(&moments, None)?;
    let view = within_transform(ds);
    Ok(make_fit(Method::Hpj, &view, beta, a_hat, s_hat))
}

/// Analytic AR(1) correction `b + (1 + b) / T`.
pub fn hk_correct(beta_fe: f64, t: usize) -> f64 {
    beta_fe + (1.0 + beta_fe) / t as f64
}

/// Standard error `sqrt((1 - b^2) / (nT))` evaluated at the FE estimate.
pub fn hk_standard_error(beta_fe: f64, n: usize, t: usize) -> f64 {
    ((1.0 - beta_fe * beta_fe).max(0.0) / (n * t) as f64).sqrt()
}

/// Hahn-Kuersteiner correction; only defined for a pure panel AR(1) design.
pub fn hk_fit(ds: &PanelDataset) -> Result<FitResult> {
    match ds.design() {
        Some(spec) if spec.is_pure_ar1() && ds.p() == 1 => {}
        Some(spec) => {
            return Err(Error::NotApplicable(format!(
                "HK correction requires a pure AR(1) design, got {spec}"
            )))
        }
        None => {
            return Err(Error::NotApplicable(
                "HK correction requires a design built from the lag specification y:1".into(),
            ))
        }
    }
    let view = within_transform(ds);
    let moments = PanelMoments::from_view(&view);
    let (fe, a_hat, s_hat) = fe_from_moments(&moments, None, "full panel")?;
    let beta = DVector::from_element(1, hk_correct(fe[0], ds.t()));
    Ok(make_fit(Method::Hk, &view, beta, a_hat, s_hat))
}
