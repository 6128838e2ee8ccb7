//! Clustered covariance, t and Wald statistics, normal intervals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::PanelMoments;
use crate::numeric::{
    check_level, eigen_ratio, invert_symmetric, min_eigenvalue, symmetrize, two_sided_z,
    CompensatedSum, SINGULAR_RATIO,
};
use crate::panel::PanelDataset;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

/// Clustered covariance of the score and the implied sandwich covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CcmEstimate {
    /// `n^-2 sum_i w_i { T^-1 sum_t x_dot e_hat }^{(x)2}`.
    pub sigma_hat: DMatrix<f64>,
    /// `A^-1 Sigma A^-1`, the covariance of the coefficient estimate.
    pub avar: DMatrix<f64>,
    /// Coefficients used to form the residuals.
    pub centering_beta: DVector<f64>,
    pub n: usize,
    pub t: usize,
}

impl CcmEstimate {
    /// Sandwich standard error of coordinate `a`.
    pub fn se(&self, a: usize) -> Result<f64> {
        let v = self.avar[(a, a)];
        if v > 0.0 && v.is_finite() {
            Ok(v.sqrt())
        } else {
            Err(Error::DegenerateVariance { coord: a, value: v })
        }
    }
}

/// Positive semidefiniteness up to `-1e-12 * trace`; inspects without modifying.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    let trace = m.trace().abs();
    min_eigenvalue(m) >= -1e-12 * trace.max(f64::MIN_POSITIVE)
}

/// Clustered covariance from per-individual moments with optional
/// bootstrap weights; `a_hat` is the (weighted) within moment matrix.
pub fn ccm_from_moments(
    moments: &PanelMoments,
    beta: &DVector<f64>,
    a_hat: &DMatrix<f64>,
    weights: Option<&[f64]>,
) -> Result<CcmEstimate> {
    let p = moments.p();
    let n = moments.n();
    let mut acc = vec![CompensatedSum::new(); p * p];
    let mut g = vec![0.0; p];
    for i in 0..n {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        moments.score_into(i, beta, &mut g);
        for j in 0..p {
            for k in j..p {
                acc[j * p + k].add(w * g[j] * g[k]);
            }
        }
    }
    let n2 = (n * n) as f64;
    let sigma = DMatrix::from_fn(p, p, |j, k| {
        let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
        acc[lo * p + hi].value() / n2
    });
    let a_inv = invert_symmetric(a_hat, "within moment matrix")?;
    let avar = symmetrize(&(&a_inv * &sigma * &a_inv));
    Ok(CcmEstimate {
        sigma_hat: sigma,
        avar,
        centering_beta: beta.clone(),
        n,
        t: moments.t(),
    })
}

/// Clustered covariance with residuals formed at `beta_tilde`.
pub fn ccm_sigma(
    ds: &PanelDataset,
    beta_tilde: &DVector<f64>,
    a_hat: &DMatrix<f64>,
) -> Result<CcmEstimate> {
    if beta_tilde.len() != ds.p() || a_hat.nrows() != ds.p() || a_hat.ncols() != ds.p() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: p={}, beta has {}, A is {}x{}",
            ds.p(),
            beta_tilde.len(),
            a_hat.nrows(),
            a_hat.ncols()
        )));
    }
    if beta_tilde.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument(
            "centering coefficients must be finite".into(),
        ));
    }
    let moments = PanelMoments::from_panel(ds)?;
    ccm_from_moments(&moments, beta_tilde, a_hat, None)
}

/// `(beta^a - r) / sqrt(avar^aa)`.
pub fn t_statistic(beta: &DVector<f64>, ccm: &CcmEstimate, coord: usize, r: f64) -> Result<f64> {
    if coord >= beta.len() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coord} out of range"
        )));
    }
    Ok((beta[coord] - r) / ccm.se(coord)?)
}

/// `(R beta - r)' [R avar R']^-1 (R beta - r)`.
pub fn wald_statistic(
    beta: &DVector<f64>,
    ccm: &CcmEstimate,
    restriction: &DMatrix<f64>,
    r: &DVector<f64>,
) -> Result<f64> {
    let q = restriction.nrows();
    if restriction.ncols() != beta.len() || r.len() != q || q == 0 || q > beta.len() {
        return Err(Error::InvalidArgument(format!(
            "restriction is {}x{} with {} targets for p={}",
            q,
            restriction.ncols(),
            r.len(),
            beta.len()
        )));
    }
    let middle = symmetrize(&(restriction * &ccm.avar * restriction.transpose()));
    let ratio = eigen_ratio(&middle);
    if !(ratio >= SINGULAR_RATIO) {
        return Err(Error::SingularRestriction { ratio });
    }
    let diff = restriction * beta - r;
    let solved = middle
        .clone()
        .lu()
        .solve(&diff)
        .ok_or(Error::SingularRestriction { ratio })?;
    Ok(diff.dot(&solved).max(0.0))
}

/// Normal-approximation interval `beta_a +/- z_{1-alpha/2} se_a`.
pub fn normal_ci(beta_a: f64, se_a: f64, level: f64) -> Result<Interval> {
    check_level(level)?;
    if !(se_a > 0.0) || !se_a.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "standard error must be positive, got {se_a}"
        )));
    }
    let half = two_sided_z(level)? * se_a;
    Ok(Interval {
        lo: beta_a - half,
        hi: beta_a + half,
    })
}
