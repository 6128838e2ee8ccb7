//! Numerical building blocks: compensated summation, the standard normal
//! quantile, empirical quantiles and small dense symmetric solves.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a moment matrix is singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor; zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Inverse of the standard normal distribution function.
///
/// Wichura's AS 241 (PPND16), accurate to about 1e-16 relative.
#[allow(clippy::excessive_precision)] // coefficients as published
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((r * 5226.495278852545925 + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Two-sided critical value `z_{1 - (1 - level)/2}`.
pub fn two_sided_z(level: f64) -> Result<f64> {
    check_level(level)?;
    // The lower tail avoids cancellation in 1 - alpha/2 for levels near one.
    Ok(-normal_quantile((1.0 - level) / 2.0))
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level.is_finite() && level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::BadLevel(level))
    }
}

/// Left-continuous empirical quantile `inf { b : F_n(b) >= alpha }` of an
/// ascending-sorted sample.
pub fn empirical_quantile(sorted: &[f64], alpha: f64) -> f64 {
    assert!(!sorted.is_empty(), "empirical quantile of an empty sample");
    let n = sorted.len();
    // The slack absorbs representation error in alpha * n (e.g. 0.025 * 1000).
    let k = (alpha * n as f64 - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

/// Ratio of the smallest to the largest eigenvalue of a symmetric matrix.
///
/// Returns 0 when the largest eigenvalue is not positive.
pub fn eigen_ratio(sym: &DMatrix<f64>) -> f64 {
    if sym.nrows() == 1 {
        return if sym[(0, 0)] > 0.0 { 1.0 } else { 0.0 };
    }
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.max();
    if !(max > 0.0) {
        return 0.0;
    }
    eig.eigenvalues.min() / max
}

pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym.clone()).eigenvalues.min()
}

/// Solves `a x = b` for a symmetric moment matrix, rejecting near-singular input.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let ratio = eigen_ratio(a);
    if !(ratio >= SINGULAR_RATIO) {
        return Err(Error::SingularDesign {
            context: context.to_string(),
            ratio,
        });
    }
    if a.nrows() == 1 {
        return Ok(DVector::from_element(1, b[0] / a[(0, 0)]));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::SingularDesign {
            context: context.to_string(),
            ratio,
        })
}

pub fn invert_symmetric(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let ratio = eigen_ratio(a);
    if !(ratio >= SINGULAR_RATIO) {
        return Err(Error::SingularDesign {
            context: context.to_string(),
            ratio,
        });
    }
    if a.nrows() == 1 {
        return Ok(DMatrix::from_element(1, 1, 1.0 / a[(0, 0)]));
    }
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign {
            context: context.to_string(),
            ratio,
        })?;
    Ok(symmetrize(&inv))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
