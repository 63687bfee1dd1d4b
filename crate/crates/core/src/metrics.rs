//! Error integrals, robust summaries and log-log rate fits.

use alloc::vec::Vec;

use crate::math::{abs, ln, powf, sqrt};
use crate::plugin::Regressor;
use crate::synth::{sample_covariates, SyntheticModel};
use crate::{Error, Result};

/// Monte Carlo estimate of `int |m_hat - m|^p dmu` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpError {
    pub value: f64,
    pub std_error: f64,
}

pub fn lp_error_detailed(estimate: &impl Regressor, model: &SyntheticModel, p: f64, n_eval: usize, seed: u64) -> Result<LpError> {
    if n_eval < 1000 {
        return Err(Error::InvalidConfig("error integrals need at least 1000 evaluation points".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidConfig("the error order p must be at least 1".into()));
    }
    let d = model.dim();
    let xs = sample_covariates(model, n_eval, seed);
    let preds = estimate.predict_batch(&xs, d);
    let terms: Vec<f64> = xs.chunks_exact(d).zip(&preds).map(|(x, m)| powf(abs(m - model.m_true(x)), p)).collect();
    let n = n_eval as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
    Ok(LpError { value: mean, std_error: sqrt(var / n) })
}

/// `int |m_hat(x) - m(x)|^p mu(dx)` over a fresh covariate sample.
pub fn lp_error(estimate: &impl Regressor, model: &SyntheticModel, p: f64, n_eval: usize, seed: u64) -> Result<f64> {
    Ok(lp_error_detailed(estimate, model, p, n_eval, seed)?.value)
}

/// Ordinary least squares `y = slope x + intercept`, with `R^2`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Regression of `log(error)` on `log(n)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData("a rate fit needs at least three points".into()));
    }
    if let Some(&(n, e)) = points.iter().find(|&&(n, e)| !(e > 0.0) || !(n > 0.0)) {
        return Err(Error::InvalidData(alloc::format!("cannot take logs of point ({n}, {e})")));
    }
    let lx: Vec<f64> = points.iter().map(|p| ln(p.0)).collect();
    let ly: Vec<f64> = points.iter().map(|p| ln(p.1)).collect();
    let (slope, intercept, r_squared) = least_squares(&lx, &ly);
    Ok(RateFit { slope, intercept, r_squared })
}

/// Linear-interpolation quantile (type 7) of unsorted values; NaN on empty input.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Interquartile range.
pub fn iqr(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}
