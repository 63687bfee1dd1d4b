//! Plug-in classification from a regression estimate of `P(Y = 1 | X)`.

use alloc::vec::Vec;

use rand::Rng;

use crate::data::rng_from_seed;
use crate::math::{ln, sqrt};
use crate::plugin::Regressor;
use crate::synth::{midpoint_grid, sample_covariates, SyntheticModel};
use crate::{Error, Result};

/// 1 iff `m > 1/2`; the tie goes to 0.
#[inline]
pub fn plugin_classify(m: f64) -> u8 {
    (m > 0.5) as u8
}

pub trait Classifier {
    fn classify(&self, x: &[f64]) -> u8;

    fn classify_batch(&self, xs: &[f64], dim: usize) -> Vec<u8> {
        xs.chunks_exact(dim).map(|x| self.classify(x)).collect()
    }
}

/// Thresholds a regression estimate at 1/2.
#[derive(Debug, Clone)]
pub struct PluginClassifier<R>(pub R);

impl<R: Regressor> Classifier for PluginClassifier<R> {
    fn classify(&self, x: &[f64]) -> u8 {
        plugin_classify(self.0.predict(x))
    }

    fn classify_batch(&self, xs: &[f64], dim: usize) -> Vec<u8> {
        self.0.predict_batch(xs, dim).into_iter().map(plugin_classify).collect()
    }
}

/// Thresholds the true class probability.
#[derive(Debug, Clone, Copy)]
pub struct BayesClassifier<'a>(&'a SyntheticModel);

impl<'a> BayesClassifier<'a> {
    pub fn new(model: &'a SyntheticModel) -> Result<Self> {
        require_classification(model)?;
        Ok(BayesClassifier(model))
    }
}

impl Classifier for BayesClassifier<'_> {
    fn classify(&self, x: &[f64]) -> u8 {
        plugin_classify(self.0.m_true(x))
    }
}

/// Constant prediction, mostly for sanity checks.
#[derive(Debug, Clone, Copy)]
pub struct ConstantClassifier(pub u8);

impl Classifier for ConstantClassifier {
    fn classify(&self, _: &[f64]) -> u8 {
        self.0
    }
}

fn require_classification(model: &SyntheticModel) -> Result<()> {
    if model.is_classification() {
        Ok(())
    } else {
        Err(Error::InvalidModel("the model has a real-valued response, not class labels".into()))
    }
}

pub fn bayes_oracle(model: &SyntheticModel, x: &[f64]) -> Result<u8> {
    require_classification(model)?;
    Ok(plugin_classify(model.m_true(x)))
}

/// Midpoints per axis for quadrature: `10^6` points for `d <= 2`.
fn quadrature_axis(d: usize) -> Result<usize> {
    match d {
        1 => Ok(1_000_000),
        2 => Ok(1_000),
        _ => Err(Error::InvalidModel("quadrature is only provided for d <= 2".into())),
    }
}

/// `E min(m(X), 1 - m(X))`, in closed form when the model has one.
pub fn bayes_risk(model: &SyntheticModel) -> Result<f64> {
    require_classification(model)?;
    if let Some(r) = model.analytic_bayes_risk() {
        return Ok(r);
    }
    bayes_risk_quadrature(model)
}

/// Midpoint rule over `10^6` grid points.
pub fn bayes_risk_quadrature(model: &SyntheticModel) -> Result<f64> {
    require_classification(model)?;
    let d = model.dim();
    let grid = midpoint_grid(model, quadrature_axis(d)?);
    let n = grid.len() / d;
    Ok(grid.chunks_exact(d).map(|x| {
        let m = model.m_true(x);
        m.min(1.0 - m)
    }).sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    /// Misclassification rate on fresh labelled draws.
    pub empirical_risk: f64,
    pub bayes_risk: f64,
    /// `empirical_risk - bayes_risk`.
    pub excess: f64,
    /// `E |2 m(X) - 1| 1{classifier != Bayes}` on the same covariates: the
    /// excess risk with the label noise integrated out.
    pub conditional_excess: f64,
    pub n_eval: usize,
}

impl RiskReport {
    /// Binomial standard deviation of `empirical_risk`.
    pub fn sigma(&self) -> f64 {
        sqrt(self.bayes_risk.max(1e-12) * (1.0 - self.bayes_risk) / self.n_eval as f64)
    }
}

pub fn risk_report(classifier: &impl Classifier, model: &SyntheticModel, n_eval: usize, seed: u64) -> Result<RiskReport> {
    require_classification(model)?;
    if n_eval < 1000 {
        return Err(Error::InvalidConfig("risk evaluation needs at least 1000 draws".into()));
    }
    let d = model.dim();
    let xs = sample_covariates(model, n_eval, seed);
    let labels = classifier.classify_batch(&xs, d);
    let mut rng = rng_from_seed(seed ^ 0x5eed_1abe1);
    let mut errors = 0usize;
    let mut cond = 0.0;
    for (x, &c) in xs.chunks_exact(d).zip(&labels) {
        let m = model.m_true(x);
        let y = (rng.random::<f64>() < m) as u8;
        errors += (y != c) as usize;
        if c != plugin_classify(m) {
            cond += (2.0 * m - 1.0).abs();
        }
    }
    let empirical_risk = errors as f64 / n_eval as f64;
    let bayes = bayes_risk(model)?;
    Ok(RiskReport { empirical_risk, bayes_risk: bayes, excess: empirical_risk - bayes, conditional_excess: cond / n_eval as f64, n_eval })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginDiagnostic {
    pub t_values: Vec<f64>,
    /// `P{0 < |m(X) - 1/2| <= t}` for each `t`.
    pub probabilities: Vec<f64>,
    /// Least-squares slope of `log P` on `log t`, when every `P > 0`.
    pub exponent: Option<f64>,
}

pub fn margin_diagnostic(model: &SyntheticModel, t_values: &[f64]) -> Result<MarginDiagnostic> {
    require_classification(model)?;
    if t_values.iter().any(|&t| !(t > 0.0 && t <= 0.5)) {
        return Err(Error::InvalidConfig("margin levels must lie in (0, 1/2]".into()));
    }
    let d = model.dim();
    let grid = midpoint_grid(model, quadrature_axis(d)?);
    let n = (grid.len() / d) as f64;
    let gaps: Vec<f64> = grid.chunks_exact(d).map(|x| (model.m_true(x) - 0.5).abs()).collect();
    let probabilities: Vec<f64> = t_values.iter().map(|&t| gaps.iter().filter(|&&g| g > 0.0 && g <= t).count() as f64 / n).collect();
    let exponent = if t_values.len() >= 2 && probabilities.iter().all(|&p| p > 0.0) {
        let lx: Vec<f64> = t_values.iter().map(|&t| ln(t)).collect();
        let ly: Vec<f64> = probabilities.iter().map(|&p| ln(p)).collect();
        Some(crate::metrics::least_squares(&lx, &ly).0)
    } else {
        None
    };
    Ok(MarginDiagnostic { t_values: t_values.to_vec(), probabilities, exponent })
}
