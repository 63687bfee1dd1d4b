//! Nadaraya–Watson smoothing and the plug-in estimators built from kernel
//! ratios of observed responses.
//!
//! With `eta_k(x, t) = sum Delta_i Y_i^{2-k} e^{t Y_i} K_i / sum K_i` the
//! `gamma`-parameterized estimator is
//! `eta_1(x, 0) + [eta_1(x, g) / eta_2(x, g)] (1 - eta_2(x, 0))`, and the
//! fixed-`phi` estimator replaces `e^{g y}` by `phi(y)`. Every ratio with an
//! empty denominator is 0, the inner ratio is clamped to `[-L, L]` and so is
//! the result.

use alloc::vec;
use alloc::vec::Vec;

use crate::cover::PhiFunction;
use crate::data::Rows;
use crate::kernels::KernelSpec;
use crate::math::{clamp_abs, exp, ratio_or_zero};
use crate::plan::Plan;

/// `(sum_i K_i, sum_i K_i v_i)` over all rows.
fn kernel_sums(rows: &Rows, kernel: &KernelSpec, h: f64, x: &[f64], v: impl Fn(usize) -> f64) -> (f64, f64) {
    let mut mass = 0.0;
    let mut s = 0.0;
    for i in 0..rows.len() {
        let w = kernel.weight(x, rows.x(i), h);
        if w > 0.0 {
            mass += w;
            s += w * v(i);
        }
    }
    (mass, s)
}

/// `eta_1 + clamp(psi_1 / psi_2) (1 - eta_2)`, clamped to `[-L, L]`.
#[inline]
pub(crate) fn combine(eta1: f64, eta2: f64, psi1: f64, psi2: f64, bound: f64) -> f64 {
    let ratio = clamp_abs(ratio_or_zero(psi1, psi2), bound);
    clamp_abs(eta1 + ratio * (1.0 - eta2), bound)
}

/// Classical smoother over the observed rows; rows with `Delta = 0` are
/// skipped, so on incomplete data this is the complete-case estimator.
pub fn nw_estimate(rows: &Rows, kernel: &KernelSpec, h: f64, x: &[f64]) -> f64 {
    let mut mass = 0.0;
    let mut s = 0.0;
    for i in 0..rows.len() {
        if rows.delta(i) == 0.0 {
            continue;
        }
        let w = kernel.weight(x, rows.x(i), h);
        if w > 0.0 {
            mass += w;
            s += w * rows.y(i);
        }
    }
    ratio_or_zero(s, mass)
}

/// `sum Delta_i Y_i^{2-k} e^{t Y_i} K_i / sum K_i` for `k` in `{1, 2}`.
pub fn eta_hat(rows: &Rows, kernel: &KernelSpec, h: f64, x: &[f64], t: f64, k: u8) -> f64 {
    let (mass, s) = kernel_sums(rows, kernel, h, x, |i| {
        let y = rows.y(i);
        let base = if k == 1 { y } else { 1.0 };
        rows.delta(i) * base * exp(t * y)
    });
    ratio_or_zero(s, mass)
}

pub fn m_hat_gamma(rows: &Rows, kernel: &KernelSpec, h: f64, x: &[f64], gamma: f64) -> f64 {
    combine(
        eta_hat(rows, kernel, h, x, 0.0, 1),
        eta_hat(rows, kernel, h, x, 0.0, 2),
        eta_hat(rows, kernel, h, x, gamma, 1),
        eta_hat(rows, kernel, h, x, gamma, 2),
        rows.bound(),
    )
}

/// `sum Delta_i Y_i^{2-k} phi(Y_i) K_i / sum K_i` over training rows.
pub fn psi_hat_m(train: &Rows, kernel: &KernelSpec, h: f64, x: &[f64], phi: &PhiFunction, k: u8) -> f64 {
    let (mass, s) = kernel_sums(train, kernel, h, x, |i| {
        if train.delta(i) == 0.0 {
            return 0.0;
        }
        let y = train.y(i);
        let base = if k == 1 { y } else { 1.0 };
        base * phi.eval(y)
    });
    ratio_or_zero(s, mass)
}

pub fn eta_hat_m(train: &Rows, kernel: &KernelSpec, h: f64, x: &[f64], k: u8) -> f64 {
    eta_hat(train, kernel, h, x, 0.0, k)
}

pub fn m_hat_m_phi(train: &Rows, kernel: &KernelSpec, h: f64, x: &[f64], phi: &PhiFunction) -> f64 {
    combine(
        eta_hat_m(train, kernel, h, x, 1),
        eta_hat_m(train, kernel, h, x, 2),
        psi_hat_m(train, kernel, h, x, phi, 1),
        psi_hat_m(train, kernel, h, x, phi, 2),
        train.bound(),
    )
}

/// Per-row weight vectors `(Delta Y, Delta)` and, for a given `phi`,
/// `(Delta Y phi(Y), Delta phi(Y))`.
pub(crate) fn observed_vectors(rows: &Rows) -> (Vec<f64>, Vec<f64>) {
    (rows.ys().iter().zip(rows.deltas()).map(|(y, d)| y * d).collect(), rows.deltas().to_vec())
}

pub(crate) fn phi_vectors(rows: &Rows, phi: &PhiFunction) -> (Vec<f64>, Vec<f64>) {
    let mut v1 = vec![0.0; rows.len()];
    let mut v2 = vec![0.0; rows.len()];
    for i in 0..rows.len() {
        if rows.delta(i) != 0.0 {
            let p = phi.eval(rows.y(i));
            v1[i] = rows.y(i) * p;
            v2[i] = p;
        }
    }
    (v1, v2)
}

/// Which estimator produced a [`RegressionEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    NwFull,
    CompleteCase,
    PluginGamma,
    SelectPhi,
    HtTilde,
    HtBreve,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::NwFull => "nw_full",
            EstimatorKind::CompleteCase => "complete_case",
            EstimatorKind::PluginGamma => "plugin_gamma",
            EstimatorKind::SelectPhi => "select_phi",
            EstimatorKind::HtTilde => "ht_tilde",
            EstimatorKind::HtBreve => "ht_breve",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::NwFull, Self::CompleteCase, Self::PluginGamma, Self::SelectPhi, Self::HtTilde, Self::HtBreve].into_iter().find(|k| k.name() == s)
    }
}

/// Fitting record attached to every estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMeta {
    pub kind: EstimatorKind,
    pub h: f64,
    /// Bandwidth of the auxiliary kernel, when one was used.
    pub lambda: Option<f64>,
    pub chosen_index: Option<usize>,
    /// Validation risk of every cover member, in cover order.
    pub risks: Vec<f64>,
    /// Winsorization constant of the `breve` variant.
    pub pi0: Option<f64>,
    /// Smallest estimated selection probability among weighted training rows.
    pub min_train_pi: Option<f64>,
    /// Queries whose inner ratio had kernel mass but a zero denominator, at fit time.
    pub zero_ratio_count: usize,
}

impl EstimateMeta {
    pub(crate) fn new(kind: EstimatorKind, h: f64) -> Self {
        EstimateMeta { kind, h, lambda: None, chosen_index: None, risks: Vec::new(), pi0: None, min_train_pi: None, zero_ratio_count: 0 }
    }
}

/// Anything that maps covariate vectors to predictions.
pub trait Regressor {
    fn predict(&self, x: &[f64]) -> f64;

    /// Predictions for row-major queries of dimension `dim`.
    fn predict_batch(&self, xs: &[f64], dim: usize) -> Vec<f64> {
        xs.chunks_exact(dim).map(|x| self.predict(x)).collect()
    }
}

impl<F: Fn(&[f64]) -> f64> Regressor for F {
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Form {
    /// Smoother of `values` weighted by `Delta` (complete case / full NW).
    Nw,
    /// `eta`/`psi` combination with `phi(y)` weights.
    Plugin { phi: PhiFunction },
    /// `gamma` form; kept apart so `e^{gamma y}` is evaluated exactly as in [`m_hat_gamma`].
    Gamma { gamma: f64 },
    /// `sum w_i K_i / sum K_i` with fixed per-row weights.
    Weighted { weights: Vec<f64> },
}

/// A fitted regression function, always reported in `[-L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionEstimate {
    rows: Rows,
    kernel: KernelSpec,
    h: f64,
    form: Form,
    meta: EstimateMeta,
}

impl RegressionEstimate {
    pub(crate) fn nw(rows: Rows, kernel: KernelSpec, h: f64, kind: EstimatorKind) -> Self {
        RegressionEstimate { rows, kernel, h, form: Form::Nw, meta: EstimateMeta::new(kind, h) }
    }

    pub(crate) fn plugin_phi(rows: Rows, kernel: KernelSpec, h: f64, phi: PhiFunction, meta: EstimateMeta) -> Self {
        RegressionEstimate { rows, kernel, h, form: Form::Plugin { phi }, meta }
    }

    pub(crate) fn weighted(rows: Rows, kernel: KernelSpec, h: f64, weights: Vec<f64>, meta: EstimateMeta) -> Self {
        RegressionEstimate { rows, kernel, h, form: Form::Weighted { weights }, meta }
    }

    /// Nadaraya–Watson on every row; all responses must be observed.
    pub fn fit_nw_full(rows: Rows, kernel: KernelSpec, h: f64) -> crate::Result<Self> {
        if rows.deltas().contains(&0.0) {
            return Err(crate::Error::InvalidData("nw_full needs fully observed responses".into()));
        }
        Ok(Self::nw(rows, kernel, h, EstimatorKind::NwFull))
    }

    /// Smoother over the observed rows only.
    pub fn fit_complete_case(rows: Rows, kernel: KernelSpec, h: f64) -> Self {
        Self::nw(rows, kernel, h, EstimatorKind::CompleteCase)
    }

    /// `gamma`-parameterized plug-in estimator over all given rows.
    pub fn fit_plugin_gamma(rows: Rows, kernel: KernelSpec, h: f64, gamma: f64) -> Self {
        RegressionEstimate { rows, kernel, h, form: Form::Gamma { gamma }, meta: EstimateMeta::new(EstimatorKind::PluginGamma, h) }
    }

    pub fn meta(&self) -> &EstimateMeta {
        &self.meta
    }

    pub fn rows(&self) -> &Rows {
        &self.rows
    }

    pub fn bound(&self) -> f64 {
        self.rows.bound()
    }

    /// Prediction before the final clamp to `[-L, L]`; differs from
    /// [`Regressor::predict`] only for inverse-weighted estimates.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        match &self.form {
            Form::Weighted { weights } => {
                let (mass, s) = kernel_sums(&self.rows, &self.kernel, self.h, x, |i| weights[i]);
                ratio_or_zero(s, mass)
            }
            _ => self.predict(x),
        }
    }

    /// Batched predictions through a precomputed weight plan; agrees with
    /// [`Regressor::predict`] up to summation order.
    fn predict_planned(&self, xs: &[f64]) -> Vec<f64> {
        let d = self.rows.dim();
        let plan = Plan::build(&self.kernel, self.h, xs, self.rows.x_flat(), d, false);
        let mass = plan.mass();
        let bound = self.rows.bound();
        let (dy, dl) = observed_vectors(&self.rows);
        match &self.form {
            Form::Nw => {
                let s = plan.apply(&dy);
                let c = plan.apply(&dl);
                s.iter().zip(&c).map(|(a, b)| ratio_or_zero(*a, *b)).collect()
            }
            Form::Plugin { .. } | Form::Gamma { .. } => {
                let (p1, p2) = match &self.form {
                    Form::Plugin { phi } => phi_vectors(&self.rows, phi),
                    Form::Gamma { gamma } => {
                        let e = PhiFunction::exp_gamma(*gamma, bound).ok();
                        match e {
                            Some(phi) => phi_vectors(&self.rows, &phi),
                            None => return xs.chunks_exact(d).map(|x| self.predict(x)).collect(),
                        }
                    }
                    _ => unreachable!(),
                };
                let e1 = plan.apply(&dy);
                let e2 = plan.apply(&dl);
                let s1 = plan.apply(&p1);
                let s2 = plan.apply(&p2);
                (0..mass.len())
                    .map(|q| {
                        let m = mass[q];
                        combine(ratio_or_zero(e1[q], m), ratio_or_zero(e2[q], m), ratio_or_zero(s1[q], m), ratio_or_zero(s2[q], m), bound)
                    })
                    .collect()
            }
            Form::Weighted { weights } => {
                let s = plan.apply(weights);
                s.iter().zip(mass).map(|(a, m)| clamp_abs(ratio_or_zero(*a, *m), bound)).collect()
            }
        }
    }
}

impl Regressor for RegressionEstimate {
    fn predict(&self, x: &[f64]) -> f64 {
        let (rows, k, h) = (&self.rows, &self.kernel, self.h);
        match &self.form {
            Form::Nw => nw_estimate(rows, k, h, x),
            Form::Plugin { phi } => m_hat_m_phi(rows, k, h, x, phi),
            Form::Gamma { gamma } => m_hat_gamma(rows, k, h, x, *gamma),
            Form::Weighted { .. } => clamp_abs(self.predict_raw(x), rows.bound()),
        }
    }

    fn predict_batch(&self, xs: &[f64], dim: usize) -> Vec<f64> {
        debug_assert_eq!(dim, self.rows.dim());
        self.predict_planned(xs)
    }
}
