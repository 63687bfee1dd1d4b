//! Data-splitting selection of `phi` from a finite cover.
//!
//! For each candidate `phi` the training rows give
//! * a kernel estimate of `exp(g(z)) = E[1 - Delta | z] / E[Delta phi(Y) | z]`
//!   with the auxiliary kernel `H` and bandwidth `lambda`, hence `pi_hat_phi`;
//! * the fixed-`phi` plug-in predictor `m_hat_m(.; phi)` with kernel `K`, `h`.
//!
//! The validation rows score `phi` by the inverse-weighted squared error
//! `l^{-1} sum Delta_i / pi_hat_phi(Z_i, Y_i) (m_hat_m(X_i; phi) - Y_i)^2`,
//! and the first minimizer in cover order is selected.

use alloc::vec::Vec;

use crate::cover::{PhiCover, PhiFunction};
use crate::data::{DataSplit, Dataset, Rows};
use crate::kernels::{BandwidthPolicy, KernelSpec};
use crate::math::ratio_or_zero;
use crate::plan::Plan;
use crate::plugin::{combine, observed_vectors, phi_vectors, EstimateMeta, EstimatorKind, RegressionEstimate};
use crate::{Error, Result, DENOMINATOR_FLOOR};

/// Kernel `K` with bandwidth `h` for the regression smoother and kernel `H`
/// with bandwidth `lambda` for the selection probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub kernel: KernelSpec,
    pub bandwidth: BandwidthPolicy,
    pub aux_kernel: KernelSpec,
    pub aux_bandwidth: BandwidthPolicy,
}

impl Smoothing {
    /// Box kernels and `n^(-1/(d+4))` bandwidths for both smoothers.
    pub fn classical(h0: f64, d: usize) -> Self {
        Smoothing {
            kernel: KernelSpec::boxcar(1.0),
            bandwidth: BandwidthPolicy::classical(h0, d),
            aux_kernel: KernelSpec::boxcar(1.0),
            aux_bandwidth: BandwidthPolicy::classical(h0, d),
        }
    }

    /// Same kernel and policy for `K` and `H`.
    pub fn shared(kernel: KernelSpec, bandwidth: BandwidthPolicy) -> Self {
        Smoothing { kernel, bandwidth, aux_kernel: kernel, aux_bandwidth: bandwidth }
    }

    /// `(h, lambda)` for a training sample of size `m`.
    pub fn bandwidths(&self, m: usize, d: usize, dz: usize) -> Result<(f64, f64)> {
        Ok((self.bandwidth.bandwidth(m, d)?, self.aux_bandwidth.bandwidth(m, dz)?))
    }
}

/// Floors the denominator of the `exp(g)` ratio.
#[inline]
pub(crate) fn guarded_ratio(num: f64, den: f64) -> f64 {
    num / if den <= DENOMINATOR_FLOOR { DENOMINATOR_FLOOR } else { den }
}

/// `sum (1 - Delta_j) H_j / sum Delta_j phi(Y_j) H_j` over training rows,
/// with the denominator floored at [`DENOMINATOR_FLOOR`].
pub fn estimate_exp_g(train: &Rows, aux_kernel: &KernelSpec, lambda: f64, z: &[f64], phi: &PhiFunction) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..train.len() {
        let w = aux_kernel.weight(z, train.z(j), lambda);
        if w > 0.0 {
            if train.delta(j) == 0.0 {
                num += w;
            } else {
                den += w * phi.eval(train.y(j));
            }
        }
    }
    guarded_ratio(num, den)
}

/// `1 / (1 + exp_g_hat(z) phi(y))`.
pub fn pi_hat(train: &Rows, aux_kernel: &KernelSpec, lambda: f64, z: &[f64], y: f64, phi: &PhiFunction) -> f64 {
    1.0 / (1.0 + estimate_exp_g(train, aux_kernel, lambda, z, phi) * phi.eval(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub chosen_index: usize,
    pub chosen_phi: PhiFunction,
    /// Validation risk per cover member, in cover order.
    pub risks: Vec<f64>,
}

/// First index attaining the minimum; NaN never wins.
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

pub(crate) fn split_rows(dataset: &Dataset, split: &DataSplit) -> Result<(Rows, Rows)> {
    if split.training().len() + split.validation().len() != dataset.len() {
        return Err(Error::InvalidSplit("split does not match the dataset size".into()));
    }
    Ok((Rows::subset(dataset, split.training()), Rows::subset(dataset, split.validation())))
}

/// Everything about a `(dataset, split, smoothing)` triple that does not
/// depend on `phi`.
struct Engine {
    train: Rows,
    val: Rows,
    h: f64,
    lambda: f64,
    k_plan: Plan,
    h_plan: Plan,
    eta1: Vec<f64>,
    eta2: Vec<f64>,
    /// `sum (1 - Delta_j) H_j` at each validation `Z`.
    nonresponse: Vec<f64>,
}

impl Engine {
    fn new(dataset: &Dataset, split: &DataSplit, smoothing: &Smoothing) -> Result<Self> {
        let (train, val) = split_rows(dataset, split)?;
        let (h, lambda) = smoothing.bandwidths(train.len(), train.dim(), train.z_dim())?;
        let k_plan = Plan::build(&smoothing.kernel, h, val.x_flat(), train.x_flat(), train.dim(), false);
        let h_plan = Plan::build(&smoothing.aux_kernel, lambda, val.z_flat(), train.z_flat(), train.z_dim(), false);
        let (dy, dl) = observed_vectors(&train);
        let mass = k_plan.mass();
        let eta1 = k_plan.apply(&dy).iter().zip(mass).map(|(s, m)| ratio_or_zero(*s, *m)).collect();
        let eta2 = k_plan.apply(&dl).iter().zip(mass).map(|(s, m)| ratio_or_zero(*s, *m)).collect();
        let missing: Vec<f64> = dl.iter().map(|d| 1.0 - d).collect();
        let nonresponse = h_plan.apply(&missing);
        Ok(Engine { train, val, h, lambda, k_plan, h_plan, eta1, eta2, nonresponse })
    }

    /// Validation risk and the number of validation queries whose
    /// `psi_1 / psi_2` ratio fell back to 0 despite kernel mass.
    fn risk(&self, phi: &PhiFunction) -> (f64, usize) {
        let (p1, p2) = phi_vectors(&self.train, phi);
        let s1 = self.k_plan.apply(&p1);
        let s2 = self.k_plan.apply(&p2);
        let den = self.h_plan.apply(&p2);
        let mass = self.k_plan.mass();
        let bound = self.train.bound();
        let mut total = 0.0;
        let mut zero_ratio = 0;
        for i in 0..self.val.len() {
            let m = mass[i];
            if m > 0.0 && s2[i] == 0.0 {
                zero_ratio += 1;
            }
            if self.val.delta(i) == 0.0 {
                continue;
            }
            let pred = combine(self.eta1[i], self.eta2[i], ratio_or_zero(s1[i], m), ratio_or_zero(s2[i], m), bound);
            let y = self.val.y(i);
            let odds = guarded_ratio(self.nonresponse[i], den[i]) * phi.eval(y);
            let r = pred - y;
            // Delta / pi_hat = 1 + odds
            total += (1.0 + odds) * r * r;
        }
        (total / self.val.len() as f64, zero_ratio)
    }
}

/// Inverse-weighted validation risk of a single `phi`.
pub fn empirical_risk(dataset: &Dataset, split: &DataSplit, smoothing: &Smoothing, phi: &PhiFunction) -> Result<f64> {
    Ok(Engine::new(dataset, split, smoothing)?.risk(phi).0)
}

pub fn select_phi(dataset: &Dataset, split: &DataSplit, cover: &PhiCover, smoothing: &Smoothing) -> Result<SelectionResult> {
    let engine = Engine::new(dataset, split, smoothing)?;
    Ok(select_with(&engine, cover).0)
}

fn select_with(engine: &Engine, cover: &PhiCover) -> (SelectionResult, usize) {
    let scored: Vec<(f64, usize)> = cover.members().iter().map(|phi| engine.risk(phi)).collect();
    let risks: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let chosen_index = argmin_first(&risks);
    let result = SelectionResult { chosen_index, chosen_phi: cover.members()[chosen_index].clone(), risks };
    (result, scored[chosen_index].1)
}

/// The fixed-`phi` predictor on the training rows at the selected `phi`.
pub fn fit(dataset: &Dataset, split: &DataSplit, cover: &PhiCover, smoothing: &Smoothing) -> Result<RegressionEstimate> {
    let engine = Engine::new(dataset, split, smoothing)?;
    let (sel, zero_ratio) = select_with(&engine, cover);
    let mut meta = EstimateMeta::new(EstimatorKind::SelectPhi, engine.h);
    meta.lambda = Some(engine.lambda);
    meta.chosen_index = Some(sel.chosen_index);
    meta.risks = sel.risks;
    meta.zero_ratio_count = zero_ratio;
    Ok(RegressionEstimate::plugin_phi(engine.train, smoothing.kernel, engine.h, sel.chosen_phi, meta))
}
