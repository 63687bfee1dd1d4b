//! Inverse-probability-weighted (Horvitz–Thompson) regression.
//!
//! At training row `i` the selection probability is estimated from the
//! leave-one-out ratios
//! `psi~(Z_i; phi) = sum_{j != i} Delta_j phi(Y_j) H_ij / sum_{j != i} H_ij` and
//! `eta~(Z_i) = sum_{j != i} Delta_j H_ij / sum_{j != i} H_ij` as
//! `[1 + (1 - eta~) / den * phi(Y_i)]^{-1}` with `den = max(psi~, floor)`
//! (`tilde`) or `den = max(pi0, psi~)` (`breve`). The regression estimate is
//! `sum Delta_i Y_i / pi_i K_i / sum K_i` over training rows.
//!
//! Validation rows are not training rows, so their probabilities use the
//! full training sums. A row with no kernel neighbours at all carries no
//! nonresponse evidence and gets probability 1.

use alloc::vec;
use alloc::vec::Vec;

use crate::cover::{PhiCover, PhiFunction};
use crate::data::{DataSplit, Dataset, Rows};
use crate::kernels::KernelSpec;
use crate::math::{clamp_abs, ratio_or_zero};
use crate::plan::Plan;
use crate::plugin::{phi_vectors, EstimateMeta, EstimatorKind, RegressionEstimate};
use crate::selection::{argmin_first, split_rows, SelectionResult, Smoothing};
use crate::{Error, Result, DENOMINATOR_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtVariant {
    Tilde,
    Breve,
}

impl HtVariant {
    pub fn name(self) -> &'static str {
        match self {
            HtVariant::Tilde => "tilde",
            HtVariant::Breve => "breve",
        }
    }

    fn kind(self) -> EstimatorKind {
        match self {
            HtVariant::Tilde => EstimatorKind::HtTilde,
            HtVariant::Breve => EstimatorKind::HtBreve,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtConfig {
    pub variant: HtVariant,
    /// Winsorization floor of the `breve` denominator.
    pub pi0: f64,
    pub smoothing: Smoothing,
    /// Use `h` (rather than `lambda`) as the bandwidth of `H`.
    pub share_bandwidth: bool,
}

impl HtConfig {
    pub fn new(variant: HtVariant, smoothing: Smoothing) -> Self {
        HtConfig { variant, pi0: 1e-3, smoothing, share_bandwidth: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi0 > 0.0 && self.pi0 <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("ht.pi0 must lie in (0, 1], got {}", self.pi0)));
        }
        Ok(())
    }

    /// `(h, bandwidth of H)` for a training sample of size `m`.
    fn bandwidths(&self, m: usize, d: usize, dz: usize) -> Result<(f64, f64)> {
        let (h, lambda) = self.smoothing.bandwidths(m, d, dz)?;
        Ok((h, if self.share_bandwidth { h } else { lambda }))
    }
}

/// Leave-one-out kernel ratios at a training row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooFunctionals {
    pub psi: f64,
    pub eta: f64,
    /// `sum_{j != i} H_ij`.
    pub mass: f64,
}

pub fn loo_functionals(train: &Rows, aux_kernel: &KernelSpec, h: f64, i: usize, phi: &PhiFunction) -> Result<LooFunctionals> {
    if train.len() < 2 {
        return Err(Error::InsufficientData("leave-one-out ratios need at least two training rows".into()));
    }
    if i >= train.len() {
        return Err(Error::InvalidConfig(alloc::format!("row {i} is not a training row")));
    }
    let (mut mass, mut psi, mut eta) = (0.0, 0.0, 0.0);
    for j in (0..train.len()).filter(|&j| j != i) {
        let w = aux_kernel.weight(train.z(i), train.z(j), h);
        if w > 0.0 {
            mass += w;
            if train.delta(j) != 0.0 {
                eta += w;
                psi += w * phi.eval(train.y(j));
            }
        }
    }
    Ok(LooFunctionals { psi: ratio_or_zero(psi, mass), eta: ratio_or_zero(eta, mass), mass })
}

/// `[1 + (1 - eta) / den * phi_y]^{-1}`; probability 1 on an empty window.
#[inline]
pub fn pi_from_functionals(psi: f64, eta: f64, mass: f64, phi_y: f64, variant: HtVariant, pi0: f64) -> f64 {
    if mass <= 0.0 {
        return 1.0;
    }
    let den = match variant {
        HtVariant::Tilde => psi.max(DENOMINATOR_FLOOR),
        HtVariant::Breve => psi.max(pi0),
    };
    1.0 / (1.0 + (1.0 - eta) / den * phi_y)
}

pub fn pi_tilde(train: &Rows, aux_kernel: &KernelSpec, h: f64, i: usize, phi: &PhiFunction) -> Result<f64> {
    let f = loo_functionals(train, aux_kernel, h, i, phi)?;
    Ok(pi_from_functionals(f.psi, f.eta, f.mass, phi.eval(train.y(i)), HtVariant::Tilde, 0.0))
}

pub fn pi_breve(train: &Rows, aux_kernel: &KernelSpec, h: f64, i: usize, phi: &PhiFunction, pi0: f64) -> Result<f64> {
    let f = loo_functionals(train, aux_kernel, h, i, phi)?;
    Ok(pi_from_functionals(f.psi, f.eta, f.mass, phi.eval(train.y(i)), HtVariant::Breve, pi0))
}

/// `sum Delta_i Y_i / pi_i K_i / sum K_i` with `pis[i]` the selection
/// probability of training row `i` (ignored where `Delta_i = 0`). Not clamped.
pub fn ht_m_hat(train: &Rows, kernel: &KernelSpec, h: f64, x: &[f64], pis: &[f64]) -> f64 {
    let mut mass = 0.0;
    let mut s = 0.0;
    for i in 0..train.len() {
        let w = kernel.weight(x, train.x(i), h);
        if w > 0.0 {
            mass += w;
            if train.delta(i) != 0.0 {
                s += w * train.y(i) / pis[i];
            }
        }
    }
    ratio_or_zero(s, mass)
}

/// Selection outcome plus the winsorization diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HtSelection {
    pub result: SelectionResult,
    /// Smallest `psi~` over every observed row with kernel neighbours, over
    /// all cover members (training rows leave-one-out, validation rows full).
    pub min_psi: f64,
}

struct Engine {
    train: Rows,
    val: Rows,
    h: f64,
    h_aux: f64,
    loo: Plan,
    eta_loo: Vec<f64>,
    k_plan: Plan,
    v_plan: Plan,
    eta_val: Vec<f64>,
}

/// Per-`phi` quantities.
struct Scored {
    risk: f64,
    weights: Vec<f64>,
    val_pi: Vec<f64>,
    min_psi: f64,
    min_train_pi: f64,
}

impl Engine {
    fn new(dataset: &Dataset, split: &DataSplit, config: &HtConfig) -> Result<Self> {
        config.validate()?;
        let (train, val) = split_rows(dataset, split)?;
        if train.len() < 2 {
            return Err(Error::InsufficientData("leave-one-out ratios need at least two training rows".into()));
        }
        let (h, h_aux) = config.bandwidths(train.len(), train.dim(), train.z_dim())?;
        let aux = &config.smoothing.aux_kernel;
        let dz = train.z_dim();
        let loo = Plan::build(aux, h_aux, train.z_flat(), train.z_flat(), dz, true);
        let eta_loo = ratios(&loo, train.deltas());
        let k_plan = Plan::build(&config.smoothing.kernel, h, val.x_flat(), train.x_flat(), train.dim(), false);
        let v_plan = Plan::build(aux, h_aux, val.z_flat(), train.z_flat(), dz, false);
        let eta_val = ratios(&v_plan, train.deltas());
        Ok(Engine { train, val, h, h_aux, loo, eta_loo, k_plan, v_plan, eta_val })
    }

    fn score(&self, phi: &PhiFunction, variant: HtVariant, pi0: f64) -> Scored {
        let (_, p2) = phi_vectors(&self.train, phi);
        let psi_loo = ratios(&self.loo, &p2);
        let mut min_psi = f64::INFINITY;
        let mut min_train_pi = 1.0f64;
        let mut weights = vec![0.0; self.train.len()];
        let loo_mass = self.loo.mass();
        for i in 0..self.train.len() {
            if self.train.delta(i) == 0.0 {
                continue;
            }
            if loo_mass[i] > 0.0 {
                min_psi = min_psi.min(psi_loo[i]);
            }
            let pi = pi_from_functionals(psi_loo[i], self.eta_loo[i], loo_mass[i], p2[i], variant, pi0);
            min_train_pi = min_train_pi.min(pi);
            weights[i] = self.train.y(i) / pi;
        }
        let num = self.k_plan.apply(&weights);
        let kmass = self.k_plan.mass();
        let psi_val = ratios(&self.v_plan, &p2);
        let vmass = self.v_plan.mass();
        let bound = self.train.bound();
        let mut val_pi = vec![1.0; self.val.len()];
        let mut total = 0.0;
        for i in 0..self.val.len() {
            if self.val.delta(i) == 0.0 {
                continue;
            }
            let y = self.val.y(i);
            if vmass[i] > 0.0 {
                min_psi = min_psi.min(psi_val[i]);
            }
            let pi = pi_from_functionals(psi_val[i], self.eta_val[i], vmass[i], phi.eval(y), variant, pi0);
            val_pi[i] = pi;
            let pred = clamp_abs(ratio_or_zero(num[i], kmass[i]), bound);
            let r = pred - y;
            total += r * r / pi;
        }
        Scored { risk: total / self.val.len() as f64, weights, val_pi, min_psi, min_train_pi }
    }
}

/// `plan.apply(v) / plan.mass()`, 0 on empty windows.
fn ratios(plan: &Plan, v: &[f64]) -> Vec<f64> {
    plan.apply(v).iter().zip(plan.mass()).map(|(s, m)| ratio_or_zero(*s, *m)).collect()
}

fn select_with(engine: &Engine, cover: &PhiCover, config: &HtConfig) -> (HtSelection, Scored) {
    let mut risks = Vec::with_capacity(cover.len());
    let mut min_psi = f64::INFINITY;
    let mut best: Option<Scored> = None;
    for phi in cover.members() {
        let s = engine.score(phi, config.variant, config.pi0);
        risks.push(s.risk);
        min_psi = min_psi.min(s.min_psi);
        let idx = risks.len() - 1;
        if argmin_first(&risks) == idx {
            best = Some(s);
        }
    }
    let chosen_index = argmin_first(&risks);
    let result = SelectionResult { chosen_index, chosen_phi: cover.members()[chosen_index].clone(), risks };
    (HtSelection { result, min_psi }, best.expect("cover is nonempty"))
}

pub fn select_phi_ht(dataset: &Dataset, split: &DataSplit, cover: &PhiCover, config: &HtConfig) -> Result<HtSelection> {
    let engine = Engine::new(dataset, split, config)?;
    Ok(select_with(&engine, cover, config).0)
}

/// Estimated selection probabilities of the validation rows for one `phi`
/// (1 where the response is missing).
pub fn validation_pis(dataset: &Dataset, split: &DataSplit, phi: &PhiFunction, config: &HtConfig) -> Result<Vec<f64>> {
    let engine = Engine::new(dataset, split, config)?;
    Ok(engine.score(phi, config.variant, config.pi0).val_pi)
}

/// Inverse-weighted smoother on the training rows at the selected `phi`,
/// reported clamped to `[-L, L]`; [`RegressionEstimate::predict_raw`] keeps
/// the unclamped value.
pub fn fit_ht(dataset: &Dataset, split: &DataSplit, cover: &PhiCover, config: &HtConfig) -> Result<RegressionEstimate> {
    let engine = Engine::new(dataset, split, config)?;
    let (sel, best) = select_with(&engine, cover, config);
    let mut meta = EstimateMeta::new(config.variant.kind(), engine.h);
    meta.lambda = Some(engine.h_aux);
    meta.chosen_index = Some(sel.result.chosen_index);
    meta.risks = sel.result.risks;
    meta.pi0 = (config.variant == HtVariant::Breve).then_some(config.pi0);
    meta.min_train_pi = Some(best.min_train_pi);
    Ok(RegressionEstimate::weighted(engine.train, config.smoothing.kernel, engine.h, best.weights, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{build_exp_cover, CoverClass};
    use crate::data::{rng_from_seed, Observation};
    use crate::kernels::BandwidthPolicy;
    use crate::plugin::{nw_estimate, Regressor};
    use rand::Rng;

    fn rows1(pts: &[(f64, f64, u8)]) -> Rows {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let d: Vec<u8> = pts.iter().map(|p| p.2).collect();
        Rows::from_parts(1, &[0], x, &y, &d, 1.0).unwrap()
    }

    const BOX: KernelSpec = KernelSpec::boxcar(1.0);

    #[test]
    fn loo_two_rows() {
        let r = rows1(&[(0.0, 0.5, 1), (0.1, -0.5, 1)]);
        let phi = PhiFunction::exp_gamma(1.0, 1.0).unwrap();
        let f = loo_functionals(&r, &BOX, 1.0, 0, &phi).unwrap();
        assert_eq!(f.eta, 1.0);
        assert_eq!(f.psi, (-0.5f64).exp());
        assert!(loo_functionals(&rows1(&[(0.0, 0.1, 1)]), &BOX, 1.0, 0, &phi).is_err());
    }

    #[test]
    fn loo_unit_phi_and_direct_sum() {
        let r = rows1(&[(0.0, 0.5, 1), (0.1, -0.5, 0), (0.2, 0.2, 1), (0.3, 0.8, 1), (5.0, 0.1, 1)]);
        let one = PhiFunction::constant(1.0, 1.0).unwrap();
        for i in 0..4 {
            let f = loo_functionals(&r, &BOX, 1.0, i, &one).unwrap();
            assert_eq!(f.psi, f.eta);
        }
        let phi = PhiFunction::exp_gamma(1.0, 1.0).unwrap();
        let f = loo_functionals(&r, &BOX, 1.0, 2, &phi).unwrap();
        assert_eq!(f.mass, 3.0);
        assert!((f.psi - (0.5f64.exp() + 0.8f64.exp()) / 3.0).abs() < 1e-15);
        assert!((f.eta - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn probability_formula() {
        assert_eq!(pi_from_functionals(0.3, 1.0, 2.0, 2.0, HtVariant::Tilde, 1e-3), 1.0);
        assert_eq!(pi_from_functionals(0.3, 1.0, 2.0, 2.0, HtVariant::Breve, 1e-3), 1.0);
        assert_eq!(pi_from_functionals(0.5, 0.2, 2.0, 1.3, HtVariant::Tilde, 1e-3), pi_from_functionals(0.5, 0.2, 2.0, 1.3, HtVariant::Breve, 1e-3));
        let b = pi_from_functionals(1e-6, 0.5, 1.0, 1.0, HtVariant::Breve, 1e-3);
        let t = pi_from_functionals(1e-6, 0.5, 1.0, 1.0, HtVariant::Tilde, 1e-3);
        assert_eq!(b, 1.0 / (1.0 + 0.5 / 1e-3));
        assert_eq!(t, 1.0 / (1.0 + 0.5 / 1e-6));
        assert!(b > t);
        assert_eq!(pi_from_functionals(0.0, 0.0, 0.0, 1.0, HtVariant::Tilde, 1e-3), 1.0);
    }

    #[test]
    fn weighted_ratio_oracle() {
        let r = rows1(&[(0.0, 0.5, 1), (0.1, -0.5, 0), (0.2, 0.2, 1), (0.3, 0.8, 1), (0.9, 0.1, 1)]);
        let pis = [0.5, 0.1, 0.25, 0.8, 0.9];
        let want = (0.5 / 0.5 + 0.2 / 0.25 + 0.8 / 0.8) / 4.0;
        assert!((ht_m_hat(&r, &BOX, 0.35, &[0.1], &pis) - want).abs() < 1e-15);
        let ones = [1.0; 5];
        let full = rows1(&[(0.0, 0.5, 1), (0.1, -0.5, 1), (0.2, 0.2, 1)]);
        assert_eq!(ht_m_hat(&full, &BOX, 1.0, &[0.1], &ones), nw_estimate(&full, &BOX, 1.0, &[0.1]));
    }

    fn random_ds(seed: u64, n: usize, observed: f64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let obs = (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                let y = rng.random::<f64>() - 0.5;
                if rng.random_bool(observed) {
                    Observation::observed(vec![x], y)
                } else {
                    Observation::missing(vec![x])
                }
            })
            .collect();
        Dataset::new(obs, 1, vec![0], 1.0).unwrap()
    }

    fn config(variant: HtVariant) -> HtConfig {
        HtConfig::new(variant, Smoothing::shared(BOX, BandwidthPolicy::Fixed { h0: 0.1 }))
    }

    #[test]
    fn fully_observed_reduces_to_nw() {
        let ds = random_ds(2, 80, 1.0);
        let split = DataSplit::random(80, 0.5, 3).unwrap();
        let cover = build_exp_cover(1.0, 1.0, 0.3).unwrap();
        let train = Rows::subset(&ds, split.training());
        for v in [HtVariant::Tilde, HtVariant::Breve] {
            let est = fit_ht(&ds, &split, &cover, &config(v)).unwrap();
            for k in 0..20 {
                let x = [k as f64 / 19.0];
                assert!((est.predict(&x) - nw_estimate(&train, &BOX, 0.1, &x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn engine_matches_direct_functions() {
        let ds = random_ds(5, 60, 0.6);
        let split = DataSplit::random(60, 0.5, 9).unwrap();
        let phi = PhiFunction::exp_gamma(0.6, 1.0).unwrap();
        let cover = PhiCover::from_members(vec![phi.clone()], 0.1, CoverClass::Explicit).unwrap();
        let cfg = config(HtVariant::Breve);
        let train = Rows::subset(&ds, split.training());
        let pis: Vec<f64> = (0..train.len()).map(|i| pi_breve(&train, &BOX, 0.1, i, &phi, 1e-3).unwrap()).collect();
        let est = fit_ht(&ds, &split, &cover, &cfg).unwrap();
        for k in 0..15 {
            let x = [k as f64 / 14.0];
            assert!((est.predict_raw(&x) - ht_m_hat(&train, &BOX, 0.1, &x, &pis)).abs() < 1e-12);
        }
        // validation risk by direct enumeration with full training sums
        let mut want = 0.0;
        for &i in split.validation() {
            let o = &ds.observations()[i];
            if let Some(y) = o.y {
                let (mut m, mut p, mut e) = (0.0, 0.0, 0.0);
                for j in 0..train.len() {
                    let w = BOX.weight(&o.x, train.z(j), 0.1);
                    m += w;
                    if train.delta(j) != 0.0 {
                        e += w;
                        p += w * phi.eval(train.y(j));
                    }
                }
                let pi = pi_from_functionals(ratio_or_zero(p, m), ratio_or_zero(e, m), m, phi.eval(y), HtVariant::Breve, 1e-3);
                let r = clamp_abs(ht_m_hat(&train, &BOX, 0.1, &o.x, &pis), 1.0) - y;
                want += r * r / pi;
            }
        }
        want /= split.validation().len() as f64;
        let got = select_phi_ht(&ds, &split, &cover, &cfg).unwrap().result.risks[0];
        assert!((got - want).abs() < 1e-10 * want.max(1.0), "{got} vs {want}");
    }

    #[test]
    fn breve_dominates_tilde() {
        let ds = random_ds(11, 120, 0.4);
        let split = DataSplit::random(120, 0.5, 1).unwrap();
        let phi = PhiFunction::exp_gamma(-1.0, 1.0).unwrap();
        let t = validation_pis(&ds, &split, &phi, &config(HtVariant::Tilde)).unwrap();
        let b = validation_pis(&ds, &split, &phi, &config(HtVariant::Breve)).unwrap();
        assert!(t.iter().zip(&b).all(|(t, b)| b >= t));
    }
}
