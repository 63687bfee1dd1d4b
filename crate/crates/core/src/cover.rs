//! Positive bounded functions `phi: [-L, L] -> (0, B]` and finite sup-norm
//! covers of classes of them.
//!
//! The main construction covers the exponential class
//! `{ y -> exp(gamma * y) : |gamma| <= M }` with the grid
//! `{ 2 i eps / (L e^{ML}) : |i| <= floor(M L e^{ML} / eps) } u {-M, M}`.
//! Grid points that fall outside `[-M, M]` are clamped back into it and
//! duplicates removed, so every member stays inside the class and the cover
//! never gets larger than `2 floor(M L e^{ML} / eps) + 3`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{self, abs, exp, floor};
use crate::{Error, Result};

/// Grid resolution used to check positivity and the bound `B` at construction.
const CHECK_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum PhiKind {
    /// `exp(gamma * y)`.
    Exp { gamma: f64 },
    /// `scale * exp(gamma * y)`.
    ScaledExp { scale: f64, gamma: f64 },
    Constant(f64),
    /// Values on a uniform grid over `[-L, L]`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiFunction {
    kind: PhiKind,
    half_range: f64,
    bound: f64,
}

impl PhiFunction {
    /// Checks `0 < phi(y) <= bound` on a dense grid over `[-half_range, half_range]`.
    pub fn new(kind: PhiKind, half_range: f64, bound: f64) -> Result<Self> {
        if !(half_range.is_finite() && half_range > 0.0) {
            return Err(Error::InvalidModel(format!("phi domain half-width must be positive, got {half_range}")));
        }
        if !(bound > 0.0) {
            return Err(Error::InvalidModel(format!("phi bound must be positive, got {bound}")));
        }
        match &kind {
            PhiKind::Tabulated { values } if values.len() < 2 => {
                return Err(Error::InvalidModel("tabulated phi needs at least two values".into()));
            }
            PhiKind::Exp { gamma } | PhiKind::ScaledExp { gamma, .. } if !gamma.is_finite() => {
                return Err(Error::InvalidModel(format!("non-finite gamma {gamma}")));
            }
            _ => {}
        }
        let phi = PhiFunction { kind, half_range, bound };
        let slack = bound * (1.0 + 1e-12);
        for k in 0..=CHECK_GRID {
            let y = -half_range + 2.0 * half_range * k as f64 / CHECK_GRID as f64;
            let v = phi.eval(y);
            if !(v > 0.0 && v <= slack) {
                return Err(Error::InvalidModel(format!("phi({y}) = {v} is outside (0, {bound}]")));
            }
        }
        Ok(phi)
    }

    /// `exp(gamma y)` with its natural bound `exp(|gamma| L)`.
    pub fn exp_gamma(gamma: f64, half_range: f64) -> Result<Self> {
        Self::new(PhiKind::Exp { gamma }, half_range, exp(abs(gamma) * half_range))
    }

    pub fn scaled_exp(scale: f64, gamma: f64, half_range: f64) -> Result<Self> {
        Self::new(PhiKind::ScaledExp { scale, gamma }, half_range, scale * exp(abs(gamma) * half_range))
    }

    pub fn constant(c: f64, half_range: f64) -> Result<Self> {
        Self::new(PhiKind::Constant(c), half_range, c)
    }

    pub fn tabulated(values: Vec<f64>, half_range: f64, bound: f64) -> Result<Self> {
        Self::new(PhiKind::Tabulated { values }, half_range, bound)
    }

    /// Same function with a looser declared class bound `B`.
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if bound < self.bound {
            return Self::new(self.kind, self.half_range, bound);
        }
        self.bound = bound;
        Ok(self)
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match &self.kind {
            PhiKind::Exp { gamma } => exp(gamma * y),
            PhiKind::ScaledExp { scale, gamma } => scale * exp(gamma * y),
            PhiKind::Constant(c) => *c,
            PhiKind::Tabulated { values } => {
                let n = values.len() - 1;
                let t = ((y + self.half_range) / (2.0 * self.half_range)).clamp(0.0, 1.0) * n as f64;
                let k = (floor(t) as usize).min(n - 1);
                let w = t - k as f64;
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    pub fn kind(&self) -> &PhiKind {
        &self.kind
    }

    /// `gamma` for pure exponential members.
    pub fn gamma(&self) -> Option<f64> {
        match self.kind {
            PhiKind::Exp { gamma } => Some(gamma),
            _ => None,
        }
    }

    /// Declared class bound `B`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn half_range(&self) -> f64 {
        self.half_range
    }

    /// Short label used in risk tables.
    pub fn tag(&self) -> String {
        match &self.kind {
            PhiKind::Exp { gamma } => format!("{gamma}"),
            PhiKind::ScaledExp { scale, gamma } => format!("{scale}*exp({gamma}y)"),
            PhiKind::Constant(c) => format!("const({c})"),
            PhiKind::Tabulated { values } => format!("tabulated[{}]", values.len()),
        }
    }

    /// Sup-norm distance on a uniform `grid`-point mesh of `[-L, L]`, with the
    /// location where it is attained.
    pub fn sup_distance(&self, other: &PhiFunction, grid: usize) -> (f64, f64) {
        let l = self.half_range.min(other.half_range);
        let mut worst = (0.0, -l);
        for k in 0..grid {
            let y = -l + 2.0 * l * k as f64 / (grid - 1) as f64;
            let dist = abs(self.eval(y) - other.eval(y));
            if dist > worst.0 {
                worst = (dist, y);
            }
        }
        worst
    }
}

/// What a cover claims to cover.
#[derive(Debug, Clone, PartialEq)]
pub enum CoverClass {
    /// `{exp(gamma y) : |gamma| <= m_bound}` on `[-half_range, half_range]`.
    ExpFamily { m_bound: f64, half_range: f64 },
    /// A parametric family tabulated on a parameter grid.
    Grid { description: String },
    /// An explicit, user-supplied candidate list.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiCover {
    members: Vec<PhiFunction>,
    epsilon: f64,
    class: CoverClass,
}

impl PhiCover {
    /// Members are kept in the given order; selection breaks ties towards
    /// lower indices.
    pub fn from_members(members: Vec<PhiFunction>, epsilon: f64, class: CoverClass) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig("a cover needs at least one member".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("cover epsilon must be positive, got {epsilon}")));
        }
        let l = members[0].half_range;
        if members.iter().any(|m| m.half_range != l) {
            return Err(Error::InvalidConfig("cover members disagree on the response range".into()));
        }
        Ok(PhiCover { members, epsilon, class })
    }

    pub fn members(&self) -> &[PhiFunction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn class(&self) -> &CoverClass {
        &self.class
    }

    pub fn half_range(&self) -> f64 {
        self.members[0].half_range
    }

    /// Index of the member closest in sup-norm to `phi`.
    pub fn nearest(&self, phi: &PhiFunction, grid: usize) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, m) in self.members.iter().enumerate() {
            let (d, _) = m.sup_distance(phi, grid);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Sorted, clamped, de-duplicated `gamma` grid of the exponential cover.
pub fn exp_cover_gammas(m_bound: f64, half_range: f64, epsilon: f64) -> Vec<f64> {
    let scale = half_range * exp(m_bound * half_range);
    let k = floor(m_bound * scale / epsilon) as i64;
    let spacing = 2.0 * epsilon / scale;
    let mut gammas: Vec<f64> = (-k..=k).map(|i| (i as f64 * spacing).clamp(-m_bound, m_bound)).collect();
    gammas.push(-m_bound);
    gammas.push(m_bound);
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    gammas
}

pub fn build_exp_cover(m_bound: f64, half_range: f64, epsilon: f64) -> Result<PhiCover> {
    for (name, v) in [("M", m_bound), ("L", half_range), ("epsilon", epsilon)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidConfig(format!("cover {name} must be positive and finite, got {v}")));
        }
    }
    let class_bound = exp(m_bound * half_range);
    let members = exp_cover_gammas(m_bound, half_range, epsilon)
        .into_iter()
        .map(|g| PhiFunction::exp_gamma(g, half_range).and_then(|p| p.with_bound(class_bound)))
        .collect::<Result<Vec<_>>>()?;
    PhiCover::from_members(members, epsilon, CoverClass::ExpFamily { m_bound, half_range })
}

/// `2 floor(M L e^{ML} / eps) + 3`.
pub fn covering_number_bound(m_bound: f64, half_range: f64, epsilon: f64) -> u64 {
    2 * floor(m_bound * half_range * exp(m_bound * half_range) / epsilon) as u64 + 3
}

/// Tabulates `family(theta, y)` over the Cartesian grid with `steps[k]`
/// equispaced values of `theta_k` in `[lo[k], hi[k]]`. `epsilon` is the
/// claimed covering radius; check it with [`validate_cover`].
pub fn build_grid_cover(
    family: impl Fn(&[f64], f64) -> f64,
    lo: &[f64],
    hi: &[f64],
    steps: &[usize],
    half_range: f64,
    bound: f64,
    epsilon: f64,
    table_size: usize,
    description: String,
) -> Result<PhiCover> {
    if lo.len() != hi.len() || lo.len() != steps.len() || lo.is_empty() {
        return Err(Error::InvalidConfig("parameter box dimensions disagree".into()));
    }
    if steps.contains(&0) || table_size < 2 {
        return Err(Error::InvalidConfig("grid steps and table size must be positive".into()));
    }
    let total: usize = steps.iter().product();
    let mut members = Vec::with_capacity(total);
    let mut theta = alloc::vec![0.0; lo.len()];
    for flat in 0..total {
        let mut rem = flat;
        for k in (0..lo.len()).rev() {
            let i = rem % steps[k];
            rem /= steps[k];
            theta[k] = if steps[k] == 1 { lo[k] } else { lo[k] + (hi[k] - lo[k]) * i as f64 / (steps[k] - 1) as f64 };
        }
        let values = (0..table_size)
            .map(|t| family(&theta, -half_range + 2.0 * half_range * t as f64 / (table_size - 1) as f64))
            .collect();
        members.push(PhiFunction::tabulated(values, half_range, bound)?);
    }
    PhiCover::from_members(members, epsilon, CoverClass::Grid { description })
}

/// Result of checking a cover against a sample of class members.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverCheck {
    pub ok: bool,
    /// Largest nearest-member distance over the sample.
    pub worst_distance: f64,
    /// Sample index attaining it.
    pub worst_sample: usize,
    /// Response value where that distance is attained.
    pub worst_y: f64,
}

/// Every sampled member must have a cover member within
/// `epsilon * (1 + rel_slack)` in sup-norm, approximated on `y_grid_size`
/// equispaced points.
pub fn validate_cover(cover: &PhiCover, class_sample: &[PhiFunction], y_grid_size: usize, rel_slack: f64) -> CoverCheck {
    let grid = y_grid_size.max(2);
    let l = cover.half_range();
    let ys: Vec<f64> = (0..grid).map(|k| -l + 2.0 * l * k as f64 / (grid - 1) as f64).collect();
    let table: Vec<Vec<f64>> = cover.members.iter().map(|m| ys.iter().map(|&y| m.eval(y)).collect()).collect();
    let mut worst = CoverCheck { ok: true, worst_distance: 0.0, worst_sample: 0, worst_y: 0.0 };
    let mut hint = 0;
    let mut sample_vals = alloc::vec![0.0; grid];
    for (s, phi) in class_sample.iter().enumerate() {
        for (v, &y) in sample_vals.iter_mut().zip(&ys) {
            *v = phi.eval(y);
        }
        let mut best = (f64::INFINITY, 0.0);
        // start from the previous winner, then prune members once they exceed the best
        let start = hint;
        for idx in core::iter::once(start).chain((0..table.len()).filter(|&i| i != start)) {
            let row = &table[idx];
            let mut d = (0.0, ys[0]);
            for k in 0..grid {
                let diff = abs(row[k] - sample_vals[k]);
                if diff > d.0 {
                    d = (diff, ys[k]);
                    if d.0 >= best.0 {
                        break;
                    }
                }
            }
            if d.0 < best.0 {
                best = d;
                hint = idx;
            }
        }
        if best.0 > worst.worst_distance || s == 0 {
            worst.worst_distance = best.0;
            worst.worst_sample = s;
            worst.worst_y = best.1;
        }
    }
    worst.ok = worst.worst_distance <= cover.epsilon * (1.0 + rel_slack);
    worst
}

/// Cover radius as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSchedule {
    Fixed(f64),
    /// `scale * n^(-power)`.
    NPower { scale: f64, power: f64 },
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule::NPower { scale: 1.0, power: 0.5 }
    }
}

impl EpsilonSchedule {
    pub fn epsilon(&self, n: usize) -> f64 {
        match *self {
            EpsilonSchedule::Fixed(e) => e,
            EpsilonSchedule::NPower { scale, power } => scale * math::powf(n as f64, -power),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::E;

    #[test]
    fn bound_formula() {
        assert_eq!(covering_number_bound(1.0, 1.0, E), 5);
        assert_eq!(covering_number_bound(1.0, 1.0, 0.5), 13);
        assert_eq!(covering_number_bound(1.0, 1.0, 10.0 * E), 3);
        assert_eq!(covering_number_bound(2.0, 0.5, 100.0), 3);
    }

    #[test]
    fn exp_cover_at_eps_e() {
        // spacing 2: raw {-2, 0, 2} u {-1, 1} clamps to {-1, 0, 1}
        assert_eq!(exp_cover_gammas(1.0, 1.0, E), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn exp_cover_at_eps_half() {
        let g = exp_cover_gammas(1.0, 1.0, 0.5);
        let s = 1.0 / E; // 2 * 0.5 / e
        let want = [-1.0, -2.0 * s, -s, 0.0, s, 2.0 * s, 1.0];
        assert_eq!(g.len(), 7);
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn huge_epsilon_leaves_three_members() {
        let c = build_exp_cover(1.0, 1.0, 10.0 * E).unwrap();
        let g: Vec<f64> = c.members().iter().map(|m| m.gamma().unwrap()).collect();
        assert_eq!(g, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn phi_construction_checks() {
        assert!(PhiFunction::constant(0.0, 1.0).is_err());
        assert!(PhiFunction::new(PhiKind::Exp { gamma: 1.0 }, 1.0, 2.0).is_err());
        assert!(PhiFunction::new(PhiKind::Exp { gamma: 1.0 }, 1.0, E).is_ok());
        assert!(PhiFunction::tabulated(vec![1.0, -0.5, 1.0], 1.0, 2.0).is_err());
        let t = PhiFunction::tabulated(vec![1.0, 3.0], 2.0, 3.0).unwrap();
        assert!((t.eval(0.0) - 2.0).abs() < 1e-15);
        assert!((t.eval(2.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn self_cover_has_zero_distance() {
        let c = build_exp_cover(1.5, 1.0, 0.3).unwrap();
        let check = validate_cover(&c, c.members(), 200, 0.0);
        assert!(check.ok);
        assert_eq!(check.worst_distance, 0.0);
    }

    #[test]
    fn removing_a_middle_member_is_detected() {
        // near gamma = 0 the gap left behind costs about 2 eps / e^{ML}, which exceeds eps once ML < ln 2
        let c = build_exp_cover(0.5, 1.0, 0.02).unwrap();
        let mid = c.len() / 2;
        let mut members = c.members().to_vec();
        let removed = members.remove(mid);
        let holed = PhiCover::from_members(members, c.epsilon(), c.class().clone()).unwrap();
        let sample: Vec<PhiFunction> =
            (0..=1000).map(|k| PhiFunction::exp_gamma(-0.5 + k as f64 / 1000.0, 1.0).unwrap()).collect();
        let check = validate_cover(&holed, &sample, 400, 1e-3);
        assert!(!check.ok);
        let g = sample[check.worst_sample].gamma().unwrap();
        assert!((g - removed.gamma().unwrap()).abs() < 0.01, "worst at {g}");
        assert!((check.worst_y.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_cover_orders_lexicographically() {
        let c = build_grid_cover(
            |t, y| t[0] * exp(t[1] * y),
            &[1.0, -1.0],
            &[2.0, 1.0],
            &[2, 3],
            1.0,
            2.0 * E,
            0.5,
            257,
            "scaled exp".into(),
        )
        .unwrap();
        assert_eq!(c.len(), 6);
        assert!((c.members()[1].eval(1.0) - 1.0).abs() < 1e-12);
        assert!((c.members()[5].eval(0.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(EpsilonSchedule::Fixed(0.1).epsilon(100), 0.1);
        assert!((EpsilonSchedule::default().epsilon(400) - 0.05).abs() < 1e-15);
    }
}
