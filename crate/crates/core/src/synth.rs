//! Synthetic joint laws for `(X, Y, Delta)` with known regression function,
//! nonresponse mechanism and positivity bound.
//!
//! Components are closed-form so that the range of `m` and the smallest
//! selection probability can be computed exactly from the parameters. A model
//! is validated once at construction and is immutable afterwards.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cover::PhiFunction;
use crate::data::{rng_from_seed, validate_z_coords, Dataset, Observation};
use crate::math::{exp, sin};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RegressionFn {
    /// `offset + amp * sin(2 pi freq x[coord] + phase)`.
    Sine { coord: usize, amp: f64, freq: f64, phase: f64, offset: f64 },
    /// `intercept + weights . x`.
    Linear { weights: Vec<f64>, intercept: f64 },
    /// `offset + scale * (x[coord] - center)^3`.
    Cubic { coord: usize, center: f64, scale: f64, offset: f64 },
    Constant(f64),
}

impl RegressionFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            RegressionFn::Sine { coord, amp, freq, phase, offset } => {
                offset + amp * sin(2.0 * core::f64::consts::PI * freq * x[*coord] + phase)
            }
            RegressionFn::Linear { weights, intercept } => intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>(),
            RegressionFn::Cubic { coord, center, scale, offset } => {
                let t = x[*coord] - center;
                offset + scale * t * t * t
            }
            RegressionFn::Constant(c) => *c,
        }
    }

    /// Bounds on the range over the cube `[lo, hi]^d` (exact except for the
    /// sine, whose full amplitude is assumed).
    pub fn range(&self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            RegressionFn::Sine { amp, offset, .. } => (offset - amp.abs(), offset + amp.abs()),
            RegressionFn::Linear { weights, intercept } => weights.iter().fold((*intercept, *intercept), |(a, b), w| {
                (a + (w * lo).min(w * hi), b + (w * lo).max(w * hi))
            }),
            RegressionFn::Cubic { center, scale, offset, .. } => {
                let e1 = offset + scale * (lo - center) * (lo - center) * (lo - center);
                let e2 = offset + scale * (hi - center) * (hi - center) * (hi - center);
                (e1.min(e2), e1.max(e2))
            }
            RegressionFn::Constant(c) => (*c, *c),
        }
    }

    fn max_coord(&self) -> Option<usize> {
        match self {
            RegressionFn::Sine { coord, .. } | RegressionFn::Cubic { coord, .. } => Some(*coord),
            RegressionFn::Linear { weights, .. } => weights.len().checked_sub(1),
            RegressionFn::Constant(_) => None,
        }
    }
}

/// `g(z) = intercept + weights . z`, a function of the `Z` block only.
#[derive(Debug, Clone, PartialEq)]
pub struct GFn {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl GFn {
    pub fn affine(weights: Vec<f64>, intercept: f64) -> Self {
        GFn { weights, intercept }
    }

    pub fn constant(c: f64) -> Self {
        GFn { weights: Vec::new(), intercept: c }
    }

    /// Evaluated on the `Z` block; missing trailing weights count as 0.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn max_over(&self, lo: f64, hi: f64) -> f64 {
        self.intercept + self.weights.iter().map(|w| (w * lo).max(w * hi)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateLaw {
    /// Independent coordinates, each uniform on `[lo, hi]`.
    UniformCube { lo: f64, hi: f64 },
}

impl Default for CovariateLaw {
    fn default() -> Self {
        CovariateLaw::UniformCube { lo: 0.0, hi: 1.0 }
    }
}

impl CovariateLaw {
    pub fn sample(&self, d: usize, rng: &mut impl Rng, out: &mut Vec<f64>) {
        let CovariateLaw::UniformCube { lo, hi } = *self;
        for _ in 0..d {
            out.push(lo + (hi - lo) * rng.random::<f64>());
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        let CovariateLaw::UniformCube { lo, hi } = *self;
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    /// `Y = m(X) + U`, `U` uniform on `[-a, a]`.
    Regression { noise_halfwidth: f64 },
    /// `Y ~ Bernoulli(m(X))`.
    Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    d: usize,
    z_coords: Vec<usize>,
    m_true: RegressionFn,
    g_true: GFn,
    phi_star: PhiFunction,
    covariates: CovariateLaw,
    task: Task,
    bound: f64,
    pi_min: f64,
}

impl SyntheticModel {
    pub fn new(
        d: usize,
        z_coords: Vec<usize>,
        m_true: RegressionFn,
        g_true: GFn,
        phi_star: PhiFunction,
        covariates: CovariateLaw,
        task: Task,
        bound: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        validate_z_coords(&z_coords, d).map_err(Error::InvalidModel)?;
        if m_true.max_coord().is_some_and(|c| c >= d) {
            return Err(Error::InvalidModel("regression function reads a coordinate beyond d".into()));
        }
        if g_true.weights.len() > z_coords.len() {
            return Err(Error::InvalidModel("g has more weights than Z coordinates".into()));
        }
        let (lo, hi) = covariates.bounds();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidModel(format!("covariate cube [{lo}, {hi}] is empty")));
        }
        if !(bound > 0.0) || (phi_star.half_range() - bound).abs() > 1e-12 * bound {
            return Err(Error::InvalidModel(format!(
                "phi* is defined on [-{}, {}] but the response bound is {bound}",
                phi_star.half_range(),
                phi_star.half_range()
            )));
        }
        let (mlo, mhi) = m_true.range(lo, hi);
        match task {
            Task::Regression { noise_halfwidth: a } => {
                if !(a >= 0.0) || mlo - a < -bound || mhi + a > bound {
                    return Err(Error::InvalidModel(format!(
                        "m in [{mlo}, {mhi}] plus noise of half-width {a} can leave [-{bound}, {bound}]"
                    )));
                }
            }
            Task::Classification => {
                if mlo < 0.0 || mhi > 1.0 || bound < 1.0 {
                    return Err(Error::InvalidModel(format!("class probabilities in [{mlo}, {mhi}] with response bound {bound}")));
                }
            }
        }
        let odds = exp(g_true.max_over(lo, hi)) * phi_star.bound();
        let pi_min = 1.0 / (1.0 + odds);
        if !(pi_min > 0.0) {
            return Err(Error::InvalidModel("selection probability is not bounded away from 0".into()));
        }
        Ok(SyntheticModel { d, z_coords, m_true, g_true, phi_star, covariates, task, bound, pi_min })
    }

    /// Regression on the unit cube.
    pub fn regression(d: usize, z_coords: Vec<usize>, m_true: RegressionFn, g_true: GFn, phi_star: PhiFunction, noise_halfwidth: f64) -> Result<Self> {
        let bound = phi_star.half_range();
        Self::new(d, z_coords, m_true, g_true, phi_star, CovariateLaw::default(), Task::Regression { noise_halfwidth }, bound)
    }

    /// Binary labels on the unit cube, response bound 1.
    pub fn classification(d: usize, z_coords: Vec<usize>, m_true: RegressionFn, g_true: GFn, phi_star: PhiFunction) -> Result<Self> {
        Self::new(d, z_coords, m_true, g_true, phi_star, CovariateLaw::default(), Task::Classification, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn z_coords(&self) -> &[usize] {
        &self.z_coords
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn is_classification(&self) -> bool {
        self.task == Task::Classification
    }

    pub fn covariates(&self) -> CovariateLaw {
        self.covariates
    }

    pub fn regression_fn(&self) -> &RegressionFn {
        &self.m_true
    }

    pub fn g_fn(&self) -> &GFn {
        &self.g_true
    }

    pub fn phi_star(&self) -> &PhiFunction {
        &self.phi_star
    }

    /// Analytic lower bound on the selection probability.
    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    pub fn m_true(&self, x: &[f64]) -> f64 {
        self.m_true.eval(x)
    }

    /// `g` evaluated at the `Z` block of a full covariate vector.
    pub fn g(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = self.z_coords.iter().map(|&c| x[c]).collect();
        self.g_true.eval(&z)
    }

    /// Probability of observing `y` at covariate `x` under `phi`.
    pub fn pi_with(&self, x: &[f64], y: f64, phi: &PhiFunction) -> f64 {
        1.0 / (1.0 + exp(self.g(x)) * phi.eval(y))
    }

    pub fn pi(&self, x: &[f64], y: f64) -> f64 {
        self.pi_with(x, y, &self.phi_star)
    }

    pub fn sample_x(&self, rng: &mut impl Rng, out: &mut Vec<f64>) {
        self.covariates.sample(self.d, rng, out);
    }

    /// Closed-form `E min(m, 1 - m)` when available.
    pub fn analytic_bayes_risk(&self) -> Option<f64> {
        if !self.is_classification() {
            return None;
        }
        let (lo, hi) = self.covariates.bounds();
        match &self.m_true {
            RegressionFn::Constant(c) => Some(c.min(1.0 - c)),
            // m(x) = x[c] on the unit interval
            RegressionFn::Linear { weights, intercept }
                if *intercept == 0.0 && lo == 0.0 && hi == 1.0 && weights.iter().filter(|&&w| w != 0.0).count() == 1 && weights.contains(&1.0) =>
            {
                Some(0.25)
            }
            _ => None,
        }
    }

    /// `E[f(Y) | X = x]` for the response law at `x`.
    fn response_expectation(&self, x: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let m = self.m_true(x);
        match self.task {
            Task::Classification => m * f(1.0) + (1.0 - m) * f(0.0),
            Task::Regression { noise_halfwidth: a } => {
                if a == 0.0 {
                    return f(m);
                }
                // composite Simpson over the uniform noise
                const INTERVALS: usize = 2000;
                let step = 2.0 * a / INTERVALS as f64;
                let mut s = f(m - a) + f(m + a);
                for k in 1..INTERVALS {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * f(m - a + k as f64 * step);
                }
                s * step / 3.0 / (2.0 * a)
            }
        }
    }

    /// Population `m(x; phi) = eta_1 + psi_1 / psi_2 * (1 - eta_2)`, which
    /// equals `m(x)` at `phi = phi*`.
    pub fn m_phi(&self, x: &[f64], phi: &PhiFunction) -> f64 {
        let eta1 = self.response_expectation(x, |y| self.pi(x, y) * y);
        let eta2 = self.response_expectation(x, |y| self.pi(x, y));
        let psi1 = self.response_expectation(x, |y| self.pi(x, y) * y * phi.eval(y));
        let psi2 = self.response_expectation(x, |y| self.pi(x, y) * phi.eval(y));
        eta1 + psi1 / psi2 * (1.0 - eta2)
    }
}

/// Full responses and selection probabilities of a generated sample. Kept
/// apart from the [`Dataset`] so estimators cannot read it.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    y: Vec<f64>,
    pi: Vec<f64>,
    m: Vec<f64>,
}

impl TruthRecord {
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }
}

/// `n` independent draws of `(X, Y, Delta)` from a single seeded stream.
pub fn generate(model: &SyntheticModel, n: usize, seed: u64) -> Result<(Dataset, TruthRecord)> {
    if n == 0 {
        return Err(Error::InvalidConfig("cannot generate an empty sample".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut obs = Vec::with_capacity(n);
    let mut truth = TruthRecord { y: Vec::with_capacity(n), pi: Vec::with_capacity(n), m: Vec::with_capacity(n) };
    let mut x = Vec::with_capacity(model.d);
    for _ in 0..n {
        x.clear();
        model.sample_x(&mut rng, &mut x);
        let m = model.m_true(&x);
        let u: f64 = rng.random();
        let y = match model.task {
            Task::Regression { noise_halfwidth: a } => (m + a * (2.0 * u - 1.0)).clamp(-model.bound, model.bound),
            Task::Classification => (u < m) as u8 as f64,
        };
        let pi = model.pi(&x, y);
        let observed = rng.random::<f64>() < pi;
        obs.push(if observed { Observation::observed(x.clone(), y) } else { Observation::missing(x.clone()) });
        truth.y.push(y);
        truth.pi.push(pi);
        truth.m.push(m);
    }
    let ds = Dataset::new(obs, model.d, model.z_coords.clone(), model.bound)?;
    Ok((ds, truth))
}

/// Sample of `n` covariate vectors, row-major.
pub fn sample_covariates(model: &SyntheticModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut xs = Vec::with_capacity(n * model.d);
    for _ in 0..n {
        model.sample_x(&mut rng, &mut xs);
    }
    xs
}

/// Uniform midpoint grid of `per_axis^d` points over the covariate cube.
pub fn midpoint_grid(model: &SyntheticModel, per_axis: usize) -> Vec<f64> {
    let (lo, hi) = model.covariates.bounds();
    let d = model.d;
    let total = per_axis.pow(d as u32);
    let mut out = vec![0.0; total * d];
    for flat in 0..total {
        let mut rem = flat;
        for k in 0..d {
            let i = rem % per_axis;
            rem /= per_axis;
            out[flat * d + k] = lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64;
        }
    }
    out
}
