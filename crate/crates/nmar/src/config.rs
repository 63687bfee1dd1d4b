//! Experiment configuration as a TOML document with dotted keys
//! (`bandwidth.h0`, `cover.M`, `model.phi.gamma`, ...).
//!
//! Coordinates are 1-based in the file, matching the `x1..xd` CSV header.

use std::path::Path;

use nmar_core::cover::{build_exp_cover, build_grid_cover, CoverClass, EpsilonSchedule, PhiCover, PhiFunction};
use nmar_core::ht::{HtConfig, HtVariant};
use nmar_core::kernels::{BandwidthPolicy, KernelFamily, KernelSpec};
use nmar_core::plugin::EstimatorKind;
use nmar_core::selection::Smoothing;
use nmar_core::synth::{CovariateLaw, GFn, RegressionFn, SyntheticModel, Task};
use serde::Deserialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "defaults::n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "defaults::replications")]
    pub replications: usize,
    #[serde(default = "defaults::split_alpha")]
    pub split_alpha: f64,
    #[serde(default = "defaults::p")]
    pub p: f64,
    #[serde(default = "defaults::n_eval")]
    pub n_eval: usize,
    /// Record wall-clock times; off by default so results are byte-stable.
    #[serde(default)]
    pub timing: bool,
    /// Worker threads; 0 lets the pool decide. Never affects results.
    #[serde(default)]
    pub threads: usize,
    pub model: ModelSection,
    #[serde(default)]
    pub cover: CoverSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub bandwidth: BandwidthSection,
    pub aux_kernel: Option<KernelSection>,
    pub aux_bandwidth: Option<BandwidthSection>,
    #[serde(default)]
    pub ht: HtSection,
    #[serde(default)]
    pub plugin: PluginSection,
    #[serde(default)]
    pub output: OutputSection,
}

mod defaults {
    pub fn seed() -> u64 {
        1
    }
    pub fn estimators() -> Vec<String> {
        vec!["select_phi".into()]
    }
    pub fn n_grid() -> Vec<usize> {
        vec![500, 2000, 8000]
    }
    pub fn replications() -> usize {
        1
    }
    pub fn split_alpha() -> f64 {
        0.5
    }
    pub fn p() -> f64 {
        2.0
    }
    pub fn n_eval() -> usize {
        20_000
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn half() -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_d")]
    pub d: usize,
    /// 1-based indices of the `Z` block.
    #[serde(default = "default_z")]
    pub z: Vec<usize>,
    #[serde(default = "default_task")]
    pub task: String,
    #[serde(rename = "L", default = "defaults::one")]
    pub bound: f64,
    /// Half-width of the uniform regression noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_lo")]
    pub x_lo: f64,
    #[serde(default = "defaults::one")]
    pub x_hi: f64,
    pub m: MSection,
    #[serde(default)]
    pub g: GSection,
    #[serde(default)]
    pub phi: PhiSection,
}

fn default_d() -> usize {
    1
}
fn default_z() -> Vec<usize> {
    vec![1]
}
fn default_task() -> String {
    "regression".into()
}
fn default_lo() -> f64 {
    0.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MSection {
    pub kind: String,
    #[serde(default = "default_coord")]
    pub coord: usize,
    #[serde(default)]
    pub amp: f64,
    #[serde(default = "defaults::one")]
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default = "defaults::half")]
    pub center: f64,
    #[serde(default = "defaults::one")]
    pub scale: f64,
    #[serde(default)]
    pub value: f64,
}

fn default_coord() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GSection {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Default for GSection {
    fn default() -> Self {
        GSection { weights: vec![1.0], intercept: -0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSection {
    #[serde(default = "default_phi_kind")]
    pub kind: String,
    #[serde(default = "defaults::one")]
    pub gamma: f64,
    #[serde(default = "defaults::one")]
    pub scale: f64,
}

fn default_phi_kind() -> String {
    "exp".into()
}

impl Default for PhiSection {
    fn default() -> Self {
        PhiSection { kind: default_phi_kind(), gamma: 1.0, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSection {
    #[serde(default = "default_cover_kind")]
    pub kind: String,
    #[serde(rename = "M", default = "defaults::one")]
    pub m_bound: f64,
    /// Class bound of a tabulated cover.
    #[serde(rename = "B")]
    pub class_bound: Option<f64>,
    #[serde(default = "default_eps_mode")]
    pub epsilon_mode: String,
    /// Radius for `epsilon_mode = "fixed"`, and the claimed radius of
    /// tabulated and listed covers.
    pub epsilon: Option<f64>,
    #[serde(default = "defaults::one")]
    pub epsilon_scale: f64,
    #[serde(default = "defaults::half")]
    pub epsilon_power: f64,
    /// Tabulated covers: `scale * exp(gamma y)` over a parameter grid.
    #[serde(default = "default_gamma_range")]
    pub gamma_range: [f64; 2],
    #[serde(default = "default_scale_range")]
    pub scale_range: [f64; 2],
    #[serde(default = "default_steps")]
    pub steps: [usize; 2],
    #[serde(default = "default_table")]
    pub table_size: usize,
    /// Listed covers, in order.
    #[serde(default)]
    pub members: Vec<MemberSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub gamma: f64,
    #[serde(default = "defaults::one")]
    pub scale: f64,
}

fn default_cover_kind() -> String {
    "exp".into()
}
fn default_eps_mode() -> String {
    "n_power".into()
}
fn default_gamma_range() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_scale_range() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_steps() -> [usize; 2] {
    [21, 1]
}
fn default_table() -> usize {
    1001
}

impl Default for CoverSection {
    fn default() -> Self {
        toml::from_str("").expect("every cover key has a default")
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_family")]
    pub family: KernelFamilyName,
    #[serde(default = "defaults::one")]
    pub param: f64,
}

/// Kernel family as spelled in the file.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamilyName {
    Box,
    Triangle,
    TruncatedGaussian,
}

fn default_family() -> KernelFamilyName {
    KernelFamilyName::Box
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection { family: KernelFamilyName::Box, param: 1.0 }
    }
}

impl KernelSection {
    pub fn spec(&self) -> Result<KernelSpec> {
        let family = match self.family {
            KernelFamilyName::Box => KernelFamily::Box,
            KernelFamilyName::Triangle => KernelFamily::Triangle,
            KernelFamilyName::TruncatedGaussian => KernelFamily::TruncatedGaussian,
        };
        Ok(KernelSpec::new(family, self.param)?)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthSection {
    #[serde(default = "default_bw_mode")]
    pub mode: BandwidthMode,
    #[serde(default = "defaults::one")]
    pub h0: f64,
    /// Defaults to `1 / (d + 4)`.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    Fixed,
    PowerRule,
}

fn default_bw_mode() -> BandwidthMode {
    BandwidthMode::PowerRule
}

impl Default for BandwidthSection {
    fn default() -> Self {
        BandwidthSection { mode: BandwidthMode::PowerRule, h0: 1.0, beta: None }
    }
}

impl BandwidthSection {
    pub fn policy(&self, d: usize) -> BandwidthPolicy {
        match self.mode {
            BandwidthMode::Fixed => BandwidthPolicy::Fixed { h0: self.h0 },
            BandwidthMode::PowerRule => BandwidthPolicy::PowerRule { h0: self.h0, beta: self.beta.unwrap_or(1.0 / (d as f64 + 4.0)) },
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HtSection {
    #[serde(default = "default_pi0")]
    pub pi0: f64,
    #[serde(default = "default_true")]
    pub share_bandwidth: bool,
}

fn default_pi0() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}

impl Default for HtSection {
    fn default() -> Self {
        HtSection { pi0: default_pi0(), share_bandwidth: true }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginSection {
    /// Exponent used by `plugin_gamma`; required when it is selected.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<String>,
    pub plot: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be nonempty and strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Config(format!("p must be at least 1, got {}", self.p)));
        }
        if self.n_eval < 1000 {
            return Err(Error::Config("n_eval must be at least 1000".into()));
        }
        if !(self.split_alpha > 0.0 && self.split_alpha < 1.0) {
            return Err(Error::Config(format!("split_alpha must lie in (0, 1), got {}", self.split_alpha)));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        for name in &self.estimators {
            let kind = EstimatorKind::parse(name).ok_or_else(|| Error::Config(format!("unknown estimator '{name}'")))?;
            if kind == EstimatorKind::PluginGamma && self.plugin.gamma.is_none() {
                return Err(Error::Config("plugin_gamma needs plugin.gamma".into()));
            }
        }
        let model = self.model()?;
        self.smoothing(model.dim())?.bandwidth.validate(model.dim())?;
        self.ht_config(HtVariant::Breve)?.validate()?;
        self.cover(*self.n_grid.last().unwrap())?;
        Ok(())
    }

    pub fn estimator_kinds(&self) -> Vec<EstimatorKind> {
        self.estimators.iter().filter_map(|s| EstimatorKind::parse(s)).collect()
    }

    fn zero_based(&self, coord: usize, what: &str) -> Result<usize> {
        if coord == 0 || coord > self.model.d {
            return Err(Error::Config(format!("{what} = {coord} is not a coordinate in 1..={}", self.model.d)));
        }
        Ok(coord - 1)
    }

    pub fn z_coords(&self) -> Result<Vec<usize>> {
        self.model.z.iter().map(|&c| self.zero_based(c, "model.z")).collect()
    }

    pub fn phi_star(&self) -> Result<PhiFunction> {
        let p = &self.model.phi;
        let l = self.model.bound;
        Ok(match p.kind.as_str() {
            "exp" => PhiFunction::exp_gamma(p.gamma, l)?,
            "scaled_exp" => PhiFunction::scaled_exp(p.scale, p.gamma, l)?,
            "constant" => PhiFunction::constant(p.scale, l)?,
            other => return Err(Error::Config(format!("unknown model.phi.kind '{other}'"))),
        })
    }

    pub fn model(&self) -> Result<SyntheticModel> {
        let ms = &self.model;
        let m = &ms.m;
        let coord = self.zero_based(m.coord, "model.m.coord");
        let m_true = match m.kind.as_str() {
            "sine" => RegressionFn::Sine { coord: coord?, amp: m.amp, freq: m.freq, phase: m.phase, offset: m.offset },
            "linear" => RegressionFn::Linear { weights: m.weights.clone(), intercept: m.intercept },
            "cubic" => RegressionFn::Cubic { coord: coord?, center: m.center, scale: m.scale, offset: m.offset },
            "constant" => RegressionFn::Constant(m.value),
            other => return Err(Error::Config(format!("unknown model.m.kind '{other}'"))),
        };
        let task = match ms.task.as_str() {
            "regression" => Task::Regression { noise_halfwidth: ms.noise },
            "classification" => Task::Classification,
            other => return Err(Error::Config(format!("unknown model.task '{other}'"))),
        };
        let g = GFn::affine(ms.g.weights.clone(), ms.g.intercept);
        let law = CovariateLaw::UniformCube { lo: ms.x_lo, hi: ms.x_hi };
        Ok(SyntheticModel::new(ms.d, self.z_coords()?, m_true, g, self.phi_star()?, law, task, ms.bound)?)
    }

    pub fn smoothing(&self, d: usize) -> Result<Smoothing> {
        let dz = self.model.z.len();
        let kernel = self.kernel.spec()?;
        let aux_kernel = self.aux_kernel.unwrap_or(self.kernel).spec()?;
        let bandwidth = self.bandwidth.policy(d);
        let aux_bandwidth = self.aux_bandwidth.unwrap_or(self.bandwidth).policy(dz);
        Ok(Smoothing { kernel, bandwidth, aux_kernel, aux_bandwidth })
    }

    pub fn ht_config(&self, variant: HtVariant) -> Result<HtConfig> {
        let mut cfg = HtConfig::new(variant, self.smoothing(self.model.d)?);
        cfg.pi0 = self.ht.pi0;
        cfg.share_bandwidth = self.ht.share_bandwidth;
        Ok(cfg)
    }

    pub fn epsilon_schedule(&self) -> Result<EpsilonSchedule> {
        let c = &self.cover;
        match c.epsilon_mode.as_str() {
            "fixed" => c.epsilon.map(EpsilonSchedule::Fixed).ok_or_else(|| Error::Config("cover.epsilon_mode = fixed needs cover.epsilon".into())),
            "n_power" => Ok(EpsilonSchedule::NPower { scale: c.epsilon_scale, power: c.epsilon_power }),
            other => Err(Error::Config(format!("unknown cover.epsilon_mode '{other}'"))),
        }
    }

    /// The cover used for a sample of size `n`.
    pub fn cover(&self, n: usize) -> Result<PhiCover> {
        let c = &self.cover;
        let l = self.model.bound;
        match c.kind.as_str() {
            "exp" => Ok(build_exp_cover(c.m_bound, l, self.epsilon_schedule()?.epsilon(n))?),
            "tabulated" => {
                let [g0, g1] = c.gamma_range;
                let [s0, s1] = c.scale_range;
                let bound = c.class_bound.unwrap_or(s0.max(s1) * (g0.abs().max(g1.abs()) * l).exp());
                let eps = c.epsilon.ok_or_else(|| Error::Config("a tabulated cover needs its claimed cover.epsilon".into()))?;
                let desc = format!("scale*exp(gamma*y), gamma in [{g0}, {g1}], scale in [{s0}, {s1}]");
                let family = |theta: &[f64], y: f64| theta[1] * (theta[0] * y).exp();
                Ok(build_grid_cover(family, &[g0, s0], &[g1, s1], &c.steps, l, bound, eps, c.table_size, desc)?)
            }
            "list" => {
                if c.members.is_empty() {
                    return Err(Error::Config("cover.kind = list needs cover.members".into()));
                }
                let members = c.members.iter().map(|m| PhiFunction::scaled_exp(m.scale, m.gamma, l)).collect::<nmar_core::Result<Vec<_>>>()?;
                // a listed cover claims no radius unless one is given
                Ok(PhiCover::from_members(members, c.epsilon.unwrap_or(f64::INFINITY), CoverClass::Explicit)?)
            }
            other => Err(Error::Config(format!("unknown cover.kind '{other}'"))),
        }
    }
}
