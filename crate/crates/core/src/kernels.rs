//! Regular kernel families and bandwidth policies.
//!
//! A kernel `K` is regular when `K(u) >= b` on the ball `||u|| <= r` and the
//! sup-envelope `u -> sup_{v in u + S(0,r)} K(v)` is integrable. Every
//! family shipped here is radial with compact support, so the envelope
//! condition holds trivially and each family carries an analytic `(b, r)`.

use alloc::format;

use crate::math::{self, euclid_dist};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `K(u) = 1{||u|| <= s}`.
    Box,
    /// `K(u) = max(0, 1 - ||u|| / s)`.
    Triangle,
    /// `K(u) = exp(-||u||^2 / (2 sigma^2))` truncated at `||u|| = 3 sigma`.
    TruncatedGaussian,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Box => "box",
            KernelFamily::Triangle => "triangle",
            KernelFamily::TruncatedGaussian => "truncated_gaussian",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(KernelFamily::Box),
            "triangle" => Ok(KernelFamily::Triangle),
            "truncated_gaussian" | "gaussian" => Ok(KernelFamily::TruncatedGaussian),
            other => Err(Error::InvalidConfig(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A radial kernel with its scale parameter (support radius for box and
/// triangle, `sigma` for the truncated Gaussian).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    param: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::boxcar(1.0)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, param: f64) -> Result<Self> {
        if !(param.is_finite() && param > 0.0) {
            return Err(Error::InvalidConfig(format!("kernel.param must be positive, got {param}")));
        }
        Ok(KernelSpec { family, param })
    }

    /// Box kernel with support radius `radius`.
    pub const fn boxcar(radius: f64) -> Self {
        KernelSpec { family: KernelFamily::Box, param: radius }
    }

    pub const fn triangle(radius: f64) -> Self {
        KernelSpec { family: KernelFamily::Triangle, param: radius }
    }

    pub const fn truncated_gaussian(sigma: f64) -> Self {
        KernelSpec { family: KernelFamily::TruncatedGaussian, param: sigma }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn param(&self) -> f64 {
        self.param
    }

    /// Radius `r` of the ball on which `K >= b`.
    pub fn regularity_radius(&self) -> f64 {
        match self.family {
            KernelFamily::Box => self.param,
            KernelFamily::Triangle => 0.5 * self.param,
            KernelFamily::TruncatedGaussian => self.param,
        }
    }

    /// Lower bound `b` of `K` on the regularity ball.
    pub fn regularity_bound(&self) -> f64 {
        match self.family {
            KernelFamily::Box => 1.0,
            KernelFamily::Triangle => 0.5,
            KernelFamily::TruncatedGaussian => math::exp(-0.5),
        }
    }

    /// `K(u) = 0` whenever `||u||` exceeds this radius.
    pub fn support_radius(&self) -> f64 {
        match self.family {
            KernelFamily::Box | KernelFamily::Triangle => self.param,
            KernelFamily::TruncatedGaussian => 3.0 * self.param,
        }
    }

    /// Kernel value as a function of `||u||`.
    #[inline]
    pub fn profile(&self, norm: f64) -> f64 {
        match self.family {
            KernelFamily::Box => {
                if norm <= self.param {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Triangle => (1.0 - norm / self.param).max(0.0),
            KernelFamily::TruncatedGaussian => {
                if norm <= 3.0 * self.param {
                    let t = norm / self.param;
                    math::exp(-0.5 * t * t)
                } else {
                    0.0
                }
            }
        }
    }

    /// `K(u)`.
    pub fn eval(&self, u: &[f64]) -> f64 {
        let norm = math::sqrt(u.iter().map(|v| v * v).sum::<f64>());
        self.profile(norm)
    }

    /// `K((x - xi) / h)` without materialising the scaled difference.
    #[inline]
    pub fn weight(&self, x: &[f64], xi: &[f64], h: f64) -> f64 {
        self.profile(euclid_dist(x, xi) / h)
    }

    /// True when the kernel is an indicator, so every nonzero weight is 1.
    pub(crate) fn is_indicator(&self) -> bool {
        self.family == KernelFamily::Box
    }
}

/// Bandwidth as a function of the sample size the smoother is fit on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    Fixed { h0: f64 },
    /// `h(n) = h0 * n^(-beta)`; requires `beta * d < 1` so that `n h^d -> inf`.
    PowerRule { h0: f64, beta: f64 },
}

impl BandwidthPolicy {
    /// `h0 * n^(-1/(d+4))`.
    pub fn classical(h0: f64, d: usize) -> Self {
        BandwidthPolicy::PowerRule { h0, beta: 1.0 / (d as f64 + 4.0) }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            BandwidthPolicy::Fixed { h0 } => {
                if !(h0.is_finite() && h0 > 0.0) {
                    return Err(Error::InvalidConfig(format!("bandwidth.h0 must be positive, got {h0}")));
                }
            }
            BandwidthPolicy::PowerRule { h0, beta } => {
                if !(h0.is_finite() && h0 > 0.0) {
                    return Err(Error::InvalidConfig(format!("bandwidth.h0 must be positive, got {h0}")));
                }
                if !(beta > 0.0) {
                    return Err(Error::InvalidConfig(format!("bandwidth.beta must be positive, got {beta}")));
                }
                if beta * d as f64 >= 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "bandwidth.beta * d = {} must be < 1 for n h^d to diverge",
                        beta * d as f64
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bandwidth(&self, n: usize, d: usize) -> Result<f64> {
        self.validate(d)?;
        if n == 0 {
            return Err(Error::InvalidConfig("bandwidth requested for n = 0".into()));
        }
        Ok(match *self {
            BandwidthPolicy::Fixed { h0 } => h0,
            BandwidthPolicy::PowerRule { h0, beta } => h0 * math::powf(n as f64, -beta),
        })
    }
}
