//! Finite joint laws of `(X, Y)` with a known nonresponse mechanism, used as
//! exact oracles: every conditional expectation is a finite sum.

use alloc::format;
use alloc::vec::Vec;

use crate::cover::PhiFunction;
use crate::data::validate_z_coords;
use crate::math::{abs, exp};
use crate::plugin::combine;
use crate::synth::GFn;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: Vec<f64>,
    pub y: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    atoms: Vec<Atom>,
    z_coords: Vec<usize>,
    g: GFn,
    phi_star: PhiFunction,
    bound: f64,
}

/// Conditional moments at one covariate location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub eta1: f64,
    pub eta2: f64,
    pub psi1: f64,
    pub psi2: f64,
}

impl DiscreteJoint {
    pub fn new(atoms: Vec<Atom>, z_coords: Vec<usize>, g: GFn, phi_star: PhiFunction) -> Result<Self> {
        let bound = phi_star.half_range();
        let d = atoms.first().map(|a| a.x.len()).ok_or_else(|| Error::InvalidModel("no atoms".into()))?;
        validate_z_coords(&z_coords, d).map_err(Error::InvalidModel)?;
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if a.x.len() != d || !(a.prob > 0.0) || abs(a.y) > bound {
                return Err(Error::InvalidModel(format!("atom {i} is malformed")));
            }
            total += a.prob;
        }
        if abs(total - 1.0) > 1e-12 {
            return Err(Error::InvalidModel(format!("atom probabilities sum to {total}")));
        }
        Ok(DiscreteJoint { atoms, z_coords, g, phi_star, bound })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn phi_star(&self) -> &PhiFunction {
        &self.phi_star
    }

    /// Distinct covariate locations in order of first appearance.
    pub fn locations(&self) -> Vec<Vec<f64>> {
        let mut locs: Vec<Vec<f64>> = Vec::new();
        for a in &self.atoms {
            if !locs.contains(&a.x) {
                locs.push(a.x.clone());
            }
        }
        locs
    }

    pub fn pi_with(&self, x: &[f64], y: f64, phi: &PhiFunction) -> f64 {
        let z: Vec<f64> = self.z_coords.iter().map(|&c| x[c]).collect();
        1.0 / (1.0 + exp(self.g.eval(&z)) * phi.eval(y))
    }

    /// True selection probability.
    pub fn pi(&self, x: &[f64], y: f64) -> f64 {
        self.pi_with(x, y, &self.phi_star)
    }

    pub fn marginal(&self, x: &[f64]) -> f64 {
        self.atoms.iter().filter(|a| a.x == x).map(|a| a.prob).sum()
    }

    /// `E[f(Y) | X = x]`.
    pub fn conditional(&self, x: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
        let p = self.marginal(x);
        if !(p > 0.0) {
            return Err(Error::ZeroProbability);
        }
        Ok(self.atoms.iter().filter(|a| a.x == x).map(|a| a.prob * f(a.y)).sum::<f64>() / p)
    }

    pub fn m(&self, x: &[f64]) -> Result<f64> {
        self.conditional(x, |y| y)
    }

    /// `E[Delta Y^{2-k} | x]` and `E[Delta Y^{2-k} phi(Y) | x]`.
    pub fn moments(&self, x: &[f64], phi: &PhiFunction) -> Result<Moments> {
        Ok(Moments {
            eta1: self.conditional(x, |y| self.pi(x, y) * y)?,
            eta2: self.conditional(x, |y| self.pi(x, y))?,
            psi1: self.conditional(x, |y| self.pi(x, y) * y * phi.eval(y))?,
            psi2: self.conditional(x, |y| self.pi(x, y) * phi.eval(y))?,
        })
    }

    /// `eta_1 + psi_1 / psi_2 (1 - eta_2)` without clamping.
    pub fn m_phi(&self, x: &[f64], phi: &PhiFunction) -> Result<f64> {
        let m = self.moments(x, phi)?;
        Ok(m.eta1 + m.psi1 / m.psi2 * (1.0 - m.eta2))
    }

    /// `(E[Y | x], eta_1 + psi_1(phi*) / psi_2(phi*) (1 - eta_2))`.
    pub fn representation_oracle(&self, x: &[f64]) -> Result<(f64, f64)> {
        Ok((self.m(x)?, self.m_phi(x, &self.phi_star)?))
    }

    /// `(E[Delta Y / pi* | x], E[Y | x])`.
    pub fn ht_identity(&self, x: &[f64]) -> Result<(f64, f64)> {
        let ht = self.conditional(x, |y| {
            let p = self.pi(x, y);
            p * y / p
        })?;
        Ok((ht, self.m(x)?))
    }

    /// `(E[Delta / pi* (m(X; phi) - Y)^2], E[(m(X; phi) - Y)^2])` by enumeration.
    pub fn ipw_risk_identity(&self, phi: &PhiFunction) -> Result<(f64, f64)> {
        let mut weighted = 0.0;
        let mut plain = 0.0;
        for a in &self.atoms {
            let r = self.m_phi(&a.x, phi)? - a.y;
            let p = self.pi(&a.x, a.y);
            weighted += a.prob * p * (r * r / p);
            plain += a.prob * r * r;
        }
        Ok((weighted, plain))
    }

    /// Exact `(L(plug-in) - L(Bayes), 2 E|m_hat(X) - m(X)|)` for a 0/1 response.
    pub fn plugin_excess(&self, m_hat: impl Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
        if self.atoms.iter().any(|a| a.y != 0.0 && a.y != 1.0) {
            return Err(Error::InvalidModel("plug-in excess needs a 0/1 response".into()));
        }
        let mut excess = 0.0;
        let mut l1 = 0.0;
        for x in self.locations() {
            let p = self.marginal(&x);
            let m = self.m(&x)?;
            let est = m_hat(&x);
            let err = |label: u8| if label == 1 { 1.0 - m } else { m };
            let plug = crate::classify::plugin_classify(est);
            let bayes = crate::classify::plugin_classify(m);
            excess += p * (err(plug) - err(bayes));
            l1 += p * abs(est - m);
        }
        Ok((excess, 2.0 * l1))
    }

    /// Clamped form used by the estimators, for comparisons.
    pub fn m_phi_clamped(&self, x: &[f64], phi: &PhiFunction) -> Result<f64> {
        let m = self.moments(x, phi)?;
        Ok(combine(m.eta1, m.eta2, m.psi1, m.psi2, self.bound))
    }
}
