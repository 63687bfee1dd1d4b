//! Observations with possibly missing responses, datasets, and random
//! training/validation splits.
//!
//! Covariate indices are 0-based throughout the library; the CSV and
//! configuration layer in the companion crate uses 1-based names (`x1`, ...).

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Generator used for every seeded draw in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed derivation: the seed of a sub-stream depends only on
/// the base seed and its coordinates, never on execution order.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(base), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// One draw `(X, Y, Delta)` as seen by an estimator; `y` is `Some` exactly
/// when the response was observed (`Delta = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: Option<f64>,
}

impl Observation {
    pub fn observed(x: Vec<f64>, y: f64) -> Self {
        Observation { x, y: Some(y) }
    }

    pub fn missing(x: Vec<f64>) -> Self {
        Observation { x, y: None }
    }

    pub fn delta(&self) -> u8 {
        self.y.is_some() as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    d: usize,
    z_coords: Vec<usize>,
    bound: f64,
}

impl Dataset {
    /// Validates dimensions, the `Z` index set and `|y| <= bound`.
    pub fn new(observations: Vec<Observation>, d: usize, z_coords: Vec<usize>, bound: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidData("covariate dimension must be positive".into()));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidData(format!("response bound must be positive, got {bound}")));
        }
        validate_z_coords(&z_coords, d).map_err(Error::InvalidData)?;
        for (i, obs) in observations.iter().enumerate() {
            if obs.x.len() != d {
                return Err(Error::InvalidData(format!("row {i}: expected {d} covariates, got {}", obs.x.len())));
            }
            if obs.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("row {i}: non-finite covariate")));
            }
            if let Some(y) = obs.y {
                if !y.is_finite() || y.abs() > bound {
                    return Err(Error::InvalidData(format!("row {i}: |y| = {} exceeds bound {bound}", y.abs())));
                }
            }
        }
        Ok(Dataset { observations, d, z_coords, bound })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// 0-based indices of the `Z` block of `X = (Z, V)`.
    pub fn z_coords(&self) -> &[usize] {
        &self.z_coords
    }

    /// Response bound `L`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn observed_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.observations.iter().filter(|o| o.y.is_some()).count() as f64 / self.len() as f64
    }

    pub fn fully_observed(&self) -> bool {
        self.observations.iter().all(|o| o.y.is_some())
    }
}

pub(crate) fn validate_z_coords(z: &[usize], d: usize) -> core::result::Result<(), alloc::string::String> {
    if z.is_empty() {
        return Err("z_coords must be nonempty".into());
    }
    for (k, &c) in z.iter().enumerate() {
        if c >= d {
            return Err(format!("z coordinate {} outside 1..={d}", c + 1));
        }
        if z[..k].contains(&c) {
            return Err(format!("duplicate z coordinate {}", c + 1));
        }
    }
    Ok(())
}

/// Partition of `0..n` into a training index set and a validation index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    training: Vec<usize>,
    validation: Vec<usize>,
    alpha_ppm: u64,
}

impl DataSplit {
    /// Uniformly random split with `floor(alpha * n)` training rows.
    pub fn random(n: usize, alpha: f64, seed: u64) -> Result<Self> {
        let m = training_size(n, alpha)?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_from_seed(seed));
        let mut training = idx[..m].to_vec();
        let mut validation = idx[m..].to_vec();
        training.sort_unstable();
        validation.sort_unstable();
        Ok(DataSplit { training, validation, alpha_ppm: libm::round(alpha * 1e6) as u64 })
    }

    /// Explicit split; the two sets must partition `0..n` and both be nonempty.
    pub fn from_indices(n: usize, mut training: Vec<usize>, mut validation: Vec<usize>) -> Result<Self> {
        training.sort_unstable();
        validation.sort_unstable();
        if training.is_empty() || validation.is_empty() {
            return Err(Error::InvalidSplit("both index sets must be nonempty".into()));
        }
        let mut seen = alloc::vec![false; n];
        for &i in training.iter().chain(&validation) {
            if i >= n || seen[i] {
                return Err(Error::InvalidSplit(format!("index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidSplit("index sets do not cover 0..n".into()));
        }
        let alpha_ppm = libm::round((training.len() as f64 / n as f64) * 1e6) as u64;
        Ok(DataSplit { training, validation, alpha_ppm })
    }

    pub fn training(&self) -> &[usize] {
        &self.training
    }

    pub fn validation(&self) -> &[usize] {
        &self.validation
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_ppm as f64 / 1e6
    }
}

fn training_size(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidSplit(format!("split fraction must lie in (0, 1), got {alpha}")));
    }
    let m = libm::floor(alpha * n as f64) as usize;
    if m < 1 || m + 1 > n {
        return Err(Error::InvalidSplit(format!(
            "floor({alpha} * {n}) = {m} leaves an empty training or validation set"
        )));
    }
    Ok(m)
}

pub fn split(dataset: &Dataset, alpha: f64, seed: u64) -> Result<DataSplit> {
    DataSplit::random(dataset.len(), alpha, seed)
}

/// Flattened, estimator-facing view of a subset of a [`Dataset`]: covariates,
/// the `Z` block, `y * Delta` and `Delta`. Missing responses are stored as 0
/// and are only ever multiplied by `Delta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    d: usize,
    dz: usize,
    z_coords: Vec<usize>,
    x: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
    delta: Vec<f64>,
    bound: f64,
}

impl Rows {
    pub fn all(ds: &Dataset) -> Self {
        Self::build(ds, 0..ds.len())
    }

    pub fn subset(ds: &Dataset, indices: &[usize]) -> Self {
        Self::build(ds, indices.iter().copied())
    }

    /// Only the rows with an observed response.
    pub fn complete_cases(ds: &Dataset) -> Self {
        Self::build(ds, (0..ds.len()).filter(|&i| ds.observations[i].y.is_some()))
    }

    fn build(ds: &Dataset, idx: impl Iterator<Item = usize>) -> Self {
        let mut rows = Rows {
            d: ds.d,
            dz: ds.z_coords.len(),
            z_coords: ds.z_coords.clone(),
            x: Vec::new(),
            z: Vec::new(),
            y: Vec::new(),
            delta: Vec::new(),
            bound: ds.bound,
        };
        for i in idx {
            let obs = &ds.observations[i];
            rows.x.extend_from_slice(&obs.x);
            rows.z.extend(ds.z_coords.iter().map(|&c| obs.x[c]));
            rows.y.push(obs.y.unwrap_or(0.0));
            rows.delta.push(obs.y.is_some() as u8 as f64);
        }
        rows
    }

    /// Builds rows directly from raw arrays; `y[i]` is ignored where `delta[i] == 0`.
    pub fn from_parts(d: usize, z_coords: &[usize], x: Vec<f64>, y: &[f64], delta: &[u8], bound: f64) -> Result<Self> {
        let n = y.len();
        if x.len() != n * d || delta.len() != n {
            return Err(Error::InvalidData("inconsistent row lengths".into()));
        }
        validate_z_coords(z_coords, d).map_err(Error::InvalidData)?;
        let mut obs = Vec::with_capacity(n);
        for i in 0..n {
            let xi = x[i * d..(i + 1) * d].to_vec();
            obs.push(match delta[i] {
                0 => Observation::missing(xi),
                1 => Observation::observed(xi, y[i]),
                v => return Err(Error::InvalidData(format!("row {i}: delta = {v}"))),
            });
        }
        Ok(Rows::all(&Dataset::new(obs, d, z_coords.to_vec(), bound)?))
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn z_dim(&self) -> usize {
        self.dz
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn z_coords(&self) -> &[usize] {
        &self.z_coords
    }

    /// Extracts the `Z` block of an arbitrary covariate vector.
    pub fn project_z(&self, x: &[f64]) -> Vec<f64> {
        self.z_coords.iter().map(|&c| x[c]).collect()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn z(&self, i: usize) -> &[f64] {
        &self.z[i * self.dz..(i + 1) * self.dz]
    }

    /// `Y_i * Delta_i`.
    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    #[inline]
    pub fn delta(&self, i: usize) -> f64 {
        self.delta[i]
    }

    pub(crate) fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub(crate) fn z_flat(&self) -> &[f64] {
        &self.z
    }

    pub(crate) fn ys(&self) -> &[f64] {
        &self.y
    }

    pub(crate) fn deltas(&self) -> &[f64] {
        &self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy(n: usize) -> Dataset {
        let obs = (0..n).map(|i| Observation::observed(vec![i as f64 / n as f64], 0.0)).collect();
        Dataset::new(obs, 1, vec![0], 1.0).unwrap()
    }

    #[test]
    fn split_cardinalities() {
        let s = split(&toy(10), 0.5, 7).unwrap();
        assert_eq!(s.training().len(), 5);
        assert_eq!(s.validation().len(), 5);
        assert!(s.training().iter().all(|i| !s.validation().contains(i)));

        let s = split(&toy(3), 0.34, 1).unwrap();
        assert_eq!(s.training().len(), 1);
        assert_eq!(s.validation().len(), 2);
    }

    #[test]
    fn split_is_deterministic() {
        let a = split(&toy(100), 0.5, 42).unwrap();
        let b = split(&toy(100), 0.5, 42).unwrap();
        let c = split(&toy(100), 0.5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_unusable_alpha() {
        assert!(split(&toy(10), 0.0, 1).is_err());
        assert!(split(&toy(10), 1.0, 1).is_err());
        assert!(split(&toy(10), 0.05, 1).is_err());
        assert!(split(&toy(1), 0.5, 1).is_err());
        assert!(split(&toy(2), 0.99, 1).is_ok());
        assert!(split(&toy(10), 1.5, 1).is_err());
    }

    #[test]
    fn explicit_split_must_partition() {
        assert!(DataSplit::from_indices(4, vec![0, 1], vec![2, 3]).is_ok());
        assert!(DataSplit::from_indices(4, vec![0, 1], vec![1, 3]).is_err());
        assert!(DataSplit::from_indices(4, vec![0, 1], vec![2]).is_err());
        assert!(DataSplit::from_indices(4, vec![], vec![0, 1, 2, 3]).is_err());
    }

    #[test]
    fn dataset_validation() {
        let ok = Dataset::new(vec![Observation::observed(vec![0.0, 1.0], 1.0)], 2, vec![1], 1.0);
        assert!(ok.is_ok(), "y = L is inside the bound");
        assert!(Dataset::new(vec![Observation::observed(vec![0.0], 1.5)], 1, vec![0], 1.0).is_err());
        assert!(Dataset::new(vec![Observation::observed(vec![0.0], 0.5)], 2, vec![0], 1.0).is_err());
        assert!(Dataset::new(vec![], 2, vec![], 1.0).is_err());
        assert!(Dataset::new(vec![], 2, vec![2], 1.0).is_err());
        assert!(Dataset::new(vec![], 2, vec![0, 0], 1.0).is_err());
    }

    #[test]
    fn rows_hide_missing_responses() {
        let ds = Dataset::new(
            vec![Observation::observed(vec![0.1, 0.2], 0.5), Observation::missing(vec![0.3, 0.4])],
            2,
            vec![1],
            1.0,
        )
        .unwrap();
        let rows = Rows::all(&ds);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows.z(1), &[0.4]);
        assert_eq!(rows.y(1), 0.0);
        assert_eq!(rows.delta(1), 0.0);
        assert_eq!(Rows::complete_cases(&ds).len(), 1);
        assert_eq!(Rows::subset(&ds, &[1]).x(0), &[0.3, 0.4]);
    }

    #[test]
    fn derived_seeds_differ_by_coordinate() {
        let a = derive_seed(1, &[500, 0]);
        assert_eq!(a, derive_seed(1, &[500, 0]));
        assert_ne!(a, derive_seed(1, &[500, 1]));
        assert_ne!(a, derive_seed(1, &[0, 500]));
        assert_ne!(a, derive_seed(2, &[500, 0]));
    }
}
