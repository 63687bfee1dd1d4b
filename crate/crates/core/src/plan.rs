//! Precomputed kernel weights between a fixed set of query points and a fixed
//! set of source rows.
//!
//! Selection evaluates the same kernel sums `sum_j K((q - s_j)/h) v_j` for many
//! weight vectors `v` (one per cover member). The weights do not depend on
//! `v`, so they are computed once. One-dimensional indicator kernels use
//! sorted windows and prefix sums, making each application `O(q + s)`;
//! everything else uses a sparse row-compressed matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::KernelSpec;

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    mass: Vec<f64>,
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Sparse { offsets: Vec<usize>, cols: Vec<u32>, weights: Vec<f64> },
    /// Sources sorted by coordinate; query `q` sees sorted positions `lo[q]..hi[q]`.
    Windows { order: Vec<u32>, lo: Vec<u32>, hi: Vec<u32>, exclude_self: bool },
}

impl Plan {
    /// `queries` and `sources` are row-major with `dim` columns. With
    /// `exclude_self`, queries and sources must be the same rows and query `q`
    /// skips source `q` (leave-one-out sums).
    pub(crate) fn build(kernel: &KernelSpec, h: f64, queries: &[f64], sources: &[f64], dim: usize, exclude_self: bool) -> Plan {
        let nq = queries.len() / dim;
        let ns = sources.len() / dim;
        debug_assert!(!exclude_self || nq == ns);
        if dim == 1 && kernel.is_indicator() {
            return Self::windows(kernel, h, queries, sources, exclude_self);
        }
        let mut offsets = Vec::with_capacity(nq + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut mass = Vec::with_capacity(nq);
        offsets.push(0);
        for q in 0..nq {
            let xq = &queries[q * dim..(q + 1) * dim];
            let mut total = 0.0;
            for j in 0..ns {
                if exclude_self && j == q {
                    continue;
                }
                let w = kernel.weight(xq, &sources[j * dim..(j + 1) * dim], h);
                if w > 0.0 {
                    cols.push(j as u32);
                    weights.push(w);
                    total += w;
                }
            }
            offsets.push(cols.len());
            mass.push(total);
        }
        Plan { mass, inner: Inner::Sparse { offsets, cols, weights } }
    }

    fn windows(kernel: &KernelSpec, h: f64, queries: &[f64], sources: &[f64], exclude_self: bool) -> Plan {
        let mut order: Vec<u32> = (0..sources.len() as u32).collect();
        order.sort_by(|&a, &b| sources[a as usize].total_cmp(&sources[b as usize]));
        let sorted: Vec<f64> = order.iter().map(|&j| sources[j as usize]).collect();
        let inside = |q: f64, s: f64| kernel.weight(&[q], &[s], h) > 0.0;
        let mut lo = Vec::with_capacity(queries.len());
        let mut hi = Vec::with_capacity(queries.len());
        let mut mass = Vec::with_capacity(queries.len());
        for &q in queries {
            // membership is contiguous in sorted order: |q - s| is monotone on each side
            let a = sorted.partition_point(|&s| s < q && !inside(q, s));
            let b = sorted.partition_point(|&s| s <= q || inside(q, s));
            lo.push(a as u32);
            hi.push(b as u32);
            let count = b - a - exclude_self as usize;
            mass.push(count as f64);
        }
        Plan { mass, inner: Inner::Windows { order, lo, hi, exclude_self } }
    }

    /// `sum_j w_qj` for every query.
    pub(crate) fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `sum_j w_qj v_j` for every query.
    pub(crate) fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mass.len()];
        self.apply_into(v, &mut out, &mut Vec::new());
        out
    }

    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        match &self.inner {
            Inner::Sparse { offsets, cols, weights } => {
                for (q, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for k in offsets[q]..offsets[q + 1] {
                        s += weights[k] * v[cols[k] as usize];
                    }
                    *o = s;
                }
            }
            Inner::Windows { order, lo, hi, exclude_self } => {
                scratch.clear();
                scratch.reserve(order.len() + 1);
                let mut acc = 0.0;
                scratch.push(0.0);
                for &j in order {
                    acc += v[j as usize];
                    scratch.push(acc);
                }
                for (q, o) in out.iter_mut().enumerate() {
                    let (a, b) = (lo[q] as usize, hi[q] as usize);
                    let mut s = scratch[b] - scratch[a];
                    if *exclude_self {
                        s -= v[q];
                    }
                    *o = s;
                }
            }
        }
    }

    /// Number of sources with positive weight for query `q`.
    #[cfg(test)]
    pub(crate) fn support(&self, q: usize) -> usize {
        match &self.inner {
            Inner::Sparse { offsets, .. } => offsets[q + 1] - offsets[q],
            Inner::Windows { lo, hi, exclude_self, .. } => (hi[q] - lo[q]) as usize - *exclude_self as usize,
        }
    }
}

/// Direct evaluation used by the single-point estimators: returns
/// `(sum_j w_j, sum_j w_j v_j)` over all sources.
#[allow(dead_code)]
pub(crate) fn direct_sums(kernel: &KernelSpec, h: f64, x: &[f64], sources: &[f64], v: &[f64]) -> (f64, f64) {
    let dim = x.len();
    let mut mass = 0.0;
    let mut s = 0.0;
    for (j, vj) in v.iter().enumerate() {
        let w = kernel.weight(x, &sources[j * dim..(j + 1) * dim], h);
        mass += w;
        s += w * vj;
    }
    (mass, s)
}
