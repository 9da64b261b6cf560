//! Heat kernel of the semigroup generated by the Laplacian, from the eigenbasis expansion
//! truncated at a fixed level, with an explicit bound on the discarded tail.

use serde::Serialize;

use crate::bratteli::PathId;
use crate::error::{Error, Result};
use crate::functions::EigenBasis;
use crate::gibbs::MeasuredTree;
use crate::spectral::SpectrumTable;

/// Truncated heat kernel on level-`K` cells, `K` being the level of the eigenbasis.
pub struct HeatKernel<'a> {
    pub basis: &'a EigenBasis,
    pub mt: &'a MeasuredTree,
    pub table: &'a SpectrumTable,
    /// Lower bound for every child-to-parent mass ratio, at all levels.
    pub child_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatFit {
    /// Smallest observed `p_t / profile`.
    pub c1: f64,
    /// Largest observed `p_t / profile`.
    pub c2: f64,
    pub ratio: f64,
    pub samples: usize,
}

impl<'a> HeatKernel<'a> {
    pub fn new(basis: &'a EigenBasis, mt: &'a MeasuredTree, table: &'a SpectrumTable, child_ratio: f64) -> Result<Self> {
        if table.per_path.is_none() || table.max_level + 1 < basis.level || mt.depth() < basis.level {
            return Err(Error::LevelExceedsTable { function_level: basis.level, table_level: table.max_level + 1 });
        }
        super::check_gamma_strict(table.gamma, table.d_psi)?;
        Ok(HeatKernel { basis, mt, table, child_ratio })
    }

    pub fn level(&self) -> usize {
        self.basis.level
    }

    pub fn cell(&self, p: &PathId) -> Result<usize> {
        if p.len() != self.level() {
            return Err(Error::LengthMismatch { left: p.len(), right: self.level() });
        }
        self.mt.tree.index_of(p).ok_or_else(|| Error::InvalidPath(p.to_string()))
    }

    /// `1 + sum exp(-t lambda_j) u_j(x) u_j(y)` over the basis functions of levels below `K`.
    pub fn value(&self, x: usize, y: usize, t: f64) -> f64 {
        let tree = &self.mt.tree;
        let k_top = self.level();
        let mut p = 1.0;
        if let Some(fam) = &self.basis.root {
            let (sx, sy) = (tree.source(k_top, x), tree.source(k_top, y));
            let s: f64 = (0..fam.m).map(|l| fam.value(l, sx) * fam.value(l, sy)).sum();
            p += (-t).exp() * s;
        }
        let per_path = self.table.per_path.as_ref().expect("checked at construction");
        for k in 0..k_top {
            let ax = tree.ancestor(k_top, x, k);
            if ax != tree.ancestor(k_top, y, k) {
                break;
            }
            let Some(fam) = &self.basis.families[k][ax] else { continue };
            let start = tree.children(k, ax).start;
            let cx = tree.ancestor(k_top, x, k + 1) - start;
            let cy = tree.ancestor(k_top, y, k + 1) - start;
            let s: f64 = (0..fam.m).map(|l| fam.value(l, cx) * fam.value(l, cy)).sum();
            p += (-t * per_path[k][ax]).exp() * s;
        }
        p
    }

    /// Bound on the pointwise contribution of all levels `k >= K`.
    ///
    /// At level `k` only the common ancestor of `x` and `y` contributes, with at most
    /// `exp(-t L_k) / mu(child)`: the reproducing kernel of the functions on the children of
    /// a cell is bounded by the reciprocal child mass. Masses at level `k + 1` are at least
    /// `mu_min(K) c^(k + 1 - K)`, and eigenvalues at level `k` are at least the table
    /// threshold and at least `mu_min(K) c^(k - K) lambda^(gamma k)`.
    pub fn tail_bound(&self, t: f64) -> f64 {
        let k0 = self.level();
        let c = self.child_ratio;
        let lam = self.mt.lambda;
        let gamma = self.table.gamma;
        if !(c * lam.powf(gamma) > 1.0) || !(t > 0.0) {
            return f64::INFINITY;
        }
        let mu_min = self.mt.min_mass(k0);
        let floor = self.table.threshold;
        let mut total = 0.0;
        for j in 0..1_000_000usize {
            let k = k0 + j;
            let growth = (mu_min.ln() + j as f64 * c.ln() + gamma * k as f64 * lam.ln()).exp();
            let lk = floor.max(growth);
            let log_term = -t * lk - mu_min.ln() - (j + 1) as f64 * c.ln();
            let term = log_term.exp();
            total += term;
            if growth > floor && term <= 1e-17 * total.max(f64::MIN_POSITIVE) {
                return total;
            }
        }
        f64::INFINITY
    }

    /// The kernel value with its tail bound, refusing when the bound exceeds `tolerance`.
    pub fn checked(&self, x: usize, y: usize, t: f64, tolerance: f64) -> Result<(f64, f64)> {
        let bound = self.tail_bound(t);
        if !(bound <= tolerance) {
            return Err(Error::TruncationError { bound, tolerance });
        }
        Ok((self.value(x, y, t), bound))
    }

    /// Distance between two level-`K` cells, 0 for the same cell.
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return 0.0;
        }
        let j = self.mt.tree.common_prefix(self.level(), x, y);
        self.mt.lambda.powi(-(j as i32))
    }

    /// `t^(-d/(gamma-d)) (1 + d(x,y) / t^(1/(gamma-d)))^(-gamma)`.
    pub fn profile(&self, dist: f64, t: f64) -> f64 {
        let a = self.table.gamma - self.table.d_psi;
        t.powf(-self.table.d_psi / a) * (1.0 + dist / t.powf(1.0 / a)).powf(-self.table.gamma)
    }

    pub fn estimate_check(&self, pairs: &[(usize, usize)], times: &[f64]) -> HeatFit {
        let mut c1 = f64::INFINITY;
        let mut c2: f64 = 0.0;
        let mut samples = 0;
        for &(x, y) in pairs {
            let dist = self.distance(x, y);
            for &t in times {
                let r = self.value(x, y, t) / self.profile(dist, t);
                c1 = c1.min(r);
                c2 = c2.max(r);
                samples += 1;
            }
        }
        HeatFit { c1, c2, ratio: c2 / c1, samples }
    }
}
