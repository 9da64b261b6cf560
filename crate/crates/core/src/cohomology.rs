//! Traces of the LF algebra and the locally constant cohomology of the path space.
//!
//! A trace is a vector `b_0` in the eventual range of `A^T`. It determines the sequence
//! `b_k` through `A^T b_k = b_(k-1)` on that range and the distribution
//! `D(chi_e) = b_(k, r(e))` for `e` of length `k`. Two locally constant functions are
//! cohomologous when every trace gives them the same value, so the class of `f` is the vector
//! of its values under a basis of traces.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::bratteli::{DiagramData, PathTree};
use crate::error::{Error, Result};
use crate::exact;
use crate::functions::{project, sr_norm, LCFunction};
use crate::gibbs::MeasuredTree;
use crate::linalg::{null_space, orthonormal_columns, pivoted_basis};

/// Orthonormal basis of the eventual range of `A^T`, the column space of `(A^T)^N`.
///
/// The dimension is computed exactly, the basis itself in floating point.
#[derive(Debug, Clone)]
pub struct EventualRange {
    pub d: usize,
    /// `N x d`, orthonormal columns.
    pub basis: DMatrix<f64>,
}

pub fn eventual_range(d: &DiagramData) -> Result<EventualRange> {
    let n = d.n;
    let at = exact::transpose(&exact::from_integer_rows(&d.matrix));
    let power = exact::mat_pow(&at, n);
    let cols = exact::column_basis(&power);
    let dim = cols.len();
    let mut m = DMatrix::zeros(n, dim);
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            m[(i, j)] = exact::to_f64(x);
        }
    }
    let basis = orthonormal_columns(&m, 1e-10);
    if basis.ncols() != dim {
        return Err(Error::RankDeficiency { rank: basis.ncols(), expected: dim });
    }
    Ok(EventualRange { d: dim, basis })
}

fn transpose_f64(d: &DiagramData) -> DMatrix<f64> {
    DMatrix::from_fn(d.n, d.n, |i, j| d.matrix[j][i] as f64)
}

/// A trace, stored through `b_0` and the restriction of `A^T` to the eventual range.
#[derive(Debug, Clone)]
pub struct TraceFunctional {
    pub b0: Vec<f64>,
    at: DMatrix<f64>,
    range: DMatrix<f64>,
    /// `Q^T A^T Q`, invertible.
    restricted: DMatrix<f64>,
}

impl TraceFunctional {
    /// Fails with `NotInEventualRange` when `b0` is further than `1e-10 |b0|` from the range.
    pub fn new(d: &DiagramData, range: &EventualRange, b0: Vec<f64>) -> Result<Self> {
        let v = DVector::from_vec(b0.clone());
        let proj = &range.basis * (range.basis.transpose() * &v);
        let distance = (&v - proj).norm();
        if distance > 1e-10 * v.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotInEventualRange { distance });
        }
        let at = transpose_f64(d);
        let restricted = range.basis.transpose() * &at * &range.basis;
        Ok(TraceFunctional { b0, at, range: range.basis.clone(), restricted })
    }

    /// `|b_0|`.
    pub fn norm(&self) -> f64 {
        self.b0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `b_0, ..., b_k`. Each step solves `A^T b_k = b_(k-1)` in range coordinates and then
    /// applies one round of residual correction.
    pub fn sequence(&self, k: usize) -> Vec<DVector<f64>> {
        let lu = self.restricted.clone().lu();
        let mut out = Vec::with_capacity(k + 1);
        out.push(DVector::from_vec(self.b0.clone()));
        for step in 1..=k {
            let prev = &out[step - 1];
            let rhs = self.range.transpose() * prev;
            let mut c = lu.solve(&rhs).expect("restriction of A^T to its eventual range is invertible");
            let mut b = &self.range * &c;
            let resid = prev - &self.at * &b;
            if let Some(corr) = lu.solve(&(self.range.transpose() * resid)) {
                c += corr;
                b = &self.range * &c;
            }
            out.push(b);
        }
        out
    }

    pub fn b(&self, k: usize) -> DVector<f64> {
        self.sequence(k).pop().expect("sequence is non-empty")
    }

    /// `max_k |A^T b_k - b_(k-1)|_inf` over `1 <= k <= k_max`.
    pub fn recursion_residual(&self, k_max: usize) -> f64 {
        let seq = self.sequence(k_max);
        (1..=k_max).map(|k| (&self.at * &seq[k] - &seq[k - 1]).amax()).fold(0.0, f64::max)
    }
}

/// `D_tau(f) = sum_e f_e b_(K, r(e))` for `f` at level `K`.
pub fn distribution_apply(tau: &TraceFunctional, tree: &PathTree, f: &LCFunction) -> f64 {
    let b = tau.b(f.level);
    f.values.iter().enumerate().map(|(i, x)| x * b[tree.range(f.level, i)]).sum()
}

/// The invariant subspace of `A^T` for one nonzero eigenvalue, or for a conjugate pair.
#[derive(Debug, Clone, Serialize)]
pub struct EigenBlock {
    /// The eigenvalue; for a conjugate pair the one with positive imaginary part.
    pub eigenvalue: (f64, f64),
    pub algebraic_multiplicity: usize,
    /// Real basis vectors of the generalized eigenspace (two per multiplicity for a pair).
    pub basis: Vec<Vec<f64>>,
}

/// The locally constant cohomology, identified with the dual of the trace space.
#[derive(Debug, Clone)]
pub struct CohomologySpace {
    pub d: usize,
    pub range: EventualRange,
    /// Orthonormal traces `tau_i` with `b_0(tau_i)` the columns of the range basis.
    pub trace_basis: Vec<TraceFunctional>,
    /// Level-1 functions `f_j = sum_v Q_(v j) chi_(C_v)` with `D_(tau_i)(f_j) = delta_ij`.
    pub dual_basis: Vec<LCFunction>,
    pub eigen_structure: Vec<EigenBlock>,
}

impl CohomologySpace {
    /// `tree` must have depth at least 1 so the dual basis can be expressed at level 1.
    pub fn new(d: &DiagramData, tree: &PathTree) -> Result<Self> {
        let range = eventual_range(d)?;
        let trace_basis = (0..range.d)
            .map(|j| TraceFunctional::new(d, &range, range.basis.column(j).iter().copied().collect()))
            .collect::<Result<Vec<_>>>()?;
        let level = 1.min(tree.depth());
        let dual_basis = (0..range.d)
            .map(|j| LCFunction::from_fn(tree, level, |i| range.basis[(tree.source(level, i), j)]))
            .collect();
        let eigen_structure = eigen_structure(d)?;
        Ok(CohomologySpace { d: range.d, range, trace_basis, dual_basis, eigen_structure })
    }

    /// `q_A(f)`: the values of the basis traces on `f`.
    pub fn class_vector(&self, tree: &PathTree, f: &LCFunction) -> Vec<f64> {
        self.trace_basis.iter().map(|t| distribution_apply(t, tree, f)).collect()
    }

    /// `h_f = sum_i D_(tau_i)(f) f_i`, a level-1 function depending only on the class of `f`.
    pub fn canonical_representative(&self, tree: &PathTree, f: &LCFunction) -> LCFunction {
        let q = self.class_vector(tree, f);
        let level = self.dual_basis.first().map_or(1.min(tree.depth()), |g| g.level);
        let mut h = LCFunction::zero(tree, level);
        for (c, g) in q.iter().zip(&self.dual_basis) {
            for (x, y) in h.values.iter_mut().zip(&g.values) {
                *x += c * y;
            }
        }
        h
    }

    /// `D_(tau_i)(f_j)`; the identity matrix up to rounding.
    pub fn duality_matrix(&self, tree: &PathTree) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.d);
        for (j, f) in self.dual_basis.iter().enumerate() {
            for (i, v) in self.class_vector(tree, f).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Rank of the class map on the span of level-`k` indicators.
    pub fn class_map_rank(&self, tree: &PathTree, k: usize) -> usize {
        let cols = tree.len(k);
        let seqs: Vec<DVector<f64>> = self.trace_basis.iter().map(|t| t.b(k)).collect();
        let m = DMatrix::from_fn(self.d, cols, |i, e| seqs[i][tree.range(k, e)]);
        let scale = m.amax();
        pivoted_basis(&m.transpose(), 1e-10 * scale * (cols as f64).sqrt()).0.len()
    }

    /// `max_(k <= k_max) |b_k| lambda_-^k` over the basis traces: an empirical `C_tau`.
    pub fn growth_constant(&self, lambda_minus: f64, k_max: usize) -> f64 {
        self.trace_basis
            .iter()
            .flat_map(|t| t.sequence(k_max).into_iter().enumerate().map(|(k, b)| b.norm() * lambda_minus.powi(k as i32)))
            .fold(0.0, f64::max)
    }
}

/// Real generalized eigenspaces of `A^T` for the nonzero eigenvalues, grouped so that
/// conjugate pairs share one real block.
fn eigen_structure(d: &DiagramData) -> Result<Vec<EigenBlock>> {
    let at = transpose_f64(d);
    let n = d.n;
    let mut groups: Vec<(Complex<f64>, usize)> = Vec::new();
    for z in &d.perron.all_eigenvalues {
        if z.norm() <= 1e-9 * d.lambda() || z.im < -1e-9 {
            continue;
        }
        match groups.iter_mut().find(|(w, _)| (w - z).norm() <= 1e-6 * d.lambda()) {
            Some(g) => g.1 += 1,
            None => groups.push((*z, 1)),
        }
    }
    let mut blocks = Vec::new();
    for (z, mult) in groups {
        let pair = z.im > 1e-9;
        let factor = if pair {
            &at * &at - &at * (2.0 * z.re) + DMatrix::identity(n, n) * z.norm_sqr()
        } else {
            &at - DMatrix::identity(n, n) * z.re
        };
        let mut power = DMatrix::identity(n, n);
        for _ in 0..mult {
            power = &power * &factor;
        }
        let scale = power.amax().max(1.0);
        let ns = null_space(&(power / scale), 1e-8);
        let expected = if pair { 2 * mult } else { mult };
        if ns.ncols() != expected {
            return Err(Error::RankDeficiency { rank: ns.ncols(), expected });
        }
        blocks.push(EigenBlock {
            eigenvalue: (z.re, z.im.max(0.0)),
            algebraic_multiplicity: mult,
            basis: ns.column_iter().map(|c| c.iter().copied().collect()).collect(),
        });
    }
    Ok(blocks)
}

/// Indicator of the paths whose edges at positions `start..start + edges.len()` equal
/// `edges`, as a function at level `start + edges.len()`. With `start = 0` this is an ordinary
/// cylinder indicator.
pub fn window_indicator(d: &DiagramData, tree: &PathTree, start: usize, edges: &[usize]) -> Result<LCFunction> {
    if edges.is_empty() || edges.iter().any(|&e| e >= d.edge_count()) {
        return Err(Error::InvalidPath(format!("window {edges:?}")));
    }
    for w in edges.windows(2) {
        if d.edge(w[0]).range != d.edge(w[1]).source {
            return Err(Error::InvalidPath(format!("window {edges:?}")));
        }
    }
    let level = start + edges.len();
    if level > tree.depth() {
        return Err(Error::LevelExceedsTable { function_level: level, table_level: tree.depth() });
    }
    Ok(LCFunction::from_fn(tree, level, |i| {
        let mut j = i;
        for k in (start..level).rev() {
            if tree.edge(k + 1, j) != edges[k - start] {
                return 0.0;
            }
            j = tree.parent(k + 1, j);
        }
        1.0
    }))
}

/// Result of comparing `|D_tau(f)|` with the regularity seminorm of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionCheck {
    pub value: f64,
    pub norm: f64,
    /// `None` when the seminorm vanishes (constants on each `C_v`).
    pub ratio: Option<f64>,
}

/// Smallest regularity exponent for which traces extend continuously.
pub fn extension_threshold(d: &DiagramData) -> f64 {
    1.0 - d.perron.lambda_minus.ln() / d.lambda().ln()
}

pub fn trace_extension_check(
    space: &CohomologySpace,
    d: &DiagramData,
    tau: &TraceFunctional,
    mt: &MeasuredTree,
    f: &LCFunction,
    r: f64,
) -> Result<ExtensionCheck> {
    if space.d <= 1 {
        return Err(Error::NotApplicable);
    }
    let threshold = extension_threshold(d);
    if r < threshold - 1e-12 {
        return Err(Error::ThresholdViolation { gamma: r, threshold });
    }
    let value = distribution_apply(tau, &mt.tree, f).abs();
    let norm = sr_norm(mt, f, r);
    let ratio = (norm > 1e-300).then(|| value / norm);
    Ok(ExtensionCheck { value, norm, ratio })
}

/// `D_tau(Pi_k f)` for `k = 0..=K`.
pub fn projection_partial_sums(tau: &TraceFunctional, mt: &MeasuredTree, f: &LCFunction) -> Vec<f64> {
    (0..=f.level).map(|k| distribution_apply(tau, &mt.tree, &project(mt, f, k))).collect()
}
