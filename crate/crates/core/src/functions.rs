//! Locally constant functions, martingale projections, the cylinder eigenbasis and the
//! regularity norms.
//!
//! A level-`K` function stores one value per path of length `K`, in the lexicographic order
//! of [`PathTree`]. Level-0 functions are functions of the source vertex.

use serde::{Deserialize, Serialize};

use crate::bratteli::{PathId, PathTree};
use crate::error::{Error, Result};
use crate::gibbs::MeasuredTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCFunction {
    pub level: usize,
    pub values: Vec<f64>,
}

impl LCFunction {
    pub fn new(level: usize, values: Vec<f64>) -> Self {
        LCFunction { level, values }
    }

    pub fn constant(tree: &PathTree, level: usize, c: f64) -> Self {
        LCFunction { level, values: vec![c; tree.len(level)] }
    }

    pub fn zero(tree: &PathTree, level: usize) -> Self {
        Self::constant(tree, level, 0.0)
    }

    /// `chi_{C_e}` represented at `level >= |e|`.
    pub fn indicator(tree: &PathTree, e: &PathId, level: usize) -> Result<Self> {
        let i = tree
            .index_of(e)
            .ok_or_else(|| Error::InvalidPath(format!("{e} is not a path of the tree")))?;
        let mut f = LCFunction { level: e.len(), values: vec![0.0; tree.len(e.len())] };
        f.values[i] = 1.0;
        Ok(f.lift(tree, level))
    }

    pub fn from_fn(tree: &PathTree, level: usize, mut value: impl FnMut(usize) -> f64) -> Self {
        LCFunction { level, values: (0..tree.len(level)).map(&mut value).collect() }
    }

    /// Re-expresses the function at a finer level by copying each value to all descendants.
    pub fn lift(&self, tree: &PathTree, level: usize) -> Self {
        assert!(level >= self.level, "lift goes to finer levels only");
        let mut values = self.values.clone();
        for k in self.level..level {
            let mut next = vec![0.0; tree.len(k + 1)];
            for (i, &x) in values.iter().enumerate() {
                for c in tree.children(k, i) {
                    next[c] = x;
                }
            }
            values = next;
        }
        LCFunction { level, values }
    }

    /// `a self + b other`, at the finer of the two levels.
    pub fn combine(&self, a: f64, other: &LCFunction, b: f64, tree: &PathTree) -> Self {
        let level = self.level.max(other.level);
        let x = self.lift(tree, level);
        let y = other.lift(tree, level);
        LCFunction { level, values: x.values.iter().zip(&y.values).map(|(p, q)| a * p + b * q).collect() }
    }

    pub fn scaled(&self, a: f64) -> Self {
        LCFunction { level: self.level, values: self.values.iter().map(|x| a * x).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Value on the cylinder of a path of length at least `self.level`.
    pub fn value_at(&self, tree: &PathTree, level: usize, i: usize) -> f64 {
        self.values[tree.ancestor(level, i, self.level)]
    }
}

/// `integrals[k][i] = ∫_{C_e} f dmu` for every level `k <= f.level`.
fn cylinder_integrals(mt: &MeasuredTree, f: &LCFunction) -> Vec<Vec<f64>> {
    let tree = &mt.tree;
    let mut out = vec![Vec::new(); f.level + 1];
    out[f.level] = f.values.iter().zip(&mt.masses[f.level]).map(|(a, b)| a * b).collect();
    for k in (0..f.level).rev() {
        out[k] = (0..tree.len(k)).map(|i| tree.children(k, i).map(|c| out[k + 1][c]).sum()).collect();
    }
    out
}

/// `Pi_k f`, returned at level `k`. For `k = 0` this is the average over each `C_v`.
pub fn project(mt: &MeasuredTree, f: &LCFunction, k: usize) -> LCFunction {
    if k >= f.level {
        return f.lift(&mt.tree, k);
    }
    let integrals = cylinder_integrals(mt, f);
    LCFunction { level: k, values: integrals[k].iter().zip(&mt.masses[k]).map(|(a, b)| a / b).collect() }
}

/// `delta_k f = Pi_k f - Pi_{k-1} f`, returned at level `k`.
pub fn delta(mt: &MeasuredTree, f: &LCFunction, k: usize) -> LCFunction {
    assert!(k >= 1);
    let fine = project(mt, f, k);
    let coarse = project(mt, f, k - 1);
    fine.combine(1.0, &coarse, -1.0, &mt.tree)
}

/// `sum_{k=1}^{K} lambda^(r k) ||delta_k f||_inf`.
pub fn sr_norm(mt: &MeasuredTree, f: &LCFunction, r: f64) -> f64 {
    let integrals = cylinder_integrals(mt, f);
    let avg = |k: usize, i: usize| integrals[k][i] / mt.masses[k][i];
    let mut total = 0.0;
    for k in 1..=f.level {
        let mut sup: f64 = 0.0;
        for i in 0..mt.tree.len(k) {
            sup = sup.max((avg(k, i) - avg(k - 1, mt.tree.parent(k, i))).abs());
        }
        total += mt.lambda.powf(r * k as f64) * sup;
    }
    total
}

/// `sup |f(x) - f(y)| / d(x, y)^r` over points in distinct level-`K` cells.
///
/// Pairs separating at level `j` are found from the extreme values of each child subtree, so
/// the cost is linear in the number of cells.
pub fn holder_seminorm(tree: &PathTree, lambda: f64, f: &LCFunction, r: f64) -> f64 {
    let top = f.level;
    let mut hi = f.values.clone();
    let mut lo = f.values.clone();
    let mut best: f64 = 0.0;
    for k in (0..top).rev() {
        let n = tree.len(k);
        let mut nhi = vec![f64::NEG_INFINITY; n];
        let mut nlo = vec![f64::INFINITY; n];
        let weight = lambda.powf(r * k as f64);
        for i in 0..n {
            let ch = tree.children(k, i);
            for a in ch.clone() {
                for b in ch.clone() {
                    if a != b {
                        best = best.max((hi[a] - lo[b]) * weight);
                    }
                }
                nhi[i] = nhi[i].max(hi[a]);
                nlo[i] = nlo[i].min(lo[a]);
            }
        }
        hi = nhi;
        lo = nlo;
    }
    // distinct sources sit at distance 1
    for a in 0..hi.len() {
        for b in 0..lo.len() {
            if a != b {
                best = best.max(hi[a] - lo[b]);
            }
        }
    }
    best
}

/// Upper bound for `||f||_r` in terms of `|f|_s` for `s > r`.
///
/// `delta_k f` is bounded by the oscillation of `f` on a level-`(k-1)` cylinder, which is at
/// most `|f|_s lambda^(-(k-1)s)`; summing the geometric series gives
/// `lambda^r / (1 - lambda^(r-s)) |f|_s`.
pub fn holder_inclusion_bound(lambda: f64, r: f64, s: f64, holder_s: f64) -> f64 {
    assert!(s > r);
    lambda.powf(r) / (1.0 - lambda.powf(r - s)) * holder_s
}

/// Identifies a family of eigenfunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GeneratorRef {
    /// Zero-mean functions constant on each `C_v`, `v` in `V_0`.
    Root,
    /// `Y(e)` for the `index`-th path of length `level`.
    Path { level: usize, index: usize },
}

#[derive(Debug, Clone)]
pub struct Family {
    /// Number of functions `m(e)`.
    pub m: usize,
    /// Number of children the functions are spread over.
    pub width: usize,
    /// Row-major `m x width` values on the children cylinders.
    pub coef: Vec<f64>,
}

impl Family {
    pub fn value(&self, ell: usize, child: usize) -> f64 {
        self.coef[ell * self.width + child]
    }
}

/// Orthonormal basis of level-`K` functions adapted to the cylinder eigenspaces.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub level: usize,
    pub root: Option<Family>,
    /// `families[k][i]` for paths of length `k < level`; `None` where `m(e) = 0`.
    pub families: Vec<Vec<Option<Family>>>,
    /// Basis order after the constant: root functions, then paths level by level.
    pub labels: Vec<(GeneratorRef, usize)>,
}

/// Orthonormal zero-mean family for weights `w`, by Gram-Schmidt on the indicators of all
/// but the last child after the normalized constant.
fn weighted_family(w: &[f64]) -> Option<Family> {
    let d = w.len();
    if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return None;
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum::<f64>();
    let total: f64 = w.iter().sum();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / total.sqrt(); d]];
    for j in 0..d - 1 {
        let mut x = vec![0.0; d];
        x[j] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&x, b);
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= p * bi;
                }
            }
        }
        let norm = dot(&x, &x).sqrt();
        if !(norm > 1e-8 * w[j].sqrt()) {
            return None;
        }
        basis.push(x.iter().map(|v| v / norm).collect());
    }
    Some(Family { m: d - 1, width: d, coef: basis[1..].concat() })
}

pub fn build_eigenbasis(mt: &MeasuredTree, level: usize) -> Result<EigenBasis> {
    if level > mt.depth() {
        return Err(Error::LevelExceedsTable { function_level: level, table_level: mt.depth() });
    }
    let tree = &mt.tree;
    let mut labels = Vec::new();
    let root = if tree.len(0) >= 2 {
        let fam = weighted_family(&mt.masses[0]).ok_or(Error::GramSchmidtBreakdown { path: "root".into() })?;
        labels.extend((0..fam.m).map(|l| (GeneratorRef::Root, l)));
        Some(fam)
    } else {
        None
    };
    let mut families = Vec::with_capacity(level);
    for k in 0..level {
        let mut row = Vec::with_capacity(tree.len(k));
        for i in 0..tree.len(k) {
            let ch = tree.children(k, i);
            if ch.len() < 2 {
                row.push(None);
                continue;
            }
            let fam = weighted_family(&mt.masses[k + 1][ch])
                .ok_or_else(|| Error::GramSchmidtBreakdown { path: tree.path(k, i).to_string() })?;
            labels.extend((0..fam.m).map(|l| (GeneratorRef::Path { level: k, index: i }, l)));
            row.push(Some(fam));
        }
        families.push(row);
    }
    Ok(EigenBasis { level, root, families, labels })
}

/// Mean and eigenbasis coefficients of a function.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub mean: f64,
    /// One coefficient per entry of [`EigenBasis::labels`].
    pub coefficients: Vec<f64>,
}

impl EigenBasis {
    pub fn family(&self, g: GeneratorRef) -> Option<&Family> {
        match g {
            GeneratorRef::Root => self.root.as_ref(),
            GeneratorRef::Path { level, index } => self.families[level][index].as_ref(),
        }
    }

    /// Number of basis functions including the constant; equals `|P_K|`.
    pub fn dimension(&self) -> usize {
        self.labels.len() + 1
    }

    /// The basis function at position `pos` of [`EigenBasis::labels`], as a level-`K` function.
    pub fn basis_function(&self, mt: &MeasuredTree, pos: usize) -> LCFunction {
        let mut c = vec![0.0; self.labels.len()];
        c[pos] = 1.0;
        parseval_synthesize(self, mt, &Decomposition { mean: 0.0, coefficients: c })
    }
}

pub fn parseval_decompose(b: &EigenBasis, mt: &MeasuredTree, f: &LCFunction) -> Result<Decomposition> {
    if f.level > b.level {
        return Err(Error::LevelExceedsTable { function_level: f.level, table_level: b.level });
    }
    let f = f.lift(&mt.tree, b.level);
    let integrals = cylinder_integrals(mt, &f);
    let tree = &mt.tree;
    let mut coefficients = Vec::with_capacity(b.labels.len());
    if let Some(fam) = &b.root {
        for l in 0..fam.m {
            coefficients.push((0..fam.width).map(|v| fam.value(l, v) * integrals[0][v]).sum());
        }
    }
    for (k, row) in b.families.iter().enumerate() {
        for (i, fam) in row.iter().enumerate() {
            let Some(fam) = fam else { continue };
            let start = tree.children(k, i).start;
            for l in 0..fam.m {
                coefficients.push((0..fam.width).map(|c| fam.value(l, c) * integrals[k + 1][start + c]).sum());
            }
        }
    }
    Ok(Decomposition { mean: integrals[0].iter().sum(), coefficients })
}

pub fn parseval_synthesize(b: &EigenBasis, mt: &MeasuredTree, dec: &Decomposition) -> LCFunction {
    let tree = &mt.tree;
    let mut pos = 0;
    let mut values = vec![dec.mean; tree.len(0)];
    if let Some(fam) = &b.root {
        for l in 0..fam.m {
            for (v, x) in values.iter_mut().enumerate() {
                *x += dec.coefficients[pos] * fam.value(l, v);
            }
            pos += 1;
        }
    }
    for (k, row) in b.families.iter().enumerate() {
        let mut next = vec![0.0; tree.len(k + 1)];
        for (i, fam) in row.iter().enumerate() {
            let start = tree.children(k, i).start;
            for c in tree.children(k, i) {
                next[c] = values[i];
            }
            if let Some(fam) = fam {
                for l in 0..fam.m {
                    for c in 0..fam.width {
                        next[start + c] += dec.coefficients[pos] * fam.value(l, c);
                    }
                    pos += 1;
                }
            }
        }
        values = next;
    }
    LCFunction { level: b.level, values }
}

/// `||f||^2_{L^2}` computed directly from cell values.
pub fn l2_norm_sq(mt: &MeasuredTree, f: &LCFunction) -> f64 {
    f.values.iter().zip(&mt.masses[f.level]).map(|(x, m)| x * x * m).sum()
}

pub fn l2_inner(mt: &MeasuredTree, f: &LCFunction, g: &LCFunction) -> f64 {
    let level = f.level.max(g.level);
    let f = f.lift(&mt.tree, level);
    let g = g.lift(&mt.tree, level);
    f.values.iter().zip(&g.values).zip(&mt.masses[level]).map(|((x, y), m)| x * y * m).sum()
}
