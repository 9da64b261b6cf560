//! Stationary simple Bratteli diagrams: primitivity, Perron-Frobenius data, finite paths
//! and the ultrametric geometry of cylinder sets.
//!
//! The diagram is given by an `N x N` non-negative integer matrix `A` where `A[i][j]` counts
//! the edges from vertex `j` on one level to vertex `i` on the next. Edges carry dense
//! identifiers assigned in row-major order over `(i, j)`, then multiplicity; that order fixes
//! the lexicographic order of paths used everywhere else.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::linalg;

pub type EdgeId = usize;

/// Largest number of paths enumerated at a single level unless the caller says otherwise.
pub const DEFAULT_PATH_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub range: usize,
}

/// Returns the smallest `m` with `A^m` entrywise positive.
///
/// The search stops at the Wielandt bound `(N - 1)^2 + 1`, beyond which no primitive matrix
/// needs to go.
pub fn validate_primitive(rows: &[Vec<u64>]) -> Result<usize> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::NotSquare { rows: 0, bad_row: 0, bad_len: 0 });
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::NotSquare { rows: n, bad_row: i, bad_len: row.len() });
    }
    for v in 0..n {
        if rows[v].iter().all(|&a| a == 0) {
            return Err(Error::ZeroLine { vertex: v, kind: "row" });
        }
        if rows.iter().all(|r| r[v] == 0) {
            return Err(Error::ZeroLine { vertex: v, kind: "column" });
        }
    }
    let pattern: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&a| a > 0).collect()).collect();
    let bound = (n - 1) * (n - 1) + 1;
    let mut power = pattern.clone();
    for m in 1..=bound {
        if power.iter().all(|r| r.iter().all(|&b| b)) {
            return Ok(m);
        }
        power = bool_product(&power, &pattern);
    }
    Err(Error::NotPrimitive { bound })
}

fn bool_product(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).any(|k| a[i][k] && b[k][j])).collect())
        .collect()
}

/// Perron-Frobenius data of a primitive matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronData {
    pub lambda: f64,
    /// `A r = lambda r`, scaled so that `left . right = 1`.
    pub right_pf: Vec<f64>,
    /// `A^T l = lambda l`, entries summing to 1.
    pub left_pf: Vec<f64>,
    #[serde(skip)]
    pub all_eigenvalues: Vec<Complex64>,
    /// Smallest modulus among the nonzero eigenvalues. Equals `lambda` when that is the only
    /// nonzero eigenvalue.
    pub lambda_minus: f64,
    /// Number of nonzero eigenvalues with algebraic multiplicity, i.e. `rank(A^N)`.
    pub nonzero_count: usize,
}

/// Computes Perron-Frobenius data for the matrix of `d`.
pub fn perron_data(d: &DiagramData) -> Result<PerronData> {
    perron_from_rows(&d.matrix)
}

fn perron_from_rows(rows: &[Vec<u64>]) -> Result<PerronData> {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j] as f64);
    let (lambda, right, left) = linalg::perron_pair(&m, "Perron eigenvector")?;
    let left = &left / left.sum();
    let right = &right / left.dot(&right);

    let mut eigs: Vec<Complex64> = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect();
    eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));

    let nonzero_count = exact::rank_of_power(rows, n);
    let lambda_minus = if nonzero_count == 0 { lambda } else { eigs[nonzero_count - 1].norm().min(lambda) };
    if let Some(second) = eigs.get(1) {
        if second.norm() >= lambda * (1.0 - 1e-9) {
            return Err(Error::ConvergenceFailure {
                what: "Perron eigenvalue separation",
                residual: lambda - second.norm(),
            });
        }
    }
    Ok(PerronData {
        lambda,
        right_pf: right.iter().cloned().collect(),
        left_pf: left.iter().cloned().collect(),
        all_eigenvalues: eigs,
        lambda_minus: if nonzero_count <= 1 { lambda } else { lambda_minus },
        nonzero_count,
    })
}

/// Stationary simple Bratteli diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramData {
    pub matrix: Vec<Vec<u64>>,
    pub n: usize,
    pub primitivity_exponent: usize,
    edges: Vec<Edge>,
    /// `edge_table[j][i]`: edges with source `j` and range `i`, in identifier order.
    edge_table: Vec<Vec<Vec<EdgeId>>>,
    out_edges: Vec<Vec<EdgeId>>,
    forced_steps: Vec<usize>,
    pub perron: PerronData,
}

impl DiagramData {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self> {
        let primitivity_exponent = validate_primitive(&rows)?;
        let n = rows.len();
        let mut edges = Vec::new();
        let mut edge_table = vec![vec![Vec::new(); n]; n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                for _ in 0..count {
                    edge_table[j][i].push(edges.len());
                    edges.push(Edge { source: j, range: i });
                }
            }
        }
        let mut out_edges = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            out_edges[e.source].push(id);
        }
        if out_edges.iter().all(|o| o.len() < 2) {
            return Err(Error::DegenerateCylinder);
        }
        let forced_steps = (0..n)
            .map(|v| {
                let mut steps = 0;
                let mut cur = v;
                while out_edges[cur].len() == 1 {
                    cur = edges[out_edges[cur][0]].range;
                    steps += 1;
                    assert!(steps <= n, "out-degree-one cycle in a primitive diagram");
                }
                steps
            })
            .collect();
        let perron = perron_from_rows(&rows)?;
        Ok(DiagramData { matrix: rows, n, primitivity_exponent, edges, edge_table, out_edges, forced_steps, perron })
    }

    pub fn lambda(&self) -> f64 {
        self.perron.lambda
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edges_between(&self, source: usize, range: usize) -> &[EdgeId] {
        &self.edge_table[source][range]
    }

    pub fn out_edges(&self, v: usize) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_edges[v].len()
    }

    /// Number of consecutive out-degree-one steps from `v` before reaching a branching vertex.
    pub fn forced_steps(&self, v: usize) -> usize {
        self.forced_steps[v]
    }

    /// `h_k = A^k 1`.
    pub fn height_vector(&self, k: usize) -> Vec<u128> {
        let mut h = vec![1u128; self.n];
        for _ in 0..k {
            h = (0..self.n)
                .map(|i| (0..self.n).map(|j| self.matrix[i][j] as u128 * h[j]).sum())
                .collect();
        }
        h
    }

    /// `|P_k| = 1^T A^k 1`.
    pub fn path_count(&self, k: usize) -> u128 {
        let mut counts = vec![1u128; self.n];
        for _ in 0..k {
            let mut next = vec![0u128; self.n];
            for (v, &c) in counts.iter().enumerate() {
                for &e in &self.out_edges[v] {
                    next[self.edges[e].range] = next[self.edges[e].range].saturating_add(c);
                }
            }
            counts = next;
        }
        counts.iter().fold(0u128, |a, &b| a.saturating_add(b))
    }
}

/// A finite path: a vertex of `V_0` followed by composable edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathId {
    pub source: usize,
    pub edges: Vec<EdgeId>,
}

impl PathId {
    pub fn vertex(v: usize) -> Self {
        PathId { source: v, edges: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn range(&self, d: &DiagramData) -> usize {
        self.edges.last().map_or(self.source, |&e| d.edge(e).range)
    }

    pub fn validate(&self, d: &DiagramData) -> Result<()> {
        if self.source >= d.n {
            return Err(Error::InvalidPath(format!("{self}: no vertex {}", self.source)));
        }
        let mut at = self.source;
        for &e in &self.edges {
            if e >= d.edge_count() || d.edge(e).source != at {
                return Err(Error::InvalidPath(format!("{self}: edge {e} does not leave vertex {at}")));
            }
            at = d.edge(e).range;
        }
        Ok(())
    }

    /// `e e'`, valid iff `s(e') = r(e)`.
    pub fn concat(&self, tail: &[EdgeId], d: &DiagramData) -> Result<PathId> {
        let mut p = self.clone();
        p.edges.extend_from_slice(tail);
        p.validate(d)?;
        Ok(p)
    }

    pub fn prefix(&self, k: usize) -> PathId {
        PathId { source: self.source, edges: self.edges[..k].to_vec() }
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.source)?;
        for (i, e) in self.edges.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for PathId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (v, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidPath(format!("{s:?}: expected \"v:e1,e2,...\"")))?;
        let source = v.trim().parse().map_err(|_| Error::InvalidPath(format!("{s:?}: bad vertex")))?;
        let edges = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|e| e.trim().parse().map_err(|_| Error::InvalidPath(format!("{s:?}: bad edge {e:?}"))))
                .collect::<Result<_>>()?
        };
        Ok(PathId { source, edges })
    }
}

/// All paths of length `k`, ordered lexicographically by `(source, edges)`.
pub fn enumerate_paths(d: &DiagramData, k: usize, cap: usize) -> Result<Vec<PathId>> {
    let tree = PathTree::build(d, k, cap)?;
    Ok((0..tree.len(k)).map(|i| tree.path(k, i)).collect())
}

/// Number of leading edges on which two equal-length paths agree; 0 when the sources differ.
pub fn common_prefix_length(a: &PathId, b: &PathId) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.source != b.source {
        return Ok(0);
    }
    Ok(a.edges.iter().zip(&b.edges).take_while(|(x, y)| x == y).count())
}

/// Distance between points of two distinct cylinders of the same length: `lambda^-j` where
/// `j` is the common prefix length. Zero for identical paths.
pub fn cylinder_distance(d: &DiagramData, a: &PathId, b: &PathId) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let j = common_prefix_length(a, b)?;
    Ok(d.lambda().powi(-(j as i32)))
}

/// Exact metric diameter of `C_e`: `lambda^-(k + t)` with `t` the number of forced
/// out-degree-one steps after `r(e)`.
pub fn cylinder_diameter(d: &DiagramData, e: &PathId) -> Result<f64> {
    e.validate(d)?;
    let t = d.forced_steps(e.range(d));
    Ok(d.lambda().powi(-((e.len() + t) as i32)))
}

#[derive(Debug, Clone, Default)]
struct TreeLevel {
    parent: Vec<u32>,
    edge: Vec<u32>,
    source: Vec<u32>,
    range: Vec<u32>,
    /// Offsets into the next level; `len + 1` entries once the next level exists.
    child_start: Vec<u32>,
}

/// All finite paths up to a fixed depth, stored level by level in lexicographic order.
///
/// Children of a path are contiguous in the next level and appear in edge-identifier order,
/// so path indices at every level agree with [`enumerate_paths`].
#[derive(Debug, Clone)]
pub struct PathTree {
    levels: Vec<TreeLevel>,
}

impl PathTree {
    pub fn build(d: &DiagramData, depth: usize, cap: usize) -> Result<Self> {
        let mut levels = Vec::with_capacity(depth + 1);
        levels.push(TreeLevel {
            parent: vec![u32::MAX; d.n],
            edge: vec![u32::MAX; d.n],
            source: (0..d.n as u32).collect(),
            range: (0..d.n as u32).collect(),
            child_start: Vec::new(),
        });
        if d.n > cap {
            return Err(Error::CapacityExceeded { level: 0, paths: d.n as u128, cap });
        }
        for k in 0..depth {
            let cur = &levels[k];
            let total: u128 = cur.range.iter().map(|&r| d.out_degree(r as usize) as u128).sum();
            if total > cap as u128 || total > u32::MAX as u128 {
                return Err(Error::CapacityExceeded { level: k + 1, paths: total, cap });
            }
            let total = total as usize;
            let mut next = TreeLevel {
                parent: Vec::with_capacity(total),
                edge: Vec::with_capacity(total),
                source: Vec::with_capacity(total),
                range: Vec::with_capacity(total),
                child_start: Vec::new(),
            };
            let mut child_start = Vec::with_capacity(cur.range.len() + 1);
            for i in 0..cur.range.len() {
                child_start.push(next.parent.len() as u32);
                for &e in d.out_edges(cur.range[i] as usize) {
                    next.parent.push(i as u32);
                    next.edge.push(e as u32);
                    next.source.push(cur.source[i]);
                    next.range.push(d.edge(e).range as u32);
                }
            }
            child_start.push(next.parent.len() as u32);
            levels[k].child_start = child_start;
            levels.push(next);
        }
        Ok(PathTree { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn len(&self, level: usize) -> usize {
        self.levels[level].range.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn parent(&self, level: usize, i: usize) -> usize {
        self.levels[level].parent[i] as usize
    }

    pub fn edge(&self, level: usize, i: usize) -> EdgeId {
        self.levels[level].edge[i] as usize
    }

    pub fn source(&self, level: usize, i: usize) -> usize {
        self.levels[level].source[i] as usize
    }

    pub fn range(&self, level: usize, i: usize) -> usize {
        self.levels[level].range[i] as usize
    }

    pub fn children(&self, level: usize, i: usize) -> Range<usize> {
        let cs = &self.levels[level].child_start;
        cs[i] as usize..cs[i + 1] as usize
    }

    pub fn ancestor(&self, level: usize, mut i: usize, target: usize) -> usize {
        assert!(target <= level);
        for l in (target + 1..=level).rev() {
            i = self.parent(l, i);
        }
        i
    }

    pub fn path(&self, level: usize, mut i: usize) -> PathId {
        let mut edges = vec![0; level];
        for l in (1..=level).rev() {
            edges[l - 1] = self.edge(l, i);
            i = self.parent(l, i);
        }
        PathId { source: i, edges }
    }

    /// Index of `p` at level `p.len()`, if the path exists in this tree.
    pub fn index_of(&self, p: &PathId) -> Option<usize> {
        if p.len() > self.depth() || p.source >= self.len(0) {
            return None;
        }
        let mut i = p.source;
        for (k, &e) in p.edges.iter().enumerate() {
            let r = self.children(k, i);
            i = r.clone().find(|&c| self.edge(k + 1, c) == e)?;
        }
        Some(i)
    }

    /// Number of common leading edges of two cells at the same level.
    pub fn common_prefix(&self, level: usize, mut a: usize, mut b: usize) -> usize {
        let mut l = level;
        while a != b && l > 0 {
            a = self.parent(l, a);
            b = self.parent(l, b);
            l -= 1;
        }
        if a == b {
            l
        } else {
            0
        }
    }
}
