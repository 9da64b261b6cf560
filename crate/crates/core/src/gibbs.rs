//! Gibbs measures of finite-depth potentials on the edge shift of the path space.
//!
//! A depth-`m` potential assigns a value to every admissible block of `m` consecutive edges.
//! Recoding paths as sequences of overlapping `m`-blocks turns the Ruelle operator into the
//! weighted matrix `M[w, w'] = exp(psi(w))` on admissible overlaps, whose Perron data gives
//! the pressure, the equilibrium state and the cylinder masses in closed form.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bratteli::{DiagramData, EdgeId, PathId, PathTree};
use crate::error::{Error, Result};
use crate::functions::LCFunction;
use crate::linalg;

/// A locally constant potential of finite depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub depth: usize,
    /// Values on admissible blocks; blocks not listed carry the value 0.
    pub table: BTreeMap<Vec<EdgeId>, f64>,
}

impl Potential {
    /// `psi = 0`, whose Gibbs measure is the Parry measure.
    pub fn zero() -> Self {
        Potential { depth: 1, table: BTreeMap::new() }
    }

    pub fn new(depth: usize, table: BTreeMap<Vec<EdgeId>, f64>) -> Self {
        Potential { depth, table }
    }

    /// Depth-one potential from a value per edge.
    pub fn from_edge_values(values: &[f64]) -> Self {
        Potential { depth: 1, table: values.iter().enumerate().map(|(e, &v)| (vec![e], v)).collect() }
    }

    /// Builds a potential from block strings `"e1,e2,..."`.
    pub fn from_block_strings<'a>(depth: usize, entries: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (key, value) in entries {
            let block = key
                .split(',')
                .map(|t| t.trim().parse::<EdgeId>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidPotential(format!("bad block {key:?}")))?;
            table.insert(block, value);
        }
        Ok(Potential { depth, table })
    }

    pub fn value(&self, block: &[EdgeId]) -> f64 {
        self.table.get(block).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.table.values().all(|&v| v == 0.0)
    }

    /// Checks depth, admissibility of every listed block and finiteness of values.
    pub fn validate(&self, d: &DiagramData) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidPotential("depth must be at least 1".into()));
        }
        for (block, &v) in &self.table {
            if block.len() != self.depth || !is_admissible(d, block) {
                return Err(Error::InvalidPotential(format!("{block:?} is not an admissible {}-block", self.depth)));
            }
            if !v.is_finite() {
                return Err(Error::InvalidPotential(format!("value on {block:?} is not finite")));
            }
        }
        Ok(())
    }

    /// Admissible blocks that take the default value because the table omits them.
    pub fn missing_blocks(&self, d: &DiagramData) -> Vec<Vec<EdgeId>> {
        admissible_blocks(d, self.depth).into_iter().filter(|b| !self.table.contains_key(b)).collect()
    }
}

fn is_admissible(d: &DiagramData, block: &[EdgeId]) -> bool {
    block.iter().all(|&e| e < d.edge_count())
        && block.windows(2).all(|w| d.edge(w[0]).range == d.edge(w[1]).source)
}

/// All chains of `m` consecutive edges, in lexicographic order of their edge identifiers.
pub fn admissible_blocks(d: &DiagramData, m: usize) -> Vec<Vec<EdgeId>> {
    let mut blocks: Vec<Vec<EdgeId>> = (0..d.edge_count()).map(|e| vec![e]).collect();
    for _ in 1..m {
        let mut next = Vec::new();
        for b in &blocks {
            let r = d.edge(*b.last().unwrap()).range;
            for &e in d.out_edges(r) {
                let mut nb = b.clone();
                nb.push(e);
                next.push(nb);
            }
        }
        blocks = next;
    }
    blocks.sort();
    blocks
}

/// Equilibrium data of a potential.
#[derive(Debug, Clone)]
pub struct GibbsData {
    pub diagram: DiagramData,
    pub potential: Potential,
    pub blocks: Vec<Vec<EdgeId>>,
    block_index: HashMap<Vec<EdgeId>, usize>,
    /// `successor[w * |E| + e]`: the block following `w` when the path continues with `e`.
    successor: Vec<u32>,
    pub transfer: DMatrix<f64>,
    /// `Lambda_psi`, the Perron root of the transfer matrix.
    pub big_lambda: f64,
    /// Left and right Perron vectors of the transfer matrix with `u . v = 1`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    v_total: f64,
    pub pressure: f64,
    pub integral_psi: f64,
    pub entropy: f64,
    pub d_psi: f64,
    /// Admissible blocks missing from the potential table.
    pub warnings: Vec<String>,
}

/// Builds the Gibbs measure of `psi` on the path space of `d`.
pub fn build_gibbs(d: &DiagramData, psi: &Potential) -> Result<GibbsData> {
    psi.validate(d)?;
    let m = psi.depth;
    let blocks = admissible_blocks(d, m);
    let block_index: HashMap<Vec<EdgeId>, usize> = blocks.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
    let ne = d.edge_count();
    let nb = blocks.len();
    let mut successor = vec![u32::MAX; nb * ne];
    let mut transfer = DMatrix::zeros(nb, nb);
    for (w, b) in blocks.iter().enumerate() {
        let weight = psi.value(b).exp();
        for &e in d.out_edges(d.edge(*b.last().unwrap()).range) {
            let mut next = b[1..].to_vec();
            next.push(e);
            let w2 = block_index[&next];
            successor[w * ne + e] = w2 as u32;
            transfer[(w, w2)] = weight;
        }
    }
    let (big_lambda, v, u) = linalg::perron_pair(&transfer, "transfer operator Perron vector")?;
    let u = &u / u.dot(&v);
    let pressure = big_lambda.ln();
    let integral_psi: f64 = blocks.iter().enumerate().map(|(w, b)| u[w] * v[w] * psi.value(b)).sum();
    let entropy = pressure - integral_psi;
    let d_psi = entropy / d.lambda().ln();
    let warnings = psi
        .missing_blocks(d)
        .into_iter()
        .filter(|_| !psi.table.is_empty())
        .map(|b| format!("block {b:?} missing from the potential table, using 0"))
        .collect();
    Ok(GibbsData {
        diagram: d.clone(),
        potential: psi.clone(),
        block_index,
        successor,
        transfer,
        big_lambda,
        v_total: v.sum(),
        u: u.iter().copied().collect(),
        v: v.iter().copied().collect(),
        blocks,
        pressure,
        integral_psi,
        entropy,
        d_psi,
        warnings,
    })
}

impl GibbsData {
    pub fn depth(&self) -> usize {
        self.potential.depth
    }

    pub fn lambda(&self) -> f64 {
        self.diagram.lambda()
    }

    pub fn block_id(&self, block: &[EdgeId]) -> Option<usize> {
        self.block_index.get(block).copied()
    }

    pub fn successor(&self, w: usize, e: EdgeId) -> Option<usize> {
        let s = self.successor[w * self.diagram.edge_count() + e];
        (s != u32::MAX).then_some(s as usize)
    }

    /// Mass of a block cylinder at level `m`: `v(w) / sum(v)`.
    pub fn block_mass(&self, w: usize) -> f64 {
        self.v[w] / self.v_total
    }

    /// `mu(C_{e e_new}) / mu(C_e)` for `e` of length at least `m` with last block `w` and
    /// extended last block `w_new`.
    pub fn transition(&self, w: usize, w_new: usize) -> f64 {
        self.transfer[(w, w_new)] * self.v[w_new] / (self.big_lambda * self.v[w])
    }

    /// Smallest one-step conditional probability of the Markov chain on blocks.
    pub fn min_transition(&self) -> f64 {
        let mut best = f64::INFINITY;
        for w in 0..self.blocks.len() {
            for w2 in 0..self.blocks.len() {
                if self.transfer[(w, w2)] > 0.0 {
                    best = best.min(self.transition(w, w2));
                }
            }
        }
        best
    }

    /// Equilibrium weight `u(w) v(w)` of each block.
    pub fn equilibrium(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(a, b)| a * b).collect()
    }
}

/// `mu_psi(C_e)`; for a length-0 path this is the mass of `C_v`.
pub fn cylinder_measure(g: &GibbsData, e: &PathId) -> Result<f64> {
    e.validate(&g.diagram)?;
    let m = g.depth();
    let k = e.len();
    if k < m {
        let total = g
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b[..k] == e.edges[..] && g.diagram.edge(b[0]).source == e.source)
            .map(|(w, _)| g.block_mass(w))
            .sum();
        return Ok(total);
    }
    let mut log_weight = 0.0;
    for i in 0..k - m {
        log_weight += g.potential.value(&e.edges[i..i + m]);
    }
    let last = g.block_id(&e.edges[k - m..]).expect("validated path has admissible blocks");
    Ok((log_weight - (k - m) as f64 * g.pressure).exp() * g.block_mass(last))
}

/// The path tree up to a fixed depth together with every cylinder mass.
#[derive(Debug, Clone)]
pub struct MeasuredTree {
    pub tree: PathTree,
    /// `masses[k][i] = mu(C_e)` for the `i`-th path of length `k`.
    pub masses: Vec<Vec<f64>>,
    pub lambda: f64,
    pub d_psi: f64,
    /// Forced out-degree-one steps from each vertex, for exact cylinder diameters.
    pub forced_steps: Vec<usize>,
}

impl MeasuredTree {
    pub fn build(g: &GibbsData, depth: usize, cap: usize) -> Result<Self> {
        let tree = PathTree::build(&g.diagram, depth, cap)?;
        let m = g.depth();
        let mut masses: Vec<Vec<f64>> = (0..=depth).map(|k| vec![0.0; tree.len(k)]).collect();
        // Levels up to m: every cylinder is a union of block cylinders.
        let mut blocks_at: Vec<u32> = Vec::new();
        for (w, b) in g.blocks.iter().enumerate() {
            let mut i = g.diagram.edge(b[0]).source;
            masses[0][i] += g.block_mass(w);
            for (k, &e) in b.iter().enumerate().take(depth) {
                i = tree.children(k, i).find(|&c| tree.edge(k + 1, c) == e).expect("block is a path");
                masses[k + 1][i] += g.block_mass(w);
            }
        }
        if depth >= m {
            blocks_at = (0..tree.len(m))
                .map(|i| g.block_id(&tree.path(m, i).edges).expect("admissible") as u32)
                .collect();
        }
        for k in m..depth {
            let mut next_blocks = vec![0u32; tree.len(k + 1)];
            for i in 0..tree.len(k) {
                let w = blocks_at[i] as usize;
                for c in tree.children(k, i) {
                    let w2 = g.successor(w, tree.edge(k + 1, c)).expect("admissible continuation");
                    next_blocks[c] = w2 as u32;
                    masses[k + 1][c] = masses[k][i] * g.transition(w, w2);
                }
            }
            blocks_at = next_blocks;
        }
        let forced_steps = (0..g.diagram.n).map(|v| g.diagram.forced_steps(v)).collect();
        Ok(MeasuredTree { tree, masses, lambda: g.lambda(), d_psi: g.d_psi, forced_steps })
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn mass(&self, level: usize, i: usize) -> f64 {
        self.masses[level][i]
    }

    /// Smallest cylinder mass at a level.
    pub fn min_mass(&self, level: usize) -> f64 {
        self.masses[level].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Empirical Gibbs constants at level `n`: the range of
/// `mu(C_e) exp(-S_n psi(x_e) + n P)` over `e` in `P_n`, where `x_e` continues `e` along the
/// first out-edge at each step.
pub fn gibbs_property_ratio(g: &GibbsData, mt: &MeasuredTree, n: usize) -> (f64, f64) {
    let m = g.depth();
    let d = &g.diagram;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..mt.tree.len(n) {
        let mut edges = mt.tree.path(n, i).edges;
        let mut at = edges.last().map_or(mt.tree.source(n, i), |&e| d.edge(e).range);
        while edges.len() < n + m - 1 {
            let e = d.out_edges(at)[0];
            edges.push(e);
            at = d.edge(e).range;
        }
        let birkhoff: f64 = (0..n).map(|j| g.potential.value(&edges[j..j + m])).sum();
        let r = (mt.mass(n, i).ln() - birkhoff + n as f64 * g.pressure).exp();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

/// Range of `mu(C_{e e'}) / mu(C_e)` over all paths of length below `k_max`.
pub fn child_ratio_bounds(mt: &MeasuredTree, k_max: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 0..k_max.min(mt.depth()) {
        for i in 0..mt.tree.len(k) {
            for c in mt.tree.children(k, i) {
                let r = mt.mass(k + 1, c) / mt.mass(k, i);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    (lo, hi)
}

/// A lower bound for every child ratio at every level: the enumerated minimum combined with
/// the smallest transition probability, which governs all levels beyond the depth of `psi`.
pub fn global_child_ratio_lower(g: &GibbsData, mt: &MeasuredTree) -> f64 {
    child_ratio_bounds(mt, mt.depth()).0.min(g.min_transition())
}

/// `mu_psi(f) = sum_e f_e mu(C_e)`.
pub fn integrate(mt: &MeasuredTree, f: &LCFunction) -> f64 {
    f.values.iter().zip(&mt.masses[f.level]).map(|(a, b)| a * b).sum()
}

/// Distortion values `mu(C_e) lambda^(k d_psi)` per level, with their overall range.
#[derive(Debug, Clone)]
pub struct DistortionProfile {
    pub values: Vec<Vec<f64>>,
    pub min: f64,
    pub max: f64,
}

pub fn distortion_profile(mt: &MeasuredTree) -> DistortionProfile {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    let values: Vec<Vec<f64>> = mt
        .masses
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, level)| {
            let scale = mt.lambda.powf(k as f64 * mt.d_psi);
            level.iter().map(|&x| x * scale).inspect(|&w| {
                min = min.min(w);
                max = max.max(w);
            }).collect()
        })
        .collect();
    DistortionProfile { values, min, max }
}

/// `-(1/n) sum_e mu(C_e) log mu(C_e)` over `P_n`.
pub fn shannon_rate(mt: &MeasuredTree, n: usize) -> f64 {
    let s: f64 = mt.masses[n].iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    s / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bratteli::DEFAULT_PATH_CAP;

    fn bernoulli(beta: f64) -> GibbsData {
        let d = DiagramData::new(vec![vec![2]]).unwrap();
        build_gibbs(&d, &Potential::from_edge_values(&[beta, 0.0])).unwrap()
    }

    #[test]
    fn parry_on_the_full_shift() {
        let d = DiagramData::new(vec![vec![2]]).unwrap();
        let g = build_gibbs(&d, &Potential::zero()).unwrap();
        assert!((g.pressure - 2f64.ln()).abs() < 1e-15);
        assert!((g.entropy - 2f64.ln()).abs() < 1e-15);
        assert!((g.d_psi - 1.0).abs() < 1e-15);
        let e: PathId = "0:1,0,1".parse().unwrap();
        assert!((cylinder_measure(&g, &e).unwrap() - 0.125).abs() < 1e-16);
    }

    #[test]
    fn bernoulli_closed_form() {
        for beta in [-1.3, 0.0, 0.4, 3f64.ln()] {
            let g = bernoulli(beta);
            let p = beta.exp() / (1.0 + beta.exp());
            assert!((g.pressure - (1.0 + beta.exp()).ln()).abs() < 1e-12);
            let e: PathId = "0:0,0,1".parse().unwrap();
            assert!((cylinder_measure(&g, &e).unwrap() - p * p * (1.0 - p)).abs() < 1e-12);
        }
        let g = bernoulli(3f64.ln());
        assert!((cylinder_measure(&g, &"0:0,0".parse().unwrap()).unwrap() - 9.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn two_vertex_parry_masses() {
        let d = DiagramData::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        let g = build_gibbs(&d, &Potential::zero()).unwrap();
        let mt = MeasuredTree::build(&g, 6, DEFAULT_PATH_CAP).unwrap();
        for k in 0..=6 {
            for &x in &mt.masses[k] {
                assert!((x - 0.5f64.powi(k as i32 + 1)).abs() < 1e-15);
            }
        }
        let (lo, hi) = gibbs_property_ratio(&g, &mt, 6);
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tree_masses_match_direct_evaluation() {
        let d = DiagramData::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let psi = Potential::from_block_strings(2, [("0,0", 0.3), ("0,2", -0.5), ("2,1", 1.1)]).unwrap();
        let g = build_gibbs(&d, &psi).unwrap();
        assert!(!g.warnings.is_empty());
        let mt = MeasuredTree::build(&g, 7, DEFAULT_PATH_CAP).unwrap();
        for k in 0..=7 {
            let total: f64 = mt.masses[k].iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for i in 0..mt.tree.len(k) {
                let direct = cylinder_measure(&g, &mt.tree.path(k, i)).unwrap();
                assert!((direct - mt.mass(k, i)).abs() < 1e-14);
            }
        }
        assert!(g.d_psi > 0.0 && g.d_psi <= 1.0 + 1e-12);
    }

    #[test]
    fn child_ratios() {
        let g = bernoulli(3f64.ln());
        let mt = MeasuredTree::build(&g, 5, DEFAULT_PATH_CAP).unwrap();
        let (lo, hi) = child_ratio_bounds(&mt, 5);
        assert!((lo - 0.25).abs() < 1e-14 && (hi - 0.75).abs() < 1e-14);
        let (glo, ghi) = gibbs_property_ratio(&g, &mt, 5);
        assert!((glo - 1.0).abs() < 1e-12 && (ghi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_blocks_are_rejected() {
        let d = DiagramData::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        // edge 2 ends at vertex 1, whose only out-edge is 1
        let psi = Potential::from_block_strings(2, [("2,0", 1.0)]).unwrap();
        assert!(matches!(build_gibbs(&d, &psi), Err(Error::InvalidPotential(_))));
    }
}
