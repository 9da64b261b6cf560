//! Point spectrum of the non-local Laplacian, the Dirichlet form along two independent
//! routes, eigenvalue counting and the Poincaré and weighted-difference inequalities.
//!
//! For a path `e` of length `k` whose range branches, `Y(e)` is an eigenspace with eigenvalue
//!
//! ```text
//! lambda(e) = mu(C_e) lambda^(gamma k) + mu(X \ C_s(e)) + sum_{i<k} mu(A_i(e)) lambda^(gamma i)
//! ```
//!
//! where `A_i(e)` is the annulus of points sharing exactly `i` edges with `e`. Every point
//! outside `C_e` sits at a distance from `C_e` that depends only on the annulus, so the
//! second and third terms form a running sum along the path, which is how both table builders
//! evaluate it.

pub mod heat;
pub mod identities;

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::bratteli::{DiagramData, EdgeId, PathId};
use crate::error::{Error, Result};
use crate::exact::{self, Q};
use crate::functions::{parseval_decompose, delta, l2_norm_sq, EigenBasis, GeneratorRef, LCFunction};
use crate::gibbs::{cylinder_measure, integrate, GibbsData, MeasuredTree};

/// Number field used by the spectrum builders: binary64 or exact rationals.
pub trait Scalar:
    Clone + Debug + PartialOrd + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    type Key: Hash + Eq + Clone;
    fn zero() -> Self;
    fn one() -> Self;
    fn to_f64(&self) -> f64;
    fn key(&self) -> Self::Key;
    /// Whether two eigenvalues count as the same one.
    fn tied(&self, other: &Self) -> bool;
    fn render(&self) -> String;
}

impl Scalar for f64 {
    type Key = u64;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn key(&self) -> u64 {
        // +0 and -0 merge
        (self + 0.0).to_bits()
    }
    fn tied(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-12 * self.abs().max(other.abs())
    }
    fn render(&self) -> String {
        format!("{self:.16e}")
    }
}

impl Scalar for Q {
    type Key = Q;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn to_f64(&self) -> f64 {
        exact::to_f64(self)
    }
    fn key(&self) -> Q {
        self.clone()
    }
    fn tied(&self, other: &Self) -> bool {
        self == other
    }
    fn render(&self) -> String {
        exact::format_q(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Generator {
    /// The partition of the space by source vertex.
    Root,
    Path(PathId),
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Generator::Root => f.write_str("root"),
            Generator::Path(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry<S> {
    pub eigenvalue: S,
    pub multiplicity: u128,
    /// Lexicographically first generator carrying this eigenvalue, at its lowest level.
    pub generator: Generator,
    pub level: usize,
}

/// Eigenvalues of all generators up to `max_level`, merged by value and sorted ascending.
#[derive(Debug, Clone)]
pub struct SpectrumTable<S = f64> {
    pub gamma: f64,
    pub lambda: f64,
    pub d_psi: f64,
    pub max_level: usize,
    pub entries: Vec<SpectrumEntry<S>>,
    /// Smallest generator eigenvalue at each level, `None` where no path branches.
    pub level_min: Vec<Option<S>>,
    /// Every eigenvalue from a level above `max_level` is at least this large.
    pub threshold: S,
    /// Eigenvalue formula per path for levels `0..=max_level`, present for tables built from
    /// a [`MeasuredTree`].
    pub per_path: Option<Vec<Vec<f64>>>,
}

/// Eigenvalues stay isolated as long as `gamma >= d_psi`: at equality they still grow, like
/// the level, through the annulus sum. Below it they accumulate.
fn check_gamma(gamma: f64, d_psi: f64) -> Result<()> {
    if !(gamma >= d_psi * (1.0 - 1e-12)) || !gamma.is_finite() {
        return Err(Error::GammaTooSmall { gamma, d_psi });
    }
    Ok(())
}

/// Power laws in `gamma - d_psi` need the strict inequality.
pub(crate) fn check_gamma_strict(gamma: f64, d_psi: f64) -> Result<()> {
    if !(gamma > d_psi) || !gamma.is_finite() {
        return Err(Error::GammaTooSmall { gamma, d_psi });
    }
    Ok(())
}

/// `lambda_psi(e)`, evaluated with exact distances. For a path whose range does not branch
/// this is the value the formula takes with the true diameter of `C_e`; it bounds from below
/// the eigenvalue of every generator extending `e`.
pub fn eigenvalue(g: &GibbsData, e: &PathId, gamma: f64) -> Result<f64> {
    check_gamma(gamma, g.d_psi)?;
    e.validate(&g.diagram)?;
    let lambda = g.lambda();
    let mut mass = cylinder_measure(g, &e.prefix(0))?;
    let mut outside = 1.0 - mass;
    for i in 0..e.len() {
        let next = cylinder_measure(g, &e.prefix(i + 1))?;
        outside += (mass - next) * lambda.powf(gamma * i as f64);
        mass = next;
    }
    let t = g.diagram.forced_steps(e.range(&g.diagram));
    Ok(mass * lambda.powf(gamma * (e.len() + t) as f64) + outside)
}

/// How cylinder masses propagate from a path to its one-edge extensions.
trait MassModel<S: Scalar>: Sync {
    type Label: Hash + Eq + Clone + Send + Sync;
    fn root(&self, v: usize) -> (Self::Label, S);
    fn child(&self, label: &Self::Label, mass: &S, path: &PathId, edge: EdgeId) -> (Self::Label, S);
}

struct GibbsModel<'a> {
    g: &'a GibbsData,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum GibbsLabel {
    Prefix(PathId),
    Block(usize),
}

impl MassModel<f64> for GibbsModel<'_> {
    type Label = GibbsLabel;

    fn root(&self, v: usize) -> (GibbsLabel, f64) {
        let p = PathId::vertex(v);
        let mass = cylinder_measure(self.g, &p).expect("vertex path");
        (GibbsLabel::Prefix(p), mass)
    }

    fn child(&self, label: &GibbsLabel, mass: &f64, path: &PathId, edge: EdgeId) -> (GibbsLabel, f64) {
        let m = self.g.depth();
        match label {
            GibbsLabel::Prefix(p) => {
                let mut q = p.clone();
                q.edges.push(edge);
                if q.len() == m {
                    let w = self.g.block_id(&q.edges).expect("admissible block");
                    (GibbsLabel::Block(w), self.g.block_mass(w))
                } else {
                    let mu = cylinder_measure(self.g, &q).expect("valid path");
                    (GibbsLabel::Prefix(q), mu)
                }
            }
            GibbsLabel::Block(w) => {
                let w2 = self.g.successor(*w, edge).expect("admissible continuation");
                debug_assert!(path.len() >= m);
                (GibbsLabel::Block(w2), mass * self.g.transition(*w, w2))
            }
        }
    }
}

struct ParryModel {
    lambda: Q,
    left: Vec<Q>,
    ranges: Vec<usize>,
}

impl MassModel<Q> for ParryModel {
    type Label = usize;

    fn root(&self, v: usize) -> (usize, Q) {
        (v, self.left[v].clone())
    }

    fn child(&self, label: &usize, mass: &Q, _path: &PathId, edge: EdgeId) -> (usize, Q) {
        let r = self.ranges[edge];
        (r, mass * &self.left[r] / (&self.lambda * &self.left[*label]))
    }
}

struct State<S: Scalar, L> {
    label: L,
    mass: S,
    outside: S,
    range: usize,
    rep: PathId,
    count: u128,
}

/// Level-by-level recursion over classes of paths that share their label, mass and outside
/// sum. Such paths have identical subtrees of eigenvalues, so each class is expanded once.
fn compressed_table<S: Scalar, M: MassModel<S>>(
    d: &DiagramData,
    model: &M,
    pow: &dyn Fn(usize) -> S,
    max_level: usize,
    cap: usize,
) -> Result<(Vec<(S, u128, Generator, usize)>, Vec<Option<S>>, S)> {
    let mut raw = Vec::new();
    if d.n >= 2 {
        raw.push((S::one(), (d.n - 1) as u128, Generator::Root, 0));
    }
    let mut states: Vec<State<S, M::Label>> = (0..d.n)
        .map(|v| {
            let (label, mass) = model.root(v);
            State { label, outside: S::one() - mass.clone(), mass, range: v, rep: PathId::vertex(v), count: 1 }
        })
        .collect();
    let mut level_min = Vec::with_capacity(max_level + 1);
    for k in 0..=max_level {
        let mut lowest: Option<S> = None;
        for s in &states {
            let out = d.out_degree(s.range);
            if out >= 2 {
                let value = s.mass.clone() * pow(k) + s.outside.clone();
                if lowest.as_ref().map_or(true, |l| value < *l) {
                    lowest = Some(value.clone());
                }
                raw.push((value, s.count * (out as u128 - 1), Generator::Path(s.rep.clone()), k));
            }
        }
        level_min.push(lowest);
        let mut next: Vec<State<S, M::Label>> = Vec::new();
        let mut index: HashMap<(M::Label, S::Key, S::Key), usize> = HashMap::new();
        for s in &states {
            for &e in d.out_edges(s.range) {
                let (label, mass) = model.child(&s.label, &s.mass, &s.rep, e);
                let outside = s.outside.clone() + (s.mass.clone() - mass.clone()) * pow(k);
                let key = (label.clone(), mass.key(), outside.key());
                match index.get(&key) {
                    Some(&j) => next[j].count += s.count,
                    None => {
                        if next.len() >= cap {
                            return Err(Error::CapacityExceeded { level: k + 1, paths: d.path_count(k + 1), cap });
                        }
                        index.insert(key, next.len());
                        let mut rep = s.rep.clone();
                        rep.edges.push(e);
                        next.push(State { label, mass, outside, range: d.edge(e).range, rep, count: s.count });
                    }
                }
            }
        }
        states = next;
    }
    let k = max_level + 1;
    let threshold = states
        .iter()
        .map(|s| s.mass.clone() * pow(k + d.forced_steps(s.range)) + s.outside.clone())
        .reduce(|a, b| if b < a { b } else { a })
        .expect("non-empty level");
    Ok((raw, level_min, threshold))
}

fn merge_entries<S: Scalar>(mut raw: Vec<(S, u128, Generator, usize)>) -> Vec<SpectrumEntry<S>> {
    raw.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite eigenvalues")
            .then(a.3.cmp(&b.3))
            .then_with(|| a.2.cmp(&b.2))
    });
    let mut out: Vec<SpectrumEntry<S>> = Vec::new();
    for (value, mult, generator, level) in raw {
        if let Some(last) = out.last_mut() {
            if last.eigenvalue.tied(&value) {
                last.multiplicity += mult;
                if (level, &generator) < (last.level, &last.generator) {
                    last.level = level;
                    last.generator = generator;
                }
                continue;
            }
        }
        out.push(SpectrumEntry { eigenvalue: value, multiplicity: mult, generator, level });
    }
    out
}

/// Spectrum of all generators up to level `max_level` for a Gibbs measure.
///
/// `cap` bounds the number of path classes kept per level; for many measures, the Parry
/// measure in particular, classes collapse and the recursion is far cheaper than enumerating
/// paths.
pub fn spectrum_table(g: &GibbsData, gamma: f64, max_level: usize, cap: usize) -> Result<SpectrumTable<f64>> {
    check_gamma(gamma, g.d_psi)?;
    let lambda = g.lambda();
    let pow = move |k: usize| lambda.powf(gamma * k as f64);
    let (raw, level_min, threshold) = compressed_table(&g.diagram, &GibbsModel { g }, &pow, max_level, cap)?;
    Ok(SpectrumTable {
        gamma,
        lambda,
        d_psi: g.d_psi,
        max_level,
        entries: merge_entries(raw),
        level_min,
        threshold,
        per_path: None,
    })
}

/// Exact spectrum for `psi = 0` on a diagram with integer Perron eigenvalue and an integer
/// exponent `gamma`.
pub fn spectrum_table_exact(d: &DiagramData, gamma: u32, max_level: usize, cap: usize) -> Result<SpectrumTable<Q>> {
    let parry = exact::exact_parry(d)
        .ok_or_else(|| Error::ExactUnsupported("the Perron eigenvalue is not an integer".into()))?;
    check_gamma(gamma as f64, 1.0)?;
    let lambda = Q::from_integer(parry.lambda.clone());
    let step: BigInt = num_traits::pow(parry.lambda.clone(), gamma as usize);
    let pow = move |k: usize| Q::from_integer(num_traits::pow(step.clone(), k));
    let model = ParryModel { lambda, left: parry.left, ranges: d.edges().iter().map(|e| e.range).collect() };
    let (raw, level_min, threshold) = compressed_table(d, &model, &pow, max_level, cap)?;
    Ok(SpectrumTable {
        gamma: gamma as f64,
        lambda: parry.lambda.to_f64().unwrap_or(f64::NAN),
        d_psi: 1.0,
        max_level,
        entries: merge_entries(raw),
        level_min,
        threshold,
        per_path: None,
    })
}

impl SpectrumTable<f64> {
    /// Table for every path of a measured tree: generators up to level `depth - 1`, with the
    /// eigenvalue formula kept per path so that eigenbasis coefficients can be weighted.
    pub fn from_tree(mt: &MeasuredTree, gamma: f64) -> Result<Self> {
        check_gamma(gamma, mt.d_psi)?;
        let tree = &mt.tree;
        let depth = mt.depth();
        if depth == 0 {
            return Err(Error::LevelExceedsTable { function_level: 1, table_level: 0 });
        }
        let pow = |k: usize| mt.lambda.powf(gamma * k as f64);
        let n0 = tree.len(0);
        let mut outside: Vec<f64> = mt.masses[0].iter().map(|m| 1.0 - m).collect();
        let mut per_path = Vec::with_capacity(depth + 1);
        let mut raw = Vec::new();
        if n0 >= 2 {
            raw.push((1.0, (n0 - 1) as u128, Generator::Root, 0));
        }
        let mut level_min = Vec::with_capacity(depth);
        let mut threshold = f64::INFINITY;
        for k in 0..=depth {
            let values: Vec<f64> = (0..tree.len(k))
                .into_par_iter()
                .map(|i| mt.masses[k][i] * pow(k) + outside[i])
                .collect();
            if k == depth {
                threshold = (0..tree.len(k))
                    .map(|i| mt.masses[k][i] * pow(k + mt.forced_steps[tree.range(k, i)]) + outside[i])
                    .fold(f64::INFINITY, f64::min);
                break;
            }
            let mut lowest: Option<f64> = None;
            for i in 0..tree.len(k) {
                let out = tree.children(k, i).len();
                if out >= 2 {
                    lowest = Some(lowest.map_or(values[i], |l| l.min(values[i])));
                    raw.push((values[i], out as u128 - 1, Generator::Path(tree.path(k, i)), k));
                }
            }
            level_min.push(lowest);
            let mut next = vec![0.0; tree.len(k + 1)];
            for i in 0..tree.len(k) {
                for c in tree.children(k, i) {
                    next[c] = outside[i] + (mt.masses[k][i] - mt.masses[k + 1][c]) * pow(k);
                }
            }
            per_path.push(values);
            outside = next;
        }
        Ok(SpectrumTable {
            gamma,
            lambda: mt.lambda,
            d_psi: mt.d_psi,
            max_level: depth - 1,
            entries: merge_entries(raw),
            level_min,
            threshold,
            per_path: Some(per_path),
        })
    }

    /// Eigenvalue attached to a family of the eigenbasis.
    pub fn generator_eigenvalue(&self, g: GeneratorRef) -> Result<f64> {
        match g {
            GeneratorRef::Root => Ok(1.0),
            GeneratorRef::Path { level, index } => {
                let per_path = self.per_path.as_ref().ok_or(Error::LevelExceedsTable {
                    function_level: level + 1,
                    table_level: 0,
                })?;
                per_path
                    .get(level)
                    .map(|row| row[index])
                    .ok_or(Error::LevelExceedsTable { function_level: level + 1, table_level: self.max_level + 1 })
            }
        }
    }
}

impl<S: Scalar> SpectrumTable<S> {
    pub fn smallest(&self) -> &SpectrumEntry<S> {
        &self.entries[0]
    }

    pub fn multiplicity_of(&self, value: &S) -> u128 {
        self.entries.iter().filter(|e| e.eigenvalue.tied(value)).map(|e| e.multiplicity).sum()
    }

    pub fn total_multiplicity(&self) -> u128 {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// `N(Lambda)`: eigenvalues at most `bound`, with multiplicity.
    pub fn counting_function(&self, bound: f64) -> Result<u128> {
        let threshold = self.threshold.to_f64();
        if bound >= threshold {
            return Err(Error::TableIncomplete { lambda: bound, threshold });
        }
        Ok(self
            .entries
            .iter()
            .take_while(|e| e.eigenvalue.to_f64() <= bound * (1.0 + 1e-12))
            .map(|e| e.multiplicity)
            .sum())
    }

    /// Least-squares fit of `log N` against `log Lambda` on 40 geometric grid points.
    pub fn weyl_fit(&self, lo: f64, hi: f64) -> Result<WeylFit> {
        check_gamma_strict(self.gamma, self.d_psi)?;
        let target = 1.0 / (self.gamma - self.d_psi);
        let lo = lo.max(1.0);
        let hi = hi.min(self.threshold.to_f64() * (1.0 - 1e-9));
        let levels = self.level_min.iter().flatten().filter(|m| m.to_f64() <= hi).count();
        if levels < 5 || !(hi > lo) {
            return Err(Error::InsufficientRange { levels });
        }
        let n_points = 40;
        let mut points = Vec::with_capacity(n_points);
        for j in 0..n_points {
            let x = lo * (hi / lo).powf(j as f64 / (n_points - 1) as f64);
            points.push((x, self.counting_function(x)?));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| (p.1 as f64).ln()).collect();
        let mx = xs.iter().sum::<f64>() / n_points as f64;
        let my = ys.iter().sum::<f64>() / n_points as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let scaled: Vec<f64> = points.iter().map(|&(x, n)| n as f64 * x.powf(-target)).collect();
        Ok(WeylFit {
            slope,
            target,
            band: (scaled.iter().copied().fold(f64::INFINITY, f64::min), scaled.iter().copied().fold(0.0, f64::max)),
            range: (lo, hi),
            levels,
            points,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylFit {
    pub slope: f64,
    /// `1 / (gamma - d_psi)`.
    pub target: f64,
    /// Range of `N(Lambda) Lambda^(-target)` over the grid.
    pub band: (f64, f64),
    pub range: (f64, f64),
    pub levels: usize,
    pub points: Vec<(f64, u128)>,
}

impl WeylFit {
    pub fn relative_error(&self) -> f64 {
        (self.slope / self.target - 1.0).abs()
    }
}

/// `E(f, g)` from eigenbasis coefficients: `sum_j lambda_j <f, u_j> <g, u_j>`.
pub fn dirichlet_eigen(b: &EigenBasis, mt: &MeasuredTree, t: &SpectrumTable, f: &LCFunction, g: &LCFunction) -> Result<f64> {
    if t.per_path.is_none() || t.max_level + 1 < b.level {
        return Err(Error::LevelExceedsTable { function_level: b.level, table_level: t.max_level + 1 });
    }
    let cf = parseval_decompose(b, mt, f)?;
    let cg = parseval_decompose(b, mt, g)?;
    let mut total = 0.0;
    for (pos, (gen, _)) in b.labels.iter().enumerate() {
        total += t.generator_eigenvalue(*gen)? * cf.coefficients[pos] * cg.coefficients[pos];
    }
    Ok(total)
}

/// Largest level cell count accepted by [`dirichlet_bruteforce`].
pub const BRUTE_FORCE_CELL_CAP: usize = 1 << 14;

/// `E(f, g)` straight from the definition: a sum over unordered pairs of distinct cells.
pub fn dirichlet_bruteforce(mt: &MeasuredTree, gamma: f64, f: &LCFunction, g: &LCFunction) -> Result<f64> {
    let level = f.level.max(g.level);
    if level > mt.depth() {
        return Err(Error::LevelExceedsTable { function_level: level, table_level: mt.depth() });
    }
    let tree = &mt.tree;
    let n = tree.len(level);
    if n > BRUTE_FORCE_CELL_CAP {
        return Err(Error::CapacityExceeded { level, paths: n as u128, cap: BRUTE_FORCE_CELL_CAP });
    }
    let f = f.lift(tree, level);
    let g = g.lift(tree, level);
    let ancestors: Vec<Vec<usize>> = (0..n).map(|i| (0..=level).map(|k| tree.ancestor(level, i, k)).collect()).collect();
    let weights: Vec<f64> = (0..=level).map(|j| mt.lambda.powf(gamma * j as f64)).collect();
    let mu = &mt.masses[level];
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut s = 0.0;
            for b in a + 1..n {
                let lcp = (0..=level).rev().find(|&k| ancestors[a][k] == ancestors[b][k]).unwrap_or(0);
                s += (f.values[a] - f.values[b]) * (g.values[a] - g.values[b]) * mu[a] * mu[b] * weights[lcp];
            }
            s
        })
        .sum();
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub energy: f64,
    pub variance: f64,
    pub pass: bool,
}

/// `E(f, f) >= ||f - mu(f)||^2`.
pub fn poincare_check(b: &EigenBasis, mt: &MeasuredTree, t: &SpectrumTable, f: &LCFunction) -> Result<PoincareCheck> {
    let energy = dirichlet_eigen(b, mt, t, f, f)?;
    let mean = integrate(mt, f);
    let centered = LCFunction::new(f.level, f.values.iter().map(|x| x - mean).collect());
    let variance = l2_norm_sq(mt, &centered);
    Ok(PoincareCheck { energy, variance, pass: energy >= variance - 1e-12 })
}

/// `sum_k lambda^((gamma - d_psi) k) ||delta_k f||^2 / E(f, f)`.
pub fn l2w_ratio(b: &EigenBasis, mt: &MeasuredTree, t: &SpectrumTable, f: &LCFunction) -> Result<f64> {
    let energy = dirichlet_eigen(b, mt, t, f, f)?;
    let mean = integrate(mt, f);
    let spread = f.values.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
    if spread <= 1e-14 * (1.0 + mean.abs()) || energy <= 0.0 {
        return Err(Error::DivisionByZero("the Dirichlet energy of a constant function"));
    }
    let exponent = t.gamma - t.d_psi;
    let mut num = 0.0;
    for k in 1..=f.level {
        num += mt.lambda.powf(exponent * k as f64) * l2_norm_sq(mt, &delta(mt, f, k));
    }
    Ok(num / energy)
}

#[cfg(test)]
mod tests;
