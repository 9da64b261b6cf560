//! Finite identities behind the Dirichlet-form computations: the variance identity for the
//! children of a cell, the polarization identity and the Jensen lower bound.

use crate::functions::{delta, project, LCFunction};
use crate::gibbs::MeasuredTree;

/// Both sides of
/// `1/2 sum_{i != j} mu_i mu_j (a_i - a_j)^2 = mu_e sum_i mu_i (a_i - a_e)^2`
/// with `mu_e = sum mu_i` and `a_e` the weighted mean.
pub fn variance_identity(mu: &[f64], a: &[f64]) -> (f64, f64) {
    let mut lhs = 0.0;
    for i in 0..mu.len() {
        for j in 0..mu.len() {
            if i != j {
                lhs += 0.5 * mu[i] * mu[j] * (a[i] - a[j]).powi(2);
            }
        }
    }
    let mu_e: f64 = mu.iter().sum();
    let mean = mu.iter().zip(a).map(|(m, x)| m * x).sum::<f64>() / mu_e;
    let rhs = mu_e * mu.iter().zip(a).map(|(m, x)| m * (x - mean).powi(2)).sum::<f64>();
    (lhs, rhs)
}

/// The variance identity on the children of the `i`-th cell of level `k`, with the right side
/// computed as `mu(C_e) ||delta_{k+1} f||^2` restricted to `C_e`.
pub fn variance_identity_on_cell(mt: &MeasuredTree, f: &LCFunction, k: usize, i: usize) -> (f64, f64) {
    let tree = &mt.tree;
    let children = tree.children(k, i);
    let avg = project(mt, f, k + 1);
    let mu: Vec<f64> = children.clone().map(|c| mt.masses[k + 1][c]).collect();
    let a: Vec<f64> = children.clone().map(|c| avg.values[c]).collect();
    let (lhs, _) = variance_identity(&mu, &a);
    let d = delta(mt, f, k + 1);
    let local: f64 = children.map(|c| mt.masses[k + 1][c] * d.values[c].powi(2)).sum();
    (lhs, mt.masses[k][i] * local)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationSides {
    /// `sum_{i<j} mu_i mu_j (a_i - a_j)(b_i - b_j)`.
    pub pairs: f64,
    /// `mu_e sum_i mu_i a_i b_i - (sum_i mu_i a_i)(sum_j mu_j b_j)`.
    pub expanded: f64,
    /// `mu_e sum_i mu_i (a_i - a_e)(b_i - b_e)`.
    pub centered: f64,
}

pub fn polarization(mu: &[f64], a: &[f64], b: &[f64]) -> PolarizationSides {
    let n = mu.len();
    let mut pairs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            pairs += mu[i] * mu[j] * (a[i] - a[j]) * (b[i] - b[j]);
        }
    }
    let mu_e: f64 = mu.iter().sum();
    let sa: f64 = mu.iter().zip(a).map(|(m, x)| m * x).sum();
    let sb: f64 = mu.iter().zip(b).map(|(m, x)| m * x).sum();
    let sab: f64 = (0..n).map(|i| mu[i] * a[i] * b[i]).sum();
    let expanded = mu_e * sab - sa * sb;
    let (ae, be) = (sa / mu_e, sb / mu_e);
    let centered = mu_e * (0..n).map(|i| mu[i] * (a[i] - ae) * (b[i] - be)).sum::<f64>();
    PolarizationSides { pairs, expanded, centered }
}

/// For every cell `e` below the level of `f` and every pair of distinct children, the exact
/// integral of `(f(x) - f(y))^2 d(x, y)^-gamma` over `C_{e e1} x C_{e e2}` together with its
/// Jensen lower bound `lambda^(gamma k) mu_1 mu_2 (avg_1 - avg_2)^2`.
pub fn jensen_pairs(mt: &MeasuredTree, gamma: f64, f: &LCFunction) -> Vec<(f64, f64)> {
    let tree = &mt.tree;
    let top = f.level;
    let mut out = Vec::new();
    for k in 0..top {
        let avg = project(mt, f, k + 1);
        let weight = mt.lambda.powf(gamma * k as f64);
        for i in 0..tree.len(k) {
            let children: Vec<usize> = tree.children(k, i).collect();
            for &c1 in &children {
                for &c2 in &children {
                    if c1 == c2 {
                        continue;
                    }
                    let cells1 = descendants(mt, k + 1, c1, top);
                    let cells2 = descendants(mt, k + 1, c2, top);
                    let mut exact = 0.0;
                    for &a in &cells1 {
                        for &b in &cells2 {
                            exact += mt.masses[top][a] * mt.masses[top][b] * (f.values[a] - f.values[b]).powi(2);
                        }
                    }
                    let bound = mt.masses[k + 1][c1] * mt.masses[k + 1][c2] * (avg.values[c1] - avg.values[c2]).powi(2);
                    out.push((weight * exact, weight * bound));
                }
            }
        }
    }
    out
}

fn descendants(mt: &MeasuredTree, level: usize, i: usize, top: usize) -> Vec<usize> {
    let mut range = i..i + 1;
    for k in level..top {
        let start = mt.tree.children(k, range.start).start;
        let end = mt.tree.children(k, range.end - 1).end;
        range = start..end;
    }
    range.collect()
}
