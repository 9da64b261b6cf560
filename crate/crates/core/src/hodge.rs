//! Harmonic representatives of cohomology classes at a finite level.
//!
//! In eigenbasis coordinates the energy of a zero-mean level-`K` function is diagonal,
//! `E(x, x) = sum_j lambda_j x_j^2`, and the class is the linear image `C x` with
//! `C_(i j) = D_(tau_i)(u_j)`. The minimizer over a class is
//! `x = L^-1 C^T (C L^-1 C^T)^-1 q` with `L = diag(lambda_j)`, and it is the unique element of
//! the class that is energy-orthogonal to the kernel of `C`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cohomology::CohomologySpace;
use crate::error::{Error, Result};
use crate::functions::{
    build_eigenbasis, l2_norm_sq, parseval_decompose, parseval_synthesize, Decomposition, EigenBasis, GeneratorRef,
    LCFunction,
};
use crate::gibbs::{GibbsData, MeasuredTree};
use crate::linalg::{orthogonal_complement, pivoted_basis};
use crate::spectral::SpectrumTable;

/// Largest condition number of the reduced Gram matrix accepted by the solver.
pub const MAX_CONDITION: f64 = 1e14;

/// `gamma` must exceed `2 (1 + d_psi - log lambda_- / log lambda)`.
pub fn hodge_threshold(g: &GibbsData) -> f64 {
    let p = &g.diagram.perron;
    2.0 * (1.0 + g.d_psi - p.lambda_minus.ln() / p.lambda.ln())
}

/// The constrained minimization problem at level `K = mt.depth()`.
#[derive(Debug)]
pub struct HodgeProblem<'a> {
    pub gamma: f64,
    pub level: usize,
    pub mt: &'a MeasuredTree,
    pub space: &'a CohomologySpace,
    pub basis: EigenBasis,
    /// Eigenvalue of each non-constant basis function.
    pub eigenvalues: Vec<f64>,
    /// `d x n` matrix of trace values on the non-constant basis functions.
    pub constraints: DMatrix<f64>,
    /// `D_(tau_i)(1)`.
    pub mean_constraint: Vec<f64>,
    /// Rank of `constraints`. On zero-mean functions it is `d` or, when the measure itself is
    /// a trace (for instance `psi = 0`), `d - 1`.
    pub rank: usize,
    /// `r x d`: selects a maximal independent set of constraints.
    range_rows: DMatrix<f64>,
    /// `n x (n - r)`: orthonormal coefficient vectors of the coboundaries.
    coboundary: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HodgeSolution {
    /// Zero-mean harmonic representative at level `K`.
    pub h: LCFunction,
    /// Mean of the input; the full representative of its class is `h + mean`.
    pub mean: f64,
    pub coefficients: Vec<f64>,
    /// Class of the centered input, `q_A(f - mu(f))`.
    pub class_target: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
    pub condition: f64,
    /// The zero-mean part of the cohomology is trivial: only constants are harmonic.
    pub trivial: bool,
}

impl<'a> HodgeProblem<'a> {
    pub fn new(g: &GibbsData, space: &'a CohomologySpace, mt: &'a MeasuredTree, gamma: f64) -> Result<Self> {
        let threshold = hodge_threshold(g);
        // rounding in d_psi and lambda_- must not admit gamma on the threshold itself
        if !(gamma > threshold * (1.0 + 1e-9)) {
            return Err(Error::ThresholdViolation { gamma, threshold });
        }
        let level = mt.depth();
        if level == 0 {
            return Err(Error::LevelExceedsTable { function_level: 1, table_level: 0 });
        }
        let basis = build_eigenbasis(mt, level)?;
        let table = SpectrumTable::from_tree(mt, gamma)?;
        let eigenvalues = basis.labels.iter().map(|(gen, _)| table.generator_eigenvalue(*gen)).collect::<Result<Vec<_>>>()?;
        let tree = &mt.tree;
        let seqs: Vec<Vec<DVector<f64>>> = space.trace_basis.iter().map(|t| t.sequence(level)).collect();
        let n = basis.labels.len();
        let d = space.d;
        let mut constraints: DMatrix<f64> = DMatrix::zeros(d, n);
        for (j, (gen, ell)) in basis.labels.iter().enumerate() {
            let fam = basis.family(*gen).expect("labelled families exist");
            for (i, seq) in seqs.iter().enumerate() {
                constraints[(i, j)] = match *gen {
                    GeneratorRef::Root => (0..fam.width).map(|v| fam.value(*ell, v) * seq[0][v]).sum(),
                    GeneratorRef::Path { level: k, index } => {
                        let start = tree.children(k, index).start;
                        (0..fam.width).map(|c| fam.value(*ell, c) * seq[k + 1][tree.range(k + 1, start + c)]).sum()
                    }
                };
            }
        }
        let mean_constraint: Vec<f64> = seqs.iter().map(|s| s[0].sum()).collect();
        let (rank, range_rows, row_space) = if n == 0 {
            (0, DMatrix::zeros(0, d), DMatrix::zeros(0, 0))
        } else {
            // the trace values of the constant set the scale of a vanishing constraint
            let scale = constraints.amax().max(mean_constraint.iter().map(|x| x.abs()).fold(0.0, f64::max));
            let (keep, space_cols) = pivoted_basis(&constraints.transpose(), 1e-10 * scale * (n as f64).sqrt());
            let rows = DMatrix::from_fn(keep.len(), d, |a, b| if b == keep[a] { 1.0 } else { 0.0 });
            (keep.len(), rows, space_cols)
        };
        if d >= 2 && rank + 1 < d {
            return Err(Error::RankDeficiency { rank, expected: d - 1 });
        }
        let comp = orthogonal_complement(&row_space);
        let coboundary = if comp.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&comp) };
        Ok(HodgeProblem { gamma, level, mt, space, basis, eigenvalues, constraints, mean_constraint, rank, range_rows, coboundary })
    }

    /// Dimension of the zero-mean coboundaries at level `K`: `(|P_K| - 1) - rank`.
    pub fn coboundary_dimension(&self) -> usize {
        self.coboundary.ncols()
    }

    /// Coefficient vector of the `i`-th coboundary basis element.
    pub fn coboundary_coefficients(&self, i: usize) -> Vec<f64> {
        self.coboundary.column(i).iter().copied().collect()
    }

    pub fn coboundary_basis(&self) -> Vec<LCFunction> {
        (0..self.coboundary_dimension()).map(|i| self.synthesize(0.0, self.coboundary_coefficients(i))).collect()
    }

    pub fn synthesize(&self, mean: f64, coefficients: Vec<f64>) -> LCFunction {
        parseval_synthesize(&self.basis, self.mt, &Decomposition { mean, coefficients })
    }

    pub fn decompose(&self, f: &LCFunction) -> Result<Decomposition> {
        parseval_decompose(&self.basis, self.mt, f)
    }

    /// `E(x, y)` for coefficient vectors.
    pub fn energy(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eigenvalues.iter().zip(x).zip(y).map(|((l, a), b)| l * a * b).sum()
    }

    /// `C x`: the class of the zero-mean function with coefficients `x`.
    pub fn class_of(&self, x: &[f64]) -> Vec<f64> {
        (&self.constraints * DVector::from_column_slice(x)).iter().copied().collect()
    }

    pub fn harmonic_representative(&self, f: &LCFunction) -> Result<HodgeSolution> {
        if f.level > self.level {
            return Err(Error::LevelExceedsTable { function_level: f.level, table_level: self.level });
        }
        let dec = self.decompose(f)?;
        let target = self.class_of(&dec.coefficients);
        let n = self.eigenvalues.len();
        if self.rank == 0 {
            let h = self.synthesize(0.0, vec![0.0; n]);
            return Ok(HodgeSolution {
                h,
                mean: dec.mean,
                coefficients: vec![0.0; n],
                class_target: target,
                energy: 0.0,
                residual: 0.0,
                condition: 1.0,
                trivial: true,
            });
        }
        let t = &self.range_rows * DVector::from_vec(target.clone());
        let r = &self.range_rows * &self.constraints;
        let inv = DVector::from_iterator(n, self.eigenvalues.iter().map(|l| 1.0 / l));
        let weighted = DMatrix::from_fn(n, self.rank, |a, b| inv[a] * r[(b, a)]);
        let gram = &r * &weighted;
        let sym = gram.clone().symmetric_eigenvalues();
        let (lo, hi) = (sym.min(), sym.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularGram { condition });
        }
        let chol = gram.cholesky().ok_or(Error::SingularGram { condition })?;
        let mut x = &weighted * chol.solve(&t);
        for _ in 0..2 {
            let res = &t - &r * &x;
            x += &weighted * chol.solve(&res);
        }
        let coefficients: Vec<f64> = x.iter().copied().collect();
        let energy = self.energy(&coefficients, &coefficients);
        let h = self.synthesize(0.0, coefficients.clone());
        let residual = self.residual_of(&coefficients);
        Ok(HodgeSolution { h, mean: dec.mean, coefficients, class_target: target, energy, residual, condition, trivial: false })
    }

    fn residual_of(&self, x: &[f64]) -> f64 {
        let ehh = self.energy(x, x);
        if ehh <= 0.0 {
            return 0.0;
        }
        let lx: Vec<f64> = self.eigenvalues.iter().zip(x).map(|(l, a)| l * a).collect();
        (0..self.coboundary.ncols())
            .map(|i| {
                let b = self.coboundary.column(i);
                let ehb: f64 = lx.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
                let ebb: f64 = self.eigenvalues.iter().zip(b.iter()).map(|(l, c)| l * c * c).sum();
                ehb.abs() / (ehh * ebb).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max_b |E(h, b)| / sqrt(E(h, h) E(b, b))` over the coboundary basis; 0 for `h = 0`.
    pub fn harmonicity_residual(&self, h: &LCFunction) -> Result<f64> {
        if h.level > self.level {
            return Err(Error::LevelExceedsTable { function_level: h.level, table_level: self.level });
        }
        Ok(self.residual_of(&self.decompose(h)?.coefficients))
    }
}

/// One level of [`refine_and_compare`].
#[derive(Debug, Clone, Serialize)]
pub struct RefinementStep {
    pub level: usize,
    pub energy: f64,
    pub residual: f64,
    pub condition: f64,
    /// `L^2` distance to the previous level's representative.
    pub l2_distance: Option<f64>,
    pub solution: HodgeSolution,
}

/// Solves the problem for `f` at each level of `levels` (increasing, each at least
/// `max(1, f.level)`). Energies are non-increasing because each level's feasible set
/// contains the previous minimizer.
pub fn refine_and_compare(
    g: &GibbsData,
    space: &CohomologySpace,
    f: &LCFunction,
    levels: &[usize],
    gamma: f64,
    cap: usize,
) -> Result<Vec<RefinementStep>> {
    let mut out: Vec<RefinementStep> = Vec::with_capacity(levels.len());
    for &k in levels {
        let mt = MeasuredTree::build(g, k, cap)?;
        let problem = HodgeProblem::new(g, space, &mt, gamma)?;
        let solution = problem.harmonic_representative(f)?;
        let l2_distance = out.last().map(|prev| {
            let coarse = prev.solution.h.lift(&mt.tree, k);
            l2_norm_sq(&mt, &solution.h.combine(1.0, &coarse, -1.0, &mt.tree)).sqrt()
        });
        out.push(RefinementStep {
            level: k,
            energy: solution.energy,
            residual: solution.residual,
            condition: solution.condition,
            l2_distance,
            solution,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bratteli::{DiagramData, DEFAULT_PATH_CAP};
    use crate::gibbs::{build_gibbs, integrate, Potential};
    use crate::spectral::dirichlet_bruteforce;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fib_gibbs() -> GibbsData {
        build_gibbs(&DiagramData::new(vec![vec![1, 1], vec![1, 0]]).unwrap(), &Potential::zero()).unwrap()
    }

    #[test]
    fn fibonacci_threshold_is_six() {
        assert!((hodge_threshold(&fib_gibbs()) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_at_threshold_is_rejected() {
        let g = fib_gibbs();
        let mt = MeasuredTree::build(&g, 2, DEFAULT_PATH_CAP).unwrap();
        let c = CohomologySpace::new(&g.diagram, &mt.tree).unwrap();
        assert!(matches!(HodgeProblem::new(&g, &c, &mt, 6.0), Err(Error::ThresholdViolation { .. })));
    }

    #[test]
    fn coboundaries_have_zero_class_and_mean() {
        let g = fib_gibbs();
        let mt = MeasuredTree::build(&g, 2, DEFAULT_PATH_CAP).unwrap();
        let c = CohomologySpace::new(&g.diagram, &mt.tree).unwrap();
        let p = HodgeProblem::new(&g, &c, &mt, 7.0).unwrap();
        // the Parry measure is itself a trace, so one constraint is implied by zero mean
        assert_eq!(p.rank, 1);
        assert_eq!(mt.tree.len(2), 5);
        assert_eq!(p.coboundary_dimension(), (5 - 1) - p.rank);
        for b in p.coboundary_basis() {
            assert!(integrate(&mt, &b).abs() < 1e-12);
            for q in c.class_vector(&mt.tree, &b) {
                assert!(q.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_tree_has_trivial_zero_mean_cohomology() {
        let g = build_gibbs(&DiagramData::new(vec![vec![2]]).unwrap(), &Potential::zero()).unwrap();
        let mt = MeasuredTree::build(&g, 4, DEFAULT_PATH_CAP).unwrap();
        let c = CohomologySpace::new(&g.diagram, &mt.tree).unwrap();
        let p = HodgeProblem::new(&g, &c, &mt, 7.0).unwrap();
        assert_eq!(p.coboundary_dimension(), mt.tree.len(4) - 1);
        let f = LCFunction::from_fn(&mt.tree, 4, |i| i as f64);
        let s = p.harmonic_representative(&f).unwrap();
        assert!(s.trivial);
        assert!(s.h.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn solution_is_harmonic_minimal_and_unique() {
        let g = fib_gibbs();
        let mt = MeasuredTree::build(&g, 5, DEFAULT_PATH_CAP).unwrap();
        let c = CohomologySpace::new(&g.diagram, &mt.tree).unwrap();
        let p = HodgeProblem::new(&g, &c, &mt, 7.0).unwrap();
        let f = c.dual_basis[0].clone();
        let s = p.harmonic_representative(&f).unwrap();
        assert!(s.residual <= 1e-10);
        assert!(p.harmonicity_residual(&c.dual_basis[0].combine(1.0, &LCFunction::constant(&mt.tree, 1, s.mean), -1.0, &mt.tree)).unwrap() > 1e-6);
        let centered = f.combine(1.0, &LCFunction::constant(&mt.tree, 1, s.mean), -1.0, &mt.tree);
        let qh = c.class_vector(&mt.tree, &s.h);
        let qf = c.class_vector(&mt.tree, &centered);
        for (a, b) in qh.iter().zip(&qf) {
            assert!((a - b).abs() < 1e-10);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let b: Vec<f64> = (0..p.coboundary_dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut coef = vec![0.0; p.eigenvalues.len()];
            for (i, w) in b.iter().enumerate() {
                for (x, y) in coef.iter_mut().zip(p.coboundary_coefficients(i)) {
                    *x += w * y;
                }
            }
            let ebb = p.energy(&coef, &coef);
            let sum: Vec<f64> = coef.iter().zip(&s.coefficients).map(|(a, b)| a + b).collect();
            let e = p.energy(&sum, &sum);
            assert!((e - s.energy - ebb).abs() <= 1e-10 * e.max(1.0));
            let other = p.synthesize(0.0, sum);
            let s2 = p.harmonic_representative(&other).unwrap();
            for (a, b) in s2.h.values.iter().zip(&s.h.values) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let again = p.harmonic_representative(&s.h).unwrap();
        for (a, b) in again.h.values.iter().zip(&s.h.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_energy_matches_pair_sum() {
        let g = fib_gibbs();
        let mt = MeasuredTree::build(&g, 4, DEFAULT_PATH_CAP).unwrap();
        let c = CohomologySpace::new(&g.diagram, &mt.tree).unwrap();
        let p = HodgeProblem::new(&g, &c, &mt, 7.0).unwrap();
        let s = p.harmonic_representative(&c.dual_basis[1]).unwrap();
        let direct = dirichlet_bruteforce(&mt, 7.0, &s.h, &s.h).unwrap();
        assert!((direct - s.energy).abs() <= 1e-9 * s.energy.max(1.0), "{direct} {}", s.energy);
    }

    #[test]
    fn zero_class_gives_zero() {
        let g = fib_gibbs();
        let mt = MeasuredTree::build(&g, 3, DEFAULT_PATH_CAP).unwrap();
        let c = CohomologySpace::new(&g.diagram, &mt.tree).unwrap();
        let p = HodgeProblem::new(&g, &c, &mt, 7.0).unwrap();
        let b = p.coboundary_basis().remove(0);
        let s = p.harmonic_representative(&b).unwrap();
        assert!(s.h.values.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(p.harmonicity_residual(&LCFunction::zero(&mt.tree, 3)).unwrap(), 0.0);
    }

    #[test]
    fn energy_decreases_under_refinement() {
        let g = fib_gibbs();
        let c = CohomologySpace::new(&g.diagram, &MeasuredTree::build(&g, 1, DEFAULT_PATH_CAP).unwrap().tree).unwrap();
        let steps = refine_and_compare(&g, &c, &c.dual_basis[0], &[1, 2, 3, 4, 5, 6], 7.0, DEFAULT_PATH_CAP).unwrap();
        for w in steps.windows(2) {
            assert!(w[1].energy <= w[0].energy * (1.0 + 1e-12), "{} {}", w[0].energy, w[1].energy);
        }
    }
}
