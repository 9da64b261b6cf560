use super::heat::HeatKernel;
use super::*;
use crate::bratteli::{enumerate_paths, PathTree, DEFAULT_PATH_CAP};
use crate::functions::build_eigenbasis;
use crate::gibbs::{build_gibbs, Potential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn parry(rows: Vec<Vec<u64>>) -> GibbsData {
    build_gibbs(&DiagramData::new(rows).unwrap(), &Potential::zero()).unwrap()
}

fn random_function(tree: &PathTree, level: usize, rng: &mut ChaCha8Rng) -> LCFunction {
    LCFunction::from_fn(tree, level, |_| rng.gen_range(-1.0..1.0))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn binary_tree_gamma_one_closed_form() {
    let g = parry(vec![vec![2]]);
    for k in 0..7 {
        let e = PathId { source: 0, edges: vec![0; k] };
        assert!(close(eigenvalue(&g, &e, 1.0).unwrap(), 1.0 + k as f64 / 2.0, 1e-13));
    }
    let t = spectrum_table_exact(&g.diagram, 1, 6, DEFAULT_PATH_CAP).unwrap();
    for (k, e) in t.entries.iter().enumerate() {
        assert_eq!(e.eigenvalue, Q::new(BigInt::from(2 + k), BigInt::from(2)));
        assert_eq!(e.multiplicity, 1u128 << k);
    }
}

#[test]
fn binary_tree_gamma_two_first_level() {
    let g = parry(vec![vec![2]]);
    let e: PathId = "0:1".parse().unwrap();
    assert!(close(eigenvalue(&g, &e, 2.0).unwrap(), 2.5, 1e-14));
    let t = spectrum_table_exact(&g.diagram, 2, 3, DEFAULT_PATH_CAP).unwrap();
    assert_eq!(t.entries[1].eigenvalue, Q::new(BigInt::from(5), BigInt::from(2)));
}

#[test]
fn level_zero_eigenvalue_is_one() {
    for rows in [vec![vec![2]], vec![vec![1, 1], vec![1, 0]], vec![vec![1, 1], vec![1, 1]], vec![vec![2, 1], vec![1, 1]]] {
        let g = parry(rows);
        for v in 0..g.diagram.n {
            if g.diagram.out_degree(v) >= 2 {
                assert!(close(eigenvalue(&g, &PathId::vertex(v), 2.0).unwrap(), 1.0, 1e-14));
            }
        }
        let t = spectrum_table(&g, 2.0, 4, DEFAULT_PATH_CAP).unwrap();
        assert!(close(t.smallest().eigenvalue, 1.0, 1e-14));
    }
}

#[test]
fn four_edges_gamma_one_closed_form() {
    let g = parry(vec![vec![4]]);
    let t = spectrum_table(&g, 1.0, 6, DEFAULT_PATH_CAP).unwrap();
    for (k, e) in t.entries.iter().enumerate() {
        assert!(close(e.eigenvalue, 1.0 + 0.75 * k as f64, 1e-13));
        assert_eq!(e.multiplicity, 3 * 4u128.pow(k as u32));
    }
    let x = spectrum_table_exact(&g.diagram, 1, 6, DEFAULT_PATH_CAP).unwrap();
    for (k, e) in x.entries.iter().enumerate() {
        assert_eq!(e.eigenvalue, Q::new(BigInt::from(4 + 3 * k), BigInt::from(4)));
    }
}

#[test]
fn full_two_vertex_closed_form_and_relation() {
    let g2 = parry(vec![vec![1, 1], vec![1, 1]]);
    let g1 = parry(vec![vec![2]]);
    for gamma in [2.0f64, 3.0, 1.5] {
        let t2 = spectrum_table(&g2, gamma, 6, DEFAULT_PATH_CAP).unwrap();
        let t1 = spectrum_table(&g1, gamma, 6, DEFAULT_PATH_CAP).unwrap();
        for k in 0..=6 {
            let s = 2f64.powf((gamma - 1.0) * k as f64);
            let sigma2 = 0.5 * s + 0.5 + 0.25 * (1.0 - s) / (1.0 - 2f64.powf(gamma - 1.0));
            let sigma1 = s + 0.5 * (1.0 - s) / (1.0 - 2f64.powf(gamma - 1.0));
            assert!(close(t2.entries[k].eigenvalue, sigma2, 1e-12), "gamma {gamma} k {k}");
            assert!(close(t1.entries[k].eigenvalue, sigma1, 1e-12));
            assert!(close(sigma2, 0.5 * (sigma1 + 1.0), 1e-13));
        }
        // root generator plus one generator per vertex at level 0
        assert_eq!(t2.multiplicity_of(&1.0), 3);
    }
}

#[test]
fn multiplicity_of_one_counts_first_edges() {
    for rows in [vec![vec![1, 1], vec![1, 1]], vec![vec![2, 1], vec![1, 1]], vec![vec![4]]] {
        let g = parry(rows);
        let edges = g.diagram.edge_count() as u128;
        let t = spectrum_table(&g, 2.0, 3, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(t.multiplicity_of(&1.0), edges - 1);
    }
}

#[test]
fn gamma_not_above_dimension_is_refused() {
    let g = parry(vec![vec![2]]);
    assert!(matches!(eigenvalue(&g, &PathId::vertex(0), 1.0 - 1e-9), Err(Error::GammaTooSmall { .. })));
    assert!(matches!(spectrum_table(&g, 0.5, 3, DEFAULT_PATH_CAP), Err(Error::GammaTooSmall { .. })));
}

#[test]
fn counting_function_on_binary_tree() {
    let g = parry(vec![vec![2]]);
    let t = spectrum_table(&g, 1.0, 6, DEFAULT_PATH_CAP).unwrap();
    assert_eq!(t.counting_function(0.99).unwrap(), 0);
    assert_eq!(t.counting_function(1.0).unwrap(), 1);
    // eigenvalues 1, 3/2, 2 with multiplicities 1, 2, 4
    assert_eq!(t.counting_function(2.0).unwrap(), 7);
    assert!(matches!(t.counting_function(100.0), Err(Error::TableIncomplete { .. })));
    let four = spectrum_table(&parry(vec![vec![4]]), 2.0, 4, DEFAULT_PATH_CAP).unwrap();
    assert_eq!(four.counting_function(1.0).unwrap(), 3);
}

#[test]
fn counting_agrees_with_enumeration() {
    let g = parry(vec![vec![1, 1], vec![1, 0]]);
    let t = spectrum_table(&g, 2.5, 8, DEFAULT_PATH_CAP).unwrap();
    let mut all: Vec<(f64, u128)> = vec![(1.0, 1)];
    for k in 0..=8 {
        for e in enumerate_paths(&g.diagram, k, DEFAULT_PATH_CAP).unwrap() {
            let out = g.diagram.out_degree(e.range(&g.diagram));
            if out >= 2 {
                all.push((eigenvalue(&g, &e, 2.5).unwrap(), out as u128 - 1));
            }
        }
    }
    let threshold = t.threshold;
    for bound in [1.0, 1.7, 3.0, 10.0, 50.0, threshold * 0.99] {
        let brute: u128 = all.iter().filter(|(v, _)| *v <= bound * (1.0 + 1e-12)).map(|p| p.1).sum();
        assert_eq!(t.counting_function(bound).unwrap(), brute, "bound {bound}");
    }
}

#[test]
fn compressed_and_tree_tables_agree() {
    let g = build_gibbs(
        &DiagramData::new(vec![vec![1, 1], vec![1, 0]]).unwrap(),
        &Potential::from_edge_values(&[0.3, -0.2, 0.1]),
    )
    .unwrap();
    let mt = MeasuredTree::build(&g, 7, DEFAULT_PATH_CAP).unwrap();
    let a = SpectrumTable::from_tree(&mt, 3.0).unwrap();
    let b = spectrum_table(&g, 3.0, 6, DEFAULT_PATH_CAP).unwrap();
    assert_eq!(a.entries.len(), b.entries.len());
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert!(close(x.eigenvalue, y.eigenvalue, 1e-11));
        assert_eq!(x.multiplicity, y.multiplicity);
    }
    assert!(close(a.threshold, b.threshold, 1e-11));
}

#[test]
fn exact_and_float_tables_agree() {
    let d = DiagramData::new(vec![vec![2, 1], vec![1, 2]]).unwrap();
    let g = build_gibbs(&d, &Potential::zero()).unwrap();
    let f = spectrum_table(&g, 2.0, 6, DEFAULT_PATH_CAP).unwrap();
    let x = spectrum_table_exact(&d, 2, 6, DEFAULT_PATH_CAP).unwrap();
    assert_eq!(f.entries.len(), x.entries.len());
    for (a, b) in f.entries.iter().zip(&x.entries) {
        assert!(close(a.eigenvalue, exact::to_f64(&b.eigenvalue), 1e-12));
        assert_eq!(a.multiplicity, b.multiplicity);
    }
}

#[test]
fn eigenvalues_increase_along_branching_ancestors() {
    let g = build_gibbs(
        &DiagramData::new(vec![vec![2, 1], vec![1, 1]]).unwrap(),
        &Potential::from_block_strings(1, [("0", 0.4), ("3", -0.3)]).unwrap(),
    )
    .unwrap();
    let gamma = 2.5;
    let lambda = g.lambda();
    for e in enumerate_paths(&g.diagram, 5, DEFAULT_PATH_CAP).unwrap() {
        for k in 1..=e.len() {
            let child = e.prefix(k);
            let parent = e.prefix(k - 1);
            let d = &g.diagram;
            if d.out_degree(child.range(d)) < 2 || d.out_degree(parent.range(d)) < 2 {
                continue;
            }
            let gap = eigenvalue(&g, &child, gamma).unwrap() - eigenvalue(&g, &parent, gamma).unwrap();
            let mu = cylinder_measure(&g, &child).unwrap();
            let expected = mu * (lambda.powf(gamma * k as f64) - lambda.powf(gamma * (k - 1) as f64));
            assert!(gap > 0.0);
            assert!(close(gap, expected, 1e-11));
        }
    }
}

#[test]
fn bruteforce_example_on_binary_tree() {
    let g = parry(vec![vec![2]]);
    let mt = MeasuredTree::build(&g, 1, DEFAULT_PATH_CAP).unwrap();
    let f = LCFunction::indicator(&mt.tree, &"0:0".parse().unwrap(), 1).unwrap();
    assert!(close(dirichlet_bruteforce(&mt, 1.0, &f, &f).unwrap(), 0.25, 1e-15));
    let one = LCFunction::constant(&mt.tree, 1, 1.0);
    assert_eq!(dirichlet_bruteforce(&mt, 1.0, &one, &one).unwrap(), 0.0);
}

fn weighted_setup(depth: usize) -> (GibbsData, MeasuredTree) {
    let g = build_gibbs(
        &DiagramData::new(vec![vec![1, 1], vec![1, 0]]).unwrap(),
        &Potential::from_block_strings(2, [("0,0", 0.5), ("0,2", -0.25), ("1,0", 0.2)]).unwrap(),
    )
    .unwrap();
    let mt = MeasuredTree::build(&g, depth, DEFAULT_PATH_CAP).unwrap();
    (g, mt)
}

#[test]
fn eigen_and_bruteforce_energies_agree() {
    let (_, mt) = weighted_setup(6);
    let gamma = 3.0;
    let b = build_eigenbasis(&mt, 6).unwrap();
    let t = SpectrumTable::from_tree(&mt, gamma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let f = random_function(&mt.tree, 6, &mut rng);
        let g = random_function(&mt.tree, rng.gen_range(0..=6), &mut rng);
        let a = dirichlet_eigen(&b, &mt, &t, &f, &g).unwrap();
        let c = dirichlet_bruteforce(&mt, gamma, &f, &g).unwrap();
        assert!((a - c).abs() <= 1e-10 * a.abs().max(c.abs()).max(1e-3), "{a} {c}");
    }
}

#[test]
fn basis_functions_are_eigenfunctions_of_the_form() {
    let (_, mt) = weighted_setup(4);
    let gamma = 2.5;
    let b = build_eigenbasis(&mt, 4).unwrap();
    let t = SpectrumTable::from_tree(&mt, gamma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (pos, (gen, _)) in b.labels.iter().enumerate() {
        let u = b.basis_function(&mt, pos);
        let lam = t.generator_eigenvalue(*gen).unwrap();
        assert!(close(dirichlet_eigen(&b, &mt, &t, &u, &u).unwrap(), lam, 1e-12));
        let pc = poincare_check(&b, &mt, &t, &u).unwrap();
        assert!(pc.pass && close(pc.variance, 1.0, 1e-12));
        for _ in 0..50 {
            let g = random_function(&mt.tree, 4, &mut rng);
            let lhs = dirichlet_bruteforce(&mt, gamma, &u, &g).unwrap();
            let rhs = lam * crate::functions::l2_inner(&mt, &u, &g);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-3));
        }
    }
}

#[test]
fn poincare_holds_on_random_functions() {
    let (_, mt) = weighted_setup(6);
    let b = build_eigenbasis(&mt, 6).unwrap();
    let t = SpectrumTable::from_tree(&mt, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let f = random_function(&mt.tree, 6, &mut rng);
        assert!(poincare_check(&b, &mt, &t, &f).unwrap().pass);
    }
    let one = LCFunction::constant(&mt.tree, 6, 2.0);
    let pc = poincare_check(&b, &mt, &t, &one).unwrap();
    assert!(pc.pass && pc.energy.abs() < 1e-12 && pc.variance.abs() < 1e-12);
}

#[test]
fn l2w_ratio_is_bounded_and_rejects_constants() {
    let g = parry(vec![vec![2]]);
    let mt = MeasuredTree::build(&g, 7, DEFAULT_PATH_CAP).unwrap();
    let b = build_eigenbasis(&mt, 7).unwrap();
    let t = SpectrumTable::from_tree(&mt, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let f = random_function(&mt.tree, 7, &mut rng);
        worst = worst.max(l2w_ratio(&b, &mt, &t, &f).unwrap());
    }
    assert!(worst.is_finite() && worst > 0.0);
    let one = LCFunction::constant(&mt.tree, 7, 1.0);
    assert!(matches!(l2w_ratio(&b, &mt, &t, &one), Err(Error::DivisionByZero(_))));
}

#[test]
fn weyl_slope_on_binary_tree() {
    let g = parry(vec![vec![2]]);
    let t = spectrum_table(&g, 2.0, 12, DEFAULT_PATH_CAP).unwrap();
    let fit = t.weyl_fit(1.0, f64::INFINITY).unwrap();
    assert!(fit.relative_error() < 0.05, "slope {}", fit.slope);
    assert!(fit.band.0 > 0.0 && fit.band.1.is_finite());
}

#[test]
fn weyl_needs_enough_levels() {
    let g = parry(vec![vec![2]]);
    let t = spectrum_table(&g, 2.0, 2, DEFAULT_PATH_CAP).unwrap();
    assert!(matches!(t.weyl_fit(1.0, f64::INFINITY), Err(Error::InsufficientRange { .. })));
}

#[test]
fn heat_kernel_is_stochastic_symmetric_and_a_semigroup() {
    let g = parry(vec![vec![2]]);
    let mt = MeasuredTree::build(&g, 6, DEFAULT_PATH_CAP).unwrap();
    let b = build_eigenbasis(&mt, 6).unwrap();
    let t = SpectrumTable::from_tree(&mt, 2.0).unwrap();
    let hk = HeatKernel::new(&b, &mt, &t, 0.5).unwrap();
    let n = mt.tree.len(6);
    let mu = &mt.masses[6];
    for &x in &[0usize, 5, 33] {
        let total: f64 = (0..n).map(|z| hk.value(x, z, 0.3) * mu[z]).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for &y in &[1usize, 17, 63] {
            assert_eq!(hk.value(x, y, 0.2), hk.value(y, x, 0.2));
            let conv: f64 = (0..n).map(|z| hk.value(x, z, 0.1) * hk.value(z, y, 0.2) * mu[z]).sum();
            assert!((conv - hk.value(x, y, 0.3)).abs() < 1e-8);
        }
        assert!((hk.value(x, 40, 60.0) - 1.0).abs() < 1e-12);
    }
}
