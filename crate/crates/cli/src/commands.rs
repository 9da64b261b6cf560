//! One function per subcommand. Each returns the files to write and a plain-text report.

use std::fmt::Write as _;

use cantor_spectral::bratteli::PathId;
use cantor_spectral::cohomology::{CohomologySpace, EigenBlock};
use cantor_spectral::functions::build_eigenbasis;
use cantor_spectral::gibbs::{build_gibbs, global_child_ratio_lower, shannon_rate};
use cantor_spectral::hodge::{hodge_threshold, refine_and_compare, HodgeProblem};
use cantor_spectral::io::{function_from_file, function_to_file, heat_csv, json_with_header, spectrum_csv, FunctionFile, Header, HeatRow};
use cantor_spectral::spectral::heat::{HeatFit, HeatKernel};
use cantor_spectral::spectral::{spectrum_table, spectrum_table_exact, Scalar, SpectrumTable};
use cantor_spectral::{DiagramData, GibbsData, LCFunction, MeasuredTree, PathTree};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub struct Output {
    pub files: Vec<(String, String)>,
    pub report: String,
}

/// Everything a command needs besides its own options.
pub struct Context {
    pub cfg: RunConfig,
    pub config_sha256: String,
    pub exact: bool,
    pub cap: usize,
    pub diagram: DiagramData,
    pub gibbs: GibbsData,
}

impl Context {
    pub fn new(cfg: RunConfig, config_sha256: String, exact: bool, cap: usize) -> Result<Self, CliError> {
        let diagram = DiagramData::new(cfg.matrix.clone())?;
        let gibbs = build_gibbs(&diagram, &cfg.potential()?)?;
        Ok(Context { cfg, config_sha256, exact, cap, diagram, gibbs })
    }

    fn header(&self) -> Header {
        Header {
            config_sha256: self.config_sha256.clone(),
            lambda: self.gibbs.lambda(),
            d_psi: self.gibbs.d_psi,
            gamma: self.cfg.gamma,
            level: self.cfg.level,
        }
    }

    fn exact_gamma(&self) -> Result<u32, CliError> {
        let g = self.cfg.gamma;
        if g.fract() != 0.0 || g > u32::MAX as f64 {
            return Err(CliError::Config(format!("--exact needs an integer gamma, got {g}")));
        }
        Ok(g as u32)
    }

    fn float_only(&self, command: &str) -> Result<(), CliError> {
        if self.exact {
            return Err(CliError::Config(format!("--exact is not available for {command}")));
        }
        Ok(())
    }
}

fn spectrum_report<S: Scalar>(t: &SpectrumTable<S>) -> String {
    let mut r = String::new();
    let _ = writeln!(r, "levels 0..={}: {} distinct eigenvalues, {} with multiplicity", t.max_level, t.entries.len(), t.total_multiplicity());
    let first = t.smallest();
    let _ = writeln!(r, "smallest eigenvalue {} (multiplicity {}, generator {})", first.eigenvalue.render(), first.multiplicity, first.generator);
    if let Some(next) = t.entries.get(1) {
        let _ = writeln!(r, "next eigenvalue {} (multiplicity {})", next.eigenvalue.render(), next.multiplicity);
    }
    let _ = writeln!(r, "spectral gap: every nonconstant eigenvalue is at least {}", first.eigenvalue.render());
    let _ = writeln!(r, "eigenvalues from higher levels are at least {}", t.threshold.render());
    r
}

pub fn spectrum(ctx: &Context) -> Result<Output, CliError> {
    let h = ctx.header();
    let (csv, report) = if ctx.exact {
        let t = spectrum_table_exact(&ctx.diagram, ctx.exact_gamma()?, ctx.cfg.level, ctx.cap)?;
        if !ctx.gibbs.potential.is_zero() {
            return Err(CliError::Config("--exact supports only the zero potential".into()));
        }
        (spectrum_csv(&h, &t), spectrum_report(&t))
    } else {
        let t = spectrum_table(&ctx.gibbs, ctx.cfg.gamma, ctx.cfg.level, ctx.cap)?;
        (spectrum_csv(&h, &t), spectrum_report(&t))
    };
    Ok(Output { files: vec![("spectrum.csv".into(), csv)], report })
}

fn weyl_output<S: Scalar>(ctx: &Context, t: &SpectrumTable<S>) -> Result<Output, CliError> {
    let opts = &ctx.cfg.weyl;
    let fit = t.weyl_fit(opts.lambda_min.unwrap_or(1.0), opts.lambda_max.unwrap_or(f64::INFINITY))?;
    let mut csv = ctx.header().comment_lines();
    let _ = writeln!(csv, "# slope={:.16e}\n# target={:.16e}", fit.slope, fit.target);
    csv.push_str("lambda,count\n");
    for (x, n) in &fit.points {
        let _ = writeln!(csv, "{x:.16e},{n}");
    }
    let mut report = String::new();
    let _ = writeln!(report, "fitted exponent {:.6} against 1/(gamma - d_psi) = {:.6} (relative error {:.2}%)", fit.slope, fit.target, 100.0 * fit.relative_error());
    let _ = writeln!(report, "Lambda range [{:.6e}, {:.6e}] covering {} spectral levels", fit.range.0, fit.range.1, fit.levels);
    let _ = writeln!(report, "N(Lambda) Lambda^-target stays in [{:.6}, {:.6}]", fit.band.0, fit.band.1);
    Ok(Output { files: vec![("weyl.csv".into(), csv)], report })
}

pub fn weyl(ctx: &Context) -> Result<Output, CliError> {
    if ctx.exact {
        if !ctx.gibbs.potential.is_zero() {
            return Err(CliError::Config("--exact supports only the zero potential".into()));
        }
        weyl_output(ctx, &spectrum_table_exact(&ctx.diagram, ctx.exact_gamma()?, ctx.cfg.level, ctx.cap)?)
    } else {
        weyl_output(ctx, &spectrum_table(&ctx.gibbs, ctx.cfg.gamma, ctx.cfg.level, ctx.cap)?)
    }
}

fn default_times() -> Vec<f64> {
    (0..10).map(|i| 0.01 * 100f64.powf(i as f64 / 9.0)).collect()
}

pub fn heat(ctx: &Context) -> Result<Output, CliError> {
    ctx.float_only("heat")?;
    let k = ctx.cfg.level;
    if k == 0 {
        return Err(CliError::Config("heat needs level >= 1".into()));
    }
    let mt = MeasuredTree::build(&ctx.gibbs, k, ctx.cap)?;
    let basis = build_eigenbasis(&mt, k)?;
    let table = SpectrumTable::from_tree(&mt, ctx.cfg.gamma)?;
    let hk = HeatKernel::new(&basis, &mt, &table, global_child_ratio_lower(&ctx.gibbs, &mt))?;
    let times = ctx.cfg.heat.times.clone().unwrap_or_else(default_times);
    if times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(CliError::Config("heat times must be positive".into()));
    }
    let n = mt.tree.len(k);
    let pairs: Vec<(usize, usize)> = match &ctx.cfg.heat.pairs {
        Some(list) => list
            .iter()
            .map(|(x, y)| Ok((hk.cell(&x.parse::<PathId>()?)?, hk.cell(&y.parse::<PathId>()?)?)))
            .collect::<Result<_, CliError>>()?,
        None => {
            let mut ys = vec![0, 1, n / 4, n / 2, n - 1];
            ys.sort_unstable();
            ys.dedup();
            ys.into_iter().filter(|&y| y < n).map(|y| (0, y)).collect()
        }
    };
    let mut rows = Vec::new();
    for &(x, y) in &pairs {
        for &t in &times {
            rows.push(HeatRow {
                x: mt.tree.path(k, x).to_string(),
                y: mt.tree.path(k, y).to_string(),
                t,
                value: hk.value(x, y, t),
                tail_bound: hk.tail_bound(t),
                profile: hk.profile(hk.distance(x, y), t),
            });
        }
    }
    let fit: HeatFit = hk.estimate_check(&pairs, &times);
    let mut report = String::new();
    let _ = writeln!(report, "{} samples over {} pairs and {} times", fit.samples, pairs.len(), times.len());
    let _ = writeln!(report, "p_t / profile in [{:.6e}, {:.6e}], c2/c1 = {:.6}", fit.c1, fit.c2, fit.ratio);
    let worst_tail = times.iter().map(|&t| hk.tail_bound(t)).fold(0.0, f64::max);
    let _ = writeln!(report, "largest truncation bound over the time grid {worst_tail:.3e}");
    Ok(Output { files: vec![("heat.csv".into(), heat_csv(&ctx.header(), &rows))], report })
}

#[derive(Serialize)]
struct TraceOut {
    b0: Vec<f64>,
    recursion_residual: f64,
}

#[derive(Serialize)]
struct ClassOut {
    name: String,
    class: Vec<f64>,
}

#[derive(Serialize)]
struct CohomologyOut<'a> {
    dimension: usize,
    traces: Vec<TraceOut>,
    dual_basis: Vec<FunctionFile>,
    eigen_structure: &'a [EigenBlock],
    classes: Vec<ClassOut>,
}

pub fn cohomology(ctx: &Context) -> Result<Output, CliError> {
    ctx.float_only("cohomology")?;
    let opts = &ctx.cfg.cohomology;
    let tree = PathTree::build(&ctx.diagram, ctx.cfg.level.max(1), ctx.cap)?;
    let space = CohomologySpace::new(&ctx.diagram, &tree)?;
    let mut classes = Vec::new();
    for p in &opts.indicators {
        let path: PathId = p.parse()?;
        let f = LCFunction::indicator(&tree, &path, path.len())?;
        classes.push(ClassOut { name: p.clone(), class: space.class_vector(&tree, &f) });
    }
    for (i, file) in opts.functions.iter().enumerate() {
        let f = function_from_file(&tree, file)?;
        classes.push(ClassOut { name: format!("function {i}"), class: space.class_vector(&tree, &f) });
    }
    let body = CohomologyOut {
        dimension: space.d,
        traces: space
            .trace_basis
            .iter()
            .map(|t| TraceOut { b0: t.b0.clone(), recursion_residual: t.recursion_residual(12) })
            .collect(),
        dual_basis: space.dual_basis.iter().map(|f| function_to_file(&tree, f)).collect(),
        eigen_structure: &space.eigen_structure,
        classes,
    };
    let mut report = String::new();
    let _ = writeln!(report, "d(A) = {} (dimension of the trace space)", space.d);
    for b in &space.eigen_structure {
        let _ = writeln!(report, "eigenvalue {:.6} {:+.6}i, algebraic multiplicity {}", b.eigenvalue.0, b.eigenvalue.1, b.algebraic_multiplicity);
    }
    for c in &body.classes {
        let _ = writeln!(report, "class of {}: {:?}", c.name, c.class);
    }
    Ok(Output { files: vec![("cohomology.json".into(), json_with_header(&ctx.header(), &body)?)], report })
}

#[derive(Serialize)]
struct StepOut {
    level: usize,
    energy: f64,
    residual: f64,
    condition: f64,
    l2_distance: Option<f64>,
}

#[derive(Serialize)]
struct HodgeOut {
    threshold: f64,
    coboundary_dimension: usize,
    harmonic: FunctionFile,
    mean: f64,
    class_target: Vec<f64>,
    energy: f64,
    residual: f64,
    condition: f64,
    trivial: bool,
    convergence: Vec<StepOut>,
}

pub fn hodge(ctx: &Context) -> Result<Output, CliError> {
    ctx.float_only("hodge")?;
    let opts = &ctx.cfg.hodge;
    let k = ctx.cfg.level;
    let mt = MeasuredTree::build(&ctx.gibbs, k, ctx.cap)?;
    let space = CohomologySpace::new(&ctx.diagram, &mt.tree)?;
    let f = match (&opts.function, &opts.coefficients) {
        (Some(file), _) => function_from_file(&mt.tree, file)?,
        (None, coefficients) => {
            let c = coefficients.clone().unwrap_or_else(|| {
                let mut c = vec![0.0; space.d];
                c[0] = 1.0;
                c
            });
            if c.len() != space.d {
                return Err(CliError::Config(format!("expected {} class coefficients, got {}", space.d, c.len())));
            }
            let mut f = LCFunction::zero(&mt.tree, 1.min(k));
            for (cj, fj) in c.iter().zip(&space.dual_basis) {
                f = f.combine(1.0, fj, *cj, &mt.tree);
            }
            f
        }
    };
    let problem = HodgeProblem::new(&ctx.gibbs, &space, &mt, ctx.cfg.gamma)?;
    let solution = problem.harmonic_representative(&f)?;
    let levels = opts.levels.clone().unwrap_or_else(|| (f.level.max(1)..=k).collect());
    let steps = refine_and_compare(&ctx.gibbs, &space, &f, &levels, ctx.cfg.gamma, ctx.cap)?;
    let body = HodgeOut {
        threshold: hodge_threshold(&ctx.gibbs),
        coboundary_dimension: problem.coboundary_dimension(),
        harmonic: function_to_file(&mt.tree, &solution.h),
        mean: solution.mean,
        class_target: solution.class_target.clone(),
        energy: solution.energy,
        residual: solution.residual,
        condition: solution.condition,
        trivial: solution.trivial,
        convergence: steps
            .iter()
            .map(|s| StepOut { level: s.level, energy: s.energy, residual: s.residual, condition: s.condition, l2_distance: s.l2_distance })
            .collect(),
    };
    let mut report = String::new();
    let _ = writeln!(report, "harmonic threshold {:.6}, gamma {}", body.threshold, ctx.cfg.gamma);
    let _ = writeln!(report, "class {:?}, energy {:.6e}, residual {:.3e}, condition {:.3e}", body.class_target, body.energy, body.residual, body.condition);
    for s in &body.convergence {
        let dist = s.l2_distance.map_or_else(|| "-".to_string(), |d| format!("{d:.3e}"));
        let _ = writeln!(report, "level {}: energy {:.6e}, L2 step {dist}", s.level, s.energy);
    }
    Ok(Output { files: vec![("hodge.json".into(), json_with_header(&ctx.header(), &body)?)], report })
}

#[derive(Serialize)]
struct BlockOut {
    block: String,
    mass: f64,
}

#[derive(Serialize)]
struct GibbsOut {
    pressure: f64,
    entropy: f64,
    integral_psi: f64,
    d_psi: f64,
    big_lambda: f64,
    right_vector: Vec<f64>,
    left_vector: Vec<f64>,
    blocks: Vec<BlockOut>,
    level_sums: Vec<f64>,
    shannon_rate: Option<f64>,
}

pub fn gibbs(ctx: &Context) -> Result<Output, CliError> {
    ctx.float_only("gibbs")?;
    let g = &ctx.gibbs;
    let k = ctx.cfg.level;
    let mt = MeasuredTree::build(g, k, ctx.cap)?;
    let body = GibbsOut {
        pressure: g.pressure,
        entropy: g.entropy,
        integral_psi: g.integral_psi,
        d_psi: g.d_psi,
        big_lambda: g.big_lambda,
        right_vector: g.v.clone(),
        left_vector: g.u.clone(),
        blocks: g
            .blocks
            .iter()
            .enumerate()
            .map(|(w, b)| BlockOut {
                block: b.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","),
                mass: g.block_mass(w),
            })
            .collect(),
        level_sums: mt.masses.iter().map(|m| m.iter().sum()).collect(),
        shannon_rate: (k > 0).then(|| shannon_rate(&mt, k)),
    };
    let mut report = String::new();
    let _ = writeln!(report, "pressure {:.12}, entropy {:.12}, integral of psi {:.12}", body.pressure, body.entropy, body.integral_psi);
    let _ = writeln!(report, "relative dimension d_psi {:.12}", body.d_psi);
    if let Some(s) = body.shannon_rate {
        let _ = writeln!(report, "level-{k} Shannon rate {s:.12}");
    }
    Ok(Output { files: vec![("gibbs.json".into(), json_with_header(&ctx.header(), &body)?)], report })
}
