//! (k, p, h) sweeps against same-mesh reference solutions, with CSV and SVG output.

mod config;
mod report;

use std::sync::Arc;

use log::info;
use thiserror::Error;

pub use config::{ConfigError, StudyConfig, DEFAULT_DOF_CAP, DEFAULT_P_REF};
pub use report::{
    csv_file_name, csv_text, emit_csv, emit_plot, emit_plots, format_k, plot_file_name, plot_svg,
    ReportError, CSV_HEADER,
};

use crate::analysis::{
    delta_k_diagnostic, error_report, quasiopt_ratio, AnalysisError, Difference, ErrorReport,
    FeFunction, Field,
};
use crate::assembly::{solve_problem, AssemblyOptions, SolveError};
use crate::coefficients::{builtin_problem, ProblemData, ProblemError, Wavenumber};
use crate::fem::{nedelec_basis, FeSpace, FemError, ReferenceBasis};
use crate::mesh::{build_structured_cube_mesh, Mesh, MeshError};
use crate::verification::builtin_manufactured;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{case}: {source}")]
    Solve { case: String, source: SolveError },
    #[error("{case}: {source}")]
    Analysis { case: String, source: AnalysisError },
    #[error("level {level} needs {dofs} DOFs at order {order}, above the cap of {cap}")]
    DofCap {
        level: usize,
        order: usize,
        dofs: usize,
        cap: usize,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl StudyError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, StudyError::Solve { .. } | StudyError::Analysis { .. })
    }
}

/// One discrete solve and its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub k: Wavenumber,
    pub p: usize,
    pub level: usize,
    /// Largest element diameter.
    pub h: f64,
    pub dofs: usize,
    /// `dofs^{1/3} / |k|`.
    pub n_k: f64,
    pub rel_error: f64,
    pub quasiopt: Option<f64>,
    pub delta_k: f64,
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
}

pub fn n_k(dofs: usize, k: Wavenumber) -> f64 {
    (dofs as f64).cbrt() / k.abs()
}

/// Global DOF count of an order-`p` space on `mesh`, from entity counts alone.
pub fn projected_dofs(mesh: &Mesh, basis: &ReferenceBasis) -> usize {
    let l = basis.layout();
    mesh.vertices().len() * l.vertex
        + mesh.edges().len() * l.edge
        + mesh.faces().len() * l.face
        + mesh.num_tets() * l.interior
}

fn study_mesh(cfg: &StudyConfig, level: usize) -> Result<Mesh, MeshError> {
    build_structured_cube_mesh(cfg.subdivisions(level), cfg.inner_box)
}

fn is_manufactured(name: &str) -> bool {
    builtin_manufactured(name).is_ok()
}

/// Checks every level against the DOF cap without assembling anything.
pub fn check_dof_cap(cfg: &StudyConfig) -> Result<(), StudyError> {
    let orders: Vec<usize> = if is_manufactured(&cfg.problem) {
        cfg.p.clone()
    } else {
        cfg.p.iter().copied().chain([cfg.p_ref]).collect()
    };
    for level in 0..cfg.levels() {
        let mesh = study_mesh(cfg, level)?;
        for &order in &orders {
            let dofs = projected_dofs(&mesh, &nedelec_basis(cfg.family, order)?);
            if dofs > cfg.dof_cap {
                return Err(StudyError::DofCap {
                    level,
                    order,
                    dofs,
                    cap: cfg.dof_cap,
                });
            }
        }
    }
    Ok(())
}

fn case_name(pd: &ProblemData, p: usize, level: usize) -> String {
    format!("{} k={} p={p} level={level}", pd.name, format_k(pd.k))
}

/// Reference field for one (k, level): the closed form for manufactured
/// problems, otherwise the order-`p_ref` solution on the same mesh.
enum Reference {
    Exact(crate::analysis::ExactField),
    Discrete(FeFunction),
}

impl Reference {
    fn field(&self) -> &dyn Field {
        match self {
            Reference::Exact(f) => f,
            Reference::Discrete(f) => f,
        }
    }
}

/// Runs one discrete case against a reference and collects its diagnostics.
pub fn run_case(
    space: &Arc<FeSpace>,
    pd: &ProblemData,
    reference: &dyn Field,
    level: usize,
    opts: &AssemblyOptions,
) -> Result<(RunRecord, ErrorReport), StudyError> {
    let p = space.basis().order();
    let case = case_name(pd, p, level);
    let (coeffs, timings) = solve_problem(space, pd, opts).map_err(|source| StudyError::Solve {
        case: case.clone(),
        source,
    })?;
    let analysis = |source| StudyError::Analysis {
        case: case.clone(),
        source,
    };
    let u_n = FeFunction::new(space.clone(), coeffs).map_err(analysis)?;
    let report = error_report(&u_n, reference, pd.k).map_err(analysis)?;
    let quasiopt = quasiopt_ratio(reference, &u_n, pd.k).map_err(analysis)?;
    let delta_k =
        delta_k_diagnostic(&Difference(reference, &u_n), space, pd, opts).map_err(analysis)?;
    let dofs = space.ndofs();
    let record = RunRecord {
        k: pd.k,
        p,
        level,
        h: space.mesh().max_diameter(),
        dofs,
        n_k: n_k(dofs, pd.k),
        rel_error: report.rel_curlk,
        quasiopt,
        delta_k,
        assemble_seconds: timings.assemble,
        solve_seconds: timings.solve,
    };
    Ok((record, report))
}

/// Full sweep. Records are ordered by k, then p, then level.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<RunRecord>, StudyError> {
    cfg.validate()?;
    check_dof_cap(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.effective_threads())
        .build()
        .map_err(|e| StudyError::Threads(e.to_string()))?;
    pool.install(|| run_study_inner(cfg))
}

fn run_study_inner(cfg: &StudyConfig) -> Result<Vec<RunRecord>, StudyError> {
    let opts = AssemblyOptions {
        quad_bump: cfg.quad_bump,
    };
    let bases: Vec<Arc<ReferenceBasis>> = cfg
        .p
        .iter()
        .map(|&p| nedelec_basis(cfg.family, p).map(Arc::new))
        .collect::<Result<_, _>>()?;
    let manufactured = is_manufactured(&cfg.problem);
    let ref_basis = if manufactured {
        None
    } else {
        Some(Arc::new(nedelec_basis(cfg.family, cfg.p_ref)?))
    };
    let mut records = Vec::new();
    for level in 0..cfg.levels() {
        let mesh = Arc::new(study_mesh(cfg, level)?);
        let spaces: Vec<Arc<FeSpace>> = bases
            .iter()
            .map(|b| Arc::new(FeSpace::new(mesh.clone(), b.clone())))
            .collect();
        for &k in &cfg.k {
            let pd = builtin_problem(&cfg.problem, k)?;
            let reference = match &ref_basis {
                None => Reference::Exact(
                    builtin_manufactured(&cfg.problem)
                        .expect("checked")
                        .solution,
                ),
                Some(b) => {
                    let space = Arc::new(FeSpace::new(mesh.clone(), b.clone()));
                    info!(
                        "reference {} ({} DOFs)",
                        case_name(&pd, cfg.p_ref, level),
                        space.ndofs()
                    );
                    let (coeffs, _) =
                        solve_problem(&space, &pd, &opts).map_err(|source| StudyError::Solve {
                            case: case_name(&pd, cfg.p_ref, level),
                            source,
                        })?;
                    Reference::Discrete(FeFunction::new(space, coeffs).expect("length matches"))
                }
            };
            for space in &spaces {
                let (record, _) = run_case(space, &pd, reference.field(), level, &opts)?;
                info!(
                    "{}: {} DOFs, rel. error {:.3e}, delta_k {:.3e}",
                    case_name(&pd, record.p, level),
                    record.dofs,
                    record.rel_error,
                    record.delta_k
                );
                records.push(record);
            }
        }
    }
    records.sort_by(|a, b| {
        let key = |r: &RunRecord| (r.k.value().re, r.k.value().im);
        key(a)
            .partial_cmp(&key(b))
            .expect("finite wavenumbers")
            .then(a.p.cmp(&b.p))
            .then(a.level.cmp(&b.level))
    });
    if !cfg.record_timings {
        for r in &mut records {
            r.assemble_seconds = 0.0;
            r.solve_seconds = 0.0;
        }
    }
    Ok(records)
}

/// One solve at the finest level for the first `k` and first `p` of `cfg`.
pub fn run_single(cfg: &StudyConfig) -> Result<(RunRecord, ErrorReport), StudyError> {
    let mut one = cfg.clone();
    one.k.truncate(1);
    one.p.truncate(1);
    one.validate()?;
    check_dof_cap(&one)?;
    let level = one.refinements;
    let opts = AssemblyOptions {
        quad_bump: one.quad_bump,
    };
    let mesh = Arc::new(study_mesh(&one, level)?);
    let pd = builtin_problem(&one.problem, one.k[0])?;
    let reference = if is_manufactured(&one.problem) {
        Reference::Exact(
            builtin_manufactured(&one.problem)
                .expect("checked")
                .solution,
        )
    } else {
        let space = Arc::new(FeSpace::new(
            mesh.clone(),
            Arc::new(nedelec_basis(one.family, one.p_ref)?),
        ));
        let (coeffs, _) =
            solve_problem(&space, &pd, &opts).map_err(|source| StudyError::Solve {
                case: case_name(&pd, one.p_ref, level),
                source,
            })?;
        Reference::Discrete(FeFunction::new(space, coeffs).expect("length matches"))
    };
    let space = Arc::new(FeSpace::new(
        mesh,
        Arc::new(nedelec_basis(one.family, one.p[0])?),
    ));
    let (mut record, report) = run_case(&space, &pd, reference.field(), level, &opts)?;
    if !one.record_timings {
        record.assemble_seconds = 0.0;
        record.solve_seconds = 0.0;
    }
    Ok((record, report))
}

/// Records of one (k, p) series, ordered by level.
pub fn series<'a>(records: &'a [RunRecord], k: Wavenumber, p: usize) -> Vec<&'a RunRecord> {
    let mut s: Vec<&RunRecord> = records.iter().filter(|r| r.k == k && r.p == p).collect();
    s.sort_by_key(|r| r.level);
    s
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Convergence rate in `h` over the last `count` levels of a series.
pub fn fitted_rate(series: &[&RunRecord], count: usize) -> Option<f64> {
    let start = series.len().saturating_sub(count);
    let pts: Vec<(f64, f64)> = series[start..].iter().map(|r| (r.h, r.rel_error)).collect();
    loglog_slope(&pts)
}

/// `N_k` at which the relative error of a series reaches `target`, by log-log
/// interpolation between the bracketing levels. Outside the sampled range the
/// nearest two points are extrapolated; a series whose error does not decrease
/// there never reaches the target (`∞`).
pub fn required_n_k(series: &[&RunRecord], target: f64) -> f64 {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|r| r.n_k > 0.0 && r.rel_error > 0.0)
        .map(|r| (r.n_k.ln(), r.rel_error.ln()))
        .collect();
    let t = target.ln();
    if pts.is_empty() {
        return f64::INFINITY;
    }
    if pts.len() == 1 {
        return if pts[0].1 <= t {
            pts[0].0.exp()
        } else {
            f64::INFINITY
        };
    }
    let solve = |a: (f64, f64), b: (f64, f64)| -> f64 {
        let slope = (b.1 - a.1) / (b.0 - a.0);
        if !(slope < 0.0) {
            return f64::INFINITY;
        }
        (a.0 + (t - a.1) / slope).exp()
    };
    if pts[0].1 <= t {
        return solve(pts[0], pts[1]).min(pts[0].0.exp());
    }
    for w in pts.windows(2) {
        if w[0].1 > t && w[1].1 <= t {
            return solve(w[0], w[1]);
        }
    }
    let n = pts.len();
    solve(pts[n - 2], pts[n - 1])
}
