//! Manufactured solutions and a finite-difference residual oracle.

use std::sync::Arc;

use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{error_report, ExactField, FeFunction};
use crate::assembly::{solve_problem, AssemblyOptions, SolveError};
use crate::coefficients::{identity, CoefficientField, ImpedanceField, ProblemData, Wavenumber};
use crate::fem::{nedelec_basis, Family, FeSpace};
use crate::mesh::{build_structured_cube_mesh, Point};

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),
    #[error("sample {0:?} lies outside the unit cube")]
    OutsideDomain(Point),
    #[error("boundary sample {0:?} is not on the cube surface")]
    OffBoundary(Point),
}

pub type SourceFn = Arc<dyn Fn(&Point, c64) -> [c64; 3] + Send + Sync>;
pub type TraceFn = Arc<dyn Fn(&Point, &[f64; 3], c64) -> [c64; 3] + Send + Sync>;

/// Closed-form solution of the impedance problem with `μ⁻¹ = ε = I`, `ζ = 1`
/// on the unit cube, together with its data.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub solution: ExactField,
    /// `f(x, k)`.
    pub f: SourceFn,
    /// `g(x, n, k)`.
    pub g: TraceFn,
    /// Quadrature hint for the data.
    pub source_degree: usize,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

pub const MANUFACTURED_CASES: [&str; 2] = ["manufactured_linear", "manufactured_trig"];

fn cross(a: &[c64; 3], n: &[f64; 3]) -> [c64; 3] {
    [
        a[1] * n[2] - a[2] * n[1],
        a[2] * n[0] - a[0] * n[2],
        a[0] * n[1] - a[1] * n[0],
    ]
}

fn tangential(u: &[c64; 3], n: &[f64; 3]) -> [c64; 3] {
    let un: c64 = (0..3).map(|i| u[i] * n[i]).sum();
    std::array::from_fn(|i| u[i] - un * n[i])
}

/// `curl u × n − i k u_T`.
fn impedance_trace(solution: &ExactField) -> TraceFn {
    let (u, curl) = (solution.value.clone(), solution.curl.clone());
    Arc::new(move |x, n, k| {
        let c = cross(&curl(x), n);
        let ut = tangential(&u(x), n);
        let ik = c64::new(0.0, 1.0) * k;
        std::array::from_fn(|i| c[i] - ik * ut[i])
    })
}

pub fn builtin_manufactured(name: &str) -> Result<ManufacturedCase, VerificationError> {
    let r = |v: f64| c64::new(v, 0.0);
    let zero = c64::new(0.0, 0.0);
    match name {
        "manufactured_linear" => {
            let solution = ExactField {
                value: Arc::new(move |x| [r(x[2]), zero, zero]),
                curl: Arc::new(move |_| [zero, r(1.0), zero]),
                degree: 1,
            };
            Ok(ManufacturedCase {
                name: "manufactured_linear",
                g: impedance_trace(&solution),
                f: Arc::new(move |x, k| [-k * k * x[2], zero, zero]),
                solution,
                source_degree: 1,
            })
        }
        "manufactured_trig" => {
            use std::f64::consts::PI;
            let solution = ExactField {
                value: Arc::new(move |x| [r((PI * x[1]).sin() * (PI * x[2]).sin()), zero, zero]),
                curl: Arc::new(move |x| {
                    [
                        zero,
                        r(PI * (PI * x[1]).sin() * (PI * x[2]).cos()),
                        r(-PI * (PI * x[1]).cos() * (PI * x[2]).sin()),
                    ]
                }),
                degree: 6,
            };
            Ok(ManufacturedCase {
                name: "manufactured_trig",
                g: impedance_trace(&solution),
                f: Arc::new(move |x, k| {
                    let u = (PI * x[1]).sin() * (PI * x[2]).sin();
                    [(2.0 * PI * PI - k * k) * u, zero, zero]
                }),
                solution,
                source_degree: 6,
            })
        }
        other => Err(VerificationError::UnknownCase(other.into())),
    }
}

impl ManufacturedCase {
    pub fn problem(&self, k: Wavenumber) -> ProblemData {
        let (f, g) = (self.f.clone(), self.g.clone());
        let kv = k.value();
        ProblemData {
            name: self.name.into(),
            mu_inv: CoefficientField::constant(identity()),
            eps: CoefficientField::constant(identity()),
            zeta: ImpedanceField::scalar(c64::new(1.0, 0.0)),
            f: Arc::new(move |x| f(x, kv)),
            g: Arc::new(move |x, n| g(x, n, kv)),
            k,
            source_degree: self.source_degree,
        }
    }
}

const FD_STEP: f64 = 1e-2;

/// Sixth-order central difference of `f` along `axis`, Richardson-extrapolated
/// from steps `h` and `h/2`.
fn derivative<F: Fn(&Point) -> [c64; 3]>(f: &F, x: &Point, axis: usize) -> [c64; 3] {
    let stencil = |h: f64| {
        let at = |s: f64| {
            let mut y = *x;
            y[axis] += s * h;
            f(&y)
        };
        let (m3, m2, m1, p1, p2, p3) = (at(-3.0), at(-2.0), at(-1.0), at(1.0), at(2.0), at(3.0));
        let d: [c64; 3] = std::array::from_fn(|i| {
            (p3[i] - m3[i] - 9.0 * (p2[i] - m2[i]) + 45.0 * (p1[i] - m1[i])) / (60.0 * h)
        });
        d
    };
    let (coarse, fine) = (stencil(FD_STEP), stencil(FD_STEP / 2.0));
    std::array::from_fn(|i| (64.0 * fine[i] - coarse[i]) / 63.0)
}

fn fd_curl<F: Fn(&Point) -> [c64; 3]>(f: &F, x: &Point) -> [c64; 3] {
    let d: Vec<[c64; 3]> = (0..3).map(|a| derivative(f, x, a)).collect();
    [d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]]
}

fn dist(a: &[c64; 3], b: &[c64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).norm_sqr()).sum::<f64>().sqrt()
}

fn inside(x: &Point) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}

/// Outward normal of the cube side containing `x`, if any.
fn cube_normal(x: &Point) -> Option<[f64; 3]> {
    const TOL: f64 = 1e-12;
    (0..3).find_map(|a| {
        let mut n = [0.0; 3];
        if x[a].abs() < TOL {
            n[a] = -1.0;
            Some(n)
        } else if (x[a] - 1.0).abs() < TOL {
            n[a] = 1.0;
            Some(n)
        } else {
            None
        }
    })
}

/// Largest strong-form residual over the samples: the PDE at `interior`, the
/// impedance condition at `boundary`, and the stated curl against a
/// finite-difference curl at both.
pub fn residual_probe(
    case: &ManufacturedCase,
    k: Wavenumber,
    interior: &[Point],
    boundary: &[Point],
) -> Result<f64, VerificationError> {
    let kv = k.value();
    let u = &case.solution.value;
    let curl = &case.solution.curl;
    let mut worst: f64 = 0.0;
    for x in interior {
        if !inside(x) {
            return Err(VerificationError::OutsideDomain(*x));
        }
        let cc = fd_curl(&|y: &Point| fd_curl(&|z: &Point| u(z), y), x);
        let ux = u(x);
        let f = (case.f)(x, kv);
        let lhs: [c64; 3] = std::array::from_fn(|i| cc[i] - kv * kv * ux[i]);
        worst = worst.max(dist(&lhs, &f));
        worst = worst.max(dist(&curl(x), &fd_curl(&|z: &Point| u(z), x)));
    }
    for x in boundary {
        if !inside(x) {
            return Err(VerificationError::OutsideDomain(*x));
        }
        let n = cube_normal(x).ok_or(VerificationError::OffBoundary(*x))?;
        let c = fd_curl(&|z: &Point| u(z), x);
        let trace = cross(&c, &n);
        let ut = tangential(&u(x), &n);
        let ik = c64::new(0.0, 1.0) * kv;
        let lhs: [c64; 3] = std::array::from_fn(|i| trace[i] - ik * ut[i]);
        worst = worst.max(dist(&lhs, &(case.g)(x, &n, kv)));
        worst = worst.max(dist(&curl(x), &c));
    }
    Ok(worst)
}

/// Seeded interior samples and boundary samples spread over all six sides.
pub fn probe_samples(interior: usize, boundary: usize, seed: u64) -> (Vec<Point>, Vec<Point>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner = (0..interior)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0)))
        .collect();
    let bnd = (0..boundary)
        .map(|i| {
            let mut x: Point = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            let side = i % 6;
            x[side / 2] = (side % 2) as f64;
            x
        })
        .collect();
    (inner, bnd)
}

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckLine {
    fn new(name: String, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
pub const LINEAR_SOLVE_TOLERANCE: f64 = 1e-8;

/// Wavenumbers exercised by the verification suite.
pub fn verification_wavenumbers() -> [Wavenumber; 2] {
    [
        Wavenumber::real(1.0).expect("valid"),
        Wavenumber::new(c64::new(5.0, 2.0)).expect("valid"),
    ]
}

/// Relative curl-k error of the discrete solution of the linear manufactured case.
pub fn linear_solve_error(
    family: Family,
    p: usize,
    n: usize,
    k: Wavenumber,
) -> Result<f64, SolveError> {
    let case = builtin_manufactured("manufactured_linear").expect("builtin");
    let mesh = Arc::new(build_structured_cube_mesh(n, None).expect("valid subdivision"));
    let basis = Arc::new(nedelec_basis(family, p)?);
    let space = Arc::new(FeSpace::new(mesh, basis));
    let pd = case.problem(k);
    let (coeffs, _) = solve_problem(&space, &pd, &AssemblyOptions::default())?;
    let uh = FeFunction::new(space, coeffs).expect("length matches");
    Ok(error_report(&uh, &case.solution, k)
        .expect("same mesh")
        .rel_curlk)
}

/// `(h, relative curl-k error)` of a manufactured case on `n × n × n` cube meshes.
pub fn manufactured_errors(
    case: &ManufacturedCase,
    family: Family,
    p: usize,
    k: Wavenumber,
    subdivisions: &[usize],
) -> Result<Vec<(f64, f64)>, SolveError> {
    let basis = Arc::new(nedelec_basis(family, p)?);
    let pd = case.problem(k);
    let mut out = Vec::with_capacity(subdivisions.len());
    for &n in subdivisions {
        let mesh = Arc::new(build_structured_cube_mesh(n, None).expect("valid subdivision"));
        let h = mesh.max_diameter();
        let space = Arc::new(FeSpace::new(mesh, basis.clone()));
        let (coeffs, _) = solve_problem(&space, &pd, &AssemblyOptions::default())?;
        let uh = FeFunction::new(space, coeffs).expect("length matches");
        out.push((
            h,
            error_report(&uh, &case.solution, k)
                .expect("same mesh")
                .rel_curlk,
        ));
    }
    Ok(out)
}

/// Residual probes for every manufactured case plus exact-recovery solves.
pub fn run_verification() -> Vec<CheckLine> {
    let (inner, bnd) = probe_samples(200, 100, 2024);
    let mut lines = Vec::new();
    for k in verification_wavenumbers() {
        for name in MANUFACTURED_CASES {
            let case = builtin_manufactured(name).expect("builtin");
            let r = residual_probe(&case, k, &inner, &bnd).unwrap_or(f64::INFINITY);
            lines.push(CheckLine::new(
                format!("residual {name} k={}", fmt_k(k)),
                r,
                RESIDUAL_TOLERANCE,
            ));
        }
    }
    for k in verification_wavenumbers() {
        for p in [1, 2] {
            for family in [Family::NedelecI, Family::NedelecII] {
                let e = linear_solve_error(family, p, 2, k).unwrap_or(f64::INFINITY);
                lines.push(CheckLine::new(
                    format!("solve manufactured_linear {family} p={p} k={}", fmt_k(k)),
                    e,
                    LINEAR_SOLVE_TOLERANCE,
                ));
            }
        }
    }
    lines
}

fn fmt_k(k: Wavenumber) -> String {
    let v = k.value();
    if v.im == 0.0 {
        format!("{}", v.re)
    } else {
        format!("{}{:+}i", v.re, v.im)
    }
}
