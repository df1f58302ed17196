//! Norms, errors, interpolation and the quasi-optimality diagnostics.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as c64;
use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{
    assemble_hxik_gram, face_geometry, AssemblyError, AssemblyOptions, FormTerms,
};
use crate::coefficients::VectorFn;
use crate::coefficients::{ProblemData, Wavenumber};
use crate::fem::basis::REFERENCE_VERTICES;
use crate::fem::quadrature::MAX_QUADRATURE_DEGREE;
use crate::fem::{quadrature_simplex, BasisTable, FeSpace, Orientation};
use crate::linalg::{factorize_with, CsrMatrix, Method, SolverError};
use crate::mesh::{Mesh, Point, LOCAL_FACES};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("fields live on different meshes")]
    MeshMismatch,
    #[error("coefficient vector has {found} entries, space has {expected} DOFs")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

const ZERO: c64 = c64::new(0.0, 0.0);

/// Relative accuracy to which interpolation reproduces discrete functions.
pub const INTERPOLATION_ROUNDOFF: f64 = 1e-10;

/// Physical values and curls of a field on one element at fixed reference points.
pub trait ElementEval: Sync {
    fn eval(&self, t: usize) -> (Vec<[c64; 3]>, Vec<[c64; 3]>);
}

/// A vector field that can be sampled element by element.
pub trait Field: Sync {
    /// Polynomial degree used to choose quadrature.
    fn degree(&self) -> usize;
    /// The mesh the field is tied to, if any.
    fn mesh(&self) -> Option<&Mesh> {
        None
    }
    fn evaluator<'a>(&'a self, mesh: &'a Mesh, points: &'a [Point]) -> Box<dyn ElementEval + 'a>;
}

/// Discrete function: a space plus one coefficient per DOF.
#[derive(Debug, Clone)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<c64>,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<c64>) -> Result<Self, AnalysisError> {
        if coeffs.len() != space.ndofs() {
            return Err(AnalysisError::LengthMismatch {
                expected: space.ndofs(),
                found: coeffs.len(),
            });
        }
        Ok(Self { space, coeffs })
    }

    pub fn zero(space: Arc<FeSpace>) -> Self {
        let n = space.ndofs();
        Self {
            space,
            coeffs: vec![ZERO; n],
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[c64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<c64> {
        self.coeffs
    }

    pub fn scaled(&self, s: c64) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

struct FeEval<'a> {
    space: &'a FeSpace,
    coeffs: &'a [c64],
    points: &'a [Point],
    tables: Vec<OnceLock<BasisTable>>,
    gradient: bool,
}

impl FeEval<'_> {
    fn table(&self, o: Orientation) -> &BasisTable {
        self.tables[o.index()].get_or_init(|| self.space.basis().tabulate(o, self.points))
    }
}

impl ElementEval for FeEval<'_> {
    fn eval(&self, t: usize) -> (Vec<[c64; 3]>, Vec<[c64; 3]>) {
        let table = self.table(self.space.dofmap().orientation(t));
        let (v, d) = self.space.eval_element_table(t, table, self.coeffs);
        if self.gradient {
            (d, vec![[ZERO; 3]; self.points.len()])
        } else {
            (v, d)
        }
    }
}

fn fe_evaluator<'a>(
    space: &'a FeSpace,
    coeffs: &'a [c64],
    points: &'a [Point],
    gradient: bool,
) -> Box<dyn ElementEval + 'a> {
    Box::new(FeEval {
        space,
        coeffs,
        points,
        tables: (0..24).map(|_| OnceLock::new()).collect(),
        gradient,
    })
}

impl Field for FeFunction {
    fn degree(&self) -> usize {
        self.space.basis().polynomial_degree()
    }

    fn mesh(&self) -> Option<&Mesh> {
        Some(self.space.mesh())
    }

    fn evaluator<'a>(&'a self, _mesh: &'a Mesh, points: &'a [Point]) -> Box<dyn ElementEval + 'a> {
        fe_evaluator(&self.space, &self.coeffs, points, false)
    }
}

/// Gradient of a scalar discrete function, as a curl-free vector field.
pub struct GradientOf<'a>(pub &'a FeFunction);

impl Field for GradientOf<'_> {
    fn degree(&self) -> usize {
        self.0.degree().saturating_sub(1)
    }

    fn mesh(&self) -> Option<&Mesh> {
        self.0.mesh()
    }

    fn evaluator<'a>(&'a self, _mesh: &'a Mesh, points: &'a [Point]) -> Box<dyn ElementEval + 'a> {
        fe_evaluator(&self.0.space, &self.0.coeffs, points, true)
    }
}

/// Closed-form field with its curl.
#[derive(Clone)]
pub struct ExactField {
    pub value: VectorFn,
    pub curl: VectorFn,
    /// Quadrature hint; smooth non-polynomial fields should use a generous value.
    pub degree: usize,
}

impl std::fmt::Debug for ExactField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactField")
            .field("degree", &self.degree)
            .finish_non_exhaustive()
    }
}

struct ExactEval<'a> {
    field: &'a ExactField,
    mesh: &'a Mesh,
    points: &'a [Point],
}

impl ElementEval for ExactEval<'_> {
    fn eval(&self, t: usize) -> (Vec<[c64; 3]>, Vec<[c64; 3]>) {
        let em = self.mesh.map(t);
        self.points
            .iter()
            .map(|p| {
                let x = em.apply(p);
                ((self.field.value)(&x), (self.field.curl)(&x))
            })
            .unzip()
    }
}

impl Field for ExactField {
    fn degree(&self) -> usize {
        self.degree
    }

    fn evaluator<'a>(&'a self, mesh: &'a Mesh, points: &'a [Point]) -> Box<dyn ElementEval + 'a> {
        Box::new(ExactEval {
            field: self,
            mesh,
            points,
        })
    }
}

/// `a − b`.
pub struct Difference<'a>(pub &'a dyn Field, pub &'a dyn Field);

struct DiffEval<'a>(Box<dyn ElementEval + 'a>, Box<dyn ElementEval + 'a>);

impl ElementEval for DiffEval<'_> {
    fn eval(&self, t: usize) -> (Vec<[c64; 3]>, Vec<[c64; 3]>) {
        let (mut va, mut ca) = self.0.eval(t);
        let (vb, cb) = self.1.eval(t);
        for (x, y) in va.iter_mut().zip(vb).chain(ca.iter_mut().zip(cb)) {
            for c in 0..3 {
                x[c] -= y[c];
            }
        }
        (va, ca)
    }
}

impl Field for Difference<'_> {
    fn degree(&self) -> usize {
        self.0.degree().max(self.1.degree())
    }

    fn mesh(&self) -> Option<&Mesh> {
        self.0.mesh().or(self.1.mesh())
    }

    fn evaluator<'a>(&'a self, mesh: &'a Mesh, points: &'a [Point]) -> Box<dyn ElementEval + 'a> {
        Box::new(DiffEval(
            self.0.evaluator(mesh, points),
            self.1.evaluator(mesh, points),
        ))
    }
}

fn same_mesh(a: &Mesh, b: &Mesh) -> bool {
    std::ptr::eq(a, b) || a == b
}

fn check_mesh(field: &dyn Field, mesh: &Mesh) -> Result<(), AnalysisError> {
    match field.mesh() {
        Some(m) if !same_mesh(m, mesh) => Err(AnalysisError::MeshMismatch),
        _ => Ok(()),
    }
}

fn norm_degree(field: &dyn Field) -> usize {
    (2 * field.degree() + 4).min(MAX_QUADRATURE_DEGREE)
}

fn sq(v: &[c64; 3]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Per element `(∫|curl u|², ∫|u|²)`, reduced in element order.
fn volume_squares(mesh: &Mesh, field: &dyn Field, degree: usize) -> Vec<(f64, f64)> {
    let rule = quadrature_simplex(3, degree).expect("degree capped");
    let eval = field.evaluator(mesh, &rule.points);
    (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let adet = mesh.map(t).det.abs();
            let (v, c) = eval.eval(t);
            let mut s = (0.0, 0.0);
            for (q, w) in rule.weights.iter().enumerate() {
                s.0 += w * adet * sq(&c[q]);
                s.1 += w * adet * sq(&v[q]);
            }
            s
        })
        .collect()
}

pub(crate) fn face_rule(lf: usize, degree: usize) -> (Vec<Point>, Vec<f64>) {
    let rule = quadrature_simplex(2, degree).expect("degree capped");
    let [a, b, c] = LOCAL_FACES[lf];
    let (va, vb, vc) = (
        REFERENCE_VERTICES[a],
        REFERENCE_VERTICES[b],
        REFERENCE_VERTICES[c],
    );
    let pts = rule
        .points
        .iter()
        .map(|p| std::array::from_fn(|i| va[i] + p[0] * (vb[i] - va[i]) + p[1] * (vc[i] - va[i])))
        .collect();
    (pts, rule.weights)
}

/// `∫_Γ |u_T|²`.
fn boundary_square(mesh: &Mesh, field: &dyn Field, degree: usize) -> f64 {
    let rules: Vec<(Vec<Point>, Vec<f64>)> = (0..4).map(|lf| face_rule(lf, degree)).collect();
    let evals: Vec<Box<dyn ElementEval + '_>> = rules
        .iter()
        .map(|(p, _)| field.evaluator(mesh, p))
        .collect();
    let mut total = 0.0;
    for bf in mesh.boundary_faces() {
        let (n, area) = face_geometry(mesh, bf.tet, bf.local);
        let (v, _) = evals[bf.local].eval(bf.tet);
        for (q, w) in rules[bf.local].1.iter().enumerate() {
            let un: c64 = (0..3).map(|c| v[q][c] * n[c]).sum();
            let ut: [c64; 3] = std::array::from_fn(|c| v[q][c] - un * n[c]);
            total += w * area * sq(&ut);
        }
    }
    total
}

/// `‖u‖_{curl,k} = (‖curl u‖² + |k|²‖u‖²)^{1/2}` on `mesh`.
pub fn norm_curlk(field: &dyn Field, mesh: &Mesh, k: Wavenumber) -> f64 {
    let (c, m) = volume_squares(mesh, field, norm_degree(field))
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (c + k.abs().powi(2) * m).sqrt()
}

/// `‖u‖_{L²}` on `mesh`.
pub fn norm_l2(field: &dyn Field, mesh: &Mesh) -> f64 {
    volume_squares(mesh, field, norm_degree(field))
        .into_iter()
        .map(|s| s.1)
        .sum::<f64>()
        .sqrt()
}

/// `‖u‖_{imp,k} =(‖curl u‖² + |k|²‖u‖² + |k|‖u_T‖²_Γ)^{1/2}` on `mesh`.
pub fn norm_hxik(field: &dyn Field, mesh: &Mesh, k: Wavenumber) -> f64 {
    let deg = norm_degree(field);
    let (c, m) = volume_squares(mesh, field, deg)
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let b = boundary_square(mesh, field, deg);
    let a = k.abs();
    (c + a * a * m + a * b).sqrt()
}

/// DOF interpolant of an element-wise field; shared entities take the value
/// from the first element visited.
pub fn interpolate(space: &FeSpace, field: &dyn Field) -> Vec<c64> {
    let mesh = space.mesh().as_ref();
    let basis = space.basis();
    let dm = space.dofmap();
    let vector = basis.family().is_vector();
    let present = space.orientations_present();
    let points: Vec<Option<Vec<Point>>> = present
        .iter()
        .enumerate()
        .map(|(i, used)| {
            used.then(|| {
                basis
                    .variant(Orientation::from_index(i))
                    .functionals
                    .iter()
                    .flat_map(|f| f.points.iter().copied())
                    .collect()
            })
        })
        .collect();
    let evals: Vec<Option<Box<dyn ElementEval + '_>>> = points
        .iter()
        .map(|p| p.as_ref().map(|p| field.evaluator(mesh, p)))
        .collect();
    let locals: Vec<Vec<c64>> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let o = dm.orientation(t);
            let (v, _) = evals[o.index()].as_ref().expect("present").eval(t);
            let em = mesh.map(t);
            let mut it = v.into_iter();
            basis.apply_functionals(o, |_| {
                let u = it.next().expect("one value per functional point");
                if vector {
                    // covariant pullback û = Fᵀ u
                    std::array::from_fn(|j| (0..3).map(|i| u[i] * em.f(i, j)).sum())
                } else {
                    u
                }
            })
        })
        .collect();
    let mut out = vec![ZERO; space.ndofs()];
    let mut set = vec![false; space.ndofs()];
    for (t, local) in locals.into_iter().enumerate() {
        for (&d, v) in dm.element_dofs(t).iter().zip(local) {
            if !set[d] {
                out[d] = v;
                set[d] = true;
            }
        }
    }
    out
}

/// Interpolant of a closure evaluated at physical points (vector value; scalar
/// spaces read the first component).
pub fn interpolate_fn<F>(space: &FeSpace, f: F) -> Vec<c64>
where
    F: Fn(&Point) -> [c64; 3] + Send + Sync + 'static,
{
    let field = ExactField {
        value: Arc::new(f),
        curl: Arc::new(|_| [ZERO; 3]),
        degree: 0,
    };
    interpolate(space, &field)
}

/// `r_i = form(u, φ_i)` for a field `u` and the basis of `space`.
pub fn pairing_vector(
    space: &FeSpace,
    field: &dyn Field,
    terms: &FormTerms<'_>,
    opts: &AssemblyOptions,
) -> Vec<c64> {
    let mesh = space.mesh().as_ref();
    let dm = space.dofmap();
    let pdeg = space.basis().polynomial_degree();
    let coef = [
        terms.curl.map(|c| c.0.max_degree()),
        terms.mass.map(|c| c.0.max_degree()),
    ]
    .into_iter()
    .flatten()
    .max()
    .unwrap_or(0);
    let degree = (pdeg + field.degree() + coef + 2 + opts.quad_bump).min(MAX_QUADRATURE_DEGREE);
    let mut out = vec![ZERO; space.ndofs()];
    if terms.curl.is_some() || terms.mass.is_some() {
        let rule = quadrature_simplex(3, degree).expect("degree capped");
        let fe = field.evaluator(mesh, &rule.points);
        let basis_tables = space.tables(&rule.points);
        let locals: Vec<Vec<c64>> = (0..mesh.num_tets())
            .into_par_iter()
            .map(|t| {
                let em = mesh.map(t);
                let tag = mesh.tags()[t];
                let adet = em.det.abs();
                let table = basis_tables.get(dm.orientation(t));
                let (v, c) = fe.eval(t);
                let vals = crate::assembly::physical_rows(table, &em, false);
                let curls = crate::assembly::physical_rows(table, &em, true);
                let mut local = vec![ZERO; vals.ncols()];
                for (q, w) in rule.weights.iter().enumerate() {
                    let x = em.apply(&rule.points[q]);
                    let mut add = |rows: &nalgebra::DMatrix<f64>, u: [c64; 3]| {
                        for (j, l) in local.iter_mut().enumerate() {
                            let s: c64 = (0..3).map(|i| u[i] * rows[(3 * q + i, j)]).sum();
                            *l += s * (w * adet);
                        }
                    };
                    if let Some((a, s)) = terms.curl {
                        add(&curls, apply(&a.eval(tag, &x), &c[q], s));
                    }
                    if let Some((b, s)) = terms.mass {
                        add(&vals, apply(&b.eval(tag, &x), &v[q], s));
                    }
                }
                local
            })
            .collect();
        for (t, local) in locals.into_iter().enumerate() {
            for (&d, v) in dm.element_dofs(t).iter().zip(local) {
                out[d] += v;
            }
        }
    }
    if let Some((zeta, s)) = terms.boundary {
        let rules: Vec<(Vec<Point>, Vec<f64>)> = (0..4).map(|lf| face_rule(lf, degree)).collect();
        let evals: Vec<_> = rules
            .iter()
            .map(|(p, _)| field.evaluator(mesh, p))
            .collect();
        let tables: Vec<_> = rules.iter().map(|(p, _)| space.tables(p)).collect();
        for bf in mesh.boundary_faces() {
            let em = mesh.map(bf.tet);
            let (n, area) = face_geometry(mesh, bf.tet, bf.local);
            let (v, _) = evals[bf.local].eval(bf.tet);
            let table = tables[bf.local].get(dm.orientation(bf.tet));
            let rows = crate::assembly::physical_rows(table, &em, false);
            for (q, w) in rules[bf.local].1.iter().enumerate() {
                let x = em.apply(&rules[bf.local].0[q]);
                let zu = zeta.apply(bf.tag, &x, &n, &v[q]);
                for (j, &d) in dm.element_dofs(bf.tet).iter().enumerate() {
                    let p: c64 = (0..3).map(|i| zu[i] * rows[(3 * q + i, j)]).sum();
                    out[d] += s * p * (w * area);
                }
            }
        }
    }
    out
}

fn apply(t: &crate::coefficients::Tensor, v: &[c64; 3], s: c64) -> [c64; 3] {
    std::array::from_fn(|i| s * (0..3).map(|j| t[i][j] * v[j]).sum::<c64>())
}

/// Absolute and relative errors against a reference field.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub abs_curlk: f64,
    pub rel_curlk: f64,
    pub abs_hxik: f64,
    pub rel_hxik: f64,
    /// `(tag, absolute curl-k error, curl-k norm of the reference)` per subdomain.
    pub per_subdomain: Vec<(u32, f64, f64)>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Errors of `u_h` against `u_ref`, integrated with the rule of the higher-order field.
pub fn error_report(
    u_h: &FeFunction,
    u_ref: &dyn Field,
    k: Wavenumber,
) -> Result<ErrorReport, AnalysisError> {
    let mesh = u_h.space.mesh().as_ref();
    check_mesh(u_ref, mesh)?;
    let diff = Difference(u_ref, u_h);
    let deg = norm_degree(&diff);
    let a2 = k.abs().powi(2);
    let err = volume_squares(mesh, &diff, deg);
    let refs = volume_squares(mesh, u_ref, deg);
    let mut tags = mesh.subdomain_tags();
    tags.sort_unstable();
    let mut per = Vec::new();
    for tag in tags {
        let (mut e, mut r) = (0.0, 0.0);
        for (t, (ev, rv)) in err.iter().zip(&refs).enumerate() {
            if mesh.tags()[t] == tag {
                e += ev.0 + a2 * ev.1;
                r += rv.0 + a2 * rv.1;
            }
        }
        per.push((tag, e.sqrt(), r.sqrt()));
    }
    let sum = |v: &[(f64, f64)]| v.iter().fold(0.0, |acc, x| acc + x.0 + a2 * x.1);
    let (e_vol, r_vol) = (sum(&err), sum(&refs));
    let a = k.abs();
    let e_b = boundary_square(mesh, &diff, deg);
    let r_b = boundary_square(mesh, u_ref, deg);
    let abs_curlk = e_vol.sqrt();
    let abs_hxik = (e_vol + a * e_b).sqrt();
    Ok(ErrorReport {
        abs_curlk,
        rel_curlk: ratio(abs_curlk, r_vol.sqrt()),
        abs_hxik,
        rel_hxik: ratio(abs_hxik, (r_vol + a * r_b).sqrt()),
        per_subdomain: per,
    })
}

/// `b_k(e, φ_i)` for every basis function of `space`.
fn bk_vector(space: &FeSpace, e: &dyn Field, pd: &ProblemData, opts: &AssemblyOptions) -> Vec<c64> {
    let k = pd.k.value();
    let terms = FormTerms {
        curl: None,
        mass: Some((&pd.eps, k * k)),
        boundary: Some((&pd.zeta, c64::new(0.0, 1.0) * k)),
    };
    pairing_vector(space, e, &terms, opts)
}

/// `2 sup_w |b_k(e, w)| / (‖e‖ ‖w‖)` over the discrete space, in the
/// impedance norm. Zero for `e = 0`.
pub fn delta_k_diagnostic(
    e: &dyn Field,
    space: &FeSpace,
    pd: &ProblemData,
    opts: &AssemblyOptions,
) -> Result<f64, AnalysisError> {
    let mesh = space.mesh().as_ref();
    check_mesh(e, mesh)?;
    let en = norm_hxik(e, mesh, pd.k);
    if en == 0.0 {
        return Ok(0.0);
    }
    let g = bk_vector(space, e, pd, opts);
    let gram = assemble_hxik_gram(space, pd.k, opts)?;
    let sup = dual_norm_ordered(&gram, &g, Some(&space.dof_points()))?;
    Ok(2.0 * sup / en)
}

/// `sqrt(gᴴ M⁻¹ g)` for Hermitian positive definite `M`.
pub fn dual_norm(gram: &CsrMatrix, g: &[c64]) -> Result<f64, AnalysisError> {
    dual_norm_ordered(gram, g, None)
}

fn dual_norm_ordered(
    gram: &CsrMatrix,
    g: &[c64],
    points: Option<&[[f64; 3]]>,
) -> Result<f64, AnalysisError> {
    let x = factorize_with(gram, Method::Auto, points)?.solve(g)?;
    let q: c64 = g.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
    Ok(q.re.max(0.0).sqrt())
}

/// `‖u_ref − u_N‖ / ‖u_ref − Π u_ref‖` in the impedance norm, with `Π` the
/// DOF interpolant onto the space of `u_N`. `None` when the denominator is
/// below `1e-14`, or below roundoff level relative to `‖u_ref‖`.
pub fn quasiopt_ratio(
    u_ref: &dyn Field,
    u_n: &FeFunction,
    k: Wavenumber,
) -> Result<Option<f64>, AnalysisError> {
    let mesh = u_n.space.mesh().as_ref();
    check_mesh(u_ref, mesh)?;
    let pi = FeFunction::new(u_n.space.clone(), interpolate(&u_n.space, u_ref))?;
    let num = norm_hxik(&Difference(u_ref, u_n), mesh, k);
    let den = norm_hxik(&Difference(u_ref, &pi), mesh, k);
    let scale = norm_hxik(u_ref, mesh, k);
    Ok((den >= 1e-14 && den >= INTERPOLATION_ROUNDOFF * scale).then(|| num / den))
}

/// `max_i |A_k(u_ref − u_N, φ_i)|` scaled by `‖A‖_∞ ‖u_N‖_∞`, with `A_k` taken
/// from the problem data and `A` the assembled matrix on the coarse space.
pub fn galerkin_orthogonality_check(
    u_ref: &dyn Field,
    u_n: &FeFunction,
    matrix: &CsrMatrix,
    pd: &ProblemData,
    opts: &AssemblyOptions,
) -> Result<f64, AnalysisError> {
    let space = u_n.space.as_ref();
    check_mesh(u_ref, space.mesh())?;
    let k = pd.k.value();
    let terms = FormTerms {
        curl: Some((&pd.mu_inv, c64::new(1.0, 0.0))),
        mass: Some((&pd.eps, -k * k)),
        boundary: Some((&pd.zeta, -c64::new(0.0, 1.0) * k)),
    };
    let a_ref = pairing_vector(space, u_ref, &terms, opts);
    let a_n = matrix.mul_vec(&u_n.coeffs);
    let num = a_ref
        .iter()
        .zip(&a_n)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    if num == 0.0 {
        return Ok(0.0);
    }
    let un = u_n.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = matrix.norm_inf() * un;
    Ok(if scale > 0.0 {
        num / scale
    } else {
        f64::INFINITY
    })
}
