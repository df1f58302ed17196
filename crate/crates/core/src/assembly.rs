//! Global sparse systems for the impedance Maxwell problem and the auxiliary
//! sesquilinear forms used by the diagnostics.
//!
//! Element kernels run in parallel in fixed-size chunks; their dense outputs
//! are scattered into the global matrix serially in element order, so the
//! result does not depend on the thread count.

use std::collections::HashMap;
use std::io;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use thiserror::Error;

use crate::coefficients::{
    identity, CoefficientField, ImpedanceField, ProblemData, ProblemError, Tensor, Wavenumber,
};
use crate::fem::basis::REFERENCE_VERTICES;
use crate::fem::quadrature::MAX_QUADRATURE_DEGREE;
use crate::fem::{quadrature_simplex, BasisTable, FeSpace, FemError, Orientation};
use crate::linalg::{factorize_with, CsrMatrix, Method, SolverError};
use crate::mesh::{ElementMap, Mesh, Point, LOCAL_FACES};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{what} is not finite on element {element}")]
    NonFinite { what: &'static str, element: usize },
    #[error("{0} elements cannot be used for the curl-curl problem")]
    ScalarSpace(crate::fem::Family),
}

/// Square system `matrix · x = rhs`.
#[derive(Debug, Clone)]
pub struct ComplexSparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<c64>,
}

impl ComplexSparseSystem {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Writes the matrix as `row col re im` lines.
    pub fn dump_matrix(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.matrix.to_coordinate_text())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Added to every quadrature degree.
    pub quad_bump: usize,
}

/// A form `c_curl (A curl u, curl v) + c_mass (B u, v) + c_bnd (Z u_T, v_T)_Γ`.
#[derive(Clone, Copy)]
pub struct FormTerms<'a> {
    pub curl: Option<(&'a CoefficientField, c64)>,
    pub mass: Option<(&'a CoefficientField, c64)>,
    pub boundary: Option<(&'a ImpedanceField, c64)>,
}

const CHUNK: usize = 256;
const ZERO: c64 = c64::new(0.0, 0.0);

fn volume_degree(space: &FeSpace, coef_degree: usize, opts: &AssemblyOptions) -> usize {
    (2 * space.basis().polynomial_degree() + 2 + coef_degree + opts.quad_bump)
        .min(MAX_QUADRATURE_DEGREE)
}

/// Sparsity pattern of all element couplings, with sorted rows.
fn pattern(space: &FeSpace) -> CsrMatrix {
    let n = space.ndofs();
    let dm = space.dofmap();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in 0..dm.num_elements() {
        let dofs = dm.element_dofs(t);
        for &r in dofs {
            rows[r].extend_from_slice(dofs);
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for row in &mut rows {
        row.sort_unstable();
        row.dedup();
        col_idx.extend_from_slice(row);
        row_ptr.push(col_idx.len());
        *row = Vec::new();
    }
    let nnz = col_idx.len();
    CsrMatrix::from_parts(n, n, row_ptr, col_idx, vec![ZERO; nnz])
}

/// Dense complex element matrix stored as separate real and imaginary parts.
struct Local {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl Local {
    fn zeros(d: usize) -> Self {
        Self {
            re: DMatrix::zeros(d, d),
            im: DMatrix::zeros(d, d),
        }
    }

    /// `self += c * (re + i im)`.
    fn add_scaled(&mut self, c: c64, re: &DMatrix<f64>, im: Option<&DMatrix<f64>>) {
        self.re.zip_apply(re, |a, b| *a += c.re * b);
        self.im.zip_apply(re, |a, b| *a += c.im * b);
        if let Some(im) = im {
            self.re.zip_apply(im, |a, b| *a -= c.im * b);
            self.im.zip_apply(im, |a, b| *a += c.re * b);
        }
    }

    fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }
}

fn scatter(matrix: &mut CsrMatrix, dofs: &[usize], local: &Local) {
    for (i, &r) in dofs.iter().enumerate() {
        for (j, &c) in dofs.iter().enumerate() {
            let pos = matrix.position(r, c).expect("entry in element pattern");
            matrix.values_mut()[pos] += c64::new(local.re[(i, j)], local.im[(i, j)]);
        }
    }
}

/// `Σ_ab T_ab R_ab` over the nine reference moment matrices.
fn contract(tensor: &Tensor, moments: &[DMatrix<f64>; 9], scale: c64, out: &mut Local) {
    for a in 0..3 {
        for b in 0..3 {
            let c = scale * tensor[a][b];
            if c != ZERO {
                out.add_scaled(c, &moments[3 * a + b], None);
            }
        }
    }
}

/// `Mᵀ T M` with `M` real.
fn congruence(m: &[[f64; 3]; 3], t: &Tensor) -> Tensor {
    let mut out = [[ZERO; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let mut s = ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    s += t[i][j] * (m[i][a] * m[j][b]);
                }
            }
            out[a][b] = s;
        }
    }
    out
}

/// Reference moments `∫ φ̂_i,a φ̂_j,b` (values) and the same for curls.
struct Moments {
    values: [DMatrix<f64>; 9],
    curls: [DMatrix<f64>; 9],
}

fn moments(table: &BasisTable, weights: &[f64]) -> Moments {
    let d = table.values.ncols();
    let comp = |src: &DMatrix<f64>, c: usize| {
        let mut m = DMatrix::<f64>::zeros(weights.len(), d);
        for (q, _) in weights.iter().enumerate() {
            for j in 0..d {
                m[(q, j)] = src[(q * 3 + c, j)];
            }
        }
        m
    };
    let build = |src: &DMatrix<f64>| {
        let cols: Vec<DMatrix<f64>> = (0..3).map(|c| comp(src, c)).collect();
        let weighted: Vec<DMatrix<f64>> = cols
            .iter()
            .map(|m| {
                let mut w = m.clone();
                for (q, wq) in weights.iter().enumerate() {
                    w.row_mut(q).scale_mut(*wq);
                }
                w
            })
            .collect();
        std::array::from_fn(|ab| cols[ab / 3].transpose() * &weighted[ab % 3])
    };
    Moments {
        values: build(&table.values),
        curls: build(&table.derivs),
    }
}

/// Physical rows of a table at one element: `G v̂` for values, `F ĉ / det` for curls.
pub(crate) fn physical_rows(table: &BasisTable, em: &ElementMap, curls: bool) -> DMatrix<f64> {
    let src = if curls { &table.derivs } else { &table.values };
    let m = if curls {
        let f = em.forward();
        f.map(|row| row.map(|v| v / em.det))
    } else {
        em.inverse_transpose()
    };
    let d = src.ncols();
    let mut out = DMatrix::<f64>::zeros(src.nrows(), d);
    for q in 0..table.npts {
        for j in 0..d {
            let v = [src[(3 * q, j)], src[(3 * q + 1, j)], src[(3 * q + 2, j)]];
            for r in 0..3 {
                out[(3 * q + r, j)] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
            }
        }
    }
    out
}

/// `Φᵀ (w_q T(x_q) Φ)` split into real and imaginary parts.
fn weighted_gram<T>(
    phi: &DMatrix<f64>,
    weights: &[f64],
    mut tensor: T,
) -> (DMatrix<f64>, Option<DMatrix<f64>>)
where
    T: FnMut(usize) -> Tensor,
{
    let (rows, d) = phi.shape();
    let mut re = DMatrix::<f64>::zeros(rows, d);
    let mut im = DMatrix::<f64>::zeros(rows, d);
    let mut has_im = false;
    for (q, w) in weights.iter().enumerate() {
        let t = tensor(q);
        for r in 0..3 {
            for c in 0..3 {
                let v = t[r][c] * *w;
                if v.re != 0.0 {
                    for j in 0..d {
                        re[(3 * q + r, j)] += v.re * phi[(3 * q + c, j)];
                    }
                }
                if v.im != 0.0 {
                    has_im = true;
                    for j in 0..d {
                        im[(3 * q + r, j)] += v.im * phi[(3 * q + c, j)];
                    }
                }
            }
        }
    }
    let phit = phi.transpose();
    let re = &phit * re;
    let im = has_im.then(|| &phit * im);
    (re, im)
}

/// Reference points and weights of a quadrature rule on local face `lf`.
fn face_points(lf: usize, degree: usize) -> Result<(Vec<Point>, Vec<f64>), FemError> {
    let rule = quadrature_simplex(2, degree)?;
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
    Ok((pts, rule.weights))
}

/// Outward unit normal and area-scaling `|(x_b − x_a) × (x_c − x_a)|` of a local face.
pub(crate) fn face_geometry(mesh: &Mesh, t: usize, lf: usize) -> ([f64; 3], f64) {
    let x = mesh.tet_points(t);
    let [a, b, c] = LOCAL_FACES[lf];
    let u: [f64; 3] = std::array::from_fn(|i| x[b][i] - x[a][i]);
    let v: [f64; 3] = std::array::from_fn(|i| x[c][i] - x[a][i]);
    let mut n = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let out: f64 = (0..3).map(|i| n[i] * (x[lf][i] - x[a][i])).sum();
    let s = if out > 0.0 { -1.0 } else { 1.0 } / len;
    for v in &mut n {
        *v *= s;
    }
    (n, len)
}

/// Boundary face tables keyed by `(orientation, local face)`.
pub(crate) struct FaceTables {
    pub points: HashMap<usize, Vec<Point>>,
    pub weights: Vec<f64>,
    tables: HashMap<(usize, usize), BasisTable>,
}

impl FaceTables {
    pub(crate) fn new(space: &FeSpace, degree: usize) -> Result<Self, FemError> {
        let mut points = HashMap::new();
        let mut tables = HashMap::new();
        let mut weights = Vec::new();
        for bf in space.mesh().boundary_faces() {
            let o = space.dofmap().orientation(bf.tet);
            if !points.contains_key(&bf.local) {
                let (p, w) = face_points(bf.local, degree)?;
                weights = w;
                points.insert(bf.local, p);
            }
            tables
                .entry((o.index(), bf.local))
                .or_insert_with(|| space.basis().tabulate(o, &points[&bf.local]));
        }
        Ok(Self {
            points,
            weights,
            tables,
        })
    }

    pub(crate) fn get(&self, o: Orientation, lf: usize) -> &BasisTable {
        &self.tables[&(o.index(), lf)]
    }
}

/// Assembles the matrix of a form. Rows index test functions.
pub fn assemble_form(
    space: &FeSpace,
    terms: &FormTerms<'_>,
    opts: &AssemblyOptions,
) -> Result<CsrMatrix, AssemblyError> {
    let family = space.basis().family();
    if !family.is_vector() {
        return Err(AssemblyError::ScalarSpace(family));
    }
    let mesh = space.mesh().as_ref();
    let dm = space.dofmap();
    let dim = space.basis().dim();
    let mut matrix = pattern(space);

    let coef_degree = [terms.curl.map(|c| c.0), terms.mass.map(|c| c.0)]
        .into_iter()
        .flatten()
        .map(|c| c.max_degree())
        .max()
        .unwrap_or(0);
    if terms.curl.is_some() || terms.mass.is_some() {
        let rule = quadrature_simplex(3, volume_degree(space, coef_degree, opts))?;
        let tables = space.tables(&rule.points);
        let present = space.orientations_present();
        let refs: Vec<Option<Moments>> = present
            .iter()
            .enumerate()
            .map(|(i, used)| {
                used.then(|| moments(tables.get(Orientation::from_index(i)), &rule.weights))
            })
            .collect();

        let kernel = |t: usize| -> Result<Local, AssemblyError> {
            let em = mesh.map(t);
            let tag = mesh.tags()[t];
            let o = dm.orientation(t);
            let table = tables.get(o);
            let mom = refs[o.index()]
                .as_ref()
                .expect("moments for present orientation");
            let mut local = Local::zeros(dim);
            let adet = em.det.abs();
            let phys: Vec<Point> = rule.points.iter().map(|p| em.apply(p)).collect();
            if let Some((field, scale)) = terms.curl {
                if let Some(t_const) = field.constant_on(tag) {
                    let f = em.forward();
                    let mut k = congruence(&f, &t_const);
                    let s = 1.0 / adet;
                    k.iter_mut().flatten().for_each(|v| *v *= s);
                    contract(&k, &mom.curls, scale, &mut local);
                } else {
                    let phi = physical_rows(table, &em, true);
                    let w: Vec<f64> = rule.weights.iter().map(|w| w * adet).collect();
                    let (re, im) = weighted_gram(&phi, &w, |q| field.eval(tag, &phys[q]));
                    local.add_scaled(scale, &re, im.as_ref());
                }
            }
            if let Some((field, scale)) = terms.mass {
                if let Some(t_const) = field.constant_on(tag) {
                    let g = em.inverse_transpose();
                    let mut e = congruence(&g, &t_const);
                    e.iter_mut().flatten().for_each(|v| *v *= adet);
                    contract(&e, &mom.values, scale, &mut local);
                } else {
                    let phi = physical_rows(table, &em, false);
                    let w: Vec<f64> = rule.weights.iter().map(|w| w * adet).collect();
                    let (re, im) = weighted_gram(&phi, &w, |q| field.eval(tag, &phys[q]));
                    local.add_scaled(scale, &re, im.as_ref());
                }
            }
            if !local.is_finite() {
                return Err(AssemblyError::NonFinite {
                    what: "volume coefficient",
                    element: t,
                });
            }
            Ok(local)
        };

        let nt = mesh.num_tets();
        for start in (0..nt).step_by(CHUNK) {
            let end = (start + CHUNK).min(nt);
            let locals: Vec<Result<Local, AssemblyError>> =
                (start..end).into_par_iter().map(kernel).collect();
            for (t, local) in (start..end).zip(locals) {
                scatter(&mut matrix, dm.element_dofs(t), &local?);
            }
        }
    }

    if let Some((zeta, scale)) = terms.boundary {
        let degree = volume_degree(space, zeta.field().max_degree(), opts);
        let faces = FaceTables::new(space, degree)?;
        for bf in mesh.boundary_faces() {
            let o = dm.orientation(bf.tet);
            let em = mesh.map(bf.tet);
            let table = faces.get(o, bf.local);
            let (n, area) = face_geometry(mesh, bf.tet, bf.local);
            let phi = physical_rows(table, &em, false);
            let pts = &faces.points[&bf.local];
            let w: Vec<f64> = faces.weights.iter().map(|w| w * area).collect();
            let (re, im) = weighted_gram(&phi, &w, |q| {
                zeta.tangential_tensor(bf.tag, &em.apply(&pts[q]), &n)
            });
            let mut local = Local::zeros(dim);
            local.add_scaled(scale, &re, im.as_ref());
            if !local.is_finite() {
                return Err(AssemblyError::NonFinite {
                    what: "impedance",
                    element: bf.tet,
                });
            }
            scatter(&mut matrix, dm.element_dofs(bf.tet), &local);
        }
    }
    Ok(matrix)
}

/// Load vector `b_i = (f, φ_i) + (g, φ_i,T)_Γ`.
pub fn assemble_load(
    space: &FeSpace,
    pd: &ProblemData,
    opts: &AssemblyOptions,
) -> Result<Vec<c64>, AssemblyError> {
    let mesh = space.mesh().as_ref();
    let dm = space.dofmap();
    let pdeg = space.basis().polynomial_degree();
    let degree = (pdeg + pd.source_degree + 2 + opts.quad_bump).min(MAX_QUADRATURE_DEGREE);
    let rule = quadrature_simplex(3, degree)?;
    let tables = space.tables(&rule.points);
    let mut b = vec![ZERO; space.ndofs()];

    let kernel = |t: usize| -> Result<Vec<c64>, AssemblyError> {
        let em = mesh.map(t);
        let phi = physical_rows(tables.get(dm.orientation(t)), &em, false);
        let adet = em.det.abs();
        let mut local = vec![ZERO; phi.ncols()];
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let f = (pd.f)(&em.apply(p));
            if f.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(AssemblyError::NonFinite {
                    what: "source",
                    element: t,
                });
            }
            for (j, lj) in local.iter_mut().enumerate() {
                let s: c64 = (0..3).map(|c| f[c] * phi[(3 * q + c, j)]).sum();
                *lj += s * (w * adet);
            }
        }
        Ok(local)
    };
    let nt = mesh.num_tets();
    for start in (0..nt).step_by(CHUNK) {
        let end = (start + CHUNK).min(nt);
        let locals: Vec<_> = (start..end).into_par_iter().map(kernel).collect();
        for (t, local) in (start..end).zip(locals) {
            for (&d, v) in dm.element_dofs(t).iter().zip(local?) {
                b[d] += v;
            }
        }
    }

    let faces = FaceTables::new(
        space,
        (pdeg + pd.source_degree + 2 + opts.quad_bump).min(MAX_QUADRATURE_DEGREE),
    )?;
    for bf in mesh.boundary_faces() {
        let em = mesh.map(bf.tet);
        let phi = physical_rows(faces.get(dm.orientation(bf.tet), bf.local), &em, false);
        let (n, area) = face_geometry(mesh, bf.tet, bf.local);
        let pts = &faces.points[&bf.local];
        for (q, w) in faces.weights.iter().enumerate() {
            let g = (pd.g)(&em.apply(&pts[q]), &n);
            if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(AssemblyError::NonFinite {
                    what: "boundary data",
                    element: bf.tet,
                });
            }
            let gn: c64 = (0..3).map(|c| g[c] * n[c]).sum();
            let gt: [c64; 3] = std::array::from_fn(|c| g[c] - gn * n[c]);
            for (j, &d) in dm.element_dofs(bf.tet).iter().enumerate() {
                let s: c64 = (0..3).map(|c| gt[c] * phi[(3 * q + c, j)]).sum();
                b[d] += s * (w * area);
            }
        }
    }
    Ok(b)
}

/// System matrix of `(μ⁻¹ curl u, curl v) − k²(ε u, v) − i k (ζ u_T, v_T)_Γ`
/// and the matching load vector.
pub fn assemble_system(
    space: &FeSpace,
    pd: &ProblemData,
    opts: &AssemblyOptions,
) -> Result<ComplexSparseSystem, AssemblyError> {
    pd.validate(space.mesh())?;
    let k = pd.k.value();
    let i = c64::new(0.0, 1.0);
    let terms = FormTerms {
        curl: Some((&pd.mu_inv, c64::new(1.0, 0.0))),
        mass: Some((&pd.eps, -k * k)),
        boundary: Some((&pd.zeta, -i * k)),
    };
    let matrix = assemble_form(space, &terms, opts)?;
    let rhs = assemble_load(space, pd, opts)?;
    Ok(ComplexSparseSystem { matrix, rhs })
}

/// Gram matrix of `‖curl u‖² + |k|²‖u‖² + |k|‖u_T‖²_Γ`.
pub fn assemble_hxik_gram(
    space: &FeSpace,
    k: Wavenumber,
    opts: &AssemblyOptions,
) -> Result<CsrMatrix, AssemblyError> {
    let id = CoefficientField::constant(identity());
    let one = ImpedanceField::scalar(c64::new(1.0, 0.0));
    let a = k.abs();
    let terms = FormTerms {
        curl: Some((&id, c64::new(1.0, 0.0))),
        mass: Some((&id, c64::new(a * a, 0.0))),
        boundary: Some((&one, c64::new(a, 0.0))),
    };
    assemble_form(space, &terms, opts)
}

/// Matrix of `b_k(u, v) = k²(ε u, v) + i k (ζ u_T, v_T)_Γ`.
pub fn assemble_bk_pairing(
    space: &FeSpace,
    pd: &ProblemData,
    opts: &AssemblyOptions,
) -> Result<CsrMatrix, AssemblyError> {
    let k = pd.k.value();
    let terms = FormTerms {
        curl: None,
        mass: Some((&pd.eps, k * k)),
        boundary: Some((&pd.zeta, c64::new(0.0, 1.0) * k)),
    };
    assemble_form(space, &terms, opts)
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Wall-clock seconds spent assembling and solving.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveTimings {
    pub assemble: f64,
    pub solve: f64,
}

/// Assembles and solves the discrete problem on `space`.
pub fn solve_problem(
    space: &FeSpace,
    pd: &ProblemData,
    opts: &AssemblyOptions,
) -> Result<(Vec<c64>, SolveTimings), SolveError> {
    let start = Instant::now();
    let sys = assemble_system(space, pd, opts)?;
    let assembled = Instant::now();
    let points = space.dof_points();
    let x = factorize_with(&sys.matrix, Method::Auto, Some(&points))?.solve(&sys.rhs)?;
    let timings = SolveTimings {
        assemble: (assembled - start).as_secs_f64(),
        solve: assembled.elapsed().as_secs_f64(),
    };
    Ok((x, timings))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::coefficients::{builtin_problem, real_tensor, TensorField};
    use crate::fem::{nedelec_basis, Family};
    use crate::mesh::{build_structured_cube_mesh, Mesh};

    fn reference_tet() -> Mesh {
        Mesh::from_elements(
            REFERENCE_VERTICES.to_vec(),
            vec![[0, 1, 2, 3]],
            vec![1],
            |_, _| 1,
        )
        .unwrap()
    }

    fn space(mesh: Mesh, family: Family, p: usize) -> FeSpace {
        FeSpace::new(Arc::new(mesh), Arc::new(nedelec_basis(family, p).unwrap()))
    }

    fn edge01_dof(s: &FeSpace) -> usize {
        // edge DOFs follow vertex DOFs (none for vector families), edge 0 is (0,1)
        let e = s.mesh().edges().iter().position(|e| *e == [0, 1]).unwrap();
        let per_edge = s.basis().layout().edge;
        s.dofmap().element_dofs(0)[e * per_edge]
    }

    #[test]
    fn curl_curl_whitney_entry() {
        let s = space(reference_tet(), Family::NedelecI, 0);
        let id = CoefficientField::constant(identity());
        let terms = FormTerms {
            curl: Some((&id, c64::new(1.0, 0.0))),
            mass: None,
            boundary: None,
        };
        let a = assemble_form(&s, &terms, &AssemblyOptions::default()).unwrap();
        let d = edge01_dof(&s);
        assert!(
            (a.get(d, d) - c64::new(4.0 / 3.0, 0.0)).norm() < 1e-13,
            "{}",
            a.get(d, d)
        );
    }

    #[test]
    fn mass_entry_matches_independent_rules() {
        let s = space(reference_tet(), Family::NedelecI, 0);
        let id = CoefficientField::constant(identity());
        let terms = FormTerms {
            curl: None,
            mass: Some((&id, c64::new(1.0, 0.0))),
            boundary: None,
        };
        let a = assemble_form(&s, &terms, &AssemblyOptions::default()).unwrap();
        let d = edge01_dof(&s);
        // Whitney function λ0∇λ1 − λ1∇λ0 in closed form
        let whitney = |p: &Point| {
            let l0 = 1.0 - p[0] - p[1] - p[2];
            let l1 = p[0];
            [l0 + l1, l1, l1]
        };
        let oracle = |deg: usize| {
            quadrature_simplex(3, deg)
                .unwrap()
                .integrate(|p| whitney(p).iter().map(|v| v * v).sum())
        };
        let (q4, q8) = (oracle(4), oracle(8));
        assert!((q4 - q8).abs() < 1e-12);
        // the assembled function may differ from the classical one by sign only
        assert!(
            (a.get(d, d).re - q4).abs() < 1e-12,
            "{} vs {q4}",
            a.get(d, d)
        );
    }

    #[test]
    fn symmetric_for_real_symmetric_data() {
        let m = build_structured_cube_mesh(2, Some(crate::mesh::AxisBox::cube(0.0, 0.5))).unwrap();
        let s = space(m, Family::NedelecII, 2);
        let pd = builtin_problem("exp1_interface", Wavenumber::real(3.0).unwrap()).unwrap();
        let sys = assemble_system(&s, &pd, &AssemblyOptions::default()).unwrap();
        assert!(sys.matrix.symmetry_defect() < 1e-10);
        let g = assemble_hxik_gram(&s, pd.k, &AssemblyOptions::default()).unwrap();
        assert!(g.hermitian_defect() < 1e-12);
    }

    #[test]
    fn gram_of_constant_field() {
        let m = build_structured_cube_mesh(2, None).unwrap();
        for (family, p) in [(Family::NedelecI, 0), (Family::NedelecII, 1)] {
            let s = space(m.clone(), family, p);
            let u =
                crate::analysis::interpolate_fn(&s, |_x: &Point| [c64::new(1.0, 0.0), ZERO, ZERO]);
            for k in [1.0, 4.0, 8.0] {
                let g = assemble_hxik_gram(
                    &s,
                    Wavenumber::real(k).unwrap(),
                    &AssemblyOptions::default(),
                )
                .unwrap();
                let gu = g.mul_vec(&u);
                let q: c64 = u.iter().zip(&gu).map(|(a, b)| a.conj() * b).sum();
                assert!(
                    (q.re - (k * k + 4.0 * k)).abs() < 1e-10 * k * k,
                    "{family} k={k}: {q}"
                );
                assert!(q.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bk_pairing_splits_by_wavenumber() {
        let m = build_structured_cube_mesh(1, None).unwrap();
        let s = space(m, Family::NedelecII, 1);
        let pd = builtin_problem("exp2_smooth", Wavenumber::real(2.0).unwrap()).unwrap();
        let b2 = assemble_bk_pairing(&s, &pd, &AssemblyOptions::default()).unwrap();
        let b4 = assemble_bk_pairing(
            &s,
            &pd.with_wavenumber(Wavenumber::real(4.0).unwrap()),
            &AssemblyOptions::default(),
        )
        .unwrap();
        // real part is volume mass (k²), imaginary part boundary (k)
        for (x, y) in b2.values().iter().zip(b4.values()) {
            assert!((y.re - 4.0 * x.re).abs() < 1e-12 * (1.0 + x.re.abs()));
            assert!((y.im - 2.0 * x.im).abs() < 1e-12 * (1.0 + x.im.abs()));
        }
        let zero = b2.mul_vec(&vec![ZERO; s.ndofs()]);
        assert!(zero.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn gram_scales_with_wavenumber() {
        let m = build_structured_cube_mesh(1, None).unwrap();
        let s = space(m, Family::NedelecI, 1);
        let o = AssemblyOptions::default();
        let gram = |k| assemble_hxik_gram(&s, Wavenumber::real(k).unwrap(), &o).unwrap();
        let (g1, g2, g4, g8) = (gram(1.0), gram(2.0), gram(4.0), gram(8.0));
        // G(k) = K + k² M + k B: solve for the parts and check the third point
        for idx in 0..g1.nnz() {
            let (a, b, c) = (
                g1.values()[idx].re,
                g2.values()[idx].re,
                g4.values()[idx].re,
            );
            // b − a = 3M + B, c − a = 15M + 3B
            let m_part = ((c - a) - 3.0 * (b - a)) / 6.0;
            let b_part = (b - a) - 3.0 * m_part;
            let k_part = a - m_part - b_part;
            let predicted = k_part + 64.0 * m_part + 8.0 * b_part;
            let direct = g8.values()[idx].re;
            assert!((predicted - direct).abs() < 1e-10 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn quadrature_bump_is_harmless() {
        let m = build_structured_cube_mesh(2, None).unwrap();
        let s = space(m, Family::NedelecII, 2);
        let pd = builtin_problem("exp2_smooth", Wavenumber::real(5.0).unwrap()).unwrap();
        let a = assemble_system(&s, &pd, &AssemblyOptions::default()).unwrap();
        let b = assemble_system(&s, &pd, &AssemblyOptions { quad_bump: 2 }).unwrap();
        let scale = a
            .matrix
            .values()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        for (x, y) in a.matrix.values().iter().zip(b.matrix.values()) {
            assert!((x - y).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn parallel_assembly_is_bit_identical() {
        let m = build_structured_cube_mesh(3, None).unwrap();
        let s = space(m, Family::NedelecII, 2);
        let pd =
            builtin_problem("exp2_smooth", Wavenumber::new(c64::new(5.0, 2.0)).unwrap()).unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let wide = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = serial.install(|| assemble_system(&s, &pd, &AssemblyOptions::default()).unwrap());
        let b = wide.install(|| assemble_system(&s, &pd, &AssemblyOptions::default()).unwrap());
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
    }

    #[test]
    fn variable_and_constant_paths_agree() {
        let m = build_structured_cube_mesh(2, None).unwrap();
        let s = space(m, Family::NedelecII, 2);
        let t = real_tensor([[2.0, 0.5, 0.0], [0.5, 3.0, 0.1], [0.0, 0.1, 1.5]]);
        let constant = CoefficientField::constant(t);
        let variable = CoefficientField::uniform(TensorField::Variable {
            f: Arc::new(move |_| t),
            degree: 0,
        });
        let o = AssemblyOptions::default();
        for curl in [true, false] {
            let mk = |f| {
                let terms = if curl {
                    FormTerms {
                        curl: Some((f, c64::new(1.0, 0.0))),
                        mass: None,
                        boundary: None,
                    }
                } else {
                    FormTerms {
                        curl: None,
                        mass: Some((f, c64::new(1.0, 0.0))),
                        boundary: None,
                    }
                };
                assemble_form(&s, &terms, &o).unwrap()
            };
            let (a, b) = (mk(&constant), mk(&variable));
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).norm() < 1e-12, "curl={curl}");
            }
        }
    }
}
