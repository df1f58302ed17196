//! Reference-element bases dual to moment-type degrees of freedom.
//!
//! Shape functions are not written down by hand. Each family fixes a spanning
//! set of polynomial fields and a list of DOF functionals; the spanning set is
//! orthonormalized in `L²(T̂)` (dropping dependent members) and the basis is
//! obtained by inverting the functional matrix. Edge and face functionals are
//! oriented by the global vertex order of the element, so one reference basis
//! exists per ordering of the four vertices (24 in total, built on demand).

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64 as c64;

use super::poly::{
    curl, exponents_up_to, gradient, homogeneous_exponents, x_cross_unit, Poly, VecPoly,
};
use super::quadrature::{gauss_legendre_01, quadrature_simplex};
use super::FemError;
use crate::mesh::{LOCAL_EDGES, LOCAL_FACES};

pub const MAX_NEDELEC_ORDER: usize = 4;
pub const MAX_LAGRANGE_DEGREE: usize = 5;

/// Reference vertices: origin, e1, e2, e3.
pub const REFERENCE_VERTICES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Nédélec first kind: `P_p^3 + x × P_p^3`.
    NedelecI,
    /// Nédélec second kind: full `P_p^3`.
    NedelecII,
    /// Continuous scalar Lagrange elements.
    Lagrange,
}

impl Family {
    pub fn is_vector(self) -> bool {
        !matches!(self, Family::Lagrange)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::NedelecI => "nedelec-I",
            Family::NedelecII => "nedelec-II",
            Family::Lagrange => "lagrange",
        })
    }
}

/// Number of DOFs attached to each kind of mesh entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntityLayout {
    pub vertex: usize,
    pub edge: usize,
    pub face: usize,
    pub interior: usize,
}

impl EntityLayout {
    pub fn local_dim(&self) -> usize {
        4 * self.vertex + 6 * self.edge + 4 * self.face + self.interior
    }
}

/// Ranks of the global ids of an element's four vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Orientation {
    ranks: [u8; 4],
}

impl Orientation {
    pub fn identity() -> Self {
        Self {
            ranks: [0, 1, 2, 3],
        }
    }

    pub fn from_global(ids: &[usize; 4]) -> Self {
        let mut ranks = [0u8; 4];
        for i in 0..4 {
            ranks[i] = (0..4).filter(|&j| ids[j] < ids[i]).count() as u8;
        }
        Self { ranks }
    }

    /// Lehmer code, in `0..24`.
    pub fn index(&self) -> usize {
        let fact = [6, 2, 1, 1];
        (0..4)
            .map(|i| {
                (i + 1..4)
                    .filter(|&j| self.ranks[j] < self.ranks[i])
                    .count()
                    * fact[i]
            })
            .sum()
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 24);
        let fact = [6, 2, 1, 1];
        let mut pool: Vec<u8> = vec![0, 1, 2, 3];
        let mut rest = index;
        let mut ranks = [0u8; 4];
        for i in 0..4 {
            let k = rest / fact[i];
            rest %= fact[i];
            ranks[i] = pool.remove(k);
        }
        Self { ranks }
    }

    /// Endpoints of local edge `le`, lower global id first.
    pub fn edge(&self, le: usize) -> [usize; 2] {
        let [a, b] = LOCAL_EDGES[le];
        if self.ranks[a] < self.ranks[b] {
            [a, b]
        } else {
            [b, a]
        }
    }

    /// Vertices of local face `lf` in ascending global order.
    pub fn face(&self, lf: usize) -> [usize; 3] {
        let mut f = LOCAL_FACES[lf];
        f.sort_by_key(|&v| self.ranks[v]);
        f
    }
}

/// `ℓ(u) = Σ weight · u(point)`; scalar families use the first weight component.
#[derive(Debug, Clone, Default)]
pub struct Functional {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<[f64; 3]>,
}

impl Functional {
    fn push(&mut self, point: [f64; 3], weight: [f64; 3]) {
        self.points.push(point);
        self.weights.push(weight);
    }
}

/// Basis for one vertex ordering: coefficients over the spanning set plus the
/// functionals it is dual to.
#[derive(Debug, Clone)]
pub struct OrientedBasis {
    /// `candidates × dim`.
    pub coeffs: DMatrix<f64>,
    pub functionals: Vec<Functional>,
}

/// Shape values and curls (vector families) or gradients (scalar family) at a
/// set of reference points. Row `pt * c + comp`, one column per shape function;
/// `c` is 3 for vectors and 1 for scalars in `values`, always 3 in `derivs`.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub npts: usize,
    pub values: DMatrix<f64>,
    pub derivs: DMatrix<f64>,
}

#[derive(Debug)]
pub struct ReferenceBasis {
    family: Family,
    order: usize,
    layout: EntityLayout,
    candidates: Vec<VecPoly>,
    cand_derivs: Vec<VecPoly>,
    transform: DMatrix<f64>,
    variants: Vec<OnceLock<OrientedBasis>>,
}

/// Spanning-set polynomials are written in coordinates relative to this point,
/// which keeps high-degree monomials well conditioned on the reference element.
const CENTER: [f64; 3] = [0.25, 0.25, 0.25];

fn centered(x: &[f64; 3]) -> [f64; 3] {
    [x[0] - CENTER[0], x[1] - CENTER[1], x[2] - CENTER[2]]
}

/// `P_j(2s - 1)`, the Legendre polynomial shifted to `[0, 1]`.
fn legendre01(j: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    if j == 0 {
        return p0;
    }
    for n in 1..j {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn axpy3(a: &[f64; 3], s: f64, b: &[f64; 3]) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn diff3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scalar_field(p: Poly) -> VecPoly {
    [p, Poly::zero(), Poly::zero()]
}

fn unit_field(axis: usize, p: Poly) -> VecPoly {
    let mut v = [Poly::zero(), Poly::zero(), Poly::zero()];
    v[axis] = p;
    v
}

/// The `dim` of a Nédélec first-kind space of order `p`.
pub fn nedelec_i_dim(p: usize) -> usize {
    (p + 1) * (p + 3) * (p + 4) / 2
}

/// The `dim` of a Nédélec second-kind space of order `p`.
pub fn nedelec_ii_dim(p: usize) -> usize {
    (p + 1) * (p + 2) * (p + 3) / 2
}

/// The `dim` of scalar polynomials of degree `q` in three variables.
pub fn lagrange_dim(q: usize) -> usize {
    (q + 1) * (q + 2) * (q + 3) / 6
}

/// Nédélec basis of the given kind and order `0 ≤ p ≤ 4` (second kind: `1 ≤ p ≤ 4`).
pub fn nedelec_basis(family: Family, p: usize) -> Result<ReferenceBasis, FemError> {
    match family {
        Family::NedelecI if p <= MAX_NEDELEC_ORDER => ReferenceBasis::build(family, p),
        Family::NedelecII if (1..=MAX_NEDELEC_ORDER).contains(&p) => {
            ReferenceBasis::build(family, p)
        }
        _ => Err(FemError::UnsupportedOrder { family, order: p }),
    }
}

/// Scalar Lagrange basis of degree `1 ≤ q ≤ 5`.
pub fn h1_basis(q: usize) -> Result<ReferenceBasis, FemError> {
    if !(1..=MAX_LAGRANGE_DEGREE).contains(&q) {
        return Err(FemError::UnsupportedOrder {
            family: Family::Lagrange,
            order: q,
        });
    }
    ReferenceBasis::build(Family::Lagrange, q)
}

impl ReferenceBasis {
    fn build(family: Family, order: usize) -> Result<Self, FemError> {
        let p = order;
        let layout = match family {
            Family::NedelecI => EntityLayout {
                vertex: 0,
                edge: p + 1,
                face: p * (p + 1),
                interior: if p >= 2 { (p - 1) * p * (p + 1) / 2 } else { 0 },
            },
            Family::NedelecII => EntityLayout {
                vertex: 0,
                edge: p + 1,
                face: (p - 1) * (p + 1),
                interior: if p >= 3 {
                    (p - 2) * (p - 1) * (p + 1) / 2
                } else {
                    0
                },
            },
            Family::Lagrange => EntityLayout {
                vertex: 1,
                edge: p - 1,
                face: if p >= 3 { (p - 2) * (p - 1) / 2 } else { 0 },
                interior: if p >= 4 {
                    (p - 3) * (p - 2) * (p - 1) / 6
                } else {
                    0
                },
            },
        };

        let mut candidates: Vec<VecPoly> = Vec::new();
        match family {
            Family::NedelecI | Family::NedelecII => {
                for e in exponents_up_to(3, p) {
                    for axis in 0..3 {
                        candidates.push(unit_field(axis, Poly::monomial(e, 1.0)));
                    }
                }
                if family == Family::NedelecI {
                    for e in homogeneous_exponents(3, p) {
                        for axis in 0..3 {
                            candidates.push(x_cross_unit(axis, &Poly::monomial(e, 1.0)));
                        }
                    }
                }
            }
            Family::Lagrange => {
                for e in exponents_up_to(3, p) {
                    candidates.push(scalar_field(Poly::monomial(e, 1.0)));
                }
            }
        }
        let cand_derivs: Vec<VecPoly> = candidates
            .iter()
            .map(|c| match family {
                Family::Lagrange => gradient(&c[0]),
                _ => curl(c),
            })
            .collect();

        let max_degree = match family {
            Family::NedelecI => p + 1,
            _ => p,
        };
        let transform = orthonormalize(&candidates, family.is_vector(), max_degree)?;
        let dim = layout.local_dim();
        if transform.ncols() != dim {
            return Err(FemError::NotUnisolvent {
                family,
                order,
                rank: transform.ncols(),
                expected: dim,
            });
        }

        let basis = ReferenceBasis {
            family,
            order,
            layout,
            candidates,
            cand_derivs,
            transform,
            variants: (0..24).map(|_| OnceLock::new()).collect(),
        };
        // the identity ordering certifies unisolvence; the others are images of it
        // under affine symmetries of the reference element
        let identity = basis.build_variant(Orientation::identity())?;
        let _ = basis.variants[Orientation::identity().index()].set(identity);
        Ok(basis)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn layout(&self) -> EntityLayout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.local_dim()
    }

    /// Components of the shape values: 3 for vector families, 1 for scalars.
    pub fn value_components(&self) -> usize {
        if self.family.is_vector() {
            3
        } else {
            1
        }
    }

    /// Highest total degree of a shape-function component.
    pub fn polynomial_degree(&self) -> usize {
        match self.family {
            Family::NedelecI => self.order + 1,
            _ => self.order,
        }
    }

    pub fn variant(&self, o: Orientation) -> &OrientedBasis {
        self.variants[o.index()].get_or_init(|| {
            self.build_variant(o)
                .expect("every vertex ordering of a unisolvent element is unisolvent")
        })
    }

    fn functionals(&self, o: Orientation) -> Vec<Functional> {
        let p = self.order;
        let x = &REFERENCE_VERTICES;
        let mut out = Vec::with_capacity(self.dim());

        if self.family == Family::Lagrange {
            let q = p as f64;
            for v in x {
                let mut f = Functional::default();
                f.push(*v, [1.0, 0.0, 0.0]);
                out.push(f);
            }
            for le in 0..6 {
                let [a, b] = o.edge(le);
                let t = diff3(&x[b], &x[a]);
                for i in 1..p {
                    let mut f = Functional::default();
                    f.push(axpy3(&x[a], i as f64 / q, &t), [1.0, 0.0, 0.0]);
                    out.push(f);
                }
            }
            for lf in 0..4 {
                let [a, b, c] = o.face(lf);
                let (t1, t2) = (diff3(&x[b], &x[a]), diff3(&x[c], &x[a]));
                for j in 1..p {
                    for i in 1..p {
                        if i + j < p {
                            let pt = axpy3(&axpy3(&x[a], i as f64 / q, &t1), j as f64 / q, &t2);
                            let mut f = Functional::default();
                            f.push(pt, [1.0, 0.0, 0.0]);
                            out.push(f);
                        }
                    }
                }
            }
            for l in 1..p {
                for j in 1..p {
                    for i in 1..p {
                        if i + j + l < p {
                            let mut f = Functional::default();
                            f.push([i as f64 / q, j as f64 / q, l as f64 / q], [1.0, 0.0, 0.0]);
                            out.push(f);
                        }
                    }
                }
            }
            return out;
        }

        // tangential edge moments against Legendre polynomials of degree <= p
        let (gs, gw) = gauss_legendre_01(p + 3);
        for le in 0..6 {
            let [a, b] = o.edge(le);
            let t = diff3(&x[b], &x[a]);
            for j in 0..=p {
                let mut f = Functional::default();
                for (s, w) in gs.iter().zip(&gw) {
                    let wl = w * legendre01(j, *s);
                    f.push(axpy3(&x[a], *s, &t), [wl * t[0], wl * t[1], wl * t[2]]);
                }
                out.push(f);
            }
        }

        // face moments of the covariant components (u·t1, u·t2)
        let face_tests: Vec<[Poly; 2]> = match self.family {
            Family::NedelecI if p >= 1 => exponents_up_to(2, p - 1)
                .into_iter()
                .flat_map(|e| {
                    let m = Poly::monomial(e, 1.0);
                    [[m.clone(), Poly::zero()], [Poly::zero(), m]]
                })
                .collect(),
            Family::NedelecII if p >= 2 => {
                let mut v: Vec<[Poly; 2]> = exponents_up_to(2, p - 2)
                    .into_iter()
                    .flat_map(|e| {
                        let m = Poly::monomial(e, 1.0);
                        [[m.clone(), Poly::zero()], [Poly::zero(), m]]
                    })
                    .collect();
                for e in homogeneous_exponents(2, p - 2) {
                    let m = Poly::monomial(e, 1.0);
                    v.push([m.times_coordinate(0), m.times_coordinate(1)]);
                }
                v
            }
            _ => Vec::new(),
        };
        if !face_tests.is_empty() {
            let tri = quadrature_simplex(2, 2 * p + 2).expect("degree within range");
            for lf in 0..4 {
                let [a, b, c] = o.face(lf);
                let (t1, t2) = (diff3(&x[b], &x[a]), diff3(&x[c], &x[a]));
                for test in &face_tests {
                    let mut f = Functional::default();
                    for (st, w) in tri.points.iter().zip(&tri.weights) {
                        let pt = axpy3(&axpy3(&x[a], st[0], &t1), st[1], &t2);
                        let (q1, q2) = (w * test[0].eval(st), w * test[1].eval(st));
                        let wv = [
                            q1 * t1[0] + q2 * t2[0],
                            q1 * t1[1] + q2 * t2[1],
                            q1 * t1[2] + q2 * t2[2],
                        ];
                        f.push(pt, wv);
                    }
                    out.push(f);
                }
            }
        }

        // interior moments
        let interior_tests: Vec<VecPoly> = match self.family {
            Family::NedelecI if p >= 2 => exponents_up_to(3, p - 2)
                .into_iter()
                .flat_map(|e| (0..3).map(move |axis| unit_field(axis, Poly::monomial(e, 1.0))))
                .collect(),
            Family::NedelecII if p >= 3 => {
                let mut v: Vec<VecPoly> = exponents_up_to(3, p - 3)
                    .into_iter()
                    .flat_map(|e| (0..3).map(move |axis| unit_field(axis, Poly::monomial(e, 1.0))))
                    .collect();
                for e in homogeneous_exponents(3, p - 3) {
                    let m = Poly::monomial(e, 1.0);
                    v.push([
                        m.times_coordinate(0),
                        m.times_coordinate(1),
                        m.times_coordinate(2),
                    ]);
                }
                v
            }
            _ => Vec::new(),
        };
        if !interior_tests.is_empty() {
            let tet = quadrature_simplex(3, 2 * p + 2).expect("degree within range");
            for test in &interior_tests {
                let mut f = Functional::default();
                for (pt, w) in tet.points.iter().zip(&tet.weights) {
                    f.push(
                        *pt,
                        [
                            w * test[0].eval(pt),
                            w * test[1].eval(pt),
                            w * test[2].eval(pt),
                        ],
                    );
                }
                out.push(f);
            }
        }
        out
    }

    fn build_variant(&self, o: Orientation) -> Result<OrientedBasis, FemError> {
        let functionals = self.functionals(o);
        let dim = self.dim();
        debug_assert_eq!(functionals.len(), dim);
        let nc = self.candidates.len();
        let mut raw = DMatrix::<f64>::zeros(dim, nc);
        for (i, f) in functionals.iter().enumerate() {
            for (pt, w) in f.points.iter().zip(&f.weights) {
                for (j, cand) in self.candidates.iter().enumerate() {
                    let pt = &centered(pt);
                    let v = if self.family.is_vector() {
                        w[0] * cand[0].eval(pt) + w[1] * cand[1].eval(pt) + w[2] * cand[2].eval(pt)
                    } else {
                        w[0] * cand[0].eval(pt)
                    };
                    raw[(i, j)] += v;
                }
            }
        }
        let dual = &raw * &self.transform;
        let inv = dual
            .clone()
            .lu()
            .try_inverse()
            .ok_or(FemError::NotUnisolvent {
                family: self.family,
                order: self.order,
                rank: dim - 1,
                expected: dim,
            })?;
        let coeffs = &self.transform * inv;
        Ok(OrientedBasis {
            coeffs,
            functionals,
        })
    }

    /// Spanning-set values and derivatives at `points`.
    fn candidate_table(&self, points: &[[f64; 3]]) -> (DMatrix<f64>, DMatrix<f64>) {
        let vc = self.value_components();
        let nc = self.candidates.len();
        let mut vals = DMatrix::<f64>::zeros(points.len() * vc, nc);
        let mut ders = DMatrix::<f64>::zeros(points.len() * 3, nc);
        for (j, (cand, der)) in self.candidates.iter().zip(&self.cand_derivs).enumerate() {
            for (q, pt) in points.iter().enumerate() {
                let pt = &centered(pt);
                for c in 0..vc {
                    vals[(q * vc + c, j)] = cand[c].eval(pt);
                }
                for c in 0..3 {
                    ders[(q * 3 + c, j)] = der[c].eval(pt);
                }
            }
        }
        (vals, ders)
    }

    /// Shape values and curls/gradients of the basis for ordering `o` at `points`.
    pub fn tabulate(&self, o: Orientation, points: &[[f64; 3]]) -> BasisTable {
        let (vals, ders) = self.candidate_table(points);
        let coeffs = &self.variant(o).coeffs;
        BasisTable {
            npts: points.len(),
            values: vals * coeffs,
            derivs: ders * coeffs,
        }
    }

    /// Applies the DOF functionals of ordering `o` to a reference-space field.
    pub fn apply_functionals<F>(&self, o: Orientation, mut field: F) -> Vec<c64>
    where
        F: FnMut(&[f64; 3]) -> [c64; 3],
    {
        let vector = self.family.is_vector();
        self.variant(o)
            .functionals
            .iter()
            .map(|f| {
                f.points
                    .iter()
                    .zip(&f.weights)
                    .map(|(pt, w)| {
                        let u = field(pt);
                        if vector {
                            u[0] * w[0] + u[1] * w[1] + u[2] * w[2]
                        } else {
                            u[0] * w[0]
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// Largest deviation of the functional-by-shape-function matrix from the identity.
    pub fn unisolvence_defect(&self, o: Orientation) -> f64 {
        let variant = self.variant(o);
        let mut defect: f64 = 0.0;
        let vc = self.value_components();
        for (i, f) in variant.functionals.iter().enumerate() {
            let table = self.tabulate(o, &f.points);
            for j in 0..self.dim() {
                let mut v = 0.0;
                for (q, w) in f.weights.iter().enumerate() {
                    for c in 0..vc {
                        v += w[c] * table.values[(q * vc + c, j)];
                    }
                }
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((v - target).abs());
            }
        }
        defect
    }
}

/// Modified Gram–Schmidt (two passes) of the spanning set in `L²(T̂)`. Returns
/// the `candidates × rank` change of basis onto an orthonormal basis.
fn orthonormalize(
    candidates: &[VecPoly],
    vector: bool,
    max_degree: usize,
) -> Result<DMatrix<f64>, FemError> {
    let rule = quadrature_simplex(3, 2 * max_degree)?;
    let vc = if vector { 3 } else { 1 };
    let nc = candidates.len();
    let rows = rule.len() * vc;
    let mut samples = DMatrix::<f64>::zeros(rows, nc);
    for (j, cand) in candidates.iter().enumerate() {
        for (q, (pt, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let sw = w.sqrt();
            for c in 0..vc {
                samples[(q * vc + c, j)] = sw * cand[c].eval(&centered(pt));
            }
        }
    }
    let mut q_cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut t_cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    for j in 0..nc {
        let mut v = samples.column(j).into_owned();
        let mut t = nalgebra::DVector::<f64>::zeros(nc);
        t[j] = 1.0;
        let norm0 = v.norm();
        for _ in 0..2 {
            for (qk, tk) in q_cols.iter().zip(&t_cols) {
                let r = qk.dot(&v);
                v.axpy(-r, qk, 1.0);
                t.axpy(-r, tk, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-9 * norm0 {
            q_cols.push(v / norm);
            t_cols.push(t / norm);
        }
    }
    Ok(DMatrix::from_columns(&t_cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        for p in 0..=4 {
            let b = nedelec_basis(Family::NedelecI, p).unwrap();
            assert_eq!(b.dim(), nedelec_i_dim(p));
        }
        assert_eq!(nedelec_basis(Family::NedelecI, 0).unwrap().dim(), 6);
        assert_eq!(nedelec_basis(Family::NedelecI, 1).unwrap().dim(), 20);
        assert_eq!(nedelec_basis(Family::NedelecI, 2).unwrap().dim(), 45);
        for p in 1..=4 {
            assert_eq!(
                nedelec_basis(Family::NedelecII, p).unwrap().dim(),
                nedelec_ii_dim(p)
            );
        }
        assert_eq!(h1_basis(1).unwrap().dim(), 4);
        assert_eq!(h1_basis(2).unwrap().dim(), 10);
        for q in 1..=5 {
            assert_eq!(h1_basis(q).unwrap().dim(), lagrange_dim(q));
        }
    }

    #[test]
    fn spanning_set_rank_equals_dimension() {
        // rank of the type-I spanning set, counted without the functionals
        for p in 0..=3 {
            let b = nedelec_basis(Family::NedelecI, p).unwrap();
            assert_eq!(b.transform.ncols(), (p + 1) * (p + 3) * (p + 4) / 2);
        }
    }

    #[test]
    fn unsupported_orders() {
        assert!(nedelec_basis(Family::NedelecI, 5).is_err());
        assert!(nedelec_basis(Family::NedelecII, 0).is_err());
        assert!(h1_basis(0).is_err());
        assert!(h1_basis(6).is_err());
    }

    #[test]
    fn unisolvent_for_all_orderings() {
        let bases: Vec<ReferenceBasis> = (0..=4)
            .map(|p| nedelec_basis(Family::NedelecI, p).unwrap())
            .chain((1..=4).map(|p| nedelec_basis(Family::NedelecII, p).unwrap()))
            .chain((1..=5).map(|q| h1_basis(q).unwrap()))
            .collect();
        for b in &bases {
            for idx in [0, 5, 17, 23] {
                let d = b.unisolvence_defect(Orientation::from_index(idx));
                assert!(d < 1e-10, "{} {}: {d:e}", b.family(), b.order());
            }
        }
    }

    #[test]
    fn orientation_index_round_trip() {
        for i in 0..24 {
            assert_eq!(Orientation::from_index(i).index(), i);
        }
        assert_eq!(Orientation::from_global(&[10, 3, 7, 1]).ranks, [3, 1, 2, 0]);
        assert_eq!(Orientation::identity().index(), 0);
    }

    #[test]
    fn lowest_order_is_whitney() {
        let b = nedelec_basis(Family::NedelecI, 0).unwrap();
        let c = [0.25, 0.25, 0.25];
        let t = b.tabulate(Orientation::identity(), &[c]);
        let v = [t.values[(0, 0)], t.values[(1, 0)], t.values[(2, 0)]];
        let expect = [0.5, 0.25, 0.25];
        for d in 0..3 {
            assert!((v[d] - expect[d]).abs() < 1e-13, "{v:?}");
        }
        // Whitney form of every edge at random points: λa∇λb − λb∇λa
        let grads = [
            [-1.0, -1.0, -1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let x = [0.1, 0.3, 0.2];
        let lam = [1.0 - x[0] - x[1] - x[2], x[0], x[1], x[2]];
        let t = b.tabulate(Orientation::identity(), &[x]);
        for (le, [a, bb]) in LOCAL_EDGES.iter().enumerate() {
            for d in 0..3 {
                let w = lam[*a] * grads[*bb][d] - lam[*bb] * grads[*a][d];
                assert!((t.values[(d, le)] - w).abs() < 1e-13);
            }
            // curl = 2 ∇λa × ∇λb
            let (ga, gb) = (grads[*a], grads[*bb]);
            let cr = [
                ga[1] * gb[2] - ga[2] * gb[1],
                ga[2] * gb[0] - ga[0] * gb[2],
                ga[0] * gb[1] - ga[1] * gb[0],
            ];
            for d in 0..3 {
                assert!((t.derivs[(d, le)] - 2.0 * cr[d]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lagrange_partition_of_unity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for q in 1..=5 {
            let b = h1_basis(q).unwrap();
            let pts: Vec<[f64; 3]> = (0..20)
                .map(|_| {
                    let mut p = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
                    while p.iter().sum::<f64>() > 1.0 {
                        p = [rng.gen(), rng.gen(), rng.gen()];
                    }
                    p
                })
                .collect();
            let t = b.tabulate(Orientation::from_index(9), &pts);
            for i in 0..pts.len() {
                let s: f64 = t.values.row(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "q={q}: {s}");
            }
        }
    }
}
