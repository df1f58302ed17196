//! Problem data: piecewise tensor coefficients, boundary impedance, sources and
//! the wavenumber.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::mesh::{Mesh, Point};

pub type Tensor = [[c64; 3]; 3];
pub type VectorFn = Arc<dyn Fn(&Point) -> [c64; 3] + Send + Sync>;
/// Boundary data `g(x, n)` with `n` the outward unit normal.
pub type BoundaryFn = Arc<dyn Fn(&Point, &[f64; 3]) -> [c64; 3] + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&Point) -> Tensor + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("wavenumber {0} has modulus below 1")]
    SmallWavenumber(c64),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("{what} is not defined on subdomain {tag}")]
    MissingTag { what: &'static str, tag: u32 },
    #[error("{what} evaluated to a non-finite value at {at:?}")]
    NonFinite { what: &'static str, at: Point },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber(c64);

impl Wavenumber {
    pub fn new(k: c64) -> Result<Self, ProblemError> {
        if !(k.norm() >= 1.0) {
            return Err(ProblemError::SmallWavenumber(k));
        }
        Ok(Self(k))
    }

    pub fn real(k: f64) -> Result<Self, ProblemError> {
        Self::new(c64::new(k, 0.0))
    }

    pub fn value(&self) -> c64 {
        self.0
    }

    pub fn abs(&self) -> f64 {
        self.0.norm()
    }
}

pub fn identity() -> Tensor {
    scalar_tensor(c64::new(1.0, 0.0))
}

pub fn scalar_tensor(s: c64) -> Tensor {
    let z = c64::new(0.0, 0.0);
    [[s, z, z], [z, s, z], [z, z, s]]
}

pub fn real_tensor(m: [[f64; 3]; 3]) -> Tensor {
    m.map(|row| row.map(|x| c64::new(x, 0.0)))
}

/// A tensor-valued function on one subdomain.
#[derive(Clone)]
pub enum TensorField {
    Constant(Tensor),
    /// Polynomial (or smooth) field with the polynomial degree used to size
    /// quadrature rules.
    Variable {
        f: TensorFn,
        degree: usize,
    },
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorField::Constant(t) => f.debug_tuple("Constant").field(t).finish(),
            TensorField::Variable { degree, .. } => f
                .debug_struct("Variable")
                .field("degree", degree)
                .finish_non_exhaustive(),
        }
    }
}

impl TensorField {
    pub fn eval(&self, x: &Point) -> Tensor {
        match self {
            TensorField::Constant(t) => *t,
            TensorField::Variable { f, .. } => f(x),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            TensorField::Constant(_) => 0,
            TensorField::Variable { degree, .. } => *degree,
        }
    }
}

/// Piecewise tensor field keyed by subdomain tag, with an optional fallback for
/// tags not listed explicitly.
#[derive(Debug, Clone, Default)]
pub struct CoefficientField {
    per_tag: BTreeMap<u32, TensorField>,
    fallback: Option<TensorField>,
}

impl CoefficientField {
    pub fn uniform(field: TensorField) -> Self {
        Self {
            per_tag: BTreeMap::new(),
            fallback: Some(field),
        }
    }

    pub fn constant(t: Tensor) -> Self {
        Self::uniform(TensorField::Constant(t))
    }

    pub fn with_tag(mut self, tag: u32, field: TensorField) -> Self {
        self.per_tag.insert(tag, field);
        self
    }

    pub fn field(&self, tag: u32) -> Option<&TensorField> {
        self.per_tag.get(&tag).or(self.fallback.as_ref())
    }

    pub fn eval(&self, tag: u32, x: &Point) -> Tensor {
        self.field(tag)
            .expect("tag validated against the mesh")
            .eval(x)
    }

    /// The constant value on `tag`, if the field is constant there.
    pub fn constant_on(&self, tag: u32) -> Option<Tensor> {
        match self.field(tag)? {
            TensorField::Constant(t) => Some(*t),
            TensorField::Variable { .. } => None,
        }
    }

    pub fn degree(&self, tag: u32) -> usize {
        self.field(tag).map_or(0, TensorField::degree)
    }

    pub fn max_degree(&self) -> usize {
        self.per_tag
            .values()
            .chain(self.fallback.as_ref())
            .map(TensorField::degree)
            .max()
            .unwrap_or(0)
    }

    /// All fields, explicit tags first.
    pub fn fields(&self) -> impl Iterator<Item = &TensorField> {
        self.per_tag.values().chain(self.fallback.as_ref())
    }

    pub fn defined_on(&self, tag: u32) -> bool {
        self.field(tag).is_some()
    }

    /// Whether every tensor is real symmetric at the sample points.
    pub fn is_real_symmetric_at(&self, tags: &[u32], points: &[Point]) -> bool {
        tags.iter().all(|&tag| {
            points.iter().all(|x| {
                let t = self.eval(tag, x);
                (0..3).all(|i| (0..3).all(|j| t[i][j].im == 0.0 && t[i][j] == t[j][i]))
            })
        })
    }
}

/// Boundary impedance ζ keyed by boundary tag. Tensors are applied as
/// `P ζ P` with `P = I - n nᵀ`, so tangent fields map to tangent fields.
#[derive(Debug, Clone)]
pub struct ImpedanceField {
    inner: CoefficientField,
}

impl ImpedanceField {
    pub fn scalar(z: c64) -> Self {
        Self {
            inner: CoefficientField::constant(scalar_tensor(z)),
        }
    }

    pub fn tensor(field: CoefficientField) -> Self {
        Self { inner: field }
    }

    pub fn field(&self) -> &CoefficientField {
        &self.inner
    }

    /// `P ζ P` at `x` on a face with unit normal `n`.
    pub fn tangential_tensor(&self, tag: u32, x: &Point, n: &[f64; 3]) -> Tensor {
        let z = self.inner.eval(tag, x);
        let mut p = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] = if i == j { 1.0 } else { 0.0 } - n[i] * n[j];
            }
        }
        let mut pz = [[c64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    pz[i][j] += z[l][j] * p[i][l];
                }
            }
        }
        let mut out = [[c64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    out[i][j] += pz[i][l] * p[l][j];
                }
            }
        }
        out
    }

    pub fn apply(&self, tag: u32, x: &Point, n: &[f64; 3], v: &[c64; 3]) -> [c64; 3] {
        let t = self.tangential_tensor(tag, x, n);
        let mut out = [c64::new(0.0, 0.0); 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i] += t[i][j] * v[j];
            }
        }
        out
    }
}

/// All data of `curl μ⁻¹ curl u − k² ε u = f` with
/// `μ⁻¹ curl u × n − i k ζ u_T = g` on the boundary.
#[derive(Clone)]
pub struct ProblemData {
    pub name: String,
    pub mu_inv: CoefficientField,
    pub eps: CoefficientField,
    pub zeta: ImpedanceField,
    pub f: VectorFn,
    pub g: BoundaryFn,
    pub k: Wavenumber,
    /// Polynomial degree allowance for quadrature of `f` and `g`.
    pub source_degree: usize,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("mu_inv", &self.mu_inv)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    /// Checks that every coefficient is defined on every subdomain and
    /// boundary tag of `m`.
    pub fn validate(&self, m: &Mesh) -> Result<(), ProblemError> {
        for tag in m.subdomain_tags() {
            if !self.mu_inv.defined_on(tag) {
                return Err(ProblemError::MissingTag {
                    what: "mu_inv",
                    tag,
                });
            }
            if !self.eps.defined_on(tag) {
                return Err(ProblemError::MissingTag { what: "eps", tag });
            }
        }
        for b in m.boundary_faces() {
            if !self.zeta.field().defined_on(b.tag) {
                return Err(ProblemError::MissingTag {
                    what: "zeta",
                    tag: b.tag,
                });
            }
        }
        Ok(())
    }

    pub fn with_wavenumber(&self, k: Wavenumber) -> Self {
        let mut out = self.clone();
        out.k = k;
        out
    }
}

pub const BUILTIN_PROBLEMS: [&str; 4] = [
    "exp1_interface",
    "exp2_smooth",
    "manufactured_linear",
    "manufactured_trig",
];

/// Outer-region tensors of the interface experiment.
pub const EXP1_MU_INV: [[f64; 3]; 3] = [[3.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 3.0]];
pub const EXP1_EPS: [[f64; 3]; 3] = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 3.0]];

fn zero_boundary() -> BoundaryFn {
    Arc::new(|_, _| [c64::new(0.0, 0.0); 3])
}

/// Built-in problems. `exp1_interface` expects inner-box elements tagged 1 and
/// the surrounding region tagged 2.
pub fn builtin_problem(name: &str, k: Wavenumber) -> Result<ProblemData, ProblemError> {
    let r = |x: f64| c64::new(x, 0.0);
    match name {
        "exp1_interface" => Ok(ProblemData {
            name: name.into(),
            mu_inv: CoefficientField::constant(identity())
                .with_tag(2, TensorField::Constant(real_tensor(EXP1_MU_INV))),
            eps: CoefficientField::constant(identity())
                .with_tag(2, TensorField::Constant(real_tensor(EXP1_EPS))),
            zeta: ImpedanceField::scalar(r(1.0)),
            f: Arc::new(move |x| [r(x[2]), r(0.0), r(0.0)]),
            g: zero_boundary(),
            k,
            source_degree: 1,
        }),
        "exp2_smooth" => Ok(ProblemData {
            name: name.into(),
            mu_inv: CoefficientField::uniform(TensorField::Variable {
                f: Arc::new(move |x| scalar_tensor(r(1.0 + x[0] * x[0]))),
                degree: 2,
            }),
            eps: CoefficientField::constant(identity()),
            zeta: ImpedanceField::scalar(r(1.0)),
            f: Arc::new(move |x| [r(x[2]), r(2.0 * x[0]), r(0.0)]),
            g: zero_boundary(),
            k,
            source_degree: 1,
        }),
        "manufactured_linear" | "manufactured_trig" => {
            let case = crate::verification::builtin_manufactured(name)
                .map_err(|_| ProblemError::UnknownProblem(name.into()))?;
            Ok(case.problem(k))
        }
        other => Err(ProblemError::UnknownProblem(other.into())),
    }
}

/// Result of [`coercivity_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub passed: bool,
    /// `max_α min_{x, |z|=1} Re⟨α M(x) z, z⟩` over the sampled points.
    pub constant: f64,
    pub alpha: c64,
}

/// Number of unimodular rotations tried by [`coercivity_probe`].
pub const ALPHA_GRID: usize = 360;

/// Searches for a unimodular `α` making `Re⟨α M z, z⟩ ≥ c |z|²` uniformly.
///
/// Points are drawn uniformly in the unit cube (plus the cube corners) and every
/// subdomain tensor is evaluated there. For each point the minimum over unit
/// vectors `z` is the smallest eigenvalue of the Hermitian part of `αM`.
pub fn coercivity_probe(
    field: &CoefficientField,
    samples: usize,
    seed: u64,
    threshold: f64,
) -> CoercivityReport {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Point> = (0..8)
        .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
        .collect();
    points.extend(
        (0..samples.max(1)).map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()]),
    );
    let tensors: Vec<Matrix3<c64>> = field
        .fields()
        .flat_map(|tf| points.iter().map(move |x| tf.eval(x)))
        .map(|t| Matrix3::from_fn(|i, j| t[i][j]))
        .collect();

    let mut best = (f64::NEG_INFINITY, c64::new(1.0, 0.0));
    for j in 0..ALPHA_GRID {
        let alpha = c64::from_polar(
            1.0,
            2.0 * std::f64::consts::PI * j as f64 / ALPHA_GRID as f64,
        );
        let mut worst = f64::INFINITY;
        for m in &tensors {
            let a = m * alpha;
            let herm = (a + a.adjoint()) * c64::new(0.5, 0.0);
            let min_eig = herm.symmetric_eigenvalues().min();
            worst = worst.min(min_eig);
            if worst < best.0 {
                break;
            }
        }
        if worst > best.0 {
            best = (worst, alpha);
        }
    }
    CoercivityReport {
        passed: best.0 >= threshold,
        constant: best.0,
        alpha: best.1,
    }
}
