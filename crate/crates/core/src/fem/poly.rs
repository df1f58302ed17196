//! Sparse polynomials in three variables with exact integer exponents.

/// `sum c * x^a y^b z^c` stored term by term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly {
    pub terms: Vec<([u8; 3], f64)>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exp: [u8; 3], coef: f64) -> Self {
        Self {
            terms: vec![(exp, coef)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(e, _)| e.iter().map(|&x| x as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)
            })
            .sum()
    }

    pub fn derivative(&self, axis: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[axis] > 0)
            .map(|(e, c)| {
                let mut e2 = *e;
                e2[axis] -= 1;
                (e2, c * e[axis] as f64)
            })
            .collect();
        Poly { terms }
    }

    /// Multiplies by the coordinate `x_axis`.
    pub fn times_coordinate(&self, axis: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut e2 = *e;
                e2[axis] += 1;
                (e2, *c)
            })
            .collect();
        Poly { terms }
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(e, c)| (*e, c * s)).collect(),
        }
    }

    pub fn add(&self, other: &Poly, scale: f64) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|(e, c)| (*e, c * scale)));
        Poly { terms }
    }
}

/// Exponents of all monomials in `vars` variables with total degree exactly `d`,
/// in a fixed graded-lexicographic order.
pub fn homogeneous_exponents(vars: usize, d: usize) -> Vec<[u8; 3]> {
    let mut out = Vec::new();
    match vars {
        1 => out.push([d as u8, 0, 0]),
        2 => {
            for b in 0..=d {
                out.push([(d - b) as u8, b as u8, 0]);
            }
        }
        3 => {
            for c in 0..=d {
                for b in 0..=(d - c) {
                    out.push([(d - b - c) as u8, b as u8, c as u8]);
                }
            }
        }
        _ => panic!("1 to 3 variables supported"),
    }
    out
}

/// Exponents of all monomials with total degree `<= d`, graded.
pub fn exponents_up_to(vars: usize, d: usize) -> Vec<[u8; 3]> {
    (0..=d)
        .flat_map(|k| homogeneous_exponents(vars, k))
        .collect()
}

/// Vector polynomial field.
pub type VecPoly = [Poly; 3];

pub fn curl(v: &VecPoly) -> VecPoly {
    [
        v[2].derivative(1).add(&v[1].derivative(2), -1.0),
        v[0].derivative(2).add(&v[2].derivative(0), -1.0),
        v[1].derivative(0).add(&v[0].derivative(1), -1.0),
    ]
}

pub fn gradient(p: &Poly) -> VecPoly {
    [p.derivative(0), p.derivative(1), p.derivative(2)]
}

/// `x × (e_axis * m)` for a scalar polynomial `m`.
pub fn x_cross_unit(axis: usize, m: &Poly) -> VecPoly {
    let mut out = [Poly::zero(), Poly::zero(), Poly::zero()];
    // x × e_axis has components: e.g. x × e_0 = (0, z, -y)
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    // (x × e_axis)_a = x_b, (x × e_axis)_b = -x_a
    out[a] = m.times_coordinate(b);
    out[b] = m.times_coordinate(a).scaled(-1.0);
    out
}
