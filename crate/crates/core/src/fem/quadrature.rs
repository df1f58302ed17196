//! Collapsed-coordinate Gauss–Jacobi rules on the reference triangle and tetrahedron.

use nalgebra::{DMatrix, SymmetricEigen};

use super::FemError;

/// Highest polynomial degree for which rules are provided.
pub const MAX_QUADRATURE_DEGREE: usize = 20;

/// Points and weights on a reference simplex, exact for total degree `degree`.
///
/// Points are stored with three coordinates; triangle rules leave the third at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate<F: FnMut(&[f64; 3]) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// Gauss–Jacobi points and weights on `[0, 1]` for the weight `(1 - t)^alpha`.
pub(crate) fn gauss_jacobi_01(m: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    // Golub–Welsch on [-1, 1] with weight (1 - x)^alpha
    let beta = 0.0;
    let ab = alpha + beta;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for n in 0..m {
        let nf = n as f64;
        let diag = if n == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * nf + ab) * (2.0 * nf + ab + 2.0))
        };
        jac[(n, n)] = diag;
        if n + 1 < m {
            let k = nf + 1.0;
            let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
            let den = (2.0 * k + ab).powi(2) * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0);
            let off = (num / den).sqrt();
            jac[(n, n + 1)] = off;
            jac[(n + 1, n)] = off;
        }
    }
    // integral of (1 - x)^alpha over [-1, 1]
    let mu0 = 2f64.powf(alpha + 1.0) / (alpha + 1.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let scale = 2f64.powf(-alpha - 1.0);
    let pts = pairs.iter().map(|(x, _)| 0.5 * (1.0 + x)).collect();
    let wts = pairs.iter().map(|(_, w)| w * scale).collect();
    (pts, wts)
}

/// Gauss–Legendre rule on `[0, 1]` with `m` points.
pub fn gauss_legendre_01(m: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi_01(m, 0.0)
}

/// Quadrature rule on the reference triangle (`dim = 2`) or tetrahedron (`dim = 3`).
pub fn quadrature_simplex(dim: usize, degree: usize) -> Result<QuadratureRule, FemError> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(FemError::UnsupportedQuadrature { dim, degree });
    }
    let m = degree / 2 + 1;
    match dim {
        2 => {
            let (a, wa) = gauss_jacobi_01(m, 0.0);
            let (b, wb) = gauss_jacobi_01(m, 1.0);
            let mut points = Vec::with_capacity(m * m);
            let mut weights = Vec::with_capacity(m * m);
            for (bj, wbj) in b.iter().zip(&wb) {
                for (ai, wai) in a.iter().zip(&wa) {
                    points.push([ai * (1.0 - bj), *bj, 0.0]);
                    weights.push(wai * wbj);
                }
            }
            Ok(QuadratureRule {
                dim,
                degree,
                points,
                weights,
            })
        }
        3 => {
            let (a, wa) = gauss_jacobi_01(m, 0.0);
            let (b, wb) = gauss_jacobi_01(m, 1.0);
            let (c, wc) = gauss_jacobi_01(m, 2.0);
            let mut points = Vec::with_capacity(m * m * m);
            let mut weights = Vec::with_capacity(m * m * m);
            for (ck, wck) in c.iter().zip(&wc) {
                for (bj, wbj) in b.iter().zip(&wb) {
                    for (ai, wai) in a.iter().zip(&wa) {
                        points.push([ai * (1.0 - bj) * (1.0 - ck), bj * (1.0 - ck), *ck]);
                        weights.push(wai * wbj * wck);
                    }
                }
            }
            Ok(QuadratureRule {
                dim,
                degree,
                points,
                weights,
            })
        }
        _ => Err(FemError::UnsupportedQuadrature { dim, degree }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn second_moments() {
        let tet = quadrature_simplex(3, 2).unwrap();
        assert!((tet.integrate(|p| p[0] * p[0]) - 1.0 / 60.0).abs() < 1e-15);
        let tri = quadrature_simplex(2, 2).unwrap();
        assert!((tri.integrate(|p| p[0] * p[0]) - 1.0 / 12.0).abs() < 1e-15);
        assert!((tet.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-15);
        assert!((tri.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_for_all_monomials() {
        for degree in 0..=MAX_QUADRATURE_DEGREE {
            let tet = quadrature_simplex(3, degree).unwrap();
            let tri = quadrature_simplex(2, degree).unwrap();
            assert!(tet.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let got = tri.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    assert!(
                        ((got - exact) / exact).abs() < 1e-13,
                        "tri d={degree} {a} {b}"
                    );
                    for c in 0..=(degree as u32 - a - b) {
                        let exact =
                            factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                        let got = tet.integrate(|p| {
                            p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)
                        });
                        assert!(
                            ((got - exact) / exact).abs() < 1e-13,
                            "tet d={degree} {a}{b}{c}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unsupported() {
        assert!(quadrature_simplex(3, 21).is_err());
        assert!(quadrature_simplex(4, 2).is_err());
    }
}
