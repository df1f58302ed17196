//! Covariant (curl-conforming) transform of reference fields.

use crate::mesh::ElementMap;

/// Pushes reference values and curls to the physical element:
/// `v = F^{-T} v̂` and `curl v = F curl v̂ / det F`.
pub fn covariant_pushforward(
    em: &ElementMap,
    ref_values: &[[f64; 3]],
    ref_curls: &[[f64; 3]],
) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let g = em.inverse_transpose();
    let f = em.forward();
    let inv_det = 1.0 / em.det;
    let values = ref_values.iter().map(|v| mat_vec(&g, v)).collect();
    let curls = ref_curls
        .iter()
        .map(|c| mat_vec(&f, c).map(|x| x * inv_det))
        .collect();
    (values, curls)
}

#[inline]
pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}
