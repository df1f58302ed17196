//! A discrete space on a mesh: reference basis plus DOF map.

use std::sync::Arc;

use num_complex::Complex64 as c64;

use super::basis::{BasisTable, Orientation, ReferenceBasis};
use super::dofmap::{build_dof_map, DofMap};
use super::FemError;
use crate::mesh::{Mesh, LOCAL_EDGES, LOCAL_FACES};

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    basis: Arc<ReferenceBasis>,
    dofmap: DofMap,
}

/// Basis tables at a fixed set of reference points, one per vertex ordering
/// occurring in the mesh.
#[derive(Debug, Clone)]
pub struct ElementTables {
    pub points: Vec<[f64; 3]>,
    tables: Vec<Option<BasisTable>>,
}

impl ElementTables {
    pub fn get(&self, o: Orientation) -> &BasisTable {
        self.tables[o.index()]
            .as_ref()
            .expect("table built for every ordering present in the mesh")
    }
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, basis: Arc<ReferenceBasis>) -> Self {
        let dofmap = build_dof_map(&mesh, &basis);
        Self {
            mesh,
            basis,
            dofmap,
        }
    }

    pub fn from_parts(
        mesh: Arc<Mesh>,
        basis: Arc<ReferenceBasis>,
        dofmap: DofMap,
    ) -> Result<Self, FemError> {
        if dofmap.local_dim() != basis.dim() || dofmap.num_elements() != mesh.num_tets() {
            return Err(FemError::DofMapMismatch {
                expected: basis.dim(),
                found: dofmap.local_dim(),
            });
        }
        Ok(Self {
            mesh,
            basis,
            dofmap,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &Arc<ReferenceBasis> {
        &self.basis
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn ndofs(&self) -> usize {
        self.dofmap.ndofs()
    }

    /// A point for every DOF: the centroid of the mesh entity it is attached to.
    pub fn dof_points(&self) -> Vec<[f64; 3]> {
        let l = self.dofmap.layout();
        let mut out = vec![[f64::NAN; 3]; self.ndofs()];
        let centroid = |pts: &[[f64; 3]]| -> [f64; 3] {
            let s = 1.0 / pts.len() as f64;
            std::array::from_fn(|a| pts.iter().map(|p| p[a]).sum::<f64>() * s)
        };
        for t in 0..self.mesh.num_tets() {
            let x = self.mesh.tet_points(t);
            let mut entity_points: Vec<[f64; 3]> = Vec::with_capacity(l.local_dim());
            for v in x {
                entity_points.extend(std::iter::repeat_n(v, l.vertex));
            }
            for e in LOCAL_EDGES {
                entity_points.extend(std::iter::repeat_n(centroid(&[x[e[0]], x[e[1]]]), l.edge));
            }
            for f in LOCAL_FACES {
                entity_points.extend(std::iter::repeat_n(
                    centroid(&[x[f[0]], x[f[1]], x[f[2]]]),
                    l.face,
                ));
            }
            entity_points.extend(std::iter::repeat_n(centroid(&x), l.interior));
            for (&d, p) in self.dofmap.element_dofs(t).iter().zip(entity_points) {
                if out[d][0].is_nan() {
                    out[d] = p;
                }
            }
        }
        out
    }

    /// Orderings present in the mesh, by index.
    pub fn orientations_present(&self) -> Vec<bool> {
        let mut present = vec![false; 24];
        for t in 0..self.mesh.num_tets() {
            present[self.dofmap.orientation(t).index()] = true;
        }
        present
    }

    pub fn tables(&self, points: &[[f64; 3]]) -> ElementTables {
        let tables = self
            .orientations_present()
            .into_iter()
            .enumerate()
            .map(|(i, used)| used.then(|| self.basis.tabulate(Orientation::from_index(i), points)))
            .collect();
        ElementTables {
            points: points.to_vec(),
            tables,
        }
    }

    /// Physical values and curls (vector spaces) or gradients (scalar spaces) of
    /// the element restriction of `coeffs` at the table points. Scalar values are
    /// returned in the first component.
    pub fn eval_element(
        &self,
        t: usize,
        tables: &ElementTables,
        coeffs: &[c64],
    ) -> (Vec<[c64; 3]>, Vec<[c64; 3]>) {
        self.eval_element_table(t, tables.get(self.dofmap.orientation(t)), coeffs)
    }

    /// As [`FeSpace::eval_element`] with the table for this element's ordering.
    pub fn eval_element_table(
        &self,
        t: usize,
        table: &BasisTable,
        coeffs: &[c64],
    ) -> (Vec<[c64; 3]>, Vec<[c64; 3]>) {
        let em = self.mesh.map(t);
        let dofs = self.dofmap.element_dofs(t);
        let local: Vec<c64> = dofs.iter().map(|&d| coeffs[d]).collect();
        let vector = self.basis.family().is_vector();
        let vc = self.basis.value_components();
        let g = em.inverse_transpose();
        let f = em.forward();
        let inv_det = 1.0 / em.det;
        let mut values = Vec::with_capacity(table.npts);
        let mut derivs = Vec::with_capacity(table.npts);
        for q in 0..table.npts {
            let mut v = [c64::new(0.0, 0.0); 3];
            let mut d = [c64::new(0.0, 0.0); 3];
            for (i, c) in local.iter().enumerate() {
                for k in 0..vc {
                    v[k] += c * table.values[(q * vc + k, i)];
                }
                for k in 0..3 {
                    d[k] += c * table.derivs[(q * 3 + k, i)];
                }
            }
            if vector {
                values.push(cmat_vec(&g, &v));
                derivs.push(cmat_vec(&f, &d).map(|x| x * inv_det));
            } else {
                values.push(v);
                derivs.push(cmat_vec(&g, &d));
            }
        }
        (values, derivs)
    }
}

#[inline]
pub(crate) fn cmat_vec(m: &[[f64; 3]; 3], v: &[c64; 3]) -> [c64; 3] {
    [
        v[0] * m[0][0] + v[1] * m[0][1] + v[2] * m[0][2],
        v[0] * m[1][0] + v[1] * m[1][1] + v[2] * m[1][2],
        v[0] * m[2][0] + v[1] * m[2][1] + v[2] * m[2][2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{nedelec_basis, Family};
    use crate::mesh::build_structured_cube_mesh;

    #[test]
    fn whitney_dof_points_are_edge_midpoints() {
        let mesh = Arc::new(build_structured_cube_mesh(2, None).unwrap());
        let space = FeSpace::new(
            mesh.clone(),
            Arc::new(nedelec_basis(Family::NedelecI, 0).unwrap()),
        );
        let key = |p: &[f64; 3]| p.map(|c| (c * 4.0).round() as i64);
        let mut got: Vec<_> = space.dof_points().iter().map(key).collect();
        let mut want: Vec<_> = mesh
            .edges()
            .iter()
            .map(|&[a, b]| {
                let (x, y) = (mesh.vertices()[a], mesh.vertices()[b]);
                key(&std::array::from_fn(|i| 0.5 * (x[i] + y[i])))
            })
            .collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn every_dof_gets_a_point_inside_the_cube() {
        let mesh = Arc::new(build_structured_cube_mesh(1, None).unwrap());
        for p in 1..=3 {
            let space = FeSpace::new(
                mesh.clone(),
                Arc::new(nedelec_basis(Family::NedelecII, p).unwrap()),
            );
            let pts = space.dof_points();
            assert_eq!(pts.len(), space.ndofs());
            assert!(pts.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
        }
    }
}
