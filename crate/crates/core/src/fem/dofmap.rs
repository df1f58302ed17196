//! Global numbering of entity-attached DOFs.

use super::basis::{EntityLayout, Orientation, ReferenceBasis};
use crate::mesh::Mesh;

/// Local-to-global DOF numbering.
///
/// Edge and face functionals are defined relative to the ascending global
/// vertex order, so a shared DOF has the same meaning in every adjacent element
/// once that element uses the basis variant for its vertex ordering; the
/// ordering is recorded per element in place of sign flips.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    local_dim: usize,
    ndofs: usize,
    layout: EntityLayout,
    dofs: Vec<usize>,
    orientations: Vec<Orientation>,
}

pub fn build_dof_map(m: &Mesh, basis: &ReferenceBasis) -> DofMap {
    let layout = basis.layout();
    let nv = m.vertices().len();
    let ne = m.edges().len();
    let nf = m.faces().len();
    let edge_off = nv * layout.vertex;
    let face_off = edge_off + ne * layout.edge;
    let cell_off = face_off + nf * layout.face;
    let ndofs = cell_off + m.num_tets() * layout.interior;
    let local_dim = layout.local_dim();

    let mut dofs = Vec::with_capacity(m.num_tets() * local_dim);
    let mut orientations = Vec::with_capacity(m.num_tets());
    for (t, tet) in m.tets().iter().enumerate() {
        orientations.push(Orientation::from_global(tet));
        for &v in tet {
            dofs.extend((0..layout.vertex).map(|k| v * layout.vertex + k));
        }
        for &e in &m.tet_edges()[t] {
            dofs.extend((0..layout.edge).map(|k| edge_off + e * layout.edge + k));
        }
        for &f in &m.tet_faces()[t] {
            dofs.extend((0..layout.face).map(|k| face_off + f * layout.face + k));
        }
        dofs.extend((0..layout.interior).map(|k| cell_off + t * layout.interior + k));
    }
    DofMap {
        local_dim,
        ndofs,
        layout,
        dofs,
        orientations,
    }
}

impl DofMap {
    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn layout(&self) -> EntityLayout {
        self.layout
    }

    pub fn num_elements(&self) -> usize {
        self.orientations.len()
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.dofs[t * self.local_dim..(t + 1) * self.local_dim]
    }

    pub fn orientation(&self, t: usize) -> Orientation {
        self.orientations[t]
    }
}
