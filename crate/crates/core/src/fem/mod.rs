//! Reference-element machinery: bases, quadrature, DOF maps and transforms.

pub mod basis;
pub mod dofmap;
pub mod poly;
pub mod quadrature;
pub mod space;
pub mod transform;

use thiserror::Error;

pub use basis::{
    h1_basis, nedelec_basis, BasisTable, EntityLayout, Family, Orientation, ReferenceBasis,
};
pub use dofmap::{build_dof_map, DofMap};
pub use quadrature::{quadrature_simplex, QuadratureRule};
pub use space::FeSpace;
pub use transform::covariant_pushforward;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("{family} elements of order {order} are not supported")]
    UnsupportedOrder { family: Family, order: usize },
    #[error("no quadrature rule of degree {degree} in dimension {dim}")]
    UnsupportedQuadrature { dim: usize, degree: usize },
    #[error("{family} order {order}: functional matrix has rank {rank}, expected {expected}")]
    NotUnisolvent {
        family: Family,
        order: usize,
        rank: usize,
        expected: usize,
    },
    #[error("DOF map has {found} DOFs per element but the basis has {expected}")]
    DofMapMismatch { expected: usize, found: usize },
}
