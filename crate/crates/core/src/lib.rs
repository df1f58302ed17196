//! Curl-conforming hp finite elements for the time-harmonic Maxwell equations
//! with impedance boundary conditions, plus tools to study pollution and
//! quasi-optimality of the discrete solutions.

pub mod analysis;
pub mod assembly;
pub mod coefficients;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod study;
pub mod verification;
