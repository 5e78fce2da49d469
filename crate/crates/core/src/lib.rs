//! Numerical constructions built from SIC fiducials: Weyl-Heisenberg
//! ensembles, derived projectors, Hadamard matrices, equiangular tight frames,
//! symmetric tight fusion frames, squared-phase matrices and restricted
//! defects.

pub mod defect;
pub mod error;
pub mod frames;
pub mod naimark;
pub mod numkernel;
pub mod phasemat;
pub mod sic;
pub mod stff;
pub mod whgroup;

pub use error::{Error, Result};
pub use numkernel::{ComplexMatrix, Tolerance, C64};
