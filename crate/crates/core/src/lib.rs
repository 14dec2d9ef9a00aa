//! Sample-based quantum diagonalization of a one-dimensional cuprate chain
//! model: integrals, orbital bases, cluster-Jastrow circuits, sparse state
//! simulation, selected CI, and configuration recovery.

pub mod error;
pub mod fock;
pub mod lab;
pub mod linalg;
pub mod mitigate;
pub mod model;
pub mod orbitals;
pub mod qsim;
pub mod sci;
pub mod ucj;

pub use error::{Error, Result};
pub use model::{ChainSpec, DimerModel, Hamiltonian, SurrogateParams, TwoBody};
pub use fock::Determinant;
pub use orbitals::{BasisKind, OrbitalBasis, T2Amplitudes};
pub use qsim::{SampleSet, SectorState};
pub use sci::{DeterminantBasis, GroundState};
pub use ucj::{Circuit, Gate, Topology, UcjParams};
