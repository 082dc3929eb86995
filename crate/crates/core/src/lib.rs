//! Pure Hadamard states for Dirac fields on `I × S¹` with metric `−dt² + h(t,x)dx²`.
//!
//! The crate is organised bottom-up:
//!
//! * [`clifford`]: gamma matrices, the Hermitian form β and charge conjugation κ.
//! * [`modelspec`]: the expression language for `h`, `m`, `u` and grid sampling with dual-number derivatives.
//! * [`frames`]: Minkowski orthonormalization, frame Christoffel symbols and spin coefficients.
//! * [`psdo`]: the Fourier-truncated operator algebra (quantization, Hermitian calculus, decay profiles).
//! * [`reduction`]: the space-time Dirac operator and its reduction to `∂t − iH(t)`.
//! * [`projections`]: gap regularization, spectral projections and the adiabatic correction.
//! * [`evolution`]: Cauchy evolution and the Green time kernels.
//! * [`states`]: Cauchy covariances, vacuum and deformed states.
//! * [`microlocal`]: wrong-frequency leakage and intertwining defects.

pub mod clifford;
pub mod error;
pub mod evolution;
pub mod frames;
pub mod microlocal;
pub mod modelspec;
pub mod projections;
pub mod psdo;
pub mod reduction;
pub mod states;

pub mod timegrid;

pub use clifford::GammaRep;
pub use error::{Error, Result};
pub use evolution::{Evolution, EvolutionKernels, Integrator};
pub use modelspec::{ExprAst, MetricModel};
pub use num_complex::Complex64 as C64;
pub use projections::ProjectorFamily;
pub use psdo::{CMat, DecayProfile, Gram, SpatialOperator};
pub use reduction::{HamiltonianAssembler, ReducedHamiltonianFamily};
pub use states::StateBundle;
pub use timegrid::TimeGrid;
