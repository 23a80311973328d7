//! Numerical toolkit for the membrane energy density obtained from
//! three-dimensional elasticity under the orientation constraint `det ∇u > 0`.
//!
//! * [`energy`]: barrier stored energies and the fiber relaxation `W₀`.
//! * [`envelopes`]: sequential lamination `R_i W₀` and cell-problem estimates
//!   of the quasiconvex envelope.
//! * [`microstructure`]: the explicit zig-zag laminates, their energies and
//!   dyadic covers.
//! * [`thin_film`]: thin-film energies, midplane averages and recovery
//!   experiments.
//! * [`runner`]: configuration-driven experiments behind the `membrane` CLI.

pub mod density;
pub mod energy;
pub mod envelopes;
pub mod error;
pub mod microstructure;
pub mod oracle;
pub mod quadrature;
pub mod runner;
pub mod tensor;
pub mod thin_film;

pub use density::{PlanarDensity, Provenance};
pub use energy::{
    fiber_relax, fiber_relax_constrained, make_barrier_energy, normal_field, BarrierProfile,
    FiberSolverConfig, StoredEnergy,
};
pub use error::{Error, Result};
pub use tensor::{adjoin_column, cross_product, outer_32, ExtendedEnergy, Mat32, Mat33, Vec2, Vec3};
