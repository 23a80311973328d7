//! Computable upper bounds for the rank-one convex and quasiconvex envelopes
//! of a planar density: Kohn–Strang lamination `R_i f` and a finite-element
//! cell problem.

mod cell;
mod lamination;
mod lbfgs;

pub use cell::{cell_quasiconvex_estimate, cell_quasiconvex_report, CellMesh, CellMeshSpec, CellReport, LaminateSeed, StartOutcome};
pub use lamination::{
    laminate_envelope, laminate_envelope_trace, laminate_step, laminated_density, rank_one_midpoint_check,
    CachePolicy, EnvelopeTrace, LaminateParams, LaminationSearchConfig, Laminator, SearchGrid,
};
