//! Zig-zag laminate test functions, their cell energies and the dyadic
//! covering used to refine them inside a polygon.

mod cover;
mod geometry;
mod identity;
mod refinement;

pub use cover::{vitali_cover, CellCover, DyadicSquare, Rect};
pub use geometry::{
    classify_and_sigma, embedded_sigma, region_measures, region_raster, sigma_lp_bound, sigma_lp_norm,
    LaminateGeometry, RegionFamily, RegionLabel, RegionMeasures, SigmaSample,
};
pub use identity::{
    lamination_value, laminate_energy_closed_form, laminate_energy_quadrature, perturbed_direction,
};
pub use refinement::{verify_cell_refinement, RefinementReport, RefinementRow, RefinementSpec};
