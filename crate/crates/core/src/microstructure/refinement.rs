use serde::{Deserialize, Serialize};

use crate::density::PlanarDensity;
use crate::error::{Error, Result};
use crate::microstructure::cover::{vitali_cover, Rect};
use crate::microstructure::geometry::LaminateGeometry;
use crate::microstructure::identity::{laminate_energy_quadrature, lamination_value, perturbed_direction};
use crate::tensor::{ExtendedEnergy, Mat32, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RefinementSpec {
    pub polygon: Rect,
    pub angle: f64,
    pub b: Vec3,
    pub t: f64,
    pub n_values: Vec<usize>,
    pub ell_values: Vec<u64>,
    pub q_values: Vec<u64>,
    #[serde(default = "default_residual")]
    pub residual_target: f64,
    #[serde(default = "default_max_level")]
    pub max_level: u32,
}

fn default_residual() -> f64 {
    1e-4
}

fn default_max_level() -> u32 {
    24
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementRow {
    pub n: usize,
    pub ell: u64,
    pub q: u64,
    pub t: f64,
    pub energy: ExtendedEnergy,
    /// `|V| · [(1−t) f(ξ − t a⊗b) + t f(ξ + (1−t) a⊗b)]`.
    pub closed_form: ExtendedEnergy,
    pub abs_err: f64,
    /// `|V| · f(ξ)`, the energy of the unmodulated state.
    pub affine_energy: ExtendedEnergy,
    pub covered: f64,
    pub squares: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub rows: Vec<RefinementRow>,
}

fn abs_gap(x: ExtendedEnergy, y: ExtendedEnergy) -> f64 {
    match (x, y) {
        (ExtendedEnergy::Finite(a), ExtendedEnergy::Finite(b)) => (a - b).abs(),
        (ExtendedEnergy::Infinite, ExtendedEnergy::Infinite) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Energy of the test function that places a rescaled zig-zag laminate in
/// every square of a dyadic cover of the `1/q`-interior of the polygon and is
/// affine elsewhere.
pub fn verify_cell_refinement(f: &PlanarDensity, xi: &Mat32, spec: &RefinementSpec) -> Result<RefinementReport> {
    if spec.n_values.is_empty() || spec.ell_values.is_empty() || spec.q_values.is_empty() {
        return Err(Error::InvalidArgument("refinement sequences must be non-empty".into()));
    }
    let a = crate::tensor::Vec2::from_angle(spec.angle);
    let area = spec.polygon.area();
    let base = f.eval(xi);
    let affine_energy = base.scale(area)?;
    let closed_form = lamination_value(f, xi, a, spec.b, spec.t).scale(area)?;
    let mut rows = Vec::new();
    for &q in &spec.q_values {
        if q == 0 {
            return Err(Error::InvalidArgument("q must be positive".into()));
        }
        let (covered, squares) = match spec.polygon.shrink(1.0 / q as f64) {
            Some(inner) => {
                let cover = vitali_cover(&inner, spec.residual_target, spec.max_level)?;
                (cover.covered, cover.squares.len())
            }
            None => (0.0, 0),
        };
        let outside = (area - covered).max(0.0);
        for &ell in &spec.ell_values {
            let b_ell = perturbed_direction(spec.b, xi, ell)?;
            for &n in &spec.n_values {
                let geom = LaminateGeometry::with_angle(n, spec.t, spec.angle)?;
                let mut energy = ExtendedEnergy::ZERO;
                if covered > 0.0 {
                    energy += laminate_energy_quadrature(f, xi, &geom, b_ell).scale(covered)?;
                }
                if outside > 0.0 {
                    energy += base.scale(outside)?;
                }
                rows.push(RefinementRow {
                    n,
                    ell,
                    q,
                    t: spec.t,
                    energy,
                    closed_form,
                    abs_err: abs_gap(energy, closed_form),
                    affine_energy,
                    covered,
                    squares,
                });
            }
        }
    }
    Ok(RefinementReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{outer_32, Vec2};

    #[test]
    fn error_decreases_along_the_sequence() {
        let wa = Mat32::IDENTITY;
        let wb = Mat32::IDENTITY + outer_32(Vec3::E3, Vec2::new(1.0, 0.0));
        let f = PlanarDensity::double_well(wa, wb);
        let xi = Mat32::IDENTITY + outer_32(Vec3::E3, Vec2::new(0.5, 0.0));
        let spec = RefinementSpec {
            polygon: Rect::unit_square(),
            angle: 0.0,
            b: Vec3::E3,
            t: 0.5,
            n_values: vec![4, 16, 64],
            ell_values: vec![1],
            q_values: vec![4, 16, 64],
            residual_target: 1e-4,
            max_level: 24,
        };
        let r = verify_cell_refinement(&f, &xi, &spec).unwrap();
        assert_eq!(r.rows.len(), 9);
        assert_eq!(r.rows[0].closed_form, ExtendedEnergy::ZERO);
        let last = r.rows.last().unwrap();
        let first = r.rows[0];
        assert!(last.abs_err < first.abs_err);
    }
}
