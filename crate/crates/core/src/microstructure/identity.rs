use crate::density::PlanarDensity;
use crate::error::{Error, Result};
use crate::microstructure::geometry::{region_measures, LaminateGeometry, RegionFamily};
use crate::energy::DEGENERACY_THRESHOLD;
use crate::tensor::{outer_32, ExtendedEnergy, Mat32, Vec2, Vec3};

/// Adds `weight · f(ξ)` with `f` evaluated only when the weight is positive.
fn accumulate(acc: &mut ExtendedEnergy, weight: f64, value: impl FnOnce() -> ExtendedEnergy) {
    if weight > 0.0 {
        *acc += value().scale(weight).expect("positive weight");
    }
}

/// `(1−t) f(ξ − t a⊗b) + t f(ξ + (1−t) a⊗b)`.
pub fn lamination_value(f: &PlanarDensity, xi: &Mat32, a: Vec2, b: Vec3, t: f64) -> ExtendedEnergy {
    let d = outer_32(b, a);
    let mut acc = ExtendedEnergy::ZERO;
    accumulate(&mut acc, 1.0 - t, || f.eval(&(*xi - d.scale(t))));
    accumulate(&mut acc, t, || f.eval(&(*xi + d.scale(1.0 - t))));
    acc
}

/// `b` itself when it is transverse to the normal `ν` of `ξ`, otherwise
/// `b + ν/ℓ`.
pub fn perturbed_direction(b: Vec3, xi: &Mat32, ell: u64) -> Result<Vec3> {
    if ell == 0 {
        return Err(Error::InvalidArgument("perturbation index must be positive".into()));
    }
    let wedge = xi.wedge();
    let wn = wedge.norm();
    if wn < DEGENERACY_THRESHOLD {
        return Err(Error::Degenerate { wedge_norm: wn });
    }
    let nu = wedge.scale(1.0 / wn);
    if b.dot(nu).abs() > 1e-12 * b.norm() {
        Ok(b)
    } else {
        Ok(b + nu.scale(1.0 / ell as f64))
    }
}

/// `∫_Y f(ξ + ∇(σₙ b)) dx`, summing area times value over the region
/// families on which `∇σₙ` is constant.
pub fn laminate_energy_quadrature(f: &PlanarDensity, xi: &Mat32, geom: &LaminateGeometry, b: Vec3) -> ExtendedEnergy {
    let measures = region_measures(geom);
    let mut acc = ExtendedEnergy::ZERO;
    for family in RegionFamily::ALL {
        let grad = geom.to_physical(family.local_gradient(geom.t()));
        accumulate(&mut acc, measures.area(family), || f.eval(&(*xi + outer_32(b, grad))));
    }
    acc
}

/// The same integral grouped as a two-point laminate on the bulk plus a
/// boundary-layer correction of weight `1/n`.
pub fn laminate_energy_closed_form(f: &PlanarDensity, xi: &Mat32, geom: &LaminateGeometry, b: Vec3) -> ExtendedEnergy {
    let t = geom.t();
    let nf = geom.n() as f64;
    let a = geom.a();
    let ap = geom.a_perp();
    let plus = || f.eval(&(*xi + outer_32(b, a).scale(1.0 - t)));

    let mut layer = ExtendedEnergy::ZERO;
    accumulate(&mut layer, t, plus);
    accumulate(&mut layer, (1.0 - t) / 2.0, || f.eval(&(*xi - outer_32(b, a + ap).scale(t))));
    accumulate(&mut layer, (1.0 - t) / 2.0, || f.eval(&(*xi - outer_32(b, a - ap).scale(t))));
    accumulate(&mut layer, 1.0, || f.eval(xi));

    let mut acc = ExtendedEnergy::ZERO;
    accumulate(&mut acc, 1.0 - 2.0 / nf, || lamination_value(f, xi, a, b, t));
    accumulate(&mut acc, 1.0 / nf, || layer);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{make_barrier_energy, BarrierProfile, FiberSolverConfig};

    fn rel_diff(x: ExtendedEnergy, y: ExtendedEnergy) -> f64 {
        match (x, y) {
            (ExtendedEnergy::Finite(a), ExtendedEnergy::Finite(b)) => (a - b).abs() / a.abs().max(b.abs()).max(1.0),
            (ExtendedEnergy::Infinite, ExtendedEnergy::Infinite) => 0.0,
            _ => f64::INFINITY,
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let f = PlanarDensity::double_well(Mat32::IDENTITY, Mat32::IDENTITY + outer_32(Vec3::E3, Vec2::new(1.0, 0.0)));
        let xi = Mat32::IDENTITY + outer_32(Vec3::E3, Vec2::new(0.4, 0.0));
        for n in [3, 5, 17] {
            for t in [0.0, 0.3, 1.0] {
                for angle in [0.0, 0.7] {
                    let g = LaminateGeometry::with_angle(n, t, angle).unwrap();
                    let b = Vec3::new(0.2, -0.1, 0.9);
                    let q = laminate_energy_quadrature(&f, &xi, &g, b);
                    let c = laminate_energy_closed_form(&f, &xi, &g, b);
                    assert!(rel_diff(q, c) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn infinite_branch_propagates_without_nan() {
        let w = make_barrier_energy(BarrierProfile::default(), 2.0).unwrap();
        let f = PlanarDensity::fiber(w, FiberSolverConfig::default());
        let g = LaminateGeometry::new(4, 0.5).unwrap();
        // a⊗b cancels the first column on one branch, making ξ rank-deficient
        let q = laminate_energy_quadrature(&f, &Mat32::IDENTITY, &g, Vec3::new(-2.0, 0.0, 0.0));
        assert!(q.is_infinite());
        let g0 = LaminateGeometry::new(4, 0.0).unwrap();
        let q0 = laminate_energy_quadrature(&f, &Mat32::IDENTITY, &g0, Vec3::new(0.0, 0.0, 1.0));
        assert!(q0.is_finite());
    }

    #[test]
    fn perturbation_only_when_tangential() {
        let xi = Mat32::IDENTITY;
        let b = Vec3::new(1.0, 0.5, 0.0);
        let b1 = perturbed_direction(b, &xi, 4).unwrap();
        assert_eq!(b1, Vec3::new(1.0, 0.5, 0.25));
        let b2 = Vec3::new(0.0, 0.0, 2.0);
        assert_eq!(perturbed_direction(b2, &xi, 4).unwrap(), b2);
        let flat = Mat32::from_cols(Vec3::E1, Vec3::E1);
        assert!(matches!(perturbed_direction(b, &flat, 1), Err(Error::Degenerate { .. })));
    }
}
