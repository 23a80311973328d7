//! Brute-force reference minimization of `ζ ↦ W(ξ|ζ)` over a cubic grid.
//!
//! Nothing here uses the normal-direction reduction of [`crate::energy`]: the
//! determinant is expanded by cofactors and every grid point that could beat
//! the incumbent is evaluated. Points are skipped only when `|F|^p` alone
//! already exceeds the incumbent, which leaves the grid minimum unchanged.

use serde::{Deserialize, Serialize};

use crate::energy::StoredEnergy;
use crate::tensor::{Mat32, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GridOracleConfig {
    /// The grid covers `[-half_width, half_width]³`.
    pub half_width: f64,
    pub step: f64,
    /// Step of the local grid placed around the best coarse point.
    pub refine_step: f64,
    /// Only admit points with `det(ξ|ζ) ≥ min_det` (0 means `det > 0`).
    pub min_det: f64,
}

impl Default for GridOracleConfig {
    fn default() -> Self {
        GridOracleConfig {
            half_width: 5.0,
            step: 0.01,
            refine_step: 0.001,
            min_det: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub argmin: Vec3,
    pub evaluations: u64,
}

fn cofactor_det(c1: Vec3, c2: Vec3, c3: Vec3) -> f64 {
    c1.x * (c2.y * c3.z - c3.y * c2.z) - c2.x * (c1.y * c3.z - c3.y * c1.z)
        + c3.x * (c1.y * c2.z - c2.y * c1.z)
}

struct Evaluator<'a> {
    w: &'a StoredEnergy,
    xi: &'a Mat32,
    base_sq: f64,
    min_det: f64,
}

impl Evaluator<'_> {
    #[inline]
    fn eval(&self, zeta: Vec3) -> f64 {
        let det = cofactor_det(self.xi.cols[0], self.xi.cols[1], zeta);
        if det <= 0.0 || det < self.min_det {
            return f64::INFINITY;
        }
        let norm_sq = self.base_sq + zeta.x * zeta.x + zeta.y * zeta.y + zeta.z * zeta.z;
        self.w.profile().value(det) + norm_sq.powf(self.w.p() / 2.0)
    }
}

/// Grid minimum of `W(ξ|ζ)` followed by one local refinement of the best
/// point.
pub fn grid_fiber_minimum(w: &StoredEnergy, xi: &Mat32, cfg: &GridOracleConfig) -> OracleResult {
    let ev = Evaluator {
        w,
        xi,
        base_sq: xi.norm_sq(),
        min_det: cfg.min_det,
    };
    let n = (cfg.half_width / cfg.step).round() as i64;
    let coord = |i: i64| i as f64 * cfg.step;
    let p = w.p();
    let mut evaluations = 0u64;

    // incumbent from a sub-lattice of the same grid
    let stride = ((0.1 / cfg.step).round() as i64).max(1);
    let mut best = f64::INFINITY;
    let mut best_z = Vec3::ZERO;
    let mut i = -n;
    while i <= n {
        let mut j = -n;
        while j <= n {
            let mut k = -n;
            while k <= n {
                let z = Vec3::new(coord(i), coord(j), coord(k));
                let v = ev.eval(z);
                evaluations += 1;
                if v < best {
                    best = v;
                    best_z = z;
                }
                k += stride;
            }
            j += stride;
        }
        i += stride;
    }

    // full grid with exact pruning on |F|^p ≥ incumbent
    for i in -n..=n {
        let x = coord(i);
        for j in -n..=n {
            let y = coord(j);
            let planar_sq = ev.base_sq + x * x + y * y;
            if planar_sq.powf(p / 2.0) >= best {
                continue;
            }
            let z_max_sq = best.powf(2.0 / p) - planar_sq;
            let k_max = ((z_max_sq.max(0.0).sqrt() / cfg.step).ceil() as i64).min(n);
            for k in -k_max..=k_max {
                let z = Vec3::new(x, y, coord(k));
                let v = ev.eval(z);
                evaluations += 1;
                if v < best {
                    best = v;
                    best_z = z;
                }
            }
        }
    }

    // local refinement on a finer grid spanning one coarse cell each way
    let m = (cfg.step / cfg.refine_step).round() as i64;
    let center = best_z;
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let z = center
                    + Vec3::new(
                        i as f64 * cfg.refine_step,
                        j as f64 * cfg.refine_step,
                        k as f64 * cfg.refine_step,
                    );
                let v = ev.eval(z);
                evaluations += 1;
                if v < best {
                    best = v;
                    best_z = z;
                }
            }
        }
    }

    OracleResult {
        value: best,
        argmin: best_z,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{make_barrier_energy, BarrierProfile};

    #[test]
    fn coarse_oracle_on_canonical_matrix() {
        let w = make_barrier_energy(BarrierProfile::default(), 2.0).unwrap();
        let cfg = GridOracleConfig {
            half_width: 2.0,
            step: 0.05,
            refine_step: 0.005,
            min_det: 0.0,
        };
        let r = grid_fiber_minimum(&w, &Mat32::IDENTITY, &cfg);
        assert!((r.value - 2.669_5).abs() < 2e-3, "{}", r.value);
        assert!(r.argmin.x.abs() < 0.01 && r.argmin.y.abs() < 0.01);
    }

    #[test]
    fn constrained_oracle_respects_determinant_floor() {
        let w = make_barrier_energy(BarrierProfile::default(), 2.0).unwrap();
        let cfg = GridOracleConfig {
            half_width: 2.0,
            step: 0.05,
            refine_step: 0.005,
            min_det: 1.0,
        };
        let r = grid_fiber_minimum(&w, &Mat32::IDENTITY, &cfg);
        assert!((r.value - 3.0).abs() < 1e-9);
        assert!(r.argmin.z >= 1.0);
    }
}
