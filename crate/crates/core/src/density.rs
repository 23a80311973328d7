//! Evaluatable densities on 3×2 matrices.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::energy::{fiber_relax, fiber_relax_with_gradient, FiberSolverConfig, StoredEnergy};
use crate::tensor::{ExtendedEnergy, Mat32};

type EvalFn = dyn Fn(&Mat32) -> ExtendedEnergy + Send + Sync;
type GradFn = dyn Fn(&Mat32) -> Option<(f64, Mat32)> + Send + Sync;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Provenance {
    BaseFiber,
    Laminated(usize),
    CellEstimate,
    Synthetic(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::BaseFiber => f.write_str("base-W0"),
            Provenance::Laminated(i) => write!(f, "laminated({i})"),
            Provenance::CellEstimate => f.write_str("cell-estimate"),
            Provenance::Synthetic(name) => write!(f, "synthetic({name})"),
        }
    }
}

/// A nonnegative extended-real density `f: M³ˣ² → [0, +∞]`, optionally with
/// an analytic gradient. Cloning shares the evaluator.
#[derive(Clone)]
pub struct PlanarDensity {
    eval: Arc<EvalFn>,
    gradient: Option<Arc<GradFn>>,
    provenance: Provenance,
}

impl fmt::Debug for PlanarDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarDensity")
            .field("provenance", &self.provenance)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl PlanarDensity {
    pub fn from_fn<F>(provenance: Provenance, eval: F) -> Self
    where
        F: Fn(&Mat32) -> ExtendedEnergy + Send + Sync + 'static,
    {
        PlanarDensity {
            eval: Arc::new(eval),
            gradient: None,
            provenance,
        }
    }

    /// Attaches `ξ ↦ (f(ξ), ∇f(ξ))`, returning `None` where `f` is infinite.
    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&Mat32) -> Option<(f64, Mat32)> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// The fiber relaxation `W₀` of a barrier energy.
    pub fn fiber(w: StoredEnergy, cfg: FiberSolverConfig) -> Self {
        PlanarDensity::from_fn(Provenance::BaseFiber, move |xi| fiber_relax(&w, xi, &cfg))
            .with_gradient(move |xi| fiber_relax_with_gradient(&w, xi, &cfg))
    }

    /// `min(|ξ − ξ_A|², |ξ − ξ_B|²)`.
    pub fn double_well(well_a: Mat32, well_b: Mat32) -> Self {
        PlanarDensity::from_fn(Provenance::Synthetic("double-well".into()), move |xi| {
            ExtendedEnergy::Finite((*xi - well_a).norm_sq().min((*xi - well_b).norm_sq()))
        })
        .with_gradient(move |xi| {
            let da = *xi - well_a;
            let db = *xi - well_b;
            let (na, nb) = (da.norm_sq(), db.norm_sq());
            Some(if na <= nb { (na, da.scale(2.0)) } else { (nb, db.scale(2.0)) })
        })
    }

    /// `|ξ|²`, a convex reference density.
    pub fn squared_norm() -> Self {
        PlanarDensity::from_fn(Provenance::Synthetic("squared-norm".into()), |xi| {
            ExtendedEnergy::Finite(xi.norm_sq())
        })
        .with_gradient(|xi| Some((xi.norm_sq(), xi.scale(2.0))))
    }

    #[inline]
    pub fn eval(&self, xi: &Mat32) -> ExtendedEnergy {
        (self.eval)(xi)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Gradient with respect to `ξ`; central differences when no analytic
    /// gradient is attached.
    pub fn gradient(&self, xi: &Mat32) -> Option<Mat32> {
        self.value_and_gradient(xi).map(|(_, g)| g)
    }

    /// `(f(ξ), ∇f(ξ))`, or `None` where `f(ξ)` or a difference stencil point
    /// is infinite.
    pub fn value_and_gradient(&self, xi: &Mat32) -> Option<(f64, Mat32)> {
        if let Some(g) = &self.gradient {
            return g(xi);
        }
        let value = self.eval(xi).finite_value()?;
        let base = xi.to_col_major();
        let mut out = [0.0; 6];
        for k in 0..6 {
            let h = 1e-6 * (1.0 + base[k].abs());
            let mut plus = base;
            let mut minus = base;
            plus[k] += h;
            minus[k] -= h;
            let fp = self.eval(&Mat32::from_col_major(plus)).finite_value()?;
            let fm = self.eval(&Mat32::from_col_major(minus)).finite_value()?;
            out[k] = (fp - fm) / (2.0 * h);
        }
        Some((value, Mat32::from_col_major(out)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Vec3;

    #[test]
    fn finite_difference_gradient_matches_analytic() {
        let a = Mat32::IDENTITY;
        let b = a + crate::tensor::outer_32(Vec3::E3, crate::tensor::Vec2::new(1.0, 0.0));
        let dw = PlanarDensity::double_well(a, b);
        let plain = PlanarDensity::from_fn(Provenance::Synthetic("copy".into()), {
            let dw = dw.clone();
            move |xi| dw.eval(xi)
        });
        let xi = Mat32::from_rows([[0.9, 0.1], [0.2, 1.1], [0.3, -0.2]]);
        let g1 = dw.gradient(&xi).unwrap();
        let g2 = plain.gradient(&xi).unwrap();
        assert!(g1.max_abs_diff(&g2) < 1e-6);
    }

    #[test]
    fn provenance_labels() {
        assert_eq!(Provenance::Laminated(2).to_string(), "laminated(2)");
        assert_eq!(PlanarDensity::squared_norm().provenance().to_string(), "synthetic(squared-norm)");
    }
}
