//! Thin-film energies on the rescaled slab `Σ × (−1/2, 1/2)`, `Σ = (0,1)²`,
//! for deformations `u(x, x₃) = v(x) + x₃ φ(x) (+ x₃² w(x))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::PlanarDensity;
use crate::energy::{fiber_relax, fiber_relax_constrained, FiberSolverConfig, StoredEnergy};
use crate::error::{Error, Result};
use crate::quadrature::{GaussLegendre, PlanarRule};
use crate::tensor::{adjoin_column, outer_32, ExtendedEnergy, Mat32, Vec2, Vec3};

/// Closed-form vector fields on `Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Field {
    /// `offset + gradient · x`.
    Affine { offset: Vec3, gradient: Mat32 },
    Constant { value: Vec3 },
    /// `base + amplitude · sin(2π k·x)`.
    Sine { base: Vec3, amplitude: Vec3, wavevector: Vec2 },
}

impl Field {
    /// `x ↦ (x₁, x₂, 0)`.
    pub fn identity_embedding() -> Self {
        Field::Affine {
            offset: Vec3::ZERO,
            gradient: Mat32::IDENTITY,
        }
    }

    pub fn value(&self, x: Vec2) -> Vec3 {
        match self {
            Field::Affine { offset, gradient } => *offset + gradient.apply(x),
            Field::Constant { value } => *value,
            Field::Sine {
                base,
                amplitude,
                wavevector,
            } => *base + amplitude.scale((2.0 * PI * wavevector.dot(x)).sin()),
        }
    }

    pub fn gradient(&self, x: Vec2) -> Mat32 {
        match self {
            Field::Affine { gradient, .. } => *gradient,
            Field::Constant { .. } => Mat32::ZERO,
            Field::Sine {
                amplitude, wavevector, ..
            } => outer_32(*amplitude, wavevector.scale(2.0 * PI * (2.0 * PI * wavevector.dot(x)).cos())),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Field::Constant { .. } => true,
            Field::Affine { gradient, .. } => *gradient == Mat32::ZERO,
            Field::Sine { amplitude, wavevector, .. } => *amplitude == Vec3::ZERO || *wavevector == Vec2::default(),
        }
    }
}

/// `u(x, x₃) = v(x) + x₃ φ(x) + x₃² w(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FilmAnsatz {
    pub v: Field,
    pub phi: Field,
    #[serde(default)]
    pub w: Option<Field>,
}

impl FilmAnsatz {
    pub fn new(v: Field, phi: Field) -> Self {
        FilmAnsatz { v, phi, w: None }
    }

    /// `∇u(x, εy)` on the rescaled slab.
    pub fn deformation_gradient(&self, x: Vec2, eps: f64, y: f64) -> crate::tensor::Mat33 {
        let x3 = eps * y;
        let mut planar = self.v.gradient(x) + self.phi.gradient(x).scale(x3);
        let mut normal = self.phi.value(x);
        if let Some(w) = &self.w {
            planar += w.gradient(x).scale(x3 * x3);
            normal = normal + w.value(x).scale(2.0 * x3);
        }
        adjoin_column(&planar, normal)
    }

    pub fn value(&self, x: Vec2, x3: f64) -> Vec3 {
        let mut u = self.v.value(x) + self.phi.value(x).scale(x3);
        if let Some(w) = &self.w {
            u = u + w.value(x).scale(x3 * x3);
        }
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FilmQuadrature {
    pub planar_order: usize,
    /// Subsquares per side of `Σ`.
    pub planar_cells: usize,
    pub transverse_order: usize,
}

impl Default for FilmQuadrature {
    fn default() -> Self {
        FilmQuadrature {
            planar_order: 4,
            planar_cells: 4,
            transverse_order: 2,
        }
    }
}

impl FilmQuadrature {
    pub fn validate(&self) -> Result<()> {
        if self.planar_order == 0 || self.planar_cells == 0 || self.transverse_order == 0 {
            return Err(Error::InvalidArgument(format!("quadrature orders must be at least 1: {self:?}")));
        }
        Ok(())
    }

    pub fn planar_rule(&self) -> PlanarRule {
        PlanarRule::unit_square(self.planar_order, self.planar_cells)
    }

    /// Nodes in `[−1/2, 1/2]`, weights summing to 1.
    pub fn transverse_rule(&self) -> Vec<(f64, f64)> {
        GaussLegendre::new(self.transverse_order).on_interval(-0.5, 0.5).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlabNode {
    pub x: Vec2,
    /// Rescaled transverse coordinate in `[−1/2, 1/2]`.
    pub y: f64,
    pub det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilmEnergy {
    pub value: ExtendedEnergy,
    pub min_det: f64,
    /// First quadrature node with `det ≤ 0`, if any.
    pub offending: Option<SlabNode>,
}

/// `(1/ε) ∫_{Σ_ε} W(∇u)` evaluated on the rescaled slab.
pub fn film_energy_detail(w: &StoredEnergy, u: &FilmAnsatz, eps: f64, quad: &FilmQuadrature) -> Result<FilmEnergy> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("thickness ε must be positive, got {eps}")));
    }
    quad.validate()?;
    let transverse = quad.transverse_rule();
    // accumulate deviations from the first nodal value so that constant
    // integrands come out exact despite rounding in the weights
    let mut reference = None;
    let mut total = 0.0;
    let mut min_det = f64::INFINITY;
    let mut offending = None;
    for (x, wx) in quad.planar_rule().points {
        for &(y, wy) in &transverse {
            let f = u.deformation_gradient(x, eps, y);
            let det = f.det();
            min_det = min_det.min(det);
            if det <= 0.0 {
                offending.get_or_insert(SlabNode { x, y, det });
                continue;
            }
            match w.eval(&f) {
                ExtendedEnergy::Finite(v) => {
                    let r = *reference.get_or_insert(v);
                    total += wx * wy * (v - r);
                }
                ExtendedEnergy::Infinite => {
                    offending.get_or_insert(SlabNode { x, y, det });
                }
            }
        }
    }
    let value = if offending.is_some() {
        ExtendedEnergy::Infinite
    } else {
        ExtendedEnergy::Finite(reference.unwrap_or(0.0) + total)
    };
    Ok(FilmEnergy {
        value,
        min_det,
        offending,
    })
}

pub fn film_energy(w: &StoredEnergy, u: &FilmAnsatz, eps: f64, quad: &FilmQuadrature) -> Result<ExtendedEnergy> {
    Ok(film_energy_detail(w, u, eps, quad)?.value)
}

/// `π_ε u = ∫_{−1/2}^{1/2} u(·, εy) dy` at the planar quadrature nodes.
pub fn midplane_average(u: &FilmAnsatz, eps: f64, quad: &FilmQuadrature) -> Result<Vec<(Vec2, Vec3)>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("thickness ε must be positive, got {eps}")));
    }
    quad.validate()?;
    let transverse = quad.transverse_rule();
    Ok(quad
        .planar_rule()
        .points
        .into_iter()
        .map(|(x, _)| {
            let avg = transverse
                .iter()
                .fold(Vec3::ZERO, |acc, &(y, wy)| acc + u.value(x, eps * y).scale(wy));
            (x, avg)
        })
        .collect())
}

/// `∫_Σ W(∇v | φ)`.
pub fn limit_energy(w: &StoredEnergy, u: &FilmAnsatz, quad: &FilmQuadrature) -> Result<ExtendedEnergy> {
    quad.validate()?;
    let mut total = ExtendedEnergy::ZERO;
    for (x, wx) in quad.planar_rule().points {
        total += w.eval_adjoined(&u.v.gradient(x), u.phi.value(x)).scale(wx)?;
    }
    Ok(total)
}

/// `∫_Σ f(∇v)`.
pub fn membrane_energy(v: &Field, density: &PlanarDensity, quad: &FilmQuadrature) -> Result<ExtendedEnergy> {
    quad.validate()?;
    let mut total = ExtendedEnergy::ZERO;
    for (x, wx) in quad.planar_rule().points {
        total += density.eval(&v.gradient(x)).scale(wx)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FilmConfig {
    pub epsilons: Vec<f64>,
    pub quadrature: FilmQuadrature,
    /// Transverse points per planar node in the determinant scan.
    pub scan_points: usize,
    pub bisection_steps: usize,
    /// Upper end of the `ε` range searched for the threshold.
    pub eta_cap: f64,
}

impl Default for FilmConfig {
    fn default() -> Self {
        FilmConfig {
            epsilons: vec![1e-1, 1e-2, 1e-3, 1e-4],
            quadrature: FilmQuadrature::default(),
            scan_points: 33,
            bisection_steps: 60,
            eta_cap: 1.0,
        }
    }
}

impl FilmConfig {
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::InvalidArgument("thicknesses must be nonempty and lie in (0, 1)".into()));
        }
        if self.scan_points < 2 || !(self.eta_cap > 0.0) {
            return Err(Error::InvalidArgument("scan_points must be ≥ 2 and eta_cap positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub epsilon: f64,
    pub energy: ExtendedEnergy,
    pub min_det: f64,
    pub limit: ExtendedEnergy,
    pub abs_gap: f64,
    pub below_threshold: bool,
    pub margin_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub j: u64,
    pub margin: f64,
    pub planar_min_det: f64,
    /// Largest `ε ≤ eta_cap` found with every scanned determinant `≥ 1/(4j)`.
    pub eta: f64,
    pub limit: ExtendedEnergy,
    pub rows: Vec<TraceRow>,
    /// Log-log slope of `abs_gap` against `ε` over rows with a positive gap.
    pub slope: Option<f64>,
    /// `max abs_gap / ε`.
    pub rate_constant: Option<f64>,
    pub margins_ok: bool,
}

impl ExperimentReport {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epsilon,energy,min_det,limit,abs_gap\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(r.epsilon),
                fmt_energy(r.energy),
                fmt_f64(r.min_det),
                fmt_energy(r.limit),
                fmt_f64(r.abs_gap)
            ));
        }
        out
    }
}

/// Seventeen significant digits, `inf` for infinity.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_energy(e: ExtendedEnergy) -> String {
    fmt_f64(e.value())
}

/// `min det ∇u(x, εy)` over planar quadrature nodes and a uniform grid in `y`.
pub fn slab_min_det(u: &FilmAnsatz, eps: f64, quad: &FilmQuadrature, scan_points: usize) -> f64 {
    let rule = quad.planar_rule();
    let mut min_det = f64::INFINITY;
    for (x, _) in &rule.points {
        for k in 0..scan_points {
            let y = -0.5 + k as f64 / (scan_points - 1) as f64;
            min_det = min_det.min(u.deformation_gradient(*x, eps, y).det());
        }
    }
    min_det
}

fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    (denom.abs() > 0.0).then(|| (n * sxy - sx * sy) / denom)
}

/// Recovery-sequence experiment for `u = v + x₃ φ` at constraint level `j`.
pub fn recovery_experiment(w: &StoredEnergy, u: &FilmAnsatz, j: u64, cfg: &FilmConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if j == 0 {
        return Err(Error::InvalidArgument("constraint level j must be positive".into()));
    }
    let quad = &cfg.quadrature;
    let jf = j as f64;
    let rule = quad.planar_rule();
    let mut planar_min = f64::INFINITY;
    let mut worst = Vec2::default();
    for (x, _) in &rule.points {
        let d = adjoin_column(&u.v.gradient(*x), u.phi.value(*x)).det();
        if d < planar_min {
            planar_min = d;
            worst = *x;
        }
    }
    if planar_min < 1.0 / (2.0 * jf) {
        return Err(Error::Precondition(format!(
            "det(∇v|φ) = {planar_min} < 1/(2j) = {} at x = ({}, {})",
            1.0 / (2.0 * jf),
            worst.x,
            worst.y
        )));
    }

    let margin = 1.0 / (4.0 * jf);
    let ok = |eps: f64| slab_min_det(u, eps, quad, cfg.scan_points) >= margin;
    let eta = if ok(cfg.eta_cap) {
        cfg.eta_cap
    } else {
        let (mut lo, mut hi) = (0.0, cfg.eta_cap);
        for _ in 0..cfg.bisection_steps {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };

    let limit = limit_energy(w, u, quad)?;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        let e = film_energy(w, u, eps, quad)?;
        let min_det = slab_min_det(u, eps, quad, cfg.scan_points);
        let abs_gap = match (e, limit) {
            (ExtendedEnergy::Finite(a), ExtendedEnergy::Finite(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        };
        rows.push(TraceRow {
            epsilon: eps,
            energy: e,
            min_det,
            limit,
            abs_gap,
            below_threshold: eps <= eta,
            margin_ok: min_det >= margin,
        });
    }
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.abs_gap > 0.0 && r.abs_gap.is_finite())
        .map(|r| (r.epsilon, r.abs_gap))
        .collect();
    let slope = loglog_slope(&fit);
    let rate_constant = fit.iter().map(|(e, g)| g / e).reduce(f64::max);
    let margins_ok = rows.iter().filter(|r| r.below_threshold).all(|r| r.margin_ok);
    Ok(ExperimentReport {
        j,
        margin,
        planar_min_det: planar_min,
        eta,
        limit,
        rows,
        slope,
        rate_constant,
        margins_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedRow {
    pub j: u64,
    /// `|Σ| · inf_{det(ξ|ζ) ≥ 1/j} W(ξ|ζ)`.
    pub constrained: ExtendedEnergy,
    /// Best limit energy over family members admissible at level `j`.
    pub family: ExtendedEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaGapReport {
    /// Best `lim_ε E_ε` over the director family.
    pub recovery: ExtendedEnergy,
    pub rows: Vec<ConstrainedRow>,
    /// `|Σ| · W₀(ξ)`.
    pub relaxed: ExtendedEnergy,
    pub recovery_above_relaxed: bool,
    pub constrained_monotone: bool,
    /// `constrained(j_max) − relaxed`.
    pub final_gap: f64,
}

/// Compares recovery energies of constant directors, the constrained fiber
/// problems and `W₀` for an affine `v` with gradient `ξ` on the unit square.
pub fn gamma_gap_report(
    w: &StoredEnergy,
    xi: &Mat32,
    directors: &[Vec3],
    js: &[u64],
    solver: &FiberSolverConfig,
    tol: f64,
) -> Result<GammaGapReport> {
    let m = xi.wedge().norm();
    if m < crate::energy::DEGENERACY_THRESHOLD {
        return Err(Error::Degenerate { wedge_norm: m });
    }
    if directors.is_empty() || js.is_empty() {
        return Err(Error::InvalidArgument("director family and j list must be nonempty".into()));
    }
    let quad = FilmQuadrature {
        planar_order: 1,
        planar_cells: 1,
        transverse_order: 2,
    };
    let v = Field::Affine {
        offset: Vec3::ZERO,
        gradient: *xi,
    };
    let limits: Vec<(f64, ExtendedEnergy)> = directors
        .iter()
        .map(|&z| {
            let det = adjoin_column(xi, z).det();
            let u = FilmAnsatz::new(v.clone(), Field::Constant { value: z });
            // constant director and affine v: E_ε does not depend on ε
            film_energy(w, &u, 1e-3, &quad).map(|e| (det, e))
        })
        .collect::<Result<_>>()?;
    let recovery = limits.iter().map(|&(_, e)| e).fold(ExtendedEnergy::Infinite, ExtendedEnergy::min);
    let relaxed = fiber_relax(w, xi, solver);
    let mut rows = Vec::with_capacity(js.len());
    for &j in js {
        let constrained = fiber_relax_constrained(w, xi, j, solver)?;
        let family = limits
            .iter()
            .filter(|&&(det, _)| det >= 1.0 / j as f64)
            .map(|&(_, e)| e)
            .fold(ExtendedEnergy::Infinite, ExtendedEnergy::min);
        rows.push(ConstrainedRow { j, constrained, family });
    }
    let recovery_above_relaxed = recovery.value() >= relaxed.value() - tol;
    let constrained_monotone = rows.windows(2).all(|p| p[1].constrained.value() <= p[0].constrained.value() + tol);
    let final_gap = rows.last().expect("nonempty").constrained.value() - relaxed.value();
    Ok(GammaGapReport {
        recovery,
        rows,
        relaxed,
        recovery_above_relaxed,
        constrained_monotone,
        final_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{make_barrier_energy, normal_field, BarrierProfile};

    fn barrier() -> StoredEnergy {
        make_barrier_energy(BarrierProfile::default(), 2.0).unwrap()
    }

    #[test]
    fn homogeneous_film_energy_is_three() {
        let u = FilmAnsatz::new(Field::identity_embedding(), Field::Constant { value: Vec3::E3 });
        for eps in [0.5, 1e-1, 1e-4] {
            let e = film_energy(&barrier(), &u, eps, &FilmQuadrature::default()).unwrap();
            assert_eq!(e, ExtendedEnergy::Finite(3.0));
        }
    }

    #[test]
    fn constant_director_is_thickness_independent() {
        let xi = Mat32::from_rows([[1.1, 0.2], [-0.1, 0.9], [0.3, 0.4]]);
        let phi = normal_field(&xi).unwrap().scale(1.3);
        let u = FilmAnsatz::new(
            Field::Affine {
                offset: Vec3::new(0.1, 0.2, 0.3),
                gradient: xi,
            },
            Field::Constant { value: phi },
        );
        let q = FilmQuadrature::default();
        let e1 = film_energy(&barrier(), &u, 0.3, &q).unwrap().value();
        let e2 = film_energy(&barrier(), &u, 1e-3, &q).unwrap().value();
        let expected = barrier().eval_adjoined(&xi, phi).value();
        assert!((e1 - expected).abs() < 1e-13 && (e2 - expected).abs() < 1e-13);
    }

    #[test]
    fn midplane_average_recovers_v() {
        let u = FilmAnsatz::new(
            Field::identity_embedding(),
            Field::Sine {
                base: Vec3::E3,
                amplitude: Vec3::new(0.1, 0.0, 0.05),
                wavevector: Vec2::new(1.0, 2.0),
            },
        );
        let q = FilmQuadrature::default();
        for (x, avg) in midplane_average(&u, 0.2, &q).unwrap() {
            let v = u.v.value(x);
            assert!((avg - v).norm() < 1e-15);
        }
        let wfield = Field::Constant {
            value: Vec3::new(1.0, -2.0, 0.5),
        };
        let uq = FilmAnsatz {
            w: Some(wfield.clone()),
            ..u
        };
        let eps = 0.2;
        for (x, avg) in midplane_average(&uq, eps, &q).unwrap() {
            let expected = uq.v.value(x) + wfield.value(x).scale(eps * eps / 12.0);
            assert!((avg - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn collapsed_film_reports_the_node() {
        let u = FilmAnsatz::new(Field::identity_embedding(), Field::Constant { value: Vec3::E1 });
        let d = film_energy_detail(&barrier(), &u, 0.1, &FilmQuadrature::default()).unwrap();
        assert!(d.value.is_infinite());
        assert!(d.offending.is_some());
    }

    #[test]
    fn recovery_with_sine_director() {
        let u = FilmAnsatz::new(
            Field::identity_embedding(),
            Field::Sine {
                base: Vec3::E3,
                amplitude: Vec3::new(0.1, 0.0, 0.1),
                wavevector: Vec2::new(1.0, 0.0),
            },
        );
        let r = recovery_experiment(&barrier(), &u, 1, &FilmConfig::default()).unwrap();
        assert!(r.eta > 0.0 && r.eta <= 1.0);
        assert!(r.margins_ok);
        assert!(r.rows.iter().all(|row| row.energy.is_finite()));
        assert!(r.rows.windows(2).all(|p| p[1].abs_gap <= p[0].abs_gap));
    }

    #[test]
    fn precondition_failure_names_the_node() {
        let u = FilmAnsatz::new(Field::identity_embedding(), Field::Constant { value: Vec3::E3.scale(0.1) });
        let err = recovery_experiment(&barrier(), &u, 1, &FilmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(msg) if msg.contains("at x")));
    }

    #[test]
    fn gamma_gap_canonical() {
        let xi = Mat32::IDENTITY;
        let directors: Vec<Vec3> = (1..=40).map(|k| Vec3::E3.scale(0.05 * k as f64)).collect();
        let r = gamma_gap_report(&barrier(), &xi, &directors, &[1, 2, 10, 1000], &FiberSolverConfig::default(), 1e-9)
            .unwrap();
        assert!((r.rows[0].constrained.value() - 3.0).abs() < 1e-9);
        assert!((r.rows[0].family.value() - 3.0).abs() < 1e-12);
        assert!(r.recovery_above_relaxed && r.constrained_monotone);
        assert!(r.final_gap.abs() < 1e-3);
    }

    #[test]
    fn membrane_energy_of_affine_map() {
        let w = barrier();
        let f = PlanarDensity::fiber(w, FiberSolverConfig::default());
        let e = membrane_energy(&Field::identity_embedding(), &f, &FilmQuadrature::default()).unwrap();
        assert!((e.value() - f.eval(&Mat32::IDENTITY).value()).abs() < 1e-12);
    }
}
