//! Stored energies `W(F) = h(det F) + |F|^p` and their fiber relaxation
//! `W₀(ξ) = inf_ζ W(ξ|ζ)`.
//!
//! For this family the out-of-plane column only enters through `det(ξ|ζ) =
//! (ξ₁∧ξ₂)·ζ` and `|ζ|`, so a tangential component of `ζ` can only raise the
//! energy. The three-dimensional infimum therefore collapses to a search over
//! `ζ = s·n/|n|`, `s > 0`, with `n = ξ₁∧ξ₂`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{adjoin_column, ExtendedEnergy, Mat32, Mat33, Vec3};

/// Wedge norms below this are treated as exactly degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// The determinant barrier `h`, infinite on `(-∞, 0]` and bounded on every
/// `[δ, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum BarrierProfile {
    /// `h(d) = κ (1/d − 1)²`.
    InverseSquare { kappa: f64 },
    /// `h(d) = κ d^(−q)`.
    Power { kappa: f64, exponent: f64 },
}

impl Default for BarrierProfile {
    fn default() -> Self {
        BarrierProfile::InverseSquare { kappa: 1.0 }
    }
}

impl BarrierProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BarrierProfile::InverseSquare { kappa } if kappa > 0.0 && kappa.is_finite() => Ok(()),
            BarrierProfile::Power { kappa, exponent }
                if kappa > 0.0 && kappa.is_finite() && exponent > 0.0 && exponent.is_finite() =>
            {
                Ok(())
            }
            other => Err(Error::InvalidArgument(format!(
                "barrier parameters must be positive and finite: {other:?}"
            ))),
        }
    }

    /// `h(d)` as a plain float, `+∞` for `d ≤ 0`.
    #[inline]
    pub fn value(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::INFINITY;
        }
        match *self {
            BarrierProfile::InverseSquare { kappa } => {
                let r = 1.0 / d - 1.0;
                kappa * r * r
            }
            BarrierProfile::Power { kappa, exponent } => kappa * d.powf(-exponent),
        }
    }

    pub fn eval(&self, d: f64) -> ExtendedEnergy {
        let v = self.value(d);
        if v.is_finite() {
            ExtendedEnergy::Finite(v)
        } else {
            ExtendedEnergy::Infinite
        }
    }

    /// `h'(d)` for `d > 0`.
    #[inline]
    pub fn derivative(&self, d: f64) -> f64 {
        match *self {
            BarrierProfile::InverseSquare { kappa } => -2.0 * kappa * (1.0 / d - 1.0) / (d * d),
            BarrierProfile::Power { kappa, exponent } => -exponent * kappa * d.powf(-exponent - 1.0),
        }
    }

    /// `r_δ = sup_{t ≥ δ} h(t)`.
    pub fn bound(&self, delta: f64) -> f64 {
        match *self {
            BarrierProfile::InverseSquare { kappa } => {
                let r = 1.0 / delta - 1.0;
                kappa * (r * r).max(1.0)
            }
            BarrierProfile::Power { kappa, exponent } => kappa * delta.powf(-exponent),
        }
    }
}

/// `W(F) = h(det F) + |F|^p` with Frobenius norm; coercive with `C = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredEnergy {
    profile: BarrierProfile,
    p: f64,
}

pub fn make_barrier_energy(profile: BarrierProfile, p: f64) -> Result<StoredEnergy> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent p must exceed 1, got {p}")));
    }
    profile.validate()?;
    Ok(StoredEnergy { profile, p })
}

impl Default for StoredEnergy {
    fn default() -> Self {
        StoredEnergy {
            profile: BarrierProfile::default(),
            p: 2.0,
        }
    }
}

impl StoredEnergy {
    pub fn profile(&self) -> BarrierProfile {
        self.profile
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn coercivity(&self) -> f64 {
        1.0
    }

    /// `c_δ` with `det F ≥ δ ⇒ W(F) ≤ c_δ (1 + |F|^p)`.
    pub fn growth_constant(&self, delta: f64) -> f64 {
        self.profile.bound(delta).max(1.0)
    }

    /// Constant `c` with `|ξ₁∧ξ₂| ≥ δ ⇒ W₀(ξ) ≤ c (1 + |ξ|^p)`.
    ///
    /// Probing with the unit normal gives `W₀(ξ) ≤ r_δ + (1 + |ξ|²)^{p/2}` and
    /// `(1 + |ξ|²)^{p/2} ≤ 2^{max(p/2−1, 0)} (1 + |ξ|^p)`.
    pub fn fiber_growth_constant(&self, delta: f64) -> f64 {
        self.profile.bound(delta) + 2f64.powf((self.p / 2.0 - 1.0).max(0.0))
    }

    #[inline]
    fn power_of_norm_sq(&self, norm_sq: f64) -> f64 {
        if self.p == 2.0 {
            norm_sq
        } else {
            norm_sq.powf(self.p / 2.0)
        }
    }

    pub fn eval(&self, f: &Mat33) -> ExtendedEnergy {
        let det = f.det();
        if det <= 0.0 {
            return ExtendedEnergy::Infinite;
        }
        ExtendedEnergy::Finite(self.profile.value(det) + self.power_of_norm_sq(f.norm_sq()))
    }

    /// `W(ξ|ζ)`.
    pub fn eval_adjoined(&self, xi: &Mat32, zeta: Vec3) -> ExtendedEnergy {
        self.eval(&adjoin_column(xi, zeta))
    }
}

/// Controls for the one-dimensional search behind [`fiber_relax`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSolverConfig {
    /// Upper end of the coarse grid on the normal coordinate `s`.
    pub radius: f64,
    /// Spacing of the uniform coarse grid.
    pub step: f64,
    /// Maximum number of section steps after the coarse scan.
    pub refine_stages: usize,
    /// Section ratio in `(0.5, 1)`; also the ratio of the geometric grid that
    /// resolves the neighbourhood of the lower end.
    pub contraction: f64,
    /// Absolute tolerance on the energy.
    pub tolerance: f64,
}

impl Default for FiberSolverConfig {
    fn default() -> Self {
        FiberSolverConfig {
            radius: 10.0,
            step: 0.1,
            refine_stages: 200,
            contraction: 0.618_033_988_749_894_9,
            tolerance: 1e-10,
        }
    }
}

impl FiberSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.radius > 0.0
            && self.step > 0.0
            && self.step <= self.radius
            && self.tolerance > 0.0
            && self.contraction > 0.5
            && self.contraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid fiber solver config {self:?}")))
        }
    }
}

/// Minimizer of `g` on `[lo, ∞)` (or `(lo, ∞)` when `lo_closed` is false).
/// `g` returns `+∞` where infeasible.
fn minimize_on_ray<G: Fn(f64) -> f64>(g: G, lo: f64, lo_closed: bool, cfg: &FiberSolverConfig) -> (f64, f64) {
    let mut grid: Vec<f64> = Vec::with_capacity(256);
    if lo_closed {
        grid.push(lo);
    }
    // geometric points approaching lo from above
    let mut off = cfg.step;
    while off > 1e-10 * lo.max(1.0) && grid.len() < 80 {
        off *= cfg.contraction;
        grid.push(lo + off);
    }
    let count = (cfg.radius / cfg.step).ceil() as usize;
    grid.extend((1..=count).map(|k| lo + k as f64 * cfg.step));
    grid.sort_by(|a, b| a.total_cmp(b));

    let values: Vec<f64> = grid.iter().map(|&s| g(s)).collect();
    let (mut best_idx, mut best) = (0, f64::INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v < best {
            best = v;
            best_idx = i;
        }
    }
    if !best.is_finite() {
        return (grid[0], f64::INFINITY);
    }
    let mut best_s = grid[best_idx];

    // minimizer beyond the scanned range: walk outward
    let (mut a, mut b);
    if best_idx + 1 == grid.len() {
        let mut prev = best_s - cfg.step;
        let mut cur = best_s;
        let mut cur_v = best;
        let mut stride = cfg.step;
        loop {
            stride *= 2.0;
            let next = cur + stride;
            let v = g(next);
            if !(v < cur_v) || stride > 1e12 {
                a = prev;
                b = next;
                break;
            }
            prev = cur;
            cur = next;
            cur_v = v;
        }
        best_s = cur;
        best = cur_v;
    } else {
        a = if best_idx == 0 { lo } else { grid[best_idx - 1] };
        b = grid[best_idx + 1];
    }

    // section search on [a, b]
    let r = cfg.contraction;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    for _ in 0..cfg.refine_stages {
        if fc < best {
            best = fc;
            best_s = c;
        }
        if fd < best {
            best = fd;
            best_s = d;
        }
        if (b - a) <= 1e-13 * (1.0 + best_s.abs())
            || (fc.is_finite() && fd.is_finite() && (fc - fd).abs() <= cfg.tolerance * 1e-6 && (b - a) <= 1e-6 * (1.0 + best_s))
        {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    if fc < best {
        best = fc;
        best_s = c;
    }
    if fd < best {
        best = fd;
        best_s = d;
    }
    if lo_closed {
        let v = g(lo);
        if v <= best {
            return (lo, v);
        }
    }
    (best_s, best)
}

/// Optimal normal coordinate and value of the reduced problem; `None` for
/// degenerate `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSolution {
    pub value: f64,
    /// Length of the optimal out-of-plane column along `n/|n|`.
    pub normal_coordinate: f64,
    pub wedge_norm: f64,
}

impl FiberSolution {
    /// The optimal third column `ζ*`.
    pub fn director(&self, xi: &Mat32) -> Vec3 {
        xi.wedge().scale(self.normal_coordinate / self.wedge_norm)
    }
}

fn reduced_objective<'a>(w: &'a StoredEnergy, xi: &Mat32, wedge_norm: f64) -> impl Fn(f64) -> f64 + 'a {
    let base = xi.norm_sq();
    move |s: f64| {
        let det = s * wedge_norm;
        if det <= 0.0 {
            return f64::INFINITY;
        }
        w.profile.value(det) + w.power_of_norm_sq(base + s * s)
    }
}

pub fn fiber_solve(w: &StoredEnergy, xi: &Mat32, cfg: &FiberSolverConfig) -> Option<FiberSolution> {
    let m = xi.wedge().norm();
    if m < DEGENERACY_THRESHOLD {
        return None;
    }
    let g = reduced_objective(w, xi, m);
    let (s, value) = minimize_on_ray(g, 0.0, false, cfg);
    Some(FiberSolution {
        value,
        normal_coordinate: s,
        wedge_norm: m,
    })
}

/// Upper approximation of `W₀(ξ) = inf_ζ W(ξ|ζ)`; `+∞` exactly when
/// `ξ₁∧ξ₂ = 0`.
pub fn fiber_relax(w: &StoredEnergy, xi: &Mat32, cfg: &FiberSolverConfig) -> ExtendedEnergy {
    match fiber_solve(w, xi, cfg) {
        Some(sol) if sol.value.is_finite() => ExtendedEnergy::Finite(sol.value),
        _ => ExtendedEnergy::Infinite,
    }
}

/// `∂W₀/∂ξ` by the envelope theorem at the computed minimizer.
pub fn fiber_relax_gradient(w: &StoredEnergy, xi: &Mat32, cfg: &FiberSolverConfig) -> Option<Mat32> {
    fiber_relax_with_gradient(w, xi, cfg).map(|(_, g)| g)
}

/// `W₀(ξ)` and its gradient from a single solve; `None` where `W₀ = +∞`.
pub fn fiber_relax_with_gradient(w: &StoredEnergy, xi: &Mat32, cfg: &FiberSolverConfig) -> Option<(f64, Mat32)> {
    let sol = fiber_solve(w, xi, cfg)?;
    if !sol.value.is_finite() {
        return None;
    }
    let n_hat = xi.wedge().scale(1.0 / sol.wedge_norm);
    let s = sol.normal_coordinate;
    let barrier = w.profile.derivative(s * sol.wedge_norm) * s;
    let norm_sq = xi.norm_sq() + s * s;
    let bulk = if w.p == 2.0 {
        2.0
    } else {
        w.p * norm_sq.powf(w.p / 2.0 - 1.0)
    };
    let [x1, x2] = xi.cols;
    let d1 = x2.cross(n_hat).scale(barrier) + x1.scale(bulk);
    let d2 = n_hat.cross(x1).scale(barrier) + x2.scale(bulk);
    Some((sol.value, Mat32::from_cols(d1, d2)))
}

/// Upper approximation of `inf { W(ξ|ζ) : det(ξ|ζ) ≥ 1/j }`.
pub fn fiber_relax_constrained(
    w: &StoredEnergy,
    xi: &Mat32,
    j: u64,
    cfg: &FiberSolverConfig,
) -> Result<ExtendedEnergy> {
    if j == 0 {
        return Err(Error::InvalidArgument("constraint level j must be positive".into()));
    }
    let m = xi.wedge().norm();
    if m < DEGENERACY_THRESHOLD {
        return Err(Error::Degenerate { wedge_norm: m });
    }
    let s_min = 1.0 / (j as f64 * m);
    // a feasible unconstrained minimizer solves the constrained problem too
    if let Some(sol) = fiber_solve(w, xi, cfg) {
        if sol.normal_coordinate >= s_min {
            return ExtendedEnergy::from_f64(sol.value);
        }
    }
    let g = reduced_objective(w, xi, m);
    let (_, value) = minimize_on_ray(|s| if s < s_min { f64::INFINITY } else { g(s) }, s_min, true, cfg);
    ExtendedEnergy::from_f64(value)
}

/// `Φ = (ξ₁∧ξ₂)/|ξ₁∧ξ₂|²`, the continuous selection with `det(ξ|Φ) = 1`.
pub fn normal_field(xi: &Mat32) -> Result<Vec3> {
    let n = xi.wedge();
    let m2 = n.norm_sq();
    if m2.sqrt() < DEGENERACY_THRESHOLD {
        return Err(Error::Degenerate { wedge_norm: m2.sqrt() });
    }
    Ok(n.scale(1.0 / m2))
}

/// Sampling plan for [`check_density_properties`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PropertySampleSpec {
    pub samples: usize,
    /// Entries of sampled `ξ` are uniform in `[-entry_range, entry_range]`.
    pub entry_range: f64,
    pub deltas: Vec<f64>,
    pub continuity_centers: usize,
    pub continuity_radii: Vec<f64>,
    pub probes_per_ball: usize,
    /// Minimum wedge norm at continuity centers.
    pub center_min_wedge: f64,
    pub seed: u64,
}

impl Default for PropertySampleSpec {
    fn default() -> Self {
        PropertySampleSpec {
            samples: 200,
            entry_range: 2.0,
            deltas: vec![0.1, 0.5, 1.0],
            continuity_centers: 10,
            continuity_radii: vec![1e-1, 1e-2, 1e-3, 1e-4],
            probes_per_ball: 8,
            center_min_wedge: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub delta: f64,
    pub constant: f64,
    pub checked: usize,
    pub violations: usize,
    /// `max W₀(ξ) / (1 + |ξ|^p)` over the checked samples.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityProbe {
    pub radius: f64,
    pub max_oscillation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    /// `min W₀(ξ)/|ξ|^p` over the samples.
    pub coercivity_margin: f64,
    pub growth: Vec<GrowthCheck>,
    pub continuity: Vec<ContinuityProbe>,
}

pub(crate) fn random_mat32<R: Rng>(rng: &mut R, range: f64) -> Mat32 {
    let mut e = [0.0; 6];
    for v in &mut e {
        *v = rng.gen_range(-range..=range);
    }
    Mat32::from_col_major(e)
}

/// Samples `ξ` with `|ξ₁∧ξ₂| ≥ min_wedge` by rejection.
pub fn sample_nondegenerate<R: Rng>(rng: &mut R, range: f64, min_wedge: f64) -> Mat32 {
    loop {
        let xi = random_mat32(rng, range);
        if xi.wedge().norm() >= min_wedge {
            return xi;
        }
    }
}

/// Spot checks of coercivity, conditional growth and continuity of `W₀`.
pub fn check_density_properties(
    w: &StoredEnergy,
    spec: &PropertySampleSpec,
    cfg: &FiberSolverConfig,
) -> Result<PropertyReport> {
    if spec.samples == 0 || spec.entry_range <= 0.0 {
        return Err(Error::InvalidArgument("property sampling needs samples > 0 and a positive range".into()));
    }
    if spec.deltas.iter().any(|&d| d <= 0.0) {
        return Err(Error::InvalidArgument("growth levels δ must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = w.p();

    let mut coercivity_margin = f64::INFINITY;
    for _ in 0..spec.samples {
        let xi = random_mat32(&mut rng, spec.entry_range);
        let value = fiber_relax(w, &xi, cfg).value();
        let denom = xi.norm().powf(p);
        if denom > 0.0 {
            coercivity_margin = coercivity_margin.min(value / denom);
        }
    }

    let mut growth = Vec::with_capacity(spec.deltas.len());
    for &delta in &spec.deltas {
        let constant = w.fiber_growth_constant(delta);
        let (mut violations, mut max_ratio) = (0, 0.0f64);
        for _ in 0..spec.samples {
            let xi = sample_nondegenerate(&mut rng, spec.entry_range, delta);
            let value = fiber_relax(w, &xi, cfg).value();
            let ratio = value / (1.0 + xi.norm().powf(p));
            max_ratio = max_ratio.max(ratio);
            if ratio > constant {
                violations += 1;
            }
        }
        growth.push(GrowthCheck {
            delta,
            constant,
            checked: spec.samples,
            violations,
            max_ratio,
        });
    }

    let centers: Vec<Mat32> = (0..spec.continuity_centers)
        .map(|_| sample_nondegenerate(&mut rng, spec.entry_range, spec.center_min_wedge))
        .collect();
    let directions: Vec<Mat32> = (0..spec.probes_per_ball)
        .map(|_| {
            let d = random_mat32(&mut rng, 1.0);
            d.scale(1.0 / d.norm().max(1e-300))
        })
        .collect();
    let mut continuity = Vec::with_capacity(spec.continuity_radii.len());
    for &radius in &spec.continuity_radii {
        let mut max_oscillation = 0.0f64;
        for c in &centers {
            let v0 = fiber_relax(w, c, cfg).value();
            for d in &directions {
                let v = fiber_relax(w, &(*c + d.scale(radius)), cfg).value();
                max_oscillation = max_oscillation.max((v - v0).abs());
            }
        }
        continuity.push(ContinuityProbe {
            radius,
            max_oscillation,
        });
    }

    Ok(PropertyReport {
        coercivity_margin,
        growth,
        continuity,
    })
}
