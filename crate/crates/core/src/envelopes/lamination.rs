use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{PlanarDensity, Provenance};
use crate::error::{Error, Result};
use crate::tensor::{outer_32, ExtendedEnergy, Mat32, Vec2, Vec3};

/// One lamination split `ξ ↦ {ξ − t a⊗b, ξ + (1−t) a⊗b}` with weights
/// `(1−t, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct LaminateParams {
    pub a: Vec2,
    pub b: Vec3,
    pub t: f64,
}

impl LaminateParams {
    pub fn new(a: Vec2, b: Vec3, t: f64) -> Result<Self> {
        let p = LaminateParams { a, b, t };
        p.validate()?;
        Ok(p)
    }

    pub fn from_angle(angle: f64, b: Vec3, t: f64) -> Self {
        LaminateParams {
            a: Vec2::from_angle(angle),
            b,
            t,
        }
    }

    /// The `t = 0` split, which leaves `ξ` unchanged.
    pub fn trivial() -> Self {
        LaminateParams::from_angle(0.0, Vec3::ZERO, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.a.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("lamination normal a must be a unit vector, |a| = {}", self.a.norm())));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::InvalidArgument(format!("volume fraction t must lie in [0, 1], got {}", self.t)));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidArgument("amplitude b must be finite".into()));
        }
        Ok(())
    }

    /// Angle of `a` in `[0, π)`; flipping `a` and `b` together leaves `a⊗b`
    /// unchanged.
    pub fn canonical(self) -> Self {
        let mut angle = self.a.y.atan2(self.a.x);
        let mut b = self.b;
        if angle < 0.0 {
            angle += PI;
            b = -b;
        }
        if angle >= PI {
            angle -= PI;
            b = -b;
        }
        LaminateParams::from_angle(angle, b, self.t)
    }

    pub fn angle(&self) -> f64 {
        self.a.y.atan2(self.a.x)
    }

    pub fn rank_one(&self) -> Mat32 {
        outer_32(self.b, self.a)
    }

    pub fn minus_point(&self, xi: &Mat32) -> Mat32 {
        *xi - self.rank_one().scale(self.t)
    }

    pub fn plus_point(&self, xi: &Mat32) -> Mat32 {
        *xi + self.rank_one().scale(1.0 - self.t)
    }
}

/// Candidate grid for one level of the search. `directions` counts unit
/// vectors on the upper hemisphere, the coordinate axes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SearchGrid {
    pub angles: usize,
    pub directions: usize,
    pub radii: usize,
    pub t_values: usize,
    /// Pattern-search polls around the best grid candidate.
    pub refine_polls: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid {
            angles: 6,
            directions: 7,
            radii: 3,
            t_values: 5,
            refine_polls: 40,
        }
    }
}

impl SearchGrid {
    pub fn nested_default() -> Self {
        SearchGrid {
            angles: 2,
            directions: 3,
            radii: 2,
            t_values: 2,
            refine_polls: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles == 0 || self.directions == 0 || self.radii == 0 || self.t_values == 0 {
            return Err(Error::InvalidArgument(format!("search grids must be nonempty: {self:?}")));
        }
        Ok(())
    }

    pub fn candidate_count(&self) -> usize {
        self.angles * self.directions * self.radii * self.t_values
    }

    fn angle_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.angles).map(move |k| PI * k as f64 / self.angles as f64)
    }

    fn direction_values(&self) -> Vec<Vec3> {
        let mut dirs = vec![Vec3::E3, Vec3::E1, Vec3::E2];
        dirs.truncate(self.directions);
        let extra = self.directions.saturating_sub(3);
        let golden = PI * (3.0 - 5f64.sqrt());
        for k in 0..extra {
            let z = 1.0 - (k as f64 + 0.5) / extra as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            dirs.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
        }
        dirs
    }

    fn radius_values(&self, radius: f64) -> impl Iterator<Item = f64> + '_ {
        (0..self.radii).map(move |k| radius * 0.5f64.powi((self.radii - 1 - k) as i32))
    }

    /// Symmetric about `1/2`, so `(a, b, t)` and `(a, −b, 1−t)` both appear
    /// and `b` only needs a hemisphere.
    fn t_grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.t_values).map(move |k| (k as f64 + 1.0) / (self.t_values as f64 + 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LaminationSearchConfig {
    /// Grid used for the level whose value is reported.
    pub top: SearchGrid,
    /// Grid used for the recursive evaluation of lower levels.
    pub nested: SearchGrid,
    /// Amplitudes `|b|` range up to `radius_scale · (1 + |ξ|)`.
    pub radius_scale: f64,
    /// Extra candidates tried at every level.
    pub seeds: Vec<LaminateParams>,
    pub cache_bound: usize,
    pub quantum: f64,
}

impl Default for LaminationSearchConfig {
    fn default() -> Self {
        LaminationSearchConfig {
            top: SearchGrid::default(),
            nested: SearchGrid::nested_default(),
            radius_scale: 4.0,
            seeds: Vec::new(),
            cache_bound: 2_000_000,
            quantum: 1e-9,
        }
    }
}

impl LaminationSearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.top.validate()?;
        self.nested.validate()?;
        if !(self.radius_scale > 0.0 && self.radius_scale.is_finite()) {
            return Err(Error::InvalidArgument("radius_scale must be positive".into()));
        }
        if !(self.quantum > 0.0) {
            return Err(Error::InvalidArgument("quantum must be positive".into()));
        }
        if self.cache_bound == 0 {
            return Err(Error::InvalidArgument("cache_bound must be positive".into()));
        }
        for s in &self.seeds {
            s.validate()?;
        }
        Ok(())
    }
}

/// What to do once the memo table holds `cache_bound` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachePolicy {
    /// Fail with [`Error::ResourceLimit`].
    Strict,
    /// Keep evaluating without storing new entries.
    Bypass,
}

type CacheKey = (usize, [i64; 6]);

/// Memoized evaluator of `R_i f`. Not shared between threads; each worker
/// builds its own.
pub struct Laminator<'a> {
    base: &'a PlanarDensity,
    cfg: &'a LaminationSearchConfig,
    policy: CachePolicy,
    cache: RefCell<HashMap<CacheKey, ExtendedEnergy>>,
    base_evaluations: Cell<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeTrace {
    /// `[R₁ f(ξ), …, R_depth f(ξ)]`.
    pub values: Vec<ExtendedEnergy>,
    pub params: Vec<LaminateParams>,
    pub base_value: ExtendedEnergy,
    pub base_evaluations: u64,
    pub cache_entries: usize,
}

impl<'a> Laminator<'a> {
    pub fn new(base: &'a PlanarDensity, cfg: &'a LaminationSearchConfig, policy: CachePolicy) -> Result<Self> {
        cfg.validate()?;
        Ok(Laminator {
            base,
            cfg,
            policy,
            cache: RefCell::new(HashMap::new()),
            base_evaluations: Cell::new(0),
        })
    }

    pub fn base_evaluations(&self) -> u64 {
        self.base_evaluations.get()
    }

    pub fn cache_entries(&self) -> usize {
        self.cache.borrow().len()
    }

    fn base_eval(&self, xi: &Mat32) -> ExtendedEnergy {
        self.base_evaluations.set(self.base_evaluations.get() + 1);
        self.base.eval(xi)
    }

    /// `R_level f(ξ)` with lower levels searched on the nested grid. The
    /// point is snapped to the quantization lattice before evaluation so that
    /// cached and fresh values agree bit for bit.
    pub fn value(&self, level: usize, xi: &Mat32) -> Result<ExtendedEnergy> {
        if level == 0 {
            return Ok(self.base_eval(xi));
        }
        let q = self.cfg.quantum;
        let raw = xi.to_col_major();
        let mut key = [0i64; 6];
        let mut snapped = [0.0; 6];
        for k in 0..6 {
            let idx = (raw[k] / q).round();
            key[k] = idx as i64;
            snapped[k] = idx * q;
        }
        if let Some(v) = self.cache.borrow().get(&(level, key)) {
            return Ok(*v);
        }
        let snapped = Mat32::from_col_major(snapped);
        let prev = self.value(level - 1, &snapped)?;
        let (v, _) = self.search(level, &snapped, &self.cfg.nested, prev)?;
        let mut cache = self.cache.borrow_mut();
        if cache.len() >= self.cfg.cache_bound {
            match self.policy {
                CachePolicy::Strict => {
                    return Err(Error::ResourceLimit(format!(
                        "lamination memo table reached its bound of {} entries",
                        self.cfg.cache_bound
                    )))
                }
                CachePolicy::Bypass => return Ok(v),
            }
        }
        cache.insert((level, key), v);
        Ok(v)
    }

    /// `(1−t) R_{level−1}(ξ − t a⊗b) + t R_{level−1}(ξ + (1−t) a⊗b)`, or
    /// `None` when a branch is infinite.
    fn candidate(&self, level: usize, xi: &Mat32, p: &LaminateParams) -> Result<Option<f64>> {
        let lower = self.value(level - 1, &p.minus_point(xi))?;
        let Some(lo) = lower.finite_value() else {
            return Ok(None);
        };
        let upper = self.value(level - 1, &p.plus_point(xi))?;
        let Some(hi) = upper.finite_value() else {
            return Ok(None);
        };
        Ok(Some((1.0 - p.t) * lo + p.t * hi))
    }

    /// Minimizes the one-step lamination functional for `R_level` at `ξ`.
    /// `trivial` is the value of the `t = 0` split, i.e. `R_{level−1} f(ξ)`.
    pub fn search(
        &self,
        level: usize,
        xi: &Mat32,
        grid: &SearchGrid,
        trivial: ExtendedEnergy,
    ) -> Result<(ExtendedEnergy, LaminateParams)> {
        assert!(level >= 1);
        let mut best_value = trivial;
        let mut best_params = LaminateParams::trivial();
        let mut best_split: Option<(f64, LaminateParams)> = None;
        let mut consider = |p: LaminateParams, v: Option<f64>| {
            if let Some(v) = v {
                if best_split.map_or(true, |(bv, _)| v < bv) {
                    best_split = Some((v, p));
                }
            }
        };

        for seed in &self.cfg.seeds {
            if seed.t > 0.0 && seed.t < 1.0 {
                consider(*seed, self.candidate(level, xi, seed)?);
            }
        }
        let radius = self.cfg.radius_scale * (1.0 + xi.norm());
        let dirs = grid.direction_values();
        for angle in grid.angle_values() {
            let a = Vec2::from_angle(angle);
            for d in &dirs {
                for r in grid.radius_values(radius) {
                    let b = d.scale(r);
                    for t in grid.t_grid() {
                        let p = LaminateParams { a, b, t };
                        consider(p, self.candidate(level, xi, &p)?);
                    }
                }
            }
        }

        if let Some((v, p)) = best_split {
            let (v, p) = self.pattern_search(level, xi, grid, radius, v, p)?;
            if ExtendedEnergy::Finite(v) < best_value {
                best_value = ExtendedEnergy::Finite(v);
                best_params = p;
            }
        }
        Ok((best_value, best_params.canonical_if_split()))
    }

    /// Compass search over `(angle, b, t)`, accepting the first improving
    /// poll point and halving the steps after a failed poll.
    fn pattern_search(
        &self,
        level: usize,
        xi: &Mat32,
        grid: &SearchGrid,
        radius: f64,
        mut value: f64,
        start: LaminateParams,
    ) -> Result<(f64, LaminateParams)> {
        let mut x = [start.angle(), start.b.x, start.b.y, start.b.z, start.t];
        let mut steps = [
            PI / (2.0 * grid.angles as f64),
            0.25 * start.b.norm().max(radius / 8.0),
            0.25 * start.b.norm().max(radius / 8.0),
            0.25 * start.b.norm().max(radius / 8.0),
            0.5 / (grid.t_values as f64 + 1.0),
        ];
        let to_params = |x: &[f64; 5]| LaminateParams::from_angle(x[0], Vec3::new(x[1], x[2], x[3]), x[4]);
        let mut params = to_params(&x);
        for _ in 0..grid.refine_polls {
            let mut improved = false;
            'poll: for k in 0..5 {
                for sign in [1.0, -1.0] {
                    let mut y = x;
                    y[k] += sign * steps[k];
                    if !(y[4] > 0.0 && y[4] < 1.0) {
                        continue;
                    }
                    let p = to_params(&y);
                    if let Some(v) = self.candidate(level, xi, &p)? {
                        if v < value {
                            value = v;
                            x = y;
                            params = p;
                            improved = true;
                            break 'poll;
                        }
                    }
                }
            }
            if !improved {
                for s in &mut steps {
                    *s *= 0.5;
                }
                if steps[4] < 1e-10 {
                    break;
                }
            }
        }
        Ok((value, params))
    }
}

impl LaminateParams {
    fn canonical_if_split(self) -> Self {
        if self.t > 0.0 {
            self.canonical()
        } else {
            self
        }
    }
}

/// `R₁ f(ξ)` and its split, searched on `cfg.top`. Never exceeds `f(ξ)`,
/// since the trivial split is always a candidate.
pub fn laminate_step(f: &PlanarDensity, xi: &Mat32, cfg: &LaminationSearchConfig) -> Result<(ExtendedEnergy, LaminateParams)> {
    let lam = Laminator::new(f, cfg, CachePolicy::Strict)?;
    let base = lam.value(0, xi)?;
    lam.search(1, xi, &cfg.top, base)
}

/// `R_i f(ξ)` for `i = 1..=depth`. The trivial split at level `i` takes the
/// reported `R_{i−1}` value, so the sequence is nonincreasing by
/// construction; lower levels at displaced points use `cfg.nested`.
pub fn laminate_envelope_trace(
    f: &PlanarDensity,
    xi: &Mat32,
    depth: usize,
    cfg: &LaminationSearchConfig,
    policy: CachePolicy,
) -> Result<EnvelopeTrace> {
    if depth == 0 {
        return Err(Error::InvalidArgument("lamination depth must be at least 1".into()));
    }
    let lam = Laminator::new(f, cfg, policy)?;
    let base_value = lam.value(0, xi)?;
    let mut prev = base_value;
    let mut values = Vec::with_capacity(depth);
    let mut params = Vec::with_capacity(depth);
    for level in 1..=depth {
        let (v, p) = lam.search(level, xi, &cfg.top, prev)?;
        values.push(v);
        params.push(p);
        prev = v;
    }
    Ok(EnvelopeTrace {
        values,
        params,
        base_value,
        base_evaluations: lam.base_evaluations(),
        cache_entries: lam.cache_entries(),
    })
}

pub fn laminate_envelope(
    f: &PlanarDensity,
    xi: &Mat32,
    depth: usize,
    cfg: &LaminationSearchConfig,
) -> Result<Vec<ExtendedEnergy>> {
    Ok(laminate_envelope_trace(f, xi, depth, cfg, CachePolicy::Strict)?.values)
}

/// `R_depth f` as a density. Each evaluation runs its own search with a
/// bypassing memo table.
pub fn laminated_density(f: PlanarDensity, depth: usize, cfg: LaminationSearchConfig) -> Result<PlanarDensity> {
    cfg.validate()?;
    if depth == 0 {
        return Err(Error::InvalidArgument("lamination depth must be at least 1".into()));
    }
    Ok(PlanarDensity::from_fn(Provenance::Laminated(depth), move |xi| {
        laminate_envelope_trace(&f, xi, depth, &cfg, CachePolicy::Bypass)
            .map(|t| *t.values.last().expect("depth ≥ 1"))
            .unwrap_or(ExtendedEnergy::Infinite)
    }))
}

/// Whether `f(ξ) ≤ (1−t) f(ξ − t a⊗b) + t f(ξ + (1−t) a⊗b) + tol`.
pub fn rank_one_midpoint_check(f: &PlanarDensity, xi: &Mat32, params: &LaminateParams, tol: f64) -> bool {
    let center = f.eval(xi);
    let combo = crate::microstructure::lamination_value(f, xi, params.a, params.b, params.t);
    match (center, combo) {
        (_, ExtendedEnergy::Infinite) => true,
        (ExtendedEnergy::Infinite, ExtendedEnergy::Finite(_)) => false,
        (ExtendedEnergy::Finite(c), ExtendedEnergy::Finite(v)) => c <= v + tol,
    }
}
