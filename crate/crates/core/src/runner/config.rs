use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::PlanarDensity;
use crate::energy::{make_barrier_energy, BarrierProfile, FiberSolverConfig, PropertySampleSpec, StoredEnergy};
use crate::envelopes::{CellMeshSpec, LaminationSearchConfig};
use crate::error::{Error, Result};
use crate::microstructure::RefinementSpec;
use crate::oracle::GridOracleConfig;
use crate::tensor::{Mat32, Vec2, Vec3};
use crate::thin_film::{FilmAnsatz, FilmConfig, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fiber,
    Envelope,
    Cell,
    Micro,
    Film,
    GammaGap,
    Properties,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fiber => "fiber",
            ExperimentKind::Envelope => "envelope",
            ExperimentKind::Cell => "cell",
            ExperimentKind::Micro => "micro",
            ExperimentKind::Film => "film",
            ExperimentKind::GammaGap => "gamma-gap",
            ExperimentKind::Properties => "properties",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub barrier: BarrierProfile,
    pub p: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            barrier: BarrierProfile::default(),
            p: 2.0,
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<StoredEnergy> {
        make_barrier_energy(self.barrier, self.p)
    }
}

/// Density on 3×2 matrices used by the envelope, cell and micro experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `W₀` of the configured model.
    Fiber,
    DoubleWell { well_a: Mat32, well_b: Mat32 },
    SquaredNorm,
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Fiber
    }
}

impl DensitySpec {
    pub fn build(&self, w: StoredEnergy, solver: FiberSolverConfig) -> PlanarDensity {
        match self {
            DensitySpec::Fiber => PlanarDensity::fiber(w, solver),
            DensitySpec::DoubleWell { well_a, well_b } => PlanarDensity::double_well(*well_a, *well_b),
            DensitySpec::SquaredNorm => PlanarDensity::squared_norm(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DensitySpec::Fiber => "fiber",
            DensitySpec::DoubleWell { .. } => "double_well",
            DensitySpec::SquaredNorm => "squared_norm",
        }
    }
}

/// Explicit points followed by `samples` seeded draws with entries in
/// `[-entry_range, entry_range]` and `|ξ₁∧ξ₂| ≥ min_wedge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PointSpec {
    pub explicit: Vec<Mat32>,
    pub samples: usize,
    pub entry_range: f64,
    pub min_wedge: f64,
}

impl Default for PointSpec {
    fn default() -> Self {
        PointSpec {
            explicit: Vec::new(),
            samples: 10,
            entry_range: 1.5,
            min_wedge: 0.2,
        }
    }
}

impl PointSpec {
    fn validate(&self, path: &str) -> Result<()> {
        if self.explicit.is_empty() && self.samples == 0 {
            return Err(Error::config(format!("{path}.samples"), "no points: give explicit points or samples > 0"));
        }
        positive(self.entry_range, &format!("{path}.entry_range"))?;
        nonneg(self.min_wedge, &format!("{path}.min_wedge"))?;
        if self.samples > 0 && self.min_wedge >= self.entry_range * self.entry_range * 2.0 {
            return Err(Error::config(format!("{path}.min_wedge"), "unreachable with the given entry_range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FiberExperiment {
    pub samples: usize,
    pub entry_range: f64,
    pub min_wedge: f64,
    pub oracle: GridOracleConfig,
    pub tolerance: f64,
    pub degenerate_samples: usize,
    pub constrained_samples: usize,
    pub js: Vec<u64>,
    pub constrained_tolerance: f64,
    /// Expected constrained value at `ξ = (e₁|e₂)`, `j = 1`; `null` skips the check.
    pub canonical_value: Option<f64>,
    pub canonical_tolerance: f64,
}

impl Default for FiberExperiment {
    fn default() -> Self {
        FiberExperiment {
            samples: 20,
            entry_range: 1.5,
            min_wedge: 0.2,
            oracle: GridOracleConfig::default(),
            tolerance: 1e-3,
            degenerate_samples: 20,
            constrained_samples: 10,
            js: vec![1, 2, 5, 10, 100, 1000],
            constrained_tolerance: 1e-3,
            canonical_value: Some(3.0),
            canonical_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeExperiment {
    pub density: DensitySpec,
    pub points: PointSpec,
    pub depth: usize,
    pub search: LaminationSearchConfig,
    pub tolerance: f64,
    /// Every reported `R_depth` value must not exceed this.
    pub max_final: Option<f64>,
}

impl Default for EnvelopeExperiment {
    fn default() -> Self {
        EnvelopeExperiment {
            density: DensitySpec::Fiber,
            points: PointSpec::default(),
            depth: 3,
            search: LaminationSearchConfig::default(),
            tolerance: 1e-9,
            max_final: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CellExperiment {
    pub density: DensitySpec,
    pub points: PointSpec,
    pub mesh: CellMeshSpec,
    pub search: LaminationSearchConfig,
    /// Strip counts of the laminate seeds built from the depth-1 split.
    pub seed_strips: Vec<usize>,
    /// Allowed excess of the cell estimate over the depth-1 laminate value,
    /// relative to that value (to `f(ξ)` when it is zero).
    pub slack: f64,
    pub tolerance: f64,
}

impl Default for CellExperiment {
    fn default() -> Self {
        CellExperiment {
            density: DensitySpec::Fiber,
            points: PointSpec::default(),
            mesh: CellMeshSpec {
                m: 32,
                random_starts: 0,
                ..Default::default()
            },
            search: LaminationSearchConfig::default(),
            seed_strips: vec![4, 8],
            slack: 0.05,
            tolerance: 1e-9,
        }
    }
}

/// A density, an evaluation point and a lamination split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MicroCase {
    pub label: String,
    #[serde(default)]
    pub density: DensitySpec,
    pub xi: Mat32,
    #[serde(default)]
    pub angle: f64,
    pub b: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySweep {
    pub n_values: Vec<usize>,
    pub t_values: Vec<f64>,
    pub ell: u64,
    pub tolerance: f64,
}

impl Default for IdentitySweep {
    fn default() -> Self {
        IdentitySweep {
            n_values: vec![4, 8, 16],
            t_values: vec![0.25, 0.5, 0.75],
            ell: 1,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaSweep {
    pub n_min: usize,
    pub n_max: usize,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub order: usize,
    pub tolerance: f64,
}

impl Default for SigmaSweep {
    fn default() -> Self {
        SigmaSweep {
            n_min: 3,
            n_max: 32,
            t_values: vec![0.25, 0.5, 0.75],
            p_values: vec![2.0, 3.0],
            order: 6,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloCheck {
    pub samples: usize,
    /// `(n, t)` pairs to sample.
    pub geometries: Vec<(usize, f64)>,
    pub sigmas: f64,
}

impl Default for MonteCarloCheck {
    fn default() -> Self {
        MonteCarloCheck {
            samples: 1_000_000,
            geometries: vec![(4, 0.5), (7, 0.3)],
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LimitSweep {
    /// Index into `cases`.
    pub case: usize,
    pub t: f64,
    pub n_values: Vec<usize>,
    pub ell: u64,
    /// Accepted range of the fitted log-log slope.
    pub slope_range: (f64, f64),
    pub final_relative: f64,
}

impl Default for LimitSweep {
    fn default() -> Self {
        LimitSweep {
            case: 0,
            t: 0.5,
            n_values: vec![4, 8, 16, 32, 64],
            ell: 1000,
            slope_range: (-1.2, -0.8),
            final_relative: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RefinementCheck {
    /// Index into `cases`.
    pub case: usize,
    pub spec: RefinementSpec,
    #[serde(default = "default_final_relative")]
    pub final_relative: f64,
}

fn default_final_relative() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct MicroExperiment {
    pub cases: Vec<MicroCase>,
    pub identity: Option<IdentitySweep>,
    pub sigma: Option<SigmaSweep>,
    pub monte_carlo: Option<MonteCarloCheck>,
    pub limit: Option<LimitSweep>,
    pub refinement: Option<RefinementCheck>,
    /// Side length of the optional region-map raster, 0 to skip.
    pub raster: usize,
}

impl Default for MicroExperiment {
    fn default() -> Self {
        let well_a = Mat32::IDENTITY;
        let b = Vec3::E3;
        let jump = crate::tensor::outer_32(b, Vec2::new(1.0, 0.0));
        MicroExperiment {
            cases: vec![
                MicroCase {
                    label: "double_well_midpoint".into(),
                    density: DensitySpec::DoubleWell {
                        well_a,
                        well_b: well_a + jump,
                    },
                    xi: well_a + jump.scale(0.5),
                    angle: 0.0,
                    b,
                },
                MicroCase {
                    label: "fiber_identity".into(),
                    density: DensitySpec::Fiber,
                    xi: Mat32::IDENTITY,
                    angle: 0.0,
                    b: Vec3::new(0.2, 0.1, 0.3),
                },
            ],
            identity: Some(IdentitySweep::default()),
            sigma: None,
            monte_carlo: None,
            limit: None,
            refinement: None,
            raster: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FilmExperiment {
    pub ansatz: FilmAnsatz,
    pub j: u64,
    pub config: FilmConfig,
    /// Also run the identity embedding with director `e₃` and require
    /// `E_ε = W(I)` exactly.
    pub homogeneous: bool,
    pub slope_range: Option<(f64, f64)>,
    pub midplane_tolerance: f64,
}

impl Default for FilmExperiment {
    fn default() -> Self {
        FilmExperiment {
            ansatz: FilmAnsatz::new(
                Field::identity_embedding(),
                Field::Sine {
                    base: Vec3::E3,
                    amplitude: Vec3::new(0.1, 0.0, 0.1),
                    wavevector: Vec2::new(1.0, 0.0),
                },
            ),
            j: 1,
            config: FilmConfig::default(),
            homogeneous: true,
            slope_range: Some((0.8, 1.2)),
            midplane_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GammaGapExperiment {
    pub xi: Mat32,
    /// Directors `s·Φ(ξ)` for `count` values of `s` evenly spaced in
    /// `[scale_min, scale_max]`.
    pub scale_min: f64,
    pub scale_max: f64,
    pub count: usize,
    pub extra_directors: Vec<Vec3>,
    pub js: Vec<u64>,
    pub tolerance: f64,
    pub final_tolerance: f64,
}

impl Default for GammaGapExperiment {
    fn default() -> Self {
        GammaGapExperiment {
            xi: Mat32::IDENTITY,
            scale_min: 0.05,
            scale_max: 2.0,
            count: 40,
            extra_directors: Vec::new(),
            js: vec![1, 2, 5, 10, 100, 1000],
            tolerance: 1e-9,
            final_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PropertiesExperiment {
    pub sampling: PropertySampleSpec,
    /// Required `sup |W₀(ξ + h) − W₀(ξ)|` at the smallest probe radius.
    pub continuity_tolerance: f64,
}

impl Default for PropertiesExperiment {
    fn default() -> Self {
        PropertiesExperiment {
            sampling: PropertySampleSpec::default(),
            continuity_tolerance: 1e-2,
        }
    }
}

/// A complete run description. Only the section named by `kind` is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub solver: FiberSolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<FiberExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro: Option<MicroExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub film: Option<FilmExperiment>,
    #[serde(default, rename = "gamma-gap", skip_serializing_if = "Option::is_none")]
    pub gamma_gap: Option<GammaGapExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub properties: Option<PropertiesExperiment>,
}

fn positive(v: f64, path: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn nonneg(v: f64, path: &str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be nonnegative and finite, got {v}")))
    }
}

fn fraction(v: f64, path: &str) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(path, format!("must lie in [0, 1], got {v}")))
    }
}

fn nonempty<T>(v: &[T], path: &str) -> Result<()> {
    if v.is_empty() {
        Err(Error::config(path, "must be nonempty"))
    } else {
        Ok(())
    }
}

/// Rewrites a library validation error as a configuration error at `path`.
fn at<T>(r: Result<T>, path: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    })
}

impl RunConfig {
    /// Parses JSON, reporting the path of the first offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// JSON Schema of the configuration file, pretty-printed with a trailing
    /// newline. Range checks done by `validate` are not expressed in it.
    pub fn json_schema() -> String {
        let schema = schemars::schema_for!(RunConfig);
        serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.model.p > 1.0 && self.model.p.is_finite()) {
            return Err(Error::config("model.p", format!("exponent must exceed 1, got {}", self.model.p)));
        }
        at(self.model.barrier.validate(), "model.barrier")?;
        at(self.solver.validate(), "solver")?;
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        match self.kind {
            ExperimentKind::Fiber => self.fiber.clone().unwrap_or_default().validate("fiber"),
            ExperimentKind::Envelope => self.envelope.clone().unwrap_or_default().validate("envelope"),
            ExperimentKind::Cell => self.cell.clone().unwrap_or_default().validate("cell"),
            ExperimentKind::Micro => self.micro.clone().unwrap_or_default().validate("micro"),
            ExperimentKind::Film => self.film.clone().unwrap_or_default().validate("film"),
            ExperimentKind::GammaGap => self.gamma_gap.clone().unwrap_or_default().validate("gamma-gap"),
            ExperimentKind::Properties => self.properties.clone().unwrap_or_default().validate("properties"),
        }
    }
}

impl FiberExperiment {
    fn validate(&self, path: &str) -> Result<()> {
        positive(self.entry_range, &format!("{path}.entry_range"))?;
        nonneg(self.min_wedge, &format!("{path}.min_wedge"))?;
        positive(self.oracle.half_width, &format!("{path}.oracle.half_width"))?;
        positive(self.oracle.step, &format!("{path}.oracle.step"))?;
        positive(self.oracle.refine_step, &format!("{path}.oracle.refine_step"))?;
        if self.oracle.refine_step > self.oracle.step {
            return Err(Error::config(format!("{path}.oracle.refine_step"), "must not exceed step"));
        }
        positive(self.tolerance, &format!("{path}.tolerance"))?;
        nonempty(&self.js, &format!("{path}.js"))?;
        if let Some(i) = self.js.iter().position(|&j| j == 0) {
            return Err(Error::config(format!("{path}.js[{i}]"), "constraint levels must be positive"));
        }
        if let Some(i) = self.js.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::config(format!("{path}.js[{}]", i + 1), "levels must be strictly increasing"));
        }
        positive(self.constrained_tolerance, &format!("{path}.constrained_tolerance"))?;
        positive(self.canonical_tolerance, &format!("{path}.canonical_tolerance"))
    }
}

impl EnvelopeExperiment {
    fn validate(&self, path: &str) -> Result<()> {
        self.points.validate(&format!("{path}.points"))?;
        if self.depth == 0 {
            return Err(Error::config(format!("{path}.depth"), "must be at least 1"));
        }
        at(self.search.validate(), &format!("{path}.search"))?;
        nonneg(self.tolerance, &format!("{path}.tolerance"))
    }
}

impl CellExperiment {
    fn validate(&self, path: &str) -> Result<()> {
        self.points.validate(&format!("{path}.points"))?;
        at(self.mesh.validate(), &format!("{path}.mesh"))?;
        at(self.search.validate(), &format!("{path}.search"))?;
        if let Some(i) = self.seed_strips.iter().position(|&n| n < 3) {
            return Err(Error::config(format!("{path}.seed_strips[{i}]"), "strip counts must be at least 3"));
        }
        nonneg(self.slack, &format!("{path}.slack"))?;
        nonneg(self.tolerance, &format!("{path}.tolerance"))
    }
}

impl MicroExperiment {
    fn validate(&self, path: &str) -> Result<()> {
        for (i, c) in self.cases.iter().enumerate() {
            if c.xi.wedge().norm() < crate::energy::DEGENERACY_THRESHOLD {
                return Err(Error::config(format!("{path}.cases[{i}].xi"), "must have rank 2"));
            }
        }
        if let Some(s) = &self.identity {
            nonempty(&self.cases, &format!("{path}.cases"))?;
            nonempty(&s.n_values, &format!("{path}.identity.n_values"))?;
            if let Some(i) = s.n_values.iter().position(|&n| n < 3) {
                return Err(Error::config(format!("{path}.identity.n_values[{i}]"), "must be at least 3"));
            }
            for (i, &t) in s.t_values.iter().enumerate() {
                fraction(t, &format!("{path}.identity.t_values[{i}]"))?;
            }
            if s.ell == 0 {
                return Err(Error::config(format!("{path}.identity.ell"), "must be at least 1"));
            }
        }
        if let Some(s) = &self.sigma {
            if s.n_min < 3 || s.n_max < s.n_min {
                return Err(Error::config(format!("{path}.sigma.n_min"), "need 3 ≤ n_min ≤ n_max"));
            }
            for (i, &t) in s.t_values.iter().enumerate() {
                fraction(t, &format!("{path}.sigma.t_values[{i}]"))?;
            }
            for (i, &p) in s.p_values.iter().enumerate() {
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(Error::config(format!("{path}.sigma.p_values[{i}]"), "must be at least 1"));
                }
            }
            if s.order == 0 {
                return Err(Error::config(format!("{path}.sigma.order"), "must be at least 1"));
            }
        }
        if let Some(m) = &self.monte_carlo {
            if m.samples == 0 {
                return Err(Error::config(format!("{path}.monte_carlo.samples"), "must be positive"));
            }
            for (i, &(n, t)) in m.geometries.iter().enumerate() {
                if n < 3 {
                    return Err(Error::config(format!("{path}.monte_carlo.geometries[{i}]"), "n must be at least 3"));
                }
                fraction(t, &format!("{path}.monte_carlo.geometries[{i}]"))?;
            }
        }
        if let Some(l) = &self.limit {
            if l.case >= self.cases.len() {
                return Err(Error::config(format!("{path}.limit.case"), "index out of range"));
            }
            fraction(l.t, &format!("{path}.limit.t"))?;
            if l.n_values.len() < 2 || l.n_values.iter().any(|&n| n < 3) {
                return Err(Error::config(format!("{path}.limit.n_values"), "need at least two values, each ≥ 3"));
            }
            if l.ell == 0 {
                return Err(Error::config(format!("{path}.limit.ell"), "must be at least 1"));
            }
        }
        if let Some(r) = &self.refinement {
            if r.case >= self.cases.len() {
                return Err(Error::config(format!("{path}.refinement.case"), "index out of range"));
            }
            let s = &r.spec;
            fraction(s.t, &format!("{path}.refinement.spec.t"))?;
            positive(s.residual_target, &format!("{path}.refinement.spec.residual_target"))?;
            nonempty(&s.n_values, &format!("{path}.refinement.spec.n_values"))?;
            nonempty(&s.ell_values, &format!("{path}.refinement.spec.ell_values"))?;
            nonempty(&s.q_values, &format!("{path}.refinement.spec.q_values"))?;
            if s.n_values.iter().any(|&n| n < 3) {
                return Err(Error::config(format!("{path}.refinement.spec.n_values"), "each n must be at least 3"));
            }
            if s.ell_values.contains(&0) || s.q_values.contains(&0) {
                return Err(Error::config(format!("{path}.refinement.spec"), "ℓ and q must be positive"));
            }
            if !(s.polygon.x1 > s.polygon.x0 && s.polygon.y1 > s.polygon.y0) {
                return Err(Error::config(format!("{path}.refinement.spec.polygon"), "rectangle is empty"));
            }
        }
        Ok(())
    }
}

impl FilmExperiment {
    fn validate(&self, path: &str) -> Result<()> {
        if self.j == 0 {
            return Err(Error::config(format!("{path}.j"), "must be at least 1"));
        }
        at(self.config.validate(), &format!("{path}.config"))?;
        if let Some((lo, hi)) = self.slope_range {
            if !(lo <= hi) {
                return Err(Error::config(format!("{path}.slope_range"), "lower end exceeds upper end"));
            }
        }
        positive(self.midplane_tolerance, &format!("{path}.midplane_tolerance"))
    }
}

impl GammaGapExperiment {
    fn validate(&self, path: &str) -> Result<()> {
        if self.xi.wedge().norm() < crate::energy::DEGENERACY_THRESHOLD {
            return Err(Error::config(format!("{path}.xi"), "must have rank 2"));
        }
        if self.count == 0 && self.extra_directors.is_empty() {
            return Err(Error::config(format!("{path}.count"), "director family is empty"));
        }
        if self.count > 0 && !(self.scale_min <= self.scale_max) {
            return Err(Error::config(format!("{path}.scale_min"), "must not exceed scale_max"));
        }
        nonempty(&self.js, &format!("{path}.js"))?;
        if self.js.contains(&0) {
            return Err(Error::config(format!("{path}.js"), "constraint levels must be positive"));
        }
        nonneg(self.tolerance, &format!("{path}.tolerance"))?;
        positive(self.final_tolerance, &format!("{path}.final_tolerance"))
    }
}

impl PropertiesExperiment {
    fn validate(&self, path: &str) -> Result<()> {
        let s = &self.sampling;
        if s.samples == 0 {
            return Err(Error::config(format!("{path}.sampling.samples"), "must be positive"));
        }
        positive(s.entry_range, &format!("{path}.sampling.entry_range"))?;
        for (i, &d) in s.deltas.iter().enumerate() {
            positive(d, &format!("{path}.sampling.deltas[{i}]"))?;
        }
        positive(self.continuity_tolerance, &format!("{path}.continuity_tolerance"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_json(r#"{"kind": "fiber"}"#).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Fiber);
        assert_eq!(cfg.model.p, 2.0);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let e = RunConfig::from_json(r#"{"kind": "fiber", "model": {"p": 0.5}}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "model.p"), "{e}");
        let e = RunConfig::from_json(r#"{"kind": "fiber", "fiber": {"samples": "x"}}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "fiber.samples"), "{e}");
        let e = RunConfig::from_json(r#"{"kind": "fiber", "fiber": {"js": [1, 0]}}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "fiber.js[1]"), "{e}");
        let e = RunConfig::from_json(r#"{"kind": "nope"}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "kind"), "{e}");
        let e = RunConfig::from_json(r#"{"kind": "fiber", "bogus": 1}"#).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
    }

    #[test]
    fn matrices_are_row_arrays() {
        let cfg = RunConfig::from_json(
            r#"{"kind": "gamma-gap", "gamma-gap": {"xi": [[1, 0], [0, 1], [0, 0]], "js": [1, 10]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.gamma_gap.unwrap().xi, Mat32::IDENTITY);
    }
}
