use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::PlanarDensity;
use crate::envelopes::lbfgs::{minimize, LbfgsOptions};
use crate::error::{Error, Result};
use crate::microstructure::{embedded_sigma, LaminateGeometry};
use crate::tensor::{outer_32, ExtendedEnergy, Mat32, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CellMeshSpec {
    /// Cells per side of the unit square.
    pub m: usize,
    /// Four triangles per cell around a centre node, instead of two.
    pub crossed: bool,
    pub random_starts: usize,
    pub random_amplitude: f64,
    /// Stop once the largest gradient entry is below this.
    pub tolerance: f64,
    pub max_iters: usize,
    pub memory: usize,
    pub seed: u64,
}

impl Default for CellMeshSpec {
    fn default() -> Self {
        CellMeshSpec {
            m: 8,
            crossed: true,
            random_starts: 2,
            random_amplitude: 0.05,
            tolerance: 1e-8,
            max_iters: 300,
            memory: 8,
            seed: 0,
        }
    }
}

impl CellMeshSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("mesh subdivision m must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) || self.memory == 0 {
            return Err(Error::InvalidArgument("descent tolerance and memory must be positive".into()));
        }
        if !(self.random_amplitude >= 0.0 && self.random_amplitude.is_finite()) {
            return Err(Error::InvalidArgument("random_amplitude must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A zig-zag laminate `σₙ b` used as a starting guess.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaminateSeed {
    pub geometry: LaminateGeometry,
    pub b: Vec3,
}

#[derive(Debug, Clone)]
struct Triangle {
    nodes: [usize; 3],
    grads: [Vec2; 3],
    area: f64,
}

/// P1 triangulation of the unit square with homogeneous Dirichlet data.
#[derive(Debug, Clone)]
pub struct CellMesh {
    nodes: Vec<Vec2>,
    dof_of_node: Vec<Option<usize>>,
    triangles: Vec<Triangle>,
    dofs: usize,
}

impl CellMesh {
    pub fn new(m: usize, crossed: bool) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("mesh subdivision m must be at least 1".into()));
        }
        let h = 1.0 / m as f64;
        let mut nodes = Vec::new();
        for j in 0..=m {
            for i in 0..=m {
                nodes.push(Vec2::new(i as f64 * h, j as f64 * h));
            }
        }
        let vertex = |i: usize, j: usize| j * (m + 1) + i;
        let center_base = nodes.len();
        if crossed {
            for j in 0..m {
                for i in 0..m {
                    nodes.push(Vec2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
                }
            }
        }
        let mut dof_of_node = vec![None; nodes.len()];
        let mut dofs = 0;
        for (k, p) in nodes.iter().enumerate() {
            let on_boundary = k < center_base && (p.x == 0.0 || p.y == 0.0 || p.x == 1.0 || p.y == 1.0);
            if !on_boundary {
                dof_of_node[k] = Some(dofs);
                dofs += 1;
            }
        }
        let mut triangles = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let (v00, v10, v11, v01) = (vertex(i, j), vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1));
                let tris: Vec<[usize; 3]> = if crossed {
                    let c = center_base + j * m + i;
                    vec![[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]
                } else {
                    vec![[v00, v10, v11], [v00, v11, v01]]
                };
                for t in tris {
                    triangles.push(Self::triangle(&nodes, t));
                }
            }
        }
        Ok(CellMesh {
            nodes,
            dof_of_node,
            triangles,
            dofs,
        })
    }

    fn triangle(nodes: &[Vec2], idx: [usize; 3]) -> Triangle {
        let p = [nodes[idx[0]], nodes[idx[1]], nodes[idx[2]]];
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let twice_area = e1.x * e2.y - e1.y * e2.x;
        let grad = |k: usize| {
            let e = p[(k + 2) % 3] - p[(k + 1) % 3];
            Vec2::new(-e.y / twice_area, e.x / twice_area)
        };
        Triangle {
            nodes: idx,
            grads: [grad(0), grad(1), grad(2)],
            area: 0.5 * twice_area.abs(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Number of free nodes; the unknown vector has three entries per node.
    pub fn dof_count(&self) -> usize {
        self.dofs
    }

    /// Nodal interpolation of `field`, boundary values dropped.
    pub fn interpolate<F: Fn(Vec2) -> Vec3>(&self, field: F) -> Vec<f64> {
        let mut out = vec![0.0; 3 * self.dofs];
        for (k, p) in self.nodes.iter().enumerate() {
            if let Some(d) = self.dof_of_node[k] {
                let v = field(*p);
                out[3 * d..3 * d + 3].copy_from_slice(&v.to_array());
            }
        }
        out
    }

    fn nodal(&self, node: usize, x: &[f64]) -> Vec3 {
        match self.dof_of_node[node] {
            Some(d) => Vec3::new(x[3 * d], x[3 * d + 1], x[3 * d + 2]),
            None => Vec3::ZERO,
        }
    }

    fn local_gradient(&self, tri: &Triangle, xi: &Mat32, x: &[f64]) -> Mat32 {
        let mut f = *xi;
        for k in 0..3 {
            f += outer_32(self.nodal(tri.nodes[k], x), tri.grads[k]);
        }
        f
    }

    /// `∫_Y f(ξ + ∇φ)` for the piecewise affine `φ` with nodal values `x`.
    pub fn energy(&self, f: &PlanarDensity, xi: &Mat32, x: &[f64]) -> ExtendedEnergy {
        let mut total = 0.0;
        for tri in &self.triangles {
            match f.eval(&self.local_gradient(tri, xi, x)) {
                ExtendedEnergy::Finite(v) => total += tri.area * v,
                ExtendedEnergy::Infinite => return ExtendedEnergy::Infinite,
            }
        }
        ExtendedEnergy::Finite(total)
    }

    fn energy_and_gradient(&self, f: &PlanarDensity, xi: &Mat32, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut total = 0.0;
        for tri in &self.triangles {
            let Some((v, g)) = f.value_and_gradient(&self.local_gradient(tri, xi, x)) else {
                return f64::INFINITY;
            };
            total += tri.area * v;
            for k in 0..3 {
                if let Some(d) = self.dof_of_node[tri.nodes[k]] {
                    let contrib = g.apply(tri.grads[k]).scale(tri.area);
                    grad[3 * d] += contrib.x;
                    grad[3 * d + 1] += contrib.y;
                    grad[3 * d + 2] += contrib.z;
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartOutcome {
    pub label: String,
    pub initial: ExtendedEnergy,
    pub value: ExtendedEnergy,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub value: ExtendedEnergy,
    pub best_start: String,
    pub starts: Vec<StartOutcome>,
    pub triangles: usize,
    pub unknowns: usize,
}

/// Upper bound for `Qf(ξ)` from multi-start descent over piecewise affine
/// `φ` vanishing on `∂Y`. Starts: `φ = 0`, each laminate seed interpolated to
/// the mesh, then random nodal values.
pub fn cell_quasiconvex_report(
    f: &PlanarDensity,
    xi: &Mat32,
    spec: &CellMeshSpec,
    seeds: &[LaminateSeed],
) -> Result<CellReport> {
    spec.validate()?;
    let mesh = CellMesh::new(spec.m, spec.crossed)?;
    let unknowns = 3 * mesh.dof_count();
    let mut starts: Vec<(String, Vec<f64>)> = vec![("zero".into(), vec![0.0; unknowns])];
    for s in seeds {
        let g = s.geometry;
        starts.push((
            format!("laminate(n={}, t={}, angle={})", g.n(), g.t(), g.angle()),
            mesh.interpolate(|x| s.b.scale(embedded_sigma(&g, x))),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for k in 0..spec.random_starts {
        let amp = spec.random_amplitude;
        let x: Vec<f64> = (0..unknowns).map(|_| rng.gen_range(-amp..=amp)).collect();
        starts.push((format!("random({k})"), x));
    }

    let opts = LbfgsOptions {
        memory: spec.memory,
        max_iters: spec.max_iters,
        gradient_tol: spec.tolerance,
    };
    let mut outcomes = Vec::with_capacity(starts.len());
    let mut best = ExtendedEnergy::Infinite;
    let mut best_start = String::from("zero");
    for (label, x0) in starts {
        let initial = mesh.energy(f, xi, &x0);
        let (value, iterations) = if initial.is_finite() {
            let out = minimize(|x, g| mesh.energy_and_gradient(f, xi, x, g), x0, &opts);
            // re-evaluate with the plain evaluator so the reported value does not
            // depend on the gradient path
            (mesh.energy(f, xi, &out.x).min(initial), out.iterations)
        } else {
            (initial, 0)
        };
        if value < best {
            best = value;
            best_start = label.clone();
        }
        outcomes.push(StartOutcome {
            label,
            initial,
            value,
            iterations,
        });
    }
    Ok(CellReport {
        value: best,
        best_start,
        starts: outcomes,
        triangles: mesh.triangle_count(),
        unknowns,
    })
}

pub fn cell_quasiconvex_estimate(
    f: &PlanarDensity,
    xi: &Mat32,
    spec: &CellMeshSpec,
    seeds: &[LaminateSeed],
) -> Result<ExtendedEnergy> {
    Ok(cell_quasiconvex_report(f, xi, spec, seeds)?.value)
}
