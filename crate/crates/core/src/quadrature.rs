//! Gauss–Legendre rules on intervals, squares and triangles.

use crate::tensor::Vec2;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `order` points, exact for polynomials of degree `2·order − 1`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be at least 1");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev-type initial guess, then Newton on P_n
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A weighted point set in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarRule {
    pub points: Vec<(Vec2, f64)>,
}

impl PlanarRule {
    /// Composite tensor rule on the unit square: `cells × cells` subsquares,
    /// `order × order` Gauss points in each. Nodes are listed row by row.
    pub fn unit_square(order: usize, cells: usize) -> Self {
        assert!(cells >= 1);
        let g = GaussLegendre::new(order);
        let h = 1.0 / cells as f64;
        let mut points = Vec::with_capacity(cells * cells * order * order);
        for cj in 0..cells {
            let y0 = cj as f64 * h;
            for (y, wy) in g.on_interval(y0, y0 + h).collect::<Vec<_>>() {
                for ci in 0..cells {
                    let x0 = ci as f64 * h;
                    for (x, wx) in g.on_interval(x0, x0 + h) {
                        points.push((Vec2::new(x, y), wx * wy));
                    }
                }
            }
        }
        PlanarRule { points }
    }

    /// Collapsed (Duffy) tensor rule on the triangle `p0 p1 p2`.
    pub fn triangle(p0: Vec2, p1: Vec2, p2: Vec2, order: usize) -> Self {
        let g = GaussLegendre::new(order);
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let jac = (e1.x * e2.y - e1.y * e2.x).abs();
        let mut points = Vec::with_capacity(order * order);
        for (u, wu) in g.on_interval(0.0, 1.0) {
            for (v, wv) in g.on_interval(0.0, 1.0) {
                // (u, v) ∈ [0,1]² ↦ (u, (1−u) v) in the reference triangle
                let r = u;
                let s = (1.0 - u) * v;
                let x = p0 + e1.scale(r) + e2.scale(s);
                points.push((x, wu * wv * (1.0 - u) * jac));
            }
        }
        PlanarRule { points }
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|(_, w)| w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in 1..=8 {
            let g = GaussLegendre::new(order);
            for deg in 0..(2 * order) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let got: f64 = g.nodes.iter().zip(&g.weights).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - exact).abs() < 1e-14, "order {order} degree {deg}");
            }
        }
    }

    #[test]
    fn square_rule_weights() {
        let r = PlanarRule::unit_square(4, 3);
        assert_eq!(r.points.len(), 144);
        assert!((r.total_weight() - 1.0).abs() < 1e-14);
        let moment: f64 = r.points.iter().map(|(p, w)| w * p.x * p.x * p.y).sum();
        assert!((moment - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_rule_area_and_moment() {
        let r = PlanarRule::triangle(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), 4);
        assert!((r.total_weight() - 0.5).abs() < 1e-14);
        let m: f64 = r.points.iter().map(|(p, w)| w * p.x * p.y).sum();
        assert!((m - 1.0 / 24.0).abs() < 1e-14);
    }
}
