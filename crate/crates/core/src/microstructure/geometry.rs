use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::PlanarRule;
use crate::tensor::Vec2;

/// The `(n, t)` zig-zag partition of the unit square, with strips orthogonal
/// to the lamination normal `a = (cos angle, sin angle)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaminateGeometry {
    n: usize,
    t: f64,
    angle: f64,
}

impl LaminateGeometry {
    pub fn new(n: usize, t: f64) -> Result<Self> {
        Self::with_angle(n, t, 0.0)
    }

    pub fn with_angle(n: usize, t: f64, angle: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("strip count n must be at least 3, got {n}")));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("volume fraction t must lie in [0, 1], got {t}")));
        }
        if !angle.is_finite() {
            return Err(Error::InvalidArgument("frame angle must be finite".into()));
        }
        Ok(LaminateGeometry { n, t, angle })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn a(&self) -> Vec2 {
        Vec2::from_angle(self.angle)
    }

    pub fn a_perp(&self) -> Vec2 {
        self.a().perp()
    }

    /// Pushes a gradient from the laminate frame to the physical frame.
    pub fn to_physical(&self, g: Vec2) -> Vec2 {
        self.a().scale(g.x) + self.a_perp().scale(g.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionFamily {
    AMinus,
    APlus,
    BMinus,
    BPlus,
    CMinus,
    CPlus,
    B,
    C,
}

impl RegionFamily {
    /// Also the tie-break order for points on shared boundaries.
    pub const ALL: [RegionFamily; 8] = [
        RegionFamily::AMinus,
        RegionFamily::APlus,
        RegionFamily::BMinus,
        RegionFamily::BPlus,
        RegionFamily::CMinus,
        RegionFamily::CPlus,
        RegionFamily::B,
        RegionFamily::C,
    ];

    pub fn symbol(&self) -> char {
        match self {
            RegionFamily::AMinus => 'a',
            RegionFamily::APlus => 'A',
            RegionFamily::BMinus => 'b',
            RegionFamily::BPlus => 'B',
            RegionFamily::CMinus => 'c',
            RegionFamily::CPlus => 'C',
            RegionFamily::B => '.',
            RegionFamily::C => ':',
        }
    }

    /// `∇σₙ` on this family in the laminate frame `(a, a^⊥)`.
    pub fn local_gradient(&self, t: f64) -> Vec2 {
        match self {
            RegionFamily::AMinus => Vec2::new(-t, 0.0),
            RegionFamily::APlus | RegionFamily::BPlus | RegionFamily::CPlus => Vec2::new(1.0 - t, 0.0),
            RegionFamily::BMinus => Vec2::new(-t, -t),
            RegionFamily::CMinus => Vec2::new(-t, t),
            RegionFamily::B | RegionFamily::C => Vec2::new(0.0, 0.0),
        }
    }
}

impl fmt::Display for RegionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegionFamily::AMinus => "A-",
            RegionFamily::APlus => "A+",
            RegionFamily::BMinus => "B-",
            RegionFamily::BPlus => "B+",
            RegionFamily::CMinus => "C-",
            RegionFamily::CPlus => "C+",
            RegionFamily::B => "B",
            RegionFamily::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionLabel {
    pub family: RegionFamily,
    pub strip: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaSample {
    pub label: RegionLabel,
    pub value: f64,
    /// Gradient in the physical frame.
    pub gradient: Vec2,
}

/// Region, value and gradient of `σₙ` at `x`, given in laminate-frame
/// coordinates of the unit square.
///
/// Strip `k` is `k/n ≤ x₁ ≤ (k+1)/n`. Inside it, with `s = n x₁ − k`,
/// `y = n x₂` and `w = n − y`, the bottom wedges `B, B⁻, B⁺` fill `y ≤ 1` and
/// the top wedges `C, C⁻, C⁺` are their mirror images in `w ≤ 1`.
pub fn classify_and_sigma(geom: &LaminateGeometry, x: Vec2) -> Result<SigmaSample> {
    if !(0.0..=1.0).contains(&x.x) || !(0.0..=1.0).contains(&x.y) {
        return Err(Error::InvalidArgument(format!(
            "point ({}, {}) lies outside the closed unit square",
            x.x, x.y
        )));
    }
    let n = geom.n;
    let nf = n as f64;
    let t = geom.t;
    let strip = ((x.x * nf).floor() as usize).min(n - 1);
    let s = x.x * nf - strip as f64;
    let y = x.y * nf;
    let w = nf - y;

    let inside = |family: RegionFamily| -> bool {
        match family {
            RegionFamily::AMinus => s <= 1.0 - t && (1.0..=nf - 1.0).contains(&y),
            RegionFamily::APlus => s >= 1.0 - t && (1.0..=nf - 1.0).contains(&y),
            RegionFamily::BMinus => y <= 1.0 && s >= 1.0 - y && s <= 1.0 - t * y,
            RegionFamily::BPlus => y <= 1.0 && s >= 1.0 - t * y,
            RegionFamily::CMinus => w <= 1.0 && s >= 1.0 - w && s <= 1.0 - t * w,
            RegionFamily::CPlus => w <= 1.0 && s >= 1.0 - t * w,
            RegionFamily::B => y <= 1.0 && s <= 1.0 - y,
            RegionFamily::C => w <= 1.0 && s <= 1.0 - w,
        }
    };
    let family = RegionFamily::ALL
        .into_iter()
        .find(|&f| inside(f))
        .expect("zig-zag regions cover the unit square");

    let value = match family {
        RegionFamily::AMinus => -t * s / nf,
        RegionFamily::APlus | RegionFamily::BPlus | RegionFamily::CPlus => (1.0 - t) * (s - 1.0) / nf,
        RegionFamily::BMinus => -t * (s + y - 1.0) / nf,
        RegionFamily::CMinus => -t * (s + w - 1.0) / nf,
        RegionFamily::B | RegionFamily::C => 0.0,
    };
    Ok(SigmaSample {
        label: RegionLabel { family, strip },
        value,
        gradient: geom.to_physical(family.local_gradient(t)),
    })
}

/// Total area of each family, summed over all strips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionMeasures {
    pub a_minus: f64,
    pub a_plus: f64,
    pub b_minus: f64,
    pub b_plus: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub b: f64,
    pub c: f64,
}

impl RegionMeasures {
    pub fn area(&self, family: RegionFamily) -> f64 {
        match family {
            RegionFamily::AMinus => self.a_minus,
            RegionFamily::APlus => self.a_plus,
            RegionFamily::BMinus => self.b_minus,
            RegionFamily::BPlus => self.b_plus,
            RegionFamily::CMinus => self.c_minus,
            RegionFamily::CPlus => self.c_plus,
            RegionFamily::B => self.b,
            RegionFamily::C => self.c,
        }
    }

    pub fn total(&self) -> f64 {
        RegionFamily::ALL.iter().map(|&f| self.area(f)).sum()
    }

    /// `|∪(B⁺ ∪ C⁺)|`.
    pub fn plus_wedges(&self) -> f64 {
        self.b_plus + self.c_plus
    }

    /// `|∪(B ∪ C)|`.
    pub fn flat_wedges(&self) -> f64 {
        self.b + self.c
    }
}

pub fn region_measures(geom: &LaminateGeometry) -> RegionMeasures {
    let nf = geom.n as f64;
    let t = geom.t;
    let wedge = 1.0 / (2.0 * nf);
    RegionMeasures {
        a_minus: (1.0 - t) * (1.0 - 2.0 / nf),
        a_plus: t * (1.0 - 2.0 / nf),
        b_minus: (1.0 - t) * wedge,
        b_plus: t * wedge,
        c_minus: (1.0 - t) * wedge,
        c_plus: t * wedge,
        b: wedge,
        c: wedge,
    }
}

/// Polygonal pieces of strip `k` on which `σₙ` is affine and of one sign.
fn strip_pieces(geom: &LaminateGeometry, k: usize) -> Vec<[Vec2; 3]> {
    let nf = geom.n as f64;
    let t = geom.t;
    let to_x = |s: f64, y: f64| Vec2::new((k as f64 + s) / nf, y / nf);
    let to_x_top = |s: f64, w: f64| Vec2::new((k as f64 + s) / nf, 1.0 - w / nf);
    let mut pieces = Vec::with_capacity(8);
    let mut rect = |s0: f64, s1: f64| {
        if s1 > s0 {
            let (p0, p1, p2, p3) = (to_x(s0, 1.0), to_x(s1, 1.0), to_x(s1, nf - 1.0), to_x(s0, nf - 1.0));
            pieces.push([p0, p1, p2]);
            pieces.push([p0, p2, p3]);
        }
    };
    rect(0.0, 1.0 - t);
    rect(1.0 - t, 1.0);
    for map in [&to_x as &dyn Fn(f64, f64) -> Vec2, &to_x_top] {
        if t < 1.0 {
            pieces.push([map(1.0, 0.0), map(0.0, 1.0), map(1.0 - t, 1.0)]);
        }
        if t > 0.0 {
            pieces.push([map(1.0, 0.0), map(1.0 - t, 1.0), map(1.0, 1.0)]);
        }
    }
    pieces
}

/// `∫_Y |σₙ|^p` by Gauss quadrature on each affine piece of each strip.
pub fn sigma_lp_norm(geom: &LaminateGeometry, p: f64, order: usize) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent p must be at least 1, got {p}")));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be positive".into()));
    }
    let mut total = 0.0;
    for k in 0..geom.n {
        for [p0, p1, p2] in strip_pieces(geom, k) {
            // sample σ at the piece centroid to pick the branch, then integrate
            // that affine branch so boundary ties cannot switch formulas
            let centroid = Vec2::new((p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0);
            let sample = classify_and_sigma(geom, centroid)?;
            let grad_local = sample.label.family.local_gradient(geom.t);
            let value_at = |q: Vec2| {
                let d = q - centroid;
                sample.value + grad_local.x * d.x + grad_local.y * d.y
            };
            for (q, wq) in PlanarRule::triangle(p0, p1, p2, order).points {
                total += wq * value_at(q).abs().powf(p);
            }
        }
    }
    Ok(total)
}

/// `t^p (1−t)^p / n^p`.
pub fn sigma_lp_bound(geom: &LaminateGeometry, p: f64) -> f64 {
    (geom.t * (1.0 - geom.t) / geom.n as f64).powf(p)
}

/// Text raster of the region map, row 0 at the top (`x₂ = 1`).
pub fn region_raster(geom: &LaminateGeometry, resolution: usize) -> String {
    let mut out = String::with_capacity((resolution + 1) * resolution);
    for row in 0..resolution {
        let y = 1.0 - (row as f64 + 0.5) / resolution as f64;
        for col in 0..resolution {
            let x = (col as f64 + 0.5) / resolution as f64;
            let sample = classify_and_sigma(geom, Vec2::new(x, y)).expect("raster points lie in the square");
            out.push(sample.label.family.symbol());
        }
        out.push('\n');
    }
    out
}

/// `σₙ` transported to the physical unit square for an arbitrary frame
/// angle: the laminate cell is the largest square with edges along `a` and
/// `a^⊥` centred in `Y`, and the function vanishes outside it.
pub fn embedded_sigma(geom: &LaminateGeometry, x: Vec2) -> f64 {
    let a = geom.a();
    let ap = geom.a_perp();
    let fit = 1.0 / (a.x.abs() + a.y.abs());
    let c = Vec2::new(0.5, 0.5);
    let d = x - c;
    let local = Vec2::new(d.dot(a) / fit + 0.5, d.dot(ap) / fit + 0.5);
    let eps = 1e-12;
    if local.x < -eps || local.x > 1.0 + eps || local.y < -eps || local.y > 1.0 + eps {
        return 0.0;
    }
    let clamped = Vec2::new(local.x.clamp(0.0, 1.0), local.y.clamp(0.0, 1.0));
    fit * classify_and_sigma(geom, clamped).map(|s| s.value).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interface_value_between_a_regions() {
        let (n, t) = (5, 0.3);
        let g = LaminateGeometry::new(n, t).unwrap();
        for k in 0..n {
            let x = Vec2::new(k as f64 / n as f64 + (1.0 - t) / n as f64, 0.5);
            let s = classify_and_sigma(&g, x).unwrap();
            assert!((s.value + t * (1.0 - t) / n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma_vanishes_on_the_boundary() {
        let g = LaminateGeometry::new(7, 0.35).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let u: f64 = rng.gen();
            let side = rng.gen_range(0..4);
            let x = match side {
                0 => Vec2::new(u, 0.0),
                1 => Vec2::new(u, 1.0),
                2 => Vec2::new(0.0, u),
                _ => Vec2::new(1.0, u),
            };
            let v = classify_and_sigma(&g, x).unwrap().value;
            assert!(v.abs() < 1e-15, "σ({:?}) = {v}", x);
        }
    }

    #[test]
    fn zero_fraction_is_flat() {
        let g = LaminateGeometry::new(4, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let x = Vec2::new(rng.gen(), rng.gen());
            assert_eq!(classify_and_sigma(&g, x).unwrap().value, 0.0);
        }
    }

    #[test]
    fn rejects_points_outside() {
        let g = LaminateGeometry::new(4, 0.5).unwrap();
        assert!(classify_and_sigma(&g, Vec2::new(1.01, 0.5)).is_err());
        assert!(classify_and_sigma(&g, Vec2::new(0.5, -0.1)).is_err());
        assert!(LaminateGeometry::new(2, 0.5).is_err());
        assert!(LaminateGeometry::new(4, 1.5).is_err());
    }

    #[test]
    fn pointwise_bound_and_continuity() {
        let g = LaminateGeometry::new(6, 0.4).unwrap();
        let bound = 0.4 * 0.6 / 6.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5000 {
            let x = Vec2::new(rng.gen(), rng.gen());
            let s = classify_and_sigma(&g, x).unwrap();
            assert!(s.value.abs() <= bound + 1e-15);
            // σ is Lipschitz with constant max |∇σ| ≤ √2
            let h = 1e-7;
            let y = Vec2::new((x.x + h).min(1.0), x.y);
            let s2 = classify_and_sigma(&g, y).unwrap();
            assert!((s2.value - s.value).abs() <= 2.0 * h);
        }
    }

    #[test]
    fn measures_sum_to_one() {
        for n in [3, 4, 9, 64] {
            for t in [0.0, 0.25, 0.5, 1.0] {
                let m = region_measures(&LaminateGeometry::new(n, t).unwrap());
                assert!((m.total() - 1.0).abs() < 1e-12);
            }
        }
        let m = region_measures(&LaminateGeometry::new(4, 0.5).unwrap());
        assert_eq!(m.a_minus, 0.25);
        assert_eq!(region_measures(&LaminateGeometry::new(5, 1.0).unwrap()).a_minus, 0.0);
    }

    #[test]
    fn lp_norm_small_cases() {
        let g = LaminateGeometry::new(8, 0.0).unwrap();
        assert_eq!(sigma_lp_norm(&g, 2.0, 4).unwrap(), 0.0);
        let g = LaminateGeometry::new(8, 0.5).unwrap();
        let v = sigma_lp_norm(&g, 2.0, 4).unwrap();
        assert!(v > 0.0 && v <= 1.0 / 1024.0);
    }

    #[test]
    fn lp_norm_matches_closed_form_for_p2() {
        // A-strips: ∫ (t s/n)² ds/n over the strip length, same for the other
        // branch; wedges contribute an extra term computed here by hand.
        let (n, t) = (5usize, 0.3f64);
        let g = LaminateGeometry::new(n, t).unwrap();
        let nf = n as f64;
        let a_part = (1.0 - 2.0 / nf) * (t * t * (1.0 - t).powi(3) / 3.0 + (1.0 - t).powi(2) * t.powi(3) / 3.0) / (nf * nf);
        // one bottom wedge pair in local units: ∫∫ σ̂² over B⁻ ∪ B⁺, σ̂ = n σ
        let mut wedge = 0.0;
        let rule = crate::quadrature::GaussLegendre::new(12);
        for (y, wy) in rule.on_interval(0.0, 1.0) {
            for (s, ws) in rule.on_interval(1.0 - y, 1.0 - t * y) {
                wedge += wy * ws * (t * (s + y - 1.0)).powi(2);
            }
            for (s, ws) in rule.on_interval(1.0 - t * y, 1.0) {
                wedge += wy * ws * ((1.0 - t) * (s - 1.0)).powi(2);
            }
        }
        // n strips × 2 (top and bottom) × area scale 1/n² × value scale 1/n²
        let expected = a_part + nf * 2.0 * wedge / nf.powi(4);
        let got = sigma_lp_norm(&g, 2.0, 6).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn embedded_sigma_vanishes_on_boundary_for_rotated_frames() {
        let g = LaminateGeometry::with_angle(6, 0.4, 0.6).unwrap();
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            for x in [Vec2::new(u, 0.0), Vec2::new(u, 1.0), Vec2::new(0.0, u), Vec2::new(1.0, u)] {
                assert_eq!(embedded_sigma(&g, x), 0.0);
            }
        }
        let axis = LaminateGeometry::new(6, 0.4).unwrap();
        let x = Vec2::new(0.31, 0.47);
        assert!((embedded_sigma(&axis, x) - classify_and_sigma(&axis, x).unwrap().value).abs() < 1e-15);
    }

    #[test]
    fn raster_dimensions() {
        let r = region_raster(&LaminateGeometry::new(4, 0.5).unwrap(), 16);
        assert_eq!(r.lines().count(), 16);
        assert!(r.lines().all(|l| l.len() == 16));
        assert!(r.contains('a') && r.contains('A') && r.contains('.'));
    }
}
