//! Fixed-size linear algebra on 3×2 and 3×3 matrices and the extended-real
//! energy type shared by every density in the crate.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Counter-clockwise quarter turn, so `(1, 0)` maps to `(0, 1)`.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl Add for Vec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const E1: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E2: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn cross(self, o: Self) -> Self {
        cross_product(self, o)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v.scale(self)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Right-handed cross product `u ∧ v`.
pub fn cross_product(u: Vec3, v: Vec3) -> Vec3 {
    Vec3::new(
        u.y * v.z - u.z * v.y,
        u.z * v.x - u.x * v.z,
        u.x * v.y - u.y * v.x,
    )
}

/// A 3×2 matrix stored by columns `(ξ₁ | ξ₂)`; serialized as three rows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 3]", into = "[[f64; 2]; 3]")]
pub struct Mat32 {
    pub cols: [Vec3; 2],
}

impl Mat32 {
    pub const ZERO: Mat32 = Mat32 {
        cols: [Vec3::ZERO, Vec3::ZERO],
    };

    /// The planar identity embedding `(e₁ | e₂)`.
    pub const IDENTITY: Mat32 = Mat32 {
        cols: [Vec3::E1, Vec3::E2],
    };

    pub const fn from_cols(c1: Vec3, c2: Vec3) -> Self {
        Self { cols: [c1, c2] }
    }

    /// Row-major entries `[[m11, m12], [m21, m22], [m31, m32]]`.
    pub fn from_rows(rows: [[f64; 2]; 3]) -> Self {
        Self::from_cols(
            Vec3::new(rows[0][0], rows[1][0], rows[2][0]),
            Vec3::new(rows[0][1], rows[1][1], rows[2][1]),
        )
    }

    /// Entries in column-major order `(ξ₁, ξ₂)`.
    pub fn from_col_major(e: [f64; 6]) -> Self {
        Self::from_cols(Vec3::new(e[0], e[1], e[2]), Vec3::new(e[3], e[4], e[5]))
    }

    pub fn to_col_major(&self) -> [f64; 6] {
        let [a, b] = self.cols;
        [a.x, a.y, a.z, b.x, b.y, b.z]
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.cols[col][row]
    }

    pub fn col(&self, j: usize) -> Vec3 {
        self.cols[j]
    }

    /// `ξ₁ ∧ ξ₂`, normal to the image of the matrix.
    pub fn wedge(&self) -> Vec3 {
        cross_product(self.cols[0], self.cols[1])
    }

    pub fn norm_sq(&self) -> f64 {
        self.cols[0].norm_sq() + self.cols[1].norm_sq()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_cols(self.cols[0].scale(s), self.cols[1].scale(s))
    }

    /// Matrix-vector product `ξ·x` with `x ∈ ℝ²`.
    pub fn apply(&self, x: Vec2) -> Vec3 {
        self.cols[0].scale(x.x) + self.cols[1].scale(x.y)
    }

    /// The three 2×2 minors, indexed by the omitted row.
    pub fn minors(&self) -> [f64; 3] {
        let m = |r: usize, s: usize| {
            self.entry(r, 0) * self.entry(s, 1) - self.entry(s, 0) * self.entry(r, 1)
        };
        [m(1, 2), m(0, 2), m(0, 1)]
    }

    pub fn is_finite(&self) -> bool {
        self.cols[0].is_finite() && self.cols[1].is_finite()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_col_major()
            .iter()
            .zip(other.to_col_major())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Mat32 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::from_cols(self.cols[0] + o.cols[0], self.cols[1] + o.cols[1])
    }
}

impl AddAssign for Mat32 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Mat32 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::from_cols(self.cols[0] - o.cols[0], self.cols[1] - o.cols[1])
    }
}

impl Mul<Mat32> for f64 {
    type Output = Mat32;
    fn mul(self, m: Mat32) -> Mat32 {
        m.scale(self)
    }
}

/// A 3×3 matrix stored by columns; serialized as three rows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Mat33 {
    pub cols: [Vec3; 3],
}

impl Mat33 {
    pub const IDENTITY: Mat33 = Mat33 {
        cols: [Vec3::E1, Vec3::E2, Vec3::E3],
    };

    pub const fn from_cols(c1: Vec3, c2: Vec3, c3: Vec3) -> Self {
        Self { cols: [c1, c2, c3] }
    }

    pub fn diag(d: [f64; 3]) -> Self {
        Self::from_cols(
            Vec3::new(d[0], 0.0, 0.0),
            Vec3::new(0.0, d[1], 0.0),
            Vec3::new(0.0, 0.0, d[2]),
        )
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.cols[col][row]
    }

    /// Triple product `(c₁ ∧ c₂)·c₃`.
    pub fn det(&self) -> f64 {
        cross_product(self.cols[0], self.cols[1]).dot(self.cols[2])
    }

    pub fn norm_sq(&self) -> f64 {
        self.cols.iter().map(|c| c.norm_sq()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

macro_rules! array_schema {
    ($t:ty, $repr:ty, $name:literal) => {
        impl schemars::JsonSchema for $t {
            fn schema_name() -> String {
                $name.into()
            }

            fn json_schema(gen: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
                <$repr>::json_schema(gen)
            }
        }
    };
}

array_schema!(Vec2, [f64; 2], "Vec2");
array_schema!(Vec3, [f64; 3], "Vec3");
array_schema!(Mat32, [[f64; 2]; 3], "Mat32");

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        v.to_array()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::from_array(a)
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl From<[[f64; 2]; 3]> for Mat32 {
    fn from(rows: [[f64; 2]; 3]) -> Self {
        Mat32::from_rows(rows)
    }
}

impl From<Mat32> for [[f64; 2]; 3] {
    fn from(m: Mat32) -> Self {
        [0, 1, 2].map(|r| [m.entry(r, 0), m.entry(r, 1)])
    }
}

impl From<[[f64; 3]; 3]> for Mat33 {
    fn from(rows: [[f64; 3]; 3]) -> Self {
        Mat33::from_cols(
            Vec3::new(rows[0][0], rows[1][0], rows[2][0]),
            Vec3::new(rows[0][1], rows[1][1], rows[2][1]),
            Vec3::new(rows[0][2], rows[1][2], rows[2][2]),
        )
    }
}

impl From<Mat33> for [[f64; 3]; 3] {
    fn from(m: Mat33) -> Self {
        [0, 1, 2].map(|r| [m.entry(r, 0), m.entry(r, 1), m.entry(r, 2)])
    }
}

/// The 3×3 matrix `(ξ | ζ)`.
pub fn adjoin_column(xi: &Mat32, zeta: Vec3) -> Mat33 {
    Mat33::from_cols(xi.cols[0], xi.cols[1], zeta)
}

/// Rank-one matrix with entry `(i, j) = b_i a_j`, i.e. `a ⊗ b` acting on columns.
pub fn outer_32(b: Vec3, a: Vec2) -> Mat32 {
    Mat32::from_cols(b.scale(a.x), b.scale(a.y))
}

/// A value in `[0, +∞]`.
///
/// Addition saturates at `+∞`. Scaling `+∞` by zero is an error rather than a
/// silent zero, so callers skip zero-weight terms before evaluating them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedEnergy {
    Finite(f64),
    Infinite,
}

impl ExtendedEnergy {
    pub const ZERO: ExtendedEnergy = ExtendedEnergy::Finite(0.0);

    pub fn finite(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self::Finite(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "energy value must be finite and nonnegative, got {value}"
            )))
        }
    }

    /// Maps `f64::INFINITY` to [`ExtendedEnergy::Infinite`]; negative and NaN
    /// inputs are rejected.
    pub fn from_f64(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Self::Infinite)
        } else {
            Self::finite(value)
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn is_infinite(&self) -> bool {
        !self.is_finite()
    }

    /// `f64::INFINITY` for the infinite value.
    pub fn value(&self) -> f64 {
        match self {
            Self::Finite(v) => *v,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn finite_value(&self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(*v),
            Self::Infinite => None,
        }
    }

    pub fn scale(self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "energy scale factor must be finite and nonnegative, got {lambda}"
            )));
        }
        match self {
            Self::Finite(v) => Ok(Self::Finite(v * lambda)),
            Self::Infinite if lambda > 0.0 => Ok(Self::Infinite),
            Self::Infinite => Err(Error::InvalidArgument("0·∞ is undefined".into())),
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Add for ExtendedEnergy {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        match (self, o) {
            (Self::Finite(a), Self::Finite(b)) => Self::Finite(a + b),
            _ => Self::Infinite,
        }
    }
}

impl AddAssign for ExtendedEnergy {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ExtendedEnergy {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl PartialOrd for ExtendedEnergy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.partial_cmp(b),
            (Self::Finite(_), Self::Infinite) => Some(Ordering::Less),
            (Self::Infinite, Self::Finite(_)) => Some(Ordering::Greater),
            (Self::Infinite, Self::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedEnergy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => s.serialize_f64(*v),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Sum of `weight · energy` over terms with strictly positive weight.
pub fn weighted_sum<I>(terms: I) -> Result<ExtendedEnergy>
where
    I: IntoIterator<Item = (f64, ExtendedEnergy)>,
{
    let mut total = ExtendedEnergy::ZERO;
    for (w, e) in terms {
        if w == 0.0 {
            continue;
        }
        total += e.scale(w)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn serde_uses_row_arrays() {
        let m = Mat32::from_rows([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0],[5.0,6.0]]");
        assert_eq!(serde_json::from_str::<Mat32>(&s).unwrap(), m);
        let v: Vec3 = serde_json::from_str("[1, 2, 3]").unwrap();
        assert_eq!(v, Vec3::new(1.0, 2.0, 3.0));
        let f = Mat33::from(<[[f64; 3]; 3]>::from(Mat33::diag([1.0, 2.0, 3.0])));
        assert_eq!(f, Mat33::diag([1.0, 2.0, 3.0]));
    }

    fn cofactor_det(m: &Mat33) -> f64 {
        let a = |r: usize, c: usize| m.entry(r, c);
        a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
    }

    fn random_vec3(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    #[test]
    fn cross_product_basis() {
        assert_eq!(cross_product(Vec3::E1, Vec3::E2), Vec3::E3);
        let u = Vec3::new(0.3, -1.2, 2.5);
        assert_eq!(cross_product(u, u), Vec3::ZERO);
    }

    #[test]
    fn adjoin_identity_and_singular() {
        let xi = Mat32::IDENTITY;
        assert_eq!(adjoin_column(&xi, Vec3::E3), Mat33::IDENTITY);
        assert_eq!(adjoin_column(&xi, Vec3::ZERO).det(), 0.0);
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let xi = Mat32::from_cols(random_vec3(&mut rng), random_vec3(&mut rng));
            let zeta = random_vec3(&mut rng);
            let f = adjoin_column(&xi, zeta);
            let expected = cofactor_det(&f);
            assert!((f.det() - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            assert!((xi.wedge().dot(zeta) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn outer_product_orientation() {
        let m = outer_32(Vec3::E3, Vec2::new(1.0, 0.0));
        assert_eq!(m.to_col_major(), [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.entry(2, 0), 1.0);
        assert_eq!(outer_32(Vec3::new(1.0, 2.0, 3.0), Vec2::default()), Mat32::ZERO);
    }

    #[test]
    fn energy_scale_rules() {
        let inf = ExtendedEnergy::Infinite;
        assert_eq!(inf.scale(2.0).unwrap(), inf);
        assert!(inf.scale(0.0).is_err());
        assert_eq!(ExtendedEnergy::Finite(2.0).scale(0.0).unwrap(), ExtendedEnergy::ZERO);
        assert!(ExtendedEnergy::finite(-1.0).is_err());
        assert!(ExtendedEnergy::finite(f64::NAN).is_err());
        let s = weighted_sum([(0.0, inf), (0.5, ExtendedEnergy::Finite(4.0))]).unwrap();
        assert_eq!(s, ExtendedEnergy::Finite(2.0));
    }

    fn energy_strategy() -> impl Strategy<Value = ExtendedEnergy> {
        prop_oneof![
            (0.0..1e6f64).prop_map(ExtendedEnergy::Finite),
            Just(ExtendedEnergy::Infinite),
        ]
    }

    proptest! {
        #[test]
        fn outer_product_has_vanishing_minors(
            a in prop::array::uniform2(-3.0..3.0f64),
            b in prop::array::uniform3(-3.0..3.0f64),
        ) {
            let m = outer_32(Vec3::from_array(b), Vec2::new(a[0], a[1]));
            for minor in m.minors() {
                prop_assert!(minor.abs() <= 1e-12);
            }
        }

        #[test]
        fn wedge_vanishes_iff_minors_vanish(
            c1 in prop::array::uniform3(-3.0..3.0f64),
            lambda in -2.0..2.0f64,
            dependent in any::<bool>(),
        ) {
            let v1 = Vec3::from_array(c1);
            let v2 = if dependent { v1.scale(lambda) } else { Vec3::new(c1[1] + 1.0, -c1[0], c1[2] + 0.5) };
            let xi = Mat32::from_cols(v1, v2);
            let minors = xi.minors();
            let w = xi.wedge();
            // the wedge components are the minors up to sign
            prop_assert!((w.x - minors[0]).abs() < 1e-12);
            prop_assert!((w.y + minors[1]).abs() < 1e-12);
            prop_assert!((w.z - minors[2]).abs() < 1e-12);
            if dependent {
                prop_assert!(w.norm() < 1e-12);
            }
        }

        #[test]
        fn energy_addition_is_associative_and_commutative(
            a in energy_strategy(), b in energy_strategy(), c in energy_strategy(),
        ) {
            prop_assert_eq!(a + b, b + a);
            let left = (a + b) + c;
            let right = a + (b + c);
            match (left, right) {
                (ExtendedEnergy::Finite(x), ExtendedEnergy::Finite(y)) => {
                    prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
                }
                (l, r) => prop_assert_eq!(l, r),
            }
            if a.is_infinite() || b.is_infinite() {
                prop_assert!((a + b).is_infinite());
            }
        }
    }
}
