use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Vec2;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) || x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidArgument(format!(
                "rectangle [{x0}, {x1}] × [{y0}, {y1}] is empty or not finite"
            )));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn unit_square() -> Self {
        Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    /// `{x : dist(x, complement) > margin}`, or `None` when that is empty.
    pub fn shrink(&self, margin: f64) -> Option<Rect> {
        Rect::new(self.x0 + margin, self.y0 + margin, self.x1 - margin, self.y1 - margin).ok()
    }

    fn contains_square(&self, sq: &DyadicSquare) -> bool {
        sq.corner.x >= self.x0
            && sq.corner.y >= self.y0
            && sq.corner.x + sq.side <= self.x1
            && sq.corner.y + sq.side <= self.y1
    }

    fn overlaps_square(&self, sq: &DyadicSquare) -> bool {
        sq.corner.x < self.x1 && sq.corner.x + sq.side > self.x0 && sq.corner.y < self.y1 && sq.corner.y + sq.side > self.y0
    }
}

/// `r + ρ Y` with `ρ = 2^{-level}` scaled to the root size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicSquare {
    pub corner: Vec2,
    pub side: f64,
    pub level: u32,
}

impl DyadicSquare {
    fn children(&self) -> [DyadicSquare; 4] {
        let h = self.side / 2.0;
        let c = self.corner;
        let mk = |dx: f64, dy: f64| DyadicSquare {
            corner: Vec2::new(c.x + dx, c.y + dy),
            side: h,
            level: self.level + 1,
        };
        [mk(0.0, 0.0), mk(h, 0.0), mk(0.0, h), mk(h, h)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCover {
    pub squares: Vec<DyadicSquare>,
    /// `Σ ρ²`; exact, since every side is a power of two.
    pub covered: f64,
    pub residual: f64,
    pub levels: u32,
}

/// Disjoint dyadic squares inside `rect` whose union leaves uncovered area
/// at most `residual_target`, chosen greedily level by level.
pub fn vitali_cover(rect: &Rect, residual_target: f64, max_level: u32) -> Result<CellCover> {
    if !(residual_target > 0.0) {
        return Err(Error::InvalidArgument("residual target must be positive".into()));
    }
    let extent = (rect.x1 - rect.x0).max(rect.y1 - rect.y0);
    let root_exp = extent.log2().ceil() as i32;
    let root = 2f64.powi(root_exp);
    let mut frontier = Vec::new();
    let (i0, i1) = ((rect.x0 / root).floor() as i64, (rect.x1 / root).ceil() as i64);
    let (j0, j1) = ((rect.y0 / root).floor() as i64, (rect.y1 / root).ceil() as i64);
    for j in j0..j1 {
        for i in i0..i1 {
            frontier.push(DyadicSquare {
                corner: Vec2::new(i as f64 * root, j as f64 * root),
                side: root,
                level: 0,
            });
        }
    }

    let area = rect.area();
    let mut squares = Vec::new();
    let mut covered = 0.0;
    for level in 0..=max_level {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for sq in frontier {
            if rect.contains_square(&sq) {
                covered += sq.side * sq.side;
                squares.push(sq);
            } else if rect.overlaps_square(&sq) {
                next.extend(sq.children());
            }
        }
        let residual = (area - covered).max(0.0);
        if residual <= residual_target {
            return Ok(CellCover {
                squares,
                covered,
                residual,
                levels: level,
            });
        }
        frontier = next;
    }
    Err(Error::ResourceLimit(format!(
        "dyadic cover stopped at level {max_level} with uncovered area {:.3e} above {residual_target:.3e}",
        (area - covered).max(0.0)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_square_is_covered_in_one_level() {
        let c = vitali_cover(&Rect::unit_square(), 1e-9, 10).unwrap();
        assert_eq!(c.squares.len(), 1);
        assert_eq!(c.covered, 1.0);
        assert_eq!(c.residual, 0.0);
    }

    #[test]
    fn squares_are_disjoint_and_inside() {
        let r = Rect::new(0.1, 0.05, 0.93, 0.7).unwrap();
        let c = vitali_cover(&r, 1e-3, 20).unwrap();
        assert!(c.residual <= 1e-3);
        let sum: f64 = c.squares.iter().map(|s| s.side * s.side).sum();
        assert_eq!(sum, c.covered);
        for s in &c.squares {
            assert!(r.contains_square(s));
        }
        for (i, a) in c.squares.iter().enumerate() {
            for b in &c.squares[i + 1..] {
                let sep = a.corner.x + a.side <= b.corner.x
                    || b.corner.x + b.side <= a.corner.x
                    || a.corner.y + a.side <= b.corner.y
                    || b.corner.y + b.side <= a.corner.y;
                assert!(sep);
            }
        }
    }

    #[test]
    fn level_cap_is_reported() {
        let r = Rect::new(0.1, 0.1, 0.9, 0.9).unwrap();
        assert!(matches!(vitali_cover(&r, 1e-12, 4), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn shrink() {
        let r = Rect::unit_square().shrink(1.0 / 32.0).unwrap();
        assert!((r.area() - (1.0 - 2.0 / 32.0f64).powi(2)).abs() < 1e-15);
        assert!(Rect::unit_square().shrink(0.6).is_none());
    }
}
