//! John domains with explicit constants.
//!
//! A domain is `(alpha, beta)`-John with center `x0` when every point joins
//! `x0` by an arc-length curve of length at most `beta` whose distance to
//! the boundary at arc length `t` is at least `alpha t / beta`.
//!
//! Constants used here, all with straight segments to `x0`:
//!
//! | shape | alpha | beta | x0 |
//! |---|---|---|---|
//! | ball `B(c, k)` | `k` | `k` | `c` |
//! | box with sides `a_i` | `min a_i / 2` | half diagonal | center |
//! | L-shape `[-s,s)^2 \ [0,s)^2` | `s / 2` | `s sqrt(10) / 2` | `(-s/2, -s/2)` |
//! | punctured ball | as the ball | as the ball | `c` |
//!
//! In a convex set the distance to the boundary is concave, so along the
//! segment from `x` to `x0` it is at least `(t / l) dist(x0, boundary)`.
//! For the box that gives `alpha = dist(center, boundary)` and `beta` the
//! longest segment. Every point of the L-shape lies in one of its two
//! `2s x s` arms together with `x0`, which sits at distance `s/2` from the
//! boundary of either arm; the farthest corner is at `s sqrt(10) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{distance, CellSet, DyadicGrid};

/// Default `c_ball` in the mean-value radius `c_ball alpha^2 / beta`.
pub const DEFAULT_C_BALL: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box.
    Rectangle { center: Vec<f64>, sides: Vec<f64> },
    /// `center + ([-unit, unit)^2 \ [0, unit)^2)`, planar only.
    LShape { center: Vec<f64>, unit: f64 },
    /// Ball without the cells whose closure contains its center.
    PuncturedBall { center: Vec<f64>, radius: f64 },
}

impl Shape {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Shape::Ball { center, radius }
    }

    fn center(&self) -> &[f64] {
        match self {
            Shape::Ball { center, .. }
            | Shape::Rectangle { center, .. }
            | Shape::LShape { center, .. }
            | Shape::PuncturedBall { center, .. } => center,
        }
    }

    /// `(alpha, beta, x0)`.
    pub fn john_constants(&self) -> (f64, f64, Vec<f64>) {
        match self {
            Shape::Ball { center, radius } | Shape::PuncturedBall { center, radius } => {
                (*radius, *radius, center.clone())
            }
            Shape::Rectangle { center, sides } => {
                let min = sides.iter().copied().fold(f64::INFINITY, f64::min);
                let diag = sides.iter().map(|a| a * a).sum::<f64>().sqrt();
                (min / 2.0, diag / 2.0, center.clone())
            }
            Shape::LShape { center, unit } => (
                unit / 2.0,
                unit * 10f64.sqrt() / 2.0,
                vec![center[0] - unit / 2.0, center[1] - unit / 2.0],
            ),
        }
    }

    /// Diameter of the continuum shape.
    pub fn diameter(&self) -> f64 {
        match self {
            Shape::Ball { radius, .. } | Shape::PuncturedBall { radius, .. } => 2.0 * radius,
            Shape::Rectangle { sides, .. } => sides.iter().map(|a| a * a).sum::<f64>().sqrt(),
            Shape::LShape { unit, .. } => 2.0 * unit * 2f64.sqrt(),
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.center();
        let half: Vec<f64> = match self {
            Shape::Ball { radius, .. } | Shape::PuncturedBall { radius, .. } => {
                vec![*radius; c.len()]
            }
            Shape::Rectangle { sides, .. } => sides.iter().map(|a| a / 2.0).collect(),
            Shape::LShape { unit, .. } => vec![*unit; 2],
        };
        (
            c.iter().zip(&half).map(|(a, b)| a - b).collect(),
            c.iter().zip(&half).map(|(a, b)| a + b).collect(),
        )
    }

    /// Membership of a point in the continuum shape (punctures excluded).
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Ball { center, radius } | Shape::PuncturedBall { center, radius } => {
                distance(x, center) < *radius
            }
            Shape::Rectangle { center, sides } => x
                .iter()
                .zip(center)
                .zip(sides)
                .all(|((xi, ci), a)| (xi - ci).abs() < a / 2.0),
            Shape::LShape { center, unit } => {
                let (u, v) = (x[0] - center[0], x[1] - center[1]);
                let in_square = (-unit..*unit).contains(&u) && (-unit..*unit).contains(&v);
                let in_notch = (0.0..*unit).contains(&u) && (0.0..*unit).contains(&v);
                in_square && !in_notch
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let c = self.center();
        if c.len() != dim || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "shape center must hold {dim} finite coordinates"
            )));
        }
        match self {
            Shape::Ball { radius, .. } | Shape::PuncturedBall { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(param("radius", *radius, "radius > 0"));
                }
            }
            Shape::Rectangle { sides, .. } => {
                if sides.len() != dim {
                    return Err(Error::Invalid(format!("rectangle needs {dim} sides")));
                }
                if let Some(&a) = sides.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                    return Err(param("sides", a, "every side > 0"));
                }
            }
            Shape::LShape { unit, .. } => {
                if dim != 2 {
                    return Err(Error::Invalid("the L-shape is planar".into()));
                }
                if !(*unit > 0.0 && unit.is_finite()) {
                    return Err(param("unit", *unit, "unit > 0"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanValueBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JohnDomain {
    pub shape: Shape,
    pub alpha_john: f64,
    pub beta_john: f64,
    pub center_x0: Vec<f64>,
    pub cells: CellSet,
}

/// Serializable summary of a domain (cells omitted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub shape: Shape,
    pub alpha_john: f64,
    pub beta_john: f64,
    pub center_x0: Vec<f64>,
    pub cell_count: usize,
}

/// Discretize `shape` on `grid`: a cell belongs to the domain when its
/// center lies in the shape.
pub fn make_john_domain(shape: &Shape, grid: &DyadicGrid) -> Result<JohnDomain> {
    shape.validate(grid.dim())?;
    let (lo, hi) = shape.bounds();
    let root_hi: Vec<f64> = grid.origin().iter().map(|o| o + grid.root_side()).collect();
    let tol = 1e-12 * grid.root_side();
    let inside = (0..grid.dim())
        .all(|a| lo[a] >= grid.origin()[a] - tol && hi[a] <= root_hi[a] + tol);
    if !inside {
        return Err(Error::ShapeOutsideRoot(format!(
            "bounding box {lo:?}..{hi:?} leaves the root cube {:?}..{root_hi:?}",
            grid.origin()
        )));
    }
    let mut cells = CellSet::from_predicate(grid, |x| shape.contains(x));
    if let Shape::PuncturedBall { center, .. } = shape {
        let h = grid.leaf_side();
        let touching: Vec<usize> = cells
            .cells()
            .filter(|&i| {
                let c = grid.cell_center(i);
                c.iter()
                    .zip(center)
                    .all(|(ci, xi)| (ci - xi).abs() <= h / 2.0 * (1.0 + 1e-12))
            })
            .collect();
        for i in touching {
            cells.remove(i);
        }
    }
    if cells.is_empty() {
        return Err(Error::Invalid("shape contains no cell center".into()));
    }
    let (alpha_john, beta_john, center_x0) = shape.john_constants();
    Ok(JohnDomain {
        shape: shape.clone(),
        alpha_john,
        beta_john,
        center_x0,
        cells,
    })
}

impl JohnDomain {
    pub fn grid(&self) -> &DyadicGrid {
        self.cells.grid()
    }

    pub fn diameter(&self) -> f64 {
        self.shape.diameter()
    }

    /// `B(x0, c_ball alpha^2 / beta)`.
    pub fn mean_value_ball(&self, c_ball: f64) -> Result<MeanValueBall> {
        if !(c_ball > 0.0 && c_ball <= 1.0) {
            return Err(param("c_ball", c_ball, "0 < c_ball <= 1"));
        }
        Ok(MeanValueBall {
            center: self.center_x0.clone(),
            radius: c_ball * self.alpha_john * self.alpha_john / self.beta_john,
        })
    }

    /// `beta (beta / alpha)^(2n)`.
    pub fn poincare_scale(&self) -> f64 {
        let n = self.grid().dim() as i32;
        self.beta_john * (self.beta_john / self.alpha_john).powi(2 * n)
    }

    pub fn record(&self) -> DomainRecord {
        DomainRecord {
            shape: self.shape.clone(),
            alpha_john: self.alpha_john,
            beta_john: self.beta_john,
            center_x0: self.center_x0.clone(),
            cell_count: self.cells.count(),
        }
    }
}

/// Average of the signed cell values `u` over domain cells whose center lies
/// in `ball`.
pub fn mean_value(u: &[f64], domain: &JohnDomain, ball: &MeanValueBall) -> Result<f64> {
    let grid = domain.grid();
    if u.len() != grid.num_cells() {
        return Err(Error::GridMismatch);
    }
    let members: Vec<usize> = domain
        .cells
        .cells()
        .filter(|&i| distance(&grid.cell_center(i), &ball.center) < ball.radius)
        .collect();
    let Some(&first) = members.first() else {
        return Err(Error::EmptyBall);
    };
    // offset by the first value so that constants are reproduced exactly
    let base = u[first];
    let spread: f64 = members.iter().map(|&i| u[i] - base).sum();
    Ok(base + spread / members.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, sample_signed, Sampler};

    fn grid(depth: u32) -> DyadicGrid {
        make_grid(2, depth, 2.0, &[-1.0, -1.0]).unwrap()
    }

    #[test]
    fn ball_constants() {
        let d = make_john_domain(&Shape::ball(vec![0.0, 0.0], 1.0), &grid(4)).unwrap();
        assert_eq!((d.alpha_john, d.beta_john), (1.0, 1.0));
        assert_eq!(d.center_x0, vec![0.0, 0.0]);
        assert!(d.diameter() <= 2.0 * d.beta_john);
        let b = d.mean_value_ball(DEFAULT_C_BALL).unwrap();
        assert_eq!(b.radius, 0.25);
    }

    #[test]
    fn unit_square_constants() {
        let s = Shape::Rectangle {
            center: vec![0.0, 0.0],
            sides: vec![1.0, 1.0],
        };
        let d = make_john_domain(&s, &grid(4)).unwrap();
        assert_eq!(d.center_x0, vec![0.0, 0.0]);
        assert_eq!(d.alpha_john, 0.5);
        assert!((d.beta_john - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.cells.count(), 64);
        assert!(d.diameter() <= 2.0 * d.beta_john * (1.0 + 1e-15));
    }

    #[test]
    fn l_shape_constants_and_cells() {
        let s = Shape::LShape {
            center: vec![0.0, 0.0],
            unit: 1.0,
        };
        let d = make_john_domain(&s, &grid(3)).unwrap();
        assert_eq!(d.cells.count(), 48);
        assert_eq!(d.center_x0, vec![-0.5, -0.5]);
        assert!(d.diameter() <= 2.0 * d.beta_john);
        // the farthest cell center from x0 is within beta
        let far = d
            .cells
            .cells()
            .map(|i| distance(&d.grid().cell_center(i), &d.center_x0))
            .fold(0.0, f64::max);
        assert!(far <= d.beta_john);
    }

    /// Walk straight segments from sampled points to `x0` and check the
    /// distance condition against the exact boundary distance of the shape.
    #[test]
    fn john_condition_on_segments() {
        fn boundary_distance(shape: &Shape, x: &[f64]) -> f64 {
            match shape {
                Shape::Rectangle { center, sides } => x
                    .iter()
                    .zip(center)
                    .zip(sides)
                    .map(|((xi, ci), a)| a / 2.0 - (xi - ci).abs())
                    .fold(f64::INFINITY, f64::min),
                Shape::LShape { unit, .. } => {
                    // distance to the complement: outer square edges and the notch
                    let (u, v) = (x[0], x[1]);
                    let outer = (unit - u.abs()).min(unit - v.abs());
                    let du = (0.0 - u).max(0.0);
                    let dv = (0.0 - v).max(0.0);
                    let notch = (du * du + dv * dv).sqrt();
                    outer.min(notch)
                }
                _ => unreachable!(),
            }
        }
        let shapes = [
            Shape::Rectangle {
                center: vec![0.0, 0.0],
                sides: vec![1.6, 0.4],
            },
            Shape::LShape {
                center: vec![0.0, 0.0],
                unit: 1.0,
            },
        ];
        for shape in shapes {
            let (alpha, beta, x0) = shape.john_constants();
            for i in 0..40 {
                for j in 0..40 {
                    let x = [-1.0 + (i as f64 + 0.5) / 20.0, -1.0 + (j as f64 + 0.5) / 20.0];
                    if !shape.contains(&x) {
                        continue;
                    }
                    let len = distance(&x, &x0);
                    assert!(len <= beta);
                    for k in 0..=50 {
                        let t = len * k as f64 / 50.0;
                        let p: Vec<f64> = (0..2).map(|a| x[a] + (x0[a] - x[a]) * t / len.max(1e-300)).collect();
                        assert!(boundary_distance(&shape, &p) >= alpha / beta * t - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn punctured_ball_drops_corner_cells() {
        let g = grid(4);
        let full = make_john_domain(&Shape::ball(vec![0.0, 0.0], 0.75), &g).unwrap();
        let punct = make_john_domain(
            &Shape::PuncturedBall {
                center: vec![0.0, 0.0],
                radius: 0.75,
            },
            &g,
        )
        .unwrap();
        assert_eq!(full.cells.count() - punct.cells.count(), 4);
        assert_eq!(punct.alpha_john, 0.75);
    }

    #[test]
    fn off_root_is_rejected() {
        let e = make_john_domain(&Shape::ball(vec![3.0, 0.0], 0.5), &grid(3));
        assert!(matches!(e, Err(Error::ShapeOutsideRoot(_))));
        let e = make_john_domain(&Shape::ball(vec![0.0, 0.0], 1.5), &grid(3));
        assert!(matches!(e, Err(Error::ShapeOutsideRoot(_))));
    }

    #[test]
    fn mean_values() {
        let g = grid(6);
        let h = g.leaf_side();
        let d = make_john_domain(&Shape::ball(vec![0.0, 0.0], 1.0), &g).unwrap();
        let b = d.mean_value_ball(DEFAULT_C_BALL).unwrap();
        let c = sample_signed(&Sampler::constant(1.7), &g).unwrap();
        assert_eq!(mean_value(&c, &d, &b).unwrap(), 1.7);
        let x1 = sample_signed(&Sampler::affine(vec![1.0, 0.0], 0.0), &g).unwrap();
        assert!(mean_value(&x1, &d, &b).unwrap().abs() <= 2.0 * h);
        let half: Vec<f64> = x1.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        assert!((mean_value(&half, &d, &b).unwrap() - 0.5).abs() <= 1e-12);
        let tiny = MeanValueBall {
            center: vec![0.01, 0.01],
            radius: 1e-4,
        };
        assert!(matches!(mean_value(&c, &d, &tiny), Err(Error::EmptyBall)));
        // linearity
        let sum: Vec<f64> = c.iter().zip(&x1).map(|(a, b)| 2.0 * a + b).collect();
        let lhs = mean_value(&sum, &d, &b).unwrap();
        let rhs = 2.0 * mean_value(&c, &d, &b).unwrap() + mean_value(&x1, &d, &b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
