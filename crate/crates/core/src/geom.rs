//! Small fixed-size vector helpers.
//!
//! Positions are always stored as `[f64; 3]`; two-dimensional code leaves the
//! third component at zero.

use std::f64::consts::PI;

pub type Point = [f64; 3];

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s * b`
#[inline]
pub fn axpy(a: &Point, s: f64, b: &Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalize(a: &Point) -> Point {
    let n = norm(a);
    if n == 0.0 {
        [1.0, 0.0, 0.0]
    } else {
        scale(a, 1.0 / n)
    }
}

/// Two unit vectors completing `axis` (assumed unit) to a right-handed
/// orthonormal frame.
pub fn complete_frame(axis: &Point) -> (Point, Point) {
    let helper = if axis[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let u = normalize(&cross(axis, &helper));
    let v = cross(axis, &u);
    (u, v)
}

/// Unit vector at polar angle `angle` in the plane.
#[inline]
pub fn planar_direction(angle: f64) -> Point {
    [angle.cos(), angle.sin(), 0.0]
}

/// Surface measure of the unit sphere S^{n-1}.
pub fn unit_sphere_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// A closed ball (disc in 2D).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, x: &Point) -> bool {
        dist(x, &self.center) <= self.radius
    }

    /// Ball with the same center, enlarged by `margin`.
    pub fn grown(&self, margin: f64) -> Self {
        Self::new(self.center, self.radius + margin)
    }
}

/// Half-width of the angular window, seen from the center of a sphere of
/// radius `r` at distance `d0` from a ball of radius `rho`, inside which the
/// sphere can intersect the ball. `None` if they do not intersect, `Some(PI)`
/// if the whole sphere may.
pub fn intersection_half_angle(r: f64, d0: f64, rho: f64) -> Option<f64> {
    if d0 <= 0.0 {
        return if r <= rho { Some(PI) } else { None };
    }
    let c = (r * r + d0 * d0 - rho * rho) / (2.0 * r * d0);
    if c >= 1.0 {
        None
    } else if c <= -1.0 {
        Some(PI)
    } else {
        Some(c.acos())
    }
}
