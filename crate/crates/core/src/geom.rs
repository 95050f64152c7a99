//! Planar vectors and directions in turn units.

use core::f64::consts::PI;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// A vector (or point) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3d cross product; positive when `other` is
    /// counterclockwise from `self`.
    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    /// Rotation by +90 degrees.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Angle of the vector in radians, in `(-pi, pi]`.
    #[inline]
    pub fn angle(self) -> f64 {
        libm::atan2(self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn wrap_unit(t: f64) -> f64 {
    let r = t - libm::floor(t);
    // `t - floor(t)` can round up to exactly 1.0 for tiny negative inputs.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance between two points of the circle `[0, 1)`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_unit(a - b);
    if d > 0.5 {
        1.0 - d
    } else {
        d
    }
}

/// Signed difference `a - b` reduced to `[-1/2, 1/2)`.
#[inline]
pub fn signed_turn_difference(a: f64, b: f64) -> f64 {
    wrap_unit(a - b + 0.5) - 0.5
}

/// A flow direction in turn units: the geometric angle is `2*pi*tau`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Direction {
    tau: f64,
}

impl Direction {
    /// Builds a direction, reducing `tau` mod 1.
    pub fn new(tau: f64) -> Self {
        Direction {
            tau: wrap_unit(tau),
        }
    }

    pub fn from_vector(v: Vec2) -> Self {
        Direction::new(v.angle() / (2.0 * PI))
    }

    #[inline]
    pub fn tau(self) -> f64 {
        self.tau
    }

    /// Geometric angle in radians.
    #[inline]
    pub fn radians(self) -> f64 {
        2.0 * PI * self.tau
    }

    pub fn unit(self) -> Vec2 {
        let (s, c) = libm::sincos(self.radians());
        Vec2::new(c, s)
    }

    pub fn reversed(self) -> Self {
        Direction::new(self.tau + 0.5)
    }

    /// Representative in `[0, 1/2)`; a line and its reverse share it.
    pub fn unoriented(self) -> Self {
        if self.tau >= 0.5 {
            Direction {
                tau: self.tau - 0.5,
            }
        } else {
            self
        }
    }
}

/// Angle in `[0, 2*pi)` swept counterclockwise from `from` to `to`.
pub fn ccw_angle(from: Vec2, to: Vec2) -> f64 {
    let a = libm::atan2(from.cross(to), from.dot(to));
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Twice the signed area of a closed polygon (positive when counterclockwise).
pub fn signed_area2(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum()
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let len2 = e.norm2();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    (a + e * s - p).norm()
}

/// Whether the closed segments `[a, b]` and `[c, d]` intersect.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    fn orient(p: Vec2, q: Vec2, r: Vec2) -> f64 {
        (q - p).cross(r - p)
    }
    fn on_segment(p: Vec2, q: Vec2, r: Vec2) -> bool {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_circle_distance() {
        assert_eq!(wrap_unit(1.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(-1e-300), 0.0);
        assert!((circle_distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert!((signed_turn_difference(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert!((signed_turn_difference(0.95, 0.05) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn direction_round_trip() {
        let d = Direction::from_vector(Vec2::new(1.0, 1.0));
        assert!((d.tau() - 0.125).abs() < 1e-15);
        let u = d.unit();
        assert!((u.x - u.y).abs() < 1e-15);
        assert!((d.reversed().tau() - 0.625).abs() < 1e-15);
        assert_eq!(d.reversed().unoriented(), d);
        assert!((Direction::from_vector(Vec2::new(1.0, -1.0)).tau() - 0.875).abs() < 1e-15);
    }

    #[test]
    fn ccw_angle_range() {
        let e = Vec2::new(1.0, 0.0);
        assert!((ccw_angle(e, Vec2::new(0.0, 1.0)) - PI / 2.0).abs() < 1e-15);
        assert!((ccw_angle(e, Vec2::new(0.0, -1.0)) - 1.5 * PI).abs() < 1e-15);
        assert_eq!(ccw_angle(e, e), 0.0);
    }

    #[test]
    fn segment_helpers() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(1.0, 0.0);
        assert!((point_segment_distance(Vec2::new(0.5, 2.0), a, b) - 2.0).abs() < 1e-15);
        assert!((point_segment_distance(Vec2::new(3.0, 0.0), a, b) - 2.0).abs() < 1e-15);
        assert!(segments_intersect(a, b, Vec2::new(0.5, -1.0), Vec2::new(0.5, 1.0)));
        assert!(!segments_intersect(a, b, Vec2::new(2.0, -1.0), Vec2::new(2.0, 1.0)));
        assert!(segments_intersect(a, b, b, Vec2::new(2.0, 2.0)));
    }
}
