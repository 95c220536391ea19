//! Planar geometry shared by the simulator and the connector.
//!
//! Everything here is generic over the scalar so the same predicates can be
//! exercised in `f32` and `f64`. The simulator itself runs in `f64`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{Float, FloatConst};
use serde::{Deserialize, Serialize};

/// Floating point scalar accepted by the geometry layer.
pub trait Scalar: Float + FloatConst + Debug + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Lossy for `f32`, exact for `f64`.
    fn lit(v: f64) -> Self;
}

impl Scalar for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    fn lit(v: f64) -> Self {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]", bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de>"))]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T> From<[T; 2]> for Vec2<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Vec2 { x, y }
    }
}

impl<T> From<Vec2<T>> for [T; 2] {
    fn from(v: Vec2<T>) -> Self {
        [v.x, v.y]
    }
}

impl<T: Scalar> Vec2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2::new(T::zero(), T::zero())
    }

    /// Unit vector at `angle` radians, counter-clockwise from +x.
    pub fn from_angle(angle: T) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is to the left.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn scale(self, s: T) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        (n > T::zero()).then(|| self.scale(T::one() / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = a % two_pi;
    if w <= -T::PI() {
        w = w + two_pi;
    } else if w > T::PI() {
        w = w - two_pi;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de>"))]
pub struct Segment<T> {
    pub a: Vec2<T>,
    pub b: Vec2<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn new(a: Vec2<T>, b: Vec2<T>) -> Self {
        Segment { a, b }
    }

    pub fn midpoint(&self) -> Vec2<T> {
        (self.a + self.b).scale(T::lit(0.5))
    }

    pub fn distance_to_point(&self, p: Vec2<T>) -> T {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        if len2 == T::zero() {
            return p.distance(self.a);
        }
        let t = ((p - self.a).dot(ab) / len2).max(T::zero()).min(T::one());
        p.distance(self.a + ab.scale(t))
    }
}

/// Parameter `t` in `[0, 1]` along `p0 -> p1` where it first crosses `seg`.
///
/// Collinear overlaps count as a hit at the first shared point.
pub fn segment_intersection<T: Scalar>(p0: Vec2<T>, p1: Vec2<T>, seg: &Segment<T>) -> Option<T> {
    let r = p1 - p0;
    let s = seg.b - seg.a;
    let denom = r.cross(s);
    let qp = seg.a - p0;
    let eps = T::epsilon() * T::lit(16.0);
    if denom.abs() <= eps {
        if qp.cross(r).abs() > eps {
            return None;
        }
        let rr = r.dot(r);
        if rr == T::zero() {
            return None;
        }
        let t0 = qp.dot(r) / rr;
        let t1 = (seg.b - p0).dot(r) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if hi < T::zero() || lo > T::one() {
            return None;
        }
        return Some(lo.max(T::zero()));
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if t >= T::zero() && t <= T::one() && u >= T::zero() && u <= T::one() {
        Some(t)
    } else {
        None
    }
}

/// Smallest `t` in `[0, 1]` at which `p0 -> p1` enters the disc, if any.
///
/// A start point already inside the disc returns `None`; moving out of an
/// obstacle is never blocked.
pub fn segment_circle_entry<T: Scalar>(p0: Vec2<T>, p1: Vec2<T>, center: Vec2<T>, radius: T) -> Option<T> {
    let d = p1 - p0;
    let f = p0 - center;
    let c = f.dot(f) - radius * radius;
    if c <= T::zero() {
        return None;
    }
    let a = d.dot(d);
    if a == T::zero() {
        return None;
    }
    let b = T::lit(2.0) * f.dot(d);
    let disc = b * b - T::lit(4.0) * a * c;
    if disc < T::zero() {
        return None;
    }
    let t = (-b - disc.sqrt()) / (T::lit(2.0) * a);
    (t >= T::zero() && t <= T::one()).then_some(t)
}

/// Point-in-convex-polygon test, boundary inclusive. Works for either winding.
pub fn point_in_convex_polygon<T: Scalar>(p: Vec2<T>, poly: &[Vec2<T>]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let mut sign = 0i8;
    for (i, &a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        let c = (b - a).cross(p - a);
        if c == T::zero() {
            continue;
        }
        let s = if c > T::zero() { 1 } else { -1 };
        if sign == 0 {
            sign = s;
        } else if sign != s {
            return false;
        }
    }
    true
}

/// True when the polygon is convex with non-zero area.
pub fn is_convex<T: Scalar>(poly: &[Vec2<T>]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    let mut sign = 0i8;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let z = (b - a).cross(c - b);
        if z == T::zero() {
            continue;
        }
        let s = if z > T::zero() { 1 } else { -1 };
        if sign == 0 {
            sign = s;
        } else if sign != s {
            return false;
        }
    }
    sign != 0
}

/// Distance from a point to a disc boundary; zero inside.
pub fn distance_to_disc<T: Scalar>(p: Vec2<T>, center: Vec2<T>, radius: T) -> T {
    (p.distance(center) - radius).max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(0.5f32) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn segment_crossing() {
        let wall = Segment::new(v(1.0, -1.0), v(1.0, 1.0));
        let t = segment_intersection(v(0.0, 0.0), v(2.0, 0.0), &wall).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert!(segment_intersection(v(0.0, 2.0), v(2.0, 2.0), &wall).is_none());
    }

    #[test]
    fn segment_crossing_f32() {
        let wall = Segment::new(Vec2::new(1.0f32, -1.0), Vec2::new(1.0, 1.0));
        let t = segment_intersection(Vec2::new(0.0f32, 0.0), Vec2::new(4.0, 0.0), &wall).unwrap();
        assert!((t - 0.25).abs() < 1e-6);
    }

    #[test]
    fn circle_entry() {
        let t = segment_circle_entry(v(0.0, 0.0), v(4.0, 0.0), v(2.0, 0.0), 0.5).unwrap();
        assert!((t - 0.375).abs() < 1e-12);
        assert!(segment_circle_entry(v(2.0, 0.0), v(4.0, 0.0), v(2.0, 0.0), 0.5).is_none());
    }

    #[test]
    fn convex_polygon() {
        let sq = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)];
        assert!(point_in_convex_polygon(v(0.5, 0.5), &sq));
        assert!(point_in_convex_polygon(v(1.0, 0.5), &sq));
        assert!(!point_in_convex_polygon(v(1.5, 0.5), &sq));
        assert!(is_convex(&sq));
        assert!(!is_convex(&[v(0.0, 0.0), v(2.0, 0.0), v(1.0, 0.2), v(1.0, 2.0)]));
    }

    proptest! {
        #[test]
        fn wrap_stays_in_range(a in -100.0f64..100.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
            let k = ((a - w) / (2.0 * std::f64::consts::PI)).round();
            prop_assert!((a - w - k * 2.0 * std::f64::consts::PI).abs() < 1e-9);
        }

        #[test]
        fn rotate_preserves_norm(x in -10.0f64..10.0, y in -10.0f64..10.0, a in -7.0f64..7.0) {
            let p = v(x, y);
            prop_assert!((p.rotate(a).norm() - p.norm()).abs() < 1e-9);
        }
    }
}
