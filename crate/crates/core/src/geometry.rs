//! Capsule proximity queries.
//!
//! Robot links and the human body are both approximated by capsules
//! (swept spheres around a segment). Everything downstream of the safety
//! layer only needs the closest pair of points between two capsules and the
//! unit direction joining them.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Witness separations below this are treated as coincident.
const COINCIDENT_EPS: f64 = 1e-12;

/// Direction reported when the two witness points coincide.
pub const FALLBACK_DIRECTION: Vec3 = Vec3::new(0.0, 0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Self {
        debug_assert!(radius > 0.0, "capsule radius must be positive");
        Self { a, b, radius }
    }

    /// A capsule degenerated to a sphere.
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Self::new(center, center, radius)
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            a: self.a + offset,
            b: self.b + offset,
            radius: self.radius,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.radius > 0.0
            && self.radius.is_finite()
            && self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

/// Closest pair between two capsules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationGeometry {
    /// Surface-to-surface distance; negative when the capsules interpenetrate.
    pub distance: f64,
    /// Witness point on the first capsule's axis segment.
    pub point_a: Vec3,
    /// Witness point on the second capsule's axis segment.
    pub point_b: Vec3,
    /// Unit vector from `point_a` toward `point_b`.
    pub direction: Vec3,
    /// Set when the witnesses coincide and `direction` is the fallback axis.
    pub degenerate: bool,
}

/// Closest points between segments `[p1, q1]` and `[p2, q2]`.
///
/// Returns `(point_on_first, point_on_second, distance)`. Zero-length
/// segments are handled as points.
pub fn segment_closest_points(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (Vec3, Vec3, f64) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (s, t) = if a <= f64::EPSILON && e <= f64::EPSILON {
        (0.0, 0.0)
    } else if a <= f64::EPSILON {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            // Parallel segments have denom == 0; any s works, pick 0.
            let mut s = if denom > f64::EPSILON * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };

    let ca = p1 + d1 * s;
    let cb = p2 + d2 * t;
    let dist = (cb - ca).norm();
    (ca, cb, dist)
}

pub fn capsule_separation(cap_a: &Capsule, cap_b: &Capsule) -> SeparationGeometry {
    let (point_a, point_b, seg_dist) = segment_closest_points(&cap_a.a, &cap_a.b, &cap_b.a, &cap_b.b);
    let (direction, degenerate) = if seg_dist > COINCIDENT_EPS {
        ((point_b - point_a) / seg_dist, false)
    } else {
        (FALLBACK_DIRECTION, true)
    };
    SeparationGeometry {
        distance: seg_dist - cap_a.radius - cap_b.radius,
        point_a,
        point_b,
        direction,
        degenerate,
    }
}
