//! Stadium-shaped lane centerline and ground-truth tracking errors.
//!
//! The centerline is the set of points at distance `radius` from a central
//! axis segment, giving two straights joined by two half-circle arcs. Travel
//! is counterclockwise. The signed lateral offset of a point is positive on
//! the inside (left of travel); its magnitude is the distance error.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, counterclockwise from +x.
    pub heading: f64,
}

impl Pose {
    pub fn heading_unit(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }
}

/// Closed stadium centerline: straights of length `2 * half_len` at `y =
/// +-radius`, arcs of `radius` around `(+-half_len, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub half_len: f64,
    pub radius: f64,
}

/// Which piece of the centerline is nearest: 0 bottom straight, 1 right arc,
/// 2 top straight, 3 left arc. Joints and the degenerate axis resolve to the
/// lowest applicable index.
pub type SegmentId = u8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackErrors {
    /// Distance from the point to the centerline, meters, >= 0.
    pub d_err_m: f64,
    /// Unsigned angle between heading and the local travel direction,
    /// degrees in [0, 180].
    pub beta_err_deg: f64,
    /// Signed lateral offset, positive toward the inside (left of travel).
    pub offset_m: f64,
    pub segment: SegmentId,
}

impl Track {
    pub fn new(straight_len: f64, radius: f64) -> Self {
        Track {
            half_len: straight_len / 2.0,
            radius,
        }
    }

    pub fn perimeter(&self) -> f64 {
        4.0 * self.half_len + 2.0 * std::f64::consts::PI * self.radius
    }

    /// Start pose: middle of the bottom straight, facing travel (+x).
    pub fn start_pose(&self) -> Pose {
        Pose {
            x: 0.0,
            y: -self.radius,
            heading: 0.0,
        }
    }

    /// Signed lateral offset, unit travel tangent at the nearest centerline
    /// point, and segment id, for an arbitrary point.
    pub fn offset_tangent(&self, x: f64, y: f64) -> (f64, (f64, f64), SegmentId) {
        // Project onto the axis segment (-half_len,0)..(half_len,0).
        let qx = x.clamp(-self.half_len, self.half_len);
        let dx = x - qx;
        let dist = (dx * dx + y * y).sqrt();
        // Outward radial direction; on the axis itself fall back to the
        // bottom straight's outward normal so the result stays defined.
        let (rx, ry) = if dist > 0.0 {
            (dx / dist, y / dist)
        } else {
            (0.0, -1.0)
        };
        let tangent = (-ry, rx);
        let offset = self.radius - dist;
        let segment: SegmentId = if x > self.half_len {
            1
        } else if x < -self.half_len {
            3
        } else if y < 0.0 || dist == 0.0 {
            0
        } else {
            2
        };
        (offset, tangent, segment)
    }

    /// Nearest centerline point to `(x, y)`.
    pub fn nearest_point(&self, x: f64, y: f64) -> (f64, f64) {
        let qx = x.clamp(-self.half_len, self.half_len);
        let dx = x - qx;
        let dist = (dx * dx + y * y).sqrt();
        let (rx, ry) = if dist > 0.0 {
            (dx / dist, y / dist)
        } else {
            (0.0, -1.0)
        };
        (qx + rx * self.radius, ry * self.radius)
    }

    pub fn errors(&self, pose: &Pose) -> TrackErrors {
        let (offset, (tx, ty), segment) = self.offset_tangent(pose.x, pose.y);
        let (hx, hy) = pose.heading_unit();
        let cos_b = (hx * tx + hy * ty).clamp(-1.0, 1.0);
        TrackErrors {
            d_err_m: offset.abs(),
            beta_err_deg: cos_b.acos().to_degrees(),
            offset_m: offset,
            segment,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn track() -> Track {
        Track::new(10.0, 2.0)
    }

    #[test]
    fn perimeter_closed_form() {
        assert_relative_eq!(
            track().perimeter(),
            20.0 + 4.0 * std::f64::consts::PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn on_centerline_aligned_has_zero_errors() {
        let t = track();
        let e = t.errors(&t.start_pose());
        assert_eq!(e.d_err_m, 0.0);
        assert_eq!(e.beta_err_deg, 0.0);
        assert_eq!(e.segment, 0);
    }

    #[test]
    fn reversed_heading_is_180_degrees() {
        let t = track();
        let mut p = t.start_pose();
        p.heading = std::f64::consts::PI;
        let e = t.errors(&p);
        assert_relative_eq!(e.beta_err_deg, 180.0, epsilon = 1e-9);
    }

    #[test]
    fn perpendicular_offset_on_straight() {
        let t = track();
        // 0.05 m inside the bottom straight.
        let p = Pose {
            x: 1.0,
            y: -1.95,
            heading: 0.0,
        };
        let e = t.errors(&p);
        assert_relative_eq!(e.d_err_m, 0.05, epsilon = 1e-12);
        assert_relative_eq!(e.offset_m, 0.05, epsilon = 1e-12);
        assert_eq!(e.beta_err_deg, 0.0);
    }

    #[test]
    fn tangents_follow_counterclockwise_travel() {
        let t = track();
        let cases = [
            ((0.0, -2.0), (1.0, 0.0), 0u8),  // bottom: +x
            ((7.0, 0.0), (0.0, 1.0), 1u8),   // right arc apex: +y
            ((0.0, 2.0), (-1.0, 0.0), 2u8),  // top: -x
            ((-7.0, 0.0), (0.0, -1.0), 3u8), // left arc apex: -y
        ];
        for ((x, y), (wtx, wty), seg) in cases {
            let (off, (tx, ty), s) = t.offset_tangent(x, y);
            assert_relative_eq!(off, 0.0, epsilon = 1e-12);
            assert_relative_eq!(tx, wtx, epsilon = 1e-12);
            assert_relative_eq!(ty, wty, epsilon = 1e-12);
            assert_eq!(s, seg, "at ({x}, {y})");
        }
    }

    #[test]
    fn inside_is_positive_outside_is_negative() {
        let t = track();
        let (inside, _, _) = t.offset_tangent(0.0, -1.5);
        let (outside, _, _) = t.offset_tangent(0.0, -2.5);
        assert_relative_eq!(inside, 0.5, epsilon = 1e-12);
        assert_relative_eq!(outside, -0.5, epsilon = 1e-12);
        // Same on an arc.
        let (ai, _, _) = t.offset_tangent(6.5, 0.0);
        let (ao, _, _) = t.offset_tangent(7.5, 0.0);
        assert_relative_eq!(ai, 0.5, epsilon = 1e-12);
        assert_relative_eq!(ao, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn joint_ties_resolve_to_lowest_index() {
        let t = track();
        // Below the joint between bottom straight and right arc: both pieces
        // are equidistant; the straight (index 0) wins.
        let (_, _, s) = t.offset_tangent(5.0, -2.0);
        assert_eq!(s, 0);
        // The degenerate axis center is equidistant from everything.
        let (off, _, s) = t.offset_tangent(0.0, 0.0);
        assert_relative_eq!(off, 2.0, epsilon = 1e-12);
        assert_eq!(s, 0);
    }

    #[test]
    fn nearest_point_lies_on_centerline() {
        let t = track();
        for &(x, y) in &[(1.0, -1.7), (6.3, 1.1), (-5.9, -0.4), (2.0, 2.6)] {
            let (nx, ny) = t.nearest_point(x, y);
            let (off, _, _) = t.offset_tangent(nx, ny);
            assert!(off.abs() < 1e-12, "({nx}, {ny}) offset {off}");
        }
    }

    /// Brute-force distance to a densely sampled centerline.
    fn sampled_d_err(t: &Track, x: f64, y: f64) -> f64 {
        let n = 40_000;
        let per = t.perimeter();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let s = per * i as f64 / n as f64;
            let (cx, cy) = point_at(t, s);
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            best = best.min(d);
        }
        best
    }

    /// Arc-length parametrization used only as a test oracle.
    fn point_at(t: &Track, s: f64) -> (f64, f64) {
        let straight = 2.0 * t.half_len;
        let arc = std::f64::consts::PI * t.radius;
        if s < straight {
            (-t.half_len + s, -t.radius)
        } else if s < straight + arc {
            let a = (s - straight) / t.radius - std::f64::consts::FRAC_PI_2;
            (t.half_len + t.radius * a.cos(), t.radius * a.sin())
        } else if s < 2.0 * straight + arc {
            (t.half_len - (s - straight - arc), t.radius)
        } else {
            let a = (s - 2.0 * straight - arc) / t.radius + std::f64::consts::FRAC_PI_2;
            (-t.half_len + t.radius * a.cos(), t.radius * a.sin())
        }
    }

    proptest! {
        #[test]
        fn distance_matches_sampled_centerline(x in -9.0f64..9.0, y in -5.0f64..5.0) {
            let t = track();
            let (off, _, _) = t.offset_tangent(x, y);
            let brute = sampled_d_err(&t, x, y);
            prop_assert!((off.abs() - brute).abs() < 1e-3,
                "closed form {} vs sampled {}", off.abs(), brute);
        }

        #[test]
        fn beta_err_stays_in_range(x in -9.0f64..9.0, y in -5.0f64..5.0, h in -7.0f64..7.0) {
            let t = track();
            let e = t.errors(&Pose { x, y, heading: h });
            prop_assert!((0.0..=180.0).contains(&e.beta_err_deg));
            prop_assert!(e.d_err_m >= 0.0);
        }

        #[test]
        fn tangent_is_unit_length(x in -9.0f64..9.0, y in -5.0f64..5.0) {
            let t = track();
            let (_, (tx, ty), _) = t.offset_tangent(x, y);
            prop_assert!(((tx * tx + ty * ty).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}
