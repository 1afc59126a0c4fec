//! Flat-shaded overhead rasterizers feeding the event camera.
//!
//! Both views sample intensity at pixel centers with no anti-aliasing, so a
//! frame is a pure function of scene state and event counts are reproducible
//! bit for bit. Intensities are linear in [0, 1]. Pixel (0, 0) is the top-left
//! corner of the image; frames are row-major.

use crate::track::{Pose, Track};
use serde::{Deserialize, Serialize};

/// Fixed camera over the whole reaching plane. The ball is a dark disk on a
/// light ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachingRenderer {
    width: usize,
    height: usize,
    half_extent_m: f64,
    ball_radius_m: f64,
    ground: f64,
    ball: f64,
}

impl ReachingRenderer {
    pub fn new(
        width: usize,
        height: usize,
        half_extent_m: f64,
        ball_radius_m: f64,
        ground: f64,
        ball: f64,
    ) -> Self {
        ReachingRenderer {
            width,
            height,
            half_extent_m,
            ball_radius_m,
            ground,
            ball,
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// World position of a pixel center. Row 0 is the +y edge of the plane.
    fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        let sx = 2.0 * self.half_extent_m / self.width as f64;
        let sy = 2.0 * self.half_extent_m / self.height as f64;
        (
            -self.half_extent_m + (col as f64 + 0.5) * sx,
            self.half_extent_m - (row as f64 + 0.5) * sy,
        )
    }

    pub fn render(&self, ball_x: f64, ball_y: f64, frame: &mut [f64]) {
        assert_eq!(frame.len(), self.pixels());
        let r2 = self.ball_radius_m * self.ball_radius_m;
        for row in 0..self.height {
            let base = row * self.width;
            for col in 0..self.width {
                let (x, y) = self.pixel_center(col, row);
                let dx = x - ball_x;
                let dy = y - ball_y;
                frame[base + col] = if dx * dx + dy * dy <= r2 {
                    self.ball
                } else {
                    self.ground
                };
            }
        }
    }
}

/// Shading bands of the road surface by signed lateral offset from the lane
/// centerline (positive toward the inside of the track).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadShading {
    /// Painted line centers relative to the lane centerline.
    pub marking_offsets_m: [f64; 3],
    pub marking_half_width_m: f64,
    /// Road surface extent: [right edge, left edge] of the paved area.
    pub road_span_m: (f64, f64),
    pub marking: f64,
    pub road: f64,
    pub shoulder: f64,
}

impl Default for RoadShading {
    fn default() -> Self {
        RoadShading {
            marking_offsets_m: [-0.25, 0.25, 0.75],
            marking_half_width_m: 0.05,
            road_span_m: (-0.3, 0.8),
            marking: 0.9,
            road: 0.15,
            shoulder: 0.5,
        }
    }
}

impl RoadShading {
    pub fn intensity(&self, offset_m: f64) -> f64 {
        for &m in &self.marking_offsets_m {
            if (offset_m - m).abs() <= self.marking_half_width_m {
                return self.marking;
            }
        }
        if offset_m >= self.road_span_m.0 && offset_m <= self.road_span_m.1 {
            self.road
        } else {
            self.shoulder
        }
    }
}

/// Vehicle-mounted top-down camera covering a strip of ground ahead of the
/// pose. Columns span the lateral axis (left edge of the image is the left of
/// the vehicle), rows the forward axis (row 0 farthest ahead).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneRenderer {
    width: usize,
    height: usize,
    shading: RoadShading,
    /// Per-pixel (forward, lateral) ground offsets in the vehicle frame.
    fwd: Vec<f64>,
    lat: Vec<f64>,
}

impl LaneRenderer {
    pub fn new(
        width: usize,
        height: usize,
        lateral_span_m: f64,
        forward_near_m: f64,
        forward_far_m: f64,
        shading: RoadShading,
    ) -> Self {
        let mut fwd = Vec::with_capacity(width * height);
        let mut lat = Vec::with_capacity(width * height);
        let col_step = lateral_span_m / width as f64;
        let row_step = (forward_far_m - forward_near_m) / height as f64;
        for row in 0..height {
            let f = forward_far_m - (row as f64 + 0.5) * row_step;
            for col in 0..width {
                fwd.push(f);
                lat.push(lateral_span_m / 2.0 - (col as f64 + 0.5) * col_step);
            }
        }
        LaneRenderer {
            width,
            height,
            shading,
            fwd,
            lat,
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn render(&self, pose: &Pose, track: &Track, frame: &mut [f64]) {
        assert_eq!(frame.len(), self.pixels());
        let (hx, hy) = pose.heading_unit();
        for i in 0..frame.len() {
            let f = self.fwd[i];
            let l = self.lat[i];
            let wx = pose.x + f * hx - l * hy;
            let wy = pose.y + f * hy + l * hx;
            let (off, _, _) = track.offset_tangent(wx, wy);
            frame[i] = self.shading.intensity(off);
        }
    }
}
