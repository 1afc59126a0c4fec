//! Log-intensity change detector modeled on event cameras.
//!
//! Each pixel keeps a reference log intensity. When a new frame arrives, the
//! pixel emits one event per full threshold crossing of
//! `ln(I + eps) - reference` and moves its reference by that many threshold
//! quanta, keeping the sub-threshold residual. The first frame only primes
//! the references. Event polarity is not tracked; downstream consumers see
//! per-pixel event counts in row-major order (`index = y * width + x`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VisionError {
    #[error("frame has {got} pixels, camera expects {want}")]
    FrameSize { got: usize, want: usize },
    #[error("pooling window {win} does not tile {width}x{height}")]
    PoolMismatch { win: usize, width: usize, height: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvsCamera {
    width: usize,
    height: usize,
    threshold: f64,
    eps: f64,
    ref_log: Vec<f64>,
    prev: Vec<f64>,
    primed: bool,
}

impl DvsCamera {
    pub fn new(width: usize, height: usize, threshold: f64, eps: f64) -> Self {
        let n = width * height;
        DvsCamera {
            width,
            height,
            threshold,
            eps,
            ref_log: vec![0.0; n],
            prev: vec![0.0; n],
            primed: false,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Ingest a linear-intensity frame and write per-pixel event counts.
    /// Returns the total number of events. Pixels whose intensity is
    /// bit-identical to the previous frame are skipped: after an emission the
    /// residual is below threshold, so an unchanged pixel cannot fire again.
    pub fn process(&mut self, frame: &[f64], counts: &mut [u16]) -> Result<u32, VisionError> {
        let n = self.pixels();
        if frame.len() != n || counts.len() != n {
            return Err(VisionError::FrameSize {
                got: frame.len().min(counts.len()),
                want: n,
            });
        }
        if !self.primed {
            for i in 0..n {
                self.ref_log[i] = (frame[i] + self.eps).ln();
                self.prev[i] = frame[i];
            }
            counts.fill(0);
            self.primed = true;
            return Ok(0);
        }
        let mut total = 0u32;
        for i in 0..n {
            if frame[i] == self.prev[i] {
                counts[i] = 0;
                continue;
            }
            let l = (frame[i] + self.eps).ln();
            let d = l - self.ref_log[i];
            let k = (d.abs() / self.threshold).floor();
            let c = if k >= u16::MAX as f64 {
                u16::MAX
            } else {
                k as u16
            };
            if c > 0 {
                self.ref_log[i] += d.signum() * c as f64 * self.threshold;
            }
            self.prev[i] = frame[i];
            counts[i] = c;
            total += c as u32;
        }
        Ok(total)
    }
}

/// Sum event counts over non-overlapping `win` x `win` blocks. The pooled
/// grid is row-major with dimensions `(width/win, height/win)`.
pub fn pool_counts(
    counts: &[u16],
    width: usize,
    height: usize,
    win: usize,
    out: &mut [u32],
) -> Result<(), VisionError> {
    if win == 0 || width % win != 0 || height % win != 0 {
        return Err(VisionError::PoolMismatch { win, width, height });
    }
    let pw = width / win;
    let ph = height / win;
    if counts.len() != width * height || out.len() != pw * ph {
        return Err(VisionError::FrameSize {
            got: counts.len().min(out.len() * win * win),
            want: width * height,
        });
    }
    out.fill(0);
    for y in 0..height {
        let py = y / win;
        let row = &counts[y * width..(y + 1) * width];
        for x in 0..width {
            out[py * pw + x / win] += row[x] as u32;
        }
    }
    Ok(())
}
