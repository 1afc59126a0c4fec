//! Run outputs: a line-per-record JSON stream plus exact in-memory
//! aggregates.
//!
//! The stream opens with a tagged header line, then carries one untagged
//! record per sampled decision window. Sparse tagged lines mark reaches,
//! off-track resets, and periodic plasticity snapshots, and the stream ends
//! with the full aggregate block. Records use one-letter keys because long
//! runs emit millions of them.
//!
//! Sampling with `every` thins only the per-window lines; aggregates are
//! accumulated from every window regardless, so derived statistics do not
//! depend on the sampling rate.

use crate::builder::TopologySummary;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

pub const SCHEMA: &str = "spore-metrics-1";

/// First line of every metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub config_hash: String,
    pub task: String,
    pub seed: u64,
    pub window_ms: f64,
    pub metrics_every: u32,
    pub topology: TopologySummary,
}

/// One decision window. Position fields are present for the reaching task,
/// lane error fields for the lane task.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowRecord {
    /// Time at the end of the window, seconds.
    pub t: f64,
    /// Raw reward sampled this window.
    pub r: f64,
    /// Smoothed reward handed to the learning rule.
    pub s: f64,
    /// Camera events this window.
    pub e: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<f64>,
    /// Lane: lateral offset error, meters.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d: Option<f64>,
    /// Lane: heading error, degrees.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b: Option<f64>,
}

/// Periodic snapshot of the plastic table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasticitySnap {
    pub t: f64,
    pub beta: f64,
    pub weak_frac: f64,
    pub theta_mean: f64,
    pub w_hist: Vec<u32>,
}

/// Sparse event marks: "reach" and "reset".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub v: String,
    pub t: f64,
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    k: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Histogram bin edges used for weight snapshots: zero, then a log ladder
/// that includes the weak-synapse threshold 0.07.
pub fn default_weight_edges() -> Vec<f64> {
    vec![
        0.0, 1e-3, 3.16e-3, 0.01, 0.0316, 0.07, 0.1, 0.316, 1.0, 3.16, 10.0, 31.6, 100.0,
    ]
}

/// Exact whole-run summaries, accumulated from every window.
///
/// Scalar series are bucketed into fixed blocks of `block_s` seconds so a
/// multi-hour run stays small; sparse events keep exact timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub block_s: f64,
    pub windows: u64,
    pub events_total: u64,
    pub reward_sum: Vec<f64>,
    pub reward_windows: Vec<u64>,
    /// Seconds spent within half a lane width of the lane center, per block.
    pub on_lane_s: Vec<f64>,
    pub reach_times_s: Vec<f64>,
    pub reset_times_s: Vec<f64>,
    pub hist_edges: Vec<f64>,
    pub snaps: Vec<PlasticitySnap>,
}

impl Aggregates {
    pub fn new(block_s: f64, duration_s: f64, hist_edges: Vec<f64>) -> Self {
        let blocks = (duration_s / block_s).ceil().max(1.0) as usize;
        Aggregates {
            block_s,
            windows: 0,
            events_total: 0,
            reward_sum: vec![0.0; blocks],
            reward_windows: vec![0; blocks],
            on_lane_s: vec![0.0; blocks],
            reach_times_s: Vec::new(),
            reset_times_s: Vec::new(),
            hist_edges,
            snaps: Vec::new(),
        }
    }

    fn block(&self, t_s: f64) -> usize {
        ((t_s / self.block_s) as usize).min(self.reward_sum.len() - 1)
    }

    pub fn record_window(
        &mut self,
        t_s: f64,
        reward: f64,
        window_s: f64,
        events: u32,
        on_lane: Option<bool>,
    ) {
        let b = self.block(t_s);
        self.windows += 1;
        self.events_total += events as u64;
        self.reward_sum[b] += reward;
        self.reward_windows[b] += 1;
        if on_lane == Some(true) {
            self.on_lane_s[b] += window_s;
        }
    }

    pub fn record_reach(&mut self, t_s: f64) {
        self.reach_times_s.push(t_s);
    }

    pub fn record_reset(&mut self, t_s: f64) {
        self.reset_times_s.push(t_s);
    }

    pub fn push_snap(&mut self, snap: PlasticitySnap) {
        self.snaps.push(snap);
    }

    pub fn reaches_in(&self, from_s: f64, to_s: f64) -> usize {
        self.reach_times_s
            .iter()
            .filter(|&&t| t >= from_s && t < to_s)
            .count()
    }

    /// Fraction of [from_s, to_s) spent on the lane, using whole blocks
    /// inside the interval.
    pub fn on_lane_fraction(&self, from_s: f64, to_s: f64) -> f64 {
        let first = (from_s / self.block_s).ceil() as usize;
        let last = ((to_s / self.block_s).floor() as usize).min(self.on_lane_s.len());
        if last <= first {
            return 0.0;
        }
        let on: f64 = self.on_lane_s[first..last].iter().sum();
        on / ((last - first) as f64 * self.block_s)
    }

    pub fn mean_reward_in(&self, from_s: f64, to_s: f64) -> f64 {
        let first = (from_s / self.block_s).ceil() as usize;
        let last = ((to_s / self.block_s).floor() as usize).min(self.reward_sum.len());
        if last <= first {
            return 0.0;
        }
        let n: u64 = self.reward_windows[first..last].iter().sum();
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = self.reward_sum[first..last].iter().sum();
        sum / n as f64
    }

    /// Snapshot nearest to `t_s`.
    pub fn snap_at(&self, t_s: f64) -> Option<&PlasticitySnap> {
        self.snaps.iter().min_by(|a, b| {
            (a.t - t_s)
                .abs()
                .partial_cmp(&(b.t - t_s).abs())
                .expect("finite snapshot times")
        })
    }
}

/// Streams records as JSON lines, thinning window records by `every`.
pub struct MetricsWriter<W: Write> {
    out: W,
    every: u64,
    windows_seen: u64,
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> io::Result<()> {
    let line = serde_json::to_string(value).expect("metrics record serializes");
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W, header: &Header, every: u32) -> io::Result<Self> {
        write_line(
            &mut out,
            &Tagged {
                k: "header",
                body: header,
            },
        )?;
        Ok(MetricsWriter {
            out,
            every: every.max(1) as u64,
            windows_seen: 0,
        })
    }

    /// Record one window; writes a line for every `every`-th call.
    pub fn window(&mut self, rec: &WindowRecord) -> io::Result<()> {
        let emit = self.windows_seen % self.every == 0;
        self.windows_seen += 1;
        if emit {
            write_line(&mut self.out, rec)?;
        }
        Ok(())
    }

    pub fn mark(&mut self, kind: &str, t_s: f64) -> io::Result<()> {
        write_line(
            &mut self.out,
            &Tagged {
                k: "mark",
                body: &Mark {
                    v: kind.to_string(),
                    t: t_s,
                },
            },
        )
    }

    pub fn snapshot(&mut self, snap: &PlasticitySnap) -> io::Result<()> {
        write_line(
            &mut self.out,
            &Tagged {
                k: "plasticity",
                body: snap,
            },
        )
    }

    pub fn finish(&mut self, agg: &Aggregates) -> io::Result<()> {
        write_line(
            &mut self.out,
            &Tagged {
                k: "aggregates",
                body: agg,
            },
        )?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parsed form of a full metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedStream {
    pub header: Header,
    pub windows: Vec<WindowRecord>,
    pub marks: Vec<Mark>,
    pub snaps: Vec<PlasticitySnap>,
    pub aggregates: Option<Aggregates>,
}

/// Parse a metrics stream produced by `MetricsWriter`.
pub fn parse_stream(text: &str) -> Result<ParsedStream, String> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or("empty stream")?;
    let head: serde_json::Value =
        serde_json::from_str(first).map_err(|e| format!("line 1: {e}"))?;
    if head.get("k").and_then(|k| k.as_str()) != Some("header") {
        return Err("stream does not start with a header".into());
    }
    let header: Header =
        serde_json::from_value(head).map_err(|e| format!("header: {e}"))?;
    let mut parsed = ParsedStream {
        header,
        windows: Vec::new(),
        marks: Vec::new(),
        snaps: Vec::new(),
        aggregates: None,
    };
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        match v.get("k").and_then(|k| k.as_str()) {
            None => parsed.windows.push(
                serde_json::from_value(v).map_err(|e| format!("line {}: {e}", i + 1))?,
            ),
            Some("mark") => parsed.marks.push(
                serde_json::from_value(v).map_err(|e| format!("line {}: {e}", i + 1))?,
            ),
            Some("plasticity") => parsed.snaps.push(
                serde_json::from_value(v).map_err(|e| format!("line {}: {e}", i + 1))?,
            ),
            Some("aggregates") => {
                parsed.aggregates = Some(
                    serde_json::from_value(v).map_err(|e| format!("line {}: {e}", i + 1))?,
                )
            }
            Some(other) => return Err(format!("line {}: unknown kind {other}", i + 1)),
        }
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header {
            schema: SCHEMA.to_string(),
            config_hash: "abc".to_string(),
            task: "reaching".to_string(),
            seed: 7,
            window_ms: 2.0,
            metrics_every: 1,
            topology: TopologySummary {
                n_visual: 4,
                n_axis: 4,
                n_motors: 2,
                has_exploration: true,
                has_noise: true,
                n_static: 10,
                n_plastic: 8,
                theta_sum: 3.5,
            },
        }
    }

    fn window(t: f64) -> WindowRecord {
        WindowRecord {
            t,
            r: 0.5,
            s: 0.25,
            e: 3,
            x: Some(1.0),
            y: Some(-2.0),
            ..WindowRecord::default()
        }
    }

    #[test]
    fn stream_round_trips() {
        let mut w = MetricsWriter::new(Vec::new(), &header(), 1).unwrap();
        w.window(&window(0.002)).unwrap();
        w.window(&window(0.004)).unwrap();
        w.mark("reach", 0.004).unwrap();
        w.snapshot(&PlasticitySnap {
            t: 0.1,
            beta: 1e-2,
            weak_frac: 0.25,
            theta_mean: 0.8,
            w_hist: vec![1, 2, 5],
        })
        .unwrap();
        let mut agg = Aggregates::new(50.0, 100.0, default_weight_edges());
        agg.record_window(0.002, 0.5, 0.002, 3, None);
        agg.record_reach(0.004);
        w.finish(&agg).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let parsed = parse_stream(&text).unwrap();
        assert_eq!(parsed.header, header());
        assert_eq!(parsed.windows.len(), 2);
        assert_eq!(parsed.windows[0], window(0.002));
        assert_eq!(parsed.marks, vec![Mark { v: "reach".into(), t: 0.004 }]);
        assert_eq!(parsed.snaps.len(), 1);
        assert_eq!(parsed.aggregates.unwrap(), agg);
    }

    #[test]
    fn lane_records_skip_position_fields() {
        let rec = WindowRecord {
            t: 1.0,
            r: 0.9,
            s: 0.8,
            e: 0,
            d: Some(0.01),
            b: Some(-3.0),
            ..WindowRecord::default()
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(!line.contains("\"x\""));
        assert!(line.contains("\"d\""));
    }

    #[test]
    fn every_thins_window_lines_only() {
        let mut w = MetricsWriter::new(Vec::new(), &header(), 3).unwrap();
        for i in 0..10 {
            w.window(&window(i as f64)).unwrap();
        }
        w.mark("reset", 5.0).unwrap();
        let agg = Aggregates::new(50.0, 100.0, vec![0.0]);
        w.finish(&agg).unwrap();
        let parsed = parse_stream(&String::from_utf8(w.into_inner()).unwrap()).unwrap();
        // Windows 0, 3, 6, 9 survive thinning; the mark always lands.
        assert_eq!(parsed.windows.len(), 4);
        assert_eq!(parsed.windows[1].t, 3.0);
        assert_eq!(parsed.marks.len(), 1);
    }

    #[test]
    fn aggregate_queries_use_whole_blocks() {
        let mut agg = Aggregates::new(50.0, 300.0, vec![0.0]);
        // 10 windows of 1 s each in block 0, half on lane, reward 2.
        for i in 0..10 {
            agg.record_window(i as f64, 2.0, 1.0, 1, Some(i % 2 == 0));
        }
        // Block 2 (100..150 s): always on lane, reward 4.
        for i in 0..10 {
            agg.record_window(100.0 + i as f64, 4.0, 1.0, 0, Some(true));
        }
        agg.record_reach(10.0);
        agg.record_reach(120.0);
        agg.record_reach(299.0);
        assert_eq!(agg.reaches_in(0.0, 150.0), 2);
        assert_eq!(agg.reaches_in(250.0, 300.0), 1);
        assert!((agg.mean_reward_in(0.0, 50.0) - 2.0).abs() < 1e-12);
        assert!((agg.mean_reward_in(100.0, 150.0) - 4.0).abs() < 1e-12);
        assert!((agg.mean_reward_in(0.0, 150.0) - 3.0).abs() < 1e-12);
        // 5 of 50 s on lane in block 0, 10 of 50 s in block 2.
        assert!((agg.on_lane_fraction(0.0, 50.0) - 0.1).abs() < 1e-12);
        assert!((agg.on_lane_fraction(100.0, 150.0) - 0.2).abs() < 1e-12);
        assert_eq!(agg.events_total, 10);
        assert_eq!(agg.windows, 20);
    }

    #[test]
    fn snap_at_picks_nearest() {
        let mut agg = Aggregates::new(50.0, 100.0, vec![0.0]);
        for t in [0.0, 600.0, 1200.0] {
            agg.push_snap(PlasticitySnap {
                t,
                beta: 1.0,
                weak_frac: 0.0,
                theta_mean: 0.0,
                w_hist: vec![],
            });
        }
        assert_eq!(agg.snap_at(590.0).unwrap().t, 600.0);
        assert_eq!(agg.snap_at(0.0).unwrap().t, 0.0);
        assert_eq!(agg.snap_at(5000.0).unwrap().t, 1200.0);
    }

    #[test]
    fn weight_edges_include_weak_threshold() {
        let edges = default_weight_edges();
        assert!(edges.contains(&0.07));
        assert!(edges.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(edges[0], 0.0);
    }
}
