//! Checkpoints: the complete mutable state of a run in one integrity-checked
//! file.
//!
//! Format: line one is the hex digest of line two, line two is the state as
//! a single JSON document. Restoring replays nothing; generator positions,
//! filter states, and aggregates are stored outright, so a resumed run emits
//! the same bytes the uninterrupted run would have.

use crate::decode::ActivityTrace;
use crate::harness::{EnvState, HeldCommand, RewardFilter, RunMode};
use crate::metrics::Aggregates;
use crate::network::Network;
use crate::rngs::RngSetSnapshot;
use crate::vision::DvsCamera;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
    #[error("checkpoint version {0} is not supported")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub mode: RunMode,
    pub tick: u64,
    pub windows_done: u64,
    pub beta: f64,
    pub pending_reward: f64,
    pub filter: RewardFilter,
    pub rngs: RngSetSnapshot,
    pub net: Option<Network>,
    pub camera: Option<DvsCamera>,
    pub trace: ActivityTrace,
    pub env: EnvState,
    pub held: HeldCommand,
    pub hold_left: u64,
    pub next_snap_tick: u64,
    pub aggregates: Aggregates,
}

fn digest_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(out, "{b:02x}").unwrap();
    }
    out
}

/// Write atomically: a temp file in the same directory, then rename.
pub fn save(path: &Path, ck: &Checkpoint) -> std::io::Result<()> {
    let json = serde_json::to_string(ck).expect("checkpoint serializes");
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(digest_hex(json.as_bytes()).as_bytes())?;
        f.write_all(b"\n")?;
        f.write_all(json.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines();
    let stated = lines
        .next()
        .ok_or_else(|| CheckpointError::Corrupt("empty file".into()))?;
    let json = lines
        .next()
        .ok_or_else(|| CheckpointError::Corrupt("missing state line".into()))?;
    let actual = digest_hex(json.as_bytes());
    if stated != actual {
        return Err(CheckpointError::Corrupt(format!(
            "digest mismatch: stated {stated}, actual {actual}"
        )));
    }
    let ck: Checkpoint = serde_json::from_str(json)
        .map_err(|e| CheckpointError::Corrupt(format!("bad state: {e}")))?;
    if ck.version != VERSION {
        return Err(CheckpointError::Version(ck.version));
    }
    Ok(ck)
}
