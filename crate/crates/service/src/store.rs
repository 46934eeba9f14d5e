//! Durable record storage.
//!
//! The file store keeps records as numbered newline-delimited segment files. Every batch is
//! written to a temporary file, synced, then renamed into place, so a crash leaves either
//! the whole batch or none of it. A leaderboard snapshot is rewritten the same way.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use gamebot_core::GameRecord;

use crate::elo::LeaderboardEntry;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store unavailable: {0}")]
    Unavailable(String),
    #[error("corrupt record in {file}: {reason}")]
    Corrupt { file: String, reason: String },
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Unavailable(e.to_string())
    }
}

pub trait RecordStore: Send {
    /// Persists the records whose ids are not stored yet; returns how many were new.
    fn append(&mut self, batch: &[GameRecord]) -> Result<usize, StoreError>;
    /// Every stored record in write order.
    fn records(&self) -> Result<Vec<GameRecord>, StoreError>;
    fn contains(&self, record_id: &str) -> bool;
    fn write_snapshot(&mut self, entries: &[LeaderboardEntry]) -> Result<(), StoreError>;
}

/// Simulated crash points for the file store. Each fires once.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Fail before anything is written.
    BeforeWrite,
    /// Fail after the temporary file is written but before it is renamed.
    BeforeRename,
    /// Fail after the rename, so the batch is durable but the caller sees an error.
    AfterRename,
}

#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
    ids: HashSet<String>,
    next_segment: u64,
    faults: Vec<Fault>,
    batch_writes: usize,
}

const SEGMENT_PREFIX: &str = "records-";
const SEGMENT_SUFFIX: &str = ".ndjson";
pub const SNAPSHOT_FILE: &str = "leaderboard.json";

impl FileStore {
    /// Opens or creates a store in `dir`, indexing existing record ids and discarding
    /// temporary files left by an interrupted write.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "tmp") {
                fs::remove_file(path)?;
            }
        }
        let mut store = FileStore {
            dir,
            ids: HashSet::new(),
            next_segment: 0,
            faults: Vec::new(),
            batch_writes: 0,
        };
        let segments = store.segments()?;
        store.next_segment = segments.last().map_or(0, |(n, _)| n + 1);
        for rec in store.records()? {
            store.ids.insert(rec.record_id);
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Queues a simulated failure for a later append.
    pub fn inject(&mut self, fault: Fault) {
        self.faults.push(fault);
    }

    /// Number of segment files written by this handle.
    pub fn batch_writes(&self) -> usize {
        self.batch_writes
    }

    fn take_fault(&mut self, at: Fault) -> Result<(), StoreError> {
        if let Some(i) = self.faults.iter().position(|f| *f == at) {
            self.faults.remove(i);
            return Err(StoreError::Unavailable(format!("simulated crash: {at:?}")));
        }
        Ok(())
    }

    fn segments(&self) -> Result<Vec<(u64, PathBuf)>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(num) = name
                .strip_prefix(SEGMENT_PREFIX)
                .and_then(|n| n.strip_suffix(SEGMENT_SUFFIX))
                .and_then(|n| n.parse().ok())
            else {
                continue;
            };
            out.push((num, path));
        }
        out.sort();
        Ok(out)
    }
}

/// Writes `contents` to `path` through a synced temporary file and a rename.
fn write_atomically(
    path: &Path,
    contents: &[u8],
    before_rename: impl FnOnce() -> Result<(), StoreError>,
) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(contents)?;
    f.sync_all()?;
    before_rename()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl RecordStore for FileStore {
    fn append(&mut self, batch: &[GameRecord]) -> Result<usize, StoreError> {
        self.take_fault(Fault::BeforeWrite)?;
        let mut fresh = Vec::new();
        let mut seen = HashSet::new();
        for rec in batch {
            if !self.ids.contains(&rec.record_id) && seen.insert(rec.record_id.as_str()) {
                fresh.push(rec);
            }
        }
        if fresh.is_empty() {
            return Ok(0);
        }
        let mut text = String::new();
        for rec in &fresh {
            text.push_str(&rec.to_json_line());
            text.push('\n');
        }
        let path = self.dir.join(format!(
            "{SEGMENT_PREFIX}{:08}{SEGMENT_SUFFIX}",
            self.next_segment
        ));
        let before_rename = {
            let fault = self.take_fault(Fault::BeforeRename);
            move || fault
        };
        write_atomically(&path, text.as_bytes(), before_rename)?;
        self.next_segment += 1;
        self.batch_writes += 1;
        for rec in &fresh {
            self.ids.insert(rec.record_id.clone());
        }
        self.take_fault(Fault::AfterRename)?;
        Ok(fresh.len())
    }

    fn records(&self) -> Result<Vec<GameRecord>, StoreError> {
        let mut out = Vec::new();
        for (_, path) in self.segments()? {
            let text = fs::read_to_string(&path)?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                out.push(serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                    file: path.display().to_string(),
                    reason: e.to_string(),
                })?);
            }
        }
        Ok(out)
    }

    fn contains(&self, record_id: &str) -> bool {
        self.ids.contains(record_id)
    }

    fn write_snapshot(&mut self, entries: &[LeaderboardEntry]) -> Result<(), StoreError> {
        let text = serde_json::to_string_pretty(entries).expect("entries serialize");
        write_atomically(&self.dir.join(SNAPSHOT_FILE), text.as_bytes(), || Ok(()))
    }
}
