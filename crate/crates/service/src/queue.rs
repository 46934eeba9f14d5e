//! Pending records awaiting batched persistence.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use gamebot_core::GameRecord;

use crate::store::{RecordStore, StoreError};

pub const DEFAULT_FLUSH_INTERVAL: Duration = Duration::from_secs(5);
pub const DEFAULT_BATCH_SIZE: usize = 50;

/// Arrival-ordered queue. A record leaves the queue only after the store accepted the batch
/// holding it, so a failed write keeps it for the next flush.
#[derive(Debug)]
pub struct SyncQueue {
    pending: Mutex<VecDeque<GameRecord>>,
    pub flush_interval: Duration,
    pub batch_size: usize,
}

impl Default for SyncQueue {
    fn default() -> Self {
        Self::new(DEFAULT_FLUSH_INTERVAL, DEFAULT_BATCH_SIZE)
    }
}

impl SyncQueue {
    pub fn new(flush_interval: Duration, batch_size: usize) -> Self {
        SyncQueue {
            pending: Mutex::new(VecDeque::new()),
            flush_interval,
            batch_size: batch_size.max(1),
        }
    }

    /// Adds a record; returns true when a full batch is waiting.
    pub fn enqueue(&self, record: GameRecord) -> bool {
        let mut pending = self.pending.lock().unwrap();
        pending.push_back(record);
        pending.len() >= self.batch_size
    }

    pub fn len(&self) -> usize {
        self.pending.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pending_ids(&self) -> Vec<String> {
        self.pending
            .lock()
            .unwrap()
            .iter()
            .map(|r| r.record_id.clone())
            .collect()
    }

    /// Writes everything pending in batches of `batch_size`. Returns the number of records
    /// newly persisted. The store lock serializes flushers; enqueuers only append behind the
    /// batch being written.
    pub fn flush(&self, store: &Mutex<Box<dyn RecordStore>>) -> Result<usize, StoreError> {
        let mut store = store.lock().unwrap();
        let mut persisted = 0;
        loop {
            let batch: Vec<GameRecord> = {
                let pending = self.pending.lock().unwrap();
                pending.iter().take(self.batch_size).cloned().collect()
            };
            if batch.is_empty() {
                return Ok(persisted);
            }
            persisted += store.append(&batch)?;
            self.pending.lock().unwrap().drain(..batch.len());
        }
    }

    /// Drops everything pending, as a crash would.
    pub fn discard(&self) -> usize {
        let mut pending = self.pending.lock().unwrap();
        let n = pending.len();
        pending.clear();
        n
    }
}
