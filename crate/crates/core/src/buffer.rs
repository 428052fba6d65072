//! FIFO memory of embeddings of recently selected samples.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::projection::{Embedding, FACTOR_VERSION};

pub const BUFFER_VERSION: &str = "uds-buffer/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBuffer {
    capacity: usize,
    dim: Option<usize>,
    entries: VecDeque<Embedding>,
    total_pushed: u64,
}

impl MemoryBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(UdsError::Config("buffer capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            dim: None,
            entries: VecDeque::with_capacity(capacity),
            total_pushed: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_pushed(&self) -> u64 {
        self.total_pushed
    }

    /// Embedding dimension, fixed by the first push.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Oldest first.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = &Embedding> {
        self.entries.iter()
    }

    /// Evicts from the front until the new batch fits, then appends it in
    /// order.
    pub fn push_selected(&mut self, new: Vec<Embedding>) -> Result<()> {
        if new.len() > self.capacity {
            return Err(UdsError::Config(format!(
                "cannot push {} embeddings into a buffer of capacity {}",
                new.len(),
                self.capacity
            )));
        }
        let dim = self.dim.or_else(|| new.first().map(Embedding::dim));
        if let Some(d) = dim {
            if let Some(bad) = new.iter().find(|e| e.dim() != d) {
                return Err(UdsError::DimensionMismatch {
                    expected: format!("embedding of dimension {d}"),
                    actual: format!("dimension {}", bad.dim()),
                });
            }
        }
        while self.entries.len() + new.len() > self.capacity {
            self.entries.pop_front();
        }
        self.total_pushed += new.len() as u64;
        self.entries.extend(new);
        self.dim = dim;
        Ok(())
    }

    pub fn to_checkpoint(&self) -> BufferCheckpoint {
        BufferCheckpoint {
            version: BUFFER_VERSION.to_string(),
            factor_version: FACTOR_VERSION.to_string(),
            capacity: self.capacity,
            total_pushed: self.total_pushed,
            entries: self.entries.iter().cloned().collect(),
        }
    }

    pub fn from_checkpoint(ck: BufferCheckpoint) -> Result<Self> {
        if ck.version != BUFFER_VERSION {
            return Err(UdsError::Format(format!("unsupported buffer checkpoint {:?}", ck.version)));
        }
        if ck.entries.len() > ck.capacity || (ck.entries.len() as u64) > ck.total_pushed {
            return Err(UdsError::Format("buffer checkpoint holds more entries than allowed".into()));
        }
        let mut buf = Self::new(ck.capacity)?;
        buf.push_selected(ck.entries)?;
        buf.total_pushed = ck.total_pushed;
        Ok(buf)
    }
}

/// `s_inter`: mean Euclidean distance from `candidate` to every buffered
/// embedding, duplicates included. Zero for an empty buffer.
pub fn diversity_distance(candidate: &Embedding, buffer: &MemoryBuffer) -> Result<f64> {
    if buffer.is_empty() {
        return Ok(0.0);
    }
    if let Some(d) = buffer.dim().filter(|&d| d != candidate.dim()) {
        return Err(UdsError::DimensionMismatch {
            expected: format!("embedding of dimension {d}"),
            actual: format!("dimension {}", candidate.dim()),
        });
    }
    let total: f64 = buffer
        .entries()
        .map(|e| {
            e.data
                .iter()
                .zip(&candidate.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / buffer.len() as f64)
}

/// On-disk buffer state for resuming a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferCheckpoint {
    pub version: String,
    pub factor_version: String,
    pub capacity: usize,
    pub total_pushed: u64,
    pub entries: Vec<Embedding>,
}

impl BufferCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
