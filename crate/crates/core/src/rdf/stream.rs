use thiserror::Error;

use super::graph::KnowledgeGraph;
use super::term::{Iri, Triple};

/// A triple stamped with an integer tick.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimedTriple {
    pub triple: Triple,
    pub timestamp: u64,
}

impl TimedTriple {
    pub fn new(triple: Triple, timestamp: u64) -> Self {
        TimedTriple { triple, timestamp }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("element at t={got} appended after t={last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("stream elements must be ground: {0}")]
    NotGround(String),
}

/// Append-only, timestamp-ordered sequence of triples plus provenance metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticStream {
    pub uri: Iri,
    elements: Vec<TimedTriple>,
    pub metadata: KnowledgeGraph,
}

impl SemanticStream {
    pub fn new(uri: Iri) -> Self {
        SemanticStream {
            uri,
            elements: Vec::new(),
            metadata: KnowledgeGraph::new(),
        }
    }

    pub fn push(&mut self, e: TimedTriple) -> Result<(), StreamError> {
        if let Some(last) = self.elements.last() {
            if e.timestamp < last.timestamp {
                return Err(StreamError::OutOfOrder {
                    last: last.timestamp,
                    got: e.timestamp,
                });
            }
        }
        if !e.triple.is_ground() {
            return Err(StreamError::NotGround(e.triple.to_string()));
        }
        self.elements.push(e);
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = TimedTriple>>(&mut self, it: I) -> Result<(), StreamError> {
        for e in it {
            self.push(e)?;
        }
        Ok(())
    }

    pub fn elements(&self) -> &[TimedTriple] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.elements.last().map(|e| e.timestamp)
    }

    /// Elements with timestamp in `(now - width, now]`.
    ///
    /// # Panics
    /// If `width` is zero.
    pub fn window(&self, now: u64, width: u64) -> &[TimedTriple] {
        window_slice(&self.elements, now, width)
    }
}

/// [`SemanticStream::window`] over any timestamp-sorted slice.
pub fn window_slice(elements: &[TimedTriple], now: u64, width: u64) -> &[TimedTriple] {
    assert!(width > 0, "window width must be positive");
    let lo = elements.partition_point(|e| e.timestamp + width <= now);
    let hi = elements.partition_point(|e| e.timestamp <= now);
    &elements[lo..hi.max(lo)]
}
