//! Sampled trajectories.

use serde::Serialize;

/// A time grid with one value (scalar or vector) per grid time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessPath<V = f64> {
    pub times: Vec<f64>,
    pub values: Vec<V>,
    /// First grid time at which the path was absorbed, if any.
    pub absorbed_at: Option<f64>,
}

impl<V: Clone> ProcessPath<V> {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            absorbed_at: None,
        }
    }

    pub fn push(&mut self, t: f64, v: V) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.values.push(v);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&V> {
        self.values.last()
    }
}
