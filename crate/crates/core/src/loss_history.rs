//! Weighted loss-interval history and the loss event rate derived from it.

use std::collections::VecDeque;

use crate::equation::invert_throughput;
use crate::error::{Error, Result};

/// Interval weights, newest first.
pub const DEFAULT_WEIGHTS: [f64; 8] = [1.0, 1.0, 1.0, 1.0, 0.8, 0.6, 0.4, 0.2];

/// `i_0` (the open interval) plus up to `n` completed intervals `i_1..i_n`,
/// all measured in packets.
#[derive(Debug, Clone, PartialEq)]
pub struct LossIntervalHistory {
    current: u64,
    completed: VecDeque<u64>,
    weights: Vec<f64>,
}

impl Default for LossIntervalHistory {
    fn default() -> Self {
        Self::new(DEFAULT_WEIGHTS.to_vec())
    }
}

impl LossIntervalHistory {
    pub fn new(weights: Vec<f64>) -> Self {
        assert!(!weights.is_empty(), "loss history needs at least one weight");
        Self {
            current: 0,
            completed: VecDeque::with_capacity(weights.len()),
            weights,
        }
    }

    /// Builds a history from explicit intervals `[i_0, i_1, ...]`.
    pub fn from_intervals(intervals: &[u64], weights: Vec<f64>) -> Self {
        let mut h = Self::new(weights);
        if let Some((&first, rest)) = intervals.split_first() {
            h.current = first;
            h.completed.extend(rest.iter().copied().take(h.weights.len()));
        }
        h
    }

    /// A full history of `n` equal intervals of `round(1 / p_eq)` packets, where
    /// `p_eq` is the loss event rate at which the equation yields `x_recv`.
    pub fn equivalent_to_rate(x_recv: f64, rtt: f64, s: f64, weights: Vec<f64>) -> Result<Self> {
        if x_recv <= 0.0 {
            return Err(Error::EmptyMeasurement);
        }
        let p = invert_throughput(x_recv, rtt, s)?.p;
        let len = (1.0 / p).round().max(1.0) as u64;
        let n = weights.len();
        let mut h = Self::new(weights);
        h.completed.extend(std::iter::repeat_n(len, n));
        Ok(h)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn current(&self) -> u64 {
        self.current
    }

    pub fn set_current(&mut self, packets: u64) {
        self.current = packets;
    }

    pub fn completed(&self) -> impl ExactSizeIterator<Item = u64> + '_ {
        self.completed.iter().copied()
    }

    /// `[i_0, i_1, ..., i_k]`.
    pub fn intervals(&self) -> Vec<u64> {
        std::iter::once(self.current)
            .chain(self.completed.iter().copied())
            .collect()
    }

    pub fn has_loss(&self) -> bool {
        !self.completed.is_empty()
    }

    /// Closes `i_0` and opens a new empty interval; the oldest interval falls off.
    pub fn start_new_event(&mut self) {
        self.completed.push_front(self.current);
        self.completed.truncate(self.weights.len());
        self.current = 0;
    }

    /// `p = sum(w) / max(S_0, S_1)` over the completed intervals available.
    pub fn loss_event_rate(&self) -> Result<f64> {
        let k = self.completed.len();
        if k == 0 {
            return Err(Error::NoLossYet);
        }
        let w = &self.weights[..k];
        let w_tot: f64 = w.iter().sum();
        let s1: f64 = w
            .iter()
            .zip(self.completed.iter())
            .map(|(w, &i)| w * i as f64)
            .sum();
        let s0: f64 = w
            .iter()
            .zip(std::iter::once(self.current).chain(self.completed.iter().copied()))
            .map(|(w, i)| w * i as f64)
            .sum();
        let denom = s0.max(s1);
        if denom <= 0.0 {
            return Ok(1.0);
        }
        Ok((w_tot / denom).min(1.0))
    }
}
