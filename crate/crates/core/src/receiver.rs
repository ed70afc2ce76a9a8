//! TFRC receiver: loss detection with interpolated loss times, loss-event
//! grouping, receive-rate measurement and feedback generation.

use crate::equation::{invert_throughput, DEFAULT_SEGMENT_SIZE};
use crate::error::Result;
use crate::loss_history::{LossIntervalHistory, DEFAULT_WEIGHTS};
use crate::sender::Feedback;

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub s: f64,
    pub weights: Vec<f64>,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            s: DEFAULT_SEGMENT_SIZE,
            weights: DEFAULT_WEIGHTS.to_vec(),
        }
    }
}

/// What a single arrival did to the receiver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Arrival {
    /// Packets missing between this arrival and the previous one.
    pub lost: u64,
    /// The gap opened a new loss event.
    pub new_loss_event: bool,
    /// A report should be sent now (new loss event, first packet, or a timer
    /// that fired with nothing to report).
    pub feedback_now: bool,
    /// Duplicate or reordered packet; ignored.
    pub ignored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfrcReceiver {
    cfg: ReceiverConfig,
    history: LossIntervalHistory,
    /// Sequence number at which the open loss interval started.
    interval_start: Option<u64>,
    highest: Option<u64>,
    last_arrival: f64,
    last_sender_ts: f64,
    /// Interpolated time of the first loss of the current loss event.
    anchor: Option<f64>,
    rtt: f64,
    window_start: f64,
    window_bytes: f64,
    last_x_recv: f64,
    feedback_deadline: Option<f64>,
    pending_feedback: bool,
    received_since_feedback: bool,
    packets_received: u64,
    packets_lost: u64,
    loss_events: u64,
    ignored: u64,
}

impl TfrcReceiver {
    pub fn new(cfg: ReceiverConfig) -> Self {
        let history = LossIntervalHistory::new(cfg.weights.clone());
        Self {
            cfg,
            history,
            interval_start: None,
            highest: None,
            last_arrival: 0.0,
            last_sender_ts: 0.0,
            anchor: None,
            rtt: 0.0,
            window_start: 0.0,
            window_bytes: 0.0,
            last_x_recv: 0.0,
            feedback_deadline: None,
            pending_feedback: false,
            received_since_feedback: false,
            packets_received: 0,
            packets_lost: 0,
            loss_events: 0,
            ignored: 0,
        }
    }

    pub fn history(&self) -> &LossIntervalHistory {
        &self.history
    }
    /// RTT used for loss grouping and the feedback timer (the sender's estimate).
    pub fn rtt(&self) -> f64 {
        self.rtt
    }
    pub fn last_x_recv(&self) -> f64 {
        self.last_x_recv
    }
    pub fn feedback_deadline(&self) -> Option<f64> {
        self.feedback_deadline
    }
    pub fn highest_seq(&self) -> Option<u64> {
        self.highest
    }
    pub fn packets_received(&self) -> u64 {
        self.packets_received
    }
    pub fn packets_lost(&self) -> u64 {
        self.packets_lost
    }
    pub fn loss_events(&self) -> u64 {
        self.loss_events
    }
    pub fn ignored_packets(&self) -> u64 {
        self.ignored
    }

    /// Loss event rate, or 0 before the first loss.
    pub fn loss_event_rate(&self) -> f64 {
        self.history.loss_event_rate().unwrap_or(0.0)
    }

    /// Records a data packet. `rtt_hint` is the sender's RTT estimate carried
    /// in the header, or 0 if it has none yet.
    pub fn record_packet(&mut self, seq: u64, now: f64, sender_ts: f64, rtt_hint: f64) -> Arrival {
        if rtt_hint > 0.0 {
            self.rtt = rtt_hint;
        }
        let mut out = Arrival::default();
        let Some(highest) = self.highest else {
            self.interval_start = Some(seq);
            self.window_start = now;
            self.accept(seq, now, sender_ts);
            out.feedback_now = true;
            return out;
        };
        if seq <= highest {
            self.ignored += 1;
            out.ignored = true;
            return out;
        }

        let gap = seq - highest - 1;
        if gap > 0 {
            out.lost = gap;
            self.packets_lost += gap;
            let first_lost_at =
                self.last_arrival + (now - self.last_arrival) / (gap + 1) as f64;
            let joins = matches!(self.anchor, Some(a) if first_lost_at <= a + self.rtt);
            if !joins {
                self.open_loss_event(highest + 1, first_lost_at);
                out.new_loss_event = true;
                out.feedback_now = true;
            }
        }
        self.accept(seq, now, sender_ts);
        if self.pending_feedback {
            out.feedback_now = true;
        }
        out
    }

    fn accept(&mut self, seq: u64, now: f64, sender_ts: f64) {
        self.highest = Some(seq);
        self.last_arrival = now;
        self.last_sender_ts = sender_ts;
        self.window_bytes += self.cfg.s;
        self.received_since_feedback = true;
        self.packets_received += 1;
        if let Some(start) = self.interval_start {
            self.history.set_current(seq + 1 - start);
        }
    }

    fn open_loss_event(&mut self, first_lost_seq: u64, at: f64) {
        if !self.history.has_loss() {
            // The interval before the first loss is the one whose loss rate
            // matches what was being received.
            let elapsed = self.last_arrival - self.window_start;
            let measured = if self.rtt > 0.0 && elapsed >= self.rtt / 2.0 && self.window_bytes > 0.0
            {
                self.window_bytes / elapsed
            } else {
                self.last_x_recv
            };
            let seeded = (measured > 0.0 && self.rtt > 0.0)
                .then(|| invert_throughput(measured, self.rtt, self.cfg.s).ok())
                .flatten()
                .map(|inv| (1.0 / inv.p).round().max(1.0) as u64);
            if let Some(len) = seeded {
                self.history.set_current(len);
            }
        }
        self.history.start_new_event();
        self.interval_start = Some(first_lost_seq);
        self.anchor = Some(at);
        self.loss_events += 1;
    }

    /// Replaces the history with `n` equal intervals equivalent to the last
    /// reported receive rate; the open interval restarts at the newest loss.
    pub fn reinitialize_from_last_rate(&mut self) -> Result<()> {
        let h = LossIntervalHistory::equivalent_to_rate(
            self.last_x_recv,
            self.rtt,
            self.cfg.s,
            self.cfg.weights.clone(),
        )?;
        let current = self.history.current();
        self.history = h;
        self.history.set_current(current);
        Ok(())
    }

    /// Feedback timer expiry. Reports if anything arrived since the last
    /// report, otherwise defers the report to the next arrival.
    pub fn on_feedback_timer(&mut self, now: f64) -> Option<Feedback> {
        if self.received_since_feedback {
            Some(self.feedback(now))
        } else {
            self.pending_feedback = true;
            self.feedback_deadline = None;
            None
        }
    }

    /// Builds a report covering everything since the previous one and restarts
    /// the measurement window and the feedback timer.
    pub fn feedback(&mut self, now: f64) -> Feedback {
        let elapsed = now - self.window_start;
        let x_recv = if elapsed > 0.0 {
            self.window_bytes / elapsed
        } else {
            0.0
        };
        if x_recv > 0.0 {
            self.last_x_recv = x_recv;
        }
        self.window_start = now;
        self.window_bytes = 0.0;
        self.received_since_feedback = false;
        // Without an RTT there is no timer; report again on the next arrival.
        self.pending_feedback = self.rtt <= 0.0;
        self.feedback_deadline = (self.rtt > 0.0).then_some(now + self.rtt);
        Feedback {
            p: self.loss_event_rate(),
            x_recv,
            ts_echo: self.last_sender_ts,
            t_delay: now - self.last_arrival,
            t_sent: now,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rx() -> TfrcReceiver {
        TfrcReceiver::new(ReceiverConfig::default())
    }

    #[test]
    fn contiguous_arrivals_grow_the_open_interval() {
        let mut r = rx();
        for seq in 1..=100 {
            let a = r.record_packet(seq, seq as f64 * 0.001, 0.0, 0.05);
            assert!(!a.new_loss_event);
        }
        assert_eq!(r.history().intervals(), vec![100]);
        assert_eq!(r.loss_events(), 0);
        assert_eq!(r.loss_event_rate(), 0.0);
    }

    #[test]
    fn one_gap_is_one_event() {
        let mut r = rx();
        for seq in 0..50 {
            r.record_packet(seq, seq as f64 * 0.001, 0.0, 0.05);
        }
        let a = r.record_packet(60, 0.060, 0.0, 0.05);
        assert_eq!(a.lost, 10);
        assert!(a.new_loss_event && a.feedback_now);
        assert_eq!(r.loss_events(), 1);
        // The open interval starts at the first lost packet.
        assert_eq!(r.history().current(), 11);
    }

    #[test]
    fn separated_gaps_are_separate_events() {
        let mut r = rx();
        let mut t = 0.0;
        for seq in 0..200u64 {
            t += 0.001;
            if seq == 50 || seq == 150 {
                continue;
            }
            r.record_packet(seq, t, t, 0.05);
        }
        assert_eq!(r.loss_events(), 2);
        assert_eq!(r.history().completed().len(), 2);
    }

    #[test]
    fn close_gaps_join_one_event() {
        let mut r = rx();
        let mut t = 0.0;
        for seq in 0..200u64 {
            t += 0.001;
            if seq == 50 || seq == 70 {
                continue;
            }
            r.record_packet(seq, t, t, 0.05);
        }
        assert_eq!(r.loss_events(), 1);
    }

    #[test]
    fn duplicates_are_ignored() {
        let mut r = rx();
        r.record_packet(1, 0.0, 0.0, 0.05);
        r.record_packet(2, 0.1, 0.0, 0.05);
        assert!(r.record_packet(2, 0.2, 0.0, 0.05).ignored);
        assert!(r.record_packet(1, 0.3, 0.0, 0.05).ignored);
        assert_eq!(r.ignored_packets(), 2);
        assert_eq!(r.history().current(), 2);
    }

    #[test]
    fn receive_rate_over_one_rtt() {
        let mut r = rx();
        r.record_packet(0, 0.0, 0.0, 0.05);
        r.feedback(0.0);
        for k in 1..=127u64 {
            r.record_packet(k, k as f64 / 2540.0, 0.0, 0.05);
        }
        let fb = r.feedback(0.05);
        assert!((fb.x_recv - 1.27e6).abs() < 1e-6, "{}", fb.x_recv);
        assert_eq!(fb.p, 0.0);
    }

    #[test]
    fn first_loss_seeds_history_from_measured_rate() {
        let mut r = rx();
        let x = crate::equation::throughput(0.01, 0.05, 500.0).unwrap();
        let gap = 500.0 / x;
        r.record_packet(0, 0.0, 0.0, 0.05);
        r.feedback(0.0);
        let mut seq = 1;
        while (seq as f64) * gap < 0.2 {
            r.record_packet(seq, seq as f64 * gap, 0.0, 0.05);
            seq += 1;
        }
        r.record_packet(seq + 1, (seq + 1) as f64 * gap, 0.0, 0.05);
        let p = r.loss_event_rate();
        assert!((p - 0.01).abs() < 2e-4, "{p}");
    }

    #[test]
    fn timer_without_data_defers_to_next_arrival() {
        let mut r = rx();
        r.record_packet(0, 0.0, 0.0, 0.05);
        assert!(r.on_feedback_timer(0.05).is_some());
        assert!(r.on_feedback_timer(0.10).is_none());
        let a = r.record_packet(1, 3.0, 2.9, 0.05);
        assert!(a.feedback_now);
        let fb = r.feedback(3.0);
        // The window spans the silent period, so the rate under-reports.
        assert!((fb.x_recv - 500.0 / 2.95).abs() < 1e-9);
        assert_eq!(fb.ts_echo, 2.9);
    }
}
