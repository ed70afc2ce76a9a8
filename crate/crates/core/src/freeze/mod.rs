//! Freeze extension: the sender suspends transmission with its state intact
//! across a predicted disconnection, restores its old rate afterwards, and
//! probes for more capacity before returning to normal operation.

pub mod liveness;
mod options;

pub use options::{decode_options, encode_options, SignalOption};

use crate::error::Result;
use crate::loss_history::LossIntervalHistory;
use crate::model::delta_p_min;
use crate::receiver::{Arrival, ReceiverConfig, TfrcReceiver};
use crate::sender::{Feedback, FeedbackOutcome, SenderConfig, TfrcSender};

/// Copies of connection-level signals sent per request.
pub const SIGNAL_REPEATS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreezeConfig {
    /// Attach the phase option to one packet in every `option_every`.
    pub option_every: u32,
    /// Longest disconnection the connection must survive while frozen.
    pub max_disconnection: f64,
    /// Idle timeout outside freezes.
    pub idle_timeout: f64,
}

impl Default for FreezeConfig {
    fn default() -> Self {
        Self {
            option_every: 1,
            max_disconnection: 30.0,
            idle_timeout: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SenderFreezePhase {
    Normal,
    Frozen,
    Restoring,
    Probing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverFreezePhase {
    Normal,
    Restoration,
    Probed,
    Recovery,
}

/// Whether a probing sender should stop: the loss event rate must fall, but
/// by no more than `n_pkts_rtt` loss-free packets could explain.
pub fn probing_exit_check(p_new: f64, p_prev: f64, n_pkts_rtt: f64, weights: &[f64]) -> bool {
    let dp = p_new - p_prev;
    dp >= 0.0 || dp <= delta_p_min(n_pkts_rtt, p_prev, weights)
}

/// A full history whose loss event rate corresponds to `x_recv`.
pub fn receiver_reinit_loss_history(
    x_recv: f64,
    rtt: f64,
    s: f64,
    weights: Vec<f64>,
) -> Result<LossIntervalHistory> {
    LossIntervalHistory::equivalent_to_rate(x_recv, rtt, s, weights)
}

/// Applies a packet's options in order; returns the last one and whether
/// it contradicted an earlier one.
fn last_of<'a>(
    opts: &'a [SignalOption],
    kinds: &[SignalOption],
) -> (Option<SignalOption>, bool) {
    let mut found: Vec<&'a SignalOption> = opts.iter().filter(|o| kinds.contains(o)).collect();
    found.dedup();
    (found.last().map(|o| **o), found.len() > 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreezeSender {
    inner: TfrcSender,
    cfg: FreezeConfig,
    phase: SenderFreezePhase,
    saved_x_recv: Option<f64>,
    idle_timeout: f64,
    p_prev: f64,
    probe_entry_rate: f64,
    next_probe: Option<f64>,
    option_counter: u32,
    diagnostics: u64,
}

impl FreezeSender {
    pub fn new(inner: TfrcSender, cfg: FreezeConfig) -> Self {
        Self {
            inner,
            cfg,
            phase: SenderFreezePhase::Normal,
            saved_x_recv: None,
            idle_timeout: cfg.idle_timeout,
            p_prev: 0.0,
            probe_entry_rate: 0.0,
            next_probe: None,
            option_counter: 0,
            diagnostics: 0,
        }
    }

    pub fn with_config(cfg: SenderConfig, freeze: FreezeConfig, now: f64) -> Self {
        Self::new(TfrcSender::new(cfg, now), freeze)
    }

    pub fn inner(&self) -> &TfrcSender {
        &self.inner
    }
    pub fn phase(&self) -> SenderFreezePhase {
        self.phase
    }
    pub fn x(&self) -> f64 {
        self.inner.x()
    }
    pub fn saved_x_recv(&self) -> Option<f64> {
        self.saved_x_recv
    }
    pub fn idle_timeout(&self) -> f64 {
        self.idle_timeout
    }
    pub fn probe_entry_rate(&self) -> f64 {
        self.probe_entry_rate
    }
    pub fn diagnostics(&self) -> u64 {
        self.diagnostics
    }
    pub fn can_send(&self) -> bool {
        self.phase != SenderFreezePhase::Frozen
    }
    pub fn nofeedback_deadline(&self) -> Option<f64> {
        self.inner.nofeedback_deadline()
    }
    pub fn next_probe_deadline(&self) -> Option<f64> {
        self.next_probe
    }

    /// Stops transmission and keeps all rate state. Idempotent.
    pub fn freeze(&mut self, _now: f64) {
        if self.phase == SenderFreezePhase::Frozen {
            return;
        }
        self.phase = SenderFreezePhase::Frozen;
        self.saved_x_recv = Some(self.inner.x_recv_cache());
        self.inner.cancel_timer();
        self.next_probe = None;
        self.idle_timeout = self.idle_timeout.max(2.0 * self.cfg.max_disconnection);
    }

    /// Resumes at the pre-freeze rate. Returns `false` (and counts a
    /// diagnostic) if the sender was not frozen.
    pub fn unfreeze(&mut self, now: f64) -> bool {
        if self.phase != SenderFreezePhase::Frozen {
            self.diagnostics += 1;
            return false;
        }
        if let Some(x_recv) = self.saved_x_recv.take() {
            self.inner.set_x_recv_cache(x_recv);
        }
        self.phase = SenderFreezePhase::Restoring;
        self.idle_timeout = self.cfg.idle_timeout;
        self.option_counter = 0;
        self.inner.rearm(now);
        true
    }

    /// Applies connection-level options received from the peer.
    pub fn on_signal(&mut self, opts: &[SignalOption], now: f64) {
        let (last, contradictory) =
            last_of(opts, &[SignalOption::Freeze, SignalOption::Unfreeze]);
        if contradictory {
            self.diagnostics += 1;
        }
        match last {
            Some(SignalOption::Freeze) => self.freeze(now),
            Some(SignalOption::Unfreeze) => {
                self.unfreeze(now);
            }
            _ => {}
        }
    }

    /// Handles a receiver report and the options it carried.
    pub fn on_feedback(&mut self, fb: &Feedback, opts: &[SignalOption], now: f64) -> FeedbackOutcome {
        self.on_signal(opts, now);
        match self.phase {
            SenderFreezePhase::Frozen => FeedbackOutcome::Stale,
            SenderFreezePhase::Normal => self.inner.on_feedback(fb, now),
            SenderFreezePhase::Restoring => {
                if self.inner.note_feedback(fb) == FeedbackOutcome::Stale {
                    return FeedbackOutcome::Stale;
                }
                self.inner.apply_rtt_sample(fb.rtt_sample(now));
                if fb.p > self.inner.p_last() {
                    self.inner.set_p_last(fb.p);
                    self.inner.resume_congestion_avoidance();
                    self.phase = SenderFreezePhase::Normal;
                } else if opts.contains(&SignalOption::Unfrozen) {
                    self.phase = SenderFreezePhase::Probing;
                    self.p_prev = fb.p;
                    self.probe_entry_rate = self.inner.x();
                    self.option_counter = 0;
                    self.next_probe = self.inner.r_est().map(|r| now + r);
                }
                self.inner.rearm(now);
                FeedbackOutcome::Applied
            }
            SenderFreezePhase::Probing => {
                if self.inner.note_feedback(fb) == FeedbackOutcome::Stale {
                    return FeedbackOutcome::Stale;
                }
                self.inner.apply_rtt_sample(fb.rtt_sample(now));
                let r = self.inner.r_est().unwrap_or(0.0);
                let n_rtt = self.inner.x() * r / self.inner.config().s;
                let degenerate = fb.x_recv == 0.0;
                let exit = !degenerate
                    && probing_exit_check(fb.p, self.p_prev, n_rtt, &crate::loss_history::DEFAULT_WEIGHTS);
                self.p_prev = fb.p;
                if exit {
                    self.phase = SenderFreezePhase::Normal;
                    self.next_probe = None;
                    if fb.x_recv > 0.0 {
                        self.inner.set_x_recv_cache(fb.x_recv);
                    }
                    if fb.p > 0.0 {
                        self.inner.set_p_last(fb.p);
                    }
                    self.inner.resume_congestion_avoidance();
                }
                self.inner.rearm(now);
                FeedbackOutcome::Applied
            }
        }
    }

    /// Nofeedback timer expiry. Outside `Normal` this also abandons the
    /// restoration, since the path has gone quiet again.
    pub fn on_nofeedback_expiry(&mut self, now: f64) {
        match self.phase {
            SenderFreezePhase::Frozen => {}
            SenderFreezePhase::Normal => self.inner.on_nofeedback_expiry(now),
            SenderFreezePhase::Restoring | SenderFreezePhase::Probing => {
                self.phase = SenderFreezePhase::Normal;
                self.next_probe = None;
                self.inner.on_nofeedback_expiry(now);
            }
        }
    }

    /// Doubles the rate if a probing RTT has elapsed. Returns whether it did.
    pub fn on_probe_tick(&mut self, now: f64) -> bool {
        match (self.phase, self.next_probe) {
            (SenderFreezePhase::Probing, Some(due)) if now >= due => {
                self.inner.set_x(2.0 * self.inner.x());
                let r = self.inner.r_est().unwrap_or(self.inner.t_rto() / 4.0);
                self.next_probe = Some(due + r);
                true
            }
            _ => false,
        }
    }

    /// Options for the next data packet.
    pub fn options_for_next_packet(&mut self) -> Vec<SignalOption> {
        let opt = match self.phase {
            SenderFreezePhase::Restoring => SignalOption::Restoring,
            SenderFreezePhase::Probing => SignalOption::Probing,
            _ => return Vec::new(),
        };
        let k = self.cfg.option_every.max(1);
        let attach = self.option_counter.is_multiple_of(k);
        self.option_counter = self.option_counter.wrapping_add(1);
        if attach {
            vec![opt]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreezeReceiver {
    inner: TfrcReceiver,
    cfg: FreezeConfig,
    phase: ReceiverFreezePhase,
    restoration_since: f64,
    plain_packets: u32,
    pending_signal: Option<(SignalOption, u32)>,
    reinitialisations: u64,
    diagnostics: u64,
}

impl FreezeReceiver {
    pub fn new(cfg: ReceiverConfig, freeze: FreezeConfig) -> Self {
        Self {
            inner: TfrcReceiver::new(cfg),
            cfg: freeze,
            phase: ReceiverFreezePhase::Normal,
            restoration_since: 0.0,
            plain_packets: 0,
            pending_signal: None,
            reinitialisations: 0,
            diagnostics: 0,
        }
    }

    pub fn inner(&self) -> &TfrcReceiver {
        &self.inner
    }
    pub fn phase(&self) -> ReceiverFreezePhase {
        self.phase
    }
    pub fn reinitialisations(&self) -> u64 {
        self.reinitialisations
    }
    pub fn diagnostics(&self) -> u64 {
        self.diagnostics
    }

    /// Queues OPT_FREEZE on the next [`SIGNAL_REPEATS`] signalling packets.
    pub fn request_freeze(&mut self) {
        self.pending_signal = Some((SignalOption::Freeze, SIGNAL_REPEATS));
    }

    /// Queues OPT_UNFREEZE on the next [`SIGNAL_REPEATS`] signalling packets.
    pub fn request_unfreeze(&mut self) {
        self.pending_signal = Some((SignalOption::Unfreeze, SIGNAL_REPEATS));
    }

    /// Takes one copy of a pending connection-level signal, if any.
    pub fn take_signal(&mut self) -> Option<SignalOption> {
        let (opt, left) = self.pending_signal?;
        self.pending_signal = (left > 1).then_some((opt, left - 1));
        Some(opt)
    }

    pub fn record_packet(
        &mut self,
        seq: u64,
        now: f64,
        sender_ts: f64,
        rtt_hint: f64,
        opts: &[SignalOption],
    ) -> Arrival {
        let (last, contradictory) =
            last_of(opts, &[SignalOption::Restoring, SignalOption::Probing]);
        if contradictory {
            self.diagnostics += 1;
        }
        match last {
            Some(SignalOption::Probing) => {
                self.phase = ReceiverFreezePhase::Probed;
                self.plain_packets = 0;
            }
            Some(SignalOption::Restoring) => {
                if self.phase != ReceiverFreezePhase::Restoration {
                    self.phase = ReceiverFreezePhase::Restoration;
                    self.restoration_since = now;
                }
                self.plain_packets = 0;
            }
            _ => {
                if matches!(
                    self.phase,
                    ReceiverFreezePhase::Restoration | ReceiverFreezePhase::Probed
                ) {
                    self.plain_packets += 1;
                    if self.plain_packets >= self.cfg.option_every.max(1) {
                        // Recovery only resets the per-phase counters.
                        self.phase = ReceiverFreezePhase::Recovery;
                        self.plain_packets = 0;
                        self.phase = ReceiverFreezePhase::Normal;
                    }
                }
            }
        }

        let arrival = self.inner.record_packet(seq, now, sender_ts, rtt_hint);
        if arrival.new_loss_event && self.phase == ReceiverFreezePhase::Probed {
            match self.inner.reinitialize_from_last_rate() {
                Ok(()) => self.reinitialisations += 1,
                Err(_) => self.diagnostics += 1,
            }
        }
        arrival
    }

    fn feedback_options(&self, now: f64) -> Vec<SignalOption> {
        let mut opts = Vec::new();
        if self.phase == ReceiverFreezePhase::Restoration
            && now - self.restoration_since >= self.inner.rtt()
        {
            opts.push(SignalOption::Unfrozen);
        }
        opts
    }

    pub fn feedback(&mut self, now: f64) -> (Feedback, Vec<SignalOption>) {
        let opts = self.feedback_options(now);
        (self.inner.feedback(now), opts)
    }

    pub fn on_feedback_timer(&mut self, now: f64) -> Option<(Feedback, Vec<SignalOption>)> {
        let opts = self.feedback_options(now);
        self.inner.on_feedback_timer(now).map(|fb| (fb, opts))
    }

    pub fn feedback_deadline(&self) -> Option<f64> {
        self.inner.feedback_deadline()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::throughput;
    use crate::loss_history::DEFAULT_WEIGHTS;

    fn steady_sender(x: f64) -> FreezeSender {
        let p = crate::equation::invert_throughput(x, 0.05, 500.0).unwrap().p;
        FreezeSender::new(
            TfrcSender::at_rate(SenderConfig::default(), x, 0.05, p, 0.0),
            FreezeConfig::default(),
        )
    }

    fn fb(p: f64, x_recv: f64, t: f64) -> Feedback {
        Feedback {
            p,
            x_recv,
            ts_echo: t - 0.05,
            t_delay: 0.0,
            t_sent: t,
        }
    }

    #[test]
    fn frozen_state_is_untouched() {
        let mut s = steady_sender(1.27e6);
        s.freeze(1.0);
        let snap = s.clone();
        assert!(!s.can_send());
        assert_eq!(s.nofeedback_deadline(), None);
        for k in 0..10 {
            s.on_nofeedback_expiry(2.0 + k as f64);
        }
        s.on_feedback(&fb(0.3, 10.0, 3.0), &[], 3.0);
        assert_eq!(s, snap);
        s.freeze(4.0);
        assert_eq!(s, snap);
        assert!(s.idle_timeout() >= 60.0);
    }

    #[test]
    fn unfreeze_restores_the_rate() {
        let mut s = steady_sender(1.27e6);
        s.freeze(1.0);
        assert!(s.unfreeze(61.0));
        assert_eq!(s.phase(), SenderFreezePhase::Restoring);
        assert_eq!(s.x(), 1.27e6);
        assert_eq!(s.saved_x_recv(), None);
        // A low receive rate is ignored while restoring.
        s.on_feedback(&fb(s.inner().p_last(), 10.0, 61.1), &[], 61.1);
        assert_eq!(s.x(), 1.27e6);
        assert!(!s.unfreeze(62.0));
        assert_eq!(s.diagnostics(), 1);
    }

    #[test]
    fn restoring_exits() {
        let mut s = steady_sender(1.27e6);
        s.freeze(0.0);
        s.unfreeze(1.0);
        let p = s.inner().p_last();
        s.on_feedback(&fb(p, 1e9, 1.1), &[SignalOption::Unfrozen], 1.1);
        assert_eq!(s.phase(), SenderFreezePhase::Probing);

        let mut s = steady_sender(1.27e6);
        s.freeze(0.0);
        s.unfreeze(1.0);
        s.on_feedback(&fb(0.01, 1e9, 1.1), &[], 1.1);
        assert_eq!(s.phase(), SenderFreezePhase::Normal);
        let expect = throughput(0.01, 0.05, 500.0).unwrap();
        assert!((s.x() - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn probing_doubles_each_rtt() {
        let mut s = steady_sender(1e5);
        s.freeze(0.0);
        s.unfreeze(1.0);
        let p = s.inner().p_last();
        s.on_feedback(&fb(p, 1e9, 1.0), &[SignalOption::Unfrozen], 1.0);
        let due = s.next_probe_deadline().unwrap();
        assert!(!s.on_probe_tick(due - 1e-6));
        for k in 0..3 {
            assert!(s.on_probe_tick(due + 0.05 * k as f64));
        }
        assert_eq!(s.x(), 8e5);
        assert_eq!(s.options_for_next_packet(), vec![SignalOption::Probing]);
    }

    #[test]
    fn exit_check_cases() {
        let w = DEFAULT_WEIGHTS;
        assert!(probing_exit_check(0.01, 0.01, 100.0, &w));
        assert!(probing_exit_check(0.02, 0.01, 100.0, &w));
        let dmin = delta_p_min(100.0, 0.01, &w);
        assert!(!probing_exit_check(0.01 + dmin / 2.0, 0.01, 100.0, &w));
        assert!(probing_exit_check(0.01 + 2.0 * dmin, 0.01, 100.0, &w));
    }

    #[test]
    fn reinitialised_history_matches_rate() {
        let x = throughput(0.01, 0.05, 500.0).unwrap();
        let h = receiver_reinit_loss_history(x, 0.05, 500.0, DEFAULT_WEIGHTS.to_vec()).unwrap();
        assert_eq!(h.loss_event_rate().unwrap(), 0.01);
        let hi = receiver_reinit_loss_history(2.0 * x, 0.05, 500.0, DEFAULT_WEIGHTS.to_vec()).unwrap();
        assert!(hi.intervals()[1] > h.intervals()[1]);
        assert!(receiver_reinit_loss_history(0.0, 0.05, 500.0, DEFAULT_WEIGHTS.to_vec()).is_err());
    }

    #[test]
    fn receiver_phases() {
        let mut r = FreezeReceiver::new(ReceiverConfig::default(), FreezeConfig::default());
        let mut t = 0.0;
        let mut seq = 0;
        let mut send = |r: &mut FreezeReceiver, t: f64, opts: &[SignalOption]| {
            r.record_packet(seq, t, t, 0.05, opts);
            seq += 1;
        };
        send(&mut r, t, &[]);
        assert_eq!(r.phase(), ReceiverFreezePhase::Normal);
        for _ in 0..3 {
            t += 0.01;
            send(&mut r, t, &[SignalOption::Restoring]);
        }
        assert_eq!(r.phase(), ReceiverFreezePhase::Restoration);
        assert!(r.feedback(t).1.is_empty());
        t += 0.05;
        send(&mut r, t, &[SignalOption::Restoring]);
        assert_eq!(r.feedback(t).1, vec![SignalOption::Unfrozen]);
        t += 0.01;
        send(&mut r, t, &[SignalOption::Probing]);
        assert_eq!(r.phase(), ReceiverFreezePhase::Probed);
        t += 0.01;
        send(&mut r, t, &[]);
        assert_eq!(r.phase(), ReceiverFreezePhase::Normal);
        t += 0.01;
        send(&mut r, t, &[SignalOption::Freeze, SignalOption::Restoring, SignalOption::Probing]);
        assert_eq!(r.phase(), ReceiverFreezePhase::Probed);
        assert_eq!(r.diagnostics(), 1);
    }

    #[test]
    fn signals_repeat_three_times() {
        let mut r = FreezeReceiver::new(ReceiverConfig::default(), FreezeConfig::default());
        r.request_freeze();
        let sent: Vec<_> = std::iter::from_fn(|| r.take_signal()).collect();
        assert_eq!(sent, vec![SignalOption::Freeze; 3]);
    }
}
