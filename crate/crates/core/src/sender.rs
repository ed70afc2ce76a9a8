//! TFRC sender: rate updates on feedback and nofeedback-timer backoff.

use crate::equation::{
    nofeedback_period, raw_throughput, slow_start_update, update_allowed_rate,
    update_rtt_estimate, DEFAULT_RTT_WEIGHT, DEFAULT_SEGMENT_SIZE, INITIAL_RTO, T_MBI,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenderConfig {
    /// Segment size in bytes.
    pub s: f64,
    /// EWMA weight of the previous RTT estimate.
    pub q: f64,
    pub t_mbi: f64,
    pub initial_rto: f64,
}

impl Default for SenderConfig {
    fn default() -> Self {
        Self {
            s: DEFAULT_SEGMENT_SIZE,
            q: DEFAULT_RTT_WEIGHT,
            t_mbi: T_MBI,
            initial_rto: INITIAL_RTO,
        }
    }
}

impl SenderConfig {
    pub fn min_rate(&self) -> f64 {
        self.s / self.t_mbi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SenderPhase {
    SlowStart,
    CongestionAvoidance,
}

/// A receiver report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    /// Loss event rate, 0 until the first loss.
    pub p: f64,
    /// Receive rate over the last window in bytes/s; 0 means nothing was measured.
    pub x_recv: f64,
    /// Send timestamp of the newest data packet received.
    pub ts_echo: f64,
    /// Time that packet spent at the receiver before this report.
    pub t_delay: f64,
    /// When the receiver emitted this report.
    pub t_sent: f64,
}

impl Feedback {
    pub fn rtt_sample(&self, now: f64) -> f64 {
        now - self.ts_echo - self.t_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackOutcome {
    Applied,
    Stale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfrcSender {
    cfg: SenderConfig,
    x: f64,
    x_recv_cache: f64,
    r_est: Option<f64>,
    t_rto: f64,
    p_last: f64,
    phase: SenderPhase,
    nofeedback_deadline: Option<f64>,
    newest_feedback: f64,
    stale_feedback: u64,
}

impl TfrcSender {
    /// A fresh sender: one packet per initial nofeedback period, timer armed at `now`.
    pub fn new(cfg: SenderConfig, now: f64) -> Self {
        let x = (cfg.s / cfg.initial_rto).max(cfg.min_rate());
        Self {
            cfg,
            x,
            x_recv_cache: f64::INFINITY,
            r_est: None,
            t_rto: cfg.initial_rto,
            p_last: 0.0,
            phase: SenderPhase::SlowStart,
            nofeedback_deadline: Some(now + cfg.initial_rto),
            newest_feedback: f64::NEG_INFINITY,
            stale_feedback: 0,
        }
    }

    /// A sender already running at rate `x` with a settled RTT estimate, as if
    /// the last report had carried `x_recv = x / 2`.
    pub fn at_rate(cfg: SenderConfig, x: f64, r_est: f64, p_last: f64, now: f64) -> Self {
        let x = x.max(cfg.min_rate());
        let t_rto = nofeedback_period(r_est, cfg.s, x);
        Self {
            cfg,
            x,
            x_recv_cache: x / 2.0,
            r_est: Some(r_est),
            t_rto,
            p_last,
            phase: if p_last > 0.0 {
                SenderPhase::CongestionAvoidance
            } else {
                SenderPhase::SlowStart
            },
            nofeedback_deadline: Some(now + t_rto),
            newest_feedback: f64::NEG_INFINITY,
            stale_feedback: 0,
        }
    }

    pub fn config(&self) -> &SenderConfig {
        &self.cfg
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn x_recv_cache(&self) -> f64 {
        self.x_recv_cache
    }
    pub fn r_est(&self) -> Option<f64> {
        self.r_est
    }
    pub fn t_rto(&self) -> f64 {
        self.t_rto
    }
    pub fn p_last(&self) -> f64 {
        self.p_last
    }
    pub fn phase(&self) -> SenderPhase {
        self.phase
    }
    pub fn nofeedback_deadline(&self) -> Option<f64> {
        self.nofeedback_deadline
    }
    pub fn stale_feedback_count(&self) -> u64 {
        self.stale_feedback
    }

    /// Inter-packet gap at the current rate.
    pub fn packet_interval(&self) -> f64 {
        self.cfg.s / self.x
    }

    /// Rate allowed by the equation at the current `p_last` and RTT estimate.
    pub fn equation_rate(&self) -> Option<f64> {
        let r = self.r_est?;
        (self.p_last > 0.0).then(|| raw_throughput(self.p_last, r, self.cfg.s, 4.0 * r))
    }

    pub fn on_feedback(&mut self, fb: &Feedback, now: f64) -> FeedbackOutcome {
        if fb.t_sent < self.newest_feedback {
            self.stale_feedback += 1;
            return FeedbackOutcome::Stale;
        }
        self.newest_feedback = fb.t_sent;
        self.apply_rtt_sample(fb.rtt_sample(now));

        if fb.x_recv > 0.0 {
            self.x_recv_cache = fb.x_recv;
        }
        if fb.p > 0.0 {
            self.p_last = fb.p;
            self.phase = SenderPhase::CongestionAvoidance;
        }
        match self.phase {
            SenderPhase::SlowStart => {
                let x = if fb.x_recv > 0.0 {
                    slow_start_update(self.x, fb.x_recv)
                } else {
                    2.0 * self.x
                };
                self.x = x.max(self.cfg.min_rate());
            }
            SenderPhase::CongestionAvoidance => self.recompute_rate(),
        }
        self.rearm(now);
        FeedbackOutcome::Applied
    }

    /// Halves the last used receive rate and recomputes `X` and `t_RTO`.
    pub fn on_nofeedback_expiry(&mut self, now: f64) {
        self.x_recv_cache = self.x_recv_cache.min(self.x / 2.0) / 2.0;
        match self.phase {
            SenderPhase::SlowStart => {
                self.x = (2.0 * self.x_recv_cache).max(self.cfg.min_rate());
            }
            SenderPhase::CongestionAvoidance => self.recompute_rate(),
        }
        self.rearm(now);
    }

    pub(crate) fn apply_rtt_sample(&mut self, sample: f64) {
        if sample > 0.0 && sample.is_finite() {
            self.r_est = Some(update_rtt_estimate(self.r_est, sample, self.cfg.q));
        }
    }

    fn recompute_rate(&mut self) {
        let x_bps = self.equation_rate().unwrap_or(f64::INFINITY);
        self.x = update_allowed_rate(x_bps, self.x_recv_cache, self.cfg.s, self.cfg.t_mbi);
    }

    /// Recomputes `t_RTO` from the current rate and restarts the timer.
    pub(crate) fn rearm(&mut self, now: f64) {
        self.t_rto = match self.r_est {
            Some(r) => nofeedback_period(r, self.cfg.s, self.x),
            None => self.cfg.initial_rto.max(2.0 * self.cfg.s / self.x),
        };
        self.nofeedback_deadline = Some(now + self.t_rto);
    }

    pub(crate) fn cancel_timer(&mut self) {
        self.nofeedback_deadline = None;
    }

    pub(crate) fn set_x(&mut self, x: f64) {
        self.x = x.max(self.cfg.min_rate());
    }

    pub(crate) fn set_x_recv_cache(&mut self, x_recv: f64) {
        self.x_recv_cache = x_recv;
    }

    pub(crate) fn set_p_last(&mut self, p: f64) {
        self.p_last = p;
        if p > 0.0 {
            self.phase = SenderPhase::CongestionAvoidance;
        }
    }

    /// Marks a report as seen without acting on it.
    pub(crate) fn note_feedback(&mut self, fb: &Feedback) -> FeedbackOutcome {
        if fb.t_sent < self.newest_feedback {
            self.stale_feedback += 1;
            return FeedbackOutcome::Stale;
        }
        self.newest_feedback = fb.t_sent;
        FeedbackOutcome::Applied
    }

    /// Leaves slow start or probing with the rate given by the equation and the cache.
    pub(crate) fn resume_congestion_avoidance(&mut self) {
        if self.p_last > 0.0 {
            self.phase = SenderPhase::CongestionAvoidance;
            self.recompute_rate();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::throughput;

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
    fn starts_with_one_packet_per_initial_rto() {
        let s = TfrcSender::new(SenderConfig::default(), 0.0);
        assert_eq!(s.x(), 250.0);
        assert_eq!(s.t_rto(), 2.0);
        assert_eq!(s.nofeedback_deadline(), Some(2.0));
        assert_eq!(s.phase(), SenderPhase::SlowStart);
    }

    #[test]
    fn slow_start_doubles() {
        let mut s = TfrcSender::new(SenderConfig::default(), 0.0);
        s.on_feedback(&fb(0.0, 250.0, 1.0), 1.0);
        assert_eq!(s.x(), 500.0);
        assert!((s.r_est().unwrap() - 0.05).abs() < 1e-12);
        s.on_feedback(&fb(0.0, 0.0, 2.0), 2.0);
        assert_eq!(s.x(), 1000.0);
    }

    #[test]
    fn congestion_avoidance_follows_equation() {
        let mut s = TfrcSender::at_rate(SenderConfig::default(), 1e6, 0.05, 0.02, 0.0);
        s.on_feedback(&fb(0.01, 1e9, 1.0), 1.0);
        assert_eq!(s.phase(), SenderPhase::CongestionAvoidance);
        let expect = throughput(0.01, 0.05, 500.0).unwrap();
        assert!((s.x() - expect).abs() / expect < 1e-12);
        assert!((s.x() - 112_332.234_362_993).abs() < 1e-6);

        let before = s.x();
        s.on_feedback(&fb(0.02, 1e9, 1.1), 1.1);
        assert!(s.x() < before);
    }

    #[test]
    fn stale_feedback_is_discarded() {
        let mut s = TfrcSender::at_rate(SenderConfig::default(), 1e6, 0.05, 0.01, 0.0);
        s.on_feedback(&fb(0.01, 1e9, 2.0), 2.0);
        let snap = s.clone();
        assert_eq!(s.on_feedback(&fb(0.5, 1.0, 1.0), 2.1), FeedbackOutcome::Stale);
        assert_eq!(s.x(), snap.x());
        assert_eq!(s.stale_feedback_count(), 1);
    }

    #[test]
    fn backoff_halves_until_clamp() {
        let cfg = SenderConfig::default();
        let x_d = 1.27e6;
        let mut s = TfrcSender::at_rate(cfg, x_d, 0.05, 1e-6, 0.0);
        let mut t = 0.0;
        for i in 1..=17 {
            t += s.t_rto();
            s.on_nofeedback_expiry(t);
            assert_eq!(s.x(), x_d / 2f64.powi(i));
            assert!(s.t_rto() >= 4.0 * 0.05);
        }
        for _ in 0..5 {
            t += s.t_rto();
            s.on_nofeedback_expiry(t);
        }
        assert_eq!(s.x(), cfg.min_rate());
        assert_eq!(s.t_rto(), 128.0);
    }

    #[test]
    fn clamp_is_stable() {
        let cfg = SenderConfig::default();
        let mut s = TfrcSender::at_rate(cfg, cfg.min_rate(), 0.05, 0.01, 0.0);
        s.on_nofeedback_expiry(1.0);
        assert_eq!(s.x(), cfg.min_rate());
    }
}
