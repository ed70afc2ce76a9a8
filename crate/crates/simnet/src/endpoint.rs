//! Flow endpoints. Each flow owns both its sender and its receiver; the
//! simulator moves packets between them and asks for timer wake-ups.

use std::collections::BTreeSet;

use tfrc_core::freeze::{decode_options, encode_options};
use tfrc_core::{
    FreezeConfig, FreezeReceiver, FreezeSender, ReceiverConfig,
    SenderConfig, SenderFreezePhase, SignalOption, TfrcSender,
};

use crate::packet::{FlowId, Packet, Payload, CONTROL_PACKET_SIZE};
use crate::time::SimTime;
use crate::trace::{FlowKind, RecordKind};

/// Data segment size for every flow, bytes.
pub const SEGMENT: u32 = 500;

/// Spacing between repeated copies of a connection-level signal.
pub const SIGNAL_SPACING: f64 = 0.002;

/// Side effects requested by an endpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Sender to receiver.
    Forward(Packet),
    /// Receiver to sender.
    Reverse(Packet),
    Record(RecordKind, u64, f64),
    /// New application bytes delivered in order to the receiver.
    Goodput(u64),
    RttSample(f64),
}

fn due(deadline: f64, now: SimTime) -> bool {
    SimTime::from_secs(deadline) <= now
}

pub fn phase_code(p: SenderFreezePhase) -> f64 {
    match p {
        SenderFreezePhase::Normal => 0.0,
        SenderFreezePhase::Frozen => 1.0,
        SenderFreezePhase::Restoring => 2.0,
        SenderFreezePhase::Probing => 3.0,
    }
}

#[derive(Debug, Clone)]
pub struct TfrcFlow {
    id: FlowId,
    sender: FreezeSender,
    receiver: FreezeReceiver,
    seq: u64,
    next_send: f64,
    last_send: Option<f64>,
    next_signal: Option<f64>,
    logged_rate: f64,
    logged_phase: SenderFreezePhase,
}

impl TfrcFlow {
    pub fn new(id: FlowId, now: f64, freeze: FreezeConfig) -> Self {
        Self {
            id,
            sender: FreezeSender::new(TfrcSender::new(SenderConfig::default(), now), freeze),
            receiver: FreezeReceiver::new(ReceiverConfig::default(), freeze),
            seq: 0,
            next_send: now,
            last_send: None,
            next_signal: None,
            logged_rate: f64::NAN,
            logged_phase: SenderFreezePhase::Normal,
        }
    }

    pub fn sender(&self) -> &FreezeSender {
        &self.sender
    }
    pub fn receiver(&self) -> &FreezeReceiver {
        &self.receiver
    }

    /// Rate the sender is actually using: zero while frozen.
    pub fn effective_rate(&self) -> f64 {
        if self.sender.can_send() {
            self.sender.x()
        } else {
            0.0
        }
    }

    pub fn request_freeze(&mut self, now: f64) {
        self.receiver.request_freeze();
        self.next_signal = Some(now);
    }

    pub fn request_unfreeze(&mut self, now: f64) {
        self.receiver.request_unfreeze();
        self.next_signal = Some(now);
    }

    pub fn next_wake(&self) -> Option<f64> {
        let send = self.sender.can_send().then_some(self.next_send);
        [
            send,
            self.next_signal,
            self.receiver.feedback_deadline(),
            self.sender.nofeedback_deadline(),
            self.sender.next_probe_deadline(),
        ]
        .into_iter()
        .flatten()
        .reduce(f64::min)
    }

    pub fn on_wake(&mut self, now: SimTime, out: &mut Vec<Action>) {
        let t = now.as_secs();
        let x_before = self.sender.x();
        if self.next_signal.is_some_and(|d| due(d, now)) {
            match self.receiver.take_signal() {
                Some(opt) => {
                    out.push(Action::Reverse(Packet {
                        flow: self.id,
                        seq: 0,
                        size: CONTROL_PACKET_SIZE,
                        payload: Payload::TfrcSignal {
                            options: encode_options(&[opt]),
                        },
                    }));
                    self.next_signal = Some(t + SIGNAL_SPACING);
                }
                None => self.next_signal = None,
            }
        }
        if self.receiver.feedback_deadline().is_some_and(|d| due(d, now)) {
            if let Some((fb, opts)) = self.receiver.on_feedback_timer(t) {
                out.push(self.feedback_packet(fb, &opts));
            }
        }
        if self.sender.nofeedback_deadline().is_some_and(|d| due(d, now)) {
            self.sender.on_nofeedback_expiry(t);
        }
        if self.sender.next_probe_deadline().is_some_and(|d| due(d, now)) {
            self.sender.on_probe_tick(t);
        }
        self.after_rate_change(x_before);
        if self.sender.can_send() && due(self.next_send, now) {
            self.send_data(t, out);
        }
        self.log_changes(out);
    }

    fn send_data(&mut self, t: f64, out: &mut Vec<Action>) {
        let opts = self.sender.options_for_next_packet();
        out.push(Action::Forward(Packet {
            flow: self.id,
            seq: self.seq,
            size: SEGMENT,
            payload: Payload::TfrcData {
                ts: t,
                rtt: self.sender.inner().r_est().unwrap_or(0.0),
                options: encode_options(&opts),
            },
        }));
        self.seq += 1;
        let gap = self.sender.inner().packet_interval();
        // Keep the nominal schedule unless it has fallen more than a gap behind.
        self.next_send = self.next_send.max(t - gap) + gap;
        self.last_send = Some(t);
    }

    /// Pulls the next send forward when the rate went up.
    fn after_rate_change(&mut self, x_before: f64) {
        if self.sender.x() > x_before {
            if let Some(last) = self.last_send {
                let sooner = last + self.sender.inner().packet_interval();
                self.next_send = self.next_send.min(sooner);
            }
        }
    }

    fn feedback_packet(&self, fb: tfrc_core::Feedback, opts: &[SignalOption]) -> Action {
        Action::Reverse(Packet {
            flow: self.id,
            seq: 0,
            size: CONTROL_PACKET_SIZE,
            payload: Payload::TfrcFeedback {
                fb,
                options: encode_options(opts),
            },
        })
    }

    /// Data packet reached the receiver.
    pub fn on_data(&mut self, pkt: &Packet, now: SimTime, out: &mut Vec<Action>) {
        let Payload::TfrcData { ts, rtt, options } = &pkt.payload else {
            return;
        };
        let t = now.as_secs();
        let opts = decode_options(options).unwrap_or_default();
        let arrival = self.receiver.record_packet(pkt.seq, t, *ts, *rtt, &opts);
        if !arrival.ignored {
            out.push(Action::Goodput(pkt.size as u64));
        }
        if arrival.feedback_now {
            let (fb, opts) = self.receiver.feedback(t);
            out.push(self.feedback_packet(fb, &opts));
        }
    }

    /// Report or signal reached the sender.
    pub fn on_control(&mut self, pkt: &Packet, now: SimTime, out: &mut Vec<Action>) {
        let t = now.as_secs();
        let x_before = self.sender.x();
        let was_sending = self.sender.can_send();
        match &pkt.payload {
            Payload::TfrcFeedback { fb, options } => {
                let opts = decode_options(options).unwrap_or_default();
                self.sender.on_feedback(fb, &opts, t);
                if let Some(r) = self.sender.inner().r_est() {
                    out.push(Action::RttSample(r));
                }
            }
            Payload::TfrcSignal { options } => {
                let opts = decode_options(options).unwrap_or_default();
                self.sender.on_signal(&opts, t);
            }
            _ => return,
        }
        if !was_sending && self.sender.can_send() {
            self.next_send = t;
        }
        self.after_rate_change(x_before);
        self.log_changes(out);
    }

    fn log_changes(&mut self, out: &mut Vec<Action>) {
        let rate = self.effective_rate();
        if rate != self.logged_rate {
            self.logged_rate = rate;
            out.push(Action::Record(RecordKind::RateChange, self.seq, rate));
        }
        let phase = self.sender.phase();
        if phase != self.logged_phase {
            self.logged_phase = phase;
            out.push(Action::Record(RecordKind::StateTransition, self.seq, phase_code(phase)));
        }
    }
}

/// Byte-counting NewReno with timestamps and one ACK per segment.
#[derive(Debug, Clone)]
pub struct RenoFlow {
    id: FlowId,
    mss: f64,
    cwnd: f64,
    ssthresh: f64,
    snd_una: u64,
    snd_nxt: u64,
    high_sent: u64,
    dupacks: u32,
    in_recovery: bool,
    partial_seen: bool,
    /// Fast recovery may start only once `snd_una` reaches this.
    recover: u64,
    srtt: Option<f64>,
    rttvar: f64,
    rto: f64,
    rto_deadline: Option<f64>,
    last_rtt_log: f64,
    rcv_next: u64,
    out_of_order: BTreeSet<u64>,
}

impl RenoFlow {
    pub const MIN_RTO: f64 = 0.2;
    pub const MAX_RTO: f64 = 64.0;
    pub const INITIAL_RTO: f64 = 1.0;

    pub fn new(id: FlowId) -> Self {
        let mss = SEGMENT as f64;
        Self {
            id,
            mss,
            cwnd: 2.0 * mss,
            ssthresh: f64::INFINITY,
            snd_una: 0,
            snd_nxt: 0,
            high_sent: 0,
            dupacks: 0,
            in_recovery: false,
            partial_seen: false,
            recover: 0,
            srtt: None,
            rttvar: 0.0,
            rto: Self::INITIAL_RTO,
            rto_deadline: None,
            last_rtt_log: f64::NEG_INFINITY,
            rcv_next: 0,
            out_of_order: BTreeSet::new(),
        }
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }
    pub fn srtt(&self) -> Option<f64> {
        self.srtt
    }

    pub fn next_wake(&self) -> Option<f64> {
        self.rto_deadline
    }

    pub fn start(&mut self, now: SimTime, out: &mut Vec<Action>) {
        self.try_send(now.as_secs(), out);
    }

    fn segment(&self, seq: u64, t: f64) -> Action {
        Action::Forward(Packet {
            flow: self.id,
            seq,
            size: SEGMENT,
            payload: Payload::RenoData { ts: t },
        })
    }

    fn flight(&self) -> f64 {
        (self.snd_nxt - self.snd_una) as f64 * self.mss
    }

    fn try_send(&mut self, t: f64, out: &mut Vec<Action>) {
        while self.flight() + self.mss <= self.cwnd {
            out.push(self.segment(self.snd_nxt, t));
            self.snd_nxt += 1;
            self.high_sent = self.high_sent.max(self.snd_nxt);
        }
        if self.rto_deadline.is_none() && self.snd_nxt > self.snd_una {
            self.rto_deadline = Some(t + self.rto);
        }
    }

    fn rtt_sample(&mut self, r: f64, out: &mut Vec<Action>, t: f64) {
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2.0;
            }
            Some(s) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (s - r).abs();
                self.srtt = Some(0.875 * s + 0.125 * r);
            }
        }
        let srtt = self.srtt.expect("just set");
        self.rto = (srtt + 4.0 * self.rttvar).clamp(Self::MIN_RTO, Self::MAX_RTO);
        if t - self.last_rtt_log >= 0.1 {
            self.last_rtt_log = t;
            out.push(Action::RttSample(srtt));
        }
    }

    pub fn on_wake(&mut self, now: SimTime, out: &mut Vec<Action>) {
        let t = now.as_secs();
        if !self.rto_deadline.is_some_and(|d| due(d, now)) {
            return;
        }
        self.ssthresh = (self.flight() / 2.0).max(2.0 * self.mss);
        self.cwnd = self.mss;
        self.snd_nxt = self.snd_una;
        self.in_recovery = false;
        self.dupacks = 0;
        self.recover = self.high_sent;
        self.rto = (2.0 * self.rto).min(Self::MAX_RTO);
        self.rto_deadline = None;
        self.try_send(t, out);
    }

    /// Segment reached the receiver.
    pub fn on_data(&mut self, pkt: &Packet, _now: SimTime, out: &mut Vec<Action>) {
        let Payload::RenoData { ts } = pkt.payload else {
            return;
        };
        let seq = pkt.seq;
        if seq == self.rcv_next {
            out.push(Action::Goodput(pkt.size as u64));
            self.rcv_next += 1;
            while self.out_of_order.remove(&self.rcv_next) {
                self.rcv_next += 1;
            }
        } else if seq > self.rcv_next && self.out_of_order.insert(seq) {
            out.push(Action::Goodput(pkt.size as u64));
        }
        out.push(Action::Reverse(Packet {
            flow: self.id,
            seq,
            size: CONTROL_PACKET_SIZE,
            payload: Payload::RenoAck {
                ack: self.rcv_next,
                ts_echo: ts,
            },
        }));
    }

    /// ACK reached the sender.
    pub fn on_control(&mut self, pkt: &Packet, now: SimTime, out: &mut Vec<Action>) {
        let Payload::RenoAck { ack, ts_echo } = pkt.payload else {
            return;
        };
        let t = now.as_secs();
        if ack > self.snd_una {
            self.rtt_sample(t - ts_echo, out, t);
            let acked = (ack - self.snd_una) as f64;
            self.snd_una = ack;
            self.snd_nxt = self.snd_nxt.max(ack);
            let mut rearm = true;
            if self.in_recovery {
                if ack >= self.recover {
                    self.in_recovery = false;
                    self.cwnd = self.ssthresh;
                    self.dupacks = 0;
                } else {
                    // Partial ACK: the next hole is lost too. Only the first
                    // one restarts the timer, so a long run of holes ends in
                    // a timeout rather than one repair per RTT.
                    out.push(self.segment(self.snd_una, t));
                    self.cwnd = (self.cwnd - acked * self.mss + self.mss).max(self.mss);
                    rearm = !self.partial_seen;
                    self.partial_seen = true;
                }
            } else {
                self.dupacks = 0;
                if self.cwnd < self.ssthresh {
                    self.cwnd += (acked * self.mss).min(2.0 * self.mss);
                } else {
                    self.cwnd += acked * self.mss * self.mss / self.cwnd;
                }
            }
            if self.snd_nxt == self.snd_una {
                self.rto_deadline = None;
            } else if rearm || self.rto_deadline.is_none() {
                self.rto_deadline = Some(t + self.rto);
            }
        } else if ack == self.snd_una && self.snd_nxt > self.snd_una {
            self.dupacks += 1;
            if self.in_recovery {
                self.cwnd += self.mss;
            } else if self.dupacks == 3 && self.snd_una >= self.recover {
                self.ssthresh = (self.flight() / 2.0).max(2.0 * self.mss);
                self.recover = self.snd_nxt;
                self.in_recovery = true;
                self.partial_seen = false;
                out.push(self.segment(self.snd_una, t));
                self.cwnd = self.ssthresh + 3.0 * self.mss;
            }
        }
        self.try_send(t, out);
    }
}

#[derive(Debug, Clone)]
pub enum Flow {
    Tfrc { kind: FlowKind, flow: Box<TfrcFlow> },
    Reno(Box<RenoFlow>),
}

impl Flow {
    pub fn new(id: FlowId, kind: FlowKind, now: f64, freeze: FreezeConfig) -> Self {
        match kind {
            FlowKind::Tfrc | FlowKind::Freeze => Flow::Tfrc {
                kind,
                flow: Box::new(TfrcFlow::new(id, now, freeze)),
            },
            FlowKind::Reno => Flow::Reno(Box::new(RenoFlow::new(id))),
        }
    }

    pub fn kind(&self) -> FlowKind {
        match self {
            Flow::Tfrc { kind, .. } => *kind,
            Flow::Reno(_) => FlowKind::Reno,
        }
    }

    pub fn as_tfrc(&self) -> Option<&TfrcFlow> {
        match self {
            Flow::Tfrc { flow, .. } => Some(flow),
            Flow::Reno(_) => None,
        }
    }

    pub fn as_tfrc_mut(&mut self) -> Option<&mut TfrcFlow> {
        match self {
            Flow::Tfrc { flow, .. } => Some(flow),
            Flow::Reno(_) => None,
        }
    }

    pub fn as_reno(&self) -> Option<&RenoFlow> {
        match self {
            Flow::Reno(r) => Some(r),
            _ => None,
        }
    }

    pub fn start(&mut self, now: SimTime, out: &mut Vec<Action>) {
        match self {
            Flow::Tfrc { flow, .. } => flow.on_wake(now, out),
            Flow::Reno(r) => r.start(now, out),
        }
    }

    pub fn next_wake(&self) -> Option<f64> {
        match self {
            Flow::Tfrc { flow, .. } => flow.next_wake(),
            Flow::Reno(r) => r.next_wake(),
        }
    }

    pub fn on_wake(&mut self, now: SimTime, out: &mut Vec<Action>) {
        match self {
            Flow::Tfrc { flow, .. } => flow.on_wake(now, out),
            Flow::Reno(r) => r.on_wake(now, out),
        }
    }

    pub fn on_data(&mut self, pkt: &Packet, now: SimTime, out: &mut Vec<Action>) {
        match self {
            Flow::Tfrc { flow, .. } => flow.on_data(pkt, now, out),
            Flow::Reno(r) => r.on_data(pkt, now, out),
        }
    }

    pub fn on_control(&mut self, pkt: &Packet, now: SimTime, out: &mut Vec<Action>) {
        match self {
            Flow::Tfrc { flow, .. } => flow.on_control(pkt, now, out),
            Flow::Reno(r) => r.on_control(pkt, now, out),
        }
    }
}
