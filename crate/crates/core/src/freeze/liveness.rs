//! Exhaustive single-drop check of the Freeze signalling.
//!
//! A scripted handover runs on a minimal two-node loop: the receiver asks
//! the sender to freeze, the link goes down and comes back, the receiver
//! asks it to unfreeze. The script is replayed once per option-carrying
//! packet with that one packet dropped, and both state machines must end
//! up back in their normal phases with data flowing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{FreezeConfig, FreezeReceiver, FreezeSender, ReceiverFreezePhase, SenderFreezePhase, SignalOption};
use crate::equation::invert_throughput;
use crate::receiver::ReceiverConfig;
use crate::sender::{Feedback, SenderConfig, TfrcSender};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Script {
    /// One-way delay, seconds.
    pub delay: f64,
    /// Forward capacity, packets/s.
    pub capacity_pps: f64,
    /// Forward queue, packets.
    pub queue: usize,
    /// Starting rate as a fraction of capacity.
    pub load: f64,
    pub freeze_at: f64,
    pub down_at: f64,
    pub up_at: f64,
    pub end: f64,
}

impl Default for Script {
    fn default() -> Self {
        Self {
            delay: 0.02,
            capacity_pps: 100.0,
            queue: 10,
            load: 0.8,
            freeze_at: 2.0,
            down_at: 2.1,
            up_at: 3.6,
            end: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub sender_phase: SenderFreezePhase,
    pub receiver_phase: ReceiverFreezePhase,
    /// Option-carrying packets sent, in order.
    pub option_packets: usize,
    pub data_after_unfreeze: u64,
    pub lost_to_disconnection: u64,
    pub sender_phases_seen: Vec<SenderFreezePhase>,
}

impl Outcome {
    pub fn live(&self) -> bool {
        self.sender_phase == SenderFreezePhase::Normal
            && self.receiver_phase == ReceiverFreezePhase::Normal
            && self.data_after_unfreeze > 0
    }
}

#[derive(Debug, Clone)]
enum Msg {
    Data { seq: u64, ts: f64, rtt: f64, opts: Vec<SignalOption> },
    Feedback { fb: Feedback, opts: Vec<SignalOption> },
    Signal(SignalOption),
}

#[derive(Debug)]
struct Pending {
    at: f64,
    order: u64,
    to_receiver: bool,
    msg: Msg,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        o.at.total_cmp(&self.at).then(o.order.cmp(&self.order))
    }
}

struct World {
    script: Script,
    drop: Option<usize>,
    option_packets: usize,
    order: u64,
    queue: BinaryHeap<Pending>,
    link_free_at: f64,
    lost: u64,
}

impl World {
    fn up(&self, t: f64) -> bool {
        !(t >= self.script.down_at && t < self.script.up_at)
    }

    fn send(&mut self, now: f64, to_receiver: bool, msg: Msg) {
        let carries = match &msg {
            Msg::Data { opts, .. } | Msg::Feedback { opts, .. } => !opts.is_empty(),
            Msg::Signal(_) => true,
        };
        if carries {
            let id = self.option_packets;
            self.option_packets += 1;
            if self.drop == Some(id) {
                return;
            }
        }
        if !self.up(now) {
            if matches!(msg, Msg::Data { .. }) {
                self.lost += 1;
            }
            return;
        }
        let mut at = now + self.script.delay;
        if to_receiver && matches!(msg, Msg::Data { .. }) {
            let ser = 1.0 / self.script.capacity_pps;
            let backlog = ((self.link_free_at - now) / ser).max(0.0);
            if backlog >= self.script.queue as f64 {
                return;
            }
            self.link_free_at = self.link_free_at.max(now) + ser;
            at = self.link_free_at + self.script.delay;
        }
        if !self.up(at) {
            if matches!(msg, Msg::Data { .. }) {
                self.lost += 1;
            }
            return;
        }
        self.order += 1;
        self.queue.push(Pending {
            at,
            order: self.order,
            to_receiver,
            msg,
        });
    }
}

/// Runs the script, optionally dropping the `drop`-th option-carrying packet.
pub fn run(script: &Script, drop: Option<usize>) -> Outcome {
    const STEP: f64 = 1e-4;
    let s = 500.0;
    let rtt = 2.0 * script.delay;
    let x0 = script.load * script.capacity_pps * s;
    let p0 = invert_throughput(x0, rtt, s).map(|i| i.p).unwrap_or(0.01);
    let fcfg = FreezeConfig {
        max_disconnection: script.up_at - script.down_at,
        ..FreezeConfig::default()
    };
    let mut sender = FreezeSender::new(TfrcSender::at_rate(SenderConfig::default(), x0, rtt, p0, 0.0), fcfg);
    let mut receiver = FreezeReceiver::new(ReceiverConfig::default(), fcfg);
    let mut w = World {
        script: *script,
        drop,
        option_packets: 0,
        order: 0,
        queue: BinaryHeap::new(),
        link_free_at: 0.0,
        lost: 0,
    };

    let mut seq = 0u64;
    let mut next_send = 0.0;
    let mut was_frozen = false;
    let mut data_after_unfreeze = 0;
    let mut freeze_asked = false;
    let mut unfreeze_asked = false;
    let mut next_signal = f64::INFINITY;
    let mut phases = vec![sender.phase()];

    let steps = (script.end / STEP).ceil() as u64;
    for k in 0..=steps {
        let now = k as f64 * STEP;

        if !freeze_asked && now >= script.freeze_at {
            freeze_asked = true;
            receiver.request_freeze();
            next_signal = now;
        }
        if !unfreeze_asked && now >= script.up_at + 1e-4 {
            unfreeze_asked = true;
            receiver.request_unfreeze();
            next_signal = now;
        }
        if now >= next_signal {
            match receiver.take_signal() {
                Some(o) => {
                    w.send(now, false, Msg::Signal(o));
                    next_signal = now + 0.002;
                }
                None => next_signal = f64::INFINITY,
            }
        }

        while w.queue.peek().is_some_and(|p| p.at <= now) {
            let p = w.queue.pop().expect("peeked");
            match (p.to_receiver, p.msg) {
                (true, Msg::Data { seq, ts, rtt, opts }) => {
                    let a = receiver.record_packet(seq, now, ts, rtt, &opts);
                    if a.feedback_now {
                        let (fb, opts) = receiver.feedback(now);
                        w.send(now, false, Msg::Feedback { fb, opts });
                    }
                }
                (false, Msg::Feedback { fb, opts }) => {
                    sender.on_feedback(&fb, &opts, now);
                }
                (false, Msg::Signal(o)) => {
                    let before = sender.phase();
                    sender.on_signal(&[o], now);
                    if before == SenderFreezePhase::Frozen && sender.can_send() {
                        next_send = now;
                    }
                }
                _ => {}
            }
        }

        if receiver.feedback_deadline().is_some_and(|d| now >= d) {
            if let Some((fb, opts)) = receiver.on_feedback_timer(now) {
                w.send(now, false, Msg::Feedback { fb, opts });
            }
        }
        if sender.nofeedback_deadline().is_some_and(|d| now >= d) {
            sender.on_nofeedback_expiry(now);
        }
        sender.on_probe_tick(now);

        if sender.phase() == SenderFreezePhase::Frozen {
            was_frozen = true;
        }
        if sender.can_send() && now >= next_send {
            let opts = sender.options_for_next_packet();
            let r = sender.inner().r_est().unwrap_or(0.0);
            w.send(now, true, Msg::Data { seq, ts: now, rtt: r, opts });
            seq += 1;
            if was_frozen {
                data_after_unfreeze += 1;
            }
            next_send = now + sender.inner().packet_interval();
        }
        if phases.last() != Some(&sender.phase()) {
            phases.push(sender.phase());
        }
    }

    Outcome {
        sender_phase: sender.phase(),
        receiver_phase: receiver.phase(),
        option_packets: w.option_packets,
        data_after_unfreeze,
        lost_to_disconnection: w.lost,
        sender_phases_seen: phases,
    }
}

/// Drops each option-carrying packet of the baseline run in turn. Returns
/// the indices whose loss leaves either side stuck.
pub fn single_drop_failures(script: &Script) -> (usize, Vec<usize>) {
    let baseline = run(script, None);
    let n = baseline.option_packets;
    let failures = (0..n).filter(|&i| !run(script, Some(i)).live()).collect();
    (n, failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_handover_completes() {
        let out = run(&Script::default(), None);
        assert!(out.live(), "{out:?}");
        assert_eq!(out.lost_to_disconnection, 0);
        assert!(out.sender_phases_seen.contains(&SenderFreezePhase::Frozen));
        assert!(out.sender_phases_seen.contains(&SenderFreezePhase::Restoring));
        assert!(out.sender_phases_seen.contains(&SenderFreezePhase::Probing));
    }
}
