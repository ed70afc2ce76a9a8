//! The event loop.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use tfrc_core::FreezeConfig;

use crate::endpoint::{Action, Flow};
use crate::error::{Result, SimError};
use crate::link::{Link, LinkSpec, Offer};
use crate::packet::{FlowId, Packet, Payload};
use crate::scenario::{Action as Script, Scenario, ScriptEvent, ScriptState};
use crate::time::SimTime;
use crate::trace::{FlowStats, RecordKind, Trace, PATH};

/// Capacity given to the reverse hops.
pub const REVERSE_CAPACITY_BPS: f64 = 1e9;
const REVERSE_QUEUE: usize = 1000;

const WIRED_FWD: usize = 0;
const WIRELESS_FWD: usize = 1;
const WIRELESS_REV: usize = 2;
const WIRED_REV: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Script(usize),
    Arrival { link: usize, epoch: u64 },
    Wake { flow: FlowId, generation: u64 },
}

fn reverse_of(spec: &LinkSpec) -> LinkSpec {
    LinkSpec::new(REVERSE_CAPACITY_BPS, spec.one_way_delay, REVERSE_QUEUE)
}

#[derive(Debug, Clone)]
pub struct Simulator {
    now: SimTime,
    order: u64,
    queue: BinaryHeap<Reverse<(SimTime, u64, EventKind)>>,
    links: [Link; 4],
    flows: Vec<Flow>,
    /// Scheduled wake time and generation per flow.
    wakes: Vec<(SimTime, u64)>,
    script: Vec<ScriptEvent>,
    script_state: ScriptState,
    freeze: FreezeConfig,
    trace: Trace,
    duration: SimTime,
    actions: Vec<Action>,
}

impl Simulator {
    pub fn new(sc: &Scenario) -> Result<Self> {
        sc.validate()?;
        let freeze = FreezeConfig {
            max_disconnection: sc.max_disconnection,
            ..FreezeConfig::default()
        };
        let mut sim = Self {
            now: SimTime::ZERO,
            order: 0,
            queue: BinaryHeap::new(),
            links: [
                Link::new(sc.wired),
                Link::new(sc.link),
                Link::new(reverse_of(&sc.link)),
                Link::new(reverse_of(&sc.wired)),
            ],
            flows: Vec::new(),
            wakes: Vec::new(),
            script: Vec::new(),
            script_state: ScriptState::default(),
            freeze,
            trace: Trace::new(sc.trace),
            duration: SimTime::from_secs(sc.duration),
            actions: Vec::new(),
        };
        sim.schedule(sc.events.iter().cloned())?;
        Ok(sim)
    }

    /// Appends script events. Times must not precede the current clock or
    /// earlier script events.
    pub fn schedule(&mut self, events: impl IntoIterator<Item = ScriptEvent>) -> Result<()> {
        let events: Vec<ScriptEvent> = events.into_iter().collect();
        let mut st = self.script_state.clone();
        for ev in &events {
            if SimTime::from_secs(ev.t) < self.now {
                return Err(SimError::Config(format!(
                    "event at {} is before the current time {}",
                    ev.t, self.now
                )));
            }
            st.check(ev)?;
        }
        self.script_state = st;
        for ev in events {
            let idx = self.script.len();
            let at = SimTime::from_secs(ev.t);
            self.script.push(ev);
            self.push(at, EventKind::Script(idx));
        }
        Ok(())
    }

    pub fn set_duration(&mut self, secs: f64) {
        self.duration = SimTime::from_secs(secs);
    }

    pub fn now(&self) -> SimTime {
        self.now
    }
    pub fn trace(&self) -> &Trace {
        &self.trace
    }
    pub fn into_trace(self) -> Trace {
        self.trace
    }
    pub fn flow(&self, id: FlowId) -> Option<&Flow> {
        self.flows.get(id)
    }
    pub fn flow_stats(&self, id: FlowId) -> Option<&FlowStats> {
        self.trace.flows.get(id)
    }
    pub fn wireless(&self) -> &Link {
        &self.links[WIRELESS_FWD]
    }
    pub fn wired(&self) -> &Link {
        &self.links[WIRED_FWD]
    }

    /// Data packets of `flow` currently inside the forward hops.
    pub fn data_in_flight(&self, flow: FlowId) -> u64 {
        self.links[..=WIRELESS_FWD]
            .iter()
            .map(|l| l.queued().filter(|p| p.flow == flow && p.is_data()).count() as u64)
            .sum()
    }

    fn push(&mut self, at: SimTime, kind: EventKind) {
        self.order += 1;
        self.queue.push(Reverse((at.max(self.now), self.order, kind)));
    }

    /// Runs to the scenario duration and returns the trace.
    pub fn run(mut self) -> Trace {
        let end = self.duration;
        self.run_until(end);
        self.trace
    }

    /// Processes every event at or before `until` and advances the clock to it.
    pub fn run_until(&mut self, until: SimTime) {
        while let Some(Reverse((t, _, _))) = self.queue.peek() {
            if *t > until {
                break;
            }
            let Reverse((t, _, kind)) = self.queue.pop().expect("peeked");
            self.now = t;
            match kind {
                EventKind::Script(i) => self.run_script(i),
                EventKind::Arrival { link, epoch } => self.on_arrival(link, epoch),
                EventKind::Wake { flow, generation } => {
                    if self.wakes[flow].1 == generation {
                        self.wakes[flow].0 = SimTime::MAX;
                        self.flows[flow].on_wake(t, &mut self.actions);
                        self.apply(flow);
                    }
                }
            }
        }
        self.now = self.now.max(until);
        self.trace.end = self.now;
    }

    pub fn run_until_secs(&mut self, secs: f64) {
        self.run_until(SimTime::from_secs(secs));
    }

    fn run_script(&mut self, i: usize) {
        let ev = self.script[i].action.clone();
        let now = self.now;
        let t = now.as_secs();
        match ev {
            Script::StartFlow { kind } => {
                let id = self.flows.len();
                self.flows.push(Flow::new(id, kind, t, self.freeze));
                self.wakes.push((SimTime::MAX, 0));
                self.trace.flows.push(FlowStats::default());
                self.trace.flow_kinds.push(kind);
                self.flows[id].start(now, &mut self.actions);
                self.apply(id);
            }
            Script::Disconnect => {
                for l in [WIRELESS_FWD, WIRELESS_REV] {
                    for pkt in self.links[l].disconnect() {
                        self.drop_packet(&pkt, RecordKind::DropDisconnected);
                    }
                }
                self.trace.push(now, RecordKind::LinkState, PATH, 0, 0.0);
            }
            Script::Reconnect { link } => {
                self.links[WIRELESS_FWD].reconnect(link, now);
                self.links[WIRELESS_REV].reconnect(reverse_of(&link), now);
                self.trace.push(now, RecordKind::LinkState, PATH, 0, 1.0);
            }
            Script::Reparameterize { link } => {
                self.links[WIRELESS_FWD].set_spec(link);
                self.links[WIRELESS_REV].set_spec(reverse_of(&link));
                self.trace.push(now, RecordKind::LinkState, PATH, 0, 2.0);
            }
            Script::Freeze { flow } | Script::Unfreeze { flow } => {
                let freeze = matches!(ev, Script::Freeze { .. });
                if let Some(f) = self.flows[flow].as_tfrc_mut() {
                    if freeze {
                        f.request_freeze(t);
                    } else {
                        f.request_unfreeze(t);
                    }
                }
                self.sync_wake(flow);
            }
        }
    }

    fn on_arrival(&mut self, link: usize, epoch: u64) {
        let now = self.now;
        let Some(pkt) = self.links[link].take_arrival(epoch, now) else {
            return;
        };
        match link {
            WIRED_FWD => self.offer(WIRELESS_FWD, pkt),
            WIRED_REV => {
                let flow = pkt.flow;
                self.flows[flow].on_control(&pkt, now, &mut self.actions);
                self.apply(flow);
            }
            WIRELESS_FWD => {
                let flow = pkt.flow;
                if pkt.is_data() {
                    self.trace.flows[flow].delivered += 1;
                    self.trace.push(now, RecordKind::Deliver, flow, pkt.seq, pkt.size as f64);
                }
                self.flows[flow].on_data(&pkt, now, &mut self.actions);
                self.apply(flow);
            }
            _ => self.offer(WIRED_REV, pkt),
        }
    }

    fn offer(&mut self, link: usize, pkt: Packet) {
        match self.links[link].offer(pkt, self.now) {
            Offer::Accepted(at) => {
                let epoch = self.links[link].epoch();
                self.push(at, EventKind::Arrival { link, epoch });
            }
            Offer::QueueFull(p) => self.drop_packet(&p, RecordKind::DropQueue),
            Offer::Down(p) => self.drop_packet(&p, RecordKind::DropDisconnected),
        }
    }

    fn drop_packet(&mut self, pkt: &Packet, why: RecordKind) {
        if pkt.is_data() {
            let s = &mut self.trace.flows[pkt.flow];
            if why == RecordKind::DropQueue {
                s.dropped_queue += 1;
            } else {
                s.dropped_disconnected += 1;
            }
            self.trace.push(self.now, why, pkt.flow, pkt.seq, pkt.size as f64);
        }
    }

    /// Carries out what an endpoint asked for, then re-arms its wake-up.
    fn apply(&mut self, flow: FlowId) {
        let now = self.now;
        let mut actions = std::mem::take(&mut self.actions);
        for a in actions.drain(..) {
            match a {
                Action::Forward(pkt) => {
                    self.trace.flows[flow].sent += 1;
                    self.trace.push(now, RecordKind::Send, flow, pkt.seq, pkt.size as f64);
                    self.offer(WIRED_FWD, pkt);
                }
                Action::Reverse(pkt) => {
                    // Reports log the receive rate they carry; other control packets their size.
                    let value = match &pkt.payload {
                        Payload::TfrcFeedback { fb, .. } => fb.x_recv,
                        _ => pkt.size as f64,
                    };
                    self.trace.push(now, RecordKind::FeedbackSent, flow, pkt.seq, value);
                    self.offer(WIRELESS_REV, pkt);
                }
                Action::Record(kind, seq, value) => self.trace.push(now, kind, flow, seq, value),
                Action::Goodput(bytes) => self.trace.flows[flow].add_goodput(now, bytes),
                Action::RttSample(r) => self.trace.flows[flow].rtt_samples.push((now.as_secs(), r)),
            }
        }
        self.actions = actions;
        self.sync_wake(flow);
    }

    fn sync_wake(&mut self, flow: FlowId) {
        let Some(w) = self.flows[flow].next_wake() else {
            return;
        };
        let at = SimTime::from_secs(w).max(self.now);
        let (scheduled, generation) = self.wakes[flow];
        if at < scheduled {
            let generation = generation + 1;
            self.wakes[flow] = (at, generation);
            self.push(at, EventKind::Wake { flow, generation });
        }
    }
}

/// Runs a scenario from scratch to its duration.
pub fn run_scenario(sc: &Scenario) -> Result<Trace> {
    Ok(Simulator::new(sc)?.run())
}
