//! One direction of a link: a DropTail FIFO feeding a fixed-delay pipe.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::packet::Packet;
use crate::time::SimTime;

fn default_queue() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    /// Bits per second.
    pub capacity_bps: f64,
    /// Seconds.
    pub one_way_delay: f64,
    /// Packets waiting behind the one being serialised.
    #[serde(default = "default_queue")]
    pub queue_capacity: usize,
}

impl LinkSpec {
    pub fn new(capacity_bps: f64, one_way_delay: f64, queue_capacity: usize) -> Self {
        Self {
            capacity_bps,
            one_way_delay,
            queue_capacity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_bps > 0.0 && self.capacity_bps.is_finite()) {
            return Err(SimError::Config(format!(
                "link capacity must be positive, got {}",
                self.capacity_bps
            )));
        }
        if !(self.one_way_delay >= 0.0 && self.one_way_delay.is_finite()) {
            return Err(SimError::Config(format!(
                "link delay must be non-negative, got {}",
                self.one_way_delay
            )));
        }
        if self.queue_capacity < 1 {
            return Err(SimError::Config("queue capacity must be at least 1".into()));
        }
        Ok(())
    }

    pub fn serialization(&self, bytes: u32) -> SimTime {
        SimTime::from_secs(bytes as f64 * 8.0 / self.capacity_bps)
    }
}

/// Outcome of offering a packet to a link.
#[derive(Debug, Clone, PartialEq)]
pub enum Offer {
    /// Accepted; the packet reaches the far end at this time.
    Accepted(SimTime),
    QueueFull(Packet),
    Down(Packet),
}

#[derive(Debug, Clone)]
pub struct Link {
    spec: LinkSpec,
    up: bool,
    /// Bumped on every disconnect so stale arrival events can be recognised.
    epoch: u64,
    /// Packets accepted and not yet delivered: (serialisation end, arrival).
    in_flight: VecDeque<(SimTime, SimTime, Packet)>,
    busy_until: SimTime,
    /// Arrival of the newest accepted packet; keeps delivery FIFO when the
    /// delay is lowered mid-flight.
    last_arrival: SimTime,
    max_backlog: usize,
}

impl Link {
    pub fn new(spec: LinkSpec) -> Self {
        Self {
            spec,
            up: true,
            epoch: 0,
            in_flight: VecDeque::new(),
            busy_until: SimTime::ZERO,
            last_arrival: SimTime::ZERO,
            max_backlog: 0,
        }
    }

    pub fn spec(&self) -> &LinkSpec {
        &self.spec
    }
    pub fn is_up(&self) -> bool {
        self.up
    }
    pub fn epoch(&self) -> u64 {
        self.epoch
    }
    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
    pub fn queued(&self) -> impl Iterator<Item = &Packet> {
        self.in_flight.iter().map(|(_, _, p)| p)
    }
    /// Largest number of packets ever waiting behind the one in service.
    pub fn max_backlog(&self) -> usize {
        self.max_backlog
    }

    /// Packets waiting to be serialised at `now`, excluding the one in service.
    pub fn backlog(&self, now: SimTime) -> usize {
        let queued = self.in_flight.iter().filter(|(end, _, _)| *end > now).count();
        queued.saturating_sub(1)
    }

    pub fn offer(&mut self, pkt: Packet, now: SimTime) -> Offer {
        if !self.up {
            return Offer::Down(pkt);
        }
        // Packets whose serialisation has not finished occupy the buffer.
        let waiting = self
            .in_flight
            .iter()
            .rev()
            .take_while(|(end, _, _)| *end > now)
            .count();
        if waiting > self.spec.queue_capacity {
            return Offer::QueueFull(pkt);
        }
        self.max_backlog = self.max_backlog.max(waiting);
        let start = self.busy_until.max(now);
        let end = start + self.spec.serialization(pkt.size);
        let arrival = (end + SimTime::from_secs(self.spec.one_way_delay)).max(self.last_arrival);
        self.busy_until = end;
        self.last_arrival = arrival;
        self.in_flight.push_back((end, arrival, pkt));
        Offer::Accepted(arrival)
    }

    /// Removes the packet arriving at `now`, if the event is still current.
    pub fn take_arrival(&mut self, epoch: u64, now: SimTime) -> Option<Packet> {
        if epoch != self.epoch {
            return None;
        }
        match self.in_flight.front() {
            Some((_, at, _)) if *at <= now => self.in_flight.pop_front().map(|(_, _, p)| p),
            _ => None,
        }
    }

    /// Takes the link down, returning everything queued or in the pipe.
    pub fn disconnect(&mut self) -> Vec<Packet> {
        self.up = false;
        self.epoch += 1;
        self.in_flight.drain(..).map(|(_, _, p)| p).collect()
    }

    /// Changes capacity, delay and buffer without dropping anything.
    pub fn set_spec(&mut self, spec: LinkSpec) {
        self.spec = spec;
    }

    pub fn reconnect(&mut self, spec: LinkSpec, now: SimTime) {
        self.spec = spec;
        self.up = true;
        self.busy_until = now;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::Payload;

    fn pkt(seq: u64) -> Packet {
        Packet {
            flow: 0,
            seq,
            size: 500,
            payload: Payload::RenoData { ts: 0.0 },
        }
    }

    #[test]
    fn back_to_back_packets_are_spaced_by_serialisation() {
        let mut l = Link::new(LinkSpec::new(4e6, 0.01, 50));
        let a = l.offer(pkt(0), SimTime::ZERO);
        let b = l.offer(pkt(1), SimTime::ZERO);
        match (a, b) {
            (Offer::Accepted(a), Offer::Accepted(b)) => {
                assert_eq!(a, SimTime::from_secs(0.011));
                assert_eq!(b.0 - a.0, 1_000_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn umts_serialisation() {
        let spec = LinkSpec::new(384e3, 0.1, 50);
        assert!(spec.serialization(500).as_secs() >= 0.0104);
    }

    #[test]
    fn droptail_rejects_the_overflowing_packet() {
        let mut l = Link::new(LinkSpec::new(1e6, 0.0, 50));
        // One in service plus fifty waiting.
        for k in 0..51 {
            assert!(matches!(l.offer(pkt(k), SimTime::ZERO), Offer::Accepted(_)));
        }
        assert!(matches!(l.offer(pkt(51), SimTime::ZERO), Offer::QueueFull(_)));
        assert_eq!(l.max_backlog(), 50);
    }

    #[test]
    fn disconnect_flushes_and_invalidates() {
        let mut l = Link::new(LinkSpec::new(1e6, 0.1, 50));
        for k in 0..5 {
            l.offer(pkt(k), SimTime::ZERO);
        }
        let epoch = l.epoch();
        assert_eq!(l.disconnect().len(), 5);
        assert!(l.take_arrival(epoch, SimTime::from_secs(1.0)).is_none());
        assert!(matches!(l.offer(pkt(9), SimTime::ZERO), Offer::Down(_)));
        l.reconnect(LinkSpec::new(2e6, 0.05, 50), SimTime::from_secs(2.0));
        assert!(matches!(l.offer(pkt(10), SimTime::from_secs(2.0)), Offer::Accepted(_)));
    }
}
