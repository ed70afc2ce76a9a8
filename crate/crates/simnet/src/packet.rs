use tfrc_core::Feedback;

/// Size of feedback and ACK packets, bytes.
pub const CONTROL_PACKET_SIZE: u32 = 40;

pub type FlowId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// TFRC data. `options` is the encoded option area.
    TfrcData {
        ts: f64,
        rtt: f64,
        options: Vec<u8>,
    },
    TfrcFeedback {
        fb: Feedback,
        options: Vec<u8>,
    },
    /// Connection-level signal from receiver to sender, no report attached.
    TfrcSignal {
        options: Vec<u8>,
    },
    RenoData {
        ts: f64,
    },
    RenoAck {
        /// Next segment expected.
        ack: u64,
        ts_echo: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub flow: FlowId,
    pub seq: u64,
    pub size: u32,
    pub payload: Payload,
}

impl Packet {
    pub fn is_data(&self) -> bool {
        matches!(
            self.payload,
            Payload::TfrcData { .. } | Payload::RenoData { .. }
        )
    }
}
