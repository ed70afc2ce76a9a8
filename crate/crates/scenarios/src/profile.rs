use std::fmt;
use std::str::FromStr;

use tfrc_core::Technology;
use tfrc_simnet::LinkSpec;

/// Delay of the wired sender-router hop, seconds.
pub const WIRED_DELAY: f64 = 0.001;
/// Router buffer on the wireless hop, packets.
pub const BUFFER: usize = 50;

/// The wireless hop for a technology. The one-way delay is chosen so that
/// the whole path's base RTT equals the technology's average RTT.
pub fn link_for(tech: Technology) -> LinkSpec {
    LinkSpec::new(tech.capacity_bps(), tech.base_rtt() / 2.0 - WIRED_DELAY, BUFFER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Standard,
    Freeze,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Standard, Variant::Freeze];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Freeze => "freeze",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "std" | "tfrc" => Ok(Variant::Standard),
            "freeze" => Ok(Variant::Freeze),
            other => Err(format!("unknown variant {other:?} (standard or freeze)")),
        }
    }
}
