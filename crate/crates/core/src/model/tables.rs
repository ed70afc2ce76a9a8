//! Reference parameters of the four access technologies.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Technology {
    Umts,
    Wimax,
    Wifi11b,
    Wifi11g,
}

impl Technology {
    pub const ALL: [Technology; 4] = [
        Technology::Umts,
        Technology::Wimax,
        Technology::Wifi11b,
        Technology::Wifi11g,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technology::Umts => "UMTS",
            Technology::Wimax => "802.16",
            Technology::Wifi11b => "802.11b",
            Technology::Wifi11g => "802.11g",
        }
    }

    /// Stationary TFRC receive rate on this link, bytes/s.
    pub fn stationary_rate(self) -> f64 {
        match self {
            Technology::Umts => 0.044e6,
            Technology::Wimax => 1.10e6,
            Technology::Wifi11b => 1.27e6,
            Technology::Wifi11g => 4.82e6,
        }
    }

    /// Stationary smoothed RTT on this link, seconds.
    pub fn stationary_rtt(self) -> f64 {
        match self {
            Technology::Umts => 0.96,
            Technology::Wimax => 0.17,
            Technology::Wifi11b => 0.05,
            Technology::Wifi11g => 0.04,
        }
    }

    /// Nominal downlink capacity, bits/s.
    pub fn capacity_bps(self) -> f64 {
        match self {
            Technology::Umts => 384e3,
            Technology::Wimax => 9.5e6,
            Technology::Wifi11b => 11e6,
            Technology::Wifi11g => 54e6,
        }
    }

    /// Average base RTT of the link, seconds.
    pub fn base_rtt(self) -> f64 {
        match self {
            Technology::Umts => 0.250,
            Technology::Wimax => 0.080,
            Technology::Wifi11b => 0.020,
            Technology::Wifi11g => 0.020,
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key = s.trim().to_ascii_lowercase();
        Ok(match key.as_str() {
            "umts" | "3g" => Technology::Umts,
            "802.16" | "wimax" | "80216" => Technology::Wimax,
            "802.11b" | "wifi-b" | "80211b" | "11b" => Technology::Wifi11b,
            "802.11g" | "wifi-g" | "80211g" | "11g" => Technology::Wifi11g,
            _ => return Err(Error::UnknownTechnology(s.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in Technology::ALL {
            assert_eq!(t.name().parse::<Technology>().unwrap(), t);
        }
        assert_eq!("UMTS".parse::<Technology>().unwrap(), Technology::Umts);
        assert!(matches!(
            "lte".parse::<Technology>(),
            Err(Error::UnknownTechnology(_))
        ));
    }
}
