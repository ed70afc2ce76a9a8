//! Header options used by the Freeze extension.
//!
//! Layout follows the DCCP option area: types below 32 are a single byte with
//! no length; every other option is `[type, length, payload...]` where
//! `length` counts the type and length bytes. The signalling options carry no
//! payload and are always encoded as two bytes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SignalOption {
    /// Connection-level: stop sending and keep state.
    Freeze = 40,
    /// Connection-level: resume from the saved state.
    Unfreeze = 41,
    /// Sender is restoring its pre-freeze rate.
    Restoring = 150,
    /// Sender is probing for more capacity.
    Probing = 151,
    /// Receiver has seen a full RTT of restored traffic.
    Unfrozen = 200,
}

impl SignalOption {
    pub const ALL: [SignalOption; 5] = [
        SignalOption::Freeze,
        SignalOption::Unfreeze,
        SignalOption::Restoring,
        SignalOption::Probing,
        SignalOption::Unfrozen,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.code() == code)
    }
}

const SINGLE_BYTE_LIMIT: u8 = 32;

pub fn encode_options(opts: &[SignalOption]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * opts.len());
    for o in opts {
        out.extend_from_slice(&[o.code(), 2]);
    }
    out
}

/// Decodes the known options in order, skipping anything else.
pub fn decode_options(bytes: &[u8]) -> Result<Vec<SignalOption>> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let kind = bytes[at];
        if kind < SINGLE_BYTE_LIMIT {
            at += 1;
            continue;
        }
        let Some(&len) = bytes.get(at + 1) else {
            return Err(Error::Truncated {
                offset: at,
                reason: "missing length byte",
            });
        };
        if len < 2 {
            return Err(Error::Truncated {
                offset: at + 1,
                reason: "length below 2",
            });
        }
        let end = at + len as usize;
        if end > bytes.len() {
            return Err(Error::Truncated {
                offset: at,
                reason: "option runs past the end of the area",
            });
        }
        if let Some(o) = SignalOption::from_code(kind) {
            out.push(o);
        }
        at = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_area() {
        assert!(encode_options(&[]).is_empty());
        assert_eq!(decode_options(&[]).unwrap(), vec![]);
    }

    #[test]
    fn single_option_round_trip() {
        let b = encode_options(&[SignalOption::Freeze]);
        assert_eq!(b, vec![40, 2]);
        assert_eq!(decode_options(&b).unwrap(), vec![SignalOption::Freeze]);
    }

    #[test]
    fn unknown_options_are_skipped() {
        // padding, unknown TLV with payload, known, single-byte unknown, known
        let b = [0, 99, 4, 0xAA, 0xBB, 150, 2, 3, 200, 2];
        assert_eq!(
            decode_options(&b).unwrap(),
            vec![SignalOption::Restoring, SignalOption::Unfrozen]
        );
    }

    #[test]
    fn truncation_names_the_offset() {
        assert_eq!(
            decode_options(&[40, 2, 41]),
            Err(Error::Truncated {
                offset: 2,
                reason: "missing length byte"
            })
        );
        assert!(matches!(
            decode_options(&[150, 5, 0]),
            Err(Error::Truncated { offset: 0, .. })
        ));
        assert!(matches!(
            decode_options(&[150, 1]),
            Err(Error::Truncated { offset: 1, .. })
        ));
    }
}
