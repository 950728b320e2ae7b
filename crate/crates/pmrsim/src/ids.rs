//! Opaque identifiers for network entities.
//!
//! Identifiers are monotonically assigned integers rendered as opaque
//! strings (`ue12`, `g3`, `tmgi-7`). The numeric payload is kept so that
//! deterministic tie-breaking (oldest group first) stays cheap, but callers
//! should treat the rendered form as the identity.

use std::fmt;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(u64);

        impl $name {
            pub const fn new(raw: u64) -> Self {
                Self(raw)
            }

            pub const fn raw(self) -> u64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(/// A user terminal.
    UeId, "ue");
id_type!(/// A group call.
    GroupId, "g");
id_type!(/// A radio cell (one eNB).
    CellId, "c");
id_type!(/// An MBMS area, the set of cells jointly delivering one flow.
    AreaId, "a");
id_type!(/// A unicast or MBMS bearer.
    BearerId, "b");
id_type!(/// Temporary Multicast Group Identifier carried by an MBMS bearer.
    Tmgi, "tmgi-");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_opaque_string() {
        assert_eq!(UeId::new(12).to_string(), "ue12");
        assert_eq!(Tmgi::new(7).to_string(), "tmgi-7");
        assert_eq!(GroupId::new(0).to_string(), "g0");
    }

    #[test]
    fn ordering_follows_assignment_order() {
        assert!(GroupId::new(1) < GroupId::new(2));
    }
}
