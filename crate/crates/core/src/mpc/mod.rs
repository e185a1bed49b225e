//! Semi-honest three-party computation with a helper dealer.
//!
//! `P0` and `P1` hold additive shares; `P2` deals Beaver triples and takes
//! no input or output. All protocol functions are called by all three
//! parties with identically shaped arguments.

mod context;
pub mod local;
pub mod protocols;
pub mod triples;

use std::fmt;
use std::str::FromStr;

pub use context::PartyContext;
pub use local::{run_local, LocalSetup};
pub use triples::{BeaverTriple, BitTriple, MatrixTriple};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    P0,
    P1,
    P2,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::P0, Party::P1, Party::P2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Party::P0),
            1 => Ok(Party::P1),
            2 => Ok(Party::P2),
            _ => Err(Error::ProtocolMisuse(format!("no party with index {i}"))),
        }
    }

    pub fn is_dealer(self) -> bool {
        self == Party::P2
    }

    /// The other computing party; `None` for the dealer.
    pub fn peer(self) -> Option<Party> {
        match self {
            Party::P0 => Some(Party::P1),
            Party::P1 => Some(Party::P0),
            Party::P2 => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Party::P0 => "P0",
            Party::P1 => "P1",
            Party::P2 => "P2",
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Behavior {
    SemiHonest,
    FailStop,
    Malicious,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    Static,
    Adaptive,
    Mobile,
}

impl FromStr for Behavior {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi-honest" => Ok(Behavior::SemiHonest),
            "fail-stop" => Ok(Behavior::FailStop),
            "malicious" => Ok(Behavior::Malicious),
            _ => Err(Error::UnsupportedAdversary(format!("unknown behavior {s:?}"))),
        }
    }
}

impl FromStr for Corruption {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Corruption::Static),
            "adaptive" => Ok(Corruption::Adaptive),
            "mobile" => Ok(Corruption::Mobile),
            _ => Err(Error::UnsupportedAdversary(format!("unknown corruption {s:?}"))),
        }
    }
}

/// The threat model the engine is built for. Only semi-honest, static
/// corruption of at most one of the three parties is supported; anything
/// else is rejected by [`AdversaryConfig::validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdversaryConfig {
    pub behavior: Behavior,
    pub corruption: Corruption,
    pub max_corrupted: usize,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self { behavior: Behavior::SemiHonest, corruption: Corruption::Static, max_corrupted: 1 }
    }
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.behavior != Behavior::SemiHonest {
            return Err(Error::UnsupportedAdversary(format!("{:?} behavior", self.behavior)));
        }
        if self.corruption != Corruption::Static {
            return Err(Error::UnsupportedAdversary(format!("{:?} corruption", self.corruption)));
        }
        if self.max_corrupted != 1 {
            return Err(Error::UnsupportedAdversary(format!(
                "{} corrupted parties (honest majority of 3 allows exactly 1)",
                self.max_corrupted
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_semi_honest_static_single_corruption() {
        assert!(AdversaryConfig::default().validate().is_ok());
        let mut c = AdversaryConfig::default();
        c.behavior = "malicious".parse().unwrap();
        assert!(c.validate().is_err());
        let mut c = AdversaryConfig::default();
        c.corruption = Corruption::Mobile;
        assert!(c.validate().is_err());
        let mut c = AdversaryConfig::default();
        c.max_corrupted = 2;
        assert!(c.validate().is_err());
        assert!("honest".parse::<Behavior>().is_err());
    }
}
