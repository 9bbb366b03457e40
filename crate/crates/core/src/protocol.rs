//! Protocol selection and its knobs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::Basis;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "memory-3cx")]
    Memory3cx,
    #[serde(rename = "memory-bs")]
    MemoryBs,
    #[serde(rename = "interleaved")]
    InterleavedMemory,
    /// Transversal Bell preparation, T rounds, readout of both patches in one basis.
    #[serde(rename = "bell-prep")]
    BellPrep,
    /// T rounds on a product state, then transversal Bell measurement.
    #[serde(rename = "bell-meas")]
    BellMeas,
    #[serde(rename = "bell-prep-meas")]
    BellPrepMeas,
    /// As `BellPrepMeas` with a lattice-surgery XX/ZZ layer before the Bell measurement.
    #[serde(rename = "bell-ls")]
    BellPrepLsMeas,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::Memory3cx,
        Protocol::MemoryBs,
        Protocol::InterleavedMemory,
        Protocol::BellPrep,
        Protocol::BellMeas,
        Protocol::BellPrepMeas,
        Protocol::BellPrepLsMeas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Memory3cx => "memory-3cx",
            Protocol::MemoryBs => "memory-bs",
            Protocol::InterleavedMemory => "interleaved",
            Protocol::BellPrep => "bell-prep",
            Protocol::BellMeas => "bell-meas",
            Protocol::BellPrepMeas => "bell-prep-meas",
            Protocol::BellPrepLsMeas => "bell-ls",
        }
    }

    pub fn uses_three_cx(self) -> bool {
        self != Protocol::MemoryBs
    }

    pub fn uses_bacon_shor(self) -> bool {
        self != Protocol::Memory3cx
    }

    pub fn is_bell(self) -> bool {
        matches!(
            self,
            Protocol::BellPrep | Protocol::BellMeas | Protocol::BellPrepMeas | Protocol::BellPrepLsMeas
        )
    }

    pub fn prepares_bell_pair(self) -> bool {
        matches!(self, Protocol::BellPrep | Protocol::BellPrepMeas | Protocol::BellPrepLsMeas)
    }

    pub fn measures_bell_pair(self) -> bool {
        matches!(self, Protocol::BellMeas | Protocol::BellPrepMeas | Protocol::BellPrepLsMeas)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown protocol {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LsBasis {
    XX,
    ZZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LsOrder {
    /// Parities measured before the transversal CX of the Bell measurement.
    #[default]
    BeforeCx,
    AfterCx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// CX layers of the two codes interleaved within each round.
    #[default]
    Interleaved,
    /// One code's round after the other with a barrier in between.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub d: usize,
    pub rounds: usize,
    /// Memory basis, or the readout basis of `BellPrep`.
    pub basis: Basis,
    /// Initial logical states for `BellMeas` (3CX, BS): X means |+>, Z means |0>.
    pub initial: [Basis; 2],
    pub ls_bases: Vec<LsBasis>,
    pub ls_order: LsOrder,
    /// Transversal CX after this many rounds (interleaved memory only).
    pub cx_after_round: Option<usize>,
    pub schedule: Schedule,
}

impl ProtocolConfig {
    pub fn new(protocol: Protocol, d: usize, rounds: usize) -> Self {
        let ls_bases = if protocol == Protocol::BellPrepLsMeas {
            vec![LsBasis::XX, LsBasis::ZZ]
        } else {
            Vec::new()
        };
        ProtocolConfig {
            protocol,
            d,
            rounds,
            basis: Basis::Z,
            initial: [Basis::X, Basis::X],
            ls_bases,
            ls_order: LsOrder::BeforeCx,
            cx_after_round: None,
            schedule: Schedule::Interleaved,
        }
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d < 2 {
            return bad(format!("distance {} < 2", self.d));
        }
        if self.rounds < 1 {
            return bad("at least one stabilizer round is required".into());
        }
        let p = self.protocol;
        if p == Protocol::BellPrepLsMeas {
            if !(self.ls_bases.contains(&LsBasis::XX) && self.ls_bases.contains(&LsBasis::ZZ)) {
                return bad("lattice surgery needs both XX and ZZ to extract YY".into());
            }
        } else if !self.ls_bases.is_empty() {
            return bad(format!("{p} has no lattice-surgery layer"));
        }
        if let Some(k) = self.cx_after_round {
            if p != Protocol::InterleavedMemory {
                return bad("a mid-circuit transversal CX is only available for interleaved memory".into());
            }
            if k == 0 || k >= self.rounds {
                return bad(format!("CX after round {k} needs 1 <= k < T = {}", self.rounds));
            }
        }
        if p == Protocol::BellMeas && self.initial[0] != self.initial[1] {
            return bad("Bell measurement of a mixed-basis product state has no deterministic observable".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_names_match_cli_names() {
        for p in Protocol::ALL {
            let js = serde_json::to_string(&p).unwrap();
            assert_eq!(js, format!("\"{}\"", p.name()));
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
    }
}
