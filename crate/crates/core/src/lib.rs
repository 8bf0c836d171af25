//! Simulation of cascaded pumped couplings between optical modes: sparse Fock
//! states, exact evolution on invariant subspaces, circuits built from
//! couplings, splitters and detectors, and the protocols built on top of
//! them.

pub mod calibration;
pub mod circuits;
pub mod coupling;
pub mod detectors;
pub mod error;
pub mod evolution;
pub mod fock;
pub mod io;
pub mod sources;

pub use circuits::{Circuit, CircuitElement};
pub use coupling::{Coupling, CouplingKind};
pub use error::{CpcError, Result};
pub use evolution::evolve;
pub use fock::{ModeRegistry, QuantumState, TruncationPolicy};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/fock-states.md")]
    struct FockStates;
    #[doc = include_str!("../../../book/src/couplings.md")]
    struct Couplings;
    #[doc = include_str!("../../../book/src/evolution.md")]
    struct Evolution;
    #[doc = include_str!("../../../book/src/circuits.md")]
    struct Circuits;
    #[doc = include_str!("../../../book/src/sources.md")]
    struct Sources;
    #[doc = include_str!("../../../book/src/detectors.md")]
    struct Detectors;
    #[doc = include_str!("../../../book/src/calibration.md")]
    struct Calibration;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct CommandLine;
    #[doc = include_str!("../../../FORMATS.md")]
    struct Formats;
    #[doc = include_str!("../../../README.md")]
    struct Readme;
}
