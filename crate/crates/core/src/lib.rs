//! Ring-composition attacks and dominance analysis for multiparty protocols
//! running over point-to-point channels with no broadcast.
//!
//! The crate is organised bottom-up:
//!
//! * [`protocol`]: parties as deterministic round-driven state machines,
//!   seeded coin streams, joint inputs and outcomes.
//! * [`netsim`]: synchronous lockstep execution with adversary injection
//!   under a secure-channel visibility model.
//! * [`ring`]: ring composition of a three-party protocol, the
//!   output-forcing attacks (strict and expected round bounds) and the
//!   reduction from `n` parties to three.
//! * [`dominance`]: exhaustive weak/strong `k`-dominance deciders over
//!   finite function tables and the computability classification.
//! * [`compiler`]: the threshold ideal oracle, the wrapper protocol that
//!   turns two-threshold security into full security, and its simulator.
//! * [`coinflip`]: bias measurement and the bias-forcing attack.
//! * [`zoo`]: small reference protocols used as test vehicles.

pub mod coinflip;
pub mod compiler;
pub mod dominance;
pub mod error;
pub mod netsim;
pub mod parallel;
pub mod protocol;
pub mod ring;
pub mod stats;
pub mod zoo;

pub use error::{Error, Result};
pub use protocol::{
    derive_coins, CoinStream, Inbox, JointInput, Outbox, Outcome, PartyId, PartyInput,
    PartyProgram, PartyState, Program, ProtocolSpec, Round, RoundBound,
};
