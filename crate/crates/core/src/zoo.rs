//! Reference protocols used as attack targets and test vehicles.
//!
//! Every entry honors the program contract and passes
//! [`validate_spec`](crate::protocol::validate_spec). Bit inputs are read as
//! `input[0] & 1`; a missing or empty message from a peer reads as 0.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::protocol::{
    CoinStream, Inbox, InputDomain, Outbox, Outcome, PartyId, PartyProgram, Program, ProtocolSpec,
    Round, RoundBound,
};

fn bit_of(payload: Option<&Vec<u8>>) -> u8 {
    payload.and_then(|p| p.first()).map_or(0, |b| b & 1)
}

fn broadcast(n: usize, me: PartyId, payload: &[u8]) -> Outbox {
    (0..n)
        .filter(|&j| j != me)
        .map(|j| (j, payload.to_vec()))
        .collect()
}

fn spec_of<P: Program + 'static>(
    name: String,
    n: usize,
    bound: RoundBound,
    domain: InputDomain,
    make: impl Fn(PartyId) -> P,
) -> ProtocolSpec {
    ProtocolSpec {
        name,
        programs: (0..n)
            .map(|i| Arc::new(make(i)) as Arc<dyn PartyProgram>)
            .collect(),
        bound,
        domains: vec![domain; n],
    }
}

/// Outputs `[c]` after one silent round.
#[derive(Debug, Clone)]
pub struct Const {
    pub c: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstState {
    done: bool,
}

impl Program for Const {
    type State = ConstState;

    fn role(&self) -> String {
        format!("const({})", self.c)
    }

    fn init(&self, _: &[u8], _: CoinStream) -> (ConstState, Outbox) {
        (ConstState { done: false }, Outbox::new())
    }

    fn step(&self, _: &ConstState, _: Round, _: &Inbox) -> (ConstState, Outbox) {
        (ConstState { done: true }, Outbox::new())
    }

    fn finished(&self, state: &ConstState) -> Option<Outcome> {
        state.done.then(|| Outcome::byte(self.c))
    }
}

pub fn constant(c: u8, n: usize) -> ProtocolSpec {
    spec_of(
        format!("const:{c}"),
        n,
        RoundBound::Strict(1),
        InputDomain::BIT,
        |_| Const { c },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Xor,
    Or,
}

impl Combine {
    fn apply(self, a: u8, b: u8) -> u8 {
        match self {
            Combine::Xor => a ^ b,
            Combine::Or => a | b,
        }
    }
}

/// One round: send the own bit to everyone, output the combination of all
/// bits. With `fresh_coin` the own bit is the first coin bit instead of the
/// input.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub me: PartyId,
    pub n: usize,
    pub combine: Combine,
    pub fresh_coin: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeState {
    bit: u8,
    out: Option<u8>,
}

impl Program for Exchange {
    type State = ExchangeState;

    fn role(&self) -> String {
        format!("P{}", self.me)
    }

    fn init(&self, input: &[u8], mut coins: CoinStream) -> (ExchangeState, Outbox) {
        let bit = if self.fresh_coin {
            coins.next_bit()
        } else {
            input.first().map_or(0, |b| b & 1)
        };
        (
            ExchangeState { bit, out: None },
            broadcast(self.n, self.me, &[bit]),
        )
    }

    fn step(&self, state: &ExchangeState, _: Round, inbox: &Inbox) -> (ExchangeState, Outbox) {
        if state.out.is_some() {
            return (state.clone(), Outbox::new());
        }
        let out = (0..self.n)
            .filter(|&j| j != self.me)
            .fold(state.bit, |acc, j| {
                self.combine.apply(acc, bit_of(inbox.get(&j)))
            });
        (
            ExchangeState {
                bit: state.bit,
                out: Some(out),
            },
            Outbox::new(),
        )
    }

    fn finished(&self, state: &ExchangeState) -> Option<Outcome> {
        state.out.map(Outcome::byte)
    }
}

pub fn xor_exchange(n: usize) -> ProtocolSpec {
    exchange("xor_exchange", n, Combine::Xor, false)
}

pub fn or_exchange(n: usize) -> ProtocolSpec {
    exchange("or_exchange", n, Combine::Or, false)
}

/// XOR of one fresh coin bit per party. Inputs are ignored.
pub fn fair_coin(n: usize) -> ProtocolSpec {
    exchange("fair_coin", n, Combine::Xor, true)
}

fn exchange(name: &str, n: usize, combine: Combine, fresh_coin: bool) -> ProtocolSpec {
    let domain = if fresh_coin {
        InputDomain { len: 0, symbols: 1 }
    } else {
        InputDomain::BIT
    };
    spec_of(name.into(), n, RoundBound::Strict(1), domain, |me| {
        Exchange {
            me,
            n,
            combine,
            fresh_coin,
        }
    })
}

/// Marks an unknown entry in an echo vector.
pub const UNKNOWN: u8 = 0xFF;

/// Bit exchange followed by `echoes` rounds in which every party relays the
/// vector of bits it received directly. A party keeps the directly received
/// bit of a peer unless every echo about that peer contradicts it.
#[derive(Debug, Clone)]
pub struct EchoXor {
    pub me: PartyId,
    pub n: usize,
    pub echoes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoState {
    bit: u8,
    /// Direct bits; `UNKNOWN` until round 1 is processed.
    direct: Vec<u8>,
    /// `heard[j]` lists every echoed value about `j`.
    heard: Vec<Vec<u8>>,
    out: Option<u8>,
}

impl EchoXor {
    fn echo_vector(&self, state: &EchoState) -> Vec<u8> {
        state.direct.clone()
    }

    fn resolve(&self, state: &EchoState) -> u8 {
        let mut acc = state.bit;
        for j in (0..self.n).filter(|&j| j != self.me) {
            let direct = state.direct[j];
            let echoes = &state.heard[j];
            let value = if !echoes.is_empty() && echoes.iter().all(|&e| e != direct) {
                let ones = echoes.iter().filter(|&&e| e == 1).count();
                u8::from(2 * ones > echoes.len())
            } else if direct == UNKNOWN {
                0
            } else {
                direct
            };
            acc ^= value;
        }
        acc
    }
}

impl Program for EchoXor {
    type State = EchoState;

    fn role(&self) -> String {
        format!("P{}", self.me)
    }

    fn init(&self, input: &[u8], _: CoinStream) -> (EchoState, Outbox) {
        let bit = input.first().map_or(0, |b| b & 1);
        let mut direct = vec![UNKNOWN; self.n];
        direct[self.me] = bit;
        let state = EchoState {
            bit,
            direct,
            heard: vec![Vec::new(); self.n],
            out: None,
        };
        (state, broadcast(self.n, self.me, &[bit]))
    }

    fn step(&self, state: &EchoState, round: Round, inbox: &Inbox) -> (EchoState, Outbox) {
        if state.out.is_some() {
            return (state.clone(), Outbox::new());
        }
        let mut next = state.clone();
        if round == 1 {
            for j in (0..self.n).filter(|&j| j != self.me) {
                next.direct[j] = bit_of(inbox.get(&j));
            }
        } else {
            for (&from, payload) in inbox {
                if from >= self.n || from == self.me {
                    continue;
                }
                for (about, &v) in payload.iter().enumerate().take(self.n) {
                    if about != self.me && about != from && v <= 1 {
                        next.heard[about].push(v);
                    }
                }
            }
        }
        if round > self.echoes {
            next.out = Some(self.resolve(&next));
            return (next, Outbox::new());
        }
        let echo = self.echo_vector(&next);
        (next, broadcast(self.n, self.me, &echo))
    }

    fn finished(&self, state: &EchoState) -> Option<Outcome> {
        state.out.map(Outcome::byte)
    }
}

pub fn echo_xor(echoes: u32, n: usize) -> ProtocolSpec {
    spec_of(
        format!("echo_xor:{echoes}"),
        n,
        RoundBound::Strict(1 + echoes),
        InputDomain::BIT,
        |me| EchoXor { me, n, echoes },
    )
}

/// Pings every peer each round and halts with probability `p` after each
/// round, outputting `[1]`.
#[derive(Debug, Clone)]
pub struct GeomHalt {
    pub me: PartyId,
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeomState {
    coins: CoinStream,
    done: bool,
}

impl Program for GeomHalt {
    type State = GeomState;

    fn role(&self) -> String {
        format!("P{}", self.me)
    }

    fn init(&self, _: &[u8], coins: CoinStream) -> (GeomState, Outbox) {
        (
            GeomState { coins, done: false },
            broadcast(self.n, self.me, &[1]),
        )
    }

    fn step(&self, state: &GeomState, _: Round, _: &Inbox) -> (GeomState, Outbox) {
        if state.done {
            return (state.clone(), Outbox::new());
        }
        let mut next = state.clone();
        if next.coins.bernoulli(self.p) {
            next.done = true;
            return (next, Outbox::new());
        }
        (next, broadcast(self.n, self.me, &[1]))
    }

    fn finished(&self, state: &GeomState) -> Option<Outcome> {
        state.done.then(|| Outcome::byte(1))
    }
}

/// Halting probability `p` per round; declared expected rounds `⌈1/p⌉`.
pub fn geom_halt(p: f64, n: usize) -> Result<ProtocolSpec> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "halting probability must lie in (0, 1], got {p}"
        )));
    }
    let q = (1.0 / p).ceil() as u32;
    Ok(geom_spec(format!("geom_halt:{p}"), p, q, n))
}

/// Halting probability tuned so a party halts within `window` rounds with
/// probability exactly 1/2: `p = 1 − 2^{−1/window}`. The declared bound is
/// `Expected(window / 2)`, so the expected-variant attack ring runs exactly
/// `window` rounds. The declaration understates the true mean on purpose.
pub fn geom_halt_window(window: u32, n: usize) -> Result<ProtocolSpec> {
    if window < 2 || !window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "window must be even and at least 2, got {window}"
        )));
    }
    let p = 1.0 - 2f64.powf(-1.0 / window as f64);
    Ok(geom_spec(
        format!("geom_halt_window:{window}"),
        p,
        window / 2,
        n,
    ))
}

fn geom_spec(name: String, p: f64, q: u32, n: usize) -> ProtocolSpec {
    spec_of(
        name,
        n,
        RoundBound::Expected(q.max(1)),
        InputDomain { len: 0, symbols: 1 },
        |me| GeomHalt { me, n, p },
    )
}

/// Builds a zoo protocol from a selector such as `const:7`, `xor_exchange`,
/// `or_exchange`, `echo_xor:2`, `fair_coin`, `geom_halt:0.5` or
/// `geom_halt_window:6`.
pub fn by_name(selector: &str, n: usize) -> Result<ProtocolSpec> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "protocols need at least 2 parties, got {n}"
        )));
    }
    let (name, arg) = match selector.split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (selector, None),
    };
    let bad = |what: &str| Error::InvalidArgument(format!("{selector}: {what}"));
    match (name, arg) {
        ("const", Some(c)) => Ok(constant(c.parse().map_err(|_| bad("expected a byte"))?, n)),
        ("xor_exchange" | "xor", None) => Ok(xor_exchange(n)),
        ("or_exchange" | "or", None) => Ok(or_exchange(n)),
        ("fair_coin", None) => Ok(fair_coin(n)),
        ("echo_xor", Some(e)) => Ok(echo_xor(e.parse().map_err(|_| bad("expected a count"))?, n)),
        ("geom_halt", Some(p)) => {
            geom_halt(p.parse().map_err(|_| bad("expected a probability"))?, n)
        }
        ("geom_halt_window", Some(w)) => {
            geom_halt_window(w.parse().map_err(|_| bad("expected a round count"))?, n)
        }
        _ => Err(bad("unknown protocol")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{run_honest, PartyStatus};
    use crate::protocol::validate_spec;

    fn outcomes(spec: &ProtocolSpec, bits: &[u8], seed: u64) -> Vec<PartyStatus> {
        let inputs = spec.inputs_from(bits.iter().map(|&b| vec![b]).collect());
        run_honest(spec, &inputs, seed, spec.default_max_rounds())
            .unwrap()
            .statuses
    }

    #[test]
    fn xor_of_101_is_0() {
        for s in outcomes(&xor_exchange(3), &[1, 0, 1], 1) {
            assert_eq!(
                s,
                PartyStatus::Halted {
                    outcome: Outcome::byte(0),
                    round: 1
                }
            );
        }
    }

    #[test]
    fn echo_xor_agrees_with_plain_xor_when_honest() {
        let spec = echo_xor(2, 3);
        for x in 0..8u8 {
            let bits = [x & 1, (x >> 1) & 1, (x >> 2) & 1];
            let expect = bits[0] ^ bits[1] ^ bits[2];
            for s in outcomes(&spec, &bits, 3) {
                assert_eq!(
                    s,
                    PartyStatus::Halted {
                        outcome: Outcome::byte(expect),
                        round: 3
                    }
                );
            }
        }
    }

    #[test]
    fn echo_xor_two_needs_three_rounds() {
        let spec = echo_xor(2, 3);
        let r = run_honest(&spec, &spec.inputs_from(vec![vec![0]; 3]), 1, 1).unwrap();
        assert!(r.statuses.iter().all(|s| *s == PartyStatus::Running));
    }

    #[test]
    fn or_exchange_matches_or() {
        for s in outcomes(&or_exchange(4), &[0, 0, 1, 0], 9) {
            assert_eq!(s.outcome(), Some(&Outcome::byte(1)));
        }
        for s in outcomes(&or_exchange(4), &[0, 0, 0, 0], 9) {
            assert_eq!(s.outcome(), Some(&Outcome::byte(0)));
        }
    }

    #[test]
    fn every_entry_validates() {
        let specs = [
            constant(0, 3),
            constant(7, 5),
            xor_exchange(3),
            or_exchange(3),
            echo_xor(2, 3),
            echo_xor(1, 4),
            fair_coin(3),
            geom_halt(0.5, 3).unwrap(),
            geom_halt_window(6, 3).unwrap(),
        ];
        for spec in &specs {
            let report = validate_spec(spec, 100, 11);
            assert!(report.is_clean(), "{}: {:?}", spec.name, report.violations);
        }
    }

    #[test]
    fn tuned_window_halts_with_probability_one_half() {
        let spec = geom_halt_window(8, 3).unwrap();
        let p = 1.0 - 2f64.powf(-1.0 / 8.0);
        let survive = (1.0 - p).powi(8);
        assert!((survive - 0.5).abs() < 1e-12);
        assert_eq!(spec.bound, RoundBound::Expected(4));
    }

    #[test]
    fn selectors_parse() {
        assert_eq!(by_name("const:7", 3).unwrap().name, "const:7");
        assert_eq!(
            by_name("echo_xor:2", 3).unwrap().bound,
            RoundBound::Strict(3)
        );
        assert!(by_name("nope", 3).is_err());
        assert!(by_name("geom_halt:0", 3).is_err());
    }
}
