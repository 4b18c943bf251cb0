//! The honest three-party protocol.
//!
//! Register layout: carrier qubits `a`, `b`, `c` held by Alice, Bob and
//! Charlie, and message qubits `m1` (to Bob) and `m2` (to Charlie). Odd rounds
//! use the GHZ carrier and send `|qq>`; even rounds use the even-parity carrier
//! and send `(|q0> + |q̄1>)/√2`, which only the two receivers together can read
//! (XOR of their outcomes). After every round each party applies its toggle
//! gate, which swaps GHZ and E. In the θ variant the toggle after an odd round
//! is `H(θa)⊗H(θb)⊗H(θc)` and after an even round its inverse.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::gates::{self, make_carrier, CarrierKind, ThetaTriple};
use crate::state::StateVector;
use crate::unitary::UnitaryMatrix;

pub const A: &str = "a";
pub const B: &str = "b";
pub const C: &str = "c";
pub const M1: &str = "m1";
pub const M2: &str = "m2";
/// Bob's second carrier qubit after a split (the former `m1`).
pub const BT: &str = "bt";

pub const CARRIER_LABELS: [&str; 3] = [A, B, C];
pub const MESSAGE_LABELS: [&str; 2] = [M1, M2];

const RESET_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Theta(ThetaTriple),
}

impl Variant {
    /// Angles used by the toggle gates; all zero for the plain variant.
    pub fn angles(&self) -> ThetaTriple {
        match self {
            Variant::Plain => ThetaTriple::zero(),
            Variant::Theta(t) => *t,
        }
    }
}

/// Order in which the parties publish their bits for an announced round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnounceOrder {
    /// Alice verifies: both receivers commit their claims before she reveals hers.
    AliceFirst,
    /// Alice and Charlie publish first; Bob answers having seen both.
    BobLast,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub num_rounds: u32,
    pub rng_seed: u64,
    pub announce_fraction: f64,
    pub announce_order: AnnounceOrder,
}

impl ProtocolConfig {
    pub fn plain(num_rounds: u32, rng_seed: u64) -> Self {
        Self {
            variant: Variant::Plain,
            num_rounds,
            rng_seed,
            announce_fraction: 0.2,
            announce_order: AnnounceOrder::BobLast,
        }
    }

    pub fn theta(angles: ThetaTriple, num_rounds: u32, rng_seed: u64) -> Self {
        Self { variant: Variant::Theta(angles), ..Self::plain(num_rounds, rng_seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if let Variant::Theta(t) = &self.variant {
            ThetaTriple::new(t.theta_a, t.theta_b, t.theta_c)?;
            t.validate_hardened()?;
        }
        if !(self.announce_fraction > 0.0 && self.announce_fraction <= 1.0) {
            return Err(Error::BadFraction(self.announce_fraction));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(round: u32) -> Self {
        if round % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

/// Toggle direction: forward triple after odd rounds, inverse after even ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn after(round: u32) -> Self {
        match Parity::of(round) {
            Parity::Odd => Direction::Forward,
            Parity::Even => Direction::Inverse,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

impl Party {
    pub fn label(self) -> &'static str {
        match self {
            Party::Alice => A,
            Party::Bob => B,
            Party::Charlie => C,
        }
    }

    pub fn angle(self, t: &ThetaTriple) -> f64 {
        match self {
            Party::Alice => t.theta_a,
            Party::Bob => t.theta_b,
            Party::Charlie => t.theta_c,
        }
    }
}

/// H(θ) or its inverse, per direction.
pub fn toggle_gate(theta: f64, dir: Direction) -> Result<UnitaryMatrix> {
    match dir {
        Direction::Forward => gates::h_theta(theta),
        Direction::Inverse => gates::h_theta_inverse(theta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Ready,
    InFlight { q: u8 },
    Delivered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    pub secret_bit: u8,
    pub bob_bit: u8,
    pub charlie_bit: u8,
    pub carrier_fidelity_after: f64,
}

impl RoundRecord {
    pub fn parity(&self) -> Parity {
        Parity::of(self.round_index)
    }

    /// Bit the receivers jointly decode: Bob's alone on odd rounds, XOR on even.
    pub fn decoded(&self) -> u8 {
        match self.parity() {
            Parity::Odd => self.bob_bit,
            Parity::Even => self.bob_bit ^ self.charlie_bit,
        }
    }
}

#[derive(Serialize)]
struct RecordLine {
    round: u32,
    parity: Parity,
    q: u8,
    bob: u8,
    charlie: u8,
    carrier_fidelity: f64,
}

impl From<&RoundRecord> for RecordLine {
    fn from(r: &RoundRecord) -> Self {
        Self {
            round: r.round_index,
            parity: r.parity(),
            q: r.secret_bit,
            bob: r.bob_bit,
            charlie: r.charlie_bit,
            carrier_fidelity: r.carrier_fidelity_after,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub records: Vec<RoundRecord>,
    pub final_carrier_fidelity: f64,
}

impl Transcript {
    pub fn record(&self, round: u32) -> Option<&RoundRecord> {
        self.records.iter().find(|r| r.round_index == round)
    }

    /// One JSON object per round, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(&RecordLine::from(r)).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolSession {
    state: StateVector,
    carrier_kind: CarrierKind,
    round_index: u32,
    phase: Phase,
    variant: Variant,
    records: Vec<RoundRecord>,
}

pub fn init_session(config: &ProtocolConfig) -> Result<ProtocolSession> {
    config.validate()?;
    ProtocolSession::new(config.variant)
}

impl ProtocolSession {
    /// GHZ on (a, b, c) ⊗ |00> on (m1, m2), round 1.
    pub fn new(variant: Variant) -> Result<Self> {
        if let Variant::Theta(t) = &variant {
            t.validate_hardened()?;
        }
        let carrier = make_carrier(CarrierKind::Ghz, CARRIER_LABELS)?;
        let msgs = StateVector::new_register(&MESSAGE_LABELS)?;
        Ok(Self {
            state: carrier.tensor(&msgs)?,
            carrier_kind: CarrierKind::Ghz,
            round_index: 1,
            phase: Phase::Ready,
            variant,
            records: Vec::new(),
        })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub(crate) fn state_mut(&mut self) -> &mut StateVector {
        &mut self.state
    }

    pub fn carrier_kind(&self) -> CarrierKind {
        self.carrier_kind
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.round_index)
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn is_in_flight(&self) -> bool {
        matches!(self.phase, Phase::InFlight { .. })
    }

    pub fn is_delivered(&self) -> bool {
        self.phase == Phase::Delivered
    }

    /// Secret bit of the round currently in flight.
    pub fn in_flight_secret(&self) -> Option<u8> {
        match self.phase {
            Phase::InFlight { q } => Some(q),
            _ => None,
        }
    }

    fn phase_name(&self) -> String {
        format!("{:?}", self.phase)
    }

    pub(crate) fn require_in_flight(&self, op: &'static str) -> Result<u8> {
        self.in_flight_secret()
            .ok_or_else(|| Error::WrongPhase { op, phase: self.phase_name() })
    }

    /// Fidelity of the reduced (a, b, c) state with the named carrier it should hold.
    pub fn carrier_fidelity(&self) -> Result<f64> {
        let rho = self.state.reduced_density(&CARRIER_LABELS)?;
        rho.fidelity_with_pure(&make_carrier(self.carrier_kind, CARRIER_LABELS)?)
    }

    /// Purity of the (m1, m2) marginal; 1 when the messages are unentangled.
    pub fn message_purity(&self) -> Result<f64> {
        Ok(self.state.reduced_density(&MESSAGE_LABELS)?.purity())
    }

    pub fn in_flight_marginal(&self) -> Result<DensityMatrix> {
        self.state.reduced_density(&MESSAGE_LABELS)
    }

    fn messages_reset(&self) -> Result<bool> {
        Ok(self.state.probability_one(M1)? < RESET_TOL && self.state.probability_one(M2)? < RESET_TOL)
    }

    /// Alice prepares the round's message and entangles it with her carrier qubit.
    pub fn encode_round(&mut self, q: u8) -> Result<()> {
        if q > 1 {
            return Err(Error::BadBit(q));
        }
        if self.phase != Phase::Ready {
            return Err(Error::WrongPhase { op: "encode_round", phase: self.phase_name() });
        }
        if !self.messages_reset()? {
            return Err(Error::MessageNotReset);
        }
        let parity = self.parity();
        encode_message(&mut self.state, parity, q, A)?;
        self.phase = Phase::InFlight { q };
        Ok(())
    }

    /// Bob and Charlie disentangle with their carrier qubits and measure.
    pub fn deliver_and_decode<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(u8, u8)> {
        let q = self.require_in_flight("deliver_and_decode")?;
        let cx = gates::cnot();
        self.state.apply(&cx, &[B, M1])?;
        self.state.apply(&cx, &[C, M2])?;
        let bob = self.state.measure_in_place(M1, rng)?;
        let charlie = self.state.measure_in_place(M2, rng)?;
        self.state.reset_known(M1, bob)?;
        self.state.reset_known(M2, charlie)?;
        self.finish_delivery(q, bob, charlie)?;
        Ok((bob, charlie))
    }

    pub(crate) fn finish_delivery(&mut self, q: u8, bob: u8, charlie: u8) -> Result<()> {
        let fid = self.carrier_fidelity()?;
        self.records.push(RoundRecord {
            round_index: self.round_index,
            secret_bit: q,
            bob_bit: bob,
            charlie_bit: charlie,
            carrier_fidelity_after: fid,
        });
        self.phase = Phase::Delivered;
        Ok(())
    }

    pub fn toggle_direction(&self) -> Direction {
        Direction::after(self.round_index)
    }

    /// Toggle gate `party` applies at the end of the current round.
    pub fn party_toggle_gate(&self, party: Party) -> Result<UnitaryMatrix> {
        toggle_gate(party.angle(&self.variant.angles()), self.toggle_direction())
    }

    pub(crate) fn require_delivered(&self, op: &'static str) -> Result<()> {
        if self.phase != Phase::Delivered {
            return Err(Error::WrongPhase { op, phase: self.phase_name() });
        }
        Ok(())
    }

    pub(crate) fn apply_party_toggle(&mut self, party: Party) -> Result<()> {
        let g = self.party_toggle_gate(party)?;
        self.state.apply(&g, &[party.label()])
    }

    pub(crate) fn advance_round(&mut self) {
        self.carrier_kind = self.carrier_kind.toggled();
        self.round_index += 1;
        self.phase = Phase::Ready;
    }

    /// All three parties apply their toggle gates; the carrier kind flips.
    pub fn toggle_carrier(&mut self) -> Result<()> {
        self.require_delivered("toggle_carrier")?;
        for p in [Party::Alice, Party::Bob, Party::Charlie] {
            self.apply_party_toggle(p)?;
        }
        self.advance_round();
        Ok(())
    }

    pub fn transcript(&self) -> Result<Transcript> {
        Ok(Transcript { records: self.records.clone(), final_carrier_fidelity: self.carrier_fidelity()? })
    }
}

/// Prepares the round message on (m1, m2) and entangles it through `carrier_qubit`:
/// odd rounds `|qq>` with CNOTs onto both message qubits, even rounds
/// `(|q0> + |q̄1>)/√2` with a CNOT onto `m1` only.
pub fn encode_message(state: &mut StateVector, parity: Parity, q: u8, carrier_qubit: &str) -> Result<()> {
    let x = gates::pauli_x();
    let cx = gates::cnot();
    match parity {
        Parity::Odd => {
            if q == 1 {
                state.apply(&x, &[M1])?;
                state.apply(&x, &[M2])?;
            }
            state.apply(&cx, &[carrier_qubit, M1])?;
            state.apply(&cx, &[carrier_qubit, M2])?;
        }
        Parity::Even => {
            state.apply(&gates::hadamard(), &[M2])?;
            state.apply(&cx, &[M2, M1])?;
            if q == 1 {
                state.apply(&x, &[M1])?;
            }
            state.apply(&cx, &[carrier_qubit, M1])?;
        }
    }
    Ok(())
}

pub fn run_protocol(config: &ProtocolConfig, secret_bits: &[u8]) -> Result<Transcript> {
    config.validate()?;
    if secret_bits.len() != config.num_rounds as usize {
        return Err(Error::SecretLength { expected: config.num_rounds as usize, found: secret_bits.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut session = init_session(config)?;
    for &q in secret_bits {
        session.encode_round(q)?;
        session.deliver_and_decode(&mut rng)?;
        session.toggle_carrier()?;
    }
    session.transcript()
}
