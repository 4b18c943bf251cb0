//! Bob's entanglement-splitting attack.
//!
//! In round 2 Bob intercepts Charlie's message qubit and applies an 8×8
//! unitary on `(b, m1, m2)` that turns the even-parity carrier into two Bell
//! pairs, `(a, b̃)` and `(b, c)`, where `b̃` is the former `m1`. The pair
//! pattern is Φ+⊗Φ+ when the round-2 bit was 0 and Ψ+⊗Ψ+ when it was 1.
//! Bob cannot see which. Afterwards he reads Alice's messages through `(a, b̃)`
//! and forwards counterfeits to Charlie through `(b, c)`, while keeping the
//! pairs alive across the per-round toggles with his own maintenance gates.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detection::Claimant;
use crate::error::{Error, Result};
use crate::gates::{self, make_bell, make_carrier, BellKind, CarrierKind};
use crate::protocol::{
    encode_message, Direction, Parity, Party, ProtocolSession, RoundRecord, A, B, BT, C, M1, M2,
};
use crate::state::{StateVector, C64};
use crate::unitary::{polar_unitary, UnitaryMatrix};

/// Residual above which the synthesized split is rejected.
pub const SPLIT_FEASIBILITY_TOL: f64 = 1e-6;

const RANK_EPS: f64 = 1e-9;

/// Label order in which split inputs and outputs are laid out: (a, c) outer,
/// Bob's three qubits inner.
const SPLIT_LAYOUT: [&str; 5] = [A, C, B, M1, M2];
/// Qubits the split unitary acts on, most significant first.
pub const SPLIT_TARGETS: [&str; 3] = [B, M1, M2];

#[derive(Clone, Debug, PartialEq)]
pub struct SplitUnitary {
    pub matrix: UnitaryMatrix,
    /// ‖(U ⊗ I)|in_q> − |out_q>‖ for q = 0, 1.
    pub residuals: [f64; 2],
    pub unitarity_defect: f64,
    pub blank: [C64; 2],
}

#[derive(Serialize)]
struct SplitJson {
    matrix: Vec<Vec<[f64; 2]>>,
    residuals: [f64; 2],
    unitarity_defect: f64,
}

impl SplitUnitary {
    pub fn to_json(&self) -> String {
        let m = self.matrix.matrix();
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        serde_json::to_string(&SplitJson {
            matrix: rows,
            residuals: self.residuals,
            unitarity_defect: self.unitarity_defect,
        })
        .expect("split serializes")
    }
}

/// Round-2 global state just before Bob's interception: the even-parity
/// carrier with Alice's encoding of `q` on (m1, m2).
pub fn split_input_state(q: u8) -> Result<StateVector> {
    let mut st = make_carrier(CarrierKind::EvenParity, [A, B, C])?
        .tensor(&StateVector::new_register(&[M1, M2])?)?;
    encode_message(&mut st, Parity::Even, q, A)?;
    Ok(st)
}

/// Bell pattern the split produces for round-2 bit `q`.
pub fn split_pattern(q: u8) -> BellKind {
    if q == 0 {
        BellKind::PhiPlus
    } else {
        BellKind::PsiPlus
    }
}

/// Desired post-split state: pattern(a, m1) ⊗ pattern(b, c) ⊗ |s>(m2),
/// over labels (a, b, c, m1, m2).
pub fn split_target_state(q: u8, blank: [C64; 2]) -> Result<StateVector> {
    let kind = split_pattern(q);
    let s = StateVector::from_amplitudes(&[M2], blank.to_vec())?;
    make_bell(kind, [A, M1])?
        .tensor(&make_bell(kind, [B, C])?)?
        .tensor(&s)?
        .reordered(&[A, B, C, M1, M2])
}

/// Splits a 32-amplitude state laid out as SPLIT_LAYOUT into its four
/// (a, c) blocks of Bob-side amplitudes.
fn bob_blocks(st: &StateVector) -> Result<Vec<Vec<C64>>> {
    let laid = st.reordered(&SPLIT_LAYOUT)?;
    Ok(laid.amplitudes().chunks(8).map(|c| c.to_vec()).collect())
}

fn complement_basis(m: &DMatrix<C64>) -> (usize, DMatrix<C64>) {
    let n = m.nrows();
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd computed with u");
    let keep: Vec<usize> = (0..n)
        .filter(|&i| i >= svd.singular_values.len() || svd.singular_values[i] < RANK_EPS)
        .collect();
    let rank = n - keep.len();
    let basis = DMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])]);
    (rank, basis)
}

/// Solves `(U ⊗ I_ac)|in_q> = |out_q>` for both q, completes the
/// unconstrained subspace, and projects onto the unitary group.
pub fn synthesize_split_unitary(blank: [C64; 2]) -> Result<SplitUnitary> {
    let n2 = blank[0].norm_sqr() + blank[1].norm_sqr();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n2));
    }
    let mut inputs = Vec::with_capacity(2);
    let mut cols_in: Vec<Vec<C64>> = Vec::new();
    let mut cols_out: Vec<Vec<C64>> = Vec::new();
    for q in 0..2u8 {
        let input = split_input_state(q)?;
        let target = split_target_state(q, blank)?;
        cols_in.extend(bob_blocks(&input)?);
        cols_out.extend(bob_blocks(&target)?);
        inputs.push((input, target));
    }
    // 8 columns: one per (q, a, c); U · V_in = W_out
    let v_in = DMatrix::from_fn(8, cols_in.len(), |r, c| cols_in[c][r]);
    let w_out = DMatrix::from_fn(8, cols_out.len(), |r, c| cols_out[c][r]);
    let pinv = v_in
        .clone()
        .pseudo_inverse(RANK_EPS)
        .map_err(|_| Error::InfeasibleSplit { constraint: 0, residual: f64::INFINITY })?;
    let partial = &w_out * pinv;

    let (rank_in, free_in) = complement_basis(&v_in);
    let (rank_out, free_out) = complement_basis(&w_out);
    if rank_in != rank_out {
        return Err(Error::InfeasibleSplit { constraint: 0, residual: (rank_in as f64 - rank_out as f64).abs() });
    }
    let completed = partial + &free_out * free_in.adjoint();
    let projected = polar_unitary(&completed);
    let defect = crate::unitary::unitarity_defect(&projected);
    let matrix = UnitaryMatrix::new(projected)?;

    let mut residuals = [0.0; 2];
    for (q, (input, target)) in inputs.iter().enumerate() {
        let out = input.apply_unitary(&matrix, &SPLIT_TARGETS)?;
        let r: f64 = out
            .amplitudes()
            .iter()
            .zip(target.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if r > SPLIT_FEASIBILITY_TOL {
            return Err(Error::InfeasibleSplit { constraint: q as u8, residual: r });
        }
        residuals[q] = r;
    }
    Ok(SplitUnitary { matrix, residuals, unitarity_defect: defect, blank })
}

/// Default counterfeit blank |s> = |0>.
pub fn zero_blank() -> [C64; 2] {
    [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternHypothesis {
    PhiPattern,
    PsiPattern,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaintenancePolicy {
    #[serde(rename = "u")]
    KnownThetaU,
    #[serde(rename = "v")]
    KnownThetaV,
    #[serde(rename = "random")]
    RandomGuess,
    #[serde(rename = "plain")]
    PlainHadamard,
}

/// Gate pair Bob applies on (b̃, b) at a toggle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Maintenance {
    /// `H(−θa) ⊗ H(−θc)`
    U,
    /// `H(θa)^T ⊗ H(θc)^T`
    V,
    /// `H ⊗ H`
    Plain,
}

/// Bob's operators on (b̃, b) for the given choice and toggle direction.
/// Inverse-direction rounds use the inverses of the forward operators.
pub fn maintenance_ops(choice: Maintenance, theta_a: f64, theta_c: f64, dir: Direction) -> Result<(UnitaryMatrix, UnitaryMatrix)> {
    let (bt, b) = match choice {
        Maintenance::U => (gates::h_theta(-theta_a)?, gates::h_theta(-theta_c)?),
        Maintenance::V => (gates::h_theta(theta_a)?.transpose(), gates::h_theta(theta_c)?.transpose()),
        Maintenance::Plain => (gates::hadamard(), gates::hadamard()),
    };
    Ok(match dir {
        Direction::Forward => (bt, b),
        Direction::Inverse => (bt.dagger(), b.dagger()),
    })
}

/// Bob's model of the (a, b̃) pair under each hypothesis, evolved by the
/// public toggle gates and his own maintenance.
#[derive(Clone, Debug, PartialEq)]
struct PatternTracker {
    phi: StateVector,
    psi: StateVector,
}

impl PatternTracker {
    fn new() -> Result<Self> {
        Ok(Self { phi: make_bell(BellKind::PhiPlus, [A, BT])?, psi: make_bell(BellKind::PsiPlus, [A, BT])? })
    }

    fn apply(&mut self, alice: &UnitaryMatrix, bob: &UnitaryMatrix) -> Result<()> {
        for s in [&mut self.phi, &mut self.psi] {
            s.apply(alice, &[A])?;
            s.apply(bob, &[BT])?;
        }
        Ok(())
    }

    fn flip_of(st: &StateVector) -> u8 {
        let odd = st.amplitude(1).norm_sqr() + st.amplitude(2).norm_sqr();
        u8::from(odd > 0.5)
    }

    fn flips(&self) -> (u8, u8) {
        (Self::flip_of(&self.phi), Self::flip_of(&self.psi))
    }
}

/// What Bob saw in one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub round: u32,
    /// Physical readout: odd rounds his `m1` outcome, even rounds `x1 ⊕ x2`.
    pub raw: u8,
    /// Correction to `raw` under the Φ and Ψ hypotheses.
    pub flip_phi: u8,
    pub flip_psi: u8,
    /// Bob's `m1` outcome (his share of an even-round message).
    pub x1: u8,
    /// Value sent to Charlie through the (b, c) pair.
    pub forwarded: u8,
}

impl AttackRecord {
    fn informative(&self) -> bool {
        self.flip_phi != self.flip_psi
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackState {
    pattern_hypothesis: PatternHypothesis,
    kept_label_btilde: &'static str,
    records: Vec<AttackRecord>,
    maintenance_policy: MaintenancePolicy,
    tracker: PatternTracker,
    pair_choice: Option<Maintenance>,
}

impl AttackState {
    /// A fresh attack whose fraud pairs are Φ+ (hypothesis Φ) or Ψ+ (hypothesis Ψ)
    /// as of the current round.
    pub fn new(policy: MaintenancePolicy) -> Result<Self> {
        Ok(Self {
            pattern_hypothesis: PatternHypothesis::Unknown,
            kept_label_btilde: BT,
            records: Vec::new(),
            maintenance_policy: policy,
            tracker: PatternTracker::new()?,
            pair_choice: None,
        })
    }

    pub fn pattern_hypothesis(&self) -> PatternHypothesis {
        self.pattern_hypothesis
    }

    pub fn kept_label(&self) -> &str {
        self.kept_label_btilde
    }

    pub fn policy(&self) -> MaintenancePolicy {
        self.maintenance_policy
    }

    pub fn records(&self) -> &[AttackRecord] {
        &self.records
    }

    pub fn record(&self, round: u32) -> Option<&AttackRecord> {
        self.records.iter().find(|r| r.round == round)
    }

    fn flip(&self, r: &AttackRecord) -> u8 {
        match self.pattern_hypothesis {
            PatternHypothesis::PsiPattern => r.flip_psi,
            _ => r.flip_phi,
        }
    }

    /// Bob's best reading of Alice's bit for a round, under his current hypothesis
    /// (Φ while unresolved).
    pub fn learned_bit(&self, round: u32) -> Option<u8> {
        self.record(round).map(|r| r.raw ^ self.flip(r))
    }

    pub fn learned_bits(&self) -> Vec<(u32, u8)> {
        self.records.iter().map(|r| (r.round, r.raw ^ self.flip(r))).collect()
    }

    /// Expected (a, b̃) correlation flips (Φ hypothesis, Ψ hypothesis) for the current round.
    pub fn expected_flips(&self) -> (u8, u8) {
        self.tracker.flips()
    }

    /// Imports a round Bob decoded honestly before the split.
    pub fn record_honest_round(&mut self, round: u32, bob_bit: u8) {
        self.records.push(AttackRecord { round, raw: bob_bit, flip_phi: 0, flip_psi: 0, x1: bob_bit, forwarded: bob_bit });
    }

    /// Gate choice for the upcoming toggle. RandomGuess draws one coin per
    /// (even, odd) round pair, at the inverse-direction toggle that opens it.
    pub fn choose_maintenance<R: Rng + ?Sized>(&mut self, dir: Direction, rng: &mut R) -> Maintenance {
        match self.maintenance_policy {
            MaintenancePolicy::KnownThetaU => Maintenance::U,
            MaintenancePolicy::KnownThetaV => Maintenance::V,
            MaintenancePolicy::PlainHadamard => Maintenance::Plain,
            MaintenancePolicy::RandomGuess => {
                if dir == Direction::Inverse || self.pair_choice.is_none() {
                    let pick = if rng.random_bool(0.5) { Maintenance::U } else { Maintenance::V };
                    self.pair_choice = Some(pick);
                }
                self.pair_choice.expect("set above")
            }
        }
    }

    /// Uses Alice's published bit for `round` to fix the hypothesis, when that
    /// round distinguishes the two. Once resolved the hypothesis never changes.
    pub fn resolve_pattern(&mut self, round: u32, alice_bit: u8) -> Result<PatternHypothesis> {
        let rec = *self.record(round).ok_or(Error::NoRecord(round))?;
        if self.pattern_hypothesis != PatternHypothesis::Unknown || !rec.informative() {
            return Ok(self.pattern_hypothesis);
        }
        let observed = rec.raw ^ alice_bit;
        self.pattern_hypothesis = if observed == rec.flip_phi {
            PatternHypothesis::PhiPattern
        } else {
            PatternHypothesis::PsiPattern
        };
        Ok(self.pattern_hypothesis)
    }

    /// Fraction of transcript rounds where Bob's learned bit equals Alice's.
    pub fn recovery_rate(&self, records: &[RoundRecord]) -> f64 {
        if records.is_empty() {
            return 1.0;
        }
        let hits = records
            .iter()
            .filter(|r| self.learned_bit(r.round_index) == Some(r.secret_bit))
            .count();
        hits as f64 / records.len() as f64
    }
}

impl Claimant for AttackState {
    fn bob_claim(&mut self, record: &RoundRecord, visible: Option<(u8, u8)>) -> Result<u8> {
        match visible {
            Some((alice, charlie)) => {
                self.resolve_pattern(record.round_index, alice)?;
                Ok(match record.parity() {
                    Parity::Odd => alice,
                    Parity::Even => alice ^ charlie,
                })
            }
            None => Ok(record.bob_bit),
        }
    }
}

/// Applies the split to the in-flight round-2 state. `m1` becomes Bob's
/// kept qubit `bt`, and a fresh `m1` is appended for later rounds.
pub fn execute_split(session: &mut ProtocolSession, su: &SplitUnitary, policy: MaintenancePolicy) -> Result<AttackState> {
    if session.round_index() != 2 {
        return Err(Error::WrongSplitRound(session.round_index()));
    }
    session.require_in_flight("execute_split")?;
    if session.state().has_label(BT) {
        return Err(Error::DuplicateLabel(BT.to_string()));
    }
    let st = session.state_mut();
    st.apply(&su.matrix, &SPLIT_TARGETS)?;
    st.relabel(M1, BT)?;
    st.append_qubit(M1)?;

    let mut attack = AttackState::new(policy)?;
    for r in session.records() {
        attack.record_honest_round(r.round_index, r.bob_bit);
    }
    Ok(attack)
}

/// Sends `value` to Charlie through the (b, c) pair and runs his decode.
/// `m2` must hold |0>.
fn forward_counterfeit<R: Rng + ?Sized>(session: &mut ProtocolSession, value: u8, rng: &mut R) -> Result<u8> {
    let cx = gates::cnot();
    let st = session.state_mut();
    if value == 1 {
        st.apply(&gates::pauli_x(), &[M2])?;
    }
    st.apply(&cx, &[B, M2])?;
    st.apply(&cx, &[C, M2])?;
    let charlie = st.measure_in_place(M2, rng)?;
    st.reset_known(M2, charlie)?;
    Ok(charlie)
}

/// Round-2 delivery after the split: Bob clears the blank, forwards 0 to
/// Charlie through the (b, c) pair and keeps 0 as his own unresolved claim.
pub fn forward_after_split<R: Rng + ?Sized>(
    session: &mut ProtocolSession,
    attack: &mut AttackState,
    rng: &mut R,
) -> Result<u8> {
    let q = session.require_in_flight("forward_after_split")?;
    if !session.state().has_label(BT) {
        return Err(Error::UnknownLabel(BT.to_string()));
    }
    let blank = session.state_mut().measure_in_place(M2, rng)?;
    session.state_mut().reset_known(M2, blank)?;
    let charlie = forward_counterfeit(session, 0, rng)?;
    let (flip_phi, flip_psi) = attack.tracker.flips();
    attack.records.push(AttackRecord { round: session.round_index(), raw: 0, flip_phi, flip_psi, x1: 0, forwarded: 0 });
    session.finish_delivery(q, 0, charlie)?;
    Ok(charlie)
}

/// Bob intercepts both message qubits of a post-split round, reads them
/// through `(a, b̃)` and forwards a counterfeit to Charlie through `(b, c)`.
/// Returns (Bob's learned bit, Charlie's decoded bit).
pub fn attack_decode_and_forward<R: Rng + ?Sized>(
    session: &mut ProtocolSession,
    attack: &mut AttackState,
    rng: &mut R,
) -> Result<(u8, u8)> {
    let q = session.require_in_flight("attack_decode_and_forward")?;
    if session.round_index() < 3 {
        return Err(Error::WrongPhase { op: "attack_decode_and_forward", phase: format!("round {}", session.round_index()) });
    }
    if !session.state().has_label(BT) {
        return Err(Error::UnknownLabel(BT.to_string()));
    }
    let parity = session.parity();
    let cx = gates::cnot();
    let st = session.state_mut();
    st.apply(&cx, &[BT, M1])?;
    if parity == Parity::Odd {
        st.apply(&cx, &[BT, M2])?;
    }
    let x1 = st.measure_in_place(M1, rng)?;
    let x2 = st.measure_in_place(M2, rng)?;
    st.reset_known(M1, x1)?;
    st.reset_known(M2, x2)?;

    let (raw, forwarded) = match parity {
        Parity::Odd => (x1, x1),
        Parity::Even => (x1 ^ x2, x2),
    };
    let charlie = forward_counterfeit(session, forwarded, rng)?;
    let (flip_phi, flip_psi) = attack.tracker.flips();
    let rec = AttackRecord { round: session.round_index(), raw, flip_phi, flip_psi, x1, forwarded };
    attack.records.push(rec);
    let learned = raw ^ attack.flip(&rec);
    let bob_bit = match parity {
        Parity::Odd => learned,
        Parity::Even => x1,
    };
    session.finish_delivery(q, bob_bit, charlie)?;
    Ok((learned, charlie))
}

/// End-of-round toggle with Bob cheating: Alice and Charlie apply their
/// honest gates, Bob applies `choice` on (b̃, b) instead of his own toggle.
pub fn maintain_carriers(session: &mut ProtocolSession, attack: &mut AttackState, choice: Maintenance) -> Result<()> {
    session.require_delivered("maintain_carriers")?;
    if !session.state().has_label(BT) {
        return Err(Error::UnknownLabel(BT.to_string()));
    }
    let dir = session.toggle_direction();
    let angles = session.variant().angles();
    let alice = session.party_toggle_gate(Party::Alice)?;
    session.apply_party_toggle(Party::Alice)?;
    session.apply_party_toggle(Party::Charlie)?;
    let (op_bt, op_b) = maintenance_ops(choice, angles.theta_a, angles.theta_c, dir)?;
    let st = session.state_mut();
    st.apply(&op_bt, &[BT])?;
    st.apply(&op_b, &[B])?;
    attack.tracker.apply(&alice, &op_bt)?;
    session.advance_round();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::trace_distance;
    use crate::gates::bell_decompose;
    use crate::gates::ThetaTriple;
    use crate::protocol::{init_session, ProtocolConfig, Variant};
    use crate::state::fidelity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn session_at_round2(variant: Variant, q1: u8, q2: u8, rng: &mut ChaCha8Rng) -> ProtocolSession {
        let mut s = ProtocolSession::new(variant).unwrap();
        s.encode_round(q1).unwrap();
        s.deliver_and_decode(rng).unwrap();
        s.toggle_carrier().unwrap();
        s.encode_round(q2).unwrap();
        s
    }

    #[test]
    fn split_realizes_both_patterns() {
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        assert!(su.residuals.iter().all(|r| *r < 1e-8), "{:?}", su.residuals);
        assert!(su.unitarity_defect < 1e-10);
        for q in 0..2u8 {
            let out = split_input_state(q).unwrap().apply_unitary(&su.matrix, &SPLIT_TARGETS).unwrap();
            let want = split_pattern(q);
            let idx = BellKind::ALL.iter().position(|k| *k == want).unwrap();
            for pair in [[A, M1], [B, C]] {
                let k = bell_decompose(&out, pair).unwrap();
                assert!((k[idx].norm() - 1.0).abs() < 1e-10, "q={q} pair={pair:?} {k:?}");
            }
        }
    }

    #[test]
    fn split_rejects_unnormalized_blank() {
        let bad = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(synthesize_split_unitary(bad), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn split_json_shape() {
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&su.to_json()).unwrap();
        assert_eq!(v["matrix"].as_array().unwrap().len(), 8);
        assert_eq!(v["matrix"][0].as_array().unwrap().len(), 8);
        assert_eq!(v["residuals"].as_array().unwrap().len(), 2);
        assert!(v["unitarity_defect"].as_f64().unwrap() < 1e-10);
    }

    #[test]
    fn execute_split_on_session() {
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut reduced = Vec::new();
        for q2 in 0..2u8 {
            let mut s = session_at_round2(Variant::Plain, 1, q2, &mut rng);
            let attack = execute_split(&mut s, &su, MaintenancePolicy::PlainHadamard).unwrap();
            assert_eq!(attack.pattern_hypothesis(), PatternHypothesis::Unknown);
            assert_eq!(attack.kept_label(), BT);
            let kind = split_pattern(q2);
            let pair_ab = make_bell(kind, [A, BT]).unwrap();
            let pair_bc = make_bell(kind, [B, C]).unwrap();
            let rho = s.state().reduced_density(&[A, BT]).unwrap();
            assert!((rho.fidelity_with_pure(&pair_ab).unwrap() - 1.0).abs() < 1e-10);
            let rho = s.state().reduced_density(&[B, C]).unwrap();
            assert!((rho.fidelity_with_pure(&pair_bc).unwrap() - 1.0).abs() < 1e-10);
            reduced.push((
                s.state().reduced_density(&[M2]).unwrap(),
                s.state().reduced_density(&[BT]).unwrap(),
            ));
        }
        assert!(trace_distance(&reduced[0].0, &reduced[1].0).unwrap() < 1e-12);
        let blank = crate::density::DensityMatrix::pure(&StateVector::new_register(&[M2]).unwrap());
        assert!(trace_distance(&reduced[0].0, &blank).unwrap() < 1e-12);
        let half = crate::density::DensityMatrix::maximally_mixed(1);
        for r in &reduced {
            assert!(trace_distance(&r.1, &half).unwrap() < 1e-12);
        }
    }

    #[test]
    fn execute_split_wrong_round() {
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let mut s = ProtocolSession::new(Variant::Plain).unwrap();
        s.encode_round(0).unwrap();
        assert_eq!(
            execute_split(&mut s, &su, MaintenancePolicy::PlainHadamard).unwrap_err(),
            Error::WrongSplitRound(1)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = session_at_round2(Variant::Plain, 0, 0, &mut rng);
        s.deliver_and_decode(&mut rng).unwrap();
        assert!(matches!(
            execute_split(&mut s, &su, MaintenancePolicy::PlainHadamard),
            Err(Error::WrongPhase { .. })
        ));
    }

    fn pair_pattern_fidelity(st: &StateVector, kind: BellKind) -> f64 {
        let ab = st.reduced_density(&[A, BT]).unwrap().fidelity_with_pure(&make_bell(kind, [A, BT]).unwrap()).unwrap();
        let bc = st.reduced_density(&[B, C]).unwrap().fidelity_with_pure(&make_bell(kind, [B, C]).unwrap()).unwrap();
        ab.min(bc)
    }

    #[test]
    fn plain_maintenance_follows_hadamard_closure() {
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // q2 = 0: Φ+ pattern stays fixed; q2 = 1: Ψ+ ↔ Φ−
        for q2 in 0..2u8 {
            let mut s = session_at_round2(Variant::Plain, 0, q2, &mut rng);
            let mut attack = execute_split(&mut s, &su, MaintenancePolicy::PlainHadamard).unwrap();
            forward_after_split(&mut s, &mut attack, &mut rng).unwrap();
            for _ in 0..4 {
                maintain_carriers(&mut s, &mut attack, Maintenance::Plain).unwrap();
                let want = match (q2, s.parity()) {
                    (0, _) => BellKind::PhiPlus,
                    (_, Parity::Odd) => BellKind::PhiMinus,
                    (_, Parity::Even) => BellKind::PsiPlus,
                };
                assert!(pair_pattern_fidelity(s.state(), want) > 1.0 - 1e-10);
                let bit = rng.random_range(0..2u8);
                s.encode_round(bit).unwrap();
                attack_decode_and_forward(&mut s, &mut attack, &mut rng).unwrap();
            }
        }
    }

    /// Hand-built odd round with both fraud pairs in Ψ+.
    fn psi_pattern_odd_round(q: u8) -> (ProtocolSession, AttackState) {
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut s = session_at_round2(Variant::Plain, 0, 1, &mut rng);
        let mut attack = execute_split(&mut s, &su, MaintenancePolicy::PlainHadamard).unwrap();
        forward_after_split(&mut s, &mut attack, &mut rng).unwrap();
        // skip the toggle so round 3 still carries Ψ+ ⊗ Ψ+
        s.advance_round();
        attack.tracker = PatternTracker::new().unwrap();
        s.encode_round(q).unwrap();
        (s, attack)
    }

    #[test]
    fn psi_pattern_raw_read_is_complemented_until_resolved() {
        let (mut s, mut attack) = psi_pattern_odd_round(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (learned, charlie) = attack_decode_and_forward(&mut s, &mut attack, &mut rng).unwrap();
        assert_eq!(learned, 0);
        assert_eq!(charlie, 1);
        assert_eq!(attack.record(3).unwrap().raw, 0);
        assert_eq!(attack.resolve_pattern(3, 1).unwrap(), PatternHypothesis::PsiPattern);
        assert_eq!(attack.learned_bit(3), Some(1));
    }

    #[test]
    fn phi_pattern_odd_round_reads_directly() {
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut s = session_at_round2(Variant::Plain, 1, 0, &mut rng);
        let mut attack = execute_split(&mut s, &su, MaintenancePolicy::PlainHadamard).unwrap();
        forward_after_split(&mut s, &mut attack, &mut rng).unwrap();
        maintain_carriers(&mut s, &mut attack, Maintenance::Plain).unwrap();
        s.encode_round(1).unwrap();
        let (learned, charlie) = attack_decode_and_forward(&mut s, &mut attack, &mut rng).unwrap();
        assert_eq!((learned, charlie), (1, 1));
    }

    #[test]
    fn resolve_pattern_rules() {
        let mut a = AttackState::new(MaintenancePolicy::PlainHadamard).unwrap();
        a.records.push(AttackRecord { round: 2, raw: 0, flip_phi: 0, flip_psi: 1, x1: 0, forwarded: 0 });
        a.records.push(AttackRecord { round: 4, raw: 1, flip_phi: 0, flip_psi: 1, x1: 1, forwarded: 0 });
        a.records.push(AttackRecord { round: 5, raw: 1, flip_phi: 0, flip_psi: 0, x1: 1, forwarded: 1 });
        assert_eq!(a.resolve_pattern(9, 0), Err(Error::NoRecord(9)));
        // uninformative round leaves the hypothesis open
        assert_eq!(a.resolve_pattern(5, 0).unwrap(), PatternHypothesis::Unknown);
        let mut phi = a.clone();
        assert_eq!(phi.resolve_pattern(2, 0).unwrap(), PatternHypothesis::PhiPattern);
        assert_eq!(phi.learned_bit(4), Some(1));
        assert_eq!(a.resolve_pattern(2, 1).unwrap(), PatternHypothesis::PsiPattern);
        assert_eq!(a.learned_bit(4), Some(0));
        assert_eq!(a.learned_bit(2), Some(1));
        // never reverts
        assert_eq!(a.resolve_pattern(4, 1).unwrap(), PatternHypothesis::PsiPattern);
    }

    #[test]
    fn wrong_guess_in_theta_protocol_corrupts_charlie() {
        let angles = ThetaTriple::hardened(0.7, 1.1, TAU - 1.8).unwrap();
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 10_000;
        let mut wrong = 0;
        for _ in 0..trials {
            let q2 = rng.random_range(0..2u8);
            let mut s = session_at_round2(Variant::Theta(angles), rng.random_range(0..2u8), q2, &mut rng);
            let mut attack = execute_split(&mut s, &su, MaintenancePolicy::KnownThetaV).unwrap();
            forward_after_split(&mut s, &mut attack, &mut rng).unwrap();
            maintain_carriers(&mut s, &mut attack, Maintenance::V).unwrap();
            let q = rng.random_range(0..2u8);
            s.encode_round(q).unwrap();
            let (_, charlie) = attack_decode_and_forward(&mut s, &mut attack, &mut rng).unwrap();
            wrong += usize::from(charlie != q);
        }
        let rate = wrong as f64 / trials as f64;
        assert!(rate >= 0.25, "rate {rate}");
    }

    #[test]
    fn random_guess_draws_once_per_pair() {
        let mut a = AttackState::new(MaintenancePolicy::RandomGuess).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let first = a.choose_maintenance(Direction::Inverse, &mut rng);
            let second = a.choose_maintenance(Direction::Forward, &mut rng);
            assert_eq!(first, second);
        }
    }

    #[test]
    fn phase_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = init_session(&ProtocolConfig::plain(4, 0)).unwrap();
        let mut a = AttackState::new(MaintenancePolicy::PlainHadamard).unwrap();
        s.encode_round(0).unwrap();
        assert!(attack_decode_and_forward(&mut s, &mut a, &mut rng).is_err());
        assert!(forward_after_split(&mut s, &mut a, &mut rng).is_err());
        assert!(maintain_carriers(&mut s, &mut a, Maintenance::U).is_err());
    }

    #[test]
    fn tracker_matches_simulated_pairs() {
        let angles = ThetaTriple::hardened(0.7, 1.1, TAU - 1.8).unwrap();
        let su = synthesize_split_unitary(zero_blank()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for q2 in 0..2u8 {
            let mut s = session_at_round2(Variant::Theta(angles), 0, q2, &mut rng);
            let mut attack = execute_split(&mut s, &su, MaintenancePolicy::KnownThetaU).unwrap();
            forward_after_split(&mut s, &mut attack, &mut rng).unwrap();
            maintain_carriers(&mut s, &mut attack, Maintenance::U).unwrap();
            let model = if q2 == 0 { &attack.tracker.phi } else { &attack.tracker.psi };
            let rho = s.state().reduced_density(&[A, BT]).unwrap();
            assert!((rho.fidelity_with_pure(model).unwrap() - 1.0).abs() < 1e-10);
            let _ = fidelity(model, model).unwrap();
        }
    }
}
