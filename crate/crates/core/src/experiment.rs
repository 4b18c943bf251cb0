//! Seeded Monte Carlo over whole protocol runs.
//!
//! Every trial gets its own ChaCha8 stream (`seed`, stream = trial index), so a
//! report depends only on the spec and never on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    attack_decode_and_forward, execute_split, forward_after_split, maintain_carriers, synthesize_split_unitary,
    zero_blank, AttackState, MaintenancePolicy, SplitUnitary,
};
use crate::detection::{announce, evaluate, select_rounds, Announcement, Claimant, DetectionReport, HonestBob, Verdict};
use crate::error::{Error, Result};
use crate::gates::{make_bell, BellKind, ThetaTriple};
use crate::protocol::{init_session, AnnounceOrder, Parity, ProtocolConfig, ProtocolSession, Transcript, Variant, A, B, BT, C};
use crate::state::StateVector;

/// Round at which the splitting attack is mounted.
pub const SPLIT_ROUND: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    None,
    Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub config: ProtocolConfig,
    pub attack: AttackMode,
    pub policy: MaintenancePolicy,
    pub trials: u32,
    /// Mismatches tolerated before the verdict flips.
    #[serde(default)]
    pub tolerance: u32,
}

impl ExperimentSpec {
    pub fn honest(config: ProtocolConfig, trials: u32) -> Self {
        Self { config, attack: AttackMode::None, policy: MaintenancePolicy::RandomGuess, trials, tolerance: 0 }
    }

    pub fn split(config: ProtocolConfig, policy: MaintenancePolicy, trials: u32) -> Self {
        Self { config, attack: AttackMode::Split, policy, trials, tolerance: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::NoTrials);
        }
        self.config.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    pub transcript: Transcript,
    pub announcements: Vec<Announcement>,
    pub report: DetectionReport,
    /// Fraction of rounds Bob read correctly after using the announcements.
    pub bob_recovery: Option<f64>,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_rounds<R: Rng>(
    spec: &ExperimentSpec,
    split: Option<&SplitUnitary>,
    rng: &mut R,
) -> Result<(ProtocolSession, Option<AttackState>)> {
    let mut session = init_session(&spec.config)?;
    let mut attack: Option<AttackState> = None;
    for _ in 0..spec.config.num_rounds {
        let q = rng.random_range(0..2u8);
        session.encode_round(q)?;
        match (&mut attack, split) {
            (Some(a), _) => {
                attack_decode_and_forward(&mut session, a, rng)?;
            }
            (None, Some(su)) if session.round_index() == SPLIT_ROUND => {
                let mut a = execute_split(&mut session, su, spec.policy)?;
                forward_after_split(&mut session, &mut a, rng)?;
                attack = Some(a);
            }
            _ => {
                session.deliver_and_decode(rng)?;
            }
        }
        match &mut attack {
            Some(a) => {
                let choice = a.choose_maintenance(session.toggle_direction(), rng);
                maintain_carriers(&mut session, a, choice)?;
            }
            None => session.toggle_carrier()?,
        }
    }
    Ok((session, attack))
}

/// One full run: rounds, public check, and (under attack) Bob's resolution.
pub fn run_trial(spec: &ExperimentSpec, split: Option<&SplitUnitary>, trial: u64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(spec.config.rng_seed, trial);
    let split = match spec.attack {
        AttackMode::Split => split,
        AttackMode::None => None,
    };
    let (session, mut attack) = run_rounds(spec, split, &mut rng)?;
    let transcript = session.transcript()?;
    let rounds = select_rounds(spec.config.announce_fraction, spec.config.num_rounds, &mut rng)?;
    let claimant: &mut dyn Claimant = match &mut attack {
        Some(a) => a,
        None => &mut HonestBob,
    };
    let announcements = announce(&transcript, &rounds, spec.config.announce_order, claimant)?;
    let report = evaluate(&transcript, &announcements, spec.tolerance)?;
    let bob_recovery = match &mut attack {
        Some(a) => {
            for ann in &announcements {
                a.resolve_pattern(ann.round_index, ann.alice_bit)?;
            }
            Some(a.recovery_rate(&transcript.records))
        }
        None => None,
    };
    Ok(TrialOutcome { trial, transcript, announcements, report, bob_recovery })
}

/// All trials in trial order.
pub fn run_trials(spec: &ExperimentSpec) -> Result<Vec<TrialOutcome>> {
    spec.validate()?;
    let split = match spec.attack {
        AttackMode::Split => Some(synthesize_split_unitary(zero_blank())?),
        AttackMode::None => None,
    };
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(spec, split.as_ref(), t))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub variant: String,
    pub theta: Option<[f64; 3]>,
    pub rounds: u32,
    pub trials: u32,
    pub seed: u64,
    pub attack: AttackMode,
    pub policy: Option<MaintenancePolicy>,
    pub announce_fraction: f64,
    pub announce_order: AnnounceOrder,
    pub tolerance: u32,
    pub detection_probability: f64,
    pub detected_trials: u32,
    pub announced_total: u64,
    pub odd_announced: u64,
    pub even_announced: u64,
    pub odd_mismatches: u64,
    pub even_mismatches: u64,
    pub mismatch_rate: f64,
    pub odd_mismatch_rate: f64,
    pub even_mismatch_rate: f64,
    /// Mismatches found in rounds up to and including the split round.
    pub early_mismatches: u64,
    /// Odd rounds where Charlie's decoded bit differs from Alice's.
    pub charlie_odd_error_rate: f64,
    pub mean_carrier_fidelity: f64,
    pub min_carrier_fidelity: f64,
    pub bob_recovery_rate: Option<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn aggregate(spec: &ExperimentSpec, outcomes: &[TrialOutcome]) -> ExperimentReport {
    let mut detected = 0u32;
    let (mut odd_ann, mut even_ann, mut odd_mis, mut even_mis, mut early) = (0u64, 0u64, 0u64, 0u64, 0u64);
    let (mut odd_rounds, mut charlie_wrong) = (0u64, 0u64);
    let (mut fid_sum, mut fid_n, mut fid_min) = (0.0f64, 0u64, f64::INFINITY);
    let mut recovery: Option<f64> = None;
    for o in outcomes {
        detected += u32::from(o.report.verdict == Verdict::CheatingDetected);
        odd_mis += o.report.odd_mismatches as u64;
        even_mis += o.report.even_mismatches as u64;
        for a in &o.announcements {
            let rec = o.transcript.record(a.round_index).expect("announced rounds exist");
            match rec.parity() {
                Parity::Odd => odd_ann += 1,
                Parity::Even => even_ann += 1,
            }
            let bad = match rec.parity() {
                Parity::Odd => a.bob_claim != a.alice_bit || a.charlie_claim != a.alice_bit,
                Parity::Even => a.bob_claim ^ a.charlie_claim != a.alice_bit,
            };
            early += u64::from(bad && a.round_index <= SPLIT_ROUND);
        }
        for r in &o.transcript.records {
            if r.parity() == Parity::Odd {
                odd_rounds += 1;
                charlie_wrong += u64::from(r.charlie_bit != r.secret_bit);
            }
            fid_sum += r.carrier_fidelity_after;
            fid_n += 1;
            fid_min = fid_min.min(r.carrier_fidelity_after);
        }
        if let Some(b) = o.bob_recovery {
            *recovery.get_or_insert(0.0) += b;
        }
    }
    let n = outcomes.len().max(1) as f64;
    let (variant, theta) = match &spec.config.variant {
        Variant::Plain => ("plain".to_string(), None),
        Variant::Theta(t) => ("theta".to_string(), Some(t.as_array())),
    };
    ExperimentReport {
        variant,
        theta,
        rounds: spec.config.num_rounds,
        trials: spec.trials,
        seed: spec.config.rng_seed,
        attack: spec.attack,
        policy: (spec.attack == AttackMode::Split).then_some(spec.policy),
        announce_fraction: spec.config.announce_fraction,
        announce_order: spec.config.announce_order,
        tolerance: spec.tolerance,
        detection_probability: detected as f64 / n,
        detected_trials: detected,
        announced_total: odd_ann + even_ann,
        odd_announced: odd_ann,
        even_announced: even_ann,
        odd_mismatches: odd_mis,
        even_mismatches: even_mis,
        mismatch_rate: ratio(odd_mis + even_mis, odd_ann + even_ann),
        odd_mismatch_rate: ratio(odd_mis, odd_ann),
        even_mismatch_rate: ratio(even_mis, even_ann),
        early_mismatches: early,
        charlie_odd_error_rate: ratio(charlie_wrong, odd_rounds),
        mean_carrier_fidelity: if fid_n == 0 { 1.0 } else { fid_sum / fid_n as f64 },
        min_carrier_fidelity: if fid_n == 0 { 1.0 } else { fid_min },
        bob_recovery_rate: recovery.map(|s| s / n),
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    Ok(aggregate(spec, &run_trials(spec)?))
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Transcripts of all trials as JSON lines, each tagged with its trial index.
pub fn transcripts_jsonl(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        for line in o.transcript.to_jsonl().lines() {
            let mut v: serde_json::Value = serde_json::from_str(line).expect("own output parses");
            v["trial"] = o.trial.into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: [f64; 3],
    pub trials: u32,
    pub detected_trials: u32,
    pub detection_probability: f64,
    pub mismatch_rate: f64,
    pub charlie_odd_error_rate: f64,
}

impl SweepRow {
    fn from_report(r: &ExperimentReport) -> Self {
        Self {
            theta: r.theta.unwrap_or([0.0; 3]),
            trials: r.trials,
            detected_trials: r.detected_trials,
            detection_probability: r.detection_probability,
            mismatch_rate: r.mismatch_rate,
            charlie_odd_error_rate: r.charlie_odd_error_rate,
        }
    }
}

/// Triples with θa = θc = g and θb = −2g (mod 2π).
pub fn symmetric_grid(gs: &[f64]) -> Result<Vec<ThetaTriple>> {
    gs.iter().map(|&g| ThetaTriple::hardened(g, -2.0 * g, g)).collect()
}

/// Runs `base` once per grid point, with the variant replaced by that point.
pub fn sweep(base: &ExperimentSpec, grid: &[ThetaTriple]) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|t| {
            t.validate_hardened()?;
            let mut spec = base.clone();
            spec.config.variant = Variant::Theta(*t);
            Ok(SweepRow::from_report(&run_experiment(&spec)?))
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("theta_a,theta_b,theta_c,trials,detected_trials,detection_probability,mismatch_rate,charlie_odd_error_rate\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.theta[0], r.theta[1], r.theta[2], r.trials, r.detected_trials, r.detection_probability, r.mismatch_rate, r.charlie_odd_error_rate
        ));
    }
    out
}

/// Largest fidelity of a two-qubit reduced state with any of the four Bell states.
pub fn bell_pattern_fidelity(state: &StateVector, pair: [&str; 2]) -> Result<f64> {
    let rho = state.reduced_density(&pair)?;
    BellKind::ALL.iter().try_fold(0.0f64, |best, k| {
        Ok(best.max(rho.fidelity_with_pure(&make_bell(*k, [pair[0], pair[1]])?)?))
    })
}

/// Weight of odd computational-basis parity on a two-qubit pair.
pub fn odd_parity_weight(state: &StateVector, pair: [&str; 2]) -> Result<f64> {
    let rho = state.reduced_density(&pair)?;
    Ok(rho.entry(1, 1).re + rho.entry(2, 2).re)
}

fn parity_is_definite(w: f64) -> bool {
    w < 1e-9 || w > 1.0 - 1e-9
}

/// Probability, over a random round-2 bit and Bob's own coin, that both fraud
/// pairs still carry definite computational-basis parity after the first
/// post-split toggle. Between toggles every operation is a basis permutation
/// followed by Z measurements, so definite parity is exactly what Bob needs
/// to read Alice and feed Charlie without error.
pub fn fraud_survival_probability(angles: &ThetaTriple, policy: MaintenancePolicy, trials: u32, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let su = synthesize_split_unitary(zero_blank())?;
    let survived: u32 = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<u32> {
            let mut rng = trial_rng(seed, t);
            let mut s = ProtocolSession::new(Variant::Theta(*angles))?;
            s.encode_round(rng.random_range(0..2u8))?;
            s.deliver_and_decode(&mut rng)?;
            s.toggle_carrier()?;
            s.encode_round(rng.random_range(0..2u8))?;
            let mut a = execute_split(&mut s, &su, policy)?;
            forward_after_split(&mut s, &mut a, &mut rng)?;
            let choice = a.choose_maintenance(s.toggle_direction(), &mut rng);
            maintain_carriers(&mut s, &mut a, choice)?;
            let ok = parity_is_definite(odd_parity_weight(s.state(), [A, BT])?)
                && parity_is_definite(odd_parity_weight(s.state(), [B, C])?);
            Ok(u32::from(ok))
        })
        .collect::<Result<Vec<u32>>>()?
        .into_iter()
        .sum();
    Ok(survived as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_trial_is_clean() {
        let spec = ExperimentSpec::honest(ProtocolConfig::plain(20, 3), 4);
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.detected_trials, 0);
        assert_eq!(r.charlie_odd_error_rate, 0.0);
        assert!(r.min_carrier_fidelity > 1.0 - 1e-10);
        assert_eq!(r.bob_recovery_rate, None);
    }

    #[test]
    fn zero_trials_rejected() {
        let spec = ExperimentSpec::honest(ProtocolConfig::plain(20, 3), 0);
        assert_eq!(run_experiment(&spec).unwrap_err(), Error::NoTrials);
    }

    #[test]
    fn reports_are_deterministic() {
        let t = ThetaTriple::hardened(0.7, 1.1, -1.8).unwrap();
        let spec = ExperimentSpec::split(ProtocolConfig::theta(t, 30, 9), MaintenancePolicy::RandomGuess, 16);
        assert_eq!(run_experiment(&spec).unwrap().to_json(), run_experiment(&spec).unwrap().to_json());
    }

    #[test]
    fn single_round_never_splits() {
        let spec = ExperimentSpec::split(ProtocolConfig::plain(1, 0), MaintenancePolicy::PlainHadamard, 3);
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.detected_trials, 0);
    }

    #[test]
    fn grid_builds_constraint_satisfying_triples() {
        let g = symmetric_grid(&[0.01, 1.0]).unwrap();
        for t in g {
            let s = t.theta_a + t.theta_b + t.theta_c;
            assert!((s.rem_euclid(std::f64::consts::TAU)).min(std::f64::consts::TAU - s.rem_euclid(std::f64::consts::TAU)) < 1e-12);
        }
    }
}
