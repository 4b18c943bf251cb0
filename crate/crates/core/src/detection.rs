//! Public comparison of a random subset of rounds.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{AnnounceOrder, Parity, RoundRecord, Transcript};

/// Picks `ceil(fraction · num_rounds)` distinct rounds (1-based), ascending.
pub fn select_rounds<R: Rng + ?Sized>(fraction: f64, num_rounds: u32, rng: &mut R) -> Result<Vec<u32>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::BadFraction(fraction));
    }
    if num_rounds == 0 {
        return Err(Error::EmptyTranscript);
    }
    let k = ((fraction * num_rounds as f64).ceil() as usize).min(num_rounds as usize);
    let mut rounds: Vec<u32> = sample(rng, num_rounds as usize, k).into_iter().map(|i| i as u32 + 1).collect();
    rounds.sort_unstable();
    Ok(rounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub round_index: u32,
    pub alice_bit: u8,
    pub bob_claim: u8,
    pub charlie_claim: u8,
}

/// How Bob fills in his announced bit. `visible` carries (Alice's bit,
/// Charlie's claim) when Bob speaks last.
pub trait Claimant {
    fn bob_claim(&mut self, record: &RoundRecord, visible: Option<(u8, u8)>) -> Result<u8>;
}

/// Announces exactly what was measured.
#[derive(Clone, Copy, Debug, Default)]
pub struct HonestBob;

impl Claimant for HonestBob {
    fn bob_claim(&mut self, record: &RoundRecord, _visible: Option<(u8, u8)>) -> Result<u8> {
        Ok(record.bob_bit)
    }
}

/// Collects announcements for `rounds`. Charlie always reports his decoded bit.
pub fn announce(
    transcript: &Transcript,
    rounds: &[u32],
    order: AnnounceOrder,
    bob: &mut dyn Claimant,
) -> Result<Vec<Announcement>> {
    rounds
        .iter()
        .map(|&round| {
            let rec = transcript.record(round).ok_or(Error::NoRecord(round))?;
            let visible = match order {
                AnnounceOrder::BobLast => Some((rec.secret_bit, rec.charlie_bit)),
                AnnounceOrder::AliceFirst => None,
            };
            Ok(Announcement {
                round_index: round,
                alice_bit: rec.secret_bit,
                bob_claim: bob.bob_claim(rec, visible)?,
                charlie_claim: rec.charlie_bit,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    CheatingDetected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Clean => "clean",
            Verdict::CheatingDetected => "cheating_detected",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    #[serde(rename = "announced")]
    pub announced_count: usize,
    pub odd_mismatches: usize,
    pub even_mismatches: usize,
    #[serde(rename = "rate")]
    pub mismatch_rate: f64,
    pub verdict: Verdict,
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Odd rounds: each claim must equal Alice's bit. Even rounds: the XOR of
/// the claims must. More than `tolerance` mismatches flags cheating.
pub fn evaluate(transcript: &Transcript, announcements: &[Announcement], tolerance: u32) -> Result<DetectionReport> {
    let mut odd = 0;
    let mut even = 0;
    for a in announcements {
        let rec = transcript.record(a.round_index).ok_or(Error::NoRecord(a.round_index))?;
        match rec.parity() {
            Parity::Odd => odd += usize::from(a.bob_claim != a.alice_bit || a.charlie_claim != a.alice_bit),
            Parity::Even => even += usize::from(a.bob_claim ^ a.charlie_claim != a.alice_bit),
        }
    }
    let n = announcements.len();
    let total = odd + even;
    Ok(DetectionReport {
        announced_count: n,
        odd_mismatches: odd,
        even_mismatches: even,
        mismatch_rate: if n == 0 { 0.0 } else { total as f64 / n as f64 },
        verdict: if total > tolerance as usize { Verdict::CheatingDetected } else { Verdict::Clean },
    })
}
