//! Crowd consensus simulation: annotators vote until one label has three
//! votes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::task::Lexicon;

pub const VOTES_TO_AGREE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusTrace {
    pub example_id: String,
    pub votes: Vec<String>,
    pub consensus: String,
    pub annotators_used: usize,
}

/// Replays a stream of vote outcomes (true = the vote is for `gold`) until
/// some label reaches three votes. Returns `None` if the stream runs dry.
pub fn consensus_from_votes(
    example_id: &str,
    gold: &str,
    other: &str,
    outcomes: impl IntoIterator<Item = bool>,
) -> Option<ConsensusTrace> {
    let (mut right, mut wrong) = (0, 0);
    let mut votes = Vec::new();
    for correct in outcomes {
        if correct {
            right += 1;
            votes.push(gold.to_string());
        } else {
            wrong += 1;
            votes.push(other.to_string());
        }
        if right == VOTES_TO_AGREE || wrong == VOTES_TO_AGREE {
            return Some(ConsensusTrace {
                example_id: example_id.to_string(),
                annotators_used: votes.len(),
                consensus: if right == VOTES_TO_AGREE { gold } else { other }.to_string(),
                votes,
            });
        }
    }
    None
}

/// Seeded source of simulated annotator votes.
pub struct CrowdSimulator {
    rng: ChaCha8Rng,
    p: f64,
}

impl CrowdSimulator {
    /// `p` is each annotator's probability of voting for the gold label.
    pub fn new(p: f64, seed: u64) -> Result<CrowdSimulator, EvalError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(EvalError::BadProbability(p));
        }
        Ok(CrowdSimulator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            p,
        })
    }

    pub fn trace(&mut self, example_id: &str, gold: &str, other: &str) -> ConsensusTrace {
        let (rng, p) = (&mut self.rng, self.p);
        consensus_from_votes(
            example_id,
            gold,
            other,
            std::iter::repeat_with(|| rng.random_bool(p)),
        )
        .expect("an endless vote stream always reaches consensus")
    }

    /// Whether a single simulated item ends on the gold label.
    pub fn agrees(&mut self) -> bool {
        let (mut right, mut wrong) = (0, 0);
        while right < VOTES_TO_AGREE && wrong < VOTES_TO_AGREE {
            if self.rng.random_bool(self.p) {
                right += 1;
            } else {
                wrong += 1;
            }
        }
        right == VOTES_TO_AGREE
    }
}

/// The label that is not `gold` in a two-label lexicon.
pub fn other_label<'a>(lexicon: &'a Lexicon, gold: &str) -> Result<&'a str, EvalError> {
    if !lexicon.is_binary() {
        return Err(EvalError::NotBinary(lexicon.labels().len()));
    }
    if !lexicon.contains(gold) {
        return Err(EvalError::UnknownGold(gold.to_string()));
    }
    Ok(lexicon
        .labels()
        .iter()
        .find(|l| *l != gold)
        .expect("binary lexicon"))
}

pub fn simulate_crowd(
    example_id: &str,
    gold: &str,
    lexicon: &Lexicon,
    p: f64,
    seed: u64,
) -> Result<ConsensusTrace, EvalError> {
    let other = other_label(lexicon, gold)?;
    Ok(CrowdSimulator::new(p, seed)?.trace(example_id, gold, other))
}

/// Fraction of `n` simulated items whose consensus is the gold label.
pub fn monte_carlo_agreement(p: f64, n: usize, seed: u64) -> Result<f64, EvalError> {
    let mut sim = CrowdSimulator::new(p, seed)?;
    let hits = (0..n).filter(|_| sim.agrees()).count();
    Ok(hits as f64 / n.max(1) as f64)
}
