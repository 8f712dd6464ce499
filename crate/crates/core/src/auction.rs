//! First-price auction reward model, the dynamic benchmark and the two
//! regularity metrics of a rival-bid sequence.
//!
//! A round is a pair `(v, m)`: the learner's private valuation and the
//! highest competing bid. Bidding `b` pays `(v - b) * 1(b >= m)`, so ties
//! resolve in the learner's favour.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance used by [`switch_count`] callers in the experiments.
pub const DEFAULT_SWITCH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuctionError {
    #[error("{field} must lie in [0, 1], got {value}")]
    OutOfUnitInterval { field: &'static str, value: f64 },
    #[error("auction sequence must contain at least one round")]
    EmptySequence,
    #[error("grid precision must lie in (0, 1], got {0}")]
    InvalidPrecision(f64),
}

fn check_unit(field: &'static str, value: f64) -> Result<f64, AuctionError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(AuctionError::OutOfUnitInterval { field, value })
    }
}

/// One auction: the learner's valuation and the opponents' highest bid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionRound {
    valuation: f64,
    rival_high_bid: f64,
}

impl AuctionRound {
    pub fn new(valuation: f64, rival_high_bid: f64) -> Result<Self, AuctionError> {
        Ok(Self {
            valuation: check_unit("valuation", valuation)?,
            rival_high_bid: check_unit("rival_high_bid", rival_high_bid)?,
        })
    }

    pub fn valuation(&self) -> f64 {
        self.valuation
    }

    pub fn rival_high_bid(&self) -> f64 {
        self.rival_high_bid
    }

    /// Payoff of `bid` without range validation. Hot loops use this after
    /// the bid has been produced from a validated grid.
    #[inline]
    pub fn payoff(&self, bid: f64) -> f64 {
        if bid >= self.rival_high_bid {
            self.valuation - bid
        } else {
            0.0
        }
    }

    /// `max{v - m, 0}`, the best achievable payoff this round.
    #[inline]
    pub fn margin(&self) -> f64 {
        (self.valuation - self.rival_high_bid).max(0.0)
    }
}

/// A non-empty ordered list of rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionSequence {
    rounds: Vec<AuctionRound>,
}

impl AuctionSequence {
    pub fn new(rounds: Vec<AuctionRound>) -> Result<Self, AuctionError> {
        if rounds.is_empty() {
            return Err(AuctionError::EmptySequence);
        }
        Ok(Self { rounds })
    }

    /// Zips valuations with rival bids, validating every entry.
    pub fn from_parts(valuations: &[f64], rival_bids: &[f64]) -> Result<Self, AuctionError> {
        let rounds = valuations
            .iter()
            .zip(rival_bids)
            .map(|(&v, &m)| AuctionRound::new(v, m))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rounds)
    }

    pub fn rounds(&self) -> &[AuctionRound] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rival_bids(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.rival_high_bid).collect()
    }

    pub fn valuations(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.valuation).collect()
    }
}

/// The truncated-threshold expert set: expert `i` (1-based) bids
/// `min{v, i * epsilon}` for `i = 1..=floor(1/epsilon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidGrid {
    epsilon: f64,
    thresholds: Vec<f64>,
}

impl BidGrid {
    pub fn new(epsilon: f64) -> Result<Self, AuctionError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(AuctionError::InvalidPrecision(epsilon));
        }
        // 1/epsilon can land a hair below an integer (e.g. epsilon = 1/T).
        let count = ((1.0 / epsilon) * (1.0 + 1e-12)).floor() as usize;
        let thresholds = (1..=count)
            .map(|i| (i as f64 * epsilon).min(1.0))
            .collect();
        Ok(Self {
            epsilon,
            thresholds,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Thresholds `tau_i`, ascending.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    #[inline]
    pub fn expert_bid(&self, index: usize, valuation: f64) -> f64 {
        valuation.min(self.thresholds[index])
    }

    /// Index range of experts with `lo <= tau_i < hi`. Only these experts
    /// earn a non-zero payoff when `lo = m` and `hi = v`.
    pub fn winning_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.thresholds.partition_point(|&t| t < lo);
        let end = self.thresholds.partition_point(|&t| t < hi).max(start);
        start..end
    }

    /// Writes every expert's payoff for `round` into `out`.
    pub fn fill_rewards(&self, round: &AuctionRound, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let v = round.valuation;
        for (slot, &tau) in out.iter_mut().zip(&self.thresholds) {
            *slot = round.payoff(v.min(tau));
        }
    }
}

/// Payoff of `bid` in `round`; rejects bids outside `[0, 1]`.
pub fn reward(bid: f64, round: &AuctionRound) -> Result<f64, AuctionError> {
    check_unit("bid", bid)?;
    Ok(round.payoff(bid))
}

/// Payoff of every grid expert for one round.
pub fn expert_reward_vector(grid: &BidGrid, round: &AuctionRound) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    grid.fill_rewards(round, &mut out);
    out
}

/// The canonical per-round optimal bid: `m` when `v >= m`, else `v`.
pub fn optimal_bid(round: &AuctionRound) -> f64 {
    if round.valuation >= round.rival_high_bid {
        round.rival_high_bid
    } else {
        round.valuation
    }
}

/// Sum of per-round clipped margins `max{v_t - m_t, 0}`.
pub fn dynamic_benchmark(seq: &AuctionSequence) -> f64 {
    seq.rounds.iter().map(AuctionRound::margin).sum()
}

/// Total absolute movement `sum_t |x_t - x_{t-1}|`.
pub fn temporal_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Number of indices where the sequence moves by at least `tolerance`.
/// A tolerance of zero counts every non-zero change.
pub fn switch_count(values: &[f64], tolerance: f64) -> usize {
    values
        .windows(2)
        .filter(|w| {
            let d = (w[1] - w[0]).abs();
            if tolerance > 0.0 {
                d >= tolerance
            } else {
                d > 0.0
            }
        })
        .count()
}

/// Left limit of the payoff as the bid approaches `point` from below.
fn payoff_left_limit(round: &AuctionRound, point: f64) -> f64 {
    if point > round.rival_high_bid {
        round.valuation - point
    } else {
        0.0
    }
}

/// Exact `sup_{b in [0,1]} |r(b; a) - r(b; b')|`.
///
/// The difference is piecewise linear in `b` with breakpoints only at the
/// two rival bids, so the supremum is attained at `0`, `1`, a breakpoint,
/// or a one-sided limit into a breakpoint.
pub fn sup_reward_difference(a: &AuctionRound, b: &AuctionRound) -> f64 {
    let mut best: f64 = 0.0;
    for point in [0.0, 1.0, a.rival_high_bid, b.rival_high_bid] {
        best = best.max((a.payoff(point) - b.payoff(point)).abs());
    }
    for point in [a.rival_high_bid, b.rival_high_bid] {
        if point > 0.0 {
            let diff = payoff_left_limit(a, point) - payoff_left_limit(b, point);
            best = best.max(diff.abs());
        }
    }
    best
}
