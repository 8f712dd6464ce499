//! Bidding policies over the truncated-threshold expert grid.
//!
//! Every policy follows the same two-step round protocol: [`BiddingPolicy::propose`]
//! receives the current valuation and returns a distribution over bids, then
//! [`BiddingPolicy::observe`] receives the resolved round (including the
//! rival bid) and advances the state. A proposal can only depend on past
//! rounds, the current valuation and the policy's own seed.

mod bobw;
mod fixed;
mod hedge;
mod omd;
mod prod;

pub use bobw::{Bobw, BobwConfig};
pub use fixed::FixedBid;
pub use hedge::{hedge_update, HedgeConfig, RestartHedge};
pub use omd::{ArOmd, ArOmdConfig};
pub use prod::{compute_optimism, prod_update, ArProd, ArProdConfig, PROD_FACTOR_FLOOR};

use crate::auction::{AuctionError, AuctionRound, BidGrid};
use thiserror::Error;

/// Tolerance on the total mass of a probability vector.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("observe called without a preceding propose")]
    ObserveWithoutPropose,
    #[error("propose called twice without an intervening observe")]
    ProposeWithoutObserve,
    #[error("observed valuation {observed} differs from proposed valuation {proposed}")]
    ValuationMismatch { proposed: f64, observed: f64 },
    #[error("weights are not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },
    #[error("weights became non-finite")]
    NonFinite,
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Auction(#[from] AuctionError),
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64, PolicyError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(PolicyError::InvalidParameter { name, value })
    }
}

/// A finite distribution over bids. Grid policies lay it out in expert
/// order; mixtures concatenate their components.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BidDistribution {
    bids: Vec<f64>,
    probs: Vec<f64>,
}

impl BidDistribution {
    pub fn point(bid: f64) -> Self {
        Self {
            bids: vec![bid],
            probs: vec![1.0],
        }
    }

    pub fn from_parts(bids: Vec<f64>, probs: Vec<f64>) -> Result<Self, PolicyError> {
        if bids.len() != probs.len() {
            return Err(PolicyError::LengthMismatch {
                expected: bids.len(),
                got: probs.len(),
            });
        }
        let dist = Self { bids, probs };
        dist.check_normalized()?;
        Ok(dist)
    }

    /// Overwrites `self` with grid bids `min{v, tau_i}` and the given
    /// unnormalized masses scaled by `1 / total`.
    pub(crate) fn fill_grid(&mut self, grid: &BidGrid, valuation: f64, masses: &[f64], total: f64) {
        let inv = 1.0 / total;
        self.bids.clear();
        self.bids
            .extend(grid.thresholds().iter().map(|&tau| valuation.min(tau)));
        self.probs.clear();
        self.probs.extend(masses.iter().map(|&w| w * inv));
    }

    /// Overwrites `self` with `weight * a` followed by `(1 - weight) * b`.
    pub(crate) fn fill_mixture(&mut self, a: &BidDistribution, weight: f64, b: &BidDistribution) {
        self.bids.clear();
        self.bids.extend_from_slice(&a.bids);
        self.bids.extend_from_slice(&b.bids);
        self.probs.clear();
        self.probs.extend(a.probs.iter().map(|&x| weight * x));
        self.probs.extend(b.probs.iter().map(|&x| (1.0 - weight) * x));
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn check_normalized(&self) -> Result<(), PolicyError> {
        let sum = self.total_mass();
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(PolicyError::NonFinite);
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(PolicyError::NotNormalized { sum });
        }
        Ok(())
    }

    /// `sum_i p_i * r(b_i; v, m)`.
    pub fn expected_reward(&self, round: &AuctionRound) -> f64 {
        self.bids
            .iter()
            .zip(&self.probs)
            .map(|(&b, &p)| p * round.payoff(b))
            .sum()
    }

    /// Inverse-CDF sample for a uniform draw `u` in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding left a sliver of mass; fall back to the last supported bid.
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let i = self.sample_index(rng.random::<f64>());
        (i, self.bids[i])
    }
}

/// The uniform interface every learner implements.
pub trait BiddingPolicy: Send {
    fn name(&self) -> &'static str;

    /// Distribution over bids for the current round. Must not depend on the
    /// current rival bid.
    fn propose(&mut self, valuation: f64) -> Result<&BidDistribution, PolicyError>;

    /// Feeds back the resolved round.
    fn observe(&mut self, round: &AuctionRound) -> Result<(), PolicyError>;

    /// Zero-based round indices at which the policy started a fresh batch,
    /// for restart-based policies.
    fn batch_starts(&self) -> Option<&[usize]> {
        None
    }
}

impl<P: BiddingPolicy + ?Sized> BiddingPolicy for Box<P> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn propose(&mut self, valuation: f64) -> Result<&BidDistribution, PolicyError> {
        (**self).propose(valuation)
    }
    fn observe(&mut self, round: &AuctionRound) -> Result<(), PolicyError> {
        (**self).observe(round)
    }
    fn batch_starts(&self) -> Option<&[usize]> {
        (**self).batch_starts()
    }
}

/// Enforces propose/observe alternation.
#[derive(Debug, Clone, Default)]
pub(crate) struct RoundPhase {
    pending: Option<f64>,
}

impl RoundPhase {
    pub(crate) fn begin(&mut self, valuation: f64) -> Result<(), PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::ProposeWithoutObserve);
        }
        if !(0.0..=1.0).contains(&valuation) {
            return Err(AuctionError::OutOfUnitInterval {
                field: "valuation",
                value: valuation,
            }
            .into());
        }
        self.pending = Some(valuation);
        Ok(())
    }

    pub(crate) fn finish(&mut self, round: &AuctionRound) -> Result<(), PolicyError> {
        match self.pending.take() {
            None => Err(PolicyError::ObserveWithoutPropose),
            Some(v) if v != round.valuation() => {
                self.pending = Some(v);
                Err(PolicyError::ValuationMismatch {
                    proposed: v,
                    observed: round.valuation(),
                })
            }
            Some(_) => Ok(()),
        }
    }
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<(), PolicyError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(PolicyError::NonFinite);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(PolicyError::NotNormalized { sum });
    }
    Ok(())
}

/// Whether `current` differs from `previous` by at least `tolerance`
/// (any non-zero change when `tolerance` is zero).
pub(crate) fn is_switch(previous: f64, current: f64, tolerance: f64) -> bool {
    let d = (current - previous).abs();
    if tolerance > 0.0 {
        d >= tolerance
    } else {
        d > 0.0
    }
}
