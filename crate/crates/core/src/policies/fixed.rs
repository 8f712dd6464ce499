use super::{BidDistribution, BiddingPolicy, PolicyError, RoundPhase};
use crate::auction::{AuctionError, AuctionRound};

/// Always submits the same bid, regardless of history.
#[derive(Debug, Clone)]
pub struct FixedBid {
    dist: BidDistribution,
    phase: RoundPhase,
}

impl FixedBid {
    pub fn new(bid: f64) -> Result<Self, PolicyError> {
        if !(0.0..=1.0).contains(&bid) {
            return Err(AuctionError::OutOfUnitInterval { field: "bid", value: bid }.into());
        }
        Ok(Self {
            dist: BidDistribution::point(bid),
            phase: RoundPhase::default(),
        })
    }
}

impl BiddingPolicy for FixedBid {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn propose(&mut self, valuation: f64) -> Result<&BidDistribution, PolicyError> {
        self.phase.begin(valuation)?;
        Ok(&self.dist)
    }

    fn observe(&mut self, round: &AuctionRound) -> Result<(), PolicyError> {
        self.phase.finish(round)
    }
}
