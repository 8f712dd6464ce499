//! Two-algorithm combiner with an asymmetric prior.
//!
//! The combiner starts almost fully trusting algorithm B (weight `1 - eta`)
//! and only ever moves A's weight, multiplying it by `1 + eta * delta_t`
//! where `delta_t` is A's payoff minus B's payoff on their own sampled bids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    positive, ArOmd, ArOmdConfig, ArProd, ArProdConfig, BidDistribution, BiddingPolicy, PolicyError, RoundPhase,
};
use crate::auction::AuctionRound;

#[derive(Debug, Clone, PartialEq)]
pub struct BobwConfig {
    pub learning_rate: f64,
}

impl BobwConfig {
    /// `eta = sqrt(ln T / T) / 2`, with `T` floored at 2 so the rate stays positive.
    pub fn for_horizon(horizon: usize) -> Self {
        let t = horizon.max(2) as f64;
        Self {
            learning_rate: 0.5 * (t.ln() / t).sqrt(),
        }
    }
}

pub struct Bobw {
    child_a: Box<dyn BiddingPolicy>,
    child_b: Box<dyn BiddingPolicy>,
    learning_rate: f64,
    weight_a: f64,
    weight_b: f64,
    log_weight_a: f64,
    mix_probability: f64,
    reward_gap: f64,
    sampled: Option<(f64, f64)>,
    rng: ChaCha8Rng,
    dist: BidDistribution,
    phase: RoundPhase,
}

impl std::fmt::Debug for Bobw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bobw")
            .field("child_a", &self.child_a.name())
            .field("child_b", &self.child_b.name())
            .field("learning_rate", &self.learning_rate)
            .field("weight_a", &self.weight_a)
            .field("weight_b", &self.weight_b)
            .finish()
    }
}

impl Bobw {
    /// AR-Prod as A and AR-OMD as B, both with their experiment settings.
    pub fn for_horizon(horizon: usize, seed: u64) -> Result<Self, PolicyError> {
        Self::new(
            Box::new(ArProd::new(&ArProdConfig::experiment(horizon))?),
            Box::new(ArOmd::new(&ArOmdConfig::experiment(horizon))?),
            &BobwConfig::for_horizon(horizon),
            seed,
        )
    }

    pub fn new(
        child_a: Box<dyn BiddingPolicy>,
        child_b: Box<dyn BiddingPolicy>,
        config: &BobwConfig,
        seed: u64,
    ) -> Result<Self, PolicyError> {
        let eta = positive("learning_rate", config.learning_rate)?;
        if eta >= 1.0 {
            return Err(PolicyError::InvalidParameter {
                name: "learning_rate",
                value: eta,
            });
        }
        Ok(Self {
            child_a,
            child_b,
            learning_rate: eta,
            weight_a: eta,
            weight_b: 1.0 - eta,
            log_weight_a: eta.ln(),
            mix_probability: eta,
            reward_gap: 0.0,
            sampled: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dist: BidDistribution::default(),
            phase: RoundPhase::default(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn weight_a(&self) -> f64 {
        self.weight_a
    }

    pub fn weight_b(&self) -> f64 {
        self.weight_b
    }

    /// `ln(eta) + sum_t ln(1 + eta * delta_t)`, accumulated alongside the weight.
    pub fn log_weight_a(&self) -> f64 {
        self.log_weight_a
    }

    pub fn mix_probability(&self) -> f64 {
        self.mix_probability
    }

    pub fn reward_gap(&self) -> f64 {
        self.reward_gap
    }
}

impl BiddingPolicy for Bobw {
    fn name(&self) -> &'static str {
        "bobw"
    }

    /// Mixture `p_t * dist_A + (1 - p_t) * dist_B`. The children's own bids
    /// are sampled here and kept for the weight update.
    fn propose(&mut self, valuation: f64) -> Result<&BidDistribution, PolicyError> {
        self.phase.begin(valuation)?;
        let p = self.weight_a / (self.weight_a + self.weight_b);
        self.mix_probability = p;

        let dist_a = self.child_a.propose(valuation)?;
        let dist_b = self.child_b.propose(valuation)?;
        let (_, bid_a) = dist_a.sample(&mut self.rng);
        let (_, bid_b) = dist_b.sample(&mut self.rng);
        self.sampled = Some((bid_a, bid_b));
        self.dist.fill_mixture(dist_a, p, dist_b);
        Ok(&self.dist)
    }

    fn observe(&mut self, round: &AuctionRound) -> Result<(), PolicyError> {
        self.phase.finish(round)?;
        let (bid_a, bid_b) = self.sampled.take().ok_or(PolicyError::ObserveWithoutPropose)?;
        self.child_a.observe(round)?;
        self.child_b.observe(round)?;
        let delta = round.payoff(bid_a) - round.payoff(bid_b);
        self.reward_gap = delta;
        let factor = 1.0 + self.learning_rate * delta;
        self.weight_a *= factor;
        self.log_weight_a += factor.ln();
        if !self.weight_a.is_finite() || self.weight_a <= 0.0 {
            return Err(PolicyError::NonFinite);
        }
        Ok(())
    }
}
