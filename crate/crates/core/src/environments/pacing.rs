//! Budget-constrained opponents that shade bids with a dual multiplier.
//!
//! Each agent bids `min{value / (1 + mu), remaining budget}` and after every
//! round moves `mu` against the gap between its target spend rate `B / T`
//! and what it actually paid. The learner's wins take auctions away from the
//! agents, so the rival-bid sequence reacts to the learner.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, EnvKind, EnvironmentSpec, Pattern, OPPONENT_NOISE_STREAM, RIVAL_STREAM, VALUATION_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRegime {
    /// `B = T / 20`
    Sufficient,
    /// `B = T / 40`
    Insufficient,
}

impl BudgetRegime {
    pub fn budget(self, horizon: usize) -> f64 {
        match self {
            BudgetRegime::Sufficient => horizon as f64 / 20.0,
            BudgetRegime::Insufficient => horizon as f64 / 40.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BudgetRegime::Sufficient => "sufficient",
            BudgetRegime::Insufficient => "insufficient",
        }
    }
}

impl std::str::FromStr for BudgetRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sufficient" => Ok(BudgetRegime::Sufficient),
            "insufficient" => Ok(BudgetRegime::Insufficient),
            other => Err(format!("unknown budget regime `{other}`")),
        }
    }
}

/// State of one pacing opponent.
#[derive(Debug, Clone, PartialEq)]
pub struct PacingAgent {
    pub multiplier: f64,
    pub multiplier_cap: f64,
    pub step_size: f64,
    pub target_rate: f64,
    pub remaining_budget: f64,
    initial_budget: f64,
}

impl PacingAgent {
    /// `mu = 0`, `mu_cap = T/B - 1`, step `1/sqrt(T)`, target rate `B/T`.
    pub fn new(budget: f64, horizon: usize) -> Self {
        let t = horizon.max(1) as f64;
        let budget = budget.max(0.0);
        let multiplier_cap = if budget > 0.0 { (t / budget - 1.0).max(0.0) } else { 0.0 };
        Self {
            multiplier: 0.0,
            multiplier_cap,
            step_size: 1.0 / t.sqrt(),
            target_rate: budget / t,
            remaining_budget: budget,
            initial_budget: budget,
        }
    }

    pub fn initial_budget(&self) -> f64 {
        self.initial_budget
    }

    pub fn spent(&self) -> f64 {
        self.initial_budget - self.remaining_budget
    }

    pub fn bid(&self, value: f64) -> f64 {
        (value / (1.0 + self.multiplier)).min(self.remaining_budget).max(0.0)
    }

    /// Charges the payment (if won) and updates the multiplier.
    pub fn settle(&mut self, won: bool, payment: f64) {
        let z = if won { payment.clamp(0.0, self.remaining_budget) } else { 0.0 };
        self.remaining_budget = (self.remaining_budget - z).max(0.0);
        self.multiplier = (self.multiplier - self.step_size * (self.target_rate - z)).clamp(0.0, self.multiplier_cap);
    }
}

/// Settles the last round and returns the bid for the next value.
pub fn pacing_agent_step(state: &PacingAgent, value: f64, won: bool, payment: f64) -> (PacingAgent, f64) {
    let mut next = state.clone();
    next.settle(won, payment);
    let bid = next.bid(value);
    (next, bid)
}

/// How one round of the pacing market resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacingOutcome {
    pub rival_high_bid: f64,
    pub learner_won: bool,
    /// Winning opponent (lowest index among the highest bids).
    pub winner: Option<usize>,
    pub payment: f64,
}

/// The interactive budget-pacing environment.
#[derive(Debug, Clone)]
pub struct PacingMarket {
    agents: Vec<PacingAgent>,
    opponent_values: Vec<f64>,
    learner_values: Vec<f64>,
    noise: f64,
    noise_rng: ChaCha8Rng,
    round: usize,
    opponent_payments: f64,
    bids: Vec<f64>,
}

impl PacingMarket {
    pub fn new(spec: &EnvironmentSpec) -> Result<Self, EnvError> {
        if spec.kind != EnvKind::BudgetPacing {
            return Err(EnvError::InvalidField {
                field: "kind",
                reason: "pacing market needs kind budget_pacing".into(),
            });
        }
        spec.validate()?;
        let t = spec.horizon;
        let budgets = if spec.budgets.is_empty() {
            vec![BudgetRegime::Sufficient.budget(t); spec.opponents]
        } else {
            spec.budgets.clone()
        };
        let pattern = spec.pattern.unwrap_or(Pattern::Constant);
        let mut rng = spec.rng(RIVAL_STREAM);
        let opponent_values = pattern
            .generate(t, spec.variation_target, spec.beta, &mut rng)?
            .into_iter()
            .map(|x| x * spec.value_scale)
            .collect();
        let mut values = spec.rng(VALUATION_STREAM);
        Ok(Self {
            agents: budgets.iter().map(|&b| PacingAgent::new(b, t)).collect(),
            opponent_values,
            learner_values: (0..t).map(|_| values.random::<f64>()).collect(),
            noise: spec.opponent_noise,
            noise_rng: spec.rng(OPPONENT_NOISE_STREAM),
            round: 0,
            opponent_payments: 0.0,
            bids: vec![0.0; budgets.len()],
        })
    }

    /// Replaces the agents (for scripted scenarios).
    pub fn with_agents(mut self, agents: Vec<PacingAgent>) -> Self {
        self.bids = vec![0.0; agents.len()];
        self.agents = agents;
        self
    }

    pub fn horizon(&self) -> usize {
        self.learner_values.len()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.horizon()
    }

    /// Learner valuation for the current round.
    pub fn learner_valuation(&self) -> f64 {
        self.learner_values[self.round]
    }

    pub fn learner_valuations(&self) -> &[f64] {
        &self.learner_values
    }

    pub fn opponent_values(&self) -> &[f64] {
        &self.opponent_values
    }

    pub fn agents(&self) -> &[PacingAgent] {
        &self.agents
    }

    /// Sum of all payments made by opponents so far.
    pub fn opponent_payments(&self) -> f64 {
        self.opponent_payments
    }

    pub fn total_initial_budget(&self) -> f64 {
        self.agents.iter().map(PacingAgent::initial_budget).sum()
    }

    pub fn total_spent(&self) -> f64 {
        self.agents.iter().map(PacingAgent::spent).sum()
    }

    /// Runs the current round against the learner's bid and advances.
    pub fn resolve(&mut self, learner_bid: f64) -> PacingOutcome {
        assert!(!self.is_finished(), "pacing market is past its horizon");
        let common = self.opponent_values[self.round];
        for (bid, agent) in self.bids.iter_mut().zip(&self.agents) {
            let value = if self.noise > 0.0 {
                (common + self.noise * self.noise_rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0)
            } else {
                common
            };
            *bid = agent.bid(value);
        }
        let mut winner = None;
        let mut high = 0.0;
        for (k, &b) in self.bids.iter().enumerate() {
            if winner.is_none() || b > high {
                winner = Some(k);
                high = b;
            }
        }
        let learner_won = learner_bid >= high;
        let opponent_winner = if learner_won { None } else { winner };
        let mut payment = 0.0;
        for (k, agent) in self.agents.iter_mut().enumerate() {
            let won = opponent_winner == Some(k);
            if won {
                let before = agent.remaining_budget;
                agent.settle(true, high);
                payment = before - agent.remaining_budget;
            } else {
                agent.settle(false, 0.0);
            }
        }
        self.opponent_payments += payment;
        self.round += 1;
        PacingOutcome {
            rival_high_bid: high,
            learner_won,
            winner: opponent_winner,
            payment: if learner_won { learner_bid } else { payment },
        }
    }
}

/// Runs a full market against a fixed learner bid stream.
pub fn simulate_budget_pacing(spec: &EnvironmentSpec, learner_bids: &[f64]) -> Result<Vec<PacingOutcome>, EnvError> {
    let mut market = PacingMarket::new(spec)?;
    Ok(learner_bids
        .iter()
        .take(market.horizon())
        .map(|&b| market.resolve(b))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(t: usize, budgets: Vec<f64>) -> EnvironmentSpec {
        EnvironmentSpec {
            opponents: budgets.len(),
            budgets,
            variation_target: 1.0,
            pattern: Some(Pattern::Constant),
            ..EnvironmentSpec::new(EnvKind::BudgetPacing, t, 5)
        }
    }

    #[test]
    fn unshaded_bid_with_ample_budget() {
        let a = PacingAgent::new(50.0, 100);
        assert_eq!(a.bid(0.8), 0.8);
    }

    #[test]
    fn losing_lowers_the_multiplier() {
        let mut a = PacingAgent::new(25.0, 100);
        a.multiplier = 0.5;
        let (next, _) = pacing_agent_step(&a, 0.5, false, 0.0);
        assert!((next.multiplier - (0.5 - 0.1 * 0.25)).abs() < 1e-15);
        a.multiplier = 0.01;
        let (next, _) = pacing_agent_step(&a, 0.5, false, 0.0);
        assert_eq!(next.multiplier, 0.0);
    }

    #[test]
    fn winning_raises_the_multiplier_up_to_cap() {
        let mut a = PacingAgent::new(25.0, 100);
        assert_eq!(a.multiplier_cap, 3.0);
        for _ in 0..200 {
            a.settle(true, 0.9);
            assert!((0.0..=a.multiplier_cap).contains(&a.multiplier));
            assert!(a.remaining_budget >= 0.0);
        }
        assert_eq!(a.remaining_budget, 0.0);
    }

    #[test]
    fn depleted_agent_bids_zero() {
        let mut a = PacingAgent::new(0.5, 100);
        a.settle(true, 0.5);
        for v in [0.0, 0.3, 1.0] {
            assert_eq!(a.bid(v), 0.0);
        }
    }

    #[test]
    fn depleted_market_gives_learner_every_round() {
        let mut market = PacingMarket::new(&spec(50, vec![0.0; 3])).unwrap();
        while !market.is_finished() {
            let o = market.resolve(0.0);
            assert_eq!(o.rival_high_bid, 0.0);
            assert!(o.learner_won);
        }
    }

    #[test]
    fn single_pinned_agent_bids_its_value_until_depleted() {
        // B = T pins the multiplier cap at zero.
        let t = 40;
        let s = EnvironmentSpec {
            variation_target: 0.0,
            ..spec(t, vec![10.0])
        };
        let mut agent = PacingAgent::new(t as f64, t);
        assert_eq!(agent.multiplier_cap, 0.0);
        let mut remaining = 10.0;
        agent.remaining_budget = remaining;
        let mut market = PacingMarket::new(&s).unwrap().with_agents(vec![agent]);
        let values = market.opponent_values().to_vec();
        for &value in &values {
            let o = market.resolve(0.0);
            let expected = value.min(remaining);
            assert_eq!(o.rival_high_bid, expected);
            remaining -= expected;
        }
    }

    #[test]
    fn ties_go_to_lowest_index_and_learner() {
        let mut market = PacingMarket::new(&spec(10, vec![5.0, 5.0, 5.0])).unwrap();
        let high = market.opponent_values()[0];
        let o = market.resolve(0.0);
        if high > 0.0 {
            assert_eq!(o.winner, Some(0));
            assert_eq!(o.payment, high);
        }
        let next_high = market.agents()[1].bid(market.opponent_values()[1]);
        let o = market.resolve(next_high);
        assert!(o.learner_won || o.rival_high_bid > next_high);
    }

    #[test]
    fn budget_is_conserved() {
        let s = EnvironmentSpec::budget_pacing(Pattern::Sinusoidal, BudgetRegime::Insufficient, 3000, 0.5, 11);
        let mut market = PacingMarket::new(&s).unwrap();
        let mut paid = 0.0;
        let mut k = 0u32;
        while !market.is_finished() {
            k = k.wrapping_mul(1_103_515_245).wrapping_add(12_345);
            let o = market.resolve((k >> 8) as f64 / (1u32 << 24) as f64);
            if !o.learner_won {
                paid += o.payment;
            }
        }
        assert!((market.total_spent() - paid).abs() < 1e-9);
        assert!((market.opponent_payments() - paid).abs() < 1e-9);
        assert!(market.total_spent() <= market.total_initial_budget() + 1e-9);
    }
}
