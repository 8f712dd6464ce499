//! Exponential weights over the bid grid, optionally restarted every fixed
//! number of rounds. Plain Hedge is the special case where the batch spans
//! the whole horizon.

use super::{check_weights, positive, BidDistribution, BiddingPolicy, PolicyError, RoundPhase};
use crate::auction::{AuctionRound, BidGrid};

/// One exponential-weights step: `p_{t+1,i} ∝ p_{t,i} * exp(eta * r_{t,i})`.
pub fn hedge_update(weights: &[f64], rewards: &[f64], learning_rate: f64) -> Result<Vec<f64>, PolicyError> {
    positive("learning_rate", learning_rate)?;
    if weights.len() != rewards.len() {
        return Err(PolicyError::LengthMismatch {
            expected: weights.len(),
            got: rewards.len(),
        });
    }
    check_weights(weights)?;
    let logs: Vec<f64> = weights
        .iter()
        .zip(rewards)
        .map(|(&p, &r)| p.ln() + learning_rate * r)
        .collect();
    let mut out = vec![0.0; logs.len()];
    let total = softmax_into(&logs, &mut out);
    if !total.is_finite() || total <= 0.0 {
        return Err(PolicyError::NonFinite);
    }
    Ok(out)
}

/// Writes `exp(x_i - max x)` into `out` and returns the sum.
fn softmax_into(logs: &[f64], out: &mut [f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(logs) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeConfig {
    pub epsilon: f64,
    /// Rounds between restarts; the horizon for plain Hedge.
    pub batch_size: usize,
    /// Defaults to `sqrt(8 ln N / batch_size)`.
    pub learning_rate: Option<f64>,
}

impl HedgeConfig {
    /// Plain Hedge on a `1/sqrt(T)` grid.
    pub fn plain(horizon: usize) -> Self {
        Self {
            epsilon: 1.0 / (horizon.max(1) as f64).sqrt(),
            batch_size: horizon.max(1),
            learning_rate: None,
        }
    }

    /// Restarted Hedge with batch size `scale * (T / (V_T + V_T^v))^(2/3)`.
    pub fn restarted(horizon: usize, total_variation: f64, scale: f64) -> Self {
        let t = horizon.max(1) as f64;
        let raw = scale * (t / total_variation.max(1e-12)).powf(2.0 / 3.0);
        let batch_size = (raw.round() as usize).clamp(1, horizon.max(1));
        Self {
            batch_size,
            ..Self::plain(horizon)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestartHedge {
    name: &'static str,
    grid: BidGrid,
    learning_rate: f64,
    batch_size: usize,
    log_weights: Vec<f64>,
    rewards: Vec<f64>,
    masses: Vec<f64>,
    rounds_in_batch: usize,
    round: usize,
    batch_starts: Vec<usize>,
    dist: BidDistribution,
    phase: RoundPhase,
}

impl RestartHedge {
    pub fn new(config: &HedgeConfig) -> Result<Self, PolicyError> {
        let grid = BidGrid::new(config.epsilon)?;
        if config.batch_size == 0 {
            return Err(PolicyError::InvalidParameter {
                name: "batch_size",
                value: 0.0,
            });
        }
        let n = grid.len();
        let learning_rate = match config.learning_rate {
            Some(eta) => positive("learning_rate", eta)?,
            // A single expert makes ln N vanish; any positive rate is equivalent.
            None => (8.0 * (n.max(2) as f64).ln() / config.batch_size as f64).sqrt(),
        };
        Ok(Self {
            name: "restart_hedge",
            grid,
            learning_rate,
            batch_size: config.batch_size,
            log_weights: vec![0.0; n],
            rewards: vec![0.0; n],
            masses: vec![0.0; n],
            rounds_in_batch: 0,
            round: 0,
            batch_starts: Vec::new(),
            dist: BidDistribution::default(),
            phase: RoundPhase::default(),
        })
    }

    /// Hedge without restarts over the whole horizon.
    pub fn plain(horizon: usize) -> Result<Self, PolicyError> {
        let mut h = Self::new(&HedgeConfig::plain(horizon))?;
        h.name = "hedge";
        Ok(h)
    }

    pub fn with_name(mut self, name: &'static str) -> Self {
        self.name = name;
        self
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    /// Current expert weights (normalized).
    pub fn weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.log_weights.len()];
        softmax_into(&self.log_weights, &mut out);
        out
    }
}

impl BiddingPolicy for RestartHedge {
    fn name(&self) -> &'static str {
        self.name
    }

    fn propose(&mut self, valuation: f64) -> Result<&BidDistribution, PolicyError> {
        self.phase.begin(valuation)?;
        if self.rounds_in_batch == 0 || self.rounds_in_batch >= self.batch_size {
            self.log_weights.iter_mut().for_each(|w| *w = 0.0);
            self.rounds_in_batch = 0;
            self.batch_starts.push(self.round);
        }
        let total = softmax_into(&self.log_weights, &mut self.masses);
        if !total.is_finite() {
            return Err(PolicyError::NonFinite);
        }
        self.dist.fill_grid(&self.grid, valuation, &self.masses, 1.0);
        Ok(&self.dist)
    }

    fn observe(&mut self, round: &AuctionRound) -> Result<(), PolicyError> {
        self.phase.finish(round)?;
        self.grid.fill_rewards(round, &mut self.rewards);
        for (w, r) in self.log_weights.iter_mut().zip(&self.rewards) {
            *w += self.learning_rate * r;
        }
        self.rounds_in_batch += 1;
        self.round += 1;
        Ok(())
    }

    fn batch_starts(&self) -> Option<&[usize]> {
        Some(&self.batch_starts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rewards_keep_uniform() {
        let p = hedge_update(&[0.25; 4], &[0.3; 4], 0.7).unwrap();
        for x in p {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_expert_update() {
        // exp(ln 2) = 2 => (2/3, 1/3)
        let p = hedge_update(&[0.5, 0.5], &[1.0, 0.0], std::f64::consts::LN_2).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn update_survives_huge_rewards() {
        let p = hedge_update(&[0.5, 0.5], &[1e6, 0.0], 10.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        assert!(hedge_update(&[0.5, 0.5], &[1.0, 0.0], 0.0).is_err());
        assert!(hedge_update(&[0.6, 0.5], &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn batch_size_one_is_always_uniform() {
        let mut h = RestartHedge::new(&HedgeConfig {
            epsilon: 0.25,
            batch_size: 1,
            learning_rate: Some(1.0),
        })
        .unwrap();
        for t in 0..10 {
            let d = h.propose(0.9).unwrap();
            assert!(d.probs().iter().all(|p| (p - 0.25).abs() < 1e-15), "round {t}");
            h.observe(&AuctionRound::new(0.9, 0.3).unwrap()).unwrap();
        }
        assert_eq!(h.batch_starts().unwrap().len(), 10);
    }

    #[test]
    fn plain_hedge_concentrates_on_best_expert() {
        let mut h = RestartHedge::plain(400).unwrap();
        let r = AuctionRound::new(1.0, 0.42).unwrap();
        for _ in 0..400 {
            h.propose(1.0).unwrap();
            h.observe(&r).unwrap();
        }
        let w = h.weights();
        let best = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        // smallest threshold >= 0.42 on the 1/20 grid is 0.45
        assert!((h.grid().thresholds()[best] - 0.45).abs() < 1e-12);
        assert_eq!(h.batch_starts().unwrap(), &[0]);
    }

    #[test]
    fn restarted_batch_size_formula() {
        let c = HedgeConfig::restarted(1000, 8.0, 1.0);
        assert_eq!(c.batch_size, 25);
        let c = HedgeConfig::restarted(1000, 0.0, 1.0);
        assert_eq!(c.batch_size, 1000);
    }
}
