//! The Prod forecaster with benchmark optimism and its adaptive-restart
//! wrapper.
//!
//! Prod multiplies each expert weight by `1 + eta * (r_i - mu)`, where the
//! optimism `mu = max{v - m, 0}` is the best payoff available this round.
//! Because the same scalar is subtracted from every expert it cancels in the
//! proposal, so the played distribution never depends on the current rival
//! bid even though `mu` does.
//!
//! The restart wrapper opens a new batch (uniform weights) as soon as the
//! batch length reaches `sqrt(T / (sum of observed variation + c))`.

use super::{check_weights, positive, BidDistribution, BiddingPolicy, PolicyError, RoundPhase};
use crate::auction::{AuctionRound, BidGrid};

/// Lower clamp on a multiplicative factor before renormalization.
pub const PROD_FACTOR_FLOOR: f64 = 1e-12;

/// Per-round optimism `max{v - m, 0}`.
pub fn compute_optimism(round: &AuctionRound) -> f64 {
    round.margin()
}

/// One Prod step on a normalized weight vector.
pub fn prod_update(
    weights: &[f64],
    rewards: &[f64],
    optimism: f64,
    learning_rate: f64,
) -> Result<Vec<f64>, PolicyError> {
    positive("learning_rate", learning_rate)?;
    if weights.len() != rewards.len() {
        return Err(PolicyError::LengthMismatch {
            expected: weights.len(),
            got: rewards.len(),
        });
    }
    check_weights(weights)?;
    let mut out = weights.to_vec();
    apply_prod(&mut out, rewards, optimism, learning_rate)?;
    Ok(out)
}

fn apply_prod(weights: &mut [f64], rewards: &[f64], optimism: f64, eta: f64) -> Result<(), PolicyError> {
    let factor = |r: f64| (1.0 + eta * (r - optimism)).max(PROD_FACTOR_FLOOR);
    let first = factor(rewards[0]);
    // A common factor cancels on renormalization; skip it to keep weights bit-exact.
    if rewards.iter().all(|&r| factor(r) == first) {
        return Ok(());
    }
    let mut total = 0.0;
    for (w, &r) in weights.iter_mut().zip(rewards) {
        *w *= factor(r);
        total += *w;
    }
    if !total.is_finite() || total <= 0.0 {
        return Err(PolicyError::NonFinite);
    }
    let inv = 1.0 / total;
    weights.iter_mut().for_each(|w| *w *= inv);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArProdConfig {
    pub horizon: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    /// Additive constant `c` in the restart threshold.
    pub regularizer_floor: f64,
}

impl ArProdConfig {
    /// `eta = 1/2`, `epsilon = 1/T`, `c = 1/T`.
    pub fn algorithm_defaults(horizon: usize) -> Self {
        let t = horizon.max(1) as f64;
        Self {
            horizon: horizon.max(1),
            learning_rate: 0.5,
            epsilon: 1.0 / t,
            regularizer_floor: 1.0 / t,
        }
    }

    /// `eta = 1`, `epsilon = 4/sqrt(T)`, `c = 1/T`.
    pub fn experiment(horizon: usize) -> Self {
        let t = horizon.max(1) as f64;
        Self {
            horizon: horizon.max(1),
            learning_rate: 1.0,
            epsilon: (4.0 / t.sqrt()).min(1.0),
            regularizer_floor: 1.0 / t,
        }
    }
}

/// Adaptive-restart Prod.
#[derive(Debug, Clone)]
pub struct ArProd {
    grid: BidGrid,
    horizon: f64,
    learning_rate: f64,
    regularizer_floor: f64,
    weights: Vec<f64>,
    rewards: Vec<f64>,
    batch_length: usize,
    batch_variation: f64,
    cumulative_variation: f64,
    batch_index: usize,
    last_rival: Option<f64>,
    restart_pending: bool,
    round: usize,
    batch_starts: Vec<usize>,
    dist: BidDistribution,
    phase: RoundPhase,
}

impl ArProd {
    pub fn new(config: &ArProdConfig) -> Result<Self, PolicyError> {
        let grid = BidGrid::new(config.epsilon)?;
        let learning_rate = positive("learning_rate", config.learning_rate)?;
        let regularizer_floor = positive("regularizer_floor", config.regularizer_floor)?;
        if config.horizon == 0 {
            return Err(PolicyError::InvalidParameter {
                name: "horizon",
                value: 0.0,
            });
        }
        let n = grid.len();
        Ok(Self {
            grid,
            horizon: config.horizon as f64,
            learning_rate,
            regularizer_floor,
            weights: vec![1.0 / n as f64; n],
            rewards: vec![0.0; n],
            batch_length: 0,
            batch_variation: 0.0,
            cumulative_variation: 0.0,
            batch_index: 0,
            last_rival: None,
            restart_pending: true,
            round: 0,
            batch_starts: Vec::new(),
            dist: BidDistribution::default(),
            phase: RoundPhase::default(),
        })
    }

    /// Batch length at which the current batch closes.
    pub fn restart_threshold(&self) -> f64 {
        (self.horizon / (self.cumulative_variation + self.regularizer_floor)).sqrt()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    /// One-based index of the open batch (zero before the first round).
    pub fn batch_index(&self) -> usize {
        self.batch_index
    }

    pub fn batch_length(&self) -> usize {
        self.batch_length
    }

    pub fn batch_variation(&self) -> f64 {
        self.batch_variation
    }

    pub fn cumulative_variation(&self) -> f64 {
        self.cumulative_variation
    }

    fn start_batch(&mut self) {
        let n = self.weights.len();
        self.weights.iter_mut().for_each(|w| *w = 1.0 / n as f64);
        self.batch_length = 0;
        self.batch_variation = 0.0;
        self.last_rival = None;
        self.batch_index += 1;
        self.restart_pending = false;
        self.batch_starts.push(self.round);
    }
}

impl BiddingPolicy for ArProd {
    fn name(&self) -> &'static str {
        "ar_prod"
    }

    fn propose(&mut self, valuation: f64) -> Result<&BidDistribution, PolicyError> {
        self.phase.begin(valuation)?;
        if self.restart_pending {
            self.start_batch();
        }
        self.dist.fill_grid(&self.grid, valuation, &self.weights, 1.0);
        Ok(&self.dist)
    }

    fn observe(&mut self, round: &AuctionRound) -> Result<(), PolicyError> {
        self.phase.finish(round)?;
        let m = round.rival_high_bid();
        // Variation is batch-local: the jump into a new batch is not counted.
        if let Some(prev) = self.last_rival {
            let step = (m - prev).abs();
            self.batch_variation += step;
            self.cumulative_variation += step;
        }
        self.last_rival = Some(m);
        self.batch_length += 1;
        self.grid.fill_rewards(round, &mut self.rewards);
        apply_prod(
            &mut self.weights,
            &self.rewards,
            compute_optimism(round),
            self.learning_rate,
        )?;
        if self.batch_length as f64 >= self.restart_threshold() {
            self.restart_pending = true;
        }
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
    fn prod_update_example() {
        let p = prod_update(&[0.5, 0.5], &[1.0, 0.0], 0.0, 0.5).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15);
        assert!((p[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn prod_update_fixed_points() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(prod_update(&p, &[0.37; 4], 0.37, 1.0).unwrap(), p.to_vec());
        let p = prod_update(&[1.0, 0.0], &[0.1, 0.9], 0.4, 0.5).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn prod_update_rejects_drifted_weights() {
        assert!(matches!(
            prod_update(&[0.5, 0.6], &[0.0, 0.0], 0.0, 0.5),
            Err(PolicyError::NotNormalized { .. })
        ));
    }

    #[test]
    fn factor_floor_keeps_experts_alive() {
        // eta = 1, r = 0, mu = 1 gives a zero factor before the floor.
        let p = prod_update(&[0.5, 0.5], &[0.0, 1.0], 1.0, 1.0).unwrap();
        assert!(p[0] > 0.0 && p[0] < 1e-11);
    }

    #[test]
    fn optimism_examples() {
        let r = |v, m| AuctionRound::new(v, m).unwrap();
        assert!((compute_optimism(&r(0.9, 0.4)) - 0.5).abs() < 1e-15);
        assert_eq!(compute_optimism(&r(0.3, 0.4)), 0.0);
        assert_eq!(compute_optimism(&r(1.0, 0.0)), 1.0);
    }

    #[test]
    fn algorithm_defaults() {
        let c = ArProdConfig::algorithm_defaults(200);
        assert_eq!(c.learning_rate, 0.5);
        assert_eq!(c.epsilon, 1.0 / 200.0);
        assert_eq!(c.regularizer_floor, 1.0 / 200.0);
        let e = ArProdConfig::experiment(400);
        assert_eq!(e.learning_rate, 1.0);
        assert_eq!(e.epsilon, 0.2);
    }

    #[test]
    fn constant_rival_never_restarts() {
        let t = 300;
        let mut p = ArProd::new(&ArProdConfig::algorithm_defaults(t)).unwrap();
        for k in 0..t {
            let v = (k % 7) as f64 / 7.0;
            let d = p.propose(v).unwrap();
            if k == 0 {
                let n = d.len() as f64;
                assert!(d.probs().iter().all(|&x| x == 1.0 / n));
            }
            p.observe(&AuctionRound::new(v, 0.35).unwrap()).unwrap();
        }
        assert_eq!(p.batch_index(), 1);
        assert_eq!(p.batch_starts().unwrap(), &[0]);
    }

    #[test]
    fn restart_fires_on_first_guard_violation() {
        let t = 400;
        let mut p = ArProd::new(&ArProdConfig::experiment(t)).unwrap();
        let mut rival = 0.0;
        for k in 0..t {
            let before = p.batch_index();
            let threshold_before = p.restart_threshold();
            let len_before = p.batch_length();
            p.propose(0.8).unwrap();
            if p.batch_index() == before {
                assert!((len_before as f64) < threshold_before, "round {k}");
            } else {
                assert_eq!(p.batch_length(), 0);
                assert!(k == 0 || len_before as f64 >= threshold_before);
            }
            assert!(p.batch_variation() <= p.cumulative_variation() + 1e-15);
            rival = if k % 2 == 0 { rival + 0.05 } else { rival - 0.04 };
            let rival_clamped = f64::clamp(rival, 0.0, 1.0);
            p.observe(&AuctionRound::new(0.8, rival_clamped).unwrap()).unwrap();
        }
        assert!(p.batch_index() > 1);
    }

    #[test]
    fn observe_twice_is_an_error() {
        let mut p = ArProd::new(&ArProdConfig::experiment(10)).unwrap();
        let r = AuctionRound::new(0.5, 0.1).unwrap();
        p.propose(0.5).unwrap();
        p.observe(&r).unwrap();
        assert_eq!(p.observe(&r), Err(PolicyError::ObserveWithoutPropose));
    }
}
