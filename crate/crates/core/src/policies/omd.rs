//! Adaptive-restart optimistic mirror descent with the negative-entropy
//! regularizer.
//!
//! Within a batch the proposal is the closed form
//! `p_i ∝ exp(eta * (S_i + o_i))`, where `S_i` is expert `i`'s payoff so far
//! in the batch and `o_i = r(min{v_t, tau_i}; v_t, m_{t-1})` replays the
//! current valuation against the previous rival bid. A batch closes on the
//! first round (other than its opening round) whose rival bid moved by at
//! least the switch tolerance.
//!
//! Both `S_i` and `o_i` are non-zero only on the contiguous experts with
//! `m <= tau_i < v`, where they equal `v - tau_i`. The implementation keeps
//! `w_i = exp(eta * S_i - shift)` cached and multiplies it by
//! `exp(eta * v) * exp(-eta * tau_i)` on that range, so a round costs no
//! exponentials beyond a periodic re-anchoring of `shift`.

use super::{is_switch, positive, BidDistribution, BiddingPolicy, PolicyError, RoundPhase};
use crate::auction::{AuctionRound, BidGrid, DEFAULT_SWITCH_TOLERANCE};

/// Re-anchor cached weights once the leading log-weight exceeds the anchor by this much.
const REANCHOR_GAP: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ArOmdConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub switch_tolerance: f64,
}

impl ArOmdConfig {
    /// `epsilon = T^-0.9`, `eta = sqrt(ln T^0.9)`, switch tolerance `1e-6`.
    pub fn experiment(horizon: usize) -> Self {
        let t = horizon.max(1) as f64;
        let log_n = 0.9 * t.ln();
        Self {
            learning_rate: if log_n > 0.0 { log_n.sqrt() } else { 1.0 },
            epsilon: t.powf(-0.9).min(1.0),
            switch_tolerance: DEFAULT_SWITCH_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArOmd {
    grid: BidGrid,
    learning_rate: f64,
    switch_tolerance: f64,
    /// `exp(-eta * tau_i)`.
    decay: Vec<f64>,
    cumulative_rewards: Vec<f64>,
    cached: Vec<f64>,
    masses: Vec<f64>,
    shift: f64,
    leader: f64,
    last_rival: Option<f64>,
    rounds_in_batch: usize,
    batch_index: usize,
    round: usize,
    batch_starts: Vec<usize>,
    dist: BidDistribution,
    phase: RoundPhase,
}

impl ArOmd {
    pub fn new(config: &ArOmdConfig) -> Result<Self, PolicyError> {
        let grid = BidGrid::new(config.epsilon)?;
        let learning_rate = positive("learning_rate", config.learning_rate)?;
        if config.switch_tolerance.is_nan() || config.switch_tolerance < 0.0 {
            return Err(PolicyError::InvalidParameter {
                name: "switch_tolerance",
                value: config.switch_tolerance,
            });
        }
        let n = grid.len();
        let decay = grid
            .thresholds()
            .iter()
            .map(|&tau| (-learning_rate * tau).exp())
            .collect();
        Ok(Self {
            grid,
            learning_rate,
            switch_tolerance: config.switch_tolerance,
            decay,
            cumulative_rewards: vec![0.0; n],
            cached: vec![1.0; n],
            masses: vec![0.0; n],
            shift: 0.0,
            leader: 0.0,
            last_rival: None,
            rounds_in_batch: 0,
            batch_index: 0,
            round: 0,
            batch_starts: Vec::new(),
            dist: BidDistribution::default(),
            phase: RoundPhase::default(),
        })
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Within-batch cumulative expert payoffs.
    pub fn cumulative_rewards(&self) -> &[f64] {
        &self.cumulative_rewards
    }

    /// One-based index of the current batch (zero before the first round).
    pub fn batch_index(&self) -> usize {
        self.batch_index
    }

    pub fn last_rival_bid(&self) -> Option<f64> {
        self.last_rival
    }

    /// Optimism vector for valuation `v` given the stored previous rival bid.
    pub fn optimism_vector(&self, valuation: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        if let Some(prev) = self.last_rival {
            let round = AuctionRound::new(valuation, prev).expect("validated rival bid");
            self.grid.fill_rewards(&round, &mut out);
        }
        out
    }

    fn reset_batch(&mut self) {
        self.cumulative_rewards.iter_mut().for_each(|s| *s = 0.0);
        self.cached.iter_mut().for_each(|w| *w = 1.0);
        self.shift = 0.0;
        self.leader = 0.0;
        self.rounds_in_batch = 0;
    }

    fn reanchor(&mut self) {
        self.shift = self.learning_rate * self.leader;
        let (eta, shift) = (self.learning_rate, self.shift);
        for (w, &s) in self.cached.iter_mut().zip(&self.cumulative_rewards) {
            *w = (eta * s - shift).exp();
        }
    }
}

impl BiddingPolicy for ArOmd {
    fn name(&self) -> &'static str {
        "ar_omd"
    }

    fn propose(&mut self, valuation: f64) -> Result<&BidDistribution, PolicyError> {
        self.phase.begin(valuation)?;
        if self.rounds_in_batch == 0 {
            self.batch_index += 1;
            self.batch_starts.push(self.round);
        }
        self.masses.copy_from_slice(&self.cached);
        if let Some(prev) = self.last_rival {
            let lift = (self.learning_rate * valuation).exp();
            let range = self.grid.winning_range(prev, valuation);
            for (w, d) in self.masses[range.clone()].iter_mut().zip(&self.decay[range]) {
                *w *= lift * d;
            }
        }
        let total: f64 = self.masses.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(PolicyError::NonFinite);
        }
        self.dist.fill_grid(&self.grid, valuation, &self.masses, total);
        Ok(&self.dist)
    }

    fn observe(&mut self, round: &AuctionRound) -> Result<(), PolicyError> {
        self.phase.finish(round)?;
        let v = round.valuation();
        let m = round.rival_high_bid();
        let closes = self.rounds_in_batch > 0
            && self
                .last_rival
                .is_some_and(|prev| is_switch(prev, m, self.switch_tolerance));
        self.last_rival = Some(m);
        self.round += 1;
        if closes {
            self.reset_batch();
            return Ok(());
        }
        self.rounds_in_batch += 1;

        let range = self.grid.winning_range(m, v);
        if !range.is_empty() {
            let lift = (self.learning_rate * v).exp();
            let taus = &self.grid.thresholds()[range.clone()];
            let sums = &mut self.cumulative_rewards[range.clone()];
            let cached = &mut self.cached[range.clone()];
            let mut top = self.leader;
            for ((s, w), (&tau, &d)) in sums.iter_mut().zip(cached).zip(taus.iter().zip(&self.decay[range])) {
                *s += v - tau;
                *w *= lift * d;
                top = top.max(*s);
            }
            self.leader = top;
            if self.learning_rate * self.leader - self.shift > REANCHOR_GAP {
                self.reanchor();
            }
        }
        Ok(())
    }

    fn batch_starts(&self) -> Option<&[usize]> {
        Some(&self.batch_starts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn config(epsilon: f64, eta: f64) -> ArOmdConfig {
        ArOmdConfig {
            learning_rate: eta,
            epsilon,
            switch_tolerance: 1e-6,
        }
    }

    /// Direct closed form with a max-shifted softmax.
    fn reference(cumulative: &[f64], optimism: &[f64], eta: f64) -> Vec<f64> {
        let logits: Vec<f64> = cumulative.iter().zip(optimism).map(|(s, o)| eta * (s + o)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
        let z: f64 = e.iter().sum();
        e.iter().map(|x| x / z).collect()
    }

    #[test]
    fn experiment_defaults() {
        let c = ArOmdConfig::experiment(10_000);
        assert!((c.epsilon - 10_000f64.powf(-0.9)).abs() < 1e-15);
        assert!((c.learning_rate - (0.9 * 10_000f64.ln()).sqrt()).abs() < 1e-12);
        assert_eq!(c.switch_tolerance, 1e-6);
    }

    #[test]
    fn batch_start_is_uniform() {
        let mut p = ArOmd::new(&config(0.1, 2.0)).unwrap();
        let d = p.propose(0.7).unwrap();
        assert!(d.probs().iter().all(|&x| (x - 0.1).abs() < 1e-15));
    }

    #[test]
    fn matches_closed_form_on_random_rounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let eta = 3.0;
        let mut p = ArOmd::new(&config(0.02, eta)).unwrap();
        let mut sums = vec![0.0; p.grid().len()];
        let mut rival = 0.3;
        let mut ref_prev: Option<f64> = None;
        let mut ref_rounds = 0usize;
        for _ in 0..2000 {
            let v: f64 = rng.random();
            let optimism = p.optimism_vector(v);
            let expected = reference(&sums, &optimism, eta);
            let got = p.propose(v).unwrap().probs().to_vec();
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            if rng.random::<f64>() < 0.02 {
                rival = rng.random();
            }
            let round = AuctionRound::new(v, rival).unwrap();
            p.observe(&round).unwrap();
            let closes = ref_rounds > 0 && ref_prev.is_some_and(|q: f64| (q - rival).abs() >= 1e-6);
            ref_prev = Some(rival);
            if closes {
                sums.iter_mut().for_each(|s| *s = 0.0);
                ref_rounds = 0;
            } else {
                ref_rounds += 1;
                let r = crate::auction::expert_reward_vector(p.grid(), &round);
                for (s, x) in sums.iter_mut().zip(r) {
                    *s += x;
                }
            }
            for (a, b) in sums.iter().zip(p.cumulative_rewards()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_rival_concentrates_on_best_expert() {
        let mut p = ArOmd::new(&config(0.05, 3.0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let m = 0.33;
        let mut totals = vec![0.0; p.grid().len()];
        for _ in 0..100 {
            let v: f64 = rng.random();
            p.propose(v).unwrap();
            let round = AuctionRound::new(v, m).unwrap();
            for (t, r) in totals.iter_mut().zip(crate::auction::expert_reward_vector(p.grid(), &round)) {
                *t += r;
            }
            p.observe(&round).unwrap();
        }
        assert_eq!(p.batch_index(), 1);
        let d = p.propose(0.9).unwrap().probs().to_vec();
        let argmax = |x: &[f64]| {
            x.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap()
        };
        assert_eq!(argmax(&d), argmax(&totals));
    }

    #[test]
    fn switch_opens_a_fresh_batch() {
        let mut p = ArOmd::new(&config(0.1, 1.0)).unwrap();
        for (k, m) in [0.2, 0.2, 0.2, 0.6, 0.6].into_iter().enumerate() {
            p.propose(0.9).unwrap();
            p.observe(&AuctionRound::new(0.9, m).unwrap()).unwrap();
            if k == 3 {
                assert!(p.cumulative_rewards().iter().all(|&s| s == 0.0));
            }
        }
        // Round 4 opened batch two; its opening round may differ from m_3.
        assert_eq!(p.batch_starts().unwrap(), &[0, 4]);
        assert!(p.cumulative_rewards().iter().any(|&s| s > 0.0));
    }

    #[test]
    fn changes_below_tolerance_are_ignored() {
        let mut p = ArOmd::new(&config(0.1, 1.0)).unwrap();
        for m in [0.2, 0.2 + 1e-9, 0.2, 0.2 + 5e-7] {
            p.propose(0.9).unwrap();
            p.observe(&AuctionRound::new(0.9, m).unwrap()).unwrap();
        }
        assert_eq!(p.batch_starts().unwrap(), &[0]);
    }

    #[test]
    fn long_batches_stay_finite() {
        let mut p = ArOmd::new(&config(0.001, 5.0)).unwrap();
        for _ in 0..5000 {
            let d = p.propose(1.0).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-9);
            p.observe(&AuctionRound::new(1.0, 0.0).unwrap()).unwrap();
        }
        let d = p.propose(1.0).unwrap();
        assert!(d.probs()[0] > 0.99);
    }
}
