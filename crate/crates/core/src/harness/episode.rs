//! Running one learner through one environment and recording the regret trace.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy_spec::oracle_bid;
use super::{derive_seed, BuildContext, HarnessError, Learner, PolicySpec, POLICY_STREAM, SAMPLING_STREAM};
use crate::auction::{switch_count, temporal_variation, AuctionRound, AuctionSequence};
use crate::environments::{EnvironmentSpec, PacingMarket};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub valuation: f64,
    pub rival_high_bid: f64,
    /// Sampled bid actually submitted.
    pub bid: f64,
    /// `<p_t, r_t>` under the proposed distribution.
    pub expected_reward: f64,
    pub realized_reward: f64,
    /// `max{v_t - m_t, 0}`.
    pub benchmark_increment: f64,
    /// Running benchmark minus running expected reward.
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub policy: String,
    pub environment: String,
    /// FNV-1a digest of the environment spec as JSON.
    pub env_digest: String,
    pub seed: u64,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_starts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub metadata: TraceMetadata,
    pub rounds: Vec<RoundRecord>,
}

pub const TRACE_HEADER: [&str; 9] = [
    "t",
    "valuation",
    "rival_high_bid",
    "bid",
    "expected_reward",
    "realized_reward",
    "benchmark_increment",
    "cumulative_regret",
    "cumulative_regret_realized",
];

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn benchmark(&self) -> f64 {
        self.rounds.iter().map(|r| r.benchmark_increment).sum()
    }

    pub fn expected_reward(&self) -> f64 {
        self.rounds.iter().map(|r| r.expected_reward).sum()
    }

    pub fn realized_reward(&self) -> f64 {
        self.rounds.iter().map(|r| r.realized_reward).sum()
    }

    /// Dynamic regret against expected rewards.
    pub fn final_regret_expected(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cumulative_regret)
    }

    /// Dynamic regret against the sampled bids' rewards.
    pub fn final_regret_realized(&self) -> f64 {
        self.benchmark() - self.realized_reward()
    }

    pub fn rival_bids(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.rival_high_bid).collect()
    }

    pub fn valuations(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.valuation).collect()
    }

    pub fn measured_variation(&self) -> f64 {
        temporal_variation(&self.rival_bids())
    }

    /// Number of rounds whose rival bid differs from the previous one.
    pub fn measured_switches(&self) -> usize {
        switch_count(&self.rival_bids(), 0.0)
    }

    pub fn sequence(&self) -> AuctionSequence {
        AuctionSequence::from_parts(&self.valuations(), &self.rival_bids()).expect("trace rounds are valid")
    }

    /// Largest gap between the stored cumulative regret and a fresh
    /// recomputation from the per-round columns.
    pub fn cumulative_discrepancy(&self) -> f64 {
        let (mut bench, mut reward, mut worst) = (0.0, 0.0, 0.0f64);
        for r in &self.rounds {
            bench += r.benchmark_increment;
            reward += r.expected_reward;
            worst = worst.max((bench - reward - r.cumulative_regret).abs());
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), HarnessError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(TRACE_HEADER)?;
        let (mut bench, mut realized) = (0.0, 0.0);
        for (t, r) in self.rounds.iter().enumerate() {
            bench += r.benchmark_increment;
            realized += r.realized_reward;
            w.write_record([
                (t + 1).to_string(),
                r.valuation.to_string(),
                r.rival_high_bid.to_string(),
                r.bid.to_string(),
                r.expected_reward.to_string(),
                r.realized_reward.to_string(),
                r.benchmark_increment.to_string(),
                r.cumulative_regret.to_string(),
                (bench - realized).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn metadata(policy: &str, env: &EnvironmentSpec, batch_starts: Option<Vec<usize>>) -> TraceMetadata {
    let json = serde_json::to_string(env).unwrap_or_default();
    TraceMetadata {
        policy: policy.to_owned(),
        environment: env.label(),
        env_digest: format!("{:016x}", fnv1a(json.as_bytes())),
        seed: env.seed,
        horizon: env.horizon,
        batch_starts,
    }
}

/// Accumulates records with the running sums kept separately so that the
/// cumulative column is exactly benchmark-so-far minus reward-so-far.
#[derive(Default)]
struct Recorder {
    rounds: Vec<RoundRecord>,
    benchmark: f64,
    reward: f64,
}

impl Recorder {
    fn with_capacity(n: usize) -> Self {
        Self {
            rounds: Vec::with_capacity(n),
            ..Self::default()
        }
    }

    fn push(&mut self, round: &AuctionRound, bid: f64, expected_reward: f64) {
        let benchmark_increment = round.margin();
        self.benchmark += benchmark_increment;
        self.reward += expected_reward;
        self.rounds.push(RoundRecord {
            valuation: round.valuation(),
            rival_high_bid: round.rival_high_bid(),
            bid,
            expected_reward,
            realized_reward: round.payoff(bid),
            benchmark_increment,
            cumulative_regret: self.benchmark - self.reward,
        });
    }
}

/// Plays `learner` on a pre-generated sequence. Bids are sampled from a
/// ChaCha stream seeded with `sampling_seed`.
pub fn run_sequence(
    learner: &mut Learner,
    sequence: &AuctionSequence,
    sampling_seed: u64,
) -> Result<(Vec<RoundRecord>, Option<Vec<usize>>), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(sampling_seed);
    let mut rec = Recorder::with_capacity(sequence.len());
    for (t, round) in sequence.rounds().iter().enumerate() {
        match learner {
            Learner::Oracle => {
                let bid = oracle_bid(round);
                rec.push(round, bid, round.payoff(bid));
            }
            Learner::Policy(policy) => {
                let name = policy.name();
                let fail = |source| HarnessError::Round {
                    policy: name.to_owned(),
                    round: t + 1,
                    source,
                };
                let dist = policy.propose(round.valuation()).map_err(fail)?;
                let expected = dist.expected_reward(round);
                let (_, bid) = dist.sample(&mut rng);
                policy.observe(round).map_err(fail)?;
                rec.push(round, bid, expected);
            }
        }
    }
    let starts = match learner {
        Learner::Policy(p) => p.batch_starts().map(<[usize]>::to_vec),
        Learner::Oracle => None,
    };
    Ok((rec.rounds, starts))
}

/// One episode of `policy` on `env`. Interactive environments are played
/// live; the trace then records the realized rival bids.
pub fn run_episode(policy: &PolicySpec, env: &EnvironmentSpec) -> Result<RegretTrace, HarnessError> {
    if env.is_interactive() {
        return run_pacing_episode(policy, env).map(|e| e.trace);
    }
    let sequence = env.generate()?;
    run_on_sequence(policy, env, &sequence)
}

/// Like [`run_episode`] but on an already generated sequence for `env`.
pub(crate) fn run_on_sequence(
    policy: &PolicySpec,
    env: &EnvironmentSpec,
    sequence: &AuctionSequence,
) -> Result<RegretTrace, HarnessError> {
    let ctx = BuildContext {
        horizon: sequence.len(),
        variation_hint: temporal_variation(&sequence.rival_bids()) + temporal_variation(&sequence.valuations()),
        seed: derive_seed(env.seed, POLICY_STREAM),
    };
    let mut learner = policy.build(&ctx)?;
    let (rounds, starts) = run_sequence(&mut learner, sequence, derive_seed(env.seed, SAMPLING_STREAM))?;
    Ok(RegretTrace {
        metadata: metadata(policy.label(), env, starts),
        rounds,
    })
}

/// Result of a budget-pacing episode.
#[derive(Debug, Clone, PartialEq)]
pub struct PacingEpisode {
    pub trace: RegretTrace,
    pub total_budget: f64,
    pub total_spent: f64,
    pub opponent_payments: f64,
}

impl PacingEpisode {
    /// Spend equals the sum of winning payments and never exceeds the budgets.
    pub fn budget_conserved(&self) -> bool {
        let tol = 1e-9 * self.total_budget.max(1.0);
        (self.total_spent - self.opponent_payments).abs() <= tol && self.total_spent <= self.total_budget + tol
    }
}

pub fn run_pacing_episode(policy: &PolicySpec, env: &EnvironmentSpec) -> Result<PacingEpisode, HarnessError> {
    let mut market = PacingMarket::new(env)?;
    let t = market.horizon();
    // Opponent values are not known ahead; assume the target variation plus
    // the expected variation of i.i.d. uniform valuations.
    let ctx = BuildContext {
        horizon: t,
        variation_hint: env.variation_target + t.saturating_sub(1) as f64 / 3.0,
        seed: derive_seed(env.seed, POLICY_STREAM),
    };
    let mut policy_box = match policy.build(&ctx)? {
        Learner::Policy(p) => p,
        Learner::Oracle => {
            return Err(HarnessError::config(
                "policy",
                "the oracle needs the rival bid in advance and cannot play an interactive environment",
            ))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(env.seed, SAMPLING_STREAM));
    let mut rec = Recorder::with_capacity(t);
    while !market.is_finished() {
        let round_no = market.round() + 1;
        let fail = |source| HarnessError::Round {
            policy: policy.label().to_owned(),
            round: round_no,
            source,
        };
        let v = market.learner_valuation();
        let dist = policy_box.propose(v).map_err(fail)?;
        let (_, bid) = dist.sample(&mut rng);
        let outcome = market.resolve(bid);
        let round = AuctionRound::new(v, outcome.rival_high_bid)
            .map_err(|e| fail(crate::policies::PolicyError::Auction(e)))?;
        let expected = dist.expected_reward(&round);
        policy_box.observe(&round).map_err(fail)?;
        rec.push(&round, bid, expected);
    }
    let episode = PacingEpisode {
        trace: RegretTrace {
            metadata: metadata(policy.label(), env, policy_box.batch_starts().map(<[usize]>::to_vec)),
            rounds: rec.rounds,
        },
        total_budget: market.total_initial_budget(),
        total_spent: market.total_spent(),
        opponent_payments: market.opponent_payments(),
    };
    if !episode.budget_conserved() {
        return Err(HarnessError::Conservation {
            spent: episode.total_spent,
            paid: episode.opponent_payments,
        });
    }
    Ok(episode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{BudgetRegime, EnvKind, Pattern};
    use crate::harness::PolicyKind;
    use crate::policies::{BiddingPolicy, FixedBid};

    fn example_one(t: usize) -> AuctionSequence {
        let m: Vec<f64> = (0..t).map(|k| if k < t / 2 { 0.0 } else { 0.5 }).collect();
        AuctionSequence::from_parts(&vec![1.0; t], &m).unwrap()
    }

    #[test]
    fn zero_bid_on_two_phase_instance() {
        let mut learner = Learner::Policy(Box::new(FixedBid::new(0.0).unwrap()) as Box<dyn BiddingPolicy>);
        let (rounds, _) = run_sequence(&mut learner, &example_one(1000), 0).unwrap();
        let trace = RegretTrace {
            metadata: metadata("fixed", &EnvironmentSpec::new(EnvKind::Constant, 1000, 0), None),
            rounds,
        };
        assert_eq!(trace.benchmark(), 750.0);
        assert_eq!(trace.expected_reward(), 500.0);
        assert_eq!(trace.final_regret_expected(), 250.0);
        assert_eq!(trace.final_regret_realized(), 250.0);
    }

    #[test]
    fn oracle_has_zero_regret() {
        for pattern in [Pattern::Constant, Pattern::Linear, Pattern::Sinusoidal, Pattern::Exponential] {
            let env = EnvironmentSpec::for_pattern(pattern, 400, 0.5, 2);
            let trace = run_episode(&PolicySpec::new(PolicyKind::Oracle), &env).unwrap();
            assert_eq!(trace.final_regret_expected(), 0.0);
            assert_eq!(trace.final_regret_realized(), 0.0);
        }
    }

    #[test]
    fn traces_are_reproducible() {
        let env = EnvironmentSpec::for_pattern(Pattern::Sinusoidal, 300, 0.5, 9);
        for kind in [PolicyKind::ArProd, PolicyKind::Bobw, PolicyKind::RestartHedge] {
            let a = run_episode(&PolicySpec::new(kind), &env).unwrap();
            let b = run_episode(&PolicySpec::new(kind), &env).unwrap();
            assert_eq!(a, b);
            assert!(a.cumulative_discrepancy() <= 1e-9);
        }
    }

    #[test]
    fn pacing_episode_conserves_budget() {
        let env = EnvironmentSpec::budget_pacing(Pattern::Constant, BudgetRegime::Insufficient, 800, 0.5, 4);
        let ep = run_pacing_episode(&PolicySpec::new(PolicyKind::ArProd), &env).unwrap();
        assert!(ep.budget_conserved());
        assert_eq!(ep.trace.len(), 800);
        assert!(run_pacing_episode(&PolicySpec::new(PolicyKind::Oracle), &env).is_err());
    }

    #[test]
    fn trace_csv_shape() {
        let env = EnvironmentSpec::for_pattern(Pattern::Linear, 30, 0.3, 1);
        let trace = run_episode(&PolicySpec::new(PolicyKind::Hedge), &env).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 31);
        assert!(text.starts_with("t,valuation,rival_high_bid,"));
        assert!(!text.contains('\r'));
    }
}
