//! Cumulative-reward comparison against budget-pacing opponents.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, run_pacing_episode, HarnessError, PolicyKind, PolicySpec};
use crate::environments::{BudgetRegime, EnvironmentSpec, Pattern};

fn default_horizon() -> usize {
    12_000
}

fn default_regimes() -> Vec<BudgetRegime> {
    vec![BudgetRegime::Sufficient, BudgetRegime::Insufficient]
}

fn default_patterns() -> Vec<Pattern> {
    vec![Pattern::Constant]
}

fn default_alphas() -> Vec<f64> {
    vec![0.5]
}

fn default_policies() -> Vec<PolicySpec> {
    [
        PolicyKind::Hedge,
        PolicyKind::RestartHedge,
        PolicyKind::ArProd,
        PolicyKind::ArOmd,
        PolicyKind::Bobw,
    ]
    .into_iter()
    .map(PolicySpec::new)
    .collect()
}

fn default_runs() -> usize {
    50
}

fn default_opponents() -> usize {
    20
}

fn default_value_scale() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacingConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<BudgetRegime>,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<Pattern>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_opponents")]
    pub opponents: usize,
    #[serde(default = "default_value_scale")]
    pub value_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl Default for PacingConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl PacingConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon == 0 {
            return Err(HarnessError::config("horizon", "T must be at least 1"));
        }
        for (i, &a) in self.alphas.iter().enumerate() {
            if !(a.is_finite() && (0.0..=1.0).contains(&a)) {
                return Err(HarnessError::config(format!("alphas[{i}]"), format!("alpha must lie in [0, 1], got {a}")));
            }
        }
        if self.opponents == 0 {
            return Err(HarnessError::config("opponents", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.value_scale) {
            return Err(HarnessError::config("value_scale", "must lie in [0, 1]"));
        }
        for p in &self.policies {
            p.validate()?;
            if p.name == PolicyKind::Oracle {
                return Err(HarnessError::config("policies", "the oracle cannot play the pacing market"));
            }
        }
        Ok(())
    }

    pub fn environment(&self, regime: BudgetRegime, pattern: Pattern, alpha: f64, run: usize) -> EnvironmentSpec {
        let mut env = EnvironmentSpec::budget_pacing(
            pattern,
            regime,
            self.horizon,
            alpha,
            derive_seed(self.base_seed, run as u64),
        );
        env.opponents = self.opponents;
        env.budgets = vec![regime.budget(self.horizon); self.opponents];
        env.value_scale = self.value_scale;
        env
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacingSummary {
    pub regime: BudgetRegime,
    pub pattern: Pattern,
    pub alpha: f64,
    pub policy: String,
    /// Mean over runs of the cumulative expected reward.
    pub mean_reward: f64,
    /// Sample standard deviation across runs.
    pub std: f64,
    pub mean_regret: f64,
    pub runs: usize,
    /// Budget conservation held in every run.
    pub budget_conserved: bool,
}

/// One summary per `(regime, pattern, alpha, policy)`. Runs share seeds
/// across policies.
pub fn pacing_study(
    config: &PacingConfig,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<Vec<PacingSummary>, HarnessError> {
    config.validate()?;
    let mut groups = Vec::new();
    for &regime in &config.regimes {
        for &pattern in &config.patterns {
            for &alpha in &config.alphas {
                for policy in &config.policies {
                    groups.push((regime, pattern, alpha, policy));
                }
            }
        }
    }
    let total = groups.len();
    let mut out = Vec::with_capacity(total);
    for (k, (regime, pattern, alpha, policy)) in groups.into_iter().enumerate() {
        let episodes = (0..config.runs)
            .into_par_iter()
            .map(|run| run_pacing_episode(policy, &config.environment(regime, pattern, alpha, run)))
            .collect::<Result<Vec<_>, _>>()?;
        let rewards: Vec<f64> = episodes.iter().map(|e| e.trace.expected_reward()).collect();
        let n = rewards.len().max(1) as f64;
        let mean_reward = rewards.iter().sum::<f64>() / n;
        let std = if rewards.len() > 1 {
            (rewards.iter().map(|r| (r - mean_reward).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        out.push(PacingSummary {
            regime,
            pattern,
            alpha,
            policy: policy.label().to_owned(),
            mean_reward,
            std,
            mean_regret: episodes.iter().map(|e| e.trace.final_regret_expected()).sum::<f64>() / n,
            runs: episodes.len(),
            budget_conserved: episodes.iter().all(|e| e.budget_conserved()),
        });
        if let Some(report) = progress {
            report(k + 1, total);
        }
    }
    Ok(out)
}

pub const PACING_HEADER: [&str; 9] = [
    "regime",
    "pattern",
    "alpha",
    "policy",
    "mean_reward",
    "std",
    "mean_regret",
    "runs",
    "budget_conserved",
];

pub fn write_pacing_csv<W: Write>(rows: &[PacingSummary], writer: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(PACING_HEADER)?;
    for r in rows {
        w.write_record([
            r.regime.as_str().to_owned(),
            r.pattern.to_string(),
            r.alpha.to_string(),
            r.policy.clone(),
            r.mean_reward.to_string(),
            r.std.to_string(),
            r.mean_regret.to_string(),
            r.runs.to_string(),
            r.budget_conserved.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_protocol() {
        let c = PacingConfig::default();
        assert_eq!(c.horizon, 12_000);
        assert_eq!(c.runs, 50);
        assert_eq!(c.opponents, 20);
        assert_eq!(c.policies.len(), 5);
        let env = c.environment(BudgetRegime::Insufficient, Pattern::Constant, 0.5, 0);
        assert_eq!(env.budgets, vec![300.0; 20]);
    }

    #[test]
    fn small_study() {
        let c = PacingConfig {
            horizon: 300,
            runs: 3,
            regimes: vec![BudgetRegime::Insufficient],
            ..PacingConfig::default()
        };
        let rows = pacing_study(&c, None).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.budget_conserved && r.mean_reward > 0.0));
    }
}
