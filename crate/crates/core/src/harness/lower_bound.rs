//! Empirical checks that every policy pays at least the minimax rate on the
//! adversarial single-jump instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, run_episode, HarnessError, PolicySpec};
use crate::environments::{EnvKind, EnvironmentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LowerBoundInstance {
    /// Jumps of size `1/H` with total variation at most `V_T`.
    Variation { horizon: usize, variation: f64 },
    /// Jumps of size 1/2 with at most `L_T` switches.
    Switching { horizon: usize, switches: usize },
}

impl LowerBoundInstance {
    pub fn environment(&self, seed: u64) -> EnvironmentSpec {
        match *self {
            LowerBoundInstance::Variation { horizon, variation } => EnvironmentSpec {
                variation_target: variation,
                ..EnvironmentSpec::new(EnvKind::LowerBoundVt, horizon, seed)
            },
            LowerBoundInstance::Switching { horizon, switches } => EnvironmentSpec {
                switch_target: switches,
                ..EnvironmentSpec::new(EnvKind::LowerBoundLt, horizon, seed)
            },
        }
    }

    /// `sqrt(T V_T) / 16` or `L_T / 8`.
    pub fn bound(&self) -> f64 {
        match *self {
            LowerBoundInstance::Variation { horizon, variation } => (horizon as f64 * variation).sqrt() / 16.0,
            LowerBoundInstance::Switching { switches, .. } => switches as f64 / 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub policy: String,
    pub instance: LowerBoundInstance,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation of the final expected regret.
    pub std: f64,
    pub bound: f64,
    /// Three standard errors.
    pub slack: f64,
    pub passed: bool,
}

/// Mean expected regret over `runs` seeds, compared one-sidedly with the
/// bound after allowing three standard errors.
pub fn empirical_lower_bound(
    policy: &PolicySpec,
    instance: LowerBoundInstance,
    runs: usize,
    base_seed: u64,
) -> Result<LowerBoundCheck, HarnessError> {
    if runs < 2 {
        return Err(HarnessError::config("runs", "need at least 2 runs"));
    }
    let regrets = (0..runs)
        .into_par_iter()
        .map(|run| {
            let env = instance.environment(derive_seed(base_seed, run as u64));
            run_episode(policy, &env).map(|t| t.final_regret_expected())
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let n = regrets.len() as f64;
    let mean = regrets.iter().sum::<f64>() / n;
    let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    let slack = 3.0 * std / n.sqrt();
    let bound = instance.bound();
    Ok(LowerBoundCheck {
        policy: policy.label().to_owned(),
        instance,
        runs,
        mean,
        std,
        bound,
        slack,
        passed: mean + slack >= bound,
    })
}
