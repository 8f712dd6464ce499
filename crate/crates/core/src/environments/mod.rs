//! Generators for valuation and rival-bid sequences.
//!
//! Static environments (slowly varying patterns and the lower-bound
//! instances) are generated up front from an [`EnvironmentSpec`]. The
//! budget-pacing environment is interactive and lives in [`pacing`].

mod lower_bound;
pub mod pacing;
mod patterns;

pub use lower_bound::{lower_bound_lt, lower_bound_vt, lower_bound_vt_parameters, stitched_jump_batches};
pub use pacing::{BudgetRegime, PacingAgent, PacingMarket, PacingOutcome};
pub use patterns::{block_value, building_block, multi_segment, sample_building_block, sinusoidal, sinusoidal_value};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{AuctionError, AuctionSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid environment field {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("{0} segments of length >= 3 do not fit in a horizon of {1}")]
    InfeasibleSegments(usize, usize),
    #[error("building blocks need at least 3 rounds, got {0}")]
    BlockTooShort(usize),
    #[error("the budget-pacing environment is interactive and cannot be pre-generated")]
    Interactive,
    #[error(transparent)]
    Auction(#[from] AuctionError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> EnvError {
    EnvError::InvalidField {
        field,
        reason: reason.into(),
    }
}

/// Shape of a single block inside a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Constant,
    Exponential,
    Linear,
}

/// The four slowly varying rival-bid patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Constant,
    Exponential,
    Linear,
    Sinusoidal,
}

impl Pattern {
    pub fn block(self) -> Option<BlockKind> {
        match self {
            Pattern::Constant => Some(BlockKind::Constant),
            Pattern::Exponential => Some(BlockKind::Exponential),
            Pattern::Linear => Some(BlockKind::Linear),
            Pattern::Sinusoidal => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Constant => "constant",
            Pattern::Exponential => "exponential",
            Pattern::Linear => "linear",
            Pattern::Sinusoidal => "sinusoidal",
        }
    }

    /// Rival-bid (or opponent-value) sequence of length `horizon` with
    /// variation target `variation`.
    pub fn generate<R: Rng + ?Sized>(
        self,
        horizon: usize,
        variation: f64,
        beta: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>, EnvError> {
        match self.block() {
            Some(block) => multi_segment(block, horizon, variation, beta, rng),
            None => Ok(sinusoidal(horizon, variation)),
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(Pattern::Constant),
            "exponential" => Ok(Pattern::Exponential),
            "linear" => Ok(Pattern::Linear),
            "sinusoidal" => Ok(Pattern::Sinusoidal),
            other => Err(format!("unknown pattern `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Constant,
    Exponential,
    Linear,
    /// Multi-segment pattern with an explicit `pattern` block.
    MultiSegment,
    Sinusoidal,
    LowerBoundVt,
    LowerBoundLt,
    BudgetPacing,
}

fn default_beta() -> f64 {
    2.0 / 3.0
}

fn default_opponents() -> usize {
    20
}

fn default_value_scale() -> f64 {
    0.8
}

/// Declarative description of how `(v_t, m_t)` is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub kind: EnvKind,
    pub horizon: usize,
    /// `V_T`; the number of segments for block patterns is `ceil(V_T)`.
    #[serde(default)]
    pub variation_target: f64,
    /// `L_T` for the switching lower-bound instance.
    #[serde(default)]
    pub switch_target: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_opponents")]
    pub opponents: usize,
    /// Opponent budgets; empty means `T/20` each.
    #[serde(default)]
    pub budgets: Vec<f64>,
    #[serde(default = "default_value_scale")]
    pub value_scale: f64,
    /// Block pattern for `multi_segment`, opponent-value pattern for `budget_pacing`.
    #[serde(default)]
    pub pattern: Option<Pattern>,
    /// Half-width of independent per-opponent value noise (0 disables it).
    #[serde(default)]
    pub opponent_noise: f64,
}

/// `V_T = T^alpha / 4`.
pub fn variation_for_alpha(horizon: usize, alpha: f64) -> f64 {
    0.25 * (horizon as f64).powf(alpha)
}

impl EnvironmentSpec {
    pub fn new(kind: EnvKind, horizon: usize, seed: u64) -> Self {
        Self {
            kind,
            horizon,
            variation_target: 1.0,
            switch_target: 1,
            beta: default_beta(),
            seed,
            opponents: default_opponents(),
            budgets: Vec::new(),
            value_scale: default_value_scale(),
            pattern: None,
            opponent_noise: 0.0,
        }
    }

    /// Slope-experiment environment for one of the four patterns.
    pub fn for_pattern(pattern: Pattern, horizon: usize, alpha: f64, seed: u64) -> Self {
        let kind = match pattern {
            Pattern::Constant => EnvKind::Constant,
            Pattern::Exponential => EnvKind::Exponential,
            Pattern::Linear => EnvKind::Linear,
            Pattern::Sinusoidal => EnvKind::Sinusoidal,
        };
        Self {
            variation_target: variation_for_alpha(horizon, alpha),
            ..Self::new(kind, horizon, seed)
        }
    }

    pub fn budget_pacing(pattern: Pattern, regime: BudgetRegime, horizon: usize, alpha: f64, seed: u64) -> Self {
        let opponents = default_opponents();
        Self {
            kind: EnvKind::BudgetPacing,
            variation_target: variation_for_alpha(horizon, alpha),
            budgets: vec![regime.budget(horizon); opponents],
            opponents,
            pattern: Some(pattern),
            ..Self::new(EnvKind::BudgetPacing, horizon, seed)
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if !(self.variation_target.is_finite() && self.variation_target >= 0.0) {
            return Err(invalid("variation_target", format!("must be >= 0, got {}", self.variation_target)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", format!("must lie in (0, 1], got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.value_scale) {
            return Err(invalid("value_scale", format!("must lie in [0, 1], got {}", self.value_scale)));
        }
        if !(0.0..=1.0).contains(&self.opponent_noise) {
            return Err(invalid("opponent_noise", format!("must lie in [0, 1], got {}", self.opponent_noise)));
        }
        if self.budgets.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(invalid("budgets", "budgets must be finite and non-negative"));
        }
        if self.kind == EnvKind::MultiSegment && self.pattern.and_then(Pattern::block).is_none() {
            return Err(invalid("pattern", "multi_segment needs pattern constant, exponential or linear"));
        }
        if self.kind == EnvKind::BudgetPacing {
            if self.opponents == 0 {
                return Err(invalid("opponents", "must be at least 1"));
            }
            if !self.budgets.is_empty() && self.budgets.len() != self.opponents {
                return Err(invalid(
                    "budgets",
                    format!("expected {} budgets, got {}", self.opponents, self.budgets.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn is_interactive(&self) -> bool {
        self.kind == EnvKind::BudgetPacing
    }

    /// Short stable label for logs and CSV metadata.
    pub fn label(&self) -> String {
        let kind = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        format!(
            "{kind}:T={}:V={}:L={}:seed={}",
            self.horizon, self.variation_target, self.switch_target, self.seed
        )
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Learner valuations `v_t`: i.i.d. uniform, or identically 1 for the
    /// lower-bound instances.
    pub fn valuations(&self) -> Vec<f64> {
        match self.kind {
            EnvKind::LowerBoundVt | EnvKind::LowerBoundLt => vec![1.0; self.horizon],
            _ => {
                let mut rng = self.rng(VALUATION_STREAM);
                (0..self.horizon).map(|_| rng.random::<f64>()).collect()
            }
        }
    }

    /// Rival-bid sequence for static environments.
    pub fn rival_bids(&self) -> Result<Vec<f64>, EnvError> {
        self.validate()?;
        let mut rng = self.rng(RIVAL_STREAM);
        let t = self.horizon;
        match self.kind {
            EnvKind::Constant => multi_segment(BlockKind::Constant, t, self.variation_target, self.beta, &mut rng),
            EnvKind::Exponential => {
                multi_segment(BlockKind::Exponential, t, self.variation_target, self.beta, &mut rng)
            }
            EnvKind::Linear => multi_segment(BlockKind::Linear, t, self.variation_target, self.beta, &mut rng),
            EnvKind::MultiSegment => {
                let block = self.pattern.and_then(Pattern::block).expect("validated");
                multi_segment(block, t, self.variation_target, self.beta, &mut rng)
            }
            EnvKind::Sinusoidal => Ok(sinusoidal(t, self.variation_target)),
            EnvKind::LowerBoundVt => lower_bound_vt(t, self.variation_target, &mut rng),
            EnvKind::LowerBoundLt => lower_bound_lt(t, self.switch_target, &mut rng),
            EnvKind::BudgetPacing => Err(EnvError::Interactive),
        }
    }

    /// Full pre-generated sequence for static environments.
    pub fn generate(&self) -> Result<AuctionSequence, EnvError> {
        let rivals = self.rival_bids()?;
        Ok(AuctionSequence::from_parts(&self.valuations(), &rivals)?)
    }
}

pub(crate) const VALUATION_STREAM: u64 = 1;
pub(crate) const RIVAL_STREAM: u64 = 2;
pub(crate) const OPPONENT_NOISE_STREAM: u64 = 3;
