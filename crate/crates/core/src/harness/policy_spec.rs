//! Declarative policy descriptions for configs and the CLI.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::auction::AuctionRound;
use crate::policies::{
    ArOmd, ArOmdConfig, ArProd, ArProdConfig, BiddingPolicy, Bobw, BobwConfig, FixedBid, HedgeConfig, PolicyError,
    RestartHedge,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Hedge,
    RestartHedge,
    ArProd,
    ArOmd,
    Bobw,
    Fixed,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Hedge,
        PolicyKind::RestartHedge,
        PolicyKind::ArProd,
        PolicyKind::ArOmd,
        PolicyKind::Bobw,
        PolicyKind::Fixed,
        PolicyKind::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Hedge => "hedge",
            PolicyKind::RestartHedge => "restart_hedge",
            PolicyKind::ArProd => "ar_prod",
            PolicyKind::ArOmd => "ar_omd",
            PolicyKind::Bobw => "bobw",
            PolicyKind::Fixed => "fixed",
            PolicyKind::Oracle => "oracle",
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            PolicyKind::Hedge => &["eta", "epsilon"],
            PolicyKind::RestartHedge => &["eta", "epsilon", "batch_size", "batch_scale"],
            PolicyKind::ArProd => &["eta", "epsilon", "c"],
            PolicyKind::ArOmd => &["eta", "epsilon", "switch_tolerance"],
            PolicyKind::Bobw => &["eta"],
            PolicyKind::Fixed => &["bid"],
            PolicyKind::Oracle => &[],
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

/// Optional overrides; anything left out takes the policy's experiment default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid: Option<f64>,
}

impl PolicyParams {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.eta.is_some() {
            out.push("eta");
        }
        if self.epsilon.is_some() {
            out.push("epsilon");
        }
        if self.c.is_some() {
            out.push("c");
        }
        if self.switch_tolerance.is_some() {
            out.push("switch_tolerance");
        }
        if self.batch_size.is_some() {
            out.push("batch_size");
        }
        if self.batch_scale.is_some() {
            out.push("batch_scale");
        }
        if self.bid.is_some() {
            out.push("bid");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: PolicyKind,
    #[serde(default)]
    pub params: PolicyParams,
    /// Name used in output files; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// What a policy may know before the first round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildContext {
    pub horizon: usize,
    /// `V_T + V_T^v`, used only to size restarted-Hedge batches.
    pub variation_hint: f64,
    pub seed: u64,
}

/// A learner for one episode. The oracle bids `optimal_bid` and therefore
/// needs the rival bid up front; it only runs on pre-generated sequences.
pub enum Learner {
    Policy(Box<dyn BiddingPolicy>),
    Oracle,
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::Policy(p) => p.name(),
            Learner::Oracle => "oracle",
        }
    }
}

impl std::fmt::Debug for Learner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Box<dyn BiddingPolicy>> for Learner {
    fn from(p: Box<dyn BiddingPolicy>) -> Self {
        Learner::Policy(p)
    }
}

/// Returns `optimal_bid` for the round; used by the oracle learner.
pub(crate) fn oracle_bid(round: &AuctionRound) -> f64 {
    crate::auction::optimal_bid(round)
}

impl PolicySpec {
    pub fn new(name: PolicyKind) -> Self {
        Self {
            name,
            params: PolicyParams::default(),
            label: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.name.as_str())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let allowed = self.name.allowed_params();
        for field in self.params.set_fields() {
            if !allowed.contains(&field) {
                return Err(HarnessError::config(
                    format!("policies.{}.params.{field}", self.name),
                    format!("not a parameter of {}", self.name),
                ));
            }
        }
        let p = &self.params;
        let checks = [
            ("eta", p.eta, false),
            ("epsilon", p.epsilon, false),
            ("c", p.c, false),
            ("batch_scale", p.batch_scale, false),
            ("switch_tolerance", p.switch_tolerance, true),
        ];
        for (field, value, zero_ok) in checks {
            if let Some(x) = value {
                let ok = x.is_finite() && (x > 0.0 || (zero_ok && x == 0.0));
                if !ok {
                    return Err(HarnessError::config(
                        format!("policies.{}.params.{field}", self.name),
                        format!("must be {}, got {x}", if zero_ok { "non-negative" } else { "positive" }),
                    ));
                }
            }
        }
        if let Some(e) = p.epsilon {
            if e > 1.0 {
                return Err(HarnessError::config(
                    format!("policies.{}.params.epsilon", self.name),
                    format!("must lie in (0, 1], got {e}"),
                ));
            }
        }
        if p.batch_size == Some(0) {
            return Err(HarnessError::config(
                format!("policies.{}.params.batch_size", self.name),
                "must be at least 1",
            ));
        }
        if self.name == PolicyKind::Bobw && p.eta.is_some_and(|e| e >= 1.0) {
            return Err(HarnessError::config("policies.bobw.params.eta", "must be below 1"));
        }
        if self.name == PolicyKind::Fixed {
            match p.bid {
                Some(b) if (0.0..=1.0).contains(&b) => {}
                Some(b) => {
                    return Err(HarnessError::config(
                        "policies.fixed.params.bid",
                        format!("must lie in [0, 1], got {b}"),
                    ))
                }
                None => return Err(HarnessError::config("policies.fixed.params.bid", "required")),
            }
        }
        Ok(())
    }

    pub fn build(&self, ctx: &BuildContext) -> Result<Learner, HarnessError> {
        self.validate()?;
        let wrap = |source: PolicyError| HarnessError::Build {
            policy: self.label().to_owned(),
            source,
        };
        let p = &self.params;
        let t = ctx.horizon;
        let policy: Box<dyn BiddingPolicy> = match self.name {
            PolicyKind::Oracle => return Ok(Learner::Oracle),
            PolicyKind::Hedge => {
                let mut c = HedgeConfig::plain(t);
                c.epsilon = p.epsilon.unwrap_or(c.epsilon);
                c.learning_rate = p.eta;
                Box::new(RestartHedge::new(&c).map_err(wrap)?.with_name("hedge"))
            }
            PolicyKind::RestartHedge => {
                let mut c = HedgeConfig::restarted(t, ctx.variation_hint, p.batch_scale.unwrap_or(1.0));
                c.epsilon = p.epsilon.unwrap_or(c.epsilon);
                c.batch_size = p.batch_size.unwrap_or(c.batch_size);
                c.learning_rate = p.eta;
                Box::new(RestartHedge::new(&c).map_err(wrap)?)
            }
            PolicyKind::ArProd => {
                let mut c = ArProdConfig::experiment(t);
                c.learning_rate = p.eta.unwrap_or(c.learning_rate);
                c.epsilon = p.epsilon.unwrap_or(c.epsilon);
                c.regularizer_floor = p.c.unwrap_or(c.regularizer_floor);
                Box::new(ArProd::new(&c).map_err(wrap)?)
            }
            PolicyKind::ArOmd => {
                let mut c = ArOmdConfig::experiment(t);
                c.learning_rate = p.eta.unwrap_or(c.learning_rate);
                c.epsilon = p.epsilon.unwrap_or(c.epsilon);
                c.switch_tolerance = p.switch_tolerance.unwrap_or(c.switch_tolerance);
                Box::new(ArOmd::new(&c).map_err(wrap)?)
            }
            PolicyKind::Bobw => {
                let mut c = BobwConfig::for_horizon(t);
                c.learning_rate = p.eta.unwrap_or(c.learning_rate);
                Box::new(
                    Bobw::new(
                        Box::new(ArProd::new(&ArProdConfig::experiment(t)).map_err(wrap)?),
                        Box::new(ArOmd::new(&ArOmdConfig::experiment(t)).map_err(wrap)?),
                        &c,
                        ctx.seed,
                    )
                    .map_err(wrap)?,
                )
            }
            PolicyKind::Fixed => Box::new(FixedBid::new(p.bid.unwrap_or(0.0)).map_err(wrap)?),
        };
        Ok(Learner::Policy(policy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full_specs() {
        let s: PolicySpec = serde_json::from_str(r#"{"name":"ar_prod"}"#).unwrap();
        assert_eq!(s, PolicySpec::new(PolicyKind::ArProd));
        let s: PolicySpec =
            serde_json::from_str(r#"{"name":"restart_hedge","params":{"batch_scale":2.0},"label":"rh2"}"#).unwrap();
        assert_eq!(s.label(), "rh2");
        assert!(serde_json::from_str::<PolicySpec>(r#"{"name":"exp3"}"#).is_err());
        assert!(serde_json::from_str::<PolicySpec>(r#"{"name":"hedge","params":{"gamma":1}}"#).is_err());
    }

    #[test]
    fn foreign_params_are_config_errors() {
        let mut s = PolicySpec::new(PolicyKind::ArOmd);
        s.params.c = Some(0.1);
        let err = s.validate().unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("params.c"));
        let mut f = PolicySpec::new(PolicyKind::Fixed);
        assert!(f.validate().is_err());
        f.params.bid = Some(0.3);
        f.validate().unwrap();
    }

    #[test]
    fn builds_every_policy() {
        let ctx = BuildContext {
            horizon: 500,
            variation_hint: 10.0,
            seed: 3,
        };
        for kind in PolicyKind::ALL {
            let mut spec = PolicySpec::new(kind);
            if kind == PolicyKind::Fixed {
                spec.params.bid = Some(0.5);
            }
            let learner = spec.build(&ctx).unwrap();
            assert_eq!(learner.name(), kind.as_str());
        }
    }
}
