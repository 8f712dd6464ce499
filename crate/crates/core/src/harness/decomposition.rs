//! Splitting dynamic regret into per-batch static regret and transition cost.
//!
//! For a partition of the rounds into batches and a bid grid, let `G_j` be
//! the grid-restricted dynamic benchmark of batch `j` (best grid expert in
//! every round), `F_j` the payoff of the best single grid expert over the
//! batch and `R_j` the learner's expected payoff. Then
//! `S_j = F_j - R_j`, `C_j = G_j - F_j`, and `sum S + sum C` equals the
//! grid-restricted dynamic regret.

use serde::{Deserialize, Serialize};

use super::{HarnessError, RegretTrace};
use crate::auction::BidGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchTerms {
    pub start: usize,
    pub end: usize,
    /// Index of the best fixed grid expert over the batch.
    pub best_expert: usize,
    pub static_regret: f64,
    pub transition_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub batches: Vec<BatchTerms>,
    pub static_regret: f64,
    pub transition_cost: f64,
    /// Regret against the per-round best grid expert.
    pub grid_dynamic_regret: f64,
    /// True dynamic benchmark minus the grid-restricted one.
    pub discretization_gap: f64,
}

/// Decomposes `trace` over the batches starting at `boundaries`
/// (zero-based, starting with 0, strictly increasing, all below `T`).
pub fn regret_decomposition(
    trace: &RegretTrace,
    boundaries: &[usize],
    grid: &BidGrid,
) -> Result<DecompositionReport, HarnessError> {
    let t = trace.len();
    let bad = |reason: String| HarnessError::config("batch_boundaries", reason);
    if boundaries.first() != Some(&0) {
        return Err(bad("must start at round 0".into()));
    }
    if let Some(w) = boundaries.windows(2).find(|w| w[0] >= w[1]) {
        return Err(bad(format!("not strictly increasing at {} -> {}", w[0], w[1])));
    }
    if boundaries.last().is_some_and(|&b| b >= t) {
        return Err(bad(format!("boundary beyond the horizon {t}")));
    }

    let taus = grid.thresholds();
    let mut sums = vec![0.0; grid.len()];
    let mut batches = Vec::with_capacity(boundaries.len());
    let (mut total_s, mut total_c, mut grid_dynamic, mut learner, mut gap) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, &start) in boundaries.iter().enumerate() {
        let end = boundaries.get(j + 1).copied().unwrap_or(t);
        sums.iter_mut().for_each(|s| *s = 0.0);
        let (mut dynamic_j, mut learner_j) = (0.0, 0.0);
        for r in &trace.rounds[start..end] {
            let range = grid.winning_range(r.rival_high_bid, r.valuation);
            let best_round = if range.is_empty() { 0.0 } else { r.valuation - taus[range.start] };
            for (s, &tau) in sums[range.clone()].iter_mut().zip(&taus[range]) {
                *s += r.valuation - tau;
            }
            dynamic_j += best_round;
            learner_j += r.expected_reward;
            gap += r.benchmark_increment - best_round;
        }
        let (best_expert, best) = sums
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
        let static_regret = best - learner_j;
        let transition_cost = dynamic_j - best;
        total_s += static_regret;
        total_c += transition_cost;
        grid_dynamic += dynamic_j;
        learner += learner_j;
        batches.push(BatchTerms {
            start,
            end,
            best_expert,
            static_regret,
            transition_cost,
        });
    }
    Ok(DecompositionReport {
        batches,
        static_regret: total_s,
        transition_cost: total_c,
        grid_dynamic_regret: grid_dynamic - learner,
        discretization_gap: gap,
    })
}
