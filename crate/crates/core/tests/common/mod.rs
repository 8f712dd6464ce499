//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use bidcraft::auction::{AuctionRound, BidGrid};

/// Payoff straight from the definition.
pub fn naive_reward(bid: f64, v: f64, m: f64) -> f64 {
    if bid >= m {
        v - bid
    } else {
        0.0
    }
}

/// Minimal expected regret on the single-jump instance, found by trying
/// every deterministic policy that maps (round, what has been seen) to a bid
/// from `{0, delta/2, delta, (1+delta)/2, 1}`.
///
/// Before round `t` the learner has either seen no jump, or seen the jump at
/// some round `u < t`. Randomized policies are mixtures of these, so the
/// minimum over deterministic ones is the minimum over all of them.
pub fn brute_force_minimax(h: usize, delta: f64) -> f64 {
    let bids = [0.0, delta / 2.0, delta, (1.0 + delta) / 2.0, 1.0];
    // slot index for (t, seen) with t one-based and seen in {None, Some(1..t)}
    let slot = |t: usize, seen: Option<usize>| -> usize {
        let base = (t - 1) * t / 2;
        base + seen.unwrap_or(0)
    };
    let slots = h * (h + 1) / 2;
    let total = bids.len().pow(slots as u32);
    let mut choice = vec![0usize; slots];
    let mut best = f64::INFINITY;
    for code in 0..total {
        let mut c = code;
        for x in choice.iter_mut() {
            *x = c % bids.len();
            c /= bids.len();
        }
        let mut regret = 0.0;
        for tau in 1..=h {
            for t in 1..=h {
                let m = if t >= tau { delta } else { 0.0 };
                let seen = if tau < t { Some(tau) } else { None };
                let bid = bids[choice[slot(t, seen)]];
                regret += (1.0 - m) - naive_reward(bid, 1.0, m);
            }
        }
        best = best.min(regret / h as f64);
    }
    best
}

/// Per-round best grid expert payoff, by scanning every expert.
pub fn grid_best(grid: &BidGrid, round: &AuctionRound) -> f64 {
    grid.thresholds()
        .iter()
        .map(|&tau| naive_reward(round.valuation().min(tau), round.valuation(), round.rival_high_bid()))
        .fold(0.0, f64::max)
}

/// `sup_b |r_a(b) - r_b(b)|` by dense scanning plus left limits at the rival bids.
pub fn scanned_sup(a: &AuctionRound, b: &AuctionRound, points: usize) -> f64 {
    let diff = |x: f64| {
        (naive_reward(x, a.valuation(), a.rival_high_bid()) - naive_reward(x, b.valuation(), b.rival_high_bid())).abs()
    };
    let mut best = (0..=points).map(|k| diff(k as f64 / points as f64)).fold(0.0, f64::max);
    for m in [a.rival_high_bid(), b.rival_high_bid()] {
        if m > 0.0 {
            let below = |x: f64, v: f64, mm: f64| if x >= mm { v - x } else { 0.0 };
            // left limit: bid just under m loses against m but not against a smaller rival bid
            let ra = if m <= a.rival_high_bid() { 0.0 } else { below(m, a.valuation(), a.rival_high_bid()) };
            let rb = if m <= b.rival_high_bid() { 0.0 } else { below(m, b.valuation(), b.rival_high_bid()) };
            best = best.max((ra - rb).abs());
        }
    }
    best
}

/// Default spec for `kind`; the fixed-bid policy gets a bid derived from `seed`.
pub fn spec_for(kind: bidcraft::harness::PolicyKind, seed: u64) -> bidcraft::harness::PolicySpec {
    let mut spec = bidcraft::harness::PolicySpec::new(kind);
    if kind == bidcraft::harness::PolicyKind::Fixed {
        spec.params.bid = Some((seed % 1001) as f64 / 1000.0);
    }
    spec
}
