//! Learning to bid in non-stationary repeated first-price auctions.
//!
//! - [`auction`]: payoff model, dynamic benchmark, variation and switch metrics.
//! - [`policies`]: Hedge, restarted Hedge, adaptive-restart Prod, adaptive-restart
//!   optimistic mirror descent and their two-algorithm combiner.
//! - [`environments`]: rival-bid pattern generators, lower-bound instances and
//!   a budget-pacing opponent pool.
//! - [`harness`]: episodes, regret traces, decomposition, slope fitting, the
//!   exact minimax oracle and experiment sweeps.

pub mod auction;
pub mod environments;
pub mod harness;
pub mod policies;

pub use auction::{AuctionRound, AuctionSequence, BidGrid};
pub use policies::{BidDistribution, BiddingPolicy, PolicyError};
