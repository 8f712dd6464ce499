//! Exact minimax regret on the single-jump instance.
//!
//! The instance has `v_t = 1` and a rival bid that jumps from 0 to `delta` at
//! a uniformly random round of `H`. Before the jump is seen, a bid strictly
//! between 0 and `delta` is beaten by bidding 0, and anything above `delta`
//! by bidding `delta`; once the jump is seen, bidding `delta` is regret-free.
//! With `k` rounds left and no jump yet, the jump happens now with
//! probability `1/k`, giving
//!
//! ```text
//! V(0) = 0
//! V(k) = min( (1/k)(1 - delta) + (1 - 1/k) V(k-1),   // bid 0
//!             (1 - 1/k)(delta + V(k-1)) )             // bid delta
//! ```

use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;

use super::HarnessError;

fn backward_induction<T>(horizon: usize, delta: T, zero: T, one: T, from_usize: impl Fn(usize) -> T) -> T
where
    T: Copy + PartialOrd + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T>,
{
    let mut value = zero;
    for k in 1..=horizon {
        let p = one / from_usize(k);
        let bid_zero = p * (one - delta) + (one - p) * value;
        let bid_delta = (one - p) * (delta + value);
        value = if bid_delta < bid_zero { bid_delta } else { bid_zero };
    }
    value
}

fn check_horizon(horizon: usize) -> Result<(), HarnessError> {
    if horizon < 2 {
        return Err(HarnessError::config("H", format!("must be at least 2, got {horizon}")));
    }
    Ok(())
}

/// Minimal expected regret of any non-anticipating policy.
pub fn dp_minimax_oracle(horizon: usize, delta: f64) -> Result<f64, HarnessError> {
    check_horizon(horizon)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(HarnessError::config("delta", format!("must lie in [0, 1], got {delta}")));
    }
    Ok(backward_induction(horizon, delta, 0.0, 1.0, |k| k as f64))
}

/// Same recursion in exact rational arithmetic.
pub fn dp_minimax_oracle_exact(horizon: usize, delta: Ratio<i128>) -> Result<Ratio<i128>, HarnessError> {
    check_horizon(horizon)?;
    let (zero, one) = (Ratio::from_integer(0), Ratio::from_integer(1));
    if delta < zero || delta > one {
        return Err(HarnessError::config("delta", format!("must lie in [0, 1], got {delta}")));
    }
    Ok(backward_induction(horizon, delta, zero, one, |k| Ratio::from_integer(k as i128)))
}

/// `1/2 - 1/(2H)`.
pub fn lemma_bound(horizon: usize) -> f64 {
    0.5 - 0.5 / horizon as f64
}

/// `1/2 - 1/(2H)` as an exact fraction.
pub fn lemma_bound_exact(horizon: usize) -> Ratio<i128> {
    Ratio::new(1, 2) - Ratio::new(1, 2 * horizon as i128)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rounds_half_jump() {
        assert_eq!(dp_minimax_oracle(2, 0.5).unwrap(), 0.25);
    }

    #[test]
    fn no_jump_no_regret() {
        assert_eq!(dp_minimax_oracle(7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_value_meets_the_bound() {
        for h in 2..=12 {
            let v = dp_minimax_oracle_exact(h, Ratio::new(1, h as i128)).unwrap();
            assert!(v >= lemma_bound_exact(h), "H={h}");
            let approx = dp_minimax_oracle(h, 1.0 / h as f64).unwrap();
            assert!((approx - *v.numer() as f64 / *v.denom() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_short_horizons() {
        assert!(dp_minimax_oracle(1, 0.5).is_err());
        assert!(dp_minimax_oracle(3, 1.5).is_err());
    }
}
