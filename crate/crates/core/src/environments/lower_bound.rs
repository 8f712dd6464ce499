//! Adversarial instances made of single-jump batches.
//!
//! Batches alternate between rising (`0` until the jump, `delta` from the
//! jump on) and falling (`delta` until the jump, `0` from the jump on), so
//! consecutive batches join without a seam jump and every batch contributes
//! exactly one change of size `delta` at most. Rounds left over after the
//! last batch repeat the final value.

use rand::Rng;

use super::EnvError;

/// Concatenates single-jump batches of length `len` with the given one-based
/// jump positions, padded to `total` rounds.
pub fn stitched_jump_batches(len: usize, delta: f64, taus: &[usize], total: usize) -> Vec<f64> {
    assert!(taus.len() * len <= total, "batches overflow the horizon");
    let mut out = Vec::with_capacity(total);
    for (j, &tau) in taus.iter().enumerate() {
        let rising = j % 2 == 0;
        for t in 1..=len {
            let after = t >= tau;
            out.push(if after == rising { delta } else { 0.0 });
        }
    }
    let last = out.last().copied().unwrap_or(0.0);
    out.resize(total, last);
    out
}

/// Batch length `H = floor(sqrt(T / V_T))` and the number of jump batches.
///
/// The batch count is capped at `floor(H * V_T)` so the total variation never
/// exceeds `V_T`.
pub fn lower_bound_vt_parameters(horizon: usize, variation: f64) -> Result<(usize, usize), EnvError> {
    let t = horizon as f64;
    if !(variation.is_finite() && variation >= 36.0 / t && variation <= t / 4.0) {
        return Err(EnvError::InvalidField {
            field: "variation_target",
            reason: format!("V_T = {variation} outside [36/T, T/4] for T = {horizon}"),
        });
    }
    let h = (t / variation).sqrt().floor() as usize;
    if h < 2 {
        return Err(EnvError::InvalidField {
            field: "variation_target",
            reason: format!("batch length {h} is below 2"),
        });
    }
    let batches = (horizon / h).min((h as f64 * variation).floor() as usize);
    Ok((h, batches))
}

/// Jumps of size `1/H` at uniform positions; `v_t = 1` throughout.
pub fn lower_bound_vt<R: Rng + ?Sized>(horizon: usize, variation: f64, rng: &mut R) -> Result<Vec<f64>, EnvError> {
    let (h, batches) = lower_bound_vt_parameters(horizon, variation)?;
    let taus: Vec<usize> = (0..batches).map(|_| rng.random_range(1..=h)).collect();
    Ok(stitched_jump_batches(h, 1.0 / h as f64, &taus, horizon))
}

/// `L_T` batches of length `floor(T / L_T)` with jumps of size 1/2.
pub fn lower_bound_lt<R: Rng + ?Sized>(horizon: usize, switches: usize, rng: &mut R) -> Result<Vec<f64>, EnvError> {
    if switches == 0 || 3 * switches > horizon {
        return Err(EnvError::InvalidField {
            field: "switch_target",
            reason: format!("L_T = {switches} outside [1, T/3] for T = {horizon}"),
        });
    }
    let h = horizon / switches;
    let taus: Vec<usize> = (0..switches).map(|_| rng.random_range(1..=h)).collect();
    Ok(stitched_jump_batches(h, 0.5, &taus, horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{switch_count, temporal_variation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_round_batches() {
        assert_eq!(stitched_jump_batches(2, 0.5, &[1], 2), vec![0.5, 0.5]);
        assert_eq!(stitched_jump_batches(2, 0.5, &[2], 2), vec![0.0, 0.5]);
        assert_eq!(stitched_jump_batches(2, 0.5, &[2, 2], 4), vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn falling_batch_mirrors_rising_batch() {
        for h in 2..8 {
            for tau in 1..=h {
                let rising = stitched_jump_batches(h, 0.25, &[tau], h);
                let both = stitched_jump_batches(h, 0.25, &[1, h + 2 - tau], 2 * h);
                let mut falling = both[h..].to_vec();
                falling.reverse();
                assert_eq!(falling, rising, "h={h} tau={tau}");
            }
        }
    }

    #[test]
    fn parameters_and_range() {
        assert_eq!(lower_bound_vt_parameters(10_000, 100.0).unwrap(), (10, 1000));
        assert!(lower_bound_vt_parameters(100, 0.1).is_err());
        assert!(lower_bound_vt_parameters(100, 30.0).is_err());
    }

    #[test]
    fn variation_and_switch_budgets_hold() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vt = 3.0 + seed as f64 * 0.37;
            let m = lower_bound_vt(2000, vt, &mut rng).unwrap();
            assert_eq!(m.len(), 2000);
            assert!(temporal_variation(&m) <= vt + 1e-9);
            let m = lower_bound_lt(900, 1 + seed as usize, &mut rng).unwrap();
            assert!(switch_count(&m, 0.0) <= 1 + seed as usize);
        }
    }

    #[test]
    fn one_switch_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = lower_bound_lt(30, 1, &mut rng).unwrap();
        assert!(switch_count(&m, 0.0) <= 1);
        assert_eq!(*m.last().unwrap(), 0.5);
        assert!(lower_bound_lt(30, 11, &mut rng).is_err());
        assert!(lower_bound_lt(30, 0, &mut rng).is_err());
    }
}
