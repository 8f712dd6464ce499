//! Slowly varying rival-bid patterns: concatenated single-jump blocks and a
//! sine wave.

use rand::Rng;

use super::{BlockKind, EnvError};

/// Minimum length of a single block.
pub const MIN_BLOCK_LENGTH: usize = 3;

/// Value of a block of length `len` with jump point `tau` at (one-based)
/// position `t`. Continuous in `t` so the formula can be inverted.
pub fn block_value(kind: BlockKind, t: f64, tau: f64, len: f64) -> f64 {
    if t <= tau {
        return 0.0;
    }
    match kind {
        BlockKind::Constant => 1.0,
        BlockKind::Exponential => 1.0 - (-10.0 * (t - tau) / len).exp(),
        BlockKind::Linear => (t - tau) / (len - tau),
    }
}

/// A block with an explicit jump point `tau` in `0..=len`.
pub fn building_block(kind: BlockKind, len: usize, tau: usize) -> Result<Vec<f64>, EnvError> {
    if len < MIN_BLOCK_LENGTH {
        return Err(EnvError::BlockTooShort(len));
    }
    if tau > len {
        return Err(EnvError::InvalidField {
            field: "tau",
            reason: format!("jump point {tau} exceeds block length {len}"),
        });
    }
    Ok((1..=len)
        .map(|t| block_value(kind, t as f64, tau as f64, len as f64).clamp(0.0, 1.0))
        .collect())
}

/// A block with `tau` uniform on `{1, ..., max(1, floor(beta * len))}`.
pub fn sample_building_block<R: Rng + ?Sized>(
    kind: BlockKind,
    len: usize,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<f64>, EnvError> {
    if len < MIN_BLOCK_LENGTH {
        return Err(EnvError::BlockTooShort(len));
    }
    let hi = ((beta * len as f64).floor() as usize).clamp(1, len);
    building_block(kind, len, rng.random_range(1..=hi))
}

/// `ceil(V_T)` blocks (at least one) of near-equal length covering `horizon`.
pub fn multi_segment<R: Rng + ?Sized>(
    kind: BlockKind,
    horizon: usize,
    variation: f64,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<f64>, EnvError> {
    let segments = (variation.ceil() as usize).max(1);
    if segments.saturating_mul(MIN_BLOCK_LENGTH) > horizon {
        return Err(EnvError::InfeasibleSegments(segments, horizon));
    }
    let base = horizon / segments;
    let extra = horizon % segments;
    let mut out = Vec::with_capacity(horizon);
    for s in 0..segments {
        let len = base + usize::from(s < extra);
        out.extend(sample_building_block(kind, len, beta, rng)?);
    }
    Ok(out)
}

/// `1/2 + 1/2 sin(V_T pi t / T)`.
pub fn sinusoidal_value(t: f64, horizon: usize, variation: f64) -> f64 {
    let phase = variation * std::f64::consts::PI * t / horizon.max(1) as f64;
    (0.5 + 0.5 * phase.sin()).clamp(0.0, 1.0)
}

/// Sine wave sampled at `t = 1, ..., T`.
pub fn sinusoidal(horizon: usize, variation: f64) -> Vec<f64> {
    (1..=horizon)
        .map(|t| sinusoidal_value(t as f64, horizon, variation))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::temporal_variation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_block_example() {
        assert_eq!(building_block(BlockKind::Constant, 4, 2).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn linear_block_without_jump() {
        assert!(building_block(BlockKind::Linear, 7, 7).unwrap().iter().all(|&x| x == 0.0));
        let b = building_block(BlockKind::Linear, 5, 1).unwrap();
        assert_eq!(b, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn exponential_half_life() {
        let (tau, len) = (4.0, 900.0);
        let t = tau + len * std::f64::consts::LN_2 / 10.0;
        assert!((block_value(BlockKind::Exponential, t, tau, len) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn short_blocks_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            sample_building_block(BlockKind::Constant, 2, 2.0 / 3.0, &mut rng),
            Err(EnvError::BlockTooShort(2))
        );
    }

    #[test]
    fn two_constant_segments() {
        // tau ranges over {1, 2} for length 3; find a seed with both tau = 1.
        let mut found = false;
        for seed in 0..64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = multi_segment(BlockKind::Constant, 6, 2.0, 2.0 / 3.0, &mut rng).unwrap();
            if m == [0.0, 1.0, 1.0, 0.0, 1.0, 1.0] {
                found = true;
            } else {
                assert!(m == [0.0, 0.0, 1.0, 0.0, 1.0, 1.0]
                    || m == [0.0, 1.0, 1.0, 0.0, 0.0, 1.0]
                    || m == [0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
            }
        }
        assert!(found);
    }

    #[test]
    fn single_segment_spans_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = multi_segment(BlockKind::Linear, 50, 1.0, 2.0 / 3.0, &mut rng).unwrap();
        assert_eq!(m.len(), 50);
        assert!(temporal_variation(&m) <= 1.0 + 1e-12);
        assert_eq!(m[0], 0.0);
        assert_eq!(*m.last().unwrap(), 1.0);
    }

    #[test]
    fn infeasible_segments_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            multi_segment(BlockKind::Constant, 8, 2.5, 2.0 / 3.0, &mut rng),
            Err(EnvError::InfeasibleSegments(3, 8))
        );
    }

    #[test]
    fn sine_examples() {
        assert_eq!(sinusoidal_value(0.0, 100, 5.0), 0.5);
        // V_T pi t / T = pi/2 at t = T / (2 V_T)
        assert!((sinusoidal_value(10.0, 100, 5.0) - 1.0).abs() < 1e-15);
        assert!(sinusoidal(40, 0.0).iter().all(|&x| x == 0.5));
    }
}
