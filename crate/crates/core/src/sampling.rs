//! Seeded, schedule-independent sampling.
//!
//! Work is cut into fixed-size chunks; chunk `c` draws from ChaCha8 seeded
//! with the run seed on stream `c`. Results are merged in chunk order, so the
//! outcome depends only on the seed and the sample count, never on the
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK: u64 = 4096;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `f(rng, count)` on each chunk of `samples` in parallel and returns
/// the per-chunk results in chunk order.
pub fn chunked<T, F>(samples: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            let mut rng = stream_rng(seed, c);
            f(&mut rng, count)
        })
        .collect()
}

/// 99% normal-approximation half-width of a binomial proportion.
pub fn binomial_half_width(p: f64, samples: u64) -> f64 {
    if samples == 0 {
        return 1.0;
    }
    2.5758293035489 * (p * (1.0 - p) / samples as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunking_is_deterministic() {
        let run = || -> u64 {
            chunked(10_000, 5, |rng, count| (0..count).map(|_| rng.random_range(0..10u64)).sum::<u64>())
                .into_iter()
                .sum()
        };
        assert_eq!(run(), run());
        let sizes = chunked(10_000, 1, |_, count| count);
        assert_eq!(sizes.iter().sum::<u64>(), 10_000);
        assert_eq!(sizes.len(), 3);
    }
}
