//! Explicit, splittable random streams.
//!
//! Every sampler takes a `&mut RandomStream`; there is no global generator.
//! A stream is a ChaCha8 generator keyed by `seed` with the ChaCha stream
//! counter set to `stream_id`, so replicate `i` of an experiment can be
//! regenerated in isolation and in any order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for replicate `index` inside a named block of an experiment.
    ///
    /// The block occupies the top 24 bits of the stream id, the replicate the
    /// low 40 bits.
    pub fn replicate(seed: u64, block: u32, index: u64) -> Self {
        debug_assert!(index < (1 << 40));
        Self::new(seed, ((block as u64) << 40) | index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = RandomStream::new(7, 3);
        let mut b = RandomStream::new(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let n = 100_000;
        let mut a = RandomStream::new(11, 0);
        let mut b = RandomStream::new(11, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho = {rho}");
    }

    #[test]
    fn replicate_streams_are_distinct() {
        let mut a = RandomStream::replicate(5, 1, 0);
        let mut b = RandomStream::replicate(5, 2, 0);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_eq!(RandomStream::replicate(5, 2, 9).stream_id(), (2u64 << 40) | 9);
    }
}
