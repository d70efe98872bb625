//! Monte Carlo plumbing: reproducible sub-streams and deterministic parallel folds.
//!
//! # Seeding scheme
//!
//! A [`Stream`] is identified by a 64-bit key. The key of a root stream is
//! `splitmix64(master_seed ^ fnv1a64(label))`; a child stream uses
//! `splitmix64(parent_key ^ fnv1a64(label))`. The 32-byte ChaCha8 seed is the
//! little-endian concatenation of four successive splitmix64 outputs started
//! from the key. Replicate `r` of a stream is the ChaCha8 generator with that
//! seed and stream id `r`.
//!
//! Replicates are processed in fixed chunks of [`CHUNK`] consecutive indices;
//! per-chunk accumulators are merged left to right in chunk order, so the result
//! of a fold is bit-identical for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

/// Replicates per work item.
pub const CHUNK: u64 = 512;

pub type ReplicateRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A keyed family of independent replicate generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(master_seed: u64, label: &str) -> Self {
        Stream {
            key: splitmix64(master_seed ^ fnv1a64(label.as_bytes())),
        }
    }

    pub fn from_key(key: u64) -> Self {
        Stream { key }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn child(&self, label: &str) -> Self {
        Stream {
            key: splitmix64(self.key ^ fnv1a64(label.as_bytes())),
        }
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut seed = [0u8; 32];
        let mut state = self.key;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        seed
    }

    pub fn replicate(&self, index: u64) -> ReplicateRng {
        let mut rng = ChaCha8Rng::from_seed(self.seed_bytes());
        rng.set_stream(index);
        rng
    }
}

/// Mergeable partial result of a fold over replicates.
pub trait Accumulator: Send {
    fn merge(&mut self, other: Self);
}

/// Folds `n` replicates of `stream` in parallel.
///
/// `init` builds a fresh accumulator and scratch space per chunk; `body` sees
/// the replicate's own generator and its index.
pub fn par_fold<A, S, I, B>(stream: &Stream, n: u64, init: I, body: B) -> Result<A>
where
    A: Accumulator,
    I: Fn() -> (A, S) + Sync,
    B: Fn(&mut A, &mut S, &mut ReplicateRng, u64) -> Result<()> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let seed = stream.seed_bytes();
    let partials: Vec<Result<A>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut acc, mut scratch) = init();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut rng = ChaCha8Rng::from_seed(seed);
            for r in lo..hi {
                rng.set_stream(r);
                rng.set_word_pos(0);
                body(&mut acc, &mut scratch, &mut rng, r)?;
            }
            Ok(acc)
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut total = match iter.next() {
        Some(first) => first?,
        None => init().0,
    };
    for part in iter {
        total.merge(part?);
    }
    Ok(total)
}

/// Streaming mean and variance (Welford), mergeable with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge_with(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl Accumulator for Moments {
    fn merge(&mut self, other: Self) {
        self.merge_with(&other);
    }
}

impl Accumulator for Vec<Moments> {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            a.merge_with(b);
        }
    }
}

/// Bivariate moments: means, variances and covariance of a paired sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairMoments {
    pub n: u64,
    pub mean_x: f64,
    pub mean_y: f64,
    m2x: f64,
    m2y: f64,
    cxy: f64,
}

impl PairMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2x += dx * (x - self.mean_x);
        self.m2y += dy * (y - self.mean_y);
        self.cxy += dx * (y - self.mean_y);
    }

    pub fn merge_with(&mut self, o: &PairMoments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let dx = o.mean_x - self.mean_x;
        let dy = o.mean_y - self.mean_y;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.m2x += o.m2x + dx * dx * na * nb / n;
        self.m2y += o.m2y + dy * dy * na * nb / n;
        self.cxy += o.cxy + dx * dy * na * nb / n;
        self.n += o.n;
    }

    fn denom(&self) -> f64 {
        if self.n < 2 {
            f64::INFINITY
        } else {
            (self.n - 1) as f64
        }
    }

    pub fn var_x(&self) -> f64 {
        (self.m2x / self.denom()).max(0.0)
    }

    pub fn var_y(&self) -> f64 {
        (self.m2y / self.denom()).max(0.0)
    }

    pub fn cov(&self) -> f64 {
        self.cxy / self.denom()
    }

    /// Standard error of `a·mean_x + b·mean_y`.
    pub fn linear_se(&self, a: f64, b: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let v = a * a * self.var_x() + b * b * self.var_y() + 2.0 * a * b * self.cov();
        (v.max(0.0) / self.n as f64).sqrt()
    }
}

impl Accumulator for Vec<PairMoments> {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            a.merge_with(b);
        }
    }
}

/// Success counts for a fixed set of events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials: u64,
    pub hits: Vec<u64>,
}

impl Tally {
    pub fn new(events: usize) -> Self {
        Tally {
            trials: 0,
            hits: vec![0; events],
        }
    }

    pub fn fraction(&self, event: usize) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits[event] as f64 / self.trials as f64
        }
    }
}

impl Accumulator for Tally {
    fn merge(&mut self, other: Self) {
        self.trials += other.trials;
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
    }
}

impl Accumulator for () {
    fn merge(&mut self, _other: Self) {}
}

impl<A: Accumulator, B: Accumulator> Accumulator for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

/// Binomial standard error of a proportion.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn child_streams_differ_and_are_stable() {
        let root = Stream::new(42, "exp");
        assert_eq!(root, Stream::new(42, "exp"));
        assert_ne!(root.child("a"), root.child("b"));
        assert_ne!(Stream::new(42, "exp"), Stream::new(43, "exp"));
    }

    #[test]
    fn replicate_generators_are_independent_of_chunking() {
        let s = Stream::new(1, "x");
        let direct: Vec<f64> = (0..1500u64).map(|r| s.replicate(r).random()).collect();
        let folded = par_fold(
            &s,
            1500,
            || (Vec::<Moments>::new(), ()),
            |_acc, _, rng, r| {
                let x: f64 = rng.random();
                assert_eq!(x, direct[r as usize]);
                Ok(())
            },
        );
        assert!(folded.is_ok());
    }

    #[test]
    fn fold_is_thread_count_invariant() {
        let s = Stream::new(9, "moments");
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                par_fold(
                    &s,
                    10_000,
                    || (Moments::default(), ()),
                    |acc, _, rng, _| {
                        acc.push(rng.random::<f64>());
                        Ok(())
                    },
                )
                .unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.se().to_bits(), b.se().to_bits());
        assert!((a.mean - 0.5).abs() < 4.0 * a.se());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 8.0, 0.25];
        let mut left = Moments::default();
        let mut right = Moments::default();
        for &x in &xs[..2] {
            left.push(x);
        }
        for &x in &xs[2..] {
            right.push(x);
        }
        left.merge_with(&right);
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((left.mean - mean).abs() < 1e-14);
        assert!((left.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_have_zero_spread() {
        let mut m = Moments::default();
        for _ in 0..1000 {
            m.push(0.1);
        }
        assert_eq!(m.mean, 0.1);
        assert_eq!(m.se(), 0.0);
    }

    #[test]
    fn pair_moments_covariance() {
        let mut p = PairMoments::default();
        let mut q = PairMoments::default();
        let data = [(1.0, 2.0), (2.0, 4.5), (3.0, 5.5), (4.0, 9.0), (5.0, 9.5)];
        for &(x, y) in &data[..3] {
            p.push(x, y);
        }
        for &(x, y) in &data[3..] {
            q.push(x, y);
        }
        p.merge_with(&q);
        let mx = 3.0;
        let my = data.iter().map(|d| d.1).sum::<f64>() / 5.0;
        let cov = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum::<f64>() / 4.0;
        assert!((p.cov() - cov).abs() < 1e-12);
        assert!((p.mean_y - my).abs() < 1e-14);
    }
}
