//! Packed bit-string solutions, standard bit-wise mutation and the seeded
//! random source every stochastic component draws from.
//!
//! The generator is ChaCha8 as implemented by `rand_chacha` 0.3, seeded via
//! `SeedableRng::seed_from_u64`. Both the block function and the seed
//! expansion are specified by those crates independently of the target
//! platform, so a seed reproduces the same stream everywhere.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Name of the generator algorithm, recorded in outputs that depend on it.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.3/seed_from_u64";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitError {
    #[error("bit-string length must be at least 1")]
    EmptyLength,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid character {0:?} in bit-string (expected '0' or '1')")]
    InvalidChar(char),
}

/// Deterministic pseudo-random source. Single owner; never shared between
/// concurrent trials.
#[derive(Debug, Clone)]
pub struct RandomSource(ChaCha8Rng);

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Seed of stream `index` within stream family `stream` under `master`.
///
/// Each input is folded in with a SplitMix64 finalizer, so nearby inputs
/// give unrelated seeds and the result depends only on the three values,
/// never on scheduling order.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ stream) ^ index)
}

/// A solution in `{0,1}^n`, stored as packed 64-bit words with a cached
/// one-count. Position 0 is the leftmost bit.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
    ones: usize,
}

fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Result<Self, BitError> {
        if len == 0 {
            return Err(BitError::EmptyLength);
        }
        Ok(BitString {
            words: vec![0; word_count(len)],
            len,
            ones: 0,
        })
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self, BitError> {
        let mut x = Self::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                x.set(i, true);
            }
        }
        Ok(x)
    }

    /// `1^ones 0^(len - ones)`.
    pub fn leading_ones(len: usize, ones: usize) -> Result<Self, BitError> {
        let mut x = Self::zeros(len)?;
        for i in 0..ones.min(len) {
            x.set(i, true);
        }
        Ok(x)
    }

    /// Builds the string whose bits are the low `len` bits of `code`, with
    /// bit `i` of `code` at position `i`. Used for exhaustive enumeration.
    pub fn from_index(len: usize, code: u64) -> Result<Self, BitError> {
        assert!(len <= 64, "from_index supports at most 64 positions");
        let mut x = Self::zeros(len)?;
        let mask = if len == 64 {
            u64::MAX
        } else {
            (1u64 << len) - 1
        };
        x.words[0] = code & mask;
        x.ones = x.words[0].count_ones() as usize;
        Ok(x)
    }

    /// Inverse of [`BitString::from_index`]; only valid for `len <= 64`.
    pub fn to_index(&self) -> u64 {
        assert!(self.len <= 64);
        self.words[0]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false: zero-length strings cannot be constructed.
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn ones(&self) -> usize {
        self.ones
    }

    #[inline]
    pub fn zeros_count(&self) -> usize {
        self.len - self.ones
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        if self.get(i) != value {
            self.flip(i);
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        let w = &mut self.words[i / 64];
        if *w & mask != 0 {
            self.ones -= 1;
        } else {
            self.ones += 1;
        }
        *w ^= mask;
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.clear_tail();
        out.ones = self.len - self.ones;
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }

    /// Positions of 1-bits in increasing order.
    pub fn iter_ones(&self) -> OnesIter<'_> {
        OnesIter {
            words: &self.words,
            word_idx: 0,
            current: self.words[0],
        }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Number of differing positions.
    pub fn hamming(&self, other: &BitString) -> Result<usize, BitError> {
        if self.len != other.len {
            return Err(BitError::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Number of 1-bits among positions `0..end`.
    pub fn ones_in_prefix(&self, end: usize) -> usize {
        let end = end.min(self.len);
        let full = end / 64;
        let mut count: usize = self.words[..full]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum();
        let rem = end % 64;
        if rem != 0 {
            count += (self.words[full] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        count
    }
}

pub struct OnesIter<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for OnesIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let tz = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word_idx * 64 + tz);
            }
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self}, ones={})", self.ones)
    }
}

impl FromStr for BitString {
    type Err = BitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitError::InvalidChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        BitString::from_bools(&bits)
    }
}

/// Uniformly random string of length `n`: every bit is 1 with probability 1/2.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<BitString, BitError> {
    let mut x = BitString::zeros(n)?;
    for w in &mut x.words {
        *w = rng.next_u64();
    }
    x.clear_tail();
    x.ones = x.words.iter().map(|w| w.count_ones() as usize).sum();
    Ok(x)
}

/// Standard bit-wise mutation: every position flips independently with
/// probability `1/n`. The input is left untouched.
pub fn mutate<R: Rng + ?Sized>(x: &BitString, rng: &mut R) -> BitString {
    let mut out = x.clone();
    flip_positions(&mut out, rng);
    out
}

/// [`mutate`] writing into a reusable buffer.
pub fn mutate_into<R: Rng + ?Sized>(x: &BitString, out: &mut BitString, rng: &mut R) {
    out.clone_from(x);
    flip_positions(out, rng);
}

/// Walks the flipped positions by geometric gap sampling. The gap between
/// consecutive flips of independent Bernoulli(p) trials is Geometric(p), so
/// the set of flipped positions has the same law as per-bit draws while
/// costing O(1 + flips) random numbers.
fn flip_positions<R: Rng + ?Sized>(x: &mut BitString, rng: &mut R) {
    let n = x.len;
    if n == 1 {
        x.flip(0);
        return;
    }
    let log_q = (-1.0 / n as f64).ln_1p();
    let mut pos = 0usize;
    loop {
        // u in (0, 1]
        let u = 1.0 - rng.gen::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap.is_nan() || gap >= (n - pos) as f64 {
            return;
        }
        pos += gap as usize;
        x.flip(pos);
        pos += 1;
        if pos >= n {
            return;
        }
    }
}

/// Reference per-bit implementation of the mutation operator. Kept for
/// distributional comparison with the fast path.
pub fn mutate_per_bit<R: Rng + ?Sized>(x: &BitString, rng: &mut R) -> BitString {
    let p = 1.0 / x.len() as f64;
    let mut out = x.clone();
    for i in 0..x.len() {
        if rng.gen_bool(p) {
            out.flip(i);
        }
    }
    out
}

pub fn hamming(x: &BitString, y: &BitString) -> Result<usize, BitError> {
    x.hamming(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::mock::StepRng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn derived_seeds_are_frozen() {
        // Changing these silently changes every recorded experiment.
        assert_eq!(derive_seed(0, 0, 0), 0x2382_75bc_38fc_be91);
        assert_eq!(derive_seed(42, 3, 7), 0xab2f_9774_6e2e_a953);
        assert_ne!(derive_seed(1, 0, 0), derive_seed(0, 1, 0));
    }

    #[test]
    fn zero_length_rejected() {
        assert_eq!(BitString::zeros(0), Err(BitError::EmptyLength));
        let mut rng = RandomSource::new(1);
        assert_eq!(sample_uniform(0, &mut rng), Err(BitError::EmptyLength));
    }

    #[test]
    fn single_bit_all_ones_stream() {
        let mut rng = StepRng::new(u64::MAX, 0);
        let x = sample_uniform(1, &mut rng).unwrap();
        assert_eq!(x.to_string(), "1");
        assert_eq!(x.ones(), 1);
    }

    #[test]
    fn sample_regression_value() {
        // Frozen output of the pinned generator; changes here break every
        // recorded experiment.
        let mut rng = RandomSource::new(20_240_601);
        let x = sample_uniform(4, &mut rng).unwrap();
        assert_eq!(x.to_string(), SAMPLE_N4_SEED_20240601);
        let mut rng = RandomSource::new(20_240_601);
        assert_eq!(sample_uniform(4, &mut rng).unwrap(), x);
    }

    const SAMPLE_N4_SEED_20240601: &str = "1100";

    #[test]
    fn sample_mean_ones() {
        let mut rng = RandomSource::new(7);
        let trials = 100_000;
        let total: usize = (0..trials)
            .map(|_| sample_uniform(20, &mut rng).unwrap().ones())
            .sum();
        let mean = total as f64 / trials as f64;
        let sigma = (20.0f64 * 0.25 / trials as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn single_bit_mutation_always_flips() {
        let mut rng = RandomSource::new(3);
        let x = bs("0");
        for _ in 0..100 {
            assert_eq!(mutate(&x, &mut rng).to_string(), "1");
        }
        assert_eq!(x.to_string(), "0");
    }

    fn unchanged_fraction(s: &str, trials: usize, seed: u64) -> f64 {
        let x = bs(s);
        let mut rng = RandomSource::new(seed);
        let same = (0..trials).filter(|_| mutate(&x, &mut rng) == x).count();
        same as f64 / trials as f64
    }

    #[test]
    fn mutation_keep_probability_n2() {
        let trials = 100_000;
        let p = 0.25;
        let f = unchanged_fraction("10", trials, 11);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((f - p).abs() < 3.0 * sigma, "{f}");
    }

    #[test]
    fn mutation_keep_probability_n3() {
        let trials = 100_000;
        let p = 8.0 / 27.0;
        let f = unchanged_fraction("000", trials, 12);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((f - p).abs() < 3.0 * sigma, "{f}");
    }

    #[test]
    fn mutation_matches_per_bit_reference() {
        // Per-position flip frequencies and the flip-count law for n = 37
        // (crosses no word boundary) and n = 70 (crosses one).
        for &n in &[37usize, 70] {
            let x = BitString::zeros(n).unwrap();
            let trials = 200_000;
            let mut rng = RandomSource::new(99 + n as u64);
            let mut per_pos = vec![0usize; n];
            let mut flips_hist = [0usize; 6];
            for _ in 0..trials {
                let y = mutate(&x, &mut rng);
                for i in y.iter_ones() {
                    per_pos[i] += 1;
                }
                flips_hist[y.ones().min(5)] += 1;
            }
            let p = 1.0 / n as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            for (i, &c) in per_pos.iter().enumerate() {
                let f = c as f64 / trials as f64;
                assert!((f - p).abs() < 4.5 * sigma, "n={n} pos {i}: {f}");
            }
            // Binomial(n, 1/n) masses for 0, 1, 2 flips
            for (h, &count) in flips_hist.iter().enumerate().take(3) {
                let mut pmf = (1.0 - p).powi((n - h) as i32) * p.powi(h as i32);
                for t in 0..h {
                    pmf *= (n - t) as f64 / (t + 1) as f64;
                }
                let f = count as f64 / trials as f64;
                let s = (pmf * (1.0 - pmf) / trials as f64).sqrt();
                assert!((f - pmf).abs() < 4.0 * s, "n={n} h={h}: {f} vs {pmf}");
            }
        }
    }

    #[test]
    fn ones_change_law() {
        // ones(mutate(x)) - ones(x) ~ Y - X, X ~ B(j, 1/n), Y ~ B(n-j, 1/n)
        let n = 10usize;
        let x = bs("1111110000");
        let j = x.ones();
        let p = 1.0 / n as f64;
        let binom = |m: usize, a: usize| -> f64 {
            if a > m {
                return 0.0;
            }
            let mut c = 1.0;
            for t in 0..a {
                c *= (m - t) as f64 / (t + 1) as f64;
            }
            c * p.powi(a as i32) * (1.0 - p).powi((m - a) as i32)
        };
        let trials = 200_000;
        let mut rng = RandomSource::new(5);
        let mut hist = std::collections::HashMap::<i64, usize>::new();
        for _ in 0..trials {
            let y = mutate(&x, &mut rng);
            *hist.entry(y.ones() as i64 - j as i64).or_default() += 1;
        }
        for delta in -2i64..=2 {
            let mut expect = 0.0;
            for a in 0..=j {
                let b = a as i64 + delta;
                if b >= 0 {
                    expect += binom(j, a) * binom(n - j, b as usize);
                }
            }
            let f = *hist.get(&delta).unwrap_or(&0) as f64 / trials as f64;
            let s = (expect * (1.0 - expect) / trials as f64).sqrt();
            assert!(
                (f - expect).abs() < 4.0 * s,
                "delta {delta}: {f} vs {expect}"
            );
        }
    }

    #[test]
    fn mutation_is_deterministic_per_state() {
        let x = bs("0101010101010101");
        let mut a = RandomSource::new(42);
        let mut b = a.clone();
        assert_eq!(mutate(&x, &mut a), mutate(&x, &mut b));
        let mut buf = BitString::zeros(16).unwrap();
        let mut c = RandomSource::new(42);
        mutate_into(&x, &mut buf, &mut c);
        assert_eq!(buf, mutate(&x, &mut RandomSource::new(42)));
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&bs("000"), &bs("000")), Ok(0));
        assert_eq!(hamming(&bs("10110"), &bs("11010")), Ok(2));
        let x = bs("1011001110001");
        assert_eq!(hamming(&x, &x.complement()), Ok(13));
        assert_eq!(
            hamming(&bs("10"), &bs("101")),
            Err(BitError::LengthMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn prefix_and_iteration() {
        let x = bs("1101000000000000000000000000000000000000000000000000000000000000001");
        assert_eq!(x.iter_ones().collect::<Vec<_>>(), vec![0, 1, 3, 66]);
        assert_eq!(x.ones_in_prefix(4), 3);
        assert_eq!(x.ones_in_prefix(66), 3);
        assert_eq!(x.ones_in_prefix(67), 4);
        assert_eq!(BitString::leading_ones(5, 3).unwrap().to_string(), "11100");
        assert_eq!(
            BitString::from_index(4, 0b0101).unwrap().to_string(),
            "1010"
        );
    }

    fn arb_bits(n: usize) -> impl Strategy<Value = BitString> {
        proptest::collection::vec(any::<bool>(), n).prop_map(|v| BitString::from_bools(&v).unwrap())
    }

    proptest! {
        #[test]
        fn hamming_metric((x, y, z) in (1usize..150).prop_flat_map(|n| (arb_bits(n), arb_bits(n), arb_bits(n)))) {
            let xy = x.hamming(&y).unwrap();
            prop_assert_eq!(xy, y.hamming(&x).unwrap());
            prop_assert_eq!(xy == 0, x == y);
            prop_assert!(xy <= x.hamming(&z).unwrap() + z.hamming(&y).unwrap());
        }

        #[test]
        fn ones_cache_consistent(x in (1usize..200).prop_flat_map(arb_bits), seed in any::<u64>()) {
            let mut rng = RandomSource::new(seed);
            let y = mutate(&x, &mut rng);
            prop_assert_eq!(y.ones(), y.to_bools().iter().filter(|b| **b).count());
            prop_assert!(y.ones() <= y.len());
            let c = x.complement();
            prop_assert_eq!(c.ones(), c.to_bools().iter().filter(|b| **b).count());
            let s: BitString = x.to_string().parse().unwrap();
            prop_assert_eq!(s, x);
        }
    }
}
