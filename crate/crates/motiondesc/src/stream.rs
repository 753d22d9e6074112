//! Deterministic pseudorandom streams.
//!
//! Every random-looking quantity in this crate (token embeddings, projection
//! matrices, synthetic noise, parameter init, shuffles) is derived from
//! splitmix64-style mixing over explicit integer keys, so repeated runs are
//! bit-identical on any platform. No global RNG state anywhere.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// FNV-1a 64-bit hash of a byte sequence.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in data {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// splitmix64 finalizer (xor-shift, multiply, three rounds).
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// `index`-th word of the splitmix64 stream seeded at `seed` (0-indexed):
/// `mix64(seed + (index + 1) * GOLDEN_GAMMA)`.
#[inline]
pub fn stream_at(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Top 53 bits of a word mapped to [-1, 1).
#[inline]
pub fn to_signed_unit(word: u64) -> f64 {
    ((word >> 11) as f64 * 2f64.powi(-53)) * 2.0 - 1.0
}

/// Top 52 bits of a word mapped to the open interval (0, 1).
/// The half-step offset keeps `ln` finite in the Box-Muller transform;
/// at 52 bits every step is exactly representable, so neither endpoint is
/// ever reached by rounding (53 bits would round the top value up to 1.0).
#[inline]
pub fn to_open_unit(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * 2f64.powi(-52)
}

/// Fold a tag and a list of integer parts into a derived stream key.
pub fn derive_key(seed: u64, tag: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(seed ^ tag);
    for &p in parts {
        h = mix64(h ^ p);
    }
    h
}

/// Standard normal draw from the stream at `key`; draw `index` consumes
/// words `2*index` and `2*index + 1` (Box-Muller, cosine branch).
pub fn gaussian_at(key: u64, index: u64) -> f64 {
    let u1 = to_open_unit(stream_at(key, 2 * index));
    let u2 = to_open_unit(stream_at(key, 2 * index + 1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A cursor over a keyed stream, for call sites that draw sequentially.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    cursor: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Stream { key, cursor: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let w = stream_at(self.key, self.cursor);
        self.cursor += 1;
        w
    }

    /// Uniform in [-1, 1).
    pub fn next_signed_unit(&mut self) -> f64 {
        to_signed_unit(self.next_u64())
    }

    /// Uniform integer in [0, n). Modulo bias is irrelevant at these sizes.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        self.next_u64() % n
    }

    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = to_open_unit(self.next_u64());
        let u2 = to_open_unit(self.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Seeded Fisher-Yates permutation of 0..n.
pub fn permutation(key: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut stream = Stream::new(key);
    for i in (1..n).rev() {
        let j = stream.next_below(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}
