//! Random number sources.
//!
//! Two generators are used, each with a fixed, documented algorithm so that results
//! are reproducible across platforms:
//!
//! * [`SplitMix64`] with a Box-Muller transform ([`NormalSampler`]) draws instance
//!   coefficients. The transcendental functions come from `libm` so the pipeline
//!   does not depend on the platform's math library.
//! * [`StreamKey`] derives independent ChaCha8 streams for Monte Carlo runs from a
//!   master seed and a path of labelled coordinates using SHA-256.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt;

/// Name and version of the instance coefficient pipeline, recorded in instance files.
pub const INSTANCE_GENERATOR: &str = "splitmix64-boxmuller/1";

/// Domain separator for stream derivation.
const STREAM_DOMAIN: &[u8] = b"qeopt/stream/v1";

/// The SplitMix64 generator (Steele, Lea and Flood).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform double in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal variates by the basic Box-Muller transform.
///
/// Each pair of uniforms `(u1, u2)` yields `r cos(2 pi u2)` and then `r sin(2 pi u2)`
/// with `r = sqrt(-2 ln(1 - u1))`. Both outputs are used, cosine first.
#[derive(Debug, Clone)]
pub struct NormalSampler {
    source: SplitMix64,
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            source: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.source.next_f64();
        let u2 = self.source.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

/// A node in the stream derivation tree.
///
/// The root is `SHA-256(domain || master_seed_le)`. A child is
/// `SHA-256(parent || len(label)_le || label || index_le)` where the length is a
/// `u64`. The 32-byte digest seeds a ChaCha8 generator directly.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn root(master_seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(STREAM_DOMAIN);
        h.update(master_seed.to_le_bytes());
        Self(h.finalize().into())
    }

    pub fn child(&self, label: &str, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        Self(h.finalize().into())
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// First eight digest bytes as a little-endian integer; used for instance seeds.
    pub fn to_u64(&self) -> u64 {
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.0[..8]);
        u64::from_le_bytes(b)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.0)
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StreamKey({})", &self.to_hex()[..16])
    }
}
