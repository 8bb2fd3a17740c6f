//! Byte-buffer generation for differential fuzzing.
//!
//! Buffers are produced black-box from a seeded ChaCha8 stream: each buffer is
//! either drawn fresh (uniform length in the plan's bounds, random bytes) or,
//! with probability `corpus_fraction`, derived by [`mutate_buffer`] from an
//! earlier buffer of the same run. Bounded draws use rejection sampling on raw
//! 64-bit outputs so the stream is reproducible from the seed alone.

pub mod provider;
pub mod vectors;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use provider::{FuzzedDataProvider, ProviderError};

pub const DEFAULT_MIN_LEN: usize = 16;
pub const DEFAULT_MAX_LEN: usize = 4096;
pub const DEFAULT_CORPUS_FRACTION: f64 = 0.5;
pub const FUNCTION_LEVEL_INPUTS: usize = 2000;
pub const PROGRAM_LEVEL_INPUTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferBounds {
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzPlan {
    pub seed: u64,
    pub n_inputs: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub corpus_fraction: f64,
}

impl FuzzPlan {
    pub fn new(seed: u64, n_inputs: usize) -> Self {
        FuzzPlan {
            seed,
            n_inputs,
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            corpus_fraction: DEFAULT_CORPUS_FRACTION,
        }
    }

    pub fn bounds(&self) -> BufferBounds {
        BufferBounds {
            min_len: self.min_len,
            max_len: self.max_len,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_inputs == 0 {
            return Err("n_inputs must be at least 1".into());
        }
        if self.min_len > self.max_len {
            return Err(format!("min_len {} exceeds max_len {}", self.min_len, self.max_len));
        }
        if !(0.0..=1.0).contains(&self.corpus_fraction) {
            return Err(format!("corpus_fraction {} is outside [0, 1]", self.corpus_fraction));
        }
        Ok(())
    }

    /// The same plan with a seed derived from this one and `salt`.
    pub fn reseeded(&self, salt: u64) -> Self {
        FuzzPlan {
            seed: derive_seed(self.seed, salt),
            ..self.clone()
        }
    }
}

/// SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ splitmix64(salt))
}

/// 64-bit FNV-1a, used to turn identifiers into seed salts.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Uniform draw in `0..n` (`n >= 1`) by rejection.
fn below(rng: &mut impl RngCore, n: usize) -> usize {
    let n = n as u64;
    assert!(n > 0, "empty range");
    let zone = u64::MAX - (u64::MAX % n) - 1;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return (v % n) as usize;
        }
    }
}

fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn random_bytes(rng: &mut impl RngCore, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mutation {
    BitFlip,
    Overwrite,
    Insert,
    Delete,
    Duplicate,
    Resize,
}

const MUTATIONS: [Mutation; 6] = [
    Mutation::BitFlip,
    Mutation::Overwrite,
    Mutation::Insert,
    Mutation::Delete,
    Mutation::Duplicate,
    Mutation::Resize,
];

const MAX_BLOCK: usize = 16;

/// Applies 1–4 random edits (bit flip, byte overwrite, block insert, block
/// delete, block duplicate, truncate/extend), then clamps the length into
/// `bounds`. On an empty buffer every edit becomes an insert, and a result
/// emptied by the edits gets one fresh block.
pub fn mutate_buffer(buf: &[u8], rng: &mut impl RngCore, bounds: BufferBounds) -> Vec<u8> {
    let mut out = buf.to_vec();
    let rounds = 1 + below(rng, 4);
    for _ in 0..rounds {
        let mut op = MUTATIONS[below(rng, MUTATIONS.len())];
        if out.is_empty() {
            op = Mutation::Insert;
        }
        match op {
            Mutation::BitFlip => {
                let pos = below(rng, out.len());
                out[pos] ^= 1 << below(rng, 8);
            }
            Mutation::Overwrite => {
                let pos = below(rng, out.len());
                out[pos] = (rng.next_u32() & 0xff) as u8;
            }
            Mutation::Insert => {
                let pos = below(rng, out.len() + 1);
                let len = 1 + below(rng, MAX_BLOCK);
                let block = random_bytes(rng, len);
                out.splice(pos..pos, block);
            }
            Mutation::Delete => {
                let start = below(rng, out.len());
                let len = 1 + below(rng, MAX_BLOCK.min(out.len() - start));
                out.drain(start..start + len);
            }
            Mutation::Duplicate => {
                let start = below(rng, out.len());
                let len = 1 + below(rng, MAX_BLOCK.min(out.len() - start));
                let block: Vec<u8> = out[start..start + len].to_vec();
                let pos = below(rng, out.len() + 1);
                out.splice(pos..pos, block);
            }
            Mutation::Resize => {
                if below(rng, 2) == 0 {
                    let keep = below(rng, out.len() + 1);
                    out.truncate(keep);
                } else {
                    let extra = 1 + below(rng, MAX_BLOCK);
                    out.extend(random_bytes(rng, extra));
                }
            }
        }
    }
    if out.is_empty() {
        let len = 1 + below(rng, MAX_BLOCK);
        out = random_bytes(rng, len);
    }
    if out.len() > bounds.max_len {
        out.truncate(bounds.max_len);
    }
    if out.len() < bounds.min_len {
        let missing = bounds.min_len - out.len();
        out.extend(random_bytes(rng, missing));
    }
    out
}

/// Produces `plan.n_inputs` buffers, deterministically from `plan.seed`.
///
/// Panics if the plan is invalid (see [`FuzzPlan::validate`]).
pub fn generate_buffers(plan: &FuzzPlan) -> Vec<Vec<u8>> {
    if let Err(e) = plan.validate() {
        panic!("invalid fuzz plan: {e}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let bounds = plan.bounds();
    let mut out: Vec<Vec<u8>> = Vec::with_capacity(plan.n_inputs);
    for _ in 0..plan.n_inputs {
        let buf = if !out.is_empty() && unit(&mut rng) < plan.corpus_fraction {
            let parent = below(&mut rng, out.len());
            mutate_buffer(&out[parent], &mut rng, bounds)
        } else {
            let len = plan.min_len + below(&mut rng, plan.max_len - plan.min_len + 1);
            random_bytes(&mut rng, len)
        };
        out.push(buf);
    }
    out
}
