//! Communication primitives shared by the distributed solvers: named
//! deterministic random streams, sparsifying compressors with optional error
//! feedback, privacy noise, linear masking, and a traffic ledger.
//!
//! Reproducibility rule: every random draw in a run comes from a stream keyed
//! by `(master_seed, party, round, lane)`. Streams are created fresh at each
//! use site, so reordering unrelated code never shifts anyone's randomness,
//! and "shared seed" versus "independent" compressor coins are just a choice
//! of party key.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Real;

/// Who owns a random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    /// Client `i`'s private stream.
    Client(u64),
    /// Stream known to everyone (shared-seed compression, broadcast noise).
    Shared,
}

impl Party {
    fn code(self) -> u64 {
        match self {
            Party::Client(i) => {
                debug_assert!(i < u64::MAX);
                i
            }
            Party::Shared => u64::MAX,
        }
    }
}

/// What a random stream is used for; distinct lanes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lane {
    /// Bernoulli synchronization coin.
    Coin = 0,
    /// Index selection for downlink compression.
    DownIndex = 1,
    /// Index selection for uplink compression.
    UpIndex = 2,
    /// Which client participates this round.
    PartialPick = 3,
    /// Coordinate pick for sketched uplinks.
    CoordUp = 4,
    /// Coordinate pick for sketched downlink applications.
    CoordDown = 5,
    /// Noise added to broadcasts.
    NoiseDown = 6,
    /// Noise added to uploads.
    NoiseUp = 7,
    /// Data synthesis.
    Data = 8,
    /// Feature shuffling during partitioning.
    Shuffle = 9,
}

/// Deterministic ChaCha stream for `(master_seed, party, round, lane)`.
pub fn rng_stream(master_seed: u64, party: Party, round: u64, lane: Lane) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&party.code().to_le_bytes());
    seed[16..24].copy_from_slice(&round.to_le_bytes());
    seed[24..32].copy_from_slice(&(lane as u64).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Which coordinates a compressor keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressorKind {
    /// Pass-through; every scalar is sent.
    Identity,
    /// Uniform random subset of `k` coordinates, scaled by `d/k` so the
    /// result is unbiased.
    RandK,
    /// The `k` largest-magnitude coordinates, unscaled (contractive, biased).
    TopK,
}

/// Whose stream drives random coordinate selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RngMode {
    /// Sender and receiver derive the same indices from the shared stream,
    /// so indices never travel.
    SharedSeed,
    /// Each sender draws privately and must ship indices as metadata.
    Independent,
}

/// Sparsifying compressor configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Compressor {
    pub kind: CompressorKind,
    /// Fraction of coordinates kept, in `(0, 1]`.
    pub k_fraction: f64,
    pub rng_mode: RngMode,
}

impl Compressor {
    pub fn new(kind: CompressorKind, k_fraction: f64, rng_mode: RngMode) -> Result<Self> {
        if !(k_fraction > 0.0 && k_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "compressor k_fraction must lie in (0, 1], got {k_fraction}"
            )));
        }
        Ok(Self { kind, k_fraction, rng_mode })
    }

    pub fn identity() -> Self {
        Self { kind: CompressorKind::Identity, k_fraction: 1.0, rng_mode: RngMode::SharedSeed }
    }

    /// Coordinates kept for a vector of length `len`: `max(1, round(f·len))`.
    pub fn k_for(&self, len: usize) -> usize {
        if len == 0 {
            return 0;
        }
        match self.kind {
            CompressorKind::Identity => len,
            _ => (((self.k_fraction * len as f64).round() as usize).max(1)).min(len),
        }
    }

    /// True for compressors with `E[Q(x)] = x`.
    pub fn is_unbiased(&self) -> bool {
        matches!(self.kind, CompressorKind::Identity | CompressorKind::RandK)
    }

    /// Second-moment factor `ω` with `E‖Q(x)‖² ≤ ω‖x‖²`: `d/k` for the
    /// scaled random sparsifier, 1 otherwise.
    pub fn omega(&self, len: usize) -> f64 {
        match self.kind {
            CompressorKind::RandK => len as f64 / self.k_for(len) as f64,
            _ => 1.0,
        }
    }

    /// Worst-case amplification `δ` with `‖C(x)‖ ≤ δ‖x‖` used by the
    /// error-feedback step rule: `d/k` for sparsifiers, 1 for identity.
    pub fn delta(&self, len: usize) -> f64 {
        match self.kind {
            CompressorKind::Identity => 1.0,
            _ => len as f64 / self.k_for(len) as f64,
        }
    }

    /// True if compression consumes random draws.
    pub fn uses_rng(&self) -> bool {
        matches!(self.kind, CompressorKind::RandK)
    }

    /// Applies the compressor. Returns the full-length sparse result and the
    /// number of scalars that actually travel (selection indices are
    /// metadata and not counted).
    pub fn compress<S: Real>(&self, v: &Vector<S>, rng: &mut ChaCha8Rng) -> (Vector<S>, usize) {
        let d = v.len();
        match self.kind {
            CompressorKind::Identity => (v.clone(), d),
            CompressorKind::RandK => {
                let k = self.k_for(d);
                let mut idx: Vec<usize> = (0..d).collect();
                for i in 0..k {
                    let j = rng.gen_range(i..d);
                    idx.swap(i, j);
                }
                let scale = S::of_usize(d) / S::of_usize(k);
                let mut out = vec![S::zero(); d];
                for &i in &idx[..k] {
                    out[i] = scale * v[i];
                }
                (Vector::from_raw(out), k)
            }
            CompressorKind::TopK => {
                let k = self.k_for(d);
                let mut idx: Vec<usize> = (0..d).collect();
                idx.sort_unstable_by(|&a, &b| {
                    v[b].abs()
                        .partial_cmp(&v[a].abs())
                        .expect("finite entries")
                        .then(a.cmp(&b))
                });
                let mut out = vec![S::zero(); d];
                for &i in &idx[..k] {
                    out[i] = v[i];
                }
                (Vector::from_raw(out), k)
            }
        }
    }
}

/// One error-feedback step: compresses `payload` and returns
/// `(compressed, residual, sent)` with `residual = payload − compressed`
/// elementwise. For unscaled compressors the kept coordinates subtract to
/// exactly zero, so `residual + compressed == payload` bit for bit.
pub fn feedback_update<S: Real>(
    payload: &Vector<S>,
    comp: &Compressor,
    rng: &mut ChaCha8Rng,
) -> (Vector<S>, Vector<S>, usize) {
    let (compressed, sent) = comp.compress(payload, rng);
    let residual = payload.sub(&compressed);
    (compressed, residual, sent)
}

/// Spherical Gaussian noise with total variance `σ²` split evenly across
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::Config(format!("noise sigma must be ≥ 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn silent() -> Self {
        Self { sigma: 0.0 }
    }

    /// Adds `N(0, σ²/dim)` per coordinate. With `σ = 0` this returns the
    /// input unchanged and leaves the stream untouched.
    pub fn add_noise<S: Real>(&self, v: &Vector<S>, rng: &mut ChaCha8Rng) -> Vector<S> {
        if self.sigma == 0.0 || v.is_empty() {
            return v.clone();
        }
        let std = S::of(self.sigma) / S::of_usize(v.len()).sqrt();
        Vector::from_raw(
            v.iter()
                .map(|&x| x + std * S::of(rng.sample::<f64, _>(StandardNormal)))
                .collect(),
        )
    }
}

/// Linear masking stand-in for additively homomorphic encryption.
///
/// `ScaledMask` multiplies by a secret `c ≠ 0`; sums and matrix products
/// commute with it exactly, which is all the masked solver needs. A
/// power-of-two secret makes the round trip lossless in floating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EncryptionScheme<S> {
    Plaintext,
    ScaledMask { secret: S },
}

impl<S: Real> EncryptionScheme<S> {
    pub fn scaled_mask(secret: S) -> Result<Self> {
        if secret == S::zero() {
            return Err(Error::InvalidKey("mask secret must be nonzero"));
        }
        Ok(Self::ScaledMask { secret })
    }

    /// Default masking secret, a power of two so decryption is exact.
    pub fn default_mask() -> Self {
        Self::ScaledMask { secret: S::of(1024.0) }
    }

    pub fn encrypt(&self, v: &Vector<S>) -> Vector<S> {
        match *self {
            Self::Plaintext => v.clone(),
            Self::ScaledMask { secret } => v.scale(secret),
        }
    }

    pub fn decrypt(&self, v: &Vector<S>) -> Vector<S> {
        match *self {
            Self::Plaintext => v.clone(),
            Self::ScaledMask { secret } => v.scale(S::one() / secret),
        }
    }
}

/// Running totals of scalars moved and arithmetic spent.
///
/// Counters only ever increase. Flops count data-path multiply-adds (matrix
/// and inner products against the data blocks), not bookkeeping arithmetic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TrafficLedger {
    /// Scalars sent client → server.
    pub scalars_up: u64,
    /// Scalars sent server → client, counted once per broadcast.
    pub scalars_down: u64,
    /// Rounds where compression fell back to a full synchronization.
    pub full_sync_rounds: u64,
    /// Data-path multiply-adds.
    pub flops: u64,
}

impl TrafficLedger {
    pub fn charge_up(&mut self, scalars: usize) {
        self.scalars_up += scalars as u64;
    }

    pub fn charge_down(&mut self, scalars: usize) {
        self.scalars_down += scalars as u64;
    }

    pub fn charge_flops(&mut self, flops: usize) {
        self.flops += flops as u64;
    }

    pub fn mark_full_sync(&mut self) {
        self.full_sync_rounds += 1;
    }
}
