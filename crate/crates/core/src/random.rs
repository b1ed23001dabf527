//! Deterministic, splittable random streams and the samplers used by the
//! policies and environments.
//!
//! Every source of randomness is an [`RngStream`], a ChaCha generator keyed
//! by a `(seed, stream_id)` pair: the same pair reproduces the same sample
//! sequence on every platform and under any thread count. Parallel work
//! derives child streams up front (one per replication) instead of sharing
//! a generator, so results never depend on scheduling.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, Gamma, Normal};

use crate::dist::DiscreteDist;

/// Errors from sampler parameter validation.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleError {
    /// A Dirichlet concentration parameter was zero or negative.
    NonPositiveConcentration(f64),
    /// Requested a simplex of dimension zero.
    EmptySimplex,
    /// Truncated-Gaussian-mixture parameters failed validation.
    BadMixture(&'static str),
}

impl fmt::Display for SampleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleError::NonPositiveConcentration(b) => {
                write!(f, "Dirichlet concentration {b} must be positive")
            }
            SampleError::EmptySimplex => write!(f, "simplex dimension must be at least 1"),
            SampleError::BadMixture(msg) => write!(f, "invalid mixture parameters: {msg}"),
        }
    }
}

impl core::error::Error for SampleError {}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Streams are single-owner: they are never shared across threads, and
/// concurrent work splits by deriving child streams (distinct ids) before
/// dispatch.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    /// Creates the stream for `(seed, stream_id)`.
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            rng,
            seed,
            stream_id,
        }
    }

    /// The master seed this stream was derived from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The stream identifier.
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    #[inline]
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Stable FNV-1a hash of a byte string, for turning names into stream-id
/// components. Not a general-purpose hash; chosen because its output is
/// identical across platforms and compiler versions.
pub fn hash_name(name: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in name.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Mixes a list of components (replication index, arm index, role tag, ...)
/// into one stream id with a SplitMix64-style absorb, stable across runs.
pub fn stream_id(components: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &c in components {
        h ^= c.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

/// Draws from `Dir(beta)` by normalising independent Gamma variates
/// (`Gamma(beta_i, 1)`, Marsaglia–Tsang accept-reject for shape >= 1).
///
/// The marginal mean of coordinate `i` is `beta_i / sum(beta)`.
pub fn dirichlet(rng: &mut RngStream, beta: &[f64]) -> Result<Vec<f64>, SampleError> {
    if beta.is_empty() {
        return Err(SampleError::EmptySimplex);
    }
    if let Some(&b) = beta.iter().find(|&&b| b.is_nan() || b <= 0.0) {
        return Err(SampleError::NonPositiveConcentration(b));
    }
    if beta.len() == 1 {
        return Ok(vec![1.0]);
    }
    let mut w: Vec<f64> = beta
        .iter()
        .map(|&b| Gamma::new(b, 1.0).expect("validated shape").sample(rng))
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Uniform draw from the probability simplex of dimension `n`, i.e.
/// `Dir(1, ..., 1)`, via the exponential-ratio construction
/// `w_i = R_i / sum(R_j)` with `R_j` i.i.d. exponential.
pub fn uniform_simplex(rng: &mut RngStream, n: usize) -> Result<Vec<f64>, SampleError> {
    if n == 0 {
        return Err(SampleError::EmptySimplex);
    }
    let mut w = vec![0.0; n];
    uniform_simplex_fill(rng, &mut w);
    Ok(w)
}

/// Allocation-free variant of [`uniform_simplex`]: fills `out` (which
/// must be non-empty) with a uniform simplex draw of its length.
pub fn uniform_simplex_fill(rng: &mut RngStream, out: &mut [f64]) {
    debug_assert!(!out.is_empty());
    if out.len() == 1 {
        out[0] = 1.0;
        return;
    }
    let mut total = 0.0;
    for v in out.iter_mut() {
        let r: f64 = Exp1.sample(rng);
        *v = r;
        total += r;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Parameters of a truncated (clipped) Gaussian mixture on `[0, bound]`.
///
/// Clipping creates atoms at the interval ends, matching how bounded
/// physical quantities saturate. A mode with `sd == 0` degenerates to an
/// atom at its (clipped) mean.
#[derive(Debug, Clone, PartialEq)]
pub struct TgmParams {
    means: Vec<f64>,
    sds: Vec<f64>,
    mode_weights: Vec<f64>,
    bound: f64,
}

impl TgmParams {
    /// Validates the mixture: equal lengths, `sd >= 0`, weights forming a
    /// simplex vector, `bound > 0`.
    pub fn new(
        means: Vec<f64>,
        sds: Vec<f64>,
        mode_weights: Vec<f64>,
        bound: f64,
    ) -> Result<Self, SampleError> {
        if means.is_empty() {
            return Err(SampleError::BadMixture("no modes"));
        }
        if means.len() != sds.len() || means.len() != mode_weights.len() {
            return Err(SampleError::BadMixture("mismatched parameter lengths"));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(SampleError::BadMixture("bound must be positive"));
        }
        if means.iter().any(|m| !m.is_finite())
            || sds.iter().any(|&s| !s.is_finite() || s < 0.0)
        {
            return Err(SampleError::BadMixture("means/sds must be finite, sds >= 0"));
        }
        let total: f64 = mode_weights.iter().sum();
        if mode_weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(SampleError::BadMixture("mode weights must sum to 1"));
        }
        Ok(Self {
            means,
            sds,
            mode_weights,
            bound,
        })
    }

    /// Mode means.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Mode standard deviations.
    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    /// Mode probabilities.
    pub fn mode_weights(&self) -> &[f64] {
        &self.mode_weights
    }

    /// Truncation bound `B`.
    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// One draw from a truncated Gaussian mixture: pick a mode by its weight,
/// draw the Gaussian, clip into `[0, B]`.
pub fn sample_tgm(rng: &mut RngStream, params: &TgmParams) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut mode = params.means.len() - 1;
    for (j, &w) in params.mode_weights.iter().enumerate() {
        acc += w;
        if u < acc {
            mode = j;
            break;
        }
    }
    let raw = if params.sds[mode] == 0.0 {
        params.means[mode]
    } else {
        Normal::new(params.means[mode], params.sds[mode])
            .expect("validated sd")
            .sample(rng)
    };
    raw.clamp(0.0, params.bound)
}

/// One draw from a discrete distribution by inverse CDF on a single
/// uniform.
pub fn sample_discrete(rng: &mut RngStream, dist: &DiscreteDist) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (&x, &w) in dist.support().iter().zip(dist.weights()) {
        acc += w;
        if u < acc {
            return x;
        }
    }
    dist.max_value()
}
