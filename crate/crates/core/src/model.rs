//! Model parameters, entry distributions and seeded signature ensembles.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, trial)`
//! with the stream id set to the column index `k`. Each entry consumes a
//! fixed number of words ([`WORDS_PER_ENTRY`]), so entry `(i, k)` sits at a
//! fixed position of stream `k` and an ensemble is a pure function of
//! `(N, K, powers, dist, seed, trial)` regardless of generation order.
//!
//! Gaussian entries use the Box–Muller transform on two 53-bit uniforms
//! `u1 = 1 - U1 ∈ (0, 1]`, `u2 = U2 ∈ [0, 1)`: `r = sqrt(-2 ln u1)`,
//! `θ = 2π u2`. Complex Gaussian entries are `r (cos θ + i sin θ) / √2`;
//! real Gaussian entries are `r cos θ`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 32-bit words consumed by one entry, whatever the distribution.
pub const WORDS_PER_ENTRY: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    ComplexGaussian,
    Qpsk,
    RealGaussian,
    Rademacher,
}

impl DistKind {
    pub const ALL: [DistKind; 4] = [
        DistKind::ComplexGaussian,
        DistKind::Qpsk,
        DistKind::RealGaussian,
        DistKind::Rademacher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistKind::ComplexGaussian => "complex-gaussian",
            DistKind::Qpsk => "qpsk",
            DistKind::RealGaussian => "real-gaussian",
            DistKind::Rademacher => "rademacher",
        }
    }
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown distribution '{s}'")))
    }
}

/// Entry distribution with its moment profile. All kinds have
/// `E v = 0` and `E|v|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryDist {
    pub kind: DistKind,
    /// `E|v|⁴`.
    pub fourth_moment: f64,
    pub is_complex: bool,
    /// `E v²`: 0 for the circular complex kinds, 1 for the real kinds.
    pub second_moment_sq: f64,
}

impl EntryDist {
    pub fn new(kind: DistKind) -> Self {
        let (fourth_moment, is_complex) = match kind {
            DistKind::ComplexGaussian => (2.0, true),
            DistKind::Qpsk => (1.0, true),
            DistKind::RealGaussian => (3.0, false),
            DistKind::Rademacher => (1.0, false),
        };
        EntryDist {
            kind,
            fourth_moment,
            is_complex,
            second_moment_sq: if is_complex { 0.0 } else { 1.0 },
        }
    }

    /// `E|v|⁴ - 1`, the variance of `|v|²`.
    pub fn var_abs_sq(&self) -> f64 {
        self.fourth_moment - 1.0
    }
}

impl From<DistKind> for EntryDist {
    fn from(kind: DistKind) -> Self {
        EntryDist::new(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Limiting ratio `c = lim N/K`.
    pub c: f64,
    pub sigma2: f64,
    pub dist: EntryDist,
    pub m_stages: usize,
}

impl ModelParams {
    pub fn new(c: f64, sigma2: f64, dist: EntryDist, m_stages: usize) -> Result<Self> {
        let p = ModelParams {
            c,
            sigma2,
            dist,
            m_stages,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratio(self.c)?;
        check_sigma2(self.sigma2)?;
        if self.m_stages == 0 {
            return Err(Error::invalid("m_stages must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_ratio(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("ratio c must be positive, got {c}")));
    }
    Ok(())
}

pub(crate) fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be nonnegative, got {sigma2}"
        )));
    }
    Ok(())
}

/// Counter-based random stream positioned at one matrix entry.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Stream for column `column` of trial `trial`, positioned at row 0.
    pub fn for_column(seed: u64, trial: u64, column: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(derive_key(seed, trial));
        rng.set_stream(column);
        RngStream { rng }
    }

    /// Stream positioned at entry `(row, column)`.
    pub fn for_entry(seed: u64, trial: u64, row: u64, column: u64) -> Self {
        let mut s = Self::for_column(seed, trial, column);
        s.rng.set_word_pos(row as u128 * WORDS_PER_ENTRY);
        s
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, trial: u64) -> [u8; 32] {
    let mut state = seed;
    let a = splitmix64(&mut state);
    let mut state = a ^ trial.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// One draw of `dist`. Always consumes [`WORDS_PER_ENTRY`] words.
pub fn sample_entry(dist: &EntryDist, stream: &mut RngStream) -> Complex64 {
    let w0 = stream.next_u64();
    let w1 = stream.next_u64();
    match dist.kind {
        DistKind::ComplexGaussian => {
            let (r, theta) = box_muller(w0, w1);
            let (s, c) = theta.sin_cos();
            Complex64::new(r * c * FRAC_1_SQRT_2, r * s * FRAC_1_SQRT_2)
        }
        DistKind::RealGaussian => {
            let (r, theta) = box_muller(w0, w1);
            Complex64::new(r * theta.cos(), 0.0)
        }
        DistKind::Qpsk => {
            let re = if w0 & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if w0 & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            Complex64::new(re, im)
        }
        DistKind::Rademacher => Complex64::new(if w0 & 1 == 0 { 1.0 } else { -1.0 }, 0.0),
    }
}

fn box_muller(w0: u64, w1: u64) -> (f64, f64) {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = 1.0 - (w0 >> 11) as f64 * scale;
    let u2 = (w1 >> 11) as f64 * scale;
    ((-2.0 * u1.ln()).sqrt(), TAU * u2)
}

/// Signature matrix `S` (columns `s_k = v_k / √N`) with user powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub n: usize,
    pub k: usize,
    pub s: DMatrix<Complex64>,
    pub powers: Vec<f64>,
}

impl Ensemble {
    pub fn new(s: DMatrix<Complex64>, powers: Vec<f64>) -> Result<Self> {
        let (n, k) = s.shape();
        if n == 0 || k == 0 {
            return Err(Error::invalid("ensemble dimensions must be positive"));
        }
        if powers.len() != k {
            return Err(Error::invalid(format!(
                "expected {k} powers, got {}",
                powers.len()
            )));
        }
        if let Some(p) = powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::invalid(format!("powers must be positive, got {p}")));
        }
        Ok(Ensemble { n, k, s, powers })
    }

    /// Finite ratio `c_N = N / K`.
    pub fn ratio(&self) -> f64 {
        self.n as f64 / self.k as f64
    }

    pub fn has_unit_powers(&self) -> bool {
        self.powers.iter().all(|&p| p == 1.0)
    }

    /// Same users with columns reordered: column `j` of the result is
    /// column `order[j]` of `self`.
    pub fn permute_users(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.k {
            return Err(Error::invalid("permutation length must equal K"));
        }
        let s = DMatrix::from_fn(self.n, self.k, |i, j| self.s[(i, order[j])]);
        let powers = order.iter().map(|&j| self.powers[j]).collect();
        Ensemble::new(s, powers)
    }
}

/// Deterministic ensemble for `(seed, trial)`.
pub fn sample_ensemble(
    n: usize,
    k: usize,
    powers: &[f64],
    dist: &EntryDist,
    seed: u64,
    trial: u64,
) -> Result<Ensemble> {
    if n == 0 || k == 0 {
        return Err(Error::invalid(format!(
            "dimensions must be positive, got N={n}, K={k}"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut s = DMatrix::<Complex64>::zeros(n, k);
    for (col, mut column) in s.column_iter_mut().enumerate() {
        let mut stream = RngStream::for_column(seed, trial, col as u64);
        for entry in column.iter_mut() {
            *entry = sample_entry(dist, &mut stream) * scale;
        }
    }
    Ensemble::new(s, powers.to_vec())
}

/// [`sample_ensemble`] with all powers equal to one.
pub fn sample_unit_ensemble(
    n: usize,
    k: usize,
    dist: &EntryDist,
    seed: u64,
    trial: u64,
) -> Result<Ensemble> {
    sample_ensemble(n, k, &vec![1.0; k], dist, seed, trial)
}
