//! Random codebooks, the likelihood encoder and the lookup decoder.
//!
//! Codeword and source symbols are `u8` indices, so alphabets are limited to
//! 256 symbols. Codeword indices are zero-based: a codebook of size `M` has
//! indices `0..M`.
//!
//! The likelihood encoder picks index `m` with probability proportional to
//! `prod_t P_{X|Y}(x_t | y_t(m))`. Weights are handled in the natural-log
//! domain and sampled with the Gumbel-max rule, one uniform draw per codeword
//! in index order, so that a single generator stream drives codebook
//! generation, source generation and encoding.
//!
//! # Codebook file format
//!
//! Little-endian throughout:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `LECB` |
//! | 4  | 2 | version (`1`) |
//! | 6  | 2 | alphabet size |
//! | 8  | 4 | blocklength `n` |
//! | 12 | 8 | codeword count `M` |
//! | 20 | 8 | rate `R` (IEEE-754 double) |
//! | 28 | 8 | seed |
//! | 36 | `M * n` | codeword symbols, row-major |

use std::io::{Read, Write};

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finite_prob::{Channel, Pmf};
use crate::rd_solver::DistortionMeasure;
use crate::seed::{open_unit, stream};
use crate::Limits;

pub const CODEBOOK_MAGIC: &[u8; 4] = b"LECB";
pub const CODEBOOK_VERSION: u16 = 1;
const HEADER_LEN: usize = 36;
const MAX_ALPHABET: usize = 256;
/// Below this many symbol lookups, scoring stays on the calling thread.
const PAR_SCORE_THRESHOLD: usize = 1 << 16;

/// `M = ceil(2^{nR})`. Values of `2^{nR}` within relative `1e-9` of an
/// integer are rounded to it first, so `R = log2(M) / n` reproduces `M`.
pub fn codebook_size(n: usize, rate: f64, limits: &Limits) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be at least 1".into()));
    }
    if rate < 0.0 || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rate must be finite and nonnegative, got {rate}"
        )));
    }
    let raw = (n as f64 * rate).exp2();
    let nearest = raw.round();
    let size = if (raw - nearest).abs() <= 1e-9 * nearest {
        nearest
    } else {
        raw.ceil()
    };
    if size > limits.max_codewords as f64 {
        return Err(Error::CodebookTooLarge {
            codewords: size,
            n,
            cap: limits.max_codewords,
        });
    }
    Ok(size as usize)
}

/// `M` codewords of length `n` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    rate: f64,
    alphabet_size: usize,
    words: Vec<u8>,
    seed: u64,
}

impl Codebook {
    /// Builds a codebook whose size must equal `ceil(2^{nR})`.
    pub fn new(n: usize, rate: f64, alphabet_size: usize, words: Vec<u8>, seed: u64) -> Result<Self> {
        let limits = Limits {
            max_codewords: u64::MAX,
            ..Limits::default()
        };
        let m = codebook_size(n, rate, &limits)?;
        let cb = Self::from_parts(n, rate, alphabet_size, words, seed)?;
        if cb.m() != m {
            return Err(Error::InvalidArgument(format!(
                "{} codewords given, n = {n} and R = {rate} require {m}",
                cb.m()
            )));
        }
        Ok(cb)
    }

    /// Builds a codebook from explicit words, with rate `log2(M) / n`.
    pub fn from_words(n: usize, alphabet_size: usize, words: Vec<u8>) -> Result<Self> {
        if n == 0 || words.is_empty() || !words.len().is_multiple_of(n) {
            return Err(Error::ShapeMismatch(format!(
                "{} symbols do not form codewords of length {n}",
                words.len()
            )));
        }
        let m = words.len() / n;
        Self::from_parts(n, (m as f64).log2() / n as f64, alphabet_size, words, 0)
    }

    fn from_parts(n: usize, rate: f64, alphabet_size: usize, words: Vec<u8>, seed: u64) -> Result<Self> {
        if alphabet_size == 0 || alphabet_size > MAX_ALPHABET {
            return Err(Error::InvalidArgument(format!(
                "alphabet size {alphabet_size} outside 1..={MAX_ALPHABET}"
            )));
        }
        if n == 0 || words.is_empty() || !words.len().is_multiple_of(n) {
            return Err(Error::ShapeMismatch(format!(
                "{} symbols do not form codewords of length {n}",
                words.len()
            )));
        }
        if let Some(s) = words.iter().find(|&&s| s as usize >= alphabet_size) {
            return Err(Error::InvalidArgument(format!(
                "codeword symbol {s} outside alphabet of size {alphabet_size}"
            )));
        }
        Ok(Self {
            n,
            rate,
            alphabet_size,
            words,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.words.len() / self.n
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn words(&self) -> &[u8] {
        &self.words
    }

    pub fn word(&self, m: usize) -> &[u8] {
        &self.words[m * self.n..(m + 1) * self.n]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.words.chunks_exact(self.n)
    }

    pub fn has_repeated_codewords(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.m());
        !self.iter().all(|w| seen.insert(w))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(CODEBOOK_MAGIC)?;
        out.write_all(&CODEBOOK_VERSION.to_le_bytes())?;
        out.write_all(&(self.alphabet_size as u16).to_le_bytes())?;
        out.write_all(&(self.n as u32).to_le_bytes())?;
        out.write_all(&(self.m() as u64).to_le_bytes())?;
        out.write_all(&self.rate.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.words)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + self.words.len());
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[0..4] != CODEBOOK_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u16_at(4);
        if version != CODEBOOK_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let alphabet_size = u16_at(6) as usize;
        let n = u32_at(8) as usize;
        let m = u64_at(12);
        let rate = f64::from_bits(u64_at(20));
        let seed = u64_at(28);
        let body = &bytes[HEADER_LEN..];
        let expected = (m as u128) * (n as u128);
        if body.len() as u128 != expected {
            return Err(Error::Format(format!(
                "header declares {m} x {n} symbols, body has {}",
                body.len()
            )));
        }
        let cb = Self::from_parts(n, rate, alphabet_size, body.to_vec(), seed)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(cb)
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Format(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

/// Draws an i.i.d. sequence of length `n` from `p`, one uniform per symbol.
pub fn sample_sequence<R: RngCore + ?Sized>(p: &Pmf, n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| p.sample_with(open_unit(rng)) as u8).collect()
}

/// Generates `M = ceil(2^{nR})` codewords i.i.d. from `py` using the stream
/// seeded by `seed`.
pub fn generate_codebook(py: &Pmf, n: usize, rate: f64, seed: u64, limits: &Limits) -> Result<Codebook> {
    generate_codebook_with(py, n, rate, seed, &mut stream(seed), limits)
}

/// As [`generate_codebook`], drawing from a caller-owned stream. `seed` is
/// only recorded in the codebook.
pub fn generate_codebook_with<R: RngCore + ?Sized>(
    py: &Pmf,
    n: usize,
    rate: f64,
    seed: u64,
    rng: &mut R,
    limits: &Limits,
) -> Result<Codebook> {
    if py.alphabet_size() > MAX_ALPHABET {
        return Err(Error::InvalidArgument(format!(
            "alphabet size {} exceeds {MAX_ALPHABET}",
            py.alphabet_size()
        )));
    }
    let m = codebook_size(n, rate, limits)?;
    let words = sample_sequence(py, m * n, rng);
    Codebook::from_parts(n, rate, py.alphabet_size(), words, seed)
}

/// The encoder: a codebook together with the test channel `P_{X|Y}`.
#[derive(Debug, Clone)]
pub struct EncoderSpec {
    test_channel: Channel,
    codebook: Codebook,
    /// `ln P_{X|Y}(x | y)` indexed `[y * |X| + x]`.
    log_table: Vec<f64>,
}

impl EncoderSpec {
    pub fn new(test_channel: Channel, codebook: Codebook) -> Result<Self> {
        if test_channel.input_size() != codebook.alphabet_size() {
            return Err(Error::ShapeMismatch(format!(
                "test channel takes {} reproduction symbols, codebook alphabet has {}",
                test_channel.input_size(),
                codebook.alphabet_size()
            )));
        }
        if test_channel.output_size() > MAX_ALPHABET {
            return Err(Error::InvalidArgument("source alphabet exceeds 256 symbols".into()));
        }
        let log_table = test_channel.log_table().into_iter().flatten().collect();
        Ok(Self {
            test_channel,
            codebook,
            log_table,
        })
    }

    pub fn test_channel(&self) -> &Channel {
        &self.test_channel
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn source_alphabet(&self) -> usize {
        self.test_channel.output_size()
    }

    fn check_input(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.codebook.n() {
            return Err(Error::ShapeMismatch(format!(
                "input has length {}, codebook blocklength is {}",
                x.len(),
                self.codebook.n()
            )));
        }
        if let Some(s) = x.iter().find(|&&s| s as usize >= self.source_alphabet()) {
            return Err(Error::InvalidArgument(format!(
                "input symbol {s} outside source alphabet of size {}",
                self.source_alphabet()
            )));
        }
        Ok(())
    }

    fn score(&self, x: &[u8], word: &[u8]) -> f64 {
        let k = self.source_alphabet();
        x.iter()
            .zip(word)
            .map(|(&xs, &ys)| self.log_table[ys as usize * k + xs as usize])
            .sum()
    }

    /// `sum_t ln P_{X|Y}(x_t | y_t(m))` for every codeword, in index order.
    pub fn log_weights(&self, x: &[u8]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let cb = &self.codebook;
        let weights = if cb.words().len() >= PAR_SCORE_THRESHOLD {
            cb.words()
                .par_chunks_exact(cb.n())
                .map(|w| self.score(x, w))
                .collect()
        } else {
            cb.iter().map(|w| self.score(x, w)).collect()
        };
        Ok(weights)
    }
}

/// Normalizes log-weights into a pmf with a max shift before exponentiating.
pub fn posterior_from_log_weights(log_weights: &[f64]) -> Result<Pmf> {
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::AllZeroLikelihood);
    }
    let shifted: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = shifted.iter().sum();
    Ok(Pmf::from_normalized(shifted.into_iter().map(|w| w / total).collect()))
}

/// Exact `P_{M|X^n}(. | x)` under the likelihood encoder.
pub fn encoder_posterior(x: &[u8], spec: &EncoderSpec) -> Result<Pmf> {
    posterior_from_log_weights(&spec.log_weights(x)?)
}

/// Index of the largest Gumbel-perturbed log-weight. Consumes exactly one
/// uniform per entry when at least one weight is finite.
pub fn gumbel_max<R: RngCore + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    if log_weights.iter().all(|&l| l == f64::NEG_INFINITY) {
        return Err(Error::AllZeroLikelihood);
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (m, &l) in log_weights.iter().enumerate() {
        let key = l - (-open_unit(rng).ln()).ln();
        if key > best.1 {
            best = (m, key);
        }
    }
    Ok(best.0)
}

/// Draws one index from [`encoder_posterior`].
pub fn likelihood_encode<R: RngCore + ?Sized>(x: &[u8], spec: &EncoderSpec, rng: &mut R) -> Result<usize> {
    gumbel_max(&spec.log_weights(x)?, rng)
}

/// Lowest index attaining the maximal likelihood.
pub fn map_encode(x: &[u8], spec: &EncoderSpec) -> Result<usize> {
    let weights = spec.log_weights(x)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (m, &l) in weights.iter().enumerate() {
        if l > best.1 {
            best = (m, l);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return Err(Error::AllZeroLikelihood);
    }
    Ok(best.0)
}

pub fn decode(m: usize, cb: &Codebook) -> Result<&[u8]> {
    if m >= cb.m() {
        return Err(Error::IndexOutOfRange { index: m, m: cb.m() });
    }
    Ok(cb.word(m))
}

/// Per-letter average `(1/n) sum_t d(x_t, y_t)`.
pub fn avg_distortion(x: &[u8], y: &[u8], d: &DistortionMeasure) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "sequences of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().any(|&s| s as usize >= d.size_x()) || y.iter().any(|&s| s as usize >= d.size_y()) {
        return Err(Error::InvalidArgument("symbol outside distortion table".into()));
    }
    let total: f64 = x.iter().zip(y).map(|(&a, &b)| d.get(a as usize, b as usize)).sum();
    Ok(total / x.len() as f64)
}
