//! Exact and Monte Carlo instrumentation of soft covering and of the
//! likelihood-encoder achievability argument.
//!
//! Two joint distributions over (source sequence, codeword index) are built
//! for a fixed codebook:
//!
//! - `Q`, the idealized one: a uniform index whose codeword is pushed through
//!   the memoryless test channel, `Q(x, m) = (1/M) prod_t P_{X|Y}(x_t | y_t(m))`.
//! - `P`, the one the system actually induces: an i.i.d. source sequence
//!   followed by the likelihood encoder, `P(x, m) = P_X^n(x) P_{M|X^n}(m | x)`.
//!
//! Joints live over `(x^n, m)` rather than `(x^n, y^n)`. The two coincide
//! unless the codebook repeats a codeword, in which case the index view is a
//! refinement and its TV can only be larger; reports carry a flag for it.
//! `Q` is evaluated in the linear domain straight from the channel table while
//! `P` goes through the log-domain encoder posterior, so the two are computed
//! along independent paths.

use rayon::prelude::*;

use crate::codec::{
    avg_distortion, encoder_posterior, generate_codebook, generate_codebook_with, likelihood_encode,
    sample_sequence, Codebook, EncoderSpec,
};
use crate::error::{Error, Result};
use crate::finite_prob::{
    product_extension, sequence_at, sequence_space_size, total_variation, Channel, JointPmf, Masses,
    Pmf, SequenceDist,
};
use crate::rd_solver::DistortionMeasure;
use crate::seed::{stream, trial_seed};
use crate::Limits;

/// Joint pmf over `(x^n, m)`, stored with the sequence index major.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexJoint {
    alphabet_size: usize,
    n: usize,
    m: usize,
    probs: Vec<f64>,
}

impl IndexJoint {
    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, seq_index: usize, m: usize) -> f64 {
        self.probs[seq_index * self.m + m]
    }

    /// Probabilities of all indices jointly with sequence `seq_index`.
    pub fn row(&self, seq_index: usize) -> &[f64] {
        &self.probs[seq_index * self.m..(seq_index + 1) * self.m]
    }

    pub fn marginal_x(&self) -> SequenceDist {
        let probs = self.probs.chunks(self.m).map(|r| r.iter().sum()).collect();
        SequenceDist::from_normalized(self.alphabet_size, self.n, probs)
    }
}

impl Masses for IndexJoint {
    fn masses(&self) -> &[f64] {
        &self.probs
    }
    fn shape(&self) -> Vec<usize> {
        vec![self.alphabet_size, self.n, self.m]
    }
}

fn check_channel(cb: &Codebook, test_channel: &Channel) -> Result<()> {
    if test_channel.input_size() != cb.alphabet_size() {
        return Err(Error::ShapeMismatch(format!(
            "test channel takes {} reproduction symbols, codebook alphabet has {}",
            test_channel.input_size(),
            cb.alphabet_size()
        )));
    }
    Ok(())
}

fn check_product_cap(states: f64, alphabet: usize, n: usize, limits: &Limits) -> Result<()> {
    if states > limits.enum_cap as f64 {
        return Err(Error::EnumerationCap {
            alphabet,
            n,
            states,
            cap: limits.enum_cap,
        });
    }
    Ok(())
}

/// Distribution over `X^n` of the codeword `word` passed through the channel:
/// `prod_t P_{X|Y}(x_t | word_t)`, lexicographic.
fn channel_output(word: &[u8], test_channel: &Channel, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    let mut next = Vec::with_capacity(out.capacity());
    for &y in word {
        let row = test_channel.row(y as usize).probs();
        next.clear();
        next.extend(out.iter().flat_map(|acc| row.iter().map(move |p| acc * p)));
        std::mem::swap(out, &mut next);
    }
}

/// Induced distribution of `X^n` when a uniform codeword is sent through the
/// memoryless test channel: `(1/M) sum_m prod_t P_{X|Y}(x_t | y_t(m))`.
///
/// Picks whichever of [`induced_marginal_direct`] and
/// [`induced_marginal_histogram`] is cheaper.
pub fn induced_marginal(cb: &Codebook, test_channel: &Channel, limits: &Limits) -> Result<SequenceDist> {
    check_channel(cb, test_channel)?;
    let kx = test_channel.output_size();
    let ky = cb.alphabet_size();
    let n = cb.n();
    let x_states = sequence_space_size(kx, n, limits.enum_cap)? as f64;
    let histogram_cost = match sequence_space_size(ky, n, limits.enum_cap) {
        Ok(y_states) => (y_states as f64).max(x_states) * (n * kx.max(ky)) as f64,
        Err(_) => f64::INFINITY,
    };
    let direct_cost = cb.m() as f64 * x_states * 2.0;
    if histogram_cost < direct_cost {
        induced_marginal_histogram(cb, test_channel, limits)
    } else {
        induced_marginal_direct(cb, test_channel, limits)
    }
}

/// Sums the per-codeword channel outputs one codeword at a time.
pub fn induced_marginal_direct(cb: &Codebook, test_channel: &Channel, limits: &Limits) -> Result<SequenceDist> {
    check_channel(cb, test_channel)?;
    let kx = test_channel.output_size();
    let size = sequence_space_size(kx, cb.n(), limits.enum_cap)?;
    let mut acc = vec![0.0; size];
    let mut out = Vec::with_capacity(size);
    for word in cb.iter() {
        channel_output(word, test_channel, &mut out);
        acc.iter_mut().zip(&out).for_each(|(a, p)| *a += p);
    }
    let scale = 1.0 / cb.m() as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(SequenceDist::from_normalized(kx, cb.n(), acc))
}

/// Builds the empirical codeword histogram over `Y^n` and applies the channel
/// one coordinate at a time (a Kronecker-structured transform).
pub fn induced_marginal_histogram(cb: &Codebook, test_channel: &Channel, limits: &Limits) -> Result<SequenceDist> {
    check_channel(cb, test_channel)?;
    let kx = test_channel.output_size();
    let ky = cb.alphabet_size();
    let n = cb.n();
    sequence_space_size(kx, n, limits.enum_cap)?;
    let y_states = sequence_space_size(ky, n, limits.enum_cap)?;

    let mut counts = vec![0u64; y_states];
    for word in cb.iter() {
        counts[crate::finite_prob::sequence_index(word, ky)] += 1;
    }
    let scale = 1.0 / cb.m() as f64;
    let mut tensor: Vec<f64> = counts.into_iter().map(|c| c as f64 * scale).collect();

    // Before step t the first t axes range over X and the remaining n - t over Y.
    for t in 0..n {
        let prefix = kx.pow(t as u32);
        let suffix = ky.pow((n - t - 1) as u32);
        let mut next = vec![0.0; prefix * kx * suffix];
        for p in 0..prefix {
            for y in 0..ky {
                let row = test_channel.row(y).probs();
                let src = &tensor[(p * ky + y) * suffix..(p * ky + y + 1) * suffix];
                for (x, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let dst = &mut next[(p * kx + x) * suffix..(p * kx + x + 1) * suffix];
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
                }
            }
        }
        tensor = next;
    }
    Ok(SequenceDist::from_normalized(kx, n, tensor))
}

/// `TV(induced_marginal(cb), P_X^n)`.
pub fn soft_cover_tv(cb: &Codebook, test_channel: &Channel, px: &Pmf, limits: &Limits) -> Result<f64> {
    if px.alphabet_size() != test_channel.output_size() {
        return Err(Error::ShapeMismatch(format!(
            "px has {} symbols, test channel emits {}",
            px.alphabet_size(),
            test_channel.output_size()
        )));
    }
    let induced = induced_marginal(cb, test_channel, limits)?;
    let iid = product_extension(px, cb.n(), limits)?;
    total_variation(&induced, &iid)
}

/// Soft-covering TV of one random codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTv {
    pub trial: usize,
    pub seed: u64,
    pub tv: f64,
    pub repeated_codewords: bool,
}

/// Ensemble soft-covering measurement at one `(n, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCoverReport {
    pub n: usize,
    pub rate: f64,
    pub m: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub tv_mean: f64,
    pub tv_stderr: f64,
    pub per_trial: Vec<TrialTv>,
}

/// Sample mean and standard error, summed in slice order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let count = values.len();
    if count == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

/// Mean and standard error of [`soft_cover_tv`] over `trials` codebooks drawn
/// i.i.d. from `py`, codebook `i` generated from `trial_seed(master_seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn expected_soft_cover_tv(
    py: &Pmf,
    test_channel: &Channel,
    px: &Pmf,
    n: usize,
    rate: f64,
    trials: usize,
    master_seed: u64,
    limits: &Limits,
) -> Result<SoftCoverReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let m = crate::codec::codebook_size(n, rate, limits)?;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(master_seed, trial as u64);
            let cb = generate_codebook(py, n, rate, seed, limits)?;
            Ok(TrialTv {
                trial,
                seed,
                tv: soft_cover_tv(&cb, test_channel, px, limits)?,
                repeated_codewords: cb.has_repeated_codewords(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tvs: Vec<f64> = per_trial.iter().map(|t| t.tv).collect();
    let (tv_mean, tv_stderr) = mean_stderr(&tvs);
    Ok(SoftCoverReport {
        n,
        rate,
        m,
        trials,
        master_seed,
        tv_mean,
        tv_stderr,
        per_trial,
    })
}

/// The idealized joint `Q(x^n, m) = (1/M) prod_t P_{X|Y}(x_t | y_t(m))`.
pub fn ideal_joint_q(cb: &Codebook, test_channel: &Channel, limits: &Limits) -> Result<IndexJoint> {
    check_channel(cb, test_channel)?;
    let kx = test_channel.output_size();
    let (n, m) = (cb.n(), cb.m());
    let x_states = sequence_space_size(kx, n, limits.enum_cap)?;
    check_product_cap(x_states as f64 * m as f64, kx, n, limits)?;

    let mut probs = vec![0.0; x_states * m];
    let mut out = Vec::with_capacity(x_states);
    let scale = 1.0 / m as f64;
    for (idx, word) in cb.iter().enumerate() {
        channel_output(word, test_channel, &mut out);
        for (xi, p) in out.iter().enumerate() {
            probs[xi * m + idx] = p * scale;
        }
    }
    Ok(IndexJoint {
        alphabet_size: kx,
        n,
        m,
        probs,
    })
}

/// The joint the system induces: `P(x^n, m) = P_X^n(x^n) P_{M|X^n}(m | x^n)`.
///
/// Sequences of zero source probability get an all-zero row. A sequence of
/// positive probability that no codeword can explain is an
/// [`Error::AllZeroLikelihood`].
pub fn encoder_joint_p(cb: &Codebook, test_channel: &Channel, px: &Pmf, limits: &Limits) -> Result<IndexJoint> {
    check_channel(cb, test_channel)?;
    let kx = test_channel.output_size();
    if px.alphabet_size() != kx {
        return Err(Error::ShapeMismatch(format!(
            "px has {} symbols, test channel emits {kx}",
            px.alphabet_size()
        )));
    }
    let (n, m) = (cb.n(), cb.m());
    let source = product_extension(px, n, limits)?;
    check_product_cap(source.probs().len() as f64 * m as f64, kx, n, limits)?;
    let spec = EncoderSpec::new(test_channel.clone(), cb.clone())?;

    let mut probs = vec![0.0; source.probs().len() * m];
    let mut seq = vec![0u8; n];
    for (xi, &mass) in source.probs().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        sequence_at(xi, kx, &mut seq);
        let post = encoder_posterior(&seq, &spec)?;
        for (slot, p) in probs[xi * m..(xi + 1) * m].iter_mut().zip(post.probs()) {
            *slot = mass * p;
        }
    }
    Ok(IndexJoint {
        alphabet_size: kx,
        n,
        m,
        probs,
    })
}

/// Exact quantities along the chain from soft covering to the distortion bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofCheckReport {
    /// `TV(P, Q)` over `(x^n, m)`.
    pub tv_joint: f64,
    /// `TV(P_{X^n}, Q_{X^n})`.
    pub tv_marginal: f64,
    /// `max |P(m | x) - Q(m | x)|` over sequences with `P(x) > 0`.
    pub conditional_max_gap: f64,
    /// `E_Q[d(X^n, Y^n)]`.
    pub expected_distortion_q: f64,
    /// `E_Q[d] + 2 d_max TV(P, Q)`.
    pub distortion_bound_rhs: f64,
    /// `E_Q[d] + d_max TV(P, Q)`, the tighter variant of the same bound.
    pub distortion_bound_rhs_tight: f64,
    /// `E_P[d(X^n, Y^n)]`.
    pub empirical_distortion: f64,
    pub d_max: f64,
    /// Set when joints over `(x^n, m)` refine those over `(x^n, y^n)`.
    pub repeated_codewords: bool,
}

/// Builds `P` and `Q` for one codebook and evaluates every step of the
/// achievability chain exactly.
pub fn proof_check(
    cb: &Codebook,
    test_channel: &Channel,
    px: &Pmf,
    d: &DistortionMeasure,
    limits: &Limits,
) -> Result<ProofCheckReport> {
    if d.size_x() != test_channel.output_size() || d.size_y() != cb.alphabet_size() {
        return Err(Error::ShapeMismatch(format!(
            "distortion table is {} x {}, alphabets are {} x {}",
            d.size_x(),
            d.size_y(),
            test_channel.output_size(),
            cb.alphabet_size()
        )));
    }
    let q = ideal_joint_q(cb, test_channel, limits)?;
    let p = encoder_joint_p(cb, test_channel, px, limits)?;
    let tv_joint = total_variation(&p, &q)?;
    let tv_marginal = total_variation(&p.marginal_x(), &q.marginal_x())?;

    let kx = q.alphabet_size();
    let (n, m) = (cb.n(), cb.m());
    let mut seq = vec![0u8; n];
    let mut gap: f64 = 0.0;
    let mut expected_q = 0.0;
    let mut expected_p = 0.0;
    for xi in 0..q.probs().len() / m {
        sequence_at(xi, kx, &mut seq);
        let (p_row, q_row) = (p.row(xi), q.row(xi));
        for (idx, word) in cb.iter().enumerate() {
            let dist = avg_distortion(&seq, word, d)?;
            expected_q += q_row[idx] * dist;
            expected_p += p_row[idx] * dist;
        }
        let p_x: f64 = p_row.iter().sum();
        if p_x > 0.0 {
            let q_x: f64 = q_row.iter().sum();
            for (pm, qm) in p_row.iter().zip(q_row) {
                let q_cond = if q_x > 0.0 { qm / q_x } else { 0.0 };
                gap = gap.max((pm / p_x - q_cond).abs());
            }
            if q_x == 0.0 {
                gap = gap.max(1.0);
            }
        }
    }

    Ok(ProofCheckReport {
        tv_joint,
        tv_marginal,
        conditional_max_gap: gap,
        expected_distortion_q: expected_q,
        distortion_bound_rhs: expected_q + 2.0 * d.d_max() * tv_joint,
        distortion_bound_rhs_tight: expected_q + d.d_max() * tv_joint,
        empirical_distortion: expected_p,
        d_max: d.d_max(),
        repeated_codewords: cb.has_repeated_codewords(),
    })
}

/// `prod_t P_Y(y_t) P_{X|Y}(x_t | y_t)` over `(x^n, y^n)`, both lexicographic.
pub fn iid_joint(py: &Pmf, test_channel: &Channel, n: usize, limits: &Limits) -> Result<JointPmf> {
    let (kx, ky) = (test_channel.output_size(), py.alphabet_size());
    if test_channel.input_size() != ky {
        return Err(Error::ShapeMismatch("py and test channel disagree on |Y|".into()));
    }
    let x_states = sequence_space_size(kx, n, limits.enum_cap)?;
    let y_states = sequence_space_size(ky, n, limits.enum_cap)?;
    check_product_cap(x_states as f64 * y_states as f64, kx, n, limits)?;
    let mut probs = vec![0.0; x_states * y_states];
    let (mut xs, mut ys) = (vec![0u8; n], vec![0u8; n]);
    for xi in 0..x_states {
        sequence_at(xi, kx, &mut xs);
        for yi in 0..y_states {
            sequence_at(yi, ky, &mut ys);
            probs[xi * y_states + yi] = xs
                .iter()
                .zip(&ys)
                .map(|(&x, &y)| py.get(y as usize) * test_channel.get(y as usize, x as usize))
                .product();
        }
    }
    Ok(JointPmf::from_normalized(x_states, y_states, probs))
}

/// Average of `Q(x^n, y^n)` over every codebook of `m` codewords drawn i.i.d.
/// from `py`, weighted by its probability. Enumerates all `|Y|^{n m}`
/// codebooks, so only tiny instances fit under the cap.
pub fn codebook_expectation_q(
    py: &Pmf,
    test_channel: &Channel,
    n: usize,
    m: usize,
    limits: &Limits,
) -> Result<JointPmf> {
    let (kx, ky) = (test_channel.output_size(), py.alphabet_size());
    if test_channel.input_size() != ky {
        return Err(Error::ShapeMismatch("py and test channel disagree on |Y|".into()));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and M must be positive".into()));
    }
    let codebooks = sequence_space_size(ky, n * m, limits.enum_cap)?;
    let y_states = sequence_space_size(ky, n, limits.enum_cap)?;
    let x_states = sequence_space_size(kx, n, limits.enum_cap)?;
    check_product_cap(x_states as f64 * y_states as f64, kx, n, limits)?;

    // Expected fraction of codewords equal to each y^n.
    let mut hit = vec![0.0; y_states];
    let mut symbols = vec![0u8; n * m];
    for c in 0..codebooks {
        sequence_at(c, ky, &mut symbols);
        let weight: f64 = symbols.iter().map(|&s| py.get(s as usize)).product();
        if weight == 0.0 {
            continue;
        }
        for word in symbols.chunks_exact(n) {
            hit[crate::finite_prob::sequence_index(word, ky)] += weight / m as f64;
        }
    }

    let mut probs = vec![0.0; x_states * y_states];
    let (mut xs, mut ys) = (vec![0u8; n], vec![0u8; n]);
    for xi in 0..x_states {
        sequence_at(xi, kx, &mut xs);
        for (yi, &h) in hit.iter().enumerate() {
            sequence_at(yi, ky, &mut ys);
            let channel: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(&x, &y)| test_channel.get(y as usize, x as usize))
                .product();
            probs[xi * y_states + yi] = channel * h;
        }
    }
    Ok(JointPmf::from_normalized(x_states, y_states, probs))
}

/// One encode/decode round of the distortion experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionTrial {
    pub trial: usize,
    pub seed: u64,
    /// Chosen codeword index, `None` on an all-zero-likelihood input.
    pub index: Option<usize>,
    pub distortion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub n: usize,
    pub rate: f64,
    pub m: usize,
    pub master_seed: u64,
    pub trials: Vec<DistortionTrial>,
    /// Mean over trials that encoded successfully (`NaN` if none did).
    pub mean: f64,
    pub stderr: f64,
    /// Trials excluded because every codeword had zero likelihood.
    pub failures: usize,
}

/// Runs `trials` independent rounds of: fresh codebook from `py`, fresh
/// source sequence from `px`, likelihood encoding, decoding, and per-letter
/// distortion. Each trial draws everything from one stream seeded with
/// `trial_seed(master_seed, trial)`, in that order.
#[allow(clippy::too_many_arguments)]
pub fn distortion_experiment(
    px: &Pmf,
    py: &Pmf,
    test_channel: &Channel,
    d: &DistortionMeasure,
    n: usize,
    rate: f64,
    trials: usize,
    master_seed: u64,
    limits: &Limits,
) -> Result<DistortionReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least 1 trial".into()));
    }
    if px.alphabet_size() != test_channel.output_size()
        || d.size_x() != px.alphabet_size()
        || d.size_y() != py.alphabet_size()
    {
        return Err(Error::ShapeMismatch(
            "source, test channel and distortion table disagree on alphabets".into(),
        ));
    }
    let m = crate::codec::codebook_size(n, rate, limits)?;
    let rows = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(master_seed, trial as u64);
            let mut rng = stream(seed);
            let cb = generate_codebook_with(py, n, rate, seed, &mut rng, limits)?;
            let x = sample_sequence(px, n, &mut rng);
            let spec = EncoderSpec::new(test_channel.clone(), cb)?;
            match likelihood_encode(&x, &spec, &mut rng) {
                Ok(index) => Ok(DistortionTrial {
                    trial,
                    seed,
                    index: Some(index),
                    distortion: Some(avg_distortion(&x, spec.codebook().word(index), d)?),
                }),
                Err(Error::AllZeroLikelihood) => Ok(DistortionTrial {
                    trial,
                    seed,
                    index: None,
                    distortion: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rows.iter().filter_map(|r| r.distortion).collect();
    let (mean, stderr) = mean_stderr(&values);
    Ok(DistortionReport {
        n,
        rate,
        m,
        master_seed,
        failures: trials - values.len(),
        trials: rows,
        mean,
        stderr,
    })
}
