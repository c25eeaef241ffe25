//! Exact probability primitives over finite alphabets.
//!
//! All distributions are stored in the linear domain. Sequences of length `n`
//! over an alphabet of size `k` are indexed lexicographically with the first
//! symbol most significant, so index `i` corresponds to the base-`k` digits of
//! `i` read left to right. Every module uses this layout.

use crate::error::{Error, Result};
use crate::Limits;

/// Normalization tolerance for single-letter distributions.
pub const PMF_TOL: f64 = 1e-12;
/// Normalization tolerance for distributions over sequence spaces.
pub const SEQ_TOL: f64 = 1e-9;

fn check_masses(probs: &[f64], tol: f64, what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(Error::InvalidDistribution(format!(
            "{what} entry {i} is {p}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {total}"
        )));
    }
    Ok(())
}

/// Anything that is a flat probability vector with a comparable shape.
pub trait Masses {
    fn masses(&self) -> &[f64];
    /// Shape descriptor used to reject comparisons between unlike spaces.
    fn shape(&self) -> Vec<usize>;
}

/// Probability mass function over `{0, .., k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_masses(&probs, PMF_TOL, "pmf")?;
        Ok(Self { probs })
    }

    /// Wraps a vector already known to be normalized up to rounding.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { probs }
    }

    /// Normalizes a nonnegative weight vector.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform pmf needs a nonempty alphabet");
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        assert!(at < k, "point mass outside alphabet");
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Self { probs }
    }

    /// Binary pmf `(1 - p, p)`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![1.0 - p, p])
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Maps a uniform draw in `[0, 1)` to a symbol by inverse CDF. Symbols of
    /// zero mass are never returned.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

impl Masses for Pmf {
    fn masses(&self) -> &[f64] {
        &self.probs
    }
    fn shape(&self) -> Vec<usize> {
        vec![self.probs.len()]
    }
}

/// Row-stochastic matrix: row `a` is the output pmf given input `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    rows: Vec<Pmf>,
    output_size: usize,
}

impl Channel {
    pub fn from_rows(rows: Vec<Pmf>) -> Result<Self> {
        let output_size = rows
            .first()
            .map(Pmf::alphabet_size)
            .ok_or_else(|| Error::InvalidDistribution("channel has no rows".into()))?;
        if let Some(i) = rows.iter().position(|r| r.alphabet_size() != output_size) {
            return Err(Error::ShapeMismatch(format!(
                "channel row {i} has {} entries, expected {output_size}",
                rows[i].alphabet_size()
            )));
        }
        Ok(Self { rows, output_size })
    }

    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                Pmf::new(r).map_err(|e| Error::InvalidDistribution(format!("row {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    pub fn identity(k: usize) -> Self {
        Self {
            rows: (0..k).map(|a| Pmf::point_mass(k, a)).collect(),
            output_size: k,
        }
    }

    /// Channel whose output ignores the input.
    pub fn constant(input_size: usize, output: &Pmf) -> Self {
        Self {
            rows: vec![output.clone(); input_size],
            output_size: output.alphabet_size(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn row(&self, a: usize) -> &Pmf {
        &self.rows[a]
    }

    pub fn rows(&self) -> &[Pmf] {
        &self.rows
    }

    /// Transition probability of output `b` given input `a`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.rows[a].get(b)
    }

    /// Natural-log transition table indexed `[a][b]`; zeros map to `-inf`.
    pub fn log_table(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.probs().iter().map(|p| p.ln()).collect())
            .collect()
    }

    pub fn is_full_support(&self) -> bool {
        self.rows.iter().all(|r| r.probs().iter().all(|&p| p > 0.0))
    }
}

/// Joint pmf over `X x Y`, stored row-major (`x` major).
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    size_x: usize,
    size_y: usize,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(size_x: usize, size_y: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != size_x * size_y {
            return Err(Error::ShapeMismatch(format!(
                "joint table has {} entries, expected {size_x} x {size_y}",
                probs.len()
            )));
        }
        check_masses(&probs, PMF_TOL, "joint pmf")?;
        Ok(Self {
            size_x,
            size_y,
            probs,
        })
    }

    pub(crate) fn from_normalized(size_x: usize, size_y: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), size_x * size_y);
        Self {
            size_x,
            size_y,
            probs,
        }
    }

    /// Product of two independent marginals.
    pub fn product(px: &Pmf, py: &Pmf) -> Self {
        let probs = px
            .probs()
            .iter()
            .flat_map(|a| py.probs().iter().map(move |b| a * b))
            .collect();
        Self {
            size_x: px.alphabet_size(),
            size_y: py.alphabet_size(),
            probs,
        }
    }

    pub fn size_x(&self) -> usize {
        self.size_x
    }

    pub fn size_y(&self) -> usize {
        self.size_y
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.size_y + y]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn marginal_x(&self) -> Pmf {
        Pmf {
            probs: self
                .probs
                .chunks(self.size_y)
                .map(|row| row.iter().sum())
                .collect(),
        }
    }

    pub fn marginal_y(&self) -> Pmf {
        let mut probs = vec![0.0; self.size_y];
        for row in self.probs.chunks(self.size_y) {
            for (acc, p) in probs.iter_mut().zip(row) {
                *acc += p;
            }
        }
        Pmf { probs }
    }
}

impl Masses for JointPmf {
    fn masses(&self) -> &[f64] {
        &self.probs
    }
    fn shape(&self) -> Vec<usize> {
        vec![self.size_x, self.size_y]
    }
}

/// Number of length-`n` sequences over `k` symbols, if within `cap`.
pub fn sequence_space_size(k: usize, n: usize, cap: u64) -> Result<usize> {
    let states = (k as f64).powi(n as i32);
    let exact = u32::try_from(n)
        .ok()
        .and_then(|n| (k as u64).checked_pow(n))
        .filter(|&s| s <= cap);
    exact.map(|s| s as usize).ok_or(Error::EnumerationCap {
        alphabet: k,
        n,
        states,
        cap,
    })
}

/// Lexicographic index of `seq` (first symbol most significant).
pub fn sequence_index(seq: &[u8], k: usize) -> usize {
    seq.iter().fold(0, |acc, &s| acc * k + s as usize)
}

/// Inverse of [`sequence_index`], writing into `out`.
pub fn sequence_at(mut index: usize, k: usize, out: &mut [u8]) {
    for slot in out.iter_mut().rev() {
        *slot = (index % k) as u8;
        index /= k;
    }
}

/// Explicit pmf over the sequence space `X^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDist {
    alphabet_size: usize,
    n: usize,
    probs: Vec<f64>,
}

impl SequenceDist {
    pub fn new(alphabet_size: usize, n: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = sequence_space_size(alphabet_size, n, u64::MAX)?;
        if probs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "sequence distribution has {} entries, expected {alphabet_size}^{n}",
                probs.len()
            )));
        }
        check_masses(&probs, SEQ_TOL, "sequence distribution")?;
        Ok(Self {
            alphabet_size,
            n,
            probs,
        })
    }

    pub(crate) fn from_normalized(alphabet_size: usize, n: usize, probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < SEQ_TOL);
        Self {
            alphabet_size,
            n,
            probs,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, seq: &[u8]) -> f64 {
        self.probs[sequence_index(seq, self.alphabet_size)]
    }
}

impl Masses for SequenceDist {
    fn masses(&self) -> &[f64] {
        &self.probs
    }
    fn shape(&self) -> Vec<usize> {
        vec![self.alphabet_size, self.n]
    }
}

fn plogp_bits(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    p.probs().iter().copied().map(plogp_bits).sum()
}

/// Mutual information `I(X;Y)` in bits.
pub fn mutual_information(j: &JointPmf) -> f64 {
    let px = j.marginal_x();
    let py = j.marginal_y();
    let mut total = 0.0;
    for x in 0..j.size_x() {
        for y in 0..j.size_y() {
            let pxy = j.get(x, y);
            if pxy > 0.0 {
                total += pxy * (pxy / (px.get(x) * py.get(y))).log2();
            }
        }
    }
    total.max(0.0)
}

/// Half the L1 distance between two distributions of the same shape.
pub fn total_variation<D: Masses + ?Sized>(p: &D, q: &D) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!(
            "total variation between shapes {:?} and {:?}",
            p.shape(),
            q.shape()
        )));
    }
    Ok(tv_slices(p.masses(), q.masses()))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * l1).clamp(0.0, 1.0)
}

/// Joint of `input` pushed through `ch`: entry `(a, b) = input(a) ch(b|a)`.
pub fn joint_from(input: &Pmf, ch: &Channel) -> Result<JointPmf> {
    if ch.input_size() != input.alphabet_size() {
        return Err(Error::ShapeMismatch(format!(
            "channel takes {} inputs, pmf has {} symbols",
            ch.input_size(),
            input.alphabet_size()
        )));
    }
    let probs = (0..input.alphabet_size())
        .flat_map(|a| {
            let pa = input.get(a);
            ch.row(a).probs().iter().map(move |b| pa * b)
        })
        .collect();
    Ok(JointPmf {
        size_x: input.alphabet_size(),
        size_y: ch.output_size(),
        probs,
    })
}

/// Result of Bayes-inverting a joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Reversed {
    /// Marginal of the second coordinate.
    pub py: Pmf,
    /// Channel from the second coordinate back to the first.
    pub channel: Channel,
    /// `Y` symbols of zero probability whose rows were set to uniform.
    pub degenerate_rows: Vec<usize>,
}

/// Splits `j` into `P_Y` and the reverse channel `P_{X|Y}`.
pub fn reverse_channel(j: &JointPmf) -> Reversed {
    let py = j.marginal_y();
    let mut degenerate_rows = Vec::new();
    let rows = (0..j.size_y())
        .map(|y| {
            let col: Vec<f64> = (0..j.size_x()).map(|x| j.get(x, y)).collect();
            let total: f64 = col.iter().sum();
            if total > 0.0 {
                Pmf {
                    probs: col.into_iter().map(|p| p / total).collect(),
                }
            } else {
                degenerate_rows.push(y);
                Pmf::uniform(j.size_x())
            }
        })
        .collect();
    Reversed {
        py,
        channel: Channel {
            rows,
            output_size: j.size_x(),
        },
        degenerate_rows,
    }
}

/// I.i.d. extension of `p` to length-`n` sequences.
pub fn product_extension(p: &Pmf, n: usize, limits: &Limits) -> Result<SequenceDist> {
    let k = p.alphabet_size();
    let size = sequence_space_size(k, n, limits.enum_cap)?;
    let mut probs = Vec::with_capacity(size);
    probs.push(1.0);
    for _ in 0..n {
        probs = probs
            .iter()
            .flat_map(|acc| p.probs().iter().map(move |q| acc * q))
            .collect();
    }
    Ok(SequenceDist {
        alphabet_size: k,
        n,
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&Pmf::uniform(2)), 1.0);
        assert_eq!(entropy(&Pmf::point_mass(3, 1)), 0.0);
        let h = entropy(&Pmf::bernoulli(0.11).unwrap());
        assert_abs_diff_eq!(h, h2(0.11), epsilon = 1e-14);
        assert_abs_diff_eq!(h, 0.49991, epsilon = 1e-5);
    }

    #[test]
    fn mutual_information_examples() {
        let indep = JointPmf::product(&Pmf::bernoulli(0.3).unwrap(), &Pmf::uniform(3));
        assert_abs_diff_eq!(mutual_information(&indep), 0.0, epsilon = 1e-12);

        let ident = joint_from(&Pmf::uniform(2), &Channel::identity(2)).unwrap();
        assert_abs_diff_eq!(mutual_information(&ident), 1.0, epsilon = 1e-14);

        let bsc = joint_from(&Pmf::uniform(2), &Channel::bsc(0.11).unwrap()).unwrap();
        let i = mutual_information(&bsc);
        assert_abs_diff_eq!(i, 1.0 - h2(0.11), epsilon = 1e-14);
        assert_abs_diff_eq!(i, 0.50009, epsilon = 1e-5);
    }

    #[test]
    fn total_variation_examples() {
        let p = Pmf::bernoulli(0.3).unwrap();
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let a = Pmf::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let b = Pmf::new(vec![0.0, 0.0, 0.25, 0.75]).unwrap();
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
        let half = Pmf::bernoulli(0.5).unwrap();
        let three_q = Pmf::bernoulli(0.75).unwrap();
        assert_abs_diff_eq!(total_variation(&half, &three_q).unwrap(), 0.25);
    }

    #[test]
    fn total_variation_rejects_shape_mismatch() {
        let err = total_variation(&Pmf::uniform(2), &Pmf::uniform(3)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
        let limits = Limits::default();
        let a = product_extension(&Pmf::uniform(2), 2, &limits).unwrap();
        let b = product_extension(&Pmf::uniform(4), 1, &limits).unwrap();
        assert!(total_variation(&a, &b).is_err());
    }

    #[test]
    fn joint_from_examples() {
        let j = joint_from(&Pmf::point_mass(2, 1), &Channel::identity(2)).unwrap();
        assert_eq!(j.probs(), &[0.0, 0.0, 0.0, 1.0]);

        let j = joint_from(&Pmf::uniform(2), &Channel::bsc(0.11).unwrap()).unwrap();
        for (got, want) in j.probs().iter().zip([0.445, 0.055, 0.055, 0.445]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }

        let input = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        let ch = Channel::constant(3, &Pmf::point_mass(2, 0));
        let j = joint_from(&input, &ch).unwrap();
        assert_eq!(j.marginal_y().probs(), &[1.0, 0.0]);
        for x in 0..3 {
            assert_eq!(j.get(x, 0), input.get(x));
            assert_eq!(j.get(x, 1), 0.0);
        }
    }

    #[test]
    fn joint_from_size_mismatch() {
        assert!(joint_from(&Pmf::uniform(3), &Channel::identity(2)).is_err());
    }

    #[test]
    fn reverse_channel_examples() {
        let j = JointPmf::new(2, 2, vec![0.445, 0.055, 0.055, 0.445]).unwrap();
        let r = reverse_channel(&j);
        assert_abs_diff_eq!(r.py.get(0), 0.5, epsilon = 1e-15);
        let bsc = Channel::bsc(0.11).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                assert_abs_diff_eq!(r.channel.get(y, x), bsc.get(y, x), epsilon = 1e-15);
            }
        }
        assert!(r.degenerate_rows.is_empty());

        let px = Pmf::new(vec![0.1, 0.6, 0.3]).unwrap();
        let r = reverse_channel(&JointPmf::product(&px, &Pmf::bernoulli(0.4).unwrap()));
        for row in r.channel.rows() {
            for (a, b) in row.probs().iter().zip(px.probs()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
            }
        }

        let r = reverse_channel(&joint_from(&Pmf::uniform(3), &Channel::identity(3)).unwrap());
        assert_eq!(r.channel, Channel::identity(3));
    }

    #[test]
    fn reverse_channel_flags_zero_rows() {
        let j = joint_from(&Pmf::uniform(2), &Channel::constant(2, &Pmf::point_mass(3, 0)))
            .unwrap();
        let r = reverse_channel(&j);
        assert_eq!(r.degenerate_rows, vec![1, 2]);
        assert_eq!(r.channel.row(1), &Pmf::uniform(2));
    }

    #[test]
    fn product_extension_examples() {
        let limits = Limits::default();
        let p = Pmf::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(product_extension(&p, 1, &limits).unwrap().probs(), p.probs());
        let u = product_extension(&Pmf::uniform(2), 3, &limits).unwrap();
        assert_eq!(u.probs(), &[0.125; 8]);
        let b = product_extension(&Pmf::bernoulli(0.2).unwrap(), 2, &limits).unwrap();
        for (got, want) in b.probs().iter().zip([0.64, 0.16, 0.16, 0.04]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn product_extension_respects_cap() {
        let limits = Limits {
            enum_cap: 1000,
            ..Limits::default()
        };
        let err = product_extension(&Pmf::uniform(2), 10, &limits).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { alphabet: 2, n: 10, .. }));
        assert!(product_extension(&Pmf::uniform(2), 9, &limits).is_ok());
    }

    #[test]
    fn invalid_pmfs_rejected() {
        assert!(Pmf::new(vec![]).is_err());
        assert!(Pmf::new(vec![0.5, 0.6]).is_err());
        assert!(Pmf::new(vec![1.5, -0.5]).is_err());
        assert!(Pmf::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Channel::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn sequence_indexing_is_lexicographic() {
        assert_eq!(sequence_index(&[0, 0, 1], 2), 1);
        assert_eq!(sequence_index(&[1, 0, 0], 2), 4);
        assert_eq!(sequence_index(&[2, 1], 3), 7);
        let mut buf = [0u8; 3];
        sequence_at(6, 2, &mut buf);
        assert_eq!(buf, [1, 1, 0]);
    }

    #[test]
    fn sampler_never_returns_zero_mass_symbols() {
        let p = Pmf::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            let s = p.sample_with(u);
            assert!(s == 1 || s == 3);
        }
        assert_eq!(p.sample_with(0.9999999999999999), 3);
    }

    fn pmf_strategy(k: usize) -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, k)
            .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3)
            .prop_map(|w| Pmf::from_weights(w).unwrap())
    }

    fn channel_strategy(kin: usize, kout: usize) -> impl Strategy<Value = Channel> {
        prop::collection::vec(pmf_strategy(kout), kin)
            .prop_map(|rows| Channel::from_rows(rows).unwrap())
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(p in pmf_strategy(5), q in pmf_strategy(5), r in pmf_strategy(5)) {
            let pq = total_variation(&p, &q).unwrap();
            let qp = total_variation(&q, &p).unwrap();
            let pr = total_variation(&p, &r).unwrap();
            let qr = total_variation(&q, &r).unwrap();
            prop_assert!((0.0..=1.0).contains(&pq));
            prop_assert_eq!(pq, qp);
            prop_assert!(pr <= pq + qr + 1e-15);
        }

        #[test]
        fn tv_permutation_invariant(p in pmf_strategy(4), q in pmf_strategy(4),
                                    perm in Just(vec![2usize, 0, 3, 1]).prop_shuffle()) {
            let permute = |d: &Pmf| Pmf::new(perm.iter().map(|&i| d.get(i)).collect()).unwrap();
            let a = total_variation(&p, &q).unwrap();
            let b = total_variation(&permute(&p), &permute(&q)).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
        }

        #[test]
        fn joint_marginal_recovers_input(input in pmf_strategy(3), ch in channel_strategy(3, 4)) {
            let j = joint_from(&input, &ch).unwrap();
            for (a, b) in j.marginal_x().probs().iter().zip(input.probs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn reverse_then_forward_reconstructs(input in pmf_strategy(3), ch in channel_strategy(3, 4)) {
            let j = joint_from(&input, &ch).unwrap();
            let r = reverse_channel(&j);
            let back = joint_from(&r.py, &r.channel).unwrap();
            for x in 0..3 {
                for y in 0..4 {
                    if r.py.get(y) > 0.0 {
                        prop_assert!((j.get(x, y) - back.get(y, x)).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn mutual_information_nonnegative(input in pmf_strategy(3), ch in channel_strategy(3, 3),
                                          py in pmf_strategy(4)) {
            let j = joint_from(&input, &ch).unwrap();
            prop_assert!(mutual_information(&j) >= 0.0);
            let indep = JointPmf::product(&input, &py);
            prop_assert!(mutual_information(&indep).abs() < 1e-12);
        }

        #[test]
        fn product_extension_marginalizes(p in pmf_strategy(3), n in 2usize..6, coord in 0usize..6) {
            let coord = coord % n;
            let limits = Limits::default();
            let full = product_extension(&p, n, &limits).unwrap();
            let shorter = product_extension(&p, n - 1, &limits).unwrap();
            let k = 3;
            let mut seq = vec![0u8; n];
            let mut rest = vec![0u8; n - 1];
            for (i, &mass) in full.probs().iter().enumerate() {
                sequence_at(i, k, &mut seq);
                let v = seq[coord] as usize;
                rest.iter_mut()
                    .zip(seq.iter().enumerate().filter(|(t, _)| *t != coord).map(|(_, s)| *s))
                    .for_each(|(slot, s)| *slot = s);
                let want = shorter.prob_of(&rest) * p.get(v);
                prop_assert!((mass - want).abs() < 1e-15);
            }
            let total: f64 = full.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < SEQ_TOL);
        }
    }
}
