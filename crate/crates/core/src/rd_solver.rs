//! Rate-distortion function by Blahut-Arimoto alternating minimization.
//!
//! For a Lagrange slope `s >= 0` the solver minimizes
//! `I(X;Y) + s * E[d(X,Y)]` over channels `P_{Y|X}`, with the mutual information
//! measured in nats inside the objective. Reported rates are in bits. The
//! reproduction alphabet is exactly the column set of the distortion table.

use crate::error::{Error, Result};
use crate::finite_prob::{Channel, Pmf};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Bracket ceiling for the slope search.
const MAX_SLOPE: f64 = (1u64 << 20) as f64;
const MAX_BISECTIONS: usize = 200;

/// Per-letter distortion table `d(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMeasure {
    size_x: usize,
    size_y: usize,
    table: Vec<f64>,
    d_max: f64,
}

impl DistortionMeasure {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size_x = rows.len();
        let size_y = rows.first().map_or(0, Vec::len);
        if size_x == 0 || size_y == 0 {
            return Err(Error::InvalidArgument("empty distortion table".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != size_y) {
            return Err(Error::ShapeMismatch(format!(
                "distortion row {i} has {} entries, expected {size_y}",
                rows[i].len()
            )));
        }
        let table: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(v) = table.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "distortion entries must be finite and nonnegative, got {v}"
            )));
        }
        let d_max = table.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            size_x,
            size_y,
            table,
            d_max,
        })
    }

    /// `d(x, y) = 1{x != y}` on a `k`-ary alphabet.
    pub fn hamming(k: usize) -> Self {
        let rows = (0..k)
            .map(|x| (0..k).map(|y| if x == y { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(rows).expect("hamming table is valid")
    }

    pub fn size_x(&self) -> usize {
        self.size_x
    }

    pub fn size_y(&self) -> usize {
        self.size_y
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.size_y + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.size_y..(x + 1) * self.size_y]
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.table.chunks(self.size_y).map(<[f64]>::to_vec).collect()
    }

    /// Smallest achievable expected distortion, `sum_x p(x) min_y d(x, y)`.
    pub fn min_distortion(&self, source: &Pmf) -> f64 {
        (0..self.size_x)
            .map(|x| source.get(x) * self.row(x).iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// Output symbol minimizing `E[d(X, y)]` (lowest index on ties) and that
    /// expected distortion. This is the zero-rate operating point.
    pub fn zero_rate_point(&self, source: &Pmf) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for y in 0..self.size_y {
            let dy: f64 = (0..self.size_x).map(|x| source.get(x) * self.get(x, y)).sum();
            if dy < best.1 {
                best = (y, dy);
            }
        }
        best
    }

    /// `E[d(X, Y)]` when `X ~ source` and `Y | X ~ channel`.
    pub fn expected(&self, source: &Pmf, channel: &Channel) -> f64 {
        (0..self.size_x)
            .map(|x| {
                let row = channel.row(x).probs();
                source.get(x) * row.iter().zip(self.row(x)).map(|(w, d)| w * d).sum::<f64>()
            })
            .sum()
    }

    fn check_source(&self, source: &Pmf) -> Result<()> {
        if source.alphabet_size() != self.size_x {
            return Err(Error::ShapeMismatch(format!(
                "source has {} symbols, distortion table has {} rows",
                source.alphabet_size(),
                self.size_x
            )));
        }
        Ok(())
    }
}

/// One point on the rate-distortion curve with its achieving channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub slope: f64,
    pub distortion: f64,
    /// Rate in bits.
    pub rate: f64,
    /// Forward channel `P_{Y|X}`.
    pub channel: Channel,
    pub iterations: usize,
    pub converged: bool,
}

fn rate_bits(source: &Pmf, channel: &[Vec<f64>], marginal: &[f64]) -> f64 {
    let mut total = 0.0;
    for (x, row) in channel.iter().enumerate() {
        let px = source.get(x);
        if px == 0.0 {
            continue;
        }
        for (w, q) in row.iter().zip(marginal) {
            if *w > 0.0 {
                total += px * w * (w / q).log2();
            }
        }
    }
    total.max(0.0)
}

fn output_marginal(source: &Pmf, channel: &[Vec<f64>], size_y: usize) -> Vec<f64> {
    let mut q = vec![0.0; size_y];
    for (x, row) in channel.iter().enumerate() {
        for (acc, w) in q.iter_mut().zip(row) {
            *acc += source.get(x) * w;
        }
    }
    q
}

/// Width of the bracket `[lower, upper]` on the optimal Lagrangian available
/// after one update of the output marginal from `prev` to `next`. The update
/// ratio `next(y) / prev(y)` is the usual `c(y)` coefficient of the bound.
fn duality_gap(prev: &[f64], next: &[f64]) -> f64 {
    let mut top = f64::NEG_INFINITY;
    let mut mean = 0.0;
    for (&q, &q_next) in prev.iter().zip(next) {
        if q > 0.0 {
            let log_c = (q_next / q).ln();
            top = top.max(log_c);
            if q_next > 0.0 {
                mean += q * log_c;
            } else {
                return f64::INFINITY;
            }
        }
    }
    (top - mean).max(0.0)
}

/// Solves for the curve point at Lagrange slope `slope`.
///
/// Stops once successive rate iterates differ by less than `tol` bits and the
/// duality gap on the objective is below `tol` nats. The rate test alone fires
/// early when the rate sits near zero while the marginal is still moving. If
/// both never hold within `max_iters` the last iterate is returned with
/// `converged = false`.
pub fn blahut_arimoto(
    source: &Pmf,
    d: &DistortionMeasure,
    slope: f64,
    tol: f64,
    max_iters: usize,
) -> Result<RdPoint> {
    blahut_arimoto_observed(source, d, slope, tol, max_iters, |_, _| {})
}

/// As [`blahut_arimoto`], calling `observer(iteration, objective)` after every
/// update, where `objective = I(X;Y)[nats] + slope * E[d]`.
pub fn blahut_arimoto_observed(
    source: &Pmf,
    d: &DistortionMeasure,
    slope: f64,
    tol: f64,
    max_iters: usize,
    mut observer: impl FnMut(usize, f64),
) -> Result<RdPoint> {
    d.check_source(source)?;
    if slope < 0.0 || !slope.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "slope must be finite and nonnegative, got {slope}"
        )));
    }
    let (nx, ny) = (d.size_x(), d.size_y());

    if slope == 0.0 {
        let (best, distortion) = d.zero_rate_point(source);
        return Ok(RdPoint {
            slope,
            distortion,
            rate: 0.0,
            channel: Channel::constant(nx, &Pmf::point_mass(ny, best)),
            iterations: 0,
            converged: true,
        });
    }

    let mut channel = vec![vec![1.0 / ny as f64; ny]; nx];
    let mut marginal = output_marginal(source, &channel, ny);
    let mut rate = rate_bits(source, &channel, &marginal);
    let mut iterations = 0;
    let mut converged = false;
    let mut logits = vec![0.0; ny];

    while iterations < max_iters {
        iterations += 1;
        for (x, row) in channel.iter_mut().enumerate() {
            for (y, l) in logits.iter_mut().enumerate() {
                *l = marginal[y].ln() - slope * d.get(x, y);
            }
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (w, l) in row.iter_mut().zip(&logits) {
                *w = (l - top).exp();
                total += *w;
            }
            row.iter_mut().for_each(|w| *w /= total);
        }
        let next_marginal = output_marginal(source, &channel, ny);
        let gap = duality_gap(&marginal, &next_marginal);
        marginal = next_marginal;
        let next_rate = rate_bits(source, &channel, &marginal);
        let distortion: f64 = channel
            .iter()
            .enumerate()
            .map(|(x, row)| source.get(x) * row.iter().zip(d.row(x)).map(|(w, c)| w * c).sum::<f64>())
            .sum();
        observer(iterations, next_rate * std::f64::consts::LN_2 + slope * distortion);
        let delta = (next_rate - rate).abs();
        rate = next_rate;
        if delta < tol && gap < tol {
            converged = true;
            break;
        }
    }

    let channel = Channel::new(channel)?;
    let distortion = d.expected(source, &channel);
    Ok(RdPoint {
        slope,
        distortion,
        rate,
        channel,
        iterations,
        converged,
    })
}

/// Finds the curve point whose distortion matches `target` to within `tol`,
/// bisecting over the slope. The returned channel meets `E[d] <= target`
/// except at the lossless end, where `target` may only be approached to
/// within `tol` from above.
pub fn rd_point_at_distortion(
    source: &Pmf,
    d: &DistortionMeasure,
    target: f64,
    tol: f64,
) -> Result<RdPoint> {
    d.check_source(source)?;
    let solve = |s: f64| blahut_arimoto(source, d, s, DEFAULT_TOL, DEFAULT_MAX_ITERS);
    let d_min = d.min_distortion(source);
    if !target.is_finite() || target < d_min - tol {
        return Err(Error::DistortionOutOfRange { target, min: d_min });
    }
    let (_, d_zero_rate) = d.zero_rate_point(source);
    if target >= d_zero_rate {
        return solve(0.0);
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut at_hi = solve(hi)?;
    while at_hi.distortion > target && hi < MAX_SLOPE {
        lo = hi;
        hi *= 2.0;
        at_hi = solve(hi)?;
    }
    if at_hi.distortion > target {
        return if at_hi.distortion - target < tol {
            Ok(at_hi)
        } else {
            Err(Error::DistortionOutOfRange { target, min: d_min })
        };
    }

    for _ in 0..MAX_BISECTIONS {
        if target - at_hi.distortion < tol || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let at_mid = solve(mid)?;
        if at_mid.distortion <= target {
            hi = mid;
            at_hi = at_mid;
        } else {
            lo = mid;
        }
    }
    Ok(at_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_prob::entropy;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn zero_slope_is_zero_rate() {
        let src = Pmf::new(vec![0.2, 0.5, 0.3]).unwrap();
        let d = DistortionMeasure::new(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ])
        .unwrap();
        let p = blahut_arimoto(&src, &d, 0.0, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(p.rate, 0.0);
        // E[d(X,0)] = 1.1, E[d(X,1)] = 0.5, E[d(X,2)] = 0.9
        assert_eq!(p.channel, Channel::constant(3, &Pmf::point_mass(3, 1)));
        assert_abs_diff_eq!(p.distortion, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_slope_ties_pick_lowest_index() {
        let p = blahut_arimoto(&Pmf::uniform(2), &DistortionMeasure::hamming(2), 0.0, 1e-9, 10)
            .unwrap();
        assert_eq!(p.channel.row(0), &Pmf::point_mass(2, 0));
    }

    #[test]
    fn binary_hamming_closed_form() {
        // On the binary-uniform/Hamming curve the slope for distortion D is ln((1-D)/D).
        let target: f64 = 0.11;
        let slope = ((1.0 - target) / target).ln();
        let p = blahut_arimoto(&Pmf::uniform(2), &DistortionMeasure::hamming(2), slope, 1e-12, 10_000)
            .unwrap();
        assert!(p.converged);
        assert_abs_diff_eq!(p.distortion, 0.11, epsilon = 1e-9);
        assert_abs_diff_eq!(p.rate, 1.0 - h2(0.11), epsilon = 1e-9);
        assert_abs_diff_eq!(p.rate, 0.50009, epsilon = 1e-5);
    }

    #[test]
    fn large_slope_approaches_entropy() {
        let src = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = blahut_arimoto(&src, &DistortionMeasure::hamming(3), 60.0, 1e-12, 10_000).unwrap();
        assert!(p.distortion < 1e-20);
        assert_abs_diff_eq!(p.rate, entropy(&src), epsilon = 1e-9);
    }

    #[test]
    fn at_distortion_examples() {
        let src = Pmf::uniform(2);
        let ham = DistortionMeasure::hamming(2);
        let p = rd_point_at_distortion(&src, &ham, 0.2, 1e-9).unwrap();
        assert!(p.distortion <= 0.2);
        assert_abs_diff_eq!(p.distortion, 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(p.rate, 1.0 - h2(0.2), epsilon = 1e-6);
        assert_abs_diff_eq!(p.rate, 0.27807, epsilon = 1e-5);

        let p = rd_point_at_distortion(&src, &ham, 0.7, 1e-9).unwrap();
        assert_eq!(p.rate, 0.0);
        let p = rd_point_at_distortion(&src, &ham, 0.5, 1e-9).unwrap();
        assert_eq!(p.rate, 0.0);

        let skew = Pmf::new(vec![0.1, 0.2, 0.7]).unwrap();
        let p = rd_point_at_distortion(&skew, &DistortionMeasure::hamming(3), 0.0, 1e-9).unwrap();
        assert!(p.distortion < 1e-9);
        assert_abs_diff_eq!(p.rate, entropy(&skew), epsilon = 1e-6);
    }

    #[test]
    fn at_distortion_rejects_unreachable_targets() {
        let d = DistortionMeasure::new(vec![vec![0.5, 1.0], vec![1.0, 0.25]]).unwrap();
        let err = rd_point_at_distortion(&Pmf::uniform(2), &d, 0.1, 1e-9).unwrap_err();
        assert!(matches!(err, Error::DistortionOutOfRange { .. }));
        assert!(rd_point_at_distortion(&Pmf::uniform(2), &d, 0.375, 1e-9).is_ok());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let src = Pmf::new(vec![0.1, 0.2, 0.7]).unwrap();
        let d = DistortionMeasure::new(vec![
            vec![0.0, 3.0, 1.0],
            vec![2.0, 0.0, 1.0],
            vec![1.0, 2.0, 0.0],
        ])
        .unwrap();
        let p = blahut_arimoto(&src, &d, 1.3, 0.0, 3).unwrap();
        assert!(!p.converged);
        assert_eq!(p.iterations, 3);
    }

    #[test]
    fn invalid_inputs() {
        let ham = DistortionMeasure::hamming(2);
        assert!(blahut_arimoto(&Pmf::uniform(2), &ham, -1.0, 1e-9, 10).is_err());
        assert!(blahut_arimoto(&Pmf::uniform(3), &ham, 1.0, 1e-9, 10).is_err());
        assert!(DistortionMeasure::new(vec![vec![0.0, -1.0]]).is_err());
        assert!(DistortionMeasure::new(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn d_max_recorded() {
        let d = DistortionMeasure::new(vec![vec![0.0, 4.0], vec![2.5, 0.0]]).unwrap();
        assert_eq!(d.d_max(), 4.0);
    }

    fn setup() -> impl Strategy<Value = (Pmf, DistortionMeasure)> {
        (2usize..5, 2usize..5).prop_flat_map(|(nx, ny)| {
            (
                prop::collection::vec(0.01f64..1.0, nx)
                    .prop_map(|w| Pmf::from_weights(w).unwrap()),
                prop::collection::vec(prop::collection::vec(0.0f64..3.0, ny), nx)
                    .prop_map(|rows| DistortionMeasure::new(rows).unwrap()),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn objective_non_increasing((src, d) in setup(), slope in 0.05f64..20.0) {
            let mut trace = Vec::new();
            let p = blahut_arimoto_observed(&src, &d, slope, 1e-10, 2000, |_, obj| trace.push(obj))
                .unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "objective rose: {} -> {}", w[0], w[1]);
            }
            prop_assert!(p.rate >= 0.0 && p.rate <= entropy(&src) + 1e-9);
            for row in p.channel.rows() {
                let total: f64 = row.probs().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
            let d_min = d.min_distortion(&src);
            let (_, d_zero) = d.zero_rate_point(&src);
            prop_assert!(p.distortion >= d_min - 1e-12 && p.distortion <= d_zero + 1e-9);
        }

        #[test]
        fn curve_monotone_in_slope((src, d) in setup(), s1 in 0.05f64..10.0, gap in 0.1f64..10.0) {
            let s2 = s1 + gap;
            let a = blahut_arimoto(&src, &d, s1, 1e-12, 20_000).unwrap();
            let b = blahut_arimoto(&src, &d, s2, 1e-12, 20_000).unwrap();
            prop_assert!(a.distortion >= b.distortion - 1e-6);
            prop_assert!(a.rate <= b.rate + 1e-6);
        }
    }
}
