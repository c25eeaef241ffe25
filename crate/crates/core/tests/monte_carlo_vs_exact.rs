//! Monte Carlo ensemble averages against exact averages over every codebook.
//!
//! For tiny n and M the random-codebook ensemble is small enough to enumerate.
//! The oracles below evaluate the encoder and the induced marginal directly
//! in the linear domain.

use lel::analysis::{distortion_experiment, expected_soft_cover_tv};
use lel::finite_prob::{Channel, Pmf};
use lel::rd_solver::DistortionMeasure;
use lel::Limits;

fn digits(mut i: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = i % base;
        i /= base;
    }
    out
}

fn seq_prob(p: &Pmf, s: &[usize]) -> f64 {
    s.iter().map(|&a| p.get(a)).product()
}

fn likelihood(tc: &Channel, x: &[usize], y: &[usize]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| tc.get(b, a)).product()
}

/// Every codebook of `m` words of length `n` with its probability under `py`.
fn codebooks(py: &Pmf, n: usize, m: usize) -> Vec<(f64, Vec<Vec<usize>>)> {
    let ky = py.alphabet_size();
    let words = ky.pow(n as u32);
    (0..words.pow(m as u32))
        .map(|c| {
            let cb: Vec<Vec<usize>> = digits(c, words, m).into_iter().map(|w| digits(w, ky, n)).collect();
            let prob = cb.iter().map(|w| seq_prob(py, w)).product();
            (prob, cb)
        })
        .collect()
}

fn exact_expected_distortion(px: &Pmf, py: &Pmf, tc: &Channel, d: &DistortionMeasure, n: usize, m: usize) -> f64 {
    let kx = px.alphabet_size();
    let mut total = 0.0;
    for (pc, cb) in codebooks(py, n, m) {
        for xi in 0..kx.pow(n as u32) {
            let x = digits(xi, kx, n);
            let w: Vec<f64> = cb.iter().map(|y| likelihood(tc, &x, y)).collect();
            let z: f64 = w.iter().sum();
            let dist: f64 = cb
                .iter()
                .zip(&w)
                .map(|(y, wm)| wm / z * x.iter().zip(y).map(|(&a, &b)| d.get(a, b)).sum::<f64>() / n as f64)
                .sum();
            total += pc * seq_prob(px, &x) * dist;
        }
    }
    total
}

fn exact_expected_tv(py: &Pmf, tc: &Channel, px: &Pmf, n: usize, m: usize) -> f64 {
    let kx = px.alphabet_size();
    codebooks(py, n, m)
        .into_iter()
        .map(|(pc, cb)| {
            let tv: f64 = (0..kx.pow(n as u32))
                .map(|xi| {
                    let x = digits(xi, kx, n);
                    let induced: f64 = cb.iter().map(|y| likelihood(tc, &x, y)).sum::<f64>() / m as f64;
                    (induced - seq_prob(px, &x)).abs()
                })
                .sum::<f64>()
                / 2.0;
            pc * tv
        })
        .sum()
}

#[test]
fn distortion_mean_matches_codebook_ensemble() {
    let limits = Limits::default();
    let px = Pmf::new(vec![0.6, 0.4]).unwrap();
    let py = Pmf::new(vec![0.55, 0.45]).unwrap();
    let tc = Channel::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
    let d = DistortionMeasure::hamming(2);
    // n = 2, R = 1 gives M = 4; n = 3, R = 1/3 gives M = 2.
    for (n, rate, m) in [(2, 1.0, 4), (3, 1.0 / 3.0, 2)] {
        let exact = exact_expected_distortion(&px, &py, &tc, &d, n, m);
        let r = distortion_experiment(&px, &py, &tc, &d, n, rate, 20_000, 9, &limits).unwrap();
        assert_eq!(r.m, m);
        assert_eq!(r.failures, 0);
        assert!(
            (r.mean - exact).abs() < 4.0 * r.stderr,
            "n={n}: Monte Carlo {} +- {} vs exact {exact}",
            r.mean,
            r.stderr
        );
    }
}

#[test]
fn soft_cover_mean_matches_codebook_ensemble() {
    let limits = Limits::default();
    let py = Pmf::new(vec![0.5, 0.5]).unwrap();
    let tc = Channel::bsc(0.2).unwrap();
    let px = Pmf::uniform(2);
    for (n, rate, m) in [(2, 1.0, 4), (3, 1.0 / 3.0, 2)] {
        let exact = exact_expected_tv(&py, &tc, &px, n, m);
        let r = expected_soft_cover_tv(&py, &tc, &px, n, rate, 5_000, 21, &limits).unwrap();
        assert_eq!(r.m, m);
        assert!(
            (r.tv_mean - exact).abs() < 4.0 * r.tv_stderr,
            "n={n}: Monte Carlo {} +- {} vs exact {exact}",
            r.tv_mean,
            r.tv_stderr
        );
    }
}
