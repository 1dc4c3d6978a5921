//! Reference routines shared by the integration suites. Everything here
//! trades speed for directness: literal exclusion loops, plain normalized
//! weights instead of log-domain tricks, full joint enumeration, and a
//! Gauss-Jordan inverse. They deliberately avoid the library's optimized
//! paths so the two sides stay independent.
#![allow(dead_code)]

use dbpsim::modem::Constellation;
use dbpsim::numerics::{sample_complex_gaussian, ComplexMatrix};
use dbpsim::rng::RngStream;
use dbpsim::Complex64;

pub fn random_matrix(rows: usize, cols: usize, stream: &mut RngStream) -> ComplexMatrix {
    let data = sample_complex_gaussian(stream, rows * cols, 1.0).unwrap();
    ComplexMatrix::from_data(rows, cols, data).unwrap()
}

/// Mixed absolute/relative gap, bounded for near-zero references.
pub fn gap(actual: Complex64, reference: Complex64) -> f64 {
    (actual - reference).norm() / (1.0 + reference.norm())
}

pub fn gap_re(actual: f64, reference: f64) -> f64 {
    (actual - reference).abs() / (1.0 + reference.abs())
}

/// Discrete moments of a Gaussian-weighted constellation prior, computed with
/// plainly normalized weights. `gamma = f64::INFINITY` reduces to the prior.
pub fn direct_moments(
    z: Complex64,
    gamma: f64,
    constellation: &Constellation,
    prior: &[f64],
) -> (Complex64, f64) {
    let points = constellation.points();
    let mut dist: Vec<f64> = points.iter().map(|p| (p - z).norm_sqr()).collect();
    if gamma.is_finite() {
        let min = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        for d in dist.iter_mut() {
            *d = (-(*d - min) / gamma).exp();
        }
    } else {
        for d in dist.iter_mut() {
            *d = 1.0;
        }
    }
    let weights: Vec<f64> = dist
        .iter()
        .zip(prior)
        .map(|(likelihood, mass)| likelihood * mass)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut mean = Complex64::new(0.0, 0.0);
    let mut power = 0.0;
    for (w, p) in weights.iter().zip(points) {
        mean += (w / total) * p;
        power += (w / total) * p.norm_sqr();
    }
    (mean, power - mean.norm_sqr())
}

/// Final antenna-to-user messages of one cluster, produced by a scalar
/// transliteration with literal sum loops. Returns `(means, variances)`
/// indexed `[antenna][user]`.
pub fn scalar_cluster_messages(
    block: &ComplexMatrix,
    observations: &[Complex64],
    noise_var: f64,
    iterations: usize,
    constellation: &Constellation,
    prior: &[f64],
) -> (Vec<Vec<Complex64>>, Vec<Vec<f64>>) {
    let rows = block.rows();
    let users = block.cols();
    let zero = Complex64::new(0.0, 0.0);
    let mut sn_mean = vec![vec![zero; users]; rows];
    let mut sn_var = vec![vec![f64::INFINITY; users]; rows];
    let mut vn_mean = vec![vec![zero; users]; rows];
    let mut vn_var = vec![vec![0.0f64; users]; rows];

    for _ in 0..iterations {
        // Symbol-side update: combine every other antenna's message with the
        // prior, then project back onto the constellation.
        for n in 0..rows {
            for k in 0..users {
                let mut prec = 0.0;
                let mut weighted = zero;
                for n2 in 0..rows {
                    if n2 == n {
                        continue;
                    }
                    let h = block.get(n2, k);
                    let inv_v = 1.0 / sn_var[n2][k];
                    prec += h.norm_sqr() * inv_v;
                    weighted += h.conj() * sn_mean[n2][k] * inv_v;
                }
                let (mean, var) = if prec > 0.0 {
                    direct_moments(weighted / prec, 1.0 / prec, constellation, prior)
                } else {
                    direct_moments(zero, f64::INFINITY, constellation, prior)
                };
                vn_mean[n][k] = mean;
                vn_var[n][k] = var;
            }
        }
        // Antenna-side update: cancel every other user's symbol estimate.
        for n in 0..rows {
            for k in 0..users {
                let mut mean = observations[n];
                let mut var = noise_var;
                for k2 in 0..users {
                    if k2 == k {
                        continue;
                    }
                    let h = block.get(n, k2);
                    mean -= h * vn_mean[n][k2];
                    var += h.norm_sqr() * vn_var[n][k2];
                }
                sn_mean[n][k] = mean;
                sn_var[n][k] = var;
            }
        }
    }
    (sn_mean, sn_var)
}

/// Exact per-user posterior marginals by enumerating every joint symbol
/// vector. Cost is `M^K` likelihood evaluations; only for tiny systems.
pub fn exact_marginals(
    channel: &ComplexMatrix,
    received: &[Complex64],
    noise_var: f64,
    constellation: &Constellation,
) -> Vec<Vec<f64>> {
    let users = channel.cols();
    let rows = channel.rows();
    let m = constellation.len();
    let joint = m.pow(users as u32);

    let mut distances = Vec::with_capacity(joint);
    let mut min_distance = f64::INFINITY;
    for idx in 0..joint {
        let mut rem = idx;
        let symbols: Vec<Complex64> = (0..users)
            .map(|_| {
                let digit = rem % m;
                rem /= m;
                constellation.point(digit)
            })
            .collect();
        let mut d = 0.0;
        for n in 0..rows {
            let mut predicted = Complex64::new(0.0, 0.0);
            for k in 0..users {
                predicted += channel.get(n, k) * symbols[k];
            }
            d += (received[n] - predicted).norm_sqr();
        }
        min_distance = min_distance.min(d);
        distances.push(d);
    }

    let mut marginals = vec![vec![0.0f64; m]; users];
    for (idx, d) in distances.iter().enumerate() {
        let weight = (-(d - min_distance) / noise_var).exp();
        let mut rem = idx;
        for marginal in marginals.iter_mut() {
            marginal[rem % m] += weight;
            rem /= m;
        }
    }
    for marginal in marginals.iter_mut() {
        let total: f64 = marginal.iter().sum();
        for mass in marginal.iter_mut() {
            *mass /= total;
        }
    }
    marginals
}

pub fn argmax(masses: &[f64]) -> usize {
    let mut best = 0;
    for (i, m) in masses.iter().enumerate() {
        if *m > masses[best] {
            best = i;
        }
    }
    best
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn explicit_inverse(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut work = vec![vec![Complex64::new(0.0, 0.0); 2 * n]; n];
    for r in 0..n {
        for c in 0..n {
            work[r][c] = a.get(r, c);
        }
        work[r][n + r] = Complex64::new(1.0, 0.0);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                work[i][col]
                    .norm()
                    .partial_cmp(&work[j][col].norm())
                    .unwrap()
            })
            .unwrap();
        assert!(work[pivot][col].norm() > 0.0, "singular matrix");
        work.swap(col, pivot);
        let lead = work[col][col];
        for c in 0..2 * n {
            work[col][c] /= lead;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work[r][col];
            for c in 0..2 * n {
                let sub = factor * work[col][c];
                work[r][c] -= sub;
            }
        }
    }
    ComplexMatrix::from_fn(n, n, |r, c| work[r][n + c])
}
