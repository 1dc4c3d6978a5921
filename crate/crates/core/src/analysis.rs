//! Analytical performance model: state evolution for the message-passing
//! detector, partition quality analysis, and operation-count models.
//!
//! In the large-system limit with i.i.d. CN(0,1) channel entries and
//! Gaussian-source variable nodes, the per-cluster message variances follow
//! a two-line recursion in two scalars — the sum-node message variance `v_f`
//! and the variable-node message variance `v_x` — for a cluster holding a
//! fraction `ω` of the `N` antennas:
//!
//! ```text
//! v_f = σ_n² + K·v_x            1/v_x = 1/σ_x² + ω·N / v_f
//! ```
//!
//! Its fixed point solves a quadratic in `v_f` whose positive root has the
//! closed form implemented by [`se_fixed_point`]. After fusing all clusters,
//! the per-user belief variance is `1/v = 1/σ_x² + Σ_c f(ω_c)` with the
//! per-cluster precision gain `f(ω) = ω·N / v_f(ω)`.
//!
//! Two structural facts about `f` drive the partition analysis:
//! `f` is convex on (0, 1], so by Jensen's inequality the uniform partition
//! *minimizes* the summed precision gain and therefore *maximizes* the fused
//! belief variance — every non-uniform partition of the same antennas does
//! at least as well. And `f(ω)/ω` grows with `ω`, so splitting a fixed
//! antenna array into more (uniform) clusters never decreases the belief
//! variance.

use serde::Serialize;

use crate::rng::{RngStream, STREAM_PARTITION_SAMPLING};
use crate::{Error, Result};

/// System parameters of the large-system model.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeParams {
    /// Total receive antennas `N` across all clusters.
    pub antennas: usize,
    /// Simultaneous users `K`.
    pub users: usize,
    /// Per-symbol source variance `σ_x²`.
    pub source_var: f64,
    /// Per-antenna complex noise variance `σ_n²`.
    pub noise_var: f64,
}

impl SeParams {
    fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::Argument("need at least one antenna".into()));
        }
        if !(self.source_var > 0.0) || !self.source_var.is_finite() {
            return Err(Error::Argument(format!(
                "source variance must be positive and finite, got {}",
                self.source_var
            )));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(Error::Argument(format!(
                "noise variance must be finite and non-negative, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }
}

fn validate_weight(weight: f64) -> Result<()> {
    if !(weight > 0.0 && weight <= 1.0) {
        return Err(Error::Argument(format!(
            "cluster weight must lie in (0, 1], got {weight}"
        )));
    }
    Ok(())
}

/// Fixed-point sum-node message variance `v_f` for a cluster holding the
/// fraction `weight` of all antennas, via the positive root of
/// `v_f² + (ωNσ_x² − Kσ_x² − σ_n²)·v_f − ωNσ_x²σ_n² = 0`,
/// evaluated with the cancellation-free branch of the quadratic formula.
pub fn se_fixed_point(weight: f64, p: &SeParams) -> Result<f64> {
    p.validate()?;
    validate_weight(weight)?;
    let a = weight * p.antennas as f64 * p.source_var;
    let b = p.users as f64 * p.source_var;
    let s = p.noise_var;
    // v_f = (q + sqrt(q² + 4·a·s)) / 2 with q = b + s − a.
    let q = b + s - a;
    let disc = q * q + 4.0 * a * s;
    let root = disc.sqrt();
    if q >= 0.0 {
        Ok(0.5 * (q + root))
    } else {
        // q + root = (disc − q²)/(root − q) = 4·a·s/(root − q): no subtraction
        // of nearly equal quantities, and exactly 0 in the noiseless limit.
        Ok(2.0 * a * s / (root - q))
    }
}

/// Relative residual of the fixed-point quadratic at a candidate `v_f`.
pub fn se_residual(weight: f64, p: &SeParams, v_f: f64) -> f64 {
    let a = weight * p.antennas as f64 * p.source_var;
    let b = p.users as f64 * p.source_var;
    let s = p.noise_var;
    let value = v_f * v_f + (a - b - s) * v_f - a * s;
    let scale = v_f * v_f + (a + b + s) * v_f + a * s;
    if scale == 0.0 {
        value.abs()
    } else {
        value.abs() / scale
    }
}

/// Runs the two-line variance recursion for a fixed number of iterations
/// (starting from the prior variance) and returns the resulting `v_f`.
pub fn se_iterate(weight: f64, p: &SeParams, iterations: usize) -> Result<f64> {
    p.validate()?;
    validate_weight(weight)?;
    let a = weight * p.antennas as f64;
    let k = p.users as f64;
    let mut v_x = p.source_var;
    for _ in 0..iterations {
        let v_f = p.noise_var + k * v_x;
        v_x = if v_f == 0.0 {
            0.0
        } else {
            1.0 / (1.0 / p.source_var + a / v_f)
        };
    }
    Ok(p.noise_var + k * v_x)
}

/// Per-cluster contribution `f(ω) = ω·N / v_f(ω)` to the fused belief
/// precision. Returns `+∞` in the noiseless massive-antenna regime where the
/// fixed-point variance collapses to zero.
pub fn precision_gain(weight: f64, p: &SeParams) -> Result<f64> {
    let v_f = se_fixed_point(weight, p)?;
    let num = weight * p.antennas as f64;
    if v_f == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(num / v_f)
}

/// Predicted fused belief variance for a complete set of cluster weights.
pub fn global_variance(weights: &[f64], p: &SeParams) -> Result<f64> {
    p.validate()?;
    if weights.is_empty() {
        return Err(Error::Argument("need at least one cluster weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "cluster weights must sum to 1, got {total}"
        )));
    }
    let mut precision = 1.0 / p.source_var;
    for &w in weights {
        let g = precision_gain(w, p)?;
        if g.is_infinite() {
            return Ok(0.0);
        }
        precision += g;
    }
    Ok(1.0 / precision)
}

/// Fixed-point state of one cluster.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClusterSe {
    pub weight: f64,
    /// Sum-node message variance `v_f` at the fixed point.
    pub sn_variance: f64,
    /// Variable-node message variance `v_x` at the fixed point.
    pub vn_variance: f64,
}

/// Complete fixed-point prediction for a partition.
#[derive(Clone, Debug, Serialize)]
pub struct SeState {
    pub params: SeParams,
    pub per_cluster: Vec<ClusterSe>,
    /// Predicted per-user belief variance after fusion.
    pub belief_variance: f64,
}

/// Evaluates the fixed point of every cluster plus the fused belief variance.
pub fn se_state(weights: &[f64], p: &SeParams) -> Result<SeState> {
    let belief_variance = global_variance(weights, p)?;
    let per_cluster = weights
        .iter()
        .map(|&w| {
            let v_f = se_fixed_point(w, p)?;
            let a = w * p.antennas as f64;
            let vn_variance = if v_f == 0.0 {
                0.0
            } else {
                1.0 / (1.0 / p.source_var + a / v_f)
            };
            Ok(ClusterSe {
                weight: w,
                sn_variance: v_f,
                vn_variance,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SeState {
        params: *p,
        per_cluster,
        belief_variance,
    })
}

/// Predicted belief variance as one cluster's weight sweeps over (0, 1) while
/// the remaining `clusters − 1` clusters share the rest uniformly.
pub fn belief_variance_sweep(
    p: &SeParams,
    clusters: usize,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    if clusters < 2 {
        return Err(Error::Argument(
            "weight sweep needs at least two clusters".into(),
        ));
    }
    if points < 3 {
        return Err(Error::Argument("need at least three sweep points".into()));
    }
    let mut out = Vec::with_capacity(points);
    for i in 1..=points {
        let x = i as f64 / (points + 1) as f64;
        let rest = (1.0 - x) / (clusters - 1) as f64;
        let mut weights = vec![rest; clusters];
        weights[0] = x;
        out.push((x, global_variance(&weights, p)?));
    }
    Ok(out)
}

/// Structural checks behind the partition guidance, evaluated numerically.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionReport {
    pub params: SeParams,
    pub clusters: usize,
    /// Grid points used for the convexity / monotonicity scans.
    pub grid_points: usize,
    /// Smallest (scaled) second difference of the precision gain on the grid.
    pub min_second_difference: f64,
    /// Precision gain is convex on the grid.
    pub convex: bool,
    /// `f(ω)/ω` never decreases on the grid.
    pub gain_ratio_monotone: bool,
    /// Random integer antenna partitions tested against the uniform one.
    pub jensen_samples: usize,
    /// Partitions whose predicted variance exceeded the uniform one.
    pub jensen_violations: usize,
    /// Largest observed `v(partition) − v(uniform)` (≤ 0 when Jensen holds).
    pub max_jensen_gap: f64,
    /// `v` recomputed from equal weights minus the uniform baseline (exact 0).
    pub uniform_self_gap: f64,
    /// Predicted belief variance for each uniform cluster count that divides
    /// the antenna total, ordered by cluster count.
    pub variance_by_cluster_count: Vec<(usize, f64)>,
    /// Belief variance never decreases as the cluster count grows.
    pub cluster_count_monotone: bool,
}

impl PartitionReport {
    /// True when every structural property held.
    pub fn passed(&self) -> bool {
        self.convex
            && self.gain_ratio_monotone
            && self.jensen_violations == 0
            && self.uniform_self_gap == 0.0
            && self.cluster_count_monotone
    }
}

/// Verifies the structural properties behind the partition guidance: the
/// convexity of the precision gain, the monotone gain ratio, the Jensen
/// comparison against random integer antenna partitions, and monotonicity of
/// the predicted variance in the cluster count.
pub fn partition_checks(
    p: &SeParams,
    clusters: usize,
    samples: usize,
    seed: u64,
) -> Result<PartitionReport> {
    p.validate()?;
    if clusters < 2 {
        return Err(Error::Argument(
            "partition analysis needs at least two clusters".into(),
        ));
    }
    if clusters > p.antennas {
        return Err(Error::Argument(format!(
            "cannot split {} antennas into {clusters} non-empty clusters",
            p.antennas
        )));
    }

    // Convexity and gain-ratio scans on a fixed grid over (0, 1].
    let grid_points = 1000usize;
    let step = 1e-3;
    let gains: Vec<f64> = (1..=grid_points)
        .map(|i| precision_gain(i as f64 * step, p))
        .collect::<Result<_>>()?;
    let mut min_second_difference = f64::INFINITY;
    let mut convex = true;
    for w in gains.windows(3) {
        let scale = w[0].abs().max(w[1].abs()).max(w[2].abs()).max(1.0);
        let d2 = (w[2] - 2.0 * w[1] + w[0]) / scale;
        min_second_difference = min_second_difference.min(d2);
        if d2 < -1e-9 {
            convex = false;
        }
    }
    let mut gain_ratio_monotone = true;
    let mut prev_ratio = f64::NEG_INFINITY;
    for (i, &g) in gains.iter().enumerate() {
        let x = (i + 1) as f64 * step;
        let ratio = g / x;
        if ratio < prev_ratio * (1.0 - 1e-12) - 1e-12 {
            gain_ratio_monotone = false;
        }
        prev_ratio = prev_ratio.max(ratio);
    }

    // Jensen comparison on random integer antenna partitions.
    let n = p.antennas;
    let uniform_count = n / clusters;
    let mut uniform_sizes = vec![uniform_count; clusters];
    // Distribute any remainder so the baseline is as even as possible.
    for size in uniform_sizes.iter_mut().take(n % clusters) {
        *size += 1;
    }
    let uniform_weights: Vec<f64> = uniform_sizes
        .iter()
        .map(|&c| c as f64 / n as f64)
        .collect();
    let v_uniform = global_variance(&uniform_weights, p)?;
    let uniform_self_gap = global_variance(&uniform_weights, p)? - v_uniform;

    let mut stream = RngStream::new(seed, STREAM_PARTITION_SAMPLING);
    let mut jensen_violations = 0usize;
    let mut max_jensen_gap = f64::NEG_INFINITY;
    for _ in 0..samples {
        let sizes = random_composition(n, clusters, &mut stream);
        let weights: Vec<f64> = sizes.iter().map(|&c| c as f64 / n as f64).collect();
        let v = global_variance(&weights, p)?;
        let gap = v - v_uniform;
        max_jensen_gap = max_jensen_gap.max(gap);
        if gap > 1e-9 * v_uniform.max(f64::MIN_POSITIVE) {
            jensen_violations += 1;
        }
    }
    if samples == 0 {
        max_jensen_gap = 0.0;
    }

    // Variance versus uniform cluster count, over all divisors of N.
    let mut variance_by_cluster_count = Vec::new();
    for c in 1..=n.min(16) {
        if n % c == 0 {
            let w = vec![1.0 / c as f64; c];
            variance_by_cluster_count.push((c, global_variance(&w, p)?));
        }
    }
    let cluster_count_monotone = variance_by_cluster_count
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12));

    Ok(PartitionReport {
        params: *p,
        clusters,
        grid_points,
        min_second_difference,
        convex,
        gain_ratio_monotone,
        jensen_samples: samples,
        jensen_violations,
        max_jensen_gap,
        uniform_self_gap,
        variance_by_cluster_count,
        cluster_count_monotone,
    })
}

/// Uniformly random composition of `n` into `parts` positive integers,
/// sampled by choosing distinct cut points.
fn random_composition(n: usize, parts: usize, stream: &mut RngStream) -> Vec<usize> {
    use rand::seq::SliceRandom;
    debug_assert!(parts >= 1 && parts <= n);
    let mut cuts: Vec<usize> = (1..n).collect();
    let (chosen, _) = cuts.partial_shuffle(stream, parts - 1);
    let mut chosen: Vec<usize> = chosen.to_vec();
    chosen.sort_unstable();
    let mut sizes = Vec::with_capacity(parts);
    let mut prev = 0;
    for &c in &chosen {
        sizes.push(c - prev);
        prev = c;
    }
    sizes.push(n - prev);
    sizes
}

/// Complex-multiplication counts of the detectors for one detection of all
/// `K` users, as closed-form functions of the system dimensions. Counts are
/// kept as `f64` because the linear-detector models have fractional
/// per-cluster coefficients.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComplexityReport {
    pub antennas: usize,
    pub users: usize,
    pub clusters: usize,
    pub modulation_order: usize,
    pub iterations: usize,
    pub gmp: f64,
    pub lama: f64,
    pub mmse: f64,
    pub mrc: f64,
}

/// Evaluates all four detector operation-count models.
pub fn complexity_eval(
    antennas: usize,
    users: usize,
    clusters: usize,
    modulation_order: usize,
    iterations: usize,
) -> Result<ComplexityReport> {
    if antennas == 0 || users == 0 || clusters == 0 || modulation_order == 0 || iterations == 0 {
        return Err(Error::Argument(
            "complexity model parameters must all be positive".into(),
        ));
    }
    let n = antennas as f64;
    let k = users as f64;
    let c = clusters as f64;
    let m = modulation_order as f64;
    let t = iterations as f64;

    let gmp = (6.0 * m * t * n + 8.0 * t * n + n + 5.0 * m) * k;
    let lama = (n + c * t) * k * k + (n + 5.0 * c * m * t + 2.0 * c * t + 3.0 * c) * k;
    let mmse = (10.0 / 3.0) * c * k.powi(3)
        + (n + 3.5 * c) * k * k
        + (n + (13.0 / 6.0) * c) * k;
    let mrc = c * k.powi(3) + (n + 3.0 * c) * k * k + (n + 5.0 * c) * k;

    Ok(ComplexityReport {
        antennas,
        users,
        clusters,
        modulation_order,
        iterations,
        gmp,
        lama,
        mmse,
        mrc,
    })
}

/// Division of the message-passing detector's operations between work done
/// inside the clusters and work done once at the fusion point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GmpComplexitySplit {
    pub decentralized: f64,
    pub centralized: f64,
}

impl GmpComplexitySplit {
    pub fn total(&self) -> f64 {
        self.decentralized + self.centralized
    }
}

/// Splits the message-passing operation count into its per-cluster part
/// (message updates, independent of the cluster count) and the single
/// fusion-side moment matching.
pub fn gmp_complexity_split(
    antennas: usize,
    users: usize,
    modulation_order: usize,
    iterations: usize,
) -> Result<GmpComplexitySplit> {
    if antennas == 0 || users == 0 || modulation_order == 0 || iterations == 0 {
        return Err(Error::Argument(
            "complexity model parameters must all be positive".into(),
        ));
    }
    let n = antennas as f64;
    let k = users as f64;
    let m = modulation_order as f64;
    let t = iterations as f64;
    Ok(GmpComplexitySplit {
        decentralized: n * k + 8.0 * t * n * k + 6.0 * m * t * n * k,
        centralized: 5.0 * m * k,
    })
}
