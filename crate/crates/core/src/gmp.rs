//! Per-cluster Gaussian message-passing (GMP) detection.
//!
//! Each cluster runs belief propagation on the fully connected bipartite
//! graph between its antenna observations (sum nodes) and the user symbols
//! (variable nodes), with all messages approximated by Gaussians:
//!
//! * A variable-node update combines, per edge `(n, k)`, the evidence from
//!   every *other* antenna `n' ≠ n` into an extrinsic Gaussian observation of
//!   symbol `k`, then projects prior × evidence back to a mean/variance pair
//!   (moment matching against the discrete constellation prior).
//! * A sum-node update cancels, per edge `(n, k)`, the estimated interference
//!   of every *other* user `k' ≠ k` from observation `n`, leaving a Gaussian
//!   message about `h_{n,k} x_k` with the residual interference power plus
//!   noise as its variance.
//!
//! Messages start from an uninformative state (zero mean, zero precision) and
//! are updated in a flooding schedule for a fixed number of iterations — no
//! damping, no early exit. Both updates compute per-row/per-column totals
//! once and subtract the self term per edge, which turns the quadratic-cost
//! exclusion sums into linear ones; tests pin this optimization to the
//! literal exclusion loops.
//!
//! Updates are evaluated in the precision domain where it matters: an
//! infinite-variance incoming message simply contributes zero precision, so
//! the first iteration cleanly emits the prior moments.

use num_complex::Complex64;

use crate::channel::ClusterPartition;
use crate::fusion::{self, GlobalBelief};
use crate::modem::{moment_match_into, Constellation, SymbolBelief};
use crate::numerics::ComplexMatrix;
use crate::{Error, Result};

/// Smallest variance ever used as a divisor.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// How variable nodes turn extrinsic Gaussian evidence into outgoing moments.
#[derive(Clone, Copy)]
pub enum VnUpdate<'a> {
    /// Moment matching against a discrete constellation prior (detection).
    MomentMatching {
        constellation: &'a Constellation,
        prior: &'a SymbolBelief,
    },
    /// Keep messages Gaussian for a CN(0, source_variance) source. Used to
    /// validate the state-evolution model, not for detection.
    GaussianSource { source_variance: f64 },
}

/// All messages of one cluster, indexed by edge `(antenna n, user k)`.
#[derive(Clone, Debug)]
pub struct MessageState {
    rows: usize,
    users: usize,
    /// Sum-node → variable-node message means (about `h_{n,k} x_k`).
    sn_mean: Vec<Complex64>,
    /// Raw sum-node → variable-node variances (+∞ before the first update).
    sn_var: Vec<f64>,
    /// Cached `1 / max(sn_var, VARIANCE_FLOOR)`.
    sn_prec: Vec<f64>,
    /// Variable-node → sum-node message means (about `x_k`).
    vn_mean: Vec<Complex64>,
    /// Variable-node → sum-node variances.
    vn_var: Vec<f64>,
    iteration: usize,
}

impl MessageState {
    /// Uninformative start: zero means, zero precision (infinite variance).
    pub fn init(rows: usize, users: usize) -> Self {
        let edges = rows * users;
        Self {
            rows,
            users,
            sn_mean: vec![Complex64::new(0.0, 0.0); edges],
            sn_var: vec![f64::INFINITY; edges],
            sn_prec: vec![0.0; edges],
            vn_mean: vec![Complex64::new(0.0, 0.0); edges],
            vn_var: vec![0.0; edges],
            iteration: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Completed iterations (one iteration = variable-node then sum-node update).
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    #[inline]
    fn at(&self, n: usize, k: usize) -> usize {
        n * self.users + k
    }

    pub fn sn_mean_at(&self, n: usize, k: usize) -> Complex64 {
        self.sn_mean[self.at(n, k)]
    }

    pub fn sn_variance_at(&self, n: usize, k: usize) -> f64 {
        self.sn_var[self.at(n, k)]
    }

    pub fn vn_mean_at(&self, n: usize, k: usize) -> Complex64 {
        self.vn_mean[self.at(n, k)]
    }

    pub fn vn_variance_at(&self, n: usize, k: usize) -> f64 {
        self.vn_var[self.at(n, k)]
    }

    /// Overwrites one sum-node → variable-node message. Intended for tests
    /// and diagnostics; detection itself only uses the update functions.
    pub fn set_sn_message(&mut self, n: usize, k: usize, mean: Complex64, variance: f64) {
        let e = self.at(n, k);
        self.sn_mean[e] = mean;
        self.sn_var[e] = variance;
        self.sn_prec[e] = 1.0 / variance.max(VARIANCE_FLOOR);
    }
}

/// Soft outputs of one cluster after its local iterations: per-edge message
/// means and (floored, strictly positive) variances about `h_{n,k} x_k`.
#[derive(Clone, Debug)]
pub struct ClusterSummary {
    rows: usize,
    users: usize,
    means: Vec<Complex64>,
    variances: Vec<f64>,
}

impl ClusterSummary {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn mean(&self, n: usize, k: usize) -> Complex64 {
        self.means[n * self.users + k]
    }

    pub fn variance(&self, n: usize, k: usize) -> f64 {
        self.variances[n * self.users + k]
    }

    /// Average message variance across all edges (used by convergence
    /// diagnostics and the state-evolution validation).
    pub fn mean_variance(&self) -> f64 {
        self.variances.iter().sum::<f64>() / self.variances.len() as f64
    }
}

/// Variable-node update: for every edge, combine the evidence of all other
/// antennas into an extrinsic Gaussian observation and emit the moments of
/// prior × evidence.
pub fn vn_update(state: &mut MessageState, block: &ComplexMatrix, rule: VnUpdate) {
    debug_assert_eq!(block.rows(), state.rows);
    debug_assert_eq!(block.cols(), state.users);
    let rows = state.rows;
    let users = state.users;

    // Prepared data for the discrete rule.
    let mut scratch: Vec<f64> = Vec::new();
    let mut log_prior: Vec<f64> = Vec::new();
    let mut prior_moments = (Complex64::new(0.0, 0.0), 0.0);
    if let VnUpdate::MomentMatching {
        constellation,
        prior,
    } = rule
    {
        scratch.resize(constellation.len(), 0.0);
        log_prior = prior.masses().iter().map(|&m| m.ln()).collect();
        prior_moments = prior.moments(constellation);
    }

    for k in 0..users {
        // Totals over all antennas for user k.
        let mut prec_total = 0.0;
        let mut wmean_total = Complex64::new(0.0, 0.0);
        for n in 0..rows {
            let e = n * users + k;
            let p = state.sn_prec[e];
            if p > 0.0 {
                let h = block.get(n, k);
                prec_total += h.norm_sqr() * p;
                wmean_total += h.conj() * state.sn_mean[e] * p;
            }
        }
        for n in 0..rows {
            let e = n * users + k;
            let p = state.sn_prec[e];
            let h = block.get(n, k);
            let prec = (prec_total - h.norm_sqr() * p).max(0.0);
            let wmean = wmean_total - h.conj() * state.sn_mean[e] * p;
            match rule {
                VnUpdate::MomentMatching { constellation, .. } => {
                    let (mean, var) = if prec == 0.0 {
                        prior_moments
                    } else {
                        moment_match_into(
                            wmean / prec,
                            1.0 / prec,
                            constellation.points(),
                            constellation.point_power(),
                            Some(&log_prior),
                            &mut scratch,
                        )
                    };
                    state.vn_mean[e] = mean;
                    state.vn_var[e] = var;
                }
                VnUpdate::GaussianSource { source_variance } => {
                    let post_prec = 1.0 / source_variance + prec;
                    let var = 1.0 / post_prec;
                    state.vn_mean[e] = wmean * var;
                    state.vn_var[e] = var;
                }
            }
        }
    }
    state.iteration += 1;
}

/// Sum-node update: for every edge, subtract the soft interference of all
/// other users from the observation and carry residual power plus noise as
/// the message variance.
pub fn sn_update(
    state: &mut MessageState,
    block: &ComplexMatrix,
    observations: &[Complex64],
    noise_var: f64,
) {
    debug_assert_eq!(block.rows(), state.rows);
    debug_assert_eq!(block.cols(), state.users);
    debug_assert_eq!(observations.len(), state.rows);
    let users = state.users;
    for n in 0..state.rows {
        let row = block.row(n);
        let base = n * users;
        let mut soft_sum = Complex64::new(0.0, 0.0);
        let mut var_sum = 0.0;
        for (k, &h) in row.iter().enumerate() {
            soft_sum += h * state.vn_mean[base + k];
            var_sum += h.norm_sqr() * state.vn_var[base + k];
        }
        for (k, &h) in row.iter().enumerate() {
            let e = base + k;
            let mean = observations[n] - (soft_sum - h * state.vn_mean[e]);
            let var = noise_var + (var_sum - h.norm_sqr() * state.vn_var[e]).max(0.0);
            state.sn_mean[e] = mean;
            state.sn_var[e] = var;
            state.sn_prec[e] = 1.0 / var.max(VARIANCE_FLOOR);
        }
    }
}

/// Runs a cluster's local message passing for a fixed number of iterations
/// and returns its fused-ready summary.
pub fn run_cluster(
    block: &ComplexMatrix,
    observations: &[Complex64],
    noise_var: f64,
    iterations: usize,
    rule: VnUpdate,
) -> Result<ClusterSummary> {
    if observations.len() != block.rows() {
        return Err(Error::Argument(format!(
            "{} observations for {} antennas",
            observations.len(),
            block.rows()
        )));
    }
    if block.rows() == 0 || block.cols() == 0 {
        return Err(Error::Argument("cluster must have antennas and users".into()));
    }
    if iterations == 0 {
        return Err(Error::Argument("need at least one iteration".into()));
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::Argument(format!(
            "noise variance must be finite and non-negative, got {noise_var}"
        )));
    }
    match rule {
        VnUpdate::MomentMatching {
            constellation,
            prior,
        } => {
            if prior.len() != constellation.len() {
                return Err(Error::Argument(format!(
                    "prior has {} masses for {} points",
                    prior.len(),
                    constellation.len()
                )));
            }
        }
        VnUpdate::GaussianSource { source_variance } => {
            if !(source_variance > 0.0) || !source_variance.is_finite() {
                return Err(Error::Argument(format!(
                    "source variance must be positive and finite, got {source_variance}"
                )));
            }
        }
    }

    let mut state = MessageState::init(block.rows(), block.cols());
    for _ in 0..iterations {
        vn_update(&mut state, block, rule);
        sn_update(&mut state, block, observations, noise_var);
    }
    let variances = state
        .sn_var
        .iter()
        .map(|&v| v.max(VARIANCE_FLOOR))
        .collect();
    Ok(ClusterSummary {
        rows: state.rows,
        users: state.users,
        means: state.sn_mean,
        variances,
    })
}

/// Full decentralized detection: run every cluster locally, fuse the
/// summaries, and form the global per-user symbol beliefs.
pub fn detect(
    partition: &ClusterPartition,
    iterations: usize,
    constellation: &Constellation,
    prior: &SymbolBelief,
) -> Result<Vec<GlobalBelief>> {
    let rule = VnUpdate::MomentMatching {
        constellation,
        prior,
    };
    let summaries: Vec<ClusterSummary> = partition
        .blocks
        .iter()
        .zip(&partition.observations)
        .map(|(block, obs)| run_cluster(block, obs, partition.noise_var, iterations, rule))
        .collect::<Result<_>>()?;
    let fused = fusion::fuse(&summaries, &partition.blocks)?;
    fused
        .iter()
        .map(|f| fusion::global_belief(f, prior, constellation))
        .collect()
}

/// Centralized reference: identical algorithm with all antennas in a single
/// cluster.
pub fn detect_centralized(
    partition: &ClusterPartition,
    iterations: usize,
    constellation: &Constellation,
    prior: &SymbolBelief,
) -> Result<Vec<GlobalBelief>> {
    detect(&partition.centralized()?, iterations, constellation, prior)
}
