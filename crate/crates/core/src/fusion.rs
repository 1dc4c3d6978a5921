//! Fusion of per-cluster soft outputs into global symbol beliefs.
//!
//! After every cluster has finished its local message passing, its per-edge
//! means and variances are combined across clusters into one equivalent
//! Gaussian observation per user: precisions add, and precision-weighted
//! means add. The fused observation is then moment-matched against the
//! symbol prior to produce the posterior mass function, the soft symbol
//! estimate, and its conditional variance.
//!
//! Fusion happens exactly once, after the last local iteration — clusters
//! never exchange messages with each other during the iterations. Because
//! only two accumulators per user cross cluster boundaries, each cluster can
//! equivalently pre-reduce its summary to `K` precision/weighted-mean pairs
//! (`reduce_summary`); `fuse_reduced` consumes that compact form and is
//! algebraically identical to `fuse`.

use num_complex::Complex64;

use crate::modem::{posterior_moments, Constellation, SymbolBelief};
use crate::numerics::ComplexMatrix;
use crate::gmp::ClusterSummary;
use crate::{Error, Result};

/// Equivalent fused Gaussian observation of one user's symbol:
/// `mean` observed through noise of variance `variance`.
#[derive(Clone, Copy, Debug)]
pub struct FusedObservation {
    pub mean: Complex64,
    pub variance: f64,
}

/// Per-cluster reduction to the two per-user accumulators that fusion needs.
#[derive(Clone, Debug)]
pub struct ReducedSummary {
    users: usize,
    precision: Vec<f64>,
    weighted_mean: Vec<Complex64>,
}

impl ReducedSummary {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn precision(&self, k: usize) -> f64 {
        self.precision[k]
    }

    pub fn weighted_mean(&self, k: usize) -> Complex64 {
        self.weighted_mean[k]
    }
}

/// Global per-user soft output after fusion.
#[derive(Clone, Debug)]
pub struct GlobalBelief {
    /// Fused Gaussian observation (before applying the discrete prior).
    pub observation: FusedObservation,
    /// Posterior mass per constellation point.
    pub posterior: SymbolBelief,
    /// Posterior mean (the soft symbol estimate).
    pub soft_symbol: Complex64,
    /// Posterior variance of the symbol.
    pub symbol_variance: f64,
}

/// Collapses one cluster's per-edge summary into per-user accumulators:
/// precision `Σ_n |h|²/v` and weighted mean `Σ_n conj(h)·m/v`.
pub fn reduce_summary(summary: &ClusterSummary, block: &ComplexMatrix) -> Result<ReducedSummary> {
    if block.rows() != summary.rows() || block.cols() != summary.users() {
        return Err(Error::Contract(format!(
            "summary is {}x{} but its channel block is {}x{}",
            summary.rows(),
            summary.users(),
            block.rows(),
            block.cols()
        )));
    }
    let users = summary.users();
    let mut precision = vec![0.0; users];
    let mut weighted_mean = vec![Complex64::new(0.0, 0.0); users];
    for n in 0..summary.rows() {
        for k in 0..users {
            let h = block.get(n, k);
            let v = summary.variance(n, k);
            precision[k] += h.norm_sqr() / v;
            weighted_mean[k] += h.conj() * summary.mean(n, k) / v;
        }
    }
    Ok(ReducedSummary {
        users,
        precision,
        weighted_mean,
    })
}

/// Fuses all cluster summaries into one Gaussian observation per user.
pub fn fuse(summaries: &[ClusterSummary], blocks: &[ComplexMatrix]) -> Result<Vec<FusedObservation>> {
    if summaries.is_empty() {
        return Err(Error::Contract("no cluster summaries to fuse".into()));
    }
    if summaries.len() != blocks.len() {
        return Err(Error::Contract(format!(
            "{} cluster summaries but {} channel blocks",
            summaries.len(),
            blocks.len()
        )));
    }
    let reduced: Vec<ReducedSummary> = summaries
        .iter()
        .zip(blocks)
        .map(|(s, b)| reduce_summary(s, b))
        .collect::<Result<_>>()?;
    fuse_reduced(&reduced)
}

/// Fuses pre-reduced cluster accumulators; algebraically identical to `fuse`.
pub fn fuse_reduced(reduced: &[ReducedSummary]) -> Result<Vec<FusedObservation>> {
    if reduced.is_empty() {
        return Err(Error::Contract("no cluster summaries to fuse".into()));
    }
    let users = reduced[0].users;
    for (c, r) in reduced.iter().enumerate() {
        if r.users != users {
            return Err(Error::Contract(format!(
                "cluster {c} reports {} users, expected {users}",
                r.users
            )));
        }
    }
    (0..users)
        .map(|k| {
            let precision: f64 = reduced.iter().map(|r| r.precision[k]).sum();
            let weighted: Complex64 = reduced.iter().map(|r| r.weighted_mean[k]).sum();
            if !(precision > 0.0) {
                return Err(Error::Numerical(format!(
                    "fused precision for user {k} is {precision}; no usable evidence"
                )));
            }
            Ok(FusedObservation {
                mean: weighted / precision,
                variance: 1.0 / precision,
            })
        })
        .collect()
}

/// Applies the discrete symbol prior to a fused observation.
pub fn global_belief(
    observation: &FusedObservation,
    prior: &SymbolBelief,
    constellation: &Constellation,
) -> Result<GlobalBelief> {
    let (soft_symbol, symbol_variance, posterior) = posterior_moments(
        observation.mean,
        observation.variance,
        prior,
        constellation,
    )?;
    Ok(GlobalBelief {
        observation: *observation,
        posterior,
        soft_symbol,
        symbol_variance,
    })
}
