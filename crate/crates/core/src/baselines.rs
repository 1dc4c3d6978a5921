//! Linear detection baselines: MMSE and maximum-ratio combining (MRC).
//!
//! Both baselines are implemented in their decentralized form: every cluster
//! reduces its observations to a local Gram matrix `H_c^H H_c` and matched
//! filter `H_c^H y_c`, and only those `K×K`/`K×1` reductions cross cluster
//! boundaries. Summing them reproduces the centralized quantities exactly,
//! so the decentralized results match a centralized implementation to
//! floating-point accuracy.
//!
//! For soft-input channel decoding, each linear estimate is interpreted as
//! the true symbol plus a complex Gaussian disturbance whose variance is the
//! exact per-user noise-plus-interference power of the filter (conditioned
//! on the realized channel, for unit-power symbols):
//!
//! * MMSE: error covariance `σ_n² (H^H H + σ_n² I)⁻¹`, evaluated per user
//!   from the Cholesky factor of the regularized Gram matrix.
//! * MRC: `x̂_k = (h_k^H y) / ‖h_k‖²`, whose disturbance power is
//!   `(Σ_{j≠k} |h_k^H h_j|² + σ_n² ‖h_k‖²) / ‖h_k‖⁴`.

use num_complex::Complex64;

use crate::channel::ClusterPartition;
use crate::fusion::{global_belief, FusedObservation, GlobalBelief};
use crate::modem::{Constellation, SymbolBelief};
use crate::numerics::{cholesky, ComplexMatrix};
use crate::{Error, Result};

/// Output of a linear detector: per-user symbol estimates plus the exact
/// per-user noise-and-interference variance of the filter output.
#[derive(Clone, Debug)]
pub struct LinearEstimate {
    pub estimates: Vec<Complex64>,
    pub noise_interference_vars: Vec<f64>,
}

impl LinearEstimate {
    pub fn users(&self) -> usize {
        self.estimates.len()
    }
}

fn fused_gram_and_filter(
    partition: &ClusterPartition,
) -> Result<(ComplexMatrix, Vec<Complex64>)> {
    let users = partition.users();
    let mut gram = ComplexMatrix::zeros(users, users);
    let mut filter = vec![Complex64::new(0.0, 0.0); users];
    for (block, obs) in partition.blocks.iter().zip(&partition.observations) {
        let g = block.gram();
        for i in 0..users {
            for j in 0..users {
                gram.set(i, j, gram.get(i, j) + g.get(i, j));
            }
        }
        for (k, v) in block.herm_mul_vec(obs)?.into_iter().enumerate() {
            filter[k] += v;
        }
    }
    Ok((gram, filter))
}

fn mmse_from_gram(
    mut gram: ComplexMatrix,
    filter: &[Complex64],
    noise_var: f64,
) -> Result<LinearEstimate> {
    gram.add_diagonal(noise_var);
    let chol = cholesky(&gram)?;
    let estimates = chol.solve(filter)?;
    let noise_interference_vars = chol
        .inverse_diagonal()
        .into_iter()
        .map(|d| (noise_var * d).max(0.0))
        .collect();
    Ok(LinearEstimate {
        estimates,
        noise_interference_vars,
    })
}

/// Decentralized MMSE detection over all clusters of a partition.
pub fn mmse(partition: &ClusterPartition) -> Result<LinearEstimate> {
    let (gram, filter) = fused_gram_and_filter(partition)?;
    mmse_from_gram(gram, &filter, partition.noise_var)
}

/// Centralized MMSE detection on an unpartitioned channel.
pub fn mmse_centralized(
    channel: &ComplexMatrix,
    received: &[Complex64],
    noise_var: f64,
) -> Result<LinearEstimate> {
    if received.len() != channel.rows() {
        return Err(Error::Argument(format!(
            "{} observations for {} antennas",
            received.len(),
            channel.rows()
        )));
    }
    mmse_from_gram(channel.gram(), &channel.herm_mul_vec(received)?, noise_var)
}

/// Decentralized maximum-ratio combining over all clusters of a partition.
pub fn mrc(partition: &ClusterPartition) -> Result<LinearEstimate> {
    let users = partition.users();
    let (gram, filter) = fused_gram_and_filter(partition)?;
    let mut estimates = Vec::with_capacity(users);
    let mut noise_interference_vars = Vec::with_capacity(users);
    for k in 0..users {
        let energy = gram.get(k, k).re;
        if !(energy > 0.0) {
            return Err(Error::Numerical(format!(
                "user {k} has zero channel energy; matched filter is undefined"
            )));
        }
        estimates.push(filter[k] / energy);
        let mut interference = 0.0;
        for j in 0..users {
            if j != k {
                interference += gram.get(k, j).norm_sqr();
            }
        }
        noise_interference_vars
            .push((interference + partition.noise_var * energy) / (energy * energy));
    }
    Ok(LinearEstimate {
        estimates,
        noise_interference_vars,
    })
}

/// Interprets a linear estimate as a Gaussian observation of each symbol and
/// forms the per-user posterior beliefs used for hard decisions and LLRs.
pub fn soft_beliefs(
    estimate: &LinearEstimate,
    prior: &SymbolBelief,
    constellation: &Constellation,
) -> Result<Vec<GlobalBelief>> {
    estimate
        .estimates
        .iter()
        .zip(&estimate.noise_interference_vars)
        .map(|(&mean, &var)| {
            let observation = FusedObservation {
                mean,
                variance: var.max(crate::gmp::VARIANCE_FLOOR),
            };
            global_belief(&observation, prior, constellation)
        })
        .collect()
}
