//! System configuration, channel generation and the transmit pipeline.
//!
//! The uplink model is `y = H x + n`: `users` single-antenna transmitters
//! send one constellation symbol each, the base station receives on
//! `antennas` antennas through an i.i.d. Rayleigh channel (entries CN(0,1),
//! perfectly known), and the noise is white complex Gaussian. For
//! decentralized processing the receive antennas are split row-wise into
//! clusters; cluster `c` owns `cluster_sizes[c]` antennas and observes
//! `y_c = H_c x + n_c`.
//!
//! SNR convention: with unit-power constellations the average received
//! signal power per antenna is `users`, so a target SNR in dB calibrates the
//! noise variance to `users · 10^(-snr_db/10)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::modem::{build_constellation, map_bits, ConstellationKind};
use crate::numerics::{sample_complex_gaussian, ComplexMatrix};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Static description of one operating point of the system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Total receive antennas at the base station.
    pub antennas: usize,
    /// Single-antenna users transmitting simultaneously.
    pub users: usize,
    /// Antennas per cluster; must sum to `antennas`.
    pub cluster_sizes: Vec<usize>,
    pub constellation: ConstellationKind,
    /// Message-passing iterations per cluster.
    pub iterations: usize,
    pub snr_db: f64,
    /// Master seed; every random stream is keyed by it.
    pub seed: u64,
    /// Default Monte Carlo trial budget.
    pub trials: usize,
}

impl SystemConfig {
    /// Uniform partition into `clusters` equal clusters.
    pub fn uniform(
        antennas: usize,
        users: usize,
        clusters: usize,
        constellation: ConstellationKind,
    ) -> Result<Self> {
        if clusters == 0 || antennas % clusters != 0 {
            return Err(Error::Config(format!(
                "cannot split {antennas} antennas uniformly into {clusters} clusters"
            )));
        }
        Ok(Self {
            antennas,
            users,
            cluster_sizes: vec![antennas / clusters; clusters],
            constellation,
            iterations: 5,
            snr_db: 0.0,
            seed: 0,
            trials: 100_000,
        })
    }

    pub fn clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    /// Cluster weights `cluster_sizes[c] / antennas`; they sum to one.
    pub fn weights(&self) -> Vec<f64> {
        self.cluster_sizes
            .iter()
            .map(|&n| n as f64 / self.antennas as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::Config("need at least one user".into()));
        }
        if self.antennas < self.users {
            return Err(Error::Config(format!(
                "need at least as many antennas as users ({} < {})",
                self.antennas, self.users
            )));
        }
        if self.cluster_sizes.is_empty() {
            return Err(Error::Config("need at least one cluster".into()));
        }
        if self.cluster_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config("every cluster needs at least one antenna".into()));
        }
        let sum: usize = self.cluster_sizes.iter().sum();
        if sum != self.antennas {
            return Err(Error::Config(format!(
                "cluster sizes sum to {sum}, expected {}",
                self.antennas
            )));
        }
        let weight_sum: f64 = self.weights().iter().sum();
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "cluster weights sum to {weight_sum}, expected 1"
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("need at least one iteration".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config(format!("SNR must be finite, got {}", self.snr_db)));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        Ok(())
    }
}

/// Row-partitioned view of one channel use: per-cluster channel blocks and
/// observations, plus the common noise variance.
#[derive(Clone, Debug)]
pub struct ClusterPartition {
    pub blocks: Vec<ComplexMatrix>,
    pub observations: Vec<Vec<Complex64>>,
    pub noise_var: f64,
}

impl ClusterPartition {
    /// Splits a full channel/observation pair row-wise.
    pub fn from_stacked(
        channel: &ComplexMatrix,
        received: &[Complex64],
        cluster_sizes: &[usize],
        noise_var: f64,
    ) -> Result<Self> {
        if received.len() != channel.rows() {
            return Err(Error::Argument(format!(
                "received length {} does not match {} rows",
                received.len(),
                channel.rows()
            )));
        }
        let total: usize = cluster_sizes.iter().sum();
        if total != channel.rows() || cluster_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Argument(format!(
                "cluster sizes {cluster_sizes:?} do not partition {} rows",
                channel.rows()
            )));
        }
        let mut blocks = Vec::with_capacity(cluster_sizes.len());
        let mut observations = Vec::with_capacity(cluster_sizes.len());
        let mut start = 0;
        for &n in cluster_sizes {
            blocks.push(channel.row_block(start, n)?);
            observations.push(received[start..start + n].to_vec());
            start += n;
        }
        Ok(Self {
            blocks,
            observations,
            noise_var,
        })
    }

    pub fn clusters(&self) -> usize {
        self.blocks.len()
    }

    pub fn users(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.cols())
    }

    pub fn antennas(&self) -> usize {
        self.blocks.iter().map(|b| b.rows()).sum()
    }

    /// Reassembles the full channel matrix and observation vector.
    pub fn stacked(&self) -> Result<(ComplexMatrix, Vec<Complex64>)> {
        let refs: Vec<&ComplexMatrix> = self.blocks.iter().collect();
        let h = ComplexMatrix::vstack(&refs)?;
        let y = self.observations.concat();
        Ok((h, y))
    }

    /// A single-cluster view of the same data (all antennas together).
    pub fn centralized(&self) -> Result<Self> {
        let (h, y) = self.stacked()?;
        let n = h.rows();
        ClusterPartition::from_stacked(&h, &y, &[n], self.noise_var)
    }
}

/// Draws an i.i.d. CN(0,1) channel matrix of shape antennas × users.
pub fn generate_channel(config: &SystemConfig, stream: &mut RngStream) -> Result<ComplexMatrix> {
    let data = sample_complex_gaussian(stream, config.antennas * config.users, 1.0)?;
    ComplexMatrix::from_data(config.antennas, config.users, data)
}

/// Noise variance that realizes the configured SNR under unit-power symbols:
/// `users · 10^(-snr_db / 10)`.
pub fn calibrate_noise(config: &SystemConfig) -> f64 {
    config.users as f64 * 10f64.powf(-config.snr_db / 10.0)
}

/// Everything produced by one channel use.
#[derive(Clone, Debug)]
pub struct Transmission {
    pub bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    pub channel: ComplexMatrix,
    pub received: Vec<Complex64>,
    pub partition: ClusterPartition,
}

/// One channel use at the configured SNR: random bits → symbols → `y = Hx + n`,
/// partitioned into clusters.
pub fn transmit(config: &SystemConfig, stream: &mut RngStream) -> Result<Transmission> {
    transmit_with_noise(config, calibrate_noise(config), stream)
}

/// One channel use with an explicit noise variance (`0` gives `y = Hx`
/// exactly). Draw order is fixed: bits, then channel, then noise.
pub fn transmit_with_noise(
    config: &SystemConfig,
    noise_var: f64,
    stream: &mut RngStream,
) -> Result<Transmission> {
    config.validate()?;
    let constellation = build_constellation(config.constellation);
    let bits: Vec<u8> = (0..config.users * constellation.bits_per_symbol())
        .map(|_| stream.bit())
        .collect();
    let symbols = map_bits(&bits, &constellation)?;
    let channel = generate_channel(config, stream)?;
    let noise = sample_complex_gaussian(stream, config.antennas, noise_var)?;
    let mut received = channel.mul_vec(&symbols)?;
    for (r, n) in received.iter_mut().zip(&noise) {
        *r += n;
    }
    let partition =
        ClusterPartition::from_stacked(&channel, &received, &config.cluster_sizes, noise_var)?;
    Ok(Transmission {
        bits,
        symbols,
        channel,
        received,
        partition,
    })
}
