//! Monte Carlo experiment harness: SNR sweeps, trial scheduling, stop rules,
//! and result serialization.
//!
//! Reproducibility rules:
//!
//! * Every trial draws all of its randomness from the stream keyed by
//!   `(master seed, trial index)`. Trials are therefore independent of
//!   scheduling, and two detectors (or two SNR points) evaluated with the
//!   same seed see exactly the same channels, payloads, and noise shapes —
//!   comparisons between them are paired.
//! * Trials run in fixed-size batches. Within a batch the integer error
//!   counts are summed, which is exact and order-independent, so parallel
//!   and serial execution produce identical rows. The stop rule is applied
//!   between batches only.
//!
//! A sweep stops spending trials on a point once it has seen
//! `min_bit_errors` bit errors (reliable estimate) or `max_trials` trials,
//! whichever comes first.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::channel::{
    calibrate_noise, generate_channel, transmit, ClusterPartition, SystemConfig,
};
use crate::coding::{ConvolutionalCode, Interleaver};
use crate::gmp;
use crate::modem::{
    bit_llrs, build_constellation, hard_decision, nearest_point, Constellation,
    ConstellationKind, SymbolBelief,
};
use crate::numerics::sample_complex_gaussian;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Trials per scheduling batch; fixed so results never depend on the number
/// of worker threads.
const BATCH: u64 = 256;

/// Which detector an experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detector {
    /// Message passing inside each cluster, fused once at the end.
    GmpDecentralized,
    /// The same message passing with all antennas in a single cluster.
    GmpCentralized,
    Mmse,
    Mrc,
}

impl Detector {
    pub const ALL: [Detector; 4] = [
        Detector::GmpDecentralized,
        Detector::GmpCentralized,
        Detector::Mmse,
        Detector::Mrc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::GmpDecentralized => "gmp-decentralized",
            Detector::GmpCentralized => "gmp-centralized",
            Detector::Mmse => "mmse",
            Detector::Mrc => "mrc",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gmp-decentralized" | "gmp" => Ok(Detector::GmpDecentralized),
            "gmp-centralized" => Ok(Detector::GmpCentralized),
            "mmse" => Ok(Detector::Mmse),
            "mrc" => Ok(Detector::Mrc),
            other => Err(Error::Argument(format!(
                "unknown detector '{other}' (expected gmp-decentralized, \
                 gmp-centralized, mmse, or mrc)"
            ))),
        }
    }
}

/// Inclusive SNR grid in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrSweep {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrSweep {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !self.start_db.is_finite() || !self.stop_db.is_finite() || !self.step_db.is_finite() {
            return Err(Error::Argument("SNR sweep bounds must be finite".into()));
        }
        if self.stop_db < self.start_db {
            return Err(Error::Argument(format!(
                "SNR sweep stop {} dB lies below start {} dB",
                self.stop_db, self.start_db
            )));
        }
        if self.step_db <= 0.0 {
            return Err(Error::Argument(format!(
                "SNR step must be positive, got {} dB",
                self.step_db
            )));
        }
        let count = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| self.start_db + i as f64 * self.step_db)
            .collect())
    }
}

/// When to stop spending trials on one SNR point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_trials: u64,
    pub min_bit_errors: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_trials: 100_000,
            min_bit_errors: 500,
        }
    }
}

/// A fully resolved experiment: system, detector, SNR grid, coding, stop rule.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub detector: Detector,
    pub sweep: SnrSweep,
    /// Convolutionally encode frames and count post-decoding bit errors.
    pub coded: bool,
    /// Message bits per user per coded frame.
    pub frame_bits: usize,
    pub stop: StopRule,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.sweep.points()?;
        if self.stop.max_trials == 0 {
            return Err(Error::Config("max_trials must be positive".into()));
        }
        if self.coded {
            let code = ConvolutionalCode::rate_half_k7();
            let coded_len = code.encoded_len(self.frame_bits);
            let bps = self.system.constellation.bits_per_symbol();
            if self.frame_bits == 0 {
                return Err(Error::Config("frame_bits must be positive".into()));
            }
            if coded_len % bps != 0 {
                return Err(Error::Config(format!(
                    "coded frame of {coded_len} bits is not a whole number of \
                     {bps}-bit symbols; adjust frame_bits"
                )));
            }
        }
        Ok(())
    }
}

/// On-disk experiment description; every field is optional and falls back to
/// the documented default.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub antennas: Option<usize>,
    pub users: Option<usize>,
    /// Number of equal clusters (exclusive with `cluster_antennas`).
    pub clusters: Option<usize>,
    /// Explicit antennas per cluster (exclusive with `clusters`).
    pub cluster_antennas: Option<Vec<usize>>,
    pub constellation: Option<String>,
    pub iterations: Option<usize>,
    pub detector: Option<String>,
    pub snr_start_db: Option<f64>,
    pub snr_stop_db: Option<f64>,
    pub snr_step_db: Option<f64>,
    pub seed: Option<u64>,
    pub coded: Option<bool>,
    pub frame_bits: Option<usize>,
    pub max_trials: Option<u64>,
    pub min_bit_errors: Option<u64>,
}

impl ExperimentFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid experiment file: {e}")))
    }

    /// Fills defaults and produces a validated spec. Defaults: 120 antennas,
    /// 16 users, 3 equal clusters, QPSK, 5 iterations, the decentralized
    /// message-passing detector, SNR 0–12 dB in 2 dB steps, seed 1, uncoded.
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let antennas = self.antennas.unwrap_or(120);
        let users = self.users.unwrap_or(16);
        let cluster_sizes = match (&self.clusters, &self.cluster_antennas) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "clusters and cluster_antennas are mutually exclusive".into(),
                ))
            }
            (Some(c), None) => {
                let c = *c;
                if c == 0 || antennas % c != 0 {
                    return Err(Error::Config(format!(
                        "cannot split {antennas} antennas uniformly into {c} clusters; \
                         use cluster_antennas for a non-uniform split"
                    )));
                }
                vec![antennas / c; c]
            }
            (None, Some(sizes)) => sizes.clone(),
            (None, None) => {
                if antennas % 3 == 0 {
                    vec![antennas / 3; 3]
                } else {
                    vec![antennas]
                }
            }
        };
        let constellation = match &self.constellation {
            Some(name) => name.parse::<ConstellationKind>()?,
            None => ConstellationKind::Qpsk,
        };
        let detector = match &self.detector {
            Some(name) => name.parse::<Detector>()?,
            None => Detector::GmpDecentralized,
        };
        let stop = StopRule {
            max_trials: self.max_trials.unwrap_or(100_000),
            min_bit_errors: self.min_bit_errors.unwrap_or(500),
        };
        let system = SystemConfig {
            antennas,
            users,
            cluster_sizes,
            constellation,
            iterations: self.iterations.unwrap_or(5),
            snr_db: self.snr_start_db.unwrap_or(0.0),
            seed: self.seed.unwrap_or(1),
            trials: stop.max_trials as usize,
        };
        let sweep = SnrSweep {
            start_db: self.snr_start_db.unwrap_or(0.0),
            stop_db: self.snr_stop_db.unwrap_or(12.0),
            step_db: self.snr_step_db.unwrap_or(2.0),
        };
        let spec = ExperimentSpec {
            system,
            detector,
            sweep,
            coded: self.coded.unwrap_or(false),
            frame_bits: self.frame_bits.unwrap_or(128),
            stop,
        };
        spec.validate().map_err(|e| match e {
            Error::Argument(m) => Error::Config(m),
            other => other,
        })?;
        Ok(spec)
    }
}

/// One measured point of a BER sweep.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub snr_db: f64,
    pub detector: String,
    /// Antennas per cluster, e.g. `"40/40/40"`.
    pub partition: String,
    pub trials: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Wall-clock seconds spent on this point (the only field two identical
    /// runs may differ in).
    pub seconds: f64,
    pub seed: u64,
}

fn partition_label(cluster_sizes: &[usize]) -> String {
    cluster_sizes
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

/// Hard symbol decisions of the configured detector for one channel use.
fn detect_symbols(
    detector: Detector,
    partition: &ClusterPartition,
    iterations: usize,
    constellation: &Constellation,
    prior: &SymbolBelief,
) -> Result<Vec<usize>> {
    match detector {
        Detector::GmpDecentralized => Ok(gmp::detect(partition, iterations, constellation, prior)?
            .iter()
            .map(|b| hard_decision(&b.posterior, constellation))
            .collect()),
        Detector::GmpCentralized => Ok(gmp::detect_centralized(
            partition,
            iterations,
            constellation,
            prior,
        )?
        .iter()
        .map(|b| hard_decision(&b.posterior, constellation))
        .collect()),
        Detector::Mmse => Ok(baselines::mmse(partition)?
            .estimates
            .iter()
            .map(|&e| nearest_point(e, constellation))
            .collect()),
        Detector::Mrc => Ok(baselines::mrc(partition)?
            .estimates
            .iter()
            .map(|&e| nearest_point(e, constellation))
            .collect()),
    }
}

/// Per-user bit LLRs of the configured detector for one channel use.
fn detect_llrs(
    detector: Detector,
    partition: &ClusterPartition,
    iterations: usize,
    constellation: &Constellation,
    prior: &SymbolBelief,
) -> Result<Vec<Vec<f64>>> {
    let beliefs = match detector {
        Detector::GmpDecentralized => gmp::detect(partition, iterations, constellation, prior)?,
        Detector::GmpCentralized => {
            gmp::detect_centralized(partition, iterations, constellation, prior)?
        }
        Detector::Mmse => {
            baselines::soft_beliefs(&baselines::mmse(partition)?, prior, constellation)?
        }
        Detector::Mrc => {
            baselines::soft_beliefs(&baselines::mrc(partition)?, prior, constellation)?
        }
    };
    Ok(beliefs
        .iter()
        .map(|b| bit_llrs(&b.posterior, constellation))
        .collect())
}

/// One uncoded trial: a single channel use; returns the bit errors across
/// all users.
fn uncoded_trial(
    config: &SystemConfig,
    detector: Detector,
    constellation: &Constellation,
    prior: &SymbolBelief,
    trial: u64,
) -> Result<u64> {
    let mut stream = RngStream::new(config.seed, trial);
    let t = transmit(config, &mut stream)?;
    let decided = detect_symbols(
        detector,
        &t.partition,
        config.iterations,
        constellation,
        prior,
    )?;
    let bps = constellation.bits_per_symbol();
    let mut errors = 0u64;
    for (k, &rx) in decided.iter().enumerate() {
        let tx = constellation.point_of_bits(&t.bits[k * bps..(k + 1) * bps])?;
        errors += (constellation.label(tx) ^ constellation.label(rx)).count_ones() as u64;
    }
    Ok(errors)
}

/// One coded trial: every user sends one convolutionally encoded,
/// interleaved frame across independently fading channel uses; returns the
/// post-decoding bit errors across all users.
fn coded_trial(
    config: &SystemConfig,
    detector: Detector,
    constellation: &Constellation,
    prior: &SymbolBelief,
    code: &ConvolutionalCode,
    interleaver: &Interleaver,
    frame_bits: usize,
    trial: u64,
) -> Result<u64> {
    let mut stream = RngStream::new(config.seed, trial);
    let users = config.users;
    let bps = constellation.bits_per_symbol();
    let coded_len = code.encoded_len(frame_bits);
    let uses = coded_len / bps;
    let noise_var = calibrate_noise(config);

    // Fixed draw order: all payloads first, then per use channel and noise.
    let messages: Vec<Vec<u8>> = (0..users)
        .map(|_| (0..frame_bits).map(|_| stream.bit()).collect())
        .collect();
    let coded: Vec<Vec<u8>> = messages
        .iter()
        .map(|m| interleaver.apply(&code.encode(m)?))
        .collect::<Result<_>>()?;

    let mut llrs: Vec<Vec<f64>> = vec![Vec::with_capacity(coded_len); users];
    for s in 0..uses {
        let symbols: Vec<Complex64> = coded
            .iter()
            .map(|c| {
                let idx = constellation.point_of_bits(&c[s * bps..(s + 1) * bps])?;
                Ok(constellation.point(idx))
            })
            .collect::<Result<_>>()?;
        let channel = generate_channel(config, &mut stream)?;
        let noise = sample_complex_gaussian(&mut stream, config.antennas, noise_var)?;
        let mut received = channel.mul_vec(&symbols)?;
        for (r, n) in received.iter_mut().zip(&noise) {
            *r += n;
        }
        let partition = ClusterPartition::from_stacked(
            &channel,
            &received,
            &config.cluster_sizes,
            noise_var,
        )?;
        let use_llrs = detect_llrs(
            detector,
            &partition,
            config.iterations,
            constellation,
            prior,
        )?;
        for (k, l) in use_llrs.into_iter().enumerate() {
            llrs[k].extend(l);
        }
    }

    let mut errors = 0u64;
    for k in 0..users {
        let deinterleaved = interleaver.invert(&llrs[k])?;
        let decoded = code.decode_soft(&deinterleaved)?;
        errors += decoded
            .iter()
            .zip(&messages[k])
            .filter(|(a, b)| a != b)
            .count() as u64;
    }
    Ok(errors)
}

/// Runs one SNR point to its stop condition.
pub fn run_point(spec: &ExperimentSpec, snr_db: f64) -> Result<ResultRow> {
    spec.validate()?;
    let mut config = spec.system.clone();
    config.snr_db = snr_db;
    let constellation = build_constellation(config.constellation);
    let prior = SymbolBelief::uniform(constellation.len());
    let code = ConvolutionalCode::rate_half_k7();
    let interleaver = if spec.coded {
        Some(Interleaver::random(
            code.encoded_len(spec.frame_bits),
            config.seed,
        ))
    } else {
        None
    };
    let bits_per_trial = if spec.coded {
        (config.users * spec.frame_bits) as u64
    } else {
        (config.users * constellation.bits_per_symbol()) as u64
    };

    let start = Instant::now();
    let mut trials = 0u64;
    let mut bit_errors = 0u64;
    while trials < spec.stop.max_trials && bit_errors < spec.stop.min_bit_errors {
        let batch = BATCH.min(spec.stop.max_trials - trials);
        let batch_errors: u64 = (trials..trials + batch)
            .into_par_iter()
            .map(|t| {
                if let Some(il) = &interleaver {
                    coded_trial(
                        &config,
                        spec.detector,
                        &constellation,
                        &prior,
                        &code,
                        il,
                        spec.frame_bits,
                        t,
                    )
                } else {
                    uncoded_trial(&config, spec.detector, &constellation, &prior, t)
                }
            })
            .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
        bit_errors += batch_errors;
        trials += batch;
    }

    Ok(ResultRow {
        snr_db,
        detector: spec.detector.to_string(),
        partition: partition_label(&config.cluster_sizes),
        trials,
        bit_errors,
        ber: bit_errors as f64 / (trials * bits_per_trial) as f64,
        seconds: start.elapsed().as_secs_f64(),
        seed: config.seed,
    })
}

/// Runs the full SNR sweep.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    spec.sweep
        .points()?
        .into_iter()
        .map(|snr| run_point(spec, snr))
        .collect()
}

/// Result serialization format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Argument(format!(
                "unknown output format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// CSV header shared by all BER results.
pub const CSV_HEADER: &str = "snr_db,detector,partition,trials,bit_errors,ber,seconds,seed";

/// Renders rows as CSV with the fixed [`CSV_HEADER`] schema.
pub fn to_csv_string(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3},{}\n",
            r.snr_db, r.detector, r.partition, r.trials, r.bit_errors, r.ber, r.seconds, r.seed
        ));
    }
    out
}

/// Renders rows as a JSON array.
pub fn to_json_string(rows: &[ResultRow]) -> Result<String> {
    serde_json::to_string_pretty(rows)
        .map_err(|e| Error::Numerical(format!("cannot serialize results: {e}")))
}

/// Renders rows in the requested format and, when a path is given, writes
/// them there as well. Returns the rendered text.
pub fn emit_results(
    rows: &[ResultRow],
    format: OutputFormat,
    path: Option<&Path>,
) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Argument("no result rows to emit".into()));
    }
    let text = match format {
        OutputFormat::Csv => to_csv_string(rows),
        OutputFormat::Json => to_json_string(rows)?,
    };
    if let Some(p) = path {
        std::fs::write(p, &text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })?;
    }
    Ok(text)
}
