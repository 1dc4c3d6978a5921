//! Command-line front end for the decentralized massive MU-MIMO simulator.
//!
//! Four subcommands cover the library's surface: `ber` runs Monte Carlo
//! bit-error-rate sweeps, `se` evaluates the large-system fixed-point
//! prediction, `partition` runs the structural partition-quality checks, and
//! `complexity` prints the closed-form operation counts.
//!
//! Results go to stdout (CSV or JSON) and optionally to `--out`. Errors are
//! reported as a single JSON line on stderr; invalid arguments or
//! configuration exit with code 2, runtime failures with code 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbpsim::analysis::{
    belief_variance_sweep, complexity_eval, gmp_complexity_split, partition_checks, se_state,
    SeParams,
};
use dbpsim::harness::{emit_results, run_experiment, ExperimentFile, OutputFormat};
use dbpsim::{Error, Result};

const SNR_CONVENTION: &str = "SNR convention: every user transmits at unit symbol power, so the \
average received signal power per antenna equals the user count K and an SNR of s dB \
corresponds to a per-antenna noise variance of K*10^(-s/10).";

#[derive(Parser)]
#[command(
    name = "dbpsim",
    version,
    about = "Uplink massive MU-MIMO link simulator with decentralized baseband processing",
    long_about = None,
    after_help = SNR_CONVENTION
)]
struct Cli {
    /// Experiment description file (TOML). Command-line flags override its
    /// values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed override; every random stream is keyed by it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write the rendered output to this file.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Output format: csv or json. Defaults to csv for `ber` and json for
    /// the analysis commands.
    #[arg(long, global = true)]
    format: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo bit-error-rate sweep over an SNR grid.
    Ber(BerArgs),
    /// Large-system fixed-point prediction of the message-passing detector.
    Se(SeArgs),
    /// Structural checks behind the partition guidance (convexity of the
    /// precision gain, Jensen comparison, cluster-count monotonicity).
    Partition(PartitionArgs),
    /// Closed-form complex-multiplication counts of the detectors.
    Complexity(ComplexityArgs),
}

#[derive(Args)]
struct BerArgs {
    /// Total receive antennas.
    #[arg(long)]
    antennas: Option<usize>,
    /// Simultaneous single-antenna users.
    #[arg(long)]
    users: Option<usize>,
    /// Number of equal clusters (exclusive with --cluster-antennas).
    #[arg(long)]
    clusters: Option<usize>,
    /// Explicit antennas per cluster, e.g. 60,40,20.
    #[arg(long, value_delimiter = ',', value_name = "N1,N2,...")]
    cluster_antennas: Option<Vec<usize>>,
    /// Constellation: qpsk or 16qam.
    #[arg(long)]
    constellation: Option<String>,
    /// Message-passing iterations per cluster.
    #[arg(long)]
    iterations: Option<usize>,
    /// Detector: gmp-decentralized, gmp-centralized, mmse, or mrc.
    #[arg(long)]
    detector: Option<String>,
    /// First SNR point in dB.
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    snr_start: Option<f64>,
    /// Last SNR point in dB (inclusive).
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    snr_stop: Option<f64>,
    /// SNR grid step in dB.
    #[arg(long, value_name = "DB")]
    snr_step: Option<f64>,
    /// Convolutionally encode frames and count post-decoding bit errors.
    #[arg(long)]
    coded: bool,
    /// Message bits per user per coded frame.
    #[arg(long)]
    frame_bits: Option<usize>,
    /// Trial budget per SNR point.
    #[arg(long)]
    max_trials: Option<u64>,
    /// Stop a point early once this many bit errors were seen.
    #[arg(long)]
    min_bit_errors: Option<u64>,
}

#[derive(Args)]
struct SeArgs {
    /// Total receive antennas.
    #[arg(long, default_value_t = 120)]
    antennas: usize,
    /// Simultaneous users.
    #[arg(long, default_value_t = 16)]
    users: usize,
    /// Operating SNR in dB.
    #[arg(long, value_name = "DB", default_value_t = 0.0, allow_negative_numbers = true)]
    snr: f64,
    /// Number of equal clusters (exclusive with --weights).
    #[arg(long)]
    clusters: Option<usize>,
    /// Explicit cluster weights summing to 1, e.g. 0.5,0.3,0.2.
    #[arg(long, value_delimiter = ',', value_name = "W1,W2,...")]
    weights: Option<Vec<f64>>,
    /// Instead of one fixed point, sweep the first cluster's weight over
    /// this many grid points (remaining clusters stay uniform).
    #[arg(long, value_name = "POINTS")]
    sweep_points: Option<usize>,
}

#[derive(Args)]
struct PartitionArgs {
    /// Total receive antennas.
    #[arg(long, default_value_t = 120)]
    antennas: usize,
    /// Simultaneous users.
    #[arg(long, default_value_t = 16)]
    users: usize,
    /// Operating SNR in dB.
    #[arg(long, value_name = "DB", default_value_t = 0.0, allow_negative_numbers = true)]
    snr: f64,
    /// Clusters per sampled partition.
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    /// Random integer partitions compared against the uniform one.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Total receive antennas.
    #[arg(long, default_value_t = 120)]
    antennas: usize,
    /// Simultaneous users.
    #[arg(long, default_value_t = 8)]
    users: usize,
    /// Clusters.
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    /// Constellation size M.
    #[arg(long, default_value_t = 4)]
    modulation_order: usize,
    /// Message-passing iterations.
    #[arg(long, default_value_t = 5)]
    iterations: usize,
}

/// Per-user noise variance for the documented SNR convention.
fn noise_var_for(users: usize, snr_db: f64) -> f64 {
    users as f64 * 10f64.powf(-snr_db / 10.0)
}

fn parse_format(cli: &Cli, default: OutputFormat) -> Result<OutputFormat> {
    match &cli.format {
        Some(text) => text.parse(),
        None => Ok(default),
    }
}

fn load_experiment_file(path: Option<&Path>) -> Result<ExperimentFile> {
    match path {
        None => Ok(ExperimentFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.display().to_string(),
                source,
            })?;
            ExperimentFile::from_toml_str(&text)
        }
    }
}

/// Writes `text` to `--out` when given; always returns it for stdout.
fn deliver(text: String, out: Option<&Path>) -> Result<String> {
    if let Some(p) = out {
        std::fs::write(p, &text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })?;
    }
    Ok(text)
}

fn run_ber(cli: &Cli, args: &BerArgs) -> Result<String> {
    let mut file = load_experiment_file(cli.config.as_deref())?;
    if args.antennas.is_some() {
        file.antennas = args.antennas;
    }
    if args.users.is_some() {
        file.users = args.users;
    }
    if args.clusters.is_some() {
        file.clusters = args.clusters;
        file.cluster_antennas = None;
    }
    if args.cluster_antennas.is_some() {
        file.cluster_antennas = args.cluster_antennas.clone();
        if args.clusters.is_none() {
            file.clusters = None;
        }
    }
    if args.constellation.is_some() {
        file.constellation = args.constellation.clone();
    }
    if args.iterations.is_some() {
        file.iterations = args.iterations;
    }
    if args.detector.is_some() {
        file.detector = args.detector.clone();
    }
    if args.snr_start.is_some() {
        file.snr_start_db = args.snr_start;
    }
    if args.snr_stop.is_some() {
        file.snr_stop_db = args.snr_stop;
    }
    if args.snr_step.is_some() {
        file.snr_step_db = args.snr_step;
    }
    if args.coded {
        file.coded = Some(true);
    }
    if args.frame_bits.is_some() {
        file.frame_bits = args.frame_bits;
    }
    if args.max_trials.is_some() {
        file.max_trials = args.max_trials;
    }
    if args.min_bit_errors.is_some() {
        file.min_bit_errors = args.min_bit_errors;
    }
    if cli.seed.is_some() {
        file.seed = cli.seed;
    }

    let spec = file.resolve()?;
    let rows = run_experiment(&spec)?;
    let format = parse_format(cli, OutputFormat::Csv)?;
    emit_results(&rows, format, cli.out.as_deref())
}

fn se_weights(args: &SeArgs) -> Result<Vec<f64>> {
    match (&args.weights, args.clusters) {
        (Some(_), Some(_)) => Err(Error::Argument(
            "--weights and --clusters are mutually exclusive".into(),
        )),
        (Some(w), None) => Ok(w.clone()),
        (None, c) => {
            let c = c.unwrap_or(3);
            if c == 0 {
                return Err(Error::Argument("need at least one cluster".into()));
            }
            Ok(vec![1.0 / c as f64; c])
        }
    }
}

fn run_se(cli: &Cli, args: &SeArgs) -> Result<String> {
    let p = SeParams {
        antennas: args.antennas,
        users: args.users,
        source_var: 1.0,
        noise_var: noise_var_for(args.users, args.snr),
    };
    let format = parse_format(cli, OutputFormat::Json)?;
    let text = if let Some(points) = args.sweep_points {
        let clusters = args.clusters.unwrap_or(2);
        let sweep = belief_variance_sweep(&p, clusters, points)?;
        match format {
            OutputFormat::Csv => {
                let mut out = String::from("weight,belief_variance\n");
                for (w, v) in &sweep {
                    out.push_str(&format!("{w},{v}\n"));
                }
                out
            }
            OutputFormat::Json => {
                let rows: Vec<serde_json::Value> = sweep
                    .iter()
                    .map(|(w, v)| serde_json::json!({"weight": w, "belief_variance": v}))
                    .collect();
                to_pretty(&rows)?
            }
        }
    } else {
        let state = se_state(&se_weights(args)?, &p)?;
        match format {
            OutputFormat::Csv => {
                let mut out = String::from("weight,sn_variance,vn_variance,belief_variance\n");
                for c in &state.per_cluster {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        c.weight, c.sn_variance, c.vn_variance, state.belief_variance
                    ));
                }
                out
            }
            OutputFormat::Json => to_pretty(&state)?,
        }
    };
    deliver(text, cli.out.as_deref())
}

fn run_partition(cli: &Cli, args: &PartitionArgs) -> Result<String> {
    let p = SeParams {
        antennas: args.antennas,
        users: args.users,
        source_var: 1.0,
        noise_var: noise_var_for(args.users, args.snr),
    };
    let report = partition_checks(&p, args.clusters, args.samples, cli.seed.unwrap_or(0))?;
    let format = parse_format(cli, OutputFormat::Json)?;
    let text = match format {
        OutputFormat::Json => to_pretty(&report)?,
        OutputFormat::Csv => {
            let mut out = String::from("check,value\n");
            out.push_str(&format!("convex,{}\n", report.convex));
            out.push_str(&format!(
                "gain_ratio_monotone,{}\n",
                report.gain_ratio_monotone
            ));
            out.push_str(&format!("jensen_samples,{}\n", report.jensen_samples));
            out.push_str(&format!("jensen_violations,{}\n", report.jensen_violations));
            out.push_str(&format!("max_jensen_gap,{}\n", report.max_jensen_gap));
            out.push_str(&format!("uniform_self_gap,{}\n", report.uniform_self_gap));
            out.push_str(&format!(
                "cluster_count_monotone,{}\n",
                report.cluster_count_monotone
            ));
            out.push_str(&format!("passed,{}\n", report.passed()));
            out
        }
    };
    deliver(text, cli.out.as_deref())
}

fn run_complexity(cli: &Cli, args: &ComplexityArgs) -> Result<String> {
    let report = complexity_eval(
        args.antennas,
        args.users,
        args.clusters,
        args.modulation_order,
        args.iterations,
    )?;
    let split = gmp_complexity_split(
        args.antennas,
        args.users,
        args.modulation_order,
        args.iterations,
    )?;
    let format = parse_format(cli, OutputFormat::Json)?;
    let text = match format {
        OutputFormat::Json => {
            let mut value = serde_json::to_value(report)
                .map_err(|e| Error::Numerical(format!("cannot serialize report: {e}")))?;
            value["gmp_split"] = serde_json::json!({
                "decentralized": split.decentralized,
                "centralized": split.centralized,
            });
            to_pretty(&value)?
        }
        OutputFormat::Csv => {
            let mut out = String::from("detector,complex_multiplications\n");
            out.push_str(&format!("gmp,{}\n", report.gmp));
            out.push_str(&format!("lama,{}\n", report.lama));
            out.push_str(&format!("mmse,{}\n", report.mmse));
            out.push_str(&format!("mrc,{}\n", report.mrc));
            out.push_str(&format!("gmp_decentralized_part,{}\n", split.decentralized));
            out.push_str(&format!("gmp_centralized_part,{}\n", split.centralized));
            out
        }
    };
    deliver(text, cli.out.as_deref())
}

fn to_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot serialize output: {e}")))
}

fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Ber(args) => run_ber(cli, args),
        Command::Se(args) => run_se(cli, args),
        Command::Partition(args) => run_partition(cli, args),
        Command::Complexity(args) => run_complexity(cli, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = match &e {
                Error::Argument(_) => "argument",
                Error::Config(_) => "config",
                Error::Numerical(_) => "numerical",
                Error::Contract(_) => "contract",
                Error::Io { .. } => "io",
            };
            let code = match &e {
                Error::Argument(_) | Error::Config(_) => 2,
                _ => 1,
            };
            eprintln!(
                "{}",
                serde_json::json!({"error": kind, "message": e.to_string()})
            );
            ExitCode::from(code)
        }
    }
}
