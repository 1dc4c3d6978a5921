//! Cross-checks of the optimized implementations against independent
//! reference routes: literal-loop message passing, an explicit matrix
//! inverse, fixed-budget detector comparisons, and a few randomized
//! invariants.

mod common;

use dbpsim::baselines;
use dbpsim::channel::{ClusterPartition, SystemConfig};
use dbpsim::fusion;
use dbpsim::gmp::{run_cluster, VnUpdate};
use dbpsim::harness::{run_point, Detector, ExperimentSpec, SnrSweep, StopRule};
use dbpsim::modem::{build_constellation, posterior_moments, ConstellationKind, SymbolBelief};
use dbpsim::numerics::sample_complex_gaussian;
use dbpsim::rng::RngStream;
use dbpsim::Complex64;
use proptest::prelude::*;

fn cluster_vs_reference(
    rows: usize,
    users: usize,
    kind: ConstellationKind,
    noise_var: f64,
    iterations: usize,
    seed: u64,
) -> f64 {
    let constellation = build_constellation(kind);
    let prior = SymbolBelief::uniform(constellation.len());
    let mut stream = RngStream::new(seed, 0);
    let block = common::random_matrix(rows, users, &mut stream);
    let symbols: Vec<Complex64> = (0..users)
        .map(|_| {
            let idx = (stream.bit() as usize) * (constellation.len() / 2) + stream.bit() as usize;
            constellation.point(idx)
        })
        .collect();
    let noise = sample_complex_gaussian(&mut stream, rows, noise_var).unwrap();
    let observations: Vec<Complex64> = block
        .mul_vec(&symbols)
        .unwrap()
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + n)
        .collect();

    let summary = run_cluster(
        &block,
        &observations,
        noise_var,
        iterations,
        VnUpdate::MomentMatching {
            constellation: &constellation,
            prior: &prior,
        },
    )
    .unwrap();
    let (ref_mean, ref_var) = common::scalar_cluster_messages(
        &block,
        &observations,
        noise_var,
        iterations,
        &constellation,
        prior.masses(),
    );

    let mut worst: f64 = 0.0;
    for n in 0..rows {
        for k in 0..users {
            worst = worst.max(common::gap(summary.mean(n, k), ref_mean[n][k]));
            worst = worst.max(common::gap_re(summary.variance(n, k), ref_var[n][k]));
        }
    }
    worst
}

#[test]
fn cluster_messages_match_literal_reference() {
    let qpsk = cluster_vs_reference(7, 3, ConstellationKind::Qpsk, 0.5, 4, 11);
    assert!(qpsk < 1e-9, "qpsk gap {qpsk}");
    let qam = cluster_vs_reference(5, 2, ConstellationKind::Qam16, 0.8, 3, 12);
    assert!(qam < 1e-9, "16qam gap {qam}");
}

#[test]
fn mmse_matches_explicit_inverse_on_random_instance() {
    let rows = 8;
    let users = 4;
    let noise_var = 0.3;
    let mut stream = RngStream::new(21, 0);
    let channel = common::random_matrix(rows, users, &mut stream);
    let symbols = sample_complex_gaussian(&mut stream, users, 1.0).unwrap();
    let noise = sample_complex_gaussian(&mut stream, rows, noise_var).unwrap();
    let received: Vec<Complex64> = channel
        .mul_vec(&symbols)
        .unwrap()
        .iter()
        .zip(&noise)
        .map(|(s, n)| s + n)
        .collect();

    let estimate = baselines::mmse_centralized(&channel, &received, noise_var).unwrap();

    let mut regularized = channel.gram();
    regularized.add_diagonal(noise_var);
    let inverse = common::explicit_inverse(&regularized);
    let matched = channel.herm_mul_vec(&received).unwrap();
    for k in 0..users {
        let mut expected = Complex64::new(0.0, 0.0);
        for j in 0..users {
            expected += inverse.get(k, j) * matched[j];
        }
        let g = common::gap(estimate.estimates[k], expected);
        assert!(g < 1e-9, "user {k} estimate gap {g}");
        let expected_var = noise_var * inverse.get(k, k).re;
        let gv = common::gap_re(estimate.noise_interference_vars[k], expected_var);
        assert!(gv < 1e-9, "user {k} variance gap {gv}");
    }
}

#[test]
fn mmse_error_rate_never_exceeds_mrc() {
    let mut system = SystemConfig::uniform(64, 16, 1, ConstellationKind::Qpsk).unwrap();
    system.seed = 5;
    let sweep = SnrSweep {
        start_db: 2.0,
        stop_db: 10.0,
        step_db: 2.0,
    };
    // 6250 channel uses x 16 users = 1e5 symbols per point.
    let stop = StopRule {
        max_trials: 6250,
        min_bit_errors: u64::MAX,
    };
    for snr_db in sweep.points().unwrap() {
        let mut spec = ExperimentSpec {
            system: system.clone(),
            detector: Detector::Mmse,
            sweep: sweep.clone(),
            coded: false,
            frame_bits: 128,
            stop,
        };
        let mmse = run_point(&spec, snr_db).unwrap();
        spec.detector = Detector::Mrc;
        let mrc = run_point(&spec, snr_db).unwrap();
        assert!(
            mmse.ber <= mrc.ber,
            "at {snr_db} dB: mmse {} > mrc {}",
            mmse.ber,
            mrc.ber
        );
    }
}

#[test]
fn message_passing_beats_matched_filter_at_high_modulation() {
    let mut system = SystemConfig::uniform(120, 16, 3, ConstellationKind::Qam16).unwrap();
    system.seed = 1;
    let sweep = SnrSweep {
        start_db: 4.0,
        stop_db: 14.0,
        step_db: 2.0,
    };
    let stop = StopRule {
        max_trials: 1500,
        min_bit_errors: u64::MAX,
    };
    for snr_db in sweep.points().unwrap() {
        let mut spec = ExperimentSpec {
            system: system.clone(),
            detector: Detector::GmpDecentralized,
            sweep: sweep.clone(),
            coded: false,
            frame_bits: 128,
            stop,
        };
        let gmp = run_point(&spec, snr_db).unwrap();
        spec.detector = Detector::Mrc;
        let mrc = run_point(&spec, snr_db).unwrap();
        assert!(mrc.bit_errors >= 200, "mrc undersampled at {snr_db} dB");
        assert!(
            gmp.bit_errors < mrc.bit_errors,
            "at {snr_db} dB: gmp {} errors vs mrc {} over {} trials",
            gmp.bit_errors,
            mrc.bit_errors,
            gmp.trials
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_masses_normalized_and_variance_bounded(
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
        log_gamma in -3.0f64..3.0,
        qam in proptest::bool::ANY,
    ) {
        let kind = if qam { ConstellationKind::Qam16 } else { ConstellationKind::Qpsk };
        let constellation = build_constellation(kind);
        let prior = SymbolBelief::uniform(constellation.len());
        let z = Complex64::new(re, im);
        let gamma = 10f64.powf(log_gamma);
        let (mean, var, belief) = posterior_moments(z, gamma, &prior, &constellation).unwrap();
        let total: f64 = belief.masses().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let max_power = constellation
            .point_power()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        prop_assert!(var >= -1e-12 && var <= max_power + 1e-9);
        prop_assert!(mean.norm_sqr() <= max_power + 1e-9);
    }

    #[test]
    fn fusion_is_cluster_order_invariant(seed in 0u64..1000) {
        let constellation = build_constellation(ConstellationKind::Qpsk);
        let prior = SymbolBelief::uniform(constellation.len());
        let users = 2;
        let sizes = [4usize, 3, 5];
        let noise_var = 0.4;
        let mut stream = RngStream::new(seed, 0);

        let blocks: Vec<_> = sizes
            .iter()
            .map(|&rows| common::random_matrix(rows, users, &mut stream))
            .collect();
        let observations: Vec<Vec<Complex64>> = blocks
            .iter()
            .map(|b| sample_complex_gaussian(&mut stream, b.rows(), 2.0).unwrap())
            .collect();
        let partition = ClusterPartition {
            blocks: blocks.clone(),
            observations: observations.clone(),
            noise_var,
        };
        let summaries: Vec<_> = partition
            .blocks
            .iter()
            .zip(&partition.observations)
            .map(|(b, o)| {
                run_cluster(
                    b,
                    o,
                    noise_var,
                    3,
                    VnUpdate::MomentMatching { constellation: &constellation, prior: &prior },
                )
                .unwrap()
            })
            .collect();

        let forward = fusion::fuse(&summaries, &blocks).unwrap();
        let reversed_summaries: Vec<_> = summaries.iter().rev().cloned().collect();
        let reversed_blocks: Vec<_> = blocks.iter().rev().cloned().collect();
        let backward = fusion::fuse(&reversed_summaries, &reversed_blocks).unwrap();
        for (f, b) in forward.iter().zip(&backward) {
            prop_assert!(common::gap(f.mean, b.mean) < 1e-12);
            prop_assert!(common::gap_re(f.variance, b.variance) < 1e-12);
        }
    }
}
