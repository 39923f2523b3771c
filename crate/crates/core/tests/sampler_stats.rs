use dctmars::emulator::{predict, TrainingSet};
use dctmars::posterior::{Hyperparams, ObservationSet};
use dctmars::sampler::{run_chain, run_chains, ChainConfig, ChainInit, MoveKind};
use dctmars::stats::mean;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn no_obs() -> ObservationSet {
    ObservationSet::default()
}

/// Intercept-only model: `sigma_z2 | Z` is inverse gamma with shape
/// `a + n/2` and scale `d/2`, `d = 2b + Z'Z - (sum Z)^2 / (n + 1/alpha)`.
#[test]
fn intercept_only_chain_matches_conjugate_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = DMatrix::from_fn(10, 1, |_, _| rng.random::<f64>());
    let z: Vec<f64> = (0..10).map(|_| 3.0 + rng.random::<f64>()).collect();
    let hp = Hyperparams {
        m_max: 1,
        max_degree: 1,
        alpha: 100.0,
        a_z: 2.0,
        b_z: 1.0,
        ..Hyperparams::default()
    };
    let data = TrainingSet::simulator(x, z.clone(), 1).unwrap();
    let cfg = ChainConfig {
        n_iter: 10_500,
        burn_in: 500,
        thin: 1,
        seed: 3,
        fix_tau: true,
        ..ChainConfig::default()
    };
    let store = run_chain(&cfg, &data, &no_obs(), &hp, ChainInit::emulator_only()).unwrap();
    assert_eq!(store.len(), 10_000);
    assert!(store
        .draws
        .iter()
        .all(|d| d.last_move == MoveKind::Stay && d.state.m() == 1));

    let n = z.len() as f64;
    let sum: f64 = z.iter().sum();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let d = 2.0 * hp.b_z + zz - sum * sum / (n + 1.0 / hp.alpha);
    let expected = (d / 2.0) / (hp.a_z + n / 2.0 - 1.0);
    let got = mean(&store.draws.iter().map(|d| d.state.sigma_z2).collect::<Vec<_>>());
    assert!(
        (got / expected - 1.0).abs() < 0.05,
        "posterior mean {got} vs {expected}"
    );
    let beta_mean = mean(&store.draws.iter().map(|d| d.state.beta[0]).collect::<Vec<_>>());
    assert!((beta_mean - sum / (n + 1.0 / hp.alpha)).abs() < 0.02);
}

#[test]
fn one_predictor_fit_tracks_a_kinked_curve() {
    let x = DMatrix::from_fn(20, 1, |i, _| i as f64 / 19.0);
    let f = |x: f64| 1.0 + 3.0 * (x - 0.4).max(0.0);
    let z: Vec<f64> = (0..20).map(|i| f(x[(i, 0)])).collect();
    let hp = Hyperparams {
        max_degree: 1,
        m_max: 10,
        ..Hyperparams::default()
    };
    let data = TrainingSet::simulator(x, z, 1).unwrap();
    let cfg = ChainConfig {
        n_iter: 4_000,
        burn_in: 1_000,
        thin: 5,
        seed: 8,
        fix_tau: true,
        ..ChainConfig::default()
    };
    let store = run_chain(&cfg, &data, &no_obs(), &hp, ChainInit::emulator_only()).unwrap();
    for x in [0.1, 0.5, 0.9] {
        let p = predict(store.states(), &data.scaling().apply(&[x]), &[0.5]).unwrap();
        assert!((p.mean - f(x)).abs() < 0.1, "at {x}: {} vs {}", p.mean, f(x));
    }
    assert!(store.counters.accepted.iter().sum::<u64>() > 0);
}

#[test]
fn stored_iterations_follow_burn_in_and_thinning() {
    let x = DMatrix::from_fn(8, 1, |i, _| i as f64);
    let data = TrainingSet::simulator(x, (0..8).map(|i| i as f64).collect(), 1).unwrap();
    let hp = Hyperparams {
        max_degree: 1,
        m_max: 5,
        ..Hyperparams::default()
    };
    let cfg = ChainConfig {
        n_iter: 100,
        burn_in: 37,
        thin: 7,
        seed: 2,
        fix_tau: true,
        ..ChainConfig::default()
    };
    let store = run_chain(&cfg, &data, &no_obs(), &hp, ChainInit::emulator_only()).unwrap();
    let its: Vec<usize> = store.draws.iter().map(|d| d.iteration).collect();
    assert_eq!(its, (1..=9).map(|k| 37 + 7 * k).collect::<Vec<_>>());
}

#[test]
fn chains_are_reproducible_and_seeded_apart() {
    let x = DMatrix::from_fn(12, 1, |i, _| i as f64 / 11.0);
    let z: Vec<f64> = (0..12).map(|i| (i as f64 / 3.0).sin()).collect();
    let data = TrainingSet::simulator(x, z, 1).unwrap();
    let hp = Hyperparams {
        max_degree: 1,
        m_max: 8,
        ..Hyperparams::default()
    };
    let cfg = ChainConfig {
        n_iter: 300,
        burn_in: 100,
        thin: 10,
        seed: 4,
        fix_tau: true,
        ..ChainConfig::default()
    };
    let a = run_chains(&cfg, 3, &data, &no_obs(), &hp, &ChainInit::emulator_only()).unwrap();
    let b = run_chains(&cfg, 3, &data, &no_obs(), &hp, &ChainInit::emulator_only()).unwrap();
    assert_eq!(a.trace_csv(), b.trace_csv());
    assert_eq!(a.len(), 60);
    let first: Vec<f64> = a
        .draws
        .iter()
        .filter(|d| d.chain == 0)
        .map(|d| d.state.sigma_z2)
        .collect();
    let second: Vec<f64> = a
        .draws
        .iter()
        .filter(|d| d.chain == 1)
        .map(|d| d.state.sigma_z2)
        .collect();
    assert_ne!(first, second);
    let single = run_chain(&cfg, &data, &no_obs(), &hp, ChainInit::emulator_only()).unwrap();
    assert_eq!(single.draws[0].state, a.draws[0].state);
}

#[test]
fn empty_store_is_rejected() {
    let data = TrainingSet::simulator(DMatrix::from_element(3, 1, 0.5), vec![1.0, 2.0, 3.0], 1).unwrap();
    let hp = Hyperparams {
        max_degree: 1,
        ..Hyperparams::default()
    };
    let cfg = ChainConfig {
        n_iter: 10,
        burn_in: 10,
        ..ChainConfig::default()
    };
    let err = run_chain(&cfg, &data, &no_obs(), &hp, ChainInit::emulator_only()).unwrap_err();
    assert!(err.to_string().contains("empty store"), "{err}");
}
