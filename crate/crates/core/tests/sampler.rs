use chrono::NaiveDate;
use rand::SeedableRng;
use stsir::forecast::{replicate_within_sample, simulate_panel, scenario_params, SimScenario};
use stsir::ingest::{AdjacencyGraph, PanelData};
use stsir::mcmc::{initialize, run_chain, run_chain_from, ChainRng, SamplerConfig};
use stsir::metrics::{mse_profile, mspe_profile};
use stsir::model::{ModelSpec, ParamBlock, Variant};
use stsir::Matrix;

fn small_scenario(variant: Variant, seed: u64) -> SimScenario<f64> {
    let graph = AdjacencyGraph::ring(4).unwrap();
    let spec = ModelSpec::new(variant);
    let mut rng = ChainRng::seed_from_u64(seed);
    let b1 = if variant == Variant::M4 { 0.4 } else { 0.8 };
    let params = scenario_params(&spec, &graph, 15, -9.5, b1, 0.5, 4.0, &mut rng);
    SimScenario {
        t: 15,
        params,
        spec,
        graph,
        sus_init: vec![5e4; 4],
        poverty: vec![-1.0, -0.3, 0.3, 1.0],
        seed,
        start_date: NaiveDate::from_ymd_opt(2020, 4, 2).unwrap(),
    }
}

fn short(seed: u64) -> SamplerConfig<f64> {
    SamplerConfig { n_iter: 2_000, burn_in: 1_000, thin: 5, seed, mu_snapshot_every: 1, ..Default::default() }
}

#[test]
fn identical_seeds_give_identical_traces() {
    for variant in Variant::ALL {
        let sc = small_scenario(variant, 3);
        let panel = simulate_panel(&sc).unwrap();
        let a = run_chain(&panel, &sc.spec, Some(&sc.graph), &short(9)).unwrap();
        let b = run_chain(&panel, &sc.spec, Some(&sc.graph), &short(9)).unwrap();
        assert_eq!(a, b, "{variant}");
        let c = run_chain(&panel, &sc.spec, Some(&sc.graph), &short(10)).unwrap();
        assert_ne!(a.draws, c.draws);
    }
}

#[test]
fn conjugate_only_chain_matches_gamma_posterior() {
    // All location parameters frozen: tau1 | b1 is Gamma(2.5, 0.5 + b1^2/2).
    let panel = PanelData::new(
        vec!["A".into()],
        NaiveDate::from_ymd_opt(2020, 4, 2).unwrap().iter_days().take(3).collect(),
        Matrix::from_rows(vec![vec![2u64, 3, 4]]).unwrap(),
        Matrix::filled(1, 3, 0u64),
        vec![1000.0],
        vec![0.0],
    )
    .unwrap();
    let mut spec = ModelSpec::new(Variant::M1);
    spec.include_icar = false;
    let mut init = initialize(&spec, 1, 3);
    init.b1 = 2.0;
    let cfg = SamplerConfig {
        n_iter: 11_000,
        burn_in: 1_000,
        thin: 1,
        seed: 4,
        mu_snapshot_every: 0,
        fixed: vec![ParamBlock::B0, ParamBlock::B1],
        ..Default::default()
    };
    let trace = run_chain_from(&panel, &spec, None, &cfg, init).unwrap();
    let tau1 = trace.column("tau1").unwrap();
    let mean = tau1.iter().sum::<f64>() / tau1.len() as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
    let tau0 = trace.column("tau0").unwrap();
    let expect0 = 2.5 / (0.5 + 81.0 / 2.0);
    let mean0 = tau0.iter().sum::<f64>() / tau0.len() as f64;
    assert!((mean0 / expect0 - 1.0).abs() < 0.02, "{mean0} vs {expect0}");
}

#[test]
fn adapted_acceptance_rates_in_band() {
    let sc = small_scenario(Variant::M3, 5);
    let panel = simulate_panel(&sc).unwrap();
    let cfg = SamplerConfig { n_iter: 12_000, burn_in: 6_000, seed: 2, ..Default::default() };
    let trace = run_chain(&panel, &sc.spec, Some(&sc.graph), &cfg).unwrap();
    assert!(!trace.accept_rates.is_empty());
    for (block, rate) in &trace.accept_rates {
        assert!((0.2..=0.7).contains(rate), "{block:?} {rate}");
    }
}

#[test]
fn mspe_exceeds_mse_on_average() {
    let sc = small_scenario(Variant::M1, 8);
    let panel = simulate_panel(&sc).unwrap();
    let trace = run_chain(&panel, &sc.spec, Some(&sc.graph), &short(1)).unwrap();
    let observed = panel.sym.map(|&c| c as f64);
    let snaps: Vec<Matrix<f64>> = trace.mu_snapshots.iter().map(|s| s.mu.clone()).collect();
    assert!(snaps.len() >= 200);
    let mse = mse_profile(&snaps, &observed).unwrap();
    let reps = replicate_within_sample(&trace, &sc.spec, 11).unwrap();
    let mspe = mspe_profile(&reps, &observed).unwrap();
    let total = |m: &Matrix<f64>| m.as_slice().iter().sum::<f64>();
    assert!(total(&mspe) > total(&mse));
}
