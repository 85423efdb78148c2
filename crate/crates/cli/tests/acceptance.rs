//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p stsir-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use stsir::forecast::{one_step_forecast, scenario_params, simulate_panel, SimScenario};
use stsir::ingest::{smooth_3day_centered, AdjacencyGraph, PanelData};
use stsir::mcmc::{gibbs_precision, initialize, run_chain, run_chain_from, ChainRng, SamplerConfig};
use stsir::metrics::{dic, geweke_z, summarize};
use stsir::model::{
    compute_state, icar_logpdf, total_deviance, DataModel, ModelSpec, ParamBlock, ParamLayout,
    ParamVector, Variant,
};
use stsir::{Matrix, Real};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- helpers

fn random_connected_graph(m: usize, rng: &mut ChainRng) -> AdjacencyGraph {
    // Random spanning tree plus a few extra edges.
    let mut edges = Vec::new();
    for i in 1..m {
        edges.push((i, rng.gen_range(0..i)));
    }
    for _ in 0..rng.gen_range(0..=m) {
        let a = rng.gen_range(0..m);
        let b = rng.gen_range(0..m);
        if a != b {
            edges.push((a, b));
        }
    }
    AdjacencyGraph::from_edges(m, &edges).expect("connected by construction")
}

fn centred(mut v: Vec<f64>) -> Vec<f64> {
    let c = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= c);
    v
}

fn normal(rng: &mut ChainRng, sd: f64) -> f64 {
    sd * f64::sample_standard_normal(rng)
}

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
}

/// Natural log of `y!` by direct summation.
fn ln_factorial_sum(y: u64) -> f64 {
    (2..=y).map(|k| (k as f64).ln()).sum()
}

// ------------------------------------------------------- criterion 1

fn random_params(spec: &ModelSpec<f64>, m: usize, t: usize, rng: &mut ChainRng) -> ParamVector<f64> {
    let layout = ParamLayout::new(spec, m, t);
    let mut p = ParamVector {
        b0: -7.0 + normal(rng, 0.3),
        b1: 0.5 + normal(rng, 0.2),
        ..Default::default()
    };
    if spec.variant.uses_covariate() {
        p.b2 = normal(rng, 0.3);
    }
    if layout.has(ParamBlock::BSpatial) {
        p.b_spatial = centred((0..m).map(|_| normal(rng, 0.3)).collect());
    }
    match spec.variant {
        Variant::M4 => p.b0_time = (0..t).map(|_| -7.0 + normal(rng, 0.3)).collect(),
        Variant::M5 => {
            p.b0_space = centred((0..m).map(|_| normal(rng, 0.3)).collect());
            p.v_uncorr = (0..m).map(|_| -7.0 + normal(rng, 0.3)).collect();
        }
        _ => {}
    }
    p
}

fn random_panel(m: usize, t: usize, rng: &mut ChainRng) -> PanelData<f64> {
    let sym = Matrix::from_vec(m, t, (0..m * t).map(|_| rng.gen_range(0..=50)).collect()).unwrap();
    let deaths = Matrix::from_vec(m, t, (0..m * t).map(|_| rng.gen_range(0..=3)).collect()).unwrap();
    PanelData::new(
        (0..m).map(|i| format!("{:05}", 45001 + 2 * i)).collect(),
        start_date().iter_days().take(t).collect(),
        sym,
        deaths,
        (0..m).map(|_| rng.gen_range(1_000.0..20_000.0)).collect(),
        (0..m).map(|_| rng.gen_range(5.0..30.0)).collect(),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChainRng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let m = rng.gen_range(1..=5);
        let t = rng.gen_range(2..=10);
        let panel = random_panel(m, t, &mut rng);
        let graph = if m >= 2 { Some(random_connected_graph(m, &mut rng)) } else { None };
        let variant = Variant::ALL[k % 5];
        let mut spec = ModelSpec::new(variant);
        spec.include_icar = graph.is_some();
        if graph.is_none() && (variant == Variant::M5 || variant == Variant::M2) {
            spec.variant = Variant::M1;
        }
        let params = random_params(&spec, m, t, &mut rng);
        let state = compute_state(&panel, &spec, graph.as_ref(), &params).unwrap();
        let mut zero_offset = spec.clone();
        zero_offset.offset = 0.0;
        let got = total_deviance(&panel, &state, &zero_offset, 1.0).unwrap();

        let mu = state.mu.as_ref().unwrap();
        let mut loglik = 0.0;
        for i in 0..m {
            for j in 0..t {
                let y = panel.sym[(i, j)];
                let rate = mu[(i, j)];
                loglik += y as f64 * rate.ln() - rate - ln_factorial_sum(y);
            }
        }
        let oracle = -2.0 * loglik;
        worst = worst.max(((got - oracle) / oracle).abs());
    }
    let elapsed = started.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:.2e} over 100 panels in {elapsed:.2?}"),
    )
}

// ------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let path = AdjacencyGraph::path(3).unwrap();
    let value = icar_logpdf(&[1.0, 0.0, -1.0], 2.0, &path);
    let expected = 2f64.ln() - 2.0;
    let hand_ok = (value - expected).abs() < 1e-12;

    let mut rng = ChainRng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.gen_range(2..=8);
        let g = random_connected_graph(m, &mut rng);
        let b = centred((0..m).map(|_| normal(&mut rng, 1.0)).collect());
        let tau = rng.gen_range(0.1..10.0);
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let gp = g.permuted(&perm).unwrap();
        let mut bp = vec![0.0; m];
        for i in 0..m {
            bp[perm[i]] = b[i];
        }
        let a = icar_logpdf(&b, tau, &g);
        let c = icar_logpdf(&bp, tau, &gp);
        worst = worst.max((a - c).abs() / a.abs().max(1.0));
    }
    outcome(
        hand_ok && worst < 1e-12,
        format!("path value {value:.15} vs ln2-2 {expected:.15}; permutation max diff {worst:.1e} over 20 graphs"),
    )
}

// ------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let cases = [
        ("prior(2,0.5) b=0", 2.0, 0.5, 0.0, 1usize),
        ("prior(2,0.5) b=2", 2.0, 0.5, 4.0, 1),
        ("ICAR path", 0.01, 0.01, 2.0, 2),
    ];
    let n = 10_000usize;
    let mut rng = ChainRng::seed_from_u64(303);
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, a, b, qf, rank) in cases {
        let shape = a + rank as f64 / 2.0;
        let rate = b + qf / 2.0;
        let draws: Vec<f64> = (0..n).map(|_| gibbs_precision(a, b, qf, rank, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let true_mean = shape / rate;
        let true_var = shape / (rate * rate);
        let se_mean = (true_var / n as f64).sqrt();
        // Var of the sample variance: (mu4 - sigma^4) / n, gamma kurtosis 3 + 6/shape.
        let se_var = true_var * ((2.0 + 6.0 / shape) / n as f64).sqrt();
        let zm = (mean - true_mean) / se_mean;
        let zv = (var - true_var) / se_var;
        pass &= zm.abs() < 3.0 && zv.abs() < 3.0;
        notes.push(format!("{name}: z_mean {zm:+.2} z_var {zv:+.2}"));
    }
    outcome(pass, notes.join("; "))
}

// ------------------------------------------------------- criteria 4 and 10

/// Total variation between MCMC draws and a density known on a grid, both
/// binned on `bins` equal bins covering `[lo, hi]`. Draws outside count in
/// full.
fn grid_tv(draws: &[f64], log_post: impl Fn(f64) -> f64, lo: f64, hi: f64, bins: usize) -> f64 {
    let width = (hi - lo) / bins as f64;
    let sub = 64;
    let mut logs = Vec::with_capacity(bins * sub);
    for k in 0..bins * sub {
        logs.push(log_post(lo + (k as f64 + 0.5) * width / sub as f64));
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = dens.iter().sum();
    let grid: Vec<f64> = dens.chunks(sub).map(|c| c.iter().sum::<f64>() / total).collect();
    let mut hist = vec![0.0; bins];
    let mut outside = 0.0;
    for &x in draws {
        let k = ((x - lo) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            hist[k as usize] += 1.0;
        } else {
            outside += 1.0;
        }
    }
    let n = draws.len() as f64;
    let inside: f64 = hist.iter().zip(&grid).map(|(h, g)| (h / n - g).abs()).sum();
    0.5 * (inside + outside / n)
}

/// Independent accounting for a single free `b1` on M1 without ICAR:
/// returns per-cell `(log S + b0 part, log Ty_prev)` for days 2..T.
fn m1_cells(
    series: &[Vec<f64>],
    deaths: &[Vec<u64>],
    sus: &[f64],
    spec: &ModelSpec<f64>,
    b0: f64,
) -> Vec<(usize, usize, f64, f64)> {
    let mut cells = Vec::new();
    for (i, y) in series.iter().enumerate() {
        let mut s = sus[i];
        for j in 1..y.len() {
            let prev = y[j - 1];
            let recov = if j - 1 == 0 { 0.0 } else { spec.beta_rc * prev };
            s = (s - prev - spec.phi * prev - recov - deaths[i][j - 1] as f64).max(0.0);
            let base = (s + spec.offset).ln() + b0;
            let lag = ((1.0 + spec.phi) * prev + spec.offset).ln();
            cells.push((i, j, base, lag));
        }
    }
    cells
}

fn single_b1_config(draws: usize, seed: u64, extra_fixed: &[ParamBlock]) -> SamplerConfig<f64> {
    let mut fixed = vec![ParamBlock::B0, ParamBlock::Tau0, ParamBlock::Tau1];
    fixed.extend_from_slice(extra_fixed);
    SamplerConfig {
        n_iter: 5_000 + draws,
        burn_in: 5_000,
        thin: 1,
        seed,
        mu_snapshot_every: 0,
        fixed,
        ..Default::default()
    }
}

fn posterior_window(draws: &[f64]) -> (f64, f64) {
    let s = summarize(draws).unwrap();
    (s.mean - 6.0 * s.sd, s.mean + 6.0 * s.sd)
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let counts = vec![vec![3u64, 5, 8], vec![2, 4, 6]];
    let deaths = vec![vec![0u64, 0, 1], vec![0, 1, 0]];
    let sus = vec![1000.0, 800.0];
    let panel = PanelData::new(
        vec!["A".into(), "B".into()],
        start_date().iter_days().take(3).collect(),
        Matrix::from_rows(counts.clone()).unwrap(),
        Matrix::from_rows(deaths.clone()).unwrap(),
        sus.clone(),
        vec![10.0, 20.0],
    )
    .unwrap();
    let mut spec = ModelSpec::new(Variant::M1);
    spec.include_icar = false;
    let b0 = -5.0;
    let tau1 = 1.0;
    let mut init = initialize(&spec, 2, 3);
    init.b0 = b0;
    init.tau1 = tau1;
    let cfg = single_b1_config(50_000, 404, &[]);
    let trace = run_chain_from(&panel, &spec, None, &cfg, init).unwrap();
    let b1 = trace.column("b1").unwrap();
    let fixed_ok = trace.draws.iter().all(|d| d.b0 == b0 && d.tau1 == tau1);

    let series: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect();
    let cells = m1_cells(&series, &deaths, &sus, &spec, b0);
    let log_post = |x: f64| {
        let mut lp = -0.5 * tau1 * x * x;
        for &(i, j, base, lag) in &cells {
            let log_mu = base + x * lag;
            lp += counts[i][j] as f64 * log_mu - log_mu.exp();
        }
        lp
    };
    let (lo, hi) = posterior_window(&b1);
    let tv = grid_tv(&b1, log_post, lo, hi, 30);
    let elapsed = started.elapsed();
    outcome(
        fixed_ok && tv < 0.05 && elapsed < Duration::from_secs(120),
        format!("TV {tv:.4} over 30 bins from {} draws in {elapsed:.2?}", b1.len()),
    )
}

fn criterion_10() -> Outcome {
    // Smoothing: constants preserved bit-for-bit, linear to rounding.
    let mut rng = ChainRng::seed_from_u64(1010);
    let mut const_ok = true;
    let mut lin_err = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..40);
        let c: f64 = rng.gen_range(-1e6..1e6);
        const_ok &= smooth_3day_centered(&vec![c; n]).iter().all(|&v| v == c);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..500.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..500.0)).collect();
        let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = smooth_3day_centered(&mix);
        let (sx, sy) = (smooth_3day_centered(&x), smooth_3day_centered(&y));
        for k in 0..n {
            let rhs = a * sx[k] + b * sy[k];
            let scale = a.abs() * sx[k].abs() + b.abs() * sy[k].abs() + 1.0;
            lin_err = lin_err.max((lhs[k] - rhs).abs() / scale);
        }
    }

    // Grid equivalence for b1 on a one-region log-normal panel.
    let counts = vec![2u64, 5, 9, 14, 12, 20, 25, 18];
    let t = counts.len();
    let panel = PanelData::new(
        vec!["45019".into()],
        start_date().iter_days().take(t).collect(),
        Matrix::from_rows(vec![counts.clone()]).unwrap(),
        Matrix::filled(1, t, 0u64),
        vec![5000.0],
        vec![15.0],
    )
    .unwrap()
    .with_smoothed();
    let mut spec = ModelSpec::new(Variant::M1);
    spec.include_icar = false;
    spec.data_model = DataModel::LogNormal;
    let (b0, tau1, tau_y) = (-4.0, 1.0, 4.0);
    let mut init = initialize(&spec, 1, t);
    init.b0 = b0;
    init.tau1 = tau1;
    init.tau_y = tau_y;
    let cfg = single_b1_config(50_000, 1011, &[ParamBlock::TauY]);
    let trace = run_chain_from(&panel, &spec, None, &cfg, init).unwrap();
    let b1 = trace.column("b1").unwrap();

    // Independent three-day average with shrunken end windows.
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let smooth: Vec<f64> = (0..t)
        .map(|j| {
            let lo = j.saturating_sub(1);
            let hi = (j + 1).min(t - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let cells = m1_cells(std::slice::from_ref(&smooth), &[vec![0; t]], &[5000.0], &spec, b0);
    let log_post = |x: f64| {
        let mut lp = -0.5 * tau1 * x * x;
        for &(_, j, base, lag) in &cells {
            let r = (smooth[j] + spec.offset).ln() - (base + x * lag);
            lp -= 0.5 * tau_y * r * r;
        }
        lp
    };
    let (lo, hi) = posterior_window(&b1);
    let tv = grid_tv(&b1, log_post, lo, hi, 30);

    let free = SamplerConfig { n_iter: 20_000, burn_in: 5_000, seed: 1012, ..Default::default() };
    let full = run_chain(&panel, &spec, None, &free).unwrap();
    let d = dic(&full.deviances).unwrap();
    let dic_ok = d.dic.is_finite() && d.p_d.is_finite();
    outcome(
        const_ok && lin_err < 1e-12 && tv < 0.05 && dic_ok,
        format!(
            "constants exact: {const_ok}; linearity max rel err {lin_err:.1e}; LN grid TV {tv:.4}; DIC {:.3} (pD {:.3})",
            d.dic, d.p_d
        ),
    )
}

// ------------------------------------------------------- criteria 5 to 7

const TRUE_B0: f64 = -9.5;
const TRUE_B1: f64 = 0.8;
const TRUE_B2: f64 = 0.5;

fn recovery_scenario(seed: u64, t: usize) -> SimScenario<f64> {
    let graph = AdjacencyGraph::ring(10).unwrap();
    let spec = ModelSpec::new(Variant::M3);
    let mut rng = ChainRng::seed_from_u64(seed);
    let params = scenario_params(&spec, &graph, t, TRUE_B0, TRUE_B1, TRUE_B2, 4.0, &mut rng);
    SimScenario {
        t,
        params,
        spec,
        graph,
        sus_init: vec![1e5; 10],
        poverty: (0..10).map(|i| -1.0 + 2.0 * i as f64 / 9.0).collect(),
        seed,
        start_date: start_date(),
    }
}

fn default_config(seed: u64) -> SamplerConfig<f64> {
    SamplerConfig { seed, ..Default::default() }
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let sc = recovery_scenario(1, 60);
    let panel = simulate_panel(&sc).unwrap();
    let trace = run_chain(&panel, &sc.spec, Some(&sc.graph), &default_config(1)).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, truth) in [("b0", TRUE_B0), ("b1", TRUE_B1), ("b2", TRUE_B2)] {
        let s = summarize(&trace.column(name).unwrap()).unwrap();
        let z = (s.mean - truth) / s.sd;
        pass &= z.abs() <= 3.0;
        notes.push(format!("{name} {:.4} (sd {:.4}, {z:+.2} sd)", s.mean, s.sd));
    }
    let elapsed = started.elapsed();
    pass &= elapsed < Duration::from_secs(600);
    notes.push(format!("{elapsed:.2?}"));
    outcome(pass, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let mut wins = 0;
    let mut deltas = Vec::new();
    for seed in 1..=10u64 {
        let sc = recovery_scenario(seed, 60);
        let panel = simulate_panel(&sc).unwrap();
        let m3 = run_chain(&panel, &sc.spec, Some(&sc.graph), &default_config(seed)).unwrap();
        let mut m1_spec = sc.spec.clone();
        m1_spec.variant = Variant::M1;
        let m1 = run_chain(&panel, &m1_spec, Some(&sc.graph), &default_config(seed)).unwrap();
        let delta = dic(&m3.deviances).unwrap().dic - dic(&m1.deviances).unwrap().dic;
        if delta < 0.0 {
            wins += 1;
        }
        deltas.push(format!("{delta:+.2}"));
    }
    outcome(
        wins >= 8,
        format!("M3 lower DIC in {wins}/10 seeds; DIC(M3)-DIC(M1) = [{}]", deltas.join(", ")),
    )
}

fn criterion_7() -> Outcome {
    let mut covered = 0;
    let mut total = 0;
    for seed in 1..=20u64 {
        let sc = recovery_scenario(1000 + seed, 61);
        let full = simulate_panel(&sc).unwrap();
        let panel = full.leading_days(60).unwrap();
        let trace = run_chain(&panel, &sc.spec, Some(&sc.graph), &default_config(seed)).unwrap();
        let fc = one_step_forecast(&trace, &panel, &sc.spec, Some(&sc.graph), seed).unwrap();
        for (i, f) in fc.iter().enumerate() {
            let truth = full.sym[(i, 60)] as f64;
            total += 1;
            if f.lower95 <= truth && truth <= f.upper95 {
                covered += 1;
            }
        }
    }
    let rate = covered as f64 / total as f64;
    outcome(
        (0.85..=0.99).contains(&rate),
        format!("{covered}/{total} region-days covered ({:.1}%)", 100.0 * rate),
    )
}

// ------------------------------------------------------- criterion 8

fn criterion_8() -> Outcome {
    let mut ok = 0;
    for k in 0..100u64 {
        let mut rng = ChainRng::seed_from_u64(8000 + k);
        let trace: Vec<f64> = (0..10_000).map(|_| f64::sample_standard_normal(&mut rng)).collect();
        if geweke_z(&trace, 0.1, 0.5).unwrap().z.abs() < 3.0 {
            ok += 1;
        }
    }
    outcome(ok >= 99, format!("|z| < 3 on {ok}/100 white-noise traces"))
}

// ------------------------------------------------------- criterion 9

fn stsir(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stsir")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn run_pipeline(root: &Path, scenario: &Path) -> Result<(), String> {
    let sim = root.join("sim");
    let config = sim.join("config.json");
    let steps: [Vec<&str>; 3] = [
        vec!["simulate", scenario.to_str().unwrap(), "--out", sim.to_str().unwrap()],
        vec!["fit", "--config", config.to_str().unwrap(), "--chains", "2"],
        vec!["predict", "--config", config.to_str().unwrap(), "--chains", "2"],
    ];
    for args in &steps {
        let (code, err) = stsir(args);
        if code != 0 {
            return Err(format!("`{}` exited {code}: {}", args[0], err.trim()));
        }
    }
    Ok(())
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((header, rows))
}

/// Header must match exactly; columns in `numeric` must hold finite numbers.
fn check_schema(path: &Path, header: &[&str], numeric: &[usize], rows: usize) -> Result<(), String> {
    let (h, body) = read_csv(path)?;
    if h != header {
        return Err(format!("{}: header {h:?}", path.display()));
    }
    if body.len() != rows {
        return Err(format!("{}: {} rows, expected {rows}", path.display(), body.len()));
    }
    for row in &body {
        for v in numeric.iter().map(|&k| &row[k]) {
            if v.parse::<f64>().map_or(true, |x| !x.is_finite()) {
                return Err(format!("{}: non-numeric value `{v}`", path.display()));
            }
        }
    }
    Ok(())
}

fn list_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"model": {"variant": "M3"}, "days": 20, "graph": {"ring": 4},
            "truth": {"b0": -9.5, "b1": 0.8, "b2": 0.5, "tau_b": 4},
            "sus_init": 100000, "seed": 9,
            "sampler": {"n_iter": 4000, "burn_in": 1000, "thin": 2}}"#,
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let run = || -> Result<String, String> {
        run_pipeline(&a, &scenario)?;
        let fit = a.join("sim/fit");
        let (m, t, draws) = (4, 20, 1500);
        let params = 3 + 4 + 4;
        let (th, tr) = read_csv(&fit.join("trace_chain1.csv"))?;
        if th.len() != 2 + params || tr.len() != draws {
            return Err(format!("trace shape {}x{}", tr.len(), th.len()));
        }
        check_schema(&fit.join("summary.csv"), &["parameter", "mean", "sd", "q025", "q975"], &[1, 2, 3, 4], params)?;
        check_schema(&fit.join("dic.csv"), &["dic", "pd", "mean_deviance"], &[0, 1, 2], 1)?;
        check_schema(&fit.join("geweke.csv"), &["chain", "parameter", "z", "degenerate"], &[0, 2], 2 * (params + 1))?;
        let cells = m * t;
        check_schema(&fit.join("fitted.csv"), &["fips", "date", "observed", "mu_mean", "lower95", "upper95"], &[2, 3, 4, 5], cells)?;
        check_schema(&fit.join("mse.csv"), &["fips", "date", "mse"], &[2], cells)?;
        check_schema(&fit.join("mspe.csv"), &["fips", "date", "mspe"], &[2], cells)?;
        check_schema(&fit.join("forecast.csv"), &["fips", "pred_mean", "lower95", "upper95", "n_draws"], &[1, 2, 3, 4], m)?;
        run_pipeline(&b, &scenario)?;
        let (fa, fb) = (list_files(&a), list_files(&b));
        if fa != fb {
            return Err(format!("file sets differ: {fa:?} vs {fb:?}"));
        }
        for f in &fa {
            if std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap() {
                return Err(format!("{} differs between reruns", f.display()));
            }
        }
        Ok(format!("3 steps exit 0, schemas valid, {} files bit-identical on rerun", fa.len()))
    };
    match run() {
        Ok(msg) => outcome(true, msg),
        Err(msg) => outcome(false, msg),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("deviance oracle", criterion_1),
        ("ICAR correctness", criterion_2),
        ("conjugate Gibbs calibration", criterion_3),
        ("grid-posterior equivalence", criterion_4),
        ("parameter recovery", criterion_5),
        ("DIC discrimination", criterion_6),
        ("forecast coverage", criterion_7),
        ("Geweke calibration", criterion_8),
        ("pipeline round-trip", criterion_9),
        ("smoothed-mode integrity", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<28} {}  {}", k + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
