use std::path::{Path, PathBuf};

use stsir::forecast::{mean_surface_summary, one_step_forecast, replicate_within_sample, simulate_panel};
use stsir::ingest::{write_adjacency, write_cases, write_covariates, write_population, AdjacencyGraph};
use stsir::mcmc::{run_chain, ChainTrace};
use stsir::metrics::{dic, geweke_report, mse_profile, mspe_profile, summarize};
use stsir::model::observed_cases;
use stsir::{ChainTrace64, Matrix, ModelSpec64, PanelData64, SamplerConfig64};

use crate::config::{Mode, Overrides, Paths, RunConfig};
use crate::fail::{Failure, Outcome};
use crate::output::{atomic, read_trace, trace_path, write_table, write_trace};
use crate::scenario::ScenarioFile;

const GEWEKE_A: f64 = 0.1;
const GEWEKE_B: f64 = 0.5;
/// Mixed into the sampler seed for the replicate and forecast streams.
const REPLICATE_STREAM: u64 = 0x7265_706c;
const FORECAST_STREAM: u64 = 0x666f_7265;

fn num(v: f64) -> String {
    v.to_string()
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Runs `k` chains concurrently with seeds `seed, seed + 1, ...`.
fn run_chains(
    panel: &PanelData64,
    spec: &ModelSpec64,
    graph: Option<&AdjacencyGraph>,
    sampler: &SamplerConfig64,
    k: usize,
) -> Outcome<Vec<ChainTrace64>> {
    let results: Vec<stsir::Result<ChainTrace64>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k)
            .map(|c| {
                let cfg = SamplerConfig64 {
                    seed: sampler.seed.wrapping_add(c as u64),
                    ..sampler.clone()
                };
                s.spawn(move || run_chain(panel, spec, graph, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    results.into_iter().map(|r| r.map_err(Failure::from)).collect()
}

fn load(config: &Path, ov: &Overrides) -> Outcome<(RunConfig, PanelData64, Option<AdjacencyGraph>)> {
    let cfg = RunConfig::load(config)?.resolve(ov)?;
    let (panel, graph) = cfg.load_data()?;
    Ok((cfg, panel, graph))
}

fn write_summary(dir: &Path, trace: &ChainTrace64) -> Outcome<()> {
    let flat: Vec<Vec<f64>> = trace.draws.iter().map(|d| trace.layout.flatten(d)).collect();
    let mut rows = Vec::new();
    for (k, name) in trace.layout.names().into_iter().enumerate() {
        let col: Vec<f64> = flat.iter().map(|r| r[k]).collect();
        let s = summarize(&col)?;
        rows.push(vec![name, num(s.mean), num(s.sd), num(s.q025), num(s.q975)]);
    }
    write_table(
        &dir.join("summary.csv"),
        &["parameter", "mean", "sd", "q025", "q975"],
        &rows,
    )
}

fn write_dic(dir: &Path, trace: &ChainTrace64) -> Outcome<()> {
    let d = dic(&trace.deviances)?;
    write_table(
        &dir.join("dic.csv"),
        &["dic", "pd", "mean_deviance"],
        &[vec![num(d.dic), num(d.p_d), num(d.mean_deviance)]],
    )
}

fn write_geweke(dir: &Path, chains: &[ChainTrace64]) -> Outcome<()> {
    let mut rows = Vec::new();
    for (c, trace) in chains.iter().enumerate() {
        match geweke_report(trace, GEWEKE_A, GEWEKE_B) {
            Ok(rep) => rows.extend(rep.entries.into_iter().map(|(name, st)| {
                vec![(c + 1).to_string(), name, num(st.z), st.degenerate.to_string()]
            })),
            Err(e) => warn(&format!("chain {}: Geweke scores skipped: {e}", c + 1)),
        }
    }
    write_table(
        &dir.join("geweke.csv"),
        &["chain", "parameter", "z", "degenerate"],
        &rows,
    )
}

fn write_acceptance(dir: &Path, chains: &[ChainTrace64]) -> Outcome<()> {
    let mut rows = Vec::new();
    for (c, trace) in chains.iter().enumerate() {
        for (block, rate) in &trace.accept_rates {
            let name = serde_json::to_value(block)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            rows.push(vec![(c + 1).to_string(), name, num(*rate)]);
        }
    }
    write_table(&dir.join("acceptance.csv"), &["chain", "block", "rate"], &rows)
}

fn cell_rows(panel: &PanelData64, cols: &[&Matrix<f64>]) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(panel.m() * panel.t());
    for (i, id) in panel.region_ids.iter().enumerate() {
        for (j, date) in panel.dates.iter().enumerate() {
            let mut r = vec![id.clone(), date.format("%Y-%m-%d").to_string()];
            r.extend(cols.iter().map(|c| num(c[(i, j)])));
            rows.push(r);
        }
    }
    rows
}

fn write_profiles(dir: &Path, cfg: &RunConfig, panel: &PanelData64, trace: &ChainTrace64) -> Outcome<()> {
    if trace.mu_snapshots.len() < 2 {
        warn("fewer than two mean snapshots; fitted, MSE and MSPE profiles skipped");
        return Ok(());
    }
    let observed = observed_cases(panel, cfg.model.data_model)?;
    let (mean, lo, hi) = mean_surface_summary(trace)?;
    write_table(
        &dir.join("fitted.csv"),
        &["fips", "date", "observed", "mu_mean", "lower95", "upper95"],
        &cell_rows(panel, &[&observed, &mean, &lo, &hi]),
    )?;
    let snaps: Vec<Matrix<f64>> = trace.mu_snapshots.iter().map(|s| s.mu.clone()).collect();
    let mse = mse_profile(&snaps, &observed)?;
    write_table(&dir.join("mse.csv"), &["fips", "date", "mse"], &cell_rows(panel, &[&mse]))?;
    let reps = replicate_within_sample(trace, &cfg.model, cfg.sampler.seed ^ REPLICATE_STREAM)?;
    let mspe = mspe_profile(&reps, &observed)?;
    write_table(&dir.join("mspe.csv"), &["fips", "date", "mspe"], &cell_rows(panel, &[&mspe]))
}

pub fn fit(config: &Path, ov: &Overrides, k: usize) -> Outcome<()> {
    let (cfg, panel, graph) = load(config, ov)?;
    let chains = run_chains(&panel, &cfg.model, graph.as_ref(), &cfg.sampler, k)?;
    let dir = &cfg.output_dir;
    for (c, trace) in chains.iter().enumerate() {
        write_trace(&trace_path(dir, c + 1), trace, &cfg.model)?;
    }
    let merged = ChainTrace::merge(&chains)?;
    write_summary(dir, &merged)?;
    write_dic(dir, &merged)?;
    write_geweke(dir, &chains)?;
    write_acceptance(dir, &chains)?;
    write_profiles(dir, &cfg, &panel, &merged)
}

fn read_traces(cfg: &RunConfig, panel: &PanelData64, k: usize, given: &[PathBuf]) -> Outcome<Vec<ChainTrace64>> {
    let paths: Vec<PathBuf> = if given.is_empty() {
        (1..=k).map(|c| trace_path(&cfg.output_dir, c)).collect()
    } else {
        given.to_vec()
    };
    paths
        .iter()
        .map(|p| read_trace(p, &cfg.model, panel.m(), panel.t()))
        .collect()
}

pub fn predict(config: &Path, ov: &Overrides, k: usize, traces: &[PathBuf]) -> Outcome<()> {
    let (cfg, panel, graph) = load(config, ov)?;
    let chains = read_traces(&cfg, &panel, k, traces)?;
    let merged = ChainTrace::merge(&chains)?;
    let fc = one_step_forecast(
        &merged,
        &panel,
        &cfg.model,
        graph.as_ref(),
        cfg.sampler.seed ^ FORECAST_STREAM,
    )?;
    let rows: Vec<Vec<String>> = fc
        .into_iter()
        .map(|f| {
            vec![f.region_id, num(f.pred_mean), num(f.lower95), num(f.upper95), f.n_draws.to_string()]
        })
        .collect();
    write_table(
        &cfg.output_dir.join("forecast.csv"),
        &["fips", "pred_mean", "lower95", "upper95", "n_draws"],
        &rows,
    )
}

pub fn diagnose(config: &Path, ov: &Overrides, k: usize, traces: &[PathBuf]) -> Outcome<()> {
    let (cfg, panel, _) = load(config, ov)?;
    let chains = read_traces(&cfg, &panel, k, traces)?;
    let merged = ChainTrace::merge(&chains)?;
    let dir = &cfg.output_dir;
    write_summary(dir, &merged)?;
    write_dic(dir, &merged)?;
    write_geweke(dir, &chains)
}

pub fn compare(configs: &[PathBuf], ov: &Overrides, k: usize) -> Outcome<()> {
    if configs.len() < 2 {
        return Err(Failure::config("compare needs at least two configurations"));
    }
    let per_fit = Overrides { out: None, ..ov.clone() };
    let mut first: Option<(PanelData64, PathBuf)> = None;
    let mut rows: Vec<(String, stsir::metrics::DicResult<f64>)> = Vec::new();
    for path in configs {
        let (cfg, panel, graph) = load(path, &per_fit)?;
        match &first {
            None => first = Some((panel.clone(), cfg.output_dir.clone())),
            Some((p, _)) if *p != panel => {
                return Err(Failure::data(format!(
                    "{} does not describe the same panel as {}",
                    path.display(),
                    configs[0].display()
                )))
            }
            Some(_) => {}
        }
        let chains = run_chains(&panel, &cfg.model, graph.as_ref(), &cfg.sampler, k)?;
        let merged = ChainTrace::merge(&chains)?;
        rows.push((cfg.label(), dic(&merged.deviances)?));
    }
    rows.sort_by(|a, b| a.1.dic.total_cmp(&b.1.dic).then_with(|| a.0.cmp(&b.0)));
    let dir = ov.out.clone().unwrap_or_else(|| first.expect("two configs").1);
    let table: Vec<Vec<String>> = rows
        .into_iter()
        .map(|(label, d)| vec![label, num(d.dic), num(d.p_d), num(d.mean_deviance)])
        .collect();
    write_table(&dir.join("compare.csv"), &["model", "dic", "pd", "mean_deviance"], &table)
}

/// Writes the simulated panel in the input formats plus `truth.json` and a
/// `config.json` that fits the generating model to it.
pub fn simulate(scenario: &Path, ov: &Overrides) -> Outcome<()> {
    let file = ScenarioFile::load(scenario)?;
    let seed = ov.seed.unwrap_or(file.seed);
    let sc = file.build(seed)?;
    let panel = simulate_panel(&sc)?;
    let dir = ov.out.clone().unwrap_or_else(|| PathBuf::from("sim"));
    atomic(&dir.join("cases.csv"), |p| Ok(write_cases(p, &panel)?))?;
    atomic(&dir.join("population.csv"), |p| Ok(write_population(p, &panel)?))?;
    atomic(&dir.join("covariates.csv"), |p| Ok(write_covariates(p, &panel)?))?;
    atomic(&dir.join("adjacency.csv"), |p| {
        Ok(write_adjacency(p, &sc.graph, &panel.region_ids)?)
    })?;
    atomic(&dir.join("truth.json"), |p| write_text(p, &pretty(&sc.params)))?;
    let cfg = RunConfig {
        label: Some(file.model.variant.to_string()),
        paths: Paths {
            cases: "cases.csv".into(),
            population: "population.csv".into(),
            covariate: "covariates.csv".into(),
            adjacency: Some("adjacency.csv".into()),
        },
        date_range: (panel.dates[0], *panel.dates.last().expect("t >= 2")),
        model: file.model.clone(),
        sampler: SamplerConfig64 { seed, ..file.sampler.clone() },
        output_dir: "fit".into(),
        mode: Some(match file.model.data_model {
            stsir::model::DataModel::Poisson => Mode::Raw,
            stsir::model::DataModel::LogNormal => Mode::Smoothed,
        }),
    };
    atomic(&dir.join("config.json"), |p| write_text(p, &pretty(&cfg)))
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}
