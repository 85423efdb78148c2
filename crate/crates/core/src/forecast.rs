//! Posterior predictive draws, one-day-ahead forecasts and the forward
//! simulator used to build synthetic panels.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AdjacencyGraph, PanelData};
use crate::matrix::Matrix;
use crate::mcmc::{ChainRng, ChainTrace};
use crate::metrics::quantile_sorted;
use crate::model::{
    accounting_step, transmission_term, DataModel, Design, ModelSpec, ParamLayout, ParamVector, Variant,
};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastResult<R> {
    pub region_id: String,
    pub pred_mean: R,
    pub lower95: R,
    pub upper95: R,
    pub n_draws: usize,
}

fn check_layout<R: Real>(trace: &ChainTrace<R>, spec: &ModelSpec<R>, m: usize, t: usize) -> Result<()> {
    let expected = ParamLayout::new(spec, m, t);
    if trace.layout != expected {
        return Err(Error::InvalidSpec(format!(
            "trace layout {:?} does not match the model specification {:?}",
            trace.layout, expected
        )));
    }
    if trace.is_empty() {
        return Err(Error::InvalidParams("trace has no draws".into()));
    }
    Ok(())
}

/// Draws one observation given `log mu`: Poisson counts, or for the
/// log-normal model `exp(N(log mu, 1/tau_y)) - offset` floored at zero.
fn predictive_draw<R: Real>(log_mu: R, spec: &ModelSpec<R>, tau_y: R, rng: &mut ChainRng) -> R {
    match spec.data_model {
        DataModel::Poisson => R::from_count(R::sample_poisson(log_mu.exp(), rng)),
        DataModel::LogNormal => {
            let z = log_mu + R::sample_standard_normal(rng) / tau_y.sqrt();
            (z.exp() - spec.offset).max(R::zero())
        }
    }
}

/// Posterior predictive distribution of day `T + 1` for every region.
///
/// Each retained draw advances the susceptibles with the observed day-`T`
/// counts, evaluates the mean from those same counts and samples one
/// observation. M4 has no intercept for the unseen day and reuses the last
/// day's `b0_time`. Intervals are equal-tailed 2.5%/97.5% quantiles.
pub fn one_step_forecast<R: Real>(
    trace: &ChainTrace<R>,
    panel: &PanelData<R>,
    spec: &ModelSpec<R>,
    graph: Option<&AdjacencyGraph>,
    seed: u64,
) -> Result<Vec<ForecastResult<R>>> {
    let (m, t) = (panel.m(), panel.t());
    check_layout(trace, spec, m, t)?;
    let design = Design::new(panel, spec, graph)?;
    let last = t - 1;
    let st = &design.state;
    let cases = &design.cases;

    let mut log_sus = Vec::with_capacity(m);
    let mut trans = Vec::with_capacity(m);
    for i in 0..m {
        let (s, _) = accounting_step(
            st.sus[(i, last)],
            cases[(i, last)],
            st.asym[(i, last)],
            st.removed_recov[(i, last)],
            R::from_count(panel.deaths[(i, last)]),
        );
        log_sus.push((s + spec.offset).ln());
        let neighbor = match (spec.variant.uses_neighbor_sum(), graph) {
            (true, Some(g)) => g
                .neighbors(i)
                .iter()
                .map(|&l| cases[(l, last)] + st.asym[(l, last)])
                .sum(),
            _ => R::zero(),
        };
        trans.push(transmission_term(cases[(i, last)], st.asym[(i, last)], neighbor, spec));
    }

    let mut rng = ChainRng::seed_from_u64(seed);
    let mut samples: Vec<Vec<R>> = vec![Vec::with_capacity(trace.len()); m];
    for draw in &trace.draws {
        for i in 0..m {
            let eff = crate::model::mean::effect_terms(i, last, panel.poverty[i], draw, spec)?;
            let lm = log_sus[i] + eff + draw.b1 * trans[i];
            samples[i].push(predictive_draw(lm, spec, draw.tau_y, &mut rng));
        }
    }

    let n = trace.len();
    samples
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            let mean = s.iter().copied().sum::<R>() / R::from_usize(n).unwrap();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            Ok(ForecastResult {
                region_id: panel.region_ids[i].clone(),
                pred_mean: mean,
                lower95: quantile_sorted(&s, R::lit(0.025)),
                upper95: quantile_sorted(&s, R::lit(0.975)),
                n_draws: n,
            })
        })
        .collect()
}

/// One replicated panel per stored mean snapshot, drawn cell by cell from
/// the data model.
pub fn replicate_within_sample<R: Real>(
    trace: &ChainTrace<R>,
    spec: &ModelSpec<R>,
    seed: u64,
) -> Result<Vec<Matrix<R>>> {
    if trace.mu_snapshots.is_empty() {
        return Err(Error::InvalidConfig(
            "trace holds no mean snapshots; set mu_snapshot_every > 0".into(),
        ));
    }
    let mut rng = ChainRng::seed_from_u64(seed);
    Ok(trace
        .mu_snapshots
        .iter()
        .map(|snap| {
            let tau_y = trace.draws.get(snap.draw).map_or(R::one(), |d| d.tau_y);
            snap.mu
                .map(|&mu| predictive_draw(mu.max(R::min_positive_value()).ln(), spec, tau_y, &mut rng))
        })
        .collect())
}

/// Posterior mean and equal-tailed 95% band of the mean surface.
pub fn mean_surface_summary<R: Real>(trace: &ChainTrace<R>) -> Result<(Matrix<R>, Matrix<R>, Matrix<R>)> {
    let first = trace
        .mu_snapshots
        .first()
        .ok_or_else(|| Error::InvalidConfig("trace holds no mean snapshots".into()))?;
    let (m, t) = first.mu.shape();
    let n = trace.mu_snapshots.len();
    let mut mean = Matrix::filled(m, t, R::zero());
    let mut lo = Matrix::filled(m, t, R::zero());
    let mut hi = Matrix::filled(m, t, R::zero());
    let mut buf = Vec::with_capacity(n);
    for i in 0..m {
        for j in 0..t {
            buf.clear();
            buf.extend(trace.mu_snapshots.iter().map(|s| s.mu[(i, j)]));
            mean[(i, j)] = buf.iter().copied().sum::<R>() / R::from_usize(n).unwrap();
            buf.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            lo[(i, j)] = quantile_sorted(&buf, R::lit(0.025));
            hi[(i, j)] = quantile_sorted(&buf, R::lit(0.975));
        }
    }
    Ok((mean, lo, hi))
}

/// Everything needed to forward-simulate a panel from known parameters.
#[derive(Debug, Clone)]
pub struct SimScenario<R> {
    pub t: usize,
    pub params: ParamVector<R>,
    pub spec: ModelSpec<R>,
    pub graph: AdjacencyGraph,
    pub sus_init: Vec<R>,
    pub poverty: Vec<R>,
    pub seed: u64,
    pub start_date: NaiveDate,
}

impl<R: Real> SimScenario<R> {
    pub fn m(&self) -> usize {
        self.graph.m()
    }

    pub fn region_ids(&self) -> Vec<String> {
        (1..=self.m()).map(|k| format!("R{k:03}")).collect()
    }
}

/// Probability that a symptomatic case dies, and the lag in days.
pub const SIM_DEATH_PROB: f64 = 0.02;
pub const SIM_DEATH_LAG: usize = 2;

/// Forward-runs the model with the scenario's true parameters.
///
/// Day one is Poisson with mean `initial_rate * S_i1`; later days follow the
/// accounting recursion and `log_mean`, always with Poisson counts whatever
/// the spec's data model. Deaths are Binomial(cases two days earlier, 0.02).
pub fn simulate_panel<R: Real>(scenario: &SimScenario<R>) -> Result<PanelData<R>> {
    let spec = &scenario.spec;
    spec.validate()?;
    let (m, t) = (scenario.m(), scenario.t);
    if t < 2 || scenario.sus_init.len() != m || scenario.poverty.len() != m {
        return Err(Error::Dimension("scenario sizes are inconsistent".into()));
    }
    scenario
        .params
        .validate(&ParamLayout::new(spec, m, t))?;
    let mut rng = ChainRng::seed_from_u64(scenario.seed);
    let mut sym = Matrix::filled(m, t, 0u64);
    let mut deaths = Matrix::filled(m, t, 0u64);
    let mut sus: Vec<R> = scenario.sus_init.clone();
    let asym_of = |c: u64| spec.phi * R::from_count(c);

    for i in 0..m {
        sym[(i, 0)] = R::sample_poisson(spec.initial_rate * sus[i], &mut rng);
    }
    for j in 1..t {
        for i in 0..m {
            let prev = sym[(i, j - 1)];
            let recov = if j - 1 == 0 {
                R::zero()
            } else {
                spec.beta_rc * R::from_count(prev)
            };
            let (s, _) = accounting_step(
                sus[i],
                R::from_count(prev),
                asym_of(prev),
                recov,
                R::from_count(deaths[(i, j - 1)]),
            );
            sus[i] = s;
        }
        for i in 0..m {
            let prev = R::from_count(sym[(i, j - 1)]);
            let neighbor = if spec.variant.uses_neighbor_sum() {
                scenario
                    .graph
                    .neighbors(i)
                    .iter()
                    .map(|&l| R::from_count(sym[(l, j - 1)]) * (R::one() + spec.phi))
                    .sum()
            } else {
                R::zero()
            };
            let cell = crate::model::CellInputs {
                region: i,
                day: j,
                sym_prev: prev,
                asym_prev: spec.phi * prev,
                neighbor_ty_prev: neighbor,
                poverty: scenario.poverty[i],
                sus: sus[i],
            };
            let mu = crate::model::log_mean(&cell, &scenario.params, spec)?.exp();
            if !(mu <= R::lit(10.0) * scenario.sus_init[i]) {
                return Err(Error::Explosive {
                    region: i,
                    day: j,
                    mu: mu.to_f64().unwrap_or(f64::INFINITY),
                });
            }
            sym[(i, j)] = R::sample_poisson(mu, &mut rng);
            if j >= SIM_DEATH_LAG {
                let n = sym[(i, j - SIM_DEATH_LAG)];
                deaths[(i, j)] = Binomial::new(n, SIM_DEATH_PROB)
                    .expect("valid binomial")
                    .sample(&mut rng);
            }
        }
    }
    let dates = scenario.start_date.iter_days().take(t).collect();
    PanelData::new(
        scenario.region_ids(),
        dates,
        sym,
        deaths,
        scenario.sus_init.clone(),
        scenario.poverty.clone(),
    )
}

/// Approximate draw from the zero-sum ICAR prior by single-site Gibbs,
/// re-centring after each sweep.
pub fn draw_icar<R: Real>(graph: &AdjacencyGraph, tau: R, sweeps: usize, rng: &mut ChainRng) -> Vec<R> {
    let m = graph.m();
    let mut b = vec![R::zero(); m];
    if m < 2 {
        return b;
    }
    for _ in 0..sweeps {
        for i in 0..m {
            let nb = graph.neighbors(i);
            let n = R::from_usize(nb.len()).unwrap();
            let mean = nb.iter().map(|&l| b[l]).sum::<R>() / n;
            b[i] = mean + R::sample_standard_normal(rng) / (tau * n).sqrt();
        }
        let c = b.iter().copied().sum::<R>() / R::from_usize(m).unwrap();
        b.iter_mut().for_each(|x| *x = *x - c);
    }
    b
}

/// Variant-appropriate true parameters from a handful of scalars: a common
/// intercept (broadcast over days for M4), slopes, and an ICAR field drawn
/// with precision `tau_b`. M5 uses the ICAR field as its region intercepts
/// and sets every unstructured effect to `b0`.
#[allow(clippy::too_many_arguments)]
pub fn scenario_params<R: Real>(
    spec: &ModelSpec<R>,
    graph: &AdjacencyGraph,
    t: usize,
    b0: R,
    b1: R,
    b2: R,
    tau_b: R,
    rng: &mut ChainRng,
) -> ParamVector<R> {
    let m = graph.m();
    let field = draw_icar(graph, tau_b, 500, rng);
    let mut p = ParamVector {
        b0,
        b1,
        b2: if spec.variant.uses_covariate() { b2 } else { R::zero() },
        tau_b,
        ..Default::default()
    };
    match spec.variant {
        Variant::M4 => p.b0_time = vec![b0; t],
        Variant::M5 => {
            p.b0_space = field.clone();
            p.v_uncorr = vec![b0; m];
        }
        _ => {}
    }
    if ParamLayout::new(spec, m, t).has(crate::model::ParamBlock::BSpatial) {
        p.b_spatial = field;
    }
    p
}
