//! Simulation scenario files.

use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use stsir::forecast::{scenario_params, SimScenario};
use stsir::ingest::AdjacencyGraph;
use stsir::mcmc::ChainRng;
use stsir::{ModelSpec64, ParamVector64, SamplerConfig64};

use crate::fail::{Failure, Outcome};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSpec {
    Ring(usize),
    Path(usize),
    Edges { m: usize, pairs: Vec<(usize, usize)> },
}

impl GraphSpec {
    fn build(&self) -> stsir::Result<AdjacencyGraph> {
        match self {
            GraphSpec::Ring(m) => AdjacencyGraph::ring(*m),
            GraphSpec::Path(m) => AdjacencyGraph::path(*m),
            GraphSpec::Edges { m, pairs } => AdjacencyGraph::from_edges(*m, pairs),
        }
    }
}

/// Scalar truth; region effects are drawn from the ICAR prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthScalars {
    pub b0: f64,
    pub b1: f64,
    #[serde(default)]
    pub b2: f64,
    #[serde(default = "default_tau_b")]
    pub tau_b: f64,
}

fn default_tau_b() -> f64 {
    4.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerRegion {
    Common(f64),
    Each(Vec<f64>),
}

impl PerRegion {
    fn expand(&self, m: usize, what: &str) -> Outcome<Vec<f64>> {
        match self {
            PerRegion::Common(v) => Ok(vec![*v; m]),
            PerRegion::Each(v) if v.len() == m => Ok(v.clone()),
            PerRegion::Each(v) => Err(Failure::config(format!(
                "{what} has {} entries for {m} regions",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub model: ModelSpec64,
    pub days: usize,
    pub graph: GraphSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthScalars>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamVector64>,
    pub sus_init: PerRegion,
    /// Defaults to evenly spaced values on [-1, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poverty: Option<PerRegion>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    /// Sampler settings copied into the generated fit config.
    #[serde(default)]
    pub sampler: SamplerConfig64,
}

fn default_seed() -> u64 {
    1
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid date")
}

/// Evenly spaced covariate values on [-1, 1].
pub fn centred_covariate(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect()
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read scenario {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("invalid scenario {}: {e}", path.display())))
    }

    pub fn build(&self, seed: u64) -> Outcome<SimScenario<f64>> {
        self.model.validate()?;
        let graph = self.graph.build()?;
        let m = graph.m();
        let params = match (&self.truth, &self.params) {
            (Some(s), None) => {
                let mut rng = ChainRng::seed_from_u64(seed ^ 0x5eed_1ca2);
                scenario_params(&self.model, &graph, self.days, s.b0, s.b1, s.b2, s.tau_b, &mut rng)
            }
            (None, Some(p)) => p.clone(),
            _ => return Err(Failure::config("scenario needs exactly one of `truth` or `params`")),
        };
        let poverty = match &self.poverty {
            Some(p) => p.expand(m, "poverty")?,
            None => centred_covariate(m),
        };
        Ok(SimScenario {
            t: self.days,
            params,
            spec: self.model.clone(),
            graph,
            sus_init: self.sus_init.expand(m, "sus_init")?,
            poverty,
            seed,
            start_date: self.start_date,
        })
    }
}
