//! Run configuration files and their resolution against command-line flags.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use stsir::ingest::{load_adjacency, load_panel, AdjacencyGraph};
use stsir::model::DataModel;
use stsir::{ModelSpec64, PanelData64, SamplerConfig64};

use crate::fail::{Failure, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Raw,
    Smoothed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub cases: PathBuf,
    pub population: PathBuf,
    pub covariate: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub paths: Paths,
    pub date_range: (NaiveDate, NaiveDate),
    #[serde(default)]
    pub model: ModelSpec64,
    #[serde(default)]
    pub sampler: SamplerConfig64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's own directory.
    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.paths.cases);
        rebase(&mut cfg.paths.population);
        rebase(&mut cfg.paths.covariate);
        if let Some(a) = cfg.paths.adjacency.as_mut() {
            rebase(a);
        }
        rebase(&mut cfg.output_dir);
        if cfg.label.is_none() {
            cfg.label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    /// Applies flags, settles the data model from the mode and validates.
    pub fn resolve(mut self, ov: &Overrides) -> Outcome<Self> {
        if let Some(seed) = ov.seed {
            self.sampler.seed = seed;
        }
        if let Some(out) = &ov.out {
            self.output_dir = out.clone();
        }
        let mode = ov.mode.or(self.mode).unwrap_or(match self.model.data_model {
            DataModel::Poisson => Mode::Raw,
            DataModel::LogNormal => Mode::Smoothed,
        });
        match (mode, self.model.data_model) {
            (Mode::Smoothed, _) => self.model.data_model = DataModel::LogNormal,
            (Mode::Raw, DataModel::LogNormal) => {
                return Err(Failure::config(
                    "mode raw conflicts with a lognormal data model; use --mode smoothed",
                ))
            }
            (Mode::Raw, DataModel::Poisson) => {}
        }
        self.mode = Some(mode);
        self.model.validate()?;
        self.sampler.validate()?;
        for p in [&self.paths.cases, &self.paths.population, &self.paths.covariate]
            .into_iter()
            .chain(self.paths.adjacency.as_ref())
        {
            if !p.is_file() {
                return Err(Failure::config(format!("input file {} does not exist", p.display())));
            }
        }
        if self.model.needs_graph() && self.paths.adjacency.is_none() {
            return Err(Failure::config(format!(
                "model {} needs an adjacency file",
                self.model.variant
            )));
        }
        Ok(self)
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.model.variant.to_string())
    }

    pub fn load_data(&self) -> Outcome<(PanelData64, Option<AdjacencyGraph>)> {
        let mut panel: PanelData64 = load_panel(
            &self.paths.cases,
            &self.paths.population,
            &self.paths.covariate,
            self.date_range,
        )?;
        if self.model.data_model == DataModel::LogNormal {
            panel = panel.with_smoothed();
        }
        let graph = match &self.paths.adjacency {
            Some(p) => Some(load_adjacency(p, &panel.region_ids)?),
            None => None,
        };
        Ok((panel, graph))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> PathBuf {
        for f in ["cases.csv", "pop.csv", "cov.csv"] {
            std::fs::write(dir.join(f), "").unwrap();
        }
        let path = dir.join("run.json");
        std::fs::write(&path, body).unwrap();
        path
    }

    const BASE: &str = r#"{"paths": {"cases": "cases.csv", "population": "pop.csv", "covariate": "cov.csv"},
        "date_range": ["2020-04-02", "2020-06-29"], "model": {"variant": "M1", "include_icar": false}"#;

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), &format!("{BASE}}}"));
        let cfg = RunConfig::load(&path).unwrap().resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.paths.cases, dir.path().join("cases.csv"));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
        assert_eq!(cfg.label(), "run");
        assert_eq!(cfg.mode, Some(Mode::Raw));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), &format!("{BASE}}}"));
        let ov = Overrides { seed: Some(77), out: Some("/x".into()), mode: Some(Mode::Smoothed) };
        let cfg = RunConfig::load(&path).unwrap().resolve(&ov).unwrap();
        assert_eq!(cfg.sampler.seed, 77);
        assert_eq!(cfg.output_dir, PathBuf::from("/x"));
        assert_eq!(cfg.model.data_model, DataModel::LogNormal);
    }

    #[test]
    fn raw_mode_with_lognormal_model_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = BASE.replace(r#""include_icar": false"#, r#""include_icar": false, "data_model": "lognormal""#);
        let path = write(dir.path(), &format!(r#"{body}, "mode": "raw"}}"#));
        let err = RunConfig::load(&path).unwrap().resolve(&Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn graph_models_need_adjacency() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), &format!("{}}}", BASE.replace(r#", "include_icar": false"#, "")));
        assert!(RunConfig::load(&path).unwrap().resolve(&Overrides::default()).is_err());
    }
}
