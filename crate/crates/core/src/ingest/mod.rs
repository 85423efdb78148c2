//! Case, population, covariate and adjacency ingestion.

mod graph;
mod panel;
mod series;

use std::fs::File;
use std::path::Path;

pub use graph::{load_adjacency, write_adjacency, AdjacencyGraph};
pub use panel::{
    load_panel, read_case_records, write_cases, write_covariates, write_population, PanelData,
    RawCumulativeRecord,
};
pub use series::{cumulative_to_daily, smooth_3day_centered};

use crate::error::{Error, Result};

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.into(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub(crate) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Resolves the named header columns, failing on the first one absent.
pub(crate) fn require_columns(
    reader: &mut csv::Reader<File>,
    path: &Path,
    names: &[&str],
) -> Result<Vec<usize>> {
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line: 1,
                    message: format!("missing column `{name}`"),
                })
        })
        .collect()
}
