use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{csv_error, csv_reader, csv_writer, line_of, require_columns};
use super::{cumulative_to_daily, smooth_3day_centered};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::real::Real;

/// One row of a cumulative case file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCumulativeRecord {
    pub date: NaiveDate,
    pub region_id: String,
    pub cumulative_cases: u64,
    pub cumulative_deaths: u64,
    /// 1-based line in the source file.
    pub line: u64,
}

/// Region × day panel of daily counts with per-region baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelData<R> {
    pub region_ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub sym: Matrix<u64>,
    pub deaths: Matrix<u64>,
    pub sus_init: Vec<R>,
    pub poverty: Vec<R>,
    pub smoothed: Option<Matrix<R>>,
}

impl<R: Real> PanelData<R> {
    pub fn new(
        region_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        sym: Matrix<u64>,
        deaths: Matrix<u64>,
        sus_init: Vec<R>,
        poverty: Vec<R>,
    ) -> Result<Self> {
        let panel = PanelData {
            region_ids,
            dates,
            sym,
            deaths,
            sus_init,
            poverty,
            smoothed: None,
        };
        panel.validate()?;
        Ok(panel)
    }

    pub fn m(&self) -> usize {
        self.region_ids.len()
    }

    pub fn t(&self) -> usize {
        self.dates.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, t) = (self.m(), self.t());
        if m < 1 || t < 2 {
            return Err(Error::InvalidPanel(format!(
                "need at least 1 region and 2 days, got {m}x{t}"
            )));
        }
        if self.sym.shape() != (m, t) || self.deaths.shape() != (m, t) {
            return Err(Error::Dimension(format!(
                "count matrices must be {m}x{t}, got {:?} and {:?}",
                self.sym.shape(),
                self.deaths.shape()
            )));
        }
        if self.sus_init.len() != m || self.poverty.len() != m {
            return Err(Error::Dimension(format!(
                "baseline vectors must have length {m}"
            )));
        }
        for (i, id) in self.region_ids.iter().enumerate() {
            let s = self.sus_init[i];
            let total: u64 = self.sym.row(i).iter().sum();
            if !(s > R::zero()) || !s.is_finite() {
                return Err(Error::InvalidPanel(format!(
                    "region {id}: initial susceptibles must be positive"
                )));
            }
            if !(s > R::from_count(total)) {
                return Err(Error::InvalidPanel(format!(
                    "region {id}: {total} cases exceed initial susceptibles {s}"
                )));
            }
            if !self.poverty[i].is_finite() {
                return Err(Error::InvalidPanel(format!(
                    "region {id}: covariate is not finite"
                )));
            }
        }
        if let Some(sm) = &self.smoothed {
            if sm.shape() != (m, t) {
                return Err(Error::Dimension("smoothed matrix shape".into()));
            }
            if sm.as_slice().iter().any(|v| !(*v >= R::zero())) {
                return Err(Error::InvalidPanel("smoothed counts must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Attaches the 3-day centered smoothing of the symptomatic counts.
    pub fn with_smoothed(mut self) -> Self {
        let rows = self
            .sym
            .iter_rows()
            .map(|r| {
                let v: Vec<R> = r.iter().map(|&c| R::from_count(c)).collect();
                smooth_3day_centered(&v)
            })
            .collect();
        self.smoothed = Matrix::from_rows(rows);
        self
    }

    /// Row-selected sub-panel, preserving order of `rows`.
    pub fn select_regions(&self, rows: &[usize]) -> Result<Self> {
        let pick_u = |mat: &Matrix<u64>| {
            Matrix::from_rows(rows.iter().map(|&i| mat.row(i).to_vec()).collect())
        };
        let sub = PanelData {
            region_ids: rows.iter().map(|&i| self.region_ids[i].clone()).collect(),
            dates: self.dates.clone(),
            sym: pick_u(&self.sym).ok_or_else(|| Error::Dimension("rows".into()))?,
            deaths: pick_u(&self.deaths).ok_or_else(|| Error::Dimension("rows".into()))?,
            sus_init: rows.iter().map(|&i| self.sus_init[i]).collect(),
            poverty: rows.iter().map(|&i| self.poverty[i]).collect(),
            smoothed: self.smoothed.as_ref().and_then(|sm| {
                Matrix::from_rows(rows.iter().map(|&i| sm.row(i).to_vec()).collect())
            }),
        };
        sub.validate()?;
        Ok(sub)
    }

    /// The first `t` days; used to hold out the tail of a panel. Smoothing
    /// is recomputed on the shorter series if it was present.
    pub fn leading_days(&self, t: usize) -> Result<Self> {
        if t > self.t() {
            return Err(Error::Dimension(format!("cannot keep {t} of {} days", self.t())));
        }
        let cut = |mat: &Matrix<u64>| {
            Matrix::from_rows(mat.iter_rows().map(|r| r[..t].to_vec()).collect())
                .unwrap_or_else(|| Matrix::filled(0, t, 0))
        };
        let sub = PanelData {
            region_ids: self.region_ids.clone(),
            dates: self.dates[..t].to_vec(),
            sym: cut(&self.sym),
            deaths: cut(&self.deaths),
            sus_init: self.sus_init.clone(),
            poverty: self.poverty.clone(),
            smoothed: None,
        };
        sub.validate()?;
        Ok(if self.smoothed.is_some() { sub.with_smoothed() } else { sub })
    }
}

/// Reads a `date,county,state,fips,cases,deaths` cumulative case file.
///
/// Rows with an empty `fips` (unassigned cases) are skipped; an empty
/// `deaths` field counts as zero.
pub fn read_case_records(path: impl AsRef<Path>) -> Result<Vec<RawCumulativeRecord>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let cols = require_columns(&mut reader, path, &["date", "fips", "cases", "deaths"])?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec);
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let bad = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let region_id = field(1);
        if region_id.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d")
            .map_err(|e| bad(format!("bad date `{}`: {e}", field(0))))?;
        let count = |k: usize, name: &str| -> Result<u64> {
            let s = field(k);
            if s.is_empty() && name == "deaths" {
                return Ok(0);
            }
            s.parse::<u64>()
                .map_err(|e| bad(format!("bad {name} `{s}`: {e}")))
        };
        out.push(RawCumulativeRecord {
            date,
            region_id: region_id.to_string(),
            cumulative_cases: count(2, "cases")?,
            cumulative_deaths: count(3, "deaths")?,
            line,
        });
    }
    Ok(out)
}

fn read_region_values<R: Real>(
    path: &Path,
    value_col: &str,
) -> Result<HashMap<String, R>> {
    let mut reader = csv_reader(path)?;
    let cols = require_columns(&mut reader, path, &["fips", value_col])?;
    let mut out = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec);
        let id = rec.get(cols[0]).unwrap_or("");
        let raw = rec.get(cols[1]).unwrap_or("");
        let value = R::from_str_radix(raw, 10).map_err(|_| Error::Parse {
            path: path.into(),
            line,
            message: format!("bad {value_col} `{raw}`"),
        })?;
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.into(),
                line,
                message: "empty fips".into(),
            });
        }
        out.insert(id.to_string(), value);
    }
    Ok(out)
}

/// Builds a daily panel over the inclusive `date_range`.
///
/// Regions are every `fips` present in the case file, sorted
/// lexicographically. Cumulative values carry forward over days on which a
/// region has no row (zero before its first row), so absent days contribute
/// zero daily counts. Differencing uses the day before the window start so
/// that a window beginning mid-epidemic is not charged the whole backlog.
pub fn load_panel<R: Real>(
    cases_path: impl AsRef<Path>,
    population_path: impl AsRef<Path>,
    covariate_path: impl AsRef<Path>,
    date_range: (NaiveDate, NaiveDate),
) -> Result<PanelData<R>> {
    let cases_path = cases_path.as_ref();
    let (start, end) = date_range;
    if end < start {
        return Err(Error::InvalidPanel(format!("empty date range {start}..{end}")));
    }
    let records = read_case_records(cases_path)?;
    let mut by_region: BTreeMap<String, BTreeMap<NaiveDate, (u64, u64)>> = BTreeMap::new();
    for r in &records {
        let prev = by_region
            .entry(r.region_id.clone())
            .or_default()
            .insert(r.date, (r.cumulative_cases, r.cumulative_deaths));
        if prev.is_some() {
            return Err(Error::Parse {
                path: cases_path.into(),
                line: r.line,
                message: format!("duplicate row for region {} on {}", r.region_id, r.date),
            });
        }
    }

    let dates: Vec<NaiveDate> = start.iter_days().take_while(|d| *d <= end).collect();
    let before = start.checked_sub_days(Days::new(1));
    let t = dates.len();

    let population: HashMap<String, R> =
        read_region_values(population_path.as_ref(), "population")?;
    let covariate: HashMap<String, R> = read_region_values(covariate_path.as_ref(), "pct_poverty")?;

    let mut sym = Vec::with_capacity(by_region.len() * t);
    let mut deaths = Vec::with_capacity(by_region.len() * t);
    let mut sus_init = Vec::new();
    let mut poverty = Vec::new();
    for (id, series) in &by_region {
        let at = |d: Option<NaiveDate>| -> (u64, u64) {
            d.and_then(|d| series.range(..=d).next_back().map(|(_, v)| *v))
                .unwrap_or((0, 0))
        };
        let cum: Vec<(u64, u64)> = std::iter::once(at(before))
            .chain(dates.iter().map(|d| at(Some(*d))))
            .collect();
        let c: Vec<u64> = cum.iter().map(|v| v.0).collect();
        let dd: Vec<u64> = cum.iter().map(|v| v.1).collect();
        sym.extend_from_slice(&cumulative_to_daily(&c)[1..]);
        deaths.extend_from_slice(&cumulative_to_daily(&dd)[1..]);
        sus_init.push(*population.get(id).ok_or_else(|| Error::MissingRegion {
            region: id.clone(),
            path: population_path.as_ref().into(),
        })?);
        poverty.push(*covariate.get(id).ok_or_else(|| Error::MissingRegion {
            region: id.clone(),
            path: covariate_path.as_ref().into(),
        })?);
    }
    let m = by_region.len();
    if m == 0 {
        return Err(Error::InvalidPanel("case file names no regions".into()));
    }
    PanelData::new(
        by_region.into_keys().collect(),
        dates,
        Matrix::from_vec(m, t, sym).expect("m*t counts"),
        Matrix::from_vec(m, t, deaths).expect("m*t counts"),
        sus_init,
        poverty,
    )
}

/// Writes the panel as a cumulative case file, one row per region-day.
pub fn write_cases<R: Real>(path: impl AsRef<Path>, panel: &PanelData<R>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let res: std::result::Result<(), csv::Error> = (|| {
        w.write_record(["date", "county", "state", "fips", "cases", "deaths"])?;
        let mut cum = vec![(0u64, 0u64); panel.m()];
        for (j, date) in panel.dates.iter().enumerate() {
            let day = date.format("%Y-%m-%d").to_string();
            for (i, id) in panel.region_ids.iter().enumerate() {
                cum[i].0 += panel.sym[(i, j)];
                cum[i].1 += panel.deaths[(i, j)];
                w.write_record([
                    day.as_str(),
                    id.as_str(),
                    "",
                    id.as_str(),
                    &cum[i].0.to_string(),
                    &cum[i].1.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_error(path, e))
}

fn write_region_values<R: Real>(
    path: &Path,
    header: &str,
    ids: &[String],
    values: &[R],
) -> Result<()> {
    let mut w = csv_writer(path)?;
    let res: std::result::Result<(), csv::Error> = (|| {
        w.write_record(["fips", header])?;
        for (id, v) in ids.iter().zip(values) {
            w.write_record([id.as_str(), &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_error(path, e))
}

pub fn write_population<R: Real>(path: impl AsRef<Path>, panel: &PanelData<R>) -> Result<()> {
    write_region_values(path.as_ref(), "population", &panel.region_ids, &panel.sus_init)
}

pub fn write_covariates<R: Real>(path: impl AsRef<Path>, panel: &PanelData<R>) -> Result<()> {
    write_region_values(path.as_ref(), "pct_poverty", &panel.region_ids, &panel.poverty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    struct Files {
        _dir: tempfile::TempDir,
        cases: std::path::PathBuf,
        pop: std::path::PathBuf,
        cov: std::path::PathBuf,
    }

    fn files(cases: &str, pop: &str, cov: &str) -> Files {
        let dir = tempfile::tempdir().unwrap();
        let f = Files {
            cases: dir.path().join("cases.csv"),
            pop: dir.path().join("pop.csv"),
            cov: dir.path().join("cov.csv"),
            _dir: dir,
        };
        fs::write(&f.cases, cases).unwrap();
        fs::write(&f.pop, pop).unwrap();
        fs::write(&f.cov, cov).unwrap();
        f
    }

    const HEADER: &str = "date,county,state,fips,cases,deaths\n";

    #[test]
    fn all_zero_epidemic() {
        let body = format!(
            "{HEADER}2020-03-01,A,SC,45001,0,0\n2020-03-01,B,SC,45003,0,0\n\
             2020-03-02,A,SC,45001,0,0\n2020-03-02,B,SC,45003,0,0\n"
        );
        let f = files(
            &body,
            "fips,population\n45001,1000\n45003,2000\n",
            "fips,pct_poverty\n45001,12.5\n45003,20\n",
        );
        let p: PanelData<f64> =
            load_panel(&f.cases, &f.pop, &f.cov, (d("2020-03-01"), d("2020-03-02"))).unwrap();
        assert_eq!(p.region_ids, vec!["45001", "45003"]);
        assert!(p.sym.as_slice().iter().all(|&c| c == 0));
        assert_eq!(p.sus_init, vec![1000.0, 2000.0]);
        assert_eq!(p.poverty, vec![12.5, 20.0]);
    }

    #[test]
    fn late_region_zero_filled_and_sorted() {
        let body = format!(
            "{HEADER}2020-03-01,B,SC,2,1,0\n2020-03-02,B,SC,2,1,0\n2020-03-03,B,SC,2,4,1\n\
             2020-03-03,A,SC,1,2,0\n2020-03-04,A,SC,1,5,0\n2020-03-05,A,SC,1,5,0\n"
        );
        let f = files(&body, "fips,population\n1,100\n2,100\n", "fips,pct_poverty\n1,1\n2,2\n");
        let p: PanelData<f64> =
            load_panel(&f.cases, &f.pop, &f.cov, (d("2020-03-01"), d("2020-03-05"))).unwrap();
        assert_eq!(p.region_ids, vec!["1", "2"]);
        assert_eq!(p.sym.row(0), &[0, 0, 2, 3, 0]);
        // region 2 has no rows after day 3: carried forward, daily zero
        assert_eq!(p.sym.row(1), &[1, 0, 3, 0, 0]);
        assert_eq!(p.deaths.row(1), &[0, 0, 1, 0, 0]);
    }

    #[test]
    fn window_start_differences_against_previous_day() {
        let body = format!("{HEADER}2020-03-01,A,SC,1,10,0\n2020-03-02,A,SC,1,12,0\n2020-03-03,A,SC,1,15,0\n");
        let f = files(&body, "fips,population\n1,100\n", "fips,pct_poverty\n1,1\n");
        let p: PanelData<f64> =
            load_panel(&f.cases, &f.pop, &f.cov, (d("2020-03-02"), d("2020-03-03"))).unwrap();
        assert_eq!(p.sym.row(0), &[2, 3]);
    }

    #[test]
    fn missing_population_region_named() {
        let body = format!("{HEADER}2020-03-01,A,SC,45001,0,0\n2020-03-01,B,SC,45003,0,0\n");
        let f = files(&body, "fips,population\n45001,1000\n", "fips,pct_poverty\n45001,1\n45003,1\n");
        let err = load_panel::<f64>(&f.cases, &f.pop, &f.cov, (d("2020-03-01"), d("2020-03-02")))
            .unwrap_err();
        match err {
            Error::MissingRegion { region, .. } => assert_eq!(region, "45003"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparseable_row_reports_line() {
        let body = format!("{HEADER}2020-03-01,A,SC,1,0,0\n2020-03-02,A,SC,1,x,0\n");
        let f = files(&body, "fips,population\n1,100\n", "fips,pct_poverty\n1,1\n");
        let err = load_panel::<f64>(&f.cases, &f.pop, &f.cov, (d("2020-03-01"), d("2020-03-02")))
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cases_exceeding_population_rejected() {
        let body = format!("{HEADER}2020-03-01,A,SC,1,0,0\n2020-03-02,A,SC,1,150,0\n");
        let f = files(&body, "fips,population\n1,100\n", "fips,pct_poverty\n1,1\n");
        assert!(matches!(
            load_panel::<f64>(&f.cases, &f.pop, &f.cov, (d("2020-03-01"), d("2020-03-02"))),
            Err(Error::InvalidPanel(_))
        ));
    }

    #[test]
    fn reversed_range_rejected() {
        let f = files(HEADER, "fips,population\n", "fips,pct_poverty\n");
        assert!(load_panel::<f64>(&f.cases, &f.pop, &f.cov, (d("2020-03-02"), d("2020-03-01"))).is_err());
    }

    #[test]
    fn smoothed_rows_attach() {
        let p = PanelData::<f64>::new(
            vec!["a".into()],
            vec![d("2020-01-01"), d("2020-01-02"), d("2020-01-03")],
            Matrix::from_vec(1, 3, vec![0, 3, 6]).unwrap(),
            Matrix::filled(1, 3, 0),
            vec![100.0],
            vec![0.0],
        )
        .unwrap()
        .with_smoothed();
        assert_eq!(p.smoothed.unwrap().row(0), &[1.5, 3.0, 4.5]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn csv_round_trip_is_exact(
            counts in prop::collection::vec(prop::collection::vec((0u64..60, 0u64..4), 4), 1..5),
            pops in prop::collection::vec(1.0e3f64..1.0e6, 5),
        ) {
            let m = counts.len();
            let t = 4;
            let dates: Vec<NaiveDate> = d("2020-04-01").iter_days().take(t).collect();
            let sym = Matrix::from_rows(counts.iter().map(|r| r.iter().map(|c| c.0).collect()).collect()).unwrap();
            let deaths = Matrix::from_rows(counts.iter().map(|r| r.iter().map(|c| c.1).collect()).collect()).unwrap();
            let ids: Vec<String> = (0..m).map(|i| format!("450{:02}", i)).collect();
            let p = PanelData::new(ids, dates.clone(), sym, deaths, pops[..m].to_vec(), pops[..m].iter().map(|v| v / 1e5).collect()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let (c, pp, cv) = (dir.path().join("c.csv"), dir.path().join("p.csv"), dir.path().join("v.csv"));
            write_cases(&c, &p).unwrap();
            write_population(&pp, &p).unwrap();
            write_covariates(&cv, &p).unwrap();
            let back: PanelData<f64> = load_panel(&c, &pp, &cv, (dates[0], dates[t - 1])).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
