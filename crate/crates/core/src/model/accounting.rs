use crate::error::{Error, Result};
use crate::ingest::PanelData;
use crate::matrix::Matrix;
use crate::real::Real;

use super::spec::{DataModel, ModelSpec};

/// Deterministic compartments implied by the data, plus the mean surface
/// once parameters are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<R> {
    pub sus: Matrix<R>,
    pub asym: Matrix<R>,
    pub removed_recov: Matrix<R>,
    pub mu: Option<Matrix<R>>,
    /// Set when some susceptible count would have gone negative.
    pub floored: bool,
}

/// The case series the data model consumes: raw daily counts for Poisson,
/// the smoothed series for log-normal.
pub fn observed_cases<R: Real>(panel: &PanelData<R>, data_model: DataModel) -> Result<Matrix<R>> {
    match data_model {
        DataModel::Poisson => Ok(panel.sym.map(|&c| R::from_count(c))),
        DataModel::LogNormal => panel.smoothed.clone().ok_or_else(|| {
            Error::InvalidPanel("log-normal model needs the smoothed case series".into())
        }),
    }
}

/// One accounting update: previous susceptibles minus symptomatic,
/// asymptomatic, recovered and dead. Returns the floored value and whether
/// flooring happened.
pub fn accounting_step<R: Real>(sus_prev: R, cases_prev: R, asym_prev: R, recov_prev: R, deaths_prev: R) -> (R, bool) {
    let next = sus_prev - cases_prev - asym_prev - recov_prev - deaths_prev;
    if next < R::zero() {
        (R::zero(), true)
    } else {
        (next, false)
    }
}

/// Runs the susceptible recursion forward over the panel. Recovery on the
/// first day is zero.
pub fn accounting_forward<R: Real>(panel: &PanelData<R>, spec: &ModelSpec<R>) -> Result<LatentState<R>> {
    let cases = observed_cases(panel, spec.data_model)?;
    Ok(accounting_from_cases(panel, spec, &cases))
}

pub(crate) fn accounting_from_cases<R: Real>(
    panel: &PanelData<R>,
    spec: &ModelSpec<R>,
    cases: &Matrix<R>,
) -> LatentState<R> {
    let (m, t) = cases.shape();
    let asym = cases.map(|&c| spec.phi * c);
    let mut removed_recov = cases.map(|&c| spec.beta_rc * c);
    let mut sus = Matrix::filled(m, t, R::zero());
    let mut floored = false;
    for i in 0..m {
        removed_recov[(i, 0)] = R::zero();
        sus[(i, 0)] = panel.sus_init[i];
        for j in 1..t {
            let (s, f) = accounting_step(
                sus[(i, j - 1)],
                cases[(i, j - 1)],
                asym[(i, j - 1)],
                removed_recov[(i, j - 1)],
                R::from_count(panel.deaths[(i, j - 1)]),
            );
            sus[(i, j)] = s;
            floored |= f;
        }
    }
    LatentState {
        sus,
        asym,
        removed_recov,
        mu: None,
        floored,
    }
}
