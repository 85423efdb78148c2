use crate::error::{Error, Result};
use crate::ingest::{AdjacencyGraph, PanelData};
use crate::matrix::Matrix;
use crate::real::Real;

use super::accounting::{accounting_from_cases, observed_cases, LatentState};
use super::params::{ParamLayout, ParamVector};
use super::spec::{ModelSpec, Variant};

/// Everything `log_mean` needs for one region-day, with `day >= 1`
/// (0-based) so that day `day - 1` exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellInputs<R> {
    pub region: usize,
    pub day: usize,
    pub sym_prev: R,
    pub asym_prev: R,
    /// Sum of `sym + asym` over the region's neighbors on the previous day.
    pub neighbor_ty_prev: R,
    pub poverty: R,
    pub sus: R,
}

/// Data part of the transmission term, the quantity multiplied by `b1`.
pub fn transmission_term<R: Real>(sym_prev: R, asym_prev: R, neighbor_ty_prev: R, spec: &ModelSpec<R>) -> R {
    let eps = spec.offset;
    let ty = sym_prev + asym_prev;
    match spec.variant {
        Variant::M1 | Variant::M3 | Variant::M5 => (ty + eps).ln(),
        Variant::M2 => (ty + neighbor_ty_prev + eps).ln(),
        Variant::M4 if spec.m4_text_form => (ty + eps).ln(),
        Variant::M4 => (sym_prev + eps).ln() + (asym_prev + eps).ln(),
    }
}

/// Linear predictor minus the transmission and susceptible terms.
pub(crate) fn effect_terms<R: Real>(
    region: usize,
    day: usize,
    poverty: R,
    params: &ParamVector<R>,
    spec: &ModelSpec<R>,
) -> Result<R> {
    let get = |v: &[R], k: usize, name: &str| {
        v.get(k)
            .copied()
            .ok_or_else(|| Error::Dimension(format!("{name} has no entry {}", k + 1)))
    };
    let level = match spec.variant {
        Variant::M1 | Variant::M2 | Variant::M3 => params.b0,
        Variant::M4 => get(&params.b0_time, day, "b0_time")?,
        Variant::M5 => get(&params.b0_space, region, "b0_space")?,
    };
    let covariate = if spec.variant.uses_covariate() {
        params.b2 * poverty
    } else {
        R::zero()
    };
    let random = match spec.variant {
        Variant::M5 => get(&params.v_uncorr, region, "v")?,
        _ if spec.include_icar => get(&params.b_spatial, region, "b_spatial")?,
        _ => R::zero(),
    };
    Ok(level + covariate + random)
}

/// `log mu` for one cell: `log(S + offset)` plus the variant's `log f`.
pub fn log_mean<R: Real>(cell: &CellInputs<R>, params: &ParamVector<R>, spec: &ModelSpec<R>) -> Result<R> {
    if cell.day == 0 {
        return Err(Error::Dimension("log_mean needs a previous day".into()));
    }
    let trans = transmission_term(cell.sym_prev, cell.asym_prev, cell.neighbor_ty_prev, spec);
    let effects = effect_terms(cell.region, cell.day, cell.poverty, params, spec)?;
    Ok((cell.sus + spec.offset).ln() + effects + params.b1 * trans)
}

/// Parameter-free pieces of the mean surface, computed once per fit.
///
/// Susceptibles depend only on data, so `log(S + offset)` and the
/// transmission term are fixed; the sampler only moves the linear
/// predictor.
#[derive(Debug, Clone)]
pub struct Design<R> {
    pub spec: ModelSpec<R>,
    pub layout: ParamLayout,
    pub cases: Matrix<R>,
    pub state: LatentState<R>,
    pub log_sus: Matrix<R>,
    /// Column 0 is unused.
    pub transmission: Matrix<R>,
    pub poverty: Vec<R>,
    /// `log(initial_rate * S_i1)`.
    pub day_one_log_mu: Vec<R>,
}

impl<R: Real> Design<R> {
    pub fn new(panel: &PanelData<R>, spec: &ModelSpec<R>, graph: Option<&AdjacencyGraph>) -> Result<Self> {
        spec.validate()?;
        panel.validate()?;
        let (m, t) = (panel.m(), panel.t());
        if spec.needs_graph() {
            match graph {
                None => {
                    return Err(Error::InvalidSpec(format!(
                        "{} with this configuration needs an adjacency graph",
                        spec.variant
                    )))
                }
                Some(g) if g.m() != m => {
                    return Err(Error::Dimension(format!(
                        "graph has {} regions, panel has {m}",
                        g.m()
                    )))
                }
                Some(_) => {}
            }
        }
        let cases = observed_cases(panel, spec.data_model)?;
        let state = accounting_from_cases(panel, spec, &cases);
        let log_sus = state.sus.map(|&s| (s + spec.offset).ln());
        let mut transmission = Matrix::filled(m, t, R::zero());
        for i in 0..m {
            for j in 1..t {
                let neighbor = match (spec.variant.uses_neighbor_sum(), graph) {
                    (true, Some(g)) => g
                        .neighbors(i)
                        .iter()
                        .map(|&l| cases[(l, j - 1)] + state.asym[(l, j - 1)])
                        .sum(),
                    _ => R::zero(),
                };
                transmission[(i, j)] =
                    transmission_term(cases[(i, j - 1)], state.asym[(i, j - 1)], neighbor, spec);
            }
        }
        let day_one_log_mu = panel
            .sus_init
            .iter()
            .map(|&s| (spec.initial_rate * s).ln())
            .collect();
        Ok(Design {
            spec: spec.clone(),
            layout: ParamLayout::new(spec, m, t),
            cases,
            state,
            log_sus,
            transmission,
            poverty: panel.poverty.clone(),
            day_one_log_mu,
        })
    }

    pub fn m(&self) -> usize {
        self.cases.rows()
    }

    pub fn t(&self) -> usize {
        self.cases.cols()
    }

    /// `log mu` for all cells, day one included.
    pub fn log_mu(&self, params: &ParamVector<R>) -> Result<Matrix<R>> {
        let (m, t) = (self.m(), self.t());
        let mut out = Matrix::filled(m, t, R::zero());
        for i in 0..m {
            out[(i, 0)] = self.day_one_log_mu[i];
            for j in 1..t {
                let eff = effect_terms(i, j, self.poverty[i], params, &self.spec)?;
                out[(i, j)] = self.log_sus[(i, j)] + eff + params.b1 * self.transmission[(i, j)];
            }
        }
        Ok(out)
    }

    /// Latent state with the mean surface filled in.
    pub fn state_with_mu(&self, params: &ParamVector<R>) -> Result<LatentState<R>> {
        let mut st = self.state.clone();
        st.mu = Some(self.log_mu(params)?.map(|v| v.exp()));
        Ok(st)
    }
}

/// Convenience: accounting plus mean surface for a parameter vector.
pub fn compute_state<R: Real>(
    panel: &PanelData<R>,
    spec: &ModelSpec<R>,
    graph: Option<&AdjacencyGraph>,
    params: &ParamVector<R>,
) -> Result<LatentState<R>> {
    Design::new(panel, spec, graph)?.state_with_mu(params)
}
