use crate::error::{Error, Result};
use crate::ingest::PanelData;
use crate::real::Real;

use super::accounting::{observed_cases, LatentState};
use super::spec::{DataModel, ModelSpec};

/// `-2 (y log(mu + offset) - (mu + offset) - log y!)`.
pub fn poisson_deviance_cell<R: Real>(y: u64, mu: R, offset: R) -> R {
    let rate = mu + offset;
    let y_term = if y == 0 {
        R::zero()
    } else {
        R::from_count(y) * rate.ln()
    };
    R::lit(-2.0) * (y_term - rate - R::ln_factorial(y))
}

/// `-2 log N(y | mean, 1/tau)`.
pub fn normal_deviance_cell<R: Real>(y: R, mean: R, tau: R) -> R {
    let r = y - mean;
    (R::TAU()).ln() - tau.ln() + tau * r * r
}

/// Deviance summed over every region-day, day one included.
///
/// Poisson: sum of [`poisson_deviance_cell`]. Log-normal: `-2 sum log
/// N(log(smoothed + offset) | log mu, 1/tau_y)`.
pub fn total_deviance<R: Real>(
    panel: &PanelData<R>,
    state: &LatentState<R>,
    spec: &ModelSpec<R>,
    tau_y: R,
) -> Result<R> {
    let mu = state
        .mu
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("mean surface not populated".into()))?;
    if mu.shape() != panel.sym.shape() {
        return Err(Error::Dimension("mean surface shape".into()));
    }
    let total = match spec.data_model {
        DataModel::Poisson => panel
            .sym
            .as_slice()
            .iter()
            .zip(mu.as_slice())
            .map(|(&y, &m)| poisson_deviance_cell(y, m, spec.offset))
            .sum(),
        DataModel::LogNormal => {
            if !(tau_y > R::zero()) {
                return Err(Error::InvalidParams("tau_y must be positive".into()));
            }
            let y = observed_cases(panel, DataModel::LogNormal)?;
            y.as_slice()
                .iter()
                .zip(mu.as_slice())
                .map(|(&ys, &m)| normal_deviance_cell((ys + spec.offset).ln(), m.ln(), tau_y))
                .sum()
        }
    };
    Ok(total)
}
