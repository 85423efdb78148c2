//! Convergence diagnostics, DIC and fit profiles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mcmc::ChainTrace;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DicResult<R> {
    pub dic: R,
    pub p_d: R,
    pub mean_deviance: R,
}

/// DIC with `pD = var(D) / 2` (sample variance, divisor `n - 1`).
pub fn dic<R: Real>(deviances: &[R]) -> Result<DicResult<R>> {
    if deviances.len() < 2 {
        return Err(Error::InvalidParams("DIC needs at least two deviance draws".into()));
    }
    if deviances.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("deviance draw".into()));
    }
    let mean_deviance = mean(deviances);
    let p_d = variance(deviances, mean_deviance) / R::lit(2.0);
    Ok(DicResult {
        dic: mean_deviance + p_d,
        p_d,
        mean_deviance,
    })
}

fn mean<R: Real>(v: &[R]) -> R {
    v.iter().copied().sum::<R>() / R::from_usize(v.len()).unwrap()
}

fn variance<R: Real>(v: &[R], mean: R) -> R {
    let ss: R = v.iter().map(|&x| (x - mean) * (x - mean)).sum();
    ss / R::from_usize(v.len() - 1).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GewekeStat<R> {
    pub z: R,
    /// Both windows had zero estimated variance; `z` is reported as 0.
    pub degenerate: bool,
}

/// Variance of a window mean from `batches` non-overlapping batch means
/// (at most one per sample). Trailing samples that do not fill a batch are
/// dropped.
fn batch_mean_variance<R: Real>(w: &[R], batches: usize) -> R {
    let n = w.len();
    let batches = batches.min(n);
    if batches < 2 {
        let m = mean(w);
        return if n > 1 { variance(w, m) / R::from_usize(n).unwrap() } else { R::zero() };
    }
    let size = n / batches;
    let means: Vec<R> = w.chunks_exact(size).take(batches).map(mean).collect();
    let m = mean(&means);
    variance(&means, m) / R::from_usize(batches).unwrap()
}

/// Geweke z-score comparing the means of two windows, each window's
/// variance estimated from `batches` batch means.
pub fn geweke_windows<R: Real>(a: &[R], b: &[R], batches: usize) -> GewekeStat<R> {
    let diff = mean(a) - mean(b);
    let se2 = batch_mean_variance(a, batches) + batch_mean_variance(b, batches);
    if se2 > R::zero() {
        GewekeStat {
            z: diff / se2.sqrt(),
            degenerate: false,
        }
    } else {
        GewekeStat {
            z: R::zero(),
            degenerate: true,
        }
    }
}

/// Geweke diagnostic of the first `frac_a` against the last `frac_b` of a
/// trace of at least 100 draws. Both windows use `floor(sqrt(n))` batches,
/// `n` being the full trace length.
pub fn geweke_z<R: Real>(trace: &[R], frac_a: R, frac_b: R) -> Result<GewekeStat<R>> {
    let n = trace.len();
    if n < 100 {
        return Err(Error::InvalidParams(format!("Geweke needs 100 draws, got {n}")));
    }
    let unit = |f: R| f > R::zero() && f < R::one();
    if !unit(frac_a) || !unit(frac_b) {
        return Err(Error::InvalidParams("window fractions must lie in (0, 1)".into()));
    }
    let nr = R::from_usize(n).unwrap();
    let na = (frac_a * nr).floor().to_usize().unwrap_or(0);
    let nb = (frac_b * nr).floor().to_usize().unwrap_or(0);
    if na + nb > n {
        return Err(Error::InvalidParams("Geweke windows overlap".into()));
    }
    if na < 2 || nb < 2 {
        return Err(Error::InvalidParams("Geweke windows too short".into()));
    }
    let batches = (n as f64).sqrt().floor() as usize;
    Ok(geweke_windows(&trace[..na], &trace[n - nb..], batches))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GewekeReport<R> {
    pub entries: Vec<(String, GewekeStat<R>)>,
    pub window_a_frac: R,
    pub window_b_frac: R,
}

/// Geweke z-scores for every parameter column and the deviance.
pub fn geweke_report<R: Real>(trace: &ChainTrace<R>, frac_a: R, frac_b: R) -> Result<GewekeReport<R>> {
    let names = trace.layout.names();
    let flat: Vec<Vec<R>> = trace.draws.iter().map(|d| trace.layout.flatten(d)).collect();
    let mut entries = Vec::with_capacity(names.len() + 1);
    for (k, name) in names.into_iter().enumerate() {
        let col: Vec<R> = flat.iter().map(|row| row[k]).collect();
        entries.push((name, geweke_z(&col, frac_a, frac_b)?));
    }
    entries.push(("deviance".into(), geweke_z(&trace.deviances, frac_a, frac_b)?));
    Ok(GewekeReport {
        entries,
        window_a_frac: frac_a,
        window_b_frac: frac_b,
    })
}

fn mean_square_profile<R: Real>(draws: &[Matrix<R>], observed: &Matrix<R>) -> Result<Matrix<R>> {
    if draws.iter().any(|d| d.shape() != observed.shape()) {
        return Err(Error::Dimension("draw and observation shapes differ".into()));
    }
    let (m, t) = observed.shape();
    let n = R::from_usize(draws.len()).unwrap();
    let mut out = Matrix::filled(m, t, R::zero());
    for d in draws {
        for ((o, &x), &y) in out.as_mut_slice().iter_mut().zip(d.as_slice()).zip(observed.as_slice()) {
            *o = *o + (x - y) * (x - y);
        }
    }
    out.as_mut_slice().iter_mut().for_each(|v| *v = *v / n);
    Ok(out)
}

/// Per-cell mean over draws of `(mu - y)^2`.
pub fn mse_profile<R: Real>(mu_snapshots: &[Matrix<R>], observed: &Matrix<R>) -> Result<Matrix<R>> {
    if mu_snapshots.len() < 2 {
        return Err(Error::InvalidParams("MSE needs at least two snapshots".into()));
    }
    mean_square_profile(mu_snapshots, observed)
}

/// Per-cell mean over draws of `(y_rep - y)^2`.
pub fn mspe_profile<R: Real>(predictive_draws: &[Matrix<R>], observed: &Matrix<R>) -> Result<Matrix<R>> {
    if predictive_draws.is_empty() {
        return Err(Error::InvalidParams("MSPE needs predictive draws".into()));
    }
    mean_square_profile(predictive_draws, observed)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted<R: Real>(sorted: &[R], q: R) -> R {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * R::from_usize(n - 1).unwrap();
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - R::from_usize(lo).unwrap()) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorSummary<R> {
    pub mean: R,
    pub sd: R,
    pub q025: R,
    pub q975: R,
}

pub fn summarize<R: Real>(values: &[R]) -> Result<PosteriorSummary<R>> {
    if values.is_empty() {
        return Err(Error::InvalidParams("cannot summarize zero draws".into()));
    }
    let m = mean(values);
    let sd = if values.len() > 1 { variance(values, m).sqrt() } else { R::zero() };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(PosteriorSummary {
        mean: m,
        sd,
        q025: quantile_sorted(&sorted, R::lit(0.025)),
        q975: quantile_sorted(&sorted, R::lit(0.975)),
    })
}
