use crate::error::{Error, Result};
use crate::ingest::AdjacencyGraph;
use crate::real::Real;

use super::params::{ParamBlock, ParamLayout, ParamVector};
use super::spec::{ModelSpec, Variant};

/// Sum of squared differences over each undirected edge once.
pub fn icar_quadratic_form<R: Real>(b: &[R], graph: &AdjacencyGraph) -> R {
    graph
        .edges()
        .map(|(i, l)| {
            let d = b[i] - b[l];
            d * d
        })
        .sum()
}

/// Intrinsic CAR log-density up to its additive constant:
/// `(m - 1)/2 log tau - tau/2 * sum_{i~l} (b_i - b_l)^2`.
///
/// The rank `m - 1` assumes a connected graph, which `AdjacencyGraph`
/// guarantees.
pub fn icar_logpdf<R: Real>(b: &[R], tau_b: R, graph: &AdjacencyGraph) -> R {
    let rank = R::from_usize(graph.m().saturating_sub(1)).unwrap();
    rank / R::lit(2.0) * tau_b.ln() - tau_b / R::lit(2.0) * icar_quadratic_form(b, graph)
}

/// `log N(x | 0, 1/tau)`.
pub fn gaussian_logpdf<R: Real>(x: R, tau: R) -> R {
    R::lit(0.5) * (tau.ln() - R::TAU().ln()) - R::lit(0.5) * tau * x * x
}

/// Gamma log-density in the shape/rate parameterization.
pub fn gamma_logpdf<R: Real>(x: R, shape: R, rate: R) -> R {
    shape * rate.ln() - shape.ln_gamma() + (shape - R::one()) * x.ln() - rate * x
}

/// Joint log prior of every block the spec carries.
///
/// Fixed effects are zero-mean Gaussians with their own gamma-distributed
/// precision (`tau0` shared by all day intercepts in M4, `tau_v` shared by
/// the unstructured effects in M5); ICAR vectors use [`icar_logpdf`].
pub fn log_prior<R: Real>(
    params: &ParamVector<R>,
    spec: &ModelSpec<R>,
    layout: &ParamLayout,
    graph: Option<&AdjacencyGraph>,
) -> Result<R> {
    params.validate(layout)?;
    let pc = &spec.prior;
    let fe = |x: R| gamma_logpdf(x, pc.fixed_effect_prec_shape, pc.fixed_effect_prec_rate);
    let mut total = R::zero();

    match spec.variant {
        Variant::M1 | Variant::M2 | Variant::M3 => total = total + gaussian_logpdf(params.b0, params.tau0),
        Variant::M4 => {
            total = total
                + params
                    .b0_time
                    .iter()
                    .map(|&b| gaussian_logpdf(b, params.tau0))
                    .sum::<R>()
        }
        Variant::M5 => {}
    }
    total = total + gaussian_logpdf(params.b1, params.tau1);
    if layout.has(ParamBlock::B2) {
        total = total + gaussian_logpdf(params.b2, params.tau2);
    }
    if layout.has(ParamBlock::VUncorr) {
        total = total
            + params
                .v_uncorr
                .iter()
                .map(|&v| gaussian_logpdf(v, params.tau_v))
                .sum::<R>();
    }

    for (block, tau) in [
        (ParamBlock::Tau0, params.tau0),
        (ParamBlock::Tau1, params.tau1),
        (ParamBlock::Tau2, params.tau2),
        (ParamBlock::TauV, params.tau_v),
    ] {
        if layout.has(block) {
            total = total + fe(tau);
        }
    }
    if layout.has(ParamBlock::TauY) {
        total = total + gamma_logpdf(params.tau_y, pc.lognormal_obs_prec_shape, pc.lognormal_obs_prec_rate);
    }
    if layout.has(ParamBlock::TauB) {
        let g = graph.ok_or_else(|| Error::InvalidSpec("ICAR prior needs an adjacency graph".into()))?;
        let field = if spec.variant == Variant::M5 {
            &params.b0_space
        } else {
            &params.b_spatial
        };
        total = total
            + icar_logpdf(field, params.tau_b, g)
            + gamma_logpdf(params.tau_b, pc.icar_prec_shape, pc.icar_prec_rate);
    }
    Ok(total)
}
