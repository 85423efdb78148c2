use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Which log-mean function drives transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Own-region lagged infectives, global intercept, ICAR effect.
    M1,
    /// As M1 with neighbor infectives added inside the log.
    M2,
    /// As M1 plus the poverty covariate.
    M3,
    /// Day-specific intercepts, covariate, ICAR effect.
    M4,
    /// ICAR region-specific intercepts, covariate, unstructured effect.
    M5,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::M1, Variant::M2, Variant::M3, Variant::M4, Variant::M5];

    pub fn uses_covariate(self) -> bool {
        matches!(self, Variant::M3 | Variant::M4 | Variant::M5)
    }

    pub fn uses_neighbor_sum(self) -> bool {
        self == Variant::M2
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" | "1" => Ok(Variant::M1),
            "M2" | "2" => Ok(Variant::M2),
            "M3" | "3" => Ok(Variant::M3),
            "M4" | "4" => Ok(Variant::M4),
            "M5" | "5" => Ok(Variant::M5),
            _ => Err(Error::InvalidSpec(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataModel {
    /// Daily counts ~ Poisson(mu).
    Poisson,
    /// log(smoothed + offset) ~ Normal(log mu, 1/tau_y).
    #[serde(alias = "log_normal")]
    LogNormal,
}

/// Gamma(shape, rate) hyperpriors on the precisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "R: Real")]
pub struct PriorConfig<R> {
    pub fixed_effect_prec_shape: R,
    pub fixed_effect_prec_rate: R,
    pub icar_prec_shape: R,
    pub icar_prec_rate: R,
    pub lognormal_obs_prec_shape: R,
    pub lognormal_obs_prec_rate: R,
}

impl<R: Real> Default for PriorConfig<R> {
    fn default() -> Self {
        PriorConfig {
            fixed_effect_prec_shape: R::lit(2.0),
            fixed_effect_prec_rate: R::lit(0.5),
            icar_prec_shape: R::lit(0.01),
            icar_prec_rate: R::lit(0.01),
            lognormal_obs_prec_shape: R::lit(2.0),
            lognormal_obs_prec_rate: R::lit(0.5),
        }
    }
}

impl<R: Real> PriorConfig<R> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("fixed_effect_prec_shape", self.fixed_effect_prec_shape),
            ("fixed_effect_prec_rate", self.fixed_effect_prec_rate),
            ("icar_prec_shape", self.icar_prec_shape),
            ("icar_prec_rate", self.icar_prec_rate),
            ("lognormal_obs_prec_shape", self.lognormal_obs_prec_shape),
            ("lognormal_obs_prec_rate", self.lognormal_obs_prec_rate),
        ];
        for (name, v) in all {
            if !(v > R::zero()) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("prior.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Complete description of one model variant and its fixed constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "R: Real")]
pub struct ModelSpec<R> {
    pub variant: Variant,
    /// Asymptomatic cases per symptomatic case.
    pub phi: R,
    /// Recovered fraction of the symptomatic count.
    pub beta_rc: R,
    pub data_model: DataModel,
    /// Added inside every log of data or susceptibles.
    pub offset: R,
    /// Day-one mean is `initial_rate * S_i1`.
    pub initial_rate: R,
    /// Spatially structured effect for M1–M4. M5 always carries its ICAR
    /// intercept and ignores this flag.
    pub include_icar: bool,
    /// Use `b1 * log(Ty + offset)` for M4 instead of the split
    /// `b1 * (log(sym + offset) + log(asym + offset))`.
    pub m4_text_form: bool,
    pub prior: PriorConfig<R>,
}

impl<R: Real> Default for ModelSpec<R> {
    fn default() -> Self {
        ModelSpec {
            variant: Variant::M1,
            phi: R::lit(0.25),
            beta_rc: R::lit(0.1),
            data_model: DataModel::Poisson,
            offset: R::lit(0.001),
            initial_rate: R::lit(0.001),
            include_icar: true,
            m4_text_form: false,
            prior: PriorConfig::default(),
        }
    }
}

impl<R: Real> ModelSpec<R> {
    pub fn new(variant: Variant) -> Self {
        ModelSpec {
            variant,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: R| {
            if v >= R::zero() && v <= R::one() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("phi", self.phi)?;
        unit("beta_rc", self.beta_rc)?;
        if !(self.offset > R::zero()) || !self.offset.is_finite() {
            return Err(Error::InvalidSpec("offset must be positive".into()));
        }
        if !(self.initial_rate > R::zero()) || !self.initial_rate.is_finite() {
            return Err(Error::InvalidSpec("initial_rate must be positive".into()));
        }
        self.prior.validate()
    }

    /// Whether an ICAR-distributed vector is part of the model.
    pub fn has_icar(&self) -> bool {
        self.variant == Variant::M5 || self.include_icar
    }

    pub fn needs_graph(&self) -> bool {
        self.has_icar() || self.variant.uses_neighbor_sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(s).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}
