use serde::{Deserialize, Serialize};

use super::spec::{DataModel, ModelSpec, Variant};
use crate::error::{Error, Result};
use crate::real::Real;

/// All location and precision parameters of any variant.
///
/// Blocks a variant does not use are left empty (vectors) or at their
/// initial value (scalars) and are ignored by every consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "R: Real")]
pub struct ParamVector<R> {
    pub b0: R,
    pub b0_time: Vec<R>,
    pub b0_space: Vec<R>,
    pub b1: R,
    pub b2: R,
    pub b_spatial: Vec<R>,
    pub v_uncorr: Vec<R>,
    pub tau0: R,
    pub tau1: R,
    pub tau2: R,
    pub tau_b: R,
    pub tau_v: R,
    pub tau_y: R,
}

impl<R: Real> Default for ParamVector<R> {
    fn default() -> Self {
        ParamVector {
            b0: R::zero(),
            b0_time: Vec::new(),
            b0_space: Vec::new(),
            b1: R::zero(),
            b2: R::zero(),
            b_spatial: Vec::new(),
            v_uncorr: Vec::new(),
            tau0: R::one(),
            tau1: R::one(),
            tau2: R::one(),
            tau_b: R::one(),
            tau_v: R::one(),
            tau_y: R::one(),
        }
    }
}

/// Parameter blocks as updated by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamBlock {
    /// Intercept: `b0`, `b0_time` or `b0_space` depending on the variant.
    B0,
    B1,
    B2,
    BSpatial,
    VUncorr,
    Tau0,
    Tau1,
    Tau2,
    TauB,
    TauV,
    TauY,
}

/// Which blocks a given spec and panel shape actually carry, and how they
/// map to flat named columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub variant: Variant,
    pub m: usize,
    pub t: usize,
    pub spatial: bool,
    pub lognormal: bool,
}

impl ParamLayout {
    pub fn new<R: Real>(spec: &ModelSpec<R>, m: usize, t: usize) -> Self {
        ParamLayout {
            variant: spec.variant,
            m,
            t,
            spatial: spec.include_icar && spec.variant != Variant::M5,
            lognormal: spec.data_model == DataModel::LogNormal,
        }
    }

    pub fn has(&self, block: ParamBlock) -> bool {
        use ParamBlock::*;
        let v = self.variant;
        match block {
            B0 | B1 | Tau1 => true,
            B2 | Tau2 => v.uses_covariate(),
            BSpatial => self.spatial,
            VUncorr | TauV => v == Variant::M5,
            Tau0 => v != Variant::M5,
            TauB => self.spatial || v == Variant::M5,
            TauY => self.lognormal,
        }
    }

    /// Column names in canonical order; vector entries are 1-based.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        let indexed = |out: &mut Vec<String>, base: &str, n: usize| {
            out.extend((1..=n).map(|k| format!("{base}[{k}]")));
        };
        match self.variant {
            Variant::M4 => indexed(&mut out, "b0_time", self.t),
            Variant::M5 => indexed(&mut out, "b0_space", self.m),
            _ => out.push("b0".into()),
        }
        out.push("b1".into());
        if self.has(ParamBlock::B2) {
            out.push("b2".into());
        }
        if self.has(ParamBlock::BSpatial) {
            indexed(&mut out, "b_spatial", self.m);
        }
        if self.has(ParamBlock::VUncorr) {
            indexed(&mut out, "v", self.m);
        }
        for (block, name) in [
            (ParamBlock::Tau0, "tau0"),
            (ParamBlock::Tau1, "tau1"),
            (ParamBlock::Tau2, "tau2"),
            (ParamBlock::TauB, "tau_b"),
            (ParamBlock::TauV, "tau_v"),
            (ParamBlock::TauY, "tau_y"),
        ] {
            if self.has(block) {
                out.push(name.into());
            }
        }
        out
    }

    pub fn flatten<R: Real>(&self, p: &ParamVector<R>) -> Vec<R> {
        let mut out = Vec::with_capacity(self.m * 3 + self.t + 8);
        match self.variant {
            Variant::M4 => out.extend_from_slice(&p.b0_time),
            Variant::M5 => out.extend_from_slice(&p.b0_space),
            _ => out.push(p.b0),
        }
        out.push(p.b1);
        if self.has(ParamBlock::B2) {
            out.push(p.b2);
        }
        if self.has(ParamBlock::BSpatial) {
            out.extend_from_slice(&p.b_spatial);
        }
        if self.has(ParamBlock::VUncorr) {
            out.extend_from_slice(&p.v_uncorr);
        }
        for (block, v) in [
            (ParamBlock::Tau0, p.tau0),
            (ParamBlock::Tau1, p.tau1),
            (ParamBlock::Tau2, p.tau2),
            (ParamBlock::TauB, p.tau_b),
            (ParamBlock::TauV, p.tau_v),
            (ParamBlock::TauY, p.tau_y),
        ] {
            if self.has(block) {
                out.push(v);
            }
        }
        out
    }

    pub fn unflatten<R: Real>(&self, values: &[R]) -> Result<ParamVector<R>> {
        let expected = self.names().len();
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} parameter values, got {}",
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        let mut take = |n: usize| -> Vec<R> { it.by_ref().take(n).collect() };
        let mut p = ParamVector::default();
        match self.variant {
            Variant::M4 => p.b0_time = take(self.t),
            Variant::M5 => p.b0_space = take(self.m),
            _ => p.b0 = take(1)[0],
        }
        p.b1 = take(1)[0];
        if self.has(ParamBlock::B2) {
            p.b2 = take(1)[0];
        }
        if self.has(ParamBlock::BSpatial) {
            p.b_spatial = take(self.m);
        }
        if self.has(ParamBlock::VUncorr) {
            p.v_uncorr = take(self.m);
        }
        for (block, slot) in [
            (ParamBlock::Tau0, &mut p.tau0),
            (ParamBlock::Tau1, &mut p.tau1),
            (ParamBlock::Tau2, &mut p.tau2),
            (ParamBlock::TauB, &mut p.tau_b),
            (ParamBlock::TauV, &mut p.tau_v),
            (ParamBlock::TauY, &mut p.tau_y),
        ] {
            if self.has(block) {
                *slot = take(1)[0];
            }
        }
        Ok(p)
    }
}

/// Absolute tolerance for the zero-sum constraint on ICAR vectors.
pub fn zero_sum_tolerance<R: Real>(m: usize) -> R {
    let floor = R::lit(1e-9);
    let scaled = R::epsilon() * R::lit(64.0) * R::from_usize(m.max(1)).unwrap();
    floor.max(scaled)
}

impl<R: Real> ParamVector<R> {
    /// Checks vector lengths, positivity of precisions and the zero-sum
    /// constraint for every block the layout carries.
    pub fn validate(&self, layout: &ParamLayout) -> Result<()> {
        let len = |name: &str, v: &[R], n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} has length {}, expected {n}", v.len())))
            }
        };
        let zero_sum = |name: &str, v: &[R]| {
            let s: R = v.iter().copied().sum();
            if s.abs() <= zero_sum_tolerance(v.len()) {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} sums to {s}, not 0")))
            }
        };
        match layout.variant {
            Variant::M4 => len("b0_time", &self.b0_time, layout.t)?,
            Variant::M5 => {
                len("b0_space", &self.b0_space, layout.m)?;
                zero_sum("b0_space", &self.b0_space)?;
            }
            _ => {}
        }
        if layout.has(ParamBlock::BSpatial) {
            len("b_spatial", &self.b_spatial, layout.m)?;
            zero_sum("b_spatial", &self.b_spatial)?;
        }
        if layout.has(ParamBlock::VUncorr) {
            len("v", &self.v_uncorr, layout.m)?;
        }
        for (block, name, v) in [
            (ParamBlock::Tau0, "tau0", self.tau0),
            (ParamBlock::Tau1, "tau1", self.tau1),
            (ParamBlock::Tau2, "tau2", self.tau2),
            (ParamBlock::TauB, "tau_b", self.tau_b),
            (ParamBlock::TauV, "tau_v", self.tau_v),
            (ParamBlock::TauY, "tau_y", self.tau_y),
        ] {
            if layout.has(block) && !(v > R::zero() && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        let finite = self.flat_locations().all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("location parameter".into()));
        }
        Ok(())
    }

    fn flat_locations(&self) -> impl Iterator<Item = R> + '_ {
        [self.b0, self.b1, self.b2]
            .into_iter()
            .chain(self.b0_time.iter().copied())
            .chain(self.b0_space.iter().copied())
            .chain(self.b_spatial.iter().copied())
            .chain(self.v_uncorr.iter().copied())
    }
}
