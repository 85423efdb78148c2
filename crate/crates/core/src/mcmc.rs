//! Metropolis-within-Gibbs sampler for every model variant.
//!
//! Location parameters are updated one scalar at a time with adaptive
//! Gaussian random-walk proposals; precisions are drawn from their
//! conjugate gamma conditionals. Susceptibles are a function of the data
//! only, so the engine caches `log mu` and each scalar move re-evaluates
//! just the cells it touches.
//!
//! Two proposals carry a deterministic companion shift so they stay cheap
//! and well-conditioned:
//!
//! * a spatial effect `b_i + d` is paired with `b_k - d/m` for every `k`
//!   (keeping the sum at zero) and, when the intercept is free, with an
//!   intercept shift of `+d/m`, so only row `i` of the likelihood moves;
//! * a slope step `b1 + d` (or `b2 + d`) is paired with an intercept shift
//!   of `-d * c`, where `c` is a fixed count-weighted centre of the
//!   regressor. This removes most of the intercept/slope correlation.
//!
//! Both companions are linear and volume preserving, so the proposals stay
//! symmetric and the usual Metropolis ratio applies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AdjacencyGraph, PanelData};
use crate::matrix::Matrix;
use crate::model::{
    gaussian_logpdf, icar_quadratic_form, log_prior, normal_deviance_cell, poisson_deviance_cell,
    DataModel, Design, ModelSpec, ParamBlock, ParamLayout, ParamVector, Variant,
};
use crate::real::Real;

pub type ChainRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "R: Real")]
pub struct SamplerConfig<R> {
    /// Total sweeps, burn-in included.
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Sweeps between proposal-scale adaptations during burn-in.
    pub adapt_window: usize,
    pub target_accept: R,
    pub init_scale: R,
    /// Store the mean surface every this many retained draws; 0 disables.
    pub mu_snapshot_every: usize,
    /// Blocks held at their initial values.
    pub fixed: Vec<ParamBlock>,
}

impl<R: Real> Default for SamplerConfig<R> {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 60_000,
            burn_in: 20_000,
            thin: 10,
            seed: 1,
            adapt_window: 50,
            target_accept: R::lit(0.44),
            init_scale: R::lit(0.1),
            mu_snapshot_every: 10,
            fixed: Vec::new(),
        }
    }
}

impl<R: Real> SamplerConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be below n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.adapt_window < 10 {
            return Err(Error::InvalidConfig("adapt_window must be at least 10".into()));
        }
        if !(self.target_accept > R::zero() && self.target_accept < R::one()) {
            return Err(Error::InvalidConfig("target_accept must lie in (0, 1)".into()));
        }
        if !(self.init_scale > R::zero()) || !self.init_scale.is_finite() {
            return Err(Error::InvalidConfig("init_scale must be positive".into()));
        }
        Ok(())
    }

    /// Number of draws a run with this configuration retains.
    pub fn retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    fn is_free(&self, block: ParamBlock) -> bool {
        !self.fixed.contains(&block)
    }
}

/// Mean surface captured alongside retained draw `draw`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuSnapshot<R> {
    pub draw: usize,
    pub mu: Matrix<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace<R> {
    pub layout: ParamLayout,
    pub draws: Vec<ParamVector<R>>,
    pub deviances: Vec<R>,
    pub mu_snapshots: Vec<MuSnapshot<R>>,
    /// Post-burn-in acceptance rate of each Metropolis-updated block.
    pub accept_rates: Vec<(ParamBlock, R)>,
}

impl<R: Real> ChainTrace<R> {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Trace of one named column (see [`ParamLayout::names`]).
    pub fn column(&self, name: &str) -> Option<Vec<R>> {
        let k = self.layout.names().iter().position(|n| n == name)?;
        Some(self.draws.iter().map(|d| self.layout.flatten(d)[k]).collect())
    }

    /// Concatenates chains that share a layout.
    pub fn merge(chains: &[ChainTrace<R>]) -> Result<ChainTrace<R>> {
        let first = chains
            .first()
            .ok_or_else(|| Error::InvalidConfig("no chains to merge".into()))?;
        if chains.iter().any(|c| c.layout != first.layout) {
            return Err(Error::Dimension("chains have different layouts".into()));
        }
        let mut out = ChainTrace {
            layout: first.layout,
            draws: Vec::new(),
            deviances: Vec::new(),
            mu_snapshots: Vec::new(),
            accept_rates: first.accept_rates.clone(),
        };
        for c in chains {
            let base = out.draws.len();
            out.draws.extend(c.draws.iter().cloned());
            out.deviances.extend(c.deviances.iter().copied());
            out.mu_snapshots.extend(c.mu_snapshots.iter().map(|s| MuSnapshot {
                draw: s.draw + base,
                mu: s.mu.clone(),
            }));
        }
        let n = R::from_usize(chains.len()).unwrap();
        for (k, (_, rate)) in out.accept_rates.iter_mut().enumerate() {
            *rate = chains.iter().map(|c| c.accept_rates[k].1).sum::<R>() / n;
        }
        Ok(out)
    }
}

/// Conjugate gamma update for a precision:
/// `Gamma(shape + rank/2, rate + quadratic_form/2)`.
pub fn gibbs_precision<R: Real, G: rand::Rng + ?Sized>(
    prior_shape: R,
    prior_rate: R,
    quadratic_form: R,
    rank: usize,
    rng: &mut G,
) -> R {
    let half = R::lit(0.5);
    let shape = prior_shape + R::from_usize(rank).unwrap() * half;
    let rate = prior_rate + quadratic_form * half;
    R::sample_gamma(shape, rate, rng)
}

/// Starting values: intercepts at -9 (so `exp(b0) * S` is of order one for
/// county-sized populations), other locations 0, precisions 1.
///
/// M5 has no scalar intercept; its unstructured effects start at -9
/// instead, since they carry the overall level.
pub fn initialize<R: Real>(spec: &ModelSpec<R>, m: usize, t: usize) -> ParamVector<R> {
    let level = R::lit(-9.0);
    let layout = ParamLayout::new(spec, m, t);
    let mut p = ParamVector {
        b0: level,
        ..Default::default()
    };
    match spec.variant {
        Variant::M4 => p.b0_time = vec![level; t],
        Variant::M5 => {
            p.b0_space = vec![R::zero(); m];
            p.v_uncorr = vec![level; m];
        }
        _ => {}
    }
    if layout.has(ParamBlock::BSpatial) {
        p.b_spatial = vec![R::zero(); m];
    }
    p
}

pub fn run_chain<R: Real>(
    panel: &PanelData<R>,
    spec: &ModelSpec<R>,
    graph: Option<&AdjacencyGraph>,
    config: &SamplerConfig<R>,
) -> Result<ChainTrace<R>> {
    let init = initialize(spec, panel.m(), panel.t());
    run_chain_from(panel, spec, graph, config, init)
}

/// As [`run_chain`] with explicit starting values; fixed blocks stay at
/// these values for the whole run.
pub fn run_chain_from<R: Real>(
    panel: &PanelData<R>,
    spec: &ModelSpec<R>,
    graph: Option<&AdjacencyGraph>,
    config: &SamplerConfig<R>,
    init: ParamVector<R>,
) -> Result<ChainTrace<R>> {
    config.validate()?;
    let design = Design::new(panel, spec, graph)?;
    let mut sampler = Sampler::new(design, panel, graph, config, init)?;
    sampler.run()
}

#[derive(Debug, Clone, Copy)]
struct Tuner<R> {
    scale: R,
    window_accepted: usize,
    window_tried: usize,
    accepted: usize,
    tried: usize,
}

impl<R: Real> Tuner<R> {
    fn new(scale: R) -> Self {
        Tuner {
            scale,
            window_accepted: 0,
            window_tried: 0,
            accepted: 0,
            tried: 0,
        }
    }

    fn record(&mut self, accepted: bool, burning: bool) {
        if burning {
            self.window_tried += 1;
            self.window_accepted += usize::from(accepted);
        } else {
            self.tried += 1;
            self.accepted += usize::from(accepted);
        }
    }

    fn adapt(&mut self, target: R) {
        if self.window_tried > 0 {
            let rate = R::from_usize(self.window_accepted).unwrap()
                / R::from_usize(self.window_tried).unwrap();
            let step = R::lit(0.05);
            if rate > target {
                self.scale = self.scale * step.exp();
            } else if rate < target {
                self.scale = self.scale * (-step).exp();
            }
        }
        self.window_accepted = 0;
        self.window_tried = 0;
    }
}

/// How the level (intercept) block absorbs companion shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LevelKind {
    Scalar,
    PerDay,
    /// M5: the unstructured effects play the role of the level.
    PerRegion,
    None,
}

struct Sampler<'a, R: Real> {
    design: Design<R>,
    graph: Option<&'a AdjacencyGraph>,
    config: &'a SamplerConfig<R>,
    counts: Matrix<u64>,
    /// Poisson: counts; log-normal: `log(smoothed + offset)`.
    y: Matrix<R>,
    log_mu: Matrix<R>,
    scratch: Vec<R>,
    params: ParamVector<R>,
    level: LevelKind,
    /// Regressor centres for the slope companions; indexed per the level
    /// kind (length 1, t or m).
    b1_centre: Vec<R>,
    b2_centre: R,
    tuners_level: Vec<Tuner<R>>,
    tuner_b1: Tuner<R>,
    tuner_b2: Tuner<R>,
    tuners_spatial: Vec<Tuner<R>>,
    tuners_v: Vec<Tuner<R>>,
    rng: ChainRng,
}

impl<'a, R: Real> Sampler<'a, R> {
    fn new(
        design: Design<R>,
        panel: &PanelData<R>,
        graph: Option<&'a AdjacencyGraph>,
        config: &'a SamplerConfig<R>,
        init: ParamVector<R>,
    ) -> Result<Self> {
        let layout = design.layout;
        init.validate(&layout)?;
        let (m, t) = (design.m(), design.t());
        let spec = &design.spec;
        let y = match spec.data_model {
            DataModel::Poisson => design.cases.clone(),
            DataModel::LogNormal => design.cases.map(|&v| (v + spec.offset).ln()),
        };
        let log_mu = design.log_mu(&init)?;

        let level_free = config.is_free(ParamBlock::B0);
        let level = match spec.variant {
            Variant::M1 | Variant::M2 | Variant::M3 if level_free => LevelKind::Scalar,
            Variant::M4 if level_free => LevelKind::PerDay,
            Variant::M5 if config.is_free(ParamBlock::VUncorr) => LevelKind::PerRegion,
            _ => LevelKind::None,
        };

        // count weights for Poisson (Fisher-information proxy), flat for
        // the Gaussian model
        let weight = |i: usize, j: usize| match spec.data_model {
            DataModel::Poisson => design.cases[(i, j)],
            DataModel::LogNormal => R::one(),
        };
        let weighted_mean = |cells: &mut dyn Iterator<Item = (usize, usize)>,
                             value: &dyn Fn(usize, usize) -> R| {
            let (mut num, mut den) = (R::zero(), R::zero());
            for (i, j) in cells {
                num = num + weight(i, j) * value(i, j);
                den = den + weight(i, j);
            }
            if den > R::zero() {
                num / den
            } else {
                R::zero()
            }
        };
        let trans = |i: usize, j: usize| design.transmission[(i, j)];
        let b1_centre = match level {
            LevelKind::Scalar => {
                vec![weighted_mean(&mut (0..m).flat_map(|i| (1..t).map(move |j| (i, j))), &trans)]
            }
            LevelKind::PerDay => std::iter::once(R::zero())
                .chain((1..t).map(|j| weighted_mean(&mut (0..m).map(|i| (i, j)), &trans)))
                .collect(),
            LevelKind::PerRegion => (0..m)
                .map(|i| weighted_mean(&mut (1..t).map(|j| (i, j)), &trans))
                .collect(),
            LevelKind::None => Vec::new(),
        };
        let b2_centre = if level == LevelKind::None {
            R::zero()
        } else {
            let pov = |i: usize, _j: usize| design.poverty[i];
            weighted_mean(&mut (0..m).flat_map(|i| (1..t).map(move |j| (i, j))), &pov)
        };

        let level_len = match spec.variant {
            Variant::M4 => t,
            Variant::M5 => m,
            _ => 1,
        };
        let s = config.init_scale;
        let sampler = Sampler {
            graph,
            config,
            counts: panel.sym.clone(),
            y,
            log_mu,
            scratch: Vec::with_capacity(m * t),
            params: init,
            level,
            b1_centre,
            b2_centre,
            tuners_level: vec![Tuner::new(s); level_len],
            tuner_b1: Tuner::new(s),
            tuner_b2: Tuner::new(s),
            tuners_spatial: vec![Tuner::new(s); m],
            tuners_v: vec![Tuner::new(s); m],
            rng: ChainRng::seed_from_u64(config.seed),
            design,
        };
        let lp = sampler.log_likelihood()
            + log_prior(&sampler.params, &sampler.design.spec, &layout, graph)?;
        if !lp.is_finite() {
            return Err(Error::NonFinite(
                "log posterior at the starting values; check data offsets and initial values".into(),
            ));
        }
        Ok(sampler)
    }

    fn spec(&self) -> &ModelSpec<R> {
        &self.design.spec
    }

    fn m(&self) -> usize {
        self.design.m()
    }

    fn t(&self) -> usize {
        self.design.t()
    }

    fn cell_ll(&self, i: usize, j: usize, lm: R) -> R {
        let y = self.y[(i, j)];
        match self.spec().data_model {
            DataModel::Poisson => y * lm - lm.exp(),
            DataModel::LogNormal => {
                let r = y - lm;
                -R::lit(0.5) * self.params.tau_y * r * r
            }
        }
    }

    /// Log-likelihood of the parameter-dependent cells, up to constants.
    fn log_likelihood(&self) -> R {
        let mut total = R::zero();
        for i in 0..self.m() {
            for j in 1..self.t() {
                total = total + self.cell_ll(i, j, self.log_mu[(i, j)]);
            }
        }
        total
    }

    fn deviance(&self) -> R {
        let spec = self.spec();
        let mut total = R::zero();
        for i in 0..self.m() {
            for j in 0..self.t() {
                let lm = self.log_mu[(i, j)];
                total = total
                    + match spec.data_model {
                        DataModel::Poisson => {
                            poisson_deviance_cell(self.counts[(i, j)], lm.exp(), spec.offset)
                        }
                        DataModel::LogNormal => {
                            normal_deviance_cell(self.y[(i, j)], lm, self.params.tau_y)
                        }
                    };
            }
        }
        total
    }

    /// Metropolis step on an additive shift of `log mu` over `rows × days
    /// 1..t`. Returns whether the move was accepted; on acceptance the
    /// cache is updated and the caller applies the parameter change.
    fn metropolis(
        &mut self,
        rows: &[usize],
        shift: &dyn Fn(usize, usize) -> R,
        prior_delta: R,
    ) -> bool {
        let t = self.t();
        let mut delta = prior_delta;
        self.scratch.clear();
        for &i in rows {
            for j in 1..t {
                let old = self.log_mu[(i, j)];
                let new = old + shift(i, j);
                delta = delta + self.cell_ll(i, j, new) - self.cell_ll(i, j, old);
                self.scratch.push(new);
            }
        }
        if !delta.is_finite() {
            return false;
        }
        let accept = delta >= R::zero() || R::sample_unit(&mut self.rng).ln() < delta;
        if accept {
            let mut k = 0;
            for &i in rows {
                for j in 1..t {
                    self.log_mu[(i, j)] = self.scratch[k];
                    k += 1;
                }
            }
        }
        accept
    }

    fn step(&mut self, scale: R) -> R {
        scale * R::sample_standard_normal(&mut self.rng)
    }

    fn all_rows(&self) -> Vec<usize> {
        (0..self.m()).collect()
    }

    /// Prior change from shifting the level by `shift_of(k)` on entry `k`.
    fn level_prior_delta(&self, shift_of: &dyn Fn(usize) -> R) -> R {
        let p = &self.params;
        match self.level {
            LevelKind::Scalar => gaussian_logpdf(p.b0 + shift_of(0), p.tau0) - gaussian_logpdf(p.b0, p.tau0),
            LevelKind::PerDay => p
                .b0_time
                .iter()
                .enumerate()
                .map(|(k, &b)| gaussian_logpdf(b + shift_of(k), p.tau0) - gaussian_logpdf(b, p.tau0))
                .sum(),
            LevelKind::PerRegion => p
                .v_uncorr
                .iter()
                .enumerate()
                .map(|(k, &v)| gaussian_logpdf(v + shift_of(k), p.tau_v) - gaussian_logpdf(v, p.tau_v))
                .sum(),
            LevelKind::None => R::zero(),
        }
    }

    fn apply_level_shift(&mut self, shift_of: &dyn Fn(usize) -> R) {
        let p = &mut self.params;
        match self.level {
            LevelKind::Scalar => p.b0 = p.b0 + shift_of(0),
            LevelKind::PerDay => p.b0_time.iter_mut().enumerate().for_each(|(k, b)| *b = *b + shift_of(k)),
            LevelKind::PerRegion => p.v_uncorr.iter_mut().enumerate().for_each(|(k, v)| *v = *v + shift_of(k)),
            LevelKind::None => {}
        }
    }

    fn update_level(&mut self, burning: bool) {
        let (m, t) = (self.m(), self.t());
        match self.spec().variant {
            Variant::M1 | Variant::M2 | Variant::M3 => {
                let d = self.step(self.tuners_level[0].scale);
                let p = &self.params;
                let prior = gaussian_logpdf(p.b0 + d, p.tau0) - gaussian_logpdf(p.b0, p.tau0);
                let rows = self.all_rows();
                let ok = self.metropolis(&rows, &|_, _| d, prior);
                if ok {
                    self.params.b0 = self.params.b0 + d;
                }
                self.tuners_level[0].record(ok, burning);
            }
            Variant::M4 => {
                let rows = self.all_rows();
                for j in 0..t {
                    let d = self.step(self.tuners_level[j].scale);
                    let p = &self.params;
                    let b = p.b0_time[j];
                    let prior = gaussian_logpdf(b + d, p.tau0) - gaussian_logpdf(b, p.tau0);
                    let ok = if j == 0 {
                        prior >= R::zero() || R::sample_unit(&mut self.rng).ln() < prior
                    } else {
                        self.metropolis(&rows, &|_, jj| if jj == j { d } else { R::zero() }, prior)
                    };
                    if ok {
                        self.params.b0_time[j] = b + d;
                    }
                    self.tuners_level[j].record(ok, burning);
                }
            }
            Variant::M5 => {
                if m < 2 {
                    return;
                }
                for i in 0..m {
                    let d = self.step(self.tuners_level[i].scale);
                    let ok = self.zero_sum_move(i, d, true);
                    self.tuners_level[i].record(ok, burning);
                }
            }
        }
    }

    /// Moves entry `i` of an ICAR vector by `d` relative to the others while
    /// keeping the sum at zero. `intercept_field` selects `b0_space` (M5)
    /// rather than `b_spatial`.
    fn zero_sum_move(&mut self, i: usize, d: R, intercept_field: bool) -> bool {
        let m = self.m();
        let mr = R::from_usize(m).unwrap();
        let graph = self.graph.expect("ICAR blocks imply a graph");
        let field = if intercept_field {
            &self.params.b0_space
        } else {
            &self.params.b_spatial
        };
        let tau_b = self.params.tau_b;
        let icar_delta = graph
            .neighbors(i)
            .iter()
            .map(|&l| {
                let diff = field[i] - field[l];
                (diff + d) * (diff + d) - diff * diff
            })
            .sum::<R>()
            * (-tau_b / R::lit(2.0));

        // M5's level lives in v, which is exactly what b0_space trades
        // against, so the companion shift is available whenever v is free.
        let compensate = self.level != LevelKind::None;
        let comp = d / mr;
        let (rows, prior): (Vec<usize>, R) = if compensate {
            (vec![i], icar_delta + self.level_prior_delta(&|_| comp))
        } else {
            (self.all_rows(), icar_delta)
        };
        let shift = |r: usize, _j: usize| {
            if compensate {
                if r == i {
                    d
                } else {
                    R::zero()
                }
            } else if r == i {
                d - comp
            } else {
                -comp
            }
        };
        let ok = self.metropolis(&rows, &shift, prior);
        if ok {
            let field = if intercept_field {
                &mut self.params.b0_space
            } else {
                &mut self.params.b_spatial
            };
            field.iter_mut().for_each(|b| *b = *b - comp);
            field[i] = field[i] + d;
            if compensate {
                self.apply_level_shift(&|_| comp);
            }
        }
        ok
    }

    fn update_b1(&mut self, burning: bool) {
        let d = self.step(self.tuner_b1.scale);
        let p = &self.params;
        let centre = self.b1_centre.clone();
        let level = self.level;
        let centre_at = |i: usize, j: usize| match level {
            LevelKind::Scalar => centre[0],
            LevelKind::PerDay => centre[j],
            LevelKind::PerRegion => centre[i],
            LevelKind::None => R::zero(),
        };
        let prior = gaussian_logpdf(p.b1 + d, p.tau1) - gaussian_logpdf(p.b1, p.tau1)
            + self.level_prior_delta(&|k| -d * centre.get(k).copied().unwrap_or(R::zero()));
        let trans = self.design.transmission.clone();
        let rows = self.all_rows();
        let ok = self.metropolis(&rows, &|i, j| d * (trans[(i, j)] - centre_at(i, j)), prior);
        if ok {
            self.params.b1 = self.params.b1 + d;
            self.apply_level_shift(&|k| -d * centre.get(k).copied().unwrap_or(R::zero()));
        }
        self.tuner_b1.record(ok, burning);
    }

    fn update_b2(&mut self, burning: bool) {
        let d = self.step(self.tuner_b2.scale);
        let p = &self.params;
        let c = self.b2_centre;
        let prior = gaussian_logpdf(p.b2 + d, p.tau2) - gaussian_logpdf(p.b2, p.tau2)
            + self.level_prior_delta(&|_| -d * c);
        let pov = self.design.poverty.clone();
        let rows = self.all_rows();
        let ok = self.metropolis(&rows, &|i, _| d * (pov[i] - c), prior);
        if ok {
            self.params.b2 = self.params.b2 + d;
            self.apply_level_shift(&|_| -d * c);
        }
        self.tuner_b2.record(ok, burning);
    }

    fn update_spatial(&mut self, burning: bool) {
        if self.m() < 2 {
            return;
        }
        for i in 0..self.m() {
            let d = self.step(self.tuners_spatial[i].scale);
            let ok = self.zero_sum_move(i, d, false);
            self.tuners_spatial[i].record(ok, burning);
        }
    }

    fn update_v(&mut self, burning: bool) {
        for i in 0..self.m() {
            let d = self.step(self.tuners_v[i].scale);
            let v = self.params.v_uncorr[i];
            let tau = self.params.tau_v;
            let prior = gaussian_logpdf(v + d, tau) - gaussian_logpdf(v, tau);
            let ok = self.metropolis(&[i], &|_, _| d, prior);
            if ok {
                self.params.v_uncorr[i] = v + d;
            }
            self.tuners_v[i].record(ok, burning);
        }
    }

    /// Removes floating-point drift from the zero-sum vectors and rebuilds
    /// the mean cache from scratch.
    fn recentre_and_refresh(&mut self) -> Result<()> {
        let mean = |v: &[R]| {
            if v.is_empty() {
                R::zero()
            } else {
                v.iter().copied().sum::<R>() / R::from_usize(v.len()).unwrap()
            }
        };
        let layout = self.design.layout;
        if layout.has(ParamBlock::BSpatial) {
            let c = mean(&self.params.b_spatial);
            self.params.b_spatial.iter_mut().for_each(|b| *b = *b - c);
            self.apply_level_shift(&|_| c);
        }
        if self.spec().variant == Variant::M5 {
            let c = mean(&self.params.b0_space);
            self.params.b0_space.iter_mut().for_each(|b| *b = *b - c);
            self.apply_level_shift(&|_| c);
        }
        self.log_mu = self.design.log_mu(&self.params)?;
        Ok(())
    }

    fn update_precisions(&mut self) {
        let layout = self.design.layout;
        let pc = self.spec().prior;
        let (fe_a, fe_b) = (pc.fixed_effect_prec_shape, pc.fixed_effect_prec_rate);
        let sq = |v: &[R]| v.iter().map(|&x| x * x).sum::<R>();
        let free = |b: ParamBlock| layout.has(b) && self.config.is_free(b);

        if free(ParamBlock::Tau0) {
            let (qf, rank) = match self.spec().variant {
                Variant::M4 => (sq(&self.params.b0_time), self.t()),
                _ => (self.params.b0 * self.params.b0, 1),
            };
            self.params.tau0 = gibbs_precision(fe_a, fe_b, qf, rank, &mut self.rng);
        }
        if free(ParamBlock::Tau1) {
            let qf = self.params.b1 * self.params.b1;
            self.params.tau1 = gibbs_precision(fe_a, fe_b, qf, 1, &mut self.rng);
        }
        if free(ParamBlock::Tau2) {
            let qf = self.params.b2 * self.params.b2;
            self.params.tau2 = gibbs_precision(fe_a, fe_b, qf, 1, &mut self.rng);
        }
        if free(ParamBlock::TauV) {
            let qf = sq(&self.params.v_uncorr);
            self.params.tau_v = gibbs_precision(fe_a, fe_b, qf, self.m(), &mut self.rng);
        }
        if free(ParamBlock::TauY) {
            let qf = self
                .y
                .as_slice()
                .iter()
                .zip(self.log_mu.as_slice())
                .map(|(&y, &lm)| (y - lm) * (y - lm))
                .sum();
            let rank = self.m() * self.t();
            self.params.tau_y = gibbs_precision(
                pc.lognormal_obs_prec_shape,
                pc.lognormal_obs_prec_rate,
                qf,
                rank,
                &mut self.rng,
            );
        }
        if free(ParamBlock::TauB) {
            let graph = self.graph.expect("ICAR blocks imply a graph");
            let field = if self.spec().variant == Variant::M5 {
                &self.params.b0_space
            } else {
                &self.params.b_spatial
            };
            let qf = icar_quadratic_form(field, graph);
            let rank = self.m() - 1;
            self.params.tau_b = if rank == 0 {
                R::sample_gamma(pc.icar_prec_shape, pc.icar_prec_rate, &mut self.rng)
            } else {
                gibbs_precision(pc.icar_prec_shape, pc.icar_prec_rate, qf, rank, &mut self.rng)
            };
        }
    }

    fn sweep(&mut self, burning: bool) -> Result<()> {
        let layout = self.design.layout;
        let free = |b: ParamBlock| layout.has(b) && self.config.is_free(b);
        if free(ParamBlock::B0) {
            self.update_level(burning);
        }
        if free(ParamBlock::B1) {
            self.update_b1(burning);
        }
        if free(ParamBlock::B2) {
            self.update_b2(burning);
        }
        if free(ParamBlock::BSpatial) {
            self.update_spatial(burning);
        }
        if free(ParamBlock::VUncorr) {
            self.update_v(burning);
        }
        self.recentre_and_refresh()?;
        self.update_precisions();
        Ok(())
    }

    fn adapt(&mut self) {
        let target = self.config.target_accept;
        self.tuners_level
            .iter_mut()
            .chain(std::iter::once(&mut self.tuner_b1))
            .chain(std::iter::once(&mut self.tuner_b2))
            .chain(self.tuners_spatial.iter_mut())
            .chain(self.tuners_v.iter_mut())
            .for_each(|t| t.adapt(target));
    }

    fn accept_rates(&self) -> Vec<(ParamBlock, R)> {
        let layout = self.design.layout;
        let rate = |ts: &[Tuner<R>]| {
            let tried: usize = ts.iter().map(|t| t.tried).sum();
            let acc: usize = ts.iter().map(|t| t.accepted).sum();
            if tried == 0 {
                None
            } else {
                Some(R::from_usize(acc).unwrap() / R::from_usize(tried).unwrap())
            }
        };
        let mut out = Vec::new();
        for (block, ts) in [
            (ParamBlock::B0, &self.tuners_level[..]),
            (ParamBlock::B1, std::slice::from_ref(&self.tuner_b1)),
            (ParamBlock::B2, std::slice::from_ref(&self.tuner_b2)),
            (ParamBlock::BSpatial, &self.tuners_spatial[..]),
            (ParamBlock::VUncorr, &self.tuners_v[..]),
        ] {
            if layout.has(block) {
                if let Some(r) = rate(ts) {
                    out.push((block, r));
                }
            }
        }
        out
    }

    fn run(&mut self) -> Result<ChainTrace<R>> {
        let cfg = self.config;
        let mut trace = ChainTrace {
            layout: self.design.layout,
            draws: Vec::with_capacity(cfg.retained()),
            deviances: Vec::with_capacity(cfg.retained()),
            mu_snapshots: Vec::new(),
            accept_rates: Vec::new(),
        };
        for k in 0..cfg.n_iter {
            let burning = k < cfg.burn_in;
            self.sweep(burning)?;
            if burning && (k + 1) % cfg.adapt_window == 0 {
                self.adapt();
            }
            if !burning && (k - cfg.burn_in) % cfg.thin == cfg.thin - 1 {
                let dev = self.deviance();
                if !dev.is_finite() {
                    return Err(Error::NonFinite(format!("deviance at sweep {}", k + 1)));
                }
                let idx = trace.draws.len();
                if cfg.mu_snapshot_every > 0 && idx % cfg.mu_snapshot_every == 0 {
                    trace.mu_snapshots.push(MuSnapshot {
                        draw: idx,
                        mu: self.log_mu.map(|v| v.exp()),
                    });
                }
                trace.draws.push(self.params.clone());
                trace.deviances.push(dev);
            }
        }
        trace.accept_rates = self.accept_rates();
        Ok(trace)
    }
}
