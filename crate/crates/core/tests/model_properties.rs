use chrono::NaiveDate;
use proptest::prelude::*;
use stsir::ingest::{AdjacencyGraph, PanelData};
use stsir::model::{
    accounting_forward, gamma_logpdf, gaussian_logpdf, icar_logpdf, log_mean, log_prior,
    poisson_deviance_cell, CellInputs, ModelSpec, ParamLayout, ParamVector, Variant,
};
use stsir::Matrix;

fn panel_strategy() -> impl Strategy<Value = PanelData<f64>> {
    (1usize..=4, 2usize..=8).prop_flat_map(|(m, t)| {
        (
            proptest::collection::vec(0u64..60, m * t),
            proptest::collection::vec(0u64..4, m * t),
            proptest::collection::vec(2_000.0f64..50_000.0, m),
        )
            .prop_map(move |(sym, deaths, sus)| {
                PanelData::new(
                    (0..m).map(|i| format!("R{i}")).collect(),
                    NaiveDate::from_ymd_opt(2020, 4, 2).unwrap().iter_days().take(t).collect(),
                    Matrix::from_vec(m, t, sym).unwrap(),
                    Matrix::from_vec(m, t, deaths).unwrap(),
                    sus,
                    vec![0.0; m],
                )
                .unwrap()
            })
    })
}

fn variant_strategy() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

/// Zero-sum vector of length `m`.
fn centred(v: Vec<f64>) -> Vec<f64> {
    let c = v.iter().sum::<f64>() / v.len() as f64;
    v.into_iter().map(|x| x - c).collect()
}

fn params_for(spec: &ModelSpec<f64>, m: usize, t: usize, seedvals: &[f64]) -> ParamVector<f64> {
    let pick = |k: usize| seedvals[k % seedvals.len()];
    let layout = ParamLayout::new(spec, m, t);
    let mut p = ParamVector {
        b0: -7.0 + pick(0),
        b1: 0.4 + pick(1).abs(),
        b2: pick(2),
        tau0: 1.0 + pick(3).abs(),
        tau1: 1.0 + pick(4).abs(),
        tau2: 1.0 + pick(5).abs(),
        tau_b: 1.0 + pick(6).abs(),
        tau_v: 1.0 + pick(7).abs(),
        tau_y: 1.0 + pick(8).abs(),
        ..Default::default()
    };
    if layout.has(stsir::model::ParamBlock::BSpatial) {
        p.b_spatial = centred((0..m).map(|i| pick(9 + i)).collect());
    }
    match spec.variant {
        Variant::M4 => p.b0_time = (0..t).map(|j| -7.0 + pick(3 + j)).collect(),
        Variant::M5 => {
            p.b0_space = centred((0..m).map(|i| pick(5 + i)).collect());
            p.v_uncorr = (0..m).map(|i| -7.0 + pick(2 + i)).collect();
        }
        _ => {}
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn accounting_conserves_mass(panel in panel_strategy(), phi in 0.0f64..1.0, beta in 0.0f64..1.0) {
        let mut spec = ModelSpec::new(Variant::M1);
        spec.phi = phi;
        spec.beta_rc = beta;
        let st = accounting_forward(&panel, &spec).unwrap();
        prop_assume!(!st.floored);
        for i in 0..panel.m() {
            let mut removed = 0.0;
            for j in 0..panel.t() - 1 {
                removed += panel.sym[(i, j)] as f64
                    + st.asym[(i, j)]
                    + st.removed_recov[(i, j)]
                    + panel.deaths[(i, j)] as f64;
            }
            let last = st.sus[(i, panel.t() - 1)];
            prop_assert!((removed + last - panel.sus_init[i]).abs() <= 1e-9 * panel.sus_init[i]);
        }
    }

    #[test]
    fn accounting_is_deterministic(panel in panel_strategy()) {
        let spec = ModelSpec::new(Variant::M3);
        prop_assert_eq!(accounting_forward(&panel, &spec).unwrap(), accounting_forward(&panel, &spec).unwrap());
    }

    #[test]
    fn log_mean_monotone(
        variant in variant_strategy(),
        vals in proptest::collection::vec(-1.0f64..1.0, 16),
        sus in 10.0f64..1e5,
        bump in 1.0f64..1e3,
        sym in 0.0f64..500.0,
        extra in 0.5f64..50.0,
        nb in 0.0f64..500.0,
    ) {
        let spec = ModelSpec::new(variant);
        let p = params_for(&spec, 3, 5, &vals);
        prop_assert!(p.b1 > 0.0);
        let cell = |sus: f64, sym: f64| CellInputs {
            region: 1,
            day: 2,
            sym_prev: sym,
            asym_prev: spec.phi * sym,
            neighbor_ty_prev: nb,
            poverty: 0.3,
            sus,
        };
        let base = log_mean(&cell(sus, sym), &p, &spec).unwrap();
        prop_assert!(log_mean(&cell(sus + bump, sym), &p, &spec).unwrap() > base);
        prop_assert!(log_mean(&cell(sus, sym + extra), &p, &spec).unwrap() >= base);
    }

    #[test]
    fn poisson_cell_minimised_at_observation(y in 1u64..40) {
        let at = poisson_deviance_cell(y, y as f64, 0.0);
        for k in 1..400 {
            let mu = k as f64 * 0.25;
            prop_assert!(poisson_deviance_cell(y, mu, 0.0) >= at - 1e-12);
        }
    }

    #[test]
    fn icar_relabelling_invariant(
        m in 2usize..9,
        extra in proptest::collection::vec((0usize..9, 0usize..9), 0..6),
        raw in proptest::collection::vec(-2.0f64..2.0, 9),
        tau in 0.05f64..20.0,
        perm in Just((0..9).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let mut edges: Vec<(usize, usize)> = (1..m).map(|i| (i - 1, i)).collect();
        edges.extend(extra.into_iter().filter(|&(a, b)| a < m && b < m && a != b));
        let g = AdjacencyGraph::from_edges(m, &edges).unwrap();
        let perm: Vec<usize> = {
            let mut order: Vec<usize> = perm.into_iter().filter(|&k| k < m).collect();
            order.truncate(m);
            order
        };
        let b = centred(raw[..m].to_vec());
        let mut bp = vec![0.0; m];
        for i in 0..m {
            bp[perm[i]] = b[i];
        }
        let a = icar_logpdf(&b, tau, &g);
        let c = icar_logpdf(&bp, tau, &g.permuted(&perm).unwrap());
        prop_assert!((a - c).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn log_prior_is_separable(
        variant in variant_strategy(),
        vals in proptest::collection::vec(-1.0f64..1.0, 16),
        nb1 in -3.0f64..3.0,
        scale in 1.1f64..4.0,
    ) {
        let spec = ModelSpec::new(variant);
        let (m, t) = (4, 5);
        let g = AdjacencyGraph::ring(m).unwrap();
        let layout = ParamLayout::new(&spec, m, t);
        let p = params_for(&spec, m, t, &vals);
        let base = log_prior(&p, &spec, &layout, Some(&g)).unwrap();
        let pc = &spec.prior;

        let mut q = p.clone();
        q.b1 = nb1;
        let delta = log_prior(&q, &spec, &layout, Some(&g)).unwrap() - base;
        let expect = gaussian_logpdf(nb1, p.tau1) - gaussian_logpdf(p.b1, p.tau1);
        prop_assert!((delta - expect).abs() < 1e-9);

        let mut q = p.clone();
        q.tau1 = p.tau1 * scale;
        let delta = log_prior(&q, &spec, &layout, Some(&g)).unwrap() - base;
        let expect = gaussian_logpdf(p.b1, q.tau1) - gaussian_logpdf(p.b1, p.tau1)
            + gamma_logpdf(q.tau1, pc.fixed_effect_prec_shape, pc.fixed_effect_prec_rate)
            - gamma_logpdf(p.tau1, pc.fixed_effect_prec_shape, pc.fixed_effect_prec_rate);
        prop_assert!((delta - expect).abs() < 1e-9);
    }
}
