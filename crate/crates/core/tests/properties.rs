use nmar_core::classify::{plugin_classify, risk_report, BayesClassifier, ConstantClassifier, PluginClassifier};
use nmar_core::cover::{build_exp_cover, covering_number_bound, validate_cover, PhiFunction};
use nmar_core::data::{DataSplit, Dataset, Observation, Rows};
use nmar_core::ht::{fit_ht, validation_pis, HtConfig, HtVariant};
use nmar_core::joint::{Atom, DiscreteJoint};
use nmar_core::kernels::{BandwidthPolicy, KernelSpec};
use nmar_core::plugin::{eta_hat, m_hat_gamma, m_hat_m_phi, nw_estimate, Regressor};
use nmar_core::selection::{empirical_risk, fit, select_phi, Smoothing};
use nmar_core::synth::{generate, GFn, RegressionFn, SyntheticModel};
use proptest::prelude::*;

const H: f64 = 0.3;

fn smoothing() -> Smoothing {
    Smoothing::shared(KernelSpec::boxcar(1.0), BandwidthPolicy::Fixed { h0: H })
}

/// `(d, rows)` with `x` in `[0, 1]^d`, `y` in `[-1, 1]` and a response indicator.
fn sample(full: bool) -> impl Strategy<Value = (usize, Vec<(Vec<f64>, f64, bool)>)> {
    (1usize..=2).prop_flat_map(move |d| {
        let row = (prop::collection::vec(0.0..1.0f64, d), -1.0..1.0f64, prop::bool::weighted(if full { 1.0 } else { 0.6 }));
        (Just(d), prop::collection::vec(row, 50))
    })
}

fn dataset(d: usize, rows: &[(Vec<f64>, f64, bool)]) -> Dataset {
    let obs = rows.iter().map(|(x, y, o)| if *o { Observation::observed(x.clone(), *y) } else { Observation::missing(x.clone()) }).collect();
    Dataset::new(obs, d, vec![0], 1.0).unwrap()
}

fn half_split(n: usize) -> DataSplit {
    DataSplit::from_indices(n, (0..n / 2).collect(), (n / 2..n).collect()).unwrap()
}

fn queries(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, d), 20)
}

fn joint_strategy() -> impl Strategy<Value = DiscreteJoint> {
    let atom = (0usize..4, -1.0..1.0f64, 0.05..1.0f64);
    (prop::collection::vec(atom, 1..12), -2.0..2.0f64, -1.5..1.5f64, -1.0..1.0f64).prop_map(|(atoms, gamma, slope, icpt)| {
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        let mut atoms: Vec<Atom> = atoms.into_iter().map(|(loc, y, p)| Atom { x: vec![loc as f64 / 4.0, 1.0 - loc as f64 / 8.0], y, prob: p / total }).collect();
        let residual = 1.0 - atoms.iter().map(|a| a.prob).sum::<f64>();
        atoms[0].prob += residual;
        DiscreteJoint::new(atoms, vec![1], GFn::affine(vec![slope], icpt), PhiFunction::exp_gamma(gamma, 1.0).unwrap()).unwrap()
    })
}

fn binary_joint_strategy() -> impl Strategy<Value = DiscreteJoint> {
    let atom = (0usize..5, prop::bool::ANY, 0.05..1.0f64);
    prop::collection::vec(atom, 1..12).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        let mut atoms: Vec<Atom> = atoms.into_iter().map(|(loc, y, p)| Atom { x: vec![loc as f64], y: y as u8 as f64, prob: p / total }).collect();
        let residual = 1.0 - atoms.iter().map(|a| a.prob).sum::<f64>();
        atoms[0].prob += residual;
        DiscreteJoint::new(atoms, vec![0], GFn::constant(0.0), PhiFunction::exp_gamma(1.0, 1.0).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_observation_reduces_to_nw((d, rows) in sample(true), qs in queries(2), gamma in -2.0..2.0f64) {
        let ds = dataset(d, &rows);
        let all = Rows::all(&ds);
        let k = KernelSpec::boxcar(1.0);
        let phi = PhiFunction::exp_gamma(gamma, 1.0).unwrap();
        let split = half_split(ds.len());
        let train = Rows::subset(&ds, split.training());
        let cover = build_exp_cover(1.0, 1.0, 0.5).unwrap();
        let plug = fit(&ds, &split, &cover, &smoothing()).unwrap();
        let ht = fit_ht(&ds, &split, &cover, &HtConfig::new(HtVariant::Breve, smoothing())).unwrap();
        for q in &qs {
            let x = &q[..d];
            let nw = nw_estimate(&all, &k, H, x);
            prop_assert!((m_hat_gamma(&all, &k, H, x, gamma) - nw).abs() <= 1e-10);
            prop_assert!((m_hat_m_phi(&all, &k, H, x, &phi) - nw).abs() <= 1e-10);
            let nw_train = nw_estimate(&train, &k, H, x);
            prop_assert!((plug.predict(x) - nw_train).abs() <= 1e-10);
            prop_assert!((ht.predict(x) - nw_train).abs() <= 1e-10);
        }
    }

    #[test]
    fn gamma_zero_is_complete_case((d, rows) in sample(false), qs in queries(2)) {
        let all = Rows::all(&dataset(d, &rows));
        let k = KernelSpec::boxcar(1.0);
        for q in &qs {
            let x = &q[..d];
            let e1 = eta_hat(&all, &k, H, x, 0.0, 1);
            let e2 = eta_hat(&all, &k, H, x, 0.0, 2);
            let cc = if e2 == 0.0 { 0.0 } else { e1 / e2 };
            prop_assert!((m_hat_gamma(&all, &k, H, x, 0.0) - cc).abs() <= 1e-10);
            prop_assert!((nw_estimate(&all, &k, H, x) - cc).abs() <= 1e-10);
        }
    }

    #[test]
    fn estimates_stay_in_range((d, rows) in sample(false), qs in queries(2)) {
        let ds = dataset(d, &rows);
        let split = half_split(ds.len());
        let cover = build_exp_cover(2.0, 1.0, 1.0).unwrap();
        let plug = fit(&ds, &split, &cover, &smoothing()).unwrap();
        let ht = fit_ht(&ds, &split, &cover, &HtConfig::new(HtVariant::Tilde, smoothing())).unwrap();
        for q in &qs {
            let x = &q[..d];
            prop_assert!(plug.predict(x).abs() <= 1.0);
            prop_assert!(ht.predict(x).abs() <= 1.0);
        }
    }

    #[test]
    fn far_rows_do_not_matter(y_far in -1.0..1.0f64, x in 0.0..0.4f64) {
        // Box windows of radius 0.3 around x never reach 0.95.
        let base = [(0.1, 0.5, 1u8), (0.2, -0.2, 1), (0.3, 0.1, 0), (0.35, 0.9, 1)];
        let build = |yf: f64| {
            let mut xs: Vec<f64> = base.iter().map(|r| r.0).collect();
            let mut ys: Vec<f64> = base.iter().map(|r| r.1).collect();
            let mut ds: Vec<u8> = base.iter().map(|r| r.2).collect();
            xs.push(0.95);
            ys.push(yf);
            ds.push(1);
            Rows::from_parts(1, &[0], xs, &ys, &ds, 1.0).unwrap()
        };
        let k = KernelSpec::boxcar(1.0);
        let phi = PhiFunction::exp_gamma(1.0, 1.0).unwrap();
        let (a, b) = (build(y_far), build(-y_far));
        prop_assert_eq!(m_hat_m_phi(&a, &k, 0.3, &[x], &phi).to_bits(), m_hat_m_phi(&b, &k, 0.3, &[x], &phi).to_bits());
        prop_assert_eq!(nw_estimate(&a, &k, 0.3, &[x]).to_bits(), nw_estimate(&b, &k, 0.3, &[x]).to_bits());
    }

    #[test]
    fn representation_identity(j in joint_strategy()) {
        for x in j.locations() {
            let (lhs, rhs) = j.representation_oracle(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
            let (ht, m) = j.ht_identity(&x).unwrap();
            prop_assert!((ht - m).abs() <= 1e-12);
        }
    }

    #[test]
    fn ipw_identity_at_every_phi(j in joint_strategy(), gamma in -2.0..2.0f64) {
        let (w, p) = j.ipw_risk_identity(&PhiFunction::exp_gamma(gamma, 1.0).unwrap()).unwrap();
        prop_assert!((w - p).abs() <= 1e-12 * (1.0 + p));
    }

    #[test]
    fn plugin_excess_bound(j in binary_joint_strategy(), offsets in prop::collection::vec(-0.6..0.6f64, 5)) {
        let m_hat = |x: &[f64]| (j.m(x).unwrap() + offsets[x[0] as usize]).clamp(0.0, 1.0);
        let (excess, bound) = j.plugin_excess(m_hat).unwrap();
        prop_assert!(excess >= -1e-15);
        prop_assert!(excess <= bound + 1e-15);
    }

    #[test]
    fn cover_property(m in 0.1..2.0f64, l in 0.1..1.5f64, eps in 0.05..3.0f64) {
        let cover = build_exp_cover(m, l, eps).unwrap();
        prop_assert!(cover.len() as u64 <= covering_number_bound(m, l, eps));
        let sample: Vec<PhiFunction> = (0..200).map(|k| PhiFunction::exp_gamma(-m + 2.0 * m * k as f64 / 199.0, l).unwrap()).collect();
        let check = validate_cover(&cover, &sample, 1000, 1e-3);
        prop_assert!(check.ok, "{check:?}");
    }

    #[test]
    fn breve_dominates_tilde((d, rows) in sample(false), gamma in -3.0..3.0f64, pi0 in 1e-3..0.9f64) {
        let ds = dataset(d, &rows);
        let split = half_split(ds.len());
        let phi = PhiFunction::exp_gamma(gamma, 1.0).unwrap();
        let mut cfg = HtConfig::new(HtVariant::Tilde, smoothing());
        cfg.pi0 = pi0;
        let tilde = validation_pis(&ds, &split, &phi, &cfg).unwrap();
        cfg.variant = HtVariant::Breve;
        let breve = validation_pis(&ds, &split, &phi, &cfg).unwrap();
        for (b, t) in breve.iter().zip(&tilde) {
            prop_assert!(b >= t);
        }
    }

    #[test]
    fn threshold_preserving_maps_keep_the_classifier(m in 0.0..1.0f64, a in 0.01..10.0f64) {
        let t = 0.5 + a * (m - 0.5);
        prop_assert_eq!(plugin_classify(m), plugin_classify(t));
    }

    #[test]
    fn risk_ignores_row_order((d, rows) in sample(false), seed in any::<u64>(), gamma in -2.0..2.0f64) {
        use rand::seq::SliceRandom;
        let n = rows.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut nmar_core::data::rng_from_seed(seed));
        let permuted: Vec<_> = perm.iter().map(|&i| rows[i].clone()).collect();
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let split = half_split(n);
        let moved = DataSplit::from_indices(n, split.training().iter().map(|&i| inverse[i]).collect(), split.validation().iter().map(|&i| inverse[i]).collect()).unwrap();
        let phi = PhiFunction::exp_gamma(gamma, 1.0).unwrap();
        let a = empirical_risk(&dataset(d, &rows), &split, &smoothing(), &phi).unwrap();
        let b = empirical_risk(&dataset(d, &permuted), &moved, &smoothing(), &phi).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn selection_is_deterministic() {
    let model = SyntheticModel::regression(
        1,
        vec![0],
        RegressionFn::Sine { coord: 0, amp: 0.3, freq: 1.0, phase: 0.0, offset: 0.0 },
        GFn::affine(vec![1.0], -0.5),
        PhiFunction::exp_gamma(1.0, 1.0).unwrap(),
        0.6,
    )
    .unwrap();
    let (ds, _) = generate(&model, 400, 9).unwrap();
    let split = DataSplit::random(400, 0.5, 10).unwrap();
    let cover = build_exp_cover(1.0, 1.0, 0.1).unwrap();
    let a = select_phi(&ds, &split, &cover, &smoothing()).unwrap();
    let b = select_phi(&ds, &split, &cover, &smoothing()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn excess_risk_is_not_significantly_negative() {
    let model = SyntheticModel::classification(1, vec![0], RegressionFn::Linear { weights: vec![1.0], intercept: 0.0 }, GFn::affine(vec![1.0], -0.5), PhiFunction::exp_gamma(1.0, 1.0).unwrap()).unwrap();
    let (ds, _) = generate(&model, 600, 4).unwrap();
    let split = DataSplit::random(600, 0.5, 5).unwrap();
    let est = fit(&ds, &split, &build_exp_cover(1.0, 1.0, 0.2).unwrap(), &smoothing()).unwrap();
    let reports = [
        risk_report(&PluginClassifier(est), &model, 20_000, 6).unwrap(),
        risk_report(&BayesClassifier::new(&model).unwrap(), &model, 20_000, 6).unwrap(),
        risk_report(&ConstantClassifier(1), &model, 20_000, 6).unwrap(),
    ];
    for r in reports {
        assert!(r.excess >= -3.0 * r.sigma(), "{r:?}");
        assert!(r.conditional_excess >= 0.0);
    }
}
