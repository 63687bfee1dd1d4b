use nmar_core::cover::PhiFunction;
use nmar_core::synth::{generate, GFn, RegressionFn, SyntheticModel};

#[test]
fn observed_fraction_tracks_selection_probability_per_response_bin() {
    let m = RegressionFn::Sine { coord: 0, amp: 0.3, freq: 1.0, phase: 0.0, offset: 0.0 };
    let model = SyntheticModel::regression(1, vec![0], m, GFn::affine(vec![1.0], -0.5), PhiFunction::exp_gamma(1.0, 1.0).unwrap(), 0.6).unwrap();
    let (ds, truth) = generate(&model, 100_000, 42).unwrap();
    let bins = 10;
    let mut count = vec![0.0; bins];
    let mut seen = vec![0.0; bins];
    let mut pi_sum = vec![0.0; bins];
    let mut var_sum = vec![0.0; bins];
    for ((o, &y), &p) in ds.observations().iter().zip(truth.y()).zip(truth.pi()) {
        let b = (((y + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        count[b] += 1.0;
        seen[b] += o.y.is_some() as u8 as f64;
        pi_sum[b] += p;
        var_sum[b] += p * (1.0 - p);
    }
    for b in 0..bins {
        if count[b] < 100.0 {
            continue;
        }
        // observed count is a sum of independent Bernoulli(pi_i)
        let sigma = var_sum[b].sqrt();
        assert!((seen[b] - pi_sum[b]).abs() <= 3.0 * sigma, "bin {b}: {} observed, {} expected, sigma {sigma}", seen[b], pi_sum[b]);
    }
}
