mod common;

use common::{numeric_gradient, rel_err, rng};
use lfshield::federation::{compute_update_gradient, local_train};
use lfshield::data::Dataset;
use lfshield::nn::{backward, forward, mean_gradient, one_hot, Dims, Hyperparams, ModelParams};
use rand::Rng;

fn random_instance(seed: u64) -> (ModelParams, Vec<(Vec<f64>, usize)>) {
    let mut r = rng(seed);
    let dims = Dims::new(r.gen_range(1..6), r.gen_range(1..6), r.gen_range(2..5)).unwrap();
    let params = ModelParams::glorot(dims, &mut r);
    let examples = (0..r.gen_range(1..4))
        .map(|_| ((0..dims.input).map(|_| r.gen_range(-2.0..2.0)).collect(), r.gen_range(0..dims.classes)))
        .collect();
    (params, examples)
}

#[test]
fn backward_matches_central_differences() {
    for seed in 0..20 {
        let (params, examples) = random_instance(seed);
        let (analytic, _) = mean_gradient(&params, examples.iter().map(|(x, y)| (x.as_slice(), *y))).unwrap();
        let numeric = numeric_gradient(&params, &examples, 1e-5);
        for (a, n) in analytic.as_slice().iter().zip(&numeric) {
            assert!(rel_err(*a, *n) <= 1e-6, "seed {seed}: analytic {a} numeric {n}");
        }
    }
}

#[test]
fn single_example_backward_matches_mean_gradient() {
    let (params, examples) = random_instance(99);
    let (x, y) = &examples[0];
    let trace = forward(&params, x).unwrap();
    let g = backward(&params, x, &trace, &one_hot(*y, params.dims().classes)).unwrap();
    let (m, _) = mean_gradient(&params, [(x.as_slice(), *y)]).unwrap();
    assert_eq!(g, m);
}

#[test]
fn one_full_batch_step_recovers_the_gradient() {
    let (params, examples) = random_instance(7);
    let dims = params.dims();
    let features: Vec<f64> = examples.iter().flat_map(|(x, _)| x.clone()).collect();
    let labels: Vec<usize> = examples.iter().map(|(_, y)| *y).collect();
    let data = Dataset::new(features, labels, dims.input, dims.classes).unwrap();
    let hp = Hyperparams { lr: 0.05, momentum: 0.0, local_epochs: 1, batch_size: data.len() };
    let next = local_train(&params, &data, &hp, &mut rng(1)).unwrap();
    let implied = compute_update_gradient(&params, &next, hp.lr).unwrap();
    let (direct, _) = mean_gradient(&params, data.examples()).unwrap();
    for (a, b) in implied.params().as_slice().iter().zip(direct.as_slice()) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn update_gradient_scalar_examples() {
    let dims = Dims::new(1, 1, 2).unwrap();
    let fill = |v: f64| ModelParams::from_vec(dims, vec![v; dims.param_count()]).unwrap();
    let g = compute_update_gradient(&fill(2.0), &fill(1.5), 0.5).unwrap();
    assert!(g.params().as_slice().iter().all(|&v| v == 1.0));
    let zero = compute_update_gradient(&fill(2.0), &fill(2.0), 0.5).unwrap();
    assert!(zero.params().as_slice().iter().all(|&v| v == 0.0));
}
