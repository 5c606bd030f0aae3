//! Heavier end-to-end selection checks on synthetic data.

use nalgebra::DMatrix;
use pldc::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[test]
fn cross_validation_prefers_interior_lambda() {
    // With the grid spanning 2^-1 .. 2^8 times the unit discrepancy, a
    // moderately noisy fit should usually peak strictly inside the grid.
    let seeds: Vec<u64> = (0..20).collect();
    let interior: usize = seeds
        .par_iter()
        .map(|&seed| {
            let data = generate_synthetic(50, 2, 0.25, seed).unwrap();
            let grid = lambda_grid(&data.standardized().0, 1.0).unwrap();
            let mut plan = CvPlan::new(grid.clone(), LossKind::Absolute);
            plan.seed = seed;
            plan.base.max_iters = 1200;
            plan.base.tol_primal = 1e-5;
            plan.base.tol_dual = 1e-5;
            let (best, _) = cross_validate(&data, &plan).unwrap();
            let hi = grid.first().copied().unwrap();
            let lo = grid.last().copied().unwrap();
            usize::from(best != hi && best != lo)
        })
        .sum();
    assert!(
        interior >= 12,
        "interior best lambda in only {interior}/20 runs"
    );
}

#[test]
fn multiclass_blobs_train_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n_per = 20;
    let centers = [(-4.0, 0.0), (4.0, 0.0), (0.0, 6.0)];
    let n = n_per * centers.len();
    let mut x = DMatrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for (c, &(cx, cy)) in centers.iter().enumerate() {
        for i in 0..n_per {
            let r = c * n_per + i;
            x[(r, 0)] = cx + rng.random_range(-1.0..1.0);
            x[(r, 1)] = cy + rng.random_range(-1.0..1.0);
            labels.push(format!("class{c}"));
        }
    }
    let mut plan = CvPlan::new(vec![0.05], LossKind::Hinge);
    plan.base.max_iters = 3000;
    plan.base.tol_primal = 1e-5;
    plan.base.tol_dual = 1e-5;
    let mc = fit_multiclass(&x, &labels, &plan).unwrap();

    let correct = (0..n)
        .filter(|&i| mc.predict_class(&x.row(i).transpose()).unwrap() == labels[i])
        .count();
    let acc = correct as f64 / n as f64;
    assert!(acc >= 0.95, "training accuracy {acc}");
}

#[test]
fn train_mean_predictor_scores_near_100() {
    let train = generate_synthetic(200, 2, 0.25, 9).unwrap();
    let test = generate_synthetic(4000, 2, 0.25, 10).unwrap();
    let train_mean = train.y().sum() / train.n() as f64;
    let model = PldcModel::constant(2, train_mean);
    let nmse = evaluate_nmse(&model, &test).unwrap();
    assert!(
        (nmse - 100.0).abs() <= 5.0,
        "train-mean predictor NMSE {nmse}"
    );
}
