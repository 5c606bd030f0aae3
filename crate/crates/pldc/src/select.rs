//! Model selection: seeded k-fold cross-validation over the regularization
//! grid, one-vs-rest multi-class classification, synthetic benchmark data,
//! and normalized-MSE scoring.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::admm::{fit, FitConfig, LossKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::PldcModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    Mae,
    Misclassification,
}

/// Cross-validation plan. `base` carries the solver settings; its `lambda`
/// and `loss` fields are overridden per grid point.
#[derive(Debug, Clone)]
pub struct CvPlan {
    pub folds: usize,
    pub grid: Vec<f64>,
    pub loss: LossKind,
    pub seed: u64,
    pub metric: Metric,
    pub base: FitConfig,
}

impl CvPlan {
    pub fn new(grid: Vec<f64>, loss: LossKind) -> Self {
        let metric = match loss {
            LossKind::Hinge => Metric::Misclassification,
            _ => Metric::Mse,
        };
        Self {
            folds: 5,
            grid,
            loss,
            seed: 0,
            metric,
            base: FitConfig::new(0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvRow {
    pub lambda: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Seeded fold assignment: a shuffled index list dealt round-robin into
/// `folds` bins. Every index lands in exactly one fold.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut out = vec![Vec::with_capacity(n / folds + 1); folds];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    out
}

fn metric_value(metric: Metric, pred: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    match metric {
        Metric::Mse => (pred - y).norm_squared() / n,
        Metric::Mae => (0..y.len()).map(|i| (pred[i] - y[i]).abs()).sum::<f64>() / n,
        Metric::Misclassification => {
            (0..y.len())
                .filter(|&i| (pred[i] >= 0.0) != (y[i] >= 0.0))
                .count() as f64
                / n
        }
    }
}

/// Pick the best grid point by held-out metric. Ties (within a small
/// relative slack) break toward the larger lambda, preferring the smoother
/// model.
pub fn cross_validate(data: &Dataset, plan: &CvPlan) -> Result<(f64, Vec<CvRow>)> {
    if plan.grid.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    if plan.folds < 2 || plan.folds > data.n() {
        return Err(Error::InvalidConfig(format!(
            "folds must be in 2..=n, got {}",
            plan.folds
        )));
    }
    let folds = fold_assignment(data.n(), plan.folds, plan.seed);
    for f in &folds {
        if data.n() - f.len() < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                got: data.n() - f.len(),
            });
        }
    }
    let splits: Vec<(Dataset, Dataset)> = folds
        .iter()
        .map(|test_idx| {
            let train_idx: Vec<usize> =
                (0..data.n()).filter(|i| !test_idx.contains(i)).collect();
            Ok((data.subset(&train_idx)?, data.subset(test_idx)?))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..plan.grid.len())
        .flat_map(|g| (0..plan.folds).map(move |f| (g, f)))
        .collect();
    let scores: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, test) = &splits[f];
            let cfg = FitConfig {
                lambda: plan.grid[g],
                loss: plan.loss,
                ..plan.base.clone()
            };
            let (model, _) = fit(train, &cfg)?;
            let pred = model.evaluate_rows(test.x())?;
            Ok(metric_value(plan.metric, &pred, test.y()))
        })
        .collect();

    let mut table = Vec::with_capacity(plan.grid.len());
    for (g, &lambda) in plan.grid.iter().enumerate() {
        let mut vals = Vec::with_capacity(plan.folds);
        for f in 0..plan.folds {
            match &scores[g * plan.folds + f] {
                Ok(v) => vals.push(*v),
                Err(e) => return Err(Error::InvalidConfig(format!("fold fit failed: {e}"))),
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / vals.len() as f64;
        table.push(CvRow {
            lambda,
            mean,
            stderr: (var / vals.len() as f64).sqrt(),
        });
    }

    let best_mean = table.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    let tie = best_mean + 1e-12 * best_mean.abs().max(1.0);
    let best_lambda = table
        .iter()
        .filter(|r| r.mean <= tie)
        .map(|r| r.lambda)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best_lambda, table))
}

/// One binary hinge scorer per class; prediction is the argmax score.
#[derive(Debug, Clone)]
pub struct MulticlassModel {
    pub classes: Vec<String>,
    pub models: Vec<PldcModel>,
}

impl MulticlassModel {
    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn scores(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.evaluate(x)).collect()
    }

    /// Index of the predicted class; ties break to the smallest index.
    pub fn predict_index(&self, x: &DVector<f64>) -> Result<usize> {
        Ok(argmax_first(&self.scores(x)?))
    }

    pub fn predict_class(&self, x: &DVector<f64>) -> Result<&str> {
        Ok(&self.classes[self.predict_index(x)?])
    }
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Train a one-vs-rest hinge classifier. Each class gets its own lambda by
/// cross-validation when the plan's grid has more than one point.
pub fn fit_multiclass(
    x: &DMatrix<f64>,
    labels: &[String],
    plan: &CvPlan,
) -> Result<MulticlassModel> {
    if x.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows vs {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }

    let models: Vec<Result<PldcModel>> = classes
        .par_iter()
        .map(|class| {
            let y: Vec<f64> = labels
                .iter()
                .map(|l| if l == class { 1.0 } else { -1.0 })
                .collect();
            let data = Dataset::new(x.clone(), DVector::from_column_slice(&y))?;
            let lambda = if plan.grid.len() > 1 {
                let sub = CvPlan {
                    loss: LossKind::Hinge,
                    metric: Metric::Misclassification,
                    ..plan.clone()
                };
                cross_validate(&data, &sub)?.0
            } else {
                *plan.grid.first().ok_or_else(|| {
                    Error::InvalidConfig("empty lambda grid".into())
                })?
            };
            let cfg = FitConfig {
                lambda,
                loss: LossKind::Hinge,
                ..plan.base.clone()
            };
            Ok(fit(&data, &cfg)?.0)
        })
        .collect();

    let models: Vec<PldcModel> = models.into_iter().collect::<Result<_>>()?;
    Ok(MulticlassModel { classes, models })
}

/// Gaussian predictors with the benchmark response
/// `sin(pi/sqrt(d) sum_j x_j) + (sum_j x_j / sqrt(d))^2` plus centered
/// Gaussian noise. Fixed seeds reproduce bit-identical datasets.
pub fn generate_synthetic(n: usize, d: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("n and d must be at least 1".into()));
    }
    if noise_sd < 0.0 {
        return Err(Error::InvalidConfig("noise_sd must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for k in 0..d {
            x[(i, k)] = StandardNormal.sample(&mut rng);
        }
    }
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let s: f64 = x.row(i).sum() / (d as f64).sqrt();
        let noise: f64 = if noise_sd > 0.0 {
            let g: f64 = StandardNormal.sample(&mut rng);
            noise_sd * g
        } else {
            0.0
        };
        y[i] = (std::f64::consts::PI * s).sin() + s * s + noise;
    }
    Dataset::new(x, y)
}

/// The synthetic ground-truth response without noise.
pub fn synthetic_truth(x: &DVector<f64>) -> f64 {
    let s: f64 = x.sum() / (x.len() as f64).sqrt();
    (std::f64::consts::PI * s).sin() + s * s
}

/// `100 * MSE / Var(y_test)`: 100 marks the mean predictor, 0 a perfect fit.
pub fn evaluate_nmse(model: &PldcModel, test: &Dataset) -> Result<f64> {
    let y = test.y();
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let pred = model.evaluate_rows(test.x())?;
    let mse = (pred - y).norm_squared() / n;
    Ok(100.0 * mse / var)
}
