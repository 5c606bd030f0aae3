use nalgebra::DVector;
use serde::Serialize;

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::schema::{self, ModelFile};
use pldc::{
    cross_validate, discrepancy_with, evaluate_nmse, fit, fit_multiclass, lambda_grid_with,
    pldc_to_relu, relu_to_pldc, theoretical_lambda, CvPlan, Dataset, FitConfig, LossKind, Metric,
    MulticlassModel, PldcModel, SolveOptions, Standardizer,
};

fn loss_kind(loss: LossArg) -> LossKind {
    match loss {
        LossArg::L2 => LossKind::Squared,
        LossArg::L1 => LossKind::Absolute,
        LossArg::Hinge => LossKind::Hinge,
    }
}

fn base_config(args: &FitArgs) -> FitConfig {
    let mut cfg = FitConfig::new(0.0);
    cfg.rho = args.rho;
    cfg.max_iters = args.max_iters;
    cfg.tol_primal = args.tol;
    cfg.tol_dual = args.tol;
    cfg.standardize = !args.no_standardize;
    cfg
}

fn grid_solve_options() -> SolveOptions {
    SolveOptions {
        tol: 1e-8,
        ..Default::default()
    }
}

#[derive(Serialize)]
struct CvRowJson {
    lambda: f64,
    mean: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct FitReportJson {
    task: String,
    loss: String,
    lambda: f64,
    lambda_source: String,
    iterations: usize,
    converged: bool,
    primal_residual: f64,
    dual_residual: f64,
    objective: f64,
    training_metric_name: String,
    training_metric: f64,
    cv_table: Option<Vec<CvRowJson>>,
    model: String,
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let loaded = io::load_features_and_target(&args.data, &args.target)?;
    if loaded.x.nrows() == 0 {
        return Err(CliError::Input(format!("{}: no data rows to fit", args.data)));
    }
    let loss = loss_kind(args.loss);

    // hinge targets that are not plain +/-1 numbers become class labels
    let numeric_target: Option<DVector<f64>> = loaded
        .target_raw
        .iter()
        .map(|s| s.parse::<f64>().ok())
        .collect::<Option<Vec<f64>>>()
        .map(DVector::from_vec);
    let binary = numeric_target
        .as_ref()
        .is_some_and(|y| y.iter().all(|v| v.abs() == 1.0));

    if loss == LossKind::Hinge && !binary {
        return fit_multiclass_cmd(args, &loaded);
    }

    let y = match numeric_target {
        Some(y) => y,
        // re-parse to name the offending row and column
        None => io::parse_numeric_target(&args.data, &args.target, &loaded.target_raw)?,
    };
    let data = Dataset::new(loaded.x.clone(), y).map_err(CliError::from)?;

    let mut cv_table = None;
    let (lambda, lambda_source) = match (args.lambda, args.cv) {
        (Some(l), None) => (l, "flag".to_string()),
        (None, Some(k)) => {
            let grid = grid_for(&data, !args.no_standardize)?;
            let mut plan = CvPlan::new(grid, loss);
            plan.folds = k;
            plan.seed = args.seed;
            plan.base = base_config(args);
            let (best, table) = cross_validate(&data, &plan).map_err(CliError::from)?;
            cv_table = Some(table);
            (best, format!("{k}-fold cross-validation"))
        }
        _ => {
            return Err(CliError::Input(
                "provide exactly one of --lambda or --cv".into(),
            ))
        }
    };

    let mut cfg = base_config(args);
    cfg.lambda = lambda;
    cfg.loss = loss;
    let (model, report) = fit(&data, &cfg).map_err(CliError::from)?;

    let pred = model.evaluate_rows(data.x()).map_err(CliError::from)?;
    let (metric_name, metric) = match loss {
        LossKind::Hinge => (
            "training misclassification",
            (0..data.n())
                .filter(|&i| (pred[i] >= 0.0) != (data.y()[i] >= 0.0))
                .count() as f64
                / data.n() as f64,
        ),
        _ => (
            "training mse",
            (&pred - data.y()).norm_squared() / data.n() as f64,
        ),
    };

    let task = if loss == LossKind::Hinge { "binary" } else { "regression" };
    let file = ModelFile {
        version: schema::MODEL_FORMAT_VERSION,
        task: task.to_string(),
        standardizer: model.standardizer.as_ref().map(schema::standardizer_to_json),
        classes: None,
        models: vec![schema::model_to_parts(&model)],
        meta: model.meta.as_ref().map(|m| schema::MetaJson {
            lambda: m.lambda,
            rho: m.rho,
            loss: m.loss.clone(),
            iterations: m.iterations,
            primal_residual: m.primal_residual,
            dual_residual: m.dual_residual,
            objective: m.objective,
            coupling: m.coupling.clone(),
        }),
    };
    schema::write_model_file(&args.out, &file)?;

    if args.json {
        let out = FitReportJson {
            task: task.to_string(),
            loss: cfg.loss.name().to_string(),
            lambda,
            lambda_source,
            iterations: report.iterations,
            converged: report.converged,
            primal_residual: report.primal_residual,
            dual_residual: report.dual_residual,
            objective: report.objective,
            training_metric_name: metric_name.to_string(),
            training_metric: metric,
            cv_table: cv_table.as_ref().map(|t| {
                t.iter()
                    .map(|r| CvRowJson {
                        lambda: r.lambda,
                        mean: r.mean,
                        stderr: r.stderr,
                    })
                    .collect()
            }),
            model: args.out.clone(),
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("fit report ({task}, {} loss)", cfg.loss.name());
        println!("  lambda: {lambda} ({lambda_source})");
        println!("  rho: {}", cfg.rho);
        println!(
            "  iterations: {} ({})",
            report.iterations,
            if report.converged { "converged" } else { "iteration cap" }
        );
        println!("  primal residual: {:.3e}", report.primal_residual);
        println!("  dual residual: {:.3e}", report.dual_residual);
        println!("  objective: {:.9}", report.objective);
        println!("  {metric_name}: {:.9}", metric);
        if let Some(table) = &cv_table {
            println!("  cv table (lambda, mean, stderr):");
            for row in table {
                println!("    {:<12.6} {:.6e} {:.2e}", row.lambda, row.mean, row.stderr);
            }
        }
        println!("model written to {}", args.out);
    }
    Ok(())
}

fn grid_for(data: &Dataset, standardize: bool) -> CliResult<Vec<f64>> {
    let work = if standardize {
        data.standardized().0
    } else {
        data.clone()
    };
    lambda_grid_with(&work, 1.0, &grid_solve_options()).map_err(CliError::from)
}

fn fit_multiclass_cmd(args: &FitArgs, loaded: &io::LoadedData) -> CliResult<()> {
    let grid = match (args.lambda, args.cv) {
        (Some(l), None) => vec![l],
        (None, Some(_)) => {
            let data = Dataset::new(loaded.x.clone(), DVector::zeros(loaded.x.nrows()))
                .map_err(CliError::from)?;
            grid_for(&data, !args.no_standardize)?
        }
        _ => {
            return Err(CliError::Input(
                "provide exactly one of --lambda or --cv".into(),
            ))
        }
    };
    let mut plan = CvPlan::new(grid, LossKind::Hinge);
    plan.metric = Metric::Misclassification;
    if let Some(k) = args.cv {
        plan.folds = k;
    }
    plan.seed = args.seed;
    plan.base = base_config(args);

    let mc = fit_multiclass(&loaded.x, &loaded.target_raw, &plan).map_err(CliError::from)?;

    let mut errors = 0usize;
    for i in 0..loaded.x.nrows() {
        let idx = mc.predict_index(&loaded.x.row(i).transpose()).map_err(CliError::from)?;
        if mc.classes[idx] != loaded.target_raw[i] {
            errors += 1;
        }
    }
    let misclass = errors as f64 / loaded.x.nrows() as f64;

    let file = ModelFile {
        version: schema::MODEL_FORMAT_VERSION,
        task: "multiclass".to_string(),
        standardizer: mc.models[0]
            .standardizer
            .as_ref()
            .map(schema::standardizer_to_json),
        classes: Some(mc.classes.clone()),
        models: mc.models.iter().map(schema::model_to_parts).collect(),
        meta: mc.models[0].meta.as_ref().map(|m| schema::MetaJson {
            lambda: m.lambda,
            rho: m.rho,
            loss: m.loss.clone(),
            iterations: m.iterations,
            primal_residual: m.primal_residual,
            dual_residual: m.dual_residual,
            objective: m.objective,
            coupling: m.coupling.clone(),
        }),
    };
    schema::write_model_file(&args.out, &file)?;

    if args.json {
        #[derive(Serialize)]
        struct McReport {
            task: String,
            classes: Vec<String>,
            training_misclassification: f64,
            model: String,
        }
        println!(
            "{}",
            serde_json::to_string_pretty(&McReport {
                task: "multiclass".into(),
                classes: mc.classes.clone(),
                training_misclassification: misclass,
                model: args.out.clone(),
            })?
        );
    } else {
        println!("fit report (multiclass, hinge loss, one-vs-rest)");
        println!("  classes: {}", mc.classes.join(", "));
        println!("  training misclassification: {misclass:.6}");
        println!("model written to {}", args.out);
    }
    Ok(())
}

/// Shared standardizer handling when loading persisted models.
fn file_models(file: &ModelFile) -> CliResult<(Option<Standardizer>, Vec<PldcModel>)> {
    let stdzr = file.standardizer.as_ref().map(schema::standardizer_from_json);
    let models = file
        .models
        .iter()
        .map(|p| schema::parts_to_model(p, stdzr.clone()))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((stdzr, models))
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let file = schema::read_model_file(&args.model)?;
    let (_stdzr, models) = file_models(&file)?;
    let (_names, x) = io::load_features(&args.data, &args.target)?;

    if file.task == "multiclass" {
        let classes = file.classes.clone().ok_or_else(|| {
            CliError::Input(format!("{}: multiclass model without class list", args.model))
        })?;
        let mc = MulticlassModel {
            classes: classes.clone(),
            models,
        };
        let mut headers = vec!["label".to_string()];
        headers.extend(classes.iter().map(|c| format!("score_{c}")));
        let mut rows = Vec::with_capacity(x.nrows());
        if x.nrows() > 0 {
            check_dim(mc.dim(), x.ncols())?;
            for i in 0..x.nrows() {
                let p = x.row(i).transpose();
                let scores = mc.scores(&p).map_err(CliError::from)?;
                let idx = mc.predict_index(&p).map_err(CliError::from)?;
                let mut row = vec![classes[idx].clone()];
                row.extend(scores.iter().map(|s| format!("{s}")));
                rows.push(row);
            }
        }
        io::write_csv(&args.out, &headers, &rows)?;
    } else {
        let model = &models[0];
        let mut rows = Vec::with_capacity(x.nrows());
        if x.nrows() > 0 {
            check_dim(model.dim(), x.ncols())?;
            for i in 0..x.nrows() {
                let v = model.evaluate(&x.row(i).transpose()).map_err(CliError::from)?;
                rows.push(vec![format!("{v}")]);
            }
        }
        io::write_csv(&args.out, &["yhat".to_string()], &rows)?;
    }
    println!("predictions written to {}", args.out);
    Ok(())
}

fn check_dim(expected: usize, got: usize) -> CliResult<()> {
    if expected != got {
        return Err(CliError::Input(format!(
            "model expects {expected} features, data has {got}"
        )));
    }
    Ok(())
}

pub fn cmd_discrepancy(args: &DiscrepancyArgs) -> CliResult<()> {
    let (_names, x) = io::load_features(&args.data, &args.target)?;
    if x.nrows() < 2 {
        return Err(CliError::Input(format!(
            "{}: need at least 2 rows, got {}",
            args.data,
            x.nrows()
        )));
    }

    let split: Option<Vec<usize>> = args
        .seed
        .map(|seed| pldc::seeded_split(x.nrows() - x.nrows() % 2, seed));

    let opts = grid_solve_options();
    let result = discrepancy_with(&x, args.budget, split.as_deref(), &opts).map_err(CliError::from)?;
    let unit = if args.budget == 1.0 {
        result.value
    } else {
        discrepancy_with(&x, 1.0, split.as_deref(), &opts)
            .map_err(CliError::from)?
            .value
    };
    let grid: Vec<f64> = (-8..=1).map(|j| 2.0f64.powi(-j) * unit).collect();
    let lambda_theory = theoretical_lambda(args.m_bound, unit);

    if let Some(dropped) = result.dropped {
        eprintln!(
            "warning: odd sample count, dropped data row {} to form even halves",
            dropped + 1
        );
    }

    if args.json {
        #[derive(Serialize)]
        struct DiscReport {
            budget: f64,
            value: f64,
            unit_value: f64,
            lambda_grid: Vec<f64>,
            m_bound: f64,
            theoretical_lambda: f64,
            dropped_row: Option<usize>,
        }
        println!(
            "{}",
            serde_json::to_string_pretty(&DiscReport {
                budget: args.budget,
                value: result.value,
                unit_value: unit,
                lambda_grid: grid,
                m_bound: args.m_bound,
                theoretical_lambda: lambda_theory,
                dropped_row: result.dropped.map(|d| d + 1),
            })?
        );
    } else {
        println!("empirical maximum discrepancy at L = {}: {:.9}", args.budget, result.value);
        println!("unit-budget discrepancy: {unit:.9}");
        println!(
            "lambda grid (2^-j * Dhat, j = -8..=1): {}",
            grid.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
        );
        println!(
            "theoretical lambda = 24 * M * Dhat = {:.9} (M = {})",
            lambda_theory, args.m_bound
        );
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let data = pldc::generate_synthetic(args.n, args.d, args.noise, args.seed)
        .map_err(CliError::from)?;
    let mut headers: Vec<String> = (1..=args.d).map(|k| format!("x{k}")).collect();
    headers.push("y".to_string());
    let rows: Vec<Vec<String>> = (0..data.n())
        .map(|i| {
            let mut row: Vec<String> =
                (0..args.d).map(|k| format!("{}", data.x()[(i, k)])).collect();
            row.push(format!("{}", data.y()[i]));
            row
        })
        .collect();
    io::write_csv(&args.out, &headers, &rows)?;
    println!("wrote {} rows to {}", data.n(), args.out);
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let file = schema::read_model_file(&args.model)?;
    if file.task == "multiclass" {
        return Err(CliError::Input(
            "eval computes normalized MSE for regression models; got a multiclass model".into(),
        ));
    }
    let (_stdzr, models) = file_models(&file)?;
    let loaded = io::load_features_and_target(&args.test, &args.target)?;
    if loaded.x.nrows() == 0 {
        return Err(CliError::Input(format!("{}: no test rows", args.test)));
    }
    let y = io::parse_numeric_target(&args.test, &args.target, &loaded.target_raw)?;
    check_dim(models[0].dim(), loaded.x.ncols())?;
    let data = Dataset::new(loaded.x, y).map_err(CliError::from)?;
    let nmse = evaluate_nmse(&models[0], &data).map_err(CliError::from)?;
    if args.json {
        println!("{{\n  \"nmse\": {nmse}\n}}");
    } else {
        println!("nmse: {nmse:.6} (100 = mean predictor)");
    }
    Ok(())
}

pub fn cmd_convert(args: &ConvertArgs) -> CliResult<()> {
    match (&args.relu, &args.model, args.to) {
        (Some(net_path), None, ConvertTarget::Pldc) => {
            let text = std::fs::read_to_string(net_path)
                .map_err(|e| CliError::Input(format!("cannot read {net_path}: {e}")))?;
            let net_file: schema::NetFile = serde_json::from_str(&text)?;
            let net = schema::net_from_file(&net_file)?;
            let model = relu_to_pldc(&net).map_err(CliError::from)?;
            let file = ModelFile {
                version: schema::MODEL_FORMAT_VERSION,
                task: "regression".to_string(),
                standardizer: None,
                classes: None,
                models: vec![schema::model_to_parts(&model)],
                meta: None,
            };
            schema::write_model_file(&args.out, &file)?;
            println!(
                "wrote model with {} + {} planes to {}",
                model.phi1.num_planes(),
                model.phi2.num_planes(),
                args.out
            );
        }
        (None, Some(model_path), ConvertTarget::Relu) => {
            let file = schema::read_model_file(model_path)?;
            if file.task == "multiclass" {
                return Err(CliError::Input(
                    "convert --to relu expects a single-model file".into(),
                ));
            }
            let (_stdzr, models) = file_models(&file)?;
            let net = pldc_to_relu(&models[0]).map_err(CliError::from)?;
            let out = schema::net_to_file(&net);
            std::fs::write(&args.out, serde_json::to_string_pretty(&out)?)?;
            println!(
                "wrote network (depth {}, max width {}) to {}; feed inputs as (x, 1)",
                net.depth(),
                net.max_width(),
                args.out
            );
        }
        _ => {
            return Err(CliError::Input(
                "use either --relu NET --to pldc or --model MODEL --to relu".into(),
            ))
        }
    }
    Ok(())
}
