use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "pldc",
    about = "Piecewise-linear regression and classification with difference-of-convex models",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a model to a CSV dataset
    Fit(FitArgs),
    /// Evaluate a saved model on new inputs
    Predict(PredictArgs),
    /// Compute the empirical maximum discrepancy and the lambda grid
    Discrepancy(DiscrepancyArgs),
    /// Generate the synthetic Gaussian benchmark dataset
    Synth(SynthArgs),
    /// Normalized MSE of a saved model on a test set
    Eval(EvalArgs),
    /// Convert between ReLU networks and models
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    /// squared loss
    L2,
    /// absolute loss
    L1,
    /// hinge loss (binary +/-1 targets, or one-vs-rest for labels)
    Hinge,
}

#[derive(Args)]
pub struct FitArgs {
    /// Training CSV (header row required)
    #[arg(long)]
    pub data: String,
    /// Empirical loss
    #[arg(long, value_enum, default_value = "l2")]
    pub loss: LossArg,
    /// Regularization weight (exclusive with --cv)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Pick lambda by k-fold cross-validation over the discrepancy grid
    #[arg(long, value_name = "K", conflicts_with = "lambda")]
    pub cv: Option<usize>,
    /// ADMM penalty parameter
    #[arg(long, default_value_t = 0.01)]
    pub rho: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 20000)]
    pub max_iters: usize,
    /// Primal/dual residual tolerance for early stopping
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seed for fold assignment
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target column name
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Skip per-feature standardization
    #[arg(long)]
    pub no_standardize: bool,
    /// Machine-readable report
    #[arg(long)]
    pub json: bool,
    /// Output model path
    #[arg(long)]
    pub out: String,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: String,
    /// Input CSV; a target column, if present, is ignored
    #[arg(long)]
    pub data: String,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long)]
    pub out: String,
}

#[derive(Args)]
pub struct DiscrepancyArgs {
    #[arg(long)]
    pub data: String,
    /// Seminorm budget L
    #[arg(long = "L", default_value_t = 1.0)]
    pub budget: f64,
    /// Randomize the half-sample split with this seed (default: data order)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bound M in the theoretical weight 24 M Dhat (default makes 12M = 1)
    #[arg(long, default_value_t = 1.0 / 12.0)]
    pub m_bound: f64,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 0.25)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: String,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub test: String,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertTarget {
    Pldc,
    Relu,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// ReLU network JSON to convert (with --to pldc)
    #[arg(long)]
    pub relu: Option<String>,
    /// Model JSON to convert (with --to relu)
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub to: ConvertTarget,
    #[arg(long)]
    pub out: String,
}
