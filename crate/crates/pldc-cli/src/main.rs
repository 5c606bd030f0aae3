mod cli;
mod commands;
mod error;
mod io;
mod schema;

use clap::Parser;

fn main() {
    let args = cli::Cli::parse();
    let result = match &args.command {
        cli::Command::Fit(a) => commands::cmd_fit(a),
        cli::Command::Predict(a) => commands::cmd_predict(a),
        cli::Command::Discrepancy(a) => commands::cmd_discrepancy(a),
        cli::Command::Synth(a) => commands::cmd_synth(a),
        cli::Command::Eval(a) => commands::cmd_eval(a),
        cli::Command::Convert(a) => commands::cmd_convert(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
