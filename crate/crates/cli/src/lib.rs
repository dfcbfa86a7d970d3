//! Command-line workbench: rates, path solving, code design, density evolution and simulation.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod parse;

use args::{Cli, Command};
use commands::Ctx;
pub use error::{CliError, Result};

/// Runs one parsed invocation. `argv` is recorded verbatim in the manifest.
pub fn run(cli: &Cli, argv: Vec<String>) -> Result<()> {
    let ctx = Ctx { cli, args: argv };
    match &cli.command {
        Command::Rates(a) => commands::cmd_rates(&ctx, a).map(|_| ()),
        Command::Path(a) => commands::cmd_path(&ctx, a).map(|_| ()),
        Command::Optimize(a) => commands::cmd_optimize(&ctx, a).map(|_| ()),
        Command::Evolve(a) => commands::cmd_evolve(&ctx, a).map(|_| ()),
        Command::Simulate(a) => commands::cmd_simulate(&ctx, a).map(|_| ()),
        Command::Pipeline(a) => commands::cmd_pipeline(&ctx, a).map(|_| ()),
        Command::Report(a) => {
            let summary = commands::cmd_report(a)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            Ok(())
        }
    }
}
