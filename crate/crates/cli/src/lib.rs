//! Command-line surface for the `robustprice` library: dataset validation,
//! mechanism evaluation, maximin bounds and the experiment-design studies.

pub mod args;
pub mod commands;
pub mod output;

use std::path::Path;

use robustprice::PricingError;

pub use args::{Cli, Command, ModelArgs, Study, StudyArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {message}")]
    Output { path: String, message: String },
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

impl CliError {
    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Output { path: path.display().to_string(), message: err.to_string() }
    }

    pub(crate) fn csv(path: &Path, err: csv::Error) -> Self {
        Self::io(path, err)
    }

    /// 2 for bad input, 3 for data inconsistent with the class, 4 for numerical
    /// failure, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Output { .. } => 1,
            CliError::Pricing(e) => match e {
                PricingError::Domain(_) | PricingError::InvalidData(_) => 2,
                PricingError::Infeasible(_) => 3,
                PricingError::NotCertified(_) | PricingError::EmptyOptimalSet | PricingError::Numerical(_) => 4,
            },
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate { dataset } => commands::cmd_validate(dataset, std::io::stdout().lock()),
        Command::Evaluate { dataset, mechanism, model } => {
            let report = commands::cmd_evaluate(dataset, mechanism, *model)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Maximin { dataset, model, out, lp_dump } => {
            commands::run_maximin(dataset, *model, out.as_deref(), *lp_dump)
        }
        Command::Study { study } => {
            let path = commands::cmd_study(study)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}
