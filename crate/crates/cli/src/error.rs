use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{flag} {}: file not found", path.display())]
    Missing { flag: &'static str, path: PathBuf },

    #[error("{}: {detail}", path.display())]
    Schema { path: PathBuf, detail: String },

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Missing { .. } => "missing_file",
            CliError::Schema { .. } => "schema",
            CliError::Input(_) => "input",
            CliError::Usage(_) => "usage",
        }
    }
}

/// `error: kind=<kind> msg=<message>` on a single line.
pub fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| {
            e.downcast_ref::<CliError>()
                .map(CliError::kind)
                .or_else(|| e.downcast_ref::<rflab_core::Error>().map(rflab_core::Error::kind))
        })
        .unwrap_or("internal");
    let msg = format!("{err:#}").replace(['\n', '\r'], " ");
    format!("error: kind={kind} msg={msg}")
}
