use serde::Serialize;

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    CostCap { predicted: f64, cap: f64 },
    Numerical { stage: String, message: String },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::CostCap { .. } => 3,
            CliError::Numerical { .. } => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn report(&self) -> Report<'_> {
        let (kind, message, stage, predicted, cap) = match self {
            CliError::Validation(m) => ("validation", m.clone(), None, None, None),
            CliError::CostCap { predicted, cap } => {
                ("cost-cap", format!("predicted cost {predicted:.3e} exceeds the cap {cap:.3e}"), None, Some(*predicted), Some(*cap))
            }
            CliError::Numerical { stage, message } => ("numerical", message.clone(), Some(stage.as_str()), None, None),
            CliError::Io(m) => ("io", m.clone(), None, None, None),
        };
        Report { error: kind, exit_code: self.exit_code(), message, stage, predicted_cost: predicted, cost_cap: cap }
    }
}

/// Machine-readable failure report, printed as one JSON line on stderr.
#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_cap: Option<f64>,
}

impl From<pat_core::Error> for CliError {
    fn from(e: pat_core::Error) -> Self {
        use pat_core::Error as E;
        match e {
            E::CostCap { predicted, cap } => CliError::CostCap { predicted, cap },
            E::Numerical { stage, message } => CliError::Numerical { stage, message },
            // unreadable or missing inputs count as invalid requests
            E::Io(e) => CliError::Validation(format!("input/output: {e}")),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.report().message)
    }
}
