use std::fmt;

/// A single violated configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: &'static str,
    pub constraint: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

/// Solver stage that produced an infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Placement,
    Compute,
    Power,
    Phase,
    Comm,
    Bcd,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Placement => "placement",
            Stage::Compute => "compute",
            Stage::Power => "power",
            Stage::Phase => "phase",
            Stage::Comm => "comm",
            Stage::Bcd => "bcd",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_issues(.0))]
    InvalidConfig(Vec<ConfigIssue>),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("distance {0} m is inside the 1 m reference distance")]
    InsideReferenceDistance(f64),

    #[error("beamformer for user {0} is all-zero")]
    ZeroBeamformer(usize),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("infeasible at {stage} stage: {reason}")]
    Infeasible { stage: Stage, reason: String },

    #[error("phase shift is not feasible: {0}")]
    InfeasiblePhase(String),

    #[error("replay file: {0}")]
    Replay(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn infeasible(stage: Stage, reason: impl Into<String>) -> Self {
        Error::Infeasible {
            stage,
            reason: reason.into(),
        }
    }

    /// Re-tags an infeasibility with the stage that surfaced it.
    pub fn at_stage(self, stage: Stage) -> Self {
        match self {
            Error::Infeasible { stage: inner, reason } if inner != stage => Error::Infeasible {
                stage,
                reason: format!("{inner}: {reason}"),
            },
            other => other,
        }
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
