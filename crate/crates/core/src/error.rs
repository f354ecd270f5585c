use chrono::NaiveDate;
use thiserror::Error;

use crate::ingest::Fips;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("county {county} has no USDM row for week {week}")]
    MissingWeek { county: Fips, week: NaiveDate },

    #[error("unknown county {0}")]
    UnknownCounty(Fips),

    #[error("self-loop declared for county {0}")]
    SelfLoop(Fips),

    #[error("config: {0}")]
    Config(String),

    #[error("resampling: {0}")]
    Resample(String),

    #[error("training: {0}")]
    Train(String),

    #[error("column layout mismatch: {0}")]
    Layout(String),

    #[error("leakage detected: {0}")]
    Leakage(String),

    #[error("forecast for {target} read week {read}, past the cutoff {cutoff}")]
    Causality {
        target: NaiveDate,
        cutoff: NaiveDate,
        read: NaiveDate,
    },

    #[error("task {task}: {source}")]
    Task {
        task: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (files, config, flags) as
    /// opposed to failures while running a valid job.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Invalid(_)
            | Error::MissingWeek { .. }
            | Error::UnknownCounty(_)
            | Error::SelfLoop(_)
            | Error::Config(_)
            | Error::Csv(_) => true,
            Error::Task { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn in_task(self, task: impl Into<String>) -> Self {
        Error::Task {
            task: task.into(),
            source: Box::new(self),
        }
    }
}
