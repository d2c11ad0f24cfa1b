use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Queued,
    Ingesting,
    Scheduling,
    Inferring,
    Scoring,
    Complete,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Complete | Phase::Failed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub done: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub phase: Phase,
    pub progress: Progress,
    pub started: Option<DateTime<Utc>>,
    pub finished: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunState {
    pub fn queued(run_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            phase: Phase::Queued,
            progress: Progress::default(),
            started: None,
            finished: None,
            error: None,
        }
    }

    /// Applies an update; phases never move backwards and a terminal phase
    /// is final. Returns whether anything changed.
    pub fn apply(&mut self, phase: Phase, progress: Progress) -> bool {
        if self.phase.is_terminal() || phase < self.phase {
            return false;
        }
        let before = (self.phase, self.progress);
        if self.started.is_none() && phase > Phase::Queued {
            self.started = Some(Utc::now());
        }
        self.phase = phase;
        self.progress = Progress {
            done: progress.done.min(progress.total),
            total: progress.total,
        };
        if phase.is_terminal() {
            self.finished = Some(Utc::now());
        }
        before != (self.phase, self.progress)
    }

    pub fn fail(&mut self, error: impl Into<String>) {
        if self.phase.is_terminal() {
            return;
        }
        self.phase = Phase::Failed;
        self.error = Some(error.into());
        self.finished = Some(Utc::now());
    }
}
