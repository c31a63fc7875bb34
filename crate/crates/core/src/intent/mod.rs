//! Query understanding: five intent categories, prompt construction for a
//! pluggable language-model client, and a rule-based backend that doubles as
//! the offline oracle.

mod backend;
mod classify;
mod prompt;
mod remote;
pub mod replies;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guide::TravelMode;

pub use backend::{BackendError, Completion, CompletionRequest, LlmClient, RuleBackend, ScriptedBackend};
pub use classify::{
    classify_rule_based, parse_action_response, persona_request, render_action, suggest_object, ACTION_MARKER,
};
pub use prompt::{
    build_bundle, build_system_prompt, capture_context, refresh_context, ContextBlock, ContextViews, PromptBundle,
    CONTEXT_REFRESH_INTERVAL,
};
pub use remote::RemoteBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    HolisticDescription,
    VisualQuestion,
    GoTo,
    AddBeacon,
    Other,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::HolisticDescription => "holistic_description",
            Category::VisualQuestion => "visual_question",
            Category::GoTo => "go_to",
            Category::AddBeacon => "add_beacon",
            Category::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "snake_case")]
pub enum Intent {
    HolisticDescription,
    VisualQuestion { subject: Option<String> },
    GoTo { object: String, mode: TravelMode },
    AddBeacon { object: String },
    Other,
}

impl Intent {
    pub fn category(&self) -> Category {
        match self {
            Intent::HolisticDescription => Category::HolisticDescription,
            Intent::VisualQuestion { .. } => Category::VisualQuestion,
            Intent::GoTo { .. } => Category::GoTo,
            Intent::AddBeacon { .. } => Category::AddBeacon,
            Intent::Other => Category::Other,
        }
    }

    /// Object the intent refers to, if any.
    pub fn object(&self) -> Option<&str> {
        match self {
            Intent::VisualQuestion { subject } => subject.as_deref(),
            Intent::GoTo { object, .. } | Intent::AddBeacon { object } => Some(object),
            _ => None,
        }
    }

    pub fn mode(&self) -> Option<TravelMode> {
        match self {
            Intent::GoTo { mode, .. } => Some(*mode),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("empty query")]
    EmptyQuery,
    #[error("ambiguous reference, candidates: {}", candidates.join(", "))]
    AmbiguousReference { candidates: Vec<String> },
    #[error("nothing in the scene matches `{query}`")]
    UnknownReference { query: String },
}

impl ClassifyError {
    pub fn code(&self) -> &'static str {
        match self {
            ClassifyError::EmptyQuery => "empty_query",
            ClassifyError::AmbiguousReference { .. } => "ambiguous_reference",
            ClassifyError::UnknownReference { .. } => "unknown_reference",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("`{given}` is not a listed object name{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    NonCanonicalName { given: String, suggestion: Option<String> },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action line `{0}` is not `<name>, <action>`")]
    Malformed(String),
}

/// Splits a model reply into the text to surface and its trailing action line.
pub fn split_action_line(text: &str) -> (String, Option<String>) {
    let mut lines: Vec<&str> = text.trim_end().lines().collect();
    let action = lines
        .iter()
        .rposition(|l| l.trim_start().get(..ACTION_MARKER.len()).is_some_and(|p| p.eq_ignore_ascii_case(ACTION_MARKER)))
        .map(|i| lines.remove(i).trim().to_owned());
    (lines.join("\n").trim().to_owned(), action)
}
