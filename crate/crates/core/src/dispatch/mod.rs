//! Routing of queries to external analysis tools.
//!
//! A [`Config`] lists the available tools and what they can answer.
//! [`select_tool`] picks one per query; [`Dispatcher::execute`] runs it under
//! a timeout, converts its output and caches the final answer.

mod cache;
mod config;
mod exec;
mod process;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_model::AppModelError;
use crate::aql::{AqlError, Answer, QueryAst, Subject};

pub use cache::{cache_key, AnswerCache};
pub use config::{
    default_config_path, load_config, parse_config, Config, Preprocessor, QueryCapability, Scope, ToolSpec,
    CONFIG_ENV, DEFAULT_CONFIG_FILE, DEFAULT_MEMORY_MB, DEFAULT_TIMEOUT_SLACK,
};
pub use exec::{Dispatcher, BUILTIN_COMBINE};

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("config syntax: {0}")]
    ConfigSyntax(String),
    #[error("config names unknown converter `{0}`")]
    UnknownConverter(String),
    #[error("tool `{0}` is declared twice")]
    DuplicateTool(String),
    #[error("command template of `{tool}` lacks {placeholder}")]
    MissingPlaceholder { tool: String, placeholder: String },
    #[error("no tool can answer {subject} queries ({scope})")]
    NoCapableTool { subject: Subject, scope: Scope },
    #[error("query names app `{0}` which is not loaded")]
    UnknownApp(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    App(#[from] AppModelError),
    #[error(transparent)]
    Query(#[from] AqlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Success,
    NonZeroExit,
    Timeout,
    ConversionFailure,
}

impl RunStatus {
    pub fn is_success(self) -> bool {
        self == RunStatus::Success
    }
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

/// Record of one tool execution, or of a cache hit standing in for one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolRun {
    pub tool: String,
    pub exit_status: RunStatus,
    pub wall_time: Duration,
    pub raw_output_path: PathBuf,
    /// Present iff `exit_status` is `Success`.
    pub answer: Option<Answer>,
    pub cached: bool,
    /// Exit code, converter error or preprocessor failure.
    pub detail: Option<String>,
}

/// The tool chosen for a query, plus the preprocessor lifting it to the
/// query's scope when the tool alone does not cover it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolPlan {
    pub tool: ToolSpec,
    pub preprocessor: Option<Preprocessor>,
    pub scope: Scope,
}

/// InterApp when the main clause names two or more distinct apps.
pub fn query_scope(query: &QueryAst) -> Scope {
    if query.app_files().len() >= 2 {
        Scope::InterApp
    } else {
        Scope::IntraApp
    }
}

fn best_tool(config: &Config, subject: Subject, scope: Scope) -> Option<&ToolSpec> {
    // max_by_key keeps the last maximum, so iterate in reverse to let the
    // earliest registered tool win ties.
    config.tools.iter().rev().filter(|t| t.covers(subject, scope)).max_by_key(|t| t.priority)
}

pub fn select_tool(query: &QueryAst, config: &Config) -> Result<ToolPlan, DispatchError> {
    select_for(query.subject, query_scope(query), config)
}

pub fn select_for(subject: Subject, scope: Scope, config: &Config) -> Result<ToolPlan, DispatchError> {
    if let Some(tool) = best_tool(config, subject, scope) {
        return Ok(ToolPlan { tool: tool.clone(), preprocessor: None, scope });
    }
    if scope == Scope::InterApp {
        let pre = config.preprocessors.iter().find(|p| p.applies_when == Scope::InterApp);
        if let (Some(pre), Some(tool)) = (pre, best_tool(config, subject, Scope::IntraApp)) {
            return Ok(ToolPlan { tool: tool.clone(), preprocessor: Some(pre.clone()), scope });
        }
    }
    Err(DispatchError::NoCapableTool { subject, scope })
}
