//! Query language, answer format, tool dispatch and benchmark evaluation for
//! Android taint-analysis tools.

pub mod app_model;
pub mod aql;
pub mod bench;
pub mod converters;
pub mod dispatch;
pub mod intent;
pub mod session;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How strictly method invocations are compared.
///
/// `Exact` compares full statements (or callee name plus parameter types);
/// `NameOnly` compares callee names and ignores parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strictness {
    #[default]
    Exact,
    NameOnly,
}

impl fmt::Display for Strictness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strictness::Exact => "exact",
            Strictness::NameOnly => "name-only",
        })
    }
}

impl FromStr for Strictness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Strictness::Exact),
            "name-only" | "nameonly" => Ok(Strictness::NameOnly),
            other => Err(format!("unknown strictness `{other}` (expected exact|name-only)")),
        }
    }
}
