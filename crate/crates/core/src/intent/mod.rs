//! Intent resolution: can a given intent be received by a component?
//!
//! Implicit intents are tested against a component's intent-filters on three
//! attributes, in this order:
//!
//! * **action** - the intent's action must be listed by the filter. An intent
//!   without an action passes as long as the filter lists at least one action.
//! * **category** - every category on the intent must be listed by the filter.
//! * **data** - an intent with neither URI nor MIME type only passes filters
//!   that declare no data at all. Otherwise one of the filter's data specs must
//!   accept both the URI (scheme, then authority, then path pattern) and the
//!   MIME type (`*` wildcard segments allowed).
//!
//! Explicit intents bypass filters entirely and match only their target.

pub mod table;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_model::AppModel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntentError {
    #[error("invalid data URI `{0}`")]
    InvalidUri(String),
    #[error("path pattern `{0}` has more than one `*`")]
    InvalidPathPattern(String),
    #[error("invalid component name `{0}`, expected `<app>/<class>`")]
    InvalidComponent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentName {
    pub app: String,
    pub class: String,
}

impl ComponentName {
    pub fn new(app: impl Into<String>, class: impl Into<String>) -> Self {
        ComponentName { app: app.into(), class: class.into() }
    }
}

impl fmt::Display for ComponentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.app, self.class)
    }
}

impl FromStr for ComponentName {
    type Err = IntentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((app, class)) if !app.is_empty() && !class.is_empty() => {
                Ok(ComponentName::new(app, class))
            }
            _ => Err(IntentError::InvalidComponent(s.to_string())),
        }
    }
}

/// A data URI split into the parts intent-filters test.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataUri {
    pub scheme: String,
    pub authority: Option<String>,
    pub path: Option<String>,
}

impl FromStr for DataUri {
    type Err = IntentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = s.split_once(':').ok_or_else(|| IntentError::InvalidUri(s.into()))?;
        if scheme.is_empty() {
            return Err(IntentError::InvalidUri(s.into()));
        }
        let (authority, path) = match rest.strip_prefix("//") {
            Some(hier) => match hier.find('/') {
                Some(i) => (Some(&hier[..i]), Some(&hier[i..])),
                None => (Some(hier), None),
            },
            None => (None, Some(rest)),
        };
        Ok(DataUri {
            scheme: scheme.to_string(),
            authority: authority.filter(|a| !a.is_empty()).map(str::to_string),
            path: path.filter(|p| !p.is_empty()).map(str::to_string),
        })
    }
}

impl fmt::Display for DataUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.scheme)?;
        if let Some(authority) = &self.authority {
            write!(f, "//{authority}")?;
        }
        if let Some(path) = &self.path {
            f.write_str(path)?;
        }
        Ok(())
    }
}

/// Literal (`/a/b`), prefix (`/a/*`) or single-glob (`/a/*.png`) path pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PathPattern(String);

impl PathPattern {
    pub fn matches(&self, path: &str) -> bool {
        match self.0.split_once('*') {
            None => self.0 == path,
            Some((prefix, suffix)) => {
                path.len() >= prefix.len() + suffix.len()
                    && path.starts_with(prefix)
                    && path.ends_with(suffix)
            }
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for PathPattern {
    type Err = IntentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.matches('*').count() > 1 {
            return Err(IntentError::InvalidPathPattern(s.to_string()));
        }
        Ok(PathPattern(s.to_string()))
    }
}

impl TryFrom<String> for PathPattern {
    type Error = IntentError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<PathPattern> for String {
    fn from(p: PathPattern) -> Self {
        p.0
    }
}

/// `type/subtype` matching where either segment of the pattern may be `*`.
pub fn mime_matches(pattern: &str, mime: &str) -> bool {
    if pattern == "*" || pattern == "*/*" {
        return true;
    }
    match (pattern.split_once('/'), mime.split_once('/')) {
        (Some((pt, ps)), Some((mt, ms))) => (pt == "*" || pt == mt) && (ps == "*" || ps == ms),
        _ => pattern == mime,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, rename = "host", skip_serializing_if = "Option::is_none")]
    pub authority: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mime: Option<String>,
}

impl DataSpec {
    fn declares_uri(&self) -> bool {
        self.scheme.is_some() || self.authority.is_some() || self.path.is_some()
    }

    fn accepts_uri(&self, uri: Option<&DataUri>) -> bool {
        let Some(uri) = uri else {
            return !self.declares_uri();
        };
        let Some(scheme) = &self.scheme else {
            return false;
        };
        if *scheme != uri.scheme {
            return false;
        }
        if let Some(authority) = &self.authority {
            if uri.authority.as_deref() != Some(authority.as_str()) {
                return false;
            }
        }
        match &self.path {
            Some(pattern) => uri.path.as_deref().is_some_and(|p| pattern.matches(p)),
            None => true,
        }
    }

    fn accepts_mime(&self, mime: Option<&str>) -> bool {
        match (mime, &self.mime) {
            (None, declared) => declared.is_none(),
            (Some(_), None) => false,
            (Some(m), Some(pattern)) => mime_matches(pattern, m),
        }
    }

    pub fn accepts(&self, uri: Option<&DataUri>, mime: Option<&str>) -> bool {
        self.accepts_uri(uri) && self.accepts_mime(mime)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Intent {
    pub action: Option<String>,
    pub categories: BTreeSet<String>,
    pub data_uri: Option<DataUri>,
    pub mime_type: Option<String>,
    pub explicit_target: Option<ComponentName>,
}

impl Intent {
    pub fn implicit(action: impl Into<String>) -> Self {
        Intent { action: Some(action.into()), ..Default::default() }
    }

    pub fn explicit(target: ComponentName) -> Self {
        Intent { explicit_target: Some(target), ..Default::default() }
    }

    pub fn is_explicit(&self) -> bool {
        self.explicit_target.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntentFilter {
    pub actions: BTreeSet<String>,
    pub categories: BTreeSet<String>,
    pub data_specs: Vec<DataSpec>,
    pub owner: ComponentName,
}

impl IntentFilter {
    pub fn new(owner: ComponentName) -> Self {
        IntentFilter {
            actions: BTreeSet::new(),
            categories: BTreeSet::new(),
            data_specs: Vec::new(),
            owner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentAttribute {
    Action,
    Category,
    Data,
}

impl fmt::Display for IntentAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntentAttribute::Action => "action",
            IntentAttribute::Category => "category",
            IntentAttribute::Data => "data",
        })
    }
}

impl FromStr for IntentAttribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "action" => Ok(IntentAttribute::Action),
            "category" => Ok(IntentAttribute::Category),
            "data" => Ok(IntentAttribute::Data),
            other => Err(format!("unknown intent attribute `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchVerdict {
    pub matched: bool,
    pub failed_attribute: Option<IntentAttribute>,
}

impl MatchVerdict {
    const MATCHED: MatchVerdict = MatchVerdict { matched: true, failed_attribute: None };

    fn failed(attribute: IntentAttribute) -> Self {
        MatchVerdict { matched: false, failed_attribute: Some(attribute) }
    }
}

pub fn match_intent(intent: &Intent, filter: &IntentFilter) -> MatchVerdict {
    if let Some(target) = &intent.explicit_target {
        return MatchVerdict { matched: *target == filter.owner, failed_attribute: None };
    }

    let action_ok = match &intent.action {
        Some(action) => filter.actions.contains(action),
        None => !filter.actions.is_empty(),
    };
    if !action_ok {
        return MatchVerdict::failed(IntentAttribute::Action);
    }

    if !intent.categories.is_subset(&filter.categories) {
        return MatchVerdict::failed(IntentAttribute::Category);
    }

    let data_ok = if intent.data_uri.is_none() && intent.mime_type.is_none() {
        filter.data_specs.is_empty()
    } else {
        filter
            .data_specs
            .iter()
            .any(|spec| spec.accepts(intent.data_uri.as_ref(), intent.mime_type.as_deref()))
    };
    if !data_ok {
        return MatchVerdict::failed(IntentAttribute::Data);
    }

    MatchVerdict::MATCHED
}

/// Every component across `apps` with at least one filter accepting `intent`,
/// sorted by (app id, class name) and without duplicates.
pub fn resolve_receivers(intent: &Intent, apps: &[AppModel]) -> Vec<ComponentName> {
    apps.iter()
        .flat_map(|app| app.intent_filters.iter())
        .filter(|filter| match_intent(intent, filter).matched)
        .map(|filter| filter.owner.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filter(actions: &[&str], categories: &[&str]) -> IntentFilter {
        let mut f = IntentFilter::new(ComponentName::new("appX", "MainActivity"));
        f.actions = actions.iter().map(|s| s.to_string()).collect();
        f.categories = categories.iter().map(|s| s.to_string()).collect();
        f
    }

    #[test]
    fn send_matches_default_filter() {
        let v = match_intent(&Intent::implicit("SEND"), &filter(&["SEND"], &["DEFAULT"]));
        assert_eq!(v, MatchVerdict { matched: true, failed_attribute: None });
    }

    #[test]
    fn browsable_category_missing() {
        let mut intent = Intent::implicit("VIEW");
        intent.categories.insert("BROWSABLE".into());
        let v = match_intent(&intent, &filter(&["VIEW"], &["DEFAULT"]));
        assert_eq!(v, MatchVerdict { matched: false, failed_attribute: Some(IntentAttribute::Category) });
    }

    #[test]
    fn explicit_bypasses_filters() {
        let intent = Intent::explicit(ComponentName::new("appX", "MainActivity"));
        let v = match_intent(&intent, &filter(&[], &[]));
        assert!(v.matched);
        let other = Intent::explicit(ComponentName::new("appY", "MainActivity"));
        let v = match_intent(&other, &filter(&["SEND"], &[]));
        assert_eq!(v, MatchVerdict { matched: false, failed_attribute: None });
    }

    #[test]
    fn empty_action_set_matches_no_implicit_intent() {
        let f = filter(&[], &[]);
        assert!(!match_intent(&Intent::implicit("SEND"), &f).matched);
        assert!(!match_intent(&Intent::default(), &f).matched);
    }

    #[test]
    fn action_failure_reported_before_category() {
        let mut intent = Intent::implicit("EDIT");
        intent.categories.insert("BROWSABLE".into());
        let v = match_intent(&intent, &filter(&["VIEW"], &[]));
        assert_eq!(v.failed_attribute, Some(IntentAttribute::Action));
    }

    #[test]
    fn uri_parsing() {
        let u: DataUri = "http://example.com/a/b".parse().unwrap();
        assert_eq!(u.scheme, "http");
        assert_eq!(u.authority.as_deref(), Some("example.com"));
        assert_eq!(u.path.as_deref(), Some("/a/b"));
        let tel: DataUri = "tel:123".parse().unwrap();
        assert_eq!(tel.authority, None);
        assert_eq!(tel.path.as_deref(), Some("123"));
        assert_eq!(tel.to_string(), "tel:123");
        assert!("nocolon".parse::<DataUri>().is_err());
    }

    #[test]
    fn path_patterns() {
        let literal: PathPattern = "/a/b".parse().unwrap();
        assert!(literal.matches("/a/b"));
        assert!(!literal.matches("/a/bc"));
        let prefix: PathPattern = "/a/*".parse().unwrap();
        assert!(prefix.matches("/a/"));
        assert!(prefix.matches("/a/xyz"));
        assert!(!prefix.matches("/b/xyz"));
        let glob: PathPattern = "/img/*.png".parse().unwrap();
        assert!(glob.matches("/img/cat.png"));
        assert!(!glob.matches("/img/cat.jpg"));
        // prefix and suffix must not overlap
        let tight: PathPattern = "ab*ba".parse().unwrap();
        assert!(!tight.matches("aba"));
        assert!("/a/*/b/*".parse::<PathPattern>().is_err());
    }

    #[test]
    fn mime_wildcards() {
        assert!(mime_matches("image/*", "image/png"));
        assert!(mime_matches("*/*", "text/plain"));
        assert!(!mime_matches("image/*", "text/plain"));
        assert!(mime_matches("text/plain", "text/plain"));
        assert!(!mime_matches("text/plain", "text/html"));
    }

    #[test]
    fn data_spec_requires_scheme_for_uri() {
        let mut intent = Intent::implicit("VIEW");
        intent.data_uri = Some("http://example.com/x".parse().unwrap());
        let mut with_scheme = filter(&["VIEW"], &[]);
        with_scheme.data_specs.push(DataSpec { scheme: Some("http".into()), ..Default::default() });
        let mut without = filter(&["VIEW"], &[]);
        without.data_specs.push(DataSpec { mime: Some("image/*".into()), ..Default::default() });
        assert!(match_intent(&intent, &with_scheme).matched);
        assert_eq!(match_intent(&intent, &without).failed_attribute, Some(IntentAttribute::Data));
    }
}
