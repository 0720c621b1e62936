use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AppModelError;

/// Method name plus ordered parameter types and (optional) return type.
///
/// Textual form is `[return-type ]name(type,type,...)`, e.g.
/// `void onCreate(android.os.Bundle)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MethodSignature {
    pub name: String,
    pub params: Vec<String>,
    pub return_type: Option<String>,
}

impl MethodSignature {
    pub fn new(name: impl Into<String>, params: Vec<String>, return_type: Option<String>) -> Self {
        MethodSignature { name: name.into(), params, return_type }
    }
}

pub(crate) fn split_params(inner: &str) -> Vec<String> {
    if inner.trim().is_empty() {
        return Vec::new();
    }
    inner.split(',').map(|p| p.trim().to_string()).collect()
}

impl FromStr for MethodSignature {
    type Err = AppModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AppModelError::BadSignature(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let head = s[..open].trim();
        let (return_type, name) = match head.rsplit_once(char::is_whitespace) {
            Some((ret, name)) => (Some(ret.trim().to_string()), name),
            None => (None, head),
        };
        if name.is_empty() || inner.contains('(') {
            return Err(bad());
        }
        Ok(MethodSignature { name: name.to_string(), params: split_params(inner), return_type })
    }
}

impl TryFrom<String> for MethodSignature {
    type Error = AppModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<MethodSignature> for String {
    fn from(sig: MethodSignature) -> Self {
        sig.to_string()
    }
}

impl fmt::Display for MethodSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(ret) = &self.return_type {
            write!(f, "{ret} ")?;
        }
        write!(f, "{}({})", self.name, self.params.join(","))
    }
}

/// Parses a Jimple method reference `<pkg.Class: ret name(types)>` into its
/// class and signature. Leading/trailing text around the brackets is not allowed.
pub fn parse_jimple_method(s: &str) -> Option<(String, MethodSignature)> {
    let inner = s.trim().strip_prefix('<')?.strip_suffix('>')?;
    let (class, sig) = inner.split_once(": ")?;
    let sig: MethodSignature = sig.parse().ok()?;
    Some((class.trim().to_string(), sig))
}

/// Finds the first embedded Jimple method reference in a statement, e.g. the
/// `<android.telephony.TelephonyManager: java.lang.String getDeviceId()>` in
/// `$r4 = virtualinvoke $r3.<...>()`.
pub fn find_jimple_method(text: &str) -> Option<(String, MethodSignature)> {
    text.match_indices('<').find_map(|(start, _)| {
        let rest = &text[start..];
        let close_paren = rest.find(')')?;
        let end = close_paren + rest[close_paren..].find('>')?;
        parse_jimple_method(&rest[..=end])
    })
}
