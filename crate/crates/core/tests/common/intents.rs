//! Random intents and filters with an independent statement of the rules.

use std::collections::BTreeSet;

use aql_core::app_model::{AppModel, HashOrigin};
use aql_core::intent::{match_intent, resolve_receivers, ComponentName, DataSpec, DataUri, Intent, IntentFilter};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

const ACTIONS: &[&str] = &["SEND", "VIEW", "EDIT"];
const CATEGORIES: &[&str] = &["DEFAULT", "BROWSABLE", "LAUNCHER"];
const SCHEMES: &[&str] = &["http", "content"];
const HOSTS: &[&str] = &["a.com", "b.com"];
const PATHS: &[&str] = &["/x", "/img/cat.png", "/docs/a"];
const PATTERNS: &[&str] = &["/x", "/img/*", "/img/*.png", "/docs/*", "*"];
const MIMES: &[&str] = &["image/png", "text/plain"];
const MIME_PATTERNS: &[&str] = &["image/png", "image/*", "*/*", "text/*"];
pub const APPS: &[&str] = &["appA", "appB", "appC"];
const CLASSES: &[&str] = &["Main", "Share"];

fn pick<'a>(rng: &mut StdRng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn maybe<'a>(rng: &mut StdRng, xs: &[&'a str]) -> Option<&'a str> {
    rng.gen_bool(0.5).then(|| pick(rng, xs))
}

fn subset(rng: &mut StdRng, xs: &[&str]) -> BTreeSet<String> {
    xs.iter().filter(|_| rng.gen_bool(0.4)).map(|s| s.to_string()).collect()
}

pub fn random_intent(rng: &mut StdRng) -> Intent {
    if rng.gen_bool(0.1) {
        return Intent::explicit(ComponentName::new(pick(rng, APPS), pick(rng, CLASSES)));
    }
    let data_uri = rng.gen_bool(0.5).then(|| DataUri {
        scheme: pick(rng, SCHEMES).to_string(),
        authority: maybe(rng, HOSTS).map(str::to_string),
        path: maybe(rng, PATHS).map(str::to_string),
    });
    Intent {
        action: maybe(rng, ACTIONS).map(str::to_string),
        categories: subset(rng, CATEGORIES),
        data_uri,
        mime_type: maybe(rng, MIMES).map(str::to_string),
        explicit_target: None,
    }
}

pub fn random_filter(rng: &mut StdRng, app: &str) -> IntentFilter {
    let mut f = IntentFilter::new(ComponentName::new(app, pick(rng, CLASSES)));
    f.actions = subset(rng, ACTIONS);
    f.categories = subset(rng, CATEGORIES);
    for _ in 0..rng.gen_range(0..3) {
        f.data_specs.push(DataSpec {
            scheme: maybe(rng, SCHEMES).map(str::to_string),
            authority: maybe(rng, HOSTS).map(str::to_string),
            path: maybe(rng, PATTERNS).map(|p| p.parse().unwrap()),
            mime: maybe(rng, MIME_PATTERNS).map(str::to_string),
        });
    }
    f
}

pub fn app_with(id: &str, filters: Vec<IntentFilter>) -> AppModel {
    AppModel {
        id: id.to_string(),
        file: format!("{id}.apk"),
        hashes: vec![],
        hash_origin: HashOrigin::Sidecar,
        classes: vec![],
        intent_filters: filters,
        declared_api_level: None,
    }
}

/// Pattern semantics restated from scratch: `*` stands for any run of
/// characters, at most once.
fn glob(pattern: &str, s: &str) -> bool {
    match pattern.find('*') {
        None => pattern == s,
        Some(i) => {
            let (pre, post) = (&pattern[..i], &pattern[i + 1..]);
            s.starts_with(pre) && (pre.len()..=s.len()).any(|cut| &s[cut..] == post)
        }
    }
}

fn mime_ok(pattern: &str, mime: &str) -> bool {
    let p: Vec<&str> = pattern.split('/').collect();
    let m: Vec<&str> = mime.split('/').collect();
    p.len() == 2 && m.len() == 2 && (p[0] == "*" || p[0] == m[0]) && (p[1] == "*" || p[1] == m[1])
}

fn spec_ok(spec: &DataSpec, intent: &Intent) -> bool {
    let uri_ok = match &intent.data_uri {
        None => spec.scheme.is_none() && spec.authority.is_none() && spec.path.is_none(),
        Some(u) => {
            spec.scheme.as_deref() == Some(u.scheme.as_str())
                && spec.authority.as_ref().is_none_or(|h| u.authority.as_ref() == Some(h))
                && spec.path.as_ref().is_none_or(|p| u.path.as_deref().is_some_and(|path| glob(p.as_str(), path)))
        }
    };
    let type_ok = match (&intent.mime_type, &spec.mime) {
        (None, m) => m.is_none(),
        (Some(t), Some(p)) => mime_ok(p, t),
        (Some(_), None) => false,
    };
    uri_ok && type_ok
}

/// Independent restatement of the receive rules.
pub fn receives(intent: &Intent, f: &IntentFilter) -> bool {
    if let Some(t) = &intent.explicit_target {
        return *t == f.owner;
    }
    let action = intent.action.as_ref().map_or(!f.actions.is_empty(), |a| f.actions.contains(a));
    let categories = intent.categories.iter().all(|c| f.categories.contains(c));
    let data = if intent.data_uri.is_none() && intent.mime_type.is_none() {
        f.data_specs.is_empty()
    } else {
        f.data_specs.iter().any(|s| spec_ok(s, intent))
    };
    action && categories && data
}

/// Checks `resolve_receivers` against the brute-force owner set on random
/// instances. Returns how many instances had at least one receiver.
pub fn check_receivers(rng: &mut StdRng, instances: usize) -> Result<usize, String> {
    let mut nonempty = 0;
    for _ in 0..instances {
        let intent = random_intent(rng);
        let apps: Vec<AppModel> = APPS[..rng.gen_range(1..=APPS.len())]
            .iter()
            .map(|id| {
                let n = rng.gen_range(0..4);
                let filters = (0..n).map(|_| random_filter(rng, id)).collect();
                app_with(id, filters)
            })
            .collect();
        let mut oracle = BTreeSet::new();
        for f in apps.iter().flat_map(|a| &a.intent_filters) {
            if match_intent(&intent, f).matched != receives(&intent, f) {
                return Err(format!("match_intent disagrees on {intent:?} vs {f:?}"));
            }
            if receives(&intent, f) {
                oracle.insert(f.owner.clone());
            }
        }
        let got = resolve_receivers(&intent, &apps);
        if got != oracle.into_iter().collect::<Vec<_>>() {
            return Err(format!("resolve_receivers disagrees on {intent:?}"));
        }
        nonempty += usize::from(!got.is_empty());
    }
    Ok(nonempty)
}
