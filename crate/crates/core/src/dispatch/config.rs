//! Tool registry configuration.
//!
//! ```xml
//! <config>
//!   <tools>
//!     <tool name="FlowDroid" version="2.5" priority="10">
//!       <execute>run-flowdroid.sh %APP% %MEMORY% %OUT%</execute>
//!       <capabilities><capability subject="Flows" scope="IntraApp"/></capabilities>
//!       <converter id="sink-xml"/>
//!       <timeout seconds="600"/>
//!       <memory mb="30720"/>
//!     </tool>
//!   </tools>
//!   <preprocessors>
//!     <preprocessor name="combiner" applies-when="InterApp">
//!       <execute>builtin:combine %APPS% %OUT%</execute>
//!     </preprocessor>
//!   </preprocessors>
//!   <cache dir="cache"/>
//! </config>
//! ```
//!
//! Relative paths (cache dir, commands' working directory) are anchored at
//! the config file's directory.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use super::DispatchError;
use crate::aql::Subject;
use crate::converters::ConverterRegistry;

pub const CONFIG_ENV: &str = "AQL_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "config.xml";
pub const DEFAULT_TIMEOUT_SLACK: Duration = Duration::from_secs(2);

/// `$AQL_CONFIG` if set, else `config.xml` in the working directory.
pub fn default_config_path() -> PathBuf {
    std::env::var_os(CONFIG_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG_FILE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    IntraApp,
    InterApp,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::IntraApp => "IntraApp",
            Scope::InterApp => "InterApp",
        })
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IntraApp" => Ok(Scope::IntraApp),
            "InterApp" => Ok(Scope::InterApp),
            other => Err(format!("unknown scope `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QueryCapability {
    pub subject: Subject,
    pub scope: Scope,
}

impl fmt::Display for QueryCapability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.subject, self.scope)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub version: String,
    pub priority: i32,
    pub run_template: String,
    pub capabilities: BTreeSet<QueryCapability>,
    pub converter_id: String,
    pub timeout: Duration,
    pub memory_hint_mb: u64,
}

impl ToolSpec {
    pub fn covers(&self, subject: Subject, scope: Scope) -> bool {
        self.capabilities.contains(&QueryCapability { subject, scope })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub name: String,
    pub run_template: String,
    pub applies_when: Scope,
}

#[derive(Debug, Clone)]
pub struct Config {
    /// In registry order; later ties lose.
    pub tools: Vec<ToolSpec>,
    pub preprocessors: Vec<Preprocessor>,
    pub cache_dir: PathBuf,
    /// Working directory for tool commands.
    pub base_dir: PathBuf,
    pub timeout_slack: Duration,
}

impl Config {
    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }
}

pub const DEFAULT_MEMORY_MB: u64 = 4096;

fn syntax(node: Node, msg: impl fmt::Display) -> DispatchError {
    let pos = node.document().text_pos_at(node.range().start);
    DispatchError::ConfigSyntax(format!("{}:{}: {msg}", pos.row, pos.col))
}

fn attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, DispatchError> {
    node.attribute(name)
        .ok_or_else(|| syntax(node, format!("<{}> lacks attribute `{name}`", node.tag_name().name())))
}

fn children<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(move |c| c.is_element() && c.tag_name().name() == name)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> Option<Node<'a, 'i>> {
    children(node, name).next()
}

fn execute_text(node: Node) -> Result<String, DispatchError> {
    let exec = child(node, "execute").ok_or_else(|| syntax(node, "missing <execute>"))?;
    Ok(exec.text().unwrap_or_default().trim().to_string())
}

fn parse_tool(node: Node, registry: &ConverterRegistry) -> Result<ToolSpec, DispatchError> {
    let name = attr(node, "name")?.to_string();
    let version = node.attribute("version").unwrap_or("").to_string();
    let priority = match node.attribute("priority") {
        Some(p) => p.trim().parse().map_err(|_| syntax(node, format!("priority `{p}` is not an integer")))?,
        None => 0,
    };
    let run_template = execute_text(node)?;
    if !run_template.contains("%APP%") {
        return Err(DispatchError::MissingPlaceholder { tool: name, placeholder: "%APP%".into() });
    }
    let mut capabilities = BTreeSet::new();
    for caps in children(node, "capabilities") {
        for cap in children(caps, "capability") {
            let subject = attr(cap, "subject")?;
            let subject = Subject::from_keyword(subject).ok_or_else(|| syntax(cap, format!("unknown subject `{subject}`")))?;
            let scope: Scope = attr(cap, "scope")?.parse().map_err(|e| syntax(cap, e))?;
            capabilities.insert(QueryCapability { subject, scope });
        }
    }
    let converter = child(node, "converter").ok_or_else(|| syntax(node, "missing <converter>"))?;
    let converter_id = attr(converter, "id")?.to_string();
    if !registry.contains(&converter_id) {
        return Err(DispatchError::UnknownConverter(converter_id));
    }
    let timeout = match child(node, "timeout") {
        Some(t) => {
            let secs: f64 = attr(t, "seconds")?
                .trim()
                .parse()
                .map_err(|_| syntax(t, "timeout seconds must be a number"))?;
            if !(secs.is_finite() && secs > 0.0) {
                return Err(syntax(t, "timeout must be positive"));
            }
            Duration::from_secs_f64(secs)
        }
        None => return Err(syntax(node, "missing <timeout>")),
    };
    let memory_hint_mb = match child(node, "memory") {
        Some(m) => attr(m, "mb")?.trim().parse().map_err(|_| syntax(m, "memory mb must be an integer"))?,
        None => DEFAULT_MEMORY_MB,
    };
    Ok(ToolSpec { name, version, priority, run_template, capabilities, converter_id, timeout, memory_hint_mb })
}

pub fn parse_config(text: &str, base_dir: &Path, registry: &ConverterRegistry) -> Result<Config, DispatchError> {
    let doc = Document::parse(text).map_err(|e| DispatchError::ConfigSyntax(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "config" {
        return Err(syntax(root, "root element must be <config>"));
    }
    let mut tools = Vec::new();
    let mut names = HashSet::new();
    for list in children(root, "tools") {
        for node in children(list, "tool") {
            let tool = parse_tool(node, registry)?;
            if !names.insert(tool.name.clone()) {
                return Err(DispatchError::DuplicateTool(tool.name));
            }
            tools.push(tool);
        }
    }
    let mut preprocessors = Vec::new();
    for list in children(root, "preprocessors") {
        for node in children(list, "preprocessor") {
            let run_template = execute_text(node)?;
            if !run_template.contains("%OUT%") {
                return Err(DispatchError::MissingPlaceholder {
                    tool: attr(node, "name")?.to_string(),
                    placeholder: "%OUT%".into(),
                });
            }
            preprocessors.push(Preprocessor {
                name: attr(node, "name")?.to_string(),
                run_template,
                applies_when: attr(node, "applies-when")?.parse().map_err(|e| syntax(node, e))?,
            });
        }
    }
    let cache_dir = match child(root, "cache") {
        Some(c) => base_dir.join(attr(c, "dir")?),
        None => base_dir.join("cache"),
    };
    Ok(Config {
        tools,
        preprocessors,
        cache_dir,
        base_dir: base_dir.to_path_buf(),
        timeout_slack: DEFAULT_TIMEOUT_SLACK,
    })
}

pub fn load_config(path: &Path, registry: &ConverterRegistry) -> Result<Config, DispatchError> {
    let text = std::fs::read_to_string(path).map_err(|source| DispatchError::Io { path: path.to_path_buf(), source })?;
    // Absolute, since tools run with the config dir as cwd and get cache paths as arguments.
    let abs = std::path::absolute(path).map_err(|source| DispatchError::Io { path: path.to_path_buf(), source })?;
    let base = abs.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("/"));
    parse_config(&text, &base, registry)
}
