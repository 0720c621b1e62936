use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use super::cache::{cache_key, AnswerCache};
use super::config::Config;
use super::process::{self, Outcome};
use super::{select_tool, DispatchError, RunStatus, ToolPlan, ToolRun};
use crate::app_model::{combine_apps, ingest_app, ingest_app_bytes, AppModel, IngestOptions, SidecarFormat};
use crate::aql::{apply_post_ops, deserialize_answer, serialize_answer, Answer, Flow, PostOp, QueryAst, Reference};
use crate::converters::ConverterRegistry;

/// Preprocessor command handled in-process: merges the sidecar models of the
/// query's apps into one app.
pub const BUILTIN_COMBINE: &str = "builtin:combine %APPS% %OUT%";

/// Executes queries against a configuration, a converter registry and a
/// catalog of loaded apps.
pub struct Dispatcher {
    config: Config,
    converters: Arc<ConverterRegistry>,
    apps: RwLock<Vec<AppModel>>,
    cache: AnswerCache,
    tool_locks: HashMap<String, Mutex<()>>,
    launches: AtomicUsize,
}

struct Prepared {
    /// Value of %APP%.
    app_files: Vec<String>,
    /// Models the converter resolves against.
    context: Vec<AppModel>,
    combined: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DispatchError + '_ {
    move |source| DispatchError::Io { path: path.to_path_buf(), source }
}

/// Splits a template into argv and substitutes placeholders. A token that is
/// exactly a multi-valued placeholder expands into one argument per value.
fn expand(template: &str, vars: &[(&str, &[String])]) -> Result<Vec<String>, String> {
    let tokens = shell_words::split(template).map_err(|e| format!("bad command template: {e}"))?;
    let mut argv = Vec::new();
    for token in tokens {
        if let Some((_, values)) = vars.iter().find(|(name, _)| *name == token) {
            argv.extend(values.iter().cloned());
            continue;
        }
        let mut arg = token;
        for (name, values) in vars {
            if arg.contains(name) {
                arg = arg.replace(name, &values.join(" "));
            }
        }
        argv.push(arg);
    }
    Ok(argv)
}

impl Dispatcher {
    pub fn new(config: Config, converters: Arc<ConverterRegistry>) -> Self {
        let tool_locks = config.tools.iter().map(|t| (t.name.clone(), Mutex::new(()))).collect();
        let cache = AnswerCache::new(config.cache_dir.clone());
        Dispatcher {
            config,
            converters,
            apps: RwLock::new(Vec::new()),
            cache,
            tool_locks,
            launches: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn converters(&self) -> &ConverterRegistry {
        &self.converters
    }

    pub fn cache(&self) -> &AnswerCache {
        &self.cache
    }

    /// External processes started so far (tools and external preprocessors).
    pub fn launches(&self) -> usize {
        self.launches.load(Ordering::SeqCst)
    }

    /// Adds an app, replacing any loaded app with the same id.
    pub fn add_app(&self, app: AppModel) {
        let mut apps = self.apps.write().expect("catalog lock poisoned");
        apps.retain(|a| a.id != app.id);
        apps.push(app);
    }

    pub fn apps(&self) -> Vec<AppModel> {
        self.apps.read().expect("catalog lock poisoned").clone()
    }

    /// Finds a loaded app by declared file, file name or id.
    pub fn find_app(&self, name: &str) -> Option<AppModel> {
        let apps = self.apps.read().expect("catalog lock poisoned");
        let base = |s: &str| Path::new(s).file_name().map(|f| f.to_owned());
        apps.iter()
            .find(|a| a.file == name || a.id == name)
            .or_else(|| apps.iter().find(|a| base(&a.file).is_some() && base(&a.file) == base(name)))
            .cloned()
    }

    fn query_apps(&self, query: &QueryAst) -> Result<Vec<AppModel>, DispatchError> {
        query
            .app_files()
            .into_iter()
            .map(|f| self.find_app(f).ok_or_else(|| DispatchError::UnknownApp(f.to_string())))
            .collect()
    }

    /// Runs `query` (or serves it from the cache). Tool failures are reported
    /// through the returned [`ToolRun`] with an empty answer; errors are
    /// reserved for routing, unknown apps and I/O on our own files.
    pub fn execute(&self, query: &QueryAst) -> Result<(Answer, ToolRun), DispatchError> {
        let plan = select_tool(query, &self.config)?;
        let apps = self.query_apps(query)?;
        let hashes: Vec<String> = apps.iter().filter_map(|a| a.sha256()).map(|h| h.value.clone()).collect();
        let key = cache_key(query, &plan.tool.name, &plan.tool.version, &hashes);

        if let Some(bytes) = self.cache.get(&key) {
            // A corrupt entry is treated as a miss and overwritten below.
            if let Ok(answer) = deserialize_answer(&bytes) {
                let run = ToolRun {
                    tool: plan.tool.name.clone(),
                    exit_status: RunStatus::Success,
                    wall_time: Duration::ZERO,
                    raw_output_path: self.cache.path_for(&key),
                    answer: Some(answer.clone()),
                    cached: true,
                    detail: None,
                };
                return Ok((answer, run));
            }
        }

        let mut auxiliary = HashMap::new();
        for op in &query.post_ops {
            if let PostOp::Unify(sub) = op {
                let (answer, _) = self.execute(sub)?;
                auxiliary.insert(sub.as_ref().clone(), answer);
            }
        }

        let mut run = self.run_plan(&plan, &apps, &key)?;
        let Some(tool_answer) = run.answer.take() else {
            return Ok((Answer::new(), run));
        };
        let answer = apply_post_ops(&tool_answer, &query.post_ops, &auxiliary)?;
        let bytes = serialize_answer(&answer);
        self.cache.put(&key, &bytes).map_err(io_err(self.cache.dir()))?;
        run.answer = Some(answer.clone());
        Ok((answer, run))
    }

    fn run_dir(&self, key: &str) -> Result<PathBuf, DispatchError> {
        let dir = self.config.cache_dir.join("runs").join(&key[..16]);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(dir)
    }

    fn run_plan(&self, plan: &ToolPlan, apps: &[AppModel], key: &str) -> Result<ToolRun, DispatchError> {
        let tool = &plan.tool;
        let run_dir = self.run_dir(key)?;
        let failed = |status, wall_time, raw: PathBuf, detail: String| ToolRun {
            tool: tool.name.clone(),
            exit_status: status,
            wall_time,
            raw_output_path: raw,
            answer: None,
            cached: false,
            detail: Some(detail),
        };

        let prepared = match &plan.preprocessor {
            None => Prepared {
                app_files: apps.iter().map(|a| a.file.clone()).collect(),
                context: apps.to_vec(),
                combined: false,
            },
            Some(pre) => match self.preprocess(&pre.run_template, apps, &run_dir) {
                Ok(combined) => Prepared { app_files: vec![combined.file.clone()], context: vec![combined], combined: true },
                Err(message) => {
                    let detail = format!("preprocessor `{}` failed: {message}", pre.name);
                    return Ok(failed(RunStatus::NonZeroExit, Duration::ZERO, run_dir, detail));
                }
            },
        };

        let out_path = run_dir.join("result.out");
        let stdout_path = run_dir.join("stdout.log");
        let stderr_path = run_dir.join("stderr.log");
        let _ = fs::remove_file(&out_path);
        let memory = [tool.memory_hint_mb.to_string()];
        let out = [out_path.display().to_string()];
        let argv = match expand(
            &tool.run_template,
            &[("%APP%", &prepared.app_files), ("%MEMORY%", &memory), ("%OUT%", &out)],
        ) {
            Ok(argv) => argv,
            Err(message) => return Ok(failed(RunStatus::NonZeroExit, Duration::ZERO, stdout_path, message)),
        };

        let outcome = {
            let _single_flight = self.tool_locks.get(&tool.name).map(|m| m.lock().expect("tool lock poisoned"));
            self.launches.fetch_add(1, Ordering::SeqCst);
            process::run(&argv, &self.config.base_dir, &stdout_path, &stderr_path, tool.timeout)
        };
        let (outcome, wall_time) = match outcome {
            Ok(r) => r,
            Err(e) => {
                let detail = format!("cannot launch `{}`: {e}", argv.first().map(String::as_str).unwrap_or(""));
                return Ok(failed(RunStatus::NonZeroExit, Duration::ZERO, stdout_path, detail));
            }
        };
        let raw_path = if out_path.exists() { out_path } else { stdout_path };
        match outcome {
            Outcome::Exited(0) => {}
            Outcome::Exited(code) => {
                return Ok(failed(RunStatus::NonZeroExit, wall_time, raw_path, format!("exit code {code}")))
            }
            Outcome::Signaled => {
                return Ok(failed(RunStatus::NonZeroExit, wall_time, raw_path, "killed by signal".into()))
            }
            Outcome::TimedOut => {
                let detail = format!("timed out after {:?}", tool.timeout);
                return Ok(failed(RunStatus::Timeout, wall_time, raw_path, detail));
            }
        }

        let raw = fs::read(&raw_path).map_err(io_err(&raw_path))?;
        let mut answer = match self.converters.convert(&tool.converter_id, &raw, &prepared.context) {
            Ok(a) => a,
            Err(e) => return Ok(failed(RunStatus::ConversionFailure, wall_time, raw_path, e.to_string())),
        };
        if prepared.combined {
            answer = remap_combined(&answer, &prepared.context[0], apps);
        }
        answer.provenance.tool = Some(format!("{} {}", tool.name, tool.version).trim().to_string());
        Ok(ToolRun {
            tool: tool.name.clone(),
            exit_status: RunStatus::Success,
            wall_time,
            raw_output_path: raw_path,
            answer: Some(answer),
            cached: false,
            detail: None,
        })
    }

    /// Produces the combined app for an inter-app query, either in-process or
    /// by running an external command that writes a sidecar to %OUT%.
    fn preprocess(&self, template: &str, apps: &[AppModel], run_dir: &Path) -> Result<AppModel, String> {
        let id = apps.iter().map(|a| a.id.as_str()).collect::<Vec<_>>().join("+");
        let sidecar = run_dir.join("combined.json");
        let opts = IngestOptions::default();
        if template.split_whitespace().next() == Some("builtin:combine") {
            let doc = combine_apps(apps, &id, &format!("{id}.apk")).map_err(|e| e.to_string())?;
            let json = doc.to_json();
            return ingest_app_bytes(json.as_bytes(), SidecarFormat::Json, Some(run_dir), &opts).map_err(|e| e.to_string());
        }
        let files: Vec<String> = apps.iter().map(|a| a.file.clone()).collect();
        let out = [sidecar.display().to_string()];
        let argv = expand(template, &[("%APPS%", &files), ("%APP%", &files), ("%OUT%", &out)])?;
        self.launches.fetch_add(1, Ordering::SeqCst);
        let timeout = Duration::from_secs(600);
        let (outcome, _) = process::run(
            &argv,
            &self.config.base_dir,
            &run_dir.join("preprocess.stdout"),
            &run_dir.join("preprocess.stderr"),
            timeout,
        )
        .map_err(|e| e.to_string())?;
        if outcome != Outcome::Exited(0) {
            return Err(format!("{outcome:?}"));
        }
        ingest_app(&sidecar, &opts).map_err(|e| e.to_string())
    }
}

/// Rewrites references into a combined app so they name the app each class
/// came from.
fn remap_combined(answer: &Answer, combined: &AppModel, originals: &[AppModel]) -> Answer {
    let remap = |r: &Reference| -> Reference {
        let origin = r.classname.as_deref().and_then(|c| combined.origin_of(c));
        match origin.and_then(|id| originals.iter().find(|a| a.id == id)) {
            Some(app) => Reference { app: app.identifier(), ..r.clone() },
            None => r.clone(),
        }
    };
    let mut out: Answer = answer
        .flows()
        .map(|f| Flow::new(remap(&f.from), remap(&f.to)).expect("remapping keeps references complete"))
        .collect();
    out.provenance = answer.provenance.clone();
    out
}
