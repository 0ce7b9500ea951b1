//! Run configuration, layered as flags > `COMCAT_*` variables > config file
//! > defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

pub const CONFIG_FILE: &str = "comcat.toml";
pub const API_KEY_VAR: &str = "COMCAT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Fixture,
    OpenaiCompatible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Baseline,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    /// Overwrite each file, keeping the original as `<file>.bak`.
    InPlace,
    /// Write woven files under `--out-dir`.
    Dir,
    /// Print a unified diff to stdout and write nothing.
    Diff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub backend: BackendKind,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub word_limit: usize,
    pub function_word_limit: Option<usize>,
    pub retry_limit: usize,
    pub classifier: ClassifierKind,
    pub classifier_endpoint: Option<String>,
    pub classifier_timeout_ms: u64,
    pub max_depth: Option<usize>,
    pub replace_existing: bool,
    pub output_mode: OutputMode,
    pub out_dir: Option<PathBuf>,
    pub jobs: usize,
    pub fixture_script: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub context_limit: Option<usize>,
    pub request_timeout_secs: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            backend: BackendKind::Fixture,
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            word_limit: comcat::prompt::DEFAULT_WORD_LIMIT,
            function_word_limit: None,
            retry_limit: 2,
            classifier: ClassifierKind::Baseline,
            classifier_endpoint: None,
            classifier_timeout_ms: 5000,
            max_depth: None,
            replace_existing: false,
            output_mode: OutputMode::InPlace,
            out_dir: None,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            fixture_script: None,
            templates: None,
            context_limit: None,
            request_timeout_secs: 120,
        }
    }
}

/// One configuration layer; unset fields defer to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct Layer {
    /// Chat backend
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Base URL of an OpenAI-compatible API
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Word cap for inline comments
    #[arg(long)]
    pub word_limit: Option<usize>,
    /// Optional word cap for function comments
    #[arg(long)]
    pub function_word_limit: Option<usize>,
    /// Re-requests allowed per snippet after a failed validation
    #[arg(long)]
    pub retry_limit: Option<usize>,
    #[arg(long, value_enum)]
    pub classifier: Option<ClassifierKind>,
    /// URL of the remote classifier service
    #[arg(long)]
    pub classifier_endpoint: Option<String>,
    #[arg(long)]
    pub classifier_timeout_ms: Option<u64>,
    /// Deepest snippet nesting to comment (0 = top level only)
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Remove existing comments before weaving
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub replace_existing: Option<bool>,
    #[arg(long, value_enum)]
    pub output_mode: Option<OutputMode>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Files processed in parallel
    #[arg(long, short = 'j')]
    pub jobs: Option<usize>,
    /// JSON reply script for the fixture backend (synthetic replies if unset)
    #[arg(long)]
    pub fixture_script: Option<PathBuf>,
    /// TOML file with template overrides
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Model context window in tokens
    #[arg(long)]
    pub context_limit: Option<usize>,
    #[arg(long)]
    pub request_timeout_secs: Option<u64>,
}

fn parse_env<T: FromStr>(name: &str, value: Option<String>) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("{name}={v:?}: {e}"))
        })
        .transpose()
}

fn parse_enum<T: ValueEnum>(name: &str, value: Option<String>) -> Result<Option<T>> {
    value
        .map(|v| T::from_str(v.trim(), true).map_err(|e| anyhow::anyhow!("{name}={v:?}: {e}")))
        .transpose()
}

impl Layer {
    /// Reads `COMCAT_<FIELD>` variables through `var`.
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> Result<Layer> {
        let get = |field: &str| var(&format!("COMCAT_{}", field.to_uppercase()));
        macro_rules! env {
            ($f:literal) => {
                parse_env(&format!("COMCAT_{}", $f.to_uppercase()), get($f))?
            };
        }
        Ok(Layer {
            backend: parse_enum("COMCAT_BACKEND", get("backend"))?,
            base_url: get("base_url"),
            model: get("model"),
            temperature: env!("temperature"),
            word_limit: env!("word_limit"),
            function_word_limit: env!("function_word_limit"),
            retry_limit: env!("retry_limit"),
            classifier: parse_enum("COMCAT_CLASSIFIER", get("classifier"))?,
            classifier_endpoint: get("classifier_endpoint"),
            classifier_timeout_ms: env!("classifier_timeout_ms"),
            max_depth: env!("max_depth"),
            replace_existing: env!("replace_existing"),
            output_mode: parse_enum("COMCAT_OUTPUT_MODE", get("output_mode"))?,
            out_dir: get("out_dir").map(PathBuf::from),
            jobs: env!("jobs"),
            fixture_script: get("fixture_script").map(PathBuf::from),
            templates: get("templates").map(PathBuf::from),
            context_limit: env!("context_limit"),
            request_timeout_secs: env!("request_timeout_secs"),
        })
    }

    pub fn from_file(path: &Path) -> Result<Layer> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut layer: Layer =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut layer.out_dir,
            &mut layer.fixture_script,
            &mut layer.templates,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(layer)
    }

    fn apply(self, c: &mut Config) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f; } )* };
        }
        set!(
            backend,
            base_url,
            model,
            temperature,
            word_limit,
            retry_limit,
            classifier,
            classifier_timeout_ms,
            replace_existing,
            output_mode,
            jobs,
            request_timeout_secs
        );
        set_opt!(
            function_word_limit,
            classifier_endpoint,
            max_depth,
            out_dir,
            fixture_script,
            templates,
            context_limit
        );
    }
}

impl Config {
    /// Stacks the layers, lowest precedence first, and validates the result.
    pub fn resolve(file: Option<Layer>, env: Layer, flags: Layer) -> Result<Config> {
        let mut c = Config::default();
        for layer in file.into_iter().chain([env, flags]) {
            layer.apply(&mut c);
        }
        c.validate()?;
        Ok(c)
    }

    /// Loads `explicit`, else `COMCAT_CONFIG`, else `./comcat.toml` when
    /// present, then the environment and `flags`.
    pub fn load(explicit: Option<&Path>, flags: Layer) -> Result<Config> {
        let env_path = std::env::var_os("COMCAT_CONFIG").map(PathBuf::from);
        let path = explicit
            .map(Path::to_path_buf)
            .or(env_path)
            .or_else(|| Some(PathBuf::from(CONFIG_FILE)).filter(|p| p.is_file()));
        let file = path.as_deref().map(Layer::from_file).transpose()?;
        let env = Layer::from_env(|k| std::env::var(k).ok())?;
        Config::resolve(file, env, flags)
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_limit == 0 {
            bail!("word_limit must be at least 1");
        }
        if self.function_word_limit == Some(0) {
            bail!("function_word_limit must be at least 1");
        }
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            bail!("temperature must lie in [0, 2]");
        }
        if self.output_mode == OutputMode::Dir && self.out_dir.is_none() {
            bail!("output mode `dir` needs --out-dir");
        }
        if self.classifier == ClassifierKind::Remote && self.classifier_endpoint.is_none() {
            bail!("the remote classifier needs --classifier-endpoint");
        }
        Ok(())
    }
}
