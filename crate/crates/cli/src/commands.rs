use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use similar::TextDiff;
use walkdir::WalkDir;

use comcat::analysis::{
    aggregate, analyze_file, fleiss_kappa, krippendorff_alpha, read_dataset, render_table,
    RatingMatrix,
};
use comcat::classify::{classify_all, Classifier, RemoteClassifier};
use comcat::llm::{
    openai_compatible_backend, run_plan_with, ChatBackend, FixtureBackend, OpenAiSettings,
    RunOptions,
};
use comcat::pipeline::{comment_file, FileReport, PipelineOptions};
use comcat::prompt::build_plan_with;
use comcat::source::{
    extract_with, is_source_path, parse_file, ExtractOptions, SnippetRecord, SourceFile,
};
use comcat::templates::TemplateCatalog;

use crate::config::{BackendKind, ClassifierKind, Config, Layer, OutputMode, API_KEY_VAR};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;

/// A source file to process and its path relative to the argument it came
/// from (used to lay out `--out-dir`).
struct Input {
    path: PathBuf,
    relative: PathBuf,
}

/// Expands directories into their source files, sorted for a stable order.
/// Missing paths are returned separately.
fn collect_inputs(paths: &[PathBuf]) -> (Vec<Input>, Vec<PathBuf>) {
    let mut inputs = Vec::new();
    let mut missing = Vec::new();
    for root in paths {
        if root.is_dir() {
            let walker = WalkDir::new(root)
                .sort_by_file_name()
                .into_iter()
                .filter_map(|e| e.ok());
            for entry in walker {
                let p = entry.path();
                if entry.file_type().is_file() && is_source_path(p) {
                    inputs.push(Input {
                        path: p.to_path_buf(),
                        relative: p.strip_prefix(root).unwrap_or(p).to_path_buf(),
                    });
                }
            }
        } else if root.is_file() {
            inputs.push(Input {
                path: root.clone(),
                relative: root
                    .file_name()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| root.clone()),
            });
        } else {
            missing.push(root.clone());
        }
    }
    (inputs, missing)
}

fn make_backend(config: &Config) -> Result<Box<dyn ChatBackend>> {
    Ok(match config.backend {
        BackendKind::Fixture => match &config.fixture_script {
            Some(path) => Box::new(FixtureBackend::from_script_file(path)?),
            None => Box::new(FixtureBackend::synthetic()),
        },
        BackendKind::OpenaiCompatible => Box::new(openai_compatible_backend(
            &config.base_url,
            &config.model,
            std::env::var(API_KEY_VAR).ok(),
            OpenAiSettings {
                temperature: config.temperature,
                timeout: Duration::from_secs(config.request_timeout_secs),
                context_limit: config.context_limit,
                ..OpenAiSettings::default()
            },
        )?),
    })
}

fn make_classifier(config: &Config) -> Result<Classifier> {
    Ok(match config.classifier {
        ClassifierKind::Baseline => Classifier::Baseline,
        ClassifierKind::Remote => {
            let endpoint = config
                .classifier_endpoint
                .clone()
                .ok_or_else(|| anyhow!("remote classifier needs an endpoint"))?;
            Classifier::Remote(
                RemoteClassifier::new(
                    endpoint,
                    Duration::from_millis(config.classifier_timeout_ms),
                )?
                .with_max_in_flight(config.jobs),
            )
        }
    })
}

fn extract_options(config: &Config) -> ExtractOptions {
    ExtractOptions {
        max_depth: config.max_depth,
        ..ExtractOptions::default()
    }
}

fn pipeline_options(config: &Config) -> Result<PipelineOptions> {
    let catalog = match &config.templates {
        Some(path) => TemplateCatalog::load(path)?,
        None => TemplateCatalog::default(),
    };
    Ok(PipelineOptions {
        word_limit: config.word_limit,
        function_word_limit: config.function_word_limit,
        run: RunOptions {
            retry_limit: config.retry_limit,
            ..RunOptions::default()
        },
        extract: extract_options(config),
        replace_existing: config.replace_existing,
        catalog,
    })
}

fn error_report(path: &Path, message: String) -> FileReport {
    FileReport {
        path: path.display().to_string(),
        error: Some(message),
        ..FileReport::default()
    }
}

fn write_output(
    config: &Config,
    input: &Input,
    original: &str,
    output: &str,
    stdout: &mut impl Write,
) -> Result<()> {
    match config.output_mode {
        OutputMode::InPlace => {
            if output != original {
                let mut backup = input.path.clone().into_os_string();
                backup.push(".bak");
                fs::write(&backup, original)
                    .with_context(|| format!("writing {}", Path::new(&backup).display()))?;
                fs::write(&input.path, output)
                    .with_context(|| format!("writing {}", input.path.display()))?;
            }
        }
        OutputMode::Dir => {
            let dir = config
                .out_dir
                .as_ref()
                .ok_or_else(|| anyhow!("no --out-dir"))?;
            let target = dir.join(&input.relative);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&target, output).with_context(|| format!("writing {}", target.display()))?;
        }
        OutputMode::Diff => {
            let name = input.path.display().to_string();
            let diff = TextDiff::from_lines(original, output)
                .unified_diff()
                .header(&format!("a/{name}"), &format!("b/{name}"))
                .to_string();
            stdout.write_all(diff.as_bytes())?;
        }
    }
    Ok(())
}

pub fn comment(
    paths: &[PathBuf],
    config_path: Option<&Path>,
    report_path: Option<&Path>,
    flags: Layer,
) -> Result<u8> {
    let config = Config::load(config_path, flags)?;
    let backend = make_backend(&config)?;
    let classifier = make_classifier(&config)?;
    let options = pipeline_options(&config)?;
    let (inputs, missing) = collect_inputs(paths);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()?;
    let outcomes: Vec<(Option<SourceFile>, comcat::pipeline::FileOutcome)> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| match parse_file(&input.path) {
                Ok(file) if file.is_lossy() => {
                    let report = error_report(
                        &input.path,
                        "file is not valid UTF-8; left untouched".into(),
                    );
                    (
                        None,
                        comcat::pipeline::FileOutcome {
                            report,
                            output: None,
                        },
                    )
                }
                Ok(file) => {
                    let outcome = comment_file(&file, &classifier, backend.as_ref(), &options);
                    (Some(file), outcome)
                }
                Err(e) => {
                    let report = error_report(&input.path, e.to_string());
                    (
                        None,
                        comcat::pipeline::FileOutcome {
                            report,
                            output: None,
                        },
                    )
                }
            })
            .collect()
    });

    let mut reports: Vec<FileReport> = missing
        .iter()
        .map(|p| error_report(p, "no such file or directory".into()))
        .collect();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (input, (file, outcome)) in inputs.iter().zip(outcomes) {
        let mut report = outcome.report;
        if let (Some(file), Some(output)) = (file, outcome.output) {
            if let Err(e) = write_output(&config, input, file.text(), &output, &mut out) {
                report.error = Some(format!("{e:#}"));
            }
        }
        reports.push(report);
    }
    out.flush()?;

    let mut lines = String::new();
    for r in &reports {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    match report_path {
        Some(p) => fs::write(p, lines).with_context(|| format!("writing {}", p.display()))?,
        None => io::stderr().write_all(lines.as_bytes())?,
    }

    Ok(if reports.iter().any(FileReport::has_error) {
        EXIT_FAILURE
    } else if reports.iter().any(FileReport::has_invalid) {
        EXIT_INVALID
    } else {
        EXIT_OK
    })
}

#[derive(Serialize)]
struct PathRecord<'a, T: Serialize> {
    path: &'a str,
    #[serde(flatten)]
    record: T,
}

fn print_jsonl<T: Serialize>(out: &mut impl Write, path: Option<&str>, record: T) -> Result<()> {
    let line = match path {
        Some(path) => serde_json::to_string(&PathRecord { path, record })?,
        None => serde_json::to_string(&record)?,
    };
    writeln!(out, "{line}")?;
    Ok(())
}

/// Runs `f` on every input file; errors are reported and turn the exit
/// code to failure without stopping the other files.
fn for_each_file(
    paths: &[PathBuf],
    mut f: impl FnMut(&SourceFile, Option<&str>) -> Result<()>,
) -> Result<u8> {
    let (inputs, missing) = collect_inputs(paths);
    let mut code = EXIT_OK;
    for p in &missing {
        eprintln!("comcat: {}: no such file or directory", p.display());
        code = EXIT_FAILURE;
    }
    let tag_paths = inputs.len() > 1;
    for input in &inputs {
        let name = input.path.display().to_string();
        let result = parse_file(&input.path)
            .map_err(anyhow::Error::from)
            .and_then(|file| f(&file, tag_paths.then_some(name.as_str())));
        if let Err(e) = result {
            eprintln!("comcat: {name}: {e:#}");
            code = EXIT_FAILURE;
        }
    }
    Ok(code)
}

pub fn extract(
    paths: &[PathBuf],
    max_depth: Option<usize>,
    top_level_declarations_only: bool,
) -> Result<u8> {
    let options = ExtractOptions {
        max_depth,
        top_level_declarations_only,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for_each_file(paths, |file, tag| {
        let extraction = extract_with(file, &options)?;
        for d in &extraction.diagnostics {
            log::warn!(
                "{}: lines {}-{}: {}",
                file.path().display(),
                d.start_line,
                d.end_line,
                d.message
            );
        }
        for s in &extraction.snippets {
            print_jsonl::<SnippetRecord>(&mut out, tag, s.record())?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct ClassifyRecord {
    snippet_id: usize,
    kind: comcat::source::SnippetKind,
    start_line: usize,
    end_line: usize,
    #[serde(rename = "type")]
    comment_type: comcat::classify::CommentType,
    confidence: f64,
    source: comcat::classify::ClassificationSource,
}

pub fn classify(paths: &[PathBuf], config_path: Option<&Path>, flags: Layer) -> Result<u8> {
    let config = Config::load(config_path, flags)?;
    let classifier = make_classifier(&config)?;
    let options = extract_options(&config);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for_each_file(paths, |file, tag| {
        let snippets = extract_with(file, &options)?.snippets;
        let batch = classify_all(&snippets, &classifier);
        for (id, w) in &batch.warnings {
            log::warn!("{}: snippet {id}: {w}", file.path().display());
        }
        for (s, c) in snippets.iter().zip(&batch.classifications) {
            let record = ClassifyRecord {
                snippet_id: s.id,
                kind: s.kind,
                start_line: s.start_line,
                end_line: s.end_line,
                comment_type: c.comment_type,
                confidence: c.confidence,
                source: c.source,
            };
            print_jsonl(&mut out, tag, record)?;
        }
        Ok(())
    })
}

pub fn prompts(file: &Path, dry_run: bool, config_path: Option<&Path>, flags: Layer) -> Result<u8> {
    let config = Config::load(config_path, flags)?;
    let options = pipeline_options(&config)?;
    let classifier = make_classifier(&config)?;
    let source = parse_file(file)?;
    let snippets = extract_with(&source, &options.extract)?.snippets;
    if snippets.is_empty() {
        bail!("{}: no snippets to comment", file.display());
    }
    let batch = classify_all(&snippets, &classifier);
    let plan = build_plan_with(
        &source,
        &batch.classifications,
        &snippets,
        &options.catalog,
        options.word_limit,
        options.function_word_limit,
    )?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if dry_run {
        out.write_all(plan.to_jsonl().as_bytes())?;
        return Ok(EXIT_OK);
    }
    let backend = make_backend(&config)?;
    let outcome = run_plan_with(&plan, backend.as_ref(), &options.run);
    for m in &outcome.transcript {
        print_jsonl(&mut out, None, m)?;
    }
    if let Some(e) = outcome.error {
        bail!("{e}");
    }
    Ok(if outcome.comments.iter().all(|c| c.valid) {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}

pub fn analyze(
    paths: &[PathBuf],
    json: bool,
    config_path: Option<&Path>,
    flags: Layer,
) -> Result<u8> {
    let config = Config::load(config_path, flags)?;
    let classifier = make_classifier(&config)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut reports = Vec::new();
    let code = for_each_file(paths, |file, _| {
        let report = analyze_file(file, &classifier)?;
        if json {
            print_jsonl(&mut out, None, &report)?;
        } else {
            writeln!(out, "{}", render_table(&report))?;
        }
        reports.push(report);
        Ok(())
    })?;
    if reports.len() > 1 {
        if let Some(total) = aggregate(&reports) {
            if json {
                print_jsonl(&mut out, None, &total)?;
            } else {
                writeln!(out, "{}", render_table(&total))?;
            }
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct AgreementSummary {
    items: usize,
    raters: usize,
    categories: Vec<String>,
    krippendorff_alpha: f64,
    alpha_note: Option<String>,
    fleiss_kappa: Option<f64>,
    kappa_note: Option<String>,
}

pub fn agreement(dataset: &Path, json: bool) -> Result<u8> {
    let records = read_dataset(dataset)?;
    let matrix = RatingMatrix::from_records(&records);
    let alpha = krippendorff_alpha(&matrix)?;
    let alpha_note = matrix
        .is_degenerate()
        .then(|| "every rating is the same category; alpha is defined as 1".to_string());
    let (kappa, kappa_note) = match fleiss_kappa(&matrix) {
        Ok(k) => (Some(k), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = AgreementSummary {
        items: matrix.items(),
        raters: matrix.raters(),
        categories: matrix.categories().iter().cloned().collect(),
        krippendorff_alpha: alpha,
        alpha_note,
        fleiss_kappa: kappa,
        kappa_note,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if json {
        writeln!(out, "{}", serde_json::to_string(&summary)?)?;
        return Ok(EXIT_OK);
    }
    writeln!(out, "items: {}", summary.items)?;
    writeln!(out, "raters: {}", summary.raters)?;
    writeln!(out, "krippendorff_alpha: {:.6}", summary.krippendorff_alpha)?;
    if let Some(note) = &summary.alpha_note {
        writeln!(out, "note: {note}")?;
    }
    match (summary.fleiss_kappa, &summary.kappa_note) {
        (Some(k), _) => writeln!(out, "fleiss_kappa: {k:.6}")?,
        (None, Some(note)) => writeln!(out, "fleiss_kappa: n/a ({note})")?,
        (None, None) => {}
    }
    Ok(EXIT_OK)
}
