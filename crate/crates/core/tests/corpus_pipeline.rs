use std::path::{Path, PathBuf};

use comcat::analysis::{analyze_file, classify_existing_comments, density, typed_lines};
use comcat::classify::{Classifier, CommentType};
use comcat::llm::FixtureBackend;
use comcat::pipeline::{comment_file, PipelineOptions};
use comcat::source::{parse_file, SourceFile};
use comcat::weave::strip_generated;

fn corpus() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| comcat::source::is_source_path(p))
        .collect();
    files.sort();
    files
}

#[test]
fn synthetic_run_is_valid_reversible_and_complete() {
    let backend = FixtureBackend::synthetic();
    let options = PipelineOptions::default();
    for path in corpus() {
        let file = parse_file(&path).unwrap();
        let out = comment_file(&file, &Classifier::Baseline, &backend, &options);
        assert!(
            out.report.error.is_none(),
            "{}: {:?}",
            path.display(),
            out.report.error
        );
        let bad: Vec<_> = out.report.comments.iter().filter(|c| !c.valid).collect();
        assert!(bad.is_empty(), "{}: {bad:?}", path.display());
        let woven = out.output.unwrap();
        assert_eq!(strip_generated(&woven), file.text(), "{}", path.display());

        let woven_file = SourceFile::from_text(&path, woven.as_str());
        let report = analyze_file(&woven_file, &Classifier::Baseline).unwrap();
        assert_eq!(report.coverage, Some(1.0), "{}", path.display());
    }
}

#[test]
fn human_corpus_is_partly_documented() {
    let mut total = 0;
    let mut documented = 0;
    for path in corpus() {
        let file = parse_file(&path).unwrap();
        let typed = typed_lines(&classify_existing_comments(&file, &Classifier::Baseline).unwrap());
        let r = density(&file, &typed).unwrap();
        total += r.function_total;
        documented += r.function_documented;
        assert!(typed.iter().all(|(t, _)| CommentType::ALL.contains(t)));
    }
    assert_eq!(total, 45);
    assert!(documented > 0 && documented < total, "{documented}/{total}");
}
