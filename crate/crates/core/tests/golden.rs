use std::path::{Path, PathBuf};

use comcat::source::{extract_snippets, parse_file, SnippetRecord};

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

fn golden(path: &Path) -> Vec<SnippetRecord> {
    let stem = path.file_stem().unwrap().to_str().unwrap();
    let golden = path.with_file_name(format!("{stem}.golden.jsonl"));
    std::fs::read_to_string(golden)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn extraction_matches_golden_listings() {
    let mut mismatches = Vec::new();
    for path in corpus() {
        let file = parse_file(&path).unwrap();
        let got: Vec<SnippetRecord> = extract_snippets(&file)
            .unwrap()
            .iter()
            .map(|s| s.record())
            .collect();
        let want = golden(&path);
        if got != want {
            mismatches.push(format!(
                "{}:\n  got  {:?}\n  want {:?}",
                path.display(),
                got.iter()
                    .map(|r| (r.kind, r.start_line, r.end_line))
                    .collect::<Vec<_>>(),
                want.iter()
                    .map(|r| (r.kind, r.start_line, r.end_line))
                    .collect::<Vec<_>>()
            ));
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}
