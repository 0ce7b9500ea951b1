use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SAMPLE: &str = "int limit = 10;\n\nint clamp(int v) {\n    if (v > limit) {\n        return limit;\n    }\n    return v;\n}\n";
const BROKEN: &str = "}}}} ))) ;;; {{ <<<>>> @@@ ### $$$ ~~~\n";

fn comcat(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_comcat"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("COMCAT_") {
            cmd.env_remove(k);
        }
    }
    cmd.output().unwrap()
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus")
}

fn reports(text: &str) -> Vec<Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn in_place_writes_backup_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("s.c");
    fs::write(&file, SAMPLE).unwrap();

    let out = comcat(tmp.path(), &["comment", "s.c", "--report", "r.jsonl"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = fs::read_to_string(&file).unwrap();
    assert_ne!(first, SAMPLE);
    assert_eq!(
        fs::read_to_string(tmp.path().join("s.c.bak")).unwrap(),
        SAMPLE
    );
    let r = reports(&fs::read_to_string(tmp.path().join("r.jsonl")).unwrap());
    assert_eq!(r[0]["snippets"], 3);

    let out = comcat(tmp.path(), &["comment", "s.c", "--report", "r.jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&file).unwrap(), first);
}

#[test]
fn scripted_fixture_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("v.c"), "int a = 1;\nint b = 2;\n").unwrap();
    fs::write(
        tmp.path().join("script.json"),
        r#"["// a: first value.", "// b: second value."]"#,
    )
    .unwrap();
    let out = comcat(
        tmp.path(),
        &[
            "comment",
            "v.c",
            "--fixture-script",
            "script.json",
            "--output-mode",
            "diff",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let diff = String::from_utf8(out.stdout).unwrap();
    assert!(diff.contains("+// a: first value. [comcat:1]"));
    assert!(diff.contains("+// b: second value. [comcat:1]"));
    // Diff mode leaves the file alone.
    assert_eq!(
        fs::read_to_string(tmp.path().join("v.c")).unwrap(),
        "int a = 1;\nint b = 2;\n"
    );
}

#[test]
fn failed_validation_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("v.c"), "int a = 1;\n").unwrap();
    let leak = "// [Variable/Constant/Literal Name]: [Description and purpose].";
    fs::write(
        tmp.path().join("script.json"),
        serde_json::to_string(&[leak, leak, leak]).unwrap(),
    )
    .unwrap();
    let out = comcat(
        tmp.path(),
        &["comment", "v.c", "--fixture-script", "script.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    let r = reports(&String::from_utf8(out.stderr).unwrap());
    assert_eq!(r[0]["failures"], serde_json::json!([0]));
    // The rejected comment is not woven.
    assert_eq!(
        fs::read_to_string(tmp.path().join("v.c")).unwrap(),
        "int a = 1;\n"
    );
}

#[test]
fn directory_with_unparseable_file() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    fs::create_dir(&src).unwrap();
    fs::write(src.join("a.c"), SAMPLE).unwrap();
    fs::write(src.join("b.cpp"), "class P {\n  int x;\n};\n").unwrap();
    fs::write(src.join("c.c"), BROKEN).unwrap();
    let out = comcat(
        tmp.path(),
        &[
            "comment",
            "src",
            "--output-mode",
            "dir",
            "--out-dir",
            "out",
            "--report",
            "r.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(tmp.path().join("out/a.c").is_file());
    assert!(tmp.path().join("out/b.cpp").is_file());
    assert!(!tmp.path().join("out/c.c").exists());
    let r = reports(&fs::read_to_string(tmp.path().join("r.jsonl")).unwrap());
    assert_eq!(r.len(), 3);
    let failed: Vec<_> = r.iter().filter(|r| !r["error"].is_null()).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["path"].as_str().unwrap().ends_with("c.c"));
    assert!(failed[0]["error"].as_str().unwrap().contains("parse"));
}

#[test]
fn missing_api_key_fails_before_network() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("v.c"), "int a = 1;\n").unwrap();
    let out = comcat(
        tmp.path(),
        &[
            "comment",
            "v.c",
            "--backend",
            "openai-compatible",
            "--base-url",
            "http://127.0.0.1:9/v1",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("authentication failed"), "{err}");
    assert!(err.contains("COMCAT_API_KEY"));
}

#[test]
fn prompts_dry_run_needs_no_backend() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.c"), SAMPLE).unwrap();
    let out = comcat(
        tmp.path(),
        &[
            "prompts",
            "s.c",
            "--dry-run",
            "--backend",
            "openai-compatible",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let lines = reports(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["role"], "system");
    assert!(lines[0]["content"]
        .as_str()
        .unwrap()
        .contains("int clamp(int v)"));
    assert_eq!(lines[2]["snippet_id"], 1);
    assert!(lines[2]["content"].as_str().unwrap().contains("@brief"));
}

#[test]
fn extract_matches_golden() {
    let dir = corpus_dir();
    for name in ["01_counter.c", "02_stack.cpp"] {
        let out = comcat(&dir, &["extract", name]);
        assert_eq!(out.status.code(), Some(0));
        let stem = name.split('.').next().unwrap();
        let golden = fs::read_to_string(dir.join(format!("{stem}.golden.jsonl"))).unwrap();
        assert_eq!(
            reports(&String::from_utf8(out.stdout).unwrap()),
            reports(&golden)
        );
    }
}

#[test]
fn classify_lists_types() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.c"), SAMPLE).unwrap();
    let out = comcat(tmp.path(), &["classify", "s.c"]);
    let lines = reports(&String::from_utf8(out.stdout).unwrap());
    let types: Vec<_> = lines
        .iter()
        .map(|l| l["type"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(types, ["Variable", "Function", "Branch"]);
}

#[test]
fn agreement_prints_six_decimals() {
    let tmp = tempfile::tempdir().unwrap();
    let data = [
        r#"{"code":"int a;","comment":"// a: x.","type":"Variable","raters":["Variable","Variable"]}"#,
        r#"{"code":"if (a) {}","comment":"// Cond: a","type":"Branch","raters":["Variable","Branch"]}"#,
    ]
    .join("\n");
    fs::write(tmp.path().join("d.jsonl"), data).unwrap();
    let out = comcat(tmp.path(), &["agreement", "d.jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    // Two raters, items [A,A] and [A,B]: alpha is exactly zero.
    assert!(text.contains("krippendorff_alpha: 0.000000"), "{text}");
    assert!(text.contains("fleiss_kappa: "));
}

#[test]
fn analyze_reports_density_table() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.c"), "// n: count of items\nint n = 0;\n").unwrap();
    let out = comcat(tmp.path(), &["analyze", "s.c", "--json"]);
    let r = reports(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r[0]["loc"], 1);
    assert_eq!(r[0]["per_type_density"]["Variable"], 100.0);
}

#[test]
fn config_precedence_flags_env_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.c"), SAMPLE).unwrap();
    fs::write(
        tmp.path().join("comcat.toml"),
        "output_mode = \"diff\"\nword_limit = 25\n",
    )
    .unwrap();
    let plan = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_comcat"));
        cmd.current_dir(tmp.path())
            .args(["prompts", "s.c", "--dry-run"])
            .args(extra);
        cmd.env_remove("COMCAT_WORD_LIMIT");
        if let Some(v) = env {
            cmd.env("COMCAT_WORD_LIMIT", v);
        }
        String::from_utf8(cmd.output().unwrap().stdout).unwrap()
    };
    assert!(plan(&[], None).contains("at most 25 words"));
    assert!(plan(&[], Some("26")).contains("at most 26 words"));
    assert!(plan(&["--word-limit", "27"], Some("26")).contains("at most 27 words"));

    // The file's output mode applies to `comment`.
    let out = comcat(tmp.path(), &["comment", "s.c"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("--- a/s.c"));
    assert_eq!(fs::read_to_string(tmp.path().join("s.c")).unwrap(), SAMPLE);
}
