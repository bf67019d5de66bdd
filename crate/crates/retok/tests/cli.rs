use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use retok::format::load_tokenizer;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn retok(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retok"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn fx(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn pipeline_into(dir: &Path, jobs: &str) -> Output {
    let config = fx("pipeline.toml");
    let out = dir.to_string_lossy();
    retok(&["--config", &config, "--out", &out, "--jobs", jobs, "pipeline"])
}

/// Every file under `dir`, keyed by relative path.
fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, d: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn verify_exit_codes() {
    let dirty = fx("dirty.tokenizer.json");
    let o = retok(&["verify", "merges", &dirty]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert_eq!(code(&retok(&["verify", "bytes", &dirty])), 1);
    assert_eq!(code(&retok(&["verify", "bytes", "--ceiling", "64", &dirty])), 0);
    assert_eq!(code(&retok(&["verify", "identity", &dirty, &dirty])), 0);
    assert_eq!(
        code(&retok(&["verify", "identity", &dirty, &fx("base.tokenizer.json")])),
        1
    );
}

#[test]
fn errors_exit_2() {
    assert_eq!(code(&retok(&["--config", "/nonexistent/retok.toml", "pipeline"])), 2);
    assert_eq!(code(&retok(&["verify", "merges", "/nonexistent/tokenizer.json"])), 2);
    assert_eq!(code(&retok(&["--no-such-flag"])), 2);
    let o = retok(&[
        "--config",
        &fx("pipeline.toml"),
        "--set",
        "allocation.policy=\"best\"",
        "pipeline",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("policy"));
}

#[test]
fn pipeline_is_clean_and_independent_of_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = pipeline_into(a.path(), "1");
    assert_eq!(
        code(&oa),
        0,
        "{}{}",
        String::from_utf8_lossy(&oa.stdout),
        String::from_utf8_lossy(&oa.stderr)
    );
    assert_eq!(code(&pipeline_into(b.path(), "8")), 0);

    let (mut ta, mut tb) = (tree(a.path()), tree(b.path()));
    // the resolved config records its own output directory
    assert!(ta.remove("config.json").is_some());
    tb.remove("config.json");
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{k} differs between --jobs 1 and --jobs 8");
    }
    for f in [
        "crop/tokenizer.json",
        "crop/plan.json",
        "audit/report.txt",
        "audit/final/report.txt",
        "allocate/policies.csv",
        "surgery/composition.csv",
        "verify/unified.csv",
        "tokenizer.json",
    ] {
        assert!(ta.contains_key(f), "missing {f}");
    }

    let m = load_tokenizer(a.path().join("tokenizer.json")).unwrap().model;
    assert_eq!(m.vocab_size(), 660);
    let unified = String::from_utf8(ta["verify/unified.csv"].clone()).unwrap();
    assert!(unified.lines().nth(1).unwrap().ends_with(",0,0,Yes"), "{unified}");
    let out = a.path().join("tokenizer.json").to_string_lossy().into_owned();
    assert_eq!(code(&retok(&["verify", "unified", &out])), 0);
}

#[test]
fn stages_chain_like_the_pipeline() {
    let whole = tempfile::tempdir().unwrap();
    let staged = tempfile::tempdir().unwrap();
    assert_eq!(code(&pipeline_into(whole.path(), "0")), 0);
    let config = fx("pipeline.toml");
    let out = staged.path().to_string_lossy().into_owned();
    for stage in ["crop", "audit", "surgery"] {
        let o = retok(&["--config", &config, "--out", &out, stage]);
        assert_eq!(code(&o), 0, "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(whole.path().join("tokenizer.json")).unwrap();
    let b = fs::read(staged.path().join("tokenizer.json")).unwrap();
    assert!(a == b, "stage-by-stage output differs from the pipeline");
}

#[test]
fn eval_writes_tables_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let base = format!("base={}", fx("base.tokenizer.json"));
    let dirty = format!("dirty={}", fx("dirty.tokenizer.json"));
    let corpus = fx("eval20.jsonl");
    let o = retok(&[
        "--out",
        &out,
        "eval",
        "--tokenizer",
        &base,
        "--tokenizer",
        &dirty,
        "--corpus",
        &corpus,
        "--trace",
        "ଓଡ଼ିଆ ଭାଷା",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "fertility.csv",
        "bytes_per_token.csv",
        "token_volume.csv",
        "regimes.csv",
        "digits.txt",
        "trace.json",
    ] {
        assert!(dir.path().join("eval").join(f).is_file(), "missing {f}");
    }
    let digits = fs::read_to_string(dir.path().join("eval/digits.txt")).unwrap();
    // neither fixture has multi-digit tokens; the probe falls back to bytes
    assert!(digits.contains("dirty: 1|2|3|4|5|6|7|8|9|0"), "{digits}");
    assert_eq!(digits.lines().count(), 2);
    let volume = fs::read_to_string(dir.path().join("eval/token_volume.csv")).unwrap();
    assert!(
        volume.starts_with("language,base,dirty,delta_pct_dirty_vs_base\n"),
        "{volume}"
    );
    assert!(volume.lines().last().unwrap().starts_with("TOTAL,"));
    let trace: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("eval/trace.json")).unwrap()).unwrap();
    assert_eq!(trace.as_array().unwrap().len(), 2);
}

#[test]
fn committed_fixtures_are_current() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixtures().join("base.json"), dir.path().join("base.json")).unwrap();
    // the manifest's paths are relative to it
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    for e in fs::read_dir(fixtures().join("corpus")).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, corpus.join(p.file_name().unwrap())).unwrap();
    }
    retok::cli::write_fixtures(dir.path()).unwrap();
    let bless = std::env::var_os("RETOK_BLESS").is_some();
    for f in ["base.tokenizer.json", "dirty.tokenizer.json", "script_table.txt"] {
        let fresh = fs::read(dir.path().join(f)).unwrap();
        if bless {
            fs::write(fixtures().join(f), &fresh).unwrap();
        } else {
            assert!(
                fresh == fs::read(fixtures().join(f)).unwrap(),
                "{f} is stale; rerun with RETOK_BLESS=1"
            );
        }
    }
}
