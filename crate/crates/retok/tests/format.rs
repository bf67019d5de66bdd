use std::fs;
use std::path::{Path, PathBuf};

use retok::format::{load_tokenizer, parse_tokenizer, MergeStyle};
use retok::pretok::build_tokenizer;
use retok_core::audit::FireCounts;
use retok_core::surgery::permute_ids;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn fixture_files_rewrite_byte_identically() {
    for f in ["base.tokenizer.json", "dirty.tokenizer.json"] {
        let text = fs::read_to_string(fixtures().join(f)).unwrap();
        let file = parse_tokenizer(&text).unwrap();
        assert_eq!(file.to_json_string(), text, "{f}");
    }
}

#[test]
fn save_and_reload_a_modified_model() {
    let file = load_tokenizer(fixtures().join("base.tokenizer.json")).unwrap();
    let mut fires = FireCounts::new(file.model.declared_size());
    for (i, c) in fires.counts.iter_mut().enumerate() {
        *c = (i as u64 * 7919) % 101;
    }
    fires.total_tokens = fires.counts.iter().sum();
    let permuted = permute_ids(&file.model, &fires).unwrap();
    let out = file.with_model(permuted.clone());

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    out.save(&p).unwrap();
    let back = load_tokenizer(&p).unwrap();
    assert_eq!(back.model, permuted);
    assert_eq!(back.merge_style, file.merge_style);

    // the vocab object is written in ID order
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    let ids: Vec<u64> = v["model"]["vocab"]
        .as_object()
        .unwrap()
        .values()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(v["added_tokens"].as_array().unwrap().len(), 2);
}

#[test]
fn joined_merges_stay_joined() {
    let text = fs::read_to_string(fixtures().join("base.tokenizer.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let merges = v["model"]["merges"].as_array().unwrap().clone();
    let joined: Vec<serde_json::Value> = merges
        .iter()
        .map(|m| {
            let a = m.as_array().unwrap();
            format!("{} {}", a[0].as_str().unwrap(), a[1].as_str().unwrap()).into()
        })
        .collect();
    v["model"]["merges"] = joined.into();
    let file = parse_tokenizer(&v.to_string()).unwrap();
    assert_eq!(file.merge_style, MergeStyle::Joined);
    let again: serde_json::Value = serde_json::from_str(&file.to_json_string()).unwrap();
    assert!(again["model"]["merges"][0].is_string());
    assert_eq!(parse_tokenizer(&file.to_json_string()).unwrap().model, file.model);
}

#[test]
fn loaded_fixture_encodes_and_decodes() {
    let m = load_tokenizer(fixtures().join("base.tokenizer.json")).unwrap().model;
    let t = build_tokenizer(&m).unwrap();
    let text = "The plan costs 1234567890 rupees. भारत सरकार ଓଡ଼ିଆ";
    let ids = t.encode_ids(text.as_bytes());
    assert_eq!(t.decode(&ids).unwrap(), text.as_bytes());
    assert!(ids.len() < text.len());
}
