//! Crop, audit, allocate, surgery and verify through the public API, on a
//! model trained in memory.

use retok_core::allocation::{allocate, AllocationProblem, Policy};
use retok_core::audit::{count_fires, find_dead_slots, Doc};
use retok_core::crop::{apply_crop, plan_crop};
use retok_core::pretokenize::GPT2_PATTERN;
use retok_core::surgery::{
    apply_surgery, assemble_plan, filter_cross_script, permute_ids, train_candidates, CandidatePools, ExtraEntries,
    SurgeryError, TrainConfig,
};
use retok_core::verify::{verify_max_byte_length, verify_no_cross_script_merges};
use retok_core::{Gpt2Split, ScriptTable, Tokenizer, TokenizerModel};

const ENGLISH: &[&str] = &[
    "the cat sat on the mat and the dog sat on the log",
    "a quick brown fox jumps over the lazy dog again and again",
    "these are the days of our lives and the nights of our dreams",
];
const THAI: &[&str] = &["ภาษาไทย ภาษาไทย ภาษาไทย", "ประเทศไทย ประเทศไทย"];
const HINDI: &[&str] = &[
    "भारत एक विशाल देश है और भारत की भाषा हिन्दी है",
    "सरकार ने भारत में नई योजना शुरू की है",
    "हिन्दी भाषा भारत में बोली जाती है और सरकार इसे बढ़ावा देती है",
];

fn bytes<'a>(docs: &[&'a str]) -> Vec<&'a [u8]> {
    docs.iter().map(|d| d.as_bytes()).collect()
}

fn repeated(docs: &[&'static str], n: usize) -> Vec<&'static [u8]> {
    bytes(docs).into_iter().cycle().take(docs.len() * n).collect()
}

/// Byte base plus merges trained on English and Thai only.
fn base() -> TokenizerModel {
    let mut docs = repeated(ENGLISH, 4);
    docs.extend(repeated(THAI, 4));
    let cands = train_candidates(
        docs,
        &Gpt2Split,
        &TrainConfig {
            max_candidates: 300,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let mut m = TokenizerModel::byte_level_base(GPT2_PATTERN);
    for c in cands {
        let id = m.declared_size() as u32;
        m.vocab.insert(c.composed.clone(), id);
        m.merges.push(c.merge());
    }
    m.check().unwrap();
    m
}

fn tk(m: &TokenizerModel) -> Tokenizer {
    Tokenizer::new(m, Gpt2Split).unwrap()
}

#[test]
fn retrofit_keeps_size_and_helps_the_new_script() {
    let table = ScriptTable::default();
    let base = base();
    let audit: Vec<&[u8]> = repeated(ENGLISH, 2).into_iter().chain(repeated(HINDI, 2)).collect();
    let docs = |c: &[&'static [u8]]| c.iter().map(|t| Doc::new(None, t)).collect::<Vec<_>>();

    // crop Thai, then trim 10 more by fires
    let fires = count_fires(&tk(&base), docs(&audit));
    let thai_free = base.vocab_size()
        - plan_crop(&base, &table, &["Thai"], 256, Some(&fires))
            .unwrap()
            .script_total();
    let target = thai_free - 10;
    let plan = plan_crop(&base, &table, &["Thai"], target, Some(&fires)).unwrap();
    assert!(plan.script_total() > 0);
    let cropped = apply_crop(&base, &plan).unwrap();
    assert_eq!(cropped.vocab_size(), target);

    // dead slots on the cropped model
    let fires = count_fires(&tk(&cropped), docs(&audit));
    let dead = find_dead_slots(&fires, 0, |_| true);
    assert!(!dead.is_empty());

    // train, filter, allocate
    let cands = train_candidates(repeated(HINDI, 3), &Gpt2Split, &TrainConfig::default()).unwrap();
    let (ok, _rejected) = filter_cross_script(cands, &table);
    let pools = CandidatePools::from_admissible(ok, &table);
    let curves = pools.curves(&cropped);
    let capacity: usize = curves.iter().map(|c| c.ceiling()).sum();
    // infrastructure intermediates cost slots too: shrink until the plan fits
    let mut budget = capacity.min(dead.len()).min(40);
    let plan = loop {
        let problem = AllocationProblem::new(curves.clone(), budget).unwrap();
        let alloc = allocate(&problem, Policy::Greedy).unwrap();
        match assemble_plan(&cropped, &Gpt2Split, &dead, &alloc, &pools, &ExtraEntries::default()) {
            Ok(p) => break p,
            Err(SurgeryError::InsufficientDeadSlots { .. }) if budget > 1 => budget -= 1,
            Err(e) => panic!("assemble: {e}"),
        }
    };
    assert!(budget > 10, "budget shrank to {budget}");
    let after = apply_surgery(&cropped, &plan).unwrap();
    assert_eq!(after.vocab_size(), cropped.vocab_size());
    after.check().unwrap();

    let fires = count_fires(&tk(&after), docs(&audit));
    let finished = permute_ids(&after, &fires).unwrap();
    assert!(verify_no_cross_script_merges(&finished, &table).verdict.passed());
    assert!(verify_max_byte_length(&finished, 32).verdict.passed());

    let (before_t, after_t) = (tk(&cropped), tk(&finished));
    let hindi_tokens = |t: &Tokenizer| HINDI.iter().map(|s| t.encode_ids(s.as_bytes()).len()).sum::<usize>();
    assert!(hindi_tokens(&after_t) < hindi_tokens(&before_t));
    for s in ENGLISH.iter().chain(HINDI).chain(THAI) {
        assert_eq!(after_t.decode(&after_t.encode_ids(s.as_bytes())).unwrap(), s.as_bytes());
    }
}
