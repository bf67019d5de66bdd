//! Vocabulary surgery: candidate merges from script-restricted BPE training,
//! the no-cross-script filter, plan assembly over dead slots, atomic
//! application and frequency-ordered ID permutation.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use hashbrown::{HashMap, HashSet};
use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationResult, SaturationCurve};
use crate::audit::{DeadSlotReport, FireCounts};
use crate::bijection::ByteBijection;
use crate::model::{Merge, ModelError, TokenAlphabet, TokenizerModel};
use crate::pretokenize::{split_bytes, PreTokenize};
use crate::script::ScriptTable;
use crate::TokenId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurgeryError {
    #[error("candidate training needs a non-empty corpus")]
    EmptyCorpus,
    #[error("surgery supports byte-level vocabularies only")]
    UnsupportedAlphabet,
    #[error("{script}: allocation asks for {want} candidates, only {got} usable")]
    InsufficientCandidates { script: String, want: usize, got: usize },
    #[error("word {0:?} is neither merge-reachable nor a whole pretoken under ignore_merges")]
    UnreachableWord(String),
    #[error("{need} insertions but only {have} removable dead slots")]
    InsufficientDeadSlots { need: usize, have: usize },
    #[error("plan removes id {0}, which is not a removable normal token")]
    BadRemoval(TokenId),
    #[error("plan inserts {0:?}, which is already in the vocabulary")]
    AlreadyPresent(String),
    #[error("plan has {removals} removals for {insertions} insertions")]
    Unbalanced { removals: usize, insertions: usize },
    #[error("fire counts cover {got} ids, model has {want}")]
    FiresMismatch { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One learned pair, with its training-corpus application count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateMerge {
    pub left: String,
    pub right: String,
    pub composed: String,
    pub fire_count: u64,
    /// Position in the learned merge sequence.
    pub order: usize,
}

impl CandidateMerge {
    pub fn merge(&self) -> Merge {
        Merge::new(self.left.clone(), self.right.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_candidates: usize,
    /// Pairs seen fewer times than this stop training.
    pub min_count: u64,
    /// Composed tokens longer than this are never learned.
    pub max_token_bytes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_candidates: 10_000,
            min_count: 2,
            max_token_bytes: 32,
        }
    }
}

struct Trainer {
    syms: Vec<String>,
    sym_len: Vec<usize>,
    intern: HashMap<String, u32>,
    words: Vec<Vec<u32>>,
    counts: Vec<u64>,
    pairs: HashMap<(u32, u32), u64>,
    seen_in: HashMap<(u32, u32), Vec<usize>>,
}

impl Trainer {
    fn sym(&mut self, s: String, len: usize) -> u32 {
        if let Some(&id) = self.intern.get(&s) {
            return id;
        }
        let id = self.syms.len() as u32;
        self.intern.insert(s.clone(), id);
        self.syms.push(s);
        self.sym_len.push(len);
        id
    }

    fn add_pairs(&mut self, w: usize, sign: bool, touched: &mut Vec<(u32, u32)>) {
        let c = self.counts[w];
        for p in self.words[w].windows(2) {
            let key = (p[0], p[1]);
            let e = self.pairs.entry(key).or_insert(0);
            if sign {
                *e += c;
                self.seen_in.entry(key).or_default().push(w);
            } else {
                *e -= c;
            }
            touched.push(key);
        }
    }
}

/// Greedy pair-frequency BPE over bytes, on pretoken pieces of `docs`.
/// Ties go to the pair of earlier-created symbols, so runs are
/// deterministic.
pub fn train_candidates<'a>(
    docs: impl IntoIterator<Item = &'a [u8]>,
    pre: &dyn PreTokenize,
    config: &TrainConfig,
) -> Result<Vec<CandidateMerge>, SurgeryError> {
    let bt = ByteBijection;
    let mut piece_counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut ranges = Vec::new();
    for doc in docs {
        ranges.clear();
        split_bytes(pre, doc, &mut ranges);
        for r in &ranges {
            *piece_counts.entry(doc[r.clone()].to_vec()).or_default() += 1;
        }
    }
    if piece_counts.is_empty() {
        return Err(SurgeryError::EmptyCorpus);
    }
    let mut t = Trainer {
        syms: Vec::new(),
        sym_len: Vec::new(),
        intern: HashMap::new(),
        words: Vec::new(),
        counts: Vec::new(),
        pairs: HashMap::new(),
        seen_in: HashMap::new(),
    };
    for b in 0..=255u8 {
        t.sym(String::from(bt.forward(b)), 1);
    }
    for (piece, c) in piece_counts {
        t.words.push(piece.iter().map(|&b| b as u32).collect());
        t.counts.push(c);
    }
    let mut touched = Vec::new();
    for w in 0..t.words.len() {
        t.add_pairs(w, true, &mut touched);
    }
    let mut heap: BinaryHeap<(u64, Reverse<(u32, u32)>)> = t.pairs.iter().map(|(&p, &c)| (c, Reverse(p))).collect();
    let mut out = Vec::new();

    while out.len() < config.max_candidates {
        let Some((c, Reverse(pair))) = heap.pop() else { break };
        if t.pairs.get(&pair).copied() != Some(c) || c == 0 {
            continue;
        }
        if c < config.min_count {
            break;
        }
        let len = t.sym_len[pair.0 as usize] + t.sym_len[pair.1 as usize];
        if len > config.max_token_bytes {
            // never learnable; drop it for good
            t.pairs.remove(&pair);
            continue;
        }
        let mut composed = t.syms[pair.0 as usize].clone();
        composed.push_str(&t.syms[pair.1 as usize]);
        let new = t.sym(composed.clone(), len);
        let mut applied = 0u64;
        touched.clear();
        let mut ws = t.seen_in.remove(&pair).unwrap_or_default();
        ws.sort_unstable();
        ws.dedup();
        for w in ws {
            if !t.words[w].windows(2).any(|p| (p[0], p[1]) == pair) {
                continue;
            }
            t.add_pairs(w, false, &mut touched);
            let old = core::mem::take(&mut t.words[w]);
            let mut merged = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && (old[i], old[i + 1]) == pair {
                    merged.push(new);
                    applied += t.counts[w];
                    i += 2;
                } else {
                    merged.push(old[i]);
                    i += 1;
                }
            }
            t.words[w] = merged;
            t.add_pairs(w, true, &mut touched);
        }
        touched.sort_unstable();
        touched.dedup();
        for key in &touched {
            if let Some(&c) = t.pairs.get(key) {
                if c > 0 {
                    heap.push((c, Reverse(*key)));
                }
            }
        }
        out.push(CandidateMerge {
            left: t.syms[pair.0 as usize].clone(),
            right: t.syms[pair.1 as usize].clone(),
            composed,
            fire_count: applied,
            order: out.len(),
        });
    }
    Ok(out)
}

/// Splits candidates into admissible and cross-script (rejected) sets by
/// profiling each composed surface.
pub fn filter_cross_script(
    candidates: Vec<CandidateMerge>,
    table: &ScriptTable,
) -> (Vec<CandidateMerge>, Vec<CandidateMerge>) {
    let bt = ByteBijection;
    candidates.into_iter().partition(|c| {
        let bytes = bt.decode(&c.composed).unwrap_or_default();
        !table.profile_bytes(&bytes).is_cross_script
    })
}

/// Admissible candidates grouped by writing-system class. Script-free
/// candidates (byte intermediates like `Ġ` + lead byte) are
/// character infrastructure.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CandidatePools {
    pub per_script: BTreeMap<String, Vec<CandidateMerge>>,
    pub infra: Vec<CandidateMerge>,
}

impl CandidatePools {
    pub fn from_admissible(admissible: Vec<CandidateMerge>, table: &ScriptTable) -> Self {
        let bt = ByteBijection;
        let mut pools = CandidatePools::default();
        for c in admissible {
            let bytes = bt.decode(&c.composed).unwrap_or_default();
            match table.profile_bytes(&bytes).scripts.first() {
                Some(&s) => {
                    let class = String::from(table.class_name(table.class_of(s)));
                    pools.per_script.entry(class).or_default().push(c);
                }
                None => pools.infra.push(c),
            }
        }
        for v in pools.per_script.values_mut() {
            v.sort_by_key(|c| (Reverse(c.fire_count), c.order));
        }
        pools
    }

    /// Saturation curves over candidates not already in `model`.
    pub fn curves(&self, model: &TokenizerModel) -> Vec<SaturationCurve> {
        self.per_script
            .iter()
            .map(|(s, cands)| {
                SaturationCurve::from_fires(
                    s.clone(),
                    cands
                        .iter()
                        .filter(|c| !model.vocab.contains_key(&c.composed))
                        .map(|c| c.fire_count),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    CharInfra,
    WordLevel,
    SingleScript,
    Numeral,
    Punctuation,
    Artifact,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::CharInfra,
        Category::WordLevel,
        Category::SingleScript,
        Category::Numeral,
        Category::Punctuation,
        Category::Artifact,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::CharInfra => "char-infra",
            Category::WordLevel => "word-level",
            Category::SingleScript => "single-script",
            Category::Numeral => "numeral",
            Category::Punctuation => "punctuation",
            Category::Artifact => "artifact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub token: String,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
    /// The merge that composes this token, when one is needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge: Option<Merge>,
    #[serde(default)]
    pub fire_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SurgeryPlan {
    pub removals: Vec<TokenId>,
    pub removed_tokens: Vec<String>,
    pub insertions: Vec<Insertion>,
    /// Appended after every inherited merge, in training order.
    pub new_merges: Vec<Merge>,
    /// Artifact entries already in the vocabulary, kept as they are.
    #[serde(default)]
    pub retained_artifacts: Vec<String>,
    /// Requested entries skipped because the vocabulary already has them.
    #[serde(default)]
    pub skipped_present: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub slots: usize,
    pub merges: usize,
}

impl SurgeryPlan {
    pub fn is_empty(&self) -> bool {
        self.insertions.is_empty() && self.removals.is_empty()
    }

    pub fn merge_free(&self) -> usize {
        self.insertions.iter().filter(|i| i.merge.is_none()).count()
    }

    /// Slots and merges per category, in a fixed category order.
    pub fn summary(&self) -> Vec<CategoryRow> {
        Category::ALL
            .into_iter()
            .map(|category| {
                let of: Vec<&Insertion> = self.insertions.iter().filter(|i| i.category == category).collect();
                CategoryRow {
                    category,
                    slots: of.len(),
                    merges: of.iter().filter(|i| i.merge.is_some()).count(),
                }
            })
            .collect()
    }

    pub fn count(&self, category: Category) -> usize {
        self.insertions.iter().filter(|i| i.category == category).count()
    }
}

/// Non-candidate entries, as raw UTF-8 (artifacts may be broken UTF-8).
#[derive(Debug, Clone, Default)]
pub struct ExtraEntries<'a> {
    pub words: &'a [Vec<u8>],
    pub numerals: &'a [Vec<u8>],
    pub punctuation: &'a [Vec<u8>],
    pub artifacts: &'a [Vec<u8>],
}

struct Builder<'m> {
    model: &'m TokenizerModel,
    present: HashSet<String>,
    insertions: Vec<Insertion>,
    skipped: usize,
}

impl Builder<'_> {
    fn has(&self, t: &str) -> bool {
        self.model.vocab.contains_key(t) || self.present.contains(t)
    }

    fn push(&mut self, ins: Insertion) {
        self.present.insert(ins.token.clone());
        self.insertions.push(ins);
    }

    /// Infra candidates needed (in dependency order) so that `tok` exists;
    /// `None` when some missing piece is not infrastructure.
    fn infra_chain<'c>(
        &self,
        tok: &str,
        infra: &HashMap<&str, &'c CandidateMerge>,
        acc: &mut Vec<&'c CandidateMerge>,
    ) -> Option<()> {
        if self.has(tok) || acc.iter().any(|c| c.composed == tok) {
            return Some(());
        }
        let c = *infra.get(tok)?;
        self.infra_chain(&c.left, infra, acc)?;
        self.infra_chain(&c.right, infra, acc)?;
        acc.push(c);
        Some(())
    }
}

/// Assembles a budget-balanced plan: `allocation.x[s]` top candidates per
/// script (with any character-infrastructure intermediates they need), then
/// word, numeral, punctuation and artifact entries, paid for with dead slots.
pub fn assemble_plan(
    model: &TokenizerModel,
    pre: &dyn PreTokenize,
    dead: &DeadSlotReport,
    allocation: &AllocationResult,
    pools: &CandidatePools,
    extra: &ExtraEntries<'_>,
) -> Result<SurgeryPlan, SurgeryError> {
    if model.alphabet != TokenAlphabet::ByteLevel {
        return Err(SurgeryError::UnsupportedAlphabet);
    }
    let bt = ByteBijection;
    let mut b = Builder {
        model,
        present: HashSet::new(),
        insertions: Vec::new(),
        skipped: 0,
    };
    let infra: HashMap<&str, &CandidateMerge> = pools.infra.iter().map(|c| (c.composed.as_str(), c)).collect();

    for (script, &want) in allocation.scripts.iter().zip(&allocation.x) {
        if want == 0 {
            continue;
        }
        let cands = pools.per_script.get(script).map(Vec::as_slice).unwrap_or(&[]);
        let mut got = 0;
        for c in cands {
            if got == want {
                break;
            }
            if b.has(&c.composed) {
                continue;
            }
            let mut chain = Vec::new();
            if b.infra_chain(&c.left, &infra, &mut chain).is_none()
                || b.infra_chain(&c.right, &infra, &mut chain).is_none()
            {
                continue;
            }
            for ic in chain {
                b.push(Insertion {
                    token: ic.composed.clone(),
                    category: Category::CharInfra,
                    script: None,
                    merge: Some(ic.merge()),
                    fire_count: ic.fire_count,
                });
            }
            b.push(Insertion {
                token: c.composed.clone(),
                category: Category::SingleScript,
                script: Some(script.clone()),
                merge: Some(c.merge()),
                fire_count: c.fire_count,
            });
            got += 1;
        }
        if got < want {
            return Err(SurgeryError::InsufficientCandidates {
                script: script.clone(),
                want,
                got,
            });
        }
    }

    let mut ranges = Vec::new();
    for word in extra.words {
        let tok = bt.encode(word);
        if b.has(&tok) {
            b.skipped += 1;
            continue;
        }
        ranges.clear();
        split_bytes(pre, word, &mut ranges);
        let reachable = b
            .insertions
            .iter()
            .filter_map(|i| i.merge.as_ref())
            .any(|m| m.composed() == tok);
        if !reachable && !(model.ignore_merges && ranges.len() == 1) {
            return Err(SurgeryError::UnreachableWord(
                String::from_utf8_lossy(word).into_owned(),
            ));
        }
        b.push(Insertion {
            token: tok,
            category: Category::WordLevel,
            script: None,
            merge: None,
            fire_count: 0,
        });
    }
    let mut retained = Vec::new();
    for (list, category) in [
        (extra.numerals, Category::Numeral),
        (extra.punctuation, Category::Punctuation),
        (extra.artifacts, Category::Artifact),
    ] {
        for entry in list {
            let tok = bt.encode(entry);
            if b.has(&tok) {
                if category == Category::Artifact && model.vocab.contains_key(&tok) {
                    retained.push(tok);
                } else {
                    b.skipped += 1;
                }
                continue;
            }
            b.push(Insertion {
                token: tok,
                category,
                script: None,
                merge: None,
                fire_count: 0,
            });
        }
    }

    let mut new_merges: Vec<(usize, Merge)> = Vec::new();
    let order: HashMap<&str, usize> = pools
        .per_script
        .values()
        .flatten()
        .chain(&pools.infra)
        .map(|c| (c.composed.as_str(), c.order))
        .collect();
    for ins in &b.insertions {
        if let Some(m) = &ins.merge {
            new_merges.push((order.get(ins.token.as_str()).copied().unwrap_or(usize::MAX), m.clone()));
        }
    }
    new_merges.sort_by_key(|(o, _)| *o);
    let new_merges: Vec<Merge> = new_merges.into_iter().map(|(_, m)| m).collect();

    let removals = choose_removals(model, dead, b.insertions.len(), &new_merges)?;
    let id_table = model.id_table();
    let removed_tokens = removals
        .iter()
        .map(|&id| match id_table[id as usize] {
            Some(crate::model::TokenRef::Normal(t)) => String::from(t),
            _ => unreachable!("removals are normal tokens"),
        })
        .collect();
    Ok(SurgeryPlan {
        removals,
        removed_tokens,
        insertions: b.insertions,
        new_merges,
        retained_artifacts: retained,
        skipped_present: b.skipped,
    })
}

/// Takes the first `need` dead slots (zero-fire first), skipping byte
/// tokens, specials, and any token that is an operand of a merge whose
/// result survives. Protection is re-run until the chosen set is closed.
fn choose_removals(
    model: &TokenizerModel,
    dead: &DeadSlotReport,
    need: usize,
    new_merges: &[Merge],
) -> Result<Vec<TokenId>, SurgeryError> {
    if need == 0 {
        return Ok(Vec::new());
    }
    let id_table = model.id_table();
    let bytes = model.byte_token_set();
    let pool: Vec<(TokenId, &str)> = dead
        .candidates()
        .filter_map(|id| match id_table.get(id as usize).copied().flatten() {
            Some(crate::model::TokenRef::Normal(t)) if !bytes.contains(t) => Some((id, t)),
            _ => None,
        })
        .collect();
    let in_pool: HashSet<&str> = pool.iter().map(|&(_, t)| t).collect();
    // operand → composed results, only for pool tokens
    let mut uses: HashMap<&str, Vec<String>> = HashMap::new();
    for m in model.merges.iter().chain(new_merges) {
        for side in [m.left.as_str(), m.right.as_str()] {
            if in_pool.contains(side) {
                uses.entry(side).or_default().push(m.composed());
            }
        }
    }
    let mut excluded: HashSet<&str> = HashSet::new();
    loop {
        let chosen: Vec<(TokenId, &str)> = pool
            .iter()
            .filter(|(_, t)| !excluded.contains(t))
            .take(need)
            .copied()
            .collect();
        if chosen.len() < need {
            return Err(SurgeryError::InsufficientDeadSlots {
                need,
                have: chosen.len(),
            });
        }
        let set: HashSet<&str> = chosen.iter().map(|&(_, t)| t).collect();
        let exposed: Vec<&str> = chosen
            .iter()
            .map(|&(_, t)| t)
            .filter(|t| {
                uses.get(t)
                    .is_some_and(|rs| rs.iter().any(|r| !set.contains(r.as_str())))
            })
            .collect();
        if exposed.is_empty() {
            let mut ids: Vec<TokenId> = chosen.into_iter().map(|(id, _)| id).collect();
            ids.sort_unstable();
            return Ok(ids);
        }
        excluded.extend(exposed);
    }
}

/// Applies a plan atomically: removed tokens free their IDs, insertions
/// take the freed IDs in ascending order, dangling merges are dropped and
/// new merges are appended. Surviving tokens keep their IDs.
pub fn apply_surgery(model: &TokenizerModel, plan: &SurgeryPlan) -> Result<TokenizerModel, SurgeryError> {
    if plan.removals.len() != plan.insertions.len() {
        return Err(SurgeryError::Unbalanced {
            removals: plan.removals.len(),
            insertions: plan.insertions.len(),
        });
    }
    let id_table = model.id_table();
    let bytes = model.byte_token_set();
    let mut removed = Vec::with_capacity(plan.removals.len());
    for &id in &plan.removals {
        match id_table.get(id as usize).copied().flatten() {
            Some(crate::model::TokenRef::Normal(t)) if !bytes.contains(t) => removed.push(t),
            _ => return Err(SurgeryError::BadRemoval(id)),
        }
    }
    let mut out = model.clone();
    for t in &removed {
        out.vocab.remove(*t);
    }
    let mut free = plan.removals.clone();
    free.sort_unstable();
    free.dedup();
    if free.len() != plan.removals.len() {
        return Err(SurgeryError::BadRemoval(plan.removals[0]));
    }
    for (ins, id) in plan.insertions.iter().zip(free) {
        if out.vocab.insert(ins.token.clone(), id).is_some() || model.vocab.contains_key(&ins.token) {
            return Err(SurgeryError::AlreadyPresent(ins.token.clone()));
        }
    }
    out.repair_closure();
    out.merges.extend(plan.new_merges.iter().cloned());
    out.check()?;
    Ok(out)
}

/// Renumbers non-pinned entries so fire counts are non-increasing in ID
/// (ties keep old ID order). Pinned specials keep their IDs.
pub fn permute_ids(model: &TokenizerModel, fires: &FireCounts) -> Result<TokenizerModel, SurgeryError> {
    let table = model.id_table();
    if fires.counts.len() < table.len() {
        return Err(SurgeryError::FiresMismatch {
            got: fires.counts.len(),
            want: table.len(),
        });
    }
    let pinned: HashSet<TokenId> = model.special_tokens.iter().filter(|s| s.pinned).map(|s| s.id).collect();
    let mut movable: Vec<TokenId> = (0..table.len() as TokenId)
        .filter(|id| table[*id as usize].is_some() && !pinned.contains(id))
        .collect();
    let mut slots = movable.clone();
    slots.sort_unstable();
    movable.sort_by_key(|&id| (Reverse(fires.get(id)), id));
    let remap: HashMap<TokenId, TokenId> = movable.into_iter().zip(slots).collect();
    let mut out = model.clone();
    for id in out.vocab.values_mut() {
        *id = remap[id];
    }
    for s in &mut out.special_tokens {
        if let Some(&n) = remap.get(&s.id) {
            s.id = n;
        }
    }
    // specials stay in ID order, as they are written
    out.special_tokens.sort_by_key(|s| s.id);
    Ok(out)
}

/// Moves per-ID counts along with a permutation: `old` and `new` must hold
/// the same surfaces.
pub fn remap_fires(old: &TokenizerModel, new: &TokenizerModel, fires: &FireCounts) -> FireCounts {
    let mut out = FireCounts::new(new.declared_size());
    out.total_tokens = fires.total_tokens;
    for (t, &id) in &old.vocab {
        if let Some(&n) = new.vocab.get(t) {
            out.counts[n as usize] = fires.get(id);
        }
    }
    for s in &old.special_tokens {
        if let Some(n) = new.special_tokens.iter().find(|x| x.content == s.content) {
            out.counts[n.id as usize] = fires.get(s.id);
        }
    }
    out
}

/// Slot and merge bookkeeping: `merges = slots - merge_free`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub slots: usize,
    pub merge_free: usize,
    pub merges: usize,
}

pub fn composition(plan: &SurgeryPlan) -> Composition {
    let slots = plan.insertions.len();
    let merge_free = plan.merge_free();
    Composition {
        slots,
        merge_free,
        merges: slots - merge_free,
    }
}
