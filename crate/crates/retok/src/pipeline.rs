//! Stage drivers: crop, audit, allocate, surgery, verify. Each stage reads
//! its inputs, runs the core computation and writes its artifacts under the
//! output directory; `run_pipeline` chains them.
//!
//! Output layout:
//!
//! ```text
//! crop/     tokenizer.json plan.json removals.csv
//! audit/    fires.json dead_slots.json report.txt report.json
//! audit/final/  the same, for the final tokenizer
//! allocate/ pools.json allocation.json policies.csv
//! surgery/  plan.json composition.csv tokenizer.json
//! verify/   report.txt unified.csv
//! tokenizer.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use retok_core::allocation::{allocate, compare_policies, AllocationProblem, AllocationResult, PolicyRow};
use retok_core::audit::{
    find_dead_slots, run_audit_suite, AuditInputs, AuditReport, DeadSlotReport, FireCounts, LoadEvidence,
};
use retok_core::crop::{apply_crop, plan_crop, CropPlan};
use retok_core::model::TokenRef;
use retok_core::surgery::{
    apply_surgery, assemble_plan, filter_cross_script, permute_ids, train_candidates, CandidatePools, ExtraEntries,
    SurgeryError, SurgeryPlan, TrainConfig,
};
use retok_core::verify::{
    verify_max_byte_length, verify_no_cross_script_merges, verify_unified, UnifiedReport, VerifyReport,
};
use retok_core::{ScriptTable, TokenId, TokenizerModel};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus::{read_corpus, read_entry_list, Corpus};
use crate::format::{load_tokenizer, parse_tokenizer, TokenizerFile};
use crate::parallel::count_fires_parallel;
use crate::pretok::{build_tokenizer, pre_tokenizer_for};
use crate::report;

pub struct Context {
    pub cfg: PipelineConfig,
    pub jobs: usize,
    pub table: ScriptTable,
}

impl Context {
    pub fn new(cfg: PipelineConfig, jobs: usize) -> Result<Self> {
        let table = load_table(cfg.input.script_table.as_deref())?;
        Ok(Context { cfg, jobs, table })
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.cfg.output.dir.join(rel)
    }

    fn require<'a>(&self, p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| anyhow!("config: `{name}` is required for this stage"))
    }

    pub fn input_tokenizer(&self) -> Result<TokenizerFile> {
        let p = self.require(&self.cfg.input.tokenizer, "input.tokenizer")?;
        load_tokenizer(p).with_context(|| format!("loading {}", p.display()))
    }

    pub fn audit_corpus(&self) -> Result<Corpus> {
        let p = self.require(&self.cfg.audit.corpus, "audit.corpus")?;
        read_corpus(p).with_context(|| format!("reading {}", p.display()))
    }

    pub fn fires(&self, model: &TokenizerModel, corpus: &Corpus) -> Result<FireCounts> {
        let tk = build_tokenizer(model)?;
        Ok(count_fires_parallel(&tk, &corpus.docs(), self.jobs))
    }

    /// A stage artifact from an earlier run.
    pub fn read_artifact<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T> {
        let p = self.out(rel);
        let bytes = fs::read(&p).with_context(|| format!("{} (run the earlier stage first)", p.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))
    }

    /// The model a stage works on: an earlier stage's output when present,
    /// else the configured input.
    pub fn stage_input(&self, rel: &str) -> Result<TokenizerFile> {
        let p = self.out(rel);
        if p.exists() {
            load_tokenizer(&p).with_context(|| format!("loading {}", p.display()))
        } else {
            self.input_tokenizer()
        }
    }
}

pub fn load_table(path: Option<&Path>) -> Result<ScriptTable> {
    match path {
        None => Ok(ScriptTable::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ScriptTable::parse(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn io<T>(r: std::io::Result<T>, path: &Path) -> Result<T> {
    r.with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    io(report::write_json(path, v), path)
}

fn write_table(path: &Path, t: (Vec<String>, Vec<Vec<String>>)) -> Result<()> {
    io(report::write_csv(path, &t.0, &t.1), path)
}

fn save(file: &TokenizerFile, path: &Path) -> Result<()> {
    file.save(path).with_context(|| format!("writing {}", path.display()))
}

pub struct CropOutput {
    pub file: TokenizerFile,
    pub plan: CropPlan,
}

pub fn run_crop(ctx: &Context) -> Result<CropOutput> {
    let base = ctx.input_tokenizer()?;
    let target = ctx.cfg.crop.target_budget.unwrap_or_else(|| base.model.vocab_size());
    // filler removal is ranked by audit-corpus fires, when a corpus is set
    let fires = match &ctx.cfg.audit.corpus {
        Some(_) => Some(ctx.fires(&base.model, &ctx.audit_corpus()?)?),
        None => None,
    };
    let plan = plan_crop(
        &base.model,
        &ctx.table,
        &ctx.cfg.crop.prune_scripts,
        target,
        fires.as_ref(),
    )?;
    let cropped = apply_crop(&base.model, &plan)?;
    let file = base.with_model(cropped);
    save(&file, &ctx.out("crop/tokenizer.json"))?;
    write_json(&ctx.out("crop/plan.json"), &plan)?;
    write_table(&ctx.out("crop/removals.csv"), report::crop_table(&plan))?;
    Ok(CropOutput { file, plan })
}

pub struct AuditOutput {
    pub fires: FireCounts,
    pub dead: DeadSlotReport,
    pub report: AuditReport,
}

/// Whether a marginal token may be dropped: not in a protected script.
fn marginal_policy<'a>(
    model: &'a TokenizerModel,
    table: &'a ScriptTable,
    protect: &[String],
) -> impl Fn(TokenId) -> bool + 'a {
    let protected: Vec<u16> = protect.iter().filter_map(|s| table.script_id(s)).collect();
    let id_table = model.id_table();
    let droppable: Vec<bool> = id_table
        .iter()
        .map(|e| match e {
            Some(TokenRef::Normal(t)) => {
                let p = table.profile_bytes(&model.token_bytes(t));
                !p.scripts.iter().any(|s| protected.contains(s))
            }
            _ => false,
        })
        .collect();
    move |id| droppable.get(id as usize).copied().unwrap_or(false)
}

/// Parse, and save-then-reparse identity, for the audit's file checks.
pub fn load_evidence(file: &TokenizerFile) -> LoadEvidence {
    let reparsed = parse_tokenizer(&file.to_json_string());
    LoadEvidence {
        parsed: true,
        reloaded_identical: reparsed.is_ok_and(|f| f.model == file.model),
    }
}

/// Pinned specials of `model` as (content, id) pairs.
pub fn pinned_specials(model: &TokenizerModel) -> Vec<(String, TokenId)> {
    model
        .special_tokens
        .iter()
        .filter(|s| s.pinned)
        .map(|s| (s.content.clone(), s.id))
        .collect()
}

/// What an audit compares against: the expected pre-tokenizer pattern and
/// pinned special placements.
#[derive(Debug, Clone, Default)]
pub struct AuditReference {
    pub pattern: Option<String>,
    pub specials: Vec<(String, TokenId)>,
}

/// Fires, dead slots and the audit suite for `file`, written under `dir`.
pub fn run_audit(ctx: &Context, file: &TokenizerFile, reference: &AuditReference, dir: &str) -> Result<AuditOutput> {
    let model = &file.model;
    let corpus = ctx.audit_corpus()?;
    let tk = build_tokenizer(model)?;
    let docs = corpus.docs();
    let fires = count_fires_parallel(&tk, &docs, ctx.jobs);
    let policy = marginal_policy(model, &ctx.table, &ctx.cfg.audit.protect_scripts);
    let dead = find_dead_slots(&fires, ctx.cfg.audit.floor_per_billion, policy);
    let inputs = AuditInputs {
        corpus: &docs,
        reference_pattern: reference.pattern.as_deref(),
        expected_specials: &reference.specials,
        load: Some(load_evidence(file)),
        ..AuditInputs::default()
    };
    let report = run_audit_suite(model, &tk, &ctx.table, &inputs);
    write_json(&ctx.out(&format!("{dir}/fires.json")), &fires)?;
    write_json(&ctx.out(&format!("{dir}/dead_slots.json")), &dead)?;
    write_json(&ctx.out(&format!("{dir}/report.json")), &report)?;
    let p = ctx.out(&format!("{dir}/report.txt"));
    io(report::write_text(&p, &report::audit_text(&report)), &p)?;
    Ok(AuditOutput { fires, dead, report })
}

/// Word, numeral, punctuation and artifact entry lists.
#[derive(Debug, Clone, Default)]
pub struct Extras {
    pub words: Vec<Vec<u8>>,
    pub numerals: Vec<Vec<u8>>,
    pub punctuation: Vec<Vec<u8>>,
    pub artifacts: Vec<Vec<u8>>,
}

impl Extras {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let read = |p: &Option<PathBuf>| -> Result<Vec<Vec<u8>>> {
            match p {
                Some(p) => Ok(read_entry_list(p)?),
                None => Ok(Vec::new()),
            }
        };
        Ok(Extras {
            words: read(&cfg.surgery.words)?,
            numerals: read(&cfg.surgery.numerals)?,
            punctuation: read(&cfg.surgery.punctuation)?,
            artifacts: read(&cfg.surgery.artifacts)?,
        })
    }

    pub fn entries(&self) -> ExtraEntries<'_> {
        ExtraEntries {
            words: &self.words,
            numerals: &self.numerals,
            punctuation: &self.punctuation,
            artifacts: &self.artifacts,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationArtifact {
    pub requested_budget: Option<usize>,
    /// Budget after fitting to capacity and to the available dead slots.
    pub budget: usize,
    pub dead_slots: usize,
    pub rejected_cross_script: usize,
    pub result: AllocationResult,
    pub policies: Vec<PolicyRow>,
}

pub struct AllocateOutput {
    pub pools: CandidatePools,
    pub artifact: AllocationArtifact,
    pub plan: SurgeryPlan,
}

pub fn train_config(cfg: &PipelineConfig) -> TrainConfig {
    TrainConfig {
        max_candidates: cfg.surgery.max_candidates,
        min_count: cfg.surgery.min_count,
        max_token_bytes: cfg.surgery.max_token_bytes,
    }
}

/// Trains candidates, solves the allocation, and shrinks the budget until
/// the resulting plan fits in the dead slots.
pub fn run_allocate(
    ctx: &Context,
    model: &TokenizerModel,
    dead: &DeadSlotReport,
    extras: &Extras,
) -> Result<AllocateOutput> {
    let p = ctx.require(&ctx.cfg.surgery.train_corpus, "surgery.train_corpus")?;
    let train = read_corpus(p).with_context(|| format!("reading {}", p.display()))?;
    let pre = pre_tokenizer_for(&model.pretokenizer_pattern)?;
    let cands = train_candidates(train.texts(), &*pre, &train_config(&ctx.cfg))?;
    let (ok, rejected) = filter_cross_script(cands, &ctx.table);
    let mut pools = CandidatePools::from_admissible(ok, &ctx.table);
    let wanted = &ctx.cfg.allocation.scripts;
    let curves: Vec<_> = pools
        .curves(model)
        .into_iter()
        .filter(|c| wanted.is_empty() || wanted.contains(&c.script))
        .collect();
    if !wanted.is_empty() {
        pools.per_script.retain(|s, _| wanted.contains(s));
    }
    let capacity: usize = curves.iter().map(|c| c.ceiling()).sum();
    let mut budget = ctx
        .cfg
        .allocation
        .budget
        .unwrap_or(usize::MAX)
        .min(capacity)
        .min(dead.len());
    let policy = ctx.cfg.allocation.policy()?;
    let (problem, result, plan) = loop {
        let problem = AllocationProblem::new(curves.clone(), budget)?;
        let result = allocate(&problem, policy)?;
        match assemble_plan(model, &*pre, dead, &result, &pools, &extras.entries()) {
            Ok(plan) => break (problem, result, plan),
            Err(SurgeryError::InsufficientDeadSlots { need, have }) if budget > 0 => {
                budget -= (need - have).clamp(1, budget);
            }
            Err(e) => return Err(e.into()),
        }
    };
    let artifact = AllocationArtifact {
        requested_budget: ctx.cfg.allocation.budget,
        budget,
        dead_slots: dead.len(),
        rejected_cross_script: rejected.len(),
        policies: compare_policies(&problem)?,
        result,
    };
    write_json(&ctx.out("allocate/pools.json"), &pools)?;
    write_json(&ctx.out("allocate/allocation.json"), &artifact)?;
    write_table(
        &ctx.out("allocate/policies.csv"),
        report::policy_table(&artifact.policies),
    )?;
    Ok(AllocateOutput { pools, artifact, plan })
}

pub struct SurgeryOutput {
    pub plan: SurgeryPlan,
    /// Surgery result before ID permutation.
    pub applied: TokenizerModel,
    pub file: TokenizerFile,
}

pub fn run_surgery(ctx: &Context, input: &TokenizerFile, plan: SurgeryPlan) -> Result<SurgeryOutput> {
    let applied = apply_surgery(&input.model, &plan)?;
    save(&input.with_model(applied.clone()), &ctx.out("surgery/tokenizer.json"))?;
    let finished = if ctx.cfg.surgery.permute {
        let fires = ctx.fires(&applied, &ctx.audit_corpus()?)?;
        permute_ids(&applied, &fires)?
    } else {
        applied.clone()
    };
    let file = input.with_model(finished);
    write_json(&ctx.out("surgery/plan.json"), &plan)?;
    write_table(&ctx.out("surgery/composition.csv"), report::composition_table(&plan))?;
    save(&file, &ctx.out("tokenizer.json"))?;
    Ok(SurgeryOutput { plan, applied, file })
}

pub struct VerifyOutput {
    pub reports: Vec<VerifyReport>,
    pub unified: UnifiedReport,
}

impl VerifyOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.verdict.passed()) && self.unified.all_clean()
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        let (h, rows) = report::unified_table(&self.unified);
        s.push_str(&report::render_text_table(&h, &rows));
        s
    }
}

pub fn run_verify(ctx: &Context, name: &str, model: &TokenizerModel) -> Result<VerifyOutput> {
    let ceiling = ctx.cfg.verify.ceiling;
    let out = VerifyOutput {
        reports: vec![
            verify_no_cross_script_merges(model, &ctx.table),
            verify_max_byte_length(model, ceiling),
        ],
        unified: verify_unified(&[(name, model)], &ctx.table, ceiling),
    };
    let p = ctx.out("verify/report.txt");
    io(report::write_text(&p, &out.text()), &p)?;
    write_table(&ctx.out("verify/unified.csv"), report::unified_table(&out.unified))?;
    Ok(out)
}

pub struct PipelineOutput {
    pub base: TokenizerFile,
    pub crop: CropOutput,
    pub audit: AuditOutput,
    pub allocate: AllocateOutput,
    pub surgery: SurgeryOutput,
    /// The audit suite rerun on the final tokenizer.
    pub final_audit: AuditOutput,
    pub verify: VerifyOutput,
}

pub fn run_pipeline(ctx: &Context) -> Result<PipelineOutput> {
    ctx.cfg.validate()?;
    let base = ctx.input_tokenizer()?;
    let crop = run_crop(ctx)?;
    let crop_ref = AuditReference {
        pattern: Some(base.model.pretokenizer_pattern.clone()),
        specials: pinned_specials(&crop.file.model),
    };
    let audit = run_audit(ctx, &crop.file, &crop_ref, "audit")?;
    let extras = Extras::load(&ctx.cfg)?;
    let allocate = run_allocate(ctx, &crop.file.model, &audit.dead, &extras)?;
    let surgery = run_surgery(ctx, &crop.file, allocate.plan.clone())?;
    if surgery.file.model.vocab_size() != crop.file.model.vocab_size() {
        bail!(
            "surgery changed the vocabulary size: {} -> {}",
            crop.file.model.vocab_size(),
            surgery.file.model.vocab_size()
        );
    }
    let final_audit = run_audit(ctx, &surgery.file, &crop_ref, "audit/final")?;
    let verify = run_verify(ctx, "retrofit", &surgery.file.model)?;
    write_json(&ctx.out("config.json"), &ctx.cfg)?;
    Ok(PipelineOutput {
        base,
        crop,
        audit,
        allocate,
        surgery,
        final_audit,
        verify,
    })
}
