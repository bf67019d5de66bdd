//! `retok` command line. Exit codes: 0 success, 1 a verification check
//! failed, 2 configuration, input or I/O error.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use retok_core::audit::AuditStatus;
use retok_core::eval::{
    bytes_per_token, digit_grouping_check, fertility, merge_trace, regime_classify, token_volume, Group,
};
use retok_core::verify::{
    verify_max_byte_length, verify_no_cross_script_merges, verify_structural_identity, verify_unified, VerifyReport,
};
use retok_core::Tokenizer;

use crate::config::PipelineConfig;
use crate::corpus::{Corpus, Manifest};
use crate::format::load_tokenizer;
use crate::pipeline::{self, load_table, Context, Extras};
use crate::pretok::build_tokenizer;
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "retok", version, about = "Byte-level BPE vocabulary retrofit toolkit")]
pub struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for corpus counting; 0 = all cores. Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Config override, `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove pruned-script tokens and trim to the target budget.
    Crop(CropArgs),
    /// Count fires on the audit corpus, find dead slots, run the audit suite.
    Audit(AuditArgs),
    /// Train candidates and solve the per-script slot allocation.
    Allocate(AllocateArgs),
    /// Allocate, then apply the surgery plan and permute IDs.
    Surgery(AllocateArgs),
    /// Structural checks.
    Verify(VerifyArgs),
    /// Fertility, bytes per token, token volume, traces, regimes.
    Eval(EvalArgs),
    /// crop, audit, allocate, surgery, verify.
    Pipeline,
    /// Regenerate the bundled synthetic tokenizers.
    #[command(hide = true)]
    Fixtures {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CropArgs {
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Comma-separated script or class names.
    #[arg(long, value_delimiter = ',')]
    pub prune: Vec<String>,
    #[arg(long)]
    pub target: Option<usize>,
    /// Corpus whose fires rank filler removals.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Dead-slot floor, per 10^9 tokens.
    #[arg(long)]
    pub floor: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// greedy, worst-script-first, frequency-only or equal.
    #[arg(long)]
    pub policy: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub check: VerifyCheck,
    /// Byte-length ceiling.
    #[arg(long, global = true)]
    pub ceiling: Option<usize>,
    /// Script table file.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCheck {
    /// No merge entry joins two writing systems.
    Merges { tokenizer: PathBuf },
    /// No normal token exceeds the byte ceiling.
    Bytes { tokenizer: PathBuf },
    /// Normal vocabulary and merges are byte-identical.
    Identity { a: PathBuf, b: PathBuf },
    /// One diagnostic row per tokenizer.
    Unified {
        #[arg(required = true)]
        tokenizers: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `name=path` or `path`; repeatable. The first is the delta baseline.
    #[arg(long = "tokenizer", required = true)]
    pub tokenizers: Vec<String>,
    /// Manifest mapping language or corpus class to files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Text for a broken-character merge trace.
    #[arg(long)]
    pub trace: Option<String>,
}

/// Command-line flags become config overrides, so a flag and a `--set`
/// of the same field behave identically.
fn flag_overrides(cmd: &Command) -> Vec<String> {
    let mut o = Vec::new();
    let path = |k: &str, p: &Option<PathBuf>, o: &mut Vec<String>| {
        if let Some(p) = p {
            o.push(format!("{k}={}", toml_str(&abs(p).to_string_lossy())));
        }
    };
    match cmd {
        Command::Crop(a) => {
            path("input.tokenizer", &a.tokenizer, &mut o);
            path("audit.corpus", &a.corpus, &mut o);
            if !a.prune.is_empty() {
                let list: Vec<String> = a.prune.iter().map(|s| toml_str(s)).collect();
                o.push(format!("crop.prune_scripts=[{}]", list.join(",")));
            }
            if let Some(t) = a.target {
                o.push(format!("crop.target_budget={t}"));
            }
        }
        Command::Audit(a) => {
            path("audit.corpus", &a.corpus, &mut o);
            if let Some(f) = a.floor {
                o.push(format!("audit.floor_per_billion={f}"));
            }
        }
        Command::Allocate(a) | Command::Surgery(a) => {
            path("surgery.train_corpus", &a.train, &mut o);
            if let Some(b) = a.budget {
                o.push(format!("allocation.budget={b}"));
            }
            if let Some(p) = &a.policy {
                o.push(format!("allocation.policy={}", toml_str(p)));
            }
        }
        Command::Verify(a) => {
            if let Some(c) = a.ceiling {
                o.push(format!("verify.ceiling={c}"));
            }
            path("input.script_table", &a.table, &mut o);
        }
        Command::Eval(a) => path("eval.corpus", &a.corpus, &mut o),
        Command::Pipeline | Command::Fixtures { .. } => {}
    }
    o
}

/// Flag paths are relative to the working directory, never the config file.
fn abs(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut overrides = flag_overrides(&cli.command);
    if let Some(out) = &cli.out {
        overrides.push(format!("output.dir={}", toml_str(&abs(out).to_string_lossy())));
    }
    overrides.extend(cli.set.iter().cloned());
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p, &overrides)?,
        // flags given on the command line are relative to the working directory
        None => PipelineConfig::from_toml("", Path::new(""), &overrides)?,
    };
    Ok(cfg)
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool> {
    if let Command::Fixtures { dir } = &cli.command {
        write_fixtures(dir)?;
        return Ok(true);
    }
    let cfg = load_config(cli)?;
    if let Command::Verify(v) = &cli.command {
        return verify_cmd(&cfg, &v.check);
    }
    if let Command::Eval(e) = &cli.command {
        return eval_cmd(&cfg, e);
    }
    cfg.validate()?;
    let ctx = Context::new(cfg, cli.jobs)?;
    match &cli.command {
        Command::Crop(_) => {
            let out = pipeline::run_crop(&ctx)?;
            let (h, rows) = report::crop_table(&out.plan);
            print!("{}", report::render_text_table(&h, &rows));
            println!("vocab: {} -> {}", out.plan.original_size, out.plan.resulting_size);
            Ok(true)
        }
        Command::Audit(a) => {
            let file = match &a.tokenizer {
                Some(p) => load_tokenizer(p)?,
                None => ctx.stage_input("crop/tokenizer.json")?,
            };
            // Special placements are only comparable when the sizes agree;
            // a crop renumbers them.
            let reference = match &ctx.cfg.input.tokenizer {
                Some(p) => {
                    let r = load_tokenizer(p)?.model;
                    pipeline::AuditReference {
                        specials: if r.vocab_size() == file.model.vocab_size() {
                            pipeline::pinned_specials(&r)
                        } else {
                            Vec::new()
                        },
                        pattern: Some(r.pretokenizer_pattern),
                    }
                }
                None => pipeline::AuditReference::default(),
            };
            let out = pipeline::run_audit(&ctx, &file, &reference, "audit")?;
            print!("{}", report::audit_text(&out.report));
            println!(
                "dead slots: {} zero-fire, {} marginal (floor {}/1e9)",
                out.dead.zero_fire.len(),
                out.dead.marginal.len(),
                out.dead.floor_per_billion
            );
            Ok(true)
        }
        Command::Allocate(a) | Command::Surgery(a) => {
            let file = match &a.tokenizer {
                Some(p) => load_tokenizer(p)?,
                None => ctx.stage_input("crop/tokenizer.json")?,
            };
            let dead = ctx.read_artifact("audit/dead_slots.json")?;
            let extras = Extras::load(&ctx.cfg)?;
            let alloc = pipeline::run_allocate(&ctx, &file.model, &dead, &extras)?;
            let (h, rows) = report::policy_table(&alloc.artifact.policies);
            print!("{}", report::render_text_table(&h, &rows));
            if let Command::Surgery(_) = &cli.command {
                let out = pipeline::run_surgery(&ctx, &file, alloc.plan)?;
                let (h, rows) = report::composition_table(&out.plan);
                print!("{}", report::render_text_table(&h, &rows));
            }
            Ok(true)
        }
        Command::Pipeline => {
            let out = pipeline::run_pipeline(&ctx)?;
            print!("{}", out.verify.text());
            let fa = &out.final_audit.report;
            println!(
                "final audit: {} pass, {} fail ({})",
                fa.count(AuditStatus::Pass),
                fa.count(AuditStatus::Fail),
                ctx.out("audit/final/report.txt").display()
            );
            println!("output: {}", ctx.out("tokenizer.json").display());
            Ok(out.verify.passed())
        }
        Command::Verify(_) | Command::Eval(_) | Command::Fixtures { .. } => unreachable!("handled above"),
    }
}

fn print_report(r: &VerifyReport) -> bool {
    println!("{r}");
    r.verdict.passed()
}

fn verify_cmd(cfg: &PipelineConfig, check: &VerifyCheck) -> Result<bool> {
    let table = load_table(cfg.input.script_table.as_deref())?;
    let ceiling = cfg.verify.ceiling;
    let load = |p: &Path| load_tokenizer(p).with_context(|| format!("loading {}", p.display()));
    Ok(match check {
        VerifyCheck::Merges { tokenizer } => {
            print_report(&verify_no_cross_script_merges(&load(tokenizer)?.model, &table))
        }
        VerifyCheck::Bytes { tokenizer } => print_report(&verify_max_byte_length(&load(tokenizer)?.model, ceiling)),
        VerifyCheck::Identity { a, b } => print_report(&verify_structural_identity(&load(a)?.model, &load(b)?.model)),
        VerifyCheck::Unified { tokenizers } => {
            let models = tokenizers
                .iter()
                .map(|p| Ok((display_name(p), load(p)?.model)))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<(&str, _)> = models.iter().map(|(n, m)| (n.as_str(), m)).collect();
            let r = verify_unified(&refs, &table, ceiling);
            let (h, rows) = report::unified_table(&r);
            print!("{}", report::render_text_table(&h, &rows));
            let ok = r.all_clean();
            println!(
                "{}",
                if ok {
                    "PASS: every tokenizer is clean."
                } else {
                    "FAIL: at least one tokenizer is not clean."
                }
            );
            ok
        }
    })
}

fn display_name(p: &Path) -> String {
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.as_str() {
        "tokenizer" => p
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(stem),
        _ => stem.trim_end_matches(".tokenizer").to_string(),
    }
}

fn eval_cmd(cfg: &PipelineConfig, args: &EvalArgs) -> Result<bool> {
    let mut named = Vec::new();
    for spec in &args.tokenizers {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => (display_name(Path::new(spec)), PathBuf::from(spec)),
        };
        let model = load_tokenizer(&path)
            .with_context(|| format!("loading {}", path.display()))?
            .model;
        named.push((name, build_tokenizer(&model)?));
    }
    let tks: Vec<(&str, &Tokenizer)> = named.iter().map(|(n, t)| (n.as_str(), t)).collect();
    let out_dir = cfg.output.dir.join("eval");

    if let Some(p) = &cfg.eval.corpus {
        let groups: Vec<(String, Corpus)> = if p.extension().is_some_and(|e| e == "json") {
            Manifest::load(p)?.read_groups()?
        } else {
            // a single file: group by the documents' own language tags
            let c = Corpus::read(p, None)?;
            let mut by: std::collections::BTreeMap<String, Corpus> = Default::default();
            for d in c.docs {
                by.entry(d.lang.clone().unwrap_or_else(|| "-".into()))
                    .or_default()
                    .docs
                    .push(d);
            }
            by.into_iter().collect()
        };
        let texts: Vec<(String, Vec<&[u8]>)> = groups.iter().map(|(n, c)| (n.clone(), c.texts())).collect();
        let gs: Vec<Group<'_>> = texts.iter().map(|(n, t)| (n.as_str(), t.as_slice())).collect();

        let fert = fertility(&tks, &gs)?;
        let t = report::fertility_table(&fert);
        print!("{}", report::render_text_table(&t.0, &t.1));
        report::write_csv(&out_dir.join("fertility.csv"), &t.0, &t.1)?;
        let t = report::compression_table(&bytes_per_token(&tks, &gs));
        report::write_csv(&out_dir.join("bytes_per_token.csv"), &t.0, &t.1)?;
        let t = report::volume_table(&token_volume(&tks, &gs));
        report::write_csv(&out_dir.join("token_volume.csv"), &t.0, &t.1)?;

        let mut rows = Vec::new();
        for (name, tk) in &tks {
            for (lang, docs) in &gs {
                let r = regime_classify(tk, docs, &cfg.eval.thresholds());
                rows.push(vec![
                    name.to_string(),
                    lang.to_string(),
                    format!("{:?}", r.regime),
                    format!("{:.6}", r.tokens_per_char),
                    format!("{:.6}", r.tokens_per_word),
                ]);
            }
        }
        report::write_csv(
            &out_dir.join("regimes.csv"),
            &["tokenizer", "language", "regime", "tokens_per_char", "tokens_per_word"],
            &rows,
        )?;
    }

    let mut digits = String::new();
    for (name, tk) in &tks {
        digits.push_str(&format!("{name}: {}\n", digit_grouping_check(tk).join("|")));
    }
    print!("{digits}");
    report::write_text(&out_dir.join("digits.txt"), &digits)?;

    if let Some(text) = &args.trace {
        let traces: Vec<_> = tks.iter().map(|(n, t)| merge_trace(n, t, text.as_bytes())).collect();
        for t in &traces {
            println!(
                "{}: {} tokens, {} broken ({:.1}%)",
                t.tokenizer,
                t.tokens,
                t.broken,
                t.pct_broken()
            );
        }
        report::write_json(&out_dir.join("trace.json"), &traces)?;
    }
    Ok(true)
}

/// Builds and writes the bundled synthetic tokenizers into `dir`, reading
/// `dir/base.json` for the training corpus.
pub fn write_fixtures(dir: &Path) -> Result<()> {
    let corpus = Manifest::load(dir.join("base.json"))?.read_all()?;
    let base = crate::fixture::build_base(&corpus.texts())?;
    crate::format::save_tokenizer(&base, dir.join("base.tokenizer.json"))?;
    crate::format::save_tokenizer(&crate::fixture::build_dirty(), dir.join("dirty.tokenizer.json"))?;
    report::write_text(
        &dir.join("script_table.txt"),
        &retok_core::ScriptTable::default().to_text(),
    )?;
    if base.vocab_size() < 300 {
        bail!("base fixture is suspiciously small ({})", base.vocab_size());
    }
    Ok(())
}
