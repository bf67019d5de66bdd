//! JSON, CSV and plain-text report writers. Column layouts follow the
//! comparison tables the toolkit reproduces: fertility per language,
//! bytes per token per corpus class, token volume with deltas, policy
//! ablation, surgery composition and the unified structural diagnostic.

use std::fs;
use std::io;
use std::path::Path;

use retok_core::allocation::PolicyRow;
use retok_core::audit::{AuditReport, AuditStatus};
use retok_core::crop::{removal_table, CropPlan};
use retok_core::eval::{CompressionRow, FertilityReport, VolumeReport};
use retok_core::surgery::SurgeryPlan;
use retok_core::verify::UnifiedReport;
use serde::Serialize;

fn ensure_parent(path: &Path) -> io::Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => fs::create_dir_all(d),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    ensure_parent(path)?;
    fs::write(path, text)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    write_text(path, &s)
}

/// Renders rows as CSV text.
pub fn csv_string<H: AsRef<str>>(header: &[H], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(|h| h.as_ref()))
        .expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv of strings is UTF-8")
}

pub fn write_csv<H: AsRef<str>>(path: &Path, header: &[H], rows: &[Vec<String>]) -> io::Result<()> {
    write_text(path, &csv_string(header, rows))
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

/// tokenizer, then `tokens/words/fertility` per language, then mean.
pub fn fertility_table(r: &FertilityReport) -> (Vec<String>, Vec<Vec<String>>) {
    let langs: Vec<String> = r
        .rows
        .first()
        .map(|row| row.cells.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = vec!["tokenizer".to_string()];
    for l in &langs {
        header.extend([format!("{l}_tokens"), format!("{l}_words"), format!("{l}_fertility")]);
    }
    header.push("mean".into());
    let rows = r
        .rows
        .iter()
        .map(|row| {
            let mut out = vec![row.tokenizer.clone()];
            for l in &langs {
                let c = row.cells[l];
                out.extend([c.tokens.to_string(), c.words.to_string(), f(c.fertility())]);
            }
            out.push(f(row.mean));
            out
        })
        .collect();
    (header, rows)
}

pub fn compression_table(rows: &[CompressionRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = [
        "tokenizer",
        "class",
        "utf8_bytes",
        "tokens",
        "chars",
        "bytes_per_token",
        "tokens_per_char",
    ];
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.tokenizer.clone(),
                r.class.clone(),
                r.cell.utf8_bytes.to_string(),
                r.cell.tokens.to_string(),
                r.cell.chars.to_string(),
                f(r.cell.bytes_per_token()),
                f(r.cell.tokens_per_char()),
            ]
        })
        .collect();
    (header.iter().map(|s| s.to_string()).collect(), rows)
}

/// Language, tokens per tokenizer, then the delta of every later
/// tokenizer against the first.
pub fn volume_table(r: &VolumeReport) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["language".to_string()];
    header.extend(r.tokenizers.iter().cloned());
    for t in r.tokenizers.iter().skip(1) {
        header.push(format!("delta_pct_{t}_vs_{}", r.tokenizers[0]));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    let deltas: Vec<_> = (1..r.tokenizers.len()).map(|b| r.deltas(0, b)).collect();
    for (lang, counts) in &r.per_language {
        let mut row = vec![lang.clone()];
        row.extend(counts.iter().map(u64::to_string));
        row.extend(deltas.iter().map(|(per, _)| format!("{:.2}", per[lang])));
        rows.push(row);
    }
    let mut total = vec!["TOTAL".to_string()];
    total.extend(r.totals.iter().map(u64::to_string));
    total.extend(deltas.iter().map(|(_, t)| format!("{t:.2}")));
    rows.push(total);
    (header, rows)
}

pub fn policy_table(rows: &[PolicyRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["policy", "slots_used", "total_savings", "delta_pct"];
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.policy.name().to_string(),
                r.slots_used.to_string(),
                r.total_savings.to_string(),
                format!("{:.2}", r.delta_pct),
            ]
        })
        .collect();
    (header.iter().map(|s| s.to_string()).collect(), rows)
}

pub fn composition_table(plan: &SurgeryPlan) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rows: Vec<Vec<String>> = plan
        .summary()
        .into_iter()
        .map(|r| {
            vec![
                r.category.label().to_string(),
                r.slots.to_string(),
                r.merges.to_string(),
            ]
        })
        .collect();
    let slots: usize = plan.insertions.len();
    let merges = slots - plan.merge_free();
    rows.push(vec!["TOTAL".into(), slots.to_string(), merges.to_string()]);
    (vec!["category".into(), "slots".into(), "merges".into()], rows)
}

pub fn crop_table(plan: &CropPlan) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rows: Vec<Vec<String>> = removal_table(plan)
        .into_iter()
        .map(|(s, n)| vec![s, n.to_string()])
        .collect();
    rows.push(vec!["filler".into(), plan.filler_removed.len().to_string()]);
    rows.push(vec![
        "TOTAL".into(),
        (plan.script_total() + plan.filler_removed.len()).to_string(),
    ]);
    (vec!["script".into(), "removed".into()], rows)
}

pub fn unified_table(r: &UnifiedReport) -> (Vec<String>, Vec<Vec<String>>) {
    let header = [
        "tokenizer".to_string(),
        "pre_tokenizer".into(),
        "vocab".into(),
        "max_bytes".into(),
        format!("over_{}", r.ceiling),
        "cross_script".into(),
        "both_clean".into(),
    ];
    let rows = r
        .rows
        .iter()
        .map(|row| {
            vec![
                row.name.clone(),
                row.pre_tokenizer.clone(),
                row.vocab.to_string(),
                row.max_bytes.to_string(),
                row.over_ceiling.to_string(),
                row.cross_script.to_string(),
                if row.both_clean { "Yes" } else { "No" }.into(),
            ]
        })
        .collect();
    (header.to_vec(), rows)
}

/// Fixed-width text rendering of a header and rows.
pub fn render_text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(c);
            s.extend(std::iter::repeat(' ').take(w - c.chars().count()));
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(header);
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

pub fn status_label(s: AuditStatus) -> &'static str {
    match s {
        AuditStatus::Pass => "PASS",
        AuditStatus::Fail => "FAIL",
        AuditStatus::Info => "INFO",
        AuditStatus::Skip => "SKIP",
    }
}

pub fn audit_text(r: &AuditReport) -> String {
    let mut out = String::new();
    for t in &r.results {
        out.push_str(&format!(
            "{:>2}  {}  {}: {}\n",
            t.test,
            status_label(t.status),
            t.name,
            t.evidence
        ));
    }
    out.push_str(&format!(
        "{} pass, {} fail, {} info, {} skip\n",
        r.count(AuditStatus::Pass),
        r.count(AuditStatus::Fail),
        r.count(AuditStatus::Info),
        r.count(AuditStatus::Skip)
    ));
    out
}
