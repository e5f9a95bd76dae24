//! `condebias simeval` — similarity-retention scores: correlation of model
//! cosine similarities with human judgments, on the original table and a
//! debiased counterpart, one report row per dataset.

use anyhow::{bail, Context, Result};
use debias_core::conceptor::load_conceptor;
use debias_core::embedding::EmbeddingTable;
use debias_core::simeval::{evaluate_similarity_with, load_similarity_dataset, CorrelationMetric};

use crate::support::{
    aligned_table, default_out, ensure_parent, load_prepared_table, resolve_out, Provenance,
};
use crate::{GlobalArgs, SimevalArgs};

const HEADER: [&str; 8] = [
    "dataset",
    "orig_r",
    "orig_used",
    "orig_skipped",
    "debiased_r",
    "debiased_used",
    "debiased_skipped",
    "status",
];

pub fn run(global: &GlobalArgs, args: &SimevalArgs) -> Result<u8> {
    let table = load_prepared_table(&args.table, false, global)?;
    let debiased: EmbeddingTable = match (&args.debiased, &args.conceptor) {
        (Some(path), None) => load_prepared_table(path, false, global)?,
        (None, Some(path)) => {
            let conceptor =
                load_conceptor(path).with_context(|| format!("loading {}", path.display()))?;
            conceptor
                .negate()
                .apply_debias(&table)
                .context("applying the negated conceptor")?
        }
        (None, None) => bail!("need --debiased TABLE or --conceptor FILE to compare against"),
        (Some(_), Some(_)) => unreachable!("clap marks --debiased and --conceptor as conflicting"),
    };
    let metric = if args.spearman {
        CorrelationMetric::Spearman
    } else {
        CorrelationMetric::Pearson
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut failures = 0usize;
    for path in &args.datasets {
        let dataset = match load_similarity_dataset(path) {
            Ok(d) => d,
            Err(e) => {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                rows.push(error_row(&name, format!("error: {e}")));
                failures += 1;
                continue;
            }
        };
        let orig = evaluate_similarity_with(&table, &dataset, global.lowercase_fallback, metric);
        let deb = evaluate_similarity_with(&debiased, &dataset, global.lowercase_fallback, metric);
        let mut cells = vec![dataset.name().to_string()];
        let mut status: Option<String> = None;
        for outcome in [&orig, &deb] {
            match outcome {
                Ok(o) => {
                    cells.push(format!("{:.2}", o.score));
                    cells.push(o.used.to_string());
                    cells.push(o.skipped.to_string());
                }
                Err(e) => {
                    cells.extend(["NA".to_string(), "NA".to_string(), "NA".to_string()]);
                    status.get_or_insert_with(|| format!("error: {e}"));
                }
            }
        }
        if let Some(status) = status {
            cells.push(status);
            failures += 1;
        } else {
            cells.push("ok".to_string());
        }
        rows.push(cells);
    }

    let out = match &args.out {
        Some(path) => resolve_out(global, path),
        None => default_out(global, "simeval_report.tsv"),
    };
    ensure_parent(&out)?;
    let mut text = HEADER.join("\t");
    text.push('\n');
    for row in &rows {
        text.push_str(&row.join("\t"));
        text.push('\n');
    }
    std::fs::write(&out, &text).with_context(|| format!("writing report {}", out.display()))?;

    if args.mirror {
        let mirror_path = out.with_extension("txt");
        std::fs::write(&mirror_path, aligned_table(&HEADER, &rows))
            .with_context(|| format!("writing mirror {}", mirror_path.display()))?;
        println!("wrote mirror {}", mirror_path.display());
    }

    let mut prov = Provenance::new("simeval");
    prov.param("metric", metric.as_str())
        .param("normalize", global.normalize)
        .param("center", global.center)
        .param("lowercase_fallback", global.lowercase_fallback);
    prov.input(&args.table)?;
    if let Some(path) = &args.debiased {
        prov.input(path)?;
    }
    if let Some(path) = &args.conceptor {
        prov.input(path)?;
    }
    for path in &args.datasets {
        if path.exists() {
            prov.input(path)?;
        }
    }
    prov.write(&out)?;

    println!(
        "{} dataset(s), {} failed -> {}",
        rows.len(),
        failures,
        out.display()
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn error_row(name: &str, status: String) -> Vec<String> {
    let mut cells = vec![name.to_string()];
    cells.extend(std::iter::repeat_n("NA".to_string(), HEADER.len() - 2));
    cells.push(status);
    cells
}
