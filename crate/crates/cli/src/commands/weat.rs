//! `condebias weat` — run the association-test grid described by a JSON
//! config: embeddings × subspaces × methods × tests, one TSV row per cell.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use debias_core::baselines::{
    bolukbasi_hard_debias, BolukbasiOptions, MuCentering, MuDebias, MuOptions, NeutralizeScope,
};
use debias_core::bias::{build_subspace_conceptor, BiasSubspaceSpec, SubspaceMode, WordList};
use debias_core::embedding::EmbeddingTable;
use debias_core::weat::{run_weat, PermutationMode, WeatOptions};
use rayon::prelude::*;

use crate::config::{GridPlan, Method, RunConfig};
use crate::support::{aligned_table, default_out, ensure_parent, prepare_table, Provenance};
use crate::{GlobalArgs, WeatArgs};

const HEADER: [&str; 9] = [
    "test",
    "embedding",
    "subspace",
    "method",
    "d",
    "p",
    "mode",
    "drops",
    "status",
];

/// One report row: the TSV cells plus the raw numbers (when the cell
/// produced any) for the two-decimal plain-text mirror.
struct Row {
    cells: Vec<String>,
    values: Option<(f64, f64)>,
    failed: bool,
}

impl Row {
    fn ok(cells: Vec<String>, d: f64, p: f64) -> Row {
        Row {
            cells,
            values: Some((d, p)),
            failed: false,
        }
    }

    /// A cell that did not run: `status` is `na: …` (expected, not a
    /// failure) or `error: …` (counts toward the exit code).
    fn skipped(test: &str, embedding: &str, subspace: &str, method: &str, status: String) -> Row {
        let failed = status.starts_with("error:");
        Row {
            cells: vec![
                test.to_string(),
                embedding.to_string(),
                subspace.to_string(),
                method.to_string(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                status,
            ],
            values: None,
            failed,
        }
    }
}

/// The table a grid cell scores: the original for `none`, a debiased copy
/// for the other methods, or a status explaining why the cell is skipped.
enum Variant<'a> {
    Ready(Cow<'a, EmbeddingTable>),
    Skipped(String),
}

pub fn run(global: &GlobalArgs, args: &WeatArgs, config: RunConfig) -> Result<u8> {
    let suite_label = config.suite.clone().unwrap_or_else(|| "explicit".into());
    let pairs_label: String = config
        .definitional_pairs
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "bundled".into());
    let plan = config.into_plan(global)?;

    let options = WeatOptions {
        lowercase_fallback: plan.lowercase_fallback,
        permutation: plan.permutations,
        universe: plan.universe,
        convention: plan.statistic,
        seed: plan.seed,
    };

    let mut rows: Vec<Row> = Vec::new();
    for entry in &plan.embeddings {
        let table = prepare_table(&entry.path, entry.contextual, plan.normalize, plan.center)
            .with_context(|| format!("embedding {:?}", entry.label))?;
        for block in &plan.blocks {
            for spec in &block.subspaces {
                for method in &plan.methods {
                    let variant = prepare_variant(&table, spec, *method, &plan);
                    match variant {
                        Variant::Ready(variant_table) => {
                            let mut cell_rows: Vec<Row> = block
                                .tests
                                .par_iter()
                                .map(|test| match run_weat(&variant_table, test, &options) {
                                    Ok(result) => {
                                        let mut line = result.tsv_row(
                                            test.name(),
                                            &entry.label,
                                            &spec.name,
                                            method.as_str(),
                                        );
                                        line.push_str("\tok");
                                        let cells = line
                                            .split('\t')
                                            .map(str::to_string)
                                            .collect::<Vec<_>>();
                                        Row::ok(cells, result.effect_size, result.p_value)
                                    }
                                    Err(e) => Row::skipped(
                                        test.name(),
                                        &entry.label,
                                        &spec.name,
                                        method.as_str(),
                                        format!("error: {e}"),
                                    ),
                                })
                                .collect();
                            rows.append(&mut cell_rows);
                        }
                        Variant::Skipped(status) => {
                            for test in &block.tests {
                                rows.push(Row::skipped(
                                    test.name(),
                                    &entry.label,
                                    &spec.name,
                                    method.as_str(),
                                    status.clone(),
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    let out = match &args.out {
        Some(path) => crate::support::resolve_out(global, path),
        None => default_out(global, "weat_report.tsv"),
    };
    ensure_parent(&out)?;

    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(&HEADER.join("\t"));
    text.push('\n');
    for row in &rows {
        text.push_str(&row.cells.join("\t"));
        text.push('\n');
    }
    std::fs::write(&out, &text).with_context(|| format!("writing report {}", out.display()))?;

    if args.mirror {
        let mirror_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|row| {
                let mut cells = row.cells.clone();
                if let Some((d, p)) = row.values {
                    cells[4] = format!("{d:.2}");
                    cells[5] = format!("{p:.2}");
                }
                cells
            })
            .collect();
        let mirror_path = out.with_extension("txt");
        std::fs::write(&mirror_path, aligned_table(&HEADER, &mirror_rows))
            .with_context(|| format!("writing mirror {}", mirror_path.display()))?;
        println!("wrote mirror {}", mirror_path.display());
    }

    let mut prov = Provenance::new("weat");
    prov.param("alpha", plan.alpha)
        .param("seed", plan.seed)
        .param("permutations", permutation_label(plan.permutations))
        .param("statistic", plan.statistic.as_str())
        .param("universe", universe_label(&plan))
        .param("mu_components", plan.mu_components)
        .param(
            "methods",
            plan.methods.iter().map(Method::as_str).collect::<Vec<_>>(),
        )
        .param("suite", suite_label)
        .param("definitional_pairs", pairs_label)
        .param("normalize", plan.normalize)
        .param("center", plan.center)
        .param("lowercase_fallback", plan.lowercase_fallback);
    prov.input(&args.config)?;
    for path in dedupe(&plan.input_files) {
        prov.input(&path)?;
    }
    prov.write(&out)?;

    let failures = rows.iter().filter(|r| r.failed).count();
    let skipped = rows
        .iter()
        .filter(|r| r.cells[8].starts_with("na:"))
        .count();
    let mut summary = format!(
        "{} rows ({} ok",
        rows.len(),
        rows.len() - failures - skipped
    );
    if skipped > 0 {
        let _ = write!(summary, ", {skipped} na");
    }
    if failures > 0 {
        let _ = write!(summary, ", {failures} failed");
    }
    let _ = write!(summary, ") -> {}", out.display());
    println!("{summary}");

    Ok(if failures > 0 { 1 } else { 0 })
}

/// Prepare the table variant one (subspace × method) cell scores.
fn prepare_variant<'a>(
    table: &'a EmbeddingTable,
    spec: &BiasSubspaceSpec,
    method: Method,
    plan: &GridPlan,
) -> Variant<'a> {
    match method {
        Method::None => Variant::Ready(Cow::Borrowed(table)),
        Method::Conceptor => {
            let fit = build_subspace_conceptor(spec, table, plan.lowercase_fallback)
                .and_then(|(conceptor, _)| conceptor.negate().apply_debias(table));
            match fit {
                Ok(debiased) => Variant::Ready(Cow::Owned(debiased)),
                Err(e) => Variant::Skipped(format!("error: {e}")),
            }
        }
        Method::Mu => {
            if spec.mode == SubspaceMode::Or {
                return Variant::Skipped(
                    "na: mu needs a pooled subspace (mode=or has none)".to_string(),
                );
            }
            let options = MuOptions {
                num_components: plan.mu_components,
                centering: MuCentering::Subspace,
                lowercase_fallback: plan.lowercase_fallback,
            };
            let fit = WordList::from_words("subspace", spec.all_words())
                .and_then(|words| MuDebias::fit(table, &words, &options))
                .and_then(|fitted| fitted.apply(table));
            match fit {
                Ok(debiased) => Variant::Ready(Cow::Owned(debiased)),
                Err(e) => Variant::Skipped(format!("error: {e}")),
            }
        }
        Method::Bolukbasi => {
            if table.is_contextual() {
                return Variant::Skipped("na: bolukbasi needs a type-level table".to_string());
            }
            if spec.mode == SubspaceMode::Or {
                return Variant::Skipped(
                    "na: bolukbasi needs a pooled subspace (mode=or has none)".to_string(),
                );
            }
            let options = BolukbasiOptions {
                scope: NeutralizeScope::NonListWords,
                equalize: true,
                lowercase_fallback: plan.lowercase_fallback,
            };
            match bolukbasi_hard_debias(table, &plan.definitional_pairs, &options) {
                Ok((debiased, _)) => Variant::Ready(Cow::Owned(debiased)),
                Err(e) => Variant::Skipped(format!("error: {e}")),
            }
        }
    }
}

fn permutation_label(mode: PermutationMode) -> String {
    match mode {
        PermutationMode::Auto => "auto".to_string(),
        PermutationMode::Exact => "exact".to_string(),
        PermutationMode::MonteCarlo { draws } => format!("mc:{draws}"),
    }
}

fn universe_label(plan: &GridPlan) -> &'static str {
    match plan.universe {
        debias_core::weat::PermutationUniverse::Targets => "targets",
        debias_core::weat::PermutationUniverse::Attributes => "attributes",
    }
}

fn dedupe(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut seen = std::collections::HashSet::new();
    paths
        .iter()
        .filter(|p| seen.insert(p.as_path()))
        .cloned()
        .collect()
}
