//! `condebias project` — coordinates of target tokens in the top-2
//! principal-component plane of a basis word set, for the original table
//! and (optionally) its conceptor-debiased counterpart.

use std::collections::HashSet;
use std::fmt::Write as _;

use anyhow::{Context, Result};
use debias_core::bias::{load_wordlist, WordList};
use debias_core::conceptor::{load_conceptor, NegatedConceptor};
use debias_core::embedding::{
    average_tokens, load_stream, subset_matrix, EmbeddingTable, HeaderMode, TokenVectorStream,
};
use debias_core::linalg::{principal_components, Centering, PrincipalComponents};
use debias_core::Error;
use nalgebra::DVector;

use crate::support::{ensure_parent, load_prepared_table, resolve_out, Provenance};
use crate::{GlobalArgs, ProjectArgs};

pub fn run(global: &GlobalArgs, args: &ProjectArgs) -> Result<u8> {
    let basis = load_wordlist(&args.basis)
        .with_context(|| format!("basis list {}", args.basis.display()))?;
    let targets = load_wordlist(&args.targets)
        .with_context(|| format!("target list {}", args.targets.display()))?;
    let negated: Option<NegatedConceptor> = match &args.conceptor {
        Some(path) => Some(
            load_conceptor(path)
                .with_context(|| format!("loading {}", path.display()))?
                .negate(),
        ),
        None => None,
    };

    let out = resolve_out(global, &args.out);
    let mut text = String::from("variant\ttoken\tpc1\tpc2\n");
    let mut row_count = 0usize;

    if args.instances {
        let stream = load_stream(&args.table, HeaderMode::Auto)
            .with_context(|| format!("loading instance stream {}", args.table.display()))?;
        if let Some(neg) = &negated {
            if neg.dimension() != stream.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: neg.dimension(),
                    found: stream.dimension(),
                    context: "conceptor vs instance stream".into(),
                }
                .into());
            }
        }
        row_count += emit_instances(&stream, &basis, &targets, None, global, "orig", &mut text)?;
        if let Some(neg) = &negated {
            row_count += emit_instances(
                &stream,
                &basis,
                &targets,
                Some(neg),
                global,
                "debiased",
                &mut text,
            )?;
        }
    } else {
        let table = load_prepared_table(&args.table, false, global)?;
        row_count += emit_table(&table, &basis, &targets, global, "orig", &mut text)?;
        if let Some(neg) = &negated {
            let debiased = neg
                .apply_debias(&table)
                .context("applying the negated conceptor")?;
            row_count += emit_table(&debiased, &basis, &targets, global, "debiased", &mut text)?;
        }
    }

    ensure_parent(&out)?;
    std::fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;

    let mut prov = Provenance::new("project");
    prov.param("instances", args.instances)
        .param("normalize", global.normalize)
        .param("center", global.center)
        .param("lowercase_fallback", global.lowercase_fallback);
    prov.input(&args.table)?;
    prov.input(&args.basis)?;
    prov.input(&args.targets)?;
    if let Some(path) = &args.conceptor {
        prov.input(path)?;
    }
    prov.write(&out)?;

    println!(
        "wrote {} projection rows ({}) to {}",
        row_count,
        if negated.is_some() {
            "orig + debiased"
        } else {
            "orig"
        },
        out.display()
    );
    Ok(0)
}

/// Fit the projection plane on the basis words of `table`: top-2 PCs about
/// the basis mean, with explicit rank checking.
fn fit_plane(
    table: &EmbeddingTable,
    basis: &WordList,
    lowercase_fallback: bool,
) -> Result<PrincipalComponents> {
    let sub = subset_matrix(table, basis.words(), lowercase_fallback)
        .context("resolving the basis list")?;
    let found = sub.matrix.ncols();
    if found < 3 {
        return Err(Error::TooFewWords {
            needed: 3,
            found,
            context: "projection basis".into(),
        }
        .into());
    }
    let pca = principal_components(&sub.matrix, 2, Centering::Mean)?;
    let lead = pca.eigenvalues[0];
    let tol = lead.max(0.0) * 1e-10;
    let rank = pca
        .eigenvalues
        .iter()
        .filter(|&&v| v > tol && v > 0.0)
        .count();
    if rank < 2 {
        return Err(Error::BasisRankDeficient { rank }.into());
    }
    Ok(pca)
}

/// Project each resolvable target word of a type-level table; returns the
/// number of rows written.
fn emit_table(
    table: &EmbeddingTable,
    basis: &WordList,
    targets: &WordList,
    global: &GlobalArgs,
    variant: &str,
    text: &mut String,
) -> Result<usize> {
    let pca = fit_plane(table, basis, global.lowercase_fallback)
        .with_context(|| format!("variant {variant:?}"))?;
    let sub = subset_matrix(table, targets.words(), global.lowercase_fallback)
        .context("resolving the target list")?;
    for missing in &sub.missing {
        log::warn!("target {missing:?} not in table; skipped");
    }
    for (j, (requested, _)) in sub.resolved.iter().enumerate() {
        let coords = pca.project(&DVector::from_column_slice(sub.matrix.column(j).as_slice()));
        let _ = writeln!(text, "{variant}\t{requested}\t{}\t{}", coords[0], coords[1]);
    }
    Ok(sub.resolved.len())
}

/// Project every instance of the target tokens in a token-instance stream.
/// The plane is fitted on per-token averages of the (optionally debiased)
/// stream; returns the number of rows written.
fn emit_instances(
    stream: &TokenVectorStream,
    basis: &WordList,
    targets: &WordList,
    negated: Option<&NegatedConceptor>,
    global: &GlobalArgs,
    variant: &str,
    text: &mut String,
) -> Result<usize> {
    let matrix = negated.map(NegatedConceptor::matrix);
    let debias = |v: &[f64]| -> DVector<f64> {
        let v = DVector::from_column_slice(v);
        match &matrix {
            Some(m) => m * v,
            None => v,
        }
    };

    // Type-level view of this variant, for fitting the plane.
    let averaged = match &matrix {
        Some(_) => {
            let mut debiased = TokenVectorStream::new(stream.dimension());
            for (token, v) in stream.records() {
                debiased
                    .push(token.clone(), debias(v).iter().copied().collect())
                    .expect("dimension preserved by debiasing");
            }
            average_tokens(&debiased)?
        }
        None => average_tokens(stream)?,
    };
    let pca = fit_plane(&averaged, basis, global.lowercase_fallback)
        .with_context(|| format!("variant {variant:?}"))?;

    let mut wanted: HashSet<String> = targets.words().iter().cloned().collect();
    if global.lowercase_fallback {
        let lowered: Vec<String> = targets.words().iter().map(|w| w.to_lowercase()).collect();
        wanted.extend(lowered);
    }

    let mut rows = 0usize;
    for (token, v) in stream.records() {
        if !wanted.contains(token.as_str()) {
            continue;
        }
        let coords = pca.project(&debias(v));
        let _ = writeln!(text, "{variant}\t{token}\t{}\t{}", coords[0], coords[1]);
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::NoWordsResolved {
            context: format!(
                "no instance of the {} target token(s) in the stream",
                targets.len()
            ),
        }
        .into());
    }
    Ok(rows)
}
