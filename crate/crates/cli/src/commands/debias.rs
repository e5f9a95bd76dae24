//! `condebias debias` — apply one debiasing method to an embedding table.

use anyhow::{bail, Context, Result};
use debias_core::baselines::{
    bolukbasi_hard_debias, bundled_definitional_pairs, load_definitional_pairs, BolukbasiOptions,
    MuCentering, MuDebias, MuOptions, NeutralizeScope,
};
use debias_core::bias::{build_subspace_conceptor, load_wordlist, BiasSubspaceSpec, WordList};
use debias_core::conceptor::{load_conceptor, Conceptor};
use debias_core::embedding::{save_table, EmbeddingTable};

use crate::support::{
    ensure_parent, load_prepared_table, parse_subspace_mode, resolve_out, Provenance,
};
use crate::{DebiasArgs, GlobalArgs};

pub fn run(global: &GlobalArgs, args: &DebiasArgs) -> Result<u8> {
    let table = load_prepared_table(&args.table, args.contextual, global)?;
    let out = resolve_out(global, &args.out);

    let mut prov = Provenance::new("debias");
    prov.param("method", &args.method)
        .param("normalize", global.normalize)
        .param("center", global.center)
        .param("lowercase_fallback", global.lowercase_fallback)
        .param("contextual", args.contextual);
    prov.input(&args.table)?;

    let debiased = match args.method.as_str() {
        "none" => {
            println!("method none: table passed through unchanged");
            table.clone()
        }
        "conceptor" => {
            let conceptor = resolve_conceptor(global, args, &table, &mut prov)?;
            let negated = conceptor.negate();
            let result = negated
                .apply_debias(&table)
                .context("applying the negated conceptor")?;
            println!(
                "conceptor debias: alpha {}, {} samples, dimension {}",
                conceptor.alpha(),
                conceptor.sample_count(),
                conceptor.dimension()
            );
            result
        }
        "mu" => {
            prov.param("num_components", args.num_components);
            let subspace = pooled_subspace(args, &mut prov)?;
            let options = MuOptions {
                num_components: args.num_components,
                centering: MuCentering::Subspace,
                lowercase_fallback: global.lowercase_fallback,
            };
            let fitted = MuDebias::fit(&table, &subspace, &options)?;
            let result = fitted.apply(&table)?;
            println!(
                "mu debias: removed {} principal component(s) fitted on {} resolved words",
                args.num_components,
                fitted.resolved_words()
            );
            result
        }
        "bolukbasi" => {
            let pairs = match &args.pairs {
                Some(path) => {
                    prov.input(path)?;
                    load_definitional_pairs(path)
                        .with_context(|| format!("definitional pairs {}", path.display()))?
                }
                None => {
                    prov.param("pairs", "bundled");
                    bundled_definitional_pairs()
                }
            };
            let options = BolukbasiOptions {
                scope: match args.neutralize_scope.as_str() {
                    "all" => NeutralizeScope::AllWords,
                    _ => NeutralizeScope::NonListWords,
                },
                equalize: !args.no_equalize,
                lowercase_fallback: global.lowercase_fallback,
            };
            prov.param("equalize", options.equalize)
                .param("neutralize_scope", &args.neutralize_scope);
            let (result, report) = bolukbasi_hard_debias(&table, &pairs, &options)?;
            println!(
                "bolukbasi debias: {}/{} pairs used, {} equalized, {} words neutralized{}",
                report.pairs_used,
                report.pairs_requested,
                report.pairs_equalized,
                report.neutralized,
                if report.zeroed > 0 {
                    format!(" ({} zeroed)", report.zeroed)
                } else {
                    String::new()
                }
            );
            result
        }
        other => bail!("unknown method {other:?}"),
    };

    ensure_parent(&out)?;
    save_table(&debiased, &out)?;
    prov.write(&out)?;
    println!(
        "wrote {} vectors (dimension {}) to {}",
        debiased.len(),
        debiased.dimension(),
        out.display()
    );
    Ok(0)
}

/// A conceptor for `--method conceptor`: loaded from `--conceptor`, or
/// fitted from `--subspace-list` files at the global aperture.
fn resolve_conceptor(
    global: &GlobalArgs,
    args: &DebiasArgs,
    table: &EmbeddingTable,
    prov: &mut Provenance,
) -> Result<Conceptor> {
    match (&args.conceptor, args.subspace_list.is_empty()) {
        (Some(path), _) => {
            prov.input(path)?;
            load_conceptor(path).with_context(|| format!("loading {}", path.display()))
        }
        (None, false) => {
            let mode = parse_subspace_mode(&args.mode)?;
            prov.param("mode", &args.mode).param("alpha", global.alpha);
            let mut lists = Vec::new();
            for path in &args.subspace_list {
                prov.input(path)?;
                lists
                    .push(load_wordlist(path).with_context(|| format!("list {}", path.display()))?);
            }
            let spec = BiasSubspaceSpec {
                name: "subspace".to_string(),
                mode,
                lists,
                alpha: global.alpha,
            };
            let (conceptor, coverage) =
                build_subspace_conceptor(&spec, table, global.lowercase_fallback)?;
            for list in &coverage.lists {
                println!(
                    "list {}: {}/{} words resolved",
                    list.list, list.used, list.requested
                );
            }
            Ok(conceptor)
        }
        (None, true) => bail!("method conceptor needs --conceptor FILE or --subspace-list FILE"),
    }
}

/// The pooled word set `--method mu` removes principal components of.
fn pooled_subspace(args: &DebiasArgs, prov: &mut Provenance) -> Result<WordList> {
    if args.subspace_list.is_empty() {
        bail!("method mu needs --subspace-list FILE");
    }
    if args.mode == "or" {
        bail!(
            "method mu removes principal components of one pooled word set; \
             or-mode subspaces have no pooled set (use --mode union)"
        );
    }
    let mut words = Vec::new();
    for path in &args.subspace_list {
        prov.input(path)?;
        let list = load_wordlist(path).with_context(|| format!("list {}", path.display()))?;
        words.extend(list.words().iter().cloned());
    }
    WordList::from_words("subspace", words).map_err(Into::into)
}
