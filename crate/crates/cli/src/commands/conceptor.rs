//! `condebias conceptor compute|combine|inspect`.

use anyhow::{Context, Result};
use debias_core::bias::{load_wordlist, BiasSubspaceSpec};
use debias_core::conceptor::{load_conceptor, or_many, save_conceptor};

use crate::support::{
    ensure_parent, load_prepared_table, parse_subspace_mode, resolve_out, Provenance,
};
use crate::{ConceptorCombineArgs, ConceptorComputeArgs, ConceptorInspectArgs, GlobalArgs};

pub fn compute(global: &GlobalArgs, args: &ConceptorComputeArgs) -> Result<u8> {
    let mode = parse_subspace_mode(&args.mode)?;
    let table = load_prepared_table(&args.table, false, global)?;

    let mut lists = Vec::new();
    for path in &args.lists {
        lists.push(load_wordlist(path).with_context(|| format!("list {}", path.display()))?);
    }
    let out = resolve_out(global, &args.out);
    let name = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subspace".to_string());
    let spec = BiasSubspaceSpec {
        name,
        mode,
        lists,
        alpha: global.alpha,
    };
    let (conceptor, coverage) =
        debias_core::bias::build_subspace_conceptor(&spec, &table, global.lowercase_fallback)?;

    ensure_parent(&out)?;
    save_conceptor(&conceptor, &out)?;

    let mut prov = Provenance::new("conceptor compute");
    prov.param("alpha", global.alpha)
        .param("mode", &args.mode)
        .param("normalize", global.normalize)
        .param("center", global.center);
    prov.input(&args.table)?;
    for path in &args.lists {
        prov.input(path)?;
    }
    prov.write(&out)?;

    for list in &coverage.lists {
        println!(
            "list {}: {}/{} words resolved{}",
            list.list,
            list.used,
            list.requested,
            if list.missing.is_empty() {
                String::new()
            } else {
                format!(" (missing: {})", list.missing.join(", "))
            }
        );
    }
    println!(
        "wrote conceptor (dimension {}, alpha {}, {} samples) to {}",
        conceptor.dimension(),
        conceptor.alpha(),
        conceptor.sample_count(),
        out.display()
    );
    Ok(0)
}

pub fn combine(global: &GlobalArgs, args: &ConceptorCombineArgs) -> Result<u8> {
    let mut conceptors = Vec::new();
    for path in &args.inputs {
        conceptors
            .push(load_conceptor(path).with_context(|| format!("loading {}", path.display()))?);
    }
    let combined = or_many(&conceptors)?;
    let out = resolve_out(global, &args.out);
    ensure_parent(&out)?;
    save_conceptor(&combined, &out)?;

    let mut prov = Provenance::new("conceptor combine");
    for path in &args.inputs {
        prov.input(path)?;
    }
    prov.write(&out)?;

    println!(
        "combined {} conceptors (dimension {}, alpha {}) into {}",
        conceptors.len(),
        combined.dimension(),
        combined.alpha(),
        out.display()
    );
    Ok(0)
}

pub fn inspect(_global: &GlobalArgs, args: &ConceptorInspectArgs) -> Result<u8> {
    let conceptor =
        load_conceptor(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let alpha = conceptor.alpha();
    let beta = alpha.powi(-2);
    println!(
        "dimension {}, alpha {}, samples {}",
        conceptor.dimension(),
        alpha,
        conceptor.sample_count()
    );
    println!("index\tsigma\tlambda\tgain");
    for (i, lambda) in conceptor.eigenvalues().iter().enumerate() {
        // λ = σ/(σ+β)  ⇔  σ = βλ/(1−λ); the shrink gain on that axis is 1−λ.
        let sigma = beta * lambda / (1.0 - lambda);
        let gain = 1.0 - lambda;
        println!("{i}\t{sigma}\t{lambda}\t{gain}");
    }
    Ok(0)
}
