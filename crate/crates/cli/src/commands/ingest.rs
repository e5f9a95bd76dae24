//! `condebias ingest-tokens` — collapse a token-instance stream (one line
//! per occurrence) into a type-level table by averaging each token's
//! instances.

use anyhow::{Context, Result};
use debias_core::embedding::{average_tokens, load_stream, save_table, HeaderMode};

use crate::support::{ensure_parent, resolve_out, Provenance};
use crate::{GlobalArgs, IngestArgs};

pub fn run(global: &GlobalArgs, args: &IngestArgs) -> Result<u8> {
    let stream = load_stream(&args.stream, HeaderMode::Auto)
        .with_context(|| format!("loading instance stream {}", args.stream.display()))?;
    let table = average_tokens(&stream).context("averaging token instances")?;

    let out = resolve_out(global, &args.out);
    ensure_parent(&out)?;
    save_table(&table, &out)?;

    let mut prov = Provenance::new("ingest-tokens");
    prov.input(&args.stream)?;
    prov.write(&out)?;

    println!(
        "averaged {} instances into {} token vectors (dimension {}) -> {}",
        stream.len(),
        table.len(),
        table.dimension(),
        out.display()
    );
    Ok(0)
}
