//! Helpers shared by the subcommands: table preparation, flag parsing,
//! output-path resolution, and provenance sidecars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use debias_core::bias::SubspaceMode;
use debias_core::embedding::{center_rows, load_table, normalize_rows, EmbeddingTable, HeaderMode};
use debias_core::weat::{PermutationMode, DEFAULT_MC_DRAWS};
use sha2::{Digest, Sha256};

use crate::GlobalArgs;

/// Load a table and apply the global `--normalize` / `--center` flags
/// (normalize first). `contextual` marks the table as token-instance.
pub fn load_prepared_table(
    path: &Path,
    contextual: bool,
    global: &GlobalArgs,
) -> Result<EmbeddingTable> {
    prepare_table(path, contextual, global.normalize, global.center)
}

/// Load a table with explicit preparation flags (normalize first, then
/// center). `contextual` marks the table as token-instance.
pub fn prepare_table(
    path: &Path,
    contextual: bool,
    normalize: bool,
    center: bool,
) -> Result<EmbeddingTable> {
    let mut table = load_table(path, HeaderMode::Auto)
        .with_context(|| format!("loading embedding table {}", path.display()))?;
    if normalize {
        let (normalized, zeroed) = normalize_rows(&table);
        if zeroed > 0 {
            log::warn!(
                "{}: {zeroed} zero vectors left unnormalized",
                path.display()
            );
        }
        table = normalized;
    }
    if center {
        let (centered, _) = center_rows(&table);
        table = centered;
    }
    if contextual {
        let mut meta: Vec<&str> = table
            .metadata()
            .split(';')
            .filter(|s| !s.is_empty())
            .collect();
        if !meta.contains(&"contextual") {
            meta.push("contextual");
        }
        let joined = meta.join(";");
        table.set_metadata(joined);
    }
    Ok(table)
}

/// Parse `auto`, `exact`, `mc`, or `mc:N`.
pub fn parse_permutations(spec: &str) -> Result<PermutationMode> {
    match spec {
        "auto" => Ok(PermutationMode::Auto),
        "exact" => Ok(PermutationMode::Exact),
        "mc" => Ok(PermutationMode::MonteCarlo {
            draws: DEFAULT_MC_DRAWS,
        }),
        other => {
            if let Some(n) = other.strip_prefix("mc:") {
                let draws: u64 = n
                    .parse()
                    .with_context(|| format!("bad Monte Carlo draw count {n:?}"))?;
                if draws == 0 {
                    bail!("Monte Carlo draw count must be positive");
                }
                Ok(PermutationMode::MonteCarlo { draws })
            } else {
                bail!("unknown permutation scheme {other:?} (use auto, exact, or mc:N)")
            }
        }
    }
}

/// Parse `single`, `union`, or `or`.
pub fn parse_subspace_mode(spec: &str) -> Result<SubspaceMode> {
    match spec {
        "single" => Ok(SubspaceMode::Single),
        "union" => Ok(SubspaceMode::Union),
        "or" => Ok(SubspaceMode::Or),
        other => bail!("unknown subspace mode {other:?} (use single, union, or or)"),
    }
}

/// Resolve an output path against `--out-dir` (absolute paths win).
pub fn resolve_out(global: &GlobalArgs, path: &Path) -> PathBuf {
    match &global.out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Resolve the default output path for a report.
pub fn default_out(global: &GlobalArgs, name: &str) -> PathBuf {
    match &global.out_dir {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

/// Create the parent directory of an output file if needed.
pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating output directory {}", parent.display()))?;
        }
    }
    Ok(())
}

/// Hex SHA-256 of a file's content.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Accumulates the provenance sidecar of a command: content hashes of every
/// input file plus the parameters that shaped the output. Keys are sorted,
/// and nothing time-dependent is recorded, so sidecars are byte-stable.
#[derive(Debug, Default)]
pub struct Provenance {
    entries: BTreeMap<String, serde_json::Value>,
    inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        let mut p = Provenance::default();
        p.entries.insert(
            "tool".into(),
            serde_json::json!(format!("condebias {}", env!("CARGO_PKG_VERSION"))),
        );
        p.entries
            .insert("command".into(), serde_json::json!(command));
        p
    }

    /// Record a parameter value.
    pub fn param(&mut self, key: &str, value: impl serde::Serialize) -> &mut Self {
        self.entries.insert(
            format!("param.{key}"),
            serde_json::to_value(value).expect("serializable parameter"),
        );
        self
    }

    /// Record an input file's content hash.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        self.inputs
            .insert(path.display().to_string(), file_sha256(path)?);
        Ok(self)
    }

    /// Write `<out>.provenance.json` next to the output file.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let mut doc = self.entries.clone();
        doc.insert(
            "inputs_sha256".into(),
            serde_json::to_value(&self.inputs).expect("string map"),
        );
        let sidecar = sidecar_path(out);
        let text = serde_json::to_string_pretty(&doc).expect("JSON document");
        std::fs::write(&sidecar, text + "\n")
            .with_context(|| format!("writing provenance {}", sidecar.display()))?;
        Ok(sidecar)
    }
}

/// `report.tsv` -> `report.tsv.provenance.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    out.with_file_name(name)
}

/// Render rows as an aligned plain-text table (the optional report mirror).
pub fn aligned_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let mut out = String::new();
    let fmt_row = |cells: Vec<&str>, widths: &[usize]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    out.push_str(&fmt_row(header.to_vec(), &widths));
    out.push('\n');
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("  "),
    );
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_row(row.iter().map(String::as_str).collect(), &widths));
        out.push('\n');
    }
    out
}
