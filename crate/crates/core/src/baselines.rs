//! Hard-debiasing baselines: top-PC removal and neutralize/equalize.
//!
//! Both baselines *remove* bias components outright, in contrast to the
//! soft per-component shrinkage of a negated conceptor:
//!
//! * [`mu_hard_debias`] — principal components of the bias-subspace word
//!   vectors are projected off every vector in the table.
//! * [`bolukbasi_hard_debias`] — a single bias direction is fit from
//!   definitional word pairs; vectors are neutralized (projected off the
//!   direction and renormalized) and the pairs are equalized around it.

use nalgebra::{DMatrix, DVector};

use crate::bias::WordList;
use crate::embedding::{normalize_rows, subset_matrix, EmbeddingTable};
use crate::linalg::{principal_components, Centering, PrincipalComponents};
use crate::{Error, Result};

/// What the bias-subspace word vectors are centered on before PCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuCentering {
    /// Center on the mean of the subspace word vectors themselves.
    #[default]
    Subspace,
    /// Center on the mean of *all* table vectors.
    Vocabulary,
}

/// Options for the top-PC removal baseline.
#[derive(Debug, Clone)]
pub struct MuOptions {
    /// How many leading principal components to remove (default 1).
    pub num_components: usize,
    pub centering: MuCentering,
    /// Retry lowercased tokens on lookup misses.
    pub lowercase_fallback: bool,
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions {
            num_components: 1,
            centering: MuCentering::Subspace,
            lowercase_fallback: true,
        }
    }
}

/// A fitted top-PC removal transform.
///
/// The transform `x ← x − Σᵢ (uᵢᵀx) uᵢ` is an orthogonal projection, so
/// applying it twice equals applying it once.
#[derive(Debug, Clone)]
pub struct MuDebias {
    /// Unit-length removal directions, leading component first (d × k).
    directions: DMatrix<f64>,
    /// Covariance eigenvalues matching the directions.
    eigenvalues: Vec<f64>,
    /// Mean the subspace vectors were centered on (kept for reporting).
    mean: DVector<f64>,
    /// Subspace words actually resolved in the table.
    resolved: usize,
}

impl MuDebias {
    /// Fit removal directions from the table's subspace word vectors.
    pub fn fit(table: &EmbeddingTable, subspace: &WordList, options: &MuOptions) -> Result<Self> {
        let k = options.num_components;
        if k == 0 {
            return Err(Error::InvalidParameter {
                message: "num_components must be at least 1".into(),
            });
        }
        if k >= table.dimension() {
            return Err(Error::InvalidParameter {
                message: format!(
                    "num_components must be below the embedding dimension ({} >= {})",
                    k,
                    table.dimension()
                ),
            });
        }
        let sub = subset_matrix(table, subspace.words(), options.lowercase_fallback)?;
        let resolved = sub.matrix.ncols();
        if resolved < k + 1 {
            return Err(Error::TooFewWords {
                needed: k + 1,
                found: resolved,
                context: format!(
                    "top-PC removal with {k} components over subspace {:?}",
                    subspace.name()
                ),
            });
        }
        let pca = match options.centering {
            MuCentering::Subspace => principal_components(&sub.matrix, k, Centering::Mean)?,
            MuCentering::Vocabulary => {
                let mean = table_mean(table);
                let mut centered = sub.matrix.clone();
                for mut col in centered.column_iter_mut() {
                    col -= &mean;
                }
                let mut pca = principal_components(&centered, k, Centering::None)?;
                pca.mean = mean;
                pca
            }
        };
        let PrincipalComponents {
            mean,
            components,
            eigenvalues,
        } = pca;
        Ok(MuDebias {
            directions: components,
            eigenvalues,
            mean,
            resolved,
        })
    }

    /// Removal directions as columns, leading component first.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    /// Covariance eigenvalues matching [`directions`](Self::directions).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Mean the subspace vectors were centered on.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// How many subspace words were resolved during the fit.
    pub fn resolved_words(&self) -> usize {
        self.resolved
    }

    /// Project the removal directions off every vector; token order and the
    /// rest of the table are untouched (no recentering).
    pub fn apply(&self, table: &EmbeddingTable) -> Result<EmbeddingTable> {
        if table.dimension() != self.directions.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.directions.nrows(),
                found: table.dimension(),
                context: "top-PC removal".into(),
            });
        }
        Ok(table.map_vectors(|v| {
            let x = DVector::from_column_slice(v);
            let coords = self.directions.transpose() * &x;
            let out = x - &self.directions * coords;
            out.iter().copied().collect()
        }))
    }
}

/// Fit on `subspace_words` and remove the top `k` principal components from
/// every vector in the table. See [`MuDebias`] for the reusable transform.
pub fn mu_hard_debias(
    table: &EmbeddingTable,
    subspace_words: &WordList,
    k: usize,
) -> Result<EmbeddingTable> {
    let options = MuOptions {
        num_components: k,
        ..MuOptions::default()
    };
    MuDebias::fit(table, subspace_words, &options)?.apply(table)
}

fn table_mean(table: &EmbeddingTable) -> DVector<f64> {
    let d = table.dimension();
    let mut mean = DVector::zeros(d);
    for (_, v) in table.iter() {
        for (i, x) in v.iter().enumerate() {
            mean[i] += x;
        }
    }
    if !table.is_empty() {
        mean /= table.len() as f64;
    }
    mean
}

// ---------------------------------------------------------------------------
// Neutralize / equalize
// ---------------------------------------------------------------------------

/// One definitional pair, e.g. `she` / `he`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinitionalPair {
    pub left: String,
    pub right: String,
}

impl DefinitionalPair {
    pub fn new(left: impl Into<String>, right: impl Into<String>) -> Self {
        DefinitionalPair {
            left: left.into(),
            right: right.into(),
        }
    }

    fn label(&self) -> String {
        format!("{}/{}", self.left, self.right)
    }
}

/// Parse tab-separated definitional pairs: one `left<TAB>right` per line,
/// `#` lines are comments, blank lines are skipped.
pub fn parse_definitional_pairs(text: &str, source: &str) -> Result<Vec<DefinitionalPair>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("expected two tab-separated tokens, got {:?}", line),
            ));
        }
        pairs.push(DefinitionalPair::new(fields[0], fields[1]));
    }
    if pairs.is_empty() {
        return Err(Error::TooFewPairs {
            dataset: source.to_string(),
            needed: 1,
            found: 0,
        });
    }
    Ok(pairs)
}

/// Load definitional pairs from a file (see [`parse_definitional_pairs`]).
pub fn load_definitional_pairs(path: impl AsRef<std::path::Path>) -> Result<Vec<DefinitionalPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_definitional_pairs(&text, &path.display().to_string())
}

/// The ten definitional gender pairs shipped with the crate.
pub fn bundled_definitional_pairs() -> Vec<DefinitionalPair> {
    parse_definitional_pairs(
        include_str!("../data/definitional_pairs.tsv"),
        "bundled definitional pairs",
    )
    .expect("bundled definitional pairs are well-formed")
}

/// Which tokens the neutralize step touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeutralizeScope {
    /// Every token except those in a resolved definitional pair (the pair
    /// words are handled by the equalize step).
    #[default]
    NonListWords,
    /// Every token, pair words included.
    AllWords,
}

/// Options for the neutralize/equalize baseline.
#[derive(Debug, Clone)]
pub struct BolukbasiOptions {
    pub scope: NeutralizeScope,
    /// Apply the equalize step to the definitional pairs (default on).
    pub equalize: bool,
    /// Retry lowercased tokens on lookup misses.
    pub lowercase_fallback: bool,
}

impl Default for BolukbasiOptions {
    fn default() -> Self {
        BolukbasiOptions {
            scope: NeutralizeScope::NonListWords,
            equalize: true,
            lowercase_fallback: true,
        }
    }
}

/// What a neutralize/equalize run did.
#[derive(Debug, Clone)]
pub struct BolukbasiReport {
    /// The fitted bias direction (unit length).
    pub direction: DVector<f64>,
    pub pairs_requested: usize,
    /// Pairs with both tokens resolved to nonzero vectors.
    pub pairs_used: usize,
    /// Pairs actually moved by the equalize step.
    pub pairs_equalized: usize,
    /// `left/right` labels of pairs that could not be used.
    pub skipped_pairs: Vec<String>,
    /// Tokens projected off the direction and renormalized.
    pub neutralized: usize,
    /// Tokens that were parallel to the direction and became zero.
    pub zeroed: usize,
}

const DIRECTION_EPS: f64 = 1e-12;

/// Neutralize/equalize debiasing over a static (non-contextual) table.
///
/// The bias direction is the top principal component of the per-pair
/// mean-centered, unit-normalized pair vectors. Every vector in the output
/// is unit length (zero vectors stay zero and are reported): scope words
/// are projected off the direction and renormalized, and each resolved pair
/// is moved to be symmetric about the direction's orthogonal complement,
/// which makes both pair words equidistant — in cosine — from every
/// neutralized word.
pub fn bolukbasi_hard_debias(
    table: &EmbeddingTable,
    pairs: &[DefinitionalPair],
    options: &BolukbasiOptions,
) -> Result<(EmbeddingTable, BolukbasiReport)> {
    if table.is_contextual() {
        return Err(Error::ContextualUnsupported {
            method: "neutralize/equalize debiasing".into(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::TooFewPairs {
            dataset: "definitional pairs".into(),
            needed: 1,
            found: 0,
        });
    }

    // Work on unit-normalized vectors throughout, as the method assumes.
    let (unit, zeroed_input) = normalize_rows(table);
    if zeroed_input > 0 {
        log::warn!("{zeroed_input} zero vectors kept as-is through neutralize/equalize");
    }

    let lookup = |token: &str| -> Option<(String, DVector<f64>)> {
        let resolve = |t: &str| {
            unit.get(t)
                .map(|v| (t.to_string(), DVector::from_column_slice(v)))
        };
        resolve(token).or_else(|| {
            if options.lowercase_fallback {
                let lower = token.to_lowercase();
                if lower != token {
                    return resolve(&lower);
                }
            }
            None
        })
    };

    // Resolve pairs; both tokens must exist with nonzero vectors.
    let mut used: Vec<(String, DVector<f64>, String, DVector<f64>)> = Vec::new();
    let mut skipped = Vec::new();
    for pair in pairs {
        match (lookup(&pair.left), lookup(&pair.right)) {
            (Some((lt, lv)), Some((rt, rv))) if lv.norm() > 0.0 && rv.norm() > 0.0 => {
                used.push((lt, lv, rt, rv));
            }
            _ => {
                log::warn!("skipping definitional pair {:?}", pair.label());
                skipped.push(pair.label());
            }
        }
    }
    if used.is_empty() {
        return Err(Error::TooFewPairs {
            dataset: "resolved definitional pairs".into(),
            needed: 1,
            found: 0,
        });
    }

    // Bias direction: top PC of the per-pair centered halves.
    let d = table.dimension();
    let mut halves = DMatrix::zeros(d, 2 * used.len());
    for (i, (_, lv, _, rv)) in used.iter().enumerate() {
        let mean = (lv + rv) / 2.0;
        halves.set_column(2 * i, &(lv - &mean));
        halves.set_column(2 * i + 1, &(rv - &mean));
    }
    let pca = principal_components(&halves, 1, Centering::None)?;
    if pca.eigenvalues[0] <= DIRECTION_EPS {
        return Err(Error::DegenerateDirection {
            context: "definitional pair halves have no spread".into(),
        });
    }
    let g = pca.components.column(0).into_owned();

    // Equalized pair vectors, computed from the original (unit) vectors.
    let mut replacements: std::collections::HashMap<String, DVector<f64>> =
        std::collections::HashMap::new();
    let mut pairs_equalized = 0usize;
    if options.equalize {
        for (lt, lv, rt, rv) in &used {
            let mean = (lv + rv) / 2.0;
            let mean_b = &g * g.dot(&mean);
            let nu = &mean - &mean_b;
            let scale = (1.0 - nu.norm_squared()).max(0.0).sqrt();
            let mut moved = false;
            for (token, v) in [(lt, lv), (rt, rv)] {
                let v_b = &g * g.dot(v);
                let offset = &v_b - &mean_b;
                let denom = offset.norm();
                if denom <= DIRECTION_EPS {
                    log::warn!(
                        "pair {lt}/{rt}: tokens coincide along the bias direction; left neutralized"
                    );
                    break;
                }
                replacements.insert(token.clone(), &nu + offset * (scale / denom));
                moved = true;
            }
            if moved {
                pairs_equalized += 1;
            }
        }
    }

    let in_pairs: std::collections::HashSet<&str> = used
        .iter()
        .flat_map(|(lt, _, rt, _)| [lt.as_str(), rt.as_str()])
        .collect();

    let mut neutralized = 0usize;
    let mut zeroed = 0usize;
    let mut out = EmbeddingTable::new(d);
    out.set_metadata(table.metadata().to_string());
    for (token, v) in unit.iter() {
        if let Some(replacement) = replacements.get(token) {
            out.insert(token, replacement.iter().copied().collect())?;
            continue;
        }
        let skip =
            matches!(options.scope, NeutralizeScope::NonListWords) && in_pairs.contains(token);
        let vec = DVector::from_column_slice(v);
        if skip || vec.norm() == 0.0 {
            out.insert(token, v.to_vec())?;
            continue;
        }
        let mut flat = &vec - &g * g.dot(&vec);
        let norm = flat.norm();
        if norm <= DIRECTION_EPS {
            log::warn!("token {token:?} is parallel to the bias direction; zeroed");
            flat.fill(0.0);
            zeroed += 1;
        } else {
            flat /= norm;
            neutralized += 1;
        }
        out.insert(token, flat.iter().copied().collect())?;
    }

    Ok((
        out,
        BolukbasiReport {
            direction: g,
            pairs_requested: pairs.len(),
            pairs_used: used.len(),
            pairs_equalized,
            skipped_pairs: skipped,
            neutralized,
            zeroed: zeroed + zeroed_input,
        },
    ))
}
