//! Semantic-similarity retention checks.
//!
//! Debiasing must not wreck the geometry the embeddings are for. This
//! module scores a table against human word-similarity judgments: the
//! Pearson correlation (×100) between human scores and cosine
//! similarities over the pairs the table can resolve. A rank-based
//! (Spearman) variant is available behind [`CorrelationMetric`].

use crate::embedding::EmbeddingTable;
use crate::{Error, Result};

/// One human-scored word pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRecord {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

/// A named word-similarity dataset (RG65, WordSim, SimLex, …).
#[derive(Debug, Clone)]
pub struct SimilarityDataset {
    name: String,
    records: Vec<SimilarityRecord>,
}

impl SimilarityDataset {
    /// Build a dataset in memory; records must be nonempty with finite scores.
    pub fn new(name: impl Into<String>, records: Vec<SimilarityRecord>) -> Result<Self> {
        let name = name.into();
        if records.is_empty() {
            return Err(Error::EmptyInput {
                context: format!("similarity dataset {name:?} has no records"),
            });
        }
        if let Some(r) = records.iter().find(|r| !r.score.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("similarity dataset {name:?}, pair {}/{}", r.word1, r.word2),
            });
        }
        Ok(SimilarityDataset { name, records })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[SimilarityRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Write as `word1<TAB>word2<TAB>score` lines.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!("{}\t{}\t{}\n", r.word1, r.word2, r.score));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Load a similarity dataset; the name is the file stem.
///
/// Each line is `word1 DELIM word2 DELIM score` with the delimiter detected
/// per line (tab, then comma, then whitespace). Lines that do not parse —
/// headers included — are skipped with a logged warning carrying the line
/// number. Errors if nothing parses.
pub fn load_similarity_dataset(path: impl AsRef<std::path::Path>) -> Result<SimilarityDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());

    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            log::warn!(
                "{}:{}: expected `word1 word2 score`, skipping {:?}",
                path.display(),
                idx + 1,
                line
            );
            continue;
        }
        match fields[2].parse::<f64>() {
            Ok(score) if score.is_finite() => records.push(SimilarityRecord {
                word1: fields[0].to_string(),
                word2: fields[1].to_string(),
                score,
            }),
            _ => {
                log::warn!(
                    "{}:{}: non-numeric score {:?}, skipping",
                    path.display(),
                    idx + 1,
                    fields[2]
                );
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyInput {
            context: format!("similarity dataset {}: no valid records", path.display()),
        });
    }
    SimilarityDataset::new(name, records)
}

/// Correlation between human scores and model cosines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMetric {
    /// Pearson's r (the reporting default).
    #[default]
    Pearson,
    /// Spearman's ρ: Pearson over average ranks.
    Spearman,
}

impl CorrelationMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationMetric::Pearson => "pearson",
            CorrelationMetric::Spearman => "spearman",
        }
    }
}

/// Outcome of scoring one dataset against one table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityOutcome {
    /// Correlation ×100, e.g. `67.23`.
    pub score: f64,
    /// Pairs that entered the correlation.
    pub used: usize,
    /// Pairs skipped (either word out of vocabulary or zero-length).
    pub skipped: usize,
}

/// Pearson correlation (×100) of human scores vs cosine similarities.
///
/// Pairs with an unresolvable or zero-length word are skipped and counted;
/// `used + skipped` always equals the dataset size.
pub fn evaluate_similarity(
    table: &EmbeddingTable,
    dataset: &SimilarityDataset,
    lowercase_fallback: bool,
) -> Result<SimilarityOutcome> {
    evaluate_similarity_with(
        table,
        dataset,
        lowercase_fallback,
        CorrelationMetric::Pearson,
    )
}

/// [`evaluate_similarity`] with an explicit correlation metric.
pub fn evaluate_similarity_with(
    table: &EmbeddingTable,
    dataset: &SimilarityDataset,
    lowercase_fallback: bool,
    metric: CorrelationMetric,
) -> Result<SimilarityOutcome> {
    let lookup = |token: &str| -> Option<&[f64]> {
        table.get(token).or_else(|| {
            if lowercase_fallback {
                let lower = token.to_lowercase();
                if lower != token {
                    return table.get(&lower);
                }
            }
            None
        })
    };

    let mut human = Vec::new();
    let mut model = Vec::new();
    let mut skipped = 0usize;
    for r in dataset.records() {
        let (Some(v1), Some(v2)) = (lookup(&r.word1), lookup(&r.word2)) else {
            skipped += 1;
            continue;
        };
        let n1 = norm(v1);
        let n2 = norm(v2);
        if n1 == 0.0 || n2 == 0.0 {
            skipped += 1;
            continue;
        }
        let dot: f64 = v1.iter().zip(v2).map(|(a, b)| a * b).sum();
        human.push(r.score);
        model.push(dot / (n1 * n2));
    }

    let used = human.len();
    if used < 2 {
        return Err(Error::TooFewPairs {
            dataset: dataset.name().to_string(),
            needed: 2,
            found: used,
        });
    }
    let (a, b) = match metric {
        CorrelationMetric::Pearson => (human, model),
        CorrelationMetric::Spearman => (ranks(&human), ranks(&model)),
    };
    let r = pearson(&a, &b, dataset.name())?;
    Ok(SimilarityOutcome {
        score: r * 100.0,
        used,
        skipped,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Two-pass Pearson correlation; errors on zero variance in either series.
fn pearson(a: &[f64], b: &[f64], dataset: &str) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 {
        return Err(Error::ZeroVariance {
            dataset: dataset.to_string(),
            which: "human".into(),
        });
    }
    if var_b == 0.0 {
        return Err(Error::ZeroVariance {
            dataset: dataset.to_string(),
            which: "model".into(),
        });
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Average ranks (1-based); ties share the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite scores"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}
