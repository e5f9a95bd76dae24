//! Word Embedding Association Test (WEAT) and its generalization.
//!
//! Given target sets `X`, `Y` and attribute sets `A`, `B`, the test
//! statistic is
//!
//! ```text
//! s(X, Y, A, B) = (1/|X|) [ Σ_{x∈X} ( Σ_{a∈A} cos(x,a) − Σ_{b∈B} cos(x,b) )
//!                         − Σ_{y∈Y} ( Σ_{a∈A} cos(y,a) − Σ_{b∈B} cos(y,b) ) ]
//! ```
//!
//! with `|X| = |Y|` and `|A| = |B|`. The *effect size* uses the per-word
//! association `s(w, A, B) = mean_a cos(w,a) − mean_b cos(w,b)`:
//!
//! ```text
//! d = [ mean_x s(x,A,B) − mean_y s(y,A,B) ] / std_{w ∈ X∪Y} s(w,A,B)
//! ```
//!
//! where the denominator is the population standard deviation, so `|d| ≤ 2`.
//! Significance comes from the permutation distribution over equal-size
//! re-partitions of `X ∪ Y` (optionally of `A ∪ B`): exact enumeration when
//! the partition count is small, seeded Monte Carlo otherwise.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bias::WeatTest;
use crate::embedding::{subset_matrix, EmbeddingTable};
use crate::{Error, Result};

/// Exact permutation enumeration is used when the number of equal-size
/// partitions is at most this.
pub const EXACT_ENUMERATION_LIMIT: u64 = 200_000;

/// Default number of Monte Carlo draws when enumeration is infeasible.
pub const DEFAULT_MC_DRAWS: u64 = 100_000;

/// Scaling convention for the reported test statistic.
///
/// Both orderings of the raw double sum appear in the literature; they agree
/// up to a positive factor, so effect sizes and permutation p-values are
/// identical. [`SumForm`](StatisticConvention::SumForm) divides the inner
/// *sums* by `|X|`; [`MeanForm`](StatisticConvention::MeanForm) uses
/// per-word *mean* associations summed over targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatisticConvention {
    /// `(1/|X|) Σ_x (Σ_a cos − Σ_b cos) − …` — the form this crate reports
    /// by default.
    #[default]
    SumForm,
    /// `Σ_x s(x,A,B) − Σ_y s(y,A,B)` with mean-based `s`.
    MeanForm,
}

impl StatisticConvention {
    /// Stable name used in configs and reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticConvention::SumForm => "sum",
            StatisticConvention::MeanForm => "mean",
        }
    }
}

/// Which pooled set is re-partitioned by the permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermutationUniverse {
    /// Re-partition `X ∪ Y` (the convention for test significance).
    #[default]
    Targets,
    /// Re-partition `A ∪ B` instead.
    Attributes,
}

/// How the permutation p-value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermutationMode {
    /// Exact when the partition count is at most
    /// [`EXACT_ENUMERATION_LIMIT`], otherwise Monte Carlo with
    /// [`DEFAULT_MC_DRAWS`] draws.
    #[default]
    Auto,
    /// Always enumerate every partition.
    Exact,
    /// Seeded Monte Carlo with the given number of draws.
    MonteCarlo { draws: u64 },
}

/// Result of a permutation test.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOutcome {
    /// One-sided p-value: share of partitions with `s_perm ≥ s_observed`.
    pub p: f64,
    /// Number of partitions (or draws) meeting `s_perm ≥ s_observed`.
    pub matching: u64,
    /// Total partitions enumerated, or Monte Carlo draws.
    pub total: u64,
    /// Whether the enumeration was exhaustive.
    pub exact: bool,
    /// Seed used (Monte Carlo only).
    pub seed: Option<u64>,
}

impl PermutationOutcome {
    /// `exact:m/M` or `mc:m/n` label used in TSV reports.
    pub fn mode_label(&self) -> String {
        if self.exact {
            format!("exact:{}/{}", self.matching, self.total)
        } else {
            format!("mc:{}/{}", self.matching, self.total)
        }
    }
}

/// Per-word association values for the two target sets.
#[derive(Debug, Clone)]
pub struct AssociationProfile {
    /// `s(x, A, B)` for each X word, resolution order.
    pub x_values: Vec<f64>,
    /// `s(y, A, B)` for each Y word, resolution order.
    pub y_values: Vec<f64>,
}

/// Cosine bookkeeping shared by the statistic, effect size, and permutation
/// test. Rows are targets (X then Y), columns attributes (A then B).
struct CosineTable {
    n: usize,
    m: usize,
    /// Row-major `(2n) × (2m)` cosine matrix.
    cos: Vec<f64>,
}

fn column_norms(mat: &DMatrix<f64>, context: &str) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(mat.ncols());
    for (j, col) in mat.column_iter().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector {
                context: format!("{context}, column {j}"),
            });
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                context: format!("{context}, column {j}"),
            });
        }
        norms.push(norm);
    }
    Ok(norms)
}

impl CosineTable {
    fn build(
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
    ) -> Result<Self> {
        let d = x.nrows();
        for (label, mat) in [("Y", y), ("A", a), ("B", b)] {
            if mat.nrows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: mat.nrows(),
                    context: format!("association test set {label}"),
                });
            }
        }
        if x.ncols() != y.ncols() {
            return Err(Error::CardinalityMismatch {
                left: x.ncols(),
                right: y.ncols(),
                context: "target sets X and Y".into(),
            });
        }
        if a.ncols() != b.ncols() {
            return Err(Error::CardinalityMismatch {
                left: a.ncols(),
                right: b.ncols(),
                context: "attribute sets A and B".into(),
            });
        }
        let (n, m) = (x.ncols(), a.ncols());
        if n == 0 || m == 0 {
            return Err(Error::EmptyInput {
                context: "association test needs non-empty target and attribute sets".into(),
            });
        }
        let xn = column_norms(x, "target set X")?;
        let yn = column_norms(y, "target set Y")?;
        let an = column_norms(a, "attribute set A")?;
        let bn = column_norms(b, "attribute set B")?;

        let mut cos = vec![0.0f64; 2 * n * 2 * m];
        let mut fill = |row: usize, tgt: nalgebra::DVectorView<f64>, tnorm: f64| {
            for (j, att) in a.column_iter().enumerate() {
                cos[row * 2 * m + j] = tgt.dot(&att) / (tnorm * an[j]);
            }
            for (j, att) in b.column_iter().enumerate() {
                cos[row * 2 * m + m + j] = tgt.dot(&att) / (tnorm * bn[j]);
            }
        };
        for (i, col) in x.column_iter().enumerate() {
            fill(i, col, xn[i]);
        }
        for (i, col) in y.column_iter().enumerate() {
            fill(n + i, col, yn[i]);
        }
        Ok(CosineTable { n, m, cos })
    }

    /// `Σ_a cos(w,a) − Σ_b cos(w,b)` for target row `w`.
    fn target_sum(&self, row: usize) -> f64 {
        let base = row * 2 * self.m;
        let mut acc = 0.0;
        for j in 0..self.m {
            acc += self.cos[base + j];
        }
        for j in 0..self.m {
            acc -= self.cos[base + self.m + j];
        }
        acc
    }

    /// `Σ_x cos(x,attr) − Σ_y cos(y,attr)` for attribute column `attr`.
    fn attribute_sum(&self, col: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += self.cos[i * 2 * self.m + col];
        }
        for i in 0..self.n {
            acc -= self.cos[(self.n + i) * 2 * self.m + col];
        }
        acc
    }

    /// Per-target values whose subset sums drive target permutations.
    fn target_values(&self) -> Vec<f64> {
        (0..2 * self.n).map(|r| self.target_sum(r)).collect()
    }

    /// Per-attribute values whose subset sums drive attribute permutations.
    fn attribute_values(&self) -> Vec<f64> {
        (0..2 * self.m).map(|c| self.attribute_sum(c)).collect()
    }

    fn scale(&self, convention: StatisticConvention) -> f64 {
        match convention {
            StatisticConvention::SumForm => 1.0 / self.n as f64,
            StatisticConvention::MeanForm => 1.0 / self.m as f64,
        }
    }

    fn statistic(&self, convention: StatisticConvention) -> f64 {
        let values = self.target_values();
        let x: f64 = values[..self.n].iter().sum();
        let y: f64 = values[self.n..].iter().sum();
        (x - y) * self.scale(convention)
    }

    fn profile(&self) -> AssociationProfile {
        let inv_m = 1.0 / self.m as f64;
        AssociationProfile {
            x_values: (0..self.n).map(|r| self.target_sum(r) * inv_m).collect(),
            y_values: (0..self.n)
                .map(|r| self.target_sum(self.n + r) * inv_m)
                .collect(),
        }
    }
}

/// The association test statistic under the given convention.
pub fn weat_statistic_with(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    convention: StatisticConvention,
) -> Result<f64> {
    Ok(CosineTable::build(x, y, a, b)?.statistic(convention))
}

/// The association test statistic in its sum form (see module docs).
pub fn weat_statistic(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<f64> {
    weat_statistic_with(x, y, a, b, StatisticConvention::SumForm)
}

/// Per-word mean-based associations for every target word.
pub fn association_profile(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<AssociationProfile> {
    Ok(CosineTable::build(x, y, a, b)?.profile())
}

/// Effect size `d` of an association profile; always in `[-2, 2]`.
///
/// Errors with [`Error::DegenerateProfile`] when every target word has the
/// same association value (population standard deviation zero).
pub fn effect_size(profile: &AssociationProfile) -> Result<f64> {
    let n = profile.x_values.len();
    if n == 0 || profile.y_values.len() != n {
        return Err(Error::CardinalityMismatch {
            left: n,
            right: profile.y_values.len(),
            context: "association profile".into(),
        });
    }
    let all: Vec<f64> = profile
        .x_values
        .iter()
        .chain(profile.y_values.iter())
        .copied()
        .collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / all.len() as f64;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(Error::DegenerateProfile);
    }
    let mean_x = profile.x_values.iter().sum::<f64>() / n as f64;
    let mean_y = profile.y_values.iter().sum::<f64>() / n as f64;
    Ok((mean_x - mean_y) / std)
}

/// Number of ways to choose half of `2h` elements, if it fits `u128`.
fn half_partition_count(h: usize) -> Option<u128> {
    let mut c: u128 = 1;
    for i in 1..=h {
        c = c.checked_mul((h + i) as u128)?;
        c /= i as u128; // exact: running product of binomial prefixes
    }
    Some(c)
}

/// Subset-sum statistic for a partition: the chosen half plays the first
/// role. `total` is the sum of all values.
#[inline]
fn partition_statistic(values: &[f64], chosen: &[usize], total: f64, scale: f64) -> f64 {
    let mut s = 0.0;
    for &i in chosen {
        s += values[i];
    }
    (2.0 * s - total) * scale
}

/// One-sided permutation p-value over equal-size re-partitions.
///
/// The observed statistic is computed through the same subset-sum path as
/// every permuted statistic, so the identity partition always counts and
/// `p ≥ 1/total` for exact enumeration. Monte Carlo draws each use an
/// independent counter-derived generator, making the result identical for
/// any worker count.
#[allow(clippy::too_many_arguments)] // mirrors the statistical call: four sets + test configuration
pub fn permutation_p(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mode: PermutationMode,
    universe: PermutationUniverse,
    convention: StatisticConvention,
    seed: u64,
) -> Result<PermutationOutcome> {
    let table = CosineTable::build(x, y, a, b)?;
    let (values, half) = match universe {
        PermutationUniverse::Targets => (table.target_values(), table.n),
        PermutationUniverse::Attributes => (table.attribute_values(), table.m),
    };
    let scale = table.scale(convention);
    permute_half(&values, half, scale, mode, seed)
}

fn permute_half(
    values: &[f64],
    half: usize,
    scale: f64,
    mode: PermutationMode,
    seed: u64,
) -> Result<PermutationOutcome> {
    debug_assert_eq!(values.len(), 2 * half);
    let total: f64 = values.iter().sum();
    let identity: Vec<usize> = (0..half).collect();
    let observed = partition_statistic(values, &identity, total, scale);

    let partitions = half_partition_count(half);
    let use_exact = match mode {
        PermutationMode::Exact => true,
        PermutationMode::MonteCarlo { .. } => false,
        PermutationMode::Auto => {
            matches!(partitions, Some(c) if c <= EXACT_ENUMERATION_LIMIT as u128)
        }
    };

    if use_exact {
        let total_count = partitions.ok_or_else(|| Error::EmptyInput {
            context: "partition count overflows; use Monte Carlo".into(),
        })?;
        if total_count > u64::MAX as u128 {
            return Err(Error::EmptyInput {
                context: "partition count exceeds u64; use Monte Carlo".into(),
            });
        }
        let mut matching: u64 = 0;
        for combo in (0..2 * half).combinations(half) {
            if partition_statistic(values, &combo, total, scale) >= observed {
                matching += 1;
            }
        }
        let total_count = total_count as u64;
        Ok(PermutationOutcome {
            p: matching as f64 / total_count as f64,
            matching,
            total: total_count,
            exact: true,
            seed: None,
        })
    } else {
        let draws = match mode {
            PermutationMode::MonteCarlo { draws } => draws,
            _ => DEFAULT_MC_DRAWS,
        };
        if draws == 0 {
            return Err(Error::EmptyInput {
                context: "Monte Carlo permutation test needs at least one draw".into(),
            });
        }
        let matching: u64 = (0..draws)
            .into_par_iter()
            .map(|draw| {
                // Counter-based: every draw owns a ChaCha stream, so the
                // outcome is independent of scheduling and worker count.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(draw + 1);
                let mut idx: Vec<usize> = (0..2 * half).collect();
                for i in 0..half {
                    let j = rng.gen_range(i..2 * half);
                    idx.swap(i, j);
                }
                // Canonicalize the chosen half so the statistic depends only
                // on the selected set, not the sampling order: the identity
                // set then reproduces `observed` bit for bit (ties count),
                // exactly as in the enumeration path.
                idx[..half].sort_unstable();
                let s = partition_statistic(values, &idx[..half], total, scale);
                u64::from(s >= observed)
            })
            .sum();
        Ok(PermutationOutcome {
            p: matching as f64 / draws as f64,
            matching,
            total: draws,
            exact: false,
            seed: Some(seed),
        })
    }
}

/// Generalized association statistic `‖(X − Y)ᵀ (A − B)‖_F`.
///
/// Columns pair up positionally, so `|X| = |Y|` and `|A| = |B|` are
/// required. With unit-length columns, the entrywise sum of the same matrix
/// equals `|X|` times the sum-form statistic.
pub fn gweat(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::CardinalityMismatch {
            left: x.ncols(),
            right: y.ncols(),
            context: "target sets X and Y".into(),
        });
    }
    if a.ncols() != b.ncols() {
        return Err(Error::CardinalityMismatch {
            left: a.ncols(),
            right: b.ncols(),
            context: "attribute sets A and B".into(),
        });
    }
    if x.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: a.nrows(),
            context: "target vs attribute vectors".into(),
        });
    }
    Ok(((x - y).transpose() * (a - b)).norm())
}

/// Resolution bookkeeping for one word set in a test run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetUsage {
    /// Words in the list.
    pub requested: usize,
    /// Words that made it into the computation.
    pub used: usize,
    /// `requested − used`: out-of-vocabulary, zero-vector, and
    /// size-equalization drops combined.
    pub dropped: usize,
}

/// Everything a single test run produces.
#[derive(Debug, Clone)]
pub struct WeatResult {
    /// Test statistic under `convention`.
    pub statistic: f64,
    /// Effect size `d`.
    pub effect_size: f64,
    /// One-sided permutation p-value.
    pub p_value: f64,
    /// Details of the permutation test behind `p_value`.
    pub permutation: PermutationOutcome,
    /// Generalized statistic over the same resolved, unit-normalized sets.
    pub gweat: f64,
    /// Usage for X, Y, A, B in that order.
    pub usage: [SetUsage; 4],
    /// Convention `statistic` was computed under.
    pub convention: StatisticConvention,
}

impl WeatResult {
    /// Render the fixed-layout TSV report row:
    /// `test  embedding  subspace  method  d  p  mode  drops`
    /// with `d` and `p` at four decimals, `mode` as `exact:m/M` or `mc:m/n`,
    /// and `drops` as per-set dropped counts.
    pub fn tsv_row(&self, test: &str, embedding: &str, subspace: &str, method: &str) -> String {
        format!(
            "{test}\t{embedding}\t{subspace}\t{method}\t{:.4}\t{:.4}\t{}\t{}",
            self.effect_size,
            self.p_value,
            self.permutation.mode_label(),
            self.drops_label(),
        )
    }

    /// `x:…,y:…,a:…,b:…` dropped-word counts.
    pub fn drops_label(&self) -> String {
        format!(
            "x:{},y:{},a:{},b:{}",
            self.usage[0].dropped,
            self.usage[1].dropped,
            self.usage[2].dropped,
            self.usage[3].dropped
        )
    }
}

/// Options for [`run_weat`].
#[derive(Debug, Clone)]
pub struct WeatOptions {
    /// Retry lowercased tokens on lookup misses.
    pub lowercase_fallback: bool,
    pub permutation: PermutationMode,
    pub universe: PermutationUniverse,
    pub convention: StatisticConvention,
    /// Seed for Monte Carlo permutation draws.
    pub seed: u64,
}

impl Default for WeatOptions {
    fn default() -> Self {
        WeatOptions {
            lowercase_fallback: true,
            permutation: PermutationMode::Auto,
            universe: PermutationUniverse::Targets,
            convention: StatisticConvention::SumForm,
            seed: 42,
        }
    }
}

/// Run a full association test against a table.
///
/// Word resolution: out-of-vocabulary words are dropped (with the lowercase
/// retry when enabled), zero vectors are dropped, and the paired sets are
/// trimmed from the tail to equal sizes. All retained vectors are
/// unit-normalized before any cosine is taken. Drop counts per set are
/// recorded in the result.
pub fn run_weat(
    table: &EmbeddingTable,
    test: &WeatTest,
    options: &WeatOptions,
) -> Result<WeatResult> {
    let resolve = |list: &crate::bias::WordList| -> Result<(Vec<Vec<f64>>, usize)> {
        let sub =
            subset_matrix(table, list.words(), options.lowercase_fallback).map_err(
                |e| match e {
                    Error::NoWordsResolved { .. } => Error::NoWordsResolved {
                        context: format!("test {:?}, list {:?}", test.name(), list.name()),
                    },
                    other => other,
                },
            )?;
        let mut vectors = Vec::with_capacity(sub.matrix.ncols());
        let mut zero_dropped = 0usize;
        for (j, col) in sub.matrix.column_iter().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                log::warn!(
                    "test {:?}: dropping zero vector for {:?}",
                    test.name(),
                    sub.resolved[j].0
                );
                zero_dropped += 1;
                continue;
            }
            vectors.push(col.iter().map(|v| v / norm).collect());
        }
        Ok((vectors, zero_dropped))
    };

    let (mut xv, _) = resolve(test.x())?;
    let (mut yv, _) = resolve(test.y())?;
    let (mut av, _) = resolve(test.a())?;
    let (mut bv, _) = resolve(test.b())?;

    let n = xv.len().min(yv.len());
    let m = av.len().min(bv.len());
    if n == 0 {
        return Err(Error::TooFewWords {
            needed: 1,
            found: 0,
            context: format!("test {:?}: no usable target pair", test.name()),
        });
    }
    if m == 0 {
        return Err(Error::TooFewWords {
            needed: 1,
            found: 0,
            context: format!("test {:?}: no usable attribute pair", test.name()),
        });
    }
    if xv.len() != yv.len() {
        log::warn!(
            "test {:?}: trimming targets to {n} per side ({} vs {} resolved)",
            test.name(),
            xv.len(),
            yv.len()
        );
    }
    if av.len() != bv.len() {
        log::warn!(
            "test {:?}: trimming attributes to {m} per side ({} vs {} resolved)",
            test.name(),
            av.len(),
            bv.len()
        );
    }
    xv.truncate(n);
    yv.truncate(n);
    av.truncate(m);
    bv.truncate(m);

    let usage = [
        SetUsage {
            requested: test.x().len(),
            used: n,
            dropped: test.x().len() - n,
        },
        SetUsage {
            requested: test.y().len(),
            used: n,
            dropped: test.y().len() - n,
        },
        SetUsage {
            requested: test.a().len(),
            used: m,
            dropped: test.a().len() - m,
        },
        SetUsage {
            requested: test.b().len(),
            used: m,
            dropped: test.b().len() - m,
        },
    ];

    let d = table.dimension();
    let to_matrix = |cols: &[Vec<f64>]| DMatrix::from_fn(d, cols.len(), |r, c| cols[c][r]);
    let (x, y, a, b) = (
        to_matrix(&xv),
        to_matrix(&yv),
        to_matrix(&av),
        to_matrix(&bv),
    );

    let statistic = weat_statistic_with(&x, &y, &a, &b, options.convention)?;
    let profile = association_profile(&x, &y, &a, &b)?;
    let effect = effect_size(&profile)?;
    let permutation = permutation_p(
        &x,
        &y,
        &a,
        &b,
        options.permutation,
        options.universe,
        options.convention,
        options.seed,
    )?;
    let g = gweat(&x, &y, &a, &b)?;

    Ok(WeatResult {
        statistic,
        effect_size: effect,
        p_value: permutation.p,
        permutation,
        gweat: g,
        usage,
        convention: options.convention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::WordList;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn mat(d: usize, cols: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(d, cols.len(), |r, c| cols[c][r])
    }

    fn random_unit_cols(rng: &mut StdRng, d: usize, k: usize) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(d, k, |_, _| rng.gen_range(-1.0..1.0f64));
        for mut col in m.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        m
    }

    // ------------------------------------------------------------------
    // Independent scalar oracles (plain loops, no shared code with the
    // implementation beyond the cosine definition).
    // ------------------------------------------------------------------

    fn cos_oracle(u: &[f64], v: &[f64]) -> f64 {
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        dot / (nu * nv)
    }

    fn cols_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }

    fn statistic_oracle(
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
    ) -> f64 {
        let (x, y, a, b) = (cols_of(x), cols_of(y), cols_of(a), cols_of(b));
        let mut acc = 0.0;
        for w in &x {
            for att in &a {
                acc += cos_oracle(w, att);
            }
            for att in &b {
                acc -= cos_oracle(w, att);
            }
        }
        for w in &y {
            for att in &a {
                acc -= cos_oracle(w, att);
            }
            for att in &b {
                acc += cos_oracle(w, att);
            }
        }
        acc / x.len() as f64
    }

    fn association_oracle(w: &[f64], a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let a = cols_of(a);
        let b = cols_of(b);
        let ma: f64 = a.iter().map(|att| cos_oracle(w, att)).sum::<f64>() / a.len() as f64;
        let mb: f64 = b.iter().map(|att| cos_oracle(w, att)).sum::<f64>() / b.len() as f64;
        ma - mb
    }

    fn effect_oracle(
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
    ) -> f64 {
        let sx: Vec<f64> = cols_of(x)
            .iter()
            .map(|w| association_oracle(w, a, b))
            .collect();
        let sy: Vec<f64> = cols_of(y)
            .iter()
            .map(|w| association_oracle(w, a, b))
            .collect();
        let all: Vec<f64> = sx.iter().chain(sy.iter()).copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
        let mx = sx.iter().sum::<f64>() / sx.len() as f64;
        let my = sy.iter().sum::<f64>() / sy.len() as f64;
        (mx - my) / var.sqrt()
    }

    /// Exact permutation oracle via bitmask enumeration, recomputing every
    /// permuted statistic from raw vectors.
    fn permutation_oracle(
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
    ) -> (u64, u64) {
        let pool: Vec<Vec<f64>> = cols_of(x).into_iter().chain(cols_of(y)).collect();
        let n = pool.len() / 2;
        let d = x.nrows();
        let observed = statistic_oracle(x, y, a, b);
        let mut matching = 0u64;
        let mut count = 0u64;
        for mask in 0u32..(1 << pool.len()) {
            if mask.count_ones() as usize != n {
                continue;
            }
            count += 1;
            let mut xs: Vec<&[f64]> = Vec::new();
            let mut ys: Vec<&[f64]> = Vec::new();
            for (i, w) in pool.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    xs.push(w);
                } else {
                    ys.push(w);
                }
            }
            let xm = DMatrix::from_fn(d, n, |r, c| xs[c][r]);
            let ym = DMatrix::from_fn(d, n, |r, c| ys[c][r]);
            let s = statistic_oracle(&xm, &ym, a, b);
            // The oracle tolerates float path differences: only the identity
            // and exactly tied partitions sit at the boundary, and those are
            // equal to the last bit in both paths on random data.
            if s >= observed {
                matching += 1;
            }
        }
        (matching, count)
    }

    // ------------------------------------------------------------------
    // Hand cases
    // ------------------------------------------------------------------

    #[test]
    fn orthogonal_pairs_hand_case() {
        let x = mat(2, &[&[1.0, 0.0]]);
        let y = mat(2, &[&[0.0, 1.0]]);
        let a = mat(2, &[&[1.0, 0.0]]);
        let b = mat(2, &[&[0.0, 1.0]]);
        let s = weat_statistic(&x, &y, &a, &b).unwrap();
        assert!((s - 2.0).abs() < 1e-15);
        // d for the same configuration: profile is {+1} vs {−1}, popstd 1.
        let p = association_profile(&x, &y, &a, &b).unwrap();
        assert!((effect_size(&p).unwrap() - 2.0).abs() < 1e-15);
        // Identical attribute sets zero the statistic.
        let s = weat_statistic(&x, &y, &a, &a).unwrap();
        assert!(s.abs() < 1e-15);
    }

    #[test]
    fn statistic_validates_inputs() {
        let x = mat(2, &[&[1.0, 0.0]]);
        let y2 = mat(2, &[&[0.0, 1.0], &[1.0, 1.0]]);
        let a = mat(2, &[&[1.0, 0.0]]);
        assert!(matches!(
            weat_statistic(&x, &y2, &a, &a),
            Err(Error::CardinalityMismatch { .. })
        ));
        let zero = mat(2, &[&[0.0, 0.0]]);
        assert!(matches!(
            weat_statistic(&x, &x, &a, &zero),
            Err(Error::ZeroVector { .. })
        ));
    }

    #[test]
    fn effect_size_degenerate_profile_errors() {
        let p = AssociationProfile {
            x_values: vec![0.5, 0.5],
            y_values: vec![0.5, 0.5],
        };
        assert!(matches!(effect_size(&p), Err(Error::DegenerateProfile)));
    }

    #[test]
    fn statistic_and_effect_match_oracles() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..5 {
            let x = random_unit_cols(&mut rng, 7, 4);
            let y = random_unit_cols(&mut rng, 7, 4);
            let a = random_unit_cols(&mut rng, 7, 6);
            let b = random_unit_cols(&mut rng, 7, 6);
            let s = weat_statistic(&x, &y, &a, &b).unwrap();
            assert!((s - statistic_oracle(&x, &y, &a, &b)).abs() < 1e-12);
            let d = effect_size(&association_profile(&x, &y, &a, &b).unwrap()).unwrap();
            assert!((d - effect_oracle(&x, &y, &a, &b)).abs() < 1e-12);
            assert!(d.abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn conventions_are_proportional() {
        let mut rng = StdRng::seed_from_u64(32);
        let x = random_unit_cols(&mut rng, 5, 3);
        let y = random_unit_cols(&mut rng, 5, 3);
        let a = random_unit_cols(&mut rng, 5, 7);
        let b = random_unit_cols(&mut rng, 5, 7);
        let sum = weat_statistic_with(&x, &y, &a, &b, StatisticConvention::SumForm).unwrap();
        let mean = weat_statistic_with(&x, &y, &a, &b, StatisticConvention::MeanForm).unwrap();
        // sum form scales by 1/|X|, mean form by 1/|A|.
        assert!((sum * 3.0 - mean * 7.0).abs() < 1e-12);
    }

    #[test]
    fn statistic_is_antisymmetric() {
        let mut rng = StdRng::seed_from_u64(33);
        let x = random_unit_cols(&mut rng, 5, 4);
        let y = random_unit_cols(&mut rng, 5, 4);
        let a = random_unit_cols(&mut rng, 5, 3);
        let b = random_unit_cols(&mut rng, 5, 3);
        let s1 = weat_statistic(&x, &y, &a, &b).unwrap();
        let s2 = weat_statistic(&y, &x, &a, &b).unwrap();
        let s3 = weat_statistic(&x, &y, &b, &a).unwrap();
        assert!((s1 + s2).abs() < 1e-12);
        assert!((s1 + s3).abs() < 1e-12);
    }

    #[test]
    fn effect_size_is_scale_invariant() {
        let mut rng = StdRng::seed_from_u64(34);
        let x = random_unit_cols(&mut rng, 5, 4);
        let y = random_unit_cols(&mut rng, 5, 4);
        let a = random_unit_cols(&mut rng, 5, 3);
        let b = random_unit_cols(&mut rng, 5, 3);
        let d1 = effect_size(&association_profile(&x, &y, &a, &b).unwrap()).unwrap();
        let d2 =
            effect_size(&association_profile(&(2.5 * &x), &y, &(0.1 * &a), &b).unwrap()).unwrap();
        assert!((d1 - d2).abs() < 1e-12, "cosines ignore vector scale");
    }

    // ------------------------------------------------------------------
    // Permutation tests
    // ------------------------------------------------------------------

    #[test]
    fn one_versus_one_has_two_partitions() {
        let x = mat(2, &[&[1.0, 0.0]]);
        let y = mat(2, &[&[0.0, 1.0]]);
        let a = mat(2, &[&[1.0, 0.0]]);
        let b = mat(2, &[&[0.0, 1.0]]);
        let out = permutation_p(
            &x,
            &y,
            &a,
            &b,
            PermutationMode::Auto,
            PermutationUniverse::Targets,
            StatisticConvention::SumForm,
            0,
        )
        .unwrap();
        assert!(out.exact);
        assert_eq!(out.total, 2);
        assert_eq!(out.matching, 1, "only the identity partition matches");
        assert!((out.p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_permutation_matches_bitmask_oracle() {
        let mut rng = StdRng::seed_from_u64(35);
        for trial in 0..5 {
            let x = random_unit_cols(&mut rng, 6, 4);
            let y = random_unit_cols(&mut rng, 6, 4);
            let a = random_unit_cols(&mut rng, 6, 6);
            let b = random_unit_cols(&mut rng, 6, 6);
            let got = permutation_p(
                &x,
                &y,
                &a,
                &b,
                PermutationMode::Exact,
                PermutationUniverse::Targets,
                StatisticConvention::SumForm,
                0,
            )
            .unwrap();
            let (matching, count) = permutation_oracle(&x, &y, &a, &b);
            assert_eq!(got.total, count, "trial {trial}");
            assert_eq!(got.matching, matching, "trial {trial}");
            assert!(got.p >= 1.0 / count as f64, "identity partition must count");
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_and_near_exact() {
        let mut rng = StdRng::seed_from_u64(36);
        let x = random_unit_cols(&mut rng, 6, 4);
        let y = random_unit_cols(&mut rng, 6, 4);
        let a = random_unit_cols(&mut rng, 6, 4);
        let b = random_unit_cols(&mut rng, 6, 4);
        let exact = permutation_p(
            &x,
            &y,
            &a,
            &b,
            PermutationMode::Exact,
            PermutationUniverse::Targets,
            StatisticConvention::SumForm,
            0,
        )
        .unwrap();
        let mc = |seed| {
            permutation_p(
                &x,
                &y,
                &a,
                &b,
                PermutationMode::MonteCarlo { draws: 100_000 },
                PermutationUniverse::Targets,
                StatisticConvention::SumForm,
                seed,
            )
            .unwrap()
        };
        let m1 = mc(7);
        let m2 = mc(7);
        assert_eq!(m1.matching, m2.matching, "same seed, same count");
        assert!(
            (m1.p - exact.p).abs() < 0.01,
            "mc {} vs exact {}",
            m1.p,
            exact.p
        );
        assert_eq!(m1.seed, Some(7));
        assert!(!m1.exact);
    }

    #[test]
    fn attribute_universe_permutes_the_other_pool() {
        // 1 target pair but 4 attribute pairs: the attribute universe has
        // C(8,4) = 70 partitions while the target universe has 2.
        let mut rng = StdRng::seed_from_u64(37);
        let x = random_unit_cols(&mut rng, 6, 1);
        let y = random_unit_cols(&mut rng, 6, 1);
        let a = random_unit_cols(&mut rng, 6, 4);
        let b = random_unit_cols(&mut rng, 6, 4);
        let t = permutation_p(
            &x,
            &y,
            &a,
            &b,
            PermutationMode::Exact,
            PermutationUniverse::Targets,
            StatisticConvention::SumForm,
            0,
        )
        .unwrap();
        let at = permutation_p(
            &x,
            &y,
            &a,
            &b,
            PermutationMode::Exact,
            PermutationUniverse::Attributes,
            StatisticConvention::SumForm,
            0,
        )
        .unwrap();
        assert_eq!(t.total, 2);
        assert_eq!(at.total, 70);
        assert!(at.p >= 1.0 / 70.0);
    }

    #[test]
    fn convention_does_not_change_p() {
        let mut rng = StdRng::seed_from_u64(38);
        let x = random_unit_cols(&mut rng, 6, 3);
        let y = random_unit_cols(&mut rng, 6, 3);
        let a = random_unit_cols(&mut rng, 6, 5);
        let b = random_unit_cols(&mut rng, 6, 5);
        let p1 = permutation_p(
            &x,
            &y,
            &a,
            &b,
            PermutationMode::Exact,
            PermutationUniverse::Targets,
            StatisticConvention::SumForm,
            0,
        )
        .unwrap();
        let p2 = permutation_p(
            &x,
            &y,
            &a,
            &b,
            PermutationMode::Exact,
            PermutationUniverse::Targets,
            StatisticConvention::MeanForm,
            0,
        )
        .unwrap();
        assert_eq!(p1.matching, p2.matching);
    }

    // ------------------------------------------------------------------
    // GWEAT
    // ------------------------------------------------------------------

    #[test]
    fn gweat_hand_case_and_identities() {
        // X−Y = (1,−1)ᵀ scaled; A−B likewise; single columns.
        let x = mat(2, &[&[1.0, 0.0]]);
        let y = mat(2, &[&[0.0, 1.0]]);
        let g = gweat(&x, &y, &x, &y).unwrap();
        // (X−Y)ᵀ(A−B) = [ (1,−1)·(1,−1) ] = [2] ⇒ Frobenius 2.
        assert!((g - 2.0).abs() < 1e-15);
        // X = Y ⇒ 0.
        let g = gweat(&x, &x, &x, &y).unwrap();
        assert!(g.abs() < 1e-15);
        assert!(gweat(&x, &mat(2, &[&[1.0, 0.0], &[0.0, 1.0]]), &x, &y).is_err());
    }

    #[test]
    fn entrywise_sum_of_gweat_matrix_recovers_statistic() {
        // For unit columns, sum over entries of (X−Y)ᵀ(A−B) = |X| · s.
        let mut rng = StdRng::seed_from_u64(39);
        let x = random_unit_cols(&mut rng, 7, 5);
        let y = random_unit_cols(&mut rng, 7, 5);
        let a = random_unit_cols(&mut rng, 7, 4);
        let b = random_unit_cols(&mut rng, 7, 4);
        let m = (&x - &y).transpose() * (&a - &b);
        let total: f64 = m.iter().sum();
        let s = weat_statistic(&x, &y, &a, &b).unwrap();
        assert!(
            (total - 5.0 * s).abs() < 1e-10,
            "entrywise sum {total} vs |X|·s {}",
            5.0 * s
        );
    }

    // ------------------------------------------------------------------
    // run_weat end to end
    // ------------------------------------------------------------------

    fn toy_table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("x1", vec![1.0, 0.0]).unwrap();
        t.insert("y1", vec![0.0, 1.0]).unwrap();
        t.insert("a1", vec![1.0, 0.0]).unwrap();
        t.insert("b1", vec![0.0, 1.0]).unwrap();
        t
    }

    fn toy_test() -> WeatTest {
        WeatTest::new(
            "toy",
            WordList::from_words("x", ["x1"]).unwrap(),
            WordList::from_words("y", ["y1"]).unwrap(),
            WordList::from_words("a", ["a1"]).unwrap(),
            WordList::from_words("b", ["b1"]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn run_weat_toy_pipeline() {
        let result = run_weat(&toy_table(), &toy_test(), &WeatOptions::default()).unwrap();
        assert!((result.statistic - 2.0).abs() < 1e-12);
        assert!((result.effect_size - 2.0).abs() < 1e-12);
        assert!((result.p_value - 0.5).abs() < 1e-12);
        assert!(result.permutation.exact);
        assert_eq!(
            result.usage[0],
            SetUsage {
                requested: 1,
                used: 1,
                dropped: 0
            }
        );
        assert!((result.gweat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn run_weat_drops_and_trims() {
        let mut table = toy_table();
        table.insert("x2", vec![0.9, 0.1]).unwrap();
        table.insert("zero", vec![0.0, 0.0]).unwrap();
        // X has an extra resolved word plus a zero vector and an OOV word:
        // Y resolves only one, so X trims to 1; drops = 3.
        let test = WeatTest::new(
            "trim",
            WordList::from_words("x", ["x1", "x2", "zero", "ghost"]).unwrap(),
            WordList::from_words("y", ["y1"]).unwrap(),
            WordList::from_words("a", ["a1"]).unwrap(),
            WordList::from_words("b", ["b1"]).unwrap(),
        )
        .unwrap();
        let result = run_weat(&table, &test, &WeatOptions::default()).unwrap();
        assert_eq!(
            result.usage[0],
            SetUsage {
                requested: 4,
                used: 1,
                dropped: 3
            }
        );
        assert_eq!(
            result.usage[1],
            SetUsage {
                requested: 1,
                used: 1,
                dropped: 0
            }
        );
        assert_eq!(result.drops_label(), "x:3,y:0,a:0,b:0");
    }

    #[test]
    fn run_weat_errors_when_a_side_is_empty() {
        let test = WeatTest::new(
            "empty",
            WordList::from_words("x", ["x1"]).unwrap(),
            WordList::from_words("y", ["ghost"]).unwrap(),
            WordList::from_words("a", ["a1"]).unwrap(),
            WordList::from_words("b", ["b1"]).unwrap(),
        )
        .unwrap();
        assert!(run_weat(&toy_table(), &test, &WeatOptions::default()).is_err());
    }

    #[test]
    fn tsv_row_shape() {
        let result = run_weat(&toy_table(), &toy_test(), &WeatOptions::default()).unwrap();
        let row = result.tsv_row("toy", "emb", "none", "none");
        let fields: Vec<&str> = row.split('\t').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[4], "2.0000");
        assert_eq!(fields[5], "0.5000");
        assert_eq!(fields[6], "exact:1/2");
        assert_eq!(fields[7], "x:0,y:0,a:0,b:0");
    }

    #[test]
    fn half_partition_count_is_central_binomial() {
        assert_eq!(half_partition_count(1), Some(2));
        assert_eq!(half_partition_count(4), Some(70));
        assert_eq!(half_partition_count(8), Some(12_870));
        assert_eq!(half_partition_count(10), Some(184_756));
        // C(100, 50) must not overflow u128.
        assert!(half_partition_count(50).is_some());
    }
}
