//! Word lists, bias-subspace specifications, and association-test
//! definitions, including the built-in suite bundled with the crate.
//!
//! A *bias subspace* is described by one or more word lists; the vectors of
//! those words (gathered from an embedding table) form the sample matrix a
//! conceptor is computed from. Multiple lists can be pooled into a single
//! sample (`union`) or combined after the fact with conceptor OR (`or`).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::conceptor::{compute_conceptor, or_many, Conceptor};
use crate::embedding::{subset_matrix, EmbeddingTable};
use crate::{Error, Result};

/// A named list of unique tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    name: String,
    words: Vec<String>,
}

impl WordList {
    /// Build a list from tokens, deduplicating while preserving first
    /// occurrence. Errors when empty or when a token contains whitespace.
    pub fn from_words<S: Into<String>>(
        name: impl Into<String>,
        words: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let name = name.into();
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for w in words {
            let w: String = w.into();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::EmptyInput {
                    context: format!("word list {name:?}: token {w:?} is empty or has whitespace"),
                });
            }
            if seen.insert(w.clone(), ()).is_none() {
                out.push(w);
            } else {
                log::warn!("word list {name:?}: dropping duplicate token {w:?}");
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyInput {
                context: format!("word list {name:?} has no tokens"),
            });
        }
        Ok(WordList { name, words: out })
    }

    /// List name (file stem for loaded lists).
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Tokens in list order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Whether the list is empty (never true for a constructed list).
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Parse word-list text: one token per line, `#` starts a comment line,
/// blank lines ignored, duplicates dropped with a warning.
fn parse_wordlist(name: &str, text: &str, origin: &str) -> Result<WordList> {
    let mut words = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.split_whitespace().count() != 1 {
            return Err(Error::Parse {
                path: origin.into(),
                line: idx + 1,
                message: format!("expected one token per line, got {line:?}"),
            });
        }
        words.push(line.to_string());
    }
    if words.is_empty() {
        return Err(Error::EmptyInput {
            context: format!("word list {origin:?} has no tokens"),
        });
    }
    WordList::from_words(name, words)
}

/// Load a word list from a text file; the list is named after the file stem.
pub fn load_wordlist(path: impl AsRef<Path>) -> Result<WordList> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "wordlist".to_string());
    parse_wordlist(&name, &text, &path.display().to_string())
}

/// How multiple word lists combine into one bias subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceMode {
    /// One list, one sample, one conceptor.
    Single,
    /// Pool all lists into one sample (duplicates across lists collapse),
    /// then compute one conceptor.
    Union,
    /// One conceptor per list, combined with conceptor OR.
    Or,
}

impl SubspaceMode {
    /// Stable lowercase name used in configs and reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            SubspaceMode::Single => "single",
            SubspaceMode::Union => "union",
            SubspaceMode::Or => "or",
        }
    }
}

/// A bias subspace: word lists, combination mode, and the aperture the
/// conceptor is computed at.
#[derive(Debug, Clone)]
pub struct BiasSubspaceSpec {
    pub name: String,
    pub mode: SubspaceMode,
    pub lists: Vec<WordList>,
    pub alpha: f64,
}

impl BiasSubspaceSpec {
    /// Validate structural requirements (list counts per mode, positive alpha).
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::InvalidAperture { alpha: self.alpha });
        }
        match self.mode {
            SubspaceMode::Single if self.lists.len() != 1 => Err(Error::CardinalityMismatch {
                left: self.lists.len(),
                right: 1,
                context: format!(
                    "subspace {:?}: single mode takes exactly one list",
                    self.name
                ),
            }),
            _ if self.lists.is_empty() => Err(Error::EmptyInput {
                context: format!("subspace {:?} has no word lists", self.name),
            }),
            _ => Ok(()),
        }
    }

    /// The union of all list words, deduplicated in first-seen order.
    pub fn all_words(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for list in &self.lists {
            for w in list.words() {
                if seen.insert(w.clone(), ()).is_none() {
                    out.push(w.clone());
                }
            }
        }
        out
    }
}

/// Resolution statistics for one list against a table.
#[derive(Debug, Clone)]
pub struct ListCoverage {
    pub list: String,
    pub requested: usize,
    pub used: usize,
    pub missing: Vec<String>,
}

/// Per-list resolution statistics for a subspace build.
#[derive(Debug, Clone, Default)]
pub struct CoverageReport {
    pub lists: Vec<ListCoverage>,
}

impl CoverageReport {
    /// Total words used across lists (union mode counts shared words once
    /// per list here; the conceptor itself sees the deduplicated union).
    pub fn total_used(&self) -> usize {
        self.lists.iter().map(|l| l.used).sum()
    }
}

fn coverage_for(table: &EmbeddingTable, list: &WordList, lowercase_fallback: bool) -> ListCoverage {
    let mut used = 0;
    let mut missing = Vec::new();
    for w in list.words() {
        let hit = table.contains(w) || (lowercase_fallback && table.contains(&w.to_lowercase()));
        if hit {
            used += 1;
        } else {
            missing.push(w.clone());
        }
    }
    ListCoverage {
        list: list.name().to_string(),
        requested: list.len(),
        used,
        missing,
    }
}

/// Compute the conceptor described by a subspace spec against a table.
///
/// Returns the conceptor and a per-list coverage report. `union` mode errors
/// only when the whole union is out of vocabulary; `or` mode requires every
/// list to resolve at least one word (each list gets its own conceptor).
pub fn build_subspace_conceptor(
    spec: &BiasSubspaceSpec,
    table: &EmbeddingTable,
    lowercase_fallback: bool,
) -> Result<(Conceptor, CoverageReport)> {
    spec.validate()?;
    let report = CoverageReport {
        lists: spec
            .lists
            .iter()
            .map(|l| coverage_for(table, l, lowercase_fallback))
            .collect(),
    };
    for cov in &report.lists {
        if !cov.missing.is_empty() {
            log::warn!(
                "subspace {:?}: list {:?} missing {}/{} word(s) from the table",
                spec.name,
                cov.list,
                cov.missing.len(),
                cov.requested
            );
        }
    }
    let conceptor = match spec.mode {
        SubspaceMode::Single | SubspaceMode::Union => {
            let words = spec.all_words();
            let sub = subset_matrix(table, &words, lowercase_fallback).map_err(|e| match e {
                Error::NoWordsResolved { .. } => Error::NoWordsResolved {
                    context: format!("subspace {:?}", spec.name),
                },
                other => other,
            })?;
            compute_conceptor(&sub.matrix, spec.alpha)?
        }
        SubspaceMode::Or => {
            let mut per_list = Vec::with_capacity(spec.lists.len());
            for list in &spec.lists {
                let sub =
                    subset_matrix(table, list.words(), lowercase_fallback).map_err(
                        |e| match e {
                            Error::NoWordsResolved { .. } => Error::NoWordsResolved {
                                context: format!(
                                    "subspace {:?}: list {:?} resolved no words",
                                    spec.name,
                                    list.name()
                                ),
                            },
                            other => other,
                        },
                    )?;
                per_list.push(compute_conceptor(&sub.matrix, spec.alpha)?);
            }
            or_many(&per_list)?
        }
    };
    Ok((conceptor, report))
}

/// A four-set word association test: targets X vs Y, attributes A vs B.
#[derive(Debug, Clone)]
pub struct WeatTest {
    name: String,
    x: WordList,
    y: WordList,
    a: WordList,
    b: WordList,
}

impl WeatTest {
    /// Assemble a test, enforcing that the four sets are pairwise disjoint
    /// (tokens compared verbatim).
    pub fn new(
        name: impl Into<String>,
        x: WordList,
        y: WordList,
        a: WordList,
        b: WordList,
    ) -> Result<Self> {
        let name = name.into();
        let sets = [("X", &x), ("Y", &y), ("A", &a), ("B", &b)];
        for i in 0..sets.len() {
            for j in (i + 1)..sets.len() {
                for token in sets[i].1.words() {
                    if sets[j].1.words().contains(token) {
                        return Err(Error::OverlappingSets {
                            test: name,
                            token: token.clone(),
                            first: format!("{} ({})", sets[i].0, sets[i].1.name()),
                            second: format!("{} ({})", sets[j].0, sets[j].1.name()),
                        });
                    }
                }
            }
        }
        Ok(WeatTest { name, x, y, a, b })
    }

    /// Test name used in reports.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// First target set.
    pub fn x(&self) -> &WordList {
        &self.x
    }

    /// Second target set.
    pub fn y(&self) -> &WordList {
        &self.y
    }

    /// First attribute set.
    pub fn a(&self) -> &WordList {
        &self.a
    }

    /// Second attribute set.
    pub fn b(&self) -> &WordList {
        &self.b
    }
}

/// One domain of the built-in suite: the subspaces to debias with and the
/// tests to score, crossed by the experiment driver.
#[derive(Debug, Clone)]
pub struct SuiteBlock {
    /// Domain label, e.g. `gender` or `racial`.
    pub domain: String,
    pub subspaces: Vec<BiasSubspaceSpec>,
    pub tests: Vec<WeatTest>,
}

macro_rules! bundled {
    ($name:literal) => {
        ($name, include_str!(concat!("../data/", $name, ".txt")))
    };
}

fn bundled_list(name: &str, text: &str) -> Result<WordList> {
    parse_wordlist(name, text, &format!("bundled:{name}")).map_err(|e| Error::BadBundledList {
        name: name.to_string(),
        message: e.to_string(),
    })
}

/// Fetch one bundled word list by name.
///
/// Available: `career`, `family`, `math`, `arts`, `science`, `arts2`,
/// `male_names`, `female_names`, `ea_names`, `aa_names`, `pleasant`,
/// `unpleasant`, `gender_pronouns`, `gender_extended`, `gender_propernouns`.
pub fn bundled_wordlist(name: &str) -> Result<WordList> {
    let table: &[(&str, &str)] = &[
        bundled!("career"),
        bundled!("family"),
        bundled!("math"),
        bundled!("arts"),
        bundled!("science"),
        bundled!("arts2"),
        bundled!("male_names"),
        bundled!("female_names"),
        bundled!("ea_names"),
        bundled!("aa_names"),
        bundled!("pleasant"),
        bundled!("unpleasant"),
        bundled!("gender_pronouns"),
        bundled!("gender_extended"),
        bundled!("gender_propernouns"),
    ];
    let (_, text) =
        table
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::BadBundledList {
                name: name.to_string(),
                message: "no bundled list with this name".to_string(),
            })?;
    bundled_list(name, text)
}

/// The built-in experiment suite.
///
/// * Gender block: five subspaces — `pronouns`, `extended`, `propernouns`
///   (each a single list), `all` (union of the three), and `or`
///   (OR-combination of the three) — crossed with the career/family,
///   math/arts, and science/arts tests, all using male vs female first
///   names as attributes.
/// * Racial block: one subspace pooling European-American and
///   African-American names, with the names-vs-valence test (pleasant vs
///   unpleasant attributes).
pub fn builtin_suite(alpha: f64) -> Result<Vec<SuiteBlock>> {
    let pronouns = bundled_wordlist("gender_pronouns")?;
    let extended = bundled_wordlist("gender_extended")?;
    let propernouns = bundled_wordlist("gender_propernouns")?;
    let male = bundled_wordlist("male_names")?;
    let female = bundled_wordlist("female_names")?;

    let gender_lists = vec![pronouns.clone(), extended.clone(), propernouns.clone()];
    let gender_subspaces = vec![
        BiasSubspaceSpec {
            name: "pronouns".into(),
            mode: SubspaceMode::Single,
            lists: vec![pronouns],
            alpha,
        },
        BiasSubspaceSpec {
            name: "extended".into(),
            mode: SubspaceMode::Single,
            lists: vec![extended],
            alpha,
        },
        BiasSubspaceSpec {
            name: "propernouns".into(),
            mode: SubspaceMode::Single,
            lists: vec![propernouns],
            alpha,
        },
        BiasSubspaceSpec {
            name: "all".into(),
            mode: SubspaceMode::Union,
            lists: gender_lists.clone(),
            alpha,
        },
        BiasSubspaceSpec {
            name: "or".into(),
            mode: SubspaceMode::Or,
            lists: gender_lists,
            alpha,
        },
    ];
    let gender_tests = vec![
        WeatTest::new(
            "career_family",
            bundled_wordlist("career")?,
            bundled_wordlist("family")?,
            male.clone(),
            female.clone(),
        )?,
        WeatTest::new(
            "math_arts",
            bundled_wordlist("math")?,
            bundled_wordlist("arts")?,
            male.clone(),
            female.clone(),
        )?,
        WeatTest::new(
            "science_arts",
            bundled_wordlist("science")?,
            bundled_wordlist("arts2")?,
            male,
            female,
        )?,
    ];

    let ea = bundled_wordlist("ea_names")?;
    let aa = bundled_wordlist("aa_names")?;
    let racial_subspaces = vec![BiasSubspaceSpec {
        name: "names".into(),
        mode: SubspaceMode::Union,
        lists: vec![ea.clone(), aa.clone()],
        alpha,
    }];
    let racial_tests = vec![WeatTest::new(
        "names_valence",
        ea,
        aa,
        bundled_wordlist("pleasant")?,
        bundled_wordlist("unpleasant")?,
    )?];

    Ok(vec![
        SuiteBlock {
            domain: "gender".into(),
            subspaces: gender_subspaces,
            tests: gender_tests,
        },
        SuiteBlock {
            domain: "racial".into(),
            subspaces: racial_subspaces,
            tests: racial_tests,
        },
    ])
}
