//! JSON run configuration for the `weat` grid command.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use debias_core::bias::{
    builtin_suite, load_wordlist, BiasSubspaceSpec, SubspaceMode, SuiteBlock, WeatTest,
};
use serde::Deserialize;

use crate::support::parse_subspace_mode;

/// One embedding table in the grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingEntry {
    /// Label used in report rows.
    pub label: String,
    pub path: PathBuf,
    /// Token-instance table: rows are occurrences, not types.
    #[serde(default)]
    pub contextual: bool,
}

/// A bias subspace built from word-list files.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceEntry {
    pub name: String,
    /// `single`, `union`, or `or`.
    #[serde(default = "default_mode")]
    pub mode: String,
    pub lists: Vec<PathBuf>,
}

fn default_mode() -> String {
    "union".to_string()
}

/// An association test built from four word-list files.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestEntry {
    pub name: String,
    pub x: PathBuf,
    pub y: PathBuf,
    pub a: PathBuf,
    pub b: PathBuf,
}

/// The `weat` grid configuration, deserialized from JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub embeddings: Vec<EmbeddingEntry>,

    /// `"builtin"` pulls in the bundled gender + racial suite instead of
    /// explicit `subspaces`/`tests`.
    #[serde(default)]
    pub suite: Option<String>,
    #[serde(default)]
    pub subspaces: Vec<SubspaceEntry>,
    #[serde(default)]
    pub tests: Vec<TestEntry>,

    /// Subset of `none`, `conceptor`, `mu`, `bolukbasi`.
    pub methods: Vec<String>,

    /// Aperture for subspace conceptors (falls back to `--alpha`).
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Monte Carlo seed (falls back to `--seed`).
    #[serde(default)]
    pub seed: Option<u64>,
    /// `auto`, `exact`, or `mc:N` (falls back to `--permutations`).
    #[serde(default)]
    pub permutations: Option<String>,
    /// Statistic convention: `sum` (default) or `mean`.
    #[serde(default)]
    pub statistic: Option<String>,
    /// Permutation universe: `targets` (default) or `attributes`.
    #[serde(default)]
    pub universe: Option<String>,

    /// Principal components removed by the `mu` method (default 1).
    #[serde(default)]
    pub mu_components: Option<usize>,
    /// Definitional pair file for `bolukbasi` (bundled pairs when absent).
    #[serde(default)]
    pub definitional_pairs: Option<PathBuf>,

    /// Unit-normalize tables after loading (falls back to `--normalize`).
    #[serde(default)]
    pub normalize: Option<bool>,
    /// Mean-center tables after loading (falls back to `--center`).
    #[serde(default)]
    pub center: Option<bool>,
    /// Retry lowercased tokens (falls back to `--lowercase-fallback`).
    #[serde(default)]
    pub lowercase_fallback: Option<bool>,
}

/// Grid methods, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    None,
    Conceptor,
    Mu,
    Bolukbasi,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Method::None),
            "conceptor" => Ok(Method::Conceptor),
            "mu" => Ok(Method::Mu),
            "bolukbasi" => Ok(Method::Bolukbasi),
            other => bail!("unknown method {other:?} (use none, conceptor, mu, bolukbasi)"),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Conceptor => "conceptor",
            Method::Mu => "mu",
            Method::Bolukbasi => "bolukbasi",
        }
    }
}

/// A fully validated grid plan: blocks pair subspaces with the tests they
/// run against (the bundled suite keeps its domains separate; explicit
/// configs form a single block).
pub struct GridPlan {
    pub embeddings: Vec<EmbeddingEntry>,
    pub blocks: Vec<SuiteBlock>,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub seed: u64,
    pub permutations: debias_core::weat::PermutationMode,
    pub statistic: debias_core::weat::StatisticConvention,
    pub universe: debias_core::weat::PermutationUniverse,
    pub mu_components: usize,
    pub definitional_pairs: Vec<debias_core::baselines::DefinitionalPair>,
    pub normalize: bool,
    pub center: bool,
    pub lowercase_fallback: bool,
    /// Every input file the plan will read (for provenance).
    pub input_files: Vec<PathBuf>,
}

impl RunConfig {
    /// Read and deserialize a config file (no validation yet).
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }

    /// Validate everything up front — referenced files must exist, word
    /// lists must parse, names must be unique — and assemble the plan.
    /// No numeric work happens here.
    pub fn into_plan(self, global: &crate::GlobalArgs) -> Result<GridPlan> {
        if self.embeddings.is_empty() {
            bail!("config needs at least one embedding");
        }
        let mut labels = HashSet::new();
        for e in &self.embeddings {
            if !labels.insert(e.label.as_str()) {
                bail!("duplicate embedding label {:?}", e.label);
            }
            if !e.path.exists() {
                bail!("embedding file {} does not exist", e.path.display());
            }
        }

        if self.methods.is_empty() {
            bail!("config needs at least one method");
        }
        let mut methods = Vec::new();
        for m in &self.methods {
            let parsed = Method::parse(m)?;
            if methods.contains(&parsed) {
                bail!("method {m:?} listed twice");
            }
            methods.push(parsed);
        }

        let alpha = self.alpha.unwrap_or(global.alpha);
        if !(alpha.is_finite() && alpha > 0.0) {
            bail!("alpha must be finite and positive, got {alpha}");
        }
        let seed = self.seed.unwrap_or(global.seed);
        let permutations = crate::support::parse_permutations(
            self.permutations.as_deref().unwrap_or(&global.permutations),
        )?;
        let statistic = match self.statistic.as_deref().unwrap_or("sum") {
            "sum" => debias_core::weat::StatisticConvention::SumForm,
            "mean" => debias_core::weat::StatisticConvention::MeanForm,
            other => bail!("unknown statistic convention {other:?} (use sum or mean)"),
        };
        let universe = match self.universe.as_deref().unwrap_or("targets") {
            "targets" => debias_core::weat::PermutationUniverse::Targets,
            "attributes" => debias_core::weat::PermutationUniverse::Attributes,
            other => bail!("unknown permutation universe {other:?} (use targets or attributes)"),
        };

        let mut input_files: Vec<PathBuf> =
            self.embeddings.iter().map(|e| e.path.clone()).collect();

        let blocks = match self.suite.as_deref() {
            Some("builtin") => {
                if !self.subspaces.is_empty() || !self.tests.is_empty() {
                    bail!("suite=builtin cannot be combined with explicit subspaces/tests");
                }
                builtin_suite(alpha).context("assembling the bundled suite")?
            }
            Some(other) => bail!("unknown suite {other:?} (only \"builtin\" is bundled)"),
            None => {
                if self.subspaces.is_empty() {
                    bail!("config needs subspaces (or suite=\"builtin\")");
                }
                if self.tests.is_empty() {
                    bail!("config needs tests (or suite=\"builtin\")");
                }
                let mut names = HashSet::new();
                let mut subspaces = Vec::new();
                for s in &self.subspaces {
                    if !names.insert(s.name.as_str()) {
                        bail!("duplicate subspace name {:?}", s.name);
                    }
                    let mode = parse_subspace_mode(&s.mode)
                        .with_context(|| format!("subspace {:?}", s.name))?;
                    if s.lists.is_empty() {
                        bail!("subspace {:?} has no word lists", s.name);
                    }
                    if mode == SubspaceMode::Single && s.lists.len() != 1 {
                        bail!(
                            "subspace {:?}: mode single takes exactly one list, got {}",
                            s.name,
                            s.lists.len()
                        );
                    }
                    let mut lists = Vec::new();
                    for path in &s.lists {
                        lists.push(load_wordlist(path).with_context(|| {
                            format!("subspace {:?}, list {}", s.name, path.display())
                        })?);
                        input_files.push(path.clone());
                    }
                    let spec = BiasSubspaceSpec {
                        name: s.name.clone(),
                        mode,
                        lists,
                        alpha,
                    };
                    spec.validate()
                        .with_context(|| format!("subspace {:?}", s.name))?;
                    subspaces.push(spec);
                }

                let mut test_names = HashSet::new();
                let mut tests = Vec::new();
                for t in &self.tests {
                    if !test_names.insert(t.name.as_str()) {
                        bail!("duplicate test name {:?}", t.name);
                    }
                    let mut load = |path: &PathBuf| -> Result<debias_core::bias::WordList> {
                        input_files.push(path.clone());
                        load_wordlist(path)
                            .with_context(|| format!("test {:?}, list {}", t.name, path.display()))
                    };
                    let test =
                        WeatTest::new(&t.name, load(&t.x)?, load(&t.y)?, load(&t.a)?, load(&t.b)?)
                            .with_context(|| format!("test {:?}", t.name))?;
                    tests.push(test);
                }
                vec![SuiteBlock {
                    domain: "custom".to_string(),
                    subspaces,
                    tests,
                }]
            }
        };

        let definitional_pairs = match &self.definitional_pairs {
            Some(path) => {
                input_files.push(path.clone());
                debias_core::baselines::load_definitional_pairs(path)
                    .with_context(|| format!("definitional pairs {}", path.display()))?
            }
            None => debias_core::baselines::bundled_definitional_pairs(),
        };
        let mu_components = self.mu_components.unwrap_or(1);
        if mu_components == 0 {
            bail!("mu_components must be at least 1");
        }

        Ok(GridPlan {
            embeddings: self.embeddings,
            blocks,
            methods,
            alpha,
            seed,
            permutations,
            statistic,
            universe,
            mu_components,
            definitional_pairs,
            normalize: self.normalize.unwrap_or(global.normalize),
            center: self.center.unwrap_or(global.center),
            lowercase_fallback: self.lowercase_fallback.unwrap_or(global.lowercase_fallback),
            input_files,
        })
    }
}
