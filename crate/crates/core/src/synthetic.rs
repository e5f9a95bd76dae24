//! Deterministic synthetic embeddings with a planted bias direction.
//!
//! The generator draws a random unit direction `g` and builds a vocabulary
//! where the association-test words load on `g` (targets `X` and attributes
//! `A` positively, `Y` and `B` negatively), a dedicated subspace word list
//! loads on `g` more strongly, and everything else is isotropic noise. The
//! result is a self-contained end-to-end fixture: the test must show a
//! large effect size before debiasing and a collapsed one after, while
//! similarity among the neutral words — whose gold scores are their
//! original cosines — must survive.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::{Path, PathBuf};

use crate::bias::{WeatTest, WordList};
use crate::embedding::EmbeddingTable;
use crate::simeval::{SimilarityDataset, SimilarityRecord};
use crate::{Error, Result};

/// Shape and strength of a synthetic instance.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Embedding dimension.
    pub dimension: usize,
    /// Total vocabulary size.
    pub vocabulary: usize,
    /// Words per association-test set (X, Y, A, B each).
    pub set_size: usize,
    /// Words in the bias-subspace list.
    pub subspace_size: usize,
    /// |loading| of test words on the planted direction.
    pub test_loading: f64,
    /// |loading| of subspace words on the planted direction.
    pub subspace_loading: f64,
    /// Standard deviation of the isotropic noise added to every word.
    pub noise_sigma: f64,
    /// Number of neutral similarity pairs (each word used once).
    pub similarity_pairs: usize,
    /// Seed for the generator; equal seeds give bit-identical instances.
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            dimension: 50,
            vocabulary: 300,
            set_size: 8,
            subspace_size: 40,
            test_loading: 0.8,
            subspace_loading: 2.4,
            noise_sigma: 0.1,
            similarity_pairs: 40,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidParameter {
                message: "synthetic dimension must be at least 2".into(),
            });
        }
        if self.set_size == 0 || self.subspace_size == 0 {
            return Err(Error::InvalidParameter {
                message: "synthetic set sizes must be positive".into(),
            });
        }
        if self.similarity_pairs < 2 {
            return Err(Error::InvalidParameter {
                message: "need at least 2 similarity pairs".into(),
            });
        }
        let needed = 4 * self.set_size + self.subspace_size + 2 * self.similarity_pairs;
        if self.vocabulary < needed {
            return Err(Error::InvalidParameter {
                message: format!(
                    "vocabulary {} too small: need at least {needed} words",
                    self.vocabulary
                ),
            });
        }
        for (name, v) in [
            ("test_loading", self.test_loading),
            ("subspace_loading", self.subspace_loading),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter {
                    message: format!("synthetic {name} must be finite and non-negative"),
                });
            }
        }
        Ok(())
    }
}

/// A generated instance: table plus everything needed to evaluate it.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub table: EmbeddingTable,
    pub test: WeatTest,
    pub subspace: WordList,
    pub similarity: SimilarityDataset,
    /// The planted unit direction.
    pub direction: DVector<f64>,
}

/// Paths produced by [`SyntheticInstance::write_files`].
#[derive(Debug, Clone)]
pub struct SyntheticPaths {
    pub embeddings: PathBuf,
    pub subspace: PathBuf,
    pub x: PathBuf,
    pub y: PathBuf,
    pub a: PathBuf,
    pub b: PathBuf,
    pub similarity: PathBuf,
}

/// Generate a deterministic planted-bias instance.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticInstance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.dimension;

    let mut direction = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
    let norm = direction.norm();
    if norm == 0.0 {
        // Astronomically unlikely, but the unit direction must exist.
        direction[0] = 1.0;
    } else {
        direction /= norm;
    }

    let mut table = EmbeddingTable::new(d);
    let sample = |loading: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let noise: f64 = StandardNormal.sample(rng);
                loading * direction[i] + config.noise_sigma * noise
            })
            .collect()
    };

    let names = |prefix: &str, count: usize| -> Vec<String> {
        (0..count).map(|i| format!("{prefix}{i:04}")).collect()
    };
    let x_names = names("x", config.set_size);
    let y_names = names("y", config.set_size);
    let a_names = names("a", config.set_size);
    let b_names = names("b", config.set_size);
    let s_names = names("s", config.subspace_size);
    let filler = config.vocabulary - 4 * config.set_size - config.subspace_size;
    let n_names = names("n", filler);

    for n in &x_names {
        let v = sample(config.test_loading, &mut rng);
        table.insert(n, v)?;
    }
    for n in &y_names {
        let v = sample(-config.test_loading, &mut rng);
        table.insert(n, v)?;
    }
    for n in &a_names {
        let v = sample(config.test_loading, &mut rng);
        table.insert(n, v)?;
    }
    for n in &b_names {
        let v = sample(-config.test_loading, &mut rng);
        table.insert(n, v)?;
    }
    // Subspace words: first half positive, second half negative loading.
    for (i, n) in s_names.iter().enumerate() {
        let sign = if i < config.subspace_size / 2 {
            1.0
        } else {
            -1.0
        };
        let v = sample(sign * config.subspace_loading, &mut rng);
        table.insert(n, v)?;
    }
    for n in &n_names {
        let v = sample(0.0, &mut rng);
        table.insert(n, v)?;
    }

    let test = WeatTest::new(
        "planted",
        WordList::from_words("x", x_names.iter().map(String::as_str))?,
        WordList::from_words("y", y_names.iter().map(String::as_str))?,
        WordList::from_words("a", a_names.iter().map(String::as_str))?,
        WordList::from_words("b", b_names.iter().map(String::as_str))?,
    )?;
    let subspace = WordList::from_words("planted_subspace", s_names.iter().map(String::as_str))?;

    // Gold similarity scores are the original cosines (×10): an evaluation
    // on the untouched table scores exactly 100.
    let cos = |a: &str, b: &str| -> f64 {
        let va = DVector::from_column_slice(table.get(a).unwrap());
        let vb = DVector::from_column_slice(table.get(b).unwrap());
        va.dot(&vb) / (va.norm() * vb.norm())
    };
    let records: Vec<SimilarityRecord> = (0..config.similarity_pairs)
        .map(|i| {
            let w1 = &n_names[2 * i];
            let w2 = &n_names[2 * i + 1];
            SimilarityRecord {
                word1: w1.clone(),
                word2: w2.clone(),
                score: cos(w1, w2) * 10.0,
            }
        })
        .collect();
    let similarity = SimilarityDataset::new("planted_neutral", records)?;

    Ok(SyntheticInstance {
        table,
        test,
        subspace,
        similarity,
        direction,
    })
}

fn write_wordlist(path: &Path, list: &WordList) -> Result<()> {
    let mut text = String::new();
    for w in list.words() {
        text.push_str(w);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl SyntheticInstance {
    /// Write the instance to a directory as plain files: the embedding
    /// table, one word list per test set, the subspace list, and the
    /// similarity dataset. Returns the paths.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<SyntheticPaths> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SyntheticPaths {
            embeddings: dir.join("embeddings.txt"),
            subspace: dir.join("subspace.txt"),
            x: dir.join("x.txt"),
            y: dir.join("y.txt"),
            a: dir.join("a.txt"),
            b: dir.join("b.txt"),
            similarity: dir.join("similarity.tsv"),
        };
        crate::embedding::save_table(&self.table, &paths.embeddings)?;
        write_wordlist(&paths.subspace, &self.subspace)?;
        write_wordlist(&paths.x, self.test.x())?;
        write_wordlist(&paths.y, self.test.y())?;
        write_wordlist(&paths.a, self.test.a())?;
        write_wordlist(&paths.b, self.test.b())?;
        self.similarity.save(&paths.similarity)?;
        Ok(paths)
    }
}
