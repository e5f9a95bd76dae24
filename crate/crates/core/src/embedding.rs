//! Word-embedding tables in the common text format.
//!
//! A table file holds one record per line: a token followed by its vector
//! components, all whitespace-separated. An optional leading header line
//! `count dimension` (as written by some tools) is auto-detected. Tables keep
//! insertion order, enforce unique tokens, a single dimension, and finite
//! values.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::{Error, Result};

/// How to treat the first line of an embedding text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Treat a first line of exactly two integers as a `count dimension`
    /// header, otherwise as data.
    #[default]
    Auto,
    /// The first line must be a `count dimension` header.
    Expect,
    /// The first line is data, never a header.
    None,
}

/// An ordered token → vector map with a fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    tokens: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
    metadata: String,
}

impl EmbeddingTable {
    /// Empty table of the given dimension.
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            ..Default::default()
        }
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Whether the table has no entries.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Vector dimension shared by every entry.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Free-form source metadata (semicolon-separated markers).
    pub fn metadata(&self) -> &str {
        &self.metadata
    }

    /// Replace the metadata string.
    pub fn set_metadata(&mut self, metadata: impl Into<String>) {
        self.metadata = metadata.into();
    }

    /// Whether the table is marked as holding token *instances* out of a
    /// contextual encoder rather than one vector per type.
    pub fn is_contextual(&self) -> bool {
        self.metadata.split(';').any(|t| t.trim() == "contextual")
    }

    /// Append an entry; the token must be new, the vector finite and of the
    /// table dimension.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
                context: format!("vector for token {token:?}"),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("vector for token {token:?}"),
            });
        }
        if self.index.contains_key(&token) {
            return Err(Error::DuplicateToken {
                token,
                path: "<memory>".into(),
                line: 0,
            });
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(&vector);
        Ok(())
    }

    /// Vector for an exact token, if present.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    /// Whether the exact token is present.
    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// `(token, vector)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), self.row(i)))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    /// New table with the same tokens and `f` applied to every vector.
    ///
    /// Rows are processed in parallel; the output order is the table order
    /// regardless of scheduling.
    pub fn map_vectors(&self, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> EmbeddingTable {
        let rows: Vec<Vec<f64>> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let out = f(self.row(i));
                debug_assert_eq!(out.len(), self.dimension);
                out
            })
            .collect();
        let mut data = Vec::with_capacity(self.data.len());
        for row in rows {
            data.extend_from_slice(&row);
        }
        EmbeddingTable {
            dimension: self.dimension,
            tokens: self.tokens.clone(),
            data,
            index: self.index.clone(),
            metadata: self.metadata.clone(),
        }
    }
}

/// A sequence of `(token, vector)` records where tokens may repeat — e.g.
/// per-occurrence vectors out of a contextual encoder.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenVectorStream {
    dimension: usize,
    records: Vec<(String, Vec<f64>)>,
}

impl TokenVectorStream {
    /// Empty stream of the given dimension.
    pub fn new(dimension: usize) -> Self {
        TokenVectorStream {
            dimension,
            records: Vec::new(),
        }
    }

    /// Vector dimension shared by every record.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of records (not distinct tokens).
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Whether the stream holds no records.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Append one record; the vector must be finite and of the stream dimension.
    pub fn push(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
                context: format!("record for token {token:?}"),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("record for token {token:?}"),
            });
        }
        self.records.push((token, vector));
        Ok(())
    }

    /// Records in stream order.
    pub fn records(&self) -> &[(String, Vec<f64>)] {
        &self.records
    }
}

/// Load an embedding table from a text file.
pub fn load_table(path: impl AsRef<Path>, header: HeaderMode) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let mut table = EmbeddingTable::new(0);
    let mut started = false;
    parse_lines(path, header, |line_no, token, vector| {
        if !started {
            table.dimension = vector.len();
            started = true;
        }
        if vector.len() != table.dimension {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "expected {} vector components, found {}",
                    table.dimension,
                    vector.len()
                ),
            ));
        }
        if table.index.contains_key(token) {
            return Err(Error::DuplicateToken {
                token: token.to_string(),
                path: path.to_path_buf(),
                line: line_no,
            });
        }
        table.index.insert(token.to_string(), table.tokens.len());
        table.tokens.push(token.to_string());
        table.data.extend_from_slice(&vector);
        Ok(())
    })?;
    Ok(table)
}

/// Load a token-instance stream from a text file (same format as a table,
/// but tokens may repeat).
pub fn load_stream(path: impl AsRef<Path>, header: HeaderMode) -> Result<TokenVectorStream> {
    let path = path.as_ref();
    let mut stream = TokenVectorStream::new(0);
    let mut started = false;
    parse_lines(path, header, |line_no, token, vector| {
        if !started {
            stream.dimension = vector.len();
            started = true;
        }
        if vector.len() != stream.dimension {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "expected {} vector components, found {}",
                    stream.dimension,
                    vector.len()
                ),
            ));
        }
        stream.records.push((token.to_string(), vector));
        Ok(())
    })?;
    Ok(stream)
}

/// Shared line parser for tables and streams. Calls `sink` with the 1-based
/// line number, token, and parsed vector of each data line.
fn parse_lines(
    path: &Path,
    header: HeaderMode,
    mut sink: impl FnMut(usize, &str, Vec<f64>) -> Result<()>,
) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut first_data_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue; // blank line
        }
        if !first_data_seen {
            let looks_like_header =
                fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok());
            match header {
                HeaderMode::Expect => {
                    if !looks_like_header {
                        return Err(Error::parse(
                            path,
                            line_no,
                            "expected a `count dimension` header line",
                        ));
                    }
                    first_data_seen = true; // consume header
                    continue;
                }
                HeaderMode::Auto if looks_like_header => {
                    log::debug!(
                        "{}: treating line 1 as a count/dimension header",
                        path.display()
                    );
                    first_data_seen = true;
                    continue;
                }
                _ => {}
            }
            first_data_seen = true;
        }
        if fields.len() < 2 {
            return Err(Error::parse(
                path,
                line_no,
                "expected a token followed by at least one vector component",
            ));
        }
        let token = fields[0];
        let mut vector = Vec::with_capacity(fields.len() - 1);
        for raw in &fields[1..] {
            let v: f64 = raw.parse().map_err(|_| {
                Error::parse(path, line_no, format!("cannot parse {raw:?} as a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("non-finite vector component {raw:?}"),
                ));
            }
            vector.push(v);
        }
        sink(line_no, token, vector)?;
    }
    Ok(())
}

/// Write a table in the same text format `load_table` reads (no header line).
///
/// Values are printed with the shortest decimal form that parses back to the
/// identical `f64`, so a save/load round trip reproduces the table exactly.
pub fn save_table(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for (token, vector) in table.iter() {
        line.clear();
        line.push_str(token);
        for v in vector {
            line.push(' ');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Unit-normalize every row; zero rows are left unchanged.
///
/// Returns the normalized table and the number of zero rows encountered (the
/// caller decides how loudly to warn).
pub fn normalize_rows(table: &EmbeddingTable) -> (EmbeddingTable, usize) {
    let zero_rows = table
        .iter()
        .filter(|(_, v)| v.iter().all(|&x| x == 0.0))
        .count();
    let out = table.map_vectors(|v| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v.to_vec()
        } else {
            v.iter().map(|x| x / norm).collect()
        }
    });
    if zero_rows > 0 {
        log::warn!("normalize_rows: {zero_rows} zero vector(s) left unchanged");
    }
    (out, zero_rows)
}

/// Subtract the mean vector of the whole table from every row.
///
/// Returns the centered table and the mean that was removed.
pub fn center_rows(table: &EmbeddingTable) -> (EmbeddingTable, Vec<f64>) {
    let d = table.dimension();
    let mut mean = vec![0.0f64; d];
    for (_, v) in table.iter() {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    if !table.is_empty() {
        let n = table.len() as f64;
        for m in mean.iter_mut() {
            *m /= n;
        }
    }
    let out = table.map_vectors(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect());
    (out, mean)
}

/// Collapse a token-instance stream to a table by averaging all vectors of
/// each distinct token. Output order is first occurrence.
pub fn average_tokens(stream: &TokenVectorStream) -> Result<EmbeddingTable> {
    if stream.is_empty() {
        return Err(Error::EmptyInput {
            context: "token stream has no records".into(),
        });
    }
    let d = stream.dimension();
    let mut order: Vec<&str> = Vec::new();
    let mut sums: HashMap<&str, (Vec<f64>, usize)> = HashMap::new();
    for (token, vector) in stream.records() {
        match sums.get_mut(token.as_str()) {
            Some((sum, count)) => {
                for (s, v) in sum.iter_mut().zip(vector) {
                    *s += v;
                }
                *count += 1;
            }
            None => {
                order.push(token);
                sums.insert(token, (vector.clone(), 1));
            }
        }
    }
    let mut table = EmbeddingTable::new(d);
    for token in order {
        let (sum, count) = &sums[token];
        let mean: Vec<f64> = sum.iter().map(|s| s / *count as f64).collect();
        table.insert(token, mean)?;
    }
    Ok(table)
}

/// Result of resolving a word list against a table.
#[derive(Debug, Clone)]
pub struct Subset {
    /// Column `j` is the vector of `resolved[j]`, shape `dimension × k`.
    pub matrix: DMatrix<f64>,
    /// `(requested, actual)` pairs for the words that resolved, in request
    /// order; `actual` differs from `requested` on a lowercase fallback hit.
    pub resolved: Vec<(String, String)>,
    /// Requested words that did not resolve.
    pub missing: Vec<String>,
}

/// Gather the vectors of `words` into a `dimension × k` matrix.
///
/// Lookup is verbatim first; with `lowercase_fallback`, a miss retries the
/// lowercased word. Errors only when *no* word resolves — partial coverage is
/// reported through [`Subset::missing`].
pub fn subset_matrix(
    table: &EmbeddingTable,
    words: &[String],
    lowercase_fallback: bool,
) -> Result<Subset> {
    let mut resolved: Vec<(String, String)> = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    let mut columns: Vec<&[f64]> = Vec::new();
    for word in words {
        let hit = match table.get(word) {
            Some(v) => Some((word.clone(), v)),
            None if lowercase_fallback => {
                let lower = word.to_lowercase();
                table.get(&lower).map(|v| (lower, v))
            }
            None => None,
        };
        match hit {
            Some((actual, v)) => {
                resolved.push((word.clone(), actual));
                columns.push(v);
            }
            None => missing.push(word.clone()),
        }
    }
    if columns.is_empty() {
        return Err(Error::NoWordsResolved {
            context: format!("{} word(s) requested", words.len()),
        });
    }
    let d = table.dimension();
    let matrix = DMatrix::from_fn(d, columns.len(), |r, c| columns[c][r]);
    Ok(Subset {
        matrix,
        resolved,
        missing,
    })
}
