//! Word-embedding store: loading text and word2vec-binary files, vector
//! arithmetic, cosine similarity and exact top-K neighbour search.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::ops::Deref;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },
    #[error("vector for term '{term}' has {found} components, expected {expected}")]
    VectorLength {
        term: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate term '{0}'")]
    DuplicateTerm(String),
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("non-finite component in vector for term '{0}'")]
    NonFinite(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

fn format_err(location: impl Into<String>, message: impl Into<String>) -> EmbeddingError {
    EmbeddingError::Format {
        location: location.into(),
        message: message.into(),
    }
}

/// On-disk embedding layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    #[default]
    Text,
    Binary,
}

impl FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "text" => Ok(EmbeddingFormat::Text),
            "binary" => Ok(EmbeddingFormat::Binary),
            other => Err(format!("unknown embedding format '{other}' (expected text|binary)")),
        }
    }
}

impl std::fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Text => "text",
            EmbeddingFormat::Binary => "binary",
        })
    }
}

/// Dense embedding vector. Always accumulated in f64.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Self {
        Vector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|x| x * factor).collect())
    }

    /// In-place `self += weight * other`.
    pub fn add_scaled(&mut self, other: &[f64], weight: f64) -> Result<()> {
        check_dims(self.0.len(), other.len())?;
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += weight * b;
        }
        Ok(())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(EmbeddingError::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Cosine similarity. Zero-norm inputs score 0; the result is clamped into [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    // sqrt(na) * sqrt(nb) keeps the product symmetric in (a, b)
    let c = dot / (na.sqrt() * nb.sqrt());
    Ok(c.clamp(-1.0, 1.0))
}

/// Component-wise weighted sum. An empty list yields the zero vector of `dim`.
pub fn vec_combine<'a, I>(dim: usize, terms: I) -> Result<Vector>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut out = Vector::zeros(dim);
    for (v, w) in terms {
        out.add_scaled(v, w)?;
    }
    Ok(out)
}

pub fn vec_sub(a: &[f64], b: &[f64]) -> Result<Vector> {
    check_dims(a.len(), b.len())?;
    Ok(Vector(a.iter().zip(b).map(|(x, y)| x - y).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarTerm {
    pub term: String,
    pub score: f64,
}

/// Descending score, then ascending term.
fn rank_order(a: &SimilarTerm, b: &SimilarTerm) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.term.cmp(&b.term))
}

/// Immutable term -> vector map of fixed dimension.
///
/// Term order from the source file is retained so that a loaded store can be
/// written back out byte-for-byte.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    terms: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
    binary_newlines: bool,
}

impl EmbeddingStore {
    /// Build a store from (term, vector) pairs, validating every invariant.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut builder = StoreBuilder::new(dim);
        for (term, v) in entries {
            let term = term.into();
            builder.push(term, &v)?;
        }
        Ok(builder.finish())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    /// Terms in file order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.terms
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), self.row(i)))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// The stored vector, or `None` for unknown (including empty) terms.
    pub fn vector_of(&self, term: &str) -> Option<&[f64]> {
        self.index.get(term).map(|&i| self.row(i))
    }

    /// A copy of this store with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> EmbeddingStore {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= factor;
        }
        out
    }

    /// Exact top-`k` neighbours of `query` by cosine, excluding `exclude`.
    ///
    /// Ties are broken by ascending term. A zero query returns no terms.
    pub fn similar_k(
        &self,
        query: &[f64],
        k: usize,
        exclude: &HashSet<String>,
    ) -> Result<Vec<SimilarTerm>> {
        check_dims(self.dim, query.len())?;
        if k == 0 || query.iter().all(|&x| x == 0.0) {
            return Ok(Vec::new());
        }
        let mut scored = Vec::with_capacity(self.terms.len());
        for (i, term) in self.terms.iter().enumerate() {
            if exclude.contains(term) {
                continue;
            }
            let score = cosine(query, self.row(i))?;
            scored.push(SimilarTerm {
                term: term.clone(),
                score,
            });
        }
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        Ok(scored)
    }

    pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        match format {
            EmbeddingFormat::Text => Self::read_text(reader),
            EmbeddingFormat::Binary => Self::read_binary(reader),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        match format {
            EmbeddingFormat::Text => self.write_text(&mut w, true)?,
            EmbeddingFormat::Binary => self.write_binary(&mut w)?,
        }
        w.flush()?;
        Ok(())
    }

    /// Parse the text format. A leading "<count> <dim>" header is optional;
    /// without it the dimension comes from the first entry.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut builder: Option<StoreBuilder> = None;
        let mut declared: Option<(usize, usize)> = None;
        let mut first = true;
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let term = fields.next().unwrap_or_default().to_string();
            let rest: Vec<&str> = fields.collect();
            if first {
                first = false;
                if let Some((count, dim)) = parse_header(&term, &rest) {
                    if dim == 0 {
                        return Err(format_err(format!("line {lineno}"), "dimension must be positive"));
                    }
                    declared = Some((count, dim));
                    builder = Some(StoreBuilder::new(dim));
                    continue;
                }
                if rest.is_empty() {
                    return Err(format_err(format!("line {lineno}"), "entry without vector components"));
                }
                builder = Some(StoreBuilder::new(rest.len()));
            }
            let b = builder.as_mut().expect("builder initialised on first line");
            if rest.len() != b.dim {
                return Err(EmbeddingError::VectorLength {
                    term,
                    expected: b.dim,
                    found: rest.len(),
                });
            }
            let mut values = Vec::with_capacity(rest.len());
            for tok in rest {
                let v: f64 = tok.parse().map_err(|_| {
                    format_err(format!("line {lineno}"), format!("cannot parse component '{tok}' of term '{term}'"))
                })?;
                values.push(v);
            }
            if let Some((count, _)) = declared {
                if b.terms.len() >= count {
                    return Err(format_err(
                        format!("line {lineno}"),
                        format!("header declares {count} terms but more are present"),
                    ));
                }
            }
            b.push(term, &values)?;
        }
        let builder = builder.ok_or_else(|| format_err("line 1", "empty embedding file"))?;
        if let Some((count, _)) = declared {
            if builder.terms.len() != count {
                return Err(format_err(
                    "end of file",
                    format!("header declares {count} terms but file holds {}", builder.terms.len()),
                ));
            }
        }
        Ok(builder.finish())
    }

    /// Parse the word2vec binary format: "<count> <dim>\n" then per entry the
    /// term, a space, `dim` little-endian f32 and an optional newline.
    pub fn read_binary<R: Read>(reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        let mut reader = reader;
        reader.read_to_end(&mut bytes)?;
        let header_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| format_err("offset 0", "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| format_err("offset 0", "header is not valid UTF-8"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match parts.as_slice() {
            [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
                (Ok(c), Ok(d)) if d > 0 => (c, d),
                _ => return Err(format_err("offset 0", format!("malformed header '{header}'"))),
            },
            _ => return Err(format_err("offset 0", format!("malformed header '{header}'"))),
        };
        let mut builder = StoreBuilder::new(dim);
        let mut pos = header_end + 1;
        let mut newlines = 0usize;
        for n in 0..count {
            let start = pos;
            let space = bytes[pos..]
                .iter()
                .position(|&b| b == b' ')
                .map(|p| pos + p)
                .ok_or_else(|| {
                    format_err(
                        format!("offset {start}"),
                        format!("header declares {count} terms but file holds {n}"),
                    )
                })?;
            let term = std::str::from_utf8(&bytes[start..space])
                .map_err(|_| format_err(format!("offset {start}"), "term is not valid UTF-8"))?
                .to_string();
            pos = space + 1;
            let need = dim * 4;
            if bytes.len() < pos + need {
                return Err(EmbeddingError::VectorLength {
                    term,
                    expected: dim,
                    found: (bytes.len() - pos) / 4,
                });
            }
            let values: Vec<f64> = bytes[pos..pos + need]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            pos += need;
            if pos < bytes.len() && bytes[pos] == b'\n' {
                pos += 1;
                newlines += 1;
            }
            builder.push(term, &values)?;
        }
        if pos != bytes.len() {
            return Err(format_err(
                format!("offset {pos}"),
                format!("trailing data after {count} declared terms"),
            ));
        }
        let mut store = builder.finish();
        store.binary_newlines = count == 0 || newlines == count;
        Ok(store)
    }

    pub fn write_text<W: Write>(&self, w: &mut W, header: bool) -> Result<()> {
        if header {
            writeln!(w, "{} {}", self.len(), self.dim)?;
        }
        for (term, v) in self.iter() {
            w.write_all(term.as_bytes())?;
            for x in v {
                write!(w, " {x}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Values are narrowed to f32; a store loaded from binary round-trips exactly.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (term, v) in self.iter() {
            w.write_all(term.as_bytes())?;
            w.write_all(b" ")?;
            for &x in v {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
            if self.binary_newlines {
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

fn parse_header(first: &str, rest: &[&str]) -> Option<(usize, usize)> {
    if rest.len() != 1 {
        return None;
    }
    let count = first.parse::<usize>().ok()?;
    let dim = rest[0].parse::<usize>().ok()?;
    Some((count, dim))
}

struct StoreBuilder {
    dim: usize,
    terms: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

impl StoreBuilder {
    fn new(dim: usize) -> Self {
        StoreBuilder {
            dim,
            terms: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn push(&mut self, term: String, values: &[f64]) -> Result<()> {
        if term.is_empty() || term.contains(char::is_whitespace) {
            return Err(EmbeddingError::InvalidTerm(format!("{term:?}")));
        }
        if values.len() != self.dim {
            return Err(EmbeddingError::VectorLength {
                term,
                expected: self.dim,
                found: values.len(),
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite(term));
        }
        if self.index.contains_key(&term) {
            return Err(EmbeddingError::DuplicateTerm(term));
        }
        self.index.insert(term.clone(), self.terms.len());
        self.terms.push(term);
        self.data.extend_from_slice(values);
        Ok(())
    }

    fn finish(self) -> EmbeddingStore {
        EmbeddingStore {
            dim: self.dim,
            terms: self.terms,
            data: self.data,
            index: self.index,
            binary_newlines: true,
        }
    }
}
