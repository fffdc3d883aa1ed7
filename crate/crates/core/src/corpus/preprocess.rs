use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::porter;
use super::CorpusError;

const BUILTIN_STOPWORDS: &str = include_str!("stopwords.txt");

#[derive(Debug, Clone, Default)]
pub struct PreprocessConfig {
    /// Newline-separated replacement stopword list; the built-in list when `None`.
    pub stopwords_path: Option<PathBuf>,
}

/// The single text normalization pipeline shared by comments, dimension
/// seeds and anything else matched against the embedding vocabulary.
///
/// lowercase -> split on non-alphanumeric -> drop pure-digit tokens ->
/// drop stopwords -> Porter stem (to a fixpoint) -> drop stems that are stopwords.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    stopwords: HashSet<String>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor::with_stopwords(parse_list(BUILTIN_STOPWORDS))
    }
}

fn parse_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

impl Preprocessor {
    pub fn new(config: &PreprocessConfig) -> Result<Self, CorpusError> {
        match &config.stopwords_path {
            None => Ok(Preprocessor::default()),
            Some(path) => Self::from_stopword_file(path),
        }
    }

    pub fn from_stopword_file(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Ok(Preprocessor::with_stopwords(parse_list(&text)))
    }

    pub fn with_stopwords(stopwords: HashSet<String>) -> Self {
        Preprocessor { stopwords }
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term)
    }

    pub fn preprocess(&self, text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .filter(|t| !t.chars().all(|c| c.is_numeric()))
            .filter(|t| !self.stopwords.contains(*t))
            .map(stem_fixpoint)
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }
}

/// Porter is not idempotent on its own output ("agreed" -> "agre" -> "agr"),
/// so stemming repeats until the term is stable.
fn stem_fixpoint(token: &str) -> String {
    let mut current = porter::stem(token);
    loop {
        let next = porter::stem(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}
