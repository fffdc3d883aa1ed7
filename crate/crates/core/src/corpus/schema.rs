use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Contextual aspect. Order fixes the feature slots f9..f12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Duration,
    Season,
    Group,
    Type,
}

impl Aspect {
    pub const ALL: [Aspect; 4] = [Aspect::Duration, Aspect::Season, Aspect::Group, Aspect::Type];

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::Duration => "duration",
            Aspect::Season => "season",
            Aspect::Group => "group",
            Aspect::Type => "type",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aspect {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "duration" => Ok(Aspect::Duration),
            "season" => Ok(Aspect::Season),
            "group" => Ok(Aspect::Group),
            "type" => Ok(Aspect::Type),
            _ => Err(CorpusError::UnknownAspect(s.to_string())),
        }
    }
}

/// Legal dimensions per aspect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSchema {
    aspects: BTreeMap<Aspect, Vec<String>>,
}

impl Default for ContextSchema {
    fn default() -> Self {
        let mut aspects = BTreeMap::new();
        aspects.insert(
            Aspect::Duration,
            vec!["day time".into(), "night time".into(), "weekend".into()],
        );
        aspects.insert(
            Aspect::Season,
            vec!["spring".into(), "summer".into(), "autumn".into(), "winter".into()],
        );
        aspects.insert(
            Aspect::Group,
            vec!["alone".into(), "friends".into(), "family".into()],
        );
        aspects.insert(Aspect::Type, vec!["business".into(), "holiday".into()]);
        ContextSchema { aspects }
    }
}

/// Canonical spelling of a dimension name: lowercase, words separated by one space.
pub fn normalize_dimension(name: &str) -> String {
    name.to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

impl ContextSchema {
    pub fn empty() -> Self {
        ContextSchema {
            aspects: BTreeMap::new(),
        }
    }

    /// Replace the dimension list of one aspect.
    pub fn with_dimensions<I, S>(mut self, aspect: Aspect, dims: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let dims = dims.into_iter().map(|d| normalize_dimension(d.as_ref())).collect();
        self.aspects.insert(aspect, dims);
        self
    }

    pub fn dimensions(&self, aspect: Aspect) -> &[String] {
        self.aspects.get(&aspect).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn aspects(&self) -> impl Iterator<Item = (Aspect, &[String])> {
        self.aspects.iter().map(|(a, d)| (*a, d.as_slice()))
    }

    /// The canonical dimension name if legal for `aspect`.
    pub fn resolve(&self, aspect: Aspect, dimension: &str) -> Result<String, CorpusError> {
        let norm = normalize_dimension(dimension);
        if self.dimensions(aspect).contains(&norm) {
            Ok(norm)
        } else {
            Err(CorpusError::IllegalDimension {
                aspect: aspect.to_string(),
                dimension: dimension.to_string(),
            })
        }
    }
}
