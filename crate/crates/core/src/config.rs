//! Engine configuration: similarity weights, caps, combinators, synonyms.
//!
//! Config files are TOML with three optional sections; unknown keys are
//! rejected. Command-line flags override file values.
//!
//! ```toml
//! [similarity]
//! theta_r = 0.5
//! predicate_weight = 0.7
//! structure_weight = 0.3
//! synonyms_file = "synonyms.txt"
//!
//! [engine]
//! enumeration_cap = 22
//! top_k = 10
//! likelihood = "max"
//! support_cap = 64
//! iteration_cap = 10000
//!
//! [compiler]
//! ground_universals = false
//! max_variants = 256
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::grounding::GroundingConfig;
use crate::scalar::{cmp_finite, from_f64, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Toml(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("synonyms line {line}: expected `a = b`, got `{text}`")]
    Synonyms { line: usize, text: String },
}

// ---------------------------------------------------------------------------
// Synonyms
// ---------------------------------------------------------------------------

/// Symmetric, transitive synonym groups over predicate and constant names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable {
    group_of: BTreeMap<String, usize>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut table = SynonymTable::new();
        for (a, b) in pairs {
            table.add(a.into(), b.into());
        }
        table
    }

    pub fn add(&mut self, a: String, b: String) {
        let next = self.group_of.len();
        let ga = *self.group_of.entry(a).or_insert(next);
        let next = self.group_of.len();
        let gb = *self.group_of.entry(b).or_insert(next);
        if ga != gb {
            // merge the two groups
            for g in self.group_of.values_mut() {
                if *g == gb {
                    *g = ga;
                }
            }
        }
    }

    pub fn is_synonym(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        match (self.group_of.get(a), self.group_of.get(b)) {
            (Some(ga), Some(gb)) => ga == gb,
            _ => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    /// Names grouped with `name`, excluding itself.
    pub fn synonyms_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> {
        let group = self.group_of.get(name).copied();
        self.group_of
            .iter()
            .filter(move |(k, g)| group == Some(**g) && k.as_str() != name)
            .map(|(k, _)| k.as_str())
    }
}

/// Parse a synonyms file: one `a = b` pair per line, `#` comments.
pub fn parse_synonyms(text: &str) -> Result<SynonymTable, ConfigError> {
    let mut table = SynonymTable::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '=');
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a.trim(), b.trim()),
            _ => {
                return Err(ConfigError::Synonyms {
                    line: idx + 1,
                    text: line.to_string(),
                })
            }
        };
        if a.is_empty() || b.is_empty() {
            return Err(ConfigError::Synonyms {
                line: idx + 1,
                text: line.to_string(),
            });
        }
        table.add(a.to_string(), b.to_string());
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Similarity
// ---------------------------------------------------------------------------

/// Which similarity the clustering and matching steps use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimilarityMetric {
    /// Exact-equality similarity: 1 for identical graphs, else 0.
    Equivalence,
    /// Weighted predicate-name + structure similarity.
    #[default]
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityConfig<S: Scalar> {
    /// Cluster/accept threshold in [0, 1].
    pub theta_r: S,
    pub predicate_weight: S,
    pub structure_weight: S,
    pub synonyms: SynonymTable,
}

impl<S: Scalar> Default for SimilarityConfig<S> {
    fn default() -> Self {
        SimilarityConfig {
            theta_r: from_f64(0.5),
            predicate_weight: from_f64(0.7),
            structure_weight: from_f64(0.3),
            synonyms: SynonymTable::new(),
        }
    }
}

impl<S: Scalar> SimilarityConfig<S> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.theta_r < S::zero() || self.theta_r > S::one() {
            return Err(ConfigError::Validation(format!(
                "theta_r {} outside [0, 1]",
                self.theta_r
            )));
        }
        if self.predicate_weight < S::zero() || self.structure_weight < S::zero() {
            return Err(ConfigError::Validation(
                "similarity weights must be non-negative".into(),
            ));
        }
        let total = self.predicate_weight + self.structure_weight;
        let one = S::one();
        let eps = from_f64::<S>(1e-9);
        if cmp_finite((total - one).abs(), eps) == std::cmp::Ordering::Greater {
            return Err(ConfigError::Validation(format!(
                "predicate_weight + structure_weight must be 1, got {total}"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// How per-match qualities combine into a world likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodCombinator {
    /// Best contributing match wins.
    #[default]
    Max,
    /// Average over contributing matches.
    Mean,
}

impl LikelihoodCombinator {
    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        match name {
            "max" => Ok(LikelihoodCombinator::Max),
            "mean" => Ok(LikelihoodCombinator::Mean),
            other => Err(ConfigError::Validation(format!(
                "unknown likelihood combinator `{other}` (expected max|mean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig<S: Scalar> {
    pub similarity: SimilarityConfig<S>,
    /// Refuse exact enumeration beyond this many ground atoms.
    pub enumeration_cap: usize,
    pub top_k: usize,
    pub likelihood: LikelihoodCombinator,
    pub support_cap: usize,
    pub iteration_cap: usize,
    /// Compiler scenario: ground body-only variables over the domain.
    pub ground_universals: bool,
    /// Cap on compiled query variants per input query.
    pub max_variants: usize,
}

impl<S: Scalar> Default for EngineConfig<S> {
    fn default() -> Self {
        EngineConfig {
            similarity: SimilarityConfig::default(),
            enumeration_cap: 22,
            top_k: 10,
            likelihood: LikelihoodCombinator::Max,
            support_cap: crate::grounding::DEFAULT_SUPPORT_CAP,
            iteration_cap: crate::grounding::DEFAULT_ITERATION_CAP,
            ground_universals: false,
            max_variants: 256,
        }
    }
}

impl<S: Scalar> EngineConfig<S> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.similarity.validate()?;
        if self.enumeration_cap == 0 || self.top_k == 0 || self.support_cap == 0 {
            return Err(ConfigError::Validation("caps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grounding(&self) -> GroundingConfig {
        GroundingConfig {
            support_cap: self.support_cap,
            iteration_cap: self.iteration_cap,
        }
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimilaritySection {
    theta_r: Option<f64>,
    predicate_weight: Option<f64>,
    structure_weight: Option<f64>,
    synonyms_file: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngineSection {
    enumeration_cap: Option<usize>,
    top_k: Option<usize>,
    likelihood: Option<String>,
    support_cap: Option<usize>,
    iteration_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompilerSection {
    ground_universals: Option<bool>,
    max_variants: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    similarity: SimilaritySection,
    #[serde(default)]
    engine: EngineSection,
    #[serde(default)]
    compiler: CompilerSection,
}

/// Parsed config file: everything except the synonyms table, plus the path
/// of the synonyms file the caller should load.
#[derive(Debug, Clone, Default)]
pub struct LoadedConfig<S: Scalar> {
    pub config: EngineConfig<S>,
    pub synonyms_file: Option<String>,
}

/// Apply a TOML config text on top of the defaults.
pub fn load_config<S: Scalar>(text: &str) -> Result<LoadedConfig<S>, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))?;
    let mut config = EngineConfig::<S>::default();
    if let Some(v) = file.similarity.theta_r {
        config.similarity.theta_r = from_f64(v);
    }
    if let Some(v) = file.similarity.predicate_weight {
        config.similarity.predicate_weight = from_f64(v);
    }
    if let Some(v) = file.similarity.structure_weight {
        config.similarity.structure_weight = from_f64(v);
    }
    if let Some(v) = file.engine.enumeration_cap {
        config.enumeration_cap = v;
    }
    if let Some(v) = file.engine.top_k {
        config.top_k = v;
    }
    if let Some(name) = file.engine.likelihood {
        config.likelihood = LikelihoodCombinator::from_name(&name)?;
    }
    if let Some(v) = file.engine.support_cap {
        config.support_cap = v;
    }
    if let Some(v) = file.engine.iteration_cap {
        config.iteration_cap = v;
    }
    if let Some(v) = file.compiler.ground_universals {
        config.ground_universals = v;
    }
    if let Some(v) = file.compiler.max_variants {
        config.max_variants = v;
    }
    config.validate()?;
    Ok(LoadedConfig {
        config,
        synonyms_file: file.similarity.synonyms_file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EngineConfig::<f64>::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = load_config::<f64>("[engine]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Toml(_)));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err = load_config::<f64>("[similarity]\npredicate_weight = 0.9\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)));
        load_config::<f64>("[similarity]\npredicate_weight = 0.6\nstructure_weight = 0.4\n")
            .unwrap();
    }

    #[test]
    fn synonym_groups_are_transitive() {
        let table = parse_synonyms("bornIn = birthPlace\nbirthPlace = placeOfBirth\n").unwrap();
        assert!(table.is_synonym("bornIn", "placeOfBirth"));
        assert!(table.is_synonym("placeOfBirth", "bornIn"));
        assert!(!table.is_synonym("bornIn", "deathPlace"));
    }

    #[test]
    fn bad_synonym_line_reports_position() {
        let err = parse_synonyms("a = b\nnot a pair\n").unwrap_err();
        assert_eq!(err, ConfigError::Synonyms { line: 2, text: "not a pair".into() });
    }

    #[test]
    fn combinator_names() {
        assert_eq!(
            LikelihoodCombinator::from_name("max").unwrap(),
            LikelihoodCombinator::Max
        );
        assert!(LikelihoodCombinator::from_name("median").is_err());
    }

    #[test]
    fn theta_r_range_checked() {
        let err = load_config::<f64>("[similarity]\ntheta_r = 1.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)));
    }
}
