//! Span classification into the aviation ontology with TF-IDF features and
//! multinomial logistic regression.

mod logreg;
mod tfidf;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use logreg::{loss_and_gradient, softmax, train_logreg, Hyperparams, LogRegModel};
pub use tfidf::{tokenize, TfidfModel};

const DEFAULT_ONTOLOGY: &str = include_str!("../../data/ontology.toml");
const SEED_CORPUS: &str = include_str!("../../data/annotate_seed.tsv");

/// Tag written into saved models; loading any other value fails.
pub const MODEL_FORMAT: &str = "askg-annotator/1";

#[derive(Debug, thiserror::Error)]
pub enum AnnotateError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no token survives tokenization")]
    EmptyVocabulary,
    #[error("text {0:?} has no tokens")]
    EmptyText(String),
    #[error("training needs at least two classes")]
    SingleClass,
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("training input: {0}")]
    Training(String),
    #[error("label {0:?} is not an ontology entity type")]
    UnknownLabel(String),
    #[error("invalid ontology: {0}")]
    Ontology(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("model format {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("corpus line {line}: {reason}")]
    Corpus { line: usize, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    /// Order doubles as the tie-break order for predictions.
    pub entity_types: Vec<String>,
    pub relationship_types: Vec<String>,
    pub version: String,
}

const REQUIRED_RELATIONSHIPS: [&str; 3] = ["AgencyInstrumentation", "PartWhole", "GeneralSpecification"];

impl Ontology {
    pub fn parse(text: &str) -> Result<Self, AnnotateError> {
        let o: Ontology = toml::from_str(text).map_err(|e| AnnotateError::Ontology(e.to_string()))?;
        o.validate()?;
        Ok(o)
    }

    fn validate(&self) -> Result<(), AnnotateError> {
        let mut seen = std::collections::BTreeSet::new();
        if self.entity_types.len() < 2 {
            return Err(AnnotateError::Ontology("at least two entity types are required".into()));
        }
        for t in &self.entity_types {
            if t.trim().is_empty() || !seen.insert(t) {
                return Err(AnnotateError::Ontology(format!("entity type {t:?} is empty or repeated")));
            }
        }
        for r in REQUIRED_RELATIONSHIPS {
            if !self.relationship_types.iter().any(|x| x == r) {
                return Err(AnnotateError::Ontology(format!("relationship type {r} is missing")));
            }
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t == label)
    }
}

impl Default for Ontology {
    fn default() -> Self {
        Ontology::parse(DEFAULT_ONTOLOGY).expect("bundled ontology parses")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub text: String,
    pub label: String,
    pub confidence: f64,
}

/// `text<TAB>label` lines; blank lines and `#` comments are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<(String, String)>, AnnotateError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (t, l) = line.split_once('\t').ok_or_else(|| AnnotateError::Corpus {
            line: i + 1,
            reason: "expected text<TAB>label".into(),
        })?;
        out.push((t.trim().to_string(), l.trim().to_string()));
    }
    Ok(out)
}

/// The checked-in labelled spans covering all seven entity types.
pub fn seed_corpus() -> Vec<(String, String)> {
    parse_corpus(SEED_CORPUS).expect("bundled corpus parses")
}

/// Ontology, vectorizer and classifier trained together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotator {
    pub format: String,
    pub ontology: Ontology,
    pub tfidf: TfidfModel,
    pub model: LogRegModel,
}

impl Annotator {
    /// Classes are the ontology entity types in ontology order; each must
    /// have at least one example.
    pub fn train(corpus: &[(String, String)], ontology: &Ontology, hp: Hyperparams) -> Result<Self, AnnotateError> {
        if corpus.is_empty() {
            return Err(AnnotateError::EmptyCorpus);
        }
        let mut y = Vec::with_capacity(corpus.len());
        for (_, label) in corpus {
            y.push(ontology.class_index(label).ok_or_else(|| AnnotateError::UnknownLabel(label.clone()))?);
        }
        let texts: Vec<&str> = corpus.iter().map(|(t, _)| t.as_str()).collect();
        let tfidf = TfidfModel::fit(&texts)?;
        let x: Vec<Vec<f64>> = texts.iter().map(|t| tfidf.transform(t)).collect();
        let model = train_logreg(&x, &y, &ontology.entity_types, hp)?;
        Ok(Annotator {
            format: MODEL_FORMAT.to_string(),
            ontology: ontology.clone(),
            tfidf,
            model,
        })
    }

    /// Class probabilities in ontology order.
    pub fn probabilities(&self, text: &str) -> Result<Vec<f64>, AnnotateError> {
        if tokenize(text).is_empty() {
            return Err(AnnotateError::EmptyText(text.to_string()));
        }
        Ok(self.model.probabilities(&self.tfidf.transform(text)))
    }

    /// Argmax class; ties go to the class listed first.
    pub fn predict_span(&self, text: &str) -> Result<LabeledSpan, AnnotateError> {
        let p = self.probabilities(text)?;
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        Ok(LabeledSpan {
            text: text.to_string(),
            label: self.model.classes[best].clone(),
            confidence: p[best].clamp(0.0, 1.0),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnotateError> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|source| AnnotateError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, AnnotateError> {
        let text = fs::read_to_string(path).map_err(|source| AnnotateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, AnnotateError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != MODEL_FORMAT {
            return Err(AnnotateError::VersionMismatch {
                found: header.format,
                expected: MODEL_FORMAT.to_string(),
            });
        }
        let a: Annotator = serde_json::from_str(text)?;
        a.tfidf.validate()?;
        if a.model.classes != a.ontology.entity_types
            || a.model.weights.len() != a.model.classes.len()
            || a.model.bias.len() != a.model.classes.len()
            || a.model.weights.iter().any(|r| r.len() != a.tfidf.dimension())
        {
            return Err(AnnotateError::Model("weight shape does not match classes and features".into()));
        }
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ontology_shape() {
        let o = Ontology::default();
        assert_eq!(o.entity_types.len(), 7);
        assert_eq!(o.relationship_types.len(), 5);
        assert_eq!(o.class_index("Agent"), Some(0));
    }

    #[test]
    fn ontology_requires_named_relationships() {
        let text = "version = \"x\"\nentity_types = [\"A\", \"B\"]\nrelationship_types = [\"PartWhole\"]\n";
        assert!(matches!(Ontology::parse(text), Err(AnnotateError::Ontology(_))));
    }

    #[test]
    fn seed_corpus_covers_every_type() {
        let o = Ontology::default();
        let c = seed_corpus();
        for t in &o.entity_types {
            assert!(c.iter().filter(|(_, l)| l == t).count() >= 10, "{t}");
        }
    }

    #[test]
    fn seed_model_memorizes_its_corpus() {
        let o = Ontology::default();
        let corpus = seed_corpus();
        let a = Annotator::train(&corpus, &o, Hyperparams::default()).unwrap();
        let hits = corpus
            .iter()
            .filter(|(t, l)| a.predict_span(t).unwrap().label == *l)
            .count();
        assert!(hits as f64 / corpus.len() as f64 >= 0.9, "{hits}/{}", corpus.len());
        assert!(matches!(a.predict_span("- ! ?"), Err(AnnotateError::EmptyText(_))));
    }

    #[test]
    fn saved_models_reload_and_reject_other_versions() {
        let o = Ontology::default();
        let a = Annotator::train(&seed_corpus(), &o, Hyperparams { max_epochs: 20, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        a.save(&p).unwrap();
        assert_eq!(Annotator::load(&p).unwrap(), a);
        let other = serde_json::to_string(&a).unwrap().replace(MODEL_FORMAT, "askg-annotator/0");
        assert!(matches!(Annotator::from_json(&other), Err(AnnotateError::VersionMismatch { .. })));
    }
}
