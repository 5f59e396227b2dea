use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnnotateError;

/// Lowercase, split on non-alphanumerics, drop tokens shorter than two chars.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_string)
        .collect()
}

/// Vocabulary indices follow sorted token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: BTreeMap<String, usize>,
    /// `idf[i]` belongs to the token with index `i`; always ≥ 1.
    pub idf: Vec<f64>,
    pub doc_count: usize,
}

impl TfidfModel {
    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Result<Self, AnnotateError> {
        if corpus.is_empty() {
            return Err(AnnotateError::EmptyCorpus);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let distinct: BTreeSet<String> = tokenize(doc.as_ref()).into_iter().collect();
            for t in distinct {
                *df.entry(t).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(AnnotateError::EmptyVocabulary);
        }
        let n = corpus.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (token, count)) in df.into_iter().enumerate() {
            vocabulary.insert(token, i);
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
        }
        Ok(TfidfModel {
            vocabulary,
            idf,
            doc_count: corpus.len(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.idf.len()
    }

    /// Raw term counts times idf, L2-normalized. Out-of-vocabulary tokens
    /// are ignored, so the result is the zero vector when none are known.
    pub fn transform(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension()];
        for t in tokenize(text) {
            if let Some(&i) = self.vocabulary.get(&t) {
                v[i] += 1.0;
            }
        }
        for (x, w) in v.iter_mut().zip(&self.idf) {
            *x *= w;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub(crate) fn validate(&self) -> Result<(), AnnotateError> {
        let n = self.vocabulary.len();
        let indices: BTreeSet<usize> = self.vocabulary.values().copied().collect();
        if self.idf.len() != n || indices.len() != n || indices.iter().next_back().is_some_and(|&m| m != n - 1) {
            return Err(AnnotateError::Model("vocabulary indices are not a bijection onto the idf table".into()));
        }
        if self.idf.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(AnnotateError::Model("idf values must be finite and positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_policy() {
        assert_eq!(tokenize("B-737 at KLAX, a go-around!"), ["737", "at", "klax", "go", "around"]);
        assert!(tokenize("a b c -").is_empty());
    }

    #[test]
    fn empty_inputs_fail() {
        assert!(matches!(TfidfModel::fit::<&str>(&[]), Err(AnnotateError::EmptyCorpus)));
        assert!(matches!(TfidfModel::fit(&["a", "!"]), Err(AnnotateError::EmptyVocabulary)));
    }

    #[test]
    fn indices_are_dense_and_sorted() {
        let m = TfidfModel::fit(&["zulu alpha", "mike"]).unwrap();
        assert_eq!(m.vocabulary.iter().map(|(_, &i)| i).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(m.vocabulary["alpha"], 0);
        m.validate().unwrap();
        assert!(m.transform("unknown words").iter().all(|x| *x == 0.0));
    }
}
