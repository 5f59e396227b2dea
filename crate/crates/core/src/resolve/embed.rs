use std::time::Duration;

use super::ResolveError;

/// Text embedding source. `embed` returns exactly `dimension()` components
/// with unit L2 norm.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ResolveError>;
}

pub const TRIGRAM_DIMENSION: usize = 256;

/// Hashed character-trigram term frequencies, L2-normalized.
///
/// Each window of three consecutive chars is hashed with 64-bit FNV-1a over
/// its UTF-8 bytes and counted in bucket `hash % dimension`. Texts shorter
/// than three chars contribute a single gram, the whole text.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl TrigramEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self::new(TRIGRAM_DIMENSION)
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn trigrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < 3 {
        return vec![text.to_string()];
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

impl EmbeddingProvider for TrigramEmbedder {
    fn name(&self) -> &str {
        "trigram"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ResolveError> {
        if text.is_empty() {
            return Err(ResolveError::EmptyText);
        }
        let mut v = vec![0.0; self.dimension];
        for g in trigrams(text) {
            v[(fnv1a(g.as_bytes()) % self.dimension as u64) as usize] += 1.0;
        }
        unit(v).ok_or(ResolveError::EmptyText)
    }
}

fn unit(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Dot product of two unit vectors, clamped to [-1, 1] against rounding.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
}

/// Remote embedding endpoint. Posts `{"model": name, "input": text}` and
/// accepts either `{"embedding": [...]}` or `{"data": [{"embedding": [...]}]}`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    pub url: String,
    pub model: String,
    pub dimension: usize,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> &str {
        &self.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ResolveError> {
        if text.is_empty() {
            return Err(ResolveError::EmptyText);
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut req = agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body: serde_json::Value = req
            .send_json(serde_json::json!({ "model": self.model, "input": text }))
            .and_then(|mut r| r.body_mut().read_json())
            .map_err(|e| ResolveError::Provider(e.to_string()))?;
        let raw = body
            .get("embedding")
            .or_else(|| body.pointer("/data/0/embedding"))
            .and_then(|v| v.as_array())
            .ok_or_else(|| ResolveError::Provider("response has no embedding array".into()))?;
        let v: Vec<f64> = raw
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| ResolveError::Provider("non-numeric component".into())))
            .collect::<Result<_, _>>()?;
        if v.len() != self.dimension {
            return Err(ResolveError::Provider(format!(
                "expected {} components, got {}",
                self.dimension,
                v.len()
            )));
        }
        unit(v).ok_or_else(|| ResolveError::Provider("zero vector".into()))
    }
}
