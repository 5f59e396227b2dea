use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::fallback::FallbackTranslator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    RemotePrimary,
    RemoteFallback,
    DeterministicStub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderDescriptor {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model: String,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Something that answers a chat-completion request with message text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, String>;
}

/// Chat-completion endpoint: posts `{model, messages, temperature: 0}` and
/// reads `choices[0].message.content`. Transport failures are retried up to
/// `retries` extra times; HTTP error statuses are not.
#[derive(Debug, Clone)]
pub struct HttpChat {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl ChatBackend for HttpChat {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let body = serde_json::json!({ "model": self.model, "messages": messages, "temperature": 0 });
        let mut last = String::new();
        for _ in 0..=self.retries {
            let mut req = agent.post(&self.endpoint);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| "response has no choices".to_string());
                }
                Err(ureq::Error::StatusCode(code)) => return Err(format!("HTTP status {code}")),
                Err(e) => last = e.to_string(),
            }
        }
        Err(last)
    }
}

pub struct RemoteProvider {
    pub descriptor: ProviderDescriptor,
    pub backend: Box<dyn ChatBackend>,
}

impl RemoteProvider {
    pub fn http(descriptor: ProviderDescriptor, api_key: Option<String>, retries: u32) -> Self {
        let backend = HttpChat {
            endpoint: descriptor.endpoint.clone(),
            model: descriptor.model.clone(),
            api_key,
            timeout: descriptor.timeout,
            retries,
        };
        RemoteProvider {
            descriptor,
            backend: Box::new(backend),
        }
    }
}

/// Remote providers tried in order, then the rule-based translator. The
/// chain cannot be built without the latter, so it always ends with it.
pub struct ProviderChain {
    pub remotes: Vec<RemoteProvider>,
    pub stub: FallbackTranslator,
}

impl ProviderChain {
    pub fn stub_only(stub: FallbackTranslator) -> Self {
        ProviderChain {
            remotes: Vec::new(),
            stub,
        }
    }

    pub fn new(remotes: Vec<RemoteProvider>, stub: FallbackTranslator) -> Self {
        ProviderChain { remotes, stub }
    }

    pub fn len(&self) -> usize {
        self.remotes.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn descriptors(&self) -> Vec<ProviderDescriptor> {
        let mut d: Vec<ProviderDescriptor> = self.remotes.iter().map(|r| r.descriptor.clone()).collect();
        d.push(ProviderDescriptor {
            kind: ProviderKind::DeterministicStub,
            endpoint: String::new(),
            model: "rules".into(),
            timeout: Duration::ZERO,
        });
        d
    }
}

/// The query inside a model reply: code fences and a leading label are
/// stripped, text before the first MATCH is dropped, and a trailing
/// semicolon is removed.
pub fn extract_query(reply: &str) -> Option<String> {
    let unfenced: String = reply
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let upper = unfenced.to_uppercase();
    let start = upper.find("MATCH")?;
    let q = unfenced[start..].trim().trim_end_matches(';').trim();
    (!q.is_empty()).then(|| q.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction() {
        assert_eq!(
            extract_query("Here you go:\n```cypher\nMATCH (n) RETURN n;\n```").as_deref(),
            Some("MATCH (n) RETURN n")
        );
        assert_eq!(extract_query("I cannot help with that."), None);
    }

    #[test]
    fn unreachable_endpoint_fails_fast() {
        let c = HttpChat {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            api_key: None,
            timeout: Duration::from_millis(200),
            retries: 1,
        };
        assert!(c.complete(&[]).is_err());
    }
}
