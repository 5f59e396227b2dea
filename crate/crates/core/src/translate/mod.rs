//! Natural-language questions to query text.
//!
//! Remote chat models are tried first, each with one repair attempt that
//! shows the model its validation error. The rule-based translator always
//! runs last, so a chain with no remotes still translates offline.

mod context;
mod fallback;
mod prompt;
mod provider;

pub use context::{
    salient_entities, salient_of_text, update_context, ConversationContext, SalientEntity, Turn,
    DEFAULT_CONTEXT_TURNS,
};
pub use fallback::{substitute, Constraint, FallbackTranslator, Frame, Group, Intent, LexKind, Lexicon, Slot};
pub use prompt::{
    build_prompt, bundled_few_shots, parse_few_shots, FewShot, PromptTemplate, DEFAULT_MAX_PROMPT_CHARS,
    DEFAULT_PREAMBLE, EMPTY_CONTEXT_MARKER, MIN_FEW_SHOTS,
};
pub use provider::{
    extract_query, ChatBackend, ChatMessage, HttpChat, ProviderChain, ProviderDescriptor, ProviderKind, RemoteProvider,
};

use serde::Serialize;

use crate::cypher::{parse, plan, BinOp, Expr, Query};
use crate::graphstore::GraphSchema;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub provider: ProviderKind,
    pub attempt: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranslateError {
    #[error("cannot translate {question:?}: {}", summary(.diagnostics))]
    Untranslatable {
        question: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("few-shot corpus: {0}")]
    Corpus(String),
}

fn summary(d: &[Diagnostic]) -> String {
    d.last().map_or_else(|| "no providers".to_string(), |d| d.error.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationSource {
    Llm,
    Fallback,
    Repaired,
}

/// A validated translation. `query` is the canonical rendering of `ast`, so
/// parsing it gives `ast` back.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationResult {
    pub query: String,
    #[serde(skip)]
    pub ast: Query,
    pub source: TranslationSource,
    /// Non-fatal planner warnings, such as a missing index.
    pub validation: Vec<String>,
    pub attempts: u32,
    pub provider: ProviderKind,
}

/// Planner warnings about labels, types or properties the schema lacks.
pub fn is_fatal_warning(w: &str) -> bool {
    w.starts_with("unknown")
}

/// Parses and plans `text`; returns the tree and the non-fatal warnings.
pub fn validate(text: &str, schema: &GraphSchema) -> Result<(Query, Vec<String>), String> {
    let ast = parse(text).map_err(|e| format!("syntax error: {e}"))?;
    let warnings = plan(&ast, schema).warnings;
    let (fatal, rest): (Vec<String>, Vec<String>) = warnings.into_iter().partition(|w| is_fatal_warning(w));
    if !fatal.is_empty() {
        return Err(format!("schema mismatch: {}", fatal.join("; ")));
    }
    Ok((ast, rest))
}

/// Inline property maps moved into WHERE and the conjuncts sorted, so two
/// queries differing only in filter placement or order compare equal.
fn normal_form(q: &Query) -> Query {
    let mut q = q.clone();
    let mut conjuncts: Vec<Expr> = q
        .where_clause
        .take()
        .map(|w| w.conjuncts().into_iter().cloned().collect())
        .unwrap_or_default();
    for p in q.patterns.iter_mut() {
        let nodes = std::iter::once(&mut p.start).chain(p.steps.iter_mut().map(|(_, n)| n));
        for n in nodes {
            if let Some(v) = n.variable.clone() {
                for (k, val) in n.properties.drain(..) {
                    conjuncts.push(Expr::bin(Expr::prop(&v, &k), BinOp::Eq, val));
                }
            }
        }
    }
    conjuncts.sort_by_cached_key(ToString::to_string);
    q.where_clause = Expr::conjoin(conjuncts);
    q
}

/// Equal up to the placement and order of conjunctive filters.
pub fn ast_equivalent(a: &Query, b: &Query) -> bool {
    normal_form(a) == normal_form(b)
}

fn repair_message(candidate: &str, error: &str) -> String {
    format!(
        "Your previous answer was:\n{candidate}\nIt was rejected: {error}\nReply with a corrected query that uses only the schema above."
    )
}

pub struct Translator {
    pub template: PromptTemplate,
    pub chain: ProviderChain,
}

impl Translator {
    pub fn new(template: PromptTemplate, chain: ProviderChain) -> Self {
        Translator { template, chain }
    }

    /// Offline translator: bundled prompt and the rule-based stub only.
    pub fn offline(stub: FallbackTranslator) -> Self {
        Translator::new(PromptTemplate::default(), ProviderChain::stub_only(stub))
    }

    /// Each remote gets one attempt plus one repair; the stub gets one. So
    /// `attempts` never exceeds twice the chain length.
    pub fn translate(
        &self,
        question: &str,
        schema: &GraphSchema,
        context: &ConversationContext,
    ) -> Result<TranslationResult, TranslateError> {
        let mut diagnostics = Vec::new();
        let mut attempts = 0u32;
        if !self.chain.remotes.is_empty() {
            let prompt = build_prompt(&self.template, question, schema, context);
            for remote in &self.chain.remotes {
                let kind = remote.descriptor.kind;
                let mut messages = vec![ChatMessage {
                    role: "user".into(),
                    content: prompt.clone(),
                }];
                for round in 0..2u32 {
                    attempts += 1;
                    let reply = match remote.backend.complete(&messages) {
                        Ok(r) => r,
                        Err(error) => {
                            // Nothing to repair when the endpoint never answered.
                            diagnostics.push(Diagnostic { provider: kind, attempt: round + 1, error });
                            break;
                        }
                    };
                    let checked = extract_query(&reply)
                        .ok_or_else(|| "reply contains no MATCH query".to_string())
                        .and_then(|c| validate(&c, schema));
                    match checked {
                        Ok((ast, validation)) => {
                            return Ok(TranslationResult {
                                query: ast.to_string(),
                                ast,
                                source: if round == 0 { TranslationSource::Llm } else { TranslationSource::Repaired },
                                validation,
                                attempts,
                                provider: kind,
                            });
                        }
                        Err(error) => {
                            messages.push(ChatMessage {
                                role: "assistant".into(),
                                content: reply.clone(),
                            });
                            messages.push(ChatMessage {
                                role: "user".into(),
                                content: repair_message(&reply, &error),
                            });
                            diagnostics.push(Diagnostic { provider: kind, attempt: round + 1, error });
                        }
                    }
                }
            }
        }
        attempts += 1;
        let stub = ProviderKind::DeterministicStub;
        let outcome = self
            .chain
            .stub
            .translate(question, schema, context)
            .and_then(|text| validate(&text, schema));
        match outcome {
            Ok((ast, validation)) => Ok(TranslationResult {
                query: ast.to_string(),
                ast,
                source: TranslationSource::Fallback,
                validation,
                attempts,
                provider: stub,
            }),
            Err(error) => {
                diagnostics.push(Diagnostic { provider: stub, attempt: 1, error });
                Err(TranslateError::Untranslatable {
                    question: question.to_string(),
                    diagnostics,
                })
            }
        }
    }
}
