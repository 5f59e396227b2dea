use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::graphstore::GraphSchema;

use super::context::ConversationContext;
use super::TranslateError;

const BUNDLED_FEW_SHOTS: &str = include_str!("../../data/fewshot.toml");

pub const MIN_FEW_SHOTS: usize = 3;
pub const DEFAULT_MAX_PROMPT_CHARS: usize = 12_000;
pub const EMPTY_CONTEXT_MARKER: &str = "(no prior turns)";

pub const DEFAULT_PREAMBLE: &str = "You translate questions about aviation accident records into one read-only \
Cypher query over the graph schema below. Use only the listed labels, relationship types and properties. \
Supported clauses: MATCH, WHERE, RETURN [DISTINCT], ORDER BY, SKIP, LIMIT and the aggregates count, sum, avg, \
min and max. Reply with the query only.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub intent: String,
    pub question: String,
    pub cypher: String,
}

#[derive(Deserialize)]
struct FewShotFile {
    pair: Vec<FewShot>,
}

/// `[[pair]]` tables with `intent`, `question` and `cypher` keys.
pub fn parse_few_shots(text: &str) -> Result<Vec<FewShot>, TranslateError> {
    let f: FewShotFile = toml::from_str(text).map_err(|e| TranslateError::Corpus(e.to_string()))?;
    Ok(f.pair)
}

/// The shipped corpus of twelve pairs.
pub fn bundled_few_shots() -> Vec<FewShot> {
    parse_few_shots(BUNDLED_FEW_SHOTS).expect("bundled few-shot corpus parses")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub preamble: String,
    pub few_shots: Vec<FewShot>,
    /// Prompts longer than this drop context turns, oldest first, then
    /// few-shot pairs from the end down to [`MIN_FEW_SHOTS`].
    pub max_chars: usize,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            preamble: DEFAULT_PREAMBLE.to_string(),
            few_shots: bundled_few_shots(),
            max_chars: DEFAULT_MAX_PROMPT_CHARS,
        }
    }
}

/// Newest turn first; each turn lists its question, query and entities.
fn render_context(context: &ConversationContext, skip_oldest: usize) -> String {
    let turns = &context.turns[skip_oldest.min(context.turns.len())..];
    if turns.is_empty() {
        return format!("{EMPTY_CONTEXT_MARKER}\n");
    }
    let mut s = String::new();
    for t in turns.iter().rev() {
        let entities: Vec<String> = t.salient.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "- Question: {}", t.question);
        let _ = writeln!(s, "  Cypher: {}", t.query);
        let _ = writeln!(s, "  Entities: {}", entities.join("; "));
    }
    s
}

fn assemble(t: &PromptTemplate, schema: &str, shots: &[FewShot], context: &str, question: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### Instructions\n{}\n", t.preamble);
    let _ = writeln!(s, "### Schema\n{schema}");
    s.push_str("### Examples\n");
    for f in shots {
        let _ = writeln!(s, "Question: {}\nCypher: {}\n", f.question, f.cypher);
    }
    let _ = writeln!(s, "### Context\n{context}");
    let _ = write!(s, "### Question\n{question}\nCypher:");
    s
}

/// Deterministic prompt. The full schema is always present, and at least
/// [`MIN_FEW_SHOTS`] examples when the template has that many.
pub fn build_prompt(template: &PromptTemplate, question: &str, schema: &GraphSchema, context: &ConversationContext) -> String {
    let schema = schema.render();
    let mut skip = 0;
    let mut shots = template.few_shots.len();
    loop {
        let ctx = render_context(context, skip);
        let p = assemble(template, &schema, &template.few_shots[..shots], &ctx, question);
        if p.len() <= template.max_chars {
            return p;
        }
        if skip < context.turns.len() {
            skip += 1;
        } else if shots > MIN_FEW_SHOTS {
            shots -= 1;
        } else {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::context::{SalientEntity, Turn};

    fn turn(i: usize) -> Turn {
        Turn {
            question: format!("question {i}"),
            query: "MATCH (x:Accident) RETURN x".into(),
            salient: vec![SalientEntity {
                label: "Accident".into(),
                property: None,
                value: None,
            }],
        }
    }

    #[test]
    fn bundled_corpus_has_twelve_pairs() {
        assert_eq!(bundled_few_shots().len(), 12);
    }

    #[test]
    fn oldest_turns_go_first_when_over_budget() {
        let mut ctx = ConversationContext::new("s");
        ctx.turns = (0..5).map(turn).collect();
        let schema = GraphSchema::aviation();
        let full = build_prompt(&PromptTemplate::default(), "q", &schema, &ctx);
        assert!(full.find("question 4").unwrap() < full.find("question 0").unwrap());
        let tight = PromptTemplate {
            max_chars: full.len() - 10,
            ..PromptTemplate::default()
        };
        let p = build_prompt(&tight, "q", &schema, &ctx);
        assert!(!p.contains("question 0") && p.contains("question 1"));
        let tiny = PromptTemplate {
            max_chars: 10,
            ..PromptTemplate::default()
        };
        let p = build_prompt(&tiny, "q", &schema, &ctx);
        assert!(p.contains(EMPTY_CONTEXT_MARKER));
        assert_eq!(p.matches("\nCypher: ").count(), MIN_FEW_SHOTS);
        assert!(p.contains(&schema.render()));
    }
}
