use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use askg_core::cypher::{self, parse, Params};
use askg_core::graphstore::{GraphSchema, PropertyGraph};
use askg_core::translate::{
    ast_equivalent, build_prompt, bundled_few_shots, salient_of_text, update_context, validate, ChatBackend,
    ChatMessage, ConversationContext, FallbackTranslator, PromptTemplate, ProviderChain, ProviderDescriptor,
    ProviderKind, RemoteProvider, SalientEntity, TranslateError, TranslationSource, Translator, EMPTY_CONTEXT_MARKER,
};
use proptest::prelude::*;

fn schema() -> GraphSchema {
    GraphSchema::aviation()
}

fn offline() -> Translator {
    Translator::offline(FallbackTranslator::default())
}

fn fresh() -> ConversationContext {
    ConversationContext::new("test")
}

#[test]
fn every_corpus_question_reproduces_its_gold_query() {
    let t = offline();
    let shots = bundled_few_shots();
    assert_eq!(shots.len(), 12);
    for shot in shots {
        let gold = parse(&shot.cypher).unwrap_or_else(|e| panic!("gold for {:?} parses: {e}", shot.question));
        validate(&shot.cypher, &schema()).unwrap();
        let r = t.translate(&shot.question, &schema(), &fresh()).unwrap();
        assert!(ast_equivalent(&r.ast, &gold), "{}\n  got:  {}\n  gold: {}", shot.question, r.query, shot.cypher);
        assert_eq!(r.source, TranslationSource::Fallback);
        assert_eq!(r.attempts, 1);
    }
}

#[test]
fn boeing_737_example() {
    let r = offline().translate("Find Boeing 737 accidents", &schema(), &fresh()).unwrap();
    let want = parse("MATCH (a:Aircraft)-[:INVOLVED_IN]->(x:Accident) WHERE a.make = 'Boeing' AND a.model CONTAINS '737' RETURN x").unwrap();
    assert!(ast_equivalent(&r.ast, &want), "{}", r.query);
}

#[test]
fn top_two_at_klax_has_airport_make_and_limit() {
    let r = offline()
        .translate("Show top two accidents with Boeing flights at KLAX", &schema(), &fresh())
        .unwrap();
    assert!(r.query.contains("p.icao = 'KLAX'"), "{}", r.query);
    assert!(r.query.contains("a.make = 'Boeing'"), "{}", r.query);
    assert_eq!(r.ast.limit, Some(2));
    assert!(r.query.ends_with("LIMIT 2"));
}

#[test]
fn query_text_is_the_canonical_form_of_the_ast() {
    let r = offline().translate("How many fatal accidents happened in 2003?", &schema(), &fresh()).unwrap();
    assert_eq!(parse(&r.query).unwrap(), r.ast);
    assert_eq!(r.ast.to_string(), r.query);
}

#[test]
fn prompt_is_byte_stable_with_empty_context_marker() {
    let t = PromptTemplate::default();
    let a = build_prompt(&t, "Find Boeing 737 accidents", &schema(), &fresh());
    let b = build_prompt(&PromptTemplate::default(), "Find Boeing 737 accidents", &GraphSchema::aviation(), &fresh());
    assert_eq!(a, b);
    assert!(a.contains(EMPTY_CONTEXT_MARKER));
    assert!(a.contains("(:Aircraft)-[:MANUFACTURED_BY]->(:Manufacturer)"));
    assert!(a.matches("\nCypher: ").count() >= 3);
}

fn execute(query: &str) -> cypher::ResultSet {
    cypher::query(&PropertyGraph::new(), query, &Params::new()).unwrap()
}

#[test]
fn context_triple_appears_verbatim_in_the_prompt() {
    let t = offline();
    let r = t.translate("Find Boeing 737 accidents", &schema(), &fresh()).unwrap();
    let ctx = update_context(&fresh(), "Find Boeing 737 accidents", &r, &execute(&r.query));
    let boeing = SalientEntity {
        label: "Aircraft".into(),
        property: Some("make".into()),
        value: Some("Boeing".into()),
    };
    assert!(ctx.turns[0].salient.contains(&boeing));
    let p = build_prompt(&PromptTemplate::default(), "what about Airbus?", &schema(), &ctx);
    assert!(p.contains("(Aircraft, make, Boeing)"));
    assert!(!p.contains(EMPTY_CONTEXT_MARKER));
}

#[test]
fn sixth_turn_evicts_the_oldest() {
    let t = offline();
    let mut ctx = fresh();
    let questions = [
        "Find Boeing 737 accidents",
        "List accidents at KDEN",
        "Show accidents in TX",
        "How many accidents per year?",
        "Find Piper accidents between 2005 and 2010",
        "Which accidents occurred in Anchorage, AK?",
    ];
    for (i, q) in questions.iter().enumerate() {
        let r = t.translate(q, &schema(), &ctx).unwrap();
        ctx = update_context(&ctx, q, &r, &execute(&r.query));
        assert_eq!(ctx.turns.len(), (i + 1).min(5));
    }
    assert_eq!(ctx.turns[0].question, questions[1]);
    assert_eq!(ctx.turns[4].question, questions[5]);
}

#[test]
fn follow_up_substitutes_the_make() {
    let t = offline();
    let first = t.translate("Find Boeing 737 accidents", &schema(), &fresh()).unwrap();
    let ctx = update_context(&fresh(), "Find Boeing 737 accidents", &first, &execute(&first.query));
    let r = t.translate("what about Airbus?", &schema(), &ctx).unwrap();
    // The make family replaces the old make and the model that belonged to it.
    let want = parse("MATCH (a:Aircraft)-[:INVOLVED_IN]->(x:Accident) WHERE a.make = 'Airbus' RETURN x").unwrap();
    assert_eq!(r.ast, want, "{}", r.query);

    let at = t.translate("Show top two accidents with Boeing flights at KLAX", &schema(), &fresh()).unwrap();
    let ctx = update_context(&fresh(), "q", &at, &execute(&at.query));
    let r = t.translate("what about KDEN?", &schema(), &ctx).unwrap();
    let want = parse("MATCH (a:Aircraft)-[:INVOLVED_IN]->(x:Accident)-[:OCCURRED_AT]->(p:Airport) WHERE a.make = 'Boeing' AND p.icao = 'KDEN' RETURN x ORDER BY x.event_date DESC LIMIT 2").unwrap();
    assert_eq!(r.ast, want, "{}", r.query);
}

#[test]
fn follow_up_rewrites_inline_property_maps() {
    let t = offline();
    let mut ctx = fresh();
    let prior = "MATCH (a:Aircraft {make: 'Boeing', model: '737'})-[:INVOLVED_IN]->(x:Accident) RETURN x";
    ctx.turns.push(askg_core::translate::Turn {
        question: "q".into(),
        query: prior.into(),
        salient: salient_of_text(prior),
    });
    let r = t.translate("what about Airbus?", &schema(), &ctx).unwrap();
    let want = parse("MATCH (a:Aircraft)-[:INVOLVED_IN]->(x:Accident) WHERE a.make = 'Airbus' RETURN x").unwrap();
    assert_eq!(r.ast, want, "{}", r.query);
}

struct Scripted {
    replies: Vec<Result<String, String>>,
    calls: Arc<AtomicUsize>,
}

impl ChatBackend for Scripted {
    fn complete(&self, _: &[ChatMessage]) -> Result<String, String> {
        let i = self.calls.fetch_add(1, Ordering::SeqCst);
        self.replies[i.min(self.replies.len() - 1)].clone()
    }
}

fn remote(kind: ProviderKind, replies: Vec<Result<String, String>>) -> (RemoteProvider, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let p = RemoteProvider {
        descriptor: ProviderDescriptor {
            kind,
            endpoint: "scripted".into(),
            model: "m".into(),
            timeout: Duration::from_secs(1),
        },
        backend: Box::new(Scripted {
            replies,
            calls: calls.clone(),
        }),
    };
    (p, calls)
}

#[test]
fn malformed_remote_fails_over_to_the_stub() {
    let (p, calls) = remote(ProviderKind::RemotePrimary, vec![Ok("SELECT * FROM accidents".into())]);
    let t = Translator::new(PromptTemplate::default(), ProviderChain::new(vec![p], FallbackTranslator::default()));
    let r = t.translate("Find Boeing 737 accidents", &schema(), &fresh()).unwrap();
    assert_eq!(r.source, TranslationSource::Fallback);
    assert!(r.attempts >= 2);
    assert_eq!(r.attempts, 3);
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[test]
fn repair_round_uses_the_corrected_reply() {
    let (p, _) = remote(
        ProviderKind::RemotePrimary,
        vec![
            Ok("MATCH (x:Crash) RETURN x".into()),
            Ok("```cypher\nMATCH (x:Accident) WHERE x.event_year = 2003 RETURN count(x) AS accidents;\n```".into()),
        ],
    );
    let t = Translator::new(PromptTemplate::default(), ProviderChain::new(vec![p], FallbackTranslator::default()));
    let r = t.translate("How many accidents in 2003?", &schema(), &fresh()).unwrap();
    assert_eq!(r.source, TranslationSource::Repaired);
    assert_eq!(r.attempts, 2);
    assert_eq!(r.provider, ProviderKind::RemotePrimary);
}

#[test]
fn unreachable_primary_goes_to_the_secondary_without_repair() {
    let (a, a_calls) = remote(ProviderKind::RemotePrimary, vec![Err("connection refused".into())]);
    let (b, _) = remote(ProviderKind::RemoteFallback, vec![Ok("MATCH (x:Accident) RETURN x".into())]);
    let t = Translator::new(PromptTemplate::default(), ProviderChain::new(vec![a, b], FallbackTranslator::default()));
    let r = t.translate("list accidents", &schema(), &fresh()).unwrap();
    assert_eq!((r.source, r.provider, r.attempts), (TranslationSource::Llm, ProviderKind::RemoteFallback, 2));
    assert_eq!(a_calls.load(Ordering::SeqCst), 1);
}

#[test]
fn exhausted_chain_reports_every_provider() {
    let (a, _) = remote(ProviderKind::RemotePrimary, vec![Ok("no idea".into())]);
    let (b, _) = remote(ProviderKind::RemoteFallback, vec![Err("timeout".into())]);
    let t = Translator::new(PromptTemplate::default(), ProviderChain::new(vec![a, b], FallbackTranslator::default()));
    match t.translate("what is the meaning of life", &schema(), &fresh()) {
        Err(TranslateError::Untranslatable { diagnostics, .. }) => {
            let kinds: Vec<ProviderKind> = diagnostics.iter().map(|d| d.provider).collect();
            assert_eq!(
                kinds,
                [ProviderKind::RemotePrimary, ProviderKind::RemotePrimary, ProviderKind::RemoteFallback, ProviderKind::DeterministicStub]
            );
        }
        other => panic!("expected untranslatable, got {other:?}"),
    }
}

const MAKES: &[&str] = &["Boeing", "Airbus", "Cessna", "Piper", "Embraer", "Beech", "cirrus", "McDonnell Douglas"];
const MODELS: &[&str] = &["737", "A320", "172", "B737-800", "PA-28", "E175", "SR22"];
const AIRPORTS: &[&str] = &["KLAX", "KDEN", "KSEA", "PANC", "KORD"];
const PLACES: &[&str] = &["Anchorage, AK", "in TX", "in Texas", "in New York", "Denver, CO"];
const AIRLINES: &[&str] = &["Delta Air Lines", "Delta", "United Airlines", "SkyWest Airlines", "Southwest"];
const INJURIES: &[&str] = &["fatal", "serious injury", "minor", "non-fatal", "no injuries"];
const YEARS: &[&str] = &["in 2003", "since 2010", "before 1999", "after 2015", "between 2005 and 2010", "from 2012 to 2008"];
const LEADS: &[&str] = &["Find", "Show", "List", "How many", "Show top 3", "latest five", "Count", "Which", "top"];
const GROUPS: &[&str] = &["", "per year", "by manufacturer", "by state", "per airline", "by airport", "by model"];
const FOLLOWS: &[&str] = &["", "what about ", "how about ", "and for "];

fn pick(options: &'static [&'static str]) -> impl Strategy<Value = Option<&'static str>> {
    prop::option::of(prop::sample::select(options))
}

prop_compose! {
    fn question()(
        lead in prop::sample::select(LEADS),
        make in pick(MAKES),
        model in pick(MODELS),
        injury in pick(INJURIES),
        airport in pick(AIRPORTS),
        place in pick(PLACES),
        airline in pick(AIRLINES),
        year in pick(YEARS),
        group in prop::sample::select(GROUPS),
    ) -> String {
        let mut parts = vec![lead.to_string()];
        parts.extend(injury.map(str::to_string));
        parts.extend(make.map(str::to_string));
        parts.extend(model.map(str::to_string));
        parts.push("accidents".into());
        parts.extend(airport.map(|a| format!("at {a}")));
        parts.extend(place.map(str::to_string));
        parts.extend(airline.map(|a| format!("operated by {a}")));
        parts.extend(year.map(str::to_string));
        if !group.is_empty() {
            parts.push(group.to_string());
        }
        parts.join(" ")
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn grammar_outputs_parse_and_plan(q in question(), follow in prop::sample::select(FOLLOWS), prior in question()) {
        let t = offline();
        let s = schema();
        let r = t.translate(&prior, &s, &fresh()).unwrap();
        prop_assert!(validate(&r.query, &s).is_ok());
        prop_assert_eq!(parse(&r.query).unwrap(), r.ast.clone());
        prop_assert!(execute(&r.query).rows.is_empty());

        let ctx = update_context(&fresh(), &prior, &r, &execute(&r.query));
        let next = t.translate(&format!("{follow}{q}"), &s, &ctx).unwrap();
        prop_assert!(validate(&next.query, &s).is_ok(), "{}", next.query);
        prop_assert_eq!(parse(&next.query).unwrap(), next.ast);
    }

    #[test]
    fn stub_only_translation_is_pure(q in question(), prior in question()) {
        let s = schema();
        let a = offline();
        let r0 = a.translate(&prior, &s, &fresh()).unwrap();
        let ctx = update_context(&fresh(), &prior, &r0, &execute(&r0.query));
        let first = a.translate(&q, &s, &ctx).unwrap();
        let again = offline().translate(&q, &s, &ctx.clone()).unwrap();
        prop_assert_eq!(first, again);
    }

    #[test]
    fn update_context_never_mutates_prior_turns(qs in prop::collection::vec(question(), 1..9)) {
        let t = offline();
        let mut ctx = ConversationContext::with_bound("s", 3);
        for q in &qs {
            let r = t.translate(q, &schema(), &ctx).unwrap();
            let before = ctx.clone();
            let next = update_context(&ctx, q, &r, &execute(&r.query));
            prop_assert_eq!(&ctx, &before);
            prop_assert!(next.turns.len() <= 3);
            // Surviving turns are the previous ones, unchanged, shifted left.
            let kept = next.turns.len() - 1;
            prop_assert_eq!(&next.turns[..kept], &before.turns[before.turns.len() - kept..]);
            ctx = next;
        }
    }

    #[test]
    fn attempts_stay_within_twice_the_chain(n in 0usize..4, good_at in 0usize..9) {
        let remotes: Vec<RemoteProvider> = (0..n)
            .map(|i| {
                let reply = if i * 2 + 1 == good_at { "MATCH (x:Accident) RETURN x" } else { "garbage" };
                remote(ProviderKind::RemoteFallback, vec![Ok("garbage".into()), Ok(reply.into())]).0
            })
            .collect();
        let t = Translator::new(PromptTemplate::default(), ProviderChain::new(remotes, FallbackTranslator::default()));
        let r = t.translate("Find Boeing 737 accidents", &schema(), &fresh()).unwrap();
        prop_assert!(r.attempts as usize <= (n + 1) * 2);
    }
}
