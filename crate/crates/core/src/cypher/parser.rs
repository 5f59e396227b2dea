//! Recursive-descent parser.
//!
//! ```text
//! query   := MATCH path (',' path)* [WHERE expr] RETURN [DISTINCT] item (',' item)*
//!            [ORDER BY sort (',' sort)*] [SKIP int] [LIMIT int]
//! path    := node (rel node)*
//! node    := '(' [var] [':' label] ['{' key ':' value (',' key ':' value)* '}'] ')'
//! rel     := ('-' | '<-') ['[' [var] [':' type] ['*' [int] ['..' [int]]] ']'] ('-' | '->')
//! expr    := and (OR and)*
//! and     := not (AND not)*
//! not     := NOT not | cmp
//! cmp     := atom [('=' | '<>' | '<' | '<=' | '>' | '>=' | CONTAINS | STARTS WITH) atom]
//! atom    := literal | param | '(' expr ')' | func '(' [DISTINCT] (expr | '*') ')' | var ['.' key]
//! ```

use std::collections::BTreeSet;

use super::ast::*;
use super::error::{CypherError, Pos};
use super::lexer::{tokenize, Tok, Token};

const RESERVED: &[&str] = &[
    "MATCH", "WHERE", "RETURN", "DISTINCT", "AS", "ORDER", "BY", "ASC", "ASCENDING", "DESC",
    "DESCENDING", "SKIP", "LIMIT", "AND", "OR", "NOT", "CONTAINS", "STARTS", "WITH", "TRUE",
    "FALSE", "NULL",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub hop_ceiling: u32,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            hop_ceiling: DEFAULT_HOP_CEILING,
        }
    }
}

/// Parses and semantically checks `text` with the default hop ceiling.
pub fn parse(text: &str) -> Result<Query, CypherError> {
    parse_with(text, ParseOptions::default())
}

pub fn parse_with(text: &str, options: ParseOptions) -> Result<Query, CypherError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        i: 0,
        expected: BTreeSet::new(),
        options,
    };
    let q = p.query()?;
    super::semantic::check(&q)?;
    Ok(q)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    expected: BTreeSet<String>,
    options: ParseOptions,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let j = (self.i + n).min(self.toks.len() - 1);
        &self.toks[j].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        self.expected.clear();
        t
    }

    fn error(&mut self, message: impl Into<String>) -> CypherError {
        CypherError::Parse {
            pos: self.pos(),
            message: message.into(),
            expected: std::mem::take(&mut self.expected).into_iter().collect(),
            found: self.peek().to_string(),
        }
    }

    fn unexpected(&mut self) -> CypherError {
        let found = self.peek().to_string();
        let exp: Vec<String> = self.expected.iter().cloned().collect();
        let msg = if exp.is_empty() {
            format!("unexpected {found}")
        } else {
            format!("expected {}, found {found}", exp.join(" or "))
        };
        self.error(msg)
    }

    fn check(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            true
        } else {
            self.expected.insert(format!("`{}`", t.symbol()));
            false
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.check(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), CypherError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn check_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw)) {
            true
        } else {
            self.expected.insert(kw.to_string());
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.check_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), CypherError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    /// Any word, including keywords (labels, property keys).
    fn name(&mut self, what: &str) -> Result<String, CypherError> {
        if let Tok::Word(w) = self.peek() {
            let w = w.clone();
            self.bump();
            Ok(w)
        } else {
            self.expected.insert(what.to_string());
            Err(self.unexpected())
        }
    }

    fn at_variable(&mut self) -> bool {
        match self.peek() {
            Tok::Word(w) if !is_reserved(w) => true,
            _ => {
                self.expected.insert("identifier".into());
                false
            }
        }
    }

    fn variable(&mut self) -> Result<String, CypherError> {
        if self.at_variable() {
            self.name("identifier")
        } else {
            Err(self.unexpected())
        }
    }

    fn query(&mut self) -> Result<Query, CypherError> {
        self.expect_kw("MATCH")?;
        let mut patterns = vec![self.path()?];
        while self.eat(&Tok::Comma) {
            patterns.push(self.path()?);
        }
        let where_clause = if self.eat_kw("WHERE") {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect_kw("RETURN")?;
        let distinct = self.eat_kw("DISTINCT");
        let mut returns = vec![self.return_item()?];
        while self.eat(&Tok::Comma) {
            returns.push(self.return_item()?);
        }
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_kw("DESC") || self.eat_kw("DESCENDING") {
                    true
                } else {
                    let _ = self.eat_kw("ASC") || self.eat_kw("ASCENDING");
                    false
                };
                order_by.push(SortItem { expr, descending });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let skip = if self.eat_kw("SKIP") {
            Some(self.count_literal()?)
        } else {
            None
        };
        let limit = if self.eat_kw("LIMIT") {
            Some(self.count_literal()?)
        } else {
            None
        };
        if *self.peek() != Tok::Eof {
            self.expected.insert("end of input".into());
            return Err(self.unexpected());
        }
        Ok(Query {
            patterns,
            where_clause,
            distinct,
            returns,
            order_by,
            skip,
            limit,
        })
    }

    fn count_literal(&mut self) -> Result<u64, CypherError> {
        if let Tok::Int(digits) = self.peek() {
            let digits = digits.clone();
            let v = digits
                .parse::<u64>()
                .map_err(|_| self.error("integer out of range"))?;
            self.bump();
            Ok(v)
        } else {
            self.expected.insert("non-negative integer".into());
            Err(self.unexpected())
        }
    }

    fn return_item(&mut self) -> Result<ReturnItem, CypherError> {
        let expr = self.expr()?;
        let alias = if self.eat_kw("AS") {
            Some(self.variable()?)
        } else {
            None
        };
        Ok(ReturnItem { expr, alias })
    }

    fn path(&mut self) -> Result<PathPattern, CypherError> {
        let start = self.node()?;
        let mut steps = Vec::new();
        loop {
            let at_rel = {
                let dash = self.check(&Tok::Dash);
                let lt = self.check(&Tok::Lt);
                dash || lt
            };
            if !at_rel {
                break;
            }
            let rel = self.rel()?;
            let node = self.node()?;
            steps.push((rel, node));
        }
        Ok(PathPattern { start, steps })
    }

    fn node(&mut self) -> Result<NodePattern, CypherError> {
        self.expect(&Tok::LParen)?;
        let mut n = NodePattern::default();
        if self.at_variable() {
            n.variable = Some(self.variable()?);
        }
        if self.eat(&Tok::Colon) {
            n.label = Some(self.name("label")?);
        }
        if self.check(&Tok::LBrace) {
            n.properties = self.property_map()?;
        }
        self.expect(&Tok::RParen)?;
        Ok(n)
    }

    fn property_map(&mut self) -> Result<Vec<(String, Expr)>, CypherError> {
        self.expect(&Tok::LBrace)?;
        let mut props: Vec<(String, Expr)> = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(props);
        }
        loop {
            let key = self.name("property key")?;
            if props.iter().any(|(k, _)| *k == key) {
                return Err(self.error(format!("duplicate property key `{key}` in map")));
            }
            self.expect(&Tok::Colon)?;
            let value = match self.peek().clone() {
                Tok::Param(p) => {
                    self.bump();
                    Expr::Param(p)
                }
                _ => Expr::Literal(self.literal()?),
            };
            props.push((key, value));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RBrace)?;
        Ok(props)
    }

    fn rel(&mut self) -> Result<RelPattern, CypherError> {
        let incoming = if self.eat(&Tok::Lt) {
            self.expect(&Tok::Dash)?;
            true
        } else {
            self.expect(&Tok::Dash)?;
            false
        };
        let mut rel = RelPattern {
            variable: None,
            rel_type: None,
            direction: RelDirection::Undirected,
            hops: None,
        };
        let var_pos = self.pos();
        if self.eat(&Tok::LBracket) {
            if self.at_variable() {
                rel.variable = Some(self.variable()?);
            }
            if self.eat(&Tok::Colon) {
                rel.rel_type = Some(self.name("relationship type")?);
            }
            if self.check(&Tok::Star) {
                rel.hops = Some(self.hop_range()?);
                if let Some(v) = &rel.variable {
                    return Err(CypherError::Parse {
                        pos: var_pos,
                        message: format!(
                            "variable `{v}` cannot be bound to a variable-length relationship"
                        ),
                        expected: Vec::new(),
                        found: format!("`{v}`"),
                    });
                }
            }
            self.expect(&Tok::RBracket)?;
        }
        self.expect(&Tok::Dash)?;
        let outgoing = self.eat(&Tok::Gt);
        rel.direction = match (incoming, outgoing) {
            (true, true) => return Err(self.error("relationship cannot point both ways")),
            (true, false) => RelDirection::In,
            (false, true) => RelDirection::Out,
            (false, false) => RelDirection::Undirected,
        };
        Ok(rel)
    }

    fn hop_bound(&mut self) -> Result<Option<u32>, CypherError> {
        if let Tok::Int(d) = self.peek() {
            let d = d.clone();
            let v = d.parse::<u32>().map_err(|_| self.error("hop bound out of range"))?;
            self.bump();
            Ok(Some(v))
        } else {
            self.expected.insert("integer".into());
            Ok(None)
        }
    }

    fn hop_range(&mut self) -> Result<HopRange, CypherError> {
        let start = self.pos();
        self.expect(&Tok::Star)?;
        let ceiling = self.options.hop_ceiling;
        let lo = self.hop_bound()?;
        let (min, max) = if self.eat(&Tok::DotDot) {
            let hi = self.hop_bound()?;
            (lo.unwrap_or(1), hi.unwrap_or(ceiling))
        } else {
            match lo {
                Some(n) => (n, n),
                None => (1, ceiling),
            }
        };
        if min < 1 || min > max || max > ceiling {
            return Err(CypherError::Parse {
                pos: start,
                message: format!(
                    "hop range {min}..{max} must satisfy 1 <= min <= max <= {ceiling}"
                ),
                expected: Vec::new(),
                found: "`*`".into(),
            });
        }
        Ok(HopRange { min, max })
    }

    fn literal(&mut self) -> Result<Literal, CypherError> {
        let negative = self.eat(&Tok::Dash);
        let lit = match self.peek().clone() {
            Tok::Int(d) => {
                let text = if negative { format!("-{d}") } else { d };
                let v = text
                    .parse::<i64>()
                    .map_err(|_| self.error("integer literal out of range"))?;
                self.bump();
                return Ok(Literal::Int(v));
            }
            Tok::Float(x) => {
                self.bump();
                Literal::Float(if negative { -x } else { x })
            }
            _ if negative => {
                self.expected.insert("number".into());
                return Err(self.unexpected());
            }
            Tok::Str(s) => {
                self.bump();
                Literal::Str(s)
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("true") => {
                self.bump();
                Literal::Bool(true)
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("false") => {
                self.bump();
                Literal::Bool(false)
            }
            _ => {
                self.expected.insert("literal".into());
                return Err(self.unexpected());
            }
        };
        Ok(lit)
    }

    fn expr(&mut self) -> Result<Expr, CypherError> {
        let mut e = self.and_expr()?;
        while self.eat_kw("OR") {
            let r = self.and_expr()?;
            e = Expr::Or(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, CypherError> {
        let mut e = self.not_expr()?;
        while self.eat_kw("AND") {
            let r = self.not_expr()?;
            e = Expr::And(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, CypherError> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, CypherError> {
        let left = self.atom()?;
        let op = match self.peek() {
            Tok::Eq => Some(BinOp::Eq),
            Tok::Ne => Some(BinOp::Ne),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Ge => Some(BinOp::Ge),
            _ => None,
        };
        let op = if let Some(op) = op {
            self.bump();
            op
        } else if self.eat_kw("CONTAINS") {
            BinOp::Contains
        } else if self.eat_kw("STARTS") {
            self.expect_kw("WITH")?;
            BinOp::StartsWith
        } else {
            for s in ["=", "<>", "<", "<=", ">", ">="] {
                self.expected.insert(format!("`{s}`"));
            }
            self.expected.insert("STARTS".into());
            return Ok(left);
        };
        let right = self.atom()?;
        Ok(Expr::Binary(Box::new(left), op, Box::new(right)))
    }

    fn atom(&mut self) -> Result<Expr, CypherError> {
        match self.peek().clone() {
            Tok::Param(p) => {
                self.bump();
                Ok(Expr::Param(p))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Int(_) | Tok::Float(_) | Tok::Str(_) | Tok::Dash => {
                Ok(Expr::Literal(self.literal()?))
            }
            Tok::Word(w)
                if w.eq_ignore_ascii_case("true") || w.eq_ignore_ascii_case("false") =>
            {
                Ok(Expr::Literal(self.literal()?))
            }
            Tok::Word(w) if *self.peek_at(1) == Tok::LParen && !is_reserved(&w) => {
                let Some(func) = AggFunc::from_name(&w) else {
                    return Err(self.error(format!("unknown function `{w}`")));
                };
                self.bump();
                self.bump();
                let distinct = self.eat_kw("DISTINCT");
                let arg = if self.check(&Tok::Star) {
                    if func != AggFunc::Count || distinct {
                        return Err(self.error("`*` is only valid in count(*)"));
                    }
                    self.bump();
                    None
                } else {
                    Some(Box::new(self.expr()?))
                };
                self.expect(&Tok::RParen)?;
                Ok(Expr::Agg {
                    func,
                    distinct,
                    arg,
                })
            }
            _ => {
                self.expected.insert("expression".into());
                let var = self.variable()?;
                if self.eat(&Tok::Dot) {
                    let key = self.name("property key")?;
                    Ok(Expr::Prop(var, key))
                } else {
                    Ok(Expr::Var(var))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boeing_737_shape() {
        let q = parse(
            "MATCH (a:Aircraft {make:'Boeing', model:'737'})-[:INVOLVED_IN]->(x:Accident) RETURN x",
        )
        .unwrap();
        assert_eq!(q.patterns.len(), 1);
        assert_eq!(q.patterns[0].node_count(), 2);
        assert_eq!(q.patterns[0].steps[0].0.direction, RelDirection::Out);
        assert_eq!(q.patterns[0].start.properties.len(), 2);
    }

    #[test]
    fn minimal_query() {
        let q = parse("match (n) return n").unwrap();
        assert_eq!(q.returns[0].expr, Expr::Var("n".into()));
        assert_eq!(q.patterns[0].start.label, None);
    }

    #[test]
    fn hop_range_and_count() {
        let q = parse("MATCH (a)-[:X*2..4]->(b) RETURN count(b)").unwrap();
        let rel = &q.patterns[0].steps[0].0;
        assert_eq!(rel.hops, Some(HopRange { min: 2, max: 4 }));
        assert!(matches!(
            q.returns[0].expr,
            Expr::Agg {
                func: AggFunc::Count,
                ..
            }
        ));
    }

    #[test]
    fn hop_forms() {
        let h = |s: &str| {
            parse(&format!("MATCH (a)-[{s}]->(b) RETURN b")).unwrap().patterns[0].steps[0]
                .0
                .hops
                .unwrap()
        };
        assert_eq!(h("*"), HopRange { min: 1, max: 5 });
        assert_eq!(h("*3"), HopRange { min: 3, max: 3 });
        assert_eq!(h("*..2"), HopRange { min: 1, max: 2 });
        assert_eq!(h("*2.."), HopRange { min: 2, max: 5 });
        assert!(parse("MATCH (a)-[*0..2]->(b) RETURN b").is_err());
        assert!(parse("MATCH (a)-[*1..6]->(b) RETURN b").is_err());
        assert!(parse("MATCH (a)-[*3..2]->(b) RETURN b").is_err());
        assert!(parse("MATCH (a)-[r*1..2]->(b) RETURN b").is_err());
    }

    #[test]
    fn error_has_position_and_expected_set() {
        let err = parse("MATCH (a:Aircraft\nRETURN a").unwrap_err();
        assert_eq!(err.pos(), Some(Pos { line: 2, column: 1 }));
        let exp = err.expected();
        assert!(exp.contains(&"`)`".to_string()), "{exp:?}");
        assert!(exp.contains(&"`{`".to_string()), "{exp:?}");
    }

    #[test]
    fn keywords_case_insensitive_and_double_quotes() {
        let q = parse("MaTcH (a) WhErE a.make = \"Boeing\" ReTuRn a OrDeR bY a.make dEsC LiMiT 1")
            .unwrap();
        assert_eq!(q.limit, Some(1));
        assert!(q.order_by[0].descending);
    }

    #[test]
    fn precedence_round_trip() {
        for src in [
            "MATCH (a) WHERE a.x = 1 OR a.y = 2 AND NOT a.z = 3 RETURN a",
            "MATCH (a) WHERE (a.x = 1 OR a.y = 2) AND a.z = 3 RETURN a",
            "MATCH (a) WHERE a.x = 1 AND (a.y = 2 AND a.z = 3) RETURN a",
            "MATCH (a) WHERE NOT (a.x = 1 AND a.y = 2) RETURN a",
            "MATCH (a) WHERE (NOT a.b) = false RETURN a",
            "MATCH (a) WHERE a.f < -1.5e-7 AND a.g >= -3 RETURN a",
        ] {
            let q = parse(src).unwrap();
            let again = parse(&q.to_string()).unwrap();
            assert_eq!(q, again, "{src} -> {q}");
        }
    }
}
