//! Checks that need the whole tree: variable binding, aggregate placement,
//! column naming and ORDER BY scope.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Expr, Query};
use super::error::CypherError;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Node,
    Rel,
}

pub fn check<'q>(q: &'q Query) -> Result<(), CypherError> {
    let err = |m: String| Err(CypherError::Semantic(m));
    let mut kinds: BTreeMap<&str, Kind> = BTreeMap::new();
    let mut bind = |v: &'q Option<String>, k: Kind| -> Result<(), CypherError> {
        let Some(v) = v else { return Ok(()) };
        match kinds.get(v.as_str()) {
            Some(prev) if *prev != k => Err(CypherError::Semantic(format!(
                "variable `{v}` is bound as both a node and a relationship"
            ))),
            Some(Kind::Rel) => Err(CypherError::Semantic(format!(
                "relationship variable `{v}` is bound more than once"
            ))),
            _ => {
                kinds.insert(v, k);
                Ok(())
            }
        }
    };
    for p in &q.patterns {
        bind(&p.start.variable, Kind::Node)?;
        for (r, n) in &p.steps {
            bind(&r.variable, Kind::Rel)?;
            bind(&n.variable, Kind::Node)?;
        }
    }
    let bound: BTreeSet<&str> = q.bound_variables().into_iter().collect();
    let check_bound = |e: &Expr, scope: &BTreeSet<&str>| -> Result<(), CypherError> {
        for v in e.variables() {
            if !scope.contains(v) {
                return Err(CypherError::Semantic(format!(
                    "variable `{v}` is not bound in MATCH"
                )));
            }
        }
        Ok(())
    };

    if let Some(w) = &q.where_clause {
        if w.contains_aggregate() {
            return err("aggregate functions are not allowed in WHERE".into());
        }
        check_bound(w, &bound)?;
    }

    let mut columns = BTreeSet::new();
    for item in &q.returns {
        check_bound(&item.expr, &bound)?;
        match &item.expr {
            Expr::Agg { arg: Some(a), .. } if a.contains_aggregate() => {
                return err("aggregate functions cannot be nested".into());
            }
            Expr::Agg { .. } => {}
            e if e.contains_aggregate() => {
                return err(format!(
                    "aggregate must be a whole return item, found `{e}`"
                ));
            }
            _ => {}
        }
        if !columns.insert(item.column_name()) {
            return err(format!("duplicate column name `{}`", item.column_name()));
        }
    }

    let aliases: BTreeSet<&str> = q.returns.iter().filter_map(|r| r.alias.as_deref()).collect();
    let projected_only = q.distinct || q.is_aggregating();
    for s in &q.order_by {
        if resolve_sort_column(q, &s.expr).is_some() {
            continue;
        }
        if projected_only {
            return err(format!(
                "ORDER BY `{}` must name a returned column when aggregating or using DISTINCT",
                s.expr
            ));
        }
        if s.expr.contains_aggregate() {
            return err(format!("ORDER BY `{}` aggregates without returning it", s.expr));
        }
        let scope: BTreeSet<&str> = bound.union(&aliases).copied().collect();
        check_bound(&s.expr, &scope)?;
    }
    Ok(())
}

/// Column index an ORDER BY expression refers to: an alias, or a return
/// expression written identically.
pub fn resolve_sort_column(q: &Query, e: &Expr) -> Option<usize> {
    if let Expr::Var(v) = e {
        if let Some(i) = q.returns.iter().position(|r| r.alias.as_deref() == Some(v)) {
            return Some(i);
        }
    }
    q.returns.iter().position(|r| r.expr == *e)
}

#[cfg(test)]
mod tests {
    use crate::cypher::parse;

    fn semantic_err(src: &str) -> String {
        match parse(src) {
            Err(crate::cypher::CypherError::Semantic(m)) => m,
            other => panic!("expected semantic error for {src}: {other:?}"),
        }
    }

    #[test]
    fn unbound_variable() {
        assert!(semantic_err("MATCH (a) RETURN b").contains("`b`"));
        assert!(semantic_err("MATCH (a) WHERE z.x = 1 RETURN a").contains("`z`"));
    }

    #[test]
    fn aggregate_rules() {
        semantic_err("MATCH (a) WHERE count(a) > 1 RETURN a");
        semantic_err("MATCH (a) RETURN count(count(a))");
        semantic_err("MATCH (a) RETURN count(a) ORDER BY a.x");
        assert!(parse("MATCH (a) RETURN a.x AS k, count(a) AS n ORDER BY n DESC").is_ok());
        assert!(parse("MATCH (a) RETURN a.x, count(a) ORDER BY count(a)").is_ok());
    }

    #[test]
    fn kinds_and_columns() {
        semantic_err("MATCH (a)-[a]->(b) RETURN b");
        semantic_err("MATCH (a)-[r]->(b), (b)-[r]->(c) RETURN c");
        semantic_err("MATCH (a) RETURN a.x AS k, a.y AS k");
        assert!(parse("MATCH (a)-[r]->(b) RETURN r, a.x AS total ORDER BY total").is_ok());
    }
}
