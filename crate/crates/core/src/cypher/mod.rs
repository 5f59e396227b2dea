//! Query language front end and executor.

mod ast;
mod error;
mod executor;
mod lexer;
mod parser;
mod planner;
mod result;
mod semantic;

pub use ast::*;
pub use error::{CypherError, Pos};
pub use executor::{execute, run, Params};
pub use lexer::{tokenize, Tok, Token};
pub use parser::{is_reserved, parse, parse_with, ParseOptions};
pub use planner::{plan, plan_with, AccessPath, PatternPlan, PlanOptions, QueryPlan};
pub use result::{
    total_cmp, Cell, ExecStats, NodeRef, PageInfo, PageRequest, RelRef, ResultSet,
    DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE,
};

use crate::graphstore::PropertyGraph;

/// Parse, plan against the graph's catalog and run unpaginated.
pub fn query(graph: &PropertyGraph, text: &str, params: &Params) -> Result<ResultSet, CypherError> {
    let q = parse(text)?;
    run(graph, &plan(&q, &graph.catalog()), params)
}
