//! Query parsing and the staged processing pipeline shared by the HTTP
//! service and the command line.

mod export;
mod parse;
mod pipeline;

pub use export::{format_value, to_csv, to_json, to_table};
pub use parse::{
    parse_query, parse_query_for, split_terms, ChangepointRequest, Query, QueryParams, ScoreKind,
    TermGroup,
};
pub use pipeline::{execute, interpolate_masked, ChangepointSummary, QueryResult};
