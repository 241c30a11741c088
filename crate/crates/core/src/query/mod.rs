//! SQL subset: lexer, parser, planner and executor.

pub mod ast;
mod error;
mod exec;
pub mod functions;
pub mod lexer;
mod parser;
mod plan;
mod result;

pub use error::QueryError;
pub use exec::{execute, execute_with_stats, ExecStats};
pub use lexer::tokenize;
pub use parser::parse;
pub use plan::{output_format, plan, BExpr, BKind, IndexSource, Plan, PlanNode, PlanOptions, RASTER_COLUMNS};
pub use result::{Column, OutputFormat, ResultSet};

use crate::catalog::Database;

/// Parses, plans and executes `sql` against `db`.
pub fn run(db: &Database, sql: &str) -> Result<ResultSet, QueryError> {
    run_with(db, sql, PlanOptions::default())
}

pub fn run_with(db: &Database, sql: &str, opts: PlanOptions) -> Result<ResultSet, QueryError> {
    let ast = parse(sql)?;
    execute(&plan(&ast, db, opts)?)
}
