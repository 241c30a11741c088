//! Plan execution and expression evaluation.

use std::cmp::Ordering;

use super::ast::BinaryOp;
use super::error::QueryError;
use super::functions::{self, CallError};
use super::plan::{BExpr, BKind, IndexSource, Plan, PlanNode};
use super::result::ResultSet;
use crate::geom::{envelopes_overlap, Envelope, Geometry};
use crate::value::{Value, ValueKind};
use crate::vector::{read_table, SearchStats};

type Row = Vec<Value>;

/// Work counters gathered while executing a plan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecStats {
    pub rtree_nodes_visited: u64,
    pub rtree_leaves_visited: u64,
    pub tiles_scanned: u64,
    pub rows_scanned: u64,
}

pub fn execute(plan: &Plan) -> Result<ResultSet, QueryError> {
    execute_with_stats(plan).map(|(rs, _)| rs)
}

pub fn execute_with_stats(plan: &Plan) -> Result<(ResultSet, ExecStats), QueryError> {
    let mut stats = ExecStats::default();
    let width = plan.columns.len();
    let mut rows = exec(&plan.root, &[], &mut stats)?;
    for r in &mut rows {
        r.truncate(width);
    }
    let rs = ResultSet { columns: plan.columns.clone(), rows, format: plan.format, format_column: plan.format_column };
    Ok((rs, stats))
}

fn runtime(pos: usize, message: impl Into<String>) -> QueryError {
    QueryError::Runtime { position: pos, message: message.into() }
}

fn type_error(pos: usize, message: impl Into<String>) -> QueryError {
    QueryError::Type { position: pos, message: message.into() }
}

fn envelope_of(v: &Value) -> Option<Envelope> {
    match v {
        Value::Geometry(g) => Some(g.envelope()),
        Value::Envelope(e) => Some(*e),
        Value::Raster(t) => Some(t.footprint()),
        _ => None,
    }
}

fn exec(node: &PlanNode, outer: &[Value], stats: &mut ExecStats) -> Result<Vec<Row>, QueryError> {
    Ok(match node {
        PlanNode::SingleRow => vec![Vec::new()],
        PlanNode::SeqScanTable(t) => {
            let table = read_table(&t.handle);
            stats.rows_scanned += table.len() as u64;
            table.rows().iter().map(|r| r.values.clone()).collect()
        }
        PlanNode::IndexScanTable { table, source } => {
            let t = read_table(&table.handle);
            match source {
                IndexSource::Key(e) => {
                    let v = eval(e, outer)?;
                    let key = match v {
                        Value::Null => None,
                        ref v => Some(v.as_f64().ok_or_else(|| {
                            type_error(e.pos, format!("cannot compare number with {}", v.kind()))
                        })?),
                    };
                    match key {
                        Some(k) if k.fract() == 0.0 && k.abs() < 9.0e15 => {
                            t.get_by_key(k as i64).map(|r| vec![r.values.clone()]).unwrap_or_default()
                        }
                        _ => Vec::new(),
                    }
                }
                IndexSource::Envelope(e) => {
                    let v = eval(e, outer)?;
                    if v.is_null() {
                        return Ok(Vec::new());
                    }
                    let env = envelope_of(&v)
                        .ok_or_else(|| type_error(e.pos, format!("operator does not exist: geometry && {}", v.kind())))?;
                    let mut s = SearchStats::default();
                    let hits = t.bbox_positions(&env, &mut s).map_err(|err| runtime(e.pos, err.to_string()))?;
                    stats.rtree_nodes_visited += s.nodes_visited as u64;
                    stats.rtree_leaves_visited += s.leaves_visited as u64;
                    stats.rows_scanned += hits.len() as u64;
                    hits.into_iter().map(|i| t.rows()[i].values.clone()).collect()
                }
            }
        }
        PlanNode::RasterTileScan { coverage, probe } => {
            let tiles: Vec<(u32, u32)> = match probe {
                None => {
                    let tx = coverage.meta.tiles_x();
                    (0..coverage.meta.tiles_y()).flat_map(|r| (0..tx).map(move |c| (c, r))).collect()
                }
                Some(e) => {
                    let v = eval(e, outer)?;
                    if v.is_null() {
                        return Ok(Vec::new());
                    }
                    let env = envelope_of(&v)
                        .ok_or_else(|| type_error(e.pos, format!("operator does not exist: {} && raster", v.kind())))?;
                    coverage.tiles_overlapping(&env).map_err(|err| runtime(e.pos, err.to_string()))?
                }
            };
            stats.tiles_scanned += tiles.len() as u64;
            let meta = &coverage.meta;
            tiles
                .into_iter()
                .map(|(c, r)| {
                    let rid = r as f64 * meta.tiles_x() as f64 + c as f64 + 1.0;
                    let tile = crate::raster::TileRef { coverage: coverage.clone(), tile_col: c, tile_row: r };
                    vec![
                        Value::Number(rid),
                        Value::Raster(std::sync::Arc::new(tile)),
                        Value::Timestamp(meta.acquired_at),
                        Value::Text(meta.sensor_id.clone()),
                    ]
                })
                .collect()
        }
        PlanNode::NestedLoopJoin { outer: o, inner, predicate, .. } => {
            let outer_rows = exec(o, outer, stats)?;
            let fixed_inner = if inner.is_parameterized() { None } else { Some(exec(inner, outer, stats)?) };
            let mut out = Vec::new();
            for orow in outer_rows {
                let inner_rows = match &fixed_inner {
                    Some(rows) => rows.clone(),
                    None => exec(inner, &orow, stats)?,
                };
                for irow in inner_rows {
                    let mut joined = orow.clone();
                    joined.extend(irow);
                    if let Some(p) = predicate {
                        if !truthy(p, &joined)? {
                            continue;
                        }
                    }
                    out.push(joined);
                }
            }
            out
        }
        PlanNode::Filter { input, predicates } => {
            let rows = exec(input, outer, stats)?;
            let mut out = Vec::with_capacity(rows.len());
            'rows: for row in rows {
                for p in predicates {
                    if !truthy(p, &row)? {
                        continue 'rows;
                    }
                }
                out.push(row);
            }
            out
        }
        PlanNode::Project { input, exprs, .. } => {
            let rows = exec(input, outer, stats)?;
            let mut out = Vec::with_capacity(rows.len());
            for row in rows {
                out.push(exprs.iter().map(|e| eval(e, &row)).collect::<Result<Row, _>>()?);
            }
            out
        }
        PlanNode::Sort { input, key, desc } => {
            let mut rows = exec(input, outer, stats)?;
            let k = *key;
            if *desc {
                rows.sort_by(|a, b| b[k].sort_cmp(&a[k]));
            } else {
                rows.sort_by(|a, b| a[k].sort_cmp(&b[k]));
            }
            rows
        }
        PlanNode::Limit { input, n } => {
            let mut rows = exec(input, outer, stats)?;
            rows.truncate(usize::try_from(*n).unwrap_or(usize::MAX));
            rows
        }
        PlanNode::SubqueryScan { input, width, .. } => {
            let mut rows = exec(input, outer, stats)?;
            for r in &mut rows {
                r.truncate(*width);
            }
            rows
        }
    })
}

/// WHERE semantics: Null and false reject the row.
fn truthy(e: &BExpr, row: &[Value]) -> Result<bool, QueryError> {
    match eval(e, row)? {
        Value::Bool(b) => Ok(b),
        Value::Null => Ok(false),
        other => Err(type_error(e.pos, format!("predicate must be boolean, not {}", other.kind()))),
    }
}

pub fn eval(e: &BExpr, row: &[Value]) -> Result<Value, QueryError> {
    Ok(match &e.kind {
        BKind::Slot(i) => row[*i].clone(),
        BKind::Const(v) => v.clone(),
        BKind::Field(inner, field) => match eval(inner, row)? {
            Value::Null => Value::Null,
            Value::Stats(s) => s
                .field(field)
                .ok_or_else(|| type_error(e.pos, format!("summarystats has no field {field:?}")))?,
            Value::GeomVal(gv) => match field.as_str() {
                "geom" => Value::Geometry(Geometry::Point(gv.geom)),
                "val" => Value::Number(gv.val),
                _ => return Err(type_error(e.pos, format!("geomval has no field {field:?}"))),
            },
            other => return Err(type_error(e.pos, format!("{} is not a composite", other.kind()))),
        },
        BKind::Call(func, args) => {
            let vals = args.iter().map(|a| eval(a, row)).collect::<Result<Vec<_>, _>>()?;
            functions::call(*func, &vals).map_err(|err| match err {
                CallError::Type(m) => type_error(e.pos, m),
                CallError::Runtime(m) => runtime(e.pos, m),
            })?
        }
        BKind::Binary(op, l, r) => binary(*op, eval(l, row)?, eval(r, row)?, e.pos)?,
        BKind::Neg(inner) => match eval(inner, row)? {
            Value::Null => Value::Null,
            v => match v.as_f64() {
                Some(x) => Value::Number(-x),
                None => return Err(type_error(e.pos, format!("operator does not exist: -{}", v.kind()))),
            },
        },
        BKind::IsNull(inner, negated) => Value::Bool(eval(inner, row)?.is_null() != *negated),
    })
}

fn binary(op: BinaryOp, l: Value, r: Value, pos: usize) -> Result<Value, QueryError> {
    if l.is_null() || r.is_null() {
        return Ok(Value::Null);
    }
    let mismatch = |l: &Value, r: &Value| {
        type_error(pos, format!("operator does not exist: {} {} {}", l.kind(), op.symbol(), r.kind()))
    };
    match op {
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
            let (Some(a), Some(b)) = (l.as_f64(), r.as_f64()) else { return Err(mismatch(&l, &r)) };
            let v = match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                _ if b == 0.0 => return Ok(Value::Null),
                _ => a / b,
            };
            Ok(Value::Number(v).normalized())
        }
        BinaryOp::Overlaps => {
            let (Some(a), Some(b)) = (envelope_of(&l), envelope_of(&r)) else { return Err(mismatch(&l, &r)) };
            Ok(Value::Bool(envelopes_overlap(&a, &b).map_err(|e| runtime(pos, e.to_string()))?))
        }
        _ => {
            let comparable = !matches!(l.kind(), ValueKind::Raster | ValueKind::Stats | ValueKind::GeomVal | ValueKind::Envelope);
            let ord = l.sql_cmp(&r).filter(|_| comparable).ok_or_else(|| mismatch(&l, &r))?;
            if matches!(l.kind(), ValueKind::Geometry) && !matches!(op, BinaryOp::Eq | BinaryOp::Ne) {
                return Err(mismatch(&l, &r));
            }
            Ok(Value::Bool(match op {
                BinaryOp::Eq => ord == Ordering::Equal,
                BinaryOp::Ne => ord != Ordering::Equal,
                BinaryOp::Lt => ord == Ordering::Less,
                BinaryOp::Le => ord != Ordering::Greater,
                BinaryOp::Gt => ord == Ordering::Greater,
                _ => ord != Ordering::Less,
            }))
        }
    }
}
