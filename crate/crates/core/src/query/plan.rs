//! Name resolution and plan construction.

use std::fmt;
use std::sync::{Arc, RwLock};

use super::ast::{BinaryOp, Expr, ExprKind, FromItem, Query};
use super::error::QueryError;
use super::functions::Func;
use super::result::{Column, OutputFormat};
use crate::catalog::Database;
use crate::raster::Coverage;
use crate::value::{SummaryStats, Value, ValueKind};
use crate::vector::{ColumnType, Table, TableSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOptions {
    /// Allow spatial-index access paths. Off forces nested loops over
    /// sequential scans.
    pub use_index: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions { use_index: true }
    }
}

/// Columns every raster relation exposes, one row per tile.
pub const RASTER_COLUMNS: [(&str, ValueKind); 4] = [
    ("rid", ValueKind::Number),
    ("rast", ValueKind::Raster),
    ("acquired_at", ValueKind::Timestamp),
    ("sensor_id", ValueKind::Text),
];

/// Expression with column references resolved to row slots.
#[derive(Debug, Clone)]
pub struct BExpr {
    pub kind: BKind,
    pub pos: usize,
}

#[derive(Debug, Clone)]
pub enum BKind {
    Slot(usize),
    Const(Value),
    Field(Box<BExpr>, String),
    Call(Func, Vec<BExpr>),
    Binary(BinaryOp, Box<BExpr>, Box<BExpr>),
    Neg(Box<BExpr>),
    IsNull(Box<BExpr>, bool),
}

impl BExpr {
    fn uses_slots(&self) -> bool {
        match &self.kind {
            BKind::Slot(_) => true,
            BKind::Const(_) => false,
            BKind::Field(e, _) | BKind::Neg(e) | BKind::IsNull(e, _) => e.uses_slots(),
            BKind::Call(_, args) => args.iter().any(BExpr::uses_slots),
            BKind::Binary(_, l, r) => l.uses_slots() || r.uses_slots(),
        }
    }
}

#[derive(Clone)]
pub struct TableHandle {
    pub name: String,
    pub handle: Arc<RwLock<Table>>,
}

#[derive(Clone)]
pub enum IndexSource {
    /// Primary-key lookup.
    Key(BExpr),
    /// R-tree probe with the envelope of the expression's value.
    Envelope(BExpr),
}

#[derive(Clone)]
pub enum PlanNode {
    SingleRow,
    SeqScanTable(TableHandle),
    IndexScanTable { table: TableHandle, source: IndexSource },
    /// One row per tile; with a probe, only tiles whose footprint overlaps
    /// the probe value's envelope.
    RasterTileScan { coverage: Arc<Coverage>, probe: Option<BExpr> },
    NestedLoopJoin { outer: Box<PlanNode>, inner: Box<PlanNode>, predicate: Option<BExpr>, index_accelerated: bool },
    Filter { input: Box<PlanNode>, predicates: Vec<BExpr> },
    /// Evaluates the select list followed by `hidden` sort-key columns.
    Project { input: Box<PlanNode>, exprs: Vec<BExpr>, hidden: usize },
    Sort { input: Box<PlanNode>, key: usize, desc: bool },
    Limit { input: Box<PlanNode>, n: u64 },
    /// Runs a sub-select and keeps its first `width` columns.
    SubqueryScan { input: Box<PlanNode>, alias: String, width: usize },
}

impl PlanNode {
    fn children(&self) -> Vec<&PlanNode> {
        match self {
            PlanNode::SingleRow | PlanNode::SeqScanTable(_) | PlanNode::IndexScanTable { .. } | PlanNode::RasterTileScan { .. } => vec![],
            PlanNode::NestedLoopJoin { outer, inner, .. } => vec![outer, inner],
            PlanNode::Filter { input, .. }
            | PlanNode::Project { input, .. }
            | PlanNode::Sort { input, .. }
            | PlanNode::Limit { input, .. }
            | PlanNode::SubqueryScan { input, .. } => vec![input],
        }
    }

    /// Any node in the tree satisfies `pred`.
    pub fn any(&self, pred: &dyn Fn(&PlanNode) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    pub fn has_index_join(&self) -> bool {
        self.any(&|n| matches!(n, PlanNode::NestedLoopJoin { index_accelerated: true, .. }))
    }

    pub fn has_index_scan(&self) -> bool {
        self.any(&|n| matches!(n, PlanNode::IndexScanTable { .. }))
    }

    /// Whether executing the node reads slots of an enclosing outer row.
    pub(crate) fn is_parameterized(&self) -> bool {
        match self {
            PlanNode::IndexScanTable { source: IndexSource::Key(e) | IndexSource::Envelope(e), .. } => e.uses_slots(),
            PlanNode::RasterTileScan { probe: Some(e), .. } => e.uses_slots(),
            _ => false,
        }
    }

    fn label(&self) -> String {
        match self {
            PlanNode::SingleRow => "SingleRow".into(),
            PlanNode::SeqScanTable(t) => format!("SeqScanTable {}", t.name),
            PlanNode::IndexScanTable { table, source: IndexSource::Key(_) } => format!("IndexScanTable {} (key)", table.name),
            PlanNode::IndexScanTable { table, source: IndexSource::Envelope(_) } => {
                format!("IndexScanTable {} (envelope)", table.name)
            }
            PlanNode::RasterTileScan { coverage, probe } => format!(
                "RasterTileScan {}{}",
                coverage.meta.name,
                if probe.is_some() { " (probe)" } else { "" }
            ),
            PlanNode::NestedLoopJoin { index_accelerated, predicate, .. } => format!(
                "NestedLoopJoin{}{}",
                if *index_accelerated { " index_accelerated" } else { "" },
                if predicate.is_some() { " (join predicate)" } else { "" }
            ),
            PlanNode::Filter { predicates, .. } => format!("Filter ({} predicates)", predicates.len()),
            PlanNode::Project { exprs, hidden, .. } => format!("Project {} columns (+{hidden} hidden)", exprs.len() - hidden),
            PlanNode::Sort { key, desc, .. } => format!("Sort #{key} {}", if *desc { "DESC" } else { "ASC" }),
            PlanNode::Limit { n, .. } => format!("Limit {n}"),
            PlanNode::SubqueryScan { alias, .. } => format!("SubqueryScan {alias}"),
        }
    }

    fn explain_into(&self, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&self.label());
        out.push('\n');
        for c in self.children() {
            c.explain_into(depth + 1, out);
        }
    }
}

impl fmt::Display for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.explain_into(0, &mut out);
        f.write_str(&out)
    }
}

impl fmt::Debug for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub root: PlanNode,
    pub columns: Vec<Column>,
    pub format: OutputFormat,
    pub format_column: Option<usize>,
}

enum RelSource {
    Table { handle: TableHandle, schema: TableSchema },
    Coverage(Arc<Coverage>),
    Sub(PlanNode),
}

struct Relation {
    binding: String,
    columns: Vec<(String, ValueKind)>,
    source: RelSource,
}

impl Relation {
    fn scan(&self) -> PlanNode {
        match &self.source {
            RelSource::Table { handle, .. } => PlanNode::SeqScanTable(handle.clone()),
            RelSource::Coverage(c) => PlanNode::RasterTileScan { coverage: Arc::clone(c), probe: None },
            RelSource::Sub(node) => PlanNode::SubqueryScan {
                input: Box::new(node.clone()),
                alias: self.binding.clone(),
                width: self.columns.len(),
            },
        }
    }
}

fn column_kind(ty: ColumnType) -> ValueKind {
    match ty {
        ColumnType::Number => ValueKind::Number,
        ColumnType::Real => ValueKind::Real,
        ColumnType::Text => ValueKind::Text,
        ColumnType::Timestamp => ValueKind::Timestamp,
        ColumnType::Geometry => ValueKind::Geometry,
    }
}

/// Relations in row-layout order with their slot offsets.
struct Scope<'a> {
    rels: Vec<(&'a Relation, usize)>,
}

impl<'a> Scope<'a> {
    fn new(rels: impl IntoIterator<Item = &'a Relation>) -> Self {
        let mut offset = 0;
        let rels = rels
            .into_iter()
            .map(|r| {
                let o = offset;
                offset += r.columns.len();
                (r, o)
            })
            .collect();
        Scope { rels }
    }

    /// Index into `rels` and column position of a column reference.
    fn lookup(&self, qualifier: Option<&str>, name: &str, pos: usize) -> Result<(usize, usize), QueryError> {
        let display = || match qualifier {
            Some(q) => format!("{q}.{name}"),
            None => name.to_string(),
        };
        if let Some(q) = qualifier {
            let (ri, rel) = self
                .rels
                .iter()
                .enumerate()
                .find(|(_, (r, _))| r.binding == q)
                .map(|(i, (r, _))| (i, *r))
                .ok_or_else(|| QueryError::UnknownTable { name: q.to_string(), position: pos })?;
            let ci = rel
                .columns
                .iter()
                .position(|(c, _)| c == name)
                .ok_or_else(|| QueryError::UnknownColumn { name: display(), position: pos })?;
            return Ok((ri, ci));
        }
        let mut found = None;
        for (ri, (rel, _)) in self.rels.iter().enumerate() {
            let hits: Vec<usize> =
                rel.columns.iter().enumerate().filter(|(_, (c, _))| c == name).map(|(i, _)| i).collect();
            if hits.len() > 1 || (!hits.is_empty() && found.is_some()) {
                return Err(QueryError::AmbiguousColumn { name: display(), position: pos });
            }
            if let Some(&ci) = hits.first() {
                found = Some((ri, ci));
            }
        }
        found.ok_or_else(|| QueryError::UnknownColumn { name: display(), position: pos })
    }

    fn resolve(&self, qualifier: Option<&str>, name: &str, pos: usize) -> Result<(usize, ValueKind), QueryError> {
        let (ri, ci) = self.lookup(qualifier, name, pos)?;
        let (rel, offset) = self.rels[ri];
        Ok((offset + ci, rel.columns[ci].1))
    }

    fn bind(&self, e: &Expr) -> Result<(BExpr, ValueKind), QueryError> {
        let pos = e.pos;
        let mk = |kind| BExpr { kind, pos };
        Ok(match &e.kind {
            ExprKind::Column { qualifier, name } => {
                let (slot, kind) = self.resolve(qualifier.as_deref(), name, pos)?;
                (mk(BKind::Slot(slot)), kind)
            }
            ExprKind::Number(v) => (mk(BKind::Const(Value::Number(*v))), ValueKind::Number),
            ExprKind::Str(s) => (mk(BKind::Const(Value::Text(s.clone()))), ValueKind::Text),
            ExprKind::Null => (mk(BKind::Const(Value::Null)), ValueKind::Null),
            ExprKind::Field { expr, field } => {
                let (inner, kind) = self.bind(expr)?;
                let out_kind = field_kind(kind, field).ok_or_else(|| QueryError::UnknownColumn {
                    name: format!("({expr}).{field}"),
                    position: pos,
                })?;
                (mk(BKind::Field(Box::new(inner), field.clone())), out_kind)
            }
            ExprKind::Call { name, args } => {
                let func = Func::lookup(name)
                    .ok_or_else(|| QueryError::UnknownFunction { name: name.clone(), position: pos })?;
                let (lo, hi) = func.arity();
                if args.len() < lo || args.len() > hi {
                    let expected = if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") };
                    return Err(QueryError::Arity {
                        function: func.name().to_string(),
                        expected,
                        actual: args.len(),
                        position: pos,
                    });
                }
                let mut bound = Vec::with_capacity(args.len());
                let mut kinds = Vec::with_capacity(args.len());
                for a in args {
                    let (b, k) = self.bind(a)?;
                    bound.push(b);
                    kinds.push(k);
                }
                (mk(BKind::Call(func, bound)), func.return_kind(&kinds))
            }
            ExprKind::Binary { op, left, right } => {
                let (l, _) = self.bind(left)?;
                let (r, _) = self.bind(right)?;
                let kind = if op.is_comparison() { ValueKind::Bool } else { ValueKind::Number };
                (mk(BKind::Binary(*op, Box::new(l), Box::new(r))), kind)
            }
            ExprKind::Neg(inner) => {
                let (b, _) = self.bind(inner)?;
                (mk(BKind::Neg(Box::new(b))), ValueKind::Number)
            }
            ExprKind::IsNull { expr, negated } => {
                let (b, _) = self.bind(expr)?;
                (mk(BKind::IsNull(Box::new(b), *negated)), ValueKind::Bool)
            }
        })
    }
}

/// Static type of `(x).field`, or None when `x`'s type has no such field.
fn field_kind(kind: ValueKind, field: &str) -> Option<ValueKind> {
    let stats = SummaryStats::FIELDS.contains(&field);
    let geomval = match field {
        "geom" => Some(ValueKind::Geometry),
        "val" => Some(ValueKind::Number),
        _ => None,
    };
    match kind {
        ValueKind::Stats => stats.then_some(ValueKind::Number),
        ValueKind::GeomVal => geomval,
        ValueKind::Null => geomval.or(stats.then_some(ValueKind::Number)),
        _ => None,
    }
}

/// Column name a select item gets without an alias.
fn default_name(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Column { name, .. } => name.clone(),
        ExprKind::Field { field, .. } => field.clone(),
        ExprKind::Call { name, .. } => name.clone(),
        _ => "?column?".into(),
    }
}

fn contains_column(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Column { .. } => true,
        ExprKind::Number(_) | ExprKind::Str(_) | ExprKind::Null => false,
        ExprKind::Field { expr, .. } | ExprKind::Neg(expr) | ExprKind::IsNull { expr, .. } => contains_column(expr),
        ExprKind::Call { args, .. } => args.iter().any(contains_column),
        ExprKind::Binary { left, right, .. } => contains_column(left) || contains_column(right),
    }
}

/// Spatial conjunct usable as an index access path.
enum Link {
    /// Vector geometry column against a raster column.
    Raster { table: usize, coverage: usize, geom_col: usize, rast_col: usize },
    /// Vector geometry column against a constant operand.
    Constant { table: usize, operand: Expr },
}

fn classify_link(conj: &Expr, rels: &[Relation], scope: &Scope) -> Option<Link> {
    let (a, b) = match &conj.kind {
        ExprKind::Binary { op: BinaryOp::Overlaps, left, right } => (left.as_ref(), right.as_ref()),
        ExprKind::Call { name, args } if Func::lookup(name) == Some(Func::StIntersects) && args.len() == 2 => {
            (&args[0], &args[1])
        }
        _ => return None,
    };
    let is_overlaps = matches!(conj.kind, ExprKind::Binary { .. });
    let column_of = |e: &Expr| match &e.kind {
        ExprKind::Column { qualifier, name } => scope.lookup(qualifier.as_deref(), name, e.pos).ok(),
        _ => None,
    };
    let geom_of = |e: &Expr| {
        column_of(e).filter(|&(ri, ci)| {
            matches!(&rels[ri].source, RelSource::Table { schema, .. } if schema.columns[ci].ty == ColumnType::Geometry)
        })
    };
    let rast_of = |e: &Expr| {
        column_of(e).filter(|&(ri, ci)| matches!(rels[ri].source, RelSource::Coverage(_)) && rels[ri].columns[ci].0 == "rast")
    };
    for (g, other) in [(a, b), (b, a)] {
        let Some((table, geom_col)) = geom_of(g) else { continue };
        if let Some((coverage, rast_col)) = rast_of(other) {
            return Some(Link::Raster { table, coverage, geom_col, rast_col });
        }
        if is_overlaps && !contains_column(other) {
            return Some(Link::Constant { table, operand: other.clone() });
        }
    }
    None
}

/// `key = constant` on the given table, returning the constant.
fn key_equality<'e>(conj: &'e Expr, table: usize, rels: &[Relation], scope: &Scope) -> Option<&'e Expr> {
    let ExprKind::Binary { op: BinaryOp::Eq, left, right } = &conj.kind else { return None };
    let RelSource::Table { schema, .. } = &rels[table].source else { return None };
    for (col, other) in [(left, right), (right, left)] {
        if let ExprKind::Column { qualifier, name } = &col.kind {
            if let Ok((ri, ci)) = scope.lookup(qualifier.as_deref(), name, col.pos) {
                if ri == table && schema.columns[ci].name == schema.key_column && !contains_column(other) {
                    return Some(other);
                }
            }
        }
    }
    None
}

struct Planned {
    root: PlanNode,
    columns: Vec<Column>,
    format: OutputFormat,
    format_column: Option<usize>,
}

pub fn plan(query: &Query, db: &Database, opts: PlanOptions) -> Result<Plan, QueryError> {
    let p = plan_query(query, db, opts)?;
    Ok(Plan { root: p.root, columns: p.columns, format: p.format, format_column: p.format_column })
}

fn resolve_from(item: &FromItem, db: &Database, opts: PlanOptions) -> Result<Relation, QueryError> {
    match item {
        FromItem::Table { name, alias } => {
            let binding = alias.as_ref().unwrap_or(name).name.clone();
            if let Ok(handle) = db.vector().table(&name.name) {
                let schema = crate::vector::read_table(&handle).schema.clone();
                let columns = schema.columns.iter().map(|c| (c.name.clone(), column_kind(c.ty))).collect();
                return Ok(Relation {
                    binding,
                    columns,
                    source: RelSource::Table { handle: TableHandle { name: name.name.clone(), handle }, schema },
                });
            }
            if let Ok(cov) = db.raster().get(&name.name) {
                let columns = RASTER_COLUMNS.iter().map(|(n, k)| (n.to_string(), *k)).collect();
                return Ok(Relation { binding, columns, source: RelSource::Coverage(cov) });
            }
            Err(QueryError::UnknownTable { name: name.name.clone(), position: name.pos })
        }
        FromItem::Subquery { query, alias } => {
            let sub = plan_query(query, db, opts)?;
            let columns = sub.columns.iter().map(|c| (c.name.clone(), c.kind)).collect();
            Ok(Relation { binding: alias.name.clone(), columns, source: RelSource::Sub(sub.root) })
        }
    }
}

fn plan_query(query: &Query, db: &Database, opts: PlanOptions) -> Result<Planned, QueryError> {
    let mut rels = Vec::with_capacity(query.from.len());
    for item in &query.from {
        let rel = resolve_from(item, db, opts)?;
        if rels.iter().any(|r: &Relation| r.binding == rel.binding) {
            let pos = item.binding_name().pos;
            return Err(QueryError::AmbiguousColumn { name: rel.binding, position: pos });
        }
        rels.push(rel);
    }

    // Pick the access path and the row layout (order of relations).
    let from_scope = Scope::new(rels.iter());
    let mut layout: Vec<usize> = (0..rels.len()).collect();
    let mut access: Option<(PlanNode, Option<usize>)> = None;
    if opts.use_index {
        for (ci, conj) in query.filter.iter().enumerate() {
            match classify_link(conj, &rels, &from_scope) {
                Some(Link::Raster { table, coverage, geom_col, rast_col }) if rels.len() == 2 => {
                    let key = query.filter.iter().find_map(|c| key_equality(c, table, &rels, &from_scope));
                    let RelSource::Table { handle, .. } = &rels[table].source else { unreachable!() };
                    let RelSource::Coverage(cov) = &rels[coverage].source else { unreachable!() };
                    let empty = Scope::new(std::iter::empty());
                    let (outer, inner) = if let Some(k) = key {
                        // row probe: key lookup, then the tiles under each row
                        layout = vec![table, coverage];
                        let key_expr = empty.bind(k)?.0;
                        let probe = BExpr { kind: BKind::Slot(geom_col), pos: conj.pos };
                        (
                            PlanNode::IndexScanTable { table: handle.clone(), source: IndexSource::Key(key_expr) },
                            PlanNode::RasterTileScan { coverage: Arc::clone(cov), probe: Some(probe) },
                        )
                    } else {
                        // tile probe: every tile, then the rows under its footprint
                        layout = vec![coverage, table];
                        let probe = BExpr { kind: BKind::Slot(rast_col), pos: conj.pos };
                        (
                            PlanNode::RasterTileScan { coverage: Arc::clone(cov), probe: None },
                            PlanNode::IndexScanTable { table: handle.clone(), source: IndexSource::Envelope(probe) },
                        )
                    };
                    let scope = Scope::new(layout.iter().map(|&i| &rels[i]));
                    let predicate = scope.bind(conj)?.0;
                    let join = PlanNode::NestedLoopJoin {
                        outer: Box::new(outer),
                        inner: Box::new(inner),
                        predicate: Some(predicate),
                        index_accelerated: true,
                    };
                    access = Some((join, Some(ci)));
                    break;
                }
                Some(Link::Constant { table, operand }) if rels.len() == 1 => {
                    let RelSource::Table { handle, .. } = &rels[table].source else { unreachable!() };
                    let env = Scope::new(std::iter::empty()).bind(&operand)?.0;
                    access = Some((PlanNode::IndexScanTable { table: handle.clone(), source: IndexSource::Envelope(env) }, None));
                    break;
                }
                _ => {}
            }
        }
    }
    let (mut node, consumed) = match access {
        Some(a) => a,
        None => {
            let mut iter = rels.iter().map(Relation::scan);
            let first = iter.next().unwrap_or(PlanNode::SingleRow);
            let node = iter.fold(first, |outer, inner| PlanNode::NestedLoopJoin {
                outer: Box::new(outer),
                inner: Box::new(inner),
                predicate: None,
                index_accelerated: false,
            });
            (node, None)
        }
    };

    let scope = Scope::new(layout.iter().map(|&i| &rels[i]));
    let mut predicates = Vec::new();
    for (i, conj) in query.filter.iter().enumerate() {
        if Some(i) != consumed {
            predicates.push(scope.bind(conj)?.0);
        }
    }
    if !predicates.is_empty() {
        node = PlanNode::Filter { input: Box::new(node), predicates };
    }

    let mut exprs = Vec::with_capacity(query.select.len() + 1);
    let mut columns = Vec::with_capacity(query.select.len());
    for item in &query.select {
        let (b, kind) = scope.bind(&item.expr)?;
        exprs.push(b);
        let name = item.alias.as_ref().map(|a| a.name.clone()).unwrap_or_else(|| default_name(&item.expr));
        columns.push(Column { name, kind });
    }

    let mut hidden = 0;
    let mut sort = None;
    if let Some(ob) = &query.order_by {
        let by_name = match &ob.expr.kind {
            ExprKind::Column { qualifier: None, name } => {
                let hits: Vec<usize> = columns.iter().enumerate().filter(|(_, c)| &c.name == name).map(|(i, _)| i).collect();
                if hits.len() > 1 {
                    return Err(QueryError::AmbiguousColumn { name: name.clone(), position: ob.expr.pos });
                }
                hits.first().copied()
            }
            _ => None,
        };
        let key = match by_name {
            Some(i) => i,
            None => {
                exprs.push(scope.bind(&ob.expr)?.0);
                hidden = 1;
                exprs.len() - 1
            }
        };
        sort = Some((key, ob.desc));
    }

    node = PlanNode::Project { input: Box::new(node), exprs, hidden };
    if let Some((key, desc)) = sort {
        node = PlanNode::Sort { input: Box::new(node), key, desc };
    }
    if let Some(n) = query.limit {
        node = PlanNode::Limit { input: Box::new(node), n };
    }

    let (format, format_column) = output_format(query);
    Ok(Planned { root: node, columns, format, format_column })
}

/// Delivery format from the first top-level ST_As* call in the select list.
pub fn output_format(query: &Query) -> (OutputFormat, Option<usize>) {
    for (i, item) in query.select.iter().enumerate() {
        if let ExprKind::Call { name, .. } = &item.expr.kind {
            let format = match Func::lookup(name) {
                Some(Func::StAsGeoTiff) => OutputFormat::GeoTiff,
                Some(Func::StAsPng) => OutputFormat::Png,
                Some(Func::StAsGml) => OutputFormat::Gml,
                Some(Func::StAsBinary) => OutputFormat::WkbInline,
                _ => continue,
            };
            return (format, Some(i));
        }
    }
    (OutputFormat::Csv, None)
}
