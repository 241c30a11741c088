//! In-situ observation tables: point rows with typed attributes, a unique
//! integer key and an R-tree over the geometry column.

pub mod rtree;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{check_srid, Envelope, GeomError, Geometry, Point};
use crate::raster::is_identifier;
use crate::value::{format_timestamp, parse_timestamp, Value};
pub use rtree::SearchStats;
use rtree::{RTree, Rect};

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("table {0:?} already exists")]
    DuplicateName(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("column {column:?}: {reason}")]
    TypeMismatch { column: String, reason: String },
    #[error("duplicate key {0}")]
    DuplicateKey(i64),
    #[error("row has {actual} values, schema has {expected} columns")]
    Arity { expected: usize, actual: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("corrupt row file {path} line {line}: {reason}")]
    CorruptRow { path: PathBuf, line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VectorError + '_ {
    move |source| VectorError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Number,
    /// Single-precision number.
    Real,
    Text,
    Timestamp,
    Geometry,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Number => "number",
            ColumnType::Real => "real",
            ColumnType::Text => "text",
            ColumnType::Timestamp => "timestamp",
            ColumnType::Geometry => "geometry",
        })
    }
}

impl std::str::FromStr for ColumnType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "number" | "double" | "float8" | "integer" | "int" => Ok(ColumnType::Number),
            "real" | "float4" => Ok(ColumnType::Real),
            "text" | "string" => Ok(ColumnType::Text),
            "timestamp" | "timestamptz" => Ok(ColumnType::Timestamp),
            "geometry" => Ok(ColumnType::Geometry),
            other => Err(format!("unknown column type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl ColumnDef {
    pub fn new(name: &str, ty: ColumnType) -> Self {
        ColumnDef { name: name.into(), ty }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub srid: i32,
    pub columns: Vec<ColumnDef>,
    pub key_column: String,
}

impl TableSchema {
    /// Parses the inline `name:type,...` syntax; the first number column
    /// becomes the key unless `key` names another.
    pub fn parse_inline(name: &str, srid: i32, spec: &str, key: Option<&str>) -> Result<Self, VectorError> {
        let mut columns = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (col, ty) = part
                .split_once(':')
                .ok_or_else(|| VectorError::InvalidSchema(format!("column {part:?} lacks a :type")))?;
            let ty = ty.parse().map_err(VectorError::InvalidSchema)?;
            columns.push(ColumnDef::new(col.trim(), ty));
        }
        let key_column = match key {
            Some(k) => k.to_string(),
            None => columns
                .iter()
                .find(|c| c.ty == ColumnType::Number)
                .map(|c| c.name.clone())
                .ok_or_else(|| VectorError::InvalidSchema("no number column to use as key".into()))?,
        };
        let schema = TableSchema { name: name.into(), srid, columns, key_column }.normalized();
        schema.validate()?;
        Ok(schema)
    }

    /// Lower-cases every identifier.
    pub fn normalized(mut self) -> Self {
        self.name = self.name.to_ascii_lowercase();
        self.key_column = self.key_column.to_ascii_lowercase();
        for c in &mut self.columns {
            c.name = c.name.to_ascii_lowercase();
        }
        self
    }

    pub fn validate(&self) -> Result<(), VectorError> {
        let bad = |m: String| Err(VectorError::InvalidSchema(m));
        if !is_identifier(&self.name) {
            return bad(format!("table name {:?} is not an identifier", self.name));
        }
        if self.srid <= 0 {
            return bad(format!("srid must be > 0, got {}", self.srid));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.columns {
            if !is_identifier(&c.name) {
                return bad(format!("column name {:?} is not an identifier", c.name));
            }
            if !seen.insert(c.name.as_str()) {
                return bad(format!("duplicate column {:?}", c.name));
            }
        }
        let geoms = self.columns.iter().filter(|c| c.ty == ColumnType::Geometry).count();
        if geoms != 1 {
            return bad(format!("exactly one geometry column is required, found {geoms}"));
        }
        if self.columns.len() < 2 {
            return bad("at least one non-geometry column is required".into());
        }
        match self.column(&self.key_column) {
            Some(c) if c.ty == ColumnType::Number => Ok(()),
            Some(c) => bad(format!("key column {:?} must be a number, is {}", c.name, c.ty)),
            None => bad(format!("key column {:?} is not in the schema", self.key_column)),
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn geometry_position(&self) -> usize {
        self.columns.iter().position(|c| c.ty == ColumnType::Geometry).expect("validated schema")
    }

    pub fn key_position(&self) -> usize {
        self.position(&self.key_column).expect("validated schema")
    }

    pub fn geometry_column(&self) -> &str {
        &self.columns[self.geometry_position()].name
    }
}

#[derive(Debug, Clone)]
pub struct ObservationRow {
    pub values: Vec<Value>,
}

impl ObservationRow {
    pub fn new(values: Vec<Value>) -> Self {
        ObservationRow { values }
    }

    pub fn point(&self, schema: &TableSchema) -> &Point {
        match &self.values[schema.geometry_position()] {
            Value::Geometry(Geometry::Point(p)) => p,
            _ => unreachable!("rows are validated on insert"),
        }
    }

    pub fn key(&self, schema: &TableSchema) -> i64 {
        self.values[schema.key_position()].as_f64().expect("validated key") as i64
    }
}

/// Coerces and checks a row against the schema: numbers narrow to single
/// precision in real columns, the geometry must be a point in the table srid.
pub fn conform_row(schema: &TableSchema, row: ObservationRow) -> Result<ObservationRow, VectorError> {
    if row.values.len() != schema.columns.len() {
        return Err(VectorError::Arity { expected: schema.columns.len(), actual: row.values.len() });
    }
    let mut out = Vec::with_capacity(row.values.len());
    for (col, v) in schema.columns.iter().zip(row.values) {
        let mismatch = |reason: String| VectorError::TypeMismatch { column: col.name.clone(), reason };
        let v = match (col.ty, v) {
            (ColumnType::Geometry, Value::Null) => return Err(mismatch("geometry must not be null".into())),
            (_, Value::Null) => Value::Null,
            (ColumnType::Number, v @ (Value::Number(_) | Value::Real(_))) => {
                let x = v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| mismatch("number must be finite".into()))?;
                Value::Number(x)
            }
            (ColumnType::Real, v @ (Value::Number(_) | Value::Real(_))) => {
                let x = v.as_f64().map(|x| x as f32).filter(|x| x.is_finite());
                Value::Real(x.ok_or_else(|| mismatch("number must be finite in single precision".into()))?)
            }
            (ColumnType::Text, v @ Value::Text(_)) => v,
            (ColumnType::Timestamp, v @ Value::Timestamp(_)) => v,
            (ColumnType::Timestamp, Value::Text(s)) => {
                Value::Timestamp(parse_timestamp(&s).map_err(|e| mismatch(format!("bad timestamp {s:?}: {e}")))?)
            }
            (ColumnType::Geometry, Value::Geometry(Geometry::Point(p))) => {
                check_srid(schema.srid, p.srid)?;
                Value::Geometry(Geometry::Point(p))
            }
            (ty, v) => return Err(mismatch(format!("expected {ty}, got {}", v.kind()))),
        };
        out.push(v);
    }
    let row = ObservationRow { values: out };
    match row.values[schema.key_position()].as_f64() {
        Some(k) if k.fract() == 0.0 && k.abs() < 9.0e15 => Ok(row),
        Some(k) => Err(VectorError::TypeMismatch { column: schema.key_column.clone(), reason: format!("key {k} is not an integer") }),
        None => Err(VectorError::TypeMismatch { column: schema.key_column.clone(), reason: "key must not be null".into() }),
    }
}

/// One table: rows in insertion order, key map and spatial index.
#[derive(Debug)]
pub struct Table {
    pub schema: TableSchema,
    rows: Vec<ObservationRow>,
    by_key: HashMap<i64, usize>,
    index: RTree<usize>,
}

impl Table {
    fn new(schema: TableSchema) -> Self {
        Table { schema, rows: Vec::new(), by_key: HashMap::new(), index: RTree::default() }
    }

    fn push(&mut self, row: ObservationRow) -> Result<i64, VectorError> {
        let key = row.key(&self.schema);
        if self.by_key.contains_key(&key) {
            return Err(VectorError::DuplicateKey(key));
        }
        let p = row.point(&self.schema);
        self.index.insert(Rect::point(p.x, p.y), self.rows.len());
        self.by_key.insert(key, self.rows.len());
        self.rows.push(row);
        Ok(key)
    }

    pub fn rows(&self) -> &[ObservationRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get_by_key(&self, key: i64) -> Option<&ObservationRow> {
        self.by_key.get(&key).map(|&i| &self.rows[i])
    }

    /// Row positions whose point lies in the closed envelope.
    pub fn bbox_positions(&self, env: &Envelope, stats: &mut SearchStats) -> Result<Vec<usize>, VectorError> {
        check_srid(self.schema.srid, env.srid)?;
        let q = Rect { min_x: env.min_x, min_y: env.min_y, max_x: env.max_x, max_y: env.max_y };
        let mut hits = self.index.search_counted(&q, stats);
        hits.sort_unstable();
        Ok(hits)
    }

    pub fn query_bbox(&self, env: &Envelope) -> Result<Vec<ObservationRow>, VectorError> {
        let hits = self.bbox_positions(env, &mut SearchStats::default())?;
        Ok(hits.into_iter().map(|i| self.rows[i].clone()).collect())
    }

    pub fn index(&self) -> &RTree<usize> {
        &self.index
    }

    /// Extent of every stored point, `None` when empty.
    pub fn extent(&self) -> Option<Envelope> {
        let mut it = self.rows.iter().map(|r| r.point(&self.schema).envelope());
        let first = it.next()?;
        Some(it.fold(first, |a, b| a.union(&b)))
    }
}

#[derive(Debug, Default)]
pub struct VectorStore {
    root: Option<PathBuf>,
    tables: RwLock<BTreeMap<String, Arc<RwLock<Table>>>>,
}

impl VectorStore {
    pub fn in_memory() -> Self {
        VectorStore::default()
    }

    pub(crate) fn with_root(root: &Path) -> Self {
        VectorStore { root: Some(root.to_path_buf()), tables: RwLock::default() }
    }

    fn rows_path(&self, name: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join("tables").join(format!("{name}.rows")))
    }

    /// Registers a persisted table and replays its row file. A trailing line
    /// without a newline is an interrupted append and is ignored.
    pub(crate) fn load(&self, schema: TableSchema) -> Result<(), VectorError> {
        schema.validate()?;
        let mut table = Table::new(schema);
        if let Some(path) = self.rows_path(&table.schema.name) {
            if path.exists() {
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                let complete = match text.rfind('\n') {
                    Some(i) => &text[..=i],
                    None => "",
                };
                for (i, line) in complete.lines().enumerate() {
                    let corrupt = |reason: String| VectorError::CorruptRow { path: path.clone(), line: i + 1, reason };
                    let row = row_from_json(&table.schema, line).map_err(corrupt)?;
                    let row = conform_row(&table.schema, row).map_err(|e| corrupt(e.to_string()))?;
                    table.push(row).map_err(|e| corrupt(e.to_string()))?;
                }
            }
        }
        let name = table.schema.name.clone();
        self.tables.write().expect("vector lock").insert(name, Arc::new(RwLock::new(table)));
        Ok(())
    }

    pub fn create_table(&self, schema: TableSchema) -> Result<(), VectorError> {
        let schema = schema.normalized();
        schema.validate()?;
        let mut map = self.tables.write().expect("vector lock");
        if map.contains_key(&schema.name) {
            return Err(VectorError::DuplicateName(schema.name));
        }
        if let Some(path) = self.rows_path(&schema.name) {
            let dir = path.parent().expect("rows file has a parent");
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            fs::write(&path, b"").map_err(io_err(&path))?;
        }
        map.insert(schema.name.clone(), Arc::new(RwLock::new(Table::new(schema))));
        Ok(())
    }

    pub fn table(&self, name: &str) -> Result<Arc<RwLock<Table>>, VectorError> {
        self.tables
            .read()
            .expect("vector lock")
            .get(name)
            .cloned()
            .ok_or_else(|| VectorError::UnknownTable(name.into()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.read().expect("vector lock").contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.tables.read().expect("vector lock").keys().cloned().collect()
    }

    pub fn schema(&self, name: &str) -> Result<TableSchema, VectorError> {
        Ok(self.table(name)?.read().expect("table lock").schema.clone())
    }

    pub fn schemas(&self) -> Vec<TableSchema> {
        let map = self.tables.read().expect("vector lock");
        map.values().map(|t| t.read().expect("table lock").schema.clone()).collect()
    }

    pub fn insert_row(&self, table: &str, row: ObservationRow) -> Result<i64, VectorError> {
        let handle = self.table(table)?;
        let mut t = handle.write().expect("table lock");
        let row = conform_row(&t.schema, row)?;
        let key = row.key(&t.schema);
        if t.by_key.contains_key(&key) {
            return Err(VectorError::DuplicateKey(key));
        }
        if let Some(path) = self.rows_path(table) {
            let mut line = row_to_json(&t.schema, &row);
            line.push('\n');
            let mut f = OpenOptions::new().append(true).create(true).open(&path).map_err(io_err(&path))?;
            f.write_all(line.as_bytes()).map_err(io_err(&path))?;
        }
        t.push(row)
    }

    pub fn get_by_key(&self, table: &str, key: i64) -> Result<Option<ObservationRow>, VectorError> {
        let handle = self.table(table)?;
        let t = handle.read().expect("table lock");
        Ok(t.get_by_key(key).cloned())
    }

    pub fn query_bbox(&self, table: &str, env: &Envelope) -> Result<Vec<ObservationRow>, VectorError> {
        let handle = self.table(table)?;
        let t = handle.read().expect("table lock");
        t.query_bbox(env)
    }
}

/// Read guard helper for callers that scan a table in place.
pub fn read_table(handle: &Arc<RwLock<Table>>) -> RwLockReadGuard<'_, Table> {
    handle.read().expect("table lock")
}

/// One JSON object per row, keys in column order.
pub fn row_to_json(schema: &TableSchema, row: &ObservationRow) -> String {
    let mut out = String::from("{");
    for (i, (col, v)) in schema.columns.iter().zip(&row.values).enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(&col.name).expect("string serializes"));
        out.push(':');
        let rendered = match v {
            Value::Null => "null".to_string(),
            Value::Number(x) => serde_json::to_string(x).expect("finite number"),
            Value::Real(x) => format!("{x}"),
            Value::Text(s) => serde_json::to_string(s).expect("string serializes"),
            Value::Timestamp(t) => serde_json::to_string(&format_timestamp(t)).expect("string serializes"),
            Value::Geometry(g) => serde_json::to_string(&g.to_wkt()).expect("string serializes"),
            other => serde_json::to_string(&other.to_string()).expect("string serializes"),
        };
        out.push_str(&rendered);
    }
    out.push('}');
    out
}

pub fn row_from_json(schema: &TableSchema, line: &str) -> Result<ObservationRow, String> {
    let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut values = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        let v = obj.get(&col.name).unwrap_or(&serde_json::Value::Null);
        let value = match (col.ty, v) {
            (_, serde_json::Value::Null) => Value::Null,
            (ColumnType::Number | ColumnType::Real, serde_json::Value::Number(n)) => {
                Value::Number(n.as_f64().ok_or("number out of range")?)
            }
            (ColumnType::Text, serde_json::Value::String(s)) => Value::Text(s.clone()),
            (ColumnType::Timestamp, serde_json::Value::String(s)) => Value::Text(s.clone()),
            (ColumnType::Geometry, serde_json::Value::String(s)) => {
                Value::Geometry(Point::from_wkt(s, schema.srid).map_err(|e| e.to_string())?.into())
            }
            (ty, other) => return Err(format!("column {}: expected {ty}, found {other}", col.name)),
        };
        values.push(value);
    }
    Ok(ObservationRow { values })
}
