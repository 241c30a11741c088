//! Observation CSV reader. The header names the table columns in any order;
//! the geometry is given either as WKT in the geometry column or as separate
//! `x` and `y` columns.

use super::CodecError;
use crate::geom::{Geometry, Point};
use crate::value::{parse_timestamp, Value};
use crate::vector::{conform_row, ColumnType, ObservationRow, TableSchema, VectorError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ObsCsv {
    /// Accepted rows with their 1-based source line.
    pub rows: Vec<(usize, ObservationRow)>,
    pub errors: Vec<RowError>,
}

enum GeomSource {
    Wkt(usize),
    Xy(usize, usize),
}

pub fn parse_obs_csv(text: &str, schema: &TableSchema) -> Result<ObsCsv, CodecError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CodecError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(CodecError::HeaderMismatch(format!("column {h:?} appears twice")));
        }
        if schema.column(h).is_none() && h != "x" && h != "y" {
            return Err(CodecError::HeaderMismatch(format!("unknown column {h:?} for table {}", schema.name)));
        }
    }
    let geom_name = schema.geometry_column();
    let geom_src = match (find(geom_name), find("x"), find("y")) {
        (Some(g), None, None) => GeomSource::Wkt(g),
        (None, Some(x), Some(y)) => GeomSource::Xy(x, y),
        (Some(_), _, _) => return Err(CodecError::HeaderMismatch(format!("give either {geom_name} or x,y, not both"))),
        _ => return Err(CodecError::HeaderMismatch(format!("missing geometry: need {geom_name} or x and y"))),
    };
    let mut sources = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        if col.ty == ColumnType::Geometry {
            sources.push(None);
            continue;
        }
        let idx = find(&col.name).ok_or_else(|| CodecError::HeaderMismatch(format!("missing column {:?}", col.name)))?;
        sources.push(Some(idx));
    }

    let mut out = ObsCsv { rows: Vec::new(), errors: Vec::new() };
    for rec in reader.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                out.errors.push(RowError { line, column: String::new(), reason: e.to_string() });
                continue;
            }
        };
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            out.errors.push(RowError {
                line,
                column: String::new(),
                reason: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
            continue;
        }
        match read_row(&rec, schema, &sources, &geom_src) {
            Ok(row) => out.rows.push((line, row)),
            Err((column, reason)) => out.errors.push(RowError { line, column, reason }),
        }
    }
    Ok(out)
}

fn read_row(
    rec: &csv::StringRecord,
    schema: &TableSchema,
    sources: &[Option<usize>],
    geom_src: &GeomSource,
) -> Result<ObservationRow, (String, String)> {
    let mut values = Vec::with_capacity(schema.columns.len());
    for (col, src) in schema.columns.iter().zip(sources) {
        let fail = |reason: String| (col.name.clone(), reason);
        let v = match (col.ty, src) {
            (ColumnType::Geometry, _) => read_geometry(rec, schema.srid, geom_src).map_err(fail)?,
            (ty, Some(i)) => {
                let field = &rec[*i];
                if field.is_empty() {
                    Value::Null
                } else {
                    match ty {
                        ColumnType::Number | ColumnType::Real => Value::Number(
                            field.parse::<f64>().map_err(|_| fail(format!("{field:?} is not a number")))?,
                        ),
                        ColumnType::Text => Value::Text(field.to_string()),
                        ColumnType::Timestamp => Value::Timestamp(
                            parse_timestamp(field).map_err(|e| fail(format!("bad timestamp {field:?}: {e}")))?,
                        ),
                        ColumnType::Geometry => unreachable!(),
                    }
                }
            }
            (_, None) => unreachable!("non-geometry columns always have a source"),
        };
        values.push(v);
    }
    conform_row(schema, ObservationRow::new(values)).map_err(|e| match e {
        VectorError::TypeMismatch { column, reason } => (column, reason),
        other => (String::new(), other.to_string()),
    })
}

fn read_geometry(rec: &csv::StringRecord, srid: i32, src: &GeomSource) -> Result<Value, String> {
    let p = match *src {
        GeomSource::Wkt(i) => Point::from_wkt(&rec[i], srid).map_err(|e| e.to_string())?,
        GeomSource::Xy(xi, yi) => {
            let num = |s: &str| s.parse::<f64>().map_err(|_| format!("{s:?} is not a coordinate"));
            Point::new(num(&rec[xi])?, num(&rec[yi])?, srid).map_err(|e| e.to_string())?
        }
    };
    Ok(Value::Geometry(Geometry::Point(p)))
}
