//! JSON documents for the catalog operations.

use geosensor_core::algebra::{st_summary_stats, StatsScope};
use geosensor_core::catalog::Database;
use geosensor_core::query::functions::ALL;
use geosensor_core::raster::RasterCoverageMeta;
use geosensor_core::value::format_timestamp;
use geosensor_core::vector::{read_table, TableSchema};
use geosensor_core::{Envelope, SensorKind, SummaryStats};
use serde_json::{json, Value};

use crate::ApiError;

fn extent_json(e: &Envelope) -> Value {
    json!([e.min_x, e.min_y, e.max_x, e.max_y])
}

fn coverage_json(m: &RasterCoverageMeta) -> Value {
    let gt = m.geotransform;
    json!({
        "name": m.name,
        "srid": m.srid,
        "width": m.width,
        "height": m.height,
        "tile_size": m.tile_size,
        "geotransform": { "x0": gt.x0, "y0": gt.y0, "dx": gt.dx, "dy": gt.dy },
        "extent": extent_json(&m.extent()),
        "bands": m.bands.iter().map(|b| json!({
            "index": b.index,
            "nodata": b.nodata,
            "pixel_type": b.pixel_type,
        })).collect::<Vec<_>>(),
        "acquired_at": format_timestamp(&m.acquired_at),
        "sensor_id": m.sensor_id,
    })
}

fn table_json(db: &Database, schema: &TableSchema) -> Result<Value, ApiError> {
    let handle = db.vector().table(&schema.name).map_err(|e| ApiError::internal(e.to_string()))?;
    let t = read_table(&handle);
    Ok(json!({
        "name": schema.name,
        "srid": schema.srid,
        "key_column": schema.key_column,
        "geometry_column": schema.geometry_column(),
        "columns": schema.columns.iter().map(|c| json!({ "name": c.name, "type": c.ty })).collect::<Vec<_>>(),
        "row_count": t.len(),
        "extent": t.extent().map(|e| extent_json(&e)),
    }))
}

fn schemas(db: &Database) -> Vec<TableSchema> {
    db.vector()
        .names()
        .into_iter()
        .filter_map(|n| db.vector().table(&n).ok())
        .map(|h| read_table(&h).schema.clone())
        .collect()
}

fn stats_json(band: u32, s: &SummaryStats) -> Value {
    let field = |v: f64| if s.count == 0 { Value::Null } else { json!(v) };
    json!({
        "band": band,
        "count": s.count,
        "sum": field(s.sum),
        "mean": field(s.mean),
        "stddev": field(s.stddev),
        "min": field(s.min),
        "max": field(s.max),
    })
}

pub fn capabilities(db: &Database) -> Result<Value, ApiError> {
    let tables = schemas(db).iter().map(|s| table_json(db, s)).collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "service": "WQS",
        "version": env!("CARGO_PKG_VERSION"),
        "coverages": db.raster().metas().iter().map(coverage_json).collect::<Vec<_>>(),
        "tables": tables,
        "sensors": db.sensors(),
        "platforms": db.platforms(),
        "functions": ALL.iter().map(|f| json!({ "name": f.name(), "signature": f.signature() })).collect::<Vec<_>>(),
    }))
}

pub fn describe_coverage(db: &Database, name: &str) -> Result<Value, ApiError> {
    let cov = db
        .raster()
        .get(name)
        .map_err(|_| ApiError::not_found("unknown_coverage", format!("no coverage named {name:?}")))?;
    let mut doc = coverage_json(&cov.meta);
    let mut stats = Vec::new();
    for b in &cov.meta.bands {
        let s = st_summary_stats(&cov, b.index, StatsScope::Whole).map_err(|e| ApiError::internal(e.to_string()))?;
        stats.push(stats_json(b.index, &s));
    }
    doc["stats"] = Value::Array(stats);
    Ok(doc)
}

pub fn describe_sensor(db: &Database, id: &str) -> Result<Value, ApiError> {
    let sensor = db.sensor(id).map_err(|_| ApiError::not_found("unknown_sensor", format!("no sensor {id:?}")))?;
    let mut doc = serde_json::to_value(&sensor).map_err(|e| ApiError::internal(e.to_string()))?;
    let linked = &sensor.linked_object;
    doc["linked"] = match sensor.kind {
        SensorKind::Remote => match db.raster().get_meta(linked) {
            Ok(m) => json!({ "coverage": coverage_json(&m) }),
            Err(_) => Value::Null,
        },
        SensorKind::InSitu => match db.vector().table(linked) {
            Ok(h) => {
                let schema = read_table(&h).schema.clone();
                json!({ "table": table_json(db, &schema)? })
            }
            Err(_) => Value::Null,
        },
    };
    Ok(doc)
}

pub fn describe_platform(db: &Database, id: &str) -> Result<Value, ApiError> {
    let platform = db.platform(id).map_err(|_| ApiError::not_found("unknown_platform", format!("no platform {id:?}")))?;
    let mut doc = serde_json::to_value(&platform).map_err(|e| ApiError::internal(e.to_string()))?;
    let sensors: Vec<String> =
        db.sensors().into_iter().filter(|s| s.platform_id == platform.platform_id).map(|s| s.sensor_id).collect();
    doc["sensors"] = json!(sensors);
    Ok(doc)
}
