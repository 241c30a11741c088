//! Request-independent operations shared by the HTTP routes and the CLI.

use geosensor_core::catalog::Database;
use geosensor_core::codecs::{encode_csv, encode_geotiff, encode_result, EncodedPayload, Grid};
use geosensor_core::query::{self, ResultSet};
use geosensor_core::raster::RasterCoverageMeta;
use geosensor_core::value::{format_f64, format_timestamp, parse_timestamp};
use geosensor_core::vector::{read_table, ColumnType};
use geosensor_core::Timestamp;

use crate::ApiError;

/// Runs query text and encodes the result per its delivery format.
pub fn handle_query(db: &Database, q: &str) -> Result<EncodedPayload, ApiError> {
    if q.trim().is_empty() {
        return Err(ApiError::bad_request("missing_query", "query text is empty"));
    }
    let rs = query::run(db, q)?;
    Ok(encode_result(&rs)?)
}

/// Closed `minx,miny,maxx,maxy` rectangle in the object's own SRID.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl std::str::FromStr for Bbox {
    type Err = ApiError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ApiError::bad_request("bad_bbox", format!("bbox must be minx,miny,maxx,maxy, got {s:?}"));
        let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let [min_x, min_y, max_x, max_y] = v[..] else { return Err(bad()) };
        if !v.iter().all(|x| x.is_finite()) || min_x > max_x || min_y > max_y {
            return Err(bad());
        }
        Ok(Bbox { min_x, min_y, max_x, max_y })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationFilter {
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
    pub bbox: Option<Bbox>,
}

impl ObservationFilter {
    /// Builds a filter from `from`, `to` and `bbox` query parameters.
    pub fn from_params<'a>(params: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, ApiError> {
        let mut f = ObservationFilter::default();
        let time = |v: &str| {
            parse_timestamp(v).map_err(|e| ApiError::bad_request("bad_timestamp", format!("{v:?} is not RFC 3339: {e}")))
        };
        for (k, v) in params {
            match k {
                "from" => f.from = Some(time(v)?),
                "to" => f.to = Some(time(v)?),
                "bbox" => f.bbox = Some(v.parse()?),
                other => return Err(ApiError::bad_request("bad_parameter", format!("unknown parameter {other:?}"))),
            }
        }
        if let (Some(a), Some(b)) = (f.from, f.to) {
            if a > b {
                return Err(ApiError::bad_request("bad_interval", "from is later than to"));
            }
        }
        Ok(f)
    }
}

/// The engine query equivalent to a GetObservation request.
pub fn observation_sql(db: &Database, table: &str, filter: &ObservationFilter) -> Result<String, ApiError> {
    let handle = db
        .vector()
        .table(table)
        .map_err(|_| ApiError::not_found("unknown_table", format!("no observation table {table:?}")))?;
    let schema = read_table(&handle).schema.clone();
    let cols: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let mut sql = format!("SELECT {} FROM {}", cols.join(", "), schema.name);
    let mut conds = Vec::new();
    if filter.from.is_some() || filter.to.is_some() {
        let time_col = schema
            .columns
            .iter()
            .find(|c| c.ty == ColumnType::Timestamp)
            .ok_or_else(|| ApiError::bad_request("bad_parameter", format!("table {table:?} has no timestamp column")))?;
        if let Some(t) = filter.from {
            conds.push(format!("{} >= '{}'", time_col.name, format_timestamp(&t)));
        }
        if let Some(t) = filter.to {
            conds.push(format!("{} <= '{}'", time_col.name, format_timestamp(&t)));
        }
    }
    if let Some(b) = filter.bbox {
        conds.push(format!(
            "{} && ST_MakeEnvelope({}, {}, {}, {}, {})",
            schema.geometry_column(),
            format_f64(b.min_x),
            format_f64(b.min_y),
            format_f64(b.max_x),
            format_f64(b.max_y),
            schema.srid
        ));
    }
    if !conds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&conds.join(" AND "));
    }
    sql.push_str(&format!(" ORDER BY {}", schema.key_column));
    Ok(sql)
}

pub fn get_observation(db: &Database, table: &str, filter: &ObservationFilter) -> Result<ResultSet, ApiError> {
    let sql = observation_sql(db, table, filter)?;
    query::run(db, &sql).map_err(|e| ApiError::internal(format!("observation query failed: {e}")))
}

pub fn get_observation_csv(db: &Database, table: &str, filter: &ObservationFilter) -> Result<EncodedPayload, ApiError> {
    Ok(encode_csv(&get_observation(db, table, filter)?)?)
}

/// Half-open cell window `(c0, r0, c1, r1)` of the cells whose centres lie
/// in the closed bbox, `None` when no centre does.
pub fn bbox_window(meta: &RasterCoverageMeta, bbox: &Bbox) -> Option<(u32, u32, u32, u32)> {
    let gt = meta.geotransform;
    let axis = |lo: f64, hi: f64, n: u32, centre: &dyn Fn(u32) -> f64| {
        let hits: Vec<u32> = (0..n).filter(|&i| (lo..=hi).contains(&centre(i))).collect();
        Some((*hits.first()?, *hits.last()? + 1))
    };
    let (c0, c1) = axis(bbox.min_x, bbox.max_x, meta.width, &|c| gt.x0 + (c as f64 + 0.5) * gt.dx)?;
    let (r0, r1) = axis(bbox.min_y, bbox.max_y, meta.height, &|r| gt.y0 + (r as f64 + 0.5) * gt.dy)?;
    Some((c0, r0, c1, r1))
}

/// GeoTIFF of one band, clipped to `bbox` when given.
pub fn get_coverage(db: &Database, name: &str, band: u32, bbox: Option<&Bbox>) -> Result<EncodedPayload, ApiError> {
    let cov = db
        .raster()
        .get(name)
        .map_err(|_| ApiError::not_found("unknown_coverage", format!("no coverage named {name:?}")))?;
    let meta = &cov.meta;
    let bmeta = meta
        .band(band)
        .ok_or_else(|| ApiError::not_found("unknown_band", format!("coverage {name:?} has no band {band}")))?;
    let (c0, r0, c1, r1) = match bbox {
        None => (0, 0, meta.width, meta.height),
        Some(b) => bbox_window(meta, b)
            .ok_or_else(|| ApiError::bad_request("disjoint_bbox", format!("bbox selects no cell of {name:?}")))?,
    };
    let cells = cov.read_window(band, c0, r0, c1, r1).map_err(|e| ApiError::internal(e.to_string()))?;
    let gt = meta.geotransform;
    let grid = Grid {
        width: c1 - c0,
        height: r1 - r0,
        cells,
        geotransform: geosensor_core::raster::GeoTransform::new(
            gt.x0 + c0 as f64 * gt.dx,
            gt.y0 + r0 as f64 * gt.dy,
            gt.dx,
            gt.dy,
        ),
        srid: meta.srid,
        nodata: bmeta.nodata,
    };
    Ok(encode_geotiff(&grid)?)
}
