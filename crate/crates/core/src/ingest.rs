//! Loading ESRI ASCII grids and observation CSV files into a catalog.

use thiserror::Error;

use crate::catalog::{CatalogError, Database};
use crate::codecs::{parse_asc, parse_obs_csv, CodecError, RowError};
use crate::geom::Envelope;
use crate::raster::{BandMeta, PixelType, RasterCoverageMeta};
use crate::value::Timestamp;
use crate::vector::{TableSchema, VectorError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("{0}")]
    Mismatch(String),
    #[error("table {0:?} does not exist; give a schema to create it")]
    NoSchema(String),
}

#[derive(Debug, Clone)]
pub struct RasterLoad {
    pub coverage: String,
    pub band: u32,
    pub srid: i32,
    pub acquired_at: Timestamp,
    pub sensor_id: String,
    pub tile_size: u32,
    pub pixel_type: PixelType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterLoadReport {
    pub created: bool,
    pub tiles: usize,
    pub extent: Envelope,
}

/// Loads one band from ASC text. A new coverage is created on first load;
/// later loads add bands and must match its grid exactly.
pub fn load_raster(db: &Database, spec: &RasterLoad, asc_text: &str) -> Result<RasterLoadReport, IngestError> {
    let grid = parse_asc(asc_text)?;
    let band = BandMeta { index: spec.band, nodata: grid.nodata, pixel_type: spec.pixel_type };
    let created = match db.raster().get_meta(&spec.coverage) {
        Ok(meta) => {
            if (meta.width, meta.height, meta.geotransform, meta.srid)
                != (grid.width, grid.height, grid.geotransform, spec.srid)
            {
                return Err(IngestError::Mismatch(format!(
                    "grid does not match coverage {:?} ({}x{}, srid {})",
                    spec.coverage, meta.width, meta.height, meta.srid
                )));
            }
            db.add_band(&spec.coverage, band)?;
            false
        }
        Err(_) => {
            db.create_coverage(RasterCoverageMeta {
                name: spec.coverage.clone(),
                srid: spec.srid,
                geotransform: grid.geotransform,
                width: grid.width,
                height: grid.height,
                bands: vec![band],
                tile_size: spec.tile_size,
                acquired_at: spec.acquired_at,
                sensor_id: spec.sensor_id.clone(),
            })?;
            true
        }
    };
    db.write_grid(&spec.coverage, spec.band, &grid.cells)?;
    let meta = db.raster().get_meta(&spec.coverage).map_err(CatalogError::from)?;
    Ok(RasterLoadReport { created, tiles: meta.tile_count(), extent: meta.extent() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObsLoadReport {
    pub created: bool,
    pub accepted: usize,
    pub rejected: Vec<RowError>,
}

impl ObsLoadReport {
    /// True when the file had data rows and none was accepted.
    pub fn all_rejected(&self) -> bool {
        self.accepted == 0 && !self.rejected.is_empty()
    }
}

/// Inserts the rows of an observation CSV, creating the table from `schema`
/// when it does not exist. Bad rows are reported and skipped.
pub fn load_observations(
    db: &Database,
    table: &str,
    csv_text: &str,
    schema: Option<TableSchema>,
) -> Result<ObsLoadReport, IngestError> {
    let existing = db.vector().schema(table).ok();
    let (schema, created) = match (existing, schema) {
        (Some(have), Some(want)) => {
            let want = want.normalized();
            if have != want {
                return Err(IngestError::Mismatch(format!("schema differs from existing table {table:?}")));
            }
            (have, false)
        }
        (Some(have), None) => (have, false),
        (None, Some(want)) => (want.normalized(), true),
        (None, None) => return Err(IngestError::NoSchema(table.into())),
    };
    // validate the header before creating anything
    let parsed = parse_obs_csv(csv_text, &schema)?;
    if created {
        db.create_table(schema)?;
    }
    let mut report = ObsLoadReport { created, accepted: 0, rejected: parsed.errors };
    for (line, row) in parsed.rows {
        match db.insert_row(table, row) {
            Ok(_) => report.accepted += 1,
            Err(CatalogError::Vector(VectorError::DuplicateKey(k))) => report.rejected.push(RowError {
                line,
                column: String::new(),
                reason: format!("duplicate key {k}"),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    report.rejected.sort_by_key(|e| e.line);
    Ok(report)
}
