//! Delivery encoders (CSV, GeoTIFF, PNG, GML-lite) and ingestion parsers
//! (ESRI ASCII grid, observation CSV).

pub mod asc;
pub mod csv;
pub mod geotiff;
pub mod gml;
pub mod obs_csv;
pub mod png;

use std::fmt;

use thiserror::Error;

use crate::query::{OutputFormat, ResultSet};
use crate::raster::GeoTransform;
use crate::value::Value;

pub use self::asc::{parse_asc, render_asc, AscGrid};
pub use self::csv::encode_csv;
pub use self::geotiff::{decode_geotiff, encode_geotiff};
pub use self::gml::encode_gml;
pub use self::obs_csv::{parse_obs_csv, ObsCsv, RowError};
pub use self::png::encode_png;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("unsupported TIFF: {0}")]
    UnsupportedTiff(String),
    #[error("srid {0} does not fit a GeoTIFF key")]
    UnsupportedSrid(i32),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("header error at line {line}: {key}: {reason}")]
    Header { key: String, line: usize, reason: String },
    #[error("expected {expected} cells, found {actual}")]
    CellCountMismatch { expected: usize, actual: usize },
    #[error("bad cell value {text:?} at line {line}")]
    BadCell { text: String, line: usize },
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("no {0} payload: the result has no non-null value in the image column")]
    NoPayload(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MediaType {
    Csv,
    Tiff,
    Png,
    Gml,
    OctetStream,
}

impl MediaType {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaType::Csv => "text/csv",
            MediaType::Tiff => "image/tiff",
            MediaType::Png => "image/png",
            MediaType::Gml => "application/gml+xml",
            MediaType::OctetStream => "application/octet-stream",
        }
    }
}

impl fmt::Display for MediaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPayload {
    pub media_type: MediaType,
    pub bytes: Vec<u8>,
}

/// Single-band georeferenced grid, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: u32,
    pub height: u32,
    pub cells: Vec<f64>,
    pub geotransform: GeoTransform,
    pub srid: i32,
    pub nodata: Option<f64>,
}

impl Grid {
    pub fn is_nodata(&self, v: f64) -> bool {
        v.is_nan() || matches!(self.nodata, Some(nd) if nd.to_bits() == v.to_bits())
    }

    /// Bitwise equality on every field, so NaN cells compare equal to
    /// themselves.
    pub fn bit_eq(&self, other: &Grid) -> bool {
        let bits = |g: &Grid| g.cells.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let gt = |g: &Grid| {
            let t = g.geotransform;
            [t.x0, t.y0, t.dx, t.dy].map(f64::to_bits)
        };
        self.width == other.width
            && self.height == other.height
            && self.srid == other.srid
            && self.nodata.map(f64::to_bits) == other.nodata.map(f64::to_bits)
            && gt(self) == gt(other)
            && bits(self) == bits(other)
    }
}

/// Serializes a query result according to its output format. Raster formats
/// deliver the image of the first row.
pub fn encode_result(rs: &ResultSet) -> Result<EncodedPayload, CodecError> {
    let image = |media_type: MediaType, label: &'static str| {
        let col = rs.format_column.unwrap_or(0);
        match rs.rows.first().and_then(|r| r.get(col)) {
            Some(Value::Bytes(b)) => Ok(EncodedPayload { media_type, bytes: b.clone() }),
            _ => Err(CodecError::NoPayload(label)),
        }
    };
    match rs.format {
        OutputFormat::Csv | OutputFormat::WkbInline => encode_csv(rs),
        OutputFormat::GeoTiff => image(MediaType::Tiff, "GeoTIFF"),
        OutputFormat::Png => image(MediaType::Png, "PNG"),
        OutputFormat::Gml => encode_gml(rs),
    }
}
