//! Heterogeneous geosensor database engine.
//!
//! Remote-sensor observations are stored as tiled raster coverages and
//! in-situ observations as point tables with an R-tree, side by side in one
//! catalog. A SQL-subset query engine fuses the two at the storage layer and
//! the codecs encode results as CSV, GeoTIFF, PNG or GML.

pub mod algebra;
pub mod catalog;
pub mod codecs;
pub mod geom;
pub mod ingest;
pub mod query;
pub mod raster;
pub mod sample;
pub mod value;
pub mod vector;

pub use catalog::{Database, PlatformRecord, SensorKind, SensorRecord};
pub use geom::{Circle, Envelope, Geometry, Point};
pub use value::{GeomVal, SummaryStats, Timestamp, Value};
