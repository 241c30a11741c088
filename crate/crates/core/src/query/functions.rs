//! Builtin SQL functions.

use crate::algebra::tile_accumulator;
use crate::codecs::{encode_geotiff, encode_png, Grid};
use crate::geom::{buffer_point, Circle, Envelope, Geometry, Point};
use crate::raster::{world_to_cell, TileRef};
use crate::value::{GeomVal, Value, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    StValue,
    StIntersects,
    StIntersection,
    StSummaryStats,
    StBuffer,
    StAsBinary,
    StAsText,
    StAsGeoTiff,
    StAsPng,
    StAsGml,
    StMakeEnvelope,
    Pow,
}

pub const ALL: &[Func] = &[
    Func::StValue,
    Func::StIntersects,
    Func::StIntersection,
    Func::StSummaryStats,
    Func::StBuffer,
    Func::StAsBinary,
    Func::StAsText,
    Func::StAsGeoTiff,
    Func::StAsPng,
    Func::StAsGml,
    Func::StMakeEnvelope,
    Func::Pow,
];

impl Func {
    pub fn lookup(name: &str) -> Option<Func> {
        ALL.iter().copied().find(|f| f.name().eq_ignore_ascii_case(name))
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::StValue => "ST_Value",
            Func::StIntersects => "ST_Intersects",
            Func::StIntersection => "ST_Intersection",
            Func::StSummaryStats => "ST_SummaryStats",
            Func::StBuffer => "ST_Buffer",
            Func::StAsBinary => "ST_AsBinary",
            Func::StAsText => "ST_AsText",
            Func::StAsGeoTiff => "ST_AsGeoTIFF",
            Func::StAsPng => "ST_AsPNG",
            Func::StAsGml => "ST_AsGML",
            Func::StMakeEnvelope => "ST_MakeEnvelope",
            Func::Pow => "pow",
        }
    }

    /// Accepted argument counts, inclusive.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::StValue => (2, 3),
            Func::StIntersects | Func::StIntersection | Func::StBuffer | Func::Pow => (2, 2),
            Func::StSummaryStats | Func::StAsGeoTiff | Func::StAsPng => (1, 2),
            Func::StAsBinary | Func::StAsText | Func::StAsGml => (1, 1),
            Func::StMakeEnvelope => (5, 5),
        }
    }

    pub fn signature(self) -> &'static str {
        match self {
            Func::StValue => "ST_Value(raster, point [, band]) -> number",
            Func::StIntersects => "ST_Intersects(raster|geometry, geometry|raster) -> boolean",
            Func::StIntersection => "ST_Intersection(raster, point) -> geomval",
            Func::StSummaryStats => "ST_SummaryStats(raster [, band]) -> summarystats",
            Func::StBuffer => "ST_Buffer(point, radius) -> geometry",
            Func::StAsBinary => "ST_AsBinary(point) -> bytea",
            Func::StAsText => "ST_AsText(geometry) -> text",
            Func::StAsGeoTiff => "ST_AsGeoTIFF(raster [, band]) -> image/tiff",
            Func::StAsPng => "ST_AsPNG(raster [, band]) -> image/png",
            Func::StAsGml => "ST_AsGML(value) -> application/gml+xml",
            Func::StMakeEnvelope => "ST_MakeEnvelope(xmin, ymin, xmax, ymax, srid) -> envelope",
            Func::Pow => "pow(number, number) -> number",
        }
    }

    pub fn return_kind(self, args: &[ValueKind]) -> ValueKind {
        match self {
            Func::StValue | Func::Pow => ValueKind::Number,
            Func::StIntersects => ValueKind::Bool,
            Func::StIntersection => ValueKind::GeomVal,
            Func::StSummaryStats => ValueKind::Stats,
            Func::StBuffer => ValueKind::Geometry,
            Func::StAsBinary | Func::StAsGeoTiff | Func::StAsPng => ValueKind::Bytes,
            Func::StAsText => ValueKind::Text,
            Func::StAsGml => args.first().copied().unwrap_or(ValueKind::Null),
            Func::StMakeEnvelope => ValueKind::Envelope,
        }
    }

    /// Whether every Null argument yields Null without calling the function.
    fn strict(self) -> bool {
        self != Func::StAsGml
    }
}

/// Failure inside a builtin; the executor attaches the query position.
#[derive(Debug, Clone, PartialEq)]
pub enum CallError {
    Type(String),
    Runtime(String),
}

fn type_err(func: Func, args: &[Value]) -> CallError {
    let kinds: Vec<String> = args.iter().map(|a| a.kind().to_string()).collect();
    CallError::Type(format!("{} does not accept ({})", func.name(), kinds.join(", ")))
}

fn runtime<E: std::fmt::Display>(e: E) -> CallError {
    CallError::Runtime(e.to_string())
}

fn band_arg(func: Func, args: &[Value], at: usize) -> Result<u32, CallError> {
    match args.get(at) {
        None => Ok(1),
        Some(v) => match v.as_f64() {
            Some(b) if b >= 1.0 && b.fract() == 0.0 && b <= u32::MAX as f64 => Ok(b as u32),
            Some(b) => Err(CallError::Runtime(format!("{}: band {b} is not a positive integer", func.name()))),
            None => Err(type_err(func, args)),
        },
    }
}

/// Value of the cell under `p` when that cell belongs to `tile`.
fn tile_value(tile: &TileRef, band: u32, p: &Point) -> Result<Option<f64>, CallError> {
    let cov = &tile.coverage;
    crate::geom::check_srid(cov.meta.srid, p.srid).map_err(runtime)?;
    cov.band_meta(band).map_err(runtime)?;
    match world_to_cell(&cov.meta.geotransform, p, cov.meta.width, cov.meta.height) {
        Some((c, r)) if tile.owns_cell(c, r) => cov.read_cell(band, c, r).map_err(runtime),
        _ => Ok(None),
    }
}

fn rect_circle_intersects(env: &Envelope, c: &Circle) -> bool {
    let dx = (env.min_x - c.center.x).max(0.0).max(c.center.x - env.max_x);
    let dy = (env.min_y - c.center.y).max(0.0).max(c.center.y - env.max_y);
    dx * dx + dy * dy <= c.radius * c.radius
}

fn raster_intersects(tile: &TileRef, g: &Geometry) -> Result<bool, CallError> {
    match g {
        Geometry::Point(p) => Ok(tile_value(tile, 1, p)?.is_some()),
        Geometry::Circle(c) => {
            crate::geom::check_srid(tile.coverage.meta.srid, c.center.srid).map_err(runtime)?;
            Ok(rect_circle_intersects(&tile.footprint(), c))
        }
    }
}

fn geometries_intersect(a: &Geometry, b: &Geometry) -> Result<bool, CallError> {
    crate::geom::check_srid(a.srid(), b.srid()).map_err(runtime)?;
    Ok(match (a, b) {
        (Geometry::Point(p), Geometry::Point(q)) => p.x == q.x && p.y == q.y,
        (Geometry::Point(p), Geometry::Circle(c)) | (Geometry::Circle(c), Geometry::Point(p)) => c.contains_xy(p.x, p.y),
        (Geometry::Circle(c), Geometry::Circle(d)) => {
            (c.center.x - d.center.x).hypot(c.center.y - d.center.y) <= c.radius + d.radius
        }
    })
}

fn tile_grid(tile: &TileRef, band: u32) -> Result<Grid, CallError> {
    let cov = &tile.coverage;
    let bmeta = cov.band_meta(band).map_err(runtime)?;
    let w = cov.tile_window(band, tile.tile_col, tile.tile_row).map_err(runtime)?;
    Ok(Grid {
        width: w.width,
        height: w.height,
        cells: w.cells,
        geotransform: w.geotransform,
        srid: cov.meta.srid,
        nodata: bmeta.nodata,
    })
}

pub fn call(func: Func, args: &[Value]) -> Result<Value, CallError> {
    if func.strict() && args.iter().any(Value::is_null) {
        return Ok(Value::Null);
    }
    let bad = || type_err(func, args);
    Ok(match func {
        Func::StValue => match (&args[0], &args[1]) {
            (Value::Raster(t), Value::Geometry(Geometry::Point(p))) => {
                let band = band_arg(func, args, 2)?;
                tile_value(t, band, p)?.map_or(Value::Null, Value::Number)
            }
            _ => return Err(bad()),
        },
        Func::StIntersects => match (&args[0], &args[1]) {
            (Value::Raster(t), Value::Geometry(g)) | (Value::Geometry(g), Value::Raster(t)) => {
                Value::Bool(raster_intersects(t, g)?)
            }
            (Value::Geometry(a), Value::Geometry(b)) => Value::Bool(geometries_intersect(a, b)?),
            _ => return Err(bad()),
        },
        Func::StIntersection => match (&args[0], &args[1]) {
            (Value::Raster(t), Value::Geometry(Geometry::Point(p))) | (Value::Geometry(Geometry::Point(p)), Value::Raster(t)) => {
                tile_value(t, 1, p)?.map_or(Value::Null, |val| Value::GeomVal(GeomVal { geom: *p, val }))
            }
            _ => return Err(bad()),
        },
        Func::StSummaryStats => match &args[0] {
            Value::Raster(t) => {
                let band = band_arg(func, args, 1)?;
                let acc = tile_accumulator(&t.coverage, band, t.tile_col, t.tile_row).map_err(runtime)?;
                Value::Stats(acc.finish())
            }
            _ => return Err(bad()),
        },
        Func::StBuffer => match (&args[0], args[1].as_f64()) {
            (Value::Geometry(Geometry::Point(p)), Some(r)) => Value::Geometry(Geometry::Circle(buffer_point(*p, r).map_err(runtime)?)),
            _ => return Err(bad()),
        },
        Func::StAsBinary => match &args[0] {
            Value::Geometry(Geometry::Point(p)) => Value::Bytes(p.to_wkb()),
            Value::Geometry(Geometry::Circle(_)) => {
                return Err(CallError::Runtime("ST_AsBinary: circles have no WKB encoding".into()))
            }
            _ => return Err(bad()),
        },
        Func::StAsText => match &args[0] {
            Value::Geometry(g) => Value::Text(g.to_wkt()),
            _ => return Err(bad()),
        },
        Func::StAsGeoTiff | Func::StAsPng => match &args[0] {
            Value::Raster(t) => {
                let grid = tile_grid(t, band_arg(func, args, 1)?)?;
                let payload = if func == Func::StAsPng { encode_png(&grid) } else { encode_geotiff(&grid) };
                Value::Bytes(payload.map_err(runtime)?.bytes)
            }
            _ => return Err(bad()),
        },
        Func::StAsGml => args[0].clone(),
        Func::StMakeEnvelope => {
            let nums: Option<Vec<f64>> = args.iter().map(Value::as_f64).collect();
            let n = nums.ok_or_else(bad)?;
            if n[4].fract() != 0.0 || n[4].abs() > i32::MAX as f64 {
                return Err(CallError::Runtime(format!("ST_MakeEnvelope: srid {} is not an integer", n[4])));
            }
            Value::Envelope(Envelope::new(n[0], n[1], n[2], n[3], n[4] as i32).map_err(runtime)?)
        }
        Func::Pow => match (args[0].as_f64(), args[1].as_f64()) {
            (Some(a), Some(b)) => Value::Number(a.powf(b)).normalized(),
            _ => return Err(bad()),
        },
    })
}
