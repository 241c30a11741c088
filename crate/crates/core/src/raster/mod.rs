//! Tiled, georeferenced, multiband raster coverages.
//!
//! A coverage is published as an immutable [`Coverage`] snapshot behind an
//! `Arc`; `write_grid` builds a complete new snapshot and swaps it in, so a
//! reader holding the old `Arc` never observes a half-written grid.

mod tile_file;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{check_srid, Envelope, GeomError, Point};
use crate::value::Timestamp;

pub use tile_file::{decode_tile, encode_tile, TILE_HEADER_LEN, TILE_MAGIC};

pub const DEFAULT_TILE_SIZE: u32 = 256;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("coverage {0:?} already exists")]
    DuplicateName(String),
    #[error("invalid coverage metadata: {0}")]
    InvalidMeta(String),
    #[error("unknown coverage {0:?}")]
    UnknownCoverage(String),
    #[error("coverage {coverage:?} has no band {band}")]
    UnknownBand { coverage: String, band: u32 },
    #[error("band exists: coverage {coverage:?} already has band {band}")]
    BandExists { coverage: String, band: u32 },
    #[error("expected {expected} cells, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("cell ({col}, {row}) is outside the grid")]
    OutOfRange { col: i64, row: i64 },
    #[error("tile ({tile_col}, {tile_row}) is outside the tile grid")]
    UnknownTile { tile_col: u32, tile_row: u32 },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("corrupt tile file {path}: {reason}")]
    CorruptTile { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RasterError + '_ {
    move |source| RasterError::Io { path: path.to_path_buf(), source }
}

/// Axis-aligned affine grid mapping. `dy` is negative for north-up grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
}

impl GeoTransform {
    pub fn new(x0: f64, y0: f64, dx: f64, dy: f64) -> Self {
        GeoTransform { x0, y0, dx, dy }
    }

    pub fn validate(&self) -> Result<(), String> {
        if ![self.x0, self.y0, self.dx, self.dy].iter().all(|v| v.is_finite()) {
            return Err("geotransform terms must be finite".into());
        }
        if !(self.dx > 0.0) {
            return Err(format!("dx must be > 0, got {}", self.dx));
        }
        if self.dy == 0.0 {
            return Err("dy must be non-zero".into());
        }
        Ok(())
    }

    /// Unbounded cell index under the floor convention.
    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        let col = ((x - self.x0) / self.dx).floor();
        let row = ((y - self.y0) / self.dy).floor();
        (saturate(col), saturate(row))
    }

    /// Cell owning `(x, y)`, or `None` outside `width × height`. Right and
    /// bottom outer edges belong to no cell.
    pub fn world_to_cell(&self, x: f64, y: f64, width: u32, height: u32) -> Option<(u32, u32)> {
        let (col, row) = self.cell_of(x, y);
        if (0..width as i64).contains(&col) && (0..height as i64).contains(&row) {
            Some((col as u32, row as u32))
        } else {
            None
        }
    }

    pub fn cell_to_world_center(&self, col: u32, row: u32) -> (f64, f64) {
        (self.x0 + (col as f64 + 0.5) * self.dx, self.y0 + (row as f64 + 0.5) * self.dy)
    }

    /// World box covered by cells `[c0, c1) × [r0, r1)`.
    pub fn footprint(&self, c0: u32, r0: u32, c1: u32, r1: u32, srid: i32) -> Envelope {
        let xa = self.x0 + c0 as f64 * self.dx;
        let xb = self.x0 + c1 as f64 * self.dx;
        let ya = self.y0 + r0 as f64 * self.dy;
        let yb = self.y0 + r1 as f64 * self.dy;
        Envelope { min_x: xa.min(xb), min_y: ya.min(yb), max_x: xa.max(xb), max_y: ya.max(yb), srid }
    }
}

fn saturate(v: f64) -> i64 {
    if v.is_nan() {
        i64::MIN
    } else {
        v as i64
    }
}

pub fn world_to_cell(gt: &GeoTransform, p: &Point, width: u32, height: u32) -> Option<(u32, u32)> {
    gt.world_to_cell(p.x, p.y, width, height)
}

/// Center of cell `(col, row)`; errors when the cell is outside the grid.
pub fn cell_to_world_center(
    gt: &GeoTransform,
    col: u32,
    row: u32,
    width: u32,
    height: u32,
    srid: i32,
) -> Result<Point, RasterError> {
    if col >= width || row >= height {
        return Err(RasterError::OutOfRange { col: col as i64, row: row as i64 });
    }
    let (x, y) = gt.cell_to_world_center(col, row);
    Ok(Point::new(x, y, srid)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelType {
    Float32,
    Float64,
}

impl PixelType {
    pub fn code(self) -> u8 {
        match self {
            PixelType::Float32 => 1,
            PixelType::Float64 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(PixelType::Float32),
            2 => Some(PixelType::Float64),
            _ => None,
        }
    }

    pub fn sample_bytes(self) -> usize {
        match self {
            PixelType::Float32 => 4,
            PixelType::Float64 => 8,
        }
    }

    /// Rounds a value to what this pixel type can hold.
    pub fn quantize(self, v: f64) -> f64 {
        match self {
            PixelType::Float32 => v as f32 as f64,
            PixelType::Float64 => v,
        }
    }
}

impl std::str::FromStr for PixelType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "float32" | "f32" => Ok(PixelType::Float32),
            "float64" | "f64" => Ok(PixelType::Float64),
            other => Err(format!("unknown pixel type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMeta {
    pub index: u32,
    pub nodata: Option<f64>,
    pub pixel_type: PixelType,
}

impl BandMeta {
    /// True when `v` is this band's NoData. NaN is always NoData; otherwise
    /// the sentinel is compared bitwise.
    pub fn is_nodata(&self, v: f64) -> bool {
        if v.is_nan() {
            return true;
        }
        matches!(self.nodata, Some(nd) if nd.to_bits() == v.to_bits())
    }

    fn fill_value(&self) -> f64 {
        self.nodata.unwrap_or(f64::NAN)
    }
}

/// Metadata of one remote-sensor raster coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterCoverageMeta {
    pub name: String,
    pub srid: i32,
    pub geotransform: GeoTransform,
    pub width: u32,
    pub height: u32,
    pub bands: Vec<BandMeta>,
    pub tile_size: u32,
    pub acquired_at: Timestamp,
    pub sensor_id: String,
}

impl RasterCoverageMeta {
    pub fn validate(&self) -> Result<(), RasterError> {
        let bad = |m: String| Err(RasterError::InvalidMeta(m));
        if !is_identifier(&self.name) {
            return bad(format!("name {:?} is not an identifier", self.name));
        }
        if self.srid <= 0 {
            return bad(format!("srid must be > 0, got {}", self.srid));
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("width and height must be > 0, got {}x{}", self.width, self.height));
        }
        if self.tile_size == 0 || self.tile_size > u16::MAX as u32 {
            return bad(format!("tile_size must be in 1..=65535, got {}", self.tile_size));
        }
        if self.bands.is_empty() {
            return bad("at least one band is required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.bands {
            if b.index == 0 {
                return bad("band indexes are 1-based".into());
            }
            if !seen.insert(b.index) {
                return bad(format!("duplicate band index {}", b.index));
            }
            if matches!(b.nodata, Some(nd) if nd.is_nan()) {
                return bad(format!("band {} nodata sentinel must not be NaN", b.index));
            }
        }
        self.geotransform.validate().map_err(RasterError::InvalidMeta)
    }

    pub fn tiles_x(&self) -> u32 {
        self.width.div_ceil(self.tile_size)
    }

    pub fn tiles_y(&self) -> u32 {
        self.height.div_ceil(self.tile_size)
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_x() as usize * self.tiles_y() as usize
    }

    pub fn band(&self, index: u32) -> Option<&BandMeta> {
        self.bands.iter().find(|b| b.index == index)
    }

    pub fn extent(&self) -> Envelope {
        self.geotransform.footprint(0, 0, self.width, self.height, self.srid)
    }

    /// Cell window `[c0, c1) × [r0, r1)` of a tile, clipped to the grid.
    pub fn tile_window(&self, tile_col: u32, tile_row: u32) -> (u32, u32, u32, u32) {
        let ts = self.tile_size;
        let c0 = tile_col * ts;
        let r0 = tile_row * ts;
        (c0, r0, (c0 + ts).min(self.width), (r0 + ts).min(self.height))
    }

    /// World footprint of a tile, clipped to the coverage extent.
    pub fn tile_footprint(&self, tile_col: u32, tile_row: u32) -> Envelope {
        let (c0, r0, c1, r1) = self.tile_window(tile_col, tile_row);
        self.geotransform.footprint(c0, r0, c1, r1, self.srid)
    }

    fn check_tile(&self, tile_col: u32, tile_row: u32) -> Result<(), RasterError> {
        if tile_col >= self.tiles_x() || tile_row >= self.tiles_y() {
            return Err(RasterError::UnknownTile { tile_col, tile_row });
        }
        Ok(())
    }
}

/// A name the query language can reference unquoted.
pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !crate::query::lexer::is_keyword(&s.to_ascii_lowercase())
}

/// Tile-major storage for one band. Missing tiles were never written.
#[derive(Debug, Clone, Default)]
pub struct BandGrid {
    tiles: Vec<Option<Arc<[f64]>>>,
}

/// Immutable snapshot of a coverage: metadata plus every band's tiles.
#[derive(Debug)]
pub struct Coverage {
    pub meta: RasterCoverageMeta,
    grids: Vec<BandGrid>,
}

/// One tile of a coverage snapshot, the row unit of a raster table scan.
#[derive(Debug, Clone)]
pub struct TileRef {
    pub coverage: Arc<Coverage>,
    pub tile_col: u32,
    pub tile_row: u32,
}

impl TileRef {
    pub fn footprint(&self) -> Envelope {
        self.coverage.meta.tile_footprint(self.tile_col, self.tile_row)
    }

    /// Whether the cell at `(col, row)` belongs to this tile.
    pub fn owns_cell(&self, col: u32, row: u32) -> bool {
        let ts = self.coverage.meta.tile_size;
        col / ts == self.tile_col && row / ts == self.tile_row
    }
}

/// Clipped cells of one tile plus the geotransform of its upper-left cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWindow {
    pub width: u32,
    pub height: u32,
    pub geotransform: GeoTransform,
    pub cells: Vec<f64>,
}

impl Coverage {
    fn empty(meta: RasterCoverageMeta) -> Self {
        let grids = meta.bands.iter().map(|_| BandGrid { tiles: vec![None; meta.tile_count()] }).collect();
        Coverage { meta, grids }
    }

    fn band_pos(&self, band: u32) -> Result<usize, RasterError> {
        self.meta
            .bands
            .iter()
            .position(|b| b.index == band)
            .ok_or_else(|| RasterError::UnknownBand { coverage: self.meta.name.clone(), band })
    }

    pub fn band_meta(&self, band: u32) -> Result<&BandMeta, RasterError> {
        Ok(&self.meta.bands[self.band_pos(band)?])
    }

    fn tile_index(&self, tile_col: u32, tile_row: u32) -> usize {
        tile_row as usize * self.meta.tiles_x() as usize + tile_col as usize
    }

    /// Raw stored samples of a tile (`tile_size²`, padded), if ever written.
    pub fn tile_cells(&self, band: u32, tile_col: u32, tile_row: u32) -> Result<Option<&[f64]>, RasterError> {
        let pos = self.band_pos(band)?;
        self.meta.check_tile(tile_col, tile_row)?;
        Ok(self.grids[pos].tiles[self.tile_index(tile_col, tile_row)].as_deref())
    }

    /// Raw sample at a cell; NaN for never-written tiles.
    fn raw_cell(&self, pos: usize, col: u32, row: u32) -> f64 {
        let ts = self.meta.tile_size;
        let idx = self.tile_index(col / ts, row / ts);
        match &self.grids[pos].tiles[idx] {
            Some(cells) => cells[((row % ts) * ts + col % ts) as usize],
            None => f64::NAN,
        }
    }

    /// Stored value, or `None` for NoData.
    pub fn read_cell(&self, band: u32, col: u32, row: u32) -> Result<Option<f64>, RasterError> {
        let pos = self.band_pos(band)?;
        if col >= self.meta.width || row >= self.meta.height {
            return Err(RasterError::OutOfRange { col: col as i64, row: row as i64 });
        }
        let v = self.raw_cell(pos, col, row);
        Ok((!self.meta.bands[pos].is_nodata(v)).then_some(v))
    }

    /// Value under a world position, or `None` when outside or NoData.
    pub fn value_at(&self, band: u32, p: &Point) -> Result<Option<f64>, RasterError> {
        check_srid(self.meta.srid, p.srid)?;
        let pos = self.band_pos(band)?;
        Ok(match world_to_cell(&self.meta.geotransform, p, self.meta.width, self.meta.height) {
            Some((c, r)) => {
                let v = self.raw_cell(pos, c, r);
                (!self.meta.bands[pos].is_nodata(v)).then_some(v)
            }
            None => None,
        })
    }

    /// Raw samples of a cell window, row-major; never-written cells come
    /// back as the band's NoData sentinel (NaN without one).
    pub fn read_window(&self, band: u32, c0: u32, r0: u32, c1: u32, r1: u32) -> Result<Vec<f64>, RasterError> {
        let pos = self.band_pos(band)?;
        if c1 > self.meta.width || r1 > self.meta.height || c0 > c1 || r0 > r1 {
            return Err(RasterError::OutOfRange { col: c1 as i64, row: r1 as i64 });
        }
        let fill = self.meta.bands[pos].fill_value();
        let mut out = Vec::with_capacity(((c1 - c0) * (r1 - r0)) as usize);
        for row in r0..r1 {
            for col in c0..c1 {
                let v = self.raw_cell(pos, col, row);
                out.push(if v.is_nan() { fill } else { v });
            }
        }
        Ok(out)
    }

    /// The clipped cells of one tile with their own geotransform.
    pub fn tile_window(&self, band: u32, tile_col: u32, tile_row: u32) -> Result<GridWindow, RasterError> {
        self.meta.check_tile(tile_col, tile_row)?;
        let (c0, r0, c1, r1) = self.meta.tile_window(tile_col, tile_row);
        let gt = self.meta.geotransform;
        Ok(GridWindow {
            width: c1 - c0,
            height: r1 - r0,
            geotransform: GeoTransform::new(gt.x0 + c0 as f64 * gt.dx, gt.y0 + r0 as f64 * gt.dy, gt.dx, gt.dy),
            cells: self.read_window(band, c0, r0, c1, r1)?,
        })
    }

    /// Exactly the tiles whose clipped footprint overlaps `env`.
    pub fn tiles_overlapping(&self, env: &Envelope) -> Result<Vec<(u32, u32)>, RasterError> {
        check_srid(self.meta.srid, env.srid)?;
        let m = &self.meta;
        let gt = &m.geotransform;
        let ts = m.tile_size as i64;
        // candidate index range by arithmetic, widened by one tile and then
        // filtered with the exact closed-box test
        let (ca, ra) = gt.cell_of(env.min_x, env.min_y);
        let (cb, rb) = gt.cell_of(env.max_x, env.max_y);
        let clamp = |v: i64, n: u32| v.clamp(0, n as i64 - 1) as u32;
        let tc0 = clamp(ca.min(cb).saturating_div(ts) - 1, m.tiles_x());
        let tc1 = clamp(ca.max(cb).saturating_div(ts) + 1, m.tiles_x());
        let tr0 = clamp(ra.min(rb).saturating_div(ts) - 1, m.tiles_y());
        let tr1 = clamp(ra.max(rb).saturating_div(ts) + 1, m.tiles_y());
        let mut out = Vec::new();
        for tr in tr0..=tr1 {
            for tc in tc0..=tc1 {
                if m.tile_footprint(tc, tr).overlaps_unchecked(env) {
                    out.push((tc, tr));
                }
            }
        }
        Ok(out)
    }

    pub fn tile_refs(self: &Arc<Self>) -> impl Iterator<Item = TileRef> + '_ {
        let tx = self.meta.tiles_x();
        (0..self.meta.tiles_y()).flat_map(move |tr| {
            (0..tx).map(move |tc| TileRef { coverage: Arc::clone(self), tile_col: tc, tile_row: tr })
        })
    }

    /// Number of tiles that hold data in any band.
    pub fn written_tiles(&self) -> usize {
        (0..self.meta.tile_count())
            .filter(|&i| self.grids.iter().any(|g| g.tiles[i].is_some()))
            .count()
    }
}

/// Raster side of the catalog. Tile files live under `<root>/rasters` when
/// the store is backed by a directory.
#[derive(Debug, Default)]
pub struct RasterStore {
    root: Option<PathBuf>,
    coverages: RwLock<BTreeMap<String, Arc<Coverage>>>,
}

impl RasterStore {
    pub fn in_memory() -> Self {
        RasterStore::default()
    }

    pub(crate) fn with_root(root: &Path) -> Self {
        RasterStore { root: Some(root.to_path_buf()), coverages: RwLock::default() }
    }

    fn band_dir(&self, name: &str, band: u32) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join("rasters").join(name).join(band.to_string()))
    }

    /// Registers a coverage from persisted metadata and loads its tiles.
    pub(crate) fn load(&self, meta: RasterCoverageMeta) -> Result<(), RasterError> {
        let mut cov = Coverage::empty(meta);
        for (pos, band) in cov.meta.bands.clone().iter().enumerate() {
            let Some(dir) = self.band_dir(&cov.meta.name, band.index) else { continue };
            if !dir.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
                let path = entry.map_err(io_err(&dir))?.path();
                let Some((tc, tr)) = parse_tile_name(&path) else { continue };
                if cov.meta.check_tile(tc, tr).is_err() {
                    return Err(RasterError::CorruptTile { path, reason: "tile index outside the grid".into() });
                }
                let bytes = fs::read(&path).map_err(io_err(&path))?;
                let (ts, pt, cells) =
                    decode_tile(&bytes).map_err(|reason| RasterError::CorruptTile { path: path.clone(), reason })?;
                if ts != cov.meta.tile_size || pt != band.pixel_type {
                    return Err(RasterError::CorruptTile { path, reason: "header disagrees with catalog".into() });
                }
                let idx = cov.tile_index(tc, tr);
                cov.grids[pos].tiles[idx] = Some(cells.into());
            }
        }
        self.coverages.write().expect("raster lock").insert(cov.meta.name.clone(), Arc::new(cov));
        Ok(())
    }

    pub fn create_coverage(&self, meta: RasterCoverageMeta) -> Result<(), RasterError> {
        meta.validate()?;
        let mut meta = meta;
        for b in &mut meta.bands {
            b.nodata = b.nodata.map(|nd| b.pixel_type.quantize(nd));
        }
        let mut map = self.coverages.write().expect("raster lock");
        if map.contains_key(&meta.name) {
            return Err(RasterError::DuplicateName(meta.name));
        }
        map.insert(meta.name.clone(), Arc::new(Coverage::empty(meta)));
        Ok(())
    }

    pub fn add_band(&self, name: &str, band: BandMeta) -> Result<(), RasterError> {
        let mut map = self.coverages.write().expect("raster lock");
        let cov = map.get(name).ok_or_else(|| RasterError::UnknownCoverage(name.into()))?;
        if cov.meta.band(band.index).is_some() {
            return Err(RasterError::BandExists { coverage: name.into(), band: band.index });
        }
        let mut meta = cov.meta.clone();
        let mut band = band;
        band.nodata = band.nodata.map(|nd| band.pixel_type.quantize(nd));
        meta.bands.push(band);
        meta.validate()?;
        let mut grids = cov.grids.clone();
        grids.push(BandGrid { tiles: vec![None; meta.tile_count()] });
        map.insert(name.into(), Arc::new(Coverage { meta, grids }));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<Coverage>, RasterError> {
        self.coverages
            .read()
            .expect("raster lock")
            .get(name)
            .cloned()
            .ok_or_else(|| RasterError::UnknownCoverage(name.into()))
    }

    pub fn get_meta(&self, name: &str) -> Result<RasterCoverageMeta, RasterError> {
        Ok(self.get(name)?.meta.clone())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.coverages.read().expect("raster lock").contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.coverages.read().expect("raster lock").keys().cloned().collect()
    }

    pub fn metas(&self) -> Vec<RasterCoverageMeta> {
        self.coverages.read().expect("raster lock").values().map(|c| c.meta.clone()).collect()
    }

    /// Splits a full row-major grid into tiles, persists them, then publishes
    /// the new snapshot.
    pub fn write_grid(&self, name: &str, band: u32, cells: &[f64]) -> Result<(), RasterError> {
        let cov = self.get(name)?;
        let pos = cov.band_pos(band)?;
        let meta = &cov.meta;
        let expected = meta.width as usize * meta.height as usize;
        if cells.len() != expected {
            return Err(RasterError::LengthMismatch { expected, actual: cells.len() });
        }
        let bmeta = &meta.bands[pos];
        let ts = meta.tile_size as usize;
        let fill = bmeta.fill_value();
        let mut tiles = Vec::with_capacity(meta.tile_count());
        for tr in 0..meta.tiles_y() {
            for tc in 0..meta.tiles_x() {
                let (c0, r0, c1, r1) = meta.tile_window(tc, tr);
                let mut buf = vec![fill; ts * ts];
                for row in r0..r1 {
                    let src = row as usize * meta.width as usize;
                    let dst = (row - r0) as usize * ts;
                    for col in c0..c1 {
                        buf[dst + (col - c0) as usize] = bmeta.pixel_type.quantize(cells[src + col as usize]);
                    }
                }
                tiles.push(Some(Arc::<[f64]>::from(buf)));
            }
        }
        if let Some(dir) = self.band_dir(name, band) {
            persist_band(&dir, meta, bmeta.pixel_type, &tiles)?;
        }
        let mut grids = cov.grids.clone();
        grids[pos] = BandGrid { tiles };
        let next = Arc::new(Coverage { meta: meta.clone(), grids });
        self.coverages.write().expect("raster lock").insert(name.into(), next);
        Ok(())
    }

    pub fn read_cell(&self, name: &str, band: u32, col: u32, row: u32) -> Result<Option<f64>, RasterError> {
        self.get(name)?.read_cell(band, col, row)
    }

    pub fn tiles_overlapping(&self, name: &str, band: u32, env: &Envelope) -> Result<Vec<(u32, u32)>, RasterError> {
        let cov = self.get(name)?;
        cov.band_pos(band)?;
        cov.tiles_overlapping(env)
    }
}

fn parse_tile_name(path: &Path) -> Option<(u32, u32)> {
    let stem = path.file_name()?.to_str()?.strip_suffix(".tile")?;
    let (a, b) = stem.split_once('_')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Writes every tile into a sibling staging directory, then renames it over
/// the band directory.
fn persist_band(
    dir: &Path,
    meta: &RasterCoverageMeta,
    pixel_type: PixelType,
    tiles: &[Option<Arc<[f64]>>],
) -> Result<(), RasterError> {
    let parent = dir.parent().expect("band dir has a parent");
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    let leaf = dir.file_name().and_then(|s| s.to_str()).unwrap_or("band");
    let staging = parent.join(format!(".{leaf}.staging"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(io_err(&staging))?;
    let tx = meta.tiles_x();
    for (i, tile) in tiles.iter().enumerate() {
        let Some(cells) = tile else { continue };
        let (tc, tr) = (i as u32 % tx, i as u32 / tx);
        let path = staging.join(format!("{tc}_{tr}.tile"));
        fs::write(&path, encode_tile(meta.tile_size as u16, pixel_type, cells)).map_err(io_err(&path))?;
    }
    if dir.exists() {
        let old = parent.join(format!(".{leaf}.old"));
        fs::rename(dir, &old).map_err(io_err(dir))?;
        fs::rename(&staging, dir).map_err(io_err(dir))?;
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    } else {
        fs::rename(&staging, dir).map_err(io_err(dir))?;
    }
    Ok(())
}
