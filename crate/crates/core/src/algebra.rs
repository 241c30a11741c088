//! Raster/vector fusion operations evaluated directly against coverage
//! snapshots: point sampling, intersection, summary statistics, buffered
//! weighted means and the vegetation-cover evapotranspiration formulas.

use thiserror::Error;

use crate::geom::{check_srid, Circle, GeomError, Point};
use crate::raster::{Coverage, GeoTransform, RasterError};
use crate::value::{GeomVal, StatsAccumulator, SummaryStats};

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("supersample factor must be >= 1, got {0}")]
    InvalidSupersample(u32),
    #[error("coverage {0:?} has no valid cells")]
    EmptyCoverage(String),
    #[error("invalid vegetation index range: max {max} must exceed min {min}")]
    InvalidRange { max: f64, min: f64 },
}

impl From<GeomError> for AlgebraError {
    fn from(e: GeomError) -> Self {
        AlgebraError::Raster(RasterError::Geom(e))
    }
}

/// Band value under `p`; `None` outside the extent or over NoData.
pub fn st_value(cov: &Coverage, band: u32, p: &Point) -> Result<Option<f64>, AlgebraError> {
    Ok(cov.value_at(band, p)?)
}

/// True exactly when [`st_value`] yields a value.
pub fn st_intersects(cov: &Coverage, band: u32, p: &Point) -> Result<bool, AlgebraError> {
    Ok(st_value(cov, band, p)?.is_some())
}

pub fn st_intersection(cov: &Coverage, band: u32, p: &Point) -> Result<Option<GeomVal>, AlgebraError> {
    Ok(st_value(cov, band, p)?.map(|val| GeomVal { geom: *p, val }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsScope {
    Whole,
    Tile { tile_col: u32, tile_row: u32 },
}

/// Accumulates the valid cells of one tile.
pub fn tile_accumulator(cov: &Coverage, band: u32, tile_col: u32, tile_row: u32) -> Result<StatsAccumulator, AlgebraError> {
    let bmeta = cov.band_meta(band)?;
    let mut acc = StatsAccumulator::default();
    let Some(cells) = cov.tile_cells(band, tile_col, tile_row)? else {
        return Ok(acc);
    };
    let (c0, r0, c1, r1) = cov.meta.tile_window(tile_col, tile_row);
    let ts = cov.meta.tile_size as usize;
    for row in 0..(r1 - r0) as usize {
        for &v in &cells[row * ts..row * ts + (c1 - c0) as usize] {
            if !bmeta.is_nodata(v) {
                acc.push(v);
            }
        }
    }
    Ok(acc)
}

pub fn st_summary_stats(cov: &Coverage, band: u32, scope: StatsScope) -> Result<SummaryStats, AlgebraError> {
    match scope {
        StatsScope::Tile { tile_col, tile_row } => Ok(tile_accumulator(cov, band, tile_col, tile_row)?.finish()),
        StatsScope::Whole => {
            let mut total = StatsAccumulator::default();
            for tr in 0..cov.meta.tiles_y() {
                for tc in 0..cov.meta.tiles_x() {
                    total.merge(&tile_accumulator(cov, band, tc, tr)?);
                }
            }
            Ok(total.finish())
        }
    }
}

/// Global (min, max) over every valid cell.
pub fn coverage_minmax(cov: &Coverage, band: u32) -> Result<(f64, f64), AlgebraError> {
    let s = st_summary_stats(cov, band, StatsScope::Whole)?;
    if s.is_empty() {
        return Err(AlgebraError::EmptyCoverage(cov.meta.name.clone()));
    }
    Ok((s.min, s.max))
}

/// NDVI bounds used to normalise the vegetation index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VegetationIndexRange {
    pub ndvi_max: f64,
    pub ndvi_min: f64,
}

impl VegetationIndexRange {
    pub fn new(ndvi_max: f64, ndvi_min: f64) -> Result<Self, AlgebraError> {
        if !(ndvi_max > ndvi_min) {
            return Err(AlgebraError::InvalidRange { max: ndvi_max, min: ndvi_min });
        }
        Ok(VegetationIndexRange { ndvi_max, ndvi_min })
    }
}

/// Fraction of vegetation cover, `((ndvip - max) / (max - min))²`.
///
/// The numerator is taken against the maximum, as the deployed query
/// computes it; the textbook form uses the minimum. Values outside the
/// range are not clamped.
pub fn fvc(ndvip: f64, range: VegetationIndexRange) -> f64 {
    ((ndvip - range.ndvi_max) / (range.ndvi_max - range.ndvi_min)).powf(2.0)
}

/// Actual evapotranspiration from cover fraction and reference ET.
pub fn aet(fvc: f64, ret: f64) -> f64 {
    fvc * ret
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AetRecord {
    pub ret: f64,
    pub ndvip: f64,
    pub fvc: f64,
    pub aet: f64,
}

impl AetRecord {
    pub fn compute(ret: f64, ndvip: f64, range: VegetationIndexRange) -> Self {
        let f = fvc(ndvip, range);
        AetRecord { ret, ndvip, fvc: f, aet: aet(f, ret) }
    }
}

pub const DEFAULT_SUPERSAMPLE: u32 = 4;

/// Mean of the valid cells touching the circle's envelope, each weighted by
/// the share of its `s × s` subsample centres that fall inside the circle.
pub fn weighted_mean_in_buffer(cov: &Coverage, band: u32, circle: &Circle, supersample: u32) -> Result<Option<f64>, AlgebraError> {
    if supersample == 0 {
        return Err(AlgebraError::InvalidSupersample(supersample));
    }
    check_srid(cov.meta.srid, circle.center.srid)?;
    let bmeta = cov.band_meta(band)?.clone();
    let m = &cov.meta;
    let gt = m.geotransform;
    let env = circle.envelope();
    let (ca, ra) = gt.cell_of(env.min_x, env.min_y);
    let (cb, rb) = gt.cell_of(env.max_x, env.max_y);
    let clamp = |v: i64, n: u32| v.clamp(0, n as i64 - 1) as u32;
    let (c0, c1) = (clamp(ca.min(cb) - 1, m.width), clamp(ca.max(cb) + 1, m.width));
    let (r0, r1) = (clamp(ra.min(rb) - 1, m.height), clamp(ra.max(rb) + 1, m.height));

    let s = supersample as f64;
    let mut cells = Vec::new();
    for row in r0..=r1 {
        for col in c0..=c1 {
            if !gt.footprint(col, row, col + 1, row + 1, m.srid).overlaps_unchecked(&env) {
                continue;
            }
            let Some(v) = cov.read_cell(band, col, row)? else { continue };
            debug_assert!(!bmeta.is_nodata(v));
            let ox = gt.x0 + col as f64 * gt.dx;
            let oy = gt.y0 + row as f64 * gt.dy;
            let mut inside = 0u64;
            for j in 0..supersample {
                let y = oy + (j as f64 + 0.5) / s * gt.dy;
                for i in 0..supersample {
                    let x = ox + (i as f64 + 0.5) / s * gt.dx;
                    if circle.contains_xy(x, y) {
                        inside += 1;
                    }
                }
            }
            if inside > 0 {
                cells.push((inside as f64 / (s * s), v));
            }
        }
    }
    if cells.is_empty() {
        return Ok(None);
    }
    let lo = cells.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let hi = cells.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let wsum: f64 = cells.iter().map(|c| c.0).sum();
    let dev: f64 = cells.iter().map(|(w, v)| w * (v - lo)).sum();
    Ok(Some((lo + dev / wsum).clamp(lo, hi)))
}

/// Target grid for [`rasterize_points`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridTemplate {
    pub geotransform: GeoTransform,
    pub width: u32,
    pub height: u32,
    pub nodata: f64,
    pub srid: i32,
}

/// Burns point values into a fresh grid; later points overwrite earlier ones
/// in the same cell and points outside the grid are skipped.
pub fn rasterize_points(rows: &[(Point, f64)], template: &GridTemplate) -> Result<Vec<f64>, AlgebraError> {
    let mut grid = vec![template.nodata; template.width as usize * template.height as usize];
    for (p, v) in rows {
        check_srid(template.srid, p.srid)?;
        if let Some((c, r)) = template.geotransform.world_to_cell(p.x, p.y, template.width, template.height) {
            grid[r as usize * template.width as usize + c as usize] = *v;
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{BandMeta, PixelType, RasterCoverageMeta, RasterStore};
    use crate::value::parse_timestamp;
    use std::sync::Arc;

    fn coverage(w: u32, h: u32, ts: u32, gt: GeoTransform, cells: &[f64]) -> Arc<Coverage> {
        let store = RasterStore::in_memory();
        store
            .create_coverage(RasterCoverageMeta {
                name: "c".into(),
                srid: 4326,
                geotransform: gt,
                width: w,
                height: h,
                bands: vec![BandMeta { index: 1, nodata: Some(-9999.0), pixel_type: PixelType::Float64 }],
                tile_size: ts,
                acquired_at: parse_timestamp("2011-06-01T00:00:00Z").unwrap(),
                sensor_id: "s".into(),
            })
            .unwrap();
        if !cells.is_empty() {
            store.write_grid("c", 1, cells).unwrap();
        }
        store.get("c").unwrap()
    }

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y, 4326).unwrap()
    }

    fn unit() -> GeoTransform {
        GeoTransform::new(0.0, 2.0, 1.0, -1.0)
    }

    #[test]
    fn value_intersects_intersection() {
        let cov = coverage(2, 2, 256, unit(), &[10.0, 20.0, 30.0, -9999.0]);
        assert_eq!(st_value(&cov, 1, &pt(0.5, 1.5)).unwrap(), Some(10.0));
        assert_eq!(st_value(&cov, 1, &pt(5.0, 5.0)).unwrap(), None);
        assert_eq!(st_value(&cov, 1, &pt(1.5, 0.5)).unwrap(), None);
        assert!(st_intersects(&cov, 1, &pt(0.5, 1.5)).unwrap());
        assert!(!st_intersects(&cov, 1, &pt(-1.0, 1.5)).unwrap());
        assert!(!st_intersects(&cov, 1, &pt(1.5, 0.5)).unwrap());
        assert_eq!(st_intersection(&cov, 1, &pt(1.5, 1.5)).unwrap(), Some(GeomVal { geom: pt(1.5, 1.5), val: 20.0 }));
        assert_eq!(st_intersection(&cov, 1, &pt(9.0, 9.0)).unwrap(), None);
        let other = Point::new(0.5, 1.5, 3857).unwrap();
        assert!(st_value(&cov, 1, &other).is_err());
    }

    #[test]
    fn summary_stats_cases() {
        let cov = coverage(3, 3, 256, unit(), &[7.0; 9]);
        let s = st_summary_stats(&cov, 1, StatsScope::Whole).unwrap();
        assert_eq!((s.count, s.mean, s.stddev, s.min, s.max), (9, 7.0, 0.0, 7.0, 7.0));

        let cells: Vec<f64> = (1..=9).map(f64::from).collect();
        let cov = coverage(3, 3, 256, unit(), &cells);
        let s = st_summary_stats(&cov, 1, StatsScope::Whole).unwrap();
        // oracle: brute-force population formula over the nine cells
        let mean = cells.iter().sum::<f64>() / 9.0;
        let sd = (cells.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0).sqrt();
        assert_eq!((s.count, s.sum, s.mean, s.min, s.max), (9, 45.0, 5.0, 1.0, 9.0));
        assert!((s.stddev - sd).abs() < 1e-12);

        let cov = coverage(3, 3, 2, unit(), &[1.0, 2.0, -9999.0, 4.0, 5.0, -9999.0, -9999.0, -9999.0, -9999.0]);
        let s = st_summary_stats(&cov, 1, StatsScope::Tile { tile_col: 1, tile_row: 1 }).unwrap();
        assert_eq!(s.count, 0);
        assert!(matches!(
            st_summary_stats(&cov, 1, StatsScope::Tile { tile_col: 5, tile_row: 0 }),
            Err(AlgebraError::Raster(RasterError::UnknownTile { .. }))
        ));
        let never = coverage(2, 2, 2, unit(), &[]);
        assert_eq!(st_summary_stats(&never, 1, StatsScope::Whole).unwrap().count, 0);
        assert!(matches!(coverage_minmax(&never, 1), Err(AlgebraError::EmptyCoverage(_))));
    }

    #[test]
    fn minmax_constant() {
        let cov = coverage(4, 4, 3, unit(), &[2.5; 16]);
        assert_eq!(coverage_minmax(&cov, 1).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn fvc_and_aet_examples() {
        let range = VegetationIndexRange::new(0.86, 0.0).unwrap();
        assert_eq!(fvc(0.4433070719242096, range), 0.2347660847868792);
        assert_eq!(fvc(0.86, range), 0.0);
        assert_eq!(fvc(0.0, range), 1.0);
        // the reference ET is stored single precision; 6.652 widens to 6.6519999504089355
        assert_eq!(aet(0.2347660847868792, 6.652f32 as f64), 1.5616639843600204);
        assert_eq!(aet(0.0, 123.0), 0.0);
        assert_eq!(aet(1.0, 6.652), 6.652);
        assert!(VegetationIndexRange::new(0.0, 0.86).is_err());
        let rec = AetRecord::compute(6.652f32 as f64, 0.4433070719242096, range);
        assert_eq!((rec.fvc, rec.aet), (0.2347660847868792, 1.5616639843600204));
    }

    #[test]
    fn weighted_mean_simple_cases() {
        let cov = coverage(4, 4, 2, GeoTransform::new(0.0, 4.0, 1.0, -1.0), &[3.3; 16]);
        let c = crate::geom::buffer_point(pt(2.0, 2.0), 1.3).unwrap();
        assert_eq!(weighted_mean_in_buffer(&cov, 1, &c, 4).unwrap(), Some(3.3));
        let mut cells = vec![1.0; 16];
        cells[5] = 42.0;
        let cov = coverage(4, 4, 2, GeoTransform::new(0.0, 4.0, 1.0, -1.0), &cells);
        let c = crate::geom::buffer_point(pt(1.5, 2.5), 0.2).unwrap();
        assert_eq!(weighted_mean_in_buffer(&cov, 1, &c, 4).unwrap(), Some(42.0));
        assert!(matches!(weighted_mean_in_buffer(&cov, 1, &c, 0), Err(AlgebraError::InvalidSupersample(0))));
        let far = crate::geom::buffer_point(pt(100.0, 100.0), 1.0).unwrap();
        assert_eq!(weighted_mean_in_buffer(&cov, 1, &far, 4).unwrap(), None);
    }

    #[test]
    fn rasterize_cases() {
        let t = GridTemplate { geotransform: unit(), width: 2, height: 2, nodata: -1.0, srid: 4326 };
        assert_eq!(rasterize_points(&[(pt(0.5, 1.5), 5.0)], &t).unwrap(), vec![5.0, -1.0, -1.0, -1.0]);
        let g = rasterize_points(&[(pt(1.2, 0.2), 1.0), (pt(1.8, 0.9), 2.0), (pt(9.0, 9.0), 3.0)], &t).unwrap();
        assert_eq!(g, vec![-1.0, -1.0, -1.0, 2.0]);
        let wrong = Point::new(0.5, 0.5, 3857).unwrap();
        assert!(rasterize_points(&[(wrong, 1.0)], &t).is_err());
    }
}
