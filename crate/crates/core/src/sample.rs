//! The sample catalog: NDVI and land-surface-temperature coverages, two
//! in-situ observation tables and their sensors, plus the four example
//! queries that run against them.

use crate::catalog::{Database, PlatformRecord, SensorKind, SensorRecord};
use crate::ingest::{load_observations, load_raster, IngestError, RasterLoad};
use crate::raster::PixelType;
use crate::value::{format_f64, parse_timestamp};
use crate::vector::TableSchema;

pub const SRID: i32 = 32633;
pub const X0: f64 = 500000.0;
pub const Y0: f64 = 4200000.0;
pub const CELL: f64 = 250.0;
pub const NODATA: f64 = -9999.0;

/// Temperature difference between in-situ and remote land surface
/// temperature at one station.
pub const LISTING_1: &str = "SELECT val1, (gv).val AS val2 ,val1-(gv).val AS
diffval,geom
FROM ( SELECT ST_intersection(rast,the_geom) AS gv,
temp_value AS val1, ST_AsBinary(the_geom) AS geom
FROM in_situ_lst , lst_day
WHERE the_geom && rast
AND ST_intersects(rast,the_geom)
AND temp_lst_id = 1
) foo;";

/// Largest NDVI over the coverage.
pub const LISTING_2: &str = "SELECT (stats).max
FROM (SELECT ST_SummaryStats(rast) As stats
      FROM ndvi
      ORDER by stats DESC
      limit 1 ) As foo;";

/// Smallest NDVI over the coverage.
pub const LISTING_3: &str = "SELECT (stats).min
FROM (SELECT ST_SummaryStats(rast) As stats
      FROM ndvi
      ORDER by stats ASC
      limit 1 ) As foo;";

/// Actual evapotranspiration at the RET station with id 1.
pub const LISTING_4: &str = "SELECT RET, NDVIp,(pow(((NDVIp-0.86)/(0.86-0)),2)) as FVC,
      (pow(((NDVIp-0.86)/(0.86-0)),2))*RET as AET, the_geom
FROM (SELECT ST_Value(R.rast,I.the_geom) as NDVIp, I.value as RET,
      ST_AsBinary(I.the_geom) as the_geom
      FROM in_situ_ret I, ndvi R
      WHERE ret_id = 1
      AND ST_Value(R.rast,I.the_geom) IS NOT NULL) foo;";

pub const LISTINGS: [&str; 4] = [LISTING_1, LISTING_2, LISTING_3, LISTING_4];

/// Expected result row of the evapotranspiration query.
pub const RET: f32 = 6.652;
pub const NDVI_AT_STATION: f64 = 0.4433070719242096;
pub const FVC: f64 = 0.2347660847868792;
pub const AET: f64 = 1.5616639843600204;
pub const NDVI_MAX: f64 = 0.86;
pub const NDVI_MIN: f64 = 0.0;

/// RET station location; falls in NDVI cell (3, 0).
pub const STATION: (f64, f64) = (500860.0, 4199880.0);

pub const NDVI: [[f64; 4]; 4] = [
    [0.0, 0.1, 0.3, NDVI_AT_STATION],
    [0.2, 0.1, 0.35, 0.3],
    [0.5, 0.55, 0.86, 0.7],
    [0.6, 0.5, 0.75, 0.8],
];

pub const LST_SIZE: u32 = 6;

/// Land surface temperature grid in degrees Celsius; one NoData cell.
pub fn lst_day_value(col: u32, row: u32) -> f64 {
    if (col, row) == (0, 5) {
        NODATA
    } else {
        20.0 + 0.5 * col as f64 + 0.25 * row as f64
    }
}

pub const IN_SITU_LST_SCHEMA: &str = "temp_lst_id:number,temp_value:number,the_geom:geometry,obs_time:timestamp";
pub const IN_SITU_RET_SCHEMA: &str = "ret_id:number,value:real,the_geom:geometry,obs_time:timestamp";

/// (id, temperature, x, y, time). Station 1 sits over LST cell (4, 2),
/// station 2 on a tile edge, station 3 outside the coverage and station 5
/// over the NoData cell.
pub const IN_SITU_LST: [(u32, f64, f64, f64, &str); 5] = [
    (1, 25.0, 501100.0, 4199400.0, "2011-06-01T10:00:00Z"),
    (2, 21.0, 501000.0, 4199600.0, "2011-06-01T11:00:00Z"),
    (3, 30.0, 600000.0, 4100000.0, "2011-06-01T12:00:00Z"),
    (4, 19.0, 500125.0, 4198875.0, "2011-06-02T10:00:00Z"),
    (5, 18.0, 500100.0, 4198600.0, "2011-06-02T11:00:00Z"),
];

pub const IN_SITU_RET: [(u32, &str, f64, f64, &str); 2] = [
    (1, "6.652", STATION.0, STATION.1, "2011-06-01T12:00:00Z"),
    (2, "5.125", 500300.0, 4199300.0, "2011-06-01T12:00:00Z"),
];

fn asc(width: u32, height: u32, value: impl Fn(u32, u32) -> f64) -> String {
    let mut out = format!(
        "ncols {width}\nnrows {height}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
        format_f64(X0),
        format_f64(Y0 - height as f64 * CELL),
        format_f64(CELL),
        format_f64(NODATA)
    );
    for r in 0..height {
        let row: Vec<String> = (0..width).map(|c| format_f64(value(c, r))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn ndvi_asc() -> String {
    asc(4, 4, |c, r| NDVI[r as usize][c as usize])
}

pub fn lst_day_asc() -> String {
    asc(LST_SIZE, LST_SIZE, lst_day_value)
}

pub fn in_situ_lst_csv() -> String {
    let mut out = String::from("temp_lst_id,temp_value,x,y,obs_time\n");
    for (id, t, x, y, time) in IN_SITU_LST {
        out.push_str(&format!("{id},{},{},{},{time}\n", format_f64(t), format_f64(x), format_f64(y)));
    }
    out
}

pub fn in_situ_ret_csv() -> String {
    let mut out = String::from("ret_id,value,the_geom,obs_time\n");
    for (id, v, x, y, time) in IN_SITU_RET {
        out.push_str(&format!("{id},{v},\"POINT({} {})\",{time}\n", format_f64(x), format_f64(y)));
    }
    out
}

pub fn ndvi_load() -> RasterLoad {
    RasterLoad {
        coverage: "ndvi".into(),
        band: 1,
        srid: SRID,
        acquired_at: parse_timestamp("2011-06-01T00:00:00Z").expect("valid"),
        sensor_id: "modis-ndvi".into(),
        tile_size: 2,
        pixel_type: PixelType::Float64,
    }
}

pub fn lst_day_load() -> RasterLoad {
    RasterLoad {
        coverage: "lst_day".into(),
        band: 1,
        srid: SRID,
        acquired_at: parse_timestamp("2011-06-01T10:30:00Z").expect("valid"),
        sensor_id: "modis-lst".into(),
        tile_size: 4,
        pixel_type: PixelType::Float32,
    }
}

pub fn platforms() -> Vec<PlatformRecord> {
    vec![
        PlatformRecord {
            platform_id: "terra".into(),
            name: "Terra".into(),
            description: "Polar-orbiting satellite carrying MODIS".into(),
        },
        PlatformRecord {
            platform_id: "field-station".into(),
            name: "Automatic weather station".into(),
            description: "Ground station with thermal probe and evapotranspiration gauge".into(),
        },
    ]
}

pub fn sensors() -> Vec<SensorRecord> {
    let s = |id: &str, name: &str, kind, platform: &str, phenomenon: &str, linked: &str| SensorRecord {
        sensor_id: id.into(),
        name: name.into(),
        kind,
        platform_id: platform.into(),
        phenomenon: phenomenon.into(),
        linked_object: linked.into(),
    };
    vec![
        s("modis-ndvi", "MODIS NDVI", SensorKind::Remote, "terra", "normalised difference vegetation index", "ndvi"),
        s("modis-lst", "MODIS LST", SensorKind::Remote, "terra", "land surface temperature", "lst_day"),
        s("lst-probe", "Thermal probe", SensorKind::InSitu, "field-station", "land surface temperature", "in_situ_lst"),
        s("ret-gauge", "ET gauge", SensorKind::InSitu, "field-station", "reference evapotranspiration", "in_situ_ret"),
    ]
}

/// Loads the whole sample catalog into `db`.
pub fn populate(db: &Database) -> Result<(), IngestError> {
    load_raster(db, &ndvi_load(), &ndvi_asc())?;
    load_raster(db, &lst_day_load(), &lst_day_asc())?;
    let lst = TableSchema::parse_inline("in_situ_lst", SRID, IN_SITU_LST_SCHEMA, None).map_err(crate::catalog::CatalogError::from)?;
    load_observations(db, "in_situ_lst", &in_situ_lst_csv(), Some(lst))?;
    let ret = TableSchema::parse_inline("in_situ_ret", SRID, IN_SITU_RET_SCHEMA, None).map_err(crate::catalog::CatalogError::from)?;
    load_observations(db, "in_situ_ret", &in_situ_ret_csv(), Some(ret))?;
    for p in platforms() {
        db.register_platform(p)?;
    }
    for s in sensors() {
        db.register_sensor(s, None)?;
    }
    Ok(())
}

/// A fresh in-memory database holding the sample catalog.
pub fn database() -> Database {
    let db = Database::in_memory();
    populate(&db).expect("sample catalog loads");
    db
}
