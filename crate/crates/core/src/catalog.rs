//! The catalog: one directory holding `catalog.json`, raster tiles and
//! observation row files, opened as a [`Database`].

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BandMeta, RasterCoverageMeta, RasterError, RasterStore};
use crate::vector::{ObservationRow, TableSchema, VectorError, VectorStore};

pub const CATALOG_FILE: &str = "catalog.json";
const CATALOG_FORMAT: &str = "geosensor-catalog";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("{0} already initialized")]
    AlreadyInitialized(PathBuf),
    #[error("{0} is not empty and holds no catalog")]
    NotACatalog(PathBuf),
    #[error("no catalog at {0} (run init first)")]
    Missing(PathBuf),
    #[error("name {0:?} is already used by another coverage or table")]
    NameTaken(String),
    #[error("invalid sensor record: {0}")]
    InvalidSensor(String),
    #[error("unknown sensor {0:?}")]
    UnknownSensor(String),
    #[error("unknown platform {0:?}")]
    UnknownPlatform(String),
    #[error("catalog file {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CatalogError + '_ {
    move |source| CatalogError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    InSitu,
    Remote,
}

impl std::str::FromStr for SensorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "in-situ" | "insitu" | "in_situ" => Ok(SensorKind::InSitu),
            "remote" => Ok(SensorKind::Remote),
            other => Err(format!("sensor kind must be in-situ or remote, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub sensor_id: String,
    pub name: String,
    pub kind: SensorKind,
    pub platform_id: String,
    pub phenomenon: String,
    pub linked_object: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformRecord {
    pub platform_id: String,
    pub name: String,
    pub description: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CatalogDoc {
    format: String,
    version: u32,
    coverages: Vec<RasterCoverageMeta>,
    tables: Vec<TableSchema>,
    sensors: Vec<SensorRecord>,
    platforms: Vec<PlatformRecord>,
}

#[derive(Debug, Default)]
struct Registry {
    sensors: Vec<SensorRecord>,
    platforms: Vec<PlatformRecord>,
}

/// Raster and vector stores plus the sensor/platform registry.
#[derive(Debug)]
pub struct Database {
    root: Option<PathBuf>,
    raster: RasterStore,
    vector: VectorStore,
    registry: RwLock<Registry>,
    // serializes catalog.json rewrites
    meta_lock: std::sync::Mutex<()>,
}

impl Database {
    pub fn in_memory() -> Self {
        Database {
            root: None,
            raster: RasterStore::in_memory(),
            vector: VectorStore::in_memory(),
            registry: RwLock::default(),
            meta_lock: Default::default(),
        }
    }

    /// Creates an empty catalog. The directory must be absent or empty.
    pub fn init(root: &Path) -> Result<Database, CatalogError> {
        if root.join(CATALOG_FILE).exists() {
            return Err(CatalogError::AlreadyInitialized(root.to_path_buf()));
        }
        if root.exists() {
            let mut entries = fs::read_dir(root).map_err(io_err(root))?;
            if entries.next().is_some() {
                return Err(CatalogError::NotACatalog(root.to_path_buf()));
            }
        }
        fs::create_dir_all(root).map_err(io_err(root))?;
        let db = Database::empty_at(root);
        db.save()?;
        Ok(db)
    }

    fn empty_at(root: &Path) -> Database {
        Database {
            root: Some(root.to_path_buf()),
            raster: RasterStore::with_root(root),
            vector: VectorStore::with_root(root),
            registry: RwLock::default(),
            meta_lock: Default::default(),
        }
    }

    pub fn open(root: &Path) -> Result<Database, CatalogError> {
        let path = root.join(CATALOG_FILE);
        if !path.exists() {
            return Err(CatalogError::Missing(root.to_path_buf()));
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let doc: CatalogDoc =
            serde_json::from_str(&text).map_err(|source| CatalogError::Json { path: path.clone(), source })?;
        if doc.format != CATALOG_FORMAT {
            return Err(CatalogError::NotACatalog(root.to_path_buf()));
        }
        let db = Database::empty_at(root);
        for meta in doc.coverages {
            db.raster.load(meta)?;
        }
        for schema in doc.tables {
            db.vector.load(schema)?;
        }
        *db.registry.write().expect("registry lock") = Registry { sensors: doc.sensors, platforms: doc.platforms };
        Ok(db)
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn raster(&self) -> &RasterStore {
        &self.raster
    }

    pub fn vector(&self) -> &VectorStore {
        &self.vector
    }

    fn save(&self) -> Result<(), CatalogError> {
        let Some(root) = &self.root else { return Ok(()) };
        let _guard = self.meta_lock.lock().expect("meta lock");
        let reg = self.registry.read().expect("registry lock");
        let doc = CatalogDoc {
            format: CATALOG_FORMAT.into(),
            version: 1,
            coverages: self.raster.metas(),
            tables: self.vector.schemas(),
            sensors: reg.sensors.clone(),
            platforms: reg.platforms.clone(),
        };
        let text = serde_json::to_string_pretty(&doc).expect("catalog serializes");
        let path = root.join(CATALOG_FILE);
        let tmp = root.join(".catalog.json.tmp");
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn create_coverage(&self, meta: RasterCoverageMeta) -> Result<(), CatalogError> {
        if self.vector.contains(&meta.name) {
            return Err(CatalogError::NameTaken(meta.name));
        }
        self.raster.create_coverage(meta)?;
        self.save()
    }

    pub fn add_band(&self, coverage: &str, band: BandMeta) -> Result<(), CatalogError> {
        self.raster.add_band(coverage, band)?;
        self.save()
    }

    pub fn write_grid(&self, coverage: &str, band: u32, cells: &[f64]) -> Result<(), CatalogError> {
        Ok(self.raster.write_grid(coverage, band, cells)?)
    }

    pub fn create_table(&self, schema: TableSchema) -> Result<(), CatalogError> {
        let schema = schema.normalized();
        if self.raster.contains(&schema.name) {
            return Err(CatalogError::NameTaken(schema.name));
        }
        self.vector.create_table(schema)?;
        self.save()
    }

    pub fn insert_row(&self, table: &str, row: ObservationRow) -> Result<i64, CatalogError> {
        Ok(self.vector.insert_row(table, row)?)
    }

    /// Adds or replaces a sensor; the optional platform record is upserted
    /// first. The linked object must exist and match the sensor kind.
    pub fn register_sensor(&self, sensor: SensorRecord, platform: Option<PlatformRecord>) -> Result<(), CatalogError> {
        let linked_ok = match sensor.kind {
            SensorKind::Remote => self.raster.contains(&sensor.linked_object),
            SensorKind::InSitu => self.vector.contains(&sensor.linked_object),
        };
        if !linked_ok {
            let want = match sensor.kind {
                SensorKind::Remote => "raster coverage",
                SensorKind::InSitu => "observation table",
            };
            return Err(CatalogError::InvalidSensor(format!(
                "{:?} is not a {want} in the catalog",
                sensor.linked_object
            )));
        }
        {
            let mut reg = self.registry.write().expect("registry lock");
            if let Some(p) = platform {
                reg.platforms.retain(|q| q.platform_id != p.platform_id);
                reg.platforms.push(p);
            }
            if !reg.platforms.iter().any(|p| p.platform_id == sensor.platform_id) {
                return Err(CatalogError::UnknownPlatform(sensor.platform_id));
            }
            reg.sensors.retain(|s| s.sensor_id != sensor.sensor_id);
            reg.sensors.push(sensor);
        }
        self.save()
    }

    pub fn register_platform(&self, platform: PlatformRecord) -> Result<(), CatalogError> {
        {
            let mut reg = self.registry.write().expect("registry lock");
            reg.platforms.retain(|q| q.platform_id != platform.platform_id);
            reg.platforms.push(platform);
        }
        self.save()
    }

    pub fn sensors(&self) -> Vec<SensorRecord> {
        self.registry.read().expect("registry lock").sensors.clone()
    }

    pub fn platforms(&self) -> Vec<PlatformRecord> {
        self.registry.read().expect("registry lock").platforms.clone()
    }

    pub fn sensor(&self, id: &str) -> Result<SensorRecord, CatalogError> {
        self.sensors()
            .into_iter()
            .find(|s| s.sensor_id == id)
            .ok_or_else(|| CatalogError::UnknownSensor(id.into()))
    }

    pub fn platform(&self, id: &str) -> Result<PlatformRecord, CatalogError> {
        self.platforms()
            .into_iter()
            .find(|p| p.platform_id == id)
            .ok_or_else(|| CatalogError::UnknownPlatform(id.into()))
    }
}

/// Cheap change detector for a catalog directory: hashes sizes and mtimes of
/// the catalog file, every row file and every raster band directory.
pub fn fingerprint(root: &Path) -> u64 {
    let mut h = DefaultHasher::new();
    let mut stamp = |p: &Path| {
        if let Ok(m) = fs::metadata(p) {
            p.hash(&mut h);
            m.len().hash(&mut h);
            m.modified().unwrap_or(SystemTime::UNIX_EPOCH).hash(&mut h);
        }
    };
    stamp(&root.join(CATALOG_FILE));
    for sub in ["tables", "rasters"] {
        let mut paths: Vec<PathBuf> = fs::read_dir(root.join(sub))
            .into_iter()
            .flatten()
            .flatten()
            .flat_map(|e| {
                let p = e.path();
                let mut v = vec![p.clone()];
                if p.is_dir() {
                    v.extend(fs::read_dir(&p).into_iter().flatten().flatten().map(|e| e.path()));
                }
                v
            })
            .collect();
        paths.sort();
        paths.iter().for_each(|p| stamp(p));
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::raster::{GeoTransform, PixelType};
    use crate::value::{parse_timestamp, Value};
    use crate::vector::{ColumnDef, ColumnType};

    fn cov() -> RasterCoverageMeta {
        RasterCoverageMeta {
            name: "lst_day".into(),
            srid: 4326,
            geotransform: GeoTransform::new(0.0, 2.0, 1.0, -1.0),
            width: 3,
            height: 2,
            bands: vec![BandMeta { index: 1, nodata: Some(-9999.0), pixel_type: PixelType::Float32 }],
            tile_size: 2,
            acquired_at: parse_timestamp("2011-06-01T10:30:00Z").unwrap(),
            sensor_id: "modis".into(),
        }
    }

    fn table() -> TableSchema {
        TableSchema {
            name: "in_situ_lst".into(),
            srid: 4326,
            columns: vec![
                ColumnDef::new("temp_lst_id", ColumnType::Number),
                ColumnDef::new("temp_value", ColumnType::Real),
                ColumnDef::new("the_geom", ColumnType::Geometry),
            ],
            key_column: "temp_lst_id".into(),
        }
    }

    #[test]
    fn init_twice_and_non_empty() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("db");
        Database::init(&root).unwrap();
        assert!(matches!(Database::init(&root), Err(CatalogError::AlreadyInitialized(_))));
        let other = dir.path().join("junk");
        fs::create_dir_all(&other).unwrap();
        fs::write(other.join("x"), "x").unwrap();
        assert!(matches!(Database::init(&other), Err(CatalogError::NotACatalog(_))));
        assert!(matches!(Database::open(&dir.path().join("absent")), Err(CatalogError::Missing(_))));
    }

    #[test]
    fn reopen_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("db");
        let db = Database::init(&root).unwrap();
        db.create_coverage(cov()).unwrap();
        let cells = [22.5, 0.1, -9999.0, 1e-30, 7.0, f64::MAX];
        db.write_grid("lst_day", 1, &cells).unwrap();
        db.create_table(table()).unwrap();
        let row = ObservationRow::new(vec![
            Value::Number(1.0),
            Value::Number(25.0),
            Value::Geometry(Point::new(0.5, 1.5, 4326).unwrap().into()),
        ]);
        db.insert_row("in_situ_lst", row).unwrap();
        db.register_sensor(
            SensorRecord {
                sensor_id: "modis".into(),
                name: "MODIS".into(),
                kind: SensorKind::Remote,
                platform_id: "terra".into(),
                phenomenon: "land surface temperature".into(),
                linked_object: "lst_day".into(),
            },
            Some(PlatformRecord { platform_id: "terra".into(), name: "Terra".into(), description: "EOS AM-1".into() }),
        )
        .unwrap();
        let before = fingerprint(&root);
        drop(db);

        let db = Database::open(&root).unwrap();
        assert_eq!(fingerprint(&root), before);
        assert_eq!(db.raster().get_meta("lst_day").unwrap(), cov());
        let c = db.raster().get("lst_day").unwrap();
        for row in 0..2 {
            for col in 0..3 {
                let want = PixelType::Float32.quantize(cells[row * 3 + col]);
                let got = c.read_window(1, col as u32, row as u32, col as u32 + 1, row as u32 + 1).unwrap()[0];
                assert_eq!(got.to_bits(), want.to_bits());
            }
        }
        let r = db.vector().get_by_key("in_situ_lst", 1).unwrap().unwrap();
        assert!(matches!(r.values[1], Value::Real(v) if v == 25.0));
        assert_eq!(db.sensor("modis").unwrap().linked_object, "lst_day");
        assert_eq!(db.platform("terra").unwrap().name, "Terra");
    }

    #[test]
    fn sensor_link_checked() {
        let db = Database::in_memory();
        db.create_table(table()).unwrap();
        let s = SensorRecord {
            sensor_id: "s1".into(),
            name: "station".into(),
            kind: SensorKind::Remote,
            platform_id: "p".into(),
            phenomenon: "lst".into(),
            linked_object: "in_situ_lst".into(),
        };
        assert!(matches!(db.register_sensor(s.clone(), None), Err(CatalogError::InvalidSensor(_))));
        let s = SensorRecord { kind: SensorKind::InSitu, ..s };
        assert!(matches!(db.register_sensor(s.clone(), None), Err(CatalogError::UnknownPlatform(_))));
        let p = PlatformRecord { platform_id: "p".into(), name: "mast".into(), description: String::new() };
        db.register_sensor(s, Some(p)).unwrap();
        assert!(matches!(db.sensor("zz"), Err(CatalogError::UnknownSensor(_))));
    }

    #[test]
    fn names_shared_across_kinds() {
        let db = Database::in_memory();
        db.create_coverage(cov()).unwrap();
        let mut t = table();
        t.name = "lst_day".into();
        assert!(matches!(db.create_table(t), Err(CatalogError::NameTaken(_))));
    }
}
