use geosensor_core::catalog::{fingerprint, Database};
use geosensor_core::ingest::{load_raster, IngestError};
use geosensor_core::query::run;
use geosensor_core::sample;
use geosensor_core::value::Value;

fn listing_values(db: &Database) -> (f64, f64, f64, f64) {
    let l1 = run(db, sample::LISTING_1).unwrap();
    let l2 = run(db, sample::LISTING_2).unwrap();
    let l3 = run(db, sample::LISTING_3).unwrap();
    let l4 = run(db, sample::LISTING_4).unwrap();
    assert!(matches!(l4.rows[0][0], Value::Real(v) if v == sample::RET));
    (
        l1.rows[0][2].as_f64().unwrap(),
        l2.rows[0][0].as_f64().unwrap(),
        l3.rows[0][0].as_f64().unwrap(),
        l4.rows[0][3].as_f64().unwrap(),
    )
}

#[test]
fn catalog_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    let before = {
        let db = Database::init(&root).unwrap();
        sample::populate(&db).unwrap();
        listing_values(&db)
    };
    assert_eq!(before.1, sample::NDVI_MAX);
    assert_eq!(before.3, sample::AET);

    let db = Database::open(&root).unwrap();
    let after = listing_values(&db);
    assert_eq!(before.0.to_bits(), after.0.to_bits());
    assert_eq!((before.1, before.2, before.3), (after.1, after.2, after.3));
    assert_eq!(db.sensors().len(), sample::sensors().len());
    assert_eq!(db.platforms().len(), sample::platforms().len());
    assert_eq!(db.vector().get_by_key("in_situ_lst", 4).unwrap().unwrap().values[1].as_f64(), Some(19.0));
}

#[test]
fn reopened_catalog_rejects_duplicate_band_and_init() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    {
        let db = Database::init(&root).unwrap();
        sample::populate(&db).unwrap();
    }
    assert!(Database::init(&root).is_err());
    let db = Database::open(&root).unwrap();
    let err = load_raster(&db, &sample::ndvi_load(), &sample::ndvi_asc()).unwrap_err();
    assert!(matches!(err, IngestError::Catalog(_)), "{err:?}");
    assert!(err.to_string().contains("band"), "{err}");
}

#[test]
fn fingerprint_tracks_writes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    let db = Database::init(&root).unwrap();
    let empty = fingerprint(&root);
    sample::populate(&db).unwrap();
    let full = fingerprint(&root);
    assert_ne!(empty, full);
    assert_eq!(full, fingerprint(&root));
}

#[test]
fn open_requires_a_catalog() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Database::open(dir.path()).is_err());
}
