use geosensor_core::query::{self, parse, plan, PlanOptions, OutputFormat};
use geosensor_core::sample;
use geosensor_core::value::Value;
use geosensor_core::Geometry;

#[test]
fn all_listings_parse_unmodified() {
    for text in sample::LISTINGS {
        parse(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    }
    let l1 = parse(sample::LISTING_1).unwrap();
    assert_eq!(l1.select.len(), 4);
    let geosensor_core::query::ast::FromItem::Subquery { query: inner, alias } = &l1.from[0] else { panic!() };
    assert_eq!(alias.name, "foo");
    assert_eq!(inner.filter.len(), 3);
    let l2 = parse(sample::LISTING_2).unwrap();
    let geosensor_core::query::ast::FromItem::Subquery { query: inner, .. } = &l2.from[0] else { panic!() };
    assert!(inner.order_by.as_ref().unwrap().desc);
    assert_eq!(inner.limit, Some(1));
}

#[test]
fn listing_4_reproduces_the_evapotranspiration_row() {
    let db = sample::database();
    let rs = query::run(&db, sample::LISTING_4).unwrap();
    assert_eq!(rs.column_names(), ["ret", "ndvip", "fvc", "aet", "the_geom"]);
    assert_eq!(rs.format, OutputFormat::Csv);
    assert_eq!(rs.rows.len(), 1);
    let row = &rs.rows[0];
    assert!(matches!(row[0], Value::Real(v) if v == sample::RET));
    assert_eq!(row[1].as_f64(), Some(sample::NDVI_AT_STATION));
    assert_eq!(row[2].as_f64(), Some(sample::FVC));
    assert_eq!(row[3].as_f64(), Some(sample::AET));
    let p = geosensor_core::Point::new(sample::STATION.0, sample::STATION.1, sample::SRID).unwrap();
    assert!(matches!(&row[4], Value::Bytes(b) if *b == p.to_wkb()));
}

#[test]
fn listings_2_and_3_find_the_extremes() {
    let db = sample::database();
    let max = query::run(&db, sample::LISTING_2).unwrap();
    assert_eq!(max.column_names(), ["max"]);
    assert_eq!(max.rows.len(), 1);
    assert_eq!(max.rows[0][0].as_f64(), Some(sample::NDVI_MAX));
    let min = query::run(&db, sample::LISTING_3).unwrap();
    assert_eq!(min.rows[0][0].as_f64(), Some(sample::NDVI_MIN));
}

#[test]
fn listing_1_difference_matches_direct_reads() {
    let db = sample::database();
    let rs = query::run(&db, sample::LISTING_1).unwrap();
    assert_eq!(rs.column_names(), ["val1", "val2", "diffval", "geom"]);
    assert_eq!(rs.rows.len(), 1);
    // oracle: read the station row and the cell under it straight from the stores
    let station = db.vector().get_by_key("in_situ_lst", 1).unwrap().unwrap();
    let Value::Geometry(Geometry::Point(p)) = &station.values[2] else { panic!() };
    let temp = station.values[1].as_f64().unwrap();
    let cov = db.raster().get("lst_day").unwrap();
    let cell = cov.value_at(1, p).unwrap().unwrap();
    assert_eq!(rs.rows[0][0].as_f64(), Some(temp));
    assert_eq!(rs.rows[0][1].as_f64(), Some(cell));
    assert_eq!(rs.rows[0][2].as_f64(), Some(temp - cell));
    assert_eq!(temp - cell, 2.5);
}

#[test]
fn listing_1_uses_the_index_join() {
    let db = sample::database();
    let ast = parse(sample::LISTING_1).unwrap();
    let p = plan(&ast, &db, PlanOptions::default()).unwrap();
    assert!(p.root.has_index_join(), "{}", p.root);
    let seq = plan(&ast, &db, PlanOptions { use_index: false }).unwrap();
    assert!(!seq.root.has_index_join() && !seq.root.has_index_scan(), "{}", seq.root);
}
