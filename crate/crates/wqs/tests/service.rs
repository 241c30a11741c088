use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use geosensor_core::catalog::Database;
use geosensor_core::codecs::decode_geotiff;
use geosensor_core::ingest::{load_observations, load_raster, RasterLoad};
use geosensor_core::raster::{BandMeta, GeoTransform, PixelType, RasterCoverageMeta};
use geosensor_core::sample;
use geosensor_core::value::{format_timestamp, parse_timestamp};
use geosensor_core::vector::TableSchema;
use geosensor_wqs::{observation_sql, router, AppState, ObservationFilter, ServiceConfig};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    media: String,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
}

async fn send(state: &AppState, req: Request<Body>) -> Reply {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let media = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, media, body }
}

async fn get(state: &AppState, uri: &str) -> Reply {
    send(state, Request::get(uri).body(Body::empty()).unwrap()).await
}

fn encode(q: &str) -> String {
    form_urlencoded::byte_serialize(q.as_bytes()).collect()
}

async fn post_query(state: &AppState, q: &str) -> Reply {
    let req = Request::post("/wqs")
        .header(header::CONTENT_TYPE, "application/x-www-form-urlencoded")
        .body(Body::from(format!("q={}", encode(q))))
        .unwrap();
    send(state, req).await
}

fn sample_state() -> AppState {
    AppState::from_database(sample::database(), ServiceConfig::default())
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[tokio::test]
async fn listing_4_over_post_and_get() {
    let state = sample_state();
    let started = Instant::now();
    let r = post_query(&state, sample::LISTING_4).await;
    assert!(started.elapsed() < Duration::from_secs(1));
    assert_eq!((r.status, r.media.as_str()), (StatusCode::OK, "text/csv"));
    let text = r.text();
    assert!(text.starts_with("ret,ndvip,fvc,aet,the_geom\r\n"), "{text}");
    let row = &csv_rows(&text)[0];
    let fvc: f64 = row[2].parse().unwrap();
    let aet: f64 = row[3].parse().unwrap();
    assert!(((fvc - 0.2347660847868792) / 0.2347660847868792).abs() <= 1e-12);
    assert!(((aet - 1.5616639843600204) / 1.5616639843600204).abs() <= 1e-12);

    let g = get(&state, &format!("/wqs?q={}", encode(sample::LISTING_4))).await;
    assert_eq!(g.status, StatusCode::OK);
    assert_eq!(g.body, r.body);

    let raw = Request::post("/wqs").header(header::CONTENT_TYPE, "text/plain").body(Body::from(sample::LISTING_4)).unwrap();
    assert_eq!(send(&state, raw).await.body, r.body);
}

#[tokio::test]
async fn query_errors_are_json() {
    let state = sample_state();
    let r = post_query(&state, "SELEKT 1").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let body = r.json();
    assert_eq!(body["code"], "parse_error");
    assert_eq!(body["position"], 0);

    let r = post_query(&state, "SELECT nope FROM ndvi").await;
    assert_eq!((r.status, r.json()["code"].as_str()), (StatusCode::BAD_REQUEST, Some("unknown_column")));
    let r = post_query(&state, "SELECT 1 FROM missing").await;
    assert_eq!(r.json()["code"], "unknown_table");

    let r = get(&state, "/wqs").await;
    assert_eq!((r.status, r.json()["code"].as_str()), (StatusCode::BAD_REQUEST, Some("missing_query")));
    let r = post_query(&state, "   ").await;
    assert_eq!(r.json()["code"], "missing_query");

    let r = get(&state, "/nowhere").await;
    assert_eq!((r.status, r.json()["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let r = post_query(&state, "SELECT ST_AsPNG(rast) FROM ndvi WHERE rid = 42").await;
    assert_eq!((r.status, r.json()["code"].as_str()), (StatusCode::BAD_REQUEST, Some("no_payload")));
}

#[tokio::test]
async fn oversized_queries_are_rejected() {
    let state = AppState::from_database(sample::database(), ServiceConfig { max_query_bytes: 64, ..Default::default() });
    let long = format!("SELECT 1 {}", "-".repeat(100));
    assert_eq!(post_query(&state, &long).await.status, StatusCode::PAYLOAD_TOO_LARGE);
    let raw = Request::post("/wqs").body(Body::from(vec![b'x'; 10_000])).unwrap();
    let r = send(&state, raw).await;
    assert_eq!((r.status, r.json()["code"].as_str()), (StatusCode::PAYLOAD_TOO_LARGE, Some("query_too_large")));
    assert_eq!(get(&state, &format!("/wqs?q={}", encode(&long))).await.status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(post_query(&state, "SELECT 1").await.status, StatusCode::OK);

    let default = sample_state();
    let big = format!("SELECT 1 --{}", "x".repeat(1 << 20));
    assert_eq!(post_query(&default, &big).await.status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn media_type_follows_the_format_tag() {
    let state = sample_state();
    let base = "FROM ndvi WHERE rid = 3";
    for (select, media) in [
        ("ST_AsGeoTIFF(rast)", "image/tiff"),
        ("ST_AsPNG(rast)", "image/png"),
        ("ST_AsGML(rast)", "application/gml+xml"),
        ("rast", "text/csv"),
        ("rid, ST_AsPNG(rast)", "image/png"),
        ("ST_SummaryStats(rast)", "text/csv"),
    ] {
        let r = post_query(&state, &format!("SELECT {select} {base}")).await;
        assert_eq!((r.status, r.media.as_str()), (StatusCode::OK, media), "{select}");
        assert!(!r.body.is_empty());
    }
    let r = post_query(&state, "SELECT ST_AsGeoTIFF(rast) FROM ndvi LIMIT 1").await;
    assert_eq!(r.media, "image/tiff");
    let grid = decode_geotiff(&r.body).unwrap();
    assert_eq!((grid.width, grid.height), (2, 2));
    assert_eq!(grid.cells, vec![sample::NDVI[0][0], sample::NDVI[0][1], sample::NDVI[1][0], sample::NDVI[1][1]]);
}

#[tokio::test]
async fn capabilities_documents() {
    let empty = AppState::from_database(Database::in_memory(), ServiceConfig::default());
    let doc = get(&empty, "/capabilities").await.json();
    for k in ["coverages", "tables", "sensors", "platforms"] {
        assert_eq!(doc[k], Value::Array(vec![]), "{k}");
    }

    let r = get(&sample_state(), "/capabilities").await;
    assert_eq!(r.media, "application/json");
    let doc = r.json();
    let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["service", "version", "coverages", "tables", "sensors", "platforms", "functions"]);
    let names = |k: &str| doc[k].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(names("coverages"), ["lst_day", "ndvi"]);
    assert_eq!(names("tables"), ["in_situ_lst", "in_situ_ret"]);
    assert_eq!(doc["tables"][0]["row_count"], 5);
    assert_eq!(doc["sensors"].as_array().unwrap().len(), 4);
    assert!(names("functions").contains(&"ST_SummaryStats".to_string()));
    // stable serialization
    assert_eq!(get(&sample_state(), "/capabilities").await.body, r.body);
}

#[tokio::test]
async fn describe_coverage_reports_stats() {
    let state = sample_state();
    let doc = get(&state, "/coverages/ndvi").await.json();
    assert_eq!(doc["stats"][0]["min"], 0.0);
    assert_eq!(doc["stats"][0]["max"], 0.86);
    assert_eq!(doc["stats"][0]["count"], 16);
    assert_eq!(doc["tile_size"], 2);
    assert_eq!(doc["bands"][0]["pixel_type"], "float64");
    assert_eq!(get(&state, "/coverages/nope").await.status, StatusCode::NOT_FOUND);

    let db = Database::in_memory();
    let asc = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n4 4 4\n4 4 4\n";
    load_raster(&db, &RasterLoad { coverage: "flat".into(), srid: 4326, ..sample::ndvi_load() }, asc).unwrap();
    let doc = get(&AppState::from_database(db, ServiceConfig::default()), "/coverages/flat").await.json();
    assert_eq!(doc["stats"][0]["stddev"], 0.0);
}

#[tokio::test]
async fn sensors_and_platforms() {
    let state = sample_state();
    let s = get(&state, "/sensors/modis-ndvi").await.json();
    assert_eq!(s["kind"], "remote");
    assert_eq!(s["linked"]["coverage"]["name"], "ndvi");
    let s = get(&state, "/sensors/ret-gauge").await.json();
    assert_eq!(s["linked"]["table"]["name"], "in_situ_ret");
    let p = get(&state, "/platforms/terra").await.json();
    assert_eq!(p["sensors"], serde_json::json!(["modis-ndvi", "modis-lst"]));
    assert_eq!(get(&state, "/sensors/x").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&state, "/platforms/x").await.status, StatusCode::NOT_FOUND);
}

fn observation_fixture(n: usize) -> (Database, Vec<(i64, f64, f64, i64)>) {
    let db = Database::in_memory();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let t0 = parse_timestamp("2011-06-01T00:00:00Z").unwrap();
    let mut text = String::from("obs_id,temp,x,y,obs_time\n");
    let mut rows = Vec::new();
    for id in 1..=n as i64 {
        let (x, y) = (rng.random_range(0.0..1000.0f64).round(), rng.random_range(0.0..1000.0f64));
        let minutes = rng.random_range(0..10_000i64);
        let t = t0 + chrono::Duration::minutes(minutes);
        text.push_str(&format!("{id},{},{x},{y},{}\n", rng.random_range(0.0..40.0f64), format_timestamp(&t)));
        rows.push((id, x, y, minutes));
    }
    let schema = TableSchema::parse_inline("obs", 32633, "obs_id:number,temp:number,the_geom:geometry,obs_time:timestamp", None).unwrap();
    load_observations(&db, "obs", &text, Some(schema)).unwrap();
    (db, rows)
}

#[tokio::test]
async fn get_observation_matches_oracle_and_query() {
    let (db, rows) = observation_fixture(1000);
    let state = AppState::from_database(db, ServiceConfig::default());
    let all = get(&state, "/observations/obs").await;
    assert_eq!((all.status, all.media.as_str()), (StatusCode::OK, "text/csv"));
    assert_eq!(csv_rows(&all.text()).len(), 1000);

    let none = get(&state, "/observations/obs?from=2030-01-01T00:00:00Z").await;
    assert_eq!(none.text(), "obs_id,temp,the_geom,obs_time\r\n");

    let t0 = parse_timestamp("2011-06-01T00:00:00Z").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let a = rng.random_range(0..10_000i64);
        let b = rng.random_range(a..=10_000i64);
        let (x0, y0) = (rng.random_range(0.0..900.0f64).round(), rng.random_range(0.0..900.0f64));
        let (x1, y1) = (x0 + rng.random_range(0.0..400.0f64).round(), y0 + rng.random_range(0.0..400.0f64));
        let (from, to) = (t0 + chrono::Duration::minutes(a), t0 + chrono::Duration::minutes(b));
        let uri = format!(
            "/observations/obs?from={}&to={}&bbox={x0},{y0},{x1},{y1}",
            encode(&format_timestamp(&from)),
            encode(&format_timestamp(&to))
        );
        let r = get(&state, &uri).await;
        assert_eq!(r.status, StatusCode::OK);
        let got: Vec<i64> = csv_rows(&r.text()).iter().map(|row| row[0].parse().unwrap()).collect();
        let expected: Vec<i64> = rows
            .iter()
            .filter(|(_, x, y, m)| (a..=b).contains(m) && (x0..=x1).contains(x) && (y0..=y1).contains(y))
            .map(|r| r.0)
            .collect();
        assert_eq!(got, expected);

        // the same request as a query through the WQS endpoint
        let filter = ObservationFilter {
            from: Some(from),
            to: Some(to),
            bbox: Some(format!("{x0},{y0},{x1},{y1}").parse().unwrap()),
        };
        let sql = observation_sql(&state.database().unwrap(), "obs", &filter).unwrap();
        assert_eq!(post_query(&state, &sql).await.body, r.body);
    }

    let bad = get(&state, "/observations/obs?from=2011-06-02T00:00:00Z&to=2011-06-01T00:00:00Z").await;
    assert_eq!((bad.status, bad.json()["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_interval")));
    assert_eq!(get(&state, "/observations/obs?bbox=1,2,3").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&state, "/observations/obs?from=yesterday").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&state, "/observations/nope").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn coverage_windows_match_read_cell() {
    let state = sample_state();
    let db = state.database().unwrap();
    let cov = db.raster().get("lst_day").unwrap();
    let meta = cov.meta.clone();
    let extent = meta.extent();

    let full = get(&state, "/coverages/lst_day/data").await;
    assert_eq!((full.status, full.media.as_str()), (StatusCode::OK, "image/tiff"));
    let g = decode_geotiff(&full.body).unwrap();
    assert_eq!((g.width, g.height), (6, 6));
    for r in 0..6 {
        for c in 0..6 {
            assert_eq!(g.cells[(r * 6 + c) as usize], sample::lst_day_value(c, r) as f32 as f64);
        }
    }

    // one cell: a tiny box around the centre of (2, 1)
    let (cx, cy) = meta.geotransform.cell_to_world_center(2, 1);
    let r = get(&state, &format!("/coverages/lst_day/data?band=1&bbox={},{},{},{}", cx - 1.0, cy - 1.0, cx + 1.0, cy + 1.0)).await;
    let g = decode_geotiff(&r.body).unwrap();
    assert_eq!((g.width, g.height, g.cells[0]), (1, 1, cov.read_cell(1, 2, 1).unwrap().unwrap()));

    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut checked = 0;
    while checked < 50 {
        let x0 = rng.random_range(extent.min_x - 300.0..extent.max_x);
        let y0 = rng.random_range(extent.min_y - 300.0..extent.max_y);
        let (x1, y1) = (x0 + rng.random_range(0.0..1200.0), y0 + rng.random_range(0.0..1200.0));
        let r = get(&state, &format!("/coverages/lst_day/data?bbox={x0},{y0},{x1},{y1}")).await;
        // oracle: every cell whose centre lies in the box
        let mut expected = Vec::new();
        let (mut cols, mut rows) = (std::collections::BTreeSet::new(), std::collections::BTreeSet::new());
        for row in 0..meta.height {
            for col in 0..meta.width {
                let (x, y) = meta.geotransform.cell_to_world_center(col, row);
                if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
                    expected.push(cov.read_cell(1, col, row).unwrap());
                    cols.insert(col);
                    rows.insert(row);
                }
            }
        }
        if expected.is_empty() {
            assert_eq!((r.status, r.json()["code"].as_str()), (StatusCode::BAD_REQUEST, Some("disjoint_bbox")));
            continue;
        }
        assert_eq!(r.status, StatusCode::OK);
        let g = decode_geotiff(&r.body).unwrap();
        assert_eq!((g.width as usize, g.height as usize), (cols.len(), rows.len()));
        let (c0, r0) = (*cols.first().unwrap(), *rows.first().unwrap());
        let (ox, oy) = (meta.geotransform.x0 + c0 as f64 * meta.geotransform.dx, meta.geotransform.y0 + r0 as f64 * meta.geotransform.dy);
        assert_eq!((g.geotransform.x0, g.geotransform.y0), (ox, oy));
        let got: Vec<Option<f64>> = g.cells.iter().map(|&v| (!g.is_nodata(v)).then_some(v)).collect();
        assert_eq!(got, expected);
        checked += 1;
    }

    assert_eq!(get(&state, "/coverages/lst_day/data?bbox=0,0,1,1").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(get(&state, "/coverages/lst_day/data?band=2").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&state, "/coverages/nope/data").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&state, "/coverages/lst_day/data?bbox=5,5,1,1").await.status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn trivial_queries_stay_fast_during_a_large_scan() {
    let db = Database::in_memory();
    let n = 1024u32;
    db.create_coverage(RasterCoverageMeta {
        name: "big".into(),
        srid: 32633,
        geotransform: GeoTransform::new(0.0, n as f64, 1.0, -1.0),
        width: n,
        height: n,
        bands: vec![BandMeta { index: 1, nodata: None, pixel_type: PixelType::Float64 }],
        tile_size: 256,
        acquired_at: parse_timestamp("2011-06-01T00:00:00Z").unwrap(),
        sensor_id: "s".into(),
    })
    .unwrap();
    let cells: Vec<f64> = (0..n * n).map(|i| (i % 977) as f64).collect();
    db.write_grid("big", 1, &cells).unwrap();
    let state = AppState::from_database(db, ServiceConfig::default());

    let heavy_state = state.clone();
    let heavy = tokio::spawn(async move {
        for _ in 0..3 {
            post_query(&heavy_state, "SELECT ST_SummaryStats(rast) FROM big ORDER BY rid").await;
        }
    });
    tokio::time::sleep(Duration::from_millis(20)).await;
    let t = Instant::now();
    let r = post_query(&state, "SELECT 1 AS one").await;
    assert_eq!(r.text(), "one\r\n1\r\n");
    assert!(t.elapsed() < Duration::from_millis(500), "{:?}", t.elapsed());
    heavy.await.unwrap();
}

#[tokio::test]
async fn disk_catalog_reloads_after_external_writes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("db");
    Database::init(&root).unwrap();
    let state = AppState::open(&root, ServiceConfig::default()).unwrap();
    assert_eq!(get(&state, "/capabilities").await.json()["coverages"], Value::Array(vec![]));
    {
        let writer = Database::open(&root).unwrap();
        sample::populate(&writer).unwrap();
    }
    let r = post_query(&state, sample::LISTING_4).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(csv_rows(&r.text()).len(), 1);
}
