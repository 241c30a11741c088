//! R-tree backed bbox queries against a linear scan.

use geosensor_core::catalog::Database;
use geosensor_core::query::{run_with, PlanOptions};
use geosensor_core::value::Value;
use geosensor_core::vector::{read_table, ObservationRow, SearchStats, TableSchema};
use geosensor_core::{Envelope, Geometry, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SRID: i32 = 32633;
const SIDE: f64 = 10_000.0;

fn populated(n: usize, seed: u64) -> (Database, Vec<(i64, f64, f64)>) {
    let db = Database::in_memory();
    let schema = TableSchema::parse_inline("obs", SRID, "id:number,val:number,geom:geometry", None).unwrap();
    db.create_table(schema).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    for id in 0..n as i64 {
        let (x, y) = (rng.random_range(0.0..SIDE), rng.random_range(0.0..SIDE));
        // a few duplicates and lattice points to exercise ties on the boundary
        let (x, y) = if id % 97 == 0 { (x.round(), y.round()) } else { (x, y) };
        let p = Point::new(x, y, SRID).unwrap();
        let row = ObservationRow::new(vec![Value::Number(id as f64), Value::Number(x + y), Value::Geometry(Geometry::Point(p))]);
        db.insert_row("obs", row).unwrap();
        pts.push((id, x, y));
    }
    (db, pts)
}

fn random_env(rng: &mut ChaCha8Rng, max_side: f64) -> Envelope {
    let w = rng.random_range(0.0..max_side);
    let h = rng.random_range(0.0..max_side);
    let x = rng.random_range(-0.05 * SIDE..SIDE);
    let y = rng.random_range(-0.05 * SIDE..SIDE);
    let (x, y) = if rng.random_bool(0.1) { (x.round(), y.round()) } else { (x, y) };
    Envelope::new(x, y, x + w, y + h, SRID).unwrap()
}

#[test]
fn query_bbox_matches_linear_scan() {
    let (db, pts) = populated(10_000, 7);
    let handle = db.vector().table("obs").unwrap();
    let table = read_table(&handle);
    table.index().validate().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..100 {
        let env = random_env(&mut rng, if i % 2 == 0 { SIDE / 4.0 } else { SIDE / 50.0 });
        let mut got: Vec<i64> = table.query_bbox(&env).unwrap().iter().map(|r| r.key(&table.schema)).collect();
        got.sort_unstable();
        let expected: Vec<i64> =
            pts.iter().filter(|(_, x, y)| env.contains_point(*x, *y)).map(|(id, _, _)| *id).collect();
        assert_eq!(got, expected, "envelope {env:?}");
    }
}

#[test]
fn small_envelopes_touch_few_leaves() {
    let (db, _) = populated(10_000, 3);
    let handle = db.vector().table("obs").unwrap();
    let table = read_table(&handle);
    let leaves = table.index().leaf_count();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        // under 1% of the extent's area
        let env = random_env(&mut rng, SIDE * 0.099);
        assert!(env.area() < 0.01 * SIDE * SIDE);
        let mut s = SearchStats::default();
        table.bbox_positions(&env, &mut s).unwrap();
        assert!((s.leaves_visited as f64) < 0.2 * leaves as f64, "{} of {} leaves", s.leaves_visited, leaves);
    }
}

#[test]
fn sql_bbox_uses_index_and_agrees_with_seq_scan() {
    let (db, pts) = populated(2_000, 19);
    let sql = "SELECT id FROM obs WHERE geom && ST_MakeEnvelope(1000, 2000, 2500, 2600, 32633) ORDER BY id";
    let indexed = run_with(&db, sql, PlanOptions::default()).unwrap();
    let seq = run_with(&db, sql, PlanOptions { use_index: false }).unwrap();
    let ids = |rows: &[Vec<Value>]| rows.iter().map(|r| r[0].as_f64().unwrap()).collect::<Vec<_>>();
    assert_eq!(ids(&indexed.rows), ids(&seq.rows));
    let expected = pts
        .iter()
        .filter(|(_, x, y)| (1000.0..=2500.0).contains(x) && (2000.0..=2600.0).contains(y))
        .count();
    assert_eq!(indexed.rows.len(), expected);
    assert!(expected > 0);
}
