//! Runtime values shared by the stores, the algebra and the query engine.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use crate::geom::{Envelope, Geometry, Point};
use crate::raster::TileRef;

/// UTC instant with microsecond resolution.
pub type Timestamp = DateTime<Utc>;

/// Parses an RFC 3339 instant and truncates it to microseconds.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, chrono::ParseError> {
    let t = DateTime::parse_from_rfc3339(text.trim())?;
    Ok(t.with_timezone(&Utc).trunc_subsecs(6))
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Geometry with the band value sampled under it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomVal {
    pub geom: Point,
    pub val: f64,
}

/// Count/sum/mean/population-stddev/min/max over a set of cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: u64,
    pub sum: f64,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    pub const FIELDS: [&'static str; 6] = ["count", "sum", "mean", "stddev", "min", "max"];

    pub fn empty() -> Self {
        SummaryStats { count: 0, sum: 0.0, mean: f64::NAN, stddev: f64::NAN, min: f64::NAN, max: f64::NAN }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Projects a field; mean/stddev/min/max of an empty scope are Null.
    pub fn field(&self, name: &str) -> Option<Value> {
        let v = match name {
            "count" => return Some(Value::Number(self.count as f64)),
            "sum" => return Some(Value::Number(self.sum)),
            "mean" => self.mean,
            "stddev" => self.stddev,
            "min" => self.min,
            "max" => self.max,
            _ => return None,
        };
        Some(if self.count == 0 { Value::Null } else { Value::Number(v) })
    }

    fn fields_in_order(&self) -> [Option<f64>; 6] {
        let opt = |v: f64| if self.count == 0 { None } else { Some(v) };
        [
            Some(self.count as f64),
            Some(self.sum),
            opt(self.mean),
            opt(self.stddev),
            opt(self.min),
            opt(self.max),
        ]
    }
}

/// Streaming accumulator; partial results from separate tiles merge exactly
/// for count/sum/min/max and via the pairwise update for the second moment.
#[derive(Debug, Clone, Copy)]
pub struct StatsAccumulator {
    count: u64,
    sum: f64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for StatsAccumulator {
    fn default() -> Self {
        StatsAccumulator { count: 0, sum: 0.0, mean: 0.0, m2: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }
}

impl StatsAccumulator {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
        self.sum += other.sum;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> SummaryStats {
        if self.count == 0 {
            return SummaryStats::empty();
        }
        let var = (self.m2 / self.count as f64).max(0.0);
        SummaryStats {
            count: self.count,
            sum: self.sum,
            mean: self.mean.clamp(self.min, self.max),
            stddev: var.sqrt(),
            min: self.min,
            max: self.max,
        }
    }
}

/// Runtime value union.
///
/// `Real` carries single-precision numbers from `real` columns: they take
/// part in arithmetic as the exact double they widen to, but render with
/// single-precision shortest digits.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Number(f64),
    Real(f32),
    Text(String),
    Timestamp(Timestamp),
    Geometry(Geometry),
    Envelope(Envelope),
    GeomVal(GeomVal),
    Stats(SummaryStats),
    Bytes(Vec<u8>),
    Raster(Arc<TileRef>),
}

/// Type tag of a value; also the inferred type of a result column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Null,
    Bool,
    Number,
    Real,
    Text,
    Timestamp,
    Geometry,
    Envelope,
    GeomVal,
    Stats,
    Bytes,
    Raster,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Null => "null",
            ValueKind::Bool => "boolean",
            ValueKind::Number => "number",
            ValueKind::Real => "real",
            ValueKind::Text => "text",
            ValueKind::Timestamp => "timestamp",
            ValueKind::Geometry => "geometry",
            ValueKind::Envelope => "envelope",
            ValueKind::GeomVal => "geomval",
            ValueKind::Stats => "summarystats",
            ValueKind::Bytes => "bytea",
            ValueKind::Raster => "raster",
        };
        f.write_str(s)
    }
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Null => ValueKind::Null,
            Value::Bool(_) => ValueKind::Bool,
            Value::Number(_) => ValueKind::Number,
            Value::Real(_) => ValueKind::Real,
            Value::Text(_) => ValueKind::Text,
            Value::Timestamp(_) => ValueKind::Timestamp,
            Value::Geometry(_) => ValueKind::Geometry,
            Value::Envelope(_) => ValueKind::Envelope,
            Value::GeomVal(_) => ValueKind::GeomVal,
            Value::Stats(_) => ValueKind::Stats,
            Value::Bytes(_) => ValueKind::Bytes,
            Value::Raster(_) => ValueKind::Raster,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Numbers of either width as a double; NaN collapses to None.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Number(v) if !v.is_nan() => Some(v),
            Value::Real(v) if !v.is_nan() => Some(v as f64),
            _ => None,
        }
    }

    /// Turns a NaN number into Null; every other value passes through.
    pub fn normalized(self) -> Value {
        match self {
            Value::Number(v) if v.is_nan() => Value::Null,
            Value::Real(v) if v.is_nan() => Value::Null,
            other => other,
        }
    }

    /// SQL equality: `None` when either side is Null.
    pub fn sql_eq(&self, other: &Value) -> Option<bool> {
        self.sql_cmp(other).map(|o| o == Ordering::Equal)
    }

    /// SQL comparison for scalar kinds; `None` when either side is Null or
    /// the kinds do not compare. Text compares against a timestamp by
    /// parsing the text as RFC 3339.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        use Value::*;
        if let (Some(a), Some(b)) = (self.as_f64(), other.as_f64()) {
            return a.partial_cmp(&b);
        }
        match (self, other) {
            (Text(a), Text(b)) => Some(a.cmp(b)),
            (Bool(a), Bool(b)) => Some(a.cmp(b)),
            (Timestamp(a), Timestamp(b)) => Some(a.cmp(b)),
            (Timestamp(a), Text(b)) => parse_timestamp(b).ok().map(|b| a.cmp(&b)),
            (Text(a), Timestamp(b)) => parse_timestamp(a).ok().map(|a| a.cmp(b)),
            (Bytes(a), Bytes(b)) => Some(a.cmp(b)),
            (Geometry(a), Geometry(b)) => (a == b).then_some(Ordering::Equal).or(Some(Ordering::Less)),
            (Stats(a), Stats(b)) => Some(compare_stats(a, b)),
            _ => None,
        }
    }

    /// Total order used by ORDER BY. Nulls sort after every non-null value,
    /// composites compare field by field in declaration order.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        match (self.is_null(), other.is_null()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Greater,
            (false, true) => return Ordering::Less,
            _ => {}
        }
        if let Some(o) = self.sql_cmp(other) {
            return o;
        }
        match (self, other) {
            (Value::GeomVal(a), Value::GeomVal(b)) => {
                (a.geom.x, a.geom.y, a.val).partial_cmp(&(b.geom.x, b.geom.y, b.val)).unwrap_or(Ordering::Equal)
            }
            _ => (self.kind() as u8).cmp(&(other.kind() as u8)),
        }
    }
}

/// Row-wise comparison of two stats composites; a Null field sorts last.
fn compare_stats(a: &SummaryStats, b: &SummaryStats) -> Ordering {
    for (x, y) in a.fields_in_order().iter().zip(b.fields_in_order().iter()) {
        let o = match (x, y) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(x), Some(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Shortest round-trip rendering of a double.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == f64::INFINITY {
        "Infinity".into()
    } else if v == f64::NEG_INFINITY {
        "-Infinity".into()
    } else {
        format!("{v}")
    }
}

fn format_f32(v: f32) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        format_f64(v as f64)
    }
}

impl fmt::Display for Value {
    /// Text rendering used for CSV fields; Null renders as the empty string.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Bool(b) => f.write_str(if *b { "true" } else { "false" }),
            Value::Number(v) => f.write_str(&format_f64(*v)),
            Value::Real(v) => f.write_str(&format_f32(*v)),
            Value::Text(s) => f.write_str(s),
            Value::Timestamp(t) => f.write_str(&format_timestamp(t)),
            Value::Geometry(g) => f.write_str(&g.to_wkt()),
            Value::Envelope(e) => write!(f, "{e}"),
            Value::GeomVal(gv) => write!(f, "({},{})", gv.geom.to_wkt(), format_f64(gv.val)),
            Value::Stats(s) => {
                let parts: Vec<String> = s
                    .fields_in_order()
                    .iter()
                    .map(|v| v.map(format_f64).unwrap_or_default())
                    .collect();
                write!(f, "({})", parts.join(","))
            }
            Value::Bytes(b) => {
                for byte in b {
                    write!(f, "{byte:02x}")?;
                }
                Ok(())
            }
            Value::Raster(t) => write!(f, "RASTER({} {} {})", t.coverage.meta.name, t.tile_col, t.tile_row),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn null_never_equals() {
        assert_eq!(Value::Null.sql_eq(&Value::Null), None);
        assert_eq!(Value::Number(1.0).sql_eq(&Value::Null), None);
        assert_eq!(Value::Number(1.0).sql_eq(&Value::Number(1.0)), Some(true));
        assert_eq!(Value::Real(6.652).sql_eq(&Value::Number(6.652f32 as f64)), Some(true));
    }

    #[test]
    fn real_renders_single_precision_digits() {
        let v = Value::Real(6.652);
        assert_eq!(v.to_string(), "6.652");
        assert_eq!(v.as_f64().unwrap(), 6.6519999504089355);
    }

    #[test]
    fn empty_stats_project_null() {
        let s = SummaryStats::empty();
        assert!(matches!(s.field("count"), Some(Value::Number(c)) if c == 0.0));
        assert!(matches!(s.field("sum"), Some(Value::Number(c)) if c == 0.0));
        for name in ["mean", "stddev", "min", "max"] {
            assert!(s.field(name).unwrap().is_null());
        }
        assert!(s.field("median").is_none());
    }

    #[test]
    fn stats_of_one_to_nine() {
        let mut acc = StatsAccumulator::default();
        (1..=9).for_each(|v| acc.push(v as f64));
        let s = acc.finish();
        // population variance of 1..9 is 60/9
        assert_eq!((s.count, s.sum, s.mean, s.min, s.max), (9, 45.0, 5.0, 1.0, 9.0));
        assert!((s.stddev - (60.0f64 / 9.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stats_order_is_fieldwise() {
        let mut a = StatsAccumulator::default();
        let mut b = StatsAccumulator::default();
        [1.0, 2.0].iter().for_each(|v| a.push(*v));
        [1.0, 5.0].iter().for_each(|v| b.push(*v));
        let (a, b) = (Value::Stats(a.finish()), Value::Stats(b.finish()));
        assert_eq!(a.sort_cmp(&b), Ordering::Less);
        assert_eq!(Value::Null.sort_cmp(&a), Ordering::Greater);
    }

    #[test]
    fn timestamps_truncate_to_micros() {
        let t = parse_timestamp("2011-06-01T10:00:00.1234567Z").unwrap();
        assert_eq!(format_timestamp(&t), "2011-06-01T10:00:00.123456Z");
        let t = parse_timestamp("2011-06-01T12:00:00+02:00").unwrap();
        assert_eq!(format_timestamp(&t), "2011-06-01T10:00:00Z");
        assert_eq!(
            Value::Timestamp(t).sql_cmp(&Value::Text("2011-06-01T10:00:00Z".into())),
            Some(Ordering::Equal)
        );
    }

    #[test]
    fn bytes_render_lower_hex() {
        assert_eq!(Value::Bytes(vec![0x01, 0xab]).to_string(), "01ab");
    }

    proptest! {
        #[test]
        fn merged_accumulators_match_single_pass(
            a in proptest::collection::vec(-1e3..1e3f64, 0..40),
            b in proptest::collection::vec(-1e3..1e3f64, 0..40),
        ) {
            let mut whole = StatsAccumulator::default();
            a.iter().chain(b.iter()).for_each(|v| whole.push(*v));
            let mut left = StatsAccumulator::default();
            let mut right = StatsAccumulator::default();
            a.iter().for_each(|v| left.push(*v));
            b.iter().for_each(|v| right.push(*v));
            left.merge(&right);
            let (x, y) = (whole.finish(), left.finish());
            prop_assert_eq!(x.count, y.count);
            if x.count > 0 {
                prop_assert_eq!(x.min, y.min);
                prop_assert_eq!(x.max, y.max);
                prop_assert!((x.sum - y.sum).abs() <= 1e-9 * (1.0 + x.sum.abs()));
                prop_assert!((x.mean - y.mean).abs() <= 1e-9 * (1.0 + x.mean.abs()));
                prop_assert!((x.stddev - y.stddev).abs() <= 1e-9 * (1.0 + x.stddev));
                prop_assert!(y.min <= y.mean && y.mean <= y.max && y.stddev >= 0.0);
            }
        }

        #[test]
        fn rendered_numbers_reparse_bitwise(v in proptest::num::f64::ANY) {
            prop_assume!(!v.is_nan());
            let text = Value::Number(v).to_string();
            prop_assert_eq!(text.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
