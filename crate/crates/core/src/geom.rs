//! Planar point geometry, envelopes and buffers.
//!
//! All coordinates are planar in the srid of the coverage or table they
//! belong to; nothing here reprojects.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("srid mismatch: {left} vs {right}")]
    SridMismatch { left: i32, right: i32 },
    #[error("buffer radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("srid must be positive, got {0}")]
    InvalidSrid(i32),
    #[error("invalid envelope: min exceeds max")]
    InvertedEnvelope,
    #[error("cannot parse WKT: {0}")]
    Wkt(String),
    #[error("cannot decode WKB: {0}")]
    Wkb(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub srid: i32,
}

impl Point {
    pub fn new(x: f64, y: f64, srid: i32) -> Result<Self, GeomError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if srid <= 0 {
            return Err(GeomError::InvalidSrid(srid));
        }
        Ok(Point { x, y, srid })
    }

    /// `POINT(x y)` with shortest round-trip decimals.
    pub fn to_wkt(&self) -> String {
        format!("POINT({} {})", self.x, self.y)
    }

    pub fn from_wkt(text: &str, srid: i32) -> Result<Self, GeomError> {
        let t = text.trim();
        let upper = t.to_ascii_uppercase();
        let rest = upper
            .strip_prefix("POINT")
            .ok_or_else(|| GeomError::Wkt(format!("expected POINT, got {t:?}")))?
            .trim_start();
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| GeomError::Wkt(format!("unbalanced parentheses in {t:?}")))?;
        let mut parts = inner.split_whitespace();
        let mut coord = |axis: &str| -> Result<f64, GeomError> {
            parts
                .next()
                .ok_or_else(|| GeomError::Wkt(format!("missing {axis} coordinate")))?
                .parse::<f64>()
                .map_err(|e| GeomError::Wkt(format!("bad {axis} coordinate: {e}")))
        };
        let x = coord("x")?;
        let y = coord("y")?;
        if parts.next().is_some() {
            return Err(GeomError::Wkt("only 2D points are supported".into()));
        }
        Point::new(x, y, srid)
    }

    /// ISO WKB: little-endian marker, type 1, x, y. Always 21 bytes.
    pub fn to_wkb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21);
        out.push(0x01);
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&self.x.to_le_bytes());
        out.extend_from_slice(&self.y.to_le_bytes());
        out
    }

    pub fn from_wkb(bytes: &[u8], srid: i32) -> Result<Self, GeomError> {
        if bytes.len() != 21 {
            return Err(GeomError::Wkb(format!("expected 21 bytes, got {}", bytes.len())));
        }
        let le = match bytes[0] {
            0x01 => true,
            0x00 => false,
            b => return Err(GeomError::Wkb(format!("bad byte order marker {b:#04x}"))),
        };
        let word = |s: &[u8]| -> [u8; 8] { s.try_into().expect("slice of 8") };
        let kind = if le {
            u32::from_le_bytes(bytes[1..5].try_into().expect("slice of 4"))
        } else {
            u32::from_be_bytes(bytes[1..5].try_into().expect("slice of 4"))
        };
        if kind != 1 {
            return Err(GeomError::Wkb(format!("geometry type {kind} is not a point")));
        }
        let (x, y) = if le {
            (f64::from_le_bytes(word(&bytes[5..13])), f64::from_le_bytes(word(&bytes[13..21])))
        } else {
            (f64::from_be_bytes(word(&bytes[5..13])), f64::from_be_bytes(word(&bytes[13..21])))
        };
        Point::new(x, y, srid)
    }

    pub fn envelope(&self) -> Envelope {
        Envelope { min_x: self.x, min_y: self.y, max_x: self.x, max_y: self.y, srid: self.srid }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_wkt())
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub srid: i32,
}

impl Envelope {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64, srid: i32) -> Result<Self, GeomError> {
        if ![min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        if min_x > max_x || min_y > max_y {
            return Err(GeomError::InvertedEnvelope);
        }
        Ok(Envelope { min_x, min_y, max_x, max_y, srid })
    }

    /// Shared edges and corners count as overlap.
    pub fn overlaps(&self, other: &Envelope) -> Result<bool, GeomError> {
        check_srid(self.srid, other.srid)?;
        Ok(self.overlaps_unchecked(other))
    }

    pub(crate) fn overlaps_unchecked(&self, other: &Envelope) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains(&self, other: &Envelope) -> bool {
        self.min_x <= other.min_x
            && self.min_y <= other.min_y
            && self.max_x >= other.max_x
            && self.max_y >= other.max_y
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.min_x <= x && x <= self.max_x && self.min_y <= y && y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn union(&self, other: &Envelope) -> Envelope {
        Envelope {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
            srid: self.srid,
        }
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BOX({} {},{} {})", self.min_x, self.min_y, self.max_x, self.max_y)
    }
}

pub fn envelopes_overlap(a: &Envelope, b: &Envelope) -> Result<bool, GeomError> {
    a.overlaps(b)
}

pub(crate) fn check_srid(left: i32, right: i32) -> Result<(), GeomError> {
    if left == right {
        Ok(())
    } else {
        Err(GeomError::SridMismatch { left, right })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn envelope(&self) -> Envelope {
        let Point { x, y, srid } = self.center;
        let r = self.radius;
        Envelope { min_x: x - r, min_y: y - r, max_x: x + r, max_y: y + r, srid }
    }

    /// Closed disc membership.
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center.x;
        let dy = y - self.center.y;
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

pub fn buffer_point(p: Point, radius: f64) -> Result<Circle, GeomError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeomError::NonPositiveRadius(radius));
    }
    Ok(Circle { center: p, radius })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Point(Point),
    Circle(Circle),
}

impl Geometry {
    pub fn srid(&self) -> i32 {
        match self {
            Geometry::Point(p) => p.srid,
            Geometry::Circle(c) => c.center.srid,
        }
    }

    pub fn envelope(&self) -> Envelope {
        match self {
            Geometry::Point(p) => p.envelope(),
            Geometry::Circle(c) => c.envelope(),
        }
    }

    pub fn as_point(&self) -> Option<&Point> {
        match self {
            Geometry::Point(p) => Some(p),
            Geometry::Circle(_) => None,
        }
    }

    pub fn to_wkt(&self) -> String {
        match self {
            Geometry::Point(p) => p.to_wkt(),
            Geometry::Circle(c) => {
                format!("CIRCLE({} {}, {})", c.center.x, c.center.y, c.radius)
            }
        }
    }
}

impl From<Point> for Geometry {
    fn from(p: Point) -> Self {
        Geometry::Point(p)
    }
}

impl From<Circle> for Geometry {
    fn from(c: Circle) -> Self {
        Geometry::Circle(c)
    }
}
