//! GML-lite: a flat feature collection, one feature per row, one child
//! element per column.

use std::fmt::Write;

use super::{CodecError, EncodedPayload, MediaType};
use crate::geom::{Envelope, Geometry, Point};
use crate::query::ResultSet;
use crate::value::{format_f64, Value};

pub const GML_NS: &str = "http://www.opengis.net/gml";

/// Turns a column name into a valid XML element name.
fn element_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' })
        .collect();
    if !out.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
        out.insert(0, '_');
    }
    out
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn point_xml(p: &Point) -> String {
    format!(
        "<gml:Point srsName=\"EPSG:{}\"><gml:pos>{} {}</gml:pos></gml:Point>",
        p.srid,
        format_f64(p.x),
        format_f64(p.y)
    )
}

fn envelope_xml(e: &Envelope) -> String {
    format!(
        "<gml:Envelope srsName=\"EPSG:{}\"><gml:lowerCorner>{} {}</gml:lowerCorner><gml:upperCorner>{} {}</gml:upperCorner></gml:Envelope>",
        e.srid,
        format_f64(e.min_x),
        format_f64(e.min_y),
        format_f64(e.max_x),
        format_f64(e.max_y)
    )
}

fn value_xml(v: &Value) -> Result<String, CodecError> {
    match v {
        Value::Geometry(Geometry::Point(p)) => Ok(point_xml(p)),
        Value::Geometry(g @ Geometry::Circle(_)) => Err(CodecError::UnsupportedGeometry(g.to_wkt())),
        Value::GeomVal(gv) => Ok(format!("{}<gml:value>{}</gml:value>", point_xml(&gv.geom), format_f64(gv.val))),
        Value::Envelope(e) => Ok(envelope_xml(e)),
        Value::Raster(t) => Ok(envelope_xml(&t.footprint())),
        other => Ok(escape(&other.to_string())),
    }
}

pub fn encode_gml(rs: &ResultSet) -> Result<EncodedPayload, CodecError> {
    let names: Vec<String> = rs.columns.iter().map(|c| element_name(&c.name)).collect();
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<gml:FeatureCollection xmlns:gml=\"{GML_NS}\">");
    for row in &rs.rows {
        out.push_str("<gml:featureMember><Feature>");
        for (name, v) in names.iter().zip(row) {
            if v.is_null() {
                let _ = write!(out, "<{name}/>");
            } else {
                let _ = write!(out, "<{name}>{}</{name}>", value_xml(v)?);
            }
        }
        out.push_str("</Feature></gml:featureMember>\n");
    }
    out.push_str("</gml:FeatureCollection>\n");
    Ok(EncodedPayload { media_type: MediaType::Gml, bytes: out.into_bytes() })
}
