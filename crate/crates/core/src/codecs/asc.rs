//! ESRI ASCII grid reader.

use super::CodecError;
use crate::raster::GeoTransform;
use crate::value::format_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct AscGrid {
    pub width: u32,
    pub height: u32,
    pub geotransform: GeoTransform,
    pub nodata: Option<f64>,
    /// Row-major, top row first.
    pub cells: Vec<f64>,
}

fn header_err(key: &str, line: usize, reason: impl Into<String>) -> CodecError {
    CodecError::Header { key: key.to_string(), line, reason: reason.into() }
}

#[derive(Default)]
struct Header {
    ncols: Option<u32>,
    nrows: Option<u32>,
    x: Option<(f64, bool)>,
    y: Option<(f64, bool)>,
    cellsize: Option<f64>,
    nodata: Option<f64>,
}

pub fn parse_asc(text: &str) -> Result<AscGrid, CodecError> {
    let mut h = Header::default();
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(idx, line)) = lines.peek() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            lines.next();
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        lines.next();
        let lower = key.to_ascii_lowercase();
        let raw = parts.next().ok_or_else(|| header_err(&lower, line_no, "missing value"))?;
        if parts.next().is_some() {
            return Err(header_err(&lower, line_no, "trailing tokens"));
        }
        let num = || raw.parse::<f64>().ok().filter(|v| v.is_finite());
        let count = || raw.parse::<u32>().ok().filter(|&n| n > 0);
        let dup = |present: bool| if present { Err(header_err(&lower, line_no, "repeated key")) } else { Ok(()) };
        match lower.as_str() {
            "ncols" => {
                dup(h.ncols.is_some())?;
                h.ncols = Some(count().ok_or_else(|| header_err(&lower, line_no, format!("{raw:?} is not a positive integer")))?);
            }
            "nrows" => {
                dup(h.nrows.is_some())?;
                h.nrows = Some(count().ok_or_else(|| header_err(&lower, line_no, format!("{raw:?} is not a positive integer")))?);
            }
            "xllcorner" | "xllcenter" => {
                dup(h.x.is_some())?;
                let v = num().ok_or_else(|| header_err(&lower, line_no, format!("{raw:?} is not a number")))?;
                h.x = Some((v, lower == "xllcenter"));
            }
            "yllcorner" | "yllcenter" => {
                dup(h.y.is_some())?;
                let v = num().ok_or_else(|| header_err(&lower, line_no, format!("{raw:?} is not a number")))?;
                h.y = Some((v, lower == "yllcenter"));
            }
            "cellsize" => {
                dup(h.cellsize.is_some())?;
                let v = num()
                    .filter(|&v| v > 0.0)
                    .ok_or_else(|| header_err(&lower, line_no, format!("{raw:?} is not a positive number")))?;
                h.cellsize = Some(v);
            }
            "nodata_value" => {
                dup(h.nodata.is_some())?;
                h.nodata = Some(raw.parse::<f64>().map_err(|_| header_err(&lower, line_no, format!("{raw:?} is not a number")))?);
            }
            _ => return Err(header_err(&lower, line_no, "unknown header key")),
        }
    }
    let missing = |key: &str| header_err(key, 0, "missing");
    let width = h.ncols.ok_or_else(|| missing("ncols"))?;
    let height = h.nrows.ok_or_else(|| missing("nrows"))?;
    let (x, x_center) = h.x.ok_or_else(|| missing("xllcorner"))?;
    let (y, y_center) = h.y.ok_or_else(|| missing("yllcorner"))?;
    let cs = h.cellsize.ok_or_else(|| missing("cellsize"))?;
    let x0 = if x_center { x - cs / 2.0 } else { x };
    let y_bottom = if y_center { y - cs / 2.0 } else { y };
    let y0 = y_bottom + height as f64 * cs;

    let expected = width as usize * height as usize;
    let mut cells = Vec::with_capacity(expected);
    for (idx, line) in lines {
        for tok in line.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|_| CodecError::BadCell { text: tok.to_string(), line: idx + 1 })?;
            cells.push(v);
        }
    }
    if cells.len() != expected {
        return Err(CodecError::CellCountMismatch { expected, actual: cells.len() });
    }
    Ok(AscGrid { width, height, geotransform: GeoTransform::new(x0, y0, cs, -cs), nodata: h.nodata, cells })
}

/// Writes a grid back as ESRI ASCII text (lower-left corner form). Assumes
/// square cells.
pub fn render_asc(grid: &AscGrid) -> String {
    let gt = grid.geotransform;
    let mut out = format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\n",
        grid.width,
        grid.height,
        format_f64(gt.x0),
        format_f64(gt.y0 + gt.dy * grid.height as f64),
        format_f64(gt.dx)
    );
    if let Some(nd) = grid.nodata {
        out.push_str(&format!("NODATA_value {}\n", format_f64(nd)));
    }
    for row in grid.cells.chunks(grid.width.max(1) as usize) {
        let parts: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        out.push_str(&parts.join(" "));
        out.push('\n');
    }
    out
}
