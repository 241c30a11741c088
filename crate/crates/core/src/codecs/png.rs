//! 8-bit grayscale+alpha PNG with a min-max stretch. NoData cells are
//! fully transparent.

use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::Compression;

use super::{CodecError, EncodedPayload, Grid, MediaType};

const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

fn chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    let start = out.len();
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_be_bytes());
}

/// Gray level for `v` given the data range. A constant grid maps to mid-gray.
pub fn stretch(v: f64, min: f64, max: f64) -> u8 {
    if max <= min {
        return 128;
    }
    (((v - min) / (max - min)) * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_png(grid: &Grid) -> Result<EncodedPayload, CodecError> {
    let (w, h) = (grid.width as usize, grid.height as usize);
    if w == 0 || h == 0 {
        return Err(CodecError::EmptyGrid);
    }
    if grid.cells.len() != w * h {
        return Err(CodecError::CellCountMismatch { expected: w * h, actual: grid.cells.len() });
    }
    let valid = |v: f64| !grid.is_nodata(v) && v.is_finite();
    let (min, max) = grid
        .cells
        .iter()
        .copied()
        .filter(|&v| valid(v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));

    let mut raw = Vec::with_capacity(h * (1 + 2 * w));
    for row in grid.cells.chunks_exact(w) {
        raw.push(0);
        for &v in row {
            if valid(v) {
                raw.extend_from_slice(&[stretch(v, min, max), 255]);
            } else {
                raw.extend_from_slice(&[0, 0]);
            }
        }
    }
    let mut z = ZlibEncoder::new(Vec::new(), Compression::default());
    z.write_all(&raw).expect("in-memory write");
    let idat = z.finish().expect("in-memory write");

    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&grid.width.to_be_bytes());
    ihdr.extend_from_slice(&grid.height.to_be_bytes());
    ihdr.extend_from_slice(&[8, 4, 0, 0, 0]);

    let mut out = SIGNATURE.to_vec();
    chunk(&mut out, b"IHDR", &ihdr);
    chunk(&mut out, b"IDAT", &idat);
    chunk(&mut out, b"IEND", &[]);
    Ok(EncodedPayload { media_type: MediaType::Png, bytes: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;

    fn grid(w: u32, h: u32, cells: Vec<f64>, nodata: Option<f64>) -> Grid {
        Grid { width: w, height: h, cells, geotransform: GeoTransform::new(0.0, 0.0, 1.0, -1.0), srid: 4326, nodata }
    }

    fn decode(bytes: &[u8]) -> (png::OutputInfo, Vec<u8>) {
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info, buf)
    }

    #[test]
    fn ramp_maps_to_full_range() {
        let g = grid(4, 1, vec![0.0, 1.0, 2.0, 3.0], None);
        let (info, px) = decode(&encode_png(&g).unwrap().bytes);
        assert_eq!((info.width, info.height), (4, 1));
        assert_eq!(info.color_type, png::ColorType::GrayscaleAlpha);
        assert_eq!(px, vec![0, 255, 85, 255, 170, 255, 255, 255]);
    }

    #[test]
    fn nodata_is_transparent_and_constant_is_mid_gray() {
        let g = grid(2, 2, vec![5.0, -1.0, 5.0, f64::NAN], Some(-1.0));
        let (_, px) = decode(&encode_png(&g).unwrap().bytes);
        assert_eq!(px, vec![128, 255, 0, 0, 128, 255, 0, 0]);
    }

    #[test]
    fn corrupt_crc_is_detected() {
        let mut bytes = encode_png(&grid(1, 1, vec![1.0], None)).unwrap().bytes;
        // last byte of the IHDR CRC
        bytes[8 + 4 + 4 + 13 + 3] ^= 0xff;
        assert!(png::Decoder::new(std::io::Cursor::new(bytes)).read_info().is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(encode_png(&grid(0, 0, vec![], None)), Err(CodecError::EmptyGrid));
    }
}
