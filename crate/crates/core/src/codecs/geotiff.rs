//! Minimal GeoTIFF: little-endian baseline TIFF, one uncompressed strip,
//! one float64 sample per pixel, plus ModelPixelScale, ModelTiepoint,
//! GeoKeyDirectory and GDAL_NODATA. The decoder accepts exactly what the
//! encoder writes.

use super::{CodecError, EncodedPayload, Grid, MediaType};
use crate::raster::GeoTransform;
use crate::value::format_f64;

const IMAGE_WIDTH: u16 = 256;
const IMAGE_LENGTH: u16 = 257;
const BITS_PER_SAMPLE: u16 = 258;
const COMPRESSION: u16 = 259;
const PHOTOMETRIC: u16 = 262;
const STRIP_OFFSETS: u16 = 273;
const SAMPLES_PER_PIXEL: u16 = 277;
const ROWS_PER_STRIP: u16 = 278;
const STRIP_BYTE_COUNTS: u16 = 279;
const PLANAR_CONFIG: u16 = 284;
const SAMPLE_FORMAT: u16 = 339;
const MODEL_PIXEL_SCALE: u16 = 33550;
const MODEL_TIEPOINT: u16 = 33922;
const GEO_KEY_DIRECTORY: u16 = 34735;
const GDAL_NODATA: u16 = 42113;

const ASCII: u16 = 2;
const SHORT: u16 = 3;
const LONG: u16 = 4;
const DOUBLE: u16 = 12;

const GT_MODEL_TYPE: u16 = 1024;
const GT_RASTER_TYPE: u16 = 1025;
const GEOGRAPHIC_TYPE: u16 = 2048;
const PROJECTED_CS_TYPE: u16 = 3072;

fn tag_name(tag: u16) -> String {
    let name = match tag {
        IMAGE_WIDTH => "ImageWidth",
        IMAGE_LENGTH => "ImageLength",
        BITS_PER_SAMPLE => "BitsPerSample",
        COMPRESSION => "Compression",
        PHOTOMETRIC => "PhotometricInterpretation",
        STRIP_OFFSETS => "StripOffsets",
        SAMPLES_PER_PIXEL => "SamplesPerPixel",
        ROWS_PER_STRIP => "RowsPerStrip",
        STRIP_BYTE_COUNTS => "StripByteCounts",
        PLANAR_CONFIG => "PlanarConfiguration",
        SAMPLE_FORMAT => "SampleFormat",
        MODEL_PIXEL_SCALE => "ModelPixelScale",
        MODEL_TIEPOINT => "ModelTiepoint",
        GEO_KEY_DIRECTORY => "GeoKeyDirectory",
        GDAL_NODATA => "GDAL_NODATA",
        322 => "TileWidth",
        323 => "TileLength",
        317 => "Predictor",
        34736 => "GeoDoubleParams",
        34737 => "GeoAsciiParams",
        33920 => "IntergraphMatrix",
        34264 => "ModelTransformation",
        _ => return format!("tag {tag}"),
    };
    format!("{name} ({tag})")
}

/// srids 4000-4999 are written as geographic CRS codes, anything else as
/// projected.
fn is_geographic(srid: i32) -> bool {
    (4000..5000).contains(&srid)
}

enum FieldData {
    Short(Vec<u16>),
    Long(u32),
    Double(Vec<f64>),
    Ascii(Vec<u8>),
}

impl FieldData {
    fn type_and_count(&self) -> (u16, u32) {
        match self {
            FieldData::Short(v) => (SHORT, v.len() as u32),
            FieldData::Long(_) => (LONG, 1),
            FieldData::Double(v) => (DOUBLE, v.len() as u32),
            FieldData::Ascii(v) => (ASCII, v.len() as u32),
        }
    }

    fn bytes(&self) -> Vec<u8> {
        match self {
            FieldData::Short(v) => v.iter().flat_map(|s| s.to_le_bytes()).collect(),
            FieldData::Long(v) => v.to_le_bytes().to_vec(),
            FieldData::Double(v) => v.iter().flat_map(|d| d.to_le_bytes()).collect(),
            FieldData::Ascii(v) => v.clone(),
        }
    }
}

pub fn encode_geotiff(grid: &Grid) -> Result<EncodedPayload, CodecError> {
    let (w, h) = (grid.width, grid.height);
    if w == 0 || h == 0 || grid.cells.is_empty() {
        return Err(CodecError::EmptyGrid);
    }
    if grid.cells.len() != w as usize * h as usize {
        return Err(CodecError::CellCountMismatch { expected: w as usize * h as usize, actual: grid.cells.len() });
    }
    let srid = u16::try_from(grid.srid).map_err(|_| CodecError::UnsupportedSrid(grid.srid))?;
    let data_len = grid.cells.len() * 8;
    let data_len_u32 = u32::try_from(data_len).map_err(|_| CodecError::UnsupportedTiff("grid exceeds 4 GiB".into()))?;
    let gt = grid.geotransform;

    let (model_type, crs_key) = if is_geographic(grid.srid) { (2, GEOGRAPHIC_TYPE) } else { (1, PROJECTED_CS_TYPE) };
    let mut fields: Vec<(u16, FieldData)> = vec![
        (IMAGE_WIDTH, FieldData::Long(w)),
        (IMAGE_LENGTH, FieldData::Long(h)),
        (BITS_PER_SAMPLE, FieldData::Short(vec![64])),
        (COMPRESSION, FieldData::Short(vec![1])),
        (PHOTOMETRIC, FieldData::Short(vec![1])),
        (STRIP_OFFSETS, FieldData::Long(8)),
        (SAMPLES_PER_PIXEL, FieldData::Short(vec![1])),
        (ROWS_PER_STRIP, FieldData::Long(h)),
        (STRIP_BYTE_COUNTS, FieldData::Long(data_len_u32)),
        (PLANAR_CONFIG, FieldData::Short(vec![1])),
        (SAMPLE_FORMAT, FieldData::Short(vec![3])),
        (MODEL_PIXEL_SCALE, FieldData::Double(vec![gt.dx, -gt.dy, 0.0])),
        (MODEL_TIEPOINT, FieldData::Double(vec![0.0, 0.0, 0.0, gt.x0, gt.y0, 0.0])),
        (
            GEO_KEY_DIRECTORY,
            FieldData::Short(vec![
                1, 1, 0, 3,
                GT_MODEL_TYPE, 0, 1, model_type,
                GT_RASTER_TYPE, 0, 1, 1,
                crs_key, 0, 1, srid,
            ]),
        ),
    ];
    if let Some(nd) = grid.nodata {
        let mut text = format_f64(nd).into_bytes();
        text.push(0);
        fields.push((GDAL_NODATA, FieldData::Ascii(text)));
    }

    let ifd_offset = 8 + data_len;
    let ifd_len = 2 + fields.len() * 12 + 4;
    let mut extra_offset = ifd_offset + ifd_len;
    let mut ifd = Vec::with_capacity(ifd_len);
    let mut extra = Vec::new();
    ifd.extend_from_slice(&(fields.len() as u16).to_le_bytes());
    for (tag, data) in &fields {
        let (ty, count) = data.type_and_count();
        let bytes = data.bytes();
        ifd.extend_from_slice(&tag.to_le_bytes());
        ifd.extend_from_slice(&ty.to_le_bytes());
        ifd.extend_from_slice(&count.to_le_bytes());
        if bytes.len() <= 4 {
            let mut inline = [0u8; 4];
            inline[..bytes.len()].copy_from_slice(&bytes);
            ifd.extend_from_slice(&inline);
        } else {
            ifd.extend_from_slice(&(extra_offset as u32).to_le_bytes());
            extra.extend_from_slice(&bytes);
            if bytes.len() % 2 == 1 {
                extra.push(0);
            }
            extra_offset = ifd_offset + ifd_len + extra.len();
        }
    }
    ifd.extend_from_slice(&0u32.to_le_bytes());

    let mut out = Vec::with_capacity(ifd_offset + ifd_len + extra.len());
    out.extend_from_slice(b"II*\0");
    out.extend_from_slice(&(ifd_offset as u32).to_le_bytes());
    for v in &grid.cells {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&ifd);
    out.extend_from_slice(&extra);
    Ok(EncodedPayload { media_type: MediaType::Tiff, bytes: out })
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn slice(&self, offset: usize, len: usize) -> Result<&'a [u8], CodecError> {
        offset
            .checked_add(len)
            .and_then(|end| self.bytes.get(offset..end))
            .ok_or_else(|| CodecError::UnsupportedTiff(format!("truncated: need bytes {offset}..{}", offset + len)))
    }

    fn u16(&self, offset: usize) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.slice(offset, 2)?.try_into().expect("2 bytes")))
    }

    fn u32(&self, offset: usize) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.slice(offset, 4)?.try_into().expect("4 bytes")))
    }
}

struct Entry {
    tag: u16,
    ty: u16,
    count: u32,
    value_at: usize,
}

fn type_size(ty: u16) -> Option<usize> {
    match ty {
        ASCII => Some(1),
        SHORT => Some(2),
        LONG => Some(4),
        DOUBLE => Some(8),
        _ => None,
    }
}

impl Entry {
    fn bytes<'a>(&self, r: &Reader<'a>) -> Result<&'a [u8], CodecError> {
        let size = type_size(self.ty)
            .ok_or_else(|| CodecError::UnsupportedTiff(format!("{} has field type {}", tag_name(self.tag), self.ty)))?;
        let len = size * self.count as usize;
        if len <= 4 {
            r.slice(self.value_at, len)
        } else {
            r.slice(r.u32(self.value_at)? as usize, len)
        }
    }

    fn shorts(&self, r: &Reader) -> Result<Vec<u16>, CodecError> {
        self.expect_type(SHORT)?;
        Ok(self.bytes(r)?.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    }

    fn doubles(&self, r: &Reader) -> Result<Vec<f64>, CodecError> {
        self.expect_type(DOUBLE)?;
        Ok(self.bytes(r)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    /// A single SHORT or LONG.
    fn scalar(&self, r: &Reader) -> Result<u32, CodecError> {
        if self.count != 1 {
            return Err(CodecError::UnsupportedTiff(format!("{} has {} values", tag_name(self.tag), self.count)));
        }
        match self.ty {
            SHORT => Ok(r.u16(self.value_at)? as u32),
            LONG => r.u32(self.value_at),
            other => Err(CodecError::UnsupportedTiff(format!("{} has field type {other}", tag_name(self.tag)))),
        }
    }

    fn expect_type(&self, ty: u16) -> Result<(), CodecError> {
        if self.ty != ty {
            return Err(CodecError::UnsupportedTiff(format!("{} has field type {}", tag_name(self.tag), self.ty)));
        }
        Ok(())
    }
}

fn require(cond: bool, what: impl FnOnce() -> String) -> Result<(), CodecError> {
    if cond {
        Ok(())
    } else {
        Err(CodecError::UnsupportedTiff(what()))
    }
}

pub fn decode_geotiff(bytes: &[u8]) -> Result<Grid, CodecError> {
    let r = Reader { bytes };
    let magic = r.slice(0, 4)?;
    if magic == b"MM\0*" {
        return Err(CodecError::UnsupportedTiff("big-endian byte order (MM)".into()));
    }
    require(magic == b"II*\0", || "not a little-endian TIFF (bad magic)".into())?;
    let ifd = r.u32(4)? as usize;
    let n = r.u16(ifd)? as usize;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let at = ifd + 2 + i * 12;
        entries.push(Entry { tag: r.u16(at)?, ty: r.u16(at + 2)?, count: r.u32(at + 4)?, value_at: at + 8 });
    }
    require(r.u32(ifd + 2 + n * 12)? == 0, || "more than one image (next IFD offset is set)".into())?;

    let known = [
        IMAGE_WIDTH, IMAGE_LENGTH, BITS_PER_SAMPLE, COMPRESSION, PHOTOMETRIC, STRIP_OFFSETS, SAMPLES_PER_PIXEL,
        ROWS_PER_STRIP, STRIP_BYTE_COUNTS, PLANAR_CONFIG, SAMPLE_FORMAT, MODEL_PIXEL_SCALE, MODEL_TIEPOINT,
        GEO_KEY_DIRECTORY, GDAL_NODATA,
    ];
    if let Some(e) = entries.iter().find(|e| !known.contains(&e.tag)) {
        return Err(CodecError::UnsupportedTiff(tag_name(e.tag)));
    }
    let get = |tag: u16| {
        entries
            .iter()
            .find(|e| e.tag == tag)
            .ok_or_else(|| CodecError::UnsupportedTiff(format!("missing {}", tag_name(tag))))
    };

    let width = get(IMAGE_WIDTH)?.scalar(&r)?;
    let height = get(IMAGE_LENGTH)?.scalar(&r)?;
    require(width > 0 && height > 0, || "zero-sized image".into())?;
    for (tag, want) in [(BITS_PER_SAMPLE, 64), (COMPRESSION, 1), (SAMPLES_PER_PIXEL, 1), (SAMPLE_FORMAT, 3)] {
        let got = get(tag)?.scalar(&r)?;
        require(got == want, || format!("{} = {got}", tag_name(tag)))?;
    }
    if let Ok(e) = get(PLANAR_CONFIG) {
        let got = e.scalar(&r)?;
        require(got == 1, || format!("{} = {got}", tag_name(PLANAR_CONFIG)))?;
    }
    let rows_per_strip = get(ROWS_PER_STRIP)?.scalar(&r)?;
    require(rows_per_strip >= height, || format!("{} = {rows_per_strip} (multiple strips)", tag_name(ROWS_PER_STRIP)))?;
    let offset = get(STRIP_OFFSETS)?.scalar(&r)? as usize;
    let count = get(STRIP_BYTE_COUNTS)?.scalar(&r)? as usize;
    let n_cells = width as usize * height as usize;
    require(count == n_cells * 8, || format!("{} = {count}, expected {}", tag_name(STRIP_BYTE_COUNTS), n_cells * 8))?;
    let cells = r
        .slice(offset, count)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    let scale = get(MODEL_PIXEL_SCALE)?.doubles(&r)?;
    require(scale.len() == 3, || format!("{} has {} values", tag_name(MODEL_PIXEL_SCALE), scale.len()))?;
    let tie = get(MODEL_TIEPOINT)?.doubles(&r)?;
    require(tie.len() == 6 && tie[0] == 0.0 && tie[1] == 0.0, || {
        format!("{} must tie raster (0,0) once", tag_name(MODEL_TIEPOINT))
    })?;

    let keys = get(GEO_KEY_DIRECTORY)?.shorts(&r)?;
    require(keys.len() >= 4 && keys.len() == 4 + 4 * keys[3] as usize, || {
        format!("malformed {}", tag_name(GEO_KEY_DIRECTORY))
    })?;
    let mut srid = None;
    for k in keys[4..].chunks_exact(4) {
        match k[0] {
            GT_MODEL_TYPE | GT_RASTER_TYPE => {}
            GEOGRAPHIC_TYPE | PROJECTED_CS_TYPE => {
                require(k[1] == 0 && k[2] == 1, || format!("geo key {} stored out of line", k[0]))?;
                srid = Some(k[3] as i32);
            }
            other => return Err(CodecError::UnsupportedTiff(format!("geo key {other}"))),
        }
    }
    let srid = srid.ok_or_else(|| CodecError::UnsupportedTiff("no CRS geo key".into()))?;

    let nodata = match entries.iter().find(|e| e.tag == GDAL_NODATA) {
        Some(e) => {
            e.expect_type(ASCII)?;
            let raw = e.bytes(&r)?;
            let text = std::str::from_utf8(raw).map_err(|_| CodecError::UnsupportedTiff("GDAL_NODATA is not UTF-8".into()))?;
            let text = text.trim_end_matches('\0').trim();
            Some(text.parse::<f64>().map_err(|_| CodecError::UnsupportedTiff(format!("GDAL_NODATA {text:?}")))?)
        }
        None => None,
    };

    Ok(Grid {
        width,
        height,
        cells,
        geotransform: GeoTransform::new(tie[3], tie[4], scale[0], -scale[1]),
        srid,
        nodata,
    })
}
