//! Tile file codec: 16-byte header (`GFT1`, u16 LE tile size, u8 pixel
//! type code, 9 zero bytes) followed by `tile_size²` little-endian samples,
//! row-major, top row first.

use super::PixelType;

pub const TILE_MAGIC: &[u8; 4] = b"GFT1";
pub const TILE_HEADER_LEN: usize = 16;

pub fn encode_tile(tile_size: u16, pixel_type: PixelType, cells: &[f64]) -> Vec<u8> {
    debug_assert_eq!(cells.len(), tile_size as usize * tile_size as usize);
    let mut out = Vec::with_capacity(TILE_HEADER_LEN + cells.len() * pixel_type.sample_bytes());
    out.extend_from_slice(TILE_MAGIC);
    out.extend_from_slice(&tile_size.to_le_bytes());
    out.push(pixel_type.code());
    out.extend_from_slice(&[0u8; 9]);
    match pixel_type {
        PixelType::Float32 => cells.iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        PixelType::Float64 => cells.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

pub fn decode_tile(bytes: &[u8]) -> Result<(u32, PixelType, Vec<f64>), String> {
    if bytes.len() < TILE_HEADER_LEN {
        return Err(format!("file is {} bytes, shorter than the header", bytes.len()));
    }
    if &bytes[..4] != TILE_MAGIC {
        return Err("bad magic".into());
    }
    let ts = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let pt = PixelType::from_code(bytes[6]).ok_or_else(|| format!("unknown pixel type code {}", bytes[6]))?;
    if bytes[7..16].iter().any(|&b| b != 0) {
        return Err("reserved header bytes are not zero".into());
    }
    let body = &bytes[TILE_HEADER_LEN..];
    let expected = ts * ts * pt.sample_bytes();
    if body.len() != expected {
        return Err(format!("expected {expected} sample bytes, found {}", body.len()));
    }
    let cells = match pt {
        PixelType::Float32 => body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
        PixelType::Float64 => body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    Ok((ts as u32, pt, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let bytes = encode_tile(2, PixelType::Float64, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(&bytes[..16], b"GFT1\x02\x00\x02\0\0\0\0\0\0\0\0\0");
        assert_eq!(bytes.len(), 16 + 32);
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        let (ts, pt, cells) = decode_tile(&bytes).unwrap();
        assert_eq!((ts, pt, cells), (2, PixelType::Float64, vec![1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn float32_width() {
        let bytes = encode_tile(1, PixelType::Float32, &[6.652f32 as f64]);
        assert_eq!(bytes.len(), 20);
        assert_eq!(bytes[6], 1);
        assert_eq!(decode_tile(&bytes).unwrap().2, vec![6.652f32 as f64]);
    }

    #[test]
    fn rejects_damage() {
        let mut bytes = encode_tile(1, PixelType::Float64, &[0.0]);
        assert!(decode_tile(&bytes[..10]).is_err());
        assert!(decode_tile(&bytes[..20]).is_err());
        bytes[10] = 1;
        assert!(decode_tile(&bytes).is_err());
        bytes[10] = 0;
        bytes[0] = b'X';
        assert!(decode_tile(&bytes).is_err());
    }
}
