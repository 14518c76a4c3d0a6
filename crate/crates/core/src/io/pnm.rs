use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::param(format!("rasters have 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::param("raster data length does not match its dimensions"));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Raster {
            width,
            height,
            channels: 3,
            data: color.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * self.channels;
            self.data[i..i + 3].copy_from_slice(&color);
        }
    }

    /// Quantizes a [C, H, W] tensor with values in [0, 1].
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let &[c, h, w] = t.shape() else {
            return Err(Error::param(format!("expected a [C, H, W] image, got {:?}", t.shape())));
        };
        let mut data = vec![0u8; c * h * w];
        for ch in 0..c {
            for i in 0..h * w {
                data[i * c + ch] = quantize(t.data()[ch * h * w + i]);
            }
        }
        Raster::new(w, h, c, data)
    }

    pub fn to_tensor(&self) -> Tensor {
        let (c, hw) = (self.channels, self.width * self.height);
        let mut data = vec![0.0f32; c * hw];
        for i in 0..hw {
            for ch in 0..c {
                data[ch * hw + i] = self.data[i * c + ch] as f32 / 255.0;
            }
        }
        Tensor::from_parts(vec![c, self.height, self.width], data)
    }
}

pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    raster_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let err = |offset: usize, message: &str| Error::Format {
        offset: offset as u64,
        message: message.to_string(),
    };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(err(0, "expected P5 or P6 magic")),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if pos == start {
            return Err(err(pos, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(start, "header field out of range"))?;
        if k < 2 && *field == 0 {
            return Err(err(start, "image dimensions must be positive"));
        }
    }
    if fields[2] != 255 {
        return Err(Error::UnsupportedMaxVal(fields[2]));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(err(pos, "expected whitespace after the maximum value"));
    }
    Ok(Header {
        channels,
        width: fields[0] as usize,
        height: fields[1] as usize,
        raster_offset: pos + 1,
    })
}

/// Decodes binary PGM (P5) or PPM (P6) with maximum value 255.
pub fn decode_raster(bytes: &[u8]) -> Result<Raster> {
    let h = parse_header(bytes)?;
    let len = h.width * h.height * h.channels;
    let body = &bytes[h.raster_offset..];
    if body.len() < len {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("raster truncated: expected {len} bytes, found {}", body.len()),
        });
    }
    if body.len() > len {
        return Err(Error::Format {
            offset: (h.raster_offset + len) as u64,
            message: "trailing bytes after raster".into(),
        });
    }
    Raster::new(h.width, h.height, h.channels, body.to_vec())
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Tensor> {
    Ok(decode_raster(bytes)?.to_tensor())
}

pub fn encode_raster(r: &Raster) -> Vec<u8> {
    let magic = if r.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", r.width, r.height).into_bytes();
    out.extend_from_slice(&r.data);
    out
}

/// Encodes a [1, H, W] tensor as PGM or a [3, H, W] tensor as PPM.
pub fn encode_pnm(t: &Tensor) -> Result<Vec<u8>> {
    let r = Raster::from_tensor(t)?;
    Ok(encode_raster(&r))
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raster(&bytes)
}

pub fn read_image(path: &Path) -> Result<Tensor> {
    Ok(read_raster(path)?.to_tensor())
}

pub fn write_raster(r: &Raster, path: &Path) -> Result<()> {
    std::fs::write(path, encode_raster(r)).map_err(|e| Error::io(path, e))
}

pub fn write_image(t: &Tensor, path: &Path) -> Result<()> {
    write_raster(&Raster::from_tensor(t)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_pgm_is_zeros() {
        let t = decode_pnm(b"P5\n2 2\n255\n\0\0\0\0").unwrap();
        assert_eq!(t.shape(), &[1, 2, 2]);
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn comments_and_whitespace_are_skipped() {
        let t = decode_pnm(b"P6 # rgb\n1\t1 # one pixel\n255\n\xff\x00\x80").unwrap();
        assert_eq!(t.data(), &[1.0, 0.0, 128.0 / 255.0]);
    }

    #[test]
    fn encode_decode_round_trip() {
        let bytes = b"P6\n2 1\n255\n\x01\x02\x03\xfd\xfe\xff".to_vec();
        assert_eq!(encode_pnm(&decode_pnm(&bytes).unwrap()).unwrap(), bytes);
    }

    #[test]
    fn errors_carry_offsets() {
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n0"), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\0\0"), Err(Error::UnsupportedMaxVal(65535))));
        assert!(matches!(decode_pnm(b"P5\n2 2\n255\n\0"), Err(Error::Format { offset: 12, .. })));
        assert!(matches!(decode_pnm(b"P5\nx"), Err(Error::Format { offset: 3, .. })));
        assert!(matches!(decode_pnm(b"P5\n1 1\n255\n\0\0"), Err(Error::Format { offset: 12, .. })));
        assert!(matches!(decode_pnm(b"P5\n0 1\n255\n"), Err(Error::Format { .. })));
    }
}
