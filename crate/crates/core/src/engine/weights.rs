//! Binary weight file, little-endian:
//!
//! ```text
//! "PCPT" | u32 version | u32 layer count | u32 C | u32 H | u32 W
//! per layer: u16 name length | UTF-8 name | u8 kind tag | u32 shape fields | f32 payload
//! ```
//!
//! Shape fields: conv2d `in out kh kw stride padding`, maxpool2d `size stride`,
//! dense `in out`, none for relu/flatten/softmax. Payloads are weights then
//! bias, row-major.

use std::io::{Read, Write};
use std::path::Path;

use super::layer::{Conv2d, Dense, Layer, LayerKind};
use super::Network;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PCPT";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_network(net: &Network, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for d in net.input_shape() {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    let u32s = |out: &mut dyn Write, vals: &[usize]| -> std::io::Result<()> {
        for &v in vals {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        Ok(())
    };
    let f32s = |out: &mut dyn Write, vals: &[f32]| -> std::io::Result<()> {
        for &v in vals {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    for layer in net.layers() {
        out.write_all(&(layer.name.len() as u16).to_le_bytes())?;
        out.write_all(layer.name.as_bytes())?;
        out.write_all(&[layer.kind.tag()])?;
        match &layer.kind {
            LayerKind::Conv2d(c) => {
                u32s(out, &[c.in_channels, c.out_channels, c.kernel_h, c.kernel_w, c.stride, c.padding])?;
                f32s(out, &c.weight)?;
                f32s(out, &c.bias)?;
            }
            LayerKind::MaxPool2d { size, stride } => u32s(out, &[*size, *stride])?,
            LayerKind::Dense(d) => {
                u32s(out, &[d.in_features, d.out_features])?;
                f32s(out, &d.weight)?;
                f32s(out, &d.bias)?;
            }
            LayerKind::Relu | LayerKind::Flatten | LayerKind::Softmax => {}
        }
    }
    Ok(())
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_network(net, &mut buf).expect("writing to a Vec cannot fail");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    read_network(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("unexpected end of file reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn dims<const N: usize>(&mut self, what: &str) -> Result<[usize; N]> {
        let mut out = [0usize; N];
        for d in &mut out {
            *d = self.u32(what)? as usize;
        }
        Ok(out)
    }

    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let start = self.pos;
        let raw = self.take(count.checked_mul(4).ok_or_else(|| self.err(start, "payload size overflow"))?, what)?;
        let vals: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(self.err(start + 4 * i, "non-finite weight"));
        }
        Ok(vals)
    }

    fn err(&self, offset: usize, message: &str) -> Error {
        Error::Format {
            offset: offset as u64,
            message: message.to_string(),
        }
    }
}

/// Parses a weight file image. Truncation and malformed fields are reported
/// with the byte offset at which they were detected.
pub fn read_network(bytes: &[u8]) -> Result<Network> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(cur.err(0, "bad magic, expected \"PCPT\""));
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = cur.u32("layer count")? as usize;
    let [c, h, w] = cur.dims::<3>("input shape")?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_at = cur.pos;
        let len = cur.u16("name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "layer name")?)
            .map_err(|_| cur.err(name_at + 2, "layer name is not UTF-8"))?
            .to_string();
        let tag_at = cur.pos;
        let kind = match cur.u8("kind tag")? {
            1 => {
                let [ic, oc, kh, kw, stride, padding] = cur.dims::<6>("conv2d shape")?;
                let weight = cur.f32s(oc * ic * kh * kw, "conv2d weights")?;
                let bias = cur.f32s(oc, "conv2d bias")?;
                LayerKind::Conv2d(Conv2d {
                    in_channels: ic,
                    out_channels: oc,
                    kernel_h: kh,
                    kernel_w: kw,
                    stride,
                    padding,
                    weight,
                    bias,
                })
            }
            2 => LayerKind::Relu,
            3 => {
                let [size, stride] = cur.dims::<2>("maxpool2d shape")?;
                LayerKind::MaxPool2d { size, stride }
            }
            4 => LayerKind::Flatten,
            5 => {
                let [inf, outf] = cur.dims::<2>("dense shape")?;
                let weight = cur.f32s(inf * outf, "dense weights")?;
                let bias = cur.f32s(outf, "dense bias")?;
                LayerKind::Dense(Dense {
                    in_features: inf,
                    out_features: outf,
                    weight,
                    bias,
                })
            }
            6 => LayerKind::Softmax,
            t => return Err(cur.err(tag_at, &format!("unknown layer kind tag {t}"))),
        };
        layers.push(Layer { name, kind });
    }
    if cur.pos != bytes.len() {
        return Err(cur.err(cur.pos, "trailing bytes after last layer"));
    }
    Network::new([c, h, w], layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Network {
        Network::new(
            [1, 4, 4],
            vec![
                Layer::conv2d("conv", 1, 2, 3, 1, 1, (0..18).map(|i| i as f32 * 0.1 - 0.9).collect(), vec![0.1, -0.2]),
                Layer::relu("relu"),
                Layer::maxpool("pool", 2, 2),
                Layer::flatten("flat"),
                Layer::dense("fc", 8, 3, (0..24).map(|i| (i as f32).sin()).collect(), vec![0.0, 1.0, -1.0]),
                Layer::softmax("softmax"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let net = small();
        let mut a = Vec::new();
        write_network(&net, &mut a).unwrap();
        let back = read_network(&a).unwrap();
        assert_eq!(back, net);
        let mut b = Vec::new();
        write_network(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let mut bytes = Vec::new();
        write_network(&small(), &mut bytes).unwrap();
        for cut in 0..bytes.len() {
            match read_network(&bytes[..cut]) {
                Err(Error::Format { offset, .. }) => assert!(offset as usize <= cut),
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut bytes = Vec::new();
        write_network(&small(), &mut bytes).unwrap();
        bytes[4] = 2;
        assert!(matches!(read_network(&bytes), Err(Error::UnsupportedVersion(2))));
        bytes[0] = b'X';
        assert!(matches!(read_network(&bytes), Err(Error::Format { offset: 0, .. })));
    }
}
