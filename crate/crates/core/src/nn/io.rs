//! Little-endian binary weight blobs.
//!
//! Layout: `b"EVOW"`, version `u32`, layer count `u32`, then per layer a
//! kind tag `u8`, the kind's hyperparameters as `u32`s, weight and bias
//! lengths as `u64`, and the raw `f32` weights followed by the biases.

use crate::error::{Error, Result};
use crate::tensor::Shape3;

use super::{Activation, ConvSpec, Layer, LayerKind, Network, Params};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"EVOW";
pub const WEIGHTS_VERSION: u32 = 1;

const TAG_CONV: u8 = 0;
const TAG_POOL: u8 = 1;
const TAG_UPSAMPLE: u8 = 2;
const TAG_FLATTEN: u8 = 3;
const TAG_DENSE: u8 = 4;
const TAG_CROP: u8 = 5;

pub fn encode_weights(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * net.param_count());
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let (tag, hyper): (u8, Vec<usize>) = match layer.kind {
            LayerKind::Conv(s) => (
                TAG_CONV,
                vec![
                    s.in_channels,
                    s.filters,
                    s.kh,
                    s.kw,
                    s.stride,
                    match s.activation {
                        Activation::Relu => 0,
                        Activation::Sigmoid => 1,
                    },
                ],
            ),
            LayerKind::MaxPool { ph, pw } => (TAG_POOL, vec![ph, pw]),
            LayerKind::Upsample { fh, fw } => (TAG_UPSAMPLE, vec![fh, fw]),
            LayerKind::Flatten => (TAG_FLATTEN, vec![]),
            LayerKind::Dense { inputs, units } => (TAG_DENSE, vec![inputs, units]),
            LayerKind::Crop { h, w } => (TAG_CROP, vec![h, w]),
        };
        out.push(tag);
        for v in hyper {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        let p = &layer.params;
        out.extend_from_slice(&(p.weights.len() as u64).to_le_bytes());
        out.extend_from_slice(&(p.bias.len() as u64).to_le_bytes());
        for &v in p.weights.iter().chain(&p.bias) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::parse(
                self.pos,
                format!("truncated while reading {what} ({n} bytes needed)"),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        Ok(self.u32(what)? as usize)
    }

    fn f32s(&mut self, n: u64, what: &str) -> Result<Vec<f64>> {
        let n = usize::try_from(n).map_err(|_| Error::parse(self.pos, "length overflow"))?;
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::parse(self.pos, "length overflow"))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

/// Parses a weight blob into a network with the given input shape.
pub fn decode_weights(bytes: &[u8], input: Shape3) -> Result<Network> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(Error::parse(0, "bad magic, expected EVOW"));
    }
    let version = r.u32("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::UnsupportedVersion {
            what: "weights",
            found: version,
            expected: WEIGHTS_VERSION,
        });
    }
    let count = r.u32("layer count")?;
    let mut layers = Vec::new();
    for _ in 0..count {
        let at = r.pos;
        let kind = match r.u8("kind tag")? {
            TAG_CONV => {
                let in_channels = r.dim("conv in_channels")?;
                let filters = r.dim("conv filters")?;
                let kh = r.dim("conv kh")?;
                let kw = r.dim("conv kw")?;
                let stride = r.dim("conv stride")?;
                let activation = match r.u32("conv activation")? {
                    0 => Activation::Relu,
                    1 => Activation::Sigmoid,
                    other => {
                        return Err(Error::parse(
                            r.pos - 4,
                            format!("unknown activation {other}"),
                        ))
                    }
                };
                if stride == 0 || kh == 0 || kw == 0 {
                    return Err(Error::parse(at, "conv with zero stride or filter dim"));
                }
                LayerKind::Conv(ConvSpec {
                    in_channels,
                    filters,
                    kh,
                    kw,
                    stride,
                    activation,
                })
            }
            TAG_POOL => LayerKind::MaxPool {
                ph: r.dim("pool h")?,
                pw: r.dim("pool w")?,
            },
            TAG_UPSAMPLE => LayerKind::Upsample {
                fh: r.dim("upsample h")?,
                fw: r.dim("upsample w")?,
            },
            TAG_FLATTEN => LayerKind::Flatten,
            TAG_DENSE => LayerKind::Dense {
                inputs: r.dim("dense inputs")?,
                units: r.dim("dense units")?,
            },
            TAG_CROP => LayerKind::Crop {
                h: r.dim("crop h")?,
                w: r.dim("crop w")?,
            },
            other => return Err(Error::parse(at, format!("unknown layer tag {other}"))),
        };
        let nw = r.u64("weight length")?;
        let nb = r.u64("bias length")?;
        let weights = r.f32s(nw, "weights")?;
        let bias = r.f32s(nb, "biases")?;
        layers.push(Layer {
            kind,
            params: Params::new(weights, bias),
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::parse(r.pos, "trailing bytes after last layer"));
    }
    Network::from_layers(input, layers)
}

/// Rounds every parameter through `f32`, matching what a save/load cycle
/// produces.
pub fn round_to_stored_precision(net: &mut Network) {
    for l in net.layers_mut() {
        for v in l.params.weights.iter_mut().chain(l.params.bias.iter_mut()) {
            *v = f64::from(*v as f32);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn sample_net() -> Network {
        let mut rng = seed::rng(5);
        Network::new(
            Shape3::new(3, 8, 8),
            &[
                LayerKind::Conv(ConvSpec {
                    in_channels: 3,
                    filters: 4,
                    kh: 3,
                    kw: 2,
                    stride: 2,
                    activation: Activation::Relu,
                }),
                LayerKind::MaxPool { ph: 2, pw: 2 },
                LayerKind::Upsample { fh: 2, fw: 2 },
                LayerKind::Crop { h: 3, w: 3 },
                LayerKind::Flatten,
                LayerKind::Dense {
                    inputs: 36,
                    units: 10,
                },
            ],
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_after_rounding() {
        let mut net = sample_net();
        round_to_stored_precision(&mut net);
        let bytes = encode_weights(&net);
        let back = decode_weights(&bytes, net.input_shape()).unwrap();
        assert_eq!(back, net);
        assert_eq!(encode_weights(&back), bytes);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_weights(&sample_net());
        for cut in [0, 3, 9, 13, bytes.len() / 2, bytes.len() - 1] {
            match decode_weights(&bytes[..cut], Shape3::new(3, 8, 8)) {
                Err(Error::Parse { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = encode_weights(&sample_net());
        bytes[4] = 9;
        assert!(matches!(
            decode_weights(&bytes, Shape3::new(3, 8, 8)),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let bytes = encode_weights(&sample_net());
        assert!(matches!(
            decode_weights(&bytes, Shape3::new(1, 8, 8)),
            Err(Error::Shape { .. })
        ));
    }
}
