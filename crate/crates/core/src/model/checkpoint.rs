//! Binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      8 bytes  "GRPIMCK\0"
//! version    u32
//! num_items  u64
//! embed_dim  u64
//! aggregator u8       0 maxpool, 1 meanpool, 2 attention
//! lambda     f64
//! eta        f64
//! negatives  u64
//! n_tensors  u32
//! per tensor: name_len u16, name utf-8, rank u8, dims u64 x rank, values f64 x prod(dims)
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{
    AggregatorKind, AggregatorParams, DiscriminatorParams, EncoderParams, Hyper, ModelState,
    ParamId, PredictorParams,
};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GRPIMCK\0";
pub const FORMAT_VERSION: u32 = 1;

fn shape_of(model: &ModelState, id: ParamId) -> Vec<usize> {
    let (n, d) = (model.num_items(), model.embed_dim());
    match id {
        ParamId::EncoderW1 | ParamId::ItemWeight => vec![n, d],
        ParamId::EncoderW2 | ParamId::AggWeight | ParamId::DiscWeight => vec![d, d],
        ParamId::EncoderB1 | ParamId::EncoderB2 | ParamId::AggBias | ParamId::AggQuery => vec![d],
    }
}

pub fn to_bytes(model: &ModelState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.num_items() as u64).to_le_bytes());
    out.extend_from_slice(&(model.embed_dim() as u64).to_le_bytes());
    out.push(model.aggregator.kind.code());
    out.extend_from_slice(&model.hyper.lambda.to_le_bytes());
    out.extend_from_slice(&model.hyper.eta.to_le_bytes());
    out.extend_from_slice(&(model.hyper.negatives_per_member as u64).to_le_bytes());
    let tensors = model.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (id, values) in tensors {
        let name = id.name().as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        let shape = shape_of(model, id);
        out.push(shape.len() as u8);
        for s in shape {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelState> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let n = r.usize()?;
    let d = r.usize()?;
    let kind = AggregatorKind::from_code(r.u8()?)
        .ok_or_else(|| Error::Checkpoint("unknown aggregator code".into()))?;
    let hyper = Hyper {
        embed_dim: d,
        lambda: r.f64()?,
        eta: r.f64()?,
        negatives_per_member: r.usize()?,
    };

    let mut model = ModelState {
        encoder: EncoderParams {
            w1: Array2::zeros((n, d)),
            b1: Array1::zeros(d),
            w2: Array2::zeros((d, d)),
            b2: Array1::zeros(d),
        },
        aggregator: AggregatorParams {
            kind,
            weight: Array2::zeros((d, d)),
            bias: (kind != AggregatorKind::Attention).then(|| Array1::zeros(d)),
            query: (kind == AggregatorKind::Attention).then(|| Array1::zeros(d)),
        },
        predictor: PredictorParams {
            weight: Array2::zeros((n, d)),
        },
        discriminator: DiscriminatorParams {
            weight: Array2::zeros((d, d)),
        },
        hyper,
    };

    let count = r.u32()? as usize;
    let expected = model.tensors().len();
    if count != expected {
        return Err(Error::Checkpoint(format!("expected {expected} tensors, found {count}")));
    }
    let mut seen = Vec::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?;
        let id = ParamId::from_name(name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown tensor `{name}`")))?;
        if seen.contains(&id) {
            return Err(Error::Checkpoint(format!("duplicate tensor `{name}`")));
        }
        seen.push(id);
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        if shape != shape_of(&model, id) {
            return Err(Error::Checkpoint(format!("tensor `{name}` has shape {shape:?}")));
        }
        let mut tensors = model.tensors_mut();
        let dst = tensors
            .iter_mut()
            .find(|(p, _)| *p == id)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` not valid for {kind}")))?;
        for v in dst.iter_mut() {
            *v = r.f64()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    model.validate()?;
    Ok(model)
}

pub fn save(path: &Path, model: &ModelState) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelState> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelDims};

    fn model(kind: AggregatorKind) -> ModelState {
        let hyper = Hyper {
            embed_dim: 3,
            lambda: 0.25,
            ..Hyper::default()
        };
        init_params(
            ModelDims {
                num_items: 5,
                embed_dim: 3,
                aggregator: kind,
            },
            hyper,
            11,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in AggregatorKind::ALL {
            let m = model(kind);
            let bytes = to_bytes(&m);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = to_bytes(&model(AggregatorKind::MaxPool));
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(from_bytes(&bad), Err(Error::Checkpoint(m)) if m.contains("version")));
        let mut long = bytes;
        long.push(0);
        assert!(from_bytes(&long).is_err());
    }
}
