use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregatorKind {
    MaxPool,
    MeanPool,
    Attention,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 3] = [Self::MaxPool, Self::MeanPool, Self::Attention];

    pub fn name(self) -> &'static str {
        match self {
            Self::MaxPool => "maxpool",
            Self::MeanPool => "meanpool",
            Self::Attention => "attention",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Self::MaxPool => 0,
            Self::MeanPool => 1,
            Self::Attention => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown aggregator `{s}` (maxpool|meanpool|attention)")))
    }
}

/// Two-layer preference encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// |I| x D
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// D x D
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorParams {
    pub kind: AggregatorKind,
    /// D x D, applied as `weight · e_u`.
    pub weight: Array2<f64>,
    /// Pooling kinds only.
    pub bias: Option<Array1<f64>>,
    /// Attention query vector; attention only.
    pub query: Option<Array1<f64>>,
}

/// Item head W_I (|I| x D), shared by user and group predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub weight: Array2<f64>,
}

/// Bilinear user-group scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    pub weight: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub embed_dim: usize,
    pub lambda: f64,
    pub eta: f64,
    pub negatives_per_member: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            lambda: 1.0,
            eta: 0.5,
            negatives_per_member: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub encoder: EncoderParams,
    pub aggregator: AggregatorParams,
    pub predictor: PredictorParams,
    pub discriminator: DiscriminatorParams,
    pub hyper: Hyper,
}

/// Gradient store with the same layout as the learnable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: EncoderParams,
    pub aggregator: AggregatorParams,
    pub predictor: PredictorParams,
    pub discriminator: DiscriminatorParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParamId {
    EncoderW1,
    EncoderB1,
    EncoderW2,
    EncoderB2,
    AggWeight,
    AggBias,
    AggQuery,
    ItemWeight,
    DiscWeight,
}

impl ParamId {
    pub fn name(self) -> &'static str {
        match self {
            Self::EncoderW1 => "encoder.w1",
            Self::EncoderB1 => "encoder.b1",
            Self::EncoderW2 => "encoder.w2",
            Self::EncoderB2 => "encoder.b2",
            Self::AggWeight => "aggregator.weight",
            Self::AggBias => "aggregator.bias",
            Self::AggQuery => "aggregator.query",
            Self::ItemWeight => "predictor.weight",
            Self::DiscWeight => "discriminator.weight",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        use ParamId::*;
        [EncoderW1, EncoderB1, EncoderW2, EncoderB2, AggWeight, AggBias, AggQuery, ItemWeight, DiscWeight]
            .into_iter()
            .find(|p| p.name() == name)
    }

    /// Tensors touched by the recommender update (step one).
    pub fn in_recommender_step(self) -> bool {
        !matches!(self, Self::DiscWeight)
    }

    /// Tensors touched by the MI update (step two). W_I never appears in L_MI.
    pub fn in_discriminator_step(self) -> bool {
        !matches!(self, Self::ItemWeight)
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn slice(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn slice2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

macro_rules! tensor_access {
    ($ty:ty) => {
        impl $ty {
            /// All learnable tensors as flat row-major slices, in a fixed order.
            pub fn tensors(&self) -> Vec<(ParamId, &[f64])> {
                let mut out = vec![
                    (ParamId::EncoderW1, slice2(&self.encoder.w1)),
                    (ParamId::EncoderB1, slice(&self.encoder.b1)),
                    (ParamId::EncoderW2, slice2(&self.encoder.w2)),
                    (ParamId::EncoderB2, slice(&self.encoder.b2)),
                    (ParamId::AggWeight, slice2(&self.aggregator.weight)),
                ];
                if let Some(b) = &self.aggregator.bias {
                    out.push((ParamId::AggBias, slice(b)));
                }
                if let Some(h) = &self.aggregator.query {
                    out.push((ParamId::AggQuery, slice(h)));
                }
                out.push((ParamId::ItemWeight, slice2(&self.predictor.weight)));
                out.push((ParamId::DiscWeight, slice2(&self.discriminator.weight)));
                out
            }

            pub fn tensors_mut(&mut self) -> Vec<(ParamId, &mut [f64])> {
                let mut out = vec![
                    (ParamId::EncoderW1, slice2_mut(&mut self.encoder.w1)),
                    (ParamId::EncoderB1, slice_mut(&mut self.encoder.b1)),
                    (ParamId::EncoderW2, slice2_mut(&mut self.encoder.w2)),
                    (ParamId::EncoderB2, slice_mut(&mut self.encoder.b2)),
                    (ParamId::AggWeight, slice2_mut(&mut self.aggregator.weight)),
                ];
                if let Some(b) = &mut self.aggregator.bias {
                    out.push((ParamId::AggBias, slice_mut(b)));
                }
                if let Some(h) = &mut self.aggregator.query {
                    out.push((ParamId::AggQuery, slice_mut(h)));
                }
                out.push((ParamId::ItemWeight, slice2_mut(&mut self.predictor.weight)));
                out.push((ParamId::DiscWeight, slice2_mut(&mut self.discriminator.weight)));
                out
            }

            pub fn tensor(&self, id: ParamId) -> Option<&[f64]> {
                self.tensors().into_iter().find(|(p, _)| *p == id).map(|(_, t)| t)
            }
        }
    };
}

tensor_access!(ModelState);
tensor_access!(Gradients);

impl Gradients {
    pub fn zeros_like(model: &ModelState) -> Self {
        let z1 = |a: &Array1<f64>| Array1::zeros(a.raw_dim());
        let z2 = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        let agg = &model.aggregator;
        Self {
            encoder: EncoderParams {
                w1: z2(&model.encoder.w1),
                b1: z1(&model.encoder.b1),
                w2: z2(&model.encoder.w2),
                b2: z1(&model.encoder.b2),
            },
            aggregator: AggregatorParams {
                kind: agg.kind,
                weight: z2(&agg.weight),
                bias: agg.bias.as_ref().map(z1),
                query: agg.query.as_ref().map(z1),
            },
            predictor: PredictorParams {
                weight: z2(&model.predictor.weight),
            },
            discriminator: DiscriminatorParams {
                weight: z2(&model.discriminator.weight),
            },
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

impl ModelState {
    pub fn num_items(&self) -> usize {
        self.encoder.w1.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.hyper.embed_dim
    }

    /// Checks that every tensor agrees with (|I|, D) and the aggregator kind.
    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.num_items(), self.embed_dim());
        let check2 = |name: &str, a: &Array2<f64>, r: usize, c: usize| -> Result<()> {
            if a.dim() != (r, c) {
                return Err(Error::Shape(format!("{name}: expected {r}x{c}, got {:?}", a.dim())));
            }
            Ok(())
        };
        let check1 = |name: &str, a: &Array1<f64>| -> Result<()> {
            if a.len() != d {
                return Err(Error::Shape(format!("{name}: expected {d}, got {}", a.len())));
            }
            Ok(())
        };
        check2("encoder.w1", &self.encoder.w1, n, d)?;
        check1("encoder.b1", &self.encoder.b1)?;
        check2("encoder.w2", &self.encoder.w2, d, d)?;
        check1("encoder.b2", &self.encoder.b2)?;
        check2("aggregator.weight", &self.aggregator.weight, d, d)?;
        check2("predictor.weight", &self.predictor.weight, n, d)?;
        check2("discriminator.weight", &self.discriminator.weight, d, d)?;
        let attention = self.aggregator.kind == AggregatorKind::Attention;
        match (&self.aggregator.bias, &self.aggregator.query) {
            (Some(b), None) if !attention => check1("aggregator.bias", b)?,
            (None, Some(h)) if attention => check1("aggregator.query", h)?,
            _ => {
                return Err(Error::Shape(format!(
                    "aggregator {} has inconsistent bias/query",
                    self.aggregator.kind
                )))
            }
        }
        if self.tensors().iter().any(|(_, t)| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(())
    }
}

/// Model dimensions needed for initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDims {
    pub num_items: usize,
    pub embed_dim: usize,
    pub aggregator: AggregatorKind,
}

/// Uniform bound sqrt(6 / (fan_in + fan_out)).
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn uniform2<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let a = glorot_bound(fan_in, fan_out);
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..=a))
}

/// Deterministic fan-based uniform initialization with zero biases.
pub fn init_params(dims: ModelDims, hyper: Hyper, seed: u64) -> Result<ModelState> {
    let (n, d) = (dims.num_items, dims.embed_dim);
    if n == 0 || d == 0 {
        return Err(Error::invalid("num_items and embed_dim must be positive"));
    }
    if hyper.embed_dim != d {
        return Err(Error::invalid("hyper.embed_dim disagrees with dims"));
    }
    let mut rng = stream_rng(seed, Stream::Init, &[]);
    let encoder = EncoderParams {
        w1: uniform2(&mut rng, n, d, n, d),
        b1: Array1::zeros(d),
        w2: uniform2(&mut rng, d, d, d, d),
        b2: Array1::zeros(d),
    };
    let weight = uniform2(&mut rng, d, d, d, d);
    let aggregator = match dims.aggregator {
        AggregatorKind::Attention => {
            let a = glorot_bound(d, 1);
            AggregatorParams {
                kind: dims.aggregator,
                weight,
                bias: None,
                query: Some(Array1::from_shape_simple_fn(d, || rng.gen_range(-a..=a))),
            }
        }
        kind => AggregatorParams {
            kind,
            weight,
            bias: Some(Array1::zeros(d)),
            query: None,
        },
    };
    let predictor = PredictorParams {
        weight: uniform2(&mut rng, n, d, d, n),
    };
    let discriminator = DiscriminatorParams {
        weight: uniform2(&mut rng, d, d, d, d),
    };
    Ok(ModelState {
        encoder,
        aggregator,
        predictor,
        discriminator,
        hyper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(kind: AggregatorKind) -> ModelDims {
        ModelDims {
            num_items: 12,
            embed_dim: 4,
            aggregator: kind,
        }
    }

    fn hyper() -> Hyper {
        Hyper {
            embed_dim: 4,
            ..Hyper::default()
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(dims(AggregatorKind::Attention), hyper(), 5).unwrap();
        let b = init_params(dims(AggregatorKind::Attention), hyper(), 5).unwrap();
        let c = init_params(dims(AggregatorKind::Attention), hyper(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn biases_zero_and_weights_bounded() {
        for kind in AggregatorKind::ALL {
            let m = init_params(dims(kind), hyper(), 1).unwrap();
            m.validate().unwrap();
            assert!(m.encoder.b1.iter().all(|&v| v == 0.0));
            assert!(m.encoder.b2.iter().all(|&v| v == 0.0));
            if let Some(b) = &m.aggregator.bias {
                assert!(b.iter().all(|&v| v == 0.0));
            }
            let a = glorot_bound(12, 4);
            assert!(m.encoder.w1.iter().all(|v| v.abs() <= a));
            let a = glorot_bound(4, 4);
            assert!(m.encoder.w2.iter().all(|v| v.abs() <= a));
            assert!(m.discriminator.weight.iter().all(|v| v.abs() <= a));
            assert_eq!(m.aggregator.query.is_some(), kind == AggregatorKind::Attention);
        }
    }

    #[test]
    fn aggregator_names_parse() {
        assert_eq!("MaxPool".parse::<AggregatorKind>().unwrap(), AggregatorKind::MaxPool);
        assert!("sum".parse::<AggregatorKind>().is_err());
    }

    #[test]
    fn tensor_list_matches_kind() {
        let m = init_params(dims(AggregatorKind::MeanPool), hyper(), 1).unwrap();
        let ids: Vec<ParamId> = m.tensors().into_iter().map(|(p, _)| p).collect();
        assert!(ids.contains(&ParamId::AggBias));
        assert!(!ids.contains(&ParamId::AggQuery));
        for id in ids {
            assert_eq!(ParamId::from_name(id.name()), Some(id));
        }
    }
}
