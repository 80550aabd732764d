//! Learnable parameters and the forward (and backward) computations of the
//! encoder, aggregators, item head and discriminator.

mod aggregator;
pub mod checkpoint;
mod encoder;
mod heads;
pub mod math;
mod params;

pub use aggregator::{aggregate, aggregate_traced, aggregator_backward, attention_weights, AggregatorTrace};
pub use encoder::{encode_first_layer, encode_items, encode_user, encoder_backward, EncoderTrace};
pub use heads::{
    bilinear_score, discriminate, discriminator_backward, item_logits, predict_items, predictor_backward,
};
pub use params::{
    glorot_bound, init_params, AggregatorKind, AggregatorParams, DiscriminatorParams, EncoderParams,
    Gradients, Hyper, ModelDims, ModelState, ParamId, PredictorParams,
};
