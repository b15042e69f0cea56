//! LDPC coding: file-defined codes with a derived systematic encoder, block
//! interleaving, and flooding sum-product decoding with soft output.

mod code;
mod decoder;
mod interleaver;

pub use code::LdpcCode;
pub use decoder::{decode, DecodeOutput};
pub use interleaver::Interleaver;

/// What the decoder hands back to the equalizer on each turbo iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// Full a-posteriori L-values.
    #[default]
    APosteriori,
    /// A-posteriori minus the decoder's channel input.
    Extrinsic,
    /// No feedback at all (every iteration sees zero priors).
    Zero,
}
