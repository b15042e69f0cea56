//! Coherent dual-polarization WDM link simulation and an adaptive turbo
//! equalizer for inter-channel nonlinear interference.
//!
//! The receiver under study iterates between an RLS channel estimator feeding
//! a sliding-window MIMO 2×2 soft-input soft-output LMMSE equalizer and a
//! belief-propagation LDPC decoder. Around it sit the pieces needed to put it
//! in a realistic chain: LDPC coded QAM framing with pilots, RRC shaping, WDM
//! multiplexing, Manakov split-step propagation with EDFA noise, EDC and
//! digital backpropagation, a pilot-based NLMS equalizer and a DDPLL, and the
//! BER/SNR/GMI metrics used to score the whole thing.

pub mod constellation;
pub mod error;
pub mod fec;
mod fft;
pub mod fiber;
pub mod harness;
pub mod metrics;
pub mod sync_dsp;
pub mod turbo;
pub mod waveform;

pub use constellation::{Constellation, LlrBlock, LlrKind, SoftSymbolStats};
pub use error::{Error, Result};
pub use fec::{Interleaver, LdpcCode};
pub use fiber::FiberParams;
pub use harness::{CampaignConfig, ReceiverMode};
pub use metrics::MetricsRecord;
pub use turbo::{ChannelTapTrack, SlidingWindowConfig};
pub use waveform::{DualPolSignal, SymbolFrame};

pub use num_complex::Complex64;
