//! Coded dual-pol frames through a known time-varying 3-tap 2×2 channel
//! with AWGN, for exercising the turbo receiver without a fiber link.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fec::{Interleaver, LdpcCode};
use crate::metrics::{score_iteration, IterationScore};
use crate::turbo::{channel_output, turbo_loop, ChannelTapTrack, SlidingWindowConfig, TurboOutput};
use crate::waveform::{build_frame, SymbolFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub modulation: usize,
    pub n_blocks: usize,
    pub pilot_rate: f64,
    /// Symbol energy over noise variance, dB.
    pub snr_db: f64,
    /// Magnitude of the pre-cursor tap; the post-cursor is 0.8 of it.
    pub isi: f64,
    /// Peak polarization crosstalk amplitude.
    pub crosstalk: f64,
    /// Period, in symbols, of the tap rotation.
    pub period: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            modulation: 16,
            n_blocks: 18,
            pilot_rate: 0.05,
            snr_db: 15.0,
            isi: 0.22,
            crosstalk: 0.15,
            period: 1e4,
            seed: 1,
        }
    }
}

/// A generated frame, its channel and the received symbols.
#[derive(Debug, Clone)]
pub struct SyntheticTrial {
    pub frame: SymbolFrame,
    pub codewords: [Vec<u8>; 2],
    pub channel: ChannelTapTrack,
    pub rx: [Vec<Complex64>; 2],
    pub noise_var: f64,
    pub interleaver: Interleaver,
    pub constellation: Constellation,
}

/// The channel taps at instant `i` (memory 2, main tap centered).
pub fn synthetic_taps(cfg: &SyntheticConfig, i: usize) -> [Vec<Complex64>; 4] {
    let ph = 2.0 * std::f64::consts::PI * i as f64 / cfg.period;
    let pre = Complex64::from_polar(cfg.isi, ph);
    let post = Complex64::from_polar(0.8 * cfg.isi, -0.5 * ph + 1.0);
    let base = [pre, Complex64::new(1.0, 0.0), post];
    let xt = cfg.crosstalk * (ph / 2.0).sin();
    let main = (1.0 - xt * xt).sqrt();
    [
        base.iter().map(|h| h * main).collect(),
        base.iter().map(|h| h * xt).collect(),
        base.iter().map(|h| -h * xt).collect(),
        base.iter().map(|h| h * main).collect(),
    ]
}

pub fn synthetic_trial(cfg: &SyntheticConfig, code: &LdpcCode) -> Result<SyntheticTrial> {
    if !(cfg.period > 0.0) || !cfg.snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "synthetic period {} / SNR {}",
            cfg.period, cfg.snr_db
        )));
    }
    let c = Constellation::new(cfg.modulation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let il = Interleaver::new(code.n(), rng.random());
    let codewords: [Vec<u8>; 2] = [0, 1].map(|_| {
        (0..cfg.n_blocks)
            .flat_map(|_| {
                let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
                code.encode(&info).expect("info length matches k")
            })
            .collect()
    });
    let bx = il.interleave_blocks(&codewords[0])?;
    let by = il.interleave_blocks(&codewords[1])?;
    let frame = build_frame(&bx, &by, &c, cfg.pilot_rate, cfg.n_blocks, rng.random())?;
    let t = frame.len();
    let mut channel = ChannelTapTrack::zeros(t, 2);
    for i in 0..t {
        channel.set(i, &synthetic_taps(cfg, i))?;
    }
    let mut rx = channel_output([&frame.x, &frame.y], &channel);
    let noise_var = c.energy() / 10f64.powf(cfg.snr_db / 10.0);
    let sd = (noise_var / 2.0).sqrt();
    for r in rx.iter_mut() {
        for v in r.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re, im) * sd;
        }
    }
    Ok(SyntheticTrial {
        frame,
        codewords,
        channel,
        rx,
        noise_var,
        interleaver: il,
        constellation: c,
    })
}

impl SyntheticTrial {
    pub fn run(&self, turbo: &SlidingWindowConfig, code: &LdpcCode) -> Result<TurboOutput> {
        turbo_loop(
            [&self.rx[0], &self.rx[1]],
            &self.frame,
            turbo,
            code,
            &self.interleaver,
            &self.constellation,
        )
    }

    pub fn score(&self, out: &TurboOutput, code: &LdpcCode) -> Result<Vec<IterationScore>> {
        out.iterations
            .iter()
            .map(|it| {
                score_iteration(
                    it,
                    &self.frame,
                    [&self.codewords[0], &self.codewords[1]],
                    code,
                    &self.interleaver,
                    &self.constellation,
                )
            })
            .collect()
    }
}
