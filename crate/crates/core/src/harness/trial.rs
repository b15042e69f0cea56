use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::{CampaignConfig, ReceiverMode};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fec::{Interleaver, LdpcCode};
use crate::fiber::{dbp, edc, propagate_link, FiberParams};
use crate::metrics::{score_iteration, IterationScore, MetricsRecord};
use crate::sync_dsp::{coarse_align, ddpll, nlms_equalize, DdpllState, NlmsState};
use crate::turbo::{turbo_loop, SlidingWindowConfig, TurboOutput};
use crate::waveform::{
    build_frame, grid_offset, matched_filter, resample, rrc_shape, select_channel, wdm_mux, DualPolSignal,
    SymbolFrame,
};

/// Stable 64-bit seed from a tagged tuple (first 8 bytes of SHA-256).
fn hash_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Seed of one campaign cell. It is also the `seed` of its records.
pub fn cell_seed(base_seed: u64, power_dbm: f64, n_spans: usize, mode: ReceiverMode, trial: usize) -> u64 {
    hash_seed(&[
        b"cell",
        &base_seed.to_le_bytes(),
        &power_dbm.to_bits().to_le_bytes(),
        &(n_spans as u64).to_le_bytes(),
        mode.as_str().as_bytes(),
        &(trial as u64).to_le_bytes(),
    ])
}

/// Seed of the transmitted data and the ASE realization. Receiver modes
/// share it so they are compared on the same link.
pub fn link_seed(base_seed: u64, power_dbm: f64, n_spans: usize, trial: usize) -> u64 {
    hash_seed(&[
        b"link",
        &base_seed.to_le_bytes(),
        &power_dbm.to_bits().to_le_bytes(),
        &(n_spans as u64).to_le_bytes(),
        &(trial as u64).to_le_bytes(),
    ])
}

/// What the receiver is scored against.
#[derive(Debug, Clone)]
pub struct Transmitted {
    pub frame: SymbolFrame,
    pub codewords: [Vec<u8>; 2],
}

/// Campaign inputs shared by every trial.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub cfg: CampaignConfig,
    pub code: LdpcCode,
    pub interleaver: Interleaver,
    pub constellation: Constellation,
}

impl TrialSetup {
    pub fn new(cfg: CampaignConfig) -> Result<Self> {
        cfg.validate()?;
        let code = LdpcCode::load(&cfg.code_file)?;
        let interleaver = Interleaver::new(code.n(), hash_seed(&[b"interleaver", &cfg.base_seed.to_le_bytes()]));
        let constellation = Constellation::new(cfg.modulation)?;
        if code.n() % constellation.bits_per_symbol() != 0 {
            return Err(Error::Config(format!(
                "code length {} is not a multiple of {} bits per symbol",
                code.n(),
                constellation.bits_per_symbol()
            )));
        }
        Ok(Self {
            cfg,
            code,
            interleaver,
            constellation,
        })
    }

    fn center(&self) -> usize {
        self.cfg.n_channels / 2
    }

    fn fiber(&self, n_spans: usize) -> FiberParams {
        FiberParams {
            n_spans,
            ..self.cfg.fiber.clone()
        }
    }

    /// Builds one channel's coded frame.
    fn transmit(&self, rng: &mut ChaCha8Rng) -> Result<Transmitted> {
        let code = &self.code;
        let codewords: [Vec<u8>; 2] = [0, 1].map(|_| {
            (0..self.cfg.n_blocks)
                .flat_map(|_| {
                    let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
                    code.encode(&info).expect("info length matches k")
                })
                .collect()
        });
        let bx = self.interleaver.interleave_blocks(&codewords[0])?;
        let by = self.interleaver.interleave_blocks(&codewords[1])?;
        let frame = build_frame(
            &bx,
            &by,
            &self.constellation,
            self.cfg.pilot_rate,
            self.cfg.n_blocks,
            rng.random(),
        )?;
        Ok(Transmitted { frame, codewords })
    }

    /// Transmitter and link: returns the channel of interest's data and the
    /// optical field after the last amplifier.
    pub fn transmit_link(&self, power_dbm: f64, n_spans: usize, trial: usize) -> Result<(Transmitted, DualPolSignal)> {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(link_seed(cfg.base_seed, power_dbm, n_spans, trial));
        let watts = 1e-3 * 10f64.powf(power_dbm / 10.0);
        let mut channels = Vec::with_capacity(cfg.n_channels);
        let mut cut = None;
        for ch in 0..cfg.n_channels {
            let tx = self.transmit(&mut rng)?;
            let mut sig = rrc_shape(&tx.frame, cfg.baud, cfg.samples_per_symbol, cfg.rolloff)?;
            sig.set_power(watts);
            channels.push(sig);
            if ch == self.center() {
                cut = Some(tx);
            }
        }
        let wdm = wdm_mux(&channels, cfg.grid_spacing_hz)?;
        let rx = propagate_link(&wdm, &self.fiber(n_spans), rng.random())?;
        Ok((cut.expect("center channel exists"), rx))
    }

    /// Channel selection, EDC or DBP, matched filter, 2 samples/symbol at
    /// unit symbol energy.
    pub fn front_end(&self, field: &DualPolSignal, n_spans: usize, backprop: bool, frame_len: usize) -> Result<DualPolSignal> {
        let cfg = &self.cfg;
        let offset = grid_offset(self.center(), cfg.n_channels, cfg.grid_spacing_hz);
        let sel = select_channel(
            field,
            offset,
            cfg.baud * (1.0 + cfg.rolloff),
            cfg.rx_samples_per_symbol as f64 * cfg.baud,
        )?;
        let fiber = self.fiber(n_spans);
        let comp = if backprop {
            dbp(&sel, &fiber, fiber.length_km(), cfg.dbp_step())?
        } else {
            edc(&sel, &fiber, fiber.length_km())?
        };
        let mf = matched_filter(&comp, cfg.baud, cfg.rolloff)?;
        let mut two = resample(&mf, 2 * frame_len)?;
        two.set_power(2.0 * self.constellation.energy());
        Ok(two)
    }

    /// NLMS and DDPLL, or the static least-squares stand-in when disabled.
    pub fn sync(&self, two: &DualPolSignal, frame: &SymbolFrame) -> Result<[Vec<Complex64>; 2]> {
        let dsp = &self.cfg.dsp;
        if !dsp.enabled {
            return static_pilot_ls(two, frame);
        }
        let mut nlms = NlmsState::new(dsp.nlms_taps, dsp.nlms_step)?;
        let training = frame.instants_before_block(self.cfg.turbo.training_blocks);
        let eq = nlms_equalize(two, frame, &mut nlms, training)?;
        let mut pll = DdpllState::new(dsp.pll_bandwidth, dsp.pll_damping)?;
        let out = ddpll(&eq.x, &eq.y, frame, &self.constellation, &mut pll)?;
        if out.cycle_slips > 0 {
            log::warn!("{} pilot phase slips", out.cycle_slips);
        }
        Ok([out.x, out.y])
    }

    pub fn equalize(&self, rx: &[Vec<Complex64>; 2], frame: &SymbolFrame, turbo: &SlidingWindowConfig) -> Result<TurboOutput> {
        turbo_loop([&rx[0], &rx[1]], frame, turbo, &self.code, &self.interleaver, &self.constellation)
    }

    pub fn score(&self, out: &TurboOutput, tx: &Transmitted) -> Result<Vec<IterationScore>> {
        out.iterations
            .iter()
            .map(|it| {
                score_iteration(
                    it,
                    &tx.frame,
                    [&tx.codewords[0], &tx.codewords[1]],
                    &self.code,
                    &self.interleaver,
                    &self.constellation,
                )
            })
            .collect()
    }

    /// One Monte Carlo trial of every configured mode on a shared link
    /// realization. `edc` and `dbp` yield iteration 0 only; `dbp_turbo` one
    /// record per turbo iteration. Records are in mode, then iteration order.
    pub fn run_trial(&self, power_dbm: f64, n_spans: usize, trial: usize) -> Result<Vec<MetricsRecord>> {
        let wrap = |e: Error| Error::Trial {
            power_dbm,
            n_spans,
            seed: link_seed(self.cfg.base_seed, power_dbm, n_spans, trial),
            source: Box::new(e),
        };
        self.run_trial_inner(power_dbm, n_spans, trial).map_err(wrap)
    }

    fn run_trial_inner(&self, power_dbm: f64, n_spans: usize, trial: usize) -> Result<Vec<MetricsRecord>> {
        let mut modes = self.cfg.modes.clone();
        modes.sort();
        modes.dedup();
        let (tx, field) = self.transmit_link(power_dbm, n_spans, trial)?;
        let t = tx.frame.len();
        let record = |mode: ReceiverMode, s: &IterationScore| MetricsRecord {
            launch_power_dbm: power_dbm,
            n_spans,
            mode: mode.as_str().to_string(),
            trial,
            turbo_iteration: s.iteration,
            seed: cell_seed(self.cfg.base_seed, power_dbm, n_spans, mode, trial),
            post_fec_ber: s.ber.ber(),
            n_bits_counted: s.ber.bits,
            snr_db: s.snr_db,
            snr_conventional_db: s.snr_conventional_db,
            gmi_bits_per_4d_symbol: s.gmi,
            soft_feedback_gmi: s.soft_feedback_gmi,
        };
        let single_pass = SlidingWindowConfig {
            n_turbo_iters: 0,
            ..self.cfg.turbo.clone()
        };
        let mut records = Vec::new();
        if modes.contains(&ReceiverMode::Edc) {
            let two = self.front_end(&field, n_spans, false, t)?;
            let rx = self.sync(&two, &tx.frame)?;
            let scores = self.score(&self.equalize(&rx, &tx.frame, &single_pass)?, &tx)?;
            records.push(record(ReceiverMode::Edc, &scores[0]));
        }
        if modes.iter().any(|m| m.uses_dbp()) {
            let two = self.front_end(&field, n_spans, true, t)?;
            let rx = self.sync(&two, &tx.frame)?;
            let turbo = if modes.contains(&ReceiverMode::DbpTurbo) {
                &self.cfg.turbo
            } else {
                &single_pass
            };
            let scores = self.score(&self.equalize(&rx, &tx.frame, turbo)?, &tx)?;
            if modes.contains(&ReceiverMode::Dbp) {
                records.push(record(ReceiverMode::Dbp, &scores[0]));
            }
            if modes.contains(&ReceiverMode::DbpTurbo) {
                records.extend(scores.iter().map(|s| record(ReceiverMode::DbpTurbo, s)));
            }
        }
        Ok(records)
    }
}

/// One 2×2 matrix fitted by least squares to all pilots at symbol-center
/// sampling, applied to the whole frame.
pub fn static_pilot_ls(two: &DualPolSignal, frame: &SymbolFrame) -> Result<[Vec<Complex64>; 2]> {
    let delay = coarse_align(two, frame)?;
    let n = two.len();
    let t = frame.len();
    let sample = |i: usize| {
        let k = (2 * i + delay) % n;
        Vector2::new(two.x[k], two.y[k])
    };
    let mut rr = Matrix2::<Complex64>::zeros();
    let mut sr = Matrix2::<Complex64>::zeros();
    for i in frame.pilot_positions() {
        let r = sample(i);
        let s = Vector2::new(frame.x[i], frame.y[i]);
        rr += r * r.adjoint();
        sr += s * r.adjoint();
    }
    let inv = rr
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("pilot correlation matrix is singular".into()))?;
    let w = sr * inv;
    let mut out = [Vec::with_capacity(t), Vec::with_capacity(t)];
    for i in 0..t {
        let z = w * sample(i);
        out[0].push(z[0]);
        out[1].push(z[1]);
    }
    Ok(out)
}
