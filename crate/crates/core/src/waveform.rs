//! Symbol framing with pilots, RRC pulse shaping and matched filtering, WDM
//! multiplexing and channel-of-interest extraction.
//!
//! Every waveform is one period of a periodic signal: the frame is repeated
//! indefinitely, so filtering, frequency shifts and resampling are exact
//! operations on the DFT bins of the whole record.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fft::{signed_bin, FftPair};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sampled dual-polarization complex envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolSignal {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub sample_rate: f64,
    /// Carrier offset of the envelope relative to the simulation center.
    pub center_freq_offset: f64,
}

impl DualPolSignal {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Length {
                what: "y polarization",
                expected: x.len(),
                got: y.len(),
            });
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Self {
            x,
            y,
            sample_rate,
            center_freq_offset: 0.0,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        Self {
            x: vec![ZERO; len],
            y: vec![ZERO; len],
            sample_rate,
            center_freq_offset: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean power per sample summed over both polarizations.
    pub fn power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.energy() / self.len() as f64
    }

    /// Sum of squared magnitudes over both polarizations.
    pub fn energy(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|v| v.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.x.iter_mut().chain(self.y.iter_mut()) {
            *v *= factor;
        }
    }

    /// Rescales so that [`DualPolSignal::power`] equals `watts`.
    pub fn set_power(&mut self, watts: f64) {
        let p = self.power();
        if p > 0.0 {
            self.scale((watts / p).sqrt());
        }
    }

    pub fn swap_polarizations(&mut self) {
        std::mem::swap(&mut self.x, &mut self.y);
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.y)
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Dual-polarization symbol sequence with pilots and the bit alignment of the
/// data instants.
///
/// Pilots sit at the same instants in both polarizations. The `k`-th data
/// instant carries coded bits `k·q .. (k+1)·q` of each polarization's
/// (interleaved) coded-bit stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub pilot_mask: Vec<bool>,
    pub data_positions: Vec<usize>,
    pub block_of_instant: Vec<usize>,
    pub bits_per_symbol: usize,
    pub block_len: usize,
    pub n_blocks: usize,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_pilots(&self) -> usize {
        self.pilot_mask.iter().filter(|&&p| p).count()
    }

    pub fn pilot_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.pilot_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
    }

    /// Symbols of polarization 0 (x) or 1 (y).
    pub fn pol(&self, p: usize) -> &[Complex64] {
        if p == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    /// Number of leading instants belonging to the first `blocks` FEC blocks.
    pub fn instants_before_block(&self, blocks: usize) -> usize {
        self.block_of_instant
            .iter()
            .position(|&b| b >= blocks)
            .unwrap_or(self.len())
    }

    /// Recovers the coded bits of each polarization from the data instants.
    pub fn data_bits(&self, c: &Constellation) -> (Vec<u8>, Vec<u8>) {
        let take = |syms: &[Complex64]| {
            let data: Vec<Complex64> = self.data_positions.iter().map(|&i| syms[i]).collect();
            c.demodulate_hard(&data)
        };
        (take(&self.x), take(&self.y))
    }
}

/// Pilot instants for `rate`: `⌊k / rate⌋` for k = 0, 1, …, below `len`.
fn pilot_positions(rate: f64, len: usize) -> Vec<usize> {
    if rate <= 0.0 {
        return Vec::new();
    }
    (0..)
        .map(|k: usize| (k as f64 / rate + 1e-9).floor() as usize)
        .take_while(|&i| i < len)
        .collect()
}

/// Frames coded bits (already interleaved) into a dual-pol pilot-bearing
/// symbol sequence. Pilot symbols are drawn uniformly from `c` with `seed`.
pub fn build_frame(
    bits_x: &[u8],
    bits_y: &[u8],
    c: &Constellation,
    pilot_rate: f64,
    n_blocks: usize,
    seed: u64,
) -> Result<SymbolFrame> {
    let q = c.bits_per_symbol();
    if bits_x.len() != bits_y.len() {
        return Err(Error::Length {
            what: "y-polarization coded bits",
            expected: bits_x.len(),
            got: bits_y.len(),
        });
    }
    if n_blocks == 0 || bits_x.is_empty() || bits_x.len() % n_blocks != 0 || bits_x.len() % q != 0 {
        return Err(Error::InvalidParameter(format!(
            "{} coded bits do not split into {n_blocks} blocks of whole {q}-bit symbols",
            bits_x.len()
        )));
    }
    if !(0.0..0.5).contains(&pilot_rate) {
        return Err(Error::InvalidParameter(format!(
            "pilot rate {pilot_rate} outside [0, 0.5)"
        )));
    }
    let block_len = bits_x.len() / n_blocks;
    let n_data = bits_x.len() / q;
    // Smallest frame length whose non-pilot instants hold every data symbol.
    let mut len = n_data;
    let mut pilots = pilot_positions(pilot_rate, len);
    while len - pilots.len() < n_data {
        len += 1;
        pilots = pilot_positions(pilot_rate, len);
    }
    let mut pilot_mask = vec![false; len];
    for &p in &pilots {
        pilot_mask[p] = true;
    }
    let sx = c.modulate(bits_x)?;
    let sy = c.modulate(bits_y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![ZERO; len];
    let mut y = vec![ZERO; len];
    let mut data_positions = Vec::with_capacity(n_data);
    let mut block_of_instant = vec![0; len];
    let mut k = 0;
    for i in 0..len {
        if pilot_mask[i] {
            x[i] = c.points()[rng.random_range(0..c.order())];
            y[i] = c.points()[rng.random_range(0..c.order())];
        } else {
            x[i] = sx[k];
            y[i] = sy[k];
            block_of_instant[i] = k * q / block_len;
            data_positions.push(i);
            k += 1;
        }
    }
    // A pilot belongs to the block of the next data instant (the last block at
    // the tail).
    let mut next = n_blocks - 1;
    for i in (0..len).rev() {
        if pilot_mask[i] {
            block_of_instant[i] = next;
        } else {
            next = block_of_instant[i];
        }
    }
    Ok(SymbolFrame {
        x,
        y,
        pilot_mask,
        data_positions,
        block_of_instant,
        bits_per_symbol: q,
        block_len,
        n_blocks,
    })
}

/// Raised-cosine spectrum with unit DC gain.
fn raised_cosine(f: f64, baud: f64, rolloff: f64) -> f64 {
    let af = f.abs();
    let f1 = (1.0 - rolloff) * baud / 2.0;
    let f2 = (1.0 + rolloff) * baud / 2.0;
    if af <= f1 {
        1.0
    } else if af >= f2 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI / (rolloff * baud) * (af - f1)).cos())
    }
}

fn check_rolloff(rolloff: f64) -> Result<()> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "roll-off must lie in (0, 1], got {rolloff}"
        )));
    }
    Ok(())
}

fn filter_in_place(buf: &mut [Complex64], fft: &mut FftPair, response: &[f64]) {
    fft.forward(buf);
    for (v, h) in buf.iter_mut().zip(response) {
        *v *= *h;
    }
    fft.inverse(buf);
}

fn rrc_response(len: usize, sample_rate: f64, baud: f64, rolloff: f64, gain: f64) -> Vec<f64> {
    let df = sample_rate / len as f64;
    (0..len)
        .map(|k| gain * raised_cosine(signed_bin(k, len) as f64 * df, baud, rolloff).sqrt())
        .collect()
}

/// Upsamples a frame by `samples_per_symbol` and applies a root-raised-cosine
/// pulse. The output carries unit mean power per polarization for a
/// unit-energy constellation; cascading [`matched_filter`] and sampling at
/// the symbol instants returns the symbols with unit gain.
pub fn rrc_shape(
    frame: &SymbolFrame,
    baud: f64,
    samples_per_symbol: usize,
    rolloff: f64,
) -> Result<DualPolSignal> {
    shape_symbols(&frame.x, &frame.y, baud, samples_per_symbol, rolloff)
}

pub fn shape_symbols(
    x: &[Complex64],
    y: &[Complex64],
    baud: f64,
    samples_per_symbol: usize,
    rolloff: f64,
) -> Result<DualPolSignal> {
    check_rolloff(rolloff)?;
    if samples_per_symbol < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples per symbol, got {samples_per_symbol}"
        )));
    }
    let sps = samples_per_symbol;
    let len = x.len() * sps;
    let fs = baud * sps as f64;
    let mut fft = FftPair::new(len);
    let resp = rrc_response(len, fs, baud, rolloff, sps as f64);
    let stuff = |syms: &[Complex64]| {
        let mut buf = vec![ZERO; len];
        for (i, &s) in syms.iter().enumerate() {
            buf[i * sps] = s;
        }
        buf
    };
    let mut sx = stuff(x);
    let mut sy = stuff(y);
    filter_in_place(&mut sx, &mut fft, &resp);
    filter_in_place(&mut sy, &mut fft, &resp);
    DualPolSignal::new(sx, sy, fs)
}

/// Root-raised-cosine matched filter at the signal's own sample rate.
pub fn matched_filter(signal: &DualPolSignal, baud: f64, rolloff: f64) -> Result<DualPolSignal> {
    check_rolloff(rolloff)?;
    let len = signal.len();
    let mut fft = FftPair::new(len);
    let resp = rrc_response(len, signal.sample_rate, baud, rolloff, 1.0);
    let mut out = signal.clone();
    filter_in_place(&mut out.x, &mut fft, &resp);
    filter_in_place(&mut out.y, &mut fft, &resp);
    Ok(out)
}

/// Every `step`-th sample starting at `phase`.
pub fn decimate(samples: &[Complex64], step: usize, phase: usize) -> Vec<Complex64> {
    samples.iter().skip(phase).step_by(step).copied().collect()
}

/// Spectral resampling of a periodic record to `new_len` samples (same
/// duration). Content above the new Nyquist frequency is discarded.
pub fn resample(signal: &DualPolSignal, new_len: usize) -> Result<DualPolSignal> {
    let len = signal.len();
    if new_len == 0 || len == 0 {
        return Err(Error::InvalidParameter("cannot resample an empty record".into()));
    }
    let mut fwd = FftPair::new(len);
    let mut inv = FftPair::new(new_len);
    let gain = new_len as f64 / len as f64;
    let half = new_len.min(len) as i64;
    let mut go = |v: &[Complex64]| {
        let mut buf = v.to_vec();
        fwd.forward(&mut buf);
        let mut out = vec![ZERO; new_len];
        for (k, &val) in buf.iter().enumerate() {
            let sk = signed_bin(k, len);
            // Keep |k| < half/2, plus the positive edge bin for odd truncations.
            if 2 * sk.abs() < half || (2 * sk == half && half % 2 == 0 && new_len > len) {
                let dst = sk.rem_euclid(new_len as i64) as usize;
                out[dst] += val * gain;
            }
        }
        inv.inverse(&mut out);
        out
    };
    let x = go(&signal.x);
    let y = go(&signal.y);
    Ok(DualPolSignal {
        x,
        y,
        sample_rate: signal.sample_rate * new_len as f64 / len as f64,
        center_freq_offset: signal.center_freq_offset,
    })
}

fn shift_bins(freq_hz: f64, len: usize, sample_rate: f64) -> i64 {
    (freq_hz * len as f64 / sample_rate).round() as i64
}

/// Circular frequency shift by a whole number of DFT bins (the nearest to
/// `freq_hz`).
fn shift_spectrum(v: &[Complex64], bins: i64, fft: &mut FftPair) -> Vec<Complex64> {
    let len = v.len();
    let mut buf = v.to_vec();
    fft.forward(&mut buf);
    let mut out = vec![ZERO; len];
    for (k, val) in buf.into_iter().enumerate() {
        out[(k as i64 + bins).rem_euclid(len as i64) as usize] = val;
    }
    fft.inverse(&mut out);
    out
}

/// Occupied band of a record: signed bin range holding non-negligible energy.
fn occupied_bins(v: &[Complex64], fft: &mut FftPair) -> Option<(i64, i64)> {
    let len = v.len();
    let mut buf = v.to_vec();
    fft.forward(&mut buf);
    let peak = buf.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for (k, c) in buf.iter().enumerate() {
        if c.norm_sqr() > 1e-20 * peak {
            let sk = signed_bin(k, len);
            lo = lo.min(sk);
            hi = hi.max(sk);
        }
    }
    Some((lo, hi))
}

/// Carrier offset of channel `index` on an `n`-channel grid centered at 0.
pub fn grid_offset(index: usize, n: usize, spacing_hz: f64) -> f64 {
    (index as f64 - (n as f64 - 1.0) / 2.0) * spacing_hz
}

/// Sums frequency-shifted channels on a uniform grid centered at zero.
pub fn wdm_mux(channels: &[DualPolSignal], spacing_hz: f64) -> Result<DualPolSignal> {
    let first = channels
        .first()
        .ok_or_else(|| Error::InvalidParameter("no channels to multiplex".into()))?;
    let len = first.len();
    let fs = first.sample_rate;
    for ch in channels {
        if ch.len() != len || ch.sample_rate != fs {
            return Err(Error::InvalidParameter(
                "WDM channels must share length and sample rate".into(),
            ));
        }
    }
    let n = channels.len();
    let mut fft = FftPair::new(len);
    let mut out = DualPolSignal::zeros(len, fs);
    let half = len as i64 / 2;
    let (mut lo_all, mut hi_all) = (i64::MAX, i64::MIN);
    for (idx, ch) in channels.iter().enumerate() {
        let bins = shift_bins(grid_offset(idx, n, spacing_hz), len, fs);
        for v in [&ch.x, &ch.y] {
            if let Some((lo, hi)) = occupied_bins(v, &mut fft) {
                lo_all = lo_all.min(lo + bins);
                hi_all = hi_all.max(hi + bins);
            }
        }
        let sx = shift_spectrum(&ch.x, bins, &mut fft);
        let sy = shift_spectrum(&ch.y, bins, &mut fft);
        for (o, v) in out.x.iter_mut().zip(sx) {
            *o += v;
        }
        for (o, v) in out.y.iter_mut().zip(sy) {
            *o += v;
        }
    }
    if lo_all != i64::MAX && (lo_all < -half || hi_all >= half + (len as i64 % 2)) {
        let df = fs / len as f64;
        return Err(Error::Aliasing {
            bandwidth_hz: (hi_all - lo_all + 1) as f64 * df,
            sample_rate: fs,
        });
    }
    Ok(out)
}

/// Band-pass selects the channel at `offset_hz` (ideal brick-wall of width
/// `bandwidth_hz`), downconverts it to baseband and resamples to
/// `out_sample_rate`.
pub fn select_channel(
    signal: &DualPolSignal,
    offset_hz: f64,
    bandwidth_hz: f64,
    out_sample_rate: f64,
) -> Result<DualPolSignal> {
    let fs = signal.sample_rate;
    if !(bandwidth_hz > 0.0 && bandwidth_hz < fs) {
        return Err(Error::InvalidParameter(format!(
            "filter bandwidth {bandwidth_hz} Hz must lie in (0, {fs})"
        )));
    }
    if bandwidth_hz > out_sample_rate {
        return Err(Error::InvalidParameter(format!(
            "output rate {out_sample_rate} Hz cannot carry {bandwidth_hz} Hz"
        )));
    }
    let len = signal.len();
    let new_len_f = len as f64 * out_sample_rate / fs;
    let new_len = new_len_f.round() as usize;
    if (new_len_f - new_len as f64).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "output rate {out_sample_rate} Hz is not commensurate with the record"
        )));
    }
    let bins = shift_bins(offset_hz, len, fs);
    let df = fs / len as f64;
    let mut fft = FftPair::new(len);
    let mut band = |v: &[Complex64]| {
        let mut buf = v.to_vec();
        fft.forward(&mut buf);
        let mut out = vec![ZERO; len];
        for (k, val) in buf.into_iter().enumerate() {
            let sk = signed_bin(k, len) - bins;
            if (sk as f64 * df).abs() <= bandwidth_hz / 2.0 {
                out[sk.rem_euclid(len as i64) as usize] = val;
            }
        }
        fft.inverse(&mut out);
        out
    };
    let mid = DualPolSignal {
        x: band(&signal.x),
        y: band(&signal.y),
        sample_rate: fs,
        center_freq_offset: 0.0,
    };
    resample(&mid, new_len)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct DumpSidecar {
    sample_rate: f64,
    length: usize,
}

/// Writes `path` as little-endian f32 `xRe, xIm, yRe, yIm` per sample and a
/// JSON sidecar `path.json` with `sample_rate` and `length`.
pub fn write_dump(signal: &DualPolSignal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(signal.len() * 16);
    for (a, b) in signal.x.iter().zip(&signal.y) {
        for v in [a.re, a.im, b.re, b.im] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, bytes)?;
    let side = DumpSidecar {
        sample_rate: signal.sample_rate,
        length: signal.len(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string(&side)?)?;
    Ok(())
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<DualPolSignal> {
    let path = path.as_ref();
    let side: DumpSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let bytes = std::fs::read(path)?;
    if bytes.len() != side.length * 16 {
        return Err(Error::Length {
            what: "waveform dump bytes",
            expected: side.length * 16,
            got: bytes.len(),
        });
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let mut x = Vec::with_capacity(side.length);
    let mut y = Vec::with_capacity(side.length);
    for q in vals.chunks_exact(4) {
        x.push(Complex64::new(q[0], q[1]));
        y.push(Complex64::new(q[2], q[3]));
    }
    DualPolSignal::new(x, y, side.sample_rate)
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Error-vector magnitude in dB of `got` against `want` (power-normalized by
/// `want`).
pub fn evm_db(got: &[Complex64], want: &[Complex64]) -> f64 {
    let err: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let sig: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    10.0 * (err / sig).log10()
}
