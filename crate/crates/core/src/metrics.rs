//! Post-FEC BER, effective SNR and GMI.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fec::{Interleaver, LdpcCode};
use crate::turbo::IterationOutput;
use crate::waveform::SymbolFrame;

/// Per-symbol SNR cap used by [`effective_snr`], in dB.
pub const SNR_CAP_DB: f64 = 60.0;

/// Leading FEC blocks per polarization excluded from BER counting (the
/// training blocks).
pub const BER_SKIP_LEADING: usize = 3;

/// Fewest blocks for which at least one block is counted.
pub const MIN_BLOCKS: usize = 5;

/// One scored turbo iteration of one trial. Field order is the CSV/JSON
/// column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub launch_power_dbm: f64,
    pub n_spans: usize,
    pub mode: String,
    pub trial: usize,
    pub turbo_iteration: usize,
    pub seed: u64,
    pub post_fec_ber: f64,
    pub n_bits_counted: usize,
    pub snr_db: f64,
    pub snr_conventional_db: f64,
    pub gmi_bits_per_4d_symbol: f64,
    /// GMI from the L-values the demapper hands the decoder at this
    /// iteration (with priors); only an achievable rate at iteration 0.
    pub soft_feedback_gmi: f64,
}

fn check_pair(a: usize, b: usize, what: &'static str) -> Result<()> {
    if a != b {
        return Err(Error::Length {
            what,
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// Effective SNR in dB: the mean over both polarizations of the per-symbol
/// ratio |s|²/|ŝ−s|², each capped at [`SNR_CAP_DB`]. Instants with ŝ = s
/// exactly are left out; if all are, the cap is returned.
///
/// This estimator is biased upward for Gaussian errors (the per-symbol ratio
/// has a heavy right tail); [`conventional_snr`] is the unbiased companion.
pub fn effective_snr(tx: [&[Complex64]; 2], est: [&[Complex64]; 2]) -> Result<f64> {
    let cap = 10f64.powf(SNR_CAP_DB / 10.0);
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in 0..2 {
        check_pair(tx[p].len(), est[p].len(), "equalized symbols")?;
        for (s, e) in tx[p].iter().zip(est[p]) {
            let err = (e - s).norm_sqr();
            if err == 0.0 {
                continue;
            }
            sum += (s.norm_sqr() / err).min(cap);
            count += 1;
        }
    }
    if tx[0].is_empty() && tx[1].is_empty() {
        return Err(Error::InvalidParameter("effective SNR of an empty sequence".into()));
    }
    if count == 0 {
        return Ok(SNR_CAP_DB);
    }
    Ok(10.0 * (sum / count as f64).log10())
}

/// Mean signal power over mean error power, in dB, capped at [`SNR_CAP_DB`].
pub fn conventional_snr(tx: [&[Complex64]; 2], est: [&[Complex64]; 2]) -> Result<f64> {
    let mut ps = 0.0;
    let mut pe = 0.0;
    let mut count = 0usize;
    for p in 0..2 {
        check_pair(tx[p].len(), est[p].len(), "equalized symbols")?;
        for (s, e) in tx[p].iter().zip(est[p]) {
            ps += s.norm_sqr();
            pe += (e - s).norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidParameter("SNR of an empty sequence".into()));
    }
    if pe == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (ps / pe).log10()).min(SNR_CAP_DB))
}

/// GMI of one polarization in bits per 2D symbol from L-values
/// (L = ln P(1)/P(0)) and the transmitted bits.
pub fn gmi_2d(llrs: &[f64], bits: &[u8], bits_per_symbol: usize) -> Result<f64> {
    check_pair(bits.len(), llrs.len(), "GMI L-values")?;
    if llrs.is_empty() || bits_per_symbol == 0 || llrs.len() % bits_per_symbol != 0 {
        return Err(Error::InvalidParameter(format!(
            "{} L-values do not form whole {bits_per_symbol}-bit symbols",
            llrs.len()
        )));
    }
    let m = (llrs.len() / bits_per_symbol) as f64;
    let loss: f64 = llrs
        .iter()
        .zip(bits)
        .map(|(&l, &b)| {
            // log2(1 + e^{-z}) with z = (2b-1)L, stable for large |z|
            let z = if b == 1 { l } else { -l };
            let v = if z > 0.0 { (-z).exp().ln_1p() } else { -z + z.exp().ln_1p() };
            v / std::f64::consts::LN_2
        })
        .sum();
    Ok(bits_per_symbol as f64 - loss / m)
}

/// GMI summed over both polarizations, in bits per 4D symbol.
pub fn gmi(llrs: [&[f64]; 2], bits: [&[u8]; 2], bits_per_symbol: usize) -> Result<f64> {
    Ok(gmi_2d(llrs[0], bits[0], bits_per_symbol)? + gmi_2d(llrs[1], bits[1], bits_per_symbol)?)
}

/// Bit error count over the counted blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerCount {
    pub errors: usize,
    pub bits: usize,
}

impl BerCount {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// Blocks counted for post-FEC BER: the first [`BER_SKIP_LEADING`] and the
/// last are discarded.
pub fn counted_blocks(n_blocks: usize) -> Result<std::ops::Range<usize>> {
    if n_blocks < MIN_BLOCKS {
        return Err(Error::InvalidParameter(format!(
            "{n_blocks} FEC blocks per polarization, need at least {MIN_BLOCKS}"
        )));
    }
    Ok(BER_SKIP_LEADING..n_blocks - 1)
}

/// Information-bit errors between decoded and transmitted codewords
/// (concatenated blocks per polarization) over the counted blocks.
pub fn post_fec_ber(decoded: [&[u8]; 2], truth: [&[u8]; 2], code: &LdpcCode, n_blocks: usize) -> Result<BerCount> {
    let n = code.n();
    let blocks = counted_blocks(n_blocks)?;
    let mut count = BerCount { errors: 0, bits: 0 };
    for p in 0..2 {
        check_pair(n * n_blocks, truth[p].len(), "transmitted codewords")?;
        check_pair(n * n_blocks, decoded[p].len(), "decoded codewords")?;
        for b in blocks.clone() {
            let r = b * n..(b + 1) * n;
            let got = code.extract_info(&decoded[p][r.clone()]);
            let want = code.extract_info(&truth[p][r]);
            count.errors += got.iter().zip(&want).filter(|(a, b)| a != b).count();
            count.bits += want.len();
        }
    }
    Ok(count)
}

/// Scores of one turbo iteration against the transmitted frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationScore {
    pub iteration: usize,
    pub ber: BerCount,
    pub snr_db: f64,
    pub snr_conventional_db: f64,
    pub gmi: f64,
    pub soft_feedback_gmi: f64,
}

/// Scores `out` over the data instants of the counted blocks. SNR is
/// measured on the unbiased equalizer output ŝ/μ; `codewords` are the
/// transmitted codewords (concatenated blocks, before interleaving).
pub fn score_iteration(
    out: &IterationOutput,
    frame: &SymbolFrame,
    codewords: [&[u8]; 2],
    code: &LdpcCode,
    il: &Interleaver,
    c: &Constellation,
) -> Result<IterationScore> {
    let blocks = counted_blocks(frame.n_blocks)?;
    let q = c.bits_per_symbol();
    let ber = post_fec_ber([&out.decoded[0], &out.decoded[1]], codewords, code, frame.n_blocks)?;
    let counted: Vec<(usize, usize)> = frame
        .data_positions
        .iter()
        .enumerate()
        .filter(|(_, &i)| blocks.contains(&frame.block_of_instant[i]))
        .map(|(k, &i)| (k, i))
        .collect();
    let mut tx = [Vec::new(), Vec::new()];
    let mut est = [Vec::new(), Vec::new()];
    let mut llr = [Vec::new(), Vec::new()];
    let mut bits = [Vec::new(), Vec::new()];
    for p in 0..2 {
        let tx_bits = il.interleave_blocks(codewords[p])?;
        for &(k, i) in &counted {
            let mu = out.equalized.scale[p][i];
            tx[p].push(frame.pol(p)[i]);
            est[p].push(if mu > 0.0 { out.equalized.estimates[p][i] / mu } else { out.equalized.estimates[p][i] });
            llr[p].extend_from_slice(&out.gmi_llrs[p][k * q..(k + 1) * q]);
            bits[p].extend_from_slice(&tx_bits[k * q..(k + 1) * q]);
        }
    }
    let n = code.n();
    let r = blocks.start * n..blocks.end * n;
    let soft: [f64; 2] = [0, 1].map(|p| {
        gmi_2d(&out.llrs[p].values[r.clone()], &codewords[p][r.clone()], q).unwrap_or(f64::NAN)
    });
    Ok(IterationScore {
        iteration: out.iteration,
        ber,
        snr_db: effective_snr([&tx[0], &tx[1]], [&est[0], &est[1]])?,
        snr_conventional_db: conventional_snr([&tx[0], &tx[1]], [&est[0], &est[1]])?,
        gmi: gmi([&llr[0], &llr[1]], [&bits[0], &bits[1]], q)?,
        soft_feedback_gmi: soft[0] + soft[1],
    })
}
