//! Square QAM constellations with per-axis reflected-binary Gray labels, prior
//! symbol statistics from bit L-values, and the extrinsic demapper of the
//! equivalent Gaussian channel `ŝ = μ·s + η`.
//!
//! L-values follow the convention `L(b) = ln P(b = 1) / P(b = 0)` throughout
//! the crate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magnitude at which every L-value (input and output) is clipped.
pub const LLR_CLIP: f64 = 40.0;

/// Relative floor for the equivalent-channel noise variance, `ν²_min = 1e-9·σ_s²`.
pub const NOISE_VAR_FLOOR: f64 = 1e-9;

/// Which stage of the receiver produced an [`LlrBlock`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlrKind {
    APriori,
    Extrinsic,
    APosteriori,
}

/// Per-coded-bit L-values, `q` consecutive values per symbol instant.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrBlock {
    pub values: Vec<f64>,
    pub kind: LlrKind,
}

impl LlrBlock {
    pub fn new(values: Vec<f64>, kind: LlrKind) -> Self {
        let values = values.into_iter().map(clip_llr).collect();
        Self { values, kind }
    }

    pub fn zeros(len: usize, kind: LlrKind) -> Self {
        Self {
            values: vec![0.0; len],
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[inline]
pub fn clip_llr(l: f64) -> f64 {
    if l.is_nan() {
        0.0
    } else {
        l.clamp(-LLR_CLIP, LLR_CLIP)
    }
}

/// Unit-energy square QAM with Gray labels.
///
/// `points[label]` is the symbol carrying `label`; bit `l` of a label (l = 0 is
/// the first transmitted bit) is `(label >> (q - 1 - l)) & 1`. The first `q/2`
/// bits select the in-phase level, the last `q/2` the quadrature level.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
    energy: f64,
}

impl Constellation {
    /// Builds the unit-energy Gray-labeled square QAM of order `m`.
    pub fn new(m: usize) -> Result<Self> {
        if !matches!(m, 4 | 16 | 64 | 256) {
            return Err(Error::UnsupportedModulation(m));
        }
        let q = m.trailing_zeros() as usize;
        let half = q / 2;
        let side = 1usize << half;
        // Average energy of the unnormalized grid {±1, ±3, ...}² is 2(M-1)/3.
        let scale = (2.0 * (m as f64 - 1.0) / 3.0).sqrt().recip();
        let level = |gray: usize| -> f64 {
            let k = gray_to_index(gray);
            (2 * k) as f64 - (side - 1) as f64
        };
        let mask = side - 1;
        let points: Vec<Complex64> = (0..m)
            .map(|label| {
                let gi = (label >> half) & mask;
                let gq = label & mask;
                Complex64::new(level(gi), level(gq)) * scale
            })
            .collect();
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        Ok(Self {
            order: m,
            bits_per_symbol: q,
            points,
            energy,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `q = log2 M`.
    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[inline]
    pub fn bit(&self, label: usize, l: usize) -> u8 {
        ((label >> (self.bits_per_symbol - 1 - l)) & 1) as u8
    }

    /// Bit string of `label`, first transmitted bit first.
    pub fn label_bits(&self, label: usize) -> Vec<u8> {
        (0..self.bits_per_symbol).map(|l| self.bit(label, l)).collect()
    }

    /// Maps `q` bits (first bit first) to a point.
    pub fn map_bits(&self, bits: &[u8]) -> Complex64 {
        let label = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        self.points[label]
    }

    /// Maps a bit stream whose length is a multiple of `q`.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let q = self.bits_per_symbol;
        if bits.len() % q != 0 {
            return Err(Error::Length {
                what: "bits to modulate",
                expected: bits.len().div_ceil(q) * q,
                got: bits.len(),
            });
        }
        Ok(bits.chunks_exact(q).map(|c| self.map_bits(c)).collect())
    }

    /// Label of the point nearest to `z`.
    pub fn nearest(&self, z: Complex64) -> usize {
        // Per-axis slicing is exact for a square grid.
        let side = 1usize << (self.bits_per_symbol / 2);
        let scale = (2.0 * (self.order as f64 - 1.0) / 3.0).sqrt();
        let slice = |v: f64| -> usize {
            let k = ((v * scale + (side - 1) as f64) / 2.0).round();
            k.clamp(0.0, (side - 1) as f64) as usize
        };
        let gi = index_to_gray(slice(z.re));
        let gq = index_to_gray(slice(z.im));
        (gi << (self.bits_per_symbol / 2)) | gq
    }

    pub fn decide(&self, z: Complex64) -> Complex64 {
        self.points[self.nearest(z)]
    }

    /// Bits of the nearest point, appended to `out`.
    pub fn demodulate_hard(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &z in symbols {
            out.extend(self.label_bits(self.nearest(z)));
        }
        out
    }
}

fn gray_to_index(mut g: usize) -> usize {
    let mut k = 0;
    while g != 0 {
        k ^= g;
        g >>= 1;
    }
    k
}

fn index_to_gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// Per-instant symbol probabilities, `order` entries per instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    order: usize,
    probs: Vec<f64>,
}

impl PriorTable {
    pub fn len(&self) -> usize {
        self.probs.len() / self.order
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn instant(&self, i: usize) -> &[f64] {
        &self.probs[i * self.order..(i + 1) * self.order]
    }

    pub fn uniform(order: usize, len: usize) -> Self {
        Self {
            order,
            probs: vec![1.0 / order as f64; order * len],
        }
    }

    pub fn from_rows(order: usize, probs: Vec<f64>) -> Result<Self> {
        if order == 0 || probs.len() % order != 0 {
            return Err(Error::Length {
                what: "probability table",
                expected: probs.len().div_ceil(order.max(1)) * order,
                got: probs.len(),
            });
        }
        Ok(Self { order, probs })
    }
}

/// `P_a(s) = ∏_l P_a(b^l)` per instant from a-priori L-values.
pub fn symbol_priors(llrs: &[f64], c: &Constellation) -> Result<PriorTable> {
    let q = c.bits_per_symbol();
    let m = c.order();
    if llrs.len() % q != 0 {
        return Err(Error::Length {
            what: "a-priori L-values",
            expected: llrs.len().div_ceil(q) * q,
            got: llrs.len(),
        });
    }
    let n = llrs.len() / q;
    let mut probs = vec![0.0; n * m];
    let mut logp = vec![0.0; m];
    for (i, chunk) in llrs.chunks_exact(q).enumerate() {
        let chunk: Vec<f64> = chunk.iter().map(|&l| clip_llr(l)).collect();
        // ln P(b) = b·L − ln(1 + e^L); the softplus term is common and cancels
        // after normalization.
        for (label, lp) in logp.iter_mut().enumerate() {
            *lp = (0..q)
                .filter(|&l| c.bit(label, l) == 1)
                .map(|l| chunk[l])
                .sum();
        }
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let row = &mut probs[i * m..(i + 1) * m];
        let mut total = 0.0;
        for (p, &lp) in row.iter_mut().zip(&logp) {
            *p = (lp - max).exp();
            total += *p;
        }
        for p in row.iter_mut() {
            *p /= total;
        }
    }
    Ok(PriorTable { order: m, probs })
}

/// First- and second-order symbol statistics of one polarization stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoftSymbolStats {
    pub mean: Vec<Complex64>,
    pub variance: Vec<f64>,
}

impl SoftSymbolStats {
    /// Zero mean, variance `sigma_s2` everywhere (no prior information).
    pub fn uninformed(len: usize, sigma_s2: f64) -> Self {
        Self {
            mean: vec![Complex64::new(0.0, 0.0); len],
            variance: vec![sigma_s2; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

pub fn soft_stats(priors: &PriorTable, c: &Constellation) -> SoftSymbolStats {
    let n = priors.len();
    let mut mean = Vec::with_capacity(n);
    let mut variance = Vec::with_capacity(n);
    for i in 0..n {
        let row = priors.instant(i);
        let mut m1 = Complex64::new(0.0, 0.0);
        let mut m2 = 0.0;
        for (&p, s) in row.iter().zip(c.points()) {
            m1 += s * p;
            m2 += s.norm_sqr() * p;
        }
        mean.push(m1);
        variance.push((m2 - m1.norm_sqr()).max(0.0));
    }
    SoftSymbolStats { mean, variance }
}

/// Mean and variance straight from a-priori L-values.
pub fn soft_stats_from_llrs(llrs: &[f64], c: &Constellation) -> Result<SoftSymbolStats> {
    Ok(soft_stats(&symbol_priors(llrs, c)?, c))
}

/// Extrinsic bit L-values of the equivalent channel `ŝ_i = μ_i s_i + η_i`.
///
/// For every bit `l` the likelihood sums over the two label subsets are
/// weighted by the a-priori probabilities of the *other* bits of the symbol;
/// the prior of bit `l` itself never enters its own output. Sums are taken in
/// the log domain. `priors` may be empty, meaning zero a-priori information.
pub fn extrinsic_llrs(
    estimates: &[Complex64],
    scale: &[f64],
    noise_var: &[f64],
    priors: &[f64],
    c: &Constellation,
) -> Result<LlrBlock> {
    let q = c.bits_per_symbol();
    let n = estimates.len();
    if scale.len() != n || noise_var.len() != n {
        return Err(Error::Length {
            what: "equivalent-channel parameters",
            expected: n,
            got: scale.len().min(noise_var.len()),
        });
    }
    if !priors.is_empty() && priors.len() != n * q {
        return Err(Error::Length {
            what: "a-priori L-values",
            expected: n * q,
            got: priors.len(),
        });
    }
    let floor = NOISE_VAR_FLOOR * c.energy();
    let m = c.order();
    let mut out = vec![0.0; n * q];
    let mut metric = vec![0.0; m];
    let mut prior = vec![0.0; q];
    for i in 0..n {
        let nu2 = noise_var[i];
        if !nu2.is_finite() || nu2 < floor {
            return Err(Error::DegenerateNoise { index: i, value: nu2 });
        }
        let mu = scale[i];
        if !mu.is_finite() {
            return Err(Error::NonFinite("equivalent-channel scale"));
        }
        if priors.is_empty() {
            prior.iter_mut().for_each(|p| *p = 0.0);
        } else {
            for (p, &l) in prior.iter_mut().zip(&priors[i * q..(i + 1) * q]) {
                *p = clip_llr(l);
            }
        }
        let z = estimates[i];
        for (label, (mt, s)) in metric.iter_mut().zip(c.points()).enumerate() {
            let d = (z - s * mu).norm_sqr();
            let mut lp = -d / nu2;
            for (l, &pl) in prior.iter().enumerate() {
                if c.bit(label, l) == 1 {
                    lp += pl;
                }
            }
            *mt = lp;
        }
        for l in 0..q {
            let mut max1 = f64::NEG_INFINITY;
            let mut max0 = f64::NEG_INFINITY;
            for (label, &mt) in metric.iter().enumerate() {
                if c.bit(label, l) == 1 {
                    max1 = max1.max(mt);
                } else {
                    max0 = max0.max(mt);
                }
            }
            let mut s1 = 0.0;
            let mut s0 = 0.0;
            for (label, &mt) in metric.iter().enumerate() {
                if c.bit(label, l) == 1 {
                    s1 += (mt - max1).exp();
                } else {
                    s0 += (mt - max0).exp();
                }
            }
            // Every metric in the b_l = 1 subset carries +L_a(b_l); remove it.
            let le = (max1 + s1.ln() - prior[l]) - (max0 + s0.ln());
            out[i * q + l] = clip_llr(le);
        }
    }
    Ok(LlrBlock {
        values: out,
        kind: LlrKind::Extrinsic,
    })
}

/// Exact (non max-log) demapper with no priors.
pub fn demap(
    estimates: &[Complex64],
    scale: &[f64],
    noise_var: &[f64],
    c: &Constellation,
) -> Result<Vec<f64>> {
    extrinsic_llrs(estimates, scale, noise_var, &[], c).map(|b| b.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn qpsk_points_and_energy() {
        let c = Constellation::new(4).unwrap();
        assert_eq!(c.bits_per_symbol(), 2);
        assert!((c.energy() - 1.0).abs() < 1e-12);
        for p in c.points() {
            assert!((p.re.abs() - 1.0 / SQRT2).abs() < 1e-15);
            assert!((p.im.abs() - 1.0 / SQRT2).abs() < 1e-15);
        }
        // bit 1 drives the real axis, 1 ↔ positive.
        assert!(c.map_bits(&[1, 0]).re > 0.0);
        assert!(c.map_bits(&[0, 1]).re < 0.0);
        assert!(c.map_bits(&[0, 1]).im > 0.0);
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(
            Constellation::new(32),
            Err(Error::UnsupportedModulation(32))
        ));
        assert!(Constellation::new(8).is_err());
    }

    #[test]
    fn all_orders_unit_energy_distinct() {
        for m in [4, 16, 64, 256] {
            let c = Constellation::new(m).unwrap();
            assert_eq!(c.points().len(), m);
            assert!((c.energy() - 1.0).abs() < 1e-12, "M={m}");
            for i in 0..m {
                for j in 0..i {
                    assert!((c.points()[i] - c.points()[j]).norm() > 1e-6);
                }
            }
        }
        assert_eq!(Constellation::new(64).unwrap().bits_per_symbol(), 6);
    }

    #[test]
    fn gray_adjacency_exhaustive_256() {
        let c = Constellation::new(256).unwrap();
        let step = c.points()[0..256]
            .iter()
            .flat_map(|a| c.points().iter().map(move |b| (a - b).norm()))
            .filter(|&d| d > 1e-9)
            .fold(f64::INFINITY, f64::min);
        let mut pairs = 0;
        for i in 0..256 {
            for j in (i + 1)..256 {
                let d = (c.points()[i] - c.points()[j]).norm();
                if (d - step).abs() < 1e-9 {
                    pairs += 1;
                    assert_eq!((i ^ j).count_ones(), 1, "labels {i:08b} {j:08b}");
                }
            }
        }
        assert_eq!(pairs, 2 * 16 * 15);
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [4, 16, 64, 256] {
            let c = Constellation::new(m).unwrap();
            for _ in 0..2000 {
                let z = Complex64::new(rng.random_range(-1.8..1.8), rng.random_range(-1.8..1.8));
                let brute = (0..m)
                    .min_by(|&a, &b| {
                        (z - c.points()[a])
                            .norm_sqr()
                            .partial_cmp(&(z - c.points()[b]).norm_sqr())
                            .unwrap()
                    })
                    .unwrap();
                assert_eq!(c.nearest(z), brute);
            }
        }
    }

    #[test]
    fn priors_zero_information_uniform() {
        let c = Constellation::new(4).unwrap();
        let t = symbol_priors(&[0.0; 8], &c).unwrap();
        assert_eq!(t.len(), 4);
        for i in 0..4 {
            for &p in t.instant(i) {
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn priors_saturated_on_all_ones() {
        let c = Constellation::new(16).unwrap();
        let t = symbol_priors(&[40.0; 4], &c).unwrap();
        assert!((t.instant(0)[0b1111] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn priors_qpsk_ln3() {
        let c = Constellation::new(4).unwrap();
        let t = symbol_priors(&[3f64.ln(), 0.0], &c).unwrap();
        let p = t.instant(0);
        // P(b1 = 1) = 3/4, P(b2 = ·) = 1/2.
        assert!((p[0b10] + p[0b11] - 0.75).abs() < 1e-15);
        assert!((p[0b00] + p[0b01] - 0.25).abs() < 1e-15);
        assert!((p[0b10] - 0.375).abs() < 1e-15);
        assert!((p[0b01] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn priors_length_mismatch() {
        let c = Constellation::new(16).unwrap();
        assert!(symbol_priors(&[0.0; 6], &c).is_err());
    }

    #[test]
    fn stats_uniform_point_mass_and_half_known() {
        let c = Constellation::new(64).unwrap();
        let s = soft_stats(&PriorTable::uniform(64, 3), &c);
        for i in 0..3 {
            assert!(s.mean[i].norm() < 1e-12);
            assert!((s.variance[i] - 1.0).abs() < 1e-12);
        }
        let mut probs = vec![0.0; 64];
        probs[17] = 1.0;
        let s = soft_stats(&PriorTable::from_rows(64, probs).unwrap(), &c);
        assert_eq!(s.mean[0], c.points()[17]);
        assert!(s.variance[0].abs() < 1e-15);

        let q = Constellation::new(4).unwrap();
        let s = soft_stats_from_llrs(&[LLR_CLIP, 0.0], &q).unwrap();
        assert!((s.mean[0].re - 1.0 / SQRT2).abs() < 1e-12);
        assert!(s.mean[0].im.abs() < 1e-12);
        assert!((s.variance[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qpsk_closed_form_llr() {
        let c = Constellation::new(4).unwrap();
        for a in [-1.3, -0.2, 0.0, 0.4, 0.9] {
            let l = demap(&[Complex64::new(a, 0.0)], &[1.0], &[1.0], &c).unwrap();
            assert!((l[0] - 2.0 * SQRT2 * a).abs() < 1e-12, "a={a}");
            assert!(l[1].abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_symmetric_is_zero() {
        let c = Constellation::new(16).unwrap();
        // Real part 0 sits between the two halves selected by bit 0.
        let l = demap(&[Complex64::new(0.0, 0.37)], &[0.8], &[0.3], &c).unwrap();
        assert!(l[0].abs() < 1e-12);
    }

    #[test]
    fn degenerate_noise_is_an_error() {
        let c = Constellation::new(4).unwrap();
        let z = [Complex64::new(0.1, 0.1)];
        assert!(matches!(
            demap(&z, &[1.0], &[0.0], &c),
            Err(Error::DegenerateNoise { .. })
        ));
        assert!(demap(&z, &[1.0], &[f64::NAN], &c).is_err());
    }

    /// Linear-domain evaluation of the extrinsic rule: explicit product of the
    /// other bits' prior probabilities, explicit Gaussian likelihoods.
    fn extrinsic_oracle(z: Complex64, mu: f64, nu2: f64, la: &[f64], c: &Constellation) -> Vec<f64> {
        let q = c.bits_per_symbol();
        let pbit = |l: usize, b: u8| {
            let p1 = 1.0 / (1.0 + (-la[l]).exp());
            if b == 1 {
                p1
            } else {
                1.0 - p1
            }
        };
        (0..q)
            .map(|l| {
                let mut num = [0.0f64; 2];
                for (label, s) in c.points().iter().enumerate() {
                    let lik = (-(z - s * mu).norm_sqr() / nu2).exp() / (std::f64::consts::PI * nu2);
                    let mut w = 1.0;
                    for r in 0..q {
                        if r != l {
                            w *= pbit(r, c.bit(label, r));
                        }
                    }
                    num[c.bit(label, l) as usize] += lik * w;
                }
                (num[1] / num[0]).ln()
            })
            .collect()
    }

    #[test]
    fn extrinsic_matches_oracle_16qam() {
        let c = Constellation::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let z = Complex64::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2));
            let mu = rng.random_range(0.3..1.0);
            let nu2 = rng.random_range(0.05..1.0);
            let la: Vec<f64> = (0..4).map(|_| rng.random_range(-6.0..6.0)).collect();
            let got = extrinsic_llrs(&[z], &[mu], &[nu2], &la, &c).unwrap();
            let want = extrinsic_oracle(z, mu, nu2, &la, &c);
            for (g, w) in got.values.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn extrinsic_256qam_small_noise_is_finite() {
        let c = Constellation::new(256).unwrap();
        let z = c.points()[77] + Complex64::new(0.001, -0.002);
        let l = demap(&[z], &[1.0], &[1e-6], &c).unwrap();
        assert!(l.iter().all(|v| v.is_finite() && v.abs() <= LLR_CLIP));
        let bits = c.label_bits(77);
        for (v, b) in l.iter().zip(bits) {
            assert_eq!(*v > 0.0, b == 1);
        }
    }

    proptest::proptest! {
        #[test]
        fn own_prior_excluded(
            re in -1.5f64..1.5, im in -1.5f64..1.5,
            mu in 0.2f64..1.0, nu2 in 0.01f64..2.0,
            la in proptest::collection::vec(-10.0f64..10.0, 6),
            bit in 0usize..6, kappa in -8.0f64..8.0,
        ) {
            let c = Constellation::new(64).unwrap();
            let z = Complex64::new(re, im);
            let a = extrinsic_llrs(&[z], &[mu], &[nu2], &la, &c).unwrap();
            let mut lb = la.clone();
            lb[bit] += kappa;
            let b = extrinsic_llrs(&[z], &[mu], &[nu2], &lb, &c).unwrap();
            proptest::prop_assert!((a.values[bit] - b.values[bit]).abs() < 1e-9);
        }

        #[test]
        fn priors_normalize(la in proptest::collection::vec(-60.0f64..60.0, 8)) {
            let c = Constellation::new(256).unwrap();
            let t = symbol_priors(&la, &c).unwrap();
            let s: f64 = t.instant(0).iter().sum();
            proptest::prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn point_mass_round_trip(label in 0usize..64) {
            let c = Constellation::new(64).unwrap();
            let la: Vec<f64> = c.label_bits(label).iter()
                .map(|&b| if b == 1 { LLR_CLIP } else { -LLR_CLIP }).collect();
            let t = symbol_priors(&la, &c).unwrap();
            let best = (0..64).max_by(|&a, &b| t.instant(0)[a].partial_cmp(&t.instant(0)[b]).unwrap()).unwrap();
            proptest::prop_assert_eq!(best, label);
            proptest::prop_assert!(t.instant(0)[label] > 1.0 - 1e-12);
        }

        #[test]
        fn variance_rotation_invariant(
            la in proptest::collection::vec(-5.0f64..5.0, 4), theta in 0.0f64..6.28,
        ) {
            let c = Constellation::new(16).unwrap();
            let t = symbol_priors(&la, &c).unwrap();
            let s = soft_stats(&t, &c);
            let rot = Complex64::from_polar(1.0, theta);
            let (mut m1, mut m2) = (Complex64::new(0.0, 0.0), 0.0);
            for (p, pt) in t.instant(0).iter().zip(c.points()) {
                m1 += pt * rot * p;
                m2 += (pt * rot).norm_sqr() * p;
            }
            proptest::prop_assert!((m1 - s.mean[0] * rot).norm() < 1e-12);
            proptest::prop_assert!((m2 - m1.norm_sqr() - s.variance[0]).abs() < 1e-12);
        }
    }
}
