//! Manakov split-step propagation, lumped EDFA amplification, and the
//! receiver-side inverses (EDC and single-channel DBP).
//!
//! Sign convention: the linear operator for a step of length `h` is
//! `exp((-α/2 - jβ₂ω²/2)·h)` per DFT bin, and the nonlinear step rotates both
//! polarizations by `-(8/9)·γ·(|Ex|²+|Ey|²)·h`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{bin_freqs, FftPair};
use crate::waveform::DualPolSignal;

const LIGHT_SPEED: f64 = 299_792_458.0;
const PLANCK: f64 = 6.626_070_15e-34;
const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberParams {
    pub alpha_db_per_km: f64,
    pub gamma_per_w_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub span_km: f64,
    pub n_spans: usize,
    /// EDFA noise figure; `-inf` disables ASE.
    pub nf_db: f64,
    pub step_m: f64,
    #[serde(default = "default_wavelength")]
    pub center_wavelength_nm: f64,
}

fn default_wavelength() -> f64 {
    1550.0
}

impl Default for FiberParams {
    /// Standard single-mode fiber, 10 × 50 km, 1 km steps.
    fn default() -> Self {
        Self {
            alpha_db_per_km: 0.2,
            gamma_per_w_km: 1.3,
            dispersion_ps_nm_km: 17.0,
            span_km: 50.0,
            n_spans: 10,
            nf_db: 4.5,
            step_m: 1000.0,
            center_wavelength_nm: 1550.0,
        }
    }
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("alpha_db_per_km", self.alpha_db_per_km),
            ("gamma_per_w_km", self.gamma_per_w_km),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        let positive = [
            ("span_km", self.span_km),
            ("step_m", self.step_m),
            ("center_wavelength_nm", self.center_wavelength_nm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if !self.dispersion_ps_nm_km.is_finite() {
            return Err(Error::InvalidParameter("dispersion must be finite".into()));
        }
        if self.nf_db.is_nan() || self.nf_db == f64::INFINITY {
            return Err(Error::InvalidParameter(format!("nf_db = {}", self.nf_db)));
        }
        if self.step_m > self.span_km * 1e3 {
            return Err(Error::InvalidParameter(format!(
                "step {} m exceeds span {} km",
                self.step_m, self.span_km
            )));
        }
        Ok(())
    }

    /// Power attenuation coefficient in 1/m.
    pub fn alpha_per_m(&self) -> f64 {
        self.alpha_db_per_km / (10.0 * std::f64::consts::LOG10_E) / 1e3
    }

    /// Group-velocity dispersion in s²/m.
    pub fn beta2(&self) -> f64 {
        let lambda = self.center_wavelength_nm * 1e-9;
        // ps/(nm·km) → s/m²
        let d = self.dispersion_ps_nm_km * 1e-6;
        -d * lambda * lambda / (2.0 * std::f64::consts::PI * LIGHT_SPEED)
    }

    pub fn gamma_per_w_m(&self) -> f64 {
        self.gamma_per_w_km / 1e3
    }

    pub fn span_loss_db(&self) -> f64 {
        self.alpha_db_per_km * self.span_km
    }

    pub fn carrier_hz(&self) -> f64 {
        LIGHT_SPEED / (self.center_wavelength_nm * 1e-9)
    }

    pub fn length_km(&self) -> f64 {
        self.span_km * self.n_spans as f64
    }

    fn steps(&self, step_m: f64) -> Result<Vec<f64>> {
        let span = self.span_km * 1e3;
        if !(step_m > 0.0) || step_m > span * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "step {step_m} m must lie in (0, {span}] m"
            )));
        }
        let full = (span / step_m + 1e-9).floor() as usize;
        let mut steps = vec![step_m; full];
        let rest = span - full as f64 * step_m;
        if rest > 1e-6 {
            steps.push(rest);
        }
        Ok(steps)
    }
}

/// Symmetric split-step integration over the lengths in `steps`, with the
/// half linear steps of consecutive steps merged.
fn ssfm(signal: &mut DualPolSignal, steps: &[f64], alpha: f64, beta2: f64, gamma: f64) -> Result<()> {
    let n = signal.len();
    if n == 0 || steps.is_empty() {
        return Ok(());
    }
    let omega2: Vec<f64> = bin_freqs(n, signal.sample_rate)
        .into_iter()
        .map(|f| (2.0 * std::f64::consts::PI * f).powi(2))
        .collect();
    let mut cache: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let mut op = |h: f64| -> Vec<Complex64> {
        if let Some((_, v)) = cache.iter().find(|(l, _)| *l == h) {
            return v.clone();
        }
        let v: Vec<Complex64> = omega2
            .iter()
            .map(|&w2| Complex64::new(-alpha / 2.0 * h, -beta2 / 2.0 * w2 * h).exp())
            .collect();
        cache.push((h, v.clone()));
        v
    };
    let mut fft = FftPair::new(n);
    let apply = |buf: &mut [Complex64], resp: &[Complex64]| {
        for (v, r) in buf.iter_mut().zip(resp) {
            *v *= r;
        }
    };

    if gamma == 0.0 {
        let total: f64 = steps.iter().sum();
        let resp = op(total);
        for pol in [&mut signal.x, &mut signal.y] {
            fft.forward(pol);
            apply(pol, &resp);
            fft.inverse(pol);
        }
        return check_finite(signal);
    }

    fft.forward(&mut signal.x);
    fft.forward(&mut signal.y);
    let mut pending = steps[0] / 2.0;
    for (i, &h) in steps.iter().enumerate() {
        let resp = op(pending);
        for pol in [&mut signal.x, &mut signal.y] {
            apply(pol, &resp);
            fft.inverse(pol);
        }
        let k = -MANAKOV_FACTOR * gamma * h;
        for (a, b) in signal.x.iter_mut().zip(signal.y.iter_mut()) {
            let rot = Complex64::from_polar(1.0, k * (a.norm_sqr() + b.norm_sqr()));
            *a *= rot;
            *b *= rot;
        }
        fft.forward(&mut signal.x);
        fft.forward(&mut signal.y);
        pending = h / 2.0 + steps.get(i + 1).map_or(0.0, |s| s / 2.0);
    }
    let resp = op(pending);
    for pol in [&mut signal.x, &mut signal.y] {
        apply(pol, &resp);
        fft.inverse(pol);
    }
    check_finite(signal)
}

fn check_finite(signal: &DualPolSignal) -> Result<()> {
    if signal.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("split-step propagation"))
    }
}

/// One fiber span (no amplifier). Input amplitudes are in √W.
pub fn propagate_span(signal: &DualPolSignal, p: &FiberParams) -> Result<DualPolSignal> {
    p.validate()?;
    let mut out = signal.clone();
    ssfm(&mut out, &p.steps(p.step_m)?, p.alpha_per_m(), p.beta2(), p.gamma_per_w_m())?;
    Ok(out)
}

/// Lumped amplifier: power gain `gain_db` plus circular complex Gaussian ASE
/// in each polarization with one-sided PSD `(G-1)·h·ν·NF/2`.
pub fn amplify(
    signal: &DualPolSignal,
    gain_db: f64,
    nf_db: f64,
    wavelength_nm: f64,
    seed: u64,
) -> Result<DualPolSignal> {
    if !(gain_db >= 0.0) {
        return Err(Error::InvalidParameter(format!("amplifier gain {gain_db} dB")));
    }
    let g = 10f64.powf(gain_db / 10.0);
    let mut out = signal.clone();
    out.scale(g.sqrt());
    let var = ase_psd(gain_db, nf_db, wavelength_nm) * signal.sample_rate;
    if var > 0.0 {
        let sd = (var / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in out.x.iter_mut().chain(out.y.iter_mut()) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re, im) * sd;
        }
    }
    Ok(out)
}

/// ASE power spectral density per polarization in W/Hz.
pub fn ase_psd(gain_db: f64, nf_db: f64, wavelength_nm: f64) -> f64 {
    let g = 10f64.powf(gain_db / 10.0);
    let nf = 10f64.powf(nf_db / 10.0);
    let nu = LIGHT_SPEED / (wavelength_nm * 1e-9);
    (g - 1.0) * PLANCK * nu * nf / 2.0
}

/// Full link: `n_spans` × (span, amplifier compensating the span loss).
pub fn propagate_link(signal: &DualPolSignal, p: &FiberParams, seed: u64) -> Result<DualPolSignal> {
    let mut s = signal.clone();
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..p.n_spans {
        s = propagate_span(&s, p)?;
        let span_seed = rand::Rng::random::<u64>(&mut seeds);
        s = amplify(&s, p.span_loss_db(), p.nf_db, p.center_wavelength_nm, span_seed)?;
    }
    Ok(s)
}

/// All-pass inverse of the dispersion accumulated over `distance_km`.
pub fn edc(signal: &DualPolSignal, p: &FiberParams, distance_km: f64) -> Result<DualPolSignal> {
    let mut out = signal.clone();
    let n = out.len();
    if n == 0 || distance_km == 0.0 {
        return Ok(out);
    }
    let l = distance_km * 1e3;
    let b2 = p.beta2();
    let resp: Vec<Complex64> = bin_freqs(n, out.sample_rate)
        .into_iter()
        .map(|f| {
            let w = 2.0 * std::f64::consts::PI * f;
            Complex64::from_polar(1.0, b2 / 2.0 * w * w * l)
        })
        .collect();
    let mut fft = FftPair::new(n);
    for pol in [&mut out.x, &mut out.y] {
        fft.forward(pol);
        for (v, r) in pol.iter_mut().zip(&resp) {
            *v *= r;
        }
        fft.inverse(pol);
    }
    Ok(out)
}

/// Digital backpropagation over `distance_km` (a whole number of spans): per
/// span in reverse, undo the amplifier gain and run the split-step solver
/// with negated α, β₂ and γ.
pub fn dbp(signal: &DualPolSignal, p: &FiberParams, distance_km: f64, step_m: f64) -> Result<DualPolSignal> {
    p.validate()?;
    let spans_f = distance_km / p.span_km;
    let spans = spans_f.round() as usize;
    if (spans_f - spans as f64).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "DBP distance {distance_km} km is not a whole number of {} km spans",
            p.span_km
        )));
    }
    let mut steps = p.steps(step_m)?;
    steps.reverse();
    let alpha = p.alpha_per_m();
    let mut s = signal.clone();
    for _ in 0..spans {
        s.scale((-alpha * p.span_km * 1e3 / 2.0).exp());
        ssfm(&mut s, &steps, -alpha, -p.beta2(), -p.gamma_per_w_m())?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::evm_db;
    use rand::Rng;

    fn noise_signal(n: usize, fs: f64, power_w: f64, seed: u64) -> DualPolSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            (0..n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect::<Vec<_>>()
        };
        let x = draw();
        let y = draw();
        let mut s = DualPolSignal::new(x, y, fs).unwrap();
        s.set_power(power_w);
        s
    }

    fn lossless(gamma: f64, d: f64) -> FiberParams {
        FiberParams {
            alpha_db_per_km: 0.0,
            gamma_per_w_km: gamma,
            dispersion_ps_nm_km: d,
            span_km: 10.0,
            n_spans: 1,
            nf_db: f64::NEG_INFINITY,
            step_m: 1000.0,
            center_wavelength_nm: 1550.0,
        }
    }

    #[test]
    fn beta2_of_standard_fiber() {
        let b2 = FiberParams::default().beta2() * 1e27; // ps²/km
        assert!((b2 + 21.68).abs() < 0.01, "{b2}");
    }

    #[test]
    fn trivial_fiber_is_identity() {
        let s = noise_signal(256, 64e9, 1e-3, 1);
        let out = propagate_span(&s, &lossless(0.0, 0.0)).unwrap();
        for (a, b) in s.x.iter().zip(&out.x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_pulse_broadening() {
        let n = 4096;
        let fs = 1e12;
        let t0 = 10e-12;
        let t = |i: usize| (i as f64 - n as f64 / 2.0) / fs;
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((-t(i).powi(2) / (2.0 * t0 * t0)).exp(), 0.0))
            .collect();
        let s = DualPolSignal::new(x.clone(), x, fs).unwrap();
        let mut p = lossless(0.0, 17.0);
        let ld = t0 * t0 / p.beta2().abs();
        p.span_km = 2.0 * ld / 1e3;
        p.step_m = p.span_km * 1e3;
        let out = propagate_span(&s, &p).unwrap();
        let rms = |v: &[Complex64]| {
            let w: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            let m2: f64 = v.iter().enumerate().map(|(i, c)| t(i).powi(2) * c.norm_sqr()).sum();
            (m2 / w).sqrt()
        };
        let ratio = rms(&out.x) / rms(&s.x);
        assert!((ratio / 5f64.sqrt() - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn cw_manakov_phase() {
        let n = 64;
        let p_w = 0.01;
        let a = (p_w / 2.0f64).sqrt();
        let s = DualPolSignal::new(vec![Complex64::new(a, 0.0); n], vec![Complex64::new(a, 0.0); n], 64e9)
            .unwrap();
        let p = lossless(1.3, 0.0);
        let out = propagate_span(&s, &p).unwrap();
        let want = -8.0 / 9.0 * 1.3e-3 * p_w * 10e3;
        for v in out.x.iter().chain(&out.y) {
            assert!((v.arg() - want).abs() < 1e-12);
            assert!((v.norm() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn amplifier_without_noise_scales() {
        let s = noise_signal(128, 64e9, 1e-3, 2);
        let out = amplify(&s, 10.0, f64::NEG_INFINITY, 1550.0, 1).unwrap();
        for (a, b) in s.y.iter().zip(&out.y) {
            assert!((a * 10f64.sqrt() - b).norm() < 1e-15);
        }
        assert!(amplify(&s, -1.0, 4.5, 1550.0, 1).is_err());
    }

    #[test]
    fn ase_psd_measured() {
        let n = 1 << 20;
        let fs = 100e9;
        let s = DualPolSignal::zeros(n, fs);
        let out = amplify(&s, 20.0, 4.5, 1550.0, 9).unwrap();
        let want = ase_psd(20.0, 4.5, 1550.0);
        for pol in [&out.x, &out.y] {
            let psd = pol.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64 / fs;
            assert!((psd / want - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn span_is_power_transparent() {
        let s = noise_signal(512, 64e9, 1e-3, 3);
        let p = FiberParams {
            gamma_per_w_km: 0.0,
            dispersion_ps_nm_km: 0.0,
            nf_db: f64::NEG_INFINITY,
            n_spans: 1,
            ..FiberParams::default()
        };
        let out = propagate_link(&s, &p, 0).unwrap();
        assert!((out.power() / s.power() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn edc_inverts_dispersion() {
        let s = noise_signal(1024, 64e9, 1e-3, 4);
        let p = lossless(0.0, 17.0);
        let fwd = propagate_span(&s, &p).unwrap();
        let back = edc(&fwd, &p, p.span_km).unwrap();
        for (a, b) in s.x.iter().zip(&back.x) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!(evm_db(&back.y, &s.y) < -60.0);
        assert_eq!(edc(&s, &p, 0.0).unwrap(), s);
        let twice = edc(&edc(&s, &p, 300.0).unwrap(), &p, -300.0).unwrap();
        assert!(evm_db(&twice.x, &s.x) < -200.0);
    }

    #[test]
    fn dbp_without_nonlinearity_is_edc() {
        let s = noise_signal(1024, 64e9, 1e-3, 5);
        let p = FiberParams {
            gamma_per_w_km: 0.0,
            n_spans: 2,
            ..FiberParams::default()
        };
        let a = dbp(&s, &p, 100.0, 10e3).unwrap();
        let b = edc(&s, &p, 100.0).unwrap();
        for (u, v) in a.x.iter().zip(&b.x) {
            assert!((u - v).norm() < 1e-9 * s.power().sqrt().max(1.0));
        }
        assert!(dbp(&s, &p, 75.0, 10e3).is_err());
    }

    #[test]
    fn dbp_inverts_noiseless_link() {
        let s = noise_signal(2048, 64e9, 10f64.powf(0.5) * 1e-3, 6);
        let p = FiberParams {
            n_spans: 3,
            nf_db: f64::NEG_INFINITY,
            ..FiberParams::default()
        };
        let rx = propagate_link(&s, &p, 1).unwrap();
        let back = dbp(&rx, &p, p.length_km(), p.step_m).unwrap();
        assert!(evm_db(&back.x, &s.x) < -30.0);
        let edc_only = edc(&rx, &p, p.length_km()).unwrap();
        assert!(evm_db(&back.x, &s.x) < evm_db(&edc_only.x, &s.x));
    }

    #[test]
    fn step_larger_than_span_rejected() {
        let s = noise_signal(16, 64e9, 1e-3, 7);
        let mut p = lossless(1.3, 17.0);
        p.step_m = 20e3;
        assert!(propagate_span(&s, &p).is_err());
    }

    #[test]
    fn truncated_last_step() {
        let p = FiberParams {
            span_km: 2.5,
            step_m: 1000.0,
            ..FiberParams::default()
        };
        assert_eq!(p.steps(p.step_m).unwrap(), vec![1000.0, 1000.0, 500.0]);
    }

    #[test]
    fn linear_regime_matches_dispersion_only() {
        let s = noise_signal(2048, 64e9, 1e-6, 8);
        let full = FiberParams {
            nf_db: f64::NEG_INFINITY,
            n_spans: 1,
            ..FiberParams::default()
        };
        let lin = FiberParams {
            gamma_per_w_km: 0.0,
            ..full.clone()
        };
        let a = propagate_span(&s, &full).unwrap();
        let b = propagate_span(&s, &lin).unwrap();
        assert!(evm_db(&a.x, &b.x) < -35.0);
    }

    #[test]
    fn nan_input_detected() {
        let mut s = noise_signal(64, 64e9, 1e-3, 9);
        s.x[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            propagate_span(&s, &lossless(1.3, 17.0)),
            Err(Error::NonFinite(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn lossless_conserves_energy(gamma in 0.0f64..5.0, d in -20.0f64..20.0, pw in -10.0f64..10.0, seed in 0u64..100) {
            let s = noise_signal(256, 64e9, 10f64.powf(pw / 10.0) * 1e-3, seed);
            let out = propagate_span(&s, &lossless(gamma, d)).unwrap();
            proptest::prop_assert!((out.energy() / s.energy() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn polarization_swap_symmetry(seed in 0u64..100) {
            let s = noise_signal(256, 64e9, 5e-3, seed);
            let mut sw = s.clone();
            sw.swap_polarizations();
            let p = FiberParams { nf_db: f64::NEG_INFINITY, n_spans: 1, step_m: 5000.0, ..FiberParams::default() };
            let mut a = propagate_span(&s, &p).unwrap();
            let b = propagate_span(&sw, &p).unwrap();
            a.swap_polarizations();
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn deterministic_given_seed(seed in 0u64..50) {
            let s = noise_signal(128, 64e9, 1e-3, 1);
            let p = FiberParams { n_spans: 1, step_m: 10e3, ..FiberParams::default() };
            proptest::prop_assert_eq!(propagate_link(&s, &p, seed).unwrap(), propagate_link(&s, &p, seed).unwrap());
        }
    }
}
