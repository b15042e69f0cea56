//! Receiver DSP ahead of the turbo equalizer: a T/2-spaced 2×2 NLMS
//! equalizer updated at pilots, and a second-order decision-directed PLL.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::waveform::{DualPolSignal, SymbolFrame};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Taps of the 2×2 butterfly: `out_x = xx·u_x + xy·u_y`,
/// `out_y = yx·u_x + yy·u_y`, each over `n_taps` half-symbol-spaced samples
/// centered on the symbol instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlmsState {
    pub xx: Vec<Complex64>,
    pub xy: Vec<Complex64>,
    pub yx: Vec<Complex64>,
    pub yy: Vec<Complex64>,
    pub step_size: f64,
    pub leakage: f64,
    /// Regularizer added to the input energy in the normalization.
    pub epsilon: f64,
    /// Data-aided passes over the training region before the output pass.
    pub training_passes: usize,
}

impl NlmsState {
    /// Center-spike initialization.
    pub fn new(n_taps: usize, step_size: f64) -> Result<Self> {
        if n_taps % 2 == 0 {
            return Err(Error::InvalidParameter(format!("NLMS needs an odd tap count, got {n_taps}")));
        }
        if !(step_size > 0.0 && step_size < 2.0) {
            return Err(Error::InvalidParameter(format!("NLMS step size {step_size}")));
        }
        let mut spike = vec![ZERO; n_taps];
        spike[n_taps / 2] = Complex64::new(1.0, 0.0);
        Ok(Self {
            xx: spike.clone(),
            xy: vec![ZERO; n_taps],
            yx: vec![ZERO; n_taps],
            yy: spike,
            step_size,
            leakage: 0.0,
            epsilon: 1e-6,
            training_passes: 2,
        })
    }

    pub fn n_taps(&self) -> usize {
        self.xx.len()
    }
}

impl Default for NlmsState {
    fn default() -> Self {
        Self::new(13, 0.05).expect("valid defaults")
    }
}

#[derive(Debug, Clone)]
pub struct NlmsOutput {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Coarse alignment found by pilot correlation, in half-symbol samples.
    pub delay: usize,
    /// Squared error summed over both polarizations at each update.
    pub update_errors: Vec<f64>,
}

/// Circular lag (in samples) maximizing the pilot cross-correlation summed
/// over all four polarization pairs.
pub fn coarse_align(signal: &DualPolSignal, frame: &SymbolFrame) -> Result<usize> {
    let n = signal.len();
    if n != 2 * frame.len() {
        return Err(Error::Length {
            what: "2-sample/symbol input",
            expected: 2 * frame.len(),
            got: n,
        });
    }
    if frame.n_pilots() == 0 {
        return Ok(0);
    }
    let mut fft = FftPair::new(n);
    let spectrum = |v: &[Complex64], fft: &mut FftPair| {
        let mut b = v.to_vec();
        fft.forward(&mut b);
        b
    };
    let pilot_seq = |p: usize| {
        let mut b = vec![ZERO; n];
        for i in frame.pilot_positions() {
            b[2 * i] = frame.pol(p)[i];
        }
        b
    };
    let rx = [spectrum(&signal.x, &mut fft), spectrum(&signal.y, &mut fft)];
    let tx = [spectrum(&pilot_seq(0), &mut fft), spectrum(&pilot_seq(1), &mut fft)];
    let mut score = vec![0.0; n];
    for r in &rx {
        for t in &tx {
            let mut c: Vec<Complex64> = r.iter().zip(t).map(|(a, b)| a * b.conj()).collect();
            fft.inverse(&mut c);
            for (s, v) in score.iter_mut().zip(&c) {
                *s += v.norm_sqr();
            }
        }
    }
    let lag = score
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(lag)
}

/// Pilot-based fractionally spaced MIMO equalizer.
///
/// The first `training_instants` symbols are assumed known to the receiver
/// and drive data-aided updates for `state.training_passes` passes; the output
/// pass then updates only at pilot instants.
pub fn nlms_equalize(
    signal: &DualPolSignal,
    frame: &SymbolFrame,
    state: &mut NlmsState,
    training_instants: usize,
) -> Result<NlmsOutput> {
    let delay = coarse_align(signal, frame)?;
    let n = signal.len() as isize;
    let nt = state.n_taps();
    let half = (nt / 2) as isize;
    let gather = |v: &[Complex64], i: usize, buf: &mut Vec<Complex64>| {
        buf.clear();
        let c = (2 * i + delay) as isize;
        buf.extend((-half..=half).map(|k| v[(c + k).rem_euclid(n) as usize]));
    };
    let mut ux = Vec::with_capacity(nt);
    let mut uy = Vec::with_capacity(nt);
    let dot = |w: &[Complex64], u: &[Complex64]| -> Complex64 { w.iter().zip(u).map(|(a, b)| a * b).sum() };
    let mut update_errors = Vec::new();

    let step = |st: &mut NlmsState, ux: &[Complex64], uy: &[Complex64], dx: Complex64, dy: Complex64| {
        let ox = dot(&st.xx, ux) + dot(&st.xy, uy);
        let oy = dot(&st.yx, ux) + dot(&st.yy, uy);
        let ex = dx - ox;
        let ey = dy - oy;
        let energy: f64 = ux.iter().chain(uy).map(|v| v.norm_sqr()).sum();
        let g = st.step_size / (st.epsilon + energy);
        let keep = 1.0 - st.step_size * st.leakage;
        for k in 0..ux.len() {
            let (cx, cy) = (ux[k].conj(), uy[k].conj());
            st.xx[k] = st.xx[k] * keep + ex * cx * g;
            st.xy[k] = st.xy[k] * keep + ex * cy * g;
            st.yx[k] = st.yx[k] * keep + ey * cx * g;
            st.yy[k] = st.yy[k] * keep + ey * cy * g;
        }
        ex.norm_sqr() + ey.norm_sqr()
    };

    let training = training_instants.min(frame.len());
    for _ in 0..state.training_passes {
        for i in 0..training {
            gather(&signal.x, i, &mut ux);
            gather(&signal.y, i, &mut uy);
            let e = step(state, &ux, &uy, frame.x[i], frame.y[i]);
            update_errors.push(e);
        }
    }

    let mut x = Vec::with_capacity(frame.len());
    let mut y = Vec::with_capacity(frame.len());
    let mut in_power = 0.0;
    let mut out_power = 0.0;
    for i in 0..frame.len() {
        gather(&signal.x, i, &mut ux);
        gather(&signal.y, i, &mut uy);
        let ox = dot(&state.xx, &ux) + dot(&state.xy, &uy);
        let oy = dot(&state.yx, &ux) + dot(&state.yy, &uy);
        in_power += ux[nt / 2].norm_sqr() + uy[nt / 2].norm_sqr();
        out_power += ox.norm_sqr() + oy.norm_sqr();
        if !(out_power.is_finite()) || (i > 100 && out_power > 10.0 * in_power) {
            return Err(Error::Diverged(i));
        }
        x.push(ox);
        y.push(oy);
        if frame.pilot_mask[i] {
            let e = step(state, &ux, &uy, frame.x[i], frame.y[i]);
            update_errors.push(e);
        }
    }
    Ok(NlmsOutput {
        x,
        y,
        delay,
        update_errors,
    })
}

/// Second-order PLL state for each polarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpllState {
    pub phase: [f64; 2],
    pub integrator: [f64; 2],
    pub kp: f64,
    pub ki: f64,
}

impl DdpllState {
    /// Loop gains for noise bandwidth `bn_t` (normalized to the symbol rate)
    /// and damping `zeta`.
    pub fn new(bn_t: f64, zeta: f64) -> Result<Self> {
        if !(bn_t > 0.0 && bn_t < 0.25 && zeta > 0.0) {
            return Err(Error::InvalidParameter(format!("PLL bandwidth {bn_t}, damping {zeta}")));
        }
        let wn = 2.0 * bn_t / (zeta + 1.0 / (4.0 * zeta));
        Ok(Self {
            phase: [0.0; 2],
            integrator: [0.0; 2],
            kp: 2.0 * zeta * wn,
            ki: wn * wn,
        })
    }
}

impl Default for DdpllState {
    fn default() -> Self {
        Self::new(1e-3, 1.0).expect("valid defaults")
    }
}

#[derive(Debug, Clone)]
pub struct DdpllOutput {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Phase estimate applied at each instant, per polarization.
    pub phase: [Vec<f64>; 2],
    pub cycle_slips: usize,
}

/// Carrier phase recovery: pilot-aided error at pilots, decision-directed at
/// data instants. The loop phase starts at the first pilot's phase error.
pub fn ddpll(
    x: &[Complex64],
    y: &[Complex64],
    frame: &SymbolFrame,
    c: &Constellation,
    state: &mut DdpllState,
) -> Result<DdpllOutput> {
    if x.len() != frame.len() || y.len() != frame.len() {
        return Err(Error::Length {
            what: "PLL input",
            expected: frame.len(),
            got: x.len().min(y.len()),
        });
    }
    let first_pilot = frame.pilot_positions().next();
    let mut outs: [Vec<Complex64>; 2] = [Vec::with_capacity(x.len()), Vec::with_capacity(x.len())];
    let mut phases: [Vec<f64>; 2] = [Vec::with_capacity(x.len()), Vec::with_capacity(x.len())];
    let mut slips = 0;
    for (p, input) in [x, y].into_iter().enumerate() {
        if let Some(fp) = first_pilot {
            state.phase[p] = (input[fp] * frame.pol(p)[fp].conj()).arg();
            state.integrator[p] = 0.0;
        }
        for (i, &r) in input.iter().enumerate() {
            let theta = state.phase[p];
            let z = r * Complex64::from_polar(1.0, -theta);
            let reference = if frame.pilot_mask[i] {
                frame.pol(p)[i]
            } else {
                c.decide(z)
            };
            let err = (z * reference.conj()).arg();
            if frame.pilot_mask[i] && err.abs() > std::f64::consts::FRAC_PI_4 {
                slips += 1;
                log::warn!("pol {p}: phase slip suspected at instant {i} (pilot error {err:.3} rad)");
            }
            outs[p].push(z);
            phases[p].push(theta);
            state.integrator[p] += state.ki * err;
            state.phase[p] = theta + state.kp * err + state.integrator[p];
        }
    }
    let [ox, oy] = outs;
    Ok(DdpllOutput {
        x: ox,
        y: oy,
        phase: phases,
        cycle_slips: slips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{build_frame, decimate, evm_db, matched_filter, resample, rrc_shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn frame(c: &Constellation, n_sym: usize, seed: u64) -> SymbolFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = c.bits_per_symbol();
        let mut bits = || (0..n_sym * q).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>();
        let bx = bits();
        let by = bits();
        build_frame(&bx, &by, c, 0.05, 4, seed).unwrap()
    }

    fn received(f: &SymbolFrame, snr_db: f64, seed: u64) -> DualPolSignal {
        let s = rrc_shape(f, 32e9, 4, 0.1).unwrap();
        let mut s = resample(&s, 2 * f.len()).unwrap();
        let mut s2 = matched_filter(&s, 32e9, 0.1).unwrap();
        let sd = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in s2.x.iter_mut().chain(s2.y.iter_mut()) {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(a, b) * sd;
        }
        std::mem::swap(&mut s, &mut s2);
        s
    }

    fn data_evm(out: &[Complex64], f: &SymbolFrame, p: usize) -> f64 {
        let got: Vec<Complex64> = f.data_positions.iter().map(|&i| out[i]).collect();
        let want: Vec<Complex64> = f.data_positions.iter().map(|&i| f.pol(p)[i]).collect();
        evm_db(&got, &want)
    }

    #[test]
    fn identity_channel_keeps_center_tap() {
        let c = Constellation::new(16).unwrap();
        let f = frame(&c, 4000, 1);
        let rx = received(&f, 60.0, 2);
        let mut st = NlmsState::default();
        let out = nlms_equalize(&rx, &f, &mut st, 1000).unwrap();
        assert_eq!(out.delay, 0);
        assert!((st.xx[6] - 1.0).norm() < 0.01);
        let center = st.xx[6].norm_sqr();
        for (k, t) in st.xx.iter().enumerate().filter(|(k, _)| *k != 6) {
            assert!(10.0 * (t.norm_sqr() / center).log10() <= -30.0, "tap {k}");
        }
        assert!(data_evm(&out.x, &f, 0) < -35.0);
    }

    #[test]
    fn polarization_swap_converges_to_cross_taps() {
        let c = Constellation::new(16).unwrap();
        let f = frame(&c, 4000, 3);
        let mut rx = received(&f, 30.0, 4);
        rx.swap_polarizations();
        let mut st = NlmsState::default();
        let out = nlms_equalize(&rx, &f, &mut st, 1000).unwrap();
        // Out-of-band tap components never adapt, so compare branch output
        // powers rather than raw tap energies.
        let branch = |w: &[Complex64], v: &[Complex64]| {
            let n = v.len() as isize;
            (0..f.len())
                .map(|i| {
                    (0..13)
                        .map(|k| w[k] * v[(2 * i as isize + k as isize - 6).rem_euclid(n) as usize])
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum::<f64>()
        };
        assert!(branch(&st.xy, &rx.y) > 100.0 * branch(&st.xx, &rx.x));
        assert!(branch(&st.yx, &rx.x) > 100.0 * branch(&st.yy, &rx.y));
        let hard_x = c.demodulate_hard(&f.data_positions.iter().map(|&i| out.x[i]).collect::<Vec<_>>());
        assert_eq!(hard_x, f.data_bits(&c).0);
    }

    #[test]
    fn recovers_delay() {
        let c = Constellation::new(4).unwrap();
        let f = frame(&c, 2000, 5);
        let mut rx = received(&f, 40.0, 6);
        rx.x.rotate_right(6);
        rx.y.rotate_right(6);
        let mut st = NlmsState::default();
        let out = nlms_equalize(&rx, &f, &mut st, 800).unwrap();
        assert_eq!(out.delay, 6);
        assert!(data_evm(&out.y, &f, 1) < -30.0);
    }

    #[test]
    fn training_mse_decreases() {
        let c = Constellation::new(16).unwrap();
        let f = frame(&c, 20000, 7);
        let mut rx = received(&f, 25.0, 8);
        // Static 2×2 mixing to give the equalizer something to learn.
        let (a, b) = (Complex64::new(0.8, 0.1), Complex64::new(0.3, -0.5));
        for (u, v) in rx.x.iter_mut().zip(rx.y.iter_mut()) {
            let (p, q) = (*u, *v);
            *u = a * p + b * q;
            *v = -b.conj() * p + a.conj() * q;
        }
        let mut st = NlmsState::default();
        st.training_passes = 0;
        let out = nlms_equalize(&rx, &f, &mut st, 0).unwrap();
        let avg: Vec<f64> = out
            .update_errors
            .chunks(100)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        assert!(avg.len() >= 8);
        for w in avg[1..avg.len().min(5)].windows(2) {
            assert!(w[1] <= w[0] * 1.1, "{avg:?}");
        }
        assert!(avg.last().unwrap() < &(0.2 * avg[0]));
    }

    #[test]
    fn divergence_detected() {
        let c = Constellation::new(4).unwrap();
        let f = frame(&c, 1000, 9);
        let rx = received(&f, 30.0, 10);
        let mut st = NlmsState::default();
        st.training_passes = 0;
        for t in st.xx.iter_mut().chain(st.yy.iter_mut()) {
            *t = Complex64::new(50.0, 0.0);
        }
        st.step_size = 1e-9;
        assert!(matches!(nlms_equalize(&rx, &f, &mut st, 0), Err(Error::Diverged(_))));
        assert!(NlmsState::new(12, 0.05).is_err());
    }

    fn pll_frame(seed: u64) -> (Constellation, SymbolFrame) {
        let c = Constellation::new(16).unwrap();
        let f = frame(&c, 20000, seed);
        (c, f)
    }

    #[test]
    fn zero_phase_is_transparent() {
        let (c, f) = pll_frame(11);
        let mut st = DdpllState::default();
        let out = ddpll(&f.x, &f.y, &f, &c, &mut st).unwrap();
        assert_eq!(out.x, f.x);
        assert_eq!(out.y, f.y);
        assert_eq!(out.cycle_slips, 0);
    }

    #[test]
    fn constant_offset_removed() {
        let (c, f) = pll_frame(12);
        let rot = Complex64::from_polar(1.0, 0.3);
        let rx: Vec<Complex64> = f.x.iter().map(|v| v * rot).collect();
        let mut st = DdpllState::default();
        let out = ddpll(&rx, &rx, &f, &c, &mut st).unwrap();
        let tail = &out.phase[0][f.len() / 2..];
        assert!(tail.iter().all(|p| (p - 0.3).abs() < 0.01));
    }

    #[test]
    fn sinusoidal_phase_tracked() {
        let (c, f) = pll_frame(13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth: Vec<f64> = (0..f.len())
            .map(|i| 0.1 * (2.0 * std::f64::consts::PI * i as f64 / 1e4).sin())
            .collect();
        let sd = (10f64.powf(-2.5) / 2.0).sqrt();
        let rx: Vec<Complex64> = f
            .x
            .iter()
            .zip(&truth)
            .map(|(v, &t)| {
                let n = Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)) * sd;
                v * Complex64::from_polar(1.0, t) + n
            })
            .collect();
        let mut st = DdpllState::default();
        let out = ddpll(&rx, &rx, &f, &c, &mut st).unwrap();
        let skip = 2000;
        let mse = out.phase[0][skip..]
            .iter()
            .zip(&truth[skip..])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / (f.len() - skip) as f64;
        assert!(mse.sqrt() < 0.02, "rms {}", mse.sqrt());
    }

    #[test]
    fn loop_gains_for_default_bandwidth() {
        let st = DdpllState::default();
        assert!((st.kp - 3.2e-3).abs() < 1e-12);
        assert!((st.ki - 2.56e-6).abs() < 1e-15);
    }

    #[test]
    fn cycle_slip_logged_not_raised() {
        let (c, f) = pll_frame(14);
        // A sudden quarter-turn halfway through.
        let rx: Vec<Complex64> = f
            .x
            .iter()
            .enumerate()
            .map(|(i, v)| if i > f.len() / 2 { v * Complex64::i() } else { *v })
            .collect();
        let mut st = DdpllState::default();
        let out = ddpll(&rx, &rx, &f, &c, &mut st).unwrap();
        assert!(out.cycle_slips > 0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn pll_phase_equivariant(theta in -3.0f64..3.0) {
            let (c, f) = pll_frame(15);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let sd = (10f64.powf(-2.5) / 2.0).sqrt();
            let rx: Vec<Complex64> = f.x.iter().map(|v| {
                v + Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)) * sd
            }).collect();
            let rot = Complex64::from_polar(1.0, theta);
            let rx2: Vec<Complex64> = rx.iter().map(|v| v * rot).collect();
            let a = ddpll(&rx, &rx, &f, &c, &mut DdpllState::default()).unwrap();
            let b = ddpll(&rx2, &rx2, &f, &c, &mut DdpllState::default()).unwrap();
            for i in 1000..f.len() {
                let d = (Complex64::from_polar(1.0, b.phase[0][i] - a.phase[0][i]) * rot.conj()).arg();
                proptest::prop_assert!(d.abs() < 0.01);
                proptest::prop_assert!((a.x[i] - b.x[i]).norm() < 0.02);
            }
        }
    }

    #[test]
    fn shape_decimate_helper_consistency() {
        let c = Constellation::new(4).unwrap();
        let f = frame(&c, 500, 16);
        let rx = received(&f, 80.0, 17);
        assert!(evm_db(&decimate(&rx.x, 2, 0), &f.x) < -40.0);
    }
}
