//! Adaptive turbo equalizer: a 2×2 RLS channel estimator driven by soft
//! symbol means, a sliding-window SISO LMMSE equalizer with priors, and the
//! iteration loop with the LDPC decoder.
//!
//! Channel model. With `d = ⌊(L+1)/2⌋` and the delayed observation
//! `r'_j = r_{j-d}`, each polarization obeys
//! `r'^(p)_j = Σ_n h^(px)_n s^(x)_{j-n} + h^(py)_n s^(y)_{j-n}`, n = 0..=L,
//! so a centered (pre- and post-cursor) channel maps onto causal taps with the
//! main tap at `h_d`. Received sequences are indexed circularly; symbols
//! outside the frame are treated as unknown (mean 0, variance σ_s²).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{
    demap, extrinsic_llrs, soft_stats_from_llrs, Constellation, LlrBlock, LlrKind, SoftSymbolStats,
    NOISE_VAR_FLOOR,
};
use crate::error::{Error, Result};
use crate::fec::{decode, Feedback, Interleaver, LdpcCode};
use crate::waveform::SymbolFrame;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tap index order inside a [`ChannelTapTrack`] instant.
pub const XX: usize = 0;
pub const XY: usize = 1;
pub const YX: usize = 2;
pub const YY: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlidingWindowConfig {
    pub n1: usize,
    pub n2: usize,
    /// Channel memory; the estimator uses `L+1` taps per path.
    pub l: usize,
    pub lambda: f64,
    /// Fixed σ_n²; `None` estimates it from known-symbol residuals each
    /// iteration.
    pub noise_var: Option<f64>,
    pub n_turbo_iters: usize,
    pub decoder_iters: usize,
    pub feedback: Feedback,
    /// RLS regularization: Σ starts at `I/delta`.
    pub delta: f64,
    /// Leading FEC blocks known to the receiver (data-aided pre-convergence).
    pub training_blocks: usize,
    pub preconv_step: f64,
    pub preconv_passes: usize,
    pub stop_on_convergence: bool,
    pub rls_structure: RlsStructure,
}

/// Inverse-correlation structure of the RLS estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RlsStructure {
    /// One `2(L+1)`-square Σ over the stacked x/y regressor (exact RLS).
    #[default]
    Joint,
    /// Separate Σ^(x), Σ^(y), ignoring correlation between polarizations.
    PerPolarization,
}

impl Default for SlidingWindowConfig {
    fn default() -> Self {
        Self {
            n1: 0,
            n2: 2,
            l: 2,
            lambda: 0.99,
            noise_var: None,
            n_turbo_iters: 5,
            decoder_iters: 50,
            feedback: Feedback::APosteriori,
            delta: 0.01,
            training_blocks: 3,
            preconv_step: 0.05,
            preconv_passes: 3,
            stop_on_convergence: false,
            rls_structure: RlsStructure::Joint,
        }
    }
}

impl SlidingWindowConfig {
    pub fn window(&self) -> usize {
        self.n1 + self.n2 + 1
    }

    pub fn delay(&self) -> usize {
        (self.l + 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("forgetting factor {}", self.lambda)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("RLS delta {}", self.delta)));
        }
        if let Some(v) = self.noise_var {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("noise variance {v}")));
            }
        }
        if self.decoder_iters == 0 {
            return Err(Error::InvalidParameter("decoder_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-instant 2×2 channel taps, `L+1` per path, for the model in the module
/// docs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTapTrack {
    l: usize,
    len: usize,
    taps: Vec<Complex64>,
}

impl ChannelTapTrack {
    pub fn zeros(len: usize, l: usize) -> Self {
        Self {
            l,
            len,
            taps: vec![ZERO; len * 4 * (l + 1)],
        }
    }

    /// The same taps at every instant; `paths[k]` in `XX, XY, YX, YY` order.
    pub fn constant(len: usize, paths: &[Vec<Complex64>; 4]) -> Result<Self> {
        let l = paths[0].len().checked_sub(1).ok_or_else(|| {
            Error::InvalidParameter("channel paths need at least one tap".into())
        })?;
        let mut t = Self::zeros(len, l);
        for i in 0..len {
            t.set(i, paths)?;
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn memory(&self) -> usize {
        self.l
    }

    pub fn taps(&self, i: usize, k: usize) -> &[Complex64] {
        let w = self.l + 1;
        let base = (i * 4 + k) * w;
        &self.taps[base..base + w]
    }

    pub fn set(&mut self, i: usize, paths: &[Vec<Complex64>; 4]) -> Result<()> {
        let w = self.l + 1;
        for (k, p) in paths.iter().enumerate() {
            if p.len() != w {
                return Err(Error::Length {
                    what: "channel path taps",
                    expected: w,
                    got: p.len(),
                });
            }
            let base = (i * 4 + k) * w;
            self.taps[base..base + w].copy_from_slice(p);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.taps.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Output of the channel model for symbols `s` under `track` (circular
/// symbol indexing), returned as the undelayed received sequence `r`.
pub fn channel_output(s: [&[Complex64]; 2], track: &ChannelTapTrack) -> [Vec<Complex64>; 2] {
    let t = s[0].len();
    let d = (track.memory() + 1) / 2;
    let mut out = [vec![ZERO; t], vec![ZERO; t]];
    for j in 0..t {
        for p in 0..2 {
            let mut acc = ZERO;
            for (q, sq) in s.iter().enumerate() {
                for (n, h) in track.taps(j, 2 * p + q).iter().enumerate() {
                    acc += h * sq[(j + t - n % t) % t];
                }
            }
            // r_{j-d} = r'_j
            out[p][(j + t - d % t) % t] = acc;
        }
    }
    out
}

/// State carried by the RLS estimator between instants. `sigma` holds one
/// matrix for [`RlsStructure::Joint`] and two (x, y) otherwise.
#[derive(Debug, Clone)]
pub struct RlsState {
    pub sigma: Vec<DMatrix<Complex64>>,
    pub taps: [Vec<Complex64>; 4],
    pub lambda: f64,
    pub delta: f64,
    pub structure: RlsStructure,
}

impl RlsState {
    /// Identity-like start: unit main tap on the co-polarized paths.
    pub fn new(cfg: &SlidingWindowConfig) -> Self {
        let w = cfg.l + 1;
        let mut taps = [vec![ZERO; w], vec![ZERO; w], vec![ZERO; w], vec![ZERO; w]];
        taps[XX][cfg.delay()] = Complex64::new(1.0, 0.0);
        taps[YY][cfg.delay()] = Complex64::new(1.0, 0.0);
        let mut st = Self {
            sigma: Vec::new(),
            taps,
            lambda: cfg.lambda,
            delta: cfg.delta,
            structure: cfg.rls_structure,
        };
        st.reset_sigma();
        st
    }

    pub fn with_taps(mut self, taps: [Vec<Complex64>; 4]) -> Self {
        self.taps = taps;
        self
    }

    fn reset_sigma(&mut self) {
        let w = self.taps[0].len();
        let init = |n: usize| DMatrix::from_diagonal_element(n, n, Complex64::new(1.0 / self.delta, 0.0));
        self.sigma = match self.structure {
            RlsStructure::Joint => vec![init(2 * w)],
            RlsStructure::PerPolarization => vec![init(w), init(w)],
        };
    }
}

/// `Σ ← (Σ − Σu uᴴΣ / (λ + uᴴΣu)) / λ`; returns the gain `Σ_new u` and
/// whether Σ kept a positive real diagonal.
fn rls_sigma_update(sig: &mut DMatrix<Complex64>, u: &[Complex64], lambda: f64, gain: &mut [Complex64]) -> bool {
    let w = u.len();
    let su: Vec<Complex64> = (0..w).map(|a| (0..w).map(|b| sig[(a, b)] * u[b]).sum()).collect();
    let denom = lambda + (0..w).map(|a| u[a].conj() * su[a]).sum::<Complex64>().re;
    for a in 0..w {
        for b in 0..w {
            sig[(a, b)] = (sig[(a, b)] - su[a] * su[b].conj() / denom) / lambda;
        }
    }
    for a in 0..w {
        gain[a] = su[a] / denom;
    }
    (0..w).all(|a| sig[(a, a)].re > 0.0 && sig[(a, a)].re.is_finite())
}

/// RLS pass output: a-priori taps per instant and the a-priori prediction
/// errors `e_j = r'_j - r̂'_j`.
#[derive(Debug, Clone)]
pub struct RlsOutput {
    pub track: ChannelTapTrack,
    pub errors: [Vec<Complex64>; 2],
}

fn mean_at(stats: &SoftSymbolStats, idx: isize) -> Complex64 {
    if idx < 0 || idx as usize >= stats.len() {
        ZERO
    } else {
        stats.mean[idx as usize]
    }
}

/// Runs the 2×2 RLS estimator over the whole frame. `r` is the undelayed
/// received sequence; `means` are the soft symbol means of each polarization.
pub fn rls_estimate(
    r: [&[Complex64]; 2],
    means: [&SoftSymbolStats; 2],
    cfg: &SlidingWindowConfig,
    state: &mut RlsState,
) -> Result<RlsOutput> {
    let t = r[0].len();
    check_len(r[1].len(), t, "y received symbols")?;
    check_len(means[0].len(), t, "x symbol means")?;
    check_len(means[1].len(), t, "y symbol means")?;
    let w = cfg.l + 1;
    if state.taps.iter().any(|v| v.len() != w) {
        return Err(Error::Length {
            what: "RLS taps",
            expected: w,
            got: state.taps[0].len(),
        });
    }
    let d = cfg.delay();
    let lambda = state.lambda;
    let mut track = ChannelTapTrack::zeros(t, cfg.l);
    let mut errors = [Vec::with_capacity(t), Vec::with_capacity(t)];
    let mut u = [vec![ZERO; w], vec![ZERO; w]];
    let mut gain = [vec![ZERO; w], vec![ZERO; w]];
    let mut stacked = vec![ZERO; 2 * w];
    let mut gain_joint = vec![ZERO; 2 * w];
    for j in 0..t {
        track.set(j, &state.taps)?;
        for (p, up) in u.iter_mut().enumerate() {
            for (n, v) in up.iter_mut().enumerate() {
                *v = mean_at(means[p], j as isize - n as isize);
            }
        }
        let obs = [r[0][(j + t - d % t) % t], r[1][(j + t - d % t) % t]];
        let mut e = [ZERO; 2];
        for p in 0..2 {
            let pred: Complex64 = (0..w)
                .map(|n| state.taps[2 * p][n] * u[0][n] + state.taps[2 * p + 1][n] * u[1][n])
                .sum();
            e[p] = obs[p] - pred;
            errors[p].push(e[p]);
        }
        let healthy = match state.structure {
            RlsStructure::Joint => {
                stacked[..w].copy_from_slice(&u[0]);
                stacked[w..].copy_from_slice(&u[1]);
                let ok = rls_sigma_update(&mut state.sigma[0], &stacked, lambda, &mut gain_joint);
                gain[0].copy_from_slice(&gain_joint[..w]);
                gain[1].copy_from_slice(&gain_joint[w..]);
                ok
            }
            RlsStructure::PerPolarization => {
                let (a, b) = state.sigma.split_at_mut(1);
                rls_sigma_update(&mut a[0], &u[0], lambda, &mut gain[0])
                    & rls_sigma_update(&mut b[0], &u[1], lambda, &mut gain[1])
            }
        };
        for p in 0..2 {
            for q in 0..2 {
                for n in 0..w {
                    state.taps[2 * p + q][n] += gain[q][n].conj() * e[p];
                }
            }
        }
        if !healthy || state.taps.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            log::warn!("RLS covariance lost positive definiteness at instant {j}; re-initializing");
            state.reset_sigma();
            if let Some(prev) = (0..4).map(|k| track.taps(j, k).to_vec()).collect::<Vec<_>>().try_into().ok() {
                state.taps = prev;
            }
        }
    }
    Ok(RlsOutput { track, errors })
}

/// Data-aided NLMS adaptation of the channel taps on known symbols, used to
/// pre-converge the RLS estimator.
pub fn preconverge_taps(
    r: [&[Complex64]; 2],
    known: [&[Complex64]; 2],
    instants: usize,
    cfg: &SlidingWindowConfig,
) -> [Vec<Complex64>; 4] {
    let t = r[0].len();
    let w = cfg.l + 1;
    let d = cfg.delay();
    let mut taps = RlsState::new(cfg).taps;
    let sym = |p: usize, idx: isize| if idx < 0 { ZERO } else { known[p][idx as usize] };
    for _ in 0..cfg.preconv_passes {
        for j in 0..instants.min(t) {
            let u: [Vec<Complex64>; 2] =
                [0, 1].map(|q| (0..w).map(|n| sym(q, j as isize - n as isize)).collect());
            let energy: f64 = u.iter().flatten().map(|v| v.norm_sqr()).sum();
            let g = cfg.preconv_step / (1e-9 + energy);
            for p in 0..2 {
                let obs = r[p][(j + t - d % t) % t];
                let pred: Complex64 = (0..w)
                    .map(|n| taps[2 * p][n] * u[0][n] + taps[2 * p + 1][n] * u[1][n])
                    .sum();
                let e = obs - pred;
                for q in 0..2 {
                    for n in 0..w {
                        taps[2 * p + q][n] += u[q][n].conj() * e * g;
                    }
                }
            }
        }
    }
    taps
}

/// Per-polarization output of the SISO LMMSE equalizer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LmmseOutput {
    pub estimates: [Vec<Complex64>; 2],
    pub scale: [Vec<f64>; 2],
    pub noise: [Vec<f64>; 2],
}

struct Window {
    n: usize,
    nl: usize,
    center: usize,
}

impl Window {
    fn new(cfg: &SlidingWindowConfig) -> Self {
        let n = cfg.window();
        Self {
            n,
            nl: n + cfg.l,
            center: cfg.n1 + cfg.l,
        }
    }
}

/// Builds `H_i` (2N × 2(N+L)) from the taps at instant `i`.
fn channel_matrix(track: &ChannelTapTrack, i: usize, win: &Window) -> DMatrix<Complex64> {
    let l = track.memory();
    let mut h = DMatrix::from_element(2 * win.n, 2 * win.nl, ZERO);
    for p in 0..2 {
        for q in 0..2 {
            let taps = track.taps(i, 2 * p + q);
            for row in 0..win.n {
                for (n, &tap) in taps.iter().enumerate() {
                    let col = row + l - n;
                    h[(p * win.n + row, q * win.nl + col)] = tap;
                }
            }
        }
    }
    h
}

fn hermitian_solve(mut c: DMatrix<Complex64>, rhs: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let dim = c.nrows();
    let scale = (0..dim).map(|a| c[(a, a)].re).fold(0.0, f64::max).max(1e-300);
    for attempt in 0..4 {
        if let Some(ch) = c.clone().cholesky() {
            return Ok(ch.solve(rhs));
        }
        let load = scale * 1e-12 * 10f64.powi(3 * attempt);
        for a in 0..dim {
            c[(a, a)] += load;
        }
    }
    Err(Error::NonFinite("LMMSE covariance is not positive definite"))
}

/// Sliding-window SISO LMMSE equalization of both polarizations.
///
/// Per instant: `w = (H R Hᴴ + σ_n² I)⁻¹ h σ_s²`, `ŝ = wᴴ (r - H s̄)` with the
/// center means zeroed and σ_s² at the centers of `R`, `μ = Re diag(wᴴ h)`
/// clamped to [0, 1], and `ν² = μσ_s² − μ²σ_s²` floored.
pub fn lmmse_equalize(
    r: [&[Complex64]; 2],
    track: &ChannelTapTrack,
    priors: [&SoftSymbolStats; 2],
    cfg: &SlidingWindowConfig,
    noise_var: f64,
    sigma_s2: f64,
) -> Result<LmmseOutput> {
    let t = r[0].len();
    check_len(r[1].len(), t, "y received symbols")?;
    check_len(track.len(), t, "channel tap track")?;
    check_len(priors[0].len(), t, "x priors")?;
    check_len(priors[1].len(), t, "y priors")?;
    if track.memory() != cfg.l {
        return Err(Error::InvalidParameter(format!(
            "tap track memory {} differs from L = {}",
            track.memory(),
            cfg.l
        )));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::DegenerateNoise { index: 0, value: noise_var });
    }
    let win = Window::new(cfg);
    let d = cfg.delay() as isize;
    let floor = NOISE_VAR_FLOOR * sigma_s2;
    let mut out = LmmseOutput {
        estimates: [Vec::with_capacity(t), Vec::with_capacity(t)],
        scale: [Vec::with_capacity(t), Vec::with_capacity(t)],
        noise: [Vec::with_capacity(t), Vec::with_capacity(t)],
    };
    let ti = t as isize;
    let mut means = DMatrix::from_element(2 * win.nl, 1, ZERO);
    let mut vars = vec![0.0; 2 * win.nl];
    let mut rwin = DMatrix::from_element(2 * win.n, 1, ZERO);
    for i in 0..t {
        let h = channel_matrix(track, i, &win);
        let first = i as isize - cfg.n1 as isize - cfg.l as isize;
        for q in 0..2 {
            for c in 0..win.nl {
                let idx = first + c as isize;
                let (m, v) = if idx < 0 || idx >= ti {
                    (ZERO, sigma_s2)
                } else {
                    (priors[q].mean[idx as usize], priors[q].variance[idx as usize])
                };
                means[q * win.nl + c] = m;
                vars[q * win.nl + c] = v;
            }
            means[q * win.nl + win.center] = ZERO;
            vars[q * win.nl + win.center] = sigma_s2;
            for row in 0..win.n {
                let idx = (i as isize - cfg.n1 as isize + row as isize - d).rem_euclid(ti);
                rwin[q * win.n + row] = r[q][idx as usize];
            }
        }
        let mut hd = h.clone();
        for (c, &v) in vars.iter().enumerate() {
            hd.column_mut(c).scale_mut(v);
        }
        let mut cov = &hd * h.adjoint();
        for a in 0..2 * win.n {
            cov[(a, a)] += noise_var;
        }
        let mut hc = DMatrix::from_element(2 * win.n, 2, ZERO);
        hc.set_column(0, &h.column(win.center));
        hc.set_column(1, &h.column(win.nl + win.center));
        let w = hermitian_solve(cov, &(&hc * Complex64::new(sigma_s2, 0.0)))?;
        let resid = &rwin - &h * &means;
        let est = w.adjoint() * resid;
        let m = w.adjoint() * &hc;
        for p in 0..2 {
            let mu = m[(p, p)].re.clamp(0.0, 1.0);
            let nu2 = (mu * sigma_s2 - mu * mu * sigma_s2).max(floor);
            out.estimates[p].push(est[p]);
            out.scale[p].push(mu);
            out.noise[p].push(nu2);
        }
    }
    Ok(out)
}

/// Standard (prior-free) LMMSE: `w = (σ_s² H Hᴴ + σ_n² I)⁻¹ h σ_s²`, `ŝ = wᴴ r`.
pub fn lmmse_no_prior(
    r: [&[Complex64]; 2],
    track: &ChannelTapTrack,
    cfg: &SlidingWindowConfig,
    noise_var: f64,
    sigma_s2: f64,
) -> Result<[Vec<Complex64>; 2]> {
    let t = r[0].len();
    let win = Window::new(cfg);
    let d = cfg.delay() as isize;
    let ti = t as isize;
    let mut out = [Vec::with_capacity(t), Vec::with_capacity(t)];
    let mut rwin = DMatrix::from_element(2 * win.n, 1, ZERO);
    for i in 0..t {
        let h = channel_matrix(track, i, &win);
        let mut cov = (&h * h.adjoint()) * Complex64::new(sigma_s2, 0.0);
        for a in 0..2 * win.n {
            cov[(a, a)] += noise_var;
        }
        let mut hc = DMatrix::from_element(2 * win.n, 2, ZERO);
        hc.set_column(0, &h.column(win.center));
        hc.set_column(1, &h.column(win.nl + win.center));
        let w = hermitian_solve(cov, &(&hc * Complex64::new(sigma_s2, 0.0)))?;
        for q in 0..2 {
            for row in 0..win.n {
                let idx = (i as isize - cfg.n1 as isize + row as isize - d).rem_euclid(ti);
                rwin[q * win.n + row] = r[q][idx as usize];
            }
        }
        let est = w.adjoint() * &rwin;
        out[0].push(est[0]);
        out[1].push(est[1]);
    }
    Ok(out)
}

fn to_pair<T>(v: Vec<T>) -> [T; 2] {
    let [a, b]: [T; 2] = v.try_into().unwrap_or_else(|_| panic!("two polarizations"));
    [a, b]
}

fn check_len(got: usize, expected: usize, what: &'static str) -> Result<()> {
    if got != expected {
        return Err(Error::Length { what, expected, got });
    }
    Ok(())
}

/// One diagnostics line per iteration, polarization and FEC block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostic {
    pub iteration: usize,
    pub pol: usize,
    pub block: usize,
    pub mean_abs_llr: f64,
    pub decoder_iterations: usize,
    pub converged: bool,
    pub unsatisfied_checks: usize,
}

/// Everything produced by one turbo iteration.
#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub iteration: usize,
    /// Decoder input (deinterleaved) per polarization.
    pub llrs: [LlrBlock; 2],
    /// Hard decoded codewords, concatenated blocks, per polarization.
    pub decoded: [Vec<u8>; 2],
    /// Equalizer output at every instant (iteration 0: the received symbols).
    pub equalized: LmmseOutput,
    /// Zero-prior L-values at the data instants in transmitted (interleaved)
    /// bit order, for GMI.
    pub gmi_llrs: [Vec<f64>; 2],
    pub taps: Option<ChannelTapTrack>,
    pub noise_var: f64,
    pub converged_blocks: usize,
}

#[derive(Debug, Clone)]
pub struct TurboOutput {
    pub iterations: Vec<IterationOutput>,
    pub diagnostics: Vec<BlockDiagnostic>,
}

impl TurboOutput {
    pub fn diagnostics_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for d in &self.diagnostics {
            s.push_str(&serde_json::to_string(d)?);
            s.push('\n');
        }
        Ok(s)
    }
}

/// Instants whose symbol the receiver knows: pilots and the training blocks.
fn known_mask(frame: &SymbolFrame, training_blocks: usize) -> Vec<bool> {
    (0..frame.len())
        .map(|i| frame.pilot_mask[i] || frame.block_of_instant[i] < training_blocks)
        .collect()
}

struct Decoded {
    llrs: LlrBlock,
    hard: Vec<u8>,
    feedback: Vec<f64>,
    converged: usize,
}

#[allow(clippy::too_many_arguments)]
fn decode_pol(
    channel_llrs: &[f64],
    code: &LdpcCode,
    il: &Interleaver,
    cfg: &SlidingWindowConfig,
    iteration: usize,
    pol: usize,
    diagnostics: &mut Vec<BlockDiagnostic>,
) -> Result<Decoded> {
    let deint = il.deinterleave_blocks(channel_llrs)?;
    let n = code.n();
    let mut hard = Vec::with_capacity(deint.len());
    let mut feedback = Vec::with_capacity(deint.len());
    let mut converged = 0;
    for (b, block) in deint.chunks_exact(n).enumerate() {
        let out = decode(code, block, cfg.decoder_iters)?;
        diagnostics.push(BlockDiagnostic {
            iteration,
            pol,
            block: b,
            mean_abs_llr: block.iter().map(|l| l.abs()).sum::<f64>() / n as f64,
            decoder_iterations: out.iterations,
            converged: out.converged,
            unsatisfied_checks: code.unsatisfied_checks(&out.hard),
        });
        converged += usize::from(out.converged);
        match cfg.feedback {
            Feedback::APosteriori => feedback.extend_from_slice(&out.a_posteriori.values),
            Feedback::Extrinsic => feedback.extend(out.extrinsic(block).values),
            Feedback::Zero => feedback.extend(std::iter::repeat_n(0.0, n)),
        }
        hard.extend_from_slice(&out.hard);
    }
    Ok(Decoded {
        llrs: LlrBlock::new(deint, LlrKind::Extrinsic),
        hard,
        feedback: il.interleave_blocks(&feedback)?,
        converged,
    })
}

/// Noise variance from residuals at known instants, skipping the first
/// `skip` instants (estimator start-up).
fn residual_noise_var(errors: [&[Complex64]; 2], known: &[bool], skip: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for e in errors {
        for (i, v) in e.iter().enumerate().skip(skip) {
            if known[i] {
                sum += v.norm_sqr();
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// The iterative receiver.
///
/// `rx` are symbol-rate received sequences after synchronization. From
/// `frame` only the pilots and the training blocks are used; the data
/// symbols of the remaining blocks are never read.
pub fn turbo_loop(
    rx: [&[Complex64]; 2],
    frame: &SymbolFrame,
    cfg: &SlidingWindowConfig,
    code: &LdpcCode,
    il: &Interleaver,
    c: &Constellation,
) -> Result<TurboOutput> {
    cfg.validate()?;
    let t = frame.len();
    check_len(rx[0].len(), t, "x received symbols")?;
    check_len(rx[1].len(), t, "y received symbols")?;
    if frame.block_len != code.n() || il.len() != code.n() {
        return Err(Error::InvalidParameter(format!(
            "frame blocks of {} bits, code length {}, interleaver length {}",
            frame.block_len,
            code.n(),
            il.len()
        )));
    }
    let q = c.bits_per_symbol();
    let sigma_s2 = c.energy();
    let var_floor = 1e-6 * sigma_s2;
    let known = known_mask(frame, cfg.training_blocks);
    let data = &frame.data_positions;
    let mut diagnostics = Vec::new();
    let mut iterations = Vec::new();

    // Iteration 0: equalizer bypassed, scalar AWGN demapping.
    let res0: [Vec<Complex64>; 2] =
        [0, 1].map(|p| (0..t).map(|i| if known[i] { rx[p][i] - frame.pol(p)[i] } else { ZERO }).collect());
    let nv0 = match cfg.noise_var {
        Some(v) => v,
        None => residual_noise_var([&res0[0], &res0[1]], &known, 0).unwrap_or(sigma_s2),
    }
    .max(var_floor);
    let mut feedback: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut outs0 = Vec::new();
    let mut llrs0 = Vec::new();
    let mut hard0 = Vec::new();
    let mut conv = 0;
    for p in 0..2 {
        let est: Vec<Complex64> = data.iter().map(|&i| rx[p][i]).collect();
        let ones = vec![1.0; est.len()];
        let nv = vec![nv0; est.len()];
        let ch = demap(&est, &ones, &nv, c)?;
        let dec = decode_pol(&ch, code, il, cfg, 0, p, &mut diagnostics)?;
        conv += dec.converged;
        feedback[p] = dec.feedback;
        llrs0.push(dec.llrs);
        hard0.push(dec.hard);
        outs0.push(ch);
    }
    let mut all_converged = conv == 2 * frame.n_blocks;
    iterations.push(IterationOutput {
        iteration: 0,
        llrs: to_pair(llrs0),
        decoded: to_pair(hard0),
        equalized: LmmseOutput {
            estimates: [rx[0].to_vec(), rx[1].to_vec()],
            scale: [vec![1.0; t], vec![1.0; t]],
            noise: [vec![nv0; t], vec![nv0; t]],
        },
        gmi_llrs: to_pair(outs0),
        taps: None,
        noise_var: nv0,
        converged_blocks: conv,
    });

    // Tap pre-convergence on the known leading blocks.
    let training_instants = frame.instants_before_block(cfg.training_blocks);
    let init_taps = preconverge_taps(rx, [&frame.x, &frame.y], training_instants, cfg);

    for it in 1..=cfg.n_turbo_iters {
        if all_converged && cfg.stop_on_convergence {
            break;
        }
        // Soft symbol statistics from the decoder feedback.
        let mut stats = [SoftSymbolStats::uninformed(t, sigma_s2), SoftSymbolStats::uninformed(t, sigma_s2)];
        for p in 0..2 {
            let ds = soft_stats_from_llrs(&feedback[p], c)?;
            for (k, &i) in data.iter().enumerate() {
                stats[p].mean[i] = ds.mean[k];
                stats[p].variance[i] = ds.variance[k];
            }
            for i in 0..t {
                if known[i] {
                    stats[p].mean[i] = frame.pol(p)[i];
                    stats[p].variance[i] = 0.0;
                }
            }
        }
        let mut rls = RlsState::new(cfg).with_taps(init_taps.clone());
        let est = rls_estimate(rx, [&stats[0], &stats[1]], cfg, &mut rls)?;
        let nv = match cfg.noise_var {
            Some(v) => v,
            None => {
                let mut kn = known.clone();
                // A residual is clean only when every symbol in the regressor
                // is known.
                for (j, k) in kn.iter_mut().enumerate() {
                    *k = (0..=cfg.l).all(|n| j >= n && known[j - n]);
                }
                residual_noise_var([&est.errors[0], &est.errors[1]], &kn, 50)
                    .or_else(|| residual_noise_var([&est.errors[0], &est.errors[1]], &known, 0))
                    .unwrap_or(sigma_s2)
            }
        }
        .max(var_floor);
        let eq = lmmse_equalize(rx, &est.track, [&stats[0], &stats[1]], cfg, nv, sigma_s2)?;

        let mut llrs = Vec::new();
        let mut hard = Vec::new();
        let mut gmi = Vec::new();
        let mut conv = 0;
        let mut next_feedback = [Vec::new(), Vec::new()];
        for p in 0..2 {
            let e: Vec<Complex64> = data.iter().map(|&i| eq.estimates[p][i]).collect();
            let mu: Vec<f64> = data.iter().map(|&i| eq.scale[p][i]).collect();
            let nu: Vec<f64> = data.iter().map(|&i| eq.noise[p][i]).collect();
            let ext = extrinsic_llrs(&e, &mu, &nu, &feedback[p], c)?;
            gmi.push(demap(&e, &mu, &nu, c)?);
            let dec = decode_pol(&ext.values, code, il, cfg, it, p, &mut diagnostics)?;
            debug_assert_eq!(dec.llrs.len(), data.len() * q);
            conv += dec.converged;
            next_feedback[p] = dec.feedback;
            llrs.push(dec.llrs);
            hard.push(dec.hard);
        }
        feedback = next_feedback;
        all_converged = conv == 2 * frame.n_blocks;
        iterations.push(IterationOutput {
            iteration: it,
            llrs: to_pair(llrs),
            decoded: to_pair(hard),
            equalized: eq,
            gmi_llrs: to_pair(gmi),
            taps: Some(est.track),
            noise_var: nv,
            converged_blocks: conv,
        });
    }
    Ok(TurboOutput {
        iterations,
        diagnostics,
    })
}
