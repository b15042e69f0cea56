//! Upper bound on what adaptive 2×2 linear equalization can still remove
//! after the standard receiver chain: exponentially weighted LS with the
//! transmitted symbols known (causal), and a two-sided sliding-window LS.
//!
//! cargo run --release -p turbonlc --example genie_bound -- configs/desk.cfg -2 [--bypass-dsp]

use nalgebra::{DMatrix, DVector};
use turbonlc::harness::TrialSetup;
use turbonlc::{CampaignConfig, Complex64};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn regressor(rx: &[Vec<Complex64>; 2], i: usize, taps: usize) -> DVector<Complex64> {
    DVector::from_fn(2 * taps, |m, _| rx[m / taps][i + m % taps - taps / 2])
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        eprintln!("usage: genie_bound <config> <power_dbm> [--bypass-dsp]");
        std::process::exit(2);
    }
    let mut cfg = CampaignConfig::load(&args[0]).expect("config");
    cfg.dsp.enabled = !args.iter().any(|a| a == "--bypass-dsp");
    let power: f64 = args[1].parse().expect("launch power in dBm");
    let spans = cfg.spans[0];
    let setup = TrialSetup::new(cfg).expect("setup");
    let (tx, field) = setup.transmit_link(power, spans, 0).expect("link");
    let two = setup.front_end(&field, spans, true, tx.frame.len()).expect("front end");
    let rx = setup.sync(&two, &tx.frame).expect("sync");
    let s = [&tx.frame.x, &tx.frame.y];
    let t = tx.frame.len();
    let (from, to) = (1000, t - 1000);
    let snr = |est: &[Vec<Complex64>; 2]| {
        let (mut ps, mut pe) = (0.0, 0.0);
        for q in 0..2 {
            for i in from..to {
                ps += s[q][i].norm_sqr();
                pe += (est[q][i] - s[q][i]).norm_sqr();
            }
        }
        10.0 * (ps / pe).log10()
    };
    println!("after standard DSP: {:.2} dB", snr(&rx));

    for taps in [1usize, 3] {
        let dim = 2 * taps;
        for lambda in [0.999f64, 0.99, 0.95] {
            let lam = Complex64::new(lambda, 0.0);
            let mut g = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(1e-3, 0.0);
            let mut c = [DVector::zeros(dim), DVector::zeros(dim)];
            let mut est = [vec![ZERO; t], vec![ZERO; t]];
            for i in taps..t - taps {
                let u = regressor(&rx, i, taps);
                if i > 200 {
                    let chol = g.clone().cholesky().expect("positive definite");
                    for q in 0..2 {
                        est[q][i] = (u.transpose() * chol.solve(&c[q]))[0];
                    }
                }
                let uc = u.conjugate();
                g = g * lam + &uc * u.transpose();
                for q in 0..2 {
                    c[q] = &c[q] * lam + &uc * s[q][i];
                }
            }
            println!("causal, {taps} taps, lambda {lambda}: {:.2} dB", snr(&est));
        }
        for w in [25usize, 101, 1001] {
            let h = w / 2;
            let mut est = [vec![ZERO; t], vec![ZERO; t]];
            for i in from..to {
                let a = DMatrix::from_fn(w, dim, |row, m| rx[m / taps][i - h + row + m % taps - taps / 2]);
                let ah = a.adjoint();
                let chol = (&ah * &a + DMatrix::identity(dim, dim) * Complex64::new(1e-6, 0.0))
                    .cholesky()
                    .expect("positive definite");
                let u = regressor(&rx, i, taps);
                for q in 0..2 {
                    let b = DVector::from_fn(w, |row, _| s[q][i - h + row]);
                    est[q][i] = (u.transpose() * chol.solve(&(&ah * b)))[0];
                }
            }
            println!("two-sided, {taps} taps, window {w}: {:.2} dB", snr(&est));
        }
    }
}
