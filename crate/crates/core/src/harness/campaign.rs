use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::CampaignConfig;
use super::trial::TrialSetup;
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

/// A sweep cell that failed; the rest of the campaign still runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub launch_power_dbm: f64,
    pub n_spans: usize,
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignResults {
    pub records: Vec<MetricsRecord>,
    pub failures: Vec<CellFailure>,
}

/// Runs every (power, spans, trial) cell of `cfg` on `jobs` threads (0: one
/// per core). Records come back in sweep order regardless of scheduling.
pub fn run_campaign(cfg: &CampaignConfig, jobs: usize) -> Result<CampaignResults> {
    let setup = TrialSetup::new(cfg.clone())?;
    let mut cells = Vec::new();
    for &p in &cfg.launch_powers_dbm {
        for &s in &cfg.spans {
            for t in 0..cfg.n_trials {
                cells.push((p, s, t));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, s, t)| (p, s, t, setup.run_trial(p, s, t)))
            .collect()
    });
    let mut res = CampaignResults::default();
    for (p, s, t, out) in outcomes {
        match out {
            Ok(r) => res.records.extend(r),
            Err(e) => {
                log::error!("{e}");
                res.failures.push(CellFailure {
                    launch_power_dbm: p,
                    n_spans: s,
                    trial: t,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(res)
}

pub fn write_records(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Mean over trials of one (power, spans, mode, iteration) cell. BER pools
/// the error counts of all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub power_dbm: f64,
    pub n_spans: usize,
    pub mode: String,
    pub iteration: usize,
    pub trials: usize,
    pub post_fec_ber: f64,
    pub n_bits: usize,
    pub snr_db: f64,
    pub snr_conventional_db: f64,
    pub gmi_bits_per_4d_symbol: f64,
}

fn mode_rank(mode: &str) -> usize {
    match mode {
        "edc" => 0,
        "dbp" => 1,
        "dbp_turbo" => 2,
        _ => 3,
    }
}

type CellKey = (usize, String, usize, u64);

fn sort_key(power: f64, spans: usize, mode: &str, iteration: usize) -> (usize, usize, String, usize, u64) {
    // f64 order via the IEEE total order of its bits
    let bits = power.to_bits();
    let ordered = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
    (spans, mode_rank(mode), mode.to_string(), iteration, ordered)
}

pub fn aggregate(records: &[MetricsRecord]) -> Vec<CellAggregate> {
    let mut cells: BTreeMap<(usize, usize, String, usize, u64), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry(sort_key(r.launch_power_dbm, r.n_spans, &r.mode, r.turbo_iteration))
            .or_default()
            .push(r);
    }
    cells
        .into_values()
        .map(|rs| {
            let n = rs.len() as f64;
            let errors: f64 = rs.iter().map(|r| r.post_fec_ber * r.n_bits_counted as f64).sum();
            let bits: usize = rs.iter().map(|r| r.n_bits_counted).sum();
            let first = rs[0];
            CellAggregate {
                power_dbm: first.launch_power_dbm,
                n_spans: first.n_spans,
                mode: first.mode.clone(),
                iteration: first.turbo_iteration,
                trials: rs.len(),
                post_fec_ber: if bits == 0 { 0.0 } else { (errors / bits as f64).clamp(0.0, 1.0) },
                n_bits: bits,
                snr_db: rs.iter().map(|r| r.snr_db).sum::<f64>() / n,
                snr_conventional_db: rs.iter().map(|r| r.snr_conventional_db).sum::<f64>() / n,
                gmi_bits_per_4d_symbol: rs.iter().map(|r| r.gmi_bits_per_4d_symbol).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Best launch power of each (spans, mode, iteration), by mean SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumRow {
    pub n_spans: usize,
    pub mode: String,
    pub iteration: usize,
    pub power_dbm: f64,
    pub snr_db: f64,
    pub post_fec_ber: f64,
    pub gmi_bits_per_4d_symbol: f64,
}

pub fn optimal_power(cells: &[CellAggregate]) -> Vec<OptimumRow> {
    let mut best: BTreeMap<(usize, usize, String, usize), &CellAggregate> = BTreeMap::new();
    for c in cells {
        let key = (c.n_spans, mode_rank(&c.mode), c.mode.clone(), c.iteration);
        match best.get(&key) {
            Some(b) if b.snr_db >= c.snr_db => {}
            _ => {
                best.insert(key, c);
            }
        }
    }
    best.into_values()
        .map(|c| OptimumRow {
            n_spans: c.n_spans,
            mode: c.mode.clone(),
            iteration: c.iteration,
            power_dbm: c.power_dbm,
            snr_db: c.snr_db,
            post_fec_ber: c.post_fec_ber,
            gmi_bits_per_4d_symbol: c.gmi_bits_per_4d_symbol,
        })
        .collect()
}

/// The last iteration of each (spans, mode, power) cell.
pub fn final_iteration(cells: &[CellAggregate]) -> Vec<CellAggregate> {
    let mut last: BTreeMap<CellKey, &CellAggregate> = BTreeMap::new();
    for c in cells {
        let key = (c.n_spans, c.mode.clone(), mode_rank(&c.mode), sort_key(c.power_dbm, 0, "", 0).4);
        match last.get(&key) {
            Some(b) if b.iteration >= c.iteration => {}
            _ => {
                last.insert(key, c);
            }
        }
    }
    let mut v: Vec<CellAggregate> = last.into_values().cloned().collect();
    v.sort_by(|a, b| {
        sort_key(a.power_dbm, a.n_spans, &a.mode, 0).cmp(&sort_key(b.power_dbm, b.n_spans, &b.mode, 0))
    });
    v
}

/// True when `values` rise to a single interior maximum and then fall.
pub fn is_unimodal(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let peak = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if peak == 0 || peak == values.len() - 1 {
        return false;
    }
    values[..=peak].windows(2).all(|w| w[1] > w[0]) && values[peak..].windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: f64, mode: &str, it: usize, trial: usize, snr: f64, ber: f64) -> MetricsRecord {
        MetricsRecord {
            launch_power_dbm: p,
            n_spans: 10,
            mode: mode.into(),
            trial,
            turbo_iteration: it,
            seed: 0,
            post_fec_ber: ber,
            n_bits_counted: 1000,
            snr_db: snr,
            snr_conventional_db: snr - 1.0,
            gmi_bits_per_4d_symbol: 10.0,
            soft_feedback_gmi: 10.0,
        }
    }

    #[test]
    fn aggregates_over_trials_in_sweep_order() {
        let records = vec![
            rec(2.0, "dbp_turbo", 1, 0, 14.0, 0.0),
            rec(-1.0, "edc", 0, 0, 12.0, 0.01),
            rec(-1.0, "edc", 0, 1, 14.0, 0.03),
            rec(2.0, "dbp_turbo", 0, 0, 13.0, 0.0),
        ];
        let agg = aggregate(&records);
        assert_eq!(agg.len(), 3);
        assert_eq!(agg[0].mode, "edc");
        assert_eq!(agg[0].trials, 2);
        assert!((agg[0].snr_db - 13.0).abs() < 1e-12);
        assert!((agg[0].post_fec_ber - 0.02).abs() < 1e-12);
        assert_eq!(agg[0].n_bits, 2000);
        assert_eq!((agg[1].iteration, agg[2].iteration), (0, 1));
        let fin = final_iteration(&agg);
        assert_eq!(fin.len(), 2);
        assert_eq!(fin[1].iteration, 1);
    }

    #[test]
    fn single_cell_single_row() {
        let agg = aggregate(&[rec(0.0, "dbp", 0, 0, 11.0, 0.0)]);
        assert_eq!(agg.len(), 1);
        assert_eq!(optimal_power(&agg).len(), 1);
    }

    #[test]
    fn optimum_and_unimodality() {
        let records: Vec<_> = [(-2.0, 10.0), (0.0, 12.0), (2.0, 11.0)]
            .iter()
            .map(|&(p, s)| rec(p, "dbp", 0, 0, s, 0.0))
            .collect();
        let opt = optimal_power(&aggregate(&records));
        assert_eq!(opt[0].power_dbm, 0.0);
        assert!(is_unimodal(&[1.0, 3.0, 2.0]));
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.5, 0.0]));
        assert!(!is_unimodal(&[1.0, 2.0, 3.0]));
        assert!(!is_unimodal(&[1.0, 3.0, 2.0, 2.5]));
        assert!(!is_unimodal(&[1.0, 3.0]));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let records = vec![rec(0.1, "edc", 0, 0, 12.345678901234, 1e-5), rec(0.2, "dbp", 0, 0, 1.0 / 3.0, 0.0)];
        write_records(&p, &records).unwrap();
        assert_eq!(read_records(&p).unwrap(), records);
    }
}
