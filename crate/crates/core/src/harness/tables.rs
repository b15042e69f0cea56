//! Plot-ready CSV tables.
//!
//! | file            | columns                                                                    |
//! |-----------------|----------------------------------------------------------------------------|
//! | `power_ber.csv` | power_dbm, n_spans, mode, iteration, post_fec_ber, n_bits                  |
//! | `power_snr.csv` | power_dbm, n_spans, mode, iteration, snr_db, snr_conventional_db           |
//! | `power_gmi.csv` | power_dbm, n_spans, mode, iteration, gmi_bits_per_4d_symbol                |
//! | `reach_snr.csv` | n_spans, mode, iteration, power_dbm, snr_db                                |
//! | `reach_ber.csv` | n_spans, mode, iteration, power_dbm, post_fec_ber                          |
//!
//! Reach tables hold each mode's best launch power per span count.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::campaign::{aggregate, optimal_power, CellAggregate, OptimumRow};
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    PowerBer,
    PowerSnr,
    PowerGmi,
    ReachSnr,
    ReachBer,
}

impl Figure {
    pub const ALL: [Figure; 5] = [
        Figure::PowerBer,
        Figure::PowerSnr,
        Figure::PowerGmi,
        Figure::ReachSnr,
        Figure::ReachBer,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::PowerBer => "power_ber",
            Figure::PowerSnr => "power_snr",
            Figure::PowerGmi => "power_gmi",
            Figure::ReachSnr => "reach_snr",
            Figure::ReachBer => "reach_ber",
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name())
    }

    pub fn headers(&self) -> &'static [&'static str] {
        match self {
            Figure::PowerBer => &["power_dbm", "n_spans", "mode", "iteration", "post_fec_ber", "n_bits"],
            Figure::PowerSnr => &["power_dbm", "n_spans", "mode", "iteration", "snr_db", "snr_conventional_db"],
            Figure::PowerGmi => &["power_dbm", "n_spans", "mode", "iteration", "gmi_bits_per_4d_symbol"],
            Figure::ReachSnr => &["n_spans", "mode", "iteration", "power_dbm", "snr_db"],
            Figure::ReachBer => &["n_spans", "mode", "iteration", "power_dbm", "post_fec_ber"],
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown table {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBerRow {
    pub power_dbm: f64,
    pub n_spans: usize,
    pub mode: String,
    pub iteration: usize,
    pub post_fec_ber: f64,
    pub n_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSnrRow {
    pub power_dbm: f64,
    pub n_spans: usize,
    pub mode: String,
    pub iteration: usize,
    pub snr_db: f64,
    pub snr_conventional_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGmiRow {
    pub power_dbm: f64,
    pub n_spans: usize,
    pub mode: String,
    pub iteration: usize,
    pub gmi_bits_per_4d_symbol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachSnrRow {
    pub n_spans: usize,
    pub mode: String,
    pub iteration: usize,
    pub power_dbm: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachBerRow {
    pub n_spans: usize,
    pub mode: String,
    pub iteration: usize,
    pub power_dbm: f64,
    pub post_fec_ber: f64,
}

/// All tables in memory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    pub power_ber: Vec<PowerBerRow>,
    pub power_snr: Vec<PowerSnrRow>,
    pub power_gmi: Vec<PowerGmiRow>,
    pub reach_snr: Vec<ReachSnrRow>,
    pub reach_ber: Vec<ReachBerRow>,
}

impl Tables {
    pub fn from_records(records: &[MetricsRecord]) -> Self {
        let cells = aggregate(records);
        Self::from_aggregates(&cells, &optimal_power(&cells))
    }

    pub fn from_aggregates(cells: &[CellAggregate], optimum: &[OptimumRow]) -> Self {
        Self {
            power_ber: cells
                .iter()
                .map(|c| PowerBerRow {
                    power_dbm: c.power_dbm,
                    n_spans: c.n_spans,
                    mode: c.mode.clone(),
                    iteration: c.iteration,
                    post_fec_ber: c.post_fec_ber,
                    n_bits: c.n_bits,
                })
                .collect(),
            power_snr: cells
                .iter()
                .map(|c| PowerSnrRow {
                    power_dbm: c.power_dbm,
                    n_spans: c.n_spans,
                    mode: c.mode.clone(),
                    iteration: c.iteration,
                    snr_db: c.snr_db,
                    snr_conventional_db: c.snr_conventional_db,
                })
                .collect(),
            power_gmi: cells
                .iter()
                .map(|c| PowerGmiRow {
                    power_dbm: c.power_dbm,
                    n_spans: c.n_spans,
                    mode: c.mode.clone(),
                    iteration: c.iteration,
                    gmi_bits_per_4d_symbol: c.gmi_bits_per_4d_symbol,
                })
                .collect(),
            reach_snr: optimum
                .iter()
                .map(|o| ReachSnrRow {
                    n_spans: o.n_spans,
                    mode: o.mode.clone(),
                    iteration: o.iteration,
                    power_dbm: o.power_dbm,
                    snr_db: o.snr_db,
                })
                .collect(),
            reach_ber: optimum
                .iter()
                .map(|o| ReachBerRow {
                    n_spans: o.n_spans,
                    mode: o.mode.clone(),
                    iteration: o.iteration,
                    power_dbm: o.power_dbm,
                    post_fec_ber: o.post_fec_ber,
                })
                .collect(),
        }
    }

    /// Writes the selected tables (all when `only` is `None`) into `dir` and
    /// returns the paths written.
    pub fn write(&self, dir: impl AsRef<Path>, only: Option<Figure>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for fig in Figure::ALL {
            if only.is_some_and(|o| o != fig) {
                continue;
            }
            let path = dir.join(fig.file_name());
            match fig {
                Figure::PowerBer => write_csv(&path, fig, &self.power_ber)?,
                Figure::PowerSnr => write_csv(&path, fig, &self.power_snr)?,
                Figure::PowerGmi => write_csv(&path, fig, &self.power_gmi)?,
                Figure::ReachSnr => write_csv(&path, fig, &self.reach_snr)?,
                Figure::ReachBer => write_csv(&path, fig, &self.reach_ber)?,
            }
            written.push(path);
        }
        Ok(written)
    }

    /// Reads back every table from `dir`.
    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let p = |f: Figure| dir.join(f.file_name());
        Ok(Self {
            power_ber: read_csv(p(Figure::PowerBer))?,
            power_snr: read_csv(p(Figure::PowerSnr))?,
            power_gmi: read_csv(p(Figure::PowerGmi))?,
            reach_snr: read_csv(p(Figure::ReachSnr))?,
            reach_ber: read_csv(p(Figure::ReachBer))?,
        })
    }
}

/// Aggregates `records` and writes the tables into `dir`.
pub fn emit_tables(records: &[MetricsRecord], dir: impl AsRef<Path>, only: Option<Figure>) -> Result<Vec<PathBuf>> {
    Tables::from_records(records).write(dir, only)
}

fn write_csv<T: Serialize>(path: &Path, fig: Figure, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(fig.headers())?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: DeserializeOwned>(path: PathBuf) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
