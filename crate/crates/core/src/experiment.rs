//! Single runs, the three configuration sweeps and their CSV output.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{as_micros_f64, AccessMethod, SensingAntennaConfig, SimParams};
use crate::error::{Error, Result};
use crate::metrics;
use crate::sensing::SawWindowLedger;
use crate::sim::{self, RunResult};

pub const CSV_HEADER: &str =
    "nsta,numapp,stra,saw_code,access,seed,duration_s,pso_pct,psm_pct,throughput_mbps,pawd_pct,window_count";

pub const CONFIG1_SAW_CODES: [u32; 4] = [10, 50, 90, 127];
pub const SPARSE_NSTA: [u32; 5] = [1, 4, 8, 12, 16];
pub const CONFIG2_NUM_APPS: [u32; 5] = [1, 2, 4, 6, 8];
pub const CONFIG3_STRA: [(u32, u32); 4] = [(1, 1), (2, 2), (4, 2), (8, 2)];

/// One CSV row: the swept parameters and the four metrics.
///
/// PSM and PAWD are undefined without windows and are written as empty
/// fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub nsta: u32,
    pub numapp: u32,
    pub stra: SensingAntennaConfig,
    pub saw_code: u32,
    pub access: AccessMethod,
    pub seed: u64,
    pub duration_s: f64,
    pub pso_pct: f64,
    pub psm_pct: Option<f64>,
    pub throughput_mbps: f64,
    pub pawd_pct: Option<f64>,
    pub window_count: u64,
}

impl ResultRow {
    pub fn from_run(p: &SimParams, run: &RunResult) -> Result<Self> {
        let m = &run.metrics;
        let windowed = !m.ledgers.is_empty();
        Ok(ResultRow {
            nsta: p.n_sta,
            numapp: p.num_app,
            stra: p.stra,
            saw_code: p.saw_duration_code,
            access: p.access,
            seed: p.rng_seed,
            duration_s: p.sim_duration.as_secs_f64(),
            pso_pct: metrics::pso(m)?,
            psm_pct: if windowed {
                Some(metrics::psm(m)?)
            } else {
                None
            },
            throughput_mbps: metrics::throughput(m)? / 1e6,
            pawd_pct: if windowed {
                Some(metrics::pawd(m)?)
            } else {
                None
            },
            window_count: run.window_count,
        })
    }

    /// `base` with this row's parameters applied.
    pub fn params(&self, base: &SimParams) -> SimParams {
        SimParams {
            n_sta: self.nsta,
            num_app: self.numapp,
            stra: self.stra,
            saw_duration_code: self.saw_code,
            access: self.access,
            rng_seed: self.seed,
            sim_duration: std::time::Duration::from_secs_f64(self.duration_s),
            ..base.clone()
        }
    }
}

/// Runs one point and keeps the full result.
pub fn run_point(p: &SimParams) -> Result<(ResultRow, RunResult)> {
    let run = sim::simulate(p)?;
    Ok((ResultRow::from_run(p, &run)?, run))
}

pub fn run_single(p: &SimParams) -> Result<ResultRow> {
    run_point(p).map(|(row, _)| row)
}

/// The grid of one experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub config_id: u32,
    pub points: Vec<SimParams>,
}

impl SweepSpec {
    /// Builds the grid for `config_id` on top of `base`, which supplies the
    /// access method, seed, duration and every unswept parameter.
    pub fn new(config_id: u32, base: &SimParams) -> Result<Self> {
        let with = |f: &dyn Fn(&mut SimParams)| {
            let mut p = base.clone();
            f(&mut p);
            p
        };
        let mut points = Vec::new();
        match config_id {
            1 => {
                for saw in CONFIG1_SAW_CODES {
                    for n in 1..=16 {
                        points.push(with(&|p| {
                            p.n_sta = n;
                            p.saw_duration_code = saw;
                            p.num_app = 4;
                            p.stra = SensingAntennaConfig { tx: 2, rx: 2 };
                        }));
                    }
                }
            }
            2 => {
                for apps in CONFIG2_NUM_APPS {
                    for n in SPARSE_NSTA {
                        points.push(with(&|p| {
                            p.n_sta = n;
                            p.num_app = apps;
                            p.saw_duration_code = 127;
                            p.stra = SensingAntennaConfig { tx: 2, rx: 2 };
                        }));
                    }
                }
            }
            3 => {
                for (tx, rx) in CONFIG3_STRA {
                    for n in SPARSE_NSTA {
                        points.push(with(&|p| {
                            p.n_sta = n;
                            p.stra = SensingAntennaConfig { tx, rx };
                            p.num_app = 4;
                            p.saw_duration_code = 127;
                        }));
                    }
                }
            }
            other => {
                return Err(Error::invalid(
                    "config",
                    format!("must be 1, 2 or 3, got {other}"),
                ))
            }
        }
        for p in &points {
            p.validate()?;
        }
        Ok(SweepSpec { config_id, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))
}

/// Runs every point on `jobs` threads (0 picks the core count). Results
/// come back in input order.
pub fn run_points(points: &[SimParams], jobs: usize) -> Result<Vec<RunResult>> {
    pool(jobs)?.install(|| points.par_iter().map(sim::simulate).collect())
}

/// Runs a sweep and writes one row per point, in grid order, flushing as
/// each batch of `jobs` points finishes.
pub fn run_sweep<W: Write>(spec: &SweepSpec, out: W, jobs: usize) -> Result<Vec<ResultRow>> {
    let pool = pool(jobs)?;
    let batch = pool.current_num_threads().max(1);
    let mut csv = csv::Writer::from_writer(out);
    let mut rows = Vec::with_capacity(spec.len());
    for chunk in spec.points.chunks(batch) {
        let done: Vec<ResultRow> =
            pool.install(|| chunk.par_iter().map(run_single).collect::<Result<_>>())?;
        for row in done {
            csv.serialize(&row)?;
            rows.push(row);
        }
        csv.flush()?;
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut csv = csv::Reader::from_reader(input);
    let rows = csv
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

#[derive(Serialize)]
struct LedgerRow {
    window_index: u64,
    required_bytes: u64,
    sent_bytes: u64,
    classification: String,
    available_us: f64,
}

/// Per-window ledger as CSV.
pub fn write_ledger_csv<W: Write>(ledgers: &[SawWindowLedger], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    for l in ledgers {
        csv.serialize(LedgerRow {
            window_index: l.window_index,
            required_bytes: l.required_bytes,
            sent_bytes: l.sent_bytes,
            classification: l.classification.to_string(),
            available_us: as_micros_f64(l.available_us),
        })?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let base = SimParams::default();
        assert_eq!(SweepSpec::new(1, &base).unwrap().len(), 64);
        assert_eq!(SweepSpec::new(2, &base).unwrap().len(), 25);
        assert_eq!(SweepSpec::new(3, &base).unwrap().len(), 20);
        assert!(SweepSpec::new(4, &base).is_err());
    }

    #[test]
    fn header_is_fixed() {
        let row = ResultRow {
            nsta: 4,
            numapp: 4,
            stra: SensingAntennaConfig { tx: 2, rx: 2 },
            saw_code: 127,
            access: AccessMethod::NoSensing,
            seed: 1,
            duration_s: 0.5,
            pso_pct: 0.0,
            psm_pct: None,
            throughput_mbps: 1.25,
            pawd_pct: None,
            window_count: 0,
        };
        let mut buf = Vec::new();
        write_rows(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("4,4,2x2,127,none,1,0.5,0.0,,1.25,,0"));
        assert_eq!(read_rows(text.as_bytes()).unwrap(), vec![row]);
    }

    #[test]
    fn ledger_csv_columns() {
        let l = SawWindowLedger {
            window_index: 2,
            required_bytes: 100,
            sent_bytes: 40,
            sounding_rounds_done: 1,
            classification: crate::sensing::Classification::PartiallyMissed,
            available_us: std::time::Duration::from_nanos(4_975_500),
        };
        let mut buf = Vec::new();
        write_ledger_csv(&[l], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "window_index,required_bytes,sent_bytes,classification,available_us\n2,100,40,partial,4975.5\n"
        );
    }
}
