//! The four run metrics and their accumulator.

use std::time::Duration;

use crate::error::{Error, Result};
use crate::medium::TimePartition;
use crate::sensing::{Classification, SawWindowLedger};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsAccumulator {
    pub partition: TimePartition,
    pub data_bits: u64,
    pub ledgers: Vec<SawWindowLedger>,
    /// SAW duration, the PAWD denominator.
    pub saw_duration: Duration,
    pub sim_time: Duration,
}

impl MetricsAccumulator {
    pub fn sensing_airtime(&self) -> Duration {
        self.partition.sensing
    }

    pub fn count(&self, class: Classification) -> usize {
        self.ledgers
            .iter()
            .filter(|l| l.classification == class)
            .count()
    }

    pub fn missed(&self) -> usize {
        self.ledgers
            .iter()
            .filter(|l| l.classification.is_missed())
            .count()
    }
}

/// Percentage of simulated time spent on sensing exchanges.
pub fn pso(acc: &MetricsAccumulator) -> Result<f64> {
    if acc.sim_time.is_zero() {
        return Err(Error::Metric("PSO needs a non-zero simulation time"));
    }
    Ok(100.0 * acc.sensing_airtime().as_nanos() as f64 / acc.sim_time.as_nanos() as f64)
}

/// Percentage of windows not completed.
pub fn psm(acc: &MetricsAccumulator) -> Result<f64> {
    if acc.ledgers.is_empty() {
        return Err(Error::Metric("PSM needs at least one window"));
    }
    Ok(100.0 * acc.missed() as f64 / acc.ledgers.len() as f64)
}

/// Data bits per second.
pub fn throughput(acc: &MetricsAccumulator) -> Result<f64> {
    if acc.sim_time.is_zero() {
        return Err(Error::Metric("throughput needs a non-zero simulation time"));
    }
    Ok(acc.data_bits as f64 / acc.sim_time.as_secs_f64())
}

/// Mean percentage of each window available for sensing.
pub fn pawd(acc: &MetricsAccumulator) -> Result<f64> {
    if acc.ledgers.is_empty() {
        return Err(Error::Metric("PAWD needs at least one window"));
    }
    if acc.saw_duration.is_zero() {
        return Err(Error::Metric("PAWD needs a non-zero SAW duration"));
    }
    let total = acc.saw_duration.as_nanos() as f64;
    let sum: f64 = acc
        .ledgers
        .iter()
        .map(|l| (100.0 * l.available_us.as_nanos() as f64 / total).clamp(0.0, 100.0))
        .sum();
    Ok(sum / acc.ledgers.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(class: Classification, available_us: u64) -> SawWindowLedger {
        SawWindowLedger {
            window_index: 0,
            required_bytes: 10,
            sent_bytes: if class == Classification::Complete {
                10
            } else {
                0
            },
            sounding_rounds_done: 0,
            classification: class,
            available_us: Duration::from_micros(available_us),
        }
    }

    fn acc() -> MetricsAccumulator {
        MetricsAccumulator {
            sim_time: Duration::from_millis(100),
            saw_duration: Duration::from_micros(12_700),
            ..Default::default()
        }
    }

    #[test]
    fn pso_examples() {
        let mut a = acc();
        assert_eq!(pso(&a).unwrap(), 0.0);
        a.partition.sensing = Duration::from_millis(5);
        assert!((pso(&a).unwrap() - 5.0).abs() < 1e-12);
        a.sim_time = Duration::ZERO;
        assert!(pso(&a).is_err());
    }

    #[test]
    fn psm_examples() {
        let mut a = acc();
        assert!(psm(&a).is_err());
        a.ledgers = vec![ledger(Classification::Complete, 0); 4];
        assert_eq!(psm(&a).unwrap(), 0.0);
        a.ledgers[2] = ledger(Classification::PartiallyMissed, 0);
        assert_eq!(psm(&a).unwrap(), 25.0);
        a.ledgers[0] = ledger(Classification::CompletelyMissed, 0);
        assert_eq!(psm(&a).unwrap(), 50.0);
        assert_eq!(a.count(Classification::Complete), 2);
    }

    #[test]
    fn throughput_examples() {
        let mut a = acc();
        assert_eq!(throughput(&a).unwrap(), 0.0);
        a.data_bits = 1_200_000;
        assert_eq!(throughput(&a).unwrap(), 12e6);
    }

    #[test]
    fn pawd_examples() {
        let mut a = acc();
        assert!(pawd(&a).is_err());
        a.ledgers = vec![
            ledger(Classification::Complete, 12_700),
            ledger(Classification::Complete, 0),
        ];
        assert_eq!(pawd(&a).unwrap(), 50.0);
        a.ledgers = vec![ledger(Classification::Complete, 20_000)];
        assert_eq!(pawd(&a).unwrap(), 100.0);
    }
}
