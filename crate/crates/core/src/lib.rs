//! Discrete-event simulation of WLAN sensing measurement exchanges sharing
//! a single BSS with saturated EDCA data traffic.
//!
//! An AP periodically opens a sensing availability window (SAW) and, inside
//! it, sounds its STAs with NDPA + NDP and collects their CSI reports over
//! OFDMA. Meanwhile every STA contends for the medium to send A-MPDUs. A run
//! reports how much airtime sensing consumed, how many windows missed their
//! demand, the data throughput left over and how much of each window was
//! usable for sensing.
//!
//! ```
//! use std::time::Duration;
//! use sensim::{simulate, AccessMethod, SimParams};
//!
//! let params = SimParams {
//!     access: AccessMethod::Pifs,
//!     sim_duration: Duration::from_secs(1),
//!     ..SimParams::default()
//! };
//! let run = simulate(&params).unwrap();
//! assert_eq!(run.window_count, 9);
//! assert_eq!(sensim::metrics::psm(&run.metrics).unwrap(), 0.0);
//! ```

pub mod config;
pub mod error;
pub mod experiment;
pub mod medium;
pub mod metrics;
pub mod phy;
pub mod sensing;
pub mod sim;
pub mod trace;
pub mod traffic;

pub use config::{AccessMethod, SensingAntennaConfig, SimParams, SoundingMode, TimeUnits};
pub use error::{Error, Result};
pub use experiment::{run_single, run_sweep, ResultRow, SweepSpec};
pub use phy::csi_size_bytes;
pub use sensing::{Classification, SawWindowLedger};
pub use sim::{simulate, simulate_traced, RunResult};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/units.md")]
    struct Units;

    #[doc = include_str!("../../../book/src/airtime.md")]
    struct Airtime;

    #[doc = include_str!("../../../book/src/medium.md")]
    struct Medium;

    #[doc = include_str!("../../../book/src/sensing.md")]
    struct Sensing;

    #[doc = include_str!("../../../book/src/metrics.md")]
    struct Metrics;

    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
