//! Saturated uplink data: every STA always has an A-MPDU queued.

use std::time::Duration;

use crate::config::SimParams;
use crate::error::Result;
use crate::medium::hold_txop;
use crate::phy;

/// Timing of one A-MPDU + SIFS + block-ack cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataBurst {
    pub ampdu_bytes: u64,
    pub ampdu_airtime: Duration,
    pub block_ack_airtime: Duration,
    pub sifs: Duration,
    /// Cycles per TxOP; 0 packs as many as fit.
    pub cycles_per_txop: u32,
}

impl DataBurst {
    /// Full-band data at the configured MCS with one stream per STA antenna.
    pub fn from_params(p: &SimParams) -> Result<Self> {
        let f = &p.frames;
        let rate = phy::ofdma_rate(996, phy::mcs(p.mcs_index)?, p.sta_antennas, f.symbol())?;
        let ampdu_bytes = p.ampdu_packets as u64 * p.packet_bytes as u64;
        Ok(DataBurst {
            ampdu_bytes,
            ampdu_airtime: phy::frame_airtime(ampdu_bytes, rate, f.he_preamble(p.sta_antennas)),
            block_ack_airtime: f.block_ack_airtime()?,
            sifs: p.time_units.sifs,
            cycles_per_txop: p.ampdus_per_txop,
        })
    }

    pub fn bits_per_cycle(&self) -> u64 {
        self.ampdu_bytes * 8
    }

    pub fn cycle_airtime(&self) -> Duration {
        self.ampdu_airtime + self.sifs + self.block_ack_airtime
    }

    /// Medium time of the exchange a STA starts when it wins contention.
    pub fn txop_airtime(&self, limit: Duration) -> Duration {
        fill_data_txop(self, limit).1
    }
}

/// Packs cycles back to back, SIFS apart, while the next full cycle fits in
/// `limit`. Returns `(payload bits, occupied time, cycles)`.
pub fn fill_data_txop(burst: &DataBurst, limit: Duration) -> (u64, Duration, u32) {
    let wanted = match burst.cycles_per_txop {
        0 => (limit.as_nanos() / burst.cycle_airtime().as_nanos()) as usize + 1,
        n => n as usize,
    };
    let cycles = vec![burst.cycle_airtime(); wanted];
    match hold_txop(&cycles, burst.sifs, limit) {
        Ok(rec) => (
            rec.sent as u64 * burst.bits_per_cycle(),
            rec.occupied,
            rec.sent as u32,
        ),
        Err(_) => (0, Duration::ZERO, 0),
    }
}
