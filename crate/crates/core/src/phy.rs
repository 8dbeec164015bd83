//! Frame sizes and on-air durations.
//!
//! Airtime is `preamble + ceil(bits / bits_per_symbol) * symbol`. All
//! durations are whole nanoseconds so that sums of frame times stay exact.

use std::time::Duration;

use crate::config::micros_f64;
use crate::error::{Error, Result};

/// One row of the HE MCS table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McsEntry {
    pub index: u32,
    /// Coded bits per subcarrier per spatial stream (N_bpscs).
    pub bits_per_subcarrier: u32,
    /// Coding rate numerator.
    pub rate_num: u32,
    /// Coding rate denominator.
    pub rate_den: u32,
}

impl McsEntry {
    pub fn coding_rate(&self) -> f64 {
        self.rate_num as f64 / self.rate_den as f64
    }
}

const MCS_TABLE: [(u32, u32, u32); 12] = [
    (1, 1, 2),  // BPSK 1/2
    (2, 1, 2),  // QPSK 1/2
    (2, 3, 4),  // QPSK 3/4
    (4, 1, 2),  // 16-QAM 1/2
    (4, 3, 4),  // 16-QAM 3/4
    (6, 2, 3),  // 64-QAM 2/3
    (6, 3, 4),  // 64-QAM 3/4
    (6, 5, 6),  // 64-QAM 5/6
    (8, 3, 4),  // 256-QAM 3/4
    (8, 5, 6),  // 256-QAM 5/6
    (10, 3, 4), // 1024-QAM 3/4
    (10, 5, 6), // 1024-QAM 5/6
];

pub fn mcs(index: u32) -> Result<McsEntry> {
    let &(bits, num, den) = MCS_TABLE
        .get(index as usize)
        .ok_or(Error::UnknownMcs(index))?;
    Ok(McsEntry {
        index,
        bits_per_subcarrier: bits,
        rate_num: num,
        rate_den: den,
    })
}

/// Data subcarriers (N_sd) carried by an RU of the given tone size.
pub fn data_subcarriers(ru_tones: u32) -> Result<u32> {
    match ru_tones {
        26 => Ok(24),
        52 => Ok(48),
        106 => Ok(102),
        242 => Ok(234),
        484 => Ok(468),
        996 => Ok(980),
        other => Err(Error::UnknownRu(other)),
    }
}

/// A PHY mode expressed as payload bits per OFDM symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rate {
    pub bits_per_symbol: u64,
    pub symbol: Duration,
}

impl Rate {
    /// Legacy OFDM rate, e.g. 24 Mb/s with 4 µs symbols (96 bits per symbol).
    pub fn legacy(mbps: f64, symbol: Duration) -> Result<Rate> {
        let bits = (mbps * symbol.as_nanos() as f64 / 1000.0).round();
        if bits.is_nan() || bits < 1.0 {
            return Err(Error::NonPositive("rate"));
        }
        Ok(Rate {
            bits_per_symbol: bits as u64,
            symbol,
        })
    }

    pub fn bps(&self) -> f64 {
        self.bits_per_symbol as f64 / self.symbol.as_secs_f64()
    }
}

/// HE rate of one RU: `N_sd * N_bpscs * R * n_ss` bits per symbol.
pub fn ofdma_rate(ru_tones: u32, mcs: McsEntry, n_ss: u32, symbol: Duration) -> Result<Rate> {
    if n_ss == 0 {
        return Err(Error::NonPositive("n_ss"));
    }
    let n_sd = data_subcarriers(ru_tones)? as u64;
    let coded = n_sd * mcs.bits_per_subcarrier as u64 * n_ss as u64;
    Ok(Rate {
        bits_per_symbol: coded * mcs.rate_num as u64 / mcs.rate_den as u64,
        symbol,
    })
}

/// Nominal HE rate of one RU in bits per second.
pub fn ofdma_rate_bps(ru_tones: u32, mcs: McsEntry, n_ss: u32, symbol: Duration) -> Result<f64> {
    if n_ss == 0 {
        return Err(Error::NonPositive("n_ss"));
    }
    let n_sd = data_subcarriers(ru_tones)? as f64;
    Ok(
        n_sd * mcs.bits_per_subcarrier as f64 * mcs.coding_rate() * n_ss as f64
            / symbol.as_secs_f64(),
    )
}

/// Preamble plus the payload rounded up to whole symbols.
pub fn frame_airtime(payload_bytes: u64, rate: Rate, preamble: Duration) -> Duration {
    let bits = payload_bytes * 8;
    let symbols = bits.div_ceil(rate.bits_per_symbol);
    preamble + rate.symbol * symbols as u32
}

/// Largest payload whose airtime fits in `budget`; zero when even the
/// preamble does not fit.
pub fn max_payload_bytes(budget: Duration, rate: Rate, preamble: Duration) -> u64 {
    let Some(body) = budget.checked_sub(preamble) else {
        return 0;
    };
    let symbols = (body.as_nanos() / rate.symbol.as_nanos()) as u64;
    symbols * rate.bits_per_symbol / 8
}

/// CSI report size in bytes:
/// `ceil(1.5 Ntx Nrx) + Ntx Nrx Nb Nsc / 4 + 2 Nrx`, with a fractional
/// middle term rounded up to a whole byte.
pub fn csi_size_bytes(n_tx: u32, n_rx: u32, n_b: u32, n_sc: u32) -> Result<u64> {
    if n_tx == 0 || n_rx == 0 || n_b == 0 || n_sc == 0 {
        return Err(Error::NonPositive("CSI size arguments"));
    }
    let (tx, rx, nb, nsc) = (n_tx as u64, n_rx as u64, n_b as u64, n_sc as u64);
    let header = (3 * tx * rx).div_ceil(2);
    let body = (tx * rx * nb * nsc).div_ceil(4);
    Ok(header + body + 2 * rx)
}

/// HE-LTF symbols needed to sound `streams` spatial streams.
pub fn ltf_count(streams: u32) -> u32 {
    match streams {
        0 | 1 => 1,
        2 => 2,
        3..=4 => 4,
        5..=6 => 6,
        _ => 8,
    }
}

/// Byte layout and PHY timing of the sensing and control frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSizeModel {
    /// Frame control, duration, RA, TA, dialog token and FCS.
    pub ndpa_base_bytes: u32,
    pub ndpa_per_sta_info_bytes: u32,
    pub legacy_preamble_us: f64,
    /// RL-SIG, HE-SIG-A and HE-STF.
    pub he_preamble_base_us: f64,
    pub he_ltf_us_per_stream: f64,
    /// Rate of NDPA, trigger and block-ack frames.
    pub control_rate_mbps: f64,
    pub legacy_symbol_us: f64,
    /// HE data symbol: 12.8 µs plus 0.8 µs guard interval.
    pub symbol_duration_us: f64,
    pub block_ack_bytes: u32,
}

impl Default for FrameSizeModel {
    fn default() -> Self {
        FrameSizeModel {
            ndpa_base_bytes: 21,
            ndpa_per_sta_info_bytes: 4,
            legacy_preamble_us: 20.0,
            he_preamble_base_us: 16.0,
            he_ltf_us_per_stream: 8.0,
            control_rate_mbps: 24.0,
            legacy_symbol_us: 4.0,
            symbol_duration_us: 13.6,
            block_ack_bytes: 32,
        }
    }
}

impl FrameSizeModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ndpa_base_bytes", self.ndpa_base_bytes as f64),
            (
                "ndpa_per_sta_info_bytes",
                self.ndpa_per_sta_info_bytes as f64,
            ),
            ("legacy_preamble_us", self.legacy_preamble_us),
            ("he_preamble_base_us", self.he_preamble_base_us),
            ("he_ltf_us_per_stream", self.he_ltf_us_per_stream),
            ("control_rate_mbps", self.control_rate_mbps),
            ("legacy_symbol_us", self.legacy_symbol_us),
            ("symbol_duration_us", self.symbol_duration_us),
            ("block_ack_bytes", self.block_ack_bytes as f64),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositive(name));
            }
        }
        self.control_rate()?;
        Ok(())
    }

    pub fn legacy_preamble(&self) -> Duration {
        micros_f64(self.legacy_preamble_us)
    }

    pub fn symbol(&self) -> Duration {
        micros_f64(self.symbol_duration_us)
    }

    pub fn control_rate(&self) -> Result<Rate> {
        Rate::legacy(self.control_rate_mbps, micros_f64(self.legacy_symbol_us))
    }

    /// Legacy + HE preamble with enough LTFs for `streams`.
    pub fn he_preamble(&self, streams: u32) -> Duration {
        micros_f64(
            self.legacy_preamble_us
                + self.he_preamble_base_us
                + ltf_count(streams) as f64 * self.he_ltf_us_per_stream,
        )
    }

    pub fn ndpa_bytes(&self, stas: u32) -> u64 {
        self.ndpa_base_bytes as u64 + stas as u64 * self.ndpa_per_sta_info_bytes as u64
    }

    fn control_airtime(&self, bytes: u64) -> Result<Duration> {
        Ok(frame_airtime(
            bytes,
            self.control_rate()?,
            self.legacy_preamble(),
        ))
    }

    pub fn ndpa_airtime(&self, stas: u32) -> Result<Duration> {
        if stas == 0 {
            return Err(Error::NonPositive("stations in an NDPA"));
        }
        self.control_airtime(self.ndpa_bytes(stas))
    }

    /// NDP: preamble and LTFs only, no data field.
    pub fn ndp_airtime(&self, total_streams: u32) -> Result<Duration> {
        if total_streams == 0 {
            return Err(Error::NonPositive("sounded streams"));
        }
        Ok(self.he_preamble(total_streams))
    }

    /// Report trigger, sized like a bare NDPA.
    pub fn trigger_airtime(&self) -> Result<Duration> {
        self.control_airtime(self.ndpa_base_bytes as u64)
    }

    pub fn block_ack_airtime(&self) -> Result<Duration> {
        self.control_airtime(self.block_ack_bytes as u64)
    }

    /// One responder's CSI report on its RU.
    pub fn report_airtime(
        &self,
        report_bytes: u64,
        ru_tones: u32,
        mcs: McsEntry,
        n_ss: u32,
    ) -> Result<Duration> {
        let rate = ofdma_rate(ru_tones, mcs, n_ss, self.symbol())?;
        Ok(frame_airtime(report_bytes, rate, self.he_preamble(n_ss)))
    }
}

/// Airtime of one OFDMA reporting exchange: all responders send in
/// parallel, so the medium is held for the longest report.
pub fn ofdma_exchange_airtime(
    model: &FrameSizeModel,
    reports: &[(u64, u32)],
    mcs: McsEntry,
    n_ss: u32,
) -> Result<Duration> {
    let mut longest = Duration::ZERO;
    for &(bytes, ru) in reports {
        longest = longest.max(model.report_airtime(bytes, ru, mcs, n_ss)?);
    }
    Ok(longest)
}
