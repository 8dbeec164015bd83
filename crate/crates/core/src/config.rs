//! Experiment parameters, lookup tables and unit conversions.
//!
//! Everything here is immutable once a run starts. [`SimParams`] carries the
//! full description of one experiment point; the free functions implement the
//! small lookup tables (RU size per STA count, SAW code scaling) that the rest
//! of the crate is built on.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::FrameSizeModel;

/// 802.11 time unit.
pub const TU: Duration = Duration::from_micros(1024);
/// One unit of the SAW duration code.
pub const SAW_DURATION_UNIT: Duration = Duration::from_micros(100);
/// One unit of the SAW period code (100 TU).
pub const SAW_PERIOD_UNIT: Duration = Duration::from_micros(100 * 1024);
/// Largest STA count with an RU allocation.
pub const MAX_STA: u32 = 16;
/// Usable tones in an 80 MHz channel.
pub const MAX_SUBCARRIERS_80MHZ: u32 = 996;
pub const MAX_SAW_DURATION_CODE: u32 = 127;

/// Converts a (possibly fractional) microsecond value to a `Duration`,
/// rounding to the nearest nanosecond.
pub fn micros_f64(us: f64) -> Duration {
    Duration::from_nanos((us * 1000.0).round() as u64)
}

/// Duration in microseconds as `f64`.
pub fn as_micros_f64(d: Duration) -> f64 {
    d.as_nanos() as f64 / 1000.0
}

/// RU size in tones allocated to each STA for the OFDMA reporting phase.
pub fn ru_tones_per_sta(n_sta: u32) -> Result<u32> {
    match n_sta {
        1 => Ok(996),
        2 => Ok(484),
        3..=4 => Ok(242),
        5..=9 => Ok(106),
        10..=16 => Ok(52),
        _ => Err(Error::StaCount(n_sta)),
    }
}

/// SAW duration for a duration code (1 unit = 100 µs).
pub fn saw_duration(code: u32) -> Result<Duration> {
    if !(1..=MAX_SAW_DURATION_CODE).contains(&code) {
        return Err(Error::SawDurationCode(code));
    }
    Ok(SAW_DURATION_UNIT * code)
}

/// SAW period for a period code (1 unit = 100 TU).
pub fn saw_period(code: u32) -> Result<Duration> {
    if code == 0 {
        return Err(Error::SawPeriodCode(code));
    }
    Ok(SAW_PERIOD_UNIT * code)
}

/// Number of responders the AP can sound at once with disjoint antenna subsets.
pub fn stas_per_sounding_round(ap_antennas: u32, stra: SensingAntennaConfig) -> u32 {
    ap_antennas / stra.tx
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AccessMethod {
    /// The AP contends for each sensing TxOP like any other station.
    Edca,
    /// The AP takes the medium after PIFS, ahead of EDCA contenders.
    Pifs,
    NoSensing,
}

impl AccessMethod {
    pub fn senses(self) -> bool {
        !matches!(self, AccessMethod::NoSensing)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccessMethod::Edca => "edca",
            AccessMethod::Pifs => "pifs",
            AccessMethod::NoSensing => "none",
        }
    }
}

impl fmt::Display for AccessMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccessMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edca" => Ok(AccessMethod::Edca),
            "pifs" => Ok(AccessMethod::Pifs),
            "none" | "nosensing" | "no-sensing" => Ok(AccessMethod::NoSensing),
            other => Err(Error::invalid(
                "access",
                format!("unknown access method `{other}`"),
            )),
        }
    }
}

/// Sensing transmitter/receiver antenna configuration, written `TxxRx`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SensingAntennaConfig {
    /// AP antennas used per responder (N_tx).
    pub tx: u32,
    /// STA antennas used (N_rx).
    pub rx: u32,
}

impl SensingAntennaConfig {
    pub fn new(tx: u32, rx: u32) -> Result<Self> {
        if !matches!(tx, 1 | 2 | 4 | 8) {
            return Err(Error::invalid(
                "stra",
                format!("tx antennas must be 1, 2, 4 or 8, got {tx}"),
            ));
        }
        if !matches!(rx, 1 | 2) {
            return Err(Error::invalid(
                "stra",
                format!("rx antennas must be 1 or 2, got {rx}"),
            ));
        }
        Ok(SensingAntennaConfig { tx, rx })
    }
}

impl fmt::Display for SensingAntennaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.tx, self.rx)
    }
}

impl FromStr for SensingAntennaConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("stra", format!("expected `TxxRx` such as 2x2, got `{s}`"));
        let (tx, rx) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let tx = tx.parse().map_err(|_| bad())?;
        let rx = rx.parse().map_err(|_| bad())?;
        SensingAntennaConfig::new(tx, rx)
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl From<$t> for String {
            fn from(v: $t) -> String {
                v.to_string()
            }
        }

        impl TryFrom<String> for $t {
            type Error = Error;

            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }
    };
}

string_serde!(AccessMethod);
string_serde!(SensingAntennaConfig);

/// MAC interframe spacings. PIFS and DIFS are derived, so the
/// `PIFS = SIFS + slot` and `DIFS = SIFS + 2 slot` identities always hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeUnits {
    pub sifs: Duration,
    pub slot: Duration,
}

impl TimeUnits {
    pub const TU: Duration = TU;
    pub const SAW_CODE: Duration = SAW_DURATION_UNIT;

    pub fn pifs(&self) -> Duration {
        self.sifs + self.slot
    }

    pub fn difs(&self) -> Duration {
        self.sifs + 2 * self.slot
    }
}

impl Default for TimeUnits {
    fn default() -> Self {
        TimeUnits {
            sifs: Duration::from_micros(16),
            slot: Duration::from_micros(9),
        }
    }
}

/// EDCA access-category parameters (best effort by default).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdcaParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub aifsn: u32,
    /// Retransmissions before a frame is dropped and the window resets.
    pub retry_limit: u32,
}

impl EdcaParams {
    pub fn aifs(&self, units: &TimeUnits) -> Duration {
        units.sifs + self.aifsn * units.slot
    }
}

impl Default for EdcaParams {
    fn default() -> Self {
        EdcaParams {
            cw_min: 15,
            cw_max: 1023,
            aifsn: 3,
            retry_limit: 7,
        }
    }
}

/// How responders are sounded within one application's exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SoundingMode {
    /// One NDPA listing every responder, then one NDP of `stra.tx` streams.
    Broadcast,
    /// `ceil(n_sta / stas_per_sounding_round)` NDPA+NDP pairs, each
    /// addressing one batch of responders on disjoint AP antenna subsets.
    Batched,
}

impl FromStr for SoundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "broadcast" => Ok(SoundingMode::Broadcast),
            "batched" => Ok(SoundingMode::Batched),
            other => Err(Error::invalid(
                "sounding",
                format!("unknown sounding mode `{other}`"),
            )),
        }
    }
}

/// Full description of one experiment point.
#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub n_sta: u32,
    pub num_app: u32,
    pub stra: SensingAntennaConfig,
    pub saw_duration_code: u32,
    pub saw_period_code: u32,
    pub access: AccessMethod,
    pub txop_limit: Duration,
    pub ap_antennas: u32,
    pub sta_antennas: u32,
    pub bandwidth_mhz: u32,
    pub mcs_index: u32,
    /// CSI quantization bits.
    pub n_b: u32,
    /// Subcarriers reported in CSI.
    pub n_sc: u32,
    /// Subcarrier grouping.
    pub n_g: u32,
    pub ampdu_packets: u32,
    pub packet_bytes: u32,
    pub sim_duration: Duration,
    pub rng_seed: u64,

    pub time_units: TimeUnits,
    pub edca: EdcaParams,
    pub frames: FrameSizeModel,
    pub sounding: SoundingMode,
    /// Spatial streams used by each responder for its CSI report.
    pub report_nss: u32,
    /// A-MPDU + block-ack cycles per data TxOP; 0 packs up to the TxOP limit.
    pub ampdus_per_txop: u32,
    /// In PIFS mode, STAs do not start an exchange that would overlap the
    /// next window opening and hold their countdown while the AP senses.
    pub pifs_window_protection: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            n_sta: 4,
            num_app: 4,
            stra: SensingAntennaConfig { tx: 2, rx: 2 },
            saw_duration_code: 127,
            saw_period_code: 1,
            access: AccessMethod::Pifs,
            txop_limit: Duration::from_micros(5484),
            ap_antennas: 8,
            sta_antennas: 2,
            bandwidth_mhz: 80,
            mcs_index: 6,
            n_b: 8,
            n_sc: 250,
            n_g: 4,
            ampdu_packets: 10,
            packet_bytes: 1500,
            sim_duration: Duration::from_secs(100),
            rng_seed: 1,
            time_units: TimeUnits::default(),
            edca: EdcaParams::default(),
            frames: FrameSizeModel::default(),
            sounding: SoundingMode::Broadcast,
            report_nss: 1,
            ampdus_per_txop: 1,
            pifs_window_protection: true,
        }
    }
}

impl SimParams {
    pub fn saw_duration(&self) -> Result<Duration> {
        saw_duration(self.saw_duration_code)
    }

    pub fn saw_period(&self) -> Result<Duration> {
        saw_period(self.saw_period_code)
    }

    pub fn ru_tones(&self) -> Result<u32> {
        ru_tones_per_sta(self.n_sta)
    }

    pub fn stas_per_sounding_round(&self) -> u32 {
        stas_per_sounding_round(self.ap_antennas, self.stra)
    }

    pub fn aifs(&self) -> Duration {
        self.edca.aifs(&self.time_units)
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        ru_tones_per_sta(self.n_sta)?;
        if !(1..=8).contains(&self.num_app) {
            return Err(Error::invalid(
                "num_app",
                format!("must be in 1..=8, got {}", self.num_app),
            ));
        }
        SensingAntennaConfig::new(self.stra.tx, self.stra.rx)?;
        let duration = self.saw_duration()?;
        let period = self.saw_period()?;
        if duration > period {
            return Err(Error::invalid(
                "saw_duration",
                "window does not fit inside its period",
            ));
        }
        if self.stra.tx > self.ap_antennas {
            return Err(Error::invalid("stra", "tx antennas exceed AP antennas"));
        }
        if self.stra.rx > self.sta_antennas {
            return Err(Error::invalid("stra", "rx antennas exceed STA antennas"));
        }
        if self.bandwidth_mhz != 80 {
            return Err(Error::invalid(
                "bandwidth_mhz",
                "only 80 MHz channels are modeled",
            ));
        }
        if self.mcs_index > 11 {
            return Err(Error::UnknownMcs(self.mcs_index));
        }
        if self.n_b == 0 || self.n_sc == 0 || self.n_g == 0 {
            return Err(Error::NonPositive("n_b, n_sc and n_g"));
        }
        // Grouped tone indices include both band edges, hence the +1.
        let max_sc = MAX_SUBCARRIERS_80MHZ.div_ceil(self.n_g) + 1;
        if self.n_sc > max_sc {
            return Err(Error::invalid(
                "n_sc",
                format!("at most {max_sc} with n_g = {}", self.n_g),
            ));
        }
        if self.ampdu_packets == 0 || self.packet_bytes == 0 {
            return Err(Error::NonPositive("ampdu_packets and packet_bytes"));
        }
        if self.txop_limit.is_zero() {
            return Err(Error::NonPositive("txop_limit"));
        }
        if self.sim_duration.is_zero() {
            return Err(Error::NonPositive("sim_duration"));
        }
        if self.report_nss == 0 || self.report_nss > self.sta_antennas {
            return Err(Error::invalid("report_nss", "must be in 1..=sta_antennas"));
        }
        if self.edca.cw_min > self.edca.cw_max {
            return Err(Error::invalid("cw_min", "exceeds cw_max"));
        }
        if self.time_units.slot.is_zero() {
            return Err(Error::NonPositive("slot"));
        }
        if self.aifs() <= self.time_units.pifs() {
            return Err(Error::invalid("aifsn", "AIFS must be longer than PIFS"));
        }
        self.frames.validate()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(name: &'static str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::invalid(name, format!("cannot parse `{v}`")))
        }
        fn flag(name: &'static str, v: &str) -> Result<bool> {
            match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(Error::invalid(
                    name,
                    format!("expected a boolean, got `{v}`"),
                )),
            }
        }
        let v = value.trim();
        match key.trim() {
            "n_sta" | "nsta" => self.n_sta = num("n_sta", v)?,
            "num_app" | "numapp" => self.num_app = num("num_app", v)?,
            "stra" => self.stra = v.parse()?,
            "saw_duration" | "saw_duration_code" => {
                self.saw_duration_code = num("saw_duration", v)?
            }
            "saw_period" | "saw_period_code" => self.saw_period_code = num("saw_period", v)?,
            "access" => self.access = v.parse()?,
            "txop_limit_us" => self.txop_limit = micros_f64(num("txop_limit_us", v)?),
            "ap_antennas" => self.ap_antennas = num("ap_antennas", v)?,
            "sta_antennas" => self.sta_antennas = num("sta_antennas", v)?,
            "bandwidth_mhz" => self.bandwidth_mhz = num("bandwidth_mhz", v)?,
            "mcs" | "mcs_index" => self.mcs_index = num("mcs", v)?,
            "n_b" => self.n_b = num("n_b", v)?,
            "n_sc" => self.n_sc = num("n_sc", v)?,
            "n_g" => self.n_g = num("n_g", v)?,
            "ampdu_packets" => self.ampdu_packets = num("ampdu_packets", v)?,
            "packet_bytes" => self.packet_bytes = num("packet_bytes", v)?,
            "duration_s" | "sim_duration_s" => {
                let secs: f64 = num("duration_s", v)?;
                if !(secs.is_finite() && secs > 0.0) {
                    return Err(Error::NonPositive("duration_s"));
                }
                self.sim_duration = Duration::from_secs_f64(secs);
            }
            "seed" | "rng_seed" => self.rng_seed = num("seed", v)?,
            "sifs_us" => self.time_units.sifs = micros_f64(num("sifs_us", v)?),
            "slot_us" => self.time_units.slot = micros_f64(num("slot_us", v)?),
            "cw_min" => self.edca.cw_min = num("cw_min", v)?,
            "cw_max" => self.edca.cw_max = num("cw_max", v)?,
            "aifsn" => self.edca.aifsn = num("aifsn", v)?,
            "retry_limit" => self.edca.retry_limit = num("retry_limit", v)?,
            "ndpa_base_bytes" => self.frames.ndpa_base_bytes = num("ndpa_base_bytes", v)?,
            "ndpa_per_sta_info_bytes" => {
                self.frames.ndpa_per_sta_info_bytes = num("ndpa_per_sta_info_bytes", v)?
            }
            "legacy_preamble_us" => self.frames.legacy_preamble_us = num("legacy_preamble_us", v)?,
            "he_preamble_base_us" => {
                self.frames.he_preamble_base_us = num("he_preamble_base_us", v)?
            }
            "he_ltf_us" | "he_ltf_us_per_stream" => {
                self.frames.he_ltf_us_per_stream = num("he_ltf_us", v)?
            }
            "control_rate_mbps" => self.frames.control_rate_mbps = num("control_rate_mbps", v)?,
            "legacy_symbol_us" => self.frames.legacy_symbol_us = num("legacy_symbol_us", v)?,
            "symbol_duration_us" => self.frames.symbol_duration_us = num("symbol_duration_us", v)?,
            "block_ack_bytes" => self.frames.block_ack_bytes = num("block_ack_bytes", v)?,
            "report_nss" => self.report_nss = num("report_nss", v)?,
            "ampdus_per_txop" => self.ampdus_per_txop = num("ampdus_per_txop", v)?,
            "sounding" => self.sounding = v.parse()?,
            "pifs_window_protection" => {
                self.pifs_window_protection = flag("pifs_window_protection", v)?
            }
            other => {
                return Err(Error::InvalidParam {
                    name: "key",
                    reason: format!("unknown parameter `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; later keys override earlier ones.
    pub fn apply_param_file(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ParamFile {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key, value).map_err(|e| Error::ParamFile {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }
}
