//! SAW scheduling and the trigger-based measurement exchange.
//!
//! Each window carries a fixed demand: for every application, sound the
//! responders and collect one CSI report from each of them over OFDMA. The
//! [`SmeState`] machine turns that demand into frames one TxOP at a time.

use std::fmt;
use std::time::Duration;

use crate::config::{SimParams, SoundingMode};
use crate::error::Result;
use crate::medium::FrameKind;
use crate::phy::{self, frame_airtime, max_payload_bytes, FrameSizeModel, McsEntry, Rate};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SawWindow {
    pub index: u64,
    pub open: Duration,
    pub close: Duration,
}

/// Windows that fully start inside `sim_duration`: `floor(sim / period)`.
pub fn window_count(sim_duration: Duration, period: Duration) -> u64 {
    (sim_duration.as_nanos() / period.as_nanos()) as u64
}

pub fn window_at(index: u64, duration: Duration, period: Duration) -> SawWindow {
    let open = period * index as u32;
    SawWindow {
        index,
        open,
        close: open + duration,
    }
}

/// All windows of a run, produced lazily.
pub fn schedule_windows(params: &SimParams) -> Result<impl Iterator<Item = SawWindow>> {
    let duration = params.saw_duration()?;
    let period = params.saw_period()?;
    let n = window_count(params.sim_duration, period);
    Ok((0..n).map(move |i| window_at(i, duration, period)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SoundingRound {
    /// Responders listed in the NDPA.
    pub stas: u32,
    /// Spatial streams carried by the NDP.
    pub streams: u32,
}

/// What one window asks for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensingDemand {
    pub num_app: u32,
    pub n_sta: u32,
    /// CSI report size of one responder for one application.
    pub report_bytes: u64,
    /// Sounding rounds run before each application's report exchange.
    pub rounds: Vec<SoundingRound>,
    pub ru_tones: u32,
}

impl SensingDemand {
    pub fn from_params(p: &SimParams) -> Result<Self> {
        let report_bytes = phy::csi_size_bytes(p.stra.tx, p.stra.rx, p.n_b, p.n_sc)?;
        let rounds = match p.sounding {
            SoundingMode::Broadcast => vec![SoundingRound {
                stas: p.n_sta,
                streams: p.stra.tx,
            }],
            SoundingMode::Batched => {
                let per_round = p.stas_per_sounding_round().max(1);
                let mut left = p.n_sta;
                let mut rounds = Vec::new();
                while left > 0 {
                    let stas = left.min(per_round);
                    rounds.push(SoundingRound {
                        stas,
                        streams: (stas * p.stra.tx).min(p.ap_antennas),
                    });
                    left -= stas;
                }
                rounds
            }
        };
        Ok(SensingDemand {
            num_app: p.num_app,
            n_sta: p.n_sta,
            report_bytes,
            rounds,
            ru_tones: p.ru_tones()?,
        })
    }

    pub fn required_bytes(&self) -> u64 {
        self.num_app as u64 * self.n_sta as u64 * self.report_bytes
    }

    pub fn required_rounds(&self) -> u32 {
        self.num_app * self.rounds.len() as u32
    }
}

/// Precomputed airtimes of the exchange's building blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingTiming {
    pub sifs: Duration,
    /// `(NDPA, NDP)` airtime per sounding round.
    pub rounds: Vec<(Duration, Duration)>,
    pub trigger: Duration,
    pub report_rate: Rate,
    pub report_preamble: Duration,
}

impl SensingTiming {
    pub fn new(p: &SimParams, demand: &SensingDemand) -> Result<Self> {
        let f = &p.frames;
        let rounds = demand
            .rounds
            .iter()
            .map(|r| Ok((f.ndpa_airtime(r.stas)?, f.ndp_airtime(r.streams)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SensingTiming {
            sifs: p.time_units.sifs,
            rounds,
            trigger: f.trigger_airtime()?,
            report_rate: phy::ofdma_rate(
                demand.ru_tones,
                phy::mcs(p.mcs_index)?,
                p.report_nss,
                f.symbol(),
            )?,
            report_preamble: f.he_preamble(p.report_nss),
        })
    }

    pub fn report_airtime(&self, bytes: u64) -> Duration {
        frame_airtime(bytes, self.report_rate, self.report_preamble)
    }

    pub fn sounding_airtime(&self, round: usize) -> Duration {
        let (ndpa, ndp) = self.rounds[round];
        ndpa + self.sifs + ndp
    }

    /// Medium time of one uninterrupted application exchange.
    pub fn app_airtime(&self, report_bytes: u64) -> Duration {
        let sounding: Duration = (0..self.rounds.len())
            .map(|r| self.sounding_airtime(r) + self.sifs)
            .sum();
        sounding + self.trigger + self.sifs + self.report_airtime(report_bytes)
    }

    /// Medium time of a window's whole demand sent back to back.
    pub fn demand_airtime(&self, demand: &SensingDemand) -> Duration {
        if demand.num_app == 0 {
            return Duration::ZERO;
        }
        self.app_airtime(demand.report_bytes) * demand.num_app + self.sifs * (demand.num_app - 1)
    }
}

/// Largest report, in bytes, that fits in `remaining` on the given RU,
/// capped at the full report.
pub fn send_partial_report(
    remaining: Duration,
    full_report_bytes: u64,
    ru_tones: u32,
    mcs: McsEntry,
    n_ss: u32,
    model: &FrameSizeModel,
) -> Result<u64> {
    let rate = phy::ofdma_rate(ru_tones, mcs, n_ss, model.symbol())?;
    Ok(max_payload_bytes(remaining, rate, model.he_preamble(n_ss)).min(full_report_bytes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    Complete,
    PartiallyMissed,
    CompletelyMissed,
}

impl Classification {
    pub fn is_missed(self) -> bool {
        self != Classification::Complete
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Complete => "complete",
            Classification::PartiallyMissed => "partial",
            Classification::CompletelyMissed => "missed",
        })
    }
}

pub fn classify_window(
    required_bytes: u64,
    sent_bytes: u64,
    rounds_done: u32,
    rounds_required: u32,
) -> Classification {
    if sent_bytes >= required_bytes && rounds_done >= rounds_required {
        Classification::Complete
    } else if sent_bytes == 0 && rounds_done == 0 {
        Classification::CompletelyMissed
    } else {
        Classification::PartiallyMissed
    }
}

/// Final record of one window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SawWindowLedger {
    pub window_index: u64,
    pub required_bytes: u64,
    pub sent_bytes: u64,
    pub sounding_rounds_done: u32,
    pub classification: Classification,
    /// Window time not lost to data, collisions or contention before the AP
    /// finished with the window.
    pub available_us: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedFrame {
    pub kind: FrameKind,
    pub start: Duration,
    pub end: Duration,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TxopPlan {
    pub frames: Vec<PlannedFrame>,
    /// When the AP releases the medium; equals the start for an empty plan.
    pub end: Duration,
}

impl TxopPlan {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Progress through one window's demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmeState {
    app: u32,
    round: usize,
    in_report: bool,
    /// Bytes each responder still owes for the current application.
    remaining: u64,
    pub sent_bytes: u64,
    pub rounds_done: u32,
    done: bool,
}

impl SmeState {
    pub fn new(demand: &SensingDemand) -> Self {
        SmeState {
            app: 0,
            round: 0,
            in_report: demand.rounds.is_empty(),
            remaining: demand.report_bytes,
            sent_bytes: 0,
            rounds_done: 0,
            done: demand.num_app == 0,
        }
    }

    /// No further sensing this window, either complete or abandoned.
    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_complete(&self, demand: &SensingDemand) -> bool {
        self.app >= demand.num_app
    }

    pub fn abandon(&mut self) {
        self.done = true;
    }

    pub fn classify(&self, demand: &SensingDemand) -> Classification {
        classify_window(
            demand.required_bytes(),
            self.sent_bytes,
            self.rounds_done,
            demand.required_rounds(),
        )
    }

    /// Lays out the exchanges of a TxOP starting at `start`.
    ///
    /// Sounding exchanges are never split. A report exchange that does not
    /// fit is deferred to the next TxOP, unless the window close is the
    /// binding limit or the report could not fit in any TxOP, in which case
    /// the responders send as much as fits.
    pub fn plan_txop(
        &mut self,
        demand: &SensingDemand,
        timing: &SensingTiming,
        start: Duration,
        txop_limit: Duration,
        close: Duration,
    ) -> TxopPlan {
        let txop_end = start + txop_limit;
        let limit = txop_end.min(close);
        let sifs = timing.sifs;
        let n_sta = demand.n_sta as u64;
        let mut frames = Vec::new();
        let mut cursor = start;

        while !self.done {
            if self.app >= demand.num_app {
                self.done = true;
                break;
            }
            let first = frames.is_empty();
            let begin = if first { cursor } else { cursor + sifs };

            if !self.in_report {
                let (ndpa, ndp) = timing.rounds[self.round];
                let end = begin + ndpa + sifs + ndp;
                if end > close {
                    self.done = true;
                    break;
                }
                if end > txop_end {
                    // A fresh TxOP cannot do better.
                    self.done |= first;
                    break;
                }
                frames.push(PlannedFrame {
                    kind: FrameKind::Ndpa,
                    start: begin,
                    end: begin + ndpa,
                    bytes: 0,
                });
                frames.push(PlannedFrame {
                    kind: FrameKind::Ndp,
                    start: end - ndp,
                    end,
                    bytes: 0,
                });
                cursor = end;
                self.rounds_done += 1;
                self.round += 1;
                if self.round == timing.rounds.len() {
                    self.in_report = true;
                    self.remaining = demand.report_bytes;
                }
                continue;
            }

            let report_start = begin + timing.trigger + sifs;
            let full = timing.report_airtime(self.remaining);
            if report_start + full <= limit {
                self.push_report(&mut frames, timing, begin, self.remaining, n_sta);
                cursor = frames.last().map_or(cursor, |f| f.end);
                self.next_app(demand);
                continue;
            }

            let close_binding = close <= txop_end;
            let oversize = timing.trigger + sifs + full > txop_limit;
            if !close_binding && !oversize {
                self.done |= first;
                break;
            }
            let bytes = match limit.checked_sub(report_start) {
                Some(budget) => {
                    max_payload_bytes(budget, timing.report_rate, timing.report_preamble)
                        .min(self.remaining)
                }
                None => 0,
            };
            if bytes > 0 {
                self.push_report(&mut frames, timing, begin, bytes, n_sta);
                cursor = frames.last().map_or(cursor, |f| f.end);
                self.remaining -= bytes;
            }
            if close_binding || bytes == 0 {
                self.done = true;
            }
            break;
        }

        TxopPlan {
            frames,
            end: cursor,
        }
    }

    fn push_report(
        &mut self,
        frames: &mut Vec<PlannedFrame>,
        timing: &SensingTiming,
        begin: Duration,
        bytes: u64,
        n_sta: u64,
    ) {
        let trig_end = begin + timing.trigger;
        let start = trig_end + timing.sifs;
        frames.push(PlannedFrame {
            kind: FrameKind::ReportTrigger,
            start: begin,
            end: trig_end,
            bytes: 0,
        });
        frames.push(PlannedFrame {
            kind: FrameKind::CsiReport,
            start,
            end: start + timing.report_airtime(bytes),
            bytes: bytes * n_sta,
        });
        self.sent_bytes += bytes * n_sta;
    }

    fn next_app(&mut self, demand: &SensingDemand) {
        self.app += 1;
        self.round = 0;
        self.in_report = demand.rounds.is_empty();
        self.remaining = demand.report_bytes;
        if self.app >= demand.num_app {
            self.done = true;
        }
    }
}
