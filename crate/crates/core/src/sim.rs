//! The discrete-event engine.
//!
//! Station 0 is the AP; STAs are `1..=n_sta`. Every STA is saturated and
//! contends with EDCA. The AP only transmits inside SAW windows, through
//! EDCA or after PIFS depending on the access method.
//!
//! Only events that change medium state are queued: window boundaries,
//! the next access grant and the end of each medium occupation. `FrameEnd`
//! events are added when a trace is requested.

use std::io::{self, Write};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AccessMethod, SimParams};
use crate::error::Result;
use crate::medium::{
    elapsed_slots, Activity, BackoffState, EventDetail, EventKind, EventQueue, Frame, FrameKind,
    TimePartition,
};
use crate::metrics::MetricsAccumulator;
use crate::sensing::{
    self, PlannedFrame, SawWindowLedger, SensingDemand, SensingTiming, SmeState, TxopPlan,
};
use crate::trace::TraceWriter;
use crate::traffic::{fill_data_txop, DataBurst};

pub const AP: u32 = 0;

/// Everything a finished run reports.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub metrics: MetricsAccumulator,
    pub window_count: u64,
    pub data_txops: u64,
    pub sensing_txops: u64,
    pub collisions: u64,
    pub events: u64,
}

impl RunResult {
    pub fn partition(&self) -> &TimePartition {
        &self.metrics.partition
    }

    pub fn ledgers(&self) -> &[SawWindowLedger] {
        &self.metrics.ledgers
    }
}

pub fn simulate(params: &SimParams) -> Result<RunResult> {
    Simulator::new(params)?.run()
}

/// Runs with a trace written to `out`.
pub fn simulate_traced<W: Write>(params: &SimParams, out: W) -> Result<RunResult> {
    Simulator::with_trace(params, out)?.run()
}

#[derive(Clone, Debug)]
struct Contender {
    backoff: BackoffState,
    active: bool,
    /// Countdown reference while the medium is idle: the counter reaches
    /// zero at `counting_from + counter * slot`.
    counting_from: Option<Duration>,
    ready_at: Duration,
}

impl Contender {
    fn access_time(&self, slot: Duration) -> Option<Duration> {
        self.counting_from
            .map(|cf| cf + slot * self.backoff.counter)
    }
}

#[derive(Clone, Debug)]
struct OpenWindow {
    index: u64,
    close: Duration,
    sme: SmeState,
    /// Lost time is accumulated until the demand completes.
    tracking: bool,
    lost: Duration,
}

pub struct Simulator<W: Write> {
    p: SimParams,
    demand: SensingDemand,
    timing: SensingTiming,
    burst: DataBurst,
    data_cycles: u32,
    data_exchange: Duration,
    aifs: Duration,
    pifs: Duration,
    slot: Duration,
    protect: bool,

    queue: EventQueue,
    now: Duration,
    sim_end: Duration,
    contenders: Vec<Contender>,
    busy: bool,
    idle_since: Duration,
    token: u64,
    ap_ready_at: Duration,
    frozen: bool,

    activity: Activity,
    activity_since: Duration,
    partition: TimePartition,

    saw_duration: Duration,
    saw_period: Duration,
    window_total: u64,
    next_window: u64,
    window: Option<OpenWindow>,
    ledgers: Vec<SawWindowLedger>,

    data_bits: u64,
    data_txops: u64,
    sensing_txops: u64,
    collisions: u64,
    events: u64,

    trace: Option<TraceWriter<W>>,
    trace_error: Option<io::Error>,
}

impl Simulator<io::Sink> {
    pub fn new(params: &SimParams) -> Result<Self> {
        Simulator::build(params, None)
    }
}

impl<W: Write> Simulator<W> {
    pub fn with_trace(params: &SimParams, out: W) -> Result<Self> {
        Simulator::build(params, Some(TraceWriter::new(out)?))
    }

    fn build(params: &SimParams, trace: Option<TraceWriter<W>>) -> Result<Self> {
        params.validate()?;
        let p = params.clone();
        let demand = SensingDemand::from_params(&p)?;
        let timing = SensingTiming::new(&p, &demand)?;
        let burst = DataBurst::from_params(&p)?;
        let (_, data_exchange, data_cycles) = fill_data_txop(&burst, p.txop_limit);

        let contenders = (0..=p.n_sta)
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
                rng.set_stream(id as u64);
                Contender {
                    backoff: BackoffState::new(&p.edca, rng),
                    active: id != AP,
                    counting_from: None,
                    ready_at: Duration::ZERO,
                }
            })
            .collect();

        let saw_period = p.saw_period()?;
        let window_total = if p.access.senses() {
            sensing::window_count(p.sim_duration, saw_period)
        } else {
            0
        };

        Ok(Simulator {
            demand,
            timing,
            burst,
            data_cycles,
            data_exchange,
            aifs: p.aifs(),
            pifs: p.time_units.pifs(),
            slot: p.time_units.slot,
            protect: p.access == AccessMethod::Pifs && p.pifs_window_protection,
            queue: EventQueue::new(),
            now: Duration::ZERO,
            sim_end: p.sim_duration,
            contenders,
            busy: false,
            idle_since: Duration::ZERO,
            token: 0,
            ap_ready_at: Duration::ZERO,
            frozen: false,
            activity: Activity::Idle,
            activity_since: Duration::ZERO,
            partition: TimePartition::default(),
            saw_duration: p.saw_duration()?,
            saw_period,
            window_total,
            next_window: 0,
            window: None,
            ledgers: Vec::with_capacity(window_total as usize),
            data_bits: 0,
            data_txops: 0,
            sensing_txops: 0,
            collisions: 0,
            events: 0,
            trace,
            trace_error: None,
            p,
        })
    }
}

impl<W: Write> Simulator<W> {
    pub fn run(mut self) -> Result<RunResult> {
        self.queue
            .push(self.sim_end, EventKind::SimEnd, 0, EventDetail::None);
        if self.window_total > 0 {
            self.queue.push(
                Duration::ZERO,
                EventKind::WindowOpen,
                0,
                EventDetail::Window { index: 0 },
            );
        }
        self.reschedule();

        while let Some(ev) = self.queue.pop() {
            self.advance(ev.time);
            self.now = ev.time;
            self.events += 1;
            match (ev.kind, ev.detail) {
                (EventKind::SimEnd, _) => {
                    self.trace_line(EventKind::SimEnd, 0, String::new);
                    break;
                }
                (EventKind::WindowOpen, EventDetail::Window { index }) => {
                    self.on_window_open(index)
                }
                (EventKind::WindowClose, EventDetail::Window { index }) => {
                    self.on_window_close(index)
                }
                (EventKind::BackoffExpiry, EventDetail::Access { token, .. }) => {
                    if token == self.token {
                        self.on_access();
                    }
                }
                (
                    EventKind::FrameEnd,
                    EventDetail::Frame {
                        frame, collided, ..
                    },
                ) => {
                    if let Some(t) = self.trace.as_mut() {
                        if let Err(e) =
                            t.frame_end(self.now, ev.subject, frame.kind, frame.start, collided)
                        {
                            self.trace_error.get_or_insert(e);
                        }
                    }
                }
                (EventKind::TxopEnd, _) => self.on_txop_end(ev.subject),
                _ => unreachable!("event {:?} with detail {:?}", ev.kind, ev.detail),
            }
        }

        if let Some(t) = self.trace.as_mut() {
            if let Err(e) = t.flush() {
                self.trace_error.get_or_insert(e);
            }
        }
        if let Some(e) = self.trace_error {
            return Err(e.into());
        }

        Ok(RunResult {
            metrics: MetricsAccumulator {
                partition: self.partition,
                data_bits: self.data_bits,
                ledgers: self.ledgers,
                saw_duration: self.saw_duration,
                sim_time: self.sim_end,
            },
            window_count: self.window_total,
            data_txops: self.data_txops,
            sensing_txops: self.sensing_txops,
            collisions: self.collisions,
            events: self.events,
        })
    }

    fn trace_line(&mut self, kind: EventKind, subject: u32, detail: impl FnOnce() -> String) {
        if let Some(t) = self.trace.as_mut() {
            if let Err(e) = t.event(self.now, kind, subject, &detail()) {
                self.trace_error.get_or_insert(e);
            }
        }
    }

    /// Credits the interval since the last event to the current activity.
    fn advance(&mut self, t: Duration) {
        let Some(d) = t.checked_sub(self.activity_since) else {
            return;
        };
        self.partition.add(self.activity, d);
        if let Some(w) = self.window.as_mut() {
            if w.tracking
                && matches!(
                    self.activity,
                    Activity::Data | Activity::Collision | Activity::Contention
                )
            {
                w.lost += d;
            }
        }
        self.activity_since = t;
    }

    fn ap_wants_medium(&self) -> bool {
        self.window.as_ref().is_some_and(|w| !w.sme.is_done())
    }

    fn next_open(&self) -> Option<Duration> {
        (self.next_window < self.window_total).then(|| self.saw_period * self.next_window as u32)
    }

    /// Latest time a STA may start its exchange without running into the
    /// next window, when windows are protected.
    fn sta_cap(&self) -> Option<Duration> {
        if !self.protect {
            return None;
        }
        self.next_open()
            .map(|open| open.saturating_sub(self.data_exchange))
    }

    /// Counts down idle slots of every active contender up to `now`.
    fn settle(&mut self) {
        if self.busy {
            return;
        }
        let cap = self.sta_cap();
        for (id, c) in self.contenders.iter_mut().enumerate() {
            let Some(cf) = c.counting_from else { continue };
            if !c.active {
                continue;
            }
            let until = match cap {
                Some(x) if id as u32 != AP => self.now.min(x),
                _ => self.now,
            };
            let k = elapsed_slots(cf, until, self.slot).min(c.backoff.counter);
            c.backoff.counter -= k;
            c.counting_from = Some(cf + self.slot * k);
        }
    }

    /// Applies the PIFS window protection: STAs hold their countdown while
    /// the AP still has sensing to do.
    fn refresh_freeze(&mut self) {
        let want = self.protect && self.ap_wants_medium();
        if want == self.frozen {
            return;
        }
        self.frozen = want;
        let now = self.now;
        for c in self.contenders.iter_mut().skip(1) {
            c.active = !want;
            c.counting_from = None;
            c.ready_at = now;
        }
    }

    fn pifs_ap_grant(&self) -> Option<Duration> {
        (self.p.access == AccessMethod::Pifs && self.ap_wants_medium())
            .then(|| self.idle_since.max(self.ap_ready_at) + self.pifs)
    }

    /// Invalidates any pending grant and, if the medium is idle, schedules
    /// the next one.
    fn reschedule(&mut self) {
        self.token += 1;
        if self.busy {
            return;
        }
        let cap = self.sta_cap();
        let mut best: Option<Duration> = None;
        for (id, c) in self.contenders.iter_mut().enumerate() {
            if !c.active {
                continue;
            }
            let cf = *c
                .counting_from
                .get_or_insert(self.idle_since.max(c.ready_at) + self.aifs);
            let at = cf + self.slot * c.backoff.counter;
            if id as u32 != AP && cap.is_some_and(|x| at > x) {
                continue;
            }
            best = Some(best.map_or(at, |b| b.min(at)));
        }
        let mut label = if best.is_some() {
            Activity::Contention
        } else {
            Activity::Idle
        };
        if let Some(at) = self.pifs_ap_grant() {
            if best.map_or(true, |b| at <= b) {
                label = Activity::PriorityWait;
                best = Some(at);
            }
        }
        self.activity = label;
        if let Some(at) = best {
            let priority = label == Activity::PriorityWait;
            self.queue.push(
                at,
                EventKind::BackoffExpiry,
                AP,
                EventDetail::Access {
                    token: self.token,
                    priority,
                },
            );
        }
    }

    fn on_window_open(&mut self, index: u64) {
        self.settle();
        let open = self.now;
        let close = open + self.saw_duration;
        let sme = SmeState::new(&self.demand);
        let tracking = !sme.is_complete(&self.demand);
        self.window = Some(OpenWindow {
            index,
            close,
            sme,
            tracking,
            lost: Duration::ZERO,
        });
        self.next_window = index + 1;
        if let Some(next) = self.next_open() {
            self.queue.push(
                next,
                EventKind::WindowOpen,
                0,
                EventDetail::Window { index: index + 1 },
            );
        }
        self.queue.push(
            close,
            EventKind::WindowClose,
            0,
            EventDetail::Window { index },
        );
        self.ap_ready_at = open;
        if self.p.access == AccessMethod::Edca && self.ap_wants_medium() {
            let ap = &mut self.contenders[AP as usize];
            ap.active = true;
            ap.backoff.restart(&self.p.edca);
            ap.counting_from = None;
            ap.ready_at = open;
        }
        self.refresh_freeze();
        self.trace_line(EventKind::WindowOpen, 0, || format!("window={index}"));
        self.reschedule();
    }

    fn on_window_close(&mut self, index: u64) {
        self.settle();
        let w = self.window.take().expect("close without open window");
        debug_assert_eq!(w.index, index);
        let ledger = SawWindowLedger {
            window_index: w.index,
            required_bytes: self.demand.required_bytes(),
            sent_bytes: w.sme.sent_bytes,
            sounding_rounds_done: w.sme.rounds_done,
            classification: w.sme.classify(&self.demand),
            available_us: self.saw_duration.saturating_sub(w.lost),
        };
        self.ledgers.push(ledger);
        let ap = &mut self.contenders[AP as usize];
        ap.active = false;
        ap.counting_from = None;
        self.refresh_freeze();
        self.trace_line(EventKind::WindowClose, 0, || {
            format!(
                "window={index} class={} sent={}",
                ledger.classification, ledger.sent_bytes
            )
        });
        self.reschedule();
    }

    /// Marks the rest of the window as unusable for sensing. Nothing that
    /// happens afterwards counts against the window's available time.
    fn ap_gives_up(&mut self) {
        if let Some(w) = self.window.as_mut() {
            w.sme.abandon();
            w.tracking = false;
        }
        let ap = &mut self.contenders[AP as usize];
        ap.active = false;
        ap.counting_from = None;
        self.refresh_freeze();
    }

    fn plan_for_ap(&self) -> Option<(SmeState, TxopPlan)> {
        let w = self.window.as_ref()?;
        let mut sme = w.sme.clone();
        let plan = sme.plan_txop(
            &self.demand,
            &self.timing,
            self.now,
            self.p.txop_limit,
            w.close,
        );
        Some((sme, plan))
    }

    fn on_access(&mut self) {
        self.settle();
        let now = self.now;
        let cap = self.sta_cap();
        let mut winners: Vec<u32> = Vec::new();
        for (id, c) in self.contenders.iter().enumerate() {
            if !c.active || c.access_time(self.slot) != Some(now) {
                continue;
            }
            if id as u32 != AP && cap.is_some_and(|x| now > x) {
                continue;
            }
            winners.push(id as u32);
        }
        if self.pifs_ap_grant() == Some(now) {
            winners.insert(0, AP);
        }

        let mut ap_plan = None;
        if winners.first() == Some(&AP) {
            match self.plan_for_ap() {
                Some((sme, plan)) if !plan.is_empty() => ap_plan = Some((sme, plan)),
                _ => {
                    winners.remove(0);
                    self.ap_gives_up();
                }
            }
        }
        if winners.is_empty() {
            self.trace_line(EventKind::BackoffExpiry, AP, || "none".to_string());
            self.reschedule();
            return;
        }

        self.busy = true;
        self.token += 1;
        for c in &mut self.contenders {
            c.counting_from = None;
        }

        if winners.len() > 1 {
            self.trace_line(EventKind::BackoffExpiry, winners[0], || {
                let ids: Vec<String> = winners.iter().map(u32::to_string).collect();
                format!("collision={}", ids.join(";"))
            });
            self.start_collision(&winners, ap_plan.as_ref().map(|(_, plan)| plan.frames[0]));
        } else if let Some((sme, plan)) = ap_plan {
            self.trace_line(EventKind::BackoffExpiry, AP, || "sensing".to_string());
            self.start_sensing(sme, plan);
        } else {
            let sta = winners[0];
            self.trace_line(EventKind::BackoffExpiry, sta, || "data".to_string());
            self.start_data(sta);
        }
    }

    fn push_frame(
        &mut self,
        sta: u32,
        kind: FrameKind,
        start: Duration,
        end: Duration,
        bytes: u64,
        collided: bool,
    ) {
        if self.trace.is_none() {
            return;
        }
        let frame = Frame {
            kind,
            start,
            end,
            bytes,
            transmitter: sta,
            ru_tones: if kind == FrameKind::CsiReport {
                self.demand.ru_tones
            } else {
                0
            },
        };
        self.queue.push(
            end,
            EventKind::FrameEnd,
            sta,
            EventDetail::Frame {
                frame,
                collided,
                releases: false,
            },
        );
    }

    fn start_data(&mut self, sta: u32) {
        let b = self.burst;
        let mut start = self.now;
        let mut end = start;
        for i in 0..self.data_cycles {
            if i > 0 {
                start = end + b.sifs;
            }
            let ampdu_end = start + b.ampdu_airtime;
            let ba_start = ampdu_end + b.sifs;
            end = ba_start + b.block_ack_airtime;
            self.push_frame(
                sta,
                FrameKind::Ampdu,
                start,
                ampdu_end,
                b.ampdu_bytes,
                false,
            );
            self.push_frame(
                sta,
                FrameKind::BlockAck,
                ba_start,
                end,
                self.p.frames.block_ack_bytes as u64,
                false,
            );
            if end <= self.sim_end {
                self.data_bits += b.bits_per_cycle();
            }
        }
        self.queue
            .push(end, EventKind::TxopEnd, sta, EventDetail::None);
        self.contenders[sta as usize]
            .backoff
            .on_success(&self.p.edca);
        self.activity = Activity::Data;
        self.data_txops += 1;
    }

    fn start_sensing(&mut self, sme: SmeState, plan: TxopPlan) {
        for f in &plan.frames {
            self.push_frame(AP, f.kind, f.start, f.end, f.bytes, false);
        }
        self.queue
            .push(plan.end, EventKind::TxopEnd, AP, EventDetail::None);
        let w = self.window.as_mut().expect("sensing outside a window");
        w.sme = sme;
        if w.sme.is_done() {
            w.tracking = false;
        }
        let ap = &mut self.contenders[AP as usize];
        if self.p.access == AccessMethod::Edca {
            ap.backoff.on_success(&self.p.edca);
        }
        if !self.ap_wants_medium() {
            let ap = &mut self.contenders[AP as usize];
            ap.active = false;
        }
        self.refresh_freeze();
        self.activity = Activity::Sensing;
        self.sensing_txops += 1;
    }

    fn start_collision(&mut self, winners: &[u32], ap_first: Option<PlannedFrame>) {
        let now = self.now;
        let mut longest = Duration::ZERO;
        for &id in winners {
            let (kind, dur, bytes) = match (id, ap_first) {
                (AP, Some(f)) => (f.kind, f.end - f.start, f.bytes),
                _ => (
                    FrameKind::Ampdu,
                    self.burst.ampdu_airtime,
                    self.burst.ampdu_bytes,
                ),
            };
            longest = longest.max(dur);
            self.push_frame(id, kind, now, now + dur, bytes, true);
            let uses_backoff = id != AP || self.p.access == AccessMethod::Edca;
            if uses_backoff {
                self.contenders[id as usize]
                    .backoff
                    .on_collision(&self.p.edca);
            }
        }
        self.queue.push(
            now + longest,
            EventKind::TxopEnd,
            winners[0],
            EventDetail::None,
        );
        self.activity = Activity::Collision;
        self.collisions += 1;
    }

    fn on_txop_end(&mut self, holder: u32) {
        let label = match self.activity {
            Activity::Data => "data",
            Activity::Sensing => "sensing",
            _ => "collision",
        };
        self.trace_line(EventKind::TxopEnd, holder, || label.to_string());
        self.busy = false;
        self.idle_since = self.now;
        self.ap_ready_at = self.now;
        if self.p.access == AccessMethod::Edca && self.ap_wants_medium() {
            self.contenders[AP as usize].active = true;
        }
        self.refresh_freeze();
        self.reschedule();
    }
}
