//! Shared-medium primitives: the event queue, EDCA backoff state,
//! contention resolution, PIFS grants, TxOP packing and time accounting.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::EdcaParams;

pub type StationId = u32;

/// Event kinds, declared in tiebreak order for equal timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    WindowOpen,
    WindowClose,
    BackoffExpiry,
    FrameEnd,
    TxopEnd,
    SimEnd,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::WindowOpen => "WindowOpen",
            EventKind::WindowClose => "WindowClose",
            EventKind::BackoffExpiry => "BackoffExpiry",
            EventKind::FrameEnd => "FrameEnd",
            EventKind::TxopEnd => "TxopEnd",
            EventKind::SimEnd => "SimEnd",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Ndpa,
    Ndp,
    ReportTrigger,
    CsiReport,
    Ampdu,
    BlockAck,
}

impl FrameKind {
    pub fn is_sensing(self) -> bool {
        !matches!(self, FrameKind::Ampdu | FrameKind::BlockAck)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Ndpa => "NDPA",
            FrameKind::Ndp => "NDP",
            FrameKind::ReportTrigger => "TRIGGER",
            FrameKind::CsiReport => "REPORT",
            FrameKind::Ampdu => "AMPDU",
            FrameKind::BlockAck => "BA",
        }
    }
}

impl std::str::FromStr for FrameKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "NDPA" => FrameKind::Ndpa,
            "NDP" => FrameKind::Ndp,
            "TRIGGER" => FrameKind::ReportTrigger,
            "REPORT" => FrameKind::CsiReport,
            "AMPDU" => FrameKind::Ampdu,
            "BA" => FrameKind::BlockAck,
            _ => return Err(()),
        })
    }
}

/// A scheduled medium occupation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub start: Duration,
    pub end: Duration,
    pub bytes: u64,
    pub transmitter: StationId,
    /// RU tone size for OFDMA reports, 0 for full-band frames.
    pub ru_tones: u32,
}

/// Extra information an event carries for the engine and the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventDetail {
    None,
    /// Access grant for the contention epoch identified by the token.
    Access {
        token: u64,
        priority: bool,
    },
    Frame {
        frame: Frame,
        collided: bool,
        /// The medium becomes idle when this frame ends.
        releases: bool,
    },
    Window {
        index: u64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub time: Duration,
    pub kind: EventKind,
    pub subject: u32,
    pub detail: EventDetail,
    seq: u64,
}

impl Event {
    fn key(&self) -> (Duration, EventKind, u32, u64) {
        (self.time, self.kind, self.subject, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Min-ordered event queue with a deterministic total order:
/// timestamp, then kind, then subject, then insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: Duration, kind: EventKind, subject: u32, detail: EventDetail) {
        self.seq += 1;
        self.heap.push(Reverse(Event {
            time,
            kind,
            subject,
            detail,
            seq: self.seq,
        }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Per-station EDCA state.
#[derive(Clone, Debug)]
pub struct BackoffState {
    pub cw: u32,
    pub counter: u32,
    pub retries: u32,
    rng: ChaCha8Rng,
}

impl BackoffState {
    /// Fresh state with window `cw_min`; the counter is drawn immediately.
    pub fn new(edca: &EdcaParams, rng: ChaCha8Rng) -> Self {
        let mut s = BackoffState {
            cw: edca.cw_min,
            counter: 0,
            retries: 0,
            rng,
        };
        s.counter = s.draw();
        s
    }

    /// Uniform draw in `[0, cw]`.
    pub fn draw(&mut self) -> u32 {
        draw_backoff(self.cw, &mut self.rng)
    }

    pub fn on_success(&mut self, edca: &EdcaParams) {
        self.cw = edca.cw_min;
        self.retries = 0;
        self.counter = self.draw();
    }

    /// Doubles the window (capped), or resets it once the retry limit is hit.
    pub fn on_collision(&mut self, edca: &EdcaParams) {
        self.retries += 1;
        if self.retries > edca.retry_limit {
            self.cw = edca.cw_min;
            self.retries = 0;
        } else {
            self.cw = (2 * self.cw + 1).min(edca.cw_max);
        }
        self.counter = self.draw();
    }

    pub fn restart(&mut self, edca: &EdcaParams) {
        self.on_success(edca);
    }
}

pub fn draw_backoff(cw: u32, rng: &mut ChaCha8Rng) -> u32 {
    rng.gen_range(0..=cw)
}

/// Slot time at which a contender's counter reaches zero, given when its
/// countdown started (the end of its AIFS).
pub fn backoff_expiry(countdown_start: Duration, counter: u32, slot: Duration) -> Duration {
    countdown_start + slot * counter
}

/// Full slots a contender counted down between `countdown_start` and `now`.
pub fn elapsed_slots(countdown_start: Duration, now: Duration, slot: Duration) -> u32 {
    match now.checked_sub(countdown_start) {
        Some(d) => (d.as_nanos() / slot.as_nanos()) as u32,
        None => 0,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContentionOutcome {
    /// No contenders.
    Empty,
    Winner {
        station: usize,
        slots: u32,
    },
    Collision {
        stations: Vec<usize>,
        slots: u32,
    },
}

/// Resolves one contention round among stations whose countdowns started
/// together. Counters of the losers are decremented in place (they freeze at
/// the remaining value); the winners' counters end at zero.
pub fn resolve_contention(counters: &mut [u32]) -> ContentionOutcome {
    let Some(&slots) = counters.iter().min() else {
        return ContentionOutcome::Empty;
    };
    let winners: Vec<usize> = (0..counters.len())
        .filter(|&i| counters[i] == slots)
        .collect();
    for c in counters.iter_mut() {
        *c -= slots;
    }
    match winners.as_slice() {
        [one] => ContentionOutcome::Winner {
            station: *one,
            slots,
        },
        _ => ContentionOutcome::Collision {
            stations: winners,
            slots,
        },
    }
}

/// Time at which a PIFS-access AP gets the medium when it becomes ready at
/// `ready` and the medium is busy until `busy_until`.
pub fn pifs_grab(ready: Duration, busy_until: Duration, pifs: Duration) -> Duration {
    ready.max(busy_until) + pifs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxopRecord {
    /// Exchanges that fit.
    pub sent: usize,
    pub occupied: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("a {exchange:?} exchange cannot fit in a {limit:?} TxOP")]
pub struct Unsendable {
    pub exchange: Duration,
    pub limit: Duration,
}

/// Packs frame exchanges back to back, separated by `gap`, until the next
/// one would cross `limit`.
pub fn hold_txop(
    exchanges: &[Duration],
    gap: Duration,
    limit: Duration,
) -> Result<TxopRecord, Unsendable> {
    if let Some(&first) = exchanges.first() {
        if first > limit {
            return Err(Unsendable {
                exchange: first,
                limit,
            });
        }
    }
    let mut occupied = Duration::ZERO;
    let mut sent = 0;
    for &ex in exchanges {
        let start = if sent == 0 { occupied } else { occupied + gap };
        if start + ex > limit {
            break;
        }
        occupied = start + ex;
        sent += 1;
    }
    Ok(TxopRecord { sent, occupied })
}

/// What the medium is being used for over an interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activity {
    /// Nobody is allowed to transmit.
    Idle,
    /// AIFS and backoff slots.
    Contention,
    /// The AP's PIFS wait before a sensing TxOP.
    PriorityWait,
    Data,
    Sensing,
    Collision,
}

/// Exhaustive partition of simulated time by activity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimePartition {
    pub idle: Duration,
    pub contention: Duration,
    pub priority_wait: Duration,
    pub data: Duration,
    pub sensing: Duration,
    pub collision: Duration,
}

impl TimePartition {
    pub fn add(&mut self, activity: Activity, d: Duration) {
        let slot = match activity {
            Activity::Idle => &mut self.idle,
            Activity::Contention => &mut self.contention,
            Activity::PriorityWait => &mut self.priority_wait,
            Activity::Data => &mut self.data,
            Activity::Sensing => &mut self.sensing,
            Activity::Collision => &mut self.collision,
        };
        *slot += d;
    }

    pub fn total(&self) -> Duration {
        self.idle + self.contention + self.priority_wait + self.data + self.sensing + self.collision
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MediumMode {
    Idle,
    DataTxop,
    SensingTxop,
    Collision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MediumState {
    pub busy_until: Duration,
    pub holder: Option<StationId>,
    pub mode: MediumMode,
}

impl MediumState {
    pub fn idle_at(t: Duration) -> Self {
        MediumState {
            busy_until: t,
            holder: None,
            mode: MediumMode::Idle,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.mode == MediumMode::Idle
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn us(v: u64) -> Duration {
        Duration::from_micros(v)
    }

    #[test]
    fn queue_orders_by_time_then_kind_then_subject() {
        let mut q = EventQueue::new();
        q.push(us(10), EventKind::FrameEnd, 1, EventDetail::None);
        q.push(us(10), EventKind::BackoffExpiry, 2, EventDetail::None);
        q.push(us(10), EventKind::WindowOpen, 9, EventDetail::None);
        q.push(us(10), EventKind::FrameEnd, 0, EventDetail::None);
        q.push(us(5), EventKind::SimEnd, 0, EventDetail::None);
        let order: Vec<_> = std::iter::from_fn(|| q.pop())
            .map(|e| (e.time, e.kind, e.subject))
            .collect();
        assert_eq!(
            order,
            [
                (us(5), EventKind::SimEnd, 0),
                (us(10), EventKind::WindowOpen, 9),
                (us(10), EventKind::BackoffExpiry, 2),
                (us(10), EventKind::FrameEnd, 0),
                (us(10), EventKind::FrameEnd, 1),
            ]
        );
        assert!(q.is_empty());
    }

    #[test]
    fn backoff_draw_range_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            assert!(draw_backoff(15, &mut rng) <= 15);
        }
        assert_eq!(draw_backoff(0, &mut rng), 0);

        let seq = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..32)
                .map(|_| draw_backoff(1023, &mut r))
                .collect::<Vec<_>>()
        };
        assert_eq!(seq(42), seq(42));
        assert_ne!(seq(42), seq(43));
    }

    #[test]
    fn contention_single_winner_and_freeze() {
        let mut c = [3];
        assert_eq!(
            resolve_contention(&mut c),
            ContentionOutcome::Winner {
                station: 0,
                slots: 3
            }
        );

        let mut c = [1, 4];
        assert_eq!(
            resolve_contention(&mut c),
            ContentionOutcome::Winner {
                station: 0,
                slots: 1
            }
        );
        assert_eq!(c[1], 3);

        let mut c = [2, 2];
        assert_eq!(
            resolve_contention(&mut c),
            ContentionOutcome::Collision {
                stations: vec![0, 1],
                slots: 2
            }
        );
        assert_eq!(resolve_contention(&mut []), ContentionOutcome::Empty);
    }

    #[test]
    fn collision_doubles_window_up_to_cap() {
        let edca = EdcaParams {
            retry_limit: 100,
            ..EdcaParams::default()
        };
        let mut s = BackoffState::new(&edca, ChaCha8Rng::seed_from_u64(1));
        assert_eq!(s.cw, 15);
        s.on_collision(&edca);
        assert_eq!(s.cw, 31);
        for _ in 0..10 {
            s.on_collision(&edca);
        }
        assert_eq!(s.cw, 1023);
        assert!(s.counter <= 1023);
        s.on_success(&edca);
        assert_eq!((s.cw, s.retries), (15, 0));

        let edca = EdcaParams {
            retry_limit: 1,
            ..EdcaParams::default()
        };
        let mut s = BackoffState::new(&edca, ChaCha8Rng::seed_from_u64(1));
        s.on_collision(&edca);
        assert_eq!(s.cw, 31);
        s.on_collision(&edca);
        assert_eq!((s.cw, s.retries), (15, 0));
    }

    #[test]
    fn countdown_arithmetic() {
        let slot = us(9);
        assert_eq!(backoff_expiry(us(100), 3, slot), us(127));
        assert_eq!(elapsed_slots(us(100), us(90), slot), 0);
        assert_eq!(elapsed_slots(us(100), us(117), slot), 1);
        assert_eq!(elapsed_slots(us(100), us(118), slot), 2);
    }

    #[test]
    fn pifs_grab_examples() {
        let pifs = us(25);
        let t = us(1000);
        assert_eq!(pifs_grab(t, us(400), pifs), t + us(25));
        assert_eq!(pifs_grab(t, t + us(300), pifs), t + us(325));
        let first_txop_end = pifs_grab(t, t, pifs) + us(5484);
        assert_eq!(
            pifs_grab(first_txop_end, first_txop_end, pifs),
            first_txop_end + pifs
        );
    }

    #[test]
    fn txop_packing() {
        let limit = us(5484);
        let gap = us(16);
        assert_eq!(
            hold_txop(&[], gap, limit).unwrap(),
            TxopRecord {
                sent: 0,
                occupied: Duration::ZERO
            }
        );
        let r = hold_txop(&[us(2000); 3], gap, limit).unwrap();
        assert_eq!(
            r,
            TxopRecord {
                sent: 2,
                occupied: us(4016)
            }
        );
        assert!(hold_txop(&[us(6000)], gap, limit).is_err());
        let r = hold_txop(&[us(5484)], gap, limit).unwrap();
        assert_eq!(r.occupied, limit);
    }

    #[test]
    fn partition_sums() {
        let mut p = TimePartition::default();
        p.add(Activity::Data, us(10));
        p.add(Activity::Sensing, us(5));
        p.add(Activity::Idle, us(1));
        p.add(Activity::PriorityWait, us(2));
        assert_eq!(p.total(), us(18));
    }
}
