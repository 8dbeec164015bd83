//! Text event trace: one `timestamp_us,kind,subject,detail` line per event.
//!
//! Timestamps are printed exactly (`123.450` is 123 450 ns) so a trace can
//! be parsed back without rounding.

use std::io::{self, Write};
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::medium::{EventKind, FrameKind};

pub fn format_us(d: Duration) -> String {
    let ns = d.as_nanos();
    format!("{}.{:03}", ns / 1000, ns % 1000)
}

pub fn parse_us(s: &str) -> Option<Duration> {
    let (whole, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.is_empty() || frac.len() > 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: u64 = whole.parse().ok()?;
    let frac: u64 = format!("{frac:0<3}").parse().ok()?;
    Some(Duration::from_nanos(whole * 1000 + frac))
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "timestamp_us,kind,subject,detail")?;
        Ok(TraceWriter { out })
    }

    pub fn event(
        &mut self,
        time: Duration,
        kind: EventKind,
        subject: u32,
        detail: &str,
    ) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{}",
            format_us(time),
            kind,
            subject,
            detail
        )
    }

    pub fn frame_end(
        &mut self,
        end: Duration,
        subject: u32,
        frame: FrameKind,
        start: Duration,
        collided: bool,
    ) -> io::Result<()> {
        let status = if collided { "collided" } else { "ok" };
        let detail = format!(
            "{} start_us={} status={}",
            frame.as_str(),
            format_us(start),
            status
        );
        self.event(end, EventKind::FrameEnd, subject, &detail)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: Duration,
    pub kind: EventKind,
    pub subject: u32,
    pub detail: String,
}

impl FromStr for EventKind {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s {
            "WindowOpen" => EventKind::WindowOpen,
            "WindowClose" => EventKind::WindowClose,
            "BackoffExpiry" => EventKind::BackoffExpiry,
            "FrameEnd" => EventKind::FrameEnd,
            "TxopEnd" => EventKind::TxopEnd,
            "SimEnd" => EventKind::SimEnd,
            _ => return Err(()),
        })
    }
}

/// Parses a whole trace, header included.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let bad = |line: usize, reason: &str| Error::Trace {
        line,
        reason: reason.to_string(),
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(4, ',');
        let (Some(t), Some(k), Some(s), Some(d)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(i + 1, "expected four fields"));
        };
        out.push(TraceRecord {
            time: parse_us(t).ok_or_else(|| bad(i + 1, "bad timestamp"))?,
            kind: k.parse().map_err(|_| bad(i + 1, "unknown event kind"))?,
            subject: s.parse().map_err(|_| bad(i + 1, "bad subject"))?,
            detail: d.to_string(),
        });
    }
    Ok(out)
}

/// A frame's occupation of the medium, recovered from a `FrameEnd` record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameSpan {
    pub kind: FrameKind,
    pub subject: u32,
    pub start: Duration,
    pub end: Duration,
    pub collided: bool,
}

pub fn frame_spans(records: &[TraceRecord]) -> Vec<FrameSpan> {
    records
        .iter()
        .filter(|r| r.kind == EventKind::FrameEnd)
        .filter_map(|r| {
            let mut words = r.detail.split(' ');
            let kind = words.next()?.parse().ok()?;
            let start = parse_us(words.next()?.strip_prefix("start_us=")?)?;
            let collided = words.next()? == "status=collided";
            Some(FrameSpan {
                kind,
                subject: r.subject,
                start,
                end: r.time,
                collided,
            })
        })
        .collect()
}

/// First pair of successful frames that share medium time, if any.
pub fn find_overlap(spans: &[FrameSpan]) -> Option<(FrameSpan, FrameSpan)> {
    let mut ok: Vec<FrameSpan> = spans.iter().copied().filter(|s| !s.collided).collect();
    ok.sort_by_key(|s| (s.start, s.end));
    ok.windows(2)
        .find(|w| w[1].start < w[0].end)
        .map(|w| (w[0], w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_round_trip() {
        for ns in [0u64, 1, 999, 1000, 13_600, 102_400_000, 99_999_999_999] {
            let d = Duration::from_nanos(ns);
            assert_eq!(parse_us(&format_us(d)), Some(d));
        }
        assert_eq!(format_us(Duration::from_nanos(13_600)), "13.600");
        assert_eq!(parse_us("25"), Some(Duration::from_micros(25)));
        assert_eq!(parse_us("1.5"), Some(Duration::from_nanos(1500)));
        assert_eq!(parse_us("1.5555"), None);
        assert_eq!(parse_us("x"), None);
    }

    #[test]
    fn writer_and_parser_agree() {
        let mut w = TraceWriter::new(Vec::new()).unwrap();
        w.event(Duration::ZERO, EventKind::WindowOpen, 0, "")
            .unwrap();
        w.frame_end(
            Duration::from_micros(57),
            0,
            FrameKind::Ndpa,
            Duration::from_micros(25),
            false,
        )
        .unwrap();
        w.frame_end(
            Duration::from_micros(60),
            3,
            FrameKind::Ampdu,
            Duration::from_micros(50),
            true,
        )
        .unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let recs = parse_trace(&text).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].kind, EventKind::WindowOpen);
        let spans = frame_spans(&recs);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].start, Duration::from_micros(25));
        assert!(spans[1].collided);
        // the collided frame overlaps the NDPA but does not count
        assert_eq!(find_overlap(&spans), None);
    }

    #[test]
    fn overlap_is_detected() {
        let span = |s, e| FrameSpan {
            kind: FrameKind::Ampdu,
            subject: 1,
            start: Duration::from_micros(s),
            end: Duration::from_micros(e),
            collided: false,
        };
        assert!(find_overlap(&[span(0, 10), span(10, 20)]).is_none());
        assert!(find_overlap(&[span(10, 20), span(0, 11)]).is_some());
        assert!(parse_trace("h\n1.0,Bogus,0,x\n").is_err());
    }
}
