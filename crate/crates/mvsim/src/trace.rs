//! Packet/flow/trace data model and the trace CSV format.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

/// Packet direction relative to the client: uplink (client to server) or
/// downlink (server to client).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    UL,
    DL,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::UL => "UL",
            Direction::DL => "DL",
        })
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "UL" => Ok(Direction::UL),
            "DL" => Ok(Direction::DL),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transport {
    TCP,
    UDP,
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transport::TCP => "TCP",
            Transport::UDP => "UDP",
        })
    }
}

impl FromStr for Transport {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "TCP" => Ok(Transport::TCP),
            "UDP" => Ok(Transport::UDP),
            other => Err(format!("unknown transport {other:?}")),
        }
    }
}

/// Flow label, stable within one trace. For Vircadia, 1..=7 map to the
/// platform's distinct signal streams.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FlowId(pub u16);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const DEFAULT_MTU: u32 = 1500;

/// One packet event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub t: SimTime,
    pub size: u32,
    pub dir: Direction,
    pub transport: Transport,
    pub flow: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub seed: u64,
    pub duration: SimTime,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("out-of-order append: record at {new} precedes last record at {last}")]
    OutOfOrder { new: SimTime, last: SimTime },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Ordered packet sequence. Immutable once built; records are sorted by
/// time with ties kept in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    records: Vec<PacketRecord>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Trace { meta, records: Vec::new() }
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.size as u64).sum()
    }

    fn check_record(r: &PacketRecord) -> Result<(), TraceError> {
        if r.size < 1 {
            return Err(TraceError::Argument("packet size must be >= 1".into()));
        }
        Ok(())
    }

    /// Appends a record; errors if it would break time ordering.
    pub fn append(&mut self, record: PacketRecord) -> Result<(), TraceError> {
        Self::check_record(&record)?;
        if let Some(last) = self.records.last() {
            if record.t < last.t {
                return Err(TraceError::OutOfOrder { new: record.t, last: last.t });
            }
        }
        if record.t > self.meta.duration {
            self.meta.duration = record.t;
        }
        self.records.push(record);
        Ok(())
    }

    /// Inserts a record keeping time order, placing ties after existing
    /// records at the same time.
    pub fn sorted_insert(&mut self, record: PacketRecord) -> Result<(), TraceError> {
        Self::check_record(&record)?;
        let idx = self.records.partition_point(|r| r.t <= record.t);
        if record.t > self.meta.duration {
            self.meta.duration = record.t;
        }
        self.records.insert(idx, record);
        Ok(())
    }

    /// Builds a trace from records that are not necessarily ordered.
    /// Sorting is stable, so equal-time records keep input order.
    pub fn from_unsorted(meta: TraceMeta, mut records: Vec<PacketRecord>) -> Result<Self, TraceError> {
        for r in &records {
            Self::check_record(r)?;
        }
        records.sort_by_key(|r| r.t);
        let mut meta = meta;
        if let Some(last) = records.last() {
            if last.t > meta.duration {
                meta.duration = last.t;
            }
        }
        Ok(Trace { meta, records })
    }

    /// All records with t0 <= t < t1, order preserved.
    pub fn slice(&self, t0: SimTime, t1: SimTime) -> Result<Trace, TraceError> {
        if t0 > t1 {
            return Err(TraceError::Argument(format!("slice bounds reversed: {t0} > {t1}")));
        }
        let lo = self.records.partition_point(|r| r.t < t0);
        let hi = self.records.partition_point(|r| r.t < t1);
        Ok(Trace {
            meta: TraceMeta {
                scenario: self.meta.scenario.clone(),
                seed: self.meta.seed,
                duration: t1.saturating_sub(t0),
            },
            records: self.records[lo..hi].to_vec(),
        })
    }

    pub fn filter(&self, dir: Option<Direction>, transport: Option<Transport>) -> Trace {
        Trace {
            meta: self.meta.clone(),
            records: self
                .records
                .iter()
                .filter(|r| dir.map_or(true, |d| r.dir == d))
                .filter(|r| transport.map_or(true, |tp| r.transport == tp))
                .copied()
                .collect(),
        }
    }

    pub fn save_csv<W: Write>(&self, sink: W) -> Result<(), TraceError> {
        let mut w = io::BufWriter::new(sink);
        writeln!(w, "# scenario={}", self.meta.scenario)?;
        writeln!(w, "# seed={}", self.meta.seed)?;
        writeln!(w, "# duration_us={}", self.meta.duration.as_micros())?;
        writeln!(w, "t_us,size_bytes,dir,transport,flow,src,dst")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.t.as_micros(),
                r.size,
                r.dir,
                r.transport,
                r.flow,
                r.src,
                r.dst
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv<R: Read>(source: R) -> Result<Trace, TraceError> {
        let reader = BufReader::new(source);
        let mut meta = TraceMeta::default();
        let mut records = Vec::new();
        let mut saw_header = false;
        let mut explicit_duration = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("scenario=") {
                    meta.scenario = v.to_string();
                } else if let Some(v) = comment.strip_prefix("seed=") {
                    meta.seed = v.parse().map_err(|_| TraceError::Parse {
                        line: lineno,
                        msg: format!("bad seed {v:?}"),
                    })?;
                } else if let Some(v) = comment.strip_prefix("duration_us=") {
                    meta.duration = SimTime::from_micros(v.parse().map_err(|_| {
                        TraceError::Parse { line: lineno, msg: format!("bad duration {v:?}") }
                    })?);
                    explicit_duration = true;
                }
                continue;
            }
            if !saw_header {
                if trimmed != "t_us,size_bytes,dir,transport,flow,src,dst" {
                    return Err(TraceError::Parse {
                        line: lineno,
                        msg: format!("bad header {trimmed:?}"),
                    });
                }
                saw_header = true;
                continue;
            }
            let parse = |field: &str, what: &str| -> Result<u64, TraceError> {
                field.parse().map_err(|_| TraceError::Parse {
                    line: lineno,
                    msg: format!("bad {what} {field:?}"),
                })
            };
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 7 {
                return Err(TraceError::Parse {
                    line: lineno,
                    msg: format!("expected 7 fields, got {}", fields.len()),
                });
            }
            let record = PacketRecord {
                t: SimTime::from_micros(parse(fields[0], "timestamp")?),
                size: parse(fields[1], "size")? as u32,
                dir: fields[2]
                    .parse()
                    .map_err(|msg| TraceError::Parse { line: lineno, msg })?,
                transport: fields[3]
                    .parse()
                    .map_err(|msg| TraceError::Parse { line: lineno, msg })?,
                flow: FlowId(parse(fields[4], "flow")? as u16),
                src: NodeId(parse(fields[5], "src")? as u32),
                dst: NodeId(parse(fields[6], "dst")? as u32),
            };
            if record.size < 1 {
                return Err(TraceError::Parse { line: lineno, msg: "size must be >= 1".into() });
            }
            records.push(record);
        }
        if !saw_header {
            return Err(TraceError::Parse { line: 1, msg: "missing header".into() });
        }
        let mut trace = Trace { meta, records };
        if !explicit_duration {
            if let Some(last) = trace.records.iter().map(|r| r.t).max() {
                trace.meta.duration = last;
            }
        }
        // ordering check
        for w in trace.records.windows(2) {
            if w[1].t < w[0].t {
                return Err(TraceError::Parse {
                    line: 0,
                    msg: "records not sorted by time".into(),
                });
            }
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t_us: u64, size: u32) -> PacketRecord {
        PacketRecord {
            t: SimTime::from_micros(t_us),
            size,
            dir: Direction::UL,
            transport: Transport::UDP,
            flow: FlowId(1),
            src: NodeId(6),
            dst: NodeId(5),
        }
    }

    #[test]
    fn append_base_case() {
        let mut t = Trace::default();
        t.append(rec(0, 100)).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn strict_append_rejects_out_of_order() {
        let mut t = Trace::default();
        t.append(rec(5, 100)).unwrap();
        let err = t.append(rec(3, 100)).unwrap_err();
        assert!(matches!(err, TraceError::OutOfOrder { .. }));
    }

    #[test]
    fn ten_thousand_monotone_appends_stay_sorted() {
        let mut t = Trace::default();
        let mut inserted = Vec::new();
        for i in 0..10_000u64 {
            let r = rec(i * 7, 50);
            inserted.push(r);
            t.append(r).unwrap();
        }
        // oracle: sort-and-compare over the inserted list
        let mut sorted = inserted.clone();
        sorted.sort_by_key(|r| r.t);
        assert_eq!(t.len(), 10_000);
        assert_eq!(t.records(), &sorted[..]);
    }

    #[test]
    fn slice_empty_interval() {
        let mut t = Trace::default();
        t.append(rec(0, 100)).unwrap();
        assert!(t.slice(SimTime::ZERO, SimTime::ZERO).unwrap().is_empty());
    }

    #[test]
    fn slice_identity() {
        let mut t = Trace::default();
        for i in 0..5 {
            t.append(rec(i * 1000, 100)).unwrap();
        }
        let end = t.meta.duration + SimTime::from_micros(1);
        let s = t.slice(SimTime::ZERO, end).unwrap();
        assert_eq!(s.records(), t.records());
    }

    #[test]
    fn slice_uniform_millisecond_trace() {
        // 1 packet per ms; [100ms, 200ms) must hold exactly 100 records.
        let mut t = Trace::default();
        for i in 0..500u64 {
            t.append(rec(i * 1000, 100)).unwrap();
        }
        let s = t
            .slice(SimTime::from_millis(100), SimTime::from_millis(200))
            .unwrap();
        // oracle: linear filter
        let expect = t
            .records()
            .iter()
            .filter(|r| r.t >= SimTime::from_millis(100) && r.t < SimTime::from_millis(200))
            .count();
        assert_eq!(s.len(), expect);
        assert_eq!(s.len(), 100);
    }

    #[test]
    fn slice_rejects_reversed_bounds() {
        let t = Trace::default();
        assert!(t.slice(SimTime::from_micros(2), SimTime::from_micros(1)).is_err());
    }

    #[test]
    fn csv_roundtrip_empty() {
        let t = Trace::new(TraceMeta { scenario: "x".into(), seed: 1, duration: SimTime::ZERO });
        let mut buf = Vec::new();
        t.save_csv(&mut buf).unwrap();
        let back = Trace::load_csv(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_roundtrip_three_records() {
        let mut t = Trace::new(TraceMeta {
            scenario: "demo".into(),
            seed: 7,
            duration: SimTime::from_secs(1),
        });
        t.append(rec(10, 100)).unwrap();
        t.append(rec(20, 700)).unwrap();
        let mut r3 = rec(30, 1500);
        r3.dir = Direction::DL;
        r3.transport = Transport::TCP;
        t.append(r3).unwrap();
        let mut buf = Vec::new();
        t.save_csv(&mut buf).unwrap();
        let back = Trace::load_csv(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_rejects_unknown_direction() {
        let data = "t_us,size_bytes,dir,transport,flow,src,dst\n5,100,SIDEWAYS,UDP,1,6,5\n";
        let err = Trace::load_csv(data.as_bytes()).unwrap_err();
        match err {
            TraceError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
