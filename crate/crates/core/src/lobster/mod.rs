//! LOBSTER message and order-book file ingestion.
//!
//! Message rows are `time,type,order_id,size,price,direction`; order-book rows
//! carry `ask_price,ask_size,bid_price,bid_size` for each of `K` levels. Prices
//! are integers in units of 10^-4 dollars and are never routed through floats.

pub mod synthetic;

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Price unit of LOBSTER files, in dollars.
pub const LOBSTER_PRICE_SCALE: f64 = 1e-4;

/// Empty-level price marker used by LOBSTER order-book files.
pub const EMPTY_LEVEL_SENTINEL: i64 = 9_999_999_999;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("row {row}: malformed: {reason}")]
    MalformedRow { row: usize, reason: RowError },
    #[error("row {row}: time {time} precedes previous time {previous}")]
    NonMonotoneTime { row: usize, time: f64, previous: f64 },
    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCountMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: negative size {size} in column {column}")]
    NegativeSize { row: usize, column: usize, size: i64 },
    #[error("invalid session window [{start}, {end})")]
    InvalidWindow { start: f64, end: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub fn is_unknown_event_type(&self) -> bool {
        matches!(
            self,
            IngestError::MalformedRow {
                reason: RowError::UnknownEventType(_),
                ..
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowError {
    UnknownEventType(i64),
    FieldCount(usize),
    BadField { column: &'static str, value: String },
    NonPositiveSize(i64),
    NonPositivePrice(i64),
    BadDirection(i64),
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowError::UnknownEventType(t) => write!(f, "unknown event type {t}"),
            RowError::FieldCount(n) => write!(f, "expected 6 fields, found {n}"),
            RowError::BadField { column, value } => write!(f, "cannot parse {column} from {value:?}"),
            RowError::NonPositiveSize(s) => write!(f, "size must be positive, got {s}"),
            RowError::NonPositivePrice(p) => write!(f, "price must be positive, got {p}"),
            RowError::BadDirection(d) => write!(f, "direction must be 1 or -1, got {d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventType {
    Submission,
    PartialCancel,
    Deletion,
    ExecVisible,
    ExecHidden,
    /// Auction cross. Parsed and passed through, never applied to the book.
    CrossTrade,
    Halt,
}

impl EventType {
    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            1 => EventType::Submission,
            2 => EventType::PartialCancel,
            3 => EventType::Deletion,
            4 => EventType::ExecVisible,
            5 => EventType::ExecHidden,
            6 => EventType::CrossTrade,
            7 => EventType::Halt,
            _ => return None,
        })
    }

    pub fn code(self) -> i64 {
        match self {
            EventType::Submission => 1,
            EventType::PartialCancel => 2,
            EventType::Deletion => 3,
            EventType::ExecVisible => 4,
            EventType::ExecHidden => 5,
            EventType::CrossTrade => 6,
            EventType::Halt => 7,
        }
    }

    /// Types 1-4 mutate the visible book.
    pub fn is_visible_book_event(self) -> bool {
        matches!(
            self,
            EventType::Submission | EventType::PartialCancel | EventType::Deletion | EventType::ExecVisible
        )
    }
}

/// Side of the resting limit order referenced by a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Buy,
    Sell,
}

impl Direction {
    pub fn sign(self) -> i8 {
        match self {
            Direction::Buy => 1,
            Direction::Sell => -1,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            1 => Some(Direction::Buy),
            -1 => Some(Direction::Sell),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobEvent {
    /// Seconds after midnight.
    pub time_s: f64,
    pub kind: EventType,
    pub order_id: i64,
    pub size: u64,
    /// Dollars x 10^4. For halts this carries the halt indicator (-1, 0, 1).
    pub price_ticks: i64,
    pub direction: Direction,
}

impl LobEvent {
    /// Serialize as a message-file row (no trailing newline).
    pub fn to_row(&self) -> String {
        let dir = if self.kind == EventType::Halt && self.direction == Direction::Sell {
            -1
        } else {
            self.direction.sign() as i64
        };
        format!(
            "{},{},{},{},{},{}",
            self.time_s,
            self.kind.code(),
            self.order_id,
            self.size,
            self.price_ticks,
            dir
        )
    }
}

fn field<T: std::str::FromStr>(raw: &str, column: &'static str) -> Result<T, RowError> {
    raw.trim().parse::<T>().map_err(|_| RowError::BadField {
        column,
        value: raw.to_string(),
    })
}

/// Parse one message row.
pub fn parse_message_row(line: &str) -> Result<LobEvent, RowError> {
    let mut cols: [&str; 6] = [""; 6];
    let mut n = 0;
    for part in line.split(',') {
        if n < 6 {
            cols[n] = part;
        }
        n += 1;
    }
    if n != 6 {
        return Err(RowError::FieldCount(n));
    }
    let time_s: f64 = field(cols[0], "time")?;
    if !time_s.is_finite() || time_s < 0.0 {
        return Err(RowError::BadField {
            column: "time",
            value: cols[0].to_string(),
        });
    }
    let code: i64 = field(cols[1], "type")?;
    let kind = EventType::from_code(code).ok_or(RowError::UnknownEventType(code))?;
    let order_id: i64 = field(cols[2], "order_id")?;
    let size: i64 = field(cols[3], "size")?;
    let price_ticks: i64 = field(cols[4], "price")?;
    let dir: i64 = field(cols[5], "direction")?;

    if kind == EventType::Halt {
        return Ok(LobEvent {
            time_s,
            kind,
            order_id,
            size: size.max(0) as u64,
            price_ticks,
            direction: Direction::from_sign(dir).unwrap_or(Direction::Buy),
        });
    }
    if size <= 0 {
        return Err(RowError::NonPositiveSize(size));
    }
    if price_ticks <= 0 {
        return Err(RowError::NonPositivePrice(price_ticks));
    }
    let direction = Direction::from_sign(dir).ok_or(RowError::BadDirection(dir))?;
    Ok(LobEvent {
        time_s,
        kind,
        order_id,
        size: size as u64,
        price_ticks,
        direction,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Treat decreasing timestamps as a hard error instead of a warning.
    pub strict_time: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MessageFile {
    pub events: Vec<LobEvent>,
    /// Rows whose timestamp went backwards (kept in file order).
    pub non_monotone_rows: Vec<usize>,
}

/// Parse a full message file. Row indices in errors are 0-based and align
/// with the companion order-book file.
pub fn parse_message_file<R: BufRead>(mut source: R, opts: ParseOptions) -> Result<MessageFile, IngestError> {
    let mut out = MessageFile::default();
    let mut line = String::with_capacity(96);
    let mut row = 0usize;
    let mut prev = f64::NEG_INFINITY;
    loop {
        line.clear();
        if source.read_line(&mut line)? == 0 {
            break;
        }
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.trim().is_empty() {
            continue;
        }
        let ev = parse_message_row(trimmed).map_err(|reason| IngestError::MalformedRow { row, reason })?;
        if ev.time_s < prev {
            if opts.strict_time {
                return Err(IngestError::NonMonotoneTime {
                    row,
                    time: ev.time_s,
                    previous: prev,
                });
            }
            log::warn!("row {row}: time {} precedes {prev}; keeping file order", ev.time_s);
            out.non_monotone_rows.push(row);
        } else {
            prev = ev.time_s;
        }
        out.events.push(ev);
        row += 1;
    }
    Ok(out)
}

pub fn write_message_file<W: Write>(mut sink: W, events: &[LobEvent]) -> std::io::Result<()> {
    for ev in events {
        writeln!(sink, "{}", ev.to_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quote {
    pub price_ticks: i64,
    pub size: u64,
}

/// One order-book row; index 0 is the best level. `None` marks an empty level.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub asks: Vec<Option<Quote>>,
    pub bids: Vec<Option<Quote>>,
}

impl BookSnapshot {
    pub fn levels(&self) -> usize {
        self.asks.len()
    }

    /// Best ask strictly above best bid, and prices strictly monotone away
    /// from the touch on each side.
    pub fn is_consistent(&self) -> bool {
        if let (Some(Some(a)), Some(Some(b))) = (self.asks.first(), self.bids.first()) {
            if a.price_ticks <= b.price_ticks {
                return false;
            }
        }
        let mono = |side: &[Option<Quote>], up: bool| {
            let prices: Vec<i64> = side.iter().flatten().map(|q| q.price_ticks).collect();
            prices.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] })
        };
        mono(&self.asks, true) && mono(&self.bids, false)
    }

    pub fn to_row(&self) -> String {
        let mut cols = Vec::with_capacity(4 * self.levels());
        for k in 0..self.levels() {
            match self.asks[k] {
                Some(q) => {
                    cols.push(q.price_ticks.to_string());
                    cols.push(q.size.to_string());
                }
                None => {
                    cols.push(EMPTY_LEVEL_SENTINEL.to_string());
                    cols.push("0".into());
                }
            }
            match self.bids[k] {
                Some(q) => {
                    cols.push(q.price_ticks.to_string());
                    cols.push(q.size.to_string());
                }
                None => {
                    cols.push((-EMPTY_LEVEL_SENTINEL).to_string());
                    cols.push("0".into());
                }
            }
        }
        cols.join(",")
    }
}

fn is_sentinel(price: i64) -> bool {
    price.abs() == EMPTY_LEVEL_SENTINEL
}

pub fn parse_snapshot_row(line: &str, levels: usize, row: usize) -> Result<BookSnapshot, IngestError> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 4 * levels {
        return Err(IngestError::ColumnCountMismatch {
            row,
            expected: 4 * levels,
            found: cols.len(),
        });
    }
    let num = |i: usize| -> Result<i64, IngestError> {
        cols[i].trim().parse::<i64>().map_err(|_| IngestError::MalformedRow {
            row,
            reason: RowError::BadField {
                column: "book",
                value: cols[i].to_string(),
            },
        })
    };
    let mut snap = BookSnapshot {
        asks: Vec::with_capacity(levels),
        bids: Vec::with_capacity(levels),
    };
    for k in 0..levels {
        let base = 4 * k;
        let mut level = [None, None];
        for (slot, off) in [(0usize, 0usize), (1, 2)] {
            let price = num(base + off)?;
            let size = num(base + off + 1)?;
            if size < 0 {
                return Err(IngestError::NegativeSize {
                    row,
                    column: base + off + 1,
                    size,
                });
            }
            if !is_sentinel(price) && size > 0 {
                level[slot] = Some(Quote {
                    price_ticks: price,
                    size: size as u64,
                });
            }
        }
        snap.asks.push(level[0]);
        snap.bids.push(level[1]);
    }
    Ok(snap)
}

pub fn parse_snapshot_file<R: BufRead>(mut source: R, levels: usize) -> Result<Vec<BookSnapshot>, IngestError> {
    let mut out = Vec::new();
    let mut line = String::with_capacity(64 * levels.max(1));
    let mut row = 0usize;
    loop {
        line.clear();
        if source.read_line(&mut line)? == 0 {
            break;
        }
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.trim().is_empty() {
            continue;
        }
        out.push(parse_snapshot_row(trimmed, levels, row)?);
        row += 1;
    }
    Ok(out)
}

pub fn write_snapshot_file<W: Write>(mut sink: W, snaps: &[BookSnapshot]) -> std::io::Result<()> {
    for s in snaps {
        writeln!(sink, "{}", s.to_row())?;
    }
    Ok(())
}

/// Half-open trading window `[start_s, end_s)` in seconds after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl SessionWindow {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self, IngestError> {
        if !(start_s < end_s) {
            return Err(IngestError::InvalidWindow { start: start_s, end: end_s });
        }
        Ok(Self { start_s, end_s })
    }

    /// Regular hours 09:30-16:00 without the first and last hour.
    pub fn regular_trimmed() -> Self {
        Self {
            start_s: 34_200.0 + 3_600.0,
            end_s: 57_600.0 - 3_600.0,
        }
    }

    pub fn contains(&self, time_s: f64) -> bool {
        self.start_s <= time_s && time_s < self.end_s
    }
}

impl Default for SessionWindow {
    fn default() -> Self {
        Self::regular_trimmed()
    }
}

pub fn filter_session(events: &[LobEvent], window: SessionWindow) -> Vec<LobEvent> {
    events.iter().filter(|e| window.contains(e.time_s)).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_submission_row() {
        let ev = parse_message_row("34200.000123,1,42,100,2238100,1").unwrap();
        assert_eq!(ev.time_s, 34200.000123);
        assert_eq!(ev.kind, EventType::Submission);
        assert_eq!(ev.order_id, 42);
        assert_eq!(ev.size, 100);
        assert_eq!(ev.price_ticks, 2238100);
        assert_eq!(ev.direction, Direction::Buy);
    }

    #[test]
    fn parses_visible_execution() {
        let ev = parse_message_row("34201.5,4,42,100,2238100,1").unwrap();
        assert_eq!(ev.kind, EventType::ExecVisible);
        assert_eq!(ev.direction, Direction::Buy);
    }

    #[test]
    fn undefined_type_is_malformed() {
        let err = parse_message_file("34202.0,9,0,0,0,0\n".as_bytes(), ParseOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { row: 0, .. }));
        assert!(err.is_unknown_event_type());
    }

    #[test]
    fn malformed_row_reports_index() {
        let src = "34200.1,1,1,10,100,1\n34200.2,1,2,10,100\n";
        match parse_message_file(src.as_bytes(), ParseOptions::default()) {
            Err(IngestError::MalformedRow { row, reason }) => {
                assert_eq!(row, 1);
                assert_eq!(reason, RowError::FieldCount(5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_time_warns_or_fails() {
        let src = "34200.5,1,1,10,100,1\n34200.4,1,2,10,100,1\n34200.6,1,3,10,100,1\n";
        let parsed = parse_message_file(src.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.events.len(), 3);
        assert_eq!(parsed.non_monotone_rows, vec![1]);
        assert_eq!(parsed.events[1].order_id, 2);
        let strict = parse_message_file(src.as_bytes(), ParseOptions { strict_time: true });
        assert!(matches!(strict, Err(IngestError::NonMonotoneTime { row: 1, .. })));
    }

    #[test]
    fn halt_rows_are_accepted() {
        let ev = parse_message_row("34713.685155243,7,0,0,-1,-1").unwrap();
        assert_eq!(ev.kind, EventType::Halt);
        assert_eq!(ev.price_ticks, -1);
    }

    #[test]
    fn snapshot_level_mapping() {
        let s = parse_snapshot_row("2238200,150,2238100,200", 1, 0).unwrap();
        assert_eq!(
            s.asks[0],
            Some(Quote {
                price_ticks: 2238200,
                size: 150
            })
        );
        assert_eq!(
            s.bids[0],
            Some(Quote {
                price_ticks: 2238100,
                size: 200
            })
        );
        assert!(s.is_consistent());
    }

    #[test]
    fn snapshot_sentinels_mean_empty() {
        let s = parse_snapshot_row("-9999999999,0,2238100,200", 1, 0).unwrap();
        assert_eq!(s.asks[0], None);
        let s = parse_snapshot_row("9999999999,0,-9999999999,0", 1, 0).unwrap();
        assert_eq!(s.asks[0], None);
        assert_eq!(s.bids[0], None);
    }

    #[test]
    fn snapshot_arity_and_sign_checks() {
        assert!(matches!(
            parse_snapshot_row("2238200,150,2238100", 1, 3),
            Err(IngestError::ColumnCountMismatch {
                row: 3,
                expected: 4,
                found: 3
            })
        ));
        assert!(matches!(
            parse_snapshot_row("2238200,-5,2238100,10", 1, 0),
            Err(IngestError::NegativeSize { size: -5, .. })
        ));
    }

    #[test]
    fn session_window_is_half_open() {
        let w = SessionWindow::default();
        let mk = |t: f64| LobEvent {
            time_s: t,
            kind: EventType::Submission,
            order_id: 1,
            size: 1,
            price_ticks: 1,
            direction: Direction::Buy,
        };
        let evs = vec![mk(34200.0), mk(37800.0), mk(40000.0), mk(54000.0)];
        let kept = filter_session(&evs, w);
        let times: Vec<f64> = kept.iter().map(|e| e.time_s).collect();
        assert_eq!(times, vec![37800.0, 40000.0]);
        assert!(SessionWindow::new(10.0, 10.0).is_err());
    }
}
