//! Columnar transaction-frame storage and its CSV/JSON exchange format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MarketConfig;

const CSV_MAGIC: &str = "# lobmrr-frames v1";
const CSV_COLUMNS: &str = "t,wall_time,eps,bid,ask,mid,vbid,vask,imb,size,depleted";

#[derive(Debug, Error)]
pub enum FrameFormatError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn perr(line: usize, reason: impl Into<String>) -> FrameFormatError {
    FrameFormatError::Parse {
        line,
        reason: reason.into(),
    }
}

/// One pre-trade snapshot in transaction time. Prices are in `price_scale` units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransactionFrame {
    /// Transaction index within its segment.
    pub t: usize,
    pub wall_time_s: f64,
    pub eps: i8,
    pub bid: i64,
    pub ask: i64,
    pub vbid: u64,
    pub vask: u64,
    pub traded_size: u64,
    pub depleted: bool,
}

impl TransactionFrame {
    pub fn imbalance(&self) -> f64 {
        imbalance(self.vbid, self.vask)
    }

    pub fn mid_units(&self) -> f64 {
        (self.bid + self.ask) as f64 / 2.0
    }
}

pub(crate) fn imbalance(vb: u64, va: u64) -> f64 {
    (vb as f64 - va as f64) / (vb as f64 + va as f64)
}

/// Frames of one instrument-day. Halts split it into segments; no statistic
/// pairs frames from different segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSet {
    pub market: MarketConfig,
    /// Dollars per integer price unit.
    pub price_scale: f64,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    segment_starts: Vec<usize>,
    pub wall_time: Vec<f64>,
    pub eps: Vec<i8>,
    pub bid: Vec<i64>,
    pub ask: Vec<i64>,
    pub vbid: Vec<u64>,
    pub vask: Vec<u64>,
    pub size: Vec<u64>,
    pub depleted: Vec<bool>,
}

impl FrameSet {
    pub fn new(market: MarketConfig, price_scale: f64) -> Self {
        Self {
            market,
            price_scale,
            meta: BTreeMap::new(),
            segment_starts: Vec::new(),
            wall_time: Vec::new(),
            eps: Vec::new(),
            bid: Vec::new(),
            ask: Vec::new(),
            vbid: Vec::new(),
            vask: Vec::new(),
            size: Vec::new(),
            depleted: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Close the current segment; the next pushed frame starts a new one.
    pub fn start_segment(&mut self) {
        if self.segment_starts.last() != Some(&self.len()) && !self.is_empty() {
            self.segment_starts.push(self.len());
        }
    }

    pub fn push(&mut self, f: &TransactionFrame) {
        if self.segment_starts.is_empty() {
            self.segment_starts.push(0);
        }
        self.wall_time.push(f.wall_time_s);
        self.eps.push(f.eps);
        self.bid.push(f.bid);
        self.ask.push(f.ask);
        self.vbid.push(f.vbid);
        self.vask.push(f.vask);
        self.size.push(f.traded_size);
        self.depleted.push(f.depleted);
    }

    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.segment_starts.len());
        for (i, &s) in self.segment_starts.iter().enumerate() {
            let e = self.segment_starts.get(i + 1).copied().unwrap_or(self.len());
            if e > s {
                out.push(s..e);
            }
        }
        out
    }

    pub fn segment_of(&self, i: usize) -> usize {
        self.segment_starts.partition_point(|&s| s <= i).saturating_sub(1)
    }

    pub fn frame(&self, i: usize) -> TransactionFrame {
        let seg = self.segment_of(i);
        TransactionFrame {
            t: i - self.segment_starts[seg],
            wall_time_s: self.wall_time[i],
            eps: self.eps[i],
            bid: self.bid[i],
            ask: self.ask[i],
            vbid: self.vbid[i],
            vask: self.vask[i],
            traded_size: self.size[i],
            depleted: self.depleted[i],
        }
    }

    pub fn mid(&self, i: usize) -> f64 {
        (self.bid[i] + self.ask[i]) as f64 * self.price_scale * 0.5
    }

    pub fn mids(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mid(i)).collect()
    }

    pub fn bid_dollars(&self, i: usize) -> f64 {
        self.bid[i] as f64 * self.price_scale
    }

    pub fn ask_dollars(&self, i: usize) -> f64 {
        self.ask[i] as f64 * self.price_scale
    }

    pub fn spread(&self, i: usize) -> f64 {
        (self.ask[i] - self.bid[i]) as f64 * self.price_scale
    }

    pub fn imbalance(&self, i: usize) -> f64 {
        imbalance(self.vbid[i], self.vask[i])
    }

    pub fn eps_f64(&self) -> Vec<f64> {
        self.eps.iter().map(|&e| e as f64).collect()
    }

    /// Structural checks shared by both readers.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.len();
        let cols = [
            self.wall_time.len(),
            self.bid.len(),
            self.ask.len(),
            self.vbid.len(),
            self.vask.len(),
            self.size.len(),
            self.depleted.len(),
        ];
        if cols.iter().any(|&c| c != n) {
            return Err("column lengths differ".into());
        }
        if n > 0 && self.segment_starts.first() != Some(&0) {
            return Err("segment table must start at 0".into());
        }
        if self.segment_starts.windows(2).any(|w| w[0] >= w[1]) || self.segment_starts.last().is_some_and(|&s| s >= n.max(1)) {
            return Err("segment table not strictly increasing within bounds".into());
        }
        if !(self.price_scale > 0.0) {
            return Err("price_scale must be positive".into());
        }
        for i in 0..n {
            if self.eps[i] != 1 && self.eps[i] != -1 {
                return Err(format!("frame {i}: eps must be +1 or -1"));
            }
            if self.ask[i] <= self.bid[i] {
                return Err(format!("frame {i}: ask must exceed bid"));
            }
            if self.vbid[i] == 0 || self.vask[i] == 0 {
                return Err(format!("frame {i}: empty best level"));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_MAGIC}")?;
        writeln!(w, "# tick_size={}", self.market.tick_size)?;
        writeln!(w, "# rebate={}", self.market.rebate)?;
        writeln!(w, "# levels_tracked={}", self.market.levels_tracked)?;
        writeln!(w, "# price_scale={}", self.price_scale)?;
        for (k, v) in &self.meta {
            writeln!(w, "# {}={}", k.replace(['\n', '='], " "), v.replace('\n', " "))?;
        }
        writeln!(w, "{CSV_COLUMNS}")?;
        let mut row = String::with_capacity(96);
        for i in 0..self.len() {
            let f = self.frame(i);
            row.clear();
            let mid_x2 = f.bid + f.ask;
            let mid = if mid_x2 % 2 == 0 {
                format!("{}", mid_x2 / 2)
            } else {
                format!("{}", mid_x2 as f64 / 2.0)
            };
            use std::fmt::Write as _;
            let _ = write!(
                row,
                "{},{},{},{},{},{},{},{},{},{},{}",
                f.t,
                f.wall_time_s,
                f.eps,
                f.bid,
                f.ask,
                mid,
                f.vbid,
                f.vask,
                f.imbalance(),
                f.traded_size,
                u8::from(f.depleted)
            );
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(source: R) -> Result<Self, FrameFormatError> {
        let mut market = MarketConfig::default();
        let mut price_scale = None;
        let mut meta = BTreeMap::new();
        let mut out: Option<FrameSet> = None;
        let mut saw_magic = false;
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                if out.is_some() {
                    return Err(perr(lineno, "header line after data"));
                }
                if line == CSV_MAGIC {
                    saw_magic = true;
                    continue;
                }
                let (k, v) = h.trim().split_once('=').ok_or_else(|| perr(lineno, "header must be key=value"))?;
                let num = |v: &str| v.parse::<f64>().map_err(|_| perr(lineno, format!("bad number for {k}")));
                match k {
                    "tick_size" => market.tick_size = num(v)?,
                    "rebate" => market.rebate = num(v)?,
                    "price_scale" => price_scale = Some(num(v)?),
                    "levels_tracked" => {
                        market.levels_tracked = v.parse().map_err(|_| perr(lineno, "bad levels_tracked"))?
                    }
                    _ => {
                        meta.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            let Some(fs) = out.as_mut() else {
                if !saw_magic {
                    return Err(perr(lineno, "missing frame-file header"));
                }
                if line != CSV_COLUMNS {
                    return Err(perr(lineno, format!("expected column header `{CSV_COLUMNS}`")));
                }
                let scale = price_scale.ok_or_else(|| perr(lineno, "missing price_scale header"))?;
                market.validate().map_err(|e| perr(lineno, e.to_string()))?;
                let mut fs = FrameSet::new(market, scale);
                fs.meta = std::mem::take(&mut meta);
                out = Some(fs);
                continue;
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(perr(lineno, format!("expected 11 fields, found {}", f.len())));
            }
            fn p<T: std::str::FromStr>(s: &str, col: &str, line: usize) -> Result<T, FrameFormatError> {
                s.parse().map_err(|_| perr(line, format!("bad {col} `{s}`")))
            }
            let t: usize = p(f[0], "t", lineno)?;
            let frame = TransactionFrame {
                t,
                wall_time_s: p(f[1], "wall_time", lineno)?,
                eps: p(f[2], "eps", lineno)?,
                bid: p(f[3], "bid", lineno)?,
                ask: p(f[4], "ask", lineno)?,
                vbid: p(f[6], "vbid", lineno)?,
                vask: p(f[7], "vask", lineno)?,
                traded_size: p(f[9], "size", lineno)?,
                depleted: match f[10] {
                    "0" => false,
                    "1" => true,
                    other => return Err(perr(lineno, format!("bad depleted `{other}`"))),
                },
            };
            let mid: f64 = p(f[5], "mid", lineno)?;
            if mid != frame.mid_units() {
                return Err(perr(lineno, "mid does not equal (bid+ask)/2"));
            }
            let expected_t = fs.len() - fs.segment_starts.last().copied().unwrap_or(0);
            if t == 0 {
                fs.start_segment();
            } else if t != expected_t {
                return Err(perr(lineno, format!("t={t} breaks the sequence (expected {expected_t} or 0)")));
            }
            fs.push(&frame);
        }
        let fs = match out {
            Some(fs) => fs,
            None => return Err(perr(0, "no column header found")),
        };
        fs.validate().map_err(|e| perr(0, e))?;
        Ok(fs)
    }

    pub fn to_json(&self) -> Result<String, FrameFormatError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, FrameFormatError> {
        let fs: FrameSet = serde_json::from_str(s)?;
        fs.validate().map_err(|e| perr(0, e))?;
        Ok(fs)
    }
}
