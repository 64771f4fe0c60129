//! Price-time priority order book reconstruction.
//!
//! The book is rebuilt from LOBSTER events, visible executions are grouped into
//! transaction frames (one per aggressive order), and best-level queue
//! depletions are recorded as they happen.

mod frames;
mod reconstruct;
mod regime;

pub use frames::{FrameFormatError, FrameSet, TransactionFrame};
pub use reconstruct::{
    depletions_from_frames, detect_depletions, extract_transactions, reconcile, reconcile_levels, reconstruct, DepletionCause, DepletionEvent, LevelDiff,
    ReconcileReport, ReconstructOptions, Reconstruction, ReconstructionStats,
};
pub use regime::{classify_tick_regime, TickRegime, TickRegimeReport, LARGE_TICK_MAX_SPREAD, SMALL_TICK_MIN_SPREAD};

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lobster::{BookSnapshot, Direction, EventType, LobEvent, Quote};

#[derive(Debug, Error, PartialEq)]
pub enum BookError {
    #[error("order {order_id} at {price} would cross the book (best opposite {opposite})")]
    CrossedBook { order_id: i64, price: i64, opposite: i64 },
    #[error("order id {0} submitted twice")]
    DuplicateOrderId(i64),
    #[error("invalid market config: {0}")]
    InvalidConfig(&'static str),
    #[error("no frames")]
    EmptyInput,
}

/// Venue parameters. Dollar amounts are floats; book prices stay integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub tick_size: f64,
    pub rebate: f64,
    pub levels_tracked: usize,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            tick_size: 0.01,
            rebate: 0.003,
            levels_tracked: 10,
        }
    }
}

impl MarketConfig {
    pub fn new(tick_size: f64, rebate: f64, levels_tracked: usize) -> Result<Self, BookError> {
        let cfg = Self {
            tick_size,
            rebate,
            levels_tracked,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BookError> {
        if !(self.tick_size > 0.0) {
            return Err(BookError::InvalidConfig("tick size must be positive"));
        }
        if !(self.rebate >= 0.0) {
            return Err(BookError::InvalidConfig("rebate must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl From<Direction> for Side {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Buy => Side::Bid,
            Direction::Sell => Side::Ask,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RestingOrder {
    /// `None` for volume seeded from a snapshot whose owners are unknown.
    id: Option<i64>,
    size: u64,
}

#[derive(Debug, Clone, Default)]
struct Level {
    orders: VecDeque<RestingOrder>,
    total: u64,
}

impl Level {
    fn reduce_at(&mut self, pos: usize, by: u64) -> u64 {
        let o = &mut self.orders[pos];
        let taken = by.min(o.size);
        o.size -= taken;
        self.total -= taken;
        if o.size == 0 {
            self.orders.remove(pos);
        }
        taken
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaKind {
    Added,
    Reduced,
    Removed,
    /// Event referenced an order the book does not know and no seeded volume
    /// could absorb it.
    Untracked,
    /// Hidden execution, cross trade or halt; the visible book is untouched.
    Ignored,
}

/// What one event did to the book.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookDelta {
    pub kind: DeltaKind,
    pub side: Option<Side>,
    pub price_ticks: i64,
    pub size: u64,
    /// The event emptied the best level on this side.
    pub depleted_best: Option<Side>,
    /// A submission priced strictly inside the spread.
    pub inside_spread: bool,
    pub best_before: (Option<i64>, Option<i64>),
    pub best_after: (Option<i64>, Option<i64>),
}

impl BookDelta {
    pub fn mid_changed(&self) -> bool {
        let mid = |(b, a): (Option<i64>, Option<i64>)| b.zip(a).map(|(b, a)| a + b);
        mid(self.best_before) != mid(self.best_after)
    }
}

/// Visible limit order book with per-price FIFO queues.
#[derive(Debug, Clone, Default)]
pub struct BookState {
    bids: BTreeMap<i64, Level>,
    asks: BTreeMap<i64, Level>,
    index: HashMap<i64, (Side, i64)>,
}

impl BookState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Book holding anonymous volume at every non-empty snapshot level.
    pub fn from_snapshot(snap: &BookSnapshot) -> Self {
        let mut book = Self::new();
        let mut seed = |side: Side, q: &Quote| {
            let level = book.side_mut(side).entry(q.price_ticks).or_default();
            level.orders.push_back(RestingOrder { id: None, size: q.size });
            level.total += q.size;
        };
        for q in snap.asks.iter().flatten() {
            seed(Side::Ask, q);
        }
        for q in snap.bids.iter().flatten() {
            seed(Side::Bid, q);
        }
        book
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<i64, Level> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    pub fn best_bid(&self) -> Option<i64> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<i64> {
        self.asks.keys().next().copied()
    }

    pub fn best_bid_depth(&self) -> u64 {
        self.bids.values().next_back().map_or(0, |l| l.total)
    }

    pub fn best_ask_depth(&self) -> u64 {
        self.asks.values().next().map_or(0, |l| l.total)
    }

    /// `a + b` in price units; twice the mid so it stays integral.
    pub fn mid_x2(&self) -> Option<i64> {
        Some(self.best_ask()? + self.best_bid()?)
    }

    pub fn spread(&self) -> Option<i64> {
        Some(self.best_ask()? - self.best_bid()?)
    }

    pub fn order_count(&self) -> usize {
        self.bids.values().chain(self.asks.values()).map(|l| l.orders.len()).sum()
    }

    /// Top `k` levels per side, best first.
    pub fn top_levels(&self, k: usize) -> (Vec<Quote>, Vec<Quote>) {
        let q = |(p, l): (&i64, &Level)| Quote {
            price_ticks: *p,
            size: l.total,
        };
        let asks = self.asks.iter().take(k).map(q).collect();
        let bids = self.bids.iter().rev().take(k).map(q).collect();
        (asks, bids)
    }

    fn best(&self) -> (Option<i64>, Option<i64>) {
        (self.best_bid(), self.best_ask())
    }

    /// Apply one message. Errors leave the book unchanged.
    pub fn apply_event(&mut self, e: &LobEvent) -> Result<BookDelta, BookError> {
        let before = self.best();
        let side = Side::from(e.direction);
        let mut delta = BookDelta {
            kind: DeltaKind::Ignored,
            side: Some(side),
            price_ticks: e.price_ticks,
            size: e.size,
            depleted_best: None,
            inside_spread: false,
            best_before: before,
            best_after: before,
        };
        match e.kind {
            EventType::Submission => {
                self.submit(e, side)?;
                delta.kind = DeltaKind::Added;
                delta.inside_spread = match side {
                    Side::Bid => before.0.is_none_or(|b| e.price_ticks > b),
                    Side::Ask => before.1.is_none_or(|a| e.price_ticks < a),
                } && before.0.is_some()
                    && before.1.is_some();
            }
            EventType::PartialCancel | EventType::Deletion | EventType::ExecVisible => {
                let full = e.kind == EventType::Deletion;
                delta.kind = self.reduce(e, side, full);
                if let Some(s) = delta.side {
                    let best_price = match s {
                        Side::Bid => before.0,
                        Side::Ask => before.1,
                    };
                    let removed_best = best_price == Some(e.price_ticks)
                        && !self.side_mut(s).contains_key(&e.price_ticks)
                        && delta.kind != DeltaKind::Untracked;
                    if removed_best {
                        delta.depleted_best = Some(s);
                    }
                }
            }
            EventType::ExecHidden | EventType::CrossTrade | EventType::Halt => {
                delta.side = None;
            }
        }
        delta.best_after = self.best();
        Ok(delta)
    }

    fn submit(&mut self, e: &LobEvent, side: Side) -> Result<(), BookError> {
        if self.index.contains_key(&e.order_id) {
            return Err(BookError::DuplicateOrderId(e.order_id));
        }
        let crossing = match side {
            Side::Bid => self.best_ask().filter(|&a| e.price_ticks >= a),
            Side::Ask => self.best_bid().filter(|&b| e.price_ticks <= b),
        };
        if let Some(opposite) = crossing {
            return Err(BookError::CrossedBook {
                order_id: e.order_id,
                price: e.price_ticks,
                opposite,
            });
        }
        let level = self.side_mut(side).entry(e.price_ticks).or_default();
        level.orders.push_back(RestingOrder {
            id: Some(e.order_id),
            size: e.size,
        });
        level.total += e.size;
        self.index.insert(e.order_id, (side, e.price_ticks));
        Ok(())
    }

    fn reduce(&mut self, e: &LobEvent, side: Side, full: bool) -> DeltaKind {
        if let Some(&(s, price)) = self.index.get(&e.order_id) {
            let book_side = self.side_mut(s);
            let level = book_side.get_mut(&price).expect("indexed order has a level");
            let pos = level
                .orders
                .iter()
                .position(|o| o.id == Some(e.order_id))
                .expect("indexed order is queued");
            let by = if full { level.orders[pos].size } else { e.size };
            level.reduce_at(pos, by);
            let gone = !level.orders.iter().any(|o| o.id == Some(e.order_id));
            if level.total == 0 {
                book_side.remove(&price);
            }
            if gone {
                self.index.remove(&e.order_id);
                return DeltaKind::Removed;
            }
            return DeltaKind::Reduced;
        }
        // Unknown id: charge anonymous seeded volume at that price if present.
        let book_side = self.side_mut(side);
        let Some(level) = book_side.get_mut(&e.price_ticks) else {
            return DeltaKind::Untracked;
        };
        let Some(pos) = level.orders.iter().position(|o| o.id.is_none()) else {
            return DeltaKind::Untracked;
        };
        let taken = level.reduce_at(pos, e.size);
        if level.total == 0 {
            book_side.remove(&e.price_ticks);
        }
        if taken < e.size {
            DeltaKind::Untracked
        } else {
            DeltaKind::Reduced
        }
    }
}
