//! Reference writer for LOBSTER-style message/snapshot pairs.
//!
//! Random order flow is played against a small self-contained book and every
//! message row is paired with the resulting top-K snapshot, so replaying the
//! messages must reproduce each snapshot row exactly.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{BookSnapshot, Direction, EventType, LobEvent, Quote};

#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_events: usize,
    pub levels: usize,
    pub start_time_s: f64,
    /// Mean wall-clock gap between messages.
    pub mean_gap_s: f64,
    /// Initial best bid, price units.
    pub initial_bid: i64,
    /// Tick in price units.
    pub tick: i64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_events: 20_000,
            levels: 5,
            start_time_s: 34_200.0,
            mean_gap_s: 1.17,
            initial_bid: 2_238_100,
            tick: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDay {
    pub events: Vec<LobEvent>,
    pub snapshots: Vec<BookSnapshot>,
}

#[derive(Default)]
struct RefBook {
    // price -> FIFO of (id, size)
    bids: BTreeMap<i64, Vec<(i64, u64)>>,
    asks: BTreeMap<i64, Vec<(i64, u64)>>,
}

impl RefBook {
    fn side(&mut self, d: Direction) -> &mut BTreeMap<i64, Vec<(i64, u64)>> {
        match d {
            Direction::Buy => &mut self.bids,
            Direction::Sell => &mut self.asks,
        }
    }

    fn snapshot(&self, k: usize) -> BookSnapshot {
        let lvl = |(p, q): (&i64, &Vec<(i64, u64)>)| {
            Some(Quote {
                price_ticks: *p,
                size: q.iter().map(|o| o.1).sum(),
            })
        };
        let mut asks: Vec<_> = self.asks.iter().take(k).map(lvl).collect();
        let mut bids: Vec<_> = self.bids.iter().rev().take(k).map(lvl).collect();
        asks.resize(k, None);
        bids.resize(k, None);
        BookSnapshot { asks, bids }
    }

    fn orders(&self) -> Vec<(Direction, i64, i64, u64)> {
        let mut v = Vec::new();
        for (d, book) in [(Direction::Buy, &self.bids), (Direction::Sell, &self.asks)] {
            for (p, q) in book {
                for &(id, s) in q {
                    v.push((d, id, *p, s));
                }
            }
        }
        v
    }
}

/// Generate a message stream and its aligned snapshots.
pub fn generate(cfg: &SyntheticConfig) -> SyntheticDay {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gap = Exp::new(1.0 / cfg.mean_gap_s).expect("positive gap");
    let mut book = RefBook::default();
    let mut events = Vec::with_capacity(cfg.n_events);
    let mut snapshots = Vec::with_capacity(cfg.n_events);
    let mut time = cfg.start_time_s;
    let mut next_id = 1_000_i64;
    let tick = cfg.tick;

    let mut emit = |book: &RefBook, e: LobEvent, events: &mut Vec<LobEvent>| {
        events.push(e);
        snapshots.push(book.snapshot(cfg.levels));
    };

    // Opening book: a few levels each side.
    for lvl in 0..4 {
        for (d, price) in [
            (Direction::Buy, cfg.initial_bid - lvl * tick),
            (Direction::Sell, cfg.initial_bid + tick + lvl * tick),
        ] {
            let size = 100 * rng.random_range(1..=5u64);
            next_id += 1;
            book.side(d).entry(price).or_default().push((next_id, size));
            emit(&book, submission(time, next_id, size, price, d), &mut events);
        }
    }

    while events.len() < cfg.n_events {
        time = round_us(time + gap.sample(&mut rng));
        let bb = *book.bids.keys().next_back().expect("bid side kept non-empty");
        let ba = *book.asks.keys().next().expect("ask side kept non-empty");
        let u: f64 = rng.random();
        if u < 0.45 || book.bids.len() < 2 || book.asks.len() < 2 {
            // Limit order: one tick inside the spread, at the best, or up to 4 ticks behind.
            let d = if book.bids.len() < 2 {
                Direction::Buy
            } else if book.asks.len() < 2 {
                Direction::Sell
            } else if rng.random::<bool>() {
                Direction::Buy
            } else {
                Direction::Sell
            };
            // A wide spread is mostly refilled from inside, keeping it near one tick.
            let offset = if ba - bb > tick && rng.random::<f64>() < 0.8 {
                -1
            } else {
                rng.random_range(0..=4i64)
            };
            let price = match d {
                Direction::Buy => (bb - offset * tick).min(ba - tick),
                Direction::Sell => (ba + offset * tick).max(bb + tick),
            };
            let size = rng.random_range(1..=300u64);
            next_id += 1;
            book.side(d).entry(price).or_default().push((next_id, size));
            emit(&book, submission(time, next_id, size, price, d), &mut events);
        } else if u < 0.75 {
            // Cancel a random resting order, fully or partially.
            let all = book.orders();
            let (d, id, price, size) = all[rng.random_range(0..all.len())];
            let full = size == 1 || rng.random::<f64>() < 0.6;
            let cut = if full { size } else { rng.random_range(1..size) };
            let level = book.side(d).get_mut(&price).unwrap();
            let pos = level.iter().position(|o| o.0 == id).unwrap();
            let kind = if full {
                level.remove(pos);
                EventType::Deletion
            } else {
                level[pos].1 -= cut;
                EventType::PartialCancel
            };
            if level.is_empty() {
                book.side(d).remove(&price);
            }
            emit(
                &book,
                LobEvent {
                    time_s: time,
                    kind,
                    order_id: id,
                    size: cut,
                    price_ticks: price,
                    direction: d,
                },
                &mut events,
            );
        } else if u < 0.97 {
            // Market order walking the opposite queue; one row per resting order hit.
            let buy = rng.random::<bool>();
            let resting = if buy { Direction::Sell } else { Direction::Buy };
            let keep_level = {
                let side = book.side(resting);
                let last = if buy { *side.keys().next_back().unwrap() } else { *side.keys().next().unwrap() };
                last
            };
            let mut want = rng.random_range(1..=400u64);
            while want > 0 && events.len() < cfg.n_events {
                let side = book.side(resting);
                let price = if buy { *side.keys().next().unwrap() } else { *side.keys().next_back().unwrap() };
                if price == keep_level {
                    break;
                }
                let level = side.get_mut(&price).unwrap();
                let (id, size) = level[0];
                let fill = want.min(size);
                want -= fill;
                if fill == size {
                    level.remove(0);
                } else {
                    level[0].1 -= fill;
                }
                if level.is_empty() {
                    side.remove(&price);
                }
                emit(
                    &book,
                    LobEvent {
                        time_s: time,
                        kind: EventType::ExecVisible,
                        order_id: id,
                        size: fill,
                        price_ticks: price,
                        direction: resting,
                    },
                    &mut events,
                );
            }
        } else {
            // Hidden execution somewhere inside the spread.
            let price = if ba - bb > tick { bb + tick } else { bb };
            let d = if rng.random::<bool>() { Direction::Buy } else { Direction::Sell };
            emit(
                &book,
                LobEvent {
                    time_s: time,
                    kind: EventType::ExecHidden,
                    order_id: 0,
                    size: rng.random_range(1..=100u64),
                    price_ticks: price,
                    direction: d,
                },
                &mut events,
            );
        }
    }
    SyntheticDay { events, snapshots }
}

fn submission(time_s: f64, id: i64, size: u64, price: i64, d: Direction) -> LobEvent {
    LobEvent {
        time_s,
        kind: EventType::Submission,
        order_id: id,
        size,
        price_ticks: price,
        direction: d,
    }
}

fn round_us(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_aligned() {
        let cfg = SyntheticConfig {
            n_events: 2_000,
            ..Default::default()
        };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.events, b.events);
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.events.len(), a.snapshots.len());
        assert!(a.snapshots.iter().all(|s| s.is_consistent()));
        assert!(a.events.windows(2).all(|w| w[0].time_s <= w[1].time_s));
    }

    #[test]
    fn contains_walking_market_orders() {
        let day = generate(&SyntheticConfig {
            n_events: 5_000,
            ..Default::default()
        });
        let shared = day
            .events
            .windows(2)
            .filter(|w| w[0].kind == EventType::ExecVisible && w[1].kind == EventType::ExecVisible && w[0].time_s == w[1].time_s)
            .count();
        assert!(shared > 0);
    }
}
