//! Event-stream replay: frames, depletions and snapshot reconciliation.

use serde::{Deserialize, Serialize};

use super::{BookError, BookState, DeltaKind, FrameSet, MarketConfig, Side, TransactionFrame};
use crate::lobster::{BookSnapshot, EventType, LobEvent, Quote, SessionWindow, LOBSTER_PRICE_SCALE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DepletionCause {
    Execution,
    Cancellation,
}

/// A best-level queue emptied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepletionEvent {
    /// Frame index of the depleting trade, or of the next frame for cancellations.
    pub t: usize,
    /// Segment that `t` refers to.
    pub segment: usize,
    /// Index into the event stream, when known.
    pub event_index: Option<usize>,
    pub side: Side,
    pub cause: DepletionCause,
    /// Depth of the level just before the emptying event.
    pub removed: u64,
    /// Mid before the update, in price units.
    pub pre_mid: f64,
    pub post_mid: Option<f64>,
}

impl DepletionEvent {
    /// +1 when the ask side emptied (mid pushed up), -1 for the bid.
    pub fn direction(&self) -> f64 {
        match self.side {
            Side::Ask => 1.0,
            Side::Bid => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDiff {
    /// 1-based level.
    pub level: usize,
    pub side: Side,
    pub expected: Option<Quote>,
    pub found: Option<Quote>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReconcileReport {
    pub pass: bool,
    pub diffs: Vec<LevelDiff>,
}

/// Compare the first `levels` levels of the book with a snapshot row.
pub fn reconcile_levels(state: &BookState, snap: &BookSnapshot, levels: usize) -> ReconcileReport {
    let k = levels.min(snap.levels());
    let (asks, bids) = state.top_levels(k);
    let mut diffs = Vec::new();
    for (side, book, expected) in [(Side::Ask, &asks, &snap.asks), (Side::Bid, &bids, &snap.bids)] {
        for (lvl, &want) in expected.iter().take(k).enumerate() {
            let found = book.get(lvl).copied();
            if found != want {
                diffs.push(LevelDiff {
                    level: lvl + 1,
                    side,
                    expected: want,
                    found,
                });
            }
        }
    }
    ReconcileReport {
        pass: diffs.is_empty(),
        diffs,
    }
}

pub fn reconcile(state: &BookState, snap: &BookSnapshot) -> ReconcileReport {
    reconcile_levels(state, snap, snap.levels())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReconstructOptions {
    /// Only trades inside the window become frames; the book is still built
    /// from every event.
    pub window: Option<SessionWindow>,
    /// Seed the book from snapshot row 0 instead of replaying event 0.
    pub seed_from_first_snapshot: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionStats {
    pub events: usize,
    pub visible_executions: usize,
    pub executed_volume: u64,
    pub hidden_executions: usize,
    pub cross_trades: usize,
    pub halts: usize,
    pub untracked: usize,
    pub rejected: usize,
    pub one_sided_trades: usize,
    pub reconciled_rows: usize,
    pub reconcile_failures: usize,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub frames: FrameSet,
    pub depletions: Vec<DepletionEvent>,
    pub stats: ReconstructionStats,
    /// First failing rows (event index, report), capped.
    pub failures: Vec<(usize, ReconcileReport)>,
    pub book: BookState,
}

const MAX_STORED_FAILURES: usize = 32;

struct OpenTrade {
    time_s: f64,
    eps: i8,
    row: Option<usize>,
}

/// Replay `events`, optionally reconciling against aligned snapshot rows.
pub fn reconstruct(
    events: &[LobEvent],
    snapshots: Option<&[BookSnapshot]>,
    cfg: MarketConfig,
    opts: ReconstructOptions,
) -> Result<Reconstruction, BookError> {
    cfg.validate()?;
    let mut frames = FrameSet::new(cfg, LOBSTER_PRICE_SCALE);
    let mut depletions = Vec::new();
    let mut stats = ReconstructionStats::default();
    let mut failures = Vec::new();
    let mut book = BookState::new();
    let mut open: Option<OpenTrade> = None;
    let in_window = |t: f64| opts.window.is_none_or(|w| w.contains(t));
    let levels = if cfg.levels_tracked == 0 { usize::MAX } else { cfg.levels_tracked };

    let mut start = 0;
    if opts.seed_from_first_snapshot {
        if let Some(first) = snapshots.and_then(|s| s.first()) {
            book = BookState::from_snapshot(first);
            start = 1;
            stats.events += 1;
        }
    }

    for (i, e) in events.iter().enumerate().skip(start) {
        stats.events += 1;
        match e.kind {
            EventType::Halt => {
                open = None;
                stats.halts += 1;
                frames.start_segment();
            }
            EventType::ExecHidden => stats.hidden_executions += 1,
            EventType::CrossTrade => stats.cross_trades += 1,
            EventType::ExecVisible => {
                stats.visible_executions += 1;
                stats.executed_volume += e.size;
                let eps = -e.direction.sign();
                let continuing = open.as_ref().is_some_and(|o| o.time_s == e.time_s && o.eps == eps);
                if !continuing {
                    let mut row = None;
                    if in_window(e.time_s) {
                        match (book.best_bid(), book.best_ask()) {
                            (Some(bid), Some(ask)) => {
                                row = Some(frames.len());
                                frames.push(&TransactionFrame {
                                    t: 0,
                                    wall_time_s: e.time_s,
                                    eps,
                                    bid,
                                    ask,
                                    vbid: book.best_bid_depth(),
                                    vask: book.best_ask_depth(),
                                    traded_size: 0,
                                    depleted: false,
                                });
                            }
                            _ => stats.one_sided_trades += 1,
                        }
                    }
                    open = Some(OpenTrade {
                        time_s: e.time_s,
                        eps,
                        row,
                    });
                }
                let row = open.as_ref().and_then(|o| o.row);
                let pre_mid = book.mid_x2().map(|m| m as f64 / 2.0);
                let pre_depth = side_depth(&book, e.direction.into());
                let delta = book.apply_event(e)?;
                if delta.kind == DeltaKind::Untracked {
                    stats.untracked += 1;
                }
                if let Some(r) = row {
                    frames.size[r] += e.size;
                    if let (Some(side), Some(pm)) = (delta.depleted_best, pre_mid) {
                        frames.depleted[r] = true;
                        depletions.push(DepletionEvent {
                            t: r,
                            segment: frames.segment_of(r),
                            event_index: Some(i),
                            side,
                            cause: DepletionCause::Execution,
                            removed: pre_depth,
                            pre_mid: pm,
                            post_mid: book.mid_x2().map(|m| m as f64 / 2.0),
                        });
                    }
                }
            }
            EventType::Submission | EventType::PartialCancel | EventType::Deletion => {
                open = None;
                let pre_mid = book.mid_x2().map(|m| m as f64 / 2.0);
                let pre_depth = side_depth(&book, e.direction.into());
                match book.apply_event(e) {
                    Ok(delta) => {
                        if delta.kind == DeltaKind::Untracked {
                            stats.untracked += 1;
                        }
                        if let (Some(side), Some(pm)) = (delta.depleted_best, pre_mid) {
                            if in_window(e.time_s) {
                                let t = frames.len();
                                depletions.push(DepletionEvent {
                                    t,
                                    segment: frames.segment_of(t),
                                    event_index: Some(i),
                                    side,
                                    cause: DepletionCause::Cancellation,
                                    removed: pre_depth,
                                    pre_mid: pm,
                                    post_mid: book.mid_x2().map(|m| m as f64 / 2.0),
                                });
                            }
                        }
                    }
                    Err(err) => {
                        log::warn!("event {i}: {err}; skipped");
                        stats.rejected += 1;
                    }
                }
            }
        }
        if let Some(snap) = snapshots.and_then(|s| s.get(i)) {
            stats.reconciled_rows += 1;
            let rep = reconcile_levels(&book, snap, levels);
            if !rep.pass {
                stats.reconcile_failures += 1;
                if failures.len() < MAX_STORED_FAILURES {
                    failures.push((i, rep));
                }
            }
        }
    }
    Ok(Reconstruction {
        frames,
        depletions,
        stats,
        failures,
        book,
    })
}

fn side_depth(book: &BookState, side: Side) -> u64 {
    match side {
        Side::Bid => book.best_bid_depth(),
        Side::Ask => book.best_ask_depth(),
    }
}

/// Transaction frames for a whole event stream, no session filtering.
pub fn extract_transactions(events: &[LobEvent], cfg: MarketConfig) -> Result<FrameSet, BookError> {
    Ok(reconstruct(events, None, cfg, ReconstructOptions::default())?.frames)
}

/// Best-level depletions, pooled over executions and cancellations.
pub fn detect_depletions(
    events: &[LobEvent],
    cfg: MarketConfig,
    opts: ReconstructOptions,
) -> Result<Vec<DepletionEvent>, BookError> {
    Ok(reconstruct(events, None, cfg, opts)?.depletions)
}

/// Depletions implied by the `depleted` column of a frame set. The direction
/// is read from the next mid move, falling back on the trade sign.
pub fn depletions_from_frames(frames: &FrameSet) -> Vec<DepletionEvent> {
    let mut out = Vec::new();
    for seg in frames.segments() {
        for t in seg.clone() {
            if !frames.depleted[t] {
                continue;
            }
            let pre = (frames.bid[t] + frames.ask[t]) as f64 / 2.0;
            let post = (t + 1 < seg.end).then(|| (frames.bid[t + 1] + frames.ask[t + 1]) as f64 / 2.0);
            let up = match post {
                Some(p) if p != pre => p > pre,
                _ => frames.eps[t] > 0,
            };
            out.push(DepletionEvent {
                t,
                segment: frames.segment_of(t),
                event_index: None,
                side: if up { Side::Ask } else { Side::Bid },
                cause: DepletionCause::Execution,
                removed: if up { frames.vask[t] } else { frames.vbid[t] },
                pre_mid: pre,
                post_mid: post,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lobster::{parse_message_row, parse_snapshot_row, Direction};

    fn events(rows: &[&str]) -> Vec<LobEvent> {
        rows.iter().map(|r| parse_message_row(r).unwrap()).collect()
    }

    fn base_rows() -> Vec<&'static str> {
        vec![
            "40000.0,1,1,200,2238100,1",
            "40000.1,1,2,50,2238200,-1",
            "40000.2,1,3,30,2238200,-1",
            "40000.3,1,4,20,2238200,-1",
            "40000.4,1,5,40,2238300,-1",
        ]
    }

    #[test]
    fn walking_order_is_one_frame() {
        let mut rows = base_rows();
        rows.extend(["40001.0,4,2,50,2238200,-1", "40001.0,4,3,30,2238200,-1", "40001.0,4,4,20,2238200,-1"]);
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), ReconstructOptions::default()).unwrap();
        assert_eq!(r.frames.len(), 1);
        let f = r.frames.frame(0);
        assert_eq!(f.eps, 1);
        assert_eq!(f.traded_size, 100);
        assert_eq!((f.bid, f.ask, f.vbid, f.vask), (2238100, 2238200, 200, 100));
        assert!(f.depleted);
        assert_eq!(r.depletions.len(), 1);
        assert_eq!(r.depletions[0].side, Side::Ask);
        assert_eq!(r.depletions[0].cause, DepletionCause::Execution);
        assert_eq!(r.depletions[0].removed, 20);
        assert_eq!(r.depletions[0].post_mid, Some(2238200.0));
    }

    #[test]
    fn distinct_timestamps_make_two_frames() {
        let mut rows = base_rows();
        rows.extend(["40001.0,4,2,50,2238200,-1", "40002.0,4,3,30,2238200,-1"]);
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), ReconstructOptions::default()).unwrap();
        assert_eq!(r.frames.len(), 2);
        assert_eq!(r.frames.vask[1], 50);
        assert!(!r.frames.depleted[0] && !r.frames.depleted[1]);
    }

    #[test]
    fn resting_buy_execution_is_seller_initiated() {
        let mut rows = base_rows();
        rows.push("40001.0,4,1,10,2238100,1");
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), ReconstructOptions::default()).unwrap();
        assert_eq!(r.frames.eps, vec![-1]);
        assert!(r.depletions.is_empty());
    }

    #[test]
    fn cancel_of_last_bid_is_cancellation_depletion() {
        let mut rows = base_rows();
        rows.push("40001.0,3,1,200,2238100,1");
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), ReconstructOptions::default()).unwrap();
        assert_eq!(r.depletions.len(), 1);
        assert_eq!(r.depletions[0].side, Side::Bid);
        assert_eq!(r.depletions[0].cause, DepletionCause::Cancellation);
        assert_eq!(r.depletions[0].post_mid, None);
    }

    #[test]
    fn partial_execution_leaving_one_share_is_no_depletion() {
        let mut rows = base_rows();
        rows.push("40001.0,4,1,199,2238100,1");
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), ReconstructOptions::default()).unwrap();
        assert!(r.depletions.is_empty());
        assert_eq!(r.book.best_bid_depth(), 1);
    }

    #[test]
    fn halt_starts_new_segment() {
        let mut rows = base_rows();
        rows.extend(["40001.0,4,1,10,2238100,1", "40002.0,7,0,0,-1,0", "40003.0,4,1,10,2238100,1"]);
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), ReconstructOptions::default()).unwrap();
        assert_eq!(r.frames.segments(), vec![0..1, 1..2]);
        assert_eq!(r.frames.frame(1).t, 0);
    }

    #[test]
    fn window_applies_to_frames_only() {
        let mut rows = base_rows();
        rows.extend(["40001.0,4,1,10,2238100,1", "40005.0,4,1,10,2238100,1"]);
        let opts = ReconstructOptions {
            window: Some(SessionWindow::new(40002.0, 41000.0).unwrap()),
            ..Default::default()
        };
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), opts).unwrap();
        assert_eq!(r.frames.len(), 1);
        assert_eq!(r.frames.vbid[0], 190);
    }

    #[test]
    fn hidden_executions_do_not_touch_book() {
        let mut rows = base_rows();
        rows.push("40001.0,5,0,100,2238150,-1");
        let r = reconstruct(&events(&rows), None, MarketConfig::default(), ReconstructOptions::default()).unwrap();
        assert!(r.frames.is_empty());
        assert_eq!(r.stats.hidden_executions, 1);
        assert_eq!(r.book.order_count(), 5);
    }

    #[test]
    fn reconcile_examples() {
        let snap = parse_snapshot_row("2238200,150,2238100,200", 1, 0).unwrap();
        let book = BookState::from_snapshot(&snap);
        assert!(reconcile(&book, &snap).pass);
        let off = parse_snapshot_row("2238200,151,2238100,200", 1, 0).unwrap();
        let rep = reconcile(&book, &off);
        assert!(!rep.pass);
        assert_eq!(rep.diffs.len(), 1);
        assert_eq!((rep.diffs[0].level, rep.diffs[0].side), (1, Side::Ask));
        let empty = parse_snapshot_row("9999999999,0,-9999999999,0", 1, 0).unwrap();
        assert!(reconcile(&BookState::new(), &empty).pass);
    }

    #[test]
    fn seeded_replay_reconciles() {
        let snaps: Vec<_> = ["2238200,150,2238100,200", "2238200,100,2238100,200"]
            .iter()
            .enumerate()
            .map(|(i, r)| parse_snapshot_row(r, 1, i).unwrap())
            .collect();
        let ev = vec![
            LobEvent {
                time_s: 1.0,
                kind: EventType::Submission,
                order_id: 9,
                size: 1,
                price_ticks: 2238200,
                direction: Direction::Sell,
            },
            parse_message_row("2.0,4,77,50,2238200,-1").unwrap(),
        ];
        let opts = ReconstructOptions {
            seed_from_first_snapshot: true,
            ..Default::default()
        };
        let r = reconstruct(&ev, Some(&snaps), MarketConfig::default(), opts).unwrap();
        assert_eq!(r.stats.reconcile_failures, 0);
        assert_eq!(r.stats.reconciled_rows, 1);
        assert_eq!(r.frames.len(), 1);
    }
}
