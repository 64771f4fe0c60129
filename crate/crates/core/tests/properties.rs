//! Invariants over random inputs.

use lobmrr::book::{FrameSet, MarketConfig, TransactionFrame};
use lobmrr::lobster::{filter_session, parse_message_row, Direction, EventType, LobEvent, SessionWindow};
use lobmrr::proxy::{news_trade_covariance, ProxyVariant};
use lobmrr::sim::invert_volumes;
use lobmrr::stats::{mrr_relation_test, response_function, sign_autocorrelation, TradeSeries};
use proptest::prelude::*;

fn event_strategy() -> impl Strategy<Value = LobEvent> {
    (
        0u64..86_400_000_000,
        prop::sample::select(vec![
            EventType::Submission,
            EventType::PartialCancel,
            EventType::Deletion,
            EventType::ExecVisible,
            EventType::ExecHidden,
        ]),
        0i64..1_000_000_000,
        1u64..1_000_000,
        1i64..100_000_000_000,
        any::<bool>(),
    )
        .prop_map(|(us, kind, order_id, size, price_ticks, buy)| LobEvent {
            time_s: us as f64 / 1e6,
            kind,
            order_id,
            size,
            price_ticks,
            direction: if buy { Direction::Buy } else { Direction::Sell },
        })
}

proptest! {
    #[test]
    fn message_rows_round_trip(e in event_strategy()) {
        let row = e.to_row();
        prop_assert_eq!(parse_message_row(&row).unwrap(), e);
    }

    #[test]
    fn session_filter_is_contiguous(mut times in prop::collection::vec(30_000.0f64..60_000.0, 0..200)) {
        times.sort_by(f64::total_cmp);
        let events: Vec<LobEvent> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| LobEvent {
                time_s: t,
                kind: EventType::Submission,
                order_id: i as i64,
                size: 1,
                price_ticks: 1,
                direction: Direction::Buy,
            })
            .collect();
        let w = SessionWindow::default();
        let kept = filter_session(&events, w);
        prop_assert!(kept.iter().all(|e| w.contains(e.time_s)));
        prop_assert_eq!(kept.len(), events.iter().filter(|e| w.contains(e.time_s)).count());
        if let Some(first) = kept.first() {
            let start = events.iter().position(|e| e.order_id == first.order_id).unwrap();
            prop_assert_eq!(&events[start..start + kept.len()], kept.as_slice());
        }
    }

    #[test]
    fn proxies_stay_in_their_bands(bid in 1i64..10_000, width in 1i64..5, vb in 1u64..100_000, va in 1u64..100_000, r in 0.0f64..0.01) {
        let (b, a) = (bid as f64 * 0.01, (bid + width) as f64 * 0.01);
        let (vbf, vaf) = (vb as f64, va as f64);
        let tol = 1e-9;
        for v in [ProxyVariant::SquaredVolume, ProxyVariant::LinearRebate] {
            let p = v.value(b, a, vbf, vaf, r);
            prop_assert!(p >= b - r - tol && p <= a + r + tol);
        }
        let vw = ProxyVariant::Vwap.value(b, a, vbf, vaf, r);
        prop_assert!(vw >= b - tol && vw <= a + tol);
        prop_assert_eq!(ProxyVariant::Mid.value(b, a, vbf, vaf, r), (a + b) / 2.0);
        for v in ProxyVariant::ALL {
            let p = v.value(b, a, vaf, vaf, r);
            prop_assert!((p - (a + b) / 2.0).abs() < tol);
        }
    }

    #[test]
    fn squared_proxy_monotone_in_depths(vb in 1u64..10_000, va in 1u64..10_000, bump in 1u64..1000) {
        let f = |vb: u64, va: u64| ProxyVariant::SquaredVolume.value(10.0, 10.01, vb as f64, va as f64, 0.003);
        prop_assert!(f(vb + bump, va) > f(vb, va));
        prop_assert!(f(vb, va + bump) < f(vb, va));
    }

    #[test]
    fn zero_rebate_linear_equals_vwap(vb in 1u64..10_000, va in 1u64..10_000) {
        let a = ProxyVariant::LinearRebate.value(10.0, 10.01, vb as f64, va as f64, 0.0);
        let b = ProxyVariant::Vwap.value(10.0, 10.01, vb as f64, va as f64, 0.0);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn volume_inversion_recovers_price(frac in 0.01f64..0.99, scale in 1e5f64..1e7) {
        let (b, a, r) = (100.0, 100.01, 0.003);
        let p = b - r + frac * (a - b + 2.0 * r);
        let (vb, va) = invert_volumes(p, b, a, r, scale);
        let hat = ProxyVariant::SquaredVolume.value(b, a, vb as f64, va as f64, r);
        prop_assert!((hat - p).abs() < 1e-4, "{} vs {}", hat, p);
    }

    #[test]
    fn frame_csv_round_trip(rows in prop::collection::vec((any::<bool>(), 1i64..1_000_000, 1i64..50, 1u64..1_000_000, 1u64..1_000_000, 1u64..10_000, any::<bool>(), 0.0f64..86_400.0), 1..100)) {
        let mut fs = FrameSet::new(MarketConfig::default(), 1e-4);
        for (t, (buy, bid, w, vb, va, size, dep, wall)) in rows.into_iter().enumerate() {
            fs.push(&TransactionFrame { t, wall_time_s: wall, eps: if buy { 1 } else { -1 }, bid, ask: bid + w, vbid: vb, vask: va, traded_size: size, depleted: dep });
        }
        let mut buf = Vec::new();
        fs.write_csv(&mut buf).unwrap();
        prop_assert_eq!(FrameSet::read_csv(buf.as_slice()).unwrap(), fs.clone());
        prop_assert_eq!(FrameSet::from_json(&fs.to_json().unwrap()).unwrap(), fs);
    }

    #[test]
    fn mrr_relation_is_scale_free(signs in prop::collection::vec(any::<bool>(), 200..400), steps in prop::collection::vec(-3i32..=3, 400), k in 0.01f64..100.0) {
        let n = signs.len();
        let eps: Vec<f64> = signs.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t] = x[t - 1] + steps[t] as f64 + 0.5 * eps[t - 1];
        }
        let ts = TradeSeries::single(eps.clone(), x.clone()).unwrap();
        let scaled = TradeSeries::single(eps, x.iter().map(|v| v * k).collect()).unwrap();
        let c = sign_autocorrelation(&ts, 5).unwrap();
        let lags = [2, 3, 5];
        let (Ok(m1), Ok(m2)) = (
            mrr_relation_test(&c, &response_function(&ts, 5).unwrap(), &lags),
            mrr_relation_test(&c, &response_function(&scaled, 5).unwrap(), &lags),
        ) else { return Ok(()); };
        for (a, b) in m1.rows.iter().zip(&m2.rows) {
            prop_assert!((a.ratio - b.ratio).abs() <= 1e-9 * a.ratio.abs().max(1.0));
            prop_assert!((b.rescaled - k * a.rescaled).abs() <= 1e-9 * (k * a.rescaled).abs().max(1e-12));
        }
    }

    #[test]
    fn news_covariance_is_sum_of_components(signs in prop::collection::vec(any::<bool>(), 3..200), seed in any::<u64>()) {
        let n = signs.len();
        let eps: Vec<f64> = signs.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let x: Vec<f64> = (0..n).map(|t| ((t as u64).wrapping_mul(seed) % 97) as f64 * 0.01).collect();
        let p: Vec<f64> = (0..n).map(|t| ((t as u64).wrapping_add(seed) % 89) as f64 * 0.01).collect();
        let ts = TradeSeries::single(eps, x).unwrap();
        let est = news_trade_covariance(&ts, &p).unwrap();
        prop_assert_eq!(est.value, est.r1 + est.r1_shifted - est.proxy_r1);
    }

    #[test]
    fn frame_imbalance_strictly_inside_unit_interval(vb in 1u64..u32::MAX as u64, va in 1u64..u32::MAX as u64) {
        let f = TransactionFrame { t: 0, wall_time_s: 0.0, eps: 1, bid: 1, ask: 2, vbid: vb, vask: va, traded_size: 1, depleted: false };
        let iota = f.imbalance();
        prop_assert!(iota.abs() < 1.0);
        prop_assert_eq!(iota, (vb as f64 - va as f64) / (vb as f64 + va as f64));
    }
}
