//! Fundamental-price proxies built from best quotes and depths, and the
//! diagnostics that measure how efficient each proxy is.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{FrameSet, MarketConfig};
use crate::stats::{
    impact_by_imbalance, lagged, response_function, shifted_response, Acc, LagEntry, LagTable,
    StatsError, TradeSeries,
};

#[derive(Debug, Error, PartialEq)]
pub enum ProxyError {
    #[error("frame {0} has an empty best level")]
    EmptySide(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyVariant {
    /// Squared-volume weights on the rebate-widened quotes.
    SquaredVolume,
    /// Linear-volume weights on the rebate-widened quotes.
    LinearRebate,
    /// Volume-weighted quotes, no rebate.
    Vwap,
    Mid,
}

impl ProxyVariant {
    pub const ALL: [ProxyVariant; 4] = [
        ProxyVariant::SquaredVolume,
        ProxyVariant::LinearRebate,
        ProxyVariant::Vwap,
        ProxyVariant::Mid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProxyVariant::SquaredVolume => "squared",
            ProxyVariant::LinearRebate => "linear",
            ProxyVariant::Vwap => "vwap",
            ProxyVariant::Mid => "mid",
        }
    }

    /// Proxy value in dollars for one book state.
    pub fn value(self, bid: f64, ask: f64, vbid: f64, vask: f64, rebate: f64) -> f64 {
        match self {
            ProxyVariant::SquaredVolume => {
                let (wa, wb) = (vask * vask, vbid * vbid);
                (wa * (bid - rebate) + wb * (ask + rebate)) / (wa + wb)
            }
            ProxyVariant::LinearRebate => (vask * (bid - rebate) + vbid * (ask + rebate)) / (vask + vbid),
            ProxyVariant::Vwap => (vask * bid + vbid * ask) / (vask + vbid),
            ProxyVariant::Mid => (bid + ask) / 2.0,
        }
    }
}

impl std::str::FromStr for ProxyVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProxyVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown proxy variant `{s}` (expected squared|linear|vwap|mid)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxySeries {
    pub variant: ProxyVariant,
    pub market: MarketConfig,
    /// Dollars, one per frame.
    pub values: Vec<f64>,
}

pub fn compute_proxy(frames: &FrameSet, variant: ProxyVariant, cfg: MarketConfig) -> Result<ProxySeries, ProxyError> {
    let mut values = Vec::with_capacity(frames.len());
    for i in 0..frames.len() {
        if frames.vbid[i] == 0 || frames.vask[i] == 0 {
            return Err(ProxyError::EmptySide(i));
        }
        values.push(variant.value(
            frames.bid_dollars(i),
            frames.ask_dollars(i),
            frames.vbid[i] as f64,
            frames.vask[i] as f64,
            cfg.rebate,
        ));
    }
    Ok(ProxySeries {
        variant,
        market: cfg,
        values,
    })
}

/// R^(q)(l) = E[eps_t (q_{t+l} - q_t)] with `proxy` as the price column.
pub fn proxy_response(ts: &TradeSeries, proxy: &[f64], max_lag: usize) -> Result<LagTable, ProxyError> {
    Ok(response_function(&ts.with_price(proxy.to_vec())?, max_lag)?)
}

/// corr(l) = E[dq_{t+l} dq_t] / E[dq_t^2] for l = 1..=max_lag, uncentred.
pub fn return_correlation(ts: &TradeSeries, max_lag: usize) -> Result<LagTable, ProxyError> {
    let cov = crate::stats::midprice_return_covariance(ts, max_lag)?;
    let var = cov.value(0)?;
    if var <= 0.0 {
        return Err(StatsError::ZeroVariance.into());
    }
    Ok(LagTable {
        entries: cov
            .entries
            .iter()
            .filter(|e| e.lag >= 1)
            .map(|e| LagEntry {
                lag: e.lag,
                value: e.value / var,
                se: e.se / var,
                n: e.n,
            })
            .collect(),
    })
}

/// sigma(l) = sqrt(E[(q_{t+l} - q_t)^2] / l), se by the delta method.
pub fn signature_plot(ts: &TradeSeries, lags: &[usize]) -> Result<LagTable, ProxyError> {
    let mut sorted: Vec<usize> = lags.iter().copied().filter(|&l| l > 0).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let q = &ts.price;
    let acc = lagged(&ts.segments, &sorted, |l| l, |t, l| (q[t + l] - q[t]).powi(2));
    let mut entries = Vec::with_capacity(sorted.len());
    for (&l, a) in sorted.iter().zip(&acc) {
        if a.n == 0 {
            return Err(StatsError::InsufficientData { needed: l + 1, have: 0 }.into());
        }
        let m = a.mean();
        let sigma = (m / l as f64).sqrt();
        let se = if m > 0.0 { a.se() / (2.0 * (m * l as f64).sqrt()) } else { 0.0 };
        entries.push(LagEntry {
            lag: l,
            value: sigma,
            se,
            n: a.n,
        });
    }
    Ok(LagTable { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureBin {
    pub bin: usize,
    /// 1 - R^(proxy)(l|iota) / R^(x)(l|iota); `None` for empty or zero-impact bins.
    pub capture: Option<f64>,
    pub mid_impact: Option<f64>,
    pub proxy_impact: Option<f64>,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureReport {
    pub lag: usize,
    pub bins: Vec<CaptureBin>,
    /// Count-weighted over bins with |iota| >= 0.5.
    pub aggregate: Option<f64>,
}

/// Share of the imbalance information absorbed by `proxy`, per |iota| bin.
pub fn imbalance_information_capture(
    ts: &TradeSeries,
    proxy: &[f64],
    lag: usize,
    bins: usize,
) -> Result<CaptureReport, ProxyError> {
    let mid = impact_by_imbalance(ts, &[lag], bins)?;
    let prx = impact_by_imbalance(&ts.with_price(proxy.to_vec())?, &[lag], bins)?;
    let mut out = Vec::with_capacity(bins);
    let (mut wsum, mut nsum) = (0.0, 0u64);
    for b in 0..bins {
        let m = mid.cell(b, lag).expect("lag present");
        let p = prx.cell(b, lag).expect("lag present");
        let capture = match (m.value, p.value) {
            (Some(mv), Some(pv)) if mv != 0.0 => Some(1.0 - pv / mv),
            _ => None,
        };
        let (lo, _) = mid.bin_range(b);
        if let (Some(c), true) = (capture, lo >= 0.5 - 1e-12) {
            wsum += c * m.n as f64;
            nsum += m.n;
        }
        out.push(CaptureBin {
            bin: b,
            capture,
            mid_impact: m.value,
            proxy_impact: p.value,
            n: m.n,
        });
    }
    Ok(CaptureReport {
        lag,
        bins: out,
        aggregate: (nsum > 0).then(|| wsum / nsum as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewsCovarianceEstimate {
    /// E[eps_{t+1} W_t] in dollars.
    pub value: f64,
    pub se: f64,
    pub r1: f64,
    pub r1_shifted: f64,
    pub proxy_r1: f64,
}

/// E[eps_{t+1} W_t] = R(1) + R_1(1) - R^(p)(1), with the proxy standing in for p.
pub fn news_trade_covariance(ts: &TradeSeries, proxy: &[f64]) -> Result<NewsCovarianceEstimate, ProxyError> {
    let pts = ts.with_price(proxy.to_vec())?;
    let r1 = response_function(ts, 1)?.value(1)?;
    let r1_shifted = shifted_response(ts, 1, 1)?.value(1)?;
    let proxy_r1 = response_function(&pts, 1)?.value(1)?;
    let (e, x, p) = (&ts.eps, &ts.price, proxy);
    let z: Acc = lagged(&ts.segments, &[1], |_| 1, |t, _| {
        let dx = x[t + 1] - x[t];
        e[t] * dx + e[t + 1] * dx - e[t] * (p[t + 1] - p[t])
    })[0];
    Ok(NewsCovarianceEstimate {
        value: r1 + r1_shifted - proxy_r1,
        se: z.se(),
        r1,
        r1_shifted,
        proxy_r1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::TransactionFrame;

    fn one_frame(vb: u64, va: u64) -> FrameSet {
        let mut fs = FrameSet::new(MarketConfig::default(), 1e-4);
        fs.push(&TransactionFrame {
            t: 0,
            wall_time_s: 0.0,
            eps: 1,
            bid: 100_000,
            ask: 100_100,
            vbid: vb,
            vask: va,
            traded_size: 1,
            depleted: false,
        });
        fs
    }

    #[test]
    fn worked_squared_volume_example() {
        let fs = one_frame(200, 100);
        let p = compute_proxy(&fs, ProxyVariant::SquaredVolume, MarketConfig::default()).unwrap();
        let hand = (100.0f64.powi(2) * 9.997 + 200.0f64.powi(2) * 10.013) / 50_000.0;
        assert!((p.values[0] - hand).abs() < 1e-12);
        assert!((p.values[0] - 10.0098).abs() < 1e-9);
    }

    #[test]
    fn balanced_book_gives_mid() {
        let fs = one_frame(300, 300);
        for v in ProxyVariant::ALL {
            let p = compute_proxy(&fs, v, MarketConfig::default()).unwrap();
            assert!((p.values[0] - 10.005).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn lopsided_book_leaves_spread() {
        let p = ProxyVariant::SquaredVolume.value(10.0, 10.01, 1e6, 1.0, 0.003);
        assert!(p > 10.01 && (p - 10.013).abs() < 1e-9);
    }

    #[test]
    fn empty_side_rejected() {
        let mut fs = one_frame(1, 1);
        fs.vask[0] = 0;
        assert_eq!(
            compute_proxy(&fs, ProxyVariant::Vwap, MarketConfig::default()),
            Err(ProxyError::EmptySide(0))
        );
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ProxyVariant::ALL {
            assert_eq!(v.name().parse::<ProxyVariant>().unwrap(), v);
        }
        assert!("median".parse::<ProxyVariant>().is_err());
    }

    #[test]
    fn capture_of_mid_is_zero() {
        let mut ts = TradeSeries::single(vec![1.0; 6], vec![1.0, 1.01, 1.0, 1.02, 1.01, 1.03]).unwrap();
        ts.imbalance = vec![0.9, -0.7, 0.95, 0.6, -0.8, 0.1];
        let price = ts.price.clone();
        let c = imbalance_information_capture(&ts, &price, 1, 10).unwrap();
        assert_eq!(c.aggregate, Some(0.0));
    }

    #[test]
    fn zero_variance_rejected() {
        let ts = TradeSeries::single(vec![1.0; 5], vec![2.0; 5]).unwrap();
        assert!(matches!(
            return_correlation(&ts, 1),
            Err(ProxyError::Stats(StatsError::ZeroVariance))
        ));
    }
}
