//! Lagged order-flow and price statistics in transaction time.
//!
//! Every estimator averages a per-`t` product over all valid `t` of every
//! segment; pairs never straddle a segment boundary. Sums run in increasing
//! `t`, so the results match a naive double loop bit for bit.

mod model;

pub use model::{
    covariance_identity_test, depletion_impact, estimate_g, impact_by_imbalance, implied_spread_check,
    mrr_relation_test, CovIdentityRow, CovarianceIdentity, DepletionImpact, GEstimate, GMethod, ImbalanceCell,
    ImbalanceImpactGrid, ImpactEstimate, ImpliedSpread, MrrRelation, MrrRow, DEFAULT_LAG_STAR,
    PLATEAU_FLATNESS_TOLERANCE,
};

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::FrameSet;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("insufficient data: need {needed} observations, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("sign autocorrelation C({lag}) = {c} is too close to 1")]
    DegenerateAutocorrelation { lag: usize, c: f64 },
    #[error("return variance is zero")]
    ZeroVariance,
    #[error("lag {0} missing from input table")]
    MissingLag(usize),
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no input")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagEntry {
    pub lag: usize,
    pub value: f64,
    pub se: f64,
    pub n: u64,
}

/// Estimator output keyed by lag, ascending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LagTable {
    pub entries: Vec<LagEntry>,
}

impl LagTable {
    pub fn get(&self, lag: usize) -> Option<&LagEntry> {
        self.entries
            .binary_search_by_key(&lag, |e| e.lag)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn value(&self, lag: usize) -> Result<f64, StatsError> {
        self.get(lag).map(|e| e.value).ok_or(StatsError::MissingLag(lag))
    }

    pub fn lags(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.lag)
    }

    pub fn max_lag(&self) -> Option<usize> {
        self.entries.last().map(|e| e.lag)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lag,value,se,n")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{}", e.lag, e.value, e.se, e.n)?;
        }
        Ok(())
    }
}

/// Signs and a price path in transaction time, split into segments.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeSeries {
    pub eps: Vec<f64>,
    /// Dollars.
    pub price: Vec<f64>,
    pub imbalance: Vec<f64>,
    pub segments: Vec<Range<usize>>,
}

impl TradeSeries {
    /// Trade signs with the pre-trade mid as price.
    pub fn from_frames(frames: &FrameSet) -> Self {
        Self {
            eps: frames.eps_f64(),
            price: frames.mids(),
            imbalance: (0..frames.len()).map(|i| frames.imbalance(i)).collect(),
            segments: frames.segments(),
        }
    }

    /// Same signs and segmentation, a different price column.
    pub fn with_price(&self, price: Vec<f64>) -> Result<Self, StatsError> {
        if price.len() != self.eps.len() {
            return Err(StatsError::LengthMismatch(price.len(), self.eps.len()));
        }
        Ok(Self {
            eps: self.eps.clone(),
            price,
            imbalance: self.imbalance.clone(),
            segments: self.segments.clone(),
        })
    }

    /// One segment, no imbalance.
    pub fn single(eps: Vec<f64>, price: Vec<f64>) -> Result<Self, StatsError> {
        if price.len() != eps.len() {
            return Err(StatsError::LengthMismatch(price.len(), eps.len()));
        }
        let n = eps.len();
        Ok(Self {
            imbalance: vec![0.0; n],
            eps,
            price,
            segments: if n > 0 { std::iter::once(0..n).collect() } else { Vec::new() },
        })
    }

    pub fn from_signs(eps: &[i8]) -> Self {
        let eps: Vec<f64> = eps.iter().map(|&e| e as f64).collect();
        Self::single(eps.clone(), vec![0.0; eps.len()]).expect("equal lengths")
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    fn longest_segment(&self) -> usize {
        self.segments.iter().map(|s| s.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc {
    pub sum: f64,
    pub sumsq: f64,
    pub n: u64,
}

impl Acc {
    #[inline]
    pub fn add(&mut self, v: f64) {
        self.sum += v;
        self.sumsq += v * v;
        self.n += 1;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean under i.i.d. products.
    pub fn se(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    pub fn entry(&self, lag: usize) -> LagEntry {
        LagEntry {
            lag,
            value: self.mean(),
            se: self.se(),
            n: self.n,
        }
    }
}

/// Accumulate `f(t, lag)` for every `t` with `t + reach(lag)` inside the segment.
/// `lags` must be ascending and `reach` non-decreasing in the lag.
pub(crate) fn lagged<R, F>(segments: &[Range<usize>], lags: &[usize], reach: R, mut f: F) -> Vec<Acc>
where
    R: Fn(usize) -> usize,
    F: FnMut(usize, usize) -> f64,
{
    let reach: Vec<usize> = lags.iter().map(|&l| reach(l)).collect();
    let mut acc = vec![Acc::default(); lags.len()];
    for seg in segments {
        for t in seg.clone() {
            let room = seg.end - 1 - t;
            for (j, &l) in lags.iter().enumerate() {
                if reach[j] > room {
                    break;
                }
                acc[j].add(f(t, l));
            }
        }
    }
    acc
}

fn table(lags: &[usize], acc: &[Acc]) -> Result<LagTable, StatsError> {
    let mut entries = Vec::with_capacity(lags.len());
    for (&l, a) in lags.iter().zip(acc) {
        if a.n == 0 {
            return Err(StatsError::InsufficientData {
                needed: l + 1,
                have: 0,
            });
        }
        entries.push(a.entry(l));
    }
    Ok(LagTable { entries })
}

fn need(ts: &TradeSeries, needed: usize) -> Result<(), StatsError> {
    let have = ts.longest_segment();
    if have < needed {
        return Err(StatsError::InsufficientData { needed, have });
    }
    Ok(())
}

/// C(l) = E[eps_{t+l} eps_t] for l = 0..=max_lag.
pub fn sign_autocorrelation(ts: &TradeSeries, max_lag: usize) -> Result<LagTable, StatsError> {
    need(ts, max_lag + 1)?;
    let lags: Vec<usize> = (0..=max_lag).collect();
    let e = &ts.eps;
    let acc = lagged(&ts.segments, &lags, |l| l, |t, l| e[t + l] * e[t]);
    table(&lags, &acc)
}

/// R(l) = E[eps_t (x_{t+l} - x_t)] for l = 1..=max_lag.
pub fn response_function(ts: &TradeSeries, max_lag: usize) -> Result<LagTable, StatsError> {
    shifted_response(ts, 0, max_lag)
}

/// R_k(l) = E[eps_{t+k} (x_{t+l} - x_t)] for l = 1..=max_lag.
pub fn shifted_response(ts: &TradeSeries, k: usize, max_lag: usize) -> Result<LagTable, StatsError> {
    need(ts, max_lag.max(k) + 1)?;
    let lags: Vec<usize> = (1..=max_lag).collect();
    let (e, x) = (&ts.eps, &ts.price);
    let acc = lagged(&ts.segments, &lags, |l| l.max(k), |t, l| e[t + k] * (x[t + l] - x[t]));
    table(&lags, &acc)
}

/// cov(l) = E[(x_{t+1+l} - x_{t+l})(x_{t+1} - x_t)] for l = 0..=max_lag (uncentred).
pub fn midprice_return_covariance(ts: &TradeSeries, max_lag: usize) -> Result<LagTable, StatsError> {
    need(ts, max_lag + 2)?;
    let lags: Vec<usize> = (0..=max_lag).collect();
    let x = &ts.price;
    let acc = lagged(&ts.segments, &lags, |l| l + 1, |t, l| (x[t + 1 + l] - x[t + l]) * (x[t + 1] - x[t]));
    table(&lags, &acc)
}

/// Equal-weight average of per-day tables over the lags common to all days.
/// With two or more days the se is the across-day standard deviation over
/// sqrt(days); a single day keeps its own se.
pub fn pool_days(days: &[LagTable]) -> Result<LagTable, StatsError> {
    let first = days.first().ok_or(StatsError::EmptyInput)?;
    if days.len() == 1 {
        return Ok(first.clone());
    }
    let d = days.len() as f64;
    let mut entries = Vec::new();
    for lag in first.lags() {
        let vals: Option<Vec<&LagEntry>> = days.iter().map(|t| t.get(lag)).collect();
        let Some(vals) = vals else { continue };
        let mean = vals.iter().map(|e| e.value).sum::<f64>() / d;
        let var = vals.iter().map(|e| (e.value - mean).powi(2)).sum::<f64>() / (d - 1.0);
        entries.push(LagEntry {
            lag,
            value: mean,
            se: (var / d).sqrt(),
            n: vals.iter().map(|e| e.n).sum(),
        });
    }
    Ok(LagTable { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signs(v: &[i8]) -> TradeSeries {
        TradeSeries::from_signs(v)
    }

    #[test]
    fn constant_signs_have_unit_autocorrelation() {
        let c = sign_autocorrelation(&signs(&[1; 20]), 5).unwrap();
        assert!(c.entries.iter().all(|e| e.value == 1.0 && e.se == 0.0));
    }

    #[test]
    fn alternating_signs() {
        let v: Vec<i8> = (0..20).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let c = sign_autocorrelation(&signs(&v), 2).unwrap();
        assert_eq!(c.value(1).unwrap(), -1.0);
        assert_eq!(c.value(2).unwrap(), 1.0);
    }

    #[test]
    fn hand_enumerated_c1() {
        let c = sign_autocorrelation(&signs(&[1, 1, -1, 1]), 1).unwrap();
        assert_eq!(c.value(0).unwrap(), 1.0);
        // Products: (+1)(+1), (-1)(+1), (+1)(-1) -> -1/3.
        assert!((c.value(1).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.get(1).unwrap().n, 3);
    }

    #[test]
    fn insufficient_data() {
        assert!(matches!(
            sign_autocorrelation(&signs(&[1, 1]), 5),
            Err(StatsError::InsufficientData { .. })
        ));
    }

    #[test]
    fn pairs_never_cross_segments() {
        let mut ts = TradeSeries::single(vec![1.0; 6], vec![0.0, 1.0, 2.0, 10.0, 10.0, 10.0]).unwrap();
        ts.segments = vec![0..3, 3..6];
        let r = response_function(&ts, 1).unwrap();
        // Segment one: moves +1, +1; segment two: 0, 0.
        assert_eq!(r.get(1).unwrap().n, 4);
        assert_eq!(r.value(1).unwrap(), 0.5);
    }

    #[test]
    fn shifted_response_zero_is_response() {
        let ts = TradeSeries::single(vec![1.0, -1.0, -1.0, 1.0, 1.0], vec![1.0, 2.0, 1.5, 1.0, 3.0]).unwrap();
        assert_eq!(shifted_response(&ts, 0, 3).unwrap(), response_function(&ts, 3).unwrap());
    }

    #[test]
    fn constant_mid_has_zero_covariance() {
        let ts = TradeSeries::single(vec![1.0; 10], vec![5.0; 10]).unwrap();
        let c = midprice_return_covariance(&ts, 3).unwrap();
        assert!(c.entries.iter().all(|e| e.value == 0.0));
    }

    #[test]
    fn pooled_days_average_equally() {
        let mk = |v: f64, n: u64| LagTable {
            entries: vec![LagEntry { lag: 1, value: v, se: 0.1, n }],
        };
        let p = pool_days(&[mk(1.0, 10), mk(3.0, 1000)]).unwrap();
        assert_eq!(p.entries[0].value, 2.0);
        assert!((p.entries[0].se - 1.0).abs() < 1e-12);
        assert_eq!(p.entries[0].n, 1010);
    }
}
