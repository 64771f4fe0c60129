//! Full estimator battery for one instrument-day, and equal-weight pooling
//! across days.

use serde::Serialize;

use lobmrr::book::{classify_tick_regime, depletions_from_frames, DepletionEvent, FrameSet, TickRegime};
use lobmrr::proxy::{
    compute_proxy, imbalance_information_capture, news_trade_covariance, proxy_response, return_correlation,
    signature_plot, CaptureReport, NewsCovarianceEstimate, ProxyError, ProxyVariant,
};
use lobmrr::stats::{
    covariance_identity_test, depletion_impact, estimate_g, impact_by_imbalance, implied_spread_check,
    midprice_return_covariance, mrr_relation_test, pool_days, response_function, sign_autocorrelation,
    CovarianceIdentity, DepletionImpact, GEstimate, ImbalanceImpactGrid, ImpliedSpread, LagTable, MrrRelation,
    StatsError, TradeSeries,
};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnalysisOptions {
    pub max_lag: usize,
    pub bins: usize,
    /// Horizon standing in for an infinite lag.
    pub horizon: usize,
    pub rebate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProxyDiagnostics {
    pub variant: ProxyVariant,
    pub response: LagTable,
    pub correlation: LagTable,
    pub signature: LagTable,
    pub capture: CaptureReport,
    pub news: NewsCovarianceEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct DayAnalysis {
    pub label: String,
    pub n_frames: usize,
    pub mean_spread: f64,
    pub regime: TickRegime,
    pub sign_autocorrelation: LagTable,
    pub response: LagTable,
    pub return_covariance: LagTable,
    pub mrr_relation: MrrRelation,
    pub g: GEstimate,
    pub covariance_identity: CovarianceIdentity,
    pub implied_spread: ImpliedSpread,
    pub imbalance_impact: ImbalanceImpactGrid,
    pub depletion_impact: Option<DepletionImpact>,
    pub proxies: Vec<ProxyDiagnostics>,
}

pub fn stats_err(e: ProxyError) -> StatsError {
    match e {
        ProxyError::Stats(s) => s,
        ProxyError::EmptySide(i) => StatsError::InsufficientData { needed: i + 1, have: i },
    }
}

/// Diagnostics for one proxy variant on one day.
pub fn proxy_diagnostics(
    ts: &TradeSeries,
    frames: &FrameSet,
    variant: ProxyVariant,
    opts: &AnalysisOptions,
) -> Result<ProxyDiagnostics, StatsError> {
    let mut market = frames.market;
    market.rebate = opts.rebate;
    let p = compute_proxy(frames, variant, market).map_err(stats_err)?;
    let pts = ts.with_price(p.values.clone())?;
    let sig_lags: Vec<usize> = (1..=opts.horizon).collect();
    Ok(ProxyDiagnostics {
        variant,
        response: proxy_response(ts, &p.values, opts.max_lag).map_err(stats_err)?,
        correlation: return_correlation(&pts, opts.max_lag).map_err(stats_err)?,
        signature: signature_plot(&pts, &sig_lags).map_err(stats_err)?,
        capture: imbalance_information_capture(ts, &p.values, opts.horizon, opts.bins).map_err(stats_err)?,
        news: news_trade_covariance(ts, &p.values).map_err(stats_err)?,
    })
}

pub fn analyze_day(
    label: &str,
    frames: &FrameSet,
    depletions: Option<&[DepletionEvent]>,
    opts: &AnalysisOptions,
) -> Result<DayAnalysis, StatsError> {
    let regime = classify_tick_regime(frames).map_err(|_| StatsError::EmptyInput)?;
    let ts = TradeSeries::from_frames(frames);
    let reach = opts.max_lag.max(opts.horizon);
    let c = sign_autocorrelation(&ts, reach)?;
    let r = response_function(&ts, reach)?;
    let cov = midprice_return_covariance(&ts, opts.max_lag)?;
    let mrr_lags: Vec<usize> = (2..=opts.max_lag).collect();
    let mrr = mrr_relation_test(&c, &r, &mrr_lags)?;
    let g = estimate_g(&c, &r, opts.horizon)?;
    let ci = covariance_identity_test(&ts, opts.max_lag.min(5), g.g_hat, 0.0)?;
    let implied = implied_spread_check(&c, &r, frames)?;
    let imb = impact_by_imbalance(&ts, &[1, opts.horizon], opts.bins)?;
    let derived;
    let depl = match depletions {
        Some(d) => d,
        None => {
            derived = depletions_from_frames(frames);
            &derived
        }
    };
    let depletion = depletion_impact(depl, frames, opts.horizon).ok();
    let mut proxies = Vec::with_capacity(4);
    for variant in ProxyVariant::ALL {
        proxies.push(proxy_diagnostics(&ts, frames, variant, opts)?);
    }
    Ok(DayAnalysis {
        label: label.to_string(),
        n_frames: frames.len(),
        mean_spread: regime.mean_spread,
        regime: regime.regime,
        sign_autocorrelation: c,
        response: r,
        return_covariance: cov,
        mrr_relation: mrr,
        g,
        covariance_identity: ci,
        implied_spread: implied,
        imbalance_impact: imb,
        depletion_impact: depletion,
        proxies,
    })
}

/// Equal-weight mean of per-day values; se across days when there are
/// several, else the single day's se.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pooled {
    pub value: f64,
    pub se: f64,
    pub days: usize,
}

pub fn pool_scalar(values: &[(f64, f64)]) -> Option<Pooled> {
    match values {
        [] => None,
        [(v, se)] => Some(Pooled {
            value: *v,
            se: *se,
            days: 1,
        }),
        _ => {
            let d = values.len() as f64;
            let mean = values.iter().map(|v| v.0).sum::<f64>() / d;
            let var = values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (d - 1.0);
            Some(Pooled {
                value: mean,
                se: (var / d).sqrt(),
                days: values.len(),
            })
        }
    }
}

/// Pooled view of several days of one instrument.
#[derive(Debug, Clone, Serialize)]
pub struct PooledAnalysis {
    pub days: Vec<String>,
    pub mean_spread: Pooled,
    pub regime: TickRegime,
    pub sign_autocorrelation: LagTable,
    pub response: LagTable,
    pub return_covariance: LagTable,
    pub mrr_rescaled: Vec<(usize, Pooled)>,
    pub mrr_ratio: Vec<(usize, Pooled)>,
    pub g: Pooled,
    pub covariance_identity: Vec<(usize, Pooled, Pooled)>,
    pub implied_spread: Pooled,
    pub implied_ratio: Pooled,
    pub depletion_impact: Option<Pooled>,
    pub depletion_execution: Option<Pooled>,
    pub depletion_cancellation: Option<Pooled>,
    /// (bin, lag, pooled) over days where the cell is populated.
    pub imbalance_impact: Vec<(usize, usize, Pooled)>,
    pub proxy_correlation_lag1: Vec<(ProxyVariant, Pooled)>,
    pub proxy_response: Vec<(ProxyVariant, LagTable)>,
    pub capture: Vec<(ProxyVariant, Pooled)>,
    pub news: Option<Pooled>,
}

pub fn pool(days: &[DayAnalysis]) -> Result<PooledAnalysis, StatsError> {
    let first = days.first().ok_or(StatsError::EmptyInput)?;
    let scalar = |f: &dyn Fn(&DayAnalysis) -> Option<(f64, f64)>| pool_scalar(&days.iter().filter_map(f).collect::<Vec<_>>());
    let mean_spread = scalar(&|d| Some((d.mean_spread, 0.0))).expect("non-empty");
    let tables = |f: &dyn Fn(&DayAnalysis) -> &LagTable| pool_days(&days.iter().map(|d| f(d).clone()).collect::<Vec<_>>());
    let mut mrr_rescaled = Vec::new();
    let mut mrr_ratio = Vec::new();
    for (i, row) in first.mrr_relation.rows.iter().enumerate() {
        if let Some(p) = scalar(&|d| d.mrr_relation.rows.get(i).map(|r| (r.rescaled, r.se))) {
            mrr_rescaled.push((row.lag, p));
        }
        if let Some(p) = scalar(&|d| d.mrr_relation.rows.get(i).map(|r| (r.ratio, r.se / d.mrr_relation.r1.abs()))) {
            mrr_ratio.push((row.lag, p));
        }
    }
    let mut ci = Vec::new();
    for (i, row) in first.covariance_identity.rows.iter().enumerate() {
        let lhs = scalar(&|d| d.covariance_identity.rows.get(i).map(|r| (r.lhs, 0.0)));
        let rhs = scalar(&|d| d.covariance_identity.rows.get(i).map(|r| (r.rhs, 0.0)));
        if let (Some(l), Some(r)) = (lhs, rhs) {
            ci.push((row.lag, l, r));
        }
    }
    let mut imbalance = Vec::new();
    for (b, row) in first.imbalance_impact.cells.iter().enumerate() {
        for (j, _) in row.iter().enumerate() {
            let lag = first.imbalance_impact.lags[j];
            let p = scalar(&|d| {
                let c = d.imbalance_impact.cells.get(b)?.get(j)?;
                c.value.map(|v| (v, c.se))
            });
            if let Some(p) = p {
                imbalance.push((b, lag, p));
            }
        }
    }
    let mut corr = Vec::new();
    let mut presp = Vec::new();
    let mut capture = Vec::new();
    for (k, pd) in first.proxies.iter().enumerate() {
        if let Some(p) = scalar(&|d| d.proxies[k].correlation.get(1).map(|e| (e.value, e.se))) {
            corr.push((pd.variant, p));
        }
        presp.push((pd.variant, tables(&|d| &d.proxies[k].response)?));
        if let Some(p) = scalar(&|d| d.proxies[k].capture.aggregate.map(|v| (v, 0.0))) {
            capture.push((pd.variant, p));
        }
    }
    let squared = first
        .proxies
        .iter()
        .position(|p| p.variant == ProxyVariant::SquaredVolume)
        .expect("all variants computed");
    let spread = mean_spread.value;
    Ok(PooledAnalysis {
        days: days.iter().map(|d| d.label.clone()).collect(),
        mean_spread,
        regime: TickRegime::from_mean_spread(spread),
        sign_autocorrelation: tables(&|d| &d.sign_autocorrelation)?,
        response: tables(&|d| &d.response)?,
        return_covariance: tables(&|d| &d.return_covariance)?,
        mrr_rescaled,
        mrr_ratio,
        g: scalar(&|d| Some((d.g.g_hat, d.g.se))).expect("non-empty"),
        covariance_identity: ci,
        implied_spread: scalar(&|d| Some((d.implied_spread.implied, 0.0))).expect("non-empty"),
        implied_ratio: scalar(&|d| Some((d.implied_spread.ratio, 0.0))).expect("non-empty"),
        depletion_impact: scalar(&|d| d.depletion_impact.as_ref().map(|x| (x.pooled.value, x.pooled.se))),
        depletion_execution: scalar(&|d| {
            d.depletion_impact.as_ref().and_then(|x| x.execution).map(|e| (e.value, e.se))
        }),
        depletion_cancellation: scalar(&|d| {
            d.depletion_impact.as_ref().and_then(|x| x.cancellation).map(|e| (e.value, e.se))
        }),
        imbalance_impact: imbalance,
        proxy_correlation_lag1: corr,
        proxy_response: presp,
        capture,
        news: scalar(&|d| Some((d.proxies[squared].news.value, d.proxies[squared].news.se))),
    })
}
