//! Model tests built on the lagged estimators.

use serde::{Deserialize, Serialize};

use super::{midprice_return_covariance, shifted_response, Acc, LagTable, StatsError, TradeSeries};
use crate::book::{DepletionCause, DepletionEvent, FrameSet};

/// Default horizon standing in for an infinite lag.
pub const DEFAULT_LAG_STAR: usize = 50;
/// Largest tolerated (max - min) / |G| of G(l) over the plateau window.
pub const PLATEAU_FLATNESS_TOLERANCE: f64 = 0.05;

const DEGENERATE_EPS: f64 = 1e-9;

fn one_minus_c(c: &LagTable, lag: usize) -> Result<f64, StatsError> {
    let cv = c.value(lag)?;
    let d = 1.0 - cv;
    if d.abs() < DEGENERATE_EPS {
        return Err(StatsError::DegenerateAutocorrelation { lag, c: cv });
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrrRow {
    pub lag: usize,
    /// R(l)(1 - C(1)) / (1 - C(l)).
    pub rescaled: f64,
    pub se: f64,
    /// `rescaled / R(1)`; 1 when the relation holds.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrrRelation {
    pub r1: f64,
    pub rows: Vec<MrrRow>,
}

impl MrrRelation {
    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Rescale R(l) so that, under the MRR model, it equals R(1) at every lag.
pub fn mrr_relation_test(c: &LagTable, r: &LagTable, lags: &[usize]) -> Result<MrrRelation, StatsError> {
    let r1 = r.value(1)?;
    let c1 = one_minus_c(c, 1)?;
    let mut rows = Vec::with_capacity(lags.len());
    for &lag in lags {
        let cl = one_minus_c(c, lag)?;
        let e = r.get(lag).ok_or(StatsError::MissingLag(lag))?;
        let rescaled = e.value * c1 / cl;
        rows.push(MrrRow {
            lag,
            rescaled,
            se: e.se * (c1 / cl).abs(),
            ratio: rescaled / r1,
        });
    }
    Ok(MrrRelation { r1, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GMethod {
    Plateau,
    PerLag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub g_hat: f64,
    pub se: f64,
    pub method: GMethod,
    pub lag_star: usize,
    /// G(l) = R(l) / (1 - C(l)) for every usable lag.
    pub per_lag: Vec<(usize, f64)>,
    /// (max - min) / |G(l*)| over l in [0.6 l*, l*].
    pub flatness: f64,
    pub flat: bool,
}

/// G = R(l*) / (1 - C(l*)) with a plateau diagnostic over the lags below l*.
pub fn estimate_g(c: &LagTable, r: &LagTable, lag_star: usize) -> Result<GEstimate, StatsError> {
    let d = one_minus_c(c, lag_star)?;
    let rl = r.get(lag_star).ok_or(StatsError::MissingLag(lag_star))?;
    let g_hat = rl.value / d;
    let per_lag: Vec<(usize, f64)> = r
        .entries
        .iter()
        .filter(|e| e.lag >= 1)
        .filter_map(|e| one_minus_c(c, e.lag).ok().map(|d| (e.lag, e.value / d)))
        .collect();
    let lo = (lag_star * 3).div_ceil(5).max(1);
    let window = per_lag.iter().filter(|(l, _)| (lo..=lag_star).contains(l)).map(|&(_, g)| g);
    let (mn, mx) = window.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), g| (a.min(g), b.max(g)));
    let flatness = if g_hat != 0.0 { (mx - mn) / g_hat.abs() } else { f64::INFINITY };
    let flat = flatness < PLATEAU_FLATNESS_TOLERANCE;
    if !flat {
        log::warn!("G(l) not flat over [{lo}, {lag_star}]: relative spread {flatness:.3}");
    }
    Ok(GEstimate {
        g_hat,
        se: rl.se / d.abs(),
        method: GMethod::Plateau,
        lag_star,
        per_lag,
        flatness,
        flat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovIdentityRow {
    pub lag: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceIdentity {
    pub r_inf: f64,
    pub rows: Vec<CovIdentityRow>,
}

/// cov_x(l) against R(inf)[R_l(1) - R_{l+1}(1)] for l = 1..=max_lag.
/// The gap is |lhs - rhs| / max(|lhs|, |rhs|, floor).
pub fn covariance_identity_test(
    ts: &TradeSeries,
    max_lag: usize,
    r_inf: f64,
    floor: f64,
) -> Result<CovarianceIdentity, StatsError> {
    let cov = midprice_return_covariance(ts, max_lag)?;
    let mut shifted = Vec::with_capacity(max_lag + 1);
    for k in 1..=max_lag + 1 {
        shifted.push(shifted_response(ts, k, 1)?.value(1)?);
    }
    let rows = (1..=max_lag)
        .map(|lag| {
            let lhs = cov.value(lag).expect("lag computed");
            let rhs = r_inf * (shifted[lag - 1] - shifted[lag]);
            let scale = lhs.abs().max(rhs.abs()).max(floor);
            let gap = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
            CovIdentityRow { lag, lhs, rhs, gap }
        })
        .collect();
    Ok(CovarianceIdentity { r_inf, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpliedSpread {
    pub implied: f64,
    pub realized: f64,
    pub ratio: f64,
}

/// 2 R(1) / (1 - C(1)) against the mean pre-trade spread.
pub fn implied_spread_check(c: &LagTable, r: &LagTable, frames: &FrameSet) -> Result<ImpliedSpread, StatsError> {
    if frames.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let implied = 2.0 * r.value(1)? / one_minus_c(c, 1)?;
    let realized = (0..frames.len()).map(|i| frames.spread(i)).sum::<f64>() / frames.len() as f64;
    Ok(ImpliedSpread {
        implied,
        realized,
        ratio: implied / realized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceCell {
    /// `None` when the bin is empty at this lag.
    pub value: Option<f64>,
    pub se: f64,
    pub n: u64,
}

/// Mid move after `l` trades conditioned on |imbalance| bins, sell-side
/// imbalances sign-flipped onto the buy side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceImpactGrid {
    pub bins: usize,
    pub lags: Vec<usize>,
    /// `cells[bin][lag index]`.
    pub cells: Vec<Vec<ImbalanceCell>>,
}

impl ImbalanceImpactGrid {
    pub fn bin_range(&self, b: usize) -> (f64, f64) {
        (b as f64 / self.bins as f64, (b + 1) as f64 / self.bins as f64)
    }

    pub fn bin_of(bins: usize, imbalance: f64) -> usize {
        ((imbalance.abs() * bins as f64) as usize).min(bins - 1)
    }

    pub fn cell(&self, bin: usize, lag: usize) -> Option<&ImbalanceCell> {
        let j = self.lags.iter().position(|&l| l == lag)?;
        self.cells.get(bin)?.get(j)
    }
}

pub fn impact_by_imbalance(ts: &TradeSeries, lags: &[usize], bins: usize) -> Result<ImbalanceImpactGrid, StatsError> {
    if bins == 0 || lags.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = lags.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut acc = vec![vec![Acc::default(); sorted.len()]; bins];
    let (x, iota) = (&ts.price, &ts.imbalance);
    for seg in &ts.segments {
        for t in seg.clone() {
            let room = seg.end - 1 - t;
            let b = ImbalanceImpactGrid::bin_of(bins, iota[t]);
            let s = if iota[t] < 0.0 { -1.0 } else { 1.0 };
            for (j, &l) in sorted.iter().enumerate() {
                if l > room {
                    break;
                }
                acc[b][j].add(s * (x[t + l] - x[t]));
            }
        }
    }
    let cells = acc
        .iter()
        .map(|row| {
            row.iter()
                .map(|a| ImbalanceCell {
                    value: (a.n > 0).then(|| a.mean()),
                    se: a.se(),
                    n: a.n,
                })
                .collect()
        })
        .collect();
    Ok(ImbalanceImpactGrid {
        bins,
        lags: sorted,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEstimate {
    pub value: f64,
    pub se: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepletionImpact {
    pub horizon: usize,
    pub pooled: ImpactEstimate,
    pub execution: Option<ImpactEstimate>,
    pub cancellation: Option<ImpactEstimate>,
}

/// Mean mid move in the depletion direction `horizon` frames after each
/// depletion, in dollars. Depletions whose horizon leaves the segment are
/// dropped.
pub fn depletion_impact(
    depletions: &[DepletionEvent],
    frames: &FrameSet,
    horizon: usize,
) -> Result<DepletionImpact, StatsError> {
    let segs = frames.segments();
    let mut pooled = Acc::default();
    let mut by_cause = [Acc::default(), Acc::default()];
    for d in depletions {
        let Some(seg) = segs.get(d.segment) else { continue };
        if d.t < seg.start || d.t + horizon >= seg.end {
            continue;
        }
        let v = d.direction() * (frames.mid(d.t + horizon) - d.pre_mid * frames.price_scale);
        pooled.add(v);
        by_cause[matches!(d.cause, DepletionCause::Cancellation) as usize].add(v);
    }
    if pooled.n == 0 {
        return Err(StatsError::InsufficientData {
            needed: 1,
            have: 0,
        });
    }
    let est = |a: &Acc| ImpactEstimate {
        value: a.mean(),
        se: a.se(),
        n: a.n,
    };
    Ok(DepletionImpact {
        horizon,
        pooled: est(&pooled),
        execution: (by_cause[0].n > 0).then(|| est(&by_cause[0])),
        cancellation: (by_cause[1].n > 0).then(|| est(&by_cause[1])),
    })
}
