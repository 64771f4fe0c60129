//! Subcommand implementations.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;

use lobmrr::book::{reconstruct, DepletionCause, DepletionEvent, FrameSet, MarketConfig, ReconstructOptions, ReconstructionStats};
use lobmrr::lobster::synthetic::{generate, SyntheticConfig};
use lobmrr::lobster::{
    parse_message_file, parse_snapshot_file, write_message_file, write_snapshot_file, ParseOptions, SessionWindow,
};
use lobmrr::proxy::{compute_proxy, ProxyVariant};
use lobmrr::sim::{self, MrrParams, SignProcess, SignProcessSpec, SimMode};
use lobmrr::stats::{LagTable, StatsError, TradeSeries};

use crate::analysis::{analyze_day, pool, proxy_diagnostics, stats_err, AnalysisOptions, DayAnalysis, Pooled, PooledAnalysis, ProxyDiagnostics};
use crate::config::{self, Common, FileConfig, Format, DEFAULT_BINS, DEFAULT_HORIZON, DEFAULT_LAGS};
use crate::output::{self, read_input, write_csv_table, write_file, write_json, write_rows, Provenance, Row};
use crate::{CliError, CliResult, IngestArgs, ProxyArgs, SimulateArgs, StatsArgs, SynthArgs};

/// Name parts of a LOBSTER file: `TICKER_DATE_START_END_message_LEVELS.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LobsterName {
    pub stem: String,
    pub ticker: String,
    pub date: String,
    pub levels: Option<usize>,
}

pub fn lobster_name(path: &Path) -> LobsterName {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
    let (stem, levels) = match name.rfind("_message_") {
        Some(i) => (name[..i].to_string(), name[i + "_message_".len()..].parse().ok()),
        None => (name.clone(), None),
    };
    let mut parts = stem.split('_');
    let ticker = parts.next().unwrap_or_default().to_string();
    let date = parts.next().unwrap_or_default().to_string();
    LobsterName {
        stem,
        ticker,
        date,
        levels,
    }
}

/// Companion order-book path for a message file.
pub fn orderbook_path(messages: &Path) -> Option<PathBuf> {
    let name = messages.file_name()?.to_str()?;
    let i = name.rfind("_message_")?;
    Some(messages.with_file_name(format!("{}_orderbook_{}", &name[..i], &name[i + "_message_".len()..])))
}

#[derive(Debug, Clone, Serialize)]
struct IngestConfig {
    market: MarketConfig,
    /// Levels fixed on the command line or in the config; otherwise taken
    /// from each file name.
    levels: Option<usize>,
    session_start: f64,
    session_end: f64,
    reconcile: bool,
    strict_time: bool,
    max_mismatch: usize,
}

#[derive(Debug, Clone, Serialize)]
struct IngestSummary {
    input: String,
    stem: String,
    frames: usize,
    depletions: usize,
    non_monotone_rows: usize,
    stats: ReconstructionStats,
}

struct IngestOutcome {
    summary: IngestSummary,
    frames: FrameSet,
    depletions: Vec<DepletionEvent>,
    digests: Vec<(PathBuf, String)>,
    first_failure: Option<String>,
}

pub fn ingest(common: &Common, file: &FileConfig, a: &IngestArgs) -> CliResult<()> {
    let levels = a.levels.or(file.market.levels);
    let market = config::market(&a.market, file, levels)?;
    let d = SessionWindow::default();
    let window = SessionWindow::new(
        a.session_start.or(file.session.start).unwrap_or(d.start_s),
        a.session_end.or(file.session.end).unwrap_or(d.end_s),
    )
    .map_err(|e| anyhow!("{e}"))?;
    let cfg = IngestConfig {
        market,
        levels,
        session_start: window.start_s,
        session_end: window.end_s,
        reconcile: a.reconcile,
        strict_time: a.strict_time,
        max_mismatch: a.max_mismatch,
    };
    let mut inputs = a.messages.clone();
    inputs.sort();
    inputs.dedup();
    let outcomes: Vec<anyhow::Result<IngestOutcome>> =
        inputs.par_iter().map(|p| ingest_one(common, &cfg, levels, p, window)).collect();
    let outcomes = outcomes.into_iter().collect::<anyhow::Result<Vec<_>>>()?;

    let mut prov = Provenance::new("ingest", &cfg)?;
    for o in &outcomes {
        for (p, h) in &o.digests {
            prov.inputs.push(output::InputDigest {
                path: p.display().to_string(),
                sha256: h.clone(),
            });
        }
    }
    for o in outcomes.iter() {
        let mut frames = o.frames.clone();
        let mut own = Provenance::new("ingest", &cfg)?;
        own.inputs = o
            .digests
            .iter()
            .map(|(p, h)| output::InputDigest {
                path: p.display().to_string(),
                sha256: h.clone(),
            })
            .collect();
        stamp_frames(&mut frames, &own);
        write_frames(&common.out.join(format!("{}.frames", o.summary.stem)), common.format, &frames)?;
        write_depletions(&common.out.join(format!("{}.depletions", o.summary.stem)), common.format, &own, &o.depletions)?;
    }
    let summaries: Vec<&IngestSummary> = outcomes.iter().map(|o| &o.summary).collect();
    let path = common.out.join(format!("ingest_summary.{}", common.format.extension()));
    match common.format {
        Format::Csv => write_csv_table(
            &path,
            &prov,
            &[
                "input", "stem", "events", "frames", "depletions", "visible_executions", "executed_volume", "hidden_executions",
                "cross_trades", "halts", "untracked", "rejected", "non_monotone_rows", "reconciled_rows", "reconcile_failures",
            ],
            summaries.iter().map(|s| {
                let st = &s.stats;
                vec![
                    s.input.clone(),
                    s.stem.clone(),
                    st.events.to_string(),
                    s.frames.to_string(),
                    s.depletions.to_string(),
                    st.visible_executions.to_string(),
                    st.executed_volume.to_string(),
                    st.hidden_executions.to_string(),
                    st.cross_trades.to_string(),
                    st.halts.to_string(),
                    st.untracked.to_string(),
                    st.rejected.to_string(),
                    s.non_monotone_rows.to_string(),
                    st.reconciled_rows.to_string(),
                    st.reconcile_failures.to_string(),
                ]
            }),
        )?,
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                files: Vec<&'a IngestSummary>,
            }
            write_json(&path, &prov, &Body { files: summaries })?
        }
    }
    let failed: Vec<&IngestOutcome> = outcomes
        .iter()
        .filter(|o| o.summary.stats.reconcile_failures > cfg.max_mismatch)
        .collect();
    if let Some(o) = failed.first() {
        return Err(CliError::Reconcile(format!(
            "{}: {} mismatching rows (allowed {}); first: {}",
            o.summary.input,
            o.summary.stats.reconcile_failures,
            cfg.max_mismatch,
            o.first_failure.as_deref().unwrap_or("?")
        )));
    }
    Ok(())
}

fn ingest_one(
    common: &Common,
    cfg: &IngestConfig,
    levels_flag: Option<usize>,
    label: &Path,
    window: SessionWindow,
) -> anyhow::Result<IngestOutcome> {
    let path = common.input(label);
    let name = lobster_name(label);
    let bytes = read_input(&path)?;
    let mut digests = vec![(label.to_path_buf(), output::sha256_hex(&bytes))];
    let parsed = parse_message_file(bytes.as_slice(), ParseOptions { strict_time: cfg.strict_time })
        .with_context(|| format!("parsing {}", path.display()))?;
    let levels = levels_flag.or(name.levels).unwrap_or(cfg.market.levels_tracked);
    let mut market = cfg.market;
    market.levels_tracked = levels;
    let snaps = if cfg.reconcile {
        let ob_label = orderbook_path(label).ok_or_else(|| anyhow!("{}: not a LOBSTER message file name", label.display()))?;
        let ob = common.input(&ob_label);
        let ob_bytes = read_input(&ob)?;
        digests.push((ob_label, output::sha256_hex(&ob_bytes)));
        let s = parse_snapshot_file(BufReader::new(ob_bytes.as_slice()), levels)
            .with_context(|| format!("parsing {}", ob.display()))?;
        if s.len() != parsed.events.len() {
            anyhow::bail!("{}: {} snapshot rows for {} events", ob.display(), s.len(), parsed.events.len());
        }
        Some(s)
    } else {
        None
    };
    let opts = ReconstructOptions {
        window: Some(window),
        seed_from_first_snapshot: false,
    };
    let mut r = reconstruct(&parsed.events, snaps.as_deref(), market, opts).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    r.frames.meta.insert("source".into(), "lobster".into());
    r.frames.meta.insert("ticker".into(), name.ticker.clone());
    r.frames.meta.insert("date".into(), name.date.clone());
    let first_failure = r.failures.first().map(|(i, rep)| format!("event {i}: {rep:?}"));
    Ok(IngestOutcome {
        summary: IngestSummary {
            input: label.display().to_string(),
            stem: name.stem,
            frames: r.frames.len(),
            depletions: r.depletions.len(),
            non_monotone_rows: parsed.non_monotone_rows.len(),
            stats: r.stats,
        },
        frames: r.frames,
        depletions: r.depletions,
        digests,
        first_failure,
    })
}

fn stamp_frames(frames: &mut FrameSet, prov: &Provenance) {
    frames.meta.insert("provenance.command".into(), prov.command.clone());
    frames.meta.insert("provenance.version".into(), prov.version.clone());
    frames.meta.insert("provenance.config".into(), prov.config.to_string());
    for (i, d) in prov.inputs.iter().enumerate() {
        frames.meta.insert(format!("provenance.input.{i}"), format!("{} sha256={}", d.path, d.sha256));
    }
}

/// Write frames to `<base>.csv` or `<base>.json`.
pub fn write_frames(base: &Path, format: Format, frames: &FrameSet) -> anyhow::Result<PathBuf> {
    let path = PathBuf::from(format!("{}.{}", base.display(), format.extension()));
    let bytes = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            frames.write_csv(&mut buf)?;
            buf
        }
        Format::Json => {
            let mut s = frames.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
    };
    write_file(&path, &bytes)?;
    Ok(path)
}

fn write_depletions(base: &Path, format: Format, prov: &Provenance, d: &[DepletionEvent]) -> anyhow::Result<()> {
    let path = PathBuf::from(format!("{}.{}", base.display(), format.extension()));
    match format {
        Format::Csv => write_csv_table(
            &path,
            prov,
            &["t", "segment", "event_index", "side", "cause", "removed", "pre_mid", "post_mid"],
            d.iter().map(|e| {
                vec![
                    e.t.to_string(),
                    e.segment.to_string(),
                    e.event_index.map(|i| i.to_string()).unwrap_or_default(),
                    format!("{:?}", e.side).to_lowercase(),
                    match e.cause {
                        DepletionCause::Execution => "execution".into(),
                        DepletionCause::Cancellation => "cancellation".into(),
                    },
                    e.removed.to_string(),
                    e.pre_mid.to_string(),
                    e.post_mid.map(|m| m.to_string()).unwrap_or_default(),
                ]
            }),
        ),
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                depletions: &'a [DepletionEvent],
            }
            write_json(&path, prov, &Body { depletions: d })
        }
    }
}

/// A frame file read from disk with its grouping keys.
pub struct LoadedFrames {
    pub label: PathBuf,
    pub ticker: String,
    pub day: String,
    pub frames: FrameSet,
    pub sha256: String,
}

pub fn load_frames(common: &Common, labels: &[PathBuf]) -> anyhow::Result<Vec<LoadedFrames>> {
    let loaded: Vec<anyhow::Result<LoadedFrames>> = labels
        .par_iter()
        .map(|label| {
            let path = common.input(label);
            let bytes = read_input(&path)?;
            let is_json = path.extension().is_some_and(|e| e == "json");
            let frames = if is_json {
                FrameSet::from_json(std::str::from_utf8(&bytes)?)
            } else {
                FrameSet::read_csv(bytes.as_slice())
            }
            .with_context(|| format!("reading frames {}", path.display()))?;
            let name = label.file_name().and_then(|s| s.to_str()).unwrap_or("frames");
            let stem = name.split('.').next().unwrap_or(name).to_string();
            let ticker = frames
                .meta
                .get("ticker")
                .cloned()
                .unwrap_or_else(|| stem.split('_').next().unwrap_or(&stem).to_string());
            let day = frames.meta.get("date").cloned().unwrap_or_else(|| stem.clone());
            Ok(LoadedFrames {
                label: label.clone(),
                ticker,
                day,
                frames,
                sha256: output::sha256_hex(&bytes),
            })
        })
        .collect();
    let mut v = loaded.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    v.sort_by(|a, b| (&a.ticker, &a.day, &a.label).cmp(&(&b.ticker, &b.day, &b.label)));
    Ok(v)
}

fn analysis_options(
    file: &FileConfig,
    lags: Option<usize>,
    bins: Option<usize>,
    horizon: Option<usize>,
    market: &MarketConfig,
) -> anyhow::Result<AnalysisOptions> {
    let o = AnalysisOptions {
        max_lag: lags.or(file.stats.lags).unwrap_or(DEFAULT_LAGS),
        bins: bins.or(file.stats.bins).unwrap_or(DEFAULT_BINS),
        horizon: horizon.or(file.stats.horizon).unwrap_or(DEFAULT_HORIZON),
        rebate: market.rebate,
    };
    if o.max_lag < 1 || o.bins < 1 || o.horizon < 1 {
        anyhow::bail!("lags, bins and horizon must all be at least 1");
    }
    Ok(o)
}

#[derive(Debug, Clone, Serialize)]
struct StatsConfig {
    options: AnalysisOptions,
    rebate_override: Option<f64>,
}

/// One ticker: per-day analyses in day order plus the pooled view.
#[derive(Debug, Clone, Serialize)]
pub struct TickerAnalysis {
    pub ticker: String,
    pub days: Vec<DayAnalysis>,
    pub pooled: PooledAnalysis,
}

fn day_rebate(frames: &FrameSet, opts: &AnalysisOptions, flag: Option<f64>) -> AnalysisOptions {
    AnalysisOptions {
        rebate: flag.unwrap_or(frames.market.rebate),
        ..*opts
    }
}

pub fn analyze_all(loaded: &[LoadedFrames], opts: &AnalysisOptions, rebate: Option<f64>) -> CliResult<Vec<TickerAnalysis>> {
    let days: Vec<Result<DayAnalysis, CliError>> = loaded
        .par_iter()
        .map(|l| {
            let o = day_rebate(&l.frames, opts, rebate);
            let label = format!("{}/{}", l.ticker, l.day);
            analyze_day(&label, &l.frames, None, &o).map_err(|e| CliError::from_stats(&l.label.display().to_string(), e))
        })
        .collect();
    let days = days.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut out: Vec<TickerAnalysis> = Vec::new();
    for (l, d) in loaded.iter().zip(days) {
        match out.last_mut() {
            Some(t) if t.ticker == l.ticker => t.days.push(d),
            _ => out.push(TickerAnalysis {
                ticker: l.ticker.clone(),
                days: vec![d],
                pooled: placeholder_pool(),
            }),
        }
    }
    for t in &mut out {
        t.pooled = pool(&t.days).map_err(|e| CliError::from_stats(&t.ticker, e))?;
    }
    Ok(out)
}

fn placeholder_pool() -> PooledAnalysis {
    let z = Pooled {
        value: 0.0,
        se: 0.0,
        days: 0,
    };
    PooledAnalysis {
        days: Vec::new(),
        mean_spread: z,
        regime: lobmrr::book::TickRegime::Medium,
        sign_autocorrelation: LagTable::default(),
        response: LagTable::default(),
        return_covariance: LagTable::default(),
        mrr_rescaled: Vec::new(),
        mrr_ratio: Vec::new(),
        g: z,
        covariance_identity: Vec::new(),
        implied_spread: z,
        implied_ratio: z,
        depletion_impact: None,
        depletion_execution: None,
        depletion_cancellation: None,
        imbalance_impact: Vec::new(),
        proxy_correlation_lag1: Vec::new(),
        proxy_response: Vec::new(),
        capture: Vec::new(),
        news: None,
    }
}

fn table_rows(rows: &mut Vec<Row>, scope: &str, table: &str, t: &LagTable) {
    for e in &t.entries {
        rows.push(Row::new(scope, table).lag(e.lag).value(e.value).se(e.se).n(e.n));
    }
}

fn pooled_row(scope: &str, table: &str, p: &Pooled) -> Row {
    Row::new(scope, table).value(p.value).se(p.se).n(p.days as u64)
}

fn day_rows(rows: &mut Vec<Row>, d: &DayAnalysis) {
    let s = d.label.as_str();
    rows.push(Row::new(s, "tick_regime").key(format!("{:?}", d.regime).to_lowercase()).value(d.mean_spread).n(d.n_frames as u64));
    table_rows(rows, s, "sign_autocorrelation", &d.sign_autocorrelation);
    table_rows(rows, s, "response", &d.response);
    table_rows(rows, s, "return_covariance", &d.return_covariance);
    for r in &d.mrr_relation.rows {
        rows.push(Row::new(s, "mrr_rescaled").lag(r.lag).value(r.rescaled).se(r.se));
        rows.push(Row::new(s, "mrr_ratio").lag(r.lag).value(r.ratio));
    }
    rows.push(
        Row::new(s, "g_estimate")
            .key(if d.g.flat { "flat" } else { "not_flat" })
            .lag(d.g.lag_star)
            .value(d.g.g_hat)
            .se(d.g.se),
    );
    rows.push(Row::new(s, "g_flatness").lag(d.g.lag_star).value(d.g.flatness));
    for &(lag, g) in &d.g.per_lag {
        rows.push(Row::new(s, "g_per_lag").lag(lag).value(g));
    }
    for r in &d.covariance_identity.rows {
        rows.push(Row::new(s, "covariance_identity").key("lhs").lag(r.lag).value(r.lhs));
        rows.push(Row::new(s, "covariance_identity").key("rhs").lag(r.lag).value(r.rhs));
        rows.push(Row::new(s, "covariance_identity").key("gap").lag(r.lag).value(r.gap));
    }
    let is = &d.implied_spread;
    rows.push(Row::new(s, "implied_spread").key("implied").value(is.implied));
    rows.push(Row::new(s, "implied_spread").key("realized").value(is.realized));
    rows.push(Row::new(s, "implied_spread").key("ratio").value(is.ratio));
    let grid = &d.imbalance_impact;
    for b in 0..grid.bins {
        let (lo, hi) = grid.bin_range(b);
        for (j, &lag) in grid.lags.iter().enumerate() {
            let c = &grid.cells[b][j];
            let mut row = Row::new(s, "imbalance_impact").key(format!("[{lo:.2};{hi:.2})")).lag(lag).n(c.n);
            if let Some(v) = c.value {
                row = row.value(v).se(c.se);
            }
            rows.push(row);
        }
    }
    if let Some(di) = &d.depletion_impact {
        let h = di.horizon;
        rows.push(Row::new(s, "depletion_impact").key("pooled").lag(h).value(di.pooled.value).se(di.pooled.se).n(di.pooled.n));
        for (k, e) in [("execution", di.execution), ("cancellation", di.cancellation)] {
            if let Some(e) = e {
                rows.push(Row::new(s, "depletion_impact").key(k).lag(h).value(e.value).se(e.se).n(e.n));
            }
        }
    }
    for p in &d.proxies {
        proxy_rows(rows, s, p);
    }
}

fn proxy_rows(rows: &mut Vec<Row>, s: &str, p: &ProxyDiagnostics) {
    let v = p.variant.name();
    let t = |name: &str| format!("proxy_{name}");
    for e in &p.response.entries {
        rows.push(Row::new(s, &t("response")).key(v).lag(e.lag).value(e.value).se(e.se).n(e.n));
    }
    for e in &p.correlation.entries {
        rows.push(Row::new(s, &t("return_correlation")).key(v).lag(e.lag).value(e.value).se(e.se).n(e.n));
    }
    for e in &p.signature.entries {
        rows.push(Row::new(s, &t("signature")).key(v).lag(e.lag).value(e.value).se(e.se).n(e.n));
    }
    for b in &p.capture.bins {
        let mut row = Row::new(s, &t("capture")).key(format!("{v}:bin{}", b.bin)).lag(p.capture.lag).n(b.n);
        if let Some(c) = b.capture {
            row = row.value(c);
        }
        rows.push(row);
    }
    if let Some(a) = p.capture.aggregate {
        rows.push(Row::new(s, &t("capture")).key(format!("{v}:aggregate")).lag(p.capture.lag).value(a));
    }
    rows.push(Row::new(s, &t("news_covariance")).key(v).value(p.news.value).se(p.news.se));
}

fn pooled_rows(rows: &mut Vec<Row>, t: &TickerAnalysis) {
    let s = t.ticker.as_str();
    let p = &t.pooled;
    rows.push(pooled_row(s, "tick_regime", &p.mean_spread).key(format!("{:?}", p.regime).to_lowercase()));
    table_rows(rows, s, "sign_autocorrelation", &p.sign_autocorrelation);
    table_rows(rows, s, "response", &p.response);
    table_rows(rows, s, "return_covariance", &p.return_covariance);
    for (lag, v) in &p.mrr_rescaled {
        rows.push(pooled_row(s, "mrr_rescaled", v).lag(*lag));
    }
    for (lag, v) in &p.mrr_ratio {
        rows.push(pooled_row(s, "mrr_ratio", v).lag(*lag));
    }
    rows.push(pooled_row(s, "g_estimate", &p.g));
    for (lag, l, r) in &p.covariance_identity {
        rows.push(pooled_row(s, "covariance_identity", l).key("lhs").lag(*lag));
        rows.push(pooled_row(s, "covariance_identity", r).key("rhs").lag(*lag));
    }
    rows.push(pooled_row(s, "implied_spread", &p.implied_spread).key("implied"));
    rows.push(pooled_row(s, "implied_spread", &p.implied_ratio).key("ratio"));
    for (k, v) in [
        ("pooled", &p.depletion_impact),
        ("execution", &p.depletion_execution),
        ("cancellation", &p.depletion_cancellation),
    ] {
        if let Some(v) = v {
            rows.push(pooled_row(s, "depletion_impact", v).key(k));
        }
    }
    for (b, lag, v) in &p.imbalance_impact {
        rows.push(pooled_row(s, "imbalance_impact", v).key(format!("bin{b}")).lag(*lag));
    }
    for (variant, v) in &p.proxy_correlation_lag1 {
        rows.push(pooled_row(s, "proxy_return_correlation", v).key(variant.name()).lag(1));
    }
    for (variant, table) in &p.proxy_response {
        for e in &table.entries {
            rows.push(Row::new(s, "proxy_response").key(variant.name()).lag(e.lag).value(e.value).se(e.se).n(e.n));
        }
    }
    for (variant, v) in &p.capture {
        rows.push(pooled_row(s, "proxy_capture", v).key(format!("{}:aggregate", variant.name())));
    }
    if let Some(n) = &p.news {
        rows.push(pooled_row(s, "proxy_news_covariance", n).key(ProxyVariant::SquaredVolume.name()));
    }
}

fn frame_provenance<C: Serialize>(command: &str, cfg: &C, loaded: &[LoadedFrames]) -> anyhow::Result<Provenance> {
    let mut prov = Provenance::new(command, cfg)?;
    for l in loaded {
        prov.inputs.push(output::InputDigest {
            path: l.label.display().to_string(),
            sha256: l.sha256.clone(),
        });
    }
    Ok(prov)
}

pub fn stats(common: &Common, file: &FileConfig, a: &StatsArgs) -> CliResult<()> {
    let rebate = a.market.rebate.or(file.market.rebate);
    let opts = analysis_options(file, a.lags, a.bins, a.horizon, &MarketConfig::default())?;
    let loaded = load_frames(common, &a.frames)?;
    let tickers = analyze_all(&loaded, &opts, rebate)?;
    let cfg = StatsConfig {
        options: opts,
        rebate_override: rebate,
    };
    let prov = frame_provenance("stats", &cfg, &loaded)?;
    match common.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for t in &tickers {
                pooled_rows(&mut rows, t);
                for d in &t.days {
                    day_rows(&mut rows, d);
                }
            }
            write_rows(&common.out, "stats", Format::Csv, &prov, &rows)?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                tickers: &'a [TickerAnalysis],
            }
            write_json(&common.out.join("stats.json"), &prov, &Body { tickers: &tickers })?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ProxyConfig {
    variant: ProxyVariant,
    options: AnalysisOptions,
    rebate_override: Option<f64>,
}

pub fn proxy(common: &Common, file: &FileConfig, a: &ProxyArgs) -> CliResult<()> {
    let variant: ProxyVariant = a
        .variant
        .as_deref()
        .or(file.stats.variant.as_deref())
        .unwrap_or("squared")
        .parse()
        .map_err(|e| anyhow!("{e}"))?;
    let rebate = a.market.rebate.or(file.market.rebate);
    let opts = analysis_options(file, a.lags, a.bins, a.horizon, &MarketConfig::default())?;
    let loaded = load_frames(common, &a.frames)?;
    let cfg = ProxyConfig {
        variant,
        options: opts,
        rebate_override: rebate,
    };
    let results: Vec<Result<(Vec<f64>, ProxyDiagnostics), CliError>> = loaded
        .par_iter()
        .map(|l| {
            let o = day_rebate(&l.frames, &opts, rebate);
            let ctx = l.label.display().to_string();
            let mut market = l.frames.market;
            market.rebate = o.rebate;
            let series = compute_proxy(&l.frames, variant, market).map_err(|e| CliError::from_stats(&ctx, stats_err(e)))?;
            let ts = TradeSeries::from_frames(&l.frames);
            let diag = proxy_diagnostics(&ts, &l.frames, variant, &o).map_err(|e| CliError::from_stats(&ctx, e))?;
            Ok((series.values, diag))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (l, (values, diag)) in loaded.iter().zip(&results) {
        let mut prov = Provenance::new("proxy", &cfg)?;
        prov.inputs.push(output::InputDigest {
            path: l.label.display().to_string(),
            sha256: l.sha256.clone(),
        });
        let stem = l.label.file_name().and_then(|s| s.to_str()).unwrap_or("frames");
        let stem = stem.split('.').next().unwrap_or(stem);
        let path = common.out.join(format!("{stem}.proxy_{}.{}", variant.name(), common.format.extension()));
        let f = &l.frames;
        match common.format {
            Format::Csv => write_csv_table(
                &path,
                &prov,
                &["t", "segment", "bid", "ask", "vbid", "vask", "mid", "proxy"],
                (0..f.len()).map(|i| {
                    vec![
                        i.to_string(),
                        f.segment_of(i).to_string(),
                        f.bid_dollars(i).to_string(),
                        f.ask_dollars(i).to_string(),
                        f.vbid[i].to_string(),
                        f.vask[i].to_string(),
                        f.mid(i).to_string(),
                        values[i].to_string(),
                    ]
                }),
            )?,
            Format::Json => {
                #[derive(Serialize)]
                struct Body<'a> {
                    variant: ProxyVariant,
                    values: &'a [f64],
                }
                write_json(&path, &prov, &Body { variant, values })?
            }
        }
        proxy_rows(&mut rows, &format!("{}/{}", l.ticker, l.day), diag);
    }
    let prov = frame_provenance("proxy", &cfg, &loaded)?;
    write_rows(&common.out, &format!("proxy_{}", variant.name()), common.format, &prov, &rows)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SimulateConfig {
    mode: SimMode,
    params: MrrParams,
    signs: SignProcessSpec,
}

pub fn simulate(common: &Common, file: &FileConfig, a: &SimulateArgs) -> CliResult<()> {
    let s = &file.simulate;
    let mode: SimMode = a
        .mode
        .as_deref()
        .or(s.mode.as_deref())
        .unwrap_or("discrete")
        .parse()
        .map_err(|e| anyhow!("{e}"))?;
    let d = MrrParams::default();
    let params = MrrParams {
        g: a.g.or(s.g).unwrap_or(d.g),
        w_sigma: a.wsigma.or(s.wsigma).unwrap_or(d.w_sigma),
        coupling: a.coupling.or(s.coupling).unwrap_or(d.coupling),
        tick: a.market.tick.or(file.market.tick).unwrap_or(d.tick),
        rebate: a.market.rebate.or(file.market.rebate).unwrap_or(d.rebate),
        p0: a.p0.or(s.p0).unwrap_or(d.p0),
        n_steps: a.steps.or(s.steps).unwrap_or(d.n_steps),
        ..d
    };
    let rho = a.rho.or(s.rho).unwrap_or(0.5);
    let seed = a.seed.or(s.seed).unwrap_or(1);
    let signs = if rho == 0.0 {
        SignProcessSpec {
            process: SignProcess::Iid,
            seed,
        }
    } else {
        SignProcessSpec::markov(rho, seed)
    };
    let cfg = SimulateConfig { mode, params, signs };
    let path = sim::simulate(mode, &params, &cfg.signs).map_err(|e| anyhow!("{e}"))?;
    let prov = Provenance::new("simulate", &cfg)?;
    let mut frames = path.to_frames();
    frames.meta.insert("ticker".into(), "SIM".into());
    frames.meta.insert("date".into(), format!("{}-seed{seed}", mode_name(mode)));
    stamp_frames(&mut frames, &prov);
    let stem = format!("sim_{}_seed{seed}", mode_name(mode));
    write_frames(&common.out.join(format!("{stem}.frames")), common.format, &frames)?;
    if a.truth {
        let tpath = common.out.join(format!("{stem}.truth.{}", common.format.extension()));
        match common.format {
            Format::Csv => write_csv_table(
                &tpath,
                &prov,
                &["t", "p", "eps", "eps_hat", "w"],
                (0..path.len()).map(|t| {
                    vec![
                        t.to_string(),
                        path.p[t].to_string(),
                        path.eps[t].to_string(),
                        path.eps_hat[t].to_string(),
                        path.w[t].to_string(),
                    ]
                }),
            )?,
            Format::Json => {
                #[derive(Serialize)]
                struct Body<'a> {
                    p: &'a [f64],
                    eps: &'a [i8],
                    eps_hat: &'a [f64],
                    w: &'a [f64],
                }
                write_json(
                    &tpath,
                    &prov,
                    &Body {
                        p: &path.p,
                        eps: &path.eps,
                        eps_hat: &path.eps_hat,
                        w: &path.w,
                    },
                )?
            }
        }
    }
    Ok(())
}

fn mode_name(m: SimMode) -> &'static str {
    match m {
        SimMode::Continuous => "continuous",
        SimMode::Discrete => "discrete",
    }
}

/// One line of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub ticker: String,
    pub statistic: String,
    pub value: f64,
    pub se: f64,
}

/// Lags reported in the response table, when available.
pub const TABLE1_LAGS: [usize; 6] = [2, 3, 4, 5, 10, 20];

pub fn report_tables(tickers: &[TickerAnalysis], opts: &AnalysisOptions) -> [Vec<TableRow>; 4] {
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    let mut t3 = Vec::new();
    let mut t4 = Vec::new();
    for t in tickers {
        let p = &t.pooled;
        let row = |stat: String, v: &Pooled| TableRow {
            ticker: t.ticker.clone(),
            statistic: stat,
            value: v.value,
            se: v.se,
        };
        let day_scalar = |f: &dyn Fn(&DayAnalysis) -> Option<(f64, f64)>| {
            crate::analysis::pool_scalar(&t.days.iter().filter_map(f).collect::<Vec<_>>())
        };
        if let Some(r1) = day_scalar(&|d| d.response.get(1).map(|e| (e.value, e.se))) {
            t1.push(row("R(1)".into(), &r1));
        }
        for (lag, v) in &p.mrr_rescaled {
            if TABLE1_LAGS.contains(lag) {
                t1.push(row(format!("R({lag})(1-C(1))/(1-C({lag}))"), v));
            }
        }
        if let Some(v) = &p.depletion_impact {
            t2.push(row("depletion_impact".into(), v));
        }
        if let Some(v) = &p.depletion_execution {
            t2.push(row("depletion_impact_execution".into(), v));
        }
        if let Some(v) = &p.depletion_cancellation {
            t2.push(row("depletion_impact_cancellation".into(), v));
        }
        let top = opts.bins - 1;
        if let Some((_, _, v)) = p.imbalance_impact.iter().find(|(b, l, _)| *b == top && *l == opts.horizon) {
            t2.push(row("large_imbalance_impact".into(), v));
        }
        t2.push(row("G".into(), &p.g));
        for (variant, v) in &p.proxy_correlation_lag1 {
            let stat = match variant {
                ProxyVariant::SquaredVolume => "corr_phat(1)",
                ProxyVariant::LinearRebate => "corr_phat'(1)",
                ProxyVariant::Vwap => "corr_phat''(1)",
                ProxyVariant::Mid => "corr_x(1)",
            };
            t3.push(row(stat.into(), v));
        }
        t4.push(row("mean_spread".into(), &p.mean_spread));
        if let Some(c1) = day_scalar(&|d| d.sign_autocorrelation.get(1).map(|e| (e.value, e.se))) {
            t4.push(row("C(1)".into(), &c1));
        }
        if let Some(v) = &p.news {
            t4.push(row("news_covariance".into(), v));
        }
        t4.push(row("implied_spread".into(), &p.implied_spread));
        t4.push(row("implied_spread_ratio".into(), &p.implied_ratio));
    }
    [t1, t2, t3, t4]
}

pub fn report(common: &Common, file: &FileConfig, a: &StatsArgs) -> CliResult<()> {
    let rebate = a.market.rebate.or(file.market.rebate);
    let opts = analysis_options(file, a.lags, a.bins, a.horizon, &MarketConfig::default())?;
    let loaded = load_frames(common, &a.frames)?;
    let tickers = analyze_all(&loaded, &opts, rebate)?;
    let cfg = StatsConfig {
        options: opts,
        rebate_override: rebate,
    };
    let prov = frame_provenance("report", &cfg, &loaded)?;
    let tables = report_tables(&tickers, &opts);
    match common.format {
        Format::Csv => {
            for (i, t) in tables.iter().enumerate() {
                write_csv_table(
                    &common.out.join(format!("table{}.csv", i + 1)),
                    &prov,
                    &["ticker", "statistic", "value", "se"],
                    t.iter()
                        .map(|r| vec![r.ticker.clone(), r.statistic.clone(), r.value.to_string(), r.se.to_string()]),
                )?;
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                table1: &'a [TableRow],
                table2: &'a [TableRow],
                table3: &'a [TableRow],
                table4: &'a [TableRow],
            }
            write_json(
                &common.out.join("report.json"),
                &prov,
                &Body {
                    table1: &tables[0],
                    table2: &tables[1],
                    table3: &tables[2],
                    table4: &tables[3],
                },
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SynthConfig {
    ticker: String,
    date: String,
    events: usize,
    levels: usize,
    seed: u64,
}

pub fn synth(common: &Common, file: &FileConfig, a: &SynthArgs) -> CliResult<()> {
    let s = &file.synth;
    let d = SyntheticConfig::default();
    let cfg = SynthConfig {
        ticker: a.ticker.clone().or(s.ticker.clone()).unwrap_or_else(|| "SYNTH".into()),
        date: a.date.clone().or(s.date.clone()).unwrap_or_else(|| "2015-06-01".into()),
        events: a.events.or(s.events).unwrap_or(d.n_events),
        levels: a.levels.or(s.levels).unwrap_or(d.levels),
        seed: a.seed.or(s.seed).unwrap_or(d.seed),
    };
    if cfg.levels == 0 || cfg.events == 0 {
        return Err(anyhow!("levels and events must be positive").into());
    }
    if cfg.ticker.contains('_') || cfg.date.contains('_') {
        return Err(anyhow!("ticker and date may not contain '_'").into());
    }
    let day = generate(&SyntheticConfig {
        seed: cfg.seed,
        n_events: cfg.events,
        levels: cfg.levels,
        ..d
    });
    let stem = format!("{}_{}_34200000_57600000", cfg.ticker, cfg.date);
    let mut msg = Vec::new();
    write_message_file(&mut msg, &day.events).context("encoding messages")?;
    let mut ob = Vec::new();
    write_snapshot_file(&mut ob, &day.snapshots).context("encoding snapshots")?;
    let msg_path = common.out.join(format!("{stem}_message_{}.csv", cfg.levels));
    let ob_path = common.out.join(format!("{stem}_orderbook_{}.csv", cfg.levels));
    write_file(&msg_path, &msg)?;
    write_file(&ob_path, &ob)?;
    // LOBSTER files carry no header, so provenance goes in a sidecar.
    let mut prov = Provenance::new("synth", &cfg)?;
    prov.inputs.clear();
    #[derive(Serialize)]
    struct Body {
        outputs: Vec<output::InputDigest>,
    }
    let outputs = [(&msg_path, &msg), (&ob_path, &ob)]
        .iter()
        .map(|(p, b)| output::InputDigest {
            path: p.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
            sha256: output::sha256_hex(b),
        })
        .collect();
    write_json(&common.out.join(format!("{stem}.provenance.json")), &prov, &Body { outputs })?;
    Ok(())
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::from_stats("statistics", e)
    }
}
