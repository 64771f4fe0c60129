//! Ground-truth paths of the MRR model, on continuous quotes or on a tick grid
//! with a sticky mid.

mod signs;

pub use signs::{generate_signs, SignProcess, SignProcessSpec};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{FrameSet, MarketConfig, TransactionFrame};
use signs::{draw_sign, SignState};

/// Price unit of discrete-mode frames, dollars.
pub const DISCRETE_PRICE_SCALE: f64 = 1e-4;
/// Price unit of continuous-mode frames, dollars.
pub const CONTINUOUS_PRICE_SCALE: f64 = 1e-8;
/// Clamp on the bid share of squared volume.
pub const VOLUME_CLAMP: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidSpec(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Continuous,
    Discrete,
}

impl std::str::FromStr for SimMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continuous" => Ok(SimMode::Continuous),
            "discrete" => Ok(SimMode::Discrete),
            _ => Err(format!("unknown mode `{s}` (expected continuous|discrete)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrrParams {
    /// Impact of a sign surprise, dollars.
    pub g: f64,
    /// Standard deviation of the Gaussian news shock, dollars.
    pub w_sigma: f64,
    /// Probability that the next sign copies the sign of the news shock.
    pub coupling: f64,
    pub tick: f64,
    pub rebate: f64,
    pub p0: f64,
    pub n_steps: usize,
    /// Standard deviation of the log total-depth scale.
    pub volume_noise: f64,
    /// Median total depth, shares.
    pub volume_scale: f64,
}

impl Default for MrrParams {
    fn default() -> Self {
        Self {
            g: 0.0028,
            w_sigma: 0.003,
            coupling: 0.0,
            tick: 0.01,
            rebate: 0.003,
            p0: 100.0,
            n_steps: 1_000_000,
            volume_noise: 0.1,
            volume_scale: 500.0,
        }
    }
}

impl MrrParams {
    pub fn validate(&self, mode: SimMode) -> Result<(), SimError> {
        if !(self.g > 0.0) {
            return Err(invalid("G must be positive"));
        }
        if !(self.w_sigma >= 0.0) {
            return Err(invalid("W_sigma must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(invalid("coupling must lie in [0, 1]"));
        }
        if self.coupling > 0.0 && self.w_sigma == 0.0 {
            return Err(invalid("coupling needs a non-zero news shock"));
        }
        if !(self.rebate >= 0.0) {
            return Err(invalid("rebate must be non-negative"));
        }
        if !(self.p0 > 0.0) || !(self.volume_scale >= 1.0) || !(self.volume_noise >= 0.0) {
            return Err(invalid("p0, volume_scale and volume_noise out of range"));
        }
        match mode {
            SimMode::Continuous => {
                if self.g <= self.rebate {
                    return Err(invalid("continuous quotes cross unless G > rebate"));
                }
            }
            SimMode::Discrete => {
                if !(self.tick > 0.0) {
                    return Err(invalid("tick must be positive"));
                }
                let units = self.tick / DISCRETE_PRICE_SCALE;
                if (units - units.round()).abs() > 1e-6 || units.round() < 2.0 {
                    return Err(invalid("tick must be a multiple of 0.0001 of at least 0.0002"));
                }
                if self.g > self.rebate {
                    return Err(invalid("discrete mode needs G <= rebate so the profitability intervals tile the price axis"));
                }
            }
        }
        Ok(())
    }
}

/// Depths whose squared-volume proxy sits at `p`, up to the clamp and rounding.
pub fn invert_volumes(p: f64, bid: f64, ask: f64, rebate: f64, scale: f64) -> (u64, u64) {
    let w = ((p - bid + rebate) / (ask - bid + 2.0 * rebate)).clamp(VOLUME_CLAMP, 1.0 - VOLUME_CLAMP);
    let vb = (scale * w.sqrt()).round().max(1.0) as u64;
    let va = (scale * (1.0 - w).sqrt()).round().max(1.0) as u64;
    (vb, va)
}

/// Grid quotes that only move when the fundamental price leaves the
/// rebate-widened profitability interval.
#[derive(Debug, Clone)]
pub struct StickyQuoter {
    bid: i64,
    tick: i64,
    unit: f64,
    rebate: f64,
    g: f64,
}

impl StickyQuoter {
    /// Place the quotes around `p` and settle them for `eps_hat`.
    pub fn new(p: f64, eps_hat: f64, params: &MrrParams) -> Self {
        let tick = (params.tick / DISCRETE_PRICE_SCALE).round() as i64;
        let raw = ((p - params.tick / 2.0) / DISCRETE_PRICE_SCALE).round() as i64;
        let mut q = Self {
            bid: raw.div_euclid(tick) * tick,
            tick,
            unit: DISCRETE_PRICE_SCALE,
            rebate: params.rebate,
            g: params.g,
        };
        q.update(p, eps_hat);
        q
    }

    pub fn bid_units(&self) -> i64 {
        self.bid
    }

    pub fn ask_units(&self) -> i64 {
        self.bid + self.tick
    }

    pub fn bid(&self) -> f64 {
        self.bid as f64 * self.unit
    }

    pub fn ask(&self) -> f64 {
        self.ask_units() as f64 * self.unit
    }

    pub fn mid(&self) -> f64 {
        (self.bid + self.ask_units()) as f64 * self.unit / 2.0
    }

    /// Prices at which both best queues remain profitable to hold.
    pub fn interval(&self, eps_hat: f64) -> (f64, f64) {
        (
            self.bid() - self.rebate + self.g * (1.0 + eps_hat),
            self.ask() + self.rebate - self.g * (1.0 - eps_hat),
        )
    }

    /// Shift by whole ticks until `p` is back inside the interval. Returns the
    /// number of ticks moved.
    pub fn update(&mut self, p: f64, eps_hat: f64) -> i64 {
        let start = self.bid;
        while p > self.interval(eps_hat).1 {
            self.bid += self.tick;
        }
        while p < self.interval(eps_hat).0 {
            self.bid -= self.tick;
        }
        (self.bid - start) / self.tick
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPath {
    pub mode: SimMode,
    pub params: MrrParams,
    pub signs: SignProcessSpec,
    /// Dollars per quote unit.
    pub price_scale: f64,
    pub p: Vec<f64>,
    pub eps: Vec<i8>,
    pub eps_hat: Vec<f64>,
    pub w: Vec<f64>,
    pub bid: Vec<i64>,
    pub ask: Vec<i64>,
    pub vbid: Vec<u64>,
    pub vask: Vec<u64>,
    /// The quotes moved after this step's trade.
    pub depleted: Vec<bool>,
}

impl SimPath {
    fn with_capacity(mode: SimMode, params: MrrParams, signs: SignProcessSpec, price_scale: f64) -> Self {
        let n = params.n_steps;
        Self {
            mode,
            params,
            signs,
            price_scale,
            p: Vec::with_capacity(n),
            eps: Vec::with_capacity(n),
            eps_hat: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            bid: Vec::with_capacity(n),
            ask: Vec::with_capacity(n),
            vbid: Vec::with_capacity(n),
            vask: Vec::with_capacity(n),
            depleted: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn mid(&self, t: usize) -> f64 {
        (self.bid[t] + self.ask[t]) as f64 * self.price_scale / 2.0
    }

    /// Frames in the shared exchange schema, one trade of one share per step.
    pub fn to_frames(&self) -> FrameSet {
        let market = MarketConfig {
            tick_size: self.params.tick,
            rebate: self.params.rebate,
            levels_tracked: 1,
        };
        let mut fs = FrameSet::new(market, self.price_scale);
        let mode = match self.mode {
            SimMode::Continuous => "continuous",
            SimMode::Discrete => "discrete",
        };
        fs.meta.insert("source".into(), format!("simulate-{mode}"));
        fs.meta.insert(
            "sim_params".into(),
            serde_json::to_string(&self.params).expect("params serialize"),
        );
        fs.meta.insert(
            "sign_process".into(),
            serde_json::to_string(&self.signs).expect("spec serializes"),
        );
        for t in 0..self.len() {
            fs.push(&TransactionFrame {
                t,
                wall_time_s: t as f64,
                eps: self.eps[t],
                bid: self.bid[t],
                ask: self.ask[t],
                vbid: self.vbid[t],
                vask: self.vask[t],
                traded_size: 1,
                depleted: self.depleted[t],
            });
        }
        fs
    }
}

/// Next predictor: the sign-process forecast, mixed with the news sign.
fn next_eps_hat(state: &SignState, coupling: f64, w: f64) -> f64 {
    let base = state.base();
    if coupling > 0.0 {
        let s = if w > 0.0 { 1.0 } else { -1.0 };
        coupling * s + (1.0 - coupling) * base
    } else {
        base
    }
}

/// Continuous quotes a = p + G(1 - eps_hat) - r and b = p - G(1 + eps_hat) + r.
pub fn simulate_continuous(params: &MrrParams, spec: &SignProcessSpec) -> Result<SimPath, SimError> {
    params.validate(SimMode::Continuous)?;
    spec.validate()?;
    let mut rng = spec.rng();
    let mut state = SignState::new(&spec.process);
    let mut path = SimPath::with_capacity(SimMode::Continuous, *params, spec.clone(), CONTINUOUS_PRICE_SCALE);
    let (g, r) = (params.g, params.rebate);
    let mut p = params.p0;
    let mut eps_hat = state.base();
    for _ in 0..params.n_steps {
        let e = draw_sign(&mut rng, eps_hat);
        let zw: f64 = StandardNormal.sample(&mut rng);
        let w = params.w_sigma * zw;
        let z: f64 = StandardNormal.sample(&mut rng);
        let bid = ((p - g * (1.0 + eps_hat) + r) / CONTINUOUS_PRICE_SCALE).round() as i64;
        let ask = ((p + g * (1.0 - eps_hat) - r) / CONTINUOUS_PRICE_SCALE).round() as i64;
        let scale = params.volume_scale * (params.volume_noise * z).exp();
        let (vb, va) = invert_volumes(
            p,
            bid as f64 * CONTINUOUS_PRICE_SCALE,
            ask as f64 * CONTINUOUS_PRICE_SCALE,
            r,
            scale,
        );
        path.p.push(p);
        path.eps.push(e as i8);
        path.eps_hat.push(eps_hat);
        path.w.push(w);
        path.bid.push(bid);
        path.ask.push(ask);
        path.vbid.push(vb);
        path.vask.push(va);
        path.depleted.push(false);

        p += g * (e - eps_hat) + w;
        state.push(e);
        eps_hat = next_eps_hat(&state, params.coupling, w);
    }
    Ok(path)
}

/// Tick-grid quotes with a spread of one tick and a sticky mid.
pub fn simulate_discrete(params: &MrrParams, spec: &SignProcessSpec) -> Result<SimPath, SimError> {
    params.validate(SimMode::Discrete)?;
    spec.validate()?;
    let mut rng = spec.rng();
    let mut state = SignState::new(&spec.process);
    let mut path = SimPath::with_capacity(SimMode::Discrete, *params, spec.clone(), DISCRETE_PRICE_SCALE);
    let (g, r) = (params.g, params.rebate);
    let mut p = params.p0;
    let mut eps_hat = state.base();
    let mut quoter = StickyQuoter::new(p, eps_hat, params);
    for _ in 0..params.n_steps {
        let e = draw_sign(&mut rng, eps_hat);
        let zw: f64 = StandardNormal.sample(&mut rng);
        let w = params.w_sigma * zw;
        let z: f64 = StandardNormal.sample(&mut rng);
        let scale = params.volume_scale * (params.volume_noise * z).exp();
        let (vb, va) = invert_volumes(p, quoter.bid(), quoter.ask(), r, scale);
        path.p.push(p);
        path.eps.push(e as i8);
        path.eps_hat.push(eps_hat);
        path.w.push(w);
        path.bid.push(quoter.bid_units());
        path.ask.push(quoter.ask_units());
        path.vbid.push(vb);
        path.vask.push(va);

        p += g * (e - eps_hat) + w;
        state.push(e);
        eps_hat = next_eps_hat(&state, params.coupling, w);
        path.depleted.push(quoter.update(p, eps_hat) != 0);
    }
    Ok(path)
}

pub fn simulate(mode: SimMode, params: &MrrParams, spec: &SignProcessSpec) -> Result<SimPath, SimError> {
    match mode {
        SimMode::Continuous => simulate_continuous(params, spec),
        SimMode::Discrete => simulate_discrete(params, spec),
    }
}
