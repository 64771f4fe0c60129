//! Published large-sample values for a few Nasdaq names (2015), kept for
//! comparison in reports and tests. Dollar amounts unless noted.

pub mod msft {
    pub const R1: f64 = 0.00277;
    pub const MEAN_SPREAD: f64 = 0.0118;
    pub const C1: f64 = 0.57;
    pub const DEPLETION_IMPACT: f64 = 0.0083;
    pub const LARGE_IMBALANCE_IMPACT: f64 = 0.0079;
    pub const CORR1_SQUARED: f64 = 0.015;
    pub const CORR1_LINEAR: f64 = 0.117;
    pub const CORR1_VWAP: f64 = 0.126;
    pub const CORR1_MID: f64 = -0.040;
    pub const NEWS_COVARIANCE: f64 = 0.0925;
    /// (lag, R(l)(1 - C(1)) / (1 - C(l))).
    pub const RESCALED_RESPONSE: [(usize, f64); 7] = [
        (1, 0.00277),
        (2, 0.00287),
        (3, 0.00294),
        (4, 0.00299),
        (5, 0.00302),
        (10, 0.00305),
        (20, 0.00299),
    ];
}

pub mod siri {
    pub const C1: f64 = 0.89;
    pub const MEAN_SPREAD: f64 = 0.0108;
    /// (lag, R(l)(1 - C(1)) / (1 - C(l))).
    pub const RESCALED_RESPONSE: [(usize, f64); 7] = [
        (1, 0.000588),
        (2, 0.000571),
        (3, 0.000548),
        (4, 0.000539),
        (5, 0.000531),
        (10, 0.000497),
        (20, 0.000489),
    ];
}

pub mod ibkr {
    pub const MEAN_SPREAD: f64 = 0.0421;
}

/// Permanent impact of a queue depletion, tick / 2 + rebate.
pub fn depletion_impact_prediction(tick: f64, rebate: f64) -> f64 {
    tick / 2.0 + rebate
}
