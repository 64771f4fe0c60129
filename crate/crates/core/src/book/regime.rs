//! Tick-size regime from the mean pre-trade spread.

use serde::{Deserialize, Serialize};

use super::{BookError, FrameSet};

/// Mean spreads below this (dollars) are large-tick.
pub const LARGE_TICK_MAX_SPREAD: f64 = 0.013;
/// Mean spreads above this (dollars) are small-tick.
pub const SMALL_TICK_MIN_SPREAD: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TickRegime {
    Large,
    Medium,
    Small,
}

impl TickRegime {
    pub fn from_mean_spread(mean_spread: f64) -> Self {
        if mean_spread < LARGE_TICK_MAX_SPREAD {
            TickRegime::Large
        } else if mean_spread > SMALL_TICK_MIN_SPREAD {
            TickRegime::Small
        } else {
            TickRegime::Medium
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRegimeReport {
    pub regime: TickRegime,
    pub mean_spread: f64,
}

pub fn classify_tick_regime(frames: &FrameSet) -> Result<TickRegimeReport, BookError> {
    if frames.is_empty() {
        return Err(BookError::EmptyInput);
    }
    let sum: f64 = (0..frames.len()).map(|i| frames.spread(i)).sum();
    let mean_spread = sum / frames.len() as f64;
    Ok(TickRegimeReport {
        regime: TickRegime::from_mean_spread(mean_spread),
        mean_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(TickRegime::from_mean_spread(0.0118), TickRegime::Large);
        assert_eq!(TickRegime::from_mean_spread(0.0421), TickRegime::Small);
        assert_eq!(TickRegime::from_mean_spread(0.02), TickRegime::Medium);
        assert_eq!(TickRegime::from_mean_spread(0.013), TickRegime::Medium);
        assert_eq!(TickRegime::from_mean_spread(0.04), TickRegime::Medium);
    }

    #[test]
    fn empty_frames_rejected() {
        let fs = FrameSet::new(Default::default(), 1e-4);
        assert_eq!(classify_tick_regime(&fs), Err(BookError::EmptyInput));
    }
}
