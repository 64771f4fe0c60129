//! Trade-sign processes with a known one-step predictor.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignProcess {
    Iid,
    /// eps_hat_t = rho eps_{t-1}.
    Markov { rho: f64 },
    /// eps_hat_t = sum_k a_k eps_{t-k}, most recent first.
    LinearPredictor { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignProcessSpec {
    pub process: SignProcess,
    pub seed: u64,
}

impl SignProcessSpec {
    pub fn markov(rho: f64, seed: u64) -> Self {
        Self {
            process: SignProcess::Markov { rho },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match &self.process {
            SignProcess::Iid => Ok(()),
            SignProcess::Markov { rho } if rho.abs() < 1.0 => Ok(()),
            SignProcess::Markov { rho } => Err(SimError::InvalidSpec(format!("Markov rho {rho} outside (-1, 1)"))),
            SignProcess::LinearPredictor { weights } => {
                let l1: f64 = weights.iter().map(|a| a.abs()).sum();
                if weights.is_empty() || !(l1 < 1.0) {
                    Err(SimError::InvalidSpec(format!(
                        "linear predictor needs at least one weight and sum |a_k| < 1 (got {l1})"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Running predictor state.
#[derive(Debug, Clone)]
pub(crate) struct SignState {
    process: SignProcess,
    history: VecDeque<f64>,
}

impl SignState {
    pub fn new(process: &SignProcess) -> Self {
        let depth = match process {
            SignProcess::Iid => 0,
            SignProcess::Markov { .. } => 1,
            SignProcess::LinearPredictor { weights } => weights.len(),
        };
        Self {
            process: process.clone(),
            history: VecDeque::from(vec![0.0; depth]),
        }
    }

    /// Predictor for the next sign from past signs alone.
    pub fn base(&self) -> f64 {
        match &self.process {
            SignProcess::Iid => 0.0,
            SignProcess::Markov { rho } => rho * self.history[0],
            SignProcess::LinearPredictor { weights } => weights.iter().zip(&self.history).map(|(a, e)| a * e).sum(),
        }
    }

    pub fn push(&mut self, eps: f64) {
        if self.history.is_empty() {
            return;
        }
        self.history.pop_back();
        self.history.push_front(eps);
    }
}

#[inline]
pub(crate) fn draw_sign<R: Rng>(rng: &mut R, eps_hat: f64) -> f64 {
    if rng.random::<f64>() < (1.0 + eps_hat) / 2.0 {
        1.0
    } else {
        -1.0
    }
}

/// Signs and their conditional expectations.
pub fn generate_signs(spec: &SignProcessSpec, n: usize) -> Result<(Vec<i8>, Vec<f64>), SimError> {
    spec.validate()?;
    let mut rng = spec.rng();
    let mut state = SignState::new(&spec.process);
    let mut eps = Vec::with_capacity(n);
    let mut eps_hat = Vec::with_capacity(n);
    for _ in 0..n {
        let h = state.base();
        let e = draw_sign(&mut rng, h);
        eps.push(e as i8);
        eps_hat.push(h);
        state.push(e);
    }
    Ok((eps, eps_hat))
}
