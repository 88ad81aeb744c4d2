//! Training recipes for the published experiments and the restart policy.
//!
//! Every recipe is fully determined by its config; retraining walks
//! [`RESTART_SEEDS`] in order and keeps the first system that passes the
//! recipe's check (if it has one).

use crate::autoencoder::{train_with_restarts, AutoencoderConfig, Mode, RestartOutcome, TrainedSystem};
use crate::error::Result;
use crate::evaluation::{estimate_bler, linspace, LearnedChain};
use crate::numerics::{FadingKind, FadingSpec, Rng};

/// Training seeds, tried in this order.
pub const RESTART_SEEDS: [u64; 3] = [0, 1, 2];

/// Master seed for evaluation sweeps.
pub const EVAL_SEED: u64 = 20_240_601;

pub const CLASSICAL_TRIALS: u64 = 1_000_000;
pub const LEARNED_TRIALS: u64 = 100_000;

/// Stream for restart validation; sweeps only use streams `0..grid.len()`.
const VALIDATION_STREAM: u64 = u64::MAX;

/// Block lengths shown for `M = 2` and `M = 4` no-CSI codes.
pub const M2_BLOCK_LENGTHS: [usize; 4] = [2, 3, 4, 5];
pub const M4_BLOCK_LENGTHS: [usize; 5] = [4, 5, 6, 7, 8];
pub const M4_TABLE_BLOCK_LENGTHS: [usize; 3] = [4, 5, 6];

/// The 30-point grid used for the SISO comparison.
pub fn siso_grid() -> Vec<f64> {
    linspace(-2.0, 20.0, 30)
}

/// Post-training check that decides whether a restart is needed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub snr_db: f64,
    pub max_bler: f64,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub config: AutoencoderConfig,
    pub check: Option<Check>,
}

impl Recipe {
    /// `M = 2` no-CSI code. Block lengths above 2 use wider networks, which
    /// the two-chip diversity codes need to be found reliably.
    pub fn no_csi_m2(block_len: usize, fading: FadingKind, train_snr_db: f64) -> Self {
        let mut config = AutoencoderConfig::new(2, block_len, Mode::NoCsi);
        config.fading = FadingSpec::normalized(fading);
        config.train_snr_db = train_snr_db;
        if block_len > 2 {
            config.encoder_hidden = vec![32];
            config.decoder_hidden = vec![128, 64];
        }
        // a single-chip code has no diversity and stays above this at 20 dB
        let check = (block_len == 5).then_some(Check { snr_db: 20.0, max_bler: 0.006, trials: 20_000 });
        Self { name: format!("learned_m2_n{block_len}_{}", fading.name()), config, check }
    }

    /// `M = 4` no-CSI code over Rayleigh fading, trained at 10 dB.
    pub fn no_csi_m4(block_len: usize) -> Self {
        let mut config = AutoencoderConfig::new(4, block_len, Mode::NoCsi);
        config.train_snr_db = 10.0;
        Self { name: format!("learned_m4_n{block_len}"), config, check: None }
    }

    /// `M = 16`, `n = 7` code with receiver CSI over Rayleigh fading.
    pub fn csir_m16() -> Self {
        let config = AutoencoderConfig::new(16, 7, Mode::Csir);
        Self { name: "learned_csir".into(), config, check: None }
    }

    /// `M = 16`, `n = 7` code trained on the real AWGN channel.
    pub fn awgn_m16() -> Self {
        let config = AutoencoderConfig::new(16, 7, Mode::Awgn);
        Self { name: "learned_awgn".into(), config, check: None }
    }

    /// Trains with the restart policy.
    pub fn train(&self, seeds: &[u64]) -> Result<RestartOutcome<f64>> {
        let mut check_error = None;
        let outcome = train_with_restarts::<f64>(&self.config, seeds, |sys| match self.check {
            None => true,
            Some(check) => match validation_bler(sys, check) {
                Ok(bler) => bler <= check.max_bler,
                Err(e) => {
                    check_error.get_or_insert(e);
                    false
                }
            },
        })?;
        match check_error {
            Some(e) => Err(e),
            None => Ok(outcome),
        }
    }
}

/// BLER of `system` on its own channel at the check point, on a stream that
/// no evaluation sweep uses.
pub fn validation_bler(system: &TrainedSystem<f64>, check: Check) -> Result<f64> {
    let chain = LearnedChain::new(system.clone(), "validation")?;
    let rng = Rng::new(system.config.seed, VALIDATION_STREAM);
    Ok(estimate_bler(&chain, check.snr_db, check.trials, &rng)?.bler)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipes_validate() {
        for n in M2_BLOCK_LENGTHS {
            Recipe::no_csi_m2(n, FadingKind::Rayleigh, 7.0).config.validate().unwrap();
        }
        for n in M4_BLOCK_LENGTHS {
            Recipe::no_csi_m4(n).config.validate().unwrap();
        }
        Recipe::csir_m16().config.validate().unwrap();
        Recipe::awgn_m16().config.validate().unwrap();
        assert_eq!(siso_grid().len(), 30);
    }

    #[test]
    fn restart_walks_seeds_until_check_passes() {
        let mut recipe = Recipe::no_csi_m2(2, FadingKind::Rayleigh, 7.0);
        recipe.config.steps = 5;
        recipe.config.batch_size = 8;
        recipe.check = Some(Check { snr_db: 20.0, max_bler: -1.0, trials: 10 });
        let out = recipe.train(&RESTART_SEEDS).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.attempts, 3);
        assert_eq!(out.seed, 2);
        recipe.check = Some(Check { snr_db: 20.0, max_bler: 1.0, trials: 10 });
        let out = recipe.train(&RESTART_SEEDS).unwrap();
        assert!(out.accepted && out.seed == 0 && out.attempts == 1);
    }
}
