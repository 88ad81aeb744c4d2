//! Experiment config files.
//!
//! The format is TOML: top-level keys shared by all commands, then one table
//! per command. Every key is optional and unknown keys are rejected.
//!
//! ```toml
//! seed = 20240601        # master evaluation seed
//! out = "results"        # output directory
//! trials = 100000        # Monte Carlo trials per SNR point
//! grid = "-2:20:20"      # lo:hi:count in dB
//!
//! [train]
//! name = "model"         # output file stem
//! messages = 2
//! block_len = 2
//! mode = "no_csi"        # no_csi | csir | awgn
//! fading = "rayleigh"    # rayleigh | custom | gamma | gumbel | folded_normal
//! gamma_shape = 2.0
//! gumbel_location = 0.0
//! train_snr_db = 7.0
//! steps = 20000
//! batch_size = 256
//! lr = 0.001
//! seed = 0
//! encoder_hidden = [8]   # default [4M]
//! decoder_hidden = [16, 8]  # default [8M, 4M]
//!
//! [eval]
//! target = "orth_classical"  # baseline name or model path
//! fading = "rayleigh"        # channel for baselines and AWGN transfer
//! transfer = false           # evaluate an AWGN model on fading with CSIR
//!
//! [analyze]
//! model = "results/model.fdcn"
//!
//! [reproduce]
//! target = "fig1"
//! steps = 20000              # training steps override
//! ```

use std::path::{Path, PathBuf};

use fadecode::autoencoder::{AutoencoderConfig, Mode};
use fadecode::evaluation::{default_grid, linspace};
use fadecode::experiments::EVAL_SEED;
use fadecode::numerics::{normalize_spec, FadingKind, FreeParams};
use serde::Deserialize;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "FADECODE_OUT";
pub const DEFAULT_OUT: &str = "fadecode-out";

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<u64>,
    pub grid: Option<String>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub reproduce: ReproduceSection,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub name: Option<String>,
    pub messages: Option<usize>,
    pub block_len: Option<usize>,
    pub mode: Option<Mode>,
    pub fading: Option<FadingKind>,
    pub gamma_shape: Option<f64>,
    pub gumbel_location: Option<f64>,
    pub train_snr_db: Option<f64>,
    pub steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub encoder_hidden: Option<Vec<usize>>,
    pub decoder_hidden: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub target: Option<String>,
    pub fading: Option<FadingKind>,
    pub transfer: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub model: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceSection {
    pub target: Option<String>,
    pub steps: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("{}: {e}", origin.display())))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text, p)
            }
        }
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(EVAL_SEED)
    }

    pub fn grid(&self, flag: Option<&str>) -> Result<Option<Vec<f64>>, CliError> {
        flag.or(self.grid.as_deref()).map(parse_grid).transpose()
    }

    pub fn train_config(&self) -> Result<AutoencoderConfig, CliError> {
        let t = &self.train;
        let messages = t.messages.unwrap_or(2);
        let block_len = t.block_len.unwrap_or(2);
        let mut cfg = AutoencoderConfig::new(messages, block_len, t.mode.unwrap_or(Mode::NoCsi));
        let free = FreeParams {
            gamma_shape: t.gamma_shape.unwrap_or(FreeParams::default().gamma_shape),
            gumbel_location: t.gumbel_location.unwrap_or(FreeParams::default().gumbel_location),
        };
        cfg.fading = normalize_spec(t.fading.unwrap_or(FadingKind::Rayleigh), free).map_err(usage)?;
        if let Some(v) = t.train_snr_db {
            cfg.train_snr_db = v;
        }
        if let Some(v) = t.steps {
            cfg.steps = v;
        }
        if let Some(v) = t.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = t.lr {
            cfg.lr = v;
        }
        if let Some(v) = t.seed {
            cfg.seed = v;
        }
        if let Some(v) = &t.encoder_hidden {
            cfg.encoder_hidden = v.clone();
        }
        if let Some(v) = &t.decoder_hidden {
            cfg.decoder_hidden = v.clone();
        }
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

fn usage(e: fadecode::Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parses `lo:hi:count`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("bad grid `{spec}`: {why} (expected lo:hi:count)"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err(bad("need three fields"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
    let count: usize = count.trim().parse().map_err(|_| bad("count is not a whole number"))?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(bad("bounds must be finite"));
    }
    if count == 0 {
        return Err(bad("grid is empty"));
    }
    if hi < lo {
        return Err(bad("hi is below lo"));
    }
    Ok(linspace(lo, hi, count))
}

/// Grid from the flag or config, or the 20-point default.
pub fn grid_or_default(grid: Option<Vec<f64>>) -> Vec<f64> {
    grid.unwrap_or_else(default_grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        assert_eq!(parse_grid("-2:20:20").unwrap(), default_grid());
        assert_eq!(parse_grid("20:20:1").unwrap(), vec![20.0]);
        assert!(parse_grid("0:10:0").is_err());
        assert!(parse_grid("0:10").is_err());
        assert!(parse_grid("a:10:3").is_err());
        assert!(parse_grid("10:0:3").is_err());
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
            seed = 5
            out = "o"
            trials = 10
            grid = "0:1:2"
            [train]
            name = "m"
            messages = 4
            block_len = 3
            mode = "csir"
            fading = "gamma"
            gamma_shape = 3.0
            train_snr_db = 5.0
            steps = 10
            batch_size = 8
            lr = 0.01
            seed = 9
            encoder_hidden = [4]
            decoder_hidden = [8, 4]
            [eval]
            target = "uncoded_csir"
            fading = "gumbel"
            transfer = false
            [analyze]
            model = "m.fdcn"
            [reproduce]
            target = "fig4"
            steps = 3
        "#;
        let cfg = ExperimentConfig::parse(text, Path::new("x.toml")).unwrap();
        let t = cfg.train_config().unwrap();
        assert_eq!((t.messages, t.block_len, t.mode, t.seed), (4, 3, Mode::Csir, 9));
        assert_eq!(t.fading.kind(), FadingKind::Gamma);
        assert_eq!(cfg.grid(None).unwrap().unwrap(), vec![0.0, 1.0]);
        assert_eq!(cfg.seed(Some(1)), 1);
        assert_eq!(cfg.out_dir(None), PathBuf::from("o"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("[train]\nbatchsize = 3\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("batchsize"), "{err}");
        assert!(ExperimentConfig::parse("colour = 1\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::default();
        let t = cfg.train_config().unwrap();
        assert_eq!(t, AutoencoderConfig::new(2, 2, Mode::NoCsi));
        assert_eq!(cfg.seed(None), EVAL_SEED);
    }
}
