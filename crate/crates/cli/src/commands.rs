use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fadecode::autoencoder::{train as train_system, Mode};
use fadecode::evaluation::{
    analyze_codebook, baseline, render_codebook, sweep, Chain, GramReport, BASELINES,
};
use fadecode::experiments::{CLASSICAL_TRIALS, LEARNED_TRIALS};
use fadecode::numerics::{FadingKind, FadingSpec};
use fadecode::{AwgnTransferChain, LearnedChain, TrainedSystem};

use crate::config::{grid_or_default, ExperimentConfig};
use crate::{CliError, Common};

pub const MODEL_EXTENSION: &str = "fdcn";

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn loss_csv(system: &TrainedSystem) -> String {
    let mut s = String::from("step,loss\n");
    for (i, l) in system.loss_trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{l}");
    }
    s
}

/// Saves a model with its metadata sidecar and loss trace as `<stem>.*`.
pub fn save_system(system: &TrainedSystem, dir: &Path, stem: &str) -> Result<PathBuf, CliError> {
    let model = dir.join(format!("{stem}.{MODEL_EXTENSION}"));
    system.save(&model)?;
    write_file(&dir.join(format!("{stem}_loss.csv")), &loss_csv(system))?;
    Ok(model)
}

pub fn train(common: &Common) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref())?;
    let mut config = cfg.train_config()?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = cfg.out_dir(common.out.as_deref());
    create_dir(&out)?;
    let system = train_system::<f64>(&config)?;
    let stem = cfg.train.name.as_deref().unwrap_or("model");
    let model = save_system(&system, &out, stem)?;
    println!("model: {}", model.display());
    println!("final_loss: {}", system.final_loss);
    Ok(())
}

pub struct EvalArgs {
    pub target: Option<String>,
    pub trials: Option<u64>,
    pub grid: Option<String>,
    pub fading: Option<String>,
    pub transfer: bool,
}

pub fn load_model(path: &Path) -> Result<TrainedSystem, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("model file {} does not exist", path.display())));
    }
    TrainedSystem::load(path).map_err(|e| CliError::Runtime(format!("cannot load {}: {e}", path.display())))
}

pub fn eval(common: &Common, args: EvalArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref())?;
    let target = args
        .target
        .or_else(|| cfg.eval.target.clone())
        .ok_or_else(|| CliError::Usage(format!("eval needs a model file or one of: {}", BASELINES.join(", "))))?;
    let fading_kind = match args.fading {
        Some(name) => name.parse::<FadingKind>().map_err(|e| CliError::Usage(e.to_string()))?,
        None => cfg.eval.fading.unwrap_or(FadingKind::Rayleigh),
    };
    let fading = FadingSpec::normalized(fading_kind);
    let transfer = args.transfer || cfg.eval.transfer.unwrap_or(false);
    let grid = grid_or_default(cfg.grid(args.grid.as_deref())?);
    let seed = cfg.seed(common.seed);

    let (chain, default_trials): (Box<dyn Chain>, u64) = if BASELINES.contains(&target.as_str()) {
        (baseline(&target, fading)?, CLASSICAL_TRIALS)
    } else {
        let path = PathBuf::from(&target);
        if path.extension().and_then(|e| e.to_str()) != Some(MODEL_EXTENSION) && !path.exists() {
            return Err(CliError::Usage(format!(
                "unknown baseline `{target}` (expected a .{MODEL_EXTENSION} model or one of: {})",
                BASELINES.join(", ")
            )));
        }
        let system = load_model(&path)?;
        let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
        let chain: Box<dyn Chain> = if transfer {
            if system.mode() != Mode::Awgn {
                return Err(CliError::Usage("--transfer needs an AWGN-trained model".into()));
            }
            Box::new(AwgnTransferChain::new(system, fading, format!("{label}_transfer"))?)
        } else {
            Box::new(LearnedChain::new(system, label)?)
        };
        (chain, LEARNED_TRIALS)
    };
    let trials = args.trials.or(cfg.trials).unwrap_or(default_trials);
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    let curve = sweep(chain.as_ref(), &grid, trials, seed)?;
    let out = cfg.out_dir(common.out.as_deref());
    create_dir(&out)?;
    let csv = curve.to_csv();
    write_file(&out.join(format!("{}.csv", curve.label)), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn report_text(system: &TrainedSystem, report: &GramReport) -> Result<String, CliError> {
    let mut s = String::new();
    let cfg = &system.config;
    let _ = writeln!(
        s,
        "M = {}, n = {}, mode = {}, fading = {}",
        cfg.messages,
        cfg.block_len,
        cfg.mode.name(),
        cfg.fading.kind()
    );
    s.push_str("codebook:\n");
    s.push_str(&render_codebook(&system.codebook()?));
    s.push_str("gram:\n");
    s.push_str(&render_codebook(&report.gram));
    let energies: Vec<String> = report.energies.iter().map(|e| format!("{e:.4}")).collect();
    let _ = writeln!(s, "energies: [{}]", energies.join(", "));
    let _ = writeln!(s, "max_offdiag_normalized: {:.4}", report.max_offdiag_normalized);
    let _ = writeln!(s, "classification: {}", report.classification);
    Ok(s)
}

pub fn analyze(common: &Common, model: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(common.config.as_deref())?;
    let path = model
        .or_else(|| cfg.analyze.model.clone())
        .ok_or_else(|| CliError::Usage("analyze needs a model file".into()))?;
    let system = load_model(&path)?;
    let report = analyze_codebook(&system.codebook()?);
    print!("{}", report_text(&system, &report)?);
    Ok(())
}
