//! `rtil train`: paired vanilla and RTIL runs from one config.
//!
//! Writes `vanilla_model.json`, `rtil_model.json`, `vanilla_history.csv` and
//! `rtil_history.csv` into the output directory. Model files carry the
//! resolved config next to the weights.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use rtil_core::gantrain::{history_csv, train, TrainConfig, TrainMode, TrainOutcome};

use crate::config::{self, apply_env_seed, set};
use crate::{io_failure, CliError};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training config JSON, or an earlier model file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

pub fn mode_name(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::Rtil => "rtil",
        TrainMode::Vanilla => "vanilla",
    }
}

fn write_outputs(dir: &Path, cfg: &TrainConfig, outcome: &TrainOutcome) -> Result<(), CliError> {
    let name = mode_name(cfg.mode);
    let model: serde_json::Value =
        serde_json::from_str(&outcome.generator.to_json()).expect("model json is valid");
    let mut doc = config::envelope(cfg, Vec::new());
    if let (serde_json::Value::Object(d), serde_json::Value::Object(m)) = (&mut doc, model) {
        d.extend(m);
    }
    let text = serde_json::to_string_pretty(&doc).expect("model serializes") + "\n";
    config::write_file(&dir.join(format!("{name}_model.json")), &text)?;
    let csv = config::csv_config_line(cfg) + &history_csv(&outcome.history);
    config::write_file(&dir.join(format!("{name}_history.csv")), &csv)
}

pub fn run(args: TrainArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let mut obj = config::load_config_file(Some(&args.config))?;
    // Configs lifted from an output describe a single run; the pair is
    // always re-derived here.
    obj.remove("mode");
    apply_env_seed(&mut obj, "seed")?;
    set(&mut obj, "seed", args.seed);
    set(&mut obj, "steps", args.steps);
    let base: TrainConfig = config::resolve(obj)?;
    base.validate()?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let configs = [TrainMode::Vanilla, TrainMode::Rtil].map(|mode| TrainConfig {
        mode,
        ..base.clone()
    });
    let (van, rtil) = rayon::join(|| train(&configs[0]), || train(&configs[1]));
    for (cfg, outcome) in configs.iter().zip([van, rtil]) {
        let outcome = outcome.map_err(|e| {
            CliError::from(e).prefixed(&format!("{} training", mode_name(cfg.mode)))
        })?;
        write_outputs(&args.out_dir, cfg, &outcome)?;
        if let Some(last) = outcome.history.last() {
            writeln!(
                out,
                "{}: {} steps, final d_loss {:.6}, g_loss {:.6}",
                mode_name(cfg.mode),
                outcome.history.len(),
                last.d_loss,
                last.g_loss
            )
            .map_err(io_failure)?;
        } else {
            writeln!(out, "{}: 0 steps", mode_name(cfg.mode)).map_err(io_failure)?;
        }
    }
    Ok(())
}
