//! `rtil invert`: one inversion from a model file.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use rtil_core::generators::{load_model, LatentAssignment, LayeredGenerator};
use rtil_core::inversion::{
    csgm_invert, ilo_invert, mgan_invert, InversionConfig, InversionResult,
};
use rtil_core::numkit::RandomStream;
use rtil_core::operators::{MeasurementOperator, OperatorKind, OperatorSpec};
use rtil_core::theory::psnr;

use crate::config::{self, apply_env_seed, set, set_nested};
use crate::{io_failure, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Csgm,
    Ilo,
    Mgan,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Csgm => "csgm",
            Algo::Ilo => "ilo",
            Algo::Mgan => "mgan",
        }
    }
}

pub fn invert_with(
    algo: Algo,
    g: &LayeredGenerator,
    op: &MeasurementOperator,
    y: &[f64],
    cfg: &InversionConfig,
) -> Result<InversionResult, CliError> {
    Ok(match algo {
        Algo::Csgm => csgm_invert(g, op, y, cfg)?,
        Algo::Ilo => ilo_invert(g, op, y, cfg)?,
        Algo::Mgan => mgan_invert(g, op, y, cfg)?,
    })
}

pub fn load_generator(path: &Path) -> Result<LayeredGenerator, CliError> {
    load_model(path).map_err(|e| CliError::Usage(format!("model {}: {e}", path.display())))
}

/// Peak for PSNR: the configured value, else the signal's largest magnitude.
pub fn psnr_db(x: &[f64], estimate: &[f64], peak: Option<f64>) -> Result<f64, CliError> {
    let peak = peak.unwrap_or_else(|| x.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    if peak.is_nan() || peak <= 0.0 {
        return Ok(f64::NAN);
    }
    Ok(psnr(x, estimate, peak)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSource {
    /// JSON array of numbers.
    File { path: PathBuf },
    /// `x = G(z0)` with `z0` drawn from stream `(seed, 0)`.
    Draw { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertConfig {
    pub model: PathBuf,
    pub algo: Algo,
    pub operator: OperatorSpec,
    pub signal: SignalSource,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub peak: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// JSON config, or an earlier invert output.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    #[arg(long = "operator", value_parser = parse_operator_kind)]
    pub operator_kind: Option<OperatorKind>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub factor: Option<usize>,
    #[arg(long)]
    pub operator_seed: Option<u64>,
    /// Signal file (JSON array); without it the signal is drawn from the model.
    #[arg(long, conflicts_with = "signal_seed")]
    pub signal: Option<PathBuf>,
    #[arg(long)]
    pub signal_seed: Option<u64>,
    /// Number of latent codes for mgan.
    #[arg(long)]
    pub codes: Option<usize>,
    /// Per-stage iteration budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub iters: Option<Vec<usize>>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Inversion seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub peak: Option<f64>,
    /// Write the result JSON here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_operator_kind(s: &str) -> Result<OperatorKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown operator {s:?}; expected cs, circulant, inpaint or sr"))
}

fn read_signal(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = config::read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("signal {}: {e}", path.display())))
}

pub fn resolve_config(args: &InvertArgs) -> Result<InvertConfig, CliError> {
    let mut obj = config::load_config_file(args.config.as_deref())?;
    if let Some(serde_json::Value::Object(inv)) = obj.get_mut("inversion") {
        apply_env_seed(inv, "seed")?;
    } else {
        let mut inv = serde_json::Map::new();
        apply_env_seed(&mut inv, "seed")?;
        if !inv.is_empty() {
            obj.insert("inversion".into(), inv.into());
        }
    }
    set(&mut obj, "model", args.model.as_ref());
    set(&mut obj, "algo", args.algo);
    set_nested(&mut obj, "operator", "kind", args.operator_kind);
    set_nested(&mut obj, "operator", "ratio", args.ratio);
    set_nested(&mut obj, "operator", "factor", args.factor);
    set_nested(&mut obj, "operator", "seed", args.operator_seed);
    if let Some(path) = &args.signal {
        obj.insert(
            "signal".into(),
            serde_json::json!({"kind": "file", "path": path}),
        );
    } else if let Some(seed) = args.signal_seed {
        obj.insert(
            "signal".into(),
            serde_json::json!({"kind": "draw", "seed": seed}),
        );
    } else if !obj.contains_key("signal") {
        obj.insert(
            "signal".into(),
            serde_json::json!({"kind": "draw", "seed": 0}),
        );
    }
    if !obj.contains_key("operator") {
        obj.insert("operator".into(), serde_json::json!({"kind": "cs"}));
    }
    set_nested(&mut obj, "inversion", "n_codes", args.codes);
    set_nested(&mut obj, "inversion", "per_layer_iters", args.iters.clone());
    set_nested(&mut obj, "inversion", "lr_init", args.lr);
    set_nested(&mut obj, "inversion", "restarts", args.restarts);
    set_nested(&mut obj, "inversion", "seed", args.seed);
    set(&mut obj, "peak", args.peak);
    config::resolve(obj)
}

/// Kept apart from the inversion init streams so equal seeds don't start at the truth.
const SIGNAL_STREAM: u64 = 0x5167;

pub fn run(args: InvertArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(&args)?;
    cfg.inversion.validate()?;
    let g = load_generator(&cfg.model)?;
    let x = match &cfg.signal {
        SignalSource::File { path } => read_signal(path)?,
        SignalSource::Draw { seed } => {
            let z0 = RandomStream::new(*seed, SIGNAL_STREAM).normal_vec(g.latent_dim());
            g.forward(&LatentAssignment::new(z0))?
        }
    };
    if x.len() != g.output_dim() {
        return Err(CliError::Usage(format!(
            "signal has length {}, model outputs {}",
            x.len(),
            g.output_dim()
        )));
    }
    let op = cfg.operator.build(x.len())?;
    let y = op.apply(&x)?;
    let result = invert_with(cfg.algo, &g, &op, &y, &cfg.inversion)?;
    let db = psnr_db(&x, &result.estimate, cfg.peak)?;

    let doc = config::envelope(
        &cfg,
        vec![
            (
                "signal",
                serde_json::to_value(&x).expect("signal serializes"),
            ),
            ("psnr", serde_json::to_value(db).expect("number serializes")),
            (
                "result",
                serde_json::to_value(&result).expect("result serializes"),
            ),
        ],
    );
    let text = serde_json::to_string_pretty(&doc).expect("document serializes") + "\n";
    match &args.output {
        Some(path) => config::write_file(path, &text),
        None => out.write_all(text.as_bytes()).map_err(io_failure),
    }
}
