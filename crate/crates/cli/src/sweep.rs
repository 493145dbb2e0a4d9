//! `rtil sweep`: inversion error over a grid of undersampling ratios.
//!
//! CSV columns: `algo,ratio,trial,residual,psnr,wall_ms`. `residual` is the
//! final measurement residual `‖A x̂ − y‖`; `psnr` compares `x̂` with the true
//! signal. `wall_ms` is 0 unless `--timing` is given, so that outputs are
//! reproducible byte for byte.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rtil_core::gantrain::{sample_synthetic, DataSpec, Dataset};
use rtil_core::generators::{LatentAssignment, LayeredGenerator};
use rtil_core::inversion::InversionConfig;
use rtil_core::numkit::RandomStream;
use rtil_core::operators::{OperatorKind, OperatorSpec};
use rtil_core::supervised::LinearTheoryInstance;

use crate::config::{self, apply_env_seed, set};
use crate::invert::{invert_with, load_generator, psnr_db, Algo};
use crate::{io_failure, pool, CliError};

pub const CSV_HEADER: &str = "algo,ratio,trial,residual,psnr,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    /// A model file written by `rtil train` or by hand.
    File { path: PathBuf },
    /// The ground-truth two-layer linear generator `(W0*, W1*)`.
    Teacher {
        n0: usize,
        n1: usize,
        nd: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelSource,
    /// Signal distribution. Defaults to the teacher distribution (including
    /// its intermediate noise) for a teacher model and to `G(z0)` otherwise.
    #[serde(default)]
    pub data: Option<DataSpec>,
    pub ratios: Vec<f64>,
    #[serde(default = "default_algos")]
    pub algos: Vec<Algo>,
    pub trials: usize,
    #[serde(default = "default_operator")]
    pub operator: OperatorKind,
    #[serde(default = "default_factor")]
    pub factor: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub peak: Option<f64>,
}

fn default_algos() -> Vec<Algo> {
    vec![Algo::Csgm, Algo::Ilo]
}

fn default_operator() -> OperatorKind {
    OperatorKind::Cs
}

fn default_factor() -> usize {
    2
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep config JSON, or an earlier sweep CSV.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Record wall-clock time per cell (makes output nondeterministic).
    #[arg(long)]
    pub timing: bool,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub algo: Algo,
    pub ratio: f64,
    pub trial: usize,
    pub residual: f64,
    pub psnr: f64,
    pub wall_ms: u64,
}

enum Signals {
    Data(Dataset),
    Model,
}

/// One (ratio, trial) problem shared by every algorithm.
struct Cell {
    ratio_idx: usize,
    trial: usize,
}

fn build_model(source: &ModelSource) -> Result<(LayeredGenerator, Option<DataSpec>), CliError> {
    match *source {
        ModelSource::File { ref path } => Ok((load_generator(path)?, None)),
        ModelSource::Teacher { n0, n1, nd, seed } => {
            let inst = LinearTheoryInstance::new(n0, n1, nd, seed)?;
            let g = LayeredGenerator::two_layer_linear(inst.w0_star, inst.w1_star)?;
            Ok((g, Some(DataSpec::LinearTeacher { n0, n1, nd, seed })))
        }
    }
}

/// Config with model-dependent defaults filled in: the data distribution and
/// a stage list no longer than the generator.
pub fn resolve(mut cfg: SweepConfig) -> Result<(SweepConfig, LayeredGenerator), CliError> {
    if cfg.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
        return Err(CliError::Usage("ratios must lie in (0, 1]".into()));
    }
    if cfg.algos.is_empty() {
        return Err(CliError::Usage("algos must not be empty".into()));
    }
    let (g, teacher) = build_model(&cfg.model)?;
    if cfg.data.is_none() {
        cfg.data = teacher;
    }
    cfg.inversion.per_layer_iters.truncate(g.num_layers());
    cfg.inversion.validate()?;
    Ok((cfg, g))
}

fn run_cell(
    cfg: &SweepConfig,
    g: &LayeredGenerator,
    signals: &Signals,
    cell: &Cell,
    timing: bool,
) -> Result<Vec<Row>, CliError> {
    let label = ((cell.ratio_idx as u64) << 32) | cell.trial as u64;
    let mut stream = RandomStream::new(cfg.seed, 0).child(label);
    let x = match signals {
        Signals::Data(d) => sample_synthetic(d, 1, &mut stream).remove(0),
        Signals::Model => {
            let z0 = stream.normal_vec(g.latent_dim());
            g.forward(&LatentAssignment::new(z0))?
        }
    };
    if x.len() != g.output_dim() {
        return Err(CliError::Usage(format!(
            "data dimension {} does not match model output {}",
            x.len(),
            g.output_dim()
        )));
    }
    let ratio = cfg.ratios[cell.ratio_idx];
    let op = OperatorSpec {
        kind: cfg.operator,
        ratio,
        factor: cfg.factor,
        seed: stream.next_u64(),
    }
    .build(x.len())?;
    let y = op.apply(&x)?;
    let inv = InversionConfig {
        seed: stream.next_u64(),
        ..cfg.inversion.clone()
    };

    let mut rows = Vec::with_capacity(cfg.algos.len());
    for &algo in &cfg.algos {
        let cell_cfg = match algo {
            Algo::Ilo => inv.clone(),
            _ => InversionConfig {
                per_layer_iters: inv.per_layer_iters[..1].to_vec(),
                ..inv.clone()
            },
        };
        let start = Instant::now();
        let result = invert_with(algo, g, &op, &y, &cell_cfg)?;
        let wall_ms = if timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        rows.push(Row {
            algo,
            ratio,
            trial: cell.trial,
            residual: result.final_residual,
            psnr: psnr_db(&x, &result.estimate, cfg.peak)?,
            wall_ms,
        });
    }
    Ok(rows)
}

/// All rows, ordered by algorithm (config order), ratio (config order), trial.
pub fn compute_rows(
    cfg: &SweepConfig,
    g: &LayeredGenerator,
    timing: bool,
) -> Result<Vec<Row>, CliError> {
    let signals = match &cfg.data {
        Some(spec) => Signals::Data(Dataset::from_spec(spec)?),
        None => Signals::Model,
    };
    let cells: Vec<Cell> = (0..cfg.ratios.len())
        .flat_map(|ratio_idx| (0..cfg.trials).map(move |trial| Cell { ratio_idx, trial }))
        .collect();
    let per_cell: Vec<Vec<Row>> = cells
        .par_iter()
        .map(|c| run_cell(cfg, g, &signals, c, timing))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(per_cell.len() * cfg.algos.len());
    for k in 0..cfg.algos.len() {
        rows.extend(per_cell.iter().map(|cell_rows| cell_rows[k].clone()));
    }
    Ok(rows)
}

pub fn render_csv(cfg: &SweepConfig, rows: &[Row]) -> String {
    let mut s = config::csv_config_line(cfg);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algo.name(),
            r.ratio,
            r.trial,
            r.residual,
            r.psnr,
            r.wall_ms
        ));
    }
    s
}

pub fn run(args: SweepArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), CliError> {
    let mut obj = config::load_config_file(Some(&args.config))?;
    apply_env_seed(&mut obj, "seed")?;
    set(&mut obj, "seed", args.seed);
    set(&mut obj, "trials", args.trials);
    let (cfg, g) = resolve(config::resolve(obj)?)?;
    let rows = pool(args.jobs)?.install(|| compute_rows(&cfg, &g, args.timing))?;
    let csv = render_csv(&cfg, &rows);
    match &args.output {
        Some(path) => config::write_file(path, &csv),
        None => out.write_all(csv.as_bytes()).map_err(io_failure),
    }
}
