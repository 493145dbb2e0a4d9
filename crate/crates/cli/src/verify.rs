//! `rtil verify`: theory checks over a batch of seeded instances.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rtil_core::supervised::LinearTheoryInstance;
use rtil_core::theory::{theory_report, ReportOptions, Status, TheoryReport, Verdict};

use crate::config::{self, apply_env_seed, set};
use crate::{io_failure, pool, CliError};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// JSON config, or an earlier verify report.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub nd: Option<usize>,
    /// Number of Gaussian measurements.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub rtil_mc_samples: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "d_n0")]
    pub n0: usize,
    #[serde(default = "d_n1")]
    pub n1: usize,
    #[serde(default = "d_nd")]
    pub nd: usize,
    #[serde(default = "d_m")]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_instances")]
    pub instances: usize,
    #[serde(default = "d_mc")]
    pub mc_samples: usize,
    #[serde(default = "d_rtil_mc")]
    pub rtil_mc_samples: usize,
}

fn d_n0() -> usize {
    4
}
fn d_n1() -> usize {
    8
}
fn d_nd() -> usize {
    32
}
fn d_m() -> usize {
    16
}
fn d_instances() -> usize {
    20
}
fn d_mc() -> usize {
    100_000
}
fn d_rtil_mc() -> usize {
    1_000
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let (n0, n1, nd, m) = (self.n0, self.n1, self.nd, self.m);
        if !(n0 >= 1 && n0 < n1 && n1 < nd) {
            return Err(CliError::Usage(format!(
                "need 1 <= n0 < n1 < nd, got n0={n0} n1={n1} nd={nd}"
            )));
        }
        if !(m >= 1 && m < nd) {
            return Err(CliError::Usage(format!(
                "need 1 <= m < nd, got m={m} nd={nd}"
            )));
        }
        if self.mc_samples < 2 {
            return Err(CliError::Usage("mc_samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn instance_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

/// Number of instances allowed outside 3 standard errors: about 6%, at
/// least one.
pub fn mc_tolerance(instances: usize) -> usize {
    (instances * 6 / 100).max(1)
}

/// Reports for every instance, in seed order.
pub fn compute_reports(cfg: &VerifyConfig) -> Result<Vec<TheoryReport>, CliError> {
    let opts = ReportOptions {
        mc_samples: cfg.mc_samples,
        rtil_mc_samples: cfg.rtil_mc_samples,
        ..ReportOptions::default()
    };
    (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let inst = LinearTheoryInstance::new(cfg.n0, cfg.n1, cfg.nd, cfg.instance_seed(i))?;
            Ok(theory_report(&inst, cfg.m, &opts)?)
        })
        .collect()
}

pub fn suite_verdicts(reports: &[TheoryReport]) -> Vec<Verdict> {
    let outside = reports.iter().filter(|r| !r.vanilla_mc_within(3.0)).count();
    let allowed = mc_tolerance(reports.len());
    vec![Verdict {
        name: "vanilla_mc_agreement".into(),
        status: if outside <= allowed {
            Status::Pass
        } else {
            Status::Fail
        },
        detail: format!(
            "{outside} of {} instances outside 3 stderr (allowed {allowed})",
            reports.len()
        ),
    }]
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Skipped => "skip",
    }
}

pub fn render_table(reports: &[TheoryReport], suite: &[Verdict]) -> String {
    let mut s = format!(
        "{:>6} {:>4} {:>14} {:>24} {:>12} {:>11} {:>7}\n",
        "seed", "m", "vanilla", "vanilla mc", "bound", "rtil", "status"
    );
    for r in reports {
        let status = if r.passed() { "pass" } else { "FAIL" };
        s.push_str(&format!(
            "{:>6} {:>4} {:>14.6} {:>13.6} ± {:>8.4} {:>12.6} {:>11.3e} {:>7}\n",
            r.seed,
            r.m,
            r.vanilla_err_closed,
            r.vanilla_err_mc.mean,
            r.vanilla_err_mc.stderr,
            r.bound_err1,
            r.rtil_err_closed,
            status
        ));
        for v in r.failed() {
            s.push_str(&format!("       failed {}: {}\n", v.name, v.detail));
        }
    }
    for v in suite {
        s.push_str(&format!(
            "{}: {} ({})\n",
            v.name,
            status_word(v.status),
            v.detail
        ));
    }
    s
}

pub fn run(args: VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut obj = config::load_config_file(args.config.as_deref())?;
    apply_env_seed(&mut obj, "seed")?;
    set(&mut obj, "n0", args.n0);
    set(&mut obj, "n1", args.n1);
    set(&mut obj, "nd", args.nd);
    set(&mut obj, "m", args.m);
    set(&mut obj, "seed", args.seed);
    set(&mut obj, "instances", args.instances);
    set(&mut obj, "mc_samples", args.mc_samples);
    set(&mut obj, "rtil_mc_samples", args.rtil_mc_samples);
    let cfg: VerifyConfig = config::resolve(obj)?;
    cfg.validate()?;
    if cfg.m < cfg.n1 {
        writeln!(
            err,
            "warning: m = {} < n1 = {} is outside the exact-recovery regime; RTIL zero-error checks skipped",
            cfg.m, cfg.n1
        )
        .map_err(io_failure)?;
    }

    let reports = pool(args.jobs)?.install(|| compute_reports(&cfg))?;
    let suite = suite_verdicts(&reports);
    out.write_all(render_table(&reports, &suite).as_bytes())
        .map_err(io_failure)?;

    if let Some(path) = &args.output {
        let doc = config::envelope(
            &cfg,
            vec![
                (
                    "reports",
                    serde_json::to_value(&reports).expect("reports serialize"),
                ),
                (
                    "suite",
                    serde_json::to_value(&suite).expect("verdicts serialize"),
                ),
            ],
        );
        let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
        config::write_file(path, &text)?;
    }

    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.failed()
                .map(move |v| format!("{} (seed {})", v.name, r.seed))
        })
        .chain(
            suite
                .iter()
                .filter(|v| v.status == Status::Fail)
                .map(|v| v.name.clone()),
        )
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc_tolerance_matches_acceptance_bar() {
        assert_eq!(mc_tolerance(50), 3);
        assert_eq!(mc_tolerance(1), 1);
    }

    #[test]
    fn defaults_validate() {
        let cfg: VerifyConfig = config::resolve(serde_json::Map::new()).unwrap();
        cfg.validate().unwrap();
        assert_eq!((cfg.n0, cfg.n1, cfg.nd, cfg.m), (4, 8, 32, 16));
    }

    #[test]
    fn nd_below_n1_is_usage() {
        let cfg = VerifyConfig {
            nd: 6,
            ..config::resolve(serde_json::Map::new()).unwrap()
        };
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
    }
}
