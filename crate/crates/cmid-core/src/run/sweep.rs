use std::fmt::Write as _;
use std::fs;

use super::config::{RunConfig, SweepAxis};
use super::runner::{run_train, RunSummary};
use crate::{Error, Result};

/// One run per axis value, sharing the base seed list.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub final_mean: f64,
    pub final_stderr: f64,
    pub zero_shot_mean: Option<f64>,
    pub zero_shot_stderr: Option<f64>,
}

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,final_mean,final_stderr,zero_shot_mean,zero_shot_stderr\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.value,
                r.final_mean,
                r.final_stderr,
                r.zero_shot_mean.map_or(String::new(), |v| v.to_string()),
                r.zero_shot_stderr.map_or(String::new(), |v| v.to_string()),
            )
            .unwrap();
        }
        out
    }
}

fn apply_axis(cfg: &mut RunConfig, axis: SweepAxis, value: f64) -> Result<()> {
    match axis {
        SweepAxis::Alpha => cfg.cmid.alpha = value,
        SweepAxis::Rho => cfg.env.rho = value,
        SweepAxis::History => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::Config(format!("history sweep value must be a non-negative integer, got {value}")));
            }
            cfg.cmid.history = value as usize;
        }
        SweepAxis::K => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(Error::Config(format!("k sweep value must be a positive integer, got {value}")));
            }
            cfg.cmid.k = value as usize;
        }
    }
    Ok(())
}

fn axis_tag(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Alpha => "alpha",
        SweepAxis::Rho => "rho",
        SweepAxis::History => "history",
        SweepAxis::K => "k",
    }
}

/// Runs the sweep described by `cfg.sweep`: independent full runs per axis
/// value under `io.out_dir/<axis>_<value>/`, plus a merged summary table.
pub fn run_sweep(cfg: &RunConfig) -> Result<(SweepSummary, Vec<RunSummary>)> {
    let axis = cfg
        .sweep
        .axis
        .ok_or_else(|| Error::Config("sweep.axis must be set for run_sweep".into()))?;
    if cfg.sweep.values.is_empty() {
        return Err(Error::Config("sweep.values must not be empty".into()));
    }
    fs::create_dir_all(&cfg.io.out_dir)?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &value in &cfg.sweep.values {
        let mut sub = cfg.clone();
        apply_axis(&mut sub, axis, value)?;
        sub.io.out_dir = cfg.io.out_dir.join(format!("{}_{value}", axis_tag(axis)));
        sub.sweep.axis = None;
        sub.sweep.values.clear();
        sub.validate()?;
        let summary = run_train(&sub)?;
        rows.push(SweepRow {
            value,
            final_mean: summary.final_mean,
            final_stderr: summary.final_stderr,
            zero_shot_mean: summary.zero_shot_mean,
            zero_shot_stderr: summary.zero_shot_stderr,
        });
        summaries.push(summary);
    }
    let sweep = SweepSummary { axis, rows };
    fs::write(cfg.io.out_dir.join("sweep_summary.csv"), sweep.to_csv())?;
    fs::write(
        cfg.io.out_dir.join("sweep_summary.json"),
        serde_json::to_string_pretty(&sweep).expect("sweep serialises"),
    )?;
    Ok((sweep, summaries))
}
