//! The report written next to the trajectory CSV, and the output directory
//! handling around it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use banlin_core::env::{RegretKind, TheoremBound};
use serde::Serialize;

use crate::config::{ExperimentConfig, Resolved, Source};
use crate::experiment::{Experiment, RangeStats};
use crate::io::TrajectoryWriter;
use crate::json;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: usize,
    pub cumulative_loss: f64,
    pub best_action: Vec<f64>,
    pub best_loss: f64,
    pub regret: f64,
    pub certificate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// Resolved config without output locations.
    pub config: ExperimentConfig,
    pub provenance: BTreeMap<String, Source>,
    pub warnings: Vec<String>,
    pub theorem: TheoremBound,
    pub regret_kind: RegretKind,
    pub seeds: usize,
    pub mean_regret: f64,
    pub stderr: f64,
    pub bound: f64,
    pub mean_certificate: f64,
    pub certificate_gap_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeStats>,
    pub per_seed: Vec<SeedSummary>,
    pub pass_bound: bool,
    /// Mean regret within three standard errors of the mean certificate.
    pub pass_certificate: bool,
    pub pass_range: bool,
    pub pass: bool,
}

impl Report {
    pub fn new(resolved: &Resolved, exp: &Experiment) -> Self {
        let mut config = resolved.config.clone();
        config.out_dir = None;
        let mut provenance = resolved.provenance.clone();
        provenance.remove("out_dir");
        let r = &exp.regret;
        let range = exp.range();
        let pass_bound = r.within_bound();
        let pass_certificate = r.within_certificate();
        let pass_range = range.is_none_or(|s| s.exceedances == 0);
        let per_seed = exp
            .runs
            .iter()
            .map(|run| SeedSummary {
                seed: run.seed,
                cumulative_loss: run.summary.cum_loss,
                best_action: run.summary.best_action.clone(),
                best_loss: run.summary.best_loss,
                regret: run.summary.regret,
                certificate: run.summary.certificate,
                range: run.range,
            })
            .collect();
        Self {
            config,
            provenance,
            warnings: resolved.warnings.clone(),
            theorem: exp.theorem,
            regret_kind: r.kind,
            seeds: r.seeds,
            mean_regret: r.mean_regret,
            stderr: r.stderr,
            bound: r.bound,
            mean_certificate: r.mean_certificate,
            certificate_gap_stderr: r.certificate_gap_stderr,
            range,
            per_seed,
            pass_bound,
            pass_certificate,
            pass_range,
            pass: pass_bound && pass_certificate && pass_range,
        }
    }
}

/// Files written under a temporary name and renamed into place only once
/// all of them are complete; dropped uncommitted, they are deleted.
struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Staged {
    fn new() -> Self {
        Self { files: Vec::new(), committed: false }
    }

    fn path(&mut self, dir: &Path, name: &str) -> PathBuf {
        let tmp = dir.join(format!(".{name}.partial"));
        self.files.push((tmp.clone(), dir.join(name)));
        tmp
    }

    fn commit(mut self) -> anyhow::Result<()> {
        for (tmp, dst) in &self.files {
            fs::rename(tmp, dst).with_context(|| format!("moving {} into place", dst.display()))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, _) in &self.files {
                let _ = fs::remove_file(tmp);
            }
        }
    }
}

/// Writes `trajectory.csv`, `report.json` and `config.json` into `dir`.
pub fn write_outputs(dir: &Path, resolved: &Resolved, exp: &Experiment, report: &Report) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut staged = Staged::new();

    let csv_path = staged.path(dir, TRAJECTORY_FILE);
    let mut w = TrajectoryWriter::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    for run in &exp.runs {
        for row in &run.rows {
            w.write(run.seed, row)?;
        }
    }
    w.finish()?;

    let report_path = staged.path(dir, REPORT_FILE);
    fs::write(&report_path, json::to_string_pretty(report)?)?;
    let config_path = staged.path(dir, CONFIG_FILE);
    fs::write(&config_path, json::to_string_pretty(&resolved.config)?)?;

    staged.commit()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_files_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let tmp = {
            let mut s = Staged::new();
            let p = s.path(dir.path(), "x.csv");
            fs::write(&p, "partial").unwrap();
            p
        };
        assert!(!tmp.exists());
        assert!(!dir.path().join("x.csv").exists());
        let mut s = Staged::new();
        let p = s.path(dir.path(), "x.csv");
        fs::write(&p, "done").unwrap();
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("x.csv")).unwrap(), "done");
        assert!(!p.exists());
    }
}
