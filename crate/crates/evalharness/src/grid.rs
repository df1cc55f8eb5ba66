//! Cartesian (checkpoint, task, mask) evaluation and the results file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::eval::{evaluate, normalized_score, random_baseline, EpisodeRecord, EvalReport, EvalSettings, Policy};
use crate::{Result, TaskSpec};

pub struct GridOutcome {
    pub reports: Vec<EvalReport>,
    pub records: Vec<EpisodeRecord>,
}

/// Writes per-episode rows with the fixed column set.
pub fn write_results(path: impl AsRef<Path>, records: &[EpisodeRecord]) -> Result<()> {
    if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_summary(path: impl AsRef<Path>, reports: &[EvalReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in reports {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Fills `normalized` for every learned-policy report that has a `mask_k = 1`
/// sibling (same checkpoint and task size), which is its greedy baseline.
pub fn attach_greedy_normalization(reports: &mut [EvalReport]) {
    let baselines: Vec<(String, usize, usize, f64)> = reports
        .iter()
        .filter(|r| r.task.mask_k == Some(1))
        .map(|r| (r.checkpoint.clone(), r.task.n_agents, r.task.m_targets, r.mean_return))
        .collect();
    for r in reports.iter_mut() {
        r.normalized = baselines
            .iter()
            .find(|(c, n, m, _)| *c == r.checkpoint && (*n, *m) == (r.task.n_agents, r.task.m_targets))
            .and_then(|b| normalized_score(r.mean_return, b.3));
    }
}

/// Evaluates every cell of a grid of already loaded policies.
pub fn evaluate_grid(
    policies: &[Policy],
    tasks: &[TaskSpec],
    masks: &[Option<usize>],
    settings: &EvalSettings,
    with_random: bool,
) -> Result<GridOutcome> {
    let mut reports = Vec::new();
    let mut records = Vec::new();
    for policy in policies {
        for task in tasks {
            for &mask in masks {
                let (rep, recs) = evaluate(policy, &task.with_mask(mask)?, settings)?;
                reports.push(rep);
                records.extend(recs);
            }
        }
    }
    if with_random {
        for task in tasks {
            let (rep, recs) = random_baseline(&task.with_mask(None)?, settings)?;
            reports.push(rep);
            records.extend(recs);
        }
    }
    attach_greedy_normalization(&mut reports);
    Ok(GridOutcome { reports, records })
}

/// Loads every checkpoint named in `cfg.eval`, evaluates the grid, and writes
/// the results file (plus the summary, when configured).
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridOutcome> {
    cfg.validate()?;
    let e = &cfg.eval;
    let policies = e.checkpoints.iter().map(|p| Policy::load(p, e.policy_mode, e.nets)).collect::<Result<Vec<_>>>()?;
    let masks: Vec<Option<usize>> = e.masks.iter().map(|m| m.0).collect();
    let out = evaluate_grid(&policies, &e.task_specs()?, &masks, &e.settings(&cfg.world), e.random_baseline)?;
    write_results(&e.results, &out.records)?;
    if let Some(path) = &e.summary {
        write_summary(path, &out.reports)?;
    }
    Ok(out)
}
