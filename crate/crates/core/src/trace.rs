//! Line-delimited JSON episode traces.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2, TargetPhase};

/// State after one environment step, plus the actions that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub agents: Vec<Pose2>,
    pub targets: Vec<TargetPhase>,
    pub belief_means: Vec<[f64; 4]>,
    pub belief_logdets: Vec<f64>,
    pub observed: Vec<Vec<bool>>,
    pub actions: Vec<usize>,
    pub reward: f64,
}

impl TraceRecord {
    /// Reward implied by the recorded log-determinants.
    pub fn recomputed_reward(&self) -> f64 {
        -self.belief_logdets.iter().sum::<f64>() / self.belief_logdets.len() as f64
    }
}

pub fn write_record<W: Write>(w: &mut W, rec: &TraceRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, rec)?;
    w.write_all(b"\n")
}

pub fn read_records<R: BufRead>(r: R) -> std::io::Result<Vec<TraceRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| {
            let l = l?;
            serde_json::from_str(&l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}
