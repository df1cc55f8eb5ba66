//! Task labels such as `4a4t` or `1ka1kt`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Team size, target count and optional evaluation mask for one grid cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub n_agents: usize,
    pub m_targets: usize,
    /// Keep only this many nearest target beliefs per pursuer each step.
    pub mask_k: Option<usize>,
    pub label: String,
}

impl TaskSpec {
    pub fn new(n_agents: usize, m_targets: usize, mask_k: Option<usize>) -> Result<Self> {
        if n_agents == 0 || m_targets == 0 {
            return Err(Error::InvalidArgument("tasks need at least one agent and one target".into()));
        }
        if mask_k == Some(0) {
            return Err(Error::InvalidArgument("mask_k must be at least 1".into()));
        }
        Ok(Self { n_agents, m_targets, mask_k, label: task_label(n_agents, m_targets) })
    }

    pub fn with_mask(&self, mask_k: Option<usize>) -> Result<Self> {
        Self::new(self.n_agents, self.m_targets, mask_k)
    }
}

impl FromStr for TaskSpec {
    type Err = Error;

    /// Parses `NaMt`; counts take an optional `k` (thousands) suffix.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::TaskLabel { label: s.to_string(), reason: reason.to_string() };
        let body = s.trim().strip_suffix('t').ok_or_else(|| bad("must end in 't'"))?;
        let (n, m) = body.split_once('a').ok_or_else(|| bad("missing 'a' separator"))?;
        let n = parse_count(n).ok_or_else(|| bad("bad agent count"))?;
        let m = parse_count(m).ok_or_else(|| bad("bad target count"))?;
        if n == 0 || m == 0 {
            return Err(bad("counts must be positive"));
        }
        Self::new(n, m, None)
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mask_k {
            Some(k) => write!(f, "{}-k{k}", self.label),
            None => f.write_str(&self.label),
        }
    }
}

fn parse_count(s: &str) -> Option<usize> {
    let (digits, scale) = match s.strip_suffix('k') {
        Some(d) => (d, 1000),
        None => (s, 1),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<usize>().ok()?.checked_mul(scale)
}

fn format_count(c: usize) -> String {
    if c >= 1000 && c % 1000 == 0 {
        format!("{}k", c / 1000)
    } else {
        c.to_string()
    }
}

/// Canonical label, e.g. `task_label(1000, 1000) == "1ka1kt"`.
pub fn task_label(n: usize, m: usize) -> String {
    format!("{}a{}t", format_count(n), format_count(m))
}

/// Comma-separated list of task labels.
pub fn parse_grid(spec: &str) -> Result<Vec<TaskSpec>> {
    let tasks: Vec<TaskSpec> = spec.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if tasks.is_empty() {
        return Err(Error::InvalidArgument(format!("empty task grid {spec:?}")));
    }
    Ok(tasks)
}

/// `none` or a positive count.
pub fn parse_mask(s: &str) -> Result<Option<usize>> {
    match s.trim() {
        "none" | "" => Ok(None),
        k => match k.parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::InvalidArgument(format!("mask must be 'none' or a positive count, got {s:?}"))),
            Ok(k) => Ok(Some(k)),
        },
    }
}
