use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::trace::{us_to_secs, EpisodeTrace, EventKind, Outcome, TraceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub task: String,
    pub config: String,
    pub seed: u64,
    pub outcome: Option<Outcome>,
    pub success: bool,
    pub subprocesses: Vec<bool>,
    /// Distance and time inside navigation decisions that walked.
    pub nav_distance_m: f64,
    pub nav_seconds: f64,
    /// cm/s; `None` when the episode never walked during navigation.
    pub avg_speed: Option<f64>,
    pub fm_queries: u64,
    pub decisions: u32,
    pub sim_seconds: f64,
    pub collisions: usize,
}

/// Speed from a distance and a duration, cm/s.
pub fn speed_cm_s(distance_m: f64, seconds: f64) -> Option<f64> {
    (seconds > 0.0).then(|| 100.0 * distance_m / seconds)
}

/// Per-episode metrics. Speed covers the decisions spent on a navigation
/// subprocess that contain walking, charging every cost inside them.
pub fn compute_metrics(trace: &EpisodeTrace) -> Result<EpisodeMetrics, TraceError> {
    let totals = trace.check()?;
    // decision -> (walked, distance, cost_us)
    let mut per: BTreeMap<u32, (bool, f64, u64)> = BTreeMap::new();
    let mut collisions = 0;
    for e in trace.events.iter().filter(|e| e.nav && e.decision > 0) {
        let entry = per.entry(e.decision).or_default();
        entry.2 += e.cost_us();
        match &e.event {
            EventKind::Skill { walking, distance, .. } => {
                entry.0 |= *walking;
                entry.1 += distance;
            }
            EventKind::Collision { .. } => collisions += 1,
            _ => {}
        }
    }
    collisions += trace.events.iter().filter(|e| !e.nav && matches!(e.event, EventKind::Collision { .. })).count();
    let (dist, us) = per.values().filter(|v| v.0).fold((0.0, 0u64), |(d, t), v| (d + v.1, t + v.2));
    let nav_seconds = us_to_secs(us);
    Ok(EpisodeMetrics {
        task: trace.header.task.clone(),
        config: trace.header.config.clone(),
        seed: trace.header.seed,
        outcome: totals.outcome,
        success: totals.outcome == Some(Outcome::Success),
        subprocesses: totals.subprocesses.clone(),
        nav_distance_m: dist,
        nav_seconds,
        avg_speed: speed_cm_s(dist, nav_seconds),
        fm_queries: totals.fm_queries,
        decisions: totals.decisions,
        sim_seconds: totals.sim_seconds,
        collisions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub task: String,
    pub config: String,
    pub episodes: usize,
    pub errors: usize,
    pub subprocess_names: Vec<String>,
    /// `None` (NA) when the cell has no episodes.
    pub subprocess_rates: Vec<Option<f64>>,
    pub overall_rate: Option<f64>,
    /// Pooled over episodes, cm/s.
    pub avg_speed: Option<f64>,
    pub mean_fm_queries: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cells: Vec<CellReport>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl CellReport {
    pub fn from_episodes(task: &str, config: &str, subprocess_names: Vec<String>, eps: &[EpisodeMetrics], errors: usize) -> Self {
        let rate = |f: &dyn Fn(&EpisodeMetrics) -> bool| mean(eps.iter().map(|e| if f(e) { 1.0 } else { 0.0 }));
        let subprocess_rates = (0..subprocess_names.len()).map(|i| rate(&|e| e.subprocesses.get(i).copied().unwrap_or(false))).collect();
        let (d, t) = eps.iter().fold((0.0, 0.0), |(d, t), e| (d + e.nav_distance_m, t + e.nav_seconds));
        CellReport {
            task: task.into(),
            config: config.into(),
            episodes: eps.len(),
            errors,
            subprocess_names,
            subprocess_rates,
            overall_rate: rate(&|e| e.success),
            avg_speed: speed_cm_s(d, t),
            mean_fm_queries: mean(eps.iter().map(|e| e.fm_queries as f64)),
        }
    }
}

impl MetricsReport {
    /// Groups traces by (task, config). Cells come out sorted.
    pub fn from_traces(traces: &[EpisodeTrace]) -> Result<Self, TraceError> {
        let mut groups: BTreeMap<(String, String), (Vec<String>, Vec<EpisodeMetrics>)> = BTreeMap::new();
        for t in traces {
            let m = compute_metrics(t)?;
            groups.entry((m.task.clone(), m.config.clone())).or_insert_with(|| (t.header.subprocesses.clone(), Vec::new())).1.push(m);
        }
        let cells = groups.into_iter().map(|((task, config), (names, eps))| CellReport::from_episodes(&task, &config, names, &eps, 0)).collect();
        Ok(MetricsReport { cells })
    }

    pub fn cell(&self, task: &str, config: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.task == task && c.config == config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width text table, one row per cell.
    pub fn to_table(&self) -> String {
        let na = |v: Option<f64>, prec: usize| v.map_or("NA".to_string(), |x| format!("{x:.prec$}"));
        let tw = self.cells.iter().map(|c| c.task.len()).max().unwrap_or(4).max(4);
        let cw = self.cells.iter().map(|c| c.config.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<tw$}  {:<cw$}  {:>4}  {:>4}  {:>7}  {:>10}  {:>7}  subprocess rates", "task", "config", "n", "err", "overall", "speed cm/s", "fm q");
        for c in &self.cells {
            let subs = c.subprocess_names.iter().zip(&c.subprocess_rates).map(|(n, r)| format!("{}={}", n.trim_end_matches('.'), na(*r, 2))).collect::<Vec<_>>().join("; ");
            let _ = writeln!(
                out,
                "{:<tw$}  {:<cw$}  {:>4}  {:>4}  {:>7}  {:>10}  {:>7}  {subs}",
                c.task,
                c.config,
                c.episodes,
                c.errors,
                na(c.overall_rate, 2),
                na(c.avg_speed, 2),
                na(c.mean_fm_queries, 1),
            );
        }
        out
    }
}
