use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::episode::{run_episode, EpisodeConfig};
use super::metrics::{compute_metrics, CellReport, MetricsReport};
use super::scenario::Scenario;
use crate::trace::EpisodeTrace;

pub const DEFAULT_EPISODES: usize = 20;

/// Seed for one episode of one cell.
pub fn episode_seed(master: u64, task: &str, config: &str, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((task.len() as u64).to_le_bytes());
    h.update(task.as_bytes());
    h.update((config.len() as u64).to_le_bytes());
    h.update(config.as_bytes());
    h.update((index as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes_per_cell: usize,
    /// Cell templates; each `seed` field is ignored in favour of derived seeds.
    pub cells: Vec<EpisodeConfig>,
}

fn default_episodes() -> usize {
    DEFAULT_EPISODES
}

pub struct ExperimentResult {
    pub report: MetricsReport,
    pub traces: Vec<EpisodeTrace>,
    /// (task, config, seed, message) for episodes that could not run.
    pub failures: Vec<(String, String, u64, String)>,
}

/// Runs every cell in parallel with derived seeds and aggregates the metrics.
pub fn run_experiment(scenario: &Scenario, matrix: &Matrix) -> ExperimentResult {
    let jobs: Vec<(usize, EpisodeConfig)> = matrix
        .cells
        .iter()
        .enumerate()
        .flat_map(|(ci, cell)| {
            (0..matrix.episodes_per_cell).map(move |i| {
                let mut cfg = cell.clone();
                cfg.seed = episode_seed(matrix.master_seed, &cell.task, &cell.label(), i);
                (ci, cfg)
            })
        })
        .collect();
    let results: Vec<(usize, EpisodeConfig, Result<EpisodeTrace, String>)> =
        jobs.into_par_iter().map(|(ci, cfg)| {
            let r = run_episode(scenario, &cfg).map_err(|e| e.to_string());
            (ci, cfg, r)
        }).collect();

    let mut cells = Vec::new();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (ci, cell) in matrix.cells.iter().enumerate() {
        let names = scenario.task(&cell.task).map(|t| t.subprocesses.iter().map(|s| s.description.clone()).collect()).unwrap_or_default();
        let mut eps = Vec::new();
        let mut errors = 0;
        for (_, cfg, r) in results.iter().filter(|(i, _, _)| *i == ci) {
            match r.as_ref().map_err(Clone::clone).and_then(|t| compute_metrics(t).map(|m| (t, m)).map_err(|e| e.to_string())) {
                Ok((t, m)) => {
                    eps.push(m);
                    traces.push(t.clone());
                }
                Err(msg) => {
                    errors += 1;
                    failures.push((cfg.task.clone(), cfg.label(), cfg.seed, msg));
                }
            }
        }
        cells.push(CellReport::from_episodes(&cell.task, &cell.label(), names, &eps, errors));
    }
    cells.sort_by(|a, b| (&a.task, &a.config).cmp(&(&b.task, &b.config)));
    ExperimentResult { report: MetricsReport { cells }, traces, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_part() {
        let s = episode_seed(1, "a", "b", 0);
        assert_eq!(s, episode_seed(1, "a", "b", 0));
        assert_ne!(s, episode_seed(2, "a", "b", 0));
        assert_ne!(s, episode_seed(1, "ab", "", 0));
        assert_ne!(s, episode_seed(1, "a", "b", 1));
    }

    #[test]
    fn zero_episodes_gives_na_cell() {
        let m = Matrix { master_seed: 0, episodes_per_cell: 0, cells: vec![EpisodeConfig::new("navigate_table", 0)] };
        let r = run_experiment(&Scenario::office(), &m);
        assert_eq!(r.report.cells.len(), 1);
        assert_eq!(r.report.cells[0].episodes, 0);
        assert_eq!(r.report.cells[0].overall_rate, None);
    }
}
