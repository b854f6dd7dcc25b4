//! The standard experiment grids and their CSV tables.
//!
//! | experiment   | grid                                                       | file(s)                  |
//! |--------------|------------------------------------------------------------|--------------------------|
//! | `table1`     | d = truth - initial in 0..=5, n in 1..=12, all grade pairs | `table1.csv`             |
//! | `table2`     | ability x fixed test difficulty in 1..=6, n = 1            | `table2_<estimator>.csv` |
//! | `trajectory` | initial grade 1, truth 6, n in {1, 3, 6, 12}, one run each | `trajectory_n<k>.csv`    |
//! | `learning`   | learning profile x n in 1..=12, initial = truth in 1..=6   | `learning.csv`           |

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::simulator::{
    replication_rng, run_experiment, run_replication, CellStats, EstimatorKind, LearningFactor,
    Parallelism, ScoringWindow, SimulationConfig, TestGen, Trajectory, MAX_GRADE, MIN_GRADE,
};

pub const TABLE1_MAX_D: u8 = 5;
pub const MAX_WINDOW: u32 = 12;
pub const TRAJECTORY_WINDOWS: [u32; 4] = [1, 3, 6, 12];
pub const TRAJECTORY_INITIAL: u8 = 1;
pub const TRAJECTORY_TRUTH: u8 = 6;

/// Settings shared by every experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOptions {
    pub replications: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub spread_is_variance: bool,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            replications: 1000,
            seed: 0,
            estimator: EstimatorKind::Proposed,
            spread_is_variance: false,
            parallelism: Parallelism::Auto,
        }
    }
}

impl ExperimentOptions {
    pub fn base_config(&self) -> SimulationConfig {
        let mut cfg = SimulationConfig {
            replications: self.replications,
            seed: self.seed,
            estimator: self.estimator,
            ..SimulationConfig::default()
        };
        cfg.profile.spread_is_variance = self.spread_is_variance;
        cfg
    }
}

/// Runs `grid` and pools cells that share a key, preserving first-seen
/// key order.
fn pooled<K: PartialEq + Clone>(
    grid: Vec<(K, SimulationConfig)>,
    parallelism: Parallelism,
) -> Result<Vec<(K, CellStats)>> {
    let (keys, configs): (Vec<K>, Vec<SimulationConfig>) = grid.into_iter().unzip();
    let summary = run_experiment(&configs, parallelism)?;
    let mut out: Vec<(K, CellStats)> = Vec::new();
    for (key, cell) in keys.into_iter().zip(summary.cells) {
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, stats)) => stats.merge(&cell.stats),
            None => out.push((key, cell.stats)),
        }
    }
    Ok(out)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Table1Key {
    pub d: u8,
    pub n: u32,
}

/// Convergence and RMSE by (d, n), pooled over every grade pair with
/// `truth - initial = d`.
#[derive(Debug, Clone)]
pub struct Table1 {
    pub cells: Vec<(Table1Key, CellStats)>,
}

pub fn table1_grid(opts: &ExperimentOptions) -> Vec<(Table1Key, SimulationConfig)> {
    let base = opts.base_config();
    let mut grid = Vec::new();
    for d in 0..=TABLE1_MAX_D {
        for n in 1..=MAX_WINDOW {
            for initial in MIN_GRADE..=MAX_GRADE - d {
                grid.push((
                    Table1Key { d, n },
                    SimulationConfig {
                        initial_grade: initial,
                        truth_grade: initial + d,
                        n_window: n,
                        ..base.clone()
                    },
                ));
            }
        }
    }
    grid
}

pub fn run_table1(opts: &ExperimentOptions) -> Result<Table1> {
    Ok(Table1 {
        cells: pooled(table1_grid(opts), opts.parallelism)?,
    })
}

impl Table1 {
    pub fn get(&self, d: u8, n: u32) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|(k, _)| k.d == d && k.n == n)
            .map(|(_, s)| s)
    }

    /// RMSE per n pooled over all d (the table's bottom row).
    pub fn rmse_by_n(&self) -> Vec<(u32, Option<f64>)> {
        (1..=MAX_WINDOW)
            .map(|n| {
                let mut total = CellStats::default();
                for (_, stats) in self.cells.iter().filter(|(k, _)| k.n == n) {
                    total.merge(stats);
                }
                (n, total.rmse())
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv_writer(out);
        w.write_record(["d", "n", "mean_convergence", "rmse"])?;
        for (key, stats) in &self.cells {
            w.write_record([
                key.d.to_string(),
                key.n.to_string(),
                fmt_opt(stats.mean_convergence_point()),
                fmt_opt(stats.rmse()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// RMSE by (true ability, fixed test difficulty) for one estimator.
#[derive(Debug, Clone)]
pub struct Table2 {
    pub estimator: EstimatorKind,
    /// ((ability, difficulty), stats), row-major.
    pub cells: Vec<((u8, u8), CellStats)>,
}

pub fn table2_grid(
    opts: &ExperimentOptions,
    estimator: EstimatorKind,
) -> Vec<((u8, u8), SimulationConfig)> {
    let base = opts.base_config();
    let mut grid = Vec::new();
    for ability in MIN_GRADE..=MAX_GRADE {
        for difficulty in MIN_GRADE..=MAX_GRADE {
            grid.push((
                (ability, difficulty),
                SimulationConfig {
                    // the estimator starts at the test's level
                    initial_grade: difficulty,
                    truth_grade: ability,
                    n_window: 1,
                    estimator,
                    test_gen: TestGen::Fixed {
                        difficulty: f64::from(difficulty),
                    },
                    scoring: ScoringWindow::FromStart,
                    ..base.clone()
                },
            ));
        }
    }
    grid
}

pub fn run_table2(opts: &ExperimentOptions, estimator: EstimatorKind) -> Result<Table2> {
    Ok(Table2 {
        estimator,
        cells: pooled(table2_grid(opts, estimator), opts.parallelism)?,
    })
}

impl Table2 {
    pub fn rmse(&self, ability: u8, difficulty: u8) -> Option<f64> {
        self.cells
            .iter()
            .find(|(k, _)| *k == (ability, difficulty))
            .and_then(|(_, s)| s.rmse())
    }

    pub fn file_name(&self) -> String {
        format!("table2_{}.csv", self.estimator.name())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv_writer(out);
        w.write_record(["ability", "difficulty", "rmse"])?;
        for ((ability, difficulty), stats) in &self.cells {
            w.write_record([
                ability.to_string(),
                difficulty.to_string(),
                fmt_opt(stats.rmse()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One example run per EMA window, for plotting.
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub n: u32,
    pub trajectory: Trajectory,
}

pub fn run_trajectories(opts: &ExperimentOptions) -> Result<Vec<TrajectoryRun>> {
    let base = opts.base_config();
    TRAJECTORY_WINDOWS
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let cfg = SimulationConfig {
                initial_grade: TRAJECTORY_INITIAL,
                truth_grade: TRAJECTORY_TRUTH,
                n_window: n,
                replications: 1,
                ..base.clone()
            };
            let trajectory = run_replication(&cfg, &mut replication_rng(opts.seed, i, 0))?;
            Ok(TrajectoryRun { n, trajectory })
        })
        .collect()
}

impl TrajectoryRun {
    pub fn file_name(&self) -> String {
        format!("trajectory_n{}.csv", self.n)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv_writer(out);
        w.write_record(["test_index", "truth", "estimate"])?;
        let t = &self.trajectory;
        for (i, (truth, est)) in t.true_abilities.iter().zip(&t.estimates).enumerate() {
            w.write_record([i.to_string(), format!("{truth:.6}"), format!("{est:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Convergence and RMSE by (learning profile, n), pooled over the six
/// starting grades (estimate and truth start together).
#[derive(Debug, Clone)]
pub struct LearningTable {
    pub cells: Vec<((LearningFactor, u32), CellStats)>,
}

pub fn learning_grid(opts: &ExperimentOptions) -> Vec<((LearningFactor, u32), SimulationConfig)> {
    let base = opts.base_config();
    let mut grid = Vec::new();
    for learning in LearningFactor::ALL {
        for n in 1..=MAX_WINDOW {
            for grade in MIN_GRADE..=MAX_GRADE {
                let mut cfg = SimulationConfig {
                    initial_grade: grade,
                    truth_grade: grade,
                    n_window: n,
                    ..base.clone()
                };
                cfg.profile.learning = learning;
                grid.push(((learning, n), cfg));
            }
        }
    }
    grid
}

pub fn run_learning(opts: &ExperimentOptions) -> Result<LearningTable> {
    Ok(LearningTable {
        cells: pooled(learning_grid(opts), opts.parallelism)?,
    })
}

impl LearningTable {
    pub fn get(&self, learning: LearningFactor, n: u32) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|(k, _)| *k == (learning, n))
            .map(|(_, s)| s)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv_writer(out);
        w.write_record(["profile", "n", "mean_convergence", "rmse"])?;
        for ((learning, n), stats) in &self.cells {
            w.write_record([
                learning.name().to_string(),
                n.to_string(),
                fmt_opt(stats.mean_convergence_point()),
                fmt_opt(stats.rmse()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
