use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::{run_cell, ExperimentConfig, Method, PipelineOutput};
use crate::error::{Error, Result};

pub const RESULT_COLUMNS: [&str; 11] = [
    "method",
    "tau",
    "avg_labels_realized",
    "alpha",
    "seed",
    "auprc",
    "auroc",
    "wall_time",
    "auprc_std",
    "auroc_std",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub tau: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Cell {
    fn dir_name(&self) -> String {
        format!("{}_tau{}_alpha{}_seed{}", self.method, self.tau, self.alpha, self.seed)
    }

    fn same_group(&self, other: &Cell) -> bool {
        self.method == other.method && self.tau == other.tau && self.alpha == other.alpha
    }
}

/// Cartesian product in (tau, alpha, method, seed) order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for tau in cfg.tau_grid() {
        for alpha in cfg.alpha_grid() {
            for &method in &cfg.method {
                for &seed in &cfg.seeds {
                    out.push(Cell {
                        method,
                        tau,
                        alpha,
                        seed,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: std::result::Result<PipelineOutput, String>,
    /// Seconds.
    pub wall_time: f64,
}

/// Mean and sample standard deviation over the successful seeds of one
/// (method, tau, alpha) group.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub tau: f64,
    pub alpha: f64,
    pub n_ok: usize,
    pub n_total: usize,
    pub avg_labels_realized: f64,
    pub auprc_mean: f64,
    pub auprc_std: f64,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub wall_time_mean: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub record_wall_time: bool,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(|c| c.outcome.is_ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut groups: Vec<Vec<&CellResult>> = Vec::new();
        for c in &self.cells {
            match groups.iter_mut().find(|g| g[0].cell.same_group(&c.cell)) {
                Some(g) => g.push(c),
                None => groups.push(vec![c]),
            }
        }
        groups
            .into_iter()
            .map(|g| {
                let ok: Vec<&PipelineOutput> = g.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
                let col = |f: fn(&PipelineOutput) -> f64| mean_std(&ok.iter().map(|o| f(o)).collect::<Vec<_>>());
                let (auprc_mean, auprc_std) = col(|o| o.eval.auprc);
                let (auroc_mean, auroc_std) = col(|o| o.eval.auroc);
                let (avg_labels_realized, _) = col(|o| o.avg_labels_realized);
                let cell = g[0].cell;
                Aggregate {
                    method: cell.method,
                    tau: cell.tau,
                    alpha: cell.alpha,
                    n_ok: ok.len(),
                    n_total: g.len(),
                    avg_labels_realized,
                    auprc_mean,
                    auprc_std,
                    auroc_mean,
                    auroc_std,
                    wall_time_mean: mean_std(&g.iter().map(|c| c.wall_time).collect::<Vec<_>>()).0,
                }
            })
            .collect()
    }

    /// Mean AUPRC of one group, if any of its seeds succeeded.
    pub fn mean_auprc(&self, method: Method, tau: f64, alpha: f64) -> Option<f64> {
        self.aggregates()
            .into_iter()
            .find(|a| a.method == method && a.tau == tau && a.alpha == alpha && a.n_ok > 0)
            .map(|a| a.auprc_mean)
    }

    /// One row per cell followed by one aggregate row per group.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(RESULT_COLUMNS)?;
        let time = |t: f64| {
            if self.record_wall_time {
                format!("{t:.3}")
            } else {
                String::new()
            }
        };
        for c in &self.cells {
            let Cell {
                method,
                tau,
                alpha,
                seed,
            } = c.cell;
            let row = match &c.outcome {
                Ok(o) => [
                    method.to_string(),
                    tau.to_string(),
                    o.avg_labels_realized.to_string(),
                    alpha.to_string(),
                    seed.to_string(),
                    o.eval.auprc.to_string(),
                    o.eval.auroc.to_string(),
                    time(c.wall_time),
                    String::new(),
                    String::new(),
                    "ok".to_string(),
                ],
                Err(e) => [
                    method.to_string(),
                    tau.to_string(),
                    String::new(),
                    alpha.to_string(),
                    seed.to_string(),
                    String::new(),
                    String::new(),
                    time(c.wall_time),
                    String::new(),
                    String::new(),
                    format!("error: {e}"),
                ],
            };
            w.write_record(&row)?;
        }
        for a in self.aggregates() {
            let num = |v: f64| if a.n_ok > 0 { v.to_string() } else { String::new() };
            let status = if a.n_ok == a.n_total {
                "mean".to_string()
            } else {
                format!("mean over {}/{} seeds", a.n_ok, a.n_total)
            };
            w.write_record([
                a.method.to_string(),
                a.tau.to_string(),
                num(a.avg_labels_realized),
                a.alpha.to_string(),
                "all".to_string(),
                num(a.auprc_mean),
                num(a.auroc_mean),
                time(a.wall_time_mean),
                num(a.auprc_std),
                num(a.auroc_std),
                status,
            ])?;
        }
        w.flush().map_err(|e| Error::io("results", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Per-cell wall-clock seconds, kept apart from the results table.
    pub fn write_timings_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "tau", "alpha", "seed", "wall_time"])?;
        for c in &self.cells {
            w.write_record([
                c.cell.method.to_string(),
                c.cell.tau.to_string(),
                c.cell.alpha.to_string(),
                c.cell.seed.to_string(),
                format!("{:.3}", c.wall_time),
            ])?;
        }
        w.flush().map_err(|e| Error::io("timings", e))?;
        Ok(())
    }
}

/// Runs every cell. Failures are recorded per cell and do not stop the sweep.
/// `jobs` bounds the worker threads (default: all cores); row order never
/// depends on it.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>, dump_root: Option<&Path>) -> Result<SweepResult> {
    cfg.validate()?;
    let todo = cells(cfg);
    let run = |cell: &Cell| {
        let start = Instant::now();
        let dump = dump_root.map(|root| root.join(cell.dir_name()));
        let outcome = run_cell(cfg, cell, dump.as_deref()).map_err(|e| e.to_string());
        if let Err(e) = &outcome {
            log::warn!("cell {} failed: {e}", cell.dir_name());
        } else {
            log::info!("cell {} done", cell.dir_name());
        }
        CellResult {
            cell: *cell,
            outcome,
            wall_time: start.elapsed().as_secs_f64(),
        }
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(e.to_string()))?
            .install(|| todo.par_iter().map(run).collect()),
        None => todo.par_iter().map(run).collect(),
    };
    Ok(SweepResult {
        cells: results,
        record_wall_time: cfg.record_wall_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::tests::tiny_config;

    #[test]
    fn counting_rows() {
        let cfg = ExperimentConfig {
            method: vec![Method::BaseClf, Method::VCoteach],
            seeds: (0..10).collect(),
            sweep: crate::experiment::SweepAxes {
                tau: vec![0.1, 0.45, 0.8],
                alpha: vec![],
            },
            coteach: crate::coteach::CoteachConfig {
                epochs: 1,
                ..tiny_config().coteach
            },
            ..tiny_config()
        };
        assert_eq!(cells(&cfg).len(), 60);
        let r = run_sweep(&cfg, Some(2), None).unwrap();
        assert!(r.all_ok());
        let text = r.to_csv_string().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULT_COLUMNS.join(","));
        assert_eq!(lines.len(), 1 + 60 + 6);
        assert_eq!(lines.iter().filter(|l| l.ends_with(",mean")).count(), 6);
    }

    #[test]
    fn rerun_is_byte_identical_and_failures_are_recorded() {
        let mut cfg = ExperimentConfig {
            method: vec![Method::Crowdteacher],
            seeds: vec![0, 1],
            ..tiny_config()
        };
        let a = run_sweep(&cfg, Some(1), None).unwrap().to_csv_string().unwrap();
        let b = run_sweep(&cfg, Some(2), None).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);

        // A split that leaves a single training row fails downstream.
        cfg.test_fraction = 0.999;
        let r = run_sweep(&cfg, Some(1), None).unwrap();
        assert!(!r.all_ok());
        assert_eq!(r.failures().count(), 2);
        let text = r.to_csv_string().unwrap();
        assert!(text.contains("error: stage"));
        assert!(text.contains("mean over 0/2 seeds"));
    }

    #[test]
    fn aggregate_statistics() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }
}
