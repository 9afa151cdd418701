//! Parameter sweeps over the admittance controller.
//!
//! A sweep runs one passive baseline plus a sorted, deduplicated set of
//! controller settings, each as an independent simulation. Rows come out in
//! a deterministic lexicographic order over (m, kp, kd, c) so repeated runs
//! produce byte-identical CSV output. A scenario that blows up mid-run marks
//! its row unstable instead of aborting the sweep.

use crate::controller::ControlMode;
use crate::dynamics::{simulate, Scenario, SimulationTrace};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, ScenarioMetrics};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

/// One admittance setting: virtual mass, PD gains and virtual damping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub m: f64,
    pub kp: f64,
    pub kd: f64,
    pub c: f64,
}

impl SweepPoint {
    fn key(&self) -> [f64; 4] {
        [self.m, self.kp, self.kd, self.c]
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        for i in 0..4 {
            match a[i].total_cmp(&b[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for SweepPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_total(other))
    }
}

#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub base: Scenario,
    /// Sorted, deduplicated settings.
    pub points: Vec<SweepPoint>,
    pub include_passive: bool,
}

impl SweepGrid {
    pub fn new(
        base: Scenario,
        mut points: Vec<SweepPoint>,
        include_passive: bool,
        cap: usize,
    ) -> Result<Self> {
        points.sort_by(SweepPoint::cmp_total);
        points.dedup();
        if points.is_empty() {
            return Err(Error::Validation("sweep has no grid points".into()));
        }
        if points.len() > cap {
            return Err(Error::Validation(format!(
                "sweep has {} points, exceeding the cap of {cap}",
                points.len()
            )));
        }
        Ok(SweepGrid {
            base,
            points,
            include_passive,
        })
    }
}

/// One output row; metric fields are absent when the run went unstable.
#[derive(Clone, Debug)]
pub struct SweepRow {
    /// None for the passive baseline row.
    pub point: Option<SweepPoint>,
    pub metrics: Option<ScenarioMetrics>,
    pub unstable: bool,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "m,kp,kd,c,peak_fz_N,reduction_pct,mean_flexor_act,\
mean_extensor_act,peak_tau_Nm,torque_sign,oscillation,unstable";

fn fmt_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v:.6}");
    }
}

impl SweepTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(SWEEP_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let mut line = String::new();
            match row.point {
                Some(p) => {
                    let _ = write!(line, "{},{},{},{}", p.m, p.kp, p.kd, p.c);
                }
                None => line.push_str(",,,"),
            }
            let m = row.metrics.as_ref().filter(|_| !row.unstable);
            line.push(',');
            fmt_opt(&mut line, m.map(|m| m.peak_fz));
            line.push(',');
            fmt_opt(&mut line, m.and_then(|m| m.reduction_pct));
            line.push(',');
            fmt_opt(&mut line, m.map(|m| m.mean_flexor_act));
            line.push(',');
            fmt_opt(&mut line, m.map(|m| m.mean_extensor_act));
            line.push(',');
            fmt_opt(&mut line, m.map(|m| m.peak_tau_motor));
            line.push(',');
            if let Some(sign) = m.and_then(|m| m.torque_sign) {
                let _ = write!(line, "{}", format!("{sign:?}").to_lowercase());
            }
            line.push(',');
            if let Some(m) = m {
                let _ = write!(line, "{}", m.oscillation);
            }
            let _ = write!(line, ",{}", row.unstable);
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Build the scenario for one grid point.
pub fn point_scenario(base: &Scenario, p: &SweepPoint) -> Scenario {
    let mut s = base.clone();
    s.controller.mode = ControlMode::Admittance;
    s.controller.virtual_mass = p.m;
    s.controller.kp = p.kp;
    s.controller.kd = p.kd;
    s.controller.virtual_damping = p.c;
    s
}

fn passive_scenario(base: &Scenario) -> Scenario {
    let mut s = base.clone();
    s.controller.mode = ControlMode::Passive;
    s
}

fn run_point(
    base: &Scenario,
    p: &SweepPoint,
    baseline: Option<&SimulationTrace>,
) -> SweepRow {
    let scenario = point_scenario(base, p);
    match simulate(&scenario) {
        Ok(trace) => {
            let metrics = compute_metrics(&trace, baseline);
            let unstable = metrics.unstable;
            SweepRow {
                point: Some(*p),
                metrics: Some(metrics),
                unstable,
            }
        }
        Err(_) => SweepRow {
            point: Some(*p),
            metrics: None,
            unstable: true,
        },
    }
}

/// Run the whole grid. `jobs` limits worker threads; `None` uses all cores.
pub fn run_sweep(grid: &SweepGrid, jobs: Option<usize>) -> Result<SweepTable> {
    // The passive baseline runs first so every active row can report its
    // force reduction against it.
    let baseline = simulate(&passive_scenario(&grid.base))?;
    let baseline_ref = (!baseline.unstable).then_some(&baseline);

    let work = || {
        grid.points
            .par_iter()
            .map(|p| run_point(&grid.base, p, baseline_ref))
            .collect::<Vec<_>>()
    };
    let active_rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut rows = Vec::with_capacity(active_rows.len() + 1);
    if grid.include_passive {
        let metrics = compute_metrics(&baseline, Some(&baseline));
        let unstable = metrics.unstable;
        rows.push(SweepRow {
            point: None,
            metrics: Some(metrics),
            unstable,
        });
    }
    rows.extend(active_rows);
    Ok(SweepTable { rows })
}
