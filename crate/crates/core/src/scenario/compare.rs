//! Comparison of two written result bundles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{BundleMeta, DensityTable, InterferenceWindow, ResultBundle};
use super::ScenarioError;
use crate::trajectory::TrajectoryEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "density_L2")]
    DensityL2,
    #[serde(rename = "trajectory_RMS")]
    TrajectoryRms,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "density_l2" => Ok(Metric::DensityL2),
            "trajectory_rms" => Ok(Metric::TrajectoryRms),
            _ => Err(format!("unknown metric `{s}` (expected density_L2 or trajectory_RMS)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBreakdown {
    pub inside: f64,
    pub outside: f64,
    pub samples_inside: usize,
    pub samples_outside: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub metric: Metric,
    /// Relative L2 distance (density) or RMS distance over the length scale
    /// (trajectories).
    pub value: f64,
    pub normalization: f64,
    pub window: Option<InterferenceWindow>,
    pub regions: RegionBreakdown,
}

fn same_axis(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}

/// Compares `a` against `b`, split by the interference window of `a` (or `b`).
pub fn compare_runs(a: &ResultBundle, b: &ResultBundle, metric: Metric) -> Result<CompareReport, ScenarioError> {
    let window = a.window.or(b.window);
    let inside = |x: f64, t: f64| window.is_some_and(|w| w.contains(x, t));
    let mut acc = [(0.0, 0usize); 2];
    let normalization;
    match metric {
        Metric::DensityL2 => {
            let (da, db) = (&a.density, &b.density);
            if !same_axis(&da.times, &db.times) || !same_axis(&da.x, &db.x) {
                return Err(ScenarioError::IncompatibleSampling(format!(
                    "density tables differ ({} x {} vs {} x {} samples)",
                    da.times.len(),
                    da.x.len(),
                    db.times.len(),
                    db.x.len()
                )));
            }
            let mut norm = 0.0;
            for (k, &t) in da.times.iter().enumerate() {
                for (j, &x) in da.x.iter().enumerate() {
                    let slot = if inside(x, t) { 0 } else { 1 };
                    acc[slot].0 += (da.rho[k][j] - db.rho[k][j]).powi(2);
                    acc[slot].1 += 1;
                    norm += db.rho[k][j].powi(2);
                }
            }
            normalization = norm.sqrt();
        }
        Metric::TrajectoryRms => {
            let (ta, tb) = (&a.trajectories, &b.trajectories);
            if !same_axis(&ta.times, &tb.times) || ta.len() != tb.len() {
                return Err(ScenarioError::IncompatibleSampling(format!(
                    "trajectory ensembles differ ({} paths x {} times vs {} x {})",
                    ta.len(),
                    ta.times.len(),
                    tb.len(),
                    tb.times.len()
                )));
            }
            for (pa, pb) in ta.paths.iter().zip(&tb.paths) {
                for (k, &t) in ta.times.iter().enumerate() {
                    let slot = if inside(pb[k], t) { 0 } else { 1 };
                    acc[slot].0 += (pa[k] - pb[k]).powi(2);
                    acc[slot].1 += 1;
                }
            }
            normalization = b.length_scale;
        }
    }
    let scale = if normalization > 0.0 { normalization } else { 1.0 };
    let part = |(s, n): (f64, usize)| match metric {
        Metric::DensityL2 => s.sqrt() / scale,
        Metric::TrajectoryRms if n > 0 => (s / n as f64).sqrt() / scale,
        Metric::TrajectoryRms => 0.0,
    };
    let total = (acc[0].0 + acc[1].0, acc[0].1 + acc[1].1);
    Ok(CompareReport {
        metric,
        value: part(total),
        normalization,
        window,
        regions: RegionBreakdown {
            inside: part(acc[0]),
            outside: part(acc[1]),
            samples_inside: acc[0].1,
            samples_outside: acc[1].1,
        },
    })
}

fn parse_error(path: &Path, message: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Parse {
        line: None,
        column: None,
        message: format!("{}: {message}", path.display()),
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, ScenarioError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => ScenarioError::io(path, io),
        other => parse_error(path, format!("{other:?}")),
    })?;
    let found = reader.headers().map_err(|e| parse_error(path, e))?.clone();
    if found.iter().ne(header.iter().cloned()) {
        return Err(parse_error(path, format!("expected columns {}", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_error(path, e))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| parse_error(path, format!("`{f}`: {e}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a bundle written by [`super::write_outputs`] (or its `reference/`
/// subdirectory).
pub fn load_bundle(dir: &Path) -> Result<ResultBundle, ScenarioError> {
    let meta_path = dir.join("bundle.json");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| ScenarioError::io(&meta_path, e))?;
    let meta: BundleMeta = serde_json::from_str(&text).map_err(|e| parse_error(&meta_path, e))?;

    let traj_path = dir.join("trajectories.csv");
    let rows = read_rows(&traj_path, &["trajectory_id", "origin_label", "t", "x"])?;
    let mut paths: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut times = Vec::new();
    for r in &rows {
        let id = r[0] as usize;
        if id == paths.len() {
            paths.push(Vec::new());
            labels.push(r[1] as u8);
        } else if id + 1 != paths.len() {
            return Err(parse_error(&traj_path, "trajectory ids must be contiguous"));
        }
        if id == 0 {
            times.push(r[2]);
        }
        paths[id].push(r[3]);
    }
    let trajectories = TrajectoryEnsemble::new(times, paths, labels).map_err(|e| parse_error(&traj_path, e))?;

    let dens_path = dir.join("density.csv");
    let rows = read_rows(&dens_path, &["t", "x", "rho"])?;
    let mut density = DensityTable {
        times: Vec::new(),
        x: Vec::new(),
        rho: Vec::new(),
    };
    for r in &rows {
        if density.times.last() != Some(&r[0]) {
            density.times.push(r[0]);
            density.rho.push(Vec::new());
        }
        if density.times.len() == 1 {
            density.x.push(r[1]);
        }
        density.rho.last_mut().expect("row started").push(r[2]);
    }
    if density.rho.iter().any(|row| row.len() != density.x.len()) {
        return Err(parse_error(&dens_path, "every time must share the same x samples"));
    }
    Ok(ResultBundle {
        name: meta.name,
        length_scale: meta.length_scale,
        window: meta.window,
        trajectories,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset, run_scenario, write_outputs};

    #[test]
    fn bundle_round_trip_and_self_comparison() {
        let mut s = preset("fig2").unwrap();
        s.time.samples = 31;
        let out = run_scenario(&s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&out, dir.path(), false).unwrap();
        let b = load_bundle(dir.path()).unwrap();
        assert_eq!(b, out.bundle);
        for m in [Metric::DensityL2, Metric::TrajectoryRms] {
            let r = compare_runs(&b, &b, m).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!(r.regions.inside, 0.0);
            assert!(r.regions.samples_inside > 0 && r.regions.samples_outside > 0);
        }
    }

    #[test]
    fn regions_and_incompatibility() {
        let mut s = preset("fig2").unwrap();
        s.time.samples = 31;
        let a = run_scenario(&s).unwrap().bundle;
        let mut b = a.clone();
        let k = b.trajectories.times.len() / 2;
        b.trajectories.paths[0][k] += 0.5;
        let r = compare_runs(&b, &a, Metric::TrajectoryRms).unwrap();
        assert!(r.value > 0.0);
        let mut c = a.clone();
        c.trajectories.times.pop();
        c.trajectories.paths.iter_mut().for_each(|p| {
            p.pop();
        });
        assert!(matches!(
            compare_runs(&a, &c, Metric::TrajectoryRms),
            Err(ScenarioError::IncompatibleSampling(_))
        ));
        c.density.x.pop();
        c.density.rho.iter_mut().for_each(|r| {
            r.pop();
        });
        assert!(matches!(compare_runs(&a, &c, Metric::DensityL2), Err(ScenarioError::IncompatibleSampling(_))));
        assert_eq!("density_L2".parse::<Metric>().unwrap(), Metric::DensityL2);
        assert!("l1".parse::<Metric>().is_err());
    }
}
