//! Scenario pipelines: sample, integrate or propagate, analyze, emit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analysis::{peak_offsets, significant_extrema, PeakComparison};
use super::svg::{line_plot, Series};
use super::{Mode, Scenario, ScenarioError};
use crate::io::{format_f64, write_atomic};
use crate::potential::{
    dynamic_potential_n, static_wall_well_n, static_well_width, xmin_curve, xmin_of_t, tmin, PotentialSpec,
};
use crate::superposition::{BoundaryLine, Strictness, Superposition, SymmetricParams};
use crate::tdse::{
    init_from_packet_with_tolerance, propagate, snapshots_to_csv, to_binary, GridField, GridState, Grid1D,
};
use crate::tdse::bohmian_trajectories_from_grid;
use crate::trajectory::{
    asymptotic_slope_fit, check_non_crossing, cluster_slopes, count_region_transfer_at, gap_midpoint, linear_fit,
    probability_quantile_start, resolve_boundary, run_ensemble, sample_initial_positions, uniform_times,
    BoundaryRule, CrossingViolation, SlopeCluster, Start, TrajectoryEnsemble, TransferCounts,
};
use crate::wavepacket::{Regime, RegimeThresholds};

/// Density profiles: one row of `rho` per time, all on the same `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
}

impl DensityTable {
    /// CSV with columns `t,x,rho`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,rho\n");
        for (t, row) in self.times.iter().zip(&self.rho) {
            let t = format_f64(*t);
            for (x, r) in self.x.iter().zip(row) {
                s.push_str(&t);
                s.push(',');
                s.push_str(&format_f64(*x));
                s.push(',');
                s.push_str(&format_f64(*r));
                s.push('\n');
            }
        }
        s
    }
}

/// Space-time box around the overlap of the two packets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceWindow {
    pub t: [f64; 2],
    pub x: [f64; 2],
}

impl InterferenceWindow {
    pub fn contains(&self, x: f64, t: f64) -> bool {
        t >= self.t[0] && t <= self.t[1] && x >= self.x[0] && x <= self.x[1]
    }
}

/// Trajectories and densities of one run, as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub name: String,
    /// Length used to normalize trajectory differences.
    pub length_scale: f64,
    pub window: Option<InterferenceWindow>,
    pub trajectories: TrajectoryEnsemble,
    pub density: DensityTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonCrossingSummary {
    pub tolerance: f64,
    pub violations: usize,
    pub min_gap: f64,
    pub first: Option<CrossingViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySummary {
    /// `"A"` (equal widths), `"B"` (equal speeds) or `"none"`.
    pub case: String,
    pub line: Option<BoundaryLine>,
    pub rule: BoundaryRule,
    pub transfer_time: f64,
    pub boundary_x: f64,
    pub transfers: TransferCounts,
    pub midpoint_transfers: TransferCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub window: [f64; 2],
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixSummary {
    /// Start position splitting the total probability into the two packet weights.
    pub start: f64,
    pub fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeMetrics {
    pub time: f64,
    pub expected_spacing: f64,
    pub measured_spacing: f64,
    pub relative_error: f64,
    pub minima: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub window: [f64; 2],
    pub quantum: f64,
    pub clusters: Vec<SlopeCluster>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePacketSummary {
    pub count: usize,
    /// Largest final-velocity difference between rank-matched origin-1 paths of
    /// the pair and lone packet-2 paths.
    pub final_velocity_mismatch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XminSummary {
    pub v_p: f64,
    pub tau: f64,
    pub t_min: f64,
    pub x_min_at_t_min: f64,
    pub x_min_initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallMetrics {
    pub compare_time: f64,
    pub norm_drift: f64,
    /// Largest trajectory position reached (must stay left of the wall).
    pub max_position: f64,
    /// Right edge of the free region (the well's left edge, or the wall).
    pub free_edge: f64,
    pub w0: f64,
    /// Peaks outside the well against the reference, judged against `w0`.
    pub peaks_vs_w0: PeakComparison,
    /// The same peaks judged against the local reference fringe spacing.
    pub peaks_vs_local: PeakComparison,
    pub innermost_outer_max: Option<f64>,
    pub innermost_width: Option<f64>,
    pub outer_width: Option<f64>,
    pub width_ratio: Option<f64>,
    /// Trajectory RMS difference to the reference in units of `sigma0`.
    pub rms_inside: f64,
    pub rms_outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub scenario: String,
    pub mode: Mode,
    pub trajectories: usize,
    pub velocity_ratio: f64,
    pub regime: Regime,
    pub max_interference_time: Option<f64>,
    pub interference_window: Option<InterferenceWindow>,
    pub noncrossing: NonCrossingSummary,
    pub boundary: Option<BoundarySummary>,
    pub gap: Option<LineFit>,
    pub separatrix: Option<SeparatrixSummary>,
    pub fringe: Option<FringeMetrics>,
    pub slopes: Option<SlopeSummary>,
    pub single_packet: Option<SinglePacketSummary>,
    pub xmin: Vec<XminSummary>,
    pub wall: Option<WallMetrics>,
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub analysis: Analysis,
    pub bundle: ResultBundle,
    /// Two-packet half-domain reference of the wave-function modes.
    pub reference: Option<ResultBundle>,
    pub single_packet: Option<TrajectoryEnsemble>,
    /// Rows `t,x,V` of the potential at the density times.
    pub potential: Option<String>,
    /// Rows `v_p,t,x_min,V0`.
    pub xmin_curves: Option<String>,
    pub snapshots: Vec<GridState>,
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    (0..times.len())
        .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
        .unwrap_or(0)
}

fn merge_times(base: &[f64], extra: &[f64], t_end: f64) -> Vec<f64> {
    let mut all: Vec<f64> = base.iter().chain(extra).cloned().collect();
    all.sort_by(f64::total_cmp);
    let tol = 1e-9 * t_end;
    all.dedup_by(|b, a| (*b - *a).abs() <= tol);
    all
}

fn noncrossing(ens: &TrajectoryEnsemble, tol: f64) -> NonCrossingSummary {
    let r = check_non_crossing(ens, tol);
    NonCrossingSummary {
        tolerance: tol,
        violations: r.violations,
        min_gap: r.min_gap,
        first: r.first,
    }
}

/// Window around the crossing of the two centroids (the whole run when they
/// never cross). `x_cap` clips the spatial range from above.
fn interference_window(sup: &Superposition, t_end: f64, x_range: [f64; 2], x_cap: Option<f64>) -> InterferenceWindow {
    let (a, b) = (&sup.packet1, &sup.packet2);
    let mut w = match sup.max_interference_time() {
        Ok(tc) => {
            let s = a.spread(tc).max(b.spread(tc));
            let dv = (a.propagation_velocity() - b.propagation_velocity()).abs();
            let xc = a.centroid(tc);
            InterferenceWindow {
                t: [(tc - 4.0 * s / dv).max(0.0), (tc + 4.0 * s / dv).min(t_end)],
                x: [xc - 4.0 * s, xc + 4.0 * s],
            }
        }
        Err(_) => InterferenceWindow {
            t: [0.0, t_end],
            x: x_range,
        },
    };
    if let Some(cap) = x_cap {
        w.x[1] = w.x[1].min(cap);
    }
    if w.t[0] > w.t[1] {
        w.t = [t_end, t_end];
    }
    w
}

fn fit_series(ens: &TrajectoryEnsemble, window: [f64; 2], value: impl Fn(usize) -> Option<f64>) -> Option<LineFit> {
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    for k in ens.window_indices(window[0], window[1]) {
        if let Some(x) = value(k) {
            ts.push(ens.times[k]);
            xs.push(x);
        }
    }
    if ts.len() < 2 {
        return None;
    }
    let (slope, intercept) = linear_fit(&ts, &xs);
    Some(LineFit { window, slope, intercept })
}

fn default_range(sup: &Superposition, t_end: f64) -> [f64; 2] {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in sup.packets() {
        for t in [0.0, t_end] {
            lo = lo.min(p.centroid(t) - 6.0 * p.spread(t));
            hi = hi.max(p.centroid(t) + 6.0 * p.spread(t));
        }
    }
    [lo, hi]
}

fn analytic_density(sup: &Superposition, times: &[f64], xs: &[f64], scale: f64) -> DensityTable {
    DensityTable {
        times: times.to_vec(),
        x: xs.to_vec(),
        rho: times
            .iter()
            .map(|&t| xs.iter().map(|&x| scale * sup.density(x, t)).collect())
            .collect(),
    }
}

fn fringe_metrics(sup: &Superposition) -> Option<FringeMetrics> {
    let t = sup.max_interference_time().ok()?;
    if !(t > 0.0) {
        return None;
    }
    let s = sup.packet1.spread(t).max(sup.packet2.spread(t));
    let xc = sup.packet1.centroid(t);
    let expected = sup.fringe_spacing_collision();
    let n = 4001;
    let xs: Vec<f64> = uniform_times(xc - 2.0 * s, xc + 2.0 * s, n);
    let ys: Vec<f64> = xs.iter().map(|&x| sup.density(x, t)).collect();
    let (_, minima) = significant_extrema(&xs, &ys, 0.05);
    let minima: Vec<f64> = minima.iter().map(|m| m.x).collect();
    if minima.len() < 2 {
        return None;
    }
    let measured = (minima[minima.len() - 1] - minima[0]) / (minima.len() - 1) as f64;
    Some(FringeMetrics {
        time: t,
        expected_spacing: expected,
        measured_spacing: measured,
        relative_error: (measured - expected).abs() / expected,
        minima,
    })
}

fn single_packet_paths(sup: &Superposition, starts: &[Start], times: &[f64], origin: u8) -> TrajectoryEnsemble {
    let p = if origin == 1 { &sup.packet1 } else { &sup.packet2 };
    let chosen: Vec<&Start> = starts.iter().filter(|s| s.origin == origin).collect();
    let paths = chosen
        .iter()
        .map(|s| times.iter().map(|&t| p.trajectory(s.x, t)).collect())
        .collect();
    TrajectoryEnsemble::new(times.to_vec(), paths, vec![origin; chosen.len()]).expect("consistent ensemble")
}

fn final_velocities(ens: &TrajectoryEnsemble, select: impl Fn(usize) -> bool) -> Vec<f64> {
    let n = ens.times.len();
    let dt = ens.times[n - 1] - ens.times[n - 2];
    let mut v: Vec<f64> = (0..ens.len())
        .filter(|&i| select(i))
        .map(|i| (ens.paths[i][n - 1] - ens.paths[i][n - 2]) / dt)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn xmin_outputs(s: &Scenario, sup: Option<&Superposition>) -> (Vec<XminSummary>, Option<String>) {
    if s.analysis.xmin_velocities.is_empty() {
        return (Vec::new(), None);
    }
    let p = &s.packets[0];
    let x0 = sup.map_or(p.x0.abs(), |sup| sup.half_separation());
    let times = uniform_times(0.0, s.time.t_end, s.time.samples);
    let mut summaries = Vec::new();
    let mut csv = String::from("v_p,t,x_min,V0\n");
    for &v in &s.analysis.xmin_velocities {
        let sp = SymmetricParams {
            p: s.units.mass * v,
            sigma0: p.sigma0,
            x0,
            units: s.units,
        };
        let tm = tmin(&sp);
        summaries.push(XminSummary {
            v_p: v,
            tau: sp.tau(),
            t_min: tm,
            x_min_at_t_min: xmin_of_t(&sp, tm),
            x_min_initial: xmin_of_t(&sp, 0.0),
        });
        for (t, xm, v0) in xmin_curve(&sp, &times) {
            csv.push_str(&format!("{},{},{},{}\n", format_f64(v), format_f64(t), format_f64(xm), format_f64(v0)));
        }
    }
    (summaries, Some(csv))
}

fn density_times(s: &Scenario) -> Vec<f64> {
    if s.density.times.is_empty() {
        vec![0.0, s.time.t_end]
    } else {
        s.density.times.clone()
    }
}

/// Runs the scenario's pipeline.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput, ScenarioError> {
    s.validate()?;
    if s.mode.uses_grid() {
        run_grid(s)
    } else {
        run_analytic(s)
    }
}

fn run_analytic(s: &Scenario) -> Result<RunOutput, ScenarioError> {
    let name = s.name.as_str();
    let sup = s.superposition().map_err(|e| ScenarioError::numerical(name, "superposition", e))?;
    let starts = sample_initial_positions(&sup, &s.sampling).map_err(|e| ScenarioError::numerical(name, "sampling", e))?;
    let t_end = s.time.t_end;
    let times = uniform_times(0.0, t_end, s.time.samples);
    log::info!("{name}: integrating {} trajectories", starts.len());
    let ens = run_ensemble(&sup, &starts, &times, &s.integrator)
        .map_err(|e| ScenarioError::numerical(name, "trajectories", e))?;

    let range = s.density.range.unwrap_or_else(|| default_range(&sup, t_end));
    let xs = uniform_times(range[0], range[1], s.density.points);
    let density = analytic_density(&sup, &density_times(s), &xs, 1.0);

    let line = sup
        .boundary_case_a(Strictness::Strict)
        .map(|l| ("A", l))
        .or_else(|_| sup.boundary_case_b(Strictness::Strict).map(|l| ("B", l)))
        .ok();
    let rule = s.analysis.boundary_rule.unwrap_or(if line.is_some() {
        BoundaryRule::Analytic
    } else {
        BoundaryRule::CentroidMidpoint
    });
    let t_count = s.analysis.transfer_time.unwrap_or(t_end);
    let boundary_x = resolve_boundary(&sup, rule, line.map(|l| l.1), t_count);
    let midpoint = resolve_boundary(&sup, BoundaryRule::CentroidMidpoint, None, t_count);
    let boundary = BoundarySummary {
        case: line.map_or("none", |l| l.0).to_string(),
        line: line.map(|l| l.1),
        rule,
        transfer_time: t_count,
        boundary_x,
        transfers: count_region_transfer_at(&ens, boundary_x, t_count),
        midpoint_transfers: count_region_transfer_at(&ens, midpoint, t_count),
    };

    let gap = s
        .analysis
        .gap_window
        .and_then(|w| fit_series(&ens, w, |k| gap_midpoint(&ens, k)));
    let separatrix = match s.analysis.separatrix_window {
        Some(w) => {
            let (w1, w2) = (sup.c1 * sup.c1, sup.c2 * sup.c2);
            let x_s = probability_quantile_start(&sup, w1 / (w1 + w2));
            let path = run_ensemble(&sup, &[Start { x: x_s, origin: 1 }], &times, &s.integrator)
                .map_err(|e| ScenarioError::numerical(name, "separatrix", e))?;
            fit_series(&path, w, |k| Some(path.paths[0][k])).map(|fit| SeparatrixSummary { start: x_s, fit })
        }
        None => None,
    };
    let slopes = match s.analysis.slope_window {
        Some(w) => {
            let fitted = asymptotic_slope_fit(&ens, (w[0], w[1])).map_err(|e| ScenarioError::numerical(name, "slopes", e))?;
            let quantum = sup.fraunhofer_slope(1);
            Some(SlopeSummary {
                window: w,
                quantum,
                clusters: cluster_slopes(&fitted, quantum, s.analysis.slope_orders),
            })
        }
        None => None,
    };
    let single = s.analysis.single_packet_reference.then(|| single_packet_paths(&sup, &starts, &times, 1));
    let single_summary = single.as_ref().map(|lone| {
        let other = single_packet_paths(&sup, &starts, &times, 2);
        let a = final_velocities(&ens, |i| ens.origin_label[i] == 1);
        let b = final_velocities(&other, |_| true);
        SinglePacketSummary {
            count: lone.len(),
            final_velocity_mismatch: a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    });
    let (xmin, xmin_csv) = xmin_outputs(s, Some(&sup));
    let window = interference_window(&sup, t_end, range, None);
    let tc = sup.max_interference_time().ok();
    let analysis = Analysis {
        scenario: s.name.clone(),
        mode: s.mode,
        trajectories: ens.len(),
        velocity_ratio: sup.velocity_ratio(),
        regime: sup.classify_regime(&RegimeThresholds::default()),
        max_interference_time: tc,
        interference_window: Some(window),
        noncrossing: noncrossing(&ens, s.analysis.noncrossing_tol),
        boundary: Some(boundary),
        gap,
        separatrix,
        fringe: fringe_metrics(&sup),
        slopes,
        single_packet: single_summary,
        xmin,
        wall: None,
    };
    let length_scale = sup.packet1.sigma0.min(sup.packet2.sigma0);
    Ok(RunOutput {
        scenario: s.clone(),
        analysis,
        bundle: ResultBundle {
            name: s.name.clone(),
            length_scale,
            window: Some(window),
            trajectories: ens,
            density,
        },
        reference: None,
        single_packet: single,
        potential: None,
        xmin_curves: xmin_csv,
        snapshots: Vec::new(),
    })
}

/// Two-packet mirror problem equivalent to a packet hitting a wall at `x = 0`.
fn mirror_reference(s: &Scenario) -> Result<(SymmetricParams, Superposition), ScenarioError> {
    let p = &s.packets[0];
    let sp = SymmetricParams {
        p: p.p0,
        sigma0: p.sigma0,
        x0: -p.x0,
        units: s.units,
    };
    let mut sup = sp.superposition().map_err(|e| ScenarioError::numerical(&s.name, "reference", e))?;
    sup.normalized_packets = s.normalized_packets;
    Ok((sp, sup))
}

fn run_grid(s: &Scenario) -> Result<RunOutput, ScenarioError> {
    let name = s.name.as_str();
    let packet = s.packets[0].packet(s.units);
    let (sp, sup) = mirror_reference(s)?;
    let t_end = s.time.t_end;
    let (potential, align, free_edge) = match s.mode {
        Mode::WallScattering => (PotentialSpec::wall(0.0), None, 0.0),
        Mode::WellWallScattering => {
            let w = static_well_width(packet.p0, s.units);
            let v = static_wall_well_n(packet.p0, s.units, s.well_n)
                .map_err(|e| ScenarioError::numerical(name, "potential", e))?;
            (v, Some(w), -w)
        }
        Mode::DynamicPotentialScattering => {
            let v = dynamic_potential_n(&sp, s.well_n).map_err(|e| ScenarioError::numerical(name, "potential", e))?;
            (v, None, f64::NAN)
        }
        Mode::AnalyticSuperposition => unreachable!("grid pipeline"),
    };
    let default = Grid1D::for_wall_scattering(&packet, 0.0, align, s.grid.boundary)?;
    let grid = Grid1D::aligned(
        s.grid.x_lo.unwrap_or(default.x_lo),
        0.0,
        s.grid.dx.unwrap_or(packet.sigma0 / 40.0),
        align,
        s.grid.dt.unwrap_or(default.dt),
        s.grid.boundary,
    )?;
    let init = init_from_packet_with_tolerance(&grid, &packet, s.grid.edge_tolerance)
        .map_err(|e| ScenarioError::numerical(name, "initial state", e))?;
    let traj_times = uniform_times(0.0, t_end, s.time.samples);
    let dens_times = density_times(s);
    let extra: Vec<f64> = dens_times.iter().cloned().chain(s.analysis.compare_time).collect();
    let times = merge_times(&traj_times, &extra, t_end);
    log::info!("{name}: propagating {} points over {} snapshots", grid.n_points, times.len());
    let snaps = propagate(&init, &potential, s.units, s.grid.stencil, t_end, &times)
        .map_err(|e| ScenarioError::numerical(name, "propagation", e))?;
    let norm0 = init.norm();
    let norm_drift = snaps.iter().map(|st| (st.norm() - norm0).abs() / norm0).fold(0.0, f64::max);

    let right_closed = potential.wall_position().is_some();
    let field = GridField::new(&snaps, s.units, Some(grid.physical_domain(right_closed)))
        .map_err(|e| ScenarioError::numerical(name, "field", e))?;
    let starts: Vec<Start> = sample_initial_positions(&sup, &s.sampling)
        .map_err(|e| ScenarioError::numerical(name, "sampling", e))?
        .into_iter()
        .filter(|st| st.origin == 1)
        .collect();
    log::info!("{name}: integrating {} grid trajectories", starts.len());
    let ens = bohmian_trajectories_from_grid(&field, &starts, &s.integrator)
        .map_err(|e| ScenarioError::numerical(name, "trajectories", e))?;
    let ref_ens = run_ensemble(&sup, &starts, &ens.times, &s.integrator)
        .map_err(|e| ScenarioError::numerical(name, "reference trajectories", e))?;

    let xs = grid.xs();
    let dens_idx: Vec<usize> = dens_times.iter().map(|&t| nearest_index(field.times(), t)).collect();
    let dens_snaps: Vec<GridState> = dens_idx.iter().map(|&k| snaps[k].clone()).collect();
    let density = DensityTable {
        times: dens_snaps.iter().map(|st| st.t).collect(),
        x: xs.clone(),
        rho: dens_snaps.iter().map(GridState::density).collect(),
    };
    let ref_density = analytic_density(&sup, &density.times, &xs, 2.0);

    let compare_t = s.analysis.compare_time.unwrap_or(t_end);
    let snap = &snaps[nearest_index(field.times(), compare_t)];
    let free_edge = if free_edge.is_nan() { -xmin_of_t(&sp, snap.t) } else { free_edge };
    let window = interference_window(&sup, t_end, [grid.x_lo, 0.0], Some(0.0));
    let w0 = sup.fringe_spacing_collision();
    let ref_rho: Vec<f64> = xs.iter().map(|&x| 2.0 * sup.density(x, snap.t)).collect();
    let mut wall = wall_metrics(&xs, &snap.density(), &ref_rho, free_edge, w0);
    wall.compare_time = snap.t;
    wall.norm_drift = norm_drift;
    wall.max_position = ens.paths.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (inside, outside) = rms_split(&ens, &ref_ens, &window);
    wall.rms_inside = inside / packet.sigma0;
    wall.rms_outside = outside / packet.sigma0;

    let (xmin, xmin_csv) = xmin_outputs(s, None);
    let mut potential_csv = String::from("t,x,V\n");
    for &t in &density.times {
        for &x in &xs {
            potential_csv.push_str(&format!("{},{},{}\n", format_f64(t), format_f64(x), format_f64(potential.value(x, t))));
        }
    }
    let analysis = Analysis {
        scenario: s.name.clone(),
        mode: s.mode,
        trajectories: ens.len(),
        velocity_ratio: packet.velocity_ratio(),
        regime: packet.classify_regime(&RegimeThresholds::default()),
        max_interference_time: sup.max_interference_time().ok(),
        interference_window: Some(window),
        noncrossing: noncrossing(&ens, s.analysis.noncrossing_tol),
        boundary: None,
        gap: None,
        separatrix: None,
        fringe: None,
        slopes: None,
        single_packet: None,
        xmin,
        wall: Some(wall),
    };
    Ok(RunOutput {
        scenario: s.clone(),
        analysis,
        bundle: ResultBundle {
            name: s.name.clone(),
            length_scale: packet.sigma0,
            window: Some(window),
            trajectories: ens,
            density,
        },
        reference: Some(ResultBundle {
            name: format!("{}-reference", s.name),
            length_scale: packet.sigma0,
            window: Some(window),
            trajectories: ref_ens,
            density: ref_density,
        }),
        single_packet: None,
        potential: Some(potential_csv),
        xmin_curves: xmin_csv,
        snapshots: dens_snaps,
    })
}

/// RMS path difference over samples inside and outside `window` (judged by
/// the reference path).
fn rms_split(a: &TrajectoryEnsemble, b: &TrajectoryEnsemble, window: &InterferenceWindow) -> (f64, f64) {
    let mut acc = [(0.0, 0usize); 2];
    for (pa, pb) in a.paths.iter().zip(&b.paths) {
        for (k, &t) in a.times.iter().enumerate() {
            let slot = if window.contains(pb[k], t) { 0 } else { 1 };
            acc[slot].0 += (pa[k] - pb[k]).powi(2);
            acc[slot].1 += 1;
        }
    }
    let rms = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { (s / n as f64).sqrt() };
    (rms(acc[0]), rms(acc[1]))
}

/// Peak structure of a wall-side density against its mirror reference.
/// Both profiles are sampled on `xs` (ending at the wall); peaks are ordered
/// outward from the wall and only peaks left of `free_edge` are paired.
fn wall_metrics(xs: &[f64], rho: &[f64], reference: &[f64], free_edge: f64, w0: f64) -> WallMetrics {
    let (max_w, min_w) = significant_extrema(xs, rho, 0.02);
    let (max_r, _) = significant_extrema(xs, reference, 0.02);
    let tol = 1e-9 * w0;
    let outer: Vec<f64> = max_w.iter().rev().map(|m| m.x).filter(|&x| x < free_edge - tol).collect();
    let ref_peaks: Vec<f64> = max_r.iter().rev().map(|m| m.x).collect();
    // Local spacing: mean distance to the neighbouring reference peaks, with
    // the central peak on the mirror point as the innermost neighbour.
    let ext: Vec<f64> = std::iter::once(0.0).chain(ref_peaks.iter().cloned()).collect();
    let local: Vec<f64> = (0..ref_peaks.len())
        .map(|k| match ext.get(k + 2) {
            Some(next) => 0.5 * (ext[k] - next),
            None => ext[k] - ext[k + 1],
        })
        .collect();
    let peaks_vs_w0 = peak_offsets(&outer, &ref_peaks, &vec![w0; ref_peaks.len()]);
    let peaks_vs_local = peak_offsets(&outer, &ref_peaks, &local);
    let minima: Vec<f64> = min_w.iter().rev().map(|m| m.x).collect();
    let innermost_width = minima.first().map(|m| -m);
    let outer_width = (minima.len() >= 2).then(|| minima[0] - minima[1]);
    WallMetrics {
        compare_time: 0.0,
        norm_drift: 0.0,
        max_position: f64::NAN,
        free_edge,
        w0,
        peaks_vs_w0,
        peaks_vs_local,
        innermost_outer_max: outer.first().map(|x| x.abs()),
        innermost_width,
        outer_width,
        width_ratio: innermost_width.zip(outer_width).map(|(a, b)| a / b),
        rms_inside: f64::NAN,
        rms_outside: f64::NAN,
    }
}

#[derive(Serialize, Deserialize)]
pub(super) struct BundleMeta {
    pub name: String,
    pub length_scale: f64,
    pub window: Option<InterferenceWindow>,
}

fn write(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<(), ScenarioError> {
    write_atomic(&path, bytes).map_err(|e| ScenarioError::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn write_bundle(b: &ResultBundle, dir: &Path, written: &mut Vec<PathBuf>) -> Result<(), ScenarioError> {
    write(dir.join("trajectories.csv"), b.trajectories.to_csv().as_bytes(), written)?;
    write(dir.join("density.csv"), b.density.to_csv().as_bytes(), written)?;
    let meta = BundleMeta {
        name: b.name.clone(),
        length_scale: b.length_scale,
        window: b.window,
    };
    write(dir.join("bundle.json"), json_text(&meta).as_bytes(), written)
}

fn trajectory_plot(title: &str, ens: &TrajectoryEnsemble, reference: Option<&TrajectoryEnsemble>) -> String {
    let mut series: Vec<Series> = ens
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| Series {
            label: format!("path {i}"),
            xs: &ens.times,
            ys: p,
            colour: if ens.origin_label[i] == 1 { 0 } else { 1 },
        })
        .collect();
    if let Some(r) = reference {
        series.extend(r.paths.iter().map(|p| Series {
            label: "reference".into(),
            xs: &r.times,
            ys: p,
            colour: 5,
        }));
    }
    line_plot(title, "t", "x", &series, false)
}

/// Writes the requested products of `out` below `dir`, each file atomically.
/// Returns the written paths.
pub fn write_outputs(out: &RunOutput, dir: &Path, plots: bool) -> Result<Vec<PathBuf>, ScenarioError> {
    let o = &out.scenario.outputs;
    let mut written = Vec::new();
    let b = &out.bundle;
    if o.trajectories {
        write(dir.join("trajectories.csv"), b.trajectories.to_csv().as_bytes(), &mut written)?;
        if let Some(single) = &out.single_packet {
            write(dir.join("single_packet_reference.csv"), single.to_csv().as_bytes(), &mut written)?;
        }
    }
    if o.density {
        write(dir.join("density.csv"), b.density.to_csv().as_bytes(), &mut written)?;
        if !out.snapshots.is_empty() {
            write(dir.join("psi_snapshots.csv"), snapshots_to_csv(&out.snapshots).as_bytes(), &mut written)?;
        }
    }
    if o.snapshots_binary {
        for (k, st) in out.snapshots.iter().enumerate() {
            write(dir.join(format!("psi_{k:03}.bin")), &to_binary(st), &mut written)?;
        }
    }
    if o.analysis {
        write(dir.join("analysis.json"), json_text(&out.analysis).as_bytes(), &mut written)?;
        let meta = BundleMeta {
            name: b.name.clone(),
            length_scale: b.length_scale,
            window: b.window,
        };
        write(dir.join("bundle.json"), json_text(&meta).as_bytes(), &mut written)?;
    }
    if let Some(r) = &out.reference {
        write_bundle(r, &dir.join("reference"), &mut written)?;
    }
    if o.potential {
        if let Some(v) = &out.potential {
            write(dir.join("potential.csv"), v.as_bytes(), &mut written)?;
        }
        if let Some(c) = &out.xmin_curves {
            write(dir.join("xmin_curves.csv"), c.as_bytes(), &mut written)?;
        }
    }
    if o.plots && plots {
        let d = &b.density;
        let mut series: Vec<Series> = d
            .rho
            .iter()
            .enumerate()
            .map(|(k, row)| Series {
                label: format!("t = {}", format_f64(d.times[k])),
                xs: &d.x,
                ys: row,
                colour: k,
            })
            .collect();
        if let Some(r) = &out.reference {
            series.extend(r.density.rho.iter().enumerate().map(|(k, row)| Series {
                label: format!("reference t = {}", format_f64(r.density.times[k])),
                xs: &r.density.x,
                ys: row,
                colour: 5,
            }));
        }
        let title = format!("{}: density", out.scenario.name);
        write(dir.join("density.svg"), line_plot(&title, "x", "rho", &series, true).as_bytes(), &mut written)?;
        let title = format!("{}: trajectories", out.scenario.name);
        let svg = trajectory_plot(&title, &b.trajectories, out.reference.as_ref().map(|r| &r.trajectories));
        write(dir.join("trajectories.svg"), svg.as_bytes(), &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{parse_scenario, preset};

    fn small(name: &str) -> Scenario {
        let mut s = preset(name).unwrap();
        s.time.samples = 61;
        s
    }

    #[test]
    fn collision_pipeline() {
        let out = run_scenario(&small("fig2")).unwrap();
        let a = &out.analysis;
        assert_eq!(a.trajectories, 40);
        assert_eq!(a.noncrossing.violations, 0);
        let b = a.boundary.as_ref().unwrap();
        assert_eq!(b.case, "A");
        assert_eq!(b.transfers.total_transfers(), 0);
        let f = a.fringe.as_ref().unwrap();
        assert!(f.relative_error < 0.02, "{f:?}");
        assert_eq!(out.bundle.density.rho.len(), 5);
    }

    #[test]
    fn single_packet_and_window() {
        let out = run_scenario(&small("fig3")).unwrap();
        let lone = out.single_packet.as_ref().unwrap();
        assert_eq!(lone.len(), 20);
        assert!(lone.origin_label.iter().all(|&o| o == 1));
        let w = out.analysis.interference_window.unwrap();
        assert!(w.contains(0.0, 0.3) && !w.contains(0.0, 0.0));
    }

    #[test]
    fn writes_products_atomically() {
        let out = run_scenario(&small("fig12")).unwrap();
        assert_eq!(out.analysis.xmin.len(), 4);
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&out, dir.path(), true).unwrap();
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        for f in ["trajectories.csv", "density.csv", "analysis.json", "xmin_curves.csv", "density.svg", "trajectories.svg"] {
            assert!(names.iter().any(|n| n == f), "{f}");
        }
        let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
        assert!(text.starts_with("t,x,rho\n"));
        let leftovers = std::fs::read_dir(dir.path()).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().contains(".tmp")
        });
        assert_eq!(leftovers.count(), 0);
        let files = write_outputs(&out, dir.path(), false).unwrap();
        assert!(files.iter().all(|p| p.extension().unwrap() != "svg"));
    }

    #[test]
    fn wall_pipeline_on_coarse_grid() {
        let s = parse_scenario(
            r#"{"preset": "fig9", "time": {"t_end": 0.35, "samples": 36},
                "density": {"times": [0.3]}, "grid": {"dx": 0.025}}"#,
        )
        .unwrap();
        let out = run_scenario(&s).unwrap();
        let w = out.analysis.wall.as_ref().unwrap();
        assert!(w.norm_drift < 1e-10, "{}", w.norm_drift);
        assert!(w.max_position < 0.0);
        // A bare wall shifts the fringes by half a period.
        let off = w.peaks_vs_w0.offsets[0];
        assert!((off - 0.5 * w.w0).abs() < 0.1 * w.w0, "{off}");
        let r = out.reference.as_ref().unwrap();
        assert_eq!(r.trajectories.times, out.bundle.trajectories.times);
        assert_eq!(r.density.x, out.bundle.density.x);
        assert_eq!(out.snapshots.len(), 1);
    }

    #[test]
    fn numerical_errors_carry_context() {
        let mut s = small("fig2");
        s.sampling.overlap_threshold = 1e-30;
        s.packets[0].x0 = -1.0;
        match run_scenario(&s) {
            Err(e @ ScenarioError::Numerical { .. }) => {
                assert!(e.to_string().contains("fig2"));
                assert_eq!(e.exit_code(), 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
