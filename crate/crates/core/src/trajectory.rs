//! Initial-condition sampling, ensemble integration and ensemble diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ParamError, TrajectoryError};
use crate::field::VelocityField;
use crate::integrator::{self, Failure, IntegratorConfig};
use crate::io::format_f64;
use crate::superposition::{BoundaryLine, Superposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    DensityQuantile,
    EqualProbabilitySpacing,
    ExplicitList,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    pub x: f64,
    pub origin: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingStrategy {
    pub kind: SamplingKind,
    pub count_per_packet: [usize; 2],
    /// Half-width of the sampling window, in units of each packet's `sigma0`.
    pub span: f64,
    pub explicit: Vec<Start>,
    /// Largest tolerated `integral rho1 rho2 dx` at `t = 0`.
    pub overlap_threshold: f64,
}

impl Default for SamplingStrategy {
    fn default() -> Self {
        Self {
            kind: SamplingKind::DensityQuantile,
            count_per_packet: [20, 20],
            span: 4.0,
            explicit: Vec::new(),
            overlap_threshold: 1e-6,
        }
    }
}

impl SamplingStrategy {
    pub fn quantiles(n1: usize, n2: usize) -> Self {
        Self {
            count_per_packet: [n1, n2],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        match self.kind {
            SamplingKind::ExplicitList => {
                if self.explicit.iter().any(|s| !s.x.is_finite() || !(s.origin == 1 || s.origin == 2)) {
                    return Err(ParamError::new("sampling.explicit", "positions must be finite, origins 1 or 2"));
                }
            }
            _ => {
                if self.count_per_packet.iter().any(|&n| n == 0) {
                    return Err(ParamError::new("sampling.count_per_packet", "counts must be >= 1"));
                }
            }
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(ParamError::new("sampling.span", "must be finite and > 0"));
        }
        if !(self.overlap_threshold >= 0.0) {
            return Err(ParamError::new("sampling.overlap_threshold", "must be >= 0"));
        }
        Ok(())
    }
}

/// Offsets (in units of sigma) whose Gaussian density values are evenly
/// spaced between the value at `span` and the peak.
fn equal_density_offsets(n: usize, span: f64) -> Vec<f64> {
    let edge = (-0.5 * span * span).exp();
    let levels: Vec<f64> = if n % 2 == 1 {
        let l = (n + 1) / 2;
        (1..=l).map(|j| edge + j as f64 * (1.0 - edge) / l as f64).collect()
    } else {
        let l = n / 2;
        (1..=l).map(|j| edge + (j as f64 - 0.5) * (1.0 - edge) / l as f64).collect()
    };
    let mut out = Vec::with_capacity(n);
    for &level in &levels {
        let u = (-2.0 * level.min(1.0).ln()).max(0.0).sqrt();
        if u == 0.0 {
            out.push(0.0);
        } else {
            out.push(-u);
            out.push(u);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

pub fn sample_initial_positions(sup: &Superposition, strategy: &SamplingStrategy) -> Result<Vec<Start>, TrajectoryError> {
    strategy.validate()?;
    let overlap = sup.initial_overlap();
    if overlap > strategy.overlap_threshold {
        return Err(TrajectoryError::OverlapTooLarge {
            overlap,
            threshold: strategy.overlap_threshold,
        });
    }
    let mut starts = Vec::new();
    match strategy.kind {
        SamplingKind::ExplicitList => starts.extend_from_slice(&strategy.explicit),
        SamplingKind::DensityQuantile => {
            let std = Normal::new(0.0, 1.0).expect("standard normal");
            for (i, p) in sup.packets().iter().enumerate() {
                let n = strategy.count_per_packet[i];
                for k in 1..=n {
                    let z = std.inverse_cdf(k as f64 / (n + 1) as f64);
                    starts.push(Start {
                        x: p.x0 + p.sigma0 * z,
                        origin: i as u8 + 1,
                    });
                }
            }
        }
        SamplingKind::EqualProbabilitySpacing => {
            for (i, p) in sup.packets().iter().enumerate() {
                for u in equal_density_offsets(strategy.count_per_packet[i], strategy.span) {
                    starts.push(Start {
                        x: p.x0 + p.sigma0 * u,
                        origin: i as u8 + 1,
                    });
                }
            }
        }
    }
    Ok(starts)
}

/// Time-sampled Bohmian paths with their packet of origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    pub origin_label: Vec<u8>,
}

impl TrajectoryEnsemble {
    pub fn new(times: Vec<f64>, paths: Vec<Vec<f64>>, origin_label: Vec<u8>) -> Result<Self, ParamError> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ParamError::new("times", "must be strictly increasing"));
        }
        if paths.len() != origin_label.len() || paths.iter().any(|p| p.len() != times.len()) {
            return Err(ParamError::new("paths", "one position per time sample and one label per path"));
        }
        Ok(Self {
            times,
            paths,
            origin_label,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Position of path `i` at time `t`, linearly interpolated between samples.
    pub fn position_at(&self, i: usize, t: f64) -> f64 {
        let ts = &self.times;
        let path = &self.paths[i];
        let k = ts.partition_point(|&s| s <= t);
        if k == 0 {
            return path[0];
        }
        if k >= ts.len() {
            return path[ts.len() - 1];
        }
        let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
        path[k - 1] + w * (path[k] - path[k - 1])
    }

    /// Indices of samples inside `[a, b]`.
    pub fn window_indices(&self, a: f64, b: f64) -> Vec<usize> {
        (0..self.times.len())
            .filter(|&k| self.times[k] >= a && self.times[k] <= b)
            .collect()
    }

    /// CSV with columns `trajectory_id,origin_label,t,x`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trajectory_id,origin_label,t,x\n");
        for (i, path) in self.paths.iter().enumerate() {
            for (t, x) in self.times.iter().zip(path) {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    i,
                    self.origin_label[i],
                    format_f64(*t),
                    format_f64(*x)
                ));
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn map_failure(index: usize, f: Failure) -> TrajectoryError {
    match f {
        Failure::Node { t, x } => TrajectoryError::NodeEncounter { index, x, t },
        Failure::OutOfDomain { t, x } => TrajectoryError::OutOfDomain { index, x, t },
        Failure::Step { t, reason } => TrajectoryError::StepFailure { index, t, reason },
    }
}

/// Integrates one Bohmian path from `(times[0], x_start)` and samples it at `times`.
pub fn integrate_trajectory<F: VelocityField + ?Sized>(
    field: &F,
    x_start: f64,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, TrajectoryError> {
    integrate_indexed(field, 0, x_start, times, cfg)
}

fn integrate_indexed<F: VelocityField + ?Sized>(
    field: &F,
    index: usize,
    x_start: f64,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, TrajectoryError> {
    cfg.validate()?;
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    integrator::integrate(|t, x| field.velocity(x, t), t0, x_start, times, cfg).map_err(|f| map_failure(index, f))
}

/// Integrates every start in parallel; output order follows `starts`.
pub fn run_ensemble<F: VelocityField + ?Sized>(
    field: &F,
    starts: &[Start],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<TrajectoryEnsemble, TrajectoryError> {
    cfg.validate()?;
    let results: Vec<Result<Vec<f64>, TrajectoryError>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| integrate_indexed(field, i, s.x, times, cfg))
        .collect();
    let mut paths = Vec::with_capacity(starts.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(TrajectoryError::Ensemble(errors));
    }
    Ok(TrajectoryEnsemble::new(
        times.to_vec(),
        paths,
        starts.iter().map(|s| s.origin).collect(),
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingViolation {
    /// Indices (lower, upper) in terms of initial ordering.
    pub pair: (usize, usize),
    pub time: f64,
    pub time_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonCrossingReport {
    pub violations: usize,
    pub first: Option<CrossingViolation>,
    pub min_gap: f64,
}

impl NonCrossingReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks that the initial ordering of positions is kept at every sample.
pub fn check_non_crossing(ens: &TrajectoryEnsemble, tol: f64) -> NonCrossingReport {
    let mut order: Vec<usize> = (0..ens.len()).collect();
    order.sort_by(|&a, &b| ens.paths[a][0].total_cmp(&ens.paths[b][0]).then(a.cmp(&b)));
    let mut violations = 0;
    let mut first = None;
    let mut min_gap = f64::INFINITY;
    for k in 0..ens.times.len() {
        for w in order.windows(2) {
            let gap = ens.paths[w[1]][k] - ens.paths[w[0]][k];
            min_gap = min_gap.min(gap);
            if gap < -tol {
                violations += 1;
                if first.is_none() {
                    first = Some(CrossingViolation {
                        pair: (w[0], w[1]),
                        time: ens.times[k],
                        time_index: k,
                    });
                }
            }
        }
    }
    NonCrossingReport {
        violations,
        first,
        min_gap,
    }
}

/// How a case boundary is located at the counting time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    Analytic,
    CentroidMidpoint,
    DensityMinimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferCounts {
    pub boundary_x: f64,
    /// Trajectories left of the boundary (region I) at the counting time.
    pub n1_final: usize,
    pub n2_final: usize,
    pub n1_initial: usize,
    pub n2_initial: usize,
    /// Origin-1 paths ending in region II.
    pub transfers_1_to_2: usize,
    /// Origin-2 paths ending in region I.
    pub transfers_2_to_1: usize,
}

impl TransferCounts {
    pub fn total_transfers(&self) -> usize {
        self.transfers_1_to_2 + self.transfers_2_to_1
    }
}

/// Counts paths on each side of `boundary_x` at `t_final`.
pub fn count_region_transfer_at(ens: &TrajectoryEnsemble, boundary_x: f64, t_final: f64) -> TransferCounts {
    let mut c = TransferCounts {
        boundary_x,
        n1_final: 0,
        n2_final: 0,
        n1_initial: 0,
        n2_initial: 0,
        transfers_1_to_2: 0,
        transfers_2_to_1: 0,
    };
    for i in 0..ens.len() {
        let left = ens.position_at(i, t_final) < boundary_x;
        let origin = ens.origin_label[i];
        if origin == 1 {
            c.n1_initial += 1;
        } else {
            c.n2_initial += 1;
        }
        match (origin, left) {
            (_, true) => c.n1_final += 1,
            (_, false) => c.n2_final += 1,
        }
        match (origin, left) {
            (1, false) => c.transfers_1_to_2 += 1,
            (2, true) => c.transfers_2_to_1 += 1,
            _ => {}
        }
    }
    c
}

pub fn count_region_transfer(ens: &TrajectoryEnsemble, boundary: &BoundaryLine, t_final: f64) -> TransferCounts {
    count_region_transfer_at(ens, boundary.at(t_final), t_final)
}

/// Deepest density minimum of `field` on `[a, b]` at time `t`.
pub fn density_minimum_between<F: VelocityField + ?Sized>(field: &F, a: f64, b: f64, t: f64) -> f64 {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    let n = 4000;
    let h = (b - a) / n as f64;
    let rho = |x: f64| field.density(x, t).unwrap_or(f64::INFINITY);
    let mut best = (a, f64::INFINITY);
    for i in 0..=n {
        let x = a + i as f64 * h;
        let r = rho(x);
        if r < best.1 {
            best = (x, r);
        }
    }
    golden_min(rho, (best.0 - h).max(a), (best.0 + h).min(b), 1e-12 * (1.0 + best.0.abs()))
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}

/// Boundary position at `t` under `rule`; `analytic` is the case line if any.
pub fn resolve_boundary(sup: &Superposition, rule: BoundaryRule, analytic: Option<BoundaryLine>, t: f64) -> f64 {
    let mid = 0.5 * (sup.packet1.centroid(t) + sup.packet2.centroid(t));
    match (rule, analytic) {
        (BoundaryRule::Analytic, Some(line)) => line.at(t),
        (BoundaryRule::Analytic, None) | (BoundaryRule::CentroidMidpoint, _) => mid,
        (BoundaryRule::DensityMinimum, _) => {
            density_minimum_between(sup, sup.packet1.centroid(t), sup.packet2.centroid(t), t)
        }
    }
}

/// Initial position below which a fraction `q` of the total probability lies.
pub fn probability_quantile_start(sup: &Superposition, q: f64) -> f64 {
    let w = [sup.c1 * sup.c1, sup.c2 * sup.c2];
    let total = w[0] + w[1];
    let cdf = |x: f64| {
        let mut s = 0.0;
        for (i, p) in sup.packets().iter().enumerate() {
            let z = (x - p.x0) / (p.sigma0 * std::f64::consts::SQRT_2);
            s += w[i] * 0.5 * statrs::function::erf::erfc(-z);
        }
        s / total
    };
    let lo0 = sup.packet1.x0.min(sup.packet2.x0) - 20.0 * sup.packet1.sigma0.max(sup.packet2.sigma0);
    let hi0 = sup.packet1.x0.max(sup.packet2.x0) + 20.0 * sup.packet1.sigma0.max(sup.packet2.sigma0);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Midpoint of the gap between the innermost origin-1 and origin-2 paths
/// at sample `k`, assuming origin 1 starts on the left.
pub fn gap_midpoint(ens: &TrajectoryEnsemble, k: usize) -> Option<f64> {
    let inner1 = (0..ens.len())
        .filter(|&i| ens.origin_label[i] == 1)
        .map(|i| ens.paths[i][k])
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let inner2 = (0..ens.len())
        .filter(|&i| ens.origin_label[i] == 2)
        .map(|i| ens.paths[i][k])
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
    Some(0.5 * (inner1? + inner2?))
}

/// Least-squares slope and intercept of `(ts, xs)`.
pub fn linear_fit(ts: &[f64], xs: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let mx = xs.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut stx = 0.0;
    for (t, x) in ts.iter().zip(xs) {
        stt += (t - mt) * (t - mt);
        stx += (t - mt) * (x - mx);
    }
    let slope = stx / stt;
    (slope, mx - slope * mt)
}

/// Per-trajectory least-squares slope over the samples in `[a, b]`.
pub fn asymptotic_slope_fit(ens: &TrajectoryEnsemble, window: (f64, f64)) -> Result<Vec<f64>, TrajectoryError> {
    let idx = ens.window_indices(window.0, window.1);
    if idx.len() < 5 {
        return Err(TrajectoryError::WindowTooShort { samples: idx.len() });
    }
    let ts: Vec<f64> = idx.iter().map(|&k| ens.times[k]).collect();
    Ok(ens
        .paths
        .iter()
        .map(|p| {
            let xs: Vec<f64> = idx.iter().map(|&k| p[k]).collect();
            linear_fit(&ts, &xs).0
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeCluster {
    pub n: i32,
    pub expected: f64,
    pub mean: f64,
    pub count: usize,
}

impl SlopeCluster {
    /// Deviation of the mean from the expected slope, relative to the first
    /// nonzero quantum (so that `n = 0` is judged on the same scale).
    pub fn relative_error(&self, quantum: f64) -> f64 {
        let scale = if self.expected != 0.0 { self.expected.abs() } else { quantum.abs() };
        (self.mean - self.expected).abs() / scale
    }
}

/// Groups slopes around `n * quantum` for `n` in `-n_max..=n_max`.
pub fn cluster_slopes(slopes: &[f64], quantum: f64, n_max: i32) -> Vec<SlopeCluster> {
    let mut sums = vec![(0.0, 0usize); (2 * n_max + 1) as usize];
    for &s in slopes {
        let n = (s / quantum).round() as i32;
        if n.abs() <= n_max {
            let e = &mut sums[(n + n_max) as usize];
            e.0 += s;
            e.1 += 1;
        }
    }
    (-n_max..=n_max)
        .zip(sums)
        .filter(|(_, (_, c))| *c > 0)
        .map(|(n, (s, c))| SlopeCluster {
            n,
            expected: n as f64 * quantum,
            mean: s / c as f64,
            count: c,
        })
        .collect()
}

pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![t0];
    }
    (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect()
}
