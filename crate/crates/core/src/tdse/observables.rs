//! Hydrodynamic fields extracted from grid wave functions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::GridState;
use crate::error::{FieldError, TdseError, TrajectoryError};
use crate::field::{VelocityField, RHO_FLOOR};
use crate::integrator::IntegratorConfig;
use crate::trajectory::{run_ensemble, Start, TrajectoryEnsemble};
use crate::wavepacket::UnitSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridObservables {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub current: Vec<f64>,
    /// `J / rho`, NaN where `rho` is below the node floor.
    pub velocity: Vec<f64>,
    pub node: Vec<bool>,
}

/// Value at index `j`, extended outside the grid by odd reflection
/// (consistent with the Dirichlet ends).
fn ghost(psi: &[Complex64], j: isize) -> Complex64 {
    let n = psi.len() as isize;
    if j < 0 {
        -psi[(-j) as usize]
    } else if j >= n {
        -psi[(2 * (n - 1) - j) as usize]
    } else {
        psi[j as usize]
    }
}

/// `rho`, `J` (fourth-order central differences) and `v` on the grid.
pub fn grid_observables(state: &GridState, units: UnitSystem) -> GridObservables {
    let psi = &state.psi;
    let n = psi.len();
    let dx = state.grid.dx();
    let mut out = GridObservables {
        x: state.grid.xs(),
        rho: Vec::with_capacity(n),
        current: Vec::with_capacity(n),
        velocity: Vec::with_capacity(n),
        node: Vec::with_capacity(n),
    };
    for j in 0..n {
        let i = j as isize;
        let d = (ghost(psi, i - 2) - 8.0 * ghost(psi, i - 1) + 8.0 * ghost(psi, i + 1) - ghost(psi, i + 2))
            / (12.0 * dx);
        let rho = psi[j].norm_sqr();
        let cur = units.hbar / units.mass * (psi[j].conj() * d).im;
        let node = !(rho >= RHO_FLOOR);
        out.rho.push(rho);
        out.current.push(cur);
        out.velocity.push(if node { f64::NAN } else { cur / rho });
        out.node.push(node);
    }
    out
}

/// Velocity field interpolated from a sequence of grid snapshots: cubic in
/// `x` (separately for `rho` and `J`), linear in `t`.
#[derive(Debug, Clone)]
pub struct GridField {
    units: UnitSystem,
    times: Vec<f64>,
    x_lo: f64,
    dx: f64,
    n: usize,
    domain: (f64, f64),
    rho: Vec<Vec<f64>>,
    current: Vec<Vec<f64>>,
}

impl GridField {
    /// `domain` restricts where the field is considered valid (e.g. outside
    /// absorbing layers); it is clipped to the grid.
    pub fn new(snapshots: &[GridState], units: UnitSystem, domain: Option<(f64, f64)>) -> Result<Self, TdseError> {
        let first = snapshots.first().ok_or(TdseError::IncompatibleSnapshots)?;
        let g = first.grid;
        let same_space = snapshots
            .iter()
            .all(|s| s.grid.x_lo == g.x_lo && s.grid.x_hi == g.x_hi && s.grid.n_points == g.n_points);
        let ordered = snapshots.windows(2).all(|w| w[1].t > w[0].t);
        if !same_space || !ordered {
            return Err(TdseError::IncompatibleSnapshots);
        }
        let obs: Vec<GridObservables> = snapshots.iter().map(|s| grid_observables(s, units)).collect();
        let (mut lo, mut hi) = domain.unwrap_or((g.x_lo, g.x_hi));
        lo = lo.max(g.x_lo);
        hi = hi.min(g.x_hi);
        Ok(Self {
            units,
            times: snapshots.iter().map(|s| s.t).collect(),
            x_lo: g.x_lo,
            dx: g.dx(),
            n: g.n_points,
            domain: (lo, hi),
            rho: obs.iter().map(|o| o.rho.clone()).collect(),
            current: obs.into_iter().map(|o| o.current).collect(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn locate_t(&self, x: f64, t: f64) -> Result<(usize, f64), FieldError> {
        let ts = &self.times;
        let eps = 1e-12 * (1.0 + t.abs());
        if t < ts[0] - eps || t > ts[ts.len() - 1] + eps {
            return Err(FieldError::OutOfDomain { x, t });
        }
        if ts.len() == 1 {
            return Ok((0, 0.0));
        }
        let k = ts.partition_point(|&s| s <= t).clamp(1, ts.len() - 1);
        let w = ((t - ts[k - 1]) / (ts[k] - ts[k - 1])).clamp(0.0, 1.0);
        Ok((k - 1, w))
    }

    /// Cubic Lagrange interpolation of `data` at `x` (4 nearest nodes).
    fn cubic(&self, data: &[f64], x: f64) -> f64 {
        let u = (x - self.x_lo) / self.dx;
        let j = (u.floor() as isize).clamp(1, self.n as isize - 3) as usize;
        let s = u - j as f64;
        let (f0, f1, f2, f3) = (data[j - 1], data[j], data[j + 1], data[j + 2]);
        let l0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let l1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let l2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let l3 = (s + 1.0) * s * (s - 1.0) / 6.0;
        f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
    }

    fn interp(&self, table: &[Vec<f64>], x: f64, t: f64) -> Result<f64, FieldError> {
        if !(x >= self.domain.0 && x <= self.domain.1) {
            return Err(FieldError::OutOfDomain { x, t });
        }
        let (k, w) = self.locate_t(x, t)?;
        let a = self.cubic(&table[k], x);
        if w == 0.0 {
            return Ok(a);
        }
        let b = self.cubic(&table[k + 1], x);
        Ok((1.0 - w) * a + w * b)
    }
}

impl VelocityField for GridField {
    fn units(&self) -> UnitSystem {
        self.units
    }

    fn density(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        self.interp(&self.rho, x, t)
    }

    fn current(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        self.interp(&self.current, x, t)
    }

    fn length_scale(&self, _t: f64) -> f64 {
        100.0 * self.dx
    }
}

/// Bohmian paths through the grid field; output samples are the snapshot times.
pub fn bohmian_trajectories_from_grid(
    field: &GridField,
    starts: &[Start],
    cfg: &IntegratorConfig,
) -> Result<TrajectoryEnsemble, TrajectoryError> {
    let ts = field.times();
    let spacing = ts.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut cfg = *cfg;
    if spacing.is_finite() && spacing < cfg.max_step {
        cfg.max_step = spacing;
        cfg.min_step = cfg.min_step.min(0.5 * spacing);
    }
    run_ensemble(field, starts, ts, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use crate::tdse::grid::{init_from_packet, Boundary, Grid1D};
    use crate::tdse::solver::{propagate, StencilOrder};
    use crate::wavepacket::GaussianPacket;

    fn free_run() -> (GaussianPacket, Vec<GridState>) {
        let p = GaussianPacket::natural(-2.0, 3.0, 0.5).unwrap();
        let grid = Grid1D::new(-9.0, 9.0, 1441, 2e-4 * p.tau(), Boundary::Dirichlet).unwrap();
        let s = init_from_packet(&grid, &p).unwrap();
        let times: Vec<f64> = (0..=400).map(|i| 0.002 * i as f64).collect();
        let snaps = propagate(&s, &PotentialSpec::free(), p.units, StencilOrder::Sixth, 0.8, &times).unwrap();
        (p, snaps)
    }

    #[test]
    fn free_velocity_and_continuity() {
        let (p, snaps) = free_run();
        let o = grid_observables(&snaps[200], p.units);
        let t = snaps[200].t;
        for j in 0..o.x.len() {
            let x = o.x[j];
            if (x - p.centroid(t)).abs() < 2.0 * p.spread(t) {
                assert!((o.velocity[j] - p.velocity(x, t)).abs() < 1e-5, "x={x}");
            }
        }
        assert!(o.node[0] && o.velocity[0].is_nan());
        // Discrete continuity with a central time difference.
        let (a, b) = (grid_observables(&snaps[199], p.units), grid_observables(&snaps[201], p.units));
        let dt = snaps[201].t - snaps[199].t;
        let dx = snaps[200].grid.dx();
        let c = &o.current;
        for j in 2..o.x.len() - 2 {
            let dj = (c[j - 2] - 8.0 * c[j - 1] + 8.0 * c[j + 1] - c[j + 2]) / (12.0 * dx);
            let r = (b.rho[j] - a.rho[j]) / dt + dj;
            assert!(r.abs() < 1e-4, "j={j} r={r}");
        }
    }

    #[test]
    fn grid_trajectories_match_closed_form() {
        let (p, snaps) = free_run();
        let field = GridField::new(&snaps, p.units, None).unwrap();
        let starts: Vec<Start> = [-0.5, 0.0, 0.7].iter().map(|u| Start { x: p.x0 + u, origin: 1 }).collect();
        let ens = bohmian_trajectories_from_grid(&field, &starts, &IntegratorConfig::for_length(p.sigma0)).unwrap();
        for (i, s) in starts.iter().enumerate() {
            for (k, &t) in ens.times.iter().enumerate() {
                let exact = p.trajectory(s.x, t);
                assert!((ens.paths[i][k] - exact).abs() < 1e-3 * p.sigma0, "i={i} t={t}");
            }
        }
    }

    #[test]
    fn out_of_domain() {
        let (p, snaps) = free_run();
        let field = GridField::new(&snaps, p.units, Some((-5.0, 5.0))).unwrap();
        assert!(matches!(field.velocity(6.0, 0.1), Err(FieldError::OutOfDomain { .. })));
        assert!(matches!(field.velocity(0.0, 5.0), Err(FieldError::OutOfDomain { .. })));
        assert!(GridField::new(&[], p.units, None).is_err());
    }
}
