//! Crank-Nicolson propagation with a banded finite-difference Hamiltonian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{Grid1D, GridState};
use crate::error::{ParamError, TdseError};
use crate::potential::{PotentialSpec, TimeDependence};
use crate::wavepacket::UnitSystem;

/// Accuracy order of the Laplacian stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilOrder {
    Second,
    Fourth,
    #[default]
    Sixth,
}

impl StencilOrder {
    fn coefficients(self) -> &'static [f64] {
        match self {
            StencilOrder::Second => &[-2.0, 1.0],
            StencilOrder::Fourth => &[-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
            StencilOrder::Sixth => &[-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
        }
    }

    fn half_width(self) -> usize {
        self.coefficients().len() - 1
    }
}

/// Square banded matrix with `k` sub- and super-diagonals, row-major.
#[derive(Debug, Clone)]
struct Banded {
    n: usize,
    k: usize,
    a: Vec<Complex64>,
}

impl Banded {
    fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            a: vec![Complex64::new(0.0, 0.0); n * (2 * k + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.k + 1) + (j + self.k - i)
    }

    fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let p = self.idx(i, j);
        self.a[p] += v;
    }

    fn mul(&self, x: &[Complex64], out: &mut [Complex64]) {
        let w = 2 * self.k + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.k);
            let hi = (i + self.k).min(self.n - 1);
            let row = &self.a[i * w..(i + 1) * w];
            let mut s = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                s += row[j + self.k - i] * x[j];
            }
            out[i] = s;
        }
    }

    /// In-place LU without pivoting. The real part of the CN matrix is the
    /// identity, so every leading minor is nonzero.
    fn factorize(mut self) -> Result<Self, TdseError> {
        let (n, k) = (self.n, self.k);
        for c in 0..n {
            let piv = self.a[self.idx(c, c)];
            if piv.norm() < 1e-300 || !piv.is_finite() {
                return Err(TdseError::SolverSingular { row: c });
            }
            let inv = 1.0 / piv;
            for r in c + 1..=(c + k).min(n - 1) {
                let rc = self.idx(r, c);
                let l = self.a[rc] * inv;
                self.a[rc] = l;
                for j in c + 1..=(c + k).min(n - 1) {
                    let cj = self.a[self.idx(c, j)];
                    let rj = self.idx(r, j);
                    self.a[rj] -= l * cj;
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, b: &mut [Complex64]) {
        let (n, k) = (self.n, self.k);
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(k)..i {
                s -= self.a[self.idx(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + k).min(n - 1) {
                s -= self.a[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.a[self.idx(i, i)];
        }
    }
}

/// Crank-Nicolson propagator for one grid, potential and unit system.
///
/// The interior unknowns run between the left grid end and the first
/// hard-wall point (or the right grid end); both are Dirichlet nodes,
/// represented through odd-reflection ghost points so the discrete
/// Hamiltonian stays symmetric.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid1D,
    potential: PotentialSpec,
    units: UnitSystem,
    order: StencilOrder,
    cached: Option<(Banded, Banded, usize)>,
}

impl Propagator {
    pub fn new(grid: Grid1D, potential: PotentialSpec, units: UnitSystem, order: StencilOrder) -> Result<Self, TdseError> {
        grid.validate()?;
        potential.validate()?;
        units.validate()?;
        Ok(Self {
            grid,
            potential,
            units,
            order,
            cached: None,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Whether the right end is closed by a hard wall on the grid.
    pub fn right_closed(&self) -> bool {
        self.potential
            .wall_position()
            .is_some_and(|w| w <= self.grid.x_hi + 0.5 * self.grid.dx())
    }

    /// Index of the right Dirichlet node at time `t`.
    fn right_node(&self, v: &[f64]) -> usize {
        v.iter()
            .position(|x| x.is_infinite())
            .unwrap_or(self.grid.n_points - 1)
            .min(self.grid.n_points - 1)
    }

    /// Assembles `(I + i dt H / 2 hbar)` (factorized) and `(I - i dt H / 2 hbar)`.
    fn assemble(&self, t_mid: f64) -> Result<(Banded, Banded, usize), TdseError> {
        let g = &self.grid;
        let dx = g.dx();
        let v = self.potential.sample_grid(g.x_lo, dx, g.n_points, t_mid);
        let r = self.right_node(&v);
        let closed = self.right_closed();
        let finite_max = v[1..r].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let ratio = g.dt * finite_max / self.units.hbar;
        if ratio >= 0.5 {
            return Err(TdseError::StepTooLarge { ratio });
        }
        let m = r - 1;
        if m < 2 * self.order.half_width() + 1 {
            return Err(ParamError::new("grid.n_points", "too few interior points before the wall").into());
        }
        let coeffs = self.order.coefficients();
        let k = self.order.half_width();
        let kin = -self.units.hbar * self.units.hbar / (2.0 * self.units.mass * dx * dx);
        let mut h = Banded::zeros(m, k);
        for row in 0..m {
            let j = row + 1;
            let w = g.absorption(g.x(j), closed);
            h.add(row, row, Complex64::new(v[j] + kin * coeffs[0], -w));
            for (off, &c) in coeffs.iter().enumerate().skip(1) {
                for nb in [j as isize - off as isize, (j + off) as isize] {
                    let (col, sign) = if nb <= 0 {
                        ((-nb) as usize, -1.0)
                    } else if nb as usize >= r {
                        (2 * r - nb as usize, -1.0)
                    } else {
                        (nb as usize, 1.0)
                    };
                    if col == 0 || col == r {
                        continue;
                    }
                    h.add(row, col - 1, Complex64::new(sign * kin * c, 0.0));
                }
            }
        }
        let z = Complex64::new(0.0, g.dt / (2.0 * self.units.hbar));
        let mut a = h.clone();
        let mut b = h;
        for (x, y) in a.a.iter_mut().zip(b.a.iter_mut()) {
            *x *= z;
            *y *= -z;
        }
        for i in 0..m {
            a.add(i, i, Complex64::new(1.0, 0.0));
            b.add(i, i, Complex64::new(1.0, 0.0));
        }
        Ok((a.factorize()?, b, r))
    }

    /// Advances `state` by one time step `grid.dt`.
    pub fn step(&mut self, state: &GridState) -> Result<GridState, TdseError> {
        if state.grid != self.grid {
            return Err(TdseError::IncompatibleSnapshots);
        }
        let t_mid = state.t + 0.5 * self.grid.dt;
        let is_static = matches!(self.potential.time_dependence, TimeDependence::Static);
        let fresh;
        let (a, b, r) = if is_static {
            if self.cached.is_none() {
                self.cached = Some(self.assemble(t_mid)?);
            }
            let c = self.cached.as_ref().expect("cached factorization");
            (&c.0, &c.1, c.2)
        } else {
            fresh = self.assemble(t_mid)?;
            (&fresh.0, &fresh.1, fresh.2)
        };
        let interior = &state.psi[1..r];
        let mut rhs = vec![Complex64::new(0.0, 0.0); r - 1];
        b.mul(interior, &mut rhs);
        a.solve(&mut rhs);
        let mut psi = vec![Complex64::new(0.0, 0.0); self.grid.n_points];
        psi[1..r].copy_from_slice(&rhs);
        Ok(GridState {
            grid: self.grid,
            t: state.t + self.grid.dt,
            psi,
        })
    }
}

/// One Crank-Nicolson step (sixth-order stencil) without factorization reuse.
pub fn step(state: &GridState, potential: &PotentialSpec, units: UnitSystem) -> Result<GridState, TdseError> {
    Propagator::new(state.grid, potential.clone(), units, StencilOrder::default())?.step(state)
}

/// Propagates to `t_end`, returning snapshots at `sample_times`.
///
/// The step is shrunk so that an integer number of steps spans
/// `[state.t, t_end]`; each sample is taken at the nearest step.
pub fn propagate(
    state: &GridState,
    potential: &PotentialSpec,
    units: UnitSystem,
    order: StencilOrder,
    t_end: f64,
    sample_times: &[f64],
) -> Result<Vec<GridState>, TdseError> {
    let t0 = state.t;
    let span = t_end - t0;
    if span < 0.0 || sample_times.iter().any(|&s| s < t0 - 1e-12 || s > t_end + 1e-12) {
        return Err(ParamError::new("sample_times", "must lie within [t_start, t_end]").into());
    }
    if span == 0.0 {
        return Ok(sample_times.iter().map(|_| state.clone()).collect());
    }
    let n_steps = ((span / state.grid.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = span / n_steps as f64;
    let grid = Grid1D { dt, ..state.grid };
    let mut prop = Propagator::new(grid, potential.clone(), units, order)?;
    let mut sample_steps: Vec<(usize, usize)> = sample_times
        .iter()
        .enumerate()
        .map(|(i, &s)| ((((s - t0) / dt).round() as usize).min(n_steps), i))
        .collect();
    sample_steps.sort();
    let mut out: Vec<Option<GridState>> = vec![None; sample_times.len()];
    let mut cur = GridState { grid, ..state.clone() };
    let mut next = 0;
    for k in 0..=n_steps {
        while next < sample_steps.len() && sample_steps[next].0 == k {
            out[sample_steps[next].1] = Some(cur.clone());
            next += 1;
        }
        if k == n_steps || next == sample_steps.len() {
            break;
        }
        cur = prop.step(&cur)?;
        cur.t = t0 + (k + 1) as f64 * dt;
    }
    Ok(out.into_iter().map(|s| s.expect("every sample visited")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdse::grid::{init_from_packet, Boundary};
    use crate::wavepacket::GaussianPacket;

    fn free_setup(order: StencilOrder, refine: usize) -> (GridState, Propagator, GaussianPacket) {
        let p = GaussianPacket::natural(0.0, 0.0, 0.5).unwrap();
        let dx = p.sigma0 / (40.0 * refine as f64);
        let n = (16.0 / dx).round() as usize + 1;
        let grid = Grid1D::new(-8.0, 8.0, n, 2e-4 * p.tau() / refine as f64, Boundary::Dirichlet).unwrap();
        let s = init_from_packet(&grid, &p).unwrap();
        let prop = Propagator::new(grid, PotentialSpec::free(), p.units, order).unwrap();
        (s, prop, p)
    }

    fn free_error(order: StencilOrder, refine: usize, steps: usize) -> f64 {
        let (mut s, mut prop, p) = free_setup(order, refine);
        for _ in 0..steps * refine {
            s = prop.step(&s).unwrap();
        }
        let t = s.t;
        s.l2_error(|x| p.evaluate(x, t))
    }

    #[test]
    fn short_free_run_is_accurate_and_unitary() {
        let (mut s, mut prop, p) = free_setup(StencilOrder::Sixth, 1);
        let n0 = s.norm();
        for _ in 0..200 {
            let before = s.norm();
            s = prop.step(&s).unwrap();
            assert!((s.norm() - before).abs() < 1e-10);
        }
        assert!((s.norm() - n0).abs() < 1e-12);
        let t = s.t;
        assert!(s.l2_error(|x| p.evaluate(x, t)) < 1e-7);
    }

    #[test]
    fn orders_converge_as_expected() {
        let e2 = free_error(StencilOrder::Second, 1, 250);
        let e6 = free_error(StencilOrder::Sixth, 1, 250);
        assert!(e6 < 0.1 * e2, "{e6} {e2}");
    }

    #[test]
    fn banded_lu_solves_dense_system() {
        let n = 12;
        let mut a = Banded::zeros(n, 2);
        let dense = |i: usize, j: usize| Complex64::new(if i == j { 4.0 } else { 0.3 * (i + 2 * j) as f64 / n as f64 }, 0.1 * (i as f64 - j as f64));
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                a.add(i, j, dense(i, j));
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        a.mul(&x, &mut b);
        let lu = a.factorize().unwrap();
        lu.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn step_guard_and_zero_duration() {
        let (s, _, p) = free_setup(StencilOrder::Sixth, 1);
        let deep = PotentialSpec {
            segments: vec![crate::potential::Segment {
                x_lo: None,
                x_hi: None,
                depth: 1e6,
                kind: crate::potential::SegmentKind::Well,
            }],
            time_dependence: TimeDependence::Static,
        };
        assert!(matches!(step(&s, &deep, p.units), Err(TdseError::StepTooLarge { .. })));
        let out = propagate(&s, &PotentialSpec::free(), p.units, StencilOrder::Sixth, s.t, &[s.t]).unwrap();
        assert_eq!(out[0], s);
    }

    #[test]
    fn wall_keeps_node_and_norm() {
        let p = GaussianPacket::natural(-5.0, 5.0, 0.5).unwrap();
        let grid = Grid1D::for_wall_scattering(&p, 0.0, None, Boundary::Dirichlet).unwrap();
        let s = init_from_packet(&grid, &p).unwrap();
        let snaps = propagate(&s, &PotentialSpec::wall(0.0), p.units, StencilOrder::Sixth, 1.2, &[0.6, 1.2]).unwrap();
        for st in &snaps {
            assert_eq!(*st.psi.last().unwrap(), Complex64::new(0.0, 0.0));
            assert!((st.norm() - 1.0).abs() < 1e-9);
        }
        assert!((snaps[1].t - 1.2).abs() < 1e-12);
    }
}
