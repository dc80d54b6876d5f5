use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ParamError, TdseError};
use crate::wavepacket::GaussianPacket;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Boundary {
    /// `psi = 0` at both ends.
    Dirichlet,
    /// Quadratic complex absorbing potential of the given width and strength
    /// next to the left end (and the right end unless a hard wall closes it).
    AbsorbingLayer { width: f64, strength: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_points: usize,
    pub dt: f64,
    pub boundary: Boundary,
}

impl Grid1D {
    pub fn new(x_lo: f64, x_hi: f64, n_points: usize, dt: f64, boundary: Boundary) -> Result<Self, ParamError> {
        let g = Self {
            x_lo,
            x_hi,
            n_points,
            dt,
            boundary,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid ending at `x_hi` with spacing at most `dx_target`, chosen so that
    /// `align` (if given) is an integer number of cells.
    pub fn aligned(
        x_lo_target: f64,
        x_hi: f64,
        dx_target: f64,
        align: Option<f64>,
        dt: f64,
        boundary: Boundary,
    ) -> Result<Self, ParamError> {
        let dx = match align {
            Some(a) if a > 0.0 => a / (a / dx_target).ceil(),
            _ => dx_target,
        };
        let cells = ((x_hi - x_lo_target) / dx).ceil() as usize;
        Self::new(x_hi - cells as f64 * dx, x_hi, cells + 1, dt, boundary)
    }

    /// Default grid for a packet heading to a wall at `x_wall`: `dx = sigma0/40`,
    /// `dt = 2e-4 tau`, left edge `10 sigma0 max(1, v_s/v_p)` behind the centroid.
    pub fn for_wall_scattering(
        packet: &GaussianPacket,
        x_wall: f64,
        align: Option<f64>,
        boundary: Boundary,
    ) -> Result<Self, ParamError> {
        let vp = packet.propagation_velocity().abs();
        let scale = if vp > 0.0 { (packet.spreading_velocity() / vp).max(1.0) } else { 10.0 };
        let x_lo = packet.x0 - 10.0 * packet.sigma0 * scale;
        Self::aligned(x_lo, x_wall, packet.sigma0 / 40.0, align, 2e-4 * packet.tau(), boundary)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.x_lo < self.x_hi) || !self.x_lo.is_finite() || !self.x_hi.is_finite() {
            return Err(ParamError::new("grid.x_lo", "must be finite and < x_hi"));
        }
        if self.n_points < 16 {
            return Err(ParamError::new("grid.n_points", "must be >= 16"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ParamError::new("grid.dt", "must be finite and > 0"));
        }
        if let Boundary::AbsorbingLayer { width, strength } = self.boundary {
            if !(width > 0.0 && width < self.x_hi - self.x_lo) {
                return Err(ParamError::new("grid.boundary.width", "must be > 0 and smaller than the domain"));
            }
            if !(strength >= 0.0 && strength.is_finite()) {
                return Err(ParamError::new("grid.boundary.strength", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n_points - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.n_points {
            self.x_hi
        } else {
            self.x_lo + j as f64 * self.dx()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Region where trajectories are meaningful (outside absorbing layers).
    pub fn physical_domain(&self, right_closed: bool) -> (f64, f64) {
        match self.boundary {
            Boundary::Dirichlet => (self.x_lo, self.x_hi),
            Boundary::AbsorbingLayer { width, .. } => {
                let hi = if right_closed { self.x_hi } else { self.x_hi - width };
                (self.x_lo + width, hi)
            }
        }
    }

    /// Absorbing strength `W(x) >= 0` (zero for Dirichlet grids).
    pub fn absorption(&self, x: f64, right_closed: bool) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => 0.0,
            Boundary::AbsorbingLayer { width, strength } => {
                let left = (self.x_lo + width - x).max(0.0);
                let right = if right_closed { 0.0 } else { (x - (self.x_hi - width)).max(0.0) };
                let d = left.max(right) / width;
                strength * d * d
            }
        }
    }
}

/// Wave function samples on a grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub grid: Grid1D,
    pub t: f64,
    pub psi: Vec<Complex64>,
}

impl GridState {
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Discrete L2 distance to `f` sampled on the same grid.
    pub fn l2_error<F: Fn(f64) -> Complex64>(&self, f: F) -> f64 {
        let dx = self.grid.dx();
        (self
            .psi
            .iter()
            .enumerate()
            .map(|(j, z)| (z - f(self.grid.x(j))).norm_sqr())
            .sum::<f64>()
            * dx)
            .sqrt()
    }
}

/// Largest `|psi|` tolerated at a grid edge by [`init_from_packet`].
pub const EDGE_AMPLITUDE_TOL: f64 = 1e-10;

/// Samples `packet` at `t = 0` on `grid`, normalized to unit discrete norm.
pub fn init_from_packet(grid: &Grid1D, packet: &GaussianPacket) -> Result<GridState, TdseError> {
    init_from_packet_with_tolerance(grid, packet, EDGE_AMPLITUDE_TOL)
}

/// As [`init_from_packet`] with a caller-chosen edge amplitude tolerance.
/// The packet must still sit at least `5 sigma0` from both edges.
pub fn init_from_packet_with_tolerance(
    grid: &Grid1D,
    packet: &GaussianPacket,
    edge_tol: f64,
) -> Result<GridState, TdseError> {
    grid.validate()?;
    packet.validate()?;
    let margin = 5.0 * packet.sigma0;
    for &edge in &[grid.x_lo, grid.x_hi] {
        let amplitude = packet.evaluate(edge, 0.0).norm();
        if (packet.x0 - edge).abs() < margin || !(amplitude < edge_tol) {
            return Err(TdseError::PacketTouchesBoundary { x: edge, amplitude });
        }
    }
    let mut psi: Vec<Complex64> = (0..grid.n_points).map(|j| packet.evaluate(grid.x(j), 0.0)).collect();
    psi[0] = Complex64::new(0.0, 0.0);
    psi[grid.n_points - 1] = Complex64::new(0.0, 0.0);
    let mut state = GridState {
        grid: *grid,
        t: 0.0,
        psi,
    };
    let k = 1.0 / state.norm().sqrt();
    state.psi.iter_mut().for_each(|z| *z *= k);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_tolerance_variant() {
        let p = GaussianPacket::natural(4.0, 1.0, 1.0).unwrap();
        let g = grid();
        assert!(matches!(init_from_packet(&g, &p), Err(TdseError::PacketTouchesBoundary { .. })));
        let s = init_from_packet_with_tolerance(&g, &p, 1e-3).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(init_from_packet_with_tolerance(&g, &GaussianPacket::natural(6.0, 1.0, 1.0).unwrap(), 1.0).is_err());
    }

    fn grid() -> Grid1D {
        Grid1D::new(-10.0, 10.0, 801, 1e-3, Boundary::Dirichlet).unwrap()
    }

    #[test]
    fn initial_state_norm_and_peak() {
        let p = GaussianPacket::natural(0.013, 2.0, 0.5).unwrap();
        let s = init_from_packet(&grid(), &p).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        let (jmax, _) = s
            .psi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(jmax, ((p.x0 - s.grid.x_lo) / s.grid.dx()).round() as usize);
        let err: f64 = (0..s.grid.n_points)
            .map(|j| (s.psi[j].norm_sqr() - p.density(s.grid.x(j), 0.0)).powi(2))
            .sum::<f64>()
            * s.grid.dx();
        assert!(err.sqrt() < 1e-6);
    }

    #[test]
    fn packet_near_edge_is_rejected() {
        let p = GaussianPacket::natural(8.0, 0.0, 0.5).unwrap();
        assert!(matches!(
            init_from_packet(&grid(), &p),
            Err(TdseError::PacketTouchesBoundary { .. })
        ));
    }

    #[test]
    fn aligned_grid_hits_edges() {
        let w = std::f64::consts::PI / 20.0;
        let g = Grid1D::aligned(-8.0, 0.0, 0.0125, Some(w), 1e-4, Boundary::Dirichlet).unwrap();
        let k = w / g.dx();
        assert!((k - k.round()).abs() < 1e-9);
        assert!(g.x_lo <= -8.0 && g.x_hi == 0.0);
        assert!(g.dx() <= 0.0125);
    }

    #[test]
    fn validation() {
        assert!(Grid1D::new(1.0, 0.0, 100, 1e-3, Boundary::Dirichlet).is_err());
        assert!(Grid1D::new(0.0, 1.0, 8, 1e-3, Boundary::Dirichlet).is_err());
        assert!(Grid1D::new(0.0, 1.0, 100, 0.0, Boundary::Dirichlet).is_err());
    }
}
