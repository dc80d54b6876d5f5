//! The velocity-field abstraction shared by analytic and grid-backed fields.

use crate::error::FieldError;
use crate::wavepacket::{GaussianPacket, UnitSystem};

/// Absolute density below which a point is treated as a node.
pub const RHO_FLOOR: f64 = 1e-300;

/// Relative finite-difference step (in units of the local width) for `Q`.
pub const QP_STEP: f64 = 1e-4;

/// Read-only evaluator of hydrodynamic fields `rho`, `J`, `v`, `Q`.
///
/// Implementations must be reentrant: ensembles evaluate one field from
/// many threads at once.
pub trait VelocityField: Sync {
    fn units(&self) -> UnitSystem;

    fn density(&self, x: f64, t: f64) -> Result<f64, FieldError>;

    fn current(&self, x: f64, t: f64) -> Result<f64, FieldError>;

    /// Characteristic length at time `t` (used for finite-difference steps).
    fn length_scale(&self, t: f64) -> f64;

    fn velocity(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        let rho = self.density(x, t)?;
        if !(rho >= RHO_FLOOR) {
            return Err(FieldError::NearNode { x, t, rho });
        }
        Ok(self.current(x, t)? / rho)
    }

    /// `Q = -(hbar^2 / 2m) (d^2 sqrt(rho)/dx^2) / sqrt(rho)` by 5-point differences.
    fn quantum_potential(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        let h = self.length_scale(t) * QP_STEP;
        let rho = self.density(x, t)?;
        if !(rho >= RHO_FLOOR) {
            return Err(FieldError::NearNode { x, t, rho });
        }
        let r = |dx: f64| self.density(x + dx, t).map(f64::sqrt);
        let f0 = rho.sqrt();
        let d2 = (-r(-2.0 * h)? + 16.0 * r(-h)? - 30.0 * f0 + 16.0 * r(h)? - r(2.0 * h)?)
            / (12.0 * h * h);
        let u = self.units();
        Ok(-u.hbar * u.hbar / (2.0 * u.mass) * d2 / f0)
    }
}

impl VelocityField for GaussianPacket {
    fn units(&self) -> UnitSystem {
        self.units
    }

    fn density(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Ok(GaussianPacket::density(self, x, t))
    }

    fn current(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Ok(GaussianPacket::density(self, x, t) * GaussianPacket::velocity(self, x, t))
    }

    fn length_scale(&self, t: f64) -> f64 {
        self.spread(t)
    }

    /// The single-packet velocity is linear in `x` and never singular.
    fn velocity(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Ok(GaussianPacket::velocity(self, x, t))
    }

    fn quantum_potential(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Ok(GaussianPacket::quantum_potential(self, x, t))
    }
}

/// Central-difference residual of `d rho/dt + dJ/dx` at one point.
pub fn continuity_residual<F: VelocityField + ?Sized>(
    field: &F,
    x: f64,
    t: f64,
    dt: f64,
    dx: f64,
) -> Result<f64, FieldError> {
    let drho = (field.density(x, t + dt)? - field.density(x, t - dt)?) / (2.0 * dt);
    let dj = (field.current(x + dx, t)? - field.current(x - dx, t)?) / (2.0 * dx);
    Ok(drho + dj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn finite_difference_q_matches_analytic() {
        let p = GaussianPacket::natural(0.3, 2.0, 0.6).unwrap();
        struct Numeric(GaussianPacket);
        impl VelocityField for Numeric {
            fn units(&self) -> UnitSystem {
                self.0.units
            }
            fn density(&self, x: f64, t: f64) -> Result<f64, FieldError> {
                Ok(self.0.density(x, t))
            }
            fn current(&self, x: f64, t: f64) -> Result<f64, FieldError> {
                Ok(self.0.density(x, t) * self.0.velocity(x, t))
            }
            fn length_scale(&self, t: f64) -> f64 {
                self.0.spread(t)
            }
        }
        let n = Numeric(p);
        for &(x, t) in &[(0.3, 0.0), (0.9, 0.5), (-0.4, 1.2)] {
            let a = GaussianPacket::quantum_potential(&p, x, t);
            let b = n.quantum_potential(x, t).unwrap();
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{a} {b}");
            let v = n.velocity(x, t).unwrap();
            assert!((v - p.velocity(x, t)).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn energy_split_at_t0() {
        let p = GaussianPacket::natural(1.0, 3.0, 0.5).unwrap();
        let e = p.energy_decomposition();
        let (a, b) = (p.x0 - 10.0 * p.sigma0, p.x0 + 10.0 * p.sigma0);
        let q = integrate(|x| p.quantum_potential(x, 0.0) * p.density(x, 0.0), a, b, 1e-12);
        let k = integrate(
            |x| {
                let ds = p.units.mass * p.velocity(x, 0.0);
                ds * ds * p.density(x, 0.0) / (2.0 * p.units.mass)
            },
            a,
            b,
            1e-12,
        );
        assert!((q - e.e_s).abs() < 1e-6);
        assert!((k - e.e_p).abs() < 1e-6);
    }

    #[test]
    fn single_packet_continuity() {
        let p = GaussianPacket::natural(-1.0, 1.5, 0.4).unwrap();
        for &(x, t) in &[(-1.0, 0.1), (-0.5, 0.7), (0.2, 1.1)] {
            let r = continuity_residual(&p, x, t, 1e-5, p.spread(t) * 1e-5).unwrap();
            assert!(r.abs() < 1e-6, "{r}");
        }
    }
}
