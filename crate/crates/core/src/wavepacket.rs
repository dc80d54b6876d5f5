//! Free Gaussian wave packets in one dimension.
//!
//! A packet is fixed by its initial centroid `x0`, mean momentum `p0` and
//! width `sigma0`; everything else (spreading, phase, Bohmian velocity,
//! quantum potential) is a closed-form function of `(x, t)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Reduced Planck constant and particle mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl UnitSystem {
    pub fn new(hbar: f64, mass: f64) -> Result<Self, ParamError> {
        let units = Self { hbar, mass };
        units.validate()?;
        Ok(units)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(ParamError::new("hbar", "must be finite and > 0"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(ParamError::new("mass", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Dynamical regime of a packet or a superposition, judged from `v_p / v_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    CollisionLike,
    DiffractionLike,
    Intermediate,
}

/// Ratio thresholds used by [`classify_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeThresholds {
    pub collision_min_ratio: f64,
    pub diffraction_max_ratio: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            collision_min_ratio: 5.0,
            diffraction_max_ratio: 0.2,
        }
    }
}

pub fn classify_ratio(ratio: f64, thresholds: &RegimeThresholds) -> Regime {
    if ratio >= thresholds.collision_min_ratio {
        Regime::CollisionLike
    } else if ratio <= thresholds.diffraction_max_ratio {
        Regime::DiffractionLike
    } else {
        Regime::Intermediate
    }
}

/// Time-independent energy bookkeeping of a free Gaussian packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDecomposition {
    pub e_total: f64,
    /// Propagation part `p^2 / 2m`.
    pub e_p: f64,
    /// Spreading part `hbar^2 / 8 m sigma0^2`.
    pub e_s: f64,
    pub p_s: f64,
    pub v_p: f64,
    pub v_s: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub x0: f64,
    pub p0: f64,
    pub sigma0: f64,
    #[serde(default)]
    pub units: UnitSystem,
}

impl GaussianPacket {
    pub fn new(x0: f64, p0: f64, sigma0: f64, units: UnitSystem) -> Result<Self, ParamError> {
        let packet = Self {
            x0,
            p0,
            sigma0,
            units,
        };
        packet.validate()?;
        Ok(packet)
    }

    /// Packet in natural units (`hbar = m = 1`).
    pub fn natural(x0: f64, p0: f64, sigma0: f64) -> Result<Self, ParamError> {
        Self::new(x0, p0, sigma0, UnitSystem::default())
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.units.validate()?;
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(ParamError::new("sigma0", "must be finite and > 0"));
        }
        if !self.x0.is_finite() {
            return Err(ParamError::new("x0", "must be finite"));
        }
        if !self.p0.is_finite() {
            return Err(ParamError::new("p0", "must be finite"));
        }
        Ok(())
    }

    pub fn propagation_velocity(&self) -> f64 {
        self.p0 / self.units.mass
    }

    pub fn spreading_velocity(&self) -> f64 {
        self.units.hbar / (2.0 * self.units.mass * self.sigma0)
    }

    /// Spreading timescale `tau = 2 m sigma0^2 / hbar`.
    pub fn tau(&self) -> f64 {
        2.0 * self.units.mass * self.sigma0 * self.sigma0 / self.units.hbar
    }

    pub fn centroid(&self, t: f64) -> f64 {
        self.x0 + self.propagation_velocity() * t
    }

    /// Complex width `sigma0 (1 + i hbar t / 2 m sigma0^2)`.
    pub fn complex_spread(&self, t: f64) -> Complex64 {
        Complex64::new(self.sigma0, self.sigma0 * t / self.tau())
    }

    pub fn spread(&self, t: f64) -> f64 {
        self.sigma0 * (t / self.tau()).hypot(1.0)
    }

    /// Complex log-amplitude `ln psi(x, t)`, plus the log-derivative `psi'/psi`.
    ///
    /// Working in log space keeps far-tail evaluations finite; callers
    /// exponentiate when they need the amplitude itself.
    pub(crate) fn log_amplitude(&self, x: f64, t: f64) -> (Complex64, Complex64) {
        let hbar = self.units.hbar;
        let st = self.complex_spread(t);
        let dx = x - self.centroid(t);
        let energy = self.p0 * self.p0 / (2.0 * self.units.mass);
        // (2 pi st^2)^(-1/4) = (2 pi)^(-1/4) st^(-1/2); arg(st) stays in
        // (-pi/2, pi/2), so the principal root is continuous in t.
        let log_prefactor = -0.25 * (2.0 * PI).ln() - 0.5 * st.ln();
        let gauss = -(dx * dx) / (4.0 * self.sigma0 * st);
        let phase = Complex64::new(0.0, (self.p0 * dx + energy * t) / hbar);
        let log_psi = log_prefactor + gauss + phase;
        let dlog = -dx / (2.0 * self.sigma0 * st) + Complex64::new(0.0, self.p0 / hbar);
        (log_psi, dlog)
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Complex64 {
        self.log_amplitude(x, t).0.exp()
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        let s = self.spread(t);
        let dx = x - self.centroid(t);
        (-dx * dx / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s)
    }

    /// Bohmian velocity `v_p + (x - x_t) v_s^2 t / sigma_t^2`.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let vs = self.spreading_velocity();
        let s = self.spread(t);
        self.propagation_velocity() + (x - self.centroid(t)) * vs * vs * t / (s * s)
    }

    /// Closed-form Bohmian path through `x_start` at `t = 0`.
    pub fn trajectory(&self, x_start: f64, t: f64) -> f64 {
        self.centroid(t) + (x_start - self.x0) * self.spread(t) / self.sigma0
    }

    /// Analytic quantum potential of the free packet.
    pub fn quantum_potential(&self, x: f64, t: f64) -> f64 {
        let s2 = self.spread(t).powi(2);
        let dx = x - self.centroid(t);
        let u = &self.units;
        u.hbar * u.hbar / (4.0 * u.mass * s2) * (1.0 - dx * dx / (2.0 * s2))
    }

    pub fn energy_decomposition(&self) -> EnergyDecomposition {
        let u = &self.units;
        let e_p = self.p0 * self.p0 / (2.0 * u.mass);
        let p_s = u.hbar / (2.0 * self.sigma0);
        let e_s = u.hbar * u.hbar / (8.0 * u.mass * self.sigma0 * self.sigma0);
        EnergyDecomposition {
            e_total: e_p + e_s,
            e_p,
            e_s,
            p_s,
            v_p: self.propagation_velocity(),
            v_s: self.spreading_velocity(),
            tau: self.tau(),
        }
    }

    pub fn velocity_ratio(&self) -> f64 {
        self.propagation_velocity().abs() / self.spreading_velocity()
    }

    pub fn classify_regime(&self, thresholds: &RegimeThresholds) -> Regime {
        classify_ratio(self.velocity_ratio(), thresholds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig2_packet() -> GaussianPacket {
        GaussianPacket::natural(0.0, 10.0, 0.5).unwrap()
    }

    #[test]
    fn complex_spread_values() {
        let p = fig2_packet();
        assert_eq!(p.complex_spread(0.0), Complex64::new(0.5, 0.0));
        let c = p.complex_spread(1.0);
        assert_relative_eq!(c.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.im, 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.complex_spread(-1.0).im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn spread_values_and_asymptote() {
        let p = fig2_packet();
        assert_eq!(p.spread(0.0), 0.5);
        assert_relative_eq!(p.spread(1.0), 0.5 * 5f64.sqrt(), epsilon = 1e-14);
        let t = 1e6 * p.tau();
        let linear = p.units.hbar * t / (2.0 * p.units.mass * p.sigma0);
        assert!((p.spread(t) / linear - 1.0).abs() < 1e-6);
    }

    #[test]
    fn peak_density_and_normalization() {
        let p = GaussianPacket::natural(-1.3, 2.5, 0.7).unwrap();
        for &t in &[0.0, 0.3, 2.0, 11.0] {
            let xt = p.centroid(t);
            let st = p.spread(t);
            let peak = p.evaluate(xt, t).norm_sqr();
            assert_relative_eq!(peak, 1.0 / ((2.0 * PI).sqrt() * st), max_relative = 1e-13);
            let norm = integrate(|x| p.evaluate(x, t).norm_sqr(), xt - 10.0 * st, xt + 10.0 * st, 1e-13);
            assert!((norm - 1.0).abs() < 1e-9, "norm {norm} at t={t}");
        }
    }

    #[test]
    fn initial_phase_is_plane_wave() {
        let p = GaussianPacket::natural(0.4, 3.0, 0.5).unwrap();
        let ref_arg = p.evaluate(p.x0, 0.0).arg();
        for &x in &[0.1, 0.3, 0.5, 0.7] {
            let arg = p.evaluate(x, 0.0).arg() - ref_arg;
            let expected = p.p0 * (x - p.x0);
            let d = (arg - expected).rem_euclid(2.0 * PI);
            assert!(d < 1e-12 || 2.0 * PI - d < 1e-12);
        }
    }

    #[test]
    fn fig2_energies() {
        let e = fig2_packet().energy_decomposition();
        assert_relative_eq!(e.e_p, 50.0);
        assert_relative_eq!(e.e_s, 0.5);
        assert_relative_eq!(e.v_s, 1.0);
        assert_relative_eq!(e.v_p, 10.0);
        let still = GaussianPacket::natural(0.0, 0.0, 0.5).unwrap().energy_decomposition();
        assert_eq!(still.e_total, still.e_s);
    }

    #[test]
    fn regimes() {
        let th = RegimeThresholds::default();
        assert_eq!(fig2_packet().classify_regime(&th), Regime::CollisionLike);
        let slow = GaussianPacket::natural(0.0, 0.1, 0.5).unwrap();
        assert_eq!(slow.classify_regime(&th), Regime::DiffractionLike);
        let equal = GaussianPacket::natural(0.0, 1.0, 0.5).unwrap();
        assert_eq!(equal.classify_regime(&th), Regime::Intermediate);
    }

    #[test]
    fn velocity_special_points() {
        let p = GaussianPacket::natural(-2.0, 4.0, 0.5).unwrap();
        for &t in &[0.0, 0.2, 1.5] {
            assert_relative_eq!(p.velocity(p.centroid(t), t), 4.0, epsilon = 1e-14);
        }
        for &x in &[-5.0, 0.0, 3.0] {
            assert_eq!(p.velocity(x, 0.0), 4.0);
        }
    }

    #[test]
    fn quantum_potential_peak() {
        let p = fig2_packet();
        assert_relative_eq!(p.quantum_potential(p.x0, 0.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn invalid_parameters() {
        assert!(GaussianPacket::natural(0.0, 0.0, -0.5).is_err());
        assert!(GaussianPacket::natural(0.0, 0.0, 0.0).is_err());
        assert!(UnitSystem::new(0.0, 1.0).is_err());
        assert!(GaussianPacket::natural(f64::NAN, 0.0, 1.0).is_err());
    }

    fn packet_strategy() -> impl Strategy<Value = GaussianPacket> {
        (-5.0..5.0f64, -20.0..20.0f64, 0.1..2.0f64, 0.5..2.0f64, 0.5..3.0f64).prop_map(
            |(x0, p0, s0, hbar, mass)| {
                GaussianPacket::new(x0, p0, s0, UnitSystem::new(hbar, mass).unwrap()).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn complex_spread_modulus_is_spread(p in packet_strategy(), t in -50.0..50.0f64) {
            let c = p.complex_spread(t);
            prop_assert!((c.norm() - p.spread(t)).abs() <= 1e-12 * p.spread(t));
        }

        #[test]
        fn spread_identity(p in packet_strategy(), t in -50.0..50.0f64) {
            let s = p.spread(t);
            let lhs = s * s - p.sigma0 * p.sigma0;
            let rhs = (p.spreading_velocity() * t).powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(p.sigma0 * p.sigma0));
            let alt = p.sigma0 * (1.0 + (p.spreading_velocity() * t / p.sigma0).powi(2)).sqrt();
            prop_assert!((alt - s).abs() <= 1e-12 * s);
        }

        #[test]
        fn spread_monotone(p in packet_strategy(), a in 0.0..20.0f64, b in 0.0..20.0f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(p.spread(hi) >= p.spread(lo));
            prop_assert!((p.spread(-hi) - p.spread(hi)).abs() <= 1e-15 * p.spread(hi));
        }

        #[test]
        fn spreading_energy_identity(p in packet_strategy()) {
            let e = p.energy_decomposition();
            prop_assert!((2.0 * p.units.mass * e.e_s - e.p_s * e.p_s).abs() <= 1e-12 * e.p_s * e.p_s);
        }

        #[test]
        fn velocity_matches_log_derivative(p in packet_strategy(), u in -3.0..3.0f64, t in 0.0..5.0f64) {
            // J / rho from finite differences of the amplitude itself.
            let x = p.centroid(t) + u * p.spread(t);
            let h = 1e-5 * p.spread(t);
            let psi = p.evaluate(x, t);
            let d = (p.evaluate(x - 2.0 * h, t) - 8.0 * p.evaluate(x - h, t)
                + 8.0 * p.evaluate(x + h, t) - p.evaluate(x + 2.0 * h, t)) / (12.0 * h);
            let v_fd = p.units.hbar / p.units.mass * (d / psi).im;
            let v = p.velocity(x, t);
            prop_assert!((v - v_fd).abs() <= 1e-8 * (1.0 + v.abs()), "{} vs {}", v, v_fd);
        }
    }
}
