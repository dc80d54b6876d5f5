//! Coherent superposition `c1 psi1 + c2 psi2` of two free Gaussian packets.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, ParamError, SuperpositionError};
use crate::field::{VelocityField, QP_STEP, RHO_FLOOR};
use crate::wavepacket::{classify_ratio, GaussianPacket, Regime, RegimeThresholds, UnitSystem};

/// Whether boundary formulas reject or merely log violated preconditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superposition {
    pub packet1: GaussianPacket,
    pub packet2: GaussianPacket,
    pub c1: f64,
    pub c2: f64,
    /// When false each component is rescaled to unit peak height at `t = 0`.
    pub normalized_packets: bool,
}

/// Hydrodynamic fields at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub rho: f64,
    pub current: f64,
    pub velocity: f64,
    pub quantum_potential: f64,
    /// `(S2 - S1) / hbar`, continuous in `x` and `t`.
    pub phase_diff: f64,
}

/// Straight line `x(t) = x_bar_0 + v_bar t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLine {
    pub x_bar_0: f64,
    pub v_bar: f64,
}

impl BoundaryLine {
    pub fn at(&self, t: f64) -> f64 {
        self.x_bar_0 + self.v_bar * t
    }
}

/// Splitting of the Bohmian velocity into its cosine and sine parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityParts {
    pub contribution1: f64,
    pub contribution2: f64,
}

impl VelocityParts {
    pub fn total(&self) -> f64 {
        self.contribution1 + self.contribution2
    }
}

/// Probability weights of the unnormalized two-width superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub p1: f64,
    pub p2: f64,
}

/// Parameters of a mirror-symmetric pair: packets at `-x0` and `+x0`,
/// the right one carrying momentum `-p`, both of width `sigma0`.
///
/// In this convention the right centroid sits at `x_t = x0 - v_p t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricParams {
    pub p: f64,
    pub sigma0: f64,
    pub x0: f64,
    #[serde(default)]
    pub units: UnitSystem,
}

impl SymmetricParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.units.validate()?;
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(ParamError::new("sigma0", "must be finite and > 0"));
        }
        if !self.p.is_finite() {
            return Err(ParamError::new("p", "must be finite"));
        }
        if !self.x0.is_finite() {
            return Err(ParamError::new("x0", "must be finite"));
        }
        Ok(())
    }

    pub fn right_packet(&self) -> GaussianPacket {
        GaussianPacket {
            x0: self.x0,
            p0: -self.p,
            sigma0: self.sigma0,
            units: self.units,
        }
    }

    pub fn spread(&self, t: f64) -> f64 {
        self.right_packet().spread(t)
    }

    pub fn tau(&self) -> f64 {
        self.right_packet().tau()
    }

    /// Right centroid `x0 - v_p t`.
    pub fn x_t(&self, t: f64) -> f64 {
        self.x0 - self.p / self.units.mass * t
    }

    /// Fringe wavenumber `f(t)` of the cosine interference term.
    pub fn fringe_wavenumber(&self, t: f64) -> f64 {
        let u = &self.units;
        let s = self.spread(t);
        u.hbar * t / (2.0 * u.mass * self.sigma0 * self.sigma0) * self.x_t(t) / (s * s)
            + 2.0 * self.p / u.hbar
    }

    /// Unnormalized symmetric density (the bracket of the closed form).
    pub fn closed_form_density(&self, x: f64, t: f64) -> f64 {
        let s2 = self.spread(t).powi(2);
        let xt = self.x_t(t);
        (-(x + xt).powi(2) / (2.0 * s2)).exp()
            + (-(x - xt).powi(2) / (2.0 * s2)).exp()
            + 2.0 * (-(x * x + xt * xt) / (2.0 * s2)).exp() * (self.fringe_wavenumber(t) * x).cos()
    }

    /// Factor turning [`Self::closed_form_density`] into the normalized density
    /// of the equal-weight superposition.
    pub fn closed_form_prefactor(&self, t: f64) -> f64 {
        0.5 / ((2.0 * PI).sqrt() * self.spread(t))
    }

    pub fn superposition(&self) -> Result<Superposition, SuperpositionError> {
        self.validate()?;
        let right = self.right_packet();
        let left = GaussianPacket {
            x0: -self.x0,
            p0: self.p,
            ..right
        };
        Superposition::from_alpha(left, right, 1.0)
    }
}

/// Per-component amplitude data, with log-moduli shifted by a common offset.
struct Components {
    /// Signed weight times `exp(Re ln psi - shift)`.
    r: [f64; 2],
    /// `Re(psi'/psi)` and `Im(psi'/psi)`.
    dr: [f64; 2],
    ds: [f64; 2],
    phase: [f64; 2],
    shift: f64,
}

impl Components {
    fn phi(&self) -> f64 {
        self.phase[1] - self.phase[0]
    }

    /// Density in shifted units (multiply by `exp(2 shift)` for the absolute value).
    fn scaled_density(&self) -> f64 {
        let [r1, r2] = self.r;
        r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * self.phi().cos()
    }

    /// Current numerators (cosine part, sine part) in shifted units, times `m / hbar`.
    fn scaled_current_parts(&self) -> (f64, f64) {
        let [r1, r2] = self.r;
        let phi = self.phi();
        let cross = r1 * r2;
        let cos_part =
            r1 * r1 * self.ds[0] + r2 * r2 * self.ds[1] + cross * phi.cos() * (self.ds[0] + self.ds[1]);
        let sin_part = cross * phi.sin() * (self.dr[1] - self.dr[0]);
        (cos_part, sin_part)
    }
}

impl Superposition {
    pub fn new(
        packet1: GaussianPacket,
        packet2: GaussianPacket,
        c1: f64,
        c2: f64,
        normalized_packets: bool,
    ) -> Result<Self, SuperpositionError> {
        let sup = Self {
            packet1,
            packet2,
            c1,
            c2,
            normalized_packets,
        };
        sup.validate()?;
        Ok(sup)
    }

    /// Normalized superposition with `alpha = (c2/c1)^2` and `c1^2 + c2^2 = 1`.
    pub fn from_alpha(
        packet1: GaussianPacket,
        packet2: GaussianPacket,
        alpha: f64,
    ) -> Result<Self, SuperpositionError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(ParamError::new("alpha", "must be finite and >= 0").into());
        }
        let c1 = 1.0 / (1.0 + alpha).sqrt();
        Self::new(packet1, packet2, c1, alpha.sqrt() * c1, true)
    }

    pub fn validate(&self) -> Result<(), SuperpositionError> {
        self.packet1.validate()?;
        self.packet2.validate()?;
        if self.packet1.units != self.packet2.units {
            return Err(ParamError::new("units", "both packets must share one unit system").into());
        }
        if !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(ParamError::new("c1/c2", "weights must be finite").into());
        }
        if self.c1 == 0.0 && self.c2 == 0.0 {
            return Err(ParamError::new("c1/c2", "at least one weight must be nonzero").into());
        }
        Ok(())
    }

    pub fn units(&self) -> UnitSystem {
        self.packet1.units
    }

    pub fn alpha(&self) -> f64 {
        (self.c2 / self.c1).powi(2)
    }

    pub fn packets(&self) -> [&GaussianPacket; 2] {
        [&self.packet1, &self.packet2]
    }

    /// Log-scale applied to component `i` on top of its normalized amplitude.
    fn log_scale(&self, i: usize) -> f64 {
        if self.normalized_packets {
            0.0
        } else {
            let s = self.packets()[i].sigma0;
            0.25 * (2.0 * PI).ln() + 0.5 * s.ln()
        }
    }

    /// Amplitude of component `i` (including its weight).
    pub fn component(&self, i: usize, x: f64, t: f64) -> Complex64 {
        let c = [self.c1, self.c2][i];
        let (l, _) = self.packets()[i].log_amplitude(x, t);
        c * (l + self.log_scale(i)).exp()
    }

    /// Direct complex sum `c1 psi1 + c2 psi2`.
    pub fn evaluate(&self, x: f64, t: f64) -> Complex64 {
        self.component(0, x, t) + self.component(1, x, t)
    }

    fn components(&self, x: f64, t: f64) -> Components {
        let weights = [self.c1, self.c2];
        let mut logs = [0.0; 2];
        let mut dr = [0.0; 2];
        let mut ds = [0.0; 2];
        let mut phase = [0.0; 2];
        for (i, packet) in self.packets().iter().enumerate() {
            let (l, d) = packet.log_amplitude(x, t);
            logs[i] = l.re + self.log_scale(i);
            phase[i] = l.im;
            dr[i] = d.re;
            ds[i] = d.im;
        }
        let shift = (0..2)
            .filter(|&i| weights[i] != 0.0)
            .map(|i| logs[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let r = [0, 1].map(|i| {
            if weights[i] == 0.0 {
                0.0
            } else {
                weights[i] * (logs[i] - shift).exp()
            }
        });
        Components {
            r,
            dr,
            ds,
            phase,
            shift,
        }
    }

    /// Density from the polar form `rho1 + rho2 + 2 sqrt(rho1 rho2) cos(phi)`.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        let c = self.components(x, t);
        (c.scaled_density().max(0.0).ln() + 2.0 * c.shift).exp()
    }

    /// Density as `|c1 psi1 + c2 psi2|^2`.
    pub fn density_direct(&self, x: f64, t: f64) -> f64 {
        self.evaluate(x, t).norm_sqr()
    }

    pub fn current(&self, x: f64, t: f64) -> f64 {
        let c = self.components(x, t);
        let (a, b) = c.scaled_current_parts();
        let u = self.units();
        u.hbar / u.mass * (a + b) * (2.0 * c.shift).exp()
    }

    /// Unwrapped phase difference `(S2 - S1) / hbar`.
    pub fn phase_diff(&self, x: f64, t: f64) -> f64 {
        self.components(x, t).phi()
    }

    pub fn velocity_parts(&self, x: f64, t: f64) -> Result<VelocityParts, FieldError> {
        let c = self.components(x, t);
        let rho_s = c.scaled_density();
        let rho = (rho_s.max(0.0).ln() + 2.0 * c.shift).exp();
        if !(rho >= RHO_FLOOR) {
            return Err(FieldError::NearNode { x, t, rho });
        }
        let (a, b) = c.scaled_current_parts();
        let u = self.units();
        let k = u.hbar / u.mass / rho_s;
        Ok(VelocityParts {
            contribution1: k * a,
            contribution2: k * b,
        })
    }

    pub fn velocity(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        self.velocity_parts(x, t).map(|p| p.total())
    }

    /// Smallest component width at time `t`.
    pub fn min_spread(&self, t: f64) -> f64 {
        self.packet1.spread(t).min(self.packet2.spread(t))
    }

    /// Quantum potential by 5-point differences of `sqrt(rho)` with
    /// `h = sigma_t * 1e-4`; evaluated in shifted units so tails stay finite.
    pub fn quantum_potential(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        let center = self.components(x, t);
        let rho0 = center.scaled_density();
        let rho = (rho0.max(0.0).ln() + 2.0 * center.shift).exp();
        if !(rho >= RHO_FLOOR) {
            return Err(FieldError::NearNode { x, t, rho });
        }
        let h = self.min_spread(t) * QP_STEP;
        let amp = |dx: f64| {
            let c = self.components(x + dx, t);
            let s = c.scaled_density().max(0.0) * (2.0 * (c.shift - center.shift)).exp();
            s.sqrt()
        };
        let f0 = rho0.sqrt();
        let d2 = (-amp(-2.0 * h) + 16.0 * amp(-h) - 30.0 * f0 + 16.0 * amp(h) - amp(2.0 * h))
            / (12.0 * h * h);
        let u = self.units();
        Ok(-u.hbar * u.hbar / (2.0 * u.mass) * d2 / f0)
    }

    pub fn sample(&self, x: f64, t: f64) -> Result<FieldSample, FieldError> {
        let parts = self.velocity_parts(x, t)?;
        Ok(FieldSample {
            rho: self.density(x, t),
            current: self.current(x, t),
            velocity: parts.total(),
            quantum_potential: self.quantum_potential(x, t)?,
            phase_diff: self.phase_diff(x, t),
        })
    }

    /// `Q` sampled on a line; ill-defined points (nodes) become NaN.
    pub fn quantum_potential_profile(&self, xs: &[f64], t: f64) -> Vec<f64> {
        xs.iter()
            .map(|&x| self.quantum_potential(x, t).unwrap_or(f64::NAN))
            .collect()
    }

    fn check(&self, strictness: Strictness, ok: bool, what: &str) -> Result<(), SuperpositionError> {
        if ok {
            return Ok(());
        }
        match strictness {
            Strictness::Strict => Err(SuperpositionError::Precondition(what.to_string())),
            Strictness::Lenient => {
                log::warn!("boundary formula applied outside its stated regime: {what}");
                Ok(())
            }
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
    }

    /// Boundary for equal widths and unequal speeds.
    pub fn boundary_case_a(&self, strictness: Strictness) -> Result<BoundaryLine, SuperpositionError> {
        let (a, b) = (&self.packet1, &self.packet2);
        self.check(strictness, Self::close(a.sigma0, b.sigma0), "widths must be equal")?;
        self.check(strictness, self.normalized_packets, "packets must be normalized")?;
        self.check(strictness, Self::close(self.alpha(), 1.0), "alpha must be 1")?;
        Ok(BoundaryLine {
            x_bar_0: 0.5 * (a.x0 + b.x0),
            v_bar: (a.p0 + b.p0) / (2.0 * self.units().mass),
        })
    }

    /// Boundary for equal speeds and unequal widths (inverse-width weighting).
    pub fn boundary_case_b(&self, strictness: Strictness) -> Result<BoundaryLine, SuperpositionError> {
        let (a, b) = (&self.packet1, &self.packet2);
        self.check(strictness, Self::close(a.p0.abs(), b.p0.abs()), "|p01| must equal |p02|")?;
        self.check(strictness, self.normalized_packets, "packets must be normalized")?;
        self.check(strictness, Self::close(self.alpha(), 1.0), "alpha must be 1")?;
        let (w1, w2) = (1.0 / a.sigma0, 1.0 / b.sigma0);
        Ok(BoundaryLine {
            x_bar_0: (w1 * a.x0 + w2 * b.x0) / (w1 + w2),
            v_bar: (w1 * a.propagation_velocity() + w2 * b.propagation_velocity()) / (w1 + w2),
        })
    }

    pub fn weights(&self, strictness: Strictness) -> Result<Weights, SuperpositionError> {
        self.check(strictness, !self.normalized_packets, "packets must be unnormalized")?;
        let (s1, s2) = (self.packet1.sigma0, self.packet2.sigma0);
        Ok(Weights {
            p1: s1 / (s1 + s2),
            p2: s2 / (s1 + s2),
        })
    }

    /// Width-weighted mean momentum `P1 p01 + P2 p02` of the unnormalized pair.
    pub fn unnormalized_momentum_expectation(&self, strictness: Strictness) -> Result<f64, SuperpositionError> {
        let w = self.weights(strictness)?;
        Ok(w.p1 * self.packet1.p0 + w.p2 * self.packet2.p0)
    }

    /// Time at which the two centroids coincide.
    pub fn max_interference_time(&self) -> Result<f64, SuperpositionError> {
        let (a, b) = (&self.packet1, &self.packet2);
        let dv = a.propagation_velocity() - b.propagation_velocity();
        if dv == 0.0 {
            return Err(SuperpositionError::ParallelCentroids);
        }
        Ok((b.x0 - a.x0) / dv)
    }

    /// Half the relative speed of the two centroids.
    pub fn relative_half_velocity(&self) -> f64 {
        0.5 * (self.packet1.propagation_velocity() - self.packet2.propagation_velocity()).abs()
    }

    /// Collision fringe spacing `pi hbar / (m v_p)`.
    pub fn fringe_spacing_collision(&self) -> f64 {
        let u = self.units();
        PI * u.hbar / (u.mass * self.relative_half_velocity())
    }

    /// Half the initial centroid separation.
    pub fn half_separation(&self) -> f64 {
        0.5 * (self.packet2.x0 - self.packet1.x0).abs()
    }

    /// Asymptotic slope of the `n`-th Fraunhofer bunch, `2 pi n sigma0 v_s / x0`.
    pub fn fraunhofer_slope(&self, n: i32) -> f64 {
        let p = &self.packet1;
        2.0 * PI * n as f64 * p.sigma0 * p.spreading_velocity() / self.half_separation()
    }

    pub fn velocity_ratio(&self) -> f64 {
        let vs = 0.5 * (self.packet1.spreading_velocity() + self.packet2.spreading_velocity());
        self.relative_half_velocity() / vs
    }

    pub fn classify_regime(&self, thresholds: &RegimeThresholds) -> Regime {
        classify_ratio(self.velocity_ratio(), thresholds)
    }

    /// Mirror-symmetric parameters, if the pair is an equal-weight mirror image.
    pub fn symmetric_params(&self) -> Result<SymmetricParams, SuperpositionError> {
        let (a, b) = (&self.packet1, &self.packet2);
        let symmetric = Self::close(a.sigma0, b.sigma0)
            && (a.x0 + b.x0).abs() <= 1e-12 * (1.0 + a.x0.abs())
            && (a.p0 + b.p0).abs() <= 1e-12 * (1.0 + a.p0.abs())
            && Self::close(self.c1.abs(), self.c2.abs())
            && self.c1 * self.c2 > 0.0;
        if !symmetric {
            return Err(SuperpositionError::Precondition(
                "superposition is not a mirror-symmetric equal-weight pair".into(),
            ));
        }
        let right = if b.x0 >= a.x0 { b } else { a };
        Ok(SymmetricParams {
            p: -right.p0,
            sigma0: right.sigma0,
            x0: right.x0,
            units: right.units,
        })
    }

    /// Closed-form symmetric density, scaled to this superposition's norm.
    pub fn closed_form_symmetric_density(&self, x: f64, t: f64) -> Result<f64, SuperpositionError> {
        let sp = self.symmetric_params()?;
        let scale = if self.normalized_packets {
            2.0 * self.c1 * self.c1 * sp.closed_form_prefactor(t)
        } else {
            self.c1 * self.c1 * sp.sigma0 / sp.spread(t)
        };
        Ok(scale * sp.closed_form_density(x, t))
    }

    /// `integral rho1 rho2 dx` of the normalized components at `t = 0`.
    pub fn initial_overlap(&self) -> f64 {
        let (a, b) = (&self.packet1, &self.packet2);
        let var = a.sigma0.powi(2) + b.sigma0.powi(2);
        let d = a.x0 - b.x0;
        (-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }
}

impl VelocityField for Superposition {
    fn units(&self) -> UnitSystem {
        Superposition::units(self)
    }

    fn density(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Ok(Superposition::density(self, x, t))
    }

    fn current(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Ok(Superposition::current(self, x, t))
    }

    fn length_scale(&self, t: f64) -> f64 {
        self.min_spread(t)
    }

    fn velocity(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Superposition::velocity(self, x, t)
    }

    fn quantum_potential(&self, x: f64, t: f64) -> Result<f64, FieldError> {
        Superposition::quantum_potential(self, x, t)
    }
}
