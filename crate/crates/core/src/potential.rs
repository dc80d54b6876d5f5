//! Static and time-dependent wall/well potentials standing in for one packet
//! of a symmetric pair.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ParamError, PotentialError};
use crate::io::format_f64;
use crate::superposition::SymmetricParams;
use crate::wavepacket::UnitSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Free,
    Well,
    HardWall,
}

/// One interval of a piecewise potential; `None` bounds are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    /// Well depth magnitude (applied as `-depth`); ignored for other kinds.
    #[serde(default)]
    pub depth: f64,
    pub kind: SegmentKind,
}

impl Segment {
    fn lo(&self) -> f64 {
        self.x_lo.unwrap_or(f64::NEG_INFINITY)
    }

    fn hi(&self) -> f64 {
        self.x_hi.unwrap_or(f64::INFINITY)
    }

    fn value(&self) -> f64 {
        match self.kind {
            SegmentKind::Free => 0.0,
            SegmentKind::Well => -self.depth,
            SegmentKind::HardWall => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TimeDependence {
    Static,
    /// Well on `[-x_min(t), 0]` with depth `2 n hbar^2 / (m x_min(t)^2)`.
    DynamicWell { params: SymmetricParams, n: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub segments: Vec<Segment>,
    pub time_dependence: TimeDependence,
}

impl PotentialSpec {
    pub fn free() -> Self {
        Self {
            segments: vec![Segment {
                x_lo: None,
                x_hi: None,
                depth: 0.0,
                kind: SegmentKind::Free,
            }],
            time_dependence: TimeDependence::Static,
        }
    }

    /// Free space to the left of an impenetrable wall at `x_wall`.
    pub fn wall(x_wall: f64) -> Self {
        Self {
            segments: vec![
                Segment {
                    x_lo: None,
                    x_hi: Some(x_wall),
                    depth: 0.0,
                    kind: SegmentKind::Free,
                },
                Segment {
                    x_lo: Some(x_wall),
                    x_hi: None,
                    depth: 0.0,
                    kind: SegmentKind::HardWall,
                },
            ],
            time_dependence: TimeDependence::Static,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.segments.is_empty() {
            return Err(ParamError::new("potential.segments", "at least one segment is required"));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.lo() < s.hi()) {
                return Err(ParamError::new(format!("potential.segments[{i}]"), "x_lo must be < x_hi"));
            }
            if !(s.depth >= 0.0 && s.depth.is_finite()) {
                return Err(ParamError::new(format!("potential.segments[{i}].depth"), "must be finite and >= 0"));
            }
            if i > 0 && self.segments[i - 1].hi() > s.lo() {
                return Err(ParamError::new("potential.segments", "segments must be ordered and non-overlapping"));
            }
        }
        if let TimeDependence::DynamicWell { params, n } = &self.time_dependence {
            params.validate()?;
            if !(*n > 0.0 && n.is_finite()) {
                return Err(ParamError::new("potential.n", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Segments in force at time `t`.
    pub fn segments_at(&self, t: f64) -> Vec<Segment> {
        match &self.time_dependence {
            TimeDependence::Static => self.segments.clone(),
            TimeDependence::DynamicWell { params, n } => {
                let xm = xmin_of_t(params, t);
                wall_well_segments(xm, well_depth(xm, params.units, *n))
            }
        }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.segments_at(t)
            .iter()
            .find(|s| x >= s.lo() && x < s.hi())
            .map_or(0.0, Segment::value)
    }

    /// Left edge of the first hard-wall segment.
    pub fn wall_position(&self) -> Option<f64> {
        let segs = self.segments_at(0.0);
        segs.iter().find(|s| s.kind == SegmentKind::HardWall).map(Segment::lo)
    }

    /// Samples `V` on the grid `x_lo + j dx`; well edges snap to the nearest
    /// grid point and hard-wall points become `+inf`.
    pub fn sample_grid(&self, x_lo: f64, dx: f64, n: usize, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        let index = |x: f64| -> isize {
            if x == f64::NEG_INFINITY {
                isize::MIN / 2
            } else if x == f64::INFINITY {
                isize::MAX / 2
            } else {
                ((x - x_lo) / dx).round() as isize
            }
        };
        for s in self.segments_at(t) {
            let (a, b) = (index(s.lo()), index(s.hi()));
            let hi_inclusive = s.kind != SegmentKind::Free && s.x_hi.is_some();
            for (j, vj) in v.iter_mut().enumerate() {
                let j = j as isize;
                let inside = j >= a && (j < b || (hi_inclusive && j == b));
                if inside && s.kind != SegmentKind::Free {
                    *vj = s.value();
                }
            }
        }
        v
    }

    /// Tabulated `(x, V)` at time `t` as CSV.
    pub fn to_csv(&self, xs: &[f64], t: f64) -> String {
        let mut s = String::from("x,V\n");
        for &x in xs {
            s.push_str(&format!("{},{}\n", format_f64(x), format_f64(self.value(x, t))));
        }
        s
    }
}

fn wall_well_segments(width: f64, depth: f64) -> Vec<Segment> {
    vec![
        Segment {
            x_lo: None,
            x_hi: Some(-width),
            depth: 0.0,
            kind: SegmentKind::Free,
        },
        Segment {
            x_lo: Some(-width),
            x_hi: Some(0.0),
            depth,
            kind: SegmentKind::Well,
        },
        Segment {
            x_lo: Some(0.0),
            x_hi: None,
            depth: 0.0,
            kind: SegmentKind::HardWall,
        },
    ]
}

/// Depth `2 n hbar^2 / (m width^2)` of a well of the given width (`a = width/2`).
pub fn well_depth(width: f64, units: UnitSystem, n: f64) -> f64 {
    2.0 * n * units.hbar * units.hbar / (units.mass * width * width)
}

/// Static well width `pi hbar / 2p`.
pub fn static_well_width(p: f64, units: UnitSystem) -> f64 {
    PI * units.hbar / (2.0 * p)
}

/// Wall at `x = 0` with a well of width `pi hbar/2p` and depth `16 p^2 / (2 m pi^2)`.
pub fn static_wall_well(p: f64, units: UnitSystem) -> Result<PotentialSpec, PotentialError> {
    static_wall_well_n(p, units, 1.0)
}

pub fn static_wall_well_n(p: f64, units: UnitSystem, n: f64) -> Result<PotentialSpec, PotentialError> {
    units.validate()?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(PotentialError::NonpositiveMomentum(p));
    }
    let w = static_well_width(p, units);
    Ok(PotentialSpec {
        segments: wall_well_segments(w, well_depth(w, units, n)),
        time_dependence: TimeDependence::Static,
    })
}

/// First fringe minimum `pi sigma_t^2 / (2 p sigma0^2 / hbar + (hbar t / 2 m sigma0^2) x0)`.
pub fn xmin_of_t(sp: &SymmetricParams, t: f64) -> f64 {
    let u = &sp.units;
    let s0 = sp.sigma0;
    let den = 2.0 * sp.p * s0 * s0 / u.hbar + u.hbar * t / (2.0 * u.mass * s0 * s0) * sp.x0;
    PI * sp.spread(t).powi(2) / den
}

/// The same minimum written as `pi / f(t)`.
pub fn xmin_of_t_from_wavenumber(sp: &SymmetricParams, t: f64) -> f64 {
    PI / sp.fringe_wavenumber(t)
}

/// Time of the smallest first-fringe distance.
pub fn tmin(sp: &SymmetricParams) -> f64 {
    let u = &sp.units;
    let ps = u.hbar / (2.0 * sp.sigma0);
    let q = ps * sp.x0 / sp.sigma0;
    // -p + sqrt(p^2 + q^2), rewritten to avoid cancellation for large p.
    let root = if sp.p > 0.0 {
        q * q / (sp.p + sp.p.hypot(q))
    } else {
        -sp.p + sp.p.hypot(q)
    };
    4.0 * u.mass * sp.sigma0.powi(4) / (u.hbar * u.hbar * sp.x0) * root
}

/// Closed-form density bracket at the first minimum,
/// `4 exp(-(x_min^2 + x_t^2) / 2 sigma_t^2) sinh^2(x_min x_t / 2 sigma_t^2)`.
pub fn density_at_min(sp: &SymmetricParams, t: f64) -> f64 {
    let s2 = sp.spread(t).powi(2);
    let xm = xmin_of_t(sp, t);
    let xt = sp.x_t(t);
    4.0 * (-(xm * xm + xt * xt) / (2.0 * s2)).exp() * (xm * xt / (2.0 * s2)).sinh().powi(2)
}

/// Time-dependent wall plus moving-edge well.
pub fn dynamic_potential(sp: &SymmetricParams) -> Result<PotentialSpec, PotentialError> {
    dynamic_potential_n(sp, 1.0)
}

pub fn dynamic_potential_n(sp: &SymmetricParams, n: f64) -> Result<PotentialSpec, PotentialError> {
    sp.validate()?;
    let xm = xmin_of_t(sp, 0.0);
    let spec = PotentialSpec {
        segments: wall_well_segments(xm, well_depth(xm, sp.units, n)),
        time_dependence: TimeDependence::DynamicWell { params: *sp, n },
    };
    spec.validate()?;
    Ok(spec)
}

/// `(t, x_min, V0)` samples of the moving well.
pub fn xmin_curve(sp: &SymmetricParams, times: &[f64]) -> Vec<(f64, f64, f64)> {
    times
        .iter()
        .map(|&t| {
            let xm = xmin_of_t(sp, t);
            (t, xm, well_depth(xm, sp.units, 1.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::golden_min;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sp(p: f64, sigma0: f64, x0: f64) -> SymmetricParams {
        SymmetricParams {
            p,
            sigma0,
            x0,
            units: UnitSystem::default(),
        }
    }

    #[test]
    fn static_well_values() {
        let u = UnitSystem::default();
        let v = static_wall_well(10.0, u).unwrap();
        let well = v.segments[1];
        assert_relative_eq!(-well.x_lo.unwrap(), PI / 20.0, epsilon = 1e-15);
        assert_relative_eq!(well.depth, 16.0 * 100.0 / (2.0 * PI * PI), max_relative = 1e-14);
        assert!((well.depth - 81.057).abs() < 1e-3);
        let a = -well.x_lo.unwrap() / 2.0;
        assert_relative_eq!(well.depth * a * a, 0.5, max_relative = 1e-14);
        let v2 = static_wall_well(20.0, u).unwrap();
        assert_relative_eq!(v2.segments[1].depth, 4.0 * well.depth, max_relative = 1e-14);
        assert_relative_eq!(v2.segments[1].x_lo.unwrap(), 0.5 * well.x_lo.unwrap(), max_relative = 1e-14);
        assert!(matches!(static_wall_well(0.0, u), Err(PotentialError::NonpositiveMomentum(_))));
        assert_eq!(v.value(0.5, 0.0), f64::INFINITY);
        assert_eq!(v.value(-0.1, 0.0), -well.depth);
        assert_eq!(v.value(-1.0, 0.0), 0.0);
        assert_eq!(v.wall_position(), Some(0.0));
    }

    #[test]
    fn xmin_values() {
        assert_relative_eq!(xmin_of_t(&sp(10.0, 0.5, 3.0), 0.0), PI / 20.0, max_relative = 1e-15);
        assert_relative_eq!(xmin_of_t(&sp(3.0, 2.7, 8.0), 0.0), PI / 6.0, max_relative = 1e-15);
        let slow = sp(0.0, 0.5, 5.0);
        let t = 1e4 * slow.tau();
        assert!(((xmin_of_t(&slow, t) / t) / (PI / (2.0 * 5.0)) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tmin_limits() {
        let s = sp(1e-9, 0.5, 5.0);
        assert_relative_eq!(tmin(&s) / s.tau(), 1.0, max_relative = 1e-3);
        let q = 0.5 / 0.5 * 5.0 / 0.5;
        let big = sp(100.0 * q, 0.5, 5.0);
        assert!((tmin(&big) / (5.0 / (2.0 * big.p)) - 1.0).abs() < 0.01);
        let s = sp(2.0, 0.5, 5.0);
        let arg = golden_min(|t| xmin_of_t(&s, t), 0.0, 5.0, 1e-13);
        assert_relative_eq!(arg, tmin(&s), max_relative = 1e-6);
    }

    #[test]
    fn density_at_min_matches_closed_form() {
        let s = sp(1.0, 0.5, 5.0);
        for i in 0..50 {
            let t = 0.1 * i as f64;
            let direct = s.closed_form_density(xmin_of_t(&s, t), t);
            let formula = density_at_min(&s, t);
            assert!((direct - formula).abs() <= 1e-10 * formula.max(1e-300) + 1e-300, "t={t}");
        }
        let far = sp(20.0, 0.5, 10.0);
        let t = 0.5 * far.x0 / far.p;
        let peak = far.closed_form_density(far.x_t(t), t);
        assert!(density_at_min(&far, t) < 1e-12 * peak);
        let centered = sp(10.0, 0.5, 3.0);
        assert_eq!(density_at_min(&centered, 0.3), 0.0);
    }

    #[test]
    fn dynamic_depth_limits() {
        let s = sp(10.0, 50.0, 3.0);
        let d = dynamic_potential(&s).unwrap();
        let st = static_wall_well(10.0, UnitSystem::default()).unwrap();
        assert_relative_eq!(d.segments_at(0.0)[1].depth, st.segments[1].depth, max_relative = 1e-12);
        let slow = sp(0.1, 0.5, 5.0);
        let tm = tmin(&slow);
        let curve = xmin_curve(&slow, &(0..200).map(|i| tm + 0.05 * i as f64).collect::<Vec<_>>());
        assert!(curve.windows(2).all(|w| w[1].2 < w[0].2));
    }

    #[test]
    fn grid_sampling_snaps_edges() {
        let v = static_wall_well(10.0, UnitSystem::default()).unwrap();
        let dx = PI / 20.0 / 8.0;
        let n = 41;
        let x_lo = -(n as f64 - 1.0) * dx;
        let g = v.sample_grid(x_lo, dx, n, 0.0);
        let depth = v.segments[1].depth;
        assert_eq!(g.iter().filter(|&&x| x == -depth).count(), 8);
        assert_eq!(g[n - 1], f64::INFINITY);
        assert_eq!(g[n - 10], 0.0);
    }

    #[test]
    fn potential_csv() {
        let v = PotentialSpec::wall(0.0);
        assert_eq!(v.to_csv(&[-1.0, 1.0], 0.0), "x,V\n-1.0,0.0\n1.0,inf\n");
    }

    #[test]
    fn validation() {
        let mut v = static_wall_well(1.0, UnitSystem::default()).unwrap();
        v.segments.swap(0, 2);
        assert!(v.validate().is_err());
    }

    proptest! {
        #[test]
        fn xmin_forms_agree(p in 0.0..50.0f64, s in 0.1..3.0f64, x0 in 0.5..20.0f64, t in 0.0..20.0f64) {
            let s = sp(p, s, x0);
            let a = xmin_of_t(&s, t);
            let b = xmin_of_t_from_wavenumber(&s, t);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
            prop_assert!(a > 0.0);
        }

        #[test]
        fn xmin_unimodal(p in 0.0..20.0f64, s in 0.2..2.0f64, x0 in 1.0..10.0f64) {
            let s = sp(p, s, x0);
            let tm = tmin(&s);
            let span = 4.0 * tm + 1.0;
            let mut prev = xmin_of_t(&s, 0.0);
            for i in 1..=1000 {
                let t = span * i as f64 / 1000.0;
                let cur = xmin_of_t(&s, t);
                if t < tm * (1.0 - 1e-9) {
                    prop_assert!(cur < prev);
                } else if t - span / 1000.0 > tm * (1.0 + 1e-9) {
                    prop_assert!(cur > prev);
                }
                prev = cur;
            }
        }
    }
}
