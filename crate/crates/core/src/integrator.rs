//! Dormand-Prince 5(4) integrator with continuous (dense) output for scalar ODEs.

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, ParamError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 1.0,
            min_step: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    /// Defaults with the absolute tolerance scaled to a packet width.
    pub fn for_length(sigma0: f64) -> Self {
        Self {
            abs_tol: 1e-10 * sigma0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(ParamError::new("integrator.rel_tol", "must be finite and > 0"));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(ParamError::new("integrator.abs_tol", "must be finite and > 0"));
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step) {
            return Err(ParamError::new("integrator.min_step", "must satisfy 0 < min_step < max_step"));
        }
        if self.max_steps == 0 {
            return Err(ParamError::new("integrator.max_steps", "must be >= 1"));
        }
        Ok(())
    }
}

/// Reasons a single integration can fail.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Node { t: f64, x: f64 },
    OutOfDomain { t: f64, x: f64 },
    Step { t: f64, reason: String },
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Dense {
    t: f64,
    h: f64,
    r: [f64; 5],
}

impl Dense {
    fn eval(&self, t: f64) -> f64 {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))
    }
}

fn stage_failure(err: FieldError, t: f64, x: f64) -> Failure {
    match err {
        FieldError::NearNode { .. } => Failure::Node { t, x },
        FieldError::OutOfDomain { .. } => Failure::OutOfDomain { t, x },
    }
}

/// Integrates `dx/dt = f(t, x)` from `(t0, x0)` and returns `x` at every
/// entry of `t_out` (ascending, all `>= t0`).
pub fn integrate<F>(mut f: F, t0: f64, x0: f64, t_out: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>, Failure>
where
    F: FnMut(f64, f64) -> Result<f64, FieldError>,
{
    let mut out = Vec::with_capacity(t_out.len());
    let mut next = 0;
    while next < t_out.len() && t_out[next] <= t0 {
        out.push(x0);
        next += 1;
    }
    if next == t_out.len() {
        return Ok(out);
    }
    let t_end = t_out[t_out.len() - 1];

    let mut t = t0;
    let mut x = x0;
    let mut k1 = f(t, x).map_err(|e| stage_failure(e, t, x))?;
    let sc0 = cfg.abs_tol + cfg.rel_tol * x.abs();
    let mut h = if k1 != 0.0 {
        (0.01 * (sc0 / cfg.rel_tol).max(cfg.abs_tol) / k1.abs()).max(1e-6 * (t_end - t0))
    } else {
        1e-3 * (t_end - t0)
    };
    h = h.min(cfg.max_step).min(t_end - t0).max(cfg.min_step);
    let mut rejected_last = false;
    let mut steps = 0usize;

    while next < t_out.len() {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Failure::Step {
                t,
                reason: format!("exceeded {} steps", cfg.max_steps),
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let stages = (|| {
            let k2 = f(t + C[1] * h, x + h * A21 * k1).map_err(|e| (e, t + C[1] * h))?;
            let k3 = f(t + C[2] * h, x + h * (A31 * k1 + A32 * k2)).map_err(|e| (e, t + C[2] * h))?;
            let k4 = f(t + C[3] * h, x + h * (A41 * k1 + A42 * k2 + A43 * k3))
                .map_err(|e| (e, t + C[3] * h))?;
            let k5 = f(t + C[4] * h, x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
                .map_err(|e| (e, t + C[4] * h))?;
            let k6 = f(t + h, x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
                .map_err(|e| (e, t + h))?;
            let x1 = x + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            let k7 = f(t + h, x1).map_err(|e| (e, t + h))?;
            Ok::<_, (FieldError, f64)>((k2, k3, k4, k5, k6, k7, x1))
        })();
        let (_k2, k3, k4, k5, k6, k7, x1) = match stages {
            Ok(v) => v,
            Err((e, te)) => {
                // A stage landed on a node or outside the domain: back off.
                h *= 0.25;
                rejected_last = true;
                if h < cfg.min_step {
                    return Err(stage_failure(e, te, x));
                }
                continue;
            }
        };
        let err_est = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let sc = cfg.abs_tol + cfg.rel_tol * x.abs().max(x1.abs());
        let err = (err_est / sc).abs();
        if !err.is_finite() {
            h *= 0.25;
            rejected_last = true;
            if h < cfg.min_step {
                return Err(Failure::Step {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            continue;
        }
        let mut fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            let diff = x1 - x;
            let bspl = h * k1 - diff;
            let dense = Dense {
                t,
                h,
                r: [
                    x,
                    diff,
                    bspl,
                    diff - h * k7 - bspl,
                    h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                ],
            };
            let t1 = if last { t_end } else { t + h };
            while next < t_out.len() && t_out[next] <= t1 {
                out.push(if t_out[next] == t1 { x1 } else { dense.eval(t_out[next]) });
                next += 1;
            }
            t = t1;
            x = x1;
            k1 = k7;
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            h = (h * fac).min(cfg.max_step).max(cfg.min_step);
        } else {
            h *= fac.min(1.0);
            rejected_last = true;
            if h < cfg.min_step {
                return Err(Failure::Step {
                    t,
                    reason: format!("step size fell below min_step ({:e})", cfg.min_step),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exponential_decay() {
        let ts = grid(0.0, 3.0, 31);
        let cfg = IntegratorConfig::default();
        let xs = integrate(|_, x| Ok(-x), 0.0, 2.0, &ts, &cfg).unwrap();
        for (t, x) in ts.iter().zip(&xs) {
            assert!((x - 2.0 * (-t).exp()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let ts = grid(0.0, 10.0, 1001);
        let cfg = IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..IntegratorConfig::default()
        };
        let xs = integrate(|t, _| Ok(t.cos()), 0.0, 0.0, &ts, &cfg).unwrap();
        for (t, x) in ts.iter().zip(&xs) {
            assert!((x - t.sin()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn node_failure_is_reported() {
        let cfg = IntegratorConfig::default();
        let r = integrate(
            |t, x| {
                if t > 0.5 {
                    Err(FieldError::NearNode { x, t, rho: 0.0 })
                } else {
                    Ok(1.0)
                }
            },
            0.0,
            0.0,
            &[0.0, 1.0],
            &cfg,
        );
        assert!(matches!(r, Err(Failure::Node { .. })));
    }

    #[test]
    fn outputs_at_start_time() {
        let cfg = IntegratorConfig::default();
        let xs = integrate(|_, _| Ok(1.0), 0.0, 4.0, &[0.0], &cfg).unwrap();
        assert_eq!(xs, vec![4.0]);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let bad = IntegratorConfig {
            min_step: 2.0,
            ..IntegratorConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
