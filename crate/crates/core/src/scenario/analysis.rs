//! Extrema of sampled profiles and peak matching between two profiles.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Interior local extrema of `(xs, ys)`, refined by a parabola through the
/// three samples around each one.
pub fn extrema(xs: &[f64], ys: &[f64]) -> Vec<Extremum> {
    let mut out = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        let kind = if b > a && b >= c {
            ExtremumKind::Maximum
        } else if b < a && b <= c {
            ExtremumKind::Minimum
        } else {
            continue;
        };
        let den = a - 2.0 * b + c;
        let h = 0.5 * (xs[i + 1] - xs[i - 1]);
        let (dx, value) = if den != 0.0 {
            let s = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
            (s * h, b - 0.25 * (a - c) * s)
        } else {
            (0.0, b)
        };
        out.push(Extremum { x: xs[i] + dx, value, kind });
    }
    out
}

/// Maxima reaching `rel` of the largest sample, and the deepest minimum
/// between each consecutive pair of them. Both lists are in ascending `x`.
pub fn significant_extrema(xs: &[f64], ys: &[f64], rel: f64) -> (Vec<Extremum>, Vec<Extremum>) {
    let top = ys.iter().cloned().fold(0.0, f64::max);
    let all = extrema(xs, ys);
    let maxima: Vec<Extremum> = all
        .iter()
        .filter(|e| e.kind == ExtremumKind::Maximum && e.value >= rel * top)
        .cloned()
        .collect();
    let minima = maxima
        .windows(2)
        .filter_map(|w| {
            all.iter()
                .filter(|e| e.kind == ExtremumKind::Minimum && e.x > w[0].x && e.x < w[1].x)
                .min_by(|a, b| a.value.total_cmp(&b.value))
                .cloned()
        })
        .collect();
    (maxima, minima)
}

/// Paired peak positions and their offsets relative to a spacing scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakComparison {
    pub peaks: Vec<f64>,
    pub reference_peaks: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Spacing each offset is judged against.
    pub spacings: Vec<f64>,
    pub max_relative_offset: f64,
}

/// Pairs `peaks[k]` with `reference[k]` (both ordered outward from a common
/// origin) and measures `|offset| / spacing[k]`.
pub fn peak_offsets(peaks: &[f64], reference: &[f64], spacings: &[f64]) -> PeakComparison {
    let n = peaks.len().min(reference.len()).min(spacings.len());
    let offsets: Vec<f64> = (0..n).map(|k| (peaks[k] - reference[k]).abs()).collect();
    let max_relative_offset = offsets
        .iter()
        .zip(spacings)
        .map(|(o, s)| o / s)
        .fold(if n == 0 { f64::NAN } else { 0.0 }, f64::max);
    PeakComparison {
        peaks: peaks[..n].to_vec(),
        reference_peaks: reference[..n].to_vec(),
        offsets,
        spacings: spacings[..n].to_vec(),
        max_relative_offset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refined_extrema_of_cosine() {
        let xs: Vec<f64> = (0..=400).map(|i| i as f64 * 0.0173).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).cos()).collect();
        let e = extrema(&xs, &ys);
        let mins: Vec<f64> = e.iter().filter(|e| e.kind == ExtremumKind::Minimum).map(|e| e.x).collect();
        let maxs: Vec<f64> = e.iter().filter(|e| e.kind == ExtremumKind::Maximum).map(|e| e.x).collect();
        assert!((mins[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-4);
        assert!((maxs[0] - std::f64::consts::PI).abs() < 1e-4);
        assert_eq!(mins.len(), 2);
    }

    #[test]
    fn small_bumps_are_ignored() {
        let xs: Vec<f64> = (0..=1000).map(|i| -5.0 + i as f64 * 0.01).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (-x * x).exp() * (1.0 + (8.0 * x).cos()) + 1e-6 * (40.0 * x).sin())
            .collect();
        let (max, min) = significant_extrema(&xs, &ys, 0.05);
        assert_eq!(min.len(), max.len() - 1);
        assert!(max.iter().any(|m| m.x.abs() < 1e-3));
        assert!(max.iter().all(|m| m.value >= 0.1));
    }

    #[test]
    fn offsets_against_spacing() {
        let c = peak_offsets(&[-0.35, -0.66], &[-0.31, -0.63, -0.94], &[0.314, 0.314, 0.314]);
        assert_eq!(c.offsets.len(), 2);
        assert!((c.max_relative_offset - 0.04 / 0.314).abs() < 1e-12);
        assert!(peak_offsets(&[], &[1.0], &[1.0]).max_relative_offset.is_nan());
    }
}
