//! Built-in scenarios reproducing the figure set.

use super::{
    AnalysisSpec, DensitySpec, GridSpec, Mode, Outputs, PacketSpec, Scenario, TimeSpec,
};
use crate::integrator::IntegratorConfig;
use crate::trajectory::{BoundaryRule, SamplingKind, SamplingStrategy};
use crate::wavepacket::UnitSystem;

const NAMES: [&str; 11] = [
    "fig2",
    "fig3",
    "fig5",
    "fig6",
    "fig7",
    "fig8",
    "fig9",
    "fig10",
    "fig11",
    "fig12",
    "diffraction",
];

pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}

pub fn presets() -> Vec<Scenario> {
    NAMES.iter().map(|n| preset(n).expect("registered preset")).collect()
}

fn packet(x0: f64, p0: f64, sigma0: f64) -> PacketSpec {
    PacketSpec { x0, p0, sigma0 }
}

fn base(name: &str, mode: Mode, packets: Vec<PacketSpec>, t_end: f64) -> Scenario {
    let sigma = packets.iter().map(|p| p.sigma0).fold(f64::INFINITY, f64::min);
    Scenario {
        name: name.to_string(),
        mode,
        units: UnitSystem::default(),
        packets,
        alpha: 1.0,
        normalized_packets: true,
        well_n: 1.0,
        sampling: SamplingStrategy::default(),
        integrator: IntegratorConfig::for_length(sigma),
        grid: GridSpec::default(),
        time: TimeSpec { t_end, samples: 201 },
        density: DensitySpec::default(),
        analysis: AnalysisSpec::default(),
        outputs: Outputs::default(),
    }
}

fn collision(name: &str) -> Scenario {
    let mut s = base(
        name,
        Mode::AnalyticSuperposition,
        vec![packet(-3.0, 10.0, 0.5), packet(3.0, -10.0, 0.5)],
        0.6,
    );
    s.density.times = vec![0.0, 0.15, 0.3, 0.45, 0.6];
    s.density.range = Some([-6.0, 6.0]);
    s
}

fn asymmetric_width(name: &str) -> Scenario {
    let mut s = base(
        name,
        Mode::AnalyticSuperposition,
        vec![packet(-10.0, 20.0, 0.5), packet(10.0, -20.0, 1.5)],
        0.8,
    );
    s.time.samples = 401;
    s.density.times = vec![0.0, 0.8];
    s.density.range = Some([-20.0, 20.0]);
    s.density.points = 4001;
    s.analysis.gap_window = Some([0.45, 0.55]);
    s.analysis.separatrix_window = Some([0.4, 0.6]);
    s
}

fn wall(name: &str, mode: Mode) -> Scenario {
    let mut s = base(name, mode, vec![packet(-3.0, 10.0, 0.5)], 0.6);
    s.grid.edge_tolerance = 1e-3;
    s.time.samples = 301;
    s.density.times = vec![0.0, 0.3, 0.6];
    s.analysis.compare_time = Some(0.3);
    s
}

/// The named preset, if registered.
pub fn preset(name: &str) -> Option<Scenario> {
    let s = match name {
        "fig2" => collision("fig2"),
        "fig3" => {
            let mut s = collision("fig3");
            s.analysis.single_packet_reference = true;
            s
        }
        "fig5" => {
            let mut s = base(
                "fig5",
                Mode::AnalyticSuperposition,
                vec![packet(-3.0, 10.0, 0.5), packet(3.0, -30.0, 0.5)],
                0.6,
            );
            s.density.times = vec![0.0, 0.6];
            s.density.range = Some([-22.0, 6.0]);
            s.density.points = 2801;
            s.analysis.gap_window = Some([0.2, 0.6]);
            s
        }
        "fig6" => asymmetric_width("fig6"),
        "fig7" => {
            let mut s = asymmetric_width("fig7");
            s.sampling = SamplingStrategy::quantiles(30, 30);
            s
        }
        "fig8" => {
            let mut s = collision("fig8");
            s.alpha = 0.5;
            s.time.t_end = 0.8;
            s.density.times = vec![0.0, 0.8];
            s.density.range = Some([-8.0, 8.0]);
            s.sampling = SamplingStrategy {
                kind: SamplingKind::EqualProbabilitySpacing,
                count_per_packet: [23, 11],
                ..SamplingStrategy::default()
            };
            s.analysis.boundary_rule = Some(BoundaryRule::DensityMinimum);
            s
        }
        "fig9" => wall("fig9", Mode::WallScattering),
        "fig10" => wall("fig10", Mode::WellWallScattering),
        "fig11" => {
            let mut s = base("fig11", Mode::DynamicPotentialScattering, vec![packet(-5.0, 0.1, 0.5)], 5.0);
            s.time.samples = 501;
            s.density.times = vec![0.0, 2.5, 5.0];
            s.analysis.compare_time = Some(5.0);
            s
        }
        "fig12" => {
            let mut s = base(
                "fig12",
                Mode::AnalyticSuperposition,
                vec![packet(-5.0, 0.1, 0.5), packet(5.0, -0.1, 0.5)],
                5.0,
            );
            s.density.times = vec![0.0, 5.0];
            s.density.range = Some([-15.0, 15.0]);
            s.analysis.xmin_velocities = vec![0.1, 2.0, 10.0, 100.0];
            s
        }
        "diffraction" => {
            let mut s = base(
                "diffraction",
                Mode::AnalyticSuperposition,
                vec![packet(-5.0, 0.0, 0.5), packet(5.0, 0.0, 0.5)],
                200.0,
            );
            s.sampling = SamplingStrategy::quantiles(40, 40);
            s.time.samples = 401;
            s.density.times = vec![0.0, 200.0];
            s.density.range = Some([-300.0, 300.0]);
            s.density.points = 3001;
            s.analysis.slope_window = Some([100.0, 200.0]);
            s
        }
        _ => return None,
    };
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_valid() {
        for n in ["fig2", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12"] {
            assert!(preset_names().contains(&n));
        }
        for s in presets() {
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
            assert_eq!(preset(&s.name).unwrap(), s);
        }
        assert!(preset("fig4").is_none());
    }

    #[test]
    fn caption_parameters() {
        let f5 = preset("fig5").unwrap();
        assert_eq!((f5.packets[0].p0, f5.packets[1].p0), (10.0, -30.0));
        let f6 = preset("fig6").unwrap();
        assert_eq!((f6.packets[0].sigma0, f6.packets[1].sigma0), (0.5, 1.5));
        assert_eq!((f6.packets[0].p0, f6.packets[1].p0), (20.0, -20.0));
        let f11 = preset("fig11").unwrap();
        let p = f11.packets[0].packet(f11.units);
        assert!((p.propagation_velocity() - 0.1).abs() < 1e-15);
        assert!((p.spreading_velocity() - 1.0).abs() < 1e-15);
        assert_eq!(preset("fig8").unwrap().sampling.count_per_packet, [23, 11]);
    }
}
