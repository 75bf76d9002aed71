//! Built-in experiment protocols at the reference size and at desk size.

use crate::error::{Error, Result};
use crate::metrics::Method;
use crate::ota_ibt::IbtConfig;
use crate::scenario::{ScenarioConfig, ServiceSets};

use super::config::{ExperimentConfig, OutputConfig, Sweep};

pub const PRESETS: [&str; 6] = ["fig3", "fig4", "fig5", "desk", "desk-fig4", "desk-fig5"];

const RATE_VS_BLOCK: [Method; 5] = [
    Method::Centralized,
    Method::SepOta,
    Method::SepLocal,
    Method::CombOta,
    Method::CombLocal,
];

fn base(name: &str, scenario: ScenarioConfig, methods: &[Method], drops: usize, r_tot: f64, sweep: Sweep) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        scenario,
        methods: methods.to_vec(),
        blocks: 10,
        drops,
        seed: 1,
        kappa: 0.967,
        r_tot,
        sweep,
        ibt: IbtConfig::default(),
        centralized_iters: 10,
        output: OutputConfig::default(),
    }
}

fn sizes(dl: usize, ul: usize) -> ServiceSets {
    ServiceSets::Sizes { dl, ul, shuffle: true }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let full = |k| ScenarioConfig::new(25, 8, k, 4);
    let desk = |k| ScenarioConfig::new(9, 4, k, 2);
    let cfg = match name {
        "fig3" => base(name, full(32), &RATE_VS_BLOCK, 100, 300.0, Sweep::None),
        "fig4" => base(
            name,
            full(44).with_sets(sizes(32, 32)),
            &Method::ALL,
            100,
            300.0,
            Sweep::RTot {
                values: (1..=9).map(|i| 100.0 * i as f64).collect(),
            },
        ),
        "fig5" => base(
            name,
            full(64).with_sets(sizes(32, 32)),
            &Method::ALL,
            100,
            300.0,
            Sweep::Overlap {
                dl: 32,
                ul: 32,
                values: vec![0, 8, 16, 24, 32],
            },
        ),
        // Block size scaled with the UE count so that training takes the
        // same share of the block as at the reference size.
        "desk" => base(name, desk(12), &RATE_VS_BLOCK, 20, 300.0 * 12.0 / 32.0, Sweep::None),
        "desk-fig4" => base(
            name,
            desk(11).with_sets(sizes(8, 8)),
            &Method::ALL,
            20,
            75.0,
            Sweep::RTot {
                values: (1..=9).map(|i| 25.0 * i as f64).collect(),
            },
        ),
        "desk-fig5" => base(
            name,
            desk(12).with_sets(sizes(6, 6)),
            &Method::ALL,
            20,
            300.0 * 6.0 / 32.0,
            Sweep::Overlap {
                dl: 6,
                ul: 6,
                values: vec![0, 2, 3, 5, 6],
            },
        ),
        _ => {
            return Err(Error::Config(format!(
                "unknown preset '{name}' (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for p in PRESETS {
            let cfg = preset(p).unwrap();
            assert_eq!(cfg.blocks, 10);
        }
        assert!(preset("fig6").is_err());
    }

    #[test]
    fn reference_sizes() {
        let f3 = preset("fig3").unwrap();
        assert_eq!((f3.scenario.ap_count, f3.scenario.ap_antennas, f3.scenario.ue_count, f3.scenario.ue_antennas), (25, 8, 32, 4));
        assert_eq!(f3.r_tot, 300.0);
        let f5 = preset("fig5").unwrap();
        let ks: Vec<usize> = f5.points().iter().map(|p| p.scenario.ue_count).collect();
        assert_eq!(ks.first(), Some(&64));
        assert_eq!(ks.last(), Some(&32));
    }

    #[test]
    fn desk_keeps_overhead_share() {
        let d = preset("desk").unwrap();
        assert!((3.0 * 12.0 / d.r_tot - 96.0 / 300.0).abs() < 1e-12);
    }
}
