//! Scenario configuration and the shared domain types.
//!
//! All arithmetic downstream is in linear units (watts, seconds, bits,
//! cycles); decibel quantities only appear in the configuration file and are
//! converted through the accessor methods on [`SystemConfig`].

use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of user equipments (N).
    pub n_users: usize,
    /// AP receive antennas (M).
    pub n_antennas: usize,
    /// IRS elements (K).
    pub n_elements: usize,
    /// IRS groups for the group-connected architecture (L, divides K).
    pub n_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Path loss at the 1 m reference distance.
    pub pl0_db: f64,
    /// Path-loss exponent of the ground UE -> AP link.
    pub alpha_direct: f64,
    /// Path-loss exponent of the UE -> IRS and IRS -> AP links.
    pub alpha_air: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub p_los_direct: f64,
    pub p_los_irs: f64,
    /// Element spacing over carrier wavelength (d0 / lambda).
    pub spacing_ratio: f64,
    /// Multiplies the UE -> IRS and IRS -> AP array responses by i.i.d.
    /// unit-variance complex Gaussian fading. Off gives rank-one `G`.
    pub surface_fading: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeConfig {
    pub f_user_max_hz: f64,
    pub f_mec_max_hz: f64,
    /// Effective switched capacitance of the UE processors.
    pub eps_ceff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub e_max_j: f64,
    pub p_hover_w: f64,
    /// Constant UE circuit power while transmitting.
    pub p_rx_w: f64,
    /// Per-UE transmit power cap.
    pub p_max_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub gamma_min_db: f64,
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// UEs are dropped uniformly in `[0, area_side_m]^2`.
    pub area_side_m: f64,
    pub ap_x_m: f64,
    pub ap_y_m: f64,
    pub d_ub_max_m: f64,
    pub d_nu_max_m: f64,
    pub h_min_m: f64,
    pub h_max_m: f64,
    pub h_step_m: f64,
    /// Mounting point of the fixed (building) IRS baseline.
    pub building_x_m: f64,
    pub building_y_m: f64,
    pub building_h_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub bits_min: f64,
    pub bits_max: f64,
    pub cycles_per_bit_min: f64,
    pub cycles_per_bit_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative tolerance of the compute and comm inner loops.
    pub epsilon: f64,
    pub i_max: usize,
    /// Relative tolerance on the outer objective.
    pub outer_epsilon: f64,
    pub outer_i_max: usize,
    /// Iteration cap of the Riemannian phase solver (per group).
    pub phase_i_max: usize,
    /// Damping of the chi / Gamma auxiliary update, in (0, 1].
    pub theta_step: f64,
}

/// Every scenario constant. Sections mirror the config file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub network: NetworkConfig,
    pub channel: ChannelConfig,
    pub compute: ComputeConfig,
    pub energy: EnergyConfig,
    pub objective: ObjectiveConfig,
    pub geometry: GeometryConfig,
    pub tasks: TaskConfig,
    pub solver: SolverConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            network: NetworkConfig {
                n_users: 4,
                n_antennas: 8,
                n_elements: 8,
                n_groups: 2,
            },
            channel: ChannelConfig {
                bandwidth_hz: 20e6,
                noise_psd_dbm_hz: -174.0,
                pl0_db: 31.5,
                alpha_direct: 3.5,
                alpha_air: 2.2,
                eta_los_db: 1.0,
                eta_nlos_db: 20.0,
                p_los_direct: 0.05,
                p_los_irs: 0.95,
                spacing_ratio: 0.5,
                surface_fading: true,
            },
            compute: ComputeConfig {
                f_user_max_hz: 1e9,
                f_mec_max_hz: 2e11,
                eps_ceff: 1e-28,
            },
            energy: EnergyConfig {
                e_max_j: 2.0,
                p_hover_w: 100.0,
                p_rx_w: 0.1,
                p_max_w: 0.1,
            },
            objective: ObjectiveConfig {
                gamma_min_db: 0.0,
                w1: 0.5,
                w2: 0.5,
            },
            geometry: GeometryConfig {
                area_side_m: 150.0,
                ap_x_m: 75.0,
                ap_y_m: 0.0,
                d_ub_max_m: 100.0,
                d_nu_max_m: 100.0,
                h_min_m: 20.0,
                h_max_m: 120.0,
                h_step_m: 1.0,
                building_x_m: 0.0,
                building_y_m: 0.0,
                building_h_m: 30.0,
            },
            tasks: TaskConfig {
                bits_min: 100e3,
                bits_max: 200e3,
                cycles_per_bit_min: 0.5e3,
                cycles_per_bit_max: 100e3,
            },
            solver: SolverConfig {
                epsilon: 1e-4,
                i_max: 50,
                outer_epsilon: 1e-3,
                outer_i_max: 20,
                phase_i_max: 200,
                theta_step: 0.5,
            },
        }
    }
}

impl SystemConfig {
    /// Noise power over the whole band, in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_w(self.channel.noise_psd_dbm_hz) * self.channel.bandwidth_hz
    }

    /// Linear SINR threshold.
    pub fn gamma_min(&self) -> f64 {
        db_to_lin(self.objective.gamma_min_db)
    }

    /// Elements per group (K / L).
    pub fn group_size(&self) -> usize {
        self.network.n_elements / self.network.n_groups.max(1)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Returns every violated invariant.
    pub fn validate(&self) -> std::result::Result<(), Vec<ConfigIssue>> {
        let mut issues = Vec::new();
        let mut check = |ok: bool, field: &'static str, constraint: &str| {
            if !ok {
                issues.push(ConfigIssue {
                    field,
                    constraint: constraint.to_string(),
                });
            }
        };
        let net = &self.network;
        check(net.n_users >= 1, "network.n_users", "N >= 1");
        check(net.n_antennas >= 1, "network.n_antennas", "M >= 1");
        check(net.n_elements >= 1, "network.n_elements", "K >= 1");
        check(
            net.n_groups >= 1 && net.n_groups <= net.n_elements,
            "network.n_groups",
            "1 <= L <= K",
        );
        if net.n_groups >= 1 {
            check(
                net.n_elements.is_multiple_of(net.n_groups),
                "network.n_groups",
                "K mod L ≠ 0",
            );
        }

        let positive: [(&'static str, f64); 14] = [
            ("channel.bandwidth_hz", self.channel.bandwidth_hz),
            ("channel.spacing_ratio", self.channel.spacing_ratio),
            ("channel.alpha_direct", self.channel.alpha_direct),
            ("channel.alpha_air", self.channel.alpha_air),
            ("compute.f_user_max_hz", self.compute.f_user_max_hz),
            ("compute.f_mec_max_hz", self.compute.f_mec_max_hz),
            ("compute.eps_ceff", self.compute.eps_ceff),
            ("energy.e_max_j", self.energy.e_max_j),
            ("energy.p_hover_w", self.energy.p_hover_w),
            ("energy.p_rx_w", self.energy.p_rx_w),
            ("energy.p_max_w", self.energy.p_max_w),
            ("geometry.area_side_m", self.geometry.area_side_m),
            ("geometry.h_step_m", self.geometry.h_step_m),
            ("solver.epsilon", self.solver.epsilon),
        ];
        for (field, v) in positive {
            check(v.is_finite() && v > 0.0, field, "must be finite and > 0");
        }
        let finite: [(&'static str, f64); 6] = [
            ("channel.noise_psd_dbm_hz", self.channel.noise_psd_dbm_hz),
            ("channel.pl0_db", self.channel.pl0_db),
            ("channel.eta_los_db", self.channel.eta_los_db),
            ("channel.eta_nlos_db", self.channel.eta_nlos_db),
            ("objective.gamma_min_db", self.objective.gamma_min_db),
            ("solver.outer_epsilon", self.solver.outer_epsilon),
        ];
        for (field, v) in finite {
            check(v.is_finite(), field, "must be finite");
        }
        for (field, v) in [
            ("channel.p_los_direct", self.channel.p_los_direct),
            ("channel.p_los_irs", self.channel.p_los_irs),
        ] {
            check((0.0..=1.0).contains(&v), field, "probability must lie in [0, 1]");
        }

        let obj = &self.objective;
        check(obj.w1 >= 0.0, "objective.w1", "w1 >= 0");
        check(obj.w2 >= 0.0, "objective.w2", "w2 >= 0");
        check(obj.w1 + obj.w2 > 0.0, "objective.w1", "w1 + w2 > 0");

        let g = &self.geometry;
        check(g.h_min_m >= 0.0, "geometry.h_min_m", "h_min >= 0");
        check(g.h_min_m <= g.h_max_m, "geometry.h_max_m", "h_min <= h_max");
        check(g.d_ub_max_m > 0.0, "geometry.d_ub_max_m", "must be > 0");
        check(g.d_nu_max_m > 0.0, "geometry.d_nu_max_m", "must be > 0");
        check(g.building_h_m >= 0.0, "geometry.building_h_m", "must be >= 0");

        let t = &self.tasks;
        check(t.bits_min > 0.0, "tasks.bits_min", "must be > 0");
        check(t.bits_min <= t.bits_max, "tasks.bits_max", "bits_min <= bits_max");
        check(t.cycles_per_bit_min > 0.0, "tasks.cycles_per_bit_min", "must be > 0");
        check(
            t.cycles_per_bit_min <= t.cycles_per_bit_max,
            "tasks.cycles_per_bit_max",
            "cycles_per_bit_min <= cycles_per_bit_max",
        );

        let s = &self.solver;
        check(s.i_max >= 1, "solver.i_max", "must be >= 1");
        check(s.outer_i_max >= 1, "solver.outer_i_max", "must be >= 1");
        check(s.phase_i_max >= 1, "solver.phase_i_max", "must be >= 1");
        check(
            s.theta_step > 0.0 && s.theta_step <= 1.0,
            "solver.theta_step",
            "must lie in (0, 1]",
        );

        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// `validate` folded into the crate error type.
    pub fn validated(self) -> Result<Self> {
        self.validate().map_err(Error::InvalidConfig)?;
        Ok(self)
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    db_to_lin(dbm - 30.0)
}

/// One UE's computation task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTask {
    s_bits: f64,
    c_per_bit: f64,
    c_total: f64,
}

impl UserTask {
    pub fn new(s_bits: f64, c_per_bit: f64) -> Result<Self> {
        if !(s_bits > 0.0 && s_bits.is_finite()) {
            return Err(Error::InvalidConfig(vec![ConfigIssue {
                field: "task.s_bits",
                constraint: "must be > 0".into(),
            }]));
        }
        if !(c_per_bit > 0.0 && c_per_bit.is_finite()) {
            return Err(Error::InvalidConfig(vec![ConfigIssue {
                field: "task.c_per_bit",
                constraint: "must be > 0".into(),
            }]));
        }
        Ok(UserTask {
            s_bits,
            c_per_bit,
            c_total: s_bits * c_per_bit,
        })
    }

    /// Task size in bits.
    pub fn bits(&self) -> f64 {
        self.s_bits
    }

    pub fn cycles_per_bit(&self) -> f64 {
        self.c_per_bit
    }

    /// Total CPU cycles.
    pub fn cycles(&self) -> f64 {
        self.c_total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Position { x, y, z: 0.0 }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    /// Cosine of the angle between the x axis and the direction towards `other`,
    /// i.e. the directional cosine seen by a linear array laid along x.
    pub fn directional_cosine(&self, other: &Position) -> f64 {
        let d = self.distance(other);
        if d == 0.0 {
            0.0
        } else {
            (other.x - self.x) / d
        }
    }
}

/// Positions of every node in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub ues: Vec<Position>,
    pub ap: Position,
    pub irs: Position,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(SystemConfig::default().validate().is_ok());
    }

    #[test]
    fn divisible_groups_pass() {
        let mut cfg = SystemConfig::default();
        cfg.network.n_elements = 64;
        cfg.network.n_groups = 8;
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.group_size(), 8);
    }

    #[test]
    fn indivisible_groups_fail() {
        let mut cfg = SystemConfig::default();
        cfg.network.n_elements = 32;
        cfg.network.n_groups = 5;
        let issues = cfg.validate().unwrap_err();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].field, "network.n_groups");
        assert_eq!(issues[0].constraint, "K mod L ≠ 0");
    }

    #[test]
    fn table_values_pass() {
        let cfg = SystemConfig::default();
        assert_eq!(cfg.channel.bandwidth_hz, 20e6);
        assert_eq!(cfg.channel.noise_psd_dbm_hz, -174.0);
        assert_eq!(cfg.channel.pl0_db, 31.5);
        assert_eq!(cfg.energy.e_max_j, 2.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn every_violation_is_reported() {
        let mut cfg = SystemConfig::default();
        cfg.network.n_users = 0;
        cfg.channel.bandwidth_hz = -1.0;
        cfg.channel.p_los_irs = 1.5;
        cfg.objective.w1 = 0.0;
        cfg.objective.w2 = 0.0;
        cfg.geometry.h_min_m = 200.0;
        let fields: Vec<_> = cfg
            .validate()
            .unwrap_err()
            .into_iter()
            .map(|i| i.field)
            .collect();
        for f in [
            "network.n_users",
            "channel.bandwidth_hz",
            "channel.p_los_irs",
            "objective.w1",
            "geometry.h_max_m",
        ] {
            assert!(fields.contains(&f), "missing {f} in {fields:?}");
        }
    }

    #[test]
    fn noise_power_matches_hand_conversion() {
        let cfg = SystemConfig::default();
        // -174 dBm/Hz over 20 MHz is about -101 dBm
        let dbm = -174.0 + 10.0 * 20e6f64.log10();
        assert!((dbm + 101.0).abs() < 0.02);
        let expected = 10f64.powf((dbm - 30.0) / 10.0);
        assert!((cfg.noise_power_w() / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = SystemConfig::default().to_toml_string();
        text.push_str("\n[extra]\nfoo = 1\n");
        assert!(SystemConfig::from_toml_str(&text).is_err());

        let text = SystemConfig::default()
            .to_toml_string()
            .replace("n_users = 4", "n_users = 4\nn_userz = 3");
        assert!(SystemConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn task_cycles_are_exact_product() {
        let t = UserTask::new(150e3, 1234.5).unwrap();
        assert_eq!(t.cycles(), 150e3 * 1234.5);
        assert!(UserTask::new(0.0, 1.0).is_err());
        assert!(UserTask::new(1.0, -1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn config_round_trips_bit_exactly(
                bw in 1e3f64..1e9,
                n0 in -200f64..-100.0,
                eps in 1e-30f64..1e-20,
                e_max in 1e-3f64..1e3,
                w1 in 0f64..1.0,
                h in 1f64..500.0,
                theta in 1e-3f64..1.0,
            ) {
                let mut cfg = SystemConfig::default();
                cfg.channel.bandwidth_hz = bw;
                cfg.channel.noise_psd_dbm_hz = n0;
                cfg.compute.eps_ceff = eps;
                cfg.energy.e_max_j = e_max;
                cfg.objective.w1 = w1;
                cfg.geometry.h_max_m = h;
                cfg.solver.theta_step = theta;
                let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
                prop_assert_eq!(back.channel.bandwidth_hz.to_bits(), bw.to_bits());
                prop_assert_eq!(back.channel.noise_psd_dbm_hz.to_bits(), n0.to_bits());
                prop_assert_eq!(back.compute.eps_ceff.to_bits(), eps.to_bits());
                prop_assert_eq!(back.energy.e_max_j.to_bits(), e_max.to_bits());
                prop_assert_eq!(back.objective.w1.to_bits(), w1.to_bits());
                prop_assert_eq!(back.geometry.h_max_m.to_bits(), h.to_bits());
                prop_assert_eq!(back.solver.theta_step.to_bits(), theta.to_bits());
                prop_assert_eq!(back, cfg);
            }

            #[test]
            fn task_cycles_consistent(s in 1f64..1e7, c in 1e-3f64..1e6) {
                let t = UserTask::new(s, c).unwrap();
                prop_assert_eq!(t.cycles(), s * c);
            }
        }
    }
}
