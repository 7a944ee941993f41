//! Hover position of the UAV carrying the surface.

use serde::{Deserialize, Serialize};

use crate::channel::{path_loss_db, REFERENCE_DISTANCE_M};
use crate::model::{Position, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub uav: Position,
    pub feasible: bool,
    /// Summed linear path loss over the reflected links.
    pub pl_total: f64,
}

/// Horizontal barycenter of the users.
pub fn barycenter(ues: &[Position]) -> (f64, f64) {
    let n = ues.len() as f64;
    let (sx, sy) = ues.iter().fold((0.0, 0.0), |(sx, sy), q| (sx + q.x, sy + q.y));
    (sx / n, sy / n)
}

/// Summed linear path loss of all UE -> UAV links and the UAV -> AP link.
pub fn total_path_loss(uav: &Position, ues: &[Position], ap: &Position, cfg: &SystemConfig) -> f64 {
    let lin = |d: f64| {
        let db = path_loss_db(d.max(REFERENCE_DISTANCE_M), cfg.channel.alpha_air, true, cfg)
            .expect("distance clamped to the reference");
        10f64.powf(db / 10.0)
    };
    ues.iter().map(|q| lin(q.distance(uav))).sum::<f64>() + lin(uav.distance(ap))
}

/// Whether both distance caps hold at `uav`.
pub fn caps_hold(uav: &Position, ues: &[Position], ap: &Position, cfg: &SystemConfig) -> bool {
    uav.distance(ap) <= cfg.geometry.d_ub_max_m
        && ues.iter().all(|q| q.distance(uav) <= cfg.geometry.d_nu_max_m)
}

/// Candidate heights from `h_min` to `h_max` in `h_step` increments.
pub fn height_grid(cfg: &SystemConfig) -> Vec<f64> {
    let g = &cfg.geometry;
    let steps = ((g.h_max_m - g.h_min_m) / g.h_step_m + 1e-9).floor() as usize;
    (0..=steps).map(|i| g.h_min_m + i as f64 * g.h_step_m).collect()
}

/// Barycenter placement with a grid search over height. Falls back to the
/// unconstrained best height, flagged infeasible, when no height meets the caps.
pub fn place_uav(ues: &[Position], ap: &Position, cfg: &SystemConfig) -> PlacementResult {
    let (x, y) = barycenter(ues);
    let mut best_any: Option<(f64, Position)> = None;
    let mut best_ok: Option<(f64, Position)> = None;
    for h in height_grid(cfg) {
        let pos = Position::new(x, y, h);
        let pl = total_path_loss(&pos, ues, ap, cfg);
        if best_any.is_none_or(|(b, _)| pl < b) {
            best_any = Some((pl, pos));
        }
        if caps_hold(&pos, ues, ap, cfg) && best_ok.is_none_or(|(b, _)| pl < b) {
            best_ok = Some((pl, pos));
        }
    }
    match (best_ok, best_any) {
        (Some((pl, uav)), _) => PlacementResult {
            uav,
            feasible: true,
            pl_total: pl,
        },
        (None, Some((pl, uav))) => PlacementResult {
            uav,
            feasible: false,
            pl_total: pl,
        },
        (None, None) => PlacementResult {
            uav: Position::new(x, y, cfg.geometry.h_min_m),
            feasible: false,
            pl_total: f64::INFINITY,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barycenter_of_two() {
        let ues = [Position::ground(0.0, 0.0), Position::ground(2.0, 2.0)];
        assert_eq!(barycenter(&ues), (1.0, 1.0));
        let r = place_uav(&ues, &Position::ground(0.0, 0.0), &SystemConfig::default());
        assert_eq!((r.uav.x, r.uav.y), (1.0, 1.0));
    }

    #[test]
    fn colocated_user_picks_lowest_height() {
        let mut cfg = SystemConfig::default();
        cfg.geometry.d_nu_max_m = 1e6;
        cfg.geometry.d_ub_max_m = 1e6;
        let o = Position::ground(0.0, 0.0);
        let r = place_uav(&[o], &o, &cfg);
        assert!(r.feasible);
        assert_eq!(r.uav.z, cfg.geometry.h_min_m);
    }

    #[test]
    fn feasibility_matches_exhaustive_cap_check() {
        let mut cfg = SystemConfig::default();
        cfg.geometry.d_nu_max_m = 100.0;
        let ues = [Position::ground(0.0, 0.0), Position::ground(150.0, 0.0)];
        for ap in [
            Position::ground(75.0, 0.0),
            Position::ground(75.0, -25.0),
            Position::ground(300.0, 0.0),
        ] {
            let r = place_uav(&ues, &ap, &cfg);
            let any = height_grid(&cfg).into_iter().any(|h| {
                let p = Position::new(75.0, 0.0, h);
                p.distance(&ap) <= cfg.geometry.d_ub_max_m
                    && ues.iter().all(|q| q.distance(&p) <= 100.0)
            });
            assert_eq!(r.feasible, any);
            if r.feasible {
                assert!(caps_hold(&r.uav, &ues, &ap, &cfg));
            }
        }
    }

    #[test]
    fn grid_covers_bounds() {
        let g = height_grid(&SystemConfig::default());
        assert_eq!(g.first(), Some(&20.0));
        assert_eq!(g.last(), Some(&120.0));
        assert_eq!(g.len(), 101);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn ues_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
            prop::collection::vec((0f64..150.0, 0f64..150.0), 1..8)
        }

        proptest! {
            #[test]
            fn returned_height_is_grid_minimum(pts in ues_strategy()) {
                let cfg = SystemConfig::default();
                let ues: Vec<Position> = pts.iter().map(|&(x, y)| Position::ground(x, y)).collect();
                let ap = Position::ground(cfg.geometry.ap_x_m, cfg.geometry.ap_y_m);
                let r = place_uav(&ues, &ap, &cfg);
                for h in height_grid(&cfg) {
                    let p = Position::new(r.uav.x, r.uav.y, h);
                    if !r.feasible || caps_hold(&p, &ues, &ap, &cfg) {
                        prop_assert!(r.pl_total <= total_path_loss(&p, &ues, &ap, &cfg));
                    }
                }
            }

            #[test]
            fn barycenter_is_permutation_invariant(pts in ues_strategy(), rot in 0usize..8) {
                let ues: Vec<Position> = pts.iter().map(|&(x, y)| Position::ground(x, y)).collect();
                let mut rev = ues.clone();
                rev.reverse();
                let r = rot % ues.len();
                rev.rotate_left(r);
                let (a, b) = (barycenter(&ues), barycenter(&rev));
                prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            }
        }
    }
}
