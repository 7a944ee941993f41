//! Communication side: receive combining, transmit power and surface
//! configuration, coordinated by the fractional-programming loop.

pub mod beamforming;
pub mod fp;
pub mod power;

use serde::{Deserialize, Serialize};

use crate::channel::{all_sinr, effective_channels, ChannelSet};
use crate::error::{Error, Result, Stage};
use crate::irs::{optimize_phase, PhaseInputs, PhaseShift};
use crate::linalg::CVec;
use crate::model::SystemConfig;

pub use beamforming::mmse_beamformer;
pub use fp::{update_chi_gamma, update_psi, update_zeta, FpState};
pub use power::{PowerInputs, PowerProblem, PowerSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct CommAllocation {
    pub p: Vec<f64>,
    pub w: Vec<CVec>,
    pub phi: PhaseShift,
}

/// Which blocks the loop optimizes; the others stay at their input value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommOptions {
    pub optimize_power: bool,
    pub optimize_phase: bool,
}

impl Default for CommOptions {
    fn default() -> Self {
        CommOptions {
            optimize_power: true,
            optimize_phase: true,
        }
    }
}

/// Link quality of an allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CommEval {
    pub heff: Vec<CVec>,
    pub sinr: Vec<f64>,
    pub rates_bps: Vec<f64>,
}

impl CommEval {
    pub fn min_rate(&self) -> f64 {
        self.rates_bps.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn evaluate(ch: &ChannelSet, alloc: &CommAllocation, cfg: &SystemConfig) -> Result<CommEval> {
    let heff = effective_channels(ch, &alloc.phi.assemble())?;
    evaluate_with(heff, alloc, cfg)
}

fn evaluate_with(heff: Vec<CVec>, alloc: &CommAllocation, cfg: &SystemConfig) -> Result<CommEval> {
    let sinr = all_sinr(&heff, &alloc.w, &alloc.p, cfg.noise_power_w())?;
    let rates_bps = sinr
        .iter()
        .map(|g| cfg.channel.bandwidth_hz * (1.0 + g).log2())
        .collect();
    Ok(CommEval {
        heff,
        sinr,
        rates_bps,
    })
}

/// Worst offloading time `maxₙ Lₙ / Rₙ` over users that offload.
pub fn offload_proxy(rates_bps: &[f64], offload_bits: &[f64]) -> f64 {
    rates_bps
        .iter()
        .zip(offload_bits)
        .filter(|(_, l)| **l > 0.0)
        .map(|(r, l)| if *r > 0.0 { l / r } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

fn qos_margin(sinr: &[f64], gamma_min: f64) -> f64 {
    if gamma_min <= 0.0 {
        return f64::INFINITY;
    }
    sinr.iter().map(|g| g / gamma_min).fold(f64::INFINITY, f64::min)
}

/// Equal powers at `p_max / 2`, raised while some user misses the SINR floor;
/// combiners are MMSE for the given surface.
pub fn initial_comm(ch: &ChannelSet, phi: PhaseShift, cfg: &SystemConfig) -> Result<CommAllocation> {
    let n = ch.n_users();
    let noise = cfg.noise_power_w();
    let p_max = cfg.energy.p_max_w;
    let gamma_min = cfg.gamma_min();
    let heff = effective_channels(ch, &phi.assemble())?;
    let mut p = vec![0.5 * p_max; n];
    let mut w = mmse_beamformer(&heff, &p, noise)?;
    let meets = |p: &[f64], w: &[CVec]| -> Result<bool> {
        Ok(qos_margin(&all_sinr(&heff, w, p, noise)?, gamma_min) >= 1.0)
    };
    while !meets(&p, &w)? && p[0] < p_max {
        p.iter_mut().for_each(|x| *x = (*x * 1.25).min(p_max));
        w = mmse_beamformer(&heff, &p, noise)?;
    }
    if !meets(&p, &w)? {
        // alternate least-power and MMSE updates
        for _ in 0..50 {
            let psi = vec![0.0; n];
            let zeta = vec![crate::linalg::ZERO; n];
            let zeros = vec![0.0; n];
            let prob = PowerProblem::new(&PowerInputs {
                heff: &heff,
                w: &w,
                psi: &psi,
                zeta: &zeta,
                weights: &zeros,
                offsets: &zeros,
                noise_w: noise,
                gamma_min,
                p_max,
            });
            match prob.min_power() {
                Ok(pmin) => {
                    p = pmin;
                    w = mmse_beamformer(&heff, &p, noise)?;
                    if meets(&p, &w)? {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
    }
    Ok(CommAllocation { p, w, phi })
}

/// One outer iteration of the communication loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommIter {
    pub iter: usize,
    pub min_rate_bps: f64,
    /// `maxₙ Lₙ / Rₙ` after the iteration.
    pub offload_latency: f64,
    pub max_xi_norm: f64,
    pub phase_steps: usize,
    pub last_kappa: f64,
    pub power_gap: Option<f64>,
    pub accepted_w: bool,
    pub accepted_p: bool,
    pub accepted_phi: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommTrace {
    pub initial_offload_latency: f64,
    /// Whether every user meets the SINR floor at the end.
    pub qos_met: bool,
    pub iters: Vec<CommIter>,
}

/// Fractional-programming loop over combiners, powers and the surface for
/// fixed offloaded bits. A block update is kept only if it does not raise the
/// worst offloading time and keeps the SINR floor.
pub fn algorithm2(
    ch: &ChannelSet,
    offload_bits: &[f64],
    comm0: &CommAllocation,
    opts: CommOptions,
    cfg: &SystemConfig,
) -> Result<(CommAllocation, FpState, CommTrace)> {
    let noise = cfg.noise_power_w();
    let bw = cfg.channel.bandwidth_hz;
    let gamma_min = cfg.gamma_min();
    let theta = cfg.solver.theta_step;

    let mut cur = comm0.clone();
    let mut ev = evaluate(ch, &cur, cfg)?;
    let mut proxy = offload_proxy(&ev.rates_bps, offload_bits);
    let mut margin = qos_margin(&ev.sinr, gamma_min);
    if ev.rates_bps.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::infeasible(Stage::Comm, "a user has zero rate at the start"));
    }
    let mut fp = FpState::new(&ev.rates_bps, offload_bits, theta)?;
    let mut trace = CommTrace {
        initial_offload_latency: proxy,
        qos_met: margin >= 1.0 - 1e-9,
        iters: Vec::new(),
    };
    if !offload_bits.iter().any(|l| *l > 0.0) {
        return Ok((cur, fp, trace));
    }

    // keeps `cand` if it neither raises the proxy nor breaks the floor
    let accept = |cand: &CommAllocation,
                  heff: Option<Vec<CVec>>,
                  proxy: f64,
                  margin: f64|
     -> Result<Option<(CommEval, f64, f64)>> {
        let ev = match heff {
            Some(h) => evaluate_with(h, cand, cfg)?,
            None => evaluate(ch, cand, cfg)?,
        };
        let px = offload_proxy(&ev.rates_bps, offload_bits);
        let mg = qos_margin(&ev.sinr, gamma_min);
        let floor_ok = mg >= 1.0 - 1e-9 || mg >= margin;
        Ok((px <= proxy && floor_ok).then_some((ev, px, mg)))
    };

    for iter in 0..cfg.solver.i_max {
        let prev_proxy = proxy;
        let (c, o) = fp.weights(offload_bits, bw);

        // combiners
        let w_new = mmse_beamformer(&ev.heff, &cur.p, noise)?;
        let cand = CommAllocation {
            w: w_new,
            ..cur.clone()
        };
        let mut accepted_w = false;
        if let Some((e, px, mg)) = accept(&cand, Some(ev.heff.clone()), proxy, margin)? {
            cur = cand;
            (ev, proxy, margin) = (e, px, mg);
            accepted_w = true;
        }

        // powers
        let mut accepted_p = false;
        let mut power_gap = None;
        if opts.optimize_power {
            fp.psi = update_psi(&ev.heff, &cur.w, &cur.p, noise)?;
            fp.zeta = update_zeta(&ev.heff, &cur.w, &cur.p, &fp.psi, noise)?;
            let prob = PowerProblem::new(&PowerInputs {
                heff: &ev.heff,
                w: &cur.w,
                psi: &fp.psi,
                zeta: &fp.zeta,
                weights: &c,
                offsets: &o,
                noise_w: noise,
                gamma_min,
                p_max: cfg.energy.p_max_w,
            });
            // an unreachable floor here may become reachable after the
            // surface step, so the block is skipped rather than failed
            match prob.solve() {
                Ok(sol) => {
                    power_gap = Some(sol.gap);
                    let cand = CommAllocation {
                        p: sol.p,
                        ..cur.clone()
                    };
                    if let Some((e, px, mg)) = accept(&cand, Some(ev.heff.clone()), proxy, margin)? {
                        cur = cand;
                        (ev, proxy, margin) = (e, px, mg);
                        accepted_p = true;
                    }
                }
                Err(Error::Infeasible { .. }) => power_gap = None,
                Err(e) => return Err(e),
            }
        }

        // surface
        let mut accepted_phi = false;
        let (mut max_xi_norm, mut phase_steps, mut last_kappa) = (0.0, 0, 0.0);
        if opts.optimize_phase {
            fp.psi = update_psi(&ev.heff, &cur.w, &cur.p, noise)?;
            fp.zeta = update_zeta(&ev.heff, &cur.w, &cur.p, &fp.psi, noise)?;
            let (phi, ptrace) = optimize_phase(
                &PhaseInputs {
                    ch,
                    w: &cur.w,
                    p: &cur.p,
                    psi: &fp.psi,
                    zeta: &fp.zeta,
                    weights: &c,
                    noise_w: noise,
                },
                &cur.phi,
                cfg.solver.phase_i_max,
            )
            .map_err(|e| e.at_stage(Stage::Phase))?;
            max_xi_norm = ptrace.max_xi_norm();
            phase_steps = ptrace.steps.len();
            last_kappa = ptrace.steps.last().map_or(0.0, |s| s.kappa);
            let cand = CommAllocation {
                phi,
                ..cur.clone()
            };
            if let Some((e, px, mg)) = accept(&cand, None, proxy, margin)? {
                cur = cand;
                (ev, proxy, margin) = (e, px, mg);
                accepted_phi = true;
            }
        }

        fp = update_chi_gamma(&fp, &ev.rates_bps, offload_bits, theta)?;
        trace.iters.push(CommIter {
            iter,
            min_rate_bps: ev.min_rate(),
            offload_latency: proxy,
            max_xi_norm,
            phase_steps,
            last_kappa,
            power_gap,
            accepted_w,
            accepted_p,
            accepted_phi,
        });
        if (prev_proxy - proxy).abs() < cfg.solver.epsilon * proxy {
            break;
        }
    }
    fp.psi = update_psi(&ev.heff, &cur.w, &cur.p, noise)?;
    fp.zeta = update_zeta(&ev.heff, &cur.w, &cur.p, &fp.psi, noise)?;
    trace.qos_met = margin >= 1.0 - 1e-9;
    Ok((cur, fp, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channels, LosFlags};
    use crate::irs::Arch;
    use crate::linalg::{cis, CMat, C64};
    use crate::model::{Layout, Position};

    fn small_cfg(n: usize, m: usize, k: usize, l: usize) -> SystemConfig {
        let mut cfg = SystemConfig::default();
        cfg.network.n_users = n;
        cfg.network.n_antennas = m;
        cfg.network.n_elements = k;
        cfg.network.n_groups = l;
        cfg
    }

    fn layout(n: usize) -> Layout {
        Layout {
            ues: (0..n)
                .map(|i| Position::ground(20.0 + 30.0 * i as f64, 60.0 + 10.0 * i as f64))
                .collect(),
            ap: Position::ground(75.0, -25.0),
            irs: Position::new(60.0, 65.0, 20.0),
        }
    }

    #[test]
    fn proxy_ignores_local_users() {
        assert_eq!(offload_proxy(&[1.0, 0.0], &[2.0, 0.0]), 2.0);
        assert_eq!(offload_proxy(&[1.0], &[0.0]), 0.0);
        assert!(offload_proxy(&[0.0], &[1.0]).is_infinite());
    }

    #[test]
    fn loop_is_monotone_and_deterministic() {
        let cfg = small_cfg(3, 4, 4, 2);
        let ch = draw_channels(&cfg, &layout(3), 11).unwrap();
        let phi = PhaseShift::identity(Arch::GroupConnected(2), 4).unwrap();
        let comm0 = initial_comm(&ch, phi, &cfg).unwrap();
        let bits = [1.2e5, 0.8e5, 1.5e5];
        let run = || algorithm2(&ch, &bits, &comm0, CommOptions::default(), &cfg).unwrap();
        let (a, _, ta) = run();
        let (b, _, tb) = run();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        let mut prev = ta.initial_offload_latency;
        for it in &ta.iters {
            assert!(it.offload_latency <= prev * (1.0 + 1e-6));
            prev = it.offload_latency;
        }
        assert!(ta.iters.len() <= cfg.solver.i_max);
        for w in &a.w {
            assert!((w.norm() - 1.0).abs() < 1e-9);
        }
        let ev = evaluate(&ch, &a, &cfg).unwrap();
        assert!(ta.qos_met);
        for g in &ev.sinr {
            assert!(*g >= cfg.gamma_min() * (1.0 - 1e-9));
        }
    }

    #[test]
    fn stationary_input_stops_after_one_iteration() {
        let cfg = small_cfg(2, 4, 4, 1);
        let ch = draw_channels(&cfg, &layout(2), 5).unwrap();
        let phi = PhaseShift::identity(Arch::FullyConnected, 4).unwrap();
        let comm0 = initial_comm(&ch, phi, &cfg).unwrap();
        let bits = [1e5, 1e5];
        let (a, _, _) = algorithm2(&ch, &bits, &comm0, CommOptions::default(), &cfg).unwrap();
        let (_, _, t) = algorithm2(&ch, &bits, &a, CommOptions::default(), &cfg).unwrap();
        assert!(t.iters.len() <= 2, "{} iterations", t.iters.len());
    }

    #[test]
    fn single_user_single_element_matches_joint_grid() {
        let mut cfg = small_cfg(1, 1, 1, 1);
        cfg.objective.gamma_min_db = -30.0;
        cfg.solver.epsilon = 1e-9;
        cfg.solver.i_max = 200;
        let hd = C64::new(0.8e-6, 0.6e-6);
        let g = C64::new(-0.8e-3, 0.6e-3);
        let hu = C64::new(0.6e-3, 0.8e-3);
        let ch = ChannelSet {
            h_direct: vec![CVec::from_element(1, hd)],
            g_irs_ap: CMat::from_element(1, 1, g),
            h_ue_irs: vec![CVec::from_element(1, hu)],
            los: LosFlags::default(),
        };
        let comm0 = initial_comm(&ch, PhaseShift::single_connected(&[0.0]), &cfg).unwrap();
        let (a, _, _) = algorithm2(&ch, &[1e5], &comm0, CommOptions::default(), &cfg).unwrap();
        let rate = evaluate(&ch, &a, &cfg).unwrap().rates_bps[0];
        let noise = cfg.noise_power_w();
        let mut best: f64 = 0.0;
        for i in 1..=100 {
            let p = cfg.energy.p_max_w * i as f64 / 100.0;
            for j in 0..10_000 {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / 10_000.0;
                let h = hd + g * cis(theta) * hu;
                best = best.max(cfg.channel.bandwidth_hz * (1.0 + p * h.norm_sqr() / noise).log2());
            }
        }
        assert!(rate >= best * (1.0 - 1e-3), "{rate} vs {best}");
    }
}
