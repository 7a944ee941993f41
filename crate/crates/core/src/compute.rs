//! Local/edge computation: latency and energy, the optimal task split for
//! fixed frequencies, min-max frequency allocation and their alternation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::model::{SystemConfig, UserTask};

/// Relative width at which the latency bisection stops.
const BISECTION_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeAllocation {
    /// Share of the UE CPU, in [0, 1].
    pub f_local: Vec<f64>,
    /// Share of the edge server, in [0, 1], summing to at most one.
    pub f_edge: Vec<f64>,
    /// Fraction of the task computed locally.
    pub beta: Vec<f64>,
}

impl ComputeAllocation {
    pub fn n_users(&self) -> usize {
        self.beta.len()
    }

    /// Bits each user sends to the edge.
    pub fn offload_bits(&self, tasks: &[UserTask]) -> Vec<f64> {
        tasks
            .iter()
            .zip(&self.beta)
            .map(|(t, b)| (1.0 - b) * t.bits())
            .collect()
    }

    pub fn edge_share_sum(&self) -> f64 {
        self.f_edge.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub t_local: Vec<f64>,
    pub t_offload: Vec<f64>,
    pub t_edge_compute: Vec<f64>,
    pub t_edge_total: Vec<f64>,
    pub t_task: Vec<f64>,
    pub t_hover: f64,
    pub e_local: Vec<f64>,
    pub e_offload: Vec<f64>,
    /// `e_local + e_offload + P_r t_offload` per user.
    pub e_user: Vec<f64>,
}

impl LatencyBreakdown {
    pub fn max_task_latency(&self) -> f64 {
        self.t_task.iter().copied().fold(0.0, f64::max)
    }

    pub fn hover_energy(&self, cfg: &SystemConfig) -> f64 {
        cfg.energy.p_hover_w * self.t_hover
    }
}

fn offload_time(task: &UserTask, beta: f64, rate: f64, n: usize) -> Result<f64> {
    if beta >= 1.0 {
        return Ok(0.0);
    }
    if !(rate > 0.0) {
        return Err(Error::DivisionByZero(format!(
            "user {n} offloads with zero rate"
        )));
    }
    Ok((1.0 - beta) * task.bits() / rate)
}

/// Per-user timing and energy. `rates` in bit/s, `p` in watts.
pub fn latency_energy(
    tasks: &[UserTask],
    alloc: &ComputeAllocation,
    rates: &[f64],
    p: &[f64],
    cfg: &SystemConfig,
) -> Result<LatencyBreakdown> {
    let n_users = tasks.len();
    for (what, len) in [
        ("allocation users", alloc.n_users()),
        ("rates", rates.len()),
        ("powers", p.len()),
    ] {
        if len != n_users {
            return Err(Error::Dimension {
                what,
                expected: n_users,
                got: len,
            });
        }
    }
    let f_max = cfg.compute.f_user_max_hz;
    let fs_max = cfg.compute.f_mec_max_hz;
    let eps = cfg.compute.eps_ceff;
    let mut out = LatencyBreakdown {
        t_local: Vec::with_capacity(n_users),
        t_offload: Vec::with_capacity(n_users),
        t_edge_compute: Vec::with_capacity(n_users),
        t_edge_total: Vec::with_capacity(n_users),
        t_task: Vec::with_capacity(n_users),
        t_hover: 0.0,
        e_local: Vec::with_capacity(n_users),
        e_offload: Vec::with_capacity(n_users),
        e_user: Vec::with_capacity(n_users),
    };
    for (n, task) in tasks.iter().enumerate() {
        let beta = alloc.beta[n];
        let a = alloc.f_local[n] * f_max;
        let b = alloc.f_edge[n] * fs_max;
        let c = task.cycles();
        let (t_l, e_l) = if beta <= 0.0 {
            (0.0, 0.0)
        } else if a > 0.0 {
            (beta * c / a, eps * a * a * beta * c)
        } else {
            return Err(Error::DivisionByZero(format!(
                "user {n} computes locally with zero frequency"
            )));
        };
        let t_o = offload_time(task, beta, rates[n], n)?;
        let t_s = if beta >= 1.0 {
            0.0
        } else if b > 0.0 {
            (1.0 - beta) * c / b
        } else {
            return Err(Error::DivisionByZero(format!(
                "user {n} offloads with zero edge share"
            )));
        };
        let e_o = p[n] * t_o;
        out.t_local.push(t_l);
        out.t_offload.push(t_o);
        out.t_edge_compute.push(t_s);
        out.t_edge_total.push(t_o + t_s);
        out.t_task.push(t_l.max(t_o + t_s));
        out.e_local.push(e_l);
        out.e_offload.push(e_o);
        out.e_user.push(e_l + e_o + cfg.energy.p_rx_w * t_o);
    }
    out.t_hover = out.t_edge_total.iter().copied().fold(0.0, f64::max);
    Ok(out)
}

/// Split that equalizes local and edge latency: with `a = fˡ f_max`,
/// `b = fˢ f_s_max`, `β = a(RC + bS) / (RC(a+b) + S a b)`.
pub fn beta_closed_form(task: &UserTask, f_l: f64, f_s: f64, rate: f64, cfg: &SystemConfig) -> Result<f64> {
    let a = f_l * cfg.compute.f_user_max_hz;
    let b = f_s * cfg.compute.f_mec_max_hz;
    beta_from_speeds(task.cycles(), task.bits(), a, b, rate)
}

/// Same as [`beta_closed_form`] with absolute speeds in cycles/s.
pub fn beta_from_speeds(c: f64, s: f64, a: f64, b: f64, rate: f64) -> Result<f64> {
    let num = a * (rate * c + b * s);
    let den = rate * c * (a + b) + s * a * b;
    if !(den > 0.0) {
        if a > 0.0 {
            return Ok(1.0);
        }
        return Err(Error::DivisionByZero(
            "split undefined without local or edge capacity".into(),
        ));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Largest local share allowed by the energy cap for a given split.
pub fn local_share_cap(task: &UserTask, beta: f64, t_offload: f64, p: f64, cfg: &SystemConfig) -> f64 {
    if beta <= 0.0 {
        return 1.0;
    }
    let budget = cfg.energy.e_max_j - (p + cfg.energy.p_rx_w) * t_offload;
    if !(budget > 0.0) {
        return 0.0;
    }
    ((budget / (cfg.compute.eps_ceff * beta * task.cycles())).sqrt() / cfg.compute.f_user_max_hz)
        .min(1.0)
}

/// Splits in [0, 1] that keep the user's energy within budget at local speed `a`.
pub fn energy_feasible_beta(
    task: &UserTask,
    a: f64,
    rate: f64,
    p: f64,
    cfg: &SystemConfig,
) -> Option<(f64, f64)> {
    let e_max = cfg.energy.e_max_j;
    let e1 = cfg.compute.eps_ceff * a * a * task.cycles();
    if !(rate > 0.0) {
        return (e1 <= e_max).then_some((1.0, 1.0));
    }
    let e0 = (p + cfg.energy.p_rx_w) * task.bits() / rate;
    // E(β) = e0 + β (e1 − e0)
    match (e0 <= e_max, e1 <= e_max) {
        (true, true) => Some((0.0, 1.0)),
        (false, false) => None,
        (true, false) => Some((0.0, (e_max - e0) / (e1 - e0))),
        (false, true) => Some(((e0 - e_max) / (e0 - e1), 1.0)),
    }
}

/// Per-user data the latency bisection needs.
struct UserReq {
    beta: f64,
    c: f64,
    t_o: f64,
    /// Local share cap; `None` when the split is fully offloaded.
    fl_cap: Option<f64>,
    /// Fixed local share, if the local CPU is not optimized.
    fl_fixed: Option<f64>,
}

/// How the UE CPU share is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LocalMode {
    #[default]
    Optimized,
    Fixed(f64),
}

/// Min-max allocation of local and edge shares for fixed splits, by bisection
/// on the target latency. Returns the allocation and the achieved max latency.
pub fn solve_compute_allocation(
    tasks: &[UserTask],
    beta: &[f64],
    rates: &[f64],
    p: &[f64],
    mode: LocalMode,
    cfg: &SystemConfig,
) -> Result<(ComputeAllocation, f64)> {
    let n_users = tasks.len();
    let f_max = cfg.compute.f_user_max_hz;
    let fs_max = cfg.compute.f_mec_max_hz;
    let mut reqs = Vec::with_capacity(n_users);
    let mut t_lo: f64 = 0.0;
    for (n, task) in tasks.iter().enumerate() {
        let b = beta[n];
        let t_o = offload_time(task, b, rates[n], n)?;
        let radio = (p[n] + cfg.energy.p_rx_w) * t_o;
        if b > 0.0 && radio >= cfg.energy.e_max_j || radio > cfg.energy.e_max_j {
            return Err(Error::infeasible(
                Stage::Compute,
                format!("user {n}: offloading alone exhausts the energy budget"),
            ));
        }
        let c = task.cycles();
        let (fl_cap, fl_fixed) = if b > 0.0 {
            let cap = local_share_cap(task, b, t_o, p[n], cfg);
            match mode {
                LocalMode::Optimized => (Some(cap), None),
                LocalMode::Fixed(f) => {
                    if f > cap * (1.0 + 1e-12) {
                        return Err(Error::infeasible(
                            Stage::Compute,
                            format!("user {n}: fixed local share exceeds the energy cap"),
                        ));
                    }
                    (Some(f), Some(f))
                }
            }
        } else {
            (None, None)
        };
        if let Some(cap) = fl_cap {
            if !(cap > 0.0) {
                return Err(Error::infeasible(
                    Stage::Compute,
                    format!("user {n}: no local frequency satisfies the energy cap"),
                ));
            }
            t_lo = t_lo.max(b * c / (cap * f_max));
        }
        if b < 1.0 {
            t_lo = t_lo.max(t_o + (1.0 - b) * c / fs_max);
        }
        reqs.push(UserReq {
            beta: b,
            c,
            t_o,
            fl_cap,
            fl_fixed,
        });
    }

    let edge_need = |t: f64| -> f64 {
        reqs.iter()
            .filter(|r| r.beta < 1.0)
            .map(|r| {
                let slack = t - r.t_o;
                if slack > 0.0 {
                    (1.0 - r.beta) * r.c / (slack * fs_max)
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    };
    // local requirements hold for every t >= t_lo by construction
    let feasible = |t: f64| edge_need(t) <= 1.0;

    let mut lo = t_lo;
    let mut hi = if t_lo > 0.0 { t_lo } else { 1e-12 };
    let mut guard = 0;
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::infeasible(Stage::Compute, "no finite latency is feasible"));
        }
    }
    while hi - lo > BISECTION_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_star = hi;

    let mut f_edge: Vec<f64> = reqs
        .iter()
        .map(|r| {
            if r.beta < 1.0 {
                (1.0 - r.beta) * r.c / ((t_star - r.t_o) * fs_max)
            } else {
                0.0
            }
        })
        .collect();
    // hand leftover edge capacity to the offloading users
    let used: f64 = f_edge.iter().sum();
    if used > 0.0 && used < 1.0 {
        let scale = 1.0 / used;
        for f in f_edge.iter_mut() {
            *f = (*f * scale).min(1.0);
        }
    }
    let f_local = reqs
        .iter()
        .map(|r| r.fl_fixed.or(r.fl_cap).unwrap_or(1.0))
        .collect();
    let alloc = ComputeAllocation {
        f_local,
        f_edge,
        beta: beta.to_vec(),
    };
    let lat = latency_energy(tasks, &alloc, rates, p, cfg)?;
    Ok((alloc, lat.max_task_latency()))
}

/// Objective trace of the split / frequency alternation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComputeTrace {
    pub objective: Vec<f64>,
}

/// Energy-feasible closed-form split for every user at the given shares.
pub fn split_step(
    tasks: &[UserTask],
    f_local: &[f64],
    f_edge: &[f64],
    rates: &[f64],
    p: &[f64],
    cfg: &SystemConfig,
) -> Result<Vec<f64>> {
    tasks
        .iter()
        .enumerate()
        .map(|(n, task)| {
            let a = f_local[n] * cfg.compute.f_user_max_hz;
            let b = f_edge[n] * cfg.compute.f_mec_max_hz;
            let beta = beta_from_speeds(task.cycles(), task.bits(), a, b, rates[n])?;
            let (lo, hi) = energy_feasible_beta(task, a, rates[n], p[n], cfg).ok_or_else(|| {
                Error::infeasible(
                    Stage::Compute,
                    format!("user {n}: no split satisfies the energy cap"),
                )
            })?;
            Ok(beta.clamp(lo, hi))
        })
        .collect()
}

/// Starting shares: even edge split and the fastest local share that is
/// energy-feasible for a fully local task.
pub fn initial_shares(tasks: &[UserTask], mode: LocalMode, cfg: &SystemConfig) -> (Vec<f64>, Vec<f64>) {
    let n = tasks.len();
    let f_local = tasks
        .iter()
        .map(|t| match mode {
            LocalMode::Fixed(f) => f,
            LocalMode::Optimized => local_share_cap(t, 1.0, 0.0, 0.0, cfg),
        })
        .collect();
    (f_local, vec![1.0 / n as f64; n])
}

/// Alternates the closed-form split and the min-max frequency allocation.
/// A warm-start split, if given and feasible, seeds the iteration.
pub fn algorithm1(
    tasks: &[UserTask],
    rates: &[f64],
    p: &[f64],
    mode: LocalMode,
    warm_beta: Option<&[f64]>,
    cfg: &SystemConfig,
) -> Result<(ComputeAllocation, ComputeTrace)> {
    let eps = cfg.solver.epsilon;
    let i_max = cfg.solver.i_max;
    let mut trace = ComputeTrace::default();
    let mut best: Option<(ComputeAllocation, f64)> = None;
    if let Some(b) = warm_beta {
        if let Ok(sol) = solve_compute_allocation(tasks, b, rates, p, mode, cfg) {
            trace.objective.push(sol.1);
            best = Some(sol);
        }
    }
    let (mut f_local, mut f_edge) = match &best {
        Some((a, _)) => (a.f_local.clone(), a.f_edge.clone()),
        None => initial_shares(tasks, mode, cfg),
    };
    while trace.objective.len() < i_max {
        let beta = split_step(tasks, &f_local, &f_edge, rates, p, cfg)?;
        let (alloc, obj) = solve_compute_allocation(tasks, &beta, rates, p, mode, cfg)?;
        let prev = best.as_ref().map(|(_, o)| *o);
        if let Some(prev) = prev {
            if obj > prev {
                break;
            }
        }
        trace.objective.push(obj);
        f_local = alloc.f_local.clone();
        f_edge = alloc.f_edge.clone();
        best = Some((alloc, obj));
        if let Some(prev) = prev {
            if (prev - obj).abs() <= eps * obj {
                break;
            }
        }
    }
    let (alloc, _) = best.ok_or_else(|| Error::infeasible(Stage::Compute, "no iteration completed"))?;
    Ok((alloc, trace))
}

/// Fully local execution at the fastest energy-feasible local share.
pub fn local_only(tasks: &[UserTask], cfg: &SystemConfig) -> ComputeAllocation {
    let n = tasks.len();
    ComputeAllocation {
        f_local: tasks
            .iter()
            .map(|t| local_share_cap(t, 1.0, 0.0, 0.0, cfg))
            .collect(),
        f_edge: vec![0.0; n],
        beta: vec![1.0; n],
    }
}

/// Best binary split: greedily moves users from the edge to local execution
/// while the max latency drops, and keeps the better of that and all-local.
pub fn binary_allocation(
    tasks: &[UserTask],
    rates: &[f64],
    p: &[f64],
    cfg: &SystemConfig,
) -> Result<(ComputeAllocation, f64)> {
    let n = tasks.len();
    let eval = |beta: &[f64]| solve_compute_allocation(tasks, beta, rates, p, LocalMode::Optimized, cfg).ok();
    let mut beta = vec![0.0; n];
    let mut best = eval(&beta);
    loop {
        let mut step: Option<(usize, (ComputeAllocation, f64))> = None;
        for u in 0..n {
            if beta[u] == 1.0 {
                continue;
            }
            let mut trial = beta.clone();
            trial[u] = 1.0;
            if let Some(sol) = eval(&trial) {
                let beats_step = step.as_ref().is_none_or(|(_, s)| sol.1 < s.1);
                let beats_best = best.as_ref().is_none_or(|b| sol.1 < b.1);
                if beats_step && beats_best {
                    step = Some((u, sol));
                }
            }
        }
        match step {
            Some((u, sol)) => {
                beta[u] = 1.0;
                best = Some(sol);
            }
            None => break,
        }
    }
    if let Some(local) = eval(&vec![1.0; n]) {
        if best.as_ref().is_none_or(|b| local.1 < b.1) {
            best = Some(local);
        }
    }
    best.ok_or_else(|| Error::infeasible(Stage::Compute, "no binary split is feasible"))
}
