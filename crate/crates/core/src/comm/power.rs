//! Max-min transmit power over the quadratic-transform rates, solved with a
//! log-barrier interior-point method on the epigraph form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Stage};
use crate::linalg::{CVec, C64};

/// Target duality gap of the barrier method.
const GAP_TOL: f64 = 1e-10;
const NEWTON_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 200;
const BARRIER_GROWTH: f64 = 20.0;

/// Power subproblem with `w`, `ψ`, `ζ` and the objective weights fixed.
/// Powers are handled internally as fractions `u = p / p_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    /// `gain[n][j] = p_max |wₙᴴ h_j|²`.
    gain: Vec<Vec<f64>>,
    /// `√p_max · Re(ζₙ* wₙᴴ hₙ)`.
    cross: Vec<f64>,
    psi: Vec<f64>,
    zeta2: Vec<f64>,
    /// `σ² ‖wₙ‖²`.
    noise: Vec<f64>,
    weights: Vec<f64>,
    offsets: Vec<f64>,
    active: Vec<bool>,
    gamma_min: f64,
    p_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    pub p: Vec<f64>,
    /// `minₙ cₙ R̂ₙ − oₙ` over the active users.
    pub objective: f64,
    /// Duality-gap bound of the returned point.
    pub gap: f64,
}

pub struct PowerInputs<'a> {
    pub heff: &'a [CVec],
    pub w: &'a [CVec],
    pub psi: &'a [f64],
    pub zeta: &'a [C64],
    pub weights: &'a [f64],
    pub offsets: &'a [f64],
    pub noise_w: f64,
    pub gamma_min: f64,
    pub p_max: f64,
}

impl PowerProblem {
    pub fn new(inp: &PowerInputs<'_>) -> PowerProblem {
        let n_users = inp.heff.len();
        let gain = (0..n_users)
            .map(|n| {
                inp.heff
                    .iter()
                    .map(|h| inp.p_max * inp.w[n].dotc(h).norm_sqr())
                    .collect()
            })
            .collect();
        let cross = (0..n_users)
            .map(|n| inp.p_max.sqrt() * (inp.zeta[n].conj() * inp.w[n].dotc(&inp.heff[n])).re)
            .collect();
        PowerProblem {
            gain,
            cross,
            psi: inp.psi.to_vec(),
            zeta2: inp.zeta.iter().map(|z| z.norm_sqr()).collect(),
            noise: inp.w.iter().map(|w| inp.noise_w * w.norm_squared()).collect(),
            weights: inp.weights.to_vec(),
            offsets: inp.offsets.to_vec(),
            active: inp.weights.iter().map(|&c| c > 0.0).collect(),
            gamma_min: inp.gamma_min,
            p_max: inp.p_max,
        }
    }

    pub fn n_users(&self) -> usize {
        self.gain.len()
    }

    fn rate_u(&self, u: &[f64], n: usize) -> f64 {
        let interf: f64 = self.gain[n].iter().zip(u).map(|(g, x)| g * x).sum();
        let v = (1.0 + self.psi[n]).ln() - self.psi[n]
            + 2.0 * (1.0 + self.psi[n]).sqrt() * self.cross[n] * u[n].max(0.0).sqrt()
            - self.zeta2[n] * (interf + self.noise[n]);
        v / std::f64::consts::LN_2
    }

    /// Quadratic-transform rate of user `n` at powers `p`, in bit/s/Hz.
    pub fn fp_rate(&self, p: &[f64], n: usize) -> f64 {
        let u: Vec<f64> = p.iter().map(|x| x / self.p_max).collect();
        self.rate_u(&u, n)
    }

    fn objective_u(&self, u: &[f64]) -> f64 {
        (0..self.n_users())
            .filter(|&n| self.active[n])
            .map(|n| self.weights[n] * self.rate_u(u, n) - self.offsets[n])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn objective(&self, p: &[f64]) -> f64 {
        let u: Vec<f64> = p.iter().map(|x| x / self.p_max).collect();
        self.objective_u(&u)
    }

    /// QoS slack of user `n` normalized by its noise term.
    fn qos_u(&self, u: &[f64], n: usize) -> f64 {
        let interf: f64 = self.gain[n]
            .iter()
            .zip(u)
            .enumerate()
            .filter(|(j, _)| *j != n)
            .map(|(_, (g, x))| g * x)
            .sum();
        (u[n] * self.gain[n][n] - self.gamma_min * interf) / self.noise[n] - self.gamma_min
    }

    pub fn qos_satisfied(&self, p: &[f64], tol: f64) -> bool {
        let u: Vec<f64> = p.iter().map(|x| x / self.p_max).collect();
        (0..self.n_users()).all(|n| self.qos_u(&u, n) >= -tol * self.gamma_min.max(1.0))
    }

    /// Least powers meeting every QoS constraint with equality.
    pub fn min_power(&self) -> Result<Vec<f64>> {
        let n = self.n_users();
        if self.gamma_min <= 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for i in 0..n {
            let own = self.gain[i][i];
            if !(own > 0.0) {
                return Err(Error::infeasible(
                    Stage::Power,
                    format!("user {i} has no useful signal for the SINR floor"),
                ));
            }
            for j in 0..n {
                if j != i {
                    a[(i, j)] = -self.gamma_min * self.gain[i][j] / own;
                }
            }
            b[i] = self.gamma_min * self.noise[i] / own;
        }
        let u = a.lu().solve(&b).ok_or_else(|| {
            Error::infeasible(Stage::Power, "SINR floor system is singular")
        })?;
        if let Some((i, _)) = u
            .iter()
            .enumerate()
            .filter(|(_, v)| !(**v > 0.0 && **v <= 1.0))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        {
            return Err(Error::infeasible(
                Stage::Power,
                format!(
                    "SINR floor {:.3} dB unreachable: user {i} is the tightest",
                    10.0 * self.gamma_min.log10()
                ),
            ));
        }
        Ok(u.iter().map(|x| x * self.p_max).collect())
    }

    /// Strictly feasible starting fractions.
    fn interior_start(&self) -> Result<Vec<f64>> {
        let n = self.n_users();
        if self.gamma_min <= 0.0 {
            return Ok(vec![0.5; n]);
        }
        let u_star: Vec<f64> = self.min_power()?.iter().map(|p| p / self.p_max).collect();
        let top = u_star.iter().copied().fold(0.0, f64::max);
        let delta = (0.5 * (1.0 / top - 1.0)).min(1.0);
        if !(delta > 0.0) {
            return Err(Error::infeasible(
                Stage::Power,
                "SINR floor leaves no power margin",
            ));
        }
        Ok(u_star.iter().map(|x| x * (1.0 + delta)).collect())
    }

    fn n_constraints(&self) -> usize {
        let active = self.active.iter().filter(|a| **a).count();
        let qos = if self.gamma_min > 0.0 { self.n_users() } else { 0 };
        active + qos + 2 * self.n_users()
    }

    /// Barrier value, gradient and Hessian at `x = (u, t)`; `None` outside
    /// the strict interior.
    fn barrier(&self, x: &DVector<f64>, s: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.n_users();
        let dim = n + 1;
        let u: Vec<f64> = x.iter().take(n).copied().collect();
        let t = x[n];
        let mut f = -s * t;
        let mut g = DVector::<f64>::zeros(dim);
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        g[n] = -s;

        let mut add_log = |slack: f64, grad: &DVector<f64>, hess: Option<&DMatrix<f64>>, f: &mut f64| {
            *f -= slack.ln();
            g.axpy(-1.0 / slack, grad, 1.0);
            h.ger(1.0 / (slack * slack), grad, grad, 1.0);
            if let Some(hs) = hess {
                h -= hs * (1.0 / slack);
            }
        };

        for j in 0..n {
            if !(u[j] > 0.0 && u[j] < 1.0) {
                return None;
            }
            let mut e = DVector::<f64>::zeros(dim);
            e[j] = 1.0;
            add_log(u[j], &e, None, &mut f);
            e[j] = -1.0;
            add_log(1.0 - u[j], &e, None, &mut f);
        }
        if self.gamma_min > 0.0 {
            for i in 0..n {
                let slack = self.qos_u(&u, i);
                if !(slack > 0.0) {
                    return None;
                }
                let mut grad = DVector::<f64>::zeros(dim);
                for j in 0..n {
                    grad[j] = if j == i {
                        self.gain[i][i] / self.noise[i]
                    } else {
                        -self.gamma_min * self.gain[i][j] / self.noise[i]
                    };
                }
                add_log(slack, &grad, None, &mut f);
            }
        }
        let ln2 = std::f64::consts::LN_2;
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let c = self.weights[i];
            let slack = c * self.rate_u(&u, i) - self.offsets[i] - t;
            if !(slack > 0.0) {
                return None;
            }
            let root = (1.0 + self.psi[i]).sqrt() * self.cross[i];
            let mut grad = DVector::<f64>::zeros(dim);
            for j in 0..n {
                grad[j] = -c * self.zeta2[i] * self.gain[i][j] / ln2;
            }
            grad[i] += c * root / u[i].sqrt() / ln2;
            grad[n] = -1.0;
            let mut hess = DMatrix::<f64>::zeros(dim, dim);
            hess[(i, i)] = -0.5 * c * root * u[i].powf(-1.5) / ln2;
            add_log(slack, &grad, Some(&hess), &mut f);
        }
        Some((f, g, h))
    }

    /// Maximizes `minₙ cₙ R̂ₙ − oₙ` subject to the SINR floor and `0 ≤ p ≤ p_max`.
    pub fn solve(&self) -> Result<PowerSolution> {
        let n = self.n_users();
        let u0 = self.interior_start()?;
        if !self.active.iter().any(|a| *a) {
            return Ok(PowerSolution {
                p: u0.iter().map(|x| x * self.p_max).collect(),
                objective: f64::INFINITY,
                gap: 0.0,
            });
        }
        let obj0 = self.objective_u(&u0);
        let mut x = DVector::<f64>::zeros(n + 1);
        for j in 0..n {
            x[j] = u0[j];
        }
        x[n] = obj0 - 1.0 - 0.1 * obj0.abs();
        let m = self.n_constraints() as f64;
        let mut s = 1.0;
        loop {
            self.center(&mut x, s)?;
            if m / s < GAP_TOL {
                break;
            }
            s *= BARRIER_GROWTH;
        }
        let u: Vec<f64> = x.iter().take(n).copied().collect();
        Ok(PowerSolution {
            objective: self.objective_u(&u),
            p: u.iter().map(|v| v * self.p_max).collect(),
            gap: m / s,
        })
    }

    fn center(&self, x: &mut DVector<f64>, s: f64) -> Result<()> {
        let dim = x.len();
        for _ in 0..MAX_NEWTON {
            let (f, g, h) = self
                .barrier(x, s)
                .ok_or_else(|| Error::infeasible(Stage::Power, "left the interior"))?;
            let dx = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    let reg = h + DMatrix::<f64>::identity(dim, dim) * 1e-12;
                    reg.lu()
                        .solve(&(-&g))
                        .ok_or_else(|| Error::infeasible(Stage::Power, "singular Newton system"))?
                }
            };
            let slope = g.dot(&dx);
            if -slope / 2.0 <= NEWTON_TOL || !slope.is_finite() {
                return Ok(());
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let cand = &*x + &dx * alpha;
                if let Some((fc, _, _)) = self.barrier(&cand, s) {
                    if fc <= f + 0.25 * alpha * slope {
                        *x = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                return Ok(());
            }
        }
        Ok(())
    }
}
