//! Fractional-programming auxiliaries: Lagrange-dual `ψ`, quadratic-transform
//! `ζ`, and the latency-ratio multipliers `χ`, `Γ`.

use crate::channel::all_sinr;
use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct FpState {
    pub psi: Vec<f64>,
    pub zeta: Vec<C64>,
    pub chi: Vec<f64>,
    pub gamma_aux: Vec<f64>,
    pub theta_step: f64,
}

impl FpState {
    /// Starts `χ`, `Γ` at their fixed point for the given rates.
    pub fn new(rates_bps: &[f64], offload_bits: &[f64], theta_step: f64) -> Result<FpState> {
        let n = rates_bps.len();
        let mut st = FpState {
            psi: vec![0.0; n],
            zeta: vec![C64::new(0.0, 0.0); n],
            chi: vec![0.0; n],
            gamma_aux: vec![0.0; n],
            theta_step: 1.0,
        };
        st = update_chi_gamma(&st, rates_bps, offload_bits, 1.0)?;
        st.theta_step = theta_step;
        Ok(st)
    }

    /// Rate weights `χΓ` and offsets `χL` of the max-min objective, scaled
    /// by a common positive factor so the largest weight is one.
    pub fn weights(&self, offload_bits: &[f64], bandwidth_hz: f64) -> (Vec<f64>, Vec<f64>) {
        let mut c: Vec<f64> = self
            .chi
            .iter()
            .zip(&self.gamma_aux)
            .map(|(x, g)| x * g * bandwidth_hz)
            .collect();
        let mut o: Vec<f64> = self.chi.iter().zip(offload_bits).map(|(x, l)| x * l).collect();
        let scale = c.iter().copied().fold(0.0, f64::max);
        if scale > 0.0 {
            c.iter_mut().for_each(|v| *v /= scale);
            o.iter_mut().for_each(|v| *v /= scale);
        }
        (c, o)
    }
}

/// `ψₙ = γₙ`.
pub fn update_psi(heff: &[CVec], w: &[CVec], p: &[f64], noise_w: f64) -> Result<Vec<f64>> {
    all_sinr(heff, w, p, noise_w)
}

/// `Σ_j p_j |wₙᴴ h_j|² + σ² ‖wₙ‖²`, signal included.
pub fn total_received(heff: &[CVec], w: &CVec, p: &[f64], noise_w: f64) -> f64 {
    heff.iter()
        .zip(p)
        .map(|(h, pj)| pj * w.dotc(h).norm_sqr())
        .sum::<f64>()
        + noise_w * w.norm_squared()
}

/// `ζₙ = √((1+ψₙ)pₙ) wₙᴴhₙ / (Σ_j p_j |wₙᴴh_j|² + σ²‖wₙ‖²)`.
pub fn update_zeta(
    heff: &[CVec],
    w: &[CVec],
    p: &[f64],
    psi: &[f64],
    noise_w: f64,
) -> Result<Vec<C64>> {
    (0..heff.len())
        .map(|n| {
            let den = total_received(heff, &w[n], p, noise_w);
            if !(den > 0.0) {
                return Err(Error::DivisionByZero(format!(
                    "quadratic transform denominator of user {n}"
                )));
            }
            let amp = ((1.0 + psi[n]) * p[n]).sqrt();
            Ok(w[n].dotc(&heff[n]) * (amp / den))
        })
        .collect()
}

/// Dual-transformed rate `log₂(1+ψ) − ψ/ln2 + (1+ψ) γ/(1+γ)/ln2`, with the
/// SINR ratio kept exact.
pub fn dual_rate(psi: f64, sinr: f64) -> f64 {
    ((1.0 + psi).ln() - psi + (1.0 + psi) * sinr / (1.0 + sinr)) / std::f64::consts::LN_2
}

/// Quadratic-transform rate `R̂ₙ` in bit/s/Hz.
pub fn fp_rate(
    heff: &[CVec],
    w: &[CVec],
    p: &[f64],
    psi: &[f64],
    zeta: &[C64],
    noise_w: f64,
    n: usize,
) -> f64 {
    let amp = ((1.0 + psi[n]) * p[n]).sqrt();
    let cross = (zeta[n].conj() * w[n].dotc(&heff[n])).re;
    let den = total_received(heff, &w[n], p, noise_w);
    ((1.0 + psi[n]).ln() - psi[n] + 2.0 * amp * cross - zeta[n].norm_sqr() * den)
        / std::f64::consts::LN_2
}

/// Damped move towards `χ = 1/R`, `Γ = L/R`.
pub fn update_chi_gamma(
    fp: &FpState,
    rates_bps: &[f64],
    offload_bits: &[f64],
    theta: f64,
) -> Result<FpState> {
    let mut out = fp.clone();
    for n in 0..rates_bps.len() {
        let r = rates_bps[n];
        if !(r > 0.0) {
            return Err(Error::DivisionByZero(format!("rate of user {n} is zero")));
        }
        out.chi[n] = (1.0 - theta) * fp.chi[n] + theta / r;
        out.gamma_aux[n] = (1.0 - theta) * fp.gamma_aux[n] + theta * offload_bits[n] / r;
    }
    Ok(out)
}
