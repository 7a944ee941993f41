//! MMSE receive combining at the AP.

use crate::error::Result;
use crate::linalg::{CMat, CVec, C64, ONE};

/// Unit-norm MMSE combiners `wₙ ∝ (Σ_{j≠n} p_j h_j h_jᴴ + σ² I)⁻¹ hₙ`.
///
/// The common phase `ζₙ` of the closed form is dropped: the SINR does not
/// depend on it. A zero direction falls back to the first canonical vector.
pub fn mmse_beamformer(heff: &[CVec], p: &[f64], noise_w: f64) -> Result<Vec<CVec>> {
    let m = heff.first().map_or(0, |h| h.len());
    (0..heff.len())
        .map(|n| {
            // scaled by 1/σ² for conditioning
            let mut r = CMat::identity(m, m);
            for (j, h) in heff.iter().enumerate() {
                if j != n && p[j] > 0.0 {
                    r += h * h.adjoint() * C64::new(p[j] / noise_w, 0.0);
                }
            }
            let v = match r.clone().cholesky() {
                Some(ch) => ch.solve(&heff[n]),
                None => r.lu().solve(&heff[n]).unwrap_or_else(|| heff[n].clone()),
            };
            let norm = v.norm();
            Ok(if norm > 0.0 && p[n] > 0.0 && norm.is_finite() {
                v / C64::new(norm, 0.0)
            } else {
                let mut e = CVec::zeros(m);
                e[0] = ONE;
                e
            })
        })
        .collect()
}
