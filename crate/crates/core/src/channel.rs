//! Link synthesis, composite channels through the IRS, SINR and rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irs::PhaseShift;
use crate::linalg::{cis, CMat, CVec, C64};
use crate::model::{Layout, SystemConfig};

/// Reference distance of the path-loss model, in meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// UE -> AP, one length-M vector per user.
    pub h_direct: Vec<CVec>,
    /// IRS -> AP, M x K.
    pub g_irs_ap: CMat,
    /// UE -> IRS, one length-K vector per user.
    pub h_ue_irs: Vec<CVec>,
    pub los: LosFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LosFlags {
    pub direct: Vec<bool>,
    pub ue_irs: Vec<bool>,
    pub irs_ap: bool,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.h_direct.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.g_irs_ap.nrows()
    }

    pub fn n_elements(&self) -> usize {
        self.g_irs_ap.ncols()
    }

    /// Same links with the reflected path removed.
    pub fn without_irs(&self) -> ChannelSet {
        let mut out = self.clone();
        out.g_irs_ap.fill(C64::new(0.0, 0.0));
        out
    }

    pub fn check_dims(&self) -> Result<()> {
        let (m, k) = self.g_irs_ap.shape();
        let n = self.h_direct.len();
        if self.h_ue_irs.len() != n {
            return Err(Error::Dimension {
                what: "h_ue_irs users",
                expected: n,
                got: self.h_ue_irs.len(),
            });
        }
        for h in &self.h_direct {
            if h.len() != m {
                return Err(Error::Dimension {
                    what: "h_direct length",
                    expected: m,
                    got: h.len(),
                });
            }
        }
        for h in &self.h_ue_irs {
            if h.len() != k {
                return Err(Error::Dimension {
                    what: "h_ue_irs length",
                    expected: k,
                    got: h.len(),
                });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.h_direct
            .iter()
            .chain(self.h_ue_irs.iter())
            .flat_map(|v| v.iter())
            .chain(self.g_irs_ap.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub sinr: f64,
    pub rate_bps: f64,
}

/// Uniform-linear-array response: entry `i` is `exp(-j i 2π (d0/λ) ϑ)`.
pub fn steering_vector(dir_cosine: f64, n_elems: usize, spacing_ratio: f64) -> CVec {
    CVec::from_fn(n_elems, |i, _| {
        cis(-(i as f64) * 2.0 * std::f64::consts::PI * spacing_ratio * dir_cosine)
    })
}

/// `PL0 + 10 α log10(d / d0) + η`.
pub fn path_loss_db(d: f64, alpha: f64, los: bool, cfg: &SystemConfig) -> Result<f64> {
    if !(d >= REFERENCE_DISTANCE_M) {
        return Err(Error::InsideReferenceDistance(d));
    }
    let eta = if los {
        cfg.channel.eta_los_db
    } else {
        cfg.channel.eta_nlos_db
    };
    Ok(cfg.channel.pl0_db + 10.0 * alpha * (d / REFERENCE_DISTANCE_M).log10() + eta)
}

/// Linear power gain `10^(-PL/10)`.
pub fn path_gain(d: f64, alpha: f64, los: bool, cfg: &SystemConfig) -> Result<f64> {
    Ok(10f64.powf(-path_loss_db(d, alpha, los, cfg)? / 10.0))
}

/// Draws every link for one realization. Distances shorter than the
/// reference distance are clamped to it.
pub fn draw_channels(cfg: &SystemConfig, layout: &Layout, seed: u64) -> Result<ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = layout.ues.len();
    let m = cfg.network.n_antennas;
    let k = cfg.network.n_elements;
    let spacing = cfg.channel.spacing_ratio;
    let alpha_d = cfg.channel.alpha_direct;
    let alpha_a = cfg.channel.alpha_air;
    let gauss = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let clamp = |d: f64| d.max(REFERENCE_DISTANCE_M);

    let mut los = LosFlags::default();
    let mut h_direct = Vec::with_capacity(n);
    for ue in &layout.ues {
        let is_los = rng.random_bool(cfg.channel.p_los_direct);
        los.direct.push(is_los);
        let amp = path_gain(clamp(ue.distance(&layout.ap)), alpha_d, is_los, cfg)?.sqrt();
        let small_scale = if is_los {
            steering_vector(layout.ap.directional_cosine(ue), m, spacing)
        } else {
            CVec::from_fn(m, |_, _| C64::new(gauss.sample(&mut rng), gauss.sample(&mut rng)))
        };
        h_direct.push(small_scale * C64::new(amp, 0.0));
    }

    los.irs_ap = rng.random_bool(cfg.channel.p_los_irs);
    let amp_g = path_gain(clamp(layout.irs.distance(&layout.ap)), alpha_a, los.irs_ap, cfg)?.sqrt();
    let a_r = steering_vector(layout.ap.directional_cosine(&layout.irs), m, spacing);
    let a_t = steering_vector(layout.irs.directional_cosine(&layout.ap), k, spacing);
    let mut g_irs_ap = (&a_r * a_t.adjoint()) * C64::new(amp_g, 0.0);
    let fade = |v: &mut C64, rng: &mut ChaCha8Rng| *v *= C64::new(gauss.sample(rng), gauss.sample(rng));
    if cfg.channel.surface_fading {
        // row-major draw order
        for r in 0..m {
            for c in 0..k {
                fade(&mut g_irs_ap[(r, c)], &mut rng);
            }
        }
    }

    let mut h_ue_irs = Vec::with_capacity(n);
    for ue in &layout.ues {
        let is_los = rng.random_bool(cfg.channel.p_los_irs);
        los.ue_irs.push(is_los);
        let amp = path_gain(clamp(ue.distance(&layout.irs)), alpha_a, is_los, cfg)?.sqrt();
        let mut resp = steering_vector(layout.irs.directional_cosine(ue), k, spacing) * C64::new(amp, 0.0);
        if cfg.channel.surface_fading {
            resp.iter_mut().for_each(|v| fade(v, &mut rng));
        }
        h_ue_irs.push(resp);
    }

    Ok(ChannelSet {
        h_direct,
        g_irs_ap,
        h_ue_irs,
        los,
    })
}

/// `h_{n,b} + G Φ h_{n,u}` for an already assembled `Φ`.
pub fn effective_channel_mat(ch: &ChannelSet, phi: &CMat, n: usize) -> Result<CVec> {
    let k = ch.n_elements();
    if phi.shape() != (k, k) {
        return Err(Error::Dimension {
            what: "phase matrix",
            expected: k,
            got: phi.nrows(),
        });
    }
    if n >= ch.n_users() {
        return Err(Error::Dimension {
            what: "user index",
            expected: ch.n_users(),
            got: n,
        });
    }
    Ok(&ch.h_direct[n] + &ch.g_irs_ap * (phi * &ch.h_ue_irs[n]))
}

pub fn effective_channel(ch: &ChannelSet, phi: &PhaseShift, n: usize) -> Result<CVec> {
    effective_channel_mat(ch, &phi.assemble(), n)
}

/// Effective channels of all users.
pub fn effective_channels(ch: &ChannelSet, phi: &CMat) -> Result<Vec<CVec>> {
    (0..ch.n_users())
        .map(|n| effective_channel_mat(ch, phi, n))
        .collect()
}

/// SINR of user `n` under linear receive beamforming.
pub fn sinr_from_effective(
    heff: &[CVec],
    w: &[CVec],
    p: &[f64],
    n: usize,
    noise_w: f64,
) -> Result<f64> {
    let wn = &w[n];
    let wn2 = wn.norm_squared();
    if wn2 == 0.0 {
        return Err(Error::ZeroBeamformer(n));
    }
    let signal = p[n] * wn.dotc(&heff[n]).norm_sqr();
    let interference: f64 = heff
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != n)
        .map(|(j, h)| p[j] * wn.dotc(h).norm_sqr())
        .sum();
    Ok(signal / (interference + noise_w * wn2))
}

pub fn rate_point(sinr: f64, bandwidth_hz: f64) -> RatePoint {
    RatePoint {
        sinr,
        rate_bps: bandwidth_hz * (1.0 + sinr).log2(),
    }
}

pub fn sinr(
    ch: &ChannelSet,
    phi: &PhaseShift,
    w: &[CVec],
    p: &[f64],
    n: usize,
    cfg: &SystemConfig,
) -> Result<RatePoint> {
    let heff = effective_channels(ch, &phi.assemble())?;
    let g = sinr_from_effective(&heff, w, p, n, cfg.noise_power_w())?;
    Ok(rate_point(g, cfg.channel.bandwidth_hz))
}

/// SINR of every user.
pub fn all_sinr(heff: &[CVec], w: &[CVec], p: &[f64], noise_w: f64) -> Result<Vec<f64>> {
    (0..heff.len())
        .map(|n| sinr_from_effective(heff, w, p, n, noise_w))
        .collect()
}
