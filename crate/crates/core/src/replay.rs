//! Binary channel interchange and re-running a cell on stored channels.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   b"BDCH"
//! version u32 = 1
//! n, m, k u64 x 3
//! h_direct  n*m complex pairs (f64 re, f64 im), user-major
//! g_irs_ap  m*k complex pairs, row-major
//! h_ue_irs  n*k complex pairs, user-major
//! los       n bytes direct, n bytes ue_irs, 1 byte irs_ap (0 or 1)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::channel::{ChannelSet, LosFlags};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::SystemConfig;
use crate::orchestrator::{run_schemes, ArchTag, Scenario, Scheme, SchemeResult, Site};

const MAGIC: &[u8; 4] = b"BDCH";
const VERSION: u32 = 1;

pub fn encode_channels(ch: &ChannelSet) -> Result<Vec<u8>> {
    ch.check_dims()?;
    let (n, m, k) = (ch.n_users(), ch.n_antennas(), ch.n_elements());
    let mut out = Vec::with_capacity(32 + 16 * (n * m + m * k + n * k) + 2 * n + 1);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [n, m, k] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let mut put = |z: &C64| {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    };
    ch.h_direct.iter().flat_map(|h| h.iter()).for_each(&mut put);
    for r in 0..m {
        for c in 0..k {
            put(&ch.g_irs_ap[(r, c)]);
        }
    }
    ch.h_ue_irs.iter().flat_map(|h| h.iter()).for_each(&mut put);
    out.extend(ch.los.direct.iter().map(|b| *b as u8));
    out.extend(ch.los.ue_irs.iter().map(|b| *b as u8));
    out.push(ch.los.irs_ap as u8);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Replay(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn c64(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Replay(format!("bad flag byte {b} at {}", self.pos - 1))),
        }
    }
}

pub fn decode_channels(buf: &[u8]) -> Result<ChannelSet> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Replay("not a channel file".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Replay(format!("unsupported version {version}")));
    }
    let mut dim = || -> Result<usize> {
        let d = cur.u64()?;
        usize::try_from(d)
            .ok()
            .filter(|d| (1..=1 << 20).contains(d))
            .ok_or_else(|| Error::Replay(format!("implausible dimension {d}")))
    };
    let (n, m, k) = (dim()?, dim()?, dim()?);
    let mut vecs = |count: usize, len: usize| -> Result<Vec<CVec>> {
        (0..count)
            .map(|_| {
                let v = (0..len).map(|_| cur.c64()).collect::<Result<Vec<_>>>()?;
                Ok(CVec::from_vec(v))
            })
            .collect()
    };
    let h_direct = vecs(n, m)?;
    let g_rows = vecs(m, k)?;
    let g_irs_ap = CMat::from_fn(m, k, |r, c| g_rows[r][c]);
    let h_ue_irs = vecs(n, k)?;
    let direct = (0..n).map(|_| cur.flag()).collect::<Result<Vec<_>>>()?;
    let ue_irs = (0..n).map(|_| cur.flag()).collect::<Result<Vec<_>>>()?;
    let irs_ap = cur.flag()?;
    if cur.pos != buf.len() {
        return Err(Error::Replay(format!("{} trailing bytes", buf.len() - cur.pos)));
    }
    let ch = ChannelSet {
        h_direct,
        g_irs_ap,
        h_ue_irs,
        los: LosFlags { direct, ue_irs, irs_ap },
    };
    if !ch.is_finite() {
        return Err(Error::Replay("non-finite channel entry".into()));
    }
    Ok(ch)
}

pub fn save_channels(path: &Path, ch: &ChannelSet) -> Result<()> {
    let bytes = encode_channels(ch)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn load_channels(path: &Path) -> Result<ChannelSet> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_channels(&buf)
}

/// Scenario for `(cfg, seed)` with its channels replaced by `ch`. Tasks and
/// positions still come from the seed.
pub fn scenario_with_channels(cfg: &SystemConfig, seed: u64, site: Site, ch: ChannelSet) -> Result<Scenario> {
    let mut sc = Scenario::generate(cfg, seed, site)?;
    let expect = (sc.channels.n_users(), sc.channels.n_antennas(), sc.channels.n_elements());
    let got = (ch.n_users(), ch.n_antennas(), ch.n_elements());
    if expect != got {
        return Err(Error::Replay(format!(
            "channel file is (N, M, K) = {got:?} but the config expects {expect:?}"
        )));
    }
    sc.channels = ch;
    Ok(sc)
}

/// Re-runs the given cells on stored channels.
pub fn replay(
    cfg: &SystemConfig,
    seed: u64,
    ch: ChannelSet,
    arch: ArchTag,
    schemes: &[Scheme],
) -> Result<Vec<(Scheme, Result<SchemeResult>)>> {
    let sc = scenario_with_channels(cfg, seed, arch.site(), ch)?;
    Ok(run_schemes(&sc, arch, schemes))
}
