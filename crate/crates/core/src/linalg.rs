//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::new(phase.cos(), phase.sin())
}

/// Squared Frobenius norm.
pub fn fro2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖UᴴU − I‖_F`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - CMat::identity(n, n)).norm()
}

/// Nearest unitary matrix in Frobenius norm (the unitary polar factor).
pub fn polar_unitary(m: &CMat) -> CMat {
    if m.nrows() == 1 && m.ncols() == 1 {
        let z = m[(0, 0)];
        let r = z.norm();
        let v = if r > 0.0 { z / r } else { ONE };
        return CMat::from_element(1, 1, v);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u requested");
    let v_t = svd.v_t.expect("svd v_t requested");
    u * v_t
}

/// Trace of a square complex matrix.
pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Inner product `aᴴ b`.
#[inline]
pub fn dotc(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}
