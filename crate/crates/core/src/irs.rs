//! Reflection matrices for single-, group- and fully-connected surfaces, and
//! the block-unitary manifold optimizer used for the phase step.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{cis, fro2, polar_unitary, trace, unitarity_defect, CMat, CVec, C64, ZERO};

/// Blocks are accepted as unitary when `‖UᴴU − I‖_F` is below this.
pub const UNITARY_TOL: f64 = 1e-8;

/// Doubling and halving constant of the Armijo rule.
const ARMIJO_C: f64 = 0.25;
const MAX_DOUBLINGS: usize = 40;
const MAX_HALVINGS: usize = 60;
const KAPPA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    SingleConnected,
    GroupConnected(usize),
    FullyConnected,
}

impl Arch {
    /// Architecture implied by `l` groups on `k` elements.
    pub fn from_groups(k: usize, l: usize) -> Result<Arch> {
        if l == 0 || k == 0 || !k.is_multiple_of(l) {
            return Err(Error::InfeasiblePhase(format!(
                "{k} elements cannot be split into {l} groups"
            )));
        }
        Ok(if l == k {
            Arch::SingleConnected
        } else if l == 1 {
            Arch::FullyConnected
        } else {
            Arch::GroupConnected(l)
        })
    }

    pub fn n_groups(&self, k: usize) -> usize {
        match *self {
            Arch::SingleConnected => k,
            Arch::GroupConnected(l) => l,
            Arch::FullyConnected => 1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Arch::SingleConnected => "sc",
            Arch::GroupConnected(_) => "gc",
            Arch::FullyConnected => "fc",
        }
    }

    /// Number of non-zero entries of the assembled matrix.
    pub fn nonzero_count(&self, k: usize) -> usize {
        let l = self.n_groups(k);
        let kb = k / l;
        l * kb * kb
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShift {
    arch: Arch,
    blocks: Vec<CMat>,
}

impl PhaseShift {
    pub fn identity(arch: Arch, k: usize) -> Result<PhaseShift> {
        let l = arch.n_groups(k);
        if l == 0 || !k.is_multiple_of(l) {
            return Err(Error::InfeasiblePhase(format!(
                "{k} elements cannot be split into {l} groups"
            )));
        }
        let kb = k / l;
        Ok(PhaseShift {
            arch,
            blocks: vec![CMat::identity(kb, kb); l],
        })
    }

    /// Single-connected surface from per-element phases.
    pub fn single_connected(thetas: &[f64]) -> PhaseShift {
        PhaseShift {
            arch: Arch::SingleConnected,
            blocks: thetas
                .iter()
                .map(|&t| CMat::from_element(1, 1, cis(t)))
                .collect(),
        }
    }

    pub fn from_blocks(arch: Arch, blocks: Vec<CMat>) -> Result<PhaseShift> {
        let l = blocks.len();
        if l == 0 {
            return Err(Error::InfeasiblePhase("no blocks".into()));
        }
        let kb = blocks[0].nrows();
        let k = l * kb;
        if arch.n_groups(k) != l {
            return Err(Error::InfeasiblePhase(format!(
                "{} expects {} groups, got {l}",
                arch.tag(),
                arch.n_groups(k)
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != (kb, kb) {
                return Err(Error::InfeasiblePhase(format!("block {i} is not {kb}x{kb}")));
            }
            let defect = unitarity_defect(b);
            if !(defect <= UNITARY_TOL) {
                return Err(Error::InfeasiblePhase(format!(
                    "block {i} unitarity defect {defect:e}"
                )));
            }
        }
        Ok(PhaseShift { arch, blocks })
    }

    /// Independent Haar-like unitary blocks.
    pub fn random<R: Rng + ?Sized>(arch: Arch, k: usize, rng: &mut R) -> Result<PhaseShift> {
        let mut phi = PhaseShift::identity(arch, k)?;
        let kb = phi.group_size();
        let gauss = Normal::new(0.0, 1.0).expect("valid normal");
        for b in phi.blocks.iter_mut() {
            let g = CMat::from_fn(kb, kb, |_, _| {
                C64::new(gauss.sample(rng), gauss.sample(rng))
            });
            *b = polar_unitary(&g);
        }
        Ok(phi)
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn n_groups(&self) -> usize {
        self.blocks.len()
    }

    pub fn group_size(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn n_elements(&self) -> usize {
        self.n_groups() * self.group_size()
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &CMat {
        &self.blocks[l]
    }

    pub fn set_block(&mut self, l: usize, u: CMat) {
        self.blocks[l] = u;
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.blocks.iter().map(unitarity_defect).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self) -> bool {
        self.max_unitarity_defect() <= UNITARY_TOL
    }

    /// Block-diagonal `K x K` matrix.
    pub fn assemble(&self) -> CMat {
        let kb = self.group_size();
        let k = self.n_elements();
        let mut out = CMat::zeros(k, k);
        for (l, b) in self.blocks.iter().enumerate() {
            out.view_mut((l * kb, l * kb), (kb, kb)).copy_from(b);
        }
        out
    }
}

/// `Ξ = Υ Uᴴ − U Υᴴ`.
pub fn riemannian_gradient(grad_euclid: &CMat, u: &CMat) -> CMat {
    let a = grad_euclid * u.adjoint();
    &a - a.adjoint()
}

/// Third-order Taylor approximation of `exp(−κΞ)`.
pub fn taylor_rotation(xi: &CMat, kappa: f64) -> CMat {
    let n = xi.nrows();
    let a = xi * C64::new(-kappa, 0.0);
    let a2 = &a * &a;
    let a3 = &a2 * &a;
    CMat::identity(n, n) + &a + a2 * C64::new(0.5, 0.0) + a3 * C64::new(1.0 / 6.0, 0.0)
}

/// `φ̄ U` without re-orthonormalization.
pub fn rotate_raw(u: &CMat, xi: &CMat, kappa: f64) -> CMat {
    taylor_rotation(xi, kappa) * u
}

/// `φ̄ U` projected back to the nearest unitary matrix.
pub fn rotate(u: &CMat, xi: &CMat, kappa: f64) -> CMat {
    polar_unitary(&rotate_raw(u, xi, kappa))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldState {
    pub phi: PhaseShift,
    pub kappa: f64,
    pub iter: usize,
}

/// One accepted or final step of the manifold optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStep {
    pub group: usize,
    pub iter: usize,
    /// Full objective after the step.
    pub objective: f64,
    pub xi_norm2: f64,
    pub kappa: f64,
    pub skew_defect: f64,
    pub unitarity_defect: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub initial_objective: f64,
    pub steps: Vec<PhaseStep>,
}

impl PhaseTrace {
    pub fn final_objective(&self) -> f64 {
        self.steps
            .last()
            .map_or(self.initial_objective, |s| s.objective)
    }

    pub fn max_xi_norm(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.xi_norm2.sqrt())
            .fold(0.0, f64::max)
    }
}

/// `F(Φ) = −A − 2 Re Tr(ΦX) + Tr(Φ Z Φᴴ Y)` over block-diagonal `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProblem {
    pub a: f64,
    pub x: CMat,
    pub y: CMat,
    pub z: CMat,
}

/// Inputs of the weighted quadratic-transform rate sum that the phase step
/// minimizes the negative of.
pub struct PhaseInputs<'a> {
    pub ch: &'a ChannelSet,
    pub w: &'a [CVec],
    pub p: &'a [f64],
    pub psi: &'a [f64],
    pub zeta: &'a [C64],
    pub weights: &'a [f64],
    pub noise_w: f64,
}

impl PhaseProblem {
    pub fn new(a: f64, x: CMat, y: CMat, z: CMat) -> PhaseProblem {
        PhaseProblem { a, x, y, z }
    }

    /// Builds `A, X, Y, Z` so that `F(Φ) = −ln2 · Σ cₙ R̂ₙ(Φ)`.
    pub fn from_inputs(inp: &PhaseInputs<'_>) -> PhaseProblem {
        let ch = inp.ch;
        let n_users = ch.n_users();
        let k = ch.n_elements();
        let g = &ch.g_irs_ap;
        let mut a = 0.0;
        let mut x = CMat::zeros(k, k);
        let mut y = CMat::zeros(k, k);
        let mut z = CMat::zeros(k, k);
        for j in 0..n_users {
            let hu = &ch.h_ue_irs[j];
            z += hu * hu.adjoint() * C64::new(inp.p[j], 0.0);
        }
        for n in 0..n_users {
            let c = inp.weights[n];
            let w = &inp.w[n];
            let zeta = inp.zeta[n];
            let z2 = zeta.norm_sqr();
            let amp = ((1.0 + inp.psi[n]) * inp.p[n]).sqrt();
            // ŵ as a row vector
            let w_hat = w.adjoint() * g;
            let d_own = w.dotc(&ch.h_direct[n]);
            let mut denom_direct = inp.noise_w * w.norm_squared();
            let mut coeff = CVec::zeros(k);
            coeff += &ch.h_ue_irs[n] * (zeta.conj() * amp * c);
            for j in 0..n_users {
                let d = w.dotc(&ch.h_direct[j]);
                denom_direct += inp.p[j] * d.norm_sqr();
                coeff -= &ch.h_ue_irs[j] * (d.conj() * (c * z2 * inp.p[j]));
            }
            x += &coeff * &w_hat;
            y += w_hat.adjoint() * &w_hat * C64::new(c * z2, 0.0);
            a += c
                * ((1.0 + inp.psi[n]).ln() - inp.psi[n] + 2.0 * amp * (zeta.conj() * d_own).re
                    - z2 * denom_direct);
        }
        PhaseProblem { a, x, y, z }
    }

    pub fn objective_mat(&self, phi: &CMat) -> f64 {
        let lin = trace(&(phi * &self.x)).re;
        let quad = trace(&(phi * &self.z * phi.adjoint() * &self.y)).re;
        -self.a - 2.0 * lin + quad
    }

    pub fn objective(&self, phi: &PhaseShift) -> f64 {
        self.objective_mat(&phi.assemble())
    }

    fn sub(m: &CMat, i: usize, j: usize, kb: usize) -> CMat {
        m.view((i * kb, j * kb), (kb, kb)).into_owned()
    }

    /// `X̂_l = X_ll − Σ_{l'≠l} Z_{l,l'} Φ_{l'}ᴴ Y_{l',l}`.
    pub fn x_hat(&self, phi: &PhaseShift, l: usize) -> CMat {
        let kb = phi.group_size();
        let mut out = Self::sub(&self.x, l, l, kb);
        for lp in 0..phi.n_groups() {
            if lp == l {
                continue;
            }
            out -= Self::sub(&self.z, l, lp, kb)
                * phi.block(lp).adjoint()
                * Self::sub(&self.y, lp, l, kb);
        }
        out
    }

    /// Group view with the other blocks of `phi` fixed.
    pub fn group(&self, phi: &PhaseShift, l: usize) -> GroupProblem {
        let kb = phi.group_size();
        GroupProblem {
            x_hat: self.x_hat(phi, l),
            y: Self::sub(&self.y, l, l, kb),
            z: Self::sub(&self.z, l, l, kb),
        }
    }

    /// Minimizes `F` by sweeping the groups in ascending order.
    pub fn optimize(
        &self,
        phi0: &PhaseShift,
        i_max: usize,
    ) -> Result<(PhaseShift, PhaseTrace)> {
        if !phi0.is_feasible() {
            return Err(Error::InfeasiblePhase(format!(
                "initial unitarity defect {:e}",
                phi0.max_unitarity_defect()
            )));
        }
        let mut phi = phi0.clone();
        let mut trace = PhaseTrace {
            initial_objective: self.objective(&phi),
            steps: Vec::new(),
        };
        let kb = phi.group_size() as f64;
        let tol = 1e-8 * kb * kb;
        for l in 0..phi.n_groups() {
            let gp = self.group(&phi, l);
            let offset = self.objective(&phi) - gp.objective(phi.block(l));
            let u = gp.descend(phi.block(l), tol, i_max, |step| {
                trace.steps.push(PhaseStep {
                    group: l,
                    objective: step.objective + offset,
                    ..step
                });
            });
            phi.set_block(l, u);
        }
        Ok((phi, trace))
    }
}

/// `F_l(U) = −2 Re Tr(U X̂) + Tr(U Z Uᴴ Y)` for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProblem {
    pub x_hat: CMat,
    pub y: CMat,
    pub z: CMat,
}

impl GroupProblem {
    pub fn objective(&self, u: &CMat) -> f64 {
        -2.0 * trace(&(u * &self.x_hat)).re + trace(&(u * &self.z * u.adjoint() * &self.y)).re
    }

    /// Euclidean gradient `Υ = 2 Y U Z − 2 X̂ᴴ`, i.e. `∂F/∂Re U + j ∂F/∂Im U`.
    pub fn euclidean_gradient(&self, u: &CMat) -> CMat {
        (&self.y * u * &self.z) * C64::new(2.0, 0.0) - self.x_hat.adjoint() * C64::new(2.0, 0.0)
    }

    /// Armijo-controlled rotations. `record` receives every accepted step,
    /// with `objective` holding the group objective.
    pub fn descend(
        &self,
        u0: &CMat,
        tol: f64,
        i_max: usize,
        mut record: impl FnMut(PhaseStep),
    ) -> CMat {
        let mut u = u0.clone();
        let mut f = self.objective(&u);
        let mut kappa = 0.0;
        for iter in 0..i_max {
            let xi = riemannian_gradient(&self.euclidean_gradient(&u), &u);
            let g2 = fro2(&xi);
            if !(g2 > tol) {
                break;
            }
            if kappa == 0.0 {
                kappa = 0.5 / g2.sqrt();
            }
            let skew_defect = (&xi + xi.adjoint()).norm();
            let eval = |kap: f64| {
                let cand = rotate(&u, &xi, kap);
                let fc = self.objective(&cand);
                (cand, fc)
            };

            let (mut cand, mut fc) = eval(kappa);
            let mut doublings = 0;
            loop {
                if doublings >= MAX_DOUBLINGS {
                    break;
                }
                let (c2, f2) = eval(2.0 * kappa);
                if f - f2 >= ARMIJO_C * 2.0 * kappa * g2 {
                    kappa *= 2.0;
                    cand = c2;
                    fc = f2;
                    doublings += 1;
                } else {
                    break;
                }
            }
            let mut halvings = 0;
            while f - fc < ARMIJO_C * kappa * g2 && halvings < MAX_HALVINGS {
                kappa = (kappa * 0.5).max(KAPPA_FLOOR);
                (cand, fc) = eval(kappa);
                halvings += 1;
            }
            if !(fc < f) {
                break;
            }
            u = cand;
            f = fc;
            record(PhaseStep {
                group: 0,
                iter,
                objective: f,
                xi_norm2: g2,
                kappa,
                skew_defect,
                unitarity_defect: unitarity_defect(&u),
            });
        }
        u
    }
}

/// Maximizer of `Re Tr(U X)` over unitary `U`: the polar factor of `Xᴴ`.
pub fn polar_maximizer(x: &CMat) -> CMat {
    polar_unitary(&x.adjoint())
}

/// Phase step for the weighted rate sum. Returns the new surface and trace.
pub fn optimize_phase(
    inp: &PhaseInputs<'_>,
    phi0: &PhaseShift,
    i_max: usize,
) -> Result<(PhaseShift, PhaseTrace)> {
    if phi0.n_elements() != inp.ch.n_elements() {
        return Err(Error::Dimension {
            what: "phase elements",
            expected: inp.ch.n_elements(),
            got: phi0.n_elements(),
        });
    }
    PhaseProblem::from_inputs(inp).optimize(phi0, i_max)
}

/// Entry-wise zero check of the off-block part of an assembled matrix.
pub fn off_block_zero_count(phi: &CMat, kb: usize) -> usize {
    let k = phi.nrows();
    let mut count = 0;
    for i in 0..k {
        for j in 0..k {
            if i / kb != j / kb && phi[(i, j)] == ZERO {
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rand_mat(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CMat {
        CMat::from_fn(n, m, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn rand_psd(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let a = rand_mat(rng, n, n);
        &a * a.adjoint()
    }

    #[test]
    fn assemble_sc_diagonal() {
        let phi = PhaseShift::single_connected(&[0.0, PI]).assemble();
        assert!((phi[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((phi[(1, 1)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(phi[(0, 1)], ZERO);
        assert_eq!(phi[(1, 0)], ZERO);
    }

    #[test]
    fn assemble_fc_identity() {
        let phi = PhaseShift::identity(Arch::FullyConnected, 2).unwrap();
        assert_eq!(phi.assemble(), CMat::identity(2, 2));
    }

    #[test]
    fn assemble_gc_swaps() {
        let swap = CMat::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        );
        let phi = PhaseShift::from_blocks(Arch::GroupConnected(2), vec![swap.clone(), swap])
            .unwrap()
            .assemble();
        assert_eq!(off_block_zero_count(&phi, 2), 8);
        assert_eq!(phi[(0, 1)], c(1.0, 0.0));
        assert_eq!(phi[(3, 2)], c(1.0, 0.0));
        assert_eq!(phi[(0, 0)], ZERO);
        assert_eq!(Arch::GroupConnected(2).nonzero_count(4), 8);
    }

    #[test]
    fn arch_from_groups() {
        assert_eq!(Arch::from_groups(8, 8).unwrap(), Arch::SingleConnected);
        assert_eq!(Arch::from_groups(8, 1).unwrap(), Arch::FullyConnected);
        assert_eq!(Arch::from_groups(8, 2).unwrap(), Arch::GroupConnected(2));
        assert!(Arch::from_groups(8, 3).is_err());
    }

    #[test]
    fn from_blocks_rejects_non_unitary() {
        let bad = CMat::from_element(1, 1, c(2.0, 0.0));
        assert!(matches!(
            PhaseShift::from_blocks(Arch::SingleConnected, vec![bad]),
            Err(Error::InfeasiblePhase(_))
        ));
    }

    #[test]
    fn gradient_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = polar_unitary(&rand_mat(&mut rng, 3, 3));
        assert!(fro2(&riemannian_gradient(&u, &u)) < 1e-24);

        let h = rand_psd(&mut rng, 3);
        assert!(fro2(&riemannian_gradient(&h, &CMat::identity(3, 3))) < 1e-24);

        let ups = CMat::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        let xi = riemannian_gradient(&ups, &CMat::identity(2, 2));
        let expected = CMat::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
        );
        assert!((xi - expected).norm() < 1e-15);
    }

    #[test]
    fn rotate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = polar_unitary(&rand_mat(&mut rng, 3, 3));
        let zero = CMat::zeros(3, 3);
        assert!((rotate(&u, &zero, 0.7) - &u).norm() < 1e-12);

        let a = rand_mat(&mut rng, 3, 3);
        let xi = &a - a.adjoint();
        let d1 = (rotate(&u, &xi, 1e-3) - &u).norm();
        let d2 = (rotate(&u, &xi, 1e-4) - &u).norm();
        assert!((d1 / d2 - 10.0).abs() < 0.1);

        for (beta, kappa) in [(0.3, 0.5), (1.0, 0.1), (-2.0, 0.25), (0.7, 1.0)] {
            let xi = CMat::from_element(1, 1, c(0.0, beta));
            let u = CMat::from_element(1, 1, cis(0.4));
            let exact = cis(-kappa * beta) * cis(0.4);
            let got = rotate_raw(&u, &xi, kappa)[(0, 0)];
            let bound = (kappa * beta).abs().powi(4) / 24.0;
            assert!((got - exact).norm() <= bound + 1e-15);
        }
    }

    #[test]
    fn stationary_start_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_mat(&mut rng, 2, 2);
        let u_star = polar_maximizer(&x);
        let prob = PhaseProblem::new(0.0, x, CMat::zeros(2, 2), CMat::zeros(2, 2));
        let phi0 = PhaseShift::from_blocks(Arch::FullyConnected, vec![u_star]).unwrap();
        let (phi, trace) = prob.optimize(&phi0, 200).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(phi, phi0);
    }

    #[test]
    fn polar_case_reaches_optimum() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kb = 1 + (seed as usize % 4);
            let x = rand_mat(&mut rng, kb, kb);
            let best = trace(&(polar_maximizer(&x) * &x)).re;
            let prob = PhaseProblem::new(0.0, x.clone(), CMat::zeros(kb, kb), CMat::zeros(kb, kb));
            let phi0 = PhaseShift::identity(Arch::FullyConnected, kb).unwrap();
            let (phi, _) = prob.optimize(&phi0, 200).unwrap();
            let got = trace(&(phi.assemble() * &x)).re;
            assert!(best - got < 1e-6, "seed {seed}: {best} vs {got}");
        }
    }

    #[test]
    fn group_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gp = GroupProblem {
            x_hat: rand_mat(&mut rng, 3, 3),
            y: rand_psd(&mut rng, 3),
            z: rand_psd(&mut rng, 3),
        };
        let u = polar_unitary(&rand_mat(&mut rng, 3, 3));
        let g = gp.euclidean_gradient(&u);
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut up = u.clone();
                let mut um = u.clone();
                up[(i, j)] += c(h, 0.0);
                um[(i, j)] -= c(h, 0.0);
                let dre = (gp.objective(&up) - gp.objective(&um)) / (2.0 * h);
                let mut up = u.clone();
                let mut um = u.clone();
                up[(i, j)] += c(0.0, h);
                um[(i, j)] -= c(0.0, h);
                let dim = (gp.objective(&up) - gp.objective(&um)) / (2.0 * h);
                assert!((g[(i, j)] - c(dre, dim)).norm() < 1e-6 * (1.0 + g[(i, j)].norm()));
            }
        }
    }

    #[test]
    fn random_blocks_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for arch in [
            Arch::SingleConnected,
            Arch::GroupConnected(4),
            Arch::FullyConnected,
        ] {
            let phi = PhaseShift::random(arch, 16, &mut rng).unwrap();
            assert!(phi.is_feasible());
            assert_eq!(phi.n_elements(), 16);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn optimizer_is_feasible_and_monotone(seed in 0u64..10_000, kb in 1usize..5, l in 1usize..4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = kb * l;
                let prob = PhaseProblem::new(
                    rng.random(),
                    rand_mat(&mut rng, k, k),
                    rand_psd(&mut rng, k),
                    rand_psd(&mut rng, k),
                );
                let arch = Arch::from_groups(k, l).unwrap();
                let phi0 = PhaseShift::random(arch, k, &mut rng).unwrap();
                let (phi, trace) = prob.optimize(&phi0, 200).unwrap();
                prop_assert!(phi.max_unitarity_defect() <= 1e-8);
                let mut prev = trace.initial_objective;
                for s in &trace.steps {
                    prop_assert!(s.objective <= prev + 1e-9);
                    prop_assert!(s.skew_defect <= 1e-10);
                    prop_assert!(s.unitarity_defect <= 1e-8);
                    prev = s.objective;
                }
                prop_assert!((prob.objective(&phi) - trace.final_objective()).abs() < 1e-8 * (1.0 + prev.abs()));
            }

            #[test]
            fn rotation_preserves_unitarity(seed in 0u64..10_000, kb in 1usize..6, kappa in 1e-4f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = polar_unitary(&rand_mat(&mut rng, kb, kb));
                let a = rand_mat(&mut rng, kb, kb);
                let xi = &a - a.adjoint();
                prop_assert!(unitarity_defect(&rotate(&u, &xi, kappa)) <= 1e-8);
            }
        }
    }
}
