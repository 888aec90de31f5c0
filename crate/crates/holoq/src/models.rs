//! Concrete superoperator families: the spin-1/2 model with decoherence in
//! the instantaneous eigenbasis, plus synthetic families for holonomy and
//! Jordan-chain tests.

use std::f64::consts::PI;

use ndarray::{array, Array2, ArrayView1};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::path::{HamiltonianFamily, ParameterPath, SuperoperatorFamily};
use crate::superop::{make_basis, total_superop, OperatorBasis, Superoperator};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Decoherence channel acting in the instantaneous eigenbasis of H.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoherenceChannel {
    None,
    Dephasing,
    SpontaneousEmission,
    BitFlip,
}

/// Spin-1/2 in a magnetic field, H(B) = -mu S.B with mu = 1, with one
/// decoherence channel of strength beta rotated into the instantaneous
/// eigenbasis by W(B).
///
/// The lowering operator follows sigma_-|1> = 2|0>, sigma_-|0> = 0; it
/// carries a factor 2 relative to the common |0><1| convention, which
/// rescales the effective spontaneous-emission rate by 4.
#[derive(Debug, Clone)]
pub struct SpinHalfModel {
    field_magnitude: f64,
    theta: f64,
    channel: DecoherenceChannel,
    beta: f64,
    basis: OperatorBasis,
}

impl SpinHalfModel {
    pub fn new(
        field_magnitude: f64,
        theta: f64,
        channel: DecoherenceChannel,
        beta: f64,
    ) -> Result<Self> {
        if !(field_magnitude > 0.0) || !field_magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "field magnitude must be positive and finite, got {field_magnitude}"
            )));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "channel strength must be nonnegative, got {beta}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        Ok(Self {
            field_magnitude,
            theta,
            channel,
            beta,
            basis: make_basis(2)?,
        })
    }

    pub fn field_magnitude(&self) -> f64 {
        self.field_magnitude
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn channel(&self) -> DecoherenceChannel {
        self.channel
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_channel(&self, channel: DecoherenceChannel, beta: f64) -> Result<Self> {
        Self::new(self.field_magnitude, self.theta, channel, beta)
    }

    /// Closed cone path B(s) = B (cos(2 pi s) sin t, sin(2 pi s) sin t, cos t).
    pub fn field_path(&self, n_grid: usize) -> Result<ParameterPath> {
        if !(self.theta > 0.0 && self.theta < PI) {
            return Err(Error::DegeneratePath { theta: self.theta });
        }
        let b = self.field_magnitude;
        let (st, ct) = self.theta.sin_cos();
        ParameterPath::closed(
            move |s| {
                let phi = 2.0 * PI * s;
                array![b * phi.cos() * st, b * phi.sin() * st, b * ct]
            },
            n_grid,
        )
    }

    /// H(B) = -(1/2)(Bx sx + By sy + Bz sz).
    pub fn hamiltonian_at(b: ArrayView1<f64>) -> Array2<C64> {
        let (bx, by, bz) = (b[0], b[1], b[2]);
        array![
            [c(-0.5 * bz, 0.), c(-0.5 * bx, 0.5 * by)],
            [c(-0.5 * bx, -0.5 * by), c(0.5 * bz, 0.)]
        ]
    }

    /// Unitary W(B) diagonalizing H(B); column 0 is the ground state
    /// (energy -B/2), column 1 the excited state (+B/2). Each column is
    /// rescaled so its largest-modulus component is real positive (ties
    /// resolved toward the lower index), which is smooth along any cone
    /// with theta away from the poles.
    pub fn diagonalizer(b: ArrayView1<f64>) -> Array2<C64> {
        let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let polar = (b[2] / norm).clamp(-1.0, 1.0).acos();
        let azimuth = b[1].atan2(b[0]);
        let (sh, chh) = ((polar / 2.0).sin(), (polar / 2.0).cos());
        let phase = C64::from_polar(1.0, azimuth);
        // ground |+n> aligns the spin with the field (lowest energy for
        // H = -mu S.B), excited |-n> anti-aligns
        let mut w = array![
            [c(chh, 0.), -phase.conj() * c(sh, 0.)],
            [phase * c(sh, 0.), c(chh, 0.)]
        ];
        for col in 0..2 {
            let mut idx = 0;
            if w[[1, col]].norm() > w[[0, col]].norm() {
                idx = 1;
            }
            let z = w[[idx, col]];
            if z.norm() > 0.0 {
                let u = z.conj() / c(z.norm(), 0.);
                w[[0, col]] *= u;
                w[[1, col]] *= u;
            }
        }
        w
    }

    /// Channel operators rotated into the instantaneous eigenbasis.
    pub fn lindblad_ops(&self, b: ArrayView1<f64>) -> Vec<Array2<C64>> {
        let base: Array2<C64> = match self.channel {
            DecoherenceChannel::None => return Vec::new(),
            DecoherenceChannel::Dephasing => {
                array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]
            }
            // sigma_-|1> = 2|0>
            DecoherenceChannel::SpontaneousEmission => {
                array![[c(0., 0.), c(2., 0.)], [c(0., 0.), c(0., 0.)]]
            }
            DecoherenceChannel::BitFlip => {
                array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]
            }
        };
        let w = Self::diagonalizer(b);
        let wd = crate::superop::adjoint(&w);
        vec![w.dot(&base).dot(&wd).mapv(|x| x * c(self.beta, 0.))]
    }
}

impl SuperoperatorFamily for SpinHalfModel {
    fn hilbert_dim(&self) -> usize {
        2
    }

    fn superoperator(&self, params: ArrayView1<f64>) -> Result<Superoperator> {
        let h = Self::hamiltonian_at(params);
        let gammas = self.lindblad_ops(params);
        total_superop(&h, &gammas, &self.basis)
    }
}

impl HamiltonianFamily for SpinHalfModel {
    fn hilbert_dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, params: ArrayView1<f64>) -> Array2<C64> {
        Self::hamiltonian_at(params)
    }
}

/// Unit-circle embedding used by the synthetic families; the angle is
/// recovered with atan2, so every construction below is 2 pi periodic.
pub fn circle_path(n_grid: usize) -> Result<ParameterPath> {
    ParameterPath::closed(
        |s| {
            let phi = 2.0 * PI * s;
            array![phi.cos(), phi.sin()]
        },
        n_grid,
    )
}

fn circle_angle(params: ArrayView1<f64>) -> f64 {
    params[1].atan2(params[0])
}

/// Rotation generator J_{ab} in n dimensions: (J)_{ab} = -1, (J)_{ba} = +1.
fn rotation_generator(n: usize, a: usize, b: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    m[[a, b]] = -1.0;
    m[[b, a]] = 1.0;
    m
}

/// exp(angle * J_{ab}) in closed form.
fn plane_rotation(n: usize, a: usize, b: usize, angle: f64) -> Array2<f64> {
    let mut m = Array2::eye(n);
    let (s, co) = angle.sin_cos();
    m[[a, a]] = co;
    m[[b, b]] = co;
    m[[a, b]] = -s;
    m[[b, a]] = s;
    m
}

fn expm_real(m: &Array2<f64>) -> Array2<f64> {
    // scaling and squaring with a plain Taylor series; the generators used
    // here have norm of order 2 pi
    let n = m.nrows();
    let norm = m.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
    let scale = 0.5f64.powi(squarings as i32);
    let ms = m.mapv(|x| x * scale);
    let mut term: Array2<f64> = Array2::eye(n);
    let mut acc: Array2<f64> = Array2::eye(n);
    for k in 1..30 {
        term = term.dot(&ms).mapv(|x| x / k as f64);
        acc = &acc + &term;
        if term.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        acc = acc.dot(&acc);
    }
    acc
}

/// Closed-system family whose Hamiltonian superoperator has a G-fold
/// degenerate eigenvalue with a nontrivial holonomy matrix along the circle
/// loop. The Hamiltonian is a rank-one tilt of the identity rotated by a
/// periodic orthogonal frame U(phi): H = U diag(1,..,1,-1) U^T, and the
/// degenerate coherence cluster at eigenvalue -2i is spanned by the
/// operators |u_i><u_last|.
#[derive(Debug, Clone)]
pub struct SyntheticDegenerateModel {
    degeneracy: usize,
    dim: usize,
    tilt: f64,
    basis: OperatorBasis,
}

pub fn synthetic_degenerate_model(degeneracy: usize) -> Result<SyntheticDegenerateModel> {
    if !(degeneracy == 2 || degeneracy == 3) {
        return Err(Error::InvalidArgument(format!(
            "supported degeneracies are 2 and 3, got {degeneracy}"
        )));
    }
    let dim = degeneracy + 1;
    Ok(SyntheticDegenerateModel {
        degeneracy,
        dim,
        tilt: 1.0,
        basis: make_basis(dim)?,
    })
}

impl SyntheticDegenerateModel {
    pub fn degeneracy(&self) -> usize {
        self.degeneracy
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    /// Degenerate coherence cluster eigenvalue, -i (E_deg - E_single) = -2i.
    pub fn cluster_eigenvalue(&self) -> C64 {
        c(0., -2.)
    }

    /// Periodic orthogonal frame; the last column traces the moving axis.
    pub fn frame(&self, phi: f64) -> Array2<f64> {
        let n = self.dim;
        match self.degeneracy {
            2 => {
                // R_z(phi) R_y(alpha) in 3 dimensions
                let rz = plane_rotation(n, 0, 1, -phi);
                let ry = plane_rotation(n, 2, 0, -self.tilt);
                rz.dot(&ry)
            }
            _ => {
                // two commuting-plane rotations composed with an in-space
                // twist; exp(2 pi K) = 1 for both factors
                let k1 = plane_rotation(n, 0, 1, phi).dot(&plane_rotation(n, 2, 3, phi));
                let k2 = plane_rotation(n, 0, 2, phi);
                k1.dot(&k2)
            }
        }
    }

    pub fn hamiltonian_from_angle(&self, phi: f64) -> Array2<C64> {
        let u = self.frame(phi);
        let n = self.dim;
        let mut h0 = Array2::eye(n);
        h0[[n - 1, n - 1]] = -1.0;
        let h = u.dot(&h0).dot(&u.t());
        h.mapv(|x| c(x, 0.))
    }

    /// Frame connection A_ij(s) = <u_i | d/ds u_j> restricted to the
    /// degenerate subspace; equals the holonomic connection of the -2i
    /// cluster in this frame's gauge. Evaluated by a fourth-order difference
    /// of the analytic frame.
    pub fn frame_connection(&self, s: f64) -> Array2<C64> {
        let g = self.degeneracy;
        let h = 1e-5;
        let u_at = |s: f64| self.frame(2.0 * PI * s);
        let du = (&u_at(s - 2.0 * h) - &u_at(s + 2.0 * h))
            .mapv(|x| x / (12.0 * h))
            + (&u_at(s + h) - &u_at(s - h)).mapv(|x| x * (8.0 / (12.0 * h)));
        let a_full = u_at(s).t().dot(&du);
        let mut a = Array2::zeros((g, g));
        for i in 0..g {
            for j in 0..g {
                a[[i, j]] = c(a_full[[i, j]], 0.);
            }
        }
        a
    }

    /// Wilson-loop oracle: fixed-step RK4 integration of P' = -A(s) P over
    /// the loop in the analytic frame gauge.
    pub fn wilson_oracle(&self, n_steps: usize) -> Array2<C64> {
        let g = self.degeneracy;
        let mut p: Array2<C64> = Array2::eye(g);
        let h = 1.0 / n_steps as f64;
        let rhs = |s: f64, p: &Array2<C64>| -> Array2<C64> {
            let a = self.frame_connection(s);
            -a.dot(p)
        };
        for k in 0..n_steps {
            let s = k as f64 * h;
            let k1 = rhs(s, &p);
            let k2 = rhs(s + 0.5 * h, &(&p + &k1.mapv(|x| x * c(0.5 * h, 0.))));
            let k3 = rhs(s + 0.5 * h, &(&p + &k2.mapv(|x| x * c(0.5 * h, 0.))));
            let k4 = rhs(s + h, &(&p + &k3.mapv(|x| x * c(h, 0.))));
            let inc = (k1 + k2.mapv(|x| x * c(2., 0.)) + k3.mapv(|x| x * c(2., 0.)) + k4)
                .mapv(|x| x * c(h / 6.0, 0.));
            p = &p + &inc;
        }
        p
    }

    /// For G = 2 the connection is constant and the Wilson loop is the
    /// rotation by 2 pi cos(tilt).
    pub fn analytic_wilson_g2(&self) -> Option<Array2<C64>> {
        if self.degeneracy != 2 {
            return None;
        }
        let kappa = 2.0 * PI * self.tilt.cos();
        let a = array![[0.0, kappa], [-kappa, 0.0]];
        Some(expm_real(&a.mapv(|x| -x)).mapv(|x| c(x, 0.)))
    }
}

impl SuperoperatorFamily for SyntheticDegenerateModel {
    fn hilbert_dim(&self) -> usize {
        self.dim
    }

    fn superoperator(&self, params: ArrayView1<f64>) -> Result<Superoperator> {
        let h = self.hamiltonian_from_angle(circle_angle(params));
        total_superop(&h, &[], &self.basis)
    }
}

impl HamiltonianFamily for SyntheticDegenerateModel {
    fn hilbert_dim(&self) -> usize {
        self.dim
    }

    fn hamiltonian(&self, params: ArrayView1<f64>) -> Array2<C64> {
        self.hamiltonian_from_angle(circle_angle(params))
    }
}

/// Non-diagonalizable family with one persistent 2-chain.
///
/// The 4x4 generator (D = 2 coherence space) is block diagonal: a zero row
/// for the identity component, a rotating-sheared 2-chain with eigenvalue
/// `lambda` on the first two traceless directions, and a plain decay
/// `lambda_iso` on the third. The chain plane never mixes with the other
/// blocks, so adiabatic decoupling is exact and the ladder equations can be
/// checked against the exact flow at discretization accuracy.
#[derive(Debug, Clone)]
pub struct SyntheticJordanChainModel {
    lambda: f64,
    lambda_iso: f64,
    shear: Array2<f64>,
    shear_inv: Array2<f64>,
}

pub fn synthetic_jordan_chain_model() -> SyntheticJordanChainModel {
    let shear = array![[1.0, 0.4], [0.0, 1.3]];
    let shear_inv = array![[1.0, -0.4 / 1.3], [0.0, 1.0 / 1.3]];
    SyntheticJordanChainModel {
        lambda: -0.05,
        lambda_iso: -0.8,
        shear,
        shear_inv,
    }
}

impl SyntheticJordanChainModel {
    pub fn chain_eigenvalue(&self) -> C64 {
        c(self.lambda, 0.)
    }

    fn plane_frame(&self, phi: f64) -> (Array2<f64>, Array2<f64>) {
        let (s, co) = phi.sin_cos();
        let r = array![[co, -s], [s, co]];
        let r_inv = array![[co, s], [-s, co]];
        (r.dot(&self.shear), self.shear_inv.dot(&r_inv))
    }
}

impl SuperoperatorFamily for SyntheticJordanChainModel {
    fn hilbert_dim(&self) -> usize {
        2
    }

    fn superoperator(&self, params: ArrayView1<f64>) -> Result<Superoperator> {
        let phi = circle_angle(params);
        let (g, g_inv) = self.plane_frame(phi);
        let j = array![[self.lambda, 1.0], [0.0, self.lambda]];
        let chain = g.dot(&j).dot(&g_inv);
        let mut m = Array2::zeros((4, 4));
        for i in 0..2 {
            for jj in 0..2 {
                m[[1 + i, 1 + jj]] = c(chain[[i, jj]], 0.);
            }
        }
        m[[3, 3]] = c(self.lambda_iso, 0.);
        Superoperator::new(m, 2, crate::superop::SuperopKind::Total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{decompose, default_cluster_tol};
    use ndarray::Array1;
    use ndarray_linalg::SVD;

    #[test]
    fn field_path_start_point() {
        let m = SpinHalfModel::new(1.0, PI / 3.0, DecoherenceChannel::None, 0.0).unwrap();
        let p = m.field_path(64).unwrap();
        let r0 = p.evaluate(0.0);
        assert!((r0[0] - (PI / 3.0).sin()).abs() < 1e-15);
        assert!(r0[1].abs() < 1e-15);
        assert!((r0[2] - 0.5).abs() < 1e-15);
        // closedness
        let r1 = p.evaluate(1.0);
        for (a, b) in r0.iter().zip(r1.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // B_z constant along the path at theta = pi/3
        for s in [0.13, 0.5, 0.77] {
            assert!((p.evaluate(s)[2] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_cone_angles_are_rejected() {
        let m = SpinHalfModel::new(1.0, 0.0, DecoherenceChannel::None, 0.0).unwrap();
        assert!(matches!(
            m.field_path(64),
            Err(Error::DegeneratePath { .. })
        ));
        let m = SpinHalfModel::new(1.0, PI, DecoherenceChannel::None, 0.0).unwrap();
        assert!(matches!(
            m.field_path(64),
            Err(Error::DegeneratePath { .. })
        ));
    }

    #[test]
    fn diagonalizer_reduces_to_identity_on_axis() {
        let w = SpinHalfModel::diagonalizer(array![0.0, 0.0, 1.0].view());
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((w[[i, j]] - c(want, 0.)).norm() < 1e-14);
            }
        }
        // dephasing operator reduces to beta sigma_z
        let m = SpinHalfModel::new(1.0, 0.3, DecoherenceChannel::Dephasing, 0.7).unwrap();
        let ops = m.lindblad_ops(array![0.0, 0.0, 1.0].view());
        assert_eq!(ops.len(), 1);
        assert!((ops[0][[0, 0]] - c(0.7, 0.)).norm() < 1e-14);
        assert!((ops[0][[1, 1]] - c(-0.7, 0.)).norm() < 1e-14);
    }

    #[test]
    fn diagonalizer_diagonalizes_hamiltonian() {
        for (bx, by, bz) in [(0.3, -0.4, 0.8), (1.0, 0.0, 0.5), (-0.2, 0.9, -0.6)] {
            let b = array![bx, by, bz];
            let h = SpinHalfModel::hamiltonian_at(b.view());
            let w = SpinHalfModel::diagonalizer(b.view());
            let wd = crate::superop::adjoint(&w);
            let d = wd.dot(&h).dot(&w);
            let norm = (bx * bx + by * by + bz * bz).sqrt();
            assert!((d[[0, 0]] - c(-norm / 2.0, 0.)).norm() < 1e-12);
            assert!((d[[1, 1]] - c(norm / 2.0, 0.)).norm() < 1e-12);
            assert!(d[[0, 1]].norm() < 1e-12);
            assert!(d[[1, 0]].norm() < 1e-12);
        }
    }

    #[test]
    fn commutator_structure_of_channels() {
        let basis = make_basis(2).unwrap();
        let theta = PI / 3.0;
        for (channel, expect_zero) in [
            (DecoherenceChannel::Dephasing, true),
            (DecoherenceChannel::SpontaneousEmission, true),
            (DecoherenceChannel::BitFlip, false),
        ] {
            let m = SpinHalfModel::new(1.0, theta, channel, 0.2).unwrap();
            let path = m.field_path(32).unwrap();
            for s in [0.0, 0.3, 0.62] {
                let b = path.evaluate(s);
                let h = SpinHalfModel::hamiltonian_at(b.view());
                let hs = crate::superop::hamiltonian_superop(&h, &basis).unwrap();
                let rs =
                    crate::superop::dissipator_superop(&m.lindblad_ops(b.view()), &basis)
                        .unwrap();
                let comm = hs.matrix().dot(rs.matrix()) - rs.matrix().dot(hs.matrix());
                let dev = comm.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if expect_zero {
                    assert!(dev < 1e-10, "{channel:?} commutator {dev}");
                } else {
                    assert!(dev > 1e-3, "{channel:?} commutator unexpectedly small");
                }
            }
        }
    }

    #[test]
    fn eigenbasis_independent_of_decoherence_strength() {
        // dephasing and spontaneous emission leave the eigenvector set of L
        // independent of beta
        for channel in [
            DecoherenceChannel::Dephasing,
            DecoherenceChannel::SpontaneousEmission,
        ] {
            let weak = SpinHalfModel::new(1.0, PI / 3.0, channel, 0.05).unwrap();
            let strong = SpinHalfModel::new(1.0, PI / 3.0, channel, 0.2).unwrap();
            let b = weak.field_path(32).unwrap().evaluate(0.37);
            let lw = weak.superoperator(b.view()).unwrap();
            let ls = strong.superoperator(b.view()).unwrap();
            let dw = decompose(&lw, default_cluster_tol(&lw)).unwrap();
            let ds = decompose(&ls, default_cluster_tol(&ls)).unwrap();
            // compare the coherence-sector eigenvectors (nondegenerate):
            // match by eigenvalue imaginary part, fix column phases by the
            // largest-modulus entry
            for bw in dw.blocks.iter().filter(|b| b.eigenvalue.im.abs() > 0.5) {
                let bs = ds
                    .blocks
                    .iter()
                    .find(|x| (x.eigenvalue.im - bw.eigenvalue.im).abs() < 1e-6)
                    .expect("matching coherence block");
                let fix = |v: &Array1<C64>| -> Array1<C64> {
                    let mut idx = 0;
                    for i in 0..v.len() {
                        if v[i].norm() > v[idx].norm() {
                            idx = i;
                        }
                    }
                    let u = v[idx].conj() / c(v[idx].norm(), 0.);
                    v.mapv(|x| x * u)
                };
                let a = fix(&bw.right[0]);
                let b2 = fix(&bs.right[0]);
                let dev = a
                    .iter()
                    .zip(b2.iter())
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                assert!(dev < 1e-8, "{channel:?} eigenvector drift {dev}");
            }
        }
    }

    #[test]
    fn plane_rotation_matches_generator_exponential() {
        for (a, b, angle) in [(0usize, 1usize, 0.7), (2, 0, -1.3), (2, 3, 2.9)] {
            let j = rotation_generator(4, a, b);
            let exact = expm_real(&j.mapv(|x| x * angle));
            let closed = plane_rotation(4, a, b, angle);
            let dev = exact
                .iter()
                .zip(closed.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-13, "J_{a}{b} convention drift {dev}");
        }
    }

    #[test]
    fn synthetic_degenerate_frame_is_periodic_and_orthogonal() {
        for g in [2usize, 3] {
            let m = synthetic_degenerate_model(g).unwrap();
            let u0 = m.frame(0.0);
            let u1 = m.frame(2.0 * PI);
            let dev = (&u0 - &u1).iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(dev < 1e-12, "frame not periodic for G = {g}: {dev}");
            let utu = u0.t().dot(&u0);
            for i in 0..m.hilbert_dim() {
                for j in 0..m.hilbert_dim() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((utu[[i, j]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn synthetic_degenerate_cluster_has_expected_multiplicity() {
        for g in [2usize, 3] {
            let m = synthetic_degenerate_model(g).unwrap();
            let p = circle_path(32).unwrap();
            let l = m.superoperator(p.evaluate(0.21).view()).unwrap();
            let dec = decompose(&l, default_cluster_tol(&l)).unwrap();
            let cluster: Vec<_> = dec
                .blocks
                .iter()
                .filter(|b| (b.eigenvalue - m.cluster_eigenvalue()).norm() < 1e-6)
                .collect();
            assert_eq!(cluster.len(), g);
            assert!(cluster.iter().all(|b| b.chain_len == 1));
        }
    }

    #[test]
    fn g2_oracle_matches_analytic_rotation() {
        let m = synthetic_degenerate_model(2).unwrap();
        let oracle = m.wilson_oracle(2000);
        let analytic = m.analytic_wilson_g2().unwrap();
        let dev = oracle
            .iter()
            .zip(analytic.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-8, "oracle vs analytic deviation {dev}");
    }

    #[test]
    fn chain_model_has_persistent_two_chain() {
        let m = synthetic_jordan_chain_model();
        let p = circle_path(32).unwrap();
        for s in [0.0, 0.33, 0.71] {
            let l = m.superoperator(p.evaluate(s).view()).unwrap();
            // algebraic multiplicity 2, geometric multiplicity 1 at lambda
            let mut shifted = l.matrix().clone();
            for i in 0..4 {
                shifted[[i, i]] -= m.chain_eigenvalue();
            }
            let (_, sigma, _) = shifted.svd(false, false).unwrap();
            let small = sigma.iter().filter(|x| **x < 1e-8).count();
            assert_eq!(small, 1, "geometric multiplicity at s = {s}");
            let dec = decompose(&l, 1e-8).unwrap();
            let lens: Vec<usize> = dec.blocks.iter().map(|b| b.chain_len).collect();
            assert!(lens.contains(&2));
            let rep = crate::spectral::verify(&dec, &l);
            assert!(rep.biorthonormality < 1e-10);
            assert!(rep.chain < 1e-8);
            assert!(rep.completeness < 1e-8);
        }
    }
}
