//! Independent reference calculations used by the verification suite and the
//! test oracles. Everything here deliberately avoids the sparse
//! state-evolution path it is used to check: states are dense vectors over
//! the full truncated basis, evolution is a matrix exponential of the
//! bilinear generator, and closed forms are evaluated directly.

use ndarray::{Array1, Array2};

use crate::fock::{FockState, Occupation};
use crate::math::{c, expm, mat_vec, sqrt_factorial, C64};
use crate::Result;

/// Dense representation of the full truncated space of a few modes.
#[derive(Debug, Clone, Copy)]
pub struct DenseSpace {
    pub num_modes: usize,
    pub cutoff: u8,
}

impl DenseSpace {
    pub fn new(num_modes: usize, cutoff: u8) -> Self {
        Self { num_modes, cutoff }
    }

    pub fn dim(&self) -> usize {
        (self.cutoff as usize + 1).pow(self.num_modes as u32)
    }

    pub fn index(&self, occ: &[u8]) -> usize {
        let base = self.cutoff as usize + 1;
        occ.iter().fold(0usize, |acc, &n| acc * base + n as usize)
    }

    pub fn occupation(&self, mut index: usize) -> Occupation {
        let base = self.cutoff as usize + 1;
        let mut occ = Occupation::from_elem(0, self.num_modes);
        for i in (0..self.num_modes).rev() {
            occ[i] = (index % base) as u8;
            index /= base;
        }
        occ
    }

    /// Annihilation operator for one mode on the full space.
    pub fn annihilation(&self, mode: usize) -> Array2<C64> {
        let dim = self.dim();
        let mut m = Array2::zeros((dim, dim));
        for idx in 0..dim {
            let occ = self.occupation(idx);
            let n = occ[mode];
            if n > 0 {
                let mut lower = occ.clone();
                lower[mode] = n - 1;
                m[(self.index(&lower), idx)] = c((n as f64).sqrt(), 0.0);
            }
        }
        m
    }

    /// The Fock-space generator sum_jk B[j][k] a_j^dag a_k for a coefficient
    /// matrix over the listed modes. The corresponding mode-change matrix is
    /// exp(-B).
    pub fn bilinear_generator(&self, coeffs: &Array2<C64>, modes: &[usize]) -> Array2<C64> {
        let dim = self.dim();
        let mut g = Array2::zeros((dim, dim));
        let ops: Vec<Array2<C64>> = modes.iter().map(|&m| self.annihilation(m)).collect();
        for (j, aj) in ops.iter().enumerate() {
            let ajd = crate::math::dagger(aj);
            for (k, ak) in ops.iter().enumerate() {
                let b = coeffs[(j, k)];
                if b.norm_sqr() == 0.0 {
                    continue;
                }
                g = g + &ajd.dot(ak).mapv(|x| x * b);
            }
        }
        g
    }

    /// Beamsplitter generator z a_i a_j^dag - z* a_i^dag a_j with
    /// z = theta e^{i phi}; its exponential matches
    /// `interferometer::beamsplitter` applied to modes (i, j).
    pub fn beamsplitter_generator(&self, i: usize, j: usize, theta: f64, phi: f64) -> Array2<C64> {
        let z = c(0.0, phi).exp() * theta;
        let ai = self.annihilation(i);
        let aj = self.annihilation(j);
        let aid = crate::math::dagger(&ai);
        let ajd = crate::math::dagger(&aj);
        ai.dot(&ajd).mapv(|x| x * z) - aid.dot(&aj).mapv(|x| x * z.conj())
    }

    /// Relative-phase generator -i phi (n_i - n_j).
    pub fn phase_generator(&self, i: usize, j: usize, phi: f64) -> Array2<C64> {
        let ai = self.annihilation(i);
        let aj = self.annihilation(j);
        let ni = crate::math::dagger(&ai).dot(&ai);
        let nj = crate::math::dagger(&aj).dot(&aj);
        (ni - nj).mapv(|x| x * c(0.0, -phi))
    }

    pub fn to_dense(&self, state: &FockState) -> Array1<C64> {
        let mut v = Array1::zeros(self.dim());
        for (occ, amp) in state.terms() {
            v[self.index(occ)] = *amp;
        }
        v
    }

    pub fn to_sparse(&self, v: &Array1<C64>) -> Result<FockState> {
        FockState::from_terms(
            self.num_modes,
            self.cutoff,
            v.iter()
                .enumerate()
                .filter(|(_, a)| a.norm() > 1e-15)
                .map(|(i, a)| (self.occupation(i), *a)),
        )
    }

    /// Evolves a state by exp(generator) on the dense space.
    pub fn evolve(&self, state: &FockState, generator: &Array2<C64>) -> Result<FockState> {
        let u = expm(generator);
        let v = mat_vec(&u, &self.to_dense(state));
        self.to_sparse(&v)
    }
}

/// Closed-form Fock amplitudes of the displaced squeezed vacuum
/// D(alpha) S(zeta) |0> with S(zeta) = exp((zeta* a^2 - zeta a^dag^2)/2),
/// up to a global phase.
///
/// Derived from the eigenvalue relation
/// (mu a + nu a^dag) |psi> = (mu alpha + nu alpha*) |psi> with
/// mu = cosh r, nu = e^{i arg(zeta)} sinh r, which gives the three-term
/// recurrence used here.
pub fn displaced_squeezed_amplitudes(alpha: C64, zeta: C64, cutoff: u8) -> Vec<C64> {
    let r = zeta.norm();
    let mu = c(r.cosh(), 0.0);
    let nu = if r > 0.0 {
        c(0.0, zeta.arg()).exp() * r.sinh()
    } else {
        c(0.0, 0.0)
    };
    let lambda = mu * alpha + nu * alpha.conj();
    let dim = cutoff as usize + 1;
    let mut amps = vec![c(0.0, 0.0); dim];
    amps[0] = c(1.0, 0.0);
    if dim > 1 {
        amps[1] = lambda / mu;
    }
    for n in 1..dim - 1 {
        amps[n + 1] =
            (lambda * amps[n] - nu * (n as f64).sqrt() * amps[n - 1]) / (mu * ((n + 1) as f64).sqrt());
    }
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
    amps
}

/// Coherent-state amplitudes e^{-|alpha|^2/2} alpha^n / sqrt(n!).
pub fn coherent_amplitudes(alpha: C64, cutoff: u8) -> Vec<C64> {
    let dim = cutoff as usize + 1;
    let prefactor = (-alpha.norm_sqr() / 2.0).exp();
    let mut amps = Vec::with_capacity(dim);
    let mut power = c(1.0, 0.0);
    for n in 0..dim {
        if n > 0 {
            power *= alpha;
        }
        amps.push(power * prefactor / sqrt_factorial(n as u32));
    }
    amps
}

/// First and second quadrature moments of a single-mode state in the
/// q = (a + a^dag)/sqrt2 convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

fn expect_lowering(state: &FockState, lowers: &[usize]) -> Result<C64> {
    // <a_{m1} a_{m2} ...> for the listed lowering operators, leftmost first.
    let mut applied = state.clone();
    for &m in lowers.iter().rev() {
        applied = applied.apply_ladder(m, crate::fock::Ladder::Lower)?;
    }
    state.inner(&applied)
}

/// Computes quadrature moments of one mode of a state from ladder-operator
/// expectation values.
pub fn quadrature_moments(state: &FockState, mode: usize) -> Result<QuadratureMoments> {
    let a = expect_lowering(state, &[mode])?;
    let aa = expect_lowering(state, &[mode, mode])?;
    let ada = {
        let lowered = state.apply_ladder(mode, crate::fock::Ladder::Lower)?;
        lowered.inner(&lowered)?
    };
    let mean_q = 2f64.sqrt() * a.re;
    let mean_p = 2f64.sqrt() * a.im;
    // <q^2> = (  <a^2> + <a^dag^2> + 2<a^dag a> + 1 ) / 2
    let q2 = (2.0 * aa.re + 2.0 * ada.re + 1.0) / 2.0;
    let p2 = (-2.0 * aa.re + 2.0 * ada.re + 1.0) / 2.0;
    // <qp+pq>/2 = Im<a^2>
    let qp = aa.im;
    Ok(QuadratureMoments {
        mean_q,
        mean_p,
        var_q: q2 - mean_q * mean_q,
        var_p: p2 - mean_p * mean_p,
        cov_qp: qp - mean_q * mean_p,
    })
}

/// Cross moment <q_i q_j> - <q_i><q_j> of a two-mode state.
pub fn cross_moment_qq(state: &FockState, i: usize, j: usize) -> Result<f64> {
    let ai = expect_lowering(state, &[i])?;
    let aj = expect_lowering(state, &[j])?;
    let aiaj = expect_lowering(state, &[i, j])?;
    let aid_aj = {
        let li = state.apply_ladder(i, crate::fock::Ladder::Lower)?;
        let lj = state.apply_ladder(j, crate::fock::Ladder::Lower)?;
        li.inner(&lj)?
    };
    // <q_i q_j> = Re<a_i a_j> + Re<a_i^dag a_j> for distinct modes
    let qq = aiaj.re + aid_aj.re;
    Ok(qq - 2.0 * ai.re * aj.re)
}

/// Cross moment <p_i q_j> - <p_i><q_j> of a two-mode state.
pub fn cross_moment_pq(state: &FockState, i: usize, j: usize) -> Result<f64> {
    let ai = expect_lowering(state, &[i])?;
    let aj = expect_lowering(state, &[j])?;
    let aiaj = expect_lowering(state, &[i, j])?;
    let aid_aj = {
        let li = state.apply_ladder(i, crate::fock::Ladder::Lower)?;
        let lj = state.apply_ladder(j, crate::fock::Ladder::Lower)?;
        li.inner(&lj)?
    };
    // p_i q_j = -i(a_i - a_i^dag)(a_j + a_j^dag)/2
    // <p_i q_j> = Im(<a_i a_j>) + Im(<a_i^dag a_j>) ... careful with order:
    // = ( <a_i a_j> - <a_i^dag a_j^dag> + <a_i a_j^dag> - <a_i^dag a_j> ) * (-i/2)
    // with <a_i^dag a_j^dag> = conj(<a_j a_i>) and <a_i a_j^dag> = conj(<a_j a_i^dag>)
    // For i != j all operators commute, so <a_i a_j^dag> = conj(<a_i^dag a_j>).
    let term = aiaj.im + aid_aj.conj().im;
    let mean = 2f64.sqrt() * ai.im * 2f64.sqrt() * aj.re;
    Ok(term - mean)
}

/// Gaussian covariance-matrix oracle over (q1, p1, q2, p2, ...): symplectic
/// transforms of means and covariances for the Gaussian operations.
#[derive(Debug, Clone)]
pub struct GaussianStateOracle {
    pub mean: Vec<f64>,
    pub cov: Array2<f64>,
}

impl GaussianStateOracle {
    pub fn vacuum(num_modes: usize) -> Self {
        let n = 2 * num_modes;
        let mut cov = Array2::zeros((n, n));
        for i in 0..n {
            cov[(i, i)] = 0.5;
        }
        Self {
            mean: vec![0.0; n],
            cov,
        }
    }

    fn apply_symplectic(&mut self, s: &Array2<f64>) {
        let n = self.mean.len();
        let mut mean = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                mean[i] += s[(i, j)] * self.mean[j];
            }
        }
        self.mean = mean;
        self.cov = s.dot(&self.cov).dot(&s.t());
    }

    pub fn displace(&mut self, mode: usize, alpha: C64) {
        self.mean[2 * mode] += 2f64.sqrt() * alpha.re;
        self.mean[2 * mode + 1] += 2f64.sqrt() * alpha.im;
    }

    /// Squeeze with zeta = r e^{-2 i phi} (phi = 0 squeezes q).
    pub fn squeeze(&mut self, mode: usize, r: f64, phi: f64) {
        let n = self.mean.len();
        let mut s = Array2::eye(n);
        let (cp, sp) = (phi.cos(), phi.sin());
        // R(phi)^T diag(e^-r, e^r) R(phi) on the (q,p) block
        let rot = [[cp, sp], [-sp, cp]];
        let diag = [(-r).exp(), r.exp()];
        let mut block = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    acc += rot[k][a] * diag[k] * rot[k][b];
                }
                block[a][b] = acc;
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                s[(2 * mode + a, 2 * mode + b)] = block[a][b];
            }
        }
        self.apply_symplectic(&s);
    }

    /// exp(-i theta q_i q_j): p_i -> p_i - theta q_j, p_j -> p_j - theta q_i.
    pub fn qq_interaction(&mut self, i: usize, j: usize, theta: f64) {
        let n = self.mean.len();
        let mut s = Array2::eye(n);
        s[(2 * i + 1, 2 * j)] = -theta;
        s[(2 * j + 1, 2 * i)] = -theta;
        self.apply_symplectic(&s);
    }

    /// Smallest symplectic eigenvalue of the partial transpose for a two-mode
    /// Gaussian state; below 1/2 certifies entanglement in this convention.
    pub fn ppt_symplectic_eigenvalue(&self) -> f64 {
        assert_eq!(self.mean.len(), 4);
        let a = self.cov[(0, 0)] * self.cov[(1, 1)] - self.cov[(0, 1)] * self.cov[(1, 0)];
        let b = self.cov[(2, 2)] * self.cov[(3, 3)] - self.cov[(2, 3)] * self.cov[(3, 2)];
        let cmat = [
            [self.cov[(0, 2)], self.cov[(0, 3)]],
            [self.cov[(1, 2)], self.cov[(1, 3)]],
        ];
        let det_c = cmat[0][0] * cmat[1][1] - cmat[0][1] * cmat[1][0];
        let det_v = {
            // 4x4 determinant by cofactor over the first row
            let m = &self.cov;
            let det3 = |r: [usize; 3], c: [usize; 3]| {
                m[(r[0], c[0])] * (m[(r[1], c[1])] * m[(r[2], c[2])] - m[(r[1], c[2])] * m[(r[2], c[1])])
                    - m[(r[0], c[1])]
                        * (m[(r[1], c[0])] * m[(r[2], c[2])] - m[(r[1], c[2])] * m[(r[2], c[0])])
                    + m[(r[0], c[2])]
                        * (m[(r[1], c[0])] * m[(r[2], c[1])] - m[(r[1], c[1])] * m[(r[2], c[0])])
            };
            m[(0, 0)] * det3([1, 2, 3], [1, 2, 3]) - m[(0, 1)] * det3([1, 2, 3], [0, 2, 3])
                + m[(0, 2)] * det3([1, 2, 3], [0, 1, 3])
                - m[(0, 3)] * det3([1, 2, 3], [0, 1, 2])
        };
        // PPT flips the sign of det C
        let delta = a + b - 2.0 * det_c;
        let nu2 = (delta - (delta * delta - 4.0 * det_v).max(0.0).sqrt()) / 2.0;
        nu2.max(0.0).sqrt()
    }
}
