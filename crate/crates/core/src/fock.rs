//! Sparse multimode states over the truncated occupation-number basis.

use std::collections::BTreeMap;

use smallvec::SmallVec;

use crate::math::{c, C64};
use crate::{Error, Result};

/// Occupation tuple; mode 0 is the leftmost entry, matching the |n1,n2,...>
/// reading order used throughout.
pub type Occupation = SmallVec<[u8; 8]>;

/// Amplitudes with magnitude below this are not stored.
pub const AMP_DROP_TOL: f64 = 1e-15;

/// What to do when an operation would populate an occupation above the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverflowPolicy {
    /// Raise a cutoff-violation error (default).
    #[default]
    Error,
    /// Drop the offending terms and accumulate their squared norm as leakage.
    Truncate,
}

/// Sparse superposition over the multimode number basis with a per-mode cutoff.
///
/// Invariants: every stored tuple has exactly `num_modes` entries, each in
/// `0..=cutoff`; zero amplitudes are never stored; iteration order is
/// lexicographic on occupation tuples, so output is reproducible bit-for-bit.
#[derive(Debug, Clone)]
pub struct FockState {
    num_modes: usize,
    cutoff: u8,
    policy: OverflowPolicy,
    amps: BTreeMap<Occupation, C64>,
    leaked_norm: f64,
}

impl FockState {
    /// The vacuum state |0,...,0>.
    pub fn vacuum(num_modes: usize, cutoff: u8) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(Occupation::from_elem(0, num_modes), c(1.0, 0.0));
        Self {
            num_modes,
            cutoff,
            policy: OverflowPolicy::Error,
            amps,
            leaked_norm: 0.0,
        }
    }

    /// Single basis ket |n1,...,nm>.
    pub fn from_occupation(occ: &[u8], cutoff: u8) -> Result<Self> {
        for (mode, &n) in occ.iter().enumerate() {
            if n > cutoff {
                return Err(Error::CutoffViolation {
                    mode,
                    occupation: n as u32,
                    cutoff,
                });
            }
        }
        let mut amps = BTreeMap::new();
        amps.insert(Occupation::from_slice(occ), c(1.0, 0.0));
        Ok(Self {
            num_modes: occ.len(),
            cutoff,
            policy: OverflowPolicy::Error,
            amps,
            leaked_norm: 0.0,
        })
    }

    /// Builds a state from raw (occupation, amplitude) terms. Terms with the
    /// same occupation are summed; near-zero results are dropped. The state is
    /// not normalized.
    pub fn from_terms<I>(num_modes: usize, cutoff: u8, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Occupation, C64)>,
    {
        let mut amps = BTreeMap::new();
        for (occ, amp) in terms {
            if occ.len() != num_modes {
                return Err(Error::ModeMismatch {
                    left: num_modes,
                    right: occ.len(),
                });
            }
            for (mode, &n) in occ.iter().enumerate() {
                if n > cutoff {
                    return Err(Error::CutoffViolation {
                        mode,
                        occupation: n as u32,
                        cutoff,
                    });
                }
            }
            let entry = amps.entry(occ).or_insert(c(0.0, 0.0));
            *entry += amp;
        }
        amps.retain(|_, a: &mut C64| a.norm() > AMP_DROP_TOL);
        Ok(Self {
            num_modes,
            cutoff,
            policy: OverflowPolicy::Error,
            amps,
            leaked_norm: 0.0,
        })
    }

    /// Single-mode state from dense amplitudes indexed by photon number.
    pub fn from_single_mode_amplitudes(amps: &[C64], cutoff: u8) -> Result<Self> {
        if amps.len() > cutoff as usize + 1 {
            return Err(Error::CutoffViolation {
                mode: 0,
                occupation: (amps.len() - 1) as u32,
                cutoff,
            });
        }
        Self::from_terms(
            1,
            cutoff,
            amps.iter()
                .enumerate()
                .map(|(n, &a)| (Occupation::from_slice(&[n as u8]), a)),
        )
    }

    pub(crate) fn from_map(
        num_modes: usize,
        cutoff: u8,
        policy: OverflowPolicy,
        mut amps: BTreeMap<Occupation, C64>,
        leaked_norm: f64,
    ) -> Self {
        amps.retain(|_, a| a.norm() > AMP_DROP_TOL);
        Self {
            num_modes,
            cutoff,
            policy,
            amps,
            leaked_norm,
        }
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> u8 {
        self.cutoff
    }

    pub fn overflow_policy(&self) -> OverflowPolicy {
        self.policy
    }

    /// Returns a copy using the given cutoff-overflow policy.
    pub fn with_policy(mut self, policy: OverflowPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Squared norm accumulated in terms dropped by the truncate policy.
    pub fn leaked_norm(&self) -> f64 {
        self.leaked_norm
    }

    /// Re-hosts the state at a different per-mode cutoff. Raising always
    /// succeeds; lowering fails if any stored occupation exceeds the new cap.
    pub fn with_cutoff(&self, cutoff: u8) -> Result<Self> {
        for (occ, _) in self.terms() {
            for (mode, &n) in occ.iter().enumerate() {
                if n > cutoff {
                    return Err(Error::CutoffViolation {
                        mode,
                        occupation: n as u32,
                        cutoff,
                    });
                }
            }
        }
        let mut out = self.clone();
        out.cutoff = cutoff;
        Ok(out)
    }

    /// Number of stored basis terms.
    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    /// Iterates stored terms in lexicographic occupation order.
    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &C64)> {
        self.amps.iter()
    }

    pub fn amplitude(&self, occ: &[u8]) -> C64 {
        self.amps
            .get(&Occupation::from_slice(occ))
            .copied()
            .unwrap_or(c(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_unit_norm(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Returns the normalized state, or an empty state when the norm is ~0.
    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        let mut out = self.clone();
        if n <= AMP_DROP_TOL {
            out.amps.clear();
            return out;
        }
        for a in out.amps.values_mut() {
            *a /= c(n, 0.0);
        }
        out
    }

    /// Multiplies every amplitude by a scalar.
    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for a in out.amps.values_mut() {
            *a *= factor;
        }
        out.amps.retain(|_, a| a.norm() > AMP_DROP_TOL);
        out
    }

    /// Inner product <self|other>, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.num_modes != other.num_modes {
            return Err(Error::ModeMismatch {
                left: self.num_modes,
                right: other.num_modes,
            });
        }
        let mut acc = c(0.0, 0.0);
        // iterate the sparser side
        let (small, big) = if self.amps.len() <= other.amps.len() {
            (&self.amps, &other.amps)
        } else {
            (&other.amps, &self.amps)
        };
        let swapped = self.amps.len() > other.amps.len();
        for (occ, a) in small {
            if let Some(b) = big.get(occ) {
                acc += if swapped { b.conj() * a } else { a.conj() * b };
            }
        }
        Ok(acc)
    }

    /// |<self|other>|^2 for normalized states; the global-phase-insensitive
    /// comparison used throughout the tests.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Tensor product; mode indices of `other` follow those of `self`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.cutoff != other.cutoff {
            return Err(Error::CutoffMismatch {
                left: self.cutoff,
                right: other.cutoff,
            });
        }
        let mut amps = BTreeMap::new();
        for (oa, ca) in &self.amps {
            for (ob, cb) in &other.amps {
                let mut occ = oa.clone();
                occ.extend_from_slice(ob);
                amps.insert(occ, ca * cb);
            }
        }
        Ok(Self::from_map(
            self.num_modes + other.num_modes,
            self.cutoff,
            self.policy,
            amps,
            self.leaked_norm + other.leaked_norm,
        ))
    }

    /// Ladder-operator application; the result is unnormalized by design
    /// (raise maps |n> to sqrt(n+1)|n+1>, lower to sqrt(n)|n-1>).
    pub fn apply_ladder(&self, mode: usize, op: Ladder) -> Result<Self> {
        if mode >= self.num_modes {
            return Err(Error::ModeOutOfRange {
                mode,
                num_modes: self.num_modes,
            });
        }
        let mut amps = BTreeMap::new();
        let mut leaked = self.leaked_norm;
        for (occ, amp) in &self.amps {
            let n = occ[mode];
            match op {
                Ladder::Raise => {
                    if n + 1 > self.cutoff {
                        match self.policy {
                            OverflowPolicy::Error => {
                                return Err(Error::CutoffViolation {
                                    mode,
                                    occupation: n as u32 + 1,
                                    cutoff: self.cutoff,
                                })
                            }
                            OverflowPolicy::Truncate => {
                                leaked += amp.norm_sqr() * (n as f64 + 1.0);
                                continue;
                            }
                        }
                    }
                    let mut o2 = occ.clone();
                    o2[mode] = n + 1;
                    let coeff = ((n as f64) + 1.0).sqrt();
                    *amps.entry(o2).or_insert(c(0.0, 0.0)) += amp * coeff;
                }
                Ladder::Lower => {
                    if n == 0 {
                        continue;
                    }
                    let mut o2 = occ.clone();
                    o2[mode] = n - 1;
                    let coeff = (n as f64).sqrt();
                    *amps.entry(o2).or_insert(c(0.0, 0.0)) += amp * coeff;
                }
            }
        }
        Ok(Self::from_map(
            self.num_modes,
            self.cutoff,
            self.policy,
            amps,
            leaked,
        ))
    }

    /// Removes a mode, keeping only terms where it holds exactly `n` photons.
    /// Returns the unnormalized remainder. Used by the measurement models.
    pub(crate) fn slice_mode(&self, mode: usize, n: u8) -> Self {
        let mut amps = BTreeMap::new();
        for (occ, amp) in &self.amps {
            if occ[mode] == n {
                let mut o2 = Occupation::with_capacity(occ.len() - 1);
                o2.extend_from_slice(&occ[..mode]);
                o2.extend_from_slice(&occ[mode + 1..]);
                amps.insert(o2, *amp);
            }
        }
        Self::from_map(
            self.num_modes - 1,
            self.cutoff,
            self.policy,
            amps,
            self.leaked_norm,
        )
    }

    /// Marginal photon-number distribution of one mode.
    pub fn mode_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        if mode >= self.num_modes {
            return Err(Error::ModeOutOfRange {
                mode,
                num_modes: self.num_modes,
            });
        }
        let mut dist = vec![0.0; self.cutoff as usize + 1];
        for (occ, amp) in &self.amps {
            dist[occ[mode] as usize] += amp.norm_sqr();
        }
        Ok(dist)
    }

    /// Dense amplitude vector for a single-mode state, indexed by photon number.
    pub fn single_mode_amplitudes(&self) -> Result<Vec<C64>> {
        if self.num_modes != 1 {
            return Err(Error::ModeMismatch {
                left: self.num_modes,
                right: 1,
            });
        }
        let mut v = vec![c(0.0, 0.0); self.cutoff as usize + 1];
        for (occ, amp) in &self.amps {
            v[occ[0] as usize] = *amp;
        }
        Ok(v)
    }
}

/// Raising or lowering ladder operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
}

/// Constructs the basis ket |n1,...,nm> with the given per-mode cutoff.
pub fn make_fock(occupations: &[u8], cutoff: u8) -> Result<FockState> {
    FockState::from_occupation(occupations, cutoff)
}

/// How a logical qudit maps onto physical modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingKind {
    /// Two modes; |0>_L = |1,0>, |1>_L = |0,1> (photon on the first rail is
    /// logical zero).
    DualRail,
    /// d modes; basis index i puts the photon on mode_indices[d-1-i], so the
    /// printed ket for |0>_L reads |0,...,0,1>.
    DRail,
}

/// Ordered physical modes carrying one logical qudit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalEncoding {
    kind: EncodingKind,
    mode_indices: Vec<usize>,
}

impl LogicalEncoding {
    pub fn dual_rail(rail0: usize, rail1: usize) -> Self {
        Self {
            kind: EncodingKind::DualRail,
            mode_indices: vec![rail0, rail1],
        }
    }

    pub fn d_rail(mode_indices: Vec<usize>) -> Result<Self> {
        if mode_indices.len() < 2 {
            return Err(Error::InvalidParameter(
                "d-rail encoding needs at least 2 modes".into(),
            ));
        }
        Ok(Self {
            kind: EncodingKind::DRail,
            mode_indices,
        })
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    /// Local dimension d.
    pub fn dimension(&self) -> usize {
        self.mode_indices.len()
    }

    pub fn mode_indices(&self) -> &[usize] {
        &self.mode_indices
    }

    /// The physical mode that carries the photon for a given basis index.
    pub fn mode_for_basis(&self, basis_index: usize) -> Result<usize> {
        let d = self.dimension();
        if basis_index >= d {
            return Err(Error::BasisOutOfRange {
                index: basis_index,
                dimension: d,
            });
        }
        Ok(match self.kind {
            EncodingKind::DualRail => self.mode_indices[basis_index],
            EncodingKind::DRail => self.mode_indices[d - 1 - basis_index],
        })
    }

    pub(crate) fn shift_after_removal(&mut self, removed: &[usize]) {
        for m in self.mode_indices.iter_mut() {
            let shift = removed.iter().filter(|&&r| r < *m).count();
            *m -= shift;
        }
    }
}

/// Encodes a logical basis state as a single-photon Fock state over
/// `max(mode_indices)+1` modes.
pub fn encode_logical(
    encoding: &LogicalEncoding,
    basis_index: usize,
    cutoff: u8,
) -> Result<FockState> {
    let mode = encoding.mode_for_basis(basis_index)?;
    let num_modes = encoding.mode_indices().iter().max().unwrap() + 1;
    let mut occ = vec![0u8; num_modes];
    occ[mode] = 1;
    FockState::from_occupation(&occ, cutoff)
}

/// Dual-rail state cos(theta)|0>_L + e^{-i phi} sin(theta)|1>_L.
pub fn bloch_state(theta: f64, phi: f64, cutoff: u8) -> FockState {
    let alpha = c(theta.cos(), 0.0);
    let beta = c(0.0, -phi).exp() * theta.sin();
    let mut amps = BTreeMap::new();
    amps.insert(Occupation::from_slice(&[1, 0]), alpha);
    amps.insert(Occupation::from_slice(&[0, 1]), beta);
    FockState::from_map(2, cutoff, OverflowPolicy::Error, amps, 0.0)
}

/// Exponential single-photon pulse envelope sqrt(gamma) e^{-gamma t/2}, t >= 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    gamma: f64,
}

impl PulseShape {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pulse decay rate must be positive, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Pulse amplitude at time t.
    pub fn amplitude(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.gamma.sqrt() * (-self.gamma * t / 2.0).exp()
        }
    }
}
