//! Measurement models: photon-counting projections, bucket and
//! photon-number-resolving POVMs with efficiency and dark counts, heralded
//! conditional maps, and homodyne quadrature statistics.

use rand::Rng;

use crate::fock::{FockState, Occupation};
use crate::interferometer::{apply_circuit, CircuitOp};
use crate::math::{c, oscillator_eigenfunctions, simpson, C64};
use crate::{Error, Result};

/// Detector parameters: efficiency, per-window dark-click probability, and
/// whether the detector resolves photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    eta: f64,
    dark_prob: f64,
    kind: DetectorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Bucket,
    Pnr,
}

impl DetectorModel {
    pub fn new(eta: f64, dark_prob: f64, kind: DetectorKind) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "efficiency must lie in [0,1], got {eta}"
            )));
        }
        if !(0.0..1.0).contains(&dark_prob) {
            return Err(Error::InvalidParameter(format!(
                "dark-count probability must lie in [0,1), got {dark_prob}"
            )));
        }
        Ok(Self {
            eta,
            dark_prob,
            kind,
        })
    }

    pub fn bucket(eta: f64, dark_prob: f64) -> Result<Self> {
        Self::new(eta, dark_prob, DetectorKind::Bucket)
    }

    pub fn pnr(eta: f64) -> Result<Self> {
        Self::new(eta, 0.0, DetectorKind::Pnr)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dark_prob(&self) -> f64 {
        self.dark_prob
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }
}

/// A POVM element diagonal in the number basis, stored as its diagonal over
/// 0..=cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPovm {
    diag: Vec<f64>,
}

impl DiagonalPovm {
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Expectation value on one mode of a state.
    pub fn expectation(&self, state: &FockState, mode: usize) -> Result<f64> {
        let dist = state.mode_distribution(mode)?;
        Ok(dist
            .iter()
            .zip(&self.diag)
            .map(|(p, e)| p * e)
            .sum())
    }
}

/// Bucket-detector POVM pair (no-click, click):
/// E0 = sum_n (1-eta)^n |n><n|, scaled by (1 - dark_prob); E1 = I - E0.
pub fn bucket_povm(detector: &DetectorModel, cutoff: u8) -> Result<(DiagonalPovm, DiagonalPovm)> {
    if detector.kind != DetectorKind::Bucket {
        return Err(Error::InvalidParameter(
            "bucket_povm requires a bucket detector".into(),
        ));
    }
    let dim = cutoff as usize + 1;
    let mut e0 = Vec::with_capacity(dim);
    let mut e1 = Vec::with_capacity(dim);
    for n in 0..dim {
        let quiet = (1.0 - detector.eta).powi(n as i32) * (1.0 - detector.dark_prob);
        e0.push(quiet);
        e1.push(1.0 - quiet);
    }
    Ok((DiagonalPovm { diag: e0 }, DiagonalPovm { diag: e1 }))
}

/// Photon-number-resolving POVM element for outcome n:
/// E_n = sum_{k>=n} C(k,n) eta^n (1-eta)^{k-n} |k><k|.
pub fn pnr_povm(detector: &DetectorModel, n: u8, cutoff: u8) -> Result<DiagonalPovm> {
    if detector.kind != DetectorKind::Pnr {
        return Err(Error::InvalidParameter(
            "pnr_povm requires a photon-number-resolving detector".into(),
        ));
    }
    let dim = cutoff as usize + 1;
    let mut diag = vec![0.0; dim];
    for (k, d) in diag.iter_mut().enumerate() {
        if k >= n as usize {
            *d = crate::math::binomial(k as u32, n as u32)
                * detector.eta.powi(n as i32)
                * (1.0 - detector.eta).powi((k - n as usize) as i32);
        }
    }
    Ok(DiagonalPovm { diag })
}

/// Conditional output of a photon-counting event: the normalized residual
/// state (empty when the outcome has zero probability), the Born probability
/// of the herald, and the per-mode counts that were registered. The measured
/// modes are removed from the state, photon absorption included.
#[derive(Debug, Clone)]
pub struct HeraldedResult {
    pub state: FockState,
    pub probability: f64,
    pub herald: Vec<(usize, u8)>,
}

/// Projects one mode onto exactly `n` photons. The measured mode is removed
/// from the state (the counted photons are absorbed).
pub fn project_count(state: &FockState, mode: usize, n: u8) -> Result<HeraldedResult> {
    if mode >= state.num_modes() {
        return Err(Error::ModeOutOfRange {
            mode,
            num_modes: state.num_modes(),
        });
    }
    let raw = state.slice_mode(mode, n);
    let probability = raw.norm_sqr();
    Ok(HeraldedResult {
        state: raw.normalized(),
        probability,
        herald: vec![(mode, n)],
    })
}

/// Applies a circuit, then projects each listed ancilla mode onto the given
/// count. Ancilla modes refer to indices in the input state; they are removed
/// from the output. Returns the joint conditional state and probability.
pub fn herald(
    state: &FockState,
    circuit: &[CircuitOp],
    herald_spec: &[(usize, u8)],
) -> Result<HeraldedResult> {
    for (i, (m, _)) in herald_spec.iter().enumerate() {
        if *m >= state.num_modes() {
            return Err(Error::ModeOutOfRange {
                mode: *m,
                num_modes: state.num_modes(),
            });
        }
        if herald_spec[..i].iter().any(|(m2, _)| m2 == m) {
            return Err(Error::DuplicateTargets);
        }
    }
    let evolved = apply_circuit(state, circuit)?;
    let mut raw = evolved;
    // Project in descending mode order so earlier indices stay valid.
    let mut spec: Vec<(usize, u8)> = herald_spec.to_vec();
    spec.sort_by(|a, b| b.0.cmp(&a.0));
    for &(mode, n) in &spec {
        raw = raw.slice_mode(mode, n);
    }
    let probability = raw.norm_sqr();
    Ok(HeraldedResult {
        state: raw.normalized(),
        probability,
        herald: herald_spec.to_vec(),
    })
}

/// Enumerates every herald pattern on the given ancilla modes, returning all
/// outcomes with their probabilities. The probabilities sum to 1 when the
/// circuit is unitary.
pub fn herald_enumerate(
    state: &FockState,
    circuit: &[CircuitOp],
    ancilla_modes: &[usize],
) -> Result<Vec<HeraldedResult>> {
    let evolved = apply_circuit(state, circuit)?;
    let mut patterns: std::collections::BTreeSet<Occupation> = std::collections::BTreeSet::new();
    for (occ, _) in evolved.terms() {
        patterns.insert(ancilla_modes.iter().map(|&m| occ[m]).collect());
    }
    let mut results = Vec::new();
    for pattern in patterns {
        let mut raw = evolved.clone();
        let mut modes: Vec<(usize, u8)> = ancilla_modes
            .iter()
            .copied()
            .zip(pattern.iter().copied())
            .collect();
        modes.sort_by(|a, b| b.0.cmp(&a.0));
        for &(mode, n) in &modes {
            raw = raw.slice_mode(mode, n);
        }
        let probability = raw.norm_sqr();
        if probability <= 0.0 {
            continue;
        }
        results.push(HeraldedResult {
            state: raw.normalized(),
            probability,
            herald: ancilla_modes
                .iter()
                .copied()
                .zip(pattern.iter().copied())
                .collect(),
        });
    }
    Ok(results)
}

/// Local-oscillator phase and detector rate constant for homodyne detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneSetting {
    pub theta: f64,
    pub kappa: f64,
}

impl Default for HomodyneSetting {
    fn default() -> Self {
        Self {
            theta: 0.0,
            kappa: 1.0,
        }
    }
}

/// Uniform quadrature grid; always an odd number of points so Simpson
/// weights apply.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    step: f64,
}

impl QuadratureGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 3 || max <= min {
            return Err(Error::InvalidParameter(
                "grid needs at least 3 points and max > min".into(),
            ));
        }
        let points = if points % 2 == 0 { points + 1 } else { points };
        let step = (max - min) / (points - 1) as f64;
        Ok(Self {
            points: (0..points).map(|i| min + i as f64 * step).collect(),
            step,
        })
    }

    /// A grid wide and fine enough for states up to the given cutoff: range
    /// covers the classical turning point of the highest level plus a margin,
    /// spacing resolves the fastest oscillation.
    pub fn for_cutoff(cutoff: u8) -> Self {
        let scale = (2.0 * cutoff as f64 + 1.0).sqrt();
        let extent = scale + 6.0;
        let step_target = (0.05f64).min(std::f64::consts::PI / (6.0 * scale.max(1.0)));
        let n = ((2.0 * extent / step_target).ceil() as usize) | 1;
        Self::new(-extent, extent, n).expect("auto grid construction")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        simpson(values, self.step)
    }
}

/// Rotated-quadrature wavefunction of a single-mode state on a grid:
/// psi_theta(q) = sum_n c_n e^{-i n theta} phi_n(q).
pub fn quadrature_wavefunction(
    state: &FockState,
    theta: f64,
    grid: &QuadratureGrid,
) -> Result<Vec<C64>> {
    let amps = state.single_mode_amplitudes()?;
    let n_max = amps.len() - 1;
    let phi = oscillator_eigenfunctions(n_max, grid.points());
    let mut wf = vec![c(0.0, 0.0); grid.points().len()];
    for (n, amp) in amps.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let rot = amp * c(0.0, -(n as f64) * theta).exp();
        for (i, w) in wf.iter_mut().enumerate() {
            *w += rot * phi[n][i];
        }
    }
    Ok(wf)
}

/// Probability density of the rotated quadrature, |psi_theta(q)|^2, sampled
/// on the grid. Errors when the grid cannot represent the state (density
/// integral deviates from 1 by more than 1e-6).
pub fn quadrature_pdf(
    state: &FockState,
    setting: &HomodyneSetting,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    let wf = quadrature_wavefunction(state, setting.theta, grid)?;
    let density: Vec<f64> = wf.iter().map(|w| w.norm_sqr()).collect();
    let integral = grid.integrate(&density);
    if (integral - 1.0).abs() > 1e-6 {
        return Err(Error::GridTooCoarse { integral });
    }
    Ok(density)
}

/// Precomputed inverse-CDF sampler for the integrated homodyne variable of a
/// single-mode state. Sampling draws from the quadrature marginal directly.
#[derive(Debug, Clone)]
pub struct HomodyneSampler {
    grid_points: Vec<f64>,
    cdf: Vec<f64>,
    kappa: f64,
}

impl HomodyneSampler {
    pub fn new(state: &FockState, setting: &HomodyneSetting, grid: &QuadratureGrid) -> Result<Self> {
        let density = quadrature_pdf(state, setting, grid)?;
        let mut cdf = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        // trapezoid accumulation keeps the CDF monotone
        cdf.push(0.0);
        for i in 1..density.len() {
            acc += 0.5 * (density[i - 1] + density[i]) * grid.step();
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(Self {
            grid_points: grid.points().to_vec(),
            cdf,
            kappa: setting.kappa,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = match self
            .cdf
            .binary_search_by(|p| p.partial_cmp(&u).unwrap())
        {
            Ok(i) => i,
            Err(i) => i,
        };
        let q = if idx == 0 {
            self.grid_points[0]
        } else if idx >= self.cdf.len() {
            *self.grid_points.last().unwrap()
        } else {
            // linear interpolation within the bracketing cell
            let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
            let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
            self.grid_points[idx - 1] + frac * (self.grid_points[idx] - self.grid_points[idx - 1])
        };
        self.kappa.sqrt() * q
    }
}

/// Draws one homodyne sample; for repeated draws on the same state, build a
/// `HomodyneSampler` once.
pub fn homodyne_sample<R: Rng + ?Sized>(
    state: &FockState,
    setting: &HomodyneSetting,
    grid: &QuadratureGrid,
    rng: &mut R,
) -> Result<f64> {
    Ok(HomodyneSampler::new(state, setting, grid)?.sample(rng))
}
