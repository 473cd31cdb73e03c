//! Cluster states, measurement-based computation with feed-forward, the two
//! fusion gates as exact heralded Fock maps and as graph-level rewrites, and
//! Monte Carlo accounting for linear-cluster growth.
//!
//! Two tiers: an exact Fock tier for verification at small photon number, and
//! a graph tier (graph plus classical Pauli frame) whose rewrite rules are
//! pinned to the Fock tier by the cross-validation tests.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};

use crate::detection::herald_enumerate;
use crate::fock::FockState;
use crate::interferometer::{
    apply_unitary, half_waveplate, phase_gate, polarising_beamsplitter, CircuitOp, Pauli,
};
use crate::klm::{cz_gate, DualRailQubitRegister, NsGateSpec};
use crate::math::{c, C64};
use crate::{Error, Result};

pub type NodeId = u32;

/// Qubit nodes, entanglement edges, and redundancy groups (logical qubits
/// spread over several photons).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterGraph {
    nodes: BTreeSet<NodeId>,
    edges: BTreeSet<(NodeId, NodeId)>,
    redundancy: Vec<BTreeSet<NodeId>>,
}

impl ClusterGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Linear cluster 0 - 1 - ... - (n-1).
    pub fn line(n: usize) -> Self {
        let mut g = Self::new();
        for i in 0..n {
            g.add_node(i as NodeId);
        }
        for i in 1..n {
            g.add_edge((i - 1) as NodeId, i as NodeId).unwrap();
        }
        g
    }

    pub fn add_node(&mut self, v: NodeId) {
        self.nodes.insert(v);
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        if a == b {
            return Err(Error::InvalidParameter("self-edges are not allowed".into()));
        }
        if !self.nodes.contains(&a) || !self.nodes.contains(&b) {
            return Err(Error::InvalidParameter(format!(
                "edge ({a},{b}) references a missing node"
            )));
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn neighbors(&self, v: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Removes a node and its incident edges, and drops it from any
    /// redundancy group.
    pub fn remove_node(&mut self, v: NodeId) {
        self.nodes.remove(&v);
        self.edges.retain(|&(a, b)| a != v && b != v);
        for group in self.redundancy.iter_mut() {
            group.remove(&v);
        }
        self.redundancy.retain(|g| g.len() > 1);
    }

    /// Merges node `b` into node `a`: `a` inherits `b`'s edges, `b` is removed.
    pub fn merge_nodes(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        if !self.contains(a) || !self.contains(b) {
            return Err(Error::InvalidParameter("merge of missing node".into()));
        }
        let bn = self.neighbors(b);
        self.remove_node(b);
        for n in bn {
            if n != a {
                self.add_edge(a, n)?;
            }
        }
        Ok(())
    }

    /// Declares a redundancy group; groups must stay disjoint.
    pub fn add_redundancy_group(&mut self, members: BTreeSet<NodeId>) -> Result<()> {
        for existing in &self.redundancy {
            if !existing.is_disjoint(&members) {
                return Err(Error::InvalidParameter(
                    "redundancy groups must be disjoint".into(),
                ));
            }
        }
        for m in &members {
            if !self.nodes.contains(m) {
                return Err(Error::InvalidParameter(
                    "redundancy group references a missing node".into(),
                ));
            }
        }
        self.redundancy.push(members);
        Ok(())
    }

    pub fn redundancy_groups(&self) -> &[BTreeSet<NodeId>] {
        &self.redundancy
    }

    /// Sorted node list; the register built by `build_cluster` orders its
    /// qubits this way.
    pub fn sorted_nodes(&self) -> Vec<NodeId> {
        self.nodes.iter().copied().collect()
    }
}

/// Builds the cluster state of a graph with ideal logical gates: every qubit
/// in |+>, then a CZ across each edge. Qubit order follows sorted node ids.
pub fn build_cluster(graph: &ClusterGraph, cutoff: u8) -> Result<DualRailQubitRegister> {
    let order = graph.sorted_nodes();
    let index: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut reg = DualRailQubitRegister::new(order.len(), cutoff);
    for q in 0..order.len() {
        reg = reg.hadamard(q)?;
    }
    for (a, b) in graph.edges() {
        reg = reg.ideal_cz(index[&a], index[&b])?;
    }
    Ok(reg)
}

/// Builds the same cluster through the heralded CZ gate, restarting the whole
/// construction whenever a gate's herald fails. Returns the state and the
/// total number of CZ attempts.
pub fn build_cluster_heralded<R: Rng + ?Sized>(
    graph: &ClusterGraph,
    spec: &NsGateSpec,
    rng: &mut R,
    max_attempts: u64,
) -> Result<(DualRailQubitRegister, u64)> {
    let order = graph.sorted_nodes();
    let index: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut attempts = 0u64;
    'build: loop {
        let mut reg = DualRailQubitRegister::new(order.len(), 2);
        for q in 0..order.len() {
            reg = reg.hadamard(q)?;
        }
        for (a, b) in graph.edges() {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::Config(format!(
                    "heralded cluster build exceeded {max_attempts} CZ attempts"
                )));
            }
            let result = cz_gate(&reg, index[&a], index[&b], spec)?;
            if rng.random::<f64>() < result.probability {
                reg = result.register;
            } else {
                continue 'build;
            }
        }
        return Ok((reg, attempts));
    }
}

/// Measurement basis for one cluster qubit. `Rotated(theta)` measures in
/// {(|0> + e^{i theta}|1>)/sqrt2, (|0> - e^{i theta}|1>)/sqrt2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementBasis {
    X,
    Z,
    Rotated(f64),
}

/// One step of a pattern: which register qubit to measure, in which basis,
/// and optionally which earlier step's outcome flips the rotation angle.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementStep {
    pub qubit: usize,
    pub basis: MeasurementBasis,
    pub flip_angle_on: Option<usize>,
}

impl MeasurementStep {
    pub fn new(qubit: usize, basis: MeasurementBasis) -> Self {
        Self {
            qubit,
            basis,
            flip_angle_on: None,
        }
    }
}

/// Pauli correction applied to a surviving qubit when an earlier outcome is 1.
#[derive(Debug, Clone, Copy)]
pub struct FeedForwardRule {
    pub source_step: usize,
    pub target_qubit: usize,
    pub pauli: Pauli,
}

/// Ordered measurements with outcome-conditioned corrections.
#[derive(Debug, Clone, Default)]
pub struct MeasurementPattern {
    pub steps: Vec<MeasurementStep>,
    pub feed_forward: Vec<FeedForwardRule>,
}

impl MeasurementPattern {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in &self.steps {
            if !seen.insert(s.qubit) {
                return Err(Error::InvalidParameter(format!(
                    "qubit {} measured more than once",
                    s.qubit
                )));
            }
        }
        Ok(())
    }
}

/// Measures one register qubit in the given basis. With `forced` the branch
/// is selected deterministically and its probability returned; otherwise the
/// outcome is sampled from the Born rule. The qubit's two modes are removed.
pub fn measure_logical<R: Rng + ?Sized>(
    register: &DualRailQubitRegister,
    qubit: usize,
    basis: MeasurementBasis,
    forced: Option<u8>,
    rng: Option<&mut R>,
) -> Result<(u8, f64, DualRailQubitRegister)> {
    if qubit >= register.n_qubits() {
        return Err(Error::ModeOutOfRange {
            mode: qubit,
            num_modes: register.n_qubits(),
        });
    }
    let rails = register.qubit(qubit).mode_indices().to_vec();
    let prepped = match basis {
        MeasurementBasis::Z => register.state().clone(),
        MeasurementBasis::X => apply_unitary(register.state(), &half_waveplate(), &rails)?,
        MeasurementBasis::Rotated(theta) => {
            let dephased = apply_unitary(register.state(), &phase_gate(-theta / 2.0), &rails)?;
            apply_unitary(&dephased, &half_waveplate(), &rails)?
        }
    };
    // outcome s: photon on rail (1-s)... rail0 carries logical 0
    let branch = |s: u8| -> FockState {
        let hi = rails[0].max(rails[1]);
        let lo = rails[0].min(rails[1]);
        // occupancy: rail0 = 1-s, rail1 = s
        let (hi_occ, lo_occ) = if hi == rails[1] {
            (s, 1 - s)
        } else {
            (1 - s, s)
        };
        prepped.slice_mode(hi, hi_occ).slice_mode(lo, lo_occ)
    };
    let raw0 = branch(0);
    let raw1 = branch(1);
    let (p0, p1) = (raw0.norm_sqr(), raw1.norm_sqr());
    let total = p0 + p1;
    if total < 1e-28 {
        return Err(Error::CodeSpaceViolation);
    }
    let outcome = match forced {
        Some(s) => s,
        None => {
            let r: f64 = rng
                .expect("rng required when outcome is not forced")
                .random();
            u8::from(r * total >= p0)
        }
    };
    let (raw, p) = if outcome == 0 { (raw0, p0) } else { (raw1, p1) };
    let residual = register.drop_qubits(&[qubit], raw.normalized());
    Ok((outcome, p, residual))
}

/// Outcome record of a pattern run.
#[derive(Debug, Clone)]
pub struct PatternRun {
    pub outcomes: Vec<u8>,
    pub residual: DualRailQubitRegister,
}

/// Runs a measurement pattern with Born-rule sampling and feed-forward.
/// Step qubit indices refer to the register as it was at the start; the
/// shifting of indices as qubits are consumed is handled internally.
pub fn run_pattern<R: Rng + ?Sized>(
    register: &DualRailQubitRegister,
    pattern: &MeasurementPattern,
    rng: &mut R,
) -> Result<PatternRun> {
    pattern.validate()?;
    let mut reg = register.clone();
    let mut outcomes = Vec::with_capacity(pattern.steps.len());
    // live[i] = current index of original qubit i, or None once measured
    let mut live: Vec<Option<usize>> = (0..register.n_qubits()).map(Some).collect();

    for step in &pattern.steps {
        let idx = live[step.qubit].ok_or(Error::InvalidParameter(format!(
            "qubit {} already consumed",
            step.qubit
        )))?;
        let basis = match (step.basis, step.flip_angle_on) {
            (MeasurementBasis::Rotated(theta), Some(src)) if outcomes.get(src) == Some(&1u8) => {
                MeasurementBasis::Rotated(-theta)
            }
            (b, _) => b,
        };
        let (outcome, _p, next) = measure_logical(&reg, idx, basis, None, Some(rng))?;
        outcomes.push(outcome);
        reg = next;
        for entry in live.iter_mut() {
            if let Some(i) = entry {
                match (*i).cmp(&idx) {
                    std::cmp::Ordering::Greater => *i -= 1,
                    std::cmp::Ordering::Equal => *entry = None,
                    std::cmp::Ordering::Less => {}
                }
            }
        }
        live[step.qubit] = None;
    }

    for rule in &pattern.feed_forward {
        if outcomes.get(rule.source_step) == Some(&1u8) {
            if let Some(idx) = live[rule.target_qubit] {
                let state = crate::interferometer::pauli_logical(
                    reg.state(),
                    reg.qubit(idx),
                    rule.pauli,
                )?;
                reg = reg.replace_state(state);
            }
        }
    }
    Ok(PatternRun {
        outcomes,
        residual: reg,
    })
}

fn apply_zz_phase(
    register: &DualRailQubitRegister,
    qa: usize,
    qb: usize,
    angle: f64,
) -> Result<DualRailQubitRegister> {
    let ra = register.qubit(qa).mode_indices().to_vec();
    let rb = register.qubit(qb).mode_indices().to_vec();
    let terms: Vec<_> = register
        .state()
        .terms()
        .map(|(occ, amp)| {
            let za = if occ[ra[1]] == 1 { -1.0 } else { 1.0 };
            let zb = if occ[rb[1]] == 1 { -1.0 } else { 1.0 };
            let phase = c(0.0, -angle * za * zb).exp();
            (occ.clone(), amp * phase)
        })
        .collect();
    let state = FockState::from_terms(register.state().num_modes(), register.state().cutoff(), terms)?;
    Ok(register.replace_state(state))
}

fn apply_logical_matrix(
    register: &DualRailQubitRegister,
    qubit: usize,
    u: [[C64; 2]; 2],
) -> Result<DualRailQubitRegister> {
    // stored mode matrix M acts on amplitudes as M^dag, so store U^dag
    let mut m = ndarray::Array2::zeros((2, 2));
    for j in 0..2 {
        for k in 0..2 {
            m[(j, k)] = u[k][j].conj();
        }
    }
    let unitary = crate::interferometer::ModeUnitary::new(m)?;
    let rails = register.qubit(qubit).mode_indices().to_vec();
    let state = apply_unitary(register.state(), &unitary, &rails)?;
    Ok(register.replace_state(state))
}

/// One measurement branch of the cluster CNOT.
#[derive(Debug, Clone, Copy)]
pub struct CnotBranch {
    pub s1: u8,
    pub s2: u8,
    pub probability: f64,
    pub q3: u8,
    pub q4: u8,
    /// Whether the readout was deterministic on this branch.
    pub deterministic: bool,
}

/// Runs the four-qubit cluster CNOT over every measurement branch.
///
/// The initial state is |i1> |+> |+> |i4> entangled by the three ZZ
/// interactions on pairs (1,2), (2,3), (2,4); qubits 1 and 2 are measured in
/// X, the conditional correction is applied to qubit 3, and both remaining
/// qubits are read out in Z. The correction applies the y-axis rotation
/// first and the conditional bit flip second (the composition order that
/// reproduces the stated truth table on every branch).
pub fn mbqc_cnot(i1: u8, i4: u8) -> Result<Vec<CnotBranch>> {
    if i1 > 1 || i4 > 1 {
        return Err(Error::InvalidParameter("inputs must be bits".into()));
    }
    let mut amps = BTreeMap::new();
    let half = c(0.5, 0.0);
    for b2 in 0..2u8 {
        for b3 in 0..2u8 {
            amps.insert(vec![i1, b2, b3, i4], half);
        }
    }
    let reg = DualRailQubitRegister::from_logical_amplitudes(4, &amps, 1)?;
    let reg = apply_zz_phase(&reg, 0, 1, std::f64::consts::FRAC_PI_4)?;
    let reg = apply_zz_phase(&reg, 1, 2, std::f64::consts::FRAC_PI_4)?;
    let reg = apply_zz_phase(&reg, 1, 3, std::f64::consts::FRAC_PI_4)?;

    let inv = 1.0 / 2f64.sqrt();
    let ry_phase = c(0.0, -std::f64::consts::FRAC_PI_4).exp();
    let ry = [
        [ry_phase * inv, ry_phase * -inv],
        [ry_phase * inv, ry_phase * inv],
    ];

    let mut branches = Vec::with_capacity(4);
    for s1 in 0..2u8 {
        for s2 in 0..2u8 {
            let (_, p1, r1) = measure_logical::<rand::rngs::ThreadRng>(
                &reg,
                0,
                MeasurementBasis::X,
                Some(s1),
                None,
            )?;
            let (_, p2, r2) =
                measure_logical::<rand::rngs::ThreadRng>(&r1, 0, MeasurementBasis::X, Some(s2), None)?;
            // qubit 3 now at index 0, qubit 4 at index 1
            let mut r = apply_logical_matrix(&r2, 0, ry)?;
            if s2 == 1 {
                let state =
                    crate::interferometer::pauli_logical(r.state(), r.qubit(0), Pauli::X)?;
                r = r.replace_state(state);
            }
            let (log, _) = r.logical_amplitudes();
            let p_q3_one: f64 = log
                .iter()
                .filter(|(bits, _)| bits[0] == 1)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            let p_q4_one: f64 = log
                .iter()
                .filter(|(bits, _)| bits[1] == 1)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            let deterministic = p_q3_one < 1e-12 || p_q3_one > 1.0 - 1e-12;
            branches.push(CnotBranch {
                s1,
                s2,
                probability: p1 * p2,
                q3: u8::from(p_q3_one > 0.5),
                q4: u8::from(p_q4_one > 0.5),
                deterministic,
            });
        }
    }
    Ok(branches)
}

/// Samples one run of the cluster CNOT; returns the output bits of qubits 3
/// and 4 and whether the readout was deterministic on the sampled branch.
pub fn mbqc_cnot_sampled<R: Rng + ?Sized>(i1: u8, i4: u8, rng: &mut R) -> Result<((u8, u8), bool)> {
    let branches = mbqc_cnot(i1, i4)?;
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for b in &branches {
        acc += b.probability;
        if r < acc {
            return Ok(((b.q3, b.q4), b.deterministic));
        }
    }
    let last = branches.last().expect("branches exist");
    Ok(((last.q3, last.q4), last.deterministic))
}

/// How a fusion attempt resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionBranch {
    /// Fused; `sign_flip` records the K- (type I) or the odd-parity (type II)
    /// herald, which costs a Z byproduct on the merged qubit / the second
    /// input's neighbors.
    Success { sign_flip: bool },
    /// Type-I failure: both inputs were effectively Z-measured with these
    /// outcomes.
    FailureZ { outcome_a: u8, outcome_b: u8 },
    /// Type-II failure: both inputs were effectively X-measured with these
    /// outcomes.
    FailureX { outcome_a: u8, outcome_b: u8 },
}

/// Result of a fusion attempt: the herald pattern, its probability, the
/// branch classification, and the residual register.
#[derive(Debug, Clone)]
pub struct FusionOutcome {
    pub branch: FusionBranch,
    pub herald: Vec<(usize, u8)>,
    pub probability: f64,
}

impl FusionOutcome {
    pub fn success(&self) -> bool {
        matches!(self.branch, FusionBranch::Success { .. })
    }
}

fn fusion1_classify(herald: &[(usize, u8)]) -> FusionBranch {
    let counts: Vec<u8> = herald.iter().map(|&(_, n)| n).collect();
    match (counts[0], counts[1]) {
        // single H click -> K-, single V click -> K+
        (1, 0) => FusionBranch::Success { sign_flip: true },
        (0, 1) => FusionBranch::Success { sign_flip: false },
        (0, 0) => FusionBranch::FailureZ {
            outcome_a: 0,
            outcome_b: 1,
        },
        _ => FusionBranch::FailureZ {
            outcome_a: 1,
            outcome_b: 0,
        },
    }
}

/// All herald branches of a type-I fusion of two register qubits. Qubit `qa`
/// survives as the fused qubit on success; `qb`'s photon is routed through
/// the polarising beamsplitter, rotated to the diagonal basis, and counted.
/// Failure (count 0 or 2) leaves both inputs Z-measured.
pub fn fusion_type1_branches(
    register: &DualRailQubitRegister,
    qa: usize,
    qb: usize,
) -> Result<Vec<(FusionOutcome, DualRailQubitRegister)>> {
    if qa == qb {
        return Err(Error::DuplicateTargets);
    }
    let ra = register.qubit(qa).mode_indices().to_vec();
    let rb = register.qubit(qb).mode_indices().to_vec();
    if ra.iter().any(|m| rb.contains(m)) {
        return Err(Error::DuplicateTargets);
    }
    let circuit = vec![
        CircuitOp::new(
            polarising_beamsplitter(),
            vec![ra[0], ra[1], rb[0], rb[1]],
        ),
        CircuitOp::new(half_waveplate(), vec![rb[0], rb[1]]),
    ];
    let state = register.state().with_cutoff(register.state().cutoff().max(2))?;
    let results = herald_enumerate(&state, &circuit, &[rb[0], rb[1]])?;

    let mut out = Vec::new();
    for r in results {
        let branch = fusion1_classify(&r.herald);
        let residual = match &branch {
            FusionBranch::Success { .. } => register.drop_qubits(&[qb], r.state),
            FusionBranch::FailureZ { .. } => {
                // the surviving channel holds a definite photon pattern:
                // (1,1) after a zero count, (0,0) after a double count
                let occ = if r.herald.iter().map(|&(_, n)| n).sum::<u8>() == 0 {
                    (1u8, 1u8)
                } else {
                    (0u8, 0u8)
                };
                // ra indices are still valid: rb modes were behind... recompute
                // positions of ra in the reduced state.
                let mut ra_shifted = ra.clone();
                for m in ra_shifted.iter_mut() {
                    let shift = rb.iter().filter(|&&b| b < *m).count();
                    *m -= shift;
                }
                let hi = ra_shifted[0].max(ra_shifted[1]);
                let lo = ra_shifted[0].min(ra_shifted[1]);
                let (hi_occ, lo_occ) = if hi == ra_shifted[1] {
                    (occ.1, occ.0)
                } else {
                    (occ.0, occ.1)
                };
                let sliced = r.state.slice_mode(hi, hi_occ).slice_mode(lo, lo_occ);
                register.drop_qubits(&[qa, qb], sliced.normalized())
            }
            FusionBranch::FailureX { .. } => unreachable!("type I never emits X failures"),
        };
        out.push((
            FusionOutcome {
                branch,
                herald: r.herald,
                probability: r.probability,
            },
            residual,
        ));
    }
    Ok(out)
}

/// Samples one type-I fusion attempt.
pub fn fusion_type1<R: Rng + ?Sized>(
    register: &DualRailQubitRegister,
    qa: usize,
    qb: usize,
    rng: &mut R,
) -> Result<(FusionOutcome, DualRailQubitRegister)> {
    let branches = fusion_type1_branches(register, qa, qb)?;
    sample_branch(branches, rng)
}

fn sample_branch<R: Rng + ?Sized>(
    branches: Vec<(FusionOutcome, DualRailQubitRegister)>,
    rng: &mut R,
) -> Result<(FusionOutcome, DualRailQubitRegister)> {
    let total: f64 = branches.iter().map(|(o, _)| o.probability).sum();
    let r: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for item in branches.into_iter() {
        acc += item.0.probability;
        if r < acc {
            return Ok(item);
        }
    }
    Err(Error::InvalidParameter("empty branch set".into()))
}

fn fusion2_classify(herald: &[(usize, u8)]) -> FusionBranch {
    let n: Vec<u8> = herald.iter().map(|&(_, c)| c).collect();
    let (ch_a, ch_b) = (n[0] + n[1], n[2] + n[3]);
    if ch_a == 1 && ch_b == 1 {
        // one photon at each counter; equal polarisations herald the
        // even-parity projection, crossed ones the odd-parity projection
        let sign_flip = n[0] != n[2];
        FusionBranch::Success { sign_flip }
    } else if ch_a == 2 {
        FusionBranch::FailureX {
            outcome_a: 1,
            outcome_b: 0,
        }
    } else {
        FusionBranch::FailureX {
            outcome_a: 0,
            outcome_b: 1,
        }
    }
}

/// All herald branches of a type-II fusion: both qubits are rotated to the
/// diagonal basis, interfered on the polarising beamsplitter, rotated back,
/// and all four modes are counted. Success (one photon at each counter)
/// projects the pair onto (|00> + |11>)/sqrt2 or (|01> + |10>)/sqrt2 and
/// absorbs both photons; failure (both photons at one counter) effectively
/// X-measures both inputs.
pub fn fusion_type2_branches(
    register: &DualRailQubitRegister,
    qa: usize,
    qb: usize,
) -> Result<Vec<(FusionOutcome, DualRailQubitRegister)>> {
    if qa == qb {
        return Err(Error::DuplicateTargets);
    }
    let ra = register.qubit(qa).mode_indices().to_vec();
    let rb = register.qubit(qb).mode_indices().to_vec();
    if ra.iter().any(|m| rb.contains(m)) {
        return Err(Error::DuplicateTargets);
    }
    let circuit = vec![
        CircuitOp::new(half_waveplate(), vec![ra[0], ra[1]]),
        CircuitOp::new(half_waveplate(), vec![rb[0], rb[1]]),
        CircuitOp::new(
            polarising_beamsplitter(),
            vec![ra[0], ra[1], rb[0], rb[1]],
        ),
        CircuitOp::new(half_waveplate(), vec![ra[0], ra[1]]),
        CircuitOp::new(half_waveplate(), vec![rb[0], rb[1]]),
    ];
    let state = register.state().with_cutoff(register.state().cutoff().max(2))?;
    let results = herald_enumerate(&state, &circuit, &[ra[0], ra[1], rb[0], rb[1]])?;

    let mut out = Vec::new();
    for r in results {
        let branch = fusion2_classify(&r.herald);
        let residual = register.drop_qubits(&[qa, qb], r.state);
        out.push((
            FusionOutcome {
                branch,
                herald: r.herald,
                probability: r.probability,
            },
            residual,
        ));
    }
    Ok(out)
}

/// Samples one type-II fusion attempt.
pub fn fusion_type2<R: Rng + ?Sized>(
    register: &DualRailQubitRegister,
    qa: usize,
    qb: usize,
    rng: &mut R,
) -> Result<(FusionOutcome, DualRailQubitRegister)> {
    let branches = fusion_type2_branches(register, qa, qb)?;
    sample_branch(branches, rng)
}

/// X-measures a cluster qubit, combining its neighbors into one two-photon
/// redundantly encoded qubit (|0> = |00>, |1> = |11| in the post-correction
/// frame). Returns the outcome, the branch probability, and the residual
/// register; on outcome 1 the caller owes an X correction on one neighbor.
pub fn x_merge<R: Rng + ?Sized>(
    register: &DualRailQubitRegister,
    qubit: usize,
    rng: &mut R,
) -> Result<(u8, f64, DualRailQubitRegister)> {
    measure_logical(register, qubit, MeasurementBasis::X, None, Some(rng))
}

/// Deterministic-branch variant of `x_merge` used by the exhaustive tests.
pub fn x_merge_branch(
    register: &DualRailQubitRegister,
    qubit: usize,
    outcome: u8,
) -> Result<(f64, DualRailQubitRegister)> {
    let (_, p, reg) = measure_logical::<rand::rngs::ThreadRng>(
        register,
        qubit,
        MeasurementBasis::X,
        Some(outcome),
        None,
    )?;
    Ok((p, reg))
}

/// Graph-tier cluster: a graph plus a classical Pauli frame, rewritten by
/// measurement and fusion outcomes. The rewrite rules mirror the exact Fock
/// maps; the cross-validation tests pin them together.
#[derive(Debug, Clone, Default)]
pub struct GraphCluster {
    pub graph: ClusterGraph,
    /// Accumulated byproduct operators per node: (x, z) toggles.
    pub frame: BTreeMap<NodeId, (bool, bool)>,
}

impl GraphCluster {
    pub fn new(graph: ClusterGraph) -> Self {
        Self {
            graph,
            frame: BTreeMap::new(),
        }
    }

    fn toggle_z(&mut self, v: NodeId) {
        let entry = self.frame.entry(v).or_insert((false, false));
        entry.1 = !entry.1;
    }

    /// Z-measurement rewrite: the node is cut out; outcome 1 leaves Z
    /// byproducts on its neighbors.
    pub fn z_measure(&mut self, v: NodeId, outcome: u8) {
        let neighbors = self.graph.neighbors(v);
        self.graph.remove_node(v);
        self.frame.remove(&v);
        if outcome == 1 {
            for n in neighbors {
                self.toggle_z(n);
            }
        }
    }

    /// Type-I fusion rewrite. On success qubit `b` merges into `a` (which
    /// inherits all bonds); the K- herald leaves a Z byproduct on the fused
    /// qubit. On failure both inputs are Z-measured with the heralded
    /// outcomes.
    pub fn fuse1(&mut self, a: NodeId, b: NodeId, branch: &FusionBranch) -> Result<()> {
        match branch {
            FusionBranch::Success { sign_flip } => {
                self.graph.merge_nodes(a, b)?;
                self.frame.remove(&b);
                if *sign_flip {
                    self.toggle_z(a);
                }
            }
            FusionBranch::FailureZ {
                outcome_a,
                outcome_b,
            } => {
                self.z_measure(a, *outcome_a);
                self.z_measure(b, *outcome_b);
            }
            FusionBranch::FailureX { .. } => {
                return Err(Error::InvalidParameter(
                    "type-I fusion cannot produce an X failure".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Cost record of one growth trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialCost {
    pub bell_pairs: u64,
    pub added_qubits: u64,
}

/// A cluster-growth bookkeeping strategy for the resource Monte Carlo.
/// Strategies are registered by name and selected at runtime.
pub trait GrowthStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Fusion success probability assumed by this strategy.
    fn success_probability(&self) -> f64;
    /// Bell pairs consumed to build one three-qubit cluster from scratch.
    fn three_cluster_cost(&self, rng: &mut dyn RngCore) -> u64;
    /// Grows a chain from length 3 to at least `target_length`; returns the
    /// Bell pairs consumed and qubits added beyond the starting three.
    fn grow_trial(&self, target_length: usize, rng: &mut dyn RngCore) -> TrialCost;
}

fn coin(rng: &mut dyn RngCore, p: f64) -> bool {
    let r: f64 = rng.random();
    r < p
}

/// The reconstructed accounting: three-qubit clusters are built from Bell
/// pairs (expected cost four), fused onto the growing chain end, and a failed
/// chain fusion leaves a Bell pair that seeds the next build.
#[derive(Debug, Clone, Copy)]
pub struct RecyclingStrategy {
    pub p_success: f64,
}

impl Default for RecyclingStrategy {
    fn default() -> Self {
        Self { p_success: 0.5 }
    }
}

impl RecyclingStrategy {
    fn build_three(&self, rng: &mut dyn RngCore, seeded: &mut bool) -> u64 {
        let mut pairs = 0;
        loop {
            pairs += if *seeded { 1 } else { 2 };
            *seeded = false;
            if coin(rng, self.p_success) {
                return pairs;
            }
        }
    }
}

impl GrowthStrategy for RecyclingStrategy {
    fn name(&self) -> &'static str {
        "recycle"
    }

    fn description(&self) -> &'static str {
        "fuse 3-clusters onto the chain; a failed chain fusion recycles the leftover Bell pair"
    }

    fn success_probability(&self) -> f64 {
        self.p_success
    }

    fn three_cluster_cost(&self, rng: &mut dyn RngCore) -> u64 {
        let mut seeded = false;
        self.build_three(rng, &mut seeded)
    }

    fn grow_trial(&self, target_length: usize, rng: &mut dyn RngCore) -> TrialCost {
        let mut pairs = 0u64;
        let mut length = 3i64;
        let mut seeded = false;
        while (length as usize) < target_length {
            pairs += self.build_three(rng, &mut seeded);
            if coin(rng, self.p_success) {
                length += 2;
            } else {
                length -= 1;
                seeded = true; // the damaged 3-cluster survives as a Bell pair
                if length < 2 {
                    // chain destroyed; rebuild the three-qubit seed
                    pairs += self.build_three(rng, &mut seeded);
                    length = 3;
                }
            }
        }
        TrialCost {
            bell_pairs: pairs,
            added_qubits: (length - 3) as u64,
        }
    }
}

/// Same accounting without recycling the leftover pair after a failure.
#[derive(Debug, Clone, Copy)]
pub struct NoRecyclingStrategy {
    pub p_success: f64,
}

impl Default for NoRecyclingStrategy {
    fn default() -> Self {
        Self { p_success: 0.5 }
    }
}

impl GrowthStrategy for NoRecyclingStrategy {
    fn name(&self) -> &'static str {
        "norecycle"
    }

    fn description(&self) -> &'static str {
        "fuse 3-clusters onto the chain; failed attempts are discarded entirely"
    }

    fn success_probability(&self) -> f64 {
        self.p_success
    }

    fn three_cluster_cost(&self, rng: &mut dyn RngCore) -> u64 {
        let mut pairs = 0;
        loop {
            pairs += 2;
            if coin(rng, self.p_success) {
                return pairs;
            }
        }
    }

    fn grow_trial(&self, target_length: usize, rng: &mut dyn RngCore) -> TrialCost {
        let mut pairs = 0u64;
        let mut length = 3i64;
        while (length as usize) < target_length {
            pairs += self.three_cluster_cost(rng);
            if coin(rng, self.p_success) {
                length += 2;
            } else {
                length -= 1;
                if length < 2 {
                    pairs += self.three_cluster_cost(rng);
                    length = 3;
                }
            }
        }
        TrialCost {
            bell_pairs: pairs,
            added_qubits: (length - 3) as u64,
        }
    }
}

/// Looks up a growth strategy by name, optionally overriding the fusion
/// success probability.
pub fn growth_strategy(name: &str, p_success: f64) -> Option<Box<dyn GrowthStrategy>> {
    match name {
        "recycle" => Some(Box::new(RecyclingStrategy { p_success })),
        "norecycle" => Some(Box::new(NoRecyclingStrategy { p_success })),
        _ => None,
    }
}

pub fn growth_strategy_names() -> &'static [&'static str] {
    &["recycle", "norecycle"]
}

/// Aggregated Monte Carlo resource statistics.
#[derive(Debug, Clone, Copy)]
pub struct ResourceStats {
    pub trials: u64,
    pub mean_pairs_per_added_qubit: f64,
    pub stderr_pairs_per_added_qubit: f64,
    pub mean_pairs_per_three_cluster: f64,
    pub stderr_pairs_per_three_cluster: f64,
}

/// Counter-style RNG stream keyed by (seed, stream index): trial-level
/// parallelism cannot change results.
pub fn trial_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha12Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One growth trial plus one three-cluster build, on dedicated RNG streams.
pub fn resource_trial(
    target_length: usize,
    strategy: &dyn GrowthStrategy,
    seed: u64,
    trial: u64,
) -> (TrialCost, u64) {
    let mut grow_rng = trial_rng(seed, 2 * trial);
    let cost = strategy.grow_trial(target_length, &mut grow_rng);
    let mut three_rng = trial_rng(seed, 2 * trial + 1);
    let three = strategy.three_cluster_cost(&mut three_rng);
    (cost, three)
}

/// Runs the growth Monte Carlo with one RNG stream per trial keyed by
/// (seed, trial index), so results are independent of scheduling.
pub fn grow_linear_cluster(
    target_length: usize,
    strategy: &dyn GrowthStrategy,
    trials: u64,
    seed: u64,
) -> ResourceStats {
    let mut ratio_sum = 0.0;
    let mut ratio_sq = 0.0;
    let mut three_sum = 0.0;
    let mut three_sq = 0.0;
    for t in 0..trials {
        let (cost, three) = resource_trial(target_length, strategy, seed, t);
        let ratio = cost.bell_pairs as f64 / cost.added_qubits.max(1) as f64;
        ratio_sum += ratio;
        ratio_sq += ratio * ratio;
        three_sum += three as f64;
        three_sq += (three * three) as f64;
    }
    let n = trials as f64;
    let mean = ratio_sum / n;
    let var = (ratio_sq / n - mean * mean).max(0.0);
    let mean3 = three_sum / n;
    let var3 = (three_sq / n - mean3 * mean3).max(0.0);
    ResourceStats {
        trials,
        mean_pairs_per_added_qubit: mean,
        stderr_pairs_per_added_qubit: (var / n).sqrt(),
        mean_pairs_per_three_cluster: mean3,
        stderr_pairs_per_three_cluster: (var3 / n).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::pauli_logical;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// The four-line cluster written out as in the figure caption:
    /// (|0+0+> + |0-1-> + |1-0+> + |1+1->)/2.
    fn four_line_caption_state() -> DualRailQubitRegister {
        let inv = 1.0 / 2f64.sqrt();
        let mut amps: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        let half = c(0.5, 0.0);
        let add = |amps: &mut BTreeMap<Vec<u8>, C64>, b1: u8, s2: i8, b3: u8, s4: i8, coef: C64| {
            // |b1, (0 + s2*1), b3, (0 + s4*1)> expanded into computational bits
            for b2 in 0..2u8 {
                for b4 in 0..2u8 {
                    let sign2 = if b2 == 1 && s2 < 0 { -1.0 } else { 1.0 };
                    let sign4 = if b4 == 1 && s4 < 0 { -1.0 } else { 1.0 };
                    let amp = coef * inv * inv * sign2 * sign4;
                    *amps.entry(vec![b1, b2, b3, b4]).or_insert(c(0.0, 0.0)) += amp;
                }
            }
        };
        add(&mut amps, 0, 1, 0, 1, half);
        add(&mut amps, 0, -1, 1, -1, half);
        add(&mut amps, 1, -1, 0, 1, half);
        add(&mut amps, 1, 1, 1, -1, half);
        DualRailQubitRegister::from_logical_amplitudes(4, &amps, 1).unwrap()
    }

    #[test]
    fn four_line_cluster_matches_caption() {
        let built = build_cluster(&ClusterGraph::line(4), 1).unwrap();
        let expect = four_line_caption_state();
        let fid = built.state().fidelity(expect.state()).unwrap();
        assert!((fid - 1.0).abs() < 1e-12, "fidelity {fid}");
    }

    #[test]
    fn single_node_cluster_is_plus() {
        let built = build_cluster(&ClusterGraph::line(1), 1).unwrap();
        let (log, _) = built.logical_amplitudes();
        let inv = 1.0 / 2f64.sqrt();
        assert!((log[&vec![0]].re - inv).abs() < 1e-14);
        assert!((log[&vec![1]].re - inv).abs() < 1e-14);
    }

    #[test]
    fn two_node_cluster_is_zero_plus_one_minus() {
        let built = build_cluster(&ClusterGraph::line(2), 1).unwrap();
        let inv2 = 0.5;
        let (log, _) = built.logical_amplitudes();
        assert!((log[&vec![0, 0]].re - inv2).abs() < 1e-14);
        assert!((log[&vec![0, 1]].re - inv2).abs() < 1e-14);
        assert!((log[&vec![1, 0]].re - inv2).abs() < 1e-14);
        assert!((log[&vec![1, 1]].re + inv2).abs() < 1e-14);
    }

    #[test]
    fn heralded_cluster_build_matches_ideal() {
        let graph = ClusterGraph::line(2);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (built, attempts) = build_cluster_heralded(&graph, &NsGateSpec::standard(), &mut rng, 4000)
            .unwrap();
        assert!(attempts >= 1);
        let ideal = build_cluster(&graph, 2).unwrap();
        let fid = built.state().with_cutoff(1).unwrap().fidelity(ideal.state()).unwrap();
        assert!((fid - 1.0).abs() < 1e-9);
    }

    #[test]
    fn z_measurement_of_isolated_plus_is_unbiased() {
        let built = build_cluster(&ClusterGraph::line(1), 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut ones = 0;
        let n = 4000;
        for _ in 0..n {
            let pattern = MeasurementPattern {
                steps: vec![MeasurementStep::new(0, MeasurementBasis::Z)],
                feed_forward: vec![],
            };
            let run = run_pattern(&built, &pattern, &mut rng).unwrap();
            ones += run.outcomes[0] as u32;
        }
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.05, "fraction {frac}");
    }

    #[test]
    fn z_cut_locality_on_all_four_node_graphs() {
        // Z-measuring node v yields the cluster of G - v up to Z corrections
        // on its neighbors, for every graph on four nodes and both outcomes.
        let pairs = [(0u32, 1u32), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for mask in 0..64u32 {
            let mut graph = ClusterGraph::new();
            for v in 0..4 {
                graph.add_node(v);
            }
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    graph.add_edge(a, b).unwrap();
                }
            }
            let full = build_cluster(&graph, 1).unwrap();
            for v in 0..4u32 {
                for outcome in 0..2u8 {
                    let (_, p, residual) = measure_logical::<ChaCha12Rng>(
                        &full,
                        v as usize,
                        MeasurementBasis::Z,
                        Some(outcome),
                        None,
                    )
                    .unwrap();
                    assert!((p - 0.5).abs() < 1e-12);
                    let mut reduced = graph.clone();
                    let neighbors = reduced.neighbors(v);
                    reduced.remove_node(v);
                    let mut expect = build_cluster(&reduced, 1).unwrap();
                    if outcome == 1 {
                        for n in neighbors {
                            // neighbor's register index inside the reduced graph
                            let idx = reduced.sorted_nodes().iter().position(|&x| x == n).unwrap();
                            let state =
                                pauli_logical(expect.state(), expect.qubit(idx), Pauli::Z).unwrap();
                            expect = expect.replace_state(state);
                        }
                    }
                    let fid = residual.state().fidelity(expect.state()).unwrap();
                    assert!(
                        (fid - 1.0).abs() < 1e-10,
                        "graph mask {mask}, node {v}, outcome {outcome}: fidelity {fid}"
                    );
                }
            }
        }
    }

    #[test]
    fn mbqc_cnot_truth_table_exhaustive() {
        for i1 in 0..2u8 {
            for i4 in 0..2u8 {
                let branches = mbqc_cnot(i1, i4).unwrap();
                assert_eq!(branches.len(), 4);
                let total: f64 = branches.iter().map(|b| b.probability).sum();
                assert!((total - 1.0).abs() < 1e-10);
                for b in &branches {
                    assert!(
                        b.deterministic,
                        "readout not deterministic on branch ({},{})",
                        b.s1, b.s2
                    );
                    assert_eq!(b.q3, i1 ^ i4, "branch ({},{})", b.s1, b.s2);
                    assert_eq!(b.q4, i4);
                    assert!((b.probability - 0.25).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn fusion1_on_two_bell_pairs_makes_three_cluster() {
        // nodes {0,1} and {10,11}, fusing 1 with 10
        let mut graph = ClusterGraph::new();
        for v in [0, 1, 10, 11] {
            graph.add_node(v);
        }
        graph.add_edge(0, 1).unwrap();
        graph.add_edge(10, 11).unwrap();
        let reg = build_cluster(&graph, 1).unwrap(); // qubit order 0,1,10,11

        let branches = fusion_type1_branches(&reg, 1, 2).unwrap();
        let total: f64 = branches.iter().map(|(o, _)| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let p_success: f64 = branches
            .iter()
            .filter(|(o, _)| o.success())
            .map(|(o, _)| o.probability)
            .sum();
        assert!((p_success - 0.5).abs() < 1e-12);

        // expected merged cluster: line 0 - merged - 11
        let mut merged = ClusterGraph::new();
        for v in [0, 1, 11] {
            merged.add_node(v);
        }
        merged.add_edge(0, 1).unwrap();
        merged.add_edge(1, 11).unwrap();
        let expect = build_cluster(&merged, 1).unwrap();

        for (outcome, residual) in &branches {
            match outcome.branch {
                FusionBranch::Success { sign_flip } => {
                    let mut target = expect.clone();
                    if sign_flip {
                        let state =
                            pauli_logical(target.state(), target.qubit(1), Pauli::Z).unwrap();
                        target = target.replace_state(state);
                    }
                    let fid = residual.state().fidelity(target.state()).unwrap();
                    assert!((fid - 1.0).abs() < 1e-10, "herald {:?}", outcome.herald);
                }
                FusionBranch::FailureZ {
                    outcome_a,
                    outcome_b,
                } => {
                    // remaining qubits 0 and 11: |+/-> per the Z outcomes of
                    // their measured partners
                    let (log, w) = residual.logical_amplitudes();
                    assert!((w - 1.0).abs() < 1e-10);
                    let sign_q0: f64 = if outcome_a == 1 { -1.0 } else { 1.0 };
                    let sign_q11: f64 = if outcome_b == 1 { -1.0 } else { 1.0 };
                    let expect_amp = |b0: u8, b1: u8| {
                        0.5 * sign_q0.powi(b0 as i32) * sign_q11.powi(b1 as i32)
                    };
                    for b0 in 0..2u8 {
                        for b1 in 0..2u8 {
                            let amp = log[&vec![b0, b1]];
                            assert!(
                                (amp.re - expect_amp(b0, b1)).abs() < 1e-10
                                    && amp.im.abs() < 1e-10,
                                "herald {:?}",
                                outcome.herald
                            );
                        }
                    }
                }
                FusionBranch::FailureX { .. } => panic!("type I emitted an X failure"),
            }
        }
    }

    #[test]
    fn fusion1_chains_compose() {
        // fusing the ends of a 3-line and a 2-line gives a 4-line on success
        let mut graph = ClusterGraph::new();
        for v in [0, 1, 2, 10, 11] {
            graph.add_node(v);
        }
        graph.add_edge(0, 1).unwrap();
        graph.add_edge(1, 2).unwrap();
        graph.add_edge(10, 11).unwrap();
        let reg = build_cluster(&graph, 1).unwrap();
        let branches = fusion_type1_branches(&reg, 2, 3).unwrap();

        let mut merged = ClusterGraph::new();
        for v in [0, 1, 2, 11] {
            merged.add_node(v);
        }
        merged.add_edge(0, 1).unwrap();
        merged.add_edge(1, 2).unwrap();
        merged.add_edge(2, 11).unwrap();
        let expect = build_cluster(&merged, 1).unwrap();
        for (outcome, residual) in &branches {
            if let FusionBranch::Success { sign_flip } = outcome.branch {
                let mut target = expect.clone();
                if sign_flip {
                    let state = pauli_logical(target.state(), target.qubit(2), Pauli::Z).unwrap();
                    target = target.replace_state(state);
                }
                let fid = residual.state().fidelity(target.state()).unwrap();
                assert!((fid - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fusion1_graph_rewrite_agrees_with_fock_tier() {
        let mut graph = ClusterGraph::new();
        for v in [0, 1, 10, 11] {
            graph.add_node(v);
        }
        graph.add_edge(0, 1).unwrap();
        graph.add_edge(10, 11).unwrap();
        let reg = build_cluster(&graph, 1).unwrap();
        for (outcome, residual) in fusion_type1_branches(&reg, 1, 2).unwrap() {
            let mut gc = GraphCluster::new(graph.clone());
            gc.fuse1(1, 10, &outcome.branch).unwrap();
            // rebuild the state the graph tier predicts
            let mut expect = build_cluster(&gc.graph, 1).unwrap();
            let order = gc.graph.sorted_nodes();
            for (node, &(x, z)) in &gc.frame {
                let idx = order.iter().position(|v| v == node).unwrap();
                if x {
                    let s = pauli_logical(expect.state(), expect.qubit(idx), Pauli::X).unwrap();
                    expect = expect.replace_state(s);
                }
                if z {
                    let s = pauli_logical(expect.state(), expect.qubit(idx), Pauli::Z).unwrap();
                    expect = expect.replace_state(s);
                }
            }
            let fid = residual.state().fidelity(expect.state()).unwrap();
            assert!(
                (fid - 1.0).abs() < 1e-8,
                "herald {:?} branch {:?}",
                outcome.herald,
                outcome.branch
            );
        }
    }

    #[test]
    fn kraus_pair_sums_to_even_parity_projector() {
        // Assemble the success Kraus operators elementwise from basis inputs
        // and check K+^dag K+ + K-^dag K- = diag(1,0,0,1).
        let mut k_plus = [[c(0.0, 0.0); 4]; 2];
        let mut k_minus = [[c(0.0, 0.0); 4]; 2];
        for (col, (b1, b2)) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
            let mut amps = BTreeMap::new();
            amps.insert(vec![*b1, *b2], c(1.0, 0.0));
            let reg = DualRailQubitRegister::from_logical_amplitudes(2, &amps, 2).unwrap();
            let circuit = vec![
                CircuitOp::new(polarising_beamsplitter(), vec![0, 1, 2, 3]),
                CircuitOp::new(half_waveplate(), vec![2, 3]),
            ];
            let evolved =
                crate::interferometer::apply_circuit(reg.state(), &circuit).unwrap();
            for (occ, amp) in evolved.terms() {
                let herald = (occ[2], occ[3]);
                let row = match (occ[0], occ[1]) {
                    (1, 0) => 0,
                    (0, 1) => 1,
                    _ => continue,
                };
                match herald {
                    (0, 1) => k_plus[row][col] += amp,
                    (1, 0) => k_minus[row][col] += amp,
                    _ => {}
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = c(0.0, 0.0);
                for r in 0..2 {
                    acc += k_plus[r][i].conj() * k_plus[r][j]
                        + k_minus[r][i].conj() * k_minus[r][j];
                }
                let expect = if i == j && (i == 0 || i == 3) { 1.0 } else { 0.0 };
                assert!(
                    (acc - c(expect, 0.0)).norm() < 1e-12,
                    "projector entry ({i},{j}) = {acc}"
                );
            }
        }
    }

    #[test]
    fn x_merge_creates_redundant_pair() {
        let reg = build_cluster(&ClusterGraph::line(3), 1).unwrap();
        let (p0, merged0) = x_merge_branch(&reg, 1, 0).unwrap();
        assert!((p0 - 0.5).abs() < 1e-12);
        let (log, w) = merged0.logical_amplitudes();
        assert!((w - 1.0).abs() < 1e-12);
        let inv = 1.0 / 2f64.sqrt();
        assert!((log[&vec![0, 0]].re - inv).abs() < 1e-12);
        assert!((log[&vec![1, 1]].re - inv).abs() < 1e-12);
        assert!(!log.contains_key(&vec![0, 1]));

        // outcome 1 needs an X on one photon of the pair
        let (_, merged1) = x_merge_branch(&reg, 1, 1).unwrap();
        let corrected =
            pauli_logical(merged1.state(), merged1.qubit(0), Pauli::X).unwrap();
        let fid_terms: f64 = merged0.state().fidelity(&corrected).unwrap();
        assert!((fid_terms - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_pair_z_measurement_collapses_group() {
        let reg = build_cluster(&ClusterGraph::line(3), 1).unwrap();
        let (_, merged) = x_merge_branch(&reg, 1, 0).unwrap();
        for s in 0..2u8 {
            let (_, p, rest) =
                measure_logical::<ChaCha12Rng>(&merged, 0, MeasurementBasis::Z, Some(s), None)
                    .unwrap();
            assert!((p - 0.5).abs() < 1e-12);
            let (log, _) = rest.logical_amplitudes();
            assert!((log[&vec![s]].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion2_success_probability_and_completeness() {
        // redundant qubit from a 4-line, fused with a Bell-pair end
        let mut graph = ClusterGraph::new();
        for v in [0, 1, 2, 3, 10, 11] {
            graph.add_node(v);
        }
        for (a, b) in [(0, 1), (1, 2), (2, 3), (10, 11)] {
            graph.add_edge(a, b).unwrap();
        }
        let reg = build_cluster(&graph, 1).unwrap();
        // X-measure node 1 (register index 1): photons 0 and 2 now encode one
        // logical qubit; indices shift down by one past it.
        let (_, merged) = x_merge_branch(&reg, 1, 0).unwrap();
        // register order now: 0, 2, 3, 10, 11
        let branches = fusion_type2_branches(&merged, 1, 3).unwrap();
        let total: f64 = branches.iter().map(|(o, _)| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let p_success: f64 = branches
            .iter()
            .filter(|(o, _)| o.success())
            .map(|(o, _)| o.probability)
            .sum();
        assert!((p_success - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fusion2_merges_redundant_qubit_with_bonds_inherited() {
        let mut graph = ClusterGraph::new();
        for v in [0, 1, 2, 3, 10, 11] {
            graph.add_node(v);
        }
        for (a, b) in [(0, 1), (1, 2), (2, 3), (10, 11)] {
            graph.add_edge(a, b).unwrap();
        }
        let reg = build_cluster(&graph, 1).unwrap();

        // expected result: photon 0 keeps the logical qubit and inherits the
        // bond to 3 (through the redundant partner) and to 11 (through the
        // fused cluster end): a three-qubit cluster 3 - 0 - 11
        let mut target_graph = ClusterGraph::new();
        for v in [0, 3, 11] {
            target_graph.add_node(v);
        }
        target_graph.add_edge(0, 3).unwrap();
        target_graph.add_edge(0, 11).unwrap();
        let expect = build_cluster(&target_graph, 1).unwrap(); // order 0, 3, 11

        for merge_outcome in 0..2u8 {
            let (_, mut merged) = x_merge_branch(&reg, 1, merge_outcome).unwrap();
            if merge_outcome == 1 {
                // eager correction: X on the bond-free photon of the pair
                let s = pauli_logical(merged.state(), merged.qubit(0), Pauli::X).unwrap();
                merged = merged.replace_state(s);
            }
            // register order: 0, 2, 3, 10, 11; fuse photon 2 with photon 10
            for (outcome, residual) in fusion_type2_branches(&merged, 1, 3).unwrap() {
                if let FusionBranch::Success { sign_flip } = outcome.branch {
                    // residual order: 0, 3, 11
                    let mut target = expect.clone();
                    if sign_flip {
                        // odd-parity herald: Z on the consumed end's neighbor
                        let s = pauli_logical(target.state(), target.qubit(2), Pauli::Z).unwrap();
                        target = target.replace_state(s);
                    }
                    let fid = residual.state().fidelity(target.state()).unwrap();
                    assert!(
                        (fid - 1.0).abs() < 1e-8,
                        "merge outcome {merge_outcome}, herald {:?}: fidelity {fid}",
                        outcome.herald
                    );
                }
            }
        }
    }

    #[test]
    fn fusion2_failure_cuts_without_back_propagation() {
        // failure X-measures both inputs; the rest of the chain survives as
        // the cluster of the reduced graph up to local corrections
        let graph = ClusterGraph::line(3);
        let mut other = ClusterGraph::new();
        for v in [10, 11] {
            other.add_node(v);
        }
        other.add_edge(10, 11).unwrap();
        let mut joint = graph.clone();
        for v in other.nodes() {
            joint.add_node(v);
        }
        joint.add_edge(10, 11).unwrap();
        let reg = build_cluster(&joint, 1).unwrap(); // order 0,1,2,10,11
        for (outcome, residual) in fusion_type2_branches(&reg, 2, 3).unwrap() {
            if let FusionBranch::FailureX { .. } = outcome.branch {
                // surviving register: 0, 1, 11; all amplitude stays in the
                // code space (no photon-number damage leaks elsewhere)
                let (_, w) = residual.logical_amplitudes();
                assert!((w - 1.0).abs() < 1e-10, "herald {:?}", outcome.herald);
            }
        }
    }

    #[test]
    fn growth_strategies_hit_expected_costs() {
        let recycle = RecyclingStrategy::default();
        let stats = grow_linear_cluster(53, &recycle, 4000, 7);
        // analytic steady-state for this accounting is 7.0 pairs per qubit
        assert!(
            (stats.mean_pairs_per_added_qubit - 7.0).abs() < 0.15,
            "recycle mean {}",
            stats.mean_pairs_per_added_qubit
        );
        assert!(
            (stats.mean_pairs_per_three_cluster - 4.0).abs()
                < 4.0 * stats.stderr_pairs_per_three_cluster.max(0.05),
            "three-cluster mean {}",
            stats.mean_pairs_per_three_cluster
        );

        let norecycle = NoRecyclingStrategy::default();
        let stats2 = grow_linear_cluster(53, &norecycle, 4000, 7);
        assert!(
            (stats2.mean_pairs_per_added_qubit - 8.0).abs() < 0.2,
            "norecycle mean {}",
            stats2.mean_pairs_per_added_qubit
        );
    }

    #[test]
    fn deterministic_fusion_costs_one_pair_per_qubit() {
        let strategy = RecyclingStrategy { p_success: 1.0 };
        let stats = grow_linear_cluster(53, &strategy, 50, 1);
        assert!((stats.mean_pairs_per_added_qubit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strategy_registry_lookup() {
        assert!(growth_strategy("recycle", 0.5).is_some());
        assert!(growth_strategy("norecycle", 0.5).is_some());
        assert!(growth_strategy("nonsense", 0.5).is_none());
        for name in growth_strategy_names() {
            let s = growth_strategy(name, 0.5).unwrap();
            assert_eq!(&s.name(), name);
        }
    }

    #[test]
    fn pattern_validation_rejects_double_measurement() {
        let pattern = MeasurementPattern {
            steps: vec![
                MeasurementStep::new(0, MeasurementBasis::Z),
                MeasurementStep::new(0, MeasurementBasis::X),
            ],
            feed_forward: vec![],
        };
        assert!(pattern.validate().is_err());
    }

    #[test]
    fn graph_rejects_self_edges_and_missing_nodes() {
        let mut g = ClusterGraph::new();
        g.add_node(0);
        assert!(g.add_edge(0, 0).is_err());
        assert!(g.add_edge(0, 5).is_err());
    }

    #[test]
    fn redundancy_groups_must_be_disjoint() {
        let mut g = ClusterGraph::line(4);
        g.add_redundancy_group([0, 1].into_iter().collect()).unwrap();
        assert!(g.add_redundancy_group([1, 2].into_iter().collect()).is_err());
        g.add_redundancy_group([2, 3].into_iter().collect()).unwrap();
        assert_eq!(g.redundancy_groups().len(), 2);
    }
}
