//! Post-selected coincidence-basis CNOT built from a six-mode linear-optical
//! network, with a visibility-parameterized noisy version.
//!
//! Single-photon modes, in order: control-H, control-V, target-H, target-V and
//! two vacuum ancillas. The network is
//!
//! 1. a 50/50 mixer on the target modes (H, V) → (+, −);
//! 2. a reflectivity-1/3 beam splitter coupling control-V with the target
//!    "−" mode (the |H⟩−|V⟩ mode);
//! 3. amplitude-1/√3 couplers from control-H and the target "+" mode into the
//!    two vacuum ancillas;
//! 4. the inverse 50/50 mixer on the target modes.
//!
//! Keeping only events with one photon in the control modes and one in the
//! target modes gives the map (1/3)·CNOT.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::qcore::{c, DensityMatrix, Operator, PureState, C64};

pub const MODE_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    ControlH = 0,
    ControlV = 1,
    TargetH = 2,
    TargetV = 3,
    AncillaA = 4,
    AncillaB = 5,
}

impl Mode {
    pub const CONTROL: [Mode; 2] = [Mode::ControlH, Mode::ControlV];
    pub const TARGET: [Mode; 2] = [Mode::TargetH, Mode::TargetV];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Single-photon unitary of the gate over the six optical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeNetwork {
    unitary: DMatrix<C64>,
}

fn identity6() -> DMatrix<C64> {
    DMatrix::identity(MODE_COUNT, MODE_COUNT)
}

/// 50/50 mixer on modes (a, b).
fn mixer(a: Mode, b: Mode) -> DMatrix<C64> {
    let h = c(FRAC_1_SQRT_2, 0.0);
    let mut u = identity6();
    let (a, b) = (a.index(), b.index());
    u[(a, a)] = h;
    u[(a, b)] = h;
    u[(b, a)] = h;
    u[(b, b)] = -h;
    u
}

/// Real rotation keeping amplitude 1/√3 in each input's own mode and
/// transferring √(2/3) to the partner mode.
fn third_coupler(a: Mode, b: Mode) -> DMatrix<C64> {
    let keep = c((1.0f64 / 3.0).sqrt(), 0.0);
    let cross = c((2.0f64 / 3.0).sqrt(), 0.0);
    let mut u = identity6();
    let (a, b) = (a.index(), b.index());
    u[(a, a)] = keep;
    u[(a, b)] = -cross;
    u[(b, a)] = cross;
    u[(b, b)] = keep;
    u
}

fn arm_phase(mode: Mode, phase: f64) -> DMatrix<C64> {
    let mut u = identity6();
    u[(mode.index(), mode.index())] = C64::from_polar(1.0, phase);
    u
}

impl ModeNetwork {
    /// The ideal network.
    pub fn new() -> Self {
        Self::with_arm_phases(0.0, 0.0)
    }

    /// The network with extra phases on the control-V arm and on the target
    /// "−" arm, both placed between the input splitting and the central
    /// beam splitter. These are the two classical interferometers.
    pub fn with_arm_phases(control_phase: f64, target_phase: f64) -> Self {
        let split = mixer(Mode::TargetH, Mode::TargetV);
        let phases = arm_phase(Mode::ControlV, control_phase) * arm_phase(Mode::TargetV, target_phase);
        let central = third_coupler(Mode::ControlV, Mode::TargetV);
        let loss_control = third_coupler(Mode::ControlH, Mode::AncillaA);
        let loss_target = third_coupler(Mode::TargetH, Mode::AncillaB);
        let unitary = &split * loss_target * loss_control * central * phases * &split;
        Self { unitary }
    }

    pub fn unitary(&self) -> &DMatrix<C64> {
        &self.unitary
    }

    /// Amplitude for a photon entering `input` to leave in `output`.
    pub fn amplitude(&self, output: Mode, input: Mode) -> C64 {
        self.unitary[(output.index(), input.index())]
    }

    pub fn unitarity_error(&self) -> f64 {
        Operator::new(self.unitary.clone()).expect("square").unitarity_error()
    }

    /// Coincidence-subspace two-photon maps. `direct` sends the control photon
    /// to the control outputs and the target photon to the target outputs;
    /// `exchange` swaps the roles. Logical index is 2·control + target.
    pub fn two_photon_maps(&self) -> TwoPhotonMaps {
        let mut direct = DMatrix::zeros(4, 4);
        let mut exchange = DMatrix::zeros(4, 4);
        for (ko, &k) in Mode::CONTROL.iter().enumerate() {
            for (lo, &l) in Mode::TARGET.iter().enumerate() {
                for (ki, &ci) in Mode::CONTROL.iter().enumerate() {
                    for (li, &ti) in Mode::TARGET.iter().enumerate() {
                        let (row, col) = (2 * ko + lo, 2 * ki + li);
                        direct[(row, col)] = self.amplitude(k, ci) * self.amplitude(l, ti);
                        exchange[(row, col)] = self.amplitude(l, ci) * self.amplitude(k, ti);
                    }
                }
            }
        }
        TwoPhotonMaps {
            direct: Operator::new(direct).expect("square"),
            exchange: Operator::new(exchange).expect("square"),
        }
    }

    /// Post-selected map for indistinguishable photons (direct + exchange).
    pub fn postselected_map(&self) -> Operator {
        self.two_photon_maps().bosonic()
    }
}

impl Default for ModeNetwork {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonMaps {
    pub direct: Operator,
    pub exchange: Operator,
}

impl TwoPhotonMaps {
    pub fn bosonic(&self) -> Operator {
        Operator::new(self.direct.matrix() + self.exchange.matrix()).expect("square")
    }
}

pub fn build_mode_network() -> ModeNetwork {
    ModeNetwork::new()
}

/// Interference visibilities of the gate, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Two-photon interference at the central beam splitter.
    pub v_nonclassical: f64,
    /// Single-photon interference between the control H and V arms.
    pub v_classical_control: f64,
    /// Single-photon interference between the target + and − arms.
    pub v_classical_target: f64,
}

impl NoiseModel {
    pub const IDEAL: NoiseModel = NoiseModel {
        v_nonclassical: 1.0,
        v_classical_control: 1.0,
        v_classical_target: 1.0,
    };

    pub fn new(v_nonclassical: f64, v_classical_control: f64, v_classical_target: f64) -> Result<Self> {
        let model = Self { v_nonclassical, v_classical_control, v_classical_target };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_nonclassical", self.v_nonclassical),
            ("v_classical_control", self.v_classical_control),
            ("v_classical_target", self.v_classical_target),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.v_nonclassical, self.v_classical_control, self.v_classical_target]
    }
}

/// Direct and exchange maps for the four arm-phase configurations
/// (control, target) ∈ {0, π}².
fn phase_configurations() -> &'static [TwoPhotonMaps; 4] {
    static MAPS: OnceLock<[TwoPhotonMaps; 4]> = OnceLock::new();
    MAPS.get_or_init(|| {
        [(0.0, 0.0), (0.0, PI), (PI, 0.0), (PI, PI)]
            .map(|(pc, pt)| ModeNetwork::with_arm_phases(pc, pt).two_photon_maps())
    })
}

fn ideal_map() -> &'static Operator {
    static MAP: OnceLock<Operator> = OnceLock::new();
    MAP.get_or_init(|| phase_configurations()[0].bosonic())
}

/// Ideal gate on a pure two-qubit input: success probability and the
/// normalized post-selected output.
pub fn postselect_cnot(input: &PureState) -> Result<(f64, PureState)> {
    if input.num_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 4, actual: input.dim() });
    }
    input.apply(ideal_map())
}

fn sandwich(op: &Operator, rho: &DMatrix<C64>) -> DMatrix<C64> {
    op.matrix() * rho * op.matrix().adjoint()
}

/// Noisy gate on a two-qubit density matrix.
///
/// Each classical visibility `v` becomes a random π phase on the
/// corresponding interferometer arm with probability `(1 − v)/2`, which
/// scales the coherence between the arms by `v`. For every phase
/// configuration the two-photon output mixes the bosonic map (weight
/// `v_nonclassical`) with the distinguishable-photon map, where direct and
/// exchange paths add in probability rather than amplitude. The result is
/// renormalized after post-selection.
pub fn noisy_cnot(rho_in: &DensityMatrix, noise: &NoiseModel) -> Result<(f64, DensityMatrix)> {
    noise.validate()?;
    if rho_in.num_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 4, actual: rho_in.dim() });
    }
    let rho = rho_in.matrix();
    let wc = [(1.0 + noise.v_classical_control) / 2.0, (1.0 - noise.v_classical_control) / 2.0];
    let wt = [(1.0 + noise.v_classical_target) / 2.0, (1.0 - noise.v_classical_target) / 2.0];
    let vn = noise.v_nonclassical;

    let mut out = DMatrix::<C64>::zeros(4, 4);
    for (idx, maps) in phase_configurations().iter().enumerate() {
        let weight = wc[idx / 2] * wt[idx % 2];
        if weight == 0.0 {
            continue;
        }
        if vn > 0.0 {
            out += sandwich(&maps.bosonic(), rho) * c(weight * vn, 0.0);
        }
        if vn < 1.0 {
            let dist = sandwich(&maps.direct, rho) + sandwich(&maps.exchange, rho);
            out += dist * c(weight * (1.0 - vn), 0.0);
        }
    }
    let success = out.trace().re;
    Ok((success, DensityMatrix::from_positive(out)?))
}
