//! Jones-calculus wave plates, input-state recipes and polarization analyzers.
//!
//! Convention (angles are the optic axis measured from horizontal):
//!
//! ```text
//! HWP(θ) = [[cos2θ,  sin2θ], [sin2θ, −cos2θ]]
//! QWP(θ) = e^{−iπ/4} [[cos²θ + i sin²θ, (1−i) sinθ cosθ], [(1−i) sinθ cosθ, sin²θ + i cos²θ]]
//! ```
//!
//! |H⟩ ≡ |0⟩ and |V⟩ ≡ |1⟩. Global phases carry no meaning anywhere in the
//! crate; states are compared through fidelity.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::qcore::{c, Operator, PureState, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlateKind {
    #[serde(rename = "HWP")]
    Half,
    #[serde(rename = "QWP")]
    Quarter,
}

fn reduce_angle(deg: f64) -> Result<f64> {
    if !deg.is_finite() {
        return Err(Error::OutOfRange(format!("wave-plate angle {deg}")));
    }
    let r = deg.rem_euclid(180.0);
    // rem_euclid can round up to exactly 180 for tiny negative inputs
    Ok(if r >= 180.0 { 0.0 } else { r })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    kind: PlateKind,
    angle_deg: f64,
}

impl WaveplateSetting {
    pub fn new(kind: PlateKind, angle_deg: f64) -> Result<Self> {
        Ok(Self { kind, angle_deg: reduce_angle(angle_deg)? })
    }

    pub fn half(angle_deg: f64) -> Result<Self> {
        Self::new(PlateKind::Half, angle_deg)
    }

    pub fn quarter(angle_deg: f64) -> Result<Self> {
        Self::new(PlateKind::Quarter, angle_deg)
    }

    pub fn kind(&self) -> PlateKind {
        self.kind
    }

    /// Optic-axis angle in degrees, reduced to [0, 180).
    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }
}

/// Jones matrix of a wave plate.
pub fn waveplate(setting: &WaveplateSetting) -> Operator {
    let t = setting.angle_deg.to_radians();
    match setting.kind {
        PlateKind::Half => {
            let (s2, c2) = (2.0 * t).sin_cos();
            Operator::from_row_slice(2, &[c(c2, 0.0), c(s2, 0.0), c(s2, 0.0), c(-c2, 0.0)])
        }
        PlateKind::Quarter => {
            let (s, co) = t.sin_cos();
            let (s2, c2) = (s * s, co * co);
            let off = c(1.0, -1.0) * (s * co);
            let phase = C64::from_polar(1.0, -FRAC_PI_4);
            Operator::from_row_slice(
                2,
                &[c(c2, s2) * phase, off * phase, off * phase, c(s2, c2) * phase],
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    /// The horizontally polarized PBS output.
    Transmitted,
    /// The vertically polarized PBS output.
    Reflected,
}

/// A QWP, then a HWP, then a polarizing beam splitter, watched at one port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    qwp_deg: f64,
    hwp_deg: f64,
    port: Port,
}

impl AnalyzerSetting {
    pub fn new(qwp_deg: f64, hwp_deg: f64, port: Port) -> Result<Self> {
        Ok(Self { qwp_deg: reduce_angle(qwp_deg)?, hwp_deg: reduce_angle(hwp_deg)?, port })
    }

    pub fn qwp_deg(&self) -> f64 {
        self.qwp_deg
    }

    pub fn hwp_deg(&self) -> f64 {
        self.hwp_deg
    }

    pub fn port(&self) -> Port {
        self.port
    }

    /// The same wave-plate angles watched at the other PBS output.
    pub fn other_port(&self) -> Self {
        let port = match self.port {
            Port::Transmitted => Port::Reflected,
            Port::Reflected => Port::Transmitted,
        };
        Self { port, ..*self }
    }

    /// Combined wave-plate unitary (QWP first, then HWP).
    pub fn unitary(&self) -> Operator {
        let qwp = waveplate(&WaveplateSetting { kind: PlateKind::Quarter, angle_deg: self.qwp_deg });
        let hwp = waveplate(&WaveplateSetting { kind: PlateKind::Half, angle_deg: self.hwp_deg });
        &hwp * &qwp
    }
}

/// Projector `W†|port⟩⟨port|W` onto the polarization state that exits the
/// chosen PBS port with certainty.
pub fn analyzer_projector(setting: &AnalyzerSetting) -> Operator {
    let w = setting.unitary();
    let mut port = nalgebra::DMatrix::<C64>::zeros(2, 2);
    match setting.port {
        Port::Transmitted => port[(0, 0)] = c(1.0, 0.0),
        Port::Reflected => port[(1, 1)] = c(1.0, 0.0),
    }
    let port = Operator::new(port).expect("square");
    &(&w.adjoint() * &port) * &w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFamily {
    /// cos θ|0⟩ + sin θ|1⟩
    Theta,
    /// (|0⟩ + e^{i(90° − 2φ)}|1⟩)/√2
    Phi,
}

/// Wave-plate recipe for an input state: |H⟩ through a HWP, then a QWP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepRecipe {
    pub family: InputFamily,
    pub angle_deg: f64,
    pub hwp_deg: f64,
    pub qwp_deg: f64,
}

impl PrepRecipe {
    /// The state produced by sending |H⟩ through the recipe's plates.
    pub fn realize(&self) -> Result<PureState> {
        let hwp = waveplate(&WaveplateSetting::half(self.hwp_deg)?);
        let qwp = waveplate(&WaveplateSetting::quarter(self.qwp_deg)?);
        let h = PureState::basis(1, 0)?;
        let (_, out) = h.apply(&(&qwp * &hwp))?;
        Ok(out)
    }
}

/// Analytic family state plus the plate angles that produce it from |H⟩.
///
/// Theta family: HWP at θ/2 sets linear polarization at θ; a QWP aligned with
/// it leaves it unchanged. Phi family: HWP at (90° − φ)/2 gives linear
/// polarization at 90° − φ, and a QWP at 45° maps that to equal amplitudes
/// with relative phase 90° − 2φ.
pub fn prepare_input(family: InputFamily, angle_deg: f64) -> Result<(PureState, PrepRecipe)> {
    if !angle_deg.is_finite() {
        return Err(Error::OutOfRange(format!("input angle {angle_deg}")));
    }
    let a = angle_deg.to_radians();
    let (state, hwp_deg, qwp_deg) = match family {
        InputFamily::Theta => (
            PureState::qubit(c(a.cos(), 0.0), c(a.sin(), 0.0))?,
            angle_deg / 2.0,
            angle_deg,
        ),
        InputFamily::Phi => {
            let phase = (90.0 - 2.0 * angle_deg).to_radians();
            (
                PureState::qubit(c(1.0, 0.0), C64::from_polar(1.0, phase))?,
                (90.0 - angle_deg) / 2.0,
                45.0,
            )
        }
    };
    let recipe = PrepRecipe {
        family,
        angle_deg,
        hwp_deg: reduce_angle(hwp_deg)?,
        qwp_deg: reduce_angle(qwp_deg)?,
    };
    Ok((state, recipe))
}

/// The control photon's preparation: HWP at 22.5° on |H⟩, giving (|0⟩+|1⟩)/√2.
pub fn control_preparation() -> Result<(PureState, WaveplateSetting)> {
    let plate = WaveplateSetting::half(22.5)?;
    let (_, state) = PureState::basis(1, 0)?.apply(&waveplate(&plate))?;
    Ok((state, plate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::fidelity;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn overlap(a: &PureState, b: &PureState) -> f64 {
        a.inner(b).norm_sqr()
    }

    #[test]
    fn hwp_22_5_makes_diagonal() {
        let (_, d) = PureState::basis(1, 0).unwrap().apply(&waveplate(&WaveplateSetting::half(22.5).unwrap())).unwrap();
        let expected = PureState::qubit(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!((overlap(&d, &expected) - 1.0).abs() < 1e-12);
        assert!((d.amplitude(0).re - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn hwp_zero_is_z() {
        let (_, out) = PureState::basis(1, 1).unwrap().apply(&waveplate(&WaveplateSetting::half(0.0).unwrap())).unwrap();
        assert!((out.amplitude(1) - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn qwp_45_makes_circular() {
        let (_, out) = PureState::basis(1, 0).unwrap().apply(&waveplate(&WaveplateSetting::quarter(45.0).unwrap())).unwrap();
        let circular = PureState::qubit(c(1.0, 0.0), c(0.0, -1.0)).unwrap();
        assert!((overlap(&out, &circular) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angles_reduce_mod_180() {
        let s = WaveplateSetting::half(-22.5).unwrap();
        assert!((s.angle_deg() - 157.5).abs() < 1e-12);
        assert_eq!(WaveplateSetting::quarter(180.0).unwrap().angle_deg(), 0.0);
        assert!(WaveplateSetting::half(f64::NAN).is_err());
        let a = waveplate(&WaveplateSetting::half(-22.5).unwrap());
        let b = waveplate(&WaveplateSetting::half(157.5).unwrap());
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn prepare_input_endpoints() {
        let (s, _) = prepare_input(InputFamily::Theta, 0.0).unwrap();
        assert!((overlap(&s, &PureState::basis(1, 0).unwrap()) - 1.0).abs() < 1e-12);
        let plus = PureState::qubit(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let (s, _) = prepare_input(InputFamily::Theta, 45.0).unwrap();
        assert!((overlap(&s, &plus) - 1.0).abs() < 1e-12);
        let (s, _) = prepare_input(InputFamily::Phi, 45.0).unwrap();
        assert!((overlap(&s, &plus) - 1.0).abs() < 1e-12);
        let (s, _) = prepare_input(InputFamily::Phi, 0.0).unwrap();
        let plus_i = PureState::qubit(c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        assert!((overlap(&s, &plus_i) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recipes_round_trip_on_degree_grid() {
        for family in [InputFamily::Theta, InputFamily::Phi] {
            for deg in 0..=90 {
                let (state, recipe) = prepare_input(family, deg as f64).unwrap();
                let realized = recipe.realize().unwrap();
                assert!(
                    fidelity(&realized.density(), &state).unwrap() >= 1.0 - 1e-10,
                    "{family:?} {deg}"
                );
            }
        }
    }

    #[test]
    fn analyzer_h_and_d() {
        let h = analyzer_projector(&AnalyzerSetting::new(0.0, 0.0, Port::Transmitted).unwrap());
        assert!(h.max_abs_diff(&PureState::basis(1, 0).unwrap().density().into_operator()) < 1e-12);

        // QWP(45°) leaves |D⟩ unchanged up to phase and HWP(22.5°) maps it to
        // |H⟩, so the transmitted projector is |D⟩⟨D|. A QWP at 0° would not do.
        let d = analyzer_projector(&AnalyzerSetting::new(45.0, 22.5, Port::Transmitted).unwrap());
        let dket = PureState::qubit(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(d.max_abs_diff(&dket.density().into_operator()) < 1e-12);
    }

    #[test]
    fn analyzer_ports_complete() {
        for (q, h) in [(0.0, 0.0), (12.0, 33.0), (45.0, 0.0), (170.0, 95.5)] {
            let t = analyzer_projector(&AnalyzerSetting::new(q, h, Port::Transmitted).unwrap());
            let r = analyzer_projector(&AnalyzerSetting::new(q, h, Port::Reflected).unwrap());
            let sum = Operator::new(t.matrix() + r.matrix()).unwrap();
            assert!(sum.max_abs_diff(&Operator::identity(2)) < 1e-12);
            let idem = &t * &t;
            assert!(idem.max_abs_diff(&t) < 1e-12);
            assert!((t.matrix().trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn control_prep_is_plus() {
        let (s, plate) = control_preparation().unwrap();
        assert_eq!(plate.angle_deg(), 22.5);
        assert!((s.amplitude(0).re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.amplitude(1).re - FRAC_1_SQRT_2).abs() < 1e-12);
    }
}
