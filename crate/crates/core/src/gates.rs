//! Named gates, carrier states and Bell-basis analysis.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::StateVector;
use crate::unitary::{best_scalar_distance, max_abs_diff, UnitaryMatrix};

/// Minimum distance from {0, π} for a hardened angle.
pub const DEGENERACY_MARGIN: f64 = 1e-6;
/// Tolerance on (θa + θb + θc) mod 2π.
pub const ANGLE_SUM_TOL: f64 = 1e-12;

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn named(dim: usize, entries: &[C64]) -> UnitaryMatrix {
    UnitaryMatrix::from_row_slice(dim, entries).expect("named gate is unitary")
}

pub fn identity2() -> UnitaryMatrix {
    named(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
}

pub fn pauli_x() -> UnitaryMatrix {
    named(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> UnitaryMatrix {
    named(2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> UnitaryMatrix {
    named(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

pub fn hadamard() -> UnitaryMatrix {
    let s = FRAC_1_SQRT_2;
    named(2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
}

/// CNOT with the first target as control.
pub fn cnot() -> UnitaryMatrix {
    let o = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    #[rustfmt::skip]
    let e = [
        o, z, z, z,
        z, o, z, z,
        z, z, z, o,
        z, z, o, z,
    ];
    named(4, &e)
}

pub fn swap() -> UnitaryMatrix {
    let o = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    #[rustfmt::skip]
    let e = [
        o, z, z, z,
        z, z, o, z,
        z, o, z, z,
        z, z, z, o,
    ];
    named(4, &e)
}

/// The generalized Hadamard
/// `H(θ) = 1/√2 [[e^{iθ}, e^{-iθ}], [e^{iθ}, -e^{-iθ}]]`; `H(0)` is the ordinary Hadamard.
pub fn h_theta(theta: f64) -> Result<UnitaryMatrix> {
    if !theta.is_finite() {
        return Err(Error::NonFiniteAngle { name: "theta", value: theta });
    }
    let p = C64::from_polar(FRAC_1_SQRT_2, theta);
    let m = C64::from_polar(FRAC_1_SQRT_2, -theta);
    UnitaryMatrix::from_row_slice(2, &[p, m, p, -m])
}

/// `H(θ)^{-1} = H(θ)^†`.
pub fn h_theta_inverse(theta: f64) -> Result<UnitaryMatrix> {
    Ok(h_theta(theta)?.dagger())
}

/// Frobenius distance between `H(−θ)` and the best scalar multiple of `H(θ)^T`.
/// Zero exactly at the degenerate points θ ∈ {0, π}.
pub fn transpose_scalar_defect(theta: f64) -> Result<f64> {
    let neg = h_theta(-theta)?;
    let tr = h_theta(theta)?.transpose();
    Ok(best_scalar_distance(neg.matrix(), tr.matrix()))
}

/// max |H(−θ) − H(θ)^T|
pub fn transpose_exact_defect(theta: f64) -> Result<f64> {
    let neg = h_theta(-theta)?;
    let tr = h_theta(theta)?.transpose();
    Ok(max_abs_diff(neg.matrix(), tr.matrix()))
}

fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance of an angle from the nearest of {0, π} (mod 2π).
pub fn degeneracy_distance(theta: f64) -> f64 {
    let r = reduce_angle(theta);
    r.min((r - PI).abs()).min(TAU - r)
}

/// Public angle parameters of the hardened protocol, reduced to [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaTriple {
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_c: f64,
}

impl ThetaTriple {
    /// Validates finiteness and the sum constraint (no degeneracy check).
    pub fn new(theta_a: f64, theta_b: f64, theta_c: f64) -> Result<Self> {
        for (name, v) in [("theta_a", theta_a), ("theta_b", theta_b), ("theta_c", theta_c)] {
            if !v.is_finite() {
                return Err(Error::NonFiniteAngle { name, value: v });
            }
        }
        let sum = theta_a + theta_b + theta_c;
        let r = sum.rem_euclid(TAU);
        let residue = r.min(TAU - r);
        if residue > ANGLE_SUM_TOL {
            return Err(Error::AngleSumNonZero { sum, residue });
        }
        Ok(Self {
            theta_a: reduce_angle(theta_a),
            theta_b: reduce_angle(theta_b),
            theta_c: reduce_angle(theta_c),
        })
    }

    /// θc = −θa − θb mod 2π, so the sum constraint holds by construction.
    pub fn from_pair(theta_a: f64, theta_b: f64) -> Result<Self> {
        if !theta_a.is_finite() {
            return Err(Error::NonFiniteAngle { name: "theta_a", value: theta_a });
        }
        if !theta_b.is_finite() {
            return Err(Error::NonFiniteAngle { name: "theta_b", value: theta_b });
        }
        let a = reduce_angle(theta_a);
        let b = reduce_angle(theta_b);
        let c = reduce_angle(-(a + b));
        Self::new(a, b, c)
    }

    /// `new` plus the hardened-configuration check on every angle.
    pub fn hardened(theta_a: f64, theta_b: f64, theta_c: f64) -> Result<Self> {
        let t = Self::new(theta_a, theta_b, theta_c)?;
        t.validate_hardened()?;
        Ok(t)
    }

    pub fn validate_hardened(&self) -> Result<()> {
        for (name, v) in self.named() {
            if degeneracy_distance(v) <= DEGENERACY_MARGIN {
                return Err(Error::DegenerateAngle { name, value: v });
            }
        }
        Ok(())
    }

    pub fn is_hardened(&self) -> bool {
        self.validate_hardened().is_ok()
    }

    fn named(&self) -> [(&'static str, f64); 3] {
        [("theta_a", self.theta_a), ("theta_b", self.theta_b), ("theta_c", self.theta_c)]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta_a, self.theta_b, self.theta_c]
    }

    /// All-zero triple: the ordinary Hadamard toggle.
    pub fn zero() -> Self {
        Self { theta_a: 0.0, theta_b: 0.0, theta_c: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [Self::PhiPlus, Self::PhiMinus, Self::PsiPlus, Self::PsiMinus];

    /// Amplitudes over |00>, |01>, |10>, |11>.
    pub fn amplitudes(self) -> [C64; 4] {
        let s = FRAC_1_SQRT_2;
        let z = c(0.0, 0.0);
        match self {
            Self::PhiPlus => [c(s, 0.0), z, z, c(s, 0.0)],
            Self::PhiMinus => [c(s, 0.0), z, z, c(-s, 0.0)],
            Self::PsiPlus => [z, c(s, 0.0), c(s, 0.0), z],
            Self::PsiMinus => [z, c(s, 0.0), c(-s, 0.0), z],
        }
    }

    /// Φ-type states have correlated computational outcomes.
    pub fn is_phi(self) -> bool {
        matches!(self, Self::PhiPlus | Self::PhiMinus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CarrierKind {
    Ghz,
    EvenParity,
}

impl CarrierKind {
    pub fn toggled(self) -> Self {
        match self {
            Self::Ghz => Self::EvenParity,
            Self::EvenParity => Self::Ghz,
        }
    }
}

pub fn make_carrier(kind: CarrierKind, labels: [&str; 3]) -> Result<StateVector> {
    let z = c(0.0, 0.0);
    let amps = match kind {
        CarrierKind::Ghz => {
            let s = c(FRAC_1_SQRT_2, 0.0);
            vec![s, z, z, z, z, z, z, s]
        }
        CarrierKind::EvenParity => {
            let h = c(0.5, 0.0);
            // |000>, |011>, |101>, |110>
            vec![h, z, z, h, z, h, h, z]
        }
    };
    StateVector::from_amplitudes(&labels, amps)
}

pub fn make_bell(kind: BellKind, labels: [&str; 2]) -> Result<StateVector> {
    StateVector::from_amplitudes(&labels, kind.amplitudes().to_vec())
}

/// Purity threshold above which a pair counts as unentangled with the rest.
pub const PURITY_TOL: f64 = 1e-10;

/// Coefficients of the pair `labels` in the (Φ+, Φ−, Ψ+, Ψ−) basis.
///
/// The pair must be in a pure state. Its global phase is fixed so that the
/// largest computational amplitude is real and positive.
pub fn bell_decompose(state: &StateVector, labels: [&str; 2]) -> Result<[C64; 4]> {
    let rho = state.reduced_density(&labels)?;
    let purity = rho.purity();
    if purity < 1.0 - PURITY_TOL {
        return Err(Error::EntangledWithEnvironment {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            purity,
        });
    }
    let j = (0..4)
        .max_by(|&x, &y| rho.entry(x, x).re.total_cmp(&rho.entry(y, y).re))
        .expect("four entries");
    let norm = rho.entry(j, j).re.sqrt();
    let psi: Vec<C64> = (0..4).map(|i| rho.entry(i, j) / norm).collect();
    let mut out = [c(0.0, 0.0); 4];
    for (k, kind) in BellKind::ALL.iter().enumerate() {
        out[k] = kind.amplitudes().iter().zip(&psi).map(|(b, p)| b.conj() * p).sum();
    }
    Ok(out)
}

/// True when two states agree up to a global phase, within `tol` on 1 − fidelity.
pub fn equal_up_to_phase(x: &StateVector, y: &StateVector, tol: f64) -> Result<bool> {
    Ok(1.0 - crate::state::fidelity(x, y)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::fidelity;

    fn toggle(state: &StateVector, gates: [&UnitaryMatrix; 3], labels: [&str; 3]) -> StateVector {
        let mut s = state.clone();
        for (g, l) in gates.iter().zip(labels) {
            s.apply(g, &[l]).unwrap();
        }
        s
    }

    const ABC: [&str; 3] = ["a", "b", "c"];

    #[test]
    fn h_theta_zero_is_hadamard() {
        assert!(max_abs_diff(h_theta(0.0).unwrap().matrix(), hadamard().matrix()) < 1e-15);
        assert!(max_abs_diff(h_theta_inverse(0.0).unwrap().matrix(), hadamard().matrix()) < 1e-15);
    }

    #[test]
    fn h_theta_on_zero_carries_phase() {
        let theta = 0.83;
        let out = StateVector::new_register(&["q"])
            .unwrap()
            .apply_unitary(&h_theta(theta).unwrap(), &["q"])
            .unwrap();
        let want = C64::from_polar(FRAC_1_SQRT_2, theta);
        assert!((out.amplitude(0) - want).norm() < 1e-15);
        assert!((out.amplitude(1) - want).norm() < 1e-15);
        let out1 = StateVector::basis(&["q"], &[1])
            .unwrap()
            .apply_unitary(&h_theta(theta).unwrap(), &["q"])
            .unwrap();
        let w = C64::from_polar(FRAC_1_SQRT_2, -theta);
        assert!((out1.amplitude(0) - w).norm() < 1e-15);
        assert!((out1.amplitude(1) + w).norm() < 1e-15);
    }

    #[test]
    fn h_theta_is_unitary_and_inverse_cancels() {
        let h = h_theta(1.3).unwrap();
        let prod = h.dagger().compose(&h).unwrap();
        assert!(max_abs_diff(prod.matrix(), identity2().matrix()) < 1e-12);
        for theta in [0.1, 2.2, 4.0, 5.9] {
            let p = h_theta_inverse(theta).unwrap().compose(&h_theta(theta).unwrap()).unwrap();
            assert!(max_abs_diff(p.matrix(), identity2().matrix()) < 1e-12);
        }
        assert!(matches!(h_theta(f64::NAN), Err(Error::NonFiniteAngle { .. })));
        assert!(matches!(h_theta_inverse(f64::INFINITY), Err(Error::NonFiniteAngle { .. })));
    }

    #[test]
    fn carrier_amplitudes() {
        let g = make_carrier(CarrierKind::Ghz, ABC).unwrap();
        let s = FRAC_1_SQRT_2;
        for i in 0..8 {
            let want = if i == 0 || i == 7 { s } else { 0.0 };
            assert!((g.amplitude(i) - c(want, 0.0)).norm() < 1e-15);
        }
        let e = make_carrier(CarrierKind::EvenParity, ABC).unwrap();
        for i in 0..8usize {
            let want = if i.count_ones() % 2 == 0 { 0.5 } else { 0.0 };
            assert!((e.amplitude(i) - c(want, 0.0)).norm() < 1e-15);
        }
        assert!(matches!(
            make_carrier(CarrierKind::Ghz, ["a", "a", "c"]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn ghz_e_overlap_is_one_eighth() {
        // only |000> is shared: (1/√2)(1/2) squared
        let g = make_carrier(CarrierKind::Ghz, ABC).unwrap();
        let e = make_carrier(CarrierKind::EvenParity, ABC).unwrap();
        assert!((fidelity(&g, &e).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn plain_toggle_swaps_carriers() {
        let h = hadamard();
        let g = make_carrier(CarrierKind::Ghz, ABC).unwrap();
        let e = make_carrier(CarrierKind::EvenParity, ABC).unwrap();
        assert!(fidelity(&toggle(&g, [&h, &h, &h], ABC), &e).unwrap() > 1.0 - 1e-12);
        assert!(fidelity(&toggle(&e, [&h, &h, &h], ABC), &g).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn bell_states_orthonormal() {
        for x in BellKind::ALL {
            for y in BellKind::ALL {
                let sx = make_bell(x, ["a", "b"]).unwrap();
                let sy = make_bell(y, ["a", "b"]).unwrap();
                let ip = sx.inner(&sy).unwrap().norm();
                let want = if x == y { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-15);
            }
        }
        let pm = make_bell(BellKind::PsiMinus, ["a", "b"]).unwrap();
        assert!((pm.amplitude(1).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((pm.amplitude(2).re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn bell_decomposition_examples() {
        let phi = make_bell(BellKind::PhiPlus, ["a", "b"]).unwrap();
        let k = bell_decompose(&phi, ["a", "b"]).unwrap();
        assert!((k[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(k[1..].iter().all(|z| z.norm() < 1e-12));

        let s01 = StateVector::basis(&["a", "b"], &[0, 1]).unwrap();
        let k = bell_decompose(&s01, ["a", "b"]).unwrap();
        let s = FRAC_1_SQRT_2;
        let want = [0.0, 0.0, s, s];
        for (z, w) in k.iter().zip(want) {
            assert!((z - c(w, 0.0)).norm() < 1e-12);
        }

        // entangled with a third qubit
        let g = make_carrier(CarrierKind::Ghz, ABC).unwrap();
        assert!(matches!(
            bell_decompose(&g, ["a", "b"]),
            Err(Error::EntangledWithEnvironment { .. })
        ));

        // embedded pair, other qubits in a product state
        let emb = StateVector::basis(&["x"], &[1]).unwrap().tensor(&phi).unwrap();
        let k = bell_decompose(&emb, ["b", "a"]).unwrap();
        assert!((k[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_triple_validation() {
        let t = ThetaTriple::hardened(0.7, 1.1, TAU - 1.8).unwrap();
        assert!((t.theta_c - (TAU - 1.8)).abs() < 1e-15);
        assert!(matches!(
            ThetaTriple::new(0.2, 0.3, 0.5),
            Err(Error::AngleSumNonZero { .. })
        ));
        assert!(matches!(
            ThetaTriple::hardened(0.0, 0.0, 0.0),
            Err(Error::DegenerateAngle { name: "theta_a", .. })
        ));
        assert!(matches!(
            ThetaTriple::hardened(PI, 0.5, PI - 0.5),
            Err(Error::DegenerateAngle { name: "theta_a", .. })
        ));
        assert!(matches!(
            ThetaTriple::hardened(0.5, PI, PI - 0.5),
            Err(Error::DegenerateAngle { name: "theta_b", .. })
        ));
        assert!(matches!(
            ThetaTriple::new(f64::NAN, 0.0, 0.0),
            Err(Error::NonFiniteAngle { name: "theta_a", .. })
        ));
        // reduction into [0, 2π)
        let t = ThetaTriple::new(-1.0, 0.4, 0.6).unwrap();
        assert!((t.theta_a - (TAU - 1.0)).abs() < 1e-12);
        let p = ThetaTriple::from_pair(0.7, 1.1).unwrap();
        assert!((p.theta_c - (TAU - 1.8)).abs() < 1e-12);
    }

    #[test]
    fn transpose_degenerate_points() {
        assert!(transpose_exact_defect(0.0).unwrap() < 1e-12);
        assert!(transpose_exact_defect(PI).unwrap() < 1e-12);
        assert!(transpose_scalar_defect(0.9).unwrap() > 1e-3);
        assert!(degeneracy_distance(TAU - 1e-9) < 1e-8);
        assert!((degeneracy_distance(PI + 0.25) - 0.25).abs() < 1e-12);
    }
}
