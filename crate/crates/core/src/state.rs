//! Dense state vectors over labelled qubit registers.
//!
//! Bit ordering is big-endian: the label at position 0 owns the most
//! significant bit of the amplitude index. For labels `["a", "b"]` the
//! amplitude at index 1 (`0b01`) is the coefficient of `|0>_a |1>_b`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::unitary::UnitaryMatrix;

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 12;

/// Norm tolerance accepted when building a state from raw amplitudes.
const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    labels: Vec<String>,
    amps: Vec<C64>,
}

/// JSON debug dump: `{"labels": [...], "amps": [[re, im], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub labels: Vec<String>,
    pub amps: Vec<[f64; 2]>,
}

fn check_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<String>> {
    if labels.is_empty() {
        return Err(Error::EmptyRegister);
    }
    if labels.len() > MAX_QUBITS {
        return Err(Error::TooManyQubits(labels.len()));
    }
    let mut out: Vec<String> = Vec::with_capacity(labels.len());
    for l in labels {
        let l = l.as_ref();
        if out.iter().any(|x| x == l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
        out.push(l.to_string());
    }
    Ok(out)
}

impl StateVector {
    /// |0...0> over the given labels.
    pub fn new_register<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let labels = check_labels(labels)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << labels.len()];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { labels, amps })
    }

    /// Builds a state from amplitudes that must already be normalized.
    pub fn from_amplitudes<S: AsRef<str>>(labels: &[S], amps: Vec<C64>) -> Result<Self> {
        let labels = check_labels(labels)?;
        if amps.len() != 1 << labels.len() {
            return Err(Error::DimensionMismatch { expected: 1 << labels.len(), found: amps.len() });
        }
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self { labels, amps })
    }

    /// Builds a state from arbitrary nonzero amplitudes, normalizing them.
    pub fn from_unnormalized<S: AsRef<str>>(labels: &[S], mut amps: Vec<C64>) -> Result<Self> {
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if n2 <= f64::MIN_POSITIVE || !n2.is_finite() {
            return Err(Error::NotNormalized(n2));
        }
        let s = n2.sqrt();
        amps.iter_mut().for_each(|a| *a /= s);
        Self::from_amplitudes(labels, amps)
    }

    /// Computational basis state; `bits[i]` is the value of `labels[i]`.
    pub fn basis<S: AsRef<str>>(labels: &[S], bits: &[u8]) -> Result<Self> {
        let mut st = Self::new_register(labels)?;
        if bits.len() != st.num_qubits() {
            return Err(Error::DimensionMismatch { expected: st.num_qubits(), found: bits.len() });
        }
        let mut idx = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::BadBit(b));
            }
            idx = (idx << 1) | b as usize;
        }
        st.amps[0] = C64::new(0.0, 0.0);
        st.amps[idx] = C64::new(1.0, 0.0);
        Ok(st)
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    fn shift_of(&self, label: &str) -> Result<usize> {
        Ok(self.num_qubits() - 1 - self.position(label)?)
    }

    fn target_shifts<S: AsRef<str>>(&self, targets: &[S]) -> Result<Vec<usize>> {
        let mut shifts = Vec::with_capacity(targets.len());
        for (i, t) in targets.iter().enumerate() {
            let t = t.as_ref();
            if targets[..i].iter().any(|u| u.as_ref() == t) {
                return Err(Error::DuplicateLabel(t.to_string()));
            }
            shifts.push(self.shift_of(t)?);
        }
        Ok(shifts)
    }

    /// Applies `m` to `targets` in place; `targets[0]` is the most significant
    /// qubit of the gate's local index.
    pub fn apply(&mut self, m: &UnitaryMatrix, targets: &[&str]) -> Result<()> {
        let k = targets.len();
        if k == 0 || m.dim() != 1 << k {
            return Err(Error::DimensionMismatch { expected: 1 << k, found: m.dim() });
        }
        let shifts = self.target_shifts(targets)?;
        let dim = m.dim();
        let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let offsets: Vec<usize> = (0..dim)
            .map(|j| {
                (0..k)
                    .filter(|&t| (j >> (k - 1 - t)) & 1 == 1)
                    .map(|t| 1usize << shifts[t])
                    .sum()
            })
            .collect();
        let mat = m.matrix();
        let mut buf = vec![C64::new(0.0, 0.0); dim];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (j, off) in offsets.iter().enumerate() {
                buf[j] = self.amps[base | off];
            }
            for (i, off) in offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (j, b) in buf.iter().enumerate() {
                    acc += mat[(i, j)] * b;
                }
                self.amps[base | off] = acc;
            }
        }
        Ok(())
    }

    /// Functional form of [`StateVector::apply`].
    pub fn apply_unitary(&self, m: &UnitaryMatrix, targets: &[&str]) -> Result<Self> {
        let mut out = self.clone();
        out.apply(m, targets)?;
        Ok(out)
    }

    /// Born probability that `target` reads 1.
    pub fn probability_one(&self, target: &str) -> Result<f64> {
        let bit = 1usize << self.shift_of(target)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Computational-basis measurement of one qubit, collapsing in place.
    pub fn measure_in_place<R: Rng + ?Sized>(&mut self, target: &str, rng: &mut R) -> Result<u8> {
        let p1 = self.probability_one(target)?;
        let bit = u8::from(rng.random::<f64>() < p1);
        self.collapse(target, bit)?;
        Ok(bit)
    }

    /// Functional form of [`StateVector::measure_in_place`].
    pub fn measure<R: Rng + ?Sized>(mut self, target: &str, rng: &mut R) -> Result<(u8, Self)> {
        let bit = self.measure_in_place(target, rng)?;
        Ok((bit, self))
    }

    /// Projects `target` onto `bit` and renormalizes.
    pub fn collapse(&mut self, target: &str, bit: u8) -> Result<()> {
        if bit > 1 {
            return Err(Error::BadBit(bit));
        }
        let mask = 1usize << self.shift_of(target)?;
        let want = if bit == 1 { mask } else { 0 };
        let mut n2 = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask != want {
                *a = C64::new(0.0, 0.0);
            } else {
                n2 += a.norm_sqr();
            }
        }
        if n2 <= 0.0 {
            return Err(Error::NotNormalized(n2));
        }
        let s = n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a /= s);
        Ok(())
    }

    /// Flips a qubit known to hold `bit` back to |0>.
    pub fn reset_known(&mut self, target: &str, bit: u8) -> Result<()> {
        if bit == 1 {
            self.apply(&crate::gates::pauli_x(), &[target])?;
        }
        Ok(())
    }

    /// Partial trace over every label not in `keep`; the result is ordered as `keep`.
    pub fn reduced_density(&self, keep: &[&str]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptyRegister);
        }
        let keep_shifts = self.target_shifts(keep)?;
        let env_shifts: Vec<usize> = (0..self.num_qubits())
            .rev()
            .filter(|s| !keep_shifts.contains(s))
            .collect();
        let dk = 1usize << keep_shifts.len();
        let de = 1usize << env_shifts.len();
        let mut m = DMatrix::<C64>::zeros(dk, de);
        for (idx, a) in self.amps.iter().enumerate() {
            let mut row = 0usize;
            for s in &keep_shifts {
                row = (row << 1) | ((idx >> s) & 1);
            }
            let mut col = 0usize;
            for s in &env_shifts {
                col = (col << 1) | ((idx >> s) & 1);
            }
            m[(row, col)] = *a;
        }
        let rho = &m * m.adjoint();
        let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        Ok(DensityMatrix::from_matrix_unchecked(rho))
    }

    /// <self|other>; label orders must agree.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.labels != other.labels {
            return Err(Error::LabelMismatch { left: self.labels.clone(), right: other.labels.clone() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(x, y)| x.conj() * y).sum())
    }

    /// Same state with qubits permuted into `order`.
    pub fn reordered(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.num_qubits() {
            return Err(Error::DimensionMismatch { expected: self.num_qubits(), found: order.len() });
        }
        let shifts = self.target_shifts(order)?;
        let n = order.len();
        let mut amps = vec![C64::new(0.0, 0.0); self.dim()];
        for (idx, a) in self.amps.iter().enumerate() {
            let mut new = 0usize;
            for (p, s) in shifts.iter().enumerate() {
                new |= ((idx >> s) & 1) << (n - 1 - p);
            }
            amps[new] = *a;
        }
        Ok(Self { labels: order.iter().map(|s| s.to_string()).collect(), amps })
    }

    /// self ⊗ other, with self's qubits more significant.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let labels = check_labels(&labels)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { labels, amps })
    }

    pub fn relabel(&mut self, old: &str, new: &str) -> Result<()> {
        let pos = self.position(old)?;
        if old != new && self.has_label(new) {
            return Err(Error::DuplicateLabel(new.to_string()));
        }
        self.labels[pos] = new.to_string();
        Ok(())
    }

    /// Appends a fresh |0> qubit as the least significant position.
    pub fn append_qubit(&mut self, label: &str) -> Result<()> {
        let fresh = Self::new_register(&[label])?;
        *self = self.tensor(&fresh)?;
        Ok(())
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            labels: self.labels.clone(),
            amps: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        }
    }

    pub fn from_dump(d: &StateDump) -> Result<Self> {
        let amps = d.amps.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        Self::from_amplitudes(&d.labels, amps)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_dump()).expect("state dump serializes")
    }
}

/// |<x|y>|^2 for states over the same label order.
pub fn fidelity(x: &StateVector, y: &StateVector) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    Ok(x.inner(y)?.norm_sqr())
}
