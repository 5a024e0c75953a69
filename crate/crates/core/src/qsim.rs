//! Dense statevector simulation for small registers.
//!
//! Qubit `q` is bit `q` of the basis-state index, so qubit 0 is the least
//! significant bit. Rotations follow `R_a(θ) = exp(-iθσ_a/2)` and the ZZ
//! interaction is `exp(-iφ Z_p Z_q)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use thiserror::Error;

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("qubit count {0} outside 1..={MAX_QUBITS}")]
    QubitCount(usize),
    #[error("qubit {qubit} is not valid for a {n_qubits}-qubit register")]
    InvalidQubit { qubit: usize, n_qubits: usize },
    #[error("two-qubit gate targets the same qubit {0} twice")]
    DuplicateTarget(usize),
    #[error("gate index {index} out of range for a program of {len} gates")]
    GateIndex { index: usize, len: usize },
    #[error("angle index {index} out of range for a {kind:?} gate")]
    AngleIndex { index: usize, kind: GateKind },
    #[error("amplitude vector of length {len} does not describe a qubit register")]
    AmplitudeLength { len: usize },
}

pub type Result<T> = std::result::Result<T, QsimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Rot,
    Zz,
}

impl GateKind {
    pub fn angle_count(self) -> usize {
        match self {
            GateKind::Rot => 3,
            _ => 1,
        }
    }

    /// `(shift, coefficient)` of the two-term parameter-shift rule.
    ///
    /// Single-qubit rotations have generator eigenvalues ±1/2; `Z⊗Z` has ±1.
    pub fn shift_rule(self) -> (f64, f64) {
        match self {
            GateKind::Zz => (FRAC_PI_4, 1.0),
            _ => (FRAC_PI_2, 0.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Rot => "ROT",
            GateKind::Zz => "ZZ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx {
        qubit: usize,
        theta: f64,
    },
    Ry {
        qubit: usize,
        theta: f64,
    },
    Rz {
        qubit: usize,
        theta: f64,
    },
    /// `Rz(alpha) · Ry(beta) · Rz(gamma)`; `gamma` acts first.
    Rot {
        qubit: usize,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    Zz {
        first: usize,
        second: usize,
        phi: f64,
    },
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Rx { .. } => GateKind::Rx,
            Gate::Ry { .. } => GateKind::Ry,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::Rot { .. } => GateKind::Rot,
            Gate::Zz { .. } => GateKind::Zz,
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { qubit, .. }
            | Gate::Ry { qubit, .. }
            | Gate::Rz { qubit, .. }
            | Gate::Rot { qubit, .. } => vec![qubit],
            Gate::Zz { first, second, .. } => vec![first, second],
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        match *self {
            Gate::Rx { theta, .. } | Gate::Ry { theta, .. } | Gate::Rz { theta, .. } => {
                vec![theta]
            }
            Gate::Rot {
                alpha, beta, gamma, ..
            } => vec![alpha, beta, gamma],
            Gate::Zz { phi, .. } => vec![phi],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Zz { .. })
    }

    /// Copy of the gate with angle `index` replaced.
    pub fn with_angle(&self, index: usize, value: f64) -> Result<Gate> {
        let mut gate = *self;
        let slot = match (&mut gate, index) {
            (Gate::Rx { theta, .. }, 0)
            | (Gate::Ry { theta, .. }, 0)
            | (Gate::Rz { theta, .. }, 0) => theta,
            (Gate::Rot { alpha, .. }, 0) => alpha,
            (Gate::Rot { beta, .. }, 1) => beta,
            (Gate::Rot { gamma, .. }, 2) => gamma,
            (Gate::Zz { phi, .. }, 0) => phi,
            _ => {
                return Err(QsimError::AngleIndex {
                    index,
                    kind: self.kind(),
                })
            }
        };
        *slot = value;
        Ok(gate)
    }

    /// The 2×2 unitary of a single-qubit gate, row-major. `None` for ZZ.
    pub fn matrix(&self) -> Option<[Complex64; 4]> {
        match *self {
            Gate::Rx { theta, .. } => Some(rx_matrix(theta)),
            Gate::Ry { theta, .. } => Some(ry_matrix(theta)),
            Gate::Rz { theta, .. } => Some(rz_matrix(theta)),
            Gate::Rot {
                alpha, beta, gamma, ..
            } => Some(matmul2(
                &rz_matrix(alpha),
                &matmul2(&ry_matrix(beta), &rz_matrix(gamma)),
            )),
            Gate::Zz { .. } => None,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let targets = self.targets();
        for &q in &targets {
            if q >= n_qubits {
                return Err(QsimError::InvalidQubit { qubit: q, n_qubits });
            }
        }
        if let [a, b] = targets[..] {
            if a == b {
                return Err(QsimError::DuplicateTarget(a));
            }
        }
        Ok(())
    }
}

fn rx_matrix(theta: f64) -> [Complex64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        Complex64::new(c, 0.0),
        Complex64::new(0.0, -s),
        Complex64::new(0.0, -s),
        Complex64::new(c, 0.0),
    ]
}

fn ry_matrix(theta: f64) -> [Complex64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        Complex64::new(c, 0.0),
        Complex64::new(-s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(c, 0.0),
    ]
}

fn rz_matrix(theta: f64) -> [Complex64; 4] {
    let zero = Complex64::new(0.0, 0.0);
    [
        Complex64::from_polar(1.0, -theta / 2.0),
        zero,
        zero,
        Complex64::from_polar(1.0, theta / 2.0),
    ]
}

fn matmul2(a: &[Complex64; 4], b: &[Complex64; 4]) -> [Complex64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(QsimError::QubitCount(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalization
    /// is the caller's responsibility.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(QsimError::AmplitudeLength { len });
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            Gate::Zz { first, second, phi } => {
                let same = Complex64::from_polar(1.0, -phi);
                let differ = Complex64::from_polar(1.0, phi);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    let parity = ((i >> first) ^ (i >> second)) & 1;
                    *amp *= if parity == 0 { same } else { differ };
                }
            }
            _ => {
                let m = gate.matrix().expect("single-qubit gate has a matrix");
                let q = gate.targets()[0];
                let bit = 1usize << q;
                for i in 0..self.amps.len() {
                    if i & bit != 0 {
                        continue;
                    }
                    let j = i | bit;
                    let (a0, a1) = (self.amps[i], self.amps[j]);
                    self.amps[i] = m[0] * a0 + m[1] * a1;
                    self.amps[j] = m[2] * a0 + m[3] * a1;
                }
            }
        }
        Ok(())
    }

    pub fn run(&mut self, gates: &[Gate]) -> Result<()> {
        gates.iter().try_for_each(|g| self.apply(g))
    }

    /// Exact `⟨Z_qubit⟩`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(QsimError::InvalidQubit {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        let bit = 1usize << qubit;
        let value: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i & bit == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum();
        Ok(value.clamp(-1.0, 1.0))
    }

    /// `⟨Z_k⟩` for every qubit in index order.
    pub fn expectations_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, slot) in out.iter_mut().enumerate() {
                if (i >> q) & 1 == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        for v in &mut out {
            *v = v.clamp(-1.0, 1.0);
        }
        out
    }
}

/// Applies `gates` left to right to a copy of `state`.
pub fn run_program(state: &StateVector, gates: &[Gate]) -> Result<StateVector> {
    let mut out = state.clone();
    out.run(gates)?;
    Ok(out)
}

/// `⟨Z_k⟩` for every qubit after running `gates` on `|0…0⟩`.
pub fn program_expectations(n_qubits: usize, gates: &[Gate]) -> Result<Vec<f64>> {
    let mut state = StateVector::zero(n_qubits)?;
    state.run(gates)?;
    Ok(state.expectations_z())
}

/// Parameter-shift derivatives of every `⟨Z_k⟩` with respect to one gate
/// angle, for the program run on `|0…0⟩`.
pub fn shift_derivatives(
    n_qubits: usize,
    gates: &[Gate],
    gate_index: usize,
    angle_index: usize,
) -> Result<Vec<f64>> {
    let gate = gates.get(gate_index).ok_or(QsimError::GateIndex {
        index: gate_index,
        len: gates.len(),
    })?;
    let angle = *gate
        .angles()
        .get(angle_index)
        .ok_or(QsimError::AngleIndex {
            index: angle_index,
            kind: gate.kind(),
        })?;
    let (shift, coeff) = gate.kind().shift_rule();

    let mut shifted = gates.to_vec();
    shifted[gate_index] = gate.with_angle(angle_index, angle + shift)?;
    let plus = program_expectations(n_qubits, &shifted)?;
    shifted[gate_index] = gate.with_angle(angle_index, angle - shift)?;
    let minus = program_expectations(n_qubits, &shifted)?;

    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) * coeff)
        .collect())
}

/// `∂⟨Z_qubit⟩/∂angle` by the parameter-shift rule.
pub fn shift_derivative(
    n_qubits: usize,
    gates: &[Gate],
    gate_index: usize,
    angle_index: usize,
    qubit: usize,
) -> Result<f64> {
    if qubit >= n_qubits {
        return Err(QsimError::InvalidQubit { qubit, n_qubits });
    }
    Ok(shift_derivatives(n_qubits, gates, gate_index, angle_index)?[qubit])
}
