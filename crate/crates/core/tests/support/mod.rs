//! Reference implementations used only by tests. Nothing here calls into
//! the simulator's gate kernels.
#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qrobust_core::qsim::Gate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_qubit(gate: &Gate) -> DMatrix<Complex64> {
    let rx = |t: f64| {
        let (s, co) = (t / 2.0).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
    };
    let ry = |t: f64| {
        let (s, co) = (t / 2.0).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
    };
    let rz = |t: f64| {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::from_polar(1.0, -t / 2.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                Complex64::from_polar(1.0, t / 2.0),
            ],
        )
    };
    match *gate {
        Gate::Rx { theta, .. } => rx(theta),
        Gate::Ry { theta, .. } => ry(theta),
        Gate::Rz { theta, .. } => rz(theta),
        Gate::Rot {
            alpha, beta, gamma, ..
        } => rz(alpha) * ry(beta) * rz(gamma),
        Gate::Zz { .. } => unreachable!(),
    }
}

/// Full `2^n × 2^n` unitary; qubit 0 is the rightmost Kronecker factor.
pub fn gate_unitary(gate: &Gate, n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    match *gate {
        Gate::Zz { first, second, phi } => {
            // Z_p Z_q eigenvalue is +1 on equal bits and -1 otherwise
            let mut u = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                let zp = if (i >> first) & 1 == 0 { 1.0 } else { -1.0 };
                let zq = if (i >> second) & 1 == 0 { 1.0 } else { -1.0 };
                u[(i, i)] = Complex64::from_polar(1.0, -phi * zp * zq);
            }
            u
        }
        _ => {
            let q = gate.targets()[0];
            let mut u = DMatrix::from_element(1, 1, c(1.0, 0.0));
            for k in (0..n).rev() {
                let factor = if k == q {
                    single_qubit(gate)
                } else {
                    DMatrix::identity(2, 2)
                };
                u = u.kronecker(&factor);
            }
            u
        }
    }
}

pub fn program_unitary(gates: &[Gate], n: usize) -> DMatrix<Complex64> {
    gates
        .iter()
        .fold(DMatrix::identity(1 << n, 1 << n), |acc, g| {
            gate_unitary(g, n) * acc
        })
}

pub fn zero_ket(n: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(1 << n);
    v[0] = c(1.0, 0.0);
    v
}

/// `⟨Z_q⟩` of `U|0…0⟩` through the dense unitary.
pub fn oracle_z(gates: &[Gate], n: usize, qubit: usize) -> f64 {
    let psi = program_unitary(gates, n) * zero_ket(n);
    psi.iter()
        .enumerate()
        .map(|(i, a)| {
            if (i >> qubit) & 1 == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum()
}

pub fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> Gate {
    let q = rng.gen_range(0..n);
    let t = rng.gen_range(-TAU..TAU);
    match rng.gen_range(0..if n > 1 { 5 } else { 4 }) {
        0 => Gate::Rx { qubit: q, theta: t },
        1 => Gate::Ry { qubit: q, theta: t },
        2 => Gate::Rz { qubit: q, theta: t },
        3 => Gate::Rot {
            qubit: q,
            alpha: t,
            beta: rng.gen_range(-TAU..TAU),
            gamma: rng.gen_range(-TAU..TAU),
        },
        _ => {
            let mut p = rng.gen_range(0..n - 1);
            if p >= q {
                p += 1;
            }
            Gate::Zz {
                first: q,
                second: p,
                phi: t,
            }
        }
    }
}

pub fn random_program(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Gate> {
    (0..len).map(|_| random_gate(rng, n)).collect()
}

/// Central difference `(f(x+h) − f(x−h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
