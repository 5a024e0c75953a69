mod support;

use proptest::prelude::*;
use qrobust_core::qsim::{self, Gate, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn programs_match_kronecker_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.gen_range(1..=4);
        let len = rng.gen_range(0..12);
        let gates = random_program(&mut rng, n, len);
        let state = qsim::run_program(&StateVector::zero(n).unwrap(), &gates).unwrap();
        let oracle = program_unitary(&gates, n) * zero_ket(n);
        for (a, b) in state.amplitudes().iter().zip(oracle.iter()) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b} for {gates:?}");
        }
    }
}

#[test]
fn shift_rule_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    for _ in 0..150 {
        let n = rng.gen_range(1..=4);
        let len = rng.gen_range(1..10);
        let gates = random_program(&mut rng, n, len);
        let gi = rng.gen_range(0..len);
        let ai = rng.gen_range(0..gates[gi].kind().angle_count());
        let q = rng.gen_range(0..n);
        let exact = qsim::shift_derivative(n, &gates, gi, ai, q).unwrap();
        let angle = gates[gi].angles()[ai];
        let fd = central_difference(
            |x| {
                let mut g = gates.clone();
                g[gi] = g[gi].with_angle(ai, x).unwrap();
                oracle_z(&g, n, q)
            },
            angle,
            h,
        );
        assert!((exact - fd).abs() < 1e-6, "{exact} vs {fd}");
    }
}

#[test]
fn zz_on_eigenstates_only_changes_phase() {
    // basis states are ZZ eigenstates, so every ⟨Z⟩ is untouched
    for basis in 0..16usize {
        let mut gates: Vec<Gate> = (0..4)
            .filter(|q| (basis >> q) & 1 == 1)
            .map(|q| Gate::Rx {
                qubit: q,
                theta: std::f64::consts::PI,
            })
            .collect();
        let before = qsim::program_expectations(4, &gates).unwrap();
        gates.push(Gate::Zz {
            first: 1,
            second: 3,
            phi: 0.77,
        });
        let after = qsim::program_expectations(4, &gates).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    let angle = -10.0f64..10.0;
    prop_oneof![
        (0..n, angle.clone()).prop_map(|(qubit, theta)| Gate::Rx { qubit, theta }),
        (0..n, angle.clone()).prop_map(|(qubit, theta)| Gate::Ry { qubit, theta }),
        (0..n, angle.clone()).prop_map(|(qubit, theta)| Gate::Rz { qubit, theta }),
        (0..n, angle.clone(), angle.clone(), angle.clone()).prop_map(
            |(qubit, alpha, beta, gamma)| {
                Gate::Rot {
                    qubit,
                    alpha,
                    beta,
                    gamma,
                }
            }
        ),
        (0..n, 1..n, angle).prop_map(move |(first, off, phi)| Gate::Zz {
            first,
            second: (first + off) % n,
            phi,
        }),
    ]
}

proptest! {
    #[test]
    fn norm_preserved_and_z_bounded(gates in prop::collection::vec(gate_strategy(4), 0..40)) {
        let state = qsim::run_program(&StateVector::zero(4).unwrap(), &gates).unwrap();
        prop_assert!((state.norm() - 1.0).abs() < 1e-10);
        for z in state.expectations_z() {
            prop_assert!((-1.0..=1.0).contains(&z));
        }
    }
}
