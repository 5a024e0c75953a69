//! Entanglement and expressibility diagnostics for the filter circuits.
//!
//! Meyer–Wallach `Q = 2·(1 − mean_k Tr ρ_k²)` over single-qubit reduced
//! states. Expressibility is the KL divergence between the histogram of
//! pairwise fidelities `|⟨ψ_θ|ψ_θ'⟩|²` of random-parameter circuit outputs
//! and the Haar fidelity density `(N − 1)(1 − F)^(N − 2)`, `N = 2^n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::ansatz::{Ansatz, AnsatzKind};
use crate::error::{Error, Result};
use crate::qsim::StateVector;
use crate::quanv::encoding_gates;
use crate::seed::{derive_seed, rng_from_seed};

/// Added to every histogram bin before normalizing.
pub const KL_SMOOTHING: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_BINS: usize = 75;

/// `Tr ρ_q²` from the partial trace over every other qubit.
pub fn single_qubit_purity(state: &StateVector, qubit: usize) -> f64 {
    let bit = 1usize << qubit;
    let amps = state.amplitudes();
    let (mut p0, mut p1) = (0.0, 0.0);
    let mut coherence = Complex64::new(0.0, 0.0);
    for (i, a) in amps.iter().enumerate() {
        if i & bit == 0 {
            p0 += a.norm_sqr();
            coherence += a * amps[i | bit].conj();
        } else {
            p1 += a.norm_sqr();
        }
    }
    p0 * p0 + p1 * p1 + 2.0 * coherence.norm_sqr()
}

/// `Tr ρ_q²` as `Σ σ⁴` over the Schmidt coefficients of the `q | rest` cut.
pub fn single_qubit_purity_schmidt(state: &StateVector, qubit: usize) -> f64 {
    let n = state.n_qubits();
    let rest = 1usize << (n - 1);
    let amps = state.amplitudes();
    let matrix = DMatrix::from_fn(2, rest, |row, col| {
        // spread `col` over the bits other than `qubit`
        let low = col & ((1 << qubit) - 1);
        let high = (col >> qubit) << (qubit + 1);
        amps[high | (row << qubit) | low]
    });
    matrix.singular_values().iter().map(|s| s.powi(4)).sum()
}

pub fn meyer_wallach_state(state: &StateVector) -> f64 {
    let n = state.n_qubits();
    let mean: f64 = (0..n).map(|q| single_qubit_purity(state, q)).sum::<f64>() / n as f64;
    (2.0 * (1.0 - mean)).clamp(0.0, 1.0)
}

/// Mean `Q` of the ansatz over `samples` random product inputs encoded
/// exactly as image patches are (`Ry(π·u)`, `u ~ U[0, 1]`).
pub fn meyer_wallach(ansatz: &Ansatz, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Shape("at least one sample is required".to_string()));
    }
    let mut rng = rng_from_seed(seed);
    let n = ansatz.n_qubits();
    let mut total = 0.0;
    for _ in 0..samples {
        let pixels: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mut state = StateVector::zero(n)?;
        state.run(&encoding_gates(&pixels))?;
        state.run(ansatz.gates())?;
        total += meyer_wallach_state(&state);
    }
    Ok(total / samples as f64)
}

pub fn haar_fidelity_density(fidelity: f64, n_qubits: usize) -> f64 {
    let dim = (1u64 << n_qubits) as f64;
    (dim - 1.0) * (1.0 - fidelity).powf(dim - 2.0)
}

/// Haar probability mass of each of `bins` equal-width bins on `[0, 1]`,
/// from the closed-form CDF `1 − (1 − F)^(N − 1)`.
pub fn haar_bin_probabilities(n_qubits: usize, bins: usize) -> Vec<f64> {
    let dim = (1u64 << n_qubits) as f64;
    (0..bins)
        .map(|b| {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            (1.0 - lo).powf(dim - 1.0) - (1.0 - hi).powf(dim - 1.0)
        })
        .collect()
}

pub fn fidelity_histogram(fidelities: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for &f in fidelities {
        let b = ((f.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    let total = fidelities.len().max(1) as f64;
    counts.into_iter().map(|c| c / total).collect()
}

/// `Σ p·ln(p/q)` after adding [`KL_SMOOTHING`] to every bin of both
/// distributions and renormalizing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let smooth = |d: &[f64]| {
        let total: f64 = d.iter().map(|x| x + KL_SMOOTHING).sum();
        d.iter()
            .map(|x| (x + KL_SMOOTHING) / total)
            .collect::<Vec<_>>()
    };
    let (p, q) = (smooth(p), smooth(q));
    p.iter()
        .zip(&q)
        .map(|(a, b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Expressibility proxy of an ansatz family: `samples` pairs of independently
/// seeded instances, each applied to `|0…0⟩`.
pub fn expressibility_kl(
    kind: AnsatzKind,
    n_qubits: usize,
    samples: usize,
    bins: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 2 || bins < 2 {
        return Err(Error::Shape(
            "expressibility needs at least 2 samples and 2 bins".to_string(),
        ));
    }
    let output = |label: String| -> Result<StateVector> {
        let ansatz = Ansatz::build(kind, n_qubits, derive_seed(seed, &label))?;
        let mut state = StateVector::zero(n_qubits)?;
        state.run(ansatz.gates())?;
        Ok(state)
    };
    let mut fidelities = Vec::with_capacity(samples);
    for i in 0..samples {
        let a = output(format!("expr/{i}/a"))?;
        let b = output(format!("expr/{i}/b"))?;
        let overlap: Complex64 = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| x.conj() * y)
            .sum();
        fidelities.push(overlap.norm_sqr());
    }
    Ok(kl_divergence(
        &fidelity_histogram(&fidelities, bins),
        &haar_bin_probabilities(n_qubits, bins),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub kind: AnsatzKind,
    pub fingerprint: String,
    pub meyer_wallach: f64,
    pub expressibility_kl: f64,
    pub samples: usize,
    pub seed: u64,
}

impl MetricReport {
    pub fn compute(ansatz: &Ansatz, samples: usize, bins: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            kind: ansatz.kind(),
            fingerprint: ansatz.fingerprint(),
            meyer_wallach: meyer_wallach(ansatz, samples, derive_seed(seed, "meyer_wallach"))?,
            expressibility_kl: expressibility_kl(
                ansatz.kind(),
                ansatz.n_qubits(),
                samples,
                bins,
                derive_seed(seed, "expressibility"),
            )?,
            samples,
            seed,
        })
    }

    pub const CSV_HEADER: &'static str = "kind,seed,meyer_wallach,expressibility_kl,samples";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.17e},{:.17e},{}",
            self.kind, self.seed, self.meyer_wallach, self.expressibility_kl, self.samples
        )
    }
}
