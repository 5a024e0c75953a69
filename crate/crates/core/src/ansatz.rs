//! The five fixed quanvolutional filter circuits.
//!
//! Every ansatz is a single layer: one `ROT` per qubit, followed by the
//! entangling block of its topology. Angles are drawn uniformly from
//! `[0, 2π)` with a ChaCha8 stream seeded by the ansatz seed, in program
//! order (`α, β, γ` per ROT, then one `φ` per ZZ gate).

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qsim::Gate;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnsatzKind {
    NoEnt,
    ZzFull,
    ZzLinear,
    ZzStar,
    Random,
}

impl AnsatzKind {
    pub const ALL: [AnsatzKind; 5] = [
        AnsatzKind::NoEnt,
        AnsatzKind::ZzFull,
        AnsatzKind::ZzLinear,
        AnsatzKind::ZzStar,
        AnsatzKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnsatzKind::NoEnt => "no_ent",
            AnsatzKind::ZzFull => "zz_full",
            AnsatzKind::ZzLinear => "zz_linear",
            AnsatzKind::ZzStar => "zz_star",
            AnsatzKind::Random => "random",
        }
    }

    pub fn min_qubits(self) -> usize {
        match self {
            AnsatzKind::NoEnt => 1,
            _ => 2,
        }
    }

    /// Number of two-qubit gates in an `n`-qubit instance.
    pub fn entangler_count(self, n: usize) -> usize {
        match self {
            AnsatzKind::NoEnt => 0,
            AnsatzKind::ZzFull => n * (n - 1) / 2,
            AnsatzKind::ZzLinear | AnsatzKind::ZzStar => n - 1,
            AnsatzKind::Random => 1,
        }
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnsatzKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Record(format!("unknown ansatz kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    kind: AnsatzKind,
    n_qubits: usize,
    seed: u64,
    gates: Vec<Gate>,
}

impl Ansatz {
    pub fn build(kind: AnsatzKind, n_qubits: usize, seed: u64) -> Result<Self> {
        if n_qubits < kind.min_qubits() {
            return Err(Error::TooFewQubits {
                kind: kind.name(),
                n_qubits,
                min: kind.min_qubits(),
            });
        }
        let mut rng = rng_from_seed(seed);
        let mut gates = Vec::new();

        match kind {
            AnsatzKind::Random => {
                // one random-axis rotation per qubit, then a single ZZ
                for qubit in 0..n_qubits {
                    let theta = rng.gen_range(0.0..TAU);
                    gates.push(match rng.gen_range(0..3) {
                        0 => Gate::Rx { qubit, theta },
                        1 => Gate::Ry { qubit, theta },
                        _ => Gate::Rz { qubit, theta },
                    });
                }
                let a = rng.gen_range(0..n_qubits);
                let mut b = rng.gen_range(0..n_qubits - 1);
                if b >= a {
                    b += 1;
                }
                gates.push(Gate::Zz {
                    first: a.min(b),
                    second: a.max(b),
                    phi: rng.gen_range(0.0..TAU),
                });
            }
            _ => {
                for qubit in 0..n_qubits {
                    gates.push(Gate::Rot {
                        qubit,
                        alpha: rng.gen_range(0.0..TAU),
                        beta: rng.gen_range(0.0..TAU),
                        gamma: rng.gen_range(0.0..TAU),
                    });
                }
                for (first, second) in entangling_pairs(kind, n_qubits) {
                    gates.push(Gate::Zz {
                        first,
                        second,
                        phi: rng.gen_range(0.0..TAU),
                    });
                }
            }
        }

        Ok(Self {
            kind,
            n_qubits,
            seed,
            gates,
        })
    }

    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    /// All gate angles in program order.
    pub fn angles(&self) -> Vec<f64> {
        self.gates.iter().flat_map(|g| g.angles()).collect()
    }

    /// Copy with every angle replaced, in the order [`Ansatz::angles`] yields.
    pub fn with_angles(&self, angles: &[f64]) -> Result<Self> {
        let expected: usize = self.gates.iter().map(|g| g.kind().angle_count()).sum();
        if angles.len() != expected {
            return Err(Error::Shape(format!(
                "ansatz has {expected} angles, got {}",
                angles.len()
            )));
        }
        let mut rest = angles;
        let mut gates = Vec::with_capacity(self.gates.len());
        for gate in &self.gates {
            let count = gate.kind().angle_count();
            let mut updated = *gate;
            for (i, &value) in rest[..count].iter().enumerate() {
                updated = updated.with_angle(i, value)?;
            }
            gates.push(updated);
            rest = &rest[count..];
        }
        Ok(Self {
            gates,
            ..self.clone()
        })
    }

    /// Plain-text key-value record. Angles carry 17 significant digits so a
    /// parsed record reproduces the circuit bit for bit.
    pub fn to_record(&self) -> String {
        let gates: Vec<String> = self
            .gates
            .iter()
            .map(|g| {
                let targets: Vec<String> = g.targets().iter().map(|t| t.to_string()).collect();
                format!("{}:{}", g.kind().name(), targets.join(","))
            })
            .collect();
        let angles: Vec<String> = self.angles().iter().map(|a| format!("{a:.16e}")).collect();
        format!(
            "kind={}\nn_qubits={}\nseed={}\ngates={}\nangles={}\n",
            self.kind,
            self.n_qubits,
            self.seed,
            gates.join(";"),
            angles.join(",")
        )
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut n_qubits = None;
        let mut seed = None;
        let mut layout = None;
        let mut angles = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Record(format!("expected key=value, got {line:?}")))?;
            match key {
                "kind" => kind = Some(value.parse::<AnsatzKind>()?),
                "n_qubits" => n_qubits = Some(parse_field::<usize>(key, value)?),
                "seed" => seed = Some(parse_field::<u64>(key, value)?),
                "gates" => layout = Some(value.to_string()),
                "angles" => {
                    angles = Some(
                        value
                            .split(',')
                            .filter(|s| !s.is_empty())
                            .map(|s| parse_field::<f64>(key, s))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => return Err(Error::Record(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Record(format!("missing key {k:?}"));
        let base = Self::build(
            kind.ok_or_else(|| missing("kind"))?,
            n_qubits.ok_or_else(|| missing("n_qubits"))?,
            seed.ok_or_else(|| missing("seed"))?,
        )?;
        let parsed = base.with_angles(&angles.ok_or_else(|| missing("angles"))?)?;
        if let Some(layout) = layout {
            let expected = parsed.to_record();
            let expected_layout = expected
                .lines()
                .find_map(|l| l.strip_prefix("gates="))
                .unwrap_or_default();
            if layout != expected_layout {
                return Err(Error::Record(
                    "gate layout does not match kind and seed".to_string(),
                ));
            }
        }
        Ok(parsed)
    }

    /// SHA-256 of the record, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_record().as_bytes()))
    }
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Record(format!("bad value {value:?} for {key}")))
}

/// Qubit pairs of the entangling block, 0-based, in product order.
fn entangling_pairs(kind: AnsatzKind, n: usize) -> Vec<(usize, usize)> {
    match kind {
        AnsatzKind::NoEnt | AnsatzKind::Random => Vec::new(),
        AnsatzKind::ZzFull => (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .collect(),
        AnsatzKind::ZzLinear => (0..n - 1).map(|p| (p, p + 1)).collect(),
        AnsatzKind::ZzStar => (1..n).map(|q| (0, q)).collect(),
    }
}
