//! Quanvolutional layer.
//!
//! Each `k×k` patch (stride 2) is angle-encoded with `Ry(π·pixel)` on `k²`
//! qubits, the ansatz is applied, and `⟨Z_q⟩` of qubit `q` becomes channel
//! `q` of the output at the patch's position. Pixels map to qubits row-major
//! within the patch (top-left is qubit 0).

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::ansatz::Ansatz;
use crate::error::{Error, Result};
use crate::image::{FeatureMap, Image};
use crate::qsim::{self, Gate, StateVector};

pub const STRIDE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Top-left `(row, col)` in the source image.
    pub origin: (usize, usize),
    /// Row-major `k×k` block.
    pub values: Vec<f64>,
}

/// Output rows/cols for a `size`-pixel axis.
fn output_extent(size: usize, kernel: usize, stride: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 || size < kernel || !(size - kernel).is_multiple_of(stride) {
        return Err(Error::Shape(format!(
            "axis of {size} pixels does not tile with kernel {kernel}, stride {stride}"
        )));
    }
    Ok((size - kernel) / stride + 1)
}

/// Patches in row-major scan order.
pub fn extract_patches(image: &Image, kernel: usize, stride: usize) -> Result<Vec<Patch>> {
    let rows = output_extent(image.height(), kernel, stride)?;
    let cols = output_extent(image.width(), kernel, stride)?;
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (i, j) = (r * stride, c * stride);
            let values = (0..kernel)
                .flat_map(|k| (0..kernel).map(move |l| (k, l)))
                .map(|(k, l)| image.pixel(i + k, j + l))
                .collect();
            patches.push(Patch {
                origin: (i, j),
                values,
            });
        }
    }
    Ok(patches)
}

/// `Ry(π·pixel)` on qubit `q` for every pixel `q` of the patch.
pub fn encoding_gates(values: &[f64]) -> Vec<Gate> {
    values
        .iter()
        .enumerate()
        .map(|(qubit, &p)| Gate::Ry {
            qubit,
            theta: PI * p,
        })
        .collect()
}

pub fn encode_patch(patch: &Patch) -> Result<StateVector> {
    if let Some((index, &value)) = patch
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::PixelRange { index, value });
    }
    let mut state = StateVector::zero(patch.values.len())?;
    state.run(&encoding_gates(&patch.values))?;
    Ok(state)
}

fn kernel_for(ansatz: &Ansatz) -> Result<usize> {
    let n = ansatz.n_qubits();
    let k = (n as f64).sqrt().round() as usize;
    if k * k != n {
        return Err(Error::Shape(format!(
            "ansatz acts on {n} qubits, which is not a square patch"
        )));
    }
    Ok(k)
}

fn patch_program(values: &[f64], ansatz: &Ansatz) -> Vec<Gate> {
    let mut program = encoding_gates(values);
    program.extend_from_slice(ansatz.gates());
    program
}

pub fn quanv_forward(image: &Image, ansatz: &Ansatz) -> Result<FeatureMap> {
    let kernel = kernel_for(ansatz)?;
    let rows = output_extent(image.height(), kernel, STRIDE)?;
    let cols = output_extent(image.width(), kernel, STRIDE)?;
    let n = ansatz.n_qubits();
    let mut out = FeatureMap::zeros(rows, cols, n);
    for patch in extract_patches(image, kernel, STRIDE)? {
        let mut state = encode_patch(&patch)?;
        state.run(ansatz.gates())?;
        let (r, c) = (patch.origin.0 / STRIDE, patch.origin.1 / STRIDE);
        for (k, z) in state.expectations_z().into_iter().enumerate() {
            out.set(r, c, k, z);
        }
    }
    Ok(out)
}

/// Exact gradient of `Σ upstream · quanv_forward(image)` with respect to the
/// pixels, via the parameter-shift rule on each encoding rotation.
pub fn quanv_input_gradient(
    image: &Image,
    ansatz: &Ansatz,
    upstream: &FeatureMap,
) -> Result<Vec<f64>> {
    let kernel = kernel_for(ansatz)?;
    let rows = output_extent(image.height(), kernel, STRIDE)?;
    let cols = output_extent(image.width(), kernel, STRIDE)?;
    let n = ansatz.n_qubits();
    upstream.expect_shape((rows, cols, n), "quanv upstream gradient")?;

    let mut grad = vec![0.0; image.height() * image.width()];
    for patch in extract_patches(image, kernel, STRIDE)? {
        let (r, c) = (patch.origin.0 / STRIDE, patch.origin.1 / STRIDE);
        let weights: Vec<f64> = (0..n).map(|k| upstream.get(r, c, k)).collect();
        if weights.iter().all(|w| *w == 0.0) {
            continue;
        }
        let program = patch_program(&patch.values, ansatz);
        for q in 0..n {
            // encoding gate q sits at program index q
            let d_theta = qsim::shift_derivatives(n, &program, q, 0)?;
            let d_pixel: f64 = PI
                * weights
                    .iter()
                    .zip(&d_theta)
                    .map(|(w, d)| w * d)
                    .sum::<f64>();
            let (dr, dc) = (q / kernel, q % kernel);
            grad[(patch.origin.0 + dr) * image.width() + patch.origin.1 + dc] += d_pixel;
        }
    }
    Ok(grad)
}

/// One cached forward result: the image's dataset index, the 32-byte
/// fingerprint of the extractor that produced it, and the flattened features.
///
/// On disk: `u64` index, 32 fingerprint bytes, then the features as
/// little-endian `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub index: u64,
    pub fingerprint: [u8; 32],
    pub features: Vec<f64>,
}

impl FeatureRecord {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(&self.index.to_le_bytes())?;
        out.write_all(&self.fingerprint)?;
        for v in &self.features {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads one record with `len` features; `Ok(None)` at a clean end of input.
    pub fn read_from<R: Read>(input: &mut R, len: usize) -> Result<Option<Self>> {
        let mut index = [0u8; 8];
        match read_full(input, &mut index)? {
            0 => return Ok(None),
            8 => {}
            got => {
                return Err(Error::Truncated {
                    what: "feature record",
                    expected: 8,
                    found: got,
                })
            }
        }
        let mut fingerprint = [0u8; 32];
        let mut body = vec![0u8; len * 8];
        for (buf, what) in [
            (&mut fingerprint[..], "feature fingerprint"),
            (&mut body[..], "feature values"),
        ] {
            let got = read_full(input, buf)?;
            if got != buf.len() {
                return Err(Error::Truncated {
                    what,
                    expected: buf.len(),
                    found: got,
                });
            }
        }
        let features = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Some(Self {
            index: u64::from_le_bytes(index),
            fingerprint,
            features,
        }))
    }
}

fn read_full<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}
