//! A frozen feature extractor plus a trainable dense head.

use std::io::{Read, Write};

use crate::ansatz::Ansatz;
use crate::classical::{self, ConvLayer, DenseHead, CLASSES};
use crate::error::{Error, Result};
use crate::image::{FeatureMap, Image};
use crate::quanv;

#[derive(Debug, Clone, PartialEq)]
pub enum Extractor {
    Quantum(Ansatz),
    Classical(ConvLayer),
}

impl Extractor {
    pub fn features(&self, image: &Image) -> Result<FeatureMap> {
        match self {
            Extractor::Quantum(a) => quanv::quanv_forward(image, a),
            Extractor::Classical(c) => classical::conv_forward(image, c),
        }
    }

    /// Pixel gradient of `Σ upstream · features(image)`.
    pub fn input_gradient(&self, image: &Image, upstream: &FeatureMap) -> Result<Vec<f64>> {
        match self {
            Extractor::Quantum(a) => quanv::quanv_input_gradient(image, a, upstream),
            Extractor::Classical(c) => {
                let acts = classical::conv_forward(image, c)?;
                classical::conv_input_gradient(c, upstream, &acts)
            }
        }
    }

    /// `"cnn"` or `"qunn_<ansatz kind>"`.
    pub fn name(&self) -> String {
        match self {
            Extractor::Quantum(a) => format!("qunn_{}", a.kind()),
            Extractor::Classical(_) => "cnn".to_string(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Extractor::Quantum(a) => a.seed(),
            Extractor::Classical(c) => c.seed(),
        }
    }

    pub fn fingerprint(&self) -> String {
        match self {
            Extractor::Quantum(a) => a.fingerprint(),
            Extractor::Classical(c) => c.fingerprint(),
        }
    }

    pub fn fingerprint_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        hex::decode_to_slice(self.fingerprint(), &mut out).expect("fingerprint is 64 hex chars");
        out
    }

    fn kind_tag(&self) -> u8 {
        match self {
            Extractor::Classical(_) => 0,
            Extractor::Quantum(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub extractor: Extractor,
    pub head: DenseHead,
}

/// Anything an attack can query: class probabilities, and the loss together
/// with its gradient with respect to the input pixels.
pub trait Differentiable: Sync {
    fn probabilities(&self, image: &Image) -> Result<Vec<f64>>;

    fn loss_and_input_gradient(&self, image: &Image) -> Result<(f64, Vec<f64>)>;

    fn predict(&self, image: &Image) -> Result<usize> {
        let p = self.probabilities(image)?;
        Ok(argmax(&p))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    // first index wins ties
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl Model {
    pub fn new(extractor: Extractor, head: DenseHead) -> Self {
        Self { extractor, head }
    }

    pub fn name(&self) -> String {
        self.extractor.name()
    }

    pub fn probabilities_from_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(classical::softmax(&self.head.logits(features)?))
    }

    /// Writes the checkpoint: magic `QRBHEAD1`, extractor tag (0 = classical,
    /// 1 = quantum), extractor seed (`u64`), 32-byte extractor fingerprint,
    /// class and input counts (`u32` each), then `W` row-major and `b`, all
    /// little-endian `f64`.
    pub fn write_checkpoint<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&[self.extractor.kind_tag()])?;
        out.write_all(&self.extractor.seed().to_le_bytes())?;
        out.write_all(&self.extractor.fingerprint_bytes())?;
        out.write_all(&(CLASSES as u32).to_le_bytes())?;
        out.write_all(&(self.head.inputs() as u32).to_le_bytes())?;
        for v in self.head.weights().iter().chain(self.head.bias()) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Restores a head for `extractor`, which must match the fingerprint
    /// recorded in the checkpoint.
    pub fn read_checkpoint<R: Read>(input: &mut R, extractor: Extractor) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let header_len = CHECKPOINT_MAGIC.len() + 1 + 8 + 32 + 4 + 4;
        if bytes.len() < header_len {
            return Err(Error::Truncated {
                what: "checkpoint header",
                expected: header_len,
                found: bytes.len(),
            });
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Record("not a model checkpoint".to_string()));
        }
        let tag = bytes[8];
        let seed = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes"));
        let fingerprint: [u8; 32] = bytes[17..49].try_into().expect("32 bytes");
        let classes = u32::from_le_bytes(bytes[49..53].try_into().expect("4 bytes")) as usize;
        let inputs = u32::from_le_bytes(bytes[53..57].try_into().expect("4 bytes")) as usize;
        if tag != extractor.kind_tag()
            || seed != extractor.seed()
            || fingerprint != extractor.fingerprint_bytes()
        {
            return Err(Error::Record(format!(
                "checkpoint was written for a different extractor than {}",
                extractor.name()
            )));
        }
        if classes != CLASSES {
            return Err(Error::Record(format!("checkpoint has {classes} classes")));
        }
        let body = &bytes[header_len..];
        let expected = (classes * inputs + classes) * 8;
        if body.len() != expected {
            return Err(Error::Truncated {
                what: "checkpoint parameters",
                expected,
                found: body.len(),
            });
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let (w, b) = values.split_at(classes * inputs);
        Ok(Self {
            extractor,
            head: DenseHead::from_parts(inputs, w.to_vec(), b.to_vec())?,
        })
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"QRBHEAD1";

impl Differentiable for Model {
    fn probabilities(&self, image: &Image) -> Result<Vec<f64>> {
        let features = self.extractor.features(image)?;
        classical::dense_forward(&features, &self.head)
    }

    fn loss_and_input_gradient(&self, image: &Image) -> Result<(f64, Vec<f64>)> {
        let features = self.extractor.features(image)?;
        let probs = classical::dense_forward(&features, &self.head)?;
        let grads = classical::loss_and_grads(
            &probs,
            image.label() as usize,
            features.as_slice(),
            &self.head,
        )?;
        let (h, w, c) = features.shape();
        let upstream = FeatureMap::from_vec(h, w, c, grads.features)?;
        let pixel_grad = self.extractor.input_gradient(image, &upstream)?;
        Ok((grads.loss, pixel_grad))
    }
}
