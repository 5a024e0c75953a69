//! Classical layers: the frozen 2×2/stride-2 convolution with ReLU, the
//! trainable dense softmax head, cross-entropy, and Adam.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::{FeatureMap, Image};
use crate::seed::rng_from_seed;

pub const CONV_FILTERS: usize = 4;
pub const CONV_KERNEL: usize = 2;
pub const CONV_STRIDE: usize = 2;
pub const CLASSES: usize = 10;

/// Frozen convolution. Kernels are `[filter][row-major 2×2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    kernels: [[f64; CONV_KERNEL * CONV_KERNEL]; CONV_FILTERS],
    bias: [f64; CONV_FILTERS],
    seed: u64,
}

impl ConvLayer {
    /// Kernels uniform in `[-1, 1]`, zero bias.
    pub fn random(seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut kernels = [[0.0; CONV_KERNEL * CONV_KERNEL]; CONV_FILTERS];
        for w in kernels.iter_mut().flatten() {
            *w = rng.gen_range(-1.0..=1.0);
        }
        Self {
            kernels,
            bias: [0.0; CONV_FILTERS],
            seed,
        }
    }

    pub fn new(
        kernels: [[f64; CONV_KERNEL * CONV_KERNEL]; CONV_FILTERS],
        bias: [f64; CONV_FILTERS],
        seed: u64,
    ) -> Self {
        Self {
            kernels,
            bias,
            seed,
        }
    }

    pub fn kernels(&self) -> &[[f64; CONV_KERNEL * CONV_KERNEL]; CONV_FILTERS] {
        &self.kernels
    }

    pub fn bias(&self) -> &[f64; CONV_FILTERS] {
        &self.bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// SHA-256 over the seed and the exact bits of every weight.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"conv");
        h.update(self.seed.to_le_bytes());
        for w in self.kernels.iter().flatten().chain(self.bias.iter()) {
            h.update(w.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn output_shape(&self, image: &Image) -> Result<(usize, usize)> {
        let (h, w) = (image.height(), image.width());
        if h < CONV_KERNEL
            || w < CONV_KERNEL
            || !(h - CONV_KERNEL).is_multiple_of(CONV_STRIDE)
            || !(w - CONV_KERNEL).is_multiple_of(CONV_STRIDE)
        {
            return Err(Error::Shape(format!(
                "{h}x{w} image does not tile with a {CONV_KERNEL}x{CONV_KERNEL} stride-{CONV_STRIDE} kernel"
            )));
        }
        Ok((
            (h - CONV_KERNEL) / CONV_STRIDE + 1,
            (w - CONV_KERNEL) / CONV_STRIDE + 1,
        ))
    }
}

/// `max(0, Σ patch·kernel_f + bias_f)` per output position and filter.
pub fn conv_forward(image: &Image, layer: &ConvLayer) -> Result<FeatureMap> {
    let (rows, cols) = layer.output_shape(image)?;
    let mut out = FeatureMap::zeros(rows, cols, CONV_FILTERS);
    for r in 0..rows {
        for c in 0..cols {
            let (i, j) = (r * CONV_STRIDE, c * CONV_STRIDE);
            for (f, kernel) in layer.kernels.iter().enumerate() {
                let mut acc = layer.bias[f];
                for m in 0..CONV_KERNEL {
                    for n in 0..CONV_KERNEL {
                        acc += image.pixel(i + m, j + n) * kernel[m * CONV_KERNEL + n];
                    }
                }
                out.set(r, c, f, acc.max(0.0));
            }
        }
    }
    Ok(out)
}

/// Backprop through ReLU and the convolution. `activations` is the output of
/// [`conv_forward`]; a positive activation marks a live unit.
pub fn conv_input_gradient(
    layer: &ConvLayer,
    upstream: &FeatureMap,
    activations: &FeatureMap,
) -> Result<Vec<f64>> {
    let (rows, cols, channels) = activations.shape();
    if channels != CONV_FILTERS {
        return Err(Error::Shape(format!(
            "conv activations have {channels} channels, expected {CONV_FILTERS}"
        )));
    }
    upstream.expect_shape(activations.shape(), "conv upstream gradient")?;
    let height = (rows - 1) * CONV_STRIDE + CONV_KERNEL;
    let width = (cols - 1) * CONV_STRIDE + CONV_KERNEL;
    let mut grad = vec![0.0; height * width];
    for r in 0..rows {
        for c in 0..cols {
            for (f, kernel) in layer.kernels.iter().enumerate() {
                if activations.get(r, c, f) <= 0.0 {
                    continue;
                }
                let g = upstream.get(r, c, f);
                for m in 0..CONV_KERNEL {
                    for n in 0..CONV_KERNEL {
                        let at = (r * CONV_STRIDE + m) * width + c * CONV_STRIDE + n;
                        grad[at] += g * kernel[m * CONV_KERNEL + n];
                    }
                }
            }
        }
    }
    Ok(grad)
}

/// Dense softmax head. `weights` is `CLASSES × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    inputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseHead {
    pub fn zeros(inputs: usize) -> Self {
        Self {
            inputs,
            weights: vec![0.0; CLASSES * inputs],
            bias: vec![0.0; CLASSES],
        }
    }

    /// Weights uniform in `[-scale, scale]`, zero bias.
    pub fn random(inputs: usize, scale: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let weights = (0..CLASSES * inputs)
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        Self {
            inputs,
            weights,
            bias: vec![0.0; CLASSES],
        }
    }

    pub fn from_parts(inputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != CLASSES * inputs || bias.len() != CLASSES {
            return Err(Error::Shape(format!(
                "dense head with {inputs} inputs needs {} weights and {CLASSES} biases, got {} and {}",
                CLASSES * inputs,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            inputs,
            weights,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.inputs {
            return Err(Error::Shape(format!(
                "dense head expects {} features, got {}",
                self.inputs,
                features.len()
            )));
        }
        Ok(self
            .weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>())
            .collect())
    }
}

/// Softmax with the max logit subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn dense_forward(features: &FeatureMap, head: &DenseHead) -> Result<Vec<f64>> {
    Ok(softmax(&head.logits(features.as_slice())?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub features: Vec<f64>,
}

/// Cross-entropy `-ln p[label]` and its gradients through the softmax.
pub fn loss_and_grads(
    probs: &[f64],
    label: usize,
    features: &[f64],
    head: &DenseHead,
) -> Result<HeadGradients> {
    if probs.len() != CLASSES || label >= CLASSES {
        return Err(Error::Shape(format!(
            "expected {CLASSES} probabilities and a label below {CLASSES}, got {} and {label}",
            probs.len()
        )));
    }
    if features.len() != head.inputs {
        return Err(Error::Shape(format!(
            "dense head expects {} features, got {}",
            head.inputs,
            features.len()
        )));
    }
    let mut dlogits = probs.to_vec();
    dlogits[label] -= 1.0;

    let mut weights = Vec::with_capacity(head.weights.len());
    for d in &dlogits {
        weights.extend(features.iter().map(|x| d * x));
    }
    let mut dfeatures = vec![0.0; head.inputs];
    for (row, d) in head.weights.chunks_exact(head.inputs).zip(&dlogits) {
        for (slot, w) in dfeatures.iter_mut().zip(row) {
            *slot += d * w;
        }
    }
    Ok(HeadGradients {
        loss: -probs[label].ln(),
        weights,
        bias: dlogits,
        features: dfeatures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m_weights: Vec<f64>,
    v_weights: Vec<f64>,
    m_bias: Vec<f64>,
    v_bias: Vec<f64>,
}

impl AdamState {
    /// Zero moments with the usual constants (0.9, 0.999, 1e-8).
    pub fn new(head: &DenseHead) -> Self {
        Self {
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m_weights: vec![0.0; head.weights.len()],
            v_weights: vec![0.0; head.weights.len()],
            m_bias: vec![0.0; CLASSES],
            v_bias: vec![0.0; CLASSES],
        }
    }

    pub fn moments(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.m_weights, &self.v_weights, &self.m_bias, &self.v_bias)
    }
}

/// One bias-corrected Adam update of the head.
pub fn adam_step(
    head: &mut DenseHead,
    state: &mut AdamState,
    grad_weights: &[f64],
    grad_bias: &[f64],
    lr: f64,
) -> Result<()> {
    if grad_weights.len() != head.weights.len()
        || grad_bias.len() != head.bias.len()
        || state.m_weights.len() != head.weights.len()
    {
        return Err(Error::Shape(
            "Adam gradients or moments do not match the head".to_string(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let update = |params: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    update(
        &mut head.weights,
        &mut state.m_weights,
        &mut state.v_weights,
        grad_weights,
    );
    update(
        &mut head.bias,
        &mut state.m_bias,
        &mut state.v_bias,
        grad_bias,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(f: impl Fn(usize) -> f64) -> Image {
        Image::new(28, 28, (0..784).map(f).collect(), 0).unwrap()
    }

    #[test]
    fn zero_image_zero_bias() {
        let layer = ConvLayer::random(1);
        let f = conv_forward(&image(|_| 0.0), &layer).unwrap();
        assert_eq!(f.shape(), (14, 14, 4));
        assert!(f.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn top_left_selector_kernel() {
        let layer = ConvLayer::new([[1.0, 0.0, 0.0, 0.0]; 4], [0.0; 4], 0);
        let img = image(|i| (i % 13) as f64 / 13.0);
        let f = conv_forward(&img, &layer).unwrap();
        for r in 0..14 {
            for c in 0..14 {
                for k in 0..4 {
                    assert_eq!(f.get(r, c, k), img.pixel(2 * r, 2 * c));
                }
            }
        }
    }

    #[test]
    fn random_kernels_bounded_and_frozen_by_seed() {
        let a = ConvLayer::random(5);
        assert_eq!(a, ConvLayer::random(5));
        assert!(a
            .kernels()
            .iter()
            .flatten()
            .all(|w| (-1.0..=1.0).contains(w)));
        assert_eq!(a.bias(), &[0.0; 4]);
        assert_ne!(a.fingerprint(), ConvLayer::random(6).fingerprint());
    }

    #[test]
    fn conv_gradient_edge_cases() {
        let layer = ConvLayer::random(2);
        let img = image(|i| (i % 5) as f64 / 5.0);
        let acts = conv_forward(&img, &layer).unwrap();
        let g = conv_input_gradient(&layer, &FeatureMap::zeros(14, 14, 4), &acts).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));

        let dead = ConvLayer::new([[-1.0; 4]; 4], [-0.1; 4], 0);
        let acts = conv_forward(&img, &dead).unwrap();
        let ones = FeatureMap::from_vec(14, 14, 4, vec![1.0; 784]).unwrap();
        let g = conv_input_gradient(&dead, &ones, &acts).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));

        assert!(conv_input_gradient(&layer, &FeatureMap::zeros(14, 14, 3), &acts).is_err());
    }

    #[test]
    fn softmax_cases() {
        let head = DenseHead::zeros(784);
        let p = dense_forward(&FeatureMap::zeros(14, 14, 4), &head).unwrap();
        for v in &p {
            assert!((v - 0.1).abs() < 1e-15);
        }
        let mut bias = vec![0.0; 10];
        bias[0] = 800.0;
        let head = DenseHead::from_parts(784, vec![0.0; 7840], bias).unwrap();
        let p = dense_forward(&FeatureMap::zeros(14, 14, 4), &head).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let mut logits = vec![0.0; 10];
        logits[..3].copy_from_slice(&[1.0, 2.0, 3.0]);
        let p = softmax(&logits);
        // e^1 + e^2 + e^3 + 7
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp() + 7.0;
        assert!((p[2] - 3f64.exp() / z).abs() < 1e-15);
        assert!((p[5] - 1.0 / z).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_reference_values() {
        let head = DenseHead::zeros(3);
        let g = loss_and_grads(&[0.1; 10], 4, &[0.0; 3], &head).unwrap();
        assert!((g.loss - 10f64.ln()).abs() < 1e-15);

        let mut certain = vec![0.0; 10];
        certain[7] = 1.0;
        let g = loss_and_grads(&certain, 7, &[0.5, 0.5, 0.5], &head).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.bias.iter().all(|&d| d == 0.0));

        assert!(loss_and_grads(&[0.1; 10], 10, &[0.0; 3], &head).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut head = DenseHead::random(4, 0.05, 3);
        let before = head.clone();
        let mut state = AdamState::new(&head);
        adam_step(&mut head, &mut state, &[0.0; 40], &[0.0; 10], 0.001).unwrap();
        assert_eq!(head, before);
        let (mw, vw, mb, vb) = state.moments();
        assert!(mw.iter().chain(vw).chain(mb).chain(vb).all(|&x| x == 0.0));
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_has_magnitude_lr() {
        for g in [1e-6, 0.3, 250.0, -4.0] {
            let mut head = DenseHead::zeros(1);
            let mut state = AdamState::new(&head);
            let mut gw = vec![0.0; 10];
            gw[0] = g;
            adam_step(&mut head, &mut state, &gw, &[0.0; 10], 0.001).unwrap();
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + 1e-8)
            let expected = -0.001 * g / (g.abs() + 1e-8);
            assert!((head.weights()[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_two_step_hand_trace() {
        let mut head = DenseHead::zeros(1);
        let mut state = AdamState::new(&head);
        let lr = 0.01;
        let (g1, g2) = (0.5, -0.2);
        for g in [g1, g2] {
            let mut gw = vec![0.0; 10];
            gw[0] = g;
            adam_step(&mut head, &mut state, &gw, &[0.0; 10], lr).unwrap();
        }
        // step 1: m=0.05, v=0.00025 -> m̂=0.5, v̂=0.25 -> Δ=-0.01·0.5/(0.5+1e-8)
        let w1 = -lr * 0.5 / (0.5 + 1e-8);
        // step 2: m=0.9·0.05+0.1·(-0.2)=0.025, v=0.999·0.00025+0.001·0.04=0.00028975
        let m_hat = 0.025 / (1.0 - 0.81);
        let v_hat: f64 = 0.00028975 / (1.0 - 0.998001);
        let w2 = w1 - lr * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((head.weights()[0] - w2).abs() < 1e-12);
    }
}
