//! White-box L∞ attacks (FGSM, PGD, MIM) and transfer evaluation.
//!
//! All three share one projection: after each step every pixel is clamped
//! into `[max(x₀ − ε, 0), min(x₀ + ε, 1)]` around the original image `x₀`.
//! PGD starts at `x₀` with no random offset, and `sign(0) = 0`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::model::Differentiable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    Fgsm,
    Pgd,
    Mim,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Fgsm, AttackKind::Pgd, AttackKind::Mim];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Pgd => "pgd",
            AttackKind::Mim => "mim",
        }
    }

    fn tag(self) -> u8 {
        match self {
            AttackKind::Fgsm => 0,
            AttackKind::Pgd => 1,
            AttackKind::Mim => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.tag() == tag)
            .ok_or_else(|| Error::Record(format!("unknown attack tag {tag}")))
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::AttackSpec(format!("unknown attack {s:?}")))
    }
}

pub const DEFAULT_ITERATIONS: u32 = 10;
pub const DEFAULT_MOMENTUM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub epsilon: f64,
    /// Per-iteration step `α` (PGD and MIM).
    pub step_size: f64,
    pub iterations: u32,
    /// Momentum decay `μ` (MIM only).
    pub momentum: f64,
}

impl AttackSpec {
    pub fn fgsm(epsilon: f64) -> Self {
        Self {
            kind: AttackKind::Fgsm,
            epsilon,
            step_size: epsilon,
            iterations: 1,
            momentum: 0.0,
        }
    }

    /// Ten iterations of `α = ε/4`.
    pub fn pgd(epsilon: f64) -> Self {
        Self {
            kind: AttackKind::Pgd,
            epsilon,
            step_size: epsilon / 4.0,
            iterations: DEFAULT_ITERATIONS,
            momentum: 0.0,
        }
    }

    /// PGD defaults with `μ = 1`.
    pub fn mim(epsilon: f64) -> Self {
        Self {
            kind: AttackKind::Mim,
            momentum: DEFAULT_MOMENTUM,
            ..Self::pgd(epsilon)
        }
    }

    pub fn with_defaults(kind: AttackKind, epsilon: f64) -> Self {
        match kind {
            AttackKind::Fgsm => Self::fgsm(epsilon),
            AttackKind::Pgd => Self::pgd(epsilon),
            AttackKind::Mim => Self::mim(epsilon),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::AttackSpec(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.kind != AttackKind::Fgsm {
            if self.iterations < 1 {
                return Err(Error::AttackSpec(
                    "iterative attacks need at least one iteration".to_string(),
                ));
            }
            if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
                return Err(Error::AttackSpec(format!(
                    "step size must be finite and non-negative, got {}",
                    self.step_size
                )));
            }
        }
        if !(self.momentum >= 0.0 && self.momentum.is_finite()) {
            return Err(Error::AttackSpec(format!(
                "momentum must be finite and non-negative, got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    fn expect_kind(&self, kind: AttackKind) -> Result<()> {
        self.validate()?;
        if self.kind != kind {
            return Err(Error::AttackSpec(format!(
                "{} spec passed to {kind}",
                self.kind
            )));
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Proj_ε(x + α·sign(direction))` around `origin`.
fn sign_step(origin: &[f64], current: &[f64], direction: &[f64], alpha: f64, eps: f64) -> Vec<f64> {
    origin
        .iter()
        .zip(current)
        .zip(direction)
        .map(|((&x0, &x), &d)| {
            let lo = (x0 - eps).max(0.0);
            let hi = (x0 + eps).min(1.0);
            (x + alpha * sign(d)).clamp(lo, hi)
        })
        .collect()
}

pub fn fgsm<M: Differentiable + ?Sized>(
    model: &M,
    image: &Image,
    spec: &AttackSpec,
) -> Result<Image> {
    spec.expect_kind(AttackKind::Fgsm)?;
    let (_, grad) = model.loss_and_input_gradient(image)?;
    let x = image.pixels();
    image.with_pixels(sign_step(x, x, &grad, spec.epsilon, spec.epsilon))
}

pub fn pgd<M: Differentiable + ?Sized>(
    model: &M,
    image: &Image,
    spec: &AttackSpec,
) -> Result<Image> {
    spec.expect_kind(AttackKind::Pgd)?;
    let mut current = image.clone();
    for _ in 0..spec.iterations {
        let (_, grad) = model.loss_and_input_gradient(&current)?;
        let next = sign_step(
            image.pixels(),
            current.pixels(),
            &grad,
            spec.step_size,
            spec.epsilon,
        );
        current = image.with_pixels(next)?;
    }
    Ok(current)
}

pub fn mim<M: Differentiable + ?Sized>(
    model: &M,
    image: &Image,
    spec: &AttackSpec,
) -> Result<Image> {
    spec.expect_kind(AttackKind::Mim)?;
    let mut current = image.clone();
    let mut velocity = vec![0.0; image.pixels().len()];
    for _ in 0..spec.iterations {
        let (_, grad) = model.loss_and_input_gradient(&current)?;
        let l1: f64 = grad.iter().map(|g| g.abs()).sum();
        for (v, g) in velocity.iter_mut().zip(&grad) {
            *v *= spec.momentum;
            // a zero gradient contributes nothing this step
            if l1 > 0.0 {
                *v += g / l1;
            }
        }
        let next = sign_step(
            image.pixels(),
            current.pixels(),
            &velocity,
            spec.step_size,
            spec.epsilon,
        );
        current = image.with_pixels(next)?;
    }
    Ok(current)
}

pub fn generate<M: Differentiable + ?Sized>(
    model: &M,
    image: &Image,
    spec: &AttackSpec,
) -> Result<Image> {
    match spec.kind {
        AttackKind::Fgsm => fgsm(model, image, spec),
        AttackKind::Pgd => pgd(model, image, spec),
        AttackKind::Mim => mim(model, image, spec),
    }
}

/// Fraction of `images` whose label `model` predicts.
pub fn accuracy<M: Differentiable + ?Sized>(model: &M, images: &[Image]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::EmptyImageSet);
    }
    let hits = images
        .par_iter()
        .map(|img| Ok(model.predict(img)? == img.label() as usize))
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / images.len() as f64)
}

/// Per-ε accuracy of one model under one attack kind.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCurve {
    pub model: String,
    pub fingerprint: String,
    pub attack: AttackKind,
    pub points: Vec<(f64, f64)>,
}

impl RobustnessCurve {
    pub fn accuracy_at(&self, epsilon: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|(e, _)| (e - epsilon).abs() < 1e-12)
            .map(|&(_, a)| a)
    }

    /// Strictly increasing epsilons starting at 0, accuracies in `[0, 1]`.
    pub fn check_invariants(&self) -> Result<()> {
        match self.points.first() {
            Some(&(0.0, _)) => {}
            _ => {
                return Err(Error::Record(format!(
                    "curve {}/{} does not start at epsilon 0",
                    self.model, self.attack
                )))
            }
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Record(
                "epsilons not strictly increasing".to_string(),
            ));
        }
        if self.points.iter().any(|&(_, a)| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Record("accuracy outside [0, 1]".to_string()));
        }
        Ok(())
    }
}

/// White-box accuracy of `model` at every spec of `grid`, which must share
/// one attack kind.
pub fn evaluate_robustness<M: Differentiable + ?Sized>(
    model: &M,
    model_name: &str,
    fingerprint: &str,
    images: &[Image],
    grid: &[AttackSpec],
) -> Result<RobustnessCurve> {
    if images.is_empty() {
        return Err(Error::EmptyImageSet);
    }
    let kind = grid
        .first()
        .ok_or_else(|| Error::AttackSpec("empty epsilon grid".to_string()))?
        .kind;
    if grid.iter().any(|s| s.kind != kind) {
        return Err(Error::AttackSpec(
            "a robustness curve needs a single attack kind".to_string(),
        ));
    }
    let mut points = Vec::with_capacity(grid.len());
    for spec in grid {
        let hits = images
            .par_iter()
            .map(|img| {
                let adv = generate(model, img, spec)?;
                Ok(model.predict(&adv)? == img.label() as usize)
            })
            .collect::<Result<Vec<bool>>>()?;
        let acc = hits.iter().filter(|&&h| h).count() as f64 / images.len() as f64;
        points.push((spec.epsilon, acc));
    }
    Ok(RobustnessCurve {
        model: model_name.to_string(),
        fingerprint: fingerprint.to_string(),
        attack: kind,
        points,
    })
}

/// Adversarial examples crafted on one model, kept for evaluation on others.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialBatch {
    pub originals: Vec<Image>,
    pub adversarials: Vec<Image>,
    pub source_fingerprint: [u8; 32],
    pub spec: AttackSpec,
}

const BATCH_MAGIC: &[u8; 8] = b"QRBADV01";

impl AdversarialBatch {
    pub fn generate<M: Differentiable + ?Sized>(
        source: &M,
        source_fingerprint: [u8; 32],
        images: &[Image],
        spec: &AttackSpec,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyImageSet);
        }
        let adversarials = images
            .par_iter()
            .map(|img| generate(source, img, spec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            originals: images.to_vec(),
            adversarials,
            source_fingerprint,
            spec: *spec,
        })
    }

    pub fn accuracy_on<M: Differentiable + ?Sized>(&self, target: &M) -> Result<f64> {
        accuracy(target, &self.adversarials)
    }

    /// Layout: magic `QRBADV01`; attack tag `u8`; `ε`, `α` as `f64`;
    /// iterations `u32`; `μ` as `f64`; 32-byte source fingerprint; count,
    /// height, width as `u32`; then per example its label byte followed by
    /// the original and the adversarial pixels as `f64`. Little-endian.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let (h, w) = self
            .originals
            .first()
            .map(|i| (i.height(), i.width()))
            .unwrap_or((0, 0));
        out.write_all(BATCH_MAGIC)?;
        out.write_all(&[self.spec.kind.tag()])?;
        out.write_all(&self.spec.epsilon.to_le_bytes())?;
        out.write_all(&self.spec.step_size.to_le_bytes())?;
        out.write_all(&self.spec.iterations.to_le_bytes())?;
        out.write_all(&self.spec.momentum.to_le_bytes())?;
        out.write_all(&self.source_fingerprint)?;
        for v in [self.originals.len(), h, w] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        for (orig, adv) in self.originals.iter().zip(&self.adversarials) {
            out.write_all(&[orig.label()])?;
            for p in orig.pixels().iter().chain(adv.pixels()) {
                out.write_all(&p.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(8, "batch magic")? != BATCH_MAGIC {
            return Err(Error::Record("not an adversarial batch".to_string()));
        }
        let kind = AttackKind::from_tag(cur.take(1, "attack tag")?[0])?;
        let epsilon = cur.f64("epsilon")?;
        let step_size = cur.f64("step size")?;
        let iterations = cur.u32("iterations")?;
        let momentum = cur.f64("momentum")?;
        let source_fingerprint: [u8; 32] = cur
            .take(32, "source fingerprint")?
            .try_into()
            .expect("32 bytes");
        let count = cur.u32("count")? as usize;
        let h = cur.u32("height")? as usize;
        let w = cur.u32("width")? as usize;
        let mut originals = Vec::with_capacity(count);
        let mut adversarials = Vec::with_capacity(count);
        for _ in 0..count {
            let label = cur.take(1, "label")?[0];
            let mut pixels =
                |what| -> Result<Vec<f64>> { (0..h * w).map(|_| cur.f64(what)).collect() };
            let orig = pixels("original pixels")?;
            let adv = pixels("adversarial pixels")?;
            originals.push(Image::new(h, w, orig, label)?);
            adversarials.push(Image::new(h, w, adv, label)?);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Record("trailing bytes after batch".to_string()));
        }
        Ok(Self {
            originals,
            adversarials,
            source_fingerprint,
            spec: AttackSpec {
                kind,
                epsilon,
                step_size,
                iterations,
                momentum,
            },
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let rest = self.bytes.len() - self.pos;
        if rest < n {
            return Err(Error::Truncated {
                what,
                expected: n,
                found: rest,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn f64(&mut self, what: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

/// Accuracy of `target` on examples crafted against `source`.
pub fn transfer_attack<S, T>(
    source: &S,
    target: &T,
    images: &[Image],
    spec: &AttackSpec,
) -> Result<f64>
where
    S: Differentiable + ?Sized,
    T: Differentiable + ?Sized,
{
    AdversarialBatch::generate(source, [0; 32], images, spec)?.accuracy_on(target)
}
