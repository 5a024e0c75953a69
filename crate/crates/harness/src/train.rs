//! Head training on cached features of a frozen extractor.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::{debug, info};
use qrobust_core::classical::{self, AdamState, DenseHead};
use qrobust_core::quanv::FeatureRecord;
use qrobust_core::seed::rng_from_seed;
use qrobust_core::{Extractor, Image, Model};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::seeds;

/// Scale of the uniform head initialization.
pub const HEAD_INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

pub fn compute_features(extractor: &Extractor, images: &[Image]) -> Result<Vec<Vec<f64>>> {
    Ok(images
        .par_iter()
        .map(|img| Ok(extractor.features(img)?.into_vec()))
        .collect::<std::result::Result<Vec<_>, qrobust_core::Error>>()?)
}

/// Per-image key: SHA-256 over the extractor fingerprint and the pixel bits.
fn record_key(extractor_fp: &[u8; 32], image: &Image) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(extractor_fp);
    h.update([image.label()]);
    for p in image.pixels() {
        h.update(p.to_le_bytes());
    }
    h.finalize().into()
}

/// Features of `images`, read from `cache` when every record matches this
/// extractor and image, recomputed and rewritten otherwise.
pub fn cached_features(
    extractor: &Extractor,
    images: &[Image],
    cache: &Path,
) -> Result<Vec<Vec<f64>>> {
    let fp = extractor.fingerprint_bytes();
    let keys: Vec<[u8; 32]> = images.iter().map(|img| record_key(&fp, img)).collect();
    let len = images
        .first()
        .map_or(0, |i| (i.height() / 2) * (i.width() / 2) * 4);
    if let Some(hit) = read_cache(cache, &keys, len) {
        debug!("{}: {} cached feature maps", extractor.name(), hit.len());
        return Ok(hit);
    }
    let features = compute_features(extractor, images)?;
    if let Some(dir) = cache.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    }
    let file = File::create(cache).map_err(|e| HarnessError::io(cache.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    for (i, (key, f)) in keys.iter().zip(&features).enumerate() {
        FeatureRecord {
            index: i as u64,
            fingerprint: *key,
            features: f.clone(),
        }
        .write_to(&mut out)?;
    }
    out.flush()
        .map_err(|e| HarnessError::io(cache.display().to_string(), e))?;
    Ok(features)
}

fn read_cache(path: &Path, keys: &[[u8; 32]], len: usize) -> Option<Vec<Vec<f64>>> {
    let mut input = BufReader::new(File::open(path).ok()?);
    let mut out = Vec::with_capacity(keys.len());
    for (i, key) in keys.iter().enumerate() {
        let rec = FeatureRecord::read_from(&mut input, len).ok()??;
        if rec.index != i as u64 || &rec.fingerprint != key {
            return None;
        }
        out.push(rec.features);
    }
    // trailing records mean a different image set
    match FeatureRecord::read_from(&mut input, len) {
        Ok(None) => Some(out),
        _ => None,
    }
}

/// Mean loss and accuracy of `head` over precomputed features.
pub fn evaluate_head(
    head: &DenseHead,
    features: &[Vec<f64>],
    images: &[Image],
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut hits = 0usize;
    for (f, img) in features.iter().zip(images) {
        let probs = classical::softmax(&head.logits(f)?);
        loss -= probs[img.label() as usize].ln();
        let best = probs
            .iter()
            .enumerate()
            .fold(0, |b, (i, p)| if *p > probs[b] { i } else { b });
        hits += usize::from(best == img.label() as usize);
    }
    Ok((
        loss / images.len() as f64,
        hits as f64 / images.len() as f64,
    ))
}

/// Trains a fresh head on top of `extractor`.
///
/// Features come from `features` (computed once, the extractor is frozen).
/// Each epoch shuffles the example order with the model's shuffle stream and
/// takes one Adam step per minibatch on the mean gradient. Returns the model
/// and the loss/accuracy over the whole training set after every epoch.
pub fn train_model(
    extractor: &Extractor,
    features: &[Vec<f64>],
    images: &[Image],
    config: &ExperimentConfig,
) -> Result<(Model, Vec<EpochStats>)> {
    if features.len() != images.len() || images.is_empty() {
        return Err(HarnessError::Runtime(format!(
            "{} features for {} training images",
            features.len(),
            images.len()
        )));
    }
    let name = extractor.name();
    let before = extractor.fingerprint();
    let inputs = features[0].len();
    let mut head = DenseHead::random(inputs, HEAD_INIT_SCALE, seeds::head(config.seed, &name));
    let mut adam = AdamState::new(&head);
    let mut rng = rng_from_seed(seeds::shuffle(config.seed, &name));
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut gw = vec![0.0; head.weights().len()];
            let mut gb = vec![0.0; head.bias().len()];
            for &i in batch {
                let probs = classical::softmax(&head.logits(&features[i])?);
                let g = classical::loss_and_grads(
                    &probs,
                    images[i].label() as usize,
                    &features[i],
                    &head,
                )?;
                if !g.loss.is_finite() {
                    return Err(HarnessError::Runtime(format!(
                        "{name}: non-finite loss at epoch {epoch} on training image {i}"
                    )));
                }
                for (a, b) in gw.iter_mut().zip(&g.weights) {
                    *a += b;
                }
                for (a, b) in gb.iter_mut().zip(&g.bias) {
                    *a += b;
                }
            }
            let n = batch.len() as f64;
            gw.iter_mut().chain(gb.iter_mut()).for_each(|g| *g /= n);
            classical::adam_step(&mut head, &mut adam, &gw, &gb, config.learning_rate)?;
        }
        let (loss, accuracy) = evaluate_head(&head, features, images)?;
        if !loss.is_finite() {
            return Err(HarnessError::Runtime(format!(
                "{name}: non-finite loss after epoch {epoch}"
            )));
        }
        info!("{name} epoch {epoch}: loss {loss:.6} train accuracy {accuracy:.4}");
        log.push(EpochStats {
            epoch,
            loss,
            accuracy,
        });
    }
    if extractor.fingerprint() != before {
        return Err(HarnessError::Runtime(format!(
            "{name}: extractor changed during training"
        )));
    }
    Ok((Model::new(extractor.clone(), head), log))
}
