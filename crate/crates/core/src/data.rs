//! MNIST in IDX format.
//!
//! IDX files start with a big-endian magic (`0x00000803` for images,
//! `0x00000801` for labels), then one big-endian `u32` per dimension, then
//! raw unsigned bytes. Pixels are divided by 255.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::seed::rng_from_seed;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Conventional file-name prefix (`train` / `t10k`).
    pub fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<Image>,
    pub split: Split,
    /// SHA-256 over the image file bytes followed by the label file bytes.
    pub checksum: [u8; 32],
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn checksum_hex(&self) -> String {
        hex::encode(self.checksum)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or(Error::Truncated {
            what,
            expected: at + 4,
            found: bytes.len(),
        })
}

/// `(rows, cols, raw pixel bytes per image)` of an IDX image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<&[u8]>)> {
    let magic = be_u32(bytes, 0, "image header")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, "image header")? as usize;
    let rows = be_u32(bytes, 8, "image header")? as usize;
    let cols = be_u32(bytes, 12, "image header")? as usize;
    let size = rows * cols;
    let expected = 16 + count * size;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            what: "image data",
            expected,
            found: bytes.len(),
        });
    }
    let images = if size == 0 {
        vec![&bytes[16..16]; count]
    } else {
        bytes[16..expected].chunks_exact(size).collect()
    };
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0, "label header")?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, "label header")? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            what: "label data",
            expected,
            found: bytes.len(),
        });
    }
    let labels = &bytes[8..expected];
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::LabelRange(bad));
    }
    Ok(labels)
}

pub fn dataset_from_bytes(image_bytes: &[u8], label_bytes: &[u8], split: Split) -> Result<Dataset> {
    let (rows, cols, raw) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if raw.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: raw.len(),
            labels: labels.len(),
        });
    }
    let images = raw
        .into_iter()
        .zip(labels)
        .map(|(px, &label)| {
            let pixels = px.iter().map(|&b| b as f64 / 255.0).collect();
            Image::new(rows, cols, pixels, label)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hasher = Sha256::new();
    hasher.update(image_bytes);
    hasher.update(label_bytes);
    Ok(Dataset {
        images,
        split,
        checksum: hasher.finalize().into(),
    })
}

pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;
    dataset_from_bytes(&image_bytes, &label_bytes, split)
}

/// Loads `<prefix>-images-idx3-ubyte` and `<prefix>-labels-idx1-ubyte`
/// from `dir`.
pub fn load_split(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = split.prefix();
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        split,
    )
}

/// Encodes images and labels as a pair of IDX files. Pixels are rounded to
/// the nearest byte.
pub fn encode_idx(images: &[Image]) -> (Vec<u8>, Vec<u8>) {
    let (rows, cols) = images
        .first()
        .map(|i| (i.height(), i.width()))
        .unwrap_or((28, 28));
    let mut img = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    for image in images {
        img.extend(image.pixels().iter().map(|p| (p * 255.0).round() as u8));
    }
    let mut lab = Vec::with_capacity(8 + images.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(images.len() as u32).to_be_bytes());
    lab.extend(images.iter().map(|i| i.label()));
    (img, lab)
}

/// Deterministic selection of `count` indices.
///
/// Plain mode shuffles all indices with the seeded generator and keeps the
/// first `count`, in shuffled order. Stratified mode gives every class
/// `count / 10` images, the first `count % 10` classes one more, each class
/// sampled by its own shuffle; the result is ordered by original index.
pub fn subset_indices(
    dataset: &Dataset,
    count: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<usize>> {
    let available = dataset.len();
    if count > available {
        return Err(Error::SubsetTooLarge {
            requested: count,
            available,
        });
    }
    let mut rng = rng_from_seed(seed);
    if count == available {
        return Ok((0..available).collect());
    }
    if !stratified {
        let mut idx: Vec<usize> = (0..available).collect();
        idx.shuffle(&mut rng);
        idx.truncate(count);
        return Ok(idx);
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 10];
    for (i, img) in dataset.images.iter().enumerate() {
        by_class[img.label() as usize].push(i);
    }
    let mut chosen = Vec::with_capacity(count);
    for (class, members) in by_class.iter_mut().enumerate() {
        let want = count / 10 + usize::from(class < count % 10);
        if members.len() < want {
            return Err(Error::SubsetTooLarge {
                requested: want,
                available: members.len(),
            });
        }
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..want]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

pub fn subset(dataset: &Dataset, count: usize, seed: u64, stratified: bool) -> Result<Dataset> {
    let idx = subset_indices(dataset, count, seed, stratified)?;
    Ok(Dataset {
        images: idx.iter().map(|&i| dataset.images[i].clone()).collect(),
        split: dataset.split,
        checksum: dataset.checksum,
    })
}
