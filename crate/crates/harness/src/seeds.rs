//! Every random stream of a run, derived from the master seed by label.

use qrobust_core::seed::derive_seed;
use qrobust_core::AnsatzKind;

pub fn ansatz(master: u64, kind: AnsatzKind) -> u64 {
    derive_seed(master, &format!("ansatz/{kind}"))
}

pub fn conv(master: u64) -> u64 {
    derive_seed(master, "conv")
}

pub fn head(master: u64, model: &str) -> u64 {
    derive_seed(master, &format!("head/{model}"))
}

pub fn shuffle(master: u64, model: &str) -> u64 {
    derive_seed(master, &format!("shuffle/{model}"))
}

pub fn train_subset(master: u64) -> u64 {
    derive_seed(master, "subset/train")
}

pub fn test_subset(master: u64) -> u64 {
    derive_seed(master, "subset/test")
}

pub fn metrics(master: u64, kind: AnsatzKind) -> u64 {
    derive_seed(master, &format!("metrics/{kind}"))
}

/// `(label, seed)` for every stream a run with these ansatz kinds uses.
pub fn all(master: u64, kinds: &[AnsatzKind]) -> Vec<(String, u64)> {
    let mut out = vec![
        ("subset/train".to_string(), train_subset(master)),
        ("subset/test".to_string(), test_subset(master)),
        ("conv".to_string(), conv(master)),
    ];
    for &k in kinds {
        out.push((format!("ansatz/{k}"), ansatz(master, k)));
    }
    let models =
        std::iter::once("cnn".to_string()).chain(kinds.iter().map(|k| format!("qunn_{k}")));
    for m in models {
        out.push((format!("head/{m}"), head(master, &m)));
        out.push((format!("shuffle/{m}"), shuffle(master, &m)));
    }
    for &k in kinds {
        out.push((format!("metrics/{k}"), metrics(master, k)));
    }
    out
}
