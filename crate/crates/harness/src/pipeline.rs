//! The experiment stages. Each stage reads what earlier stages persisted
//! under the output directory, so stages can run in separate invocations.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use qrobust_core::attacks::{self, AdversarialBatch, AttackSpec, RobustnessCurve};
use qrobust_core::classical::ConvLayer;
use qrobust_core::data::{self, Dataset, Split};
use qrobust_core::metrics::MetricReport;
use qrobust_core::{Ansatz, Extractor, Model};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{self, Layout, TransferRow};
use crate::seeds;
use crate::train::{self, EpochStats};

/// Qubits per filter: one per pixel of a 2×2 patch.
pub const N_QUBITS: usize = 4;

/// `QROBUST_DATA_DIR`, or the bundled `data/mnist` of this repository.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("QROBUST_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub layout: Layout,
    pub train: Dataset,
    pub test: Dataset,
    /// Image counts of the full splits the subsets were drawn from.
    pub source_sizes: (usize, usize),
}

impl Experiment {
    pub fn load(config: ExperimentConfig, data_dir: &Path) -> Result<Self> {
        let full_train = data::load_split(data_dir, Split::Train).map_err(HarnessError::Data)?;
        let full_test = data::load_split(data_dir, Split::Test).map_err(HarnessError::Data)?;
        let train = data::subset(
            &full_train,
            config.train_count,
            seeds::train_subset(config.seed),
            config.stratified,
        )
        .map_err(HarnessError::Data)?;
        let test = data::subset(
            &full_test,
            config.test_count,
            seeds::test_subset(config.seed),
            config.stratified,
        )
        .map_err(HarnessError::Data)?;
        info!(
            "data: {} of {} training and {} of {} test images",
            train.len(),
            full_train.len(),
            test.len(),
            full_test.len()
        );
        Ok(Self {
            layout: Layout::new(&config.out_dir),
            source_sizes: (full_train.len(), full_test.len()),
            config,
            train,
            test,
        })
    }

    /// The CNN first, then one QuNN per configured ansatz kind.
    pub fn extractors(&self) -> Result<Vec<Extractor>> {
        let mut out = vec![Extractor::Classical(ConvLayer::random(seeds::conv(
            self.config.seed,
        )))];
        for &kind in &self.config.ansatz_kinds {
            out.push(Extractor::Quantum(Ansatz::build(
                kind,
                N_QUBITS,
                seeds::ansatz(self.config.seed, kind),
            )?));
        }
        Ok(out)
    }

    fn write_config(&self) -> Result<()> {
        report::write_file(&self.layout.config(), self.config.to_text().as_bytes())
    }

    /// Trains every head and writes checkpoints and per-epoch logs.
    pub fn train_all(&self) -> Result<Vec<(Model, Vec<EpochStats>)>> {
        self.write_config()?;
        let mut out = Vec::new();
        for extractor in self.extractors()? {
            let name = extractor.name();
            let features = train::cached_features(
                &extractor,
                &self.train.images,
                &self.layout.feature_cache(&name),
            )?;
            let (model, log) =
                train::train_model(&extractor, &features, &self.train.images, &self.config)?;
            let path = self.layout.checkpoint(&name);
            report::ensure_parent(&path)?;
            let file = File::create(&path)
                .map_err(|e| HarnessError::io(format!("create {}", path.display()), e))?;
            model.write_checkpoint(&mut BufWriter::new(file))?;
            report::write_train_log(&self.layout.train_log(&name), &log)?;
            out.push((model, log));
        }
        Ok(out)
    }

    /// Restores every trained model from its checkpoint.
    pub fn load_models(&self) -> Result<Vec<Model>> {
        self.extractors()?
            .into_iter()
            .map(|extractor| {
                let path = self.layout.checkpoint(&extractor.name());
                let file = File::open(&path).map_err(|_| HarnessError::Missing {
                    what: "checkpoint",
                    path: path.clone(),
                    stage: "train",
                })?;
                Ok(Model::read_checkpoint(
                    &mut std::io::BufReader::new(file),
                    extractor,
                )?)
            })
            .collect()
    }

    pub fn attack_stage(&self) -> Result<Vec<RobustnessCurve>> {
        self.write_config()?;
        let models = self.load_models()?;
        let curves = run_whitebox_suite(&models, &self.test, &self.config)?;
        for c in &curves {
            report::write_curve(&self.layout.curve(&c.model, c.attack), c)?;
        }
        Ok(curves)
    }

    pub fn transfer_stage(&self) -> Result<Vec<TransferRow>> {
        self.write_config()?;
        let models = self.load_models()?;
        let rows = run_transfer_suite(&models, &self.test, &self.config, Some(&self.layout))?;
        report::write_transfer(&self.layout.transfer(), &rows)?;
        Ok(rows)
    }

    pub fn metrics_stage(&self) -> Result<Vec<MetricReport>> {
        self.write_config()?;
        let reports = run_metrics(&self.config)?;
        report::write_metrics(&self.layout.metrics(), &reports)?;
        Ok(reports)
    }

    /// Every output file the other stages produce, relative to the root.
    pub fn expected_outputs(&self) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for e in self.extractors()? {
            let name = e.name();
            files.push(self.layout.checkpoint(&name));
            files.push(self.layout.train_log(&name));
            for &a in &self.config.attacks {
                files.push(self.layout.curve(&name, a));
            }
        }
        files.push(self.layout.transfer());
        files.push(self.layout.metrics());
        Ok(files)
    }

    /// Writes the manifest: software version, resolved config, data
    /// checksums and subset sizes, every seed, extractor fingerprints and the
    /// SHA-256 of every result file.
    pub fn report_stage(&self) -> Result<PathBuf> {
        self.write_config()?;
        let mut m = String::new();
        let _ = writeln!(m, "software = qrobust {}", env!("CARGO_PKG_VERSION"));
        m.push_str("\n[config]\n");
        m.push_str(&self.config.to_text());
        m.push_str("\n[data]\n");
        for (label, set, full) in [
            ("train", &self.train, self.source_sizes.0),
            ("test", &self.test, self.source_sizes.1),
        ] {
            let _ = writeln!(m, "{label}.source_sha256 = {}", set.checksum_hex());
            let _ = writeln!(m, "{label}.source_images = {full}");
            let _ = writeln!(m, "{label}.subset_images = {}", set.len());
        }
        m.push_str("\n[seeds]\n");
        let _ = writeln!(m, "master = {}", self.config.seed);
        for (label, seed) in seeds::all(self.config.seed, &self.config.ansatz_kinds) {
            let _ = writeln!(m, "{label} = {seed}");
        }
        m.push_str("\n[extractors]\n");
        for e in self.extractors()? {
            let _ = writeln!(m, "{} = {}", e.name(), e.fingerprint());
        }
        m.push_str("\n[outputs]\n");
        for path in self.expected_outputs()? {
            if !path.exists() {
                return Err(HarnessError::Missing {
                    what: "result file",
                    stage: stage_for(&path),
                    path,
                });
            }
            let rel = path.strip_prefix(&self.layout.root).unwrap_or(&path);
            let _ = writeln!(m, "{} = {}", rel.display(), report::sha256_file(&path)?);
        }
        let path = self.layout.manifest();
        report::write_file(&path, m.as_bytes())?;
        Ok(path)
    }

    /// train → whitebox → transfer → metrics → report.
    pub fn run_all(&self) -> Result<PathBuf> {
        self.train_all()?;
        self.attack_stage()?;
        self.transfer_stage()?;
        self.metrics_stage()?;
        self.report_stage()
    }
}

fn stage_for(path: &Path) -> &'static str {
    let s = path.to_string_lossy();
    if s.contains("whitebox") {
        "attack"
    } else if s.ends_with("transfer.csv") {
        "transfer"
    } else if s.ends_with("metrics.csv") {
        "metrics"
    } else {
        "train"
    }
}

/// One curve per model and configured attack, over the test subset.
pub fn run_whitebox_suite(
    models: &[Model],
    test: &Dataset,
    config: &ExperimentConfig,
) -> Result<Vec<RobustnessCurve>> {
    let mut curves = Vec::new();
    for model in models {
        for &kind in &config.attacks {
            let grid: Vec<AttackSpec> = config
                .eps_grid
                .iter()
                .map(|&e| AttackSpec::with_defaults(kind, e))
                .collect();
            let curve = attacks::evaluate_robustness(
                model,
                &model.name(),
                &model.extractor.fingerprint(),
                &test.images,
                &grid,
            )?;
            curve.check_invariants()?;
            info!("{} {kind}: {:?}", curve.model, curve.points);
            curves.push(curve);
        }
    }
    Ok(curves)
}

/// FGSM transfer in both directions: CNN-crafted examples on every QuNN and
/// every QuNN's examples on the CNN. `models[0]` must be the CNN. Rows are
/// ordered by source, target, then epsilon. With a layout, each crafted
/// batch is also written to disk.
pub fn run_transfer_suite(
    models: &[Model],
    test: &Dataset,
    config: &ExperimentConfig,
    layout: Option<&Layout>,
) -> Result<Vec<TransferRow>> {
    let (cnn, qunns) = models
        .split_first()
        .filter(|(c, _)| matches!(c.extractor, Extractor::Classical(_)))
        .ok_or_else(|| HarnessError::Runtime("transfer suite needs the CNN first".to_string()))?;
    let mut pairs: Vec<(&Model, Vec<&Model>)> = vec![(cnn, qunns.iter().collect())];
    pairs.extend(qunns.iter().map(|q| (q, vec![cnn])));
    let mut rows = Vec::new();
    for (source, targets) in pairs {
        if targets.is_empty() {
            continue;
        }
        let mut per_eps = Vec::with_capacity(config.eps_grid.len());
        for (i, &eps) in config.eps_grid.iter().enumerate() {
            let batch = AdversarialBatch::generate(
                source,
                source.extractor.fingerprint_bytes(),
                &test.images,
                &AttackSpec::fgsm(eps),
            )?;
            if let Some(layout) = layout {
                let path = layout.batch(&source.name(), i);
                report::ensure_parent(&path)?;
                let file = File::create(&path)
                    .map_err(|e| HarnessError::io(format!("create {}", path.display()), e))?;
                batch.write_to(&mut BufWriter::new(file))?;
            }
            let accs = targets
                .par_iter()
                .map(|t| batch.accuracy_on(*t))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            per_eps.push((eps, accs));
        }
        for (t, target) in targets.iter().enumerate() {
            for (eps, accs) in &per_eps {
                rows.push(TransferRow {
                    source: source.name(),
                    target: target.name(),
                    epsilon: *eps,
                    accuracy: accs[t],
                });
            }
        }
    }
    Ok(rows)
}

/// Entanglement and expressibility of each configured ansatz instance.
pub fn run_metrics(config: &ExperimentConfig) -> Result<Vec<MetricReport>> {
    config
        .ansatz_kinds
        .par_iter()
        .map(|&kind| {
            let ansatz = Ansatz::build(kind, N_QUBITS, seeds::ansatz(config.seed, kind))?;
            Ok(MetricReport::compute(
                &ansatz,
                config.metric_samples,
                config.metric_bins,
                seeds::metrics(config.seed, kind),
            )?)
        })
        .collect()
}
