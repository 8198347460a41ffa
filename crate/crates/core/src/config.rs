//! TOML experiment specification.
//!
//! ```toml
//! kind = "sweep-unlabeled"
//! seeds = [0, 1, 2, 3, 4]
//! methods = ["supervised", "pi-model", "vat"]
//! output_dir = "out/unlabeled"
//!
//! [dataset]
//! kind = "two-moons"
//! n = 1000
//!
//! [train]
//! total_steps = 2000
//!
//! [overrides.vat]
//! vat_epsilon = 0.5
//!
//! [sweep]
//! values = [0, 50, 100, 200, 400]
//! ```
//!
//! Sections that are left out are filled with defaults that depend on `kind`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::{DatasetSpec, SplitSizes};
use crate::error::{Error, Result};
use crate::harness::{TuneSpec, MISMATCH_LABELED_CLASSES, MISMATCH_UNLABELED_CLASSES};
use crate::losses::{Method, MethodConfig};
use crate::report::Extent;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Train,
    SweepLabeled,
    SweepUnlabeled,
    SweepMismatch,
    ValsizeStudy,
    Hoeffding,
    Boundary,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Train,
        ExperimentKind::SweepLabeled,
        ExperimentKind::SweepUnlabeled,
        ExperimentKind::SweepMismatch,
        ExperimentKind::ValsizeStudy,
        ExperimentKind::Hoeffding,
        ExperimentKind::Boundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::SweepLabeled => "sweep-labeled",
            ExperimentKind::SweepUnlabeled => "sweep-unlabeled",
            ExperimentKind::SweepMismatch => "sweep-mismatch",
            ExperimentKind::ValsizeStudy => "valsize-study",
            ExperimentKind::Hoeffding => "hoeffding",
            ExperimentKind::Boundary => "boundary",
        }
    }

    fn default_dataset(self) -> DatasetSpec {
        match self {
            ExperimentKind::SweepMismatch => DatasetSpec::GaussianClusters {
                classes: MISMATCH_LABELED_CLASSES + MISMATCH_UNLABELED_CLASSES,
                per_class: 200,
                radius: 3.0,
                cluster_std: 0.5,
                seed: 0,
            },
            ExperimentKind::ValsizeStudy => DatasetSpec::TwoMoons { n: 4000, noise: 0.1, seed: 0 },
            _ => DatasetSpec::default(),
        }
    }

    fn default_split(self) -> SplitSizes {
        match self {
            ExperimentKind::SweepMismatch => SplitSizes { labeled: 60, unlabeled: 400, validation: 100, test: 300 },
            ExperimentKind::ValsizeStudy => SplitSizes { labeled: 50, unlabeled: 1000, validation: 2500, test: 450 },
            _ => SplitSizes::default(),
        }
    }

    fn default_sweep_values(self) -> Vec<f64> {
        match self {
            ExperimentKind::SweepLabeled => vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            ExperimentKind::SweepUnlabeled => vec![0.0, 50.0, 100.0, 200.0, 400.0],
            ExperimentKind::SweepMismatch => vec![0.0, 0.25, 0.5, 0.75, 1.0],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Per-method hyperparameter overrides on top of [`MethodConfig::defaults`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_consistency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vat_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vat_xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ema_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_multiplier: Option<f64>,
}

impl MethodOverride {
    pub fn apply(&self, mut m: MethodConfig) -> MethodConfig {
        if let Some(v) = self.max_consistency {
            m.max_consistency = v;
        }
        if let Some(v) = self.ramp_length {
            m.ramp_length = v;
        }
        if let Some(v) = self.vat_epsilon {
            m.vat_epsilon = v;
        }
        if let Some(v) = self.vat_xi {
            m.vat_xi = v;
        }
        if let Some(v) = self.ema_decay {
            m.ema_decay = v;
        }
        if let Some(v) = self.pseudo_threshold {
            m.pseudo_threshold = v;
        }
        if let Some(v) = self.entropy_multiplier {
            m.entropy_multiplier = v;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Labeled counts, unlabeled counts or overlap fractions, by kind.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValsizeSection {
    /// Subset sizes as fractions of the labeled-set size.
    pub fractions: Vec<f64>,
    pub k: usize,
    /// Report errors relative to this method; absolute when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_to: Option<String>,
}

impl Default for ValsizeSection {
    fn default() -> Self {
        ValsizeSection { fractions: vec![0.1, 0.2, 0.5, 1.0], k: 10, relative_to: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoeffdingSection {
    pub confidence: f64,
    pub p: f64,
}

impl Default for HoeffdingSection {
    fn default() -> Self {
        HoeffdingSection { confidence: 0.95, p: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub extent: Extent,
    pub resolution: usize,
}

impl Default for BoundarySection {
    fn default() -> Self {
        BoundarySection { extent: Extent::default(), resolution: 100 }
    }
}

/// A complete experiment description. Together with the seeds it determines
/// every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub split: Option<SplitSizes>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<Method, MethodOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneSpec>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub valsize: ValsizeSection,
    #[serde(default)]
    pub hoeffding: HoeffdingSection,
    #[serde(default)]
    pub boundary: BoundarySection,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_methods() -> Vec<Method> {
    vec![Method::Supervised]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentSpec {
    /// Spec of `kind` with every default filled in.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut spec = ExperimentSpec {
            kind,
            seeds: default_seeds(),
            methods: default_methods(),
            output_dir: default_output_dir(),
            dataset: None,
            split: None,
            train: TrainConfig::default(),
            overrides: BTreeMap::new(),
            tune: None,
            sweep: SweepSection::default(),
            valsize: ValsizeSection::default(),
            hoeffding: HoeffdingSection::default(),
            boundary: BoundarySection::default(),
        };
        spec.fill_defaults();
        spec
    }

    fn fill_defaults(&mut self) {
        if self.dataset.is_none() {
            self.dataset = Some(self.kind.default_dataset());
        }
        if self.split.is_none() {
            self.split = Some(self.kind.default_split());
        }
        if self.sweep.values.is_empty() {
            self.sweep.values = self.kind.default_sweep_values();
        }
    }

    pub fn dataset(&self) -> DatasetSpec {
        self.dataset.clone().unwrap_or_else(|| self.kind.default_dataset())
    }

    pub fn split(&self) -> SplitSizes {
        self.split.unwrap_or_else(|| self.kind.default_split())
    }

    /// Method configurations in `methods` order with overrides applied.
    pub fn method_configs(&self) -> Vec<MethodConfig> {
        self.methods
            .iter()
            .map(|&m| {
                let base = MethodConfig::defaults(m);
                self.overrides.get(&m).map_or(base, |o| o.apply(base))
            })
            .collect()
    }

    /// Sweep values as counts; fails on negative or fractional entries.
    pub fn sweep_counts(&self) -> Result<Vec<usize>> {
        self.sweep
            .values
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                    Ok(v as usize)
                } else {
                    Err(Error::Config(format!("sweep.values: {v} is not a non-negative integer count")))
                }
            })
            .collect()
    }

    /// Checks every field and reports all offending ones at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.seeds.is_empty() {
            bad.push("seeds: at least one seed is required".to_string());
        }
        if self.methods.is_empty() {
            bad.push("methods: at least one method is required".to_string());
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m) {
                bad.push(format!("methods: {m} listed twice"));
            }
        }
        if let Err(e) = self.train.validate() {
            bad.push(format!("train: {e}"));
        }
        for m in self.method_configs() {
            if let Err(e) = m.validate() {
                bad.push(format!("overrides.{}: {e}", m.method));
            }
        }
        let sweeps = [ExperimentKind::SweepLabeled, ExperimentKind::SweepUnlabeled, ExperimentKind::SweepMismatch];
        if sweeps.contains(&self.kind) {
            if self.sweep.values.is_empty() {
                bad.push("sweep.values: at least one value is required".into());
            }
            if self.seeds.len() < 2 {
                bad.push("seeds: sweeps need at least 2 seeds".into());
            }
            if self.kind == ExperimentKind::SweepMismatch {
                if let Some(v) = self.sweep.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    bad.push(format!("sweep.values: overlap {v} is outside [0, 1]"));
                }
            } else if let Err(e) = self.sweep_counts() {
                bad.push(e.to_string());
            }
        }
        if self.kind == ExperimentKind::ValsizeStudy {
            if self.valsize.fractions.is_empty() || self.valsize.fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
                bad.push("valsize.fractions: need positive fractions".into());
            }
            if self.valsize.k < 2 {
                bad.push("valsize.k: need at least 2 subsets".into());
            }
            if let Some(r) = &self.valsize.relative_to {
                match r.parse::<Method>() {
                    Ok(m) if self.methods.contains(&m) => {}
                    _ => bad.push(format!("valsize.relative_to: {r:?} is not one of the listed methods")),
                }
            }
        }
        let h = &self.hoeffding;
        if !(h.confidence > 0.0 && h.confidence < 1.0 && h.p > 0.0 && h.p < 1.0) {
            bad.push("hoeffding: confidence and p must lie in (0, 1)".into());
        }
        if self.boundary.resolution < 2 {
            bad.push("boundary.resolution: must be >= 2".into());
        }
        if let Err(e) = self.boundary.extent.validate() {
            bad.push(format!("boundary.extent: {e}"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid experiment spec: {}", bad.join("; "))))
        }
    }

    /// TOML text that [`parse_config`] maps back to an equal spec.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize spec: {e}")))
    }
}

/// Parses, fills defaults and validates.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    spec.fill_defaults();
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}
