//! Experiment protocols: equal-budget tuning, labeled/unlabeled/mismatch
//! sweeps, validation-size studies and the Hoeffding calculator.
//!
//! Every protocol enumerates its cells (method, axis value, seed) in a fixed
//! order, runs them on a thread pool sized by `SSL_LAB_THREADS` (serial by
//! default) and aggregates in that same order, so results do not depend on
//! scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{mismatch_split, split_ssl, subsample_indices, Dataset, SplitSizes, SslSplit};
use crate::error::{Error, Result};
use crate::losses::{Method, MethodConfig};
use crate::model::ParameterSet;
use crate::rng::RngStream;
use crate::training::{train, train_full, TrainConfig};

/// Environment variable capping harness parallelism.
pub const THREADS_ENV: &str = "SSL_LAB_THREADS";

/// Method name used for the no-unlabeled-data reference in mismatch sweeps.
pub const SUPERVISED_REFERENCE: &str = "supervised-reference";

/// Worker count from `SSL_LAB_THREADS`; 1 when unset or unparsable.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n: &usize| n >= 1).unwrap_or(1)
}

/// Maps `f` over `items` on the harness pool, keeping input order.
pub fn run_cells<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let threads = thread_count();
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

// ---------------------------------------------------------------- tuning

/// Inclusive sampling range; `log` samples uniformly in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub log: bool,
}

impl Range {
    pub const fn linear(low: f64, high: f64) -> Self {
        Range { low, high, log: false }
    }

    pub const fn log(low: f64, high: f64) -> Self {
        Range { low, high, log: true }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.low.is_finite() && self.high.is_finite() && self.low <= self.high && (!self.log || self.low > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("search range {name} = [{}, {}] is invalid", self.low, self.high)))
        }
    }

    fn sample(&self, rng: &mut RngStream) -> f64 {
        if self.low == self.high {
            return self.low;
        }
        if self.log {
            rng.uniform(self.low.ln(), self.high.ln()).exp()
        } else {
            rng.uniform(self.low, self.high)
        }
    }
}

/// Per-hyperparameter ranges. Each trial draws every range in field order,
/// so methods tuned with the same seed see the same learning rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub initial_lr: Range,
    pub max_consistency: Range,
    pub vat_epsilon: Range,
    pub ema_decay: Range,
    pub pseudo_threshold: Range,
    pub entropy_multiplier: Range,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            initial_lr: Range::log(3e-4, 3e-2),
            max_consistency: Range::log(0.03, 30.0),
            vat_epsilon: Range::log(0.05, 1.0),
            ema_decay: Range::linear(0.9, 0.999),
            pseudo_threshold: Range::linear(0.8, 0.99),
            entropy_multiplier: Range::log(0.01, 1.0),
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        self.initial_lr.validate("initial_lr")?;
        self.max_consistency.validate("max_consistency")?;
        self.vat_epsilon.validate("vat_epsilon")?;
        self.ema_decay.validate("ema_decay")?;
        self.pseudo_threshold.validate("pseudo_threshold")?;
        self.entropy_multiplier.validate("entropy_multiplier")
    }

    /// Draws one candidate, applying only the hyperparameters `base.method` uses.
    fn sample(&self, base: &MethodConfig, train: &TrainConfig, rng: &mut RngStream) -> (MethodConfig, TrainConfig) {
        let lr = self.initial_lr.sample(rng);
        let coefficient = self.max_consistency.sample(rng);
        let epsilon = self.vat_epsilon.sample(rng);
        let decay = self.ema_decay.sample(rng);
        let threshold = self.pseudo_threshold.sample(rng);
        let entropy = self.entropy_multiplier.sample(rng);

        let mut m = *base;
        let method = base.method;
        if method != Method::Supervised {
            m.max_consistency = coefficient;
        }
        if matches!(method, Method::Vat | Method::VatEntmin) {
            m.vat_epsilon = epsilon;
        }
        if method.uses_teacher() || method.uses_ensemble() {
            m.ema_decay = decay;
        }
        if method == Method::PseudoLabel {
            m.pseudo_threshold = threshold;
        }
        if method == Method::VatEntmin {
            m.entropy_multiplier = entropy;
        }
        (m, TrainConfig { initial_lr: lr, ..train.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSpec {
    pub budget: usize,
    pub seed: u64,
    pub space: SearchSpace,
}

impl Default for TuneSpec {
    fn default() -> Self {
        TuneSpec { budget: 40, seed: 0, space: SearchSpace::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub method: MethodConfig,
    pub initial_lr: f64,
    /// `None` when the trial diverged.
    pub val_error: Option<f64>,
    pub test_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: MethodConfig,
    pub best_train: TrainConfig,
    pub best_val_error: f64,
    pub trials: Vec<Trial>,
}

/// Seeded random search minimizing selected validation error. Every trial
/// trains on the same split with seed `spec.seed`; ties go to the earliest trial.
pub fn tune(method: &MethodConfig, split: &SslSplit, spec: &TuneSpec, train_config: &TrainConfig) -> Result<TuneOutcome> {
    if spec.budget < 1 {
        return Err(Error::Config("tuning budget must be >= 1".into()));
    }
    spec.space.validate()?;
    let mut rng = RngStream::with_stream(spec.seed, 21);
    let candidates: Vec<(usize, MethodConfig, TrainConfig)> = (0..spec.budget)
        .map(|i| {
            let (m, t) = spec.space.sample(method, train_config, &mut rng);
            (i, m, t)
        })
        .collect();
    let results = run_cells(&candidates, |(i, m, t)| match train(split, m, t, spec.seed) {
        Ok(r) => Ok(Trial {
            index: *i,
            method: *m,
            initial_lr: t.initial_lr,
            val_error: Some(r.selected.val_error),
            test_error: Some(r.selected.test_error),
        }),
        Err(Error::Divergence { .. }) => {
            Ok(Trial { index: *i, method: *m, initial_lr: t.initial_lr, val_error: None, test_error: None })
        }
        Err(e) => Err(e),
    })?;
    let mut best: Option<usize> = None;
    for (i, t) in results.iter().enumerate() {
        if let Some(v) = t.val_error {
            if best.is_none_or(|b| v < results[b].val_error.expect("best has a value")) {
                best = Some(i);
            }
        }
    }
    let b = best.ok_or(Error::TuningFailed(spec.budget))?;
    Ok(TuneOutcome {
        best: candidates[b].1,
        best_train: candidates[b].2.clone(),
        best_val_error: results[b].val_error.expect("best has a value"),
        trials: results,
    })
}

/// Trial log as CSV: `method,trial,initial_lr,max_consistency,vat_epsilon,ema_decay,pseudo_threshold,entropy_multiplier,val_error,test_error`.
/// Diverged trials leave the error columns empty.
pub fn trials_csv(trials: &[Trial]) -> String {
    let mut out = String::from(
        "method,trial,initial_lr,max_consistency,vat_epsilon,ema_decay,pseudo_threshold,entropy_multiplier,val_error,test_error\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in trials {
        let m = &t.method;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            m.method,
            t.index,
            t.initial_lr,
            m.max_consistency,
            m.vat_epsilon,
            m.ema_decay,
            m.pseudo_threshold,
            m.entropy_multiplier,
            opt(t.val_error),
            opt(t.test_error)
        )
        .expect("writing to a String");
    }
    out
}

// ---------------------------------------------------------------- sweeps

/// One (method, axis value, seed) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub method: String,
    pub seed: u64,
    pub metric: f64,
}

/// Mean and sample standard deviation over seeds for one (method, value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub value: f64,
    pub method: String,
    pub mean: f64,
    pub std: f64,
}

/// Selected test error per (method, axis value, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub values: Vec<f64>,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    /// Ordered by value, then method, then seed.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn metrics(&self, method: &str, value: f64) -> Vec<f64> {
        self.cells.iter().filter(|c| c.method == method && c.value == value).map(|c| c.metric).collect()
    }

    pub fn mean(&self, method: &str, value: f64) -> Option<f64> {
        let m = self.metrics(method, value);
        (!m.is_empty()).then(|| mean_std(&m).0)
    }

    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut out = Vec::new();
        for &value in &self.values {
            for method in &self.methods {
                let m = self.metrics(method, value);
                if m.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(&m);
                out.push(SweepSummary { value, method: method.clone(), mean, std });
            }
        }
        out
    }

    /// `axis,value,method,seed,metric`
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("axis,value,method,seed,metric\n");
        for c in &self.cells {
            writeln!(out, "{},{},{},{},{}", self.axis, c.value, c.method, c.seed, c.metric).expect("writing to a String");
        }
        out
    }

    /// `axis,value,method,mean,std`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("axis,value,method,mean,std\n");
        for s in self.summary() {
            writeln!(out, "{},{},{},{},{}", self.axis, s.value, s.method, s.mean, s.std).expect("writing to a String");
        }
        out
    }
}

/// Mean and sample (n − 1) standard deviation; the std of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Inputs shared by the sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSetup {
    pub data: Dataset,
    pub sizes: SplitSizes,
    pub train: TrainConfig,
    pub methods: Vec<MethodConfig>,
    pub seeds: Vec<u64>,
}

impl SweepSetup {
    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("a sweep needs at least one method".into()));
        }
        if self.seeds.len() < 2 {
            return Err(Error::Config(format!("a sweep needs at least 2 seeds for a std, got {}", self.seeds.len())));
        }
        self.train.validate()?;
        for m in &self.methods {
            m.validate()?;
        }
        Ok(())
    }

    fn method_names(&self) -> Vec<String> {
        self.methods.iter().map(|m| m.method.to_string()).collect()
    }
}

struct Cell<'a> {
    value: f64,
    method: &'a MethodConfig,
    name: String,
    seed: u64,
    split: usize,
}

fn run_sweep(axis: &str, setup: &SweepSetup, values: &[f64], splits: &[SslSplit], cells: Vec<Cell<'_>>) -> Result<SweepResult> {
    let metrics = run_cells(&cells, |c| Ok(train(&splits[c.split], c.method, &setup.train, c.seed)?.selected.test_error))?;
    let mut methods = setup.method_names();
    for c in &cells {
        if !methods.contains(&c.name) {
            methods.push(c.name.clone());
        }
    }
    Ok(SweepResult {
        axis: axis.to_string(),
        values: values.to_vec(),
        methods,
        seeds: setup.seeds.clone(),
        cells: cells
            .iter()
            .zip(metrics)
            .map(|(c, metric)| SweepCell { value: c.value, method: c.name.clone(), seed: c.seed, metric })
            .collect(),
    })
}

/// Builds one split per (value, seed) and a cell per (value, method, seed).
fn grid_sweep(
    axis: &str,
    setup: &SweepSetup,
    counts: &[usize],
    make_split: impl Fn(usize, u64) -> Result<SslSplit>,
) -> Result<SweepResult> {
    setup.validate()?;
    let mut splits = Vec::new();
    let mut cells = Vec::new();
    for &count in counts {
        let first = splits.len();
        for &seed in &setup.seeds {
            splits.push(make_split(count, seed)?);
        }
        for m in &setup.methods {
            for (si, &seed) in setup.seeds.iter().enumerate() {
                cells.push(Cell { value: count as f64, method: m, name: m.method.to_string(), seed, split: first + si });
            }
        }
    }
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    run_sweep(axis, setup, &values, &splits, cells)
}

/// Varies the labeled count; the unlabeled pool is everything not used for
/// labeled, validation or test data.
pub fn sweep_labeled(setup: &SweepSetup, counts: &[usize]) -> Result<SweepResult> {
    grid_sweep("labeled", setup, counts, |count, seed| {
        let s = &setup.sizes;
        let used = count + s.validation + s.test;
        let unlabeled = setup.data.len().checked_sub(used).ok_or_else(|| {
            Error::Size(format!("{count} labeled + {} validation + {} test exceed {} points", s.validation, s.test, setup.data.len()))
        })?;
        split_ssl(&setup.data, count, unlabeled, s.validation, s.test, seed)
    })
}

/// Varies the unlabeled count with labeled, validation and test sizes fixed.
pub fn sweep_unlabeled(setup: &SweepSetup, counts: &[usize]) -> Result<SweepResult> {
    grid_sweep("unlabeled", setup, counts, |count, seed| {
        let s = &setup.sizes;
        split_ssl(&setup.data, s.labeled, count, s.validation, s.test, seed)
    })
}

/// Number of labeled and unlabeled classes in the mismatch construction.
pub const MISMATCH_LABELED_CLASSES: usize = 6;
pub const MISMATCH_UNLABELED_CLASSES: usize = 4;

/// Labeled classes `0..6` and the unlabeled class set for `overlap`: the
/// last `round(4 · overlap)` labeled classes plus the first remaining
/// classes from `6..10`.
pub fn mismatch_classes(overlap: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap must be in [0, 1], got {overlap}")));
    }
    let l = MISMATCH_LABELED_CLASSES;
    let u = MISMATCH_UNLABELED_CLASSES;
    let inside = (overlap * u as f64).round() as usize;
    let labeled: Vec<usize> = (0..l).collect();
    let mut unlabeled: Vec<usize> = (l - inside..l).collect();
    unlabeled.extend(l..l + (u - inside));
    Ok((labeled, unlabeled))
}

/// Sweeps class overlap between labeled and unlabeled data on a dataset
/// with at least 10 classes, and adds a `supervised-reference` run per seed
/// (same labeled/validation/test data, no unlabeled term) at every value.
pub fn sweep_mismatch(setup: &SweepSetup, overlaps: &[f64]) -> Result<SweepResult> {
    setup.validate()?;
    let needed = MISMATCH_LABELED_CLASSES + MISMATCH_UNLABELED_CLASSES;
    if setup.data.num_classes() < needed {
        return Err(Error::Config(format!(
            "mismatch sweep needs a dataset with at least {needed} classes, got {}",
            setup.data.num_classes()
        )));
    }
    let reference = MethodConfig::defaults(Method::Supervised);
    let mut splits = Vec::new();
    let mut cells = Vec::new();
    for &overlap in overlaps {
        let (lc, uc) = mismatch_classes(overlap)?;
        let first = splits.len();
        for &seed in &setup.seeds {
            splits.push(mismatch_split(&setup.data, &lc, &uc, setup.sizes, seed)?);
        }
        for m in &setup.methods {
            for (si, &seed) in setup.seeds.iter().enumerate() {
                cells.push(Cell { value: overlap, method: m, name: m.method.to_string(), seed, split: first + si });
            }
        }
        for (si, &seed) in setup.seeds.iter().enumerate() {
            cells.push(Cell { value: overlap, method: &reference, name: SUPERVISED_REFERENCE.into(), seed, split: first + si });
        }
    }
    run_sweep("overlap", setup, overlaps, &splits, cells)
}

// ---------------------------------------------------- validation-set size

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "reference", deny_unknown_fields)]
pub enum StudyMode {
    Absolute,
    /// Subtract this model's error on the identical subset.
    RelativeTo(String),
}

/// Per-(size, model) aggregate over the `k` disjoint subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub size: usize,
    pub method: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub mode: StudyMode,
    pub k: usize,
    pub sizes: Vec<usize>,
    /// `(size, method, subset index, error)` ordered by size, method, subset.
    pub cells: Vec<(usize, String, usize, f64)>,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    pub fn row(&self, size: usize, method: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.size == size && r.method == method)
    }

    /// `axis,value,method,seed,metric` with the subset index in the seed column.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("axis,value,method,seed,metric\n");
        for (size, method, i, e) in &self.cells {
            writeln!(out, "valsize,{size},{method},{i},{e}").expect("writing to a String");
        }
        out
    }

    /// `axis,value,method,mean,std`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("axis,value,method,mean,std\n");
        for r in &self.rows {
            writeln!(out, "valsize,{},{},{},{}", r.size, r.method, r.mean, r.std).expect("writing to a String");
        }
        out
    }
}

/// Set size for a fraction of the training-set size, at least 1.
pub fn size_from_fraction(fraction: f64, train_size: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(Error::Config(format!("validation size fraction must be > 0, got {fraction}")));
    }
    Ok(((fraction * train_size as f64).round() as usize).max(1))
}

/// Evaluates fixed models on `k` disjoint random subsets of `pool` for each
/// size. All models see the identical subsets.
pub fn validation_size_study(
    models: &[(String, ParameterSet)],
    pool: &Dataset,
    sizes: &[usize],
    k: usize,
    seed: u64,
    mode: &StudyMode,
) -> Result<StudyResult> {
    if models.is_empty() {
        return Err(Error::Config("validation-size study needs at least one model".into()));
    }
    if let StudyMode::RelativeTo(reference) = mode {
        if !models.iter().any(|(n, _)| n == reference) {
            return Err(Error::Config(format!("reference model {reference:?} is not among the studied models")));
        }
    }
    // Predictions once per model; subsets only index into them.
    let predictions: Vec<Vec<usize>> = models.iter().map(|(_, p)| p.predict(pool.points())).collect::<Result<_>>()?;
    let wrong: Vec<Vec<bool>> =
        predictions.iter().map(|pred| pred.iter().zip(pool.labels()).map(|(p, l)| p != l).collect()).collect();
    let reference = match mode {
        StudyMode::Absolute => None,
        StudyMode::RelativeTo(name) => models.iter().position(|(n, _)| n == name),
    };

    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for (si, &size) in sizes.iter().enumerate() {
        if size == 0 {
            return Err(Error::Size("validation subsets must be non-empty".into()));
        }
        let subsets = subsample_indices(pool.len(), size, k, crate::rng::derive_seed(seed, si as u64))?;
        let error = |mi: usize, subset: &[usize]| subset.iter().filter(|&&i| wrong[mi][i]).count() as f64 / size as f64;
        for (mi, (name, _)) in models.iter().enumerate() {
            let values: Vec<f64> = subsets
                .iter()
                .map(|s| match reference {
                    Some(r) => error(mi, s) - error(r, s),
                    None => error(mi, s),
                })
                .collect();
            for (i, v) in values.iter().enumerate() {
                cells.push((size, name.clone(), i, *v));
            }
            let (mean, std) = mean_std(&values);
            rows.push(StudyRow { size, method: name.clone(), mean, std });
        }
    }
    Ok(StudyResult { mode: mode.clone(), k, sizes: sizes.to_vec(), cells, rows })
}

/// Trains each method once on `split` (seed `seed`) and returns the
/// best-validation parameters, ready for [`validation_size_study`].
pub fn train_for_study(
    split: &SslSplit,
    methods: &[MethodConfig],
    train_config: &TrainConfig,
    seed: u64,
) -> Result<Vec<(String, ParameterSet)>> {
    run_cells(methods, |m| Ok((m.method.to_string(), train_full(split, m, train_config, seed, None)?.best_params)))
}

// ------------------------------------------------------------- Hoeffding

/// `max(0, 1 − 2 exp(−2 n p²))`.
pub fn hoeffding_confidence(n: u64, p: f64) -> f64 {
    (1.0 - 2.0 * (-2.0 * n as f64 * p * p).exp()).max(0.0)
}

/// Smallest `n` with `hoeffding_confidence(n, p) >= confidence`.
pub fn hoeffding_n(confidence: f64, p: f64) -> Result<u64> {
    if !(confidence > 0.0 && confidence < 1.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!("need confidence and p in (0, 1), got {confidence}, {p}")));
    }
    let mut n = ((2.0 / (1.0 - confidence)).ln() / (2.0 * p * p)).ceil().max(1.0) as u64;
    // The closed form can be one off after rounding; settle it against the bound itself.
    while n > 1 && hoeffding_confidence(n - 1, p) >= confidence {
        n -= 1;
    }
    while hoeffding_confidence(n, p) < confidence {
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gaussian_clusters, two_moons};
    use crate::model::mlp_init;

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_n(0.95, 0.01).unwrap(), 18445);
        assert_eq!(hoeffding_n(0.95, 0.1).unwrap(), 185);
        assert!(hoeffding_confidence(18445, 0.01) >= 0.95);
        assert_eq!(hoeffding_confidence(1, 0.01), 0.0);
        assert!(hoeffding_confidence(u64::MAX / 4, 0.01) == 1.0);
        assert!(hoeffding_n(1.0, 0.1).is_err());
        assert!(hoeffding_n(0.5, 0.0).is_err());
        let ps = [0.005, 0.01, 0.05, 0.1, 0.3];
        for w in ps.windows(2) {
            assert!(hoeffding_n(0.9, w[1]).unwrap() <= hoeffding_n(0.9, w[0]).unwrap());
        }
    }

    #[test]
    fn mismatch_class_sets() {
        let (l, u) = mismatch_classes(0.75).unwrap();
        assert_eq!(l, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(u, vec![3, 4, 5, 6]);
        assert_eq!(mismatch_classes(1.0).unwrap().1, vec![2, 3, 4, 5]);
        assert_eq!(mismatch_classes(0.0).unwrap().1, vec![6, 7, 8, 9]);
        let (l, u) = mismatch_classes(0.25).unwrap();
        assert_eq!(u.iter().filter(|c| l.contains(c)).count(), 1);
        assert!(mismatch_classes(1.5).is_err());
    }

    #[test]
    fn mean_std_is_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    fn quick_train() -> TrainConfig {
        TrainConfig { total_steps: 40, eval_every: 20, ..Default::default() }
    }

    #[test]
    fn tune_budget_one_and_determinism() {
        let d = two_moons(300, 0.1, 0).unwrap();
        let split = split_ssl(&d, 6, 100, 50, 50, 0).unwrap();
        let spec = TuneSpec { budget: 1, seed: 5, ..Default::default() };
        let vat = MethodConfig::defaults(Method::Vat);
        let one = tune(&vat, &split, &spec, &quick_train()).unwrap();
        assert_eq!(one.trials.len(), 1);
        assert_eq!(one.best, one.trials[0].method);

        let spec = TuneSpec { budget: 4, seed: 5, ..Default::default() };
        let a = tune(&vat, &split, &spec, &quick_train()).unwrap();
        let b = tune(&vat, &split, &spec, &quick_train()).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.trials, b.trials);
        let sup = tune(&MethodConfig::defaults(Method::Supervised), &split, &spec, &quick_train()).unwrap();
        assert_eq!(sup.trials.len(), a.trials.len());
        // Same seed: same learning-rate draws for every method.
        let lrs = |o: &TuneOutcome| o.trials.iter().map(|t| t.initial_lr).collect::<Vec<_>>();
        assert_eq!(lrs(&sup), lrs(&a));
        assert!(sup.trials.iter().all(|t| t.method.max_consistency == 0.0));
        assert!(trials_csv(&a.trials).lines().count() == 5);
    }

    #[test]
    fn tune_reports_total_divergence() {
        let d = two_moons(300, 0.1, 0).unwrap();
        let split = split_ssl(&d, 6, 100, 50, 50, 0).unwrap();
        let space = SearchSpace { initial_lr: Range::linear(1e200, 1e200), ..Default::default() };
        let spec = TuneSpec { budget: 2, seed: 0, space };
        let r = tune(&MethodConfig::defaults(Method::Supervised), &split, &spec, &quick_train());
        assert!(matches!(r, Err(Error::TuningFailed(2))));
    }

    #[test]
    fn sweeps_have_full_grids() {
        let setup = SweepSetup {
            data: two_moons(400, 0.1, 0).unwrap(),
            sizes: SplitSizes { labeled: 6, unlabeled: 100, validation: 50, test: 50 },
            train: quick_train(),
            methods: vec![MethodConfig::defaults(Method::Supervised), MethodConfig::defaults(Method::PiModel)],
            seeds: vec![0, 1],
        };
        let r = sweep_labeled(&setup, &[4, 8]).unwrap();
        assert_eq!(r.cells.len(), 2 * 2 * 2);
        assert_eq!(r.summary().len(), 4);
        assert!(r.summary().iter().all(|s| s.mean.is_finite()));
        assert_eq!(r.summary_csv().lines().next(), Some("axis,value,method,mean,std"));
        assert_eq!(r, sweep_labeled(&setup, &[4, 8]).unwrap());

        let u = sweep_unlabeled(&setup, &[0, 50]).unwrap();
        assert_eq!(u.mean("pi-model", 0.0), u.mean("supervised", 0.0));
        assert!(sweep_labeled(&SweepSetup { seeds: vec![0], ..setup.clone() }, &[4]).is_err());
    }

    #[test]
    fn mismatch_sweep_includes_reference() {
        let setup = SweepSetup {
            data: gaussian_clusters(10, 40, 3.0, 0.5, 0).unwrap(),
            sizes: SplitSizes { labeled: 12, unlabeled: 60, validation: 30, test: 30 },
            train: quick_train(),
            methods: vec![MethodConfig::defaults(Method::PiModel)],
            seeds: vec![0, 1],
        };
        let r = sweep_mismatch(&setup, &[0.0, 1.0]).unwrap();
        assert_eq!(r.cells.len(), 2 * 2 * 2);
        assert!(r.methods.contains(&SUPERVISED_REFERENCE.to_string()));
        assert_eq!(r.mean(SUPERVISED_REFERENCE, 0.0), r.mean(SUPERVISED_REFERENCE, 1.0));
        let few = SweepSetup { data: two_moons(400, 0.1, 0).unwrap(), ..setup };
        assert!(matches!(sweep_mismatch(&few, &[0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn study_degenerate_cases() {
        let pool = two_moons(400, 0.1, 0).unwrap();
        let m = mlp_init(&[2, 10, 10, 10, 2], 0).unwrap();
        let models = vec![("a".to_string(), m.clone()), ("b".to_string(), mlp_init(&[2, 10, 10, 10, 2], 1).unwrap())];
        let rel = validation_size_study(&models, &pool, &[20, 40], 5, 0, &StudyMode::RelativeTo("a".into())).unwrap();
        let a = rel.row(20, "a").unwrap();
        assert_eq!((a.mean, a.std), (0.0, 0.0));
        assert_eq!(rel.rows.len(), 4);
        assert_eq!(rel.cells.len(), 2 * 2 * 5);

        // A "perfect" pool: relabel by the model's own predictions.
        let pred = m.predict(pool.points()).unwrap();
        let perfect = Dataset::new(pool.points().clone(), pred, 2).unwrap();
        let abs = validation_size_study(&models[..1], &perfect, &[10, 40], 10, 0, &StudyMode::Absolute).unwrap();
        assert!(abs.rows.iter().all(|r| r.mean == 0.0 && r.std == 0.0));
        assert!(validation_size_study(&models, &pool, &[100], 5, 0, &StudyMode::Absolute).is_err());
        assert!(validation_size_study(&models, &pool, &[10], 2, 0, &StudyMode::RelativeTo("zz".into())).is_err());
        assert_eq!(size_from_fraction(1.0, 6).unwrap(), 6);
    }
}
