//! Synthetic 2-D datasets and the labeled / unlabeled / validation / test
//! split machinery.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

/// Points with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(points: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if points.rows() != labels.len() {
            return Err(Error::Shape(format!("{} points but {} labels", points.rows(), labels.len())));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Label { label, classes: num_classes });
        }
        if !points.is_finite() {
            return Err(Error::Config("dataset contains non-finite points".into()));
        }
        Ok(Dataset { points, labels, num_classes })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: self.points.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// CSV with header `x1,x2,label` (`x1..xd` for other widths).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in 0..self.points.cols() {
            let _ = write!(out, "x{},", c + 1);
        }
        out.push_str("label\n");
        for (r, label) in self.labels.iter().enumerate() {
            for v in self.points.row(r) {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{label}");
        }
        out
    }
}

/// Two interleaved half circles: class 0 is `(cos t, sin t)`, class 1 is
/// `(1 - cos t, 0.5 - sin t)`, `t ~ U[0, π]`, plus isotropic Gaussian noise.
pub fn two_moons(n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!("two_moons needs an even n >= 2, got {n}")));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::Config(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let mut rng = RngStream::new(seed);
    let half = n / 2;
    let mut points = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = usize::from(i >= half);
        let t = rng.uniform(0.0, PI);
        let (x, y) = if class == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        let (nx, ny) = if noise_std > 0.0 { (noise_std * rng.normal(), noise_std * rng.normal()) } else { (0.0, 0.0) };
        points.set(i, 0, x + nx);
        points.set(i, 1, y + ny);
        labels.push(class);
    }
    Dataset::new(points, labels, 2)
}

/// Centre of cluster `k` of `classes` spread evenly on a circle.
pub fn cluster_mean(k: usize, classes: usize, radius: f64) -> (f64, f64) {
    let angle = 2.0 * PI * k as f64 / classes as f64;
    (radius * angle.cos(), radius * angle.sin())
}

/// `classes` isotropic Gaussian clusters with means evenly spaced on a circle.
pub fn gaussian_clusters(classes: usize, per_class: usize, radius: f64, cluster_std: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::Config(format!("gaussian_clusters needs >= 2 classes, got {classes}")));
    }
    if !(cluster_std >= 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!("invalid cluster geometry: radius {radius}, std {cluster_std}")));
    }
    let mut rng = RngStream::new(seed);
    let mut points = Matrix::zeros(classes * per_class, 2);
    let mut labels = Vec::with_capacity(classes * per_class);
    for k in 0..classes {
        let (mx, my) = cluster_mean(k, classes, radius);
        for i in 0..per_class {
            let r = k * per_class + i;
            points.set(r, 0, mx + cluster_std * rng.normal());
            points.set(r, 1, my + cluster_std * rng.normal());
            labels.push(k);
        }
    }
    Dataset::new(points, labels, classes)
}

/// How to generate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    TwoMoons {
        n: usize,
        #[serde(default = "default_moons_noise")]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    GaussianClusters {
        classes: usize,
        per_class: usize,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_cluster_std")]
        cluster_std: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_moons_noise() -> f64 {
    0.1
}

fn default_radius() -> f64 {
    3.0
}

fn default_cluster_std() -> f64 {
    0.5
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::TwoMoons { n: 1000, noise: default_moons_noise(), seed: 0 }
    }
}

impl DatasetSpec {
    pub fn generate(&self) -> Result<Dataset> {
        match *self {
            DatasetSpec::TwoMoons { n, noise, seed } => two_moons(n, noise, seed),
            DatasetSpec::GaussianClusters { classes, per_class, radius, cluster_std, seed } => {
                gaussian_clusters(classes, per_class, radius, cluster_std, seed)
            }
        }
    }
}

/// Part sizes of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub labeled: usize,
    pub unlabeled: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.labeled + self.unlabeled + self.validation + self.test
    }
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes { labeled: 6, unlabeled: 500, validation: 100, test: 394 }
    }
}

/// Unlabeled points. Their true labels are kept only for auditing and
/// reporting; training reads [`UnlabeledPool::points`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledPool {
    points: Matrix,
    audit_labels: Vec<usize>,
}

impl UnlabeledPool {
    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn audit_labels(&self) -> &[usize] {
        &self.audit_labels
    }

    pub fn len(&self) -> usize {
        self.audit_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audit_labels.is_empty()
    }
}

/// Source indices of each part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// How a split was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitProvenance {
    pub seed: u64,
    pub source_size: usize,
    pub num_classes: usize,
    pub sizes: SplitSizes,
    pub labeled_classes: Vec<usize>,
    pub unlabeled_classes: Vec<usize>,
    /// Fraction of unlabeled classes that are also labeled classes.
    pub overlap: f64,
    pub source: Option<DatasetSpec>,
    pub indices: SplitIndices,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslSplit {
    pub labeled: Dataset,
    pub unlabeled: UnlabeledPool,
    pub validation: Dataset,
    pub test: Dataset,
    pub provenance: SplitProvenance,
}

impl SslSplit {
    pub fn num_classes(&self) -> usize {
        self.labeled.num_classes()
    }

    pub fn with_source(mut self, source: DatasetSpec) -> Self {
        self.provenance.source = Some(source);
        self
    }

    /// Writes `labeled.csv`, `unlabeled.csv` (with audit labels),
    /// `validation.csv`, `test.csv` and `split.json` under `dir`.
    pub fn write_to(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let unlabeled = Dataset {
            points: self.unlabeled.points.clone(),
            labels: self.unlabeled.audit_labels.clone(),
            num_classes: self.num_classes(),
        };
        let parts = [
            ("labeled.csv", self.labeled.to_csv()),
            ("unlabeled.csv", unlabeled.to_csv()),
            ("validation.csv", self.validation.to_csv()),
            ("test.csv", self.test.to_csv()),
            ("split.json", serde_json::to_string_pretty(&self.provenance)? + "\n"),
        ];
        let mut written = Vec::new();
        for (name, text) in parts {
            let path = dir.join(format!("{prefix}{name}"));
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn indices_by_class(data: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); data.num_classes()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Picks `n` indices spread as evenly as possible over `classes`. Classes
/// receiving the remainder are chosen at random.
fn stratified_pick(
    by_class: &mut [Vec<usize>],
    classes: &[usize],
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if classes.is_empty() {
        return Err(Error::Size("no classes to draw labeled examples from".into()));
    }
    if n < classes.len() {
        return Err(Error::Size(format!("{n} labels cannot cover {} classes", classes.len())));
    }
    let mut order = classes.to_vec();
    rng.shuffle(&mut order);
    let base = n / classes.len();
    let extra = n % classes.len();
    let mut picked = Vec::with_capacity(n);
    for (rank, &c) in order.iter().enumerate() {
        let quota = base + usize::from(rank < extra);
        let pool = &mut by_class[c];
        if pool.len() < quota {
            return Err(Error::Size(format!("class {c} has {} points, needs {quota}", pool.len())));
        }
        rng.shuffle(pool);
        picked.extend(pool.drain(..quota));
    }
    picked.sort_unstable();
    Ok(picked)
}

fn take(pool: &mut Vec<usize>, n: usize, what: &str) -> Result<Vec<usize>> {
    if pool.len() < n {
        return Err(Error::Size(format!("{what}: need {n} points, only {} remain", pool.len())));
    }
    Ok(pool.drain(..n).collect())
}

fn assemble(
    data: &Dataset,
    indices: SplitIndices,
    seed: u64,
    labeled_classes: Vec<usize>,
    unlabeled_classes: Vec<usize>,
) -> SslSplit {
    let overlap = overlap_fraction(&labeled_classes, &unlabeled_classes);
    let sizes = SplitSizes {
        labeled: indices.labeled.len(),
        unlabeled: indices.unlabeled.len(),
        validation: indices.validation.len(),
        test: indices.test.len(),
    };
    let unl = data.subset(&indices.unlabeled);
    SslSplit {
        labeled: data.subset(&indices.labeled),
        unlabeled: UnlabeledPool { points: unl.points, audit_labels: unl.labels },
        validation: data.subset(&indices.validation),
        test: data.subset(&indices.test),
        provenance: SplitProvenance {
            seed,
            source_size: data.len(),
            num_classes: data.num_classes(),
            sizes,
            labeled_classes,
            unlabeled_classes,
            overlap,
            source: None,
            indices,
        },
    }
}

/// `|unlabeled ∩ labeled| / |unlabeled|`.
pub fn overlap_fraction(labeled: &[usize], unlabeled: &[usize]) -> f64 {
    if unlabeled.is_empty() {
        return 0.0;
    }
    let l: BTreeSet<_> = labeled.iter().collect();
    unlabeled.iter().filter(|c| l.contains(c)).count() as f64 / unlabeled.len() as f64
}

/// Stratified labeled set, then validation, test and unlabeled drawn at
/// random from the rest.
///
/// Parts are drawn in the order labeled, validation, test, unlabeled from
/// separate streams, so for a fixed seed the first three do not depend on
/// the unlabeled count.
pub fn split_ssl(
    data: &Dataset,
    n_labeled: usize,
    n_unlabeled: usize,
    n_validation: usize,
    n_test: usize,
    seed: u64,
) -> Result<SslSplit> {
    let sizes = SplitSizes { labeled: n_labeled, unlabeled: n_unlabeled, validation: n_validation, test: n_test };
    if sizes.total() > data.len() {
        return Err(Error::Size(format!("split needs {} points, dataset has {}", sizes.total(), data.len())));
    }
    if n_labeled < data.num_classes() {
        return Err(Error::Size(format!(
            "{n_labeled} labeled examples cannot cover {} classes",
            data.num_classes()
        )));
    }
    let classes: Vec<usize> = (0..data.num_classes()).collect();
    let mut by_class = indices_by_class(data);
    let labeled = stratified_pick(&mut by_class, &classes, n_labeled, &mut RngStream::with_stream(seed, 1))?;
    let mut rest: Vec<usize> = by_class.into_iter().flatten().collect();
    rest.sort_unstable();
    RngStream::with_stream(seed, 2).shuffle(&mut rest);
    let validation = take(&mut rest, n_validation, "validation")?;
    let test = take(&mut rest, n_test, "test")?;
    RngStream::with_stream(seed, 3).shuffle(&mut rest);
    let unlabeled = take(&mut rest, n_unlabeled, "unlabeled")?;
    let indices = SplitIndices { labeled, unlabeled, validation, test };
    Ok(assemble(data, indices, seed, classes.clone(), classes))
}

/// Split whose labeled, validation and test parts come from
/// `labeled_classes` only, and whose unlabeled pool comes from
/// `unlabeled_classes` only.
pub fn mismatch_split(
    data: &Dataset,
    labeled_classes: &[usize],
    unlabeled_classes: &[usize],
    sizes: SplitSizes,
    seed: u64,
) -> Result<SslSplit> {
    let k = data.num_classes();
    for (what, set) in [("labeled", labeled_classes), ("unlabeled", unlabeled_classes)] {
        if set.is_empty() {
            return Err(Error::Config(format!("{what} class set is empty")));
        }
        if let Some(&c) = set.iter().find(|&&c| c >= k) {
            return Err(Error::Label { label: c, classes: k });
        }
    }
    let lset: Vec<usize> = labeled_classes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let uset: Vec<usize> = unlabeled_classes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();

    let mut by_class = indices_by_class(data);
    let labeled = stratified_pick(&mut by_class, &lset, sizes.labeled, &mut RngStream::with_stream(seed, 1))?;
    let mut labeled_rest: Vec<usize> = lset.iter().flat_map(|&c| by_class[c].iter().copied()).collect();
    labeled_rest.sort_unstable();
    RngStream::with_stream(seed, 2).shuffle(&mut labeled_rest);
    let validation = take(&mut labeled_rest, sizes.validation, "validation")?;
    let test = take(&mut labeled_rest, sizes.test, "test")?;

    let used: BTreeSet<usize> = labeled.iter().chain(&validation).chain(&test).copied().collect();
    let mut unlabeled_pool: Vec<usize> = uset
        .iter()
        .flat_map(|&c| indices_by_class(data)[c].clone())
        .filter(|i| !used.contains(i))
        .collect();
    unlabeled_pool.sort_unstable();
    RngStream::with_stream(seed, 3).shuffle(&mut unlabeled_pool);
    let unlabeled = take(&mut unlabeled_pool, sizes.unlabeled, "unlabeled")?;
    let indices = SplitIndices { labeled, unlabeled, validation, test };
    Ok(assemble(data, indices, seed, lset, uset))
}

/// Source indices of `k` pairwise-disjoint random subsets of size `set_size`.
pub fn subsample_indices(len: usize, set_size: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k.checked_mul(set_size).is_none_or(|need| need > len) {
        return Err(Error::Size(format!("{k} disjoint sets of {set_size} do not fit in {len} examples")));
    }
    let mut order: Vec<usize> = (0..len).collect();
    RngStream::new(seed).shuffle(&mut order);
    Ok(order.chunks(set_size.max(1)).take(k).map(|c| if set_size == 0 { vec![] } else { c.to_vec() }).collect())
}

/// `k` pairwise-disjoint random subsets of `validation`, each of `set_size`.
pub fn subsample_validation(validation: &Dataset, set_size: usize, k: usize, seed: u64) -> Result<Vec<Dataset>> {
    let sets = subsample_indices(validation.len(), set_size, k, seed)?;
    Ok(sets.iter().map(|idx| validation.subset(idx)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjoint(parts: &[&[usize]]) -> bool {
        let mut seen = BTreeSet::new();
        parts.iter().all(|p| p.iter().all(|i| seen.insert(*i)))
    }

    #[test]
    fn moons_are_balanced_and_deterministic() {
        let d = two_moons(1000, 0.1, 3).unwrap();
        assert_eq!(d.class_counts(), vec![500, 500]);
        assert_eq!(d, two_moons(1000, 0.1, 3).unwrap());
        assert!(two_moons(999, 0.1, 3).is_err());
    }

    #[test]
    fn noiseless_upper_moon_on_unit_circle() {
        let d = two_moons(200, 0.0, 1).unwrap();
        for r in 0..d.len() {
            let (x, y) = (d.points().get(r, 0), d.points().get(r, 1));
            if d.labels()[r] == 0 {
                assert!(((x * x + y * y).sqrt() - 1.0).abs() < 1e-12);
                assert!(y >= 0.0);
            } else {
                let (u, v) = (1.0 - x, 0.5 - y);
                assert!(((u * u + v * v).sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clusters_geometry() {
        let d = gaussian_clusters(6, 400, 3.0, 0.5, 0).unwrap();
        assert_eq!(d.len(), 2400);
        let flat = gaussian_clusters(6, 5, 3.0, 0.0, 0).unwrap();
        for r in 0..flat.len() {
            let (mx, my) = cluster_mean(flat.labels()[r], 6, 3.0);
            assert_eq!((flat.points().get(r, 0), flat.points().get(r, 1)), (mx, my));
        }
        let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let d01 = dist(cluster_mean(0, 6, 3.0), cluster_mean(1, 6, 3.0));
        for k in 0..6 {
            let dk = dist(cluster_mean(k, 6, 3.0), cluster_mean((k + 1) % 6, 6, 3.0));
            assert!((dk - d01).abs() < 1e-12);
        }
        assert!(gaussian_clusters(1, 5, 1.0, 0.1, 0).is_err());
    }

    #[test]
    fn ssl_split_sizes_and_disjointness() {
        let d = two_moons(1000, 0.1, 0).unwrap();
        let s = split_ssl(&d, 6, 500, 100, 394, 7).unwrap();
        assert_eq!((s.labeled.len(), s.unlabeled.len(), s.validation.len(), s.test.len()), (6, 500, 100, 394));
        let ix = &s.provenance.indices;
        assert!(disjoint(&[&ix.labeled, &ix.unlabeled, &ix.validation, &ix.test]));
        assert_eq!(s.labeled.class_counts(), vec![3, 3]);
        assert_eq!(s, split_ssl(&d, 6, 500, 100, 394, 7).unwrap());
        assert!(matches!(split_ssl(&d, 6, 600, 100, 394, 7), Err(Error::Size(_))));
        assert!(matches!(split_ssl(&d, 1, 10, 10, 10, 7), Err(Error::Size(_))));
    }

    #[test]
    fn stratification_within_one() {
        let d = gaussian_clusters(4, 50, 3.0, 0.5, 2).unwrap();
        for n in [4, 5, 7, 13, 38] {
            let s = split_ssl(&d, n, 10, 10, 10, n as u64).unwrap();
            let c = s.labeled.class_counts();
            assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
            assert_eq!(c.iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn labeled_and_eval_parts_ignore_unlabeled_count() {
        let d = two_moons(1000, 0.1, 0).unwrap();
        let a = split_ssl(&d, 10, 0, 100, 100, 5).unwrap();
        let b = split_ssl(&d, 10, 700, 100, 100, 5).unwrap();
        assert_eq!(a.labeled, b.labeled);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn mismatch_overlaps() {
        let d = gaussian_clusters(10, 100, 3.0, 0.3, 0).unwrap();
        let sizes = SplitSizes { labeled: 60, unlabeled: 200, validation: 60, test: 60 };
        let labeled: Vec<usize> = (0..6).collect();
        let full = mismatch_split(&d, &labeled, &[0, 1, 2, 3], sizes, 1).unwrap();
        assert_eq!(full.provenance.overlap, 1.0);
        assert!(full.unlabeled.audit_labels().iter().all(|&l| l < 4));

        let three = mismatch_split(&d, &labeled, &[3, 4, 5, 6], sizes, 1).unwrap();
        assert_eq!(three.provenance.overlap, 0.75);

        let none = mismatch_split(&d, &labeled, &[6, 7, 8, 9], sizes, 1).unwrap();
        assert_eq!(none.provenance.overlap, 0.0);
        assert!(none.unlabeled.audit_labels().iter().all(|&l| l >= 6));
        for part in [&none.labeled, &none.validation, &none.test] {
            assert!(part.labels().iter().all(|&l| l < 6));
        }
        let ix = &none.provenance.indices;
        assert!(disjoint(&[&ix.labeled, &ix.unlabeled, &ix.validation, &ix.test]));
        assert_eq!(full.labeled, none.labeled);
        assert_eq!(full.validation, none.validation);
        let too_big = SplitSizes { unlabeled: 1000, ..sizes };
        assert!(matches!(mismatch_split(&d, &labeled, &[6, 7], too_big, 1), Err(Error::Size(_))));
    }

    #[test]
    fn validation_subsets() {
        let d = two_moons(1000, 0.1, 0).unwrap();
        let idx = subsample_indices(d.len(), 100, 10, 3).unwrap();
        let all: BTreeSet<usize> = idx.iter().flatten().copied().collect();
        assert_eq!(all.len(), 1000);
        assert!(idx.iter().all(|s| s.len() == 100));
        let one = subsample_validation(&d, d.len(), 1, 3).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), d.len());
        assert_eq!(one[0].class_counts(), d.class_counts());
        assert!(matches!(subsample_validation(&d, 101, 10, 3), Err(Error::Size(_))));
    }

    #[test]
    fn csv_header_and_rows() {
        let d = Dataset::new(Matrix::from_rows(&[[0.5, -1.0], [2.0, 3.25]]), vec![1, 0], 2).unwrap();
        assert_eq!(d.to_csv(), "x1,x2,label\n0.5,-1,1\n2,3.25,0\n");
        assert!(Dataset::new(Matrix::zeros(1, 2), vec![3], 2).is_err());
    }

    #[test]
    fn spec_roundtrip_through_toml() {
        let spec = DatasetSpec::GaussianClusters { classes: 10, per_class: 50, radius: 3.0, cluster_std: 0.4, seed: 2 };
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            dataset: DatasetSpec,
        }
        let text = toml::to_string(&Wrap { dataset: spec.clone() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.dataset, spec);
    }
}
