//! Semi-supervised loss terms and their composition into a training loss.
//!
//! Every consistency target enters the graph behind a stop-gradient (or as a
//! constant), so gradients only reach θ through the student branch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Bindings, Expr, Graph};
use crate::error::{Error, Result};
use crate::matrix::{argmax, Matrix};
use crate::model::{mlp_forward, BoundParams, ParameterSet, StochasticConfig};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Supervised,
    PiModel,
    MeanTeacher,
    TemporalEnsembling,
    Vat,
    VatEntmin,
    PseudoLabel,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Supervised,
        Method::PiModel,
        Method::MeanTeacher,
        Method::TemporalEnsembling,
        Method::Vat,
        Method::VatEntmin,
        Method::PseudoLabel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Supervised => "supervised",
            Method::PiModel => "pi-model",
            Method::MeanTeacher => "mean-teacher",
            Method::TemporalEnsembling => "temporal-ensembling",
            Method::Vat => "vat",
            Method::VatEntmin => "vat-entmin",
            Method::PseudoLabel => "pseudo-label",
        }
    }

    pub fn uses_teacher(self) -> bool {
        self == Method::MeanTeacher
    }

    pub fn uses_ensemble(self) -> bool {
        self == Method::TemporalEnsembling
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// A method and its hyperparameters. Fields that the method does not use are
/// ignored but still validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    pub max_consistency: f64,
    pub ramp_length: usize,
    pub vat_epsilon: f64,
    pub vat_xi: f64,
    pub ema_decay: f64,
    pub pseudo_threshold: f64,
    pub entropy_multiplier: f64,
}

/// Ramp length used by the desk-scale defaults (2000 total steps).
pub const DEFAULT_RAMP_LENGTH: usize = 800;

impl MethodConfig {
    /// Per-method defaults. Coefficients, thresholds and decays follow the
    /// reference hyperparameter table; the VAT radius is rescaled for 2-D
    /// inputs of unit scale.
    pub fn defaults(method: Method) -> Self {
        let max_consistency = match method {
            Method::Supervised => 0.0,
            Method::PiModel | Method::TemporalEnsembling => 20.0,
            Method::MeanTeacher => 8.0,
            Method::Vat | Method::VatEntmin => 0.3,
            Method::PseudoLabel => 1.0,
        };
        MethodConfig {
            method,
            max_consistency,
            ramp_length: DEFAULT_RAMP_LENGTH,
            vat_epsilon: 0.3,
            vat_xi: 1e-6,
            ema_decay: 0.95,
            pseudo_threshold: 0.95,
            entropy_multiplier: if method == Method::VatEntmin { 0.06 } else { 0.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.max_consistency >= 0.0 && self.max_consistency.is_finite()) {
            bad.push(format!("max_consistency = {} (must be >= 0)", self.max_consistency));
        }
        if self.ramp_length < 1 {
            bad.push("ramp_length = 0 (must be >= 1)".to_string());
        }
        if !(self.vat_epsilon > 0.0 && self.vat_epsilon.is_finite()) {
            bad.push(format!("vat_epsilon = {} (must be > 0)", self.vat_epsilon));
        }
        if !(self.vat_xi > 0.0 && self.vat_xi.is_finite()) {
            bad.push(format!("vat_xi = {} (must be > 0)", self.vat_xi));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            bad.push(format!("ema_decay = {} (must be in [0, 1])", self.ema_decay));
        }
        if !(self.pseudo_threshold > 0.0 && self.pseudo_threshold < 1.0) {
            bad.push(format!("pseudo_threshold = {} (must be in (0, 1))", self.pseudo_threshold));
        }
        if !(self.entropy_multiplier >= 0.0 && self.entropy_multiplier.is_finite()) {
            bad.push(format!("entropy_multiplier = {} (must be >= 0)", self.entropy_multiplier));
        }
        if self.method == Method::TemporalEnsembling && self.ema_decay >= 1.0 {
            bad.push("ema_decay = 1 leaves temporal-ensembling targets undefined".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {} config: {}", self.method, bad.join(", "))))
        }
    }
}

fn check_same_shape(g: &Graph, op: &str, a: Expr, b: Expr) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        return Err(Error::Shape(format!("{op}: {:?} vs {:?}", g.shape(a), g.shape(b))));
    }
    Ok(())
}

/// One-hot rows for `labels`.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (r, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Label { label: l, classes });
        }
        m.set(r, l, 1.0);
    }
    Ok(m)
}

/// Mean over rows of `-log softmax(logits)[label]`.
pub fn cross_entropy(g: &mut Graph, logits: Expr, labels: &[usize]) -> Result<Expr> {
    let (n, k) = g.shape(logits);
    if n == 0 || labels.len() != n {
        return Err(Error::Shape(format!("cross_entropy: {n} logit rows, {} labels", labels.len())));
    }
    let targets = g.constant(one_hot(labels, k)?);
    masked_log_likelihood(g, logits, targets, n)
}

/// `-(1/n) * sum(weights * log softmax(logits))`.
fn masked_log_likelihood(g: &mut Graph, logits: Expr, weights: Expr, n: usize) -> Result<Expr> {
    let p = g.softmax_rows(logits);
    let lp = g.log(p);
    let picked = g.mul(weights, lp)?;
    let total = g.sum(picked);
    Ok(g.scale(total, -1.0 / n as f64))
}

/// Mean squared difference between `softmax(student)` and `softmax(target)`,
/// with the target branch behind a stop-gradient.
pub fn consistency_mse(g: &mut Graph, student_logits: Expr, target_logits: Expr) -> Result<Expr> {
    check_same_shape(g, "consistency_mse", student_logits, target_logits)?;
    let target = g.stop_gradient(target_logits);
    let pt = g.softmax_rows(target);
    squared_gap(g, student_logits, pt)
}

/// Like [`consistency_mse`] against fixed target probabilities.
pub fn consistency_mse_to_probs(g: &mut Graph, student_logits: Expr, target_probs: &Matrix) -> Result<Expr> {
    if g.shape(student_logits) != target_probs.shape() {
        return Err(Error::Shape(format!(
            "consistency targets {:?} vs logits {:?}",
            target_probs.shape(),
            g.shape(student_logits)
        )));
    }
    let pt = g.constant(target_probs.clone());
    squared_gap(g, student_logits, pt)
}

fn squared_gap(g: &mut Graph, student_logits: Expr, target_probs: Expr) -> Result<Expr> {
    let ps = g.softmax_rows(student_logits);
    let diff = g.sub(ps, target_probs)?;
    let sq = g.square(diff);
    Ok(g.mean(sq))
}

/// Consistency between two independent stochastic passes of the same network.
pub fn pi_model_loss(
    g: &mut Graph,
    params: &BoundParams,
    x_unlabeled: Expr,
    stoch: &StochasticConfig,
    rng: &mut RngStream,
) -> Result<Expr> {
    let first = mlp_forward(g, params, x_unlabeled, stoch, rng)?;
    let second = mlp_forward(g, params, x_unlabeled, stoch, rng)?;
    consistency_mse(g, first, second)
}

/// Consistency between a student pass and a teacher pass. The teacher uses
/// its own stochastic draw and never receives gradient.
pub fn mean_teacher_loss(
    g: &mut Graph,
    student: &BoundParams,
    teacher: &BoundParams,
    x_unlabeled: Expr,
    stoch: &StochasticConfig,
    rng: &mut RngStream,
) -> Result<Expr> {
    let s = mlp_forward(g, student, x_unlabeled, stoch, rng)?;
    let t = mlp_forward(g, teacher, x_unlabeled, stoch, rng)?;
    consistency_mse(g, s, t)
}

/// Running, bias-corrected exponential average of per-example outputs.
///
/// `targets` holds `accumulated / (1 - decay^steps)`; it is updated in the
/// equivalent incremental form `t += w (z - t)` with
/// `w = (1 - decay) / (1 - decay^(steps+1))`, which makes the first update
/// and the constant-output fixpoint exact in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    targets: Matrix,
    decay: f64,
    steps: u64,
}

impl EnsembleState {
    pub fn new(rows: usize, classes: usize, decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::Config(format!("ensemble decay must be in [0, 1), got {decay}")));
        }
        Ok(EnsembleState { targets: Matrix::zeros(rows, classes), decay, steps: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Bias-corrected targets (zeros before the first update).
    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    /// The raw accumulator `sum_i (1 - decay) decay^(t-1-i) z_i`.
    pub fn accumulated(&self) -> Matrix {
        let scale = 1.0 - self.decay.powi(self.steps as i32);
        self.targets.map(|v| v * scale)
    }

    pub fn update(&mut self, new_outputs: &Matrix) -> Result<&Matrix> {
        if new_outputs.shape() != self.targets.shape() {
            return Err(Error::Shape(format!(
                "ensemble holds {:?}, got outputs {:?}",
                self.targets.shape(),
                new_outputs.shape()
            )));
        }
        let next = self.steps + 1;
        let weight = (1.0 - self.decay) / (1.0 - self.decay.powi(next as i32));
        if weight == 1.0 {
            self.targets = new_outputs.clone();
        } else {
            self.targets = self.targets.zip_map(new_outputs, |t, z| t + weight * (z - t));
        }
        self.steps = next;
        Ok(&self.targets)
    }
}

/// Pure form of [`EnsembleState::update`] with an explicit decay.
pub fn temporal_ensemble_targets(
    state: &EnsembleState,
    new_outputs: &Matrix,
    decay: f64,
) -> Result<(EnsembleState, Matrix)> {
    if !(0.0..1.0).contains(&decay) {
        return Err(Error::Config(format!("ensemble decay must be in [0, 1), got {decay}")));
    }
    let mut next = EnsembleState { decay, ..state.clone() };
    let targets = next.update(new_outputs)?.clone();
    Ok((next, targets))
}

/// Adversarial perturbation plus the rows whose gradient vanished.
#[derive(Debug, Clone, PartialEq)]
pub struct VatPerturbation {
    pub r_adv: Matrix,
    pub degenerate_rows: Vec<usize>,
}

/// Scales every row of `g` to L2 norm `epsilon`; all-zero rows stay zero
/// and are reported.
pub fn normalize_rows(g: &Matrix, epsilon: f64) -> VatPerturbation {
    let mut r_adv = Matrix::zeros(g.rows(), g.cols());
    let mut degenerate_rows = Vec::new();
    for r in 0..g.rows() {
        let norm = g.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            for (out, v) in r_adv.row_mut(r).iter_mut().zip(g.row(r)) {
                *out = epsilon * v / norm;
            }
        } else {
            degenerate_rows.push(r);
        }
    }
    VatPerturbation { r_adv, degenerate_rows }
}

/// `KL(softmax(target) || softmax(logits))` averaged over rows, with the
/// target behind a stop-gradient.
pub fn kl_divergence(g: &mut Graph, target_logits: Expr, logits: Expr) -> Result<Expr> {
    check_same_shape(g, "kl_divergence", target_logits, logits)?;
    let n = g.shape(logits).0;
    let t = g.stop_gradient(target_logits);
    let p = g.softmax_rows(t);
    let q = g.softmax_rows(logits);
    let lp = g.log(p);
    let lq = g.log(q);
    let gap = g.sub(lp, lq)?;
    let weighted = g.mul(p, gap)?;
    let total = g.sum(weighted);
    Ok(g.scale(total, 1.0 / n as f64))
}

/// One normalized gradient step from a small random probe:
/// `r ~ N(0, (xi / sqrt(d)) I)`, `g = grad_r KL(f(x) || f(x + r))`,
/// `r_adv = epsilon g / ||g||` per row.
pub fn vat_perturbation(
    params: &ParameterSet,
    x: &Matrix,
    epsilon: f64,
    xi: f64,
    rng: &mut RngStream,
) -> Result<VatPerturbation> {
    if !(epsilon > 0.0 && xi > 0.0) {
        return Err(Error::Config(format!("VAT needs epsilon > 0 and xi > 0, got {epsilon}, {xi}")));
    }
    let (n, d) = x.shape();
    let probe_std = (xi / (d as f64).sqrt()).sqrt();
    let probe = rng.normal_matrix(n, d, probe_std);
    let grad = vat_probe_gradient(params, x, &probe)?;
    Ok(normalize_rows(&grad, epsilon))
}

/// Gradient of `KL(f(x) || f(x + r))` with respect to `r`, evaluated at `probe`.
pub fn vat_probe_gradient(params: &ParameterSet, x: &Matrix, probe: &Matrix) -> Result<Matrix> {
    let mut g = Graph::new();
    let bound = params.bind_constants(&mut g);
    let xc = g.constant(x.clone());
    let r = g.input("vat.r", probe.shape())?;
    let xr = g.add(xc, r)?;
    let mut unused = RngStream::new(0);
    let clean = mlp_forward(&mut g, &bound, xc, &StochasticConfig::DETERMINISTIC, &mut unused)?;
    let perturbed = mlp_forward(&mut g, &bound, xr, &StochasticConfig::DETERMINISTIC, &mut unused)?;
    let kl = kl_divergence(&mut g, clean, perturbed)?;
    let bindings: Bindings = [("vat.r".to_string(), probe.clone())].into_iter().collect();
    let grad = g.gradient(kl, &bindings, &[r])?;
    Ok(grad.get("vat.r").cloned().expect("requested gradient"))
}

/// KL between the clean prediction (stop-gradient) and the prediction at
/// `x + r_adv`. `r_adv` is placed behind a stop-gradient.
pub fn vat_loss_with_perturbation(g: &mut Graph, params: &BoundParams, x: Expr, r_adv: Expr) -> Result<Expr> {
    let r = g.stop_gradient(r_adv);
    let xr = g.add(x, r)?;
    let mut unused = RngStream::new(0);
    let clean = mlp_forward(g, params, x, &StochasticConfig::DETERMINISTIC, &mut unused)?;
    let perturbed = mlp_forward(g, params, xr, &StochasticConfig::DETERMINISTIC, &mut unused)?;
    kl_divergence(g, clean, perturbed)
}

/// Full VAT term: computes `r_adv` from the current parameter values and
/// builds the consistency loss on the student graph.
pub fn vat_loss(
    g: &mut Graph,
    bound: &BoundParams,
    params: &ParameterSet,
    x_unlabeled: &Matrix,
    config: &MethodConfig,
    rng: &mut RngStream,
) -> Result<(Expr, VatPerturbation)> {
    let pert = vat_perturbation(params, x_unlabeled, config.vat_epsilon, config.vat_xi, rng)?;
    let x = g.constant(x_unlabeled.clone());
    let r = g.constant(pert.r_adv.clone());
    let loss = vat_loss_with_perturbation(g, bound, x, r)?;
    Ok((loss, pert))
}

/// Mean over rows of the prediction entropy `-sum_k p_k log p_k`.
pub fn entropy_loss(g: &mut Graph, logits: Expr) -> Result<Expr> {
    let n = g.shape(logits).0;
    if n == 0 {
        return Err(Error::Shape("entropy_loss on an empty batch".into()));
    }
    let p = g.softmax_rows(logits);
    let lp = g.log(p);
    let plp = g.mul(p, lp)?;
    let total = g.sum(plp);
    Ok(g.scale(total, -1.0 / n as f64))
}

/// Confidence mask and pseudo-labels for rows of `probs`: rows whose largest
/// probability exceeds `threshold` get their argmax class.
pub fn pseudo_labels(probs: &Matrix, threshold: f64) -> Vec<Option<usize>> {
    (0..probs.rows())
        .map(|r| {
            let row = probs.row(r);
            let k = argmax(row);
            (row[k] > threshold).then_some(k)
        })
        .collect()
}

/// Cross-entropy against confident argmax labels, summed over the confident
/// rows and divided by the full batch size. `logits_value` must be the value
/// of `logits`; mask and labels enter as constants.
pub fn pseudo_label_loss(g: &mut Graph, logits: Expr, logits_value: &Matrix, threshold: f64) -> Result<Expr> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("pseudo-label threshold must be in (0, 1), got {threshold}")));
    }
    let (n, k) = g.shape(logits);
    if logits_value.shape() != (n, k) {
        return Err(Error::Shape(format!("logit values {:?} vs expression {:?}", logits_value.shape(), (n, k))));
    }
    let mut weights = Matrix::zeros(n, k);
    for (r, label) in pseudo_labels(&logits_value.softmax_rows(), threshold).into_iter().enumerate() {
        if let Some(c) = label {
            weights.set(r, c, 1.0);
        }
    }
    let w = g.constant(weights);
    masked_log_likelihood(g, logits, w, n)
}

/// Sigmoid-shaped ramp `max * exp(-5 (1 - t)^2)`, `t = min(step / ramp_length, 1)`.
pub fn ramp_weight(step: usize, ramp_length: usize, max_coefficient: f64) -> f64 {
    let ramp_length = ramp_length.max(1);
    if step >= ramp_length {
        return max_coefficient;
    }
    let t = step as f64 / ramp_length as f64;
    max_coefficient * (-5.0 * (1.0 - t) * (1.0 - t)).exp()
}

/// Everything a training step feeds into [`total_loss`].
pub struct StepInputs<'a> {
    /// Current parameter values (needed for VAT's inner gradient).
    pub params: &'a ParameterSet,
    /// The same parameters as graph inputs.
    pub bound: &'a BoundParams,
    /// Bindings for `bound`.
    pub bindings: &'a Bindings,
    pub labeled_x: &'a Matrix,
    pub labels: &'a [usize],
    /// Unlabeled batch; may have zero rows.
    pub unlabeled_x: &'a Matrix,
    pub teacher: Option<&'a ParameterSet>,
    /// Ensemble targets aligned with `unlabeled_x`.
    pub ensemble_targets: Option<&'a Matrix>,
    pub stoch: StochasticConfig,
    pub step: usize,
}

/// The composed loss and its parts.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Expr,
    pub supervised: Expr,
    pub unsupervised: Option<Expr>,
    pub entropy: Option<Expr>,
    pub weight: f64,
}

/// `CE(labeled) + ramp(step) * method_loss(unlabeled)`, plus
/// `entropy_multiplier * entropy(unlabeled)` for VAT + EntMin.
///
/// Terms with a zero coefficient or an empty unlabeled batch are left out of
/// the graph entirely, and the labeled pass is deterministic, so
/// such a configuration follows the supervised trajectory bit for bit.
pub fn total_loss(
    g: &mut Graph,
    config: &MethodConfig,
    inputs: &StepInputs<'_>,
    method_rng: &mut RngStream,
) -> Result<LossTerms> {
    config.validate()?;
    let xl = g.constant(inputs.labeled_x.clone());
    let mut unused = RngStream::new(0);
    let labeled_logits = mlp_forward(g, inputs.bound, xl, &StochasticConfig::DETERMINISTIC, &mut unused)?;
    let supervised = cross_entropy(g, labeled_logits, inputs.labels)?;

    let weight = ramp_weight(inputs.step, config.ramp_length, config.max_consistency);
    let has_unlabeled = inputs.unlabeled_x.rows() > 0;
    let mut total = supervised;
    let mut unsupervised = None;
    let mut entropy = None;

    if config.method != Method::Supervised && has_unlabeled && weight != 0.0 {
        let xu = g.constant(inputs.unlabeled_x.clone());
        let term = match config.method {
            Method::Supervised => unreachable!("handled above"),
            Method::PiModel => pi_model_loss(g, inputs.bound, xu, &inputs.stoch, method_rng)?,
            Method::MeanTeacher => {
                let teacher = inputs
                    .teacher
                    .ok_or_else(|| Error::Config("mean-teacher needs teacher parameters".into()))?;
                let tb = teacher.bind_constants(g);
                mean_teacher_loss(g, inputs.bound, &tb, xu, &inputs.stoch, method_rng)?
            }
            Method::TemporalEnsembling => {
                let targets = inputs
                    .ensemble_targets
                    .ok_or_else(|| Error::Config("temporal-ensembling needs ensemble targets".into()))?;
                let logits = mlp_forward(g, inputs.bound, xu, &inputs.stoch, method_rng)?;
                consistency_mse_to_probs(g, logits, targets)?
            }
            Method::Vat | Method::VatEntmin => {
                vat_loss(g, inputs.bound, inputs.params, inputs.unlabeled_x, config, method_rng)?.0
            }
            Method::PseudoLabel => {
                let logits = mlp_forward(g, inputs.bound, xu, &inputs.stoch, method_rng)?;
                let value = g.evaluate(logits, inputs.bindings)?;
                pseudo_label_loss(g, logits, &value, config.pseudo_threshold)?
            }
        };
        let scaled = g.scale(term, weight);
        total = g.add(total, scaled)?;
        unsupervised = Some(term);
    }

    if config.method == Method::VatEntmin && has_unlabeled && config.entropy_multiplier != 0.0 {
        let xu = g.constant(inputs.unlabeled_x.clone());
        let mut unused = RngStream::new(0);
        let logits = mlp_forward(g, inputs.bound, xu, &StochasticConfig::DETERMINISTIC, &mut unused)?;
        let term = entropy_loss(g, logits)?;
        let scaled = g.scale(term, config.entropy_multiplier);
        total = g.add(total, scaled)?;
        entropy = Some(term);
    }

    Ok(LossTerms { total, supervised, unsupervised, entropy, weight })
}
