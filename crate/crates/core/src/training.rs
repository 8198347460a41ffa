//! Adam, the learning-rate schedule, the training loop and
//! best-validation model selection.

use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::datasets::SslSplit;
use crate::error::{Error, Result};
use crate::losses::{total_loss, EnsembleState, Method, MethodConfig, StepInputs};
use crate::matrix::Matrix;
use crate::model::{ema_update, mlp_forward, mlp_init, ParameterSet, StochasticConfig, DEFAULT_HIDDEN};
use crate::rng::RngStream;

/// Training hyperparameters shared by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub batch_labeled: usize,
    pub batch_unlabeled: usize,
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_step: usize,
    pub eval_every: usize,
    pub weight_penalty_l1: f64,
    pub weight_penalty_l2: f64,
    pub hidden: Vec<usize>,
    pub stochastic: StochasticConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 2000,
            batch_labeled: 32,
            batch_unlabeled: 64,
            initial_lr: 0.003,
            lr_decay_factor: 0.2,
            lr_decay_step: 1600,
            eval_every: 50,
            weight_penalty_l1: 0.0,
            weight_penalty_l2: 0.0001,
            hidden: DEFAULT_HIDDEN.to_vec(),
            stochastic: StochasticConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.total_steps < 1 {
            bad.push("total_steps must be >= 1".to_string());
        }
        if self.eval_every < 1 {
            bad.push("eval_every must be >= 1".to_string());
        }
        if self.batch_labeled < 1 {
            bad.push("batch_labeled must be >= 1".to_string());
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            bad.push(format!("initial_lr = {} must be > 0", self.initial_lr));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor.is_finite()) {
            bad.push(format!("lr_decay_factor = {} must be > 0", self.lr_decay_factor));
        }
        if !(self.weight_penalty_l1 >= 0.0 && self.weight_penalty_l2 >= 0.0) {
            bad.push("weight penalties must be >= 0".to_string());
        }
        if self.hidden.contains(&0) {
            bad.push("hidden widths must be positive".to_string());
        }
        if let Err(e) = self.stochastic.validate() {
            bad.push(e.to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid train config: {}", bad.join(", "))))
        }
    }

    pub fn layer_sizes(&self, input_dim: usize, classes: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim];
        sizes.extend(&self.hidden);
        sizes.push(classes);
        sizes
    }
}

/// `initial_lr` before `lr_decay_step`, `initial_lr * lr_decay_factor` from it on.
pub fn lr_at(step: usize, config: &TrainConfig) -> f64 {
    if step < config.lr_decay_step {
        config.initial_lr
    } else {
        config.initial_lr * config.lr_decay_factor
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: ParameterSet,
    pub second_moment: ParameterSet,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ParameterSet) -> Self {
        OptimizerState { first_moment: params.zeros_like(), second_moment: params.zeros_like(), step: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &ParameterSet,
    grads: &ParameterSet,
    state: &OptimizerState,
    lr: f64,
    hyper: AdamHyper,
) -> Result<(ParameterSet, OptimizerState)> {
    if !params.same_shape(grads) || !params.same_shape(&state.first_moment) {
        return Err(Error::Shape("adam_step: parameters, gradients and state differ in shape".into()));
    }
    let step = state.step + 1;
    let c1 = 1.0 - hyper.beta1.powi(step as i32);
    let c2 = 1.0 - hyper.beta2.powi(step as i32);
    let mut next = params.clone();
    let mut m = state.first_moment.clone();
    let mut v = state.second_moment.clone();
    for (li, layer) in next.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers()[li];
        let ml = &mut m.layers_mut()[li];
        let vl = &mut v.layers_mut()[li];
        let pairs = [
            (&mut layer.weights, &g.weights, &mut ml.weights, &mut vl.weights),
            (&mut layer.bias, &g.bias, &mut ml.bias, &mut vl.bias),
        ];
        for (p, g, m, v) in pairs {
            let it = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
            for ((p, &g), (m, v)) in it {
                *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
                *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
            }
        }
    }
    Ok((next, OptimizerState { first_moment: m, second_moment: v, step }))
}

/// `l1 * sum|w| + l2 * sum w^2` over weight matrices (biases are not
/// penalized) and its gradient. The L1 subgradient at zero is zero.
pub fn weight_penalty(params: &ParameterSet, l1: f64, l2: f64) -> (f64, ParameterSet) {
    let mut grad = params.zeros_like();
    let mut value = 0.0;
    for (layer, g) in params.layers().iter().zip(grad.layers_mut()) {
        for (w, gw) in layer.weights.data().iter().zip(g.weights.data_mut()) {
            value += l1 * w.abs() + l2 * w * w;
            let sign = if *w > 0.0 {
                1.0
            } else if *w < 0.0 {
                -1.0
            } else {
                0.0
            };
            *gw = l1 * sign + 2.0 * l2 * w;
        }
    }
    (value, grad)
}

fn add_params(a: &ParameterSet, b: &ParameterSet) -> ParameterSet {
    let mut out = a.clone();
    for (l, r) in out.layers_mut().iter_mut().zip(b.layers()) {
        l.weights = l.weights.zip_map(&r.weights, |x, y| x + y);
        l.bias = l.bias.zip_map(&r.bias, |x, y| x + y);
    }
    out
}

/// Endless shuffled passes over `0..len`.
#[derive(Debug, Clone)]
struct CycleSampler {
    order: Vec<usize>,
    pos: usize,
    rng: RngStream,
}

impl CycleSampler {
    fn new(len: usize, rng: RngStream) -> Self {
        CycleSampler { order: (0..len).collect(), pos: len, rng }
    }

    /// Next `size` indices and whether a new pass began while drawing them.
    fn next_batch(&mut self, size: usize) -> (Vec<usize>, bool) {
        let mut batch = Vec::with_capacity(size);
        let mut new_pass = false;
        if self.order.is_empty() {
            return (batch, false);
        }
        while batch.len() < size {
            if self.pos == self.order.len() {
                self.order.sort_unstable();
                self.rng.shuffle(&mut self.order);
                self.pos = 0;
                new_pass = true;
            }
            batch.push(self.order[self.pos]);
            self.pos += 1;
        }
        (batch, new_pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub train_loss: f64,
    pub val_error: f64,
    pub test_error: f64,
    pub unlabeled_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub step: usize,
    pub val_error: f64,
    pub test_error: f64,
}

/// Metric trace of one seeded run plus the best-validation selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub method: MethodConfig,
    pub config: TrainConfig,
    pub trace: Vec<TraceEntry>,
    pub selected: Selection,
}

impl RunRecord {
    /// The trace entry that was selected.
    pub fn selected_entry(&self) -> &TraceEntry {
        self.trace.iter().find(|e| e.step == self.selected.step).expect("selection comes from the trace")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Index of the lowest validation error; ties go to the earliest entry.
pub fn select_best(trace: &[TraceEntry]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in trace.iter().enumerate() {
        if best.is_none_or(|b| e.val_error < trace[b].val_error) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePoint {
    pub step: usize,
    pub mean_max_probability: f64,
}

/// Mean over rows of the largest class probability.
pub fn mean_confidence(params: &ParameterSet, points: &Matrix) -> Result<f64> {
    let probs = params.probabilities(points)?;
    if probs.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = (0..probs.rows()).map(|r| probs.row(r).iter().copied().fold(0.0, f64::max)).sum();
    Ok(total / probs.rows() as f64)
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    /// Parameters at the selected (best-validation) step.
    pub best_params: ParameterSet,
    pub final_params: ParameterSet,
    /// Present when a confidence grid was supplied; includes step 0.
    pub confidence: Option<Vec<ConfidencePoint>>,
}

const STREAM_LABELED_BATCHES: u64 = 11;
const STREAM_UNLABELED_BATCHES: u64 = 12;
const STREAM_METHOD: u64 = 14;

/// Trains one model and returns its [`RunRecord`].
pub fn train(split: &SslSplit, method: &MethodConfig, config: &TrainConfig, seed: u64) -> Result<RunRecord> {
    Ok(train_full(split, method, config, seed, None)?.record)
}

/// [`train`] that also records mean max-probability over `grid` at step 0
/// and at every evaluation.
pub fn confidence_trace(
    split: &SslSplit,
    method: &MethodConfig,
    config: &TrainConfig,
    seed: u64,
    grid: &Matrix,
) -> Result<(RunRecord, Vec<ConfidencePoint>)> {
    let out = train_full(split, method, config, seed, Some(grid))?;
    Ok((out.record, out.confidence.expect("grid supplied")))
}

/// The training loop.
///
/// Labeled and unlabeled minibatches come from independent shuffled passes.
/// Randomness is split into fixed streams (labeled batches, unlabeled
/// batches, method noise), so a method whose unlabeled
/// terms vanish follows the supervised trajectory exactly.
pub fn train_full(
    split: &SslSplit,
    method: &MethodConfig,
    config: &TrainConfig,
    seed: u64,
    confidence_grid: Option<&Matrix>,
) -> Result<TrainOutcome> {
    method.validate()?;
    config.validate()?;
    if split.labeled.is_empty() {
        return Err(Error::Size("training needs at least one labeled example".into()));
    }
    let classes = split.num_classes();
    let input_dim = split.labeled.points().cols();
    let mut params = mlp_init(&config.layer_sizes(input_dim, classes), seed)?;
    let mut opt = OptimizerState::new(&params);
    let mut teacher = method.method.uses_teacher().then(|| params.clone());

    let unlabeled_points = split.unlabeled.points();
    let use_unlabeled = method.method != Method::Supervised && !split.unlabeled.is_empty();
    let mut ensemble = if method.method.uses_ensemble() && use_unlabeled {
        Some(EnsembleState::new(unlabeled_points.rows(), classes, method.ema_decay)?)
    } else {
        None
    };

    let mut labeled_batches = CycleSampler::new(split.labeled.len(), RngStream::with_stream(seed, STREAM_LABELED_BATCHES));
    let mut unlabeled_batches =
        CycleSampler::new(unlabeled_points.rows(), RngStream::with_stream(seed, STREAM_UNLABELED_BATCHES));
    let mut method_rng = RngStream::with_stream(seed, STREAM_METHOD);

    let batch_labeled = config.batch_labeled.min(split.labeled.len());
    let batch_unlabeled = config.batch_unlabeled.min(unlabeled_points.rows());

    let mut trace = Vec::with_capacity(config.total_steps / config.eval_every);
    let mut best: Option<(f64, ParameterSet)> = None;
    let mut confidence = match confidence_grid {
        Some(grid) => Some(vec![ConfidencePoint { step: 0, mean_max_probability: mean_confidence(&params, grid)? }]),
        None => None,
    };

    for step in 0..config.total_steps {
        let (lab_idx, _) = labeled_batches.next_batch(batch_labeled);
        let labeled_x = split.labeled.points().select_rows(&lab_idx);
        let labels: Vec<usize> = lab_idx.iter().map(|&i| split.labeled.labels()[i]).collect();

        let (unl_idx, new_pass) = if use_unlabeled {
            unlabeled_batches.next_batch(batch_unlabeled)
        } else {
            (Vec::new(), false)
        };
        let unlabeled_x = unlabeled_points.select_rows(&unl_idx);

        if let (Some(state), true) = (ensemble.as_mut(), new_pass) {
            let outputs = stochastic_probabilities(&params, unlabeled_points, &config.stochastic, &mut method_rng)?;
            state.update(&outputs)?;
        }
        let ensemble_targets = ensemble.as_ref().map(|s| s.targets().select_rows(&unl_idx));

        let mut g = Graph::new();
        let (bound, bindings) = params.bind_inputs(&mut g, "")?;
        let inputs = StepInputs {
            params: &params,
            bound: &bound,
            bindings: &bindings,
            labeled_x: &labeled_x,
            labels: &labels,
            unlabeled_x: &unlabeled_x,
            teacher: teacher.as_ref(),
            ensemble_targets: ensemble_targets.as_ref(),
            stoch: config.stochastic,
            step,
        };
        let terms = total_loss(&mut g, method, &inputs, &mut method_rng)?;
        let (loss, grad) = g.value_and_gradient(terms.total, &bindings, &bound.exprs())?;
        let (penalty, penalty_grad) = weight_penalty(&params, config.weight_penalty_l1, config.weight_penalty_l2);
        let train_loss = loss + penalty;
        if !train_loss.is_finite() {
            return Err(Error::Divergence { step, loss: train_loss });
        }
        let grads = add_params(&params.gradient_as_params(&grad, ""), &penalty_grad);
        let (next, next_opt) = adam_step(&params, &grads, &opt, lr_at(step, config), AdamHyper::default())?;
        if !next.values().all(f64::is_finite) {
            return Err(Error::Divergence { step, loss: f64::NAN });
        }
        params = next;
        opt = next_opt;
        if let Some(t) = teacher.as_mut() {
            *t = ema_update(t, &params, method.ema_decay)?;
        }

        let done = step + 1;
        if done % config.eval_every == 0 {
            let entry = TraceEntry {
                step: done,
                train_loss,
                val_error: params.error_rate(split.validation.points(), split.validation.labels())?,
                test_error: params.error_rate(split.test.points(), split.test.labels())?,
                unlabeled_error: if split.unlabeled.is_empty() {
                    None
                } else {
                    Some(params.error_rate(unlabeled_points, split.unlabeled.audit_labels())?)
                },
            };
            if best.as_ref().is_none_or(|(v, _)| entry.val_error < *v) {
                best = Some((entry.val_error, params.clone()));
            }
            if let (Some(c), Some(grid)) = (confidence.as_mut(), confidence_grid) {
                c.push(ConfidencePoint { step: done, mean_max_probability: mean_confidence(&params, grid)? });
            }
            trace.push(entry);
        }
    }

    let (selected, best_params) = match select_best(&trace) {
        Some(i) => {
            let e = &trace[i];
            let params_at_best = best.map(|(_, p)| p).expect("best tracked alongside trace");
            (Selection { step: e.step, val_error: e.val_error, test_error: e.test_error }, params_at_best)
        }
        // No evaluation happened (total_steps < eval_every): fall back to the final model.
        None => {
            let val_error = params.error_rate(split.validation.points(), split.validation.labels())?;
            let test_error = params.error_rate(split.test.points(), split.test.labels())?;
            (Selection { step: config.total_steps, val_error, test_error }, params.clone())
        }
    };
    let record = RunRecord { seed, method: *method, config: config.clone(), trace, selected };
    Ok(TrainOutcome { record, best_params, final_params: params, confidence })
}

fn stochastic_probabilities(
    params: &ParameterSet,
    points: &Matrix,
    stoch: &StochasticConfig,
    rng: &mut RngStream,
) -> Result<Matrix> {
    let mut g = Graph::new();
    let bound = params.bind_constants(&mut g);
    let x = g.constant(points.clone());
    let logits = mlp_forward(&mut g, &bound, x, stoch, rng)?;
    let probs = g.softmax_rows(logits);
    Ok(g.evaluate(probs, &Default::default())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Bindings, Graph};
    use crate::datasets::{split_ssl, two_moons};
    use crate::model::Layer;

    fn scalar_params(v: f64) -> ParameterSet {
        ParameterSet::from_layers(vec![Layer { name: "l".into(), weights: Matrix::scalar(v), bias: Matrix::scalar(0.0) }])
            .unwrap()
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for &g in &[0.5, -3.0, 1e-3] {
            let p = scalar_params(1.0);
            let mut grad = p.zeros_like();
            grad.layers_mut()[0].weights = Matrix::scalar(g);
            let (next, state) = adam_step(&p, &grad, &OptimizerState::new(&p), 0.01, AdamHyper::default()).unwrap();
            let moved = next.layers()[0].weights.item() - 1.0;
            let expected = -0.01 * g.signum() / (1.0 + 1e-8 / g.abs());
            assert!((moved - expected).abs() < 1e-15, "{moved} vs {expected}");
            assert_eq!(state.step, 1);
        }
    }

    #[test]
    fn adam_zero_gradient_is_fixpoint() {
        let p = mlp_init(&[2, 4, 2], 0).unwrap();
        let zero = p.zeros_like();
        let mut state = OptimizerState::new(&p);
        let mut cur = p.clone();
        for _ in 0..10 {
            let (n, s) = adam_step(&cur, &zero, &state, 0.1, AdamHyper::default()).unwrap();
            cur = n;
            state = s;
        }
        assert_eq!(cur, p);
        let other = mlp_init(&[2, 3, 2], 0).unwrap();
        assert!(adam_step(&p, &other, &OptimizerState::new(&p), 0.1, AdamHyper::default()).is_err());
    }

    #[test]
    fn lr_schedule() {
        let c = TrainConfig { initial_lr: 0.5, lr_decay_step: 10, lr_decay_factor: 0.2, ..Default::default() };
        assert_eq!(lr_at(9, &c), 0.5);
        assert_eq!(lr_at(10, &c), 0.5 * 0.2);
        let flat = TrainConfig { lr_decay_factor: 1.0, ..c };
        assert_eq!(lr_at(0, &flat), lr_at(1_000_000, &flat));
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let p = mlp_init(&[2, 3, 2], 4).unwrap();
        let (l1, l2) = (0.001, 0.0001);
        let (_, grad) = weight_penalty(&p, 0.0, l2);
        for (layer, g) in p.layers().iter().zip(grad.layers()) {
            for (w, gw) in layer.weights.data().iter().zip(g.weights.data()) {
                assert_eq!(*gw, 2.0 * l2 * w);
            }
            assert!(g.bias.data().iter().all(|&b| b == 0.0));
        }
        // Finite differences of the full penalty through the graph: l2 * sum(w^2).
        let mut graph = Graph::new();
        let w = graph.input("w", p.layers()[0].weights.shape()).unwrap();
        let sq = graph.square(w);
        let s = graph.sum(sq);
        let pen = graph.scale(s, l2);
        let b: Bindings = [("w".to_string(), p.layers()[0].weights.clone())].into_iter().collect();
        let fd = graph.finite_difference_gradient(pen, &b, &[w], 1e-5).unwrap();
        let (_, both) = weight_penalty(&p, 0.0, l2);
        for (a, e) in fd.get("w").unwrap().data().iter().zip(both.layers()[0].weights.data()) {
            assert!((a - e).abs() <= 1e-4 * e.abs().max(1e-9));
        }
        let zero = scalar_params(0.0);
        assert_eq!(weight_penalty(&zero, l1, l2).1.layers()[0].weights.item(), 0.0);
        let (v, _) = weight_penalty(&scalar_params(-2.0), l1, l2);
        assert!((v - (l1 * 2.0 + l2 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn selection_prefers_earliest_minimum() {
        let e = |step, v| TraceEntry { step, train_loss: 0.0, val_error: v, test_error: v / 2.0, unlabeled_error: None };
        let trace = vec![e(10, 0.3), e(20, 0.1), e(30, 0.1), e(40, 0.2)];
        assert_eq!(select_best(&trace), Some(1));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn sampler_cycles_cover_pool() {
        let mut s = CycleSampler::new(5, RngStream::new(1));
        let (a, first) = s.next_batch(5);
        assert!(first);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        let (b, new_pass) = s.next_batch(3);
        assert!(new_pass);
        assert_eq!(b.len(), 3);
        let mut empty = CycleSampler::new(0, RngStream::new(1));
        assert_eq!(empty.next_batch(4), (vec![], false));
    }

    fn small_split() -> SslSplit {
        let d = two_moons(400, 0.1, 0).unwrap();
        split_ssl(&d, 6, 200, 100, 94, 1).unwrap()
    }

    #[test]
    fn bookkeeping_and_determinism() {
        let split = small_split();
        let cfg = TrainConfig { total_steps: 200, eval_every: 20, ..Default::default() };
        let sup = MethodConfig::defaults(Method::Supervised);
        let a = train(&split, &sup, &cfg, 3).unwrap();
        assert_eq!(a.trace.len(), 10);
        let best = a.trace.iter().map(|e| e.val_error).fold(f64::INFINITY, f64::min);
        assert_eq!(a.selected.val_error, best);
        assert_eq!(a.selected_entry().test_error, a.selected.test_error);
        assert_eq!(a, train(&split, &sup, &cfg, 3).unwrap());
        let json: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        for key in ["seed", "method", "config", "trace", "selected"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        for key in ["step", "train_loss", "val_error", "test_error", "unlabeled_error"] {
            assert!(json["trace"][0].get(key).is_some(), "{key}");
        }
        let back: RunRecord = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn every_method_trains() {
        let split = small_split();
        let cfg = TrainConfig { total_steps: 40, eval_every: 20, ..Default::default() };
        for m in Method::ALL {
            let r = train(&split, &MethodConfig::defaults(m), &cfg, 0).unwrap();
            assert_eq!(r.trace.len(), 2);
            assert!(r.trace.iter().all(|e| e.train_loss.is_finite()));
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let split = small_split();
        let cfg = TrainConfig { total_steps: 50, initial_lr: 1e200, ..Default::default() };
        match train(&split, &MethodConfig::defaults(Method::Supervised), &cfg, 0) {
            Err(Error::Divergence { step, .. }) => assert!(step < 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn confidence_starts_at_step_zero_and_stays_bounded() {
        let split = small_split();
        let cfg = TrainConfig { total_steps: 100, eval_every: 25, ..Default::default() };
        let grid = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.5], [-1.0, 1.0], [2.0, -0.5]]);
        let (_, conf) = confidence_trace(&split, &MethodConfig::defaults(Method::Supervised), &cfg, 0, &grid).unwrap();
        assert_eq!(conf.len(), 5);
        assert_eq!(conf[0].step, 0);
        assert!(conf.iter().all(|c| (0.5..=1.0).contains(&c.mean_max_probability)));
        let zero = mlp_init(&[2, 10, 10, 10, 2], 0).unwrap().zeros_like();
        assert_eq!(mean_confidence(&zero, &grid).unwrap(), 0.5);
    }
}
