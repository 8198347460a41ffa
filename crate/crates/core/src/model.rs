//! The small ReLU MLP classifier, its parameter container and the
//! exponential-moving-average update used for teacher models.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::autodiff::{Bindings, Expr, Gradient, Graph};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

/// Hidden widths of the default toy classifier: three layers of ten units.
pub const DEFAULT_HIDDEN: [usize; 3] = [10, 10, 10];

/// One affine layer. `weights` is `fan_in x fan_out`, `bias` is `1 x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub weights: Matrix,
    pub bias: Matrix,
}

/// Weights and biases of an MLP, input layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Graph nodes standing for a [`ParameterSet`]: `(weights, bias)` per layer.
#[derive(Debug, Clone)]
pub struct BoundParams {
    layers: Vec<(Expr, Expr)>,
}

impl BoundParams {
    /// All weight and bias nodes, in layer order.
    pub fn exprs(&self) -> Vec<Expr> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

/// Input noise and dropout applied during stochastic forward passes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticConfig {
    pub input_noise_std: f64,
    pub dropout_rate: f64,
}

impl StochasticConfig {
    pub const DETERMINISTIC: StochasticConfig = StochasticConfig { input_noise_std: 0.0, dropout_rate: 0.0 };

    pub fn new(input_noise_std: f64, dropout_rate: f64) -> Result<Self> {
        let c = StochasticConfig { input_noise_std, dropout_rate };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_noise_std >= 0.0 && self.input_noise_std.is_finite()) {
            return Err(Error::Config(format!("input_noise_std must be >= 0, got {}", self.input_noise_std)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate)));
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.input_noise_std == 0.0 && self.dropout_rate == 0.0
    }
}

impl Default for StochasticConfig {
    fn default() -> Self {
        StochasticConfig { input_noise_std: 0.15, dropout_rate: 0.0 }
    }
}

/// Glorot-uniform weights and zero biases for the given layer sizes.
pub fn mlp_init(layer_sizes: &[usize], seed: u64) -> Result<ParameterSet> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::Config(format!("layer sizes must be >= 2 positive entries, got {layer_sizes:?}")));
    }
    let mut rng = RngStream::new(seed);
    let layers = layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.uniform(-limit, limit)).collect();
            Layer {
                name: format!("layer{i}"),
                weights: Matrix::from_vec(fan_in, fan_out, data),
                bias: Matrix::zeros(1, fan_out),
            }
        })
        .collect();
    Ok(ParameterSet { layer_sizes: layer_sizes.to_vec(), layers })
}

impl ParameterSet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Config("parameter set needs at least one layer".into()));
        };
        let mut sizes = vec![first.weights.rows()];
        for layer in &layers {
            let (fan_in, fan_out) = layer.weights.shape();
            if fan_in != *sizes.last().expect("non-empty") {
                return Err(Error::Shape(format!(
                    "layer `{}` expects {fan_in} inputs but the previous layer has {} outputs",
                    layer.name,
                    sizes.last().expect("non-empty")
                )));
            }
            if layer.bias.shape() != (1, fan_out) {
                return Err(Error::Shape(format!("bias of `{}` must be 1x{fan_out}", layer.name)));
            }
            if !layer.weights.is_finite() || !layer.bias.is_finite() {
                return Err(Error::Config(format!("layer `{}` holds non-finite values", layer.name)));
            }
            sizes.push(fan_out);
        }
        Ok(ParameterSet { layer_sizes: sizes, layers })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().expect("at least two sizes")
    }

    /// Same shapes, every entry zero.
    pub fn zeros_like(&self) -> ParameterSet {
        self.map(|_| 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ParameterSet {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer { name: l.name.clone(), weights: l.weights.map(&f), bias: l.bias.map(&f) })
            .collect();
        ParameterSet { layer_sizes: self.layer_sizes.clone(), layers }
    }

    pub fn same_shape(&self, other: &ParameterSet) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    fn check_shape(&self, other: &ParameterSet) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "parameter sets differ: {:?} vs {:?}",
                self.layer_sizes, other.layer_sizes
            )))
        }
    }

    /// Flat view of all values, weights before bias within each layer.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.data().iter().chain(l.bias.data()).copied())
    }

    pub fn max_abs_diff(&self, other: &ParameterSet) -> f64 {
        self.values().zip(other.values()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn input_names(&self, prefix: &str, layer: &Layer) -> (String, String) {
        (format!("{prefix}{}.weight", layer.name), format!("{prefix}{}.bias", layer.name))
    }

    /// Declares every parameter as a named graph input and returns the
    /// matching bindings. Gradients with respect to these inputs flow to θ.
    pub fn bind_inputs(&self, g: &mut Graph, prefix: &str) -> Result<(BoundParams, Bindings)> {
        let mut bindings = Bindings::new();
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (wn, bn) = self.input_names(prefix, layer);
            let w = g.input(wn.clone(), layer.weights.shape())?;
            let b = g.input(bn.clone(), layer.bias.shape())?;
            bindings.insert(wn, layer.weights.clone());
            bindings.insert(bn, layer.bias.clone());
            layers.push((w, b));
        }
        Ok((BoundParams { layers }, bindings))
    }

    /// Embeds the parameters as constants; nothing upstream of them receives gradient.
    pub fn bind_constants(&self, g: &mut Graph) -> BoundParams {
        let layers = self
            .layers
            .iter()
            .map(|l| (g.constant(l.weights.clone()), g.constant(l.bias.clone())))
            .collect();
        BoundParams { layers }
    }

    /// Reassembles a gradient over inputs declared by [`ParameterSet::bind_inputs`].
    /// Parameters missing from the gradient get zeros.
    pub fn gradient_as_params(&self, grad: &Gradient, prefix: &str) -> ParameterSet {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let (wn, bn) = self.input_names(prefix, l);
                Layer {
                    name: l.name.clone(),
                    weights: grad.get(&wn).cloned().unwrap_or_else(|| Matrix::zeros(l.weights.rows(), l.weights.cols())),
                    bias: grad.get(&bn).cloned().unwrap_or_else(|| Matrix::zeros(1, l.bias.cols())),
                }
            })
            .collect();
        ParameterSet { layer_sizes: self.layer_sizes.clone(), layers }
    }

    /// Deterministic logits computed without building a graph.
    pub fn logits(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "inputs have {} columns, model expects {}",
                inputs.cols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut h = inputs.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weights);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(layer.bias.data()) {
                    *v += b;
                }
            }
            if i < last {
                z = z.map(|x| if x > 0.0 { x } else { 0.0 });
            }
            h = z;
        }
        Ok(h)
    }

    pub fn probabilities(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.logits(inputs)?.softmax_rows())
    }

    /// Argmax class per row (ties toward the lowest index).
    pub fn predict(&self, inputs: &Matrix) -> Result<Vec<usize>> {
        let logits = self.logits(inputs)?;
        Ok((0..logits.rows()).map(|r| crate::matrix::argmax(logits.row(r))).collect())
    }

    /// Fraction of rows whose predicted class differs from `labels`.
    pub fn error_rate(&self, inputs: &Matrix, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let predicted = self.predict(inputs)?;
        let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
        Ok(wrong as f64 / labels.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ParameterSet> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Builds the classifier graph: optional input noise, then affine + ReLU
/// (+ inverted dropout) per hidden layer, then an affine output layer.
/// Noise and dropout masks are drawn from `rng` and enter as constants.
pub fn mlp_forward(
    g: &mut Graph,
    params: &BoundParams,
    inputs: Expr,
    stoch: &StochasticConfig,
    rng: &mut RngStream,
) -> Result<Expr> {
    let (n, d) = g.shape(inputs);
    let Some(&(first_w, _)) = params.layers.first() else {
        return Err(Error::Config("empty parameter set".into()));
    };
    let expected = g.shape(first_w).0;
    if d != expected {
        return Err(Error::Shape(format!("inputs have {d} columns, model expects {expected}")));
    }
    let mut h = inputs;
    if stoch.input_noise_std > 0.0 {
        let noise = g.constant(rng.normal_matrix(n, d, stoch.input_noise_std));
        h = g.add(h, noise)?;
    }
    let last = params.layers.len() - 1;
    for (i, &(w, b)) in params.layers.iter().enumerate() {
        let z = g.matmul(h, w)?;
        h = g.add(z, b)?;
        if i < last {
            h = g.relu(h);
            if stoch.dropout_rate > 0.0 {
                let (rows, cols) = g.shape(h);
                let keep = 1.0 - stoch.dropout_rate;
                let data = (0..rows * cols)
                    .map(|_| if rng.uniform(0.0, 1.0) < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let mask = g.constant(Matrix::from_vec(rows, cols, data));
                h = g.mul(h, mask)?;
            }
        }
    }
    Ok(h)
}

/// `decay * teacher + (1 - decay) * student`, elementwise.
pub fn ema_update(teacher: &ParameterSet, student: &ParameterSet, decay: f64) -> Result<ParameterSet> {
    teacher.check_shape(student)?;
    if !(0.0..=1.0).contains(&decay) {
        return Err(Error::Config(format!("EMA decay must be in [0, 1], got {decay}")));
    }
    let layers = teacher
        .layers
        .iter()
        .zip(&student.layers)
        .map(|(t, s)| {
            let mix = |a: f64, b: f64| decay * a + (1.0 - decay) * b;
            Layer { name: t.name.clone(), weights: t.weights.zip_map(&s.weights, mix), bias: t.bias.zip_map(&s.bias, mix) }
        })
        .collect();
    Ok(ParameterSet { layer_sizes: teacher.layer_sizes.clone(), layers })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    name: String,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterDoc {
    layer_sizes: Vec<usize>,
    layers: Vec<LayerDoc>,
}

impl Serialize for ParameterSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ParameterDoc {
            layer_sizes: self.layer_sizes.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc { name: l.name.clone(), weights: l.weights.to_rows(), bias: l.bias.data().to_vec() })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ParameterSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = ParameterDoc::deserialize(deserializer)?;
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                if l.weights.iter().any(|r| r.len() != l.weights[0].len()) {
                    return Err(D::Error::custom(format!("ragged weights in `{}`", l.name)));
                }
                Ok(Layer { name: l.name, weights: Matrix::from_rows(&l.weights), bias: Matrix::row_vector(l.bias) })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let set = ParameterSet::from_layers(layers).map_err(D::Error::custom)?;
        if set.layer_sizes != doc.layer_sizes {
            return Err(D::Error::custom(format!(
                "layer_sizes {:?} do not match the layers {:?}",
                doc.layer_sizes, set.layer_sizes
            )));
        }
        Ok(set)
    }
}
