//! Trained model containers and their JSON wire format.

use crate::crf::{self, Assignment, Potentials};
use crate::error::{Error, Result};
use crate::mlp::{eval_forward, DenseLayer, MlpParameters};
use crate::tree::LatentTree;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Hyperparameters for SGD training of either model head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Epoch schedule `lr / (1 + lr_decay * epoch)`.
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// L2 weight on the (input-independent) edge potentials.
    #[serde(default = "default_edge_l2")]
    pub edge_l2: f64,
    /// Hidden layer widths; empty means a single affine layer.
    #[serde(default = "default_hidden_widths")]
    pub hidden_widths: Vec<usize>,
}

fn default_batch_size() -> usize {
    250
}
fn default_learning_rate() -> f64 {
    0.05
}
fn default_lr_decay() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    30
}
fn default_dropout() -> f64 {
    0.5
}
fn default_edge_l2() -> f64 {
    1e-4
}
fn default_hidden_widths() -> Vec<usize> {
    vec![256, 128]
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            lr_decay: default_lr_decay(),
            epochs: default_epochs(),
            dropout_rate: default_dropout(),
            seed: 0,
            edge_l2: default_edge_l2(),
            hidden_widths: default_hidden_widths(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::InvalidInput("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning_rate must be > 0".into()));
        }
        if self.hidden_widths.len() > 2 {
            return Err(Error::InvalidInput(
                "at most two hidden layers (3 layers total)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidInput("dropout_rate must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn layer_dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(input);
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(output);
        dims
    }
}

/// Per-dimension standardization fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[Vec<f64>]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidInput("cannot standardize an empty set".into()));
        }
        let d = features[0].len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; d];
        for row in features {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for row in features {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// A trained conditional latent tree model: the tree, the potential network,
/// and the free edge potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct CltmModel {
    pub tree: LatentTree,
    pub mlp: MlpParameters,
    pub edge_potentials: Vec<f64>,
    pub standardizer: Standardizer,
    pub config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

impl CltmModel {
    /// Node and edge potentials for one input (evaluation mode, no dropout).
    pub fn potentials_for(&self, x: &[f64]) -> Result<Potentials> {
        let node = eval_forward(&self.mlp, &self.standardizer.apply(x))?;
        Ok(Potentials {
            node,
            edge: self.edge_potentials.clone(),
        })
    }

    /// Clamp with observed nodes fixed to `y` (aligned with the tree's
    /// observed indices) and latent nodes free.
    pub fn clamp_for(&self, y: &[bool]) -> Result<Assignment> {
        if y.len() != self.tree.observed_count() {
            return Err(Error::InvalidInput(format!(
                "label vector has {} entries, tree has {} observed nodes",
                y.len(),
                self.tree.observed_count()
            )));
        }
        let mut clamp = Assignment::unset(self.tree.node_count());
        for (k, &v) in y.iter().enumerate() {
            clamp.set(k, v);
        }
        Ok(clamp)
    }

    /// `-log P(y | x) = logZ_free - logZ_clamped`.
    pub fn marginal_nll(&self, x: &[f64], y: &[bool]) -> Result<f64> {
        let pots = self.potentials_for(x)?;
        let free = crf::log_partition(&self.tree, &pots, &Assignment::unset(self.tree.node_count()))?;
        let clamped = crf::log_partition(&self.tree, &pots, &self.clamp_for(y)?)?;
        Ok(free - clamped)
    }
}

/// Independent per-label classifier over the same trunk: one sigmoid head
/// per label, trained by cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub label_names: Vec<String>,
    pub mlp: MlpParameters,
    pub standardizer: Standardizer,
    pub config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

impl BaselineModel {
    /// Per-label probabilities `sigma(logit)`.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let logits = eval_forward(&self.mlp, &self.standardizer.apply(x))?;
        Ok(logits.iter().map(|&o| sigmoid(o)).collect())
    }

    /// Binary decisions at threshold 0.5.
    pub fn decisions(&self, x: &[f64]) -> Result<Vec<bool>> {
        Ok(self.probabilities(x)?.iter().map(|&p| p >= 0.5).collect())
    }
}

pub fn sigmoid(o: f64) -> f64 {
    if o >= 0.0 {
        1.0 / (1.0 + (-o).exp())
    } else {
        let e = o.exp();
        e / (1.0 + e)
    }
}

/// Either trained model, as stored on disk.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Cltm(CltmModel),
    Baseline(BaselineModel),
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    rows: usize,
    cols: usize,
    /// Row-major weight entries.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree: Option<LatentTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_names: Option<Vec<String>>,
    layer_dims: Vec<usize>,
    dropout_rate: f64,
    layers: Vec<LayerJson>,
    /// `(node_a, node_b, value)` keyed by edge node names.
    #[serde(default)]
    edge_potentials: Vec<(String, String, f64)>,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    config: TrainConfig,
    #[serde(default)]
    loss_trace: Vec<f64>,
}

fn layers_to_json(mlp: &MlpParameters) -> Vec<LayerJson> {
    mlp.layers
        .iter()
        .map(|l| LayerJson {
            rows: l.out_dim(),
            cols: l.in_dim(),
            weights: l.weights.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect(),
            bias: l.bias.iter().copied().collect(),
        })
        .collect()
}

fn layers_from_json(layers: &[LayerJson], dropout_rate: f64) -> Result<MlpParameters> {
    let mut out = Vec::with_capacity(layers.len());
    for l in layers {
        if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
            return Err(Error::Format("layer shape mismatch in model file".into()));
        }
        out.push(DenseLayer {
            weights: DMatrix::from_row_slice(l.rows, l.cols, &l.weights),
            bias: DVector::from_column_slice(&l.bias),
        });
    }
    if out.is_empty() {
        return Err(Error::Format("model has no layers".into()));
    }
    Ok(MlpParameters {
        layers: out,
        dropout_rate,
    })
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        let json = match self {
            ModelFile::Cltm(m) => {
                let dims = {
                    let mut d = vec![m.mlp.input_dim()];
                    d.extend(m.mlp.layers.iter().map(|l| l.out_dim()));
                    d
                };
                ModelJson {
                    kind: "cltm".into(),
                    tree: Some(m.tree.clone()),
                    label_names: None,
                    layer_dims: dims,
                    dropout_rate: m.mlp.dropout_rate,
                    layers: layers_to_json(&m.mlp),
                    edge_potentials: m
                        .tree
                        .edges()
                        .iter()
                        .zip(&m.edge_potentials)
                        .map(|(&(a, b), &v)| {
                            (m.tree.node_name(a).to_owned(), m.tree.node_name(b).to_owned(), v)
                        })
                        .collect(),
                    feature_mean: m.standardizer.mean.clone(),
                    feature_std: m.standardizer.std.clone(),
                    config: m.config.clone(),
                    loss_trace: m.loss_trace.clone(),
                }
            }
            ModelFile::Baseline(m) => {
                let dims = {
                    let mut d = vec![m.mlp.input_dim()];
                    d.extend(m.mlp.layers.iter().map(|l| l.out_dim()));
                    d
                };
                ModelJson {
                    kind: "baseline".into(),
                    tree: None,
                    label_names: Some(m.label_names.clone()),
                    layer_dims: dims,
                    dropout_rate: m.mlp.dropout_rate,
                    layers: layers_to_json(&m.mlp),
                    edge_potentials: Vec::new(),
                    feature_mean: m.standardizer.mean.clone(),
                    feature_std: m.standardizer.std.clone(),
                    config: m.config.clone(),
                    loss_trace: m.loss_trace.clone(),
                }
            }
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(text: &str) -> Result<ModelFile> {
        let json: ModelJson = serde_json::from_str(text)?;
        let mlp = layers_from_json(&json.layers, json.dropout_rate)?;
        let standardizer = Standardizer {
            mean: json.feature_mean,
            std: json.feature_std,
        };
        match json.kind.as_str() {
            "cltm" => {
                let tree = json
                    .tree
                    .ok_or_else(|| Error::Format("cltm model missing tree".into()))?;
                let mut edge_potentials = vec![0.0; tree.edges().len()];
                for (a, b, v) in &json.edge_potentials {
                    let ia = tree
                        .node_index(a)
                        .ok_or_else(|| Error::Format(format!("unknown edge node {a:?}")))?;
                    let ib = tree
                        .node_index(b)
                        .ok_or_else(|| Error::Format(format!("unknown edge node {b:?}")))?;
                    let key = if ia < ib { (ia, ib) } else { (ib, ia) };
                    let idx = tree
                        .edges()
                        .binary_search(&key)
                        .map_err(|_| Error::Format(format!("edge ({a}, {b}) not in tree")))?;
                    edge_potentials[idx] = *v;
                }
                if mlp.output_dim() != tree.node_count() {
                    return Err(Error::Format("output width does not match node count".into()));
                }
                Ok(ModelFile::Cltm(CltmModel {
                    tree,
                    mlp,
                    edge_potentials,
                    standardizer,
                    config: json.config,
                    loss_trace: json.loss_trace,
                }))
            }
            "baseline" => {
                let label_names = json
                    .label_names
                    .ok_or_else(|| Error::Format("baseline model missing label names".into()))?;
                if mlp.output_dim() != label_names.len() {
                    return Err(Error::Format("output width does not match label count".into()));
                }
                Ok(ModelFile::Baseline(BaselineModel {
                    label_names,
                    mlp,
                    standardizer,
                    config: json.config,
                    loss_trace: json.loss_trace,
                }))
            }
            other => Err(Error::Format(format!("unknown model kind {other:?}"))),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        ModelFile::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::synthetic::star_tree;
    use rand::Rng;

    #[test]
    fn standardizer_zero_variance_dimension() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.std[1], 1.0);
        let z = s.apply(&[2.0, 5.0]);
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn model_json_round_trip_is_loss_identical() {
        let tree = star_tree(3);
        let mut rng = seed::rng(13);
        let config = TrainConfig {
            hidden_widths: vec![5],
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let mlp = MlpParameters::init(&config.layer_dims(4, tree.node_count()), 0.0, &mut rng).unwrap();
        let model = CltmModel {
            edge_potentials: tree.edges().iter().map(|_| rng.random_range(-1.0..1.0)).collect(),
            tree,
            mlp,
            standardizer: Standardizer {
                mean: vec![0.1, -0.2, 0.0, 1.0],
                std: vec![1.0, 2.0, 0.5, 1.5],
            },
            config,
            loss_trace: vec![1.25, 0.75],
        };
        let x = vec![0.4, -1.0, 2.0, 0.0];
        let y = vec![true, false, true];
        let loss = model.marginal_nll(&x, &y).unwrap();

        let text = ModelFile::Cltm(model).to_json().unwrap();
        let ModelFile::Cltm(back) = ModelFile::from_json(&text).unwrap() else {
            panic!("wrong kind");
        };
        let loss2 = back.marginal_nll(&x, &y).unwrap();
        assert!((loss - loss2).abs() <= 1e-12, "{loss} vs {loss2}");
        assert_eq!(back.loss_trace, vec![1.25, 0.75]);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let err = serde_json::from_str::<TrainConfig>("{\"epochz\": 3}");
        assert!(err.is_err());
    }
}
