//! One function per pipeline stage. Each reads its inputs, runs exactly one
//! library stage, writes its artifacts into the output directory, and
//! returns the key scalars for the stdout summary. Artifacts never contain
//! timing fields, so reruns with the same config and seed are byte-identical.

use crate::config::RunConfig;
use cltm::crf::{self, Assignment};
use cltm::data::{self, DatasetManifest, LabeledDataset};
use cltm::error::{Error, Result};
use cltm::eval::{self, SceneSource};
use cltm::kernel::{self, DistanceMatrix};
use cltm::model::ModelFile;
use cltm::seed::stage_seed;
use cltm::structure;
use cltm::synthetic;
use cltm::train;
use cltm::tree::LatentTree;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Header + rows of formatted cells.
fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = read_file(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty table", path.display())))?
        .split(',')
        .map(|s| s.trim().to_owned())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(|s| s.trim().to_owned()).collect();
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "{}: row {} has {} cells, header has {}",
                path.display(),
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Sidecar describing a persisted distance matrix.
#[derive(Debug, Serialize, Deserialize)]
pub struct DistanceSidecar {
    pub labels: Vec<String>,
    pub clamp_ceiling: f64,
    pub gamma: f64,
    #[serde(default)]
    pub dropped: Vec<String>,
    #[serde(default)]
    pub config: Value,
}

fn sidecar_path(distances: &Path) -> PathBuf {
    distances.with_extension("labels.json")
}

pub fn cmd_synth(config: &RunConfig, out_dir: &Path) -> Result<Value> {
    let model = synthetic::build_ground_truth(&config.synth.spec)?;
    let sample = synthetic::sample_dataset(&model, config.synth.n, stage_seed(config.seed, "synth"))?;
    let n = sample.dataset.n();
    let train_count = ((n as f64) * config.synth.train_fraction).ceil() as usize;

    data::write_feature_csv(&out_dir.join("features.csv"), &sample.dataset.features)?;
    data::write_label_csv(&out_dir.join("labels.csv"), &sample.dataset.labels)?;
    data::write_scene_csv(&out_dir.join("scenes.csv"), &sample.cluster)?;
    let manifest = DatasetManifest {
        n,
        d: sample.dataset.dims(),
        l: sample.dataset.label_count(),
        features: "features.csv".into(),
        labels: "labels.csv".into(),
        label_names: sample.dataset.label_names.clone(),
        scenes: Some("scenes.csv".into()),
        train_indices: Some((0..train_count).collect()),
        val_indices: Some((train_count..n).collect()),
    };
    write_file(
        &out_dir.join("dataset.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    let truth = json!({
        "tree": model.tree,
        "model": model,
        "hidden": sample.hidden,
        "cluster": sample.cluster,
        "config": config,
    });
    write_file(&out_dir.join("truth.json"), &serde_json::to_string_pretty(&truth)?)?;

    Ok(json!({
        "n": n,
        "d": sample.dataset.dims(),
        "l": sample.dataset.label_count(),
        "latent": model.tree.latent_count(),
        "train": train_count,
        "manifest": out_dir.join("dataset.json"),
    }))
}

fn training_split(dataset: &LabeledDataset) -> Result<LabeledDataset> {
    match &dataset.train_indices {
        Some(indices) => dataset.subset(indices),
        None => Ok(dataset.clone()),
    }
}

pub fn cmd_distances(config: &RunConfig, manifest: &Path, out_dir: &Path) -> Result<Value> {
    let (dataset, report) = data::ingest(manifest)?;
    let train = training_split(&dataset)?;
    let kernel_config = config.kernel.to_cond_distance_config(config.seed);
    let out = kernel::cond_distance_matrix(&train.features, &train.labels, &kernel_config)?;

    let csv_path = out_dir.join("distances.csv");
    out.distances.write_csv(&csv_path)?;
    let sidecar = DistanceSidecar {
        labels: out
            .kept_labels
            .iter()
            .map(|&k| dataset.label_names[k].clone())
            .collect(),
        clamp_ceiling: out.distances.clamp_ceiling(),
        gamma: out.gamma,
        dropped: out
            .dropped_labels
            .iter()
            .map(|&k| dataset.label_names[k].clone())
            .collect(),
        config: serde_json::to_value(config)?,
    };
    write_file(&sidecar_path(&csv_path), &serde_json::to_string_pretty(&sidecar)?)?;

    Ok(json!({
        "labels": sidecar.labels.len(),
        "dropped": sidecar.dropped,
        "gamma": out.gamma,
        "queries": out.query_count,
        "ingest": report,
        "distances": csv_path,
    }))
}

pub fn cmd_structure(config: &RunConfig, distances: &Path, out_dir: &Path) -> Result<Value> {
    let sidecar: DistanceSidecar = serde_json::from_str(&read_file(&sidecar_path(distances))?)?;
    let matrix = DistanceMatrix::read_csv(distances, sidecar.clamp_ceiling)?;
    if matrix.len() != sidecar.labels.len() {
        return Err(Error::Format(format!(
            "distance matrix is {}x{} but sidecar lists {} labels",
            matrix.len(),
            matrix.len(),
            sidecar.labels.len()
        )));
    }
    let epsilon = config
        .structure
        .epsilon
        .unwrap_or_else(|| structure::default_epsilon(&matrix));
    let tree = structure::clrg(&matrix, &sidecar.labels, epsilon)?;
    write_file(&out_dir.join("tree.json"), &serde_json::to_string_pretty(&tree)?)?;
    write_file(&out_dir.join("tree.dot"), &tree.to_dot())?;
    Ok(json!({
        "observed": tree.observed_count(),
        "latent": tree.latent_count(),
        "edges": tree.edges().len(),
        "epsilon": epsilon,
        "tree": out_dir.join("tree.json"),
    }))
}

pub fn cmd_train(
    config: &RunConfig,
    manifest: &Path,
    tree_path: Option<&Path>,
    baseline: bool,
    out_dir: &Path,
) -> Result<Value> {
    let (dataset, _) = data::ingest(manifest)?;
    let train_split = training_split(&dataset)?;
    if baseline {
        let train_config = config.train_config("baseline");
        let model = train::independent_baseline_train(&train_split, &train_config)?;
        let final_loss = model.loss_trace.last().copied();
        let path = out_dir.join("baseline.json");
        ModelFile::Baseline(model).save(&path)?;
        Ok(json!({
            "kind": "baseline",
            "model": path,
            "epochs": train_config.epochs,
            "final_loss": final_loss,
        }))
    } else {
        let tree_path = tree_path
            .ok_or_else(|| Error::InvalidInput("train requires --tree (or --baseline)".into()))?;
        let tree: LatentTree = serde_json::from_str(&read_file(tree_path)?)?;
        let train_config = config.train_config("train");
        let model = train::sgd_train(&train_split, &tree, &train_config)?;
        let final_loss = model.loss_trace.last().copied();
        let path = out_dir.join("model.json");
        ModelFile::Cltm(model).save(&path)?;
        Ok(json!({
            "kind": "cltm",
            "model": path,
            "epochs": train_config.epochs,
            "final_loss": final_loss,
        }))
    }
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

pub fn cmd_infer(
    _config: &RunConfig,
    model_path: &Path,
    manifest: &Path,
    activations_top: Option<usize>,
    out_dir: &Path,
) -> Result<Value> {
    let (dataset, _) = data::ingest(manifest)?;
    match ModelFile::load(model_path)? {
        ModelFile::Cltm(model) => {
            let node_names: Vec<String> = (0..model.tree.node_count())
                .map(|k| model.tree.node_name(k).to_owned())
                .collect();
            let mut marginal_rows = Vec::with_capacity(dataset.n());
            let mut map_rows = Vec::with_capacity(dataset.n());
            let mut potentials_batch = Vec::with_capacity(dataset.n());
            for x in &dataset.features {
                let pots = model.potentials_for(x)?;
                let r = crf::marginals(
                    &model.tree,
                    &pots,
                    &Assignment::unset(model.tree.node_count()),
                )?;
                marginal_rows.push(r.node_marginals.iter().map(|&m| format_float(m)).collect());
                let bits = r.map.bits()?;
                map_rows.push(
                    bits.iter()
                        .map(|&b| if b { "1".into() } else { "0".into() })
                        .collect(),
                );
                potentials_batch.push(pots);
            }
            write_table(&out_dir.join("marginals.csv"), &node_names, &marginal_rows)?;
            write_table(&out_dir.join("map.csv"), &node_names, &map_rows)?;

            if let Some(top) = activations_top {
                let header = vec![
                    "latent".to_owned(),
                    "rank".to_owned(),
                    "sample_index".to_owned(),
                    "potential".to_owned(),
                ];
                let mut rows = Vec::new();
                for latent in model.tree.latent_names() {
                    let ranked =
                        crf::latent_activation_scores(&model.tree, &potentials_batch, latent)?;
                    let node = model.tree.node_index(latent).unwrap();
                    for (rank, &sample) in ranked.iter().take(top).enumerate() {
                        rows.push(vec![
                            latent.clone(),
                            rank.to_string(),
                            sample.to_string(),
                            format_float(potentials_batch[sample].node[node]),
                        ]);
                    }
                }
                write_table(&out_dir.join("activations.csv"), &header, &rows)?;
            }
            Ok(json!({
                "kind": "cltm",
                "samples": dataset.n(),
                "marginals": out_dir.join("marginals.csv"),
                "map": out_dir.join("map.csv"),
            }))
        }
        ModelFile::Baseline(model) => {
            let mut prob_rows = Vec::with_capacity(dataset.n());
            let mut decision_rows = Vec::with_capacity(dataset.n());
            for x in &dataset.features {
                let probs = model.probabilities(x)?;
                prob_rows.push(probs.iter().map(|&p| format_float(p)).collect());
                decision_rows.push(
                    probs
                        .iter()
                        .map(|&p| if p >= 0.5 { "1".into() } else { "0".into() })
                        .collect(),
                );
            }
            write_table(&out_dir.join("probabilities.csv"), &model.label_names, &prob_rows)?;
            write_table(&out_dir.join("decisions.csv"), &model.label_names, &decision_rows)?;
            Ok(json!({
                "kind": "baseline",
                "samples": dataset.n(),
                "probabilities": out_dir.join("probabilities.csv"),
                "decisions": out_dir.join("decisions.csv"),
            }))
        }
    }
}

/// Which manifest rows a command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    All,
    Train,
    Val,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "all" => Ok(Split::All),
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(format!("unknown split {other:?} (use all|train|val)")),
        }
    }
}

fn split_indices(dataset: &LabeledDataset, split: Split) -> Result<Vec<usize>> {
    match split {
        Split::All => Ok((0..dataset.n()).collect()),
        Split::Train => dataset
            .train_indices
            .clone()
            .ok_or_else(|| Error::InvalidInput("manifest has no train split".into())),
        Split::Val => dataset
            .val_indices
            .clone()
            .ok_or_else(|| Error::InvalidInput("manifest has no validation split".into())),
    }
}

pub fn cmd_eval(
    config: &RunConfig,
    manifest: &Path,
    predictions: &Path,
    scores: Option<&Path>,
    split: Split,
    out_dir: &Path,
) -> Result<Value> {
    let (dataset, _) = data::ingest(manifest)?;
    let indices = split_indices(&dataset, split)?;
    let table = read_table(predictions)?;
    if table.rows.len() != dataset.n() {
        return Err(Error::Format(format!(
            "predictions have {} rows, dataset has {}",
            table.rows.len(),
            dataset.n()
        )));
    }
    // Evaluate on the labels shared by the prediction header and the
    // dataset (latent columns in MAP output are ignored).
    let mut label_cols = Vec::new();
    for (col, name) in table.header.iter().enumerate() {
        if let Some(k) = dataset.label_names.iter().position(|n| n == name) {
            label_cols.push((col, k, name.clone()));
        }
    }
    if label_cols.is_empty() {
        return Err(Error::Format("no prediction column matches a dataset label".into()));
    }
    let parse_bit = |cell: &str| -> Result<bool> {
        match cell {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::Format(format!("prediction cell {other:?} is not 0/1"))),
        }
    };
    let mut pred = Vec::with_capacity(indices.len());
    let mut truth = Vec::with_capacity(indices.len());
    for &i in &indices {
        let mut p = Vec::with_capacity(label_cols.len());
        let mut t = Vec::with_capacity(label_cols.len());
        for &(col, k, _) in &label_cols {
            p.push(parse_bit(&table.rows[i][col])?);
            t.push(dataset.labels[i][k]);
        }
        pred.push(p);
        truth.push(t);
    }
    let report = eval::prf(&pred, &truth)?;

    let label_names: Vec<String> = label_cols.iter().map(|(_, _, n)| n.clone()).collect();
    let metrics = json!({
        "labels": label_names,
        "split": format!("{split:?}").to_lowercase(),
        "report": report,
        "config": config,
    });
    write_file(&out_dir.join("metrics.json"), &serde_json::to_string_pretty(&metrics)?)?;

    let mut summary = json!({
        "samples": indices.len(),
        "labels": label_names.len(),
        "micro_f": report.micro.f1,
        "micro_precision": report.micro.precision,
        "micro_recall": report.micro.recall,
        "macro_f": report.macro_avg.f1,
        "metrics": out_dir.join("metrics.json"),
    });

    if let Some(scores_path) = scores {
        let score_table = read_table(scores_path)?;
        if score_table.rows.len() != dataset.n() {
            return Err(Error::Format("score/dataset row mismatch".into()));
        }
        let mut score_cols = Vec::new();
        for (col, name) in score_table.header.iter().enumerate() {
            if let Some(k) = dataset.label_names.iter().position(|n| n == name) {
                score_cols.push((col, k, name.clone()));
            }
        }
        let mut score_rows = Vec::with_capacity(indices.len());
        let mut score_truth = Vec::with_capacity(indices.len());
        for &i in &indices {
            let mut s = Vec::with_capacity(score_cols.len());
            let mut t = Vec::with_capacity(score_cols.len());
            for &(col, k, _) in &score_cols {
                let v: f64 = score_table.rows[i][col]
                    .parse()
                    .map_err(|_| Error::Format("score cell is not a float".into()))?;
                s.push(v);
                t.push(dataset.labels[i][k]);
            }
            score_rows.push(s);
            score_truth.push(t);
        }
        let grid = eval::default_grid(config.eval.threshold_grid_points);
        let curve = eval::pr_curve(&score_rows, &score_truth, &grid)?;
        let header = vec![
            "label".to_owned(),
            "threshold".to_owned(),
            "precision".to_owned(),
            "recall".to_owned(),
        ];
        let mut rows = Vec::new();
        for (k, points) in curve.per_label.iter().enumerate() {
            for p in points {
                rows.push(vec![
                    score_cols[k].2.clone(),
                    format_float(p.threshold),
                    format_float(p.precision),
                    format_float(p.recall),
                ]);
            }
        }
        for p in &curve.micro {
            rows.push(vec![
                "micro".to_owned(),
                format_float(p.threshold),
                format_float(p.precision),
                format_float(p.recall),
            ]);
        }
        write_table(&out_dir.join("pr_curves.csv"), &header, &rows)?;
        summary["pr_curves"] = json!(out_dir.join("pr_curves.csv"));
    }

    Ok(summary)
}

pub fn cmd_scene(
    config: &RunConfig,
    model_path: &Path,
    manifest: &Path,
    source: &str,
    k_override: Option<usize>,
    split: Split,
    out_dir: &Path,
) -> Result<Value> {
    let (dataset, _) = data::ingest(manifest)?;
    let scenes_all = dataset
        .scenes
        .clone()
        .ok_or_else(|| Error::InvalidInput("manifest has no scene labels".into()))?;
    let indices = split_indices(&dataset, split)?;
    let features: Vec<Vec<f64>> = indices.iter().map(|&i| dataset.features[i].clone()).collect();
    let scenes: Vec<usize> = indices.iter().map(|&i| scenes_all[i]).collect();

    let vectors = match (source, ModelFile::load(model_path)?) {
        ("hidden", ModelFile::Cltm(model)) => {
            eval::scene_feature_vectors(&model, &features, SceneSource::Hidden)?
        }
        ("observed-hidden", ModelFile::Cltm(model)) => {
            eval::scene_feature_vectors(&model, &features, SceneSource::ObservedHidden)?
        }
        ("baseline", ModelFile::Baseline(model)) => {
            eval::baseline_probability_vectors(&model, &features)?
        }
        ("hidden" | "observed-hidden", ModelFile::Baseline(_)) => {
            return Err(Error::InvalidInput(
                "marginal sources need a cltm model file".into(),
            ))
        }
        ("baseline", ModelFile::Cltm(_)) => {
            return Err(Error::InvalidInput(
                "source baseline needs a baseline model file".into(),
            ))
        }
        (other, _) => {
            return Err(Error::InvalidInput(format!(
                "unknown source {other:?} (use hidden|observed-hidden|baseline)"
            )))
        }
    };
    if vectors.first().map_or(0, |v| v.len()) == 0 {
        return Err(Error::InvalidInput("scene vectors are empty".into()));
    }

    let scene_count = scenes.iter().max().map_or(0, |&m| m + 1);
    let k = k_override.or(config.eval.kmeans_k).unwrap_or(scene_count);
    let clustering = eval::kmeans(
        &vectors,
        k,
        config.eval.kmeans_restarts,
        stage_seed(config.seed, "scene"),
    )?;
    let matched = eval::match_clusters(&clustering.assignment, &scenes, k)?;

    let out = json!({
        "source": source,
        "k": k,
        "samples": vectors.len(),
        "inertia": clustering.inertia,
        "misclassification": matched.misclassification,
        "matched_scene": matched.matched_scene,
        "contingency": matched.contingency,
        "config": config,
    });
    write_file(&out_dir.join("scene_eval.json"), &serde_json::to_string_pretty(&out)?)?;
    Ok(json!({
        "source": source,
        "k": k,
        "misclassification": matched.misclassification,
        "scene_eval": out_dir.join("scene_eval.json"),
    }))
}
