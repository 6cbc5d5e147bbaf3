use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use rayon::prelude::*;
use secluster_core::constraints::{generate_constraints, relation_graph_for, Label};
use secluster_core::graph::{build_graph, default_p};
use secluster_core::hier::extract_partition;
use secluster_core::metrics::{ari, dendrogram_purity, nmi};
use secluster_core::{
    io, minimize_2d, minimize_highd, ConstraintKind, ConstraintSet, EncodingTree, Error,
    NestedTree, Partition, SimilarityMatrix, WeightedGraph,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::{default_amount, ConstraintSource, FileConfig, PSpec, RunConfig, RunFlags};

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

impl From<Status> for std::process::ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Ok => Self::SUCCESS,
            Status::NotConverged => Self::from(4),
        }
    }
}

/// 3 for constraint conflicts, 2 for every other failure.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let conflict = e.chain().any(|c| {
        matches!(
            c.downcast_ref::<Error>(),
            Some(Error::ConstraintConflict(..))
        )
    });
    if conflict {
        3
    } else {
        2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ari,
    Nmi,
    Dp,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ari" => Ok(Self::Ari),
            "nmi" => Ok(Self::Nmi),
            "dp" => Ok(Self::Dp),
            _ => Err(format!("unknown metric {s:?} (expected ari, nmi or dp)")),
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Graph, similarities and labels shared by every repeat of a run.
struct Prepared {
    sim: SimilarityMatrix,
    g: WeightedGraph,
    truth: Option<Vec<Label>>,
    p: usize,
    file_constraints: Option<ConstraintSet>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let dataset = io::read_csv(&config.input, config.label_column)?;
    let n = dataset.data.rows();
    let truth = match &config.truth {
        Some(path) => Some(io::read_labels(path)?),
        None => dataset.labels,
    };
    if let Some(t) = &truth {
        if t.len() != n {
            bail!("{} labels for {n} data points", t.len());
        }
    }
    let p = match config.p {
        PSpec::Fixed(p) => p,
        PSpec::Auto => {
            let k = match (config.k, &truth) {
                (Some(k), _) => k,
                (None, Some(t)) => t.iter().collect::<BTreeSet<_>>().len(),
                (None, None) => bail!("--p auto needs --k or ground-truth labels"),
            };
            if n < 2 {
                bail!("need at least two data points");
            }
            default_p(k, n)
        }
    };
    info!("{n} points, {} features, p = {p}", dataset.data.cols());
    let (sim, g) = build_graph(&dataset.data, config.kernel(), p)?;
    let file_constraints = match &config.constraints {
        ConstraintSource::File { path } => Some(ConstraintSet::parse(&io::read_text(path)?)?),
        _ => None,
    };
    if let ConstraintSource::Generate { .. } = config.constraints {
        if truth.is_none() {
            bail!("constraint generation needs ground-truth labels (--truth or --label-column)");
        }
    }
    Ok(Prepared {
        sim,
        g,
        truth,
        p,
        file_constraints,
    })
}

#[derive(Clone, Debug, Default, Serialize)]
struct ConstraintCounts {
    must_link: usize,
    cannot_link: usize,
    positive: usize,
    negative: usize,
}

impl From<&ConstraintSet> for ConstraintCounts {
    fn from(c: &ConstraintSet) -> Self {
        Self {
            must_link: c.must_link.len(),
            cannot_link: c.cannot_link.len(),
            positive: c.positive_labels.len(),
            negative: c.negative_labels.len(),
        }
    }
}

fn constraints_for(config: &RunConfig, prep: &Prepared, seed: u64) -> Result<ConstraintSet> {
    Ok(match config.constraints {
        ConstraintSource::None => ConstraintSet::new(),
        ConstraintSource::File { .. } => prep.file_constraints.clone().unwrap(),
        ConstraintSource::Generate { kind, amount } => {
            generate_constraints(prep.truth.as_ref().unwrap(), kind, amount, seed)?
        }
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
struct Stat {
    mean: f64,
    std: f64,
}

/// Mean and sample standard deviation (zero for a single value).
fn stat(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stat { mean, std }
}

#[derive(Clone, Debug, Serialize)]
struct RunSummary {
    seed: u64,
    objective: f64,
    modules: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metrics: BTreeMap<Metric, f64>,
}

#[derive(Debug, Serialize)]
struct Repeats {
    runs: Vec<RunSummary>,
    summary: BTreeMap<String, Stat>,
}

fn summarize(runs: Vec<RunSummary>) -> Option<Repeats> {
    if runs.len() < 2 {
        return None;
    }
    let mut summary = BTreeMap::new();
    summary.insert(
        "objective".to_string(),
        stat(&runs.iter().map(|r| r.objective).collect::<Vec<_>>()),
    );
    summary.insert(
        "modules".to_string(),
        stat(&runs.iter().map(|r| r.modules as f64).collect::<Vec<_>>()),
    );
    for m in runs[0].metrics.keys() {
        let values: Vec<f64> = runs.iter().map(|r| r.metrics[m]).collect();
        let name = serde_json::to_value(m)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string();
        summary.insert(name, stat(&values));
    }
    for (m, s) in &summary {
        info!("{m}: {:.4} ± {:.4} over {} runs", s.mean, s.std, runs.len());
    }
    Some(Repeats { runs, summary })
}

fn partition_metrics(p: &Partition, truth: Option<&[Label]>) -> Result<BTreeMap<Metric, f64>> {
    let mut out = BTreeMap::new();
    if let Some(t) = truth {
        out.insert(Metric::Ari, ari(p.assignment(), t)?);
        out.insert(Metric::Nmi, nmi(p.assignment(), t)?);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct PartitionReport {
    schema_version: u32,
    command: &'static str,
    config: RunConfig,
    n: usize,
    p: usize,
    seed: u64,
    constraints: ConstraintCounts,
    assignments: Vec<usize>,
    module_sizes: Vec<usize>,
    objective: f64,
    objective_trace: Vec<f64>,
    merges: usize,
    sweeps: usize,
    moves: usize,
    converged: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metrics: BTreeMap<Metric, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repeats: Option<Repeats>,
}

/// Resolved run settings plus the config file's Newick path, if any.
fn load_config(
    flags: RunFlags,
    height: Option<usize>,
    config: Option<&Path>,
) -> Result<(RunConfig, Option<PathBuf>)> {
    let file = match config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let newick = file.newick.clone();
    Ok((RunConfig::resolve(flags, height, file)?, newick))
}

pub fn partition(flags: RunFlags, config_path: Option<&Path>) -> Result<Status> {
    let (config, _) = load_config(flags, None, config_path)?;
    let prep = prepare(&config)?;
    let hp = config.hyperparams();

    let results = (0..config.repeats as u64)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed + r;
            let set = constraints_for(&config, &prep, seed)?;
            let rel = relation_graph_for(&set, &prep.sim)?;
            let result = minimize_2d(&prep.g, &rel, &hp)?;
            let metrics = partition_metrics(&result.partition, prep.truth.as_deref())?;
            Ok((set, result, metrics))
        })
        .collect::<Result<Vec<_>>>()?;

    let converged = results.iter().all(|(_, r, _)| r.converged);
    let runs: Vec<RunSummary> = results
        .iter()
        .enumerate()
        .map(|(r, (_, res, metrics))| RunSummary {
            seed: config.seed + r as u64,
            objective: res.objective,
            modules: res.partition.len(),
            metrics: metrics.clone(),
        })
        .collect();
    let (set, first, metrics) = results.into_iter().next().unwrap();
    info!(
        "{} modules, objective {:.6}, {} merges, {} sweeps",
        first.partition.len(),
        first.objective,
        first.merges,
        first.sweeps
    );
    let report = PartitionReport {
        schema_version: SCHEMA_VERSION,
        command: "partition",
        n: prep.g.n(),
        p: prep.p,
        seed: config.seed,
        constraints: (&set).into(),
        assignments: first.partition.assignment().to_vec(),
        module_sizes: first.partition.module_sizes(),
        objective: first.objective,
        objective_trace: first.trace,
        merges: first.merges,
        sweeps: first.sweeps,
        moves: first.moves,
        converged: first.converged,
        metrics,
        repeats: summarize(runs),
        config,
    };
    write_output(report.config.output.as_deref(), &to_json(&report)?)?;
    if !converged {
        eprintln!(
            "warning: moving did not converge within {} sweeps",
            report.config.t_max
        );
        return Ok(Status::NotConverged);
    }
    Ok(Status::Ok)
}

#[derive(Debug, Serialize)]
struct FlatOutput {
    assignments: Vec<usize>,
    module_sizes: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct HierarchyReport {
    schema_version: u32,
    command: &'static str,
    config: RunConfig,
    n: usize,
    p: usize,
    seed: u64,
    constraints: ConstraintCounts,
    height: usize,
    objective: f64,
    binary_height: usize,
    binary_objective: f64,
    stretch_trace: Vec<f64>,
    compress_trace: Vec<f64>,
    newick: String,
    tree: NestedTree,
    binary_newick: String,
    binary_tree: NestedTree,
    /// Height-two clustering read off the binary tree.
    partition: FlatOutput,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metrics: BTreeMap<Metric, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repeats: Option<Repeats>,
}

pub fn hierarchy(
    flags: RunFlags,
    height: Option<usize>,
    newick: Option<PathBuf>,
    binary_newick: Option<PathBuf>,
    config_path: Option<&Path>,
) -> Result<Status> {
    let (config, file_newick) = load_config(flags, height, config_path)?;
    let newick = newick.or(file_newick);
    let prep = prepare(&config)?;
    let hp = config.hyperparams();

    let results = (0..config.repeats as u64)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed + r;
            let set = constraints_for(&config, &prep, seed)?;
            let rel = relation_graph_for(&set, &prep.sim)?;
            let result = minimize_highd(&prep.g, &rel, &hp)?;
            let flat = extract_partition(&prep.g, &rel, &result.binary, hp.phi)?;
            let mut metrics = partition_metrics(&flat, prep.truth.as_deref())?;
            if let Some(t) = &prep.truth {
                metrics.insert(Metric::Dp, dendrogram_purity(&result.binary, t)?);
            }
            Ok((set, result, flat, metrics))
        })
        .collect::<Result<Vec<_>>>()?;

    let runs: Vec<RunSummary> = results
        .iter()
        .enumerate()
        .map(|(r, (_, res, flat, metrics))| RunSummary {
            seed: config.seed + r as u64,
            objective: res.objective,
            modules: flat.len(),
            metrics: metrics.clone(),
        })
        .collect();
    let (set, first, flat, metrics) = results.into_iter().next().unwrap();
    info!(
        "binary height {}, objective {:.6} at height {}",
        first.binary_height,
        first.objective,
        first.tree.height()
    );
    let report = HierarchyReport {
        schema_version: SCHEMA_VERSION,
        command: "hierarchy",
        n: prep.g.n(),
        p: prep.p,
        seed: config.seed,
        constraints: (&set).into(),
        height: first.tree.height(),
        objective: first.objective,
        binary_height: first.binary_height,
        binary_objective: first.binary_objective,
        stretch_trace: first.stretch_trace,
        compress_trace: first.compress_trace,
        newick: first.tree.to_newick(),
        tree: first.tree.to_nested(),
        binary_newick: first.binary.to_newick(),
        binary_tree: first.binary.to_nested(),
        partition: FlatOutput {
            assignments: flat.assignment().to_vec(),
            module_sizes: flat.module_sizes(),
        },
        metrics,
        repeats: summarize(runs),
        config,
    };
    if let Some(path) = &newick {
        write_output(Some(path), &format!("{}\n", report.newick))?;
    }
    if let Some(path) = &binary_newick {
        write_output(Some(path), &format!("{}\n", report.binary_newick))?;
    }
    write_output(report.config.output.as_deref(), &to_json(&report)?)?;
    Ok(Status::Ok)
}

pub fn gen_constraints(
    labels: &Path,
    kind: ConstraintKind,
    amount: Option<f64>,
    seed: u64,
    output: Option<&Path>,
) -> Result<Status> {
    let truth = io::read_labels(labels)?;
    if truth.is_empty() {
        bail!("{}: no labels", labels.display());
    }
    let set = generate_constraints(
        &truth,
        kind,
        amount.unwrap_or_else(|| default_amount(kind)),
        seed,
    )?;
    write_output(output, &set.to_text())?;
    Ok(Status::Ok)
}

/// Labels from a plain label file or from the `assignments` of a JSON
/// result.
fn read_prediction(path: &Path) -> Result<Vec<Label>> {
    let text = io::read_text(path)?;
    if !text.trim_start().starts_with('{') {
        return Ok(io::parse_labels(&text)?);
    }
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let assignments = value
        .get("assignments")
        .or_else(|| value.pointer("/partition/assignments"))
        .ok_or_else(|| anyhow!("{}: no assignments field", path.display()))?;
    Ok(serde_json::from_value(assignments.clone())?)
}

/// A Newick tree, a nested JSON tree, or the `tree` of a JSON result.
fn read_tree(path: &Path) -> Result<EncodingTree> {
    let text = io::read_text(path)?;
    let trimmed = text.trim_start();
    if !(trimmed.starts_with('{') || trimmed.starts_with('[')) {
        return Ok(EncodingTree::from_newick(&text)?);
    }
    let mut value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(tree) = value.get_mut("tree") {
        value = tree.take();
    }
    let nested: NestedTree = serde_json::from_value(value)?;
    Ok(EncodingTree::from_nested(&nested)?)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    schema_version: u32,
    command: &'static str,
    n: usize,
    metrics: BTreeMap<Metric, f64>,
}

pub fn eval(
    pred: Option<&Path>,
    tree: Option<&Path>,
    truth: &Path,
    metrics: &[Metric],
    output: Option<&Path>,
) -> Result<Status> {
    let truth = io::read_labels(truth)?;
    let tree = tree.map(read_tree).transpose()?;
    let pred: Vec<Label> = match (pred, &tree) {
        (Some(path), _) => read_prediction(path)?,
        // a tree's root children serve as its flat clustering
        (None, Some(t)) => {
            let mut labels = vec![0; t.vertex_count()];
            for (c, set) in t.top_level_sets().iter().enumerate() {
                for &v in set {
                    labels[v] = c as Label;
                }
            }
            labels
        }
        (None, None) => bail!("give --pred or --tree"),
    };
    let wanted: BTreeSet<Metric> = if metrics.is_empty() {
        let mut m = BTreeSet::from([Metric::Ari, Metric::Nmi]);
        if tree.is_some() {
            m.insert(Metric::Dp);
        }
        m
    } else {
        metrics.iter().copied().collect()
    };
    let mut out = BTreeMap::new();
    for m in wanted {
        let value = match m {
            Metric::Ari => ari(&pred, &truth)?,
            Metric::Nmi => nmi(&pred, &truth)?,
            Metric::Dp => match &tree {
                Some(t) => dendrogram_purity(t, &truth)?,
                None => bail!("dendrogram purity needs a tree (--tree)"),
            },
        };
        out.insert(m, value);
    }
    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        command: "eval",
        n: truth.len(),
        metrics: out,
    };
    write_output(output, &to_json(&report)?)?;
    Ok(Status::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_uses_sample_deviation() {
        let s = stat(&[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(stat(&[5.0]).std, 0.0);
    }

    #[test]
    fn conflicts_get_their_own_code() {
        let e = anyhow::Error::from(Error::ConstraintConflict(0, 1)).context("running");
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&anyhow!("bad csv")), 2);
    }
}
