//! End-to-end pipeline and artifact rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{cluster, load_clustering, Cluster, ClusterError, ClusterParams};
use crate::matrix::{build_dmm, dsm_from_dmm, Dmm, Dsm};
use crate::model::{parse_model, ModelError, ModelSet};
use crate::refine::{refine, ProductSystem};
use crate::synthesis::{synthesize_tree, SynthesisError, TreeSynthesisResult, DEFAULT_STATE_BUDGET};
use crate::transform::{transform_c_to_t, SynthesisTree, TransformError};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MLDES_OUT_DIR";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("read: {}: {source}", .path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("write: {}: {source}", .path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("parse: {0}")]
    Parse(#[from] ModelError),
    #[error("cluster: {0}")]
    Cluster(#[from] ClusterError),
    #[error("transform: {0}")]
    Transform(#[from] TransformError),
    #[error("synth: {0}")]
    Synthesis(#[from] SynthesisError),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Read { .. } => "read",
            PipelineError::Write { .. } => "write",
            PipelineError::Config(_) => "config",
            PipelineError::Parse(_) => "parse",
            PipelineError::Cluster(_) => "cluster",
            PipelineError::Transform(_) => "transform",
            PipelineError::Synthesis(_) => "synth",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClusteringMode {
    Auto,
    Manual(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub model: PathBuf,
    pub clustering: ClusteringMode,
    /// Ignored in manual mode except for reporting.
    pub params: ClusterParams,
    pub out_dir: PathBuf,
    pub state_budget: usize,
    pub jobs: usize,
}

impl PipelineConfig {
    pub fn new(model: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            model: model.into(),
            clustering: ClusteringMode::Auto,
            params: ClusterParams::default(),
            out_dir: out_dir.into(),
            state_budget: DEFAULT_STATE_BUDGET,
            jobs: 0,
        }
    }
}

/// `key = value` configuration file. Relative paths are resolved against
/// the file's directory.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<PathBuf>,
    pub manual: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub alpha: Option<u32>,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub no_bus: Option<bool>,
    pub local_bus: Option<bool>,
    pub max_depth: Option<usize>,
    pub jobs: Option<usize>,
    pub state_budget: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = read(path)?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.model, &mut cfg.manual, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a model file in text or JSON form.
pub fn load_model(path: &Path) -> Result<ModelSet, PipelineError> {
    Ok(parse_model(&read(path)?)?)
}

/// Every intermediate product of one run.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub model: ModelSet,
    pub ps: ProductSystem,
    pub dmm: Dmm,
    pub dsm: Dsm,
    pub clustering: Cluster,
    pub tree: SynthesisTree,
    pub result: TreeSynthesisResult,
}

impl Analysis {
    pub fn requirement_names(&self) -> Vec<String> {
        requirement_names(&self.model)
    }
}

pub fn requirement_names(model: &ModelSet) -> Vec<String> {
    model.requirements.iter().map(|r| r.name.clone()).collect()
}

/// Runs refine → DMM/DSM → clustering → transform → synthesis on a parsed
/// model. `manual` is clustering text, when given.
pub fn analyze(
    model: ModelSet,
    manual: Option<&str>,
    params: &ClusterParams,
    jobs: usize,
    state_budget: usize,
) -> Result<Analysis, PipelineError> {
    let ps = refine(&model.plants);
    let dmm = build_dmm(&ps, &model);
    let dsm = dsm_from_dmm(&dmm);
    let clustering = match manual {
        Some(text) => load_clustering(text, &model, &ps)?,
        None => cluster(&dsm, params, model.requirements.len())?,
    };
    let tree = transform_c_to_t(&clustering, &dmm, ps.names(), &requirement_names(&model))?;
    let result = synthesize_tree(&tree, &model, &ps, jobs, state_budget)?;
    Ok(Analysis {
        model,
        ps,
        dmm,
        dsm,
        clustering,
        tree,
        result,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mode: String,
    pub clustering: String,
    pub params: ClusterParams,
    pub components: usize,
    pub requirements: usize,
    pub total_css: usize,
    pub max_node_css: usize,
    pub synthesized_nodes: usize,
    pub skipped_nodes: Vec<String>,
    pub empty_nodes: Vec<String>,
    pub forced_splits: usize,
}

fn count_forced(c: &Cluster) -> usize {
    usize::from(c.forced_split) + c.children().map(count_forced).sum::<usize>()
}

/// Per-node css table: node path, component set, `|R|`, css.
pub fn css_csv(tree: &SynthesisTree, result: &TreeSynthesisResult) -> String {
    let mut out = String::from("node,components,requirements,css\n");
    for n in &result.nodes {
        let comps: Vec<&str> = n
            .components
            .iter()
            .map(|&c| tree.component_names[c].as_str())
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            n.path,
            comps.join(" "),
            n.requirements.len(),
            n.supervisor.css
        );
    }
    out
}

#[derive(Serialize)]
struct NodeRow<'a> {
    node: &'a str,
    components: Vec<&'a str>,
    requirements: Vec<&'a str>,
    css: usize,
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    total_css: usize,
    max_node_css: usize,
    nodes: Vec<NodeRow<'a>>,
    skipped: &'a [String],
    empty: &'a [String],
}

/// JSON form of a tree synthesis result.
pub fn result_json(tree: &SynthesisTree, result: &TreeSynthesisResult) -> String {
    let doc = ResultDoc {
        total_css: result.total_css,
        max_node_css: result.max_css(),
        nodes: result
            .nodes
            .iter()
            .map(|n| NodeRow {
                node: &n.path,
                components: n.components.iter().map(|&c| tree.component_names[c].as_str()).collect(),
                requirements: n
                    .requirements
                    .iter()
                    .map(|&r| tree.requirement_names[r].as_str())
                    .collect(),
                css: n.supervisor.css,
            })
            .collect(),
        skipped: &result.skipped,
        empty: &result.empty,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("result serializes");
    s.push('\n');
    s
}

/// Named artifacts of a run, in write order.
pub fn render(analysis: &Analysis, mode: &str, clustering_label: &str, params: &ClusterParams) -> BTreeMap<&'static str, String> {
    let names = analysis.ps.names();
    let req_names = analysis.requirement_names();
    let summary = Summary {
        mode: mode.to_string(),
        clustering: clustering_label.to_string(),
        params: params.clone(),
        components: analysis.ps.len(),
        requirements: req_names.len(),
        total_css: analysis.result.total_css,
        max_node_css: analysis.result.max_css(),
        synthesized_nodes: analysis.result.nodes.len(),
        skipped_nodes: analysis.result.skipped.clone(),
        empty_nodes: analysis.result.empty.clone(),
        forced_splits: count_forced(&analysis.clustering),
    };
    let mut summary_json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    summary_json.push('\n');

    let css = |path: &str| analysis.result.css_of(path);
    BTreeMap::from([
        ("refine.json", analysis.ps.to_json(&analysis.model.plants)),
        ("dmm.csv", analysis.dmm.to_csv(names, &req_names)),
        ("dsm.csv", analysis.dsm.to_csv(names)),
        ("clustering.txt", analysis.clustering.to_text(names) + "\n"),
        ("tree.json", analysis.tree.to_json()),
        ("tree.dot", analysis.tree.to_dot(Some(&css))),
        ("css.csv", css_csv(&analysis.tree, &analysis.result)),
        ("summary.json", summary_json),
    ])
}

/// Mode label for a run: manual runs report `manual`, automatic runs the
/// bus mode of their parameters.
fn mode_label(config: &PipelineConfig) -> String {
    match &config.clustering {
        ClusteringMode::Manual(_) => "manual".to_string(),
        ClusteringMode::Auto => config.params.mode().to_string(),
    }
}

/// Runs the whole pipeline and returns the artifact set without writing it.
pub fn run_pipeline(config: &PipelineConfig) -> Result<(Analysis, BTreeMap<&'static str, String>), PipelineError> {
    let model = load_model(&config.model)?;
    let (manual, label) = match &config.clustering {
        ClusteringMode::Manual(path) => {
            let label = path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            (Some(read(path)?), label)
        }
        ClusteringMode::Auto => (None, "auto".to_string()),
    };
    let analysis = analyze(
        model,
        manual.as_deref(),
        &config.params,
        config.jobs,
        config.state_budget,
    )?;
    let artifacts = render(&analysis, &mode_label(config), &label, &config.params);
    Ok((analysis, artifacts))
}

/// Runs the pipeline and writes every artifact into `config.out_dir`.
pub fn pipeline(config: &PipelineConfig) -> Result<Analysis, PipelineError> {
    let (analysis, artifacts) = run_pipeline(config)?;
    fs::create_dir_all(&config.out_dir).map_err(|source| PipelineError::Write {
        path: config.out_dir.clone(),
        source,
    })?;
    for (name, content) in artifacts {
        let path = config.out_dir.join(name);
        fs::write(&path, content).map_err(|source| PipelineError::Write { path, source })?;
    }
    Ok(analysis)
}

/// Descending css columns, zero-padded to equal length, one row per rank.
pub fn render_css_profile(results: &[(&str, &TreeSynthesisResult)]) -> String {
    let columns: Vec<(String, Vec<usize>)> = results
        .iter()
        .map(|(label, r)| {
            (
                label.to_string(),
                r.nodes.iter().map(|n| n.supervisor.css).collect(),
            )
        })
        .collect();
    css_profile_from_columns(&columns)
}

pub fn css_profile_from_columns(columns: &[(String, Vec<usize>)]) -> String {
    let sorted: Vec<Vec<usize>> = columns
        .iter()
        .map(|(_, v)| {
            let mut v = v.clone();
            v.sort_unstable_by(|a, b| b.cmp(a));
            v
        })
        .collect();
    let rows = sorted.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::from("rank");
    for (label, _) in columns {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for i in 0..rows {
        let _ = write!(out, "{}", i + 1);
        for col in &sorted {
            let _ = write!(out, ",{}", col.get(i).copied().unwrap_or(0));
        }
        out.push('\n');
    }
    out
}

/// Reads the css column of a `css.csv` artifact.
pub fn read_css_column(csv: &str) -> Result<Vec<usize>, PipelineError> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| PipelineError::Config(format!("malformed css.csv line `{l}`")))
        })
        .collect()
}
