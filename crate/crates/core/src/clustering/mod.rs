//! Multilevel clustering with local buses.
//!
//! A [`Cluster`] is the recursive tuple of a component set, its bus
//! children, its non-bus children and the requirement indices it currently
//! owns. [`cluster`] derives one from a DSM; [`load_clustering`] reads a
//! hand-written one.

mod manual;
mod markov;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manual::{load_clustering, parse_clustering_text, ClusterDoc};
pub use markov::{detect_bus, flow_scores, markov_partition, BusSplit};

use crate::matrix::Dsm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("Markov clustering did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid clustering parameter: {0}")]
    InvalidParams(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{0}` appears more than once")]
    DuplicateComponent(String),
    #[error("missing component `{0}`")]
    MissingComponent(String),
    #[error("clustering syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("malformed clustering: {0}")]
    Malformed(String),
}

/// Clustering coefficients. `gamma = None` disables bus detection; with
/// `local_bus = false` buses are only sought at the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub alpha: u32,
    pub beta: f64,
    pub mu: f64,
    pub gamma: Option<f64>,
    pub local_bus: bool,
    pub max_depth: Option<usize>,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            alpha: 2,
            beta: 1.7,
            mu: 1.0,
            gamma: Some(2.0),
            local_bus: false,
            max_depth: None,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.alpha < 1 {
            return Err(ClusterError::InvalidParams("alpha must be >= 1".into()));
        }
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(ClusterError::InvalidParams("beta must be > 1".into()));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(ClusterError::InvalidParams("mu must lie in (0, 1]".into()));
        }
        if let Some(g) = self.gamma {
            if !(g >= 1.0) || !g.is_finite() {
                return Err(ClusterError::InvalidParams("gamma must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Short mode label: `no-bus`, `global-bus` or `local-bus`.
    pub fn mode(&self) -> &'static str {
        match (self.gamma, self.local_bus) {
            (None, _) => "no-bus",
            (Some(_), false) => "global-bus",
            (Some(_), true) => "local-bus",
        }
    }
}

/// One level of a multilevel clustering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    /// Component indices `A`.
    pub members: BTreeSet<usize>,
    /// Bus children `B`, ordered by smallest member.
    pub bus: Vec<Cluster>,
    /// Non-bus children `M`, ordered by smallest member.
    pub non_bus: Vec<Cluster>,
    /// Requirement indices `R`.
    pub requirements: BTreeSet<usize>,
    /// Designation of this cluster within its parent.
    pub is_bus: bool,
    /// Set when partitioning made no progress and the lowest component was
    /// split off to force recursion.
    pub forced_split: bool,
}

impl Cluster {
    pub fn leaf(component: usize, is_bus: bool) -> Self {
        Self {
            members: BTreeSet::from([component]),
            bus: Vec::new(),
            non_bus: Vec::new(),
            requirements: BTreeSet::new(),
            is_bus,
            forced_split: false,
        }
    }

    /// Builds an inner cluster; children are sorted into `B` and `M` by
    /// their `is_bus` flag and ordered by smallest member.
    pub fn node(children: Vec<Cluster>, is_bus: bool) -> Self {
        let members = children
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .collect();
        let (mut bus, mut non_bus): (Vec<_>, Vec<_>) =
            children.into_iter().partition(|c| c.is_bus);
        bus.sort_by_key(Cluster::smallest);
        non_bus.sort_by_key(Cluster::smallest);
        Self {
            members,
            bus,
            non_bus,
            requirements: BTreeSet::new(),
            is_bus,
            forced_split: false,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.bus.is_empty() && self.non_bus.is_empty()
    }

    pub fn smallest(&self) -> usize {
        self.members.first().copied().unwrap_or(usize::MAX)
    }

    /// Bus children first, then non-bus children.
    pub fn children(&self) -> impl Iterator<Item = &Cluster> {
        self.bus.iter().chain(self.non_bus.iter())
    }

    pub fn child_count(&self) -> usize {
        self.bus.len() + self.non_bus.len()
    }

    /// Mutable child by position in [`Cluster::children`] order.
    pub fn child_mut(&mut self, i: usize) -> &mut Cluster {
        if i < self.bus.len() {
            &mut self.bus[i]
        } else {
            let k = i - self.bus.len();
            &mut self.non_bus[k]
        }
    }

    /// Number of levels; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children().map(Cluster::depth).max().unwrap_or(0)
    }

    /// Number of clusters in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().map(Cluster::size).sum::<usize>()
    }

    /// Whether any cluster at depth `>= from` (root is depth 0) is a bus.
    pub fn has_bus_below(&self, from: usize) -> bool {
        fn walk(c: &Cluster, depth: usize, from: usize) -> bool {
            c.children()
                .any(|k| (k.is_bus && depth >= from) || walk(k, depth + 1, from))
        }
        walk(self, 0, from)
    }

    pub fn with_requirements(mut self, requirements: BTreeSet<usize>) -> Self {
        self.requirements = requirements;
        self
    }

    /// Checks the structural invariants for a clustering over components
    /// `0..components`.
    pub fn validate(&self, components: usize) -> Result<(), ClusterError> {
        let all: BTreeSet<usize> = (0..components).collect();
        if let Some(&c) = self.members.difference(&all).next() {
            return Err(ClusterError::UnknownComponent(format!("#{c}")));
        }
        if let Some(&c) = all.difference(&self.members).next() {
            return Err(ClusterError::MissingComponent(format!("#{c}")));
        }
        self.validate_node()
    }

    fn validate_node(&self) -> Result<(), ClusterError> {
        if self.members.is_empty() {
            return Err(ClusterError::Malformed("empty cluster".into()));
        }
        if self.is_leaf() {
            if self.members.len() != 1 {
                return Err(ClusterError::Malformed(format!(
                    "leaf cluster with {} components",
                    self.members.len()
                )));
            }
            return Ok(());
        }
        let mut union = BTreeSet::new();
        for child in self.children() {
            if child.members.len() >= self.members.len() {
                return Err(ClusterError::Malformed(
                    "child cluster is not smaller than its parent".into(),
                ));
            }
            for &c in &child.members {
                if !union.insert(c) {
                    return Err(ClusterError::DuplicateComponent(format!("#{c}")));
                }
            }
            child.validate_node()?;
        }
        if union != self.members {
            return Err(ClusterError::Malformed(
                "children do not cover their parent".into(),
            ));
        }
        Ok(())
    }

    /// Bracket text form, e.g. `[bus:A1, [TaH, [TaV, Pr]]]`.
    pub fn to_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.write_text(names, &mut out);
        out
    }

    fn write_text(&self, names: &[String], out: &mut String) {
        if self.is_leaf() {
            out.push_str(&names[self.smallest()]);
            return;
        }
        out.push('[');
        for (i, child) in self.children().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            if child.is_bus {
                out.push_str("bus:");
            }
            child.write_text(names, out);
        }
        out.push(']');
    }

    pub fn to_json(&self, component_names: &[String], requirement_names: &[String]) -> String {
        let mut s = serde_json::to_string_pretty(&ClusterDoc::from_cluster(
            self,
            component_names,
            requirement_names,
        ))
        .expect("cluster documents serialize");
        s.push('\n');
        s
    }
}

/// Derives a multilevel clustering from `dsm`; the root owns requirements
/// `0..requirements`.
pub fn cluster(
    dsm: &Dsm,
    params: &ClusterParams,
    requirements: usize,
) -> Result<Cluster, ClusterError> {
    params.validate()?;
    if dsm.is_empty() {
        return Err(ClusterError::Malformed("empty DSM".into()));
    }
    let all: Vec<usize> = (0..dsm.len()).collect();
    let root = build(dsm, params, all, 0, false)?;
    Ok(root.with_requirements((0..requirements).collect()))
}

fn build(
    dsm: &Dsm,
    params: &ClusterParams,
    members: Vec<usize>,
    depth: usize,
    is_bus: bool,
) -> Result<Cluster, ClusterError> {
    if members.len() == 1 {
        return Ok(Cluster::leaf(members[0], is_bus));
    }
    if params.max_depth.is_some_and(|d| depth >= d) {
        let leaves = members.iter().map(|&c| Cluster::leaf(c, false)).collect();
        return Ok(Cluster::node(leaves, is_bus));
    }

    let sub = dsm.submatrix(&members);
    let split = match params.gamma {
        Some(gamma) if depth == 0 || params.local_bus => detect_bus(&sub, gamma, params),
        _ => BusSplit {
            bus: Vec::new(),
            non_bus: (0..members.len()).collect(),
        },
    };

    let mut cells: Vec<(Vec<usize>, bool)> = Vec::new();
    for (side, bus) in [(&split.bus, true), (&split.non_bus, false)] {
        if side.is_empty() {
            continue;
        }
        for cell in markov_partition(&sub.submatrix(side), params)? {
            cells.push((cell.iter().map(|&k| members[side[k]]).collect(), bus));
        }
    }

    let mut forced_split = false;
    if cells.len() == 1 {
        let (rest, bus) = cells.pop().expect("one cell");
        cells.push((vec![rest[0]], bus));
        cells.push((rest[1..].to_vec(), bus));
        forced_split = true;
    }

    let children = cells
        .into_iter()
        .map(|(cell, bus)| build(dsm, params, cell, depth + 1, bus))
        .collect::<Result<Vec<_>, _>>()?;
    let mut node = Cluster::node(children, is_bus);
    node.forced_split = forced_split;
    Ok(node)
}
