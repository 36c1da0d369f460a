//! Multilevel clustering → tree of synthesis subproblems.
//!
//! Requirements start at the root cluster and sink in preorder: a
//! requirement moves into a child when exactly one non-bus child touches
//! it, or, failing that, when the only child touching it is a single bus
//! child. Whatever stays is owned by the current node together with every
//! component it references.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Cluster, ClusterError};
use crate::matrix::Dmm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("invalid clustering: {0}")]
    InvalidClustering(#[from] ClusterError),
    #[error("requirement index {0} is outside the DMM")]
    UnknownRequirement(usize),
    #[error("requirement sets of the clustering are not a partition of all requirements")]
    RequirementsNotPartitioned,
}

/// One synthesis subproblem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthesisNode {
    /// Dotted position in the tree, root is `0`.
    pub path: String,
    /// Component indices `P` to compose.
    pub plants: BTreeSet<usize>,
    /// Owned requirement indices.
    pub requirements: BTreeSet<usize>,
    pub children: Vec<SynthesisNode>,
    /// Components of the originating cluster.
    pub members: BTreeSet<usize>,
    /// Bus designation of the originating cluster.
    pub is_bus: bool,
}

impl SynthesisNode {
    /// Only nodes owning requirements are synthesized.
    pub fn needs_synthesis(&self) -> bool {
        !self.requirements.is_empty()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Nodes in preorder.
    pub fn preorder(&self) -> Vec<&SynthesisNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(SynthesisNode::depth).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthesisTree {
    pub root: SynthesisNode,
    pub component_names: Vec<String>,
    pub requirement_names: Vec<String>,
}

#[derive(Serialize)]
struct NodeDoc<'a> {
    path: &'a str,
    components: Vec<&'a str>,
    requirements: Vec<&'a str>,
    cluster: Vec<&'a str>,
    bus: bool,
    synthesize: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    children: Vec<NodeDoc<'a>>,
}

#[derive(Deserialize)]
struct NodeIn {
    path: String,
    components: Vec<String>,
    requirements: Vec<String>,
    cluster: Vec<String>,
    bus: bool,
    #[serde(default)]
    children: Vec<NodeIn>,
}

fn resolve(names: &[String], wanted: &[String], what: &str) -> Result<BTreeSet<usize>, String> {
    wanted
        .iter()
        .map(|w| {
            names
                .iter()
                .position(|n| n == w)
                .ok_or_else(|| format!("unknown {what} `{w}`"))
        })
        .collect()
}

fn node_from(doc: NodeIn, comps: &[String], reqs: &[String]) -> Result<SynthesisNode, String> {
    Ok(SynthesisNode {
        plants: resolve(comps, &doc.components, "component")?,
        requirements: resolve(reqs, &doc.requirements, "requirement")?,
        members: resolve(comps, &doc.cluster, "component")?,
        is_bus: doc.bus,
        path: doc.path,
        children: doc
            .children
            .into_iter()
            .map(|k| node_from(k, comps, reqs))
            .collect::<Result<_, _>>()?,
    })
}

impl SynthesisTree {
    /// Reads a tree written by [`SynthesisTree::to_json`], resolving names
    /// against the given component and requirement lists.
    pub fn from_json(
        text: &str,
        component_names: &[String],
        requirement_names: &[String],
    ) -> Result<Self, String> {
        let doc: NodeIn = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let root = node_from(doc, component_names, requirement_names)?;
        let tree = Self {
            root,
            component_names: component_names.to_vec(),
            requirement_names: requirement_names.to_vec(),
        };
        let mut owned = BTreeSet::new();
        for n in tree.nodes() {
            for &r in &n.requirements {
                if !owned.insert(r) {
                    return Err(format!("requirement `{}` owned twice", requirement_names[r]));
                }
            }
        }
        Ok(tree)
    }

    pub fn nodes(&self) -> Vec<&SynthesisNode> {
        self.root.preorder()
    }

    pub fn synthesis_nodes(&self) -> Vec<&SynthesisNode> {
        self.nodes()
            .into_iter()
            .filter(|n| n.needs_synthesis())
            .collect()
    }

    /// `{A, B}` style label of a component set.
    pub fn plant_label(&self, set: &BTreeSet<usize>) -> String {
        let names: Vec<&str> = set.iter().map(|&c| self.component_names[c].as_str()).collect();
        format!("{{{}}}", names.join(", "))
    }

    fn node_doc<'a>(&'a self, n: &'a SynthesisNode) -> NodeDoc<'a> {
        NodeDoc {
            path: &n.path,
            components: n.plants.iter().map(|&c| self.component_names[c].as_str()).collect(),
            requirements: n
                .requirements
                .iter()
                .map(|&r| self.requirement_names[r].as_str())
                .collect(),
            cluster: n.members.iter().map(|&c| self.component_names[c].as_str()).collect(),
            bus: n.is_bus,
            synthesize: n.needs_synthesis(),
            children: n.children.iter().map(|k| self.node_doc(k)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.node_doc(&self.root))
            .expect("tree documents serialize");
        s.push('\n');
        s
    }

    /// Graphviz rendering; bus-origin nodes are filled light blue, nodes
    /// without requirements are dashed.
    pub fn to_dot(&self, css: Option<&dyn Fn(&str) -> Option<usize>>) -> String {
        let mut out = String::from("digraph mldes {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for n in self.nodes() {
            let id = n.path.replace('.', "_");
            let mut label = if n.needs_synthesis() {
                format!("G: {}\\n|R|: {}", self.plant_label(&n.plants), n.requirements.len())
            } else if n.is_leaf() {
                format!("G: {}", self.plant_label(&n.members))
            } else {
                String::new()
            };
            if let Some(v) = css.and_then(|f| f(&n.path)) {
                let _ = write!(label, "\\ncss: {v}");
            }
            let mut style = Vec::new();
            if n.is_bus {
                style.push("filled");
            }
            if !n.needs_synthesis() {
                style.push("dashed");
            }
            let _ = write!(out, "  n{id} [label=\"{label}\"");
            if !style.is_empty() {
                let _ = write!(out, ", style=\"{}\"", style.join(","));
            }
            if n.is_bus {
                out.push_str(", fillcolor=\"lightblue\"");
            }
            out.push_str("];\n");
            for k in &n.children {
                let _ = writeln!(out, "  n{id} -> n{};", k.path.replace('.', "_"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Positions (in `children` order) whose components include one referenced
/// by requirement `r`.
pub fn compute_related_clusters(children: &[Cluster], pr: &Dmm, r: usize) -> Vec<usize> {
    children
        .iter()
        .enumerate()
        .filter(|(_, c)| c.members.iter().any(|&p| pr.get(p, r)))
        .map(|(i, _)| i)
        .collect()
}

/// Where one requirement goes from a non-leaf cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Placement {
    /// Position in [`Cluster::children`] order.
    Child(usize),
    Stay,
}

fn place(cluster: &Cluster, pr: &Dmm, r: usize) -> Placement {
    let related_bus = compute_related_clusters(&cluster.bus, pr, r);
    let related_non_bus = compute_related_clusters(&cluster.non_bus, pr, r);
    if let [m] = related_non_bus.as_slice() {
        Placement::Child(cluster.bus.len() + m)
    } else if let ([b], []) = (related_bus.as_slice(), related_non_bus.as_slice()) {
        Placement::Child(*b)
    } else {
        Placement::Stay
    }
}

fn referenced(pr: &Dmm, r: usize) -> impl Iterator<Item = usize> + '_ {
    pr.referenced(r)
}

/// Distributes the requirements of a non-leaf cluster one level down.
/// Returns the components referenced by the requirements that stay.
pub fn prop_req(cluster: &mut Cluster, pr: &Dmm) -> BTreeSet<usize> {
    let mut plants = BTreeSet::new();
    let owned: Vec<usize> = cluster.requirements.iter().copied().collect();
    for r in owned {
        match place(cluster, pr, r) {
            Placement::Child(i) => {
                cluster.requirements.remove(&r);
                cluster.child_mut(i).requirements.insert(r);
            }
            Placement::Stay => plants.extend(referenced(pr, r)),
        }
    }
    plants
}

/// Recursion statistics of one transformation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransformStats {
    /// Deepest recursion level reached; the root call is level 1.
    pub max_recursion: usize,
    /// Requirement moves performed.
    pub moves: usize,
}

/// Builds the synthesis tree of `cluster`.
pub fn transform_c_to_t(
    cluster: &Cluster,
    pr: &Dmm,
    component_names: &[String],
    requirement_names: &[String],
) -> Result<SynthesisTree, TransformError> {
    transform_observed(cluster, pr, component_names, requirement_names, |_| {}).map(|(t, _)| t)
}

/// [`transform_c_to_t`] that hands the whole working clustering to
/// `observer` after every requirement move.
pub fn transform_observed(
    cluster: &Cluster,
    pr: &Dmm,
    component_names: &[String],
    requirement_names: &[String],
    mut observer: impl FnMut(&Cluster),
) -> Result<(SynthesisTree, TransformStats), TransformError> {
    cluster.validate(pr.rows())?;
    let mut seen = BTreeSet::new();
    check_requirements(cluster, pr.cols(), &mut seen)?;
    if seen.len() != pr.cols() {
        return Err(TransformError::RequirementsNotPartitioned);
    }

    let mut work = cluster.clone();
    let mut stats = TransformStats::default();
    let mut path = Vec::new();
    let root = visit(&mut work, &mut path, pr, &mut observer, &mut stats);
    Ok((
        SynthesisTree {
            root,
            component_names: component_names.to_vec(),
            requirement_names: requirement_names.to_vec(),
        },
        stats,
    ))
}

fn check_requirements(
    c: &Cluster,
    cols: usize,
    seen: &mut BTreeSet<usize>,
) -> Result<(), TransformError> {
    for &r in &c.requirements {
        if r >= cols {
            return Err(TransformError::UnknownRequirement(r));
        }
        if !seen.insert(r) {
            return Err(TransformError::RequirementsNotPartitioned);
        }
    }
    c.children()
        .try_for_each(|k| check_requirements(k, cols, seen))
}

fn at_path<'a>(root: &'a mut Cluster, path: &[usize]) -> &'a mut Cluster {
    path.iter().fold(root, |c, &i| c.child_mut(i))
}

fn path_name(path: &[usize]) -> String {
    std::iter::once("0".to_string())
        .chain(path.iter().map(usize::to_string))
        .collect::<Vec<_>>()
        .join(".")
}

fn visit(
    root: &mut Cluster,
    path: &mut Vec<usize>,
    pr: &Dmm,
    observer: &mut impl FnMut(&Cluster),
    stats: &mut TransformStats,
) -> SynthesisNode {
    stats.max_recursion = stats.max_recursion.max(path.len() + 1);
    let here = at_path(root, path);
    if here.is_leaf() {
        let mut plants = here.members.clone();
        for &r in &here.requirements {
            plants.extend(referenced(pr, r));
        }
        return SynthesisNode {
            path: path_name(path),
            plants,
            requirements: here.requirements.clone(),
            children: Vec::new(),
            members: here.members.clone(),
            is_bus: here.is_bus,
        };
    }

    // Same decisions as `prop_req`, one move at a time so the observer sees
    // every intermediate distribution.
    let owned: Vec<usize> = here.requirements.iter().copied().collect();
    let mut plants = BTreeSet::new();
    for r in owned {
        let here = at_path(root, path);
        match place(here, pr, r) {
            Placement::Child(i) => {
                here.requirements.remove(&r);
                here.child_mut(i).requirements.insert(r);
                stats.moves += 1;
                observer(root);
            }
            Placement::Stay => plants.extend(referenced(pr, r)),
        }
    }

    let here = at_path(root, path);
    let requirements = here.requirements.clone();
    let members = here.members.clone();
    let is_bus = here.is_bus;
    let child_count = here.child_count();
    let children = (0..child_count)
        .map(|i| {
            path.push(i);
            let node = visit(root, path, pr, observer, stats);
            path.pop();
            node
        })
        .collect();
    SynthesisNode {
        path: path_name(path),
        plants,
        requirements,
        children,
        members,
        is_bus,
    }
}
