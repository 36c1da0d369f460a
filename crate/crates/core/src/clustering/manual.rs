//! Hand-written clusterings.
//!
//! Text form: a cluster is a bracketed, comma-separated list of items,
//! written with `[...]` or `{...}` interchangeably. An item is a component
//! name or a nested cluster, optionally tagged `bus:`. A cluster with a
//! single item stands for that item, so `{[TaH]}` is just the leaf `TaH`:
//!
//! ```text
//! {bus:[A1], [{[TaH]}, {bus:[Ro], [{[TaV]}, {[Pr],[A2]}]}]}
//! ```
//!
//! The JSON mirror is the document written by [`Cluster::to_json`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Cluster, ClusterError};
use crate::model::ModelSet;
use crate::refine::ProductSystem;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub components: Vec<String>,
    #[serde(default)]
    pub bus: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced_split: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requirements: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ClusterDoc>,
}

impl ClusterDoc {
    pub fn from_cluster(c: &Cluster, components: &[String], requirements: &[String]) -> Self {
        Self {
            components: c.members.iter().map(|&i| components[i].clone()).collect(),
            bus: c.is_bus,
            forced_split: c.forced_split,
            requirements: c
                .requirements
                .iter()
                .map(|&j| requirements[j].clone())
                .collect(),
            children: c
                .children()
                .map(|k| ClusterDoc::from_cluster(k, components, requirements))
                .collect(),
        }
    }
}

#[derive(Debug)]
enum Raw {
    Name(String),
    Group(Vec<(bool, Raw)>),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> ClusterError {
        ClusterError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn name(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || matches!(self.src[self.pos], b'_' | b'+'))
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn group(&mut self) -> Result<Raw, ClusterError> {
        let close = match self.peek() {
            Some(b'[') => b']',
            Some(b'{') => b'}',
            _ => return Err(self.error("expected `[` or `{`")),
        };
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            items.push(self.item()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(Raw::Group(items));
                }
                _ => return Err(self.error(format!("expected `,` or `{}`", close as char))),
            }
        }
    }

    fn item(&mut self) -> Result<(bool, Raw), ClusterError> {
        match self.peek() {
            Some(b'[' | b'{') => Ok((false, self.group()?)),
            _ => {
                let word = self.name().ok_or_else(|| self.error("expected a component name or a cluster"))?;
                if word == "bus" && self.peek() == Some(b':') {
                    self.pos += 1;
                    let (_, inner) = self.item()?;
                    return Ok((true, inner));
                }
                Ok((false, Raw::Name(word)))
            }
        }
    }
}

/// Parses the bracket text form, resolving names against the product system.
pub fn parse_clustering_text(
    text: &str,
    model: &ModelSet,
    ps: &ProductSystem,
) -> Result<Cluster, ClusterError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let (bus, raw) = p.item()?;
    if p.peek().is_some() {
        return Err(p.error("trailing input after clustering"));
    }
    let mut seen = BTreeSet::new();
    let root = convert(&raw, bus, model, ps, &mut seen)?;
    finish(root, model, ps)
}

fn convert(
    raw: &Raw,
    is_bus: bool,
    model: &ModelSet,
    ps: &ProductSystem,
    seen: &mut BTreeSet<usize>,
) -> Result<Cluster, ClusterError> {
    match raw {
        Raw::Name(name) => {
            let c = ps
                .find(name, &model.plants)
                .ok_or_else(|| ClusterError::UnknownComponent(name.clone()))?;
            if !seen.insert(c) {
                return Err(ClusterError::DuplicateComponent(ps.name(c).to_string()));
            }
            Ok(Cluster::leaf(c, is_bus))
        }
        Raw::Group(items) if items.len() == 1 => {
            let (tag, inner) = &items[0];
            convert(inner, is_bus || *tag, model, ps, seen)
        }
        Raw::Group(items) => {
            let children = items
                .iter()
                .map(|(tag, inner)| convert(inner, *tag, model, ps, seen))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Cluster::node(children, is_bus))
        }
    }
}

fn finish(root: Cluster, model: &ModelSet, ps: &ProductSystem) -> Result<Cluster, ClusterError> {
    if let Some(c) = (0..ps.len()).find(|c| !root.members.contains(c)) {
        return Err(ClusterError::MissingComponent(ps.name(c).to_string()));
    }
    root.validate(ps.len())?;
    Ok(root.with_requirements((0..model.requirements.len()).collect()))
}

fn from_doc(
    doc: &ClusterDoc,
    model: &ModelSet,
    ps: &ProductSystem,
    seen: &mut BTreeSet<usize>,
) -> Result<Cluster, ClusterError> {
    if doc.children.is_empty() {
        let [name] = doc.components.as_slice() else {
            return Err(ClusterError::Malformed(format!(
                "leaf cluster lists {} components",
                doc.components.len()
            )));
        };
        let c = ps
            .find(name, &model.plants)
            .ok_or_else(|| ClusterError::UnknownComponent(name.clone()))?;
        if !seen.insert(c) {
            return Err(ClusterError::DuplicateComponent(ps.name(c).to_string()));
        }
        return Ok(Cluster::leaf(c, doc.bus));
    }
    let children = doc
        .children
        .iter()
        .map(|k| from_doc(k, model, ps, seen))
        .collect::<Result<Vec<_>, _>>()?;
    let mut node = Cluster::node(children, doc.bus);
    node.forced_split = doc.forced_split;
    let listed = doc
        .components
        .iter()
        .map(|n| {
            ps.find(n, &model.plants)
                .ok_or_else(|| ClusterError::UnknownComponent(n.clone()))
        })
        .collect::<Result<BTreeSet<_>, _>>()?;
    if !doc.components.is_empty() && listed != node.members {
        return Err(ClusterError::Malformed(
            "listed components differ from the union of the children".into(),
        ));
    }
    Ok(node)
}

/// Reads a clustering in text or JSON form. The root owns every
/// requirement; all other clusters start with none.
pub fn load_clustering(
    text: &str,
    model: &ModelSet,
    ps: &ProductSystem,
) -> Result<Cluster, ClusterError> {
    let trimmed = text.trim_start();
    let is_json = trimmed
        .strip_prefix('{')
        .is_some_and(|rest| rest.trim_start().starts_with('"'));
    if is_json {
        let doc: ClusterDoc = serde_json::from_str(text).map_err(|e| ClusterError::Syntax {
            offset: e.column(),
            message: e.to_string(),
        })?;
        let mut seen = BTreeSet::new();
        let root = from_doc(&doc, model, ps, &mut seen)?;
        finish(root, model, ps)
    } else {
        parse_clustering_text(text, model, ps)
    }
}
