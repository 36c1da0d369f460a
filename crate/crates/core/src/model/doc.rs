//! Format-neutral model document shared by the text parser and the JSON
//! mirror. Field order here is the canonical JSON key order.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    Automaton, AutomatonError, EventId, EventTable, ModelError, ModelSet, Predicate, Requirement,
    RequirementBody,
};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDoc {
    #[serde(default)]
    pub events: Vec<EventDoc>,
    #[serde(default)]
    pub plants: Vec<AutomatonDoc>,
    #[serde(default)]
    pub requirements: Vec<RequirementDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDoc {
    pub name: String,
    pub controllable: bool,
    #[serde(skip)]
    pub line: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomatonDoc {
    pub name: String,
    #[serde(default)]
    pub alphabet: Vec<String>,
    pub locations: Vec<LocationDoc>,
    #[serde(skip)]
    pub line: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationDoc {
    pub name: String,
    #[serde(default)]
    pub initial: bool,
    #[serde(default)]
    pub marked: bool,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
    #[serde(skip)]
    pub line: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub event: String,
    pub target: String,
    #[serde(skip)]
    pub line: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automaton: Option<AutomatonDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant: Option<InvariantDoc>,
    #[serde(skip)]
    pub line: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantDoc {
    pub event: String,
    pub needs: PredicateDoc,
    #[serde(skip)]
    pub line: Option<usize>,
}

/// Location atoms are written `Plant.Location`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateDoc {
    At(String),
    Not(Box<PredicateDoc>),
    And(Vec<PredicateDoc>),
    Or(Vec<PredicateDoc>),
}

fn at(line: Option<usize>, err: ModelError) -> ModelError {
    match line {
        Some(line) => ModelError::At {
            line,
            source: Box::new(err),
        },
        None => err,
    }
}

fn syntax(line: Option<usize>, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line: line.unwrap_or(0),
        message: message.into(),
    }
}

impl ModelDoc {
    /// Resolves names and validates the document into a [`ModelSet`].
    pub fn build(&self) -> Result<ModelSet, ModelError> {
        let mut events = EventTable::new();
        for e in &self.events {
            events
                .insert(&e.name, e.controllable)
                .map_err(|err| at(e.line, err))?;
        }

        let mut names = BTreeSet::new();
        let mut plants = Vec::with_capacity(self.plants.len());
        for p in &self.plants {
            if !names.insert(p.name.as_str()) {
                return Err(at(
                    p.line,
                    ModelError::DuplicateName {
                        kind: "plant",
                        name: p.name.clone(),
                    },
                ));
            }
            plants.push(build_automaton(p, &events)?);
        }

        let owned: BTreeSet<EventId> = plants
            .iter()
            .flat_map(|p| p.alphabet().iter().copied())
            .collect();
        let mut requirements = Vec::with_capacity(self.requirements.len());
        for r in &self.requirements {
            if !names.insert(r.name.as_str()) {
                return Err(at(
                    r.line,
                    ModelError::DuplicateName {
                        kind: "requirement",
                        name: r.name.clone(),
                    },
                ));
            }
            let body = match (&r.automaton, &r.invariant) {
                (Some(a), None) => {
                    let built = build_automaton(a, &events)?.with_name(r.name.clone());
                    if let Some(e) = built.alphabet().iter().find(|e| !owned.contains(e)) {
                        return Err(at(
                            a.line.or(r.line),
                            ModelError::UnownedEvent {
                                requirement: r.name.clone(),
                                event: events.name(*e).to_string(),
                            },
                        ));
                    }
                    RequirementBody::Automaton(built)
                }
                (None, Some(inv)) => {
                    let line = inv.line.or(r.line);
                    let event = events.get(&inv.event).ok_or_else(|| {
                        at(line, ModelError::UndeclaredEvent(inv.event.clone()))
                    })?;
                    if !owned.contains(&event) {
                        return Err(at(
                            line,
                            ModelError::UnownedEvent {
                                requirement: r.name.clone(),
                                event: inv.event.clone(),
                            },
                        ));
                    }
                    let predicate =
                        build_predicate(&inv.needs, &plants).map_err(|err| at(line, err))?;
                    RequirementBody::Invariant { event, predicate }
                }
                _ => {
                    return Err(syntax(
                        r.line,
                        format!(
                            "requirement `{}` needs exactly one of an automaton body or an invariant",
                            r.name
                        ),
                    ))
                }
            };
            requirements.push(Requirement {
                name: r.name.clone(),
                body,
            });
        }

        ModelSet::new(events, plants, requirements)
    }

    pub fn from_model(model: &ModelSet) -> Self {
        let events = model
            .events
            .iter()
            .map(|(_, e)| EventDoc {
                name: e.name.clone(),
                controllable: e.controllable,
                line: None,
            })
            .collect();
        let plants = model
            .plants
            .iter()
            .map(|p| automaton_doc(p, &model.events))
            .collect();
        let requirements = model
            .requirements
            .iter()
            .map(|r| match &r.body {
                RequirementBody::Automaton(a) => RequirementDoc {
                    name: r.name.clone(),
                    automaton: Some(automaton_doc(a, &model.events)),
                    invariant: None,
                    line: None,
                },
                RequirementBody::Invariant { event, predicate } => RequirementDoc {
                    name: r.name.clone(),
                    automaton: None,
                    invariant: Some(InvariantDoc {
                        event: model.events.name(*event).to_string(),
                        needs: predicate_doc(predicate, &model.plants),
                        line: None,
                    }),
                    line: None,
                },
            })
            .collect();
        Self {
            events,
            plants,
            requirements,
        }
    }
}

fn build_automaton(doc: &AutomatonDoc, events: &EventTable) -> Result<Automaton, ModelError> {
    let lookup = |name: &str, line: Option<usize>| {
        events
            .get(name)
            .ok_or_else(|| at(line, ModelError::UndeclaredEvent(name.to_string())))
    };

    let mut alphabet = BTreeSet::new();
    for e in &doc.alphabet {
        alphabet.insert(lookup(e, doc.line)?);
    }

    let mut index = HashMap::new();
    for (i, loc) in doc.locations.iter().enumerate() {
        if index.insert(loc.name.as_str(), i).is_some() {
            return Err(at(
                loc.line,
                ModelError::DuplicateName {
                    kind: "location",
                    name: format!("{}.{}", doc.name, loc.name),
                },
            ));
        }
    }

    let initials: Vec<usize> = doc
        .locations
        .iter()
        .enumerate()
        .filter(|(_, l)| l.initial)
        .map(|(i, _)| i)
        .collect();
    let initial = match initials.as_slice() {
        [i] => *i,
        [] => {
            return Err(syntax(
                doc.line,
                format!("automaton `{}` has no initial location", doc.name),
            ))
        }
        [_, second, ..] => {
            return Err(syntax(
                doc.locations[*second].line.or(doc.line),
                format!("automaton `{}` has more than one initial location", doc.name),
            ))
        }
    };

    let mut transitions = Vec::new();
    let mut seen = HashMap::new();
    for (src, loc) in doc.locations.iter().enumerate() {
        for edge in &loc.edges {
            let line = edge.line.or(loc.line);
            let event = lookup(&edge.event, line)?;
            let dst = *index.get(edge.target.as_str()).ok_or_else(|| {
                at(
                    line,
                    ModelError::UnknownLocation {
                        plant: doc.name.clone(),
                        location: edge.target.clone(),
                    },
                )
            })?;
            if seen.insert((src, event), dst).is_some() {
                return Err(at(
                    line,
                    ModelError::Nondeterministic {
                        automaton: doc.name.clone(),
                        location: loc.name.clone(),
                        event: edge.event.clone(),
                    },
                ));
            }
            alphabet.insert(event);
            transitions.push((src, event, dst));
        }
    }

    Automaton::new(
        doc.name.clone(),
        alphabet,
        doc.locations.iter().map(|l| l.name.clone()).collect(),
        initial,
        doc.locations.iter().map(|l| l.marked).collect(),
        transitions,
    )
    .map_err(|e: AutomatonError| {
        at(
            doc.line,
            ModelError::Automaton {
                automaton: doc.name.clone(),
                message: e.to_string(),
            },
        )
    })
}

fn build_predicate(doc: &PredicateDoc, plants: &[Automaton]) -> Result<Predicate, ModelError> {
    Ok(match doc {
        PredicateDoc::At(atom) => {
            let (plant_name, loc_name) = atom.split_once('.').ok_or_else(|| {
                ModelError::UnknownLocation {
                    plant: atom.clone(),
                    location: String::new(),
                }
            })?;
            let unknown = || ModelError::UnknownLocation {
                plant: plant_name.to_string(),
                location: loc_name.to_string(),
            };
            let plant = plants
                .iter()
                .position(|p| p.name() == plant_name)
                .ok_or_else(unknown)?;
            let location = plants[plant].state_index(loc_name).ok_or_else(unknown)?;
            Predicate::At { plant, location }
        }
        PredicateDoc::Not(p) => Predicate::Not(Box::new(build_predicate(p, plants)?)),
        PredicateDoc::And(ps) => Predicate::And(
            ps.iter()
                .map(|p| build_predicate(p, plants))
                .collect::<Result<_, _>>()?,
        ),
        PredicateDoc::Or(ps) => Predicate::Or(
            ps.iter()
                .map(|p| build_predicate(p, plants))
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn automaton_doc(a: &Automaton, events: &EventTable) -> AutomatonDoc {
    AutomatonDoc {
        name: a.name().to_string(),
        alphabet: a
            .alphabet()
            .iter()
            .map(|&e| events.name(e).to_string())
            .collect(),
        locations: (0..a.state_count())
            .map(|s| LocationDoc {
                name: a.state_name(s).to_string(),
                initial: s == a.initial(),
                marked: a.is_marked(s),
                edges: a
                    .edges(s)
                    .map(|(e, t)| EdgeDoc {
                        event: events.name(e).to_string(),
                        target: a.state_name(t).to_string(),
                        line: None,
                    })
                    .collect(),
                line: None,
            })
            .collect(),
        line: None,
    }
}

fn predicate_doc(p: &Predicate, plants: &[Automaton]) -> PredicateDoc {
    match p {
        Predicate::At { plant, location } => PredicateDoc::At(format!(
            "{}.{}",
            plants[*plant].name(),
            plants[*plant].state_name(*location)
        )),
        Predicate::Not(q) => PredicateDoc::Not(Box::new(predicate_doc(q, plants))),
        Predicate::And(qs) => PredicateDoc::And(qs.iter().map(|q| predicate_doc(q, plants)).collect()),
        Predicate::Or(qs) => PredicateDoc::Or(qs.iter().map(|q| predicate_doc(q, plants)).collect()),
    }
}
