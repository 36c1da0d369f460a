//! Plants, events and requirements.
//!
//! A [`ModelSet`] is the validated input of the whole pipeline. Plant and
//! requirement indices follow declaration order, and every later stage keys
//! its output on those indices.

mod doc;
mod text;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use doc::{
    AutomatonDoc, EdgeDoc, EventDoc, InvariantDoc, LocationDoc, ModelDoc, PredicateDoc,
    RequirementDoc,
};
pub use text::{parse_model_text, write_model_text};

/// Index into an [`EventTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u32);

impl EventId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub name: String,
    pub controllable: bool,
}

/// Global event declarations. Controllability is a property of the event,
/// never of an automaton using it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventTable {
    events: Vec<Event>,
    by_name: HashMap<String, EventId>,
}

impl EventTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, controllable: bool) -> Result<EventId, ModelError> {
        if self.by_name.contains_key(name) {
            return Err(ModelError::DuplicateName {
                kind: "event",
                name: name.to_string(),
            });
        }
        let id = EventId(self.events.len() as u32);
        self.events.push(Event {
            name: name.to_string(),
            controllable,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn get(&self, name: &str) -> Option<EventId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: EventId) -> &str {
        &self.events[id.index()].name
    }

    pub fn is_controllable(&self, id: EventId) -> bool {
        self.events[id.index()].controllable
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventId, &Event)> {
        self.events
            .iter()
            .enumerate()
            .map(|(i, e)| (EventId(i as u32), e))
    }
}

/// Deterministic finite automaton over global events.
///
/// States are dense indices; `edges[s]` maps each enabled event of state `s`
/// to its unique target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Automaton {
    name: String,
    alphabet: BTreeSet<EventId>,
    states: Vec<String>,
    initial: usize,
    marked: Vec<bool>,
    edges: Vec<BTreeMap<EventId, usize>>,
}

impl Automaton {
    /// Builds an automaton, rejecting nondeterminism and out-of-alphabet
    /// edges. Edge events are not added to the alphabet implicitly.
    pub fn new(
        name: impl Into<String>,
        alphabet: BTreeSet<EventId>,
        states: Vec<String>,
        initial: usize,
        marked: Vec<bool>,
        transitions: impl IntoIterator<Item = (usize, EventId, usize)>,
    ) -> Result<Self, AutomatonError> {
        let n = states.len();
        if initial >= n {
            return Err(AutomatonError::StateOutOfRange(initial));
        }
        if marked.len() != n {
            return Err(AutomatonError::MarkingLength {
                expected: n,
                found: marked.len(),
            });
        }
        let mut edges = vec![BTreeMap::new(); n];
        for (src, event, dst) in transitions {
            if src >= n {
                return Err(AutomatonError::StateOutOfRange(src));
            }
            if dst >= n {
                return Err(AutomatonError::StateOutOfRange(dst));
            }
            if !alphabet.contains(&event) {
                return Err(AutomatonError::EventNotInAlphabet { state: src, event });
            }
            if let Some(&prev) = edges[src].get(&event) {
                if prev != dst {
                    return Err(AutomatonError::Nondeterministic { state: src, event });
                }
            }
            edges[src].insert(event, dst);
        }
        Ok(Self {
            name: name.into(),
            alphabet,
            states,
            initial,
            marked,
            edges,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &BTreeSet<EventId> {
        &self.alphabet
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.states[state]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_marked(&self, state: usize) -> bool {
        self.marked[state]
    }

    pub fn successor(&self, state: usize, event: EventId) -> Option<usize> {
        self.edges[state].get(&event).copied()
    }

    /// Enabled events of `state` with their targets, in event order.
    pub fn edges(&self, state: usize) -> impl Iterator<Item = (EventId, usize)> + '_ {
        self.edges[state].iter().map(|(&e, &t)| (e, t))
    }

    pub fn transition_count(&self) -> usize {
        self.edges.iter().map(BTreeMap::len).sum()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, EventId, usize)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .flat_map(|(s, m)| m.iter().map(move |(&e, &t)| (s, e, t)))
    }

    /// True when every state is marked, i.e. the marked language equals the
    /// (prefix-closed) generated language.
    pub fn all_marked(&self) -> bool {
        self.marked.iter().all(|&m| m)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("marking vector has length {found}, expected {expected}")]
    MarkingLength { expected: usize, found: usize },
    #[error("state {state} has an edge labelled with event {event:?} outside the alphabet")]
    EventNotInAlphabet { state: usize, event: EventId },
    #[error("state {state} has two distinct edges labelled {event:?}")]
    Nondeterministic { state: usize, event: EventId },
}

/// Boolean formula over plant locations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Predicate {
    /// Plant `plant` is in location `location`.
    At { plant: usize, location: usize },
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

impl Predicate {
    /// Evaluates the formula given the current location of each plant.
    pub fn eval(&self, location_of: &impl Fn(usize) -> usize) -> bool {
        match self {
            Predicate::At { plant, location } => location_of(*plant) == *location,
            Predicate::Not(p) => !p.eval(location_of),
            Predicate::And(ps) => ps.iter().all(|p| p.eval(location_of)),
            Predicate::Or(ps) => ps.iter().any(|p| p.eval(location_of)),
        }
    }

    /// Plants named by location atoms.
    pub fn plants(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_plants(&mut out);
        out
    }

    fn collect_plants(&self, out: &mut BTreeSet<usize>) {
        match self {
            Predicate::At { plant, .. } => {
                out.insert(*plant);
            }
            Predicate::Not(p) => p.collect_plants(out),
            Predicate::And(ps) | Predicate::Or(ps) => {
                ps.iter().for_each(|p| p.collect_plants(out))
            }
        }
    }

    /// Same formula with plant indices rewritten through `map`.
    pub fn remap_plants(&self, map: &impl Fn(usize) -> usize) -> Predicate {
        match self {
            Predicate::At { plant, location } => Predicate::At {
                plant: map(*plant),
                location: *location,
            },
            Predicate::Not(p) => Predicate::Not(Box::new(p.remap_plants(map))),
            Predicate::And(ps) => Predicate::And(ps.iter().map(|p| p.remap_plants(map)).collect()),
            Predicate::Or(ps) => Predicate::Or(ps.iter().map(|p| p.remap_plants(map)).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RequirementBody {
    Automaton(Automaton),
    /// `event` may only occur in states where `predicate` holds.
    Invariant { event: EventId, predicate: Predicate },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Requirement {
    pub name: String,
    pub body: RequirementBody,
}

impl Requirement {
    /// Events the requirement mentions.
    pub fn events(&self) -> BTreeSet<EventId> {
        match &self.body {
            RequirementBody::Automaton(a) => a.alphabet().clone(),
            RequirementBody::Invariant { event, .. } => BTreeSet::from([*event]),
        }
    }

    /// Plants whose locations the requirement reads.
    pub fn location_plants(&self) -> BTreeSet<usize> {
        match &self.body {
            RequirementBody::Automaton(_) => BTreeSet::new(),
            RequirementBody::Invariant { predicate, .. } => predicate.plants(),
        }
    }

    /// Raw plant indices the requirement refers to, by shared event or by
    /// location atom.
    pub fn referenced_plants(&self, plants: &[Automaton]) -> BTreeSet<usize> {
        let events = self.events();
        let mut out = self.location_plants();
        for (i, p) in plants.iter().enumerate() {
            if !p.alphabet().is_disjoint(&events) {
                out.insert(i);
            }
        }
        out
    }

    /// Automaton-form requirements with every state marked, and all
    /// invariant-form requirements.
    pub fn is_prefix_closed(&self) -> bool {
        match &self.body {
            RequirementBody::Automaton(a) => a.all_marked(),
            RequirementBody::Invariant { .. } => true,
        }
    }
}

/// Validated plants and requirements over one event table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSet {
    pub events: EventTable,
    pub plants: Vec<Automaton>,
    pub requirements: Vec<Requirement>,
}

impl ModelSet {
    pub fn new(
        events: EventTable,
        plants: Vec<Automaton>,
        requirements: Vec<Requirement>,
    ) -> Result<Self, ModelError> {
        let mut names = BTreeSet::new();
        for p in &plants {
            if !names.insert(p.name().to_string()) {
                return Err(ModelError::DuplicateName {
                    kind: "plant",
                    name: p.name().to_string(),
                });
            }
        }
        for r in &requirements {
            if !names.insert(r.name.clone()) {
                return Err(ModelError::DuplicateName {
                    kind: "requirement",
                    name: r.name.clone(),
                });
            }
        }
        let owned: BTreeSet<EventId> = plants
            .iter()
            .flat_map(|p| p.alphabet().iter().copied())
            .collect();
        for r in &requirements {
            for e in r.events() {
                if e.index() >= events.len() {
                    return Err(ModelError::UndeclaredEvent(format!("#{}", e.0)));
                }
                if !owned.contains(&e) {
                    return Err(ModelError::UnownedEvent {
                        requirement: r.name.clone(),
                        event: events.name(e).to_string(),
                    });
                }
            }
            if let RequirementBody::Invariant { predicate, .. } = &r.body {
                check_atoms(predicate, &plants)?;
            }
        }
        Ok(Self {
            events,
            plants,
            requirements,
        })
    }

    pub fn plant_index(&self, name: &str) -> Option<usize> {
        self.plants.iter().position(|p| p.name() == name)
    }

    pub fn requirement_index(&self, name: &str) -> Option<usize> {
        self.requirements.iter().position(|r| r.name == name)
    }

    /// Canonical text rendering; parses back to an equal model.
    pub fn to_text(&self) -> String {
        write_model_text(&ModelDoc::from_model(self))
    }

    /// Canonical JSON rendering with fixed key order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ModelDoc::from_model(self))
            .expect("model documents always serialize");
        s.push('\n');
        s
    }
}

fn check_atoms(predicate: &Predicate, plants: &[Automaton]) -> Result<(), ModelError> {
    match predicate {
        Predicate::At { plant, location } => {
            let ok = plants
                .get(*plant)
                .is_some_and(|p| *location < p.state_count());
            if ok {
                Ok(())
            } else {
                Err(ModelError::UnknownLocation {
                    plant: format!("#{plant}"),
                    location: format!("#{location}"),
                })
            }
        }
        Predicate::Not(p) => check_atoms(p, plants),
        Predicate::And(ps) | Predicate::Or(ps) => {
            ps.iter().try_for_each(|p| check_atoms(p, plants))
        }
    }
}

/// Parses a model in either the text format or its JSON mirror. Input whose
/// first non-blank character is `{` is read as JSON.
pub fn parse_model(input: &str) -> Result<ModelSet, ModelError> {
    if input.trim_start().starts_with('{') {
        let doc: ModelDoc = serde_json::from_str(input).map_err(|e| ModelError::Syntax {
            line: e.line(),
            message: e.to_string(),
        })?;
        doc.build()
    } else {
        parse_model_text(input)?.build()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    At {
        line: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error("undeclared event `{0}`")]
    UndeclaredEvent(String),
    #[error("unowned event `{event}` in requirement `{requirement}`: no plant has it in its alphabet")]
    UnownedEvent { requirement: String, event: String },
    #[error("unknown location `{plant}.{location}`")]
    UnknownLocation { plant: String, location: String },
    #[error("automaton `{automaton}` is nondeterministic: location `{location}` has two `{event}` edges")]
    Nondeterministic {
        automaton: String,
        location: String,
        event: String,
    },
    #[error("automaton `{automaton}`: {message}")]
    Automaton { automaton: String, message: String },
}

impl ModelError {
    /// The error with any position wrapper removed.
    pub fn kind(&self) -> &ModelError {
        match self {
            ModelError::At { source, .. } => source.kind(),
            other => other,
        }
    }

    /// Source line, when the input position is known.
    pub fn line(&self) -> Option<usize> {
        match self {
            ModelError::At { line, .. } | ModelError::Syntax { line, .. } => Some(*line),
            _ => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Indices only; names need the model, see `text::write_predicate`.
        match self {
            Predicate::At { plant, location } => write!(f, "#{plant}.#{location}"),
            Predicate::Not(p) => write!(f, "not ({p})"),
            Predicate::And(ps) | Predicate::Or(ps) => {
                let op = if matches!(self, Predicate::And(_)) {
                    " and "
                } else {
                    " or "
                };
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(op)?;
                    }
                    write!(f, "({p})")?;
                }
                Ok(())
            }
        }
    }
}
