//! Monolithic supervisor synthesis per node, tree orchestration and the
//! verification checks used against it.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use thiserror::Error;

use crate::compose::{coreachable, language_equivalent, reachable, restrict, sync_compose_bounded};
use crate::model::{Automaton, EventId, EventTable, ModelSet, Predicate, RequirementBody};
use crate::refine::ProductSystem;
use crate::transform::SynthesisTree;

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthesisError {
    #[error("{}state budget of {budget} states exceeded", .path.as_ref().map(|p| format!("node {p}: ")).unwrap_or_default())]
    BudgetExceeded { path: Option<String>, budget: usize },
    #[error("requirement `{requirement}` references plant `{plant}`, which is not part of the problem")]
    PlantMissing { requirement: String, plant: String },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Supervised behaviour of one synthesis problem. `automaton` is `None`
/// when the initial state had to be removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Supervisor {
    pub automaton: Option<Automaton>,
    /// Controlled state-space size: states of the trimmed supervised automaton.
    pub css: usize,
}

impl Supervisor {
    pub fn is_empty(&self) -> bool {
        self.automaton.is_none()
    }
}

/// Explicit closed-loop product of plants and requirements before pruning.
struct Product {
    tuples: Vec<Vec<usize>>,
    edges: Vec<Vec<(EventId, usize)>>,
    marked: Vec<bool>,
    /// An uncontrollable event is possible in the plants but forbidden by a
    /// requirement.
    bad: Vec<bool>,
    alphabet: BTreeSet<EventId>,
}

struct EventRule<'a> {
    event: EventId,
    plant_owners: Vec<usize>,
    req_owners: Vec<usize>,
    guards: Vec<&'a Predicate>,
}

fn explore(model: &ModelSet, plants: &[usize], requirements: &[usize], budget: usize) -> Result<Product, SynthesisError> {
    let plant_automata: Vec<&Automaton> = plants.iter().map(|&i| &model.plants[i]).collect();
    let mut req_automata: Vec<&Automaton> = Vec::new();
    let mut guards: HashMap<EventId, Vec<&Predicate>> = HashMap::new();
    for &j in requirements {
        match &model.requirements[j].body {
            RequirementBody::Automaton(a) => req_automata.push(a),
            RequirementBody::Invariant { event, predicate } => {
                guards.entry(*event).or_default().push(predicate)
            }
        }
    }
    let mut slot = vec![usize::MAX; model.plants.len()];
    for (k, &i) in plants.iter().enumerate() {
        slot[i] = k;
    }

    let alphabet: BTreeSet<EventId> = plant_automata
        .iter()
        .flat_map(|a| a.alphabet().iter().copied())
        .collect();
    let rules: Vec<EventRule> = alphabet
        .iter()
        .map(|&event| EventRule {
            event,
            plant_owners: (0..plant_automata.len())
                .filter(|&k| plant_automata[k].alphabet().contains(&event))
                .collect(),
            req_owners: (0..req_automata.len())
                .filter(|&k| req_automata[k].alphabet().contains(&event))
                .collect(),
            guards: guards.get(&event).cloned().unwrap_or_default(),
        })
        .collect();

    let np = plant_automata.len();
    let component = |k: usize| -> &Automaton {
        if k < np {
            plant_automata[k]
        } else {
            req_automata[k - np]
        }
    };
    let width = np + req_automata.len();
    let init: Vec<usize> = (0..width).map(|k| component(k).initial()).collect();

    let mut index: HashMap<Vec<usize>, usize> = HashMap::from([(init.clone(), 0)]);
    let mut tuples = vec![init];
    let mut edges: Vec<Vec<(EventId, usize)>> = Vec::new();
    let mut bad = Vec::new();
    let mut head = 0;
    while head < tuples.len() {
        let mut out = Vec::new();
        let mut is_bad = false;
        for rule in &rules {
            let mut next = tuples[head].clone();
            let plant_ok = rule.plant_owners.iter().all(|&k| {
                plant_automata[k]
                    .successor(next[k], rule.event)
                    .map(|t| next[k] = t)
                    .is_some()
            });
            if !plant_ok {
                continue;
            }
            let current = &tuples[head];
            let location_of = |plant: usize| current[slot[plant]];
            let allowed = rule.guards.iter().all(|g| g.eval(&location_of))
                && rule.req_owners.iter().all(|&k| {
                    req_automata[k]
                        .successor(next[np + k], rule.event)
                        .map(|t| next[np + k] = t)
                        .is_some()
                });
            if !allowed {
                if !model.events.is_controllable(rule.event) {
                    is_bad = true;
                }
                continue;
            }
            let target = match index.get(&next) {
                Some(&t) => t,
                None => {
                    if tuples.len() >= budget {
                        return Err(SynthesisError::BudgetExceeded { path: None, budget });
                    }
                    let t = tuples.len();
                    index.insert(next.clone(), t);
                    tuples.push(next);
                    t
                }
            };
            out.push((rule.event, target));
        }
        edges.push(out);
        bad.push(is_bad);
        head += 1;
    }

    let marked = tuples
        .iter()
        .map(|t| t.iter().enumerate().all(|(k, &s)| component(k).is_marked(s)))
        .collect();
    Ok(Product {
        tuples,
        edges,
        marked,
        bad,
        alphabet,
    })
}

/// Greatest fixpoint of "coreachable and controllable" over the explored
/// product.
fn prune(product: &Product, events: &EventTable) -> Vec<bool> {
    let n = product.tuples.len();
    let mut preds = vec![Vec::new(); n];
    for (s, out) in product.edges.iter().enumerate() {
        for &(_, t) in out {
            preds[t].push(s);
        }
    }
    let mut alive: Vec<bool> = product.bad.iter().map(|b| !b).collect();
    loop {
        let mut changed = false;

        let mut co = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| alive[s] && product.marked[s]).collect();
        for &s in &queue {
            co[s] = true;
        }
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if alive[s] && !co[s] {
                    co[s] = true;
                    queue.push_back(s);
                }
            }
        }
        for s in 0..n {
            if alive[s] && !co[s] {
                alive[s] = false;
                changed = true;
            }
        }

        // Removing one state can expose its uncontrollable predecessors.
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| !alive[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if !alive[s] {
                    continue;
                }
                let forced = product.edges[s]
                    .iter()
                    .any(|&(e, tt)| tt == t && !events.is_controllable(e));
                if forced {
                    alive[s] = false;
                    changed = true;
                    queue.push_back(s);
                }
            }
        }

        if !changed {
            return alive;
        }
    }
}

/// Maximally permissive controllable, nonblocking and safe supervisor for
/// the given plants (model indices) and requirements.
///
/// Invariant requirements that forbid an uncontrollable event make the
/// source state illegal rather than silently disabling the event.
pub fn synthesize(
    model: &ModelSet,
    plants: &[usize],
    requirements: &[usize],
    budget: usize,
) -> Result<Supervisor, SynthesisError> {
    let included: BTreeSet<usize> = plants.iter().copied().collect();
    for &j in requirements {
        let req = &model.requirements[j];
        if let Some(&p) = req
            .referenced_plants(&model.plants)
            .difference(&included)
            .next()
        {
            return Err(SynthesisError::PlantMissing {
                requirement: req.name.clone(),
                plant: model.plants[p].name().to_string(),
            });
        }
    }

    let product = explore(model, plants, requirements, budget)?;
    let alive = prune(&product, &model.events);
    if !alive[0] {
        return Ok(Supervisor {
            automaton: None,
            css: 0,
        });
    }

    let names = product
        .tuples
        .iter()
        .map(|t| {
            t.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(".")
        })
        .collect();
    let transitions = product
        .edges
        .iter()
        .enumerate()
        .flat_map(|(s, out)| out.iter().map(move |&(e, t)| (s, e, t)));
    let name = plants
        .iter()
        .map(|&i| model.plants[i].name())
        .collect::<Vec<_>>()
        .join("||");
    let full = Automaton::new(
        format!("sup({name})"),
        product.alphabet.clone(),
        names,
        0,
        product.marked.clone(),
        transitions,
    )
    .expect("explored product is deterministic");
    let sup = restrict(&full, &alive).expect("initial state is alive");
    Ok(Supervisor {
        css: sup.state_count(),
        automaton: Some(sup),
    })
}

/// No reachable supervised state disables an uncontrollable event that the
/// plant enables in the corresponding plant state.
pub fn check_controllability(plant: &Automaton, sup: &Automaton, events: &EventTable) -> bool {
    let mut seen = HashMap::from([((plant.initial(), sup.initial()), ())]);
    let mut queue = VecDeque::from([(plant.initial(), sup.initial())]);
    while let Some((p, s)) = queue.pop_front() {
        for (e, _) in plant.edges(p) {
            if !events.is_controllable(e)
                && sup.alphabet().contains(&e)
                && sup.successor(s, e).is_none()
            {
                return false;
            }
        }
        for (e, st) in sup.edges(s) {
            let pt = if plant.alphabet().contains(&e) {
                match plant.successor(p, e) {
                    Some(t) => t,
                    None => continue,
                }
            } else {
                p
            };
            if seen.insert((pt, st), ()).is_none() {
                queue.push_back((pt, st));
            }
        }
    }
    true
}

/// Every reachable state can reach a marked state.
pub fn check_nonblocking(a: &Automaton) -> bool {
    let reach = reachable(a);
    let co = coreachable(a);
    reach.iter().zip(&co).all(|(&r, &c)| !r || c)
}

/// The supervisor never takes an event that an automaton requirement
/// forbids, nor an invariant-guarded event where its predicate is false.
/// Plant locations are tracked alongside the supervisor.
pub fn check_safety(sup: &Automaton, model: &ModelSet, plants: &[usize], requirements: &[usize]) -> bool {
    let reqs: Vec<&Automaton> = requirements
        .iter()
        .filter_map(|&j| match &model.requirements[j].body {
            RequirementBody::Automaton(a) => Some(a),
            RequirementBody::Invariant { .. } => None,
        })
        .collect();
    let guards: Vec<(EventId, &Predicate)> = requirements
        .iter()
        .filter_map(|&j| match &model.requirements[j].body {
            RequirementBody::Invariant { event, predicate } => Some((*event, predicate)),
            RequirementBody::Automaton(_) => None,
        })
        .collect();
    let tracked: Vec<&Automaton> = plants
        .iter()
        .map(|&i| &model.plants[i])
        .chain(reqs.iter().copied())
        .collect();
    let mut slot = vec![usize::MAX; model.plants.len()];
    for (k, &i) in plants.iter().enumerate() {
        slot[i] = k;
    }

    let start: (usize, Vec<usize>) = (sup.initial(), tracked.iter().map(|a| a.initial()).collect());
    let mut seen = HashMap::from([(start.clone(), ())]);
    let mut queue = VecDeque::from([start]);
    while let Some((s, locs)) = queue.pop_front() {
        let location_of = |plant: usize| locs[slot[plant]];
        for (e, st) in sup.edges(s) {
            if guards.iter().any(|(g, p)| *g == e && !p.eval(&location_of)) {
                return false;
            }
            let mut next = locs.clone();
            for (k, a) in tracked.iter().enumerate() {
                if a.alphabet().contains(&e) {
                    match a.successor(locs[k], e) {
                        Some(t) => next[k] = t,
                        // Plants cannot disable; requirements may not be violated.
                        None if k >= plants.len() => return false,
                        None => {}
                    }
                }
            }
            let key = (st, next);
            if !seen.contains_key(&key) {
                seen.insert(key.clone(), ());
                queue.push_back(key);
            }
        }
    }
    true
}

/// Outcome of one node synthesis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeResult {
    pub path: String,
    pub components: BTreeSet<usize>,
    pub requirements: BTreeSet<usize>,
    pub supervisor: Supervisor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeSynthesisResult {
    /// Synthesized nodes in preorder.
    pub nodes: Vec<NodeResult>,
    /// Paths of nodes without requirements.
    pub skipped: Vec<String>,
    /// Paths of nodes whose supervisor is empty.
    pub empty: Vec<String>,
    pub total_css: usize,
}

impl TreeSynthesisResult {
    pub fn max_css(&self) -> usize {
        self.nodes.iter().map(|n| n.supervisor.css).max().unwrap_or(0)
    }

    pub fn css_of(&self, path: &str) -> Option<usize> {
        self.nodes
            .iter()
            .find(|n| n.path == path)
            .map(|n| n.supervisor.css)
    }
}

/// Synthesizes every node that owns requirements, fanning out over `jobs`
/// worker threads. Results keep preorder regardless of scheduling.
pub fn synthesize_tree(
    tree: &SynthesisTree,
    model: &ModelSet,
    ps: &ProductSystem,
    jobs: usize,
    budget: usize,
) -> Result<TreeSynthesisResult, SynthesisError> {
    let nodes = tree.nodes();
    let skipped = nodes
        .iter()
        .filter(|n| !n.needs_synthesis())
        .map(|n| n.path.clone())
        .collect();
    let work: Vec<_> = nodes.into_iter().filter(|n| n.needs_synthesis()).collect();

    let run = || {
        work.par_iter()
            .map(|n| {
                let plants = ps.expand(&n.plants);
                let reqs: Vec<usize> = n.requirements.iter().copied().collect();
                synthesize(model, &plants, &reqs, budget)
                    .map(|supervisor| NodeResult {
                        path: n.path.clone(),
                        components: n.plants.clone(),
                        requirements: n.requirements.clone(),
                        supervisor,
                    })
                    .map_err(|e| match e {
                        SynthesisError::BudgetExceeded { budget, .. } => {
                            SynthesisError::BudgetExceeded {
                                path: Some(n.path.clone()),
                                budget,
                            }
                        }
                        other => other,
                    })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let results = if jobs == 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| SynthesisError::Pool(e.to_string()))?
            .install(run)?
    } else if jobs == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SynthesisError::Pool(e.to_string()))?
            .install(run)?
    };

    let empty = results
        .iter()
        .filter(|r| r.supervisor.is_empty())
        .map(|r| r.path.clone())
        .collect();
    let total_css = results.iter().map(|r| r.supervisor.css).sum();
    Ok(TreeSynthesisResult {
        nodes: results,
        skipped,
        empty,
        total_css,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    /// All requirements are prefix-closed, the case in which the composed
    /// node supervisors are expected to match the monolithic one.
    pub prefix_closed: bool,
    /// The composed node supervisors with the global plant are nonblocking.
    pub composed_nonblocking: bool,
    pub composed_states: usize,
    pub monolithic_css: usize,
}

impl EquivalenceReport {
    /// Diagnostic flag when requirements are not prefix-closed.
    pub fn warning(&self) -> Option<&'static str> {
        (!self.prefix_closed).then_some("nonblocking not guaranteed")
    }
}

/// Compares the composition of all node supervisors with the global plant
/// against the monolithic supervisor of the whole model.
pub fn global_equivalence(
    result: &TreeSynthesisResult,
    model: &ModelSet,
    budget: usize,
) -> Result<EquivalenceReport, SynthesisError> {
    let all_plants: Vec<usize> = (0..model.plants.len()).collect();
    let all_reqs: Vec<usize> = (0..model.requirements.len()).collect();
    let monolithic = synthesize(model, &all_plants, &all_reqs, budget)?;
    let prefix_closed = model.requirements.iter().all(|r| r.is_prefix_closed());

    let composed = if result.nodes.iter().any(|n| n.supervisor.is_empty()) {
        None
    } else {
        let mut parts: Vec<Automaton> = result
            .nodes
            .iter()
            .filter_map(|n| n.supervisor.automaton.clone())
            .collect();
        parts.extend(model.plants.iter().cloned());
        Some(
            sync_compose_bounded(&parts, budget)
                .map_err(|e| SynthesisError::BudgetExceeded { path: None, budget: e.budget })?,
        )
    };

    let equivalent = match (&composed, &monolithic.automaton) {
        (Some(a), Some(b)) => language_equivalent(a, b),
        (None, None) => true,
        _ => false,
    };
    Ok(EquivalenceReport {
        equivalent,
        prefix_closed,
        composed_nonblocking: composed.as_ref().is_none_or(check_nonblocking),
        composed_states: composed.as_ref().map_or(0, Automaton::state_count),
        monolithic_css: monolithic.css,
    })
}
