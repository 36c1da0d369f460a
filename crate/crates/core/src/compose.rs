//! Synchronous composition, reachability and language equivalence.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::model::{Automaton, EventId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("state budget of {budget} states exceeded")]
pub struct BudgetExceeded {
    pub budget: usize,
}

/// Synchronous product of `automata`, restricted to reachable states.
///
/// Composed states are numbered in breadth-first discovery order, exploring
/// events in ascending id order; state names join the component location
/// names with `.` in input order.
///
/// # Panics
/// If `automata` is empty.
pub fn sync_compose(automata: &[Automaton]) -> Automaton {
    sync_compose_bounded(automata, usize::MAX).expect("unbounded composition")
}

/// [`sync_compose`] that gives up once more than `budget` states are found.
pub fn sync_compose_bounded(
    automata: &[Automaton],
    budget: usize,
) -> Result<Automaton, BudgetExceeded> {
    assert!(!automata.is_empty(), "sync_compose needs at least one automaton");
    if automata.len() == 1 {
        let only = &automata[0];
        return restrict(only, &vec![true; only.state_count()])
            .filter(|a| a.state_count() <= budget)
            .ok_or(BudgetExceeded { budget });
    }

    let alphabet: BTreeSet<EventId> = automata
        .iter()
        .flat_map(|a| a.alphabet().iter().copied())
        .collect();
    let owners: Vec<(EventId, Vec<usize>)> = alphabet
        .iter()
        .map(|&e| {
            let own = (0..automata.len())
                .filter(|&k| automata[k].alphabet().contains(&e))
                .collect();
            (e, own)
        })
        .collect();

    let init: Vec<usize> = automata.iter().map(Automaton::initial).collect();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::from([(init.clone(), 0)]);
    let mut tuples = vec![init];
    let mut transitions = Vec::new();
    let mut head = 0;
    while head < tuples.len() {
        for (event, own) in &owners {
            let mut next = tuples[head].clone();
            let enabled = own.iter().all(|&k| match automata[k].successor(next[k], *event) {
                Some(t) => {
                    next[k] = t;
                    true
                }
                None => false,
            });
            if !enabled {
                continue;
            }
            let target = match index.get(&next) {
                Some(&t) => t,
                None => {
                    if tuples.len() >= budget {
                        return Err(BudgetExceeded { budget });
                    }
                    let t = tuples.len();
                    index.insert(next.clone(), t);
                    tuples.push(next);
                    t
                }
            };
            transitions.push((head, *event, target));
        }
        head += 1;
    }

    let names = tuples
        .iter()
        .map(|t| {
            t.iter()
                .enumerate()
                .map(|(k, &s)| automata[k].state_name(s))
                .collect::<Vec<_>>()
                .join(".")
        })
        .collect();
    let marked = tuples
        .iter()
        .map(|t| t.iter().enumerate().all(|(k, &s)| automata[k].is_marked(s)))
        .collect();
    let name = automata
        .iter()
        .map(Automaton::name)
        .collect::<Vec<_>>()
        .join("||");
    Ok(Automaton::new(name, alphabet, names, 0, marked, transitions)
        .expect("product of deterministic automata is deterministic"))
}

/// States reachable from the initial state.
pub fn reachable(a: &Automaton) -> Vec<bool> {
    let mut seen = vec![false; a.state_count()];
    let mut queue = VecDeque::from([a.initial()]);
    seen[a.initial()] = true;
    while let Some(s) = queue.pop_front() {
        for (_, t) in a.edges(s) {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

/// States from which some marked state is reachable.
pub fn coreachable(a: &Automaton) -> Vec<bool> {
    let mut preds = vec![Vec::new(); a.state_count()];
    for (s, _, t) in a.transitions() {
        preds[t].push(s);
    }
    let mut seen: Vec<bool> = (0..a.state_count()).map(|s| a.is_marked(s)).collect();
    let mut queue: VecDeque<usize> = (0..a.state_count()).filter(|&s| seen[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Sub-automaton on the states in `keep` that are reachable from the
/// initial state without leaving `keep`, renumbered breadth-first.
/// `None` when the initial state itself is dropped.
pub fn restrict(a: &Automaton, keep: &[bool]) -> Option<Automaton> {
    if !keep[a.initial()] {
        return None;
    }
    let mut new_index = vec![usize::MAX; a.state_count()];
    let mut order = vec![a.initial()];
    new_index[a.initial()] = 0;
    let mut transitions = Vec::new();
    let mut head = 0;
    while head < order.len() {
        let s = order[head];
        for (e, t) in a.edges(s) {
            if !keep[t] {
                continue;
            }
            if new_index[t] == usize::MAX {
                new_index[t] = order.len();
                order.push(t);
            }
            transitions.push((head, e, new_index[t]));
        }
        head += 1;
    }
    Some(
        Automaton::new(
            a.name(),
            a.alphabet().clone(),
            order.iter().map(|&s| a.state_name(s).to_string()).collect(),
            0,
            order.iter().map(|&s| a.is_marked(s)).collect(),
            transitions,
        )
        .expect("restriction preserves determinism"),
    )
}

/// Reachable and coreachable part; `None` when the marked language is empty.
pub fn trim(a: &Automaton) -> Option<Automaton> {
    let reach = restrict(a, &vec![true; a.state_count()])?;
    let co = coreachable(&reach);
    restrict(&reach, &co)
}

/// True iff `a` and `b` generate the same language and mark the same
/// language.
///
/// For deterministic automata this holds exactly when every jointly
/// reachable state pair agrees on its enabled event set and on marking.
pub fn language_equivalent(a: &Automaton, b: &Automaton) -> bool {
    let mut seen = HashMap::from([((a.initial(), b.initial()), ())]);
    let mut queue = VecDeque::from([(a.initial(), b.initial())]);
    while let Some((p, q)) = queue.pop_front() {
        if a.is_marked(p) != b.is_marked(q) {
            return false;
        }
        let mut ea = a.edges(p);
        let mut eb = b.edges(q);
        loop {
            match (ea.next(), eb.next()) {
                (None, None) => break,
                (Some((e1, t1)), Some((e2, t2))) if e1 == e2 => {
                    if seen.insert((t1, t2), ()).is_none() {
                        queue.push_back((t1, t2));
                    }
                }
                _ => return false,
            }
        }
    }
    true
}
