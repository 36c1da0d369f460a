//! Random instance generators and brute-force oracles shared by the
//! integration tests. The oracles use only model and matrix accessors;
//! `check_propositions` drives the transform under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use mldes::clustering::Cluster;
use mldes::model::{parse_model, Automaton, EventId, ModelSet, RequirementBody};
use rand::rngs::StdRng;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct InstanceShape {
    pub plants: std::ops::RangeInclusive<usize>,
    pub states: std::ops::RangeInclusive<usize>,
    pub requirements: std::ops::RangeInclusive<usize>,
    /// Probability that a plant event is also added to another plant.
    pub share: f64,
    /// Requirements may have unmarked states.
    pub non_prefix_closed: bool,
    /// Probability that a plant state is marked.
    pub plant_marking: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self {
            plants: 2..=6,
            states: 2..=4,
            requirements: 1..=8,
            share: 0.0,
            non_prefix_closed: false,
            plant_marking: 0.6,
        }
    }
}

fn predicate(rng: &mut StdRng, plants: &[(String, usize)], depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.5) {
        let (name, states) = &plants[rng.random_range(0..plants.len())];
        return format!("{name}.s{}", rng.random_range(0..*states));
    }
    match rng.random_range(0..3) {
        0 => format!("not ({})", predicate(rng, plants, depth - 1)),
        1 => format!(
            "({}) and ({})",
            predicate(rng, plants, depth - 1),
            predicate(rng, plants, depth - 1)
        ),
        _ => format!(
            "({}) or ({})",
            predicate(rng, plants, depth - 1),
            predicate(rng, plants, depth - 1)
        ),
    }
}

/// Random model in the text format.
pub fn random_model_text(rng: &mut StdRng, shape: &InstanceShape) -> String {
    let n = rng.random_range(shape.plants.clone());
    let mut events: Vec<(String, bool)> = Vec::new();
    let mut plants: Vec<(String, usize)> = Vec::new();
    let mut alphabets: Vec<Vec<String>> = Vec::new();
    for p in 0..n {
        let states = rng.random_range(shape.states.clone());
        let own = rng.random_range(1..=3);
        let mut alpha = Vec::new();
        for k in 0..own {
            let name = format!("g{p}_{k}");
            events.push((name.clone(), rng.random_bool(0.6)));
            alpha.push(name);
        }
        plants.push((format!("G{p}"), states));
        alphabets.push(alpha);
    }
    for p in 0..n {
        if n > 1 && rng.random_bool(shape.share) {
            let q = (p + rng.random_range(1..n)) % n;
            let e = alphabets[p][0].clone();
            if !alphabets[q].contains(&e) {
                alphabets[q].push(e);
            }
        }
    }

    let mut text = String::from("events\n");
    for (e, c) in &events {
        let _ = writeln!(text, "  {e} {}", if *c { "controllable" } else { "uncontrollable" });
    }
    text.push_str("end\n");
    for (p, (name, states)) in plants.iter().enumerate() {
        let _ = writeln!(text, "plant {name}");
        let _ = writeln!(text, "  alphabet {}", alphabets[p].join(" "));
        let marked: Vec<bool> = (0..*states).map(|s| s == 0 && rng.random_bool(0.5) || rng.random_bool(shape.plant_marking)).collect();
        let any = marked.iter().any(|&m| m);
        for s in 0..*states {
            let m = marked[s] || (!any && s == states - 1);
            let _ = writeln!(text, "  location s{s}{}{}", if s == 0 { " initial" } else { "" }, if m { " marked" } else { "" });
            for e in &alphabets[p] {
                if rng.random_bool(0.55) {
                    let _ = writeln!(text, "    edge {e} goto s{}", rng.random_range(0..*states));
                }
            }
        }
        text.push_str("end\n");
    }

    let all_events: Vec<&String> = events.iter().map(|(e, _)| e).collect();
    let m = rng.random_range(shape.requirements.clone());
    for r in 0..m {
        let _ = writeln!(text, "requirement K{r}");
        if rng.random_bool(0.5) {
            let e = all_events[rng.random_range(0..all_events.len())];
            let _ = writeln!(text, "  invariant {e} needs {}", predicate(rng, &plants, 2));
        } else {
            let states = rng.random_range(2..=3);
            let count = rng.random_range(1..=3);
            let mut alpha: Vec<&String> = Vec::new();
            for _ in 0..count {
                let e = all_events[rng.random_range(0..all_events.len())];
                if !alpha.contains(&e) {
                    alpha.push(e);
                }
            }
            let alpha: Vec<&str> = alpha.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(text, "  alphabet {}", alpha.join(" "));
            let marked: Vec<bool> = (0..states)
                .map(|s| !shape.non_prefix_closed || s == 0 || rng.random_bool(0.5))
                .collect();
            for s in 0..states {
                let _ = writeln!(
                    text,
                    "  location q{s}{}{}",
                    if s == 0 { " initial" } else { "" },
                    if marked[s] { " marked" } else { "" }
                );
                for e in &alpha {
                    if rng.random_bool(0.7) {
                        let _ = writeln!(text, "    edge {e} goto q{}", rng.random_range(0..states));
                    }
                }
            }
        }
        text.push_str("end\n");
    }
    text
}

pub fn random_model(rng: &mut StdRng, shape: &InstanceShape) -> ModelSet {
    let text = random_model_text(rng, shape);
    parse_model(&text).unwrap_or_else(|e| panic!("generator produced an invalid model: {e}\n{text}"))
}

/// Explicit product of automata by enumerating every state tuple.
pub struct BruteProduct {
    pub tuples: Vec<Vec<usize>>,
    pub edges: BTreeMap<(usize, EventId), usize>,
    pub marked: Vec<bool>,
    pub initial: usize,
}

pub fn all_tuples(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |s| {
                    let mut t = t.clone();
                    t.push(s);
                    t
                })
            })
            .collect();
    }
    out
}

/// Synchronous product over the full tuple space: an event moves every
/// automaton that has it in its alphabet, and is blocked if one of them has
/// no edge.
pub fn brute_product(automata: &[&Automaton]) -> BruteProduct {
    let sizes: Vec<usize> = automata.iter().map(|a| a.state_count()).collect();
    let tuples = all_tuples(&sizes);
    let index: HashMap<Vec<usize>, usize> = tuples.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let alphabet: BTreeSet<EventId> = automata.iter().flat_map(|a| a.alphabet().iter().copied()).collect();
    let mut edges = BTreeMap::new();
    for (i, t) in tuples.iter().enumerate() {
        'event: for &e in &alphabet {
            let mut next = t.clone();
            for (k, a) in automata.iter().enumerate() {
                if a.alphabet().contains(&e) {
                    match a.successor(t[k], e) {
                        Some(s) => next[k] = s,
                        None => continue 'event,
                    }
                }
            }
            edges.insert((i, e), index[&next]);
        }
    }
    let marked = tuples
        .iter()
        .map(|t| t.iter().enumerate().all(|(k, &s)| automata[k].is_marked(s)))
        .collect();
    let initial = index[&automata.iter().map(|a| a.initial()).collect::<Vec<_>>()];
    BruteProduct {
        tuples,
        edges,
        marked,
        initial,
    }
}

/// Oracle-side deterministic automaton.
#[derive(Clone, Debug)]
pub struct Explicit {
    pub initial: usize,
    pub marked: Vec<bool>,
    pub edges: Vec<BTreeMap<EventId, usize>>,
}

impl Explicit {
    pub fn from_automaton(a: &Automaton) -> Self {
        Self {
            initial: a.initial(),
            marked: (0..a.state_count()).map(|s| a.is_marked(s)).collect(),
            edges: (0..a.state_count()).map(|s| a.edges(s).collect()).collect(),
        }
    }

    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(s) = queue.pop_front() {
            for &t in self.edges[s].values() {
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Words of length ≤ `len` in the closed language, and which are marked.
    pub fn words(&self, len: usize) -> BTreeMap<Vec<EventId>, bool> {
        let mut out = BTreeMap::new();
        let mut frontier = vec![(Vec::new(), self.initial)];
        for step in 0..=len {
            let mut next = Vec::new();
            for (w, s) in frontier {
                out.insert(w.clone(), self.marked[s]);
                if step < len {
                    for (&e, &t) in &self.edges[s] {
                        let mut w2 = w.clone();
                        w2.push(e);
                        next.push((w2, t));
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

/// Pair walk of two deterministic automata: same enabled events and same
/// marking on every reachable pair. For trim automata this is equality of
/// both the closed and the marked language.
pub fn explicit_equivalent(a: &Explicit, b: &Explicit) -> bool {
    let mut seen = BTreeSet::from([(a.initial, b.initial)]);
    let mut queue = VecDeque::from([(a.initial, b.initial)]);
    while let Some((x, y)) = queue.pop_front() {
        if a.marked[x] != b.marked[y] {
            return false;
        }
        let ex: Vec<&EventId> = a.edges[x].keys().collect();
        let ey: Vec<&EventId> = b.edges[y].keys().collect();
        if ex != ey {
            return false;
        }
        for (e, &tx) in &a.edges[x] {
            let pair = (tx, b.edges[y][e]);
            if seen.insert(pair) {
                queue.push_back(pair);
            }
        }
    }
    true
}

/// Maximally permissive supervisor by repeated full scans over the whole
/// tuple space of plants and requirement automata. `None` when empty.
pub fn naive_supervisor(model: &ModelSet, plants: &[usize], requirements: &[usize]) -> Option<Explicit> {
    let plant_aut: Vec<&Automaton> = plants.iter().map(|&i| &model.plants[i]).collect();
    let mut req_aut: Vec<&Automaton> = Vec::new();
    let mut invariants = Vec::new();
    for &j in requirements {
        match &model.requirements[j].body {
            RequirementBody::Automaton(a) => req_aut.push(a),
            RequirementBody::Invariant { event, predicate } => invariants.push((*event, predicate)),
        }
    }
    let np = plant_aut.len();
    let all: Vec<&Automaton> = plant_aut.iter().chain(req_aut.iter()).copied().collect();
    let sizes: Vec<usize> = all.iter().map(|a| a.state_count()).collect();
    let tuples = all_tuples(&sizes);
    let index: HashMap<Vec<usize>, usize> = tuples.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let alphabet: BTreeSet<EventId> = plant_aut.iter().flat_map(|a| a.alphabet().iter().copied()).collect();
    let slot: HashMap<usize, usize> = plants.iter().enumerate().map(|(k, &i)| (i, k)).collect();

    // Plant move, then whether the requirements let it through.
    let mut moves: Vec<Vec<(EventId, Option<usize>)>> = Vec::new();
    for t in &tuples {
        let mut out = Vec::new();
        'event: for &e in &alphabet {
            let mut next = t.clone();
            for k in 0..np {
                if all[k].alphabet().contains(&e) {
                    match all[k].successor(t[k], e) {
                        Some(s) => next[k] = s,
                        None => continue 'event,
                    }
                }
            }
            let mut ok = invariants
                .iter()
                .filter(|(ev, _)| *ev == e)
                .all(|(_, p)| p.eval(&|plant| t[slot[&plant]]));
            for k in np..all.len() {
                if ok && all[k].alphabet().contains(&e) {
                    match all[k].successor(t[k], e) {
                        Some(s) => next[k] = s,
                        None => ok = false,
                    }
                }
            }
            out.push((e, ok.then(|| index[&next])));
        }
        moves.push(out);
    }
    let marked: Vec<bool> = tuples
        .iter()
        .map(|t| t.iter().enumerate().all(|(k, &s)| all[k].is_marked(s)))
        .collect();

    let mut good = vec![true; tuples.len()];
    loop {
        let mut changed = false;
        for s in 0..tuples.len() {
            if !good[s] {
                continue;
            }
            let uncontrollable_escape = moves[s].iter().any(|&(e, t)| {
                !model.events.is_controllable(e) && t.is_none_or(|t| !good[t])
            });
            if uncontrollable_escape {
                good[s] = false;
                changed = true;
            }
        }
        let mut co: Vec<bool> = (0..tuples.len()).map(|s| good[s] && marked[s]).collect();
        loop {
            let mut grew = false;
            for s in 0..tuples.len() {
                if good[s] && !co[s] && moves[s].iter().any(|&(_, t)| t.is_some_and(|t| good[t] && co[t])) {
                    co[s] = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        for s in 0..tuples.len() {
            if good[s] && !co[s] {
                good[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let init = index[&all.iter().map(|a| a.initial()).collect::<Vec<_>>()];
    if !good[init] {
        return None;
    }
    Some(Explicit {
        initial: init,
        marked,
        edges: moves
            .iter()
            .map(|out| {
                out.iter()
                    .filter_map(|&(e, t)| t.filter(|&t| good[t]).map(|t| (e, t)))
                    .collect()
            })
            .collect(),
    })
}

/// Random multilevel clustering over `0..n`, bus flags anywhere below the
/// root.
pub fn random_clustering(rng: &mut StdRng, n: usize, requirements: usize) -> Cluster {
    let mut members: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        members.swap(i, rng.random_range(0..=i));
    }
    let root = random_subtree(rng, &members, false);
    root.with_requirements((0..requirements).collect())
}

fn random_subtree(rng: &mut StdRng, members: &[usize], is_bus: bool) -> Cluster {
    if members.len() == 1 {
        return Cluster::leaf(members[0], is_bus);
    }
    let parts = rng.random_range(2..=members.len().min(4));
    let mut cuts: Vec<usize> = (1..members.len()).collect();
    for i in (1..cuts.len()).rev() {
        cuts.swap(i, rng.random_range(0..=i));
    }
    let mut cuts: Vec<usize> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort_unstable();
    let mut children = Vec::new();
    let mut start = 0;
    for end in cuts.into_iter().chain([members.len()]) {
        let bus = rng.random_bool(0.3);
        children.push(random_subtree(rng, &members[start..end], bus));
        start = end;
    }
    Cluster::node(children, is_bus)
}

pub fn seeded(seed: u64) -> StdRng {
    use rand::SeedableRng;
    StdRng::seed_from_u64(seed)
}

/// Where the top-down walk leaves each requirement: the path of the node
/// and that node's cluster. Children are numbered bus first, then non-bus.
pub fn walk_oracle(root: &Cluster, refs: &[BTreeSet<usize>]) -> Vec<(String, BTreeSet<usize>, bool)> {
    refs.iter()
        .map(|r| {
            let mut node = root;
            let mut path = String::from("0");
            loop {
                let touches = |c: &Cluster| !c.members.is_disjoint(r);
                let nb: Vec<usize> = (0..node.non_bus.len()).filter(|&i| touches(&node.non_bus[i])).collect();
                let b: Vec<usize> = (0..node.bus.len()).filter(|&i| touches(&node.bus[i])).collect();
                let next = match (nb.as_slice(), b.as_slice()) {
                    ([m], _) => node.bus.len() + m,
                    ([], [k]) => *k,
                    _ => break,
                };
                path = format!("{path}.{next}");
                node = if next < node.bus.len() { &node.bus[next] } else { &node.non_bus[next - node.bus.len()] };
            }
            (path, node.members.clone(), node.bus.is_empty() && node.non_bus.is_empty())
        })
        .collect()
}

pub fn column_refs(pr: &mldes::matrix::Dmm) -> Vec<BTreeSet<usize>> {
    (0..pr.cols()).map(|r| (0..pr.rows()).filter(|&i| pr.get(i, r)).collect()).collect()
}

fn cluster_requirements(c: &Cluster, out: &mut Vec<usize>) {
    out.extend(c.requirements.iter().copied());
    for k in c.bus.iter().chain(&c.non_bus) {
        cluster_requirements(k, out);
    }
}

/// Checks validity, plant and requirement conservation and termination of
/// one transformation. Returns a description of the first violation.
pub fn check_propositions(cluster: &Cluster, pr: &mldes::matrix::Dmm) -> Result<(), String> {
    let names: Vec<String> = (0..pr.rows()).map(|i| format!("c{i}")).collect();
    let reqs: Vec<String> = (0..pr.cols()).map(|j| format!("r{j}")).collect();
    let mut violation = None;
    let (tree, stats) = mldes::transform::transform_observed(cluster, pr, &names, &reqs, |c| {
        let mut all = Vec::new();
        cluster_requirements(c, &mut all);
        all.sort_unstable();
        if all != (0..pr.cols()).collect::<Vec<_>>() && violation.is_none() {
            violation = Some(format!("requirement sets {all:?} after a move"));
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(v) = violation {
        return Err(v);
    }
    let refs = column_refs(pr);
    let mut owned = Vec::new();
    let mut present = BTreeSet::new();
    for n in tree.nodes() {
        for &r in &n.requirements {
            owned.push(r);
            if !refs[r].is_subset(&n.plants) {
                return Err(format!("node {} misses plants of r{r}", n.path));
            }
        }
        present.extend(n.plants.iter().copied());
        if n.is_leaf() {
            present.extend(n.members.iter().copied());
        }
    }
    owned.sort_unstable();
    if owned != (0..pr.cols()).collect::<Vec<_>>() {
        return Err(format!("owned requirements {owned:?}"));
    }
    if present != (0..pr.rows()).collect() {
        return Err("a component is missing from the tree".into());
    }
    if tree.root.depth() > cluster.depth() || stats.max_recursion > cluster.depth() {
        return Err(format!(
            "depth {} / recursion {} exceeds clustering depth {}",
            tree.root.depth(),
            stats.max_recursion,
            cluster.depth()
        ));
    }
    Ok(())
}

pub fn random_dmm(rng: &mut StdRng, rows: usize, cols: usize, density: f64) -> mldes::matrix::Dmm {
    let data: Vec<Vec<bool>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_bool(density)).collect()).collect();
    mldes::matrix::Dmm::from_rows(&data)
}
