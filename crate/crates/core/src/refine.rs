//! Most refined product system: plants grouped by shared events.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::model::{Automaton, EventId};

/// Partition of the plants into groups with pairwise disjoint alphabets.
/// Group indices are the component indices used by every later stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductSystem {
    groups: Vec<Vec<usize>>,
    names: Vec<String>,
    alphabets: Vec<BTreeSet<EventId>>,
    group_of: Vec<usize>,
}

#[derive(Serialize)]
struct GroupDoc<'a> {
    component: usize,
    name: &'a str,
    plants: Vec<&'a str>,
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Keeps the smaller index as root.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups plants into connected components of the "shares an event"
/// relation. Groups are ordered by their smallest plant index.
pub fn refine(plants: &[Automaton]) -> ProductSystem {
    let mut sets = DisjointSets::new(plants.len());
    let mut first_owner: HashMap<EventId, usize> = HashMap::new();
    for (i, p) in plants.iter().enumerate() {
        for &e in p.alphabet() {
            match first_owner.get(&e) {
                Some(&j) => sets.union(i, j),
                None => {
                    first_owner.insert(e, i);
                }
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_to_group = HashMap::new();
    let mut group_of = vec![0; plants.len()];
    for i in 0..plants.len() {
        let root = sets.find(i);
        let g = *root_to_group.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
        group_of[i] = g;
    }

    let names = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|&i| plants[i].name())
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let alphabets = groups
        .iter()
        .map(|g| {
            g.iter()
                .flat_map(|&i| plants[i].alphabet().iter().copied())
                .collect()
        })
        .collect();
    ProductSystem {
        groups,
        names,
        alphabets,
        group_of,
    }
}

impl ProductSystem {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Plant indices of component `c`, ascending.
    pub fn plants(&self, c: usize) -> &[usize] {
        &self.groups[c]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Component name: the member plant names joined with `+`.
    pub fn name(&self, c: usize) -> &str {
        &self.names[c]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn alphabet(&self, c: usize) -> &BTreeSet<EventId> {
        &self.alphabets[c]
    }

    pub fn component_of(&self, plant: usize) -> usize {
        self.group_of[plant]
    }

    /// Looks a component up by its own name or by the name of a member plant.
    pub fn find(&self, name: &str, plants: &[Automaton]) -> Option<usize> {
        self.names.iter().position(|n| n == name).or_else(|| {
            plants
                .iter()
                .position(|p| p.name() == name)
                .map(|i| self.group_of[i])
        })
    }

    /// All plant indices covered by a set of components.
    pub fn expand<'a>(&'a self, components: impl IntoIterator<Item = &'a usize>) -> Vec<usize> {
        let mut out: Vec<usize> = components
            .into_iter()
            .flat_map(|&c| self.groups[c].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// JSON array mapping each component to its plants.
    pub fn to_json(&self, plants: &[Automaton]) -> String {
        let docs: Vec<GroupDoc> = self
            .groups
            .iter()
            .enumerate()
            .map(|(c, g)| GroupDoc {
                component: c,
                name: &self.names[c],
                plants: g.iter().map(|&i| plants[i].name()).collect(),
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&docs).expect("group mapping serializes");
        s.push('\n');
        s
    }
}
