//! Markov-flow scores, bus detection and attractor-based partitioning.

use super::{ClusterError, ClusterParams};
use crate::matrix::Dsm;

const MAX_ITERATIONS: usize = 200;
const CONVERGED: f64 = 1e-9;
/// Entries below this are treated as zero when reading attractors.
const MASS_EPS: f64 = 1e-6;
const PRUNE: f64 = 1e-12;

/// Dense square matrix of `f64`, row-major.
#[derive(Clone, Debug, PartialEq)]
struct Matrix {
    n: usize,
    cells: Vec<f64>,
}

impl Matrix {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            cells: vec![0.0; n * n],
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.n + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.cells[i * self.n + j]
    }

    fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.cells[i * n + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    fn normalize_columns(&mut self) {
        for j in 0..self.n {
            let sum: f64 = (0..self.n).map(|i| self.at(i, j)).sum();
            if sum > 0.0 {
                for i in 0..self.n {
                    *self.at_mut(i, j) /= sum;
                }
            }
        }
    }
}

/// Off-diagonal DSM entries, column-stochastic. Columns of isolated
/// components stay zero.
fn transition_matrix(dsm: &Dsm) -> Matrix {
    let n = dsm.len();
    let mut t = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                *t.at_mut(i, j) = f64::from(dsm.get(i, j));
            }
        }
    }
    t.normalize_columns();
    t
}

/// Flow score of each component: the row sums of
/// `F = Σ_{k=1..alpha} (mu·T)^k`, where `T` is the column-stochastic
/// off-diagonal DSM.
pub fn flow_scores(dsm: &Dsm, alpha: u32, mu: f64) -> Vec<f64> {
    let n = dsm.len();
    let mut step = transition_matrix(dsm);
    step.cells.iter_mut().for_each(|v| *v *= mu);
    let mut power = step.clone();
    let mut flow = step.clone();
    for _ in 1..alpha {
        power = power.mul(&step);
        flow.cells
            .iter_mut()
            .zip(&power.cells)
            .for_each(|(f, p)| *f += p);
    }
    (0..n).map(|i| (0..n).map(|j| flow.at(i, j)).sum()).collect()
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        (sorted[m - 1] + sorted[m]) / 2.0
    }
}

/// Local indices split into bus and non-bus components, each ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BusSplit {
    pub bus: Vec<usize>,
    pub non_bus: Vec<usize>,
}

/// A component is a bus when its flow score exceeds `gamma` times the
/// median of the nonzero flow scores. Systems of at most two components and
/// edgeless systems have no bus.
pub fn detect_bus(dsm: &Dsm, gamma: f64, params: &ClusterParams) -> BusSplit {
    let n = dsm.len();
    let everything = BusSplit {
        bus: Vec::new(),
        non_bus: (0..n).collect(),
    };
    if n <= 2 {
        return everything;
    }
    let scores = flow_scores(dsm, params.alpha, params.mu);
    let mut nonzero: Vec<f64> = scores.iter().copied().filter(|&s| s > PRUNE).collect();
    if nonzero.is_empty() {
        return everything;
    }
    nonzero.sort_by(f64::total_cmp);
    // Relative slack keeps equal scores from tripping the threshold at gamma = 1.
    let threshold = gamma * median(&nonzero) * (1.0 + 1e-9);
    let (bus, non_bus) = (0..n).partition(|&i| scores[i] > threshold);
    BusSplit { bus, non_bus }
}

/// Markov clustering of the components of `dsm` (local indices).
///
/// Self-loops weighted by each column's strongest off-diagonal entry seed
/// the walk; expansion (matrix power `alpha`) and inflation (elementwise
/// power `beta`, column renormalisation) alternate until the largest
/// entrywise change drops below 1e-9. Each component then joins the
/// lowest-indexed attractor holding mass in its column, and attractors are
/// chained to the attractor they themselves join.
pub fn markov_partition(dsm: &Dsm, params: &ClusterParams) -> Result<Vec<Vec<usize>>, ClusterError> {
    let n = dsm.len();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![vec![0]]),
        _ => {}
    }

    let mut m = Matrix::zeros(n);
    for j in 0..n {
        let mut strongest = 0.0_f64;
        for i in 0..n {
            if i != j {
                let w = f64::from(dsm.get(i, j));
                *m.at_mut(i, j) = w;
                strongest = strongest.max(w);
            }
        }
        *m.at_mut(j, j) = if strongest > 0.0 { strongest } else { 1.0 };
    }
    m.normalize_columns();

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let mut next = m.clone();
        for _ in 1..params.alpha {
            next = next.mul(&m);
        }
        next.cells.iter_mut().for_each(|v| {
            *v = if *v < PRUNE { 0.0 } else { v.powf(params.beta) };
        });
        next.normalize_columns();
        let delta = next
            .cells
            .iter()
            .zip(&m.cells)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        m = next;
        if delta < CONVERGED {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ClusterError::NoConvergence {
            iterations: MAX_ITERATIONS,
        });
    }

    let attractor: Vec<bool> = (0..n).map(|a| m.at(a, a) > MASS_EPS).collect();
    let joins: Vec<usize> = (0..n)
        .map(|j| {
            (0..n)
                .find(|&a| attractor[a] && m.at(a, j) > MASS_EPS)
                .unwrap_or(j)
        })
        .collect();
    // An attractor joins an attractor of index <= its own, so chains descend.
    let label = |j: usize| {
        let mut a = joins[j];
        while joins[a] != a {
            a = joins[a];
        }
        a
    };

    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut cell_of_label = vec![usize::MAX; n];
    for j in 0..n {
        let l = label(j);
        if cell_of_label[l] == usize::MAX {
            cell_of_label[l] = cells.len();
            cells.push(Vec::new());
        }
        cells[cell_of_label[l]].push(j);
    }
    Ok(cells)
}
