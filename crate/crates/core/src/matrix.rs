//! Component × requirement DMM and component DSM.

use std::fmt::Write as _;

use crate::model::{ModelSet, RequirementBody};
use crate::refine::ProductSystem;

/// Binary component × requirement reference matrix, stored dense.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dmm {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl Dmm {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged DMM rows");
        Self {
            rows: rows.len(),
            cols,
            cells: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    /// Components referenced by requirement `col`.
    pub fn referenced(&self, col: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows).filter(move |&r| self.get(r, col))
    }

    pub fn to_csv(&self, row_names: &[String], col_names: &[String]) -> String {
        let mut out = String::from("component");
        for c in col_names {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in 0..self.rows {
            out.push_str(&row_names[r]);
            for c in 0..self.cols {
                out.push_str(if self.get(r, c) { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

/// Symmetric component × component dependency counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dsm {
    n: usize,
    cells: Vec<u32>,
}

impl Dsm {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            cells: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "DSM must be square");
        Self {
            n,
            cells: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, a: usize, b: usize) -> u32 {
        self.cells[a * self.n + b]
    }

    pub fn set(&mut self, a: usize, b: usize, value: u32) {
        self.cells[a * self.n + b] = value;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|a| (0..a).all(|b| self.get(a, b) == self.get(b, a)))
    }

    /// Principal submatrix over `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Dsm {
        let mut out = Dsm::zeros(indices.len());
        for (i, &a) in indices.iter().enumerate() {
            for (j, &b) in indices.iter().enumerate() {
                out.set(i, j, self.get(a, b));
            }
        }
        out
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("component");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for a in 0..self.n {
            out.push_str(&names[a]);
            for b in 0..self.n {
                let _ = write!(out, ",{}", self.get(a, b));
            }
            out.push('\n');
        }
        out
    }

    /// Plain-text PPM heat grid, `cell` pixels per entry. Off-diagonal
    /// entries shade from white to blue by value; the diagonal is grey.
    pub fn to_ppm(&self, cell: usize) -> String {
        let side = self.n * cell;
        let max = (0..self.n)
            .flat_map(|a| (0..self.n).filter(move |&b| b != a).map(move |b| (a, b)))
            .map(|(a, b)| self.get(a, b))
            .max()
            .unwrap_or(0)
            .max(1);
        let mut out = format!("P3\n{side} {side}\n255\n");
        for y in 0..side {
            let a = y / cell;
            let mut row = Vec::with_capacity(side);
            for x in 0..side {
                let b = x / cell;
                let rgb = if a == b {
                    (160, 160, 160)
                } else {
                    let shade = 255 - (255 * self.get(a, b) / max);
                    (shade, shade, 255)
                };
                row.push(format!("{} {} {}", rgb.0, rgb.1, rgb.2));
            }
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Component `c` is referenced by requirement `j` when they share an event,
/// or when `j` is an invariant reading a location of a plant in `c`.
pub fn build_dmm(ps: &ProductSystem, model: &ModelSet) -> Dmm {
    let mut pr = Dmm::zeros(ps.len(), model.requirements.len());
    for (j, req) in model.requirements.iter().enumerate() {
        let events = req.events();
        for c in 0..ps.len() {
            if !ps.alphabet(c).is_disjoint(&events) {
                pr.set(c, j, true);
            }
        }
        if let RequirementBody::Invariant { predicate, .. } = &req.body {
            for plant in predicate.plants() {
                pr.set(ps.component_of(plant), j, true);
            }
        }
    }
    pr
}

/// `P = PR · PRᵀ`, accumulated per requirement column.
pub fn dsm_from_dmm(pr: &Dmm) -> Dsm {
    let mut p = Dsm::zeros(pr.rows());
    for j in 0..pr.cols() {
        let refs: Vec<usize> = pr.referenced(j).collect();
        for &a in &refs {
            for &b in &refs {
                p.cells[a * p.n + b] += 1;
            }
        }
    }
    p
}
